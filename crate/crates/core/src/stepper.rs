//! IMEX Euler–Maruyama stepping of the regularized system.
//!
//! One step, in order: `n` (implicit diffusion, explicit upwind transport
//! and chemotaxis), `c` (implicit diffusion, explicit upwind transport,
//! multiplicative implicit consumption), `u` (implicit viscosity, explicit
//! mollified transport, buoyancy, drift, Wiener forcing, compensated jumps),
//! then the Leray projection.

use crate::diagnostics::{self, DiagnosticsSettings, DiagnosticsStream};
use crate::error::{Result, ScnsError};
use crate::grid::{ScalarField, VectorField};
use crate::model::{buoyancy, chemotactic_flux, chemotactic_speeds, h_eps_unchecked, jump_g, jump_k, ModelParams};
use crate::noise::{JumpClass, NoiseDraw, NoiseSampler, RngStream};
use crate::ops::{
    advect_conservative, advective_flux, cell_rates, divergence, face_velocities, flux_divergence, laplacian,
    AdvectionScheme, DiffusionScheme, OperatorWorkspace,
};

/// Pointwise tolerance below which a negative density is treated as roundoff.
pub const NEGATIVE_DENSITY_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub n: ScalarField,
    pub c: ScalarField,
    pub u: VectorField,
}

impl State {
    pub fn new(t: f64, n: ScalarField, c: ScalarField, u: VectorField) -> Result<Self> {
        n.same_grid(&c)?;
        c.same_grid(u.component(0))?;
        Ok(Self { t, n, c, u })
    }

    /// `‖div u‖₂ / max(‖u‖₂, 1)`.
    pub fn divergence_defect(&self) -> Result<f64> {
        let d = divergence(&self.u, self.u.grid().bc().u)?;
        Ok(d.inner(&d).sqrt() / self.u.norm_l2().max(1.0))
    }

    /// Checks positivity, the bound `c ≤ c_max` and incompressibility.
    pub fn check_invariants(&self, c_max: f64, div_tol: f64) -> Result<()> {
        if !(self.n.is_finite() && self.c.is_finite() && self.u.is_finite()) {
            return Err(ScnsError::NonFinite(format!("state at t={}", self.t)));
        }
        if self.n.min() < -NEGATIVE_DENSITY_TOLERANCE {
            return Err(ScnsError::NegativeDensity(self.n.min()));
        }
        if self.c.min() < 0.0 || self.c.max() > c_max {
            return Err(ScnsError::ConfigInvalid(format!(
                "concentration left [0, {c_max}]: range [{}, {}]",
                self.c.min(),
                self.c.max()
            )));
        }
        let div = self.divergence_defect()?;
        if div > div_tol {
            return Err(ScnsError::ConfigInvalid(format!("velocity divergence {div:e} above {div_tol:e}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub cfl_safety: f64,
    pub diffusion: DiffusionScheme,
    pub advection: AdvectionScheme,
    pub record_every: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            cfl_safety: 0.5,
            diffusion: DiffusionScheme::BackwardEuler,
            advection: AdvectionScheme::Upwind,
            record_every: 1,
        }
    }
}

/// Per-step bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub courant: f64,
    /// Most negative density value removed by clipping (0 when none).
    pub n_clipped: f64,
    /// Largest correction applied to keep `c` in `[0, max c]`.
    pub c_clamped: f64,
}

/// Largest donor-cell rate over everything transported explicitly this step.
fn courant_rate(u_faces: &VectorField, chemo: &VectorField, mollified_faces: &VectorField) -> f64 {
    let out_u = cell_rates(u_faces, true);
    let in_u = cell_rates(u_faces, false);
    let out_chi = cell_rates(chemo, true);
    let out_m = cell_rates(mollified_faces, true);
    let in_m = cell_rates(mollified_faces, false);
    (0..out_u.len())
        .map(|i| (out_u[i] + out_chi[i]).max(in_u[i]).max(out_m[i]).max(in_m[i]))
        .fold(0.0, f64::max)
}

/// Non-conservative transport `u·∇f = div(u f) − f div_f(u)`.
pub(crate) fn advect_nonconservative(u: &VectorField, f: &ScalarField, scheme: AdvectionScheme) -> Result<ScalarField> {
    let mut out = advect_conservative(u, f, scheme)?;
    let div_faces = flux_divergence(&face_velocities(u));
    for ((o, fv), d) in out.values_mut().iter_mut().zip(f.values()).zip(div_faces.values()) {
        *o -= fv * d;
    }
    Ok(out)
}

/// Explicit transport of every velocity component by `a`.
pub(crate) fn advect_vector(a: &VectorField, u: &VectorField, scheme: AdvectionScheme) -> Result<VectorField> {
    let comps = u
        .components()
        .iter()
        .map(|c| advect_conservative(a, c, scheme))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// Jump and compensator contribution over one step, integrated against the
/// running pre-jump state. Returns `w_final − u − ∫Λ w dt`.
pub(crate) fn jump_increment(u: &VectorField, draw: &NoiseDraw, params: &ModelParams) -> Result<VectorField> {
    let spec = params.noise.jumps();
    let lambda = spec.small_drift_rate();
    let mut w = u.clone();
    let mut comp = VectorField::zeros(u.grid());
    let mut t_prev = draw.t0;
    for (class, ev) in draw.events() {
        comp.axpy(lambda * (ev.time - t_prev), &w);
        let jump = match class {
            JumpClass::Small => jump_k(&w, ev.z)?,
            JumpClass::Large => jump_g(&w, ev.z)?,
        };
        w.axpy(1.0, &jump);
        t_prev = ev.time;
    }
    comp.axpy(lambda * (draw.t0 + draw.dt - t_prev), &w);
    w.axpy(-1.0, u);
    w.axpy(-1.0, &comp);
    Ok(w)
}

/// Advances `state` over `[draw.t0, draw.t0 + draw.dt)`.
pub fn step(
    state: &State,
    params: &ModelParams,
    cfg: &StepConfig,
    draw: &NoiseDraw,
    ws: &mut OperatorWorkspace,
) -> Result<(State, StepReport)> {
    let dt = draw.dt;
    if !(dt > 0.0) {
        return Err(ScnsError::ConfigInvalid(format!("time step must be positive, got {dt}")));
    }
    let grid = *state.n.grid();
    let bc = grid.bc();
    let kin = &params.kinetics;
    let eps = params.eps;
    let d = params.diffusion;

    // (1) bacteria
    let mass = state.n.values().iter().sum::<f64>();
    let mut n_d = ws.diffuse(&state.n, d.d_n, dt, bc.n, cfg.diffusion)?;
    let fix = (mass - n_d.values().iter().sum::<f64>()) / grid.len() as f64;
    n_d.values_mut().iter_mut().for_each(|v| *v += fix);

    let u_faces = face_velocities(&state.u);
    let chemo_speeds = chemotactic_speeds(&state.c, kin);

    // (3a) viscosity first, so the explicit transport speeds are all known
    let u_d = ws.diffuse_vector(&state.u, d.delta, dt, cfg.diffusion)?;
    let a = ws.mollifier(eps).apply(&u_d);
    let a_faces = face_velocities(&a);

    let courant = dt * courant_rate(&u_faces, &chemo_speeds, &a_faces);
    if courant > cfg.cfl_safety {
        return Err(ScnsError::CflViolation {
            courant,
            safety: cfg.cfl_safety,
        });
    }

    let mut flux = advective_flux(&state.u, &n_d, cfg.advection)?;
    flux.axpy(1.0, &chemotactic_flux(&n_d, &state.c, kin, eps)?);
    let div_flux = flux_divergence(&flux);
    let mut n_new = n_d;
    n_new.axpy(-dt, &div_flux);
    let mut n_clipped = 0.0f64;
    for v in n_new.values_mut() {
        if *v < 0.0 {
            n_clipped = n_clipped.min(*v);
            *v = 0.0;
        }
    }
    if n_clipped < -NEGATIVE_DENSITY_TOLERANCE {
        log::warn!("t={}: clipped negative density {n_clipped:e}", state.t);
    }

    // (2) substrate
    let c_max = state.c.max();
    let c_d = ws.diffuse(&state.c, d.d_c, dt, bc.c, cfg.diffusion)?;
    let mut c_new = c_d.clone();
    c_new.axpy(-dt, &advect_nonconservative(&state.u, &c_d, cfg.advection)?);
    let mut c_clamped = 0.0f64;
    for (cv, &nv) in c_new.values_mut().iter_mut().zip(state.n.values()) {
        let clamped = cv.clamp(0.0, c_max);
        c_clamped = c_clamped.max((clamped - *cv).abs());
        let rate = h_eps_unchecked(nv, eps) * kin.f_over_s(clamped);
        *cv = clamped / (1.0 + dt * rate);
    }

    // (3b) fluid
    let mut u_star = u_d.clone();
    u_star.axpy(-dt, &advect_vector(&a, &u_d, cfg.advection)?);
    u_star.axpy(dt, &buoyancy(&n_new, &params.phi)?);
    u_star.axpy(dt * params.noise.h_gain(), &u_d);
    if params.noise.wiener_modes() > 0 {
        u_star.axpy(1.0, &params.noise.apply_g(&state.u, &draw.dw)?);
    }
    if !params.noise.jumps().is_empty() {
        u_star.axpy(1.0, &jump_increment(&state.u, draw, params)?);
    }
    let u_new = ws.leray_project(&u_star)?.velocity;

    if !(n_new.is_finite() && c_new.is_finite() && u_new.is_finite()) {
        return Err(ScnsError::NonFinite(format!("step at t={}", state.t)));
    }
    Ok((
        State {
            t: draw.t0 + dt,
            n: n_new,
            c: c_new,
            u: u_new,
        },
        StepReport {
            courant,
            n_clipped,
            c_clamped,
        },
    ))
}

/// Consecutive states with the draws that connect them.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub draws: Vec<NoiseDraw>,
}

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub t_end: f64,
    pub step: StepConfig,
    pub snapshot_times: Vec<f64>,
    pub keep_trajectory: bool,
    pub diagnostics: DiagnosticsSettings,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub stream: DiagnosticsStream,
    pub snapshots: Vec<State>,
    pub trajectory: Option<Trajectory>,
    pub final_state: State,
    pub steps: usize,
    pub rejected_steps: usize,
    pub max_courant: f64,
    pub min_n_clipped: f64,
    pub max_c_clamped: f64,
}

const MAX_HALVINGS: u32 = 40;

/// Integrates to `t_end`, recording at multiples of `record_every·dt` and at
/// the final time. CFL rejections halve `dt` for the rest of the run; steps
/// are shortened to land on record and snapshot times, so record times do
/// not depend on rejections.
pub fn run(
    initial: &State,
    params: &ModelParams,
    settings: &RunSettings,
    sampler: &NoiseSampler,
    stream: &RngStream,
    ws: &mut OperatorWorkspace,
) -> Result<RunOutput> {
    let dsets = &settings.diagnostics;
    let t_end = settings.t_end;
    let mut cfg = settings.step;
    let record_every = cfg.record_every.max(1);
    let mut state = initial.clone();
    let mut records = vec![diagnostics::record(&state, &params.kinetics, 0.0, dsets)?];
    let mut snaps: Vec<f64> = settings.snapshot_times.iter().copied().filter(|&s| s >= initial.t && s <= t_end).collect();
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let mut snapshots = Vec::new();
    while snaps.first().is_some_and(|&s| s <= state.t) {
        snapshots.push(state.clone());
        snaps.remove(0);
    }
    let mut trajectory = settings.keep_trajectory.then(|| Trajectory {
        states: vec![state.clone()],
        draws: Vec::new(),
    });
    let mut me_acc = 0.0;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut halvings = 0u32;
    let mut out = RunOutput {
        stream: DiagnosticsStream::default(),
        snapshots: Vec::new(),
        trajectory: None,
        final_state: state.clone(),
        steps: 0,
        rejected_steps: 0,
        max_courant: 0.0,
        min_n_clipped: 0.0,
        max_c_clamped: 0.0,
    };
    let tol = 1e-12 * t_end.abs().max(1.0);
    let record_span = record_every as f64 * cfg.dt;
    let mut next_record = 1u64;
    let record_time = |k: u64| (initial.t + k as f64 * record_span).min(t_end);
    while state.t < t_end - tol {
        let mut dt = cfg.dt.min(t_end - state.t).min(record_time(next_record) - state.t);
        if let Some(&s) = snaps.first() {
            if s - state.t < dt {
                dt = s - state.t;
            }
        }
        let draw = sampler.draw(stream, steps as u64, state.t, dt);
        let (next, report) = match step(&state, params, &cfg, &draw, ws) {
            Ok(r) => r,
            Err(ScnsError::CflViolation { courant, safety }) => {
                halvings += 1;
                rejected += 1;
                if halvings > MAX_HALVINGS {
                    return Err(ScnsError::CflViolation { courant, safety });
                }
                log::debug!("t={}: courant {courant:.3} > {safety}, halving dt", state.t);
                cfg.dt *= 0.5;
                continue;
            }
            Err(e) => return Err(e),
        };
        me_acc += diagnostics::martingale_increment(&state.u, &draw, &params.noise, dsets.c_dagger, dsets.compensate)?;
        out.max_courant = out.max_courant.max(report.courant);
        out.min_n_clipped = out.min_n_clipped.min(report.n_clipped);
        out.max_c_clamped = out.max_c_clamped.max(report.c_clamped);
        steps += 1;
        if let Some(tr) = trajectory.as_mut() {
            tr.states.push(next.clone());
            tr.draws.push(draw);
        }
        state = next;
        if state.t >= record_time(next_record) - tol {
            records.push(diagnostics::record(&state, &params.kinetics, me_acc, dsets)?);
            me_acc = 0.0;
            next_record += 1;
        }
        while snaps.first().is_some_and(|&s| s <= state.t + tol) {
            snapshots.push(state.clone());
            snaps.remove(0);
        }
    }
    out.stream = DiagnosticsStream {
        records,
        has_increments: true,
    };
    out.snapshots = snapshots;
    out.trajectory = trajectory;
    out.final_state = state;
    out.steps = steps;
    out.rejected_steps = rejected;
    Ok(out)
}

/// Discrete weak-form residuals of the three equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakResidual {
    pub n: f64,
    pub c: f64,
    pub u: f64,
}

/// Test functions for [`weak_form_residual`]. `psi` should be discretely
/// divergence-free so the pressure drops out.
#[derive(Clone, Debug)]
pub struct TestFunctions {
    pub phi_n: ScalarField,
    pub phi_c: ScalarField,
    pub psi: VectorField,
}

/// `⟨X(T),φ⟩ − ⟨X(0),φ⟩ − Σ_k ⟨F(X_k), φ⟩ dt_k − ⟨stochastic_k, φ⟩`, with
/// every right-hand side term taken at the left endpoint of its step and
/// built from the stepper's own discrete operators.
pub fn weak_form_residual(
    traj: &Trajectory,
    params: &ModelParams,
    cfg: &StepConfig,
    tests: &TestFunctions,
    ws: &mut OperatorWorkspace,
) -> Result<WeakResidual> {
    let states = &traj.states;
    if states.len() < 2 {
        return Err(ScnsError::WindowTooShort(states.len()));
    }
    if traj.draws.len() < states.len() - 1 {
        return Err(ScnsError::MissingNoiseRecord(traj.draws.len()));
    }
    let kin = &params.kinetics;
    let eps = params.eps;
    let d = params.diffusion;
    let bc = states[0].n.grid().bc();
    let first = &states[0];
    let last = &states[states.len() - 1];
    let mut rn = last.n.inner(&tests.phi_n) - first.n.inner(&tests.phi_n);
    let mut rc = last.c.inner(&tests.phi_c) - first.c.inner(&tests.phi_c);
    let mut ru = last.u.inner(&tests.psi) - first.u.inner(&tests.psi);
    for (k, s) in states[..states.len() - 1].iter().enumerate() {
        let draw = &traj.draws[k];
        let dt = states[k + 1].t - s.t;
        if (draw.t0 - s.t).abs() > 1e-12 * s.t.abs().max(1.0) {
            return Err(ScnsError::MissingNoiseRecord(k));
        }
        // n
        let mut flux = advective_flux(&s.u, &s.n, cfg.advection)?;
        flux.axpy(1.0, &chemotactic_flux(&s.n, &s.c, kin, eps)?);
        let mut fnv = laplacian(&s.n, bc.n)?;
        fnv.scale(d.d_n);
        fnv.axpy(-1.0, &flux_divergence(&flux));
        rn -= dt * fnv.inner(&tests.phi_n);
        // c
        let mut fc = laplacian(&s.c, bc.c)?;
        fc.scale(d.d_c);
        fc.axpy(-1.0, &advect_nonconservative(&s.u, &s.c, cfg.advection)?);
        let cons = crate::model::consumption(&s.n, &s.c, kin, eps)?;
        fc.axpy(-1.0, &cons);
        rc -= dt * fc.inner(&tests.phi_c);
        // u
        let visc = VectorField::from_components(
            s.u.components()
                .iter()
                .map(|comp| laplacian(comp, bc.u))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let a = ws.mollifier(eps).apply(&s.u);
        let mut fu = visc.scaled(d.delta);
        fu.axpy(-1.0, &advect_vector(&a, &s.u, cfg.advection)?);
        fu.axpy(1.0, &buoyancy(&s.n, &params.phi)?);
        fu.axpy(params.noise.h_gain(), &s.u);
        ru -= dt * fu.inner(&tests.psi);
        if params.noise.wiener_modes() > 0 {
            ru -= params.noise.apply_g(&s.u, &draw.dw)?.inner(&tests.psi);
        }
        if !params.noise.jumps().is_empty() {
            ru -= jump_increment(&s.u, draw, params)?.inner(&tests.psi);
        }
    }
    Ok(WeakResidual {
        n: rn.abs(),
        c: rc.abs(),
        u: ru.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundarySpec, Grid};
    use crate::model::{Diffusion, Kinetics, NoiseCoefficients};
    use crate::noise::{Atom, JumpEvent, JumpSpec};

    fn params(grid: &Grid, jumps: JumpSpec) -> ModelParams {
        let mut ws = OperatorWorkspace::new(grid);
        let psi = VectorField::from_fn(grid, |x| [(2.0 * std::f64::consts::PI * x[1]).sin(), 0.0, 0.0]);
        let noise = NoiseCoefficients::new(&psi, 0.0, 4, jumps, &mut ws).unwrap();
        ModelParams::new(Kinetics::prototype(1.0), ScalarField::zeros(grid), 0.1, Diffusion::default(), noise).unwrap()
    }

    #[test]
    fn jump_increment_is_compensated_product() {
        let g = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::periodic()).unwrap();
        let spec = JumpSpec::new(vec![Atom { z: 0.5, rate: 2.0 }], vec![Atom { z: 2.0, rate: 1.0 }]).unwrap();
        let p = params(&g, spec);
        let u = VectorField::from_fn(&g, |x| [1.0, x[0], 0.0]);
        let draw = NoiseDraw {
            step: 0,
            t0: 0.0,
            dt: 0.1,
            dw: vec![0.0; 4],
            small: vec![JumpEvent { time: 0.02, z: 0.5 }],
            large: vec![JumpEvent { time: 0.05, z: 2.0 }],
        };
        // w: 1 → 1.5 → 2.25; compensator 1·(0.02·1 + 0.03·1.5 + 0.05·2.25)
        let expect = 2.25 - 1.0 - (0.02 + 0.045 + 0.1125);
        let got = jump_increment(&u, &draw, &p).unwrap();
        let mut diff = got.clone();
        diff.axpy(-expect, &u);
        assert!(diff.max_abs() < 1e-15);
    }

    #[test]
    fn quiet_zero_velocity_stays_zero() {
        let g = Grid::build(2, &[1.0, 1.0], &[16, 16], BoundarySpec::walled()).unwrap();
        let p = params(&g, JumpSpec::none());
        let n = ScalarField::from_fn(&g, |x| 1.0 + (-(x[0] - 0.5).powi(2) * 20.0).exp());
        let c = ScalarField::from_fn(&g, |x| 0.5 + 0.3 * (std::f64::consts::PI * x[1]).cos());
        let mut s = State::new(0.0, n, c, VectorField::zeros(&g)).unwrap();
        let mut ws = OperatorWorkspace::new(&g);
        let cfg = StepConfig::default();
        for k in 0..20 {
            let draw = NoiseDraw::quiet(k, s.t, 1e-3, 4);
            s = step(&s, &p, &cfg, &draw, &mut ws).unwrap().0;
        }
        assert!(s.u.max_abs() < 1e-12);
    }
}
