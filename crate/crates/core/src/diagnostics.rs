//! Entropy-energy functionals, dissipation, martingale increments and the
//! inequality audits evaluated along trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScnsError};
use crate::grid::{integrate, lp_norm, Bc, Grid, ScalarField, VectorField};
use crate::model::{h_eps_unchecked, Kinetics, NoiseCoefficients};
use crate::noise::{JumpClass, NoiseDraw};
use crate::ops::{laplacian, partial, second_partial};
use crate::stepper::State;

/// Default singular-denominator floor.
pub const FLOOR: f64 = 1e-12;

/// Relative denominator floor of [`ms_boundary_ratio`]: boundary points where
/// `|∇c|²` is below this fraction of its boundary maximum are not ratio
/// points of their own.
pub const MS_RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsSettings {
    /// Weight of the kinetic energy inside the martingale part.
    pub c_dagger: f64,
    pub floor: f64,
    /// Evaluate the boundary ratio on walled grids.
    pub ms_ratio: bool,
    /// Subtract jump compensators in the martingale increment; turning this
    /// off is a negative control.
    pub compensate: bool,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        Self {
            c_dagger: 1.0,
            floor: FLOOR,
            ms_ratio: false,
            compensate: true,
        }
    }
}

/// Functional values at one time. Field names are the serialized names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_n: f64,
    pub linf_c: f64,
    pub entropy: f64,
    pub grad_psi_energy: f64,
    pub kinetic: f64,
    pub diss_n: f64,
    pub diss_c4: f64,
    pub diss_lap: f64,
    pub diss_u: f64,
    pub me_inc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ms_ratio: Option<f64>,
    pub aux_grad_sqrt_n: f64,
    pub aux_grad_c_quarter: f64,
    pub aux_n_l53: f64,
    pub aux_u_l103: f64,
}

impl DiagnosticsRecord {
    /// Field names in serialization order (`ms_ratio` included).
    pub const FIELDS: [&'static str; 16] = [
        "t",
        "mass_n",
        "linf_c",
        "entropy",
        "grad_psi_energy",
        "kinetic",
        "diss_n",
        "diss_c4",
        "diss_lap",
        "diss_u",
        "me_inc",
        "ms_ratio",
        "aux_grad_sqrt_n",
        "aux_grad_c_quarter",
        "aux_n_l53",
        "aux_u_l103",
    ];

    /// `∫n ln n + ½∫|∇Ψ(c)|² + c†∫|u|²`.
    pub fn energy(&self, c_dagger: f64) -> f64 {
        self.entropy + self.grad_psi_energy + c_dagger * self.kinetic
    }

    /// `½∫|∇n|²/n + d₁∫|∇c|⁴/c³ + d₂∫|Δc|²/c + w_u ∫|∇u|²`.
    pub fn dissipation(&self, d1: f64, d2: f64, w_u: f64) -> f64 {
        self.diss_n + d1 * self.diss_c4 + d2 * self.diss_lap + w_u * self.diss_u
    }
}

/// A record stream plus whether martingale increments were tracked.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsStream {
    pub records: Vec<DiagnosticsRecord>,
    pub has_increments: bool,
}

impl DiagnosticsStream {
    /// `𝓜_E` at each record time.
    pub fn me_path(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.records
            .iter()
            .map(|r| {
                acc += r.me_inc;
                acc
            })
            .collect()
    }
}

/// Per-cell `½ Σ_axis [w(f_i, f_{i+1}) (D⁺f)² + w(f_{i-1}, f_i) (D⁻f)²]`,
/// i.e. the compact face-difference form of `w |∇f|²`, using the ghost rule
/// `bc` on walls.
pub fn face_gradient_density(f: &ScalarField, bc: Bc, w: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
    let grid = *f.grid();
    grid.check_bc(bc)?;
    let v = f.values();
    let out = (0..grid.len())
        .map(|idx| {
            let c = grid.coords(idx);
            let mut acc = 0.0;
            for axis in 0..grid.dim() {
                let h = grid.spacing()[axis];
                let fp = grid.neighbor(v, idx, c[axis], axis, true, bc);
                let fm = grid.neighbor(v, idx, c[axis], axis, false, bc);
                let dp = (fp - v[idx]) / h;
                let dm = (v[idx] - fm) / h;
                acc += 0.5 * (w(v[idx], fp) * dp * dp + w(fm, v[idx]) * dm * dm);
            }
            acc
        })
        .collect();
    ScalarField::from_values(&grid, out)
}

fn unit(_: f64, _: f64) -> f64 {
    1.0
}

/// `∫ n ln n` with `0 ln 0 = 0`.
pub fn entropy(n: &ScalarField) -> f64 {
    integrate(&n.map(|v| if v > 0.0 { v * v.ln() } else { 0.0 }))
}

/// `½∫|∇Ψ(c)|² = ½∫|∇c|²/θ(c)`, with `θ` evaluated at face averages.
pub fn grad_psi_energy(c: &ScalarField, kin: &Kinetics, floor: f64) -> Result<f64> {
    let bc = c.grid().bc().c;
    let g = face_gradient_density(c, bc, |a, b| 1.0 / kin.theta(0.5 * (a + b)).max(floor))?;
    Ok(0.5 * integrate(&g))
}

/// `∫|u|²`.
pub fn kinetic(u: &VectorField) -> f64 {
    u.inner(u)
}

/// `𝓔 = ∫(n ln n + ½|∇Ψ(c)|² + c†|u|²)`.
pub fn entropy_energy(state: &State, kin: &Kinetics, c_dagger: f64) -> Result<f64> {
    Ok(entropy(&state.n) + grad_psi_energy(&state.c, kin, FLOOR)? + c_dagger * kinetic(&state.u))
}

/// The four dissipation integrals: `½∫|∇n|²/n`, `∫|∇c|⁴/c³`, `∫|Δc|²/c`,
/// `∫|∇u|²`.
pub fn dissipation(state: &State, floor: f64) -> Result<[f64; 4]> {
    let grid = *state.n.grid();
    let bc = grid.bc();
    let dn = face_gradient_density(&state.n, bc.n, |a, b| 1.0 / (0.5 * (a + b)).max(floor))?;
    let gc = face_gradient_density(&state.c, bc.c, unit)?;
    let c4 = gc.zip_map(&state.c, |g, c| g * g / c.max(floor).powi(3));
    let lap = laplacian(&state.c, bc.c)?;
    let lc = lap.zip_map(&state.c, |l, c| l * l / c.max(floor));
    let mut du = 0.0;
    for comp in state.u.components() {
        du += integrate(&face_gradient_density(comp, bc.u, unit)?);
    }
    Ok([0.5 * integrate(&dn), integrate(&c4), integrate(&lc), du])
}

fn aux_bounds(state: &State) -> Result<[f64; 4]> {
    let bc = state.n.grid().bc();
    let sqrt_n = state.n.map(|v| v.max(0.0).sqrt());
    let g_sqrt = integrate(&face_gradient_density(&sqrt_n, bc.n, unit)?);
    let c_q = state.c.map(|v| v.max(0.0).powf(0.25));
    let g_q = face_gradient_density(&c_q, bc.c, unit)?;
    let g_q4 = integrate(&g_q.map(|g| g * g));
    let n53 = lp_norm(&state.n, 5.0 / 3.0)?;
    let u103 = lp_norm(&state.u.magnitude(), 10.0 / 3.0)?;
    Ok([g_sqrt, g_q4, n53, u103])
}

/// Every functional of a [`DiagnosticsRecord`] at `state`.
pub fn record(state: &State, kin: &Kinetics, me_inc: f64, settings: &DiagnosticsSettings) -> Result<DiagnosticsRecord> {
    let diss = dissipation(state, settings.floor)?;
    let aux = aux_bounds(state)?;
    let ms_ratio = if settings.ms_ratio && !state.c.grid().is_periodic() {
        Some(ms_boundary_ratio(&state.c)?)
    } else {
        None
    };
    let rec = DiagnosticsRecord {
        t: state.t,
        mass_n: integrate(&state.n),
        linf_c: lp_norm(&state.c, f64::INFINITY)?,
        entropy: entropy(&state.n),
        grad_psi_energy: grad_psi_energy(&state.c, kin, settings.floor)?,
        kinetic: kinetic(&state.u),
        diss_n: diss[0],
        diss_c4: diss[1],
        diss_lap: diss[2],
        diss_u: diss[3],
        me_inc,
        ms_ratio,
        aux_grad_sqrt_n: aux[0],
        aux_grad_c_quarter: aux[1],
        aux_n_l53: aux[2],
        aux_u_l103: aux[3],
    };
    Ok(rec)
}

/// Energy-part martingale increment over one step:
/// `2c†⟨u, g(u)dW⟩` plus the compensated small- and large-jump integrals of
/// `‖J‖² + 2⟨w, J⟩` against the running pre-jump state `w`.
pub fn martingale_increment(
    u: &VectorField,
    draw: &NoiseDraw,
    coeffs: &NoiseCoefficients,
    c_dagger: f64,
    compensated: bool,
) -> Result<f64> {
    let mut acc = 0.0;
    if coeffs.wiener_modes() > 0 {
        acc += 2.0 * u.inner(&coeffs.apply_g(u, &draw.dw)?);
    }
    let spec = coeffs.jumps();
    if spec.is_empty() {
        return Ok(c_dagger * acc);
    }
    // K(w,z) = z w and G(w,z) = w/z, so every term is a multiple of ‖w‖²
    let q_small = |z: f64| z * z + 2.0 * z;
    let q_large = |z: f64| 1.0 / (z * z) + 2.0 / z;
    let comp_rate: f64 = if compensated {
        spec.small().iter().map(|a| a.rate * q_small(a.z)).sum::<f64>()
            + spec.large().iter().map(|a| a.rate * q_large(a.z)).sum::<f64>()
    } else {
        0.0
    };
    let mut w2 = u.inner(u);
    let mut t_prev = draw.t0;
    for (class, ev) in draw.events() {
        acc -= comp_rate * (ev.time - t_prev) * w2;
        let (q, factor) = match class {
            JumpClass::Small => (q_small(ev.z), 1.0 + ev.z),
            JumpClass::Large => (q_large(ev.z), 1.0 + 1.0 / ev.z),
        };
        acc += q * w2;
        w2 *= factor * factor;
        t_prev = ev.time;
    }
    acc -= comp_rate * (draw.t0 + draw.dt - t_prev) * w2;
    Ok(c_dagger * acc)
}

/// Per-state right-hand side pieces of the entropy identity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EntropyRates {
    /// `∫|∇n|²/n`
    pub fisher: f64,
    /// `∫θ(c)|D²ρ(c)|²`
    pub hessian: f64,
    /// `∫h_ε(n)(fθ′/(2θ²) − f′/θ)|∇c|²`
    pub consumption: f64,
    /// `∫(Δc/θ − ½θ′/θ²|∇c|²)(u·∇c)`
    pub convection: f64,
    /// `½∫θ″/θ²|∇c|⁴`
    pub curvature: f64,
    /// `½∮θ⁻¹ ∂|∇c|²/∂ν` with the outward normal (0 on periodic boxes)
    pub boundary: f64,
}

impl EntropyRates {
    /// `d/dt[∫n ln n + ½∫|∇Ψ(c)|²]` predicted by the identity.
    pub fn predicted_rate(&self) -> f64 {
        -self.fisher - self.hessian + self.consumption + self.convection + self.curvature + self.boundary
    }
}

/// Evaluates every term of the entropy identity at one state.
pub fn entropy_rates(state: &State, kin: &Kinetics, eps: f64, floor: f64) -> Result<EntropyRates> {
    let grid = *state.n.grid();
    let bc = grid.bc();
    let dim = grid.dim();
    let c = &state.c;
    let cv = c.values();
    let fisher = 2.0 * dissipation(state, floor)?[0];
    let grads: Vec<ScalarField> = (0..dim).map(|a| partial(c, a, bc.c)).collect::<Result<_>>()?;
    let g2 = face_gradient_density(c, bc.c, unit)?;
    let lap = laplacian(c, bc.c)?;
    let th: Vec<(f64, f64, f64)> = cv.iter().map(|&s| kin.theta_derivs(s.max(floor))).collect();

    let mut hess = vec![0.0; grid.len()];
    for a in 0..dim {
        for b in 0..dim {
            let dab = second_partial(c, a, b, bc.c)?;
            for i in 0..grid.len() {
                let (t, t1, _) = th[i];
                let t = t.max(floor);
                let rho1 = 1.0 / t;
                let rho2 = -t1 / (t * t);
                let d2 = rho1 * dab.values()[i] + rho2 * grads[a].values()[i] * grads[b].values()[i];
                hess[i] += t * d2 * d2;
            }
        }
    }
    let mut cons = vec![0.0; grid.len()];
    let mut conv = vec![0.0; grid.len()];
    let mut curv = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let (t, t1, t2) = th[i];
        let t = t.max(floor);
        let s = cv[i].max(0.0);
        let g = g2.values()[i];
        let he = h_eps_unchecked(state.n.values()[i], eps);
        cons[i] = he * (kin.f(s) * t1 / (2.0 * t * t) - kin.f_prime(s) / t) * g;
        let u_dot: f64 = (0..dim).map(|a| state.u.component(a).values()[i] * grads[a].values()[i]).sum();
        conv[i] = (lap.values()[i] / t - 0.5 * t1 / (t * t) * g) * u_dot;
        curv[i] = 0.5 * t2 / (t * t) * g * g;
    }
    let field = |v: Vec<f64>| ScalarField::from_values(&grid, v).map(|f| integrate(&f));
    let boundary = if grid.is_periodic() {
        0.0
    } else {
        boundary_term(c, kin, floor)?
    };
    Ok(EntropyRates {
        fisher,
        hessian: field(hess)?,
        consumption: field(cons)?,
        convection: field(conv)?,
        curvature: field(curv)?,
        boundary,
    })
}

/// Centered `|∇c|²` with the scalar ghost rule.
fn centered_grad_sq(c: &ScalarField) -> Result<ScalarField> {
    let grid = *c.grid();
    let mut g = ScalarField::zeros(&grid);
    for a in 0..grid.dim() {
        let d = partial(c, a, grid.bc().c)?;
        g.axpy(1.0, &d.map(|v| v * v));
    }
    Ok(g)
}

/// Visits every wall cell: `(axis, [idx0, idx1, idx2])` listing the wall
/// cell and its next two neighbours along the inward normal.
fn for_each_wall_cell(grid: &Grid, mut visit: impl FnMut(usize, [usize; 3])) {
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        for axis in 0..grid.dim() {
            let n = grid.resolution()[axis];
            let s = grid.stride(axis);
            if c[axis] == 0 {
                visit(axis, [idx, idx + s, idx + 2 * s]);
            }
            if c[axis] == n - 1 {
                visit(axis, [idx, idx - s, idx - 2 * s]);
            }
        }
    }
}

/// Outward normal derivative at the wall from the three cell centres at
/// distances h/2, 3h/2, 5h/2.
#[inline]
fn outward_derivative(g: &[f64], cells: [usize; 3], h: f64) -> f64 {
    -(-2.0 * g[cells[0]] + 3.0 * g[cells[1]] - g[cells[2]]) / h
}

fn boundary_term(c: &ScalarField, kin: &Kinetics, floor: f64) -> Result<f64> {
    let grid = *c.grid();
    let g = centered_grad_sq(c)?;
    let gv = g.values();
    let cv = c.values();
    let mut acc = 0.0;
    for_each_wall_cell(&grid, |axis, cells| {
        let h = grid.spacing()[axis];
        let area = grid.cell_volume() / h;
        let theta = kin.theta(cv[cells[0]].max(floor)).max(floor);
        acc += 0.5 * outward_derivative(gv, cells, h) / theta * area;
    });
    Ok(acc)
}

/// `|E(t_last) − E(t_0) − ∫ predicted_rate dt|` over a window of
/// consecutive noise-free states, with `E = ∫n ln n + ½∫|∇Ψ(c)|²` and the
/// trapezoid rule in time.
pub fn entropy_identity_residual(window: &[State], kin: &Kinetics, eps: f64) -> Result<f64> {
    if window.len() < 2 {
        return Err(ScnsError::WindowTooShort(window.len()));
    }
    let e = |s: &State| -> Result<f64> { Ok(entropy(&s.n) + grad_psi_energy(&s.c, kin, FLOOR)?) };
    let rates = window
        .iter()
        .map(|s| entropy_rates(s, kin, eps, FLOOR).map(|r| r.predicted_rate()))
        .collect::<Result<Vec<f64>>>()?;
    let mut integral = 0.0;
    for k in 0..window.len() - 1 {
        integral += 0.5 * (rates[k] + rates[k + 1]) * (window[k + 1].t - window[k].t);
    }
    Ok((e(&window[window.len() - 1])? - e(&window[0])? - integral).abs())
}

/// Empirical `κ`: the largest boundary value of `(∂|∇c|²/∂ν) / (2|∇c|²)`,
/// with the denominator floored at `max(FLOOR, rel_floor · max_∂ |∇c|²)`.
pub fn ms_boundary_ratio_with(c: &ScalarField, rel_floor: f64) -> Result<f64> {
    let grid = *c.grid();
    if grid.is_periodic() {
        return Err(ScnsError::PeriodicDomain);
    }
    let g = centered_grad_sq(c)?;
    let gv = g.values();
    let mut g_max = 0.0f64;
    for_each_wall_cell(&grid, |_, cells| g_max = g_max.max(gv[cells[0]]));
    let den_floor = FLOOR.max(rel_floor * g_max);
    let mut ratio = f64::NEG_INFINITY;
    for_each_wall_cell(&grid, |axis, cells| {
        let num = outward_derivative(gv, cells, grid.spacing()[axis]);
        ratio = ratio.max(num / (2.0 * gv[cells[0]].max(den_floor)));
    });
    // constant fields give ±0; report a plain zero
    Ok(if ratio == 0.0 { 0.0 } else { ratio })
}

/// [`ms_boundary_ratio_with`] at [`MS_RELATIVE_FLOOR`].
pub fn ms_boundary_ratio(c: &ScalarField) -> Result<f64> {
    ms_boundary_ratio_with(c, MS_RELATIVE_FLOOR)
}

/// Constants of the weak entropy-energy inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstants {
    pub c_dagger: f64,
    pub d1: f64,
    pub d2: f64,
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyAudit {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`; the inequality holds when this is `≤ tolerance`.
    pub defect: f64,
    /// `∫φ(‖u‖² + 1) dt`, the factor multiplying `C`.
    pub c_weight: f64,
    pub passed: bool,
}

/// Audits the weak inequality with `φ(t) = (1 − (t − t₀)/T)₊` over the span
/// of `stream`, trapezoid quadrature in time and left-point sums for
/// `∫φ d𝓜_E`.
pub fn energy_inequality_audit(stream: &DiagnosticsStream, k: &EnergyConstants, tolerance: f64) -> Result<EnergyAudit> {
    let rec = &stream.records;
    if rec.len() < 2 || rec[rec.len() - 1].t <= rec[0].t {
        return Ok(EnergyAudit {
            lhs: 0.0,
            rhs: 0.0,
            defect: 0.0,
            c_weight: 0.0,
            passed: true,
        });
    }
    if !stream.has_increments {
        return Err(ScnsError::MissingIncrements);
    }
    let t0 = rec[0].t;
    let span = rec[rec.len() - 1].t - t0;
    let phi = |t: f64| (1.0 - (t - t0) / span).max(0.0);
    let mut lhs = 0.0;
    let mut c_weight = 0.0;
    let mut mart = 0.0;
    for w in rec.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        let fa = a.energy(k.c_dagger) / span + phi(a.t) * a.dissipation(k.d1, k.d2, 0.5 * k.c_dagger);
        let fb = b.energy(k.c_dagger) / span + phi(b.t) * b.dissipation(k.d1, k.d2, 0.5 * k.c_dagger);
        lhs += 0.5 * (fa + fb) * dt;
        c_weight += 0.5 * (phi(a.t) * (a.kinetic + 1.0) + phi(b.t) * (b.kinetic + 1.0)) * dt;
        mart += phi(a.t) * b.me_inc;
    }
    let rhs = rec[0].energy(k.c_dagger) + k.c * c_weight + mart;
    let defect = lhs - rhs;
    Ok(EnergyAudit {
        lhs,
        rhs,
        defect,
        c_weight,
        passed: defect <= tolerance,
    })
}

/// Smallest `C ≥ 0` closing the inequality on every stream.
pub fn fit_energy_constant(streams: &[DiagnosticsStream], k: &EnergyConstants) -> Result<f64> {
    let mut c_min = 0.0f64;
    let zero = EnergyConstants { c: 0.0, ..*k };
    for s in streams {
        let a = energy_inequality_audit(s, &zero, 0.0)?;
        if a.c_weight > 0.0 {
            c_min = c_min.max(a.defect / a.c_weight);
        }
    }
    Ok(c_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundarySpec;
    use std::f64::consts::{E, PI};

    fn unit_state(bc: BoundarySpec, n: f64) -> State {
        let g = Grid::build(2, &[1.0, 1.0], &[16, 16], bc).unwrap();
        State::new(0.0, ScalarField::constant(&g, n), ScalarField::constant(&g, 0.4), VectorField::zeros(&g)).unwrap()
    }

    #[test]
    fn entropy_energy_examples() {
        let kin = Kinetics::prototype(1.0);
        assert_eq!(entropy_energy(&unit_state(BoundarySpec::periodic(), 1.0), &kin, 1.0).unwrap(), 0.0);
        assert!((entropy_energy(&unit_state(BoundarySpec::periodic(), E), &kin, 1.0).unwrap() - E).abs() < 1e-13);
        let half = entropy_energy(&unit_state(BoundarySpec::walled(), 0.5), &kin, 1.0).unwrap();
        assert!((half - 0.5 * 0.5f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn constant_state_has_no_dissipation() {
        let d = dissipation(&unit_state(BoundarySpec::walled(), 2.0), FLOOR).unwrap();
        assert_eq!(d, [0.0; 4]);
    }

    #[test]
    fn periodic_shear_dissipation() {
        let g = Grid::build(2, &[1.0, 1.0], &[128, 128], BoundarySpec::periodic()).unwrap();
        let u = VectorField::from_fn(&g, |x| [(2.0 * PI * x[1]).sin() / (2.0 * PI), 0.0, 0.0]);
        let s = State::new(0.0, ScalarField::constant(&g, 1.0), ScalarField::constant(&g, 1.0), u).unwrap();
        let d = dissipation(&s, FLOOR).unwrap();
        assert!((d[3] - 0.5).abs() < 1e-3, "{}", d[3]);
    }

    #[test]
    fn constant_field_ratio_is_zero_and_periodic_is_rejected() {
        let s = unit_state(BoundarySpec::walled(), 1.0);
        assert_eq!(ms_boundary_ratio(&s.c).unwrap(), 0.0);
        let p = unit_state(BoundarySpec::periodic(), 1.0);
        assert_eq!(ms_boundary_ratio(&p.c), Err(ScnsError::PeriodicDomain));
    }

    #[test]
    fn empty_audit_has_zero_defect() {
        let a = energy_inequality_audit(&DiagnosticsStream::default(), &EnergyConstants { c_dagger: 1.0, d1: 0.1, d2: 0.1, c: 0.0 }, 0.0).unwrap();
        assert_eq!(a.defect, 0.0);
    }
}
