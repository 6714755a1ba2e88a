//! Invariant suites run by `scns verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{
    energy_inequality_audit, entropy_identity_residual, martingale_increment, ms_boundary_ratio, DiagnosticsSettings,
    EnergyConstants,
};
use crate::error::{Result, ScnsError};
use crate::grid::{integrate, BoundarySpec, Grid, ScalarField, VectorField};
use crate::model::{h_eps, h_eps_prime, Diffusion, FunctionSpec, Kinetics, ModelParams, NoiseCoefficients};
use crate::noise::{sample_jumps, sample_wiener, Atom, JumpSpec, NoiseSampler, RngStream};
use crate::ops::{advect_conservative, divergence, gradient, laplacian, AdvectionScheme, Mollifier, OperatorWorkspace};
use crate::stepper::{run, weak_form_residual, RunSettings, State, StepConfig, TestFunctions};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Ops,
    Model,
    Noise,
    Energy,
    WeakForm,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "ops" => Suite::Ops,
            "model" => Suite::Model,
            "noise" => Suite::Noise,
            "energy" => Suite::Energy,
            "weakform" => Suite::WeakForm,
            "all" => Suite::All,
            _ => return None,
        })
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Ops => ops_suite()?,
        Suite::Model => model_suite()?,
        Suite::Noise => noise_suite()?,
        Suite::Energy => energy_suite()?,
        Suite::WeakForm => weakform_suite()?,
        Suite::All => {
            let mut v = ops_suite()?;
            v.extend(model_suite()?);
            v.extend(noise_suite()?);
            v.extend(energy_suite()?);
            v.extend(weakform_suite()?);
            v
        }
    })
}

fn random_scalar(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let v = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::from_values(grid, v).expect("grid-sized buffer")
}

fn random_vector(grid: &Grid, rng: &mut ChaCha8Rng) -> VectorField {
    VectorField::from_components((0..grid.dim()).map(|_| random_scalar(grid, rng)).collect()).expect("same grid")
}

fn ops_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let per = Grid::build(2, &[1.0, 1.0], &[16, 16], BoundarySpec::periodic())?;
    let wal = Grid::build(2, &[1.0, 1.0], &[16, 12], BoundarySpec::walled())?;

    let lap = laplacian(&ScalarField::constant(&wal, 3.0), wal.bc().n)?;
    out.push(check("ops.laplacian_constants", lap.max_abs() == 0.0, format!("max {:e}", lap.max_abs())));

    let f = random_scalar(&wal, &mut rng);
    let m = integrate(&laplacian(&f, wal.bc().n)?).abs();
    out.push(check("ops.neumann_mass", m <= 1e-12 * f.max_abs().max(1.0) * 256.0, format!("∫Δf = {m:e}")));

    let f = random_scalar(&per, &mut rng);
    let v = random_vector(&per, &mut rng);
    let lhs = gradient(&f, per.bc().n)?.inner(&v);
    let rhs = -f.inner(&divergence(&v, per.bc().u)?);
    let rel = (lhs - rhs).abs() / lhs.abs().max(1.0);
    out.push(check("ops.adjointness", rel <= 1e-12, format!("relative gap {rel:e}")));

    for grid in [per, wal] {
        let mut ws = OperatorWorkspace::new(&grid);
        let v = random_vector(&grid, &mut rng);
        let p = ws.leray_project(&v)?.velocity;
        let pp = ws.leray_project(&p)?.velocity;
        let mut d = pp.clone();
        d.axpy(-1.0, &p);
        let idem = d.norm_l2() / p.norm_l2().max(1e-300);
        let div = divergence(&p, grid.bc().u)?;
        let dn = div.inner(&div).sqrt() / v.norm_l2();
        let phi = random_scalar(&grid, &mut rng);
        let g = gradient(&phi, grid.bc().n)?;
        let kill = ws.leray_project(&g)?.velocity.norm_l2() / g.norm_l2();
        let tag = if grid.is_periodic() { "periodic" } else { "walled" };
        out.push(check(
            &format!("ops.projection_{tag}"),
            idem <= 1e-10 && dn <= 1e-10 && kill <= 1e-10,
            format!("idempotence {idem:e}, divergence {dn:e}, gradient residue {kill:e}"),
        ));
    }

    let v = random_vector(&per, &mut rng);
    let adv = advect_conservative(&v, &random_scalar(&per, &mut rng), AdvectionScheme::Upwind)?;
    let s = integrate(&adv).abs();
    out.push(check("ops.advection_telescopes", s <= 1e-13 * 256.0, format!("∫div(uf) = {s:e}")));

    let mut worst = f64::NEG_INFINITY;
    for grid in [per, wal] {
        for eps in [0.1, 0.2] {
            let mol = Mollifier::new(&grid, eps)?;
            for _ in 0..10 {
                let v = random_vector(&grid, &mut rng);
                worst = worst.max(mol.apply(&v).norm_l2() - v.norm_l2());
            }
            let c = mol.apply_scalar(&ScalarField::constant(&grid, 2.5));
            worst = worst.max((c.max() - 2.5).abs().max((c.min() - 2.5).abs()) - 1e-12);
        }
    }
    out.push(check("ops.mollifier_nonexpansive", worst <= 1e-12, format!("max ‖Lv‖−‖v‖ = {worst:e}")));
    Ok(out)
}

fn model_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut bad = 0usize;
    for _ in 0..10_000 {
        let s: f64 = rng.random_range(0.0..100.0);
        let eps: f64 = 10f64.powf(rng.random_range(-6.0..1.0));
        let h = h_eps(s, eps)?;
        let hp = h_eps_prime(s, eps)?;
        let step = 1e-5 * s.max(1.0);
        let fd = (h_eps(s + step, eps)? - h_eps((s - step).max(0.0), eps)?) / (s + step - (s - step).max(0.0));
        if !(0.0..=s).contains(&h) || !(hp > 0.0 && hp <= 1.0) || (fd - hp).abs() > 1e-6 * hp.max(1e-3) {
            bad += 1;
        }
    }
    out.push(check("model.h_eps", bad == 0, format!("{bad} failing samples of 10000")));

    let proto = Kinetics::prototype(1.0);
    let ok = proto.psi(4.0)?.abs() > 0.0 && (proto.psi(4.0)? - 2.0).abs() < 1e-14 && (proto.rho(std::f64::consts::E)? - 1.0).abs() < 1e-14;
    out.push(check("model.prototype_closed_forms", ok, format!("Ψ(4)={}, ρ(e)={}", proto.psi(4.0)?, proto.rho(std::f64::consts::E)?)));

    let sat = Kinetics::new(FunctionSpec::Constant(2.0), FunctionSpec::Saturating(0.5));
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let s: f64 = rng.random_range(0.05..3.0);
        let d = 1e-5;
        let dpsi = (sat.psi(s + d)? - sat.psi(s - d)?) / (2.0 * d);
        worst = worst.max((dpsi * dpsi * sat.theta(s) - 1.0).abs());
    }
    out.push(check("model.psi_theta_consistency", worst < 1e-6, format!("max |Ψ′²θ−1| = {worst:e}")));

    let broken = Kinetics::new(FunctionSpec::Constant(1.0), FunctionSpec::Tabulated(crate::model::CubicSpline::new(
        vec![0.0, 0.5, 1.0, 1.5],
        vec![0.0, 0.6, 0.4, 0.7],
    )?));
    let rejected = matches!(broken.validate(1.0), Err(ScnsError::AssumptionViolation { .. }));
    out.push(check("model.validation_rejects_nonmonotone", rejected, String::new()));

    let grid = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::periodic())?;
    let mut ws = OperatorWorkspace::new(&grid);
    let psi = VectorField::from_fn(&grid, |x| [(2.0 * PI * x[1]).sin(), 0.0, 0.0]);
    let coeffs = NoiseCoefficients::new(&psi, 0.0, 6, JumpSpec::none(), &mut ws)?;
    let u1 = random_vector(&grid, &mut rng);
    let u2 = random_vector(&grid, &mut rng);
    let dw: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut sum = u1.clone();
    sum.axpy(2.0, &u2);
    let mut lin = coeffs.apply_g(&u1, &dw)?;
    lin.axpy(2.0, &coeffs.apply_g(&u2, &dw)?);
    lin.axpy(-1.0, &coeffs.apply_g(&sum, &dw)?);
    out.push(check("model.apply_g_linear", lin.max_abs() <= 1e-12, format!("superposition defect {:e}", lin.max_abs())));
    Ok(out)
}

fn noise_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let n = 10_000usize;
    let dt = 0.01;
    let stream = RngStream::new(2024, 0);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for k in 0..n as u64 {
        let w = sample_wiener(1, dt, &mut stream.for_step(k))[0];
        sum += w;
        sq += w * w;
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    let var_sd = dt * (2.0 / n as f64).sqrt();
    out.push(check(
        "noise.wiener_moments",
        mean.abs() <= 4.0 * (dt / n as f64).sqrt() && (var - dt).abs() <= 4.0 * var_sd,
        format!("mean {mean:e}, variance {var:e}"),
    ));

    let spec = JumpSpec::new(vec![], vec![Atom { z: 2.0, rate: 2.0 }])?;
    let mut count = 0usize;
    for k in 0..n as u64 {
        count += sample_jumps(0.0, 1.0, &spec, &mut RngStream::new(7, k).for_step(0)).1.len();
    }
    let m = count as f64 / n as f64;
    out.push(check("noise.poisson_mean", (1.92..=2.08).contains(&m), format!("mean count {m}")));

    let grid = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::periodic())?;
    let u = VectorField::from_fn(&grid, |x| [(2.0 * PI * x[1]).sin(), 0.0, 0.0]);
    let small = JumpSpec::new(vec![Atom { z: 0.5, rate: 4.0 }], vec![])?;
    let coeffs = NoiseCoefficients::silent(&grid).with_jumps(small.clone());
    let sampler = NoiseSampler::new(0, small, true);
    let stats = |compensate: bool| -> Result<f64> {
        let mut s = 0.0;
        let mut s2 = 0.0;
        for p in 0..n as u64 {
            let draw = sampler.draw(&RngStream::new(99, p), 0, 0.0, 0.25);
            let m = martingale_increment(&u, &draw, &coeffs, 1.0, compensate)?;
            s += m;
            s2 += m * m;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        Ok(mean / se)
    };
    let z = stats(true)?;
    let z_bad = stats(false)?;
    out.push(check("noise.compensated_mean_zero", z.abs() <= 4.0, format!("z = {z:.3}")));
    out.push(check("noise.uncompensated_control_fails", z_bad.abs() > 4.0, format!("z = {z_bad:.3}")));
    Ok(out)
}

fn prototype_state(nc: usize) -> Result<(State, ModelParams)> {
    let g = Grid::build(2, &[1.0, 1.0], &[nc, nc], BoundarySpec::periodic())?;
    let n = ScalarField::from_fn(&g, |x| 1.0 + 0.5 * ((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()).exp() / 7.389);
    let c = ScalarField::from_fn(&g, |x| 0.5 + 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos());
    let params = ModelParams::new(Kinetics::prototype(1.0), ScalarField::zeros(&g), 0.1, Diffusion::default(), NoiseCoefficients::silent(&g))?;
    Ok((State::new(0.0, n, c, VectorField::zeros(&g))?, params))
}

fn quiet_run(state: &State, params: &ModelParams, dt: f64, t_end: f64) -> Result<crate::stepper::RunOutput> {
    let mut ws = OperatorWorkspace::new(state.n.grid());
    let settings = RunSettings {
        t_end,
        step: StepConfig { dt, ..StepConfig::default() },
        snapshot_times: Vec::new(),
        keep_trajectory: true,
        diagnostics: DiagnosticsSettings::default(),
    };
    run(state, params, &settings, &NoiseSampler::new(0, JumpSpec::none(), false), &RngStream::new(0, 0), &mut ws)
}

fn energy_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let (s, p) = prototype_state(32)?;
    let run_out = quiet_run(&s, &p, 2e-3, 0.1)?;
    let e: Vec<f64> = run_out.stream.records.iter().map(|r| r.entropy + r.grad_psi_energy).collect();
    let worst = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    out.push(check("energy.deterministic_decay", worst <= 1e-9, format!("max step increase {worst:e}")));

    let k = EnergyConstants {
        c_dagger: 1.0,
        d1: 0.01,
        d2: 0.01,
        c: 0.0,
    };
    let audit = energy_inequality_audit(&run_out.stream, &k, 1e-8)?;
    out.push(check("energy.audit_deterministic", audit.passed, format!("defect {:e}", audit.defect)));

    let traj = run_out.trajectory.expect("kept");
    let stationary = State::new(
        0.0,
        ScalarField::constant(s.n.grid(), 1.0),
        ScalarField::constant(s.n.grid(), 0.5),
        VectorField::zeros(s.n.grid()),
    )?;
    let mut later = stationary.clone();
    later.t = 0.1;
    let r0 = entropy_identity_residual(&[stationary, later], &p.kinetics, p.eps)?;
    let r = entropy_identity_residual(&traj.states, &p.kinetics, p.eps)?;
    out.push(check("energy.identity_stationary", r0 <= 1e-12, format!("stationary residual {r0:e}, run residual {r:e}")));

    let wal = Grid::build(2, &[1.0, 1.0], &[32, 32], BoundarySpec::walled())?;
    let ratio = ms_boundary_ratio(&ScalarField::constant(&wal, 0.7))?;
    out.push(check("energy.ms_ratio_constant", ratio == 0.0, format!("κ̂ = {ratio}")));
    Ok(out)
}

fn weakform_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let (s, p) = prototype_state(16)?;
    let grid = *s.n.grid();
    let tests = TestFunctions {
        phi_n: ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).cos()),
        phi_c: ScalarField::from_fn(&grid, |x| (2.0 * PI * x[1]).sin()),
        psi: VectorField::from_fn(&grid, |x| [(2.0 * PI * x[1]).sin(), 0.0, 0.0]),
    };
    let mut ws = OperatorWorkspace::new(&grid);
    let cfg = StepConfig::default();
    let mut res = Vec::new();
    for dt in [4e-3, 2e-3] {
        let tr = quiet_run(&s, &p, dt, 0.04)?.trajectory.expect("kept");
        res.push(weak_form_residual(&tr, &p, &cfg, &tests, &mut ws)?);
    }
    let ratio = (res[0].n + res[0].c) / (res[1].n + res[1].c);
    out.push(check("weakform.richardson", ratio >= 1.8, format!("ratio {ratio:.3}")));

    let ones = TestFunctions {
        phi_n: ScalarField::constant(&grid, 1.0),
        ..tests
    };
    let tr = quiet_run(&s, &p, 2e-3, 0.04)?.trajectory.expect("kept");
    let r = weak_form_residual(&tr, &p, &cfg, &ones, &mut ws)?;
    out.push(check("weakform.constant_test_function", r.n <= 1e-12, format!("residual {:e}", r.n)));
    Ok(out)
}
