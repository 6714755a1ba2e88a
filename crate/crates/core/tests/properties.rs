use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scns_core::diagnostics::{dissipation, energy_inequality_audit, entropy, face_gradient_density, fit_energy_constant};
use scns_core::model::{buoyancy, consumption, h_eps, h_eps_prime, scalar_modes};
use scns_core::noise::{sample_jumps, Atom};
use scns_core::ops::gradient;
use scns_core::*;

fn unit_grid(nc: usize, bc: BoundarySpec) -> Grid {
    Grid::build(2, &[1.0, 1.0], &[nc, nc], bc).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn h_eps_is_a_monotone_lower_bound(s in 0.0f64..1e3, ds in 0.0f64..10.0, log_eps in -8.0f64..2.0) {
        let eps = 10f64.powf(log_eps);
        let h = h_eps(s, eps).unwrap();
        prop_assert!(h >= 0.0 && h <= s * (1.0 + 1e-15));
        prop_assert!(h_eps(s + ds, eps).unwrap() >= h);
        let d = h_eps_prime(s, eps).unwrap();
        prop_assert!(d > 0.0 && d <= 1.0);
    }

    #[test]
    fn h_eps_prime_matches_finite_differences(s in 0.1f64..50.0, log_eps in -3.0f64..1.0) {
        let eps = 10f64.powf(log_eps);
        let step = 1e-5 * s;
        let fd = (h_eps(s + step, eps).unwrap() - h_eps(s - step, eps).unwrap()) / (2.0 * step);
        let d = h_eps_prime(s, eps).unwrap();
        prop_assert!((fd - d).abs() <= 1e-8 * d.max(1e-12) + 1e-10);
    }

    #[test]
    fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, k in 1usize..4) {
        let g = unit_grid(16, BoundarySpec::walled());
        let f = ScalarField::from_fn(&g, |x| (k as f64 * x[0]).sin() + x[1]);
        let h = ScalarField::from_fn(&g, |x| x[0] * x[1]);
        let combo = f.zip_map(&h, |p, q| a * p + b * q);
        let lhs = integrate(&combo);
        let rhs = a * integrate(&f) + b * integrate(&h);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn lp_norms_grow_with_p_on_unit_volume(seed in 0u64..1000) {
        let g = unit_grid(8, BoundarySpec::periodic());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ScalarField::from_values(&g, (0..g.len()).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect()).unwrap();
        let ps = [1.0, 1.5, 2.0, 5.0 / 3.0 * 2.0, 10.0 / 3.0, f64::INFINITY];
        let mut sorted = ps;
        sorted.sort_by(f64::total_cmp);
        let norms: Vec<f64> = sorted.iter().map(|&p| lp_norm(&f, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
    }
}

#[test]
fn lp_norm_examples() {
    let g = unit_grid(8, BoundarySpec::walled());
    let two = ScalarField::constant(&g, 2.0);
    assert_eq!(lp_norm(&two, 2.0).unwrap(), 2.0);
    assert_eq!(lp_norm(&two, f64::INFINITY).unwrap(), 2.0);
    let mut spike = ScalarField::zeros(&g);
    spike.values_mut()[17] = 5.0;
    assert_eq!(lp_norm(&spike, f64::INFINITY).unwrap(), 5.0);
}

#[test]
fn consumption_and_buoyancy_examples() {
    let g = unit_grid(16, BoundarySpec::walled());
    let one = ScalarField::constant(&g, 1.0);
    let kin = Kinetics::prototype(1.0);
    let q = consumption(&one, &one, &kin, 1.0).unwrap();
    assert!(q.values().iter().all(|&v| (v - 2f64.ln()).abs() < 1e-15));
    assert_eq!(consumption(&one, &ScalarField::zeros(&g), &kin, 1.0).unwrap().max_abs(), 0.0);

    let phi = ScalarField::from_fn(&g, |x| x[0]);
    let b = buoyancy(&one, &phi).unwrap();
    for idx in 0..g.len() {
        let c = g.coords(idx);
        if c[0] > 0 && c[0] + 1 < 16 {
            assert!((b.component(0).values()[idx] - 1.0).abs() < 1e-12);
            assert!(b.component(1).values()[idx].abs() < 1e-12);
        }
    }
    assert_eq!(buoyancy(&one, &ScalarField::constant(&g, 3.0)).unwrap().max_abs(), 0.0);
}

#[test]
fn apply_g_on_a_basis_vector_returns_psi() {
    for bc in [BoundarySpec::walled(), BoundarySpec::periodic()] {
        let g = unit_grid(12, bc);
        let mut ws = OperatorWorkspace::new(&g);
        let raw = VectorField::from_fn(&g, |x| [(PI * x[1]).sin(), (PI * x[0]).cos(), 0.0]);
        let psi = ws.leray_project(&raw).unwrap().velocity;
        let coeffs = NoiseCoefficients::new(&psi, 0.0, 6, JumpSpec::none(), &mut ws).unwrap();
        let e1 = coeffs.direction(0);
        let mut dw = vec![0.0; 6];
        dw[0] = 1.0;
        let mut out = coeffs.apply_g(&e1, &dw).unwrap();
        out.axpy(-1.0, coeffs.psi());
        assert!(out.max_abs() < 1e-12);
        assert_eq!(coeffs.apply_g(&VectorField::zeros(&g), &dw).unwrap().max_abs(), 0.0);
        assert!(matches!(coeffs.apply_g(&e1, &[1.0]), Err(ScnsError::ModeCountMismatch { .. })));
        assert_eq!(scalar_modes(&g, 3).len(), 3);
    }
}

#[test]
fn large_jump_gaps_are_exponential() {
    let lambda = 2.0;
    let spec = JumpSpec::new(vec![], vec![Atom { z: 3.0, rate: lambda }]).unwrap();
    let stream = RngStream::new(8, 0);
    let mut times = Vec::new();
    for k in 0..5000u64 {
        let (_, large) = sample_jumps(k as f64, 1.0, &spec, &mut stream.for_step(k));
        times.extend(large.iter().map(|e| e.time));
    }
    times.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-lambda * x).exp();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at the 1% level
    assert!(d < 1.63 / n.sqrt(), "KS distance {d}");
}

#[test]
fn entropy_of_half_density() {
    let g = unit_grid(8, BoundarySpec::walled());
    let e = entropy(&ScalarField::constant(&g, 0.5));
    assert!((e - 0.5 * 0.5f64.ln()).abs() < 1e-15);
}

#[test]
fn fisher_information_two_ways() {
    let g = unit_grid(128, BoundarySpec::walled());
    let n = ScalarField::from_fn(&g, |x| 0.2 + (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / 0.02).exp());
    let c = ScalarField::constant(&g, 0.5);
    let state = State::new(0.0, n.clone(), c, VectorField::zeros(&g)).unwrap();
    let half_fisher = dissipation(&state, 1e-12).unwrap()[0];
    let sqrt_n = n.map(f64::sqrt);
    let two_grad_sqrt = 2.0 * integrate(&face_gradient_density(&sqrt_n, Bc::NeumannZero, |_, _| 1.0).unwrap());
    assert!((half_fisher - two_grad_sqrt).abs() <= 0.01 * two_grad_sqrt, "{half_fisher} vs {two_grad_sqrt}");
}

#[test]
fn fitted_energy_constant_closes_fresh_paths() {
    let text = "grid.resolution = 16,16\n\
                init.u = taylor-green:0.5\n\
                model.delta = 0.05\n\
                noise.modes = 8\n\
                noise.h_gain = 0.5\n\
                noise.jump.small = 0.3,1\n\
                noise.jump.large = 4,0.5\n\
                run.t_end = 0.2\n\
                run.dt = 0.005\n";
    let setup = parse_config(text).unwrap().setup().unwrap();
    let opts = EnsembleOptions {
        keep_streams: true,
        threads: None,
    };
    let streams = |seed| -> Vec<DiagnosticsStream> {
        run_ensemble(&setup, 32, seed, &opts).unwrap().summaries.into_iter().map(|s| s.stream.unwrap()).collect()
    };
    let fit = streams(1);
    let c = fit_energy_constant(&fit, &setup.constants).unwrap();
    let k = EnergyConstants { c, ..setup.constants };
    let closed = streams(2).iter().filter(|s| energy_inequality_audit(s, &k, 1e-12).unwrap().passed).count();
    assert_eq!(closed, 32, "C = {c}");
}

#[test]
fn states_converge_as_eps_halves() {
    let text = "grid.resolution = 32,32\n\
                init.u = taylor-green:0.5\n\
                model.delta = 0.05\n\
                noise.modes = 8\n\
                noise.h_gain = 0.5\n\
                run.t_end = 0.1\n\
                run.dt = 2e-3\n";
    let finals: Vec<State> = [0.2, 0.1, 0.05]
        .iter()
        .map(|eps| {
            let setup = parse_config(&format!("{text}model.eps = {eps}\n")).unwrap().setup().unwrap();
            let mut ws = OperatorWorkspace::new(&setup.grid);
            run(&setup.initial, &setup.params, &setup.settings, &setup.sampler, &RngStream::new(3, 0), &mut ws)
                .unwrap()
                .final_state
        })
        .collect();
    let dist = |a: &State, b: &State| {
        let dn = a.n.zip_map(&b.n, |x, y| x - y);
        let dc = a.c.zip_map(&b.c, |x, y| x - y);
        let mut du = a.u.clone();
        du.axpy(-1.0, &b.u);
        (dn.inner(&dn) + dc.inner(&dc) + du.inner(&du)).sqrt()
    };
    let d1 = dist(&finals[0], &finals[1]);
    let d2 = dist(&finals[1], &finals[2]);
    assert!(d2 < d1, "{d1} then {d2}");
}

#[test]
fn stochastic_smoke_run_keeps_invariants() {
    let text = "grid.resolution = 64,64\n\
                init.u = taylor-green:0.5\n\
                model.phi = linear:0,1\n\
                noise.jump.small = 0.3,1\n\
                noise.jump.large = 4,0.5\n\
                run.t_end = 0.5\n\
                run.dt = 1e-3\n\
                run.snapshots = 0.1,0.2,0.3,0.4,0.5\n";
    let setup = parse_config(text).unwrap().setup().unwrap();
    let c_max = setup.initial.c.max();
    let mut ws = OperatorWorkspace::new(&setup.grid);
    let out = run(&setup.initial, &setup.params, &setup.settings, &setup.sampler, &RngStream::new(1, 0), &mut ws).unwrap();
    assert_eq!(out.snapshots.len(), 5);
    for s in out.snapshots.iter().chain([&out.final_state]) {
        s.check_invariants(c_max, 1e-10).unwrap();
    }
    assert!(out.stream.records.iter().all(|r| r.linf_c <= c_max));
    assert_eq!(out.stream.records.len(), 501);
}

#[test]
fn gradient_of_ramp_is_exact_inside() {
    let g = unit_grid(32, BoundarySpec::walled());
    let f = ScalarField::from_fn(&g, |x| x[0]);
    let d = gradient(&f, Bc::NeumannZero).unwrap();
    for idx in 0..g.len() {
        let c = g.coords(idx);
        if c[0] > 0 && c[0] < 31 {
            assert!((d.component(0).values()[idx] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn records_roundtrip_through_ndjson() {
    let text = "grid.resolution = 12,12\ninit.u = taylor-green:0.3\nrun.t_end = 0.01\ndiagnostics.ms_ratio = true\n";
    let setup = parse_config(text).unwrap().setup().unwrap();
    let mut ws = OperatorWorkspace::new(&setup.grid);
    let out = run(&setup.initial, &setup.params, &setup.settings, &setup.sampler, &RngStream::new(2, 0), &mut ws).unwrap();
    let mut bytes = Vec::new();
    scns_core::io::write_records(&mut bytes, &out.stream.records).unwrap();
    let back = scns_core::io::read_records(bytes.as_slice()).unwrap();
    assert_eq!(back, out.stream.records);
    let first = String::from_utf8(bytes).unwrap();
    let keys: Vec<String> = serde_json::from_str::<serde_json::Value>(first.lines().next().unwrap())
        .unwrap()
        .as_object()
        .unwrap()
        .keys()
        .cloned()
        .collect();
    for k in ["t", "mass_n", "linf_c", "entropy", "grad_psi_energy", "kinetic", "diss_n", "diss_c4", "diss_lap", "diss_u", "me_inc", "ms_ratio"] {
        assert!(keys.iter().any(|x| x == k), "{k}");
    }
    assert!(matches!(scns_core::io::read_records("{\"t\": 1}\n".as_bytes()), Err(ScnsError::SchemaMismatch(_))));
}

#[test]
fn periodic_mollifier_commutes_with_shifts() {
    let g = Grid::build(2, &[1.0, 1.0], &[24, 20], BoundarySpec::periodic()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let f = ScalarField::from_values(&g, (0..g.len()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).unwrap();
    let shift = |f: &ScalarField| {
        let mut out = vec![0.0; g.len()];
        for (idx, v) in f.values().iter().enumerate() {
            let c = g.coords(idx);
            out[g.index([(c[0] + 5) % 24, (c[1] + 3) % 20, 0])] = *v;
        }
        ScalarField::from_values(&g, out).unwrap()
    };
    let mol = scns_core::ops::Mollifier::new(&g, 0.15).unwrap();
    let a = mol.apply_scalar(&shift(&f));
    let b = shift(&mol.apply_scalar(&f));
    assert!(a.zip_map(&b, |x, y| x - y).max_abs() < 1e-15);
}
