//! Monte Carlo ensembles over independent noise paths.
//!
//! Path `i` always uses `RngStream::new(seed, i)` and results are reduced
//! in path-index order, so the outcome does not depend on the scheduler or
//! the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Setup;
use crate::diagnostics::{DiagnosticsRecord, DiagnosticsStream, EnergyConstants};
use crate::error::{Result, ScnsError};
use crate::noise::RngStream;
use crate::ops::OperatorWorkspace;
use crate::stepper::run;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SCNS_THREADS";

/// Paths required by the statistical tests.
pub const MIN_TEST_PATHS: usize = 100;

/// Per-path quantities kept by the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub index: usize,
    pub terminal: DiagnosticsRecord,
    pub energy0: f64,
    pub sup_energy: f64,
    /// `∫ 𝓘 dt` by the trapezoid rule over the records.
    pub dissipation_integral: f64,
    /// Record times.
    pub times: Vec<f64>,
    /// `𝓜_E` at every record time.
    pub me_path: Vec<f64>,
    pub steps: usize,
    #[serde(skip)]
    pub stream: Option<DiagnosticsStream>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// 5%, 50% and 95% empirical quantiles.
    pub quantiles: [f64; 3],
}

impl Moments {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Self {
            mean,
            variance,
            quantiles: [q(0.05), q(0.5), q(0.95)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub paths: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub summaries: Vec<PathSummary>,
    pub sup_energy: Moments,
    /// `(p, 𝔼̂ sup_t |𝓜_E|^p)` for p = 1, 2.
    pub sup_me_moments: Vec<(f64, f64)>,
    pub me_mean: Vec<f64>,
    pub me_stderr: Vec<f64>,
}

impl EnsembleResult {
    pub fn me_curves(&self) -> Vec<Vec<f64>> {
        self.summaries.iter().map(|s| s.me_path.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub keep_streams: bool,
    /// Worker count; `None` reads [`THREADS_ENV`] and falls back to rayon's
    /// default.
    pub threads: Option<usize>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            keep_streams: false,
            threads: None,
        }
    }
}

fn worker_count(opt: Option<usize>) -> Option<usize> {
    opt.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()))
        .filter(|&n| n > 0)
}

fn trapz(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0])).sum()
}

/// `𝓘` with the weights of the energy inequality.
pub fn weighted_dissipation(r: &DiagnosticsRecord, k: &EnergyConstants) -> f64 {
    r.dissipation(k.d1, k.d2, 0.5 * k.c_dagger)
}

fn summarize(index: usize, stream: DiagnosticsStream, steps: usize, k: &EnergyConstants, keep: bool) -> PathSummary {
    let rec = &stream.records;
    let t: Vec<f64> = rec.iter().map(|r| r.t).collect();
    let diss: Vec<f64> = rec.iter().map(|r| weighted_dissipation(r, k)).collect();
    let energy: Vec<f64> = rec.iter().map(|r| r.energy(k.c_dagger)).collect();
    PathSummary {
        index,
        terminal: rec[rec.len() - 1].clone(),
        energy0: energy[0],
        sup_energy: energy.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        dissipation_integral: trapz(&t, &diss),
        me_path: stream.me_path(),
        times: t,
        steps,
        stream: keep.then_some(stream),
    }
}

fn one_path(setup: &Setup, seed: u64, index: usize, ws: &mut OperatorWorkspace, keep: bool) -> Result<PathSummary> {
    let stream = RngStream::new(seed, index as u64);
    let out = run(&setup.initial, &setup.params, &setup.settings, &setup.sampler, &stream, ws)?;
    Ok(summarize(index, out.stream, out.steps, &setup.constants, keep))
}

/// Runs `paths` independent paths of `setup`.
pub fn run_ensemble(setup: &Setup, paths: usize, seed: u64, opts: &EnsembleOptions) -> Result<EnsembleResult> {
    if paths < 2 {
        return Err(ScnsError::InsufficientPaths { needed: 2, found: paths });
    }
    let grid = setup.grid;
    let work = || -> Vec<Result<PathSummary>> {
        (0..paths)
            .into_par_iter()
            .map_init(|| OperatorWorkspace::new(&grid), |ws, i| one_path(setup, seed, i, ws, opts.keep_streams))
            .collect()
    };
    let results = match worker_count(opts.threads) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ScnsError::ConfigInvalid(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut summaries = Vec::with_capacity(paths);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => summaries.push(s),
            Err(e) => {
                return Err(ScnsError::PathFailure {
                    index: i,
                    cause: e.to_string(),
                })
            }
        }
    }
    let times = summaries[0].times.clone();
    if let Some(bad) = summaries.iter().find(|s| s.times != times) {
        return Err(ScnsError::PathFailure {
            index: bad.index,
            cause: "record times differ from path 0 (adaptive step rejection)".into(),
        });
    }
    let curves: Vec<Vec<f64>> = summaries.iter().map(|s| s.me_path.clone()).collect();
    let (me_mean, me_stderr) = mean_stderr(&curves);
    let sup_e: Vec<f64> = summaries.iter().map(|s| s.sup_energy).collect();
    let sup_me_moments = [1.0, 2.0]
        .iter()
        .map(|&p| {
            let m = summaries
                .iter()
                .map(|s| s.me_path.iter().map(|x| x.abs()).fold(0.0, f64::max).powf(p))
                .sum::<f64>()
                / paths as f64;
            (p, m)
        })
        .collect();
    Ok(EnsembleResult {
        paths,
        seed,
        times,
        sup_energy: Moments::of(&sup_e),
        sup_me_moments,
        me_mean,
        me_stderr,
        summaries,
    })
}

fn mean_stderr(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = curves.len() as f64;
    let len = curves[0].len();
    let mut mean = vec![0.0; len];
    let mut se = vec![0.0; len];
    for j in 0..len {
        let m = curves.iter().map(|c| c[j]).sum::<f64>() / n;
        let var = curves.iter().map(|c| (c[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean[j] = m;
        se[j] = (var / n).sqrt();
    }
    (mean, se)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    /// `mean/stderr` per record time (0 where the spread vanishes).
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    /// Largest `|corr(𝓜(s), 𝓜(T) − 𝓜(s))|` over record times `s < T`.
    pub max_increment_corr: f64,
    pub corr_bound: f64,
    pub passed: bool,
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// z-scores of the pooled `𝓜_E` mean and the increment-orthogonality check.
pub fn martingale_test(curves: &[Vec<f64>]) -> Result<MartingaleReport> {
    if curves.len() < MIN_TEST_PATHS {
        return Err(ScnsError::InsufficientPaths {
            needed: MIN_TEST_PATHS,
            found: curves.len(),
        });
    }
    let (mean, se) = mean_stderr(curves);
    let z: Vec<f64> = mean
        .iter()
        .zip(&se)
        .map(|(&m, &s)| if s > 0.0 { m / s } else if m == 0.0 { 0.0 } else { m.signum() * f64::INFINITY })
        .collect();
    let max_abs_z = z.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let last = mean.len() - 1;
    let mut max_corr = 0.0f64;
    for j in 1..last {
        let ms: Vec<f64> = curves.iter().map(|c| c[j]).collect();
        let inc: Vec<f64> = curves.iter().map(|c| c[last] - c[j]).collect();
        max_corr = max_corr.max(correlation(&ms, &inc).abs());
    }
    let corr_bound = 4.0 / (curves.len() as f64).sqrt();
    Ok(MartingaleReport {
        passed: max_abs_z <= 4.0 && max_corr <= corr_bound,
        z,
        max_abs_z,
        max_increment_corr: max_corr,
        corr_bound,
    })
}

/// `R(p) = 𝔼̂[(sup_t 𝓔 + ∫𝓘 dt)^p] / (𝔼̂[𝓔₀^p] + 1)`.
pub fn moment_bound_report(result: &EnsembleResult, p: f64) -> Result<f64> {
    if !(p == 1.0 || p == 2.0) {
        return Err(ScnsError::ConfigInvalid(format!("moment order must be 1 or 2, got {p}")));
    }
    if result.summaries.len() < 2 {
        return Err(ScnsError::InsufficientPaths {
            needed: 2,
            found: result.summaries.len(),
        });
    }
    let n = result.summaries.len() as f64;
    let num = result
        .summaries
        .iter()
        .map(|s| (s.sup_energy + s.dissipation_integral).powf(p))
        .sum::<f64>()
        / n;
    let den = result.summaries.iter().map(|s| s.energy0.powf(p)).sum::<f64>() / n + 1.0;
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_curves_have_zero_scores() {
        let curves = vec![vec![0.0; 5]; 120];
        let r = martingale_test(&curves).unwrap();
        assert!(r.z.iter().all(|&z| z == 0.0));
        assert!(r.passed);
    }

    #[test]
    fn too_few_paths() {
        assert!(matches!(martingale_test(&vec![vec![0.0; 3]; 10]), Err(ScnsError::InsufficientPaths { .. })));
    }

    #[test]
    fn quantiles_of_a_ramp() {
        let m = Moments::of(&(0..=100).map(f64::from).collect::<Vec<_>>());
        assert_eq!(m.quantiles, [5.0, 50.0, 95.0]);
        assert_eq!(m.mean, 50.0);
    }
}
