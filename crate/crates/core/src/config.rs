//! Flat `key = value` experiment configuration.
//!
//! Dotted keys name sections (`grid.resolution = 64,64`). Repeated keys are
//! only allowed for jump atoms. Every key has a default, so an empty file is
//! the prototype run.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::diagnostics::{DiagnosticsSettings, EnergyConstants, FLOOR};
use crate::error::{Result, ScnsError};
use crate::grid::{Bc, BoundarySpec, Grid, ScalarField, VectorField};
use crate::model::{CubicSpline, Diffusion, FunctionSpec, Kinetics, ModelParams, NoiseCoefficients};
use crate::noise::{Atom, JumpSpec, NoiseSampler};
use crate::ops::{AdvectionScheme, DiffusionScheme, OperatorWorkspace};
use crate::stepper::{RunSettings, State, StepConfig};

/// Named scalar initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarInit {
    Constant(f64),
    /// `base + amp·exp(−|x − x₀|²/width²)` about the domain centre.
    Bump { amp: f64, width: f64, base: f64 },
    /// `base + amp·Π cos(π x_i / L_i)` (walled) or `Π cos(2π x_i / L_i)`
    /// (periodic).
    Cosine { amp: f64, base: f64 },
    File(PathBuf),
}

/// Named velocity initial data and noise shapes.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorInit {
    Zero,
    /// Periodic: `amp·(sin x cos y, −cos x sin y, 0)` in units of the box.
    /// Walled: `amp·(sin²πx sin 2πy, −sin 2πx sin²πy, 0)`, vanishing on walls.
    TaylorGreen(f64),
    /// `amp·(sin(2π y/L_y), 0, 0)`.
    Shear(f64),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSpec {
    Zero,
    /// `Φ(x) = g·x`.
    Linear([f64; 3]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub resolution: Vec<usize>,
    pub bc: BoundarySpec,

    pub chi: FunctionSpec,
    pub f: FunctionSpec,
    pub eps: f64,
    pub diffusion: Diffusion,
    pub phi: PotentialSpec,
    pub constants: EnergyConstants,

    pub init_n: ScalarInit,
    pub init_c: ScalarInit,
    pub init_u: VectorInit,

    pub noise_enabled: bool,
    pub modes: usize,
    pub psi: VectorInit,
    pub h_gain: f64,
    pub small: Vec<Atom>,
    pub large: Vec<Atom>,
    pub seed: u64,

    pub t_end: f64,
    pub dt: f64,
    pub cfl_safety: f64,
    pub record_every: usize,
    pub snapshots: Vec<f64>,
    pub diffusion_scheme: DiffusionScheme,
    pub advection: AdvectionScheme,

    pub ms_ratio: bool,
    pub compensate: bool,

    pub paths: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            dim: 2,
            extents: vec![1.0, 1.0],
            resolution: vec![32, 32],
            bc: BoundarySpec::walled(),
            chi: FunctionSpec::Constant(1.0),
            f: FunctionSpec::Linear(1.0),
            eps: 0.1,
            diffusion: Diffusion::default(),
            phi: PotentialSpec::Zero,
            constants: EnergyConstants {
                c_dagger: 1.0,
                d1: 0.01,
                d2: 0.01,
                c: 0.0,
            },
            init_n: ScalarInit::Bump {
                amp: 1.0,
                width: 0.2,
                base: 0.5,
            },
            init_c: ScalarInit::Cosine { amp: 0.3, base: 0.5 },
            init_u: VectorInit::Zero,
            noise_enabled: true,
            modes: 16,
            psi: VectorInit::TaylorGreen(1.0),
            h_gain: 0.0,
            small: Vec::new(),
            large: Vec::new(),
            seed: 0,
            t_end: 0.1,
            dt: 1e-3,
            cfl_safety: 0.5,
            record_every: 1,
            snapshots: Vec::new(),
            diffusion_scheme: DiffusionScheme::BackwardEuler,
            advection: AdvectionScheme::Upwind,
            ms_ratio: false,
            compensate: true,
            paths: 100,
        }
    }
}

/// Everything needed to start a run.
#[derive(Clone, Debug)]
pub struct Setup {
    pub grid: Grid,
    pub params: ModelParams,
    pub initial: State,
    pub sampler: NoiseSampler,
    pub settings: RunSettings,
    pub constants: EnergyConstants,
    pub seed: u64,
    pub paths: usize,
}

fn perr(line: usize, message: impl Into<String>) -> ScnsError {
    ScnsError::ParseError {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| perr(line, format!("{key}: cannot parse {v:?}")))
}

fn list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(line, key, x)).collect()
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(perr(line, format!("{key}: expected true/false, got {v:?}"))),
    }
}

fn bc(line: usize, key: &str, v: &str) -> Result<Bc> {
    Bc::parse(v).ok_or_else(|| perr(line, format!("{key}: unknown boundary condition {v:?}")))
}

/// `kind` or `kind:a,b,…`.
fn split_kind(v: &str) -> (&str, &str) {
    v.split_once(':').map(|(k, a)| (k.trim(), a.trim())).unwrap_or((v.trim(), ""))
}

fn function(line: usize, key: &str, v: &str) -> Result<FunctionSpec> {
    let (kind, args) = split_kind(v);
    match kind {
        "constant" => Ok(FunctionSpec::Constant(num(line, key, args)?)),
        "linear" => Ok(FunctionSpec::Linear(num(line, key, args)?)),
        "saturating" => Ok(FunctionSpec::Saturating(num(line, key, args)?)),
        "tabulated" => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for pair in args.split(';') {
                let (x, y) = pair.split_once('/').ok_or_else(|| perr(line, format!("{key}: expected s/value pairs")))?;
                xs.push(num(line, key, x)?);
                ys.push(num(line, key, y)?);
            }
            CubicSpline::new(xs, ys).map(FunctionSpec::Tabulated).map_err(|e| perr(line, format!("{key}: {e}")))
        }
        _ => Err(perr(line, format!("{key}: unknown function kind {kind:?}"))),
    }
}

fn render_function(f: &FunctionSpec) -> String {
    match f {
        FunctionSpec::Constant(k) => format!("constant:{k}"),
        FunctionSpec::Linear(a) => format!("linear:{a}"),
        FunctionSpec::Saturating(k) => format!("saturating:{k}"),
        FunctionSpec::Tabulated(t) => {
            let (xs, ys) = t.points();
            let pairs: Vec<String> = xs.iter().zip(ys).map(|(x, y)| format!("{x}/{y}")).collect();
            format!("tabulated:{}", pairs.join(";"))
        }
    }
}

fn scalar_init(line: usize, key: &str, v: &str) -> Result<ScalarInit> {
    let (kind, args) = split_kind(v);
    match kind {
        "constant" => Ok(ScalarInit::Constant(num(line, key, args)?)),
        "bump" => match list::<f64>(line, key, args)?.as_slice() {
            [amp, width, base] => Ok(ScalarInit::Bump {
                amp: *amp,
                width: *width,
                base: *base,
            }),
            _ => Err(perr(line, format!("{key}: bump takes amp,width,base"))),
        },
        "cosine" => match list::<f64>(line, key, args)?.as_slice() {
            [amp, base] => Ok(ScalarInit::Cosine { amp: *amp, base: *base }),
            _ => Err(perr(line, format!("{key}: cosine takes amp,base"))),
        },
        "file" => Ok(ScalarInit::File(PathBuf::from(args))),
        _ => Err(perr(line, format!("{key}: unknown initial data {kind:?}"))),
    }
}

fn render_scalar(s: &ScalarInit) -> String {
    match s {
        ScalarInit::Constant(v) => format!("constant:{v}"),
        ScalarInit::Bump { amp, width, base } => format!("bump:{amp},{width},{base}"),
        ScalarInit::Cosine { amp, base } => format!("cosine:{amp},{base}"),
        ScalarInit::File(p) => format!("file:{}", p.display()),
    }
}

fn vector_init(line: usize, key: &str, v: &str) -> Result<VectorInit> {
    let (kind, args) = split_kind(v);
    match kind {
        "zero" => Ok(VectorInit::Zero),
        "taylor-green" => Ok(VectorInit::TaylorGreen(num(line, key, args)?)),
        "shear" => Ok(VectorInit::Shear(num(line, key, args)?)),
        "file" => Ok(VectorInit::File(PathBuf::from(args))),
        _ => Err(perr(line, format!("{key}: unknown vector data {kind:?}"))),
    }
}

fn render_vector(v: &VectorInit) -> String {
    match v {
        VectorInit::Zero => "zero".into(),
        VectorInit::TaylorGreen(a) => format!("taylor-green:{a}"),
        VectorInit::Shear(a) => format!("shear:{a}"),
        VectorInit::File(p) => format!("file:{}", p.display()),
    }
}

fn atom(line: usize, key: &str, v: &str) -> Result<Atom> {
    match list::<f64>(line, key, v)?.as_slice() {
        [z, rate] => Ok(Atom { z: *z, rate: *rate }),
        _ => Err(perr(line, format!("{key}: expected z,rate"))),
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<Config> {
    let cfg = parse_unvalidated(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses without building fields; syntax and key errors only.
pub fn parse_unvalidated(text: &str) -> Result<Config> {
    let mut c = Config::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut walled: Option<bool> = None;
    let mut bc_keys: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| perr(line, format!("expected key = value, got {body:?}")))?;
        let key = key.trim();
        let v = value.trim();
        let repeatable = matches!(key, "noise.jump.small" | "noise.jump.large");
        if !repeatable {
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(perr(line, format!("{key} already set on line {prev}")));
            }
        }
        match key {
            "grid.dim" => c.dim = num(line, key, v)?,
            "grid.extents" => c.extents = list(line, key, v)?,
            "grid.resolution" => c.resolution = list(line, key, v)?,
            "grid.bc" => {
                walled = Some(match v {
                    "periodic" => false,
                    "walled" => true,
                    _ => return Err(perr(line, format!("{key}: expected periodic or walled, got {v:?}"))),
                })
            }
            "grid.bc.n" | "grid.bc.c" | "grid.bc.u" => bc_keys.push((line, key.to_string(), v.to_string())),
            "model.chi" => c.chi = function(line, key, v)?,
            "model.f" => c.f = function(line, key, v)?,
            "model.eps" => c.eps = num(line, key, v)?,
            "model.d_n" => c.diffusion.d_n = num(line, key, v)?,
            "model.d_c" => c.diffusion.d_c = num(line, key, v)?,
            "model.delta" => c.diffusion.delta = num(line, key, v)?,
            "model.phi" => {
                let (kind, args) = split_kind(v);
                c.phi = match kind {
                    "zero" => PotentialSpec::Zero,
                    "linear" => {
                        let g: Vec<f64> = list(line, key, args)?;
                        if g.is_empty() || g.len() > 3 {
                            return Err(perr(line, format!("{key}: linear takes 1 to 3 components")));
                        }
                        let mut a = [0.0; 3];
                        a[..g.len()].copy_from_slice(&g);
                        PotentialSpec::Linear(a)
                    }
                    _ => return Err(perr(line, format!("{key}: unknown potential {kind:?}"))),
                }
            }
            "model.c_dagger" => c.constants.c_dagger = num(line, key, v)?,
            "model.d1" => c.constants.d1 = num(line, key, v)?,
            "model.d2" => c.constants.d2 = num(line, key, v)?,
            "model.c" => c.constants.c = num(line, key, v)?,
            "init.n" => c.init_n = scalar_init(line, key, v)?,
            "init.c" => c.init_c = scalar_init(line, key, v)?,
            "init.u" => c.init_u = vector_init(line, key, v)?,
            "noise.enabled" => c.noise_enabled = boolean(line, key, v)?,
            "noise.modes" => c.modes = num(line, key, v)?,
            "noise.psi" => c.psi = vector_init(line, key, v)?,
            "noise.h_gain" => c.h_gain = num(line, key, v)?,
            "noise.jump.small" => c.small.push(atom(line, key, v)?),
            "noise.jump.large" => c.large.push(atom(line, key, v)?),
            "noise.seed" => c.seed = num(line, key, v)?,
            "run.t_end" => c.t_end = num(line, key, v)?,
            "run.dt" => c.dt = num(line, key, v)?,
            "run.cfl_safety" => c.cfl_safety = num(line, key, v)?,
            "run.record_every" => c.record_every = num(line, key, v)?,
            "run.snapshots" => c.snapshots = list(line, key, v)?,
            "run.diffusion" => {
                c.diffusion_scheme = match v {
                    "backward-euler" => DiffusionScheme::BackwardEuler,
                    "crank-nicolson" => DiffusionScheme::CrankNicolson,
                    _ => return Err(perr(line, format!("{key}: unknown scheme {v:?}"))),
                }
            }
            "run.advection" => {
                c.advection = match v {
                    "upwind" => AdvectionScheme::Upwind,
                    "centered" => AdvectionScheme::Centered,
                    _ => return Err(perr(line, format!("{key}: unknown scheme {v:?}"))),
                }
            }
            "diagnostics.ms_ratio" => c.ms_ratio = boolean(line, key, v)?,
            "diagnostics.compensate" => c.compensate = boolean(line, key, v)?,
            "ensemble.paths" => c.paths = num(line, key, v)?,
            _ => return Err(perr(line, format!("unknown key {key:?}"))),
        }
    }
    if let Some(w) = walled {
        c.bc = if w { BoundarySpec::walled() } else { BoundarySpec::periodic() };
    }
    for (line, key, v) in bc_keys {
        let b = bc(line, &key, &v)?;
        match key.as_str() {
            "grid.bc.n" => c.bc.n = b,
            "grid.bc.c" => c.bc.c = b,
            _ => c.bc.u = b,
        }
    }
    Ok(c)
}

impl Config {
    /// Text that [`parse_config`] maps back to `self`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "grid.dim = {}", self.dim);
        let _ = writeln!(s, "grid.extents = {}", join(&self.extents));
        let res: Vec<String> = self.resolution.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "grid.resolution = {}", res.join(","));
        let _ = writeln!(s, "grid.bc.n = {}", self.bc.n.name());
        let _ = writeln!(s, "grid.bc.c = {}", self.bc.c.name());
        let _ = writeln!(s, "grid.bc.u = {}", self.bc.u.name());
        let _ = writeln!(s, "model.chi = {}", render_function(&self.chi));
        let _ = writeln!(s, "model.f = {}", render_function(&self.f));
        let _ = writeln!(s, "model.eps = {}", self.eps);
        let _ = writeln!(s, "model.d_n = {}", self.diffusion.d_n);
        let _ = writeln!(s, "model.d_c = {}", self.diffusion.d_c);
        let _ = writeln!(s, "model.delta = {}", self.diffusion.delta);
        match &self.phi {
            PotentialSpec::Zero => {
                let _ = writeln!(s, "model.phi = zero");
            }
            PotentialSpec::Linear(g) => {
                let _ = writeln!(s, "model.phi = linear:{}", join(g));
            }
        }
        let _ = writeln!(s, "model.c_dagger = {}", self.constants.c_dagger);
        let _ = writeln!(s, "model.d1 = {}", self.constants.d1);
        let _ = writeln!(s, "model.d2 = {}", self.constants.d2);
        let _ = writeln!(s, "model.c = {}", self.constants.c);
        let _ = writeln!(s, "init.n = {}", render_scalar(&self.init_n));
        let _ = writeln!(s, "init.c = {}", render_scalar(&self.init_c));
        let _ = writeln!(s, "init.u = {}", render_vector(&self.init_u));
        let _ = writeln!(s, "noise.enabled = {}", self.noise_enabled);
        let _ = writeln!(s, "noise.modes = {}", self.modes);
        let _ = writeln!(s, "noise.psi = {}", render_vector(&self.psi));
        let _ = writeln!(s, "noise.h_gain = {}", self.h_gain);
        for a in &self.small {
            let _ = writeln!(s, "noise.jump.small = {},{}", a.z, a.rate);
        }
        for a in &self.large {
            let _ = writeln!(s, "noise.jump.large = {},{}", a.z, a.rate);
        }
        let _ = writeln!(s, "noise.seed = {}", self.seed);
        let _ = writeln!(s, "run.t_end = {}", self.t_end);
        let _ = writeln!(s, "run.dt = {}", self.dt);
        let _ = writeln!(s, "run.cfl_safety = {}", self.cfl_safety);
        let _ = writeln!(s, "run.record_every = {}", self.record_every);
        let _ = writeln!(s, "run.snapshots = {}", join(&self.snapshots));
        let _ = writeln!(s, "run.diffusion = {}", self.diffusion_scheme.name());
        let _ = writeln!(s, "run.advection = {}", self.advection.name());
        let _ = writeln!(s, "diagnostics.ms_ratio = {}", self.ms_ratio);
        let _ = writeln!(s, "diagnostics.compensate = {}", self.compensate);
        let _ = writeln!(s, "ensemble.paths = {}", self.paths);
        s
    }

    /// Builds every field once and checks the assumptions on the data.
    pub fn validate(&self) -> Result<()> {
        self.setup().map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::build(self.dim, &self.extents, &self.resolution, self.bc)
    }

    pub fn kinetics(&self) -> Kinetics {
        Kinetics::new(self.chi.clone(), self.f.clone())
    }

    pub fn jump_spec(&self) -> Result<JumpSpec> {
        JumpSpec::new(self.small.clone(), self.large.clone()).map_err(|e| match e {
            ScnsError::MarkOutOfRegion { z, region } => {
                ScnsError::assumption("Z₀", format!("jump mark z={z} outside the {region} region"))
            }
            other => other,
        })
    }

    fn scalar_field(&self, grid: &Grid, init: &ScalarInit, name: &str) -> Result<ScalarField> {
        let l = grid.extents().to_vec();
        let dim = grid.dim();
        let field = match init {
            ScalarInit::Constant(v) => ScalarField::constant(grid, *v),
            ScalarInit::Bump { amp, width, base } => ScalarField::from_fn(grid, |x| {
                let r2: f64 = (0..dim).map(|a| (x[a] - 0.5 * l[a]).powi(2)).sum();
                base + amp * (-r2 / (width * width)).exp()
            }),
            ScalarInit::Cosine { amp, base } => {
                let k = if grid.is_periodic() { 2.0 * PI } else { PI };
                ScalarField::from_fn(grid, |x| base + amp * (0..dim).map(|a| (k * x[a] / l[a]).cos()).product::<f64>())
            }
            ScalarInit::File(p) => {
                let s = crate::io::read_snapshot(p)?;
                if s.grid != *grid {
                    return Err(ScnsError::ConfigInvalid(format!("init.{name}: snapshot grid differs from grid block")));
                }
                s.scalar()?
            }
        };
        if !field.is_finite() {
            return Err(ScnsError::ConfigInvalid(format!("init.{name} has non-finite values")));
        }
        Ok(field)
    }

    fn vector_field(&self, grid: &Grid, init: &VectorInit, name: &str) -> Result<VectorField> {
        let l = grid.extents().to_vec();
        let tg_k = if grid.is_periodic() { 2.0 * PI } else { PI };
        let v = match init {
            VectorInit::Zero => VectorField::zeros(grid),
            VectorInit::TaylorGreen(a) => VectorField::from_fn(grid, |x| {
                let (px, py) = (tg_k * x[0] / l[0], tg_k * x[1] / l[1]);
                if grid.is_periodic() {
                    [a * px.sin() * py.cos(), -a * px.cos() * py.sin(), 0.0]
                } else {
                    // stream function sin²(πx) sin²(πy) vanishes with its gradient on the walls
                    let (sx, sy) = (px.sin(), py.sin());
                    let (s2x, s2y) = ((2.0 * px).sin(), (2.0 * py).sin());
                    [a * sx * sx * s2y, -a * s2x * sy * sy, 0.0]
                }
            }),
            VectorInit::Shear(a) => VectorField::from_fn(grid, |x| [a * (2.0 * PI * x[1] / l[1]).sin(), 0.0, 0.0]),
            VectorInit::File(p) => {
                let s = crate::io::read_snapshot(p)?;
                if s.grid != *grid {
                    return Err(ScnsError::ConfigInvalid(format!("{name}: snapshot grid differs from grid block")));
                }
                s.vector()?
            }
        };
        if !v.is_finite() {
            return Err(ScnsError::ConfigInvalid(format!("{name} has non-finite values")));
        }
        Ok(v)
    }

    fn potential(&self, grid: &Grid) -> ScalarField {
        match self.phi {
            PotentialSpec::Zero => ScalarField::zeros(grid),
            PotentialSpec::Linear(g) => ScalarField::from_fn(grid, |x| g[0] * x[0] + g[1] * x[1] + g[2] * x[2]),
        }
    }

    /// Builds the grid, validated model, initial state and run settings.
    pub fn setup(&self) -> Result<Setup> {
        let grid = self.grid()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScnsError::ConfigInvalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("run.dt", self.dt)?;
        positive("model.c_dagger", self.constants.c_dagger)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(ScnsError::ConfigInvalid(format!("run.t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(ScnsError::ConfigInvalid(format!("run.cfl_safety must lie in (0,1], got {}", self.cfl_safety)));
        }
        if self.record_every == 0 {
            return Err(ScnsError::ConfigInvalid("run.record_every must be at least 1".into()));
        }
        for (name, v) in [("model.d1", self.constants.d1), ("model.d2", self.constants.d2), ("model.c", self.constants.c)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScnsError::ConfigInvalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }

        let n0 = self.scalar_field(&grid, &self.init_n, "n")?;
        if n0.min() < 0.0 {
            return Err(ScnsError::assumption("(A1)", format!("n₀ ≥ 0 violated: min n₀ = {}", n0.min())));
        }
        if n0.max() <= 0.0 {
            return Err(ScnsError::assumption("(A1)", "n₀ ≢ 0 violated: n₀ vanishes identically"));
        }
        let c0 = self.scalar_field(&grid, &self.init_c, "c")?;
        if c0.min() < 0.0 {
            return Err(ScnsError::assumption("(A1)", format!("c₀ ≥ 0 violated: min c₀ = {}", c0.min())));
        }
        let kinetics = self.kinetics();
        kinetics.validate(c0.max().max(FLOOR))?;

        let jumps = self.jump_spec()?;
        let mut ws = OperatorWorkspace::new(&grid);
        let u_raw = self.vector_field(&grid, &self.init_u, "init.u")?;
        let u0 = ws.leray_project(&u_raw)?.velocity;
        let psi = self.vector_field(&grid, &self.psi, "noise.psi")?;
        let modes = if self.noise_enabled { self.modes } else { 0 };
        let noise = if self.noise_enabled {
            NoiseCoefficients::new(&psi, self.h_gain, modes, jumps.clone(), &mut ws)?
        } else {
            NoiseCoefficients::silent(&grid).with_jumps(JumpSpec::none())
        };
        let sampler_jumps = if self.noise_enabled { jumps } else { JumpSpec::none() };
        let params = ModelParams::new(kinetics, self.potential(&grid), self.eps, self.diffusion, noise)?;
        let initial = State::new(0.0, n0, c0, u0)?;
        let settings = RunSettings {
            t_end: self.t_end,
            step: StepConfig {
                dt: self.dt,
                cfl_safety: self.cfl_safety,
                diffusion: self.diffusion_scheme,
                advection: self.advection,
                record_every: self.record_every,
            },
            snapshot_times: self.snapshots.clone(),
            keep_trajectory: false,
            diagnostics: DiagnosticsSettings {
                c_dagger: self.constants.c_dagger,
                floor: FLOOR,
                ms_ratio: self.ms_ratio,
                compensate: self.compensate,
            },
        };
        Ok(Setup {
            grid,
            params,
            initial,
            sampler: NoiseSampler::new(modes, sampler_jumps, self.noise_enabled),
            settings,
            constants: self.constants,
            seed: self.seed,
            paths: self.paths,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_default() {
        assert_eq!(parse_config("").unwrap(), Config::default());
    }

    #[test]
    fn zero_bacteria_violates_a1() {
        let e = parse_config("init.n = constant:0\n").unwrap_err();
        assert!(matches!(e, ScnsError::AssumptionViolation { ref tag, .. } if tag == "(A1)"), "{e}");
    }

    #[test]
    fn large_mark_declared_small_violates_z0() {
        let e = parse_config("noise.jump.small = 1.5,2\n").unwrap_err();
        assert!(matches!(e, ScnsError::AssumptionViolation { ref tag, .. } if tag == "Z₀"), "{e}");
    }

    #[test]
    fn render_roundtrip() {
        let text = "grid.bc = periodic\ngrid.resolution = 16,24\nmodel.f = saturating:0.5\nnoise.jump.small = 0.25,4\nnoise.jump.small = 0.5,2\nnoise.jump.large = 2,1\nrun.snapshots = 0.05,0.1\nmodel.phi = linear:0,1\nmodel.eps = 0.123456789\n";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.render()).unwrap(), c);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_config("# comment\ngrid.dim = 2\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, ScnsError::ParseError { line: 3, .. }));
    }
}
