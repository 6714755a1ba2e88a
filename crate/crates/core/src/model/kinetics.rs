//! Chemotactic sensitivity `χ`, consumption `f` and the derived functions
//! `θ = f/χ`, `Ψ(s) = ∫₁ˢ θ^{-1/2}` and `ρ(s) = ∫₁ˢ θ^{-1}`.

use crate::error::{Result, ScnsError};

/// Natural cubic spline through tabulated points.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(ScnsError::InvalidKinetics(format!(
                "a table needs at least 3 (s, value) pairs, got {n}"
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(ScnsError::InvalidKinetics("table abscissae must be finite and strictly increasing".into()));
        }
        // second derivatives M_i from the tridiagonal system, M_0 = M_{n-1} = 0
        let mut m = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut upper = vec![0.0; n];
        diag[0] = 1.0;
        diag[n - 1] = 1.0;
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let lower = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
            // forward elimination
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
        Ok(Self { xs, ys, m })
    }

    pub fn points(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn segment(&self, s: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&x| x <= s) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Value and first two derivatives. Outside the table the end cubic is
    /// continued.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let i = self.segment(s);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = x1 - x0;
        let a = (x1 - s) / h;
        let b = (s - x0) / h;
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }
}

/// A scalar function of the concentration.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionSpec {
    /// `s ↦ k`
    Constant(f64),
    /// `s ↦ a·s`
    Linear(f64),
    /// `s ↦ s / (1 + k s)`
    Saturating(f64),
    Tabulated(CubicSpline),
}

impl FunctionSpec {
    /// `(value, first derivative, second derivative)` at `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match self {
            FunctionSpec::Constant(k) => (*k, 0.0, 0.0),
            FunctionSpec::Linear(a) => (a * s, *a, 0.0),
            FunctionSpec::Saturating(k) => {
                let d = 1.0 + k * s;
                (s / d, 1.0 / (d * d), -2.0 * k / (d * d * d))
            }
            FunctionSpec::Tabulated(t) => t.eval(s),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    /// `lim_{σ→s} value(σ)/σ`, finite at zero for functions vanishing there.
    pub fn value_over_s(&self, s: f64) -> f64 {
        if s > 0.0 {
            self.value(s) / s
        } else {
            self.eval(0.0).1
        }
    }
}

/// The pair `(χ, f)` with the derived entropy functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Kinetics {
    chi: FunctionSpec,
    f: FunctionSpec,
}

/// Samples used by [`Kinetics::validate`].
pub const VALIDATION_SAMPLES: usize = 1024;

impl Kinetics {
    pub fn new(chi: FunctionSpec, f: FunctionSpec) -> Self {
        Self { chi, f }
    }

    /// `χ ≡ κ`, `f(s) = s`.
    pub fn prototype(kappa: f64) -> Self {
        Self::new(FunctionSpec::Constant(kappa), FunctionSpec::Linear(1.0))
    }

    pub fn chi_spec(&self) -> &FunctionSpec {
        &self.chi
    }

    pub fn f_spec(&self) -> &FunctionSpec {
        &self.f
    }

    pub fn chi(&self, s: f64) -> f64 {
        self.chi.value(s)
    }

    pub fn f(&self, s: f64) -> f64 {
        self.f.value(s)
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        self.f.eval(s).1
    }

    /// `f(s)/s`, continuously extended to `s = 0`.
    pub fn f_over_s(&self, s: f64) -> f64 {
        self.f.value_over_s(s)
    }

    /// `θ/χ`-ratio constant `κ/a` when both functions are in prototype form.
    fn prototype_ratio(&self) -> Option<f64> {
        match (&self.chi, &self.f) {
            (FunctionSpec::Constant(k), FunctionSpec::Linear(a)) => Some(k / a),
            _ => None,
        }
    }

    /// `(θ, θ′, θ″)` at `s`.
    pub fn theta_derivs(&self, s: f64) -> (f64, f64, f64) {
        let (f, f1, f2) = self.f.eval(s);
        let (x, x1, x2) = self.chi.eval(s);
        let t = f / x;
        let t1 = (f1 * x - f * x1) / (x * x);
        let t2 = f2 / x - 2.0 * f1 * x1 / (x * x) - f * x2 / (x * x) + 2.0 * f * x1 * x1 / (x * x * x);
        (t, t1, t2)
    }

    pub fn theta(&self, s: f64) -> f64 {
        self.theta_derivs(s).0
    }

    /// `(fχ)′`.
    pub fn f_chi_prime(&self, s: f64) -> f64 {
        let (f, f1, _) = self.f.eval(s);
        let (x, x1, _) = self.chi.eval(s);
        f1 * x + f * x1
    }

    pub fn psi(&self, s: f64) -> Result<f64> {
        self.eval_theta_psi_rho(s).map(|t| t.1)
    }

    pub fn rho(&self, s: f64) -> Result<f64> {
        self.eval_theta_psi_rho(s).map(|t| t.2)
    }

    /// `(θ(s), Ψ(s), ρ(s))` for `s > 0`; closed forms for the prototype,
    /// adaptive Simpson quadrature (tolerance 1e-10) otherwise.
    pub fn eval_theta_psi_rho(&self, s: f64) -> Result<(f64, f64, f64)> {
        let theta = self.theta(s);
        if !(s > 0.0) || !(theta > 0.0) {
            return Err(ScnsError::SingularKinetics { s, theta });
        }
        if let Some(r) = self.prototype_ratio() {
            return Ok((theta, 2.0 * r.sqrt() * (s.sqrt() - 1.0), r * s.ln()));
        }
        let check = |sigma: f64| -> Result<f64> {
            let th = self.theta(sigma);
            if th > 0.0 {
                Ok(th)
            } else {
                Err(ScnsError::SingularKinetics { s: sigma, theta: th })
            }
        };
        let (lo, hi, sign) = if s >= 1.0 { (1.0, s, 1.0) } else { (s, 1.0, -1.0) };
        let mut failure = None;
        let mut psi_integrand = |x: f64| match check(x) {
            Ok(th) => 1.0 / th.sqrt(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let psi = sign * adaptive_simpson(&mut psi_integrand, lo, hi, 1e-10);
        let rho = sign * adaptive_simpson(&mut |x: f64| 1.0 / self.theta(x).max(f64::MIN_POSITIVE), lo, hi, 1e-10);
        match failure {
            Some(e) => Err(e),
            None => Ok((theta, psi, rho)),
        }
    }

    /// Samples the structural conditions on `[0, 1.5·c_max]`.
    pub fn validate(&self, c_max: f64) -> Result<()> {
        let tag = "(A2)";
        let top = 1.5 * c_max.max(f64::MIN_POSITIVE);
        let f0 = self.f(0.0);
        if f0.abs() > 1e-14 {
            return Err(ScnsError::assumption(tag, format!("f(0)=0 violated: f(0)={f0}")));
        }
        let scale = self.theta(top).abs().max(1e-300);
        for i in 0..VALIDATION_SAMPLES {
            let s = top * i as f64 / (VALIDATION_SAMPLES - 1) as f64;
            let chi = self.chi(s);
            if !(chi > 0.0) {
                return Err(ScnsError::assumption(tag, format!("χ>0 violated at s={s}: χ={chi}")));
            }
            if s > 0.0 && !(self.f(s) > 0.0) {
                return Err(ScnsError::assumption(tag, format!("f>0 violated at s={s}")));
            }
            let (_, t1, t2) = self.theta_derivs(s);
            if !(t1 > 0.0) {
                return Err(ScnsError::assumption(tag, format!("(f/χ)′>0 violated at s={s}: {t1}")));
            }
            if t2 > 1e-10 * scale / (top * top) {
                return Err(ScnsError::assumption(tag, format!("(f/χ)″≤0 violated at s={s}: {t2}")));
            }
            let fc = self.f_chi_prime(s);
            if fc < -1e-12 * scale / top {
                return Err(ScnsError::assumption(tag, format!("(fχ)′≥0 violated at s={s}: {fc}")));
            }
        }
        Ok(())
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn recurse(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
