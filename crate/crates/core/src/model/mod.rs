//! Kinetics, regularization maps, forcing and noise coefficients.

mod coeffs;
mod kinetics;

pub use coeffs::{
    buoyancy, chemotactic_flux, chemotactic_speeds, consumption, h_eps, h_eps_prime, jump_g, jump_k, scalar_modes,
    NoiseCoefficients,
};
pub(crate) use coeffs::h_eps_unchecked;
pub use kinetics::{adaptive_simpson, CubicSpline, FunctionSpec, Kinetics, VALIDATION_SAMPLES};

use crate::error::{Result, ScnsError};
use crate::grid::ScalarField;
use crate::ops::gradient;

/// Diffusion coefficients `(D_n, D_c, δ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diffusion {
    pub d_n: f64,
    pub d_c: f64,
    pub delta: f64,
}

impl Default for Diffusion {
    fn default() -> Self {
        Self {
            d_n: 1.0,
            d_c: 1.0,
            delta: 1.0,
        }
    }
}

/// Everything the stepper needs besides the state and the draws.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub kinetics: Kinetics,
    pub phi: ScalarField,
    pub eps: f64,
    pub diffusion: Diffusion,
    pub noise: NoiseCoefficients,
}

impl ModelParams {
    pub fn new(kinetics: Kinetics, phi: ScalarField, eps: f64, diffusion: Diffusion, noise: NoiseCoefficients) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ScnsError::ConfigInvalid(format!("regularization eps must be positive, got {eps}")));
        }
        let d = diffusion;
        if !(d.d_n > 0.0 && d.d_c > 0.0 && d.delta > 0.0) {
            return Err(ScnsError::ConfigInvalid("diffusion coefficients must be positive".into()));
        }
        let grad = gradient(&phi, phi.grid().bc().c)?;
        if !phi.is_finite() || !grad.is_finite() {
            return Err(ScnsError::assumption("(A2)", "potential Φ must be finite with finite gradient"));
        }
        Ok(Self {
            kinetics,
            phi,
            eps,
            diffusion,
            noise,
        })
    }
}
