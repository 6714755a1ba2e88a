//! Regularization maps and the coefficient operators of the regularized system.

use crate::error::{Result, ScnsError};
use crate::grid::{Bc, Grid, ScalarField, VectorField};
use crate::model::Kinetics;
use crate::noise::JumpSpec;
use crate::ops::advect::for_each_face;
use crate::ops::stencil::gradient;
use crate::ops::transform::{AxisBasis, AxisOperator};
use crate::ops::OperatorWorkspace;

/// `h_ε(s) = ln(1 + εs)/ε`.
pub fn h_eps(s: f64, eps: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(ScnsError::NegativeDensity(s));
    }
    Ok((eps * s).ln_1p() / eps)
}

/// `h_ε′(s) = 1/(1 + εs)`.
pub fn h_eps_prime(s: f64, eps: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(ScnsError::NegativeDensity(s));
    }
    Ok(1.0 / (1.0 + eps * s))
}

#[inline]
pub(crate) fn h_eps_unchecked(s: f64, eps: f64) -> f64 {
    (eps * s.max(0.0)).ln_1p() / eps
}

/// `s·h_ε′(s)`, the regularized chemotactic mobility.
#[inline]
pub(crate) fn mobility(s: f64, eps: f64) -> f64 {
    let s = s.max(0.0);
    s / (1.0 + eps * s)
}

/// Signed chemotactic drift speed `χ(c_f)(c_hi − c_lo)/h` on the upper face
/// of every cell, in the face-flux layout of [`crate::ops::advect`].
pub fn chemotactic_speeds(c: &ScalarField, kin: &Kinetics) -> VectorField {
    let grid = *c.grid();
    let cv = c.values();
    let mut out = VectorField::zeros(&grid);
    for_each_face(&grid, |lo, hi, axis| {
        let chi = kin.chi(0.5 * (cv[lo] + cv[hi]));
        out.component_mut(axis).values_mut()[lo] = chi * (cv[hi] - cv[lo]) / grid.spacing()[axis];
    });
    out
}

/// Face fluxes of `n h_ε′(n) χ(c) ∇c`, with `n` taken from the upwind side
/// of the drift. Walls carry no flux.
pub fn chemotactic_flux(n: &ScalarField, c: &ScalarField, kin: &Kinetics, eps: f64) -> Result<VectorField> {
    n.same_grid(c)?;
    let mut speeds = chemotactic_speeds(c, kin);
    let grid = *n.grid();
    let nv = n.values();
    for_each_face(&grid, |lo, hi, axis| {
        let s = &mut speeds.component_mut(axis).values_mut()[lo];
        let up = if *s >= 0.0 { nv[lo] } else { nv[hi] };
        *s *= mobility(up, eps);
    });
    Ok(speeds)
}

/// Pointwise `h_ε(n) f(c)`.
pub fn consumption(n: &ScalarField, c: &ScalarField, kin: &Kinetics, eps: f64) -> Result<ScalarField> {
    n.same_grid(c)?;
    Ok(n.zip_map(c, |a, b| h_eps_unchecked(a, eps) * kin.f(b.max(0.0))))
}

/// `n ∇Φ` with the scalar ghost rule of the grid.
pub fn buoyancy(n: &ScalarField, phi: &ScalarField) -> Result<VectorField> {
    n.same_grid(phi)?;
    let bc = phi.grid().bc().c;
    let mut g = gradient(phi, bc)?;
    for a in 0..g.grid().dim() {
        let comp = g.component_mut(a);
        for (v, m) in comp.values_mut().iter_mut().zip(n.values()) {
            *v *= m;
        }
    }
    Ok(g)
}

/// `K(u, z) = z u` on the small-mark region `0 < z < 1`.
pub fn jump_k(u: &VectorField, z: f64) -> Result<VectorField> {
    if !(z > 0.0 && z < 1.0) {
        return Err(ScnsError::MarkOutOfRegion { z, region: "small (0<z<1)" });
    }
    Ok(u.scaled(z))
}

/// `G(u, z) = u / z` on the large-mark region `z ≥ 1`.
pub fn jump_g(u: &VectorField, z: f64) -> Result<VectorField> {
    if !(z >= 1.0 && z.is_finite()) {
        return Err(ScnsError::MarkOutOfRegion { z, region: "large (z>=1)" });
    }
    Ok(u.scaled(1.0 / z))
}

/// Scalar L²-orthonormal tensor modes (real Fourier on periodic boxes,
/// cosines on walled boxes), ordered by squared physical wavenumber and then
/// lexicographically by per-axis index.
pub fn scalar_modes(grid: &Grid, count: usize) -> Vec<ScalarField> {
    let bc = if grid.is_periodic() { Bc::Periodic } else { Bc::NeumannZero };
    let dim = grid.dim();
    let bases: Vec<AxisBasis> = (0..dim)
        .map(|a| AxisBasis::new(AxisOperator::Laplacian(bc), grid.resolution()[a], grid.spacing()[a]))
        .collect();
    let mut labels: Vec<(f64, [usize; 3])> = (0..grid.len())
        .map(|idx| {
            let k = grid.coords(idx);
            let w: f64 = (0..dim).map(|a| bases[a].wavenumbers()[k[a]].powi(2)).sum();
            (w, k)
        })
        .collect();
    labels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let norm = 1.0 / grid.cell_volume().sqrt();
    labels
        .iter()
        .take(count)
        .map(|(_, k)| {
            let values = (0..grid.len())
                .map(|idx| {
                    let i = grid.coords(idx);
                    (0..dim).map(|a| bases[a].entry(i[a], k[a])).product::<f64>() * norm
                })
                .collect();
            ScalarField::from_values(grid, values).expect("grid-sized buffer")
        })
        .collect()
}

/// The noise coefficients `h(t,u) = h_gain·u`, `g(t,u)v = (u, v)ψ`, and the
/// jump spec.
#[derive(Clone, Debug)]
pub struct NoiseCoefficients {
    psi: VectorField,
    h_gain: f64,
    wiener_modes: usize,
    modes: Vec<ScalarField>,
    jumps: JumpSpec,
}

impl NoiseCoefficients {
    /// Projects `psi` and tabulates the first `wiener_modes` directions.
    pub fn new(psi: &VectorField, h_gain: f64, wiener_modes: usize, jumps: JumpSpec, ws: &mut OperatorWorkspace) -> Result<Self> {
        let grid = *psi.grid();
        let psi = ws.leray_project(psi)?.velocity;
        let dim = grid.dim();
        let scalar_count = wiener_modes.div_ceil(dim).min(grid.len());
        Ok(Self {
            psi,
            h_gain,
            wiener_modes,
            modes: scalar_modes(&grid, scalar_count),
            jumps,
        })
    }

    /// No Wiener modes, no drift, no jumps.
    pub fn silent(grid: &Grid) -> Self {
        Self {
            psi: VectorField::zeros(grid),
            h_gain: 0.0,
            wiener_modes: 0,
            modes: Vec::new(),
            jumps: JumpSpec::none(),
        }
    }

    pub fn psi(&self) -> &VectorField {
        &self.psi
    }

    pub fn h_gain(&self) -> f64 {
        self.h_gain
    }

    pub fn wiener_modes(&self) -> usize {
        self.wiener_modes
    }

    pub fn jumps(&self) -> &JumpSpec {
        &self.jumps
    }

    /// Same coefficients with a different jump spec.
    pub fn with_jumps(mut self, jumps: JumpSpec) -> Self {
        self.jumps = jumps;
        self
    }

    /// The vector direction `e_ℓ`: scalar mode `ℓ / dim` in component `ℓ % dim`.
    pub fn direction(&self, l: usize) -> VectorField {
        let grid = *self.psi.grid();
        let dim = grid.dim();
        let mut v = VectorField::zeros(&grid);
        *v.component_mut(l % dim) = self.modes[l / dim].clone();
        v
    }

    /// `⟨u, e_ℓ⟩` for every ℓ.
    pub fn coordinates(&self, u: &VectorField) -> Vec<f64> {
        let dim = u.grid().dim();
        (0..self.wiener_modes)
            .map(|l| u.component(l % dim).inner(&self.modes[l / dim]))
            .collect()
    }

    /// `g(u) dW = Σ_ℓ ⟨u, e_ℓ⟩ dW^ℓ · ψ`.
    pub fn apply_g(&self, u: &VectorField, dw: &[f64]) -> Result<VectorField> {
        if dw.len() != self.wiener_modes {
            return Err(ScnsError::ModeCountMismatch {
                expected: self.wiener_modes,
                found: dw.len(),
            });
        }
        let amp: f64 = self.coordinates(u).iter().zip(dw).map(|(a, b)| a * b).sum();
        Ok(self.psi.scaled(amp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundarySpec;

    #[test]
    fn h_eps_examples() {
        assert_eq!(h_eps(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(h_eps(1.0, 1.0).unwrap(), 0.6931471805599453);
        assert!((h_eps(2.0, 1e-6).unwrap() - 2.0).abs() < 2e-6);
        assert!(matches!(h_eps(-1.0, 1.0), Err(ScnsError::NegativeDensity(_))));
    }

    #[test]
    fn modes_are_orthonormal() {
        for bc in [BoundarySpec::periodic(), BoundarySpec::walled()] {
            let g = Grid::build(2, &[1.0, 2.0], &[8, 6], bc).unwrap();
            let modes = scalar_modes(&g, 12);
            for (i, a) in modes.iter().enumerate() {
                for (j, b) in modes.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((a.inner(b) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn chemotactic_flux_vanishes_for_flat_c() {
        let g = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::walled()).unwrap();
        let n = ScalarField::from_fn(&g, |x| 1.0 + x[0]);
        let c = ScalarField::constant(&g, 0.7);
        let f = chemotactic_flux(&n, &c, &Kinetics::prototype(1.0), 0.1).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn marks_respect_regions() {
        let g = Grid::build(2, &[1.0, 1.0], &[4, 4], BoundarySpec::periodic()).unwrap();
        let u = VectorField::from_fn(&g, |x| [x[0], -x[1], 0.0]);
        assert_eq!(jump_k(&u, 0.5).unwrap(), u.scaled(0.5));
        assert_eq!(jump_g(&u, 2.0).unwrap(), u.scaled(0.5));
        assert!(jump_k(&u, 1.0).is_err());
        assert!(jump_g(&u, 0.5).is_err());
    }
}
