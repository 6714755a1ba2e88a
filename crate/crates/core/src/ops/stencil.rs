//! Second-order finite-difference stencils on cell centers.
//!
//! Ghost values: periodic wraps, `NeumannZero` mirrors the boundary cell,
//! `DirichletZero` mirrors it with a sign flip.

use crate::error::Result;
use crate::grid::{Bc, ScalarField, VectorField};

/// 5-point (2D) / 7-point (3D) Laplacian.
pub fn laplacian(f: &ScalarField, bc: Bc) -> Result<ScalarField> {
    let grid = *f.grid();
    grid.check_bc(bc)?;
    let v = f.values();
    let mut out = vec![0.0; grid.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let c = grid.coords(idx);
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let h = grid.spacing()[axis];
            let fp = grid.neighbor(v, idx, c[axis], axis, true, bc);
            let fm = grid.neighbor(v, idx, c[axis], axis, false, bc);
            acc += (fp - 2.0 * v[idx] + fm) / (h * h);
        }
        *o = acc;
    }
    ScalarField::from_values(&grid, out)
}

/// Centered derivative along one axis.
pub fn partial(f: &ScalarField, axis: usize, bc: Bc) -> Result<ScalarField> {
    let grid = *f.grid();
    grid.check_bc(bc)?;
    let v = f.values();
    let inv = 0.5 / grid.spacing()[axis];
    let out = (0..grid.len())
        .map(|idx| {
            let c = grid.coords(idx)[axis];
            (grid.neighbor(v, idx, c, axis, true, bc) - grid.neighbor(v, idx, c, axis, false, bc)) * inv
        })
        .collect();
    ScalarField::from_values(&grid, out)
}

/// Centered gradient.
pub fn gradient(f: &ScalarField, bc: Bc) -> Result<VectorField> {
    let comps = (0..f.grid().dim())
        .map(|axis| partial(f, axis, bc))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// Centered divergence; `bc` supplies the ghost values of every component.
pub fn divergence(v: &VectorField, bc: Bc) -> Result<ScalarField> {
    let grid = *v.grid();
    let mut out = ScalarField::zeros(&grid);
    for axis in 0..grid.dim() {
        let d = partial(v.component(axis), axis, bc)?;
        out.axpy(1.0, &d);
    }
    Ok(out)
}

/// Mixed second derivative ∂_a ∂_b with centered differences (a ≠ b), or the
/// 3-point second derivative when a = b.
pub fn second_partial(f: &ScalarField, a: usize, b: usize, bc: Bc) -> Result<ScalarField> {
    let grid = *f.grid();
    grid.check_bc(bc)?;
    if a == b {
        let v = f.values();
        let h = grid.spacing()[a];
        let out = (0..grid.len())
            .map(|idx| {
                let c = grid.coords(idx)[a];
                (grid.neighbor(v, idx, c, a, true, bc) - 2.0 * v[idx] + grid.neighbor(v, idx, c, a, false, bc))
                    / (h * h)
            })
            .collect();
        ScalarField::from_values(&grid, out)
    } else {
        partial(&partial(f, a, bc)?, b, bc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, BoundarySpec, Grid};
    use std::f64::consts::PI;

    #[test]
    fn constants_are_harmonic() {
        let g = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::walled()).unwrap();
        let f = ScalarField::constant(&g, 3.5);
        let lap = laplacian(&f, Bc::NeumannZero).unwrap();
        assert!(lap.values().iter().all(|&v| v == 0.0));
        let grad = gradient(&f, Bc::NeumannZero).unwrap();
        assert_eq!(grad.max_abs(), 0.0);
    }

    #[test]
    fn periodic_sine_eigenvalue() {
        let g = Grid::build(2, &[1.0, 1.0], &[128, 4], BoundarySpec::periodic()).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let lap = laplacian(&f, Bc::Periodic).unwrap();
        let k2 = (2.0 * PI).powi(2);
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .fold(0.0f64, |m, (l, v)| m.max((l + k2 * v).abs()));
        assert!(err <= 0.003 * k2, "max error {err}");
    }

    #[test]
    fn neumann_cosine_eigenvalue() {
        let g = Grid::build(2, &[1.0, 1.0], &[128, 4], BoundarySpec::walled()).unwrap();
        let f = ScalarField::from_fn(&g, |x| (PI * x[0]).cos());
        let lap = laplacian(&f, Bc::NeumannZero).unwrap();
        let k2 = PI * PI;
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .fold(0.0f64, |m, (l, v)| m.max((l + k2 * v).abs()));
        assert!(err <= 0.003 * k2, "max error {err}");
    }

    #[test]
    fn ramp_gradient_is_exact_in_interior() {
        let g = Grid::build(2, &[1.0, 1.0], &[64, 64], BoundarySpec::walled()).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0]);
        let grad = gradient(&f, Bc::NeumannZero).unwrap();
        for idx in 0..g.len() {
            let c = g.coords(idx);
            if c[0] > 0 && c[0] < 63 {
                assert!((grad.component(0).values()[idx] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn neumann_laplacian_conserves_mass() {
        let g = Grid::build(2, &[1.0, 2.0], &[9, 7], BoundarySpec::walled()).unwrap();
        let f = ScalarField::from_fn(&g, |x| (3.0 * x[0]).exp() * (x[1] * 5.0).sin());
        let lap = laplacian(&f, Bc::NeumannZero).unwrap();
        let scale = f.max_abs() / (g.spacing()[0] * g.spacing()[0]);
        assert!(integrate(&lap).abs() < 1e-12 * scale);
    }

    #[test]
    fn bc_must_match_topology() {
        let g = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::periodic()).unwrap();
        let f = ScalarField::zeros(&g);
        assert!(laplacian(&f, Bc::NeumannZero).is_err());
    }
}
