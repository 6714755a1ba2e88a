//! Discrete mollifier `L_ε` with the compact bump `(1 - (r/ε)²)²` on `r < ε`.
//!
//! Periodic grids wrap. Walled grids use the even reflection across each
//! wall, which keeps the operator symmetric, constant preserving and
//! non-expansive in L².

use crate::error::{Result, ScnsError};
use crate::grid::{Grid, ScalarField, VectorField};

#[derive(Clone, Debug)]
pub struct Mollifier {
    grid: Grid,
    eps: f64,
    taps: Vec<([isize; 3], f64)>,
}

impl Mollifier {
    pub fn new(grid: &Grid, eps: f64) -> Result<Self> {
        let h_min = grid.spacing().iter().copied().fold(f64::INFINITY, f64::min);
        if !(eps > 0.0) || eps < h_min {
            return Err(ScnsError::KernelTooNarrow { eps, spacing: h_min });
        }
        let dim = grid.dim();
        let mut reach = [0isize; 3];
        for a in 0..dim {
            reach[a] = (eps / grid.spacing()[a]).floor() as isize;
        }
        let mut taps = Vec::new();
        for i in -reach[0]..=reach[0] {
            for j in -reach[1]..=reach[1] {
                for k in -reach[2]..=reach[2] {
                    let off = [i, j, k];
                    let r2: f64 = (0..dim).map(|a| (off[a] as f64 * grid.spacing()[a]).powi(2)).sum();
                    let q = r2 / (eps * eps);
                    if q < 1.0 {
                        taps.push((off, (1.0 - q) * (1.0 - q)));
                    }
                }
            }
        }
        let total: f64 = taps.iter().map(|t| t.1).sum();
        taps.iter_mut().for_each(|t| t.1 /= total);
        Ok(Self { grid: *grid, eps, taps })
    }

    /// Identity operator (used when the radius is below the grid spacing).
    pub fn identity(grid: &Grid, eps: f64) -> Self {
        Self {
            grid: *grid,
            eps,
            taps: vec![([0, 0, 0], 1.0)],
        }
    }

    /// Falls back to the identity with a warning when `eps` is too narrow.
    pub fn new_or_identity(grid: &Grid, eps: f64) -> Self {
        match Self::new(grid, eps) {
            Ok(m) => m,
            Err(err) => {
                log::warn!("{err}; mollifier falls back to the identity");
                Self::identity(grid, eps)
            }
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn taps(&self) -> usize {
        self.taps.len()
    }

    fn wrap(&self, axis: usize, j: isize) -> usize {
        let n = self.grid.resolution()[axis] as isize;
        if self.grid.is_periodic() {
            j.rem_euclid(n) as usize
        } else {
            let m = j.rem_euclid(2 * n);
            (if m >= n { 2 * n - 1 - m } else { m }) as usize
        }
    }

    pub fn apply_scalar(&self, f: &ScalarField) -> ScalarField {
        let grid = self.grid;
        let v = f.values();
        if self.taps.len() == 1 {
            return f.clone();
        }
        let dim = grid.dim();
        let out = (0..grid.len())
            .map(|idx| {
                let c = grid.coords(idx);
                let mut acc = 0.0;
                for (off, w) in &self.taps {
                    let mut nc = [0usize; 3];
                    for a in 0..dim {
                        nc[a] = self.wrap(a, c[a] as isize + off[a]);
                    }
                    acc += w * v[grid.index(nc)];
                }
                acc
            })
            .collect();
        ScalarField::from_values(&grid, out).expect("grid-sized buffer")
    }

    pub fn apply(&self, v: &VectorField) -> VectorField {
        let comps = v.components().iter().map(|c| self.apply_scalar(c)).collect();
        VectorField::from_components(comps).expect("same grid")
    }
}

/// One-shot `L_ε v`.
pub fn mollify(v: &VectorField, eps: f64) -> VectorField {
    Mollifier::new_or_identity(v.grid(), eps).apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundarySpec;

    #[test]
    fn preserves_constants() {
        for bc in [BoundarySpec::periodic(), BoundarySpec::walled()] {
            let g = Grid::build(2, &[1.0, 1.0], &[32, 32], bc).unwrap();
            let v = VectorField::from_fn(&g, |_| [2.5, -1.0, 0.0]);
            let out = mollify(&v, 0.1);
            for (a, b) in out.components().iter().zip(v.components()) {
                for (x, y) in a.values().iter().zip(b.values()) {
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn narrow_kernel_is_identity() {
        let g = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::periodic()).unwrap();
        assert!(matches!(Mollifier::new(&g, 0.05), Err(ScnsError::KernelTooNarrow { .. })));
        let v = VectorField::from_fn(&g, |x| [x[0], x[1], 0.0]);
        assert_eq!(mollify(&v, 0.05), v);
    }

    #[test]
    fn reflection_index() {
        let g = Grid::build(2, &[1.0, 1.0], &[4, 4], BoundarySpec::walled()).unwrap();
        let m = Mollifier::identity(&g, 1.0);
        let idx: Vec<usize> = (-5..9).map(|j| m.wrap(0, j)).collect();
        assert_eq!(idx, vec![3, 3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0, 0]);
    }
}
