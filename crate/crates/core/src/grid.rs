//! Rectangular cell-centered grids, scalar and vector fields, and midpoint quadrature.
//!
//! Every field is stored in axis-0-major order: the flat index of cell
//! `(i0, i1, i2)` is `(i0 * n1 + i1) * n2 + i2`. Two-dimensional grids carry a
//! trivial third axis with one cell.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScnsError};

/// Boundary condition attached to one unknown of the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bc {
    Periodic,
    NeumannZero,
    DirichletZero,
}

impl Bc {
    pub fn name(self) -> &'static str {
        match self {
            Bc::Periodic => "periodic",
            Bc::NeumannZero => "neumann-zero",
            Bc::DirichletZero => "dirichlet-zero",
        }
    }

    pub fn parse(s: &str) -> Option<Bc> {
        match s {
            "periodic" => Some(Bc::Periodic),
            "neumann-zero" | "neumann" => Some(Bc::NeumannZero),
            "dirichlet-zero" | "dirichlet" => Some(Bc::DirichletZero),
            _ => None,
        }
    }
}

/// Per-variable boundary tags for `(n, c, u)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub n: Bc,
    pub c: Bc,
    pub u: Bc,
}

impl BoundarySpec {
    pub fn periodic() -> Self {
        Self {
            n: Bc::Periodic,
            c: Bc::Periodic,
            u: Bc::Periodic,
        }
    }

    /// No-flux walls for `n` and `c`, no-slip walls for `u`.
    pub fn walled() -> Self {
        Self {
            n: Bc::NeumannZero,
            c: Bc::NeumannZero,
            u: Bc::DirichletZero,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, bc) in [("n", self.n), ("c", self.c)] {
            if bc == Bc::DirichletZero {
                return Err(ScnsError::IncompatibleBoundaryConditions(format!(
                    "{name} admits neumann-zero or periodic, got dirichlet-zero"
                )));
            }
        }
        if self.u == Bc::NeumannZero {
            return Err(ScnsError::IncompatibleBoundaryConditions(
                "u admits dirichlet-zero or periodic, got neumann-zero".into(),
            ));
        }
        let periodic = [self.n, self.c, self.u]
            .iter()
            .filter(|bc| **bc == Bc::Periodic)
            .count();
        if periodic != 0 && periodic != 3 {
            return Err(ScnsError::IncompatibleBoundaryConditions(
                "periodicity must be shared by n, c and u".into(),
            ));
        }
        Ok(())
    }
}

/// A box-shaped lattice of cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [f64; 3],
    resolution: [usize; 3],
    spacing: [f64; 3],
    strides: [usize; 3],
    bc: BoundarySpec,
}

impl Grid {
    pub fn build(dim: usize, extents: &[f64], resolution: &[usize], bc: BoundarySpec) -> Result<Grid> {
        if dim != 2 && dim != 3 {
            return Err(ScnsError::InvalidDimension(dim));
        }
        if extents.len() != dim || resolution.len() != dim {
            return Err(ScnsError::InvalidDimension(extents.len().max(resolution.len())));
        }
        let mut ext = [1.0; 3];
        let mut res = [1usize; 3];
        let mut spacing = [1.0; 3];
        for axis in 0..dim {
            if !(extents[axis].is_finite() && extents[axis] > 0.0) {
                return Err(ScnsError::InvalidExtent {
                    axis,
                    extent: extents[axis],
                });
            }
            if resolution[axis] < 4 {
                return Err(ScnsError::InvalidResolution {
                    axis,
                    cells: resolution[axis],
                });
            }
            ext[axis] = extents[axis];
            res[axis] = resolution[axis];
            spacing[axis] = extents[axis] / resolution[axis] as f64;
        }
        bc.validate()?;
        let strides = [res[1] * res[2], res[2], 1];
        Ok(Grid {
            dim,
            extents: ext,
            resolution: res,
            spacing,
            strides,
            bc,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn bc(&self) -> BoundarySpec {
        self.bc
    }

    pub fn is_periodic(&self) -> bool {
        self.bc.u == Bc::Periodic
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extents[..self.dim].iter().product()
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        [
            idx / self.strides[0],
            (idx / self.strides[1]) % self.resolution[1],
            idx % self.resolution[2],
        ]
    }

    pub fn index(&self, coords: [usize; 3]) -> usize {
        coords[0] * self.strides[0] + coords[1] * self.strides[1] + coords[2]
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = (c[axis] as f64 + 0.5) * self.spacing[axis];
        }
        x
    }

    /// Rejects a boundary tag that the grid's topology cannot host.
    pub fn check_bc(&self, bc: Bc) -> Result<()> {
        match (self.is_periodic(), bc) {
            (true, Bc::Periodic) | (false, Bc::NeumannZero) | (false, Bc::DirichletZero) => Ok(()),
            (true, other) => Err(ScnsError::BoundaryMismatch(format!(
                "{} requested on a periodic grid",
                other.name()
            ))),
            (false, Bc::Periodic) => Err(ScnsError::BoundaryMismatch(
                "periodic requested on a walled grid".into(),
            )),
        }
    }

    /// Value of `f` one cell away along `axis` (`forward` selects +1), using
    /// ghost values for `bc` when the neighbour lies outside the box.
    #[inline]
    pub(crate) fn neighbor(&self, f: &[f64], idx: usize, coord: usize, axis: usize, forward: bool, bc: Bc) -> f64 {
        let n = self.resolution[axis];
        let s = self.strides[axis];
        if forward {
            if coord + 1 < n {
                f[idx + s]
            } else {
                match bc {
                    Bc::Periodic => f[idx + s - n * s],
                    Bc::NeumannZero => f[idx],
                    Bc::DirichletZero => -f[idx],
                }
            }
        } else if coord > 0 {
            f[idx - s]
        } else {
            match bc {
                Bc::Periodic => f[idx + (n - 1) * s],
                Bc::NeumannZero => f[idx],
                Bc::DirichletZero => -f[idx],
            }
        }
    }
}

/// One real value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.cell_center(i))).collect();
        Self { grid: *grid, values }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(ScnsError::FieldSizeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid: *grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += a * w;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    /// L² inner product under the midpoint rule.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(ScnsError::GridMismatch)
        }
    }
}

/// `dim` scalar components on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = Self::zeros(grid);
        for i in 0..grid.len() {
            let val = f(grid.cell_center(i));
            for (axis, comp) in v.components.iter_mut().enumerate() {
                comp.values[i] = val[axis];
            }
        }
        v
    }

    pub fn from_components(components: Vec<ScalarField>) -> Result<Self> {
        let grid = *components.first().ok_or(ScnsError::GridMismatch)?.grid();
        if components.len() != grid.dim() || components.iter().any(|c| *c.grid() != grid) {
            return Err(ScnsError::GridMismatch);
        }
        Ok(Self { grid, components })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField {
        &mut self.components[axis]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (c, o) in self.components.iter_mut().zip(&other.components) {
            c.axpy(a, o);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.components.iter_mut().for_each(|c| c.scale(a));
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn inner(&self, other: &VectorField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    /// Discrete L² norm.
    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let mut out = ScalarField::zeros(&self.grid);
        for c in &self.components {
            for (o, v) in out.values.iter_mut().zip(&c.values) {
                *o += v * v;
            }
        }
        out.values.iter_mut().for_each(|v| *v = v.sqrt());
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }
}

/// Midpoint-rule integral over the box.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_volume()
}

/// Discrete Lᵖ norm; pass `f64::INFINITY` for the max norm.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(ScnsError::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let s: f64 = if p == 1.0 {
        f.values.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        f.values.iter().map(|v| v * v).sum()
    } else {
        f.values.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((s * f.grid.cell_volume()).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit2(n: usize, bc: BoundarySpec) -> Grid {
        Grid::build(2, &[1.0, 1.0], &[n, n], bc).unwrap()
    }

    #[test]
    fn spacing_follows_extents() {
        let g = unit2(8, BoundarySpec::periodic());
        assert_eq!(g.spacing(), &[0.125, 0.125]);
        let g3 = Grid::build(3, &[1.0, 1.0, 1.0], &[4, 4, 4], BoundarySpec::walled()).unwrap();
        assert_eq!(g3.len(), 64);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            Grid::build(2, &[1.0, 1.0], &[2, 2], BoundarySpec::periodic()),
            Err(ScnsError::InvalidResolution { .. })
        ));
        assert!(matches!(
            Grid::build(4, &[1.0; 4], &[8; 4], BoundarySpec::periodic()),
            Err(ScnsError::InvalidDimension(4))
        ));
        let bad = BoundarySpec {
            n: Bc::DirichletZero,
            c: Bc::NeumannZero,
            u: Bc::DirichletZero,
        };
        assert!(matches!(
            Grid::build(2, &[1.0, 1.0], &[8, 8], bad),
            Err(ScnsError::IncompatibleBoundaryConditions(_))
        ));
        let mixed = BoundarySpec {
            n: Bc::Periodic,
            c: Bc::NeumannZero,
            u: Bc::DirichletZero,
        };
        assert!(Grid::build(2, &[1.0, 1.0], &[8, 8], mixed).is_err());
    }

    #[test]
    fn constant_quadrature() {
        let g = unit2(8, BoundarySpec::periodic());
        assert_eq!(integrate(&ScalarField::constant(&g, 1.0)), 1.0);
        let g2 = Grid::build(2, &[2.0, 2.0], &[8, 8], BoundarySpec::periodic()).unwrap();
        assert_eq!(integrate(&ScalarField::constant(&g2, 3.0)), 12.0);
    }

    #[test]
    fn sine_integrates_to_zero() {
        let g = unit2(64, BoundarySpec::periodic());
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        assert!(integrate(&f).abs() < 1e-12);
    }

    #[test]
    fn norms() {
        let g = unit2(8, BoundarySpec::periodic());
        let two = ScalarField::constant(&g, 2.0);
        assert!((lp_norm(&two, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(lp_norm(&two, f64::INFINITY).unwrap(), 2.0);
        let mut spike = ScalarField::zeros(&g);
        spike.values_mut()[17] = 5.0;
        assert_eq!(lp_norm(&spike, f64::INFINITY).unwrap(), 5.0);
        assert!(matches!(lp_norm(&two, 0.5), Err(ScnsError::InvalidExponent(_))));
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::build(3, &[1.0, 2.0, 3.0], &[4, 5, 6], BoundarySpec::walled()).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index(g.coords(i)), i);
        }
    }
}
