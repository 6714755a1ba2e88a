//! Separable orthonormal eigenbases for the 1D stencil operators.
//!
//! Each box operator used by the implicit solves is a Kronecker sum of 1D
//! symmetric matrices that share a closed-form eigenbasis (real Fourier,
//! DCT-II or DST-II depending on the ghost rule), so inversion reduces to a
//! forward transform, a diagonal scaling and a backward transform.

use std::f64::consts::PI;

use crate::grid::{Bc, Grid};

/// Which 1D operator an axis basis diagonalizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AxisOperator {
    /// 3-point second difference with the given ghost rule.
    Laplacian(Bc),
    /// `D Dᵀ` for the centered first difference `D` acting on velocity
    /// components with the given ghost rule (the pressure operator).
    Pressure(Bc),
}

/// Orthonormal eigenvectors stored row-major: `q[i * n + k]` is entry `i` of
/// eigenvector `k`.
#[derive(Clone, Debug)]
pub struct AxisBasis {
    n: usize,
    q: Vec<f64>,
    eigenvalues: Vec<f64>,
    wavenumbers: Vec<f64>,
}

impl AxisBasis {
    pub fn new(op: AxisOperator, n: usize, h: f64) -> Self {
        let length = n as f64 * h;
        let mut q = vec![0.0; n * n];
        let mut eigenvalues = vec![0.0; n];
        let mut wavenumbers = vec![0.0; n];
        let bc = match op {
            AxisOperator::Laplacian(bc) | AxisOperator::Pressure(bc) => bc,
        };
        match (op, bc) {
            (_, Bc::Periodic) => {
                // real Fourier: 0, cos 1, sin 1, cos 2, sin 2, ..., [Nyquist]
                for k in 0..n {
                    let freq = k.div_ceil(2);
                    let norm = if k == 0 || (n % 2 == 0 && k == n - 1) {
                        (1.0 / n as f64).sqrt()
                    } else {
                        (2.0 / n as f64).sqrt()
                    };
                    let omega = 2.0 * PI * freq as f64 / n as f64;
                    for i in 0..n {
                        let phase = omega * i as f64;
                        q[i * n + k] = if k == 0 {
                            norm
                        } else if n % 2 == 0 && k == n - 1 {
                            if i % 2 == 0 {
                                norm
                            } else {
                                -norm
                            }
                        } else if k % 2 == 1 {
                            norm * phase.cos()
                        } else {
                            norm * phase.sin()
                        };
                    }
                    eigenvalues[k] = match op {
                        AxisOperator::Laplacian(_) => -2.0 / (h * h) * (1.0 - omega.cos()),
                        AxisOperator::Pressure(_) => (omega.sin() / h).powi(2),
                    };
                    wavenumbers[k] = 2.0 * PI * freq as f64 / length;
                }
            }
            (AxisOperator::Laplacian(_), Bc::NeumannZero) | (AxisOperator::Pressure(_), _) => {
                // DCT-II; the pressure operator of a no-slip box is diagonal in
                // this basis because the centered difference maps the DST-II
                // velocity modes onto it.
                for k in 0..n {
                    let norm = if k == 0 {
                        (1.0 / n as f64).sqrt()
                    } else {
                        (2.0 / n as f64).sqrt()
                    };
                    let omega = PI * k as f64 / n as f64;
                    for i in 0..n {
                        q[i * n + k] = if k == 0 {
                            norm
                        } else {
                            norm * (omega * (i as f64 + 0.5)).cos()
                        };
                    }
                    eigenvalues[k] = match op {
                        AxisOperator::Laplacian(_) => -2.0 / (h * h) * (1.0 - omega.cos()),
                        AxisOperator::Pressure(_) => (omega.sin() / h).powi(2),
                    };
                    wavenumbers[k] = PI * k as f64 / length;
                }
            }
            (AxisOperator::Laplacian(_), Bc::DirichletZero) => {
                // DST-II
                for k in 0..n {
                    let m = k + 1;
                    let norm = if m == n {
                        (1.0 / n as f64).sqrt()
                    } else {
                        (2.0 / n as f64).sqrt()
                    };
                    let omega = PI * m as f64 / n as f64;
                    for i in 0..n {
                        q[i * n + k] = norm * (omega * (i as f64 + 0.5)).sin();
                    }
                    eigenvalues[k] = -2.0 / (h * h) * (1.0 - omega.cos());
                    wavenumbers[k] = PI * m as f64 / length;
                }
            }
        }
        Self {
            n,
            q,
            eigenvalues,
            wavenumbers,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Physical wavenumber of each eigenvector.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Entry `i` of eigenvector `k`.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.q[i * self.n + k]
    }

    fn forward_line(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.q[i * self.n..(i + 1) * self.n];
            for (yk, qk) in y.iter_mut().zip(row) {
                *yk += xi * qk;
            }
        }
    }

    fn backward_line(&self, y: &[f64], x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &self.q[i * self.n..(i + 1) * self.n];
            *xi = row.iter().zip(y).map(|(q, v)| q * v).sum();
        }
    }
}

/// Tensor-product basis over every axis of a grid.
#[derive(Clone, Debug)]
pub struct SeparableBasis {
    grid: Grid,
    axes: Vec<AxisBasis>,
    eigen_sums: Vec<f64>,
}

impl SeparableBasis {
    pub fn new(grid: &Grid, op: AxisOperator) -> Self {
        let axes: Vec<AxisBasis> = (0..grid.dim())
            .map(|a| AxisBasis::new(op, grid.resolution()[a], grid.spacing()[a]))
            .collect();
        let eigen_sums = (0..grid.len())
            .map(|idx| {
                let c = grid.coords(idx);
                axes.iter().enumerate().map(|(a, b)| b.eigenvalues[c[a]]).sum()
            })
            .collect();
        Self {
            grid: *grid,
            axes,
            eigen_sums,
        }
    }

    pub fn axis(&self, a: usize) -> &AxisBasis {
        &self.axes[a]
    }

    /// Σ_a λ_a(k_a) for the mode stored at flat index `idx`.
    pub fn eigen_sums(&self) -> &[f64] {
        &self.eigen_sums
    }

    fn for_each_line(&self, axis: usize, data: &mut [f64], inverse: bool) {
        let n = self.grid.resolution()[axis];
        let s = self.grid.stride(axis);
        let basis = &self.axes[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        let blocks = data.len() / (n * s);
        for outer in 0..blocks {
            for inner in 0..s {
                let base = outer * n * s + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * s];
                }
                if inverse {
                    basis.backward_line(&line, &mut out);
                } else {
                    basis.forward_line(&line, &mut out);
                }
                for (i, v) in out.iter().enumerate() {
                    data[base + i * s] = *v;
                }
            }
        }
    }

    /// Values → mode coefficients.
    pub fn forward(&self, data: &mut [f64]) {
        for axis in 0..self.grid.dim() {
            self.for_each_line(axis, data, false);
        }
    }

    /// Mode coefficients → values.
    pub fn backward(&self, data: &mut [f64]) {
        for axis in 0..self.grid.dim() {
            self.for_each_line(axis, data, true);
        }
    }

    /// Applies `g(Σλ)` to every mode of `data` in place.
    pub fn apply_symbol(&self, data: &mut [f64], g: impl Fn(f64) -> f64) {
        self.forward(data);
        for (v, &lam) in data.iter_mut().zip(&self.eigen_sums) {
            *v *= g(lam);
        }
        self.backward(data);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_second_difference(n: usize, h: f64, bc: Bc) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = -2.0 / (h * h);
            if i + 1 < n {
                m[i * n + i + 1] = 1.0 / (h * h);
            }
            if i > 0 {
                m[i * n + i - 1] = 1.0 / (h * h);
            }
        }
        match bc {
            Bc::Periodic => {
                m[n - 1] += 1.0 / (h * h);
                m[(n - 1) * n] += 1.0 / (h * h);
            }
            Bc::NeumannZero => {
                m[0] += 1.0 / (h * h);
                m[n * n - 1] += 1.0 / (h * h);
            }
            Bc::DirichletZero => {
                m[0] -= 1.0 / (h * h);
                m[n * n - 1] -= 1.0 / (h * h);
            }
        }
        m
    }

    #[test]
    fn bases_are_orthonormal_eigenvectors() {
        for &n in &[4usize, 7, 8, 12] {
            for bc in [Bc::Periodic, Bc::NeumannZero, Bc::DirichletZero] {
                let h = 0.3;
                let b = AxisBasis::new(AxisOperator::Laplacian(bc), n, h);
                let m = dense_second_difference(n, h, bc);
                for k in 0..n {
                    for l in 0..n {
                        let dot: f64 = (0..n).map(|i| b.entry(i, k) * b.entry(i, l)).sum();
                        let expect = if k == l { 1.0 } else { 0.0 };
                        assert!((dot - expect).abs() < 1e-13, "{bc:?} n={n} k={k} l={l}");
                    }
                    for i in 0..n {
                        let mv: f64 = (0..n).map(|j| m[i * n + j] * b.entry(j, k)).sum();
                        assert!((mv - b.eigenvalues[k] * b.entry(i, k)).abs() < 1e-11);
                    }
                }
            }
        }
    }
}
