//! Solver workspace: implicit diffusion solves and the discrete Leray projection.

use std::collections::HashMap;

use crate::error::{Result, ScnsError};
use crate::grid::{Bc, Grid, ScalarField, VectorField};
use crate::ops::mollify::Mollifier;
use crate::ops::stencil::{divergence, gradient};
use crate::ops::transform::{AxisOperator, SeparableBasis};

/// How the pressure Poisson problem is solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PressureSolver {
    /// Exact diagonalization in the separable eigenbasis.
    Spectral,
    /// Matrix-free conjugate gradients (walled boxes only; periodic boxes
    /// always use the spectral route).
    ConjugateGradient { rel_tol: f64, max_iter: Option<usize> },
}

impl PressureSolver {
    pub fn conjugate_gradient_default() -> Self {
        PressureSolver::ConjugateGradient {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

/// Time discretization of the implicit diffusion sub-step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffusionScheme {
    BackwardEuler,
    CrankNicolson,
}

impl DiffusionScheme {
    pub fn name(self) -> &'static str {
        match self {
            DiffusionScheme::BackwardEuler => "backward-euler",
            DiffusionScheme::CrankNicolson => "crank-nicolson",
        }
    }
}

/// Result of a projection.
#[derive(Clone, Debug)]
pub struct Projection {
    pub velocity: VectorField,
    pub pressure: ScalarField,
}

/// Preallocated transforms for one grid. Holds no state shared across
/// threads; give each worker its own workspace.
#[derive(Debug)]
pub struct OperatorWorkspace {
    grid: Grid,
    bases: HashMap<AxisOperator, SeparableBasis>,
    mollifiers: HashMap<u64, Mollifier>,
    pressure_solver: PressureSolver,
    null_tolerance: f64,
}

impl OperatorWorkspace {
    pub fn new(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            bases: HashMap::new(),
            mollifiers: HashMap::new(),
            pressure_solver: PressureSolver::Spectral,
            null_tolerance: 1e-10,
        }
    }

    pub fn with_pressure_solver(mut self, solver: PressureSolver) -> Self {
        self.pressure_solver = solver;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pressure_solver(&self) -> PressureSolver {
        self.pressure_solver
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if *grid == self.grid {
            Ok(())
        } else {
            Err(ScnsError::GridMismatch)
        }
    }

    fn basis(&mut self, op: AxisOperator) -> &SeparableBasis {
        let grid = self.grid;
        self.bases.entry(op).or_insert_with(|| SeparableBasis::new(&grid, op))
    }

    /// Cached `L_ε` for this grid (identity, with a warning, when `eps` is
    /// below the spacing).
    pub fn mollifier(&mut self, eps: f64) -> &Mollifier {
        let grid = self.grid;
        self.mollifiers
            .entry(eps.to_bits())
            .or_insert_with(|| Mollifier::new_or_identity(&grid, eps))
    }

    /// Advances `∂_t f = coeff Δf` by `dt` with the chosen implicit scheme.
    pub fn diffuse(&mut self, f: &ScalarField, coeff: f64, dt: f64, bc: Bc, scheme: DiffusionScheme) -> Result<ScalarField> {
        self.check_grid(f.grid())?;
        self.grid.check_bc(bc)?;
        let mut data = f.values().to_vec();
        let a = coeff * dt;
        let basis = self.basis(AxisOperator::Laplacian(bc));
        match scheme {
            DiffusionScheme::BackwardEuler => basis.apply_symbol(&mut data, |lam| 1.0 / (1.0 - a * lam)),
            DiffusionScheme::CrankNicolson => {
                basis.apply_symbol(&mut data, |lam| (1.0 + 0.5 * a * lam) / (1.0 - 0.5 * a * lam))
            }
        }
        ScalarField::from_values(&self.grid, data)
    }

    /// Diffuses every velocity component with the velocity boundary rule.
    pub fn diffuse_vector(&mut self, v: &VectorField, coeff: f64, dt: f64, scheme: DiffusionScheme) -> Result<VectorField> {
        let bc = self.grid.bc().u;
        let comps = v
            .components()
            .iter()
            .map(|c| self.diffuse(c, coeff, dt, bc, scheme))
            .collect::<Result<Vec<_>>>()?;
        VectorField::from_components(comps)
    }

    /// Discrete Leray projection onto the kernel of the centered divergence.
    ///
    /// Solves `div ∇p = div v` with the pressure gradient taken under the
    /// mirror ghost rule (which is minus the adjoint of the velocity
    /// divergence), so the output is the orthogonal projection of `v`.
    /// The pressure has zero mean.
    pub fn leray_project(&mut self, v: &VectorField) -> Result<Projection> {
        self.check_grid(v.grid())?;
        if !v.is_finite() {
            return Err(ScnsError::NonFinite("leray_project input".into()));
        }
        let ubc = self.grid.bc().u;
        let pbc = if self.grid.is_periodic() {
            Bc::Periodic
        } else {
            Bc::NeumannZero
        };
        let rhs = divergence(v, ubc)?;
        let pressure = match self.pressure_solver {
            PressureSolver::ConjugateGradient { rel_tol, max_iter } if !self.grid.is_periodic() => {
                let cap = max_iter.unwrap_or(10 * self.grid.len());
                self.pressure_cg(&rhs, pbc, ubc, rel_tol, cap)?
            }
            _ => {
                let tol = self.null_tolerance;
                let basis = self.basis(AxisOperator::Pressure(ubc));
                let max_lam = basis.eigen_sums().iter().fold(0.0f64, |m, &l| m.max(l));
                let mut data = rhs.values().to_vec();
                // div ∇ = -D Dᵀ, whose eigenvalues are -Σλ
                basis.apply_symbol(&mut data, |lam| if lam > tol * max_lam { -1.0 / lam } else { 0.0 });
                ScalarField::from_values(&self.grid, data)?
            }
        };
        let grad_p = gradient(&pressure, pbc)?;
        let mut out = v.clone();
        out.axpy(-1.0, &grad_p);
        Ok(Projection {
            velocity: out,
            pressure,
        })
    }

    fn pressure_cg(&self, rhs: &ScalarField, pbc: Bc, ubc: Bc, rel_tol: f64, max_iter: usize) -> Result<ScalarField> {
        // A = D Dᵀ (positive semidefinite); solve A p = -rhs
        let apply = |p: &ScalarField| -> Result<ScalarField> {
            let mut out = divergence(&gradient(p, pbc)?, ubc)?;
            out.scale(-1.0);
            Ok(out)
        };
        let mut b = rhs.clone();
        b.scale(-1.0);
        let mean = b.values().iter().sum::<f64>() / b.values().len() as f64;
        b.values_mut().iter_mut().for_each(|v| *v -= mean);
        let b_norm = dot(&b, &b).sqrt();
        let mut p = ScalarField::zeros(&self.grid);
        if b_norm == 0.0 {
            return Ok(p);
        }
        let mut r = b.clone();
        let mut d = r.clone();
        let mut rr = dot(&r, &r);
        for iter in 0..max_iter {
            if rr.sqrt() <= rel_tol * b_norm {
                let mean = p.values().iter().sum::<f64>() / p.values().len() as f64;
                p.values_mut().iter_mut().for_each(|v| *v -= mean);
                log::debug!("pressure CG converged in {iter} iterations");
                return Ok(p);
            }
            let ad = apply(&d)?;
            let alpha = rr / dot(&d, &ad);
            p.axpy(alpha, &d);
            r.axpy(-alpha, &ad);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            let mut next = r.clone();
            next.axpy(beta, &d);
            d = next;
        }
        Err(ScnsError::SolverDivergence {
            iterations: max_iter,
            residual: rr.sqrt() / b_norm,
        })
    }
}

fn dot(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, BoundarySpec};
    use std::f64::consts::PI;

    fn random_vector(grid: &Grid, seed: u64) -> VectorField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = VectorField::zeros(grid);
        for a in 0..grid.dim() {
            v.component_mut(a).values_mut().iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        }
        v
    }

    #[test]
    fn projection_kills_divergence() {
        for bc in [BoundarySpec::periodic(), BoundarySpec::walled()] {
            let g = Grid::build(2, &[1.0, 1.0], &[32, 32], bc).unwrap();
            let mut ws = OperatorWorkspace::new(&g);
            let v = random_vector(&g, 3);
            let p = ws.leray_project(&v).unwrap();
            let div = divergence(&p.velocity, bc.u).unwrap();
            let rel = (div.inner(&div)).sqrt() / v.norm_l2();
            assert!(rel < 1e-10, "{bc:?}: {rel}");
            assert!(integrate(&p.pressure).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_matches_spectral() {
        let g = Grid::build(2, &[1.0, 1.5], &[12, 10], BoundarySpec::walled()).unwrap();
        let v = random_vector(&g, 11);
        let spectral = OperatorWorkspace::new(&g).leray_project(&v).unwrap();
        let cg = OperatorWorkspace::new(&g)
            .with_pressure_solver(PressureSolver::ConjugateGradient {
                rel_tol: 1e-13,
                max_iter: None,
            })
            .leray_project(&v)
            .unwrap();
        let mut diff = spectral.velocity.clone();
        diff.axpy(-1.0, &cg.velocity);
        assert!(diff.norm_l2() < 1e-9 * v.norm_l2());
    }

    #[test]
    fn cg_reports_iteration_cap() {
        let g = Grid::build(2, &[1.0, 1.0], &[16, 16], BoundarySpec::walled()).unwrap();
        let v = random_vector(&g, 5);
        let mut ws = OperatorWorkspace::new(&g).with_pressure_solver(PressureSolver::ConjugateGradient {
            rel_tol: 1e-14,
            max_iter: Some(2),
        });
        assert!(matches!(ws.leray_project(&v), Err(ScnsError::SolverDivergence { .. })));
    }

    #[test]
    fn heat_mode_decay() {
        let g = Grid::build(2, &[1.0, 1.0], &[16, 8], BoundarySpec::walled()).unwrap();
        let mut ws = OperatorWorkspace::new(&g);
        let f = ScalarField::from_fn(&g, |x| (PI * x[0]).cos());
        let dt = 1e-3;
        let out = ws.diffuse(&f, 1.0, dt, Bc::NeumannZero, DiffusionScheme::BackwardEuler).unwrap();
        let h = 1.0 / 16.0;
        let lam = -2.0 / (h * h) * (1.0 - (PI * h).cos());
        let factor = 1.0 / (1.0 - dt * lam);
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - factor * v).abs() < 1e-13);
        }
    }

    #[test]
    fn workspace_is_bound_to_one_grid() {
        let g = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::periodic()).unwrap();
        let other = Grid::build(2, &[1.0, 1.0], &[8, 16], BoundarySpec::periodic()).unwrap();
        let mut ws = OperatorWorkspace::new(&g);
        assert_eq!(ws.leray_project(&VectorField::zeros(&other)).unwrap_err(), ScnsError::GridMismatch);
    }
}
