//! Conservative face-flux transport.
//!
//! Face fluxes are stored in a [`VectorField`] whose component `a` at cell `i`
//! is the flux through the upper face of `i` along axis `a`. On walled grids
//! the upper face of the last cell is the wall and always carries zero flux.

use crate::error::Result;
use crate::grid::{Grid, ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvectionScheme {
    /// First-order donor cell; monotone under the CFL restriction.
    Upwind,
    /// Second-order face averages; not positivity preserving.
    Centered,
}

impl AdvectionScheme {
    pub fn name(self) -> &'static str {
        match self {
            AdvectionScheme::Upwind => "upwind",
            AdvectionScheme::Centered => "centered",
        }
    }
}

/// Calls `visit(lower, upper, axis)` for every interior face (and every
/// wrapped face on periodic grids).
pub(crate) fn for_each_face(grid: &Grid, mut visit: impl FnMut(usize, usize, usize)) {
    let periodic = grid.is_periodic();
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        for axis in 0..grid.dim() {
            let n = grid.resolution()[axis];
            let s = grid.stride(axis);
            if c[axis] + 1 < n {
                visit(idx, idx + s, axis);
            } else if periodic {
                visit(idx, idx + s - n * s, axis);
            }
        }
    }
}

/// Normal velocity on the upper face of each cell (average of the two
/// adjacent cell values, zero on walls).
pub fn face_velocities(u: &VectorField) -> VectorField {
    let grid = *u.grid();
    let mut out = VectorField::zeros(&grid);
    for_each_face(&grid, |lo, hi, axis| {
        let comp = u.component(axis).values();
        let v = 0.5 * (comp[lo] + comp[hi]);
        out.component_mut(axis).values_mut()[lo] = v;
    });
    out
}

/// Divergence of a face-flux field.
pub fn flux_divergence(flux: &VectorField) -> ScalarField {
    let grid = *flux.grid();
    let mut out = vec![0.0; grid.len()];
    for_each_face(&grid, |lo, hi, axis| {
        let f = flux.component(axis).values()[lo] / grid.spacing()[axis];
        out[lo] += f;
        out[hi] -= f;
    });
    ScalarField::from_values(&grid, out).expect("grid-sized buffer")
}

/// Face fluxes `u_f · f_upwind` (or the face average of `f` when centered).
pub fn advective_flux(u: &VectorField, f: &ScalarField, scheme: AdvectionScheme) -> Result<VectorField> {
    f.same_grid(u.component(0))?;
    let grid = *f.grid();
    let fv = f.values();
    let mut out = VectorField::zeros(&grid);
    for_each_face(&grid, |lo, hi, axis| {
        let comp = u.component(axis).values();
        let uf = 0.5 * (comp[lo] + comp[hi]);
        let face_value = match scheme {
            AdvectionScheme::Upwind => {
                if uf >= 0.0 {
                    fv[lo]
                } else {
                    fv[hi]
                }
            }
            AdvectionScheme::Centered => 0.5 * (fv[lo] + fv[hi]),
        };
        out.component_mut(axis).values_mut()[lo] = uf * face_value;
    });
    Ok(out)
}

/// Discrete `div(u f)` from face fluxes; sums to zero over the box.
pub fn advect_conservative(u: &VectorField, f: &ScalarField, scheme: AdvectionScheme) -> Result<ScalarField> {
    Ok(flux_divergence(&advective_flux(u, f, scheme)?))
}

/// Per-cell sum over faces of `outflow speed / spacing` (or of the inflow
/// speeds when `outflow` is false).
pub fn cell_rates(face_speeds: &VectorField, outflow: bool) -> Vec<f64> {
    let grid = *face_speeds.grid();
    let sign = if outflow { 1.0 } else { -1.0 };
    let mut rate = vec![0.0; grid.len()];
    for_each_face(&grid, |lo, hi, axis| {
        let s = sign * face_speeds.component(axis).values()[lo] / grid.spacing()[axis];
        if s > 0.0 {
            rate[lo] += s;
        } else {
            rate[hi] -= s;
        }
    });
    rate
}

/// Largest per-cell outflow rate; an explicit donor-cell step is monotone
/// when `dt` times this value is at most one.
pub fn outflow_rate(face_speeds: &VectorField) -> f64 {
    cell_rates(face_speeds, true).into_iter().fold(0.0, f64::max)
}
