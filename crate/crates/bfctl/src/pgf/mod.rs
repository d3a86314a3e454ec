//! Analytic engine: the PGF cycle recursion propagated as affine forms in
//! the unknown boundary probabilities, denominator roots in the closed
//! unit disk, the boundary linear system, and per-slot distributions and
//! performance measures.

pub mod form;
pub mod invert;
pub mod roots;
pub mod solved;
pub mod system;
pub mod unknowns;

pub use form::{
    cleared_degree, cleared_polynomials, propagate_cycle, ClearedPolys, CycleForms, JetCtx,
    LinearForm, SeriesCtx,
};
pub use roots::{denominator_jet, find_roots, winding_number, RootGroup, RootSet};
pub use solved::{solve, Metrics, SlotEval, SolvedModel};
pub use system::{assemble_system, solve_system, AssembledSystem};
pub use unknowns::UnknownIndex;

use crate::model::ValidatedModel;
use crate::series::poly_derivatives;
use num_complex::Complex64;

/// Cleared denominator `z^M (1 - A(z))` value at `z`.
///
/// The recursion itself divides by powers of z, but the cleared form is a
/// polynomial; near the origin (where the closed-form product would have
/// to cancel huge powers) the value comes from the exact polynomial image.
pub fn denominator(model: &ValidatedModel, z: Complex64) -> Complex64 {
    if z.norm() < 0.3 {
        let polys = cleared_polynomials(model);
        poly_derivatives(&polys.denom, z, 0)[0]
    } else {
        denominator_jet(model, z).value()
    }
}
