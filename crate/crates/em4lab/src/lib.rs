//! Pointwise and global verification of Einstein-Maxwell structures on
//! explicit Riemannian manifolds.
//!
//! The crate evaluates curvature from coordinate-chart metric expressions,
//! checks the Einstein-Maxwell equations and the associated algebraic
//! identities on sample grids, constructs the canonical Maxwell field of a
//! constant-scalar-curvature Kahler surface, computes the Euler
//! characteristic and signature by quadrature, and locates critical points
//! of the total-action functional over parametric metric families.
//!
//! Modules mirror the pipeline: [`expr`] parses scalar expressions, [`chart`]
//! differentiates them into curvature, [`tensor`] does the pointwise
//! multilinear algebra, [`atlas`] ships reference manifolds, and
//! [`emcheck`]/[`lebrun`]/[`topo`]/[`varopt`] run the actual verifications.
//! See `docs/conventions.md` for the norm and sign conventions everything
//! below is calibrated against.

pub mod atlas;
pub mod chart;
pub mod emcheck;
pub mod error;
pub mod expr;
pub mod lebrun;
pub mod par;
pub mod report;
pub mod specfile;
pub mod tensor;
#[cfg(test)]
pub(crate) mod testutil;
pub mod topo;
pub mod util;
pub mod varopt;

pub use error::{Error, Result};
