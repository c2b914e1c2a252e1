//! Optimal transport on the line for costs `c(x, y) = min_i (a_i x + b_i y + c_i)`.
//!
//! The solvers here work on atomless marginals ([`Measure1D`]) and reduce the
//! transport problem to a search over pairs of interval partitions with
//! matching masses. Modules:
//!
//! - [`measure`]: piecewise-linear CDFs with exact mass, quantile and moment queries.
//! - [`cost`]: the affine family, its lower envelope and non-degeneracy checks.
//! - [`two_piece`]: closed-form solver for two pieces.
//! - [`partition`]: the partition functional, its optimizer and plan verification.
//! - [`multimarginal`]: the `min(x_1, …, x_m)` cost with `m` marginals.
//! - [`oracle`]: exact discrete transportation solvers used as ground truth.

pub mod cost;
pub mod error;
pub mod measure;
pub mod multimarginal;
pub mod oracle;
pub mod partition;
pub mod plan;
pub mod two_piece;

pub use cost::{AffinePiece, MinAffineCost, MultiAffinePiece, Rect, SupportRegion};
pub use error::{Error, Result};
pub use measure::{build_measure, Atom, Measure1D, MeasureSpec};
pub use plan::TransportPlan;

/// Product of the marginal supports grown by 1% on every side.
pub fn working_box(mu: &Measure1D, nu: &Measure1D) -> Rect {
    Rect::new(mu.support(), nu.support()).expanded(0.01)
}
