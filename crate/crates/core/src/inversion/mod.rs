//! ROI-restricted Born inversion: stacking, real reformulation, the
//! Laplacian-regularized box QP and the Tikhonov baseline.

mod born;
mod lcurve;
mod qp;
mod roi;
mod stack;

pub use born::{roi_qp_reconstruct, tikhonov_bim, InversionConfig, IterationLog, ReconstructionResult, WeightRule};
pub use lcurve::{lcurve_corner, lcurve_points_gram, lcurve_select, log_grid, LcurveChoice, LcurvePoint};
pub use qp::{solve_qp, QpProblem, QpSolution, KKT_TOL, MAX_ITERATIONS};
pub use roi::RoiIndexSet;
pub use stack::{complex_to_real, real_to_complex, realify, restrict_and_stack, roi_graph_laplacian};
