//! Risk-aware value-oriented net demand forecasting for virtual power plants.
//!
//! The crate trains linear forecast models whose objective is the CVaR of the
//! day-ahead plus real-time operation cost they induce. The operation cost of
//! a forecast is an explicit piecewise-linear convex function built from the
//! merit-order structure of the two dispatch problems, so training reduces to
//! a single linear program.
//!
//! Module map:
//!
//! * [`dispatch`]: fleets, merit-order DA/RT dispatch with duals, partitions.
//! * [`surface`]: the max-of-affine cost surface over `(y_hat, y)`.
//! * [`lp`]: dense simplex, vertex-enumeration oracle, and a structured
//!   solver for sums of max-affine terms.
//! * [`train`]: CVaR training (exact LP and subgradient backends).
//! * [`benchmarks`]: Qua-E, Val-N and Sto-OPT comparison methods.
//! * [`evaluation`]: RMSE, average cost, and average high cost metrics.
//! * [`data`]: datasets, CSV I/O, lag features, synthetic data, run config.

// Dense linear algebra reads more naturally with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod benchmarks;
pub mod data;
pub mod dispatch;
pub mod evaluation;
pub mod lp;
pub mod surface;
pub mod train;

mod linalg;

pub use benchmarks::{knn_scenarios, sto_opt_decide, train_qua_e, train_val_n, ScenarioSet};
pub use data::{Dataset, RunConfig, Sample};
pub use dispatch::{DispatchResult, Partition, ResourceFleet, Stage};
pub use evaluation::{evaluate, MetricsReport};
pub use lp::{LpProblem, LpSolution, LpStatus};
pub use surface::{AffineSegment, CostSurface, RtIndex, SegmentId};
pub use train::{cvar_of_costs, Backend, LinearModel, TrainConfig, TrainedModel};

/// Absolute tolerance used for kW and $ comparisons throughout.
pub const TOL: f64 = 1e-9;
