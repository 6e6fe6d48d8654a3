//! Analysis and simulation of infinite-server queues with batch arrivals,
//! periodic arrival rates and general service.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod model;
mod quad;
pub mod routing;
pub mod simulator;
pub mod special_fn;
pub mod stats;
pub mod steady_state;

pub use analytic::MomentPair;
pub use error::{Error, Result};
pub use model::{BatchDist, QueueSpec, RatePattern, ServiceDist};
pub use routing::{RoutingProblem, RoutingSolution};
pub use simulator::{RepSummary, SimConfig, SubqueueMode};
pub use steady_state::PoissonSumRep;
