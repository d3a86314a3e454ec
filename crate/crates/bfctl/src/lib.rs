//! Exact analysis of the blocked fixed-cycle traffic-light (bFCTL) queue
//! with multiple lanes.
//!
//! The model is a discrete-time traffic-light queue whose first green part
//! may block departing batches (turning vehicles held by crossing
//! pedestrians) and whose server takes batches of up to `m` vehicles per
//! slot. Four solution paths cross-validate each other:
//!
//! - [`capacity`]: stability and capacity by a backward Markov-reward
//!   recursion over the cycle's state graph;
//! - [`pgf`]: the steady-state queue-length distribution at every slot end
//!   from the PGF recursion (unit-disk roots plus a boundary linear
//!   system);
//! - [`oracle`]: an independent truncated-chain stationary solve;
//! - [`sim`]: a Monte Carlo replication of the reference discrete-event
//!   semantics with multi-run confidence intervals.

pub mod capacity;
pub mod error;
pub mod jet;
pub mod model;
pub mod oracle;
pub mod pgf;
pub mod series;
pub mod sim;
pub mod transform;

pub use capacity::{check_stability, reward_recursion, CapacityReport, ServiceCounts};
pub use error::{CapacityError, ModelError, OracleError, SolveError, Violation};
pub use model::{parse_config, validate_config, ModelConfig, ValidatedModel};
pub use pgf::{solve, Metrics, SolvedModel};
pub use transform::{arrival_pmf, ArrivalSpec, Pmf, Transform};
