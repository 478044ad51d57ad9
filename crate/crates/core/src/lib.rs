//! Simulation and analysis of long-range excited ("cookie") random walks on
//! the integers.
//!
//! A walk started at 0 jumps by a law on `{-1, 0, ..., L}` the first times it
//! visits a site and by a fair nearest-neighbour coin afterwards. The crate
//! provides:
//!
//! - [`walk`]: exact simulation from a counter-based uniform stream;
//! - [`criteria`]: drift, recurrence classification and the ballisticity
//!   condition on the tail function;
//! - [`renewal`]: cut-time detection and speed estimators;
//! - [`arrows`]: arrow systems, the walks they generate, and dominance;
//! - [`coupling`]: mega-vertex trigger sequences, the derived arrow systems
//!   and their verification;
//! - [`oracles`]: exit-time, martingale averaging and monotone coupling
//!   checks used as independent test oracles.

pub mod arrows;
pub mod coupling;
pub mod criteria;
pub mod error;
pub mod oracles;
pub mod renewal;
pub mod replicas;
pub mod stats;
pub mod uniform;
pub mod walk;

pub use error::{Error, Result};
pub use uniform::UniformSource;
pub use walk::{simulate, simulate_replica, CookieEnvironment, JumpDistribution, Trajectory};
