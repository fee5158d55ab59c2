//! Transient flow of multi-species gas mixtures on pipeline networks.
//!
//! An explicit staggered-grid scheme: partial densities of every species at
//! cell centres, total mass flux at cell edges, friction treated
//! semi-implicitly through a closed-form quadratic. Pipes are coupled at
//! nodes by an explicit nodal pressure, flow-weighted mixing and optional
//! compressors at pipe inlets. Nodal monitoring policies cap injections by
//! species mass fraction and withdrawals by minimum pressure.

// Checks like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod convergence;
pub mod engine;
pub mod eos;
pub mod error;
pub mod grid;
pub mod junction;
pub mod monitoring;
pub mod network;
pub mod pipe;
pub mod scenario;
pub mod schedule;
pub mod steady;
pub mod units;

pub use engine::{History, SimConfig, Simulation};
pub use eos::{Eos, EosMode, GasSpecies};
pub use error::{Error, Result};
pub use network::Network;
pub use scenario::Scenario;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
