//! Dynamic OFDM power allocation for integrated sensing and communication.
//!
//! The crate computes the expected delay profile of a per-carrier power
//! allocation, measures communication capacity alongside side-lobe and
//! accuracy metrics, solves the canonical allocation problems, and decides
//! per channel realization whether a sensing-aware blend is worth its
//! capacity cost or whether to fall back to communication-only
//! water-filling.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: OFDM configuration, power allocations, range profiles.
//! - [`metrics`]: capacity, PSL, accuracy proxy, 3-dB main-lobe width, losses.
//! - [`allocators`]: water-filling, edges-only, Hann, minimum-PSL and
//!   PSL-constrained capacity solvers.
//! - [`dynamic`]: the ISAC-vs-communication decision and blend searches.
//! - [`harness`]: scenario configuration, seeded channels, sweeps, CSV/JSON output.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocators;
pub mod dynamic;
mod error;
pub mod harness;
pub mod metrics;
pub mod model;

pub use allocators::{
    edges_allocation, hann_allocation, psl_constrained_capacity, psl_min_allocation, water_filling,
    SolverSettings, Solution,
};
pub use dynamic::{
    binary_search_crb, binary_search_psl, blend, dynamic_allocate, AccuracyCriterion, Branch, DecisionOutcome,
    DynamicAllocator, Mode, SearchResult, Thresholds,
};
pub use error::{Error, Result};
pub use metrics::{
    accuracy_loss_pct, accuracy_proxy, capacity, capacity_loss, mlw_3db, psl_db, ChannelRealization,
    Reference, SensingReport,
};
pub use model::{
    expected_range_profile, expected_response, mainlobe_partition, DelayTransform, OfdmConfig,
    PowerAllocation, RangeProfile,
};

/// Speed of light in m/s, for delay-to-distance conversion.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
