//! Uplink power-control simulator for cellular networks augmented with
//! receive-only "green" antennas.
//!
//! A snapshot drops mobiles onto a [`scenario::Scenario`], builds the
//! uplink/downlink [`propagation::LinkGainMatrix`], associates every mobile
//! with its strongest downlink sector and solves the closed-loop power-control
//! fixed point over that sector's receive branches. [`campaign`] repeats this
//! over many seeds, optionally pairing a baseline with a green-augmented
//! variant, and [`metrics`] turns the resulting transmit powers into CDFs and
//! comparison reports.

// `!(x > y)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod metrics;
pub mod powerctl;
pub mod propagation;
pub mod scenario;
pub mod seed;

pub use campaign::{run_campaign, run_paired, CampaignConfig, CampaignError};
pub use metrics::{compare_runs, tx_power_cdf, ComparisonReport, PopulationFilter};
pub use powerctl::{associate, receive_branches, solve_power_control, PowerControlResult};
pub use propagation::{build_gain_matrix, LinkGainMatrix};
pub use scenario::{drop_mobiles, load_scenario, validate_scenario, Combining, Scenario};
