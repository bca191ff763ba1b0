//! Robust pricing from historical conversion data.
//!
//! Given observed conversion rates at a handful of prices, this crate bounds
//! the worst-case fraction of optimal revenue a (randomized) posted price can
//! guarantee over every demand curve consistent with the data, and uses that
//! bound to value and schedule price experiments.

// NaN must fail every range check, so comparisons are negated on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod envelopes;
pub mod error;
pub mod experiments;
pub mod maximin;
pub mod robust_eval;

pub use domain::{gamma, gamma_inv, is_feasible, Bounds, DistributionClass, GammaValue, InformationSet};
pub use envelopes::{
    constant_virtual_value, lower_envelope, optimal_revenue_of_envelope, revenue, segment_ccdf, upper_envelope,
    worst_case_distribution, PiecewiseCcdf, SegmentCcdf, SegmentKind,
};
pub use error::{PricingError, Result};
pub use maximin::{
    build_grid, build_lp, grid_from_points, maximin_lower_bound, maximin_on_grid, solve_lp, GridPartition, LpProblem,
    LpSolution, LpStatus, MaximinBound,
};
pub use robust_eval::{
    certify_r_star, expected_revenue, worst_case_lambda_regret, worst_case_ratio, Ambiguity, Certificate,
    PricingMechanism,
};
