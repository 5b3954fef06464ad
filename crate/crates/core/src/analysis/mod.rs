//! Exact and sampled checks of the protocol's security properties.

pub mod concealing;
pub mod estimate;
pub mod montecarlo;
pub mod prelim;

pub use concealing::{
    concealing_check, concealing_distance, conditional_holdings, conditional_pair_state,
    conditional_post_measurement_distance, prelim_two_check, ConcealingReport,
};
pub use estimate::{wilson_interval, Estimate, CONFIDENCE};
pub use montecarlo::{binding_curve, exact_reference, is_non_increasing, monte_carlo, Experiment, McParams};
pub use prelim::{averaged_commit_state, prelim_one_report, DistinguishabilityReport, WeightClass};
