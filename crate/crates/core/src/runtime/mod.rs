//! File formats, simulation and Monte Carlo evaluation.

pub mod families;
pub mod format;
pub mod simulate;

pub use families::{kernel_from_value, load_family_spec, parse_family_spec, DiagnosticSuite, FamilySpec};
pub use format::{load_model, load_model_str, mdpii_to_json, parse_model, platzman_to_json, Model, ModelFile};
pub use simulate::{
    lift_policy, monte_carlo_value, simulate, simulate_stream, BeliefPolicy, HistoryPolicy, MonteCarloEstimate, Step,
    Trajectory,
};
