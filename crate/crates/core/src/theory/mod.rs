//! Numerical counterparts of the convergence, envelope and critical-point
//! results for multi-layer masked attention.

pub mod convergence;
pub mod critical;
pub mod envelope;
pub mod paths;
pub mod rope;
pub mod sinks;
pub mod suites;

pub use convergence::{epsilon_floor, verify_center_convergence, window_rate_comparison, ConvergenceReport};
pub use critical::{critical_point_decay, critical_point_grid, critical_point_rope, CriticalPointReport, Regime};
pub use envelope::{decay_envelope_check, EnvelopeEntry, EnvelopeReport};
pub use paths::{aggregate_profile_check, monotone_path_count, AggregateReport};
pub use rope::{rope_envelope_check, rope_segment_bounds, RopeLayerData, RopeLemmaReport, SegmentReport};
pub use sinks::{attention_sink_metric, mean_sink_report, SinkReport, DEFAULT_SINK_TAU};
pub use suites::{run_suite, run_suites, SuiteVerdict, VerifySettings, SUITE_NAMES};
