//! Activity-probability panels from interval-dated archaeological findings.

mod bootstrap;
mod cache;
mod dating;
mod panel;

pub use bootstrap::{bootstrap_event_study, clustered_bootstrap, BootstrapResult};
pub use cache::{decode_tensor, encode_tensor, read_tensor, write_tensor, CACHE_MAGIC, CACHE_VERSION};
pub use dating::{
    dating_probability, filter_findings, read_findings, resolve_parishes, write_findings, DatingDistribution,
    DatingModel, FindingKind, FindingRecord, RawFinding, NORMAL_INTERVAL_Z, PERIOD_END, PERIOD_START,
};
pub use panel::{
    arch_event_panel, arch_event_study, default_year_grid, in_window, monte_carlo_panel, window_probability,
    ActivityConfig, ActivityPanel, ArchTreatment, ProbabilityPanel, ReplicateTensor, ARCH_REFERENCE_YEAR,
    DEFAULT_PRIOR_C, DEFAULT_REPLICATES, DEFAULT_WINDOW_HALFWIDTH,
};
