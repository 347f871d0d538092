//! Event studies with two-way fixed effects, PPML, outcome transforms and
//! the inference/reporting arithmetic around them.

mod cluster;
mod linalg;
mod ols;
mod ppml;
mod reporting;
mod trade;
mod transform;
mod twfe;

pub use cluster::{cluster_robust_cov, cluster_robust_se, cluster_sandwich, count_clusters, cr1_factor};
pub use linalg::spd_inverse;
pub use ols::{ols_clustered, LinearFit};
pub use ppml::{ppml, PpmlFit, PpmlOptions};
pub use reporting::{
    ape_share, bonferroni_adjust, bonferroni_z, normal_p_value, percent_from_logpoints,
    OCCUPATION_SUITE_TESTS,
};
pub use trade::{ols_trade, ppml_trade, trade_design};
pub use transform::{transform_outcome, transform_value, Transform, Transformed};
pub use twfe::{
    three_region_event_study, twfe_event_study, EventCoefficient, EventPanel, EventStudyFit,
    EventStudySpec, PanelRow, CENSUS_YEARS, DEFAULT_REFERENCE_YEAR,
};
