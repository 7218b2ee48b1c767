//! End-to-end study orchestration and the synthetic cohort generator.

mod config;
mod manifest;
mod report;
mod study;
mod synth;

pub use config::{RunConfig, WeightsSource};
pub use manifest::{CohortManifest, ManifestRow, MANIFEST_HEADER};
pub use report::{auc_summary_csv, emit_reports, heatmap_csv, importance_csv, km_csv, km_svg, screening_csv, RunResults};
pub use study::{
    extract_cohort_features, load_network, patient_features, preprocess, run_classification, run_univariate,
    Classification, Extraction, KmComparison, PatientError, Univariate,
};
pub use synth::{gaussian_random_field, generate_synthetic_cohort, SynthCohort, SynthPatient, SynthSpec};
