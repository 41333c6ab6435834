//! Synthetic scenes and the controlled inter-class competition harness.

mod competition;
mod scene;
mod sweep;

pub use competition::{competitor_count, select_competitors, CompetitionSpec, Selection};
pub use scene::{generate_scene, SceneParams, SyntheticScene};
pub use sweep::{
    baseline_miou, evaluate_setting, run_sweep, run_sweep_with_sources, sweep_csv, ExcludedPolicy,
    SweepAxes, SweepOptions, SweepRow, SweepSetting, PRIMARY_SOURCE, SWEEP_CSV_HEADER,
};
