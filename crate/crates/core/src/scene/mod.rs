//! Scene files, world assembly, run orchestration and output.

mod build;
pub mod config;
pub mod metrics;
pub mod run;

pub use build::geostatic_stress;
pub use config::{
    BlockConfig, BoundaryConfig, Placement, SceneConfig, SoilConfig, StabilizationConfig,
    StopperConfig,
};
pub use metrics::{collapse_metric, run_metrics, runout_metric, BlockPose, CollapseReport};
pub use run::{run, write_snapshot, RunOptions, RunSummary};

/// Scenes shipped with the library, by name.
pub const BUNDLED: [(&str, &str); 2] = [
    ("paper_srw6", include_str!("../../scenes/paper_srw6.scene")),
    ("paper_srw5", include_str!("../../scenes/paper_srw5.scene")),
];

/// Text of a bundled scene, by name with or without the `.scene` suffix.
pub fn bundled(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".scene").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
