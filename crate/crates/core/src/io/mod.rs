//! Files, configuration, checkpoints, the dashboard bundle and the
//! end-to-end pipeline.

pub mod checkpoint;
pub mod config;
pub mod dashboard;
pub mod files;
pub mod pipeline;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{DashboardConfig, Paths, RunConfig};
pub use dashboard::{build_dashboard, export_dashboard, read_dashboard, validate_dashboard, write_dashboard, DashboardBundle, RankingsFile, ReportsFile};
pub use files::{read_dataset, read_json, read_jsonl, write_dataset, write_json, write_jsonl, write_universe, SCHEMA_VERSION};
pub use pipeline::{run_pipeline, PipelineOutput, Stage, StageError};
