//! Pipeline driver: configuration, stage orchestration with a digest
//! manifest, the results CSV and the report (tables and SVG plots).

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod results;

pub use config::PipelineConfig;
pub use manifest::RunManifest;
pub use pipeline::{Layout, Pipeline};
