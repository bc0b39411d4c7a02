//! Batch pipeline for quantum-dot decay campaigns: file formats,
//! configuration, orchestration, outputs and synthetic data generation.

pub mod config;
pub mod format;
pub mod output;
pub mod pipeline;
pub mod simulate;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, PipelineOutput};
