//! Desk-scale leave-one-domain-out experiment.

pub mod config;
pub mod data;
pub mod model;
pub mod report;
pub mod train;

pub use config::{Augmentation, ExperimentConfig};
pub use data::{synth_dataset, DomainSample};
pub use model::{Model, ModelConfig, ModelGrads, Sgd};
pub use report::{ablation_csv, ablation_rows, ablation_table, metrics_csv, AblationRow};
pub use train::{run_grid, train, train_fold, train_with, FoldResult, Metrics};
