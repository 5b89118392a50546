//! Fitness model: a feed-forward network estimating global fitness from the
//! swarm's local-state distribution, and desired-state extraction from it.

pub mod extract;
pub mod mlp;
pub mod train;

pub use extract::{extract_desired_states, score_indicator, ExtractOptions, Extraction, InputScaling};
pub use mlp::{default_hidden_layers, gradient_check, MicroMacroModel};
pub use train::{pearson, train, validate_correlation, CorrelationReport, EpochRecord, TrainConfig, TrainOutcome};
