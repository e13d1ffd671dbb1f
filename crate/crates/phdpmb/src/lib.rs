//! Monte Carlo harness for the PHD-PMB trajectory smoother: configuration,
//! seeded campaigns, metric aggregation and result files.
//!
//! The numerical work lives in [`phdpmb_core`]; this crate adds everything
//! that needs `std`.

use std::path::PathBuf;

pub mod campaign;
pub mod config;
pub mod output;

pub use campaign::{run_campaign, CampaignResult, RunRecord, Summary};
pub use config::{CampaignConfig, Distance, Estimator, Variant};
pub use output::emit_outputs;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Core(#[from] phdpmb_core::Error),
    #[error("campaign failed: {failed} of {runs} runs failed")]
    CampaignFailed { failed: usize, runs: usize },
}

impl HarnessError {
    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}
