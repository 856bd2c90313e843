//! Learned virtual environment: an LSTM next-state predictor and an MLP
//! reward predictor trained on logged real transitions.

mod config;
mod dataset;
mod model;
mod session;

pub use config::TwinConfig;
pub use dataset::{TwinDataset, TwinStep};
pub use model::{FitReport, TwinModel};
pub use session::TwinSession;
