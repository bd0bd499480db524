//! Bayesian predictive synthesis of density forecasts with regression-tree
//! combination weights, its constant and random-walk baselines, the agent
//! models that feed it, and the scoring toolkit used to evaluate it.

pub mod agents;
pub mod dist;
pub mod error;
pub mod modifiers;
pub mod eval;
pub mod io;
pub mod rng;
pub mod shrinkage;
pub mod statespace;
pub mod synthesis;
pub mod tree;
pub mod types;

pub use error::{BpsError, Result};
pub use rng::{RngHandle, Step};
pub use types::{
    AgentForecast, AgentForecastArchive, ArchiveRow, DrawMatrix, GaussianSummary, HistogramForecast, Matrix,
    McmcConfig, Moments, TimeSeriesF,
};
