//! Generative pre-trained diffusion for time series.
//!
//! An unconditional DDPM is trained on fixed-length univariate windows with a
//! skip-connected MLP denoiser. The same checkpoint then serves zero-shot
//! forecasting from a prompt of any length, imputation under an arbitrary
//! mask, and classification by comparing diffusion errors across experts.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod denoiser;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod tasks;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use data::{MultivariateSeries, SeriesWindow, SplitPart, SplitSpec};
pub use denoiser::{Denoise, DenoiserConfig, DenoiserParams};
pub use error::{GpdError, Result};
pub use sampler::{ForecastRequest, ForecastResult, Injection};
pub use schedule::{NoiseSchedule, PredictionMode, ScheduleSpec, VarianceMode};
pub use tasks::{ExpertModel, Mask};
pub use trainer::TrainConfig;
