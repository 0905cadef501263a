//! Point-forecast scoring and the test-window evaluation harness.

use std::io;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{format_float, make_windows, MultivariateSeries, SplitPart, SplitSpec};
use crate::denoiser::Denoise;
use crate::error::{check_len, GpdError, Result};
use crate::rng::derive_seed;
use crate::sampler::{prompt_forecast, ForecastRequest, Injection};
use crate::schedule::{NoiseSchedule, PredictionMode};

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len("mse", truth.len(), pred.len())?;
    if pred.is_empty() {
        return Err(GpdError::InvalidArgument("mse of empty vectors".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len("mae", truth.len(), pred.len())?;
    if pred.is_empty() {
        return Err(GpdError::InvalidArgument("mae of empty vectors".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Something that turns a prompt into a point forecast.
pub trait PointForecaster: Sync {
    fn point_forecast(&self, prompt: &[f64], horizon: usize, seed: u64) -> Result<Vec<f64>>;
}

/// Repeats the last observed value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl PointForecaster for Persistence {
    fn point_forecast(&self, prompt: &[f64], horizon: usize, _seed: u64) -> Result<Vec<f64>> {
        let last = *prompt
            .last()
            .ok_or_else(|| GpdError::InvalidArgument("persistence needs a non-empty prompt".into()))?;
        Ok(vec![last; horizon])
    }
}

/// Mean of `samples` guided reverse chains.
#[derive(Clone, Copy)]
pub struct DiffusionForecaster<'a> {
    pub net: &'a dyn Denoise,
    pub schedule: &'a NoiseSchedule,
    pub mode: PredictionMode,
    pub samples: usize,
    pub sin: bool,
    pub injection: Injection,
}

impl PointForecaster for DiffusionForecaster<'_> {
    fn point_forecast(&self, prompt: &[f64], horizon: usize, seed: u64) -> Result<Vec<f64>> {
        let req = ForecastRequest {
            prompt: prompt.to_vec(),
            horizon,
            samples: self.samples,
            sin: self.sin,
            injection: self.injection,
            seed,
        };
        Ok(prompt_forecast(self.net, self.schedule, self.mode, &req)?.summary.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub history: usize,
    pub horizon: usize,
    /// Horizons to report, each a prefix of the full forecast. Empty means
    /// just `horizon`.
    pub horizons: Vec<usize>,
    pub stride: usize,
    pub split: SplitSpec,
    pub part: SplitPart,
    pub seed: u64,
}

impl EvalSettings {
    pub fn new(history: usize, horizon: usize) -> Self {
        Self {
            history,
            horizon,
            horizons: Vec::new(),
            stride: 1,
            split: SplitSpec::default(),
            part: SplitPart::Test,
            seed: 0,
        }
    }

    fn report_horizons(&self) -> Result<Vec<usize>> {
        if self.horizons.is_empty() {
            return Ok(vec![self.horizon]);
        }
        if let Some(&h) = self.horizons.iter().find(|&&h| h == 0 || h > self.horizon) {
            return Err(GpdError::Config(format!(
                "report horizon {h} must be in 1..={}",
                self.horizon
            )));
        }
        Ok(self.horizons.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonScore {
    pub horizon: usize,
    pub mse: f64,
    pub mae: f64,
    pub persistence_mse: f64,
    pub persistence_mae: f64,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scores: Vec<HorizonScore>,
    /// Per-window MSE at the full horizon.
    pub window_mse: Vec<f64>,
    pub windows: usize,
    pub config: String,
    pub wall_ms: u128,
}

impl EvalReport {
    /// Score at the full horizon.
    pub fn full(&self) -> &HorizonScore {
        self.scores
            .iter()
            .max_by_key(|s| s.horizon)
            .expect("at least one horizon")
    }

    /// `horizon,mse,mae,windows`
    pub fn write_csv(&self, w: impl io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["horizon", "mse", "mae", "windows"])?;
        for s in &self.scores {
            w.write_record([
                s.horizon.to_string(),
                format_float(s.mse),
                format_float(s.mae),
                s.windows.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "evaluation over {} windows ({})", self.windows, self.config)?;
        writeln!(f, "{:>8} {:>12} {:>12} {:>12} {:>12}", "horizon", "mse", "mae", "persist_mse", "persist_mae")?;
        for s in &self.scores {
            writeln!(
                f,
                "{:>8} {:>12} {:>12} {:>12} {:>12}",
                s.horizon,
                format_float(s.mse),
                format_float(s.mae),
                format_float(s.persistence_mse),
                format_float(s.persistence_mae)
            )?;
        }
        write!(f, "wall time: {} ms", self.wall_ms)
    }
}

/// Scores `forecaster` on every `(history + horizon)` window of the chosen
/// part, channel by channel. Window `i` (in extraction order) is forecast
/// with the seed derived from `(seed, "eval", i)`.
pub fn evaluate_forecast(forecaster: &dyn PointForecaster, series: &MultivariateSeries, settings: &EvalSettings) -> Result<EvalReport> {
    let start = Instant::now();
    let (h, p) = (settings.history, settings.horizon);
    if h == 0 || p == 0 {
        return Err(GpdError::Config("evaluation needs history >= 1 and horizon >= 1".into()));
    }
    let horizons = settings.report_horizons()?;
    let windows = make_windows(series, h + p, settings.stride, &settings.split, settings.part)?;
    if windows.is_empty() {
        return Err(GpdError::InvalidArgument("no test windows".into()));
    }

    let forecasts: Vec<(Vec<f64>, Vec<f64>)> = windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let seed = derive_seed(settings.seed, "eval", i as u64);
            let prompt = &w.x0[..h];
            let pred = forecaster.point_forecast(prompt, p, seed)?;
            check_len("forecast", p, pred.len())?;
            let base = Persistence.point_forecast(prompt, p, seed)?;
            Ok((pred, base))
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::with_capacity(horizons.len());
    for &hz in &horizons {
        let (mut se, mut ae, mut pse, mut pae) = (0.0, 0.0, 0.0, 0.0);
        for (w, (pred, base)) in windows.iter().zip(&forecasts) {
            let truth = &w.x0[h..h + hz];
            for j in 0..hz {
                se += (pred[j] - truth[j]).powi(2);
                ae += (pred[j] - truth[j]).abs();
                pse += (base[j] - truth[j]).powi(2);
                pae += (base[j] - truth[j]).abs();
            }
        }
        let points = (windows.len() * hz) as f64;
        let score = HorizonScore {
            horizon: hz,
            mse: se / points,
            mae: ae / points,
            persistence_mse: pse / points,
            persistence_mae: pae / points,
            windows: windows.len(),
        };
        debug_assert!(score.mae * score.mae <= score.mse * (1.0 + 1e-12) + 1e-300);
        scores.push(score);
    }
    let window_mse = windows
        .iter()
        .zip(&forecasts)
        .map(|(w, (pred, _))| mse(pred, &w.x0[h..]))
        .collect::<Result<_>>()?;

    Ok(EvalReport {
        scores,
        window_mse,
        windows: windows.len(),
        config: format!(
            "H={h} P={p} stride={} part={:?} seed={}",
            settings.stride, settings.part, settings.seed
        ),
        wall_ms: start.elapsed().as_millis(),
    })
}
