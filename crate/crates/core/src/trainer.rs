//! Pre-training with the simplified objective, Adam and an EMA shadow copy.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng as _;

use crate::checkpoint::Checkpoint;
use crate::data::SeriesWindow;
use crate::denoiser::{init_params, DenoiserConfig, DenoiserParams};
use crate::error::{GpdError, Result};
use crate::rng::{fill_normal, substream, Rng};
use crate::schedule::{NoiseSchedule, PredictionMode, ScheduleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainNormalization {
    #[default]
    None,
    /// z-score every training window by its own mean and std.
    TrainIn,
}

impl std::str::FromStr for TrainNormalization {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TrainNormalization::None),
            "train_in" => Ok(TrainNormalization::TrainIn),
            other => Err(GpdError::Config(format!("unknown normalization '{other}'"))),
        }
    }
}

impl std::fmt::Display for TrainNormalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainNormalization::None => "none",
            TrainNormalization::TrainIn => "train_in",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: PredictionMode,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub ema_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub normalization: TrainNormalization,
    /// Write an intermediate checkpoint every this many iterations (0 = never).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: PredictionMode::Epsilon,
            batch_size: 64,
            iterations: 100_000,
            learning_rate: 1e-4,
            ema_decay: 0.9999,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            normalization: TrainNormalization::None,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(GpdError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return Err(GpdError::Config(format!("ema_decay must be in (0, 1), got {}", self.ema_decay)));
        }
        if self.batch_size == 0 {
            return Err(GpdError::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(GpdError::Config("Adam betas must be in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }
}

/// Adam moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: DenoiserParams,
    pub v: DenoiserParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(like: &DenoiserParams) -> Result<Self> {
        let zeros = DenoiserParams::zeros(like.config())?;
        Ok(Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl From<&TrainConfig> for AdamSettings {
    fn from(cfg: &TrainConfig) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }
}

/// Bias-corrected Adam over flat parameter slices.
pub fn adam_update_slices(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], step: u64, s: &AdamSettings) {
    let bc1 = 1.0 - s.beta1.powf(step as f64);
    let bc2 = 1.0 - s.beta2.powf(step as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = s.beta1 * *m + (1.0 - s.beta1) * g;
        *v = s.beta2 * *v + (1.0 - s.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= s.learning_rate * m_hat / (v_hat.sqrt() + s.eps);
    }
}

pub fn adam_update(params: &mut DenoiserParams, grads: &DenoiserParams, state: &mut OptimizerState, s: &AdamSettings) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(GpdError::InvalidArgument("Adam: parameter shapes differ".into()));
    }
    state.step += 1;
    let step = state.step;
    for (((p, g), m), v) in params
        .arrays_mut()
        .zip(grads.arrays())
        .zip(state.m.arrays_mut())
        .zip(state.v.arrays_mut())
    {
        adam_update_slices(p, g, m, v, step, s);
    }
    Ok(())
}

/// `ema ← decay·ema + (1 − decay)·params`
pub fn ema_update(ema: &mut DenoiserParams, params: &DenoiserParams, decay: f64) -> Result<()> {
    if !ema.same_shape(params) {
        return Err(GpdError::InvalidArgument("EMA: parameter shapes differ".into()));
    }
    for (e, p) in ema.values_mut().zip(params.values()) {
        *e = decay * *e + (1.0 - decay) * p;
    }
    Ok(())
}

/// Noise level and noise draw for one training example.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub t: usize,
    pub eps: Vec<f64>,
}

/// Draws `t ~ U{1..T}` and `ε ~ N(0, I)` for each of `count` windows.
pub fn draw_noise(rng: &mut Rng, count: usize, len: usize, steps: usize) -> Vec<NoiseDraw> {
    (0..count)
        .map(|_| {
            let t = rng.random_range(1..=steps);
            let mut eps = vec![0.0; len];
            fill_normal(rng, &mut eps);
            NoiseDraw { t, eps }
        })
        .collect()
}

fn z_score(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-8);
    x.iter().map(|v| (v - mean) / sd).collect()
}

/// Batch loss and gradient of the simplified objective under fixed draws.
pub fn objective(
    params: &DenoiserParams,
    windows: &[&[f64]],
    draws: &[NoiseDraw],
    s: &NoiseSchedule,
    mode: PredictionMode,
) -> Result<(f64, DenoiserParams)> {
    let len = params.config().input_len;
    let batch = windows.len();
    if draws.len() != batch {
        return Err(GpdError::LengthMismatch {
            context: "noise draws",
            expected: batch,
            actual: draws.len(),
        });
    }
    let mut xs = Array2::<f64>::zeros((batch, len));
    let mut targets = Array2::<f64>::zeros((batch, len));
    let mut steps = Vec::with_capacity(batch);
    for (i, (x0, d)) in windows.iter().zip(draws).enumerate() {
        if x0.len() != len {
            return Err(GpdError::LengthMismatch {
                context: "training window",
                expected: len,
                actual: x0.len(),
            });
        }
        s.check_step(d.t)?;
        let signal = s.alpha_bar(d.t).sqrt();
        let noise = s.one_minus_alpha_bar(d.t).sqrt();
        for j in 0..len {
            xs[[i, j]] = signal * x0[j] + noise * d.eps[j];
            targets[[i, j]] = match mode {
                PredictionMode::Epsilon => d.eps[j],
                PredictionMode::X0 => x0[j],
            };
        }
        steps.push(d.t);
    }
    params.batch_loss_and_grads(xs.view(), &steps, targets.view())
}

/// Live weights, optimizer state and EMA shadow for one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: DenoiserParams,
    pub opt: OptimizerState,
    pub ema: DenoiserParams,
    pub schedule: NoiseSchedule,
    pub config: TrainConfig,
    rng: Rng,
    iteration: usize,
}

impl Trainer {
    pub fn new(net: &DenoiserConfig, schedule: ScheduleSpec, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let schedule = schedule.build()?;
        let params = init_params(net, &mut substream(config.seed, "init", 0))?;
        Ok(Self {
            opt: OptimizerState::new(&params)?,
            ema: params.clone(),
            params,
            schedule,
            rng: substream(config.seed, "train", 0),
            config,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One optimizer step on `batch`; returns the batch loss.
    pub fn train_step(&mut self, batch: &[&[f64]]) -> Result<f64> {
        let len = self.params.config().input_len;
        let normalized: Vec<Vec<f64>>;
        let windows: Vec<&[f64]> = match self.config.normalization {
            TrainNormalization::None => batch.to_vec(),
            TrainNormalization::TrainIn => {
                normalized = batch.iter().map(|w| z_score(w)).collect();
                normalized.iter().map(Vec::as_slice).collect()
            }
        };
        let draws = draw_noise(&mut self.rng, windows.len(), len, self.schedule.steps());
        let (loss, grads) = match objective(&self.params, &windows, &draws, &self.schedule, self.config.mode) {
            Ok(v) => v,
            Err(GpdError::NonFinite(_)) => {
                return Err(GpdError::Divergence {
                    iteration: self.iteration + 1,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        adam_update(&mut self.params, &grads, &mut self.opt, &AdamSettings::from(&self.config))?;
        ema_update(&mut self.ema, &self.params, self.config.ema_decay)?;
        self.iteration += 1;
        if !self.params.all_finite() {
            return Err(GpdError::Divergence {
                iteration: self.iteration,
                loss,
            });
        }
        Ok(loss)
    }

    /// Samples a batch (with replacement) from `windows` and takes one step.
    pub fn step_on(&mut self, windows: &[SeriesWindow]) -> Result<f64> {
        if windows.is_empty() {
            return Err(GpdError::InvalidArgument("no training windows".into()));
        }
        let picks: Vec<usize> = (0..self.config.batch_size)
            .map(|_| self.rng.random_range(0..windows.len()))
            .collect();
        let batch: Vec<&[f64]> = picks.iter().map(|&i| windows[i].x0.as_slice()).collect();
        self.train_step(&batch)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schedule: *self.schedule.spec(),
            mode: self.config.mode,
            params: self.params.clone(),
            ema: self.ema.clone(),
        }
    }
}

/// Loss history of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub losses: Vec<f64>,
}

impl TrainLog {
    /// Mean loss over iterations `[from, to)`.
    pub fn mean(&self, from: usize, to: usize) -> f64 {
        let slice = &self.losses[from..to.min(self.losses.len())];
        slice.iter().sum::<f64>() / slice.len() as f64
    }
}

/// Full training run over `windows` for `config.iterations` steps.
///
/// `log` receives CSV lines `iteration,loss,wall_ms`; `on_checkpoint` is
/// called every `checkpoint_every` iterations.
pub fn train(
    net: &DenoiserConfig,
    schedule: ScheduleSpec,
    config: TrainConfig,
    windows: &[SeriesWindow],
    mut log: Option<&mut dyn Write>,
    mut on_checkpoint: Option<&mut dyn FnMut(usize, &Checkpoint) -> Result<()>>,
) -> Result<(Checkpoint, TrainLog)> {
    let len = net.input_len;
    if let Some(w) = windows.iter().find(|w| w.x0.len() != len) {
        return Err(GpdError::LengthMismatch {
            context: "training window",
            expected: len,
            actual: w.x0.len(),
        });
    }
    let mut trainer = Trainer::new(net, schedule, config)?;
    let mut history = TrainLog::default();
    let start = Instant::now();
    if let Some(w) = log.as_mut() {
        writeln!(w, "iteration,loss,wall_ms")?;
    }
    for _ in 0..trainer.config.iterations {
        let loss = trainer.step_on(windows)?;
        history.losses.push(loss);
        let it = trainer.iteration();
        if let Some(w) = log.as_mut() {
            writeln!(w, "{it},{},{}", crate::data::format_float(loss), start.elapsed().as_millis())?;
        }
        let every = trainer.config.checkpoint_every;
        if every > 0 && it % every == 0 && it < trainer.config.iterations {
            if let Some(cb) = on_checkpoint.as_mut() {
                cb(it, &trainer.checkpoint())?;
            }
        }
    }
    Ok((trainer.checkpoint(), history))
}
