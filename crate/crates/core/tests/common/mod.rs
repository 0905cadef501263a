//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use gpd::denoiser::{init_params, Activation};
use gpd::rng::substream;
use gpd::{DenoiserConfig, DenoiserParams, SplitPart, SplitSpec};
use ndarray::Array2;
use rand::Rng as _;

/// Error-free product of two doubles as a (hi, lo) pair.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double number, about 106 bits of mantissa.
#[derive(Clone, Copy, Debug)]
pub struct DD(pub f64, pub f64);

impl DD {
    pub fn from_f64(v: f64) -> Self {
        DD(v, 0.0)
    }

    pub fn mul(self, o: DD) -> DD {
        let (p, e) = two_prod(self.0, o.0);
        let e = e + (self.0 * o.1 + self.1 * o.0);
        let (hi, lo) = two_sum(p, e);
        DD(hi, lo)
    }

    pub fn add(self, o: DD) -> DD {
        let (s, e) = two_sum(self.0, o.0);
        let e = e + (self.1 + o.1);
        let (hi, lo) = two_sum(s, e);
        DD(hi, lo)
    }

    pub fn neg(self) -> DD {
        DD(-self.0, -self.1)
    }

    pub fn div_f64(self, d: f64) -> DD {
        let q = self.0 / d;
        // Exact remainder of the leading quotient.
        let r = (-q).mul_add(d, self.0) + self.1;
        let (hi, lo) = two_sum(q, r / d);
        DD(hi, lo)
    }

    pub fn to_f64(self) -> f64 {
        self.0 + self.1
    }
}

/// Cumulative products of `1 - beta_t` for a linear ramp, every step in
/// double-double arithmetic.
pub fn alpha_bar_oracle(steps: usize, start: f64, end: f64) -> Vec<f64> {
    let span = DD::from_f64(end).add(DD::from_f64(start).neg());
    let one = DD::from_f64(1.0);
    let mut acc = one;
    (0..steps)
        .map(|i| {
            let frac = if steps == 1 {
                DD::from_f64(0.0)
            } else {
                DD::from_f64(i as f64).div_f64((steps - 1) as f64)
            };
            let beta = DD::from_f64(start).add(span.mul(frac));
            acc = acc.mul(one.add(beta.neg()));
            acc.to_f64()
        })
        .collect()
}

/// Number of `window`-length windows at the given stride in `part`, counted
/// by scanning every start position.
pub fn brute_force_window_count(n: usize, channels: usize, window: usize, stride: usize, split: &SplitSpec, part: SplitPart) -> usize {
    let train_end = (n as f64 * split.train).floor() as usize;
    let val_end = (train_end + (n as f64 * split.val).floor() as usize).min(n);
    let (lo, hi) = match part {
        SplitPart::Train => (0, train_end),
        SplitPart::Val => (train_end, val_end),
        SplitPart::Test => (val_end, n),
        SplitPart::All => (0, n),
    };
    let mut count = 0;
    for start in lo..hi {
        if (start - lo) % stride == 0 && start + window <= hi {
            count += 1;
        }
    }
    count * channels
}

pub struct GradCheck {
    pub config: DenoiserConfig,
    pub max_rel_error: f64,
    pub params_checked: usize,
}

/// Denominator floor for relative gradient errors: entries whose analytic
/// and numeric values are both below it are compared in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-6;

/// Compares analytic gradients against central finite differences on a
/// randomly drawn tiny network, batch, steps and targets.
pub fn gradient_check(case: u64) -> GradCheck {
    let mut rng = substream(case, "gradcheck", 0);
    let config = DenoiserConfig {
        input_len: rng.random_range(1..=8),
        num_blocks: rng.random_range(1..=3),
        hidden_dim: rng.random_range(1..=16),
        time_embed_dim: 2 * rng.random_range(1..=4),
        activation: Activation::Silu,
    };
    let mut params = init_params(&config, &mut rng).unwrap();
    // Non-zero biases so every term of the backward pass is exercised.
    for layer in params.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let batch = rng.random_range(1..=3);
    let len = config.input_len;
    let xs = Array2::from_shape_fn((batch, len), |_| rng.random_range(-2.0..2.0));
    let targets = Array2::from_shape_fn((batch, len), |_| rng.random_range(-2.0..2.0));
    let steps: Vec<usize> = (0..batch).map(|_| rng.random_range(1..=50)).collect();

    let loss_at = |p: &DenoiserParams| p.batch_loss_and_grads(xs.view(), &steps, targets.view()).unwrap().0;
    let (_, grads) = params.batch_loss_and_grads(xs.view(), &steps, targets.view()).unwrap();
    let analytic: Vec<f64> = grads.values().collect();

    let mut max_rel: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = params.values().nth(i).unwrap();
        *params.values_mut().nth(i).unwrap() = orig + FD_STEP;
        let up = loss_at(&params);
        *params.values_mut().nth(i).unwrap() = orig - FD_STEP;
        let down = loss_at(&params);
        *params.values_mut().nth(i).unwrap() = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        max_rel = max_rel.max(rel);
    }
    GradCheck {
        config,
        max_rel_error: max_rel,
        params_checked: analytic.len(),
    }
}

pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn tiny_net(len: usize) -> DenoiserConfig {
    DenoiserConfig {
        input_len: len,
        num_blocks: 2,
        hidden_dim: 64,
        time_embed_dim: 32,
        activation: Activation::Silu,
    }
}

pub fn tiny_schedule() -> gpd::ScheduleSpec {
    gpd::ScheduleSpec {
        steps: 20,
        beta_start: 1e-3,
        beta_end: 0.2,
        ..Default::default()
    }
}

/// A small model trained on every stride-1 window of `series` (all rows).
pub fn train_tiny(
    series: &gpd::MultivariateSeries,
    len: usize,
    mode: gpd::PredictionMode,
    iterations: usize,
    seed: u64,
) -> gpd::Checkpoint {
    let windows = gpd::data::make_windows(series, len, 1, &SplitSpec::default(), SplitPart::All).unwrap();
    let config = gpd::TrainConfig {
        mode,
        batch_size: 32,
        iterations,
        learning_rate: 2e-3,
        ema_decay: 0.99,
        seed,
        ..Default::default()
    };
    gpd::trainer::train(&tiny_net(len), tiny_schedule(), config, &windows, None, None)
        .unwrap()
        .0
}

pub fn sine_series(n: usize, channels: usize, seed: u64) -> gpd::MultivariateSeries {
    gpd::data::synth(gpd::data::SynthKind::Sine, n, channels, &gpd::data::SynthParams::default(), seed).unwrap()
}
