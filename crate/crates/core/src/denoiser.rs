//! Skip-connected MLP denoiser with hand-written reverse-mode gradients.
//!
//! Block `k` sees `[h_{k−1} | x_t | emb(t)]` and produces
//! `h_k = silu(W_k·z + b_k)`. The first block has no previous hidden state
//! and sees `[x_t | emb(t)]`. A linear head maps the last hidden state back to
//! the window length.
//!
//! Weights are stored `fan_in × fan_out` so a batch is `Z · W + b` with one
//! example per row.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use crate::error::{check_len, GpdError, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Silu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiserConfig {
    pub input_len: usize,
    pub num_blocks: usize,
    pub hidden_dim: usize,
    pub time_embed_dim: usize,
    pub activation: Activation,
}

impl DenoiserConfig {
    pub fn new(input_len: usize, num_blocks: usize, hidden_dim: usize) -> Self {
        Self {
            input_len,
            num_blocks,
            hidden_dim,
            time_embed_dim: 128,
            activation: Activation::Silu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len == 0 || self.num_blocks == 0 || self.hidden_dim == 0 || self.time_embed_dim == 0 {
            return Err(GpdError::Config(format!(
                "denoiser dimensions must be positive: {self:?}"
            )));
        }
        if self.time_embed_dim % 2 != 0 {
            return Err(GpdError::Config(format!(
                "time_embed_dim must be even, got {}",
                self.time_embed_dim
            )));
        }
        Ok(())
    }

    fn block_fan_in(&self, block: usize) -> usize {
        let side = self.input_len + self.time_embed_dim;
        if block == 0 {
            side
        } else {
            self.hidden_dim + side
        }
    }
}

/// Fully connected layer, `fan_in × fan_out` weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Network weights: `num_blocks` hidden layers followed by the head.
///
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    config: DenoiserConfig,
    layers: Vec<Dense>,
}

/// Uniform `±1/√fan_in` weights, zero biases.
pub fn init_params(config: &DenoiserConfig, rng: &mut Rng) -> Result<DenoiserParams> {
    config.validate()?;
    let mut params = DenoiserParams::zeros(config)?;
    for layer in &mut params.layers {
        let bound = 1.0 / (layer.weight.nrows() as f64).sqrt();
        for w in layer.weight.iter_mut() {
            *w = rng.random_range(-bound..bound);
        }
    }
    Ok(params)
}

/// Sinusoidal embedding of step `t`, interleaved `[sin, cos, sin, cos, …]`
/// with geometric frequencies `10000^(−2i/dim)`.
pub fn time_embedding(t: usize, dim: usize, steps: usize) -> Result<Vec<f64>> {
    if dim % 2 != 0 {
        return Err(GpdError::InvalidArgument(format!(
            "time embedding dimension must be even, got {dim}"
        )));
    }
    if t == 0 || t > steps {
        return Err(GpdError::StepOutOfRange { t, steps });
    }
    let mut out = vec![0.0; dim];
    sinusoid_into(t as f64, &mut out);
    Ok(out)
}

fn sinusoid_into(t: f64, out: &mut [f64]) {
    let dim = out.len() as f64;
    for (i, pair) in out.chunks_exact_mut(2).enumerate() {
        let freq = 10000f64.powf(-2.0 * i as f64 / dim);
        let (sin, cos) = (t * freq).sin_cos();
        pair[0] = sin;
        pair[1] = cos;
    }
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

#[inline]
fn silu(a: f64) -> f64 {
    a * sigmoid(a)
}

#[inline]
fn silu_grad(a: f64) -> f64 {
    let s = sigmoid(a);
    s * (1.0 + a * (1.0 - s))
}

/// Activations kept from a forward pass for the backward pass.
struct Tape {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    last_hidden: Array2<f64>,
}

impl DenoiserParams {
    pub fn zeros(config: &DenoiserConfig) -> Result<Self> {
        config.validate()?;
        let mut layers: Vec<Dense> = (0..config.num_blocks)
            .map(|k| Dense::zeros(config.block_fan_in(k), config.hidden_dim))
            .collect();
        layers.push(Dense::zeros(config.hidden_dim, config.input_len));
        Ok(Self {
            config: *config,
            layers,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    /// Hidden blocks followed by the head.
    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameter arrays in checkpoint order: per layer, the row-major weight
    /// then the bias.
    pub fn arrays(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn arrays_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.arrays().flat_map(|a| a.iter().copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.arrays_mut().flat_map(|a| a.iter_mut())
    }

    pub fn same_shape(&self, other: &DenoiserParams) -> bool {
        self.config == other.config
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// Evaluates the network on one window.
    pub fn forward(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        check_len("denoiser input", self.config.input_len, x_t.len())?;
        let xs = ArrayView2::from_shape((1, x_t.len()), x_t).expect("row view");
        Ok(self.forward_batch(xs, &[t])?.into_raw_vec_and_offset().0)
    }

    /// Evaluates the network on a batch, one window per row, each row with
    /// its own step.
    pub fn forward_batch(&self, xs: ArrayView2<f64>, steps: &[usize]) -> Result<Array2<f64>> {
        self.check_batch(xs, steps)?;
        let (out, _) = self.run(xs, steps, false);
        Ok(out)
    }

    fn check_batch(&self, xs: ArrayView2<f64>, steps: &[usize]) -> Result<()> {
        check_len("denoiser input", self.config.input_len, xs.ncols())?;
        check_len("denoiser step count", xs.nrows(), steps.len())?;
        if steps.contains(&0) {
            return Err(GpdError::StepOutOfRange { t: 0, steps: usize::MAX });
        }
        Ok(())
    }

    fn run(&self, xs: ArrayView2<f64>, steps: &[usize], record: bool) -> (Array2<f64>, Option<Tape>) {
        let cfg = &self.config;
        let batch = xs.nrows();
        let (len, emb_dim, hidden) = (cfg.input_len, cfg.time_embed_dim, cfg.hidden_dim);

        let mut emb = Array2::<f64>::zeros((batch, emb_dim));
        for (mut row, &t) in emb.rows_mut().into_iter().zip(steps) {
            sinusoid_into(t as f64, row.as_slice_mut().expect("row-major"));
        }

        let mut tape = record.then(|| Tape {
            inputs: Vec::with_capacity(cfg.num_blocks),
            pre_activations: Vec::with_capacity(cfg.num_blocks),
            last_hidden: Array2::zeros((0, 0)),
        });

        let mut h: Option<Array2<f64>> = None;
        for (k, layer) in self.layers[..cfg.num_blocks].iter().enumerate() {
            let offset = if k == 0 { 0 } else { hidden };
            let mut z = Array2::<f64>::zeros((batch, offset + len + emb_dim));
            if let Some(prev) = &h {
                z.slice_mut(s![.., ..hidden]).assign(prev);
            }
            z.slice_mut(s![.., offset..offset + len]).assign(&xs);
            z.slice_mut(s![.., offset + len..]).assign(&emb);

            let mut a = z.dot(&layer.weight);
            a += &layer.bias;
            let act = a.mapv(silu);
            if let Some(tape) = tape.as_mut() {
                tape.inputs.push(z);
                tape.pre_activations.push(a);
            }
            h = Some(act);
        }

        let h = h.expect("at least one block");
        let head = &self.layers[cfg.num_blocks];
        let mut out = h.dot(&head.weight);
        out += &head.bias;
        if let Some(tape) = tape.as_mut() {
            tape.last_hidden = h;
        }
        (out, tape)
    }

    /// Mean squared error of one window against `target`, with gradients.
    pub fn loss_and_grads(&self, x_t: &[f64], t: usize, target: &[f64]) -> Result<(f64, DenoiserParams)> {
        check_len("denoiser input", self.config.input_len, x_t.len())?;
        check_len("denoiser target", self.config.input_len, target.len())?;
        let xs = ArrayView2::from_shape((1, x_t.len()), x_t).expect("row view");
        let ts = ArrayView2::from_shape((1, target.len()), target).expect("row view");
        self.batch_loss_and_grads(xs, &[t], ts)
    }

    /// Batch loss (mean over rows of the per-row mean squared error) and its
    /// exact gradient.
    pub fn batch_loss_and_grads(
        &self,
        xs: ArrayView2<f64>,
        steps: &[usize],
        targets: ArrayView2<f64>,
    ) -> Result<(f64, DenoiserParams)> {
        self.check_batch(xs, steps)?;
        if targets.dim() != xs.dim() {
            return Err(GpdError::LengthMismatch {
                context: "denoiser targets",
                expected: xs.len(),
                actual: targets.len(),
            });
        }
        let cfg = &self.config;
        let (batch, len, hidden) = (xs.nrows(), cfg.input_len, cfg.hidden_dim);
        let (out, tape) = self.run(xs, steps, true);
        let tape = tape.expect("recorded");

        let resid = &out - &targets;
        let loss = resid.iter().map(|r| r * r).sum::<f64>() / (batch * len) as f64;
        if !loss.is_finite() {
            return Err(GpdError::NonFinite(format!("loss = {loss}")));
        }

        let mut grads = DenoiserParams::zeros(cfg)?;
        let d_out = resid * (2.0 / (batch * len) as f64);

        let head = &self.layers[cfg.num_blocks];
        {
            let g = &mut grads.layers[cfg.num_blocks];
            g.weight = standard(tape.last_hidden.t().dot(&d_out));
            g.bias = d_out.sum_axis(Axis(0));
        }
        let mut d_h = d_out.dot(&head.weight.t());

        for k in (0..cfg.num_blocks).rev() {
            let mut d_a = d_h;
            d_a.zip_mut_with(&tape.pre_activations[k], |d, &a| *d *= silu_grad(a));
            let g = &mut grads.layers[k];
            g.weight = standard(tape.inputs[k].t().dot(&d_a));
            g.bias = d_a.sum_axis(Axis(0));
            if k == 0 {
                break;
            }
            let w_hidden = self.layers[k].weight.slice(s![..hidden, ..]);
            d_h = d_a.dot(&w_hidden.t());
        }
        Ok((loss, grads))
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Anything that maps a batch of noisy windows and their steps to a
/// prediction of the same shape.
pub trait Denoise: Sync {
    fn window_len(&self) -> usize;
    fn predict(&self, xs: ArrayView2<f64>, steps: &[usize]) -> Result<Array2<f64>>;
}

impl Denoise for DenoiserParams {
    fn window_len(&self) -> usize {
        self.config.input_len
    }

    fn predict(&self, xs: ArrayView2<f64>, steps: &[usize]) -> Result<Array2<f64>> {
        self.forward_batch(xs, steps)
    }
}
