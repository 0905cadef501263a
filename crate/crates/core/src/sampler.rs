//! Reverse-chain sampling: unconditional generation and zero-shot prompt
//! forecasting.
//!
//! Conditioning works by noising the known values to the chain's current
//! level and writing them into the chain state before each reverse step, so
//! after the step the known region holds a draw at level `t − 1`. After the
//! final step the known region is clamped to the exact observations.

use ndarray::Array2;

use crate::denoiser::Denoise;
use crate::error::{check_len, GpdError, Result};
use crate::rng::{fill_normal, substream, Rng};
use crate::schedule::{reverse_step_into, NoiseSchedule, PredictionMode};

pub const DEFAULT_SAMPLES: usize = 50;
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Noise used to lift the known values to level `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Injection {
    /// The model's own noise estimate at the known positions.
    #[default]
    PaperEps,
    /// Fresh standard normal noise.
    FreshNoise,
}

impl std::str::FromStr for Injection {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_eps" => Ok(Injection::PaperEps),
            "fresh_noise" => Ok(Injection::FreshNoise),
            other => Err(GpdError::Config(format!("unknown injection '{other}'"))),
        }
    }
}

impl std::fmt::Display for Injection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Injection::PaperEps => "paper_eps",
            Injection::FreshNoise => "fresh_noise",
        })
    }
}

/// Known values for a window: `values[i]` is used where `mask[i]` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Guide {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Guide {
    pub fn prefix(prompt: &[f64], window: usize) -> Self {
        let mut values = vec![0.0; window];
        values[..prompt.len()].copy_from_slice(prompt);
        let mask = (0..window).map(|i| i < prompt.len()).collect();
        Self { values, mask }
    }

    fn known(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }
}

fn run_chains(
    net: &dyn Denoise,
    s: &NoiseSchedule,
    mode: PredictionMode,
    guide: Option<&Guide>,
    injection: Injection,
    rngs: &mut [Rng],
) -> Result<Array2<f64>> {
    let len = net.window_len();
    let n = rngs.len();
    if let Some(g) = guide {
        check_len("guide values", len, g.values.len())?;
        check_len("guide mask", len, g.mask.len())?;
    }
    let known = guide.map(Guide::known).unwrap_or_default();

    let mut x = Array2::<f64>::zeros((n, len));
    for (mut row, rng) in x.rows_mut().into_iter().zip(rngs.iter_mut()) {
        fill_normal(rng, row.as_slice_mut().expect("row-major"));
    }
    let mut next = Array2::<f64>::zeros((n, len));
    let mut noise = vec![0.0; len];
    let mut fresh = vec![0.0; known.len()];

    for t in (1..=s.steps()).rev() {
        let mut pred = net.predict(x.view(), &vec![t; n])?;
        check_len("denoiser output", len, pred.ncols())?;
        let signal = s.alpha_bar(t).sqrt();
        let noise_scale = s.one_minus_alpha_bar(t).sqrt();
        for (i, rng) in rngs.iter_mut().enumerate() {
            let xi = x.row_mut(i).into_slice().expect("row-major");
            let pi = pred.row_mut(i).into_slice().expect("row-major");
            if let Some(g) = guide {
                if injection == Injection::FreshNoise {
                    fill_normal(rng, &mut fresh);
                }
                for (k, &j) in known.iter().enumerate() {
                    let nu = match injection {
                        Injection::FreshNoise => fresh[k],
                        Injection::PaperEps => match mode {
                            PredictionMode::Epsilon => pi[j],
                            PredictionMode::X0 => s.predict_eps_from_x0(xi[j], pi[j], t),
                        },
                    };
                    xi[j] = signal * g.values[j] + noise_scale * nu;
                    if mode == PredictionMode::X0 && injection == Injection::PaperEps {
                        // x̂₀ implied by the injected value and ν.
                        pi[j] = g.values[j];
                    }
                }
            }
            if t > 1 {
                fill_normal(rng, &mut noise);
            } else {
                noise.fill(0.0);
            }
            let out = next.row_mut(i).into_slice().expect("row-major");
            reverse_step_into(xi, pi, mode, t, s, &noise, out);
        }
        std::mem::swap(&mut x, &mut next);
    }

    if let Some(g) = guide {
        for mut row in x.rows_mut() {
            for &j in &known {
                row[j] = g.values[j];
            }
        }
    }
    Ok(x)
}

/// Draws one window from the model, starting from `x_T ~ N(0, I)`.
pub fn unconditional_sample(net: &dyn Denoise, s: &NoiseSchedule, mode: PredictionMode, rng: &mut Rng) -> Result<Vec<f64>> {
    let out = run_chains(net, s, mode, None, Injection::PaperEps, std::slice::from_mut(rng))?;
    let v = out.into_raw_vec_and_offset().0;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(GpdError::NonFinite("unconditional sample".into()));
    }
    Ok(v)
}

/// `n` guided chains with per-chain streams `(seed, "chain", i)`. A chain
/// that produces non-finite values is rerun once on `(seed, "chain-retry", i)`.
pub fn sample_chains(
    net: &dyn Denoise,
    s: &NoiseSchedule,
    mode: PredictionMode,
    guide: Option<&Guide>,
    injection: Injection,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(GpdError::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rngs: Vec<Rng> = (0..n as u64).map(|i| substream(seed, "chain", i)).collect();
    let out = run_chains(net, s, mode, guide, injection, &mut rngs)?;
    let mut paths: Vec<Vec<f64>> = out.rows().into_iter().map(|r| r.to_vec()).collect();

    let bad: Vec<usize> = (0..n)
        .filter(|&i| paths[i].iter().any(|v| !v.is_finite()))
        .collect();
    if !bad.is_empty() {
        log::warn!("{} chain(s) produced non-finite values, retrying", bad.len());
        let mut retry: Vec<Rng> = bad
            .iter()
            .map(|&i| substream(seed, "chain-retry", i as u64))
            .collect();
        let again = run_chains(net, s, mode, guide, injection, &mut retry)?;
        for (row, &i) in again.rows().into_iter().zip(&bad) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(GpdError::NonFinite(format!("chain {i} failed twice")));
            }
            paths[i] = row.to_vec();
        }
    }
    Ok(paths)
}

/// z-scores the prompt by its own mean and (population) standard deviation,
/// flooring the deviation at [`SIGMA_FLOOR`].
pub fn sampling_instance_normalize(prompt: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = prompt.len() as f64;
    let mu = prompt.iter().sum::<f64>() / n;
    let var = prompt.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt().max(SIGMA_FLOOR);
    (prompt.iter().map(|v| (v - mu) / sigma).collect(), mu, sigma)
}

pub fn sampling_instance_denormalize(path: &[f64], mu: f64, sigma: f64) -> Vec<f64> {
    path.iter().map(|v| v * sigma + mu).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRequest {
    pub prompt: Vec<f64>,
    pub horizon: usize,
    pub samples: usize,
    pub sin: bool,
    pub injection: Injection,
    pub seed: u64,
}

impl ForecastRequest {
    pub fn new(prompt: Vec<f64>, horizon: usize) -> Self {
        Self {
            prompt,
            horizon,
            samples: DEFAULT_SAMPLES,
            sin: true,
            injection: Injection::PaperEps,
            seed: 0,
        }
    }

    pub fn validate(&self, window: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(GpdError::InvalidArgument("horizon must be >= 1".into()));
        }
        if self.samples == 0 {
            return Err(GpdError::InvalidArgument("sample count must be >= 1".into()));
        }
        if self.prompt.len() + self.horizon > window {
            return Err(GpdError::HorizonTooLong {
                prompt: self.prompt.len(),
                horizon: self.horizon,
                window,
            });
        }
        if self.prompt.iter().any(|v| !v.is_finite()) {
            return Err(GpdError::InvalidArgument("prompt contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Per-position summaries across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q05: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
    pub q95: Vec<f64>,
}

impl SampleSummary {
    pub fn band50(&self) -> Vec<(f64, f64)> {
        self.q25.iter().copied().zip(self.q75.iter().copied()).collect()
    }

    pub fn band90(&self) -> Vec<(f64, f64)> {
        self.q05.iter().copied().zip(self.q95.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    /// `n` forecasts of length `P`.
    pub samples: Vec<Vec<f64>>,
    pub summary: SampleSummary,
    /// `n` paths of length `H + P`: the prompt followed by the forecast.
    pub full_paths: Vec<Vec<f64>>,
}

impl ForecastResult {
    pub fn mean(&self) -> &[f64] {
        &self.summary.mean
    }

    pub fn median(&self) -> &[f64] {
        &self.summary.median
    }
}

/// Linear-interpolation quantile of sorted data (`h = (n − 1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Uniform mean, median and central 50%/90% bands per position.
pub fn aggregate_samples(samples: &[Vec<f64>]) -> Result<SampleSummary> {
    let first = samples
        .first()
        .ok_or_else(|| GpdError::InvalidArgument("no samples to aggregate".into()))?;
    let len = first.len();
    for s in samples {
        check_len("sample", len, s.len())?;
    }
    let n = samples.len() as f64;
    let mut out = SampleSummary {
        mean: Vec::with_capacity(len),
        median: Vec::with_capacity(len),
        q05: Vec::with_capacity(len),
        q25: Vec::with_capacity(len),
        q75: Vec::with_capacity(len),
        q95: Vec::with_capacity(len),
    };
    let mut column = Vec::with_capacity(samples.len());
    for j in 0..len {
        column.clear();
        column.extend(samples.iter().map(|s| s[j]));
        out.mean.push(column.iter().sum::<f64>() / n);
        column.sort_by(f64::total_cmp);
        out.median.push(quantile_sorted(&column, 0.5));
        out.q05.push(quantile_sorted(&column, 0.05));
        out.q25.push(quantile_sorted(&column, 0.25));
        out.q75.push(quantile_sorted(&column, 0.75));
        out.q95.push(quantile_sorted(&column, 0.95));
    }
    Ok(out)
}

/// Zero-shot forecast of `req.horizon` steps after `req.prompt`.
pub fn prompt_forecast(net: &dyn Denoise, s: &NoiseSchedule, mode: PredictionMode, req: &ForecastRequest) -> Result<ForecastResult> {
    let window = net.window_len();
    req.validate(window)?;
    let h = req.prompt.len();
    let p = req.horizon;

    let scaling = if req.sin && h >= 2 {
        let (normed, mu, sigma) = sampling_instance_normalize(&req.prompt);
        (sigma > SIGMA_FLOOR).then_some((normed, mu, sigma))
    } else {
        None
    };
    let guide_values = scaling.as_ref().map_or(req.prompt.as_slice(), |(v, _, _)| v.as_slice());
    let guide = Guide::prefix(guide_values, window);

    let paths = sample_chains(net, s, mode, Some(&guide), req.injection, req.samples, req.seed)?;
    let full_paths: Vec<Vec<f64>> = paths
        .into_iter()
        .map(|path| {
            let path = &path[..h + p];
            let mut out = match &scaling {
                Some((_, mu, sigma)) => sampling_instance_denormalize(path, *mu, *sigma),
                None => path.to_vec(),
            };
            out[..h].copy_from_slice(&req.prompt);
            out
        })
        .collect();
    let samples: Vec<Vec<f64>> = full_paths.iter().map(|f| f[h..].to_vec()).collect();
    let summary = aggregate_samples(&samples)?;
    Ok(ForecastResult {
        samples,
        summary,
        full_paths,
    })
}
