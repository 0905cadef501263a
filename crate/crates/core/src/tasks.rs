//! Zero-shot imputation and diffusion-error classification on top of a
//! pre-trained model.

use ndarray::Array2;

use crate::checkpoint::Checkpoint;
use crate::denoiser::Denoise;
use crate::error::{check_len, GpdError, Result};
use crate::rng::{fill_normal, substream};
use crate::sampler::{aggregate_samples, sample_chains, Guide, Injection, SampleSummary};
use crate::schedule::{NoiseSchedule, PredictionMode};

/// Observed (`true`) / missing (`false`) indicator per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask(pub Vec<bool>);

impl Mask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn observed(&self) -> usize {
        self.0.iter().filter(|&&m| m).count()
    }

    pub fn from_options(values: &[Option<f64>]) -> (Vec<f64>, Mask) {
        let filled = values.iter().map(|v| v.unwrap_or(0.0)).collect();
        (filled, Mask(values.iter().map(Option::is_some).collect()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputeResult {
    pub paths: Vec<Vec<f64>>,
    pub summary: SampleSummary,
}

impl ImputeResult {
    pub fn mean(&self) -> &[f64] {
        &self.summary.mean
    }
}

/// Fills the missing positions of one window by guided sampling. Observed
/// positions come back exactly as given.
#[allow(clippy::too_many_arguments)]
pub fn impute(
    net: &dyn Denoise,
    s: &NoiseSchedule,
    mode: PredictionMode,
    series: &[f64],
    mask: &Mask,
    n: usize,
    injection: Injection,
    seed: u64,
) -> Result<ImputeResult> {
    let len = net.window_len();
    check_len("impute series", len, series.len())?;
    check_len("impute mask", len, mask.len())?;
    if n == 0 {
        return Err(GpdError::InvalidArgument("sample count must be >= 1".into()));
    }
    if let Some(i) = (0..len).find(|&i| mask.0[i] && !series[i].is_finite()) {
        return Err(GpdError::InvalidArgument(format!("observed value at {i} is not finite")));
    }
    let paths = if mask.observed() == len {
        vec![series.to_vec(); n]
    } else {
        if mask.observed() == 0 {
            log::warn!("mask has no observed values; imputation is unconditional sampling");
        }
        let guide = Guide {
            values: series.to_vec(),
            mask: mask.0.clone(),
        };
        sample_chains(net, s, mode, Some(&guide), injection, n, seed)?
    };
    let summary = aggregate_samples(&paths)?;
    Ok(ImputeResult { paths, summary })
}

/// A model trained on one domain, used as a class expert.
pub struct ExpertModel {
    pub label: String,
    pub net: Box<dyn Denoise>,
    pub schedule: NoiseSchedule,
    pub mode: PredictionMode,
}

impl std::fmt::Debug for ExpertModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpertModel")
            .field("label", &self.label)
            .field("window", &self.net.window_len())
            .field("mode", &self.mode)
            .finish()
    }
}

impl ExpertModel {
    pub fn from_checkpoint(label: impl Into<String>, ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            net: Box::new(ck.inference_params().clone()),
            schedule: ck.build_schedule()?,
            mode: ck.mode,
        })
    }
}

/// How an expert's per-step errors collapse to one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorReduction {
    #[default]
    Min,
    Mean,
}

impl std::str::FromStr for ErrorReduction {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(ErrorReduction::Min),
            "mean" => Ok(ErrorReduction::Mean),
            other => Err(GpdError::Config(format!("unknown error reduction '{other}'"))),
        }
    }
}

impl std::fmt::Display for ErrorReduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorReduction::Min => "min",
            ErrorReduction::Mean => "mean",
        })
    }
}

/// 8 evenly spaced steps from `⌈T/10⌉` to `⌈9T/10⌉`.
pub fn default_t_grid(steps: usize) -> Vec<usize> {
    let lo = steps.div_ceil(10).max(1);
    let hi = (9 * steps).div_ceil(10).max(lo);
    let mut grid: Vec<usize> = (0..8)
        .map(|i| lo + ((hi - lo) as f64 * i as f64 / 7.0).round() as usize)
        .collect();
    grid.dedup();
    grid
}

pub const DEFAULT_PROBE_DRAWS: usize = 4;

/// Noise probes: draw `r` at step `t` comes from its own stream keyed by
/// `(t, r)`, so the probe used at a step does not depend on grid order.
fn probe_noise(seed: u64, t: usize, r: usize, len: usize) -> Vec<f64> {
    let mut rng = substream(seed, "probe", ((t as u64) << 32) | r as u64);
    let mut eps = vec![0.0; len];
    fill_normal(&mut rng, &mut eps);
    eps
}

/// Mean squared noise-prediction error of `expert` on `y0` at every step of
/// `t_grid`, averaged over `k` noise draws. For x0-mode experts the error is
/// measured on the clean-signal estimate instead.
pub fn diffusion_error(expert: &ExpertModel, y0: &[f64], t_grid: &[usize], k: usize, seed: u64) -> Result<Vec<f64>> {
    let len = expert.net.window_len();
    check_len("classification window", len, y0.len())?;
    if t_grid.is_empty() || k == 0 {
        return Err(GpdError::InvalidArgument("need a non-empty step grid and k >= 1".into()));
    }
    for &t in t_grid {
        expert.schedule.check_step(t)?;
    }
    let rows = t_grid.len() * k;
    let mut xs = Array2::<f64>::zeros((rows, len));
    let mut eps_all = Array2::<f64>::zeros((rows, len));
    let mut steps = Vec::with_capacity(rows);
    for (g, &t) in t_grid.iter().enumerate() {
        let signal = expert.schedule.alpha_bar(t).sqrt();
        let noise = expert.schedule.one_minus_alpha_bar(t).sqrt();
        for r in 0..k {
            let row = g * k + r;
            let eps = probe_noise(seed, t, r, len);
            for j in 0..len {
                xs[[row, j]] = signal * y0[j] + noise * eps[j];
                eps_all[[row, j]] = eps[j];
            }
            steps.push(t);
        }
    }
    let pred = expert.net.predict(xs.view(), &steps)?;
    let mut errors = Vec::with_capacity(t_grid.len());
    for g in 0..t_grid.len() {
        let mut total = 0.0;
        for r in 0..k {
            let row = g * k + r;
            let target = match expert.mode {
                PredictionMode::Epsilon => eps_all.row(row),
                PredictionMode::X0 => ndarray::ArrayView1::from(y0),
            };
            total += pred
                .row(row)
                .iter()
                .zip(target.iter())
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                / len as f64;
        }
        errors.push(total / k as f64);
    }
    Ok(errors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationScore {
    /// Per expert, the error at each grid step.
    pub errors: Vec<Vec<f64>>,
    /// Per expert, the reduced score.
    pub scores: Vec<f64>,
    pub chosen: usize,
    pub label: String,
}

/// Assigns `y0` to the expert with the smallest diffusion error. All experts
/// see the same noise probes; ties go to the earlier expert.
pub fn classify(
    experts: &[ExpertModel],
    y0: &[f64],
    t_grid: &[usize],
    k: usize,
    seed: u64,
    reduction: ErrorReduction,
) -> Result<ClassificationScore> {
    if experts.len() < 2 {
        return Err(GpdError::InvalidArgument("classification needs at least two experts".into()));
    }
    let len = experts[0].net.window_len();
    if let Some(e) = experts.iter().find(|e| e.net.window_len() != len) {
        return Err(GpdError::InvalidArgument(format!(
            "expert '{}' has window {} but '{}' has {len}",
            e.label,
            e.net.window_len(),
            experts[0].label
        )));
    }
    let errors = experts
        .iter()
        .map(|e| diffusion_error(e, y0, t_grid, k, seed))
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = errors
        .iter()
        .map(|errs| match reduction {
            ErrorReduction::Min => errs.iter().copied().fold(f64::INFINITY, f64::min),
            ErrorReduction::Mean => errs.iter().sum::<f64>() / errs.len() as f64,
        })
        .collect();
    let mut chosen = 0;
    for (i, &sc) in scores.iter().enumerate() {
        if sc < scores[chosen] {
            chosen = i;
        }
    }
    Ok(ClassificationScore {
        label: experts[chosen].label.clone(),
        errors,
        scores,
        chosen,
    })
}
