//! Closed-form diffusion arithmetic.
//!
//! Steps are addressed with 1-based indices `t ∈ 1..=T` everywhere in the
//! public API; tables are stored 0-based, so entry `t - 1` holds step `t`.
//! `ᾱ_0` is taken as 1, which makes the last reverse step (t = 1) noiseless.

use crate::error::{check_len, GpdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleKind {
    #[default]
    Linear,
}

/// Variance used by the reverse transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    /// `β̃_t = (1 − ᾱ_{t−1}) / (1 − ᾱ_t) · β_t`
    #[default]
    Posterior,
    /// `β_t`
    Beta,
}

/// What the denoiser regresses onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionMode {
    #[default]
    Epsilon,
    X0,
}

impl std::str::FromStr for ScheduleKind {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(GpdError::Config(format!("unknown schedule kind '{other}'"))),
        }
    }
}

impl std::str::FromStr for VarianceMode {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "posterior" => Ok(VarianceMode::Posterior),
            "beta" => Ok(VarianceMode::Beta),
            other => Err(GpdError::Config(format!("unknown variance mode '{other}'"))),
        }
    }
}

impl std::str::FromStr for PredictionMode {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" | "eps" => Ok(PredictionMode::Epsilon),
            "x0" => Ok(PredictionMode::X0),
            other => Err(GpdError::Config(format!("unknown prediction mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("linear")
    }
}

impl std::fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VarianceMode::Posterior => "posterior",
            VarianceMode::Beta => "beta",
        })
    }
}

impl std::fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PredictionMode::Epsilon => "epsilon",
            PredictionMode::X0 => "x0",
        })
    }
}

/// Parameters a schedule is rebuilt from; this is what checkpoints store.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub kind: ScheduleKind,
    pub variance_mode: VarianceMode,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            steps: 200,
            beta_start: 1e-4,
            beta_end: 0.02,
            kind: ScheduleKind::Linear,
            variance_mode: VarianceMode::Posterior,
        }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<NoiseSchedule> {
        build_schedule(
            self.steps,
            self.beta_start,
            self.beta_end,
            self.kind,
            self.variance_mode,
        )
    }
}

/// Precomputed β, α, ᾱ and β̃ tables.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    spec: ScheduleSpec,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    // 1 − ᾱ_t accumulated as (1 − ᾱ_{t−1}) + ᾱ_{t−1}β_t, which keeps it exact
    // at t = 1 and avoids cancellation for small t.
    one_minus_alpha_bar: Vec<f64>,
    beta_tilde: Vec<f64>,
}

pub fn build_schedule(
    steps: usize,
    beta_start: f64,
    beta_end: f64,
    kind: ScheduleKind,
    variance_mode: VarianceMode,
) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(GpdError::InvalidRange("schedule needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(GpdError::InvalidRange(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
        )));
    }

    let beta: Vec<f64> = match kind {
        ScheduleKind::Linear if steps == 1 => vec![beta_start],
        ScheduleKind::Linear => {
            let span = beta_end - beta_start;
            let denom = (steps - 1) as f64;
            (0..steps)
                .map(|i| beta_start + span * (i as f64 / denom))
                .collect()
        }
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();

    let mut alpha_bar = Vec::with_capacity(steps);
    let mut one_minus_alpha_bar = Vec::with_capacity(steps);
    let mut beta_tilde = Vec::with_capacity(steps);
    let (mut prev_ab, mut prev_omab) = (1.0_f64, 0.0_f64);
    for (&b, &a) in beta.iter().zip(&alpha) {
        let ab = prev_ab * a;
        let omab = prev_omab + prev_ab * b;
        beta_tilde.push(prev_omab / omab * b);
        alpha_bar.push(ab);
        one_minus_alpha_bar.push(omab);
        prev_ab = ab;
        prev_omab = omab;
    }

    Ok(NoiseSchedule {
        spec: ScheduleSpec {
            steps,
            beta_start,
            beta_end,
            kind,
            variance_mode,
        },
        beta,
        alpha,
        alpha_bar,
        one_minus_alpha_bar,
        beta_tilde,
    })
}

impl NoiseSchedule {
    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.spec.variance_mode
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(GpdError::StepOutOfRange {
                t,
                steps: self.steps(),
            });
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    /// `1 − ᾱ_t`, with the t = 0 value 0.
    pub fn one_minus_alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.one_minus_alpha_bar[t - 1]
        }
    }

    pub fn beta_tilde(&self, t: usize) -> f64 {
        self.beta_tilde[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn beta_tildes(&self) -> &[f64] {
        &self.beta_tilde
    }

    /// Variance injected by the reverse step at `t`.
    pub fn reverse_variance(&self, t: usize) -> f64 {
        match self.spec.variance_mode {
            VarianceMode::Posterior => self.beta_tilde(t),
            VarianceMode::Beta => self.beta(t),
        }
    }

    /// `(c_x0, c_xt)` such that `μ = c_x0·x̂₀ + c_xt·x_t`.
    pub fn posterior_coefficients(&self, t: usize) -> (f64, f64) {
        let omab = self.one_minus_alpha_bar(t);
        let c_x0 = self.alpha_bar(t - 1).sqrt() * self.beta(t) / omab;
        let c_xt = self.alpha(t).sqrt() * self.one_minus_alpha_bar(t - 1) / omab;
        (c_x0, c_xt)
    }

    /// Recovers `x̂₀` from `x_t` and a noise estimate.
    pub fn predict_x0_from_eps(&self, x_t: f64, eps: f64, t: usize) -> f64 {
        (x_t - self.one_minus_alpha_bar(t).sqrt() * eps) / self.alpha_bar(t).sqrt()
    }

    /// Recovers the implied noise from `x_t` and a clean-signal estimate.
    pub fn predict_eps_from_x0(&self, x_t: f64, x0: f64, t: usize) -> f64 {
        (x_t - self.alpha_bar(t).sqrt() * x0) / self.one_minus_alpha_bar(t).sqrt()
    }
}

/// `x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε`
pub fn forward_marginal(x0: &[f64], t: usize, eps: &[f64], s: &NoiseSchedule) -> Result<Vec<f64>> {
    s.check_step(t)?;
    check_len("forward_marginal", x0.len(), eps.len())?;
    let signal = s.alpha_bar(t).sqrt();
    let noise = s.one_minus_alpha_bar(t).sqrt();
    Ok(x0
        .iter()
        .zip(eps)
        .map(|(x, e)| signal * x + noise * e)
        .collect())
}

/// One forward transition `x_t = √α_t·x_{t−1} + √β_t·ε`.
pub fn forward_step(x_prev: &[f64], t: usize, eps: &[f64], s: &NoiseSchedule) -> Result<Vec<f64>> {
    s.check_step(t)?;
    check_len("forward_step", x_prev.len(), eps.len())?;
    let keep = s.alpha(t).sqrt();
    let noise = s.beta(t).sqrt();
    Ok(x_prev
        .iter()
        .zip(eps)
        .map(|(x, e)| keep * x + noise * e)
        .collect())
}

/// Mean of `p(x_{t−1} | x_t)` given the network's prediction in `mode`.
pub fn posterior_mean(
    x_t: &[f64],
    prediction: &[f64],
    mode: PredictionMode,
    t: usize,
    s: &NoiseSchedule,
) -> Result<Vec<f64>> {
    s.check_step(t)?;
    check_len("posterior_mean", x_t.len(), prediction.len())?;
    let mut out = vec![0.0; x_t.len()];
    posterior_mean_into(x_t, prediction, mode, t, s, &mut out);
    Ok(out)
}

pub(crate) fn posterior_mean_into(
    x_t: &[f64],
    prediction: &[f64],
    mode: PredictionMode,
    t: usize,
    s: &NoiseSchedule,
    out: &mut [f64],
) {
    match mode {
        PredictionMode::Epsilon => {
            let inv_sqrt_alpha = 1.0 / s.alpha(t).sqrt();
            let eps_coef = s.beta(t) / s.one_minus_alpha_bar(t).sqrt();
            for ((o, x), e) in out.iter_mut().zip(x_t).zip(prediction) {
                *o = inv_sqrt_alpha * (x - eps_coef * e);
            }
        }
        PredictionMode::X0 => {
            let (c_x0, c_xt) = s.posterior_coefficients(t);
            for ((o, x), x0) in out.iter_mut().zip(x_t).zip(prediction) {
                *o = c_x0 * x0 + c_xt * x;
            }
        }
    }
}

/// Posterior mean plus `√variance · noise`. Callers pass zero noise at t = 1.
pub fn reverse_step(
    x_t: &[f64],
    prediction: &[f64],
    mode: PredictionMode,
    t: usize,
    s: &NoiseSchedule,
    noise: &[f64],
) -> Result<Vec<f64>> {
    s.check_step(t)?;
    check_len("reverse_step", x_t.len(), prediction.len())?;
    check_len("reverse_step noise", x_t.len(), noise.len())?;
    let mut out = vec![0.0; x_t.len()];
    reverse_step_into(x_t, prediction, mode, t, s, noise, &mut out);
    Ok(out)
}

pub(crate) fn reverse_step_into(
    x_t: &[f64],
    prediction: &[f64],
    mode: PredictionMode,
    t: usize,
    s: &NoiseSchedule,
    noise: &[f64],
    out: &mut [f64],
) {
    posterior_mean_into(x_t, prediction, mode, t, s, out);
    let sigma = s.reverse_variance(t).sqrt();
    if sigma > 0.0 {
        for (o, z) in out.iter_mut().zip(noise) {
            *o += sigma * z;
        }
    }
}
