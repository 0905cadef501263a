//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! Every key has a default; a file and `--set section.key=value` overrides
//! only change what they name. Unknown sections or keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{SplitPart, SplitSpec, SynthKind, SynthParams};
use crate::denoiser::{Activation, DenoiserConfig};
use crate::error::{GpdError, Result};
use crate::sampler::{Injection, DEFAULT_SAMPLES};
use crate::schedule::ScheduleSpec;
use crate::tasks::{ErrorReduction, DEFAULT_PROBE_DRAWS};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    /// Empty selects every channel.
    pub channels: Vec<String>,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSection {
    pub history: usize,
    pub horizon: usize,
    pub samples: usize,
    pub sin: bool,
    pub injection: Injection,
    pub channel: usize,
    /// Row where the prompt starts; `None` takes the last `H` rows.
    pub start: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputeSection {
    pub samples: usize,
    pub injection: Injection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifySection {
    /// Empty selects the default grid for the experts' step count.
    pub t_grid: Vec<usize>,
    pub draws: usize,
    pub reduction: ErrorReduction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    pub horizons: Vec<usize>,
    pub stride: usize,
    pub part: SplitPart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSection {
    pub kind: SynthKind,
    pub rows: usize,
    pub channels: usize,
    pub params: SynthParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub data: DataSection,
    pub split: SplitSpec,
    pub model: DenoiserConfig,
    pub schedule: ScheduleSpec,
    pub train: TrainConfig,
    pub forecast: ForecastSection,
    pub impute: ImputeSection,
    pub classify: ClassifySection,
    pub eval: EvalSection,
    pub synth: SynthSection,
    pub sample_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            data: DataSection {
                path: None,
                channels: Vec::new(),
                stride: 1,
            },
            split: SplitSpec::default(),
            model: DenoiserConfig {
                input_len: 1232,
                num_blocks: 20,
                hidden_dim: 2048,
                time_embed_dim: 128,
                activation: Activation::Silu,
            },
            schedule: ScheduleSpec::default(),
            train: TrainConfig::default(),
            forecast: ForecastSection {
                history: 512,
                horizon: 720,
                samples: DEFAULT_SAMPLES,
                sin: true,
                injection: Injection::PaperEps,
                channel: 0,
                start: None,
            },
            impute: ImputeSection {
                samples: DEFAULT_SAMPLES,
                injection: Injection::PaperEps,
            },
            classify: ClassifySection {
                t_grid: Vec::new(),
                draws: DEFAULT_PROBE_DRAWS,
                reduction: ErrorReduction::Min,
            },
            eval: EvalSection {
                horizons: Vec::new(),
                stride: 1,
                part: SplitPart::Test,
            },
            synth: SynthSection {
                kind: SynthKind::Sine,
                rows: 4096,
                channels: 4,
                params: SynthParams::default(),
            },
            sample_count: 1,
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| GpdError::Config(format!("{section}.{key}: cannot parse '{value}'")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(GpdError::Config(format!("{section}.{key}: expected a boolean, got '{value}'"))),
    }
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(section, key, s))
        .collect()
}

fn parse_enum<T: FromStr<Err = GpdError>>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|e: GpdError| GpdError::Config(format!("{section}.{key}: {e}")))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.merge_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| GpdError::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            if section.is_empty() {
                return Err(GpdError::Config(format!("line {}: key '{}' outside any section", n + 1, key.trim())));
            }
            self.set(&section, key.trim(), unquote(value.trim()))?;
        }
        Ok(())
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| GpdError::Config(format!("override '{assignment}' is not section.key=value")))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| GpdError::Config(format!("override key '{path}' is not section.key")))?;
        self.set(section.trim(), key.trim(), value.trim())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let (s, k, v) = (section, key, value);
        match (s, k) {
            ("run", "seed") => self.seed = parse(s, k, v)?,
            ("run", "threads") => self.threads = parse(s, k, v)?,

            ("data", "path") => self.data.path = (!v.is_empty()).then(|| PathBuf::from(v)),
            ("data", "channels") => self.data.channels = parse_list(s, k, v)?,
            ("data", "stride") => self.data.stride = parse(s, k, v)?,

            ("split", "train") => self.split.train = parse(s, k, v)?,
            ("split", "val") => self.split.val = parse(s, k, v)?,
            ("split", "test") => self.split.test = parse(s, k, v)?,

            ("model", "input_len") => self.model.input_len = parse(s, k, v)?,
            ("model", "num_blocks") => self.model.num_blocks = parse(s, k, v)?,
            ("model", "hidden_dim") => self.model.hidden_dim = parse(s, k, v)?,
            ("model", "time_embed_dim") => self.model.time_embed_dim = parse(s, k, v)?,
            ("model", "activation") => {
                if v != "silu" {
                    return Err(GpdError::Config(format!("model.activation: only 'silu' is supported, got '{v}'")));
                }
                self.model.activation = Activation::Silu;
            }

            ("schedule", "T") => self.schedule.steps = parse(s, k, v)?,
            ("schedule", "beta_start") => self.schedule.beta_start = parse(s, k, v)?,
            ("schedule", "beta_end") => self.schedule.beta_end = parse(s, k, v)?,
            ("schedule", "kind") => self.schedule.kind = parse_enum(s, k, v)?,
            ("schedule", "variance_mode") => self.schedule.variance_mode = parse_enum(s, k, v)?,

            ("train", "mode") => self.train.mode = parse_enum(s, k, v)?,
            ("train", "batch_size") => self.train.batch_size = parse(s, k, v)?,
            ("train", "iterations") => self.train.iterations = parse(s, k, v)?,
            ("train", "learning_rate") => self.train.learning_rate = parse(s, k, v)?,
            ("train", "ema_decay") => self.train.ema_decay = parse(s, k, v)?,
            ("train", "adam_beta1") => self.train.adam_beta1 = parse(s, k, v)?,
            ("train", "adam_beta2") => self.train.adam_beta2 = parse(s, k, v)?,
            ("train", "adam_eps") => self.train.adam_eps = parse(s, k, v)?,
            ("train", "normalization") => self.train.normalization = parse_enum(s, k, v)?,
            ("train", "checkpoint_every") => self.train.checkpoint_every = parse(s, k, v)?,

            ("forecast", "H") => self.forecast.history = parse(s, k, v)?,
            ("forecast", "P") => self.forecast.horizon = parse(s, k, v)?,
            ("forecast", "n") => self.forecast.samples = parse(s, k, v)?,
            ("forecast", "sin") => self.forecast.sin = parse_bool(s, k, v)?,
            ("forecast", "injection") => self.forecast.injection = parse_enum(s, k, v)?,
            ("forecast", "channel") => self.forecast.channel = parse(s, k, v)?,
            ("forecast", "start") => self.forecast.start = if v.is_empty() { None } else { Some(parse(s, k, v)?) },

            ("impute", "n") => self.impute.samples = parse(s, k, v)?,
            ("impute", "injection") => self.impute.injection = parse_enum(s, k, v)?,

            ("classify", "t_grid") => self.classify.t_grid = parse_list(s, k, v)?,
            ("classify", "k") => self.classify.draws = parse(s, k, v)?,
            ("classify", "reduction") => self.classify.reduction = parse_enum(s, k, v)?,

            ("eval", "horizons") => self.eval.horizons = parse_list(s, k, v)?,
            ("eval", "stride") => self.eval.stride = parse(s, k, v)?,
            ("eval", "part") => self.eval.part = parse_enum(s, k, v)?,

            ("synth", "kind") => self.synth.kind = parse_enum(s, k, v)?,
            ("synth", "N") => self.synth.rows = parse(s, k, v)?,
            ("synth", "D") => self.synth.channels = parse(s, k, v)?,
            ("synth", "period") => self.synth.params.period = parse(s, k, v)?,
            ("synth", "amplitude") => self.synth.params.amplitude = parse(s, k, v)?,
            ("synth", "noise") => self.synth.params.noise = parse(s, k, v)?,
            ("synth", "phi") => self.synth.params.phi = parse(s, k, v)?,
            ("synth", "sigma") => self.synth.params.sigma = parse(s, k, v)?,
            ("synth", "start") => self.synth.params.start = if v.is_empty() { None } else { Some(parse(s, k, v)?) },
            ("synth", "slope") => self.synth.params.slope = parse(s, k, v)?,

            ("sample", "count") => self.sample_count = parse(s, k, v)?,

            _ => {
                return Err(GpdError::Config(format!("unknown key '{section}.{key}'")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.build().map_err(|e| GpdError::Config(format!("schedule: {e}")))?;
        let mut train = self.train.clone();
        train.seed = self.seed;
        train.validate()?;
        self.split.validate()?;
        if self.data.stride == 0 || self.eval.stride == 0 {
            return Err(GpdError::Config("strides must be >= 1".into()));
        }
        if self.forecast.horizon == 0 {
            return Err(GpdError::Config("forecast.P must be >= 1".into()));
        }
        if self.forecast.samples == 0 || self.impute.samples == 0 || self.sample_count == 0 {
            return Err(GpdError::Config("sample counts must be >= 1".into()));
        }
        if self.classify.draws == 0 {
            return Err(GpdError::Config("classify.k must be >= 1".into()));
        }
        if self.classify.t_grid.contains(&0) {
            return Err(GpdError::Config("classify.t_grid entries must be >= 1".into()));
        }
        if self.synth.rows == 0 || self.synth.channels == 0 {
            return Err(GpdError::Config("synth.N and synth.D must be >= 1".into()));
        }
        Ok(())
    }

    /// Training settings with the run seed folded in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Every key with its resolved value, in a form `merge_text` accepts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        section("run", vec![("seed", self.seed.to_string()), ("threads", self.threads.to_string())]);
        section(
            "data",
            vec![
                ("path", self.data.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
                ("channels", self.data.channels.join(",")),
                ("stride", self.data.stride.to_string()),
            ],
        );
        section(
            "split",
            vec![
                ("train", self.split.train.to_string()),
                ("val", self.split.val.to_string()),
                ("test", self.split.test.to_string()),
            ],
        );
        section(
            "model",
            vec![
                ("input_len", self.model.input_len.to_string()),
                ("num_blocks", self.model.num_blocks.to_string()),
                ("hidden_dim", self.model.hidden_dim.to_string()),
                ("time_embed_dim", self.model.time_embed_dim.to_string()),
                ("activation", "silu".into()),
            ],
        );
        section(
            "schedule",
            vec![
                ("T", self.schedule.steps.to_string()),
                ("beta_start", self.schedule.beta_start.to_string()),
                ("beta_end", self.schedule.beta_end.to_string()),
                ("kind", self.schedule.kind.to_string()),
                ("variance_mode", self.schedule.variance_mode.to_string()),
            ],
        );
        let t = &self.train;
        section(
            "train",
            vec![
                ("mode", t.mode.to_string()),
                ("batch_size", t.batch_size.to_string()),
                ("iterations", t.iterations.to_string()),
                ("learning_rate", t.learning_rate.to_string()),
                ("ema_decay", t.ema_decay.to_string()),
                ("adam_beta1", t.adam_beta1.to_string()),
                ("adam_beta2", t.adam_beta2.to_string()),
                ("adam_eps", t.adam_eps.to_string()),
                ("normalization", t.normalization.to_string()),
                ("checkpoint_every", t.checkpoint_every.to_string()),
            ],
        );
        let f = &self.forecast;
        section(
            "forecast",
            vec![
                ("H", f.history.to_string()),
                ("P", f.horizon.to_string()),
                ("n", f.samples.to_string()),
                ("sin", f.sin.to_string()),
                ("injection", f.injection.to_string()),
                ("channel", f.channel.to_string()),
                ("start", f.start.map(|s| s.to_string()).unwrap_or_default()),
            ],
        );
        section(
            "impute",
            vec![
                ("n", self.impute.samples.to_string()),
                ("injection", self.impute.injection.to_string()),
            ],
        );
        section(
            "classify",
            vec![
                ("t_grid", join(&self.classify.t_grid)),
                ("k", self.classify.draws.to_string()),
                ("reduction", self.classify.reduction.to_string()),
            ],
        );
        section(
            "eval",
            vec![
                ("horizons", join(&self.eval.horizons)),
                ("stride", self.eval.stride.to_string()),
                ("part", format!("{:?}", self.eval.part).to_lowercase()),
            ],
        );
        let p = &self.synth.params;
        section(
            "synth",
            vec![
                ("kind", self.synth.kind.to_string()),
                ("N", self.synth.rows.to_string()),
                ("D", self.synth.channels.to_string()),
                ("period", p.period.to_string()),
                ("amplitude", p.amplitude.to_string()),
                ("noise", p.noise.to_string()),
                ("phi", p.phi.to_string()),
                ("sigma", p.sigma.to_string()),
                ("start", p.start.map(|s| s.to_string()).unwrap_or_default()),
                ("slope", p.slope.to_string()),
            ],
        );
        section("sample", vec![("count", self.sample_count.to_string())]);
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}
