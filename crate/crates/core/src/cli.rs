//! The `gpd` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, bad config,
//! requests the model cannot serve), 2 on runtime failures.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::data::{format_float, load_csv, make_windows, synth, write_csv, MultivariateSeries, SplitPart};
use crate::error::{GpdError, Result};
use crate::metrics::{evaluate_forecast, DiffusionForecaster, EvalSettings};
use crate::rng::derive_seed;
use crate::sampler::{prompt_forecast, sample_chains, ForecastRequest, SampleSummary};
use crate::tasks::{classify, default_t_grid, impute, ExpertModel, Mask};
use crate::trainer::train;

#[derive(Debug, Parser)]
#[command(name = "gpd", version, about = "Pre-trained diffusion models for time series")]
pub struct Cli {
    /// Run configuration file (`[section]` headers, `key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,

    /// Worker threads; 0 uses all available cores.
    #[arg(long, global = true, env = "GPD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a denoiser on the windows of a series.
    Train(TrainArgs),
    /// Draw unconditional samples from a checkpoint.
    Sample(SampleArgs),
    /// Forecast one channel from a prompt.
    Forecast(ForecastArgs),
    /// Fill the blank cells of a CSV.
    Impute(ImputeArgs),
    /// Label windows by comparing diffusion errors across experts.
    Classify(ClassifyArgs),
    /// Score forecasts over every test window against persistence.
    Eval(EvalArgs),
    /// Write a synthetic series.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training series; defaults to `data.path`, then to `[synth]` data.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration loss log (CSV).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Samples CSV; one row per sample.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Series holding the prompt; defaults to `data.path`, then to `[synth]` data.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Summary CSV: `pos,mean,median,q05,q25,q75,q95`.
    #[arg(long)]
    pub out: PathBuf,
    /// Raw samples CSV; one row per sample.
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// CSV with blank cells marking missing values; defaults to `data.path`, then to `[synth]` data.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Filled CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-cell bands CSV.
    #[arg(long)]
    pub bands_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// `label=path`; repeat for each class.
    #[arg(long = "expert", required = true, value_name = "LABEL=PATH")]
    pub experts: Vec<String>,
    /// Windows CSV: `window_id,v0,v1,…`.
    #[arg(long)]
    pub input: PathBuf,
    /// Scores CSV: `window_id,label,E_<label>…`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Series to evaluate on; defaults to `data.path`, then to `[synth]` data.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Scores CSV: `horizon,mse,mae,windows`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| match e {
            GpdError::Io(io) => GpdError::Config(format!("{}: {io}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    eprintln!("# resolved config\n{}", cfg.render());
    if cfg.threads > 0 {
        // A second build attempt in one process is harmless; keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match &cli.command {
        Command::Train(a) => run_train(&cfg, a),
        Command::Sample(a) => run_sample(&cfg, a),
        Command::Forecast(a) => run_forecast(&cfg, a),
        Command::Impute(a) => run_impute(&cfg, a),
        Command::Classify(a) => run_classify(&cfg, a),
        Command::Eval(a) => run_eval(&cfg, a),
        Command::Synth(a) => run_synth(&cfg, a),
    }
}

fn channel_filter(cfg: &RunConfig) -> Option<&[String]> {
    (!cfg.data.channels.is_empty()).then_some(cfg.data.channels.as_slice())
}

/// `--input`, else `data.path`, else the `[synth]` series.
fn load_series(cfg: &RunConfig, flag: &Option<PathBuf>) -> Result<MultivariateSeries> {
    match flag.as_deref().or(cfg.data.path.as_deref()) {
        Some(path) => load_csv(path, channel_filter(cfg)),
        None => {
            log::info!("no input series; using synthetic {} data", cfg.synth.kind);
            synth(cfg.synth.kind, cfg.synth.rows, cfg.synth.channels, &cfg.synth.params, cfg.seed)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run_train(cfg: &RunConfig, a: &TrainArgs) -> Result<()> {
    let series = load_series(cfg, &a.input)?;
    series.require_complete()?;
    let windows = make_windows(&series, cfg.model.input_len, cfg.data.stride, &cfg.split, SplitPart::Train)?;
    log::info!("training on {} windows", windows.len());

    let mut log_file = a.log.as_deref().map(create).transpose()?;
    let out = a.out.clone();
    let mut save_every = |it: usize, ck: &Checkpoint| -> Result<()> {
        let mut name = out.clone().into_os_string();
        name.push(format!(".{it}"));
        ck.save(PathBuf::from(name))
    };
    let (ck, history) = train(
        &cfg.model,
        cfg.schedule,
        cfg.train_config(),
        &windows,
        log_file.as_mut().map(|w| w as &mut dyn Write),
        Some(&mut save_every),
    )?;
    if let Some(mut w) = log_file {
        w.flush()?;
    }
    ck.save(&a.out)?;
    let n = history.losses.len();
    let tail = n.saturating_sub(100);
    eprintln!(
        "trained {n} iterations; mean loss over the last {} = {}",
        n - tail,
        format_float(history.mean(tail, n))
    );
    Ok(())
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

fn position_header(prefix: &str, len: usize) -> Vec<String> {
    (0..len).map(|i| format!("{prefix}{i}")).collect()
}

fn run_sample(cfg: &RunConfig, a: &SampleArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let s = ck.build_schedule()?;
    let paths = sample_chains(
        ck.inference_params(),
        &s,
        ck.mode,
        None,
        cfg.forecast.injection,
        cfg.sample_count,
        derive_seed(cfg.seed, "sample", 0),
    )?;
    write_rows(&a.out, &position_header("v", ck.window_len()), &paths)
}

fn write_summary(path: &Path, s: &SampleSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["pos", "mean", "median", "q05", "q25", "q75", "q95"])?;
    for i in 0..s.mean.len() {
        let mut rec = vec![i.to_string()];
        rec.extend([s.mean[i], s.median[i], s.q05[i], s.q25[i], s.q75[i], s.q95[i]].map(format_float));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn run_forecast(cfg: &RunConfig, a: &ForecastArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let f = &cfg.forecast;
    let window = ck.window_len();
    if f.history + f.horizon > window {
        return Err(GpdError::HorizonTooLong {
            prompt: f.history,
            horizon: f.horizon,
            window,
        });
    }
    let series = load_series(cfg, &a.input)?;
    if f.channel >= series.num_channels() {
        return Err(GpdError::Config(format!(
            "forecast.channel {} out of range for {} channel(s)",
            f.channel,
            series.num_channels()
        )));
    }
    let values = series.channel(f.channel)?;
    let start = match f.start {
        Some(s) => s,
        None => values.len().checked_sub(f.history).ok_or_else(|| {
            GpdError::Config(format!("series has {} rows, fewer than forecast.H = {}", values.len(), f.history))
        })?,
    };
    if start + f.history > values.len() {
        return Err(GpdError::Config(format!(
            "prompt rows {start}..{} exceed the series length {}",
            start + f.history,
            values.len()
        )));
    }
    let req = ForecastRequest {
        prompt: values[start..start + f.history].to_vec(),
        horizon: f.horizon,
        samples: f.samples,
        sin: f.sin,
        injection: f.injection,
        seed: derive_seed(cfg.seed, "forecast", 0),
    };
    let s = ck.build_schedule()?;
    let res = prompt_forecast(ck.inference_params(), &s, ck.mode, &req)?;
    write_summary(&a.out, &res.summary)?;
    if let Some(path) = &a.samples_out {
        write_rows(path, &position_header("p", f.horizon), &res.samples)?;
    }
    Ok(())
}

fn run_impute(cfg: &RunConfig, a: &ImputeArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let s = ck.build_schedule()?;
    let net = ck.inference_params();
    let len = ck.window_len();
    let series = load_series(cfg, &a.input)?;
    let rows = series.len();
    let chunks = rows.div_ceil(len);

    // Each channel is cut into consecutive windows; the tail window is padded
    // with missing cells.
    let jobs: Vec<(usize, usize)> = (0..series.num_channels())
        .flat_map(|c| (0..chunks).map(move |k| (c, k)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, k)| {
            let mut cells: Vec<Option<f64>> = series.columns[c][k * len..((k + 1) * len).min(rows)].to_vec();
            cells.resize(len, None);
            let (values, mask) = Mask::from_options(&cells);
            let seed = derive_seed(cfg.seed, "impute", (c * chunks + k) as u64);
            impute(net, &s, ck.mode, &values, &mask, cfg.impute.samples, cfg.impute.injection, seed)
                .map(|r| r.summary)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut filled = series.clone();
    let mut bands = csv::Writer::from_writer(match &a.bands_out {
        Some(p) => Box::new(create(p)?) as Box<dyn Write>,
        None => Box::new(io::sink()),
    });
    bands.write_record(["row", "channel", "observed", "mean", "median", "q05", "q25", "q75", "q95"])?;
    for (&(c, k), summary) in jobs.iter().zip(&results) {
        for i in 0..len {
            let row = k * len + i;
            if row >= rows {
                break;
            }
            let observed = series.columns[c][row].is_some();
            if !observed {
                filled.columns[c][row] = Some(summary.mean[i]);
            }
            let mut rec = vec![row.to_string(), series.names[c].clone(), u8::from(observed).to_string()];
            rec.extend(
                [summary.mean[i], summary.median[i], summary.q05[i], summary.q25[i], summary.q75[i], summary.q95[i]]
                    .map(format_float),
            );
            bands.write_record(&rec)?;
        }
    }
    bands.flush()?;
    let mut out = create(&a.out)?;
    write_csv(&filled, &mut out)?;
    out.flush()?;
    Ok(())
}

fn read_windows(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| GpdError::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}: '{cell}' is not a finite number", i + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((id, values));
    }
    Ok(out)
}

fn run_classify(cfg: &RunConfig, a: &ClassifyArgs) -> Result<()> {
    let experts = a
        .experts
        .iter()
        .map(|spec| {
            let (label, path) = spec
                .split_once('=')
                .ok_or_else(|| GpdError::InvalidArgument(format!("--expert '{spec}' is not label=path")))?;
            ExpertModel::from_checkpoint(label, &Checkpoint::load(path)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = experts[0].schedule.steps();
    let t_grid = if cfg.classify.t_grid.is_empty() {
        default_t_grid(steps)
    } else {
        cfg.classify.t_grid.clone()
    };
    let windows = read_windows(&a.input)?;
    let scores = windows
        .par_iter()
        .enumerate()
        .map(|(i, (_, y))| {
            let seed = derive_seed(cfg.seed, "classify", i as u64);
            classify(&experts, y, &t_grid, cfg.classify.draws, seed, cfg.classify.reduction)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(create(&a.out)?);
    let mut header = vec!["window_id".to_string(), "label".to_string()];
    header.extend(experts.iter().map(|e| format!("E_{}", e.label)));
    w.write_record(&header)?;
    for ((id, _), score) in windows.iter().zip(&scores) {
        let mut rec = vec![id.clone(), score.label.clone()];
        rec.extend(score.scores.iter().map(|v| format_float(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn run_eval(cfg: &RunConfig, a: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let f = &cfg.forecast;
    if f.history + f.horizon > ck.window_len() {
        return Err(GpdError::HorizonTooLong {
            prompt: f.history,
            horizon: f.horizon,
            window: ck.window_len(),
        });
    }
    let series = load_series(cfg, &a.input)?;
    let s = ck.build_schedule()?;
    let forecaster = DiffusionForecaster {
        net: ck.inference_params(),
        schedule: &s,
        mode: ck.mode,
        samples: f.samples,
        sin: f.sin,
        injection: f.injection,
    };
    let settings = EvalSettings {
        horizons: cfg.eval.horizons.clone(),
        stride: cfg.eval.stride,
        split: cfg.split,
        part: cfg.eval.part,
        seed: cfg.seed,
        ..EvalSettings::new(f.history, f.horizon)
    };
    let report = evaluate_forecast(&forecaster, &series, &settings)?;
    println!("{report}");
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn run_synth(cfg: &RunConfig, a: &SynthArgs) -> Result<()> {
    let series = synth(cfg.synth.kind, cfg.synth.rows, cfg.synth.channels, &cfg.synth.params, cfg.seed)?;
    let mut w = create(&a.out)?;
    write_csv(&series, &mut w)?;
    w.flush()?;
    Ok(())
}
