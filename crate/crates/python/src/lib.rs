//! Python bindings: train, forecast, impute and classify from Python lists.

use gpd::data::{make_windows, synth as synth_series, SynthKind, SynthParams};
use gpd::denoiser::Activation;
use gpd::sampler::prompt_forecast;
use gpd::tasks::{classify as classify_window, default_t_grid, impute as impute_window, ErrorReduction};
use gpd::trainer::train as train_model;
use gpd::{
    Checkpoint, DenoiserConfig, ExpertModel, ForecastRequest, GpdError, Mask, MultivariateSeries,
    PredictionMode, ScheduleSpec, SplitPart, SplitSpec, TrainConfig,
};
use pyo3::exceptions::{PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn err(e: GpdError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = GpdError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Per-position summaries plus the raw sample paths.
#[pyclass(frozen, get_all, module = "gpd_py")]
struct Bands {
    mean: Vec<f64>,
    median: Vec<f64>,
    q05: Vec<f64>,
    q25: Vec<f64>,
    q75: Vec<f64>,
    q95: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

impl Bands {
    fn new(s: gpd::sampler::SampleSummary, samples: Vec<Vec<f64>>) -> Self {
        Self {
            mean: s.mean,
            median: s.median,
            q05: s.q05,
            q25: s.q25,
            q75: s.q75,
            q95: s.q95,
            samples,
        }
    }
}

/// A trained checkpoint.
#[pyclass(frozen, module = "gpd_py")]
struct Model {
    ck: Checkpoint,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            ck: Checkpoint::load(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            ck: Checkpoint::from_bytes(data).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.ck.save(path).map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.ck.to_bytes())
    }

    #[getter]
    fn window_len(&self) -> usize {
        self.ck.window_len()
    }

    #[getter]
    fn mode(&self) -> String {
        self.ck.mode.to_string()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.ck.schedule.steps
    }

    #[pyo3(signature = (prompt, horizon, samples = 50, sin = true, injection = "paper_eps", seed = 0))]
    fn forecast(&self, prompt: Vec<f64>, horizon: usize, samples: usize, sin: bool, injection: &str, seed: u64) -> PyResult<Bands> {
        let req = ForecastRequest {
            samples,
            sin,
            injection: parse(injection)?,
            seed,
            ..ForecastRequest::new(prompt, horizon)
        };
        let s = self.ck.build_schedule().map_err(err)?;
        let res = prompt_forecast(self.ck.inference_params(), &s, self.ck.mode, &req).map_err(err)?;
        Ok(Bands::new(res.summary, res.samples))
    }

    /// `None` entries are missing; the window must match the model length.
    #[pyo3(signature = (values, samples = 50, injection = "paper_eps", seed = 0))]
    fn impute(&self, values: Vec<Option<f64>>, samples: usize, injection: &str, seed: u64) -> PyResult<Bands> {
        let (series, mask) = Mask::from_options(&values);
        let s = self.ck.build_schedule().map_err(err)?;
        let res = impute_window(self.ck.inference_params(), &s, self.ck.mode, &series, &mask, samples, parse(injection)?, seed).map_err(err)?;
        Ok(Bands::new(res.summary, res.paths))
    }
}

/// Cumulative signal levels ᾱ_1..ᾱ_T of a linear schedule.
#[pyfunction]
#[pyo3(signature = (steps = 200, beta_start = 1e-4, beta_end = 0.02))]
fn alpha_bars(steps: usize, beta_start: f64, beta_end: f64) -> PyResult<Vec<f64>> {
    let spec = ScheduleSpec {
        steps,
        beta_start,
        beta_end,
        ..Default::default()
    };
    Ok(spec.build().map_err(err)?.alpha_bars().to_vec())
}

/// Trains on every length-`input_len` window of `channels` (one list per channel).
#[pyfunction]
#[pyo3(signature = (
    channels, input_len, num_blocks = 4, hidden_dim = 128, time_embed_dim = 128,
    steps = 50, beta_start = 4e-4, beta_end = 0.08, mode = "eps",
    iterations = 1000, batch_size = 64, learning_rate = 1e-3, ema_decay = 0.995, seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    channels: Vec<Vec<f64>>,
    input_len: usize,
    num_blocks: usize,
    hidden_dim: usize,
    time_embed_dim: usize,
    steps: usize,
    beta_start: f64,
    beta_end: f64,
    mode: &str,
    iterations: usize,
    batch_size: usize,
    learning_rate: f64,
    ema_decay: f64,
    seed: u64,
) -> PyResult<Model> {
    let names = (0..channels.len()).map(|c| format!("c{c}")).collect();
    let series = MultivariateSeries::from_channels(names, channels).map_err(err)?;
    let windows = make_windows(&series, input_len, 1, &SplitSpec::default(), SplitPart::All).map_err(err)?;
    let net = DenoiserConfig {
        input_len,
        num_blocks,
        hidden_dim,
        time_embed_dim,
        activation: Activation::Silu,
    };
    let schedule = ScheduleSpec {
        steps,
        beta_start,
        beta_end,
        ..Default::default()
    };
    let config = TrainConfig {
        mode: parse::<PredictionMode>(mode)?,
        iterations,
        batch_size,
        learning_rate,
        ema_decay,
        seed,
        ..Default::default()
    };
    let (ck, _) = py
        .detach(|| train_model(&net, schedule, config, &windows, None, None))
        .map_err(err)?;
    Ok(Model { ck })
}

/// Returns `(label, scores)` for one window against `(label, model)` experts.
#[pyfunction]
#[pyo3(signature = (experts, window, t_grid = None, k = 4, seed = 0, reduction = "min"))]
fn classify(
    experts: Vec<(String, PyRef<'_, Model>)>,
    window: Vec<f64>,
    t_grid: Option<Vec<usize>>,
    k: usize,
    seed: u64,
    reduction: &str,
) -> PyResult<(String, Vec<f64>)> {
    let experts = experts
        .iter()
        .map(|(label, m)| ExpertModel::from_checkpoint(label.clone(), &m.ck))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let steps = experts.first().map_or(0, |e| e.schedule.steps());
    let grid = t_grid.unwrap_or_else(|| default_t_grid(steps));
    let score = classify_window(&experts, &window, &grid, k, seed, parse::<ErrorReduction>(reduction)?).map_err(err)?;
    Ok((score.label, score.scores))
}

/// Synthetic series as one list per channel.
#[pyfunction]
#[pyo3(signature = (kind, n, channels = 1, seed = 0, noise = 0.0, period = None, phi = None, sigma = None))]
#[allow(clippy::too_many_arguments)]
fn synth(
    kind: &str,
    n: usize,
    channels: usize,
    seed: u64,
    noise: f64,
    period: Option<f64>,
    phi: Option<f64>,
    sigma: Option<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    let d = SynthParams::default();
    let params = SynthParams {
        noise,
        period: period.unwrap_or(d.period),
        phi: phi.unwrap_or(d.phi),
        sigma: sigma.unwrap_or(d.sigma),
        ..d
    };
    let series = synth_series(parse::<SynthKind>(kind)?, n, channels, &params, seed).map_err(err)?;
    (0..series.num_channels())
        .map(|c| series.channel(c).map_err(err))
        .collect()
}

#[pyfunction]
fn mse(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    gpd::metrics::mse(&pred, &truth).map_err(|e| PyTypeError::new_err(e.to_string()))
}

#[pyfunction]
fn mae(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    gpd::metrics::mae(&pred, &truth).map_err(|e| PyTypeError::new_err(e.to_string()))
}

#[pymodule]
fn gpd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Bands>()?;
    m.add_function(wrap_pyfunction!(alpha_bars, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    Ok(())
}
