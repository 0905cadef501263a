//! Series ingestion, channel-independent windowing and synthetic data.

use std::f64::consts::PI;
use std::io;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GpdError, Result};
use crate::rng::substream;

/// `N × D` table stored column-wise. `None` marks a blank CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    pub names: Vec<String>,
    pub timestamps: Option<Vec<String>>,
    pub columns: Vec<Vec<Option<f64>>>,
}

impl MultivariateSeries {
    pub fn from_channels(names: Vec<String>, channels: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != channels.len() || channels.is_empty() {
            return Err(GpdError::InvalidArgument(
                "need one name per channel and at least one channel".into(),
            ));
        }
        let n = channels[0].len();
        if n == 0 || channels.iter().any(|c| c.len() != n) {
            return Err(GpdError::InvalidArgument("channels must be non-empty and equally long".into()));
        }
        Ok(Self {
            names,
            timestamps: None,
            columns: channels
                .into_iter()
                .map(|c| c.into_iter().map(Some).collect())
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_channels(&self) -> usize {
        self.columns.len()
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().flatten().any(Option::is_none)
    }

    /// Channel values, failing on the first blank cell.
    pub fn channel(&self, c: usize) -> Result<Vec<f64>> {
        self.columns[c]
            .iter()
            .enumerate()
            .map(|(row, v)| {
                v.ok_or_else(|| GpdError::MissingValue {
                    row: row + 1,
                    column: self.names[c].clone(),
                })
            })
            .collect()
    }

    pub fn require_complete(&self) -> Result<()> {
        for c in 0..self.num_channels() {
            self.channel(c)?;
        }
        Ok(())
    }

    /// Keeps only the named channels, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| GpdError::InvalidArgument(format!("no channel named '{name}'")))?;
            columns.push(self.columns[idx].clone());
        }
        Ok(Self {
            names: names.to_vec(),
            timestamps: self.timestamps.clone(),
            columns,
        })
    }
}

/// One univariate training/evaluation window.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesWindow {
    pub x0: Vec<f64>,
    pub channel: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Val,
    Test,
    All,
}

impl SplitPart {
    fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Val => "val",
            SplitPart::Test => "test",
            SplitPart::All => "all",
        }
    }
}

impl std::str::FromStr for SplitPart {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitPart::Train),
            "val" => Ok(SplitPart::Val),
            "test" => Ok(SplitPart::Test),
            "all" => Ok(SplitPart::All),
            other => Err(GpdError::Config(format!("unknown split part '{other}'"))),
        }
    }
}

/// Chronological train/val/test fractions. Windows never straddle parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(*f > 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(GpdError::Config(format!(
                "split fractions must be positive and sum to 1, got {}/{}/{}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Half-open row range of `part` in a series of `n` rows.
    pub fn range(&self, n: usize, part: SplitPart) -> (usize, usize) {
        let train_end = (n as f64 * self.train).floor() as usize;
        let val_end = (train_end + (n as f64 * self.val).floor() as usize).min(n);
        match part {
            SplitPart::Train => (0, train_end),
            SplitPart::Val => (train_end, val_end),
            SplitPart::Test => (val_end, n),
            SplitPart::All => (0, n),
        }
    }
}

/// Windows of length `window` at offsets `0, stride, 2·stride, …` inside
/// `part`, channel by channel. Offsets are reported relative to the start of
/// the series.
pub fn make_windows(
    series: &MultivariateSeries,
    window: usize,
    stride: usize,
    split: &SplitSpec,
    part: SplitPart,
) -> Result<Vec<SeriesWindow>> {
    if window == 0 || stride == 0 {
        return Err(GpdError::InvalidArgument("window and stride must be positive".into()));
    }
    if part != SplitPart::All {
        split.validate()?;
    }
    let (start, end) = split.range(series.len(), part);
    let part_len = end - start;
    if part_len < window {
        return Err(GpdError::SplitTooShort {
            part: part.name(),
            len: part_len,
            window,
        });
    }
    let per_channel = (part_len - window) / stride + 1;
    let mut out = Vec::with_capacity(per_channel * series.num_channels());
    for c in 0..series.num_channels() {
        let values = series.channel(c)?;
        for k in 0..per_channel {
            let offset = start + k * stride;
            out.push(SeriesWindow {
                x0: values[offset..offset + window].to_vec(),
                channel: c,
                offset,
            });
        }
    }
    Ok(out)
}

/// Reads a CSV with a header row. The first column is taken as an opaque
/// timestamp when any of its cells is non-numeric; other cells must be
/// numeric or blank.
pub fn load_csv(path: impl AsRef<Path>, channels: Option<&[String]>) -> Result<MultivariateSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let series = read_csv(file).map_err(|e| match e {
        GpdError::Parse { message, .. } => GpdError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    match channels {
        Some(names) => series.select(names),
        None => Ok(series),
    }
}

pub fn read_csv(reader: impl io::Read) -> Result<MultivariateSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() || header.is_empty() {
        return Err(parse_error("no data rows".into()));
    }

    let has_timestamp = rows
        .iter()
        .any(|r| !r[0].is_empty() && r[0].parse::<f64>().is_err());
    let first = usize::from(has_timestamp);
    if header.len() <= first {
        return Err(parse_error("no value columns".into()));
    }

    let mut columns = vec![Vec::with_capacity(rows.len()); header.len() - first];
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row[first..].iter().enumerate() {
            let v = if cell.is_empty() {
                None
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Some(v),
                    _ => {
                        return Err(parse_error(format!(
                            "row {}, column '{}': '{cell}' is not a finite number",
                            i + 1,
                            header[j + first]
                        )))
                    }
                }
            };
            columns[j].push(v);
        }
    }
    Ok(MultivariateSeries {
        names: header[first..].to_vec(),
        timestamps: has_timestamp.then(|| rows.iter().map(|r| r[0].clone()).collect()),
        columns,
    })
}

fn parse_error(message: String) -> GpdError {
    GpdError::Parse {
        path: "<csv>".into(),
        message,
    }
}

/// Writes the series in the same CSV dialect it is read from.
pub fn write_csv(series: &MultivariateSeries, writer: impl io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = Vec::new();
    if series.timestamps.is_some() {
        header.push("timestamp".into());
    }
    header.extend(series.names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..series.len() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(ts) = &series.timestamps {
            rec.push(ts[i].clone());
        }
        for col in &series.columns {
            rec.push(col[i].map(format_float).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(series: &MultivariateSeries, path: impl AsRef<Path>) -> Result<()> {
    write_csv(series, std::fs::File::create(path)?)
}

/// Nine significant digits, `%.9g` style.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Sine,
    Ar1,
    TrendSine,
}

impl std::str::FromStr for SynthKind {
    type Err = GpdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SynthKind::Sine),
            "ar1" => Ok(SynthKind::Ar1),
            "trend_sine" => Ok(SynthKind::TrendSine),
            other => Err(GpdError::Config(format!("unknown synth kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for SynthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SynthKind::Sine => "sine",
            SynthKind::Ar1 => "ar1",
            SynthKind::TrendSine => "trend_sine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub period: f64,
    pub amplitude: f64,
    /// Additive Gaussian noise for the sine kinds.
    pub noise: f64,
    pub phi: f64,
    pub sigma: f64,
    /// AR(1) starting value; drawn from the stationary law when absent.
    pub start: Option<f64>,
    pub slope: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            period: 32.0,
            amplitude: 1.0,
            noise: 0.0,
            phi: 0.9,
            sigma: 0.3,
            start: None,
            slope: 0.001,
        }
    }
}

/// Deterministic synthetic series; each channel has its own random stream.
pub fn synth(kind: SynthKind, n: usize, d: usize, params: &SynthParams, seed: u64) -> Result<MultivariateSeries> {
    if n == 0 || d == 0 {
        return Err(GpdError::InvalidArgument("synth needs N >= 1 and D >= 1".into()));
    }
    if kind == SynthKind::Ar1 && params.phi.abs() >= 1.0 {
        return Err(GpdError::InvalidArgument(format!(
            "AR(1) requires |phi| < 1, got {}",
            params.phi
        )));
    }
    if kind != SynthKind::Ar1 && !(params.period > 0.0) {
        return Err(GpdError::InvalidArgument("period must be positive".into()));
    }
    let channels = (0..d)
        .map(|c| {
            let mut rng = substream(seed, "synth", c as u64);
            match kind {
                SynthKind::Sine | SynthKind::TrendSine => {
                    let phase = rng.random_range(0.0..2.0 * PI);
                    let slope = if kind == SynthKind::TrendSine { params.slope } else { 0.0 };
                    (0..n)
                        .map(|i| {
                            let mut v = params.amplitude * (2.0 * PI * i as f64 / params.period + phase).sin()
                                + slope * i as f64;
                            if params.noise > 0.0 {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                v += params.noise * z;
                            }
                            v
                        })
                        .collect()
                }
                SynthKind::Ar1 => {
                    let stationary_sd = params.sigma / (1.0 - params.phi * params.phi).sqrt();
                    let mut x = params.start.unwrap_or_else(|| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        stationary_sd * z
                    });
                    let mut out = Vec::with_capacity(n);
                    for _ in 0..n {
                        out.push(x);
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x = params.phi * x + params.sigma * z;
                    }
                    out
                }
            }
        })
        .collect();
    MultivariateSeries::from_channels((0..d).map(|c| format!("ch{c}")).collect(), channels)
}
