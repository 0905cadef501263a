//! Binary checkpoint file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            4 bytes  "GPDM"
//! version          u32      1
//! input_len        u32
//! num_blocks       u32
//! hidden_dim       u32
//! time_embed_dim   u32
//! activation       u8       0 = silu
//! steps            u32
//! beta_start       f64
//! beta_end         f64
//! schedule kind    u8       0 = linear
//! variance mode    u8       0 = posterior, 1 = beta
//! prediction mode  u8       0 = epsilon, 1 = x0
//! param count      u64      number of f64 values per copy
//! live params      f64 × count
//! ema params       f64 × count
//! ```
//!
//! Parameter order: for each hidden block then the head, the weight
//! (`fan_in × fan_out`, row-major) followed by the bias.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::denoiser::{Activation, DenoiserConfig, DenoiserParams};
use crate::error::{GpdError, Result};
use crate::schedule::{NoiseSchedule, PredictionMode, ScheduleKind, ScheduleSpec, VarianceMode};

pub const MAGIC: &[u8; 4] = b"GPDM";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model: live and EMA weights plus the schedule and mode they
/// were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub schedule: ScheduleSpec,
    pub mode: PredictionMode,
    pub params: DenoiserParams,
    pub ema: DenoiserParams,
}

impl Checkpoint {
    pub fn config(&self) -> &DenoiserConfig {
        self.params.config()
    }

    pub fn window_len(&self) -> usize {
        self.config().input_len
    }

    /// Weights used for inference.
    pub fn inference_params(&self) -> &DenoiserParams {
        &self.ema
    }

    pub fn build_schedule(&self) -> Result<NoiseSchedule> {
        self.schedule.build()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.config();
        let count = self.params.num_params();
        let mut buf = Vec::with_capacity(64 + 16 * count);
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, FORMAT_VERSION);
        put_u32(&mut buf, cfg.input_len as u32);
        put_u32(&mut buf, cfg.num_blocks as u32);
        put_u32(&mut buf, cfg.hidden_dim as u32);
        put_u32(&mut buf, cfg.time_embed_dim as u32);
        buf.push(match cfg.activation {
            Activation::Silu => 0,
        });
        put_u32(&mut buf, self.schedule.steps as u32);
        buf.extend_from_slice(&self.schedule.beta_start.to_le_bytes());
        buf.extend_from_slice(&self.schedule.beta_end.to_le_bytes());
        buf.push(match self.schedule.kind {
            ScheduleKind::Linear => 0,
        });
        buf.push(match self.schedule.variance_mode {
            VarianceMode::Posterior => 0,
            VarianceMode::Beta => 1,
        });
        buf.push(match self.mode {
            PredictionMode::Epsilon => 0,
            PredictionMode::X0 => 1,
        });
        buf.extend_from_slice(&(count as u64).to_le_bytes());
        for v in self.params.values().chain(self.ema.values()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(GpdError::Checkpoint("bad magic, not a GPDM file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(GpdError::Checkpoint(format!("unsupported format version {version}")));
        }
        let input_len = r.u32()? as usize;
        let num_blocks = r.u32()? as usize;
        let hidden_dim = r.u32()? as usize;
        let time_embed_dim = r.u32()? as usize;
        let activation = match r.u8()? {
            0 => Activation::Silu,
            other => return Err(GpdError::Checkpoint(format!("unknown activation tag {other}"))),
        };
        let config = DenoiserConfig {
            input_len,
            num_blocks,
            hidden_dim,
            time_embed_dim,
            activation,
        };
        config
            .validate()
            .map_err(|e| GpdError::Checkpoint(e.to_string()))?;

        let steps = r.u32()? as usize;
        let beta_start = r.f64()?;
        let beta_end = r.f64()?;
        let kind = match r.u8()? {
            0 => ScheduleKind::Linear,
            other => return Err(GpdError::Checkpoint(format!("unknown schedule tag {other}"))),
        };
        let variance_mode = match r.u8()? {
            0 => VarianceMode::Posterior,
            1 => VarianceMode::Beta,
            other => return Err(GpdError::Checkpoint(format!("unknown variance tag {other}"))),
        };
        let mode = match r.u8()? {
            0 => PredictionMode::Epsilon,
            1 => PredictionMode::X0,
            other => return Err(GpdError::Checkpoint(format!("unknown prediction tag {other}"))),
        };
        let schedule = ScheduleSpec {
            steps,
            beta_start,
            beta_end,
            kind,
            variance_mode,
        };
        schedule
            .build()
            .map_err(|e| GpdError::Checkpoint(e.to_string()))?;

        let mut params = DenoiserParams::zeros(&config)?;
        let count = r.u64()? as usize;
        if count != params.num_params() {
            return Err(GpdError::Checkpoint(format!(
                "parameter count {count} does not match config ({})",
                params.num_params()
            )));
        }
        let mut ema = params.clone();
        for v in params.values_mut() {
            *v = r.f64()?;
        }
        for v in ema.values_mut() {
            *v = r.f64()?;
        }
        if r.pos != bytes.len() {
            return Err(GpdError::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            schedule,
            mode,
            params,
            ema,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(GpdError::Checkpoint("truncated file".into()));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
