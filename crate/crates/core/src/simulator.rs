//! Synthetic winding traces.
//!
//! The cable winds at constant speed from `start_rho` down to `stop_rho`.
//! Every rectified event in `(stop_rho, start_rho]` emits one record whose
//! time is the exact crossing instant. When winding stops at the boost
//! length `b`, the final event (which sits exactly at `b`) is kept too.
//! Readings come from an incremental encoder with an unknown scale, an
//! arbitrary initial register value and optional Gaussian jitter drawn from
//! a seeded ChaCha8 stream.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{enumerate_events, rectify};
use crate::model::CalibrationDesign;
use crate::EPS_GEOM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    /// Reading units per metre of true winding.
    pub scale: f64,
    /// Register value at the start of the trace.
    pub offset: f64,
    /// Standard deviation of the per-reading jitter.
    pub noise_sd: f64,
    pub seed: u64,
}

impl EncoderModel {
    pub fn new(scale: f64, offset: f64, noise_sd: f64, seed: u64) -> Result<Self> {
        let m = Self {
            scale,
            offset,
            noise_sd,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn ideal() -> Self {
        Self {
            scale: 1.0,
            offset: 0.0,
            noise_sd: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidEncoder(format!(
                "scale = {} must be > 0",
                self.scale
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidEncoder(format!(
                "noise_sd = {} must be >= 0",
                self.noise_sd
            )));
        }
        if !self.offset.is_finite() {
            return Err(Error::InvalidEncoder("offset must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub encoder_reading: f64,
    /// Ground truth, absent in hardware logs.
    pub truth_rho: Option<f64>,
    pub truth_event: Option<(usize, usize)>,
}

/// Detections recorded while winding, oldest first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationTrace {
    pub records: Vec<TraceRecord>,
    /// Free length when winding started, if known.
    pub start_rho: Option<f64>,
    /// Encoder length wound after the last record (or from the start when
    /// there is none) until winding stopped, if known.
    pub tail_wound: Option<f64>,
}

impl ObservationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn readings(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.encoder_reading).collect()
    }

    /// CSV with header `t,encoder_reading,truth_rho,truth_i,truth_j`.
    /// Values are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "encoder_reading", "truth_rho", "truth_i", "truth_j"])?;
        for r in &self.records {
            let opt = |x: Option<String>| x.unwrap_or_default();
            w.write_record([
                r.t.to_string(),
                r.encoder_reading.to_string(),
                opt(r.truth_rho.map(|x| x.to_string())),
                opt(r.truth_event.map(|(i, _)| i.to_string())),
                opt(r.truth_event.map(|(_, j)| j.to_string())),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trace CSV; the three truth columns may be missing or empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(ct), Some(cr)) = (col("t"), col("encoder_reading")) else {
            return Err(Error::Csv(
                "trace header must contain t and encoder_reading".into(),
            ));
        };
        let (c_rho, c_i, c_j) = (col("truth_rho"), col("truth_i"), col("truth_j"));

        let mut records = Vec::new();
        for (n, row) in rdr.records().enumerate() {
            let row = row?;
            let line = n + 2;
            let field = |c: Option<usize>| c.and_then(|c| row.get(c)).filter(|s| !s.is_empty());
            let num = |c: Option<usize>, name: &str| -> Result<Option<f64>> {
                field(c)
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|e| Error::Csv(format!("line {line}, {name}: {e}")))
                    })
                    .transpose()
            };
            let idx = |c: Option<usize>, name: &str| -> Result<Option<usize>> {
                field(c)
                    .map(|s| {
                        s.parse::<usize>()
                            .map_err(|e| Error::Csv(format!("line {line}, {name}: {e}")))
                    })
                    .transpose()
            };
            let t =
                num(Some(ct), "t")?.ok_or_else(|| Error::Csv(format!("line {line}: missing t")))?;
            let encoder_reading = num(Some(cr), "encoder_reading")?
                .ok_or_else(|| Error::Csv(format!("line {line}: missing encoder_reading")))?;
            let truth_event = match (idx(c_i, "truth_i")?, idx(c_j, "truth_j")?) {
                (Some(i), Some(j)) => Some((i, j)),
                _ => None,
            };
            records.push(TraceRecord {
                t,
                encoder_reading,
                truth_rho: num(c_rho, "truth_rho")?,
                truth_event,
            });
        }
        if records.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::Csv("trace times must be strictly increasing".into()));
        }
        Ok(Self {
            records,
            start_rho: None,
            tail_wound: None,
        })
    }
}

/// Winds `design`'s cable from `start_rho` to `stop_rho`.
pub fn simulate(
    design: &CalibrationDesign,
    encoder: &EncoderModel,
    start_rho: f64,
    stop_rho: f64,
) -> Result<ObservationTrace> {
    encoder.validate()?;
    let g = design.geometry();
    if !(g.b() - EPS_GEOM <= stop_rho
        && stop_rho <= start_rho
        && start_rho <= g.rho_max() + EPS_GEOM)
    {
        return Err(Error::InvalidRange(format!(
            "need b <= stop <= start <= rho_max, got stop = {stop_rho}, start = {start_rho}"
        )));
    }

    let noise =
        Normal::new(0.0, encoder.noise_sd).map_err(|e| Error::InvalidEncoder(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(encoder.seed);
    let mut read = |wound: f64| {
        let jitter = if encoder.noise_sd > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        encoder.offset + encoder.scale * wound + jitter
    };

    // Event times are measured from rho_max; shift them to the trace start.
    let shift = (g.rho_max() - start_rho) / g.v();
    let table = rectify(&enumerate_events(design));
    let mut records = Vec::new();
    let to_end = stop_rho <= g.b() + EPS_GEOM;
    for e in table.events() {
        let below_start = e.rho <= start_rho + EPS_GEOM;
        let above_stop = e.rho > stop_rho + EPS_GEOM || (to_end && e.rho >= stop_rho - EPS_GEOM);
        if start_rho > stop_rho && below_start && above_stop {
            records.push(TraceRecord {
                t: e.t - shift,
                encoder_reading: read(start_rho - e.rho),
                truth_rho: Some(e.rho),
                truth_event: Some((e.i, e.j)),
            });
        }
    }
    let last_rho = records
        .last()
        .and_then(|r| r.truth_rho)
        .unwrap_or(start_rho);
    let tail_wound = encoder.scale * (last_rho - stop_rho);
    Ok(ObservationTrace {
        records,
        start_rho: Some(start_rho),
        tail_wound: Some(tail_wound),
    })
}

/// Encoder length wound between records `a` and `b`.
pub fn wound_between(trace: &ObservationTrace, a: usize, b: usize) -> Result<f64> {
    let len = trace.records.len();
    for index in [a, b] {
        if index >= len {
            return Err(Error::RecordIndex { index, len });
        }
    }
    if a >= b {
        return Err(Error::InvalidRange(format!(
            "record {a} must precede record {b}"
        )));
    }
    Ok(trace.records[b].encoder_reading - trace.records[a].encoder_reading)
}
