//! Per-round metrics records and their CSV forms.
//!
//! `rounds.csv` columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `scheme` | `fedcpu`, `ideal`, `orthogonal_quantized` or `blind_equal` |
//! | `seed` | master seed of the run |
//! | `round` | 0-based communication round |
//! | `antennas` | server antennas `M` |
//! | `rho` | lattice scale |
//! | `a` | integer coefficients, `;`-separated (over-the-air schemes) |
//! | `b_norm` | Euclidean norm of the equalizer |
//! | `eta` | normalizing factor |
//! | `dmse` | closed-form decoding MSE per dimension |
//! | `qmse` | closed-form quantization MSE per dimension |
//! | `decode_success` | decoded point equals the true integer combination |
//! | `decode_error` | per-dimension squared distance decoded vs. true combination |
//! | `aggregate_error_norm` | `|dw_G - mean_k dw_k|`, distance to the ideal aggregate |
//! | `test_accuracy` | held-out accuracy after applying the round's update |
//!
//! Empty cells mean "not applicable". Wall-clock time is kept out of this
//! file so that replays are byte-identical; it goes to `timings.csv`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub scheme: String,
    pub seed: u64,
    pub round: usize,
    pub antennas: usize,
    pub rho: f64,
    pub a: Option<String>,
    pub b_norm: Option<f64>,
    pub eta: Option<f64>,
    pub dmse: Option<f64>,
    pub qmse: Option<f64>,
    pub decode_success: Option<bool>,
    pub decode_error: Option<f64>,
    pub aggregate_error_norm: f64,
    pub test_accuracy: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

pub fn write_rounds<W: Write>(out: W, rows: &[RoundMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rounds<R: Read>(input: R) -> Result<Vec<RoundMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct TimingRow<'a> {
    scheme: &'a str,
    seed: u64,
    round: usize,
    antennas: usize,
    rho: f64,
    wall_time: f64,
}

pub fn write_timings<W: Write>(out: W, rows: &[RoundMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(TimingRow {
            scheme: &r.scheme,
            seed: r.seed,
            round: r.round,
            antennas: r.antennas,
            rho: r.rho,
            wall_time: r.wall_time,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
