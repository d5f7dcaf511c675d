//! Mean and standard-error series over seeds, ready for plotting.
//!
//! One row per `(scheme, antennas, rho, round)` with columns
//! `n, accuracy_mean, accuracy_stderr, dmse_mean, dmse_stderr, qmse_mean,
//! qmse_stderr, decode_rate, error_norm_mean, error_norm_stderr`.
//! Columns without data for a scheme are left empty.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::metrics::{mean_stderr, RoundMetrics};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub scheme: String,
    pub antennas: usize,
    pub rho: f64,
    pub round: usize,
    pub n: usize,
    pub accuracy_mean: f64,
    pub accuracy_stderr: f64,
    pub dmse_mean: Option<f64>,
    pub dmse_stderr: Option<f64>,
    pub qmse_mean: Option<f64>,
    pub qmse_stderr: Option<f64>,
    pub decode_rate: Option<f64>,
    pub error_norm_mean: f64,
    pub error_norm_stderr: f64,
}

type Key = (String, usize, u64, usize);

pub fn summarize(rows: &[RoundMetrics]) -> Vec<SeriesPoint> {
    let mut groups: BTreeMap<Key, Vec<&RoundMetrics>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.scheme.clone(), r.antennas, r.rho.to_bits(), r.round))
            .or_default()
            .push(r);
    }
    let opt = |v: Vec<f64>| {
        if v.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_stderr(&v);
            (Some(m), Some(s))
        }
    };
    let mut out: Vec<SeriesPoint> = groups
        .into_iter()
        .map(|((scheme, antennas, rho, round), g)| {
            let acc: Vec<f64> = g.iter().map(|r| r.test_accuracy).collect();
            let err: Vec<f64> = g.iter().map(|r| r.aggregate_error_norm).collect();
            let (accuracy_mean, accuracy_stderr) = mean_stderr(&acc);
            let (error_norm_mean, error_norm_stderr) = mean_stderr(&err);
            let (dmse_mean, dmse_stderr) = opt(g.iter().filter_map(|r| r.dmse).collect());
            let (qmse_mean, qmse_stderr) = opt(g.iter().filter_map(|r| r.qmse).collect());
            let dec: Vec<f64> = g
                .iter()
                .filter_map(|r| r.decode_success.map(|b| if b { 1.0 } else { 0.0 }))
                .collect();
            let decode_rate = opt(dec).0;
            SeriesPoint {
                scheme,
                antennas,
                rho: f64::from_bits(rho),
                round,
                n: g.len(),
                accuracy_mean,
                accuracy_stderr,
                dmse_mean,
                dmse_stderr,
                qmse_mean,
                qmse_stderr,
                decode_rate,
                error_norm_mean,
                error_norm_stderr,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.scheme, a.antennas, a.rho, a.round)
            .partial_cmp(&(&b.scheme, b.antennas, b.rho, b.round))
            .expect("finite rho")
    });
    out
}

pub fn write_series<W: Write>(out: W, points: &[SeriesPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
