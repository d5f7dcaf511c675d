//! One-parameter sweeps over antennas, lattice scale or scheme.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::RoundMetrics;
use crate::error::{Error, Result};
use crate::fl::experiment::{Experiment, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Antennas,
    Rho,
    Scheme,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" | "antennas" => Ok(Self::Antennas),
            "rho" => Ok(Self::Rho),
            "scheme" => Ok(Self::Scheme),
            _ => Err(Error::Config(format!("unknown sweep parameter {s:?}; use M, rho or scheme"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Antennas => "M",
            Self::Rho => "rho",
            Self::Scheme => "scheme",
        })
    }
}

/// One config per sweep value, each validated.
pub fn sweep_configs(base: &ExperimentConfig, param: SweepParam, values: &[String]) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            let bad = |e: String| Error::Config(format!("sweep value {v:?} for {param}: {e}"));
            match param {
                SweepParam::Antennas => c.system.antennas = v.trim().parse().map_err(|e| bad(format!("{e}")))?,
                SweepParam::Rho => c.lattice.rho = v.trim().parse().map_err(|e| bad(format!("{e}")))?,
                SweepParam::Scheme => c.experiment.schemes = vec![v.trim().parse::<Scheme>()?],
            }
            c.check().map_err(|e| bad(e.to_string()))?;
            Ok(c)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Rows of every point, in sweep-value order.
    pub rows: Vec<RoundMetrics>,
    pub second_moments: Vec<f64>,
}

pub fn run_sweep(base: &ExperimentConfig, param: SweepParam, values: &[String]) -> Result<SweepResult> {
    let configs = sweep_configs(base, param, values)?;
    let points = configs
        .into_par_iter()
        .map(|c| {
            let e = Experiment::new(c)?;
            let s2 = e.lattice.second_moment()?;
            Ok((e.run_all()?, s2))
        })
        .collect::<Result<Vec<_>>>()?;
    let second_moments = points.iter().map(|p| p.1).collect();
    Ok(SweepResult {
        rows: points.into_iter().flat_map(|p| p.0).collect(),
        second_moments,
    })
}
