//! Parsing of constellation sources and SNR grids given on the command line.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use hwdetect_core::{load_constellation, make_qam, make_sapsk, Constellation, SapskSpec};

/// Where a constellation comes from: a generator shorthand or a file.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstellationSource {
    Qam(usize),
    Sapsk(SapskSpec),
    File(PathBuf),
}

impl ConstellationSource {
    pub fn load(&self) -> Result<Constellation> {
        Ok(match self {
            Self::Qam(m) => make_qam(*m)?,
            Self::Sapsk(spec) => make_sapsk(*spec)?,
            Self::File(path) => load_constellation(path)?,
        })
    }
}

impl std::fmt::Display for ConstellationSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Qam(m) => write!(f, "qam:{m}"),
            Self::Sapsk(s) => write!(f, "sapsk:{}:{}:{}", s.order, s.levels, s.spacing),
            Self::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for ConstellationSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split(':').collect();
        match fields.as_slice() {
            ["qam", m] => Ok(Self::Qam(m.parse().with_context(|| format!("bad QAM order in {s:?}"))?)),
            ["sapsk", m, gamma, rho] => {
                let order = m.parse().with_context(|| format!("bad SAPSK order in {s:?}"))?;
                let levels = gamma.parse().with_context(|| format!("bad ring count in {s:?}"))?;
                let spacing = rho.parse().with_context(|| format!("bad ring spacing in {s:?}"))?;
                Ok(Self::Sapsk(SapskSpec::new(order, levels, spacing)?))
            }
            ["qam", ..] | ["sapsk", ..] => {
                bail!("malformed shorthand {s:?}; expected qam:M or sapsk:M:GAMMA:RHO")
            }
            _ => Ok(Self::File(PathBuf::from(s))),
        }
    }
}

/// Inclusive SNR grid `start:step:stop` in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl SnrGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl std::fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.step, self.stop)
    }
}

impl FromStr for SnrGrid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("SNR grid {s:?} is not start:step:stop"))?;
        let [start, step, stop] = parts[..] else {
            bail!("SNR grid {s:?} is not start:step:stop");
        };
        ensure!(
            start.is_finite() && stop.is_finite() && step.is_finite(),
            "SNR grid {s:?} must be finite"
        );
        ensure!(step > 0.0, "SNR step must be positive in {s:?}");
        ensure!(stop >= start, "SNR grid {s:?} has stop below start");
        Ok(Self { start, step, stop })
    }
}

/// Comma-separated list of values, e.g. `0.5,1,1.5`.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let values = s
        .split(',')
        .map(|x| x.trim().parse::<T>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("bad list {s:?}"))?;
    ensure!(!values.is_empty(), "empty list");
    Ok(values)
}
