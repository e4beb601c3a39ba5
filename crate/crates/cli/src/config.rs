//! Optional TOML configuration layered over an experiment's defaults.
//!
//! Every key is optional; anything left out keeps the built-in default.
//! Command-line flags win over the file.
//!
//! ```toml
//! [run]
//! samples = 20000
//! runs = 20
//! seed = 7
//! smoothing = 201
//!
//! [system]
//! input = "ar1"            # or "white"
//! ar1 = 0.9
//! taps = [1.0, 0.5, 0.25]
//! taps_after = [0.8, 0.4, 0.2]
//! snr_db = 10.0
//!
//! [model]
//! delta = 1e-6
//! range_sigmas = 2.5
//! input_half_range = 2.5
//! lmst_half_range = 3.0
//! schedule = "sequential"  # or "simultaneous"
//!
//! [tensor]                 # also [itensor]
//! mu = 0.05
//! rank = 10
//! modes = 3
//! grid = 20
//!
//! [cascade]                # also [icascade]
//! mu2 = 0.1
//! rank = 1
//! modes = 1
//! grid = 10
//! mu1 = 0.01
//! taps = 7
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use tensorid::adaptive::ModeSchedule;
use tensorid::experiments::{CascadeParams, ExperimentSpec, InputProcess, TensorParams};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub model: ModelSection,
    pub tensor: Option<TensorSection>,
    pub itensor: Option<TensorSection>,
    pub cascade: Option<CascadeSection>,
    pub icascade: Option<CascadeSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub samples: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub smoothing: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Ar1,
    White,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub input: Option<InputKind>,
    pub ar1: Option<f64>,
    pub taps: Option<Vec<f64>>,
    pub taps_after: Option<Vec<f64>>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Sequential,
    Simultaneous,
}

impl From<ScheduleKind> for ModeSchedule {
    fn from(k: ScheduleKind) -> Self {
        match k {
            ScheduleKind::Sequential => ModeSchedule::Sequential,
            ScheduleKind::Simultaneous => ModeSchedule::Simultaneous,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub delta: Option<f64>,
    pub range_sigmas: Option<f64>,
    pub input_half_range: Option<f64>,
    pub lmst_half_range: Option<f64>,
    pub schedule: Option<ScheduleKind>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSection {
    pub mu: Option<f64>,
    pub rank: Option<usize>,
    pub modes: Option<usize>,
    pub grid: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSection {
    pub mu2: Option<f64>,
    pub rank: Option<usize>,
    pub modes: Option<usize>,
    pub grid: Option<usize>,
    pub mu1: Option<f64>,
    pub taps: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Writes every override present in the file into `spec`.
    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(n) = self.run.samples {
            spec.n_samples = n;
        }
        if let Some(l) = self.run.runs {
            spec.runs = l;
        }

        let sys = &self.system;
        match (sys.input, sys.ar1) {
            (Some(InputKind::White), Some(_)) => bail!("system.ar1 cannot be combined with input = \"white\""),
            (Some(InputKind::White), None) => spec.input = InputProcess::White,
            (Some(InputKind::Ar1), a) => {
                let a = a.or(match spec.input {
                    InputProcess::Ar1 { a } => Some(a),
                    InputProcess::White => None,
                });
                spec.input = InputProcess::Ar1 { a: a.unwrap_or(tensorid::experiments::DEFAULT_AR1) };
            }
            (None, Some(a)) => spec.input = InputProcess::Ar1 { a },
            (None, None) => {}
        }
        if let Some(t) = &sys.taps {
            spec.taps = t.clone();
        }
        if let Some(t) = &sys.taps_after {
            spec.taps_after = Some(t.clone());
        }
        if let Some(s) = sys.snr_db {
            spec.snr_db = s;
        }

        let m = &self.model;
        if let Some(d) = m.delta {
            spec.delta = d;
        }
        if let Some(c) = m.range_sigmas {
            spec.range_sigmas = c;
        }
        if let Some(r) = m.input_half_range {
            spec.input_half_range = Some(r);
        }
        if let Some(r) = m.lmst_half_range {
            spec.lmst_half_range = Some(r);
        }
        if let Some(s) = m.schedule {
            spec.schedule = s.into();
        }

        let p = &mut spec.params;
        if let Some(t) = &self.tensor {
            t.apply(&mut p.tensor);
        }
        if let Some(t) = &self.itensor {
            t.apply(&mut p.itensor);
        }
        if let Some(c) = &self.cascade {
            c.apply(&mut p.cascade);
        }
        if let Some(c) = &self.icascade {
            c.apply(&mut p.icascade);
        }
        Ok(())
    }
}

impl TensorSection {
    fn apply(&self, t: &mut TensorParams) {
        t.mu = self.mu.unwrap_or(t.mu);
        t.rank = self.rank.unwrap_or(t.rank);
        t.modes = self.modes.unwrap_or(t.modes);
        t.grid = self.grid.unwrap_or(t.grid);
    }
}

impl CascadeSection {
    fn apply(&self, c: &mut CascadeParams) {
        c.mu2 = self.mu2.unwrap_or(c.mu2);
        c.rank = self.rank.unwrap_or(c.rank);
        c.modes = self.modes.unwrap_or(c.modes);
        c.grid = self.grid.unwrap_or(c.grid);
        c.mu1 = self.mu1.unwrap_or(c.mu1);
        c.taps = self.taps.unwrap_or(c.taps);
    }
}
