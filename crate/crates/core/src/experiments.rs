//! Unknown systems, input processes and the Monte-Carlo identification loop.
//!
//! Each run `l = 1..=L` uses the seed `seed_base + l`. Three independent
//! ChaCha streams are derived from it: one for the input process, one for
//! the measurement noise and one for model initialization, so every
//! algorithm sees the same input and noise within a run.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::adaptive::{AdaptiveModel, DecomposedInterpTensor, LmsFilter, LmsModel, ModeSchedule, DEFAULT_DELTA};
use crate::cascade::{LmstModel, TlmsModel};
use crate::complexity::{CostAlgorithm, CostInput, ReportShapes};
use crate::error::{Error, Result};
use crate::quantize::Discretizer;

/// NMSE reported when the model is exact (would be `-inf` dB).
pub const NMSE_FLOOR_DB: f64 = -200.0;

/// Samples with `|d_n|` below this are left out of the NMSE average.
pub const NMSE_EXCLUDE_BELOW: f64 = 1e-12;

const INPUT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

/// Independent generator for one purpose within one run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `x_n = a x_{n-1} + sqrt(1 - a^2) nu_n` with `x_0 = 0` and standard Gaussian `nu`.
pub fn gen_ar1<R: Rng + ?Sized>(a: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::invalid(format!("AR(1) coefficient must lie in [0, 1), got {a}")));
    }
    let gain = (1.0 - a * a).sqrt();
    let mut prev = 0.0;
    Ok((0..n)
        .map(|_| {
            let nu: f64 = StandardNormal.sample(rng);
            prev = a * prev + gain * nu;
            prev
        })
        .collect())
}

/// Unit-variance white Gaussian noise.
pub fn gen_white<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputProcess {
    Ar1 { a: f64 },
    White,
}

impl InputProcess {
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            InputProcess::Ar1 { a } => gen_ar1(a, n, rng),
            InputProcess::White => Ok(gen_white(n, rng)),
        }
    }

    /// Lag-`k` autocorrelation of the stationary process.
    fn autocorrelation(&self, k: usize) -> f64 {
        match *self {
            InputProcess::Ar1 { a } => a.powi(k as i32),
            InputProcess::White => f64::from(k == 0),
        }
    }
}

/// Static (possibly short-memory) nonlinearities of the unknown systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// `2x / (1 + |x|^2)`.
    Saturation,
    /// `sin^2(x_n) + sin^3(x_{n-1}) + sin^4(x_{n-2})`.
    SinPoly,
    /// `x^2`.
    Square,
    /// `|x|^2`.
    MagSq,
    /// `x`, for linear test systems.
    Identity,
}

impl Nonlinearity {
    /// Output at time `n` given the current and the two previous inputs.
    pub fn eval(&self, x0: f64, x1: f64, x2: f64) -> f64 {
        match self {
            Nonlinearity::Saturation => 2.0 * x0 / (1.0 + x0 * x0),
            Nonlinearity::SinPoly => x0.sin().powi(2) + x1.sin().powi(3) + x2.sin().powi(4),
            Nonlinearity::Square => x0 * x0,
            Nonlinearity::MagSq => x0.abs().powi(2),
            Nonlinearity::Identity => x0,
        }
    }

    /// Applies the nonlinearity along a sequence; samples before the start are zero.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| {
                let lag = |k: usize| if n >= k { x[n - k] } else { 0.0 };
                self.eval(x[n], lag(1), lag(2))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Nonlinearity, then FIR filter.
    Hammerstein,
    /// FIR filter, then nonlinearity.
    Wiener,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnknownSystem {
    pub structure: Structure,
    pub nonlinearity: Nonlinearity,
    pub taps: Vec<f64>,
    /// Taps in effect from sample index `switch_at` (zero-based) on.
    pub switch: Option<(usize, Vec<f64>)>,
}

impl UnknownSystem {
    /// Noise-free desired signal for input `x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.taps.is_empty() {
            return Err(Error::invalid("unknown system needs at least one FIR tap"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("system input must be finite"));
        }
        Ok(match self.structure {
            Structure::Hammerstein => self.filter(&self.nonlinearity.apply(x)),
            Structure::Wiener => self.nonlinearity.apply(&self.filter(x)),
        })
    }

    fn taps_at(&self, n: usize) -> &[f64] {
        match &self.switch {
            Some((at, after)) if n >= *at => after,
            _ => &self.taps,
        }
    }

    fn filter(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| self.taps_at(n).iter().enumerate().filter(|&(p, _)| p <= n).map(|(p, h)| h * x[n - p]).sum())
            .collect()
    }
}

/// Adds white Gaussian noise at `snr_db` relative to the sample variance of `d`.
/// `snr_db = +inf` returns `d` unchanged.
pub fn add_noise_snr<R: Rng + ?Sized>(d: &[f64], snr_db: f64, rng: &mut R) -> Result<Vec<f64>> {
    if snr_db == f64::INFINITY {
        return Ok(d.to_vec());
    }
    if snr_db.is_nan() || d.is_empty() {
        return Err(Error::invalid("noise needs a signal and a valid SNR"));
    }
    let var = variance(d);
    if var <= 0.0 {
        return Err(Error::invalid("cannot set an SNR for a constant signal"));
    }
    let std = (var / 10f64.powf(snr_db / 10.0)).sqrt();
    Ok(d.iter()
        .map(|v| {
            let eta: f64 = StandardNormal.sample(rng);
            v + std * eta
        })
        .collect())
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// The seven identification algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Lms,
    Tensor,
    ITensor,
    Tlms,
    ITlms,
    Lmst,
    ILmst,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Lms,
        Algorithm::Tensor,
        Algorithm::ITensor,
        Algorithm::Tlms,
        Algorithm::ITlms,
        Algorithm::Lmst,
        Algorithm::ILmst,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Lms => "lms",
            Algorithm::Tensor => "tensor",
            Algorithm::ITensor => "itensor",
            Algorithm::Tlms => "tlms",
            Algorithm::ITlms => "itlms",
            Algorithm::Lmst => "lmst",
            Algorithm::ILmst => "ilmst",
        }
    }

    pub fn is_interpolated(&self) -> bool {
        matches!(self, Algorithm::ITensor | Algorithm::ITlms | Algorithm::ILmst)
    }

    /// Classical counterpart of an interpolated algorithm (identity otherwise).
    pub fn classical(&self) -> Algorithm {
        match self {
            Algorithm::ITensor => Algorithm::Tensor,
            Algorithm::ITlms => Algorithm::Tlms,
            Algorithm::ILmst => Algorithm::Lmst,
            other => *other,
        }
    }

    /// Whether the algorithm is offered for a system structure.
    pub fn fits(&self, structure: Structure) -> bool {
        match self {
            Algorithm::Tlms | Algorithm::ITlms => structure == Structure::Hammerstein,
            Algorithm::Lmst | Algorithm::ILmst => structure == Structure::Wiener,
            _ => true,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Tensor-only learner parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorParams {
    pub mu: f64,
    pub rank: usize,
    pub modes: usize,
    pub grid: usize,
}

/// Cascade parameters: tensor stage (`mu2`, R, M, I) and FIR stage (`mu1`, P).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeParams {
    pub mu2: f64,
    pub rank: usize,
    pub modes: usize,
    pub grid: usize,
    pub mu1: f64,
    pub taps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBlocks {
    pub cascade: CascadeParams,
    pub icascade: CascadeParams,
    pub tensor: TensorParams,
    pub itensor: TensorParams,
}

const fn cp(mu2: f64, rank: usize, modes: usize, grid: usize, mu1: f64, taps: usize) -> CascadeParams {
    CascadeParams {
        mu2,
        rank,
        modes,
        grid,
        mu1,
        taps,
    }
}

const fn tp(mu: f64, rank: usize, modes: usize, grid: usize) -> TensorParams {
    TensorParams { mu, rank, modes, grid }
}

/// Standard parameter blocks of experiments 1..=6.
pub const PARAMS: [ParamBlocks; 6] = [
    ParamBlocks {
        cascade: cp(0.009, 1, 1, 50, 0.009, 7),
        icascade: cp(0.01, 1, 1, 10, 0.01, 7),
        tensor: tp(0.05, 50, 7, 25),
        itensor: tp(0.1, 10, 3, 10),
    },
    ParamBlocks {
        cascade: cp(0.1, 1, 1, 50, 0.0075, 5),
        icascade: cp(0.01, 1, 1, 10, 0.001, 5),
        tensor: tp(0.01, 50, 5, 23),
        itensor: tp(0.1, 10, 3, 10),
    },
    ParamBlocks {
        cascade: cp(0.008, 1, 3, 50, 0.005, 5),
        icascade: cp(0.01, 10, 2, 16, 0.01, 5),
        tensor: tp(0.025, 100, 7, 25),
        itensor: tp(0.4, 20, 3, 10),
    },
    ParamBlocks {
        cascade: cp(0.05, 10, 2, 16, 0.002, 7),
        icascade: cp(0.01, 10, 2, 16, 0.01, 7),
        tensor: tp(0.05, 200, 8, 25),
        itensor: tp(0.1, 20, 3, 32),
    },
    ParamBlocks {
        cascade: cp(0.1, 30, 3, 50, 0.02, 3),
        icascade: cp(0.1, 16, 3, 20, 0.8, 3),
        tensor: tp(0.09, 40, 3, 30),
        itensor: tp(0.1, 40, 3, 20),
    },
    ParamBlocks {
        cascade: cp(0.4, 10, 4, 40, 0.001, 4),
        icascade: cp(0.5, 16, 2, 30, 0.001, 2),
        tensor: tp(0.4, 20, 3, 20),
        itensor: tp(0.4, 20, 3, 10),
    },
];

/// First experiment's FIR taps before and after the mid-run switch.
pub const EXP1_TAPS: [f64; 7] = [0.9, -0.6, 0.3, -0.15, 0.1, -0.025, 0.005];
pub const EXP1_TAPS_AFTER: [f64; 7] = [0.6, -0.4, 0.25, -0.15, 0.1, -0.05, 0.001];

/// Default FIR taps for the experiments that do not fix their own.
pub const DEFAULT_TAPS_5: [f64; 5] = [1.0, 0.5, -0.25, 0.125, -0.0625];
pub const DEFAULT_TAPS_3: [f64; 3] = [1.0, 0.5, 0.25];

pub const DEFAULT_AR1: f64 = 0.9;
pub const DEFAULT_SAMPLES: usize = 20_000;
pub const DEFAULT_RUNS: usize = 20;
pub const DEFAULT_SNR_DB: f64 = 10.0;
/// Grid half-range in units of the standard deviation of the stage input.
pub const DEFAULT_RANGE_SIGMAS: f64 = 2.5;

/// Full description of one identification experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: u8,
    pub input: InputProcess,
    pub structure: Structure,
    pub nonlinearity: Nonlinearity,
    pub taps: Vec<f64>,
    /// Taps after the switch at `n_samples / 2`, if the system changes mid-run.
    pub taps_after: Option<Vec<f64>>,
    pub snr_db: f64,
    pub n_samples: usize,
    pub runs: usize,
    pub params: ParamBlocks,
    pub delta: f64,
    /// Grid half-range for tensors fed by the raw input; `None` uses
    /// `range_sigmas` input standard deviations.
    pub input_half_range: Option<f64>,
    /// Grid half-range for the tensor behind the FIR stage; `None` uses
    /// `range_sigmas` standard deviations of the true linear-stage output.
    pub lmst_half_range: Option<f64>,
    /// Multiplier of the stage-input standard deviation used when a half-range is not given.
    pub range_sigmas: f64,
    pub schedule: ModeSchedule,
}

impl ExperimentSpec {
    /// Defaults for experiment `id` in 1..=6.
    pub fn standard(id: u8) -> Result<Self> {
        use Nonlinearity::*;
        use Structure::*;
        let ar1 = InputProcess::Ar1 { a: DEFAULT_AR1 };
        let (input, structure, nonlinearity, taps, after) = match id {
            1 => (ar1, Hammerstein, Saturation, EXP1_TAPS.to_vec(), Some(EXP1_TAPS_AFTER.to_vec())),
            2 => (ar1, Wiener, Saturation, DEFAULT_TAPS_5.to_vec(), Some(switched(&DEFAULT_TAPS_5))),
            3 => (ar1, Wiener, SinPoly, DEFAULT_TAPS_5.to_vec(), None),
            4 => (ar1, Hammerstein, SinPoly, EXP1_TAPS.to_vec(), None),
            5 => (InputProcess::White, Hammerstein, Square, DEFAULT_TAPS_3.to_vec(), None),
            6 => (InputProcess::White, Wiener, MagSq, DEFAULT_TAPS_3.to_vec(), None),
            _ => return Err(Error::invalid(format!("experiment must be 1..=6, got {id}"))),
        };
        Ok(Self {
            id,
            input,
            structure,
            nonlinearity,
            taps,
            taps_after: after,
            snr_db: DEFAULT_SNR_DB,
            n_samples: DEFAULT_SAMPLES,
            runs: DEFAULT_RUNS,
            params: PARAMS[usize::from(id) - 1],
            delta: DEFAULT_DELTA,
            input_half_range: None,
            lmst_half_range: None,
            range_sigmas: DEFAULT_RANGE_SIGMAS,
            schedule: ModeSchedule::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.runs == 0 {
            return Err(Error::invalid("samples and runs must be positive"));
        }
        if self.taps.is_empty() {
            return Err(Error::invalid("system taps must be nonempty"));
        }
        if let InputProcess::Ar1 { a } = self.input {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::invalid(format!("AR(1) coefficient must lie in [0, 1), got {a}")));
            }
        }
        Ok(())
    }

    /// Sample index of the system switch, if any.
    pub fn switch_at(&self) -> Option<usize> {
        self.taps_after.as_ref().map(|_| self.n_samples / 2)
    }

    pub fn system(&self) -> UnknownSystem {
        UnknownSystem {
            structure: self.structure,
            nonlinearity: self.nonlinearity,
            taps: self.taps.clone(),
            switch: self.taps_after.clone().map(|t| (self.n_samples / 2, t)),
        }
    }

    /// Half-range of the grid for tensors on the raw input.
    pub fn input_range(&self) -> f64 {
        self.input_half_range.unwrap_or(self.range_sigmas)
    }

    /// Half-range of the grid for the tensor behind the FIR stage, from the
    /// stationary standard deviation of the true linear stage output.
    pub fn lmst_range(&self) -> f64 {
        self.lmst_half_range.unwrap_or_else(|| {
            let h = &self.taps;
            let mut var = 0.0;
            for (i, hi) in h.iter().enumerate() {
                for (j, hj) in h.iter().enumerate() {
                    var += hi * hj * self.input.autocorrelation(i.abs_diff(j));
                }
            }
            self.range_sigmas * var.sqrt()
        })
    }

    /// Cost-model inputs of the four tensor-based algorithms at this
    /// experiment's parameters.
    pub fn report_shapes(&self) -> ReportShapes {
        let hammerstein = self.structure == Structure::Hammerstein;
        let (classical, interpolated) = if hammerstein {
            (CostAlgorithm::Tlms, CostAlgorithm::ITlms)
        } else {
            (CostAlgorithm::Lmst, CostAlgorithm::ILmst)
        };
        let tensor = |algorithm, t: TensorParams| CostInput {
            algorithm,
            p: 1,
            r: t.rank as u64,
            m: t.modes as u64,
            i: t.grid as u64,
        };
        let cascade = |algorithm, c: CascadeParams| CostInput {
            algorithm,
            p: c.taps as u64,
            r: c.rank as u64,
            m: c.modes as u64,
            i: c.grid as u64,
        };
        let p = &self.params;
        ReportShapes {
            hammerstein,
            tensor_only: tensor(CostAlgorithm::TensorOnly, p.tensor),
            cascade: cascade(classical, p.cascade),
            itensor_only: tensor(CostAlgorithm::ITensorOnly, p.itensor),
            icascade: cascade(interpolated, p.icascade),
        }
    }

    /// Fresh model for `alg`, initialized from `rng`.
    pub fn build_model<R: Rng + ?Sized>(&self, alg: Algorithm, rng: &mut R) -> Result<Box<dyn AdaptiveModel>> {
        if !alg.fits(self.structure) {
            return Err(Error::invalid(format!(
                "{alg} is not offered for the {:?} system of experiment {}",
                self.structure, self.id
            )));
        }
        let p = &self.params;
        let delta = self.delta;
        let interp = alg.is_interpolated();
        let on_input = |grid| Discretizer::from_half_range(self.input_range(), grid);
        Ok(match alg {
            Algorithm::Lms => Box::new(LmsModel::new(LmsFilter::new(p.cascade.taps, p.cascade.mu1, delta)?)),
            Algorithm::Tensor | Algorithm::ITensor => {
                let t = if interp { p.itensor } else { p.tensor };
                let mut tensor =
                    DecomposedInterpTensor::random(t.rank, t.modes, on_input(t.grid)?, t.mu, delta, interp, rng)?;
                tensor.set_schedule(self.schedule);
                Box::new(tensor)
            }
            Algorithm::Tlms | Algorithm::ITlms => {
                let c = if interp { p.icascade } else { p.cascade };
                let mut tensor =
                    DecomposedInterpTensor::random(c.rank, c.modes, on_input(c.grid)?, c.mu2, delta, interp, rng)?;
                tensor.set_schedule(self.schedule);
                Box::new(TlmsModel::new(tensor, LmsFilter::new(c.taps, c.mu1, delta)?))
            }
            Algorithm::Lmst | Algorithm::ILmst => {
                let c = if interp { p.icascade } else { p.cascade };
                let disc = Discretizer::from_half_range(self.lmst_range(), c.grid)?;
                let mut tensor = DecomposedInterpTensor::random(c.rank, c.modes, disc, c.mu2, delta, interp, rng)?;
                tensor.set_schedule(self.schedule);
                Box::new(LmstModel::new(LmsFilter::new(c.taps, c.mu1, delta)?, tensor))
            }
        })
    }

    /// Input, noise-free desired and observed signals of run seed `seed`.
    pub fn signals(&self, seed: u64) -> Result<Signals> {
        let x = self.input.generate(self.n_samples, &mut stream_rng(seed, INPUT_STREAM))?;
        let d = self.system().apply(&x)?;
        let y = add_noise_snr(&d, self.snr_db, &mut stream_rng(seed, NOISE_STREAM))?;
        Ok(Signals { x, d, y })
    }
}

/// Second-half taps of switching experiments that do not fix their own:
/// the first-experiment change pattern (every tap scaled by 2/3).
fn switched(taps: &[f64]) -> Vec<f64> {
    taps.iter().map(|t| t * 2.0 / 3.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    pub y: Vec<f64>,
}

/// Noise-free desired signal and model output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub d: Vec<f64>,
    pub y_hat: Vec<f64>,
}

/// Runs the predict / error / adapt loop; with `adapt = false` the model is
/// only evaluated.
pub fn drive(model: &mut dyn AdaptiveModel, x: &[f64], y: &[f64], adapt: bool) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::invalid("input and observation lengths differ"));
    }
    let mut out = Vec::with_capacity(x.len());
    for (n, (&xn, &yn)) in x.iter().zip(y).enumerate() {
        let y_hat = model.predict(xn)?;
        if adapt {
            model.adapt(yn - y_hat)?;
        }
        if !y_hat.is_finite() {
            return Err(Error::State(format!("model output became non-finite at sample {}", n + 1)));
        }
        out.push(y_hat);
    }
    Ok(out)
}

/// One identification run of `alg` with run seed `seed`.
pub fn run_identification(spec: &ExperimentSpec, alg: Algorithm, seed: u64) -> Result<Trace> {
    spec.validate()?;
    let s = spec.signals(seed)?;
    let mut model = spec.build_model(alg, &mut stream_rng(seed, INIT_STREAM))?;
    let y_hat = drive(model.as_mut(), &s.x, &s.y, true)?;
    Ok(Trace { d: s.d, y_hat })
}

/// Run-averaged NMSE per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NmseSeries {
    /// Average of `(d - y_hat)^2 / d^2` over the included runs.
    pub linear: Vec<f64>,
    pub db: Vec<f64>,
    pub runs: usize,
    /// Number of (run, sample) pairs left out because `|d| < 1e-12`.
    pub excluded: usize,
    /// Per sample, `sum_l (d - y_hat)^2` over all runs.
    pub error_energy: Vec<f64>,
    /// Per sample, `sum_l d^2` over all runs.
    pub reference_energy: Vec<f64>,
}

impl NmseSeries {
    pub fn len(&self) -> usize {
        self.db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.db.is_empty()
    }

    /// Mean of the per-sample dB values over `range` (zero-based).
    ///
    /// The per-sample ratio divides by `d_n^2` and is heavy-tailed, so a
    /// linear time average is dominated by a handful of near-zero `d_n`;
    /// averaging the dB curve is what reading a plot amounts to.
    pub fn mean_db(&self, range: std::ops::Range<usize>) -> f64 {
        let vals = &self.db[range];
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    /// Steady-state NMSE: the last 10% of the samples.
    pub fn steady_state_db(&self) -> f64 {
        self.mean_db(self.steady_range())
    }

    /// Ratio of total error energy to total reference energy over `range`,
    /// in dB. Unlike the per-sample ratio this is not dominated by samples
    /// where `d_n` nearly vanishes; reported as a diagnostic.
    pub fn pooled_db(&self, range: std::ops::Range<usize>) -> f64 {
        let e: f64 = self.error_energy[range.clone()].iter().sum();
        let d: f64 = self.reference_energy[range].iter().sum();
        if d > 0.0 {
            to_db(e / d)
        } else {
            0.0
        }
    }

    /// Pooled NMSE over the steady-state window.
    pub fn steady_state_pooled_db(&self) -> f64 {
        self.pooled_db(self.steady_range())
    }

    fn steady_range(&self) -> std::ops::Range<usize> {
        let n = self.len();
        n - (n / 10).max(1)..n
    }
}

fn to_db(v: f64) -> f64 {
    if v <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * v.log10()).max(NMSE_FLOOR_DB)
    }
}

/// Per-sample NMSE averaged over runs.
pub fn nmse(traces: &[Trace]) -> Result<NmseSeries> {
    let first = traces.first().ok_or_else(|| Error::invalid("NMSE needs at least one run"))?;
    let n = first.d.len();
    if traces.iter().any(|t| t.d.len() != n || t.y_hat.len() != n) {
        return Err(Error::invalid("all traces must have the same length"));
    }
    let mut linear = Vec::with_capacity(n);
    let mut error_energy = Vec::with_capacity(n);
    let mut reference_energy = Vec::with_capacity(n);
    let mut excluded = 0;
    let mut empty_samples = 0;
    for i in 0..n {
        let (sum, count) = traces.iter().fold((0.0, 0usize), |(s, c), t| {
            let d = t.d[i];
            if d.abs() < NMSE_EXCLUDE_BELOW {
                (s, c)
            } else {
                (s + ((d - t.y_hat[i]) / d).powi(2), c + 1)
            }
        });
        excluded += traces.len() - count;
        error_energy.push(traces.iter().map(|t| (t.d[i] - t.y_hat[i]).powi(2)).sum());
        reference_energy.push(traces.iter().map(|t| t.d[i] * t.d[i]).sum());
        if count == 0 {
            empty_samples += 1;
            linear.push(1.0);
        } else {
            linear.push(sum / count as f64);
        }
    }
    if empty_samples > 0 {
        log::warn!("{empty_samples} samples had a vanishing desired signal in every run; reported as 0 dB");
    }
    if excluded > 0 {
        log::info!("{excluded} (run, sample) pairs excluded from the NMSE average");
    }
    let db = linear.iter().map(|&v| to_db(v)).collect();
    Ok(NmseSeries {
        linear,
        db,
        runs: traces.len(),
        excluded,
        error_energy,
        reference_energy,
    })
}

/// Runs every algorithm in `algs` over `spec.runs` runs (seeds
/// `seed_base + 1 ..= seed_base + L`) and aggregates the NMSE per algorithm.
pub fn run_experiment(spec: &ExperimentSpec, algs: &[Algorithm], seed_base: u64) -> Result<Vec<NmseSeries>> {
    spec.validate()?;
    for a in algs {
        if !a.fits(spec.structure) {
            return Err(Error::invalid(format!("{a} is not offered for experiment {}", spec.id)));
        }
    }
    let per_run: Vec<Vec<Trace>> = (1..=spec.runs as u64)
        .into_par_iter()
        .map(|l| {
            let seed = seed_base.wrapping_add(l);
            let s = spec.signals(seed)?;
            algs.iter()
                .map(|&alg| {
                    let mut model = spec.build_model(alg, &mut stream_rng(seed, INIT_STREAM))?;
                    let y_hat = drive(model.as_mut(), &s.x, &s.y, true)
                        .map_err(|e| Error::State(format!("{alg}, run seed {seed}: {e}")))?;
                    Ok(Trace { d: s.d.clone(), y_hat })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    (0..algs.len())
        .map(|i| {
            let traces: Vec<Trace> = per_run.iter().map(|r| r[i].clone()).collect();
            nmse(&traces)
        })
        .collect()
}

/// Centered moving average with the window truncated at the edges; for display only.
pub fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 || x.is_empty() {
        return x.to_vec();
    }
    let half = window / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// First sample index `>= from` after which the running NMSE (dB curve
/// averaged over `window` samples) stays within `tol_db` of `target_db`; `None` if never.
pub fn recovery_index(series: &NmseSeries, from: usize, target_db: f64, tol_db: f64, window: usize) -> Option<usize> {
    let smooth = moving_average(&series.db[from..], window);
    let ok: Vec<bool> = smooth.iter().map(|&v| v <= target_db + tol_db).collect();
    let last_bad = ok.iter().rposition(|&b| !b);
    match last_bad {
        None => Some(from),
        Some(i) if i + 1 < ok.len() => Some(from + i + 1),
        Some(_) => None,
    }
}
