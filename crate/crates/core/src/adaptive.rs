//! Single-block adaptive learners.
//!
//! Every learner follows the same per-sample contract ([`AdaptiveModel`]):
//! `predict` on the newest input sample, then `adapt` on the a-priori error
//! `e_n = y_n - y_hat_n`. `adapt` reuses exactly the quantities the preceding
//! `predict` computed and fails if there was none.
//!
//! Tensor updates are simultaneous across modes (all gradients are taken
//! from the factors as they were at the start of `adapt`) and normalized per
//! mode: `mu / (delta + ||G_m||_F^2)` where `G_m` collects the gradient rows
//! of mode `m`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::complexity::{NoTally, Ops, Tally};
use crate::error::{Error, Result};
use crate::interp::{extract_dense_subtensor, interp_decomposed_with, interp_subtensor, CellQuery, EvalOrder, ModeSums};
use crate::quantize::{Discretizer, TapDelayLine};
use crate::tensor::{corner_labels, DenseTensor, FactorSet};

/// Standard deviation of the Gaussian initial tensor entries (variance 0.01).
pub const INIT_STD: f64 = 0.1;

/// Default regularizer of every step-size normalization.
pub const DEFAULT_DELTA: f64 = 1e-6;

/// Per-sample predict/adapt contract shared by all learners.
pub trait AdaptiveModel: Send {
    /// Consumes the newest input sample and returns the model output.
    fn predict(&mut self, x_n: f64) -> Result<f64> {
        self.predict_counted(x_n, &mut Ops::default())
    }

    /// Updates the state with the a-priori error of the last prediction.
    fn adapt(&mut self, e_n: f64) -> Result<()> {
        self.adapt_counted(e_n, &mut Ops::default())
    }

    fn predict_counted(&mut self, x_n: f64, ops: &mut Ops) -> Result<f64>;

    fn adapt_counted(&mut self, e_n: f64, ops: &mut Ops) -> Result<()>;

    /// All learnable parameters, flattened (factors mode by mode, then weights).
    fn parameters(&self) -> Vec<f64>;

    fn snapshot(&self) -> Snapshot;
}

fn check_step(name: &str, mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("step size {name} must lie in (0, 1), got {mu}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("regularizer must be positive, got {delta}")))
    }
}

fn check_sample(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite input sample {x}")))
    }
}

/// Normalized step `mu / (delta + norm_sq)`.
#[inline]
pub fn normalized_step(mu: f64, delta: f64, norm_sq: f64) -> f64 {
    mu / (delta + norm_sq)
}

/// FIR filter with a normalized LMS update.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsFilter {
    weights: Vec<f64>,
    mu: f64,
    delta: f64,
}

impl LmsFilter {
    /// Zero-initialized filter of length `taps`.
    pub fn new(taps: usize, mu: f64, delta: f64) -> Result<Self> {
        Self::with_weights(vec![0.0; taps], mu, delta)
    }

    pub fn with_weights(weights: Vec<f64>, mu: f64, delta: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("filter needs at least one tap"));
        }
        check_step("mu1", mu)?;
        check_delta(delta)?;
        Ok(Self { weights, mu, delta })
    }

    pub fn taps(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `w^T x`, where `x` holds the newest sample first.
    pub fn lms_predict(&self, x: &TapDelayLine<f64>) -> Result<f64> {
        if x.len() != self.taps() {
            return Err(Error::invalid(format!(
                "delay line has {} taps, filter has {}",
                x.len(),
                self.taps()
            )));
        }
        Ok(self.dot(x.iter().copied(), &mut NoTally))
    }

    /// Inner product with the first `P` entries of `x`. `P` mult, `P - 1` add.
    pub(crate) fn dot<T: Tally>(&self, x: impl Iterator<Item = f64>, tally: &mut T) -> f64 {
        let mut acc = 0.0;
        for (p, (w, xv)) in self.weights.iter().zip(x).enumerate() {
            if p == 0 {
                acc = w * xv;
            } else {
                acc += w * xv;
            }
        }
        tally.mul(self.taps() as u64);
        tally.add(self.taps() as u64 - 1);
        acc
    }

    /// `w += 2 mu / (delta + ||x||^2) e x`.
    pub fn adapt(&mut self, e: f64, regressor: &[f64]) -> Result<()> {
        if regressor.len() != self.taps() {
            return Err(Error::invalid(format!(
                "regressor has {} entries, filter has {} taps",
                regressor.len(),
                self.taps()
            )));
        }
        self.adapt_with(e, regressor, &mut NoTally);
        Ok(())
    }

    pub(crate) fn adapt_with<T: Tally>(&mut self, e: f64, regressor: &[f64], tally: &mut T) {
        let norm_sq: f64 = regressor.iter().map(|x| x * x).sum();
        let coef = 2.0 * normalized_step(self.mu, self.delta, norm_sq) * e;
        for (w, x) in self.weights.iter_mut().zip(regressor) {
            *w += coef * x;
        }
        let p = self.taps() as u64;
        tally.mul(p + 2 + p);
        tally.add(p - 1 + 1 + p);
        tally.div(1);
    }
}

/// Streaming NLMS learner: a delay line of raw inputs feeding an [`LmsFilter`].
#[derive(Debug, Clone)]
pub struct LmsModel {
    filter: LmsFilter,
    window: TapDelayLine<f64>,
    pending: bool,
}

impl LmsModel {
    pub fn new(filter: LmsFilter) -> Self {
        let window = TapDelayLine::new(filter.taps()).expect("filter has at least one tap");
        Self {
            filter,
            window,
            pending: false,
        }
    }

    pub fn filter(&self) -> &LmsFilter {
        &self.filter
    }
}

impl AdaptiveModel for LmsModel {
    fn predict_counted(&mut self, x_n: f64, ops: &mut Ops) -> Result<f64> {
        check_sample(x_n)?;
        self.window.push(x_n);
        self.pending = true;
        Ok(self.filter.dot(self.window.iter().copied(), ops))
    }

    fn adapt_counted(&mut self, e_n: f64, ops: &mut Ops) -> Result<()> {
        if !std::mem::take(&mut self.pending) {
            return Err(Error::State("LMS adapt called without a preceding predict".into()));
        }
        let x = self.window.to_vec();
        self.filter.adapt_with(e_n, &x, ops);
        Ok(())
    }

    fn parameters(&self) -> Vec<f64> {
        self.filter.weights.clone()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            factors: None,
            weights: Some(self.filter.weights.clone()),
        }
    }
}

/// Dense lookup grid with multilinear interpolation between grid points.
#[derive(Debug, Clone)]
pub struct BasicInterpTensor {
    grid: DenseTensor,
    disc: Discretizer,
    mu: f64,
    window: TapDelayLine<f64>,
    pending: Option<CellQuery>,
}

impl BasicInterpTensor {
    pub fn new(grid: DenseTensor, disc: Discretizer, mu: f64) -> Result<Self> {
        if grid.dims().iter().any(|&d| d < 2) {
            return Err(Error::invalid("every grid mode needs at least 2 points"));
        }
        if grid.dims().iter().any(|&d| d != disc.grid_size()) {
            return Err(Error::invalid("grid extents must match the discretizer grid size"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("step size must be positive, got {mu}")));
        }
        let window = TapDelayLine::new(grid.order())?;
        Ok(Self {
            grid,
            disc,
            mu,
            window,
            pending: None,
        })
    }

    /// Gaussian-initialized grid of order `modes`.
    pub fn random<R: Rng + ?Sized>(modes: usize, disc: Discretizer, mu: f64, rng: &mut R) -> Result<Self> {
        let mut grid = DenseTensor::zeros(vec![disc.grid_size(); modes])?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        grid.values_mut().iter_mut().for_each(|v| *v = normal.sample(rng));
        Self::new(grid, disc, mu)
    }

    pub fn grid(&self) -> &DenseTensor {
        &self.grid
    }

    pub fn grid_mut(&mut self) -> &mut DenseTensor {
        &mut self.grid
    }

    pub fn pending(&self) -> Option<&CellQuery> {
        self.pending.as_ref()
    }

    /// Interpolated output for inputs `xs` (one per mode); keeps the query for `adapt`.
    pub fn predict_inputs(&mut self, xs: &[f64]) -> Result<f64> {
        if xs.len() != self.grid.order() {
            return Err(Error::invalid(format!(
                "{} inputs for a grid of order {}",
                xs.len(),
                self.grid.order()
            )));
        }
        let q = CellQuery::locate(&self.disc, xs)?;
        let sub = extract_dense_subtensor(&self.grid, q.cells())?;
        let y = interp_subtensor(&sub, q.weights())?;
        self.pending = Some(q);
        Ok(y)
    }

    /// Moves each active corner by `2 mu e prod_m w_m(l_m)`.
    pub fn adapt_error(&mut self, e: f64) -> Result<()> {
        let q = self
            .pending
            .take()
            .ok_or_else(|| Error::State("basic tensor adapt called without a preceding predict".into()))?;
        let order = q.order();
        let cw = q.corner_weights();
        let mut idx0 = vec![0; order];
        for (c, w) in cw.into_iter().enumerate() {
            for (slot, (l, &k)) in idx0.iter_mut().zip(corner_labels(order, c).zip(q.cells())) {
                *slot = k - 1 + l;
            }
            let off = self.grid.offset0(&idx0);
            self.grid.values_mut()[off] += 2.0 * self.mu * e * w;
        }
        Ok(())
    }
}

impl AdaptiveModel for BasicInterpTensor {
    fn predict_counted(&mut self, x_n: f64, _ops: &mut Ops) -> Result<f64> {
        check_sample(x_n)?;
        self.window.push(x_n);
        let xs = self.window.to_vec();
        self.predict_inputs(&xs)
    }

    fn adapt_counted(&mut self, e_n: f64, _ops: &mut Ops) -> Result<()> {
        self.adapt_error(e_n)
    }

    fn parameters(&self) -> Vec<f64> {
        self.grid.values().to_vec()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            factors: None,
            weights: Some(self.grid.values().to_vec()),
        }
    }
}

/// Order in which the per-block updates of one sample are applied.
///
/// Blocks are the factor matrices and, in the cascades, the FIR weights
/// (updated after the tensor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeSchedule {
    /// Modes one after another; each mode's gradient is taken after the
    /// previous modes moved, and the error is carried forward as
    /// `e <- (1 - 2 mu_m ||G_m||^2) e`, which is exact because the output
    /// is linear in any single factor matrix.
    #[default]
    Sequential,
    /// All blocks from the state as it was at the start of `adapt`, each
    /// with the full error.
    Simultaneous,
}

/// CPD-decomposed lookup tensor, interpolated or classical.
///
/// The classical variant reads and updates only the lower-corner rows `k_m`,
/// i.e. the plain SGD update of a decomposed lookup table at discretized
/// indices.
#[derive(Debug, Clone)]
pub struct DecomposedInterpTensor {
    factors: FactorSet,
    disc: Discretizer,
    mu: f64,
    delta: f64,
    interpolated: bool,
    eval_order: EvalOrder,
    schedule: ModeSchedule,
    window: TapDelayLine<f64>,
    pending: Option<CellQuery>,
}

impl DecomposedInterpTensor {
    pub fn new(factors: FactorSet, disc: Discretizer, mu: f64, delta: f64, interpolated: bool) -> Result<Self> {
        check_step("mu2", mu)?;
        check_delta(delta)?;
        if factors.dims().iter().any(|&d| d != disc.grid_size()) {
            return Err(Error::invalid(format!(
                "factor rows {:?} must all equal the grid size {}",
                factors.dims(),
                disc.grid_size()
            )));
        }
        let window = TapDelayLine::new(factors.order())?;
        Ok(Self {
            factors,
            disc,
            mu,
            delta,
            interpolated,
            eval_order: EvalOrder::Factored,
            schedule: ModeSchedule::default(),
            window,
            pending: None,
        })
    }

    /// Factors drawn i.i.d. from N(0, 0.01).
    pub fn random<R: Rng + ?Sized>(
        rank: usize,
        modes: usize,
        disc: Discretizer,
        mu: f64,
        delta: f64,
        interpolated: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let factors = FactorSet::random_normal(rank, vec![disc.grid_size(); modes], INIT_STD, rng)?;
        Self::new(factors, disc, mu, delta, interpolated)
    }

    pub fn factors(&self) -> &FactorSet {
        &self.factors
    }

    pub fn factors_mut(&mut self) -> &mut FactorSet {
        &mut self.factors
    }

    pub fn discretizer(&self) -> &Discretizer {
        &self.disc
    }

    pub fn is_interpolated(&self) -> bool {
        self.interpolated
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn set_eval_order(&mut self, order: EvalOrder) {
        self.eval_order = order;
    }

    pub fn set_schedule(&mut self, schedule: ModeSchedule) {
        self.schedule = schedule;
    }

    pub fn schedule(&self) -> ModeSchedule {
        self.schedule
    }

    pub fn pending(&self) -> Option<&CellQuery> {
        self.pending.as_ref()
    }

    /// Cell query for inputs `xs`; weights are forced to the lower corner
    /// for the classical variant.
    pub fn query(&self, xs: &[f64]) -> Result<CellQuery> {
        if xs.len() != self.factors.order() {
            return Err(Error::invalid(format!(
                "{} inputs for a tensor of order {}",
                xs.len(),
                self.factors.order()
            )));
        }
        let q = CellQuery::locate(&self.disc, xs)?;
        Ok(if self.interpolated { q } else { q.to_corner() })
    }

    /// Output at a prepared query (no state change).
    pub fn output_at<T: Tally>(&self, q: &CellQuery, tally: &mut T) -> f64 {
        if self.interpolated {
            interp_decomposed_with(&self.factors, q, self.eval_order, tally)
        } else {
            let idx0: Vec<usize> = q.cells().iter().map(|k| k - 1).collect();
            self.factors.evaluate0(&idx0, tally)
        }
    }

    /// Output for inputs `xs` (one per mode, mode 1 first); keeps the query for `adapt`.
    pub fn predict_inputs(&mut self, xs: &[f64]) -> Result<f64> {
        self.predict_inputs_with(xs, &mut NoTally)
    }

    fn predict_inputs_with<T: Tally>(&mut self, xs: &[f64], tally: &mut T) -> Result<f64> {
        let q = self.query(xs)?;
        let y = self.output_at(&q, tally);
        self.pending = Some(q);
        Ok(y)
    }

    /// Gradient rows of the output with respect to the factors at query `q`.
    pub fn output_gradient(&self, q: &CellQuery) -> FactorGradient {
        self.gradient_with(q, &mut NoTally)
    }

    fn gradient_with<T: Tally>(&self, q: &CellQuery, tally: &mut T) -> FactorGradient {
        let mut grad = FactorGradient::new(q.order(), self.factors.rank());
        self.accumulate_gradient(q, 1.0, &mut grad, tally);
        grad
    }

    /// Adds `scale` times the output gradient at `q` to `grad`.
    pub fn accumulate_gradient<T: Tally>(&self, q: &CellQuery, scale: f64, grad: &mut FactorGradient, tally: &mut T) {
        self.accumulate_modes(q, scale, 0..q.order(), grad, tally);
    }

    fn accumulate_modes<T: Tally>(
        &self,
        q: &CellQuery,
        scale: f64,
        modes_wanted: std::ops::Range<usize>,
        grad: &mut FactorGradient,
        tally: &mut T,
    ) {
        let rank = self.factors.rank() as u64;
        let modes = q.order() as u64;
        let sums = ModeSums::compute(&self.factors, q);
        // blend, prefix and suffix products
        tally.mul(2 * modes * rank + 2 * modes * rank);
        tally.add(modes * rank);
        for m in modes_wanted {
            let v = sums.excluded(m);
            let k0 = q.cells()[m] - 1;
            let [w0, w1] = q.weights()[m].pair();
            grad.push_row(m, k0, v, scale * w0);
            if self.interpolated {
                grad.push_row(m, k0 + 1, v, scale * w1);
            }
            tally.mul((rank + 1) * if self.interpolated { 2 } else { 1 });
        }
    }

    /// Applies `A_m += 2 mu_m e G_m` for one mode and returns `mu_m ||G_m||^2`.
    fn apply_mode<T: Tally>(&mut self, m: usize, grad: &FactorGradient, e: f64, tally: &mut T) -> f64 {
        let norm_sq = grad.mode_norm_sq(m);
        let step = normalized_step(self.mu, self.delta, norm_sq);
        let coef = 2.0 * step * e;
        for (row, g) in grad.rows(m) {
            for (a, gv) in self.factors.row_mut(m, *row).iter_mut().zip(g) {
                *a += coef * gv;
            }
        }
        let touched = grad.rows(m).len() as u64;
        let rank = self.factors.rank() as u64;
        tally.mul(touched * rank + 2 + touched * rank);
        tally.add(touched * rank + touched * rank);
        tally.div(1);
        step * norm_sq
    }

    /// Updates the factors for error `e` of an output of the form
    /// `sum_j scale_j * T(q_j)`, following the mode schedule. Returns the
    /// error left for the next block: the carried residual for
    /// [`ModeSchedule::Sequential`], `e` itself for simultaneous updates.
    pub(crate) fn update_terms<T: Tally>(&mut self, terms: &[(&CellQuery, f64)], e: f64, tally: &mut T) -> f64 {
        let (modes, rank) = (self.factors.order(), self.factors.rank());
        match self.schedule {
            ModeSchedule::Simultaneous => {
                let mut grad = FactorGradient::new(modes, rank);
                for &(q, scale) in terms {
                    self.accumulate_gradient(q, scale, &mut grad, tally);
                }
                for m in 0..modes {
                    self.apply_mode(m, &grad, e, tally);
                }
                e
            }
            ModeSchedule::Sequential => {
                let mut e = e;
                for m in 0..modes {
                    let mut grad = FactorGradient::new(modes, rank);
                    for &(q, scale) in terms {
                        self.accumulate_modes(q, scale, m..m + 1, &mut grad, tally);
                    }
                    let gain = self.apply_mode(m, &grad, e, tally);
                    e *= 1.0 - 2.0 * gain;
                    tally.mul(3);
                    tally.add(1);
                }
                e
            }
        }
    }

    fn adapt_with<T: Tally>(&mut self, e: f64, tally: &mut T) -> Result<()> {
        let q = self
            .pending
            .take()
            .ok_or_else(|| Error::State("tensor adapt called without a preceding predict".into()))?;
        self.update_terms(&[(&q, 1.0)], e, tally);
        Ok(())
    }

    /// Updates the factors with error `e` for the last prediction.
    pub fn adapt_error(&mut self, e: f64) -> Result<()> {
        self.adapt_with(e, &mut NoTally)
    }

    /// Removes and returns the query kept by the last prediction.
    pub(crate) fn take_pending(&mut self) -> Option<CellQuery> {
        self.pending.take()
    }

}

impl AdaptiveModel for DecomposedInterpTensor {
    fn predict_counted(&mut self, x_n: f64, ops: &mut Ops) -> Result<f64> {
        check_sample(x_n)?;
        self.window.push(x_n);
        let xs = self.window.to_vec();
        self.predict_inputs_with(&xs, ops)
    }

    fn adapt_counted(&mut self, e_n: f64, ops: &mut Ops) -> Result<()> {
        self.adapt_with(e_n, ops)
    }

    fn parameters(&self) -> Vec<f64> {
        (0..self.factors.order()).flat_map(|m| self.factors.factor(m).to_vec()).collect()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            factors: Some(self.factors.clone()),
            weights: None,
        }
    }
}

/// Sparse per-mode gradient: a list of `(zero-based row, R values)` per mode.
/// Rows that appear more than once are accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGradient {
    rank: usize,
    rows: Vec<Vec<(usize, Vec<f64>)>>,
}

impl FactorGradient {
    pub fn new(modes: usize, rank: usize) -> Self {
        Self {
            rank,
            rows: vec![Vec::new(); modes],
        }
    }

    pub fn modes(&self) -> usize {
        self.rows.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Adds `scale * v` to row `row` of mode `m`.
    pub fn push_row(&mut self, m: usize, row: usize, v: &[f64], scale: f64) {
        let rows = &mut self.rows[m];
        match rows.iter_mut().find(|(r, _)| *r == row) {
            Some((_, acc)) => acc.iter_mut().zip(v).for_each(|(a, x)| *a += scale * x),
            None => rows.push((row, v.iter().map(|x| scale * x).collect())),
        }
    }

    pub fn rows(&self, m: usize) -> &[(usize, Vec<f64>)] {
        &self.rows[m]
    }

    /// Gradient entry for zero-based `(m, row, r)`; zero if the row is not touched.
    pub fn get(&self, m: usize, row: usize, r: usize) -> f64 {
        self.rows[m].iter().find(|(i, _)| *i == row).map_or(0.0, |(_, v)| v[r])
    }

    /// Squared Frobenius norm of the mode-`m` gradient matrix.
    pub fn mode_norm_sq(&self, m: usize) -> f64 {
        self.rows[m].iter().flat_map(|(_, v)| v.iter()).map(|x| x * x).sum()
    }
}

/// Text dump of learnable state, for golden tests and inspection.
///
/// ```text
/// tensorid-snapshot 1
/// rank R
/// dims I_1 .. I_M
/// factor 1
/// <I_1 lines of R values>
/// ...
/// weights P
/// <P values on one line>
/// ```
///
/// The `rank`/`dims`/`factor` block and the `weights` block are each
/// optional. Values use Rust's shortest round-trip formatting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub factors: Option<FactorSet>,
    pub weights: Option<Vec<f64>>,
}

const SNAPSHOT_MAGIC: &str = "tensorid-snapshot 1";

fn join(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

impl Snapshot {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SNAPSHOT_MAGIC}")?;
        if let Some(f) = &self.factors {
            writeln!(w, "rank {}", f.rank())?;
            let dims: Vec<String> = f.dims().iter().map(ToString::to_string).collect();
            writeln!(w, "dims {}", dims.join(" "))?;
            for m in 0..f.order() {
                writeln!(w, "factor {}", m + 1)?;
                for i in 0..f.dims()[m] {
                    writeln!(w, "{}", join(f.row(m, i)))?;
                }
            }
        }
        if let Some(ws) = &self.weights {
            writeln!(w, "weights {}", ws.len())?;
            writeln!(w, "{}", join(ws))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("snapshot is ASCII")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<Option<String>> { lines.next().transpose().map_err(Error::from) };
        let parse_err = |msg: String| Error::Parse(format!("snapshot: {msg}"));
        let nums = |line: &str| -> Result<Vec<f64>> {
            line.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("snapshot: bad value {t:?}: {e}"))))
                .collect()
        };
        if next()?.as_deref() != Some(SNAPSHOT_MAGIC) {
            return Err(parse_err("missing header".into()));
        }
        let mut snap = Snapshot::default();
        while let Some(line) = next()? {
            let mut it = line.split_whitespace();
            match it.next() {
                None => continue,
                Some("rank") => {
                    let rank: usize = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err("bad rank line".into()))?;
                    let dims_line = next()?.ok_or_else(|| parse_err("missing dims".into()))?;
                    let mut d = dims_line.split_whitespace();
                    if d.next() != Some("dims") {
                        return Err(parse_err("expected dims line".into()));
                    }
                    let dims: Vec<usize> = d
                        .map(|t| t.parse().map_err(|_| parse_err(format!("bad dim {t:?}"))))
                        .collect::<Result<_>>()?;
                    let mut factors = Vec::with_capacity(dims.len());
                    for (m, &rows) in dims.iter().enumerate() {
                        let header = next()?.ok_or_else(|| parse_err("missing factor".into()))?;
                        if header.trim() != format!("factor {}", m + 1) {
                            return Err(parse_err(format!("expected factor {}, got {header:?}", m + 1)));
                        }
                        let mut data = Vec::with_capacity(rows * rank);
                        for _ in 0..rows {
                            let row = nums(&next()?.ok_or_else(|| parse_err("truncated factor".into()))?)?;
                            if row.len() != rank {
                                return Err(parse_err(format!("row has {} values, rank is {rank}", row.len())));
                            }
                            data.extend(row);
                        }
                        factors.push(data);
                    }
                    snap.factors = Some(FactorSet::new(rank, dims, factors)?);
                }
                Some("weights") => {
                    let n: usize = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err("bad weights line".into()))?;
                    let vals = nums(&next()?.unwrap_or_default())?;
                    if vals.len() != n {
                        return Err(parse_err(format!("{} weights, header says {n}", vals.len())));
                    }
                    snap.weights = Some(vals);
                }
                Some(other) => return Err(parse_err(format!("unexpected line {other:?}"))),
            }
        }
        Ok(snap)
    }
}
