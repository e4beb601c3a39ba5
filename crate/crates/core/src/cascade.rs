//! Tensor/FIR cascades.
//!
//! [`TlmsModel`] puts the decomposed tensor in front of an FIR filter
//! (Hammerstein identifier); [`LmstModel`] puts the FIR filter in front of
//! the tensor (Wiener identifier). Both come in interpolated and classical
//! flavours, selected by the flag of the embedded [`DecomposedInterpTensor`].
//!
//! One `adapt` call updates the tensor first and the FIR filter second. With
//! the default [`ModeSchedule::Sequential`] the filter sees the error left
//! after the tensor step (and, for the FIR-then-tensor cascade, the
//! updated slopes); with [`ModeSchedule::Simultaneous`] every block uses
//! the state and error from before the call.

use crate::adaptive::{
    normalized_step, AdaptiveModel, DecomposedInterpTensor, FactorGradient, LmsFilter, ModeSchedule, Snapshot,
};
use crate::complexity::{NoTally, Ops, Tally};
use crate::error::{Error, Result};
use crate::interp::{CellQuery, ModeSums};
use crate::quantize::TapDelayLine;

/// Per-mode tensor step of the tensor-then-FIR cascade, `mu2 / (delta + ||S||_F^2)`.
pub fn tlms_step_size(s_frob_sq: f64, mu2: f64, delta: f64) -> f64 {
    normalized_step(mu2, delta, s_frob_sq)
}

/// FIR step of the FIR-then-tensor cascade, `mu1 / (delta + ||d||^2)`.
pub fn lmst_step_size(d_norm_sq: f64, mu1: f64, delta: f64) -> f64 {
    normalized_step(mu1, delta, d_norm_sq)
}

fn check_sample(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite input sample {x}")))
    }
}

/// Tensor followed by an FIR filter over the last `P` tensor outputs.
///
/// The backward pass keeps the cell queries of the last `P` samples and
/// re-evaluates their gradients against the current factors, instead of
/// storing `P` historical copies of the factor matrices.
#[derive(Debug, Clone)]
pub struct TlmsModel {
    tensor: DecomposedInterpTensor,
    fir: LmsFilter,
    outputs: TapDelayLine<f64>,
    queries: TapDelayLine<Option<CellQuery>>,
    freeze_fir: bool,
    pending: bool,
}

impl TlmsModel {
    pub fn new(tensor: DecomposedInterpTensor, fir: LmsFilter) -> Self {
        let taps = fir.taps();
        Self {
            tensor,
            fir,
            outputs: TapDelayLine::new(taps).expect("filter has at least one tap"),
            queries: TapDelayLine::new(taps).expect("filter has at least one tap"),
            freeze_fir: false,
            pending: false,
        }
    }

    /// Keeps the FIR weights fixed during `adapt` (the tensor still learns).
    pub fn with_frozen_fir(mut self, frozen: bool) -> Self {
        self.freeze_fir = frozen;
        self
    }

    pub fn tensor(&self) -> &DecomposedInterpTensor {
        &self.tensor
    }

    pub fn tensor_mut(&mut self) -> &mut DecomposedInterpTensor {
        &mut self.tensor
    }

    pub fn fir(&self) -> &LmsFilter {
        &self.fir
    }

    pub fn fir_mut(&mut self) -> &mut LmsFilter {
        &mut self.fir
    }

    /// Tensor outputs of the last `P` samples, newest first.
    pub fn tensor_outputs(&self) -> &TapDelayLine<f64> {
        &self.outputs
    }

    /// Cascade output re-evaluated from the stored queries with the current
    /// factors and weights.
    pub fn recompute_output(&self) -> f64 {
        self.queries
            .iter()
            .zip(self.fir.weights())
            .map(|(q, w)| q.as_ref().map_or(0.0, |q| w * self.tensor.output_at(q, &mut NoTally)))
            .sum()
    }

    /// `S_m = sum_p w_p dy_Ten(n-p+1)/dA_m` for every mode.
    pub fn tensor_gradient(&self) -> FactorGradient {
        self.tensor_gradient_with(&mut NoTally)
    }

    fn tensor_gradient_with<T: Tally>(&self, tally: &mut T) -> FactorGradient {
        let f = self.tensor.factors();
        let mut s = FactorGradient::new(f.order(), f.rank());
        for (q, &w) in self.queries.iter().zip(self.fir.weights()) {
            if let Some(q) = q {
                self.tensor.accumulate_gradient(q, w, &mut s, tally);
            }
        }
        s
    }
}

impl AdaptiveModel for TlmsModel {
    fn predict_counted(&mut self, x_n: f64, ops: &mut Ops) -> Result<f64> {
        check_sample(x_n)?;
        let y_ten = self.tensor.predict_counted(x_n, ops)?;
        let q = self.tensor.take_pending();
        self.outputs.push(y_ten);
        self.queries.push(q);
        self.pending = true;
        Ok(self.fir.dot(self.outputs.iter().copied(), ops))
    }

    fn adapt_counted(&mut self, e_n: f64, ops: &mut Ops) -> Result<()> {
        if !std::mem::take(&mut self.pending) {
            return Err(Error::State("cascade adapt called without a preceding predict".into()));
        }
        let terms: Vec<(&CellQuery, f64)> = self
            .queries
            .iter()
            .zip(self.fir.weights())
            .filter_map(|(q, &w)| q.as_ref().map(|q| (q, w)))
            .collect();
        let e_left = self.tensor.update_terms(&terms, e_n, ops);
        if !self.freeze_fir {
            let window: Vec<f64> = match self.tensor.schedule() {
                ModeSchedule::Simultaneous => self.outputs.to_vec(),
                // The residual refers to the updated tensor, so the regressor
                // must too.
                ModeSchedule::Sequential => self
                    .queries
                    .iter()
                    .map(|q| q.as_ref().map_or(0.0, |q| self.tensor.output_at(q, ops)))
                    .collect(),
            };
            self.fir.adapt_with(e_left, &window, ops);
        }
        Ok(())
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = self.tensor.parameters();
        p.extend_from_slice(self.fir.weights());
        p
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            factors: Some(self.tensor.factors().clone()),
            weights: Some(self.fir.weights().to_vec()),
        }
    }
}

/// FIR filter followed by a tensor over the last `M` filter outputs.
///
/// The tensor's own delay line holds the filter outputs; `xhist` keeps the
/// `P + M - 1` raw inputs needed to form the regressors of the filter
/// gradient.
#[derive(Debug, Clone)]
pub struct LmstModel {
    fir: LmsFilter,
    tensor: DecomposedInterpTensor,
    xhist: TapDelayLine<f64>,
    pending: Option<CellQuery>,
}

impl LmstModel {
    pub fn new(fir: LmsFilter, tensor: DecomposedInterpTensor) -> Self {
        let len = fir.taps() + tensor.factors().order() - 1;
        Self {
            fir,
            tensor,
            xhist: TapDelayLine::new(len).expect("length is at least one"),
            pending: None,
        }
    }

    pub fn tensor(&self) -> &DecomposedInterpTensor {
        &self.tensor
    }

    pub fn tensor_mut(&mut self) -> &mut DecomposedInterpTensor {
        &mut self.tensor
    }

    pub fn fir(&self) -> &LmsFilter {
        &self.fir
    }

    pub fn fir_mut(&mut self) -> &mut LmsFilter {
        &mut self.fir
    }

    pub fn input_history(&self) -> &TapDelayLine<f64> {
        &self.xhist
    }

    pub fn pending(&self) -> Option<&CellQuery> {
        self.pending.as_ref()
    }

    /// Output recomputed from the raw input history with weights `w`.
    pub fn output_with_weights(&self, w: &[f64]) -> Result<f64> {
        let ys = self.filter_outputs(w);
        let q = self.tensor.query(&ys)?;
        Ok(self.tensor.output_at(&q, &mut NoTally))
    }

    /// Filter outputs for lags `0..M` with weights `w`.
    fn filter_outputs(&self, w: &[f64]) -> Vec<f64> {
        let x = self.xhist.to_vec();
        (0..self.tensor.factors().order())
            .map(|lag| w.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Derivative of the tensor output with respect to each of its inputs
    /// at query `q`: `sum_r v_m(r) (A_m(k+1, r) - A_m(k, r))`, divided by
    /// the grid step for the interpolated tensor.
    pub fn input_slopes(&self, q: &CellQuery) -> Vec<f64> {
        self.input_slopes_with(q, &mut NoTally)
    }

    fn input_slopes_with<T: Tally>(&self, q: &CellQuery, tally: &mut T) -> Vec<f64> {
        let f = self.tensor.factors();
        let sums = ModeSums::compute(f, q);
        let inv_dx = if self.tensor.is_interpolated() {
            1.0 / self.tensor.discretizer().delta_x()
        } else {
            1.0
        };
        let rank = f.rank() as u64;
        (0..q.order())
            .map(|m| {
                let k0 = q.cells()[m] - 1;
                let lo = f.row(m, k0);
                let hi = f.row(m, k0 + 1);
                let s: f64 = sums.excluded(m).iter().zip(lo.iter().zip(hi)).map(|(v, (a, b))| v * (b - a)).sum();
                tally.mul(rank + 1);
                tally.add(2 * rank - 1);
                s * inv_dx
            })
            .collect()
    }

    /// FIR update direction `d = sum_m slope_m x_{n-m+1}` at query `q`.
    pub fn weight_direction(&self, q: &CellQuery) -> Vec<f64> {
        self.weight_direction_with(q, &mut NoTally)
    }

    fn weight_direction_with<T: Tally>(&self, q: &CellQuery, tally: &mut T) -> Vec<f64> {
        let taps = self.fir.taps();
        let x = self.xhist.to_vec();
        let mut d = vec![0.0; taps];
        for (lag, slope) in self.input_slopes_with(q, tally).into_iter().enumerate() {
            for (di, xi) in d.iter_mut().zip(&x[lag..lag + taps]) {
                *di += slope * xi;
            }
        }
        tally.mul((q.order() * taps) as u64);
        tally.add((q.order() * taps) as u64);
        d
    }
}

impl AdaptiveModel for LmstModel {
    fn predict_counted(&mut self, x_n: f64, ops: &mut Ops) -> Result<f64> {
        check_sample(x_n)?;
        self.xhist.push(x_n);
        let y_lms = self.fir.dot(self.xhist.iter().copied(), ops);
        let y = self.tensor.predict_counted(y_lms, ops)?;
        self.pending = self.tensor.take_pending();
        Ok(y)
    }

    fn adapt_counted(&mut self, e_n: f64, ops: &mut Ops) -> Result<()> {
        let q = self
            .pending
            .take()
            .ok_or_else(|| Error::State("cascade adapt called without a preceding predict".into()))?;
        let (d, e_left) = match self.tensor.schedule() {
            ModeSchedule::Simultaneous => {
                let d = self.weight_direction_with(&q, ops);
                self.tensor.update_terms(&[(&q, 1.0)], e_n, ops);
                (d, e_n)
            }
            ModeSchedule::Sequential => {
                let e_left = self.tensor.update_terms(&[(&q, 1.0)], e_n, ops);
                (self.weight_direction_with(&q, ops), e_left)
            }
        };
        self.fir.adapt_with(e_left, &d, ops);
        Ok(())
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = self.tensor.parameters();
        p.extend_from_slice(self.fir.weights());
        p
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            factors: Some(self.tensor.factors().clone()),
            weights: Some(self.fir.weights().to_vec()),
        }
    }
}
