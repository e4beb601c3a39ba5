//! Multilinear interpolation over subtensors and over CPD factor sets.
//!
//! For a query with cells `k_m` and weights `(1 - u_m, u_m)` the decomposed
//! interpolant is
//!
//! ```text
//! sum_{l in {0,1}^M} sum_r prod_m A_m(k_m + l_m, r) * w_m(l_m)
//!   = sum_r prod_m [ A_m(k_m, r) (1 - u_m) + A_m(k_m + 1, r) u_m ]
//! ```
//!
//! The learners evaluate the right-hand (factored) form. The corner sum on
//! the left is kept as [`EvalOrder::CornerSum`] for cross-checks and op
//! counting.

use crate::complexity::{NoTally, Tally};
use crate::error::{Error, Result};
use crate::quantize::{Discretizer, InterpWeights};
use crate::tensor::{corner_labels, DenseTensor, FactorSet, SubTensor};

/// Cell indices (1-based) and weights for every mode of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct CellQuery {
    k: Vec<usize>,
    weights: Vec<InterpWeights>,
}

/// How the decomposed interpolant is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalOrder {
    /// Per-mode convex combination of the two active rows, then the product
    /// over modes and the sum over rank.
    #[default]
    Factored,
    /// Literal enumeration of the `2^M` corners with precomputed corner weights.
    CornerSum,
}

impl CellQuery {
    pub fn new(k: Vec<usize>, weights: Vec<InterpWeights>) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::invalid("query needs at least one mode"));
        }
        if k.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} cell indices but {} weight pairs",
                k.len(),
                weights.len()
            )));
        }
        Ok(Self { k, weights })
    }

    /// Discretizes one sample per mode.
    pub fn locate(disc: &Discretizer, xs: &[f64]) -> Result<Self> {
        let (k, weights) = xs.iter().map(|&x| disc.locate(x)).collect::<Result<(Vec<_>, Vec<_>)>>()?;
        Self::new(k, weights)
    }

    /// Same cells with every weight replaced by the lower-corner selector.
    pub fn to_corner(&self) -> Self {
        Self {
            k: self.k.clone(),
            weights: vec![InterpWeights::CORNER; self.k.len()],
        }
    }

    pub fn order(&self) -> usize {
        self.k.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.k
    }

    pub fn weights(&self) -> &[InterpWeights] {
        &self.weights
    }

    /// Checks that rows `k_m` and `k_m + 1` exist in every mode.
    pub fn check_against(&self, dims: &[usize]) -> Result<()> {
        if dims.len() != self.k.len() {
            return Err(Error::invalid(format!(
                "query has {} modes, tensor has {}",
                self.k.len(),
                dims.len()
            )));
        }
        for (m, (&k, &d)) in self.k.iter().zip(dims).enumerate() {
            if k == 0 || k + 1 > d {
                return Err(Error::invalid(format!(
                    "cell {} out of range 1..={} in mode {}",
                    k,
                    d.saturating_sub(1),
                    m + 1
                )));
            }
        }
        Ok(())
    }

    /// Weight of every corner, `prod_m w_m(l_m)`, in subtensor order.
    pub fn corner_weights(&self) -> Vec<f64> {
        let order = self.order();
        (0..1usize << order)
            .map(|c| {
                corner_labels(order, c)
                    .zip(&self.weights)
                    .map(|(l, w)| w.pair()[l])
                    .product()
            })
            .collect()
    }
}

/// `sum_l q(l) prod_m w_m(l_m)` over all `2^M` corners.
pub fn interp_subtensor(q: &SubTensor, w: &[InterpWeights]) -> Result<f64> {
    if w.len() != q.order() {
        return Err(Error::invalid(format!(
            "{} weight pairs for a subtensor of order {}",
            w.len(),
            q.order()
        )));
    }
    let order = q.order();
    let mut acc = 0.0;
    for (c, &v) in q.values().iter().enumerate() {
        let weight: f64 = corner_labels(order, c).zip(w).map(|(l, wm)| wm.pair()[l]).product();
        acc += v * weight;
    }
    Ok(acc)
}

/// Corners of the decomposed tensor around 1-based cell `k`.
pub fn extract_subtensor(f: &FactorSet, k: &[usize]) -> Result<SubTensor> {
    let q = CellQuery::new(k.to_vec(), vec![InterpWeights::CORNER; k.len()])?;
    q.check_against(f.dims())?;
    let order = k.len();
    let mut idx0 = vec![0; order];
    let values = (0..1usize << order)
        .map(|c| {
            for (slot, (l, &km)) in idx0.iter_mut().zip(corner_labels(order, c).zip(k)) {
                *slot = km - 1 + l;
            }
            f.evaluate0(&idx0, &mut NoTally)
        })
        .collect();
    SubTensor::new(order, values)
}

/// Corners of a dense grid around 1-based cell `k`.
pub fn extract_dense_subtensor(t: &DenseTensor, k: &[usize]) -> Result<SubTensor> {
    let q = CellQuery::new(k.to_vec(), vec![InterpWeights::CORNER; k.len()])?;
    q.check_against(t.dims())?;
    let order = k.len();
    let mut idx0 = vec![0; order];
    let values = (0..1usize << order)
        .map(|c| {
            for (slot, (l, &km)) in idx0.iter_mut().zip(corner_labels(order, c).zip(k)) {
                *slot = km - 1 + l;
            }
            t.values()[t.offset0(&idx0)]
        })
        .collect();
    SubTensor::new(order, values)
}

/// Interpolated value of the decomposed tensor at `c`, factored evaluation.
pub fn interp_decomposed(f: &FactorSet, c: &CellQuery) -> Result<f64> {
    c.check_against(f.dims())?;
    Ok(interp_decomposed_with(f, c, EvalOrder::Factored, &mut NoTally))
}

/// Unchecked evaluation in the requested order; `c` must be valid for `f`.
///
/// Query preparation (the weight pairs and, for the corner order, the corner
/// weights) is not tallied.
pub fn interp_decomposed_with<T: Tally>(f: &FactorSet, c: &CellQuery, order: EvalOrder, tally: &mut T) -> f64 {
    match order {
        EvalOrder::Factored => factored(f, c, tally),
        EvalOrder::CornerSum => corner_sum(f, c, &c.corner_weights(), tally),
    }
}

fn factored<T: Tally>(f: &FactorSet, c: &CellQuery, tally: &mut T) -> f64 {
    let rank = f.rank();
    let modes = c.order();
    let mut sum = 0.0;
    for r in 0..rank {
        let mut prod = 1.0;
        for m in 0..modes {
            let k0 = c.k[m] - 1;
            let [w0, w1] = c.weights[m].pair();
            let b = f.row(m, k0)[r] * w0 + f.row(m, k0 + 1)[r] * w1;
            prod = if m == 0 { b } else { prod * b };
        }
        tally.mul((3 * modes - 1) as u64);
        tally.add(modes as u64);
        if r == 0 {
            sum = prod;
        } else {
            sum += prod;
            tally.add(1);
        }
    }
    sum
}

fn corner_sum<T: Tally>(f: &FactorSet, c: &CellQuery, corner_w: &[f64], tally: &mut T) -> f64 {
    let rank = f.rank();
    let modes = c.order();
    let mut sum = 0.0;
    let mut first = true;
    for (corner, &w) in corner_w.iter().enumerate() {
        for r in 0..rank {
            let mut prod = w;
            for (m, l) in corner_labels(modes, corner).enumerate() {
                prod *= f.row(m, c.k[m] - 1 + l)[r];
            }
            tally.mul(modes as u64);
            if first {
                sum = prod;
                first = false;
            } else {
                sum += prod;
                tally.add(1);
            }
        }
    }
    sum
}

/// Per-mode blended rows `b_m(r) = A_m(k_m, r) w_m(0) + A_m(k_m + 1, r) w_m(1)`
/// and, for each mode `m'`, the product `v_m'(r) = prod_{m != m'} b_m(r)`.
///
/// `v_m'` is the sum over the corners of the other modes that appears in
/// every interpolated gradient. With one mode it is all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSums {
    rank: usize,
    blend: Vec<f64>,
    excl: Vec<f64>,
}

impl ModeSums {
    /// `c` must be valid for `f`.
    pub fn compute(f: &FactorSet, c: &CellQuery) -> Self {
        let rank = f.rank();
        let modes = c.order();
        let mut blend = vec![0.0; modes * rank];
        for m in 0..modes {
            let k0 = c.k[m] - 1;
            let [w0, w1] = c.weights[m].pair();
            let (lo, hi) = (f.row(m, k0), f.row(m, k0 + 1));
            for r in 0..rank {
                blend[m * rank + r] = lo[r] * w0 + hi[r] * w1;
            }
        }
        // prefix/suffix products avoid dividing by blended values
        let mut excl = vec![1.0; modes * rank];
        let mut run = vec![1.0; rank];
        for m in 0..modes {
            excl[m * rank..(m + 1) * rank].copy_from_slice(&run);
            for r in 0..rank {
                run[r] *= blend[m * rank + r];
            }
        }
        run.fill(1.0);
        for m in (0..modes).rev() {
            for r in 0..rank {
                excl[m * rank + r] *= run[r];
                run[r] *= blend[m * rank + r];
            }
        }
        Self { rank, blend, excl }
    }

    pub fn blended(&self, m: usize) -> &[f64] {
        &self.blend[m * self.rank..(m + 1) * self.rank]
    }

    pub fn excluded(&self, m: usize) -> &[f64] {
        &self.excl[m * self.rank..(m + 1) * self.rank]
    }
}
