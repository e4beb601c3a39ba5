//! Dense tensors, CPD factor sets and the primitive products every model is
//! built from.
//!
//! Multi-indices at the public boundary are 1-based, `(i_1, .., i_M)` with
//! `1 <= i_m <= I_m`. Methods that take plain `usize` row numbers and say
//! "zero-based" are the fast paths used inside the learners.
//!
//! [`DenseTensor`] stores its entries in generalized row-major order: the last
//! index varies fastest.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::complexity::Tally;
use crate::error::{Error, Result};

/// Default cap on the number of entries [`FactorSet::materialize`] may allocate.
pub const DEFAULT_MATERIALIZE_CAP: usize = 10_000_000;

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::invalid("tensor order must be at least 1"));
    }
    if let Some(m) = dims.iter().position(|&d| d == 0) {
        return Err(Error::invalid(format!("dimension {} has extent 0", m + 1)));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::invalid("tensor size overflows usize"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if values.len() != len {
            return Err(Error::invalid(format!(
                "{} values given for dims {:?} (need {})",
                values.len(),
                dims,
                len
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = check_dims(&dims)?;
        Ok(Self {
            dims,
            values: vec![0.0; len],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Entries in row-major order (last index fastest).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Flat offset of a zero-based multi-index. Bounds are not checked.
    #[inline]
    pub fn offset0(&self, idx0: &[usize]) -> usize {
        idx0.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    fn offset1(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dims.len() {
            return Err(Error::invalid(format!(
                "index has {} entries, tensor order is {}",
                idx.len(),
                self.dims.len()
            )));
        }
        let mut off = 0;
        for (m, (&i, &d)) in idx.iter().zip(&self.dims).enumerate() {
            if i == 0 || i > d {
                return Err(Error::invalid(format!(
                    "index {} out of range 1..={} in mode {}",
                    i,
                    d,
                    m + 1
                )));
            }
            off = off * d + (i - 1);
        }
        Ok(off)
    }

    /// Entry at a 1-based multi-index.
    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.values[self.offset1(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let off = self.offset1(idx)?;
        self.values[off] = value;
        Ok(())
    }

    /// Contraction with `v` along 1-based `mode`. The result keeps the order
    /// of `self`, with extent 1 in `mode`.
    pub fn m_mode_vec_product(&self, mode: usize, v: &[f64]) -> Result<DenseTensor> {
        if mode == 0 || mode > self.order() {
            return Err(Error::invalid(format!(
                "mode {} out of range 1..={}",
                mode,
                self.order()
            )));
        }
        let m = mode - 1;
        let extent = self.dims[m];
        if v.len() != extent {
            return Err(Error::invalid(format!(
                "vector length {} does not match mode-{} extent {}",
                v.len(),
                mode,
                extent
            )));
        }
        let outer: usize = self.dims[..m].iter().product();
        let inner: usize = self.dims[m + 1..].iter().product();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for (i, &vi) in v.iter().enumerate() {
                let src = &self.values[(o * extent + i) * inner..][..inner];
                let dst = &mut out[o * inner..][..inner];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s * vi;
                }
            }
        }
        let mut dims = self.dims.clone();
        dims[m] = 1;
        Ok(DenseTensor { dims, values: out })
    }
}

/// CPD factor matrices `A_1 .. A_M`; factor `m` has shape `I_m x R`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    rank: usize,
    dims: Vec<usize>,
    // row-major I_m x R per mode
    factors: Vec<Vec<f64>>,
}

impl FactorSet {
    /// Builds a factor set from row-major `I_m x rank` matrices.
    pub fn new(rank: usize, dims: Vec<usize>, factors: Vec<Vec<f64>>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        check_dims(&dims)?;
        if factors.len() != dims.len() {
            return Err(Error::invalid(format!(
                "{} factor matrices for {} modes",
                factors.len(),
                dims.len()
            )));
        }
        for (m, (f, &d)) in factors.iter().zip(&dims).enumerate() {
            if f.len() != d * rank {
                return Err(Error::invalid(format!(
                    "factor {} has {} entries, expected {}x{}",
                    m + 1,
                    f.len(),
                    d,
                    rank
                )));
            }
        }
        Ok(Self {
            rank,
            dims,
            factors,
        })
    }

    /// Builds a factor set from per-mode lists of columns (`columns[m][r]` has length `I_m`).
    pub fn from_columns(columns: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let rank = columns.first().map_or(0, Vec::len);
        let mut dims = Vec::with_capacity(columns.len());
        let mut factors = Vec::with_capacity(columns.len());
        for (m, cols) in columns.iter().enumerate() {
            if cols.len() != rank {
                return Err(Error::invalid(format!(
                    "mode {} has {} columns, mode 1 has {}",
                    m + 1,
                    cols.len(),
                    rank
                )));
            }
            let rows = cols.first().map_or(0, Vec::len);
            if cols.iter().any(|c| c.len() != rows) {
                return Err(Error::invalid(format!("ragged columns in mode {}", m + 1)));
            }
            let mut data = vec![0.0; rows * rank];
            for (r, col) in cols.iter().enumerate() {
                for (i, &x) in col.iter().enumerate() {
                    data[i * rank + r] = x;
                }
            }
            dims.push(rows);
            factors.push(data);
        }
        Self::new(rank, dims, factors)
    }

    pub fn filled(rank: usize, dims: Vec<usize>, value: f64) -> Result<Self> {
        let factors = dims.iter().map(|&d| vec![value; d * rank]).collect();
        Self::new(rank, dims, factors)
    }

    /// I.i.d. Gaussian entries with mean 0 and the given standard deviation.
    pub fn random_normal<R: Rng + ?Sized>(
        rank: usize,
        dims: Vec<usize>,
        std_dev: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, std_dev)
            .map_err(|e| Error::invalid(format!("bad standard deviation {std_dev}: {e}")))?;
        let factors = dims
            .iter()
            .map(|&d| (0..d * rank).map(|_| normal.sample(rng)).collect())
            .collect();
        Self::new(rank, dims, factors)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Row-major `I_m x R` data of zero-based mode `m`.
    pub fn factor(&self, m: usize) -> &[f64] {
        &self.factors[m]
    }

    pub fn factor_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.factors[m]
    }

    /// Row `i` of factor `m`, both zero-based.
    #[inline]
    pub fn row(&self, m: usize, i: usize) -> &[f64] {
        &self.factors[m][i * self.rank..(i + 1) * self.rank]
    }

    #[inline]
    pub fn row_mut(&mut self, m: usize, i: usize) -> &mut [f64] {
        let r = self.rank;
        &mut self.factors[m][i * r..(i + 1) * r]
    }

    fn check_index(&self, idx: &[usize], skip: Option<usize>) -> Result<()> {
        if idx.len() != self.order() {
            return Err(Error::invalid(format!(
                "index has {} entries, factor set has {} modes",
                idx.len(),
                self.order()
            )));
        }
        for (m, (&i, &d)) in idx.iter().zip(&self.dims).enumerate() {
            if Some(m) == skip {
                continue;
            }
            if i == 0 || i > d {
                return Err(Error::invalid(format!(
                    "row {} out of range 1..={} in mode {}",
                    i,
                    d,
                    m + 1
                )));
            }
        }
        Ok(())
    }

    /// `sum_r prod_m A_m(i_m, r)` at a 1-based multi-index.
    pub fn evaluate(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx, None)?;
        let idx0: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        Ok(self.evaluate0(&idx0, &mut crate::complexity::NoTally))
    }

    /// Zero-based CPD evaluation. Costs `(M-1)R` multiplications and `R-1` additions.
    pub fn evaluate0<T: Tally>(&self, idx0: &[usize], tally: &mut T) -> f64 {
        let rank = self.rank;
        let mut sum = 0.0;
        for r in 0..rank {
            let mut prod = self.factors[0][idx0[0] * rank + r];
            for (f, &i) in self.factors.iter().zip(idx0).skip(1) {
                prod *= f[i * rank + r];
            }
            tally.mul(self.order() as u64 - 1);
            if r == 0 {
                sum = prod;
            } else {
                sum += prod;
                tally.add(1);
            }
        }
        sum
    }

    /// Elementwise product of the rows `A_m(i_m, :)` over every mode except
    /// `exclude` (1-based). The excluded entry of `idx` is ignored. With a
    /// single mode the result is the all-ones row.
    pub fn hadamard_row_product(&self, idx: &[usize], exclude: usize) -> Result<Vec<f64>> {
        if exclude == 0 || exclude > self.order() {
            return Err(Error::invalid(format!(
                "excluded mode {} out of range 1..={}",
                exclude,
                self.order()
            )));
        }
        self.check_index(idx, Some(exclude - 1))?;
        let mut out = vec![1.0; self.rank];
        for (m, &i) in idx.iter().enumerate() {
            if m == exclude - 1 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(m, i - 1)) {
                *o *= a;
            }
        }
        Ok(out)
    }

    /// Total number of entries of the full tensor this factor set represents.
    pub fn full_len(&self) -> Option<usize> {
        self.dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
    }

    /// Dense tensor with every entry given by [`FactorSet::evaluate`].
    pub fn materialize(&self) -> Result<DenseTensor> {
        self.materialize_with_cap(DEFAULT_MATERIALIZE_CAP)
    }

    pub fn materialize_with_cap(&self, cap: usize) -> Result<DenseTensor> {
        let len = self.full_len().unwrap_or(usize::MAX);
        if len > cap {
            return Err(Error::ResourceLimit {
                what: "materialized tensor",
                requested: len,
                cap,
            });
        }
        let mut values = Vec::with_capacity(len);
        let mut idx0 = vec![0usize; self.order()];
        for _ in 0..len {
            values.push(self.evaluate0(&idx0, &mut crate::complexity::NoTally));
            // odometer, last index fastest
            for m in (0..idx0.len()).rev() {
                idx0[m] += 1;
                if idx0[m] < self.dims[m] {
                    break;
                }
                idx0[m] = 0;
            }
        }
        DenseTensor::new(self.dims.clone(), values)
    }

    /// Sum of squares of all factor entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.factors.iter().flatten().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.factors.iter().flatten().all(|x| x.is_finite())
    }
}

/// The `2 x 2 x .. x 2` cell of a lookup tensor around a query point.
///
/// Corner `(l_1, .., l_M)` lives at flat position `sum_m l_m 2^(M-m)`, i.e.
/// binary counting with `l_M` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SubTensor {
    order: usize,
    values: Vec<f64>,
}

impl SubTensor {
    pub fn new(order: usize, values: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("subtensor order must be at least 1"));
        }
        if order >= usize::BITS as usize || values.len() != 1usize << order {
            return Err(Error::invalid(format!(
                "subtensor of order {} needs 2^{} values, got {}",
                order,
                order,
                values.len()
            )));
        }
        Ok(Self { order, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Flat position of corner labels `(l_1, .., l_M)`.
    pub fn corner_offset(labels: &[u8]) -> usize {
        labels.iter().fold(0, |acc, &l| (acc << 1) | l as usize)
    }

    pub fn get(&self, labels: &[u8]) -> f64 {
        self.values[Self::corner_offset(labels)]
    }
}

/// Labels `(l_1, .., l_M)` of corner `c` in the fixed enumeration order.
pub fn corner_labels(order: usize, c: usize) -> impl Iterator<Item = usize> {
    (0..order).map(move |m| (c >> (order - 1 - m)) & 1)
}
