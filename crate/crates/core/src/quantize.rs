//! Mapping real samples onto the tensor grid, and tapped delay lines.
//!
//! A [`Discretizer`] with step `delta_x` and grid size `I` sends a sample `x`
//! to the cell `k = floor(x / delta_x) + ceil(I / 2)` (1-based) and the
//! fractional position `u = x / delta_x - floor(x / delta_x)` inside it. The
//! cell is clamped to `[1, I - 1]` so rows `k` and `k + 1` always exist:
//! below the grid `u` is pinned to 0, above it `u` saturates at `1 - 2^-40`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Largest fractional weight handed out; keeps `u < 1` at the upper clamp.
pub const U_MAX: f64 = 1.0 - 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretizer {
    delta_x: f64,
    grid_size: usize,
    offset: i64,
}

/// Fractional cell position `u` and the convex pair `(1 - u, u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpWeights {
    u: f64,
}

impl InterpWeights {
    pub fn new(u: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::invalid(format!("fractional weight {u} not in [0, 1)")));
        }
        Ok(Self { u })
    }

    /// Weight that selects the lower corner only.
    pub const CORNER: InterpWeights = InterpWeights { u: 0.0 };

    pub fn u(&self) -> f64 {
        self.u
    }

    /// `(1 - u, u)`.
    #[inline]
    pub fn pair(&self) -> [f64; 2] {
        [1.0 - self.u, self.u]
    }
}

impl Discretizer {
    pub fn new(delta_x: f64, grid_size: usize) -> Result<Self> {
        if !(delta_x > 0.0 && delta_x.is_finite()) {
            return Err(Error::invalid(format!("grid step must be positive, got {delta_x}")));
        }
        if grid_size < 2 {
            return Err(Error::invalid(format!("grid size must be at least 2, got {grid_size}")));
        }
        Ok(Self {
            delta_x,
            grid_size,
            offset: grid_size.div_ceil(2) as i64,
        })
    }

    /// Grid covering `[-half_range, half_range)` with `grid_size` cells.
    pub fn from_half_range(half_range: f64, grid_size: usize) -> Result<Self> {
        if grid_size == 0 {
            return Err(Error::invalid("grid size must be at least 2, got 0"));
        }
        Self::new(2.0 * half_range / grid_size as f64, grid_size)
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Center offset `ceil(I / 2)`.
    pub fn offset(&self) -> usize {
        self.offset as usize
    }

    /// Cell index `k` (1-based) and interpolation weights for `x`.
    pub fn locate(&self, x: f64) -> Result<(usize, InterpWeights)> {
        if !x.is_finite() {
            return Err(Error::invalid(format!("cannot discretize non-finite sample {x}")));
        }
        let q = x / self.delta_x;
        let fl = q.floor();
        let raw = fl as i64 + self.offset;
        let top = self.grid_size as i64 - 1;
        if raw < 1 {
            Ok((1, InterpWeights { u: 0.0 }))
        } else if raw > top {
            Ok((top as usize, InterpWeights { u: U_MAX }))
        } else {
            // q - floor(q) can round up to 1 for tiny negative q
            let u = (q - fl).min(U_MAX);
            Ok((raw as usize, InterpWeights { u }))
        }
    }

    pub fn disc(&self, x: f64) -> Result<usize> {
        self.locate(x).map(|(k, _)| k)
    }

    pub fn frac_weights(&self, x: f64) -> Result<InterpWeights> {
        self.locate(x).map(|(_, w)| w)
    }

    /// Grid coordinate of 1-based row `k`, i.e. `(k - ceil(I/2)) * delta_x`.
    pub fn grid_point(&self, k: usize) -> f64 {
        (k as i64 - self.offset) as f64 * self.delta_x
    }
}

/// Fixed-length FIFO holding the `P` most recent entries, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TapDelayLine<T> {
    buf: VecDeque<T>,
}

impl<T: Clone> TapDelayLine<T> {
    /// Line of length `len` filled with `fill`.
    pub fn with_fill(len: usize, fill: T) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("delay line length must be at least 1"));
        }
        Ok(Self {
            buf: std::iter::repeat_n(fill, len).collect(),
        })
    }
}

impl<T: Clone + Default> TapDelayLine<T> {
    pub fn new(len: usize) -> Result<Self> {
        Self::with_fill(len, T::default())
    }
}

impl<T> TapDelayLine<T> {
    /// Inserts `v` as the newest entry and returns the evicted oldest one.
    pub fn push(&mut self, v: T) -> T {
        self.buf.push_front(v);
        self.buf.pop_back().expect("delay line is never empty")
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry at slot `p` (0 = newest, i.e. sample `n - p`).
    pub fn get(&self, p: usize) -> Option<&T> {
        self.buf.get(p)
    }

    pub fn newest(&self) -> &T {
        &self.buf[0]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &T> + DoubleEndedIterator {
        self.buf.iter()
    }
}

impl TapDelayLine<f64> {
    pub fn to_vec(&self) -> Vec<f64> {
        self.buf.iter().copied().collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.buf.iter().map(|x| x * x).sum()
    }
}
