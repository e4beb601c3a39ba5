//! Per-sample arithmetic cost of every learner, in closed form and counted at
//! runtime.
//!
//! [`cost`] evaluates the closed-form forward/backward formulas for a given
//! `(P, R, M, I)`. The learners' forward and backward passes are generic over
//! a [`Tally`], so the same code runs uninstrumented ([`NoTally`]) or counting
//! into an [`Ops`].
//!
//! Conventions of the runtime counters: discretization (cell index, the
//! weight pair `(1 - u, u)`, corner weights) is not counted; divisions are
//! only the step-size normalizations.

use std::fmt;
use std::str::FromStr;

use crate::adaptive::AdaptiveModel;
use crate::error::{Error, Result};

/// Sink for arithmetic operation counts.
pub trait Tally {
    fn mul(&mut self, n: u64);
    fn add(&mut self, n: u64);
    fn div(&mut self, n: u64);
}

/// Discards all counts; compiles away.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTally;

impl Tally for NoTally {
    #[inline(always)]
    fn mul(&mut self, _: u64) {}
    #[inline(always)]
    fn add(&mut self, _: u64) {}
    #[inline(always)]
    fn div(&mut self, _: u64) {}
}

/// Multiplication, addition and division counts.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ops {
    pub mult: u64,
    pub add: u64,
    pub div: u64,
}

impl Ops {
    pub const fn new(mult: u64, add: u64, div: u64) -> Self {
        Self { mult, add, div }
    }
}

impl Tally for Ops {
    fn mul(&mut self, n: u64) {
        self.mult += n;
    }
    fn add(&mut self, n: u64) {
        self.add += n;
    }
    fn div(&mut self, n: u64) {
        self.div += n;
    }
}

impl std::ops::Add for Ops {
    type Output = Ops;
    fn add(self, o: Ops) -> Ops {
        Ops::new(self.mult + o.mult, self.add + o.add, self.div + o.div)
    }
}

impl fmt::Display for Ops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mult / {} add / {} div", self.mult, self.add, self.div)
    }
}

/// Forward (estimation) and backward (update) cost of one sample.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub forward: Ops,
    pub backward: Ops,
}

impl OpCount {
    pub fn total(&self) -> Ops {
        self.forward + self.backward
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostAlgorithm {
    Lms,
    TensorOnly,
    ITensorOnly,
    Tlms,
    Lmst,
    ITlms,
    ILmst,
}

impl CostAlgorithm {
    pub const ALL: [CostAlgorithm; 7] = [
        CostAlgorithm::Lms,
        CostAlgorithm::TensorOnly,
        CostAlgorithm::ITensorOnly,
        CostAlgorithm::Tlms,
        CostAlgorithm::Lmst,
        CostAlgorithm::ITlms,
        CostAlgorithm::ILmst,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CostAlgorithm::Lms => "lms",
            CostAlgorithm::TensorOnly => "tensor_only",
            CostAlgorithm::ITensorOnly => "itensor_only",
            CostAlgorithm::Tlms => "tlms",
            CostAlgorithm::Lmst => "lmst",
            CostAlgorithm::ITlms => "itlms",
            CostAlgorithm::ILmst => "ilmst",
        }
    }
}

impl FromStr for CostAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CostAlgorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Parameters of one cost evaluation. Fields an algorithm does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostInput {
    pub algorithm: CostAlgorithm,
    /// FIR length.
    pub p: u64,
    /// CPD rank.
    pub r: u64,
    /// Tensor order.
    pub m: u64,
    /// Grid size per mode.
    pub i: u64,
}

fn ops(mult: i128, add: i128, div: i128) -> Result<Ops> {
    let conv = |v: i128, what: &str| {
        u64::try_from(v).map_err(|_| Error::invalid(format!("{what} count {v} is out of range for these parameters")))
    };
    Ok(Ops::new(conv(mult, "mult")?, conv(add, "add")?, conv(div, "div")?))
}

/// Closed-form operation count per sample.
pub fn cost(input: &CostInput) -> Result<OpCount> {
    let needs_tensor = input.algorithm != CostAlgorithm::Lms;
    let needs_fir = !matches!(input.algorithm, CostAlgorithm::TensorOnly | CostAlgorithm::ITensorOnly);
    if needs_fir && input.p == 0 {
        return Err(Error::invalid("FIR length P must be positive"));
    }
    if needs_tensor && (input.r == 0 || input.m == 0 || input.i == 0) {
        return Err(Error::invalid("R, M and I must be positive"));
    }
    if input.m > 60 {
        return Err(Error::invalid(format!("tensor order {} too large", input.m)));
    }
    let (p, r, m, i) = (input.p as i128, input.r as i128, input.m as i128, input.i as i128);
    let pow = |e: i128| 1i128 << e;
    let (forward, backward) = match input.algorithm {
        CostAlgorithm::Lms => (ops(p, p - 1, 0)?, ops(2 * p + 1, 2 * p, 1)?),
        CostAlgorithm::TensorOnly => (
            ops((m - 1) * r, r - 1, 0)?,
            ops(m * r * (1 + r * (m - 1) + i), m * r * (1 + i), m)?,
        ),
        CostAlgorithm::ITensorOnly => (
            ops(pow(m) * m * r, pow(m) * m * r - 1, 0)?,
            ops(
                2 * m + r * m * (1 + pow(m - 1) * (2 * m - 3) + i),
                m * r * (pow(m - 1) + i),
                m,
            )?,
        ),
        CostAlgorithm::Tlms => (
            ops(p + r * (m - 1), p + r - 2, 0)?,
            ops(
                m * r * (p * (m - 1) + i) + 2 * p * (m + 1) + 1,
                2 * p + m * r * i * (p + 1),
                1 + m,
            )?,
        ),
        CostAlgorithm::Lmst => (
            ops(p + r * (m - 1), p + r - 2, 0)?,
            ops(
                1 + 2 * p + m * (p + 1 + r * (2 * m - 2 + i)),
                m * (r * (3 + i) + p - 1) + p,
                1 + m,
            )?,
        ),
        CostAlgorithm::ITlms => (
            ops(pow(m) * r * m + p, pow(m) * r * m + p - 2, 0)?,
            ops(
                m * r * p * (3 + pow(m - 1) * (2 * m - 3)) + i * r * (m + 1) + m * m + 2 * p,
                i * r * (1 + m) + p * (pow(2 * m - 1) + pow(m - 1) * (1 - r) + 2) - m,
                1 + m,
            )?,
        ),
        CostAlgorithm::ILmst => (
            ops(pow(m) * r * m + p, pow(m) * r * m + p - 2, 0)?,
            ops(
                p * (m + 2) + 2 * (m + 1) + m * r * (2 + pow(m) * (2 * m - 3) + i),
                2 * p + m * r * (pow(m - 1) * 3 + i + 1) - 1,
                1 + m,
            )?,
        ),
    };
    Ok(OpCount { forward, backward })
}

/// Runs one forward pass of `model` on sample `x_n` and returns the output
/// with the arithmetic it performed.
pub fn counted_forward(model: &mut dyn AdaptiveModel, x_n: f64) -> Result<(f64, Ops)> {
    let mut ops = Ops::default();
    let y = model.predict_counted(x_n, &mut ops)?;
    Ok((y, ops))
}

/// Runs one backward pass (after a forward pass) and returns its arithmetic.
pub fn counted_backward(model: &mut dyn AdaptiveModel, e_n: f64) -> Result<Ops> {
    let mut ops = Ops::default();
    model.adapt_counted(e_n, &mut ops)?;
    Ok(ops)
}

/// Shape parameters of the four tensor-based columns of a complexity report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportShapes {
    /// `true` when the cascade columns are Tensor-LMS, `false` for LMS-Tensor.
    pub hammerstein: bool,
    pub tensor_only: CostInput,
    pub cascade: CostInput,
    pub itensor_only: CostInput,
    pub icascade: CostInput,
}

/// One experiment's totals for the four tensor-based algorithms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityRow {
    pub experiment: u8,
    pub tensor_only: Ops,
    pub cascade: Ops,
    pub itensor_only: Ops,
    pub icascade: Ops,
}

impl ComplexityRow {
    pub fn compute(experiment: u8, shapes: &ReportShapes) -> Result<Self> {
        Ok(Self {
            experiment,
            tensor_only: cost(&shapes.tensor_only)?.total(),
            cascade: cost(&shapes.cascade)?.total(),
            itensor_only: cost(&shapes.itensor_only)?.total(),
            icascade: cost(&shapes.icascade)?.total(),
        })
    }

    pub fn columns(&self) -> [Ops; 4] {
        [self.tensor_only, self.cascade, self.itensor_only, self.icascade]
    }
}

pub const REPORT_COLUMNS: [&str; 4] = ["Tensor-only", "TLMS/LMST", "intpol Tensor-only", "intpol TLMS/LMST"];

/// Plain-text table, one block of Mult./Add./Div. rows per experiment.
type OpLine = (&'static str, fn(&Ops) -> u64);

pub fn report_text(rows: &[ComplexityRow]) -> String {
    let mut out = format!(
        "{:<10} {:<9} {:>12} {:>12} {:>20} {:>18}\n",
        "Experiment", "Operation", REPORT_COLUMNS[0], REPORT_COLUMNS[1], REPORT_COLUMNS[2], REPORT_COLUMNS[3]
    );
    for row in rows {
        let cols = row.columns();
        let lines: [OpLine; 3] = [("Mult.", |o| o.mult), ("Add.", |o| o.add), ("Div.", |o| o.div)];
        for (j, (label, get)) in lines.iter().enumerate() {
            let exp = if j == 0 { row.experiment.to_string() } else { String::new() };
            out.push_str(&format!(
                "{:<10} {:<9} {:>12} {:>12} {:>20} {:>18}\n",
                exp,
                label,
                get(&cols[0]),
                get(&cols[1]),
                get(&cols[2]),
                get(&cols[3])
            ));
        }
    }
    out
}

/// CSV with header `experiment,operation,tensor_only,cascade,itensor_only,icascade`.
pub fn report_csv(rows: &[ComplexityRow]) -> String {
    let mut out = String::from("experiment,operation,tensor_only,cascade,itensor_only,icascade\n");
    for row in rows {
        let c = row.columns();
        out.push_str(&format!(
            "{},mult,{},{},{},{}\n",
            row.experiment, c[0].mult, c[1].mult, c[2].mult, c[3].mult
        ));
        out.push_str(&format!("{},add,{},{},{},{}\n", row.experiment, c[0].add, c[1].add, c[2].add, c[3].add));
        out.push_str(&format!("{},div,{},{},{},{}\n", row.experiment, c[0].div, c[1].div, c[2].div, c[3].div));
    }
    out
}
