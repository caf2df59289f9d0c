//! Cost of a single observation as a function of its precision and the
//! dimension, and the auxiliary cost of estimating one real number under
//! Gaussian noise.
//!
//! Costs live in `[1, +inf]`. Infinity is an ordinary value: sums that touch
//! it are infinite and minima ignore it.

use crate::error::{Error, Result};
use crate::numeric::ceil_tolerant;

/// Growth rate of a cost function in `sigma^-1`, `d`, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Growth {
    Polynomial,
    SubExponential,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthVariable {
    Joint,
    SigmaOnly,
    DimOnly,
}

/// Result of a growth query; `class` is `None` when the model cannot be
/// classified (a table without a declared envelope).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthClass {
    pub variable: GrowthVariable,
    pub class: Option<Growth>,
}

/// How a cost table is read between grid precisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Value at the nearest grid precision at or below `sigma` (the more
    /// expensive neighbour).
    Conservative,
    /// Linear in `(ln sigma, ln cost)`.
    LogLinear,
}

/// Declared growth of a tabulated cost beyond its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableEnvelope {
    pub sigma: Growth,
    pub dim: Growth,
}

/// Costs tabulated on an increasing precision grid, one row per dimension
/// `d = 1, 2, ...`. Below the smallest grid precision, and for dimensions
/// without a row, the cost is `+inf`; above the largest it stays constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    sigmas: Vec<f64>,
    rows: Vec<Vec<f64>>,
    interpolation: Interpolation,
    envelope: Option<TableEnvelope>,
}

impl CostTable {
    pub fn new(
        sigmas: Vec<f64>,
        rows: Vec<Vec<f64>>,
        interpolation: Interpolation,
        envelope: Option<TableEnvelope>,
    ) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::param("sigmas", "empty precision grid"));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::param("sigmas", "precisions must be finite and positive"));
        }
        if sigmas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("sigmas", "precision grid must be strictly increasing"));
        }
        if rows.is_empty() {
            return Err(Error::param("costs", "no rows"));
        }
        for row in &rows {
            if row.len() != sigmas.len() {
                return Err(Error::LengthMismatch {
                    what: "cost table row",
                    expected: sigmas.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|c| c.is_nan() || *c < 1.0) {
                return Err(Error::param("costs", "every cost must be at least 1"));
            }
            if row.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::param("costs", "cost must not increase with sigma"));
            }
        }
        for pair in rows.windows(2) {
            if pair[1].iter().zip(&pair[0]).any(|(hi, lo)| hi < lo) {
                return Err(Error::param("costs", "cost must not decrease with d"));
            }
        }
        Ok(CostTable {
            sigmas,
            rows,
            interpolation,
            envelope,
        })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn envelope(&self) -> Option<TableEnvelope> {
        self.envelope
    }

    fn eval(&self, sigma: f64, d: u32) -> f64 {
        let Some(row) = self.rows.get(d as usize - 1) else {
            return f64::INFINITY;
        };
        // first grid index with sigmas[k] > sigma
        let k = self.sigmas.partition_point(|s| *s <= sigma);
        if k == 0 {
            return f64::INFINITY;
        }
        if k == self.sigmas.len() || self.sigmas[k - 1] == sigma {
            return row[k - 1];
        }
        match self.interpolation {
            Interpolation::Conservative => row[k - 1],
            Interpolation::LogLinear => {
                let (s0, s1) = (self.sigmas[k - 1].ln(), self.sigmas[k].ln());
                let (c0, c1) = (row[k - 1].ln(), row[k].ln());
                if c0.is_infinite() {
                    return row[k - 1];
                }
                let w = (sigma.ln() - s0) / (s1 - s0);
                (c0 + w * (c1 - c0)).exp().max(row[k])
            }
        }
    }
}

/// The cost function `$(sigma, d)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    /// `1 + D d^t sigma^(-2s)`.
    Polynomial { d_coef: f64, t: f64, s: f64 },
    /// Unit cost at precision `sigma0` or coarser, unavailable below.
    Step { sigma0: f64 },
    /// Exact information at unit cost.
    Exact,
    Table(CostTable),
}

/// Line `alpha * x` touching `x -> $(x^(-1/2), d)` at `x0` from below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportingLine {
    pub x0: f64,
    pub alpha: f64,
    /// The cost is affine in `x` (`s = 1`): the line is only an asymptote
    /// and `x0` is infinite.
    pub asymptotic: bool,
}

/// Interval enclosing the auxiliary cost `$^(sigma, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxCostBounds {
    pub lower: f64,
    pub upper: f64,
    /// `lower == upper` holds analytically, not just numerically.
    pub exact: bool,
}

fn check_nonneg(name: &'static str, x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::param(name, "must be finite and nonnegative"));
    }
    Ok(())
}

impl CostModel {
    pub fn polynomial(d_coef: f64, t: f64, s: f64) -> Result<Self> {
        check_nonneg("D", d_coef)?;
        check_nonneg("t", t)?;
        check_nonneg("s", s)?;
        Ok(CostModel::Polynomial { d_coef, t, s })
    }

    pub fn step(sigma0: f64) -> Result<Self> {
        check_nonneg("sigma0", sigma0)?;
        Ok(CostModel::Step { sigma0 })
    }

    /// `(D, t, s)` of a polynomial cost; exact cost reads as `(0, 0, 0)`.
    pub fn polynomial_params(&self) -> Option<(f64, f64, f64)> {
        match self {
            CostModel::Polynomial { d_coef, t, s } => Some((*d_coef, *t, *s)),
            CostModel::Exact => Some((0.0, 0.0, 0.0)),
            CostModel::Step { sigma0 } if *sigma0 == 0.0 => Some((0.0, 0.0, 0.0)),
            _ => None,
        }
    }

    /// True when every observation costs exactly 1.
    pub fn is_unit(&self) -> bool {
        match self {
            CostModel::Exact => true,
            CostModel::Step { sigma0 } => *sigma0 == 0.0,
            CostModel::Polynomial { d_coef, .. } => *d_coef == 0.0,
            CostModel::Table(_) => false,
        }
    }

    /// `$(sigma, d)`.
    pub fn eval(&self, sigma: f64, d: u32) -> Result<f64> {
        if !(sigma >= 0.0) {
            return Err(Error::param("sigma", "must be nonnegative"));
        }
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        Ok(self.eval_unchecked(sigma, d))
    }

    pub(crate) fn eval_unchecked(&self, sigma: f64, d: u32) -> f64 {
        match self {
            CostModel::Polynomial { d_coef, t, s } => {
                if *d_coef == 0.0 || *s == 0.0 {
                    return 1.0 + d_coef * (d as f64).powf(*t);
                }
                if sigma == 0.0 {
                    return f64::INFINITY;
                }
                1.0 + d_coef * (d as f64).powf(*t) * sigma.powf(-2.0 * s)
            }
            CostModel::Step { sigma0 } => {
                if sigma >= *sigma0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            CostModel::Exact => 1.0,
            CostModel::Table(table) => table.eval(sigma, d),
        }
    }

    pub fn growth_class(&self, variable: GrowthVariable) -> GrowthClass {
        let class = match self {
            CostModel::Polynomial { .. } | CostModel::Exact => Some(Growth::Polynomial),
            CostModel::Step { sigma0 } => Some(if *sigma0 == 0.0 {
                Growth::Polynomial
            } else {
                // ln(+inf) below the threshold
                Growth::Exponential
            }),
            CostModel::Table(table) => table.envelope.map(|env| match variable {
                GrowthVariable::SigmaOnly => env.sigma,
                GrowthVariable::DimOnly => env.dim,
                GrowthVariable::Joint => env.sigma.max(env.dim),
            }),
        };
        GrowthClass { variable, class }
    }

    /// Supporting line of `h1(x) = $(x^(-1/2), d)` through the origin, for
    /// polynomial costs with `s >= 1` and `D > 0`.
    pub fn supporting_line(&self, d: u32) -> Option<SupportingLine> {
        let CostModel::Polynomial { d_coef, t, s } = self else {
            return None;
        };
        if *d_coef == 0.0 || *s < 1.0 || d == 0 {
            return None;
        }
        let k = d_coef * (d as f64).powf(*t);
        if *s == 1.0 {
            return Some(SupportingLine {
                x0: f64::INFINITY,
                alpha: k,
                asymptotic: true,
            });
        }
        let s = *s;
        Some(SupportingLine {
            x0: ((s - 1.0) * k).powf(-1.0 / s),
            alpha: s * (s - 1.0).powf(1.0 / s - 1.0) * k.powf(1.0 / s),
            asymptotic: false,
        })
    }

    /// Bounds on the auxiliary cost `$^(sigma, d)`.
    ///
    /// The upper bound repeats an observation at a coarser anchor precision
    /// `a` and averages: `ceil(a^2 / sigma^2) * $(a, d)`. Anchors are `sigma`
    /// itself, the optional `sigma0`, the tangency precision `x0^(-1/2)` of
    /// the supporting line, a step threshold, or the grid of a table.
    pub fn aux_cost_bounds(&self, sigma: f64, d: u32, sigma0: Option<f64>) -> Result<AuxCostBounds> {
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if let Some(a) = sigma0 {
            if !(a > 0.0) {
                return Err(Error::param("sigma0", "must be positive"));
            }
        }
        let exact_value = |v: f64| AuxCostBounds {
            lower: v,
            upper: v,
            exact: true,
        };
        let mut anchors: Vec<f64> = vec![sigma];
        anchors.extend(sigma0);
        let lower = match self {
            CostModel::Exact => return Ok(exact_value(1.0)),
            CostModel::Step { sigma0: thr } => {
                if *thr == 0.0 {
                    return Ok(exact_value(1.0));
                }
                anchors.push(*thr);
                1.0
            }
            CostModel::Polynomial { s, .. } if *s <= 1.0 => {
                return Ok(exact_value(self.eval_unchecked(sigma, d)));
            }
            CostModel::Polynomial { .. } => {
                let line = self.supporting_line(d).expect("s > 1 and D > 0");
                anchors.push(line.x0.powf(-0.5));
                (line.alpha / (sigma * sigma)).max(1.0)
            }
            CostModel::Table(table) => {
                anchors.extend_from_slice(table.sigmas());
                1.0
            }
        };
        let upper = self.repetition_upper(sigma, d, &anchors);
        Ok(AuxCostBounds {
            lower,
            upper: upper.max(lower),
            exact: false,
        })
    }

    fn repetition_upper(&self, sigma: f64, d: u32, anchors: &[f64]) -> f64 {
        anchors
            .iter()
            .map(|&a| {
                let reps = ceil_tolerant((a * a) / (sigma * sigma)).max(1.0);
                reps * self.eval_unchecked(a, d)
            })
            .fold(f64::INFINITY, f64::min)
    }
}
