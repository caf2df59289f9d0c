//! Worst-case setting with bounded noise.
//!
//! Observations of the eigen-coordinates `<f, f_i*>` are perturbed by errors
//! `|e_i| <= sigma_i`. The linear algorithm `Phi_n(y) = sum y_i S(f_i*)` has
//! error `sqrt(sum sigma_i^2 lambda_i + lambda_{n+1})`; the radius of the
//! same information is smaller and is a fractional-knapsack optimum.

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::spectra::Spectrum;

/// Allocations longer than this are not materialized as witnesses.
pub const WITNESS_LIMIT: u64 = 4096;

/// Precisions `sigma_1..sigma_n` of `n` observations in dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAllocation {
    pub sigma: Vec<f64>,
    pub d: u32,
}

impl PrecisionAllocation {
    pub fn new(sigma: Vec<f64>, d: u32) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::param("sigma", "at least one observation is required"));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::param("sigma", "precisions must be finite and nonnegative"));
        }
        Ok(PrecisionAllocation { sigma, d })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `sum $(sigma_i, d)`.
    pub fn cost(&self, cost: &CostModel) -> Result<f64> {
        let terms: Result<Vec<f64>> = self.sigma.iter().map(|s| cost.eval(*s, self.d)).collect();
        let terms = terms?;
        if terms.iter().any(|t| t.is_infinite()) {
            return Ok(f64::INFINITY);
        }
        Ok(compensated_sum(terms))
    }
}

fn check_prefix(lambda: &[f64], sigma: &[f64]) -> Result<()> {
    if lambda.len() != sigma.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "eigenvalue prefix must have one entry more than sigma",
            expected: sigma.len() + 1,
            got: lambda.len(),
        });
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::param("lambda", "eigenvalues must be finite and nonnegative"));
    }
    if lambda.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::param("lambda", "eigenvalues must be non-increasing"));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::param("sigma", "precisions must be finite and nonnegative"));
    }
    Ok(())
}

/// Error of `Phi_n` on information with precisions `sigma`:
/// `sqrt(sum_{i<=n} sigma_i^2 lambda_i + lambda_{n+1})`.
pub fn noisy_error(lambda: &[f64], sigma: &[f64]) -> Result<f64> {
    check_prefix(lambda, sigma)?;
    let n = sigma.len();
    let mut acc: crate::numeric::CompensatedSum =
        sigma.iter().zip(lambda).map(|(s, l)| s * s * l).collect();
    acc.add(lambda[n]);
    Ok(acc.value().sqrt())
}

/// Radius of the same information: the maximum of `sum lambda_i b_i` over
/// `0 <= b_i <= sigma_i^2` (`i <= n`), unconstrained `b_i >= 0` beyond `n`,
/// and `sum b_i <= 1`. With non-increasing eigenvalues the greedy fill is
/// optimal, which gives
/// `sqrt(sum_{i<=l} sigma_i^2 (lambda_i - lambda_{l+1}) + lambda_{l+1})`
/// for the largest `l <= n` with `sum_{i<=l} sigma_i^2 < 1`.
pub fn radius_noisy(lambda: &[f64], sigma: &[f64]) -> Result<f64> {
    check_prefix(lambda, sigma)?;
    let mut used = 0.0;
    let mut ell = 0;
    for (k, s) in sigma.iter().enumerate() {
        if used + s * s < 1.0 {
            used += s * s;
            ell = k + 1;
        } else {
            break;
        }
    }
    let tail = lambda[ell];
    let head = compensated_sum(
        sigma[..ell]
            .iter()
            .zip(lambda)
            .map(|(s, l)| s * s * (l - tail)),
    );
    Ok((head + tail).sqrt())
}

/// Output of [`optimal_precisions`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPrecisions {
    /// `max(2, n_exact(eps / sqrt 2))`.
    pub n: u64,
    /// Precisions of the observed indices; indices whose eigenvalue is zero
    /// are not observed, so this may be shorter than `n`.
    pub allocation: PrecisionAllocation,
    /// `psi_n = (observations) + D d^t sum sigma_i^(-2s)`.
    pub psi: f64,
    /// Number of indices among `1..n` skipped because their eigenvalue is 0.
    pub skipped: u64,
}

fn poly_cost(cost: &CostModel) -> Result<(f64, f64)> {
    match cost {
        CostModel::Polynomial { d_coef, t, s } if *s > 0.0 => Ok((*d_coef, *t)),
        _ => Err(Error::param("cost", "a polynomial cost with s > 0 is required")),
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    Ok(())
}

fn cost_scale(d_coef: f64, t: f64, d: u32) -> f64 {
    d_coef * (d as f64).powf(t)
}

/// Minimizer of `psi_n(sigma) = n + D d^t sum sigma_i^(-2s)` under
/// `sum sigma_i^2 lambda_i + lambda_{n+1} <= eps^2 lambda_1`:
/// `sigma_k^-2 = r_k^(1/(s+1)) * sum_i r_i^(s/(s+1)) / (eps^2 - r_{n+1})`.
pub fn optimal_precisions(spec: &Spectrum, eps: f64, cost: &CostModel) -> Result<OptimalPrecisions> {
    check_eps(eps)?;
    let (d_coef, t) = poly_cost(cost)?;
    let s = cost.polynomial_params().expect("polynomial").2;
    let n = spec.n_exact(eps / 2f64.sqrt())?.n.max(2);
    let ratios = spec.ratios(n as usize + 1)?;
    let tail = ratios[n as usize];
    let budget = eps * eps - tail;
    let observed: Vec<f64> = ratios[..n as usize].iter().copied().filter(|r| *r > 0.0).collect();
    let skipped = n - observed.len() as u64;
    let p = compensated_sum(observed.iter().map(|r| r.powf(s / (s + 1.0))));
    let sigma: Vec<f64> = observed
        .iter()
        .map(|r| (r.powf(1.0 / (s + 1.0)) * p / budget).powf(-0.5))
        .collect();
    let k = cost_scale(d_coef, t, spec.dim());
    let psi = observed.len() as f64 + k * p.powf(s + 1.0) * budget.powf(-s);
    Ok(OptimalPrecisions {
        n,
        allocation: PrecisionAllocation::new(sigma, spec.dim())?,
        psi,
        skipped,
    })
}

/// How an upper bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperMethod {
    /// Exact observations at cost `1 + D d^t`: `(1 + D d^t) n_exact(eps)`.
    ExactObservations,
    /// Optimized precisions, `n + 2^s D d^t (sum r_i^(s/(s+1)))^(s+1) eps^(-2s)`.
    OptimizedPrecisions,
    /// `n` observations at one affordable precision `sigma`.
    UniformPrecision { sigma: f64 },
    /// No affordable design was found.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    pub value: f64,
    pub n: u64,
    pub method: UpperMethod,
    /// Precisions achieving the bound, when `n <= WITNESS_LIMIT`.
    pub allocation: Option<PrecisionAllocation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    /// `sum_{k <= n_exact(eps)} $(eps / sqrt(r_k), d)`.
    pub value: f64,
    /// `max(n_exact(eps) $(1, d), $(eps, d))`.
    pub simplified: f64,
    pub n_exact: u64,
}

/// Lower and upper bounds on the bounded-noise complexity at one `(eps, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityBounds {
    pub lower: f64,
    pub upper: f64,
    pub witness_n: u64,
    pub witness_allocation: Option<PrecisionAllocation>,
}

fn witness(sigma: impl FnOnce() -> Result<Vec<f64>>, n: u64, d: u32) -> Result<Option<PrecisionAllocation>> {
    if n == 0 || n > WITNESS_LIMIT {
        return Ok(None);
    }
    Ok(Some(PrecisionAllocation::new(sigma()?, d)?))
}

/// Upper bound on the bounded-noise complexity, with a witness design.
pub fn comp_upper_ww(spec: &Spectrum, eps: f64, cost: &CostModel) -> Result<UpperBound> {
    check_eps(eps)?;
    let d = spec.dim();
    if let Some((d_coef, t, s)) = cost.polynomial_params() {
        let k = cost_scale(d_coef, t, d);
        if s == 0.0 || d_coef == 0.0 {
            let n = spec.n_exact(eps)?.n;
            return Ok(UpperBound {
                value: (1.0 + k) * n as f64,
                n,
                method: UpperMethod::ExactObservations,
                allocation: witness(|| Ok(vec![0.0; n as usize]), n, d)?,
            });
        }
        let n = spec.n_exact(eps / 2f64.sqrt())?.n.max(2);
        let p = spec.power_sum(n, s / (s + 1.0))?;
        let value = n as f64 + 2f64.powf(s) * k * p.powf(s + 1.0) * eps.powf(-2.0 * s);
        let allocation = if n <= WITNESS_LIMIT {
            Some(optimal_precisions(spec, eps, cost)?.allocation)
        } else {
            None
        };
        return Ok(UpperBound {
            value,
            n,
            method: UpperMethod::OptimizedPrecisions,
            allocation,
        });
    }
    let candidates: Vec<f64> = match cost {
        CostModel::Step { sigma0 } => vec![*sigma0],
        CostModel::Table(table) => table.sigmas().to_vec(),
        _ => unreachable!("polynomial-like costs handled above"),
    };
    uniform_upper(spec, eps, cost, &candidates)
}

/// Best design with a single precision from `candidates`: for each, search
/// `n = n_exact(theta eps)` over a grid of `theta` for the cheapest `n` with
/// `sigma^2 sum_{i<=n} r_i + r_{n+1} <= eps^2`.
fn uniform_upper(spec: &Spectrum, eps: f64, cost: &CostModel, candidates: &[f64]) -> Result<UpperBound> {
    let d = spec.dim();
    let mut best = UpperBound {
        value: f64::INFINITY,
        n: 0,
        method: UpperMethod::Unavailable,
        allocation: None,
    };
    for &sigma in candidates {
        if sigma >= eps {
            continue;
        }
        let unit = cost.eval(sigma, d)?;
        if unit.is_infinite() {
            continue;
        }
        for i in 1..64 {
            let theta = i as f64 / 64.0;
            let n = spec.n_exact(theta * eps)?.n;
            let head = spec.power_sum(n, 1.0)?;
            let tail = spec.ratio(n + 1)?;
            if sigma * sigma * head + tail <= eps * eps {
                let value = n as f64 * unit;
                if value < best.value {
                    best = UpperBound {
                        value,
                        n,
                        method: UpperMethod::UniformPrecision { sigma },
                        allocation: witness(|| Ok(vec![sigma; n as usize]), n, d)?,
                    };
                }
                // larger theta only needs fewer observations
            }
        }
    }
    Ok(best)
}

/// `sum_{k <= n_exact(eps)} $(eps / sqrt(r_k), d)` and its simplified form.
pub fn comp_lower_ww(spec: &Spectrum, eps: f64, cost: &CostModel) -> Result<LowerBound> {
    check_eps(eps)?;
    let d = spec.dim();
    let n = spec.n_exact(eps)?.n;
    let simplified = (n as f64 * cost.eval(1.0, d)?).max(cost.eval(eps, d)?);
    if n == 0 {
        return Ok(LowerBound {
            value: 0.0,
            simplified,
            n_exact: 0,
        });
    }
    let value = match cost {
        CostModel::Polynomial { d_coef, t, s } if *s > 0.0 && *d_coef > 0.0 => {
            let k = cost_scale(*d_coef, *t, d);
            n as f64 + k * eps.powf(-2.0 * s) * spec.power_sum(n, *s)?
        }
        CostModel::Step { sigma0 } => banded_lower(spec, eps, n, &[*sigma0], &[1.0], false)?,
        CostModel::Table(table) => {
            let row: Vec<f64> = table.sigmas().iter().map(|s| cost.eval_unchecked(*s, d)).collect();
            let conservative = matches!(table.interpolation(), crate::cost::Interpolation::Conservative);
            banded_lower(spec, eps, n, table.sigmas(), &row, !conservative)?
        }
        _ => n as f64 * cost.eval(1.0, d)?,
    };
    Ok(LowerBound {
        value,
        simplified,
        n_exact: n,
    })
}

/// Sum of `$(sigma_k)` over `sigma_k = eps / sqrt(r_k)`, `k <= n`, for a
/// cost that is `+inf` below `grid[0]` and priced per grid band. A band
/// `[grid[g], grid[g+1])` is charged `row[g]`, or `row[g+1]` when the cost
/// interpolates inside the band (a lower estimate).
fn banded_lower(spec: &Spectrum, eps: f64, n: u64, grid: &[f64], row: &[f64], interpolated: bool) -> Result<f64> {
    // number of k <= n with sigma_k < a
    let below = |a: f64| -> Result<u64> {
        if a == 0.0 {
            return Ok(0);
        }
        Ok(spec.count_above(eps * eps / (a * a) * (1.0 + crate::numeric::TIE_SLACK))?.min(n))
    };
    if below(grid[0])? > 0 {
        return Ok(f64::INFINITY);
    }
    let mut total = 0.0;
    let mut prev = 0u64;
    for g in 0..grid.len() {
        let upto = if g + 1 < grid.len() { below(grid[g + 1])? } else { n };
        let price = if interpolated && g + 1 < grid.len() { row[g + 1] } else { row[g] };
        if upto > prev {
            total += (upto - prev) as f64 * price;
        }
        prev = prev.max(upto);
    }
    Ok(total)
}

/// Both bounds at one `(eps, d)`.
pub fn complexity_ww(spec: &Spectrum, eps: f64, cost: &CostModel) -> Result<ComplexityBounds> {
    let lower = comp_lower_ww(spec, eps, cost)?;
    let upper = comp_upper_ww(spec, eps, cost)?;
    if lower.value.is_finite() && upper.value.is_finite() && lower.value > upper.value * (1.0 + 1e-12) {
        return Err(Error::Internal(format!(
            "lower bound {} exceeds upper bound {} at eps {eps}, d {}",
            lower.value,
            upper.value,
            spec.dim()
        )));
    }
    Ok(ComplexityBounds {
        lower: lower.value,
        upper: upper.value,
        witness_n: upper.n,
        witness_allocation: upper.allocation,
    })
}
