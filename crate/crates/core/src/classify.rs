//! Tractability diagnostics on finite `(eps, d)` grids.
//!
//! Tractability notions are limits, so nothing here proves a class. Every
//! verdict is labelled as numeric evidence and carries the points it was
//! computed from. Value providers are called concurrently and must be pure.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cost::CostModel;
use crate::error::{Error, Result};

/// Attached to every verdict.
pub const EVIDENCE: &str = "numeric evidence, not proof";

/// Default threshold for the weak and curse verdicts.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Fits with a larger log-space residual are flagged as not polynomial.
pub const FIT_FLAG_RESIDUAL: f64 = 1e-3;

/// 13 values of `eps`, log-spaced from `1e-4` to `1e-1`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-4.0 + f64::from(k) / 4.0)).collect()
}

/// `d in {1, 2, 4, ..., 64}`.
pub fn default_d_grid() -> Vec<u32> {
    (0..7).map(|k| 1 << k).collect()
}

/// `(eps_k, d_k)` with `eps` running down the default grid and `d = k`.
pub fn default_diagonal() -> Vec<(f64, u32)> {
    default_eps_grid().into_iter().rev().zip(1..).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub eps: f64,
    pub d: u32,
    pub value: f64,
}

/// `value ~ c d^q eps^-p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyFit {
    pub c: f64,
    pub q: f64,
    pub p: f64,
    /// Largest absolute residual of `ln value`.
    pub residual: f64,
}

impl PolyFit {
    pub fn flagged(&self) -> bool {
        self.residual > FIT_FLAG_RESIDUAL
    }
}

fn distinct(mut v: Vec<f64>) -> usize {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    v.len()
}

/// Least squares of `ln value = ln c + q ln d + p ln(1/eps)`.
pub fn fit_poly_exponents(samples: &[Sample]) -> Result<PolyFit> {
    if samples.len() < 6 {
        return Err(Error::param("samples", "at least 6 samples are required"));
    }
    for s in samples {
        if !(s.value.is_finite() && s.value > 0.0) {
            return Err(Error::param("samples", format!("value at eps={}, d={} is not finite and positive", s.eps, s.d)));
        }
        if !(s.eps > 0.0 && s.eps.is_finite()) || s.d == 0 {
            return Err(Error::param("samples", "need eps > 0 and d >= 1"));
        }
    }
    if distinct(samples.iter().map(|s| f64::from(s.d)).collect()) < 2 {
        return Err(Error::DegenerateFit { direction: "d" });
    }
    if distinct(samples.iter().map(|s| s.eps).collect()) < 3 {
        return Err(Error::DegenerateFit { direction: "eps" });
    }
    let x = DMatrix::from_fn(samples.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => f64::from(samples[i].d).ln(),
        _ => -samples[i].eps.ln(),
    });
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.value.ln()));
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-10 * sv.max() {
        return Err(Error::DegenerateFit { direction: "d and eps (collinear samples)" });
    }
    let beta = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Internal(format!("least squares failed: {e}")))?;
    let residual = (&x * &beta - &y).amax();
    Ok(PolyFit {
        c: beta[0].exp(),
        q: beta[1],
        p: beta[2],
        residual,
    })
}

/// Evaluates `provider` on every grid point, in parallel, in row-major
/// `(eps, d)` order.
pub fn sample_grid<F>(eps: &[f64], d: &[u32], provider: F) -> Result<Vec<Sample>>
where
    F: Fn(f64, u32) -> Result<f64> + Sync,
{
    let points: Vec<(f64, u32)> = eps.iter().flat_map(|&e| d.iter().map(move |&d| (e, d))).collect();
    points
        .par_iter()
        .map(|&(eps, d)| provider(eps, d).map(|value| Sample { eps, d, value }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakVerdict {
    ConsistentWithWeak,
    Intractable,
}

impl WeakVerdict {
    pub fn tag(&self) -> &'static str {
        match self {
            WeakVerdict::ConsistentWithWeak => "consistent with weak tractability",
            WeakVerdict::Intractable => "intractable (numeric)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPoint {
    pub eps: f64,
    pub d: u32,
    pub value: f64,
    /// `ln value / (1/eps + d)`.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakReport {
    pub points: Vec<WeakPoint>,
    pub verdict: WeakVerdict,
    pub threshold: f64,
    /// First point where the provider returned `+inf`.
    pub infinite_at: Option<(f64, u32)>,
}

impl WeakReport {
    pub fn summary(&self) -> String {
        let last = self.points.last().map_or(f64::NAN, |p| p.r);
        match self.infinite_at {
            Some((e, d)) => format!("{} at eps={e}, d={d} (infinite value; {EVIDENCE})", self.verdict.tag()),
            None => format!("{} (last r = {last}, threshold {}; {EVIDENCE})", self.verdict.tag(), self.threshold),
        }
    }
}

fn check_value(value: f64, eps: f64, d: u32) -> Result<()> {
    if value.is_nan() || value <= 0.0 || value == f64::NEG_INFINITY {
        return Err(Error::param("provider", format!("value {value} at eps={eps}, d={d} must be positive")));
    }
    Ok(())
}

/// Tracks `r_k = ln value / (1/eps_k + d_k)` along a diagonal with
/// `1/eps_k + d_k` strictly increasing. The verdict is weak tractability when
/// `r_k` is non-increasing over the second half of the diagonal and ends below
/// `threshold`.
pub fn weak_diagnostic<F>(provider: F, diagonal: &[(f64, u32)], threshold: f64) -> Result<WeakReport>
where
    F: Fn(f64, u32) -> Result<f64> + Sync,
{
    if diagonal.len() < 8 {
        return Err(Error::param("diagonal", "at least 8 points are required"));
    }
    if diagonal.iter().any(|&(e, d)| !(e > 0.0 && e.is_finite()) || d == 0) {
        return Err(Error::param("diagonal", "need eps > 0 and d >= 1"));
    }
    let size = |&(e, d): &(f64, u32)| 1.0 / e + f64::from(d);
    if diagonal.windows(2).any(|w| size(&w[1]) <= size(&w[0])) {
        return Err(Error::param("diagonal", "1/eps + d must be strictly increasing"));
    }
    if !(threshold > 0.0) {
        return Err(Error::param("threshold", "must be positive"));
    }
    let values: Vec<f64> = diagonal
        .par_iter()
        .map(|&(e, d)| provider(e, d))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(values.len());
    for (&(eps, d), &value) in diagonal.iter().zip(&values) {
        check_value(value, eps, d)?;
        points.push(WeakPoint {
            eps,
            d,
            value,
            r: value.ln() / size(&(eps, d)),
        });
        if value == f64::INFINITY {
            return Ok(WeakReport {
                points,
                verdict: WeakVerdict::Intractable,
                threshold,
                infinite_at: Some((eps, d)),
            });
        }
    }
    let tail = &points[points.len() / 2..];
    let decreasing = tail.windows(2).all(|w| w[1].r <= w[0].r + 1e-12 * w[0].r.abs());
    let verdict = if decreasing && tail[tail.len() - 1].r < threshold {
        WeakVerdict::ConsistentWithWeak
    } else {
        WeakVerdict::Intractable
    };
    Ok(WeakReport {
        points,
        verdict,
        threshold,
        infinite_at: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurseVerdict {
    Curse,
    NoCurse,
}

impl CurseVerdict {
    pub fn tag(&self) -> &'static str {
        match self {
            CurseVerdict::Curse => "curse (numeric)",
            CurseVerdict::NoCurse => "no curse (numeric)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurseReport {
    pub eps0: f64,
    /// `(d, value)` over the whole grid.
    pub points: Vec<(u32, f64)>,
    /// Least-squares slope of `ln value` against `d` over the upper half of
    /// the grid, in nats per dimension. `+inf` if a value is infinite.
    pub slope: f64,
    pub verdict: CurseVerdict,
    pub threshold: f64,
    pub infinite_at: Option<u32>,
}

impl CurseReport {
    pub fn summary(&self) -> String {
        match self.infinite_at {
            Some(d) => format!("{} at eps={}, d={d} (infinite value; {EVIDENCE})", self.verdict.tag(), self.eps0),
            None => format!(
                "{} at eps={}: slope {} nats/dimension, threshold {} ({EVIDENCE})",
                self.verdict.tag(),
                self.eps0,
                self.slope,
                self.threshold
            ),
        }
    }
}

pub fn curse_diagnostic<F>(provider: F, eps0: f64, d_grid: &[u32], threshold: f64) -> Result<CurseReport>
where
    F: Fn(f64, u32) -> Result<f64> + Sync,
{
    if d_grid.len() < 8 {
        return Err(Error::param("d_grid", "at least 8 points are required"));
    }
    if d_grid[0] == 0 || d_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("d_grid", "must be strictly increasing and start at d >= 1"));
    }
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::param("eps0", "must be positive"));
    }
    if !(threshold > 0.0) {
        return Err(Error::param("threshold", "must be positive"));
    }
    let values: Vec<f64> = d_grid.par_iter().map(|&d| provider(eps0, d)).collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(values.len());
    for (&d, &value) in d_grid.iter().zip(&values) {
        check_value(value, eps0, d)?;
        points.push((d, value));
        if value == f64::INFINITY {
            return Ok(CurseReport {
                eps0,
                points,
                slope: f64::INFINITY,
                verdict: CurseVerdict::Curse,
                threshold,
                infinite_at: Some(d),
            });
        }
    }
    let upper = &points[points.len() / 2..];
    let k = upper.len() as f64;
    let mx = upper.iter().map(|p| f64::from(p.0)).sum::<f64>() / k;
    let my = upper.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxy: f64 = upper.iter().map(|p| (f64::from(p.0) - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = upper.iter().map(|p| (f64::from(p.0) - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(CurseReport {
        eps0,
        points,
        slope,
        verdict: if slope > threshold { CurseVerdict::Curse } else { CurseVerdict::NoCurse },
        threshold,
        infinite_at: None,
    })
}

/// The precision at which a fixed-precision design with
/// `n^w(eps, d) <= C eps^-p kappa(d)` is priced.
pub fn condweak_precision(eps: f64, p: f64, kappa: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param("p", "must be finite and positive"));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::param("kappa", "must be finite and at least 1"));
    }
    Ok(if (p - 2.0).abs() <= 1e-12 {
        eps / (kappa * (kappa / (eps * eps)).ln()).sqrt()
    } else if p < 2.0 {
        eps * kappa.powf(-1.0 / p)
    } else {
        eps.powf(p / 2.0) / kappa.sqrt()
    })
}

/// Runs the weak diagnostic on `ln cost(eps_hat(eps, d), d) / (1/eps + d)`.
/// A vanishing limit is sufficient for weak tractability with noise; it is
/// not known to be necessary, so this is reported on its own.
pub fn condweak_diagnostic<K>(
    cost: &CostModel,
    p: f64,
    kappa: K,
    diagonal: &[(f64, u32)],
    threshold: f64,
) -> Result<WeakReport>
where
    K: Fn(u32) -> f64 + Sync,
{
    weak_diagnostic(
        |eps, d| cost.eval(condweak_precision(eps, p, kappa(d))?, d),
        diagonal,
        threshold,
    )
}

/// Everything the classify task reports for one scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TractabilityReport {
    pub fit: Option<PolyFit>,
    pub weak: Option<WeakReport>,
    pub curse: Option<CurseReport>,
    pub condweak: Option<WeakReport>,
}

impl TractabilityReport {
    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(f) = &self.fit {
            out.push(format!(
                "polynomial fit: C = {}, q = {}, p = {}, residual = {}{} ({EVIDENCE})",
                f.c,
                f.q,
                f.p,
                f.residual,
                if f.flagged() { " [poor fit]" } else { "" }
            ));
        }
        if let Some(w) = &self.weak {
            out.push(format!("weak tractability: {}", w.summary()));
        }
        if let Some(c) = &self.curse {
            out.push(format!("curse of dimensionality: {}", c.summary()));
        }
        if let Some(w) = &self.condweak {
            out.push(format!("cost condition for weak tractability: {}", w.summary()));
        }
        out
    }
}
