//! Worst-case setting with Gaussian noise.
//!
//! The error of `Phi_n` is the same as under bounded noise, but a single
//! coordinate can now be estimated by averaging repeated observations, so
//! the price of precision `sigma` is the auxiliary cost `$^(sigma, d)`
//! rather than `$(sigma, d)`. Upper bounds plug envelopes of `$^` of the form
//! `unit + scale * sigma^-2` into the bounded-noise machinery.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bounded::comp_upper_ww;
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::spectra::Spectrum;

/// Constants of the Gaussian bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaBoundConfig {
    /// Constant of the one-dimensional lower bound. Only its existence is
    /// known, so lower bounds using it are reported per value of `c`.
    pub c: f64,
    /// Anchor precision for repeated observations.
    pub sigma0: f64,
}

impl Default for WaBoundConfig {
    fn default() -> Self {
        WaBoundConfig { c: 0.5, sigma0: 1.0 }
    }
}

impl WaBoundConfig {
    pub fn new(c: f64, sigma0: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::param("c", "must lie in (0, 1]"));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::param("sigma0", "must be finite and positive"));
        }
        Ok(WaBoundConfig { c, sigma0 })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    Ok(())
}

/// `max((n_exact(2 eps) + 1) / 4, $^_lower(eps / (c sqrt 2)) / 2)`, the second
/// term only when `eps < c`.
pub fn comp_lower_wa(spec: &Spectrum, eps: f64, cost: &CostModel, config: &WaBoundConfig) -> Result<f64> {
    check_eps(eps)?;
    let exact = (spec.n_exact(2.0 * eps)?.n as f64 + 1.0) / 4.0;
    if eps >= config.c {
        return Ok(exact);
    }
    let aux = cost.aux_cost_bounds(eps / (config.c * 2f64.sqrt()), spec.dim(), None)?;
    Ok(exact.max(0.5 * aux.lower))
}

/// Which construction gave the Gaussian upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaBranch {
    /// Repetitions at the anchor precision `sigma0`.
    Corollary { sigma0: f64 },
    /// Bounded-noise bound with the auxiliary-cost envelope.
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaUpper {
    pub value: f64,
    pub branch: WaBranch,
    /// Best repetition-anchored bound.
    pub corollary: f64,
    /// Envelope bound.
    pub envelope: f64,
}

/// Cost of the optimized design when each observation at precision `sigma`
/// costs at most `unit + scale * sigma^-2`:
/// `n unit + 2 scale (sum_{i<=n} r_i^(1/2))^2 eps^-2`, `n = max(2, n_exact(eps/sqrt 2))`.
fn affine_envelope_bound(spec: &Spectrum, eps: f64, unit: f64, scale: f64) -> Result<f64> {
    if !unit.is_finite() || !scale.is_finite() {
        return Ok(f64::INFINITY);
    }
    let n = spec.n_exact(eps / 2f64.sqrt())?.n.max(2);
    let p = spec.power_sum(n, 0.5)?;
    Ok(n as f64 * unit + 2.0 * scale * p * p / (eps * eps))
}

/// Upper bound on the Gaussian complexity: the smaller of
///
/// * (a) repetitions at an anchor `a`, using `$^(sigma) <= $(a) (a^2/sigma^2 + 1)`,
///   with anchors `sigma0`, a step threshold, or a table grid;
/// * (b) the bounded-noise bound with `$^` in place of `$`: the cost itself
///   for `s <= 1`, and `s/(s-1) + alpha_d sigma^-2` (repetitions at the
///   tangency precision) for `s > 1`.
pub fn comp_upper_wa(spec: &Spectrum, eps: f64, cost: &CostModel, config: &WaBoundConfig) -> Result<WaUpper> {
    check_eps(eps)?;
    let d = spec.dim();
    let mut anchors = vec![config.sigma0];
    match cost {
        CostModel::Step { sigma0 } if *sigma0 > 0.0 => anchors.push(*sigma0),
        CostModel::Table(table) => anchors.extend_from_slice(table.sigmas()),
        _ => {}
    }
    let mut corollary = (f64::INFINITY, config.sigma0);
    for a in anchors {
        let unit = cost.eval(a, d)?;
        let value = affine_envelope_bound(spec, eps, unit, a * a * unit)?;
        if value < corollary.0 {
            corollary = (value, a);
        }
    }
    let envelope = match cost.supporting_line(d) {
        Some(line) if !line.asymptotic => {
            let s = cost.polynomial_params().expect("polynomial").2;
            affine_envelope_bound(spec, eps, s / (s - 1.0), line.alpha)?
        }
        _ => comp_upper_ww(spec, eps, cost)?.value,
    };
    let (value, branch) = if envelope <= corollary.0 {
        (envelope, WaBranch::Envelope)
    } else {
        (corollary.0, WaBranch::Corollary { sigma0: corollary.1 })
    };
    Ok(WaUpper {
        value,
        branch,
        corollary: corollary.0,
        envelope,
    })
}

/// Upper bound from `n = n_exact(eps / sqrt 2)` observations, all at
/// precision `eps / sqrt(2n)`: `n $^_upper(eps / sqrt(2n), d)`.
pub fn uniform_upper_wa(spec: &Spectrum, eps: f64, cost: &CostModel, config: &WaBoundConfig) -> Result<f64> {
    check_eps(eps)?;
    let n = spec.n_exact(eps / 2f64.sqrt())?.n;
    if n == 0 {
        return Ok(0.0);
    }
    let sigma = eps / (2.0 * n as f64).sqrt();
    let aux = cost.aux_cost_bounds(sigma, spec.dim(), Some(config.sigma0))?;
    Ok(n as f64 * aux.upper)
}

/// Position of `p (s+1)` relative to `2s`, which decides the power of
/// `1/eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentCase {
    /// `p = s = 0`: bounded in `eps`.
    Constant,
    /// `p (s+1) > 2s`.
    Greater,
    /// `p (s+1) = 2s`, with a logarithmic factor.
    Equal,
    /// `p (s+1) < 2s`.
    Less,
}

impl ExponentCase {
    pub fn tag(&self) -> &'static str {
        match self {
            ExponentCase::Constant => "constant",
            ExponentCase::Greater => ">",
            ExponentCase::Equal => "= (log factor)",
            ExponentCase::Less => "<",
        }
    }
}

/// Exponents of `d^a eps^-b` in the complexity bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub s_bar: f64,
    pub t_bar: f64,
    pub d_exponent: f64,
    pub eps_exponent: f64,
    pub case: ExponentCase,
}

fn exponents(p: f64, q: f64, s_bar: f64, t_bar: f64) -> Exponents {
    let lhs = p * (s_bar + 1.0);
    let rhs = 2.0 * s_bar;
    let case = if p == 0.0 && s_bar == 0.0 {
        ExponentCase::Constant
    } else if (lhs - rhs).abs() <= 1e-12 * lhs.max(rhs) {
        ExponentCase::Equal
    } else if lhs > rhs {
        ExponentCase::Greater
    } else {
        ExponentCase::Less
    };
    Exponents {
        s_bar,
        t_bar,
        d_exponent: t_bar + q * (s_bar + 1.0),
        eps_exponent: lhs.max(rhs),
        case,
    }
}

fn check_exponent_inputs(p: f64, q: f64, s: f64, t: f64) -> Result<()> {
    for (name, v) in [("p", p), ("q", q), ("s", s), ("t", t)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::param(name, "must be finite and nonnegative"));
        }
    }
    Ok(())
}

/// Gaussian-noise exponents with `s_bar = min(s, 1)` and
/// `t_bar = min(t, t/s)` (`t` when `s = 0`).
pub fn wa_exponents(p: f64, q: f64, s: f64, t: f64) -> Result<Exponents> {
    check_exponent_inputs(p, q, s, t)?;
    let t_bar = if s == 0.0 { t } else { t.min(t / s) };
    Ok(exponents(p, q, s.min(1.0), t_bar))
}

/// Bounded-noise exponents (`s`, `t` unchanged).
pub fn ww_exponents(p: f64, q: f64, s: f64, t: f64) -> Result<Exponents> {
    check_exponent_inputs(p, q, s, t)?;
    Ok(exponents(p, q, s, t))
}

/// Which of the three repetition-bound regimes a decay exponent `p` falls in
/// (`p > 1`, `p = 1`, `p < 1`).
pub fn corollary_case(p: f64) -> ExponentCase {
    if (p - 1.0).abs() <= 1e-12 {
        ExponentCase::Equal
    } else if p > 1.0 {
        ExponentCase::Greater
    } else {
        ExponentCase::Less
    }
}

/// Monte Carlo estimate of the mean squared error of `Phi_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationReport {
    pub predicted_mse: f64,
    pub empirical_mse: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Samples per RNG stream.
const BATCH: u64 = 4096;
pub const MIN_SAMPLES: u64 = 1000;

/// Simulates `y_i = f_i + e_i`, `e_i ~ N(0, sigma_i^2)`, and averages
/// `||S f - Phi_n(y)||^2` over `samples` draws.
///
/// `lambda` has `n + 1` entries, `f` holds the eigen-coordinates of the
/// input (at most `n + 1`, norm at most one). Batch `b` draws from
/// `ChaCha8` seeded with `seed` on stream `b`, and batches are reduced in
/// order, so a seed fixes the output bit for bit on one platform.
pub fn simulate_wa(lambda: &[f64], sigma: &[f64], f: &[f64], samples: u64, seed: u64) -> Result<SimulationReport> {
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
    if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::param("sigma", "precisions must be finite and nonnegative"));
    }
    if f.len() > lambda.len() {
        return Err(Error::LengthMismatch {
            what: "input coordinates exceed the eigenvalue prefix",
            expected: lambda.len(),
            got: f.len(),
        });
    }
    if f.iter().any(|x| !x.is_finite()) || compensated_sum(f.iter().map(|x| x * x)) > 1.0 + 1e-12 {
        return Err(Error::param("f", "input must be finite with norm at most 1"));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::param("samples", format!("at least {MIN_SAMPLES} samples are required")));
    }
    let n = sigma.len();
    let m = lambda.len();
    let mut coords = f.to_vec();
    coords.resize(m, 0.0);
    let root: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let sf: Vec<f64> = coords.iter().zip(&root).map(|(x, r)| x * r).collect();

    let predicted = compensated_sum(
        sigma
            .iter()
            .zip(lambda)
            .map(|(s, l)| s * s * l)
            .chain((n..m).map(|j| lambda[j] * coords[j] * coords[j])),
    );

    let batches = samples.div_ceil(BATCH);
    let stats: Vec<(u64, f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH.min(samples - b * BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut phi = vec![0.0; m];
            let values: Vec<f64> = (0..count)
                .map(|_| {
                    for i in 0..n {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        phi[i] = (coords[i] + sigma[i] * z) * root[i];
                    }
                    compensated_sum(sf.iter().zip(&phi).map(|(a, b)| (a - b) * (a - b)))
                })
                .collect();
            let mean = compensated_sum(values.iter().copied()) / count as f64;
            let m2 = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
            (count, mean, m2)
        })
        .collect();

    // merge per-batch (count, mean, M2) in batch order
    let (mut total, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for (count, bmean, bm2) in stats {
        let merged = total + count;
        let delta = bmean - mean;
        mean += delta * count as f64 / merged as f64;
        m2 += bm2 + delta * delta * (total as f64) * (count as f64) / merged as f64;
        total = merged;
    }
    let variance = m2 / (total as f64 - 1.0);
    Ok(SimulationReport {
        predicted_mse: predicted,
        empirical_mse: mean,
        std_error: (variance / total as f64).sqrt(),
        samples,
        seed,
    })
}
