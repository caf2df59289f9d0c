//! Optimal functionals on a finite-dimensional space.
//!
//! `S: F -> G` is nonsingular with eigenvalues `lambda_1 >= ... >= lambda_m > 0`
//! of `S^* S`, and `n` functionals of norm at most one are observed with
//! precisions `0 = sigma_1 = ... = sigma_n0 < sigma_{n0+1} <= ... <= sigma_n`.
//!
//! * Bounded noise, `n = m`: the radius of any such design is at least
//!   `sqrt(sum_{i>n0} sigma_i^2 lambda_i)`, attained by the coordinate
//!   functionals. [`prop1_radius_bruteforce`] evaluates the radius of an
//!   arbitrary design by vertex enumeration.
//! * Gaussian noise, `n >= m`: the optimal variance profile `eta` solves a
//!   suffix-constrained quadratic problem ([`optimal_eta`]), and the optimal
//!   functionals are rows of a matrix `W` with `W^T W = diag(eta^-2)` and row
//!   norms `sigma^-1` ([`build_w`]).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Condition number above which a functional set is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

fn check_lambda(lambda: &[f64]) -> Result<()> {
    if lambda.is_empty() {
        return Err(Error::param("lambda", "at least one eigenvalue is required"));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::param("lambda", "eigenvalues must be finite and positive"));
    }
    if lambda.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::param("lambda", "eigenvalues must be non-increasing"));
    }
    Ok(())
}

/// Checks `sigma_1 = ... = sigma_n0 = 0 < sigma_{n0+1} <= ... <= sigma_n`.
fn check_sigma(sigma: &[f64], n0: usize) -> Result<()> {
    if sigma.is_empty() {
        return Err(Error::param("sigma", "at least one precision is required"));
    }
    if n0 > sigma.len() {
        return Err(Error::param("n0", "exceeds the number of observations"));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::param("sigma", "precisions must be finite and nonnegative"));
    }
    if sigma[..n0].iter().any(|s| *s != 0.0) || sigma[n0..].contains(&0.0) {
        return Err(Error::param("n0", "exactly the first n0 precisions must be zero"));
    }
    if sigma[n0..].windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("sigma", "positive precisions must be non-decreasing"));
    }
    Ok(())
}

/// Functionals `L` (row `i` holds the coefficients of `L_i` in the
/// eigenbasis) together with the eigenvalues and precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSet {
    l: DMatrix<f64>,
    lambda: Vec<f64>,
    sigma: Vec<f64>,
    n0: usize,
}

impl FunctionalSet {
    pub fn new(l: DMatrix<f64>, lambda: Vec<f64>, sigma: Vec<f64>, n0: usize) -> Result<Self> {
        check_lambda(&lambda)?;
        check_sigma(&sigma, n0)?;
        if l.ncols() != lambda.len() {
            return Err(Error::LengthMismatch {
                what: "functional coefficients per row",
                expected: lambda.len(),
                got: l.ncols(),
            });
        }
        if l.nrows() != sigma.len() {
            return Err(Error::LengthMismatch {
                what: "number of functionals",
                expected: sigma.len(),
                got: l.nrows(),
            });
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("L", "entries must be finite"));
        }
        for (i, row) in l.row_iter().enumerate() {
            if row.norm() > 1.0 + 1e-12 {
                return Err(Error::param("L", format!("row {} has norm above 1", i + 1)));
            }
        }
        Ok(FunctionalSet { l, lambda, sigma, n0 })
    }

    /// Coordinate functionals `L_i = <., x_i*>`.
    pub fn coordinate(lambda: Vec<f64>, sigma: Vec<f64>, n0: usize) -> Result<Self> {
        let m = lambda.len();
        Self::new(DMatrix::identity(sigma.len(), m), lambda, sigma, n0)
    }

    pub fn functionals(&self) -> &DMatrix<f64> {
        &self.l
    }
}

/// Radius of bounded-noise information over the whole space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop1Radius {
    pub radius: f64,
    /// The functionals are numerically dependent and the radius is `+inf`.
    pub singular: bool,
}

/// Largest patterns handled by enumeration.
pub const MAX_ENUMERATION_DIM: usize = 20;

/// `max ||S (sum c_i x_i)||` over `c in prod {+-sigma_i}`, where `x_j` is the
/// basis adjoint to the functionals (`L X = I`). The feasible set
/// `{x : |L_i x| <= sigma_i}` is a parallelotope and the objective convex,
/// so the maximum sits at a vertex.
///
/// Vertices are visited in Gray-code order, one column update per step,
/// with the overall sign fixed by symmetry and blocks of patterns spread
/// over threads.
pub fn prop1_radius_bruteforce(fs: &FunctionalSet) -> Result<Prop1Radius> {
    let (n, m) = (fs.l.nrows(), fs.l.ncols());
    if n != m {
        return Err(Error::param("L", "requires as many functionals as dimensions"));
    }
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::param("L", format!("enumeration is limited to n <= {MAX_ENUMERATION_DIM}")));
    }
    let singular_values = fs.l.clone().svd(false, false).singular_values;
    let smax = singular_values.max();
    let smin = singular_values.min();
    if !(smin > 0.0) || smax / smin > SINGULAR_CONDITION {
        return Ok(Prop1Radius {
            radius: f64::INFINITY,
            singular: true,
        });
    }
    let x = fs
        .l
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Internal("functional matrix not invertible".into()))?;
    // columns sigma_i * Lambda^(1/2) x_i for the free indices
    let root: Vec<f64> = fs.lambda.iter().map(|l| l.sqrt()).collect();
    let cols: Vec<Vec<f64>> = (fs.n0..n)
        .map(|i| (0..m).map(|k| fs.sigma[i] * root[k] * x[(k, i)]).collect())
        .collect();
    if cols.is_empty() {
        return Ok(Prop1Radius {
            radius: 0.0,
            singular: false,
        });
    }
    let free_bits = cols.len() - 1;
    let block_bits = free_bits.min(6);
    let low_bits = free_bits - block_bits;
    let best = (0u64..1 << block_bits)
        .into_par_iter()
        .map(|block| {
            let mut signs = vec![1.0f64; cols.len()];
            for b in 0..block_bits {
                if block >> b & 1 == 1 {
                    signs[1 + low_bits + b] = -1.0;
                }
            }
            let mut v = vec![0.0; m];
            for (s, c) in signs.iter().zip(&cols) {
                for k in 0..m {
                    v[k] += s * c[k];
                }
            }
            let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
            let mut best = norm2(&v);
            for step in 1u64..1 << low_bits {
                let j = 1 + step.trailing_zeros() as usize;
                let s = signs[j];
                for k in 0..m {
                    v[k] -= 2.0 * s * cols[j][k];
                }
                signs[j] = -s;
                best = best.max(norm2(&v));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(Prop1Radius {
        radius: best.sqrt(),
        singular: false,
    })
}

/// `sqrt(sum_{i>n0} sigma_i^2 lambda_i)`, the radius lower bound for `n = m`.
pub fn prop1_lower(lambda: &[f64], sigma: &[f64], n0: usize) -> Result<f64> {
    check_lambda(lambda)?;
    check_sigma(sigma, n0)?;
    if sigma.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            what: "precisions per eigenvalue",
            expected: lambda.len(),
            got: sigma.len(),
        });
    }
    Ok(compensated_sum((n0..sigma.len()).map(|i| sigma[i] * sigma[i] * lambda[i])).sqrt())
}

/// Non-increasing weighted least-squares fit by pooling adjacent violators.
/// Returns the fitted level for each position.
fn antitonic_fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (weighted sum, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (v, w) in values.iter().zip(weights) {
        blocks.push((v * w, *w, 1));
        while blocks.len() > 1 {
            let (s1, w1, n1) = blocks[blocks.len() - 1];
            let (s0, w0, n0) = blocks[blocks.len() - 2];
            if s0 / w0 >= s1 / w1 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, w0 + w1, n0 + n1);
        }
    }
    blocks
        .iter()
        .flat_map(|(s, w, len)| std::iter::repeat_n(s / w, *len))
        .collect()
}

/// Budgets `a_i` in `x = eta^-2` space: the precisions of the first
/// `m - n0 - 1` noisy observations, then everything left over.
fn budgets(m: usize, sigma: &[f64], n0: usize) -> Vec<f64> {
    let k = m - n0;
    let inv: Vec<f64> = sigma[n0..].iter().map(|s| s.powi(-2)).collect();
    let mut a: Vec<f64> = inv[..k - 1].to_vec();
    a.push(compensated_sum(inv[k - 1..].iter().copied()));
    a
}

fn check_design_inputs(lambda: &[f64], sigma: &[f64], n0: usize) -> Result<()> {
    check_lambda(lambda)?;
    check_sigma(sigma, n0)?;
    if sigma.len() < lambda.len() {
        return Err(Error::param("sigma", "needs at least as many observations as dimensions"));
    }
    Ok(())
}

/// Optimal variance profile `eta_{n0+1} <= ... <= eta_m` for Gaussian noise:
/// the minimizer of `sum eta_i^2 lambda_i` under
/// `sum_{i=k}^m eta_i^-2 <= sum_{i=k}^n sigma_i^-2` for `k = n0+1..m`, with
/// equality at `k = n0+1`.
///
/// With `x = eta^-2` the constraints say that prefix sums of `x` dominate
/// those of the budgets `a`, and the objective is `sum lambda_i / x_i`. The
/// solution is `x_i = rho_i sqrt(lambda_i)` where `rho` is the
/// non-increasing fit of `a_i / sqrt(lambda_i)` with weights
/// `sqrt(lambda_i)`: inside a pooled block the total budget is spread
/// proportionally to `sqrt(lambda)`.
///
/// Returns an empty profile when `n0 >= m` (every coordinate is exact).
pub fn optimal_eta(lambda: &[f64], sigma: &[f64], n0: usize) -> Result<Vec<f64>> {
    check_design_inputs(lambda, sigma, n0)?;
    let m = lambda.len();
    if n0 >= m {
        return Ok(Vec::new());
    }
    let a = budgets(m, sigma, n0);
    let w: Vec<f64> = lambda[n0..].iter().map(|l| l.sqrt()).collect();
    let v: Vec<f64> = a.iter().zip(&w).map(|(a, w)| a / w).collect();
    let rho = antitonic_fit(&v, &w);
    let eta: Vec<f64> = rho.iter().zip(&w).map(|(r, w)| (r * w).powf(-0.5)).collect();
    if eta.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eta.windows(2).any(|p| p[1] < p[0] * (1.0 - 1e-12)) {
        return Err(Error::Internal("water-filling produced an infeasible profile".into()));
    }
    Ok(eta)
}

/// `sqrt(sum_{i>n0} eta_i^2 lambda_i)` for the optimal profile.
pub fn design_radius_wa(lambda: &[f64], sigma: &[f64], n0: usize) -> Result<f64> {
    let eta = optimal_eta(lambda, sigma, n0)?;
    Ok(compensated_sum(eta.iter().zip(&lambda[n0..]).map(|(e, l)| e * e * l)).sqrt())
}

/// Gaussian-noise design: `W` and its certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDesign {
    /// `(n - n0) x (m - n0)`; functional `n0 + i` is
    /// `sigma_{n0+i} sum_j w_ij <., x_{n0+j}*>`.
    pub w: DMatrix<f64>,
    pub eta: Vec<f64>,
    /// `max |(W^T W - diag(eta^-2))_jk|`.
    pub gram_deviation: f64,
    /// `max_i | ||row_i||^2 - sigma_{n0+i}^-2 |`.
    pub row_deviation: f64,
    pub rotations: usize,
}

const TRACE_TOLERANCE: f64 = 1e-10;

/// Builds `W` from `W0 = [diag(eta^-1); 0]` by plane rotations on the left,
/// which keep `W^T W` fixed.
///
/// Targets `c_i = sigma_{n0+i}^-2` are met largest first. The rows not yet
/// assigned (the pool) stay mutually orthogonal, so rotating two of them with
/// squared norms `p > t > q` by `cos^2 = (t - q) / (p - q)` produces one row
/// of squared norm exactly `t`, which is assigned, and one of norm
/// `p + q - t`, which goes back to the pool. Each target costs at most one
/// rotation.
pub fn build_w(eta: &[f64], sigma: &[f64], n0: usize) -> Result<NoisyDesign> {
    check_sigma(sigma, n0)?;
    let cols = eta.len();
    let rows = sigma.len() - n0;
    if cols == 0 {
        return Err(Error::param("eta", "empty profile"));
    }
    if rows < cols {
        return Err(Error::param("sigma", "needs at least as many noisy observations as columns"));
    }
    if eta.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::param("eta", "entries must be finite and positive"));
    }
    if eta.windows(2).any(|p| p[1] < p[0] * (1.0 - 1e-12)) {
        return Err(Error::param("eta", "must be non-decreasing"));
    }
    let x: Vec<f64> = eta.iter().map(|e| e.powi(-2)).collect();
    let c: Vec<f64> = sigma[n0..].iter().map(|s| s.powi(-2)).collect();
    let total_x = compensated_sum(x.iter().copied());
    let total_c = compensated_sum(c.iter().copied());
    if (total_x - total_c).abs() > TRACE_TOLERANCE * total_c {
        return Err(Error::Construction {
            index: n0 + 1,
            detail: format!("trace mismatch: sum eta^-2 = {total_x}, sum sigma^-2 = {total_c}"),
        });
    }
    let tol = 1e-9 * total_c;
    // suffix feasibility: sum_{i>=k} x_i <= sum_{i>=k} c_i
    for k in (0..cols).rev() {
        let sx = compensated_sum(x[k..].iter().copied());
        let sc = compensated_sum(c[k..].iter().copied());
        if sx > sc + tol {
            return Err(Error::Construction {
                index: n0 + k + 1,
                detail: format!("suffix of eta^-2 sums to {sx}, above the budget {sc}"),
            });
        }
    }

    // pool of (row vector, squared norm)
    let mut pool: Vec<(Vec<f64>, f64)> = (0..rows)
        .map(|i| {
            let mut r = vec![0.0; cols];
            if i < cols {
                r[i] = x[i].sqrt();
            }
            (r, if i < cols { x[i] } else { 0.0 })
        })
        .collect();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&i, &j| c[j].total_cmp(&c[i]).then(i.cmp(&j)));
    let mut out = vec![vec![0.0; cols]; rows];
    let mut rotations = 0;
    #[cfg(debug_assertions)]
    let gram0 = gram(&pool.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), cols);

    for (done, &target_row) in order.iter().enumerate() {
        let t = c[target_row];
        pool.sort_by(|a, b| b.1.total_cmp(&a.1));
        // last pool row with norm >= t, and the one after it
        let hi = pool.iter().rposition(|p| p.1 >= t - tol);
        let Some(hi) = hi else {
            return Err(Error::Construction {
                index: n0 + target_row + 1,
                detail: format!("no remaining row reaches squared norm {t}"),
            });
        };
        if (pool[hi].1 - t).abs() <= tol || hi + 1 == pool.len() {
            if (pool[hi].1 - t).abs() > tol {
                return Err(Error::Construction {
                    index: n0 + target_row + 1,
                    detail: format!("remaining rows cannot reach squared norm {t}"),
                });
            }
            out[target_row] = pool.remove(hi).0;
        } else {
            let (p, q) = (pool[hi].1, pool[hi + 1].1);
            let cos2 = ((t - q) / (p - q)).clamp(0.0, 1.0);
            let (cs, sn) = (cos2.sqrt(), (1.0 - cos2).sqrt());
            let (u, v) = (pool[hi].0.clone(), pool[hi + 1].0.clone());
            let fixed: Vec<f64> = u.iter().zip(&v).map(|(a, b)| cs * a + sn * b).collect();
            let rest: Vec<f64> = u.iter().zip(&v).map(|(a, b)| -sn * a + cs * b).collect();
            out[target_row] = fixed;
            pool[hi] = (rest, (p + q - t).max(0.0));
            pool.remove(hi + 1);
            rotations += 1;
        }
        #[cfg(debug_assertions)]
        {
            let mut current: Vec<Vec<f64>> = order[..=done].iter().map(|&i| out[i].clone()).collect();
            current.extend(pool.iter().map(|p| p.0.clone()));
            let g = gram(&current, cols);
            let dev = g.iter().zip(&gram0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            debug_assert!(dev <= 1e-9 * total_c.max(1.0), "rotation changed W^T W by {dev}");
        }
        let _ = done;
    }

    let mut w = DMatrix::from_fn(rows, cols, |i, j| out[i][j]);
    // canonical signs: first clearly nonzero entry of each column is positive
    for j in 0..cols {
        let scale = w.column(j).amax();
        if let Some(first) = w.column(j).iter().position(|v| v.abs() > 1e-12 * scale.max(1e-300)) {
            if w[(first, j)] < 0.0 {
                w.column_mut(j).neg_mut();
            }
        }
    }
    let g = w.transpose() * &w;
    let gram_deviation = (0..cols)
        .flat_map(|j| (0..cols).map(move |k| (j, k)))
        .map(|(j, k)| (g[(j, k)] - if j == k { x[j] } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    let row_deviation = (0..rows)
        .map(|i| (w.row(i).norm_squared() - c[i]).abs())
        .fold(0.0, f64::max);
    Ok(NoisyDesign {
        w,
        eta: eta.to_vec(),
        gram_deviation,
        row_deviation,
        rotations,
    })
}

#[cfg(debug_assertions)]
fn gram(rows: &[Vec<f64>], cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for r in rows {
        for j in 0..cols {
            for k in 0..cols {
                g[j * cols + k] += r[j] * r[k];
            }
        }
    }
    g
}

/// Whether the coordinate functionals are optimal for Gaussian noise with
/// `n = m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateOptimality {
    /// `sigma_i^-2` is proportional to `sqrt(lambda_i)` over the noisy
    /// indices (to `1e-10` relative).
    pub proportional: bool,
    /// The optimal profile equals `sigma`, i.e. `sigma_i^-2 / sqrt(lambda_i)`
    /// is non-increasing over the noisy indices. Proportionality is the
    /// special case where it is constant.
    pub coordinate_optimal: bool,
    /// `sqrt(sum_{i>n0} sigma_i^2 lambda_i)`, the radius of the coordinate design.
    pub radius: f64,
    /// Radius of the optimal design.
    pub optimal_radius: f64,
}

pub fn coordinate_optimality_check(lambda: &[f64], sigma: &[f64], n0: usize) -> Result<CoordinateOptimality> {
    check_design_inputs(lambda, sigma, n0)?;
    if sigma.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            what: "precisions per eigenvalue",
            expected: lambda.len(),
            got: sigma.len(),
        });
    }
    let radius = prop1_lower(lambda, sigma, n0)?;
    let optimal_radius = design_radius_wa(lambda, sigma, n0)?;
    let root: Vec<f64> = lambda[n0..].iter().map(|l| l.sqrt()).collect();
    let inv: Vec<f64> = sigma[n0..].iter().map(|s| s.powi(-2)).collect();
    let root_sum = compensated_sum(root.iter().copied());
    let inv_sum = compensated_sum(inv.iter().copied());
    let proportional = root
        .iter()
        .zip(&inv)
        .all(|(r, i)| (i - r / root_sum * inv_sum).abs() <= 1e-10 * i);
    let ratio: Vec<f64> = inv.iter().zip(&root).map(|(i, r)| i / r).collect();
    let coordinate_optimal = ratio.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-10));
    Ok(CoordinateOptimality {
        proportional,
        coordinate_optimal,
        radius,
        optimal_radius,
    })
}
