//! Rotated information in the plane.
//!
//! Estimate `x in R^2` within `eps` in the Euclidean norm, observing both
//! coordinates of `R_i x` with precision `sigma` at cost `1 + sigma^-2s` each,
//! where `R_i` is the clockwise rotation by `theta_i = pi (i-1) / (2n)`. The
//! feasible set `{x : ||R_i x||_inf <= sigma}` is a regular `4n`-gon, so
//! precision `eps cos(pi / 4n)` suffices and `n` rotations cost
//! `2n (1 + (eps cos(pi / 4n))^-2s)`.

use std::f64::consts::{E, FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::numeric::ceil_tolerant;

fn check_n(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "at least one rotation is required"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::param("s", "must be finite and positive"));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma", "must be finite and positive"));
    }
    Ok(())
}

/// `n` rotations observed at precision `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationDesign {
    n: u32,
    sigma: f64,
}

impl RotationDesign {
    pub fn new(n: u32, sigma: f64) -> Result<Self> {
        check_n(n)?;
        check_sigma(sigma)?;
        Ok(RotationDesign { n, sigma })
    }

    /// The cheapest design with error at most `eps`.
    pub fn for_error(n: u32, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Self::new(n, rotated_precision(n, eps)?)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `theta_i = pi (i-1) / (2n)`, strictly increasing in `[0, pi/2)`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.n).map(|i| PI * f64::from(i) / (2.0 * f64::from(self.n))).collect()
    }

    /// Vertices of the feasible polygon in counterclockwise order.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let s = self.sigma;
        let mut poly = vec![[s, -s], [s, s], [-s, s], [-s, -s]];
        for theta in self.angles().into_iter().skip(1) {
            // the rows of R_i and their negatives
            let (c, sn) = (theta.cos(), theta.sin());
            for normal in [[c, sn], [-sn, c], [-c, -sn], [sn, -c]] {
                poly = clip(&poly, normal, s);
            }
        }
        poly
    }

    /// Largest feasible norm, the radius of the information.
    pub fn radius(&self) -> f64 {
        self.vertices()
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0, f64::max)
    }

    /// `2n (1 + sigma^-2s)`.
    pub fn cost(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        Ok(2.0 * f64::from(self.n) * (1.0 + self.sigma.powf(-2.0 * s)))
    }
}

/// Keeps the part of a convex polygon with `<normal, x> <= offset`. Vertices
/// within rounding of the line count as inside, and the duplicates this
/// creates at collinear constraints are merged.
fn clip(poly: &[[f64; 2]], normal: [f64; 2], offset: f64) -> Vec<[f64; 2]> {
    let tol = 1e-13 * offset;
    let dist = |p: &[f64; 2]| normal[0] * p[0] + normal[1] * p[1] - offset;
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(poly.len() + 1);
    for (k, cur) in poly.iter().enumerate() {
        let next = &poly[(k + 1) % poly.len()];
        let (dc, dn) = (dist(cur), dist(next));
        if dc <= tol {
            out.push(*cur);
        }
        if (dc < -tol && dn > tol) || (dc > tol && dn < -tol) {
            let t = dc / (dc - dn);
            out.push([cur[0] + t * (next[0] - cur[0]), cur[1] + t * (next[1] - cur[1])]);
        }
    }
    let mut merged: Vec<[f64; 2]> = Vec::with_capacity(out.len());
    for p in out {
        let close = |q: &[f64; 2]| (p[0] - q[0]).abs() <= 1e-12 * offset && (p[1] - q[1]).abs() <= 1e-12 * offset;
        if !merged.last().is_some_and(close) {
            merged.push(p);
        }
    }
    if merged.len() > 1 && (merged[0][0] - merged[merged.len() - 1][0]).abs() <= 1e-12 * offset
        && (merged[0][1] - merged[merged.len() - 1][1]).abs() <= 1e-12 * offset
    {
        merged.pop();
    }
    merged
}

/// Radius of `n` rotations at precision `sigma`, by clipping the square with
/// the remaining `4(n-1)` half-planes.
pub fn polygon_radius(n: u32, sigma: f64) -> Result<f64> {
    Ok(RotationDesign::new(n, sigma)?.radius())
}

/// `eps cos(pi / 4n)`.
pub fn rotated_precision(n: u32, eps: f64) -> Result<f64> {
    check_n(n)?;
    Ok(eps * (FRAC_PI_4 / f64::from(n)).cos())
}

/// `2n (1 + (eps cos(pi / 4n))^-2s)`.
pub fn rotated_cost(n: u32, eps: f64, s: f64) -> Result<f64> {
    check_eps(eps)?;
    RotationDesign::new(n, rotated_precision(n, eps)?)?.cost(s)
}

/// Log of the cost with `n` relaxed to a real `x`.
fn log_relaxed_cost(x: f64, eps: f64, s: f64) -> f64 {
    (2.0 * x).ln() + ln_one_plus_pow(eps * (FRAC_PI_4 / x).cos(), s)
}

/// `ceil((pi/4) sqrt(2s))`, the asymptotically optimal number of rotations.
pub fn optimal_rotation_count(s: f64) -> Result<u32> {
    check_s(s)?;
    let n = ceil_tolerant(FRAC_PI_4 * (2.0 * s).sqrt()).max(1.0);
    if n > f64::from(u32::MAX) {
        return Err(Error::param("s", "too large for a rotation count"));
    }
    Ok(n as u32)
}

/// Minimizer of the cost with `n` relaxed to a real in `[1, upper]`.
pub fn relaxed_minimizer(eps: f64, s: f64, upper: f64) -> Result<f64> {
    check_eps(eps)?;
    check_s(s)?;
    if !(upper >= 1.0) {
        return Err(Error::param("upper", "must be at least 1"));
    }
    // in logs: the cost overflows f64 for large s
    let f = |x: f64| log_relaxed_cost(x, eps, s);
    let (mut a, mut b) = (1.0, upper);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    Ok(0.5 * (a + b))
}

/// `ln(1 + sigma^-2s)` without overflow.
fn ln_one_plus_pow(sigma: f64, s: f64) -> f64 {
    let l = -2.0 * s * sigma.ln();
    if l > 0.0 { l + (-l).exp().ln_1p() } else { l.exp().ln_1p() }
}

/// Cost of the unrotated design over that of `n*` rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementRatio {
    pub n_star: u32,
    pub cost_unrotated: f64,
    pub cost_rotated: f64,
    pub exact: f64,
    /// `2^(s+1) / (pi sqrt(s e / 2))`, the limit as `eps -> 0` for large `s`.
    pub asymptotic: f64,
}

pub fn improvement_ratio(s: f64, eps: f64) -> Result<ImprovementRatio> {
    let n_star = optimal_rotation_count(s)?;
    let cost_unrotated = rotated_cost(1, eps, s)?;
    let cost_rotated = rotated_cost(n_star, eps, s)?;
    // in logs, so that the ratio survives when both costs overflow
    let log_ratio = log_relaxed_cost(1.0, eps, s) - log_relaxed_cost(f64::from(n_star), eps, s);
    Ok(ImprovementRatio {
        n_star,
        cost_unrotated,
        cost_rotated,
        exact: log_ratio.exp(),
        asymptotic: 2f64.powf(s + 1.0) / (PI * (s * E / 2.0).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn cost_examples() {
        assert_relative_eq!(rotated_cost(1, 0.5, 1.0).unwrap(), 18.0, max_relative = 1e-14);
        let c8 = (PI / 8.0).cos();
        assert_relative_eq!(rotated_cost(2, 0.5, 1.0).unwrap(), 4.0 * (1.0 + 1.0 / (0.25 * c8 * c8)), max_relative = 1e-14);
        assert_relative_eq!(rotated_cost(2, 0.5, 1.0).unwrap(), 22.745, max_relative = 1e-4);
        assert_relative_eq!(rotated_cost(3, 0.5, 1e-12).unwrap(), 12.0, max_relative = 1e-9);
        assert!(rotated_cost(0, 0.5, 1.0).is_err());
        assert!(rotated_cost(1, 1.0, 1.0).is_err());
        assert!(rotated_cost(1, 0.5, 0.0).is_err());
    }

    #[test]
    fn rotation_count_examples() {
        assert_eq!(optimal_rotation_count(8.0).unwrap(), 4);
        assert_eq!(optimal_rotation_count(0.5).unwrap(), 1);
        assert_eq!(optimal_rotation_count(50.0).unwrap(), 8);
        assert_eq!(optimal_rotation_count(1.0).unwrap(), 2);
    }

    #[test]
    fn polygon_examples() {
        assert_relative_eq!(polygon_radius(1, 0.5).unwrap(), 0.5 * 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(polygon_radius(2, 1.0).unwrap(), 1.0 / (PI / 8.0).cos(), max_relative = 1e-12);
        assert_relative_eq!(polygon_radius(5, 2.0).unwrap(), 2.0 * polygon_radius(5, 1.0).unwrap(), max_relative = 1e-12);
        assert!(polygon_radius(1, 0.0).is_err());
        assert_eq!(RotationDesign::new(3, 1.0).unwrap().vertices().len(), 12);
    }

    #[test]
    fn polygon_matches_the_closed_form() {
        for n in 1..=64 {
            let r = polygon_radius(n, 0.7).unwrap();
            let closed = 0.7 / (FRAC_PI_4 / f64::from(n)).cos();
            assert!((r - closed).abs() <= 1e-9, "n = {n}: {r} vs {closed}");
        }
    }

    #[test]
    fn polygon_is_invariant_under_the_base_rotation() {
        for n in [1u32, 2, 3, 7, 16, 64] {
            let verts = RotationDesign::new(n, 1.3).unwrap().vertices();
            assert_eq!(verts.len(), 4 * n as usize);
            let phi = FRAC_PI_2 / f64::from(n);
            let (c, s) = (phi.cos(), phi.sin());
            let key = |v: &[f64; 2]| (v[1].atan2(v[0]) + 2.0 * PI) % (2.0 * PI);
            let mut a = verts.clone();
            let mut b: Vec<[f64; 2]> = verts.iter().map(|v| [c * v[0] - s * v[1], s * v[0] + c * v[1]]).collect();
            a.sort_by(|p, q| key(p).total_cmp(&key(q)));
            b.sort_by(|p, q| key(p).total_cmp(&key(q)));
            // the smallest angle may wrap around to the end
            if (a[0][0] - b[0][0]).abs() > 1e-9 || (a[0][1] - b[0][1]).abs() > 1e-9 {
                b.rotate_right(1);
            }
            for (p, q) in a.iter().zip(&b) {
                assert!((p[0] - q[0]).abs() <= 1e-9 && (p[1] - q[1]).abs() <= 1e-9, "n = {n}");
            }
        }
    }

    #[test]
    fn angles_increase_in_the_quarter_turn() {
        let a = RotationDesign::new(5, 1.0).unwrap().angles();
        assert_eq!(a[0], 0.0);
        assert!(a.windows(2).all(|w| w[1] > w[0]));
        assert!(*a.last().unwrap() < FRAC_PI_2);
    }

    #[test]
    fn for_error_meets_the_target() {
        for n in 1..10 {
            let d = RotationDesign::for_error(n, 0.1).unwrap();
            assert!((d.radius() - 0.1).abs() <= 1e-12);
        }
    }

    #[test]
    fn improvement_examples() {
        let r = improvement_ratio(1.0, 0.5).unwrap();
        assert_eq!(r.n_star, 2);
        assert_relative_eq!(r.exact, 18.0 / rotated_cost(2, 0.5, 1.0).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(r.exact, 0.7914, max_relative = 1e-4);
        assert_relative_eq!(r.asymptotic, 4.0 / (PI * (E / 2.0).sqrt()), max_relative = 1e-14);

        let r = improvement_ratio(10.0, 1e-4).unwrap();
        assert_relative_eq!(r.asymptotic, 2048.0 / (PI * (5.0 * E).sqrt()), max_relative = 1e-14);
        assert!((r.exact / r.asymptotic - 1.0).abs() < 0.2);
        assert_relative_eq!(r.exact, r.cost_unrotated / r.cost_rotated, max_relative = 1e-12);

        let r = improvement_ratio(40.0, 1e-3).unwrap();
        assert!((r.exact / r.asymptotic - 1.0).abs() < 0.15);
    }

    #[test]
    fn ratio_survives_overflowing_costs() {
        let r = improvement_ratio(200.0, 1e-4).unwrap();
        assert!(r.cost_unrotated.is_infinite());
        assert!(r.exact.is_finite() && r.exact > 1.0);
    }

    proptest! {
        #[test]
        fn integer_argmin_is_near_the_relaxed_minimizer(s in 0.5..60.0f64, log_eps in -6.0..-0.5f64) {
            let eps = 10f64.powf(log_eps);
            let n_star = optimal_rotation_count(s).unwrap();
            let upper = 4 * n_star;
            let best = (1..=upper)
                .min_by(|&a, &b| {
                    let fa = log_relaxed_cost(f64::from(a), eps, s);
                    let fb = log_relaxed_cost(f64::from(b), eps, s);
                    fa.total_cmp(&fb)
                })
                .unwrap();
            let x = relaxed_minimizer(eps, s, f64::from(upper)).unwrap();
            prop_assert!((f64::from(best) - x).abs() <= 1.0, "argmin {} vs relaxed {}", best, x);
        }

        #[test]
        fn polygon_radius_is_homogeneous(n in 1u32..40, sigma in 1e-3..1e3f64) {
            let r1 = polygon_radius(n, 1.0).unwrap();
            prop_assert!((polygon_radius(n, sigma).unwrap() - sigma * r1).abs() <= 1e-12 * sigma);
        }
    }
}
