//! Small numerical kernels shared by the bound computations.

/// Neumaier's variant of compensated (Kahan) summation.
///
/// Long flat runs of equal terms are common in eigenvalue power sums, and a
/// plain running sum loses roughly `log2(n)` bits there.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Below this many terms the power sum is evaluated term by term.
const DIRECT_TERMS: u64 = 4096;

/// `sum_{k=a}^{b} k^(-gamma)` for `1 <= a`, exact summation of the head and
/// Euler-Maclaurin (three Bernoulli corrections) for the tail.
///
/// The tail starts at `k >= a + DIRECT_TERMS`, where the first neglected
/// correction is below `1e-20` relative for any `gamma <= 8`.
pub fn power_range_sum(a: u64, b: u64, gamma: f64) -> f64 {
    debug_assert!(a >= 1);
    if b < a {
        return 0.0;
    }
    if gamma == 0.0 {
        return (b - a + 1) as f64;
    }
    if b - a < 2 * DIRECT_TERMS {
        return compensated_sum((a..=b).map(|k| (k as f64).powf(-gamma)));
    }
    let split = a + DIRECT_TERMS;
    let mut acc: CompensatedSum = (a..split).map(|k| (k as f64).powf(-gamma)).collect();
    acc.add(euler_maclaurin_tail(split as f64, b as f64, gamma));
    acc.value()
}

fn euler_maclaurin_tail(a: f64, b: f64, gamma: f64) -> f64 {
    let f = |x: f64| x.powf(-gamma);
    let one_minus = 1.0 - gamma;
    let log_ratio = (b / a).ln();
    let integral = if one_minus.abs() < 1e-300 {
        log_ratio
    } else {
        // a^(1-g) * (exp((1-g) ln(b/a)) - 1) / (1-g), stable near g = 1
        a.powf(one_minus) * (one_minus * log_ratio).exp_m1() / one_minus
    };
    // odd derivatives of x^(-g): f'(x) = -g x^(-g-1), etc.
    let d1 = |x: f64| -gamma * x.powf(-gamma - 1.0);
    let d3 = |x: f64| -gamma * (gamma + 1.0) * (gamma + 2.0) * x.powf(-gamma - 3.0);
    let d5 = |x: f64| {
        -gamma * (gamma + 1.0) * (gamma + 2.0) * (gamma + 3.0) * (gamma + 4.0) * x.powf(-gamma - 5.0)
    };
    let b2 = 1.0 / 6.0 / 2.0;
    let b4 = -1.0 / 30.0 / 24.0;
    let b6 = 1.0 / 42.0 / 720.0;
    integral
        + 0.5 * (f(a) + f(b))
        + b2 * (d1(b) - d1(a))
        + b4 * (d3(b) - d3(a))
        + b6 * (d5(b) - d5(a))
}

/// `ceil(x)` that ignores relative rounding noise below `1e-12`, so that a
/// ratio computed as `99.99999999999999` for a true value of 100 is not
/// rounded up to 101.
pub fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Relative slack used when comparing an eigenvalue ratio against a
/// threshold, so that exact ties survive floating-point rounding.
pub const TIE_SLACK: f64 = 1e-12;
