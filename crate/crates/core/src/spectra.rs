//! Eigenvalue sequences of `S_d^* S_d` and the cardinality of exact information.
//!
//! Everything downstream works in the eigenbasis of `S_d^* S_d`, so a problem
//! is described entirely by its non-increasing eigenvalues
//! `lambda_{d,1} >= lambda_{d,2} >= ... -> 0`. Most consumers only need the
//! normalized ratios `r_j = lambda_{d,j} / lambda_{d,1}`, which [`Spectrum`]
//! exposes together with counting and power-sum queries that never
//! materialize long prefixes for the analytic families.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, power_range_sum, TIE_SLACK};

/// Default budget for enumeration work (materialized eigenvalues, heap pops,
/// grouped-enumeration nodes).
pub const DEFAULT_WORK_CAP: u64 = 10_000_000;

/// Largest index a search may report: beyond 2^53 indices stop being exact
/// in `f64` arithmetic.
pub const MAX_INDEX: u64 = 1 << 53;

/// Generator of the eigenvalues `lambda_{d,j}` for every dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumModel {
    /// Finite-rank sequences. A single list is used for every `d`; otherwise
    /// entry `d - 1` holds the sequence for dimension `d`. Missing tails are
    /// zero.
    Explicit { per_dim: Vec<Vec<f64>> },
    /// `lambda_{d,j} = scale * d^dim_power * j^(-decay)`.
    Polynomial {
        scale: f64,
        dim_power: f64,
        decay: f64,
    },
    /// Extremal spectrum of a problem with `n(eps, d) <= c d^q eps^(-p)`:
    /// `lambda_{d,1} = 1` and `lambda_{d,j} = min(1, (c d^q / (j-1))^(2/p))`.
    Fitted { c: f64, q: f64, p: f64 },
    /// Tensor product of univariate sequences. Coordinate `k` (0-based) uses
    /// `factors[min(k, factors.len() - 1)]`, so a single factor describes an
    /// isotropic product.
    Tensor { factors: Vec<Vec<f64>> },
}

/// Exponents `(C, q, p)` of a polynomial bound `n(eps, d) <= C d^q eps^(-p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayExponents {
    pub c: f64,
    pub q: f64,
    pub p: f64,
}

/// Minimal number of exact observations reaching normalized error `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactCardinality {
    pub n: u64,
    /// `sqrt(lambda_{n+1} / lambda_1)`, the normalized radius actually reached.
    pub achieved_ratio: f64,
}

fn check_sequence(name: &'static str, seq: &[f64]) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::param(name, "empty sequence"));
    }
    if seq.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::param(name, "entries must be finite and nonnegative"));
    }
    if seq[0] <= 0.0 {
        return Err(Error::param(name, "leading entry must be positive"));
    }
    if let Some(k) = seq.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::param(
            name,
            format!("sequence increases at position {}", k + 2),
        ));
    }
    Ok(())
}

impl SpectrumModel {
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::explicit_per_dim(vec![values])
    }

    pub fn explicit_per_dim(per_dim: Vec<Vec<f64>>) -> Result<Self> {
        let model = SpectrumModel::Explicit { per_dim };
        model.validate()?;
        Ok(model)
    }

    pub fn polynomial(scale: f64, decay: f64) -> Result<Self> {
        Self::polynomial_in_dim(scale, 0.0, decay)
    }

    pub fn polynomial_in_dim(scale: f64, dim_power: f64, decay: f64) -> Result<Self> {
        let model = SpectrumModel::Polynomial {
            scale,
            dim_power,
            decay,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn fitted(c: f64, q: f64, p: f64) -> Result<Self> {
        let model = SpectrumModel::Fitted { c, q, p };
        model.validate()?;
        Ok(model)
    }

    pub fn tensor(factors: Vec<Vec<f64>>) -> Result<Self> {
        let model = SpectrumModel::Tensor { factors };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectrumModel::Explicit { per_dim } => {
                if per_dim.is_empty() {
                    return Err(Error::param("explicit", "no sequences given"));
                }
                per_dim.iter().try_for_each(|s| check_sequence("explicit", s))
            }
            SpectrumModel::Polynomial {
                scale,
                dim_power,
                decay,
            } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::param("scale", "must be finite and positive"));
                }
                if !dim_power.is_finite() {
                    return Err(Error::param("dim_power", "must be finite"));
                }
                if !(decay.is_finite() && *decay > 0.0) {
                    return Err(Error::param("decay", "must be finite and positive"));
                }
                Ok(())
            }
            SpectrumModel::Fitted { c, q, p } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::param("c", "must be finite and nonnegative"));
                }
                if !(q.is_finite() && *q >= 0.0) {
                    return Err(Error::param("q", "must be finite and nonnegative"));
                }
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::param("p", "must be finite and positive"));
                }
                Ok(())
            }
            SpectrumModel::Tensor { factors } => {
                if factors.is_empty() {
                    return Err(Error::param("tensor", "no factors given"));
                }
                factors.iter().try_for_each(|s| check_sequence("tensor", s))
            }
        }
    }

    /// Known tractability exponents of exact information, when the family
    /// pins them down.
    pub fn decay_exponents(&self) -> Option<DecayExponents> {
        match self {
            SpectrumModel::Fitted { c, q, p } => Some(DecayExponents {
                c: *c,
                q: *q,
                p: *p,
            }),
            SpectrumModel::Polynomial { decay, .. } => Some(DecayExponents {
                c: 1.0,
                q: 0.0,
                p: 2.0 / decay,
            }),
            SpectrumModel::Explicit { per_dim } if per_dim.len() == 1 => {
                let rank = per_dim[0].iter().filter(|x| **x > 0.0).count();
                Some(DecayExponents {
                    c: rank as f64,
                    q: 0.0,
                    p: 0.0,
                })
            }
            _ => None,
        }
    }

    /// Binds the model to dimension `d`.
    pub fn at(&self, d: u32) -> Result<Spectrum> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        let df = d as f64;
        let (lambda1, kind) = match self {
            SpectrumModel::Explicit { per_dim } => {
                let seq = if per_dim.len() == 1 {
                    &per_dim[0]
                } else {
                    per_dim.get(d as usize - 1).ok_or_else(|| {
                        Error::param(
                            "d",
                            format!("explicit spectrum lists only {} dimensions", per_dim.len()),
                        )
                    })?
                };
                let mut rank = seq.len();
                while rank > 0 && seq[rank - 1] == 0.0 {
                    rank -= 1;
                }
                (seq[0], Kind::Finite(seq[..rank].to_vec()))
            }
            SpectrumModel::Polynomial {
                scale,
                dim_power,
                decay,
            } => (scale * df.powf(*dim_power), Kind::Power { decay: *decay }),
            SpectrumModel::Fitted { c, q, p } => (
                1.0,
                Kind::Fitted {
                    a: c * df.powf(*q),
                    p: *p,
                },
            ),
            SpectrumModel::Tensor { factors } => {
                let groups = TensorGroups::new(factors, d);
                (groups.lambda1, Kind::Tensor(groups))
            }
        };
        Ok(Spectrum {
            d,
            lambda1,
            kind,
            work_cap: DEFAULT_WORK_CAP,
        })
    }

    /// `lambda_{d,1..count}`.
    pub fn eigenvalues(&self, d: u32, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::param("count", "must be at least 1"));
        }
        self.at(d)?.eigenvalues(count)
    }

    pub fn n_exact(&self, eps: f64, d: u32) -> Result<ExactCardinality> {
        self.at(d)?.n_exact(eps)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    /// Eigenvalues up to the rank (trailing zeros stripped).
    Finite(Vec<f64>),
    Power { decay: f64 },
    Fitted { a: f64, p: f64 },
    Tensor(TensorGroups),
}

/// The eigenvalue sequence of one `S_d`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    d: u32,
    lambda1: f64,
    kind: Kind,
    work_cap: u64,
}

impl Spectrum {
    pub fn with_work_cap(mut self, cap: u64) -> Self {
        self.work_cap = cap.max(1);
        self
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn work_cap(&self) -> u64 {
        self.work_cap
    }

    /// `r_j = lambda_j / lambda_1` for `j >= 1`.
    pub fn ratio(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(Error::param("j", "indices start at 1"));
        }
        match &self.kind {
            Kind::Finite(vals) => Ok(vals
                .get(j as usize - 1)
                .map_or(0.0, |v| v / self.lambda1)),
            Kind::Power { decay } => Ok((j as f64).powf(-decay)),
            Kind::Fitted { a, p } => Ok(fitted_ratio(*a, *p, j)),
            Kind::Tensor(groups) => {
                let top = groups.top(j, self.work_cap)?;
                Ok(top.kth(j))
            }
        }
    }

    /// First `count` ratios.
    pub fn ratios(&self, count: usize) -> Result<Vec<f64>> {
        self.check_materialize(count as u64)?;
        match &self.kind {
            Kind::Finite(vals) => Ok((0..count)
                .map(|i| vals.get(i).map_or(0.0, |v| v / self.lambda1))
                .collect()),
            Kind::Power { decay } => Ok((1..=count as u64)
                .map(|j| (j as f64).powf(-decay))
                .collect()),
            Kind::Fitted { a, p } => Ok((1..=count as u64).map(|j| fitted_ratio(*a, *p, j)).collect()),
            Kind::Tensor(groups) => {
                let prefix = top_products(&groups.raw, count, self.work_cap)?;
                Ok(prefix.values.iter().map(|v| v / self.lambda1).collect())
            }
        }
    }

    /// First `count` eigenvalues.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        self.check_materialize(count as u64)?;
        match &self.kind {
            Kind::Finite(vals) => Ok((0..count).map(|i| vals.get(i).copied().unwrap_or(0.0)).collect()),
            Kind::Power { decay } => Ok((1..=count as u64)
                .map(|j| self.lambda1 * (j as f64).powf(-decay))
                .collect()),
            Kind::Fitted { .. } => self.ratios(count),
            Kind::Tensor(groups) => Ok(top_products(&groups.raw, count, self.work_cap)?.values),
        }
    }

    fn check_materialize(&self, count: u64) -> Result<()> {
        if count > self.work_cap {
            return Err(Error::ResourceLimit {
                what: format!("materializing {count} eigenvalues"),
                cap: self.work_cap,
            });
        }
        Ok(())
    }

    /// `#{ j : r_j > tau }`.
    pub fn count_above(&self, tau: f64) -> Result<u64> {
        if tau.is_nan() {
            return Err(Error::param("tau", "NaN threshold"));
        }
        if tau >= 1.0 {
            return Ok(0);
        }
        match &self.kind {
            Kind::Finite(vals) => {
                let t = tau * self.lambda1;
                Ok(vals.partition_point(|v| *v > t) as u64)
            }
            Kind::Power { decay } => {
                let decay = *decay;
                first_at_or_below(|j| (j as f64).powf(-decay), tau).map(|j| j - 1)
            }
            Kind::Fitted { a, p } => {
                if *a == 0.0 {
                    return Ok(1);
                }
                let (a, p) = (*a, *p);
                first_at_or_below(|j| fitted_ratio(a, p, j), tau).map(|j| j - 1)
            }
            Kind::Tensor(groups) => {
                let total: u128 = groups
                    .enumerate_above(tau, self.work_cap)?
                    .iter()
                    .map(|g| g.1)
                    .sum();
                if total > MAX_INDEX as u128 {
                    return Err(Error::ResourceLimit {
                        what: format!("eigenvalue count {total}"),
                        cap: MAX_INDEX,
                    });
                }
                Ok(total as u64)
            }
        }
    }

    /// Smallest `n` with `sqrt(lambda_{n+1}) <= eps * sqrt(lambda_1)`; ties
    /// resolve to the smaller `n`. `eps >= 1` gives `n = 0`.
    pub fn n_exact(&self, eps: f64) -> Result<ExactCardinality> {
        if !(eps > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        let n = self.count_above(eps * eps * (1.0 + TIE_SLACK))?;
        let achieved_ratio = self.ratio(n + 1)?.sqrt();
        Ok(ExactCardinality { n, achieved_ratio })
    }

    /// `sum_{j=1}^{n} r_j^beta` for `beta > 0`.
    pub fn power_sum(&self, n: u64, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::param("beta", "must be positive"));
        }
        if n == 0 {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Finite(vals) => Ok(compensated_sum(
                vals.iter()
                    .take(n as usize)
                    .map(|v| (v / self.lambda1).powf(beta)),
            )),
            Kind::Power { decay } => Ok(power_range_sum(1, n, decay * beta)),
            Kind::Fitted { a, p } => {
                if *a == 0.0 {
                    return Ok(1.0);
                }
                let flat = a.floor() as u64 + 1;
                if n <= flat {
                    return Ok(n as f64);
                }
                let gamma = 2.0 * beta / p;
                Ok(flat as f64 + a.powf(gamma) * power_range_sum(flat, n - 1, gamma))
            }
            Kind::Tensor(groups) => Ok(groups.top(n, self.work_cap)?.power_sum(n, beta)),
        }
    }
}

fn fitted_ratio(a: f64, p: f64, j: u64) -> f64 {
    if j == 1 {
        return 1.0;
    }
    let k = (j - 1) as f64;
    if a >= k {
        1.0
    } else {
        (a / k).powf(2.0 / p)
    }
}

/// Smallest `j >= 1` with `ratio(j) <= tau`, by galloping then bisection.
fn first_at_or_below(ratio: impl Fn(u64) -> f64, tau: f64) -> Result<u64> {
    if ratio(1) <= tau {
        return Ok(1);
    }
    let (mut lo, mut hi) = (1u64, 2u64);
    while ratio(hi) > tau {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > MAX_INDEX {
            return Err(Error::ResourceLimit {
                what: "index search".into(),
                cap: MAX_INDEX,
            });
        }
    }
    // ratio(lo) > tau >= ratio(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ratio(mid) > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Coordinates of a tensor product grouped by the factor they use, so that
/// products can be counted over multisets instead of index vectors.
#[derive(Debug, Clone)]
struct TensorGroups {
    /// Per-coordinate factor sequences (unnormalized), for the frontier
    /// enumerator.
    raw: Vec<Vec<f64>>,
    /// (normalized factor, number of coordinates using it)
    groups: Vec<(Vec<f64>, u32)>,
    lambda1: f64,
    /// Product of the smallest positive ratios; thresholds below it see
    /// every nonzero eigenvalue.
    min_positive: f64,
}

impl TensorGroups {
    fn new(factors: &[Vec<f64>], d: u32) -> Self {
        let last = factors.len() - 1;
        let mut counts = vec![0u32; factors.len()];
        for k in 0..d as usize {
            counts[k.min(last)] += 1;
        }
        let raw = (0..d as usize).map(|k| factors[k.min(last)].clone()).collect();
        let mut groups = Vec::new();
        let mut lambda1 = 1.0;
        let mut min_positive = 1.0;
        for (f, &c) in factors.iter().zip(&counts) {
            if c == 0 {
                continue;
            }
            lambda1 *= f[0].powi(c as i32);
            let norm: Vec<f64> = f.iter().map(|x| x / f[0]).take_while(|x| *x > 0.0).collect();
            min_positive *= norm.last().copied().unwrap_or(1.0).powi(c as i32);
            groups.push((norm, c));
        }
        TensorGroups {
            raw,
            groups,
            lambda1,
            min_positive,
        }
    }

    /// Distinct multiset configurations with normalized product `> tau`,
    /// as (value, multiplicity).
    fn enumerate_above(&self, tau: f64, cap: u64) -> Result<Vec<(f64, u128)>> {
        let mut walk = GroupWalk {
            groups: &self.groups,
            tau,
            cap,
            nodes: 0,
            out: Vec::new(),
        };
        if 1.0 > tau {
            walk.group(0, 1.0, 1)?;
        }
        Ok(walk.out)
    }

    /// Enough of the top of the spectrum (sorted, grouped) to cover `n`
    /// eigenvalues, or all nonzero eigenvalues if the rank is below `n`.
    fn top(&self, n: u64, cap: u64) -> Result<TopGroups> {
        let mut tau = 0.5f64;
        loop {
            let mut list = self.enumerate_above(tau, cap)?;
            let total: u128 = list.iter().map(|g| g.1).sum();
            let exhausted = tau < self.min_positive;
            if total >= n as u128 || exhausted {
                list.sort_by(|x, y| y.0.total_cmp(&x.0));
                return Ok(TopGroups { list });
            }
            tau *= 0.0625;
            if tau == 0.0 {
                tau = -1.0;
            }
        }
    }
}

struct GroupWalk<'a> {
    groups: &'a [(Vec<f64>, u32)],
    tau: f64,
    cap: u64,
    nodes: u64,
    out: Vec<(f64, u128)>,
}

impl GroupWalk<'_> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::ResourceLimit {
                what: "tensor eigenvalue enumeration".into(),
                cap: self.cap,
            });
        }
        Ok(())
    }

    fn group(&mut self, g: usize, value: f64, mult: u128) -> Result<()> {
        self.tick()?;
        if g == self.groups.len() {
            self.out.push((value, mult));
            return Ok(());
        }
        self.multiset(g, 1, 0, 0, value, mult)
    }

    /// Extends the multiset of nonzero indices of group `g`; indices are
    /// added in non-decreasing order, `run` counts repeats of `last`.
    fn multiset(
        &mut self,
        g: usize,
        start: usize,
        chosen: u32,
        run: u32,
        value: f64,
        mult: u128,
    ) -> Result<()> {
        self.group(g + 1, value, mult)?;
        let (weights, count) = (&self.groups[g].0, self.groups[g].1);
        if chosen == count {
            return Ok(());
        }
        for (j, w) in weights.iter().enumerate().skip(start) {
            let next = value * w;
            if next <= self.tau {
                break;
            }
            let repeats = if j == start && chosen > 0 { run } else { 0 };
            let next_mult = mult
                .checked_mul((count - chosen) as u128)
                .ok_or_else(|| Error::Internal("tensor multiplicity overflow".into()))?
                / (repeats as u128 + 1);
            self.multiset(g, j, chosen + 1, repeats + 1, next, next_mult)?;
        }
        Ok(())
    }
}

struct TopGroups {
    list: Vec<(f64, u128)>,
}

impl TopGroups {
    fn kth(&self, k: u64) -> f64 {
        let mut seen = 0u128;
        for &(v, m) in &self.list {
            seen += m;
            if seen >= k as u128 {
                return v;
            }
        }
        0.0
    }

    fn power_sum(&self, n: u64, beta: f64) -> f64 {
        let mut left = n as u128;
        let mut acc = crate::numeric::CompensatedSum::new();
        for &(v, m) in &self.list {
            if left == 0 {
                break;
            }
            let take = m.min(left);
            acc.add(take as f64 * v.powf(beta));
            left -= take;
        }
        acc.value()
    }
}

/// Largest products of a tensor spectrum, in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorPrefix {
    pub values: Vec<f64>,
    /// Set when products of positive factors underflowed to zero, i.e. the
    /// trailing zeros are not genuine.
    pub underflow: bool,
}

/// The `count` largest products `w_{1,j1} * ... * w_{d,jd}` over `d`
/// coordinates, coordinate `k` using `weights[min(k, len - 1)]`.
///
/// Walks a best-first frontier over index vectors; each vector has a unique
/// parent (decrement its last nonzero coordinate), so nothing is visited
/// twice and the full `d`-fold grid is never formed.
pub fn tensor_top_eigenvalues(weights: &[Vec<f64>], d: u32, count: usize) -> Result<TensorPrefix> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    SpectrumModel::tensor(weights.to_vec())?;
    let last = weights.len() - 1;
    let coords: Vec<Vec<f64>> = (0..d as usize).map(|k| weights[k.min(last)].clone()).collect();
    top_products(&coords, count, DEFAULT_WORK_CAP.max(count as u64))
}

#[derive(Debug)]
struct Frontier {
    value: f64,
    /// sparse (coordinate, index) pairs with index >= 1, sorted by coordinate
    state: Vec<(u32, u32)>,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.value.total_cmp(&other.value) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value)
    }
}

fn top_products(coords: &[Vec<f64>], count: usize, cap: u64) -> Result<TensorPrefix> {
    if count as u64 > cap {
        return Err(Error::ResourceLimit {
            what: format!("materializing {count} tensor eigenvalues"),
            cap,
        });
    }
    let root: f64 = coords.iter().map(|w| w[0]).product();
    let mut heap = BinaryHeap::new();
    heap.push(Frontier {
        value: root,
        state: Vec::new(),
    });
    let mut values = Vec::with_capacity(count);
    let mut underflow = false;
    while values.len() < count {
        let Some(top) = heap.pop() else { break };
        if top.value == 0.0 {
            // every remaining product is no larger than this one
            let genuine_zero = top.state.iter().any(|&(k, i)| coords[k as usize][i as usize] == 0.0);
            underflow = !genuine_zero;
            break;
        }
        let last = top.state.last().copied();
        // bump the last nonzero coordinate
        if let Some((k, i)) = last {
            let w = &coords[k as usize];
            if (i as usize + 1) < w.len() {
                let mut state = top.state.clone();
                state.last_mut().unwrap().1 = i + 1;
                heap.push(Frontier {
                    value: top.value / w[i as usize] * w[i as usize + 1],
                    state,
                });
            }
        }
        // open a later coordinate at index 1
        let from = last.map_or(0, |(k, _)| k as usize + 1);
        for (k, w) in coords.iter().enumerate().skip(from) {
            if w.len() > 1 {
                let mut state = top.state.clone();
                state.push((k as u32, 1));
                heap.push(Frontier {
                    value: top.value / w[0] * w[1],
                    state,
                });
            }
        }
        values.push(top.value);
    }
    values.resize(count, 0.0);
    Ok(TensorPrefix { values, underflow })
}
