//! Acceptance checks, one PASS/FAIL line each. Every check compares the
//! library against an independent computation (vertex enumeration, generic
//! minimizers, brute force) or against its closed form.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use noisy_ibc::bounded::{comp_lower_ww, comp_upper_ww, optimal_precisions, radius_noisy};
use noisy_ibc::classify::{default_d_grid, default_eps_grid, fit_poly_exponents, sample_grid};
use noisy_ibc::cost::CostModel;
use noisy_ibc::design::{
    build_w, optimal_eta, prop1_lower, prop1_radius_bruteforce, FunctionalSet,
};
use noisy_ibc::gaussian::{comp_lower_wa, comp_upper_wa, simulate_wa, wa_exponents, ww_exponents, WaBoundConfig};
use noisy_ibc::rotation::{improvement_ratio, polygon_radius};
use noisy_ibc::spectra::SpectrumModel;
use noisy_ibc_cli::config::Scenario;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn sorted_asc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load_scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_dir().join(name)).expect("scenario file");
    Scenario::from_toml_str(&text).expect("valid scenario")
}

/// Scenarios evaluated on the default grid; `tensor_curse.toml` is the
/// small-grid curse example and is excluded.
const GRID_SCENARIOS: [&str; 6] = [
    "fitted_bounded.toml",
    "fitted_gaussian.toml",
    "exact_information.toml",
    "step_cost.toml",
    "table_cost.toml",
    "design_and_rotation.toml",
];

// 1 ------------------------------------------------------------------------

/// Maximum of `sum lambda_i b_i` over `0 <= b_i <= sigma_i^2`, `b_{n+1} >= 0`,
/// `sum b <= 1`, by enumerating vertices: every coordinate at a bound, and at
/// most one coordinate fixed by the budget.
fn lp_radius(lambda: &[f64], sigma: &[f64]) -> f64 {
    let n = sigma.len();
    let caps: Vec<f64> = sigma.iter().map(|s| s * s).chain([f64::INFINITY]).collect();
    let mut best: f64 = 0.0;
    for mask in 0u32..1 << n {
        let mut b = vec![0.0; n + 1];
        for i in 0..n {
            if mask >> i & 1 == 1 {
                b[i] = caps[i];
            }
        }
        let used: f64 = b.iter().sum();
        if used <= 1.0 {
            best = best.max(b.iter().zip(lambda).map(|(b, l)| b * l).sum());
        }
        for j in 0..=n {
            let rest = used - b[j];
            let bj = 1.0 - rest;
            if (0.0..=caps[j]).contains(&bj) {
                let mut c = b.clone();
                c[j] = bj;
                best = best.max(c.iter().zip(lambda).map(|(b, l)| b * l).sum());
            }
        }
    }
    best.sqrt()
}

fn criterion_1() -> Check {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let mut lambda = sorted_desc((0..=n).map(|_| rng.random_range(0.0..3.0)).collect());
        if rng.random_bool(0.2) {
            *lambda.last_mut().unwrap() = 0.0;
        }
        let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.8)).collect();
        let got = radius_noisy(&lambda, &sigma).map_err(|e| e.to_string())?;
        let want = lp_radius(&lambda, &sigma);
        worst = worst.max((got - want).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("500 instances, max |greedy - LP| = {worst:e}"))
}

// 2 ------------------------------------------------------------------------

/// Minimizes `sum b_i^-s` under `sum r_i b_i = budget` by exchanging budget
/// between pairs of coordinates, each exchange a golden-section search.
fn pairwise_minimizer(r: &[f64], budget: f64, s: f64) -> f64 {
    let n = r.len();
    let mut b: Vec<f64> = r.iter().map(|ri| budget / (n as f64 * ri)).collect();
    let obj = |b: &[f64]| b.iter().map(|x| x.powf(-s)).sum::<f64>();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut current = obj(&b);
    for _ in 0..500 {
        for i in 0..n {
            for j in i + 1..n {
                let t = r[i] * b[i] + r[j] * b[j];
                let g = |u: f64| (u * t / r[i]).powf(-s) + ((1.0 - u) * t / r[j]).powf(-s);
                let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
                for _ in 0..120 {
                    let m1 = hi - phi * (hi - lo);
                    let m2 = lo + phi * (hi - lo);
                    if g(m1) <= g(m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let u = 0.5 * (lo + hi);
                b[i] = u * t / r[i];
                b[j] = (1.0 - u) * t / r[j];
            }
        }
        let next = obj(&b);
        if (current - next).abs() <= 1e-15 * current {
            break;
        }
        current = next;
    }
    obj(&b)
}

fn criterion_2() -> Check {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let s = [0.5, 1.0, 2.0, 4.0][k % 4];
        let target = rng.random_range(2..=12);
        let mut values = vec![1.0];
        values.extend(sorted_desc((0..14).map(|_| rng.random_range(0.001..0.4)).collect()));
        // eps^2 / 2 strictly between r_{target+1} and r_target
        let mid = (values[target] * values[target - 1]).sqrt();
        let eps = (2.0 * mid).sqrt();
        let spec = SpectrumModel::explicit(values.clone()).and_then(|m| m.at(1)).map_err(|e| e.to_string())?;
        let d_coef = rng.random_range(0.5..2.0);
        let cost = CostModel::polynomial(d_coef, 0.0, s).map_err(|e| e.to_string())?;
        let op = optimal_precisions(&spec, eps, &cost).map_err(|e| e.to_string())?;
        let n = op.n as usize;
        ensure(n <= 12, || format!("instance {k}: n = {n}"))?;
        let sigma = &op.allocation.sigma;
        let err2: f64 = sigma.iter().zip(&values).map(|(s, r)| s * s * r).sum::<f64>() + values[n];
        ensure(err2 <= eps * eps * (1.0 + 1e-12), || format!("instance {k}: allocation infeasible"))?;
        let ours = n as f64 + d_coef * sigma.iter().map(|x| x.powf(-2.0 * s)).sum::<f64>();
        let oracle = n as f64 + d_coef * pairwise_minimizer(&values[..n], eps * eps - values[n], s);
        let rel = (ours - oracle) / oracle;
        worst = worst.max(rel.abs());
        ensure(rel.abs() <= 1e-3, || format!("instance {k} (s={s}): cost {ours} vs oracle {oracle}"))?;
    }
    Ok(format!("100 instances, max relative gap {worst:e}"))
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Check {
    let mut points = 0;
    for name in GRID_SCENARIOS {
        let sc = load_scenario(name);
        let model = sc.spectrum_model().map_err(|e| e.to_string())?;
        let cost = sc.cost_model().map_err(|e| e.to_string())?;
        let cfg = sc.wa_config().map_err(|e| e.to_string())?;
        for d in default_d_grid() {
            let spec = model.at(d).map_err(|e| e.to_string())?;
            for eps in default_eps_grid() {
                let e = |x: noisy_ibc::Error| format!("{name} d={d} eps={eps}: {x}");
                let lo = comp_lower_ww(&spec, eps, &cost).map_err(e)?.value;
                let hi = comp_upper_ww(&spec, eps, &cost).map_err(e)?.value;
                ensure(lo <= hi, || format!("{name} d={d} eps={eps}: ww {lo} > {hi}"))?;
                let lo = comp_lower_wa(&spec, eps, &cost, &cfg).map_err(e)?;
                let hi = comp_upper_wa(&spec, eps, &cost, &cfg).map_err(e)?.value;
                ensure(lo <= hi, || format!("{name} d={d} eps={eps}: wa {lo} > {hi}"))?;
                points += 1;
            }
        }
    }
    Ok(format!("6 scenarios, {points} grid points, 0 violations in either setting"))
}

// 4 ------------------------------------------------------------------------

fn criterion_4() -> Check {
    let model = SpectrumModel::fitted(2.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let cost = CostModel::polynomial(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let cfg = WaBoundConfig::default();
    let (eps, ds) = (default_eps_grid(), default_d_grid());
    let ww = sample_grid(&eps, &ds, |e, d| Ok(comp_upper_ww(&model.at(d)?, e, &cost)?.value)).map_err(|e| e.to_string())?;
    let wa = sample_grid(&eps, &ds, |e, d| Ok(comp_upper_wa(&model.at(d)?, e, &cost, &cfg)?.value)).map_err(|e| e.to_string())?;
    let fw = fit_poly_exponents(&ww).map_err(|e| e.to_string())?;
    let fa = fit_poly_exponents(&wa).map_err(|e| e.to_string())?;
    let pw = ww_exponents(2.0, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let pa = wa_exponents(2.0, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure(pw.d_exponent == 3.0 && pw.eps_exponent == 4.0, || format!("bounded prediction {pw:?}"))?;
    ensure(fw.q <= pw.d_exponent + 0.1 && fw.p <= pw.eps_exponent + 0.1, || format!("bounded fit q={} p={}", fw.q, fw.p))?;
    ensure(fa.q <= pa.d_exponent + 0.1 && fa.p <= pa.eps_exponent + 0.1, || format!("gaussian fit q={} p={}", fa.q, fa.p))?;
    Ok(format!(
        "bounded q={:.4} <= 3.1, p={:.4} <= 4.1; gaussian q={:.4} <= {}, p={:.4} <= {}",
        fw.q,
        fw.p,
        fa.q,
        pa.d_exponent + 0.1,
        fa.p,
        pa.eps_exponent + 0.1
    ))
}

// 5 ------------------------------------------------------------------------

fn criterion_5() -> Check {
    let cost = CostModel::polynomial(1.0, 0.0, 2.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        let sigma = 10f64.powi(-k);
        let b = cost.aux_cost_bounds(sigma, 1, Some(1.0)).map_err(|e| e.to_string())?;
        let lower = 2.0 / (sigma * sigma);
        ensure((b.lower - lower).abs() <= 1e-12 * lower, || format!("sigma={sigma}: lower {} != {lower}", b.lower))?;
        let ratio = b.upper / b.lower;
        ensure(ratio <= 1.0 + sigma * sigma, || format!("sigma={sigma}: upper/lower = {ratio}"))?;
        worst = worst.max(ratio);
    }
    let half = CostModel::polynomial(1.0, 0.0, 0.5).map_err(|e| e.to_string())?;
    for k in 1..=4 {
        let sigma = 10f64.powi(-k);
        let b = half.aux_cost_bounds(sigma, 1, None).map_err(|e| e.to_string())?;
        let value = 1.0 + 1.0 / sigma;
        ensure(b.exact && b.lower == b.upper && (b.lower - value).abs() <= 1e-12 * value, || {
            format!("s=0.5, sigma={sigma}: {b:?}")
        })?;
    }
    Ok(format!("s=2: lower = 2 sigma^-2, max upper/lower {worst}; s=0.5 exact"))
}

// 6 ------------------------------------------------------------------------

fn criterion_6() -> Check {
    let mut worst: f64 = 0.0;
    for n in 1..=64 {
        let sigma = 0.37;
        let r = polygon_radius(n, sigma).map_err(|e| e.to_string())?;
        let closed = sigma / (std::f64::consts::PI / (4.0 * f64::from(n))).cos();
        worst = worst.max((r - closed).abs());
    }
    ensure(worst <= 1e-9, || format!("polygon deviation {worst:e}"))?;
    let a = improvement_ratio(10.0, 1e-4).map_err(|e| e.to_string())?;
    let b = improvement_ratio(40.0, 1e-3).map_err(|e| e.to_string())?;
    let ra = a.exact / a.asymptotic;
    let rb = b.exact / b.asymptotic;
    ensure((ra - 1.0).abs() <= 0.2, || format!("s=10: exact/asymptotic = {ra}"))?;
    ensure((rb - 1.0).abs() <= 0.15, || format!("s=40: exact/asymptotic = {rb}"))?;
    Ok(format!(
        "polygon max deviation {worst:e}; exact/asymptotic {ra:.4} (s=10), {rb:.4} (s=40)"
    ))
}

// 7 ------------------------------------------------------------------------

/// `(lambda, sigma, n0)` with `m <= 5`, `n <= 8`, `n0 < m`.
fn random_design(rng: &mut StdRng) -> (Vec<f64>, Vec<f64>, usize) {
    let m = rng.random_range(1..=5);
    let n = rng.random_range(m..=8);
    let n0 = rng.random_range(0..m);
    let lambda = sorted_desc((0..m).map(|_| rng.random_range(0.01..5.0)).collect());
    let mut sigma = vec![0.0; n0];
    sigma.extend(sorted_asc((0..n - n0).map(|_| rng.random_range(0.05..2.0)).collect()));
    (lambda, sigma, n0)
}

/// Minimizes `sum lambda_i / x_i` over prefix sums `y_k = x_1 + ... + x_k`
/// with `y_k >= A_k` and `y_M` fixed, by projected gradient descent with
/// Barzilai-Borwein steps and backtracking. Projection onto the box is a
/// clamp.
fn projected_descent(lambda: &[f64], budgets: &[f64]) -> f64 {
    let m = budgets.len();
    let prefix: Vec<f64> = budgets.iter().scan(0.0, |acc, a| { *acc += a; Some(*acc) }).collect();
    let total = prefix[m - 1];
    let xs = |y: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let hi = if i + 1 == m { total } else { y[i] };
                let lo = if i == 0 { 0.0 } else { y[i - 1] };
                hi - lo
            })
            .collect()
    };
    let f = |y: &[f64]| -> f64 {
        let x = xs(y);
        if x.iter().any(|v| *v <= 0.0) {
            return f64::INFINITY;
        }
        lambda.iter().zip(&x).map(|(l, x)| l / x).sum()
    };
    let grad = |y: &[f64]| -> Vec<f64> {
        let x = xs(y);
        (0..m - 1).map(|k| -lambda[k] / (x[k] * x[k]) + lambda[k + 1] / (x[k + 1] * x[k + 1])).collect()
    };
    if m == 1 {
        return lambda[0] / total;
    }
    let project = |y: Vec<f64>| -> Vec<f64> { y.iter().zip(&prefix).map(|(v, a)| v.max(*a)).collect() };
    let mut y: Vec<f64> = prefix[..m - 1].to_vec();
    let mut g = grad(&y);
    let mut step = 1e-3 * total;
    let mut fy = f(&y);
    for _ in 0..200_000 {
        let mut t = step;
        let (y_new, f_new) = loop {
            let cand = project(y.iter().zip(&g).map(|(v, gv)| v - t * gv).collect());
            let fc = f(&cand);
            let moved: f64 = cand.iter().zip(&y).zip(&g).map(|((c, v), gv)| gv * (v - c)).sum();
            if fc <= fy - 1e-4 * moved || t < 1e-300 {
                break (cand, fc);
            }
            t *= 0.5;
        };
        let g_new = grad(&y_new);
        let dy: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let dd: f64 = dy.iter().map(|v| v * v).sum();
        let dgy: f64 = dy.iter().zip(&dg).map(|(a, b)| a * b).sum();
        let change = dd.sqrt();
        y = y_new;
        g = g_new;
        let done = (fy - f_new).abs() <= 1e-16 * fy && change <= 1e-14 * total;
        fy = f_new;
        if done {
            break;
        }
        step = if dgy > 0.0 { dd / dgy } else { 1e-3 * total };
    }
    fy
}

fn criterion_7() -> Check {
    let mut rng = StdRng::seed_from_u64(7);
    let (mut gram, mut rows, mut gap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..200 {
        let (lambda, sigma, n0) = random_design(&mut rng);
        let eta = optimal_eta(&lambda, &sigma, n0).map_err(|e| format!("instance {k}: {e}"))?;
        let w = build_w(&eta, &sigma, n0).map_err(|e| format!("instance {k}: {e}"))?;
        gram = gram.max(w.gram_deviation);
        rows = rows.max(w.row_deviation);
        let m = lambda.len();
        let inv: Vec<f64> = sigma[n0..].iter().map(|s| s.powi(-2)).collect();
        let mut budgets = inv[..m - n0 - 1].to_vec();
        budgets.push(inv[m - n0 - 1..].iter().sum());
        let oracle = projected_descent(&lambda[n0..], &budgets);
        let ours: f64 = eta.iter().zip(&lambda[n0..]).map(|(e, l)| e * e * l).sum();
        gap = gap.max(((ours - oracle) / oracle).abs());
    }
    ensure(gram <= 1e-8 && rows <= 1e-8, || format!("certificates gram {gram:e}, rows {rows:e}"))?;
    ensure(gap <= 1e-6, || format!("eta objective gap {gap:e}"))?;

    let mut rng = StdRng::seed_from_u64(77);
    let mut eq_dev: f64 = 0.0;
    for k in 0..500 {
        let n = rng.random_range(1..=8);
        let n0 = rng.random_range(0..=n / 3);
        let lambda = sorted_desc((0..n).map(|_| rng.random_range(0.01..5.0)).collect());
        let mut sigma = vec![0.0; n0];
        sigma.extend(sorted_asc((0..n - n0).map(|_| rng.random_range(0.01..1.0)).collect()));
        let mut l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        for mut row in l.row_iter_mut() {
            let norm = row.norm();
            row /= norm;
        }
        let lower = prop1_lower(&lambda, &sigma, n0).map_err(|e| e.to_string())?;
        let fs = FunctionalSet::new(l, lambda.clone(), sigma.clone(), n0).map_err(|e| e.to_string())?;
        let r = prop1_radius_bruteforce(&fs).map_err(|e| e.to_string())?;
        ensure(r.radius >= lower * (1.0 - 1e-12), || format!("instance {k}: radius {} < {lower}", r.radius))?;
        let coord = FunctionalSet::coordinate(lambda, sigma, n0).map_err(|e| e.to_string())?;
        let rc = prop1_radius_bruteforce(&coord).map_err(|e| e.to_string())?.radius;
        eq_dev = eq_dev.max((rc - lower).abs() / lower.max(f64::MIN_POSITIVE));
    }
    ensure(eq_dev <= 1e-12, || format!("coordinate design deviates by {eq_dev:e}"))?;
    Ok(format!(
        "W certificates gram {gram:e}, rows {rows:e}; eta gap {gap:e}; radius lower bound on 500 designs, coordinate equality to {eq_dev:e}"
    ))
}

// 8 ------------------------------------------------------------------------

fn criterion_8() -> Check {
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut first = None;
    for k in 0..100u64 {
        let n = rng.random_range(1..=6);
        let lambda = sorted_desc((0..=n).map(|_| rng.random_range(0.01..2.0)).collect());
        let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let mut f: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = rng.random_range(0.1..1.0) / norm;
        f.iter_mut().for_each(|v| *v *= scale);
        let seed = 1000 + k;
        let r = simulate_wa(&lambda, &sigma, &f, 100_000, seed).map_err(|e| e.to_string())?;
        let z = (r.empirical_mse - r.predicted_mse).abs() / r.std_error;
        worst = worst.max(z);
        ensure(z <= 4.0, || format!("instance {k}: {z:.2} standard errors"))?;
        if first.is_none() {
            first = Some((lambda, sigma, f, seed, format!("{r:?}")));
        }
    }
    let (lambda, sigma, f, seed, text) = first.unwrap();
    let again = simulate_wa(&lambda, &sigma, &f, 100_000, seed).map_err(|e| e.to_string())?;
    ensure(format!("{again:?}") == text, || "rerun with the same seed differs".into())?;
    Ok(format!("100 instances, max |z| = {worst:.3}; seeded rerun identical"))
}

// 9 ------------------------------------------------------------------------

fn criterion_9() -> Check {
    let bin = env!("CARGO_BIN_EXE_noisy-ibc");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    let mut scenarios: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    scenarios.sort();
    for path in &scenarios {
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = tmp.path().join(&stem).join(run);
            let status = Command::new(bin)
                .arg("run")
                .arg(path)
                .arg("--out")
                .arg(&out)
                .arg("--seed")
                .arg("12345")
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || format!("{stem}: exit {:?}", status.status.code()))?;
            outputs.push(out);
        }
        let mut names: Vec<_> = std::fs::read_dir(&outputs[0])
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let a = std::fs::read(outputs[0].join(&name)).map_err(|e| e.to_string())?;
            let b = std::fs::read(outputs[1].join(&name)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{stem}/{}: outputs differ", name.to_string_lossy()))?;
            files += 1;
        }
    }
    Ok(format!("{} scenarios, {files} files byte-identical across runs", scenarios.len()))
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "radius oracle equivalence", Some(Duration::from_secs(5)), criterion_1),
        (2, "allocation optimality", Some(Duration::from_secs(30)), criterion_2),
        (3, "bound sandwich", None, criterion_3),
        (4, "exponent coherence", None, criterion_4),
        (5, "auxiliary cost sandwich", None, criterion_5),
        (6, "rotation geometry", Some(Duration::from_secs(2)), criterion_6),
        (7, "design construction", None, criterion_7),
        (8, "Monte Carlo identity", Some(Duration::from_secs(60)), criterion_8),
        (9, "CLI determinism", None, criterion_9),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {:.2} s, limit {} s", elapsed.as_secs_f64(), l.as_secs())),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail} ({:.2} s)", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail} ({:.2} s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
