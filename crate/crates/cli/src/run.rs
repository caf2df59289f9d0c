//! Task execution and report files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use noisy_ibc::bounded::{complexity_ww, optimal_precisions};
use noisy_ibc::classify::{self, TractabilityReport, WeakReport};
use noisy_ibc::cost::CostModel;
use noisy_ibc::design::{build_w, coordinate_optimality_check, design_radius_wa, optimal_eta};
use noisy_ibc::gaussian::{comp_lower_wa, comp_upper_wa, simulate_wa, wa_exponents, ww_exponents, WaBranch};
use noisy_ibc::rotation::improvement_ratio;
use noisy_ibc::spectra::SpectrumModel;

use crate::config::{ConfigError, Noise, Scenario, Task};

/// Why a run stopped or failed.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} task(s) failed; see summary.txt")]
    Tasks { failed: usize },
}

impl RunError {
    /// 2 for configuration problems, 3 for everything that went wrong later.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Read { .. } | RunError::Config(_) => 2,
            RunError::Io(_) | RunError::Tasks { .. } => 3,
        }
    }
}

/// Hex SHA-256 of the scenario file bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and validates a scenario file.
pub fn load(path: &Path) -> Result<(Scenario, String), RunError> {
    let bytes = fs::read(path).map_err(|source| RunError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| ConfigError::Parse("scenario file is not valid UTF-8".into()))?;
    Ok((Scenario::from_toml_str(&text)?, config_hash(&bytes)))
}

/// Shortest representation that reads back to the same `f64`; `inf` for
/// infinity.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

struct Csv {
    out: BufWriter<File>,
}

impl Csv {
    fn create(dir: &Path, task: Task, hash: &str, header: &[&str]) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(dir.join(format!("{}.csv", task.name())))?);
        writeln!(out, "# config-sha256: {hash}")?;
        writeln!(out, "{}", header.join(","))?;
        Ok(Csv { out })
    }

    fn row(&mut self, cells: &[String]) -> std::io::Result<()> {
        writeln!(self.out, "{}", cells.join(","))
    }

    fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, thiserror::Error)]
enum TaskError {
    #[error(transparent)]
    Model(#[from] noisy_ibc::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Check(String),
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    dir: &'a Path,
    hash: &'a str,
    seed: Option<u64>,
}

/// Runs every task in order, writing `<task>.csv` files and `summary.txt`
/// into `dir`. Later tasks still run after a failure; the failure is recorded
/// in the summary and reported in the result.
pub fn run_scenario(scenario: &Scenario, hash: &str, dir: &Path, seed: Option<u64>) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    let mut summary = BufWriter::new(File::create(dir.join("summary.txt"))?);
    writeln!(summary, "# config-sha256: {hash}")?;
    if let Some(name) = &scenario.name {
        writeln!(summary, "scenario: {name}")?;
    }
    let ctx = Ctx {
        scenario,
        dir,
        hash,
        seed: seed.or(scenario.seed),
    };
    let mut failed = 0;
    for &task in &scenario.tasks {
        let result = match task {
            Task::Complexity => complexity(&ctx),
            Task::Allocate => allocate(&ctx),
            Task::Design => design(&ctx),
            Task::Rotate => rotate(&ctx),
            Task::Classify => classify_task(&ctx),
            Task::Simulate => simulate(&ctx),
        };
        match result {
            Ok(lines) => {
                for line in lines {
                    writeln!(summary, "[{}] {line}", task.name())?;
                }
            }
            Err(e) => {
                failed += 1;
                writeln!(summary, "[{}] FAILED: {e}", task.name())?;
            }
        }
    }
    summary.flush()?;
    if failed > 0 {
        return Err(RunError::Tasks { failed });
    }
    Ok(())
}

fn upper_value(noise: Noise, model: &SpectrumModel, cost: &CostModel, s: &Scenario, eps: f64, d: u32) -> Result<f64, TaskError> {
    let spec = model.at(d)?;
    Ok(match noise {
        Noise::Bounded => complexity_ww(&spec, eps, cost)?.upper,
        Noise::Gaussian => comp_upper_wa(&spec, eps, cost, &s.wa_config()?)?.value,
    })
}

fn complexity(ctx: &Ctx) -> Result<Vec<String>, TaskError> {
    let s = ctx.scenario;
    let model = s.spectrum_model()?;
    let cost = s.cost_model()?;
    let (eps_grid, d_grid) = (s.eps_grid(), s.d_grid());
    let mut violations = 0;
    match s.noise {
        Noise::Bounded => {
            let mut csv = Csv::create(ctx.dir, Task::Complexity, ctx.hash, &["d", "epsilon", "lower", "upper", "witness_n"])?;
            for &d in &d_grid {
                let spec = model.at(d)?;
                for &eps in &eps_grid {
                    let b = complexity_ww(&spec, eps, &cost)?;
                    csv.row(&[d.to_string(), fmt_f64(eps), fmt_f64(b.lower), fmt_f64(b.upper), b.witness_n.to_string()])?;
                }
            }
            csv.finish()?;
        }
        Noise::Gaussian => {
            let cfg = s.wa_config()?;
            let mut csv = Csv::create(ctx.dir, Task::Complexity, ctx.hash, &["d", "epsilon", "lower_wa", "upper_wa", "branch", "c"])?;
            for &d in &d_grid {
                let spec = model.at(d)?;
                for &eps in &eps_grid {
                    let lower = comp_lower_wa(&spec, eps, &cost, &cfg)?;
                    let upper = comp_upper_wa(&spec, eps, &cost, &cfg)?;
                    if lower > upper.value {
                        violations += 1;
                    }
                    let branch = match upper.branch {
                        WaBranch::Corollary { .. } => "corollary",
                        WaBranch::Envelope => "envelope",
                    };
                    csv.row(&[d.to_string(), fmt_f64(eps), fmt_f64(lower), fmt_f64(upper.value), branch.to_string(), fmt_f64(cfg.c)])?;
                }
            }
            csv.finish()?;
        }
    }
    if violations > 0 {
        return Err(TaskError::Check(format!("lower bound above upper bound at {violations} grid points")));
    }
    let noise = match s.noise {
        Noise::Bounded => "bounded",
        Noise::Gaussian => "gaussian",
    };
    Ok(vec![format!(
        "{noise} noise, {} grid points, lower <= upper at every point",
        eps_grid.len() * d_grid.len()
    )])
}

fn allocate(ctx: &Ctx) -> Result<Vec<String>, TaskError> {
    let s = ctx.scenario;
    let a = s.allocate.as_ref().ok_or_else(|| TaskError::Check("missing [allocate]".into()))?;
    let model = s.spectrum_model()?;
    let cost = s.cost_model()?;
    let mut csv = Csv::create(ctx.dir, Task::Allocate, ctx.hash, &["d", "epsilon", "index", "sigma"])?;
    let mut lines = Vec::new();
    for &d in &a.d {
        let spec = model.at(d)?;
        for &eps in &a.eps {
            let op = optimal_precisions(&spec, eps, &cost)?;
            for (i, sigma) in op.allocation.sigma.iter().enumerate() {
                csv.row(&[d.to_string(), fmt_f64(eps), (i + 1).to_string(), fmt_f64(*sigma)])?;
            }
            lines.push(format!("d={d}, eps={eps}: n = {}, cost = {}", op.n, op.psi));
        }
    }
    csv.finish()?;
    Ok(lines)
}

fn design(ctx: &Ctx) -> Result<Vec<String>, TaskError> {
    let s = ctx.scenario;
    let spec = s.design.as_ref().ok_or_else(|| TaskError::Check("missing [design]".into()))?;
    let (lambda, sigma, n0) = spec.resolve()?;
    let eta = optimal_eta(&lambda, &sigma, n0)?;
    let radius = design_radius_wa(&lambda, &sigma, n0)?;
    let mut lines = Vec::new();
    if sigma.len() == lambda.len() {
        let chk = coordinate_optimality_check(&lambda, &sigma, n0)?;
        lines.push(format!(
            "coordinate design optimal: {}, radius {:.7}",
            chk.coordinate_optimal, chk.radius
        ));
        lines.push(format!("precisions proportional to sqrt(lambda): {}", chk.proportional));
    }
    lines.push(format!("optimal design radius {:.7}", radius));

    let mut csv = Csv::create(ctx.dir, Task::Design, ctx.hash, &["index", "lambda", "sigma", "eta"])?;
    for i in 0..sigma.len().max(lambda.len()) {
        let cell = |v: Option<&f64>| v.map_or(String::new(), |x| fmt_f64(*x));
        let eta_i = if i < n0 { Some(&0.0) } else { eta.get(i - n0) };
        csv.row(&[(i + 1).to_string(), cell(lambda.get(i)), cell(sigma.get(i)), cell(eta_i)])?;
    }
    csv.finish()?;

    let mut dump = String::new();
    writeln!(dump, "# config-sha256: {}", ctx.hash).unwrap();
    if eta.is_empty() {
        writeln!(dump, "# every coordinate is observed exactly; W is empty").unwrap();
        lines.push("W is empty (every coordinate exact)".into());
    } else {
        let w = build_w(&eta, &sigma, n0)?;
        writeln!(dump, "# rows: {}, columns: {}", w.w.nrows(), w.w.ncols()).unwrap();
        writeln!(dump, "# max |W^T W - diag(eta^-2)|: {}", fmt_f64(w.gram_deviation)).unwrap();
        writeln!(dump, "# max |row norm^2 - sigma^-2|: {}", fmt_f64(w.row_deviation)).unwrap();
        writeln!(dump, "# rotations: {}", w.rotations).unwrap();
        for row in w.w.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
            writeln!(dump, "{}", cells.join(" ")).unwrap();
        }
        lines.push(format!(
            "W certificates: gram {}, rows {}, rotations {}",
            fmt_f64(w.gram_deviation),
            fmt_f64(w.row_deviation),
            w.rotations
        ));
    }
    fs::write(ctx.dir.join("design_w.txt"), dump)?;
    Ok(lines)
}

fn rotate(ctx: &Ctx) -> Result<Vec<String>, TaskError> {
    let r = ctx.scenario.rotate.as_ref().ok_or_else(|| TaskError::Check("missing [rotate]".into()))?;
    let mut csv = Csv::create(
        ctx.dir,
        Task::Rotate,
        ctx.hash,
        &["s", "epsilon", "n_star", "cost_unrotated", "cost_rotated", "exact_ratio", "asymptotic_ratio"],
    )?;
    let mut lines = Vec::new();
    for &s in &r.s {
        for &eps in &r.eps {
            let ir = improvement_ratio(s, eps)?;
            csv.row(&[
                fmt_f64(s),
                fmt_f64(eps),
                ir.n_star.to_string(),
                fmt_f64(ir.cost_unrotated),
                fmt_f64(ir.cost_rotated),
                fmt_f64(ir.exact),
                fmt_f64(ir.asymptotic),
            ])?;
            lines.push(format!(
                "s={s}, eps={eps}: n_star = {}, improvement {} (asymptotic {})",
                ir.n_star, ir.exact, ir.asymptotic
            ));
        }
    }
    csv.finish()?;
    Ok(lines)
}

fn weak_rows(csv: &mut Csv, label: &str, w: &WeakReport) -> std::io::Result<()> {
    for p in &w.points {
        csv.row(&[label.to_string(), fmt_f64(p.eps), p.d.to_string(), fmt_f64(p.value), fmt_f64(p.r)])?;
    }
    Ok(())
}

fn classify_task(ctx: &Ctx) -> Result<Vec<String>, TaskError> {
    let s = ctx.scenario;
    let c = &s.classify;
    let model = s.spectrum_model()?;
    let cost = s.cost_model()?;
    let upper = |eps: f64, d: u32| {
        upper_value(s.noise, &model, &cost, s, eps, d).map_err(|e| match e {
            TaskError::Model(m) => m,
            other => noisy_ibc::Error::Internal(other.to_string()),
        })
    };
    let mut csv = Csv::create(ctx.dir, Task::Classify, ctx.hash, &["diagnostic", "epsilon", "d", "value", "statistic"])?;
    let mut report = TractabilityReport::default();
    let mut lines = Vec::new();

    if c.fit {
        let samples = classify::sample_grid(&s.eps_grid(), &s.d_grid(), upper)?;
        match classify::fit_poly_exponents(&samples) {
            Ok(fit) => {
                for x in &samples {
                    let predicted = fit.c * f64::from(x.d).powf(fit.q) * x.eps.powf(-fit.p);
                    csv.row(&["fit".into(), fmt_f64(x.eps), x.d.to_string(), fmt_f64(x.value), fmt_f64(predicted)])?;
                }
                report.fit = Some(fit);
            }
            Err(e) => lines.push(format!("polynomial fit unavailable: {e}")),
        }
        if let (Some(exps), CostModel::Polynomial { t, s: sc, .. }) = (model.decay_exponents(), &cost) {
            let predicted = match s.noise {
                Noise::Bounded => ww_exponents(exps.p, exps.q, *sc, *t)?,
                Noise::Gaussian => wa_exponents(exps.p, exps.q, *sc, *t)?,
            };
            lines.push(format!(
                "predicted exponents: d^{} eps^-{} ({})",
                predicted.d_exponent,
                predicted.eps_exponent,
                predicted.case.tag()
            ));
        }
    }

    let diagonal = s.diagonal();
    let weak = classify::weak_diagnostic(upper, &diagonal, c.threshold)?;
    weak_rows(&mut csv, "weak", &weak)?;
    let exact = classify::weak_diagnostic(
        |eps, d| Ok(model.n_exact(eps, d)?.n as f64),
        &diagonal,
        c.threshold,
    )?;
    weak_rows(&mut csv, "weak_exact", &exact)?;
    report.weak = Some(weak);

    let curse = classify::curse_diagnostic(upper, c.curse_eps, &s.curse_grid(), c.threshold)?;
    for (d, v) in &curse.points {
        csv.row(&["curse".into(), fmt_f64(curse.eps0), d.to_string(), fmt_f64(*v), fmt_f64(v.ln())])?;
    }
    report.curse = Some(curse);

    if let Some(cw) = &c.condweak {
        let kappa = |d: u32| cw.kappa_scale * f64::from(d).powf(cw.kappa_power);
        let w = classify::condweak_diagnostic(&cost, cw.p, kappa, &diagonal, c.threshold)?;
        weak_rows(&mut csv, "condweak", &w)?;
        report.condweak = Some(w);
    }
    csv.finish()?;

    lines.extend(report.summary_lines());
    lines.push(format!("exact information: {}", exact.summary()));
    Ok(lines)
}

fn simulate(ctx: &Ctx) -> Result<Vec<String>, TaskError> {
    let sim = ctx.scenario.simulate.as_ref().ok_or_else(|| TaskError::Check("missing [simulate]".into()))?;
    let seed = ctx.seed.ok_or_else(|| TaskError::Check("a seed is required".into()))?;
    let f = sim.f.clone().unwrap_or_else(|| {
        let mut f = vec![0.0; sim.lambda.len()];
        f[0] = 1.0;
        f
    });
    let r = simulate_wa(&sim.lambda, &sim.sigma, &f, sim.samples, seed)?;
    let mut csv = Csv::create(ctx.dir, Task::Simulate, ctx.hash, &["predicted_mse", "empirical_mse", "std_error", "samples", "seed"])?;
    csv.row(&[
        fmt_f64(r.predicted_mse),
        fmt_f64(r.empirical_mse),
        fmt_f64(r.std_error),
        r.samples.to_string(),
        r.seed.to_string(),
    ])?;
    csv.finish()?;
    let z = (r.empirical_mse - r.predicted_mse) / r.std_error;
    Ok(vec![format!(
        "predicted {}, empirical {} (std error {}, {z:.2} standard errors), seed {}",
        r.predicted_mse, r.empirical_mse, r.std_error, r.seed
    )])
}
