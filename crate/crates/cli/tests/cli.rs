use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noisy_ibc::classify::{weak_diagnostic, WeakVerdict};
use noisy_ibc::gaussian::comp_upper_wa;
use noisy_ibc_cli::config::Scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noisy-ibc"))
}

fn scenarios() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

fn run(config: &Path, out: &Path) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

/// Data rows of a CSV, after the hash comment and the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config-sha256: "));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn shipped_scenarios_validate() {
    let all = scenarios();
    assert_eq!(all.len(), 7);
    for path in all {
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn exact_cost_bounds_collapse_to_n_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "noise = \"bounded\"\ntasks = [\"complexity\"]\n[spectrum]\nkind = \"polynomial\"\nscale = 1.0\ndecay = 2.0\n[cost]\nkind = \"exact\"\n",
    );
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out).status.success());
    let model = noisy_ibc::spectra::SpectrumModel::polynomial(1.0, 2.0).unwrap();
    let table = rows(&out.join("complexity.csv"));
    assert_eq!(table.len(), 91);
    for r in table {
        let d: u32 = r[0].parse().unwrap();
        let eps: f64 = r[1].parse().unwrap();
        let n = model.n_exact(eps, d).unwrap().n as f64;
        assert_eq!(r[2].parse::<f64>().unwrap(), n, "{r:?}");
        assert_eq!(r[3].parse::<f64>().unwrap(), n, "{r:?}");
    }
}

#[test]
fn rotate_and_design_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
noise = "gaussian"
tasks = ["rotate", "design"]
[rotate]
s = [8.0]
eps = [0.01]
[design]
lambda = [4.0, 1.0]
sigma_inv2 = [2.0, 1.0]
"#,
    );
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out).status.success());
    let rot = rows(&out.join("rotate.csv"));
    assert_eq!(rot.len(), 1);
    assert_eq!(rot[0][2], "4");
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("coordinate design optimal: true, radius 1.7320508"), "{summary}");
    let w = fs::read_to_string(out.join("design_w.txt")).unwrap();
    assert!(w.contains("# rotations: 0"), "{w}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = bin().arg("validate").arg(tmp.path().join("nope.toml")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad = write_config(tmp.path(), "noise = \"bounded\"\ntasks = [\"rotate\"]\nrotations = 3\n");
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rotations") && err.contains("line 3"), "{err}");

    let usage = bin().arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn failed_task_keeps_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
noise = "gaussian"
tasks = ["rotate", "simulate"]
seed = 1
[rotate]
s = [2.0]
eps = [0.1]
[simulate]
lambda = [1.0, 0.5]
sigma = [-0.1]
"#,
    );
    let out = tmp.path().join("out");
    let res = run(&cfg, &out);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(rows(&out.join("rotate.csv")).len(), 1);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("[simulate] FAILED"), "{summary}");
    assert!(summary.contains("[rotate] s=2"), "{summary}");
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "noise = \"gaussian\"\ntasks = [\"simulate\"]\nseed = 1\n[simulate]\nlambda = [1.0, 0.5]\nsigma = [0.3]\nsamples = 2000\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&cfg, &a).status.success());
    let st = bin().arg("run").arg(&cfg).arg("--out").arg(&b).arg("--seed").arg("2").output().unwrap();
    assert!(st.status.success());
    let ra = rows(&a.join("simulate.csv"));
    let rb = rows(&b.join("simulate.csv"));
    assert_eq!(ra[0][4], "1");
    assert_eq!(rb[0][4], "2");
    assert_ne!(ra[0][1], rb[0][1]);
}

#[test]
fn gaussian_and_exact_weak_verdicts_agree_on_scenarios() {
    for path in scenarios() {
        let sc = Scenario::from_toml_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let (Ok(model), Ok(cost)) = (sc.spectrum_model(), sc.cost_model()) else {
            continue;
        };
        let cfg = sc.wa_config().unwrap();
        let diag = sc.diagonal();
        let exact = weak_diagnostic(|e, d| Ok(model.n_exact(e, d)?.n as f64), &diag, sc.classify.threshold).unwrap();
        let noisy = weak_diagnostic(
            |e, d| Ok(comp_upper_wa(&model.at(d)?, e, &cost, &cfg)?.value),
            &diag,
            sc.classify.threshold,
        )
        .unwrap();
        assert_eq!(exact.verdict, noisy.verdict, "{}", path.display());
        assert_eq!(exact.verdict, WeakVerdict::ConsistentWithWeak, "{}", path.display());
    }
}
