use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invman"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_TOY: &str = r#"preset = "toy-pseudo-hyperbolic"
[grids]
xi_points = 11
k_max = 8
horizon = 16.0
[samples]
count = 300
"#;

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "good.toml", "preset = \"example2-poly\"\n");
    let o = run(&["verify", &good]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let halved = write(
        &dir,
        "halved.toml",
        "preset = \"example2-poly\"\n[bounds]\nscale = 0.5\n",
    );
    assert_eq!(code(&run(&["verify", &halved])), 1);
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&run(&["verify", missing.to_str().unwrap()])), 2);
    let typo = write(
        &dir,
        "typo.toml",
        "preset = \"example2-poly\"\n[grids]\nxi_pionts = 3\n",
    );
    let o = run(&["verify", &typo]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("xi_pionts"));
}

#[test]
fn sigma_tau_admissibility() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("st.json");
    let toy = write(&dir, "toy.toml", SMALL_TOY);
    assert_eq!(
        code(&run(&["sigma-tau", &toy, "--out", out.to_str().unwrap()])),
        0
    );
    let r = report(&out);
    assert_eq!(r["pass"], true);
    let m = r["constants"]["m"].as_f64().unwrap();
    assert!(m > 1.0 && m < 2.0);

    let big = write(
        &dir,
        "big.toml",
        &format!("{SMALL_TOY}[perturbation]\nkind = \"sine\"\nlip = {{ kind = \"geometric\", scale = 0.5, ratio = 0.5 }}\n"),
    );
    let o = run(&["sigma-tau", &big, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let r = report(&out);
    assert!(r["constants"].is_null());
    assert!(r["sigma_tau"]["sigma"].as_f64().unwrap() > 0.5);

    let zero = write(
        &dir,
        "zero.toml",
        &format!("{SMALL_TOY}[perturbation]\nkind = \"zero\"\n"),
    );
    assert_eq!(
        code(&run(&["sigma-tau", &zero, "--out", out.to_str().unwrap()])),
        0
    );
    let r = report(&out);
    assert_eq!(r["sigma_tau"]["sigma"].as_f64(), Some(0.0));
    assert_eq!(r["constants"]["m"].as_f64(), Some(1.0));
    assert_eq!(r["constants"]["n"].as_f64(), Some(0.0));
}

#[test]
fn solve_outputs_and_failures() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("solve.json");
    let phi = dir.path().join("phi.csv");
    let trace = dir.path().join("trace.csv");
    let zero = write(
        &dir,
        "zero.toml",
        &format!("{SMALL_TOY}[perturbation]\nkind = \"zero\"\n"),
    );
    let o = run(&[
        "solve",
        &zero,
        "--out",
        out.to_str().unwrap(),
        "--phi-csv",
        phi.to_str().unwrap(),
        "--trace-csv",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&phi).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("fiber_index,xi_1,phi_1,phi_2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9 * 11);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(f[3].parse::<f64>().unwrap(), 0.0);
    }
    assert!(std::fs::read_to_string(&trace)
        .unwrap()
        .starts_with("iteration,d1,d2,d,ratio,clamps\n"));

    let toy = write(&dir, "toy.toml", SMALL_TOY);
    assert_eq!(code(&run(&["solve", &toy, "--out", out.to_str().unwrap()])), 0);
    let r = report(&out);
    assert_eq!(r["invariance"]["pass"], true);
    assert_eq!(r["growth"]["pass"], true);

    let early = write(
        &dir,
        "early.toml",
        &format!("{SMALL_TOY}[tolerances]\nmax_iters = 1\nstop = 1e-14\n"),
    );
    assert_eq!(code(&run(&["solve", &early, "--out", out.to_str().unwrap()])), 1);
    let r = report(&out);
    assert_eq!(r["solve"]["converged"], false);
    assert_eq!(r["solve"]["iterations"], 1);
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "preset = \"corollaries\"\n");
    assert_eq!(code(&run(&["check", &cfg, "c42"])), 0);
    let bad = write(
        &dir,
        "bad.toml",
        "preset = \"corollaries\"\n[corollary.c42]\ndelta = 0.3\n",
    );
    let out = dir.path().join("c.json");
    assert_eq!(
        code(&run(&["check", &bad, "c42", "--out", out.to_str().unwrap()])),
        1
    );
    let r = report(&out);
    let hyps = r["report"]["hypotheses"].as_array().unwrap();
    let delta = hyps
        .iter()
        .find(|h| h["name"] == "delta_in_open_quarter")
        .unwrap();
    assert_eq!(delta["pass"], false);
    assert_eq!(code(&run(&["check", &cfg, "c99"])), 2);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&run(&["reproduce", "no-such-preset"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&[])), 2);
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let toy = write(&dir, "toy.toml", &format!("threads = 3\n{SMALL_TOY}"));
    let seq = write(&dir, "seq.toml", &format!("threads = 1\n{SMALL_TOY}"));
    let a = run(&["solve", &toy]);
    let b = run(&["solve", &toy]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["solve", &seq]);
    let strip = |o: &Output| {
        String::from_utf8_lossy(&o.stdout)
            .replace("\"threads\": 3", "")
            .replace("\"threads\": 1", "")
    };
    assert_eq!(strip(&a), strip(&c));
}
