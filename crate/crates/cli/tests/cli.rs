use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_vlhardy");

const SMALL: &str = "\
theorem = hardy_thm1
seed = 3

[exponents]
p = 2
q = 2

[weights]
u.kind = power
u.beta = -2
u.gamma = -2

[window]
eps = 1e-2
X = 1e2

[search]
s_grid = 3
resolution = 12
";

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn verify_passes_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let (code, err) = run(&[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let ra = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("report.json")).unwrap());
    let r = report(&a);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["verdict"], "PASS");
    assert!(r["norm_estimate"]["value"].as_f64().unwrap() > 0.0);
    assert!(a.join("timings.json").exists());
}

#[test]
fn corrupted_upper_bound_fails_containment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("o");
    let (code, _) = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--corrupt-upper",
    ]);
    assert_eq!(code, 1);
    let r = report(&out);
    assert_eq!(r["verdict"], "FAIL");
    let failed: Vec<&Value> = r["failures"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["name"] == "containment")
        .collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn zero_weight_passes_vacuously() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("u.kind = power", "u.kind = zero");
    let cfg = write_config(tmp.path(), "zero.toml", &text);
    let out = tmp.path().join("o");
    let (code, err) = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let r = report(&out);
    assert_eq!(r["verdict"], "PASS");
    assert_eq!(r["sandwich"]["lower_bound"], 0.0);
    assert_eq!(r["sandwich"]["upper_bound"], 0.0);
    assert_eq!(r["norm_estimate"]["value"], 0.0);

    let out = tmp.path().join("c");
    let (code, _) = run(&[
        "characterize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let values = report(&out)["characterize"]["values"].as_array().unwrap().clone();
    assert_eq!(values.len(), 9);
    assert!(values.iter().all(|v| v["value"]["value"] == 0.0));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["verify", "--config", "/nonexistent/file", "--out", o]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);

    let cfg = write_config(tmp.path(), "p1.toml", &SMALL.replace("p = 2\n", "p = 1\n"));
    let (code, err) = run(&["sandwich", "--config", cfg.to_str().unwrap(), "--out", o]);
    assert_eq!(code, 2);
    assert!(err.contains("p must exceed 1"), "{err}");

    let cfg = write_config(
        tmp.path(),
        "v.toml",
        &format!("{SMALL}\n[weights]\nv1.kind = power\nv1.alpha = 1\n"),
    );
    let (code, err) = run(&["sandwich", "--config", cfg.to_str().unwrap(), "--out", o]);
    assert_eq!(code, 2);
    assert!(err.contains("v1 not integrable at 0 for p=2"), "{err}");

    let cfg = write_config(tmp.path(), "bad.toml", "exponents.p = 2\nnonsense.key = 1\n");
    let (code, err) = run(&["sandwich", "--config", cfg.to_str().unwrap(), "--out", o]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");

    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    assert_eq!(
        run(&[
            "sandwich",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            o,
            "--window",
            "0.1"
        ])
        .0,
        2
    );
    assert_eq!(
        run(&["sandwich", "--config", cfg.to_str().unwrap(), "--out", o, "--jobs", "0"]).0,
        2
    );
}

#[test]
fn lemma_sandwich_reports_unit_multiplier() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("hardy_thm1", "lemma3") + "\n[rect]\nc1 = 0.5\nd1 = 2\nc2 = 0.5\nd2 = 2\n";
    let cfg = write_config(tmp.path(), "lemma.toml", &text);
    let out = tmp.path().join("o");
    let (code, err) = run(&[
        "sandwich",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let s = &report(&out)["sandwich"];
    assert_eq!(s["multiplier"], 1.0);
    assert!(s["lower_bound"].as_f64().unwrap() <= s["upper_bound"].as_f64().unwrap());
}

#[test]
fn sweep_writes_one_report_per_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[sweep]\nparam = weights.u.beta\nvalues = -2.5, -2, -1.5\n");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, jobs) in [(&a, "2"), (&b, "1")] {
        let (code, err) = run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(code, 0, "{err}");
    }
    for k in 0..3 {
        assert!(a.join(format!("sample_{k:03}.json")).exists());
    }
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("sweep.csv")).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,value,lower,upper,norm_estimate,gap_ratio,verdict");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("weights.u.beta,-2.5,"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[sweep]\nparam = weights.u.beta\nfrom = -2\nto = -1\nsamples = 0\n");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let out = tmp.path().join("o");
    let (code, err) = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        fs::read_to_string(out.join("sweep.csv")).unwrap(),
        "param,value,lower,upper,norm_estimate,gap_ratio,verdict\n"
    );
}

#[test]
fn divergent_instance_reports_infinity() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("u.beta = -2", "u.beta = 1")
        .replace("u.gamma = -2", "u.gamma = 1")
        .replace("s_grid = 3", "s_grid = 1");
    let cfg = write_config(tmp.path(), "grow.toml", &text);
    let out = tmp.path().join("o");
    let (code, err) = run(&[
        "characterize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let raw = fs::read_to_string(out.join("report.json")).unwrap();
    let r: Value = serde_json::from_str(&raw).unwrap();
    let v = &r["characterize"]["values"][0]["value"];
    assert_eq!(v["value"], "+inf");
    assert!(v["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d.as_str().unwrap().contains("growth")));
}
