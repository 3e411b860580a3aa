use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn jacobi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jacobi")).args(args).env_remove("JACOBI_BITS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn classify_reports() {
    let o = jacobi(&["--cmd", "classify", "--model", "n-squared"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("SubCritical, deficiency (1,1)"), "{s}");
    assert!(s.contains("status: OK"));

    let o = jacobi(&["--cmd", "classify", "--model", "parity"]);
    assert!(stdout(&o).contains("warning: l1 hypothesis violated"), "{}", stdout(&o));

    let o = jacobi(&["--cmd", "classify", "--model", "geometric-beta-plus"]);
    assert!(stdout(&o).contains("SuperCritical, essentially self-adjoint"));
}

#[test]
fn unsupported_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("critical.toml");
    std::fs::write(
        &model,
        "schema = 1\nname = \"critical\"\n[a]\nfamily = \"power\"\ngamma = 1.0\np = 2.0\n[b]\nfamily = \"const_beta\"\nbeta = -1.0\n",
    )
    .unwrap();
    for cmd in ["classify", "jost", "eig"] {
        let o = jacobi(&["--cmd", cmd, "--model", model.to_str().unwrap(), "--grid", "0:1:0.5"]);
        assert_eq!(o.status.code(), Some(4), "{cmd}");
        let s = stdout(&o);
        assert!(s.contains("|beta_inf| = 1") && s.contains("status: REFUSED"), "{s}");
    }
    let o = jacobi(&["--cmd", "eig", "--model", "n-squared", "--grid", "0:1:0.5"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schema = 1\ncommand = \"jost\"\nmodel = \"n-squared\"\nnn = 3\n").unwrap();
    let o = jacobi(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("line 4") && e.contains("nn"), "{e}");

    for args in [
        &["--cmd", "jost", "--model", "nope"][..],
        &["--cmd", "jost", "--model", "n-squared", "--z", "1+"],
        &["--cmd", "jost", "--model", "n-squared", "--n", "-4"],
        &["--cmd", "teleport", "--model", "n-squared"],
        &["--cmd", "eig", "--model", "geometric-beta-minus"],
        &["--cmd", "eig", "--model", "geometric-beta-minus", "--grid", "3:1:0.1"],
        &["--cmd", "mass", "--model", "geometric-beta-minus", "--z", "1+1i"],
        &["--model", "n-squared"],
        &["--cmd", "jost", "--model", "n-squared", "--tol", "0"],
        &["--cmd", "jost", "--model", "n-squared", "--frobnicate"],
    ] {
        let o = jacobi(args);
        assert_eq!(o.status.code(), Some(3), "{args:?}: {}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_jacobi"))
        .args(["--cmd", "jost", "--model", "n-squared"])
        .env("JACOBI_BITS", "-8")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`bits` must be positive"));
}

#[test]
fn convergence_failure_exit() {
    let o = jacobi(&["--cmd", "jost", "--model", "n-squared", "--n", "10", "--n-trunc", "100", "--tol", "1e-12"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("not converged"));
    let o = jacobi(&["--cmd", "mass", "--model", "geometric-beta-minus", "--z", "2.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("[FAIL] mass formulas agree at 2.1"));
}

#[test]
fn eig_json_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eig");
    let o = jacobi(&[
        "--cmd",
        "eig",
        "--model",
        "geometric-beta-minus",
        "--grid",
        "-2:20:0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = read_json(&out.join("eig.json"));
    assert_eq!(v["model_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["interval"], serde_json::json!([-2.0, 20.0]));
    let eigs: Vec<f64> = v["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(eigs.len(), 5);
    assert!((eigs[0] - 0.735146135802).abs() < 1e-9);
    assert_eq!(v["masses"]["series"].as_array().unwrap().len(), 5);
    assert_eq!(v["masses"]["jost"].as_array().unwrap().len(), 5);
    assert_eq!(v["oracle"]["N"], 80);
    for (g, l) in v["oracle"]["gaps"].as_array().unwrap().iter().zip(&eigs) {
        assert!(g.as_f64().unwrap() <= 1e-6 * l.abs().max(1.0));
    }
    assert_eq!(v["verdict"], "EssentiallySelfAdjoint");
    assert_eq!(v["status"], "OK");
    let csv = std::fs::read_to_string(out.join("eig.csv")).unwrap();
    assert!(csv.starts_with("k,lambda,mass_series,mass_jost,oracle_gap\n"));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(report, stdout(&o));
}

#[test]
fn identity_two_sided() {
    let o = jacobi(&["--cmd", "identity", "--model", "n-squared", "--z", "i"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("kappa(zbar)^2 - kappa(z)^2 ="), "{s}");
    assert!(s.contains("[pass] identity relative gap at z = 0+1i"));
    assert!(s.contains("[pass] kappa ordering at z = 0+1i"));
}

#[test]
fn deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, args: &[&str]| {
        let out = dir.path().join(name);
        let mut a = args.to_vec();
        let p = out.to_str().unwrap().to_string();
        a.extend(["--out", &p]);
        assert_eq!(jacobi(&a).status.code(), Some(0));
        out
    };
    for (cmd, extra) in [
        ("jost", &["--model", "n-squared", "--z", "1+1i,-0.5-2i", "--n", "40"][..]),
        ("carleman-density", &["--model", "hermite", "--grid", "-1:1:0.25", "--n-trunc", "4096"]),
    ] {
        let mut args = vec!["--cmd", cmd];
        args.extend(extra);
        let a = run(&format!("{cmd}-a"), &args);
        let b = run(&format!("{cmd}-b"), &args);
        for f in [format!("{cmd}.json"), format!("{cmd}.csv"), "report.txt".into()] {
            assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn csv_round_trips_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("jost");
    let o = jacobi(&["--cmd", "jost", "--model", "geometric-beta-minus", "--z", "0.3+0.7i", "--n", "30", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = read_json(&out.join("jost.json"));
    let f = v["points"][0]["f_ln_abs_arg"].as_array().unwrap();
    let mut rdr = csv::Reader::from_path(out.join("jost.csv")).unwrap();
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.unwrap();
        let ln_abs: f64 = rec[3].parse().unwrap();
        let arg: f64 = rec[4].parse().unwrap();
        // f_{-1} leads the JSON array; the table starts at n = 0.
        assert_eq!(ln_abs.to_bits(), f[k + 1][0].as_f64().unwrap().to_bits());
        assert_eq!(arg.to_bits(), f[k + 1][1].as_f64().unwrap().to_bits());
        rows += 1;
    }
    assert_eq!(rows, 32);
    assert_eq!(v["points"][0]["index_range"], serde_json::json!([-1, 31]));
}

#[test]
fn config_document_with_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cube.toml"),
        "schema = 1\nname = \"cube\"\n[a]\nfamily = \"power\"\ngamma = 1.0\np = 3.0\nshift = 1.0\n",
    )
    .unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "schema = 1\ncommand = \"poly\"\nmodel = \"cube.toml\"\nz = [\"2-1i\", \"0.5\"]\nn = 60\n[output]\ndir = \"artifacts\"\n",
    )
    .unwrap();
    let o = jacobi(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let v = read_json(&dir.path().join("artifacts/poly.json"));
    assert_eq!(v["model"], "cube");
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
    let o = jacobi(&["--config", cfg.to_str().unwrap(), "--cmd", "classify"]);
    assert!(stdout(&o).contains("SubCritical, deficiency (1,1)"));
}

#[test]
fn carleman_commands() {
    let o = jacobi(&["--cmd", "asym", "--model", "hermite", "--z", "0.3", "--n", "1024"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("|Omega(0.3)|"));
    let o = jacobi(&["--cmd", "carleman-density", "--model", "carleman-super"]);
    assert_eq!(o.status.code(), Some(4));
}
