use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rfr_sabr::hagan::hagan_implied_vol;
use rfr_sabr::pricer::price_backward_caplet;
use rfr_sabr::{AccrualPeriod, CapletSpec, CapletStyle, DecayExponent, SabrParams};
use serde_json::{json, Value};

fn study() -> Value {
    json!({
        "model": { "alpha": 0.10, "beta": 1.0, "rho": -0.5, "nu": 0.5 },
        "period": { "tau0": 0.5, "tau1": 1.0 },
        "forward_rate": 0.05,
        "q": 1.0,
        "caplet": { "strike": 0.05, "style": "backward" },
        "mc": { "n_paths": 20000, "dt": 0.001953125, "seed": 11 }
    })
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    write(dir, "run.json", &cfg.to_string())
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfr-sabr"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a versioned CSV: the `#` header line is checked and skipped.
fn csv_rows(text: &str, kind: &str) -> Vec<csv::StringRecord> {
    let (first, body) = text.split_once('\n').unwrap();
    assert_eq!(first, format!("# rfr-sabr {kind} v1"));
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn price_reports_effective_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["price"], &write_config(dir.path(), &study()));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("alpha_hat         0.081712"), "{text}");
    assert!(text.contains("rho_hat           -0.502978"), "{text}");
    assert!(text.contains("nu_hat            0.410904"), "{text}");
}

#[test]
fn price_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("price.json");
    let cfg = write_config(dir.path(), &study());
    let out = Command::new(env!("CARGO_BIN_EXE_rfr-sabr"))
        .args(["price", "--out"])
        .arg(&out_file)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_file).unwrap()).unwrap();
    let pv = v["present_value"].as_f64().unwrap();
    assert!(pv > 0.0 && pv < 0.05);
}

#[test]
fn fixed_forward_caplet_has_no_vol() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study();
    cfg["period"] = json!({ "tau0": -0.25, "tau1": 0.25 });
    cfg["caplet"] = json!({ "strike": 0.04, "style": "forward" });
    let out = run(&["price"], &write_config(dir.path(), &cfg));
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("implied_vol       n/a"), "{text}");
    assert!(text.contains("present_value     0.01"), "{text}");
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study();
    cfg["model"]["alpha"] = json!(-0.1);
    cfg["colour"] = json!("blue");
    let out_file = dir.path().join("smile.csv");
    let config = write_config(dir.path(), &cfg);
    let out = Command::new(env!("CARGO_BIN_EXE_rfr-sabr"))
        .args(["smile", "--out"])
        .arg(&out_file)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_file.exists());
    let err: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);

    let out = run(&["price"], &write(dir.path(), "bad.json", "{ not json"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_domain_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study();
    cfg["period"] = json!({ "tau0": 1.0, "tau1": 0.5 });
    let out = run(&["effective-params"], &write_config(dir.path(), &cfg));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn effective_params_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["effective-params", "--oracle"],
        &write_config(dir.path(), &study()),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("quadrature check"), "{text}");
    assert!(text.contains("not started"), "{text}");
}

#[test]
fn smile_rows_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &study());
    let out = run(&["smile"], &config);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows = csv_rows(&text, "smile");
    assert_eq!(rows.len(), 11);
    let header = text.lines().nth(1).unwrap();
    assert_eq!(
        header,
        "strike,style,pv,implied_vol,alpha_hat,rho_hat,nu_hat"
    );
    for r in &rows {
        let k: f64 = r[0].parse().unwrap();
        let pv: f64 = r[2].parse().unwrap();
        let vol: f64 = r[3].parse().unwrap();
        assert!(k > 0.0 && pv >= 0.0 && vol > 0.0);
        assert!((r[4].parse::<f64>().unwrap() - 0.081_711_6).abs() < 1e-6);
    }

    let mut cfg = study();
    cfg["styles"] = json!(["backward", "forward"]);
    let out = run(&["smile"], &write_config(dir.path(), &cfg));
    let rows = csv_rows(&stdout(&out), "smile");
    assert_eq!(rows.len(), 22);
    let forward = rows.iter().find(|r| &r[1] == "forward").unwrap();
    assert!(forward[4].is_empty());

    let out = run(
        &["smile", "--curves", "all"],
        &write_config(dir.path(), &cfg),
    );
    assert!(out.status.success());
    assert!(csv_rows(&stdout(&out), "smile").len() > 22);
}

#[test]
fn simulate_is_deterministic_and_dumps_paths() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &study());
    let a = run(&["simulate", "--seed", "5"], &config);
    let b = run(&["simulate", "--seed", "5"], &config);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stderr(&a).contains("verdict="));
    let rows = csv_rows(&stdout(&a), "simulate");
    assert_eq!(rows.len(), 11);
    let c = run(&["simulate", "--seed", "6"], &config);
    assert_ne!(a.stdout, c.stdout);

    let dump = dir.path().join("paths.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_rfr-sabr"))
        .args(["simulate", "--paths", "1", "--dump-paths"])
        .arg(&dump)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&std::fs::read_to_string(&dump).unwrap(), "paths");
    assert_eq!(rows.len(), 513);
    assert!(rows.iter().all(|r| &r[0] == "0"));
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.05);
}

#[test]
fn simulate_rejects_odd_antithetic_path_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study();
    cfg["mc"]["antithetic"] = json!(true);
    cfg["mc"]["n_paths"] = json!(1001);
    let out = run(&["simulate"], &write_config(dir.path(), &cfg));
    assert_eq!(out.status.code(), Some(2));
}

fn calibration_quotes(truth: &SabrParams) -> String {
    let mut text = String::from("# synthetic\nstrike,style,quote_kind,value,weight\n");
    for k in [0.03, 0.04, 0.05, 0.06, 0.075] {
        let vol = hagan_implied_vol(0.5, k, 0.05, truth).unwrap();
        text.push_str(&format!("{k},forward,implied_vol,{vol:.17e},1\n"));
    }
    let spec = CapletSpec {
        strike: 0.05,
        style: CapletStyle::Backward,
        period: AccrualPeriod::new(0.5, 1.0).unwrap(),
        discount: 1.0,
        forward_rate: 0.05,
    };
    let pv = price_backward_caplet(&spec, truth, DecayExponent::new(1.0).unwrap())
        .unwrap()
        .present_value;
    text.push_str(&format!("0.05,backward,pv,{pv:.17e},1\n"));
    text
}

#[test]
fn calibrate_recovers_synthetic_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let truth = SabrParams::new(0.12, 1.0, -0.35, 0.6).unwrap();
    let mut cfg = study();
    cfg["model"] = json!({ "alpha": 0.1, "beta": 1.0, "rho": 0.0, "nu": 0.3 });
    let config = write_config(dir.path(), &cfg);
    let quotes = write(dir.path(), "quotes.csv", &calibration_quotes(&truth));
    let report = dir.path().join("fit.json");
    let out = Command::new(env!("CARGO_BIN_EXE_rfr-sabr"))
        .args(["calibrate", "--quotes"])
        .arg(&quotes)
        .arg("--out")
        .arg(&report)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let fit = &v["forward_fit"]["params"];
    assert!((fit["alpha"].as_f64().unwrap() / 0.12 - 1.0).abs() < 1e-6);
    assert!((fit["rho"].as_f64().unwrap() / -0.35 - 1.0).abs() < 1e-6);
    assert!((fit["nu"].as_f64().unwrap() / 0.6 - 1.0).abs() < 1e-6);
    assert!((v["q_fit"]["q"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn calibrate_reports_bad_quote_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &study());
    let text = "strike,style,quote_kind,value,weight\n0.05,forward,implied_vol,0.2,1\n0.04,forward,pv,0.06,1\n";
    let quotes = write(dir.path(), "quotes.csv", text);
    let out = Command::new(env!("CARGO_BIN_EXE_rfr-sabr"))
        .args(["calibrate", "--quotes"])
        .arg(&quotes)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn calibrate_unattainable_q_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &study());
    let text = "strike,style,quote_kind,value,weight\n0.05,backward,pv,1e-6,1\n";
    let quotes = write(dir.path(), "quotes.csv", text);
    let out = Command::new(env!("CARGO_BIN_EXE_rfr-sabr"))
        .args(["calibrate", "--quotes"])
        .arg(&quotes)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn hw_compare_linear_case_has_no_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = study();
    cfg["hw"] = json!({ "kappa": 0.0, "grid_points": 11 });
    let out = run(&["hw-compare"], &write_config(dir.path(), &cfg));
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&stdout(&out), "hw-compare");
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap().abs() < 1e-15);
    }

    let mut cfg = study();
    cfg["hw"] = json!({ "kappa": 3.0 });
    let out = run(&["hw-compare"], &write_config(dir.path(), &cfg));
    assert!(
        stderr(&out).contains("curvature psi=linear psi_tilde=convex"),
        "{}",
        stderr(&out)
    );
}
