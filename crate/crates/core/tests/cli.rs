use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn engulf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_engulf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn check_verdict_fields_and_exit_codes() {
    let pass = engulf(&["check", "--builtin", "quartic", "--K", "3.74", "--samples", "500"]);
    assert_eq!(pass.status.code(), Some(0));
    let v = json(&pass);
    for key in ["mode", "K", "verdict", "witness", "samples_used", "seed", "diverging"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["verdict"], "pass");
    assert!(v["witness"].is_null());

    let fail = engulf(&["check", "--builtin", "abs", "--K", "100", "--seed", "4"]);
    assert_eq!(fail.status.code(), Some(1));
    let v = json(&fail);
    assert_eq!(v["verdict"], "fail");
    assert_eq!(v["seed"], 4);
    assert!(v["witness"]["back_gap"].as_f64().unwrap() >= 100.0 * v["witness"]["t"].as_f64().unwrap());
}

#[test]
fn equivalence_mode_reports_divergence() {
    let out = engulf(&["check", "--builtin", "exp", "--mode", "equiv", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["mode"], "equiv");
    assert_eq!(v["diverging"], true);

    let out = engulf(&["check", "--builtin", "quad", "--mode", "equiv", "--samples", "500"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["diverging"], false);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["check", "--builtin", "quad"],
        vec!["check", "--builtin", "nope", "--K", "2"],
        vec!["check", "--fn", "-1*x^2", "--K", "2"],
        vec!["check", "--fn", "exp(x)+", "--K", "2"],
        vec!["check", "--builtin", "quad", "--K", "0.5"],
        vec!["check", "--builtin", "quad", "--K", "2", "--tmin", "5", "--tmax", "1"],
        vec!["ratio", "--builtin", "quad", "--x", "1", "--y", "1"],
        vec!["frobnicate"],
    ] {
        let out = engulf(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn parsed_functions_work_end_to_end() {
    let out = engulf(&["estimate-k", "--fn", "x1^2 + x2^2", "--pairs", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let k = json(&out)["K"].as_f64().unwrap();
    assert!((k - 1.0).abs() < 1e-9, "{k}");

    let out = engulf(&["ratio", "--fn", "exp(x)", "--x", "0", "--y", "10", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("label,y1,ratio,k_min\n"));
    assert!(text.contains(",9.0045"));
}

#[test]
fn section_outputs() {
    let out = engulf(&["section", "--builtin", "affine", "--x0", "0", "--t", "1"]);
    let v = json(&out);
    assert_eq!(v["rows"][0]["values"], serde_json::json!(["-inf", "inf"]));
    assert!(v["verdicts"]["unbounded"].as_str().unwrap().contains("cap-classified"));

    let out = engulf(&["section", "--builtin", "strip2d", "--x0", "0,0", "--t", "1", "--directions", "4", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "label,d1,d2,radius,b1,b2");
    assert_eq!(lines.len(), 5);
    assert!(lines[2].contains(",inf,"));
}

fn write_and_plot(dir: &Path, report_args: &[&str], kind: &str) -> Vec<u8> {
    let json_path = dir.join("r.json");
    let svg_path = dir.join("r.svg");
    let mut args = report_args.to_vec();
    args.extend(["--out", json_path.to_str().unwrap()]);
    assert!(engulf(&args).status.success());
    let out = engulf(&[
        "plot",
        "--input",
        json_path.to_str().unwrap(),
        "--kind",
        kind,
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    std::fs::read(svg_path).unwrap()
}

#[test]
fn plots_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let section = ["section", "--builtin", "strip2d", "--x0", "0,0", "--t", "1"];
    let a = write_and_plot(dir.path(), &section, "section-boundary");
    let b = write_and_plot(dir.path(), &section, "section-boundary");
    assert_eq!(a, b);
    let svg = String::from_utf8(a).unwrap();
    // the two lines x = ±1 are separate polylines
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(r#"width="800""#) && svg.contains(r#"height="600""#));

    let a = write_and_plot(dir.path(), &["example-2-1"], "ratio-curve");
    let b = write_and_plot(dir.path(), &["example-2-1"], "ratio-curve");
    assert_eq!(a, b);
}

#[test]
fn report_and_experiment_json_is_deterministic() {
    for args in [
        vec!["report", "--samples", "300", "--seed", "2"],
        vec!["exp-family", "--hs", "1,5,10"],
        vec!["example-2-1", "--k", "2.5", "--format", "csv"],
    ] {
        let (a, b) = (engulf(&args), engulf(&args));
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let serial = engulf(&["check", "--builtin", "ex21", "--K", "8", "--serial"]);
    let parallel = engulf(&["check", "--builtin", "ex21", "--K", "8"]);
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn catalog_report_rows() {
    let out = engulf(&["report", "--samples", "500"]);
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    let row = |label: &str| rows.iter().find(|r| r["label"] == label).unwrap().clone();
    assert_eq!(row("affine")["tags"]["sections"], "all sections unbounded");
    assert_eq!(row("affine")["tags"]["conclusion"], "engulfing for every K");
    assert_eq!(row("abs")["values"][0], "inf");
    assert_eq!(row("abs")["tags"]["soft"], "fail");
    assert_eq!(row("quad")["values"][0], row("strip2d")["values"][0]);
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 16);
}
