use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_campanato");

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn campanato(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Constants close to the calibrated ones, so that runs skip calibration.
fn pinned() -> Value {
    let beta = 0.94;
    json!({
        "c0": 16.97, "c1": 0.0734, "c2": 0.1165, "c1_quad": 0.0101, "c2_quad": 0.167,
        "alpha": beta / (2.0 + beta), "beta": beta
    })
}

fn write_scenario(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn close(a: &Value, b: &Value, path: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= 1e-12 + 1e-6 * x.abs().max(y.abs()) {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_for_each(|(i, (p, q))| close(p, q, &format!("{path}[{i}]"))),
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x.iter().try_for_each(|(k, p)| match y.get(k) {
            Some(q) => close(p, q, &format!("{path}.{k}")),
            None => Err(format!("{path}.{k} missing")),
        }),
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

#[test]
fn zero_case_is_certified_and_matches_the_golden_report() {
    let out = tempfile::tempdir().unwrap();
    let o = campanato(&["run", bundled("zero_case.json").to_str().unwrap()], out.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got: Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("zero_case.report.json")).unwrap()).unwrap();
    assert_eq!(got["verdict"], "C1_certified");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/zero_case.report.json");
    let want: Value = serde_json::from_str(&std::fs::read_to_string(golden).unwrap()).unwrap();
    close(&got, &want, "$").unwrap();

    let csv = std::fs::read_to_string(out.path().join("zero_case.trace.csv")).unwrap();
    assert!(csv.starts_with("# v=1 scenario=zero_case mode=c1 verdict=C1_certified"));
    assert_eq!(csv.lines().count(), 2 + 7);
}

#[test]
fn registry_errors_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_scenario(
        dir.path(),
        "good.json",
        &json!({"v": 1, "id": "good", "mode": "c1", "fields": {"manufactured": "paraboloid"},
                "iteration": {"constants": pinned(), "scales": 2}}),
    );
    let bad = write_scenario(
        dir.path(),
        "bad.json",
        &json!({"v": 1, "id": "bad", "mode": "c1",
                "fields": {"leading": "no_such_field", "drift": "zero", "nonlinearity": "const:0", "boundary": "zero"}}),
    );
    let out = dir.path().join("out");
    let o = campanato(&["run", good.to_str().unwrap(), bad.to_str().unwrap()], &out);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_field"));
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn config_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        json!({"v": 1, "id": "x", "mode": "c1", "fields": {"manufactured": "paraboloid"}, "bogus": 1}),
        json!({"v": 2, "id": "x", "mode": "c1", "fields": {"manufactured": "paraboloid"}}),
        json!({"v": 1, "id": "x", "mode": "c1", "fields": {"manufactured": "paraboloid"}, "iteration": {"lambda": 0.3}}),
        json!({"v": 1, "id": "x", "mode": "c2"}),
        json!({"v": 1, "id": "x", "mode": "c1", "fields": {"leading": "identity", "drift": "lq_spike:1.5",
               "nonlinearity": "const:0", "boundary": "zero"}}),
    ];
    for (i, c) in cases.iter().enumerate() {
        let p = write_scenario(dir.path(), &format!("s{i}.json"), c);
        let o = campanato(&["run", p.to_str().unwrap()], &out);
        assert_eq!(code(&o), 2, "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.exists());
    assert_eq!(code(&campanato(&["frobnicate"], &out)), 2);
}

fn fake_report(dir: &Path, id: &str, verdict: &str, v: u32) {
    let r = json!({
        "v": v, "scenario_id": id, "mode": "c1", "verdict": verdict, "reason": "", "seed": 0,
        "config": {}, "constants": null, "limits": null,
        "flags": {"worst_margin": 1.5}, "results": {"final_N": 1e-4}
    });
    std::fs::write(dir.join(format!("{id}.report.json")), r.to_string()).unwrap();
}

#[test]
fn report_sorts_by_verdict_then_id() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports");
    std::fs::create_dir(&reports).unwrap();
    for (id, v) in [("b", "failed"), ("a", "failed"), ("d", "C1_certified"), ("c", "inconclusive"), ("e", "C11_certified")] {
        fake_report(&reports, id, v, 1);
    }
    let out = dir.path().join("summary");
    let o = campanato(&["report", reports.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let order: Vec<&str> = text.lines().skip(1).take(5).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(order, ["d", "e", "c", "a", "b"]);
    assert!(text.contains("5 scenarios, 2 failed"));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    assert!(summary.lines().nth(1).unwrap().starts_with("d,c1,C1_certified,"));
    assert!(summary.starts_with("scenario,mode,verdict,final_N,S_K,worst_margin,reason"));

    let o = campanato(&["report", "--strict", reports.to_str().unwrap()], &out);
    assert_eq!(code(&o), 1);

    // inconclusive is not a pass under --strict either
    let mild = dir.path().join("mild");
    std::fs::create_dir(&mild).unwrap();
    fake_report(&mild, "p", "C1_certified", 1);
    fake_report(&mild, "q", "pass", 1);
    assert_eq!(code(&campanato(&["report", "--strict", mild.to_str().unwrap()], &out)), 0);
    fake_report(&mild, "r", "inconclusive", 1);
    assert_eq!(code(&campanato(&["report", "--strict", mild.to_str().unwrap()], &out)), 1);
}

#[test]
fn report_rejects_empty_input_and_schema_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("summary");
    assert_eq!(code(&campanato(&["report", dir.path().to_str().unwrap()], &out)), 2);
    fake_report(dir.path(), "old", "C1_certified", 2);
    let o = campanato(&["report", dir.path().to_str().unwrap()], &out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        dir.path(),
        "drift.json",
        &json!({"v": 1, "id": "drift", "mode": "c1", "fields": {"manufactured": "drift_linear"},
                "iteration": {"constants": pinned(), "scales": 4}}),
    );
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let o = campanato(&["run", "--threads", threads, p.to_str().unwrap()], &out);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        ["drift.trace.csv", "drift.report.json"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let first = run("a", "1");
    assert_eq!(first, run("b", "1"));
    assert_eq!(first, run("c", "2"));
}

#[test]
fn strict_mode_turns_failed_verdicts_into_exit_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        dir.path(),
        "nd.json",
        &json!({"v": 1, "id": "nd", "mode": "c11", "fields": {"manufactured": "loglog:0.05"},
                "iteration": {"constants": pinned(), "scales": 40}}),
    );
    let out = dir.path().join("out");
    assert_eq!(code(&campanato(&["run", p.to_str().unwrap()], &out)), 0);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out.join("nd.report.json")).unwrap()).unwrap();
    assert_eq!(r["verdict"], "failed");
    assert_eq!(code(&campanato(&["run", "--strict", p.to_str().unwrap()], &out)), 1);
}
