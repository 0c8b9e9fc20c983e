use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::scenario::{Resolved, Scenario, ScenarioMode, Source};
use crate::campanato::{
    calibrate_constants, certificate, probe, trace_csv, worst_margin, Constants, IterationTrace, Mode, Solution,
};
use crate::elliptic::{dmp_suite, validate_solver, validation_problem, AssembleOptions, DiskGrid};
use crate::error::{Error, Result};
use crate::modulus::{modulus_suite, DiniClass};
use crate::semilinear::picard_solve;

pub const REPORT_VERSION: u32 = 1;

/// Smallest slope of the approximation gap against the perturbation size
/// that counts as a positive exponent.
pub const MIN_SWEEP_SLOPE: f64 = 0.15;

/// Contents of `<id>.report.json`. Non-finite numbers are written as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub v: u32,
    pub scenario_id: String,
    pub mode: ScenarioMode,
    /// `C1_certified`, `C11_certified`, `inconclusive` or `failed` for probes;
    /// `pass` or `fail` otherwise.
    pub verdict: String,
    pub reason: String,
    pub seed: u64,
    pub config: Value,
    pub constants: Option<Constants>,
    pub limits: Value,
    pub flags: Value,
    pub results: Value,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        matches!(self.verdict.as_str(), "failed" | "fail")
    }

    /// Certified or passing; anything else makes `--strict` exit with 1.
    pub fn ok(&self) -> bool {
        matches!(self.verdict.as_str(), "C1_certified" | "C11_certified" | "pass")
    }
}

/// A finished scenario: its report and the files to write.
pub struct Outcome {
    pub report: RunReport,
    /// `(file name, contents)`.
    pub artifacts: Vec<(String, String)>,
}

pub fn report_name(id: &str) -> String {
    format!("{id}.report.json")
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn config_value(s: &Scenario) -> Value {
    let keep: &[&str] = match s.mode {
        ScenarioMode::C1 | ScenarioMode::C11 => &["fields", "grid", "solver", "picard", "iteration"],
        ScenarioMode::Lemma25Sweep => &["calibration"],
        ScenarioMode::SolverValidation => &["solver", "validation"],
        ScenarioMode::ModulusCheck => &["modulus"],
    };
    let mut v = serde_json::to_value(s).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.retain(|k, _| keep.contains(&k.as_str()));
    }
    v
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let schema = |e: csv::Error| Error::Schema(e.to_string());
    w.write_record(header).map_err(schema)?;
    for r in rows {
        w.write_record(&r).map_err(schema)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}

/// Runs a validated scenario.
pub fn execute(s: &Scenario, resolved: Option<Resolved>) -> Result<Outcome> {
    match (s.mode.probe_mode(), resolved) {
        (Some(mode), Some(r)) => run_probe(s, mode, r),
        (Some(_), None) => Err(Error::config("fields", "probe scenario was not resolved")),
        (None, _) => match s.mode {
            ScenarioMode::Lemma25Sweep => run_sweep(s),
            ScenarioMode::SolverValidation => run_validation(s),
            _ => run_modulus(s),
        },
    }
}

fn limits(trace: &IterationTrace) -> Value {
    let l = &trace.limit;
    match trace.mode {
        Mode::C1 => json!({ "A": l.e, "B": l.f }),
        Mode::C11 => json!({ "E": l.e, "F": l.f, "G": l.g }),
    }
}

fn run_probe(s: &Scenario, mode: Mode, r: Resolved) -> Result<Outcome> {
    let mut picard = Value::Null;
    let solution = match r.solution {
        Source::Closed(u) => u,
        Source::Numeric(g) => {
            let grid = Arc::new(DiskGrid::new([0.0, 0.0], 1.0, s.grid.spacing)?);
            let res = picard_solve(&r.spec, grid, g, &s.picard, &s.solver, AssembleOptions::default())?;
            picard = json!({
                "steps": res.steps,
                "damping": res.damping,
                "contraction_ratio": res.contraction_ratio().and_then(finite),
                "final_update": res.history.last().copied().and_then(finite),
            });
            Solution::Field(res.u)
        }
    };
    let trace = probe(mode, &r.spec, &solution, &s.iteration)?;
    let cert = certificate(&trace, &s.iteration);
    let checks: Vec<bool> = trace.records.iter().filter_map(|r| r.recurrence_ok).collect();
    let ok_rate = if checks.is_empty() {
        None
    } else {
        Some(checks.iter().filter(|b| **b).count() as f64 / checks.len() as f64)
    };
    let sm = &trace.smallness;
    let flags = json!({
        "truncated": trace.truncated,
        "lambda_small": sm.lambda_small,
        "data_small": sm.data_small,
        "drift_small": sm.drift_small,
        "recurrence_checks": checks.len(),
        "recurrence_ok_rate": ok_rate,
        "worst_margin": finite(worst_margin(&trace)),
        "tail_ratio": finite(cert.tail_ratio),
    });
    let results = json!({
        "scales": trace.records.len(),
        "limit_index": trace.limit_index,
        "M": trace.m(),
        "N": cert.n,
        "final_N": cert.n.last().copied(),
        "S_K": trace.records.last().map(|r| r.s),
        "certificate_tolerance": cert.tolerance,
        "u0": trace.u0,
        "smallness": sm,
        "picard": picard,
    });
    let report = RunReport {
        v: REPORT_VERSION,
        scenario_id: s.id.clone(),
        mode: s.mode,
        verdict: cert.verdict.as_str().into(),
        reason: cert.reason.clone(),
        seed: s.seed,
        config: config_value(s),
        constants: Some(trace.constants.clone()),
        limits: limits(&trace),
        flags,
        results,
    };
    let csv = trace_csv(&s.id, &trace, &cert)?;
    Ok(Outcome {
        report,
        artifacts: vec![(format!("{}.trace.csv", s.id), csv)],
    })
}

fn pass_fail(pass: bool) -> String {
    if pass { "pass" } else { "fail" }.into()
}

fn run_sweep(s: &Scenario) -> Result<Outcome> {
    let cal = calibrate_constants(&s.calibration)?;
    let c = &cal.constants;
    let sw = &cal.sweep;
    let alpha_ok = c.alpha > 0.0 && c.alpha <= 1.0 / 3.0;
    let pass = alpha_ok && sw.slope >= MIN_SWEEP_SLOPE && sw.holdout_slope >= MIN_SWEEP_SLOPE;
    let reason = format!(
        "slope {:.3}, holdout slope {:.3}, α = {:.3}",
        sw.slope, sw.holdout_slope, c.alpha
    );
    let csv = csv_string(
        &["eps_sum", "ratio"],
        sw.eps_sum.iter().zip(&sw.ratio).map(|(e, r)| vec![e.to_string(), r.to_string()]),
    )?;
    let report = RunReport {
        v: REPORT_VERSION,
        scenario_id: s.id.clone(),
        mode: s.mode,
        verdict: pass_fail(pass),
        reason,
        seed: s.seed,
        config: config_value(s),
        constants: Some(c.clone()),
        limits: Value::Null,
        flags: json!({ "alpha_in_range": alpha_ok, "min_slope": MIN_SWEEP_SLOPE }),
        results: json!({
            "slope": sw.slope,
            "holdout_slope": sw.holdout_slope,
            "harmonic_dh0": cal.harmonic_dh0,
            "experiments": cal.experiments.len(),
        }),
    };
    Ok(Outcome {
        report,
        artifacts: vec![(format!("{}.sweep.csv", s.id), csv)],
    })
}

fn run_validation(s: &Scenario) -> Result<Outcome> {
    let v = &s.validation;
    let orders = v
        .problems
        .iter()
        .map(|id| validate_solver(&validation_problem(id)?, &v.spacings, v.order_tol, &s.solver))
        .collect::<Result<Vec<_>>>()?;
    let dmp = dmp_suite(v.dmp_operators, v.dmp_max_kappa, s.seed, v.dmp_spacings, &s.solver)?;
    let orders_ok = orders.iter().all(|o| o.pass);
    let pass = orders_ok && dmp.pass;
    let failing: Vec<&str> = orders.iter().filter(|o| !o.pass).map(|o| o.id.as_str()).collect();
    let reason = format!(
        "{} of {} problems at order 2 ± {}; {} of {} operators pass the maximum principle and ABP checks{}",
        orders.len() - failing.len(),
        orders.len(),
        v.order_tol,
        dmp.cases.iter().filter(|c| c.dmp_ok && c.c_stable).count(),
        dmp.cases.len(),
        if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) }
    );
    let csv = csv_string(
        &["problem", "h", "error"],
        orders.iter().flat_map(|o| {
            o.order
                .spacings
                .iter()
                .zip(&o.order.errors)
                .map(|(h, e)| vec![o.id.clone(), h.to_string(), e.to_string()])
                .collect::<Vec<_>>()
        }),
    )?;
    let report = RunReport {
        v: REPORT_VERSION,
        scenario_id: s.id.clone(),
        mode: s.mode,
        verdict: pass_fail(pass),
        reason,
        seed: s.seed,
        config: config_value(s),
        constants: None,
        limits: Value::Null,
        flags: json!({ "orders_ok": orders_ok, "dmp_ok": dmp.pass }),
        results: json!({
            "orders": orders.iter().map(|o| json!({
                "problem": o.id,
                "order": o.order.order,
                "max_error": o.order.errors.iter().cloned().fold(0.0, f64::max),
                "pass": o.pass,
            })).collect::<Vec<_>>(),
            "dmp": dmp.cases,
        }),
    };
    Ok(Outcome {
        report,
        artifacts: vec![(format!("{}.orders.csv", s.id), csv)],
    })
}

fn run_modulus(s: &Scenario) -> Result<Outcome> {
    let m = &s.modulus;
    let families: Vec<(String, DiniClass)> = m
        .families
        .iter()
        .map(|f| (f.id.clone(), if f.dini { DiniClass::Dini } else { DiniClass::NonDini }))
        .collect();
    let cases = modulus_suite(&families, &m.lambdas, &m.k0)?;
    let pass = cases.iter().all(|c| c.pass());
    let class = |c: DiniClass| match c {
        DiniClass::Dini => "dini",
        DiniClass::NonDini => "non_dini",
    };
    let csv = csv_string(
        &["family", "expected", "classification", "invariants_hold", "tail_sums_hold"],
        cases.iter().map(|c| {
            vec![
                c.id.clone(),
                class(c.expected).into(),
                class(c.classification).into(),
                c.invariants_hold.to_string(),
                c.tail_sums.iter().all(|t| t.2).to_string(),
            ]
        }),
    )?;
    let report = RunReport {
        v: REPORT_VERSION,
        scenario_id: s.id.clone(),
        mode: s.mode,
        verdict: pass_fail(pass),
        reason: format!("{} of {} families pass", cases.iter().filter(|c| c.pass()).count(), cases.len()),
        seed: s.seed,
        config: config_value(s),
        constants: None,
        limits: Value::Null,
        flags: Value::Null,
        results: json!({ "cases": cases }),
    };
    Ok(Outcome {
        report,
        artifacts: vec![(format!("{}.modulus.csv", s.id), csv)],
    })
}
