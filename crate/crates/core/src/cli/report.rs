use std::path::{Path, PathBuf};

use super::execute::{RunReport, REPORT_VERSION};
use crate::error::{Error, Result};

/// Sort rank of a verdict: certified and passing runs first.
pub fn verdict_rank(v: &str) -> u8 {
    match v {
        "C1_certified" => 0,
        "C11_certified" => 1,
        "pass" => 2,
        "inconclusive" => 3,
        "fail" => 4,
        "failed" => 5,
        _ => 6,
    }
}

/// Report files named directly, or found one level deep in directories.
pub fn collect_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.to_string_lossy().ends_with(".report.json"))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Error::config("report", format!("no such file or directory: {}", p.display())));
        }
    }
    if out.is_empty() {
        return Err(Error::config("report", "no report files found"));
    }
    Ok(out)
}

pub fn load_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    match raw.get("v").and_then(|v| v.as_u64()) {
        Some(v) if v == REPORT_VERSION as u64 => {}
        other => {
            return Err(Error::Schema(format!(
                "{}: report version {:?} (expected {REPORT_VERSION})",
                path.display(),
                other
            )))
        }
    }
    serde_json::from_value(raw).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Loads and sorts reports by verdict, then scenario id.
pub fn load_sorted(inputs: &[PathBuf]) -> Result<Vec<RunReport>> {
    let mut reports = collect_paths(inputs)?
        .iter()
        .map(|p| load_report(p))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| {
        verdict_rank(&a.verdict)
            .cmp(&verdict_rank(&b.verdict))
            .then_with(|| a.scenario_id.cmp(&b.scenario_id))
    });
    Ok(reports)
}

fn num(group: &serde_json::Value, key: &str) -> String {
    match group.get(key).and_then(|v| v.as_f64()) {
        Some(x) => format!("{x:.3e}"),
        None => "-".into(),
    }
}

fn mode_name(r: &RunReport) -> String {
    serde_json::to_value(r.mode)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

pub fn table(reports: &[RunReport]) -> String {
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.scenario_id.clone(),
                mode_name(r),
                r.verdict.clone(),
                num(&r.results, "final_N"),
                num(&r.results, "S_K"),
                num(&r.flags, "worst_margin"),
            ]
        })
        .collect();
    let header = ["scenario", "mode", "verdict", "final_N", "S_K", "worst_margin"];
    let mut width = header.map(str::len);
    for row in &rows {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header.map(String::from));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    let failed = reports.iter().filter(|r| r.failed()).count();
    out.push_str(&format!("{} scenarios, {} failed\n", reports.len(), failed));
    out
}

pub fn summary_csv(reports: &[RunReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let schema = |e: csv::Error| Error::Schema(e.to_string());
    w.write_record(["scenario", "mode", "verdict", "final_N", "S_K", "worst_margin", "reason"])
        .map_err(schema)?;
    for r in reports {
        let get = |g: &serde_json::Value, k: &str| g.get(k).and_then(|v| v.as_f64()).map(|x| x.to_string());
        w.write_record([
            r.scenario_id.clone(),
            mode_name(r),
            r.verdict.clone(),
            get(&r.results, "final_N").unwrap_or_default(),
            get(&r.results, "S_K").unwrap_or_default(),
            get(&r.flags, "worst_margin").unwrap_or_default(),
            r.reason.clone(),
        ])
        .map_err(schema)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}
