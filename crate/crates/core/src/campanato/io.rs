use super::certificate::{Certificate, Verdict};
use super::probe::{IterationTrace, Mode};
use crate::error::{Error, Result};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

pub fn columns(mode: Mode) -> Vec<&'static str> {
    let mut c = vec!["k", "scale", "M_k", "xi_k", "eta_k", "S_k", "N_k"];
    match mode {
        Mode::C1 => c.extend(["A", "B1", "B2"]),
        Mode::C11 => c.extend(["E", "F1", "F2", "G11", "G12", "G22"]),
    }
    c
}

/// Smallest recurrence margin of a trace; infinite when every step is slack.
pub fn worst_margin(trace: &IterationTrace) -> f64 {
    trace
        .records
        .iter()
        .filter_map(|r| r.margin)
        .fold(f64::INFINITY, f64::min)
}

/// Renders a trace as CSV with a one-line `#` header.
pub fn trace_csv(scenario: &str, trace: &IterationTrace, cert: &Certificate) -> Result<String> {
    let mode = match trace.mode {
        Mode::C1 => "c1",
        Mode::C11 => "c11",
    };
    let mut out = format!(
        "# v={TRACE_SCHEMA_VERSION} scenario={scenario} mode={mode} verdict={} worst_margin={}\n",
        cert.verdict.as_str(),
        worst_margin(trace)
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Schema(e.to_string());
    w.write_record(columns(trace.mode)).map_err(io)?;
    for (r, n) in trace.records.iter().zip(&cert.n) {
        let p = &r.approx;
        let mut row = vec![
            r.k.to_string(),
            r.scale.to_string(),
            r.m.to_string(),
            r.xi.to_string(),
            r.eta.to_string(),
            r.s.to_string(),
            n.to_string(),
            p.e.to_string(),
            p.f[0].to_string(),
            p.f[1].to_string(),
        ];
        if trace.mode == Mode::C11 {
            row.extend([p.g[0][0].to_string(), p.g[0][1].to_string(), p.g[1][1].to_string()]);
        }
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))?);
    Ok(out)
}

/// What `report` needs from a trace file.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSummary {
    pub scenario: String,
    pub mode: Mode,
    pub verdict: Verdict,
    pub worst_margin: f64,
    pub final_n: f64,
    pub final_s: f64,
    pub rows: usize,
}

pub fn parse_trace_csv(text: &str) -> Result<TraceSummary> {
    let (header, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::Schema("empty trace file".into()))?;
    let header = header
        .strip_prefix("# ")
        .ok_or_else(|| Error::Schema("missing `#` header line".into()))?;
    let field = |key: &str| -> Result<&str> {
        header
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Schema(format!("header lacks `{key}`")))
    };
    let v = field("v")?;
    if v != TRACE_SCHEMA_VERSION.to_string() {
        return Err(Error::Schema(format!(
            "trace schema version {v}, expected {TRACE_SCHEMA_VERSION}"
        )));
    }
    let mode = match field("mode")? {
        "c1" => Mode::C1,
        "c11" => Mode::C11,
        m => return Err(Error::Schema(format!("unknown mode `{m}`"))),
    };
    let verdict_s = field("verdict")?;
    let verdict = Verdict::parse(verdict_s).ok_or_else(|| Error::Schema(format!("unknown verdict `{verdict_s}`")))?;
    let worst_margin: f64 = field("worst_margin")?
        .parse()
        .map_err(|_| Error::Schema("worst_margin is not a number".into()))?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let cols: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if cols != columns(mode) {
        return Err(Error::Schema(format!("unexpected columns {cols:?}")));
    }
    let (mut rows, mut final_n, mut final_s) = (0, f64::NAN, f64::NAN);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Schema(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Schema(format!("bad number in column {}", cols[i])))
        };
        final_s = num(5)?;
        final_n = num(6)?;
        rows += 1;
    }
    Ok(TraceSummary {
        scenario: field("scenario")?.to_string(),
        mode,
        verdict,
        worst_margin,
        final_n,
        final_s,
        rows,
    })
}
