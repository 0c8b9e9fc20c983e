use serde::{Deserialize, Serialize};

use super::probe::{IterationConfig, IterationTrace, Mode};
use crate::fields::frobenius;
use crate::modulus::tail_decay_ratio;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCheck {
    pub k: usize,
    /// `safety · (ξ_k M_k + η_k)`.
    pub bound: f64,
    /// `M_{k+1}`.
    pub next: f64,
    pub ok: bool,
    /// `bound / M_{k+1}`; infinite when `M_{k+1} = 0`.
    pub margin: f64,
}

/// Checks `M_{k+1} ≤ safety (ξ_k M_k + η_k)` for every consecutive pair.
pub fn recurrence_checks(m: &[f64], xi: &[f64], eta: &[f64], safety: f64) -> Vec<RecurrenceCheck> {
    (0..m.len().saturating_sub(1))
        .map(|k| {
            let bound = safety * (xi[k] * m[k] + eta[k]);
            let next = m[k + 1];
            let margin = if next == 0.0 { f64::INFINITY } else { bound / next };
            RecurrenceCheck {
                k,
                bound,
                next,
                ok: next <= bound,
                margin,
            }
        })
        .collect()
}

pub fn verify_recurrence(trace: &IterationTrace, safety: f64) -> Vec<RecurrenceCheck> {
    let m: Vec<f64> = trace.records.iter().map(|r| r.m).collect();
    let xi: Vec<f64> = trace.records.iter().map(|r| r.xi).collect();
    let eta: Vec<f64> = trace.records.iter().map(|r| r.eta).collect();
    recurrence_checks(&m, &xi, &eta, safety)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "C1_certified")]
    C1Certified,
    #[serde(rename = "C11_certified")]
    C11Certified,
    #[serde(rename = "inconclusive")]
    Inconclusive,
    #[serde(rename = "failed")]
    Failed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::C1Certified => "C1_certified",
            Verdict::C11Certified => "C11_certified",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Verdict::C1Certified, Verdict::C11Certified, Verdict::Inconclusive, Verdict::Failed]
            .into_iter()
            .find(|v| v.as_str() == s)
    }

    pub fn is_certified(self) -> bool {
        matches!(self, Verdict::C1Certified | Verdict::C11Certified)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "N")]
    pub n: Vec<f64>,
    pub verdict: Verdict,
    /// Tail ratio of the `S_k` increments `M_k`.
    pub tail_ratio: f64,
    pub tolerance: f64,
    pub reason: String,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `N_k` against the last constructed polynomial. Differences are taken in
/// rescaled coordinates, where they do not suffer cancellation.
pub fn certificate_sequence(trace: &IterationTrace) -> Vec<f64> {
    let lam = trace.lambda;
    let l = trace.limit_index as i32;
    let ql = &trace.limit_rescaled;
    trace
        .records
        .iter()
        .map(|r| {
            let k = r.k as i32;
            let qk = &r.rescaled;
            let p1 = lam.powi(l - k);
            let p2 = p1 * p1;
            let df = dist(qk.f, [p1 * ql.f[0], p1 * ql.f[1]]);
            let de = (qk.e - p2 * ql.e).abs();
            match trace.mode {
                // |B_k − B̄| + |A_k − Ā| / λ^k
                Mode::C1 => r.m + r.scale * df + r.scale * de,
                Mode::C11 => {
                    let dg = [
                        [qk.g[0][0] - ql.g[0][0], qk.g[0][1] - ql.g[0][1]],
                        [qk.g[1][0] - ql.g[1][0], qk.g[1][1] - ql.g[1][1]],
                    ];
                    let s = &trace.smallness;
                    r.m + frobenius(&dg) + df + de + s.tau / (2.0 * s.ellipticity) * r.scale * df
                }
            }
        })
        .collect()
}

/// Classifies a trace from its `N_k` and `S_k` behaviour.
///
/// Truncated traces are inconclusive. A trace whose increments `M_k` keep a
/// tail ratio above `plateau_ratio` fails. It is certified when the last
/// `N_k` is within `cert_atol + cert_rtol · max N` and the last
/// `plateau_window` values of `N_k` are non-increasing.
pub fn certificate(trace: &IterationTrace, cfg: &IterationConfig) -> Certificate {
    let n = certificate_sequence(trace);
    let increments: Vec<f64> = trace
        .records
        .iter()
        .map(|r| if r.m <= cfg.cert_atol { 0.0 } else { r.m })
        .collect();
    let tail_ratio = tail_decay_ratio(&increments, cfg.plateau_window);
    let n_max = n.iter().copied().fold(0.0, f64::max);
    let tolerance = cfg.cert_atol + cfg.cert_rtol * n_max;
    let last = *n.last().unwrap_or(&0.0);
    let tail = &n[n.len().saturating_sub(cfg.plateau_window)..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + cfg.cert_atol);
    let (verdict, reason) = if trace.truncated {
        (Verdict::Inconclusive, "trace truncated at the grid scale floor".to_string())
    } else if n.iter().any(|v| !v.is_finite()) {
        (Verdict::Failed, "non-finite certificate entries".to_string())
    } else if tail_ratio > cfg.plateau_ratio {
        (
            Verdict::Failed,
            format!("S_k increments do not plateau (tail ratio {tail_ratio:.4})"),
        )
    } else if last <= tolerance && monotone {
        let v = match trace.mode {
            Mode::C1 => Verdict::C1Certified,
            Mode::C11 => Verdict::C11Certified,
        };
        (v, format!("N_K = {last:.3e} within {tolerance:.3e}"))
    } else if !monotone {
        (Verdict::Inconclusive, "N_k tail is not monotone".to_string())
    } else {
        (
            Verdict::Inconclusive,
            format!("N_K = {last:.3e} above tolerance {tolerance:.3e}"),
        )
    };
    Certificate {
        n,
        verdict,
        tail_ratio,
        tolerance,
        reason,
    }
}
