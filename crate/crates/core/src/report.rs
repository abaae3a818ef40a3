//! Inequality reports, summaries and their JSON-lines form.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Parameters a report was produced with; unset entries are omitted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalizer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
}

impl ReportParams {
    pub fn claim(mut self, c: &str) -> Self {
        self.claim = Some(c.to_string());
        self
    }
}

/// One inequality `lhs ≤ constant_used · rhs + error_budget`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityReport {
    pub theorem_id: String,
    pub params: ReportParams,
    pub lhs: f64,
    pub rhs: f64,
    pub constant_used: f64,
    pub ratio: f64,
    pub verdict: Verdict,
    pub error_budget: f64,
    /// Supporting numbers (per-grid constants, worst member, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observed: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn safe_ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs != 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::MAX
    }
}

impl InequalityReport {
    /// Verdict is `Pass` iff all numbers are finite and
    /// `lhs ≤ constant · rhs + budget`.
    pub fn evaluate(theorem_id: &str, params: ReportParams, lhs: f64, rhs: f64, constant: f64, budget: f64) -> Self {
        let finite = lhs.is_finite() && rhs.is_finite() && constant.is_finite() && budget.is_finite();
        let verdict = if finite && lhs <= constant * rhs + budget {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let clamp = |v: f64| if v.is_finite() { v } else { f64::MAX };
        Self {
            theorem_id: theorem_id.to_string(),
            params,
            lhs: clamp(lhs),
            rhs: clamp(rhs),
            constant_used: clamp(constant),
            ratio: clamp(safe_ratio(lhs, rhs)),
            verdict,
            error_budget: clamp(budget),
            observed: BTreeMap::new(),
            note: None,
        }
    }

    /// A check that could not run its premise (e.g. the `A_p` estimate diverges).
    pub fn inconclusive(theorem_id: &str, params: ReportParams, note: impl Into<String>) -> Self {
        Self {
            theorem_id: theorem_id.to_string(),
            params,
            lhs: 0.0,
            rhs: 0.0,
            constant_used: 0.0,
            ratio: 0.0,
            verdict: Verdict::Inconclusive,
            error_budget: 0.0,
            observed: BTreeMap::new(),
            note: Some(note.into()),
        }
    }

    /// `lhs = drift ≤ limit`, where drift is the relative spread of `values`.
    pub fn stability(theorem_id: &str, params: ReportParams, values: &[f64], limit: f64) -> Self {
        let d = drift(values);
        let mut r = Self::evaluate(theorem_id, params, d, 1.0, limit, 0.0);
        for (i, v) in values.iter().enumerate() {
            r.observed.insert(format!("c{i}"), if v.is_finite() { *v } else { f64::MAX });
        }
        r
    }

    pub fn observe(mut self, key: &str, v: f64) -> Self {
        self.observed.insert(key.to_string(), if v.is_finite() { v } else { f64::MAX });
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn sort_key(&self) -> (String, String) {
        (
            self.theorem_id.clone(),
            serde_json::to_string(&self.params).unwrap_or_default(),
        )
    }
}

/// `(max − min) / max`, infinite when any value is not finite or positive.
pub fn drift(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return f64::INFINITY;
    }
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    (hi - lo) / hi
}

/// Orders reports by theorem id, then by serialized params.
pub fn sort_reports(reports: &mut [InequalityReport]) {
    reports.sort_by_key(|r| r.sort_key());
}

/// Aggregate over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub counts: BTreeMap<Verdict, usize>,
    /// Largest `ratio / constant_used` and the theorem it came from.
    pub worst_utilization: Option<(String, f64)>,
    /// Largest raw ratio.
    pub worst_ratio: Option<(String, f64)>,
    pub failed: Vec<String>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.counts.get(&Verdict::Fail).copied().unwrap_or(0) == 0
    }
}

pub fn summarize(reports: &[InequalityReport]) -> Summary {
    let mut s = Summary {
        total: reports.len(),
        ..Default::default()
    };
    for r in reports {
        *s.counts.entry(r.verdict).or_insert(0) += 1;
        if r.verdict == Verdict::Inconclusive {
            continue;
        }
        if s.worst_ratio.as_ref().is_none_or(|w| r.ratio > w.1) {
            s.worst_ratio = Some((r.theorem_id.clone(), r.ratio));
        }
        let u = safe_ratio(r.ratio, r.constant_used);
        if s.worst_utilization.as_ref().is_none_or(|w| u > w.1) {
            s.worst_utilization = Some((r.theorem_id.clone(), u));
        }
        if r.verdict == Verdict::Fail {
            let claim = r.params.claim.as_deref().unwrap_or("main");
            s.failed.push(format!("{}:{claim}", r.theorem_id));
        }
    }
    s
}

/// One JSON object per line.
pub fn write_jsonl(reports: &[InequalityReport], mut out: impl Write) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(id: &str, lhs: f64, c: f64) -> InequalityReport {
        InequalityReport::evaluate(id, ReportParams::default(), lhs, 1.0, c, 0.0)
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(rep("suf", 1.0, 1.0).verdict, Verdict::Pass);
        assert_eq!(rep("suf", 1.0 + 1e-12, 1.0).verdict, Verdict::Fail);
        let b = InequalityReport::evaluate("suf", ReportParams::default(), 1.1, 1.0, 1.0, 0.1);
        assert_eq!(b.verdict, Verdict::Pass);
        assert_eq!(rep("suf", f64::NAN, 1.0).verdict, Verdict::Fail);
        assert_eq!(rep("suf", f64::INFINITY, 1.0).lhs, f64::MAX);
    }

    #[test]
    fn summaries() {
        let empty = summarize(&[]);
        assert_eq!(empty.total, 0);
        assert!(empty.counts.is_empty());
        let one = summarize(&[rep("suf", 0.5, 1.0)]);
        assert_eq!(one.counts.get(&Verdict::Pass), Some(&1));
        let mixed = summarize(&[rep("suf", 0.5, 1.0), rep("ruwf", 3.0, 2.0), rep("holder", 0.9, 1.0)]);
        assert_eq!(mixed.worst_ratio, Some(("ruwf".to_string(), 3.0)));
        assert_eq!(mixed.failed, vec!["ruwf:main".to_string()]);
        assert!(!mixed.all_pass());
    }

    #[test]
    fn drift_values() {
        assert_eq!(drift(&[2.0, 2.0]), 0.0);
        assert_eq!(drift(&[1.0, 2.0]), 0.5);
        assert!(drift(&[1.0, f64::NAN]).is_infinite());
        assert!(drift(&[]).is_infinite());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut reports = vec![
            rep("suf", 0.5, 1.0).observe("c0", 1.0),
            InequalityReport::inconclusive("ruwf", ReportParams::default().claim("x"), "diverging"),
        ];
        sort_reports(&mut reports);
        assert_eq!(reports[0].theorem_id, "ruwf");
        let mut buf = Vec::new();
        write_jsonl(&reports, &mut buf).unwrap();
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, reports);
        assert_eq!(summarize(&back), summarize(&reports));
    }
}
