use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{paired_ttest, EvalReport, TTest};
use crate::error::Error;

/// Test of the reference method against one other method, paired over
/// subjects on per-subject ITR.
#[derive(Debug, Clone)]
pub struct PairedComparison {
    pub reference: String,
    pub other: String,
    pub n: usize,
    pub result: Result<TTest, String>,
}

/// Side-by-side per-subject ITR of several labelled runs.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub subjects: Vec<String>,
    /// `itr[method][subject]`; `None` where no trial decided.
    pub itr: Vec<Vec<Option<f64>>>,
    pub pooled_itr: Vec<Option<f64>>,
    pub pooled_accuracy: Vec<f64>,
    pub pooled_mrt_s: Vec<Option<f64>>,
    pub tests: Vec<PairedComparison>,
}

/// Builds the comparison. The reference is the first run whose method is
/// `bifb`, or the first run if none is. Subjects without a defined ITR
/// enter the t-tests as 0 bits/min.
pub fn compare_reports(runs: &[(String, EvalReport)]) -> Comparison {
    let subjects: Vec<String> = runs
        .iter()
        .flat_map(|(_, r)| r.per_subject.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let itr: Vec<Vec<Option<f64>>> = runs
        .iter()
        .map(|(_, r)| {
            subjects
                .iter()
                .map(|s| r.per_subject.get(s).and_then(|st| st.itr_bits_per_min))
                .collect()
        })
        .collect();
    let reference = runs
        .iter()
        .position(|(_, r)| r.method == "bifb")
        .unwrap_or(0);
    let zeroed = |m: usize| -> Vec<f64> { itr[m].iter().map(|v| v.unwrap_or(0.0)).collect() };
    let tests = (0..runs.len())
        .filter(|&m| m != reference)
        .map(|m| PairedComparison {
            reference: runs[reference].0.clone(),
            other: runs[m].0.clone(),
            n: subjects.len(),
            result: paired_ttest(&zeroed(reference), &zeroed(m)).map_err(|e| match e {
                Error::ZeroVariance => "zero variance".to_string(),
                e => e.to_string(),
            }),
        })
        .collect();
    Comparison {
        labels: runs.iter().map(|(l, _)| l.clone()).collect(),
        subjects,
        itr,
        pooled_itr: runs
            .iter()
            .map(|(_, r)| r.pooled.itr_bits_per_min)
            .collect(),
        pooled_accuracy: runs.iter().map(|(_, r)| r.pooled.accuracy).collect(),
        pooled_mrt_s: runs.iter().map(|(_, r)| r.pooled.mrt_s).collect(),
        tests,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut out = String::from("ITR (bits/min) per subject\n");
        let width = self
            .labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(10);
        let _ = write!(out, "{:<12}", "Subject");
        for l in &self.labels {
            let _ = write!(out, " {l:>width$}");
        }
        out.push('\n');
        for (i, s) in self.subjects.iter().enumerate() {
            let _ = write!(out, "{s:<12}");
            for m in &self.itr {
                let _ = write!(out, " {:>width$}", cell(m[i]));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<12}", "Pooled");
        for v in &self.pooled_itr {
            let _ = write!(out, " {:>width$}", cell(*v));
        }
        out.push('\n');
        let _ = write!(out, "{:<12}", "Accuracy %");
        for v in &self.pooled_accuracy {
            let _ = write!(out, " {:>width$.2}", 100.0 * v);
        }
        out.push('\n');
        let _ = write!(out, "{:<12}", "MRT (s)");
        for v in &self.pooled_mrt_s {
            let _ = write!(out, " {:>width$}", cell(*v));
        }
        out.push('\n');
        if !self.tests.is_empty() {
            out.push_str("\nPaired t-tests on per-subject ITR (two-sided)\n");
            for t in &self.tests {
                let _ = match &t.result {
                    Ok(r) => writeln!(
                        out,
                        "{} vs {}: mean difference {:.3}, t({}) = {:.4}, p = {:.4}",
                        t.reference, t.other, r.mean_difference, r.df, r.t, r.p_value
                    ),
                    Err(msg) => {
                        writeln!(out, "{} vs {}: not testable ({msg})", t.reference, t.other)
                    }
                };
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for (i, s) in self.subjects.iter().enumerate() {
            out.push_str(s);
            for m in &self.itr {
                let _ = write!(out, ",{}", opt(m[i]));
            }
            out.push('\n');
        }
        out.push_str("pooled");
        for v in &self.pooled_itr {
            let _ = write!(out, ",{}", opt(*v));
        }
        out.push('\n');
        out
    }

    pub fn tests_csv(&self) -> String {
        let mut out = String::from("reference,other,n,mean_difference,t,df,p_value,note\n");
        for t in &self.tests {
            let _ = match &t.result {
                Ok(r) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},",
                    t.reference, t.other, t.n, r.mean_difference, r.t, r.df, r.p_value
                ),
                Err(msg) => writeln!(out, "{},{},{},,,,,{msg}", t.reference, t.other, t.n),
            };
        }
        out
    }
}
