//! Clause-by-clause certificate record.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Skipped because a prerequisite clause failed.
    NotEvaluated,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotEvaluated => "not_evaluated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Scalar(f64),
    Vector(Vec<f64>),
    Roots(Vec<Complex<f64>>),
    Matrix(DMatrix<f64>),
    Text(String),
}

impl Witness {
    fn render(&self) -> String {
        let list = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(", ");
        match self {
            Witness::Scalar(x) => format!("{x:.12e}"),
            Witness::Vector(v) => format!("[{}]", list(&mut v.iter().map(|x| format!("{x:.12e}")))),
            Witness::Roots(r) => format!(
                "[{}]",
                list(&mut r.iter().map(|z| format!("{:.12e}{:+.12e}i", z.re, z.im)))
            ),
            Witness::Matrix(m) => {
                let rows: Vec<String> = m
                    .row_iter()
                    .map(|row| list(&mut row.iter().map(|x| format!("{x:.12e}"))))
                    .collect();
                format!("[{}]", rows.join("; "))
            }
            Witness::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub name: String,
    pub verdict: Verdict,
    pub witnesses: Vec<(String, Witness)>,
}

impl Clause {
    pub fn new(name: impl Into<String>, verdict: Verdict) -> Self {
        Self {
            name: name.into(),
            verdict,
            witnesses: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, w: Witness) -> Self {
        self.witnesses.push((key.to_string(), w));
        self
    }

    pub fn witness(&self, key: &str) -> Option<&Witness> {
        self.witnesses.iter().find(|(k, _)| k == key).map(|(_, w)| w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// Linear agents: polynomial conditions only.
    Linear,
    /// Nonlinear agents: polynomials, Lyapunov solutions and gain margins.
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub certificate: Certificate,
    pub clauses: Vec<Clause>,
}

impl StabilityReport {
    /// No clause failed.
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.clauses
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| c.name.as_str())
            .collect()
    }

    fn certificate_label(&self) -> &'static str {
        match self.certificate {
            Certificate::Linear => "linear",
            Certificate::Nonlinear => "nonlinear",
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("certificate: {}\n", self.certificate_label());
        for c in &self.clauses {
            let tag = match c.verdict {
                Verdict::Pass => "PASS",
                Verdict::Fail => "FAIL",
                Verdict::NotEvaluated => "SKIP",
            };
            let _ = writeln!(out, "[{tag}] {}", c.name);
            for (k, w) in &c.witnesses {
                let _ = writeln!(out, "    {k} = {}", w.render());
            }
        }
        let _ = writeln!(out, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }

    /// One `key=value` line per verdict and witness.
    pub fn to_key_values(&self) -> String {
        let mut out = format!("certificate={}\n", self.certificate_label());
        for c in &self.clauses {
            let _ = writeln!(out, "{}.verdict={}", c.name, c.verdict.label());
            for (k, w) in &c.witnesses {
                let _ = writeln!(out, "{}.{k}={}", c.name, w.render());
            }
        }
        let _ = writeln!(out, "overall={}", Verdict::from_bool(self.passed()).label());
        out
    }
}
