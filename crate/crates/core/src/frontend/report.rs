use std::fmt::Write;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// The question is outside what the engine can decide.
    Refused,
}

impl Status {
    fn label(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Refused => "REFUSED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub refused: usize,
}

/// Outcome of a run; contains no timing so identical inputs give identical reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub source: String,
    pub checks: Vec<Check>,
    pub summary: Summary,
    pub status: Status,
}

impl Report {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            checks: Vec::new(),
            summary: Summary::default(),
            status: Status::Pass,
        }
    }

    pub fn push(&mut self, name: impl Into<String>, line: Option<usize>, status: Status, detail: Option<String>) {
        match status {
            Status::Pass => self.summary.pass += 1,
            Status::Fail => self.summary.fail += 1,
            Status::Refused => self.summary.refused += 1,
        }
        self.status = if self.summary.refused > 0 {
            Status::Refused
        } else if self.summary.fail > 0 {
            Status::Fail
        } else {
            Status::Pass
        };
        self.checks.push(Check {
            name: name.into(),
            line,
            status,
            detail,
        });
    }

    /// 0 when everything passed, 1 on a failure, 2 when something was refused.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Refused => 2,
        }
    }

    /// Human-readable rendering; details of passing checks only with `verbose`.
    pub fn to_text(&self, verbose: bool) -> String {
        let mut out = format!("{}\n", self.source);
        for c in &self.checks {
            let at = c.line.map(|l| format!("line {l}: ")).unwrap_or_default();
            let _ = writeln!(out, "  {:<8}{at}{}", c.status.label(), c.name);
            if let Some(d) = &c.detail {
                if verbose || c.status != Status::Pass {
                    for l in d.lines() {
                        let _ = writeln!(out, "          {l}");
                    }
                }
            }
        }
        let _ = writeln!(
            out,
            "{} passed, {} failed, {} refused: {}",
            self.summary.pass,
            self.summary.fail,
            self.summary.refused,
            self.status.label()
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
