//! Pass/fail bookkeeping for the acceptance run.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// Outcome of one numbered criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {} [{:.1}s] {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Collects named sub-checks for a criterion; the criterion passes only if
/// every check does.
#[derive(Debug, Default)]
pub struct Checks {
    failures: Vec<String>,
    notes: String,
    count: usize,
}

impl Checks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, name: impl AsRef<str>, ok: bool) -> bool {
        self.count += 1;
        if !ok {
            self.failures.push(name.as_ref().to_owned());
        }
        ok
    }

    /// `|actual - expected| <= tol`
    pub fn close(&mut self, name: impl AsRef<str>, actual: f64, expected: f64, tol: f64) -> bool {
        let ok = (actual - expected).abs() <= tol;
        let label = format!("{} ({actual:.6} vs {expected:.6} +/- {tol})", name.as_ref());
        self.check(label, ok)
    }

    pub fn note(&mut self, text: impl AsRef<str>) {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(text.as_ref());
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}/{} checks", self.count - self.failures.len(), self.count);
        if !self.notes.is_empty() {
            let _ = write!(s, "; {}", self.notes);
        }
        if !self.failures.is_empty() {
            let _ = write!(s, "; failed: {}", self.failures.join(", "));
        }
        s
    }
}

/// Runs criteria in order and prints one line per criterion as it finishes.
#[derive(Debug, Default)]
pub struct Scorecard {
    verdicts: Vec<Verdict>,
}

impl Scorecard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn run(&mut self, id: u8, title: &str, body: impl FnOnce(&mut Checks)) {
        let start = Instant::now();
        let mut checks = Checks::new();
        body(&mut checks);
        let verdict = Verdict {
            id,
            title: title.to_owned(),
            passed: checks.passed() && checks.count() > 0,
            detail: checks.summary(),
            elapsed: start.elapsed(),
        };
        println!("{}", verdict.line());
        self.verdicts.push(verdict);
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn passed(&self) -> usize {
        self.verdicts.iter().filter(|v| v.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.verdicts.len()
    }
}
