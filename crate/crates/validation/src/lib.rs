//! Bookkeeping for the acceptance run: each criterion collects sub-checks and
//! prints a single PASS/FAIL line.

use std::fmt::Write;
use std::time::Instant;

/// `|value − target| ≤ tol`.
pub fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

/// One criterion being evaluated.
pub struct Criterion {
    id: u32,
    title: String,
    checks: Vec<(bool, String)>,
    started: Instant,
}

impl Criterion {
    pub fn new(id: u32, title: &str) -> Self {
        Criterion {
            id,
            title: title.to_string(),
            checks: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Records a sub-check with a short description of what was measured.
    pub fn check(&mut self, pass: bool, detail: impl Into<String>) -> bool {
        self.checks.push((pass, detail.into()));
        pass
    }

    /// Records `value` against `target ± tol`.
    pub fn near(&mut self, label: &str, value: f64, target: f64, tol: f64) -> bool {
        let pass = within(value, target, tol);
        self.check(
            pass,
            format!("{label} = {value:.4} (target {target} ± {tol})"),
        )
    }

    /// Records a computation that errored; always a failed sub-check.
    pub fn error(&mut self, label: &str, err: impl std::fmt::Display) {
        self.check(false, format!("{label}: error: {err}"));
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|(p, _)| *p)
    }

    /// Detail lines followed by the verdict line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (pass, detail) in &self.checks {
            let mark = if *pass { "ok " } else { "off" };
            writeln!(out, "    [{mark}] {detail}").unwrap();
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let failed = self.checks.iter().filter(|(p, _)| !p).count();
        writeln!(
            out,
            "{verdict} C{}: {} ({}/{} checks, {:.1} s)",
            self.id,
            self.title,
            self.checks.len() - failed,
            self.checks.len(),
            self.started.elapsed().as_secs_f64()
        )
        .unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_requires_every_check() {
        let mut c = Criterion::new(1, "demo");
        assert!(!c.passed());
        c.near("x", 1.01, 1.0, 0.02);
        assert!(c.passed());
        c.near("y", 2.0, 1.0, 0.5);
        assert!(!c.passed());
        assert!(c
            .render()
            .lines()
            .last()
            .unwrap()
            .starts_with("FAIL C1: demo (1/2 checks"));
    }
}
