//! Structured pass/fail results.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub check: String,
    pub pass: bool,
    /// Worst-case violation or residual magnitude for the check.
    pub residual: f64,
    /// Free-form location or context, e.g. the offending `t`.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<CheckEntry>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: impl Into<String>, pass: bool, residual: f64) {
        self.entries.push(CheckEntry {
            check: check.into(),
            pass,
            residual,
            detail: None,
        });
    }

    pub fn push_detail(
        &mut self,
        check: impl Into<String>,
        pass: bool,
        residual: f64,
        detail: impl Into<String>,
    ) {
        self.entries.push(CheckEntry {
            check: check.into(),
            pass,
            residual,
            detail: Some(detail.into()),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.entries.extend(other.entries);
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, check: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.check == check)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

impl fmt::Display for CheckEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} pass={} residual={:e}",
            self.check, self.pass, self.residual
        )?;
        if let Some(detail) = &self.detail {
            write!(f, " detail=\"{detail}\"")?;
        }
        Ok(())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for entry in &self.entries {
            writeln!(f, "{entry}")?;
        }
        Ok(())
    }
}
