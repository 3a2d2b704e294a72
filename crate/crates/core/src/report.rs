//! Validation reports: hypothesis checks never fail with an error, they
//! return the list of witnesses that violate the inequality under test.

use std::fmt;

/// One violated inequality with a concrete witness.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Short machine-readable rule name, e.g. `"upper-doubling"`.
    pub rule: String,
    /// Human-readable witness (the offending point/radius/cell and values).
    pub witness: String,
}

/// Outcome of an exhaustive hypothesis check.
///
/// `checks` counts the individual inequalities evaluated so that a vacuous
/// pass (nothing was testable) is distinguishable from a real one.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: usize,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violate(&mut self, rule: &str, witness: String) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            witness,
        });
    }

    pub fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    /// Fold another report into this one.
    pub fn absorb(&mut self, other: ValidationReport) {
        self.checks += other.checks;
        self.violations.extend(other.violations);
        self.notes.extend(other.notes);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pass() {
            write!(f, "pass ({} checks)", self.checks)?;
        } else {
            writeln!(
                f,
                "FAIL ({} violations / {} checks)",
                self.violations.len(),
                self.checks
            )?;
            for v in &self.violations {
                writeln!(f, "  [{}] {}", v.rule, v.witness)?;
            }
        }
        for n in &self.notes {
            write!(f, "\n  note: {n}")?;
        }
        Ok(())
    }
}
