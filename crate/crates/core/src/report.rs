//! Check reports shared by the law checkers, potential checks and harnesses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::Jet;

/// Number of violations kept verbatim in a report.
pub const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub jet: Option<Jet>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub law: String,
    pub samples: usize,
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inconclusive: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(law: impl Into<String>) -> Self {
        Self {
            law: law.into(),
            samples: 0,
            violations: vec![],
            violation_count: 0,
            pass: true,
            inconclusive: false,
            metrics: BTreeMap::new(),
            notes: vec![],
        }
    }

    pub fn violation(&mut self, v: Violation) {
        self.violation_count += 1;
        self.pass = false;
        if self.violations.len() < MAX_LISTED {
            self.violations.push(v);
        }
    }

    pub fn fail(&mut self, x: &[f64], jet: Option<&Jet>, detail: impl Into<String>) {
        self.violation(Violation { x: x.to_vec(), y: None, jet: jet.cloned(), detail: detail.into() });
    }

    pub fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn mark_inconclusive(&mut self, why: impl Into<String>) {
        self.inconclusive = true;
        self.pass = false;
        self.notes.push(why.into());
    }

    /// Folds another report's verdict into this one.
    pub fn absorb(&mut self, other: &Report) {
        self.samples += other.samples;
        for v in &other.violations {
            if self.violations.len() < MAX_LISTED {
                self.violations.push(v.clone());
            }
        }
        self.violation_count += other.violation_count;
        self.pass &= other.pass;
    }
}
