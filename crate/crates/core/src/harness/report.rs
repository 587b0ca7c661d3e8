use serde::{Deserialize, Serialize};

use super::stats::Estimate;

/// How a record decides pass or fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `|estimate - reference| ≤ se_multiplier · SE + bias_budget`.
    Within {
        se_multiplier: f64,
        bias_budget: f64,
    },
    /// `estimate ≤ reference`.
    AtMost,
    /// `estimate ≥ reference`.
    AtLeast,
    /// Evaluated like `Within` and reported, but does not gate the report.
    Info {
        se_multiplier: f64,
        bias_budget: f64,
    },
    /// A diagnostic value with nothing to compare against.
    Report,
}

impl Check {
    pub fn holds(&self, estimate: f64, se: f64, reference: f64) -> bool {
        match *self {
            Check::Within {
                se_multiplier,
                bias_budget,
            }
            | Check::Info {
                se_multiplier,
                bias_budget,
            } => (estimate - reference).abs() <= se_multiplier * se + bias_budget,
            Check::AtMost => estimate <= reference,
            Check::AtLeast => estimate >= reference,
            Check::Report => true,
        }
    }

    pub fn gates(&self) -> bool {
        !matches!(self, Check::Info { .. } | Check::Report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub reference: f64,
    pub reference_provenance: String,
    pub check: Check,
    pub pass: bool,
}

impl Record {
    pub fn new(
        name: impl Into<String>,
        estimate: f64,
        standard_error: f64,
        reference: f64,
        reference_provenance: impl Into<String>,
        check: Check,
    ) -> Self {
        let pass = check.holds(estimate, standard_error, reference);
        Record {
            name: name.into(),
            estimate,
            standard_error,
            reference,
            reference_provenance: reference_provenance.into(),
            check,
            pass,
        }
    }

    /// Monte Carlo estimate against a reference value.
    pub fn within(
        name: impl Into<String>,
        est: Estimate,
        reference: f64,
        provenance: impl Into<String>,
        se_multiplier: f64,
        bias_budget: f64,
    ) -> Self {
        Record::new(
            name,
            est.mean,
            est.se,
            reference,
            provenance,
            Check::Within {
                se_multiplier,
                bias_budget,
            },
        )
    }

    pub fn at_least(
        name: impl Into<String>,
        value: f64,
        bound: f64,
        provenance: impl Into<String>,
    ) -> Self {
        Record::new(name, value, 0.0, bound, provenance, Check::AtLeast)
    }

    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        bound: f64,
        provenance: impl Into<String>,
    ) -> Self {
        Record::new(name, value, 0.0, bound, provenance, Check::AtMost)
    }

    pub fn report(name: impl Into<String>, value: f64, se: f64, what: impl Into<String>) -> Self {
        Record::new(name, value, se, 0.0, what, Check::Report)
    }

    /// A yes/no property, encoded as `1 ≥ 1` or `0 ≥ 1`.
    pub fn holds(name: impl Into<String>, ok: bool, provenance: impl Into<String>) -> Self {
        Record::new(
            name,
            if ok { 1.0 } else { 0.0 },
            0.0,
            1.0,
            provenance,
            Check::AtLeast,
        )
    }
}

/// Outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub runtime_s: f64,
    pub pass: bool,
    pub records: Vec<Record>,
    pub warnings: Vec<String>,
}

impl StatReport {
    pub fn new(experiment: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        StatReport {
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            seed,
            runtime_s: 0.0,
            pass: false,
            records: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
        self.refresh();
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = Record>) {
        self.records.extend(rs);
        self.refresh();
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    /// An empty report never passes.
    fn refresh(&mut self) {
        self.pass =
            !self.records.is_empty() && self.records.iter().all(|r| r.pass || !r.check.gates());
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass && r.check.gates())
    }

    pub fn record(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Pretty JSON with a fixed key order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_tolerance() {
        let est = Estimate {
            mean: 1.05,
            se: 0.01,
            n: 100,
        };
        assert!(Record::within("a", est, 1.0, "x", 3.0, 0.03).pass);
        assert!(!Record::within("a", est, 1.0, "x", 3.0, 0.01).pass);
    }

    #[test]
    fn info_records_do_not_gate() {
        let mut r = StatReport::new("e", "h", 1);
        assert!(!r.pass);
        r.push(Record::holds("ok", true, "x"));
        r.push(Record::new(
            "info",
            5.0,
            0.0,
            1.0,
            "x",
            Check::Info {
                se_multiplier: 3.0,
                bias_budget: 0.0,
            },
        ));
        assert!(r.pass);
        r.push(Record::report("diag", 7.0, 0.1, "x"));
        assert!(r.pass);
        r.push(Record::at_most("bad", 2.0, 1.0, "x"));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
        let back: StatReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
