use std::collections::BTreeMap;
use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One asserted quantity with the tolerance it is held to.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, threshold, pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, threshold, pass: value >= threshold }
    }

    /// Boolean condition recorded as `1 >= 1` or `0 >= 1`.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(x_label: &str, y_label: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x_label: x_label.into(), y_label: y_label.into(), x, y }
    }

    /// CSV with header `x_label,y_label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([&self.x_label, &self.y_label])?;
        for (a, b) in self.x.iter().zip(&self.y) {
            w.write_record([a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Series>,
    pub checks: Vec<Check>,
    pub config_hash: String,
    pub seed: u64,
    /// Wall time; excluded from the JSON so reports stay byte-identical.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn new(suite: &str, config_hash: String, seed: u64) -> Self {
        Self {
            suite: suite.into(),
            pass: true,
            metrics: BTreeMap::new(),
            series: BTreeMap::new(),
            checks: Vec::new(),
            config_hash,
            seed,
            elapsed: Duration::ZERO,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn series(&mut self, name: &str, series: Series) {
        self.series.insert(name.into(), series);
    }

    pub fn check(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_check_fails_report() {
        let mut r = SuiteReport::new("x", "h".into(), 1);
        r.check(Check::at_most("a", 1.0, 2.0));
        assert!(r.pass);
        r.check(Check::at_least("b", 1.0, 2.0));
        assert!(!r.pass);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["checks"][1]["relation"], ">=");
        assert!(json.get("elapsed").is_none());
    }

    #[test]
    fn series_csv() {
        let s = Series::new("t", "D", vec![0.0, 1.0], vec![2.0, 1.5]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,D\n0,2\n1,1.5\n");
    }
}
