//! JSON report pieces. Every scalar and check names what it certifies.

use serde_json::{json, Map, Value};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub anchor: &'static str,
    pub value: f64,
    pub bound: f64,
    /// `"<="`, `">="`, `"<"` or `"true"`.
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    pub fn le(name: &'static str, anchor: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            anchor,
            value,
            bound,
            relation: "<=",
            passed: value <= bound,
        }
    }

    pub fn ge(name: &'static str, anchor: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            anchor,
            value,
            bound,
            relation: ">=",
            passed: value >= bound,
        }
    }

    pub fn lt(name: &'static str, anchor: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            anchor,
            value,
            bound,
            relation: "<",
            passed: value < bound,
        }
    }

    pub fn holds(name: &'static str, anchor: &'static str, ok: bool) -> Self {
        Self {
            name,
            anchor,
            value: f64::from(u8::from(ok)),
            bound: 1.0,
            relation: "true",
            passed: ok,
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "anchor": self.anchor,
            "value": self.value,
            "bound": self.bound,
            "relation": self.relation,
            "passed": self.passed,
        })
    }
}

/// Report under construction.
#[derive(Debug, Default)]
pub struct Report {
    scalars: Map<String, Value>,
    pub checks: Vec<Check>,
    extra: Map<String, Value>,
}

impl Report {
    pub fn scalar(&mut self, name: &str, anchor: &str, value: f64) {
        self.scalars.insert(
            name.to_string(),
            json!({ "value": value, "anchor": anchor }),
        );
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn section(&mut self, name: &str, v: Value) {
        self.extra.insert(name.to_string(), v);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn finish(self, mode: &str, config: Value) -> Value {
        let passed = self.passed();
        let mut top = Map::new();
        top.insert("schema".into(), json!(SCHEMA));
        top.insert("mode".into(), json!(mode));
        top.insert("config".into(), config);
        top.insert("scalars".into(), Value::Object(self.scalars));
        top.insert(
            "checks".into(),
            Value::Array(self.checks.iter().map(Check::to_json).collect()),
        );
        for (k, v) in self.extra {
            top.insert(k, v);
        }
        top.insert("passed".into(), json!(passed));
        Value::Object(top)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_check_fails_report() {
        let mut r = Report::default();
        r.check(Check::le("x", "demo", 1.0, 2.0));
        assert!(r.passed());
        r.check(Check::ge("y", "demo", 1.0, 2.0));
        assert!(!r.passed());
        let v = r.finish("stokes", json!({}));
        assert_eq!(v["schema"], 1);
        assert_eq!(v["passed"], false);
        assert_eq!(v["checks"][1]["relation"], ">=");
    }
}
