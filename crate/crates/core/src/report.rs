//! Reports with a pass/fail table, written as JSON with 17 significant digits.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
            detail: format!("{value:e} <= {threshold:e}"),
        }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value >= threshold,
            value,
            threshold,
            detail: format!("{value:e} >= {threshold:e}"),
        }
    }

    pub fn flag(name: &str, pass: bool, detail: &str) -> Self {
        Self {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub result: R,
}

impl<R: Serialize> Report<R> {
    pub fn new<C: Serialize>(command: &str, config: &C, checks: Vec<Check>, result: R) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config: serde_json::to_value(config)?,
            pass: checks.iter().all(|c| c.pass),
            checks,
            result,
        })
    }

    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

/// Serialises with every float as `d.ddddddddddddddddde±x`; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                indent(level + 1, out);
                write_value(x, level + 1, out);
                if i + 1 < a.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(level, out);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                indent(level + 1, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, level + 1, out);
                if i + 1 < m.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(level, out);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        n: usize,
        s: &'static str,
        none: Option<f64>,
    }

    #[test]
    fn floats_have_seventeen_digits_and_parse_back() {
        let s = Sample {
            a: 0.1,
            b: vec![1.0 / 3.0, -2.5e-300, f64::NAN],
            n: 7,
            s: "x\"y",
            none: None,
        };
        let text = to_json(&s).unwrap();
        assert!(text.contains("1.0000000000000001e-1"));
        assert!(text.contains("\"n\": 7"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64().unwrap(), 0.1);
        assert_eq!(back["b"][0].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(back["b"][1].as_f64().unwrap(), -2.5e-300);
        assert!(back["b"][2].is_null());
        assert_eq!(back["s"], "x\"y");
    }

    #[test]
    fn checks_and_report() {
        let r = Report::new(
            "demo",
            &serde_json::json!({"k": 1}),
            vec![Check::at_most("small", 1e-12, 1e-9), Check::at_least("order", 3.0, 3.5)],
            0.0,
        )
        .unwrap();
        assert!(!r.pass);
        assert_eq!(r.failing().map(|c| c.name.as_str()).collect::<Vec<_>>(), ["order"]);
        assert_eq!(r.to_json().unwrap(), r.to_json().unwrap());
    }
}
