use std::fs;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};

/// Decimal text with 12 significant digits; `-inf`, `inf` and `nan` literally.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let text = if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').unwrap();
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    };
    if text == "-0" {
        "0".into()
    } else {
        text
    }
}

/// JSON number carrying the 12-digit rounding, or the literal as a string.
pub fn num(x: f64) -> Value {
    let text = fmt_num(x);
    match text.parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
        Some(n) if x.is_finite() => Value::Number(n),
        _ => Value::String(text),
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Invariant {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
}

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct ResultBundle {
    pub kind: &'static str,
    pub header: &'static str,
    pub rows: Vec<Vec<String>>,
    /// Nested summary → slices → cells, or the kind's equivalent.
    pub report: Map<String, Value>,
    pub invariants: Vec<Invariant>,
    pub provenance: Provenance,
}

impl ResultBundle {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }

    pub fn csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    fn provenance_json(&self) -> Value {
        json!({
            "config_hash": self.provenance.config_hash,
            "seed": self.provenance.seed,
            "version": self.provenance.version,
        })
    }

    fn invariants_json(&self) -> Value {
        Value::Array(
            self.invariants
                .iter()
                .map(|i| json!({"name": i.name, "passed": i.passed, "detail": i.detail}))
                .collect(),
        )
    }

    /// Summary without the per-cell detail; written next to the CSV.
    pub fn summary_json(&self) -> String {
        let mut top = Map::new();
        top.insert("kind".into(), json!(self.kind));
        top.insert("provenance".into(), self.provenance_json());
        top.insert("passed".into(), json!(self.passed()));
        top.insert("invariants".into(), self.invariants_json());
        if let Some(s) = self.report.get("summary") {
            let mut s = s.clone();
            if let Some(obj) = s.as_object_mut() {
                obj.remove("slices");
            }
            top.insert("summary".into(), s);
        }
        pretty(&Value::Object(top))
    }

    pub fn json(&self) -> String {
        let mut top = Map::new();
        top.insert("kind".into(), json!(self.kind));
        top.insert("provenance".into(), self.provenance_json());
        top.insert("passed".into(), json!(self.passed()));
        top.insert("invariants".into(), self.invariants_json());
        for (k, v) in &self.report {
            top.insert(k.clone(), v.clone());
        }
        pretty(&Value::Object(top))
    }

    /// Writes `<kind>.csv` plus `<kind>.summary.json`, or `<kind>.json`.
    pub fn write(&self, dir: &Path, format: Format) -> io::Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        match format {
            Format::Csv => {
                let csv = dir.join(format!("{}.csv", self.kind));
                fs::write(&csv, self.csv())?;
                let summary = dir.join(format!("{}.summary.json", self.kind));
                fs::write(&summary, self.summary_json())?;
                written.push(csv.display().to_string());
                written.push(summary.display().to_string());
            }
            Format::Json => {
                let path = dir.join(format!("{}.json", self.kind));
                fs::write(&path, self.json())?;
                written.push(path.display().to_string());
            }
        }
        Ok(written)
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}
