//! Canonical JSON and CSV renderings of result bundles.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use super::ResultBundle;
use crate::experiments::ScreenPattern;
use crate::montecarlo::{Histogram, RunSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}`, expected json or csv")),
        }
    }
}

/// A file produced by [`serialize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    /// `<scenario-name>.<output>.<ext>`
    pub file_name: String,
    pub contents: Vec<u8>,
}

/// Canonical JSON: object keys sorted, two-space indentation, floats with
/// 17 significant digits, trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("in-memory values serialize");
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    out.into_bytes()
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => write!(out, "{u}").unwrap(),
            (_, Some(i), _) => write!(out, "{i}").unwrap(),
            (_, _, Some(f)) => write!(out, "{f:.16e}").unwrap(),
            _ => unreachable!("a JSON number is u64, i64 or f64"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (k, item)) in entries.into_iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// Parses a bundle written by [`serialize`] in JSON format.
pub fn parse_bundle(bytes: &[u8]) -> serde_json::Result<ResultBundle> {
    serde_json::from_slice(bytes)
}

fn csv_bytes<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.serialize(row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub(crate) fn pattern_csv(p: &ScreenPattern) -> Vec<u8> {
    csv_bytes(
        &["position", "intensity"],
        p.positions.iter().zip(&p.intensities),
    )
}

pub(crate) fn histogram_csv(h: &Histogram) -> Vec<u8> {
    csv_bytes(
        &["bin_left", "bin_right", "count"],
        h.bin_edges.windows(2).zip(&h.counts).map(|(e, c)| (e[0], e[1], c)),
    )
}

fn summary_csv(s: &RunSummary) -> Vec<u8> {
    let mut rows: Vec<(String, String)> = vec![
        ("n_events".into(), s.n_events.to_string()),
        ("seed".into(), s.seed.to_string()),
    ];
    if let Some(v) = s.empirical_visibility {
        rows.push(("empirical_visibility".into(), v.to_string()));
    }
    if let Some(v) = s.chi_square {
        rows.push(("chi_square".into(), v.to_string()));
    }
    if let Some(v) = s.degrees_of_freedom {
        rows.push(("degrees_of_freedom".into(), v.to_string()));
    }
    rows.extend(s.metrics.iter().map(|(k, v)| (k.clone(), v.to_string())));
    csv_bytes(&["key", "value"], rows)
}

/// Renders `bundle`. JSON yields one `<name>.bundle.json` document; CSV
/// yields one table per pattern, histogram and summary, plus the scenario
/// echo as `<name>.scenario.json`.
pub fn serialize(bundle: &ResultBundle, format: Format) -> Vec<Artifact> {
    let name = &bundle.scenario.name;
    let artifact = |output: &str, ext: &str, contents: Vec<u8>| Artifact {
        file_name: format!("{name}.{output}.{ext}"),
        contents,
    };
    match format {
        Format::Json => vec![artifact("bundle", "json", to_canonical_json(bundle))],
        Format::Csv => {
            let mut out = vec![artifact(
                "scenario",
                "json",
                bundle.scenario.canonical_json().into_bytes(),
            )];
            for p in &bundle.patterns {
                let output = format!("analytic_pattern-{}", p.name);
                out.push(artifact(&output, "csv", pattern_csv(&p.pattern)));
            }
            for h in &bundle.histograms {
                let output = format!("histogram-{}", h.name);
                out.push(artifact(&output, "csv", histogram_csv(&h.histogram)));
            }
            if let Some(s) = &bundle.summary {
                out.push(artifact("summary", "csv", summary_csv(s)));
            }
            out
        }
    }
}
