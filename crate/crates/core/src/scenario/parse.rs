//! Strict scenario parsing with located diagnostics.
//!
//! The document is read twice: the top level first, with `params` kept as raw
//! text, then `params` against the parameter set of the named experiment.
//! Positions reported by the second pass are mapped back onto the whole
//! document.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::error::Category;
use serde_json::value::RawValue;

use super::params::{EventCount, RANGE_TAG};
use super::{
    DelayedChoiceParams, DoubleSlitParams, EraserParams, ExperimentKind, ExperimentParams,
    MachZehnderParams, NeutronParams, OutputKind, PhotoelectricParams, Scenario,
    WhichPathParams,
};
use crate::optics::PolarizerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    /// Malformed JSON.
    Syntax,
    /// Input is not UTF-8.
    Encoding,
    UnknownKey,
    Missing,
    Duplicate,
    UnknownExperiment,
    Range,
    Type,
    /// Well-formed and in range, but inconsistent.
    Invalid,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::Syntax => "SYNTAX",
            DiagnosticCode::Encoding => "ENCODING",
            DiagnosticCode::UnknownKey => "UNKNOWN_KEY",
            DiagnosticCode::Missing => "MISSING",
            DiagnosticCode::Duplicate => "DUPLICATE",
            DiagnosticCode::UnknownExperiment => "UNKNOWN_EXPERIMENT",
            DiagnosticCode::Range => "RANGE",
            DiagnosticCode::Type => "TYPE",
            DiagnosticCode::Invalid => "INVALID",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a scenario was rejected, and where. `path` is a dotted key path
/// (`$` for the document itself); `line` and `column` are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at {} (line {}, column {}): {}",
            self.code, self.path, self.line, self.column, self.message
        )
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Deserialize)]
#[serde(rename = "scenario", deny_unknown_fields)]
struct Document<'a> {
    name: String,
    experiment: ExperimentKind,
    #[serde(borrow)]
    params: &'a RawValue,
    n_events: EventCount,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    outputs: Option<Vec<OutputKind>>,
}

/// Parsing context: the whole document, for mapping offsets to positions.
struct Source<'a> {
    text: &'a str,
}

impl<'a> Source<'a> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        let before = &self.text.as_bytes()[..offset];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
        (line, column)
    }

    /// Byte offset of `slice`, which must borrow from the document.
    fn offset_of(&self, slice: &str) -> usize {
        slice.as_ptr() as usize - self.text.as_ptr() as usize
    }

    /// Byte offset of a 1-based (line, column) position within `slice`.
    fn offset_in(&self, slice: &str, line: usize, column: usize) -> usize {
        let mut offset = 0;
        for (i, l) in slice.split_inclusive('\n').enumerate() {
            if i + 1 == line {
                let col_bytes = l
                    .char_indices()
                    .nth(column.saturating_sub(1))
                    .map_or(l.len(), |(b, _)| b);
                return self.offset_of(slice) + offset + col_bytes;
            }
            offset += l.len();
        }
        self.offset_of(slice) + slice.len()
    }

    /// Location of the first `"key"` inside `within`, or of `within` itself.
    fn key_position(&self, within: &str, key: &str) -> (usize, usize) {
        let quoted = format!("\"{key}\"");
        let start = self.offset_of(within);
        self.position(within.find(&quoted).map_or(start, |i| start + i))
    }

    fn invalid(&self, within: &str, path: &str, key: &str, message: impl Into<String>) -> Diagnostic {
        let (line, column) = self.key_position(within, key);
        Diagnostic {
            code: DiagnosticCode::Invalid,
            path: path.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Deserializes `slice` (a sub-slice of the document) and reports errors
    /// against the whole document with key paths under `prefix`.
    fn deserialize<T>(&self, slice: &'a str, prefix: &str) -> Result<T, Diagnostic>
    where
        T: Deserialize<'a>,
    {
        let mut de = serde_json::Deserializer::from_str(slice);
        let value = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| self.diagnose(slice, prefix, e.path().to_string(), e.into_inner()))?;
        de.end()
            .map_err(|e| self.diagnose(slice, prefix, ".".into(), e))?;
        Ok(value)
    }

    fn diagnose(&self, slice: &str, prefix: &str, inner: String, err: serde_json::Error) -> Diagnostic {
        let full = err.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        let mut path = join_path(prefix, if inner == "." { "" } else { &inner });
        let code = classify(&err, &message, &path);
        // Errors about a named key point at that key rather than its parent.
        if let Some(key) = backticked(&message) {
            if matches!(
                code,
                DiagnosticCode::Missing | DiagnosticCode::UnknownKey | DiagnosticCode::Duplicate
            ) && !path.ends_with(&format!(".{key}"))
                && path != key
            {
                path = join_path(&path, key);
            }
        }
        let message = message.strip_prefix(RANGE_TAG).unwrap_or(&message).to_string();
        let (line, column) = self.position(self.offset_in(slice, err.line().max(1), err.column().max(1)));
        Diagnostic {
            code,
            path: if path.is_empty() { "$".into() } else { path },
            line,
            column,
            message,
        }
    }
}

fn join_path(prefix: &str, rest: &str) -> String {
    match (prefix.is_empty(), rest.is_empty()) {
        (true, _) => rest.to_string(),
        (false, true) => prefix.to_string(),
        (false, false) => format!("{prefix}.{rest}"),
    }
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

fn classify(err: &serde_json::Error, message: &str, path: &str) -> DiagnosticCode {
    match err.classify() {
        Category::Syntax | Category::Eof | Category::Io => DiagnosticCode::Syntax,
        Category::Data => {
            if message.starts_with(RANGE_TAG) {
                DiagnosticCode::Range
            } else if message.starts_with("unknown field") {
                DiagnosticCode::UnknownKey
            } else if message.starts_with("missing field") {
                DiagnosticCode::Missing
            } else if message.starts_with("duplicate field") {
                DiagnosticCode::Duplicate
            } else if message.starts_with("unknown variant") && path == "experiment" {
                DiagnosticCode::UnknownExperiment
            } else if message.starts_with("invalid type") {
                DiagnosticCode::Type
            } else if message.starts_with("invalid value: integer") {
                DiagnosticCode::Range
            } else {
                DiagnosticCode::Invalid
            }
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !name.starts_with('.')
}

/// Parses and validates a scenario document. Never panics on malformed
/// input; every rejection carries a code, key path and position.
pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario, Diagnostic> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let src = Source {
            text: std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or(""),
        };
        let (line, column) = src.position(e.valid_up_to());
        Diagnostic {
            code: DiagnosticCode::Encoding,
            path: "$".into(),
            line,
            column,
            message: format!("input is not valid UTF-8: {e}"),
        }
    })?;
    let src = Source { text };
    let doc: Document = src.deserialize(text, "")?;

    if !valid_name(&doc.name) {
        return Err(src.invalid(
            text,
            "name",
            "name",
            "name must be 1-64 characters from [A-Za-z0-9._-], not starting with '.'",
        ));
    }

    let outputs = match doc.outputs {
        None => OutputKind::ALL.to_vec(),
        Some(list) => {
            let mut sorted = list.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != list.len() {
                let (line, column) = src.key_position(text, "outputs");
                return Err(Diagnostic {
                    code: DiagnosticCode::Duplicate,
                    path: "outputs".into(),
                    line,
                    column,
                    message: "an output is requested more than once".into(),
                });
            }
            if sorted.is_empty() {
                return Err(src.invalid(text, "outputs", "outputs", "at least one output is required"));
            }
            sorted
        }
    };

    let raw = doc.params.get();
    let params = parse_params(&src, doc.experiment, raw)?;
    Ok(Scenario {
        name: doc.name,
        params,
        n_events: doc.n_events.0,
        seed: doc.seed,
        outputs,
    })
}

fn typed<'a, T: DeserializeOwned>(src: &Source<'a>, raw: &'a str) -> Result<T, Diagnostic> {
    src.deserialize::<T>(raw, "params")
}

fn parse_params<'a>(
    src: &Source<'a>,
    kind: ExperimentKind,
    raw: &'a str,
) -> Result<ExperimentParams, Diagnostic> {
    let geometry_check = |g: &super::GeometryParams| {
        g.geometry()
            .map(|_| ())
            .map_err(|e| src.invalid(raw, "params.geometry", "geometry", e.to_string()))
    };
    Ok(match kind {
        ExperimentKind::DoubleSlit => {
            let p: DoubleSlitParams = typed(src, raw)?;
            geometry_check(&p.geometry)?;
            ExperimentParams::DoubleSlit(p)
        }
        ExperimentKind::WhichPath => {
            let p: WhichPathParams = typed(src, raw)?;
            geometry_check(&p.geometry)?;
            ExperimentParams::WhichPath(p)
        }
        ExperimentKind::NeutronAbsorber => {
            let p: NeutronParams = typed(src, raw)?;
            match (p.psi_left, p.psi_right) {
                (None, None) => {}
                (Some(l), Some(r)) => {
                    let norm = l.0 * l.0 + r.0 * r.0;
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(src.invalid(
                            raw,
                            "params.psi_left",
                            "psi_left",
                            format!("psi_left² + psi_right² must be 1, got {norm}"),
                        ));
                    }
                }
                (Some(_), None) | (None, Some(_)) => {
                    let key = if p.psi_left.is_some() { "psi_left" } else { "psi_right" };
                    return Err(src.invalid(
                        raw,
                        &format!("params.{key}"),
                        key,
                        "psi_left and psi_right must be given together",
                    ));
                }
            }
            ExperimentParams::NeutronAbsorber(p)
        }
        ExperimentKind::MachZehnder => ExperimentParams::MachZehnder(typed::<MachZehnderParams>(src, raw)?),
        ExperimentKind::DelayedChoice => {
            ExperimentParams::DelayedChoice(typed::<DelayedChoiceParams>(src, raw)?)
        }
        ExperimentKind::QuantumEraser => {
            let mut p: EraserParams = typed(src, raw)?;
            geometry_check(&p.geometry)?;
            if p.post_select == Some(true) && p.eraser.is_none() {
                return Err(src.invalid(
                    raw,
                    "params.post_select",
                    "post_select",
                    "post_select requires an eraser polarizer",
                ));
            }
            p.eraser = p.eraser.map(PolarizerSpec::normalized);
            ExperimentParams::QuantumEraser(p)
        }
        ExperimentKind::Photoelectric => {
            let p: PhotoelectricParams = typed(src, raw)?;
            p.detector().map_err(|e| {
                src.invalid(raw, "params.density_of_states", "density_of_states", e.to_string())
            })?;
            if p.omega.max.0 <= p.omega.min.0 {
                return Err(src.invalid(raw, "params.omega.max", "max", "omega.max must exceed omega.min"));
            }
            ExperimentParams::Photoelectric(p)
        }
    })
}
