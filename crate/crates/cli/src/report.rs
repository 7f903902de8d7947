//! JSON and CSV serialization of experiment reports.
//!
//! Both formats use the field names of [`ErrorReport`] in declaration order.
//! Floating-point values are written with 17 significant digits
//! (`{:.16e}`), which round-trips every `f64` exactly. Undefined values are
//! `null` in JSON and empty cells in CSV.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use amm_core::ErrorReport;
use serde::Serialize;
use serde_json::{Map, Value};

pub use amm_core::REPORT_SCHEMA_VERSION;

/// Columns of the CSV header, identical to the JSON object keys.
pub const REPORT_FIELDS: [&str; 37] = [
    "schema_version",
    "n",
    "n_requested",
    "r",
    "algorithm",
    "estimator",
    "sampler",
    "generator",
    "trials",
    "seed",
    "matrix_seed",
    "target_norm_sq",
    "mean_sq_error",
    "mean_sq_error_std_error",
    "predicted_sq_error",
    "relative_sq_error",
    "relative_sq_error_std_error",
    "bias_norm_sq",
    "bias_max_z",
    "bias_within_5se_fraction",
    "per_entry_variance_min",
    "per_entry_variance_max",
    "per_entry_variance_mean",
    "per_entry_sq_error_min",
    "per_entry_sq_error_max",
    "per_entry_sq_error_mean",
    "predicted_per_entry_sq_error",
    "flatness_max_deviation",
    "flatness_max_std_error",
    "time_rotate_s",
    "time_partial_product_s",
    "time_inverse_s",
    "time_total_s",
    // appended by the CLI
    "padded",
    "relative_predicted_sq_error",
    "strict_serial",
    "generator_note",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format '{other}' (expected json or csv)")),
        }
    }
}

/// A report plus the run context the CLI adds.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct CliReport {
    #[serde(flatten)]
    pub report: ErrorReport,
    /// True when `n_requested` was zero-padded up to `n`.
    pub padded: bool,
    /// `predicted_sq_error / ||AB||_F^2`, undefined for a zero product.
    pub relative_predicted_sq_error: Option<f64>,
    pub strict_serial: bool,
    pub generator_note: String,
}

impl CliReport {
    pub fn new(report: ErrorReport, strict_serial: bool) -> Self {
        let relative_predicted_sq_error =
            (report.target_norm_sq > 0.0).then(|| report.predicted_sq_error / report.target_norm_sq);
        let padded = report.n != report.n_requested;
        let generator_note = if padded {
            format!("{}x{} block zero-padded to {}x{}", report.n_requested, report.n_requested, report.n, report.n)
        } else {
            String::new()
        };
        Self { report, padded, relative_predicted_sq_error, strict_serial, generator_note }
    }
}

fn to_object<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value).expect("reports serialize") {
        Value::Object(map) => map,
        _ => unreachable!("reports are structs"),
    }
}

fn fmt_number(n: &serde_json::Number) -> String {
    if n.is_f64() {
        format!("{:.16e}", n.as_f64().unwrap())
    } else {
        n.to_string()
    }
}

fn write_json_value(out: &mut String, value: &Value, indent: usize) {
    let pad = "  ".repeat(indent + 1);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&fmt_number(n)),
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write_json_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                let _ = write!(out, "{pad}{}: ", serde_json::to_string(k).unwrap());
                write_json_value(out, v, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// Pretty JSON with floats at 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = String::new();
    write_json_value(&mut out, &serde_json::to_value(value).expect("reports serialize"), 0);
    out.push('\n');
    out
}

fn csv_cell(value: &Value) -> String {
    let raw = match value {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => fmt_number(n),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

/// Header row plus one row per object; columns follow the first object.
pub fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let objects: Vec<Map<String, Value>> = rows.iter().map(to_object).collect();
    let mut out = String::new();
    let Some(first) = objects.first() else {
        return out;
    };
    let header: Vec<&String> = first.keys().collect();
    out.push_str(&header.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","));
    out.push('\n');
    for obj in &objects {
        let cells: Vec<String> = header.iter().map(|k| csv_cell(obj.get(*k).unwrap_or(&Value::Null))).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Renders reports: a single JSON object for one report, an array for
/// several; CSV always gets a header and one row per report.
pub fn render_reports(reports: &[CliReport], format: Format) -> String {
    match (format, reports) {
        (Format::Json, [single]) => to_json(single),
        (Format::Json, many) => to_json(&many),
        (Format::Csv, rows) => to_csv(rows),
    }
}

/// Writes one report to `path`.
pub fn write_report(report: &CliReport, format: Format, path: &Path) -> io::Result<()> {
    fs::write(path, render_reports(std::slice::from_ref(report), format))
}
