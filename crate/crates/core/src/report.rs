//! Deterministic report output: numbers rounded to 12 significant digits,
//! keys in sorted order, wall time kept in a separate footer file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{Map, Number, Value};

use crate::config::ReportFormat;
use crate::error::{Error, Result};
use crate::scenario::{RunFields, RunReport};

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float")
}

fn normalise(v: Value, path: &str) -> Result<Value> {
    Ok(match v {
        Value::Null => {
            return Err(Error::Numerical(format!(
                "report field `{path}` is not finite"
            )))
        }
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().expect("f64"));
            Value::Number(Number::from_f64(x).expect("finite"))
        }
        Value::Array(a) => Value::Array(
            a.into_iter()
                .enumerate()
                .map(|(i, x)| normalise(x, &format!("{path}[{i}]")))
                .collect::<Result<_>>()?,
        ),
        Value::Object(m) => {
            let mut out = Map::new();
            for (k, x) in m {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                out.insert(k, normalise(x, &p)?);
            }
            Value::Object(out)
        }
        other => other,
    })
}

fn report_value(report: &RunReport) -> Result<Value> {
    let v = serde_json::to_value(report)
        .map_err(|e| Error::Numerical(format!("report serialisation: {e}")))?;
    normalise(v, "")
}

pub fn to_json(report: &RunReport) -> Result<String> {
    let v = report_value(report)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).map_err(|e| Error::Numerical(format!("report parse: {e}")))
}

fn flatten(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(x, &p, out);
            }
        }
        Value::Array(a) if a.is_empty() => out.push(format!("{prefix} = []")),
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(x, &format!("{prefix}[{i}]"), out);
            }
        }
        Value::String(s) => out.push(format!("{prefix} = {s}")),
        other => out.push(format!("{prefix} = {other}")),
    }
}

/// One `dotted.key = value` line per report field.
pub fn to_text(report: &RunReport) -> Result<String> {
    let v = report_value(report)?;
    let mut lines = vec![];
    flatten(&v, "", &mut lines);
    let mut s = lines.join("\n");
    s.push('\n');
    Ok(s)
}

pub fn render(report: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Text => to_text(report),
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write `<dir>/<name>.report.<ext>`, the timing footer and, if asked, the
/// CSV dumps. Returns the paths written.
pub fn emit_report(
    report: &RunReport,
    fields: &RunFields,
    wall_time: Duration,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let out = &report.config.output;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let name = &out.name;
    let mut written = vec![];
    let main = dir.join(format!("{name}.report.{}", out.format.extension()));
    write(&main, &render(report, out.format)?)?;
    written.push(main);
    let footer = dir.join(format!("{name}.timing.txt"));
    write(
        &footer,
        &format!("wall_time_s = {:.3}\n", wall_time.as_secs_f64()),
    )?;
    written.push(footer);
    if out.csv {
        let dumps = [
            ("u", &fields.u),
            ("r_exact", &fields.r_exact),
            ("r_chain", &fields.r_chain),
            ("r_bound", &fields.r_bound),
        ];
        for (label, f) in dumps {
            if let Some(f) = f {
                let p = dir.join(format!("{name}.{label}.csv"));
                write(&p, &f.to_csv(label))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}
