//! Scenario configuration: INI-style sections of `key = value` lines.
//!
//! ```text
//! [domain]
//! backend = sphere-axisym    # or torus
//! dim_x = 2
//! resolution = 32            # one per torus axis, comma separated
//! t_nodes = 65
//!
//! [metric]
//! kind = sphere_product      # product_flat | twisted_flat | sphere_product | sphere_twist | csv
//! r = 1.0
//!
//! [slice]
//! p = 0.0
//!
//! [forcing]
//! p = 4
//! delta = 1e-2
//! c = auto
//! epsilon = auto
//!
//! [solver]
//! tolerance = 1e-10
//! max_iterations = 2000
//!
//! [output]
//! dir = out
//! format = json              # or text
//! csv = true
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Backend, DomainSpec};
use crate::sparse::SolverSettings;

pub const DEFAULT_P: u32 = 4;
pub const DEFAULT_DELTA: f64 = 1e-2;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricChoice {
    /// `n = dim (X x S^1)`
    ProductFlat {
        n: usize,
    },
    TwistedFlat {
        c: f64,
    },
    SphereProduct {
        r: f64,
    },
    SphereTwist {
        r: f64,
        beta: f64,
    },
    /// upper-triangle components of `h` per node of `X`
    Csv {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingConfig {
    pub p: u32,
    pub delta: f64,
    pub c: Choice,
    pub epsilon: Choice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Text,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Text => "txt",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub name: String,
    pub format: ReportFormat,
    pub csv: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub metric: MetricChoice,
    pub slice: f64,
    pub forcing: ForcingConfig,
    pub solver: SolverSettings,
    pub output: OutputConfig,
}

struct Entry {
    value: String,
    line: usize,
}

struct Sections {
    path: String,
    map: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("domain", &["backend", "dim_x", "resolution", "t_nodes"]),
    ("metric", &["kind", "n", "c", "r", "beta", "file"]),
    ("slice", &["p"]),
    ("forcing", &["p", "delta", "c", "epsilon"]),
    ("solver", &["tolerance", "max_iterations"]),
    ("output", &["dir", "name", "format", "csv"]),
];

fn lex(path: &str, text: &str) -> Result<Sections> {
    let mut map: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::config(path, line, "unterminated section header"))?
                .trim()
                .to_string();
            if !KNOWN.iter().any(|(n, _)| *n == name) {
                return Err(Error::config(
                    path,
                    line,
                    format!("unknown section [{name}]"),
                ));
            }
            if map.contains_key(&name) {
                return Err(Error::config(
                    path,
                    line,
                    format!("duplicate section [{name}]"),
                ));
            }
            map.insert(name.clone(), (line, BTreeMap::new()));
            current = Some(name);
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            return Err(Error::config(
                path,
                line,
                format!("expected key = value, found `{s}`"),
            ));
        };
        let Some(sec) = &current else {
            return Err(Error::config(path, line, "key outside of any section"));
        };
        let key = k.trim().to_string();
        let known = KNOWN
            .iter()
            .find(|(n, _)| n == sec)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !known.contains(&key.as_str()) {
            return Err(Error::config(
                path,
                line,
                format!("unknown key `{key}` in [{sec}]"),
            ));
        }
        let entries = &mut map.get_mut(sec).expect("section").1;
        if entries.contains_key(&key) {
            return Err(Error::config(
                path,
                line,
                format!("duplicate key `{key}` in [{sec}]"),
            ));
        }
        entries.insert(
            key,
            Entry {
                value: v.trim().to_string(),
                line,
            },
        );
    }
    Ok(Sections {
        path: path.to_string(),
        map,
    })
}

impl Sections {
    fn require_section(&self, sec: &str) -> Result<()> {
        if self.map.contains_key(sec) {
            Ok(())
        } else {
            Err(Error::config(
                &self.path,
                0,
                format!("missing section [{sec}]"),
            ))
        }
    }

    fn raw(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.map.get(sec).and_then(|s| s.1.get(key))
    }

    fn section_line(&self, sec: &str) -> usize {
        self.map.get(sec).map_or(0, |s| s.0)
    }

    fn get<T: std::str::FromStr>(&self, sec: &str, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(sec, key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                Error::config(
                    &self.path,
                    e.line,
                    format!("[{sec}] {key} = `{}` is not {what}", e.value),
                )
            }),
        }
    }

    fn required<T: std::str::FromStr>(&self, sec: &str, key: &str, what: &str) -> Result<T> {
        self.get(sec, key, what)?.ok_or_else(|| {
            Error::config(
                &self.path,
                self.section_line(sec),
                format!("[{sec}] is missing `{key}`"),
            )
        })
    }

    fn choice(&self, sec: &str, key: &str) -> Result<Choice> {
        match self.raw(sec, key) {
            None => Ok(Choice::Auto),
            Some(e) if e.value.eq_ignore_ascii_case("auto") => Ok(Choice::Auto),
            Some(_) => Ok(Choice::Fixed(self.required(
                sec,
                key,
                "a number or `auto`",
            )?)),
        }
    }

    fn range_error(&self, sec: &str, key: &str, message: &str) -> Error {
        let line = self
            .raw(sec, key)
            .map_or(self.section_line(sec), |e| e.line);
        Error::config(&self.path, line, format!("[{sec}] {key}: {message}"))
    }
}

/// Parse configuration text; `path` is used for diagnostics and to resolve
/// relative metric files.
pub fn parse_config_str(path: &Path, text: &str) -> Result<RunConfig> {
    let p = path.display().to_string();
    let s = lex(&p, text)?;
    s.require_section("domain")?;
    s.require_section("metric")?;

    let backend = match s.raw("domain", "backend").map(|e| e.value.as_str()) {
        None | Some("torus") => Backend::Torus,
        Some("sphere-axisym") => Backend::SphereAxisym,
        Some(other) => {
            return Err(s.range_error(
                "domain",
                "backend",
                &format!("unknown backend `{other}` (torus, sphere-axisym)"),
            ))
        }
    };
    let dim_x: usize = s.get("domain", "dim_x", "an integer")?.unwrap_or(2);
    let resolution = match s.raw("domain", "resolution") {
        None => return Err(s.range_error("domain", "resolution", "missing")),
        Some(e) => e
            .value
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                Error::config(
                    &p,
                    e.line,
                    format!(
                        "[domain] resolution = `{}` is not a list of integers",
                        e.value
                    ),
                )
            })?,
    };
    let resolution = if backend == Backend::Torus && resolution.len() == 1 {
        vec![resolution[0]; dim_x]
    } else {
        resolution
    };
    let t_nodes: usize = s.required("domain", "t_nodes", "an integer")?;
    let domain = DomainSpec {
        backend,
        dim_x,
        resolution,
        t_nodes,
    };
    crate::grid::build_domain(&domain)
        .map_err(|e| Error::config(&p, s.section_line("domain"), e.to_string()))?;

    let kind: String = s.required("metric", "kind", "a metric name")?;
    let positive = |key: &str| -> Result<f64> {
        let v: f64 = s.required("metric", key, "a number")?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(s.range_error("metric", key, "must be positive"));
        }
        Ok(v)
    };
    let metric = match kind.as_str() {
        "product_flat" => {
            let n: usize = s.get("metric", "n", "an integer")?.unwrap_or(dim_x + 1);
            if n != dim_x + 1 {
                return Err(s.range_error(
                    "metric",
                    "n",
                    &format!("must equal dim_x + 1 = {}", dim_x + 1),
                ));
            }
            MetricChoice::ProductFlat { n }
        }
        "twisted_flat" => {
            let c: f64 = s.required("metric", "c", "a number")?;
            if !(c >= 0.0 && c.is_finite()) {
                return Err(s.range_error("metric", "c", "twisted_flat requires c >= 0"));
            }
            MetricChoice::TwistedFlat { c }
        }
        "sphere_product" => MetricChoice::SphereProduct { r: positive("r")? },
        "sphere_twist" => {
            let beta: f64 = s.required("metric", "beta", "a number")?;
            if !beta.is_finite() {
                return Err(s.range_error("metric", "beta", "must be finite"));
            }
            MetricChoice::SphereTwist {
                r: positive("r")?,
                beta,
            }
        }
        "csv" => {
            let file: String = s.required("metric", "file", "a path")?;
            let rel = PathBuf::from(&file);
            let full = if rel.is_absolute() {
                rel
            } else {
                path.parent().unwrap_or(Path::new(".")).join(rel)
            };
            if !full.exists() {
                return Err(s.range_error(
                    "metric",
                    "file",
                    &format!("{} does not exist", full.display()),
                ));
            }
            MetricChoice::Csv { path: full }
        }
        other => return Err(s.range_error("metric", "kind", &format!("unknown metric `{other}`"))),
    };
    let sphere_metric = matches!(
        metric,
        MetricChoice::SphereProduct { .. } | MetricChoice::SphereTwist { .. }
    );
    let torus_metric = matches!(
        metric,
        MetricChoice::ProductFlat { .. } | MetricChoice::TwistedFlat { .. }
    );
    if (sphere_metric && backend != Backend::SphereAxisym)
        || (torus_metric && backend != Backend::Torus)
    {
        return Err(s.range_error(
            "metric",
            "kind",
            &format!("`{kind}` does not live on backend {}", backend.as_str()),
        ));
    }

    let slice: f64 = s.get("slice", "p", "a number")?.unwrap_or(0.0);

    let p: u32 = s
        .get("forcing", "p", "a positive integer")?
        .unwrap_or(DEFAULT_P);
    if p == 0 {
        return Err(s.range_error("forcing", "p", "must be at least 1"));
    }
    let delta: f64 = s
        .get("forcing", "delta", "a number")?
        .unwrap_or(DEFAULT_DELTA);
    if !(delta > 0.0) {
        return Err(s.range_error("forcing", "delta", "must be positive"));
    }
    let c = s.choice("forcing", "c")?;
    if let Choice::Fixed(v) = c {
        if !(v > 0.0) {
            return Err(s.range_error("forcing", "c", "must be positive"));
        }
    }
    let epsilon = s.choice("forcing", "epsilon")?;
    if let Choice::Fixed(v) = epsilon {
        if !(v > 0.0 && v < 1.0) {
            return Err(s.range_error("forcing", "epsilon", "must lie in (0, 1)"));
        }
    }

    let tolerance: f64 = s
        .get("solver", "tolerance", "a number")?
        .unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance > 0.0) {
        return Err(s.range_error("solver", "tolerance", "must be positive"));
    }
    let max_iterations: usize = s
        .get("solver", "max_iterations", "an integer")?
        .unwrap_or(DEFAULT_MAX_ITERATIONS);

    let default_name = path
        .file_stem()
        .map(|x| x.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let format = match s.raw("output", "format").map(|e| e.value.as_str()) {
        None | Some("json") => ReportFormat::Json,
        Some("text") => ReportFormat::Text,
        Some(other) => {
            return Err(s.range_error(
                "output",
                "format",
                &format!("unknown format `{other}` (json, text)"),
            ))
        }
    };
    let output = OutputConfig {
        dir: s
            .get::<String>("output", "dir", "a path")?
            .unwrap_or_else(|| "out".into())
            .into(),
        name: s.get("output", "name", "a name")?.unwrap_or(default_name),
        format,
        csv: s.get("output", "csv", "true or false")?.unwrap_or(true),
    };

    Ok(RunConfig {
        domain,
        metric,
        slice,
        forcing: ForcingConfig {
            p,
            delta,
            c,
            epsilon,
        },
        solver: SolverSettings {
            tolerance,
            max_iterations,
        },
        output,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config_str(path, &text)
}
