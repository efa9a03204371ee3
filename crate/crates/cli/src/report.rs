//! Output envelopes: json, csv and plot-ready text, plus the version sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

pub const FORMAT_VERSION: &str = "thinlab-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plotdata,
}

/// One `(x, y)` series.
pub struct PlotBlock {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotBlock {
    pub fn new(name: impl Into<String>, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        PlotBlock {
            name: name.into(),
            points: points.into_iter().collect(),
        }
    }
}

pub struct Report {
    pub command: String,
    /// Exit 0 when true, 2 otherwise.
    pub decided: bool,
    pub result: Value,
    pub plots: Vec<PlotBlock>,
    /// Native CSV form, when the result has one.
    pub csv: Option<String>,
}

impl Report {
    pub fn new(command: &str, decided: bool, result: Value) -> Self {
        Report {
            command: command.to_string(),
            decided,
            result,
            plots: Vec::new(),
            csv: None,
        }
    }

    pub fn plot(mut self, block: PlotBlock) -> Self {
        self.plots.push(block);
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut top = Map::new();
                top.insert("format_version".into(), json!(FORMAT_VERSION));
                top.insert("command".into(), json!(self.command));
                match &self.result {
                    Value::Object(m) => top.extend(m.clone()),
                    other => {
                        top.insert("result".into(), other.clone());
                    }
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(top)).unwrap();
                s.push('\n');
                s
            }
            Format::Csv => match &self.csv {
                Some(c) => c.clone(),
                None => {
                    let mut s = String::from("block,x,y\n");
                    for b in &self.plots {
                        for (x, y) in &b.points {
                            writeln!(s, "{},{x},{y}", b.name).unwrap();
                        }
                    }
                    s
                }
            },
            Format::Plotdata => {
                let mut s = format!("# format_version: {FORMAT_VERSION}\n# command: {}\n", self.command);
                for b in &self.plots {
                    writeln!(s, "\n# block: {}\n# x y", b.name).unwrap();
                    for (x, y) in &b.points {
                        writeln!(s, "{x} {y}").unwrap();
                    }
                }
                s
            }
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Write `text` to `path` together with its version sidecar.
pub fn write_artifact(path: &Path, text: &str, command: &str, format: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    let meta = json!({
        "format_version": FORMAT_VERSION,
        "tool": "thinlab",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "format": format,
    });
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("cannot write {}", side.display()))?;
    Ok(())
}

/// Print or write the report; returns the exit code.
pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<i32> {
    let text = report.render(format);
    match out {
        Some(p) => {
            let f = match format {
                Format::Json => "json",
                Format::Csv => "csv",
                Format::Plotdata => "plotdata",
            };
            write_artifact(p, &text, &report.command, f)?
        }
        None => print!("{text}"),
    }
    Ok(if report.decided { 0 } else { 2 })
}
