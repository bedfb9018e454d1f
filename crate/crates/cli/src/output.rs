use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use follicle_core::report::Table;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory; every file gets the same comment header.
pub struct Output {
    dir: PathBuf,
    preamble: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn create(dir: &Path, command: &str, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            preamble: vec![
                format!("follicle {VERSION}"),
                format!("config-sha256 {hash}"),
                format!("command {command}"),
            ],
            written: Vec::new(),
        })
    }

    pub fn preamble(&self) -> &[String] {
        &self.preamble
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let body = table.to_csv(&self.preamble);
        self.write(name, &body)
    }

    pub fn svg(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, body)
    }

    /// `key = value` report with the header as `#` comments.
    pub fn report(&mut self, name: &str, report: &Report) -> Result<()> {
        let mut body = String::new();
        for line in &self.preamble {
            let _ = writeln!(body, "# {line}");
        }
        body.push_str(&report.0);
        self.write(name, &body)
    }
}

/// Accumulates `key = value` lines.
#[derive(Default)]
pub struct Report(String);

impl Report {
    pub fn num(&mut self, key: &str, v: f64) {
        let _ = writeln!(self.0, "{key} = {}", toml_float(v));
    }

    pub fn int(&mut self, key: &str, v: usize) {
        let _ = writeln!(self.0, "{key} = {v}");
    }

    pub fn flag(&mut self, key: &str, v: bool) {
        let _ = writeln!(self.0, "{key} = {v}");
    }

    pub fn text(&mut self, key: &str, v: &str) {
        let _ = writeln!(self.0, "{key} = \"{}\"", v.replace('\\', "\\\\").replace('"', "\\\""));
    }

    pub fn list(&mut self, key: &str, vs: &[f64]) {
        let items: Vec<String> = vs.iter().map(|&v| toml_float(v)).collect();
        let _ = writeln!(self.0, "{key} = [{}]", items.join(", "));
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.0, "\n[{name}]");
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn toml_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}
