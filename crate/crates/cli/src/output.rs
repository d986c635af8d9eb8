//! CSV emission with a comment header echoing the resolved configuration.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const FORMAT_TAG: &str = "bgk-csv/1";

/// Writes CSV files into one output directory.
pub struct OutputDir {
    pub dir: PathBuf,
    header: String,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str, resolved: &[(String, String)]) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let mut header = format!("# format = {FORMAT_TAG}\n# command = {command}\n");
        for (k, v) in resolved {
            header.push_str(&format!("# {k} = {v}\n"));
        }
        Ok(Self { dir: dir.to_path_buf(), header })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `body` (header row included) after the comment header.
    pub fn write_csv(&self, name: &str, body: &str) -> io::Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, format!("{}{body}", self.header))?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, body: &str) -> io::Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, body)?;
        Ok(path)
    }
}

/// One failed check or error.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub check: String,
    pub detail: String,
}

impl Failure {
    pub fn new(check: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { check: check.into(), detail: detail.into() }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn failures_csv(failures: &[Failure]) -> String {
    let mut s = String::from("check,detail\n");
    for f in failures {
        s.push_str(&format!("{},{}\n", csv_field(&f.check), csv_field(&f.detail)));
    }
    s
}

/// Writes `failures.csv` with a format tag, without a config echo.
pub fn write_bare_failures(dir: &Path, command: &str, failures: &[Failure]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("failures.csv"),
        format!("# format = {FORMAT_TAG}\n# command = {command}\n{}", failures_csv(failures)),
    )
}

/// Joins rows of already formatted cells.
pub fn table(columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = columns.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
