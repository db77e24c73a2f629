//! CSV emission and run manifests.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// `v` rounded to 12 significant digits, written in the shortest form that
/// reads back to the rounded value. Non-finite values become empty cells.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return String::new();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&rounded.abs()) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Input(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub params: Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, params: Value, seeds: Vec<u64>) -> Self {
        Self {
            command: command.into(),
            argv: std::env::args().collect(),
            params,
            seeds,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn finish(mut self, elapsed: Duration, primary: &Path) -> Result<(), CliError> {
        self.duration_seconds = elapsed.as_secs_f64();
        let path = Self::path_for(primary);
        write_file(&path, &crate::format::to_json(&self))
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.7219280948873623), "0.721928094887");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(0.1 + 0.2), "0.3");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1234567.891234567), "1234567.89123");
        assert_eq!(num(2.775557561562891e-17), "2.77555756156e-17");
        assert_eq!(num(f64::INFINITY), "");
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            RunManifest::path_for(Path::new("out/fig4.csv")),
            PathBuf::from("out/fig4.csv.manifest.json")
        );
    }

    #[test]
    fn csv_header_then_rows() {
        let text = csv(&["a", "b"], &[vec!["1".into(), String::new()]]).unwrap();
        assert_eq!(text, "a,b\n1,\n");
    }
}
