use std::fmt::Display;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use rrvalue_core::config::AnalysisConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn input(e: impl Display) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Everything needed to reproduce a report.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: serde_json::Value,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub lexicon_path: Option<String>,
    pub lexicon_sha256: String,
    pub seed: Option<u64>,
    pub resolved_config: Option<AnalysisConfig>,
}

/// A finished report in its three renderings.
pub struct Rendered {
    pub name: &'static str,
    pub json: serde_json::Value,
    pub table: String,
    pub csv: Option<String>,
}

pub fn emit(
    report: Rendered,
    manifest: &RunManifest,
    format: crate::Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let doc = serde_json::json!({ "manifest": manifest, report.name: report.json });
    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
        let write = |file: String, body: &str| {
            let path = dir.join(file);
            std::fs::write(&path, body).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
        };
        write(format!("{}.json", report.name), &json)?;
        if let Some(csv) = &report.csv {
            write(format!("{}.csv", report.name), csv)?;
        }
        let m = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
        write("manifest.json".into(), &m)?;
    }
    let text = match format {
        crate::Format::Json => json,
        crate::Format::Table => report.table,
        crate::Format::Csv => report
            .csv
            .ok_or_else(|| CliError::Input(format!("{} has no CSV rendering", report.name)))?,
    };
    print!("{text}");
    Ok(())
}

/// Left-aligned text table.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(c);
            if i + 1 < cells.len() {
                s.push_str(&" ".repeat(widths[i] - c.chars().count()));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(headers.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn csv_rows(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn sci(v: f64) -> String {
    format!("{v:.4e}")
}
