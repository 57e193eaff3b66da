//! Artifact files: CSV with a `#` JSON metadata line, JSON, Markdown and SVG.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing artifact {0}")]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(fs_err(dir))?;
    }
    std::fs::write(path, text).map_err(fs_err(path))
}

/// Columns of floats in fixed scientific notation, so that identical inputs
/// give byte-identical files.
pub fn csv_string(meta: &serde_json::Value, header: &[&str], columns: &[&[f64]]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(header).expect("in-memory write");
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| format!("{:.17e}", c[i]))).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii");
    format!("# {meta}\n{body}")
}

pub fn write_csv(path: &Path, meta: &serde_json::Value, header: &[&str], columns: &[&[f64]]) -> Result<(), IoError> {
    write_text(path, &csv_string(meta, header, columns))
}

/// Metadata line and columns of a CSV written by `write_csv`.
pub fn read_csv(path: &Path) -> Result<(serde_json::Value, Vec<String>, Vec<Vec<f64>>), IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(fs_err(path))?;
    let bad = |msg: String| IoError::Format { path: path.to_path_buf(), msg };
    let (first, rest) = text.split_once('\n').ok_or_else(|| bad("empty file".into()))?;
    let meta = first.strip_prefix("# ").ok_or_else(|| bad("no metadata line".into()))?;
    let meta: serde_json::Value = serde_json::from_str(meta).map_err(|e| bad(e.to_string()))?;
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (c, v) in cols.iter_mut().zip(rec.iter()) {
            c.push(v.parse::<f64>().map_err(|e| bad(e.to_string()))?);
        }
    }
    Ok((meta, header, cols))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| IoError::Format { path: path.to_path_buf(), msg: e.to_string() })?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(fs_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Format { path: path.to_path_buf(), msg: e.to_string() })
}
