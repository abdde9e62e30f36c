use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use slotalloc_core::Cents;

pub fn euros(c: Cents) -> String {
    format!("{:.2}", c.as_euros())
}

pub fn euros_f64(cents: f64) -> String {
    format!("{:.2}", cents / 100.0)
}

pub fn fixed2(x: f64) -> String {
    format!("{x:.2}")
}

pub fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// File-name-safe form of an identifier.
pub fn slug(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
