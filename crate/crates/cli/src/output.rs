//! Fixed-format CSV and JSON writers. Headers are part of the file format.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const ENERGY_HEADER: [&str; 4] = ["kick", "kinetic_energy", "t_eff", "mu_eff"];
pub const NK_HEADER: [&str; 2] = ["k", "n"];
pub const G1_HEADER: [&str; 3] = ["r", "re_g1", "im_g1"];
pub const SCAN_HEADER: [&str; 7] = ["kick_strength", "anisotropy", "gamma", "gamma_se", "phase", "low_confidence", "error"];

pub fn nk_file(dir: &Path, flavor: &str, kick: usize) -> PathBuf {
    dir.join(format!("nk_{flavor}_t{kick}.csv"))
}

pub fn g1_file(dir: &Path, kick: usize) -> PathBuf {
    dir.join(format!("g1_t{kick}.csv"))
}

/// Full-precision shortest round-trip formatting.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_rows<const C: usize>(path: &Path, header: [&str; C], rows: impl IntoIterator<Item = [String; C]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_columns(path: &Path, header: [&str; 2], x: &[f64], y: &[f64]) -> Result<()> {
    write_rows(path, header, x.iter().zip(y).map(|(a, b)| [num(*a), num(*b)]))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Reads a two-column CSV with the given header.
pub fn read_columns(path: &Path, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        anyhow::bail!("{}: expected header {:?}, found {:?}", path.display(), header, found);
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        x.push(rec[0].trim().parse().with_context(|| format!("{}: bad number", path.display()))?);
        y.push(rec[1].trim().parse().with_context(|| format!("{}: bad number", path.display()))?);
    }
    Ok((x, y))
}
