//! Phase-diagram sweep over `(K, ε)` with checkpoint and resume.
//!
//! Finished points are appended to `phase_scan.csv` as they complete. A
//! resumed scan reads that file, skips the points already present, and at
//! the end rewrites it sorted by `(K, ε)` together with `phase_heatmap.csv`.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use tonks_core::analysis::{Phase, PhasePoint};

use crate::config::{RunConfig, ScanConfig};
use crate::output::{self, num};
use crate::runner;

pub const SCAN_FILE: &str = "phase_scan.csv";
pub const HEATMAP_FILE: &str = "phase_heatmap.csv";

/// One row of the scan table; failed points carry only `error`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub kick_strength: f64,
    pub anisotropy: f64,
    pub point: Option<PhasePoint>,
    pub error: Option<String>,
}

impl ScanRow {
    fn record(&self) -> [String; 7] {
        match &self.point {
            Some(p) => [
                num(self.kick_strength),
                num(self.anisotropy),
                num(p.gamma),
                num(p.gamma_se),
                phase_label(p.phase).to_owned(),
                p.low_confidence.to_string(),
                String::new(),
            ],
            None => [
                num(self.kick_strength),
                num(self.anisotropy),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                self.error.clone().unwrap_or_default(),
            ],
        }
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        let f = |i: usize| -> Result<f64> { rec[i].parse().with_context(|| format!("bad number {:?}", &rec[i])) };
        let (kick_strength, anisotropy) = (f(0)?, f(1)?);
        if !rec[6].is_empty() {
            return Ok(Self { kick_strength, anisotropy, point: None, error: Some(rec[6].to_owned()) });
        }
        let phase = match &rec[4] {
            "localized" => Phase::Localized,
            "critical" => Phase::Critical,
            "delocalized" => Phase::Delocalized,
            other => bail!("unknown phase {other:?}"),
        };
        let point = PhasePoint {
            strength: kick_strength,
            anisotropy,
            gamma: f(2)?,
            gamma_se: f(3)?,
            phase,
            low_confidence: rec[5].parse().with_context(|| format!("bad flag {:?}", &rec[5]))?,
        };
        Ok(Self { kick_strength, anisotropy, point: Some(point), error: None })
    }

    fn key(&self) -> (u64, u64) {
        (self.kick_strength.to_bits(), self.anisotropy.to_bits())
    }
}

pub fn phase_label(p: Phase) -> &'static str {
    match p {
        Phase::Localized => "localized",
        Phase::Critical => "critical",
        Phase::Delocalized => "delocalized",
    }
}

/// Evolves one grid point and classifies it.
pub fn scan_point(base: &RunConfig, strength: f64, anisotropy: f64) -> Result<PhasePoint> {
    let mut config = base.clone();
    config.schedule.kick_strength = strength;
    config.schedule.anisotropy = anisotropy;
    config.validate()?;
    let series = runner::energy_series(&config)?;
    let fit = runner::fit_gamma(&config, &series)?;
    Ok(PhasePoint::new(strength, anisotropy, fit))
}

fn read_checkpoint(path: &Path) -> Result<Vec<ScanRow>> {
    let mut r = csv::ReaderBuilder::new().flexible(false).from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != output::SCAN_HEADER {
        bail!("{}: unexpected header {:?}", path.display(), header);
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        match rec {
            Ok(rec) => rows.push(ScanRow::parse(&rec)?),
            // a torn last line from an interrupted write
            Err(e) => log::warn!("ignoring unreadable checkpoint line: {e}"),
        }
    }
    Ok(rows)
}

/// Runs the scan; `resume` keeps points already in the output directory.
pub fn phase_scan(base: &RunConfig, grid: &ScanConfig, out: &Path, resume: bool) -> Result<Vec<ScanRow>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(SCAN_FILE);
    let mut done: BTreeMap<(u64, u64), ScanRow> = BTreeMap::new();
    if resume && path.exists() {
        for row in read_checkpoint(&path)? {
            done.insert(row.key(), row);
        }
        log::info!("resuming with {} finished points", done.len());
        // drop any torn line before appending
        output::write_rows(&path, output::SCAN_HEADER, done.values().map(ScanRow::record))?;
    } else {
        output::write_rows(&path, output::SCAN_HEADER, std::iter::empty())?;
    }
    let mut todo = Vec::new();
    for &k in &grid.strengths {
        for &e in &grid.anisotropies {
            let row = ScanRow { kick_strength: k, anisotropy: e, point: None, error: None };
            if !done.contains_key(&row.key()) {
                todo.push((k, e));
            }
        }
    }
    let file = OpenOptions::new().append(true).open(&path)?;
    let writer = Mutex::new(csv::Writer::from_writer(file));
    let fresh: Vec<ScanRow> = todo
        .par_iter()
        .map(|&(k, e)| -> Result<ScanRow> {
            let row = match scan_point(base, k, e) {
                Ok(p) => ScanRow { kick_strength: k, anisotropy: e, point: Some(p), error: None },
                Err(err) => {
                    log::warn!("point K={k} ε={e} failed: {err:#}");
                    ScanRow { kick_strength: k, anisotropy: e, point: None, error: Some(format!("{err:#}")) }
                }
            };
            let mut w = writer.lock().unwrap();
            w.write_record(row.record())?;
            w.flush()?;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    drop(writer);
    for row in fresh {
        done.insert(row.key(), row);
    }
    let mut rows: Vec<ScanRow> = done
        .into_values()
        .filter(|r| grid.strengths.contains(&r.kick_strength) && grid.anisotropies.contains(&r.anisotropy))
        .collect();
    rows.sort_by(|a, b| a.kick_strength.total_cmp(&b.kick_strength).then(a.anisotropy.total_cmp(&b.anisotropy)));
    output::write_rows(&path, output::SCAN_HEADER, rows.iter().map(ScanRow::record))?;
    write_heatmap(&out.join(HEATMAP_FILE), grid, &rows)?;
    Ok(rows)
}

/// `γ` as a matrix: one row per anisotropy, one column per kick strength.
fn write_heatmap(path: &Path, grid: &ScanConfig, rows: &[ScanRow]) -> Result<()> {
    let mut ks = grid.strengths.clone();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let mut es = grid.anisotropies.clone();
    es.sort_by(f64::total_cmp);
    es.dedup();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["anisotropy".to_owned()];
    header.extend(ks.iter().map(|&k| format!("K={}", num(k))));
    w.write_record(&header)?;
    for &e in &es {
        let mut line = vec![num(e)];
        for &k in &ks {
            let gamma = rows
                .iter()
                .find(|r| r.kick_strength == k && r.anisotropy == e)
                .and_then(|r| r.point.as_ref())
                .map_or(String::new(), |p| num(p.gamma));
            line.push(gamma);
        }
        w.write_record(&line)?;
    }
    w.flush()?;
    Ok(())
}
