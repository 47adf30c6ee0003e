//! Offline analysis of persisted run directories.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tonks_core::analysis::{self, CollapseInput, CollapseRegime, CollapseResult, EffectiveThermo, GridEnsemble};

use crate::output::{self, num};

/// Averages `n(k)` and `n(−k)` for every `k > 0` of a symmetric or
/// one-sided grid; unmatched positive momenta are kept as they are.
pub fn fold(k: &[f64], n: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let step = k.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
    let tol = if step.is_finite() { 1e-6 * step } else { 0.0 };
    let mut ks = Vec::new();
    let mut ns = Vec::new();
    for (p, &kp) in k.iter().enumerate() {
        if kp <= 0.0 {
            continue;
        }
        let value = match k.iter().position(|&q| (q + kp).abs() <= tol) {
            Some(q) => 0.5 * (n[p] + n[q]),
            None => n[p],
        };
        ks.push(kp);
        ns.push(value);
    }
    (ks, ns)
}

/// `nk_{flavor}_t{t}.csv` files of a run directory, sorted by `t`.
pub fn snapshot_files(dir: &Path, flavor: &str) -> Result<Vec<(usize, PathBuf)>> {
    let prefix = format!("nk_{flavor}_t");
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|s| s.to_str()) else { continue };
        if let Some(t) = name.strip_prefix(&prefix).and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(t) = t.parse::<usize>() {
                found.push((t, path));
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Collapses the snapshots of `dir` with `t > 0`.
pub fn collapse_dir(dir: &Path, flavor: &str, alpha: f64, regime: CollapseRegime, window: Option<(f64, f64)>) -> Result<CollapseResult> {
    let mut inputs = Vec::new();
    for (t, path) in snapshot_files(dir, flavor)? {
        if t == 0 {
            continue;
        }
        let (k, n) = output::read_columns(&path, output::NK_HEADER)?;
        let (momenta, values) = fold(&k, &n);
        inputs.push(CollapseInput { time: t as f64, momenta, values });
    }
    if inputs.len() < 3 {
        bail!("{}: need at least 3 {flavor} snapshots with t > 0, found {}", dir.display(), inputs.len());
    }
    Ok(analysis::scaling_collapse(&inputs, alpha, regime, window)?)
}

/// Writes the rescaled curves: `x` followed by one `y_t{t}` column per
/// snapshot.
pub fn write_collapse(path: &Path, times: &[usize], result: &CollapseResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x".to_owned()];
    header.extend(times.iter().map(|t| format!("y_t{t}")));
    w.write_record(&header)?;
    for (i, x) in result.abscissa.iter().enumerate() {
        let mut line = vec![num(*x)];
        line.extend(result.curves.iter().map(|c| num(c[i])));
        w.write_record(&line)?;
    }
    w.flush()?;
    Ok(())
}

/// Fits `(T_eff, μ_eff)` to a persisted fermionic distribution.
pub fn fit_thermo_file(path: &Path, hbar_eff: f64) -> Result<EffectiveThermo> {
    let (k, n) = output::read_columns(path, output::NK_HEADER)?;
    let ensemble = GridEnsemble::new(&k, hbar_eff);
    let n_target: f64 = n.iter().sum();
    let e_target: f64 = ensemble.energies().iter().zip(&n).map(|(e, n)| e * n).sum();
    let mut fit = analysis::fit_constraints(&ensemble, n_target, e_target)?;
    if let Some(t) = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.rsplit_once("_t"))
        .and_then(|(_, t)| t.parse().ok())
    {
        fit.kick_count = t;
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_averages_mirror_points() {
        let (k, n) = fold(&[-2.0, -1.0, 0.0, 1.0], &[4.0, 2.0, 9.0, 6.0]);
        assert_eq!(k, vec![1.0]);
        assert_eq!(n, vec![4.0]);
    }
}
