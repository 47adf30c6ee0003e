//! One-particle density matrices of the evolved Gaussian state.
//!
//! Both flavors are stored as `matrix[(i, j)] = ⟨a_i† a_j⟩`. For fermions
//! this is the complex conjugate of the single-particle form
//! `C = U·V·diag(n)·Vᵀ·U†`. For hard-core bosons the Jordan-Wigner string
//! between `i` and `j` turns each entry into a ratio of determinants:
//!
//! ```text
//! ρ^B_ij = { det[I + G·O_i·O_j + G·O_i·A·O_j] − det[I + G·O_i·O_j] } / Z,
//! ```
//!
//! with `G` the evolved Boltzmann matrix, `O_l` the sign-string diagonal and
//! `A` the single-entry matrix at `(i, j)`. Dividing by
//! `Z = det(I + G)` turns every determinant into `det(I + C·(X − I))`, which
//! is what the occupation-form and row-update paths evaluate.

use std::ops::Range;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolvedThermal;
use crate::linalg::{self, log_det, CMatrix, LogDet};
use crate::scalar::{cabs, lit, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Fermionic,
    Bosonic,
}

impl Flavor {
    pub fn label(self) -> &'static str {
        match self {
            Flavor::Fermionic => "fermion",
            Flavor::Bosonic => "boson",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Opdm<T: Real> {
    pub flavor: Flavor,
    pub matrix: CMatrix<T>,
    pub kick_count: usize,
}

impl<T: Real> Opdm<T> {
    pub fn n_sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> T {
        linalg::trace(&self.matrix).re
    }

    pub fn diagonal(&self) -> Vec<T> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn hermiticity_error(&self) -> T {
        linalg::hermiticity_error(&self.matrix)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> T {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(lit(0.5));
        herm.symmetric_eigenvalues().iter().fold(T::max_value().unwrap(), |m, &x| m.min(x))
    }

    /// Hermiticity, trace and diagonal-range checks.
    pub fn check(&self, n_particles: T, tol: T) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::NonHermitian(to_f64(herm)));
        }
        let trace = self.trace();
        if (trace - n_particles).abs() > tol * lit(100.0) {
            return Err(Error::InvalidParameter(format!(
                "trace {} differs from particle number {}",
                to_f64(trace),
                to_f64(n_particles)
            )));
        }
        for (i, z) in self.matrix.diagonal().iter().enumerate() {
            if z.im.abs() > tol || z.re < -tol || z.re > T::one() + tol {
                return Err(Error::InvalidParameter(format!("diagonal entry {i} = {z:?} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Jordan-Wigner string operators: `O_l` is `−1` on every site before `l`
/// and `+1` from `l` on (zero-based), `A_ij` has a single unit entry.
#[derive(Clone, Copy, Debug)]
pub struct SignStringMatrices {
    pub n_sites: usize,
}

impl SignStringMatrices {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites }
    }

    pub fn sign(&self, l: usize, site: usize) -> i8 {
        if site < l {
            -1
        } else {
            1
        }
    }

    pub fn string<T: Real>(&self, l: usize) -> Vec<T> {
        (0..self.n_sites).map(|s| lit(self.sign(l, s) as f64)).collect()
    }

    /// Diagonal of `O_i·O_j`: `−1` on `[min(i,j), max(i,j))`.
    pub fn product<T: Real>(&self, i: usize, j: usize) -> Vec<T> {
        (0..self.n_sites).map(|s| lit((self.sign(i, s) * self.sign(j, s)) as f64)).collect()
    }

    pub fn single_entry<T: Real>(&self, i: usize, j: usize) -> DMatrix<T> {
        let mut a = DMatrix::zeros(self.n_sites, self.n_sites);
        a[(i, j)] = T::one();
        a
    }
}

/// `⟨c_i† c_j⟩ = conj(C)_{ij}`.
pub fn fermionic_opdm<T: Real>(state: &EvolvedThermal<T>) -> Opdm<T> {
    let c = state.occupation_form();
    Opdm { flavor: Flavor::Fermionic, matrix: c.map(|z| z.conj()), kick_count: state.kick_count }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BosonicMethod {
    /// Projector path at zero temperature, row updates otherwise.
    Auto,
    /// Two determinants per entry.
    Naive,
    RowUpdate,
    /// Slater-determinant path; zero temperature only.
    Projector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BosonicOptions {
    pub method: BosonicMethod,
    /// Columns between full refactorizations on the row-update path; `0`
    /// disables refactorization.
    pub refactor_every: usize,
}

impl Default for BosonicOptions {
    fn default() -> Self {
        Self { method: BosonicMethod::Auto, refactor_every: 32 }
    }
}

pub fn bosonic_opdm<T: Real>(state: &EvolvedThermal<T>, options: &BosonicOptions) -> Result<Opdm<T>> {
    match options.method {
        BosonicMethod::Naive => bosonic_opdm_naive(state),
        BosonicMethod::Projector => bosonic_opdm_ground(state),
        BosonicMethod::RowUpdate => bosonic_opdm_rows(state, options.refactor_every),
        BosonicMethod::Auto if state.is_ground_state() => bosonic_opdm_ground(state),
        BosonicMethod::Auto => bosonic_opdm_rows(state, options.refactor_every),
    }
}

/// Largest Boltzmann log-weight for which the literal `G`-form is used.
/// Beyond it `I + G·X` becomes ill-conditioned and the naive path switches
/// to the equivalent occupation form `det(I + C·(X − I))`.
pub const BOLTZMANN_LOG_WEIGHT_LIMIT: f64 = 13.815510557964274;

enum NaiveKernel<T: Real> {
    Boltzmann { g: CMatrix<T>, log_partition: T },
    Occupation { c: CMatrix<T> },
}

impl<T: Real> NaiveKernel<T> {
    fn new(state: &EvolvedThermal<T>) -> Self {
        if let (Some(w), Some(log_partition)) = (&state.log_weights, state.log_partition) {
            let max_w = w.iter().fold(T::min_value().unwrap(), |m, &x| m.max(x));
            if to_f64(max_w) <= BOLTZMANN_LOG_WEIGHT_LIMIT {
                let weights: Vec<T> = w.iter().map(|&x| x.exp()).collect();
                return NaiveKernel::Boltzmann { g: linalg::weighted_outer(&state.orbitals, &weights), log_partition };
            }
        }
        NaiveKernel::Occupation { c: state.occupation_form() }
    }

    /// `det(M1) − det(M2)` in units of `Z`.
    fn entry(&self, i: usize, j: usize) -> Result<Complex<T>> {
        let (lo, hi) = (i.min(j), i.max(j));
        let (m, n) = match self {
            NaiveKernel::Boltzmann { g, .. } => (g, g.nrows()),
            NaiveKernel::Occupation { c } => (c, c.nrows()),
        };
        // M2 = I + G·D  or  I + C·(D − I), D = O_i·O_j
        let mut m2 = m.clone();
        match self {
            NaiveKernel::Boltzmann { .. } => {
                for s in lo..hi {
                    m2.column_mut(s).neg_mut();
                }
            }
            NaiveKernel::Occupation { .. } => {
                m2.fill(Complex::new(T::zero(), T::zero()));
                for s in lo..hi {
                    let col = m.column(s) * Complex::new(lit::<T>(-2.0), T::zero());
                    m2.set_column(s, &col);
                }
            }
        }
        for d in 0..n {
            m2[(d, d)] += Complex::new(T::one(), T::zero());
        }
        let mut m1 = m2.clone();
        let extra = m.column(i).clone_owned();
        let mut target = m1.column_mut(j);
        target += extra;
        let (d1, d2) = (log_det(m1), log_det(m2));
        let shift = match self {
            NaiveKernel::Boltzmann { log_partition, .. } => *log_partition,
            NaiveKernel::Occupation { .. } => T::zero(),
        };
        if !to_f64(d1.ln_abs).is_finite() && !d1.is_zero() || !to_f64(d2.ln_abs).is_finite() && !d2.is_zero() {
            return Err(Error::DeterminantRange(format!("entry ({i}, {j})")));
        }
        Ok(difference(d1, d2, shift))
    }
}

/// `exp(d1 − shift) − exp(d2 − shift)` with the larger exponent factored out.
fn difference<T: Real>(d1: LogDet<T>, d2: LogDet<T>, shift: T) -> Complex<T> {
    let common = if d1.is_zero() {
        d2.ln_abs
    } else if d2.is_zero() {
        d1.ln_abs
    } else {
        d1.ln_abs.max(d2.ln_abs)
    };
    let diff = d1.value_shifted(common) - d2.value_shifted(common);
    diff.scale((common - shift).exp())
}

/// Determinant formula evaluated literally, two `𝒩×𝒩` determinants per
/// off-diagonal entry. `O(𝒩⁵)`; reference implementation.
pub fn bosonic_opdm_naive<T: Real>(state: &EvolvedThermal<T>) -> Result<Opdm<T>> {
    let n = state.n_sites();
    let rows: Vec<usize> = (0..n).collect();
    let values = bosonic_naive_rows(state, &rows)?;
    let mut matrix = CMatrix::from_fn(n, n, |i, j| values[i][j]);
    set_fermionic_diagonal(state, &mut matrix);
    Ok(Opdm { flavor: Flavor::Bosonic, matrix, kick_count: state.kick_count })
}

/// Selected full rows by the naive formula; diagonal entries are left zero.
pub fn bosonic_naive_rows<T: Real>(state: &EvolvedThermal<T>, rows: &[usize]) -> Result<Vec<Vec<Complex<T>>>> {
    let kernel = NaiveKernel::new(state);
    let n = state.n_sites();
    rows.par_iter()
        .map(|&i| {
            (0..n)
                .map(|j| if i == j { Ok(Complex::new(T::zero(), T::zero())) } else { kernel.entry(i, j) })
                .collect()
        })
        .collect()
}

/// Row `i` of the bosonic OPDM by rank-one Schur-complement updates.
///
/// Moving `j` one site away from `i` flips one sign of `O_i·O_j`, a rank-one
/// change of `K = I − 2·C·P` (`P` the projector on the string). Each step
/// updates `K⁻¹C` by Sherman-Morrison and `det K` by the pivot, so a row
/// costs `O(𝒩³)` instead of `O(𝒩⁴)`. Every `refactor_every` steps the
/// state is rebuilt from `C` by a Woodbury solve to stop round-off growth.
pub fn bosonic_opdm_row<T: Real>(state: &EvolvedThermal<T>, i: usize, refactor_every: usize) -> Result<Vec<Complex<T>>> {
    let c = state.occupation_form();
    let n = c.nrows();
    if i >= n {
        return Err(Error::InvalidParameter(format!("row {i} outside 0..{n}")));
    }
    let mut row = vec![Complex::new(T::zero(), T::zero()); n];
    let right = sweep(&c, i, true, refactor_every)?;
    for (p, v) in right.into_iter().enumerate().skip(1) {
        row[i + p] = v;
    }
    let left = sweep(&c, i, false, refactor_every)?;
    for (p, v) in left.into_iter().enumerate().skip(1) {
        row[i - p] = v;
    }
    row[i] = Complex::new(c[(i, i)].re, T::zero());
    Ok(row)
}

/// Full matrix from right-going sweeps; the lower triangle follows from
/// Hermiticity. Rows are computed in parallel.
pub fn bosonic_opdm_rows<T: Real>(state: &EvolvedThermal<T>, refactor_every: usize) -> Result<Opdm<T>> {
    let c = state.occupation_form();
    let n = c.nrows();
    let upper: Vec<Vec<Complex<T>>> =
        (0..n).into_par_iter().map(|i| sweep(&c, i, true, refactor_every)).collect::<Result<_>>()?;
    let mut matrix = CMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (p, &v) in row.iter().enumerate().skip(1) {
            matrix[(i, i + p)] = v;
            matrix[(i + p, i)] = v.conj();
        }
    }
    set_fermionic_diagonal(state, &mut matrix);
    Ok(Opdm { flavor: Flavor::Bosonic, matrix, kick_count: state.kick_count })
}

/// Consecutive full rows of the bosonic OPDM.
#[derive(Clone, Debug)]
pub struct OpdmBand<T: Real> {
    pub first_row: usize,
    /// `rows[r][j] = ρ_{first_row + r, j}`.
    pub rows: Vec<Vec<Complex<T>>>,
    pub kick_count: usize,
}

/// A band of rows, enough for the correlation function near the center of
/// the box. Pairs with both ends outside the band are missing, so averages
/// over the band weight the central region more than the full matrix does.
pub fn bosonic_opdm_band<T: Real>(state: &EvolvedThermal<T>, rows: Range<usize>, refactor_every: usize) -> Result<OpdmBand<T>> {
    let n = state.n_sites();
    if rows.is_empty() || rows.end > n {
        return Err(Error::InvalidParameter(format!("band {rows:?} outside 0..{n}")));
    }
    let first_row = rows.start;
    let rows: Vec<usize> = rows.collect();
    let values = rows
        .par_iter()
        .map(|&i| bosonic_opdm_row(state, i, refactor_every))
        .collect::<Result<Vec<_>>>()?;
    Ok(OpdmBand { first_row, rows: values, kick_count: state.kick_count })
}

fn set_fermionic_diagonal<T: Real>(state: &EvolvedThermal<T>, matrix: &mut CMatrix<T>) {
    let n = state.n_sites();
    for i in 0..n {
        let density = state
            .orbitals
            .row(i)
            .iter()
            .zip(&state.occupations)
            .fold(T::zero(), |acc, (z, &occ)| acc + occ * z.norm_sqr());
        matrix[(i, i)] = Complex::new(density, T::zero());
    }
}

/// Pivots `|1 − 2W_ss|` below this trigger an immediate refactorization:
/// the Sherman-Morrison step would amplify accumulated round-off by `1/|d|`.
const SMALL_PIVOT: f64 = 1e-2;

/// Column-major dense working block.
struct Block<T: Real> {
    m: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Block<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> Complex<T> {
        self.data[c * self.m + r]
    }
}

/// Sweep away from site `i` (to the right or to the left), returning
/// `out[p] = ρ_{i, i ± p} = det K·(K⁻¹C)_{i±p, i}` for `p ≥ 1`.
///
/// The block is `C` restricted to the sites on that side of `i`, indexed by
/// distance `p` from `i`. For the entry at distance `p` the string covers
/// local indices `[0, p)` on the right and `[1, p)` on the left.
fn sweep<T: Real>(c: &CMatrix<T>, i: usize, right: bool, refactor_every: usize) -> Result<Vec<Complex<T>>> {
    let n = c.nrows();
    let m = if right { n - i } else { i + 1 };
    let site = |p: usize| if right { i + p } else { i - p };
    let original = Block { m, data: (0..m * m).map(|k| c[(site(k % m), site(k / m))]).collect() };
    let mut w = Block { m, data: original.data.clone() };
    let start = if right { 0 } else { 1 };
    let mut out = vec![Complex::new(T::zero(), T::zero()); m];
    let mut ln_abs = T::zero();
    let mut phase = Complex::new(T::one(), T::zero());
    let mut pivot_col = Vec::with_capacity(m);
    let two = lit::<T>(2.0);

    for p in 1..m {
        let s = p - 1;
        if s >= start {
            let d = Complex::new(T::one(), T::zero()) - w.at(s, s).scale(two);
            let dn = cabs(d);
            if dn == T::zero() {
                return Err(Error::DeterminantRange(format!("singular string update at row {i}, step {s}")));
            }
            ln_abs += dn.ln();
            phase *= d.unscale(dn);
            let included = s + 1 - start;
            if refactor_every > 0 && (included % refactor_every == 0 || dn < lit(SMALL_PIVOT)) {
                let (la, ph) = refactor(&original, &mut w, start, s)?;
                ln_abs = la;
                phase = ph;
            } else {
                pivot_col.clear();
                pivot_col.extend((s + 1..m).map(|a| w.at(a, s)));
                let inv = Complex::new(two, T::zero()) / d;
                let mut update = |b: usize| {
                    let f = w.at(s, b) * inv;
                    let col = &mut w.data[b * m + s + 1..b * m + m];
                    for (x, &y) in col.iter_mut().zip(&pivot_col) {
                        *x += y * f;
                    }
                };
                update(0);
                for b in (s + 1).max(1)..m {
                    update(b);
                }
            }
        }
        out[p] = w.at(p, 0) * phase.scale(ln_abs.exp());
    }
    Ok(out)
}

/// Rebuild `W = K⁻¹C` on rows `(s, m)` and columns `{0} ∪ (s, m)` with the
/// string on `[start, s]`, returning `ln|det K|` and its phase.
fn refactor<T: Real>(original: &Block<T>, w: &mut Block<T>, start: usize, s: usize) -> Result<(T, Complex<T>)> {
    let m = original.m;
    let k = s + 1 - start;
    let cols: Vec<usize> = std::iter::once(0).chain(s + 1..m).collect();
    let rows: Vec<usize> = (s + 1..m).collect();
    let two = Complex::new(lit::<T>(2.0), T::zero());
    let a = CMatrix::from_fn(k, k, |r, q| {
        let delta = if r == q { Complex::new(T::one(), T::zero()) } else { Complex::new(T::zero(), T::zero()) };
        delta - original.at(start + r, start + q) * two
    });
    let b_s_cols = CMatrix::from_fn(k, cols.len(), |r, q| original.at(start + r, cols[q]));
    let b_rows_s = CMatrix::from_fn(rows.len(), k, |r, q| original.at(rows[r], start + q));
    let det = log_det(a.clone());
    if det.is_zero() {
        return Err(Error::DeterminantRange(format!("singular string block of size {k}")));
    }
    let x = a
        .lu()
        .solve(&b_s_cols)
        .ok_or_else(|| Error::DeterminantRange(format!("singular string block of size {k}")))?;
    let correction = linalg::mul_cc(&b_rows_s, &x);
    for (q, &col) in cols.iter().enumerate() {
        for (r, &row) in rows.iter().enumerate() {
            w.data[col * m + row] = original.at(row, col) + correction[(r, q)] * two;
        }
    }
    Ok((det.ln_abs, det.phase))
}

/// Zero-temperature bosonic OPDM from Slater determinants.
///
/// With `Φ` the `𝒩×N` occupied orbitals and `P_l = [O_l·Φ | e_l]`, the
/// off-diagonal entries are `(N+1)×(N+1)` determinants `det(P_j†·P_i)`.
/// The `N×N` block `Φ†·O_i·O_j·Φ = I − 2·Σ_{s in string} φ_s†φ_s` is
/// accumulated site by site along each row.
pub fn bosonic_opdm_ground<T: Real>(state: &EvolvedThermal<T>) -> Result<Opdm<T>> {
    if !state.is_ground_state() {
        return Err(Error::InvalidParameter("projector path requires zero temperature".into()));
    }
    let occupied: Vec<usize> = (0..state.occupations.len()).filter(|&c| state.occupations[c] > lit(0.5)).collect();
    let n = state.n_sites();
    let np = occupied.len();
    let phi = CMatrix::from_fn(n, np, |r, c| state.orbitals[(r, occupied[c])]);
    let upper: Vec<Vec<Complex<T>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut q = CMatrix::<T>::zeros(np, np);
            let mut row = vec![Complex::new(T::zero(), T::zero()); n];
            for j in i + 1..n {
                let r = j - 1;
                for b in 0..np {
                    for a in 0..np {
                        q[(a, b)] += phi[(r, a)].conj() * phi[(r, b)];
                    }
                }
                let mut p = CMatrix::zeros(np + 1, np + 1);
                for b in 0..np {
                    for a in 0..np {
                        p[(a, b)] = -q[(a, b)].scale(lit(2.0));
                    }
                    p[(b, b)] += Complex::new(T::one(), T::zero());
                    // O_j[i] = −1 for i < j; O_i[j] = +1
                    p[(b, np)] = -phi[(i, b)].conj();
                    p[(np, b)] = phi[(j, b)];
                }
                row[j] = log_det(p).value_shifted(T::zero());
            }
            row
        })
        .collect();
    let mut matrix = CMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for j in i + 1..n {
            matrix[(i, j)] = row[j];
            matrix[(j, i)] = row[j].conj();
        }
    }
    set_fermionic_diagonal(state, &mut matrix);
    Ok(Opdm { flavor: Flavor::Bosonic, matrix, kick_count: state.kick_count })
}
