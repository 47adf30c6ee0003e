//! Dense complex helpers on top of nalgebra.
//!
//! Complex products are routed through split real/imaginary parts so the
//! real GEMM kernels (matrixmultiply for `f32`/`f64`) do the heavy lifting.

use nalgebra::{Complex, DMatrix};

use crate::scalar::{cabs, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;

pub fn split<T: Real>(m: &CMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

pub fn join<T: Real>(re: &DMatrix<T>, im: &DMatrix<T>) -> CMatrix<T> {
    re.zip_map(im, Complex::new)
}

pub fn to_complex<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// `a · b` for complex operands.
pub fn mul_cc<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    join(&re, &im)
}

/// `a · b` with real `a`.
pub fn mul_rc<T: Real>(a: &DMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let (br, bi) = split(b);
    join(&(a * &br), &(a * &bi))
}

/// `a · b` with real `b`.
pub fn mul_cr<T: Real>(a: &CMatrix<T>, b: &DMatrix<T>) -> CMatrix<T> {
    let (ar, ai) = split(a);
    join(&(&ar * b), &(&ai * b))
}

/// `a† · a`.
pub fn gram<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let (ar, ai) = split(a);
    let art = ar.transpose();
    let ait = ai.transpose();
    let re = &art * &ar + &ait * &ai;
    let im = &art * &ai - &ait * &ar;
    join(&re, &im)
}

/// `Φ · diag(w) · Φ†` for non-negative weights `w`.
pub fn weighted_outer<T: Real>(phi: &CMatrix<T>, weights: &[T]) -> CMatrix<T> {
    assert_eq!(phi.ncols(), weights.len());
    let mut scaled = phi.clone();
    for (mut col, &w) in scaled.column_iter_mut().zip(weights) {
        let s = w.max(T::zero()).sqrt();
        col.iter_mut().for_each(|z| *z = z.scale(s));
    }
    let (pr, pi) = split(&scaled);
    let prt = pr.transpose();
    let pit = pi.transpose();
    let re = &pr * &prt + &pi * &pit;
    let im = &pi * &prt - &pr * &pit;
    join(&re, &im)
}

/// `max |a_ij − b_ij|`.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| cabs(x - y))
        .fold(T::zero(), |m, v| m.max(v))
}

/// `max |M − M†|`.
pub fn hermiticity_error<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut err = T::zero();
    for j in 0..n {
        for i in 0..=j {
            err = err.max(cabs(m[(i, j)] - m[(j, i)].conj()));
        }
    }
    err
}

/// `max |U†U − I|`.
pub fn unitarity_error<T: Real>(u: &CMatrix<T>) -> T {
    let g = gram(u);
    let mut err = T::zero();
    for ((i, j), z) in g.iter().enumerate().map(|(k, z)| ((k % g.nrows(), k / g.nrows()), z)) {
        let target = if i == j { T::one() } else { T::zero() };
        err = err.max(cabs(z - Complex::new(target, T::zero())));
    }
    err
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    m.diagonal().iter().fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
}

/// Determinant as `exp(ln_abs) · phase`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet<T: Real> {
    pub ln_abs: T,
    pub phase: Complex<T>,
}

impl<T: Real> LogDet<T> {
    pub fn zero() -> Self {
        Self { ln_abs: T::min_value().unwrap(), phase: Complex::new(T::zero(), T::zero()) }
    }

    pub fn is_zero(&self) -> bool {
        self.phase.norm_sqr() == T::zero()
    }

    /// `exp(ln_abs − shift) · phase`.
    pub fn value_shifted(&self, shift: T) -> Complex<T> {
        if self.is_zero() {
            return Complex::new(T::zero(), T::zero());
        }
        self.phase.scale((self.ln_abs - shift).exp())
    }
}

/// Log-determinant via LU with partial pivoting. Consumes the matrix.
pub fn log_det<T: Real>(mut m: CMatrix<T>) -> LogDet<T> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut ln_abs = T::zero();
    let mut phase = Complex::new(T::one(), T::zero());
    for k in 0..n {
        let (mut piv, mut best) = (k, T::zero());
        for i in k..n {
            let v = m[(i, k)].norm_sqr();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == T::zero() {
            return LogDet::zero();
        }
        if piv != k {
            m.swap_rows(piv, k);
            phase = -phase;
        }
        let p = m[(k, k)];
        let pn = cabs(p);
        ln_abs += pn.ln();
        phase *= p.unscale(pn);
        let inv = Complex::new(T::one(), T::zero()) / p;
        for i in k + 1..n {
            m[(i, k)] *= inv;
        }
        for j in k + 1..n {
            let f = m[(k, j)];
            if f.re == T::zero() && f.im == T::zero() {
                continue;
            }
            let (head, tail) = m.as_mut_slice().split_at_mut(j * n);
            let lcol = &head[k * n..k * n + n];
            let col = &mut tail[..n];
            for i in k + 1..n {
                col[i] -= lcol[i] * f;
            }
        }
    }
    LogDet { ln_abs, phase }
}

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues.
pub fn sorted_symmetric_eigen<T: Real>(h: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // fix the sign so the first significant entry is positive
        if let Some(first) = col.iter().find(|x| x.abs() > T::default_epsilon().sqrt()) {
            if *first < T::zero() {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}
