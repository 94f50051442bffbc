//! Dense complex linear-algebra helpers built on nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{real, Cplx, Real};

pub type CMat<T> = DMatrix<Cplx<T>>;
pub type CVec<T> = DVector<Cplx<T>>;

/// Relative tolerance below which negative eigenvalues are treated as rounding noise.
pub const PSD_CLAMP_TOL: f64 = 1e-12;

/// Hermitian part `(A + Aᴴ)/2`.
pub fn hermitian_part<T: Real>(a: &CMat<T>) -> CMat<T> {
    (a + a.adjoint()) * real(T::lit(0.5))
}

/// Principal square root of a Hermitian PSD matrix via eigendecomposition.
///
/// Eigenvalues in `[-tol·λmax, 0)` are clamped to zero; anything more negative
/// is rejected as an inconsistent (non-PSD) input.
pub fn hermitian_psd_sqrt<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    let (vecs, vals) = checked_psd_eigen(a)?;
    let roots = vals.map(|v| if v > T::zero() { v.sqrt() } else { T::zero() });
    Ok(reassemble(&vecs, &roots))
}

/// Eigen-decomposition of a Hermitian matrix that must be PSD up to rounding.
pub fn checked_psd_eigen<T: Real>(a: &CMat<T>) -> Result<(CMat<T>, DVector<T>)> {
    if !a.is_square() {
        return Err(Error::invalid("square matrix required"));
    }
    if a.nrows() == 0 {
        return Ok((CMat::zeros(0, 0), DVector::zeros(0)));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let max = eig.eigenvalues.iter().fold(T::zero(), |m, &v| m.max(v));
    let min = eig.eigenvalues.iter().fold(T::zero(), |m, &v| m.min(v));
    if min < -T::lit(PSD_CLAMP_TOL) * max || (max <= T::zero() && min < T::zero()) {
        return Err(Error::NotPsd {
            min_eig: min.as_f64(),
            max_eig: max.as_f64(),
        });
    }
    let vals = eig.eigenvalues.map(|v| v.max(T::zero()));
    Ok((eig.eigenvectors, vals))
}

fn reassemble<T: Real>(vecs: &CMat<T>, diag: &DVector<T>) -> CMat<T> {
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= real(diag[j]);
    }
    &scaled * vecs.adjoint()
}

/// Unit-norm eigenvector of the largest eigenvalue of a Hermitian matrix.
pub fn dominant_eigenvector<T: Real>(a: &CMat<T>) -> (T, CVec<T>) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut v = eig.eigenvectors.column(best).into_owned();
    normalize_phase(&mut v);
    (eig.eigenvalues[best], v)
}

/// Rotates a vector so its largest-magnitude entry is real and positive.
/// Makes eigenvector outputs reproducible across equivalent decompositions.
pub fn normalize_phase<T: Real>(v: &mut CVec<T>) {
    let mut idx = 0;
    let mut best = T::zero();
    for (i, z) in v.iter().enumerate() {
        let n = z.norm_sqr();
        if n > best {
            best = n;
            idx = i;
        }
    }
    if best > T::zero() {
        let phase = v[idx] / real(best.sqrt());
        let rot = phase.conj();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Kronecker product of two column vectors.
pub fn kron<T: Real>(a: &CVec<T>, b: &CVec<T>) -> CVec<T> {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Cholesky factorization of a Hermitian positive-definite matrix.
pub fn cholesky<T: Real>(a: CMat<T>) -> Result<Cholesky<Cplx<T>, Dyn>> {
    Cholesky::new(a).ok_or_else(|| Error::Numerical("matrix not positive definite".into()))
}

/// `log2 det(A)` for Hermitian positive-definite `A`.
pub fn log2_det_hpd<T: Real>(a: CMat<T>) -> Result<T> {
    let chol = cholesky(a)?;
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.ln();
    }
    Ok(T::lit(2.0) * acc / T::ln_2())
}

/// Real inner product of two complex vectors, `Re(aᴴb)`.
pub fn re_dot<T: Real>(a: &CVec<T>, b: &CVec<T>) -> T {
    a.dotc(b).re
}

/// `aᴴ b` without the nalgebra argument-order ambiguity.
pub fn inner<T: Real>(a: &CVec<T>, b: &CVec<T>) -> Cplx<T> {
    a.dotc(b)
}

pub fn norm_sqr<T: Real>(v: &CVec<T>) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

pub fn frobenius_sqr<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// Complex entries as `[re, im]` pairs for JSON documents.
pub type Pair = [f64; 2];

pub fn vec_to_pairs<T: Real>(v: &CVec<T>) -> Vec<Pair> {
    v.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect()
}

pub fn mat_to_pairs<T: Real>(m: &CMat<T>) -> Vec<Vec<Pair>> {
    m.row_iter()
        .map(|r| r.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect())
        .collect()
}

pub fn vec_from_pairs<T: Real>(p: &[Pair]) -> CVec<T> {
    CVec::from_iterator(p.len(), p.iter().map(|[re, im]| Cplx::new(T::lit(*re), T::lit(*im))))
}

pub fn mat_from_pairs<T: Real>(rows: &[Vec<Pair>]) -> Result<CMat<T>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid("ragged complex matrix"));
    }
    Ok(CMat::from_fn(rows.len(), ncols, |i, j| {
        Cplx::new(T::lit(rows[i][j][0]), T::lit(rows[i][j][1]))
    }))
}
