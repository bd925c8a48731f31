//! Small wrappers over nalgebra decompositions with the ordering and sign
//! conventions the identification code relies on.

use nalgebra::{Complex, ComplexField, DMatrix, Schur};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin SVD `m = u * diag(s) * v_t` with `s` sorted in descending order.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: DMatrix<T>,
    pub s: Vec<T>,
    pub v_t: DMatrix<T>,
}

/// Thin SVD with descending singular values. Columns of `u` are sign-fixed so
/// their largest-magnitude entry is positive (rows of `v_t` follow).
pub fn svd_sorted<T: Real>(m: &DMatrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(rows, 0),
            s: Vec::new(),
            v_t: DMatrix::zeros(0, cols),
        });
    }
    let svd = m
        .clone()
        .try_svd(true, true, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Numerical(format!("SVD of a {rows}x{cols} matrix did not converge")))?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut u_sorted = DMatrix::zeros(rows, k);
    let mut v_sorted = DMatrix::zeros(k, cols);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let sign = if col[col.iamax()] < T::zero() { -T::one() } else { T::one() };
        u_sorted.set_column(dst, &(col * sign));
        v_sorted.set_row(dst, &(v_t.row(src) * sign));
        s.push(svd.singular_values[src]);
    }
    Ok(Svd { u: u_sorted, s, v_t: v_sorted })
}

/// Singular values only, descending.
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<T> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Eigenvalues of a real square matrix, sorted by descending magnitude
/// (ties broken by imaginary part, positive first).
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("eigenvalues of a non-square {}x{} matrix", a.nrows(), a.ncols())));
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("matrix passed to eigenvalue solver".into()));
    }
    let schur = Schur::try_new(a.clone(), T::default_epsilon(), 0)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut ev: Vec<Complex<T>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| {
        y.modulus()
            .partial_cmp(&x.modulus())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(ev)
}

pub fn spectral_radius<T: Real>(a: &DMatrix<T>) -> Result<T> {
    Ok(eigenvalues(a)?.first().map(|l| l.modulus()).unwrap_or_else(T::zero))
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> T {
    singular_values(a).first().copied().unwrap_or_else(T::zero)
}

/// Stacks matrices with equal column counts on top of each other.
pub fn vstack<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn is_finite_matrix<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|v| v.is_finite_value())
}
