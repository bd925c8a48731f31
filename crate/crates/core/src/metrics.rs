//! Model-quality measures.
//!
//! The gap between two frozen-parameter responses is the pointwise chordal
//! distance evaluated frequency by frequency. No winding-number condition is
//! checked, so this is the frequency-resolved quantity behind a gap surface,
//! not the global nu-gap.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lpv::FrequencyResponse;
use crate::model::{PolyLpvModel, ReducedModel};
use crate::scalar::Real;
use crate::snapshots::fmt_num;

/// Eigenvalues of the Hermitian factors are clamped to at least this before inversion.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// `||y_test - y_ref||_F / ||y_ref||_F` over the stacked trajectory.
pub fn relative_rms_error<T: Real>(y_ref: &[DVector<T>], y_test: &[DVector<T>]) -> Result<T> {
    if y_ref.len() != y_test.len() {
        return Err(Error::DimensionMismatch(format!(
            "reference has {} samples, test has {}",
            y_ref.len(),
            y_test.len()
        )));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for (k, (r, t)) in y_ref.iter().zip(y_test).enumerate() {
        if r.len() != t.len() {
            return Err(Error::DimensionMismatch(format!("sample {k}: dimensions {} and {}", r.len(), t.len())));
        }
        num += (t - r).norm_squared();
        den += r.norm_squared();
    }
    if den == T::zero() {
        return Err(Error::InvalidArgument("reference signal is identically zero".into()));
    }
    Ok((num / den).sqrt())
}

/// Per-channel relative RMS error, one entry per output.
pub fn relative_rms_error_per_channel<T: Real>(y_ref: &[DVector<T>], y_test: &[DVector<T>]) -> Result<Vec<T>> {
    let n = y_ref.first().map(|y| y.len()).unwrap_or(0);
    (0..n)
        .map(|i| {
            let pick = |ys: &[DVector<T>]| -> Vec<DVector<T>> { ys.iter().map(|y| DVector::from_element(1, y[i])).collect() };
            relative_rms_error(&pick(y_ref), &pick(y_test))
        })
        .collect()
}

/// Fraction of the singular-value sum held by the leading `k` values.
pub fn energy_retention<T: Real>(sv: &[T], k: usize) -> Result<T> {
    if k == 0 || k > sv.len() {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={}", sv.len())));
    }
    if sv.iter().any(|&s| !(s >= T::zero())) {
        return Err(Error::InvalidArgument("singular values must be nonnegative".into()));
    }
    if sv.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("singular values must be sorted in descending order".into()));
    }
    let total = sv.iter().fold(T::zero(), |a, &s| a + s);
    if total == T::zero() {
        return Err(Error::InvalidArgument("singular spectrum is all zero".into()));
    }
    let head = sv[..k].iter().fold(T::zero(), |a, &s| a + s);
    Ok((head / total).min(T::one()))
}

/// `M^{-1/2}` for a Hermitian positive definite `M`.
fn hermitian_inv_sqrt<T: Real>(m: DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let eig = SymmetricEigen::new(m);
    let floor = T::lit(EIGEN_FLOOR);
    let scale = eig.eigenvalues.map(|l| Complex::new(T::one() / l.max(floor).sqrt(), T::zero()));
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&scale) * q.adjoint()
}

/// Chordal distance between two complex gain matrices of equal shape.
pub fn chordal_distance<T: Real>(g1: &DMatrix<Complex<T>>, g2: &DMatrix<Complex<T>>) -> Result<T> {
    if g1.shape() != g2.shape() {
        return Err(Error::DimensionMismatch(format!("responses are {:?} and {:?}", g1.shape(), g2.shape())));
    }
    let (n_y, n_u) = g1.shape();
    let left = hermitian_inv_sqrt(DMatrix::identity(n_y, n_y) + g2 * g2.adjoint());
    let right = hermitian_inv_sqrt(DMatrix::identity(n_u, n_u) + g1.adjoint() * g1);
    let m = left * (g1 - g2) * right;
    let s = m.singular_values().iter().fold(T::zero(), |a, &v| a.max(v));
    Ok(s.clamp(T::zero(), T::one()))
}

/// Chordal distance at every frequency of two responses on the same grid.
pub fn pointwise_gap<T: Real>(g1: &FrequencyResponse<T>, g2: &FrequencyResponse<T>) -> Result<Vec<T>> {
    if g1.omega.len() != g2.omega.len() || g1.omega.iter().zip(&g2.omega).any(|(a, b)| a != b) {
        return Err(Error::DimensionMismatch("frequency grids differ".into()));
    }
    g1.g.iter().zip(&g2.g).map(|(a, b)| chordal_distance(a, b)).collect()
}

/// Gap values over a `theta x omega` grid; singular cells are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct GapSurface<T> {
    pub theta: Vec<T>,
    pub omega: Vec<T>,
    /// `gap[i][j]` belongs to `(theta[i], omega[j])`.
    pub gap: Vec<Vec<Option<T>>>,
}

impl<T: Real> GapSurface<T> {
    /// Largest finite cell value, or `None` if every cell is missing.
    pub fn max(&self) -> Option<T> {
        self.gap.iter().flatten().flatten().copied().reduce(|a, b| a.max(b))
    }

    pub fn missing_cells(&self) -> usize {
        self.gap.iter().flatten().filter(|c| c.is_none()).count()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "theta,omega,gap").map_err(io)?;
        for (i, th) in self.theta.iter().enumerate() {
            for (j, w) in self.omega.iter().enumerate() {
                let cell = self.gap[i][j].map(fmt_num).unwrap_or_default();
                writeln!(out, "{},{},{}", fmt_num(*th), fmt_num(*w), cell).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

fn responses_per_cell<T: Real>(model: &PolyLpvModel<T>, theta: T, omega: &[T]) -> Result<Vec<Option<DMatrix<Complex<T>>>>> {
    match model.frequency_response(theta, omega) {
        Ok(fr) => Ok(fr.g.into_iter().map(Some).collect()),
        Err(Error::Singular { .. }) => omega
            .iter()
            .map(|&w| match model.frequency_response(theta, &[w]) {
                Ok(mut fr) => Ok(fr.g.pop()),
                Err(Error::Singular { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect(),
        Err(e) => Err(e),
    }
}

/// Gap surface between any two models with matching input/output dimensions.
pub fn gap_surface_between<T: Real>(
    m1: &PolyLpvModel<T>,
    m2: &PolyLpvModel<T>,
    theta: &[T],
    omega: &[T],
) -> Result<GapSurface<T>> {
    if theta.is_empty() || omega.is_empty() {
        return Err(Error::InvalidArgument("theta and omega grids must be nonempty".into()));
    }
    if m1.n_y() != m2.n_y() || m1.n_u() != m2.n_u() {
        return Err(Error::DimensionMismatch(format!(
            "models have {}x{} and {}x{} transfer matrices",
            m1.n_y(),
            m1.n_u(),
            m2.n_y(),
            m2.n_u()
        )));
    }
    m1.warn_outside_range(theta);
    m2.warn_outside_range(theta);
    let mut gap = Vec::with_capacity(theta.len());
    for &th in theta {
        let r1 = responses_per_cell(m1, th, omega)?;
        let r2 = responses_per_cell(m2, th, omega)?;
        let row = r1
            .iter()
            .zip(&r2)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => chordal_distance(a, b).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        gap.push(row);
    }
    Ok(GapSurface { theta: theta.to_vec(), omega: omega.to_vec(), gap })
}

/// Gap surface between a full-order model and a reduced model of it.
pub fn gap_surface<T: Real>(
    full: &PolyLpvModel<T>,
    reduced: &ReducedModel<T>,
    theta: &[T],
    omega: &[T],
) -> Result<GapSurface<T>> {
    gap_surface_between(full, reduced.model(), theta, omega)
}
