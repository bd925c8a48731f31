//! Polynomial LPV models and their JSON file representation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::ThetaScale;
use crate::scalar::Real;

/// `x+ = A(theta) x + B(theta) u`, `y = C x`, with
/// `A(theta) = A_0 + sum_i theta~^i A_i` in the normalized parameter `theta~`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyLpvModel<T> {
    a: Vec<DMatrix<T>>,
    b: Vec<DMatrix<T>>,
    c: DMatrix<T>,
    theta_scale: ThetaScale,
    dt: T,
}

impl<T: Real> PolyLpvModel<T> {
    pub fn new(a: Vec<DMatrix<T>>, b: Vec<DMatrix<T>>, c: DMatrix<T>, theta_scale: ThetaScale, dt: T) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("model needs at least the constant coefficient A_0".into()));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} A coefficients but {} B coefficients",
                a.len(),
                b.len()
            )));
        }
        let n = a[0].nrows();
        let n_u = b[0].ncols();
        if n == 0 || n_u == 0 {
            return Err(Error::InvalidArgument("model state and input dimensions must be >= 1".into()));
        }
        for (i, ai) in a.iter().enumerate() {
            if ai.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("A_{i} is {:?}, expected ({n}, {n})", ai.shape())));
            }
        }
        for (i, bi) in b.iter().enumerate() {
            if bi.shape() != (n, n_u) {
                return Err(Error::DimensionMismatch(format!("B_{i} is {:?}, expected ({n}, {n_u})", bi.shape())));
            }
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!("C is {:?}, expected (n_y, {n})", c.shape())));
        }
        let all_finite = a.iter().chain(b.iter()).chain(std::iter::once(&c)).all(|m| m.iter().all(|v| v.is_finite_value()));
        if !all_finite {
            return Err(Error::NonFinite("model coefficients".into()));
        }
        if !(dt > T::zero()) || !dt.is_finite_value() {
            return Err(Error::InvalidArgument(format!("model dt must be positive, got {dt}")));
        }
        Ok(Self { a, b, c, theta_scale, dt })
    }

    /// Polynomial order `n_p`.
    pub fn n_p(&self) -> usize {
        self.a.len() - 1
    }

    pub fn n_x(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b[0].ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn a_coeffs(&self) -> &[DMatrix<T>] {
        &self.a
    }

    pub fn b_coeffs(&self) -> &[DMatrix<T>] {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn theta_scale(&self) -> ThetaScale {
        self.theta_scale
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Same dynamics with a different output matrix.
    pub fn with_output(&self, c: DMatrix<T>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c, self.theta_scale, self.dt)
    }
}

/// Tolerance for `basis^T basis = I`; 1e-10 in double precision.
pub(crate) fn orthonormality_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::default_epsilon() * T::lit(1e3))
}

/// Reduced model together with the single basis it was projected with.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel<T> {
    model: PolyLpvModel<T>,
    basis: DMatrix<T>,
}

impl<T: Real> ReducedModel<T> {
    pub fn new(model: PolyLpvModel<T>, basis: DMatrix<T>) -> Result<Self> {
        if basis.ncols() != model.n_x() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} columns, model dimension is {}",
                basis.ncols(),
                model.n_x()
            )));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if err > orthonormality_tol::<T>() {
            return Err(Error::InvalidArgument(format!("basis columns are not orthonormal (max Gram error {err:e})")));
        }
        Ok(Self { model, basis })
    }

    pub fn model(&self) -> &PolyLpvModel<T> {
        &self.model
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    pub fn n_z(&self) -> usize {
        self.basis.ncols()
    }

    /// Dimension of the full state the basis lives in.
    pub fn n_full(&self) -> usize {
        self.basis.nrows()
    }

    pub fn into_parts(self) -> (PolyLpvModel<T>, DMatrix<T>) {
        (self.model, self.basis)
    }
}

type Rows = Vec<Vec<f64>>;

fn to_rows<T: Real>(m: &DMatrix<T>) -> Rows {
    m.row_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

fn from_rows<T: Real>(rows: &Rows, what: &str) -> Result<DMatrix<T>> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what}: rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| T::lit(rows[i][j])))
}

/// On-disk model document. Matrices are stored as arrays of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_p: usize,
    pub n_z: usize,
    pub dt: f64,
    pub theta_scale: ThetaScale,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
    #[serde(rename = "C")]
    pub c: Rows,
    /// Absent for models that were not obtained by projection.
    #[serde(default)]
    pub basis: Option<Rows>,
}

impl ModelFile {
    pub fn from_reduced<T: Real>(rom: &ReducedModel<T>) -> Self {
        let mut f = Self::from_full(rom.model());
        f.basis = Some(to_rows(rom.basis()));
        f
    }

    pub fn from_full<T: Real>(m: &PolyLpvModel<T>) -> Self {
        Self {
            n_p: m.n_p(),
            n_z: m.n_x(),
            dt: m.dt().as_f64(),
            theta_scale: m.theta_scale(),
            a: m.a_coeffs().iter().map(to_rows).collect(),
            b: m.b_coeffs().iter().map(to_rows).collect(),
            c: to_rows(m.c()),
            basis: None,
        }
    }

    pub fn to_model<T: Real>(&self) -> Result<PolyLpvModel<T>> {
        if self.a.len() != self.n_p + 1 {
            return Err(Error::DimensionMismatch(format!(
                "n_p = {} but {} A coefficients stored",
                self.n_p,
                self.a.len()
            )));
        }
        let a = self.a.iter().map(|m| from_rows(m, "A")).collect::<Result<Vec<_>>>()?;
        let b = self.b.iter().map(|m| from_rows(m, "B")).collect::<Result<Vec<_>>>()?;
        let c = from_rows(&self.c, "C")?;
        let model = PolyLpvModel::new(a, b, c, self.theta_scale, T::lit(self.dt))?;
        if model.n_x() != self.n_z {
            return Err(Error::DimensionMismatch(format!(
                "n_z = {} but A blocks are {}x{}",
                self.n_z,
                model.n_x(),
                model.n_x()
            )));
        }
        Ok(model)
    }

    pub fn to_reduced<T: Real>(&self) -> Result<ReducedModel<T>> {
        let model = self.to_model()?;
        let basis = match &self.basis {
            Some(rows) => from_rows(rows, "basis")?,
            None => DMatrix::identity(model.n_x(), model.n_x()),
        };
        ReducedModel::new(model, basis)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| Error::Json { path: path.into(), source: e })?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Json { path: path.into(), source: e })
    }
}

pub fn save_model<T: Real>(rom: &ReducedModel<T>, path: impl AsRef<Path>) -> Result<()> {
    ModelFile::from_reduced(rom).save(path)
}

/// Loads a model file; files without a basis get an identity basis.
pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<ReducedModel<T>> {
    let path = path.as_ref();
    ModelFile::load(path)?.to_reduced().map_err(|e| Error::format(path, 0, e.to_string()))
}
