//! Polynomial-Kronecker lifting of snapshot data.
//!
//! For a scheduling sample `theta` and polynomial order `n_p`, a vector `v` is
//! lifted to `[v; theta v; theta^2 v; ...; theta^n_p v]`. Stacking lifted states
//! and inputs column by column gives the regressor `[X; Xkr; U; Ukr]` whose
//! least-squares map onto `X+` holds the polynomial coefficient blocks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vstack;
use crate::scalar::Real;
use crate::snapshots::SnapshotEnsemble;

/// Affine map of the scheduling parameter onto `[-1, 1]`.
///
/// When `enabled`, `normalize(theta) = (2 theta - (min + max)) / (max - min)`.
/// A degenerate range (`max == min`) only shifts by the midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaScale {
    pub min: f64,
    pub max: f64,
    pub enabled: bool,
}

impl Default for ThetaScale {
    fn default() -> Self {
        Self::identity()
    }
}

impl ThetaScale {
    pub const fn identity() -> Self {
        Self { min: -1.0, max: 1.0, enabled: false }
    }

    pub fn from_range(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max < min {
            return Err(Error::InvalidArgument(format!("invalid theta range [{min}, {max}]")));
        }
        Ok(Self { min, max, enabled: true })
    }

    /// Scale spanning the observed range of `theta`.
    pub fn fit<T: Real>(theta: &[T]) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in theta {
            let t = t.as_f64();
            lo = lo.min(t);
            hi = hi.max(t);
        }
        Self::from_range(lo, hi)
    }

    fn is_degenerate(&self) -> bool {
        self.max - self.min <= f64::EPSILON * self.max.abs().max(self.min.abs()).max(1.0)
    }

    pub fn normalize<T: Real>(&self, theta: T) -> T {
        if !self.enabled {
            return theta;
        }
        let mid = T::lit(0.5 * (self.min + self.max));
        if self.is_degenerate() {
            theta - mid
        } else {
            (theta - mid) / T::lit(0.5 * (self.max - self.min))
        }
    }

    pub fn denormalize<T: Real>(&self, scaled: T) -> T {
        if !self.enabled {
            return scaled;
        }
        let mid = T::lit(0.5 * (self.min + self.max));
        if self.is_degenerate() {
            scaled + mid
        } else {
            scaled * T::lit(0.5 * (self.max - self.min)) + mid
        }
    }

    /// True when `theta` lies in the fitted range widened by `margin` times its width.
    pub fn contains<T: Real>(&self, theta: T, margin: f64) -> bool {
        if !self.enabled {
            return true;
        }
        let pad = margin * (self.max - self.min);
        let t = theta.as_f64();
        t >= self.min - pad && t <= self.max + pad
    }
}

/// `[theta, theta^2, ..., theta^n_p]`.
pub fn theta_powers<T: Real>(theta: T, n_p: usize) -> Result<DVector<T>> {
    if !theta.is_finite_value() {
        return Err(Error::NonFinite(format!("theta = {theta}")));
    }
    let mut out = DVector::zeros(n_p);
    let mut p = T::one();
    for i in 0..n_p {
        p *= theta;
        out[i] = p;
    }
    Ok(out)
}

/// `[v; theta v; ...; theta^n_p v]`.
pub fn lift_vector<T: Real>(v: &DVector<T>, theta: T, n_p: usize) -> Result<DVector<T>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("cannot lift an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite_value()) {
        return Err(Error::NonFinite("vector passed to lift_vector".into()));
    }
    let powers = theta_powers(theta, n_p)?;
    let n = v.len();
    let mut out = DVector::zeros((n_p + 1) * n);
    out.rows_mut(0, n).copy_from(v);
    for (i, p) in powers.iter().enumerate() {
        out.rows_mut((i + 1) * n, n).copy_from(&(v * *p));
    }
    Ok(out)
}

/// Stacked snapshot matrices for the parametric regression.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedData<T> {
    /// `n_x x N_d`, columns `x_0 .. x_{N_d-1}`.
    pub x: DMatrix<T>,
    /// `(n_p n_x) x N_d`, columns `Theta_k (x) x_k`.
    pub xkr: DMatrix<T>,
    /// `n_u x N_d`.
    pub u: DMatrix<T>,
    /// `(n_p n_u) x N_d`.
    pub ukr: DMatrix<T>,
    /// `n_x x N_d`, columns `x_1 .. x_{N_d}`.
    pub xplus: DMatrix<T>,
    pub n_p: usize,
    /// Map applied to theta before the powers were taken.
    pub theta_scale: ThetaScale,
    pub dt: T,
}

impl<T: Real> LiftedData<T> {
    pub fn n_x(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.u.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    /// Full regressor `[X; Xkr; U; Ukr]` with `(n_p + 1)(n_x + n_u)` rows.
    pub fn regressor(&self) -> DMatrix<T> {
        vstack(&[&self.x, &self.xkr, &self.u, &self.ukr])
    }

    /// Appends the columns of `other` after those of `self`.
    pub fn hconcat(&self, other: &LiftedData<T>) -> Result<Self> {
        if self.n_x() != other.n_x() || self.n_u() != other.n_u() || self.n_p != other.n_p {
            return Err(Error::DimensionMismatch("lifted data blocks differ in n_x, n_u or n_p".into()));
        }
        if self.theta_scale != other.theta_scale {
            return Err(Error::InvalidArgument("lifted data blocks use different theta scales".into()));
        }
        let cat = |a: &DMatrix<T>, b: &DMatrix<T>| {
            let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
            m.columns_mut(0, a.ncols()).copy_from(a);
            m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
            m
        };
        Ok(Self {
            x: cat(&self.x, &other.x),
            xkr: cat(&self.xkr, &other.xkr),
            u: cat(&self.u, &other.u),
            ukr: cat(&self.ukr, &other.ukr),
            xplus: cat(&self.xplus, &other.xplus),
            n_p: self.n_p,
            theta_scale: self.theta_scale,
            dt: self.dt,
        })
    }
}

/// Builds the lifted matrices from raw (unscaled) theta.
pub fn build_lifted<T: Real>(ensemble: &SnapshotEnsemble<T>, n_p: usize) -> Result<LiftedData<T>> {
    build_lifted_scaled(ensemble, n_p, ThetaScale::identity())
}

/// Builds the lifted matrices with theta passed through `scale` first.
pub fn build_lifted_scaled<T: Real>(
    ensemble: &SnapshotEnsemble<T>,
    n_p: usize,
    scale: ThetaScale,
) -> Result<LiftedData<T>> {
    let n_d = ensemble.len();
    if n_d == 0 {
        return Err(Error::InvalidArgument("ensemble has no transitions".into()));
    }
    let n_x = ensemble.n_x();
    let n_u = ensemble.n_u();
    let mut x = DMatrix::zeros(n_x, n_d);
    let mut xkr = DMatrix::zeros(n_p * n_x, n_d);
    let mut u = DMatrix::zeros(n_u, n_d);
    let mut ukr = DMatrix::zeros(n_p * n_u, n_d);
    let mut xplus = DMatrix::zeros(n_x, n_d);

    let states = ensemble.states();
    for k in 0..n_d {
        let powers = theta_powers(scale.normalize(ensemble.theta()[k]), n_p)?;
        let xk = &states[k];
        let uk = &ensemble.inputs()[k];
        x.set_column(k, xk);
        u.set_column(k, uk);
        xplus.set_column(k, &states[k + 1]);
        for (i, p) in powers.iter().enumerate() {
            xkr.view_mut((i * n_x, k), (n_x, 1)).copy_from(&(xk * *p));
            ukr.view_mut((i * n_u, k), (n_u, 1)).copy_from(&(uk * *p));
        }
    }
    Ok(LiftedData { x, xkr, u, ukr, xplus, n_p, theta_scale: scale, dt: ensemble.dt() })
}
