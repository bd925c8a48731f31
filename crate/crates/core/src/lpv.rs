//! Evaluation, simulation and frozen-parameter analysis of polynomial LPV models.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::model::{PolyLpvModel, ReducedModel};
use crate::scalar::Real;
use crate::snapshots::fmt_num;

/// Fraction of the fitted theta range tolerated before `eval_at` warns.
pub const EXTRAPOLATION_MARGIN: f64 = 0.1;

impl<T: Real> PolyLpvModel<T> {
    /// `(A(theta), B(theta))` by Horner's scheme in the normalized parameter.
    pub fn eval_at(&self, theta: T) -> Result<(DMatrix<T>, DMatrix<T>)> {
        finite_theta(theta)?;
        let scale = self.theta_scale();
        if !scale.contains(theta, EXTRAPOLATION_MARGIN) {
            warn!("theta = {theta} lies outside the fitted range [{}, {}]", scale.min, scale.max);
        }
        Ok(self.eval_quiet(theta))
    }

    /// Warns once if any grid point lies outside the fitted range.
    /// Frozen-parameter analysis does not warn per point.
    pub fn warn_outside_range(&self, theta: &[T]) {
        let scale = self.theta_scale();
        let outside = theta.iter().filter(|&&t| !scale.contains(t, EXTRAPOLATION_MARGIN)).count();
        if outside > 0 {
            warn!(
                "{outside} of {} theta grid points lie outside the fitted range [{}, {}]",
                theta.len(),
                scale.min,
                scale.max
            );
        }
    }

    fn eval_quiet(&self, theta: T) -> (DMatrix<T>, DMatrix<T>) {
        let t = self.theta_scale().normalize(theta);
        (horner(self.a_coeffs(), t), horner(self.b_coeffs(), t))
    }

    /// Simulates with a prescribed parameter trajectory.
    ///
    /// Returns `N + 1` states and outputs for `N` inputs.
    pub fn simulate(&self, inputs: &[DVector<T>], theta: &[T], z0: &DVector<T>) -> Result<Trajectory<T>> {
        if inputs.len() != theta.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs but {} theta samples",
                inputs.len(),
                theta.len()
            )));
        }
        self.simulate_with(inputs, z0, |k, _| Ok(theta[k]))
    }

    /// Simulates with the parameter chosen at every step by `schedule(k, z_k)`.
    pub fn simulate_with<F>(&self, inputs: &[DVector<T>], z0: &DVector<T>, mut schedule: F) -> Result<Trajectory<T>>
    where
        F: FnMut(usize, &DVector<T>) -> Result<T>,
    {
        if z0.len() != self.n_x() {
            return Err(Error::DimensionMismatch(format!(
                "initial state has dimension {}, model has {}",
                z0.len(),
                self.n_x()
            )));
        }
        if let Some(k) = inputs.iter().position(|u| u.len() != self.n_u()) {
            return Err(Error::DimensionMismatch(format!(
                "input {k} has dimension {}, model expects {}",
                inputs[k].len(),
                self.n_u()
            )));
        }
        let mut states = Vec::with_capacity(inputs.len() + 1);
        let mut thetas = Vec::with_capacity(inputs.len());
        let mut z = z0.clone();
        let scale = self.theta_scale();
        let mut outside = 0usize;
        for (k, u) in inputs.iter().enumerate() {
            let th = schedule(k, &z)?;
            if !th.is_finite_value() {
                return Err(Error::NonFinite(format!("theta at step {k}")));
            }
            if !scale.contains(th, EXTRAPOLATION_MARGIN) {
                outside += 1;
            }
            let (a, b) = self.eval_quiet(th);
            let next = a * &z + b * u;
            if next.iter().any(|v| !v.is_finite_value()) {
                return Err(Error::Diverged { step: k + 1, detail: "non-finite state".into() });
            }
            states.push(std::mem::replace(&mut z, next));
            thetas.push(th);
        }
        states.push(z);
        if outside > 0 {
            warn!(
                "{outside} of {} steps scheduled theta outside the fitted range [{}, {}]",
                inputs.len(),
                scale.min,
                scale.max
            );
        }
        let outputs = states.iter().map(|z| self.c() * z).collect();
        Ok(Trajectory { states, outputs, theta: thetas })
    }

    pub fn eigenvalues_at(&self, theta: T) -> Result<Spectrum<T>> {
        finite_theta(theta)?;
        let (a, _) = self.eval_quiet(theta);
        let eigenvalues = eigenvalues(&a)?;
        let spectral_radius = eigenvalues.first().map(|l| l.modulus()).unwrap_or_else(T::zero);
        Ok(Spectrum { theta, eigenvalues, spectral_radius, stable: spectral_radius < T::one() })
    }

    /// Frozen-parameter response `G(w) = C (e^{j w dt} I - A(theta))^-1 B(theta)`.
    pub fn frequency_response(&self, theta: T, omega: &[T]) -> Result<FrequencyResponse<T>> {
        let dt = self.dt();
        let nyquist = T::pi() / dt;
        for (i, &w) in omega.iter().enumerate() {
            if !(w > T::zero()) || w > nyquist * (T::one() + T::lit(1e-12)) {
                return Err(Error::InvalidArgument(format!("omega = {w} must lie in (0, pi/dt = {nyquist}]")));
            }
            if i > 0 && !(w > omega[i - 1]) {
                return Err(Error::InvalidArgument("omega grid must be strictly increasing".into()));
            }
        }
        finite_theta(theta)?;
        let (a, b) = self.eval_quiet(theta);
        let poles = eigenvalues(&a)?;
        let n = self.n_x();
        let tol = T::lit(1e-12);
        let ac = a.map(|v| Complex::new(v, T::zero()));
        let bc = b.map(|v| Complex::new(v, T::zero()));
        let cc = self.c().map(|v| Complex::new(v, T::zero()));
        let mut g = Vec::with_capacity(omega.len());
        for &w in omega {
            let z = Complex::new((w * dt).cos(), (w * dt).sin());
            if poles.iter().any(|p| (z - p).modulus() < tol) {
                return Err(Error::Singular { omega: w.as_f64(), tol: 1e-12 });
            }
            let m = DMatrix::<Complex<T>>::identity(n, n) * z - &ac;
            let x = m.lu().solve(&bc).ok_or(Error::Singular { omega: w.as_f64(), tol: 1e-12 })?;
            g.push(&cc * x);
        }
        Ok(FrequencyResponse { omega: omega.to_vec(), g, dt, theta })
    }
}

fn finite_theta<T: Real>(theta: T) -> Result<()> {
    if theta.is_finite_value() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("theta = {theta}")))
    }
}

fn horner<T: Real>(coeffs: &[DMatrix<T>], t: T) -> DMatrix<T> {
    let mut acc = coeffs[coeffs.len() - 1].clone();
    for c in coeffs[..coeffs.len() - 1].iter().rev() {
        acc *= t;
        acc += c;
    }
    acc
}

impl<T: Real> ReducedModel<T> {
    /// Reduced coordinates `basis^T x` of a full-order state.
    pub fn project_state(&self, x_full: &DVector<T>) -> Result<DVector<T>> {
        if x_full.len() != self.n_full() {
            return Err(Error::DimensionMismatch(format!(
                "full state has dimension {}, basis expects {}",
                x_full.len(),
                self.n_full()
            )));
        }
        Ok(self.basis().tr_mul(x_full))
    }

    /// Full-order state `basis z` represented by reduced coordinates.
    pub fn lift_state(&self, z: &DVector<T>) -> Result<DVector<T>> {
        if z.len() != self.n_z() {
            return Err(Error::DimensionMismatch(format!("reduced state has dimension {}, expected {}", z.len(), self.n_z())));
        }
        Ok(self.basis() * z)
    }
}

/// Simulated states, outputs and the parameter values actually used.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<DVector<T>>,
    pub outputs: Vec<DVector<T>>,
    pub theta: Vec<T>,
}

/// Eigenvalues of `A(theta)` sorted by descending magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    pub theta: T,
    pub eigenvalues: Vec<Complex<T>>,
    pub spectral_radius: T,
    /// True iff every eigenvalue lies strictly inside the unit circle.
    pub stable: bool,
}

impl<T: Real> Spectrum<T> {
    /// `log(lambda) / dt`, the continuous-time equivalents of the discrete poles.
    pub fn continuous_equivalent(&self, dt: T) -> Vec<Complex<T>> {
        self.eigenvalues.iter().map(|l| ComplexField::ln(*l) / Complex::new(dt, T::zero())).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyResponse<T> {
    /// Strictly increasing, within `(0, pi/dt]`.
    pub omega: Vec<T>,
    /// One `n_y x n_u` matrix per frequency.
    pub g: Vec<DMatrix<Complex<T>>>,
    pub dt: T,
    pub theta: T,
}

/// Writes `k,t,theta,u_*,y_*`; the terminal row has empty theta and input fields.
pub fn write_trajectory_csv<T: Real>(
    path: impl AsRef<Path>,
    dt: T,
    inputs: &[DVector<T>],
    traj: &Trajectory<T>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let n_u = inputs.first().map(|u| u.len()).unwrap_or(0);
    let n_y = traj.outputs.first().map(|y| y.len()).unwrap_or(0);
    let mut header = vec!["k".to_string(), "t".into(), "theta".into()];
    header.extend((1..=n_u).map(|j| format!("u_{j}")));
    header.extend((1..=n_y).map(|j| format!("y_{j}")));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (k, y) in traj.outputs.iter().enumerate() {
        let mut row = vec![k.to_string(), fmt_num(dt * T::from_usize_lossy(k))];
        if k < inputs.len() {
            row.push(fmt_num(traj.theta[k]));
            row.extend(inputs[k].iter().map(|&v| fmt_num(v)));
        } else {
            row.extend(std::iter::repeat_n(String::new(), n_u + 1));
        }
        row.extend(y.iter().map(|&v| fmt_num(v)));
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `omega,re_G_ij,im_G_ij,...` with one row per frequency.
pub fn write_frequency_response_csv<T: Real>(path: impl AsRef<Path>, fr: &FrequencyResponse<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let (n_y, n_u) = fr.g.first().map(|g| g.shape()).unwrap_or((0, 0));
    let mut header = vec!["omega".to_string()];
    for i in 1..=n_y {
        for j in 1..=n_u {
            header.push(format!("re_G_{i}{j}"));
            header.push(format!("im_G_{i}{j}"));
        }
    }
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (w, g) in fr.omega.iter().zip(&fr.g) {
        let mut row = vec![fmt_num(*w)];
        for i in 0..n_y {
            for j in 0..n_u {
                row.push(fmt_num(g[(i, j)].re));
                row.push(fmt_num(g[(i, j)].im));
            }
        }
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}
