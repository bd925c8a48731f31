//! Parametric DMD: least-squares fit of the polynomial LPV operator from
//! lifted snapshots, followed by projection onto the dominant left singular
//! subspace of the shifted-state matrix.
//!
//! Two ranks are kept apart. `r` truncates the SVD of the tall regressor
//! `[X; Xkr; U; Ukr]` inside the pseudo-inverse, and `n_z` is the dimension of
//! the projection basis taken from `X+`.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lifting::{build_lifted_scaled, LiftedData, ThetaScale};
use crate::linalg::{singular_values, svd_sorted};
use crate::metrics::energy_retention;
use crate::model::{orthonormality_tol, PolyLpvModel, ReducedModel};
use crate::scalar::Real;
use crate::snapshots::SnapshotEnsemble;

/// Singular values at or below this fraction of the largest are numerically zero.
pub const EFFECTIVE_RANK_RTOL: f64 = 1e-12;

/// Regressor condition number above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e10;

/// How many regressor singular values the pseudo-inverse keeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankPolicy {
    /// Smallest `k` whose leading singular values hold at least this fraction of the sum.
    Energy(f64),
    /// Exactly this many; fails if any of them is numerically zero.
    Explicit(usize),
    /// Every singular value above `tol * sigma_max`.
    Tolerance(f64),
    /// Whichever of `Energy(energy)` and `Tolerance(rel_tol)` keeps more.
    Auto { energy: f64, rel_tol: f64 },
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Auto { energy: 0.95, rel_tol: 1e-10 }
    }
}

fn energy_rank<T: Real>(sv: &[T], fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("energy fraction must lie in (0, 1], got {fraction}")));
    }
    let target = T::lit(fraction);
    for k in 1..=sv.len() {
        // Tiny slack so that fraction = 1 is reachable despite summation rounding.
        if energy_retention(sv, k)? >= target - T::default_epsilon() * T::lit(8.0) {
            return Ok(k);
        }
    }
    Ok(sv.len())
}

fn tolerance_rank<T: Real>(sv: &[T], rel_tol: f64) -> Result<usize> {
    if !(rel_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be nonnegative, got {rel_tol}")));
    }
    let cut = sv[0] * T::lit(rel_tol);
    Ok(sv.iter().take_while(|&&s| s > cut).count())
}

/// Number of singular values above `EFFECTIVE_RANK_RTOL * sigma_max`.
pub fn effective_rank<T: Real>(sv: &[T]) -> usize {
    match sv.first() {
        Some(&s0) if s0 > T::zero() => {
            let cut = s0 * T::lit(EFFECTIVE_RANK_RTOL);
            sv.iter().take_while(|&&s| s > cut).count()
        }
        _ => 0,
    }
}

/// Applies `policy` to a descending singular spectrum.
pub fn select_rank<T: Real>(sv: &[T], policy: RankPolicy) -> Result<usize> {
    let eff = effective_rank(sv);
    if eff == 0 {
        return Err(Error::RankDeficient("all singular values are zero; the data carry no information".into()));
    }
    let k = match policy {
        RankPolicy::Energy(f) => energy_rank(sv, f)?,
        RankPolicy::Tolerance(t) => tolerance_rank(sv, t)?,
        RankPolicy::Auto { energy, rel_tol } => energy_rank(sv, energy)?.max(tolerance_rank(sv, rel_tol)?),
        RankPolicy::Explicit(r) => {
            if r == 0 {
                return Err(Error::InvalidArgument("explicit rank must be >= 1".into()));
            }
            if r > eff {
                return Err(Error::RankDeficient(format!(
                    "requested rank {r} but the regressor has effective rank {eff} of {}",
                    sv.len()
                )));
            }
            r
        }
    };
    Ok(k.clamp(1, eff))
}

/// Diagnostics of a full-order fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitDiagnostics<T> {
    /// Truncation rank `r` of the regressor pseudo-inverse.
    pub rank: usize,
    /// Descending singular values of `[X; Xkr; U; Ukr]`.
    pub regressor_sv: Vec<T>,
    /// `sigma_max / sigma_min` over all regressor rows (infinite when rank deficient).
    pub condition_number: f64,
}

/// Least-squares polynomial LPV operator `[A B] = X+ pinv([X; Xkr; U; Ukr])`.
pub fn fit_full<T: Real>(data: &LiftedData<T>, c: &DMatrix<T>, rank_policy: RankPolicy) -> Result<PolyLpvModel<T>> {
    fit_full_with_diagnostics(data, c, rank_policy).map(|(m, _)| m)
}

pub fn fit_full_with_diagnostics<T: Real>(
    data: &LiftedData<T>,
    c: &DMatrix<T>,
    rank_policy: RankPolicy,
) -> Result<(PolyLpvModel<T>, FitDiagnostics<T>)> {
    let n_x = data.n_x();
    let n_u = data.n_u();
    let n_p = data.n_p;
    if c.ncols() != n_x {
        return Err(Error::DimensionMismatch(format!("C has {} columns, states have dimension {n_x}", c.ncols())));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("no snapshot columns".into()));
    }
    let phi = data.regressor();
    let rows = phi.nrows();
    if data.len() < rows {
        warn!(
            "only {} snapshots for a regressor with {rows} rows; coefficients are not uniquely determined",
            data.len()
        );
    }

    let svd = svd_sorted(&phi)?;
    let r = select_rank(&svd.s, rank_policy)?;
    let condition_number = if svd.s.len() < rows || svd.s[rows - 1] == T::zero() {
        f64::INFINITY
    } else {
        (svd.s[0] / svd.s[rows - 1]).as_f64()
    };
    if condition_number > CONDITION_WARN {
        warn!("regressor condition number {condition_number:.3e} exceeds {CONDITION_WARN:e}; keeping rank {r} of {rows}");
    }

    // [A B] = X+ V_r S_r^-1 U_r^T
    let v_r = svd.v_t.rows(0, r).transpose();
    let mut proj = &data.xplus * v_r;
    for (j, s) in svd.s[..r].iter().enumerate() {
        proj.column_mut(j).unscale_mut(*s);
    }
    let ab = proj * svd.u.columns(0, r).transpose();

    let a = (0..=n_p).map(|i| ab.columns(i * n_x, n_x).into_owned()).collect();
    let off = (n_p + 1) * n_x;
    let b = (0..=n_p).map(|i| ab.columns(off + i * n_u, n_u).into_owned()).collect();
    let model = PolyLpvModel::new(a, b, c.clone(), data.theta_scale, data.dt)?;
    Ok((model, FitDiagnostics { rank: r, regressor_sv: svd.s, condition_number }))
}

/// Descending singular values of the regressor and of `X+`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum<T> {
    pub regressor_sv: Vec<T>,
    pub shifted_sv: Vec<T>,
}

pub fn singular_spectrum<T: Real>(data: &LiftedData<T>) -> SingularSpectrum<T> {
    SingularSpectrum {
        regressor_sv: singular_values(&data.regressor()),
        shifted_sv: singular_values(&data.xplus),
    }
}

/// Leading `n_z` left singular vectors of `X+`, each signed so its
/// largest-magnitude entry is positive.
pub fn projection_basis<T: Real>(data: &LiftedData<T>, n_z: usize) -> Result<DMatrix<T>> {
    let limit = data.n_x().min(data.len());
    if n_z == 0 || n_z > limit {
        return Err(Error::InvalidArgument(format!("n_z = {n_z} must lie in 1..={limit}")));
    }
    let svd = svd_sorted(&data.xplus)?;
    let eff = effective_rank(&svd.s);
    if n_z > eff {
        return Err(Error::RankDeficient(format!(
            "n_z = {n_z} exceeds the effective rank {eff} of the shifted-state matrix"
        )));
    }
    Ok(svd.u.columns(0, n_z).into_owned())
}

/// Galerkin projection `A_r,i = V^T A_i V`, `B_r,i = V^T B_i`, `C_r = C V`.
pub fn reduce<T: Real>(full: &PolyLpvModel<T>, basis: &DMatrix<T>) -> Result<ReducedModel<T>> {
    if basis.nrows() != full.n_x() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, model dimension is {}",
            basis.nrows(),
            full.n_x()
        )));
    }
    if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
        return Err(Error::DimensionMismatch(format!("basis has {} columns for {} rows", basis.ncols(), basis.nrows())));
    }
    let gram_err = (basis.transpose() * basis - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
    if gram_err > orthonormality_tol::<T>() {
        return Err(Error::InvalidArgument(format!("projection basis is not orthonormal (Gram error {gram_err:e})")));
    }
    let bt = basis.transpose();
    let a = full.a_coeffs().iter().map(|ai| &bt * ai * basis).collect();
    let b = full.b_coeffs().iter().map(|bi| &bt * bi).collect();
    let c = full.c() * basis;
    let model = PolyLpvModel::new(a, b, c, full.theta_scale(), full.dt())?;
    ReducedModel::new(model, basis.clone())
}

/// Choice of the projection dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderPolicy {
    Fixed(usize),
    /// Smallest `k` whose leading `X+` singular values hold this fraction of the sum.
    Energy(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdmdConfig<T> {
    pub n_p: usize,
    pub n_z: OrderPolicy,
    pub rank_policy: RankPolicy,
    /// Output matrix; `None` means every state is an output.
    pub c: Option<DMatrix<T>>,
    /// Map theta onto `[-1, 1]` over the observed range before lifting.
    pub normalize_theta: bool,
}

impl<T> Default for PdmdConfig<T> {
    fn default() -> Self {
        Self {
            n_p: 4,
            n_z: OrderPolicy::Energy(0.95),
            rank_policy: RankPolicy::default(),
            c: None,
            normalize_theta: true,
        }
    }
}

/// Everything produced along the way by [`fit_pdmd_detailed`].
#[derive(Clone, Debug)]
pub struct PdmdFit<T> {
    pub rom: ReducedModel<T>,
    pub full: PolyLpvModel<T>,
    pub spectrum: SingularSpectrum<T>,
    pub diagnostics: FitDiagnostics<T>,
}

/// Lift, fit, project and reduce in one call.
pub fn fit_pdmd<T: Real>(ensemble: &SnapshotEnsemble<T>, config: &PdmdConfig<T>) -> Result<ReducedModel<T>> {
    fit_pdmd_detailed(ensemble, config).map(|f| f.rom)
}

pub fn fit_pdmd_detailed<T: Real>(ensemble: &SnapshotEnsemble<T>, config: &PdmdConfig<T>) -> Result<PdmdFit<T>> {
    let scale = if config.normalize_theta {
        ThetaScale::fit(ensemble.theta())?
    } else {
        ThetaScale::identity()
    };
    let data = build_lifted_scaled(ensemble, config.n_p, scale)?;
    let c = config.c.clone().unwrap_or_else(|| DMatrix::identity(data.n_x(), data.n_x()));
    let (full, diagnostics) = fit_full_with_diagnostics(&data, &c, config.rank_policy)?;
    let shifted_sv = singular_values(&data.xplus);
    let n_z = match config.n_z {
        OrderPolicy::Fixed(n) => n,
        OrderPolicy::Energy(f) => select_order(&shifted_sv, f)?,
    };
    let basis = projection_basis(&data, n_z)?;
    let rom = reduce(&full, &basis)?;
    let spectrum = SingularSpectrum { regressor_sv: diagnostics.regressor_sv.clone(), shifted_sv };
    Ok(PdmdFit { rom, full, spectrum, diagnostics })
}

/// Smallest `k` with `energy_retention(sv, k) >= fraction`.
pub fn select_order<T: Real>(sv: &[T], fraction: f64) -> Result<usize> {
    if effective_rank(sv) == 0 {
        return Err(Error::RankDeficient("shifted-state matrix is zero".into()));
    }
    energy_rank(sv, fraction)
}

/// Residual `X+ - [A B] [X; Xkr; U; Ukr]` of a fitted full model on `data`.
pub fn fit_residual<T: Real>(model: &PolyLpvModel<T>, data: &LiftedData<T>) -> DMatrix<T> {
    let mut ab = DMatrix::zeros(model.n_x(), data.regressor().nrows());
    let n_x = model.n_x();
    let n_u = model.n_u();
    for (i, ai) in model.a_coeffs().iter().enumerate() {
        ab.columns_mut(i * n_x, n_x).copy_from(ai);
    }
    let off = (model.n_p() + 1) * n_x;
    for (i, bi) in model.b_coeffs().iter().enumerate() {
        ab.columns_mut(off + i * n_u, n_u).copy_from(bi);
    }
    &data.xplus - ab * data.regressor()
}
