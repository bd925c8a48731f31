//! Surrogate truth systems used to generate identification data.
//!
//! Two plants are provided:
//!
//! * an exact polynomial LPV system, stepped by direct evaluation of
//!   `A(theta) x + B(theta) u`;
//! * a flexible chain of `N` masses standing in for a cantilevered wing. Node
//!   `i` (displacement `q_i`, velocity `v_i`) obeys
//!
//!   ```text
//!   m v_i' = -k_lin (2 q_i - q_{i-1} - q_{i+1}) - k_cub q_i^3 - c v_i
//!            + (a0 + a1 theta + a2 theta^2) v_i + b_i u
//!   ```
//!
//!   with `q_0 = 0` (clamped root) and no spring beyond node `N` (free tip).
//!   The parameter-dependent velocity load lowers or raises the net damping, so
//!   the chain loses stability once `a0 + a1 theta + a2 theta^2 > c`. The
//!   state is `[q_1 .. q_N, v_1 .. v_N]` and one classical RK4 step with input
//!   and parameter held over the step is one discrete transition.

use nalgebra::{ComplexField, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::ThetaScale;
use crate::linalg::{eigenvalues, spectral_norm, spectral_radius};
use crate::model::PolyLpvModel;
use crate::scalar::Real;

/// One-step transition `x+ = f(x, u, theta)` of a discrete-time plant.
pub trait Dynamics<T: Real> {
    fn n_x(&self) -> usize;
    fn n_u(&self) -> usize;
    fn dt(&self) -> T;
    fn step(&self, x: &DVector<T>, u: &DVector<T>, theta: T) -> Result<DVector<T>>;
}

/// Sampling time used by [`make_random_polylpv`].
pub const DEFAULT_RANDOM_DT: f64 = 0.05;

/// Parameters of the flexible-chain surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlexChainConfig {
    /// Number of masses.
    pub n: usize,
    /// Mass per node (kg).
    pub m: f64,
    /// Linear spring stiffness between neighbours (N/m).
    pub k_lin: f64,
    /// Grounded cubic stiffness (N/m^3).
    pub k_cub: f64,
    /// Structural damping (N s/m).
    pub c: f64,
    /// Parameter-dependent velocity load `a0 + a1 theta + a2 theta^2` (N s/m).
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    /// Input gain per node; length `n`.
    pub b: Vec<f64>,
    pub dt: f64,
}

impl FlexChainConfig {
    /// A heavily damped ten-node chain sampled at 1 kHz, loaded along the span
    /// with a gain that grows linearly toward the tip.
    pub fn wing_like() -> Self {
        let n = 10;
        let b = (1..=n).map(|i| i as f64 / n as f64).collect();
        Self { n, m: 1.0, k_lin: 400.0, k_cub: 20.0, c: 50.0, a0: 0.0, a1: 20.0, a2: 10.0, b, dt: 0.001 }
    }

    pub fn n_x(&self) -> usize {
        2 * self.n
    }

    /// Net damping `c - (a0 + a1 theta + a2 theta^2)`.
    pub fn net_damping(&self, theta: f64) -> f64 {
        self.c - (self.a0 + self.a1 * theta + self.a2 * theta * theta)
    }

    /// State index of node `node` (1-based) velocity.
    pub fn velocity_index(&self, node: usize) -> usize {
        self.n + node - 1
    }
}

/// Flexible chain ready to be stepped.
#[derive(Clone, Debug, PartialEq)]
pub struct FlexChain<T> {
    config: FlexChainConfig,
    m: T,
    k_lin: T,
    k_cub: T,
    c: T,
    a: [T; 3],
    b: DVector<T>,
    dt: T,
}

/// RK4 amplification factor for `y' = lambda y` with step `z = lambda dt`.
fn rk4_amplification<T: Real>(z: nalgebra::Complex<T>) -> T {
    let one = nalgebra::Complex::new(T::one(), T::zero());
    let z2 = z * z;
    let z3 = z2 * z;
    let z4 = z3 * z;
    (one + z + z2 * T::lit(0.5) + z3 / T::lit(6.0) + z4 / T::lit(24.0)).modulus()
}

impl<T: Real> FlexChain<T> {
    pub fn new(config: FlexChainConfig) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if config.n < 2 {
            return bad(format!("flex chain needs at least 2 masses, got {}", config.n));
        }
        if !(config.m > 0.0) || !(config.k_lin > 0.0) {
            return bad("flex chain mass and linear stiffness must be positive".into());
        }
        if !(config.k_cub >= 0.0) || !(config.c >= 0.0) {
            return bad("flex chain cubic stiffness and damping must be nonnegative".into());
        }
        if !(config.dt > 0.0) {
            return bad(format!("flex chain dt must be positive, got {}", config.dt));
        }
        if config.b.len() != config.n {
            return bad(format!("input gain pattern has {} entries for {} nodes", config.b.len(), config.n));
        }
        let all = [config.m, config.k_lin, config.k_cub, config.c, config.a0, config.a1, config.a2, config.dt];
        if all.iter().chain(&config.b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flex chain configuration".into()));
        }
        let chain = Self {
            m: T::lit(config.m),
            k_lin: T::lit(config.k_lin),
            k_cub: T::lit(config.k_cub),
            c: T::lit(config.c),
            a: [T::lit(config.a0), T::lit(config.a1), T::lit(config.a2)],
            b: DVector::from_iterator(config.n, config.b.iter().map(|&v| T::lit(v))),
            dt: T::lit(config.dt),
            config,
        };
        chain.check_integration_stability()?;
        Ok(chain)
    }

    pub fn config(&self) -> &FlexChainConfig {
        &self.config
    }

    fn nodes(&self) -> usize {
        self.config.n
    }

    /// Continuous-time right-hand side.
    pub fn rhs(&self, x: &DVector<T>, u: T, theta: T) -> DVector<T> {
        let n = self.nodes();
        let load = self.a[0] + self.a[1] * theta + self.a[2] * theta * theta;
        let mut dx = DVector::zeros(2 * n);
        for i in 0..n {
            let q = x[i];
            let v = x[n + i];
            let left = if i == 0 { T::zero() } else { x[i - 1] };
            let spring = if i + 1 < n {
                T::lit(2.0) * q - left - x[i + 1]
            } else {
                q - left
            };
            let force = -self.k_lin * spring - self.k_cub * q * q * q - self.c * v + load * v + self.b[i] * u;
            dx[i] = v;
            dx[n + i] = force / self.m;
        }
        dx
    }

    /// Jacobian of the continuous dynamics at the origin.
    pub fn linear_state_matrix(&self, theta: T) -> DMatrix<T> {
        let n = self.nodes();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        let k = self.k_lin / self.m;
        for i in 0..n {
            a[(i, n + i)] = T::one();
            let diag = if i + 1 < n { T::lit(2.0) } else { T::one() };
            a[(n + i, i)] = -k * diag;
            if i > 0 {
                a[(n + i, i - 1)] = k;
            }
            if i + 1 < n {
                a[(n + i, i + 1)] = k;
            }
            let load = self.a[0] + self.a[1] * theta + self.a[2] * theta * theta;
            a[(n + i, n + i)] = (load - self.c) / self.m;
        }
        a
    }

    /// Kinetic plus potential energy of the chain.
    pub fn mechanical_energy(&self, x: &DVector<T>) -> T {
        let n = self.nodes();
        let half = T::lit(0.5);
        let mut e = T::zero();
        for i in 0..n {
            let left = if i == 0 { T::zero() } else { x[i - 1] };
            let stretch = x[i] - left;
            e += half * self.m * x[n + i] * x[n + i] + half * self.k_lin * stretch * stretch
                + T::lit(0.25) * self.k_cub * x[i].powi(4);
        }
        e
    }

    fn check_integration_stability(&self) -> Result<()> {
        let ev = eigenvalues(&self.linear_state_matrix(T::zero()))?;
        for l in ev {
            // Only physically decaying or neutral modes must be preserved by RK4.
            if l.re > T::lit(1e-12) * l.modulus() {
                continue;
            }
            let amp = rk4_amplification(l * self.dt);
            if amp > T::one() + T::lit(1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "dt = {} is too large: RK4 amplifies the mode at {} by {amp}",
                    self.dt, l
                )));
            }
        }
        Ok(())
    }

    fn rk4(&self, x: &DVector<T>, u: T, theta: T) -> DVector<T> {
        let h = self.dt;
        let half = T::lit(0.5);
        let k1 = self.rhs(x, u, theta);
        let k2 = self.rhs(&(x + &k1 * (h * half)), u, theta);
        let k3 = self.rhs(&(x + &k2 * (h * half)), u, theta);
        let k4 = self.rhs(&(x + &k3 * h), u, theta);
        x + (k1 + k2 * T::lit(2.0) + k3 * T::lit(2.0) + k4) * (h / T::lit(6.0))
    }
}

impl<T: Real> Dynamics<T> for FlexChain<T> {
    fn n_x(&self) -> usize {
        2 * self.nodes()
    }

    fn n_u(&self) -> usize {
        1
    }

    fn dt(&self) -> T {
        self.dt
    }

    fn step(&self, x: &DVector<T>, u: &DVector<T>, theta: T) -> Result<DVector<T>> {
        check_dims(self, x, u)?;
        let next = self.rk4(x, u[0], theta);
        finite_or_err(next)
    }
}

impl<T: Real> Dynamics<T> for PolyLpvModel<T> {
    fn n_x(&self) -> usize {
        PolyLpvModel::n_x(self)
    }

    fn n_u(&self) -> usize {
        PolyLpvModel::n_u(self)
    }

    fn dt(&self) -> T {
        PolyLpvModel::dt(self)
    }

    fn step(&self, x: &DVector<T>, u: &DVector<T>, theta: T) -> Result<DVector<T>> {
        check_dims(self, x, u)?;
        let (a, b) = self.eval_at(theta)?;
        finite_or_err(a * x + b * u)
    }
}

fn check_dims<T: Real, P: Dynamics<T> + ?Sized>(p: &P, x: &DVector<T>, u: &DVector<T>) -> Result<()> {
    if x.len() != p.n_x() || u.len() != p.n_u() {
        return Err(Error::DimensionMismatch(format!(
            "step with state {} / input {}, plant has {} / {}",
            x.len(),
            u.len(),
            p.n_x(),
            p.n_u()
        )));
    }
    Ok(())
}

fn finite_or_err<T: Real>(x: DVector<T>) -> Result<DVector<T>> {
    if x.iter().all(|v| v.is_finite_value()) {
        Ok(x)
    } else {
        Err(Error::NonFinite("plant step produced a non-finite state".into()))
    }
}

/// Any of the provided surrogate plants.
#[derive(Clone, Debug, PartialEq)]
pub enum SurrogatePlant<T> {
    ExactPolyLpv(PolyLpvModel<T>),
    FlexChain(FlexChain<T>),
}

impl<T: Real> SurrogatePlant<T> {
    pub fn flex_chain(config: FlexChainConfig) -> Result<Self> {
        FlexChain::new(config).map(SurrogatePlant::FlexChain)
    }

    /// The generating model of an exact polynomial LPV plant.
    pub fn as_poly_lpv(&self) -> Option<&PolyLpvModel<T>> {
        match self {
            SurrogatePlant::ExactPolyLpv(m) => Some(m),
            SurrogatePlant::FlexChain(_) => None,
        }
    }

    pub fn as_flex_chain(&self) -> Option<&FlexChain<T>> {
        match self {
            SurrogatePlant::FlexChain(c) => Some(c),
            SurrogatePlant::ExactPolyLpv(_) => None,
        }
    }

    fn inner(&self) -> &dyn Dynamics<T> {
        match self {
            SurrogatePlant::ExactPolyLpv(m) => m,
            SurrogatePlant::FlexChain(c) => c,
        }
    }
}

impl<T: Real> Dynamics<T> for SurrogatePlant<T> {
    fn n_x(&self) -> usize {
        self.inner().n_x()
    }

    fn n_u(&self) -> usize {
        self.inner().n_u()
    }

    fn dt(&self) -> T {
        self.inner().dt()
    }

    fn step(&self, x: &DVector<T>, u: &DVector<T>, theta: T) -> Result<DVector<T>> {
        self.inner().step(x, u, theta)
    }
}

/// Random polynomial LPV plant with contractive `A(theta)` on `[-1, 1]`.
///
/// Coefficients are standard normal, with `A_i`, `B_i` damped by `0.5^i`.
/// The `A_i` are then scaled jointly so that the spectral norm of `A(theta)`
/// (an upper bound on its spectral radius) is at most `spectral_target` on a
/// fine grid over `[-1, 1]`. Sampling time is [`DEFAULT_RANDOM_DT`]; the output
/// matrix is the identity.
pub fn make_random_polylpv<T: Real>(
    n_x: usize,
    n_u: usize,
    n_p: usize,
    spectral_target: f64,
    seed: u64,
) -> Result<SurrogatePlant<T>> {
    make_random_polylpv_with_dt(n_x, n_u, n_p, spectral_target, seed, DEFAULT_RANDOM_DT)
}

pub fn make_random_polylpv_with_dt<T: Real>(
    n_x: usize,
    n_u: usize,
    n_p: usize,
    spectral_target: f64,
    seed: u64,
    dt: f64,
) -> Result<SurrogatePlant<T>> {
    if !(spectral_target > 0.0 && spectral_target < 1.0) {
        return Err(Error::InvalidArgument(format!("spectral target must lie in (0, 1), got {spectral_target}")));
    }
    if n_x == 0 || n_u == 0 {
        return Err(Error::InvalidArgument("random plant dimensions must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |rows: usize, cols: usize, weight: f64| {
        DMatrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z * weight)
        })
    };
    let inv_sqrt_n = 1.0 / (n_x as f64).sqrt();
    let mut a: Vec<DMatrix<T>> = (0..=n_p).map(|i| normal(n_x, n_x, inv_sqrt_n * 0.5f64.powi(i as i32))).collect();
    let b: Vec<DMatrix<T>> = (0..=n_p).map(|i| normal(n_x, n_u, 0.5f64.powi(i as i32))).collect();
    let c = DMatrix::identity(n_x, n_x);

    let check_grid: Vec<T> = (0..=200).map(|i| T::lit(-1.0 + 0.01 * i as f64)).collect();
    let target = T::lit(spectral_target);
    for _ in 0..8 {
        let model = PolyLpvModel::new(a.clone(), b.clone(), c.clone(), ThetaScale::identity(), T::lit(dt))?;
        let mut worst = T::zero();
        for &th in &check_grid {
            worst = worst.max(spectral_norm(&model.eval_at(th)?.0));
        }
        if !worst.is_finite_value() || worst == T::zero() {
            return Err(Error::Numerical("random plant rescaling produced a degenerate operator".into()));
        }
        if worst <= target {
            let radius_ok = (0..=10).all(|i| {
                let th = T::lit(-1.0 + 0.2 * i as f64);
                model
                    .eval_at(th)
                    .and_then(|(ath, _)| spectral_radius(&ath))
                    .map(|r| r <= target)
                    .unwrap_or(false)
            });
            if radius_ok {
                return Ok(SurrogatePlant::ExactPolyLpv(model));
            }
        }
        // Aim slightly inside the target so rounding cannot push us back over it.
        let factor = target / worst * T::lit(1.0 - 1e-9);
        for ai in &mut a {
            *ai *= factor;
        }
    }
    Err(Error::Numerical("random plant rescaling did not converge".into()))
}

/// Central finite-difference Jacobians of `plant.step` at `(x_eq, u_eq, theta)`.
pub fn linearize_plant<T: Real, P: Dynamics<T> + ?Sized>(
    plant: &P,
    x_eq: &DVector<T>,
    u_eq: &DVector<T>,
    theta: T,
    h: T,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if !(h > T::zero()) || !h.is_finite_value() {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let x1 = plant.step(x_eq, u_eq, theta)?;
    let defect = (&x1 - x_eq).norm();
    let tol = T::lit(1e-8) * x_eq.norm().max(T::one());
    if defect > tol {
        return Err(Error::InvalidArgument(format!(
            "linearization point is not a fixed point: |step(x) - x| = {defect:e} > {tol:e}"
        )));
    }
    let n = plant.n_x();
    let m = plant.n_u();
    let two_h = h + h;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x_eq.clone();
        let mut xm = x_eq.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (plant.step(&xp, u_eq, theta)? - plant.step(&xm, u_eq, theta)?) / two_h;
        a.set_column(j, &col);
    }
    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut up = u_eq.clone();
        let mut um = u_eq.clone();
        up[j] += h;
        um[j] -= h;
        let col = (plant.step(x_eq, &up, theta)? - plant.step(x_eq, &um, theta)?) / two_h;
        b.set_column(j, &col);
    }
    Ok((a, b))
}

/// Finite-difference step used when linearizing the chain at its origin.
pub const ORIGIN_FD_STEP: f64 = 1e-6;

/// Smallest grid value at which the chain linearized at the origin has
/// spectral radius `>= 1`.
pub fn flexchain_instability_theta<T: Real>(config: &FlexChainConfig, theta_grid: &[T]) -> Result<Option<T>> {
    if theta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("theta grid must be sorted ascending".into()));
    }
    let chain = FlexChain::<T>::new(config.clone())?;
    let x0 = DVector::zeros(chain.n_x());
    let u0 = DVector::zeros(1);
    for &th in theta_grid {
        let (a, _) = linearize_plant(&chain, &x0, &u0, th, T::lit(ORIGIN_FD_STEP))?;
        if spectral_radius(&a)? >= T::one() {
            return Ok(Some(th));
        }
    }
    Ok(None)
}

/// Document stored in a plant configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlantConfig {
    ExactPolyLpv(PolyLpvPlantSpec),
    FlexChain(FlexChainConfig),
}

/// Either explicit coefficient matrices or a random generator spec.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PolyLpvPlantSpec {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub random: Option<RandomPlantSpec>,
    /// `A_0 .. A_n_p`, each as an array of rows.
    #[serde(default, rename = "A")]
    pub a: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, rename = "B")]
    pub b: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, rename = "C")]
    pub c: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomPlantSpec {
    pub n_x: usize,
    pub n_u: usize,
    pub n_p: usize,
    pub spectral_target: f64,
    /// Falls back to the caller's seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PlantConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), source: e })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json { path: path.into(), source: e })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::Io { path: path.into(), source: e })
    }

    /// Instantiates the plant; `seed` is used by random specs without their own seed.
    pub fn build<T: Real>(&self, seed: u64) -> Result<SurrogatePlant<T>> {
        match self {
            PlantConfig::FlexChain(cfg) => SurrogatePlant::flex_chain(cfg.clone()),
            PlantConfig::ExactPolyLpv(spec) => {
                let dt = spec.dt.unwrap_or(DEFAULT_RANDOM_DT);
                if let Some(r) = &spec.random {
                    return make_random_polylpv_with_dt(r.n_x, r.n_u, r.n_p, r.spectral_target, r.seed.unwrap_or(seed), dt);
                }
                let (Some(a), Some(b)) = (&spec.a, &spec.b) else {
                    return Err(Error::InvalidArgument("exact-poly-lpv plant needs either `random` or both `A` and `B`".into()));
                };
                let to_m = |rows: &Vec<Vec<f64>>| -> Result<DMatrix<T>> {
                    let r = rows.len();
                    let c = rows.first().map(|x| x.len()).unwrap_or(0);
                    if rows.iter().any(|x| x.len() != c) {
                        return Err(Error::DimensionMismatch("ragged matrix in plant config".into()));
                    }
                    Ok(DMatrix::from_fn(r, c, |i, j| T::lit(rows[i][j])))
                };
                let a = a.iter().map(to_m).collect::<Result<Vec<_>>>()?;
                let b = b.iter().map(to_m).collect::<Result<Vec<_>>>()?;
                let n = a.first().map(|m| m.nrows()).unwrap_or(0);
                let c = match &spec.c {
                    Some(c) => to_m(c)?,
                    None => DMatrix::identity(n, n),
                };
                PolyLpvModel::new(a, b, c, ThetaScale::identity(), T::lit(dt)).map(SurrogatePlant::ExactPolyLpv)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_an_equilibrium() {
        let chain = FlexChain::<f64>::new(FlexChainConfig::wing_like()).unwrap();
        let x = DVector::zeros(20);
        for th in [-1.0, 0.0, 2.5] {
            assert_eq!(chain.step(&x, &DVector::zeros(1), th).unwrap(), x);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = FlexChainConfig::wing_like();
        cfg.n = 1;
        cfg.b = vec![1.0];
        assert!(FlexChain::<f64>::new(cfg).is_err());
        let mut cfg = FlexChainConfig::wing_like();
        cfg.m = 0.0;
        assert!(FlexChain::<f64>::new(cfg).is_err());
        let mut cfg = FlexChainConfig::wing_like();
        cfg.b.pop();
        assert!(FlexChain::<f64>::new(cfg).is_err());
        // Highest mode near 2 sqrt(k/m) = 40 rad/s; RK4 limit is |z| ~ 2.8.
        let mut cfg = FlexChainConfig::wing_like();
        cfg.dt = 0.1;
        assert!(FlexChain::<f64>::new(cfg).is_err());
    }

    #[test]
    fn zero_step_is_rejected() {
        let plant = make_random_polylpv::<f64>(3, 1, 1, 0.8, 4).unwrap();
        assert!(linearize_plant(&plant, &DVector::zeros(3), &DVector::zeros(1), 0.0, 0.0).is_err());
    }

    #[test]
    fn non_equilibrium_point_is_rejected() {
        let plant = make_random_polylpv::<f64>(3, 1, 1, 0.8, 4).unwrap();
        let x = DVector::from_element(3, 1.0);
        assert!(linearize_plant(&plant, &x, &DVector::zeros(1), 0.0, 1e-6).is_err());
    }

    #[test]
    fn random_plant_is_deterministic_and_lti_at_zero_order() {
        let p1 = make_random_polylpv::<f64>(4, 2, 2, 0.9, 7).unwrap();
        let p2 = make_random_polylpv::<f64>(4, 2, 2, 0.9, 7).unwrap();
        assert_eq!(p1, p2);
        let lti = make_random_polylpv::<f64>(4, 2, 0, 0.9, 7).unwrap();
        assert_eq!(lti.as_poly_lpv().unwrap().n_p(), 0);
        assert!(make_random_polylpv::<f64>(4, 2, 1, 1.0, 7).is_err());
    }

    #[test]
    fn plant_config_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        let cfg = PlantConfig::FlexChain(FlexChainConfig::wing_like());
        cfg.save(&path).unwrap();
        assert_eq!(PlantConfig::load(&path).unwrap(), cfg);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"kind\": \"flex-chain\""));

        let random: PlantConfig = serde_json::from_str(
            r#"{"kind":"exact-poly-lpv","dt":0.05,"random":{"n_x":3,"n_u":1,"n_p":1,"spectral_target":0.8}}"#,
        )
        .unwrap();
        let plant = random.build::<f64>(11).unwrap();
        assert_eq!(plant, make_random_polylpv(3, 1, 1, 0.8, 11).unwrap());

        let explicit: PlantConfig =
            serde_json::from_str(r#"{"kind":"exact-poly-lpv","dt":1.0,"A":[[[0.5]],[[0.1]]],"B":[[[1.0]],[[0.0]]]}"#).unwrap();
        let p = explicit.build::<f64>(0).unwrap();
        let next = p.step(&DVector::from_element(1, 1.0), &DVector::zeros(1), 1.0).unwrap();
        assert!((next[0] - 0.6).abs() < 1e-15);
    }
}
