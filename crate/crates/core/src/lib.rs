//! Data-driven identification of polynomial linear parameter-varying
//! reduced-order models via parametric dynamic mode decomposition.
//!
//! The pipeline is
//!
//! 1. collect snapshots `{u_k, x_k, theta_k}` from a plant ([`snapshots`]),
//! 2. lift them with Kronecker powers of the scheduling parameter ([`lifting`]),
//! 3. regress the polynomial operator and project it onto the dominant
//!    subspace of the shifted states ([`pdmd`]),
//! 4. simulate and analyse the result ([`lpv`], [`metrics`]).
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below pin the common choices.

pub mod error;
pub mod lifting;
pub mod linalg;
pub mod lpv;
pub mod metrics;
pub mod model;
pub mod pdmd;
pub mod plants;
pub mod scalar;
pub mod snapshots;

pub use error::{Error, Result};
pub use lifting::{build_lifted, build_lifted_scaled, lift_vector, theta_powers, LiftedData, ThetaScale};
pub use lpv::{FrequencyResponse, Spectrum, Trajectory};
pub use metrics::{energy_retention, gap_surface, pointwise_gap, relative_rms_error, GapSurface};
pub use model::{load_model, save_model, ModelFile, PolyLpvModel, ReducedModel};
pub use pdmd::{
    fit_full, fit_pdmd, fit_pdmd_detailed, projection_basis, reduce, singular_spectrum, OrderPolicy, PdmdConfig,
    RankPolicy, SingularSpectrum,
};
pub use plants::{
    flexchain_instability_theta, linearize_plant, make_random_polylpv, Dynamics, FlexChain, FlexChainConfig,
    PlantConfig, SurrogatePlant,
};
pub use scalar::Real;
pub use snapshots::{
    collect_from_plant, generate_chirp, load_snapshots, save_snapshots, ArcsinRule, Signal, SnapshotEnsemble,
    ThetaSource,
};

pub type Signal64 = Signal<f64>;
pub type SnapshotEnsemble64 = SnapshotEnsemble<f64>;
pub type LiftedData64 = LiftedData<f64>;
pub type PolyLpvModel64 = PolyLpvModel<f64>;
pub type ReducedModel64 = ReducedModel<f64>;
pub type SurrogatePlant64 = SurrogatePlant<f64>;
pub type FrequencyResponse64 = FrequencyResponse<f64>;
pub type GapSurface64 = GapSurface<f64>;

pub type Signal32 = Signal<f32>;
pub type SnapshotEnsemble32 = SnapshotEnsemble<f32>;
pub type LiftedData32 = LiftedData<f32>;
pub type PolyLpvModel32 = PolyLpvModel<f32>;
pub type ReducedModel32 = ReducedModel<f32>;
pub type SurrogatePlant32 = SurrogatePlant<f32>;
