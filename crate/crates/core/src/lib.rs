//! Relaxed-control versus randomized-action Euler schemes for controlled SDEs.
//!
//! The relaxed scheme averages drift and volatility over a Gaussian feedback
//! policy with Gauss–Hermite quadrature; the mixed scheme samples one action
//! per step. Both are driven by the same counter-based Brownian lattice, so
//! their pathwise distance can be measured across grid sizes.
//!
//! ```
//! use relaxsim::{FeedbackPolicy, GaussHermiteRule, Setting, relaxed_drift};
//!
//! let model = Setting::Setting2.model(0.0);
//! let policy = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
//! let rule = GaussHermiteRule::cached(10).unwrap();
//! let b = relaxed_drift(&model, &policy, &[0.0], rule).unwrap();
//! assert!((b[0] - 0.74894952223432998).abs() < 1e-8);
//! ```

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod integrators;
pub mod model;
pub mod noise;
pub mod normal;
pub mod quadrature;
pub mod relax;

pub use analysis::{
    convergence_study, cost_gap_study, coupled_trajectories, discrete_cost, estimate_error, fit_rate, relaxed_cost,
    sup_sq_error, ConvergenceRecord, CostGapRecord, RateFit, StudyParams, TrajectoryPair,
};
pub use config::{parse_config, Preset, StudyConfig};
pub use error::{Error, Result};
pub use integrators::{simulate_martingale_form, simulate_mixed, simulate_relaxed, Trajectory};
pub use model::{builtin_setting, policy_at, sample_action, CostSpec, FeedbackPolicy, ModelSpec, Setting, TimeGrid};
pub use noise::{
    coarsen, generate_auxiliary_lattice, generate_lattice, uniform_stream, ActionUniforms, BrownianLattice, Increments,
    NoiseKind, SeedRecord,
};
pub use normal::normal_quantile;
pub use quadrature::{build_rule, gaussian_expectation, GaussHermiteRule};
pub use relax::{
    diffusion_matrix, policy_expectation, psd_sqrt, relaxed_drift, relaxed_volatility, residual_volatility, Relaxation,
    VolMode,
};
