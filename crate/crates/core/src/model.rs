//! Controlled SDE models, Gaussian feedback policies, time grids and costs.
//!
//! A model is the pair of coefficients `(b, σ)` of `dX = b(X, a) dt + σ(X, a) dW`
//! with `X ∈ ℝ^d`, `a ∈ ℝ^k` and a `d`-dimensional Brownian motion. Coefficients
//! are stored as shared closures writing into caller-provided buffers so the
//! integrators can step without allocating.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::normal::normal_quantile;

/// `(state, action, out)`; `out` has `state_dim` entries.
pub type DriftFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(state, action, out)`; `out` is the `d × d` volatility, row-major.
pub type VolatilityFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(state, out)`; `out` has `action_dim` entries.
pub type MeanFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type RunningCostFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type TerminalCostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    state_dim: usize,
    action_dim: usize,
    drift: DriftFn,
    volatility: VolatilityFn,
    controlled_volatility: bool,
    /// `None` means unbounded.
    pub drift_bound: Option<f64>,
    /// Optional Lipschitz constants for `(b, σ)`.
    pub lipschitz_hints: Option<(f64, f64)>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("action_dim", &self.action_dim)
            .field("controlled_volatility", &self.controlled_volatility)
            .field("drift_bound", &self.drift_bound)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    /// Build a model from coefficient closures. The volatility is declared
    /// action-dependent; call [`ModelSpec::uncontrolled_volatility`] when it is not.
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        action_dim: usize,
        drift: DriftFn,
        volatility: VolatilityFn,
    ) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::config("state_dim", "must be positive"));
        }
        if action_dim == 0 {
            return Err(Error::config("action_dim", "must be positive"));
        }
        Ok(Self {
            name: name.into(),
            state_dim,
            action_dim,
            drift,
            volatility,
            controlled_volatility: true,
            drift_bound: None,
            lipschitz_hints: None,
        })
    }

    /// Declare that `σ(x, a)` does not depend on `a`. The integrators rely on
    /// this promise, so only make it when it holds for every input.
    pub fn uncontrolled_volatility(mut self) -> Self {
        self.controlled_volatility = false;
        self
    }

    pub fn with_lipschitz_hints(mut self, hints: (f64, f64)) -> Self {
        self.lipschitz_hints = Some(hints);
        self
    }

    pub fn with_drift_bound(mut self, bound: f64) -> Self {
        self.drift_bound = Some(bound);
        self
    }

    /// Clip every action component to `[-bound, bound]` before the
    /// coefficients see it. Both the quadrature and the sampled schemes go
    /// through the same clipped coefficients.
    pub fn with_action_clip(mut self, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::config("action_clip", "must be a positive finite bound"));
        }
        let drift = self.drift.clone();
        let volatility = self.volatility.clone();
        self.drift = Arc::new(move |x, a, out| {
            let clipped: Vec<f64> = a.iter().map(|v| v.clamp(-bound, bound)).collect();
            drift(x, &clipped, out)
        });
        self.volatility = Arc::new(move |x, a, out| {
            let clipped: Vec<f64> = a.iter().map(|v| v.clamp(-bound, bound)).collect();
            volatility(x, &clipped, out)
        });
        self.name = format!("{}+clip({bound})", self.name);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn has_controlled_volatility(&self) -> bool {
        self.controlled_volatility
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.drift)(x, a, out)
    }

    #[inline]
    pub fn volatility_into(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.volatility)(x, a, out)
    }

    pub fn drift(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.drift_into(x, a, &mut out);
        out
    }

    pub fn volatility(&self, x: &[f64], a: &[f64]) -> DMatrix<f64> {
        let d = self.state_dim;
        let mut out = vec![0.0; d * d];
        self.volatility_into(x, a, &mut out);
        DMatrix::from_row_slice(d, d, &out)
    }
}

/// The three one-dimensional test models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    /// `b(x,a) = a`, `σ = 0.1`.
    Setting1,
    /// `b(x,a) = tanh(a)`, `σ = 0.1`.
    Setting2,
    /// `b(x,a) = tanh(a)`, `σ(x,a) = 0.1 + c·a`.
    Setting3,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Setting1, Setting::Setting2, Setting::Setting3];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Setting1 => "setting1",
            Setting::Setting2 => "setting2",
            Setting::Setting3 => "setting3",
        }
    }

    /// `c_sigma` is ignored except for [`Setting::Setting3`].
    pub fn model(self, c_sigma: f64) -> ModelSpec {
        const SIGMA: f64 = 0.1;
        let constant_vol: VolatilityFn = Arc::new(|_, _, out| out[0] = SIGMA);
        match self {
            Setting::Setting1 => ModelSpec::new("setting1", 1, 1, Arc::new(|_, a, out| out[0] = a[0]), constant_vol)
                .expect("static dims")
                .uncontrolled_volatility()
                .with_lipschitz_hints((1.0, 0.0)),
            Setting::Setting2 => ModelSpec::new(
                "setting2",
                1,
                1,
                Arc::new(|_, a, out| out[0] = a[0].tanh()),
                constant_vol,
            )
            .expect("static dims")
            .uncontrolled_volatility()
            .with_drift_bound(1.0)
            .with_lipschitz_hints((1.0, 0.0)),
            Setting::Setting3 => {
                let model = ModelSpec::new(
                    format!("setting3(c_sigma={c_sigma})"),
                    1,
                    1,
                    Arc::new(|_, a, out| out[0] = a[0].tanh()),
                    Arc::new(move |_, a, out| out[0] = SIGMA + c_sigma * a[0]),
                )
                .expect("static dims")
                .with_drift_bound(1.0)
                .with_lipschitz_hints((1.0, c_sigma.abs()));
                if c_sigma == 0.0 {
                    model.uncontrolled_volatility()
                } else {
                    model
                }
            }
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "setting1" => Ok(Setting::Setting1),
            "setting2" => Ok(Setting::Setting2),
            "setting3" => Ok(Setting::Setting3),
            other => Err(Error::config(
                "setting",
                format!("unknown setting `{other}` (expected setting1, setting2 or setting3)"),
            )),
        }
    }
}

/// Look up one of the built-in models by name.
pub fn builtin_setting(id: &str, c_sigma: f64) -> Result<ModelSpec> {
    Ok(id.parse::<Setting>()?.model(c_sigma))
}

/// Time-independent isotropic Gaussian policy `π(x) = N(mean(x), std² I)`.
#[derive(Clone)]
pub struct FeedbackPolicy {
    action_dim: usize,
    mean_fn: MeanFn,
    std: f64,
}

impl fmt::Debug for FeedbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeedbackPolicy")
            .field("action_dim", &self.action_dim)
            .field("std", &self.std)
            .finish_non_exhaustive()
    }
}

impl FeedbackPolicy {
    pub fn new(action_dim: usize, std: f64, mean_fn: MeanFn) -> Result<Self> {
        if action_dim == 0 {
            return Err(Error::config("action_dim", "must be positive"));
        }
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::config("sigma_pi", format!("must be finite and >= 0, got {std}")));
        }
        Ok(Self {
            action_dim,
            mean_fn,
            std,
        })
    }

    /// One-dimensional policy with mean `target - x`. With `target = 1` this is
    /// the policy used in every built-in experiment.
    pub fn reverting(target: f64, std: f64) -> Result<Self> {
        Self::new(1, std, Arc::new(move |x, out| out[0] = target - x[0]))
    }

    /// State-independent policy.
    pub fn constant(mean: Vec<f64>, std: f64) -> Result<Self> {
        let dim = mean.len();
        Self::new(dim, std, Arc::new(move |_, out| out.copy_from_slice(&mean)))
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn is_degenerate(&self) -> bool {
        self.std == 0.0
    }

    #[inline]
    pub fn mean_into(&self, x: &[f64], out: &mut [f64]) {
        (self.mean_fn)(x, out)
    }

    /// `(mean(x), std)`.
    pub fn at(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let mut mean = vec![0.0; self.action_dim];
        self.mean_into(x, &mut mean);
        (mean, self.std)
    }

    /// Inverse-CDF sampling: `a_j = mean_j(x) + std · Φ⁻¹(u_j)`. Pushes the
    /// uniform law on `(0,1)^k` forward to `π(x)`.
    pub fn sample_into(&self, x: &[f64], uniforms: &[f64], out: &mut [f64]) -> Result<()> {
        if uniforms.len() != self.action_dim {
            return Err(Error::Domain(format!(
                "expected {} uniforms, got {}",
                self.action_dim,
                uniforms.len()
            )));
        }
        if let Some(&bad) = uniforms.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::Domain(format!("uniform {bad} outside (0, 1)")));
        }
        self.mean_into(x, out);
        if self.std > 0.0 {
            for (a, &u) in out.iter_mut().zip(uniforms) {
                *a += self.std * normal_quantile(u);
            }
        }
        Ok(())
    }
}

/// `(mean(x), std)` of the policy at `x`.
pub fn policy_at(policy: &FeedbackPolicy, x: &[f64]) -> (Vec<f64>, f64) {
    policy.at(x)
}

/// Draw an action from `π(x)` using one uniform per action component.
pub fn sample_action(policy: &FeedbackPolicy, x: &[f64], uniforms: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; policy.action_dim()];
    policy.sample_into(x, uniforms, &mut out)?;
    Ok(out)
}

/// Uniform grid `t_n = n T / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config("T", format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::config("N", "number of steps must be positive"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.horizon / self.steps as f64
        }
    }
}

/// Running cost `f(t, x, a)`, terminal cost `g(x)` and discount rate `β`.
#[derive(Clone)]
pub struct CostSpec {
    pub running: RunningCostFn,
    pub terminal: TerminalCostFn,
    pub discount_rate: f64,
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostSpec")
            .field("discount_rate", &self.discount_rate)
            .finish_non_exhaustive()
    }
}

impl CostSpec {
    pub fn new(running: RunningCostFn, terminal: TerminalCostFn, discount_rate: f64) -> Result<Self> {
        if !(discount_rate.is_finite() && discount_rate >= 0.0) {
            return Err(Error::config("discount_rate", "must be finite and >= 0"));
        }
        Ok(Self {
            running,
            terminal,
            discount_rate,
        })
    }

    /// `f = |x - 1|² + 0.1 |a|²`, `g = |x|²`.
    pub fn default_quadratic() -> Self {
        Self {
            running: Arc::new(|_, x, a| {
                x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() + 0.1 * a.iter().map(|v| v * v).sum::<f64>()
            }),
            terminal: Arc::new(|x| x.iter().map(|v| v * v).sum()),
            discount_rate: 0.0,
        }
    }

    /// `f = |x - 1|²`, `g = |x|²`; the running cost ignores the action.
    pub fn state_tracking() -> Self {
        Self {
            running: Arc::new(|_, x, _| x.iter().map(|v| (v - 1.0).powi(2)).sum()),
            terminal: Arc::new(|x| x.iter().map(|v| v * v).sum()),
            discount_rate: 0.0,
        }
    }

    pub fn with_discount(mut self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::config("discount_rate", "must be finite and >= 0"));
        }
        self.discount_rate = rate;
        Ok(self)
    }
}
