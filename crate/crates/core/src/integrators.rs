//! Explicit Euler schemes on a uniform grid.
//!
//! * relaxed: drift and volatility replaced by their policy averages;
//! * mixed: one action sampled from the policy per step, as an RL agent would;
//! * martingale form: relaxed drift, naive volatility on `W` and the residual
//!   volatility on an independent `B`.
//!
//! All three share [`euler_step`], so two schemes fed identical coefficients
//! and increments produce bit-identical states.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{FeedbackPolicy, ModelSpec, TimeGrid};
use crate::noise::{ActionUniforms, Increments};
use crate::quadrature::GaussHermiteRule;
use crate::relax::{Relaxation, VolMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Number of states, `N + 1`.
    pub fn len(&self) -> usize {
        self.grid.steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.state_dim..(n + 1) * self.state_dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.steps())
    }

    pub fn action(&self, m: usize) -> Option<&[f64]> {
        self.actions
            .as_ref()
            .and_then(|a| a.get(m * self.action_dim..(m + 1) * self.action_dim))
    }

    pub fn actions(&self) -> Option<&[f64]> {
        self.actions.as_deref()
    }

    /// Build a trajectory from raw row-major states (and optional actions).
    pub fn from_parts(
        grid: TimeGrid,
        state_dim: usize,
        states: Vec<f64>,
        actions: Option<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        if state_dim == 0 || states.len() != (grid.steps() + 1) * state_dim {
            return Err(Error::GridMismatch(format!(
                "expected {} states of dimension {state_dim}, got {} values",
                grid.steps() + 1,
                states.len()
            )));
        }
        let (action_dim, actions) = match actions {
            Some((k, a)) => {
                if k == 0 || a.len() != grid.steps() * k {
                    return Err(Error::GridMismatch(format!(
                        "expected {} actions of dimension {k}, got {} values",
                        grid.steps(),
                        a.len()
                    )));
                }
                (k, Some(a))
            }
            None => (0, None),
        };
        if let Some(n) = states.chunks(state_dim).position(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence {
                step: n,
                trajectory: None,
            });
        }
        Ok(Self {
            grid,
            state_dim,
            action_dim,
            states,
            actions,
        })
    }

    /// CSV with columns `t, x_0.., a_0..`; the terminal row has empty action fields.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut header = String::from("t");
        for j in 0..self.state_dim {
            header.push_str(&format!(",x_{j}"));
        }
        if self.actions.is_some() {
            for j in 0..self.action_dim {
                header.push_str(&format!(",a_{j}"));
            }
        }
        writeln!(w, "{header}")?;
        for n in 0..self.len() {
            let mut line = format!("{}", self.grid.node(n));
            for v in self.state(n) {
                line.push_str(&format!(",{v}"));
            }
            if self.actions.is_some() {
                match self.action(n).filter(|_| n < self.grid.steps()) {
                    Some(a) => a.iter().for_each(|v| line.push_str(&format!(",{v}"))),
                    None => (0..self.action_dim).for_each(|_| line.push(',')),
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// `out = x + dt·drift + vol·dw` with `vol` row-major `d × d`.
#[inline]
pub(crate) fn euler_step(x: &[f64], dt: f64, drift: &[f64], vol: &[f64], dw: &[f64], out: &mut [f64]) {
    let d = x.len();
    for i in 0..d {
        let mut noise = 0.0;
        for j in 0..d {
            noise += vol[i * d + j] * dw[j];
        }
        out[i] = x[i] + dt * drift[i] + noise;
    }
}

fn check_inputs(model: &ModelSpec, grid: &TimeGrid, increments: &Increments, x0: &[f64]) -> Result<()> {
    if increments.steps() != grid.steps() {
        return Err(Error::GridMismatch(format!(
            "{} increments for a grid of {} steps",
            increments.steps(),
            grid.steps()
        )));
    }
    if increments.dim() != model.state_dim() {
        return Err(Error::GridMismatch(format!(
            "increments of dimension {} for a state of dimension {}",
            increments.dim(),
            model.state_dim()
        )));
    }
    if (increments.horizon() - grid.horizon()).abs() > 1e-12 * grid.horizon() {
        return Err(Error::GridMismatch(format!(
            "increments span T={} but the grid spans T={}",
            increments.horizon(),
            grid.horizon()
        )));
    }
    if x0.len() != model.state_dim() {
        return Err(Error::Domain(format!(
            "initial state has {} components, model expects {}",
            x0.len(),
            model.state_dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state must be finite".into()));
    }
    Ok(())
}

/// A non-finite coefficient at a finite state means the next state is lost.
fn as_divergence(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Evaluation { .. } => Error::Divergence { step, trajectory: None },
        other => other,
    }
}

fn ensure_finite(states: &[f64], step: usize) -> Result<()> {
    if states.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { step, trajectory: None })
    }
}

/// Euler scheme for the relaxed dynamics:
/// `X̃_{n+1} = X̃_n + Δt·b̃(X̃_n) + σ̃(X̃_n)·ΔW_n`, with `σ̃` chosen by `vol_mode`.
pub fn simulate_relaxed(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    grid: &TimeGrid,
    increments: &Increments,
    x0: &[f64],
    vol_mode: VolMode,
    rule: &GaussHermiteRule,
) -> Result<Trajectory> {
    check_inputs(model, grid, increments, x0)?;
    let mut relax = Relaxation::new(model, policy, rule)?;
    let d = model.state_dim();
    let dt = grid.dt();
    let mut states = vec![0.0; (grid.steps() + 1) * d];
    states[..d].copy_from_slice(x0);
    let mut drift = vec![0.0; d];
    let mut vol = vec![0.0; d * d];
    for n in 0..grid.steps() {
        let (done, rest) = states.split_at_mut((n + 1) * d);
        let x = &done[n * d..];
        relax.drift_into(x, &mut drift).map_err(as_divergence(n + 1))?;
        relax
            .volatility_into(x, vol_mode, &mut vol)
            .map_err(as_divergence(n + 1))?;
        euler_step(x, dt, &drift, &vol, increments.step(n), &mut rest[..d]);
        ensure_finite(&rest[..d], n + 1)?;
    }
    Ok(Trajectory {
        grid: *grid,
        state_dim: d,
        action_dim: model.action_dim(),
        states,
        actions: None,
    })
}

/// Euler scheme with randomized actions:
/// `â_m = mean(X̂_m) + std·Φ⁻¹(u_m)`, `X̂_{m+1} = X̂_m + Δt·b(X̂_m, â_m) + σ(X̂_m, â_m)·ΔW_m`.
pub fn simulate_mixed(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    grid: &TimeGrid,
    increments: &Increments,
    uniforms: &ActionUniforms,
    x0: &[f64],
) -> Result<Trajectory> {
    check_inputs(model, grid, increments, x0)?;
    if model.action_dim() != policy.action_dim() {
        return Err(Error::config("policy", "policy and model action dimensions differ"));
    }
    if uniforms.steps() != grid.steps() || uniforms.action_dim() != policy.action_dim() {
        return Err(Error::GridMismatch(format!(
            "{}×{} uniforms for {} steps of a {}-dimensional action",
            uniforms.steps(),
            uniforms.action_dim(),
            grid.steps(),
            policy.action_dim()
        )));
    }
    let d = model.state_dim();
    let k = model.action_dim();
    let dt = grid.dt();
    let mut states = vec![0.0; (grid.steps() + 1) * d];
    states[..d].copy_from_slice(x0);
    let mut actions = vec![0.0; grid.steps() * k];
    let mut drift = vec![0.0; d];
    let mut vol = vec![0.0; d * d];
    for m in 0..grid.steps() {
        let (done, rest) = states.split_at_mut((m + 1) * d);
        let x = &done[m * d..];
        let a = &mut actions[m * k..(m + 1) * k];
        policy.sample_into(x, uniforms.step(m), a)?;
        model.drift_into(x, a, &mut drift);
        model.volatility_into(x, a, &mut vol);
        euler_step(x, dt, &drift, &vol, increments.step(m), &mut rest[..d]);
        ensure_finite(&rest[..d], m + 1)?;
    }
    Ok(Trajectory {
        grid: *grid,
        state_dim: d,
        action_dim: k,
        states,
        actions: Some(actions),
    })
}

/// Euler scheme for `dX = b̃ dt + σ̃ dW + s̃ dB` with `σ̃σ̃* + s̃s̃* = ∫σσ* dπ`.
pub fn simulate_martingale_form(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    grid: &TimeGrid,
    increments_w: &Increments,
    increments_b: &Increments,
    x0: &[f64],
    rule: &GaussHermiteRule,
) -> Result<Trajectory> {
    check_inputs(model, grid, increments_w, x0)?;
    check_inputs(model, grid, increments_b, x0)?;
    let mut relax = Relaxation::new(model, policy, rule)?;
    let d = model.state_dim();
    let dt = grid.dt();
    let mut states = vec![0.0; (grid.steps() + 1) * d];
    states[..d].copy_from_slice(x0);
    let mut drift = vec![0.0; d];
    let mut naive = vec![0.0; d * d];
    let mut residual = vec![0.0; d * d];
    for n in 0..grid.steps() {
        let (done, rest) = states.split_at_mut((n + 1) * d);
        let x = &done[n * d..];
        relax.drift_into(x, &mut drift).map_err(as_divergence(n + 1))?;
        relax
            .split_volatility_into(x, &mut naive, &mut residual)
            .map_err(as_divergence(n + 1))?;
        let out = &mut rest[..d];
        euler_step(x, dt, &drift, &naive, increments_w.step(n), out);
        if residual.iter().any(|&s| s != 0.0) {
            let db = increments_b.step(n);
            for i in 0..d {
                let mut extra = 0.0;
                for j in 0..d {
                    extra += residual[i * d + j] * db[j];
                }
                out[i] += extra;
            }
        }
        ensure_finite(out, n + 1)?;
    }
    Ok(Trajectory {
        grid: *grid,
        state_dim: d,
        action_dim: model.action_dim(),
        states,
        actions: None,
    })
}
