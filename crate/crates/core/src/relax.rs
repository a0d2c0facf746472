//! Relaxed coefficients: integrals of the model coefficients against the
//! Gaussian policy, plus the symmetric square roots needed to turn a
//! randomized diffusion matrix back into volatilities.
//!
//! Matrices cross the hot path as row-major `d × d` slices; the free
//! functions at the bottom wrap them in `nalgebra` matrices.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{FeedbackPolicy, ModelSpec};
use crate::quadrature::GaussHermiteRule;

/// Relative eigenvalue tolerance below which a matrix still counts as PSD.
pub const PSD_RELATIVE_TOLERANCE: f64 = 1e-10;

/// How the relaxed scheme replaces an action-dependent volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolMode {
    /// `σ(x)`; only valid when the volatility ignores the action.
    Uncontrolled,
    /// Policy average `∫ σ(x,a) π(x)(da)`.
    Naive,
    /// Symmetric square root of `∫ σσ*(x,a) π(x)(da)`.
    Sqrt,
}

impl VolMode {
    pub fn as_str(self) -> &'static str {
        match self {
            VolMode::Uncontrolled => "uncontrolled",
            VolMode::Naive => "naive",
            VolMode::Sqrt => "sqrt",
        }
    }
}

impl fmt::Display for VolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncontrolled" => Ok(VolMode::Uncontrolled),
            "naive" => Ok(VolMode::Naive),
            "sqrt" => Ok(VolMode::Sqrt),
            other => Err(Error::config(
                "vol_mode",
                format!("unknown mode `{other}` (expected uncontrolled, naive or sqrt)"),
            )),
        }
    }
}

/// Quadrature over the tensor-product Gauss–Hermite rule for `N(mean, std² I)`.
///
/// `eval(action, value)` fills `value` (same length as `out`). With
/// `std == 0` the integrand is evaluated once at the mean and copied.
#[allow(clippy::too_many_arguments)]
fn tensor_expectation(
    rule: &GaussHermiteRule,
    mean: &[f64],
    std: f64,
    action: &mut [f64],
    index: &mut [usize],
    value: &mut [f64],
    out: &mut [f64],
    mut eval: impl FnMut(&[f64], &mut [f64]),
) -> Result<()> {
    let check = |action: &[f64], value: &[f64]| -> Result<()> {
        match value.iter().find(|v| !v.is_finite()) {
            Some(&bad) => Err(Error::Evaluation {
                node: action.to_vec(),
                value: bad,
            }),
            None => Ok(()),
        }
    };

    if std == 0.0 {
        eval(mean, out);
        return check(mean, out);
    }

    let k = mean.len();
    let scale = SQRT_2 * std;
    let nodes = rule.nodes();
    let weights = rule.weights();
    out.fill(0.0);

    if k == 1 {
        for (&t, &w) in nodes.iter().zip(weights) {
            action[0] = mean[0] + scale * t;
            eval(action, value);
            check(action, value)?;
            for (o, v) in out.iter_mut().zip(value.iter()) {
                *o += w * *v;
            }
        }
        let norm = PI.sqrt();
        out.iter_mut().for_each(|o| *o /= norm);
        return Ok(());
    }

    let n = rule.order();
    index.fill(0);
    loop {
        let mut weight = 1.0;
        for j in 0..k {
            action[j] = mean[j] + scale * nodes[index[j]];
            weight *= weights[index[j]];
        }
        eval(action, value);
        check(action, value)?;
        for (o, v) in out.iter_mut().zip(value.iter()) {
            *o += weight * *v;
        }
        // odometer increment
        let mut j = 0;
        while j < k {
            index[j] += 1;
            if index[j] < n {
                break;
            }
            index[j] = 0;
            j += 1;
        }
        if j == k {
            break;
        }
    }
    let norm = PI.powf(k as f64 / 2.0);
    out.iter_mut().for_each(|o| *o /= norm);
    Ok(())
}

/// `out = σ σ*` for row-major `d × d` `sigma`; exactly symmetric.
#[inline]
fn outer_self(d: usize, sigma: &[f64], out: &mut [f64]) {
    for i in 0..d {
        for j in i..d {
            let mut acc = 0.0;
            for l in 0..d {
                acc += sigma[i * d + l] * sigma[j * d + l];
            }
            out[i * d + j] = acc;
            out[j * d + i] = acc;
        }
    }
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Symmetric PSD square root of the row-major `d × d` matrix `m`.
/// Eigenvalues in `[-tolerance, 0)` are clamped to zero.
pub(crate) fn psd_sqrt_into(d: usize, m: &[f64], tolerance: f64, out: &mut [f64]) -> Result<()> {
    if d == 1 {
        let v = m[0];
        if v < -tolerance || v.is_nan() {
            return Err(Error::NotPsd {
                eigenvalue: v,
                tolerance,
            });
        }
        out[0] = v.max(0.0).sqrt();
        return Ok(());
    }
    let mut asymmetry: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            asymmetry = asymmetry.max((m[i * d + j] - m[j * d + i]).abs());
        }
    }
    if asymmetry > PSD_RELATIVE_TOLERANCE * frobenius(m) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let matrix = DMatrix::from_row_slice(d, d, m);
    let eigen = SymmetricEigen::new(matrix);
    if let Some(&bad) = eigen.eigenvalues.iter().find(|&&l| l < -tolerance || l.is_nan()) {
        return Err(Error::NotPsd {
            eigenvalue: bad,
            tolerance,
        });
    }
    let roots = eigen.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eigen.eigenvectors;
    for i in 0..d {
        for j in i..d {
            let mut acc = 0.0;
            for l in 0..d {
                acc += v[(i, l)] * roots[l] * v[(j, l)];
            }
            out[i * d + j] = acc;
            out[j * d + i] = acc;
        }
    }
    Ok(())
}

/// Relaxed coefficients of one `(model, policy, rule)` triple, with the
/// scratch space needed to evaluate them without allocating per call.
pub struct Relaxation<'a> {
    model: &'a ModelSpec,
    policy: &'a FeedbackPolicy,
    rule: &'a GaussHermiteRule,
    mean: Vec<f64>,
    action: Vec<f64>,
    index: Vec<usize>,
    value: Vec<f64>,
    sigma: Vec<f64>,
    moments: Vec<f64>,
}

impl<'a> Relaxation<'a> {
    pub fn new(model: &'a ModelSpec, policy: &'a FeedbackPolicy, rule: &'a GaussHermiteRule) -> Result<Self> {
        if model.action_dim() != policy.action_dim() {
            return Err(Error::config(
                "policy",
                format!(
                    "policy action dimension {} does not match model action dimension {}",
                    policy.action_dim(),
                    model.action_dim()
                ),
            ));
        }
        let d = model.state_dim();
        let k = model.action_dim();
        Ok(Self {
            model,
            policy,
            rule,
            mean: vec![0.0; k],
            action: vec![0.0; k],
            index: vec![0; k],
            value: vec![0.0; 2 * d * d],
            sigma: vec![0.0; d * d],
            moments: vec![0.0; 2 * d * d],
        })
    }

    pub fn model(&self) -> &'a ModelSpec {
        self.model
    }

    pub fn policy(&self) -> &'a FeedbackPolicy {
        self.policy
    }

    pub fn rule(&self) -> &'a GaussHermiteRule {
        self.rule
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.model.state_dim() {
            return Err(Error::Domain(format!(
                "state has {} components, model expects {}",
                x.len(),
                self.model.state_dim()
            )));
        }
        Ok(())
    }

    /// `b̃(x, π(x)) = ∫ b(x, a) π(x)(da)`.
    pub fn drift_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_state(x)?;
        let d = self.model.state_dim();
        self.policy.mean_into(x, &mut self.mean);
        let model = self.model;
        tensor_expectation(
            self.rule,
            &self.mean,
            self.policy.std(),
            &mut self.action,
            &mut self.index,
            &mut self.value[..d],
            out,
            |a, v| model.drift_into(x, a, v),
        )
    }

    /// Entrywise policy average of `σ(x, ·)`.
    pub fn naive_volatility_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_state(x)?;
        let d = self.model.state_dim();
        self.policy.mean_into(x, &mut self.mean);
        let model = self.model;
        if !model.has_controlled_volatility() {
            model.volatility_into(x, &self.mean, out);
            return Ok(());
        }
        tensor_expectation(
            self.rule,
            &self.mean,
            self.policy.std(),
            &mut self.action,
            &mut self.index,
            &mut self.value[..d * d],
            out,
            |a, v| model.volatility_into(x, a, v),
        )
    }

    /// `𝔞(x, π) = ∫ σσ*(x, a) π(x)(da)`.
    pub fn diffusion_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_state(x)?;
        let d = self.model.state_dim();
        self.policy.mean_into(x, &mut self.mean);
        let model = self.model;
        if !model.has_controlled_volatility() {
            model.volatility_into(x, &self.mean, &mut self.sigma);
            outer_self(d, &self.sigma, out);
            return Ok(());
        }
        let sigma = &mut self.sigma;
        tensor_expectation(
            self.rule,
            &self.mean,
            self.policy.std(),
            &mut self.action,
            &mut self.index,
            &mut self.value[..d * d],
            out,
            |a, v| {
                model.volatility_into(x, a, sigma);
                outer_self(d, sigma, v);
            },
        )
    }

    /// Policy average of `σ` and of `σσ*` in a single quadrature pass.
    fn moments_into(&mut self, x: &[f64]) -> Result<()> {
        self.check_state(x)?;
        let d = self.model.state_dim();
        let dd = d * d;
        self.policy.mean_into(x, &mut self.mean);
        let model = self.model;
        let sigma = &mut self.sigma;
        tensor_expectation(
            self.rule,
            &self.mean,
            self.policy.std(),
            &mut self.action,
            &mut self.index,
            &mut self.value[..2 * dd],
            &mut self.moments,
            |a, v| {
                model.volatility_into(x, a, sigma);
                v[..dd].copy_from_slice(sigma);
                outer_self(d, sigma, &mut v[dd..]);
            },
        )
    }

    /// Symmetric square root of the randomized diffusion matrix.
    pub fn sqrt_volatility_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.model.state_dim();
        let mut diffusion = std::mem::take(&mut self.moments);
        let result = self.diffusion_into(x, &mut diffusion[..d * d]).and_then(|_| {
            let tol = PSD_RELATIVE_TOLERANCE * frobenius(&diffusion[..d * d]);
            psd_sqrt_into(d, &diffusion[..d * d], tol, out)
        });
        self.moments = diffusion;
        result
    }

    /// Volatility used by the relaxed Euler scheme under `mode`.
    pub fn volatility_into(&mut self, x: &[f64], mode: VolMode, out: &mut [f64]) -> Result<()> {
        match mode {
            VolMode::Uncontrolled => {
                if self.model.has_controlled_volatility() {
                    return Err(Error::config(
                        "vol_mode",
                        format!(
                            "model `{}` has action-dependent volatility; use naive or sqrt",
                            self.model.name()
                        ),
                    ));
                }
                self.check_state(x)?;
                self.policy.mean_into(x, &mut self.mean);
                self.model.volatility_into(x, &self.mean, out);
                Ok(())
            }
            VolMode::Naive => self.naive_volatility_into(x, out),
            VolMode::Sqrt => self.sqrt_volatility_into(x, out),
        }
    }

    /// Writes the naive volatility `σ̃` into `naive` and the residual
    /// `s̃ = sqrt(𝔞 - σ̃σ̃*)` into `residual`.
    pub fn split_volatility_into(&mut self, x: &[f64], naive: &mut [f64], residual: &mut [f64]) -> Result<()> {
        let d = self.model.state_dim();
        let dd = d * d;
        if !self.model.has_controlled_volatility() || self.policy.is_degenerate() {
            self.naive_volatility_into(x, naive)?;
            residual.fill(0.0);
            return Ok(());
        }
        self.moments_into(x)?;
        naive.copy_from_slice(&self.moments[..dd]);
        let square = &mut self.value[..dd];
        outer_self(d, naive, square);
        let tol = PSD_RELATIVE_TOLERANCE * frobenius(&self.moments[dd..]).max(frobenius(square));
        for (s, a) in square.iter_mut().zip(&self.moments[dd..]) {
            *s = a - *s;
        }
        psd_sqrt_into(d, square, tol, residual)
    }
}

/// `∫ f(a) π(x)(da)` for a scalar integrand over the action space.
pub fn policy_expectation(
    policy: &FeedbackPolicy,
    x: &[f64],
    rule: &GaussHermiteRule,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<f64> {
    let k = policy.action_dim();
    let (mean, std) = policy.at(x);
    let mut action = vec![0.0; k];
    let mut index = vec![0; k];
    let mut value = [0.0];
    let mut out = [0.0];
    tensor_expectation(
        rule,
        &mean,
        std,
        &mut action,
        &mut index,
        &mut value,
        &mut out,
        |a, v| v[0] = f(a),
    )?;
    Ok(out[0])
}

fn matrix(d: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, data)
}

/// `∫ b(x, a) π(x)(da)` componentwise.
pub fn relaxed_drift(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    x: &[f64],
    rule: &GaussHermiteRule,
) -> Result<Vec<f64>> {
    let mut relax = Relaxation::new(model, policy, rule)?;
    let mut out = vec![0.0; model.state_dim()];
    relax.drift_into(x, &mut out)?;
    Ok(out)
}

pub fn relaxed_volatility(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    x: &[f64],
    mode: VolMode,
    rule: &GaussHermiteRule,
) -> Result<DMatrix<f64>> {
    let d = model.state_dim();
    let mut relax = Relaxation::new(model, policy, rule)?;
    let mut out = vec![0.0; d * d];
    relax.volatility_into(x, mode, &mut out)?;
    Ok(matrix(d, &out))
}

pub fn diffusion_matrix(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    x: &[f64],
    rule: &GaussHermiteRule,
) -> Result<DMatrix<f64>> {
    let d = model.state_dim();
    let mut relax = Relaxation::new(model, policy, rule)?;
    let mut out = vec![0.0; d * d];
    relax.diffusion_into(x, &mut out)?;
    Ok(matrix(d, &out))
}

/// Residual volatility `s̃` with `𝔞 = σ̃σ̃* + s̃s̃*`. In one dimension this is
/// the standard deviation of `σ(x, A)`, `A ~ π(x)`.
pub fn residual_volatility(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    x: &[f64],
    rule: &GaussHermiteRule,
) -> Result<DMatrix<f64>> {
    let d = model.state_dim();
    let mut relax = Relaxation::new(model, policy, rule)?;
    let mut naive = vec![0.0; d * d];
    let mut residual = vec![0.0; d * d];
    relax.split_volatility_into(x, &mut naive, &mut residual)?;
    Ok(matrix(d, &residual))
}

/// Symmetric PSD square root with tolerance `1e-10 · ‖M‖_F`.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Domain(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let d = m.nrows();
    let data: Vec<f64> = m.transpose().as_slice().to_vec();
    let tol = PSD_RELATIVE_TOLERANCE * m.norm();
    let mut out = vec![0.0; d * d];
    psd_sqrt_into(d, &data, tol, &mut out)?;
    Ok(matrix(d, &out))
}
