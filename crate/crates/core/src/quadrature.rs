//! Gauss–Hermite quadrature for the weight `exp(-t²)` on the real line.
//!
//! Nodes are the eigenvalues of the Jacobi matrix of the Hermite recurrence
//! (zero diagonal, off-diagonal `sqrt(j/2)`), polished by one Newton step on
//! the orthonormal recurrence. Weights come from the Christoffel function
//! `w_i = 1 / Σ_j p_j(t_i)²` of the orthonormal polynomials, which keeps them
//! positive and accurate even when they underflow the eigenvector route.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 64;
/// Order used by every built-in experiment.
pub const DEFAULT_ORDER: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn new(order: usize) -> Result<Self> {
        build_rule(order)
    }

    /// Shared rule for `order`, built on first use.
    pub fn cached(order: usize) -> Result<&'static GaussHermiteRule> {
        static RULES: [OnceLock<GaussHermiteRule>; MAX_ORDER] = [const { OnceLock::new() }; MAX_ORDER];
        check_order(order)?;
        Ok(RULES[order - 1].get_or_init(|| compute_rule(order)))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `Σ w_i f(t_i)`, approximating `∫ f(t) exp(-t²) dt`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(t, w)| w * f(t)).sum()
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::config(
            "quadrature_order",
            format!("must lie in 1..={MAX_ORDER}, got {order}"),
        ))
    }
}

/// Build the physicists' Gauss–Hermite rule of the given order.
pub fn build_rule(order: usize) -> Result<GaussHermiteRule> {
    check_order(order)?;
    Ok(compute_rule(order))
}

/// Orthonormal Hermite values `(p_{n-1}(t), p_n(t), Σ_{j<n} p_j(t)²)`.
fn orthonormal_hermite(n: usize, t: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut sum_sq = 0.0;
    for j in 0..n {
        sum_sq += cur * cur;
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * t * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (prev, cur, sum_sq)
}

fn compute_rule(order: usize) -> GaussHermiteRule {
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            ((i.max(j)) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    // p_n' = sqrt(2n) p_{n-1} for orthonormal Hermite polynomials.
    let n = order as f64;
    for t in nodes.iter_mut() {
        let (p_prev, p_n, _) = orthonormal_hermite(order, *t);
        if p_prev != 0.0 {
            *t -= p_n / ((2.0 * n).sqrt() * p_prev);
        }
    }

    for i in 0..order / 2 {
        let j = order - 1 - i;
        let half = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -half;
        nodes[j] = half;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }

    let weights = nodes.iter().map(|&t| 1.0 / orthonormal_hermite(order, t).2).collect();
    GaussHermiteRule { nodes, weights }
}

/// `E[f(A)]` for `A ~ N(mean, std²)` via `a = mean + √2·std·t`.
///
/// With `std == 0` this returns `f(mean)` exactly.
pub fn gaussian_expectation(f: impl Fn(f64) -> f64, mean: f64, std: f64, rule: &GaussHermiteRule) -> Result<f64> {
    if std.is_nan() || std < 0.0 {
        return Err(Error::Domain(format!("standard deviation must be >= 0, got {std}")));
    }
    if std == 0.0 {
        let value = f(mean);
        return if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Evaluation {
                node: vec![mean],
                value,
            })
        };
    }
    let scale = std::f64::consts::SQRT_2 * std;
    let mut acc = 0.0;
    for (t, w) in rule.iter() {
        let a = mean + scale * t;
        let value = f(a);
        if !value.is_finite() {
            return Err(Error::Evaluation { node: vec![a], value });
        }
        acc += w * value;
    }
    Ok(acc / PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders_closed_form() {
        let r1 = build_rule(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert!((r1.weights()[0] - PI.sqrt()).abs() < 1e-15);

        let r2 = build_rule(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r2.nodes()[0] + h).abs() < 1e-15);
        assert!((r2.nodes()[1] - h).abs() < 1e-15);
        for w in r2.weights() {
            assert!((w - PI.sqrt() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn order_range_checked() {
        assert!(matches!(build_rule(0), Err(Error::Config { .. })));
        assert!(matches!(build_rule(65), Err(Error::Config { .. })));
        assert!(build_rule(64).is_ok());
    }

    #[test]
    fn weights_sum_and_symmetry() {
        for order in 1..=MAX_ORDER {
            let rule = GaussHermiteRule::cached(order).unwrap();
            let total: f64 = rule.weights().iter().sum();
            assert!((total / PI.sqrt() - 1.0).abs() < 1e-12, "order {order}: {total}");
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            for i in 0..order {
                assert!((rule.nodes()[i] + rule.nodes()[order - 1 - i]).abs() < 1e-12);
            }
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn degenerate_expectation_is_pointwise() {
        let rule = build_rule(10).unwrap();
        let v = gaussian_expectation(|a| a.sin() * 3.0, 0.7, 0.0, &rule).unwrap();
        assert_eq!(v, 0.7_f64.sin() * 3.0);
    }

    #[test]
    fn low_moments() {
        let rule = build_rule(10).unwrap();
        let m1 = gaussian_expectation(|a| a, 0.37, 1.3, &rule).unwrap();
        assert!((m1 - 0.37).abs() < 1e-14);
        let m2 = gaussian_expectation(|a| a * a, 0.0, 1.0, &rule).unwrap();
        assert!((m2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_against_reference() {
        // 40-digit adaptive mpmath quadrature of E[tanh(A)], A ~ N(1, 0.2²).
        let reference = 0.748_949_522_234_33;
        let rule = build_rule(10).unwrap();
        let v = gaussian_expectation(f64::tanh, 1.0, 0.2, &rule).unwrap();
        assert!((v - reference).abs() < 1e-8, "{v}");
    }

    #[test]
    fn non_finite_integrand_reports_node() {
        let rule = build_rule(4).unwrap();
        let err = gaussian_expectation(|a| if a > 0.5 { f64::NAN } else { a }, 0.0, 1.0, &rule).unwrap_err();
        match err {
            Error::Evaluation { node, .. } => assert!(node[0] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(gaussian_expectation(|a| a, 0.0, -1.0, &rule).is_err());
    }
}
