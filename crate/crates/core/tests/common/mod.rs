//! Shared builders for integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use relaxsim::{FeedbackPolicy, ModelSpec};

/// Random model with `σ(x, a) = C0 + tanh(a_0)·C1 + Σ_j a_j·D_j + sin(x_0)·E`
/// and a Gaussian policy with affine mean.
pub struct RandomCase {
    pub model: ModelSpec,
    pub policy: FeedbackPolicy,
    pub x: Vec<f64>,
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d * d).map(|_| scale * uniform(rng)).collect()
}

pub fn random_case(seed: u64, d: usize, k: usize) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = matrix(&mut rng, d, 1.0);
    let c1 = matrix(&mut rng, d, 0.8);
    let ds: Vec<Vec<f64>> = (0..k).map(|_| matrix(&mut rng, d, 0.5)).collect();
    let e = matrix(&mut rng, d, 0.3);
    let b_lin: Vec<f64> = (0..d * k).map(|_| uniform(&mut rng)).collect();
    let vol = Arc::new(move |x: &[f64], a: &[f64], out: &mut [f64]| {
        let t = a[0].tanh();
        let s = x[0].sin();
        for i in 0..out.len() {
            let mut v = c0[i] + t * c1[i] + s * e[i];
            for (j, dj) in ds.iter().enumerate() {
                v += a[j] * dj[i];
            }
            out[i] = v;
        }
    });
    let drift = Arc::new(move |x: &[f64], a: &[f64], out: &mut [f64]| {
        for i in 0..out.len() {
            out[i] = -x[i] + (0..a.len()).map(|j| b_lin[i * a.len() + j] * a[j].tanh()).sum::<f64>();
        }
    });
    let model = ModelSpec::new(format!("random{seed}"), d, k, drift, vol).unwrap();
    let std = 0.05 + 0.6 * (uniform(&mut rng) + 1.0) / 2.0;
    let m: Vec<f64> = (0..k * d).map(|_| uniform(&mut rng)).collect();
    let policy = FeedbackPolicy::new(
        k,
        std,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for j in 0..out.len() {
                out[j] = (0..x.len()).map(|i| m[j * x.len() + i] * x[i]).sum::<f64>();
            }
        }),
    )
    .unwrap();
    let x = (0..d).map(|_| 2.0 * uniform(&mut rng)).collect();
    RandomCase { model, policy, x }
}

/// Adaptive Simpson on a finite interval.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `E[g(A)]`, `A ~ N(mean, std²)`, by adaptive Simpson over ±12 std.
pub fn gaussian_oracle(g: impl Fn(f64) -> f64, mean: f64, std: f64) -> f64 {
    let density = |a: f64| {
        let z = (a - mean) / std;
        (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
    };
    let h = |a: f64| g(a) * density(a);
    adaptive_simpson(&h, mean - 12.0 * std, mean + 12.0 * std, 1e-14)
}
