//! Gauss–Hermite rules and Gaussian expectations.
//!
//! cargo run --example quadrature

use relaxsim::cli::standard_normal_moment;
use relaxsim::{gaussian_expectation, GaussHermiteRule};

fn main() -> relaxsim::Result<()> {
    let rule = GaussHermiteRule::cached(10)?;
    println!("order-10 rule (weight e^(-t^2)):");
    for (t, w) in rule.iter() {
        println!("  {t:>22.17} {w:.17e}");
    }

    println!("\nE[A^k], A ~ N(0,1):");
    for k in [2, 4, 8, 12, 18] {
        let q = gaussian_expectation(|a| a.powi(k), 0.0, 1.0, rule)?;
        println!("  k={k:2}  rule {q:<22}  exact {}", standard_normal_moment(k as u32));
    }

    let tanh = gaussian_expectation(f64::tanh, 1.0, 0.2, rule)?;
    println!("\nE[tanh(A)], A ~ N(1, 0.2^2) = {tanh:.15}");
    Ok(())
}
