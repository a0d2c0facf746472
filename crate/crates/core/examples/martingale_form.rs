//! Relaxed dynamics with an auxiliary Brownian motion carrying the residual volatility.
//!
//! cargo run --release --example martingale_form

use relaxsim::{
    diffusion_matrix, generate_auxiliary_lattice, generate_lattice, relaxed_volatility, residual_volatility,
    simulate_martingale_form, FeedbackPolicy, GaussHermiteRule, Setting, TimeGrid, VolMode,
};

fn main() -> relaxsim::Result<()> {
    let model = Setting::Setting3.model(0.2);
    let policy = FeedbackPolicy::reverting(1.0, 0.2)?;
    let rule = GaussHermiteRule::cached(10)?;

    let x = [0.3];
    let naive = relaxed_volatility(&model, &policy, &x, VolMode::Naive, rule)?[(0, 0)];
    let s = residual_volatility(&model, &policy, &x, rule)?[(0, 0)];
    let a = diffusion_matrix(&model, &policy, &x, rule)?[(0, 0)];
    println!(
        "at x = 0.3: naive^2 + residual^2 = {:.15}, averaged sigma^2 = {:.15}",
        naive * naive + s * s,
        a
    );

    let (steps, paths) = (200, 4000);
    let grid = TimeGrid::new(5.0, steps)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for index in 0..paths {
        let w = generate_lattice(7, index, steps, 5.0, 1)?.coarsen(steps)?;
        let b = generate_auxiliary_lattice(7, index, steps, 5.0, 1)?.coarsen(steps)?;
        let xt = simulate_martingale_form(&model, &policy, &grid, &w, &b, &[0.0], rule)?.terminal()[0];
        sum += xt;
        sum_sq += xt * xt;
    }
    let mean = sum / paths as f64;
    println!(
        "X_T over {paths} paths: mean {mean:.5}, sd {:.5}",
        (sum_sq / paths as f64 - mean * mean).sqrt()
    );
    Ok(())
}
