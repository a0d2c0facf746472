//! Policy-averaged drift and the three volatility choices for each built-in setting.
//!
//! cargo run --example relaxed_coefficients

use relaxsim::{
    diffusion_matrix, relaxed_drift, relaxed_volatility, residual_volatility, FeedbackPolicy, GaussHermiteRule,
    Setting, VolMode,
};

fn main() -> relaxsim::Result<()> {
    let rule = GaussHermiteRule::cached(10)?;
    let policy = FeedbackPolicy::reverting(1.0, 0.2)?;
    println!("policy: N(1 - x, 0.2^2)\n");
    println!(
        "{:>10} {:>5} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "setting", "x", "drift", "naive", "sqrt", "a", "residual"
    );
    for setting in Setting::ALL {
        let model = setting.model(0.2);
        for x in [-1.0, 0.0, 0.5, 1.0] {
            let b = relaxed_drift(&model, &policy, &[x], rule)?[0];
            let naive = relaxed_volatility(&model, &policy, &[x], VolMode::Naive, rule)?[(0, 0)];
            let sqrt = relaxed_volatility(&model, &policy, &[x], VolMode::Sqrt, rule)?[(0, 0)];
            let a = diffusion_matrix(&model, &policy, &[x], rule)?[(0, 0)];
            let s = residual_volatility(&model, &policy, &[x], rule)?[(0, 0)];
            println!(
                "{:>10} {x:>5} {b:>10.6} {naive:>10.6} {sqrt:>10.6} {a:>10.6} {s:>10.6}",
                setting.as_str()
            );
        }
    }
    Ok(())
}
