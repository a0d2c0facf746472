//! A user-defined two-dimensional model with a two-dimensional action.
//!
//! cargo run --release --example custom_model

use std::sync::Arc;

use relaxsim::{
    convergence_study, diffusion_matrix, fit_rate, FeedbackPolicy, GaussHermiteRule, ModelSpec, StudyParams, VolMode,
};

fn main() -> relaxsim::Result<()> {
    // dX = (a - X) dt + diag(0.2 + 0.1 tanh(a_0), 0.2) dW
    let model = ModelSpec::new(
        "oscillator",
        2,
        2,
        Arc::new(|x, a, out| {
            out[0] = a[0] - x[0];
            out[1] = a[1] - x[1] + 0.5 * x[0];
        }),
        Arc::new(|_, a, out| out.copy_from_slice(&[0.2 + 0.1 * a[0].tanh(), 0.0, 0.0, 0.2])),
    )?
    .with_action_clip(3.0)?;
    let policy = FeedbackPolicy::new(
        2,
        0.3,
        Arc::new(|x, out| {
            out[0] = -x[1];
            out[1] = x[0];
        }),
    )?;

    let rule = GaussHermiteRule::cached(10)?;
    println!(
        "averaged diffusion at (0.5, -0.5):\n{}",
        diffusion_matrix(&model, &policy, &[0.5, -0.5], rule)?
    );

    for mode in [VolMode::Naive, VolMode::Sqrt] {
        let params = StudyParams {
            x0: vec![0.5, -0.5],
            runs: 2,
            trajectories_per_run: 500,
            fine_steps: 400,
            vol_mode: mode,
            ..StudyParams::default()
        };
        let records = convergence_study(&model, &policy, &[25, 50, 100, 200, 400], &params)?;
        println!("{mode}: slope {:.3}", fit_rate(&records)?.slope);
    }
    Ok(())
}
