//! Action-dependent volatility: naive and square-root relaxations decay slower.
//!
//! cargo run --release --example controlled_volatility

use relaxsim::{convergence_study, fit_rate, FeedbackPolicy, Setting, StudyParams, VolMode};

fn main() -> relaxsim::Result<()> {
    let policy = FeedbackPolicy::reverting(1.0, 0.2)?;
    let steps = [50, 100, 200, 500, 1000];
    let base = StudyParams {
        runs: 5,
        trajectories_per_run: 1000,
        ..StudyParams::default()
    };
    let cases = [
        ("setting2", Setting::Setting2.model(0.0), VolMode::Uncontrolled),
        ("setting3 naive", Setting::Setting3.model(0.2), VolMode::Naive),
        ("setting3 sqrt", Setting::Setting3.model(0.2), VolMode::Sqrt),
    ];
    for (label, model, mode) in cases {
        let params = StudyParams {
            vol_mode: mode,
            ..base.clone()
        };
        let records = convergence_study(&model, &policy, &steps, &params)?;
        let fit = fit_rate(&records)?;
        let errors: Vec<String> = records.iter().map(|r| format!("{:.2e}", r.mean_sup_sq_error)).collect();
        println!(
            "{label:<15} slope {:+.3}  r^2 {:.3}  errors {}",
            fit.slope,
            fit.r_squared,
            errors.join(" ")
        );
    }
    Ok(())
}
