//! Strong-error study and rate fit for the linear-drift model.
//!
//! cargo run --release --example convergence_study

use relaxsim::{convergence_study, fit_rate, FeedbackPolicy, Setting, StudyParams};

fn main() -> relaxsim::Result<()> {
    let model = Setting::Setting1.model(0.0);
    let policy = FeedbackPolicy::reverting(1.0, 0.2)?;
    let params = StudyParams {
        runs: 10,
        trajectories_per_run: 1000,
        ..StudyParams::default()
    };
    let steps = [50, 100, 200, 500, 1000];
    let records = convergence_study(&model, &policy, &steps, &params)?;
    println!("{:>5} {:>14} {:>14}", "N", "mean error", "std runs");
    for r in &records {
        println!(
            "{:>5} {:>14.6e} {:>14.3e}",
            r.steps, r.mean_sup_sq_error, r.std_across_runs
        );
    }
    let fit = fit_rate(&records)?;
    println!(
        "\nslope {:.4}, intercept {:.4}, r^2 {:.5}",
        fit.slope, fit.intercept, fit.r_squared
    );
    Ok(())
}
