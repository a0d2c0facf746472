//! Expected discrete cost of randomized actions against the policy-averaged cost.
//!
//! cargo run --release --example cost_gap

use relaxsim::{cost_gap_study, CostSpec, FeedbackPolicy, Setting, StudyParams};

fn main() -> relaxsim::Result<()> {
    let model = Setting::Setting1.model(0.0);
    let policy = FeedbackPolicy::reverting(1.0, 0.2)?;
    let params = StudyParams {
        runs: 1,
        trajectories_per_run: 5000,
        ..StudyParams::default()
    };
    for (label, costs) in [
        ("f = (x-1)^2 + 0.1 a^2", CostSpec::default_quadratic()),
        (
            "same, discounted at 0.5",
            CostSpec::default_quadratic().with_discount(0.5)?,
        ),
    ] {
        println!("{label}");
        for r in cost_gap_study(&model, &policy, &costs, &[50, 200, 1000], &params)? {
            println!(
                "  N={:>4}  discrete {:.5}  relaxed {:.5}  gap {:.2e} ± {:.1e}",
                r.steps, r.mean_discrete_cost, r.mean_relaxed_cost, r.gap, r.std_error
            );
        }
    }
    Ok(())
}
