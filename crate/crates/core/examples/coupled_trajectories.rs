//! Relaxed and mixed sample paths driven by the same Brownian increments.
//!
//! cargo run --example coupled_trajectories -- [N] [trajectory_index]

use relaxsim::{coupled_trajectories, sup_sq_error, FeedbackPolicy, Setting, StudyParams};

fn main() -> relaxsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map_or(50, |s| s.parse().expect("N"));
    let index: u64 = args.next().map_or(0, |s| s.parse().expect("trajectory index"));

    let model = Setting::Setting1.model(0.0);
    let policy = FeedbackPolicy::reverting(1.0, 0.2)?;
    let params = StudyParams {
        fine_steps: steps,
        ..StudyParams::default()
    };
    let pair = coupled_trajectories(&model, &policy, steps, &params, index)?;

    println!("{:>6} {:>12} {:>12} {:>12}", "t", "relaxed", "mixed", "action");
    let stride = (steps / 10).max(1);
    for n in (0..=steps).step_by(stride) {
        let action = pair
            .mixed
            .action(n)
            .map_or(String::from("-"), |a| format!("{:.6}", a[0]));
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>12}",
            pair.relaxed.grid().node(n),
            pair.relaxed.state(n)[0],
            pair.mixed.state(n)[0],
            action
        );
    }
    println!(
        "\nmax_n |X̃_n - X̂_n|^2 = {:.6e}",
        sup_sq_error(&pair.relaxed, &pair.mixed)?
    );

    pair.mixed.write_csv(std::io::sink())?;
    Ok(())
}
