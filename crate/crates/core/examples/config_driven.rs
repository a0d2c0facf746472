//! The configuration layer and runner used by the `relaxsim` binary.
//!
//! cargo run --release --example config_driven -- [output_dir]

use relaxsim::cli::run_study;
use relaxsim::parse_config;

const DOC: &str = r#"
setting = "setting3"
c_sigma = 0.2
N_fine = 200
N_list = [25, 50, 100, 200]
runs = 3
trajectories_per_run = 500
vol_mode = "both"
dump_trajectories = true
trajectory_indices = [0, 1]
"#;

fn main() -> relaxsim::Result<()> {
    let mut cfg = parse_config(DOC)?;
    if let Some(dir) = std::env::args().nth(1) {
        cfg.output_dir = dir.into();
    } else {
        cfg.output_dir = std::env::temp_dir().join("relaxsim-config-example");
    }
    let outcome = run_study(&cfg)?;
    for m in &outcome.modes {
        let slope = m.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
        println!("{}: slope {slope:.3} -> {}", m.vol_mode, m.convergence_csv.display());
    }
    println!(
        "{} trajectory files under {}",
        outcome.trajectory_files.len(),
        cfg.output_dir.display()
    );
    Ok(())
}
