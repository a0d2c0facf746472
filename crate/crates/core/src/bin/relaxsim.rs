use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relaxsim::cli::{self, error_record};
use relaxsim::config::{ConfigLayer, Preset, Scalars, StudyConfig};
use relaxsim::Error;

#[derive(Parser)]
#[command(
    name = "relaxsim",
    version,
    about = "Relaxed-control vs randomized-action strong convergence studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study and log-log rate fit.
    Study(Common),
    /// Coupled relaxed/mixed sample paths.
    Trajectories(Common),
    /// Gap between expected discrete and relaxed costs.
    CostGap(Common),
    /// Self-test of the Gauss-Hermite rules against exact Gaussian moments.
    QuadratureCheck {
        #[arg(long, default_value_t = 20)]
        max_order: usize,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// paper-setting1, paper-setting2, paper-setting3 or ci.
    #[arg(long)]
    preset: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    c_sigma: Option<f64>,
    #[arg(long)]
    sigma_pi: Option<f64>,
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long = "N-fine", alias = "n-fine")]
    n_fine: Option<usize>,
    #[arg(long = "N-list", alias = "n-list", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    trajectories_per_run: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// auto, uncontrolled, naive, sqrt or both.
    #[arg(long)]
    vol_mode: Option<String>,
    #[arg(long)]
    quadrature_order: Option<usize>,
    /// default or state-tracking.
    #[arg(long)]
    cost: Option<String>,
    #[arg(long)]
    discount_rate: Option<f64>,
    /// Defaults to $RELAXSIM_OUTPUT_DIR, then ./relaxsim-out.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    trajectory_indices: Option<Vec<u64>>,
    #[arg(long)]
    dump_trajectories: bool,
    #[arg(long)]
    action_clip: Option<f64>,
}

impl Common {
    fn flag_layer(&self) -> ConfigLayer {
        ConfigLayer {
            setting: self.setting.clone(),
            c_sigma: self.c_sigma,
            sigma_pi: self.sigma_pi,
            horizon: self.horizon,
            x0: self.x0.clone().map(Scalars::Many),
            n_fine: self.n_fine,
            n_list: self.n_list.clone(),
            runs: self.runs,
            trajectories_per_run: self.trajectories_per_run,
            master_seed: self.master_seed,
            vol_mode: self.vol_mode.clone(),
            quadrature_order: self.quadrature_order,
            cost: self.cost.clone(),
            discount_rate: self.discount_rate,
            output_dir: self.output_dir.clone(),
            trajectory_indices: self.trajectory_indices.clone(),
            dump_trajectories: self.dump_trajectories.then_some(true),
            action_clip: self.action_clip,
        }
    }

    fn resolve(&self) -> relaxsim::Result<StudyConfig> {
        let mut layers = Vec::new();
        if let Some(p) = &self.preset {
            layers.push(p.parse::<Preset>()?.layer());
        }
        if let Some(path) = &self.config {
            layers.push(ConfigLayer::parse(&std::fs::read_to_string(path)?)?);
        }
        layers.push(self.flag_layer());
        StudyConfig::from_layers(&layers)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn run(command: Command) -> relaxsim::Result<bool> {
    match command {
        Command::Study(common) => {
            let cfg = common.resolve()?;
            let outcome = cli::with_threads(common.threads, || cli::run_study(&cfg))??;
            for m in &outcome.modes {
                println!(
                    "{} {}: slope {} r2 {} -> {}",
                    cfg.setting,
                    m.vol_mode,
                    fmt_opt(m.fit.as_ref().map(|f| f.slope)),
                    fmt_opt(m.fit.as_ref().map(|f| f.r_squared)),
                    m.convergence_csv.display()
                );
            }
            if !outcome.trajectory_files.is_empty() {
                println!("{} trajectory files", outcome.trajectory_files.len());
            }
        }
        Command::Trajectories(common) => {
            let cfg = common.resolve()?;
            let files = cli::with_threads(common.threads, || cli::run_trajectories(&cfg))??;
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::CostGap(common) => {
            let cfg = common.resolve()?;
            let outcomes = cli::with_threads(common.threads, || cli::run_cost_gap(&cfg))??;
            for o in outcomes {
                for r in &o.records {
                    println!("{} N={} gap {:.3e} se {:.3e}", o.vol_mode, r.steps, r.gap, r.std_error);
                }
                println!("-> {}", o.csv.display());
            }
        }
        Command::QuadratureCheck { max_order, tolerance } => {
            let mut ok = true;
            for c in cli::quadrature_check(max_order)? {
                let pass = c.passed(tolerance);
                ok &= pass;
                println!(
                    "order {:2} moment_err {:.2e} asym {:.2e} min_w {:.2e} {}",
                    c.order,
                    c.max_moment_error,
                    c.max_asymmetry,
                    c.min_weight,
                    if pass { "ok" } else { "FAIL" }
                );
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(err) => report(&err),
    }
}

fn report(err: &Error) -> ExitCode {
    eprintln!("{}", error_record(err));
    ExitCode::from(err.exit_code() as u8)
}
