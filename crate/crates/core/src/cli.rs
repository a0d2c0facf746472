//! Study runners behind the `relaxsim` binary.
//!
//! Every runner takes a validated [`StudyConfig`], writes its files under
//! `output_dir` and returns the paths it wrote. Numbers are printed with
//! Rust's shortest round-trip float formatting, so identical results give
//! identical bytes.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::analysis::{
    convergence_study, cost_gap_study, coupled_trajectories, fit_rate, ConvergenceRecord, CostGapRecord, RateFit,
    CONVERGENCE_CSV_HEADER, COST_GAP_CSV_HEADER,
};
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::integrators::Trajectory;
use crate::quadrature::{GaussHermiteRule, MAX_ORDER};
use crate::relax::VolMode;

/// Run `f` on a dedicated pool of `threads` workers (rayon's default when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::config("threads", e.to_string()))?;
    Ok(pool.install(f))
}

/// Results of one volatility mode of a study.
#[derive(Debug, Clone)]
pub struct ModeOutcome {
    pub vol_mode: VolMode,
    pub records: Vec<ConvergenceRecord>,
    /// `None` when some error is exactly zero (e.g. a Dirac policy).
    pub fit: Option<RateFit>,
    pub convergence_csv: PathBuf,
    pub rate_fit_json: PathBuf,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub modes: Vec<ModeOutcome>,
    pub trajectory_files: Vec<PathBuf>,
}

pub fn convergence_csv_name(cfg: &StudyConfig, mode: VolMode) -> String {
    format!("convergence_{}_{}.csv", cfg.setting, mode)
}

pub fn rate_fit_json_name(cfg: &StudyConfig, mode: VolMode) -> String {
    format!("rate_fit_{}_{}.json", cfg.setting, mode)
}

pub fn cost_gap_csv_name(cfg: &StudyConfig, mode: VolMode) -> String {
    format!("cost_gap_{}_{}.csv", cfg.setting, mode)
}

pub fn trajectory_csv_name(cfg: &StudyConfig, mode: VolMode, scheme: &str, steps: usize, index: u64) -> String {
    format!(
        "trajectory_{}_{}_{}_N{}_idx{}.csv",
        cfg.setting, mode, scheme, steps, index
    )
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_convergence_csv(records: &[ConvergenceRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CONVERGENCE_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.steps, r.mean_sup_sq_error, r.std_across_runs, r.runs, r.trajectories_per_run
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cost_gap_csv(records: &[CostGapRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{COST_GAP_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.steps, r.gap, r.std_error, r.mean_discrete_cost, r.mean_relaxed_cost
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `{slope, intercept, r_squared, points}`; the first three are `null` when no fit exists.
pub fn rate_fit_json(records: &[ConvergenceRecord], fit: Option<&RateFit>) -> serde_json::Value {
    match fit {
        Some(f) => json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
            "points": f.points.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>(),
        }),
        None => json!({
            "slope": null,
            "intercept": null,
            "r_squared": null,
            "points": records
                .iter()
                .map(|r| json!([(r.steps as f64).ln(), if r.mean_sup_sq_error > 0.0 { json!(r.mean_sup_sq_error.ln()) } else { json!(null) }]))
                .collect::<Vec<_>>(),
        }),
    }
}

fn write_json(value: &serde_json::Value, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_trajectory(t: &Trajectory, path: &Path) -> Result<()> {
    let w = create(path)?;
    t.write_csv(w)
}

/// Convergence CSV and rate fit per volatility mode, plus coupled trajectory
/// dumps when `dump_trajectories` is set.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let model = cfg.model()?;
    let policy = cfg.policy()?;
    let mut modes = Vec::new();
    let mut trajectory_files = Vec::new();
    for mode in cfg.vol_modes()? {
        let params = cfg.study_params(mode);
        let records = convergence_study(&model, &policy, &cfg.n_list, &params)?;
        let fit = match fit_rate(&records) {
            Ok(fit) => Some(fit),
            Err(Error::Fit(_)) => None,
            Err(e) => return Err(e),
        };
        let convergence_csv = cfg.output_dir.join(convergence_csv_name(cfg, mode));
        write_convergence_csv(&records, create(&convergence_csv)?)?;
        let rate_fit_json_path = cfg.output_dir.join(rate_fit_json_name(cfg, mode));
        write_json(&rate_fit_json(&records, fit.as_ref()), &rate_fit_json_path)?;
        if cfg.dump_trajectories {
            trajectory_files.extend(dump_trajectories(cfg, mode)?);
        }
        modes.push(ModeOutcome {
            vol_mode: mode,
            records,
            fit,
            convergence_csv,
            rate_fit_json: rate_fit_json_path,
        });
    }
    Ok(StudyOutcome {
        modes,
        trajectory_files,
    })
}

fn dump_trajectories(cfg: &StudyConfig, mode: VolMode) -> Result<Vec<PathBuf>> {
    let model = cfg.model()?;
    let policy = cfg.policy()?;
    let params = cfg.study_params(mode);
    let mut written = Vec::new();
    for &steps in &cfg.n_list {
        for &index in &cfg.trajectory_indices {
            let pair = coupled_trajectories(&model, &policy, steps, &params, index)?;
            for (scheme, t) in [("relaxed", &pair.relaxed), ("mixed", &pair.mixed)] {
                let path = cfg
                    .output_dir
                    .join(trajectory_csv_name(cfg, mode, scheme, steps, index));
                write_trajectory(t, &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Coupled relaxed/mixed sample paths for `trajectory_indices` at every N.
pub fn run_trajectories(cfg: &StudyConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let mut written = Vec::new();
    for mode in cfg.vol_modes()? {
        written.extend(dump_trajectories(cfg, mode)?);
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct CostGapOutcome {
    pub vol_mode: VolMode,
    pub records: Vec<CostGapRecord>,
    pub csv: PathBuf,
}

/// `|E[discrete cost] - E[relaxed cost]|` per N and volatility mode.
pub fn run_cost_gap(cfg: &StudyConfig) -> Result<Vec<CostGapOutcome>> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let model = cfg.model()?;
    let policy = cfg.policy()?;
    let costs = cfg.costs()?;
    let mut out = Vec::new();
    for mode in cfg.vol_modes()? {
        let records = cost_gap_study(&model, &policy, &costs, &cfg.n_list, &cfg.study_params(mode))?;
        let csv = cfg.output_dir.join(cost_gap_csv_name(cfg, mode));
        write_cost_gap_csv(&records, create(&csv)?)?;
        out.push(CostGapOutcome {
            vol_mode: mode,
            records,
            csv,
        });
    }
    Ok(out)
}

/// Worst deviations of one Gauss–Hermite rule from the exact Gaussian moments.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleCheck {
    pub order: usize,
    /// `max_k |Q(A^k) - E[A^k]| / E|A|^k` over `k < 2·order`, `A ~ N(0,1)`.
    pub max_moment_error: f64,
    pub max_asymmetry: f64,
    pub min_weight: f64,
}

impl RuleCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_moment_error <= tolerance && self.max_asymmetry <= tolerance && self.min_weight > 0.0
    }
}

/// `E[A^k]` for `A ~ N(0,1)`: zero for odd `k`, `(k-1)!!` for even `k`.
pub fn standard_normal_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    standard_normal_abs_moment(k)
}

/// `E|A|^k = 2^{k/2} Γ((k+1)/2) / √π`.
pub fn standard_normal_abs_moment(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        return (1..k).step_by(2).map(f64::from).product();
    }
    let m = (k - 1) / 2;
    let factorial: f64 = (1..=m).map(f64::from).product();
    2f64.powf(f64::from(k) / 2.0) * factorial / std::f64::consts::PI.sqrt()
}

pub fn check_rule(order: usize) -> Result<RuleCheck> {
    let rule = GaussHermiteRule::cached(order)?;
    let norm = std::f64::consts::PI.sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut max_moment_error: f64 = 0.0;
    // Beyond order ~20 the high moments overflow any sensible relative scale.
    let top = (2 * order).min(40) as u32;
    for k in 0..top {
        let q = rule.integrate(|z| (sqrt2 * z).powi(k as i32)) / norm;
        let exact = standard_normal_moment(k);
        max_moment_error = max_moment_error.max((q - exact).abs() / standard_normal_abs_moment(k));
    }
    let n = rule.order();
    let max_asymmetry = (0..n)
        .map(|i| {
            (rule.nodes()[i] + rule.nodes()[n - 1 - i])
                .abs()
                .max((rule.weights()[i] - rule.weights()[n - 1 - i]).abs())
        })
        .fold(0.0, f64::max);
    let min_weight = rule.weights().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RuleCheck {
        order,
        max_moment_error,
        max_asymmetry,
        min_weight,
    })
}

/// Check every rule from order 1 to `max_order`.
pub fn quadrature_check(max_order: usize) -> Result<Vec<RuleCheck>> {
    if !(1..=MAX_ORDER).contains(&max_order) {
        return Err(Error::config(
            "quadrature_order",
            format!("must lie in 1..={MAX_ORDER}, got {max_order}"),
        ));
    }
    (1..=max_order).map(check_rule).collect()
}

/// JSON error record written to stderr on failure.
pub fn error_record(err: &Error) -> serde_json::Value {
    let mut record = json!({
        "error": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    });
    match err {
        Error::Config { field, .. } => record["field"] = json!(field),
        Error::Divergence { step, trajectory } => {
            record["step"] = json!(step);
            record["trajectory"] = json!(trajectory);
        }
        _ => {}
    }
    record
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_moments() {
        assert_eq!(standard_normal_moment(0), 1.0);
        assert_eq!(standard_normal_moment(2), 1.0);
        assert_eq!(standard_normal_moment(4), 3.0);
        assert_eq!(standard_normal_moment(6), 15.0);
        assert_eq!(standard_normal_moment(7), 0.0);
        assert!((standard_normal_abs_moment(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((standard_normal_abs_moment(3) - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn default_rule_passes_self_check() {
        let c = check_rule(10).unwrap();
        assert!(c.passed(1e-10), "{c:?}");
    }

    #[test]
    fn error_record_fields() {
        let r = error_record(&Error::config("runs", "must be at least 1"));
        assert_eq!(r["error"], "config");
        assert_eq!(r["exit_code"], 2);
        assert_eq!(r["field"], "runs");
        let r = error_record(&Error::Divergence {
            step: 4,
            trajectory: Some(7),
        });
        assert_eq!(r["exit_code"], 3);
        assert_eq!(r["trajectory"], 7);
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(with_threads(Some(0), || ()).is_err());
        assert_eq!(with_threads(Some(2), rayon::current_num_threads).unwrap(), 2);
    }
}
