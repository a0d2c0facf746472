//! Monte Carlo strong-error studies.
//!
//! For every trajectory index one fine Brownian lattice and one action stream
//! are drawn; each grid size in the study coarsens the same lattice, so all
//! resolutions see the same Brownian path. Trajectories are simulated in
//! parallel but reduced in ascending index order with compensated summation,
//! which makes every reported number independent of the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::{simulate_mixed, simulate_relaxed, Trajectory};
use crate::model::{CostSpec, FeedbackPolicy, ModelSpec, TimeGrid};
use crate::noise::{generate_lattice, ActionUniforms, BrownianLattice};
use crate::quadrature::GaussHermiteRule;
use crate::relax::{policy_expectation, VolMode};

/// Monte Carlo parameters shared by every study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyParams {
    pub horizon: f64,
    pub x0: Vec<f64>,
    /// Finest grid; every studied step count must divide it.
    pub fine_steps: usize,
    pub runs: usize,
    pub trajectories_per_run: usize,
    pub master_seed: u64,
    pub vol_mode: VolMode,
    pub quadrature_order: usize,
}

impl Default for StudyParams {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            x0: vec![0.0],
            fine_steps: 1000,
            runs: 10,
            trajectories_per_run: 10_000,
            master_seed: 20_240_601,
            vol_mode: VolMode::Uncontrolled,
            quadrature_order: crate::quadrature::DEFAULT_ORDER,
        }
    }
}

impl StudyParams {
    pub fn total_trajectories(&self) -> usize {
        self.runs * self.trajectories_per_run
    }

    fn validate(&self, steps: &[usize]) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        if self.trajectories_per_run == 0 {
            return Err(Error::config("trajectories_per_run", "must be at least 1"));
        }
        if steps.is_empty() {
            return Err(Error::config("N_list", "must contain at least one step count"));
        }
        for &n in steps {
            if n == 0 || !self.fine_steps.is_multiple_of(n) {
                return Err(Error::config(
                    "N_list",
                    format!("{n} does not divide N_fine = {}", self.fine_steps),
                ));
            }
        }
        TimeGrid::new(self.horizon, self.fine_steps)?;
        Ok(())
    }
}

/// Strong-error estimate at one grid size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub steps: usize,
    /// Mean over runs of the per-run Monte Carlo mean of `max_n |X̃_n - X̂_n|²`.
    pub mean_sup_sq_error: f64,
    /// Sample standard deviation of the per-run means (zero for a single run).
    pub std_across_runs: f64,
    pub runs: usize,
    pub trajectories_per_run: usize,
    /// Average over runs of the per-run standard error of the mean.
    pub within_run_std_error: f64,
}

pub const CONVERGENCE_CSV_HEADER: &str = "N,mean_sup_sq_error,std_across_runs,runs,trajectories_per_run";

/// Least-squares line through `(log N, log error)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// `|E[discrete cost] - E[relaxed cost]|` at one grid size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostGapRecord {
    pub steps: usize,
    pub gap: f64,
    /// Standard error of the mean paired difference.
    pub std_error: f64,
    pub mean_discrete_cost: f64,
    pub mean_relaxed_cost: f64,
}

pub const COST_GAP_CSV_HEADER: &str = "N,gap,std_error,mean_discrete_cost,mean_relaxed_cost";

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let mut acc = CompensatedSum::default();
    let mut n = 0;
    for v in values {
        acc.add(v);
        n += 1;
    }
    (acc.total() / n as f64, n)
}

/// Mean and sample standard deviation, both in input order.
fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let (m, n) = mean(values.iter().copied());
    if n < 2 {
        return (m, 0.0);
    }
    let (ss, _) = mean(values.iter().map(|v| (v - m) * (v - m)));
    (m, (ss * n as f64 / (n - 1) as f64).sqrt())
}

/// `max_n |a_n - b_n|²` over the common grid.
pub fn sup_sq_error(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.grid() != b.grid() || a.state_dim() != b.state_dim() {
        return Err(Error::GridMismatch(format!(
            "cannot compare {} states on {:?} with {} states on {:?}",
            a.state_dim(),
            a.grid(),
            b.state_dim(),
            b.grid()
        )));
    }
    Ok(a.states()
        .chunks(a.state_dim())
        .zip(b.states().chunks(b.state_dim()))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Relaxed and mixed trajectories driven by the same Brownian increments.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub trajectory_index: u64,
    pub relaxed: Trajectory,
    pub mixed: Trajectory,
}

/// Noise shared by every resolution of one trajectory.
struct TrajectoryNoise {
    lattice: BrownianLattice,
    uniforms: ActionUniforms,
}

impl TrajectoryNoise {
    fn draw(model: &ModelSpec, params: &StudyParams, index: u64, max_steps: usize) -> Result<Self> {
        Ok(Self {
            lattice: generate_lattice(
                params.master_seed,
                index,
                params.fine_steps,
                params.horizon,
                model.state_dim(),
            )?,
            uniforms: ActionUniforms::generate(params.master_seed, index, max_steps, model.action_dim()),
        })
    }

    fn pair(
        &self,
        model: &ModelSpec,
        policy: &FeedbackPolicy,
        steps: usize,
        params: &StudyParams,
        rule: &GaussHermiteRule,
    ) -> Result<(Trajectory, Trajectory)> {
        let grid = TimeGrid::new(params.horizon, steps)?;
        let increments = self.lattice.coarsen(steps)?;
        let relaxed = simulate_relaxed(model, policy, &grid, &increments, &params.x0, params.vol_mode, rule)?;
        let uniforms = self.uniforms.prefix(steps);
        let mixed = simulate_mixed(model, policy, &grid, &increments, &uniforms, &params.x0)?;
        Ok((relaxed, mixed))
    }
}

/// Coupled pair for one trajectory index at `steps` grid points.
pub fn coupled_trajectories(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    steps: usize,
    params: &StudyParams,
    trajectory_index: u64,
) -> Result<TrajectoryPair> {
    params.validate(&[steps])?;
    let rule = GaussHermiteRule::cached(params.quadrature_order)?;
    let noise = TrajectoryNoise::draw(model, params, trajectory_index, steps)?;
    let (relaxed, mixed) = noise
        .pair(model, policy, steps, params, rule)
        .map_err(|e| e.with_trajectory(trajectory_index))?;
    Ok(TrajectoryPair {
        trajectory_index,
        relaxed,
        mixed,
    })
}

/// Evaluate `sample(index, noise, rule)` for every trajectory in index order.
/// The first failing index (lowest, not first to finish) is reported.
fn per_trajectory<T: Send>(
    model: &ModelSpec,
    params: &StudyParams,
    max_steps: usize,
    sample: impl Fn(&TrajectoryNoise, &GaussHermiteRule) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let rule = GaussHermiteRule::cached(params.quadrature_order)?;
    let results: Vec<Result<T>> = (0..params.total_trajectories() as u64)
        .into_par_iter()
        .map(|index| {
            TrajectoryNoise::draw(model, params, index, max_steps)
                .and_then(|noise| sample(&noise, rule))
                .map_err(|e| e.with_trajectory(index))
        })
        .collect();
    results.into_iter().collect()
}

/// One record per entry of `steps`, in the given order.
pub fn convergence_study(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    steps: &[usize],
    params: &StudyParams,
) -> Result<Vec<ConvergenceRecord>> {
    params.validate(steps)?;
    let max_steps = *steps.iter().max().expect("validated non-empty");
    let errors = per_trajectory(model, params, max_steps, |noise, rule| {
        steps
            .iter()
            .map(|&n| {
                let (relaxed, mixed) = noise.pair(model, policy, n, params, rule)?;
                sup_sq_error(&relaxed, &mixed)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let tpr = params.trajectories_per_run;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(col, &n)| {
            let (run_means, run_errors): (Vec<f64>, Vec<f64>) = errors
                .chunks(tpr)
                .map(|run| {
                    let values: Vec<f64> = run.iter().map(|row| row[col]).collect();
                    let (m, s) = mean_and_std(&values);
                    (m, s / (tpr as f64).sqrt())
                })
                .unzip();
            let (overall, spread) = mean_and_std(&run_means);
            ConvergenceRecord {
                steps: n,
                mean_sup_sq_error: overall,
                std_across_runs: spread,
                runs: params.runs,
                trajectories_per_run: tpr,
                within_run_std_error: mean(run_errors).0,
            }
        })
        .collect())
}

pub fn estimate_error(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    steps: usize,
    params: &StudyParams,
) -> Result<ConvergenceRecord> {
    Ok(convergence_study(model, policy, &[steps], params)?.remove(0))
}

/// Ordinary least squares of `log(error)` on `log(N)`.
pub fn fit_rate(records: &[ConvergenceRecord]) -> Result<RateFit> {
    if records.len() < 2 {
        return Err(Error::Fit(format!("need at least two records, got {}", records.len())));
    }
    if let Some(bad) = records
        .iter()
        .find(|r| !(r.mean_sup_sq_error.is_finite() && r.mean_sup_sq_error > 0.0))
    {
        return Err(Error::Fit(format!(
            "record N={} has non-positive error {}",
            bad.steps, bad.mean_sup_sq_error
        )));
    }
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| ((r.steps as f64).ln(), r.mean_sup_sq_error.ln()))
        .collect();
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all records share the same N".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - residual / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points,
    })
}

/// `g(X_N) + Δt Σ_n e^{-β t_n} f(t_n, X_n, a_n)` along a mixed trajectory.
pub fn discrete_cost(trajectory: &Trajectory, costs: &CostSpec) -> Result<f64> {
    if trajectory.actions().is_none() {
        return Err(Error::MissingActions);
    }
    let grid = trajectory.grid();
    let mut running = CompensatedSum::default();
    for n in 0..grid.steps() {
        let t = grid.node(n);
        let a = trajectory.action(n).expect("checked above");
        running.add(discount(costs, t) * (costs.running)(t, trajectory.state(n), a));
    }
    Ok((costs.terminal)(trajectory.terminal()) + grid.dt() * running.total())
}

/// Same Riemann sum with the running cost averaged over `π(X_n)`.
pub fn relaxed_cost(
    trajectory: &Trajectory,
    policy: &FeedbackPolicy,
    costs: &CostSpec,
    rule: &GaussHermiteRule,
) -> Result<f64> {
    let grid = trajectory.grid();
    let mut running = CompensatedSum::default();
    for n in 0..grid.steps() {
        let t = grid.node(n);
        let x = trajectory.state(n);
        let averaged = policy_expectation(policy, x, rule, |a| (costs.running)(t, x, a))?;
        running.add(discount(costs, t) * averaged);
    }
    Ok((costs.terminal)(trajectory.terminal()) + grid.dt() * running.total())
}

fn discount(costs: &CostSpec, t: f64) -> f64 {
    if costs.discount_rate > 0.0 {
        (-costs.discount_rate * t).exp()
    } else {
        1.0
    }
}

/// Cost gap per grid size on coupled trajectories.
pub fn cost_gap_study(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    costs: &CostSpec,
    steps: &[usize],
    params: &StudyParams,
) -> Result<Vec<CostGapRecord>> {
    params.validate(steps)?;
    let max_steps = *steps.iter().max().expect("validated non-empty");
    let samples = per_trajectory(model, params, max_steps, |noise, rule| {
        steps
            .iter()
            .map(|&n| {
                let (relaxed, mixed) = noise.pair(model, policy, n, params, rule)?;
                Ok((
                    discrete_cost(&mixed, costs)?,
                    relaxed_cost(&relaxed, policy, costs, rule)?,
                ))
            })
            .collect::<Result<Vec<(f64, f64)>>>()
    })?;

    let total = samples.len() as f64;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(col, &n)| {
            let diffs: Vec<f64> = samples.iter().map(|row| row[col].0 - row[col].1).collect();
            let (mean_diff, sd) = mean_and_std(&diffs);
            CostGapRecord {
                steps: n,
                gap: mean_diff.abs(),
                std_error: sd / total.sqrt(),
                mean_discrete_cost: mean(samples.iter().map(|row| row[col].0)).0,
                mean_relaxed_cost: mean(samples.iter().map(|row| row[col].1)).0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Setting;
    use std::sync::Arc;

    fn small_params() -> StudyParams {
        StudyParams {
            runs: 3,
            trajectories_per_run: 200,
            fine_steps: 200,
            ..StudyParams::default()
        }
    }

    fn traj(values: &[f64]) -> Trajectory {
        let grid = TimeGrid::new(1.0, values.len() - 1).unwrap();
        Trajectory::from_parts(grid, 1, values.to_vec(), None).unwrap()
    }

    #[test]
    fn sup_sq_error_examples() {
        let a = traj(&[0.0, 1.0, 3.0]);
        let b = traj(&[0.0, 2.0, 2.0]);
        assert_eq!(sup_sq_error(&a, &a).unwrap(), 0.0);
        assert_eq!(sup_sq_error(&a, &b).unwrap(), 1.0);
        assert_eq!(sup_sq_error(&b, &a).unwrap(), 1.0);
        let c = traj(&[0.0, 2.0]);
        assert!(matches!(sup_sq_error(&a, &c), Err(Error::GridMismatch(_))));
    }

    fn synthetic(steps: &[usize], f: impl Fn(usize) -> f64) -> Vec<ConvergenceRecord> {
        steps
            .iter()
            .map(|&n| ConvergenceRecord {
                steps: n,
                mean_sup_sq_error: f(n),
                std_across_runs: 0.0,
                runs: 1,
                trajectories_per_run: 1,
                within_run_std_error: 0.0,
            })
            .collect()
    }

    #[test]
    fn fit_exact_power_laws() {
        let ns = [50, 100, 200, 500, 1000];
        let fit = fit_rate(&synthetic(&ns, |n| 3.0 / n as f64)).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_rate(&synthetic(&ns, |n| 0.7 / (n as f64).sqrt())).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_noisy_power_law() {
        // perturbations within ±5%, alternating worst-case pattern plus mixed signs
        let ns = [50, 100, 200, 500, 1000];
        for pattern in [
            [0.05, -0.05, 0.05, -0.05, 0.05],
            [0.05, 0.03, 0.0, -0.03, -0.05],
            [-0.05, -0.02, 0.01, 0.04, 0.05],
        ] {
            let recs = synthetic(&ns, |n| {
                let i = ns.iter().position(|&m| m == n).unwrap();
                2.0 / n as f64 * (1.0 + pattern[i])
            });
            let fit = fit_rate(&recs).unwrap();
            assert!((-1.15..=-0.85).contains(&fit.slope), "{}", fit.slope);
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_rate(&synthetic(&[10], |_| 1.0)).is_err());
        let err = fit_rate(&synthetic(&[10, 20], |n| if n == 20 { 0.0 } else { 1.0 })).unwrap_err();
        assert!(err.to_string().contains("N=20"));
    }

    #[test]
    fn dirac_policy_gives_zero_error() {
        let m = Setting::Setting2.model(0.0);
        let p = FeedbackPolicy::reverting(1.0, 0.0).unwrap();
        let recs = convergence_study(&m, &p, &[20, 50, 100, 200], &small_params()).unwrap();
        for r in recs {
            assert_eq!(r.mean_sup_sq_error, 0.0);
            assert_eq!(r.std_across_runs, 0.0);
        }
    }

    #[test]
    fn records_keep_order_and_single_entry_matches() {
        let m = Setting::Setting1.model(0.0);
        let p = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
        let params = small_params();
        let recs = convergence_study(&m, &p, &[100, 20, 50], &params).unwrap();
        assert_eq!(recs.iter().map(|r| r.steps).collect::<Vec<_>>(), vec![100, 20, 50]);
        let single = estimate_error(&m, &p, 50, &params).unwrap();
        assert_eq!(single, recs[2]);
        assert!(recs[0].mean_sup_sq_error < recs[1].mean_sup_sq_error);
    }

    #[test]
    fn divisibility_is_validated() {
        let m = Setting::Setting1.model(0.0);
        let p = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
        let err = convergence_study(&m, &p, &[30], &small_params()).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn divergence_names_trajectory() {
        let m = ModelSpec::new(
            "blowup",
            1,
            1,
            Arc::new(|x, _, o| o[0] = x[0] * x[0]),
            Arc::new(|_, _, o| o[0] = 0.0),
        )
        .unwrap()
        .uncontrolled_volatility();
        let p = FeedbackPolicy::constant(vec![0.0], 0.1).unwrap();
        let params = StudyParams {
            x0: vec![50.0],
            ..small_params()
        };
        let err = convergence_study(&m, &p, &[200], &params).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Divergence {
                    trajectory: Some(0),
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn cost_examples() {
        let grid = TimeGrid::new(3.0, 3).unwrap();
        let states = vec![0.0, 0.5, 1.0, 2.0];
        let actions = vec![0.2, -0.4, 1.1];
        let t = Trajectory::from_parts(grid, 1, states, Some((1, actions))).unwrap();

        let terminal_only = CostSpec::new(Arc::new(|_, _, _| 0.0), Arc::new(|x: &[f64]| x[0] * 10.0), 0.0).unwrap();
        assert_eq!(discrete_cost(&t, &terminal_only).unwrap(), 20.0);

        let unit = CostSpec::new(Arc::new(|_, _, _| 1.0), Arc::new(|_: &[f64]| 0.0), 0.0).unwrap();
        assert!((discrete_cost(&t, &unit).unwrap() - 3.0).abs() < 1e-15);

        let linear = CostSpec::new(Arc::new(|_, _, a: &[f64]| a[0]), Arc::new(|_: &[f64]| 0.0), 0.0).unwrap();
        assert!((discrete_cost(&t, &linear).unwrap() - (0.2 - 0.4 + 1.1)).abs() < 1e-15);

        let discounted = unit.clone().with_discount(0.5).unwrap();
        let expected = 1.0 + (-0.5f64).exp() + (-1.0f64).exp();
        assert!((discrete_cost(&t, &discounted).unwrap() - expected).abs() < 1e-14);

        let no_actions = Trajectory::from_parts(grid, 1, vec![0.0; 4], None).unwrap();
        assert!(matches!(discrete_cost(&no_actions, &unit), Err(Error::MissingActions)));
    }

    #[test]
    fn relaxed_cost_examples() {
        let rule = GaussHermiteRule::cached(10).unwrap();
        let grid = TimeGrid::new(2.0, 4).unwrap();
        let t = Trajectory::from_parts(grid, 1, vec![0.0, 0.1, 0.3, 0.2, 0.5], None).unwrap();
        let p = FeedbackPolicy::reverting(1.0, 0.3).unwrap();

        // linear in a: integrand reduces to the policy mean
        let linear = CostSpec::new(Arc::new(|_, _, a: &[f64]| 2.0 * a[0]), Arc::new(|_: &[f64]| 0.0), 0.0).unwrap();
        let expected: f64 = (0..4).map(|n| 0.5 * 2.0 * (1.0 - t.state(n)[0])).sum();
        assert!((relaxed_cost(&t, &p, &linear, rule).unwrap() - expected).abs() < 1e-13);

        // action-free running cost is unaffected by the averaging
        let tracking = CostSpec::state_tracking();
        let with_actions = Trajectory::from_parts(grid, 1, t.states().to_vec(), Some((1, vec![9.0; 4]))).unwrap();
        let a = relaxed_cost(&t, &p, &tracking, rule).unwrap();
        let b = discrete_cost(&with_actions, &tracking).unwrap();
        assert!((a - b).abs() < 1e-13);

        // second moment: m² + s²
        let square = CostSpec::new(Arc::new(|_, _, a: &[f64]| a[0] * a[0]), Arc::new(|_: &[f64]| 0.0), 0.0).unwrap();
        let expected: f64 = (0..4).map(|n| 0.5 * ((1.0 - t.state(n)[0]).powi(2) + 0.09)).sum();
        assert!((relaxed_cost(&t, &p, &square, rule).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn cost_gap_vanishes_for_pure_policy() {
        let m = Setting::Setting1.model(0.0);
        let p = FeedbackPolicy::reverting(1.0, 0.0).unwrap();
        let gaps = cost_gap_study(&m, &p, &CostSpec::state_tracking(), &[20, 100], &small_params()).unwrap();
        for g in gaps {
            assert_eq!(g.gap, 0.0);
            assert!(g.gap >= 0.0);
        }
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let mut acc = CompensatedSum::default();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.total(), 10.0);
    }
}
