//! Statistical properties of the noise, the sampler and the studies.

use relaxsim::noise::uniform_stream_component;
use relaxsim::{
    convergence_study, coupled_trajectories, generate_lattice, relaxed_drift, sample_action, uniform_stream,
    ActionUniforms, FeedbackPolicy, GaussHermiteRule, ModelSpec, Setting, StudyParams, TimeGrid,
};

fn sample_action_all(policy: &FeedbackPolicy, x: &[f64], uniforms: &ActionUniforms) -> Vec<f64> {
    (0..uniforms.steps())
        .map(|m| sample_action(policy, x, uniforms.step(m)).unwrap()[0])
        .collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[test]
fn push_forward_matches_policy_moments() {
    let n = 100_000;
    let uniforms = ActionUniforms::generate(17, 3, n, 1);
    for (x, std) in [(0.0, 0.2), (0.8, 1.3), (-2.0, 0.05)] {
        let policy = FeedbackPolicy::reverting(1.0, std).unwrap();
        let samples = sample_action_all(&policy, &[x], &uniforms);
        let (m, v) = mean_var(&samples);
        let se_mean = std / (n as f64).sqrt();
        let se_var = std * std * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((m - (1.0 - x)).abs() < 4.0 * se_mean, "mean {m}");
        assert!((v - std * std).abs() < 4.0 * se_var, "var {v}");
    }
}

#[test]
fn relaxed_drift_matches_monte_carlo() {
    let n = 1_000_000;
    let uniforms = ActionUniforms::generate(5, 0, n, 1);
    let rule = GaussHermiteRule::cached(10).unwrap();
    let policy = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
    for setting in Setting::ALL {
        let model = setting.model(0.2);
        for x in [-0.5, 0.0, 0.6] {
            let draws: Vec<f64> = sample_action_all(&policy, &[x], &uniforms)
                .into_iter()
                .map(|a| model.drift(&[x], &[a])[0])
                .collect();
            let (m, v) = mean_var(&draws);
            let exact = relaxed_drift(&model, &policy, &[x], rule).unwrap()[0];
            let se = (v / n as f64).sqrt();
            assert!(
                (m - exact).abs() < 4.0 * se,
                "{setting} x={x}: {m} vs {exact} (se {se})"
            );
        }
    }
}

#[test]
fn lattice_increment_variance() {
    let lattices = 100_000;
    let (horizon, fine) = (5.0, 4);
    let mut first = Vec::with_capacity(lattices);
    let mut last = Vec::with_capacity(lattices);
    for idx in 0..lattices as u64 {
        let lat = generate_lattice(11, idx, fine, horizon, 1).unwrap();
        first.push(lat.increment(0)[0]);
        last.push(lat.increment(fine - 1)[0]);
    }
    let dt = horizon / fine as f64;
    let se = dt * (2.0 / (lattices as f64 - 1.0)).sqrt();
    for xs in [&first, &last] {
        let (m, v) = mean_var(xs);
        assert!(m.abs() < 4.0 * (dt / lattices as f64).sqrt(), "mean {m}");
        assert!((v - dt).abs() < 4.0 * se, "var {v} vs {dt}");
    }
}

#[test]
fn uniform_stream_chi_square() {
    let draws = 1_000_000;
    let bins = 100;
    let mut counts = vec![0u64; bins];
    for step in 0..draws as u64 {
        let u = uniform_stream(2024, step % 7, step);
        assert!(u > 0.0 && u < 1.0);
        counts[(u * bins as f64) as usize] += 1;
    }
    let expected = draws as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 0.999 quantile of chi-square with 99 degrees of freedom.
    assert!(chi2 < 148.23, "chi2 = {chi2}");
}

#[test]
fn actions_and_increments_uncorrelated() {
    let n = 100_000;
    let mut us = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for idx in 0..n as u64 {
        us.push(uniform_stream(8, idx, 0));
        ws.push(generate_lattice(8, idx, 1, 1.0, 1).unwrap().increment(0)[0]);
    }
    let (mu, vu) = mean_var(&us);
    let (mw, vw) = mean_var(&ws);
    let cov = us.iter().zip(&ws).map(|(u, w)| (u - mu) * (w - mw)).sum::<f64>() / (n as f64 - 1.0);
    let corr = cov / (vu * vw).sqrt();
    assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
}

#[test]
fn action_components_uncorrelated() {
    let n = 100_000;
    let a: Vec<f64> = (0..n as u64).map(|s| uniform_stream_component(1, 0, s, 0)).collect();
    let b: Vec<f64> = (0..n as u64).map(|s| uniform_stream_component(1, 0, s, 1)).collect();
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n as f64 - 1.0);
    assert!((cov / (va * vb).sqrt()).abs() < 4.0 / (n as f64).sqrt());
}

#[test]
fn martingale_residual_is_centred() {
    let trajectories = 10_000;
    let steps = 50;
    let model = Setting::Setting1.model(0.0);
    let policy = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
    let rule = GaussHermiteRule::cached(10).unwrap();
    let params = StudyParams {
        fine_steps: steps,
        ..StudyParams::default()
    };
    let mut d: Vec<Vec<f64>> = (0..steps).map(|_| Vec::with_capacity(trajectories)).collect();
    for idx in 0..trajectories as u64 {
        let pair = coupled_trajectories(&model, &policy, steps, &params, idx).unwrap();
        for (m, column) in d.iter_mut().enumerate() {
            let x = pair.mixed.state(m);
            let a = pair.mixed.action(m).unwrap();
            column.push(model.drift(x, a)[0] - relaxed_drift(&model, &policy, x, rule).unwrap()[0]);
        }
    }
    for (m, column) in d.iter().enumerate() {
        let (mean, var) = mean_var(column);
        let se = (var / trajectories as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "m={m}: mean {mean}, se {se}");
    }
}

fn small_params(seed: u64, tpr: usize) -> StudyParams {
    StudyParams {
        fine_steps: 100,
        runs: 10,
        trajectories_per_run: tpr,
        master_seed: seed,
        ..StudyParams::default()
    }
}

#[test]
fn doubling_trajectories_shrinks_standard_error() {
    let model = Setting::Setting1.model(0.0);
    let policy = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
    let one = convergence_study(&model, &policy, &[20, 100], &small_params(3, 500)).unwrap();
    let two = convergence_study(&model, &policy, &[20, 100], &small_params(3, 1000)).unwrap();
    for (a, b) in one.iter().zip(&two) {
        let ratio = b.within_run_std_error / a.within_run_std_error;
        assert!(
            (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.05,
            "N={} ratio {ratio}",
            a.steps
        );
    }
}

#[test]
fn seed_change_moves_estimates_within_spread() {
    let model = Setting::Setting1.model(0.0);
    let policy = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
    let a = convergence_study(&model, &policy, &[20, 50, 100], &small_params(1, 500)).unwrap();
    let b = convergence_study(&model, &policy, &[20, 50, 100], &small_params(2, 500)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_ne!(x.mean_sup_sq_error, y.mean_sup_sq_error);
        let spread = x.std_across_runs.max(y.std_across_runs);
        assert!(
            (x.mean_sup_sq_error - y.mean_sup_sq_error).abs() < 4.0 * spread,
            "N={}: {} vs {}",
            x.steps,
            x.mean_sup_sq_error,
            y.mean_sup_sq_error
        );
    }
}

#[test]
fn error_decreases_with_resolution() {
    let model = Setting::Setting1.model(0.0);
    let policy = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
    let params = StudyParams {
        fine_steps: 1000,
        runs: 2,
        trajectories_per_run: 500,
        ..StudyParams::default()
    };
    let r = convergence_study(&model, &policy, &[100, 1000], &params).unwrap();
    assert!(r[1].mean_sup_sq_error < r[0].mean_sup_sq_error);
}

#[test]
fn both_schemes_see_the_same_brownian_path() {
    // Zero drift and unit volatility turn each scheme into a replay of its increments.
    let replay = ModelSpec::new(
        "replay",
        1,
        1,
        std::sync::Arc::new(|_, _, out| out[0] = 0.0),
        std::sync::Arc::new(|_, _, out| out[0] = 1.0),
    )
    .unwrap()
    .uncontrolled_volatility();
    let policy = FeedbackPolicy::reverting(1.0, 0.4).unwrap();
    let params = StudyParams {
        fine_steps: 200,
        ..StudyParams::default()
    };
    for steps in [20, 200] {
        let pair = coupled_trajectories(&replay, &policy, steps, &params, 9).unwrap();
        assert_eq!(pair.relaxed.states(), pair.mixed.states());
        let lattice = generate_lattice(params.master_seed, 9, 200, params.horizon, 1).unwrap();
        let path = lattice.coarsen(steps).unwrap().path();
        for (n, w) in path.iter().enumerate() {
            assert!((pair.relaxed.state(n)[0] - w).abs() < 1e-12);
        }
    }
}

#[test]
fn uncontrolled_schemes_share_the_diffusion_term() {
    let policy = FeedbackPolicy::reverting(1.0, 0.2).unwrap();
    let params = StudyParams {
        fine_steps: 100,
        ..StudyParams::default()
    };
    let rule = GaussHermiteRule::cached(10).unwrap();
    for setting in [Setting::Setting1, Setting::Setting2] {
        let model = setting.model(0.0);
        let pair = coupled_trajectories(&model, &policy, 100, &params, 4).unwrap();
        let dt = TimeGrid::new(params.horizon, 100).unwrap().dt();
        for n in 0..100 {
            let xr = pair.relaxed.state(n)[0];
            let xm = pair.mixed.state(n)[0];
            let noise_r =
                pair.relaxed.state(n + 1)[0] - xr - dt * relaxed_drift(&model, &policy, &[xr], rule).unwrap()[0];
            let noise_m = pair.mixed.state(n + 1)[0] - xm - dt * model.drift(&[xm], pair.mixed.action(n).unwrap())[0];
            assert!((noise_r - noise_m).abs() < 1e-14, "{setting} step {n}");
        }
    }
}
