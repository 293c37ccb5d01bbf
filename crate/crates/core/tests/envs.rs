use riql_lab::data::{Action, Dataset, Transition};
use riql_lab::envs::{
    corruption_level_report, generate_dataset, gridworld, BehaviorPolicy, Environment,
    GridworldConfig, PointMassConfig, PointMassEnv, PolicyMixture, TabularMdp,
};
use riql_lab::seed;

fn self_loop(gamma: f64) -> TabularMdp {
    TabularMdp {
        n_states: 1,
        n_actions: 1,
        transitions: vec![vec![vec![1.0]]],
        rewards: vec![vec![1.0]],
        r_max: 1.0,
        gamma,
        initial: vec![1.0],
        terminal: vec![false],
    }
}

/// Five states in a row, actions left/right that succeed with 0.8 and
/// otherwise stay put. Both ends pay differently.
fn chain(gamma: f64) -> TabularMdp {
    let n = 5;
    let mut transitions = vec![vec![vec![0.0; n]; 2]; n];
    let mut rewards = vec![vec![0.0; 2]; n];
    for s in 0..n {
        let left = s.saturating_sub(1);
        let right = (s + 1).min(n - 1);
        transitions[s][0][left] += 0.8;
        transitions[s][0][s] += 0.2;
        transitions[s][1][right] += 0.8;
        transitions[s][1][s] += 0.2;
    }
    rewards[0][0] = 0.3;
    rewards[4][1] = 1.0;
    rewards[2][0] = 0.1;
    TabularMdp {
        n_states: n,
        n_actions: 2,
        transitions,
        rewards,
        r_max: 1.0,
        gamma,
        initial: vec![0.2; n],
        terminal: vec![false; n],
    }
}

/// Solves `(I − γP_π) v = r_π` by Gaussian elimination with partial pivoting.
fn solve_policy(mdp: &TabularMdp, actions: &[usize]) -> Vec<f64> {
    let n = mdp.n_states;
    let mut a = vec![vec![0.0; n + 1]; n];
    for s in 0..n {
        for t in 0..n {
            a[s][t] = if s == t { 1.0 } else { 0.0 } - mdp.gamma * mdp.transitions[s][actions[s]][t];
        }
        a[s][n] = mdp.rewards[s][actions[s]];
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..n).map(|s| a[s][n] / a[s][s]).collect()
}

#[test]
fn self_loop_value_is_geometric_series() {
    let v = self_loop(0.9).value_iteration(1e-12).unwrap();
    assert!((v.v[0] - 10.0).abs() < 1e-9);
}

#[test]
fn zero_discount_value_is_best_immediate_reward() {
    let mdp = chain(0.0);
    let v = mdp.value_iteration(1e-12).unwrap();
    for s in 0..mdp.n_states {
        let best = mdp.rewards[s].iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(v.v[s], best);
    }
}

#[test]
fn chain_matches_exhaustive_policy_enumeration() {
    let mdp = chain(0.9);
    let tol = 1e-10;
    let vi = mdp.value_iteration(tol).unwrap();
    let mut best = vec![f64::MIN; 5];
    for code in 0..32u32 {
        let actions: Vec<usize> = (0..5).map(|s| ((code >> s) & 1) as usize).collect();
        let v = solve_policy(&mdp, &actions);
        for s in 0..5 {
            best[s] = best[s].max(v[s]);
        }
    }
    for s in 0..5 {
        // residual tol bounds the value error by tol·γ/(1−γ)
        assert!((vi.v[s] - best[s]).abs() < 1e-8, "state {s}: {} vs {}", vi.v[s], best[s]);
    }
}

#[test]
fn bellman_residual_contracts_by_gamma() {
    let env = gridworld(&GridworldConfig::default()).unwrap();
    let mdp = env.mdp();
    let residual = |v: &[f64]| {
        mdp.backup(v)
            .iter()
            .zip(v)
            .map(|(q, v)| (q.iter().cloned().fold(f64::MIN, f64::max) - v).abs())
            .fold(0.0, f64::max)
    };
    let mut v = vec![0.0; mdp.n_states];
    let mut prev = residual(&v);
    for _ in 0..50 {
        v = mdp.backup(&v)
            .iter()
            .map(|q| q.iter().cloned().fold(f64::MIN, f64::max))
            .collect();
        let r = residual(&v);
        assert!(r <= mdp.gamma * prev + 1e-15, "{r} > γ·{prev}");
        prev = r;
    }
}

fn uniform_behavior(mdp: &TabularMdp) -> Vec<Vec<f64>> {
    vec![vec![1.0 / mdp.n_actions as f64; mdp.n_actions]; mdp.n_states]
}

#[test]
fn median_expectile_is_policy_evaluation() {
    let env = gridworld(&GridworldConfig::default()).unwrap();
    let mdp = env.mdp();
    let pi = uniform_behavior(mdp);
    let fixed = mdp.expectile_fixed_point(&pi, 0.5, 1e-11).unwrap();
    let eval = mdp.policy_evaluation(&pi, 1e-11).unwrap();
    for s in 0..mdp.n_states {
        assert!((fixed.v[s] - eval.v[s]).abs() < 1e-6);
    }
}

#[test]
fn high_expectile_approaches_supported_maximum() {
    let env = gridworld(&GridworldConfig::default()).unwrap();
    let mdp = env.mdp();
    let pi = uniform_behavior(mdp);
    let fixed = mdp.expectile_fixed_point(&pi, 0.99, 1e-10).unwrap();
    let optimal = mdp.value_iteration(1e-10).unwrap();
    let span = optimal.v.iter().cloned().fold(f64::MIN, f64::max)
        - optimal.v.iter().cloned().fold(f64::MAX, f64::min);
    for s in 0..mdp.n_states {
        let best = optimal.q[s].iter().cloned().fold(f64::MIN, f64::max);
        assert!((fixed.v[s] - best).abs() <= 0.05 * span, "state {s}");
    }
}

#[test]
fn deterministic_behavior_ignores_tau() {
    let mdp = chain(0.9);
    let pi: Vec<Vec<f64>> = (0..5).map(|s| if s % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
    let eval = mdp.policy_evaluation(&pi, 1e-12).unwrap();
    for tau in [0.1, 0.7, 0.95] {
        let fixed = mdp.expectile_fixed_point(&pi, tau, 1e-12).unwrap();
        for s in 0..5 {
            assert!((fixed.v[s] - eval.v[s]).abs() < 1e-9);
        }
    }
}

#[test]
fn expectile_values_increase_with_tau() {
    let env = gridworld(&GridworldConfig::default()).unwrap();
    let mdp = env.mdp();
    let pi = uniform_behavior(mdp);
    let mut prev: Option<Vec<f64>> = None;
    for tau in [0.2, 0.5, 0.7, 0.9] {
        let v = mdp.expectile_fixed_point(&pi, tau, 1e-10).unwrap().v;
        if let Some(p) = &prev {
            for s in 0..mdp.n_states {
                assert!(p[s] <= v[s] + 1e-9);
            }
        }
        prev = Some(v);
    }
    assert!(mdp.expectile_fixed_point(&vec![vec![0.5; 4]; 63], 0.5, 1e-6).is_err());
}

#[test]
fn random_gridworld_data_has_uniform_actions_and_valid_transitions() {
    let env = gridworld(&GridworldConfig::default()).unwrap();
    let mdp = env.mdp();
    let data = generate_dataset(&env, &PolicyMixture::single(BehaviorPolicy::Random), 20_000, 3).unwrap();
    let mut counts = [0.0f64; 4];
    let mut visited = vec![false; mdp.n_states];
    for t in &data.transitions {
        let s = mdp.state_index(&t.state).unwrap();
        let s2 = mdp.state_index(&t.next_state).unwrap();
        let a = t.action.as_discrete().unwrap();
        assert!(mdp.transitions[s][a][s2] > 0.0);
        assert_eq!(t.terminal, mdp.terminal[s2]);
        counts[a] += 1.0;
        visited[s] = true;
    }
    let expected = data.len() as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // 0.999 quantile of chi-square with 3 degrees of freedom
    assert!(chi2 < 16.27, "chi2 = {chi2}");
    assert_eq!(visited.iter().filter(|v| **v).count(), mdp.n_states - 1);
}

#[test]
fn random_gridworld_visitation_matches_exact_occupancy() {
    let env = gridworld(&GridworldConfig::default()).unwrap();
    let mdp = env.mdp();
    let data = generate_dataset(&env, &PolicyMixture::single(BehaviorPolicy::Random), 40_000, 11).unwrap();
    let mut empirical = vec![0.0f64; mdp.n_states];
    for t in &data.transitions {
        empirical[mdp.state_index(&t.state).unwrap()] += 1.0 / data.len() as f64;
    }
    // expected visits per episode: d_{t+1} = d_t·P_uniform, absorbed on entering a terminal cell
    let mut occupancy = vec![0.0f64; mdp.n_states];
    let mut d = mdp.initial.clone();
    for _ in 0..env.horizon() {
        let mut next = vec![0.0f64; mdp.n_states];
        for s in 0..mdp.n_states {
            occupancy[s] += d[s];
            for a in 0..mdp.n_actions {
                for s2 in 0..mdp.n_states {
                    if !mdp.terminal[s2] {
                        next[s2] += d[s] * mdp.transitions[s][a][s2] / mdp.n_actions as f64;
                    }
                }
            }
        }
        d = next;
    }
    let total: f64 = occupancy.iter().sum();
    let tv: f64 = 0.5 * empirical.iter().zip(&occupancy).map(|(e, o)| (e - o / total).abs()).sum::<f64>();
    assert!(tv < 0.05, "total variation {tv}");
}

#[test]
fn expert_pointmass_data_matches_analytic_return() {
    let env = PointMassEnv::new(PointMassConfig::default());
    let data = generate_dataset(&env, &PolicyMixture::single(BehaviorPolicy::Expert), 5_000, 4).unwrap();
    let mut returns = Vec::new();
    let mut analytic = Vec::new();
    let mut i = 0;
    while i < data.len() {
        let start = [data.transitions[i].state[0], data.transitions[i].state[1]];
        let mut ret = 0.0;
        let mut steps = 0;
        loop {
            let t = &data.transitions[i];
            ret += t.reward;
            steps += 1;
            i += 1;
            if t.terminal || steps == env.horizon() || i == data.len() {
                break;
            }
        }
        if steps == env.horizon() || data.transitions[i - 1].terminal {
            returns.push(ret);
            analytic.push(env.expert_return_from(start));
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (m, a) = (mean(&returns), mean(&analytic));
    assert!(returns.len() > 50);
    assert!(((m - a) / a).abs() < 0.05, "{m} vs {a}");
}

#[test]
fn pointmass_returns_are_bounded_below() {
    let env = PointMassEnv::new(PointMassConfig::default());
    let mut rng = seed::rng(5);
    for _ in 0..200 {
        let ret = riql_lab::envs::rollout_return(&env, &mut |_| Ok(Action::Continuous(vec![-1.0, -1.0])), &mut rng).unwrap();
        assert!(ret >= -(env.horizon() as f64) * env.diameter());
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    let env = PointMassEnv::new(PointMassConfig::default());
    let mix = PolicyMixture::medium_replay();
    let a = generate_dataset(&env, &mix, 3_000, 8).unwrap();
    let b = generate_dataset(&env, &mix, 3_000, 8).unwrap();
    let c = generate_dataset(&env, &mix, 3_000, 9).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.transitions, c.transitions);
    assert_eq!(a.metadata["generator.seed"], "8");
}

fn small_grid_data() -> (riql_lab::envs::TabularEnv, Dataset) {
    let env = gridworld(&GridworldConfig::default()).unwrap();
    let data = generate_dataset(&env, &PolicyMixture::medium_replay(), 2_000, 21).unwrap();
    (env, data)
}

#[test]
fn identical_datasets_have_zero_corruption_level() {
    let (env, data) = small_grid_data();
    let r = corruption_level_report(&data, &data, env.mdp()).unwrap();
    assert_eq!(r.cumulative, 0.0);
    assert!(r.zeta_bound.iter().chain(&r.log_zeta_prime).all(|x| *x == 0.0));
    assert_eq!(r.label, "upper bound");
}

#[test]
fn one_reward_change_counts_twice() {
    let (env, data) = small_grid_data();
    let mut corrupted = data.clone();
    corrupted.transitions[17].reward += 0.75;
    let r = corruption_level_report(&data, &corrupted, env.mdp()).unwrap();
    assert!((r.cumulative - 1.5).abs() < 1e-12);
}

#[test]
fn duplication_preserves_per_sample_level() {
    let (env, data) = small_grid_data();
    let mdp = env.mdp();
    let mut corrupted = data.clone();
    for i in (0..corrupted.len()).step_by(7) {
        let t = &mut corrupted.transitions[i];
        t.reward = -t.reward - 0.5;
        let s2 = (mdp.state_index(&t.next_state).unwrap() + 9) % (mdp.n_states - 1);
        t.next_state = mdp.one_hot(s2);
        t.terminal = false;
    }
    let double = |d: &Dataset| {
        let mut rows: Vec<Transition> = d.transitions.clone();
        rows.extend(d.transitions.iter().cloned());
        d.with_transitions(rows)
    };
    let once = corruption_level_report(&data, &corrupted, mdp).unwrap();
    let twice = corruption_level_report(&double(&data), &double(&corrupted), mdp).unwrap();
    let per = |c: f64, n: usize| c / n as f64;
    assert!(once.cumulative > 0.0);
    assert!((per(once.cumulative, data.len()) - per(twice.cumulative, 2 * data.len())).abs() < 1e-9);
}

#[test]
fn continuous_data_is_not_tabular() {
    let (env, grid) = small_grid_data();
    let pm = PointMassEnv::new(PointMassConfig::default());
    let cont = generate_dataset(&pm, &PolicyMixture::medium_replay(), 100, 1).unwrap();
    assert!(matches!(
        corruption_level_report(&cont, &cont, env.mdp()),
        Err(riql_lab::Error::NonTabular(_))
    ));
    let mut bad = grid.clone();
    bad.transitions[0].state[0] = 0.5;
    assert!(corruption_level_report(&grid, &bad, env.mdp()).is_err());
}
