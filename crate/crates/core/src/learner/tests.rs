use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::toy::DoubleIntegratorEnv;
use super::*;

fn tiny_network(seed: u64) -> PolicyNetwork {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    PolicyNetwork::new(&[(-1.0, 1.0); 4], 2, &[3], -0.5, &mut rng)
}

#[test]
fn zeroed_output_layers_give_zero_mean_and_value() {
    let mut net = tiny_network(1);
    let last = net.actor.n_layers() - 1;
    net.actor.weights[last].iter_mut().for_each(|w| *w = 0.0);
    net.actor.biases[last].iter_mut().for_each(|b| *b = 0.0);
    let lastc = net.critic.n_layers() - 1;
    net.critic.weights[lastc].iter_mut().for_each(|w| *w = 0.0);
    net.critic.biases[lastc].iter_mut().for_each(|b| *b = 0.0);
    let (mean, _, value) = net.forward(&[0.3, -0.7, 0.1, 0.9]).unwrap();
    assert_eq!(mean, vec![0.0, 0.0]);
    assert_eq!(value, 0.0);
}

#[test]
fn forward_is_pure() {
    let net = tiny_network(2);
    let obs = [0.25, -0.5, 0.75, 0.0];
    let a = net.forward(&obs).unwrap();
    let b = net.forward(&obs).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.2, b.2);
}

/// Independent dense-layer evaluation (different loop structure and
/// accumulation order is avoided by summing in the same j order, but the
/// code path is separate from Mlp::forward).
fn matmul_oracle(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for l in 0..net.sizes.len() - 1 {
        let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
        let mut next = vec![0.0; n_out];
        for i in 0..n_out {
            let mut z = net.biases[l][i];
            for j in 0..n_in {
                z += net.weights[l][i * n_in + j] * cur[j];
            }
            next[i] = if l + 1 < net.sizes.len() - 1 { z.tanh() } else { z };
        }
        cur = next;
    }
    cur
}

#[test]
fn forward_matches_matmul_oracle() {
    let net = tiny_network(3);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for _ in 0..20 {
        let obs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = net.normalize_obs(&obs);
        let (mean, _, value) = net.forward(&obs).unwrap();
        assert_eq!(mean, matmul_oracle(&net.actor, &x));
        assert_eq!(value, matmul_oracle(&net.critic, &x)[0]);
    }
}

#[test]
fn observation_normalization_endpoints() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let net = PolicyNetwork::new(&[(0.0, 2000.0), (0.0, 0.0)], 1, &[3], 0.0, &mut rng);
    assert_eq!(net.normalize_obs(&[0.0, 0.0]), vec![-1.0, 0.0]);
    assert_eq!(net.normalize_obs(&[2000.0, 0.0]), vec![1.0, 0.0]);
    assert_eq!(net.normalize_obs(&[1000.0, 5.0]), vec![0.0, 0.0]);
}

#[test]
fn probability_ratio_examples() {
    assert_eq!(probability_ratio(-1.5, -1.5), 1.0);
    assert_abs_diff_eq!(probability_ratio(2.0_f64.ln(), 0.0), 2.0, epsilon = 1e-15);
}

#[test]
fn gaussian_log_prob_matches_density_formula() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mean: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let log_std: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..0.5)).collect();
        let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // Product of per-channel normal densities, evaluated directly.
        let mut density = 1.0;
        for i in 0..3 {
            let sigma = log_std[i].exp();
            density *= (-((a[i] - mean[i]) / sigma).powi(2) / 2.0).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        }
        assert_abs_diff_eq!(
            gaussian_log_prob(&a, &mean, &log_std),
            density.ln(),
            epsilon = 1e-12
        );
    }
}

#[test]
fn gaussian_density_integrates_to_one_per_channel() {
    let mean = [0.3];
    for log_std in [-1.0_f64, 0.0, 0.4] {
        let sigma: f64 = log_std.exp();
        let (lo, hi) = (mean[0] - 10.0 * sigma, mean[0] + 10.0 * sigma);
        let n = 20_000;
        let dx = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for k in 0..n {
            let x = lo + (k as f64 + 0.5) * dx;
            integral += gaussian_log_prob(&[x], &mean, &[log_std]).exp() * dx;
        }
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-3);
    }
}

#[test]
fn gaussian_entropy_closed_form() {
    let expected = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    assert_abs_diff_eq!(gaussian_entropy(&[0.0]), expected, epsilon = 1e-12);
    assert_abs_diff_eq!(gaussian_entropy(&[0.0, 0.0, 0.0]), 3.0 * expected, epsilon = 1e-12);
    // Entropy increases with the spread.
    assert!(gaussian_entropy(&[0.5]) > gaussian_entropy(&[0.0]));
}

#[test]
fn clipped_objective_examples_and_inertness() {
    assert_eq!(clipped_objective(1.0, 0.7, 0.2), 0.7);
    assert_abs_diff_eq!(clipped_objective(1.5, 1.0, 0.2), 1.2, epsilon = 1e-15);
    assert_abs_diff_eq!(clipped_objective(0.5, -1.0, 0.2), -0.8, epsilon = 1e-15);
    // When the ratio is inside the clip band the surrogate is exact.
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for _ in 0..200 {
        let r = rng.gen_range(0.8..1.2);
        let a = rng.gen_range(-3.0..3.0);
        assert_eq!(clipped_objective(r, a, 0.2), r * a);
    }
}

#[test]
fn gae_degenerate_cases() {
    let rewards = [1.0, -0.5, 2.0, 0.3];
    let values = [0.2, 0.1, -0.4, 0.6];
    let dones = [false, false, false, false];
    let last_value = 0.25;
    let gamma = 0.99;

    // lambda = 0: one-step TD advantage.
    let (adv, ret) = compute_advantages(&rewards, &values, &dones, last_value, gamma, 0.0);
    for t in 0..4 {
        let next_v = if t + 1 < 4 { values[t + 1] } else { last_value };
        assert_abs_diff_eq!(adv[t], rewards[t] + gamma * next_v - values[t], epsilon = 1e-14);
        assert_abs_diff_eq!(ret[t], adv[t] + values[t], epsilon = 1e-14);
    }

    // lambda = 1 on a single terminated episode: discounted return minus value.
    let dones_term = [false, false, false, true];
    let (adv, _) = compute_advantages(&rewards, &values, &dones_term, 999.0, gamma, 1.0);
    for t in 0..4 {
        let mut g = 0.0;
        for (k, r) in rewards.iter().enumerate().skip(t) {
            g += gamma.powi((k - t) as i32) * r;
        }
        assert_abs_diff_eq!(adv[t], g - values[t], epsilon = 1e-12);
    }
}

#[test]
fn gae_matches_brute_force_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let n = 40;
    let rewards: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dones: Vec<bool> = (0..n).map(|_| rng.gen_range(0.0..1.0) < 0.1).collect();
    let last_value = rng.gen_range(-1.0..1.0);
    let (gamma, lambda) = (0.97, 0.9);

    let (adv, _) = compute_advantages(&rewards, &values, &dones, last_value, gamma, lambda);

    // Brute force: A_t = sum_k (gamma lambda)^k delta_{t+k} over the episode.
    for t in 0..n {
        let mut expected = 0.0;
        let mut w = 1.0;
        for k in t..n {
            let next_v = if dones[k] {
                0.0
            } else if k + 1 < n {
                values[k + 1]
            } else {
                last_value
            };
            expected += w * (rewards[k] + gamma * next_v - values[k]);
            if dones[k] {
                break;
            }
            w *= gamma * lambda;
        }
        assert_abs_diff_eq!(adv[t], expected, epsilon = 1e-10);
    }
}

fn gradient_check_batch(
    seed: u64,
) -> (PolicyNetwork, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>, PpoConfig) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let net = tiny_network(seed);
    let n = 16;
    let obs: Vec<Vec<f64>> =
        (0..n).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let actions: Vec<Vec<f64>> =
        (0..n).map(|_| (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
    // Perturbed old log-probs exercise both clipped and unclipped branches.
    let logp_old: Vec<f64> = obs
        .iter()
        .zip(&actions)
        .map(|(o, a)| {
            let (mean, ls, _) = net.forward(o).unwrap();
            gaussian_log_prob(a, &mean, &ls) + rng.gen_range(-0.5..0.5)
        })
        .collect();
    let advantages: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let returns: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let config = PpoConfig { entropy_coef: 0.01, ..PpoConfig::default() };
    (net, obs, actions, logp_old, advantages, returns, config)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let (mut net, obs, actions, logp_old, adv, ret, config) = gradient_check_batch(8);
    let (_, grad, _) = ppo_loss_and_grad(&net, &obs, &actions, &logp_old, &adv, &ret, &config);

    let params = net.params_to_vec();
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] = params[i] + h;
        net.set_params_from_vec(&p);
        let (lp, _, _) = ppo_loss_and_grad(&net, &obs, &actions, &logp_old, &adv, &ret, &config);
        p[i] = params[i] - h;
        net.set_params_from_vec(&p);
        let (lm, _, _) = ppo_loss_and_grad(&net, &obs, &actions, &logp_old, &adv, &ret, &config);
        let fd = (lp - lm) / (2.0 * h);
        let denom = grad[i].abs().max(fd.abs()).max(1e-3);
        worst = worst.max((grad[i] - fd).abs() / denom);
    }
    assert!(worst <= 1e-5, "worst relative gradient error {worst}");
}

#[test]
fn ratios_are_one_on_policy_before_any_update() {
    let net = tiny_network(10);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..50 {
        let obs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (mean, _, _) = net.forward(&obs).unwrap();
        let (action, logp_old) = net.sample_action(&mean, &mut rng);
        // Recompute with the same parameters: exactly on-policy.
        let (mean2, ls2, _) = net.forward(&obs).unwrap();
        let logp_new = gaussian_log_prob(&action, &mean2, &ls2);
        assert_eq!(probability_ratio(logp_new, logp_old), 1.0);
    }
}

#[test]
fn weight_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.json");
    let net = tiny_network(12);
    save_weights(&net, &path).unwrap();
    let loaded = load_weights(&path).unwrap();
    assert_eq!(net, loaded);
    let obs = [0.1, 0.2, -0.3, 0.4];
    assert_eq!(net.forward(&obs).unwrap(), loaded.forward(&obs).unwrap());
}

#[test]
fn truncated_weight_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.json");
    let net = tiny_network(13);
    save_weights(&net, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_weights(&path), Err(LearnError::Parse(_))));
}

#[test]
fn hidden_size_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.json");
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let net = PolicyNetwork::new(&[(-1.0, 1.0); 4], 2, &[128, 64], 0.0, &mut rng);
    save_weights(&net, &path).unwrap();
    assert!(load_weights_checked(&path, &[128, 64]).is_ok());
    assert!(matches!(
        load_weights_checked(&path, &[256, 128]),
        Err(LearnError::ShapeMismatch(_))
    ));
}

#[test]
fn version_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.json");
    let mut net = tiny_network(15);
    net.version = WEIGHT_FORMAT_VERSION + 1;
    save_weights(&net, &path).unwrap();
    assert!(matches!(load_weights(&path), Err(LearnError::VersionMismatch { .. })));
}

fn toy_config(total: usize, seed: u64) -> PpoConfig {
    PpoConfig {
        learning_rate: 1e-3,
        rollout_len: 2048,
        minibatch_size: 256,
        epochs: 10,
        entropy_coef: 2e-3,
        total_timesteps: total,
        seed,
        ..PpoConfig::default()
    }
}

fn toy_network(seed: u64) -> PolicyNetwork {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let env = DoubleIntegratorEnv::new(0);
    PolicyNetwork::new(&env.obs_ranges(), env.act_dim(), &[16, 16], -0.5, &mut rng)
}

#[test]
fn zero_learning_rate_leaves_parameters_bitwise_unchanged() {
    let mut env = DoubleIntegratorEnv::new(20);
    let mut net = toy_network(20);
    let before = net.params_to_vec();
    let cfg = PpoConfig { learning_rate: 0.0, ..toy_config(1024, 20) };
    train(&mut env, &cfg, &mut net, None).unwrap();
    assert_eq!(before, net.params_to_vec());
}

#[test]
fn fixed_seed_reproduces_metrics_exactly() {
    let run = || {
        let mut env = DoubleIntegratorEnv::new(21);
        let mut net = toy_network(21);
        train(&mut env, &toy_config(2048, 21), &mut net, None).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.timesteps, b.timesteps);
    for (ma, mb) in a.metrics.iter().zip(&b.metrics) {
        assert_eq!(ma.mean_return.to_bits(), mb.mean_return.to_bits());
        assert_eq!(ma.policy_loss.to_bits(), mb.policy_loss.to_bits());
        assert_eq!(ma.value_loss.to_bits(), mb.value_loss.to_bits());
    }
}

#[test]
fn short_toy_training_improves_return() {
    let mut env = DoubleIntegratorEnv::new(22);
    let mut net = toy_network(22);
    let out = train(&mut env, &toy_config(102_400, 22), &mut net, None).unwrap();
    let k = out.metrics.len();
    let early: f64 =
        out.metrics[..k / 4].iter().map(|m| m.mean_return).sum::<f64>() / (k / 4) as f64;
    let late: f64 =
        out.metrics[3 * k / 4..].iter().map(|m| m.mean_return).sum::<f64>() / (k - 3 * k / 4) as f64;
    assert!(late > early, "early {early}, late {late}");
}

#[test]
fn metrics_csv_appends_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    let mut env = DoubleIntegratorEnv::new(23);
    let mut net = toy_network(23);
    let out = train(&mut env, &toy_config(1024, 23), &mut net, Some(&path)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("iteration,timesteps,mean_return"));
    assert_eq!(lines.len(), out.metrics.len() + 1);
}

#[test]
fn toy_env_is_deterministic_per_seed() {
    let mut a = DoubleIntegratorEnv::new(30);
    let mut b = DoubleIntegratorEnv::new(30);
    assert_eq!(a.reset(), b.reset());
    for _ in 0..100 {
        let (oa, ra, da) = a.step(&[0.3]);
        let (ob, rb, db) = b.step(&[0.3]);
        assert_eq!(oa, ob);
        assert_eq!(ra, rb);
        assert_eq!(da, db);
        if da {
            break;
        }
    }
}
