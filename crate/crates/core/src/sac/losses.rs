//! SAC losses with analytic gradients. Noise is passed in explicitly so the
//! losses are deterministic functions of the parameters.

use super::mlp::{Mlp, MlpCache};
use super::policy::GaussianPolicy;
use crate::par::Exec;

/// Concatenate observation and action rows into critic inputs.
pub fn critic_input(obs: &[f64], actions: &[f64], batch: usize) -> Vec<f64> {
    let od = obs.len() / batch.max(1);
    let ad = actions.len() / batch.max(1);
    let mut x = Vec::with_capacity(batch * (od + ad));
    for b in 0..batch {
        x.extend_from_slice(&obs[b * od..(b + 1) * od]);
        x.extend_from_slice(&actions[b * ad..(b + 1) * ad]);
    }
    x
}

/// `y = r + gamma * (1 - done) * (min(Q1', Q2')(s', a') - alpha * log pi(a'|s'))`
/// with `a'` drawn from the current policy using noise `xi_next`.
#[allow(clippy::too_many_arguments)]
pub fn critic_targets(
    exec: Exec,
    actor: &GaussianPolicy,
    q1_target: &Mlp,
    q2_target: &Mlp,
    next_obs: &[f64],
    rewards: &[f64],
    dones: &[f64],
    xi_next: &[f64],
    alpha: f64,
    gamma: f64,
) -> Vec<f64> {
    let batch = rewards.len();
    let s = actor.sample_with_noise(exec, next_obs, batch, xi_next, &mut MlpCache::default());
    let x = critic_input(next_obs, &s.actions, batch);
    let q1 = q1_target.predict(exec, &x, batch);
    let q2 = q2_target.predict(exec, &x, batch);
    (0..batch).map(|b| rewards[b] + gamma * (1.0 - dones[b]) * (q1[b].min(q2[b]) - alpha * s.log_prob[b])).collect()
}

/// `0.5 * (MSE(Q1, y) + MSE(Q2, y))` and the gradients of both critics.
pub fn critic_loss_and_grads(exec: Exec, q1: &Mlp, q2: &Mlp, obs: &[f64], actions: &[f64], y: &[f64]) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let batch = y.len();
    let x = critic_input(obs, actions, batch);
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(2);
    for q in [q1, q2] {
        let mut cache = MlpCache::default();
        let out = q.forward(exec, &x, batch, &mut cache);
        let mut d = vec![0.0; batch];
        let mut mse = 0.0;
        for b in 0..batch {
            let e = out[b] - y[b];
            mse += e * e;
            d[b] = e / batch as f64;
        }
        loss += 0.5 * mse / batch as f64;
        let mut g = q.zero_grads();
        q.backward(exec, &cache, &d, Some(&mut g), false);
        grads.push(g);
    }
    let g2 = grads.pop().unwrap();
    let g1 = grads.pop().unwrap();
    (loss, g1, g2)
}

pub struct ActorLoss {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
    pub mean_log_prob: f64,
}

/// `mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterized
/// through `xi`; gradients flow into the actor only.
pub fn actor_loss_and_grads(exec: Exec, actor: &GaussianPolicy, q1: &Mlp, q2: &Mlp, obs: &[f64], xi: &[f64], alpha: f64) -> ActorLoss {
    let batch = xi.len() / actor.act_dim();
    let a_dim = actor.act_dim();
    let mut a_cache = MlpCache::default();
    let s = actor.sample_with_noise(exec, obs, batch, xi, &mut a_cache);
    let x = critic_input(obs, &s.actions, batch);
    let in_dim = q1.n_in();
    let mut c1 = MlpCache::default();
    let mut c2 = MlpCache::default();
    let v1 = q1.forward(exec, &x, batch, &mut c1).to_vec();
    let v2 = q2.forward(exec, &x, batch, &mut c2).to_vec();
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut d1 = vec![0.0; batch];
    let mut d2 = vec![0.0; batch];
    for b in 0..batch {
        let (m, first) = if v1[b] <= v2[b] { (v1[b], true) } else { (v2[b], false) };
        loss += alpha * s.log_prob[b] - m;
        if first {
            d1[b] = -inv_b;
        } else {
            d2[b] = -inv_b;
        }
    }
    let mut d_actions = vec![0.0; batch * a_dim];
    for (q, cache, d) in [(q1, &c1, &d1), (q2, &c2, &d2)] {
        if d.iter().all(|&v| v == 0.0) {
            continue;
        }
        let dx = q.backward(exec, cache, d, None, true).unwrap();
        for b in 0..batch {
            for j in 0..a_dim {
                d_actions[b * a_dim + j] += dx[b * in_dim + in_dim - a_dim + j];
            }
        }
    }
    let d_logp = vec![alpha * inv_b; batch];
    let d_out = actor.output_grad(&s, &d_actions, &d_logp);
    let mut grads = actor.net.zero_grads();
    actor.net.backward(exec, &a_cache, &d_out, Some(&mut grads), false);
    ActorLoss { loss: loss * inv_b, grads, mean_log_prob: s.log_prob.iter().sum::<f64>() * inv_b }
}

/// `-log_alpha * (mean log pi + target_entropy)` and its derivative in `log_alpha`.
pub fn temperature_loss_and_grad(log_alpha: f64, mean_log_prob: f64, target_entropy: f64) -> (f64, f64) {
    let k = mean_log_prob + target_entropy;
    (-log_alpha * k, -k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn terminal_and_myopic_targets_equal_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = GaussianPolicy::new(Mlp::new(&[3, 8, 4], 1.0, &mut rng), 2).unwrap();
        let q1 = Mlp::new(&[5, 8, 1], 1.0, &mut rng);
        let q2 = Mlp::new(&[5, 8, 1], 1.0, &mut rng);
        let next: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xi: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = [0.7, -0.3];
        let y = critic_targets(Exec::Sequential, &actor, &q1, &q2, &next, &r, &[1.0, 1.0], &xi, 0.2, 0.99);
        assert_eq!(y, r.to_vec());
        let y = critic_targets(Exec::Sequential, &actor, &q1, &q2, &next, &r, &[0.0, 0.0], &xi, 0.2, 0.0);
        assert_eq!(y, r.to_vec());
    }

    #[test]
    fn target_scalar_arithmetic() {
        // actor: mean 0, log std 0 everywhere; xi = 0 -> a' = 0, log pi = -ln(2 pi)
        let actor = GaussianPolicy::new(Mlp::from_parts(vec![1, 4], vec![vec![0.0; 4]], vec![vec![0.0; 4]]).unwrap(), 2).unwrap();
        let q1 = Mlp::from_parts(vec![3, 1], vec![vec![0.0; 3]], vec![vec![1.5]]).unwrap();
        let q2 = Mlp::from_parts(vec![3, 1], vec![vec![0.0; 3]], vec![vec![1.2]]).unwrap();
        let y = critic_targets(Exec::Sequential, &actor, &q1, &q2, &[0.4], &[0.5], &[0.0], &[0.0, 0.0], 0.1, 0.9);
        let logp = -(2.0 * std::f64::consts::PI).ln();
        assert!((y[0] - (0.5 + 0.9 * (1.2 - 0.1 * logp))).abs() < 1e-15);
    }

    #[test]
    fn critic_fixed_point_has_zero_loss_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = Mlp::new(&[4, 8, 1], 1.0, &mut rng);
        let obs = [0.1, 0.2];
        let act = [0.3, -0.1];
        let obs_b: Vec<f64> = obs.repeat(5);
        let act_b: Vec<f64> = act.repeat(5);
        let y = q.predict(Exec::Sequential, &critic_input(&obs_b, &act_b, 5), 5);
        let (loss, g1, g2) = critic_loss_and_grads(Exec::Sequential, &q, &q, &obs_b, &act_b, &y);
        assert_eq!(loss, 0.0);
        assert!(g1.iter().chain(&g2).all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn temperature_sign() {
        // mean log pi above -target_entropy: gradient negative, descent raises log alpha
        let (_, g) = temperature_loss_and_grad(0.0, 3.0, -2.0);
        assert!(g < 0.0);
        let (_, g) = temperature_loss_and_grad(0.0, 1.0, -2.0);
        assert!(g > 0.0);
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / (a.abs() + n.abs()).max(1e-6)
    }

    /// Central differences over every parameter of `net`, compared to `grads`.
    fn check_grads(net: &Mlp, grads: &[Vec<f64>], loss: impl Fn(&Mlp) -> f64) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (t, g) in grads.iter().enumerate() {
            for i in 0..g.len() {
                let mut p = net.clone();
                p.tensors_mut()[t][i] += h;
                let up = loss(&p);
                let mut m = net.clone();
                m.tensors_mut()[t][i] -= h;
                let down = loss(&m);
                worst = worst.max(rel_err(g[i], (up - down) / (2.0 * h)));
            }
        }
        worst
    }

    struct Toy {
        actor: GaussianPolicy,
        q1: Mlp,
        q2: Mlp,
        obs: Vec<f64>,
        actions: Vec<f64>,
        xi: Vec<f64>,
        y: Vec<f64>,
    }

    fn toy(seed: u64) -> Toy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = 6;
        let u = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        Toy {
            actor: GaussianPolicy::new(Mlp::new(&[4, 8, 8, 4], 0.5, &mut rng), 2).unwrap(),
            q1: Mlp::new(&[6, 8, 8, 1], 1.0, &mut rng),
            q2: Mlp::new(&[6, 8, 8, 1], 1.0, &mut rng),
            obs: u(&mut rng, 4 * batch),
            actions: u(&mut rng, 2 * batch),
            xi: u(&mut rng, 2 * batch),
            y: u(&mut rng, batch),
        }
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        for seed in 0..3 {
            let t = toy(seed);
            let (_, g1, g2) = critic_loss_and_grads(Exec::Sequential, &t.q1, &t.q2, &t.obs, &t.actions, &t.y);
            let e1 = check_grads(&t.q1, &g1, |q| critic_loss_and_grads(Exec::Sequential, q, &t.q2, &t.obs, &t.actions, &t.y).0);
            let e2 = check_grads(&t.q2, &g2, |q| critic_loss_and_grads(Exec::Sequential, &t.q1, q, &t.obs, &t.actions, &t.y).0);
            assert!(e1 < 1e-4 && e2 < 1e-4, "seed {seed}: {e1:e} {e2:e}");
        }
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        for seed in 0..3 {
            let t = toy(seed);
            let alpha = 0.3;
            let al = actor_loss_and_grads(Exec::Sequential, &t.actor, &t.q1, &t.q2, &t.obs, &t.xi, alpha);
            let e = check_grads(&t.actor.net, &al.grads, |net| {
                let p = GaussianPolicy::new(net.clone(), 2).unwrap();
                actor_loss_and_grads(Exec::Sequential, &p, &t.q1, &t.q2, &t.obs, &t.xi, alpha).loss
            });
            assert!(e < 1e-4, "seed {seed}: {e:e}");
        }
    }

    #[test]
    fn parallel_gradients_are_bitwise_sequential() {
        let t = toy(7);
        let a = actor_loss_and_grads(Exec::Sequential, &t.actor, &t.q1, &t.q2, &t.obs, &t.xi, 0.2);
        let b = actor_loss_and_grads(Exec::Parallel, &t.actor, &t.q1, &t.q2, &t.obs, &t.xi, 0.2);
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert_eq!(a.grads, b.grads);
    }

    #[test]
    fn temperature_gradient_matches_finite_differences() {
        let h = 1e-6;
        for (la, lp, te) in [(0.0, 1.3, -2.0), (-1.7, -3.1, -2.0), (0.4, 2.2, -1.0)] {
            let (_, g) = temperature_loss_and_grad(la, lp, te);
            let n = (temperature_loss_and_grad(la + h, lp, te).0 - temperature_loss_and_grad(la - h, lp, te).0) / (2.0 * h);
            assert!(rel_err(g, n) < 1e-4);
        }
    }
}
