//! The PPO objective: clipped surrogate actor loss, squared-error critic
//! loss, entropy bonus, and their composition, together with hand-derived
//! gradients for every head.
//!
//! Gradient correctness is the foundational test of this crate: every layer
//! and every head's contribution to the total loss is checked against
//! central finite differences on random nets and batches.

use ndarray::Array1;

use super::buffer::Sample;
use super::heads::{
    categorical_entropy, log_std_raw_derivative, PolicyHeads,
};
use super::net::NetGrads;
use super::Policy;

/// Scalar losses of one minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub actor: f64,
    pub critic: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Clipped surrogate loss: mean over the batch of
/// `-min(r * A, clip(r, 1-eps, 1+eps) * A)` with `r = exp(new - old)`.
pub fn actor_loss(logp_new: &[f64], logp_old: &[f64], advantages: &[f64], clip_eps: f64) -> f64 {
    assert!(logp_new.len() == logp_old.len() && logp_new.len() == advantages.len());
    let mut sum = 0.0;
    for i in 0..logp_new.len() {
        let ratio = (logp_new[i] - logp_old[i]).exp();
        let surr1 = ratio * advantages[i];
        let surr2 = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantages[i];
        sum += -surr1.min(surr2);
    }
    sum / logp_new.len() as f64
}

/// Squared-error critic loss: mean of `0.5 * (R - V)^2`.
pub fn critic_loss(returns: &[f64], values: &[f64]) -> f64 {
    assert_eq!(returns.len(), values.len());
    let sum: f64 = returns
        .iter()
        .zip(values)
        .map(|(r, v)| 0.5 * (r - v) * (r - v))
        .sum();
    sum / returns.len() as f64
}

/// `actor + critic - c * entropy`.
pub fn total_loss(actor: f64, critic: f64, entropy: f64, entropy_coef: f64) -> f64 {
    actor + critic - entropy_coef * entropy
}

/// Computes the batch losses and accumulates analytic gradients for both
/// nets in one pass.
///
/// Per-sample actor gradient: with `r = exp(logp_new - logp_old)`, the
/// surrogate's derivative with respect to `logp_new` is `-A * r` when the
/// unclipped branch is active and exactly zero when the clip binds, which is
/// what makes the clipped objective trust-region-like. The entropy bonus and
/// critic term contribute their own exact derivatives.
pub fn total_loss_and_grads(
    policy: &Policy,
    batch: &[Sample],
    clip_eps: f64,
    entropy_coef: f64,
) -> (LossBreakdown, NetGrads, NetGrads) {
    assert!(!batch.is_empty(), "empty minibatch");
    let mut actor_grads = NetGrads::zeros_like(&policy.actor);
    let mut critic_grads = NetGrads::zeros_like(&policy.critic);
    let inv_b = 1.0 / batch.len() as f64;
    let layout = &policy.layout;

    let mut actor_sum = 0.0;
    let mut critic_sum = 0.0;
    let mut entropy_sum = 0.0;

    for sample in batch {
        // ── Actor forward ──
        let trace = policy.actor.forward_trace(&sample.obs);
        let heads = PolicyHeads::from_output(trace.output(), layout);
        let logp_new = super::heads::joint_log_prob(
            &heads,
            &policy.p_squash,
            &policy.o1_squash,
            sample.action.pair_idx,
            sample.action.u_idx,
            sample.action.z_p,
            sample.action.z_o1,
        );
        let entropy = heads.entropy();
        entropy_sum += entropy;

        let advantage = sample.advantage;
        let ratio = (logp_new - sample.action.log_prob).exp();
        let surr1 = ratio * advantage;
        let clipped_ratio = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
        let surr2 = clipped_ratio * advantage;
        actor_sum += -surr1.min(surr2);

        // d(actor loss) / d logp_new, zero when the clip gates the sample.
        let clip_binds = surr2 < surr1 && (ratio < 1.0 - clip_eps || ratio > 1.0 + clip_eps);
        let g_logp = (if clip_binds { 0.0 } else { -advantage * ratio }) * inv_b;
        let g_entropy = -entropy_coef * inv_b;

        // ── Assemble d loss / d actor outputs ──
        let mut grad_out = Array1::zeros(layout.output_dim());

        // Categorical heads: d logp_sel / d logit_j = delta - p_j;
        // d H / d logit_j = -p_j (logp_j + H).
        let pair_h = categorical_entropy(&heads.pair_log_probs);
        for (j, &lp) in heads.pair_log_probs.iter().enumerate() {
            let p = lp.exp();
            let delta = if j == sample.action.pair_idx { 1.0 } else { 0.0 };
            grad_out[j] = g_logp * (delta - p) + g_entropy * (-p * (lp + pair_h));
        }
        let u_h = categorical_entropy(&heads.u_log_probs);
        for (j, &lp) in heads.u_log_probs.iter().enumerate() {
            let p = lp.exp();
            let delta = if j == sample.action.u_idx { 1.0 } else { 0.0 };
            grad_out[layout.n_pairs + j] = g_logp * (delta - p) + g_entropy * (-p * (lp + u_h));
        }

        // Gaussian heads: logp depends on mean and log-std; the squash
        // correction depends only on the stored z, so it drops out of the
        // parameter gradient. Entropy contributes 1 per unit of log-std.
        let out = trace.output();
        {
            let g = &heads.p;
            let z = sample.action.z_p;
            let inv_var = (-2.0 * g.log_std).exp();
            grad_out[layout.p_mean_idx()] = g_logp * (z - g.mean) * inv_var;
            let d_logp_d_logstd = (z - g.mean) * (z - g.mean) * inv_var - 1.0;
            let d_raw = log_std_raw_derivative(out[layout.p_log_std_idx()]);
            grad_out[layout.p_log_std_idx()] = (g_logp * d_logp_d_logstd + g_entropy) * d_raw;
        }
        {
            let g = &heads.o1;
            let z = sample.action.z_o1;
            let inv_var = (-2.0 * g.log_std).exp();
            grad_out[layout.o1_mean_idx()] = g_logp * (z - g.mean) * inv_var;
            let d_logp_d_logstd = (z - g.mean) * (z - g.mean) * inv_var - 1.0;
            let d_raw = log_std_raw_derivative(out[layout.o1_log_std_idx()]);
            grad_out[layout.o1_log_std_idx()] = (g_logp * d_logp_d_logstd + g_entropy) * d_raw;
        }

        policy.actor.backward(&trace, &grad_out, &mut actor_grads);

        // ── Critic ──
        let critic_trace = policy.critic.forward_trace(&sample.obs);
        let value = critic_trace.output()[0];
        critic_sum += 0.5 * (sample.ret - value) * (sample.ret - value);
        let critic_grad_out = Array1::from(vec![(value - sample.ret) * inv_b]);
        policy
            .critic
            .backward(&critic_trace, &critic_grad_out, &mut critic_grads);
    }

    let actor = actor_sum * inv_b;
    let critic = critic_sum * inv_b;
    let entropy = entropy_sum * inv_b;
    let breakdown = LossBreakdown {
        actor,
        critic,
        entropy,
        total: total_loss(actor, critic, entropy, entropy_coef),
    };
    (breakdown, actor_grads, critic_grads)
}

/// Scalar batch loss without gradients, for finite-difference checks.
pub fn batch_loss(policy: &Policy, batch: &[Sample], clip_eps: f64, entropy_coef: f64) -> f64 {
    let mut actor_sum = 0.0;
    let mut critic_sum = 0.0;
    let mut entropy_sum = 0.0;
    for sample in batch {
        let heads = policy.heads(&sample.obs);
        let logp_new = super::heads::joint_log_prob(
            &heads,
            &policy.p_squash,
            &policy.o1_squash,
            sample.action.pair_idx,
            sample.action.u_idx,
            sample.action.z_p,
            sample.action.z_o1,
        );
        let ratio = (logp_new - sample.action.log_prob).exp();
        let surr1 = ratio * sample.advantage;
        let surr2 = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * sample.advantage;
        actor_sum += -surr1.min(surr2);
        entropy_sum += heads.entropy();
        let value = policy.value(&sample.obs);
        critic_sum += 0.5 * (sample.ret - value) * (sample.ret - value);
    }
    let b = batch.len() as f64;
    total_loss(actor_sum / b, critic_sum / b, entropy_sum / b, entropy_coef)
}

pub mod test_support {
    //! Instrumentation for the gradient gate: random (policy, batch)
    //! instance generation and central-difference gradients, shared by the
    //! unit tests here and by the acceptance suite.

    use rand::Rng;

    use super::super::buffer::Sample;
    use super::super::Policy;
    use ndarray::Array1;

    /// Small random policy: 4-dim observations, two hidden layers, 3 pairs,
    /// 2 symbol choices.
    pub fn random_policy<R: Rng>(rng: &mut R) -> Policy {
        Policy::new(4, 3, 2, &[6, 5], 0.4, 0.2, 0.05, 0.95, rng)
    }

    /// Random batch sampled from a perturbed copy of `policy`, so the
    /// old/new ratios are spread around 1 and both clip branches occur.
    /// Batches with a sample too close to the clip kink are rejected, since
    /// a central difference straddling the kink is meaningless.
    pub fn random_batch<R: Rng>(
        policy: &Policy,
        clip_eps: f64,
        size: usize,
        rng: &mut R,
    ) -> Vec<Sample> {
        loop {
            let mut old = policy.clone();
            let mut flat = old.flatten();
            for v in &mut flat {
                *v += rng.gen_range(-0.05..0.05);
            }
            old.assign_flat(&flat);

            let batch: Vec<Sample> = (0..size)
                .map(|_| {
                    let obs = Array1::from_shape_fn(4, |_| rng.gen_range(-1.5..1.5));
                    let (_, sampled) = old.sample(&obs, rng);
                    Sample {
                        obs,
                        action: sampled,
                        ret: rng.gen_range(-2.0..2.0),
                        advantage: rng.gen_range(-1.0..1.0),
                    }
                })
                .collect();

            let near_kink = batch.iter().any(|s| {
                let ratio = (policy.log_prob(&s.obs, &s.action) - s.action.log_prob).exp();
                (ratio - (1.0 - clip_eps)).abs() < 1e-3 || (ratio - (1.0 + clip_eps)).abs() < 1e-3
            });
            if !near_kink {
                return batch;
            }
        }
    }

    /// Central-difference gradient of the batch loss over the combined
    /// actor+critic parameter vector.
    pub fn finite_difference_grad(
        policy: &Policy,
        batch: &[Sample],
        clip_eps: f64,
        entropy_coef: f64,
        h: f64,
    ) -> Vec<f64> {
        let flat = policy.flatten();
        let mut grad = vec![0.0; flat.len()];
        let mut scratch = policy.clone();
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += h;
            scratch.assign_flat(&plus);
            let f_plus = super::batch_loss(&scratch, batch, clip_eps, entropy_coef);
            let mut minus = flat.clone();
            minus[i] -= h;
            scratch.assign_flat(&minus);
            let f_minus = super::batch_loss(&scratch, batch, clip_eps, entropy_coef);
            grad[i] = (f_plus - f_minus) / (2.0 * h);
        }
        grad
    }

    /// Relative mismatch with an absolute guard for near-zero entries.
    pub fn grad_mismatch(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| {
                let denom = a.abs().max(n.abs());
                if (a - n).abs() <= 1e-8 {
                    0.0
                } else {
                    (a - n).abs() / denom
                }
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use approx::assert_relative_eq;
    use ndarray::Array1;
    use rand::Rng;

    #[test]
    fn actor_loss_unit_vectors() {
        // Identity ratio.
        assert_relative_eq!(actor_loss(&[0.0], &[0.0], &[1.0], 0.2), -1.0);
        // Ratio 1.5 with positive advantage clips at 1.2.
        assert_relative_eq!(
            actor_loss(&[1.5f64.ln()], &[0.0], &[1.0], 0.2),
            -1.2,
            max_relative = 1e-12
        );
        // Ratio 0.5 with negative advantage clips on the low side.
        assert_relative_eq!(
            actor_loss(&[0.5f64.ln()], &[0.0], &[-1.0], 0.2),
            0.8,
            max_relative = 1e-12
        );
    }

    #[test]
    fn critic_loss_unit_vectors() {
        assert_eq!(critic_loss(&[3.0], &[3.0]), 0.0);
        assert_relative_eq!(critic_loss(&[5.0], &[3.0]), 2.0, max_relative = 1e-12);
        // Residuals {1, 3}: mean of {0.5, 4.5}.
        assert_relative_eq!(
            critic_loss(&[2.0, 4.0], &[1.0, 1.0]),
            2.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn total_loss_composition() {
        assert_eq!(total_loss(1.5, 0.7, 3.0, 0.0), 2.2);
        assert_relative_eq!(total_loss(1.5, 0.7, 3.0, 0.01), 2.17, max_relative = 1e-12);
    }

    #[test]
    fn composite_loss_matches_term_by_term_recomputation() {
        // Recompute each term of the composite objective outside the fused
        // path and compare.
        let mut rng = stream_rng(21, Stream::Policy);
        let policy = random_policy(&mut rng);
        let batch = random_batch(&policy, 0.2, 6, &mut rng);
        let (breakdown, _, _) = total_loss_and_grads(&policy, &batch, 0.2, 0.01);

        let logp_new: Vec<f64> = batch
            .iter()
            .map(|s| policy.log_prob(&s.obs, &s.action))
            .collect();
        let logp_old: Vec<f64> = batch.iter().map(|s| s.action.log_prob).collect();
        let advs: Vec<f64> = batch.iter().map(|s| s.advantage).collect();
        let rets: Vec<f64> = batch.iter().map(|s| s.ret).collect();
        let values: Vec<f64> = batch.iter().map(|s| policy.value(&s.obs)).collect();
        let entropy: f64 = batch
            .iter()
            .map(|s| policy.heads(&s.obs).entropy())
            .sum::<f64>()
            / batch.len() as f64;

        assert_relative_eq!(
            breakdown.actor,
            actor_loss(&logp_new, &logp_old, &advs, 0.2),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            breakdown.critic,
            critic_loss(&rets, &values),
            max_relative = 1e-12
        );
        assert_relative_eq!(breakdown.entropy, entropy, max_relative = 1e-12);
        assert_relative_eq!(
            breakdown.total,
            total_loss(breakdown.actor, breakdown.critic, entropy, 0.01),
            max_relative = 1e-12
        );
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = stream_rng(7, Stream::Policy);
        for instance in 0..20 {
            let policy = random_policy(&mut rng);
            let batch = random_batch(&policy, 0.2, 5, &mut rng);
            let (_, actor_grads, critic_grads) =
                total_loss_and_grads(&policy, &batch, 0.2, 0.01);
            let mut analytic = Vec::new();
            actor_grads.flatten_into(&mut analytic);
            critic_grads.flatten_into(&mut analytic);
            let numeric = finite_difference_grad(&policy, &batch, 0.2, 0.01, 1e-5);
            let mismatch = grad_mismatch(&analytic, &numeric);
            assert!(
                mismatch < 1e-4,
                "instance {instance}: worst relative error {mismatch}"
            );
        }
    }

    #[test]
    fn clip_gating_zeroes_actor_gradient() {
        // A sample whose ratio is far outside the clip band (with the sign
        // that makes the clipped branch the minimum) must contribute zero
        // actor gradient when the entropy bonus is off.
        let mut rng = stream_rng(9, Stream::Policy);
        'outer: for _ in 0..50 {
            let policy = random_policy(&mut rng);
            let mut batch = random_batch(&policy, 0.2, 1, &mut rng);
            let s = &mut batch[0];
            let ratio = (policy.log_prob(&s.obs, &s.action) - s.action.log_prob).exp();
            // Force the clip to bind: ratio > 1.2 with A > 0 picks the
            // clipped (constant) branch.
            if ratio <= 1.25 {
                continue 'outer;
            }
            s.advantage = 1.0;
            let (_, actor_grads, _) = total_loss_and_grads(&policy, &batch, 0.2, 0.0);
            let mut flat = Vec::new();
            actor_grads.flatten_into(&mut flat);
            assert!(flat.iter().all(|&g| g == 0.0), "leaked gradient {flat:?}");
            return;
        }
        panic!("never built a clipped sample");
    }

    #[test]
    fn fresh_sync_means_ratio_one_and_actor_loss_is_mean_advantage() {
        // Right after a parameter sync, logp_old equals logp_new, so the
        // actor loss collapses to -mean(A).
        let mut rng = stream_rng(13, Stream::Policy);
        let policy = random_policy(&mut rng);
        let batch: Vec<_> = (0..8)
            .map(|_| {
                let obs = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
                let (_, mut sampled) = policy.sample(&obs, &mut rng);
                // Stored old log-prob comes from the same parameters.
                sampled.log_prob = policy.log_prob(&obs, &sampled);
                super::super::buffer::Sample {
                    obs,
                    action: sampled,
                    ret: 0.3,
                    advantage: rng.gen_range(-1.0..1.0),
                }
            })
            .collect();
        let (breakdown, _, _) = total_loss_and_grads(&policy, &batch, 0.2, 0.0);
        let mean_adv: f64 =
            batch.iter().map(|s| s.advantage).sum::<f64>() / batch.len() as f64;
        assert_relative_eq!(breakdown.actor, -mean_adv, max_relative = 1e-9);
    }
}
