//! From-scratch PPO: dense actor-critic function approximators, mixed
//! discrete/continuous policy heads, discounted returns with self-normalized
//! advantages, the clipped surrogate objective with an entropy bonus, and an
//! adaptive-moment optimizer.
//!
//! All agents share one parameter set; experience from every agent updates
//! the same actor and critic. Rollouts use a frozen copy of the parameters,
//! which is re-synced after each update round, and the experience buffer is
//! cleared every round so the clipped ratios stay near-on-policy.

pub mod adam;
pub mod buffer;
pub mod checkpoint;
pub mod heads;
pub mod loss;
pub mod net;

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::mdp::{Action, Env, MdpError, Observation};
use crate::rng::{stream_rng, Stream};
use adam::OptimizerState;
use buffer::{Transition, TrajectoryBuffer};
use heads::{deterministic_action, sample_action, HeadLayout, PolicyHeads, SampledAction, Squash};
use net::{Activation, DenseNet};

/// Transmit power never squashes all the way to zero; the environment
/// rejects non-positive powers.
pub const P_MIN_W: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("persistent non-finite losses after {0} skipped updates")]
    NumericFailure(u64),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub betas: (f64, f64),
    pub gamma: f64,
    pub clip_eps: f64,
    pub entropy_coef: f64,
    /// Outer loop length (episodes).
    pub episodes: usize,
    /// Update every this many steps.
    pub update_interval: usize,
    /// Optimization epochs per update round.
    pub epochs: usize,
    /// Minibatch size.
    pub minibatch: usize,
    /// Standard deviation of the normal parameter init.
    pub init_std: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            lr: 1e-4,
            betas: (0.9, 0.99),
            gamma: 0.99,
            clip_eps: 0.2,
            entropy_coef: 0.01,
            episodes: 1000,
            update_interval: 5,
            epochs: 5,
            minibatch: 32,
            init_std: 0.1,
        }
    }
}

/// Actor, critic, and the decoding information needed to turn network
/// outputs into environment actions.
#[derive(Debug, Clone)]
pub struct Policy {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub layout: HeadLayout,
    pub p_squash: Squash,
    pub o1_squash: Squash,
}

impl Policy {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        obs_dim: usize,
        n_pairs: usize,
        u_max: u32,
        hidden: &[usize],
        init_std: f64,
        p_max_w: f64,
        o1_min: f64,
        o1_max: f64,
        rng: &mut R,
    ) -> Self {
        let layout = HeadLayout {
            n_pairs,
            n_u: u_max as usize,
        };
        let mut actor_dims = vec![obs_dim];
        actor_dims.extend_from_slice(hidden);
        actor_dims.push(layout.output_dim());
        let mut critic_dims = vec![obs_dim];
        critic_dims.extend_from_slice(hidden);
        critic_dims.push(1);
        Self {
            actor: DenseNet::random(&actor_dims, Activation::Tanh, init_std, rng),
            critic: DenseNet::random(&critic_dims, Activation::Tanh, init_std, rng),
            layout,
            p_squash: Squash::new(P_MIN_W, p_max_w),
            o1_squash: Squash::new(o1_min, o1_max),
        }
    }

    /// Builds a policy sized for a given environment.
    pub fn for_env<R: Rng>(env: &Env, config: &LearnerConfig, rng: &mut R) -> Self {
        Self::new(
            env.observation_dim(),
            env.pair_count(),
            env.config().u_max,
            &config.hidden,
            config.init_std,
            env.config().p_max_w,
            env.config().o1_min,
            env.config().o1_max,
            rng,
        )
    }

    pub fn heads(&self, obs: &Array1<f64>) -> PolicyHeads {
        PolicyHeads::from_output(&self.actor.forward(obs), &self.layout)
    }

    pub fn value(&self, obs: &Array1<f64>) -> f64 {
        self.critic.forward(obs)[0]
    }

    /// Decodes a sampled network action into environment units.
    pub fn decode(&self, sampled: &SampledAction) -> Action {
        Action {
            pair: sampled.pair_idx,
            power_w: self.p_squash.apply(sampled.z_p),
            o1_fraction: self.o1_squash.apply(sampled.z_o1),
            u: sampled.u_idx as u32 + 1,
        }
    }

    pub fn sample<R: Rng>(&self, obs: &Array1<f64>, rng: &mut R) -> (Action, SampledAction) {
        let heads = self.heads(obs);
        let sampled = sample_action(&heads, &self.p_squash, &self.o1_squash, rng);
        (self.decode(&sampled), sampled)
    }

    /// Greedy decode: argmax categoricals, distribution means.
    pub fn greedy(&self, obs: &Array1<f64>) -> (Action, SampledAction) {
        let heads = self.heads(obs);
        let sampled = deterministic_action(&heads, &self.p_squash, &self.o1_squash);
        (self.decode(&sampled), sampled)
    }

    /// Log-probability of a stored action under the current parameters.
    pub fn log_prob(&self, obs: &Array1<f64>, sampled: &SampledAction) -> f64 {
        let heads = self.heads(obs);
        heads::joint_log_prob(
            &heads,
            &self.p_squash,
            &self.o1_squash,
            sampled.pair_idx,
            sampled.u_idx,
            sampled.z_p,
            sampled.z_o1,
        )
    }

    pub fn param_count(&self) -> usize {
        self.actor.param_count() + self.critic.param_count()
    }

    /// Flattens actor then critic parameters into one vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        self.actor.flatten_into(&mut flat);
        self.critic.flatten_into(&mut flat);
        flat
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let used = self.actor.assign_flat(flat);
        self.critic.assign_flat(&flat[used..]);
    }
}

/// One row of the per-episode training log.
#[derive(Debug, Clone)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_st_vehicles: f64,
    pub mean_st_wifi: f64,
    pub collision_rate: f64,
    pub wifi_gate_rate: f64,
    pub mean_hsse: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub policy: Policy,
    pub log: Vec<EpisodeStats>,
}

pub fn obs_vector(obs: &Observation) -> Array1<f64> {
    Array1::from(obs.as_array().to_vec())
}

/// Full training loop: episodes of `t_max` steps with an update round every
/// `update_interval` steps (K epochs of minibatch updates over the pooled
/// buffer, then a frozen-parameter sync and a buffer clear).
pub fn train(env: &mut Env, config: &LearnerConfig, seed: u64) -> Result<TrainResult, LearnerError> {
    let mut policy_rng: ChaCha12Rng = stream_rng(seed, Stream::Policy);
    let mut shuffle_rng: ChaCha12Rng = stream_rng(seed, Stream::Shuffle);
    let mut policy = Policy::for_env(env, config, &mut policy_rng);
    let mut frozen = policy.clone();
    let mut optimizer = OptimizerState::new(policy.param_count(), config.lr, config.betas);
    let n_agents = env.config().n_vehicles;
    let t_max = env.config().t_max;
    let mut buffer = TrajectoryBuffer::new(n_agents);
    let mut log = Vec::with_capacity(config.episodes);
    let mut consecutive_skips: u64 = 0;

    for episode in 0..config.episodes {
        let mut observations: Vec<Array1<f64>> = env.reset().iter().map(obs_vector).collect();
        let mut reward_sum = 0.0;
        let mut st_v_sum = 0.0;
        let mut st_w_sum = 0.0;
        let mut collision_steps = 0usize;
        let mut gate_steps = 0usize;
        let mut hsse_sum = 0.0;

        for t in 1..=t_max {
            let mut actions = Vec::with_capacity(n_agents);
            let mut sampled_actions = Vec::with_capacity(n_agents);
            let mut values = Vec::with_capacity(n_agents);
            for obs in &observations {
                let (action, sampled) = frozen.sample(obs, &mut policy_rng);
                values.push(frozen.value(obs));
                actions.push(action);
                sampled_actions.push(sampled);
            }
            let outcome = env.step(&actions)?;
            for agent in 0..n_agents {
                buffer.push(
                    agent,
                    Transition {
                        obs: observations[agent].clone(),
                        action: sampled_actions[agent],
                        reward: outcome.rewards[agent],
                        value_old: values[agent],
                    },
                );
            }
            reward_sum += outcome.breakdown.reward;
            st_v_sum += outcome.breakdown.st_sum_vehicles;
            st_w_sum += outcome.breakdown.st_sum_wifi;
            if outcome.breakdown.collision_penalty_count > 0 {
                collision_steps += 1;
            }
            if outcome.breakdown.wifi_gate {
                gate_steps += 1;
            }
            hsse_sum += outcome.agents.iter().map(|a| a.hsse).sum::<f64>() / n_agents as f64;
            let next_observations: Vec<Array1<f64>> =
                outcome.observations.iter().map(obs_vector).collect();

            if t % config.update_interval == 0 {
                // Terminal cuts bootstrap zero; mid-episode cuts bootstrap
                // the frozen critic's value of the next state.
                let bootstraps: Vec<f64> = if outcome.done {
                    vec![0.0; n_agents]
                } else {
                    next_observations.iter().map(|o| frozen.value(o)).collect()
                };
                let samples = buffer.drain_round(&bootstraps, config.gamma);
                let mut indices: Vec<usize> = (0..samples.len()).collect();
                for _ in 0..config.epochs {
                    shuffle(&mut indices, &mut shuffle_rng);
                    for chunk in indices.chunks(config.minibatch) {
                        let minibatch: Vec<_> = chunk.iter().map(|&i| samples[i].clone()).collect();
                        let (_, actor_grads, critic_grads) = loss::total_loss_and_grads(
                            &policy,
                            &minibatch,
                            config.clip_eps,
                            config.entropy_coef,
                        );
                        let mut grad_flat = Vec::with_capacity(policy.param_count());
                        actor_grads.flatten_into(&mut grad_flat);
                        critic_grads.flatten_into(&mut grad_flat);
                        let mut params = policy.flatten();
                        if optimizer.step(&mut params, &grad_flat) {
                            policy.assign_flat(&params);
                            consecutive_skips = 0;
                        } else {
                            consecutive_skips += 1;
                            if consecutive_skips > 25 {
                                return Err(LearnerError::NumericFailure(consecutive_skips));
                            }
                        }
                    }
                }
                frozen = policy.clone();
            }
            observations = next_observations;
        }

        log.push(EpisodeStats {
            episode,
            mean_reward: reward_sum / t_max as f64,
            mean_st_vehicles: st_v_sum / t_max as f64,
            mean_st_wifi: st_w_sum / t_max as f64,
            collision_rate: collision_steps as f64 / t_max as f64,
            wifi_gate_rate: gate_steps as f64 / t_max as f64,
            mean_hsse: hsse_sum / t_max as f64,
        });
    }

    Ok(TrainResult { policy, log })
}

/// Fisher-Yates shuffle driven by the named shuffle stream.
fn shuffle<R: Rng>(indices: &mut [usize], rng: &mut R) {
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::EnvConfig;

    fn tiny_env(seed: u64) -> Env {
        let config = EnvConfig {
            t_max: 10,
            ..EnvConfig::default()
        };
        Env::new(config, seed).unwrap()
    }

    fn tiny_learner() -> LearnerConfig {
        LearnerConfig {
            hidden: vec![16, 8],
            episodes: 2,
            ..LearnerConfig::default()
        }
    }

    #[test]
    fn smoke_run_emits_one_log_row_per_episode() {
        let mut env = tiny_env(3);
        let config = LearnerConfig {
            episodes: 1,
            ..tiny_learner()
        };
        let result = train(&mut env, &config, 3).unwrap();
        assert_eq!(result.log.len(), 1);
        assert!(result.log[0].mean_reward.is_finite());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let run = |seed| {
            let mut env = tiny_env(seed);
            train(&mut env, &tiny_learner(), seed).unwrap()
        };
        let a = run(11);
        let b = run(11);
        for (ra, rb) in a.log.iter().zip(&b.log) {
            assert_eq!(ra.mean_reward, rb.mean_reward);
        }
        assert_eq!(a.policy.flatten(), b.policy.flatten());
    }

    #[test]
    fn policy_decode_respects_action_ranges() {
        let mut rng = stream_rng(0, Stream::Policy);
        let env = tiny_env(0);
        let policy = Policy::for_env(&env, &tiny_learner(), &mut rng);
        let obs = Array1::from(vec![0.0; 5]);
        for _ in 0..200 {
            let (action, _) = policy.sample(&obs, &mut rng);
            assert!(action.pair < env.pair_count());
            assert!(action.power_w > 0.0 && action.power_w <= env.config().p_max_w);
            assert!(action.o1_fraction >= env.config().o1_min);
            assert!(action.o1_fraction <= env.config().o1_max);
            assert!(action.u >= 1 && action.u <= env.config().u_max);
        }
    }

    #[test]
    fn parameter_sharing_one_net_for_all_agents() {
        // The training loop instantiates exactly one policy; this pins the
        // sizing logic: the actor head covers every agent's action space.
        let env = tiny_env(1);
        let mut rng = stream_rng(1, Stream::Policy);
        let policy = Policy::for_env(&env, &tiny_learner(), &mut rng);
        assert_eq!(policy.layout.n_pairs, env.pair_count());
        assert_eq!(policy.layout.n_u, env.config().u_max as usize);
        assert_eq!(policy.actor.input_dim(), env.observation_dim());
    }
}
