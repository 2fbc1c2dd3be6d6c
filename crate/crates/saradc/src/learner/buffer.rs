//! On-policy experience pooling across agents, with discounted returns and
//! self-normalized advantages derived at the end of every update round.

use ndarray::Array1;

use super::heads::SampledAction;

/// One stored interaction of one agent.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Array1<f64>,
    pub action: SampledAction,
    pub reward: f64,
    /// Value estimate of `obs` under the frozen critic at collection time.
    pub value_old: f64,
}

/// One training sample after returns and advantages are attached.
#[derive(Debug, Clone)]
pub struct Sample {
    pub obs: Array1<f64>,
    pub action: SampledAction,
    pub ret: f64,
    pub advantage: f64,
}

/// Backward recursion `R_t = r_t + gamma * R_{t+1}`, seeded with
/// `gamma * bootstrap` past the segment end. Terminal segments pass
/// `bootstrap = 0`.
pub fn discounted_returns(rewards: &[f64], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for (i, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        returns[i] = acc;
    }
    returns
}

/// Self-normalized advantages: `(R - V) / max |R - V|`, guarded so an
/// all-zero batch maps to all zeros. Outputs lie in [-1, 1].
pub fn advantages(returns: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(returns.len(), values.len());
    let raw: Vec<f64> = returns.iter().zip(values).map(|(r, v)| r - v).collect();
    let a_max = raw.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if a_max < 1e-12 {
        return vec![0.0; raw.len()];
    }
    raw.into_iter().map(|a| a / a_max).collect()
}

/// Pooled on-policy buffer: one trajectory segment per agent, cleared after
/// every update round.
#[derive(Debug, Default)]
pub struct TrajectoryBuffer {
    per_agent: Vec<Vec<Transition>>,
}

impl TrajectoryBuffer {
    pub fn new(n_agents: usize) -> Self {
        Self {
            per_agent: vec![Vec::new(); n_agents],
        }
    }

    pub fn push(&mut self, agent: usize, transition: Transition) {
        self.per_agent[agent].push(transition);
    }

    pub fn len(&self) -> usize {
        self.per_agent.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Converts the stored segments into samples: per-agent discounted
    /// returns seeded with that agent's bootstrap value, then advantages
    /// normalized jointly over the whole pooled batch. Clears the buffer;
    /// the next round starts fresh.
    pub fn drain_round(&mut self, bootstraps: &[f64], gamma: f64) -> Vec<Sample> {
        assert_eq!(bootstraps.len(), self.per_agent.len());
        let mut obs_actions = Vec::new();
        let mut returns = Vec::new();
        let mut values = Vec::new();
        for (agent, segment) in self.per_agent.iter_mut().enumerate() {
            let rewards: Vec<f64> = segment.iter().map(|t| t.reward).collect();
            let rets = discounted_returns(&rewards, gamma, bootstraps[agent]);
            for (t, ret) in segment.drain(..).zip(rets) {
                returns.push(ret);
                values.push(t.value_old);
                obs_actions.push((t.obs, t.action));
            }
        }
        let advs = advantages(&returns, &values);
        obs_actions
            .into_iter()
            .zip(returns)
            .zip(advs)
            .map(|(((obs, action), ret), advantage)| Sample {
                obs,
                action,
                ret,
                advantage,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_step_terminal_return() {
        let r = discounted_returns(&[1.0, 1.0], 0.99, 0.0);
        assert_relative_eq!(r[0], 1.99, max_relative = 1e-12);
        assert_relative_eq!(r[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_gamma_returns_rewards() {
        let r = discounted_returns(&[0.3, -0.7, 2.0], 0.0, 5.0);
        assert_eq!(r, vec![0.3, -0.7, 2.0]);
    }

    #[test]
    fn returns_match_brute_force_sum() {
        let rewards: Vec<f64> = (0..10).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let gamma = 0.95;
        let bootstrap = 1.7;
        let rets = discounted_returns(&rewards, gamma, bootstrap);
        for t in 0..rewards.len() {
            let mut expected = 0.0;
            for (tau, &r) in rewards[t..].iter().enumerate() {
                expected += gamma.powi(tau as i32) * r;
            }
            expected += gamma.powi((rewards.len() - t) as i32) * bootstrap;
            assert_relative_eq!(rets[t], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn advantage_normalization_cases() {
        // A single residual normalizes to exactly 1.
        assert_eq!(advantages(&[5.0], &[3.0]), vec![1.0]);
        // Residual-free batch maps to zeros.
        assert_eq!(advantages(&[2.0, 2.0], &[2.0, 2.0]), vec![0.0, 0.0]);
        // Raw residuals {2, -4} scale by 1/4.
        assert_eq!(advantages(&[3.0, 0.0], &[1.0, 4.0]), vec![0.5, -1.0]);
    }

    #[test]
    fn advantages_bounded_in_unit_interval() {
        let returns: Vec<f64> = (0..50).map(|i| (i as f64 * 1.3).sin() * 9.0).collect();
        let values: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).cos() * 4.0).collect();
        for a in advantages(&returns, &values) {
            assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn buffer_pools_across_agents_and_clears() {
        let mut buf = TrajectoryBuffer::new(2);
        let obs = Array1::from(vec![0.0]);
        let action = SampledAction {
            pair_idx: 0,
            u_idx: 0,
            z_p: 0.0,
            z_o1: 0.0,
            log_prob: -1.0,
        };
        for agent in 0..2 {
            for t in 0..3 {
                buf.push(
                    agent,
                    Transition {
                        obs: obs.clone(),
                        action,
                        reward: (agent + t) as f64,
                        value_old: 0.5,
                    },
                );
            }
        }
        assert_eq!(buf.len(), 6);
        let samples = buf.drain_round(&[0.0, 0.0], 0.9);
        assert_eq!(samples.len(), 6);
        assert!(buf.is_empty());
        // Agent 0 head-of-segment return: 0 + 0.9*(1 + 0.9*2).
        assert_relative_eq!(samples[0].ret, 0.9 + 0.81 * 2.0, max_relative = 1e-12);
    }
}
