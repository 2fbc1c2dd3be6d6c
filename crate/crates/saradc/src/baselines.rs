//! Non-learning reference policies and a brute-force oracle.
//!
//! The baselines are pure decision rules over the same action space the
//! learner uses; the oracle exhaustively enumerates a discretized joint
//! action grid on a frozen environment snapshot and returns the feasible
//! maximizer of single-step mean HSSE, an upper bound for any policy
//! evaluated on the same snapshot and grid.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::mdp::{Action, Env, Observation};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("unknown policy kind: {0}")]
    UnknownKind(String),
    #[error("policy kind {0:?} has no per-observation decision rule")]
    NotADecisionRule(PolicyKind),
    #[error("oracle instance too large: {points} grid points exceeds the {limit} limit")]
    InstanceTooLarge { points: u128, limit: u128 },
    #[error(transparent)]
    Mdp(#[from] crate::mdp::MdpError),
}

/// Reference decision rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Uniform over the full action space.
    RandomAll,
    /// Random allocation with the duty-cycle fraction pinned (0.5).
    FixedDc,
    /// Random allocation with the duty-cycle fraction drawn uniformly; as a
    /// standalone rule this coincides with `RandomAll`, the distinction
    /// matters when used as a duty-cycle override on a trained policy.
    RandomDc,
    /// Random allocation scored by the environment with the bit-rate
    /// comparator instead of the semantic metrics.
    BitBased,
    /// Exhaustive single-step search; driven by [`oracle_greedy`], not by a
    /// per-observation rule.
    OracleGreedy,
}

impl PolicyKind {
    pub fn parse(tag: &str) -> Result<Self, BaselineError> {
        match tag {
            "random_all" => Ok(Self::RandomAll),
            "fixed_dc" => Ok(Self::FixedDc),
            "random_dc" => Ok(Self::RandomDc),
            "bit_based" => Ok(Self::BitBased),
            "oracle_greedy" => Ok(Self::OracleGreedy),
            other => Err(BaselineError::UnknownKind(other.to_string())),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::RandomAll => "random_all",
            Self::FixedDc => "fixed_dc",
            Self::RandomDc => "random_dc",
            Self::BitBased => "bit_based",
            Self::OracleGreedy => "oracle_greedy",
        }
    }
}

/// Bounds of the action space, extracted from an environment.
#[derive(Debug, Clone, Copy)]
pub struct ActionSpace {
    pub n_pairs: usize,
    pub p_max_w: f64,
    pub o1_min: f64,
    pub o1_max: f64,
    pub u_max: u32,
}

impl ActionSpace {
    pub fn from_env(env: &Env) -> Self {
        Self {
            n_pairs: env.pair_count(),
            p_max_w: env.config().p_max_w,
            o1_min: env.config().o1_min,
            o1_max: env.config().o1_max,
            u_max: env.config().u_max,
        }
    }
}

/// One baseline decision. The observation argument is accepted for parity
/// with learned policies; the random rules do not read it.
pub fn act_baseline<R: Rng>(
    kind: PolicyKind,
    space: &ActionSpace,
    _observation: &Observation,
    rng: &mut R,
) -> Result<Action, BaselineError> {
    let mut random = |o1: Option<f64>| Action {
        pair: rng.gen_range(0..space.n_pairs),
        // (0, p_max]: map a [0, 1) draw to a strictly positive power.
        power_w: space.p_max_w * (1.0 - rng.gen_range(0.0..1.0)),
        o1_fraction: o1.unwrap_or_else(|| rng.gen_range(space.o1_min..=space.o1_max)),
        u: rng.gen_range(1..=space.u_max),
    };
    match kind {
        PolicyKind::RandomAll | PolicyKind::RandomDc | PolicyKind::BitBased => Ok(random(None)),
        PolicyKind::FixedDc => Ok(random(Some(0.5f64.clamp(space.o1_min, space.o1_max)))),
        PolicyKind::OracleGreedy => Err(BaselineError::NotADecisionRule(kind)),
    }
}

/// Discretization grids for the oracle search.
#[derive(Debug, Clone)]
pub struct OracleGrids {
    pub power_w: Vec<f64>,
    pub o1_fraction: Vec<f64>,
}

impl OracleGrids {
    /// Documented defaults: 5 log-spaced powers up to the budget (spanning
    /// 20 dB) and duty-cycle fractions {0.1, 0.3, 0.5, 0.7, 0.9}.
    pub fn defaults(p_max_w: f64) -> Self {
        let power_w = (0..5)
            .map(|i| p_max_w * 10f64.powf(-2.0 + 0.5 * i as f64))
            .collect();
        let o1_fraction = (0..5).map(|i| 0.1 + 0.2 * i as f64).collect();
        Self {
            power_w,
            o1_fraction,
        }
    }
}

/// Search outcome: the argmax joint action, its objective value, and whether
/// any grid point satisfied all constraints (when none does, the best
/// collision-free point is returned with `feasible = false`).
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub actions: Vec<Action>,
    pub mean_hsse: f64,
    pub feasible: bool,
    pub points_searched: u128,
}

/// Candidate ordering: feasibility dominates, then mean HSSE; ties resolve
/// toward the lexicographically smallest choice vector so the parallel
/// reduction is schedule-independent.
type Candidate = (bool, f64, Vec<usize>);

fn better(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.0.cmp(&b.0)
        .then(a.1.partial_cmp(&b.1).expect("no NaN objectives"))
        .then_with(|| b.2.cmp(&a.2))
}

/// Scores one collision-free grid point; used by the enumeration and by
/// tests that compare random grid draws against the oracle.
pub fn evaluate_candidate(env: &Env, actions: &[Action]) -> Result<(bool, f64), BaselineError> {
    let score = env.score_actions(actions)?;
    Ok((env.is_feasible(&score), score.mean_hsse()))
}

/// Exhaustive search over the discretized joint action space of all agents,
/// subject to exclusive RB use, the similarity threshold, and both
/// throughput floors. Instances whose joint grid exceeds `max_points` are
/// refused with the size estimate.
pub fn oracle_greedy(
    env: &Env,
    grids: &OracleGrids,
    max_points: u128,
) -> Result<OracleOutcome, BaselineError> {
    let n_agents = env.config().n_vehicles;
    let n_pairs = env.pair_count();
    let per_agent_count: u128 = (n_pairs as u128)
        * (grids.power_w.len() as u128)
        * (grids.o1_fraction.len() as u128)
        * (env.config().u_max as u128);
    let points = per_agent_count.pow(n_agents as u32);
    if points > max_points {
        return Err(BaselineError::InstanceTooLarge {
            points,
            limit: max_points,
        });
    }
    let per_agent = per_agent_count as usize;

    let decode = |choice: usize| -> Action {
        let pair = choice % n_pairs;
        let rest = choice / n_pairs;
        let p_idx = rest % grids.power_w.len();
        let rest = rest / grids.power_w.len();
        let o1_idx = rest % grids.o1_fraction.len();
        let u_idx = rest / grids.o1_fraction.len();
        Action {
            pair,
            power_w: grids.power_w[p_idx],
            o1_fraction: grids.o1_fraction[o1_idx],
            u: u_idx as u32 + 1,
        }
    };

    // Parallel over the first agent's choice, sequential recursion below;
    // the max-reduction over a total order is schedule-independent.
    let best = (0..per_agent)
        .into_par_iter()
        .map(|first| {
            let mut choices = vec![0usize; n_agents];
            choices[0] = first;
            let mut actions = vec![decode(first); n_agents];
            let mut best: Option<Candidate> = None;
            enumerate_rest(env, &decode, per_agent, &mut choices, &mut actions, 1, &mut best);
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) => x,
                (x, None) => x,
                (Some(a), Some(b)) => {
                    if better(&a, &b) == std::cmp::Ordering::Less {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            },
        );

    let (feasible, mean_hsse, choices) = best.expect("non-empty grid");
    let actions: Vec<Action> = choices.iter().map(|&c| decode(c)).collect();
    Ok(OracleOutcome {
        actions,
        mean_hsse,
        feasible,
        points_searched: points,
    })
}

fn enumerate_rest(
    env: &Env,
    decode: &impl Fn(usize) -> Action,
    per_agent: usize,
    choices: &mut Vec<usize>,
    actions: &mut Vec<Action>,
    agent: usize,
    best: &mut Option<Candidate>,
) {
    let n_agents = choices.len();
    if agent == n_agents {
        let score = env.score_actions(actions).expect("grid actions in range");
        let candidate = (env.is_feasible(&score), score.mean_hsse(), choices.clone());
        let replace = match best {
            None => true,
            Some(b) => better(b, &candidate) == std::cmp::Ordering::Less,
        };
        if replace {
            *best = Some(candidate);
        }
        return;
    }
    for c in 0..per_agent {
        let action = decode(c);
        // Duplicate pairs violate exclusive RB use; prune before recursing.
        if actions[..agent].iter().any(|a| a.pair == action.pair) {
            continue;
        }
        choices[agent] = c;
        actions[agent] = action;
        enumerate_rest(env, decode, per_agent, choices, actions, agent + 1, best);
    }
}
