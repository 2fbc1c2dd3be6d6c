//! Multi-agent decision process over the radio environment: per-agent
//! observations, joint action application, the shared reward, and constraint
//! accounting.
//!
//! One environment step is one channel update. The step applies the joint
//! allocation, detects resource-block collisions, computes interference and
//! SINR, scores every link with the semantic metrics (or the bit-based
//! comparator), forms the shared reward, then advances mobility and redraws
//! the channel for the next observation. The environment is a single-writer
//! state machine; independent instances with distinct seeds can run in
//! parallel for evaluation sweeps.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::coexist::{split_slot, st_wifi, DutyCycle, WifiGroup};
use crate::netsim::{
    self, build_topology, realize_channel, step_mobility, Allocation, ChannelRealization, Point,
    Tier, Topology, TopologyConfig, VehicleState,
};
use crate::rng::{stream_rng, Stream};
use crate::semantics::{hsse, hsse_bit, st_vehicle, SemanticSource, XiModel};

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("malformed action for agent {agent}: {reason}")]
    BadAction { agent: usize, reason: String },
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error(transparent)]
    Netsim(#[from] netsim::NetsimError),
}

/// How links are scored: with the semantic metrics, or with the conventional
/// bit-rate comparator (same action space, different scoring).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    #[default]
    Semantic,
    BitBased,
}

/// Everything the environment needs, resolved to plain numbers.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub topology: TopologyConfig,
    pub n_vehicles: usize,
    pub speed_mps: f64,
    /// Channel update period; one step advances this much time.
    pub step_dt_s: f64,
    pub noise_figure_db: f64,
    pub p_max_w: f64,
    pub xi_model: XiModel,
    pub xi_threshold: f64,
    pub i_over_l: f64,
    pub u_max: u32,
    pub wifi_rate_bits_s: f64,
    pub o_total_s: f64,
    pub o1_min: f64,
    pub o1_max: f64,
    /// Per-vehicle semantic-throughput floor; auto-calibrated when absent.
    pub st_vehicle_floor: Option<f64>,
    /// Per-group WiFi throughput floor; auto-calibrated when absent.
    pub st_wifi_floor: Option<f64>,
    /// Penalty weight charged per colliding agent.
    pub collision_penalty: f64,
    /// Episode length in steps.
    pub t_max: usize,
    pub scoring: ScoringMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            n_vehicles: 5,
            speed_mps: 10.0,
            step_dt_s: 0.005,
            noise_figure_db: 9.0,
            p_max_w: 0.199_526_231_5, // 23 dBm
            xi_model: XiModel::default(),
            xi_threshold: 0.9,
            i_over_l: 1.0,
            u_max: 20,
            wifi_rate_bits_s: 143.0e6,
            o_total_s: 1.0,
            o1_min: 0.05,
            o1_max: 0.95,
            st_vehicle_floor: None,
            st_wifi_floor: None,
            collision_penalty: 1.0,
            t_max: 100,
            scoring: ScoringMode::Semantic,
        }
    }
}

/// One agent's decision for a step: attachment pair, transmit power,
/// duty-cycle fraction, and semantic symbols per word. The pair choice is
/// one-hot by construction, so one agent can never occupy two RBs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub pair: usize,
    pub power_w: f64,
    pub o1_fraction: f64,
    pub u: u32,
}

/// Fixed affine maps that bring every observation entry to O(1). The maps
/// are invertible on their clamp ranges, so raw values can be recovered.
#[derive(Debug, Clone, Copy)]
pub struct ObsNormalizer {
    /// Analytic HSSE maximum, `(I/L) * 1 / 1`.
    pub hsse_max: f64,
    /// WiFi HSSE maximum, `R_w / W` (u = 1).
    pub wifi_hsse_max: f64,
}

impl ObsNormalizer {
    pub const GAIN_DB_CENTER: f64 = -110.0;
    pub const GAIN_DB_SCALE: f64 = 25.0;
    pub const SINR_DB_LIMIT: f64 = 60.0;
    pub const INTERF_DBW_CENTER: f64 = -150.0;
    pub const INTERF_DBW_SCALE: f64 = 50.0;
    pub const INTERF_DBW_FLOOR: f64 = -200.0;
    pub const INTERF_DBW_CEIL: f64 = -50.0;

    pub fn normalize_gain(&self, gain_linear: f64) -> f64 {
        let db = 10.0 * gain_linear.max(1e-30).log10();
        (db - Self::GAIN_DB_CENTER) / Self::GAIN_DB_SCALE
    }

    pub fn denormalize_gain_db(&self, norm: f64) -> f64 {
        norm * Self::GAIN_DB_SCALE + Self::GAIN_DB_CENTER
    }

    pub fn normalize_sinr(&self, sinr_linear: f64) -> f64 {
        let db = if sinr_linear <= 0.0 {
            -Self::SINR_DB_LIMIT
        } else {
            (10.0 * sinr_linear.log10()).clamp(-Self::SINR_DB_LIMIT, Self::SINR_DB_LIMIT)
        };
        db / Self::SINR_DB_LIMIT
    }

    pub fn denormalize_sinr_db(&self, norm: f64) -> f64 {
        norm * Self::SINR_DB_LIMIT
    }

    pub fn normalize_hsse(&self, hsse: f64) -> f64 {
        hsse / self.hsse_max
    }

    pub fn denormalize_hsse(&self, norm: f64) -> f64 {
        norm * self.hsse_max
    }

    pub fn normalize_wifi_hsse(&self, hsse_w: f64) -> f64 {
        hsse_w / self.wifi_hsse_max
    }

    pub fn normalize_interference(&self, d_w: f64) -> f64 {
        let db =
            (10.0 * d_w.max(1e-300).log10()).clamp(Self::INTERF_DBW_FLOOR, Self::INTERF_DBW_CEIL);
        (db - Self::INTERF_DBW_CENTER) / Self::INTERF_DBW_SCALE
    }

    pub fn denormalize_interference_dbw(&self, norm: f64) -> f64 {
        norm * Self::INTERF_DBW_SCALE + Self::INTERF_DBW_CENTER
    }
}

/// One agent's normalized state: channel gain, SINR, own delivered HSSE, the
/// previous step's WiFi HSSE, and the previous step's interference, all for
/// the agent's current attachment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub gain: f64,
    pub sinr: f64,
    pub hsse_vehicle: f64,
    pub hsse_wifi_prev: f64,
    pub interference_prev: f64,
}

impl Observation {
    pub const DIM: usize = 5;

    pub fn as_array(&self) -> [f64; Self::DIM] {
        [
            self.gain,
            self.sinr,
            self.hsse_vehicle,
            self.hsse_wifi_prev,
            self.interference_prev,
        ]
    }
}

/// The shared reward and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    /// Sum of delivered vehicle semantic throughput, suts.
    pub st_sum_vehicles: f64,
    /// Sum of WiFi semantic throughput across groups, suts.
    pub st_sum_wifi: f64,
    /// WiFi floor gate: true when aggregate WiFi throughput meets its floor.
    pub wifi_gate: bool,
    /// Number of agents whose (bs, rb) choice collided with another agent.
    pub collision_penalty_count: usize,
    pub reward: f64,
}

/// `reward = st_sum / (N * floor) * gate - penalty * collisions`, shared by
/// every agent.
pub fn shared_reward(
    st_sum_vehicles: f64,
    st_vehicle_floor: f64,
    n_vehicles: usize,
    wifi_gate: bool,
    collision_count: usize,
    collision_penalty: f64,
) -> f64 {
    let gate = if wifi_gate { 1.0 } else { 0.0 };
    st_sum_vehicles / (n_vehicles as f64 * st_vehicle_floor) * gate
        - collision_penalty * collision_count as f64
}

/// Per-step satisfaction flags for the five problem constraints: vehicle
/// throughput floor, WiFi throughput floor, exclusive RB use, similarity
/// threshold, and the symbol-count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepConstraints {
    pub vehicle_floor: bool,
    pub wifi_floor: bool,
    pub exclusive_rb: bool,
    pub similarity: bool,
    pub symbol_range: bool,
}

/// Per-episode satisfaction rates aggregated from the step flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub steps: Vec<StepConstraints>,
    pub vehicle_floor_rate: f64,
    pub wifi_floor_rate: f64,
    pub exclusive_rb_rate: f64,
    pub similarity_rate: f64,
    pub symbol_range_rate: f64,
}

/// Aggregates an episode trace of step flags into satisfaction rates.
pub fn constraint_report(steps: &[StepConstraints]) -> ConstraintReport {
    let n = steps.len().max(1) as f64;
    let rate = |f: fn(&StepConstraints) -> bool| steps.iter().filter(|s| f(s)).count() as f64 / n;
    ConstraintReport {
        vehicle_floor_rate: rate(|s| s.vehicle_floor),
        wifi_floor_rate: rate(|s| s.wifi_floor),
        exclusive_rb_rate: rate(|s| s.exclusive_rb),
        similarity_rate: rate(|s| s.similarity),
        symbol_range_rate: rate(|s| s.symbol_range),
        steps: steps.to_vec(),
    }
}

/// Per-agent outcome of one step, for the learner and for metrics export.
#[derive(Debug, Clone)]
pub struct AgentStepMetrics {
    pub pair: usize,
    pub bs: usize,
    pub rb: usize,
    pub licensed: bool,
    pub power_w: f64,
    /// Vehicle share of the unlicensed slot, seconds (0 on licensed band).
    pub o1_s: f64,
    /// WiFi share, seconds; `o_total - o1_s` exactly.
    pub o2_s: f64,
    pub u: u32,
    pub sinr_linear: f64,
    pub sinr_db: f64,
    /// Cross-tier interference power seen at the serving bs, watts.
    pub interference_w: f64,
    pub xi: f64,
    /// Delivered spectral efficiency: 0 on collision (and, in semantic mode,
    /// when similarity misses the threshold).
    pub hsse: f64,
    /// Delivered semantic throughput over the slot, suts.
    pub st: f64,
    pub collided: bool,
    /// This group's WiFi throughput over the slot, suts.
    pub st_wifi: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    /// One (identical) entry per agent; the reward is shared.
    pub rewards: Vec<f64>,
    pub breakdown: RewardBreakdown,
    pub constraints: StepConstraints,
    pub agents: Vec<AgentStepMetrics>,
    pub done: bool,
}

/// Static scoring of one joint allocation against the current channel:
/// everything a step computes before the world advances. Also the oracle's
/// objective evaluator, so search and environment share one scoring path.
#[derive(Debug, Clone)]
pub struct JointScore {
    pub agents: Vec<AgentStepMetrics>,
    pub st_sum_vehicles: f64,
    pub st_sum_wifi: f64,
    pub all_similar: bool,
    pub collision_count: usize,
}

impl JointScore {
    /// Mean delivered spectral efficiency across agents.
    pub fn mean_hsse(&self) -> f64 {
        self.agents.iter().map(|a| a.hsse).sum::<f64>() / self.agents.len().max(1) as f64
    }
}

/// The environment: static topology plus the mutable world state.
pub struct Env {
    config: EnvConfig,
    topology: Topology,
    noise_power_w: f64,
    st_vehicle_floor: f64,
    st_wifi_floor: f64,
    wifi_groups: Vec<WifiGroup>,
    normalizer: ObsNormalizer,
    vehicles: Vec<VehicleState>,
    realization: ChannelRealization,
    allocs: Vec<Allocation>,
    current_u: Vec<u32>,
    current_o1: Vec<f64>,
    prev_wifi_hsse: Vec<f64>,
    prev_interference_w: Vec<f64>,
    step_index: usize,
    mobility_rng: ChaCha12Rng,
    fading_rng: ChaCha12Rng,
}

impl Env {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, MdpError> {
        assert!(config.n_vehicles >= 1);
        assert!(config.u_max >= 1);
        let mut topo_rng = stream_rng(seed, Stream::Topology);
        let topology = build_topology(&config.topology, &mut topo_rng)?;
        let noise_power_w =
            netsim::noise_power_w(config.topology.rb_bandwidth_hz, config.noise_figure_db);
        let (auto_floor_v, auto_floor_w) = calibrate_floors(&topology, &config, noise_power_w);
        let st_vehicle_floor = config.st_vehicle_floor.unwrap_or(auto_floor_v);
        let st_wifi_floor = config.st_wifi_floor.unwrap_or(auto_floor_w);
        let wifi_groups = (0..config.n_vehicles)
            .map(|n| WifiGroup::new(config.wifi_rate_bits_s, n, st_wifi_floor))
            .collect();
        let normalizer = ObsNormalizer {
            hsse_max: config.i_over_l,
            wifi_hsse_max: config.wifi_rate_bits_s / config.topology.rb_bandwidth_hz,
        };
        let mut env = Self {
            topology,
            noise_power_w,
            st_vehicle_floor,
            st_wifi_floor,
            wifi_groups,
            normalizer,
            vehicles: Vec::new(),
            realization: ChannelRealization {
                path_loss_db: ndarray::Array2::zeros((0, 0)),
                fading: ndarray::Array2::zeros((0, 0)),
                noise_power_w,
            },
            allocs: Vec::new(),
            current_u: Vec::new(),
            current_o1: Vec::new(),
            prev_wifi_hsse: Vec::new(),
            prev_interference_w: Vec::new(),
            step_index: 0,
            mobility_rng: stream_rng(seed, Stream::Mobility),
            fading_rng: stream_rng(seed, Stream::Fading),
            config,
        };
        env.fresh_episode();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.realization
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocs
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn normalizer(&self) -> &ObsNormalizer {
        &self.normalizer
    }

    pub fn st_vehicle_floor(&self) -> f64 {
        self.st_vehicle_floor
    }

    pub fn st_wifi_floor(&self) -> f64 {
        self.st_wifi_floor
    }

    pub fn observation_dim(&self) -> usize {
        Observation::DIM
    }

    /// Number of attachment pairs, the size of the categorical action head.
    pub fn pair_count(&self) -> usize {
        self.topology.pair_count()
    }

    /// Starts a new episode from the current stream state: fresh uniform
    /// vehicle placement and headings, fresh channel, previous-step
    /// quantities zeroed, and a collision-free round-robin initial
    /// allocation at full power.
    pub fn reset(&mut self) -> Vec<Observation> {
        self.fresh_episode();
        self.build_observations()
    }

    /// Re-seeds the environment streams, then resets; two calls with the
    /// same seed produce identical initial observations.
    pub fn reset_with_seed(&mut self, seed: u64) -> Vec<Observation> {
        self.mobility_rng = stream_rng(seed, Stream::Mobility);
        self.fading_rng = stream_rng(seed, Stream::Fading);
        self.reset()
    }

    fn fresh_episode(&mut self) {
        let n = self.config.n_vehicles;
        let side = self.config.topology.area_side_m;
        self.vehicles = (0..n)
            .map(|_| {
                let position = Point::new(
                    self.mobility_rng.gen_range(0.0..side),
                    self.mobility_rng.gen_range(0.0..side),
                );
                let angle = self.mobility_rng.gen_range(0.0..std::f64::consts::TAU);
                VehicleState {
                    position,
                    heading: Point::new(angle.cos(), angle.sin()),
                    speed_mps: self.config.speed_mps,
                }
            })
            .collect();
        self.realization = realize_channel(
            &self.vehicles,
            &self.topology,
            self.noise_power_w,
            &mut self.fading_rng,
        );
        let pair_count = self.topology.pair_count();
        self.allocs = (0..n)
            .map(|i| Allocation {
                pair: i % pair_count,
                power_w: self.config.p_max_w,
            })
            .collect();
        let u_init = (self.config.u_max / 2).max(1);
        self.current_u = vec![u_init; n];
        self.current_o1 = vec![0.5f64.clamp(self.config.o1_min, self.config.o1_max); n];
        self.prev_wifi_hsse = vec![0.0; n];
        self.prev_interference_w = vec![0.0; n];
        self.step_index = 0;
    }

    fn validate_actions(&self, actions: &[Action]) -> Result<(), MdpError> {
        if actions.len() != self.config.n_vehicles {
            return Err(MdpError::WrongActionCount {
                expected: self.config.n_vehicles,
                got: actions.len(),
            });
        }
        for (agent, a) in actions.iter().enumerate() {
            if a.pair >= self.topology.pair_count() {
                return Err(MdpError::BadAction {
                    agent,
                    reason: format!("pair {} out of range", a.pair),
                });
            }
            if !(a.power_w > 0.0 && a.power_w <= self.config.p_max_w * (1.0 + 1e-12)) {
                return Err(MdpError::BadAction {
                    agent,
                    reason: format!("power {} outside (0, {}]", a.power_w, self.config.p_max_w),
                });
            }
            if !a.o1_fraction.is_finite() {
                return Err(MdpError::BadAction {
                    agent,
                    reason: "non-finite duty-cycle fraction".into(),
                });
            }
            if a.u == 0 || a.u > self.config.u_max {
                return Err(MdpError::BadAction {
                    agent,
                    reason: format!("u {} outside 1..={}", a.u, self.config.u_max),
                });
            }
        }
        Ok(())
    }

    /// Advances the world by one step under the joint action.
    ///
    /// Order of effects: apply allocations, detect same-pair collisions,
    /// compute interference and SINR, score links and form the shared
    /// reward, then advance mobility, redraw the channel, and emit the next
    /// observations.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, MdpError> {
        self.validate_actions(actions)?;
        let n = self.config.n_vehicles;

        for (i, a) in actions.iter().enumerate() {
            self.allocs[i] = Allocation {
                pair: a.pair,
                power_w: a.power_w,
            };
            self.current_u[i] = a.u;
            self.current_o1[i] = a.o1_fraction;
        }

        let JointScore {
            agents,
            st_sum_vehicles,
            st_sum_wifi,
            all_similar,
            collision_count,
        } = self.score(&self.allocs, &self.current_u, &self.current_o1);

        let wifi_floor_total = self.st_wifi_floor * n as f64;
        let wifi_gate = st_sum_wifi >= wifi_floor_total;
        let reward = shared_reward(
            st_sum_vehicles,
            self.st_vehicle_floor,
            n,
            wifi_gate,
            collision_count,
            self.config.collision_penalty,
        );
        let breakdown = RewardBreakdown {
            st_sum_vehicles,
            st_sum_wifi,
            wifi_gate,
            collision_penalty_count: collision_count,
            reward,
        };
        let constraints = StepConstraints {
            vehicle_floor: st_sum_vehicles >= self.st_vehicle_floor * n as f64,
            wifi_floor: wifi_gate,
            exclusive_rb: collision_count == 0,
            similarity: all_similar,
            symbol_range: true,
        };

        for (i, a) in agents.iter().enumerate() {
            self.prev_interference_w[i] = a.interference_w;
            self.prev_wifi_hsse[i] =
                self.wifi_groups[i].rate_bits_s / a.u as f64 / self.config.topology.rb_bandwidth_hz;
        }
        self.vehicles = step_mobility(&self.vehicles, self.config.step_dt_s, &self.topology);
        self.realization = realize_channel(
            &self.vehicles,
            &self.topology,
            self.noise_power_w,
            &mut self.fading_rng,
        );
        self.step_index += 1;

        Ok(StepOutcome {
            observations: self.build_observations(),
            rewards: vec![reward; n],
            breakdown,
            constraints,
            agents,
            done: self.step_index >= self.config.t_max,
        })
    }

    /// Scores a joint action against the current channel without advancing
    /// the world. This is the exact computation a step performs before
    /// mobility and the channel redraw; the oracle searches over it.
    pub fn score_actions(&self, actions: &[Action]) -> Result<JointScore, MdpError> {
        self.validate_actions(actions)?;
        let allocs: Vec<Allocation> = actions
            .iter()
            .map(|a| Allocation {
                pair: a.pair,
                power_w: a.power_w,
            })
            .collect();
        let us: Vec<u32> = actions.iter().map(|a| a.u).collect();
        let o1s: Vec<f64> = actions.iter().map(|a| a.o1_fraction).collect();
        Ok(self.score(&allocs, &us, &o1s))
    }

    fn score(&self, allocs: &[Allocation], us: &[u32], o1s: &[f64]) -> JointScore {
        let cfg = &self.config;
        let collided = mark_collisions(allocs);
        let mut agents = Vec::with_capacity(allocs.len());
        let mut st_sum_vehicles = 0.0;
        let mut st_sum_wifi = 0.0;
        let mut all_similar = true;
        for i in 0..allocs.len() {
            let pair = allocs[i].pair;
            let bs = self.topology.pair_bs(pair);
            let licensed = self.topology.tier(bs) == Tier::Macro;
            let d_w = netsim::interference(allocs, &self.realization, &self.topology, i, pair);
            let sinr_linear = netsim::sinr(allocs, &self.realization, &self.topology, i, pair);
            let sinr_db = if sinr_linear > 0.0 {
                10.0 * sinr_linear.log10()
            } else {
                f64::NEG_INFINITY
            };
            let u = us[i];
            let xi = cfg.xi_model.xi_linear(u as f64, sinr_linear);
            if xi < cfg.xi_threshold {
                all_similar = false;
            }
            let src = SemanticSource {
                i_over_l: cfg.i_over_l,
                u,
            };
            let dc = DutyCycle::new(cfg.o_total_s, o1s[i], cfg.o1_min, cfg.o1_max);
            let split = split_slot(&dc);
            let (o1_s, o2_s) = if licensed {
                (0.0, cfg.o_total_s)
            } else {
                (split.o1_s, split.o2_s)
            };
            let vehicle_fraction = if licensed {
                1.0
            } else {
                split.o1_s / cfg.o_total_s
            };

            let (hsse_raw, delivered) = match cfg.scoring {
                ScoringMode::Semantic => (hsse(&src, xi), !collided[i] && xi >= cfg.xi_threshold),
                ScoringMode::BitBased => {
                    (hsse_bit(sinr_linear, u as f64, cfg.i_over_l), !collided[i])
                }
            };
            let hsse_eff = if delivered { hsse_raw } else { 0.0 };
            let hsr_eff = hsse_eff * cfg.topology.rb_bandwidth_hz;
            let st = st_vehicle(hsr_eff, vehicle_fraction, cfg.o_total_s);
            let stw = st_wifi(&self.wifi_groups[i], u, o2_s);

            st_sum_vehicles += st;
            st_sum_wifi += stw;
            agents.push(AgentStepMetrics {
                pair,
                bs,
                rb: self.topology.pair_rb(pair),
                licensed,
                power_w: allocs[i].power_w,
                o1_s,
                o2_s,
                u,
                sinr_linear,
                sinr_db,
                interference_w: d_w,
                xi,
                hsse: hsse_eff,
                st,
                collided: collided[i],
                st_wifi: stw,
            });
        }
        let collision_count = collided.iter().filter(|&&c| c).count();
        JointScore {
            agents,
            st_sum_vehicles,
            st_sum_wifi,
            all_similar,
            collision_count,
        }
    }

    /// Whether a scored joint allocation satisfies the problem constraints:
    /// both throughput floors, exclusive RB use, and (in semantic mode) the
    /// similarity threshold for every link.
    pub fn is_feasible(&self, score: &JointScore) -> bool {
        let n = self.config.n_vehicles as f64;
        score.collision_count == 0
            && score.st_sum_vehicles >= self.st_vehicle_floor * n
            && score.st_sum_wifi >= self.st_wifi_floor * n
            && (self.config.scoring == ScoringMode::BitBased || score.all_similar)
    }

    /// Builds agent `n`'s observation from the current world state and the
    /// carried-over allocation.
    pub fn build_observation(&self, n: usize) -> Observation {
        let cfg = &self.config;
        let pair = self.allocs[n].pair;
        let collided = mark_collisions(&self.allocs);
        let gain = self.realization.gain(&self.topology, n, pair);
        let sinr_linear = netsim::sinr(&self.allocs, &self.realization, &self.topology, n, pair);
        let u = self.current_u[n];
        let xi = cfg.xi_model.xi_linear(u as f64, sinr_linear);
        let src = SemanticSource {
            i_over_l: cfg.i_over_l,
            u,
        };
        let (hsse_raw, delivered) = match cfg.scoring {
            ScoringMode::Semantic => (hsse(&src, xi), !collided[n] && xi >= cfg.xi_threshold),
            ScoringMode::BitBased => (hsse_bit(sinr_linear, u as f64, cfg.i_over_l), !collided[n]),
        };
        let hsse_eff = if delivered { hsse_raw } else { 0.0 };
        Observation {
            gain: self.normalizer.normalize_gain(gain),
            sinr: self.normalizer.normalize_sinr(sinr_linear),
            hsse_vehicle: self.normalizer.normalize_hsse(hsse_eff),
            hsse_wifi_prev: self.normalizer.normalize_wifi_hsse(self.prev_wifi_hsse[n]),
            interference_prev: self
                .normalizer
                .normalize_interference(self.prev_interference_w[n]),
        }
    }

    fn build_observations(&self) -> Vec<Observation> {
        (0..self.config.n_vehicles)
            .map(|n| self.build_observation(n))
            .collect()
    }
}

/// Flags every agent whose (bs, rb) pair is also chosen by another agent.
fn mark_collisions(allocs: &[Allocation]) -> Vec<bool> {
    let mut collided = vec![false; allocs.len()];
    for i in 0..allocs.len() {
        for j in (i + 1)..allocs.len() {
            if allocs[i].pair == allocs[j].pair {
                collided[i] = true;
                collided[j] = true;
            }
        }
    }
    collided
}

/// Deterministic floor calibration: the vehicle floor is 10% of the best
/// full-slot semantic throughput at the median no-interference SINR of the
/// scenario geometry; the WiFi floor is 10% of one group's full-slot
/// throughput at u = 1. Uses a fixed internal stream so floors depend only
/// on the config, not the run seed.
fn calibrate_floors(topology: &Topology, config: &EnvConfig, noise_power_w: f64) -> (f64, f64) {
    let mut rng = stream_rng(0xCA11_B7A7, Stream::Calibration);
    let side = config.topology.area_side_m;
    let samples = 512;
    let mut sinr_db: Vec<f64> = (0..samples)
        .map(|_| {
            let pos = Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
            let best_bs = (0..topology.bs_count())
                .min_by(|&a, &b| {
                    topology
                        .distance_3d_m(&pos, a)
                        .partial_cmp(&topology.distance_3d_m(&pos, b))
                        .unwrap()
                })
                .unwrap();
            let d_km = topology.distance_3d_m(&pos, best_bs) / 1000.0;
            let gain = 10f64.powf(-netsim::path_loss_db(d_km) / 10.0);
            let sinr = config.p_max_w * gain / noise_power_w;
            10.0 * sinr.log10()
        })
        .collect();
    sinr_db.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_db = sinr_db[samples / 2];

    let w = config.topology.rb_bandwidth_hz;
    let mut best_feasible: Option<f64> = None;
    let mut best_any = 0.0f64;
    for u in 1..=config.u_max {
        let xi = config.xi_model.xi(u as f64, median_db);
        let st = w * config.i_over_l * xi / u as f64 * config.o_total_s;
        best_any = best_any.max(st);
        if xi >= config.xi_threshold {
            best_feasible = Some(best_feasible.map_or(st, |b: f64| b.max(st)));
        }
    }
    let st_max = best_feasible.unwrap_or(best_any);
    let floor_v = 0.1 * st_max;
    let floor_w = 0.1 * config.wifi_rate_bits_s * config.o_total_s;
    (floor_v, floor_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn env(seed: u64) -> Env {
        Env::new(EnvConfig::default(), seed).unwrap()
    }

    fn uniform_actions(env: &Env) -> Vec<Action> {
        let pairs = env.pair_count();
        (0..env.config().n_vehicles)
            .map(|i| Action {
                pair: (i * 3) % pairs,
                power_w: 0.1,
                o1_fraction: 0.4,
                u: 8,
            })
            .collect()
    }

    #[test]
    fn reset_is_seed_deterministic() {
        let mut a = env(9);
        let mut b = env(9);
        assert_eq!(a.reset_with_seed(5), b.reset_with_seed(5));
    }

    #[test]
    fn reset_emits_one_observation_per_agent_with_zeroed_prev_fields() {
        let mut e = env(1);
        let obs = e.reset_with_seed(3);
        assert_eq!(obs.len(), 5);
        for o in &obs {
            assert_eq!(o.as_array().len(), Observation::DIM);
            assert_eq!(o.hsse_wifi_prev, 0.0);
            // Zero interference normalizes to the floor of its clamp range.
            assert_eq!(
                o.interference_prev,
                e.normalizer().normalize_interference(0.0)
            );
            assert!(o.as_array().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn shared_reward_unit_cases() {
        // Floors met exactly with no collisions: reward 1.
        assert_relative_eq!(shared_reward(50.0, 10.0, 5, true, 0, 1.0), 1.0);
        // Gate off: only the collision penalty remains.
        assert_eq!(shared_reward(50.0, 10.0, 5, false, 0, 1.0), 0.0);
        assert_eq!(shared_reward(50.0, 10.0, 5, false, 2, 1.0), -2.0);
    }

    #[test]
    fn reward_is_shared_and_matches_breakdown() {
        let mut e = env(4);
        e.reset_with_seed(4);
        let actions = uniform_actions(&e);
        let out = e.step(&actions).unwrap();
        for r in &out.rewards {
            assert_eq!(*r, out.rewards[0]);
        }
        // Recompute the reward from the breakdown's own fields.
        let b = &out.breakdown;
        let expected = shared_reward(
            b.st_sum_vehicles,
            e.st_vehicle_floor(),
            5,
            b.wifi_gate,
            b.collision_penalty_count,
            1.0,
        );
        assert_relative_eq!(b.reward, expected, max_relative = 1e-12);
    }

    #[test]
    fn collisions_zero_both_links_and_charge_each_agent() {
        let mut e = env(6);
        e.reset_with_seed(6);
        let mut actions = uniform_actions(&e);
        actions[1].pair = actions[0].pair; // force a collision
        let out = e.step(&actions).unwrap();
        assert_eq!(out.breakdown.collision_penalty_count, 2);
        assert!(out.agents[0].collided && out.agents[1].collided);
        assert_eq!(out.agents[0].st, 0.0);
        assert_eq!(out.agents[1].st, 0.0);
        assert_eq!(out.agents[0].hsse, 0.0);
        // Brute-force recompute of the reward from per-agent parts.
        let st_sum: f64 = out.agents.iter().map(|a| a.st).sum();
        let stw_sum: f64 = out.agents.iter().map(|a| a.st_wifi).sum();
        let gate = stw_sum >= e.st_wifi_floor() * 5.0;
        let expected = shared_reward(st_sum, e.st_vehicle_floor(), 5, gate, 2, 1.0);
        assert_relative_eq!(out.breakdown.reward, expected, max_relative = 1e-12);
    }

    #[test]
    fn observation_sinr_matches_netsim() {
        let mut e = env(8);
        e.reset_with_seed(8);
        let actions = uniform_actions(&e);
        e.step(&actions).unwrap();
        for n in 0..5 {
            let obs = e.build_observation(n);
            let expected = netsim::sinr(
                e.allocations(),
                e.realization(),
                e.topology(),
                n,
                e.allocations()[n].pair,
            );
            let got_db = e.normalizer().denormalize_sinr_db(obs.sinr);
            assert_relative_eq!(got_db, 10.0 * expected.log10(), max_relative = 1e-9);
        }
    }

    #[test]
    fn licensed_band_gets_full_slot_and_wifi_keeps_airtime() {
        let mut e = env(2);
        e.reset_with_seed(2);
        let mut actions = uniform_actions(&e);
        // Pair 0 belongs to the macro bs; pair (1, 1) to a micro bs.
        actions[0].pair = 0;
        actions[1].pair = e.topology().pair_index(1, 1);
        let out = e.step(&actions).unwrap();
        let a0 = &out.agents[0];
        assert!(a0.licensed);
        assert_eq!(a0.o1_s, 0.0);
        assert_eq!(a0.o2_s, 1.0);
        let a1 = &out.agents[1];
        assert!(!a1.licensed);
        assert_relative_eq!(a1.o1_s, 0.4, max_relative = 1e-12);
        assert_eq!(a1.o2_s, 1.0 - a1.o1_s);
    }

    #[test]
    fn episode_runs_exactly_t_max_steps() {
        let config = EnvConfig {
            t_max: 7,
            ..EnvConfig::default()
        };
        let mut e = Env::new(config, 3).unwrap();
        e.reset_with_seed(3);
        let actions = uniform_actions(&e);
        for t in 0..7 {
            let out = e.step(&actions).unwrap();
            assert_eq!(out.done, t == 6);
        }
    }

    #[test]
    fn malformed_actions_are_hard_errors() {
        let mut e = env(1);
        e.reset_with_seed(1);
        let mut actions = uniform_actions(&e);
        actions[0].u = 0;
        assert!(matches!(
            e.step(&actions),
            Err(MdpError::BadAction { agent: 0, .. })
        ));
        let mut actions = uniform_actions(&e);
        actions[2].pair = 10_000;
        assert!(e.step(&actions).is_err());
        let short = uniform_actions(&e)[..3].to_vec();
        assert!(matches!(
            e.step(&short),
            Err(MdpError::WrongActionCount { .. })
        ));
    }

    #[test]
    fn normalization_round_trips() {
        let norm = ObsNormalizer {
            hsse_max: 1.0,
            wifi_hsse_max: 143.0e6 / 15_000.0,
        };
        for &db in &[-135.0, -110.0, -80.0] {
            let lin = 10f64.powf(db / 10.0);
            assert_relative_eq!(
                norm.denormalize_gain_db(norm.normalize_gain(lin)),
                db,
                max_relative = 1e-9
            );
        }
        for &db in &[-40.0, 0.0, 38.5] {
            let lin = 10f64.powf(db / 10.0);
            assert_relative_eq!(
                norm.denormalize_sinr_db(norm.normalize_sinr(lin)),
                db,
                max_relative = 1e-9
            );
        }
        for &h in &[0.0, 0.3, 1.0] {
            assert_relative_eq!(
                norm.denormalize_hsse(norm.normalize_hsse(h)),
                h,
                max_relative = 1e-12
            );
        }
        for &dbw in &[-180.0, -150.0, -60.0] {
            let w = 10f64.powf(dbw / 10.0);
            assert_relative_eq!(
                norm.denormalize_interference_dbw(norm.normalize_interference(w)),
                dbw,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn constraint_report_rates() {
        let sat = StepConstraints {
            vehicle_floor: true,
            wifi_floor: true,
            exclusive_rb: true,
            similarity: true,
            symbol_range: true,
        };
        let unsat = StepConstraints {
            exclusive_rb: false,
            ..sat
        };
        let report = constraint_report(&[sat, unsat, sat, sat]);
        assert_eq!(report.exclusive_rb_rate, 0.75);
        assert_eq!(report.symbol_range_rate, 1.0);
    }

    #[test]
    fn reward_is_bounded_below_by_full_collision_penalty() {
        let mut e = env(12);
        e.reset_with_seed(12);
        let bound = -1.0 * 5.0; // penalty * n_vehicles
        // Worst case: everyone on one pair, plus assorted random steps.
        let all_same: Vec<Action> = (0..5)
            .map(|_| Action {
                pair: 3,
                power_w: 0.15,
                o1_fraction: 0.5,
                u: 9,
            })
            .collect();
        let out = e.step(&all_same).unwrap();
        assert_eq!(out.breakdown.collision_penalty_count, 5);
        assert!(out.breakdown.reward >= bound);
        let mut rng = stream_rng(12, Stream::Baseline);
        for _ in 0..200 {
            let actions: Vec<Action> = (0..5)
                .map(|_| Action {
                    pair: rng.gen_range(0..e.pair_count()),
                    power_w: rng.gen_range(1e-4..0.199),
                    o1_fraction: rng.gen_range(0.05..0.95),
                    u: rng.gen_range(1..=20),
                })
                .collect();
            let out = e.step(&actions).unwrap();
            assert!(out.breakdown.reward >= bound && out.breakdown.reward.is_finite());
        }
    }

    #[test]
    fn bit_based_scoring_uses_log_rate() {
        let config = EnvConfig {
            scoring: ScoringMode::BitBased,
            ..EnvConfig::default()
        };
        let mut e = Env::new(config, 5).unwrap();
        e.reset_with_seed(5);
        let actions = uniform_actions(&e);
        let out = e.step(&actions).unwrap();
        for a in &out.agents {
            if !a.collided {
                let expected = (1.0 + a.sinr_linear).log2() / a.u as f64;
                assert_relative_eq!(a.hsse, expected, max_relative = 1e-9);
            }
        }
    }
}
