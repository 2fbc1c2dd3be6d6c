//! Three-tier radio environment: static topology, vehicle mobility, channel
//! gains, cross-tier interference, and SINR.
//!
//! Tier 1 holds macro base stations on licensed spectrum, tier 2 micro base
//! stations on unlicensed spectrum, tier 3 WiFi access points. WiFi APs take
//! part in the airtime split (see [`crate::coexist`]) but never radiate into
//! the cellular interference sums, which enumerate only the two BS tiers and
//! only across tiers.
//!
//! Everything here is a pure function over immutable snapshots; the
//! environment's step driver owns all mutation.

use ndarray::Array2;
use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

/// Distances below this are clamped before the log-distance path loss is
/// evaluated, avoiding the singularity at zero range.
pub const MIN_PATH_DISTANCE_M: f64 = 10.0;

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("invalid topology config: {0}")]
    InvalidConfig(String),
}

/// 2D point or direction in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Normalizes to unit length; (1, 0) for a zero vector.
    pub fn normalized(&self) -> Point {
        let n = (self.x * self.x + self.y * self.y).sqrt();
        if n == 0.0 {
            Point::new(1.0, 0.0)
        } else {
            Point::new(self.x / n, self.y / n)
        }
    }
}

/// Base-station tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    /// Macro cell, licensed band.
    Macro,
    /// Micro cell, unlicensed band shared with WiFi.
    Micro,
}

/// Parameters needed to lay out the static scene.
#[derive(Debug, Clone)]
pub struct TopologyConfig {
    pub mab_count: usize,
    pub mib_count: usize,
    pub wifi_ap_count: usize,
    pub rb_count_mab: usize,
    pub rb_count_mib: usize,
    pub rb_bandwidth_hz: f64,
    pub bs_height_m: f64,
    pub vehicle_height_m: f64,
    pub area_side_m: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            mab_count: 1,
            mib_count: 2,
            wifi_ap_count: 2,
            rb_count_mab: 12,
            rb_count_mib: 12,
            rb_bandwidth_hz: 15_000.0,
            bs_height_m: 25.0,
            vehicle_height_m: 1.5,
            area_side_m: 1000.0,
        }
    }
}

/// Static layout of the three tiers plus RB inventories.
///
/// Base stations are indexed `0..mab+mib` with macro cells first; `(bs, rb)`
/// combinations are flattened into a single pair index so an attachment
/// choice is one categorical value.
#[derive(Debug, Clone)]
pub struct Topology {
    pub mab_positions: Vec<Point>,
    pub mib_positions: Vec<Point>,
    pub wifi_ap_positions: Vec<Point>,
    pub rb_count_mab: usize,
    pub rb_count_mib: usize,
    pub rb_bandwidth_hz: f64,
    pub bs_height_m: f64,
    pub vehicle_height_m: f64,
    pub area_side_m: f64,
    /// Flattened (bs, rb) pairs, bs-major.
    pairs: Vec<(usize, usize)>,
    /// Pair index of the first RB of each bs.
    pair_offsets: Vec<usize>,
}

impl Topology {
    pub fn bs_count(&self) -> usize {
        self.mab_positions.len() + self.mib_positions.len()
    }

    pub fn tier(&self, bs: usize) -> Tier {
        if bs < self.mab_positions.len() {
            Tier::Macro
        } else {
            Tier::Micro
        }
    }

    pub fn bs_position(&self, bs: usize) -> Point {
        let n_mab = self.mab_positions.len();
        if bs < n_mab {
            self.mab_positions[bs]
        } else {
            self.mib_positions[bs - n_mab]
        }
    }

    pub fn rb_count(&self, bs: usize) -> usize {
        match self.tier(bs) {
            Tier::Macro => self.rb_count_mab,
            Tier::Micro => self.rb_count_mib,
        }
    }

    /// Total number of (bs, rb) attachment choices.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair_bs(&self, pair: usize) -> usize {
        self.pairs[pair].0
    }

    pub fn pair_rb(&self, pair: usize) -> usize {
        self.pairs[pair].1
    }

    pub fn pair_index(&self, bs: usize, rb: usize) -> usize {
        debug_assert!(rb < self.rb_count(bs));
        self.pair_offsets[bs] + rb
    }

    /// 3D distance from a vehicle position to a base station, in metres.
    pub fn distance_3d_m(&self, vehicle_pos: &Point, bs: usize) -> f64 {
        let d2 = vehicle_pos.distance(&self.bs_position(bs));
        let dh = self.bs_height_m - self.vehicle_height_m;
        (d2 * d2 + dh * dh).sqrt()
    }
}

/// Lays out the scene. Macro cells sit at the centre (then on a ring for
/// additional ones); micro cells and APs are placed from the topology stream,
/// so the layout is a deterministic function of (config, seed).
pub fn build_topology<R: Rng>(config: &TopologyConfig, rng: &mut R) -> Result<Topology, NetsimError> {
    if config.area_side_m <= 0.0 {
        return Err(NetsimError::InvalidConfig(format!(
            "area_side_m must be positive, got {}",
            config.area_side_m
        )));
    }
    if config.rb_bandwidth_hz <= 0.0 {
        return Err(NetsimError::InvalidConfig(format!(
            "rb_bandwidth_hz must be positive, got {}",
            config.rb_bandwidth_hz
        )));
    }
    if config.rb_count_mab == 0 || config.rb_count_mib == 0 {
        return Err(NetsimError::InvalidConfig("rb counts must be >= 1".into()));
    }
    if config.mab_count == 0 || config.mib_count == 0 || config.wifi_ap_count == 0 {
        return Err(NetsimError::InvalidConfig(
            "mab_count, mib_count, and wifi_ap_count must be >= 1".into(),
        ));
    }
    if config.bs_height_m <= 0.0 || config.vehicle_height_m <= 0.0 {
        return Err(NetsimError::InvalidConfig("heights must be positive".into()));
    }

    let side = config.area_side_m;
    let centre = Point::new(side / 2.0, side / 2.0);

    let mut mab_positions = Vec::with_capacity(config.mab_count);
    mab_positions.push(centre);
    for k in 1..config.mab_count {
        let angle = 2.0 * std::f64::consts::PI * (k - 1) as f64 / (config.mab_count - 1) as f64;
        mab_positions.push(Point::new(
            centre.x + side / 4.0 * angle.cos(),
            centre.y + side / 4.0 * angle.sin(),
        ));
    }

    // Micro cells stay away from the border so their coverage is useful.
    let mib_positions = (0..config.mib_count)
        .map(|_| {
            Point::new(
                rng.gen_range(0.1 * side..0.9 * side),
                rng.gen_range(0.1 * side..0.9 * side),
            )
        })
        .collect();
    let wifi_ap_positions = (0..config.wifi_ap_count)
        .map(|_| Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
        .collect();

    let bs_count = config.mab_count + config.mib_count;
    let mut pairs = Vec::new();
    let mut pair_offsets = Vec::with_capacity(bs_count);
    for bs in 0..bs_count {
        pair_offsets.push(pairs.len());
        let rbs = if bs < config.mab_count {
            config.rb_count_mab
        } else {
            config.rb_count_mib
        };
        for rb in 0..rbs {
            pairs.push((bs, rb));
        }
    }

    Ok(Topology {
        mab_positions,
        mib_positions,
        wifi_ap_positions,
        rb_count_mab: config.rb_count_mab,
        rb_count_mib: config.rb_count_mib,
        rb_bandwidth_hz: config.rb_bandwidth_hz,
        bs_height_m: config.bs_height_m,
        vehicle_height_m: config.vehicle_height_m,
        area_side_m: config.area_side_m,
        pairs,
        pair_offsets,
    })
}

/// Kinematic state of one vehicle. Speed and heading are constant within an
/// episode except for boundary reflections.
#[derive(Debug, Clone)]
pub struct VehicleState {
    pub position: Point,
    /// Unit direction of travel.
    pub heading: Point,
    pub speed_mps: f64,
}

/// Displaces every vehicle by `speed * dt` along its heading, reflecting off
/// the area boundary (position mirrored back inside, heading component
/// flipped) so the vehicle count stays constant.
pub fn step_mobility(vehicles: &[VehicleState], dt_s: f64, topology: &Topology) -> Vec<VehicleState> {
    assert!(dt_s > 0.0, "dt_s must be positive, got {dt_s}");
    let side = topology.area_side_m;
    vehicles
        .iter()
        .map(|v| {
            let mut x = v.position.x + v.heading.x * v.speed_mps * dt_s;
            let mut y = v.position.y + v.heading.y * v.speed_mps * dt_s;
            let mut hx = v.heading.x;
            let mut hy = v.heading.y;
            while x < 0.0 || x > side {
                if x < 0.0 {
                    x = -x;
                } else {
                    x = 2.0 * side - x;
                }
                hx = -hx;
            }
            while y < 0.0 || y > side {
                if y < 0.0 {
                    y = -y;
                } else {
                    y = 2.0 * side - y;
                }
                hy = -hy;
            }
            VehicleState {
                position: Point::new(x, y),
                heading: Point::new(hx, hy),
                speed_mps: v.speed_mps,
            }
        })
        .collect()
}

/// Log-distance path loss in dB for a link of `distance_km`. Distances below
/// [`MIN_PATH_DISTANCE_M`] are clamped.
pub fn path_loss_db(distance_km: f64) -> f64 {
    let d = distance_km.max(MIN_PATH_DISTANCE_M / 1000.0);
    128.1 + 37.6 * d.log10()
}

/// One channel draw: per-(vehicle, bs) path loss plus per-(vehicle, pair)
/// small-scale fading, with the receiver noise power.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Path loss in dB, shape (vehicles, base stations).
    pub path_loss_db: Array2<f64>,
    /// Linear small-scale power gain, shape (vehicles, pairs).
    pub fading: Array2<f64>,
    /// Receiver noise power in watts.
    pub noise_power_w: f64,
}

impl ChannelRealization {
    /// Linear channel gain from vehicle `n` towards the bs owning `pair`, on
    /// that pair's RB.
    pub fn gain(&self, topology: &Topology, n: usize, pair: usize) -> f64 {
        let bs = topology.pair_bs(pair);
        let pl = self.path_loss_db[(n, bs)];
        10f64.powf(-pl / 10.0) * self.fading[(n, pair)]
    }
}

/// Draws a fresh channel: deterministic path loss from 3D geometry plus
/// unit-mean exponential power fading (Rayleigh envelope), redrawn on every
/// channel update.
pub fn realize_channel<R: Rng>(
    vehicles: &[VehicleState],
    topology: &Topology,
    noise_power_w: f64,
    rng: &mut R,
) -> ChannelRealization {
    assert!(noise_power_w > 0.0);
    let n = vehicles.len();
    let b = topology.bs_count();
    let pairs = topology.pair_count();

    let mut path_loss = Array2::zeros((n, b));
    for (i, v) in vehicles.iter().enumerate() {
        for bs in 0..b {
            let d_km = topology.distance_3d_m(&v.position, bs) / 1000.0;
            path_loss[(i, bs)] = path_loss_db(d_km);
        }
    }
    let mut fading = Array2::zeros((n, pairs));
    for i in 0..n {
        for p in 0..pairs {
            fading[(i, p)] = rng.sample::<f64, _>(Exp1);
        }
    }
    ChannelRealization {
        path_loss_db: path_loss,
        fading,
        noise_power_w,
    }
}

/// One agent's share of the joint allocation: the chosen (bs, rb) pair and
/// transmit power. The pair choice is one-hot by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub pair: usize,
    pub power_w: f64,
}

/// Cross-tier co-channel interference seen by vehicle `n`'s uplink at the bs
/// owning `pair`: powers of other vehicles transmitting on the same RB index
/// from the opposite tier, weighted by their gain towards the victim bs.
/// Same-tier links never contribute.
pub fn interference(
    allocs: &[Allocation],
    realization: &ChannelRealization,
    topology: &Topology,
    n: usize,
    pair: usize,
) -> f64 {
    let victim_bs = topology.pair_bs(pair);
    let victim_rb = topology.pair_rb(pair);
    let victim_tier = topology.tier(victim_bs);
    let mut d = 0.0;
    for (other, alloc) in allocs.iter().enumerate() {
        if other == n {
            continue;
        }
        let other_bs = topology.pair_bs(alloc.pair);
        let other_rb = topology.pair_rb(alloc.pair);
        if other_rb != victim_rb || topology.tier(other_bs) == victim_tier {
            continue;
        }
        // Gain is measured from the interfering vehicle to the *victim* bs.
        d += alloc.power_w * realization.gain(topology, other, topology.pair_index(victim_bs, victim_rb));
    }
    d
}

/// SINR of vehicle `n` evaluated for attachment `pair` under the joint
/// allocation. Zero when the vehicle is not attached to that pair.
pub fn sinr(
    allocs: &[Allocation],
    realization: &ChannelRealization,
    topology: &Topology,
    n: usize,
    pair: usize,
) -> f64 {
    if allocs[n].pair != pair {
        return 0.0;
    }
    let signal = allocs[n].power_w * realization.gain(topology, n, pair);
    let d = interference(allocs, realization, topology, n, pair);
    signal / (d + realization.noise_power_w)
}

/// Thermal noise floor plus noise figure over one RB, in watts.
pub fn noise_power_w(rb_bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = -174.0 + noise_figure_db + 10.0 * rb_bandwidth_hz.log10();
    10f64.powf((dbm - 30.0) / 10.0)
}
