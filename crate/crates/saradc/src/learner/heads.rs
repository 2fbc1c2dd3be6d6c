//! Policy head machinery: two categorical heads (attachment pair, symbols
//! per word) and two squashed-Gaussian heads (transmit power, duty-cycle
//! fraction) read out of one actor output vector.
//!
//! Continuous actions are sampled in an unbounded pre-squash space and
//! mapped into their ranges with a tanh squash; log-densities carry the
//! change-of-variables correction. Log standard deviations are confined to a
//! finite band through a sigmoid, keeping every path smooth for the
//! finite-difference gradient gate.

use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -3.0;
pub const LOG_STD_MAX: f64 = 1.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Where each head lives inside the actor output vector:
/// `[pair logits | u logits | p_mean, o1_mean, p_log_std_raw, o1_log_std_raw]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadLayout {
    pub n_pairs: usize,
    pub n_u: usize,
}

impl HeadLayout {
    pub fn output_dim(&self) -> usize {
        self.n_pairs + self.n_u + 4
    }

    pub fn pair_range(&self) -> std::ops::Range<usize> {
        0..self.n_pairs
    }

    pub fn u_range(&self) -> std::ops::Range<usize> {
        self.n_pairs..self.n_pairs + self.n_u
    }

    pub fn p_mean_idx(&self) -> usize {
        self.n_pairs + self.n_u
    }

    pub fn o1_mean_idx(&self) -> usize {
        self.n_pairs + self.n_u + 1
    }

    pub fn p_log_std_idx(&self) -> usize {
        self.n_pairs + self.n_u + 2
    }

    pub fn o1_log_std_idx(&self) -> usize {
        self.n_pairs + self.n_u + 3
    }
}

/// Target range of a squashed continuous head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squash {
    pub lo: f64,
    pub hi: f64,
}

impl Squash {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(hi > lo);
        Self { lo, hi }
    }

    /// Maps the unbounded pre-squash value into (lo, hi).
    pub fn apply(&self, z: f64) -> f64 {
        self.lo + (self.hi - self.lo) * (z.tanh() + 1.0) / 2.0
    }

    /// `ln |da/dz|`, the log-density correction for the squash.
    pub fn log_det(&self, z: f64) -> f64 {
        ((self.hi - self.lo) / 2.0).ln() + ln_one_minus_tanh_sq(z)
    }
}

/// Numerically stable `ln(1 - tanh(z)^2)`.
fn ln_one_minus_tanh_sq(z: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - z - softplus(-2.0 * z))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps the raw net output to a log-std inside `[LOG_STD_MIN, LOG_STD_MAX]`.
pub fn log_std_from_raw(raw: f64) -> f64 {
    LOG_STD_MIN + (LOG_STD_MAX - LOG_STD_MIN) * sigmoid(raw)
}

/// `d log_std / d raw` for the band map above.
pub fn log_std_raw_derivative(raw: f64) -> f64 {
    let s = sigmoid(raw);
    (LOG_STD_MAX - LOG_STD_MIN) * s * (1.0 - s)
}

/// One Gaussian head after the band map: mean and log-std.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianHead {
    pub mean: f64,
    pub log_std: f64,
}

impl GaussianHead {
    pub fn std(&self) -> f64 {
        self.log_std.exp()
    }

    pub fn log_prob(&self, z: f64) -> f64 {
        let d = (z - self.mean) / self.std();
        -0.5 * d * d - self.log_std - 0.5 * LN_2PI
    }

    /// Differential entropy of the pre-squash Gaussian.
    pub fn entropy(&self) -> f64 {
        0.5 * (1.0 + LN_2PI) + self.log_std
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.mean + self.std() * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Decoded head view over one actor output vector.
#[derive(Debug, Clone)]
pub struct PolicyHeads {
    pub pair_log_probs: Vec<f64>,
    pub u_log_probs: Vec<f64>,
    pub p: GaussianHead,
    pub o1: GaussianHead,
}

impl PolicyHeads {
    /// Splits the raw actor output into heads; categorical logits are
    /// log-softmax normalized here, once.
    pub fn from_output(output: &Array1<f64>, layout: &HeadLayout) -> Self {
        assert_eq!(output.len(), layout.output_dim(), "actor output dim mismatch");
        let slice = output.as_slice().expect("contiguous output");
        Self {
            pair_log_probs: log_softmax(&slice[layout.pair_range()]),
            u_log_probs: log_softmax(&slice[layout.u_range()]),
            p: GaussianHead {
                mean: slice[layout.p_mean_idx()],
                log_std: log_std_from_raw(slice[layout.p_log_std_idx()]),
            },
            o1: GaussianHead {
                mean: slice[layout.o1_mean_idx()],
                log_std: log_std_from_raw(slice[layout.o1_log_std_idx()]),
            },
        }
    }

    pub fn pair_probs(&self) -> Vec<f64> {
        self.pair_log_probs.iter().map(|lp| lp.exp()).collect()
    }

    pub fn u_probs(&self) -> Vec<f64> {
        self.u_log_probs.iter().map(|lp| lp.exp()).collect()
    }

    /// Joint entropy across all four heads (exact for the categoricals,
    /// pre-squash differential entropy for the Gaussians).
    pub fn entropy(&self) -> f64 {
        categorical_entropy(&self.pair_log_probs)
            + categorical_entropy(&self.u_log_probs)
            + self.p.entropy()
            + self.o1.entropy()
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - max - log_sum).collect()
}

pub fn categorical_entropy(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|&lp| lp.exp() * lp).sum::<f64>()
}

/// Samples an index from normalized log-probabilities.
pub fn sample_categorical<R: Rng>(log_probs: &[f64], rng: &mut R) -> usize {
    let x: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, &lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if x < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

/// A sampled joint action in network coordinates: categorical indices plus
/// pre-squash Gaussian draws. Stored in the trajectory buffer so log-probs
/// can be re-evaluated under new parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub pair_idx: usize,
    pub u_idx: usize,
    pub z_p: f64,
    pub z_o1: f64,
    /// Joint log-probability under the sampling distribution, squash
    /// corrections included.
    pub log_prob: f64,
}

/// Samples all four heads and assembles the joint log-probability.
pub fn sample_action<R: Rng>(
    heads: &PolicyHeads,
    p_squash: &Squash,
    o1_squash: &Squash,
    rng: &mut R,
) -> SampledAction {
    let pair_idx = sample_categorical(&heads.pair_log_probs, rng);
    let u_idx = sample_categorical(&heads.u_log_probs, rng);
    let z_p = heads.p.sample(rng);
    let z_o1 = heads.o1.sample(rng);
    let log_prob = joint_log_prob(heads, p_squash, o1_squash, pair_idx, u_idx, z_p, z_o1);
    SampledAction {
        pair_idx,
        u_idx,
        z_p,
        z_o1,
        log_prob,
    }
}

/// Greedy counterpart: argmax categoricals and distribution means.
pub fn deterministic_action(
    heads: &PolicyHeads,
    p_squash: &Squash,
    o1_squash: &Squash,
) -> SampledAction {
    let pair_idx = argmax(&heads.pair_log_probs);
    let u_idx = argmax(&heads.u_log_probs);
    let z_p = heads.p.mean;
    let z_o1 = heads.o1.mean;
    let log_prob = joint_log_prob(heads, p_squash, o1_squash, pair_idx, u_idx, z_p, z_o1);
    SampledAction {
        pair_idx,
        u_idx,
        z_p,
        z_o1,
        log_prob,
    }
}

/// Joint log-probability of a stored action under the given heads: sum of
/// head log-probabilities, minus the squash corrections for the continuous
/// dimensions.
pub fn joint_log_prob(
    heads: &PolicyHeads,
    p_squash: &Squash,
    o1_squash: &Squash,
    pair_idx: usize,
    u_idx: usize,
    z_p: f64,
    z_o1: f64,
) -> f64 {
    heads.pair_log_probs[pair_idx]
        + heads.u_log_probs[u_idx]
        + heads.p.log_prob(z_p)
        - p_squash.log_det(z_p)
        + heads.o1.log_prob(z_o1)
        - o1_squash.log_det(z_o1)
}
