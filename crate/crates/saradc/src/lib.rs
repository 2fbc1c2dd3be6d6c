//! Desk-scale simulator and learning system for semantic-aware radio resource
//! allocation in a 5G-V2X heterogeneous network.
//!
//! The crate models a three-tier radio environment (macro cells on licensed
//! spectrum, micro cells and WiFi on unlicensed spectrum), scores links with
//! semantic-rate metrics instead of raw bit rates, splits unlicensed airtime
//! between vehicles and WiFi with a flexible duty cycle, and trains a
//! parameter-shared PPO policy that jointly picks base station/resource block,
//! transmit power, duty-cycle fraction, and semantic symbols per word.
//!
//! Modules:
//!
//! | Module | Responsibility |
//! |--------|----------------|
//! | [`netsim`] | Topology, vehicle mobility, channel gains, interference, SINR |
//! | [`semantics`] | Semantic similarity surrogate and the HSR/HSSE/ST metrics |
//! | [`coexist`] | Duty-cycle airtime split and WiFi semantic throughput |
//! | [`mdp`] | Multi-agent environment: observations, actions, rewards, constraints |
//! | [`learner`] | From-scratch PPO: dense nets, mixed policy heads, losses, Adam |
//! | [`baselines`] | Non-learning reference policies and an exhaustive-search oracle |
//! | [`harness`] | Configuration, CLI commands, metrics persistence, summaries |

pub mod baselines;
pub mod coexist;
pub mod harness;
pub mod learner;
pub mod mdp;
pub mod netsim;
pub mod rng;
pub mod semantics;
