//! Metrics persistence: one CSV row per (episode, step) carrying the
//! per-agent link state and the step aggregates, plus the summary logic
//! that reduces metrics files to per-policy tables and finds the sweep
//! crossover.
//!
//! Files are UTF-8 with LF line endings and a header row; all floats use
//! shortest-round-trip formatting, so identical runs produce byte-identical
//! files.

use std::io::Write;
use std::path::Path;

use super::HarnessError;
use crate::mdp::{StepConstraints, StepOutcome};

/// Per-agent columns, repeated for every agent index.
const AGENT_COLUMNS: [&str; 13] = [
    "bs", "rb", "licensed", "power_w", "o1_s", "o2_s", "u", "sinr_db", "xi", "hsse", "st",
    "st_wifi", "collided",
];

/// Step-level columns preceding the agent blocks. The floor and threshold
/// columns repeat run constants so every constraint flag can be recomputed
/// from the row alone.
const STEP_COLUMNS: [&str; 16] = [
    "policy",
    "episode",
    "step",
    "reward",
    "st_vehicles",
    "st_wifi",
    "collisions",
    "wifi_gate",
    "st_vehicle_floor",
    "st_wifi_floor",
    "xi_threshold",
    "c11b_vehicle_floor",
    "c11c_wifi_floor",
    "c11d_exclusive_rb",
    "c11e_similarity",
    "c11f_symbol_range",
];

pub fn metrics_header(n_agents: usize) -> Vec<String> {
    let mut header: Vec<String> = STEP_COLUMNS.iter().map(|s| s.to_string()).collect();
    for agent in 0..n_agents {
        for col in AGENT_COLUMNS {
            header.push(format!("a{agent}_{col}"));
        }
    }
    header
}

fn fmt_bool(b: bool) -> String {
    if b { "1".into() } else { "0".into() }
}

/// Streams metrics rows for one command invocation.
pub struct MetricsWriter {
    writer: csv::Writer<std::fs::File>,
    n_agents: usize,
    policy: String,
    path: String,
    st_vehicle_floor: f64,
    st_wifi_floor: f64,
    xi_threshold: f64,
}

impl MetricsWriter {
    pub fn create(path: &Path, env: &crate::mdp::Env, policy: &str) -> Result<Self, HarnessError> {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let n_agents = env.config().n_vehicles;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(metrics_header(n_agents))
            .map_err(|e| HarnessError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(Self {
            writer,
            n_agents,
            policy: policy.to_string(),
            path: path.display().to_string(),
            st_vehicle_floor: env.st_vehicle_floor(),
            st_wifi_floor: env.st_wifi_floor(),
            xi_threshold: env.config().xi_threshold,
        })
    }

    pub fn write_step(
        &mut self,
        episode: usize,
        step: usize,
        outcome: &StepOutcome,
    ) -> Result<(), HarnessError> {
        assert_eq!(outcome.agents.len(), self.n_agents);
        let b = &outcome.breakdown;
        let c = &outcome.constraints;
        let mut record: Vec<String> = vec![
            self.policy.clone(),
            episode.to_string(),
            step.to_string(),
            b.reward.to_string(),
            b.st_sum_vehicles.to_string(),
            b.st_sum_wifi.to_string(),
            b.collision_penalty_count.to_string(),
            fmt_bool(b.wifi_gate),
            self.st_vehicle_floor.to_string(),
            self.st_wifi_floor.to_string(),
            self.xi_threshold.to_string(),
            fmt_bool(c.vehicle_floor),
            fmt_bool(c.wifi_floor),
            fmt_bool(c.exclusive_rb),
            fmt_bool(c.similarity),
            fmt_bool(c.symbol_range),
        ];
        for a in &outcome.agents {
            record.push(a.bs.to_string());
            record.push(a.rb.to_string());
            record.push(fmt_bool(a.licensed));
            record.push(a.power_w.to_string());
            record.push(a.o1_s.to_string());
            record.push(a.o2_s.to_string());
            record.push(a.u.to_string());
            record.push(a.sinr_db.to_string());
            record.push(a.xi.to_string());
            record.push(a.hsse.to_string());
            record.push(a.st.to_string());
            record.push(a.st_wifi.to_string());
            record.push(fmt_bool(a.collided));
        }
        self.writer.write_record(&record).map_err(|e| HarnessError::Io {
            path: self.path.clone(),
            message: e.to_string(),
        })
    }

    pub fn finish(mut self) -> Result<(), HarnessError> {
        self.writer.flush().map_err(|e| HarnessError::Io {
            path: self.path.clone(),
            message: e.to_string(),
        })
    }
}

/// One parsed metrics row; step-level fields plus per-agent blocks.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub policy: String,
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub st_vehicles: f64,
    pub st_wifi: f64,
    pub collisions: usize,
    pub wifi_gate: bool,
    pub st_vehicle_floor: f64,
    pub st_wifi_floor: f64,
    pub xi_threshold: f64,
    pub constraints: StepConstraints,
    pub agents: Vec<AgentRow>,
}

#[derive(Debug, Clone)]
pub struct AgentRow {
    pub bs: usize,
    pub rb: usize,
    pub licensed: bool,
    pub power_w: f64,
    pub o1_s: f64,
    pub o2_s: f64,
    pub u: u32,
    pub sinr_db: f64,
    pub xi: f64,
    pub hsse: f64,
    pub st: f64,
    pub st_wifi: f64,
    pub collided: bool,
}

/// Reads a metrics file, checking the header against the schema and naming
/// the offending column on mismatch.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let io_err = |e: &dyn std::fmt::Display| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(&e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| io_err(&e))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() {
        return Err(HarnessError::Config(format!(
            "{}: empty metrics file",
            path.display()
        )));
    }
    let agent_block = AGENT_COLUMNS.len();
    if header.len() < STEP_COLUMNS.len()
        || (header.len() - STEP_COLUMNS.len()) % agent_block != 0
    {
        return Err(HarnessError::Config(format!(
            "{}: header has {} columns, not a metrics schema",
            path.display(),
            header.len()
        )));
    }
    let n_agents = (header.len() - STEP_COLUMNS.len()) / agent_block;
    let expected = metrics_header(n_agents);
    for (got, want) in header.iter().zip(&expected) {
        if got != want {
            return Err(HarnessError::Config(format!(
                "{}: schema mismatch at column {got:?} (expected {want:?})",
                path.display()
            )));
        }
    }

    let parse_f = |s: &str, col: &str| -> Result<f64, HarnessError> {
        s.parse::<f64>().map_err(|_| {
            HarnessError::Config(format!("{}: bad value {s:?} in column {col}", path.display()))
        })
    };
    let parse_u = |s: &str, col: &str| -> Result<usize, HarnessError> {
        s.parse::<usize>().map_err(|_| {
            HarnessError::Config(format!("{}: bad value {s:?} in column {col}", path.display()))
        })
    };

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_err(&e))?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let mut agents = Vec::with_capacity(n_agents);
        for a in 0..n_agents {
            let base = STEP_COLUMNS.len() + a * agent_block;
            agents.push(AgentRow {
                bs: parse_u(get(base), "bs")?,
                rb: parse_u(get(base + 1), "rb")?,
                licensed: get(base + 2) == "1",
                power_w: parse_f(get(base + 3), "power_w")?,
                o1_s: parse_f(get(base + 4), "o1_s")?,
                o2_s: parse_f(get(base + 5), "o2_s")?,
                u: parse_u(get(base + 6), "u")? as u32,
                sinr_db: parse_f(get(base + 7), "sinr_db")?,
                xi: parse_f(get(base + 8), "xi")?,
                hsse: parse_f(get(base + 9), "hsse")?,
                st: parse_f(get(base + 10), "st")?,
                st_wifi: parse_f(get(base + 11), "st_wifi")?,
                collided: get(base + 12) == "1",
            });
        }
        rows.push(MetricsRow {
            policy: get(0).to_string(),
            episode: parse_u(get(1), "episode")?,
            step: parse_u(get(2), "step")?,
            reward: parse_f(get(3), "reward")?,
            st_vehicles: parse_f(get(4), "st_vehicles")?,
            st_wifi: parse_f(get(5), "st_wifi")?,
            collisions: parse_u(get(6), "collisions")?,
            wifi_gate: get(7) == "1",
            st_vehicle_floor: parse_f(get(8), "st_vehicle_floor")?,
            st_wifi_floor: parse_f(get(9), "st_wifi_floor")?,
            xi_threshold: parse_f(get(10), "xi_threshold")?,
            constraints: StepConstraints {
                vehicle_floor: get(11) == "1",
                wifi_floor: get(12) == "1",
                exclusive_rb: get(13) == "1",
                similarity: get(14) == "1",
                symbol_range: get(15) == "1",
            },
            agents,
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::Config(format!(
            "{}: metrics file has no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Mean and a 95% normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

pub fn mean_ci(values: &[f64]) -> MeanCi {
    let n = values.len();
    if n == 0 {
        return MeanCi {
            mean: f64::NAN,
            ci95: f64::NAN,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanCi { mean, ci95: 0.0, n };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanCi {
        mean,
        ci95: 1.96 * (var / n as f64).sqrt(),
        n,
    }
}

/// Per-policy summary over one or more metrics files: per-episode means
/// reduced to mean ± CI for the headline quantities.
#[derive(Debug, Clone)]
pub struct PolicySummary {
    pub policy: String,
    pub episodes: usize,
    pub reward: MeanCi,
    pub hsse: MeanCi,
    pub st_vehicles: MeanCi,
    pub st_wifi: MeanCi,
    pub collision_rate: MeanCi,
}

pub fn summarize_metrics(rows: &[MetricsRow]) -> Vec<PolicySummary> {
    // Group rows by policy, then by episode; keep first-seen policy order.
    let mut policies: Vec<String> = Vec::new();
    for row in rows {
        if !policies.contains(&row.policy) {
            policies.push(row.policy.clone());
        }
    }
    policies
        .iter()
        .map(|policy| {
            let mut per_episode: Vec<(usize, Vec<&MetricsRow>)> = Vec::new();
            for row in rows.iter().filter(|r| &r.policy == policy) {
                match per_episode.iter_mut().find(|(e, _)| *e == row.episode) {
                    Some((_, bucket)) => bucket.push(row),
                    None => per_episode.push((row.episode, vec![row])),
                }
            }
            let episode_mean = |f: &dyn Fn(&MetricsRow) -> f64| -> Vec<f64> {
                per_episode
                    .iter()
                    .map(|(_, bucket)| {
                        bucket.iter().map(|r| f(r)).sum::<f64>() / bucket.len() as f64
                    })
                    .collect()
            };
            let mean_agent_hsse = |r: &MetricsRow| {
                r.agents.iter().map(|a| a.hsse).sum::<f64>() / r.agents.len().max(1) as f64
            };
            PolicySummary {
                policy: policy.clone(),
                episodes: per_episode.len(),
                reward: mean_ci(&episode_mean(&|r| r.reward)),
                hsse: mean_ci(&episode_mean(&mean_agent_hsse)),
                st_vehicles: mean_ci(&episode_mean(&|r| r.st_vehicles)),
                st_wifi: mean_ci(&episode_mean(&|r| r.st_wifi)),
                collision_rate: mean_ci(&episode_mean(&|r| {
                    if r.collisions > 0 {
                        1.0
                    } else {
                        0.0
                    }
                })),
            }
        })
        .collect()
}

/// Row of a bits-per-word sweep file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMuRow {
    pub mu: u32,
    pub policy: String,
    pub hsse: f64,
}

pub fn write_sweep_mu(path: &Path, rows: &[SweepMuRow]) -> Result<(), HarnessError> {
    let io_err = |e: &dyn std::fmt::Display| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut out = std::fs::File::create(path).map_err(|e| io_err(&e))?;
    writeln!(out, "mu,policy,hsse").map_err(|e| io_err(&e))?;
    for row in rows {
        writeln!(out, "{},{},{}", row.mu, row.policy, row.hsse).map_err(|e| io_err(&e))?;
    }
    Ok(())
}

pub fn read_sweep_mu(path: &Path) -> Result<Vec<SweepMuRow>, HarnessError> {
    let io_err = |e: &dyn std::fmt::Display| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(&e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| io_err(&e))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header != ["mu", "policy", "hsse"] {
        let offending = header
            .iter()
            .zip(["mu", "policy", "hsse"])
            .find(|(g, w)| g.as_str() != *w)
            .map(|(g, _)| g.clone())
            .unwrap_or_else(|| "<missing>".into());
        return Err(HarnessError::Config(format!(
            "{}: schema mismatch at column {offending:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_err(&e))?;
        rows.push(SweepMuRow {
            mu: record[0]
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad mu {:?}", &record[0])))?,
            policy: record[1].to_string(),
            hsse: record[2]
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad hsse {:?}", &record[2])))?,
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::Config(format!(
            "{}: sweep file has no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Analytic crossover of a flat semantic curve against a `C/mu` bit curve:
/// the bits-per-word value where the two spectral efficiencies intersect.
pub fn sweep_crossover(rows: &[SweepMuRow]) -> Option<f64> {
    let semantic = rows.iter().find(|r| r.policy == "semantic")?;
    let bit = rows.iter().find(|r| r.policy == "bit_based")?;
    if semantic.hsse <= 0.0 {
        return None;
    }
    // The bit curve is exactly C/mu; recover C from any point.
    let c = bit.hsse * bit.mu as f64;
    Some(c / semantic.hsse)
}
