//! Command drivers: training, policy evaluation, the bits-per-word and
//! duty-cycle sweeps, the oracle bound, and summary generation. Every
//! command is a deterministic function of (config, seed) and writes
//! plot-ready CSV artifacts into the output directory.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha12Rng;

use super::config::ExperimentConfig;
use super::metrics::{
    self, read_metrics, read_sweep_mu, summarize_metrics, sweep_crossover, MetricsWriter,
    SweepMuRow,
};
use super::HarnessError;
use crate::baselines::{act_baseline, oracle_greedy, ActionSpace, OracleGrids, PolicyKind};
use crate::learner::{checkpoint, obs_vector, train, Policy};
use crate::mdp::{Action, Env, ScoringMode};
use crate::rng::{stream_rng, Stream};
use crate::semantics::hsse_bit;

/// What drives action selection during evaluation.
pub enum RolloutPolicy<'a> {
    Learned(&'a Policy),
    Baseline(PolicyKind),
}

/// Duty-cycle override applied on top of the acting policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcMode {
    Flexible,
    Fixed(f64),
    Random,
}

impl DcMode {
    pub fn tag(&self) -> &'static str {
        match self {
            DcMode::Flexible => "flexible",
            DcMode::Fixed(_) => "fixed",
            DcMode::Random => "random",
        }
    }
}

/// Per-episode aggregates of an evaluation run.
#[derive(Debug, Clone)]
pub struct EpisodeAgg {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_hsse: f64,
    pub st_vehicles_sum: f64,
    pub st_wifi_sum: f64,
    pub collision_rate: f64,
    pub wifi_gate_rate: f64,
}

impl EpisodeAgg {
    pub fn total_st(&self) -> f64 {
        self.st_vehicles_sum + self.st_wifi_sum
    }
}

/// Rolls a frozen policy (or baseline rule) through `episodes` episodes,
/// optionally streaming per-step metrics rows.
pub fn run_eval(
    env: &mut Env,
    rollout: &RolloutPolicy,
    dc_mode: DcMode,
    episodes: usize,
    seed: u64,
    mut writer: Option<&mut MetricsWriter>,
) -> Result<Vec<EpisodeAgg>, HarnessError> {
    let mut policy_rng: ChaCha12Rng = stream_rng(seed, Stream::Policy);
    let mut baseline_rng: ChaCha12Rng = stream_rng(seed, Stream::Baseline);
    let space = ActionSpace::from_env(env);
    let n_agents = env.config().n_vehicles;
    let t_max = env.config().t_max;
    let mut aggregates = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let mut observations = env.reset();
        let mut reward_sum = 0.0;
        let mut hsse_sum = 0.0;
        let mut st_v = 0.0;
        let mut st_w = 0.0;
        let mut collision_steps = 0usize;
        let mut gate_steps = 0usize;

        for step in 0..t_max {
            let mut actions: Vec<Action> = Vec::with_capacity(n_agents);
            for obs in &observations {
                let mut action = match rollout {
                    RolloutPolicy::Learned(policy) => {
                        policy.sample(&obs_vector(obs), &mut policy_rng).0
                    }
                    RolloutPolicy::Baseline(kind) => {
                        act_baseline(*kind, &space, obs, &mut baseline_rng)
                            .map_err(|e| HarnessError::Config(e.to_string()))?
                    }
                };
                match dc_mode {
                    DcMode::Flexible => {}
                    DcMode::Fixed(o1) => {
                        action.o1_fraction = o1.clamp(space.o1_min, space.o1_max);
                    }
                    DcMode::Random => {
                        action.o1_fraction =
                            rand::Rng::gen_range(&mut baseline_rng, space.o1_min..=space.o1_max);
                    }
                }
                actions.push(action);
            }
            let outcome = env
                .step(&actions)
                .map_err(|e| HarnessError::Numeric(e.to_string()))?;
            if let Some(w) = writer.as_deref_mut() {
                w.write_step(episode, step, &outcome)?;
            }
            reward_sum += outcome.breakdown.reward;
            hsse_sum +=
                outcome.agents.iter().map(|a| a.hsse).sum::<f64>() / n_agents as f64;
            st_v += outcome.breakdown.st_sum_vehicles;
            st_w += outcome.breakdown.st_sum_wifi;
            if outcome.breakdown.collision_penalty_count > 0 {
                collision_steps += 1;
            }
            if outcome.breakdown.wifi_gate {
                gate_steps += 1;
            }
            observations = outcome.observations;
        }
        aggregates.push(EpisodeAgg {
            episode,
            mean_reward: reward_sum / t_max as f64,
            mean_hsse: hsse_sum / t_max as f64,
            st_vehicles_sum: st_v,
            st_wifi_sum: st_w,
            collision_rate: collision_steps as f64 / t_max as f64,
            wifi_gate_rate: gate_steps as f64 / t_max as f64,
        });
    }
    Ok(aggregates)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn ensure_out_dir(out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out).map_err(io_err(out))
}

fn checkpoint_path(config: &ExperimentConfig, out: &Path) -> PathBuf {
    let p = Path::new(&config.run.checkpoint);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

/// `train`: runs the full training loop and writes the checkpoint plus a
/// per-episode reward log.
pub fn cmd_train(config: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    ensure_out_dir(out)?;
    let seed = config.run.seed;
    let mut env = Env::new(config.env_config()?, seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let result = train(&mut env, &config.learner_config(), seed)
        .map_err(|e| HarnessError::Numeric(e.to_string()))?;

    let ckpt = checkpoint_path(config, out);
    checkpoint::save(&result.policy, &ckpt).map_err(|e| HarnessError::Io {
        path: ckpt.display().to_string(),
        message: e.to_string(),
    })?;

    let log_path = out.join("reward_log.csv");
    let mut log = std::fs::File::create(&log_path).map_err(io_err(&log_path))?;
    writeln!(
        log,
        "episode,mean_reward,mean_st_vehicles,mean_st_wifi,collision_rate,wifi_gate_rate,mean_hsse"
    )
    .map_err(io_err(&log_path))?;
    for row in &result.log {
        writeln!(
            log,
            "{},{},{},{},{},{},{}",
            row.episode,
            row.mean_reward,
            row.mean_st_vehicles,
            row.mean_st_wifi,
            row.collision_rate,
            row.wifi_gate_rate,
            row.mean_hsse
        )
        .map_err(io_err(&log_path))?;
    }
    let last = result.log.last().expect("at least one episode");
    println!(
        "train: {} episodes, final mean reward {:.4}, checkpoint {}",
        result.log.len(),
        last.mean_reward,
        ckpt.display()
    );
    Ok(())
}

/// `eval`: rolls a frozen policy or baseline and writes per-step metrics.
pub fn cmd_eval(
    config: &ExperimentConfig,
    out: &Path,
    policy_tag: &str,
    episodes: usize,
) -> Result<(), HarnessError> {
    ensure_out_dir(out)?;
    let seed = config.run.seed;
    let scoring = if policy_tag == "bit_based" {
        ScoringMode::BitBased
    } else {
        ScoringMode::Semantic
    };
    let mut env = Env::new(config.env_config_scored(scoring)?, seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let metrics_path = out.join(format!("metrics_{policy_tag}.csv"));
    let mut writer = MetricsWriter::create(&metrics_path, &env, policy_tag)?;

    let loaded;
    let rollout = if policy_tag == "sarad" {
        let ckpt = checkpoint_path(config, out);
        loaded = checkpoint::load(&ckpt).map_err(|e| HarnessError::Io {
            path: ckpt.display().to_string(),
            message: e.to_string(),
        })?;
        RolloutPolicy::Learned(&loaded)
    } else {
        let kind =
            PolicyKind::parse(policy_tag).map_err(|e| HarnessError::Config(e.to_string()))?;
        if kind == PolicyKind::OracleGreedy {
            return Err(HarnessError::Config(
                "the oracle runs through the `oracle` command, not `eval`".into(),
            ));
        }
        RolloutPolicy::Baseline(kind)
    };

    let aggregates = run_eval(
        &mut env,
        &rollout,
        DcMode::Flexible,
        episodes,
        seed,
        Some(&mut writer),
    )?;
    writer.finish()?;
    let mean_reward =
        aggregates.iter().map(|a| a.mean_reward).sum::<f64>() / aggregates.len() as f64;
    println!(
        "eval {policy_tag}: {} episodes, mean reward {:.4}, metrics {}",
        aggregates.len(),
        mean_reward,
        metrics_path.display()
    );
    Ok(())
}

/// `sweep-mu`: semantic vs bit-based spectral efficiency across the
/// bits-per-word range, evaluated at the configured reference operating
/// point; reports the analytic crossover.
pub fn cmd_sweep_mu(config: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    ensure_out_dir(out)?;
    let xi_model = config.xi_model()?;
    let sweep = &config.sweep;
    if sweep.mu_min < 2 || sweep.mu_max < sweep.mu_min {
        return Err(HarnessError::Config(
            "sweep.mu_min/mu_max must satisfy 2 <= min <= max".into(),
        ));
    }
    let i_over_l = config.semantics.i_over_l;
    let u_ref = sweep.reference_u.clamp(1, config.semantics.u_max);
    let sinr_db = sweep.reference_sinr_db;
    let sinr_lin = 10f64.powf(sinr_db / 10.0);
    // The semantic link keeps its own symbol rate; the sweep variable only
    // re-scales the bit-based encoding.
    let semantic_hsse = i_over_l * xi_model.xi(u_ref as f64, sinr_db) / u_ref as f64;

    let mut rows = Vec::new();
    for mu in sweep.mu_min..=sweep.mu_max {
        rows.push(SweepMuRow {
            mu,
            policy: "semantic".into(),
            hsse: semantic_hsse,
        });
    }
    for mu in sweep.mu_min..=sweep.mu_max {
        rows.push(SweepMuRow {
            mu,
            policy: "bit_based".into(),
            hsse: hsse_bit(sinr_lin, mu as f64, i_over_l),
        });
    }
    let path = out.join("sweep_mu.csv");
    metrics::write_sweep_mu(&path, &rows)?;
    match sweep_crossover(&rows) {
        Some(mu_star) => println!(
            "sweep-mu: semantic {:.6} suts/s/Hz flat, bit curve crosses at mu* = {:.2} ({} rows/policy, {})",
            semantic_hsse,
            mu_star,
            sweep.mu_max - sweep.mu_min + 1,
            path.display()
        ),
        None => println!("sweep-mu: no crossover (semantic efficiency is zero)"),
    }
    Ok(())
}

/// `sweep-dc`: trains the flexible-DC policy, then evaluates it under
/// flexible, fixed, and random duty-cycle overrides on the same seeds.
pub fn cmd_sweep_dc(config: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    ensure_out_dir(out)?;
    let seed = config.run.seed;
    let mut env = Env::new(config.env_config()?, seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let result = train(&mut env, &config.learner_config(), seed)
        .map_err(|e| HarnessError::Numeric(e.to_string()))?;
    let ckpt = checkpoint_path(config, out);
    checkpoint::save(&result.policy, &ckpt).map_err(|e| HarnessError::Io {
        path: ckpt.display().to_string(),
        message: e.to_string(),
    })?;

    let path = out.join("sweep_dc.csv");
    let mut file = std::fs::File::create(&path).map_err(io_err(&path))?;
    writeln!(
        file,
        "dc_mode,episode,mean_reward,st_vehicles,st_wifi,total_st,collision_rate,wifi_gate_rate"
    )
    .map_err(io_err(&path))?;
    let modes = [
        DcMode::Flexible,
        DcMode::Fixed(config.sweep.dc_fixed_o1),
        DcMode::Random,
    ];
    let mut mode_totals = Vec::new();
    for mode in modes {
        let mut eval_env = Env::new(config.env_config()?, seed)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let aggregates = run_eval(
            &mut eval_env,
            &RolloutPolicy::Learned(&result.policy),
            mode,
            config.run.eval_episodes,
            seed,
            None,
        )?;
        for a in &aggregates {
            writeln!(
                file,
                "{},{},{},{},{},{},{},{}",
                mode.tag(),
                a.episode,
                a.mean_reward,
                a.st_vehicles_sum,
                a.st_wifi_sum,
                a.total_st(),
                a.collision_rate,
                a.wifi_gate_rate
            )
            .map_err(io_err(&path))?;
        }
        let mean_total =
            aggregates.iter().map(|a| a.total_st()).sum::<f64>() / aggregates.len() as f64;
        mode_totals.push((mode.tag(), mean_total));
    }
    let line = mode_totals
        .iter()
        .map(|(tag, v)| format!("{tag} {v:.4e}"))
        .collect::<Vec<_>>()
        .join(", ");
    println!("sweep-dc: mean total ST per episode: {line} ({})", path.display());
    Ok(())
}

/// `oracle`: exhaustive single-step bound on a frozen snapshot.
pub fn cmd_oracle(config: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    ensure_out_dir(out)?;
    let seed = config.run.seed;
    let mut env = Env::new(config.env_config()?, seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    env.reset();
    let env_cfg = env.config();
    let mut grids = OracleGrids::defaults(env_cfg.p_max_w);
    let n = config.oracle.power_grid_points.max(1);
    grids.power_w = (0..n)
        .map(|i| env_cfg.p_max_w * 10f64.powf(-2.0 * (n - 1 - i) as f64 / (n - 1).max(1) as f64))
        .collect();
    let outcome = oracle_greedy(&env, &grids, config.oracle.max_points as u128)
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let path = out.join("oracle.csv");
    let mut file = std::fs::File::create(&path).map_err(io_err(&path))?;
    writeln!(
        file,
        "agent,bs,rb,power_w,o1_fraction,u,mean_hsse,feasible,points_searched"
    )
    .map_err(io_err(&path))?;
    for (agent, action) in outcome.actions.iter().enumerate() {
        let bs = env.topology().pair_bs(action.pair);
        let rb = env.topology().pair_rb(action.pair);
        writeln!(
            file,
            "{},{},{},{},{},{},{},{},{}",
            agent,
            bs,
            rb,
            action.power_w,
            action.o1_fraction,
            action.u,
            outcome.mean_hsse,
            if outcome.feasible { 1 } else { 0 },
            outcome.points_searched
        )
        .map_err(io_err(&path))?;
    }
    println!(
        "oracle: mean HSSE {:.6} ({}feasible, {} points, {})",
        outcome.mean_hsse,
        if outcome.feasible { "" } else { "in" },
        outcome.points_searched,
        path.display()
    );
    Ok(())
}

/// `summarize`: reduces metrics files to a per-policy table and reports the
/// crossover for bits-per-word sweep files.
pub fn cmd_summarize(files: &[PathBuf], out: &Path) -> Result<(), HarnessError> {
    if files.is_empty() {
        return Err(HarnessError::Config("summarize needs at least one file".into()));
    }
    ensure_out_dir(out)?;
    let mut all_rows = Vec::new();
    let mut crossovers: Vec<(String, f64)> = Vec::new();
    for file in files {
        // Dispatch on the header: sweep files have the 3-column schema.
        let header = std::fs::read_to_string(file)
            .map_err(io_err(file))?
            .lines()
            .next()
            .unwrap_or_default()
            .to_string();
        if header.starts_with("mu,") {
            let rows = read_sweep_mu(file)?;
            if let Some(mu_star) = sweep_crossover(&rows) {
                // Artifacts carry the base name only; embedding caller paths
                // would break byte-identity across output directories.
                let name = file
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| file.display().to_string());
                crossovers.push((name, mu_star));
            }
        } else {
            all_rows.extend(read_metrics(file)?);
        }
    }

    let summary_path = out.join("summary.csv");
    let mut out_file = std::fs::File::create(&summary_path).map_err(io_err(&summary_path))?;
    writeln!(
        out_file,
        "policy,episodes,reward_mean,reward_ci95,hsse_mean,hsse_ci95,st_vehicles_mean,st_vehicles_ci95,st_wifi_mean,st_wifi_ci95,collision_rate_mean,collision_rate_ci95"
    )
    .map_err(io_err(&summary_path))?;
    let summaries = summarize_metrics(&all_rows);
    for s in &summaries {
        writeln!(
            out_file,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.policy,
            s.episodes,
            s.reward.mean,
            s.reward.ci95,
            s.hsse.mean,
            s.hsse.ci95,
            s.st_vehicles.mean,
            s.st_vehicles.ci95,
            s.st_wifi.mean,
            s.st_wifi.ci95,
            s.collision_rate.mean,
            s.collision_rate.ci95
        )
        .map_err(io_err(&summary_path))?;
        println!(
            "{:<12} reward {:.4}±{:.4}  hsse {:.5}±{:.5}  collisions {:.3}±{:.3} ({} episodes)",
            s.policy,
            s.reward.mean,
            s.reward.ci95,
            s.hsse.mean,
            s.hsse.ci95,
            s.collision_rate.mean,
            s.collision_rate.ci95,
            s.episodes
        );
    }
    if !crossovers.is_empty() {
        let crossover_path = out.join("crossover.csv");
        let mut cf = std::fs::File::create(&crossover_path).map_err(io_err(&crossover_path))?;
        writeln!(cf, "file,mu_star").map_err(io_err(&crossover_path))?;
        for (file, mu_star) in &crossovers {
            writeln!(cf, "{file},{mu_star}").map_err(io_err(&crossover_path))?;
            println!("crossover {file}: mu* = {mu_star:.3}");
        }
    }
    println!("summary written to {}", summary_path.display());
    Ok(())
}
