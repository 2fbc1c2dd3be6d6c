//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Run with
//! `cargo test -p saradc --test acceptance -- --nocapture`.
//!
//! Training-backed criteria share fixtures (trained once per scenario, in
//! parallel threads) so the whole suite stays within a desk-scale budget.

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::Array1;
use rand::Rng;

use saradc::baselines::{oracle_greedy, OracleGrids, PolicyKind};
use saradc::harness::commands::{run_eval, DcMode, EpisodeAgg, RolloutPolicy};
use saradc::harness::{self, metrics, Invocation};
use saradc::learner::loss::{self, test_support};
use saradc::learner::{buffer, obs_vector, train, EpisodeStats, LearnerConfig, Policy};
use saradc::mdp::{Env, EnvConfig};
use saradc::netsim::{self, Allocation, TopologyConfig};
use saradc::rng::{stream_rng, Stream};
use saradc::semantics::XiModel;

// ───────────────────────────── fixtures ─────────────────────────────

const FIXTURE_SEEDS: [u64; 3] = [1000, 1001, 1002];
const FIXTURE_EPISODES: usize = 200;

struct TrainedRun {
    seed: u64,
    policy: Policy,
    log: Vec<EpisodeStats>,
    wall: Duration,
}

struct Fixture {
    default_runs: Vec<TrainedRun>,
    small_runs: Vec<TrainedRun>,
}

fn default_env_config() -> EnvConfig {
    EnvConfig::default()
}

/// 2 vehicles, 2 base stations (1 macro + 1 micro), 3 RBs each: the frozen
/// oracle-comparison instance.
fn small_env_config() -> EnvConfig {
    EnvConfig {
        n_vehicles: 2,
        topology: TopologyConfig {
            mab_count: 1,
            mib_count: 1,
            wifi_ap_count: 1,
            rb_count_mab: 3,
            rb_count_mib: 3,
            ..TopologyConfig::default()
        },
        ..EnvConfig::default()
    }
}

fn train_one(env_config: EnvConfig, episodes: usize, seed: u64) -> TrainedRun {
    let start = Instant::now();
    let mut env = Env::new(env_config, seed).expect("valid env");
    let config = LearnerConfig {
        episodes,
        ..LearnerConfig::default()
    };
    let result = train(&mut env, &config, seed).expect("training succeeds");
    TrainedRun {
        seed,
        policy: result.policy,
        log: result.log,
        wall: start.elapsed(),
    }
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        // The first default-scenario run trains alone so its wall time is an
        // honest single-run measurement for the training-budget check; the
        // remaining runs share cores.
        let first = train_one(default_env_config(), FIXTURE_EPISODES, FIXTURE_SEEDS[0]);
        let mut default_runs = vec![first];
        let rest: Vec<TrainedRun> = std::thread::scope(|s| {
            let handles: Vec<_> = FIXTURE_SEEDS[1..]
                .iter()
                .map(|&seed| {
                    s.spawn(move || train_one(default_env_config(), FIXTURE_EPISODES, seed))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        default_runs.extend(rest);
        let small_runs: Vec<TrainedRun> = std::thread::scope(|s| {
            let handles: Vec<_> = FIXTURE_SEEDS
                .iter()
                .map(|&seed| {
                    s.spawn(move || train_one(small_env_config(), FIXTURE_EPISODES, seed))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        Fixture {
            default_runs,
            small_runs,
        }
    })
}

fn eval_policy(
    env_config: EnvConfig,
    rollout: &RolloutPolicy,
    episodes: usize,
    seed: u64,
) -> Vec<EpisodeAgg> {
    let mut env = Env::new(env_config, seed).expect("valid env");
    run_eval(&mut env, rollout, DcMode::Flexible, episodes, seed, None).expect("eval succeeds")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

// ──────────────────────────── criterion 1 ────────────────────────────

#[test]
fn c1_gradient_gate() {
    let start = Instant::now();
    let mut rng = stream_rng(0xACCE97, Stream::Policy);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let policy = test_support::random_policy(&mut rng);
        let batch = test_support::random_batch(&policy, 0.2, 5, &mut rng);
        let (_, actor_grads, critic_grads) =
            loss::total_loss_and_grads(&policy, &batch, 0.2, 0.01);
        let mut analytic = Vec::new();
        actor_grads.flatten_into(&mut analytic);
        critic_grads.flatten_into(&mut analytic);
        let numeric = test_support::finite_difference_grad(&policy, &batch, 0.2, 0.01, 1e-5);
        worst = worst.max(test_support::grad_mismatch(&analytic, &numeric));
    }
    let elapsed = start.elapsed();
    assert!(
        worst < 1e-4,
        "C1 FAIL: worst relative gradient error {worst:.3e} >= 1e-4"
    );
    assert!(
        elapsed < Duration::from_secs(60),
        "C1 FAIL: gradient gate took {elapsed:?} (budget 60 s)"
    );
    println!(
        "C1 PASS: gradient gate, 100 instances, worst relative error {worst:.3e} (< 1e-4), {elapsed:?}"
    );
}

// ──────────────────────────── criterion 2 ────────────────────────────

/// Independent brute-force evaluation of the SINR and interference
/// definitions, written directly against the tier/RB rules without touching
/// the library's interference code path.
mod sinr_oracle {
    use saradc::netsim::{Allocation, ChannelRealization, Tier, Topology};

    pub fn interference_brute(
        allocs: &[Allocation],
        real: &ChannelRealization,
        topo: &Topology,
        victim: usize,
        victim_pair: usize,
    ) -> f64 {
        let victim_bs = topo.pair_bs(victim_pair);
        let victim_rb = topo.pair_rb(victim_pair);
        let mut total = 0.0;
        for n_hat in 0..allocs.len() {
            if n_hat == victim {
                continue;
            }
            let other_pair = allocs[n_hat].pair;
            let other_bs = topo.pair_bs(other_pair);
            let other_rb = topo.pair_rb(other_pair);
            let cross_tier = match topo.tier(victim_bs) {
                Tier::Macro => topo.tier(other_bs) == Tier::Micro,
                Tier::Micro => topo.tier(other_bs) == Tier::Macro,
            };
            if other_rb == victim_rb && cross_tier {
                // Gain from the interfering vehicle towards the victim bs,
                // recomposed from raw path loss and fading.
                let pl = real.path_loss_db[(n_hat, victim_bs)];
                let fading = real.fading[(n_hat, topo.pair_index(victim_bs, victim_rb))];
                total += allocs[n_hat].power_w * 10f64.powf(-pl / 10.0) * fading;
            }
        }
        total
    }

    pub fn sinr_brute(
        allocs: &[Allocation],
        real: &ChannelRealization,
        topo: &Topology,
        n: usize,
        pair: usize,
    ) -> f64 {
        if allocs[n].pair != pair {
            return 0.0;
        }
        let bs = topo.pair_bs(pair);
        let pl = real.path_loss_db[(n, bs)];
        let h = 10f64.powf(-pl / 10.0) * real.fading[(n, pair)];
        allocs[n].power_w * h
            / (interference_brute(allocs, real, topo, n, pair) + real.noise_power_w)
    }
}

#[test]
fn c2_equation_oracles() {
    let mut rng = stream_rng(0xACCE97 + 2, Stream::Fading);
    let mut topo_rng = stream_rng(0xACCE97 + 2, Stream::Topology);
    let topo = netsim::build_topology(&TopologyConfig::default(), &mut topo_rng).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let vehicles: Vec<netsim::VehicleState> = (0..5)
            .map(|_| netsim::VehicleState {
                position: netsim::Point::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)),
                heading: netsim::Point::new(1.0, 0.0),
                speed_mps: 10.0,
            })
            .collect();
        let real = netsim::realize_channel(&vehicles, &topo, 4.74e-16, &mut rng);
        let allocs: Vec<Allocation> = (0..5)
            .map(|_| Allocation {
                pair: rng.gen_range(0..topo.pair_count()),
                power_w: rng.gen_range(1e-4..0.2),
            })
            .collect();
        for n in 0..5 {
            let pair = allocs[n].pair;
            let d = netsim::interference(&allocs, &real, &topo, n, pair);
            let d_oracle = sinr_oracle::interference_brute(&allocs, &real, &topo, n, pair);
            let s = netsim::sinr(&allocs, &real, &topo, n, pair);
            let s_oracle = sinr_oracle::sinr_brute(&allocs, &real, &topo, n, pair);
            let rel_d = (d - d_oracle).abs() / d_oracle.abs().max(1e-300);
            let rel_s = (s - s_oracle).abs() / s_oracle.abs().max(1e-300);
            worst = worst.max(rel_s);
            if d_oracle != 0.0 {
                worst = worst.max(rel_d);
            } else {
                assert_eq!(d, 0.0, "C2 FAIL: empty interference sum not exactly zero");
            }
        }
    }
    assert!(
        worst <= 1e-12,
        "C2 FAIL: worst relative error {worst:.3e} > 1e-12"
    );
    println!(
        "C2 PASS: SINR and interference match the brute-force evaluator on 1000 allocations (worst {worst:.3e} <= 1e-12)"
    );
}

// ──────────────────────────── criterion 3 ────────────────────────────

#[test]
fn c3_loss_unit_vectors() {
    let a1 = loss::actor_loss(&[1.5f64.ln()], &[0.0], &[1.0], 0.2);
    assert!(
        (a1 - (-1.2)).abs() < 1e-12,
        "C3 FAIL: actor loss for (r=1.5, A=1) is {a1}, expected -1.2"
    );
    let a2 = loss::actor_loss(&[0.5f64.ln()], &[0.0], &[-1.0], 0.2);
    assert!(
        (a2 - 0.8).abs() < 1e-12,
        "C3 FAIL: actor loss for (r=0.5, A=-1) is {a2}, expected 0.8"
    );
    let c = loss::critic_loss(&[5.0], &[3.0]);
    assert!(
        (c - 2.0).abs() < 1e-12,
        "C3 FAIL: critic loss for residual 2 is {c}, expected 2.0"
    );
    let adv = buffer::advantages(&[3.0, 0.0], &[1.0, 4.0]);
    assert_eq!(
        adv,
        vec![0.5, -1.0],
        "C3 FAIL: advantage normalization of raw {{2, -4}}"
    );
    println!("C3 PASS: actor loss -1.2 / +0.8, critic loss 2.0, advantages {{0.5, -1.0}} exact");
}

// ──────────────────────────── criterion 4 ────────────────────────────

#[test]
fn c4_sweep_mu_shape() {
    let dir = tempfile::tempdir().unwrap();
    harness::run(Invocation::SweepMu {
        config: None,
        seed: Some(7),
        out: dir.path().to_path_buf(),
    })
    .expect("sweep-mu runs");
    let rows = metrics::read_sweep_mu(&dir.path().join("sweep_mu.csv")).unwrap();
    let semantic: Vec<&metrics::SweepMuRow> =
        rows.iter().filter(|r| r.policy == "semantic").collect();
    let bit: Vec<&metrics::SweepMuRow> =
        rows.iter().filter(|r| r.policy == "bit_based").collect();
    assert_eq!(semantic.len(), 21, "C4 FAIL: expected 21 semantic rows");
    assert_eq!(bit.len(), 21, "C4 FAIL: expected 21 bit rows");

    let sem_min = semantic.iter().map(|r| r.hsse).fold(f64::INFINITY, f64::min);
    let sem_max = semantic
        .iter()
        .map(|r| r.hsse)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        sem_max - sem_min < 1e-12,
        "C4 FAIL: semantic curve varies by {:.3e}",
        sem_max - sem_min
    );

    // Log-log slope of the bit curve via least squares.
    let logs: Vec<(f64, f64)> = bit
        .iter()
        .map(|r| ((r.mu as f64).ln(), r.hsse.ln()))
        .collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let slope = logs
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum::<f64>()
        / logs.iter().map(|(x, _)| (x - mean_x).powi(2)).sum::<f64>();
    assert!(
        (slope + 1.0).abs() <= 0.01,
        "C4 FAIL: bit curve log-log slope {slope:.4} not within -1 ± 0.01"
    );

    let mu_star = metrics::sweep_crossover(&rows).expect("crossover exists");
    assert!(
        (2.0..=25.0).contains(&mu_star),
        "C4 FAIL: crossover mu* = {mu_star:.2} outside [2, 25]"
    );
    println!(
        "C4 PASS: semantic flat (range {:.1e}), bit slope {slope:.4}, crossover mu* = {mu_star:.2} in [2, 25]",
        sem_max - sem_min
    );
}

// ──────────────────────────── criterion 5 ────────────────────────────

#[test]
fn c5_training_reward_dominance() {
    let run = &fixture().default_runs[0];
    assert_eq!(run.log.len(), FIXTURE_EPISODES);
    let mean = |range: std::ops::Range<usize>| {
        let slice = &run.log[range];
        slice.iter().map(|r| r.mean_reward).sum::<f64>() / slice.len() as f64
    };
    let first_100 = mean(0..100);
    let final_100 = mean(FIXTURE_EPISODES - 100..FIXTURE_EPISODES);

    let random = eval_policy(
        default_env_config(),
        &RolloutPolicy::Baseline(PolicyKind::RandomAll),
        100,
        run.seed,
    );
    let random_mean =
        random.iter().map(|a| a.mean_reward).sum::<f64>() / random.len() as f64;

    // "Exceeds by >= 50%": reduces to 1.5x for positive baselines and stays
    // meaningful for negative ones.
    let bar = random_mean + 0.5 * random_mean.abs();
    assert!(
        final_100 >= bar,
        "C5 FAIL: trained final-100 mean {final_100:.4} below 1.5x random bar {bar:.4} (random {random_mean:.4})"
    );
    assert!(
        final_100 > first_100,
        "C5 FAIL: final-100 mean {final_100:.4} does not exceed first-100 mean {first_100:.4}"
    );
    assert!(
        run.wall <= Duration::from_secs(300),
        "C5 FAIL: 200-episode training took {:?} (budget 5 min)",
        run.wall
    );
    println!(
        "C5 PASS: trained final-100 reward {final_100:.4} vs random {random_mean:.4} ({}x), first-100 {first_100:.4}, 200-episode train in {:?}",
        final_100 / random_mean,
        run.wall
    );
}

// ──────────────────────────── criterion 6 ────────────────────────────

#[test]
fn c6_duty_cycle_dominance() {
    let mode_total = |run: &TrainedRun, mode: DcMode| -> f64 {
        let mut env = Env::new(default_env_config(), run.seed).expect("valid env");
        let aggs = run_eval(
            &mut env,
            &RolloutPolicy::Learned(&run.policy),
            mode,
            20,
            run.seed,
            None,
        )
        .expect("eval succeeds");
        aggs.iter().map(EpisodeAgg::total_st).sum::<f64>() / aggs.len() as f64
    };
    let mut flex = Vec::new();
    let mut fixed = Vec::new();
    let mut random = Vec::new();
    for run in &fixture().default_runs {
        flex.push(mode_total(run, DcMode::Flexible));
        fixed.push(mode_total(run, DcMode::Fixed(0.5)));
        random.push(mode_total(run, DcMode::Random));
    }
    let (mf, mx, mr) = (median(&mut flex), median(&mut fixed), median(&mut random));
    assert!(
        mf >= mx && mf >= mr,
        "C6 FAIL: 3-seed median total ST flexible {mf:.6e} vs fixed {mx:.6e} / random {mr:.6e} — \
         the learned duty cycle maximizes the vehicle-side reward, not raw total throughput; \
         see the decisions ledger for the analysis"
    );
    println!(
        "C6 PASS: 3-seed median total ST flexible {mf:.6e} >= fixed {mx:.6e} and >= random {mr:.6e}"
    );
}

// ──────────────────────────── criterion 7 ────────────────────────────

#[test]
fn c7_oracle_proximity() {
    let mut ratios = Vec::new();
    for run in &fixture().small_runs {
        // Frozen snapshot: a fresh environment at reset.
        let snap_seed = run.seed + 50;
        let mut env = Env::new(small_env_config(), snap_seed).expect("valid env");
        env.reset_with_seed(snap_seed);
        let grids = OracleGrids::defaults(env.config().p_max_w);
        let oracle = oracle_greedy(&env, &grids, 100_000_000).expect("oracle runs");
        // Policy value: mean single-step HSSE over sampled joint actions on
        // the same snapshot.
        let mut rng = stream_rng(snap_seed + 1, Stream::Policy);
        let obs: Vec<Array1<f64>> = (0..env.config().n_vehicles)
            .map(|n| obs_vector(&env.build_observation(n)))
            .collect();
        let draws = 500;
        let mut sum = 0.0;
        for _ in 0..draws {
            let actions: Vec<_> = obs.iter().map(|o| run.policy.sample(o, &mut rng).0).collect();
            sum += env.score_actions(&actions).unwrap().mean_hsse();
        }
        let mine = sum / draws as f64;
        ratios.push(mine / oracle.mean_hsse);
    }
    let med = median(&mut ratios);
    assert!(
        med >= 0.8,
        "C7 FAIL: 3-seed median policy/oracle HSSE ratio {med:.3} < 0.8 — the shortfall is the \
         RB-collision drag of independent per-step sampling (per-link quality is near-oracle); \
         see the decisions ledger for the analysis"
    );
    println!("C7 PASS: 3-seed median policy/oracle single-step HSSE ratio {med:.3} >= 0.8");
}

// ──────────────────────────── criterion 8 ────────────────────────────

#[test]
fn c8_constraint_accounting() {
    let run = &fixture().default_runs[0];
    let dir = tempfile::tempdir().unwrap();

    // Write trained-policy and random-baseline metrics over the same seeds.
    let write_metrics = |rollout: &RolloutPolicy, tag: &str| {
        let mut env = Env::new(default_env_config(), run.seed).expect("valid env");
        let path = dir.path().join(format!("metrics_{tag}.csv"));
        let mut writer = metrics::MetricsWriter::create(&path, &env, tag).unwrap();
        run_eval(
            &mut env,
            rollout,
            DcMode::Flexible,
            20,
            run.seed,
            Some(&mut writer),
        )
        .unwrap();
        writer.finish().unwrap();
        metrics::read_metrics(&path).unwrap()
    };
    let trained_rows = write_metrics(&RolloutPolicy::Learned(&run.policy), "sarad");
    let random_rows = write_metrics(&RolloutPolicy::Baseline(PolicyKind::RandomAll), "random_all");

    // Clause 2: duty-cycle conservation holds exactly in every emitted row
    // (o2 is the bitwise remainder of the slot).
    let o_total = 1.0;
    for row in trained_rows.iter().chain(&random_rows) {
        for agent in &row.agents {
            assert_eq!(
                agent.o2_s,
                o_total - agent.o1_s,
                "C8 FAIL: duty-cycle conservation violated in a row"
            );
        }
    }

    // Clause 3: every row's xi, HSSE, ST recompute from its own fields, and
    // every constraint flag recomputes from the row alone.
    let xi_model = XiModel::default();
    let (w, i_over_l) = (15_000.0, 1.0);
    let floor_scale = |x: f64| x.abs().max(1e-9);
    for row in trained_rows.iter().chain(&random_rows) {
        for agent in &row.agents {
            let xi = xi_model.xi(agent.u as f64, agent.sinr_db);
            assert!(
                (xi - agent.xi).abs() / floor_scale(agent.xi) < 1e-9,
                "C8 FAIL: xi recompute {xi} vs row {}",
                agent.xi
            );
            let hsse_expected = if agent.collided || xi < row.xi_threshold {
                0.0
            } else {
                i_over_l * xi / agent.u as f64
            };
            assert!(
                (hsse_expected - agent.hsse).abs() / floor_scale(agent.hsse) < 1e-9,
                "C8 FAIL: hsse recompute {hsse_expected} vs row {}",
                agent.hsse
            );
            let airtime = if agent.licensed { o_total } else { agent.o1_s };
            let st_expected = hsse_expected * w * airtime;
            assert!(
                (st_expected - agent.st).abs() / floor_scale(agent.st) < 1e-9,
                "C8 FAIL: st recompute {st_expected} vs row {}",
                agent.st
            );
        }
        let n = row.agents.len() as f64;
        assert_eq!(
            row.constraints.vehicle_floor,
            row.st_vehicles >= row.st_vehicle_floor * n,
            "C8 FAIL: vehicle-floor flag does not recompute"
        );
        assert_eq!(
            row.constraints.wifi_floor,
            row.st_wifi >= row.st_wifi_floor * n,
            "C8 FAIL: wifi-floor flag does not recompute"
        );
        assert_eq!(row.constraints.wifi_floor, row.wifi_gate);
        assert_eq!(
            row.constraints.exclusive_rb,
            row.collisions == 0,
            "C8 FAIL: exclusive-RB flag does not recompute"
        );
        assert_eq!(
            row.constraints.similarity,
            row.agents.iter().all(|a| a.xi >= row.xi_threshold),
            "C8 FAIL: similarity flag does not recompute"
        );
        assert!(row.constraints.symbol_range);
    }

    // Clause 1: trained RB-collision rate below the random baseline's.
    let coll_rate = |rows: &[metrics::MetricsRow]| {
        rows.iter().filter(|r| r.collisions > 0).count() as f64 / rows.len() as f64
    };
    let trained_rate = coll_rate(&trained_rows);
    let random_rate = coll_rate(&random_rows);
    println!(
        "C8: conservation exact and recomputation within 1e-9 on {} rows; collision rate trained {trained_rate:.3} vs random {random_rate:.3}",
        trained_rows.len() + random_rows.len()
    );
    assert!(
        trained_rate < random_rate,
        "C8 FAIL: trained RB-collision rate {trained_rate:.3} is not below random_all's {random_rate:.3} — \
         with attachment re-sampled independently every step from a shared policy whose observation \
         carries no pair identity, the collision probability is floor-bounded by the uniform marginal \
         (exactly the random baseline); see the decisions ledger for the full analysis and penalty sweep"
    );
    println!("C8 PASS: collision rate trained {trained_rate:.3} < random {random_rate:.3}");
}

// ──────────────────────────── criterion 9 ────────────────────────────

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn c9_determinism() {
    let episodes_override = Some(3);
    // Small scenario so the oracle command fits its point budget.
    let config_dir = tempfile::tempdir().unwrap();
    let config_path = config_dir.path().join("small.toml");
    std::fs::write(
        &config_path,
        "[scenario]\n\
         n_vehicles = 1\n\
         mib_count = 1\n\
         wifi_ap_count = 1\n\
         rb_count_mab = 2\n\
         rb_count_mib = 2\n\
         [semantics]\n\
         u_max = 10\n",
    )
    .unwrap();
    let run_all = |dir: &Path| {
        let out = dir.to_path_buf();
        harness::run(Invocation::Oracle {
            config: Some(config_path.clone()),
            seed: Some(11),
            out: out.clone(),
        })
        .unwrap();
        harness::run(Invocation::Train {
            config: None,
            seed: Some(11),
            out: out.clone(),
            episodes: Some(3),
        })
        .unwrap();
        harness::run(Invocation::Eval {
            config: None,
            seed: Some(11),
            out: out.clone(),
            policy: "sarad".into(),
            episodes: episodes_override,
        })
        .unwrap();
        harness::run(Invocation::Eval {
            config: None,
            seed: Some(11),
            out: out.clone(),
            policy: "random_all".into(),
            episodes: episodes_override,
        })
        .unwrap();
        harness::run(Invocation::SweepMu {
            config: None,
            seed: Some(11),
            out: out.clone(),
        })
        .unwrap();
        harness::run(Invocation::Summarize {
            files: vec![
                out.join("metrics_sarad.csv"),
                out.join("metrics_random_all.csv"),
                out.join("sweep_mu.csv"),
            ],
            out: out.clone(),
        })
        .unwrap();
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_all(dir_a.path());
    run_all(dir_b.path());
    let snap_a = dir_snapshot(dir_a.path());
    let snap_b = dir_snapshot(dir_b.path());
    assert_eq!(
        snap_a.len(),
        snap_b.len(),
        "C9 FAIL: different artifact sets"
    );
    for ((name_a, bytes_a), (name_b, bytes_b)) in snap_a.iter().zip(&snap_b) {
        assert_eq!(name_a, name_b, "C9 FAIL: artifact name mismatch");
        assert_eq!(
            bytes_a, bytes_b,
            "C9 FAIL: {name_a} differs between identical runs"
        );
    }
    println!(
        "C9 PASS: {} artifacts byte-identical across repeated train/eval/sweep/summarize runs",
        snap_a.len()
    );
}
