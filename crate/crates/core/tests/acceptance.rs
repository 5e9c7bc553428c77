//! Acceptance gate.
//!
//! Runs every criterion in order, prints one `[PASS]` or `[FAIL]` line per
//! criterion with the measured values, and exits non-zero if any failed.
//! Criterion numbers given as arguments select a subset:
//! `cargo test --release --test acceptance -- 3 5`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use fbrl::backward::{compute_delta, BackwardModel, DeltaDecode, DeltaPrediction};
use fbrl::env::{ActionId, EnvKind, EnvSpec};
use fbrl::harness::config::{ExperimentConfig, Method};
use fbrl::harness::experiment::{run_experiment, write_results, ExperimentResult, FINAL_WINDOW};
use fbrl::harness::oracle::{bfs_shortest_path, greedy_path_length, value_iteration, PathLength};
use fbrl::harness::trial::run_trial;
use fbrl::imagination::{ImaginationConfig, ImaginationEngine};
use fbrl::nn::{gradient_check, LossSpec, Mlp};
use fbrl::replay::{ReplayBuffer, SharedReplayBuffer, Transition};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn experiment(kind: EnvKind, size: usize, method: Method) -> ExperimentResult {
    let mut cfg = ExperimentConfig::published(kind, size, method).unwrap();
    cfg.deterministic = true;
    run_experiment(&cfg).unwrap()
}

/// 5x5 DDQN, shared by the baseline and no-harm criteria.
fn grid5_ddqn() -> &'static ExperimentResult {
    static RESULT: OnceLock<ExperimentResult> = OnceLock::new();
    RESULT.get_or_init(|| experiment(EnvKind::Gridworld, 5, Method::Ddqn))
}

fn criterion_1() -> Verdict {
    let mut worst_huber: f64 = 0.0;
    let mut worst_ce: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, h, o) = (rng.random_range(1..6), rng.random_range(1..10), rng.random_range(1..5));
        let mut net = Mlp::new(i, h, o, &mut rng);
        if seed % 2 == 1 {
            let scale = (0..i).map(|_| rng.random_range(0.1..2.0)).collect();
            net = net.with_input_scale(scale).unwrap();
        }
        let x: Vec<f64> = (0..i).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = (0..o).map(|_| rng.random_range(-3.0..3.0)).collect();
        let loss = LossSpec::Huber { target, delta: 1.0 };
        worst_huber = worst_huber.max(gradient_check(&net, &x, &loss, 1e-5).unwrap());

        let groups = rng.random_range(1..4);
        let net = Mlp::new(i, h, 3 * groups, &mut rng);
        let classes = (0..groups).map(|_| rng.random_range(0..3)).collect();
        let loss = LossSpec::CrossEntropy { classes };
        worst_ce = worst_ce.max(gradient_check(&net, &x, &loss, 1e-5).unwrap());
    }
    verdict(
        worst_huber < 1e-4 && worst_ce < 1e-4,
        format!("max relative error huber {worst_huber:.2e}, cross-entropy {worst_ce:.2e} (< 1e-4)"),
    )
}

fn criterion_2() -> Verdict {
    let mut cases: Vec<(EnvSpec, usize)> = (2..=10).map(|n| (EnvSpec::gridworld(n), 2 * (n - 1))).collect();
    cases.push((EnvSpec::hanoi(2), 3));
    cases.push((EnvSpec::hanoi(3), 7));
    let mut bad = Vec::new();
    for (env, expected) in &cases {
        let table = value_iteration(env, 0.99).unwrap();
        let greedy = greedy_path_length(env, &table).unwrap();
        let bfs = bfs_shortest_path(env).unwrap();
        if greedy != Some(*expected) || bfs != PathLength::Reachable(*expected) {
            bad.push(format!("{} {}: greedy {greedy:?}, bfs {bfs:?}", env.kind, env.size));
        }
    }
    if bad.is_empty() {
        verdict(true, format!("{} instances, greedy = BFS optimum on all", cases.len()))
    } else {
        verdict(false, bad.join("; "))
    }
}

fn criterion_3() -> Verdict {
    let finals = grid5_ddqn().final_means(FINAL_WINDOW);
    let good = finals.iter().filter(|&&f| f >= 0.8).count();
    let shown: Vec<String> = finals.iter().map(|f| format!("{f:.3}")).collect();
    verdict(
        good >= 8,
        format!("{good}/10 trials with final{FINAL_WINDOW} >= 0.8 [{}]", shown.join(" ")),
    )
}

fn criterion_4() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for size in [15, 20] {
        let ddqn = experiment(EnvKind::Gridworld, size, Method::Ddqn);
        let fbrl = experiment(EnvKind::Gridworld, size, Method::Fbrl);
        let (auc_d, auc_f) = (ddqn.auc(), fbrl.auc());
        let (first_d, first_f) = (ddqn.median_first_success(), fbrl.median_first_success());
        pass &= auc_f > auc_d && first_f < first_d;
        parts.push(format!(
            "{size}x{size}: auc fbrl {auc_f:.1} vs ddqn {auc_d:.1}, median first goal fbrl {first_f} vs ddqn {first_d}"
        ));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_5() -> Verdict {
    let ddqn = mean(&grid5_ddqn().final_means(FINAL_WINDOW));
    let fbrl = mean(&experiment(EnvKind::Gridworld, 5, Method::Fbrl).final_means(FINAL_WINDOW));
    verdict(
        fbrl >= ddqn - 0.05,
        format!("5x5 final{FINAL_WINDOW} mean fbrl {fbrl:.4} vs ddqn {ddqn:.4} (needs >= {:.4})", ddqn - 0.05),
    )
}

fn criterion_6() -> Verdict {
    let d2 = mean(&experiment(EnvKind::Hanoi, 2, Method::Ddqn).final_means(FINAL_WINDOW));
    let f2 = mean(&experiment(EnvKind::Hanoi, 2, Method::Fbrl).final_means(FINAL_WINDOW));
    let d3 = experiment(EnvKind::Hanoi, 3, Method::Ddqn).auc();
    let f3 = experiment(EnvKind::Hanoi, 3, Method::Fbrl).auc();
    verdict(
        d2 >= 0.9 && f2 >= 0.9 && f3 >= d3,
        format!("hanoi2 final{FINAL_WINDOW} ddqn {d2:.4}, fbrl {f2:.4} (>= 0.9); hanoi3 auc fbrl {f3:.1} vs ddqn {d3:.1}"),
    )
}

fn transition(env: &EnvSpec, s: &[f64], a: usize) -> Transition {
    let step = env.step(s, ActionId(a)).unwrap();
    Transition {
        state: s.to_vec().into(),
        action: ActionId(a),
        reward: step.reward,
        next_state: step.next,
        terminal: step.terminal,
        imagined: false,
    }
}

/// Every transition that changes the state.
fn moving_transitions(env: &EnvSpec) -> Vec<Transition> {
    env.enumerate_states()
        .iter()
        .flat_map(|s| (0..env.action_count()).map(move |a| (s.clone(), a)))
        .map(|(s, a)| transition(env, &s, a))
        .filter(|t| t.next_state != t.state)
        .collect()
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Continuous: interior moves of the 5x5 grid, i.e. those that do not bump a wall.
    let grid = EnvSpec::gridworld(5);
    let interior = moving_transitions(&grid);
    let mut model = BackwardModel::for_env(&grid, BackwardModel::DEFAULT_HIDDEN, 1e-3, &mut rng).unwrap();
    for _ in 0..3000 {
        model.train(&interior).unwrap();
    }
    let mut sq = 0.0;
    let mut count = 0;
    for t in &interior {
        let DeltaPrediction::Continuous(pred) = model.predict(&t.next_state, t.action).unwrap() else {
            unreachable!("gridworld model is continuous")
        };
        for (p, d) in pred.iter().zip(compute_delta(t)) {
            sq += (p - d).powi(2);
            count += 1;
        }
    }
    let mse = sq / count as f64;

    // Categorical: every legal 2-disc Hanoi move.
    let hanoi = EnvSpec::hanoi(2);
    let legal = moving_transitions(&hanoi);
    let mut model = BackwardModel::for_env(&hanoi, BackwardModel::DEFAULT_HIDDEN, 1e-3, &mut rng)
        .unwrap()
        .with_decode(DeltaDecode::Argmax);
    for _ in 0..3000 {
        model.train(&legal).unwrap();
    }
    let (mut correct, mut total) = (0usize, 0usize);
    for t in &legal {
        let pred = model.predict(&t.next_state, t.action).unwrap().realize(DeltaDecode::Argmax, &mut rng);
        for (p, d) in pred.iter().zip(compute_delta(t)) {
            correct += usize::from(*p == d);
            total += 1;
        }
    }
    let accuracy = correct as f64 / total as f64;

    // Best accuracy any function of (s', a) can reach: transitions sharing
    // (s', a) but differing in delta cannot all be predicted correctly.
    let mut groups: HashMap<(Vec<u64>, usize), Vec<Vec<f64>>> = HashMap::new();
    for t in &legal {
        let key = (t.next_state.iter().map(|v| v.to_bits()).collect(), t.action.0);
        groups.entry(key).or_default().push(compute_delta(t));
    }
    let mut best = 0usize;
    for deltas in groups.values() {
        for var in 0..deltas[0].len() {
            let mut counts = [0usize; 3];
            for d in deltas {
                counts[(d[var] + 1.0) as usize] += 1;
            }
            best += counts.iter().max().unwrap();
        }
    }
    let ceiling = best as f64 / total as f64;
    let ambiguous = groups.values().filter(|d| d.iter().map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect::<HashSet<_>>().len() > 1).count();

    verdict(
        mse < 1e-3 && accuracy >= 0.95,
        format!(
            "grid interior delta mse {mse:.2e} (< 1e-3) over {} moves; hanoi2 per-variable argmax accuracy {accuracy:.4} (>= 0.95) \
             over {} legal moves, ceiling for any (s', a) predictor {ceiling:.4} ({ambiguous} of {} (s', a) keys ambiguous)",
            interior.len(),
            legal.len(),
            groups.len()
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (kind, size, episodes) in [(EnvKind::Gridworld, 5, 30), (EnvKind::Hanoi, 2, 30)] {
        let mut cfg = ExperimentConfig::published(kind, size, Method::Fbrl).unwrap();
        cfg.deterministic = true;
        cfg.trials = 2;
        cfg.total_episodes = episodes;
        let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
        for d in &dirs {
            write_results(d.path(), &cfg, &run_experiment(&cfg).unwrap()).unwrap();
        }
        for file in ["raw.csv", "summary.csv"] {
            let a = std::fs::read(dirs[0].path().join(file)).unwrap();
            let b = std::fs::read(dirs[1].path().join(file)).unwrap();
            let same = a == b;
            pass &= same;
            parts.push(format!("{kind}{size} {file} {} bytes {}", a.len(), if same { "identical" } else { "DIFFER" }));
        }
    }
    verdict(pass, parts.join("; "))
}

fn tagged(id: u64, imagined: bool) -> Transition {
    Transition {
        state: vec![0.0].into(),
        action: ActionId(0),
        reward: id as f64,
        next_state: vec![0.0].into(),
        terminal: false,
        imagined,
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        PropConfig {
            cases,
            failure_persistence: None,
            ..PropConfig::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Pearson statistic of `counts` against a uniform expectation, and the
/// 0.001 critical value.
fn chi_square(counts: &[usize]) -> (f64, f64) {
    let draws: usize = counts.iter().sum();
    let expected = draws as f64 / counts.len() as f64;
    let stat = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((counts.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    (stat, critical)
}

fn criterion_9() -> Verdict {
    // FIFO order and capacity bound against a VecDeque model.
    let fifo = runner(256).run(
        &(1usize..64, prop::collection::vec(any::<bool>(), 0..300)),
        |(capacity, flags)| {
            let mut buffer = ReplayBuffer::new(capacity);
            let mut model = VecDeque::new();
            for (id, imagined) in flags.into_iter().enumerate() {
                buffer.append(tagged(id as u64, imagined));
                model.push_back((id, imagined));
                if model.len() > capacity {
                    model.pop_front();
                }
                prop_assert!(buffer.len() <= capacity);
                prop_assert_eq!(buffer.real_len(), model.iter().filter(|m| !m.1).count());
            }
            let held: Vec<(usize, bool)> = buffer.iter().map(|t| (t.reward as usize, t.imagined)).collect();
            prop_assert_eq!(held, Vec::from(model));
            Ok(())
        },
    );

    // Uniform sampling over the retained window, for all entries and for real entries only.
    let worst_ratio = std::cell::Cell::new(0.0f64);
    let uniform = runner(32).run(&(5usize..80, 0usize..200, any::<u64>()), |(capacity, extra, seed)| {
        let mut buffer = ReplayBuffer::new(capacity);
        let appended = capacity + extra;
        for id in 0..appended {
            buffer.append(tagged(id as u64, id % 3 == 2));
        }
        let first = appended - capacity;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut counts = vec![0usize; capacity];
        for _ in 0..100 {
            for t in buffer.sample(capacity, &mut rng).unwrap() {
                let id = t.reward as usize;
                prop_assert!(id >= first && id < appended, "sampled evicted id {}", id);
                counts[id - first] += 1;
            }
        }
        let (stat, critical) = chi_square(&counts);
        worst_ratio.set(worst_ratio.get().max(stat / critical));
        prop_assert!(stat < critical, "all-entry chi2 {} >= {}", stat, critical);

        let real: Vec<usize> = (first..appended).filter(|id| id % 3 != 2).collect();
        if real.len() >= 2 {
            let index: HashMap<usize, usize> = real.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            let mut counts = vec![0usize; real.len()];
            for _ in 0..100 {
                for t in buffer.sample_real(real.len(), &mut rng).unwrap() {
                    prop_assert!(!t.imagined);
                    counts[index[&(t.reward as usize)]] += 1;
                }
            }
            let (stat, critical) = chi_square(&counts);
            worst_ratio.set(worst_ratio.get().max(stat / critical));
            prop_assert!(stat < critical, "real-only chi2 {} >= {}", stat, critical);
        }
        Ok(())
    });

    // Concurrent writers and samplers on one shared buffer.
    const CAPACITY: usize = 500;
    const WRITERS: u64 = 4;
    const PER_WRITER: u64 = 5_000;
    let shared = SharedReplayBuffer::new(CAPACITY);
    shared.append_all((0..CAPACITY as u64).map(|i| tagged(WRITERS * PER_WRITER + i, false)));
    let done = Arc::new(AtomicBool::new(false));
    let samplers: Vec<_> = (0..2)
        .map(|k| {
            let (shared, done) = (shared.clone(), done.clone());
            std::thread::spawn(move || -> Result<usize, String> {
                let mut rng = ChaCha8Rng::seed_from_u64(k);
                let mut batches = 0;
                while !done.load(Ordering::Relaxed) {
                    let batch = shared.sample(32, &mut rng).map_err(|e| e.to_string())?;
                    if batch.len() != 32 || shared.len() > CAPACITY {
                        return Err("bad batch or capacity exceeded".into());
                    }
                    batches += 1;
                }
                Ok(batches)
            })
        })
        .collect();
    let writers: Vec<_> = (0..WRITERS)
        .map(|w| {
            let shared = shared.clone();
            std::thread::spawn(move || {
                for i in 0..PER_WRITER {
                    shared.append(tagged(w * PER_WRITER + i, i % 2 == 0));
                }
            })
        })
        .collect();
    writers.into_iter().for_each(|h| h.join().unwrap());
    done.store(true, Ordering::Relaxed);
    let sampler_results: Vec<_> = samplers.into_iter().map(|h| h.join().unwrap()).collect();
    let batches: usize = sampler_results.iter().filter_map(|r| r.as_ref().ok()).sum();
    let sampler_ok = sampler_results.iter().all(Result::is_ok);

    // After the writers finish, each writer's surviving ids must still be in
    // its own append order, and nothing from the prefill may survive.
    let (held, insertions) = shared.with(|b| (b.iter().map(|t| t.reward as u64).collect::<Vec<_>>(), b.insertions()));
    let mut last = vec![None; WRITERS as usize];
    let mut ordered = held.len() == CAPACITY;
    for id in &held {
        let w = (id / PER_WRITER) as usize;
        if w >= WRITERS as usize {
            ordered = false;
            break;
        }
        ordered &= last[w].is_none_or(|prev| prev < *id);
        last[w] = Some(*id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let index: HashMap<u64, usize> = held.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut counts = vec![0usize; CAPACITY];
    for _ in 0..200 {
        for t in shared.sample(CAPACITY, &mut rng).unwrap() {
            counts[index[&(t.reward as u64)]] += 1;
        }
    }
    let (stat, critical) = chi_square(&counts);
    let concurrent_ok = sampler_ok
        && ordered
        && insertions == CAPACITY as u64 + WRITERS * PER_WRITER
        && stat < critical;

    let pass = fifo.is_ok() && uniform.is_ok() && concurrent_ok;
    let mut detail = format!(
        "fifo/capacity 256 cases {}; chi2 32 cases {} (worst stat/critical {:.3}); \
         concurrent {} writers x {} appends with {batches} sampled batches: order {}, post-stress chi2 {stat:.1} < {critical:.1}",
        if fifo.is_ok() { "ok" } else { "FAILED" },
        if uniform.is_ok() { "ok" } else { "FAILED" },
        worst_ratio.get(),
        WRITERS,
        PER_WRITER,
        if ordered { "ok" } else { "BROKEN" },
    );
    for err in [fifo.err().map(|e| e.to_string()), uniform.err().map(|e| e.to_string())]
        .into_iter()
        .flatten()
        .chain(sampler_results.into_iter().filter_map(Result::err))
    {
        detail.push_str(&format!("; {err}"));
    }
    verdict(pass, detail)
}

fn criterion_10() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, size) in [(EnvKind::Gridworld, 5), (EnvKind::Hanoi, 2)] {
        let env = EnvSpec::new(kind, size, EnvSpec::published_horizon(kind, size)).unwrap();
        let config = ImaginationConfig::for_env(kind);
        let per_step = (config.stream_count * config.steps_per_rollout) as u64;

        // 100 forward steps' worth of rounds straight through the engine.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let q = Mlp::new(env.state_dim(), 32, env.action_count(), &mut rng);
        let model = BackwardModel::for_env(&env, BackwardModel::DEFAULT_HIDDEN, 1e-3, &mut rng).unwrap();
        let mut engine = ImaginationEngine::new(config.clone(), 10).unwrap();
        let mut buffer = ReplayBuffer::new(ReplayBuffer::DEFAULT_CAPACITY);
        let mut returned = 0u64;
        for _ in 0..100 {
            returned += engine.run_round(&env, &q, &model, &mut buffer).unwrap() as u64;
        }
        let stored = buffer.imagined_insertions();
        pass &= returned == 100 * per_step && stored == returned;

        // Through a full deterministic trial.
        let mut cfg = ExperimentConfig::published(kind, size, Method::Fbrl).unwrap();
        cfg.deterministic = true;
        cfg.total_episodes = 5;
        let trial = run_trial(&cfg, 0).unwrap();
        pass &= trial.imagined_transitions == trial.forward_steps * per_step;

        parts.push(format!(
            "{kind}{size} ({}x{}): 100 steps -> {returned} imagined ({stored} stored, expected {}); trial {} steps -> {} imagined (expected {})",
            config.steps_per_rollout,
            config.stream_count,
            100 * per_step,
            trial.forward_steps,
            trial.imagined_transitions,
            trial.forward_steps * per_step
        ));
    }
    verdict(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "gradient correctness", criterion_1),
        (2, "oracle equivalence", criterion_2),
        (3, "baseline sanity", criterion_3),
        (4, "imagination advantage on large grids", criterion_4),
        (5, "no harm on small grid", criterion_5),
        (6, "hanoi trend", criterion_6),
        (7, "backward-model accuracy", criterion_7),
        (8, "determinism", criterion_8),
        (9, "replay-buffer properties", criterion_9),
        (10, "imagination accounting", criterion_10),
    ];
    // Cargo forwards libtest flags such as --nocapture; only bare numbers select.
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();

    let mut failures = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failures += usize::from(!v.pass);
        println!(
            "[{}] criterion {n} ({name}): {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
