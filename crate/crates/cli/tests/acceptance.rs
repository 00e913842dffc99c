//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use eesim::commands::{
    cmd_ablation, cmd_bandit, cmd_compare_distortion, cmd_gen_traces, cmd_sweep_threshold,
};
use eesim::ExperimentConfig;
use eesim_core::bandit::{
    expected_reward_oracle, run_adaptive, ActionSet, BanditState, RewardParams,
};
use eesim_core::cascade::{decide_exit, run_caption, speedup_ratio, ExitHistogram, TokenTrace};
use eesim_core::distill::{
    exit_losses, gradient_check, kl_divergence, softmax, train_backbone, train_exits, CascadeDims,
    LossMix, LrSchedule, Objective, ToyCascade, ToyTask, TrainConfig, DEEPEST_EXIT_EPSILON,
    TEACHER_GAP_EPSILON,
};
use eesim_core::synth::{read_all, write_traces, SyntheticConfidenceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

/// Free-running decoding at alpha = 0.6 over images 0..10000 at seed 0.
const COMMITTED_FIXED_SPEEDUP: f64 = 1.6484146487119735;
/// Oracle-optimal thresholds of the default generator at sigma = 0 and 2.
const COMMITTED_ALPHA_STAR_CLEAN: f64 = 0.6;
const COMMITTED_ALPHA_STAR_SIGMA2: f64 = 0.1;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    check(t < limit, format!("{what} took {t:?}, limit {limit:?}"))
}

fn config_in(dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        out_dir: dir.to_path_buf(),
        ..Default::default()
    };
    c.resolve_seeds();
    c
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Header and rows of one of our CSV files, skipping the config line.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].clone()).collect()
}

fn f(x: &Value) -> f64 {
    x.as_f64().unwrap()
}

struct BanditRun {
    summary: Value,
    log_rewards: Vec<f64>,
    elapsed: Duration,
    dir: tempfile::TempDir,
}

fn default_bandit_run() -> BanditRun {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    cmd_bandit(&config_in(dir.path())).unwrap();
    let elapsed = start.elapsed();
    let summary = read_json(&dir.path().join("bandit_summary.json"))["result"].clone();
    let (h, rows) = read_csv(&dir.path().join("bandit_log.csv"));
    let log_rewards = column(&h, &rows, "reward")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    BanditRun {
        summary,
        log_rewards,
        elapsed,
        dir,
    }
}

fn c1_ucb_convergence(run: &BanditRun) -> Outcome {
    let s = &run.summary;
    check(
        run.elapsed < Duration::from_secs(120),
        format!("run took {:?}", run.elapsed),
    )?;
    let best = f(&s["oracle_best_threshold"]);
    check(
        best == COMMITTED_ALPHA_STAR_CLEAN,
        format!("oracle alpha* {best}"),
    )?;
    check(s["rounds"] == 100_000, "run did not play 100k rounds")?;
    check(
        s["final_window"] == 10_000,
        "final window is not 10k rounds",
    )?;
    let share = f(&s["final_window_best_share"]);
    check(
        share > 0.9,
        format!("alpha* share in final 10k rounds {share}"),
    )?;
    let per_round = f(&s["regret_per_round"]);
    let limit = 0.1 * f(&s["max_gap"]);
    check(per_round <= limit, format!("R(T)/T {per_round} > {limit}"))?;
    check(
        f(&s["empirical_best_threshold"]) == best,
        "empirical best arm differs from alpha*",
    )?;
    Ok(format!(
        "alpha* share {share:.4}, R(T)/T {per_round:.5} <= {limit:.5}, {:?}",
        run.elapsed
    ))
}

fn c2_regret_bound(run: &BanditRun) -> Outcome {
    let s = &run.summary;
    // Gap estimates from an independent set of 200k samples must agree.
    let cfg = config_in(run.dir.path());
    let params = cfg.reward_params(1.0).unwrap();
    let actions = ActionSet::tenths();
    let start = Instant::now();
    let a =
        expected_reward_oracle(&cfg.generator.with_seed(0), &actions, &params, 200_000).unwrap();
    let b =
        expected_reward_oracle(&cfg.generator.with_seed(1), &actions, &params, 200_000).unwrap();
    let drift = a
        .gaps()
        .iter()
        .zip(b.gaps())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    // Two independent estimates each within 1e-3 differ by at most 2e-3.
    check(drift <= 2e-3, format!("gap estimates differ by {drift}"))?;
    let gaps: Vec<f64> = s["oracle"]["expected_reward"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| f(&s["oracle"]["expected_reward"][a.best_arm()]) - f(r))
        .collect();
    check(
        gaps == a.gaps(),
        "summary oracle differs from the recomputed oracle",
    )?;

    // Bound recomputed here from the gaps.
    let t = 100_000f64;
    let sub: Vec<f64> = gaps.iter().copied().filter(|&g| g > 0.0).collect();
    check(
        sub.len() == 9,
        "expected 9 suboptimal arms with positive gaps",
    )?;
    let bound = 4.0 * t.ln() * sub.iter().map(|g| 1.0 / g).sum::<f64>()
        + (std::f64::consts::PI.powi(2) / 3.0 + 1.0) * sub.iter().sum::<f64>();
    let reported = f(&s["regret_bound"]);
    check(
        (bound - reported).abs() <= 1e-9 * bound,
        format!("bound {reported} vs recomputed {bound}"),
    )?;
    let r = f(&s["final_pseudo_regret"]);
    check(r <= bound, format!("R(T) {r} > bound {bound}"))?;
    within(start, Duration::from_secs(120), "oracle")?;
    Ok(format!(
        "R(T) {r:.1} <= bound {bound:.1}, gap drift {drift:.2e}"
    ))
}

fn c3_reward_bounds(run: &BanditRun) -> Outcome {
    let (lo, hi) = (-2.0, 1.0);
    let bad = run
        .log_rewards
        .iter()
        .filter(|&&r| !(lo..=hi).contains(&r))
        .count();
    check(
        bad == 0,
        format!("{bad} default-run rewards outside [-2, 1]"),
    )?;
    check(run.log_rewards.len() == 100_000, "log length")?;

    let mut checked = run.log_rewards.len();
    for (sigma, lambda) in [(0.0, 3.0), (2.0, 1.0), (1.0, 0.0)] {
        let g = SyntheticConfidenceModel::default().distort(sigma).unwrap();
        let params = RewardParams::linear(12, lambda).unwrap();
        let (lo, hi) = params.reward_bounds();
        check(lo == -1.0 - lambda, "bound formula")?;
        let mut state = BanditState::new(ActionSet::tenths(), 1.0).unwrap();
        let run = run_adaptive(
            g.images(),
            &mut state,
            &params,
            &g.shape(),
            20,
            Some(20_000),
        )
        .unwrap();
        let bad = run
            .log
            .records
            .iter()
            .filter(|r| !(lo..=hi).contains(&r.reward))
            .count();
        check(
            bad == 0,
            format!("{bad} rewards outside [{lo}, {hi}] at sigma {sigma}, lambda {lambda}"),
        )?;
        checked += run.log.len();
    }
    Ok(format!("{checked} rewards inside their bounds"))
}

fn random_trace(rng: &mut ChaCha8Rng, layers: usize) -> TokenTrace {
    let c: Vec<f64> = (0..layers)
        .map(|_| {
            // Mix in exact grid values so ties with alpha are exercised.
            if rng.random_bool(0.2) {
                rng.random_range(0..=10) as f64 / 10.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let ids: Vec<u32> = (0..layers).map(|_| rng.random_range(0..32)).collect();
    TokenTrace::from_parts(&c, &ids).unwrap()
}

fn brute_force_exit(t: &TokenTrace, alpha: f64) -> (usize, u32) {
    let n = t.num_layers();
    for i in 1..n {
        if t.confidence(i) >= alpha {
            return (i, t.layers()[i - 1].token_id);
        }
    }
    (n, t.layers()[n - 1].token_id)
}

fn c4_exit_rule() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let traces: Vec<TokenTrace> = (0..10_000).map(|_| random_trace(&mut rng, 12)).collect();
    let mut alphas: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
    alphas.extend([0.0, 1.0]);
    let mut compared = 0;
    for &alpha in &alphas {
        for t in &traces {
            let d = decide_exit(t, alpha).unwrap();
            let (layer, id) = brute_force_exit(t, alpha);
            check(
                d.exit_layer == layer && d.token_id == id,
                format!("mismatch at alpha {alpha}"),
            )?;
            compared += 1;
        }
    }
    within(start, Duration::from_secs(10), "exit rule scan")?;
    Ok(format!("{compared} decisions match the brute-force scan"))
}

fn c5_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut traces: Vec<TokenTrace> = (0..5_000).map(|_| random_trace(&mut rng, 12)).collect();
    traces.extend(SyntheticConfidenceModel::default().sample_chunk(0, 5_000));
    let alphas: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    for t in &traces {
        let layers: Vec<usize> = alphas
            .iter()
            .map(|&a| decide_exit(t, a).unwrap().exit_layer)
            .collect();
        check(
            layers.windows(2).all(|w| w[0] <= w[1]),
            "per-token exit layer decreased",
        )?;
    }

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.sweep.alphas = alphas;
    cmd_sweep_threshold(&cfg).unwrap();
    let (h, rows) = read_csv(&dir.path().join("sweep_threshold.csv"));
    let speedup: Vec<f64> = column(&h, &rows, "speedup_ratio")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let mean: Vec<f64> = column(&h, &rows, "mean_exit_layer")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    check(speedup.len() == 101, "sweep row count")?;
    check(
        speedup.windows(2).all(|w| w[0] >= w[1]),
        "speedup column increased",
    )?;
    check(
        mean.windows(2).all(|w| w[0] <= w[1]),
        "mean exit layer decreased",
    )?;
    check(
        speedup[0] == 12.0 && speedup[100] == 1.0,
        "end rows are not N and 1",
    )?;
    Ok(format!(
        "{} traces x 101 alphas; sweep speedup {} -> {}",
        traces.len(),
        speedup[0],
        speedup[100]
    ))
}

fn c6_speedup_cases() -> Outcome {
    let mut all_final = ExitHistogram::new(12);
    all_final.record(12);
    let mut layer6 = ExitHistogram::new(12);
    for _ in 0..7 {
        layer6.record(6);
    }
    let mut mixed = ExitHistogram::new(12);
    for _ in 0..10 {
        mixed.record(3);
        mixed.record(12);
    }
    let cases = [(all_final, 1.0), (layer6, 2.0), (mixed, 1.6)];
    for (h, expect) in &cases {
        let s = speedup_ratio(h, 12).unwrap();
        check(
            (s - expect).abs() <= 1e-12,
            format!("speedup {s}, expected {expect}"),
        )?;
    }
    Ok("1.0, 2.0 and 1.6 exact to 1e-12".into())
}

fn small_trained_cascade() -> (ToyCascade, Vec<eesim_core::distill::SyntheticExample>) {
    let dims = CascadeDims {
        input: 8,
        hidden: 12,
        layers: 4,
        vocab: 10,
    };
    let task = ToyTask {
        input_dim: 8,
        vocab: 10,
        modes: 4,
        tokens_per_example: 3,
        ..Default::default()
    };
    let data = task.sample(16, 0.2, 0).unwrap();
    let mut m = ToyCascade::new(dims, 7).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: Some(8),
        schedule: LrSchedule::constant(0.2),
    };
    train_backbone(&mut m, &data, &cfg).unwrap();
    (m, data)
}

fn c7_gradients() -> Outcome {
    let start = Instant::now();
    let (m, data) = small_trained_cascade();
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    let mut objectives = vec![Objective::Finetune];
    objectives.extend(LossMix::ALL.map(Objective::Exit));
    for (k, obj) in objectives.into_iter().enumerate() {
        let r = gradient_check(&m, &data, obj, 100, k as u64).unwrap();
        check(
            r.max_abs_analytic > 1e-8,
            format!("{obj:?}: gradient is identically zero"),
        )?;
        check(
            r.max_relative_error < 1e-4,
            format!("{obj:?}: relative error {}", r.max_relative_error),
        )?;
        worst = worst.max(r.max_relative_error);
        probes += r.probes;
    }
    within(start, Duration::from_secs(30), "gradient checks")?;
    Ok(format!("{probes} probes, max relative error {worst:.2e}"))
}

fn c8_two_stage_contract() -> Outcome {
    let (mut m, data) = small_trained_cascade();
    let before = m.theta_bytes();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: Some(4),
        schedule: LrSchedule::constant(0.3),
    };
    train_exits(&mut m, &data, &cfg, LossMix::Both).unwrap();
    check(
        m.theta_bytes() == before,
        "backbone parameters changed during exit training",
    )?;

    for (i, l) in exit_losses(&m, &data).unwrap().iter().enumerate() {
        check(
            l.total.to_bits() == (l.ce + l.kl).to_bits(),
            format!("exit {}: total != ce + kl", i + 1),
        )?;
        check(l.kl >= 0.0, "negative KL at an exit")?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let v = rng.random_range(2..40);
        let scale = rng.random_range(0.1..30.0);
        let zp: Vec<f64> = (0..v)
            .map(|_| scale * (rng.random::<f64>() - 0.5))
            .collect();
        let zq: Vec<f64> = (0..v)
            .map(|_| scale * (rng.random::<f64>() - 0.5))
            .collect();
        let mut p = softmax(&zp);
        let q = softmax(&zq);
        if rng.random_bool(0.1) {
            // Zero-mass entries in p.
            p[0] = 0.0;
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
        }
        let kl = kl_divergence(&p, &q).unwrap();
        check(kl >= 0.0, format!("KL {kl} < 0"))?;
    }
    Ok("theta bit-identical, total == ce + kl, KL >= 0 on 10k pairs".into())
}

fn c9_ablation() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    cmd_ablation(&config_in(dir.path())).unwrap();
    let elapsed = start.elapsed();
    let (h, rows) = read_csv(&dir.path().join("ablation.csv"));
    let get = |name: &str| -> Vec<f64> {
        column(&h, &rows, name)
            .iter()
            .map(|s| s.parse().unwrap())
            .collect()
    };
    let (ce, kl, both) = (
        get("accuracy_ce_only"),
        get("accuracy_kl_only"),
        get("accuracy_both"),
    );
    let teacher = read_json(&dir.path().join("ablation_summary.json"))["result"]
        ["teacher_accuracy"]
        .as_f64()
        .unwrap();
    check(
        both[0] >= ce[0],
        format!("layer 1: both {} < ce-only {}", both[0], ce[0]),
    )?;
    let deepest = ce.len() - 2;
    let at = [ce[deepest], kl[deepest], both[deepest]];
    let spread =
        at.iter().cloned().fold(f64::MIN, f64::max) - at.iter().cloned().fold(f64::MAX, f64::min);
    check(
        spread <= DEEPEST_EXIT_EPSILON,
        format!("deepest-exit spread {spread} > {DEEPEST_EXIT_EPSILON}"),
    )?;
    let gap = at.iter().map(|a| teacher - a).fold(f64::MIN, f64::max);
    check(
        gap <= TEACHER_GAP_EPSILON,
        format!("teacher gap {gap} > {TEACHER_GAP_EPSILON}"),
    )?;
    check(
        elapsed < Duration::from_secs(300),
        format!("ablation took {elapsed:?}"),
    )?;
    Ok(format!(
        "layer 1 both {:.4} >= ce-only {:.4}; deepest-exit spread {spread:.4} <= {DEEPEST_EXIT_EPSILON}; {elapsed:?}",
        both[0], ce[0]
    ))
}

fn c10_distortion() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    cmd_compare_distortion(&config_in(dir.path())).unwrap();
    let result = read_json(&dir.path().join("compare_distortion.json"))["result"].clone();
    let mut notes = Vec::new();
    let mut alpha_star = Vec::new();
    for s in result.as_array().unwrap() {
        let sigma = f(&s["sigma"]);
        let reward_of = |name: &str| {
            s["policies"]
                .as_array()
                .unwrap()
                .iter()
                .find(|p| p["policy"] == name)
                .map(|p| f(&p["mean_reward"]))
                .unwrap()
        };
        let (fixed, adaptive) = (reward_of("fixed-0.6"), reward_of("adaptive"));
        if sigma > 0.0 {
            check(
                adaptive >= fixed,
                format!("sigma {sigma}: adaptive {adaptive} < fixed {fixed}"),
            )?;
            notes.push(format!("sigma {sigma}: {adaptive:.3} >= {fixed:.3}"));
        }
        alpha_star.push((sigma, f(&s["oracle_best_threshold"])));
    }
    let clean = alpha_star.iter().find(|(s, _)| *s == 0.0).unwrap().1;
    let heavy = alpha_star.iter().find(|(s, _)| *s == 2.0).unwrap().1;
    check(clean != heavy, format!("alpha* did not move: {clean}"))?;
    check(
        clean == COMMITTED_ALPHA_STAR_CLEAN && heavy == COMMITTED_ALPHA_STAR_SIGMA2,
        "alpha* changed",
    )?;
    within(start, Duration::from_secs(180), "comparison")?;
    Ok(format!("{}; alpha* {clean} -> {heavy}", notes.join(", ")))
}

fn c11_calibration() -> Outcome {
    let g = SyntheticConfidenceModel::default();
    let mut h = ExitHistogram::new(12);
    for (id, traces) in g.images().take(10_000) {
        h.extend(&run_caption(id, traces, 0.6, &g.shape(), 20).unwrap().tokens);
    }
    let s = speedup_ratio(&h, 12).unwrap();
    check(
        (1.5..=2.0).contains(&s),
        format!("speedup {s} outside [1.5, 2.0]"),
    )?;
    check(
        s.to_bits() == COMMITTED_FIXED_SPEEDUP.to_bits(),
        format!("speedup {s:?} != committed {COMMITTED_FIXED_SPEEDUP:?}"),
    )?;
    Ok(format!("speedup {s} over {} tokens", h.total()))
}

fn c12_serialization(run: &BanditRun) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.gen_traces.images = 300;
    cfg.generator.sigma = 1.0;
    let path = cmd_gen_traces(&cfg).unwrap().remove(0);
    let bytes = std::fs::read(&path).unwrap();
    let (header, records) = read_all(&path).unwrap();
    let copy = dir.path().join("copy.jsonl");
    write_traces(&copy, &header, &records).unwrap();
    check(
        std::fs::read(&copy).unwrap() == bytes,
        "trace file rewrite differs",
    )?;
    let g = SyntheticConfidenceModel::default().distort(1.0).unwrap();
    check(
        records
            .iter()
            .enumerate()
            .all(|(j, r)| r.tokens == g.caption(j as u64, 20)),
        "trace file does not reproduce the generator output",
    )?;

    let snap = std::fs::read_to_string(run.dir.path().join("bandit_state.json")).unwrap();
    let state = BanditState::from_json(&snap).unwrap();
    check(state.to_json().unwrap() == snap, "snapshot rewrite differs")?;
    check(state.t() == 100_000, "snapshot t")?;

    let bumped = bytes_with_version(&bytes, 2);
    let bad = dir.path().join("v2.jsonl");
    std::fs::write(&bad, bumped).unwrap();
    let mut c = config_in(dir.path());
    c.sweep.source = eesim::config::SweepSource::Traces;
    c.sweep.traces = Some(bad);
    let err = cmd_sweep_threshold(&c).unwrap_err();
    check(
        err.category() == "parse",
        format!("trace version mismatch gave {}", err.render()),
    )?;

    let mut v: Value = serde_json::from_str(&snap).unwrap();
    v["version"] = 2.into();
    let snap2 = v.to_string();
    let err = BanditState::from_json(&snap2).unwrap_err();
    check(
        eesim::CliError::from(err).category() == "parse",
        "snapshot version mismatch is not a parse error",
    )?;
    Ok(format!(
        "{} records and a snapshot round-trip; v2 files rejected",
        records.len()
    ))
}

fn bytes_with_version(bytes: &[u8], version: u32) -> Vec<u8> {
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let (head, rest) = text.split_once('\n').unwrap();
    let mut v: Value = serde_json::from_str(head).unwrap();
    v["version"] = version.into();
    format!("{v}\n{rest}").into_bytes()
}

fn main() {
    let start = Instant::now();
    let run = default_bandit_run();
    let criteria: Vec<Criterion> = vec![
        ("UCB convergence", Box::new(|| c1_ucb_convergence(&run))),
        ("regret bound", Box::new(|| c2_regret_bound(&run))),
        ("reward bounds", Box::new(|| c3_reward_bounds(&run))),
        ("exit-rule correctness", Box::new(c4_exit_rule)),
        ("threshold monotonicity", Box::new(c5_monotonicity)),
        ("speedup metric", Box::new(c6_speedup_cases)),
        ("distillation gradients", Box::new(c7_gradients)),
        (
            "two-stage training contract",
            Box::new(c8_two_stage_contract),
        ),
        ("ablation direction", Box::new(c9_ablation)),
        ("distortion adaptation", Box::new(c10_distortion)),
        ("calibration bracket", Box::new(c11_calibration)),
        ("serialization", Box::new(|| c12_serialization(&run))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        criteria.len() - failed,
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
