use std::path::PathBuf;

use eesim_core::bandit::{
    expected_reward_oracle, regret_bound, regret_curve, run_adaptive, ActionSet, AdaptiveRun,
    BanditState, OracleTable, RewardParams,
};
use eesim_core::synth::{image_id, SyntheticConfidenceModel};
use serde::Serialize;

use super::PolicyStats;
use crate::config::{ExperimentConfig, Policy};
use crate::error::{CliError, CliResult};
use crate::output::{cell, opt_cell, reads, Sink};

/// Rounds at the end of a run used for the "settled" arm frequencies.
pub const FINAL_WINDOW: usize = 10_000;

fn oracle(
    config: &ExperimentConfig,
    model: &SyntheticConfidenceModel,
    actions: &ActionSet,
    params: &RewardParams,
) -> CliResult<OracleTable> {
    let m = model.with_seed(config.bandit.oracle_seed);
    Ok(expected_reward_oracle(
        &m,
        actions,
        params,
        config.bandit.oracle_samples,
    )?)
}

fn adaptive_run(
    model: &SyntheticConfidenceModel,
    state: &mut BanditState,
    params: &RewardParams,
    max_len: usize,
    start_image: u64,
    tokens: u64,
) -> CliResult<AdaptiveRun> {
    let images = (start_image..).map(|j| (image_id(j), model.image_traces(j)));
    Ok(run_adaptive(
        images,
        state,
        params,
        &model.shape(),
        max_len,
        Some(tokens),
    )?)
}

fn frequencies(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            }
        })
        .collect()
}

/// Most pulled arm, ties to the smallest threshold.
fn most_pulled(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Serialize)]
pub struct BanditSummary {
    pub rounds: u64,
    pub total_rounds: u64,
    pub oracle: OracleTable,
    pub oracle_best_threshold: f64,
    pub max_gap: f64,
    pub empirical_best_threshold: f64,
    pub arm_frequencies: Vec<f64>,
    pub final_window: usize,
    pub final_window_frequencies: Vec<f64>,
    pub final_window_best_share: f64,
    pub q: Vec<f64>,
    pub pulls: Vec<u64>,
    pub final_pseudo_regret: f64,
    pub regret_per_round: f64,
    pub regret_bound: f64,
    pub policy: PolicyStats,
}

pub fn cmd_bandit(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    config.validate_bandit_cmd()?;
    let actions = config.actions()?;
    let params = config.reward_params(config.reward.lambda)?;
    let model = &config.generator;
    let mut state = match &config.bandit.resume {
        Some(path) => {
            let s = BanditState::from_json(&reads(path)?)?;
            if s.actions() != &actions || s.gamma() != config.bandit.gamma {
                return Err(CliError::Config(format!(
                    "snapshot {} was saved with a different action set or gamma",
                    path.display()
                )));
            }
            s
        }
        None => BanditState::new(actions.clone(), config.bandit.gamma)?,
    };

    let table = oracle(config, model, &actions, &params)?;
    let run = adaptive_run(
        model,
        &mut state,
        &params,
        config.max_caption_length,
        config.bandit.start_image,
        config.bandit.tokens,
    )?;
    let regret = regret_curve(&run.log, &table)?;
    let k = actions.len();
    let counts = run.log.arm_counts(k, None);
    let window = run.log.arm_counts(k, Some(FINAL_WINDOW));
    let best = table.best_arm();
    let final_regret = regret.last().copied().unwrap_or(0.0);
    let window_len = window.iter().sum::<u64>() as usize;
    let summary = BanditSummary {
        rounds: run.log.len() as u64,
        total_rounds: state.t(),
        oracle_best_threshold: table.best_threshold(),
        max_gap: table.max_gap(),
        empirical_best_threshold: actions.threshold(most_pulled(&counts)),
        arm_frequencies: frequencies(&counts),
        final_window: window_len,
        final_window_frequencies: frequencies(&window),
        final_window_best_share: frequencies(&window)[best],
        q: state.q().to_vec(),
        pulls: state.pulls().to_vec(),
        final_pseudo_regret: final_regret,
        regret_per_round: final_regret / run.log.len().max(1) as f64,
        regret_bound: regret_bound(&table, config.bandit.gamma, run.log.len() as u64),
        policy: PolicyStats::of(&run, model.layers)?,
        oracle: table,
    };

    let sink = Sink::new("bandit", config)?;
    let log = sink.csv_with("bandit_log.csv", |buf| {
        Ok(run.log.write_csv(buf, Some(&regret))?)
    })?;
    let json = sink.json("bandit_summary.json", &summary)?;
    let snapshot = sink.write("bandit_state.json", state.to_json()?.as_bytes())?;
    Ok(vec![log, json, snapshot])
}

#[derive(Debug, Serialize)]
pub struct PolicyResult {
    pub policy: String,
    #[serde(flatten)]
    pub stats: PolicyStats,
}

#[derive(Debug, Serialize)]
pub struct SigmaResult {
    pub sigma: f64,
    pub oracle_best_threshold: f64,
    pub oracle_expected_reward: Vec<f64>,
    pub fixed_threshold_expected_reward: Option<f64>,
    pub policies: Vec<PolicyResult>,
}

fn policy_name(policy: Policy, fixed: f64) -> String {
    match policy {
        Policy::Fixed => format!("fixed-{fixed}"),
        Policy::Adaptive => "adaptive".to_string(),
    }
}

/// Runs one policy on the image streams of `model`. The fixed policy is a
/// single-arm bandit, so both policies consume identical token streams.
fn run_policy(
    config: &ExperimentConfig,
    model: &SyntheticConfidenceModel,
    policy: Policy,
    params: &RewardParams,
) -> CliResult<AdaptiveRun> {
    let actions = match policy {
        Policy::Fixed => ActionSet::new(vec![config.distortion.fixed_threshold])?,
        Policy::Adaptive => config.actions()?,
    };
    let mut state = BanditState::new(actions, config.bandit.gamma)?;
    adaptive_run(
        model,
        &mut state,
        params,
        config.max_caption_length,
        0,
        config.distortion.tokens,
    )
}

pub fn cmd_compare_distortion(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    config.validate_distortion()?;
    let actions = config.actions()?;
    let params = config.reward_params(config.reward.lambda)?;
    let fixed = config.distortion.fixed_threshold;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &sigma in &config.distortion.sigmas {
        let model = config.generator.distort(sigma)?;
        let table = oracle(config, &model, &actions, &params)?;
        let mut policies = Vec::new();
        for &policy in &config.distortion.policies {
            let run = run_policy(config, &model, policy, &params)?;
            let stats = PolicyStats::of(&run, model.layers)?;
            let name = policy_name(policy, fixed);
            rows.push(vec![
                cell(sigma),
                name.clone(),
                cell(stats.speedup),
                opt_cell(stats.token_accuracy),
                cell(stats.mean_reward),
                cell(stats.mean_exit_layer),
            ]);
            policies.push(PolicyResult {
                policy: name,
                stats,
            });
        }
        results.push(SigmaResult {
            sigma,
            oracle_best_threshold: table.best_threshold(),
            fixed_threshold_expected_reward: actions
                .index_of(fixed)
                .map(|a| table.expected_reward[a]),
            oracle_expected_reward: table.expected_reward,
            policies,
        });
    }
    let sink = Sink::new("compare-distortion", config)?;
    let csv = sink.csv(
        "compare_distortion.csv",
        &[
            "sigma",
            "policy",
            "speedup",
            "token_accuracy",
            "mean_reward",
            "mean_exit_layer",
        ],
        &rows,
    )?;
    let json = sink.json("compare_distortion.json", &results)?;
    Ok(vec![csv, json])
}

#[derive(Debug, Serialize)]
pub struct LambdaResult {
    pub lambda: f64,
    pub oracle_best_threshold: f64,
    pub oracle_speedup: f64,
    pub oracle_accuracy: Option<f64>,
    pub oracle_most_accurate_threshold: Option<f64>,
    pub adaptive: PolicyStats,
}

pub fn cmd_lambda_sweep(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    config.validate_lambda_sweep()?;
    let actions = config.actions()?;
    let model = &config.generator;
    let mut results = Vec::new();
    for &lambda in &config.lambda_sweep.lambdas {
        let params = config.reward_params(lambda)?;
        let table = oracle(config, model, &actions, &params)?;
        let mut state = BanditState::new(actions.clone(), config.bandit.gamma)?;
        let run = adaptive_run(
            model,
            &mut state,
            &params,
            config.max_caption_length,
            0,
            config.lambda_sweep.tokens,
        )?;
        let best = table.best_arm();
        results.push(LambdaResult {
            lambda,
            oracle_best_threshold: table.best_threshold(),
            oracle_speedup: table.speedup(model.layers)[best],
            oracle_accuracy: table.accuracy.as_ref().map(|a| a[best]),
            oracle_most_accurate_threshold: table.most_accurate_arm().map(|a| actions.threshold(a)),
            adaptive: PolicyStats::of(&run, model.layers)?,
        });
    }
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                cell(r.lambda),
                cell(r.adaptive.speedup),
                opt_cell(r.adaptive.token_accuracy),
                cell(r.adaptive.mean_exit_layer),
                cell(r.oracle_best_threshold),
                cell(r.oracle_speedup),
                opt_cell(r.oracle_accuracy),
            ]
        })
        .collect();
    let sink = Sink::new("lambda-sweep", config)?;
    let csv = sink.csv(
        "lambda_sweep.csv",
        &[
            "lambda",
            "speedup",
            "token_accuracy",
            "mean_exit_layer",
            "oracle_best_threshold",
            "oracle_speedup",
            "oracle_accuracy",
        ],
        &rows,
    )?;
    let json = sink.json("lambda_sweep.json", &results)?;
    Ok(vec![csv, json])
}
