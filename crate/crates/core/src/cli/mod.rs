//! Run configuration, the per-seed experiment pipeline, and the four
//! commands (`run`, `rank`, `baselines`, `replay`) tying the modules
//! together.

pub mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    feature_importances, select_by_importance, ImportanceMethod, SelectionPolicy,
};
use crate::error::{Error, Result};
use crate::evolution::{
    self, candidate_order, Candidate, EngineConfig, Provenance, Transcript,
};
use crate::fset::FeatureSet;
use crate::lmops::{
    HttpOperator, LmEndpoint, LmOperator, ReplayOperator, ScriptedOperator,
};
use crate::models::{holdout_accuracy, Evaluator, ModelKind, ModelSpec};
use crate::oracle::{self, RankTable};
use crate::percent;
use crate::seeding::{self, domain};
use crate::tabular::{
    impute_median, load_csv, smote_balance, stratified_folds, stratified_split, Dataset,
};
use report::{
    render_baselines_markdown, render_run_markdown, trace_csv, trace_rows, Aggregate,
    BaselineAggregateRow, BaselineRow, BaselineSeedReport, BaselinesReport, PoolRow, RunReport,
    SeedFailure, SeedReport,
};

fn default_true() -> bool {
    true
}

fn default_smote_k() -> usize {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![42, 43, 44, 45, 46]
}

fn default_test_fraction() -> f64 {
    0.3
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Downstream model selection with optional hyperparameter overrides; fields
/// left out fall back to the kind's defaults, and the model seed follows the
/// run seed unless pinned.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: Option<ModelKind>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub max_depth: Option<usize>,
    pub tree_count: Option<usize>,
    pub regularization: Option<f64>,
    pub boosting_rounds: Option<usize>,
    pub seed: Option<u64>,
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        self.kind.unwrap_or(ModelKind::LogisticRegression)
    }

    pub fn to_spec(&self, run_seed: u64) -> ModelSpec {
        let mut spec = ModelSpec::new(self.kind(), self.seed.unwrap_or(run_seed));
        if let Some(v) = self.learning_rate {
            spec.hyper.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            spec.hyper.epochs = v;
        }
        if let Some(v) = self.max_depth {
            spec.hyper.max_depth = Some(v);
        }
        if let Some(v) = self.tree_count {
            spec.hyper.tree_count = v;
        }
        if let Some(v) = self.regularization {
            spec.hyper.regularization = v;
        }
        if let Some(v) = self.boosting_rounds {
            spec.hyper.boosting_rounds = v;
        }
        spec
    }
}

/// Exactly one of `endpoint` or `script` must be set for `run`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    pub endpoint: Option<LmEndpoint>,
    pub script: Option<PathBuf>,
}

/// The single JSON configuration document every command consumes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub target: String,
    /// Task description handed to the LM; defaults to "predicting <target>".
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default = "default_true")]
    pub impute: bool,
    #[serde(default = "default_true")]
    pub smote: bool,
    #[serde(default = "default_smote_k")]
    pub smote_k: usize,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Build the exhaustive rank table per seed and attach ranks to reports.
    #[serde(default)]
    pub compute_ranks: bool,
    #[serde(default)]
    pub parallel_seeds: bool,
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        Self::from_json(&content)
    }

    pub fn task_description(&self) -> String {
        self.task
            .clone()
            .unwrap_or_else(|| format!("predicting {}", self.target))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if !(0.0 < self.test_fraction && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction must lie in (0, 1)"));
        }
        self.engine.validate()?;
        Ok(())
    }

    /// `run` additionally needs exactly one operator source.
    pub fn validate_operator(&self) -> Result<()> {
        match (&self.operator.endpoint, &self.operator.script) {
            (Some(_), Some(_)) => Err(Error::config(
                "configure either an endpoint or a script, not both",
            )),
            (None, None) => Err(Error::config(
                "configure an operator: an endpoint or a script",
            )),
            (Some(endpoint), None) => endpoint.validate(),
            (None, Some(_)) => Ok(()),
        }
    }
}

/// Everything one seed's pipeline produces before reporting: the smoted
/// training portion behind a caching evaluator, plus untouched test rows.
pub struct SeedContext {
    pub seed: u64,
    pub evaluator: Evaluator,
    pub test: Dataset,
}

/// load -> impute -> stratified test split -> SMOTE on the training portion
/// only -> folds. Balancing after the split keeps synthetic neighbors out of
/// the held-out rows.
pub fn prepare_seed(config: &RunConfig, seed: u64) -> Result<SeedContext> {
    let dataset =
        load_csv(&config.data, &config.target)?.with_task_description(config.task_description());
    let dataset = if config.impute {
        impute_median(&dataset)
    } else {
        dataset
    };
    if dataset.has_missing() {
        return Err(Error::data(
            "dataset still has missing values; enable imputation",
        ));
    }
    let (train_rows, test_rows) =
        stratified_split(&dataset, config.test_fraction, seeding::mix(&[seed, domain::TEST_SPLIT]))?;
    let test = dataset.select_rows(&test_rows);
    let mut train = dataset.select_rows(&train_rows);
    if config.smote {
        train = smote_balance(&train, config.smote_k, seeding::mix(&[seed, domain::SMOTE]))?;
    }
    let folds = stratified_folds(&train, config.engine.n_folds, seed)?;
    let evaluator = Evaluator::new(Arc::new(train), config.model.to_spec(seed), folds)?;
    Ok(SeedContext {
        seed,
        evaluator,
        test,
    })
}

/// The four classical initializer subsets, above-mean policy.
pub fn classical_init(ctx: &SeedContext) -> Result<Vec<(Provenance, FeatureSet)>> {
    let mut out = Vec::with_capacity(4);
    for (i, method) in ImportanceMethod::ALL.into_iter().enumerate() {
        let importances = feature_importances(
            ctx.evaluator.dataset(),
            method,
            ctx.evaluator.spec(),
            seeding::mix(&[ctx.seed, domain::BASELINE, i as u64]),
        )?;
        let subset = select_by_importance(&importances, SelectionPolicy::AboveMean)?;
        out.push((Provenance::Classical(method), subset));
    }
    Ok(out)
}

/// Reads a script file: a JSON array of feature-name arrays.
pub fn load_script(path: &Path, universe: &[String]) -> Result<Vec<FeatureSet>> {
    let content = std::fs::read_to_string(path)?;
    let names: Vec<Vec<String>> = serde_json::from_str(&content)?;
    let mut script = Vec::with_capacity(names.len());
    for entry in names {
        let mut indices = Vec::with_capacity(entry.len());
        for name in entry {
            let idx = universe
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| Error::config(format!("script names unknown feature {name:?}")))?;
            indices.push(idx);
        }
        if indices.is_empty() {
            return Err(Error::config("script entries must not be empty"));
        }
        script.push(FeatureSet::from_indices(indices));
    }
    if script.is_empty() {
        return Err(Error::config("script must contain at least one feature set"));
    }
    Ok(script)
}

fn transcript_filename(seed: u64) -> String {
    format!("transcript_seed{seed}.jsonl")
}

fn build_operator(config: &RunConfig, ctx: &SeedContext) -> Result<Box<dyn LmOperator>> {
    if let Some(endpoint) = &config.operator.endpoint {
        return Ok(Box::new(HttpOperator::new(endpoint.clone())));
    }
    if let Some(path) = &config.operator.script {
        let universe = ctx.evaluator.dataset().feature_names().to_vec();
        let script = load_script(path, &universe)?;
        return Ok(Box::new(ScriptedOperator::new(script, universe)?));
    }
    Err(Error::config("no operator configured"))
}

struct SeedRun {
    report: SeedReport,
    transcript: Transcript,
    rank_table: Option<RankTable>,
}

fn pool_rows(
    ctx: &SeedContext,
    pool: &[Candidate],
    rank_table: Option<&RankTable>,
) -> Result<Vec<PoolRow>> {
    let universe = ctx.evaluator.dataset().feature_names();
    let mut rows = Vec::with_capacity(pool.len());
    for candidate in pool {
        let test_accuracy =
            holdout_accuracy(ctx.evaluator.dataset(), &ctx.test, &candidate.subset, ctx.evaluator.spec())?;
        let (test_rank, val_rank) = match rank_table {
            Some(table) => {
                let (t, v) = oracle::rank_of(table, &candidate.subset)?;
                (Some(t), Some(v))
            }
            None => (None, None),
        };
        rows.push(PoolRow {
            features: candidate
                .subset
                .names(universe)
                .iter()
                .map(|s| s.to_string())
                .collect(),
            train_pct: percent(candidate.evaluation.train_accuracy),
            val_pct: percent(candidate.evaluation.val_accuracy),
            test_pct: percent(test_accuracy),
            test_rank,
            val_rank,
            provenance: candidate.provenance.to_string(),
        });
    }
    Ok(rows)
}

fn run_one_seed(
    config: &RunConfig,
    seed: u64,
    operator_override: Option<Box<dyn LmOperator>>,
) -> Result<SeedRun> {
    let ctx = prepare_seed(config, seed)?;
    let init = classical_init(&ctx)?;
    let mut operator = match operator_override {
        Some(op) => op,
        None => build_operator(config, &ctx)?,
    };
    let mut engine_config = config.engine.clone();
    engine_config.seed = seed;
    let mut transcript = Transcript::new();
    let outcome = evolution::run(
        &ctx.evaluator,
        &engine_config,
        &init,
        operator.as_mut(),
        &mut transcript,
    )?;
    let rank_table = if config.compute_ranks {
        Some(oracle::enumerate_and_rank(&ctx.evaluator, &ctx.test)?)
    } else {
        None
    };
    let pool = outcome.pool.sorted();
    let rows = pool_rows(&ctx, &pool, rank_table.as_ref())?;
    let winner_index = pool
        .iter()
        .position(|c| c.subset == outcome.winner.subset)
        .expect("winner is a pool member");
    Ok(SeedRun {
        report: SeedReport {
            seed,
            pool: rows,
            winner: winner_index,
            trace: trace_rows(&outcome.trace),
            transcript: transcript_filename(seed),
            warnings: outcome.warnings,
        },
        transcript,
        rank_table,
    })
}

fn aggregate_ranks(seeds: &[SeedReport]) -> Option<Aggregate> {
    if seeds.is_empty() || seeds.iter().any(|s| s.pool.iter().any(|r| r.val_rank.is_none())) {
        return None;
    }
    let n = seeds.len() as f64;
    let mut winner_test = 0.0;
    let mut winner_val = 0.0;
    let mut worst_test = 0.0;
    let mut worst_val = 0.0;
    for seed in seeds {
        let winner = &seed.pool[seed.winner];
        winner_test += winner.test_rank.unwrap() as f64;
        winner_val += winner.val_rank.unwrap() as f64;
        worst_test += seed.pool.iter().map(|r| r.test_rank.unwrap()).max().unwrap() as f64;
        worst_val += seed.pool.iter().map(|r| r.val_rank.unwrap()).max().unwrap() as f64;
    }
    Some(Aggregate {
        mean_winner_test_rank: winner_test / n,
        mean_winner_val_rank: winner_val / n,
        mean_worst_test_rank: worst_test / n,
        mean_worst_val_rank: worst_val / n,
    })
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn write_run_outputs(
    config: &RunConfig,
    report: &RunReport,
    runs: &[(u64, Transcript, Option<RankTable>)],
    write_transcripts: bool,
) -> Result<()> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    write_text(
        &dir.join("report.json"),
        &(serde_json::to_string_pretty(report)? + "\n"),
    )?;
    write_text(&dir.join("report.md"), &render_run_markdown(report))?;
    for seed_report in &report.seeds {
        write_text(
            &dir.join(format!("trace_seed{}.csv", seed_report.seed)),
            &trace_csv(&seed_report.trace),
        )?;
    }
    for (seed, transcript, rank_table) in runs {
        if write_transcripts {
            write_text(&dir.join(transcript_filename(*seed)), &transcript.to_jsonl())?;
        }
        if let Some(table) = rank_table {
            // feature names are identical across seeds; reload once per seed
            // is avoided by rendering from the table's own universe size
            let names = seed_feature_names(config)?;
            write_text(
                &dir.join(format!("ranktable_seed{seed}.csv")),
                &table.to_csv(&names),
            )?;
        }
    }
    Ok(())
}

fn seed_feature_names(config: &RunConfig) -> Result<Vec<String>> {
    let dataset = load_csv(&config.data, &config.target)?;
    Ok(dataset.feature_names().to_vec())
}

fn collect_seed_runs<F>(config: &RunConfig, run_seed_fn: F) -> (Vec<SeedRun>, Vec<SeedFailure>)
where
    F: Fn(u64) -> Result<SeedRun> + Sync,
{
    let results: Vec<(u64, Result<SeedRun>)> = if config.parallel_seeds {
        config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed_fn(seed)))
            .collect()
    } else {
        config
            .seeds
            .iter()
            .map(|&seed| (seed, run_seed_fn(seed)))
            .collect()
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    (runs, failures)
}

fn assemble_run_report(
    config: &RunConfig,
    runs: Vec<SeedRun>,
    failures: Vec<SeedFailure>,
    write_transcripts: bool,
) -> Result<RunReport> {
    let seeds: Vec<SeedReport> = runs.iter().map(|r| r.report.clone()).collect();
    let aggregate = aggregate_ranks(&seeds);
    let report = RunReport {
        data: config.data.display().to_string(),
        target: config.target.clone(),
        model: config.model.kind().as_str().to_string(),
        selection_mode: config.engine.selection_mode,
        seeds,
        aggregate,
        failures,
    };
    let run_artifacts: Vec<(u64, Transcript, Option<RankTable>)> = runs
        .into_iter()
        .map(|r| (r.report.seed, r.transcript, r.rank_table))
        .collect();
    write_run_outputs(config, &report, &run_artifacts, write_transcripts)?;
    Ok(report)
}

/// The full experiment per seed: pipeline, baselines, engine run, held-out
/// scoring and report emission. Per-seed failures are recorded in the report
/// and do not abort the remaining seeds.
pub fn cmd_run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    config.validate_operator()?;
    let (runs, failures) = collect_seed_runs(config, |seed| run_one_seed(config, seed, None));
    assemble_run_report(config, runs, failures, true)
}

/// Re-runs from recorded transcripts instead of a live operator; reports are
/// reproduced byte for byte. Transcript files themselves are not rewritten.
pub fn cmd_replay(config: &RunConfig, transcripts_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let (runs, failures) = collect_seed_runs(config, |seed| {
        let path = transcripts_dir.join(transcript_filename(seed));
        let content = std::fs::read_to_string(&path).map_err(|e| {
            Error::config(format!("cannot read transcript {}: {e}", path.display()))
        })?;
        let operator = ReplayOperator::from_jsonl(&content)?;
        run_one_seed(config, seed, Some(Box::new(operator)))
    });
    assemble_run_report(config, runs, failures, false)
}

/// Builds the exhaustive rank table per seed and writes one CSV each.
/// Refuses more than 21 features; warns above 15.
pub fn cmd_rank(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let names = seed_feature_names(config)?;
    if names.len() > oracle::HARD_FEATURE_CAP {
        return Err(Error::Oracle(format!(
            "{} features means {} subsets; enumeration beyond {} features is impractical",
            names.len(),
            2f64.powi(names.len() as i32) - 1.0,
            oracle::HARD_FEATURE_CAP
        )));
    }
    if names.len() > oracle::WARN_FEATURE_CAP {
        eprintln!(
            "warning: {} features -> {} subsets to evaluate; this will take a while",
            names.len(),
            (1u64 << names.len()) - 1
        );
    }
    std::fs::create_dir_all(&config.output_dir)?;
    let mut written = Vec::new();
    for &seed in &config.seeds {
        let ctx = prepare_seed(config, seed)?;
        let table = oracle::enumerate_and_rank(&ctx.evaluator, &ctx.test)?;
        let path = config.output_dir.join(format!("ranktable_seed{seed}.csv"));
        write_text(&path, &table.to_csv(&names))?;
        written.push(path);
    }
    Ok(written)
}

/// Scores the four classical methods plus the ensemble-of-FS strategy (the
/// method whose subset wins on validation accuracy).
pub fn cmd_baselines(config: &RunConfig) -> Result<BaselinesReport> {
    config.validate()?;
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for &seed in &config.seeds {
        match baselines_for_seed(config, seed) {
            Ok(rows) => seeds.push(BaselineSeedReport { seed, rows }),
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    let aggregate = baseline_aggregate(&seeds);
    let report = BaselinesReport {
        data: config.data.display().to_string(),
        target: config.target.clone(),
        model: config.model.kind().as_str().to_string(),
        seeds,
        aggregate,
        failures,
    };
    std::fs::create_dir_all(&config.output_dir)?;
    write_text(
        &config.output_dir.join("baselines.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    write_text(
        &config.output_dir.join("baselines.md"),
        &render_baselines_markdown(&report),
    )?;
    Ok(report)
}

fn baselines_for_seed(config: &RunConfig, seed: u64) -> Result<Vec<BaselineRow>> {
    let ctx = prepare_seed(config, seed)?;
    let init = classical_init(&ctx)?;
    let rank_table = if config.compute_ranks {
        Some(oracle::enumerate_and_rank(&ctx.evaluator, &ctx.test)?)
    } else {
        None
    };
    let universe = ctx.evaluator.dataset().feature_names();
    let mut rows = Vec::with_capacity(5);
    let mut candidates = Vec::new();
    for (provenance, subset) in &init {
        let evaluation = ctx.evaluator.evaluate(subset)?;
        let candidate = Candidate {
            subset: subset.clone(),
            evaluation,
            provenance: provenance.clone(),
        };
        let test_accuracy =
            holdout_accuracy(ctx.evaluator.dataset(), &ctx.test, subset, ctx.evaluator.spec())?;
        let (test_rank, val_rank) = match &rank_table {
            Some(table) => {
                let (t, v) = oracle::rank_of(table, subset)?;
                (Some(t), Some(v))
            }
            None => (None, None),
        };
        let method = match provenance {
            Provenance::Classical(m) => m.as_str().to_string(),
            other => other.to_string(),
        };
        rows.push(BaselineRow {
            method,
            features: subset.names(universe).iter().map(|s| s.to_string()).collect(),
            train_pct: percent(evaluation.train_accuracy),
            val_pct: percent(evaluation.val_accuracy),
            test_pct: percent(test_accuracy),
            test_rank,
            val_rank,
        });
        candidates.push(candidate);
    }
    // ensemble of FS: the classical method whose subset achieved the highest
    // validation accuracy
    let best_index = (0..candidates.len())
        .min_by(|&a, &b| candidate_order(&candidates[a], &candidates[b]))
        .expect("four methods present");
    let mut ensemble = rows[best_index].clone();
    ensemble.method = "ensemble_of_fs".to_string();
    rows.push(ensemble);
    Ok(rows)
}

fn baseline_aggregate(seeds: &[BaselineSeedReport]) -> Vec<BaselineAggregateRow> {
    if seeds.is_empty()
        || seeds
            .iter()
            .any(|s| s.rows.iter().any(|r| r.val_rank.is_none()))
    {
        return Vec::new();
    }
    let methods: Vec<String> = seeds[0].rows.iter().map(|r| r.method.clone()).collect();
    methods
        .into_iter()
        .map(|method| {
            let mut test_sum = 0.0;
            let mut val_sum = 0.0;
            for seed in seeds {
                let row = seed
                    .rows
                    .iter()
                    .find(|r| r.method == method)
                    .expect("method present per seed");
                test_sum += row.test_rank.unwrap() as f64;
                val_sum += row.val_rank.unwrap() as f64;
            }
            BaselineAggregateRow {
                method,
                mean_test_rank: test_sum / seeds.len() as f64,
                mean_val_rank: val_sum / seeds.len() as f64,
            }
        })
        .collect()
}

/// Runs the engine with explicit initial subsets instead of the classical
/// baselines; this is how robustness against poor initialization is
/// exercised. Exposed for programmatic use.
pub fn run_with_custom_init(
    config: &RunConfig,
    seed: u64,
    init: Vec<(Provenance, FeatureSet)>,
) -> Result<(SeedContext, evolution::RunOutcome, Transcript)> {
    let ctx = prepare_seed(config, seed)?;
    let mut operator = build_operator(config, &ctx)?;
    let mut engine_config = config.engine.clone();
    engine_config.seed = seed;
    let mut transcript = Transcript::new();
    let outcome = evolution::run(
        &ctx.evaluator,
        &engine_config,
        &init,
        operator.as_mut(),
        &mut transcript,
    )?;
    Ok((ctx, outcome, transcript))
}
