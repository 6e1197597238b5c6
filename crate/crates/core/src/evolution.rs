//! The in-context evolutionary search engine: population initialization,
//! per-epoch role-played crossover/mutation through the LM operator,
//! top-U/bottom-V filtration, final selection with deterministic
//! tie-breaking, and convergence tracing.

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::ImportanceMethod;
use crate::error::{Error, Result};
use crate::fset::FeatureSet;
use crate::lmops::{
    build_few_shot_prompt, build_zero_shot_prompt, CallInfo, CallRecord, LmOperator, PoolEntry,
    PromptSpec, RoleSet, DEFAULT_ZERO_SHOT_ROLE,
};
use crate::models::{Evaluation, Evaluator};
use crate::seeding::{self, domain};
use crate::percent;

/// How many fresh attempts a failed LM call gets before its slot is skipped
/// for the epoch.
const REPROMPTS: usize = 2;

/// Where a candidate came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Classical(ImportanceMethod),
    ZeroShot,
    Role { role: String, epoch: usize },
    Custom(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Classical(m) => write!(f, "classical:{}", m.as_str()),
            Provenance::ZeroShot => write!(f, "zero_shot"),
            Provenance::Role { role, epoch } => write!(f, "role:{role}@{epoch}"),
            Provenance::Custom(label) => write!(f, "custom:{label}"),
        }
    }
}

/// A scored member of the pool.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub subset: FeatureSet,
    pub evaluation: Evaluation,
    pub provenance: Provenance,
}

/// The total order used everywhere candidates are ranked: validation
/// accuracy descending, then training accuracy ascending, then the canonical
/// subset order (smaller, then lexicographic). Total because pools never
/// hold duplicate subsets.
pub fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.evaluation
        .val_accuracy
        .total_cmp(&a.evaluation.val_accuracy)
        .then_with(|| {
            a.evaluation
                .train_accuracy
                .total_cmp(&b.evaluation.train_accuracy)
        })
        .then_with(|| a.subset.cmp(&b.subset))
}

/// The evolving population, unique by subset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pool {
    candidates: Vec<Candidate>,
}

impl Pool {
    pub fn new() -> Self {
        Pool::default()
    }

    /// Inserts unless the subset is already present (evaluations are
    /// identical on collision by Φ-purity, so the incumbent stays).
    pub fn insert(&mut self, candidate: Candidate) -> bool {
        if self.contains(&candidate.subset) {
            return false;
        }
        self.candidates.push(candidate);
        true
    }

    pub fn contains(&self, subset: &FeatureSet) -> bool {
        self.candidates.iter().any(|c| &c.subset == subset)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// Members sorted by the total candidate order, best first.
    pub fn sorted(&self) -> Vec<Candidate> {
        let mut out = self.candidates.clone();
        out.sort_by(candidate_order);
        out
    }

    pub fn best(&self) -> Option<Candidate> {
        self.candidates.iter().min_by(|a, b| candidate_order(a, b)).cloned()
    }

    /// Pool snapshot rendered for the few-shot prompt, percentages rounded.
    pub fn prompt_entries(&self, universe: &[String]) -> Vec<PoolEntry> {
        self.sorted()
            .iter()
            .map(|c| PoolEntry {
                feature_names: c.subset.names(universe).iter().map(|s| s.to_string()).collect(),
                train_pct: percent(c.evaluation.train_accuracy),
                val_pct: percent(c.evaluation.val_accuracy),
            })
            .collect()
    }
}

/// Final-selection strategies over the surviving pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Highest validation accuracy; ties go to the lowest training accuracy.
    ArgmaxVal,
    /// Uniform seeded draw over the top-U slice of the final pool.
    DecisionRandomized,
    /// Uniform seeded draw over that slice minus the argmax-val winner.
    DecisionRandomizedExcludingFirst,
}

impl SelectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMode::ArgmaxVal => "argmax_val",
            SelectionMode::DecisionRandomized => "decision_randomized",
            SelectionMode::DecisionRandomizedExcludingFirst => {
                "decision_randomized_excluding_first"
            }
        }
    }
}

/// Engine hyperparameters. Defaults: Y=5 zero-shot draws, keep the top 5 and
/// bottom 3 through 8 epochs of 10-fold CV with the 17 stock roles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub zero_shot_draws: usize,
    pub top_keep: usize,
    pub bottom_keep: usize,
    pub epochs: usize,
    pub n_folds: usize,
    pub roles: RoleSet,
    pub zero_shot_role: String,
    pub seed: u64,
    pub selection_mode: SelectionMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            zero_shot_draws: 5,
            top_keep: 5,
            bottom_keep: 3,
            epochs: 8,
            n_folds: 10,
            roles: RoleSet::default(),
            zero_shot_role: DEFAULT_ZERO_SHOT_ROLE.to_string(),
            seed: 42,
            selection_mode: SelectionMode::ArgmaxVal,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_keep < 1 {
            return Err(Error::config("top_keep must be >= 1"));
        }
        if self.epochs < 1 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.n_folds < 2 {
            return Err(Error::config("n_folds must be >= 2"));
        }
        if self.zero_shot_draws < 1 {
            return Err(Error::config("zero_shot_draws must be >= 1"));
        }
        if self.roles.is_empty() {
            return Err(Error::config("role set must not be empty"));
        }
        Ok(())
    }
}

/// Mean accuracies of the top-U slice after one epoch's filtration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub pool_size: usize,
}

/// One entry per completed epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
}

impl ConvergenceTrace {
    pub fn val_non_decreasing(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].val_accuracy >= w[0].val_accuracy)
    }
}

/// Accumulated prompt/response records for one run, written out as JSONL.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    records: Vec<CallRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn push(&mut self, record: CallRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[CallRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Everything a finished run returns: the selected candidate, the surviving
/// pool (itself a valuable resource), the convergence trace, and any
/// warnings raised along the way.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub winner: Candidate,
    pub pool: Pool,
    pub trace: ConvergenceTrace,
    pub warnings: Vec<String>,
}

/// Hands out global call indices so transcripts stay strictly ordered.
#[derive(Default)]
pub struct CallCounter {
    next: usize,
}

impl CallCounter {
    pub fn new() -> Self {
        CallCounter::default()
    }

    fn take(&mut self) -> usize {
        let index = self.next;
        self.next += 1;
        index
    }
}

/// One operator invocation plus parsing, retried up to [`REPROMPTS`] extra
/// times. Every attempt is logged; `None` means the slot is skipped.
#[allow(clippy::too_many_arguments)]
fn propose_subset(
    operator: &mut dyn LmOperator,
    transcript: &mut Transcript,
    counter: &mut CallCounter,
    universe: &[String],
    prompt: &str,
    phase: &str,
    epoch: Option<usize>,
    role: Option<&str>,
    seed_parts: &[u64],
) -> Option<FeatureSet> {
    for attempt in 0..=REPROMPTS {
        let index = counter.take();
        let mut parts = seed_parts.to_vec();
        parts.push(attempt as u64);
        let call = CallInfo {
            index,
            phase: phase.to_string(),
            epoch,
            role: role.map(str::to_string),
            seed: seeding::mix(&parts),
        };
        let mut record = CallRecord {
            call: index,
            phase: phase.to_string(),
            epoch,
            role: role.map(str::to_string),
            prompt: prompt.to_string(),
            response: String::new(),
            request: None,
            status: None,
            error: None,
        };
        match operator.respond(prompt, &call) {
            Ok(response) => {
                record.response = response.text.clone();
                record.request = response.request;
                record.status = response.status;
                match crate::lmops::parse_feature_set(&response.text, universe) {
                    Ok(subset) => {
                        transcript.push(record);
                        return Some(subset);
                    }
                    Err(e) => {
                        record.error = Some(e.to_string());
                        transcript.push(record);
                    }
                }
            }
            Err(e) => {
                record.error = Some(e.to_string());
                transcript.push(record);
            }
        }
    }
    None
}

/// Builds the initial pool: every init subset is evaluated and inserted,
/// then the zero-shot prompt is issued Y times and only the draw with the
/// highest validation accuracy joins the pool. If every draw fails, the run
/// proceeds on the init pool alone with a warning.
pub fn initialize(
    evaluator: &Evaluator,
    config: &EngineConfig,
    init: &[(Provenance, FeatureSet)],
    operator: &mut dyn LmOperator,
    transcript: &mut Transcript,
    counter: &mut CallCounter,
    warnings: &mut Vec<String>,
) -> Result<Pool> {
    if init.is_empty() {
        return Err(Error::config("initialization needs at least one subset"));
    }
    let mut pool = Pool::new();
    for (provenance, subset) in init {
        let evaluation = evaluator.evaluate(subset)?;
        pool.insert(Candidate {
            subset: subset.clone(),
            evaluation,
            provenance: provenance.clone(),
        });
    }

    let universe = evaluator.dataset().feature_names().to_vec();
    let prompt = build_zero_shot_prompt(&PromptSpec {
        task_description: evaluator.dataset().task_description().to_string(),
        feature_universe: universe.clone(),
        pool_snapshot: None,
        role: Some(config.zero_shot_role.clone()),
    })?;

    let mut draws: Vec<Candidate> = Vec::new();
    for draw in 0..config.zero_shot_draws {
        let proposed = propose_subset(
            operator,
            transcript,
            counter,
            &universe,
            &prompt,
            "zero_shot",
            None,
            Some(&config.zero_shot_role),
            &[config.seed, domain::ZERO_SHOT, draw as u64],
        );
        if let Some(subset) = proposed {
            let evaluation = evaluator.evaluate(&subset)?;
            draws.push(Candidate {
                subset,
                evaluation,
                provenance: Provenance::ZeroShot,
            });
        }
    }
    match draws.into_iter().min_by(|a, b| candidate_order(a, b)) {
        Some(best) => {
            pool.insert(best);
        }
        None => warnings.push(format!(
            "all {} zero-shot draws failed; continuing with the initial pool only",
            config.zero_shot_draws
        )),
    }
    Ok(pool)
}

/// Sorts by the total candidate order and keeps the first `top_keep` plus
/// the last `bottom_keep`; a pool no larger than their sum passes through
/// intact.
pub fn filtrate(pool: &Pool, top_keep: usize, bottom_keep: usize) -> Pool {
    let sorted = pool.sorted();
    let mut kept = Pool::new();
    if sorted.len() <= top_keep + bottom_keep {
        for c in sorted {
            kept.insert(c);
        }
        return kept;
    }
    for c in &sorted[..top_keep] {
        kept.insert(c.clone());
    }
    for c in &sorted[sorted.len() - bottom_keep..] {
        kept.insert(c.clone());
    }
    kept
}

fn trace_entry(pool: &Pool, epoch: usize, top_keep: usize) -> TraceEntry {
    let sorted = pool.sorted();
    let slice = &sorted[..top_keep.min(sorted.len())];
    let n = slice.len().max(1) as f64;
    TraceEntry {
        epoch,
        train_accuracy: slice.iter().map(|c| c.evaluation.train_accuracy).sum::<f64>() / n,
        val_accuracy: slice.iter().map(|c| c.evaluation.val_accuracy).sum::<f64>() / n,
        pool_size: pool.len(),
    }
}

/// Runs one evolution epoch: a single pool snapshot feeds every role's
/// few-shot prompt, each successful proposal is evaluated and inserted, and
/// the pool is filtrated. Individual role failures skip that role.
#[allow(clippy::too_many_arguments)]
pub fn evolve_epoch(
    pool: Pool,
    evaluator: &Evaluator,
    config: &EngineConfig,
    operator: &mut dyn LmOperator,
    transcript: &mut Transcript,
    counter: &mut CallCounter,
    epoch: usize,
) -> Result<(Pool, TraceEntry)> {
    let universe = evaluator.dataset().feature_names().to_vec();
    let snapshot = pool.prompt_entries(&universe);
    let mut pool = pool;
    for (role_index, role) in config.roles.roles().iter().enumerate() {
        let prompt = build_few_shot_prompt(&PromptSpec {
            task_description: evaluator.dataset().task_description().to_string(),
            feature_universe: universe.clone(),
            pool_snapshot: Some(snapshot.clone()),
            role: Some(role.clone()),
        })?;
        let proposed = propose_subset(
            operator,
            transcript,
            counter,
            &universe,
            &prompt,
            "epoch",
            Some(epoch),
            Some(role),
            &[config.seed, domain::ROLE, epoch as u64, role_index as u64],
        );
        if let Some(subset) = proposed {
            let evaluation = evaluator.evaluate(&subset)?;
            pool.insert(Candidate {
                subset,
                evaluation,
                provenance: Provenance::Role {
                    role: role.clone(),
                    epoch,
                },
            });
        }
    }
    let filtered = filtrate(&pool, config.top_keep, config.bottom_keep);
    let entry = trace_entry(&filtered, epoch, config.top_keep);
    Ok((filtered, entry))
}

/// Picks the run's winner from the final pool.
pub fn final_select(
    pool: &Pool,
    mode: SelectionMode,
    top_keep: usize,
    seed: u64,
) -> Result<Candidate> {
    let sorted = pool.sorted();
    if sorted.is_empty() {
        return Err(Error::config("cannot select from an empty pool"));
    }
    match mode {
        SelectionMode::ArgmaxVal => Ok(sorted[0].clone()),
        SelectionMode::DecisionRandomized => {
            let slice = &sorted[..top_keep.min(sorted.len())];
            let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(&[seed, domain::FINAL_SELECT]));
            Ok(slice[rng.random_range(0..slice.len())].clone())
        }
        SelectionMode::DecisionRandomizedExcludingFirst => {
            let slice = &sorted[..top_keep.min(sorted.len())];
            if slice.len() < 2 {
                return Err(Error::config(
                    "excluding-first selection needs at least 2 surviving candidates",
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(&[seed, domain::FINAL_SELECT]));
            Ok(slice[1 + rng.random_range(0..slice.len() - 1)].clone())
        }
    }
}

/// The full search: initialization, E epochs of role-played evolution, and
/// final selection. All randomness derives from `config.seed`.
pub fn run(
    evaluator: &Evaluator,
    config: &EngineConfig,
    init: &[(Provenance, FeatureSet)],
    operator: &mut dyn LmOperator,
    transcript: &mut Transcript,
) -> Result<RunOutcome> {
    config.validate()?;
    if evaluator.folds().n_folds() != config.n_folds {
        return Err(Error::config(format!(
            "config expects {}-fold CV but the evaluator carries {} folds",
            config.n_folds,
            evaluator.folds().n_folds()
        )));
    }
    let mut warnings = Vec::new();
    let mut counter = CallCounter::new();
    let mut pool = initialize(
        evaluator,
        config,
        init,
        operator,
        transcript,
        &mut counter,
        &mut warnings,
    )?;
    let mut trace = ConvergenceTrace::default();
    for epoch in 1..=config.epochs {
        let (next, entry) = evolve_epoch(
            pool,
            evaluator,
            config,
            operator,
            transcript,
            &mut counter,
            epoch,
        )?;
        pool = next;
        trace.entries.push(entry);
    }
    // Elitism makes the top-U mean monotone whenever the pool held at least
    // U members throughout; smaller growing pools can legitimately dip.
    debug_assert!(
        trace.entries.iter().any(|e| e.pool_size < config.top_keep)
            || trace.val_non_decreasing(),
        "top-U mean validation accuracy regressed: {trace:?}"
    );
    let winner = final_select(&pool, config.selection_mode, config.top_keep, config.seed)?;
    Ok(RunOutcome {
        winner,
        pool,
        trace,
        warnings,
    })
}
