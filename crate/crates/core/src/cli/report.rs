//! Report structures and rendering. Reports are pure functions of
//! `(config, seed, transcript)`: no timestamps, no environment state, so a
//! rerun or a replay reproduces them byte for byte.

use serde::Serialize;

use crate::evolution::SelectionMode;
use crate::percent;

/// One pool member with its scores, held-out test accuracy and optional
/// oracle ranks. Percentages are rounded half-up to three decimals.
#[derive(Clone, Debug, Serialize)]
pub struct PoolRow {
    pub features: Vec<String>,
    pub train_pct: f64,
    pub val_pct: f64,
    pub test_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_rank: Option<usize>,
    pub provenance: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub train_pct: f64,
    pub val_pct: f64,
    pub pool_size: usize,
}

/// Everything reported for one seed of a run.
#[derive(Clone, Debug, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    /// Final pool sorted best validation accuracy first.
    pub pool: Vec<PoolRow>,
    /// Index of the selected candidate within `pool`.
    pub winner: usize,
    pub trace: Vec<TraceRow>,
    pub transcript: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Mean winner/worst ranks across seeds, present when oracle ranks were
/// computed.
#[derive(Clone, Debug, Serialize)]
pub struct Aggregate {
    pub mean_winner_test_rank: f64,
    pub mean_winner_val_rank: f64,
    pub mean_worst_test_rank: f64,
    pub mean_worst_val_rank: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub data: String,
    pub target: String,
    pub model: String,
    pub selection_mode: SelectionMode,
    pub seeds: Vec<SeedReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<SeedFailure>,
}

/// One classical-baseline row; the ensemble row carries the method that won
/// on validation accuracy.
#[derive(Clone, Debug, Serialize)]
pub struct BaselineRow {
    pub method: String,
    pub features: Vec<String>,
    pub train_pct: f64,
    pub val_pct: f64,
    pub test_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_rank: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaselineSeedReport {
    pub seed: u64,
    pub rows: Vec<BaselineRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaselineAggregateRow {
    pub method: String,
    pub mean_test_rank: f64,
    pub mean_val_rank: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaselinesReport {
    pub data: String,
    pub target: String,
    pub model: String,
    pub seeds: Vec<BaselineSeedReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub aggregate: Vec<BaselineAggregateRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<SeedFailure>,
}

pub(crate) fn fmt_pct(p: f64) -> String {
    format!("{p:.3}")
}

fn fmt_rank(rank: Option<usize>) -> String {
    rank.map_or_else(|| "-".to_string(), |r| r.to_string())
}

/// Renders `report.md`: one pool table per seed mirroring the accuracy/rank
/// table layout, plus the aggregate block.
pub fn render_run_markdown(report: &RunReport) -> String {
    let mut md = String::new();
    md.push_str("# Feature selection run\n\n");
    md.push_str(&format!(
        "- data: `{}` (target `{}`)\n- downstream model: `{}`\n- selection mode: `{}`\n\n",
        report.data,
        report.target,
        report.model,
        selection_mode_str(report.selection_mode),
    ));
    for seed in &report.seeds {
        md.push_str(&format!("## Seed {}\n\n", seed.seed));
        md.push_str("| # | features | train % | val % | test % | val rank | test rank | provenance |\n");
        md.push_str("|---|----------|---------|-------|--------|----------|-----------|------------|\n");
        for (i, row) in seed.pool.iter().enumerate() {
            let marker = if i == seed.winner { " (winner)" } else { "" };
            md.push_str(&format!(
                "| {}{} | {} | {} | {} | {} | {} | {} | {} |\n",
                i + 1,
                marker,
                row.features.join(", "),
                fmt_pct(row.train_pct),
                fmt_pct(row.val_pct),
                fmt_pct(row.test_pct),
                fmt_rank(row.val_rank),
                fmt_rank(row.test_rank),
                row.provenance,
            ));
        }
        md.push('\n');
        if !seed.trace.is_empty() {
            md.push_str("Convergence (top-U means): ");
            let parts: Vec<String> = seed
                .trace
                .iter()
                .map(|t| format!("epoch {} val {}%", t.epoch, fmt_pct(t.val_pct)))
                .collect();
            md.push_str(&parts.join("; "));
            md.push_str("\n\n");
        }
        for warning in &seed.warnings {
            md.push_str(&format!("> warning: {warning}\n\n"));
        }
    }
    if let Some(agg) = &report.aggregate {
        md.push_str("## Average ranks across seeds\n\n");
        md.push_str("| metric | value |\n|--------|-------|\n");
        md.push_str(&format!("| winner test rank | {:.1} |\n", agg.mean_winner_test_rank));
        md.push_str(&format!("| winner val rank | {:.1} |\n", agg.mean_winner_val_rank));
        md.push_str(&format!("| worst test rank | {:.1} |\n", agg.mean_worst_test_rank));
        md.push_str(&format!("| worst val rank | {:.1} |\n", agg.mean_worst_val_rank));
        md.push('\n');
    }
    for failure in &report.failures {
        md.push_str(&format!("> seed {} failed: {}\n", failure.seed, failure.error));
    }
    md
}

pub fn render_baselines_markdown(report: &BaselinesReport) -> String {
    let mut md = String::new();
    md.push_str("# Classical baselines\n\n");
    md.push_str(&format!(
        "- data: `{}` (target `{}`)\n- downstream model: `{}`\n\n",
        report.data, report.target, report.model,
    ));
    for seed in &report.seeds {
        md.push_str(&format!("## Seed {}\n\n", seed.seed));
        md.push_str("| method | features | train % | val % | test % | val rank | test rank |\n");
        md.push_str("|--------|----------|---------|-------|--------|----------|----------|\n");
        for row in &seed.rows {
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                row.method,
                row.features.join(", "),
                fmt_pct(row.train_pct),
                fmt_pct(row.val_pct),
                fmt_pct(row.test_pct),
                fmt_rank(row.val_rank),
                fmt_rank(row.test_rank),
            ));
        }
        md.push('\n');
    }
    if !report.aggregate.is_empty() {
        md.push_str("## Average ranks across seeds\n\n");
        md.push_str("| method | test rank | val rank |\n|--------|-----------|----------|\n");
        for row in &report.aggregate {
            md.push_str(&format!(
                "| {} | {:.1} | {:.1} |\n",
                row.method, row.mean_test_rank, row.mean_val_rank
            ));
        }
        md.push('\n');
    }
    for failure in &report.failures {
        md.push_str(&format!("> seed {} failed: {}\n", failure.seed, failure.error));
    }
    md
}

pub(crate) fn selection_mode_str(mode: SelectionMode) -> &'static str {
    mode.as_str()
}

/// CSV rendering of a convergence trace.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("epoch,train_pct,val_pct,pool_size\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch,
            fmt_pct(row.train_pct),
            fmt_pct(row.val_pct),
            row.pool_size
        ));
    }
    out
}

/// Converts a raw trace to report rows.
pub fn trace_rows(trace: &crate::evolution::ConvergenceTrace) -> Vec<TraceRow> {
    trace
        .entries
        .iter()
        .map(|e| TraceRow {
            epoch: e.epoch,
            train_pct: percent(e.train_accuracy),
            val_pct: percent(e.val_accuracy),
            pool_size: e.pool_size,
        })
        .collect()
}
