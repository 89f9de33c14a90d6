//! Scenario suites, episode orchestration and SR/CGC/Plan/Exec metrics.
//!
//! Metrics are pure functions of the episode runs, so a report can be
//! regenerated from stored traces.

mod run;
mod suites;

pub use run::{run_suite, CriticBackend, Harness, HarnessError, PlannerBackend, SuiteOutput};
pub use suites::{ci_suite, degree_suite, shift_suite, CI_SUITE_SEED};

use crate::engine::{GroundingTrace, Mode};
use crate::fixtures::InstructionType;
use crate::worldsim::{Magnitude, ShiftDegree, ShiftKind, TaskSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    /// `None` leaves the base world unchanged.
    #[serde(default)]
    pub magnitude: Option<Magnitude>,
    /// Fixed perturbation seed; by default the episode seed is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    pub base_world: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftSpec>,
    pub task: TaskSpec,
    pub instruction: String,
    pub instruction_type: InstructionType,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Semgro
}

impl ScenarioSpec {
    /// Column label in reports: the shift kind, or "None".
    pub fn shift_label(&self) -> String {
        match &self.shift {
            Some(ShiftSpec {
                kind,
                magnitude: Some(_),
                ..
            }) => kind.to_string(),
            _ => "None".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub name: String,
    /// Episode seeds; every scenario runs once per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub scenarios: Vec<ScenarioSpec>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Seed of one episode, from the suite seed and the scenario id only, so
/// adding scenarios never perturbs existing ones.
pub fn episode_seed(suite_seed: u64, scenario_id: &str) -> u64 {
    let digest = crate::sha256_hex(format!("{suite_seed}:{scenario_id}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

/// One scenario run under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRun {
    pub scenario: String,
    pub seed: u64,
    pub mode: Mode,
    pub instruction_type: InstructionType,
    pub shift: String,
    /// Shift degree of the episode's world relative to the training world.
    pub degree: ShiftDegree,
    pub goal_count: usize,
    pub ground_truth: Vec<String>,
    pub trace: Option<GroundingTrace>,
    /// Setup failure that kept the episode from running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub sr: f64,
    pub cgc: f64,
    pub plan: f64,
    pub exec: f64,
    pub generated: u64,
    pub executed_ok: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub mode: Mode,
    pub instruction_type: InstructionType,
    pub shift: String,
    pub metrics: Metrics,
}

/// Mean decomposition iterations for one shift degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub degree: ShiftDegree,
    pub episodes: usize,
    /// Mean NE verdicts of any cause ("Obs. & Dom.").
    pub all_cause: f64,
    /// Mean NE verdicts caused by the domain shift ("Dom.").
    pub domain_cause: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeError {
    pub scenario: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenarios: usize,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub by_mode: BTreeMap<Mode, Metrics>,
    pub cells: Vec<CellMetrics>,
    pub iterations: Vec<IterationRow>,
    pub errors: Vec<EpisodeError>,
    /// Trace digest per "scenario/seed".
    pub trace_hashes: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{scenario}/{seed}: trace has {trace} goal conditions, scenario declares {spec}")]
    GoalMismatch {
        scenario: String,
        seed: u64,
        trace: usize,
        spec: usize,
    },
}

const NOTES: &[&str] = &[
    "Plan compares primitive sequences (composites expanded) against fixture ground truth",
    "Exec counts every generated skill once per generation event",
    "episodes that failed during setup are listed under errors and excluded from the metrics",
];

/// Length of the common prefix of two sequences.
pub fn common_prefix(a: &[String], b: &[String]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Plan score of one episode in [0, 1].
pub fn plan_score(planned: &[String], ground_truth: &[String]) -> f64 {
    if ground_truth.is_empty() {
        return 1.0;
    }
    common_prefix(planned, ground_truth) as f64 / ground_truth.len() as f64
}

fn pct(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        100.0 * num / den
    }
}

fn aggregate<'a>(runs: impl Iterator<Item = (&'a EpisodeRun, &'a GroundingTrace)>) -> Metrics {
    let (mut n, mut success, mut cgc, mut plan, mut generated, mut ok) =
        (0usize, 0usize, 0.0, 0.0, 0u64, 0u64);
    for (run, trace) in runs {
        n += 1;
        let f = &trace.footer;
        if f.goals_total > 0 && f.goals_met == f.goals_total {
            success += 1;
        }
        cgc += if f.goals_total == 0 {
            0.0
        } else {
            f.goals_met as f64 / f.goals_total as f64
        };
        plan += plan_score(&trace.planned_primitives(), &run.ground_truth);
        generated += u64::from(f.counters.generated);
        ok += u64::from(f.counters.executed_ok);
    }
    let nf = n as f64;
    Metrics {
        episodes: n,
        sr: pct(success as f64, nf),
        cgc: pct(cgc, nf),
        plan: pct(plan, nf),
        exec: pct(ok as f64, generated as f64),
        generated,
        executed_ok: ok,
    }
}

fn sorted(runs: &[EpisodeRun]) -> Vec<&EpisodeRun> {
    let mut v: Vec<&EpisodeRun> = runs.iter().collect();
    v.sort_by(|a, b| (&a.scenario, a.seed).cmp(&(&b.scenario, b.seed)));
    v
}

/// Mean iterations per shift degree over critic-guided episodes.
pub fn iteration_stats(runs: &[EpisodeRun]) -> Vec<IterationRow> {
    ShiftDegree::ALL
        .into_iter()
        .map(|degree| {
            let counters: Vec<_> = sorted(runs)
                .into_iter()
                .filter(|r| r.degree == degree && r.mode.uses_critic())
                .filter_map(|r| r.trace.as_ref().map(|t| t.footer.counters))
                .collect();
            let n = counters.len() as f64;
            let mean = |f: &dyn Fn(&crate::engine::IterationCounters) -> u32| {
                if counters.is_empty() {
                    0.0
                } else {
                    counters.iter().map(|c| f64::from(f(c))).sum::<f64>() / n
                }
            };
            IterationRow {
                degree,
                episodes: counters.len(),
                all_cause: mean(&|c| c.ne_all),
                domain_cause: mean(&|c| c.ne_domain),
            }
        })
        .collect()
}

/// SR, CGC, Plan and Exec per mode and per (mode, instruction type, shift)
/// cell, plus iteration statistics. Reduction runs in (scenario, seed)
/// order, so the result does not depend on the order of `runs`.
pub fn compute_metrics(runs: &[EpisodeRun]) -> Result<MetricsReport, MetricsError> {
    let runs_sorted = sorted(runs);
    let mut errors = Vec::new();
    let mut ok: Vec<(&EpisodeRun, &GroundingTrace)> = Vec::new();
    let mut trace_hashes = BTreeMap::new();
    for r in &runs_sorted {
        match &r.trace {
            Some(t) => {
                if t.footer.goals_total != r.goal_count {
                    return Err(MetricsError::GoalMismatch {
                        scenario: r.scenario.clone(),
                        seed: r.seed,
                        trace: t.footer.goals_total,
                        spec: r.goal_count,
                    });
                }
                trace_hashes.insert(format!("{}/{}", r.scenario, r.seed), t.trace_hash());
                ok.push((r, t));
            }
            None => errors.push(EpisodeError {
                scenario: r.scenario.clone(),
                seed: r.seed,
                message: r.error.clone().unwrap_or_else(|| "no trace".into()),
            }),
        }
    }
    let mut by_mode = BTreeMap::new();
    let mut cells = Vec::new();
    for mode in Mode::ALL {
        let of_mode: Vec<_> = ok.iter().filter(|(r, _)| r.mode == mode).copied().collect();
        if of_mode.is_empty() {
            continue;
        }
        by_mode.insert(mode, aggregate(of_mode.iter().copied()));
        let mut keys: Vec<(InstructionType, String)> = of_mode
            .iter()
            .map(|(r, _)| (r.instruction_type, r.shift.clone()))
            .collect();
        keys.sort();
        keys.dedup();
        for (instruction_type, shift) in keys {
            let metrics = aggregate(
                of_mode
                    .iter()
                    .filter(|(r, _)| r.instruction_type == instruction_type && r.shift == shift)
                    .copied(),
            );
            cells.push(CellMetrics {
                mode,
                instruction_type,
                shift,
                metrics,
            });
        }
    }
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    seeds.sort();
    seeds.dedup();
    let mut scenarios: Vec<&str> = runs.iter().map(|r| r.scenario.as_str()).collect();
    scenarios.sort();
    scenarios.dedup();
    Ok(MetricsReport {
        scenarios: scenarios.len(),
        episodes: runs.len(),
        seeds,
        by_mode,
        cells,
        iterations: iteration_stats(runs),
        errors,
        trace_hashes,
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn digest(&self) -> String {
        crate::sha256_hex(self.to_json().as_bytes())
    }

    /// Grid per mode: rows are instruction types, columns shift kinds,
    /// cells SR/CGC/Plan. Followed by per-mode totals and iteration means.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut shifts: Vec<&str> = self.cells.iter().map(|c| c.shift.as_str()).collect();
        shifts.sort_by_key(|s| (*s != "None", *s));
        shifts.dedup();
        for (mode, total) in &self.by_mode {
            let _ = writeln!(out, "mode {mode} (SR/CGC/Plan)");
            let _ = write!(out, "{:<14}", "");
            for s in &shifts {
                let _ = write!(out, " {s:>17}");
            }
            out.push('\n');
            for it in InstructionType::ALL {
                let row: Vec<_> = shifts
                    .iter()
                    .map(|s| {
                        self.cells
                            .iter()
                            .find(|c| c.mode == *mode && c.instruction_type == it && c.shift == *s)
                    })
                    .collect();
                if row.iter().all(Option::is_none) {
                    continue;
                }
                let _ = write!(out, "{:<14}", it.as_str());
                for c in row {
                    let cell = match c {
                        Some(c) => format!(
                            "{:.1}/{:.1}/{:.1}",
                            c.metrics.sr, c.metrics.cgc, c.metrics.plan
                        ),
                        None => "-".into(),
                    };
                    let _ = write!(out, " {cell:>17}");
                }
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "{:<14} SR {:.1}  CGC {:.1}  Plan {:.1}  Exec {:.1}  ({} episodes)\n",
                "total", total.sr, total.cgc, total.plan, total.exec, total.episodes
            );
        }
        let _ = write!(out, "{:<14}", "iterations");
        for row in &self.iterations {
            let _ = write!(out, " {:>9}", row.degree.to_string());
        }
        out.push('\n');
        for (label, pick) in [("Obs. & Dom.", true), ("Dom.", false)] {
            let _ = write!(out, "{label:<14}");
            for row in &self.iterations {
                let v = if pick {
                    row.all_cause
                } else {
                    row.domain_cause
                };
                let cell = if row.episodes == 0 {
                    "-".to_string()
                } else {
                    format!("{v:.2}")
                };
                let _ = write!(out, " {cell:>9}");
            }
            out.push('\n');
        }
        if !self.errors.is_empty() {
            let _ = writeln!(out, "{} episodes failed to start", self.errors.len());
        }
        out
    }
}
