//! Hand-built episode fixtures for the metric oracle.

#![allow(dead_code)]

use groundwork::engine::{
    EngineConfig, ExecutionRecord, FrameKind, FrameSnapshot, GroundingTrace, IterationCounters,
    Mode, Outcome, TraceFooter, TraceHeader, TraceStep, TRACE_SCHEMA_VERSION,
};
use groundwork::evalharness::EpisodeRun;
use groundwork::fixtures::InstructionType;
use groundwork::planner::MatchKind;
use groundwork::worldsim::ShiftDegree;

pub const TOL: f64 = 1e-9;

pub fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

pub struct Fixture {
    pub name: &'static str,
    /// Primitive expansion per executed skill.
    pub executed: Vec<Vec<&'static str>>,
    pub ground_truth: Vec<&'static str>,
    pub generated: u32,
    pub goals: (usize, usize),
}

pub fn step(i: usize, prims: &[&str]) -> TraceStep {
    TraceStep {
        step: i,
        frame: FrameSnapshot {
            instruction: "task".into(),
            kind: FrameKind::Root,
            depth: 0,
            history: Vec::new(),
        },
        stack_size: 0,
        retrieved: Vec::new(),
        examples: Vec::new(),
        candidates: Vec::new(),
        lower_candidates: Vec::new(),
        generated: format!("skill {i}"),
        raw_output: format!("skill {i}"),
        matched_by: MatchKind::Exact,
        verdict: None,
        refinement: None,
        execution: Some(ExecutionRecord {
            primitives: s(prims),
            executed: prims.len(),
            success: true,
            failure: None,
            truncated: false,
        }),
        returned_to_parent: false,
        state_before: String::new(),
        state_after: String::new(),
        counters: IterationCounters::default(),
    }
}

pub fn run(
    f: &Fixture,
    scenario: &str,
    mode: Mode,
    kind: InstructionType,
    shift: &str,
) -> EpisodeRun {
    let counters = IterationCounters {
        generated: f.generated,
        executed_ok: f.executed.len() as u32,
        ne_all: f.generated - f.executed.len() as u32,
        ne_observational: f.generated - f.executed.len() as u32,
        ..Default::default()
    };
    let trace = GroundingTrace {
        header: TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            instruction: f.name.into(),
            config: EngineConfig::default(),
            initial_state: String::new(),
        },
        steps: f
            .executed
            .iter()
            .enumerate()
            .map(|(i, p)| step(i, p))
            .collect(),
        footer: TraceFooter {
            outcome: if f.goals.0 == f.goals.1 && f.goals.1 > 0 {
                Outcome::Done
            } else {
                Outcome::BudgetExhausted {
                    reason: groundwork::engine::StopReason::Iterations,
                }
            },
            counters,
            goals_met: f.goals.0,
            goals_total: f.goals.1,
            primitive_attempts: 0,
            final_state: String::new(),
        },
    };
    EpisodeRun {
        scenario: scenario.into(),
        seed: 0,
        mode,
        instruction_type: kind,
        shift: shift.into(),
        degree: ShiftDegree::None,
        goal_count: f.goals.1,
        ground_truth: s(&f.ground_truth),
        trace: Some(trace),
        error: None,
    }
}

pub const GT: [&str; 4] = [
    "walk apple",
    "grab apple",
    "walk fridge",
    "put apple fridge",
];

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "perfect",
            executed: vec![
                vec!["walk apple", "grab apple"],
                vec!["walk fridge", "put apple fridge"],
            ],
            ground_truth: GT.to_vec(),
            generated: 2,
            goals: (2, 2),
        },
        Fixture {
            name: "diverges after two",
            executed: vec![vec!["walk apple", "grab apple"], vec!["walk sink"]],
            ground_truth: GT.to_vec(),
            generated: 4,
            goals: (1, 2),
        },
        Fixture {
            name: "nothing executed",
            executed: vec![],
            ground_truth: GT.to_vec(),
            generated: 3,
            goals: (0, 3),
        },
        Fixture {
            name: "overshoots",
            executed: vec![GT.to_vec(), vec!["close fridge"]],
            ground_truth: GT.to_vec(),
            generated: 2,
            goals: (1, 1),
        },
        Fixture {
            name: "wrong first step",
            executed: vec![vec!["walk sink"], GT.to_vec()],
            ground_truth: GT.to_vec(),
            generated: 3,
            goals: (2, 2),
        },
        Fixture {
            name: "no ground truth no goals",
            executed: vec![vec!["walk tv"]],
            ground_truth: vec![],
            generated: 1,
            goals: (0, 0),
        },
    ]
}

/// (SR, CGC, Plan, Exec) of one episode, worked out by hand.
pub const EXPECTED: [(f64, f64, f64, f64); 6] = [
    (100.0, 100.0, 100.0, 100.0),
    (0.0, 50.0, 50.0, 50.0),
    (0.0, 0.0, 0.0, 0.0),
    (100.0, 100.0, 100.0, 100.0),
    (100.0, 100.0, 0.0, 200.0 / 3.0),
    (0.0, 0.0, 100.0, 100.0),
];

/// Independent reference: per-episode values straight from the fixture.
pub fn oracle(fs: &[&Fixture]) -> (f64, f64, f64, f64) {
    let n = fs.len() as f64;
    let mut sr = 0.0;
    let mut cgc = 0.0;
    let mut plan = 0.0;
    let (mut ok, mut generated) = (0.0, 0.0);
    for f in fs {
        let (met, total) = f.goals;
        if total > 0 && met == total {
            sr += 1.0;
        }
        if total > 0 {
            cgc += met as f64 / total as f64;
        }
        let planned: Vec<&str> = f.executed.iter().flatten().copied().collect();
        let mut lcp = 0;
        while lcp < planned.len()
            && lcp < f.ground_truth.len()
            && planned[lcp] == f.ground_truth[lcp]
        {
            lcp += 1;
        }
        plan += if f.ground_truth.is_empty() {
            1.0
        } else {
            lcp as f64 / f.ground_truth.len() as f64
        };
        ok += f.executed.len() as f64;
        generated += f64::from(f.generated);
    }
    let exec = if generated == 0.0 {
        0.0
    } else {
        100.0 * ok / generated
    };
    (100.0 * sr / n, 100.0 * cgc / n, 100.0 * plan / n, exec)
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < TOL
}
