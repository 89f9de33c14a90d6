//! Built-in scenario suites over the household fixtures.

use super::{ScenarioSpec, ShiftSpec, SuiteSpec};
use crate::engine::Mode;
use crate::fixtures::{household_task, household_tasks, InstructionType, TaskFixture};
use crate::worldsim::{Magnitude, ShiftKind};

pub const CI_SUITE_SEED: u64 = 7;

fn scenario(
    world: &str,
    shift: Option<(ShiftKind, Magnitude)>,
    task: &TaskFixture,
    kind: InstructionType,
    mode: Mode,
) -> ScenarioSpec {
    let shift_part = match shift {
        Some((k, m)) => format!("{k}-{}", m.as_str()),
        None => "none".into(),
    };
    ScenarioSpec {
        id: format!(
            "{world}-{shift_part}-{}-{}-{}",
            task.spec.name,
            kind.as_str(),
            mode.as_str()
        ),
        base_world: world.to_string(),
        shift: shift.map(|(kind, magnitude)| ShiftSpec {
            kind,
            magnitude: Some(magnitude),
            seed: None,
        }),
        task: task.spec.clone(),
        instruction: task.instruction(kind).to_string(),
        instruction_type: kind,
        mode,
    }
}

/// 2 worlds x 3 shift kinds x 2 tasks x 2 instruction types, Medium
/// shifts, critic-guided mode.
pub fn ci_suite() -> SuiteSpec {
    let tasks: Vec<TaskFixture> = ["fruits-on-kitchentable", "book-on-sofa"]
        .iter()
        .map(|n| household_task(n).expect("fixture task"))
        .collect();
    let mut scenarios = Vec::new();
    for world in ["house", "apartment"] {
        for kind in ShiftKind::ALL {
            for task in &tasks {
                for it in [InstructionType::Structured, InstructionType::LongHorizon] {
                    scenarios.push(scenario(
                        world,
                        Some((kind, Magnitude::Medium)),
                        task,
                        it,
                        Mode::Semgro,
                    ));
                }
            }
        }
    }
    SuiteSpec {
        name: "ci".into(),
        seeds: vec![CI_SUITE_SEED],
        scenarios,
    }
}

/// Every household task and instruction type in the house under each shift
/// kind at `magnitude`, once per mode. All modes see the same shifted world.
pub fn shift_suite(magnitude: Magnitude, modes: &[Mode]) -> SuiteSpec {
    let mut scenarios = Vec::new();
    for mode in modes {
        for kind in ShiftKind::ALL {
            for task in household_tasks() {
                for it in InstructionType::ALL {
                    let mut s = scenario("house", Some((kind, magnitude)), &task, it, *mode);
                    let shared = s.id.trim_end_matches(mode.as_str()).to_string();
                    if let Some(shift) = &mut s.shift {
                        shift.seed = Some(super::episode_seed(0, &shared));
                    }
                    scenarios.push(s);
                }
            }
        }
    }
    SuiteSpec {
        name: format!("shift-{}", magnitude.as_str()),
        seeds: vec![0],
        scenarios,
    }
}

/// Twenty scenarios (task x instruction type) per shift degree from none to
/// large, cycling through the shift kinds.
pub fn degree_suite() -> SuiteSpec {
    let mut scenarios = Vec::new();
    let magnitudes = [
        None,
        Some(Magnitude::Small),
        Some(Magnitude::Medium),
        Some(Magnitude::Large),
    ];
    for magnitude in magnitudes {
        let mut i = 0;
        for task in household_tasks() {
            for it in InstructionType::ALL {
                let shift = magnitude.map(|m| (ShiftKind::ALL[i % 3], m));
                scenarios.push(scenario("house", shift, &task, it, Mode::Semgro));
                i += 1;
            }
        }
    }
    SuiteSpec {
        name: "degrees".into(),
        seeds: vec![0],
        scenarios,
    }
}
