use super::household::household_database;
use super::worlds::house;
use crate::worldsim::{ground_truth_plan, GoalCondition, ObjState, TaskSpec};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstructionType {
    AbstractNoun,
    AbstractVerb,
    Structured,
    LongHorizon,
}

impl InstructionType {
    pub const ALL: [InstructionType; 4] = [
        InstructionType::AbstractNoun,
        InstructionType::AbstractVerb,
        InstructionType::Structured,
        InstructionType::LongHorizon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InstructionType::AbstractNoun => "abstract-noun",
            InstructionType::AbstractVerb => "abstract-verb",
            InstructionType::Structured => "structured",
            InstructionType::LongHorizon => "long-horizon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for InstructionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A task together with one phrasing per instruction type.
#[derive(Debug, Clone)]
pub struct TaskFixture {
    pub spec: TaskSpec,
    pub instructions: [(InstructionType, &'static str); 4],
}

impl TaskFixture {
    pub fn instruction(&self, kind: InstructionType) -> &'static str {
        self.instructions
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, s)| *s)
            .expect("every instruction type is present")
    }
}

pub const STEP_BUDGET: u32 = 80;

fn on(o: &str, s: &str) -> GoalCondition {
    GoalCondition::OnSurface {
        object: o.into(),
        surface: s.into(),
    }
}

fn inside(o: &str, c: &str) -> GoalCondition {
    GoalCondition::Inside {
        object: o.into(),
        container: c.into(),
    }
}

fn task(
    name: &str,
    reference: &str,
    goals: Vec<GoalCondition>,
    phrasings: [&'static str; 4],
) -> TaskFixture {
    let db = household_database();
    let (prims, complete) =
        ground_truth_plan(&house(), &db, reference).expect("reference skill is in the database");
    assert!(
        complete,
        "reference skill {reference} grounds from the house reset"
    );
    TaskFixture {
        spec: TaskSpec {
            name: name.to_string(),
            goal_conditions: goals,
            ground_truth_sequence: prims.iter().map(|p| p.to_string()).collect(),
            reference_skill: Some(reference.to_string()),
            step_budget: STEP_BUDGET,
        },
        instructions: [
            (InstructionType::AbstractNoun, phrasings[0]),
            (InstructionType::AbstractVerb, phrasings[1]),
            (InstructionType::Structured, phrasings[2]),
            (InstructionType::LongHorizon, phrasings[3]),
        ],
    }
}

/// The five household tasks. Goal predicates are authored for this
/// simulator; the task names follow the published scenario table.
pub fn household_tasks() -> Vec<TaskFixture> {
    vec![
        task(
            "fruits-on-kitchentable",
            "put fruits on kitchentable",
            vec![
                on("bananas", "kitchentable"),
                on("peach", "kitchentable"),
                on("apple", "kitchentable"),
            ],
            [
                "Grab and put various fruits on the kitchentable.",
                "Arrange the fruits on the kitchentable.",
                "Grab bananas, peach and apple and put them on the kitchentable.",
                "Guests are coming for breakfast. Put the fruits on the kitchentable.",
            ],
        ),
        task(
            "tv-on-sofa",
            "watch tv while sitting on sofa",
            vec![
                GoalCondition::State {
                    object: "tv".into(),
                    state: ObjState::On,
                },
                GoalCondition::Sitting {
                    furniture: "sofa".into(),
                },
            ],
            [
                "Watch television on the couch.",
                "Chill on sofa with tv.",
                "Grab the remotecontrol, turn on the tv and sit on the sofa.",
                "I finished household chores. Relax on sofa and watch tv.",
            ],
        ),
        task(
            "fruits-in-kitchencabinet",
            "put fruits in kitchencabinet",
            vec![
                inside("bananas", "kitchencabinet"),
                inside("peach", "kitchencabinet"),
                inside("apple", "kitchencabinet"),
            ],
            [
                "Put the fruit in the cupboard.",
                "Tidy away the fruits into the kitchencabinet.",
                "Grab fruits and put them in the kitchencabinet.",
                "I need to clean up the kitchen. Store fruits in the kitchen cabinet.",
            ],
        ),
        task(
            "fruits-in-fridge",
            "put fruits in fridge",
            vec![inside("peach", "fridge"), inside("plum", "fridge")],
            [
                "Put food in refrigerator.",
                "Chill the fruits in the fridge.",
                "Put the peach and the plum in the fridge.",
                "The kids messed up the kitchen. Put the fruits in the fridge.",
            ],
        ),
        task(
            "book-on-sofa",
            "read book on sofa",
            vec![
                GoalCondition::Holding {
                    object: "book".into(),
                },
                GoalCondition::Sitting {
                    furniture: "sofa".into(),
                },
            ],
            [
                "Relax on bunk with book.",
                "Unwind on the sofa with something to read.",
                "Pick up the book and sit on the sofa.",
                "I am tired after a long day. Take a book and sit on the sofa.",
            ],
        ),
    ]
}

pub fn household_task(name: &str) -> Option<TaskFixture> {
    household_tasks().into_iter().find(|t| t.spec.name == name)
}
