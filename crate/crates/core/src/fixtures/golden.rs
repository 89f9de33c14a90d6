//! The kitchen clean-up episode: a small database with human-phrased skill
//! names, scripted planner and critic rules, and the frozen trace they
//! produce.

use super::curriculum::{primitive_inventory, record, Curriculum, CurriculumError};
use super::worlds::kitchen;
use crate::critic::{LmCritic, OraclePerception};
use crate::engine::{ground, Components, EngineConfig, GroundingTrace};
use crate::lmclient::{RuleSpec, ScriptedLm, Tag};
use crate::retriever::{HashEmbedder, Retriever};
use crate::skilldb::SkillDatabase;
use crate::worldsim::{Environment, GoalCondition};
use std::sync::Arc;

pub const GOLDEN_INSTRUCTION: &str =
    "I need to clean up the kitchen. Store fruits in the kitchen cabinet.";
pub const GOLDEN_STEP_BUDGET: u32 = 60;

/// The recorded trace, one JSON object per line.
pub const GOLDEN_TRACE: &str = include_str!("../../assets/golden/kitchen-trace.jsonl");

const KC: &str = "kitchencabinet";

fn deliver(x: &str, r: &str) -> Vec<String> {
    vec![
        format!("walk {x}"),
        format!("grab {x}"),
        format!("walk {r}"),
        format!("put {x} {r}"),
    ]
}

fn open_deliver(x: &str, close: bool) -> Vec<String> {
    let mut v = vec![
        format!("walk {x}"),
        format!("grab {x}"),
        format!("walk {KC}"),
        format!("find {KC}"),
        format!("open {KC}"),
        format!("put {x} {KC}"),
    ];
    if close {
        v.push(format!("close {KC}"));
    }
    v
}

fn spoken(x: &str) -> &str {
    match x {
        "bellpepper" => "bell pepper",
        other => other,
    }
}

pub fn golden_curriculum() -> Curriculum {
    let mut c = Curriculum {
        primitives: primitive_inventory(&kitchen()),
        ..Default::default()
    };
    for x in ["bananas", "peach", "apple"] {
        c.add_owned(2, format!("put {x} in kitchen cabinet"), deliver(x, KC));
        c.add_owned(
            2,
            format!("open kitchen cabinet and put {x} in kitchen cabinet"),
            open_deliver(x, x != "bananas"),
        );
    }
    let mut place_apple = deliver("apple", KC);
    place_apple.push(format!("close {KC}"));
    c.add_owned(2, "place apple in kitchen cabinet", place_apple);
    for x in ["bananas", "peach", "apple", "salmon", "bellpepper"] {
        c.add_owned(
            2,
            format!("put {} in fridge", spoken(x)),
            deliver(x, "fridge"),
        );
    }
    c.add(
        2,
        "open kitchen cabinet",
        &["walk kitchencabinet", "open kitchencabinet"],
    );
    c.add(
        2,
        "close kitchen cabinet",
        &["walk kitchencabinet", "close kitchencabinet"],
    );

    c.add(
        3,
        "put fruit in kitchen cabinet",
        &[
            "open kitchen cabinet and put bananas in kitchen cabinet",
            "put apple in kitchen cabinet",
            "put peach in kitchen cabinet",
        ],
    );
    c.add(
        3,
        "put apple and peach in kitchen cabinet",
        &[
            "open kitchen cabinet and put apple in kitchen cabinet",
            "open kitchen cabinet and put peach in kitchen cabinet",
        ],
    );
    c.add(
        3,
        "store bananas and apple in kitchen cabinet",
        &[
            "open kitchen cabinet and put bananas in kitchen cabinet",
            "place apple in kitchen cabinet",
        ],
    );
    c.add(
        3,
        "put peach and bananas in fridge",
        &["put peach in fridge", "put bananas in fridge"],
    );
    c.add(
        3,
        "put peach and salmon in fridge",
        &["put peach in fridge", "put salmon in fridge"],
    );
    c.add(
        3,
        "put salmon and bell pepper in fridge",
        &["put salmon in fridge", "put bell pepper in fridge"],
    );

    c.add(
        4,
        "store fruit in kitchen",
        &[
            "put fruit in kitchen cabinet",
            "put salmon and bell pepper in fridge",
        ],
    );
    c.add(
        4,
        "put away fruit in kitchen cabinet and fridge",
        &[
            "store bananas and apple in kitchen cabinet",
            "put peach and salmon in fridge",
        ],
    );
    c.add(
        4,
        "store fruits in kitchen cabinet",
        &[
            "put apple and peach in kitchen cabinet",
            "put salmon and bell pepper in fridge",
        ],
    );
    c.add(
        4,
        "fridge food and fruit",
        &[
            "put salmon and bell pepper in fridge",
            "put peach and bananas in fridge",
        ],
    );
    c
}

pub fn build_golden_database() -> Result<SkillDatabase, CurriculumError> {
    record(&kitchen(), &golden_curriculum(), false)
}

pub fn golden_goals() -> Vec<GoalCondition> {
    ["bananas", "apple", "peach"]
        .into_iter()
        .map(|x| GoalCondition::Inside {
            object: x.into(),
            container: KC.into(),
        })
        .collect()
}

fn rule(tag: Tag, pattern: &str, response: &str) -> RuleSpec {
    RuleSpec {
        tag: Some(tag),
        pattern: pattern.into(),
        response: response.into(),
    }
}

/// Generator and task-retriever answers for the episode.
pub fn golden_planner_rules() -> Vec<RuleSpec> {
    let root = r"Task: I need to clean up the kitchen\. Store fruits in the kitchen cabinet\.\nskill steps: ";
    vec![
        rule(
            Tag::Generator,
            &format!(r"{root}1\.$"),
            "put fruit in kitchen cabinet",
        ),
        rule(
            Tag::Generator,
            r"Task: Open kitchen cabinet and put fruit in it\nskill steps: 1\.$",
            "open kitchen cabinet and put bananas in kitchen cabinet",
        ),
        rule(
            Tag::Generator,
            &format!(r"{root}1\. open kitchen cabinet and put bananas in kitchen cabinet 2\.$"),
            "place apple in kitchen cabinet",
        ),
        rule(
            Tag::Generator,
            &format!(
                r"{root}1\. open kitchen cabinet and put bananas in kitchen cabinet 2\. place apple in kitchen cabinet 3\.$"
            ),
            "put apple and peach in kitchen cabinet",
        ),
        rule(
            Tag::Generator,
            r"Task: Open the kitchen cabinet and put apple and peach in the kitchen cabinet\nskill steps: 1\.$",
            "open kitchen cabinet and put peach in kitchen cabinet",
        ),
        rule(
            Tag::Retriever,
            r"Skill: put fruit in kitchen cabinet\n",
            "Open kitchen cabinet and put fruit in it",
        ),
        rule(
            Tag::Retriever,
            r"Skill: put apple and peach in kitchen cabinet\n",
            "Open the kitchen cabinet and put apple and peach in the kitchen cabinet",
        ),
    ]
}

/// Critic answers: skills that need the closed cabinet are refused.
pub fn golden_critic_rules() -> Vec<RuleSpec> {
    vec![
        rule(
            Tag::Critic,
            r"(?s)kitchen cabinet is CLOSED.*current skill: put (fruit|apple and peach) in kitchen cabinet$",
            "Executable: no\nFeedback: kitchen cabinet is closed, you need to open the kitchen cabinet",
        ),
        rule(Tag::Critic, r"current skill: ", "Executable: yes\nFeedback: none"),
    ]
}

/// Runs the episode end to end with the scripted rules.
pub fn run_golden() -> GroundingTrace {
    let db = Arc::new(build_golden_database().expect("golden curriculum records"));
    let retriever =
        Retriever::new(db, Arc::new(HashEmbedder::default())).expect("golden retriever");
    let planner =
        ScriptedLm::from_specs("golden-planner", &golden_planner_rules()).expect("valid rules");
    let critic_lm =
        ScriptedLm::from_specs("golden-critic", &golden_critic_rules()).expect("valid rules");
    let perception = OraclePerception;
    let critic = LmCritic {
        lm: &critic_lm,
        perception: &perception,
    };
    let world = kitchen();
    let parts = Components {
        retriever: &retriever,
        planner: &planner,
        critic: &critic,
        training_reset: Some(&world),
    };
    let mut env = Environment::new(world.clone(), golden_goals(), GOLDEN_STEP_BUDGET);
    ground(
        GOLDEN_INSTRUCTION,
        &mut env,
        &parts,
        &EngineConfig::default(),
        None,
    )
}
