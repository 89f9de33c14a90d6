//! Deterministic household simulator.
//!
//! The world is a value: [`step`] takes a state and a primitive and returns
//! the successor state, so dry-runs are just runs on a clone. Objects live in
//! rooms and may rest in or on another object; anything inside a closed
//! container is invisible until the container is opened.

mod actions;
mod composite;
mod shift;

pub use actions::{
    step, Action, FailureReason, PrimitiveError, SkillPrimitive, StepFailure, StepResult,
};
pub use composite::{
    dry_run, execute_composite, expand_semantic, ground_truth_plan, run_primitives, CompositeError,
    CompositeOutcome,
};
pub use shift::{
    apply_shift, quantify_shift, Magnitude, ShiftDegree, ShiftError, ShiftKind, ShiftOutcome,
    ShiftQuantity,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Maximum number of objects the agent can carry.
pub const HAND_CAPACITY: usize = 2;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Properties {
    pub openable: bool,
    pub switchable: bool,
    pub graspable: bool,
    pub surface: bool,
    pub container: bool,
    pub sittable: bool,
}

impl Properties {
    pub fn is_receptacle(&self) -> bool {
        self.surface || self.container
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ObjState {
    Open,
    Closed,
    On,
    Off,
}

impl ObjState {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjState::Open => "OPEN",
            ObjState::Closed => "CLOSED",
            ObjState::On => "ON",
            ObjState::Off => "OFF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldObject {
    pub class: String,
    /// What perception reports for this object. Defaults to the name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// `None` while the object is held by the agent.
    pub room: Option<String>,
    /// Object this one rests in (containers) or on (surfaces).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub properties: Properties,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub room: String,
    #[serde(default)]
    pub near: BTreeSet<String>,
    #[serde(default)]
    pub holding: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sitting: Option<String>,
}

/// Full simulator truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldState {
    pub name: String,
    pub rooms: BTreeSet<String>,
    /// Undirected room connections, each stored with the smaller name first.
    pub doors: BTreeSet<(String, String)>,
    pub objects: BTreeMap<String, WorldObject>,
    pub agent: Agent,
    #[serde(default)]
    pub step_count: u64,
    #[serde(default)]
    pub rng_seed: u64,
}

/// What the agent perceives: visible object labels and their states.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub object_names: BTreeSet<String>,
    pub object_states: BTreeMap<String, ObjState>,
}

impl Observation {
    /// State strings in the "NAME is OPEN" form, sorted by name.
    pub fn state_lines(&self) -> Vec<String> {
        self.object_states
            .iter()
            .map(|(name, s)| format!("{name} is {}", s.as_str()))
            .collect()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("object {object}: {problem}")]
    Object { object: String, problem: String },
    #[error("agent: {0}")]
    Agent(String),
    #[error("containment cycle through {0}")]
    Cycle(String),
}

impl WorldState {
    pub fn connect(&mut self, a: &str, b: &str) {
        self.doors.insert(door(a, b));
    }

    pub fn connected(&self, a: &str, b: &str) -> bool {
        a == b || self.doors.contains(&door(a, b))
    }

    pub fn label_of<'a>(&'a self, name: &'a str) -> &'a str {
        self.objects
            .get(name)
            .and_then(|o| o.label.as_deref())
            .unwrap_or(name)
    }

    /// Closest closed container enclosing `name`, if any.
    pub fn closed_enclosure(&self, name: &str) -> Option<&str> {
        let mut cur = self.objects.get(name)?.parent.as_deref();
        while let Some(p) = cur {
            let obj = self.objects.get(p)?;
            if obj.properties.container && obj.open == Some(false) {
                return Some(p);
            }
            cur = obj.parent.as_deref();
        }
        None
    }

    pub fn is_held(&self, name: &str) -> bool {
        self.agent.holding.iter().any(|h| h == name)
    }

    /// Visible objects: held ones, plus everything in the agent's room that
    /// is not enclosed by a closed container.
    pub fn is_visible(&self, name: &str) -> bool {
        if self.is_held(name) {
            return true;
        }
        match self.objects.get(name) {
            Some(obj) => {
                obj.room.as_deref() == Some(self.agent.room.as_str())
                    && self.closed_enclosure(name).is_none()
            }
            None => false,
        }
    }

    pub fn observe(&self) -> Observation {
        let mut obs = Observation::default();
        for (name, obj) in &self.objects {
            if !self.is_visible(name) {
                continue;
            }
            let label = self.label_of(name).to_string();
            let state = match (obj.open, obj.power) {
                (Some(true), _) => Some(ObjState::Open),
                (Some(false), _) => Some(ObjState::Closed),
                (None, Some(true)) => Some(ObjState::On),
                (None, Some(false)) => Some(ObjState::Off),
                (None, None) => None,
            };
            if let Some(s) = state {
                obs.object_states.insert(label.clone(), s);
            }
            obs.object_names.insert(label);
        }
        obs
    }

    /// Digest of the canonical serialization.
    pub fn state_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("world state serializes");
        crate::sha256_hex(&bytes)
    }

    /// Digest of the physical situation, ignoring the step counter and seed.
    pub fn situation_hash(&self) -> String {
        let bytes = serde_json::to_vec(&(
            &self.name,
            &self.rooms,
            &self.doors,
            &self.objects,
            &self.agent,
        ))
        .expect("world state serializes");
        crate::sha256_hex(&bytes)
    }

    pub fn check(&self) -> Result<(), WorldError> {
        if !self.rooms.contains(&self.agent.room) {
            return Err(WorldError::Agent(format!(
                "unknown room {}",
                self.agent.room
            )));
        }
        if self.agent.holding.len() > HAND_CAPACITY {
            return Err(WorldError::Agent("holding more than two objects".into()));
        }
        for (name, obj) in &self.objects {
            let err = |problem: &str| WorldError::Object {
                object: name.clone(),
                problem: problem.to_string(),
            };
            if obj.properties.openable != obj.open.is_some() {
                return Err(err("open state present iff openable"));
            }
            if obj.properties.switchable != obj.power.is_some() {
                return Err(err("power state present iff switchable"));
            }
            if self.is_held(name) {
                if obj.room.is_some() || obj.parent.is_some() {
                    return Err(err("held object still placed"));
                }
                continue;
            }
            match &obj.room {
                Some(r) if self.rooms.contains(r) => {}
                _ => return Err(err("missing or unknown room")),
            }
            if let Some(p) = &obj.parent {
                let parent = self.objects.get(p).ok_or_else(|| err("unknown parent"))?;
                if !parent.properties.is_receptacle() {
                    return Err(err("parent is not a receptacle"));
                }
                if parent.room != obj.room {
                    return Err(err("parent in another room"));
                }
            }
            let mut seen = BTreeSet::new();
            let mut cur = Some(name.as_str());
            while let Some(c) = cur {
                if !seen.insert(c) {
                    return Err(WorldError::Cycle(name.clone()));
                }
                cur = self.objects.get(c).and_then(|o| o.parent.as_deref());
            }
        }
        Ok(())
    }
}

fn door(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// A goal predicate over the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalCondition {
    Inside { object: String, container: String },
    OnSurface { object: String, surface: String },
    State { object: String, state: ObjState },
    Sitting { furniture: String },
    Holding { object: String },
}

impl GoalCondition {
    pub fn holds(&self, w: &WorldState) -> bool {
        match self {
            GoalCondition::Inside { object, container }
            | GoalCondition::OnSurface {
                object,
                surface: container,
            } => {
                w.objects.get(object).and_then(|o| o.parent.as_deref()) == Some(container.as_str())
            }
            GoalCondition::State { object, state } => match w.objects.get(object) {
                Some(o) => match state {
                    ObjState::Open => o.open == Some(true),
                    ObjState::Closed => o.open == Some(false),
                    ObjState::On => o.power == Some(true),
                    ObjState::Off => o.power == Some(false),
                },
                None => false,
            },
            GoalCondition::Sitting { furniture } => {
                w.agent.sitting.as_deref() == Some(furniture.as_str())
            }
            GoalCondition::Holding { object } => w.is_held(object),
        }
    }
}

/// An evaluation task: goals plus the reference primitive sequence from the
/// canonical training start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub goal_conditions: Vec<GoalCondition>,
    pub ground_truth_sequence: Vec<String>,
    /// Skill whose grounded expansion defines the per-scenario ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_skill: Option<String>,
    pub step_budget: u32,
}

impl TaskSpec {
    pub fn goals_met(&self, w: &WorldState) -> usize {
        self.goal_conditions.iter().filter(|g| g.holds(w)).count()
    }
}

/// A live episode: the world, its goals and a primitive-attempt budget.
#[derive(Debug, Clone)]
pub struct Environment {
    pub state: WorldState,
    pub initial: WorldState,
    pub goals: Vec<GoalCondition>,
    pub step_budget: u32,
    pub attempts: u32,
}

impl Environment {
    pub fn new(state: WorldState, goals: Vec<GoalCondition>, step_budget: u32) -> Self {
        Self {
            initial: state.clone(),
            state,
            goals,
            step_budget,
            attempts: 0,
        }
    }

    pub fn observe(&self) -> Observation {
        self.state.observe()
    }

    pub fn goals_met(&self) -> usize {
        self.goals.iter().filter(|g| g.holds(&self.state)).count()
    }

    pub fn done(&self) -> bool {
        self.goals_complete() || self.attempts >= self.step_budget
    }

    pub fn goals_complete(&self) -> bool {
        !self.goals.is_empty() && self.goals_met() == self.goals.len()
    }

    /// Executes a skill (composite or primitive) against the live world.
    /// Primitives beyond the remaining step budget are not attempted.
    pub fn execute(
        &mut self,
        db: &crate::skilldb::SkillDatabase,
        semantic: &str,
    ) -> Result<CompositeOutcome, CompositeError> {
        let prims = expand_semantic(db, semantic)?;
        let remaining = self.step_budget.saturating_sub(self.attempts) as usize;
        let runnable = &prims[..prims.len().min(remaining)];
        let (next, mut outcome) = composite::run_primitives(&self.state, runnable);
        self.attempts += outcome.attempted() as u32;
        outcome.truncated = runnable.len() < prims.len() && outcome.failure.is_none();
        outcome.primitives = prims;
        self.state = next;
        Ok(outcome)
    }
}

/// Scenario-level reset: the base world, optionally shifted.
pub fn reset(
    base: &WorldState,
    shift: Option<(ShiftKind, Magnitude, u64)>,
    db: &crate::skilldb::SkillDatabase,
) -> Result<(WorldState, Observation), ShiftError> {
    let state = match shift {
        None => base.clone(),
        Some((kind, magnitude, seed)) => apply_shift(base, kind, Some(magnitude), seed, db)?.state,
    };
    let obs = state.observe();
    Ok((state, obs))
}
