//! The primitive action set and its preconditions and effects.

use super::{WorldState, HAND_CAPACITY};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Find,
    Grab,
    Walk,
    Sit,
    Put,
    Open,
    Close,
    SwitchOn,
    SwitchOff,
}

impl Action {
    pub const ALL: [Action; 9] = [
        Action::Find,
        Action::Grab,
        Action::Walk,
        Action::Sit,
        Action::Put,
        Action::Open,
        Action::Close,
        Action::SwitchOn,
        Action::SwitchOff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Find => "find",
            Action::Grab => "grab",
            Action::Walk => "walk",
            Action::Sit => "sit",
            Action::Put => "put",
            Action::Open => "open",
            Action::Close => "close",
            Action::SwitchOn => "switchon",
            Action::SwitchOff => "switchoff",
        }
    }

    pub fn parse(word: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.as_str() == word)
    }
}

/// One primitive skill, e.g. `put bananas kitchencabinet`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkillPrimitive {
    pub action: Action,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("empty primitive")]
    Empty,
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("{action} expects {expected} object(s), got {got}")]
    Arity {
        action: &'static str,
        expected: usize,
        got: usize,
    },
}

impl SkillPrimitive {
    pub fn new(action: Action, object: &str) -> Self {
        Self {
            action,
            object: object.to_string(),
            target: None,
        }
    }

    pub fn put(object: &str, target: &str) -> Self {
        Self {
            action: Action::Put,
            object: object.to_string(),
            target: Some(target.to_string()),
        }
    }

    /// Parses `"<action> <obj> [<target>]"`. Filler words such as "to" and
    /// "in" are ignored so "walk to apple" and "put apple in fridge" parse.
    pub fn parse(text: &str) -> Result<Self, PrimitiveError> {
        const FILLER: [&str; 6] = ["to", "in", "on", "into", "onto", "the"];
        let words: Vec<String> = crate::text::normalize(text)
            .split(' ')
            .filter(|w| !w.is_empty() && !FILLER.contains(w))
            .map(str::to_string)
            .collect();
        let (head, args) = words.split_first().ok_or(PrimitiveError::Empty)?;
        let action =
            Action::parse(head).ok_or_else(|| PrimitiveError::UnknownAction(head.clone()))?;
        let expected = if action == Action::Put { 2 } else { 1 };
        if args.len() != expected {
            return Err(PrimitiveError::Arity {
                action: action.as_str(),
                expected,
                got: args.len(),
            });
        }
        Ok(Self {
            action,
            object: args[0].clone(),
            target: args.get(1).cloned(),
        })
    }
}

impl fmt::Display for SkillPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.action.as_str(), self.object)?;
        if let Some(t) = &self.target {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

/// Why a primitive could not run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    UnknownObject {
        object: String,
    },
    Hidden {
        object: String,
        container: String,
    },
    Unreachable {
        object: String,
        room: String,
        via: Option<String>,
    },
    NotVisible {
        object: String,
    },
    NotNear {
        object: String,
    },
    NotGraspable {
        object: String,
    },
    AlreadyHolding {
        object: String,
    },
    HandsFull,
    NotHolding {
        object: String,
    },
    NotReceptacle {
        object: String,
    },
    ContainerClosed {
        object: String,
    },
    NotOpenable {
        object: String,
    },
    AlreadyOpen {
        object: String,
    },
    AlreadyClosed {
        object: String,
    },
    NotSwitchable {
        object: String,
    },
    AlreadyOn {
        object: String,
    },
    AlreadyOff {
        object: String,
    },
    DoorOpen {
        object: String,
    },
    NotSittable {
        object: String,
    },
    AlreadySitting {
        object: String,
    },
}

impl FailureReason {
    /// Primitives that would clear this failure, in order. Empty when the
    /// failing step should simply be dropped or no local fix exists.
    pub fn remedy(&self) -> Vec<SkillPrimitive> {
        use FailureReason::*;
        match self {
            Hidden { container, .. } => vec![
                SkillPrimitive::new(Action::Walk, container),
                SkillPrimitive::new(Action::Open, container),
            ],
            Unreachable { via: Some(v), .. } => vec![SkillPrimitive::new(Action::Walk, v)],
            NotNear { object } | NotVisible { object } => {
                vec![SkillPrimitive::new(Action::Walk, object)]
            }
            NotHolding { object } => vec![
                SkillPrimitive::new(Action::Walk, object),
                SkillPrimitive::new(Action::Grab, object),
            ],
            ContainerClosed { object } => vec![SkillPrimitive::new(Action::Open, object)],
            DoorOpen { object } => vec![SkillPrimitive::new(Action::Close, object)],
            _ => Vec::new(),
        }
    }

    /// Whether the failing step can be skipped because its effect already holds.
    pub fn already_satisfied(&self) -> bool {
        use FailureReason::*;
        matches!(
            self,
            AlreadyOpen { .. }
                | AlreadyClosed { .. }
                | AlreadyOn { .. }
                | AlreadyOff { .. }
                | AlreadyHolding { .. }
                | AlreadySitting { .. }
        )
    }

    /// Natural-language feedback, using perception labels.
    pub fn describe(&self, w: &WorldState) -> String {
        use FailureReason::*;
        let l = |n: &str| w.label_of(n).to_string();
        match self {
            UnknownObject { object } => format!("there is no {object} here"),
            Hidden { object, container } => format!(
                "{} is inside the {} which is closed, you need to open the {}",
                l(object),
                l(container),
                l(container)
            ),
            Unreachable { object, room, via } => match via {
                Some(v) => format!(
                    "{} is in the {room} which cannot be reached from here, you need to walk to the {} first",
                    l(object),
                    l(v)
                ),
                None => format!("{} is in the {room} which cannot be reached from here", l(object)),
            },
            NotVisible { object } => format!("{} is not visible, you need to walk to the {}", l(object), l(object)),
            NotNear { object } => format!("you are not near the {}, you need to walk to the {}", l(object), l(object)),
            NotGraspable { object } => format!("{} cannot be grabbed", l(object)),
            AlreadyHolding { object } => format!("you are already holding the {}, you do not need to grab the {}", l(object), l(object)),
            HandsFull => "both hands are full, you need to put something down".to_string(),
            NotHolding { object } => format!("you are not holding the {}, you need to grab the {}", l(object), l(object)),
            NotReceptacle { object } => format!("nothing can be placed on the {}", l(object)),
            ContainerClosed { object } => format!("{} is closed, you need to open the {}", l(object), l(object)),
            NotOpenable { object } => format!("{} cannot be opened", l(object)),
            AlreadyOpen { object } => format!("{} is already open, you do not need to open the {}", l(object), l(object)),
            AlreadyClosed { object } => format!("{} is already closed, you do not need to close the {}", l(object), l(object)),
            NotSwitchable { object } => format!("{} cannot be switched", l(object)),
            AlreadyOn { object } => format!("{} is already on, you do not need to turn on the {}", l(object), l(object)),
            AlreadyOff { object } => format!("{} is already off, you do not need to turn off the {}", l(object), l(object)),
            DoorOpen { object } => format!("{} is open, you need to close the {}", l(object), l(object)),
            NotSittable { object } => format!("you cannot sit on the {}", l(object)),
            AlreadySitting { object } => format!("you are already sitting on the {}, you do not need to sit on the {}", l(object), l(object)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFailure {
    pub primitive: SkillPrimitive,
    pub reason: FailureReason,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    Success(WorldState),
    Failure(StepFailure),
}

impl StepResult {
    pub fn is_success(&self) -> bool {
        matches!(self, StepResult::Success(_))
    }
}

/// Applies one primitive. Pure: the input state is never modified.
pub fn step(state: &WorldState, prim: &SkillPrimitive) -> StepResult {
    match check(state, prim) {
        Err(reason) => StepResult::Failure(StepFailure {
            primitive: prim.clone(),
            message: reason.describe(state),
            reason,
        }),
        Ok(()) => {
            let mut next = state.clone();
            apply(&mut next, prim);
            next.step_count += 1;
            StepResult::Success(next)
        }
    }
}

/// Object that makes `obj` reachable from the agent's room, if any.
fn reach_via(w: &WorldState, room: &str) -> Option<String> {
    // a room adjacent to both the agent's room and the target room
    let here = &w.agent.room;
    let mid = w
        .rooms
        .iter()
        .find(|r| *r != here && *r != room && w.connected(here, r) && w.connected(r, room))?;
    w.objects
        .iter()
        .find(|(n, o)| {
            o.room.as_deref() == Some(mid.as_str())
                && o.parent.is_none()
                && w.closed_enclosure(n).is_none()
        })
        .map(|(n, _)| n.clone())
}

fn check(w: &WorldState, p: &SkillPrimitive) -> Result<(), FailureReason> {
    use FailureReason::*;
    let name = p.object.clone();
    let obj = w.objects.get(&name).ok_or(UnknownObject {
        object: name.clone(),
    })?;
    let near = w.agent.near.contains(&name);
    let in_room = obj.room.as_deref() == Some(w.agent.room.as_str());
    let visible_here = || -> Result<(), FailureReason> {
        if w.is_held(&name) {
            return Ok(());
        }
        if let Some(c) = w.closed_enclosure(&name) {
            return Err(Hidden {
                object: name.clone(),
                container: c.to_string(),
            });
        }
        if !in_room {
            return Err(NotVisible {
                object: name.clone(),
            });
        }
        Ok(())
    };
    match p.action {
        Action::Walk => {
            if w.is_held(&name) {
                return Ok(());
            }
            if let Some(c) = w.closed_enclosure(&name) {
                return Err(Hidden {
                    object: name.clone(),
                    container: c.to_string(),
                });
            }
            let room = obj.room.clone().unwrap_or_default();
            if !w.connected(&w.agent.room, &room) {
                let via = reach_via(w, &room);
                return Err(Unreachable {
                    object: name,
                    room,
                    via,
                });
            }
        }
        Action::Find => {
            if w.is_held(&name) {
                return Ok(());
            }
            visible_here()?;
        }
        Action::Grab => {
            if w.is_held(&name) {
                return Err(AlreadyHolding { object: name });
            }
            visible_here()?;
            if !obj.properties.graspable {
                return Err(NotGraspable { object: name });
            }
            if !near {
                return Err(NotNear { object: name });
            }
            if w.agent.holding.len() >= HAND_CAPACITY {
                return Err(HandsFull);
            }
        }
        Action::Put => {
            if !w.is_held(&name) {
                return Err(NotHolding { object: name });
            }
            let target = p.target.clone().unwrap_or_default();
            let t = w.objects.get(&target).ok_or(UnknownObject {
                object: target.clone(),
            })?;
            if w.is_held(&target) || t.room.as_deref() != Some(w.agent.room.as_str()) {
                return Err(NotVisible { object: target });
            }
            if let Some(c) = w.closed_enclosure(&target) {
                return Err(Hidden {
                    object: target,
                    container: c.to_string(),
                });
            }
            if !t.properties.is_receptacle() {
                return Err(NotReceptacle { object: target });
            }
            if !w.agent.near.contains(&target) {
                return Err(NotNear { object: target });
            }
            if t.open == Some(false) {
                return Err(ContainerClosed { object: target });
            }
        }
        Action::Open | Action::Close => {
            visible_here()?;
            if !obj.properties.openable {
                return Err(NotOpenable { object: name });
            }
            if !near {
                return Err(NotNear { object: name });
            }
            match (p.action, obj.open) {
                (Action::Open, Some(true)) => return Err(AlreadyOpen { object: name }),
                (Action::Close, Some(false)) => return Err(AlreadyClosed { object: name }),
                _ => {}
            }
        }
        Action::SwitchOn | Action::SwitchOff => {
            visible_here()?;
            if !obj.properties.switchable {
                return Err(NotSwitchable { object: name });
            }
            if !near {
                return Err(NotNear { object: name });
            }
            match (p.action, obj.power) {
                (Action::SwitchOn, Some(true)) => return Err(AlreadyOn { object: name }),
                (Action::SwitchOff, Some(false)) => return Err(AlreadyOff { object: name }),
                _ => {}
            }
            if p.action == Action::SwitchOn && obj.open == Some(true) {
                return Err(DoorOpen { object: name });
            }
        }
        Action::Sit => {
            visible_here()?;
            if !obj.properties.sittable {
                return Err(NotSittable { object: name });
            }
            if !near {
                return Err(NotNear { object: name });
            }
            if w.agent.sitting.as_deref() == Some(name.as_str()) {
                return Err(AlreadySitting { object: name });
            }
        }
    }
    Ok(())
}

/// The object plus every receptacle it rests in or on.
fn with_supports(w: &WorldState, name: &str) -> Vec<String> {
    let mut out = vec![name.to_string()];
    let mut cur = w.objects.get(name).and_then(|o| o.parent.clone());
    while let Some(p) = cur {
        cur = w.objects.get(&p).and_then(|o| o.parent.clone());
        out.push(p);
    }
    out
}

fn apply(w: &mut WorldState, p: &SkillPrimitive) {
    let name = p.object.clone();
    if matches!(p.action, Action::Walk | Action::Find) && w.is_held(&name) {
        return;
    }
    match p.action {
        Action::Walk => {
            let room = w.objects[&name]
                .room
                .clone()
                .expect("walk target is placed");
            w.agent.room = room;
            w.agent.sitting = None;
            w.agent.near = with_supports(w, &name).into_iter().collect();
        }
        Action::Find => {
            let supports = with_supports(w, &name);
            w.agent.near.extend(supports);
        }
        Action::Grab => {
            let obj = w.objects.get_mut(&name).expect("checked");
            obj.room = None;
            obj.parent = None;
            w.agent.holding.push(name.clone());
            w.agent.near.remove(&name);
        }
        Action::Put => {
            let target = p.target.clone().expect("put has a target");
            let room = w.objects[&target].room.clone();
            w.agent.holding.retain(|h| h != &name);
            let obj = w.objects.get_mut(&name).expect("checked");
            obj.room = room;
            obj.parent = Some(target);
        }
        Action::Open => w.objects.get_mut(&name).expect("checked").open = Some(true),
        Action::Close => w.objects.get_mut(&name).expect("checked").open = Some(false),
        Action::SwitchOn => w.objects.get_mut(&name).expect("checked").power = Some(true),
        Action::SwitchOff => w.objects.get_mut(&name).expect("checked").power = Some(false),
        Action::Sit => w.agent.sitting = Some(name),
    }
}
