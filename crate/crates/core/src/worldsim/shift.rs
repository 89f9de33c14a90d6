//! Domain-shift generators (object location, physical attribute, room
//! structure) and the shift quantifier.
//!
//! Shift degree is measured on the top level of the skill database: the
//! share of top-level skills whose recorded plan runs in the base world but
//! fails in the shifted one. Generators perturb the world one seeded step at
//! a time until that share lands in the band requested by the magnitude.

use super::{dry_run, WorldState};
use crate::skilldb::SkillDatabase;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShiftKind {
    /// Object placements and locations.
    OL,
    /// Physical attributes and default states.
    PA,
    /// Room structure and visual attributes.
    RS,
}

impl ShiftKind {
    pub const ALL: [ShiftKind; 3] = [ShiftKind::OL, ShiftKind::PA, ShiftKind::RS];
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub const ALL: [Magnitude; 3] = [Magnitude::Small, Magnitude::Medium, Magnitude::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        }
    }

    /// Whether `failing` of `total` lies in this magnitude's target band:
    /// (0, 20%], (20%, 30%] and at least 50%.
    fn in_band(self, failing: usize, total: usize) -> bool {
        match self {
            Magnitude::Small => failing > 0 && failing * 5 <= total,
            Magnitude::Medium => failing * 5 > total && failing * 10 <= total * 3,
            Magnitude::Large => failing * 2 >= total,
        }
    }

    fn above_band(self, failing: usize, total: usize) -> bool {
        match self {
            Magnitude::Small => failing * 5 > total,
            Magnitude::Medium => failing * 10 > total * 3,
            Magnitude::Large => false,
        }
    }

    fn neutral_budget(self) -> usize {
        match self {
            Magnitude::Small => 1,
            Magnitude::Medium => 2,
            Magnitude::Large => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShiftDegree {
    None,
    Small,
    Medium,
    Large,
}

impl ShiftDegree {
    pub const ALL: [ShiftDegree; 4] = [
        ShiftDegree::None,
        ShiftDegree::Small,
        ShiftDegree::Medium,
        ShiftDegree::Large,
    ];

    /// Degree from a failing/total count: 0, (0, 20%], (20%, 30%], above 30%.
    pub fn from_counts(failing: usize, total: usize) -> Self {
        if failing == 0 || total == 0 {
            ShiftDegree::None
        } else if failing * 5 <= total {
            ShiftDegree::Small
        } else if failing * 10 <= total * 3 {
            ShiftDegree::Medium
        } else {
            ShiftDegree::Large
        }
    }
}

impl fmt::Display for ShiftDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftQuantity {
    pub degree: ShiftDegree,
    pub fraction: f64,
    pub failing: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOutcome {
    pub state: WorldState,
    pub quantity: ShiftQuantity,
    /// Human-readable list of the perturbations applied.
    pub applied: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ShiftError {
    #[error("cannot reach {magnitude:?} {kind} shift: achieved {achieved:.3} of top-level skills failing")]
    Infeasible {
        kind: ShiftKind,
        magnitude: Magnitude,
        achieved: f64,
    },
    #[error("database has no top-level skills to calibrate against")]
    NoTopLevel,
}

/// Share of top-level skills whose recorded plan succeeds from `base` but
/// fails from `shifted`.
pub fn quantify_shift(
    base: &WorldState,
    shifted: &WorldState,
    db: &SkillDatabase,
) -> ShiftQuantity {
    let top = db.max_level();
    let entries: Vec<_> = db
        .entries()
        .filter(|e| top > 1 && e.id.level == top)
        .collect();
    let total = entries.len();
    let failing = entries
        .iter()
        .filter(|e| {
            let ok = |w: &WorldState| {
                dry_run(w, db, &e.semantic)
                    .map(|o| o.success())
                    .unwrap_or(false)
            };
            ok(base) && !ok(shifted)
        })
        .count();
    ShiftQuantity {
        degree: ShiftDegree::from_counts(failing, total),
        fraction: if total == 0 {
            0.0
        } else {
            failing as f64 / total as f64
        },
        failing,
        total,
    }
}

#[derive(Debug, Clone)]
enum Perturbation {
    Relocate { object: String, into: String },
    ToggleOpen(String),
    TogglePower(String),
    RemoveDoor(String, String),
    AddDoor(String, String),
    MoveFurniture { object: String, room: String },
    Relabel { object: String, label: String },
}

impl Perturbation {
    fn describe(&self) -> String {
        match self {
            Perturbation::Relocate { object, into } => format!("relocate {object} to {into}"),
            Perturbation::ToggleOpen(o) => format!("toggle open state of {o}"),
            Perturbation::TogglePower(o) => format!("toggle power of {o}"),
            Perturbation::RemoveDoor(a, b) => format!("remove door {a}-{b}"),
            Perturbation::AddDoor(a, b) => format!("add door {a}-{b}"),
            Perturbation::MoveFurniture { object, room } => format!("move {object} to {room}"),
            Perturbation::Relabel { object, label } => format!("relabel {object} as {label:?}"),
        }
    }

    /// Applies to a copy; `None` when no longer applicable.
    fn apply(&self, w: &WorldState) -> Option<WorldState> {
        let mut next = w.clone();
        match self {
            Perturbation::Relocate { object, into } => {
                if object == into || ancestors(w, into).contains(object) {
                    return None;
                }
                let room = w.objects.get(into)?.room.clone()?;
                if w.objects.get(object)?.parent.as_deref() == Some(into.as_str()) {
                    return None;
                }
                let obj = next.objects.get_mut(object)?;
                obj.parent = Some(into.clone());
                set_room_recursive(&mut next, object, &room);
            }
            Perturbation::ToggleOpen(o) => {
                let obj = next.objects.get_mut(o)?;
                obj.open = Some(!obj.open?);
            }
            Perturbation::TogglePower(o) => {
                let obj = next.objects.get_mut(o)?;
                obj.power = Some(!obj.power?);
            }
            Perturbation::RemoveDoor(a, b) => {
                let key = super::door(a, b);
                if !next.doors.remove(&key) || !rooms_connected(&next) {
                    return None;
                }
            }
            Perturbation::AddDoor(a, b) => {
                if !next.doors.insert(super::door(a, b)) {
                    return None;
                }
            }
            Perturbation::MoveFurniture { object, room } => {
                if w.objects.get(object)?.room.as_deref() == Some(room.as_str()) {
                    return None;
                }
                set_room_recursive(&mut next, object, room);
            }
            Perturbation::Relabel { object, label } => {
                next.objects.get_mut(object)?.label = Some(label.clone());
            }
        }
        next.agent.near.clear();
        next.check().ok()?;
        Some(next)
    }
}

fn ancestors(w: &WorldState, name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = w.objects.get(name).and_then(|o| o.parent.clone());
    while let Some(p) = cur {
        if out.contains(&p) {
            break;
        }
        cur = w.objects.get(&p).and_then(|o| o.parent.clone());
        out.push(p);
    }
    out
}

fn set_room_recursive(w: &mut WorldState, name: &str, room: &str) {
    if let Some(o) = w.objects.get_mut(name) {
        o.room = Some(room.to_string());
    }
    let children: Vec<String> = w
        .objects
        .iter()
        .filter(|(_, o)| o.parent.as_deref() == Some(name))
        .map(|(n, _)| n.clone())
        .collect();
    for c in children {
        set_room_recursive(w, &c, room);
    }
}

fn rooms_connected(w: &WorldState) -> bool {
    let Some(start) = w.rooms.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start.clone()]);
    let mut stack = vec![start.clone()];
    while let Some(r) = stack.pop() {
        for other in &w.rooms {
            if !seen.contains(other) && w.connected(&r, other) {
                seen.insert(other.clone());
                stack.push(other.clone());
            }
        }
    }
    seen.len() == w.rooms.len()
}

const SYNONYMS: &[(&str, &str)] = &[
    ("kitchencabinet", "cupboard"),
    ("fridge", "refrigerator"),
    ("sofa", "couch"),
    ("tv", "television"),
    ("kitchentable", "dining table"),
    ("coffeetable", "low table"),
    ("kitchencounter", "worktop"),
    ("bathroomcabinet", "medicine cabinet"),
    ("microwave", "microwave oven"),
    ("bed", "bunk"),
];

fn candidates(kind: ShiftKind, w: &WorldState) -> Vec<Perturbation> {
    let mut out = Vec::new();
    let receptacles: Vec<&String> = w
        .objects
        .iter()
        .filter(|(_, o)| o.properties.is_receptacle() && o.room.is_some())
        .map(|(n, _)| n)
        .collect();
    let graspables: Vec<&String> = w
        .objects
        .iter()
        .filter(|(n, o)| o.properties.graspable && !w.is_held(n))
        .map(|(n, _)| n)
        .collect();
    match kind {
        ShiftKind::OL => {
            for g in &graspables {
                for r in &receptacles {
                    out.push(Perturbation::Relocate {
                        object: (*g).clone(),
                        into: (*r).clone(),
                    });
                }
            }
        }
        ShiftKind::PA => {
            for (n, o) in &w.objects {
                if o.open.is_some() {
                    out.push(Perturbation::ToggleOpen(n.clone()));
                }
                if o.power.is_some() {
                    out.push(Perturbation::TogglePower(n.clone()));
                }
            }
        }
        ShiftKind::RS => {
            let rooms: Vec<&String> = w.rooms.iter().collect();
            for (i, a) in rooms.iter().enumerate() {
                for b in &rooms[i + 1..] {
                    if w.connected(a, b) {
                        out.push(Perturbation::RemoveDoor((*a).clone(), (*b).clone()));
                    } else {
                        out.push(Perturbation::AddDoor((*a).clone(), (*b).clone()));
                    }
                }
            }
            for (n, o) in &w.objects {
                if !o.properties.graspable && o.parent.is_none() && o.properties.is_receptacle() {
                    for r in &rooms {
                        out.push(Perturbation::MoveFurniture {
                            object: n.clone(),
                            room: (*r).clone(),
                        });
                    }
                }
            }
            for g in &graspables {
                for r in &receptacles {
                    let same_room = w.objects[*g].room == w.objects[*r].room;
                    if !same_room {
                        out.push(Perturbation::Relocate {
                            object: (*g).clone(),
                            into: (*r).clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Perturbs `base` until the quantified shift falls in the band for
/// `magnitude`. `None` magnitude returns the base unchanged.
pub fn apply_shift(
    base: &WorldState,
    kind: ShiftKind,
    magnitude: Option<Magnitude>,
    seed: u64,
    db: &SkillDatabase,
) -> Result<ShiftOutcome, ShiftError> {
    let Some(magnitude) = magnitude else {
        return Ok(ShiftOutcome {
            state: base.clone(),
            quantity: quantify_shift(base, base, db),
            applied: Vec::new(),
        });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = candidates(kind, base);
    pool.shuffle(&mut rng);

    let mut state = base.clone();
    let mut q = quantify_shift(base, &state, db);
    if q.total == 0 {
        return Err(ShiftError::NoTopLevel);
    }
    let mut applied = Vec::new();
    let mut neutral = 0;
    for p in &pool {
        if magnitude.in_band(q.failing, q.total) {
            break;
        }
        let Some(trial) = p.apply(&state) else {
            continue;
        };
        let tq = quantify_shift(base, &trial, db);
        if magnitude.above_band(tq.failing, tq.total) {
            continue;
        }
        if tq.failing <= q.failing {
            if neutral >= magnitude.neutral_budget() {
                continue;
            }
            neutral += 1;
        }
        state = trial;
        q = tq;
        applied.push(p.describe());
    }
    if !magnitude.in_band(q.failing, q.total) {
        return Err(ShiftError::Infeasible {
            kind,
            magnitude,
            achieved: q.fraction,
        });
    }
    if kind == ShiftKind::RS {
        // visual attribute changes: relabel up to two objects
        let mut relabels: Vec<_> = SYNONYMS
            .iter()
            .filter(|(n, _)| state.objects.contains_key(*n))
            .collect();
        relabels.shuffle(&mut rng);
        for (n, label) in relabels.into_iter().take(2) {
            let p = Perturbation::Relabel {
                object: n.to_string(),
                label: label.to_string(),
            };
            if let Some(next) = p.apply(&state) {
                state = next;
                applied.push(p.describe());
            }
        }
    }
    state.rng_seed = seed;
    Ok(ShiftOutcome {
        state,
        quantity: q,
        applied,
    })
}
