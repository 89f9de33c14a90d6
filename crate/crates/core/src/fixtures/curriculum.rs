pub use crate::bootstrap::primitive_inventory;
use crate::skilldb::{DbError, SkillDatabase, SkillEntry, SkillId};
use crate::text::normalize;
use crate::worldsim::{step, SkillPrimitive, StepResult, WorldState};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// A hand-authored skill hierarchy: level-1 primitives plus composites
/// whose plans name lower-level skills by semantic.
#[derive(Debug, Clone, Default)]
pub struct Curriculum {
    pub primitives: Vec<String>,
    pub composites: Vec<(u32, String, Vec<String>)>,
}

#[derive(Debug, thiserror::Error)]
pub enum CurriculumError {
    #[error("{skill:?} names {member:?}, which is not a level-{expected} skill")]
    BadMember {
        skill: String,
        member: String,
        expected: u32,
    },
    #[error("primitive {0:?} does not parse")]
    BadPrimitive(String),
    #[error("top-level skill {skill:?} fails from the reset state: {message}")]
    TopLevelFails { skill: String, message: String },
    #[error(transparent)]
    Db(#[from] DbError),
}

impl Curriculum {
    pub fn add(&mut self, level: u32, semantic: impl Into<String>, plan: &[&str]) {
        self.composites.push((
            level,
            semantic.into(),
            plan.iter().map(|s| s.to_string()).collect(),
        ));
    }

    pub fn add_owned(&mut self, level: u32, semantic: impl Into<String>, plan: Vec<String>) {
        self.composites.push((level, semantic.into(), plan));
    }

    pub fn max_level(&self) -> u32 {
        self.composites.iter().map(|c| c.0).max().unwrap_or(1)
    }
}

struct Recorder<'a> {
    levels: HashMap<String, (u32, &'a [String])>,
    names: BTreeMap<String, BTreeSet<String>>,
}

impl Recorder<'_> {
    /// Executes `semantic` from `state`, collecting the labels in view at
    /// the start of every skill along the way.
    fn run(&mut self, state: &mut WorldState, semantic: &str) -> Result<(), String> {
        let key = normalize(semantic);
        self.names
            .entry(key.clone())
            .or_default()
            .extend(state.observe().object_names);
        match self.levels.get(&key).copied() {
            Some((_, plan)) => {
                for member in plan {
                    self.run(state, member)?;
                }
                Ok(())
            }
            None => {
                let prim = SkillPrimitive::parse(semantic).map_err(|e| e.to_string())?;
                match step(state, &prim) {
                    StepResult::Success(next) => {
                        *state = next;
                        Ok(())
                    }
                    StepResult::Failure(f) => Err(format!("{}: {}", f.primitive, f.message)),
                }
            }
        }
    }
}

/// Builds a database from `curriculum` by executing it in `world`. Each
/// top-level skill runs from the reset state, and every nested skill records
/// the labels in view whenever it starts. Composites that no top-level skill
/// reaches are run from the reset state on their own. With
/// `require_top_success`, a top-level skill that fails is an error.
pub fn record(
    world: &WorldState,
    curriculum: &Curriculum,
    require_top_success: bool,
) -> Result<SkillDatabase, CurriculumError> {
    let mut ids: HashMap<String, SkillId> = HashMap::new();
    let mut entries = Vec::new();
    let mut next_index: BTreeMap<u32, u32> = BTreeMap::new();
    let mut assign = |level: u32, semantic: &str, ids: &mut HashMap<String, SkillId>| {
        let idx = next_index.entry(level).or_insert(0);
        let id = SkillId::new(level, *idx);
        *idx += 1;
        ids.insert(normalize(semantic), id);
        id
    };
    let mut prims: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &curriculum.primitives {
        let parsed =
            SkillPrimitive::parse(p).map_err(|_| CurriculumError::BadPrimitive(p.clone()))?;
        let text = parsed.to_string();
        if seen.insert(text.clone()) {
            prims.push(text);
        }
    }
    for p in &prims {
        let id = assign(1, p, &mut ids);
        entries.push(SkillEntry {
            id,
            semantic: p.clone(),
            object_names: BTreeSet::new(),
            plan: Vec::new(),
        });
    }
    for (level, semantic, plan) in &curriculum.composites {
        let mut members = Vec::new();
        for m in plan {
            match ids.get(&normalize(m)) {
                Some(id) if id.level + 1 == *level => members.push(*id),
                _ => {
                    return Err(CurriculumError::BadMember {
                        skill: semantic.clone(),
                        member: m.clone(),
                        expected: level - 1,
                    })
                }
            }
        }
        let id = assign(*level, semantic, &mut ids);
        entries.push(SkillEntry {
            id,
            semantic: semantic.clone(),
            object_names: BTreeSet::new(),
            plan: members,
        });
    }

    let mut rec = Recorder {
        levels: curriculum
            .composites
            .iter()
            .map(|(l, s, p)| (normalize(s), (*l, p.as_slice())))
            .collect(),
        names: BTreeMap::new(),
    };
    let top = curriculum.max_level();
    for (level, semantic, _) in &curriculum.composites {
        if *level != top {
            continue;
        }
        let mut state = world.clone();
        if let Err(message) = rec.run(&mut state, semantic) {
            if require_top_success {
                return Err(CurriculumError::TopLevelFails {
                    skill: semantic.clone(),
                    message,
                });
            }
        }
    }
    for (_, semantic, _) in curriculum.composites.iter().rev() {
        if !rec.names.contains_key(&normalize(semantic)) {
            let mut state = world.clone();
            let _ = rec.run(&mut state, semantic);
        }
    }
    for p in &prims {
        if rec.names.contains_key(&normalize(p)) {
            continue;
        }
        let object = SkillPrimitive::parse(p).expect("parsed above").object;
        let mut state = world.clone();
        if let Some(room) = world.objects.get(&object).and_then(|o| o.room.clone()) {
            state.agent.room = room;
        }
        rec.names.insert(normalize(p), state.observe().object_names);
    }
    for e in &mut entries {
        if let Some(n) = rec.names.remove(&normalize(&e.semantic)) {
            e.object_names = n;
        }
    }
    Ok(SkillDatabase::new(entries)?)
}
