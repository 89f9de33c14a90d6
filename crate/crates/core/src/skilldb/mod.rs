//! Hierarchical skill database.
//!
//! Entries are grouped in levels. Level-1 entries are primitives with no
//! plan; an entry at level `l > 1` has a plan made of level `l - 1` entries.
//! The on-disk format is JSON Lines, one entry per line.

mod synthetic;

pub use synthetic::synthetic_database;

use crate::text::normalize;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct SkillId {
    pub level: u32,
    pub index: u32,
}

impl SkillId {
    pub fn new(level: u32, index: u32) -> Self {
        Self { level, index }
    }
}

impl From<(u32, u32)> for SkillId {
    fn from((level, index): (u32, u32)) -> Self {
        Self { level, index }
    }
}

impl From<SkillId> for (u32, u32) {
    fn from(id: SkillId) -> Self {
        (id.level, id.index)
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}#{}", self.level, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillEntry {
    pub id: SkillId,
    pub semantic: String,
    /// Object labels in view when the skill was recorded.
    pub object_names: BTreeSet<String>,
    pub plan: Vec<SkillId>,
}

/// One line of the JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillRecord {
    pub level: u32,
    pub index: u32,
    pub semantic: String,
    #[serde(default)]
    pub object_names: Vec<String>,
    #[serde(default)]
    pub plan: Vec<(u32, u32)>,
}

impl From<&SkillEntry> for SkillRecord {
    fn from(e: &SkillEntry) -> Self {
        Self {
            level: e.id.level,
            index: e.id.index,
            semantic: e.semantic.clone(),
            object_names: e.object_names.iter().cloned().collect(),
            plan: e.plan.iter().map(|id| (id.level, id.index)).collect(),
        }
    }
}

impl From<SkillRecord> for SkillEntry {
    fn from(r: SkillRecord) -> Self {
        Self {
            id: SkillId::new(r.level, r.index),
            semantic: r.semantic,
            object_names: r.object_names.into_iter().collect(),
            plan: r.plan.into_iter().map(SkillId::from).collect(),
        }
    }
}

/// A structural problem found by [`SkillDatabase::violations`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Violation {
    InvalidId {
        id: SkillId,
    },
    DuplicateId {
        id: SkillId,
    },
    EmptySemantic {
        id: SkillId,
    },
    DuplicateSemantic {
        id: SkillId,
        first: SkillId,
        semantic: String,
    },
    Level1Plan {
        id: SkillId,
    },
    EmptyPlan {
        id: SkillId,
    },
    DanglingReference {
        id: SkillId,
        target: SkillId,
    },
    LevelSkip {
        id: SkillId,
        target: SkillId,
    },
    MissingLevel {
        level: u32,
    },
}

impl Violation {
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::InvalidId { .. } => "invalid-id",
            Violation::DuplicateId { .. } => "duplicate-id",
            Violation::EmptySemantic { .. } => "empty-semantic",
            Violation::DuplicateSemantic { .. } => "duplicate-semantic",
            Violation::Level1Plan { .. } => "level-1-plan",
            Violation::EmptyPlan { .. } => "empty-plan",
            Violation::DanglingReference { .. } => "dangling-reference",
            Violation::LevelSkip { .. } => "level-skip",
            Violation::MissingLevel { .. } => "missing-level",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidId { id } => write!(f, "{id}: level must be at least 1"),
            Violation::DuplicateId { id } => write!(f, "{id}: id used more than once"),
            Violation::EmptySemantic { id } => write!(f, "{id}: empty semantic"),
            Violation::DuplicateSemantic {
                id,
                first,
                semantic,
            } => {
                write!(f, "{id}: semantic {semantic:?} already used by {first}")
            }
            Violation::Level1Plan { id } => write!(f, "{id}: level-1 entry has a plan"),
            Violation::EmptyPlan { id } => write!(f, "{id}: plan is empty"),
            Violation::DanglingReference { id, target } => {
                write!(f, "{id}: plan references missing {target}")
            }
            Violation::LevelSkip { id, target } => {
                write!(
                    f,
                    "{id}: plan member {target} is not exactly one level below"
                )
            }
            Violation::MissingLevel { level } => write!(f, "level {level} has no entries"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(Violation),
}

/// Per-level entry counts plus plan-length summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DbStats {
    pub levels: BTreeMap<u32, usize>,
    pub total: usize,
    pub mean_plan_len: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SkillDatabase {
    entries: Vec<SkillEntry>,
    by_id: HashMap<SkillId, usize>,
    by_semantic: HashMap<String, usize>,
}

impl SkillDatabase {
    /// Builds a database, rejecting it on the first violation.
    pub fn new(entries: Vec<SkillEntry>) -> Result<Self, DbError> {
        let db = Self::new_unchecked(entries);
        match db.violations().into_iter().next() {
            Some(v) => Err(DbError::Invalid(v)),
            None => Ok(db),
        }
    }

    /// Builds without validation. Lookups resolve to the first entry with a
    /// given id or semantic.
    pub fn new_unchecked(mut entries: Vec<SkillEntry>) -> Self {
        entries.sort_by_key(|e| e.id);
        let mut by_id = HashMap::new();
        let mut by_semantic = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_id.entry(e.id).or_insert(i);
            by_semantic.entry(normalize(&e.semantic)).or_insert(i);
        }
        Self {
            entries,
            by_id,
            by_semantic,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen_ids = BTreeSet::new();
        let mut seen_sem: HashMap<String, SkillId> = HashMap::new();
        let mut levels = BTreeSet::new();
        for e in &self.entries {
            let id = e.id;
            if id.level == 0 {
                out.push(Violation::InvalidId { id });
                continue;
            }
            levels.insert(id.level);
            if !seen_ids.insert(id) {
                out.push(Violation::DuplicateId { id });
            }
            let norm = normalize(&e.semantic);
            if norm.is_empty() {
                out.push(Violation::EmptySemantic { id });
            } else if let Some(first) = seen_sem.get(&norm) {
                out.push(Violation::DuplicateSemantic {
                    id,
                    first: *first,
                    semantic: e.semantic.clone(),
                });
            } else {
                seen_sem.insert(norm, id);
            }
            if id.level == 1 {
                if !e.plan.is_empty() {
                    out.push(Violation::Level1Plan { id });
                }
                continue;
            }
            if e.plan.is_empty() {
                out.push(Violation::EmptyPlan { id });
            }
            for target in &e.plan {
                if !self.by_id.contains_key(target) {
                    out.push(Violation::DanglingReference {
                        id,
                        target: *target,
                    });
                } else if target.level + 1 != id.level {
                    out.push(Violation::LevelSkip {
                        id,
                        target: *target,
                    });
                }
            }
        }
        if let Some(&max) = levels.iter().next_back() {
            for level in 1..=max {
                if !levels.contains(&level) {
                    out.push(Violation::MissingLevel { level });
                }
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, DbError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, DbError> {
        Self::new(read_records(reader)?)
    }

    /// Parses without validating, for inspection of broken files.
    pub fn load_unchecked(path: &Path) -> Result<Self, DbError> {
        let file = std::fs::File::open(path)?;
        Ok(Self::new_unchecked(read_records(BufReader::new(file))?))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(&SkillRecord::from(e)).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), DbError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &SkillEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: SkillId) -> Option<&SkillEntry> {
        self.by_id.get(&id).map(|&i| &self.entries[i])
    }

    /// Lookup by semantic, ignoring case and whitespace differences.
    pub fn find_semantic(&self, semantic: &str) -> Option<&SkillEntry> {
        self.by_semantic
            .get(&normalize(semantic))
            .map(|&i| &self.entries[i])
    }

    pub fn level(&self, level: u32) -> impl Iterator<Item = &SkillEntry> {
        self.entries.iter().filter(move |e| e.id.level == level)
    }

    pub fn max_level(&self) -> u32 {
        self.entries.last().map(|e| e.id.level).unwrap_or(0)
    }

    /// Semantics of an entry's plan members, in order.
    pub fn plan_semantics(&self, entry: &SkillEntry) -> Vec<String> {
        entry
            .plan
            .iter()
            .filter_map(|id| self.get(*id).map(|e| e.semantic.clone()))
            .collect()
    }

    pub fn stats(&self) -> DbStats {
        let mut levels = BTreeMap::new();
        let mut plan_total: BTreeMap<u32, usize> = BTreeMap::new();
        for e in &self.entries {
            *levels.entry(e.id.level).or_insert(0) += 1;
            *plan_total.entry(e.id.level).or_insert(0) += e.plan.len();
        }
        let mean_plan_len = plan_total
            .iter()
            .filter(|(l, _)| **l > 1)
            .map(|(l, t)| (*l, *t as f64 / levels[l] as f64))
            .collect();
        DbStats {
            total: self.entries.len(),
            levels,
            mean_plan_len,
        }
    }

    /// Next free index at a level.
    pub fn next_index(&self, level: u32) -> u32 {
        self.level(level).map(|e| e.id.index + 1).max().unwrap_or(0)
    }
}

fn read_records(reader: impl BufRead) -> Result<Vec<SkillEntry>, DbError> {
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SkillRecord = serde_json::from_str(&line).map_err(|e| DbError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(rec.into());
    }
    Ok(entries)
}

/// A single bootstrapping observation: the action taken, the perceived
/// objects and states before it, and whether it succeeded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub episode: u32,
    pub step: u32,
    pub action: String,
    pub object_names: Vec<String>,
    pub object_states: Vec<String>,
    pub success: bool,
}

pub fn save_observations(path: &Path, records: &[ObservationRecord]) -> Result<(), DbError> {
    let mut f = std::fs::File::create(path)?;
    for r in records {
        writeln!(
            f,
            "{}",
            serde_json::to_string(r).expect("record serializes")
        )?;
    }
    Ok(())
}

pub fn load_observations(path: &Path) -> Result<Vec<ObservationRecord>, DbError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DbError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(level: u32, index: u32, sem: &str, plan: &[(u32, u32)]) -> SkillEntry {
        SkillEntry {
            id: SkillId::new(level, index),
            semantic: sem.into(),
            object_names: BTreeSet::new(),
            plan: plan.iter().map(|&p| p.into()).collect(),
        }
    }

    fn small() -> Vec<SkillEntry> {
        vec![
            entry(1, 0, "walk apple", &[]),
            entry(1, 1, "grab apple", &[]),
            entry(2, 0, "pick up apple", &[(1, 0), (1, 1)]),
        ]
    }

    #[test]
    fn valid_database_loads() {
        let db = SkillDatabase::new(small()).unwrap();
        assert_eq!(db.max_level(), 2);
        assert_eq!(
            db.find_semantic("  Pick UP   apple").unwrap().id,
            SkillId::new(2, 0)
        );
        assert_eq!(
            db.plan_semantics(db.get(SkillId::new(2, 0)).unwrap()),
            ["walk apple", "grab apple"]
        );
    }

    #[test]
    fn each_rule_is_detected() {
        let cases: Vec<(SkillEntry, &str)> = vec![
            (entry(1, 5, "open fridge", &[(1, 0)]), "level-1-plan"),
            (entry(2, 5, "do nothing", &[]), "empty-plan"),
            (entry(2, 5, "ghost", &[(1, 9)]), "dangling-reference"),
            (entry(3, 5, "skip", &[(1, 0)]), "level-skip"),
            (entry(1, 5, "WALK  apple", &[]), "duplicate-semantic"),
            (entry(1, 0, "walk pear", &[]), "duplicate-id"),
            (entry(1, 5, "   ", &[]), "empty-semantic"),
            (entry(0, 5, "zero", &[]), "invalid-id"),
            (entry(4, 0, "top", &[(3, 0)]), "missing-level"),
        ];
        for (bad, rule) in cases {
            let mut entries = small();
            entries.push(bad);
            let rules: Vec<_> = SkillDatabase::new_unchecked(entries)
                .violations()
                .iter()
                .map(|v| v.rule())
                .collect();
            assert!(rules.contains(&rule), "expected {rule}, got {rules:?}");
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let db = SkillDatabase::new(small()).unwrap();
        let text = db.to_jsonl();
        let back = SkillDatabase::from_reader(text.as_bytes()).unwrap();
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn parse_error_names_line() {
        let text = "{\"level\":1,\"index\":0,\"semantic\":\"walk a\"}\nnot json\n";
        match SkillDatabase::from_reader(text.as_bytes()) {
            Err(DbError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
