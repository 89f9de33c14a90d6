//! kNN retrieval over the skill database.
//!
//! An entry's score against a query is the cosine between the instruction
//! and the entry's semantic plus the cosine between the entry's recorded
//! object names and the currently observed ones. Both name sets are
//! serialized sorted and space-joined before embedding; when either set is
//! empty the second term is 0.

mod embed;

pub use embed::{cosine, EmbedError, Embedder, Embedding, HashEmbedder, HttpEmbedder};

use crate::skilldb::{SkillDatabase, SkillEntry};
use crate::worldsim::Observation;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::ops::RangeInclusive;
use std::sync::Arc;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("no eligible entries to retrieve")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredEntry {
    #[serde(serialize_with = "ser_entry_id")]
    pub entry: SkillEntry,
    pub score: f64,
}

fn ser_entry_id<S: serde::Serializer>(e: &SkillEntry, s: S) -> Result<S::Ok, S::Error> {
    (e.id.level, e.id.index).serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub entries: Vec<ScoredEntry>,
    pub query_instruction: String,
    pub query_object_names: BTreeSet<String>,
}

/// In-context examples, candidate skills and lower candidates derived from
/// a retrieval.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CandidateSets {
    pub examples: Vec<(String, Vec<String>)>,
    pub candidates: Vec<String>,
    pub lower_candidates: Vec<String>,
}

/// Sorted, space-joined name set.
pub fn serialize_names(names: &BTreeSet<String>) -> String {
    names
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Total order used for ranking: score descending, then higher level,
/// then semantic ascending, then id.
pub fn rank_order(a: &ScoredEntry, b: &ScoredEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.entry.id.level.cmp(&a.entry.id.level))
        .then_with(|| a.entry.semantic.cmp(&b.entry.semantic))
        .then(a.entry.id.cmp(&b.entry.id))
}

fn names_vec(
    embedder: &dyn Embedder,
    names: &BTreeSet<String>,
) -> Result<Option<Embedding>, EmbedError> {
    if names.is_empty() {
        return Ok(None);
    }
    embedder.embed(&serialize_names(names)).map(Some)
}

fn object_term(a: &Option<Embedding>, b: &Option<Embedding>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => cosine(a, b),
        _ => 0.0,
    }
}

/// Scores one entry from scratch.
pub fn score_entry(
    entry: &SkillEntry,
    instruction: &str,
    obs: &Observation,
    embedder: &dyn Embedder,
) -> Result<f64, EmbedError> {
    let q = embedder.embed(instruction)?;
    let s = embedder.embed(&entry.semantic)?;
    let on = names_vec(embedder, &obs.object_names)?;
    let en = names_vec(embedder, &entry.object_names)?;
    Ok(cosine(&q, &s) + object_term(&en, &on))
}

/// Retriever over a fixed database with entry embeddings cached at
/// construction.
pub struct Retriever {
    db: Arc<SkillDatabase>,
    embedder: Arc<dyn Embedder>,
    semantic_vecs: Vec<Embedding>,
    name_vecs: Vec<Option<Embedding>>,
    strict: bool,
}

impl Retriever {
    pub fn new(db: Arc<SkillDatabase>, embedder: Arc<dyn Embedder>) -> Result<Self, EmbedError> {
        let mut semantic_vecs = Vec::with_capacity(db.len());
        let mut name_vecs = Vec::with_capacity(db.len());
        for e in db.entries() {
            semantic_vecs.push(embedder.embed(&e.semantic)?);
            name_vecs.push(names_vec(embedder.as_ref(), &e.object_names)?);
        }
        Ok(Self {
            db,
            embedder,
            semantic_vecs,
            name_vecs,
            strict: true,
        })
    }

    /// In lenient mode an empty candidate pool yields an empty result
    /// instead of an error.
    pub fn lenient(mut self) -> Self {
        self.strict = false;
        self
    }

    pub fn db(&self) -> &Arc<SkillDatabase> {
        &self.db
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn retrieve_top_k(
        &self,
        instruction: &str,
        obs: &Observation,
        k: usize,
        levels: Option<RangeInclusive<u32>>,
    ) -> Result<RetrievalResult, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let q = self.embedder.embed(instruction)?;
        let on = names_vec(self.embedder.as_ref(), &obs.object_names)?;
        let mut scored: Vec<ScoredEntry> = Vec::new();
        for (i, e) in self.db.entries().enumerate() {
            if levels.as_ref().is_some_and(|r| !r.contains(&e.id.level)) {
                continue;
            }
            let score = cosine(&q, &self.semantic_vecs[i]) + object_term(&self.name_vecs[i], &on);
            scored.push(ScoredEntry {
                entry: e.clone(),
                score,
            });
        }
        if scored.is_empty() && self.strict {
            return Err(RetrievalError::Empty);
        }
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        Ok(RetrievalResult {
            entries: scored,
            query_instruction: instruction.to_string(),
            query_object_names: obs.object_names.clone(),
        })
    }
}

fn push_unique(out: &mut Vec<String>, seen: &mut HashSet<String>, s: &str) {
    if seen.insert(s.to_string()) {
        out.push(s.to_string());
    }
}

pub fn derive_candidate_sets(result: &RetrievalResult, db: &SkillDatabase) -> CandidateSets {
    let mut sets = CandidateSets::default();
    let mut seen_c = HashSet::new();
    let mut seen_lc = HashSet::new();
    for scored in &result.entries {
        let entry = &scored.entry;
        if entry.plan.is_empty() {
            push_unique(&mut sets.candidates, &mut seen_c, &entry.semantic);
            continue;
        }
        let plan = db.plan_semantics(entry);
        sets.examples.push((entry.semantic.clone(), plan.clone()));
        for s in &plan {
            push_unique(&mut sets.candidates, &mut seen_c, s);
        }
        for id in &entry.plan {
            if let Some(member) = db.get(*id) {
                for s in db.plan_semantics(member) {
                    push_unique(&mut sets.lower_candidates, &mut seen_lc, &s);
                }
            }
        }
    }
    sets
}
