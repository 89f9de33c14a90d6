//! A deterministic stand-in for the planning LM.
//!
//! [`HeuristicPlanner`] answers generator and task-retriever prompts by
//! reading them the way a capable LM would: it follows the in-context
//! example whose task best matches the instruction, tracks which objects
//! the execution history has already delivered, and rewrites blocked skills
//! using the remedy named in the critic feedback. It sees only the prompt
//! text plus a [`Lexicon`] of everyday vocabulary for the world (object
//! names, labels, categories and synonyms); it has no access to the world
//! state or to the engine configuration.

use crate::lmclient::{CompletionRequest, LanguageModel, LmError, Tag};
use crate::text::tokens;
use crate::worldsim::WorldState;
use regex::Regex;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

const STOPWORDS: &[&str] = &[
    "a",
    "an",
    "the",
    "to",
    "on",
    "in",
    "into",
    "onto",
    "it",
    "them",
    "and",
    "then",
    "with",
    "of",
    "at",
    "my",
    "your",
    "some",
    "all",
    "up",
    "i",
    "need",
    "please",
    "while",
    "for",
    "from",
    "is",
    "are",
    "be",
    "this",
    "that",
    "first",
    "there",
    "here",
    "you",
    "we",
    "various",
    "different",
];

const VERB_FORMS: &[(&str, &str)] = &[
    ("place", "put"),
    ("placing", "put"),
    ("putting", "put"),
    ("puts", "put"),
    ("store", "put"),
    ("storing", "put"),
    ("move", "put"),
    ("bring", "put"),
    ("take", "put"),
    ("leave", "put"),
    ("fetch", "grab"),
    ("get", "grab"),
    ("grabbing", "grab"),
    ("pick", "grab"),
    ("go", "walk"),
    ("walking", "walk"),
    ("sitting", "sit"),
    ("seat", "sit"),
    ("opening", "open"),
    ("closing", "close"),
    ("shut", "close"),
    ("watching", "watch"),
    ("reading", "read"),
];

const PHRASES: &[(&str, &str)] = &[
    ("turn on", "switchon"),
    ("switch on", "switchon"),
    ("turn off", "switchoff"),
    ("switch off", "switchoff"),
    ("pick up", "grab"),
    ("living room", "livingroom"),
];

/// Abstract verbs that stand for concrete ones.
const VERB_GROUPS: &[(&str, &[&str])] = &[
    ("chill", &["sit", "watch"]),
    ("relax", &["sit", "watch", "read"]),
    ("watch", &["switchon", "tv"]),
    ("read", &["book", "grab"]),
];

const SYNONYMS: &[(&str, &str)] = &[
    ("refrigerator", "fridge"),
    ("couch", "sofa"),
    ("bunk", "sofa"),
    ("television", "tv"),
    ("cupboard", "kitchencabinet"),
    ("remote", "remotecontrol"),
];

/// Everyday vocabulary for one world.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    canon: BTreeMap<String, String>,
    groups: BTreeMap<String, BTreeSet<String>>,
    items: BTreeSet<String>,
    places: BTreeSet<String>,
    phrases: Vec<(Vec<String>, String)>,
}

fn singular(word: &str) -> Option<&str> {
    word.strip_suffix("es")
        .filter(|w| w.ends_with("ch") || w.ends_with("sh"))
        .or_else(|| word.strip_suffix('s'))
}

impl Lexicon {
    /// Digest of the vocabulary, so backends built for different worlds
    /// have different identities.
    pub fn digest(&self) -> String {
        crate::sha256_hex(format!("{self:?}").as_bytes())
    }

    pub fn for_world(world: &WorldState) -> Self {
        let mut lex = Lexicon::default();
        for (from, to) in VERB_FORMS.iter().chain(SYNONYMS) {
            lex.canon.insert(from.to_string(), to.to_string());
        }
        for (phrase, to) in PHRASES {
            lex.add_phrase(phrase, to);
        }
        for (verb, members) in VERB_GROUPS {
            lex.groups
                .entry(verb.to_string())
                .or_default()
                .extend(members.iter().map(|m| m.to_string()));
        }
        let mut classes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (name, obj) in &world.objects {
            if obj.properties.graspable {
                lex.items.insert(name.clone());
                classes
                    .entry(obj.class.clone())
                    .or_default()
                    .insert(name.clone());
            } else {
                lex.places.insert(name.clone());
            }
            let label = world.label_of(name);
            if label != name {
                lex.add_phrase(label, name);
            }
        }
        for (from, to) in SYNONYMS {
            if world.objects.contains_key(*to) {
                lex.add_phrase(from, to);
            }
        }
        // furniture labels like "kitchen cabinet" spelt as two words
        for place in lex.places.clone() {
            for split in 1..place.len() {
                let (a, b) = place.split_at(split);
                if [
                    "kitchen", "coffee", "bathroom", "remote", "bell", "garbage", "tooth",
                ]
                .contains(&a)
                {
                    lex.add_phrase(&format!("{a} {b}"), &place);
                }
            }
        }
        for item in lex.items.clone() {
            for split in 1..item.len() {
                let (a, b) = item.split_at(split);
                if ["remote", "bell", "tooth"].contains(&a) {
                    lex.add_phrase(&format!("{a} {b}"), &item);
                }
            }
        }
        let food: BTreeSet<String> = classes
            .iter()
            .filter(|(c, _)| matches!(c.as_str(), "fruit" | "food" | "vegetable"))
            .flat_map(|(_, m)| m.iter().cloned())
            .collect();
        for (class, members) in classes {
            lex.groups.entry(class.clone()).or_default().extend(members);
        }
        if !food.is_empty() {
            lex.groups.entry("food".into()).or_default().extend(food);
        }
        lex
    }

    fn add_phrase(&mut self, phrase: &str, to: &str) {
        let words = tokens(phrase);
        if words.len() == 1 {
            self.canon.insert(words[0].clone(), to.to_string());
        } else if !words.is_empty() {
            self.phrases.push((words, to.to_string()));
            self.phrases
                .sort_by_key(|(w, _)| std::cmp::Reverse(w.len()));
        }
    }

    fn canon_word(&self, w: &str) -> String {
        if let Some(c) = self.canon.get(w) {
            return c.clone();
        }
        if self.items.contains(w) || self.places.contains(w) || self.groups.contains_key(w) {
            return w.to_string();
        }
        if let Some(s) = singular(w) {
            if let Some(c) = self.canon.get(s) {
                return c.clone();
            }
            if self.groups.contains_key(s) || self.items.contains(s) || self.places.contains(s) {
                return s.to_string();
            }
        }
        w.to_string()
    }

    /// Canonical content words in order, stopwords removed.
    pub fn content(&self, text: &str) -> Vec<String> {
        let words = tokens(text);
        let mut out = Vec::new();
        let mut i = 0;
        'outer: while i < words.len() {
            for (phrase, to) in &self.phrases {
                if words[i..].starts_with(phrase) {
                    out.push(to.clone());
                    i += phrase.len();
                    continue 'outer;
                }
            }
            let w = self.canon_word(&words[i]);
            if !STOPWORDS.contains(&w.as_str()) {
                out.push(w);
            }
            i += 1;
        }
        out
    }

    fn content_set(&self, text: &str) -> BTreeSet<String> {
        self.content(text).into_iter().collect()
    }

    /// Content words plus the members of any category or abstract verb.
    fn expanded(&self, text: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for w in self.content(text) {
            if let Some(g) = self.groups.get(&w) {
                out.extend(g.iter().cloned());
            }
            out.insert(w);
        }
        out
    }

    pub fn items_in(&self, text: &str) -> Vec<String> {
        self.content(text)
            .into_iter()
            .filter(|w| self.items.contains(w))
            .collect()
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        let (x, y) = (self.expanded(a), self.expanded(b));
        if x.is_empty() || y.is_empty() {
            return 0.0;
        }
        let common = x.intersection(&y).count() as f64;
        common / ((x.len() * y.len()) as f64).sqrt()
    }

    /// (items, place) when `text` moves objects somewhere.
    fn delivery(&self, text: &str) -> Option<(BTreeSet<String>, String)> {
        let words = self.content(text);
        if !words.iter().any(|w| w == "put") {
            return None;
        }
        let items: BTreeSet<String> = words
            .iter()
            .filter(|w| self.items.contains(*w))
            .cloned()
            .collect();
        let place = words
            .iter()
            .rev()
            .find(|w| self.places.contains(*w))?
            .clone();
        (!items.is_empty()).then_some((items, place))
    }
}

struct GeneratorPrompt {
    examples: Vec<(String, Vec<String>)>,
    candidates: Vec<String>,
    instruction: String,
    history: Vec<String>,
}

fn numbered(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?:^|\s)\d+\.(?:\s|$)").expect("valid regex"));
    re.split(text)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.strip_prefix(key).map(str::trim)
}

fn parse_generator(prompt: &str) -> Option<GeneratorPrompt> {
    let lines: Vec<&str> = prompt.lines().collect();
    let mut tasks: Vec<(String, Vec<String>)> = Vec::new();
    let mut library = None;
    let mut i = 0;
    while i < lines.len() {
        if let Some(task) = field(lines[i], "Task:") {
            let steps = lines
                .get(i + 1)
                .and_then(|l| field(l, "skill steps:"))
                .map(numbered)
                .unwrap_or_default();
            tasks.push((task.to_string(), steps));
        }
        if let Some(lib) = field(lines[i], "Skill library:") {
            library = Some(lib);
        }
        i += 1;
    }
    let (instruction, history) = tasks.pop()?;
    let candidates = library?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    Some(GeneratorPrompt {
        examples: tasks,
        candidates,
        instruction,
        history,
    })
}

/// Deterministic planning LM for the generator and task-retriever roles.
pub struct HeuristicPlanner {
    lexicon: Lexicon,
}

impl HeuristicPlanner {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    /// Clauses of an instruction, split on ", then".
    fn clauses(text: &str) -> Vec<String> {
        let text = text.trim().trim_end_matches('.');
        text.split(", then ")
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect()
    }

    /// "(verb, object)" pairs the instruction says not to do.
    fn negations(&self, text: &str) -> Vec<BTreeSet<String>> {
        text.split(" but do not ")
            .skip(1)
            .map(|rest| self.content_set(rest.split(',').next().unwrap_or(rest)))
            .collect()
    }

    fn content_set(&self, text: &str) -> BTreeSet<String> {
        self.lexicon.content_set(text)
    }

    fn negated(&self, skill: &str, negations: &[BTreeSet<String>]) -> bool {
        let c = self.content_set(skill);
        negations.iter().any(|n| !n.is_empty() && n.is_subset(&c))
    }

    fn delivered(&self, history: &[String]) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for h in history {
            if let Some((items, place)) = self.lexicon.delivery(h) {
                out.entry(place).or_default().extend(items);
            }
        }
        out
    }

    /// (covered, uncovered) items of a delivery step.
    fn coverage(
        &self,
        step: &str,
        history: &[String],
    ) -> Option<(BTreeSet<String>, BTreeSet<String>, String)> {
        let (items, place) = self.lexicon.delivery(step)?;
        let done = self.delivered(history).remove(&place).unwrap_or_default();
        let covered = items.intersection(&done).cloned().collect();
        let uncovered = items.difference(&done).cloned().collect();
        Some((covered, uncovered, place))
    }

    fn clause_done(&self, clause: &str, history: &[String]) -> bool {
        if let Some((_, uncovered, _)) = self.coverage(clause, history) {
            return uncovered.is_empty();
        }
        let c = self.content_set(clause);
        !c.is_empty() && history.iter().any(|h| c.is_subset(&self.content_set(h)))
    }

    /// First step of an example not yet reflected in the history.
    fn next_step(
        &self,
        steps: &[String],
        history: &[String],
        negations: &[BTreeSet<String>],
    ) -> Option<String> {
        let mut pos = 0;
        for s in steps {
            if self.negated(s, negations) {
                continue;
            }
            if let Some(found) = history[pos..].iter().position(|h| h == s) {
                pos += found + 1;
                continue;
            }
            if let Some((_, uncovered, _)) = self.coverage(s, history) {
                if uncovered.is_empty() {
                    continue;
                }
            }
            return Some(s.clone());
        }
        None
    }

    /// A candidate delivering only not-yet-delivered items of `step` to the
    /// same place.
    fn narrower(&self, step: &str, p: &GeneratorPrompt) -> Option<String> {
        let (covered, uncovered, place) = self.coverage(step, &p.history)?;
        if covered.is_empty() || uncovered.is_empty() {
            return None;
        }
        self.best_delivery(&uncovered, &place, p)
    }

    /// The candidate moving the most of `wanted` to `place`, and nothing else.
    fn best_delivery(
        &self,
        wanted: &BTreeSet<String>,
        place: &str,
        p: &GeneratorPrompt,
    ) -> Option<String> {
        let mut best: Option<(usize, &String)> = None;
        for c in &p.candidates {
            let Some((items, cplace)) = self.lexicon.delivery(c) else {
                continue;
            };
            if cplace == place
                && items.is_subset(wanted)
                && best.is_none_or(|(n, _)| items.len() > n)
            {
                best = Some((items.len(), c));
            }
        }
        best.map(|(_, c)| c.clone())
    }

    /// A bare "put X P" needs X in hand next to P; walks and grabs first
    /// when the history does not show them.
    fn hand_step(&self, skill: String, p: &GeneratorPrompt) -> String {
        let words = tokens(&skill);
        let [verb, item, place] = words.as_slice() else {
            return skill;
        };
        if verb != "put" {
            return skill;
        }
        let grab = format!("grab {item}");
        let held = p
            .history
            .iter()
            .rev()
            .take_while(|h| !(h.starts_with("put ") && tokens(h).contains(item)))
            .any(|h| *h == grab);
        let last = p.history.last().map(String::as_str);
        let offer = |c: String| p.candidates.contains(&c).then_some(c);
        let walk_item = format!("walk {item}");
        let walk_place = format!("walk {place}");
        let step = if !held {
            if last == Some(walk_item.as_str()) {
                offer(grab)
            } else {
                offer(walk_item).or_else(|| offer(grab))
            }
        } else if last != Some(walk_place.as_str()) {
            offer(walk_place)
        } else {
            None
        };
        step.unwrap_or(skill)
    }

    /// The destination of a clause that moves objects: the last place named.
    fn place_of(&self, text: &str) -> Option<String> {
        let words = self.lexicon.content(text);
        if !words.iter().any(|w| w == "put") {
            return None;
        }
        words
            .into_iter()
            .rev()
            .find(|w| self.lexicon.places.contains(w))
    }

    /// Whether a candidate or example step contradicts the clause's
    /// destination.
    fn wrong_place(&self, place: Option<&str>, text: &str) -> bool {
        match (place, self.lexicon.delivery(text)) {
            (Some(want), Some((_, got))) => want != got,
            _ => false,
        }
    }

    fn exact_candidate(
        &self,
        clause: &str,
        p: &GeneratorPrompt,
        neg: &[BTreeSet<String>],
    ) -> Option<String> {
        let want = self.content_set(clause);
        p.candidates
            .iter()
            .find(|c| self.content_set(c) == want && !self.negated(c, neg))
            .cloned()
    }

    /// Examples ranked by similarity to the clause, dropping those that
    /// deliver somewhere else and those far below the best match.
    fn ranked_examples(
        &self,
        clause: &str,
        place: Option<&str>,
        p: &GeneratorPrompt,
    ) -> Vec<usize> {
        let mut ranked: Vec<(f64, usize)> = p
            .examples
            .iter()
            .enumerate()
            .filter(|(_, (task, steps))| {
                !self.wrong_place(place, task) && !steps.iter().any(|s| self.wrong_place(place, s))
            })
            .map(|(i, (task, _))| (self.lexicon.similarity(clause, task), i))
            .filter(|(s, _)| *s > 0.0)
            .collect();
        let Some(best) = ranked.iter().map(|r| r.0).max_by(f64::total_cmp) else {
            return Vec::new();
        };
        ranked.retain(|(s, _)| *s >= 0.6 * best);
        // examples whose steps mention everything the clause asks for first,
        // then by similarity, then the one starting earliest in the clause
        let words = self.lexicon.content(clause);
        let start = |i: usize| {
            let have = self.lexicon.expanded(&p.examples[i].0);
            words
                .iter()
                .position(|w| have.contains(w))
                .unwrap_or(words.len())
        };
        let mut scored: Vec<(f64, f64, usize, usize)> = ranked
            .into_iter()
            .map(|(s, i)| (self.recall(clause, &p.examples[i]), s, start(i), i))
            .collect();
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(b.1.total_cmp(&a.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        let mut kept: Vec<usize> = scored.into_iter().map(|(_, _, _, i)| i).collect();
        // an example whose steps the history is partway through comes first
        let last = p.history.last();
        kept.sort_by_key(|&i| {
            let steps = &p.examples[i].1;
            let started = last.is_some_and(|l| steps[..steps.len().saturating_sub(1)].contains(l));
            !started
        });
        kept
    }

    /// Share of the clause's words that the example's task or steps cover.
    fn recall(&self, clause: &str, example: &(String, Vec<String>)) -> f64 {
        let want = self.content_set(clause);
        if want.is_empty() {
            return 0.0;
        }
        let mut have = self.lexicon.expanded(&example.0);
        for s in &example.1 {
            have.extend(self.lexicon.expanded(s));
        }
        want.intersection(&have).count() as f64 / want.len() as f64
    }

    /// Items the clause asks to move: the ones it names, or else the members
    /// of its categories that the closest example moves.
    fn wanted_items(
        &self,
        clause: &str,
        place: &str,
        p: &GeneratorPrompt,
        ranked: &[usize],
    ) -> BTreeSet<String> {
        let named: BTreeSet<String> = self.lexicon.items_in(clause).into_iter().collect();
        if !named.is_empty() {
            return named;
        }
        let category = self.category_items(clause);
        for &i in ranked {
            let moved = self.example_items(i, place, p);
            let hit: BTreeSet<String> = if category.is_empty() {
                moved
            } else {
                moved.intersection(&category).cloned().collect()
            };
            if !hit.is_empty() {
                return hit;
            }
        }
        category
    }

    fn category_items(&self, clause: &str) -> BTreeSet<String> {
        self.lexicon
            .content(clause)
            .iter()
            .filter_map(|w| self.lexicon.groups.get(w))
            .flatten()
            .filter(|i| self.lexicon.items.contains(*i))
            .cloned()
            .collect()
    }

    /// Items an example moves to `place`.
    fn example_items(&self, i: usize, place: &str, p: &GeneratorPrompt) -> BTreeSet<String> {
        let (task, steps) = &p.examples[i];
        let mut moved = BTreeSet::new();
        for s in steps.iter().chain([task]) {
            if let Some((items, to)) = self.lexicon.delivery(s) {
                if to == place {
                    moved.extend(items);
                }
            }
        }
        moved
    }

    fn follow_examples(
        &self,
        ranked: &[usize],
        place: Option<&str>,
        remaining: Option<&BTreeSet<String>>,
        p: &GeneratorPrompt,
        neg: &[BTreeSet<String>],
    ) -> Option<String> {
        let off_target = |text: &str| {
            let items = self.lexicon.items_in(text);
            remaining.is_some_and(|r| !items.is_empty() && !items.iter().any(|i| r.contains(i)))
        };
        // a delivery moving something not asked for
        let extra = |text: &str| {
            remaining.is_some_and(|r| {
                self.lexicon
                    .delivery(text)
                    .is_some_and(|(items, _)| !items.is_subset(r))
            })
        };
        for &i in ranked {
            let (task, steps) = &p.examples[i];
            if self
                .coverage(task, &p.history)
                .is_some_and(|(_, u, _)| u.is_empty())
            {
                continue;
            }
            if let (Some(pl), Some(r)) = (place, remaining) {
                let moved = self.example_items(i, pl, p);
                if !moved.is_empty() && moved.is_disjoint(r) {
                    continue;
                }
            }
            let Some(step) = self.next_step(steps, &p.history, neg) else {
                continue;
            };
            if off_target(&step) {
                continue;
            }
            if let Some(n) = self.narrower(&step, p) {
                return Some(n);
            }
            if p.candidates.contains(&step) {
                return Some(step);
            }
            let snapped = p
                .candidates
                .iter()
                .filter(|c| {
                    !self.negated(c, neg)
                        && !self.wrong_place(place, c)
                        && !off_target(c)
                        && !extra(c)
                })
                .map(|c| (self.lexicon.similarity(&step, c), c))
                .filter(|(s, _)| *s >= 0.5)
                .max_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((_, c)) = snapped {
                return Some(c.clone());
            }
        }
        None
    }

    fn fallback(
        &self,
        clause: &str,
        place: Option<&str>,
        remaining: Option<&BTreeSet<String>>,
        p: &GeneratorPrompt,
        neg: &[BTreeSet<String>],
    ) -> String {
        let delivered = self.delivered(&p.history);
        let redundant = |c: &String| {
            self.lexicon
                .delivery(c)
                .is_some_and(|(items, to)| delivered.get(&to).is_some_and(|d| items.is_subset(d)))
        };
        // prefer skills about objects still to be moved, then unused ones,
        // then the closest wording
        let score = |c: &String| {
            let items = self.lexicon.items_in(c);
            let target = match remaining {
                Some(r) if !r.is_empty() && items.iter().any(|i| r.contains(i)) => 2,
                _ if items.is_empty() => 1,
                _ => 0,
            };
            let fresh = u8::from(!p.history.contains(c));
            (target, fresh, self.lexicon.similarity(clause, c))
        };
        let mut best: Option<((u8, u8, f64), &String)> = None;
        for c in p
            .candidates
            .iter()
            .filter(|c| !self.negated(c, neg) && !self.wrong_place(place, c) && !redundant(c))
        {
            let s = score(c);
            let better = match best {
                None => true,
                Some((b, _)) => (s.0, s.1) > (b.0, b.1) || ((s.0, s.1) == (b.0, b.1) && s.2 > b.2),
            };
            if better {
                best = Some((s, c));
            }
        }
        best.map(|(_, c)| c.clone())
            .unwrap_or_else(|| p.candidates.first().cloned().unwrap_or_default())
    }

    fn generate(&self, p: &GeneratorPrompt) -> String {
        let skill = self.choose(p);
        self.hand_step(skill, p)
    }

    fn choose(&self, p: &GeneratorPrompt) -> String {
        let clauses = Self::clauses(&p.instruction);
        let neg = self.negations(&p.instruction);
        let clause = clauses
            .iter()
            .find(|c| !self.clause_done(c, &p.history))
            .or(clauses.last())
            .cloned()
            .unwrap_or_default();
        let clause = clause
            .split(" but do not ")
            .next()
            .unwrap_or(&clause)
            .to_string();
        if let Some(c) = self.exact_candidate(&clause, p, &neg) {
            if !p.history.contains(&c) || clauses.len() > 1 {
                return c;
            }
        }
        let place = self.place_of(&clause);
        let ranked = self.ranked_examples(&clause, place.as_deref(), p);
        let remaining = place.as_ref().map(|pl| {
            let wanted = self.wanted_items(&clause, pl, p, &ranked);
            let done = self.delivered(&p.history).remove(pl).unwrap_or_default();
            let left: BTreeSet<String> = wanted.difference(&done).cloned().collect();
            if left.is_empty() && self.lexicon.items_in(&clause).is_empty() {
                // the examples' items are done; carry on with the rest of the category
                return self
                    .category_items(&clause)
                    .difference(&done)
                    .cloned()
                    .collect();
            }
            left
        });
        if let Some(step) =
            self.follow_examples(&ranked, place.as_deref(), remaining.as_ref(), p, &neg)
        {
            return step;
        }
        if let (Some(pl), Some(r)) = (&place, &remaining) {
            if let Some(c) = self.best_delivery(r, pl, p) {
                return c;
            }
        }
        self.fallback(&clause, place.as_deref(), remaining.as_ref(), p, &neg)
    }

    /// Rewrites `skill` keeping only `keep` in its "a and b" item list.
    fn with_items(&self, skill: &str, keep: &[String]) -> Option<String> {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| Regex::new(r"(\w+) and (\w+)").expect("valid regex"));
        let caps = re
            .captures_iter(skill)
            .find(|c| self.lexicon.items.contains(&c[1]) && self.lexicon.items.contains(&c[2]))?;
        let whole = caps.get(0)?;
        Some(format!(
            "{}{}{}",
            &skill[..whole.start()],
            keep.join(" and "),
            &skill[whole.end()..]
        ))
    }

    fn refine(&self, skill: &str, feedback: &str) -> String {
        let feedback = feedback.trim().trim_end_matches('.');
        if let Some((_, rest)) = feedback.split_once("you do not need to ") {
            return format!("{skill} but do not {rest}");
        }
        let Some((problem, remedy)) = feedback.split_once("you need to ") else {
            return format!("Make sure that {feedback}, then {skill}");
        };
        let remedy = remedy.trim_end_matches(" first").trim();
        let blocked: BTreeSet<String> = self.lexicon.items_in(problem).into_iter().collect();
        let items = self.lexicon.items_in(skill);
        let (hit, free): (Vec<String>, Vec<String>) =
            items.into_iter().partition(|i| blocked.contains(i));
        if !hit.is_empty() && !free.is_empty() {
            if let (Some(a), Some(b)) =
                (self.with_items(skill, &free), self.with_items(skill, &hit))
            {
                return format!("{a}, then {remedy}, then {b}");
            }
        }
        let mut r = remedy.to_string();
        if let Some(first) = r.get(..1) {
            r.replace_range(..1, &first.to_uppercase());
        }
        format!("{r}, then {skill}")
    }
}

fn refine_fields(prompt: &str) -> Option<(String, String)> {
    let mut skill = None;
    let mut feedback = None;
    for line in prompt.lines() {
        if let Some(s) = field(line, "Skill:") {
            skill = Some(s.to_string());
        }
        if let Some(f) = field(line, "Feedback:") {
            feedback = Some(f.to_string());
        }
    }
    Some((skill?, feedback?))
}

impl LanguageModel for HeuristicPlanner {
    fn id(&self) -> String {
        format!("heuristic-planner-v1:{}", &self.lexicon.digest()[..12])
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        req.validate()?;
        let out = match req.tag {
            Tag::Generator => parse_generator(&req.prompt).map(|p| self.generate(&p)),
            Tag::Retriever => refine_fields(&req.prompt).map(|(s, f)| self.refine(&s, &f)),
            other => return Err(LmError::NoRule { tag: other }),
        };
        match out {
            Some(s) if !s.trim().is_empty() => Ok(s),
            _ => Err(LmError::EmptyResponse),
        }
    }
}
