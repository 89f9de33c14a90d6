use super::{SkillDatabase, SkillEntry, SkillId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

const ACTIONS: &[&str] = &[
    "walk",
    "find",
    "grab",
    "open",
    "close",
    "switchon",
    "switchoff",
    "sit",
];
const VERBS: &[&str] = &[
    "prepare", "tidy", "arrange", "store", "fetch", "set up", "clean", "sort",
];

/// Generates a valid database with `counts[l]` entries at level `l + 1`.
/// Used for scale and property tests; the content is meaningless but the
/// structure (plan lengths, object-name sets) resembles a recorded one.
pub fn synthetic_database(counts: &[usize], seed: u64) -> SkillDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<SkillEntry> = Vec::new();
    for (li, &count) in counts.iter().enumerate() {
        let level = li as u32 + 1;
        let below = if level > 1 { counts[li - 1] } else { 0 };
        for index in 0..count {
            let id = SkillId::new(level, index as u32);
            let object = format!("object{}", rng.gen_range(0..200));
            let semantic = if level == 1 {
                format!("{} {} {index}", ACTIONS[index % ACTIONS.len()], object)
            } else {
                format!(
                    "{} {} level{level} {index}",
                    VERBS[rng.gen_range(0..VERBS.len())],
                    object
                )
            };
            let plan = if level == 1 {
                Vec::new()
            } else {
                let len = rng.gen_range(2..=6usize);
                (0..len)
                    .map(|_| SkillId::new(level - 1, rng.gen_range(0..below) as u32))
                    .collect()
            };
            let mut names = BTreeSet::from([object]);
            for _ in 0..rng.gen_range(2..8) {
                names.insert(format!("object{}", rng.gen_range(0..200)));
            }
            entries.push(SkillEntry {
                id,
                semantic,
                object_names: names,
                plan,
            });
        }
    }
    SkillDatabase::new(entries).expect("synthetic database is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_validity() {
        let db = synthetic_database(&[50, 10, 5], 3);
        let stats = db.stats();
        assert_eq!(stats.levels.get(&1), Some(&50));
        assert_eq!(stats.levels.get(&3), Some(&5));
        assert!(db.violations().is_empty());
    }
}
