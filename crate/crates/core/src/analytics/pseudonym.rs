use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::AnalyticsError;
use crate::graph::OrgGraph;

static ADJECTIVES: &str = include_str!("../../data/adjectives.txt");
static ANIMALS: &str = include_str!("../../data/animals.txt");

/// The checked-in adjective and animal word lists.
pub fn pseudonym_words() -> &'static (Vec<&'static str>, Vec<&'static str>) {
    static WORDS: OnceLock<(Vec<&'static str>, Vec<&'static str>)> = OnceLock::new();
    WORDS.get_or_init(|| {
        let read = |s: &'static str| s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        (read(ADJECTIVES), read(ANIMALS))
    })
}

/// Number of distinct `adjective-animal` pseudonyms available.
pub fn pseudonym_capacity() -> usize {
    let (a, b) = pseudonym_words();
    a.len() * b.len()
}

/// Original display name → pseudonym, for authorized de-anonymization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PseudonymMapping {
    pub names: BTreeMap<String, String>,
}

impl PseudonymMapping {
    /// Two tab-separated columns (original, pseudonym), sorted by original,
    /// LF line endings. Tabs, newlines and backslashes in names are escaped.
    pub fn to_text(&self) -> String {
        let escape = |s: &str| s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r");
        self.names.iter().map(|(o, p)| format!("{}\t{}\n", escape(o), escape(p))).collect()
    }

    pub fn pseudonym(&self, original: &str) -> Option<&str> {
        self.names.get(original).map(String::as_str)
    }
}

/// Replaces repository and module display names with seeded
/// `adjective-animal` pseudonyms. Equal names map to equal pseudonyms and
/// distinct names to distinct ones. Ids, library coordinates and CVE ids are
/// left untouched.
pub fn pseudonymize(g: &OrgGraph, seed: u64) -> Result<(OrgGraph, PseudonymMapping), AnalyticsError> {
    let originals: BTreeSet<String> =
        g.repositories().map(|r| r.name.clone()).chain(g.modules().map(|m| m.name.clone())).collect();
    let capacity = pseudonym_capacity();
    if originals.len() > capacity {
        return Err(AnalyticsError::PseudonymCapacity { needed: originals.len(), capacity });
    }

    let (adjectives, animals) = pseudonym_words();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, capacity, originals.len());
    let names: BTreeMap<String, String> = originals
        .into_iter()
        .zip(picks.iter())
        .map(|(name, k)| (name, format!("{}-{}", adjectives[k / animals.len()], animals[k % animals.len()])))
        .collect();

    let mut out = g.clone();
    let repo_ids: Vec<_> = g.repositories().map(|r| r.id.clone()).collect();
    for id in repo_ids {
        let repo = out.repository_mut(&id).expect("id taken from graph");
        repo.name = names[&repo.name].clone();
    }
    let module_ids: Vec<_> = g.modules().map(|m| m.id.clone()).collect();
    for id in module_ids {
        let module = out.module_mut(&id).expect("id taken from graph");
        module.name = names[&module.name].clone();
    }
    Ok((out, PseudonymMapping { names }))
}
