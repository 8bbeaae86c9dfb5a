//! Label search over knowledge-graph entities and properties.
//!
//! Scoring is tiered so that an exact main-label match always ranks above
//! an exact alias match, which ranks above any token-overlap match, which
//! ranks above a character-trigram match:
//!
//! | tier              | score                                   |
//! |-------------------|-----------------------------------------|
//! | exact main label  | `exact_main`                            |
//! | exact alias       | `exact_alias`                           |
//! | token overlap     | `token_base + token_weight * jaccard`   |
//! | trigram only      | `ngram_weight * dice` (if `>= ngram_min`) |
//!
//! Labels are compared after lower-casing and collapsing every run of
//! non-alphanumeric characters to one space. Ties are broken by IRI.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{expand_iri, render_iri, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Entity,
    Property,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub iri: String,
    pub main_label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub entry: IndexEntry,
    pub score: f64,
    pub matched_text: String,
}

impl Alternative {
    pub fn iri(&self) -> &str {
        &self.entry.iri
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringWeights {
    pub exact_main: f64,
    pub exact_alias: f64,
    pub token_base: f64,
    pub token_weight: f64,
    pub ngram_weight: f64,
    pub ngram_min: f64,
}

impl Default for ScoringWeights {
    fn default() -> Self {
        Self {
            exact_main: 4.0,
            exact_alias: 3.0,
            token_base: 1.0,
            token_weight: 1.0,
            ngram_weight: 0.99,
            ngram_min: 0.3,
        }
    }
}

impl ScoringWeights {
    /// Checks that the tiers cannot overlap.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.exact_main > self.exact_alias) {
            return Err("exact_main must exceed exact_alias".into());
        }
        if !(self.exact_alias > self.token_base + self.token_weight) {
            return Err("exact_alias must exceed token_base + token_weight".into());
        }
        if !(self.token_base >= self.ngram_weight && self.ngram_weight > 0.0) {
            return Err("ngram_weight must be positive and at most token_base".into());
        }
        if !(0.0..=1.0).contains(&self.ngram_min) {
            return Err("ngram_min must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Lower-cases and collapses non-alphanumeric runs to single spaces.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

fn trigrams(normalized: &str) -> HashSet<String> {
    let padded: Vec<char> = format!(" {normalized} ").chars().collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

#[derive(Debug, Clone)]
struct LabelForm {
    text: String,
    normalized: String,
    tokens: HashSet<String>,
    grams: HashSet<String>,
}

impl LabelForm {
    fn new(text: &str) -> Self {
        let normalized = normalize(text);
        Self {
            text: text.to_string(),
            tokens: normalized.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
            grams: trigrams(&normalized),
            normalized,
        }
    }
}

#[derive(Debug, Clone)]
struct Prepared {
    entry: IndexEntry,
    /// Main label first, then aliases.
    labels: Vec<LabelForm>,
}

fn score_prepared(q: &LabelForm, labels: &[LabelForm], w: &ScoringWeights) -> Option<(f64, String)> {
    if q.normalized.is_empty() {
        return None;
    }
    if labels[0].normalized == q.normalized {
        return Some((w.exact_main, labels[0].text.clone()));
    }
    if let Some(alias) = labels[1..].iter().find(|l| l.normalized == q.normalized) {
        return Some((w.exact_alias, alias.text.clone()));
    }
    let mut best: Option<(f64, &LabelForm)> = None;
    for label in labels {
        let shared = q.tokens.intersection(&label.tokens).count();
        let score = if shared > 0 {
            let union = q.tokens.union(&label.tokens).count();
            w.token_base + w.token_weight * shared as f64 / union as f64
        } else {
            let common = q.grams.intersection(&label.grams).count();
            let dice = 2.0 * common as f64 / (q.grams.len() + label.grams.len()) as f64;
            if dice < w.ngram_min || common == 0 {
                continue;
            }
            w.ngram_weight * dice
        };
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, label));
        }
    }
    best.map(|(s, l)| (s, l.text.clone()))
}

/// Scores one entry against a query; `None` when nothing matches.
pub fn score_entry(query: &str, entry: &IndexEntry, weights: &ScoringWeights) -> Option<(f64, String)> {
    let q = LabelForm::new(query);
    let labels = labels_of(entry);
    score_prepared(&q, &labels, weights)
}

fn labels_of(entry: &IndexEntry) -> Vec<LabelForm> {
    std::iter::once(entry.main_label.as_str())
        .chain(entry.aliases.iter().map(String::as_str))
        .map(LabelForm::new)
        .collect()
}

fn by_score_then_iri(a: &Alternative, b: &Alternative) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.entry.iri.cmp(&b.entry.iri))
}

/// Sorts alternatives by descending score, ties by IRI.
pub fn sort_alternatives(alts: &mut [Alternative]) {
    alts.sort_by(by_score_then_iri);
}

#[derive(Debug, Clone, Default)]
pub struct Index {
    entries: Vec<Prepared>,
    by_iri: HashMap<String, usize>,
    postings: HashMap<String, Vec<usize>>,
    duplicates: usize,
    weights: ScoringWeights,
}

impl Index {
    /// Builds an index; a repeated IRI replaces the earlier entry.
    pub fn build(entries: impl IntoIterator<Item = IndexEntry>) -> Self {
        Self::with_weights(entries, ScoringWeights::default())
    }

    pub fn with_weights(entries: impl IntoIterator<Item = IndexEntry>, weights: ScoringWeights) -> Self {
        let mut index = Index {
            weights,
            ..Default::default()
        };
        for entry in entries {
            let prepared = Prepared {
                labels: labels_of(&entry),
                entry,
            };
            match index.by_iri.get(&prepared.entry.iri) {
                Some(&i) => {
                    index.duplicates += 1;
                    index.entries[i] = prepared;
                }
                None => {
                    index.by_iri.insert(prepared.entry.iri.clone(), index.entries.len());
                    index.entries.push(prepared);
                }
            }
        }
        for (i, p) in index.entries.iter().enumerate() {
            let grams: HashSet<&String> = p.labels.iter().flat_map(|l| &l.grams).collect();
            for g in grams {
                index.postings.entry(g.clone()).or_default().push(i);
            }
        }
        if index.duplicates > 0 {
            log::warn!("index build: {} duplicate IRIs replaced", index.duplicates);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn weights(&self) -> &ScoringWeights {
        &self.weights
    }

    pub fn get(&self, iri: &str) -> Option<&IndexEntry> {
        self.by_iri.get(iri).map(|&i| &self.entries[i].entry)
    }

    pub fn entries(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.iter().map(|p| &p.entry)
    }

    /// Top-`k` matches for `query`, restricted to `restrict_to` before
    /// truncation when given.
    pub fn search(
        &self,
        query: &str,
        k: usize,
        restrict_to: Option<&HashSet<String>>,
    ) -> Vec<Alternative> {
        let q = LabelForm::new(query);
        if q.normalized.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut candidates: Vec<usize> = match restrict_to {
            Some(allowed) if allowed.len() < self.entries.len() => allowed
                .iter()
                .filter_map(|iri| self.by_iri.get(iri).copied())
                .collect(),
            _ => {
                let mut seen = HashSet::new();
                q.grams
                    .iter()
                    .filter_map(|g| self.postings.get(g))
                    .flatten()
                    .copied()
                    .filter(|i| seen.insert(*i))
                    .collect()
            }
        };
        if let Some(allowed) = restrict_to {
            candidates.retain(|&i| allowed.contains(&self.entries[i].entry.iri));
        }
        let mut alts: Vec<Alternative> = candidates
            .into_iter()
            .filter_map(|i| {
                let p = &self.entries[i];
                score_prepared(&q, &p.labels, &self.weights).map(|(score, matched_text)| Alternative {
                    entry: p.entry.clone(),
                    score,
                    matched_text,
                })
            })
            .collect();
        sort_alternatives(&mut alts);
        alts.truncate(k);
        alts
    }

    /// Reads `iri<TAB>main_label<TAB>aliases<TAB>description` lines.
    pub fn load_tsv(path: &Path, kind: EntryKind) -> Result<Self, IndexError> {
        Ok(Self::build(read_tsv(path, kind)?))
    }

    /// Writes the entries back as TSV with compact IRIs, sorted by IRI.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut entries: Vec<&IndexEntry> = self.entries().collect();
        entries.sort_by(|a, b| a.iri.cmp(&b.iri));
        for e in entries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                render_iri(&e.iri),
                e.main_label,
                e.aliases.join(";"),
                e.description.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    }
}

pub fn read_tsv(path: &Path, kind: EntryKind) -> Result<Vec<IndexEntry>, IndexError> {
    let file = File::open(path).map_err(|source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_tsv(BufReader::new(file), kind, path)
}

pub fn parse_tsv(reader: impl BufRead, kind: EntryKind, path: &Path) -> Result<Vec<IndexEntry>, IndexError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let format_err = |message: String| IndexError::Format {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 4 {
            return Err(format_err(format!("expected 2 to 4 tab-separated columns, found {}", cols.len())));
        }
        let iri = expand_iri(cols[0]).ok_or_else(|| format_err(format!("cannot read IRI {:?}", cols[0])))?;
        let main_label = cols[1].trim().to_string();
        if main_label.is_empty() {
            return Err(format_err("empty main label".into()));
        }
        let mut aliases: Vec<String> = Vec::new();
        for alias in cols.get(2).copied().unwrap_or("").split(';').map(str::trim) {
            if !alias.is_empty() && !aliases.iter().any(|a| a == alias) {
                aliases.push(alias.to_string());
            }
        }
        let description = cols
            .get(3)
            .map(|d| d.trim())
            .filter(|d| !d.is_empty())
            .map(str::to_string);
        out.push(IndexEntry {
            iri,
            main_label,
            aliases,
            description,
            kind,
        });
    }
    Ok(out)
}

/// The entity and property indices searched during resolution.
#[derive(Debug, Clone, Default)]
pub struct IndexSet {
    pub entities: Index,
    pub properties: Index,
}

impl IndexSet {
    pub fn new(entities: Index, properties: Index) -> Self {
        Self {
            entities,
            properties,
        }
    }

    pub fn load(entity_tsv: &Path, property_tsv: &Path) -> Result<Self, IndexError> {
        Self::load_with(entity_tsv, property_tsv, ScoringWeights::default())
    }

    pub fn load_with(entity_tsv: &Path, property_tsv: &Path, weights: ScoringWeights) -> Result<Self, IndexError> {
        Ok(Self {
            entities: Index::with_weights(read_tsv(entity_tsv, EntryKind::Entity)?, weights),
            properties: Index::with_weights(read_tsv(property_tsv, EntryKind::Property)?, weights),
        })
    }

    pub fn index(&self, kind: EntryKind) -> &Index {
        match kind {
            EntryKind::Entity => &self.entities,
            EntryKind::Property => &self.properties,
        }
    }

    /// Looks an IRI up in `preferred` first, then the other index.
    pub fn lookup(&self, iri: &str, preferred: EntryKind) -> Option<&IndexEntry> {
        let other = match preferred {
            EntryKind::Entity => EntryKind::Property,
            EntryKind::Property => EntryKind::Entity,
        };
        self.index(preferred).get(iri).or_else(|| self.index(other).get(iri))
    }

    /// Searches the index matching a slot position; `Unknown` searches both
    /// and keeps the best `k` of the merged list.
    pub fn search_at(
        &self,
        position: Position,
        query: &str,
        k: usize,
        restriction: Option<&HashSet<String>>,
    ) -> Vec<Alternative> {
        match position {
            Position::Subject | Position::Object => self.entities.search(query, k, restriction),
            Position::Predicate => self.properties.search(query, k, restriction),
            Position::Unknown => {
                let mut both = self.entities.search(query, k, restriction);
                both.extend(self.properties.search(query, k, restriction));
                sort_alternatives(&mut both);
                both.truncate(k);
                both
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WD: &str = "http://www.wikidata.org/entity/";
    const WDT: &str = "http://www.wikidata.org/prop/direct/";

    fn entry(iri: &str, label: &str, aliases: &[&str], kind: EntryKind) -> IndexEntry {
        IndexEntry {
            iri: expand_iri(iri).unwrap(),
            main_label: label.into(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
            description: None,
            kind,
        }
    }

    fn toy_entities() -> Index {
        Index::build([
            entry("wd:Q1", "Berlin", &[], EntryKind::Entity),
            entry("wd:Q2", "Germany", &["Federal Republic of Germany", "DE"], EntryKind::Entity),
            entry("wd:Q3", "Paris", &[], EntryKind::Entity),
            entry("wd:Q4", "France", &["French Republic"], EntryKind::Entity),
            entry("wd:Q5", "German", &["German language"], EntryKind::Entity),
        ])
    }

    fn toy_properties() -> Vec<IndexEntry> {
        let tsv = "# toy properties\nwdt:P1\tcapital of\tis capital of\tcountry this city is the capital of\n\
                   wdt:P17\tcountry\tin country;state\tsovereign state of this item\n\
                   wdt:P2\tpopulation\tinhabitants\tnumber of people\n";
        parse_tsv(tsv.as_bytes(), EntryKind::Property, Path::new("toy")).unwrap()
    }

    /// Scores every entry independently and sorts; the reference for search.
    fn exhaustive(entries: &[IndexEntry], query: &str, k: usize) -> Vec<(String, f64)> {
        let w = ScoringWeights::default();
        let mut scored: Vec<(String, f64)> = entries
            .iter()
            .filter_map(|e| score_entry(query, e, &w).map(|(s, _)| (e.iri.clone(), s)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    #[test]
    fn empty_index() {
        let index = Index::build([]);
        assert!(index.is_empty());
        assert!(index.search("anything", 10, None).is_empty());
    }

    #[test]
    fn duplicate_iri_last_wins() {
        let index = Index::build([
            entry("wd:Q1", "one", &[], EntryKind::Entity),
            entry("wd:Q2", "two", &[], EntryKind::Entity),
            entry("wd:Q3", "three", &[], EntryKind::Entity),
            entry("wd:Q4", "four", &[], EntryKind::Entity),
            entry("wd:Q2", "deux", &[], EntryKind::Entity),
        ]);
        assert_eq!(index.len(), 4);
        assert_eq!(index.duplicates(), 1);
        assert_eq!(index.get(&format!("{WD}Q2")).unwrap().main_label, "deux");
        assert!(index.search("two", 10, None).is_empty());
    }

    #[test]
    fn property_file_search() {
        let entries = toy_properties();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[1].aliases, ["in country", "state"]);
        let index = Index::build(entries.clone());
        let hits = index.search("capital", 10, None);
        let expected = exhaustive(&entries, "capital", 10);
        assert_eq!(expected[0].0, format!("{WDT}P1"));
        assert_eq!(
            hits.iter().map(|a| (a.entry.iri.clone(), a.score)).collect::<Vec<_>>(),
            expected
        );
        assert_eq!(hits[0].entry.main_label, "capital of");
    }

    #[test]
    fn entity_search_examples() {
        let index = toy_entities();
        let all: Vec<IndexEntry> = index.entries().cloned().collect();
        let hits = index.search("Germany", 10, None);
        assert_eq!(hits[0].entry.iri, format!("{WD}Q2"));
        assert_eq!(hits[0].score, ScoringWeights::default().exact_main);
        assert_eq!(
            hits.iter().map(|a| (a.entry.iri.clone(), a.score)).collect::<Vec<_>>(),
            exhaustive(&all, "Germany", 10)
        );

        let only_q1 = HashSet::from([format!("{WD}Q1")]);
        assert!(index.search("Germany", 10, Some(&only_q1)).is_empty());
        assert!(index.search("xyzzy-no-match", 10, None).is_empty());
    }

    #[test]
    fn matching_is_case_insensitive_and_alias_aware() {
        let index = toy_entities();
        assert_eq!(index.search("gErMaNy", 1, None)[0].entry.iri, format!("{WD}Q2"));
        let hits = index.search("french republic", 3, None);
        assert_eq!(hits[0].entry.iri, format!("{WD}Q4"));
        assert_eq!(hits[0].score, ScoringWeights::default().exact_alias);
        assert_eq!(hits[0].matched_text, "French Republic");
    }

    #[test]
    fn restriction_applies_before_truncation() {
        let entries: Vec<IndexEntry> = (0..30)
            .map(|i| entry(&format!("wd:Q{}", 100 + i), &format!("river {i}"), &[], EntryKind::Entity))
            .collect();
        let index = Index::build(entries);
        let allowed = HashSet::from([format!("{WD}Q129")]);
        let hits = index.search("river", 1, Some(&allowed));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].entry.iri, format!("{WD}Q129"));
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let bad = "wd:Q1\tBerlin\n\nwd:Q2\n";
        match parse_tsv(bad.as_bytes(), EntryKind::Entity, Path::new("x.tsv")) {
            Err(IndexError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = "nope:Q1\tBerlin\n";
        assert!(parse_tsv(bad.as_bytes(), EntryKind::Entity, Path::new("x.tsv")).is_err());
        let bad = "wd:Q1\t  \n";
        assert!(parse_tsv(bad.as_bytes(), EntryKind::Entity, Path::new("x.tsv")).is_err());
    }

    #[test]
    fn default_weights_are_valid() {
        ScoringWeights::default().validate().unwrap();
        let bad = ScoringWeights {
            exact_alias: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn label() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["river", "city", "Rhine", "capital", "of", "new", "york", "ber", "lin"]), 1..4)
            .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn search_invariants(
            labels in prop::collection::vec((label(), prop::collection::vec(label(), 0..2)), 1..25),
            query in label(),
            k in 1usize..12,
            mask in prop::collection::vec(any::<bool>(), 25),
        ) {
            let entries: Vec<IndexEntry> = labels.iter().enumerate().map(|(i, (l, a))| IndexEntry {
                iri: format!("{WD}Q{i}"),
                main_label: l.clone(),
                aliases: a.clone(),
                description: None,
                kind: EntryKind::Entity,
            }).collect();
            let index = Index::build(entries.clone());
            let allowed: HashSet<String> = entries.iter().zip(&mask).filter(|(_, m)| **m).map(|(e, _)| e.iri.clone()).collect();

            let a = index.search(&query, k, None);
            prop_assert_eq!(&a, &index.search(&query, k, None));
            let longer = index.search(&query, k + 1, None);
            prop_assert_eq!(&a[..], &longer[..a.len()]);
            prop_assert!(a.len() <= k);
            let expected = exhaustive(&entries, &query, k);
            prop_assert_eq!(a.iter().map(|x| (x.entry.iri.clone(), x.score)).collect::<Vec<_>>(), expected);

            if entries.iter().any(|e| normalize(&e.main_label) == normalize(&query)) {
                prop_assert_eq!(a[0].score, ScoringWeights::default().exact_main);
                prop_assert!(normalize(&a[0].entry.main_label) == normalize(&query));
            }

            let r = index.search(&query, k, Some(&allowed));
            prop_assert!(r.iter().all(|x| allowed.contains(&x.entry.iri)));
            let mut filtered = index.search(&query, usize::MAX, None);
            filtered.retain(|x| allowed.contains(&x.entry.iri));
            filtered.truncate(k);
            prop_assert_eq!(r, filtered);
        }
    }
}
