//! Training data for skeleton generation and list-wise re-ranking.
//!
//! Every (sample, epoch, task) triple gets its own ChaCha8 stream seeded
//! from a hash of the global seed, so output does not depend on the order
//! in which samples are processed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::index::{EntryKind, IndexEntry, IndexSet};
use crate::ranker::{assign_identifiers, NONE_LABEL};
use crate::skeleton::{parse_skeleton, Position, Skeleton};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub questions: Vec<String>,
    pub sparql: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonGenExample {
    pub question: String,
    pub target_skeleton: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAlternative {
    pub identifier: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iri: Option<String>,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptFields {
    pub question: String,
    pub partial_skeleton: String,
    pub slot_label: String,
    pub alternatives: Vec<PromptAlternative>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankExample {
    pub prompt_fields: PromptFields,
    pub target_identifier: String,
}

/// Which augmentations fired; kept next to each example for auditing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmentations {
    pub k: usize,
    pub dropped_descriptions: bool,
    pub dropped_gold: bool,
    pub shuffled: bool,
    /// Gold was among the top-k results before any dropping.
    pub gold_retrieved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub main_label_prob: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub drop_description_prob: f64,
    pub drop_gold_prob: f64,
    pub shuffle_prob: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            main_label_prob: 0.8,
            k_min: 2,
            k_max: 10,
            drop_description_prob: 0.2,
            drop_gold_prob: 0.2,
            shuffle_prob: 0.2,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("sample has no questions")]
    NoQuestion,
    #[error("sample query does not parse: {0}")]
    Parse(String),
    #[error("no index label for {0}")]
    MissingLabel(String),
    #[error("sample query has no IRI to re-rank")]
    NoIri,
    #[error("{0}")]
    Identifiers(String),
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

impl SynthError {
    /// Short key used to group skips in the manifest.
    pub fn kind(&self) -> &'static str {
        match self {
            SynthError::NoQuestion => "no_question",
            SynthError::Parse(_) => "parse_error",
            SynthError::MissingLabel(_) => "missing_label",
            SynthError::NoIri => "no_iri",
            SynthError::Identifiers(_) => "identifiers",
            SynthError::Io { .. } => "io",
            SynthError::Format { .. } => "format",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Skeleton,
    Rerank,
}

/// Per-(sample, epoch, task) stream derived from the global seed.
pub fn derive_rng(seed: u64, sample: usize, epoch: usize, task: Task) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((sample as u64).to_le_bytes());
    h.update((epoch as u64).to_le_bytes());
    h.update([task as u8]);
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

fn kind_for(position: Position) -> EntryKind {
    match position {
        Position::Predicate => EntryKind::Property,
        _ => EntryKind::Entity,
    }
}

fn entry_for<'a>(indices: &'a IndexSet, iri: &str, position: Position) -> Result<&'a IndexEntry, SynthError> {
    indices
        .lookup(iri, kind_for(position))
        .ok_or_else(|| SynthError::MissingLabel(iri.to_string()))
}

/// Main label with probability `p`, else a uniform alias. Two draws always.
fn sample_label(entry: &IndexEntry, p: f64, rng: &mut impl Rng) -> String {
    let main = rng.random_bool(p);
    let alias_pick: f64 = rng.random();
    if main || entry.aliases.is_empty() {
        return entry.main_label.clone();
    }
    let i = ((alias_pick * entry.aliases.len() as f64) as usize).min(entry.aliases.len() - 1);
    entry.aliases[i].clone()
}

fn parse_sample(sample: &TrainingSample) -> Result<Skeleton, SynthError> {
    if sample.questions.is_empty() {
        return Err(SynthError::NoQuestion);
    }
    let query = parse_skeleton(&sample.sparql).map_err(|e| SynthError::Parse(e.to_string()))?;
    if !query.is_resolved() {
        return Err(SynthError::Parse("query contains placeholders".into()));
    }
    Ok(query)
}

/// Replaces every IRI of the sample query with a label placeholder.
pub fn make_skeleton_example(
    sample: &TrainingSample,
    indices: &IndexSet,
    params: &SynthParams,
    rng: &mut impl Rng,
) -> Result<SkeletonGenExample, SynthError> {
    let query = parse_sample(sample)?;
    let question = sample.questions.choose(rng).expect("non-empty").clone();
    let occurrences = query.iri_occurrences();
    if occurrences.is_empty() {
        return Ok(SkeletonGenExample {
            question,
            target_skeleton: sample.sparql.clone(),
        });
    }
    let labels = occurrences
        .iter()
        .map(|(iri, pos)| Ok(sample_label(entry_for(indices, iri, *pos)?, params.main_label_prob, rng)))
        .collect::<Result<Vec<_>, SynthError>>()?;
    let skeleton = query.templatize(0, |i, _| labels[i].clone());
    Ok(SkeletonGenExample {
        question,
        target_skeleton: skeleton.canonical(),
    })
}

/// One re-ranking example plus the augmentations that were applied.
pub fn make_rerank_example(
    sample: &TrainingSample,
    indices: &IndexSet,
    params: &SynthParams,
    rng: &mut impl Rng,
) -> Result<(RerankExample, Augmentations), SynthError> {
    let query = parse_sample(sample)?;
    let question = sample.questions.choose(rng).expect("non-empty").clone();
    let occurrences = query.iri_occurrences();
    if occurrences.is_empty() {
        return Err(SynthError::NoIri);
    }
    let from = rng.random_range(0..occurrences.len());
    let mut labels = Vec::with_capacity(occurrences.len() - from);
    for (iri, pos) in &occurrences[from..] {
        labels.push(sample_label(entry_for(indices, iri, *pos)?, params.main_label_prob, rng));
    }
    let partial = query.templatize(from, |i, _| labels[i - from].clone());
    let (gold_iri, position) = &occurrences[from];
    let slot_label = labels[0].clone();

    // (a)-(d) are drawn unconditionally so the stream layout never shifts.
    let k = rng.random_range(params.k_min..=params.k_max);
    let drop_descriptions = rng.random_bool(params.drop_description_prob);
    let drop_gold = rng.random_bool(params.drop_gold_prob);
    let shuffle = rng.random_bool(params.shuffle_prob);

    let mut alternatives = indices.search_at(*position, &slot_label, k, None);
    let gold_retrieved = alternatives.iter().any(|a| &a.entry.iri == gold_iri);
    if drop_gold {
        alternatives.retain(|a| &a.entry.iri != gold_iri);
    }
    if shuffle {
        alternatives.shuffle(rng);
    }
    let ids = assign_identifiers(alternatives.len(), true).map_err(|e| SynthError::Identifiers(e.to_string()))?;
    let mut prompt: Vec<PromptAlternative> = alternatives
        .iter()
        .zip(&ids)
        .map(|(a, id)| PromptAlternative {
            identifier: id.clone(),
            iri: Some(a.entry.iri.clone()),
            label: a.entry.main_label.clone(),
            description: if drop_descriptions { None } else { a.entry.description.clone() },
        })
        .collect();
    let none_id = ids.last().expect("None identifier").clone();
    prompt.push(PromptAlternative {
        identifier: none_id.clone(),
        iri: None,
        label: NONE_LABEL.to_string(),
        description: None,
    });
    let target_identifier = prompt
        .iter()
        .find(|a| a.iri.as_deref() == Some(gold_iri.as_str()))
        .map_or(none_id, |a| a.identifier.clone());

    let example = RerankExample {
        prompt_fields: PromptFields {
            question,
            partial_skeleton: partial.highlighted(0),
            slot_label,
            alternatives: prompt,
        },
        target_identifier,
    };
    let aug = Augmentations {
        k,
        dropped_descriptions: drop_descriptions,
        dropped_gold: drop_gold,
        shuffled: shuffle,
        gold_retrieved,
    };
    Ok((example, aug))
}

pub fn load_dataset(path: &Path) -> Result<Vec<TrainingSample>, SynthError> {
    let io = |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = serde_json::from_str(&line).map_err(|e| SynthError::Format {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochCounts {
    pub skeleton: usize,
    pub rerank: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub epochs: usize,
    pub samples: usize,
    pub counts: Vec<EpochCounts>,
    /// `task/reason` -> number of skipped examples over all epochs.
    pub skipped: BTreeMap<String, usize>,
    pub files: Vec<String>,
}

/// Writes `skeleton.ep{i}.jsonl`, `rerank.ep{i}.jsonl` and `manifest.json`.
pub fn synthesize_epochs(
    dataset: &[TrainingSample],
    indices: &IndexSet,
    params: &SynthParams,
    epochs: usize,
    seed: u64,
    out: &Path,
) -> Result<Manifest, SynthError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(out).map_err(io(out))?;
    let mut manifest = Manifest {
        seed,
        epochs,
        samples: dataset.len(),
        ..Default::default()
    };
    for epoch in 0..epochs {
        let mut counts = EpochCounts::default();
        let sk_path = out.join(format!("skeleton.ep{epoch}.jsonl"));
        let rr_path = out.join(format!("rerank.ep{epoch}.jsonl"));
        let mut sk = BufWriter::new(File::create(&sk_path).map_err(io(&sk_path))?);
        let mut rr = BufWriter::new(File::create(&rr_path).map_err(io(&rr_path))?);
        for (i, sample) in dataset.iter().enumerate() {
            let mut rng = derive_rng(seed, i, epoch, Task::Skeleton);
            match make_skeleton_example(sample, indices, params, &mut rng) {
                Ok(ex) => {
                    let line = serde_json::to_string(&ex).expect("serializable");
                    writeln!(sk, "{line}").map_err(io(&sk_path))?;
                    counts.skeleton += 1;
                }
                Err(e) => {
                    log::warn!("sample {i}, epoch {epoch}, skeleton: {e}");
                    *manifest.skipped.entry(format!("skeleton/{}", e.kind())).or_default() += 1;
                }
            }
            let mut rng = derive_rng(seed, i, epoch, Task::Rerank);
            match make_rerank_example(sample, indices, params, &mut rng) {
                Ok((ex, _)) => {
                    let line = serde_json::to_string(&ex).expect("serializable");
                    writeln!(rr, "{line}").map_err(io(&rr_path))?;
                    counts.rerank += 1;
                }
                Err(e) => {
                    log::warn!("sample {i}, epoch {epoch}, rerank: {e}");
                    *manifest.skipped.entry(format!("rerank/{}", e.kind())).or_default() += 1;
                }
            }
        }
        sk.flush().map_err(io(&sk_path))?;
        rr.flush().map_err(io(&rr_path))?;
        manifest.counts.push(counts);
        manifest.files.push(format!("skeleton.ep{epoch}.jsonl"));
        manifest.files.push(format!("rerank.ep{epoch}.jsonl"));
    }
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("serializable");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(manifest)
}
