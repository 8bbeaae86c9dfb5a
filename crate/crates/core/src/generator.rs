//! Skeleton generation and shortlisting.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{GenerateRequest, LmClient, LmError};
use crate::skeleton::{parse_skeleton, Skeleton};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCandidate {
    pub text: String,
    /// Sum of token log-probabilities; never positive.
    pub seq_logprob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub beam_width: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("no fixture candidates for question {0:?}")]
    UnknownQuestion(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Fixture {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub trait Generator: Send + Sync {
    fn generate(&self, question: &str, params: &GenerationParams) -> Result<Vec<GeneratedCandidate>, GenerationError>;

    fn name(&self) -> &str;
}

/// One line of a mock-generation fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub question: String,
    /// Gold query, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparql: Option<String>,
    pub candidates: Vec<GeneratedCandidate>,
}

/// Replays fixture candidates keyed by question text.
#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    entries: HashMap<String, MockEntry>,
}

impl MockGenerator {
    pub fn new(entries: impl IntoIterator<Item = MockEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.question.trim().to_string(), e)).collect(),
        }
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, GenerationError> {
        let file = File::open(path).map_err(|source| GenerationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| GenerationError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: MockEntry = serde_json::from_str(&line).map_err(|e| GenerationError::Fixture {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn entry(&self, question: &str) -> Option<&MockEntry> {
        self.entries.get(question.trim())
    }

    pub fn gold(&self, question: &str) -> Option<&str> {
        self.entry(question)?.sparql.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Generator for MockGenerator {
    fn generate(&self, question: &str, params: &GenerationParams) -> Result<Vec<GeneratedCandidate>, GenerationError> {
        let entry = self
            .entry(question)
            .ok_or_else(|| GenerationError::UnknownQuestion(question.to_string()))?;
        Ok(entry.candidates.iter().take(params.beam_width.max(1)).cloned().collect())
    }

    fn name(&self) -> &str {
        "mock"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShot {
    pub question: String,
    pub skeleton: String,
}

/// Samples skeletons from the language model service.
pub struct LmGenerator {
    client: Arc<LmClient>,
    few_shot: Vec<FewShot>,
}

impl LmGenerator {
    pub fn new(client: Arc<LmClient>, few_shot: Vec<FewShot>) -> Self {
        Self { client, few_shot }
    }

    /// Reads few-shot examples from a JSONL file of `{question, skeleton}`.
    pub fn load_few_shot(path: &Path) -> Result<Vec<FewShot>, GenerationError> {
        let text = std::fs::read_to_string(path).map_err(|source| GenerationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l).map_err(|e| GenerationError::Fixture {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

pub fn skeleton_prompt(question: &str, few_shot: &[FewShot]) -> String {
    let mut p = String::from(
        "Write a SPARQL query skeleton answering the question. Write every knowledge graph \
         entity or property as <iri>natural language label</iri> instead of its identifier.\n\n",
    );
    for ex in few_shot {
        p.push_str(&format!("Question: {}\nSkeleton: {}\n\n", ex.question, ex.skeleton));
    }
    p.push_str(&format!("Question: {question}\nSkeleton:"));
    p
}

/// Strips surrounding whitespace and Markdown code fences from model output.
pub fn clean_generated(text: &str) -> String {
    let t = text.trim();
    let t = t
        .strip_prefix("```sparql")
        .or_else(|| t.strip_prefix("```"))
        .unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim().to_string()
}

impl Generator for LmGenerator {
    fn generate(&self, question: &str, params: &GenerationParams) -> Result<Vec<GeneratedCandidate>, GenerationError> {
        let prompt = skeleton_prompt(question, &self.few_shot);
        let sequences = self.client.generate(&GenerateRequest {
            prompt: &prompt,
            n: params.beam_width,
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
        })?;
        Ok(sequences
            .into_iter()
            .map(|s| GeneratedCandidate {
                text: clean_generated(&s.text),
                seq_logprob: s.logprob.min(0.0),
            })
            .collect())
    }

    fn name(&self) -> &str {
        "lm"
    }
}

#[derive(Debug, Clone)]
pub struct Shortlisted {
    pub skeleton: Skeleton,
    pub seq_logprob: f64,
    /// Position in the generator output of the kept duplicate.
    pub source_index: usize,
}

/// Parses, deduplicates by canonical form (keeping the best log-probability),
/// sorts by descending log-probability and keeps the first `keep`.
pub fn shortlist_scored(cands: &[GeneratedCandidate], keep: usize) -> Vec<Shortlisted> {
    let mut best: Vec<Shortlisted> = Vec::new();
    let mut by_canonical: HashMap<String, usize> = HashMap::new();
    for (i, c) in cands.iter().enumerate() {
        let skeleton = match parse_skeleton(&c.text) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("dropping unparseable candidate {i}: {e}");
                continue;
            }
        };
        match by_canonical.get(&skeleton.canonical()) {
            Some(&at) => {
                if c.seq_logprob > best[at].seq_logprob {
                    best[at] = Shortlisted {
                        skeleton,
                        seq_logprob: c.seq_logprob,
                        source_index: i,
                    };
                }
            }
            None => {
                by_canonical.insert(skeleton.canonical(), best.len());
                best.push(Shortlisted {
                    skeleton,
                    seq_logprob: c.seq_logprob,
                    source_index: i,
                });
            }
        }
    }
    best.sort_by(|a, b| {
        b.seq_logprob
            .total_cmp(&a.seq_logprob)
            .then(a.source_index.cmp(&b.source_index))
    });
    best.truncate(keep);
    best
}

pub fn shortlist(cands: &[GeneratedCandidate], keep: usize) -> Vec<Skeleton> {
    shortlist_scored(cands, keep).into_iter().map(|s| s.skeleton).collect()
}
