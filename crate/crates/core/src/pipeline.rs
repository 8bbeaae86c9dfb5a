//! Question answering end to end: generate, shortlist, resolve.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError, GeneratorKind, RankerKind};
use crate::generator::{shortlist_scored, GenerationError, Generator, LmGenerator, MockGenerator};
use crate::index::{IndexError, IndexSet};
use crate::kgclient::{Connection, ResultTable, SparqlEndpoint, StoreError, TripleStore};
use crate::lm::LmClient;
use crate::ranker::{LexicalRanker, LmRanker, OracleRanker, Ranker};
use crate::resolver::{resolve, ResolverDeps, Status, TimingSplit, TraceEvent};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot connect: {0}")]
    Connect(String),
    #[error("skeleton generation failed: {0}")]
    Generation(#[from] GenerationError),
    #[error("the oracle ranker needs a gold query for {0:?}")]
    NoGold(String),
    #[error("gold query does not parse: {0}")]
    BadGold(String),
    #[error("ranker {0:?} is not available in this pipeline")]
    RankerUnavailable(&'static str),
}

impl PipelineError {
    /// A dependency is down rather than the request being wrong.
    pub fn is_unavailable(&self) -> bool {
        match self {
            PipelineError::Generation(GenerationError::Lm(e)) => e.is_unavailable(),
            PipelineError::Generation(GenerationError::Io { .. }) => true,
            PipelineError::Connect(_) | PipelineError::RankerUnavailable(_) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub generation_ms: f64,
    pub search_ms: f64,
    pub rank_ms: f64,
    pub validation_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub status: Status,
    pub sparql: Option<String>,
    pub result: Option<ResultTable>,
    /// Canonical shortlisted skeletons, best first.
    pub skeletons: Vec<String>,
    pub timings: Timings,
    pub trace: Vec<TraceEvent>,
    pub steps_used: usize,
    pub reason: Option<String>,
    pub diagnostic_query: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct AskOptions {
    /// Used by the oracle ranker; falls back to the mock fixture's query.
    pub gold_sparql: Option<String>,
    /// Replaces the pipeline configuration for this call.
    pub config: Option<Config>,
}

pub struct Pipeline {
    cfg: Config,
    generator: Arc<dyn Generator>,
    mock: Option<Arc<MockGenerator>>,
    conn: Arc<dyn SparqlEndpoint>,
    indices: Arc<IndexSet>,
    lm: Option<Arc<LmClient>>,
}

impl Pipeline {
    /// Loads indices, knowledge graph and model clients as configured.
    /// Builds blocking HTTP clients, so call it outside async contexts.
    pub fn from_config(cfg: Config) -> Result<Self, PipelineError> {
        cfg.validate_for_answering()?;
        let indices = IndexSet::load_with(
            cfg.entity_index.as_deref().expect("validated"),
            cfg.property_index.as_deref().expect("validated"),
            cfg.scoring,
        )?;
        let conn = match (&cfg.kg_path, &cfg.endpoint_url) {
            (Some(path), _) => Connection::embedded(TripleStore::load_tsv(path)?),
            (None, Some(url)) => Connection::remote(url).map_err(|e| PipelineError::Connect(e.to_string()))?,
            (None, None) => unreachable!("validated"),
        };
        let lm = match &cfg.lm_url {
            Some(url) => Some(Arc::new(
                LmClient::new(url, cfg.lm_timeout(), cfg.lm_max_in_flight)
                    .map_err(|e| PipelineError::Connect(e.to_string()))?,
            )),
            None => None,
        };
        let (generator, mock): (Arc<dyn Generator>, _) = match cfg.generator {
            GeneratorKind::Mock => {
                let mock = Arc::new(MockGenerator::from_jsonl(cfg.mock_path.as_deref().expect("validated"))?);
                (mock.clone(), Some(mock))
            }
            GeneratorKind::Lm => {
                let few_shot = match &cfg.few_shot_path {
                    Some(p) => LmGenerator::load_few_shot(p)?,
                    None => Vec::new(),
                };
                let client = lm.clone().expect("validated");
                (Arc::new(LmGenerator::new(client, few_shot)), None)
            }
        };
        Ok(Self {
            cfg,
            generator,
            mock,
            conn: Arc::new(conn),
            indices: Arc::new(indices),
            lm,
        })
    }

    pub fn from_parts(
        cfg: Config,
        generator: Arc<dyn Generator>,
        conn: Arc<dyn SparqlEndpoint>,
        indices: Arc<IndexSet>,
        lm: Option<Arc<LmClient>>,
    ) -> Self {
        Self {
            cfg,
            generator,
            mock: None,
            conn,
            indices,
            lm,
        }
    }

    /// Lets the oracle ranker read gold queries from a mock fixture.
    pub fn with_mock_gold(mut self, mock: Arc<MockGenerator>) -> Self {
        self.mock = Some(mock);
        self
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn connection(&self) -> &dyn SparqlEndpoint {
        self.conn.as_ref()
    }

    pub fn indices(&self) -> &IndexSet {
        &self.indices
    }

    pub fn lm(&self) -> Option<&LmClient> {
        self.lm.as_deref()
    }

    fn ranker_for(&self, cfg: &Config, question: &str, gold: Option<&str>) -> Result<Box<dyn Ranker>, PipelineError> {
        Ok(match cfg.ranker {
            RankerKind::Lexical => Box::new(LexicalRanker { weights: cfg.scoring }),
            RankerKind::Lm => {
                let client = self.lm.clone().ok_or(PipelineError::RankerUnavailable("lm"))?;
                Box::new(LmRanker::new(client))
            }
            RankerKind::Oracle => {
                let gold = gold
                    .map(str::to_string)
                    .or_else(|| self.mock.as_ref()?.gold(question).map(str::to_string))
                    .ok_or_else(|| PipelineError::NoGold(question.to_string()))?;
                Box::new(OracleRanker::new(&gold).map_err(|e| PipelineError::BadGold(e.to_string()))?)
            }
        })
    }

    pub fn answer(&self, question: &str, opts: &AskOptions) -> Result<Answer, PipelineError> {
        let started = Instant::now();
        let cfg = opts.config.as_ref().unwrap_or(&self.cfg);
        let deadline = started + cfg.question_timeout();
        let ranker = self.ranker_for(cfg, question, opts.gold_sparql.as_deref())?;

        let candidates = self.generator.generate(question, &cfg.generation_params())?;
        let listed = shortlist_scored(&candidates, cfg.keep_skeletons);
        let generation_ms = started.elapsed().as_secs_f64() * 1000.0;
        log::debug!("{} of {} candidates shortlisted for {question:?}", listed.len(), candidates.len());

        let skeletons: Vec<_> = listed.into_iter().map(|s| s.skeleton).collect();
        let deps = ResolverDeps {
            conn: self.conn.as_ref(),
            indices: &self.indices,
            ranker: ranker.as_ref(),
        };
        let out = resolve(question, &skeletons, &deps, cfg, deadline);
        if out.ranker_unavailable {
            return Err(PipelineError::Connect(out.reason.unwrap_or_default()));
        }
        let split = TimingSplit::from_trace(&out.trace);
        Ok(Answer {
            status: out.status,
            sparql: out.query,
            result: out.result,
            skeletons: skeletons.iter().map(|s| s.canonical()).collect(),
            timings: Timings {
                generation_ms,
                search_ms: split.search_ms,
                rank_ms: split.rank_ms,
                validation_ms: split.validation_ms,
                total_ms: started.elapsed().as_secs_f64() * 1000.0,
            },
            trace: out.trace,
            steps_used: out.steps_used,
            reason: out.reason,
            diagnostic_query: out.diagnostic_query,
        })
    }

    /// Whether the knowledge graph and, when configured, the model answer.
    pub fn ready(&self) -> Readiness {
        Readiness {
            kg: self.conn.ping(),
            lm: self.lm.as_ref().map(|c| c.ping()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Readiness {
    pub kg: bool,
    pub lm: Option<bool>,
}

impl Readiness {
    pub fn ok(&self) -> bool {
        self.kg && self.lm.unwrap_or(true)
    }
}
