//! Query execution against a knowledge graph: the embedded [`TripleStore`]
//! or a [`RemoteEndpoint`] speaking the SPARQL Protocol.

mod node;
mod remote;
mod store;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::ConstraintQuery;

pub use node::Node;
pub use remote::{parse_results_json, RemoteEndpoint};
pub use store::{StoreError, Triple, TripleStore};

/// Variable name used for ASK results.
pub const BOOLEAN_VARIABLE: &str = "boolean";

/// Rows of N-Triples cells; `None` is an unbound cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultTable {
    pub variables: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ask: bool,
}

impl ResultTable {
    pub fn new(variables: Vec<String>, rows: Vec<Vec<Option<String>>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == variables.len()));
        Self {
            variables,
            rows,
            ask: false,
        }
    }

    pub fn boolean(value: bool) -> Self {
        Self {
            variables: vec![BOOLEAN_VARIABLE.to_string()],
            rows: vec![vec![Some(value.to_string())]],
            ask: true,
        }
    }

    pub fn as_boolean(&self) -> Option<bool> {
        if !self.ask {
            return None;
        }
        self.rows.first()?.first()?.as_deref().map(|v| v == "true")
    }

    /// Whether the result counts as an answer: a SELECT with at least one
    /// row, or an ASK that returned true.
    pub fn is_nonempty(&self) -> bool {
        match self.as_boolean() {
            Some(b) => b,
            None => !self.rows.is_empty(),
        }
    }

    pub fn column(&self, variable: &str) -> Option<impl Iterator<Item = Option<&str>>> {
        let i = self.variables.iter().position(|v| v == variable)?;
        Some(self.rows.iter().map(move |r| r[i].as_deref()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecErrorKind {
    Timeout,
    Syntax,
    Transport,
    Unsupported,
}

impl fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecErrorKind::Timeout => "timeout",
            ExecErrorKind::Syntax => "syntax error",
            ExecErrorKind::Transport => "transport error",
            ExecErrorKind::Unsupported => "unsupported feature",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}: {message}")]
pub struct ExecError {
    pub kind: ExecErrorKind,
    pub message: String,
}

impl ExecError {
    pub fn new(kind: ExecErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

/// Anything that can answer SPARQL queries.
pub trait SparqlEndpoint: Send + Sync {
    fn execute(&self, query: &str, timeout: Duration) -> Result<ResultTable, ExecError>;

    fn describe(&self) -> String;

    /// Cheap readiness probe.
    fn ping(&self) -> bool;
}

#[derive(Debug, Clone)]
pub enum Connection {
    Embedded(Arc<TripleStore>),
    Remote(Arc<RemoteEndpoint>),
}

impl Connection {
    pub fn embedded(store: TripleStore) -> Self {
        Connection::Embedded(Arc::new(store))
    }

    pub fn remote(url: &str) -> Result<Self, ExecError> {
        Ok(Connection::Remote(Arc::new(RemoteEndpoint::new(url)?)))
    }

    fn endpoint(&self) -> &dyn SparqlEndpoint {
        match self {
            Connection::Embedded(s) => s.as_ref(),
            Connection::Remote(r) => r.as_ref(),
        }
    }
}

impl SparqlEndpoint for Connection {
    fn execute(&self, query: &str, timeout: Duration) -> Result<ResultTable, ExecError> {
        self.endpoint().execute(query, timeout)
    }

    fn describe(&self) -> String {
        self.endpoint().describe()
    }

    fn ping(&self) -> bool {
        self.endpoint().ping()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateSet {
    pub iris: HashSet<String>,
    /// More than `limit` distinct bindings existed.
    pub truncated: bool,
    /// Literal or blank-node bindings that were discarded.
    pub dropped_non_iri: usize,
}

/// Distinct IRI bindings of the constraint query's target variable, at most
/// `limit` of them.
pub fn fetch_candidates(
    conn: &dyn SparqlEndpoint,
    cq: &ConstraintQuery,
    limit: usize,
    timeout: Duration,
) -> Result<CandidateSet, ExecError> {
    if !cq.supported {
        return Err(ExecError::new(
            ExecErrorKind::Unsupported,
            "constraint query is not supported for this slot",
        ));
    }
    let query = format!("{} LIMIT {}", cq.text, limit.saturating_add(1));
    let table = conn.execute(&query, timeout)?;
    let column = table.column(&cq.target_variable).ok_or_else(|| {
        ExecError::new(
            ExecErrorKind::Transport,
            format!("result lacks variable ?{}", cq.target_variable),
        )
    })?;
    let mut out = CandidateSet::default();
    let mut distinct = 0usize;
    let mut seen = HashSet::new();
    for cell in column.flatten() {
        if !seen.insert(cell) {
            continue;
        }
        distinct += 1;
        if distinct > limit {
            out.truncated = true;
            break;
        }
        match Node::from_ntriples(cell) {
            Some(Node::Iri(iri)) => {
                out.iris.insert(iri);
            }
            _ => out.dropped_non_iri += 1,
        }
    }
    if out.dropped_non_iri > 0 {
        log::debug!("dropped {} non-IRI candidate bindings", out.dropped_non_iri);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
