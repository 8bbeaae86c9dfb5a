//! SPARQL Protocol client with JSON results.

use std::collections::HashMap;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::{ACCEPT, CONTENT_TYPE};
use reqwest::StatusCode;
use serde::Deserialize;

use super::{ExecError, ExecErrorKind, Node, ResultTable, SparqlEndpoint};
use crate::skeleton::Literal;

/// Queries longer than this go out as a POST form.
const MAX_GET_QUERY: usize = 2000;
const RESULTS_JSON: &str = "application/sparql-results+json";

#[derive(Debug, Clone)]
pub struct RemoteEndpoint {
    url: String,
    client: Client,
}

impl RemoteEndpoint {
    pub fn new(url: impl Into<String>) -> Result<Self, ExecError> {
        let client = Client::builder()
            .user_agent(concat!("kgqa/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| ExecError::new(ExecErrorKind::Transport, e.to_string()))?;
        Ok(Self {
            url: url.into(),
            client,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl SparqlEndpoint for RemoteEndpoint {
    fn execute(&self, query: &str, timeout: Duration) -> Result<ResultTable, ExecError> {
        let request = if query.len() <= MAX_GET_QUERY {
            self.client.get(&self.url).query(&[("query", query)])
        } else {
            self.client.post(&self.url).form(&[("query", query)])
        };
        let response = request
            .header(ACCEPT, RESULTS_JSON)
            .timeout(timeout)
            .send()
            .map_err(transport)?;
        let status = response.status();
        if status == StatusCode::BAD_REQUEST {
            let body = response.text().unwrap_or_default();
            return Err(ExecError::new(ExecErrorKind::Syntax, truncate(&body, 500)));
        }
        if !status.is_success() {
            return Err(ExecError::new(
                ExecErrorKind::Transport,
                format!("endpoint answered HTTP {status}"),
            ));
        }
        if let Some(ct) = response.headers().get(CONTENT_TYPE).and_then(|v| v.to_str().ok()) {
            if !ct.contains("json") {
                log::debug!("unexpected content type {ct} from {}", self.url);
            }
        }
        let body = response.text().map_err(transport)?;
        parse_results_json(&body)
    }

    fn describe(&self) -> String {
        format!("remote endpoint {}", self.url)
    }

    fn ping(&self) -> bool {
        self.execute("ASK { }", Duration::from_secs(5)).is_ok()
    }
}

fn transport(e: reqwest::Error) -> ExecError {
    if e.is_timeout() {
        ExecError::new(ExecErrorKind::Timeout, e.to_string())
    } else {
        ExecError::new(ExecErrorKind::Transport, e.to_string())
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

#[derive(Deserialize)]
struct JsonResults {
    #[serde(default)]
    head: JsonHead,
    results: Option<JsonBindings>,
    boolean: Option<bool>,
}

#[derive(Deserialize, Default)]
struct JsonHead {
    #[serde(default)]
    vars: Vec<String>,
}

#[derive(Deserialize)]
struct JsonBindings {
    bindings: Vec<HashMap<String, JsonTerm>>,
}

#[derive(Deserialize)]
struct JsonTerm {
    #[serde(rename = "type")]
    kind: String,
    value: String,
    datatype: Option<String>,
    #[serde(rename = "xml:lang")]
    lang: Option<String>,
}

impl JsonTerm {
    fn into_node(self) -> Result<Node, ExecError> {
        Ok(match self.kind.as_str() {
            "uri" | "iri" => Node::Iri(self.value),
            "bnode" => Node::Blank(self.value),
            "literal" | "typed-literal" => Node::Literal(Literal {
                lexical: self.value,
                datatype: if self.lang.is_some() { None } else { self.datatype },
                language: self.lang,
            }),
            other => {
                return Err(ExecError::new(
                    ExecErrorKind::Transport,
                    format!("unknown term type {other:?} in results"),
                ))
            }
        })
    }
}

/// Parses the W3C SPARQL 1.1 Query Results JSON format.
pub fn parse_results_json(body: &str) -> Result<ResultTable, ExecError> {
    let parsed: JsonResults = serde_json::from_str(body)
        .map_err(|e| ExecError::new(ExecErrorKind::Transport, format!("malformed results JSON: {e}")))?;
    if let Some(b) = parsed.boolean {
        return Ok(ResultTable::boolean(b));
    }
    let Some(results) = parsed.results else {
        return Err(ExecError::new(
            ExecErrorKind::Transport,
            "results JSON has neither results nor boolean",
        ));
    };
    let vars = parsed.head.vars;
    let mut rows = Vec::with_capacity(results.bindings.len());
    for mut binding in results.bindings {
        let mut row = Vec::with_capacity(vars.len());
        for v in &vars {
            row.push(match binding.remove(v) {
                Some(term) => Some(term.into_node()?.to_ntriples()),
                None => None,
            });
        }
        rows.push(row);
    }
    Ok(ResultTable::new(vars, rows))
}
