//! Placeholder resolution by guided search, re-ranking and backtracking.
//!
//! Each shortlisted skeleton is explored depth first. A state holds a
//! partially resolved skeleton and the alternatives for its lowest open
//! slot; the alternatives are searched once and cached. At every step the
//! untried alternatives plus None are ranked and the top one is taken.
//! None, or running out of alternatives, pops the state. A fully resolved
//! query must execute with a non-empty result to be accepted.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::index::{Alternative, IndexSet};
use crate::kgclient::{fetch_candidates, ResultTable, SparqlEndpoint};
use crate::ranker::{RankError, RankRequest, Ranker};
use crate::skeleton::{Position, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Answered,
    NoValidQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Search {
        state_id: usize,
        skeleton_idx: usize,
        slot: usize,
        label: String,
        position: Position,
        /// Size of the knowledge-graph restriction, when one was applied.
        restriction: Option<usize>,
        /// Why the search ran unrestricted.
        unrestricted_reason: Option<String>,
        candidates: Vec<String>,
        micros: u64,
    },
    Rank {
        state_id: usize,
        slot: usize,
        ranker: String,
        /// Candidate positions offered, None excluded.
        offered: Vec<usize>,
        micros: u64,
    },
    Select {
        state_id: usize,
        skeleton_idx: usize,
        slot: usize,
        /// Candidate position within the state; `None` for the None alternative.
        position: Option<usize>,
        iri: Option<String>,
    },
    Backtrack {
        state_id: usize,
        slot: usize,
        reason: String,
    },
    Validate {
        state_id: usize,
        skeleton_idx: usize,
        query: String,
        ok: bool,
        rows: usize,
        error: Option<String>,
        micros: u64,
    },
    Error {
        state_id: usize,
        slot: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSplit {
    pub search_ms: f64,
    pub rank_ms: f64,
    pub validation_ms: f64,
}

impl TimingSplit {
    pub fn from_trace(trace: &[TraceEvent]) -> Self {
        let mut t = TimingSplit::default();
        for e in trace {
            match e {
                TraceEvent::Search { micros, .. } => t.search_ms += *micros as f64 / 1000.0,
                TraceEvent::Rank { micros, .. } => t.rank_ms += *micros as f64 / 1000.0,
                TraceEvent::Validate { micros, .. } => t.validation_ms += *micros as f64 / 1000.0,
                _ => {}
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionOutcome {
    pub status: Status,
    /// Accepted query text (with PREFIX declarations).
    pub query: Option<String>,
    pub result: Option<ResultTable>,
    pub trace: Vec<TraceEvent>,
    pub steps_used: usize,
    /// Shortlist index of the skeleton that produced the answer.
    pub skeleton_idx: Option<usize>,
    /// Why no query was accepted.
    pub reason: Option<String>,
    /// Last fully resolved query that failed validation.
    pub diagnostic_query: Option<String>,
    /// The model behind the ranker could not be reached.
    pub ranker_unavailable: bool,
}

impl ResolutionOutcome {
    pub fn backtracks(&self) -> usize {
        self.trace
            .iter()
            .filter(|e| matches!(e, TraceEvent::Backtrack { .. }))
            .count()
    }
}

/// Read-only dependencies of one resolve call.
pub struct ResolverDeps<'a> {
    pub conn: &'a dyn SparqlEndpoint,
    pub indices: &'a IndexSet,
    pub ranker: &'a dyn Ranker,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchInfo {
    pub restriction: Option<usize>,
    pub unrestricted_reason: Option<String>,
}

/// Alternatives for `slot_id`, restricted by the knowledge graph when the
/// constraint query is supported and its fetch neither failed nor truncated.
pub fn candidates_for(
    conn: &dyn SparqlEndpoint,
    indices: &IndexSet,
    partial: &Skeleton,
    slot_id: usize,
    cfg: &Config,
) -> (Vec<Alternative>, SearchInfo) {
    let Some(ph) = partial.placeholder(slot_id) else {
        return (Vec::new(), SearchInfo::default());
    };
    let mut info = SearchInfo::default();
    let restriction = match partial.constraint_query(slot_id) {
        Ok(cq) if cq.supported => {
            match fetch_candidates(conn, &cq, cfg.candidate_limit, cfg.kg_timeout()) {
                Ok(set) if set.truncated => {
                    info.unrestricted_reason = Some(format!("restriction truncated at {}", cfg.candidate_limit));
                    None
                }
                Ok(set) => Some(set.iris),
                Err(e) => {
                    info.unrestricted_reason = Some(format!("constraint query failed: {e}"));
                    None
                }
            }
        }
        Ok(_) => {
            info.unrestricted_reason = Some("constraint query not supported for this slot".into());
            None
        }
        Err(e) => {
            info.unrestricted_reason = Some(e.to_string());
            None
        }
    };
    info.restriction = restriction.as_ref().map(HashSet::len);
    let alts = indices.search_at(ph.position, &ph.label, cfg.search_top_k, restriction.as_ref());
    (alts, info)
}

struct State {
    id: usize,
    partial: Skeleton,
    slot: usize,
    candidates: Option<Vec<Alternative>>,
    tried: HashSet<usize>,
}

fn micros(since: Instant) -> u64 {
    since.elapsed().as_micros() as u64
}

/// Resolves the shortlist in order; see the module docs.
pub fn resolve(
    question: &str,
    shortlist: &[Skeleton],
    deps: &ResolverDeps<'_>,
    cfg: &Config,
    deadline: Instant,
) -> ResolutionOutcome {
    let mut run = Run {
        question,
        deps,
        cfg,
        deadline,
        trace: Vec::new(),
        steps: 0,
        next_state_id: 0,
        diagnostic: None,
        ranker_unavailable: false,
    };
    let status = run.all(shortlist);
    let (status, query, result, skeleton_idx, reason) = match status {
        Ok((idx, query, table)) => (Status::Answered, Some(query), Some(table), Some(idx), None),
        Err(reason) => (Status::NoValidQuery, None, None, None, Some(reason)),
    };
    ResolutionOutcome {
        status,
        query,
        result,
        trace: run.trace,
        steps_used: run.steps,
        skeleton_idx,
        reason,
        diagnostic_query: run.diagnostic,
        ranker_unavailable: run.ranker_unavailable,
    }
}

struct Run<'a, 'd> {
    question: &'a str,
    deps: &'a ResolverDeps<'d>,
    cfg: &'a Config,
    deadline: Instant,
    trace: Vec<TraceEvent>,
    steps: usize,
    next_state_id: usize,
    diagnostic: Option<String>,
    ranker_unavailable: bool,
}

enum Validation {
    Accepted(ResultTable),
    Rejected,
}

impl Run<'_, '_> {
    fn all(&mut self, shortlist: &[Skeleton]) -> Result<(usize, String, ResultTable), String> {
        if shortlist.is_empty() {
            return Err("no parseable skeleton".into());
        }
        for (idx, skeleton) in shortlist.iter().enumerate() {
            if let Some((query, table)) = self.skeleton(idx, skeleton)? {
                return Ok((idx, query, table));
            }
        }
        Err("all skeletons exhausted".into())
    }

    fn new_state(&mut self, partial: Skeleton) -> State {
        let slot = partial.next_slot().map_or(0, |p| p.slot_id);
        self.next_state_id += 1;
        State {
            id: self.next_state_id - 1,
            partial,
            slot,
            candidates: None,
            tried: HashSet::new(),
        }
    }

    fn validate(&mut self, state_id: usize, idx: usize, skeleton: &Skeleton) -> Validation {
        let query = skeleton.to_sparql();
        let started = Instant::now();
        let timeout = self
            .cfg
            .kg_timeout()
            .min(self.deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(1)));
        let outcome = self.deps.conn.execute(&query, timeout);
        let (ok, rows, error) = match &outcome {
            Ok(t) => (t.is_nonempty(), t.rows.len(), None),
            Err(e) => (false, 0, Some(e.to_string())),
        };
        self.trace.push(TraceEvent::Validate {
            state_id,
            skeleton_idx: idx,
            query: query.clone(),
            ok,
            rows,
            error,
            micros: micros(started),
        });
        match outcome {
            Ok(table) if ok => Validation::Accepted(table),
            _ => {
                self.diagnostic = Some(query);
                Validation::Rejected
            }
        }
    }

    fn out_of_budget(&self) -> Option<String> {
        if self.steps >= self.cfg.max_steps {
            return Some(format!("step budget of {} exhausted", self.cfg.max_steps));
        }
        if Instant::now() >= self.deadline {
            return Some("timeout".into());
        }
        None
    }

    /// `Ok(None)`: this skeleton has no valid resolution. `Err`: stop entirely.
    fn skeleton(&mut self, idx: usize, skeleton: &Skeleton) -> Result<Option<(String, ResultTable)>, String> {
        if skeleton.is_resolved() {
            let id = self.new_state(skeleton.clone()).id;
            return Ok(match self.validate(id, idx, skeleton) {
                Validation::Accepted(t) => Some((skeleton.to_sparql(), t)),
                Validation::Rejected => None,
            });
        }
        let root = self.new_state(skeleton.clone());
        let mut stack = vec![root];
        while let Some(state) = stack.last_mut() {
            if let Some(reason) = self.out_of_budget() {
                return Err(reason);
            }
            let deps = self.deps;
            let (state_id, slot) = (state.id, state.slot);

            if state.candidates.is_none() {
                let started = Instant::now();
                let (alts, info) = candidates_for(deps.conn, deps.indices, &state.partial, slot, self.cfg);
                let ph = state.partial.placeholder(slot).expect("open slot");
                self.trace.push(TraceEvent::Search {
                    state_id,
                    skeleton_idx: idx,
                    slot,
                    label: ph.label.clone(),
                    position: ph.position,
                    restriction: info.restriction,
                    unrestricted_reason: info.unrestricted_reason,
                    candidates: alts.iter().map(|a| a.entry.iri.clone()).collect(),
                    micros: micros(started),
                });
                state.candidates = Some(alts);
            }
            let candidates = state.candidates.as_ref().expect("cached above");
            let untried: Vec<usize> = (0..candidates.len()).filter(|p| !state.tried.contains(p)).collect();
            if untried.is_empty() {
                self.trace.push(TraceEvent::Backtrack {
                    state_id,
                    slot,
                    reason: "no untried alternatives".into(),
                });
                stack.pop();
                continue;
            }

            let req = RankRequest {
                question: self.question.to_string(),
                partial_skeleton: state.partial.highlighted(slot),
                slot_label: state.partial.placeholder(slot).map(|p| p.label.clone()).unwrap_or_default(),
                alternatives: untried.iter().map(|&p| candidates[p].clone()).collect(),
                include_none: true,
            };
            self.steps += 1;
            let started = Instant::now();
            let mut response = deps.ranker.rank(&req);
            if let Err(e) = &response {
                self.trace.push(TraceEvent::Error {
                    state_id,
                    slot,
                    message: format!("rank failed, retrying: {e}"),
                });
                response = deps.ranker.rank(&req);
            }
            self.trace.push(TraceEvent::Rank {
                state_id,
                slot,
                ranker: deps.ranker.name().to_string(),
                offered: untried.clone(),
                micros: micros(started),
            });
            let response = match response {
                Ok(r) => r,
                Err(e) => {
                    self.trace.push(TraceEvent::Error {
                        state_id,
                        slot,
                        message: format!("rank failed: {e}"),
                    });
                    if matches!(&e, RankError::Lm(lm) if lm.is_unavailable()) {
                        self.ranker_unavailable = true;
                        return Err(format!("ranker unavailable: {e}"));
                    }
                    self.trace.push(TraceEvent::Backtrack {
                        state_id,
                        slot,
                        reason: "ranker error".into(),
                    });
                    stack.pop();
                    continue;
                }
            };
            let top = response.order.first().copied().filter(|&p| p < untried.len());
            let Some(choice) = top else {
                self.trace.push(TraceEvent::Select {
                    state_id,
                    skeleton_idx: idx,
                    slot,
                    position: None,
                    iri: None,
                });
                self.trace.push(TraceEvent::Backtrack {
                    state_id,
                    slot,
                    reason: "None selected".into(),
                });
                stack.pop();
                continue;
            };
            let position = untried[choice];
            state.tried.insert(position);
            let iri = candidates[position].entry.iri.clone();
            self.trace.push(TraceEvent::Select {
                state_id,
                skeleton_idx: idx,
                slot,
                position: Some(position),
                iri: Some(iri.clone()),
            });
            let next = match state.partial.substitute(slot, &iri) {
                Ok(s) => s,
                Err(e) => {
                    self.trace.push(TraceEvent::Error {
                        state_id,
                        slot,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            if next.is_resolved() {
                match self.validate(state_id, idx, &next) {
                    Validation::Accepted(table) => return Ok(Some((next.to_sparql(), table))),
                    Validation::Rejected => self.trace.push(TraceEvent::Backtrack {
                        state_id,
                        slot,
                        reason: "query invalid or empty".into(),
                    }),
                }
            } else {
                let child = self.new_state(next);
                stack.push(child);
            }
        }
        Ok(None)
    }
}

/// Checks loop freedom: no (state, position) selected twice.
pub fn trace_is_loop_free(trace: &[TraceEvent]) -> bool {
    let mut seen = HashSet::new();
    trace.iter().all(|e| match e {
        TraceEvent::Select {
            state_id,
            position: Some(p),
            ..
        } => seen.insert((*state_id, *p)),
        _ => true,
    })
}

/// Checks that selections within a state always target that state's slot,
/// and that a state's slot exceeds its parent's along every branch.
pub fn trace_is_left_to_right(trace: &[TraceEvent]) -> bool {
    use std::collections::HashMap;
    let mut slot_of: HashMap<usize, usize> = HashMap::new();
    let mut last_select: Option<(usize, usize, usize)> = None;
    for e in trace {
        match e {
            TraceEvent::Search {
                state_id,
                slot,
                skeleton_idx,
                ..
            } => {
                if let Some((parent_skel, _, parent_slot)) = last_select {
                    if parent_skel == *skeleton_idx && *slot <= parent_slot {
                        return false;
                    }
                }
                slot_of.insert(*state_id, *slot);
            }
            TraceEvent::Select {
                state_id,
                slot,
                skeleton_idx,
                ..
            } => {
                if slot_of.get(state_id).is_some_and(|s| s != slot) {
                    return false;
                }
                last_select = Some((*skeleton_idx, *state_id, *slot));
            }
            _ => {}
        }
    }
    true
}
