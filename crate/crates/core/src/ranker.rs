//! Ordering the alternatives offered for one placeholder.
//!
//! Alternatives get single-letter identifiers `A`, `B`, ... in input order;
//! the None alternative takes the letter after the last real one and sits
//! at position `alternatives.len()` in a [`RankResponse`].

use std::collections::HashMap;
use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{score_entry, Alternative, ScoringWeights};
use crate::lm::{LmClient, LmError};
use crate::skeleton::{parse_skeleton, render_iri, Term};

pub const MAX_IDENTIFIERS: usize = 26;
pub const NONE_LABEL: &str = "None of the above";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("{requested} alternatives exceed the {MAX_IDENTIFIERS} single-letter identifiers")]
    Capacity { requested: usize },
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Identifiers for `n` alternatives, plus one for None when requested.
pub fn assign_identifiers(n: usize, include_none: bool) -> Result<Vec<String>, RankError> {
    let total = n + include_none as usize;
    if total > MAX_IDENTIFIERS {
        return Err(RankError::Capacity { requested: total });
    }
    Ok((0..total).map(|i| char::from(b'A' + i as u8).to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRequest {
    pub question: String,
    /// Canonical skeleton with the current slot wrapped in `<mark>`.
    pub partial_skeleton: String,
    pub slot_label: String,
    pub alternatives: Vec<Alternative>,
    pub include_none: bool,
}

impl RankRequest {
    pub fn none_position(&self) -> Option<usize> {
        self.include_none.then_some(self.alternatives.len())
    }

    fn width(&self) -> usize {
        self.alternatives.len() + self.include_none as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResponse {
    /// Input positions, best first.
    pub order: Vec<usize>,
    /// Score per input position.
    pub scores: Vec<f64>,
}

impl RankResponse {
    /// Sorts by descending score; equal scores keep input order.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { order, scores }
    }
}

pub trait Ranker: Send + Sync {
    fn rank(&self, req: &RankRequest) -> Result<RankResponse, RankError>;

    fn name(&self) -> &str;
}

impl<R: Ranker + ?Sized> Ranker for Arc<R> {
    fn rank(&self, req: &RankRequest) -> Result<RankResponse, RankError> {
        (**self).rank(req)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// The list-wise re-ranking prompt.
pub fn rerank_prompt(req: &RankRequest, ids: &[String]) -> String {
    let mut p = String::new();
    let _ = writeln!(p, "Question: {}", req.question);
    let _ = writeln!(p, "SPARQL: {}", req.partial_skeleton);
    let _ = writeln!(
        p,
        "Which knowledge graph item fits the marked placeholder \"{}\"?",
        req.slot_label
    );
    for (alt, id) in req.alternatives.iter().zip(ids) {
        let e = &alt.entry;
        let _ = write!(p, "{id}. {} ({})", e.main_label, render_iri(&e.iri));
        if let Some(d) = &e.description {
            let _ = write!(p, " — {d}");
        }
        p.push('\n');
    }
    if let Some(none) = req.none_position() {
        let _ = writeln!(p, "{}. {NONE_LABEL}", ids[none]);
    }
    p.push_str("Answer with a single letter.\nAnswer:");
    p
}

/// Scores identifiers with one next-token call to the language model.
pub struct LmRanker {
    client: Arc<LmClient>,
}

impl LmRanker {
    pub fn new(client: Arc<LmClient>) -> Self {
        Self { client }
    }
}

impl Ranker for LmRanker {
    fn rank(&self, req: &RankRequest) -> Result<RankResponse, RankError> {
        let ids = assign_identifiers(req.alternatives.len(), req.include_none)?;
        let prompt = rerank_prompt(req, &ids);
        let reported = self.client.score(&prompt, &ids)?;
        Ok(scores_from_service(&ids, &reported))
    }

    fn name(&self) -> &str {
        "lm"
    }
}

/// Maps service scores onto positions; unreported identifiers get -inf.
pub fn scores_from_service(ids: &[String], reported: &HashMap<String, f64>) -> RankResponse {
    RankResponse::from_scores(
        ids.iter()
            .map(|id| reported.get(id).copied().filter(|s| !s.is_nan()).unwrap_or(f64::NEG_INFINITY))
            .collect(),
    )
}

/// Index label scoring against the slot label; no model involved.
#[derive(Debug, Clone, Default)]
pub struct LexicalRanker {
    pub weights: ScoringWeights,
}

impl Ranker for LexicalRanker {
    fn rank(&self, req: &RankRequest) -> Result<RankResponse, RankError> {
        assign_identifiers(req.alternatives.len(), req.include_none)?;
        let mut scores: Vec<f64> = req
            .alternatives
            .iter()
            .map(|a| score_entry(&req.slot_label, &a.entry, &self.weights).map_or(f64::NEG_INFINITY, |(s, _)| s))
            .collect();
        if req.include_none {
            scores.push(if req.alternatives.is_empty() { 0.0 } else { f64::NEG_INFINITY });
        }
        Ok(RankResponse::from_scores(scores))
    }

    fn name(&self) -> &str {
        "lexical"
    }
}

/// Ranks the gold IRI for the current slot first; None first when the gold
/// is not among the alternatives. Other alternatives keep input order.
///
/// The gold IRI is found by aligning the partial skeleton with the gold
/// query term by term, so any skeleton of the same shape works.
#[derive(Debug, Clone)]
pub struct OracleRanker {
    gold: Vec<Term>,
}

impl OracleRanker {
    pub fn new(gold_sparql: &str) -> Result<Self, crate::skeleton::ParseError> {
        let gold = parse_skeleton(gold_sparql)?;
        Ok(Self {
            gold: collect_terms(&gold),
        })
    }

    /// Gold IRI for the lowest unresolved slot of `partial_skeleton`.
    pub fn gold_for(&self, partial_skeleton: &str) -> Option<String> {
        let unmarked = partial_skeleton.replace("<mark>", "").replace("</mark>", "");
        let partial = parse_skeleton(&unmarked).ok()?;
        let terms = collect_terms(&partial);
        if terms.len() != self.gold.len() {
            return None;
        }
        let i = terms.iter().position(Term::is_placeholder)?;
        match &self.gold[i] {
            Term::Iri(iri) => Some(iri.clone()),
            _ => None,
        }
    }
}

fn collect_terms(s: &crate::skeleton::Skeleton) -> Vec<Term> {
    let mut out = Vec::new();
    s.query().visit_terms(&mut |t, _| out.push(t.clone()));
    out
}

impl Ranker for OracleRanker {
    fn rank(&self, req: &RankRequest) -> Result<RankResponse, RankError> {
        assign_identifiers(req.alternatives.len(), req.include_none)?;
        let gold = self.gold_for(&req.partial_skeleton);
        let hit = gold
            .as_deref()
            .and_then(|g| req.alternatives.iter().position(|a| a.entry.iri == g));
        let n = req.width();
        let scores = (0..n)
            .map(|i| match (hit, req.none_position()) {
                (Some(h), _) if i == h => 1.0,
                (None, Some(none)) if i == none => 1.0,
                _ => 0.0,
            })
            .collect();
        Ok(RankResponse::from_scores(scores))
    }

    fn name(&self) -> &str {
        "oracle"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{EntryKind, IndexEntry};
    use proptest::prelude::*;

    const WD: &str = "http://www.wikidata.org/entity/";

    fn alt(q: &str, label: &str) -> Alternative {
        Alternative {
            entry: IndexEntry {
                iri: format!("{WD}{q}"),
                main_label: label.into(),
                aliases: vec![],
                description: Some(format!("{label} description")),
                kind: EntryKind::Entity,
            },
            score: 1.0,
            matched_text: label.into(),
        }
    }

    fn request(label: &str, alts: Vec<Alternative>, skeleton: &str) -> RankRequest {
        RankRequest {
            question: "What is the capital of Germany?".into(),
            partial_skeleton: skeleton.into(),
            slot_label: label.into(),
            alternatives: alts,
            include_none: true,
        }
    }

    #[test]
    fn identifiers() {
        assert_eq!(assign_identifiers(3, true).unwrap(), ["A", "B", "C", "D"]);
        assert_eq!(assign_identifiers(0, true).unwrap(), ["A"]);
        assert_eq!(assign_identifiers(25, true).unwrap().last().unwrap(), "Z");
        assert!(matches!(
            assign_identifiers(26, true),
            Err(RankError::Capacity { requested: 27 })
        ));
    }

    #[test]
    fn oracle_puts_gold_first_and_keeps_input_order() {
        let oracle = OracleRanker::new("SELECT ?c WHERE { ?c wdt:P1 wd:Q2 }").unwrap();
        let req = request(
            "Germany",
            vec![alt("Q1", "Berlin"), alt("Q2", "Germany"), alt("Q3", "Paris")],
            "SELECT ?c WHERE { ?c wdt:P1 <mark><iri>Germany</iri></mark> }",
        );
        assert_eq!(oracle.rank(&req).unwrap().order, [1, 0, 2, 3]);

        let req = request(
            "Germany",
            vec![alt("Q1", "Berlin"), alt("Q3", "Paris")],
            "SELECT ?c WHERE { ?c wdt:P1 <mark><iri>Germany</iri></mark> }",
        );
        assert_eq!(oracle.rank(&req).unwrap().order, [2, 0, 1]);
    }

    #[test]
    fn oracle_aligns_later_slots() {
        let oracle = OracleRanker::new("SELECT ?c WHERE { wd:Q1 wdt:P17 ?c }").unwrap();
        assert_eq!(
            oracle.gold_for("SELECT ?c WHERE { wd:Q1 <mark><iri>country</iri></mark> ?c }"),
            Some("http://www.wikidata.org/prop/direct/P17".into())
        );
        assert_eq!(oracle.gold_for("SELECT ?c WHERE { ?c <iri>x</iri> ?d . ?d ?e ?f }"), None);
    }

    #[test]
    fn lexical_prefers_exact_label() {
        let req = request(
            "Germany",
            vec![alt("Q1", "Berlin"), alt("Q2", "Germany")],
            "SELECT ?c WHERE { ?c wdt:P1 <mark><iri>Germany</iri></mark> }",
        );
        let expected: Vec<f64> = req
            .alternatives
            .iter()
            .map(|a| score_entry("Germany", &a.entry, &ScoringWeights::default()).map_or(f64::NEG_INFINITY, |s| s.0))
            .collect();
        let resp = LexicalRanker::default().rank(&req).unwrap();
        assert_eq!(resp.order[0], 1);
        assert_eq!(&resp.scores[..2], &expected[..]);
        assert_eq!(*resp.order.last().unwrap(), 2, "None last while alternatives exist");

        let empty = request("Germany", vec![], "SELECT ?c WHERE { ?c wdt:P1 <mark><iri>Germany</iri></mark> }");
        assert_eq!(LexicalRanker::default().rank(&empty).unwrap().order, [0]);
    }

    #[test]
    fn prompt_layout() {
        let req = request(
            "Germany",
            vec![alt("Q1", "Berlin"), alt("Q2", "Germany")],
            "SELECT ?c WHERE { ?c wdt:P1 <mark><iri>Germany</iri></mark> }",
        );
        let ids = assign_identifiers(2, true).unwrap();
        let p = rerank_prompt(&req, &ids);
        assert!(p.contains("A. Berlin (wd:Q1) — Berlin description\n"));
        assert!(p.contains("B. Germany (wd:Q2) — Germany description\n"));
        assert!(p.contains("C. None of the above\n"));
        assert!(p.contains("<mark><iri>Germany</iri></mark>"));
    }

    #[test]
    fn missing_scores_are_negative_infinity() {
        let ids = assign_identifiers(2, true).unwrap();
        let reported = HashMap::from([("B".to_string(), -0.5), ("C".to_string(), -2.0)]);
        let resp = scores_from_service(&ids, &reported);
        assert_eq!(resp.scores[0], f64::NEG_INFINITY);
        assert_eq!(resp.order, [1, 2, 0]);
    }

    proptest! {
        #[test]
        fn order_is_a_stable_permutation(scores in prop::collection::vec(prop::sample::select(vec![-3.0, -1.0, -0.5, 0.0, f64::NEG_INFINITY]), 0..26), shift in -50.0f64..50.0) {
            let resp = RankResponse::from_scores(scores.clone());
            let mut sorted = resp.order.clone();
            sorted.sort();
            prop_assert_eq!(sorted, (0..scores.len()).collect::<Vec<_>>());
            for w in resp.order.windows(2) {
                let (a, b) = (w[0], w[1]);
                prop_assert!(scores[a] > scores[b] || (scores[a] == scores[b] && a < b));
            }
            let shifted = RankResponse::from_scores(scores.iter().map(|s| s + shift).collect());
            prop_assert_eq!(shifted.order, resp.order);
        }

        #[test]
        fn identifiers_are_injective_and_stable(n in 0usize..26, none in any::<bool>()) {
            match assign_identifiers(n, none) {
                Ok(ids) => {
                    let set: std::collections::HashSet<_> = ids.iter().collect();
                    prop_assert_eq!(set.len(), ids.len());
                    prop_assert_eq!(ids.len(), n + none as usize);
                    prop_assert_eq!(ids, assign_identifiers(n, none).unwrap());
                }
                Err(_) => prop_assert!(n + none as usize > 26),
            }
        }
    }
}
