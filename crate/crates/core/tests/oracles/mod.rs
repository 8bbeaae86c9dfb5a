//! Independent reference implementations used as test oracles.
//!
//! Nothing here shares code with the evaluator or the constraint derivation
//! beyond the public data types.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use kgqa_core::kgclient::{Node, Triple};
use kgqa_core::skeleton::{GroupPattern, PatternElement, Skeleton, Term};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const WD: &str = "http://www.wikidata.org/entity/";
pub const WDT: &str = "http://www.wikidata.org/prop/direct/";

#[derive(Debug, Clone, PartialEq)]
pub enum RefTerm {
    Var(String),
    Const(Node),
    /// Matches anything without binding.
    Any,
}

pub type Solution = HashMap<String, Node>;

/// Nested loops over the whole triple list, one loop level per pattern.
pub fn reference_bgp(triples: &[Triple], patterns: &[[RefTerm; 3]]) -> Vec<Solution> {
    let mut solutions = vec![Solution::new()];
    for pattern in patterns {
        let mut next = Vec::new();
        for sol in &solutions {
            'triple: for t in triples {
                let mut extended = sol.clone();
                for (term, node) in pattern.iter().zip([&t.subject, &t.predicate, &t.object]) {
                    match term {
                        RefTerm::Any => {}
                        RefTerm::Const(c) => {
                            if c != node {
                                continue 'triple;
                            }
                        }
                        RefTerm::Var(v) => match extended.get(v) {
                            Some(bound) if bound != node => continue 'triple,
                            Some(_) => {}
                            None => {
                                extended.insert(v.clone(), node.clone());
                            }
                        },
                    }
                }
                next.push(extended);
            }
        }
        solutions = next;
    }
    solutions
}

pub fn project(solutions: &[Solution], vars: &[String]) -> HashSet<Vec<Option<String>>> {
    solutions
        .iter()
        .map(|s| vars.iter().map(|v| s.get(v).map(Node::to_ntriples)).collect())
        .collect()
}

fn ref_term(t: &Term, slot: usize, target: &str) -> Option<RefTerm> {
    Some(match t {
        Term::Var(v) => RefTerm::Var(v.clone()),
        Term::Blank(b) => RefTerm::Var(format!("_:{b}")),
        Term::Iri(i) => RefTerm::Const(Node::Iri(i.clone())),
        Term::Literal(l) => RefTerm::Const(Node::Literal(l.clone())),
        Term::Placeholder(s) if s.id == slot => RefTerm::Var(target.to_string()),
        Term::Placeholder(_) => return None,
    })
}

fn flatten<'a>(g: &'a GroupPattern, out: &mut Vec<&'a kgqa_core::skeleton::TriplePattern>) {
    for e in &g.elements {
        match e {
            PatternElement::Triple(t) => out.push(t),
            PatternElement::Optional(g) | PatternElement::Group(g) => flatten(g, out),
            _ => {}
        }
    }
}

/// IRIs `x` such that the placeholder-free triples together with the slot's
/// own triple (slot := x, other placeholders in it unconstrained) have a
/// solution. Assumes every other component of the query is satisfiable.
pub fn brute_force_candidates(triples: &[Triple], skeleton: &Skeleton, slot: usize) -> HashSet<String> {
    const TARGET: &str = "\u{0}target";
    let mut patterns = Vec::new();
    let mut all = Vec::new();
    flatten(&skeleton.query().pattern, &mut all);
    for t in all {
        let terms = [&t.subject, &t.predicate, &t.object];
        let holds_slot = terms
            .iter()
            .any(|x| matches!(x, Term::Placeholder(s) if s.id == slot));
        if holds_slot {
            let p: Vec<RefTerm> = terms
                .iter()
                .map(|x| ref_term(x, slot, TARGET).unwrap_or(RefTerm::Any))
                .collect();
            patterns.push([p[0].clone(), p[1].clone(), p[2].clone()]);
        } else if let (Some(a), Some(b), Some(c)) = (
            ref_term(terms[0], slot, TARGET),
            ref_term(terms[1], slot, TARGET),
            ref_term(terms[2], slot, TARGET),
        ) {
            patterns.push([a, b, c]);
        }
    }
    // Slot triple first keeps the nested loops small.
    patterns.sort_by_key(|p| !p.iter().any(|t| *t == RefTerm::Var(TARGET.to_string())));
    reference_bgp(triples, &patterns)
        .into_iter()
        .filter_map(|s| s.get(TARGET).and_then(|n| n.as_iri().map(str::to_string)))
        .collect()
}

/// Random store over a small vocabulary so joins actually hit.
pub fn random_store(rng: &mut impl Rng, max_triples: usize) -> Vec<Triple> {
    let entities = rng.random_range(3..=30);
    let predicates = rng.random_range(1..=5);
    let n = rng.random_range(1..=max_triples);
    (0..n)
        .map(|_| {
            let s = Node::iri(format!("{WD}Q{}", rng.random_range(0..entities)));
            let p = Node::iri(format!("{WDT}P{}", rng.random_range(0..predicates)));
            let o = if rng.random_bool(0.15) {
                Node::parse_lenient(&rng.random_range(0..10).to_string()).unwrap()
            } else {
                Node::iri(format!("{WD}Q{}", rng.random_range(0..entities)))
            };
            Triple::new(s, p, o)
        })
        .collect()
}

/// Random BGP with 1..=3 triples over at most 3 variables; constants are
/// drawn from the store so most queries have answers.
pub fn random_bgp(rng: &mut impl Rng, store: &[Triple]) -> Vec<[RefTerm; 3]> {
    let vars = ["a", "b", "c"];
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| {
            let t = store.choose(rng).expect("non-empty store");
            let nodes = [&t.subject, &t.predicate, &t.object];
            let mut out: Vec<RefTerm> = nodes
                .iter()
                .map(|node| {
                    if rng.random_bool(0.55) {
                        RefTerm::Var(vars.choose(rng).unwrap().to_string())
                    } else {
                        RefTerm::Const((*node).clone())
                    }
                })
                .collect();
            // Keep literal constants out of subject position, where they cannot match.
            if let RefTerm::Const(Node::Literal(_)) = out[0] {
                out[0] = RefTerm::Var("a".into());
            }
            [out[0].clone(), out[1].clone(), out[2].clone()]
        })
        .collect()
}

pub fn bgp_variables(patterns: &[[RefTerm; 3]]) -> Vec<String> {
    let mut seen = Vec::new();
    for p in patterns {
        for t in p {
            if let RefTerm::Var(v) = t {
                if !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        }
    }
    seen
}

/// SPARQL text for a BGP, projecting `vars` (or ASK-free `SELECT *` style
/// when empty, with a dummy projection).
pub fn bgp_to_sparql(patterns: &[[RefTerm; 3]], vars: &[String]) -> String {
    let term = |t: &RefTerm| match t {
        RefTerm::Var(v) => format!("?{v}"),
        RefTerm::Const(n) => n.to_ntriples(),
        RefTerm::Any => unreachable!("wildcards only appear in constraint oracles"),
    };
    let body: Vec<String> = patterns
        .iter()
        .map(|p| format!("{} {} {}", term(&p[0]), term(&p[1]), term(&p[2])))
        .collect();
    let projection = if vars.is_empty() {
        "*".to_string()
    } else {
        vars.iter().map(|v| format!("?{v}")).collect::<Vec<_>>().join(" ")
    };
    format!("SELECT {projection} WHERE {{ {} }}", body.join(" . "))
}

/// Committed toy-world fixtures; resolves from any crate in the workspace.
pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

pub fn toy_store() -> kgqa_core::kgclient::TripleStore {
    kgqa_core::kgclient::TripleStore::load_tsv(&fixture("toy_kg.tsv")).expect("toy kg")
}

pub fn toy_indices() -> kgqa_core::index::IndexSet {
    kgqa_core::index::IndexSet::load(&fixture("entities.tsv"), &fixture("properties.tsv")).expect("toy indices")
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct BacktrackCase {
    pub question: String,
    pub sparql: String,
    pub skeleton: String,
    /// Compact IRI the adversary puts first whenever it is offered.
    pub wrong: String,
}

pub fn backtrack_cases() -> Vec<BacktrackCase> {
    std::fs::read_to_string(fixture("backtracking.jsonl"))
        .expect("backtracking fixtures")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("backtracking line"))
        .collect()
}

pub fn constraint_slot_skeletons() -> Vec<String> {
    std::fs::read_to_string(fixture("constraint_slots.txt"))
        .expect("constraint fixtures")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Puts one wrong IRI first whenever offered, otherwise defers to the gold.
pub struct AdversarialRanker {
    pub wrong: String,
    pub gold: kgqa_core::ranker::OracleRanker,
}

impl AdversarialRanker {
    pub fn new(wrong_compact: &str, gold_sparql: &str) -> Self {
        Self {
            wrong: kgqa_core::skeleton::expand_iri(wrong_compact).expect("wrong iri"),
            gold: kgqa_core::ranker::OracleRanker::new(gold_sparql).expect("gold parses"),
        }
    }
}

impl kgqa_core::ranker::Ranker for AdversarialRanker {
    fn rank(
        &self,
        req: &kgqa_core::ranker::RankRequest,
    ) -> Result<kgqa_core::ranker::RankResponse, kgqa_core::ranker::RankError> {
        let mut resp = self.gold.rank(req)?;
        if let Some(w) = req.alternatives.iter().position(|a| a.entry.iri == self.wrong) {
            resp.order.retain(|&p| p != w);
            resp.order.insert(0, w);
        }
        Ok(resp)
    }

    fn name(&self) -> &str {
        "adversarial"
    }
}

/// Picks uniformly among the offered positions, None included.
pub struct RandomRanker {
    pub rng: std::sync::Mutex<rand_chacha::ChaCha8Rng>,
}

impl kgqa_core::ranker::Ranker for RandomRanker {
    fn rank(
        &self,
        req: &kgqa_core::ranker::RankRequest,
    ) -> Result<kgqa_core::ranker::RankResponse, kgqa_core::ranker::RankError> {
        use rand::seq::SliceRandom;
        let n = req.alternatives.len() + req.include_none as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut *self.rng.lock().unwrap());
        let mut scores = vec![0.0; n];
        for (rank, &p) in order.iter().enumerate() {
            scores[p] = -(rank as f64);
        }
        Ok(kgqa_core::ranker::RankResponse { order, scores })
    }

    fn name(&self) -> &str {
        "random"
    }
}

/// Pearson chi-square goodness-of-fit p-value against uniform expectation.
pub fn chi_square_uniform_p(observed: &[usize]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: usize = observed.iter().sum();
    let expected = n as f64 / observed.len() as f64;
    let stat: f64 = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).expect("dof > 0");
    1.0 - dist.cdf(stat)
}

pub fn synth_samples() -> Vec<kgqa_core::synth::TrainingSample> {
    kgqa_core::synth::load_dataset(&fixture("synth_dataset.jsonl")).expect("synth dataset")
}

pub fn toy_config(ranker: kgqa_core::config::RankerKind) -> kgqa_core::Config {
    kgqa_core::Config {
        kg_path: Some(fixture("toy_kg.tsv")),
        entity_index: Some(fixture("entities.tsv")),
        property_index: Some(fixture("properties.tsv")),
        generator: kgqa_core::config::GeneratorKind::Mock,
        mock_path: Some(fixture("questions.jsonl")),
        ranker,
        ..kgqa_core::Config::default()
    }
}

pub fn toy_pipeline(ranker: kgqa_core::config::RankerKind) -> kgqa_core::Pipeline {
    kgqa_core::Pipeline::from_config(toy_config(ranker)).expect("toy pipeline")
}
