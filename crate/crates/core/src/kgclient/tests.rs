use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use super::*;
use crate::skeleton::parse_skeleton;

const T: Duration = Duration::from_secs(5);
const WD: &str = "http://www.wikidata.org/entity/";
const WDT: &str = "http://www.wikidata.org/prop/direct/";

fn toy() -> TripleStore {
    let tsv = "wd:Q1\twdt:P1\twd:Q2\nwd:Q1\twdt:P17\twd:Q2\nwd:Q3\twdt:P1\twd:Q4\nwd:Q3\twdt:P17\twd:Q4\n";
    TripleStore::parse_tsv(tsv.as_bytes(), Path::new("toy.tsv")).unwrap()
}

fn toy_with_population() -> TripleStore {
    let mut triples: Vec<Triple> = toy().triples().collect();
    triples.push(Triple::new(
        Node::iri(format!("{WD}Q1")),
        Node::iri(format!("{WDT}P2")),
        Node::parse_lenient("\"3645000\"").unwrap(),
    ));
    TripleStore::new(triples)
}

fn cells(table: &ResultTable) -> HashSet<Vec<Option<String>>> {
    table.rows.iter().cloned().collect()
}

fn iri_cell(iri: &str) -> Option<String> {
    Some(format!("<{iri}>"))
}

/// Every (s, p, o) of the store, for brute-force expectations.
fn all(store: &TripleStore) -> Vec<Triple> {
    store.triples().collect()
}

#[test]
fn distinct_predicates_of_q1() {
    let store = toy();
    let table = store
        .evaluate("SELECT DISTINCT ?p WHERE { wd:Q1 ?p ?o }", T)
        .unwrap();
    let q1 = Node::iri(format!("{WD}Q1"));
    let expected: HashSet<Vec<Option<String>>> = all(&store)
        .into_iter()
        .filter(|t| t.subject == q1)
        .map(|t| vec![Some(t.predicate.to_ntriples())])
        .collect();
    assert_eq!(table.variables, ["p"]);
    assert_eq!(table.rows.len(), 2);
    assert_eq!(cells(&table), expected);
    assert!(expected.contains(&vec![iri_cell(&format!("{WDT}P1"))]));
}

#[test]
fn no_match_and_ask() {
    let store = toy();
    let table = store.evaluate("SELECT ?x WHERE { ?x wdt:P1 wd:Q99 }", T).unwrap();
    assert!(table.rows.is_empty());
    assert!(!table.is_nonempty());

    let yes = store.evaluate("ASK { wd:Q1 wdt:P1 wd:Q2 }", T).unwrap();
    assert_eq!(yes.variables, [BOOLEAN_VARIABLE]);
    assert_eq!(yes.rows, vec![vec![Some("true".to_string())]]);
    assert_eq!(yes.as_boolean(), Some(true));
    let no = store.evaluate("ASK { wd:Q1 wdt:P1 wd:Q4 }", T).unwrap();
    assert_eq!(no.as_boolean(), Some(false));
    assert!(!no.is_nonempty());
}

#[test]
fn filters_optional_and_modifiers() {
    let store = toy_with_population();
    let q = "SELECT ?c ?pop WHERE { ?c wdt:P17 ?country . OPTIONAL { ?c wdt:P2 ?pop } } ORDER BY ?c";
    let t = store.evaluate(q, T).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0][0], iri_cell(&format!("{WD}Q1")));
    assert_eq!(t.rows[0][1].as_deref(), Some("\"3645000\""));
    assert_eq!(t.rows[1][1], None);

    let q = "SELECT ?c WHERE { ?c wdt:P17 ?k . FILTER(?k != wd:Q2) }";
    let t = store.evaluate(q, T).unwrap();
    assert_eq!(t.rows, vec![vec![iri_cell(&format!("{WD}Q3"))]]);

    let q = "SELECT ?c WHERE { ?c wdt:P17 ?k . OPTIONAL { ?c wdt:P2 ?pop } FILTER(!BOUND(?pop)) }";
    let t = store.evaluate(q, T).unwrap();
    assert_eq!(t.rows, vec![vec![iri_cell(&format!("{WD}Q3"))]]);

    let q = "SELECT * WHERE { ?s wdt:P1 ?o } ORDER BY DESC(?s) LIMIT 1";
    let t = store.evaluate(q, T).unwrap();
    assert_eq!(t.variables, ["s", "o"]);
    assert_eq!(t.rows, vec![vec![iri_cell(&format!("{WD}Q3")), iri_cell(&format!("{WD}Q4"))]]);

    let q = "SELECT ?s WHERE { ?s ?p ?o } OFFSET 10";
    assert!(store.evaluate(q, T).unwrap().rows.is_empty());
}

#[test]
fn numeric_filters() {
    let tsv = "wd:Q1\twdt:P1082\t3645000\nwd:Q3\twdt:P1082\t2161000\nwd:Q5\twdt:P1082\t\"n/a\"\n";
    let store = TripleStore::parse_tsv(tsv.as_bytes(), Path::new("pop.tsv")).unwrap();
    let q = "SELECT ?c WHERE { ?c wdt:P1082 ?n . FILTER(?n > 3000000) }";
    assert_eq!(store.evaluate(q, T).unwrap().rows, vec![vec![iri_cell(&format!("{WD}Q1"))]]);
    let q = "SELECT ?c WHERE { ?c wdt:P1082 ?n } ORDER BY ?n";
    let order: Vec<Option<String>> = store.evaluate(q, T).unwrap().rows.into_iter().map(|mut r| r.remove(0)).collect();
    assert_eq!(order, ["Q3", "Q1", "Q5"].map(|q| iri_cell(&format!("{WD}{q}"))));
}

#[test]
fn unsupported_and_syntax_errors() {
    let store = toy();
    let e = store
        .evaluate("SELECT (COUNT(?s) AS ?n) WHERE { ?s ?p ?o }", T)
        .unwrap_err();
    assert_eq!(e.kind, ExecErrorKind::Unsupported);
    let e = store
        .evaluate("SELECT ?s WHERE { ?s ?p ?o . FILTER(REGEX(?s, \"x\")) }", T)
        .unwrap_err();
    assert_eq!(e.kind, ExecErrorKind::Unsupported);
    let e = store
        .evaluate("SELECT ?s WHERE { ?s ?p ?o . OPTIONAL { ?o ?q ?r . OPTIONAL { ?r ?x ?y } } }", T)
        .unwrap_err();
    assert_eq!(e.kind, ExecErrorKind::Unsupported);
    let e = store.evaluate("SELECT ?s WHERE { ?s ", T).unwrap_err();
    assert_eq!(e.kind, ExecErrorKind::Syntax);
    let e = store
        .evaluate("SELECT ?s WHERE { ?s <iri>capital</iri> ?o }", T)
        .unwrap_err();
    assert_eq!(e.kind, ExecErrorKind::Syntax);
}

#[test]
fn timeout_is_reported() {
    let triples = (0..2000).map(|i| {
        Triple::new(
            Node::iri(format!("{WD}Q{i}")),
            Node::iri(format!("{WDT}P1")),
            Node::iri(format!("{WD}Q{}", i + 1)),
        )
    });
    let store = TripleStore::new(triples);
    let e = store
        .evaluate("SELECT * WHERE { ?a ?p ?b . ?c ?q ?d . ?e ?r ?f }", Duration::from_millis(20))
        .unwrap_err();
    assert_eq!(e.kind, ExecErrorKind::Timeout);
}

#[test]
fn fetch_candidates_for_a_predicate_slot() {
    let store = toy_with_population();
    let skel = parse_skeleton("SELECT ?x WHERE { wd:Q1 <iri>population</iri> ?x }").unwrap();
    let cq = skel.constraint_query(0).unwrap();
    let got = fetch_candidates(&store, &cq, 100_000, T).unwrap();
    let q1 = Node::iri(format!("{WD}Q1"));
    let expected: HashSet<String> = all(&store)
        .into_iter()
        .filter(|t| t.subject == q1)
        .filter_map(|t| t.predicate.as_iri().map(str::to_string))
        .collect();
    assert_eq!(got.iris, expected);
    assert!(got.iris.contains(&format!("{WDT}P2")));
    assert!(!got.truncated);

    let via_execute: HashSet<String> = store
        .evaluate(&cq.text, T)
        .unwrap()
        .column(&cq.target_variable)
        .unwrap()
        .flatten()
        .filter_map(|c| Node::from_ntriples(c)?.as_iri().map(str::to_string))
        .collect();
    assert_eq!(got.iris, via_execute);
}

#[test]
fn fetch_candidates_edge_cases() {
    let store = toy_with_population();
    let unsupported = ConstraintQuery {
        text: String::new(),
        body: String::new(),
        target_variable: "t".into(),
        supported: false,
    };
    assert!(fetch_candidates(&store, &unsupported, 10, T).is_err());

    let skel = parse_skeleton("SELECT ?x WHERE { wd:Q99 <iri>population</iri> ?x }").unwrap();
    let cq = skel.constraint_query(0).unwrap();
    let got = fetch_candidates(&store, &cq, 10, T).unwrap();
    assert!(got.iris.is_empty());

    let skel = parse_skeleton("SELECT ?x WHERE { ?s ?p <iri>anything</iri> }").unwrap();
    let cq = skel.constraint_query(0).unwrap();
    let got = fetch_candidates(&store, &cq, 2, T).unwrap();
    assert!(got.truncated);
    assert!(got.iris.len() <= 2);
    let got = fetch_candidates(&store, &cq, 100, T).unwrap();
    assert!(!got.truncated);
    assert_eq!(got.dropped_non_iri, 1);
    assert_eq!(got.iris.len(), 2);
}

#[test]
fn results_json_parsing() {
    let body = r#"{"head":{"vars":["x","label"]},"results":{"bindings":[
        {"x":{"type":"uri","value":"http://www.wikidata.org/entity/Q1"},
         "label":{"type":"literal","value":"Berlin","xml:lang":"en"}},
        {"x":{"type":"bnode","value":"b0"}},
        {"label":{"type":"literal","value":"5","datatype":"http://www.w3.org/2001/XMLSchema#integer"}}]}}"#;
    let t = parse_results_json(body).unwrap();
    assert_eq!(t.variables, ["x", "label"]);
    assert_eq!(
        t.rows,
        vec![
            vec![iri_cell(&format!("{WD}Q1")), Some("\"Berlin\"@en".into())],
            vec![Some("_:b0".into()), None],
            vec![None, Some("\"5\"^^<http://www.w3.org/2001/XMLSchema#integer>".into())],
        ]
    );
    let t = parse_results_json(r#"{"head":{},"boolean":false}"#).unwrap();
    assert_eq!(t.as_boolean(), Some(false));
    assert!(parse_results_json("{").is_err());
    assert!(parse_results_json(r#"{"head":{}}"#).is_err());
}

#[test]
fn tsv_errors() {
    let bad = "wd:Q1\twdt:P1\n";
    assert!(matches!(
        TripleStore::parse_tsv(bad.as_bytes(), Path::new("x")),
        Err(StoreError::Format { line: 1, .. })
    ));
    let bad = "# c\n\"lit\"\twdt:P1\twd:Q2\n";
    assert!(matches!(
        TripleStore::parse_tsv(bad.as_bytes(), Path::new("x")),
        Err(StoreError::Format { line: 2, .. })
    ));
}
