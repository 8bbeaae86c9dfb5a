
use std::path::Path;
use std::process::{Command, Output};

use kgqa_cli::commands::{entries_from_kg, kg_stats, load_kg, parse_ntriples, write_kg_tsv};
use kgqa_core::index::{EntryKind, Index};

fn workspace() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

fn kgqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgqa"))
        .current_dir(workspace())
        .env_remove("KGQA_CONFIG")
        .args(args)
        .output()
        .expect("run kgqa")
}

const TOY: &str = "crates/core/fixtures/toy.toml";

#[test]
fn ask_answers_and_exits_zero() {
    let out = kgqa(&["--config", TOY, "ask", "What is the capital of Germany?", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "Answered");
    assert!(v["rows"].to_string().contains("Q64"));
}

#[test]
fn ask_with_gold_uses_oracle() {
    let out = kgqa(&[
        "-c",
        TOY,
        "-s",
        "ranker=oracle",
        "ask",
        "Where did Mozart die?",
        "--gold",
        "SELECT ?x WHERE { wd:Q254 wdt:P20 ?x }",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("P20"));
}

#[test]
fn unanswerable_question_exits_two() {
    let out = kgqa(&["-c", TOY, "-s", "kg_path=crates/core/fixtures/entities.tsv", "ask", "Where did Mozart die?"]);
    // entities.tsv is not a triple file
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    let set = format!("kg_path={}", empty.display());
    let out = kgqa(&["-c", TOY, "-s", &set, "ask", "Where did Mozart die?"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no valid query"));
}

#[test]
fn config_errors_exit_one() {
    let out = kgqa(&["-c", TOY, "-s", "entity_index=/nonexistent/entities.tsv", "ask", "q"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = kgqa(&["-c", TOY, "-s", "search_top_k=26", "ask", "q"]);
    assert_eq!(out.status.code(), Some(1));
    let out = kgqa(&["-c", TOY, "-s", "keep_skeletons=9", "ask", "q"]);
    assert_eq!(out.status.code(), Some(1));
    let out = kgqa(&["ask", "q"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_and_synth_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let eval_out = dir.path().join("eval");
    let out = kgqa(&[
        "-c",
        TOY,
        "-s",
        "ranker=oracle",
        "eval",
        "--dataset",
        "crates/core/fixtures/eval_dataset.jsonl",
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(eval_out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mean_f1"], 1.0);
    assert_eq!(std::fs::read_to_string(eval_out.join("records.jsonl")).unwrap().lines().count(), 25);
    assert!(eval_out.join("records.tsv").exists());

    let synth_out = dir.path().join("synth");
    let out = kgqa(&[
        "-c",
        TOY,
        "synth",
        "--dataset",
        "crates/core/fixtures/synth_dataset.jsonl",
        "--epochs",
        "2",
        "--seed",
        "5",
        "--out",
        synth_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["skeleton.ep0.jsonl", "rerank.ep1.jsonl", "manifest.json"] {
        assert!(synth_out.join(f).exists(), "{f}");
    }
}

const LABELLED: &str = r#"
# a comment
<http://ex.org/a> <http://www.w3.org/2000/01/rdf-schema#label> "Alpha"@en .
<http://ex.org/a> <http://www.w3.org/2000/01/rdf-schema#label> "Alfa"@de .
<http://ex.org/a> <http://www.w3.org/2004/02/skos/core#altLabel> "First" .
<http://ex.org/a> <http://schema.org/description> "the first letter"@en .
<http://ex.org/a> <http://ex.org/next> <http://ex.org/b> .
<http://ex.org/b> <http://www.w3.org/2004/02/skos/core#prefLabel> "Beta" .
<http://ex.org/next> <http://www.w3.org/2000/01/rdf-schema#label> "next"@en .
_:n <http://ex.org/next> "with \"quotes\""@en-GB .
"#;

#[test]
fn ntriples_and_label_extraction() {
    let triples = parse_ntriples(LABELLED.as_bytes()).unwrap();
    assert_eq!(triples.len(), 8);
    assert!(parse_ntriples("<a> <b> .".as_bytes()).is_err());
    assert!(parse_ntriples("\"x\" <http://p> <http://o> .".as_bytes()).is_err());

    let store = kgqa_core::kgclient::TripleStore::new(triples);
    let stats = kg_stats(&store);
    assert_eq!((stats.triples, stats.predicates, stats.literals), (8, 5, 7));

    let (entities, properties) = entries_from_kg(&store);
    assert_eq!(entities.len(), 2);
    let a = &entities[0];
    assert_eq!(a.iri, "http://ex.org/a");
    assert_eq!(a.main_label, "Alpha");
    assert_eq!(a.aliases, vec!["First".to_string()]);
    assert_eq!(a.description.as_deref(), Some("the first letter"));
    assert_eq!(properties.len(), 1);
    assert_eq!(properties[0].iri, "http://ex.org/next");
}

#[test]
fn kg_load_and_index_build_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let nt = dir.path().join("g.nt");
    std::fs::write(&nt, LABELLED).unwrap();
    let tsv = dir.path().join("g.tsv");
    let out = kgqa(&["kg", "load", nt.to_str().unwrap(), "--out", tsv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("8 triples"));
    let a = load_kg(&nt).unwrap();
    let b = load_kg(&tsv).unwrap();
    let mut ta: Vec<_> = a.triples().collect();
    let mut tb: Vec<_> = b.triples().collect();
    ta.sort();
    tb.sort();
    assert_eq!(ta, tb);
    let mut buf = Vec::new();
    write_kg_tsv(&b, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 8);

    let idx = dir.path().join("idx");
    let out = kgqa(&["index", "build", "--kg", tsv.to_str().unwrap(), "--out", idx.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let entities = Index::load_tsv(&idx.join("entities.tsv"), EntryKind::Entity).unwrap();
    assert_eq!(entities.len(), 2);
    let hits = entities.search("alpha", 5, None);
    assert_eq!(hits[0].entry.iri, "http://ex.org/a");
}
