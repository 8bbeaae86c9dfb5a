//! Work behind the subcommands that is not plain pipeline plumbing.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use kgqa_core::index::{EntryKind, Index, IndexEntry};
use kgqa_core::kgclient::{Node, Triple, TripleStore};
use kgqa_core::{Answer, Status};

const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const SKOS_PREF: &str = "http://www.w3.org/2004/02/skos/core#prefLabel";
const SKOS_ALT: &str = "http://www.w3.org/2004/02/skos/core#altLabel";
const SCHEMA_DESC: &str = "http://schema.org/description";
const WD_ENTITY: &str = "http://www.wikidata.org/entity/";
const WD_DIRECT: &str = "http://www.wikidata.org/prop/direct/";

/// Loads a knowledge graph from TSV, or N-Triples when the file ends in `.nt`.
pub fn load_kg(path: &Path) -> Result<TripleStore> {
    if path.extension().is_some_and(|e| e == "nt") {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let triples = parse_ntriples(BufReader::new(file))
            .with_context(|| format!("cannot parse {}", path.display()))?;
        Ok(TripleStore::new(triples))
    } else {
        Ok(TripleStore::load_tsv(path)?)
    }
}

fn take_term(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    let end = if s.starts_with('<') {
        s.find('>')? + 1
    } else if s.starts_with("_:") {
        s.find(char::is_whitespace).unwrap_or(s.len())
    } else {
        return None;
    };
    Some((&s[..end], &s[end..]))
}

/// Line-based N-Triples; comments and blank lines are skipped.
pub fn parse_ntriples(reader: impl BufRead) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parsed = (|| {
            let (s, rest) = take_term(t)?;
            let (p, rest) = take_term(rest)?;
            let o = rest.trim().strip_suffix('.')?.trim_end();
            Some((Node::from_ntriples(s)?, Node::from_ntriples(p)?, Node::from_ntriples(o)?))
        })();
        match parsed {
            Some((s, p @ Node::Iri(_), o)) if !matches!(s, Node::Literal(_)) => out.push(Triple::new(s, p, o)),
            _ => bail!("line {}: not a valid triple: {t}", n + 1),
        }
    }
    Ok(out)
}

pub fn write_kg_tsv(store: &TripleStore, mut out: impl Write) -> std::io::Result<()> {
    for t in store.triples() {
        writeln!(out, "{}\t{}\t{}", t.subject.to_ntriples(), t.predicate.to_ntriples(), t.object.to_ntriples())?;
    }
    Ok(())
}

#[derive(Debug, Default)]
pub struct KgStats {
    pub triples: usize,
    pub subjects: usize,
    pub predicates: usize,
    pub literals: usize,
}

pub fn kg_stats(store: &TripleStore) -> KgStats {
    let mut subjects = HashSet::new();
    let mut predicates = HashSet::new();
    let mut literals = 0;
    for t in store.triples() {
        subjects.insert(t.subject.to_ntriples());
        predicates.insert(t.predicate.to_ntriples());
        literals += matches!(t.object, Node::Literal(_)) as usize;
    }
    KgStats {
        triples: store.len(),
        subjects: subjects.len(),
        predicates: predicates.len(),
        literals,
    }
}

#[derive(Default)]
struct Labels {
    main: Option<(u8, String)>,
    aliases: Vec<String>,
    description: Option<(u8, String)>,
}

fn english_rank(lang: Option<&str>) -> Option<u8> {
    match lang {
        Some(l) if l.eq_ignore_ascii_case("en") => Some(2),
        None => Some(1),
        Some(l) if l.to_ascii_lowercase().starts_with("en-") => Some(0),
        _ => None,
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r', ';'], " ").trim().to_string()
}

/// Index entries from label triples (rdfs:label or skos:prefLabel, skos:altLabel,
/// schema:description; English or untagged). Items used as predicates, and
/// Wikidata property items, go to the property index.
pub fn entries_from_kg(store: &TripleStore) -> (Vec<IndexEntry>, Vec<IndexEntry>) {
    let mut labels: BTreeMap<String, Labels> = BTreeMap::new();
    let mut used_as_predicate = HashSet::new();
    for t in store.triples() {
        let Node::Iri(p) = &t.predicate else { continue };
        used_as_predicate.insert(p.clone());
        let (Some(s), Node::Literal(lit)) = (t.subject.as_iri(), &t.object) else {
            continue;
        };
        let Some(rank) = english_rank(lit.language.as_deref()) else {
            continue;
        };
        let text = clean(&lit.lexical);
        if text.is_empty() {
            continue;
        }
        let entry = labels.entry(s.to_string()).or_default();
        match p.as_str() {
            RDFS_LABEL | SKOS_PREF => {
                if entry.main.as_ref().is_none_or(|(r, _)| rank > *r) {
                    if let Some((_, old)) = entry.main.replace((rank, text)) {
                        entry.aliases.push(old);
                    }
                } else {
                    entry.aliases.push(text);
                }
            }
            SKOS_ALT => entry.aliases.push(text),
            SCHEMA_DESC if entry.description.as_ref().is_none_or(|(r, _)| rank > *r) => {
                entry.description = Some((rank, text));
            }
            _ => {}
        }
    }
    let mut entities = Vec::new();
    let mut properties = Vec::new();
    for (iri, l) in labels {
        let Some((_, main)) = l.main else { continue };
        let mut aliases: Vec<String> = Vec::new();
        for a in l.aliases {
            if a != main && !aliases.contains(&a) {
                aliases.push(a);
            }
        }
        let wikidata_property = iri
            .strip_prefix(WD_ENTITY)
            .filter(|id| id.starts_with('P') && id[1..].chars().all(|c| c.is_ascii_digit()))
            .map(|id| format!("{WD_DIRECT}{id}"));
        let (iri, kind) = match wikidata_property {
            Some(direct) => (direct, EntryKind::Property),
            None if used_as_predicate.contains(&iri) => (iri, EntryKind::Property),
            None => (iri, EntryKind::Entity),
        };
        let entry = IndexEntry {
            iri,
            main_label: main,
            aliases,
            description: l.description.map(|(_, d)| d),
            kind,
        };
        match kind {
            EntryKind::Entity => entities.push(entry),
            EntryKind::Property => properties.push(entry),
        }
    }
    (entities, properties)
}

pub fn write_index(entries: Vec<IndexEntry>, path: &Path) -> Result<usize> {
    let n = entries.len();
    let index = Index::build(entries);
    let mut out = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(out, "# iri\tmain label\taliases\tdescription")?;
    index.write_tsv(&mut out)?;
    Ok(n)
}

/// Human-readable answer for the terminal.
pub fn render_answer(answer: &Answer, max_rows: usize, verbose: bool) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    match answer.status {
        Status::Answered => {
            let _ = writeln!(s, "{}", answer.sparql.as_deref().unwrap_or_default());
            if let Some(table) = &answer.result {
                let _ = writeln!(s);
                let _ = writeln!(s, "{}", table.variables.join("\t"));
                for row in table.rows.iter().take(max_rows) {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| {
                            c.as_deref()
                                .and_then(Node::from_ntriples)
                                .map(|n| n.display_compact())
                                .unwrap_or_default()
                        })
                        .collect();
                    let _ = writeln!(s, "{}", cells.join("\t"));
                }
                if table.rows.len() > max_rows {
                    let _ = writeln!(s, "... {} more rows", table.rows.len() - max_rows);
                }
            }
        }
        Status::NoValidQuery => {
            let _ = writeln!(s, "no valid query: {}", answer.reason.as_deref().unwrap_or("unknown"));
            if let Some(q) = &answer.diagnostic_query {
                let _ = writeln!(s, "last rejected candidate:\n{q}");
            }
        }
    }
    let t = &answer.timings;
    let _ = writeln!(
        s,
        "\ntime {:.1} ms (generation {:.1}, search {:.1}, rank {:.1}, validation {:.1}); {} steps",
        t.total_ms, t.generation_ms, t.search_ms, t.rank_ms, t.validation_ms, answer.steps_used
    );
    if verbose {
        for e in &answer.trace {
            let _ = writeln!(s, "{}", serde_json::to_string(e).unwrap_or_default());
        }
    }
    s
}

pub fn write_entries_for(store: &TripleStore, dir: &Path) -> Result<(usize, usize)> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let (entities, properties) = entries_from_kg(store);
    let e = write_index(entities, &dir.join("entities.tsv"))?;
    let p = write_index(properties, &dir.join("properties.tsv"))?;
    Ok((e, p))
}
