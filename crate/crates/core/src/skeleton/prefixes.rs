//! Well-known namespace prefixes.
//!
//! Skeletons and fixture files routinely use `wd:` / `wdt:` style names
//! without declaring them, so the parser pre-loads this table. Canonical
//! serialization compacts IRIs with this table only; declared prefixes are
//! expanded at parse time and never appear in canonical output.

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

pub const DEFAULT_PREFIXES: &[(&str, &str)] = &[
    ("fb", "http://rdf.freebase.com/ns/"),
    ("owl", "http://www.w3.org/2002/07/owl#"),
    ("p", "http://www.wikidata.org/prop/"),
    ("pq", "http://www.wikidata.org/prop/qualifier/"),
    ("ps", "http://www.wikidata.org/prop/statement/"),
    ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
    ("schema", "http://schema.org/"),
    ("skos", "http://www.w3.org/2004/02/skos/core#"),
    ("wd", "http://www.wikidata.org/entity/"),
    ("wdt", "http://www.wikidata.org/prop/direct/"),
    ("wikibase", "http://wikiba.se/ontology#"),
    ("xsd", XSD),
];

pub fn default_namespace(prefix: &str) -> Option<&'static str> {
    DEFAULT_PREFIXES
        .iter()
        .find(|(p, _)| *p == prefix)
        .map(|(_, ns)| *ns)
}

fn is_local_name(local: &str) -> bool {
    let mut chars = local.chars();
    match chars.next() {
        None => false,
        Some(c) if c.is_ascii_alphanumeric() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        }
        Some(_) => false,
    }
}

/// Compacts an expanded IRI to `prefix:local` when a default namespace
/// matches and the remainder is a simple local name. Longest namespace wins.
pub fn compact(iri: &str) -> Option<(&'static str, &str)> {
    DEFAULT_PREFIXES
        .iter()
        .filter(|(_, ns)| iri.starts_with(ns))
        .max_by_key(|(_, ns)| ns.len())
        .and_then(|(prefix, ns)| {
            let local = &iri[ns.len()..];
            is_local_name(local).then_some((*prefix, local))
        })
}

/// Renders an expanded IRI as a SPARQL term: `wd:Q2` or `<http://...>`.
pub fn render_iri(iri: &str) -> String {
    match compact(iri) {
        Some((prefix, local)) => format!("{prefix}:{local}"),
        None => format!("<{iri}>"),
    }
}

/// Expands a term string as found in fixture files: `wd:Q2`, `<http://x>`
/// or a bare absolute IRI.
pub fn expand_iri(text: &str) -> Option<String> {
    let text = text.trim();
    if let Some(inner) = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        return Some(inner.to_string());
    }
    if text.contains("://") {
        return Some(text.to_string());
    }
    let (prefix, local) = text.split_once(':')?;
    default_namespace(prefix).map(|ns| format!("{ns}{local}"))
}
