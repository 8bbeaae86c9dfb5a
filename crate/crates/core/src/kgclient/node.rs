//! RDF terms as stored and as rendered in result cells.

use std::fmt;

use crate::skeleton::prefixes::XSD;
use crate::skeleton::{expand_iri, Literal};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Iri(String),
    Literal(Literal),
    Blank(String),
}

impl Node {
    pub fn iri(iri: impl Into<String>) -> Self {
        Node::Iri(iri.into())
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Node::Iri(iri) => Some(iri),
            _ => None,
        }
    }

    /// N-Triples spelling: `<iri>`, `"lex"`, `"lex"@en`, `"lex"^^<dt>`, `_:b`.
    pub fn to_ntriples(&self) -> String {
        match self {
            Node::Iri(iri) => format!("<{iri}>"),
            Node::Blank(b) => format!("_:{b}"),
            Node::Literal(lit) => {
                let mut out = String::with_capacity(lit.lexical.len() + 2);
                out.push('"');
                for c in lit.lexical.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\r' => out.push_str("\\r"),
                        '\t' => out.push_str("\\t"),
                        c => out.push(c),
                    }
                }
                out.push('"');
                if let Some(lang) = &lit.language {
                    out.push('@');
                    out.push_str(lang);
                } else if let Some(dt) = &lit.datatype {
                    out.push_str("^^<");
                    out.push_str(dt);
                    out.push('>');
                }
                out
            }
        }
    }

    /// Inverse of [`Node::to_ntriples`].
    pub fn from_ntriples(cell: &str) -> Option<Node> {
        if let Some(b) = cell.strip_prefix("_:") {
            return Some(Node::Blank(b.to_string()));
        }
        if let Some(inner) = cell.strip_prefix('<').and_then(|c| c.strip_suffix('>')) {
            return Some(Node::Iri(inner.to_string()));
        }
        let (lexical, rest) = parse_quoted(cell)?;
        literal_suffix(lexical, rest, |dt| {
            dt.strip_prefix('<').and_then(|d| d.strip_suffix('>')).map(str::to_string)
        })
    }

    /// Lenient form used in fixture files: prefixed names, bare numbers and
    /// `"lex"^^xsd:type` are accepted besides plain N-Triples.
    pub fn parse_lenient(text: &str) -> Result<Node, String> {
        let text = text.trim();
        if text.starts_with('"') {
            let (lexical, rest) = parse_quoted(text).ok_or_else(|| format!("bad literal {text:?}"))?;
            return literal_suffix(lexical, rest, expand_iri).ok_or_else(|| format!("bad literal suffix in {text:?}"));
        }
        if let Some(b) = text.strip_prefix("_:") {
            if b.is_empty() {
                return Err("empty blank node label".into());
            }
            return Ok(Node::Blank(b.to_string()));
        }
        if let Some(kind) = numeric_kind(text) {
            return Ok(Node::Literal(Literal::typed(text, format!("{XSD}{kind}"))));
        }
        expand_iri(text)
            .map(Node::Iri)
            .ok_or_else(|| format!("cannot read term {text:?}"))
    }

    /// Shorter display form with default prefixes applied.
    pub fn display_compact(&self) -> String {
        match self {
            Node::Iri(iri) => crate::skeleton::render_iri(iri),
            Node::Literal(lit) => crate::skeleton::render_literal(lit),
            Node::Blank(b) => format!("_:{b}"),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ntriples())
    }
}

fn numeric_kind(text: &str) -> Option<&'static str> {
    let body = text.strip_prefix(['+', '-']).unwrap_or(text);
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if digits(body) {
        return Some("integer");
    }
    match body.split_once('.') {
        Some((a, b)) if (a.is_empty() || digits(a)) && digits(b) => Some("decimal"),
        _ => None,
    }
}

/// Splits a leading `"..."` string off `text`, unescaping it.
fn parse_quoted(text: &str) -> Option<(String, &str)> {
    let rest = text.strip_prefix('"')?;
    let mut out = String::new();
    let mut chars = rest.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Some((out, &rest[i + 1..])),
            '\\' => {
                let (_, e) = chars.next()?;
                out.push(match e {
                    'n' => '\n',
                    'r' => '\r',
                    't' => '\t',
                    other => other,
                });
            }
            c => out.push(c),
        }
    }
    None
}

fn literal_suffix(
    lexical: String,
    rest: &str,
    datatype: impl Fn(&str) -> Option<String>,
) -> Option<Node> {
    let mut lit = Literal::plain(lexical);
    if let Some(lang) = rest.strip_prefix('@') {
        if lang.is_empty() {
            return None;
        }
        lit.language = Some(lang.to_string());
    } else if let Some(dt) = rest.strip_prefix("^^") {
        lit.datatype = Some(datatype(dt)?);
    } else if !rest.is_empty() {
        return None;
    }
    Some(Node::Literal(lit))
}
