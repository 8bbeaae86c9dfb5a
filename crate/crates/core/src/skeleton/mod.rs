//! SPARQL skeletons: queries whose IRI positions may hold natural-language
//! placeholders written as `<iri>label</iri>`.
//!
//! A [`Skeleton`] is parsed once, then rewritten one slot at a time with
//! [`Skeleton::substitute`], strictly left to right. For the current slot,
//! [`Skeleton::constraint_query`] derives a single-column `SELECT DISTINCT`
//! over the already resolved, connected part of the query whose bindings are
//! the IRIs that can fill the slot without emptying the result.

pub mod ast;
mod constraint;
mod lexer;
mod parser;
pub mod prefixes;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::*;
pub use constraint::{ConstraintQuery, TARGET_VARIABLE};
pub use prefixes::{expand_iri, render_iri};
pub use serialize::render_literal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(src: &str, offset: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Self {
            offset,
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("slot {0} does not exist or is already resolved")]
    UnknownSlot(usize),
    #[error("slot {requested} cannot be resolved before slot {next}")]
    OutOfOrder { requested: usize, next: usize },
    #[error("the skeleton has no unresolved slots")]
    FullyResolved,
}

/// Where a placeholder sits, which decides the index it is searched in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Position {
    Subject,
    Predicate,
    Object,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Enclosing {
    /// A triple pattern; `in_union` / `in_optional` describe its scope.
    Triple {
        pattern: TriplePattern,
        in_union: bool,
        in_optional: bool,
    },
    Expression,
    InlineData,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder {
    pub label: String,
    pub slot_id: usize,
    pub position: Position,
    pub enclosing: Enclosing,
}

#[derive(Debug, Clone)]
pub struct Skeleton {
    query: Query,
    placeholders: Vec<Placeholder>,
    source_text: String,
}

impl PartialEq for Skeleton {
    fn eq(&self, other: &Self) -> bool {
        self.query == other.query
    }
}

impl Eq for Skeleton {}

/// Parses skeleton text. Placeholder ordinals follow canonical serialization
/// order; when `;` / `,` shorthand repeats a placeholder, each expanded
/// copy becomes its own slot.
pub fn parse_skeleton(text: &str) -> Result<Skeleton, ParseError> {
    let mut query = parser::parse_query(text)?;
    let mut next = 0;
    query.visit_terms_mut(&mut |term, _| {
        if let Term::Placeholder(slot) = term {
            slot.id = next;
            next += 1;
        }
    });
    Ok(Skeleton::from_parts(query, text.to_string()))
}

/// Parses and re-serializes; the usual way to compare two queries.
pub fn canonicalize(text: &str) -> Result<String, ParseError> {
    parse_skeleton(text).map(|s| s.canonical())
}

impl Skeleton {
    fn from_parts(query: Query, source_text: String) -> Self {
        let placeholders = analyze(&query);
        Self {
            query,
            placeholders,
            source_text,
        }
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    /// Unresolved placeholders in slot order.
    pub fn placeholders(&self) -> &[Placeholder] {
        &self.placeholders
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn is_resolved(&self) -> bool {
        self.placeholders.is_empty()
    }

    /// Lowest unresolved slot.
    pub fn next_slot(&self) -> Option<&Placeholder> {
        self.placeholders.first()
    }

    pub fn placeholder(&self, slot_id: usize) -> Option<&Placeholder> {
        self.placeholders.iter().find(|p| p.slot_id == slot_id)
    }

    /// Canonical body text; IRIs compacted with the default prefixes only.
    pub fn canonical(&self) -> String {
        serialize::write_query(&self.query, serialize::Style::default())
    }

    /// Canonical body with `slot_id` wrapped in `<mark>…</mark>`.
    pub fn highlighted(&self, slot_id: usize) -> String {
        serialize::write_query(
            &self.query,
            serialize::Style {
                highlight: Some(slot_id),
            },
        )
    }

    /// Executable text: PREFIX declarations for every prefix used, then the
    /// canonical body.
    pub fn to_sparql(&self) -> String {
        format!("{}{}", serialize::prologue(&self.query), self.canonical())
    }

    /// Replaces the lowest unresolved slot with `iri`.
    pub fn substitute(&self, slot_id: usize, iri: &str) -> Result<Skeleton, SkeletonError> {
        let next = self.next_slot().ok_or(SkeletonError::FullyResolved)?.slot_id;
        if self.placeholder(slot_id).is_none() {
            return Err(SkeletonError::UnknownSlot(slot_id));
        }
        if slot_id != next {
            return Err(SkeletonError::OutOfOrder {
                requested: slot_id,
                next,
            });
        }
        let iri = expand_iri(iri).unwrap_or_else(|| iri.to_string());
        let mut query = self.query.clone();
        query.visit_terms_mut(&mut |term, _| {
            if matches!(term, Term::Placeholder(s) if s.id == slot_id) {
                *term = Term::Iri(iri.clone());
            }
        });
        Ok(Skeleton::from_parts(query, self.source_text.clone()))
    }

    /// Derives the candidate-restriction query for `slot_id`.
    pub fn constraint_query(&self, slot_id: usize) -> Result<ConstraintQuery, SkeletonError> {
        constraint::derive(self, slot_id)
    }

    /// Every IRI occurrence with its position, in serialization order.
    pub fn iri_occurrences(&self) -> Vec<(String, Position)> {
        let mut out = Vec::new();
        self.query.visit_terms(&mut |term, site| {
            if let Term::Iri(iri) = term {
                out.push((iri.clone(), position_of(site.role)));
            }
        });
        out
    }

    /// Replaces IRI occurrences `from..` (serialization order) with
    /// placeholders labelled by `label_for(occurrence_index, iri)`.
    pub fn templatize(
        &self,
        from: usize,
        mut label_for: impl FnMut(usize, &str) -> String,
    ) -> Skeleton {
        let mut query = self.query.clone();
        let mut occurrence = 0;
        query.visit_terms_mut(&mut |term, _| {
            if let Term::Iri(iri) = term {
                if occurrence >= from {
                    let label = label_for(occurrence, iri);
                    *term = Term::Placeholder(Slot { id: 0, label });
                }
                occurrence += 1;
            }
        });
        let mut next = 0;
        query.visit_terms_mut(&mut |term, _| {
            if let Term::Placeholder(slot) = term {
                slot.id = next;
                next += 1;
            }
        });
        let text = serialize::write_query(&query, serialize::Style::default());
        Skeleton::from_parts(query, text)
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

fn position_of(role: TermRole) -> Position {
    match role {
        TermRole::Subject => Position::Subject,
        TermRole::Predicate => Position::Predicate,
        TermRole::Object => Position::Object,
        TermRole::Expression | TermRole::Data => Position::Unknown,
    }
}

fn analyze(query: &Query) -> Vec<Placeholder> {
    let mut sites = Vec::new();
    query.visit_terms(&mut |term, site| sites.push((term.clone(), site)));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sites.len() {
        let (term, site) = &sites[i];
        if site.role == TermRole::Subject {
            // Triples are always visited as subject, predicate, object.
            let pattern = TriplePattern::new(
                sites[i].0.clone(),
                sites[i + 1].0.clone(),
                sites[i + 2].0.clone(),
            );
            for (t, s) in &sites[i..i + 3] {
                if let Term::Placeholder(slot) = t {
                    out.push(Placeholder {
                        label: slot.label.clone(),
                        slot_id: slot.id,
                        position: position_of(s.role),
                        enclosing: Enclosing::Triple {
                            pattern: pattern.clone(),
                            in_union: s.union_depth > 0,
                            in_optional: s.optional_depth > 0,
                        },
                    });
                }
            }
            i += 3;
            continue;
        }
        if let Term::Placeholder(slot) = term {
            out.push(Placeholder {
                label: slot.label.clone(),
                slot_id: slot.id,
                position: Position::Unknown,
                enclosing: if site.role == TermRole::Data {
                    Enclosing::InlineData
                } else {
                    Enclosing::Expression
                },
            });
        }
        i += 1;
    }
    out.sort_by_key(|p| p.slot_id);
    out
}
