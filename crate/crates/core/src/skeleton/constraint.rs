use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::{serialize, Enclosing, Position, Skeleton, SkeletonError};

pub const TARGET_VARIABLE: &str = "grisp_target";

/// Single-column query whose bindings are the admissible IRIs for a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintQuery {
    /// Executable text including PREFIX declarations; empty when unsupported.
    pub text: String,
    /// Canonical body without the prologue.
    pub body: String,
    pub target_variable: String,
    pub supported: bool,
}

impl ConstraintQuery {
    fn unsupported() -> Self {
        Self {
            text: String::new(),
            body: String::new(),
            target_variable: TARGET_VARIABLE.to_string(),
            supported: false,
        }
    }
}

pub(super) fn derive(skeleton: &Skeleton, slot_id: usize) -> Result<ConstraintQuery, SkeletonError> {
    let next = skeleton
        .next_slot()
        .ok_or(SkeletonError::FullyResolved)?
        .slot_id;
    let placeholder = skeleton
        .placeholder(slot_id)
        .ok_or(SkeletonError::UnknownSlot(slot_id))?;
    if slot_id != next {
        return Err(SkeletonError::OutOfOrder {
            requested: slot_id,
            next,
        });
    }
    match (&placeholder.enclosing, placeholder.position) {
        (Enclosing::Triple { in_union: false, .. }, p) if p != Position::Unknown => {}
        _ => return Ok(ConstraintQuery::unsupported()),
    }

    let query = skeleton.query();
    let mut triples = Vec::new();
    collect_triples(&query.pattern, &mut triples);

    let mut taken: HashSet<String> = HashSet::new();
    query.visit_terms(&mut |t, _| {
        if let Term::Var(v) = t {
            taken.insert(v.clone());
        }
    });
    let mut fresh = FreshVars { taken, counter: 0 };
    let target = fresh.named(TARGET_VARIABLE);

    let Some(slot_index) = triples.iter().position(|t| {
        t.terms()
            .iter()
            .any(|term| matches!(term, Term::Placeholder(s) if s.id == slot_id))
    }) else {
        return Ok(ConstraintQuery::unsupported());
    };

    let mut slot_triple = triples[slot_index].clone();
    for term in slot_triple.terms_mut() {
        if let Term::Placeholder(s) = term {
            *term = if s.id == slot_id {
                Term::Var(target.clone())
            } else {
                Term::Var(fresh.next())
            };
        }
    }

    let connected = connected_triples(&triples, slot_index, &slot_triple);
    let elements = triples
        .iter()
        .enumerate()
        .filter(|(i, _)| connected.contains(i))
        .map(|(i, t)| {
            PatternElement::Triple(if i == slot_index {
                slot_triple.clone()
            } else {
                t.clone()
            })
        })
        .collect();

    let cq = Query {
        form: QueryForm::Select {
            modifier: SelectModifier::Distinct,
            projection: Projection::Items(vec![SelectItem::Var(target.clone())]),
        },
        pattern: GroupPattern { elements },
        modifiers: Modifiers::default(),
        values: None,
    };
    let body = serialize::write_query(&cq, serialize::Style::default());
    Ok(ConstraintQuery {
        text: format!("{}{}", serialize::prologue(&cq), body),
        body,
        target_variable: target,
        supported: true,
    })
}

/// Triples of the WHERE clause with plain and OPTIONAL groups flattened;
/// UNION branches are skipped.
fn collect_triples(group: &GroupPattern, out: &mut Vec<TriplePattern>) {
    for element in &group.elements {
        match element {
            PatternElement::Triple(t) => out.push(t.clone()),
            PatternElement::Optional(g) | PatternElement::Group(g) => collect_triples(g, out),
            PatternElement::Union(_) | PatternElement::Filter(_) | PatternElement::Values(_) => {}
        }
    }
}

/// Indices of the slot's triple plus every placeholder-free triple reachable
/// from it through shared variables.
fn connected_triples(
    triples: &[TriplePattern],
    slot_index: usize,
    slot_triple: &TriplePattern,
) -> HashSet<usize> {
    let mut keys: HashSet<String> = slot_triple.join_keys().collect();
    let mut included = HashSet::from([slot_index]);
    loop {
        let mut grew = false;
        for (i, t) in triples.iter().enumerate() {
            if included.contains(&i) || t.has_placeholder() {
                continue;
            }
            let tk: Vec<String> = t.join_keys().collect();
            if tk.iter().any(|k| keys.contains(k)) {
                included.insert(i);
                keys.extend(tk);
                grew = true;
            }
        }
        if !grew {
            return included;
        }
    }
}

struct FreshVars {
    taken: HashSet<String>,
    counter: usize,
}

impl FreshVars {
    fn named(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut n = 1;
        while self.taken.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.taken.insert(name.clone());
        name
    }

    fn next(&mut self) -> String {
        loop {
            let name = format!("grisp_o{}", self.counter);
            self.counter += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }
}
