//! Embedded in-memory triple store.
//!
//! Supported: basic graph patterns, nested groups, UNION, one level of
//! OPTIONAL, VALUES, FILTER over comparisons, boolean connectives,
//! arithmetic and a handful of string/term functions, ORDER BY, DISTINCT,
//! LIMIT/OFFSET, `SELECT *` and ASK. Aggregates, GROUP BY, HAVING and
//! projected expressions report [`ExecErrorKind::Unsupported`].

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{ExecError, ExecErrorKind, Node, ResultTable, SparqlEndpoint};
use crate::skeleton::ast::*;
use crate::skeleton::parse_skeleton;
use crate::skeleton::prefixes::XSD;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Node,
    pub predicate: Node,
    pub object: Node,
}

impl Triple {
    pub fn new(subject: Node, predicate: Node, object: Node) -> Self {
        Self {
            subject,
            predicate,
            object,
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

type Id = u32;

#[derive(Debug, Default)]
pub struct TripleStore {
    nodes: Vec<Node>,
    ids: HashMap<Node, Id>,
    triples: Vec<[Id; 3]>,
    /// Triple positions keyed by the node id at subject, predicate, object.
    by_position: [HashMap<Id, Vec<u32>>; 3],
}

impl TripleStore {
    /// Builds a store; duplicate triples are kept once.
    pub fn new(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut store = TripleStore::default();
        let mut seen = HashSet::new();
        for t in triples {
            let key = [
                store.intern(t.subject),
                store.intern(t.predicate),
                store.intern(t.object),
            ];
            if seen.insert(key) {
                let at = store.triples.len() as u32;
                for (pos, id) in key.iter().enumerate() {
                    store.by_position[pos].entry(*id).or_default().push(at);
                }
                store.triples.push(key);
            }
        }
        store
    }

    fn intern(&mut self, node: Node) -> Id {
        if let Some(&id) = self.ids.get(&node) {
            return id;
        }
        let id = self.nodes.len() as Id;
        self.nodes.push(node.clone());
        self.ids.insert(node, id);
        id
    }

    /// Reads `s<TAB>p<TAB>o` lines; `#` lines and blank lines are skipped.
    pub fn load_tsv(path: &Path) -> Result<Self, StoreError> {
        let file = File::open(path).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_tsv(BufReader::new(file), path)
    }

    pub fn parse_tsv(reader: impl BufRead, path: &Path) -> Result<Self, StoreError> {
        let mut triples = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| StoreError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: String| StoreError::Format {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let subject = Node::parse_lenient(cols[0]).map_err(&err)?;
            let predicate = Node::parse_lenient(cols[1]).map_err(&err)?;
            let object = Node::parse_lenient(cols[2]).map_err(&err)?;
            if matches!(subject, Node::Literal(_)) {
                return Err(err("literal in subject position".into()));
            }
            if !matches!(predicate, Node::Iri(_)) {
                return Err(err("predicate must be an IRI".into()));
            }
            triples.push(Triple::new(subject, predicate, object));
        }
        Ok(Self::new(triples))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.triples.iter().map(|[s, p, o]| {
            Triple::new(
                self.nodes[*s as usize].clone(),
                self.nodes[*p as usize].clone(),
                self.nodes[*o as usize].clone(),
            )
        })
    }

    pub fn contains_node(&self, node: &Node) -> bool {
        self.ids.contains_key(node)
    }

    /// Evaluates a query, giving up with a timeout error after `timeout`.
    pub fn evaluate(&self, query: &str, timeout: Duration) -> Result<ResultTable, ExecError> {
        let skeleton = parse_skeleton(query).map_err(|e| ExecError::new(ExecErrorKind::Syntax, e.to_string()))?;
        if !skeleton.is_resolved() {
            return Err(ExecError::new(
                ExecErrorKind::Syntax,
                "query still contains <iri> placeholders",
            ));
        }
        Evaluator::new(self, Instant::now() + timeout).run(skeleton.query())
    }
}

impl SparqlEndpoint for TripleStore {
    fn execute(&self, query: &str, timeout: Duration) -> Result<ResultTable, ExecError> {
        self.evaluate(query, timeout)
    }

    fn describe(&self) -> String {
        format!("embedded store ({} triples)", self.len())
    }

    fn ping(&self) -> bool {
        true
    }
}

type Row = Vec<Option<Id>>;

#[derive(Clone, Copy)]
enum Slot {
    Var(usize),
    Const(Option<Id>),
}

#[derive(Debug, Clone, PartialEq)]
enum Val {
    Node(Node),
    Bool(bool),
    Num(f64),
}

fn unsupported(what: impl Into<String>) -> ExecError {
    ExecError::new(ExecErrorKind::Unsupported, what)
}

struct Evaluator<'a> {
    store: &'a TripleStore,
    vars: Vec<String>,
    var_index: HashMap<String, usize>,
    /// Query constants absent from the store, with ids past the store's.
    extra: Vec<Node>,
    extra_ids: HashMap<Node, Id>,
    deadline: Instant,
    ticks: u32,
}

impl<'a> Evaluator<'a> {
    fn new(store: &'a TripleStore, deadline: Instant) -> Self {
        Self {
            store,
            vars: Vec::new(),
            var_index: HashMap::new(),
            extra: Vec::new(),
            extra_ids: HashMap::new(),
            deadline,
            ticks: 0,
        }
    }

    fn tick(&mut self) -> Result<(), ExecError> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks.is_multiple_of(4096) && Instant::now() > self.deadline {
            return Err(ExecError::new(ExecErrorKind::Timeout, "embedded evaluation timed out"));
        }
        Ok(())
    }

    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.var_index.get(name) {
            return i;
        }
        self.vars.push(name.to_string());
        self.var_index.insert(name.to_string(), self.vars.len() - 1);
        self.vars.len() - 1
    }

    fn node(&self, id: Id) -> &Node {
        let n = self.store.nodes.len();
        if (id as usize) < n {
            &self.store.nodes[id as usize]
        } else {
            &self.extra[id as usize - n]
        }
    }

    /// Id for a constant, allocating a query-local one when the store lacks it.
    fn intern_local(&mut self, node: &Node) -> Id {
        if let Some(&id) = self.store.ids.get(node) {
            return id;
        }
        if let Some(&id) = self.extra_ids.get(node) {
            return id;
        }
        let id = (self.store.nodes.len() + self.extra.len()) as Id;
        self.extra.push(node.clone());
        self.extra_ids.insert(node.clone(), id);
        id
    }

    fn term_node(term: &Term) -> Option<Node> {
        match term {
            Term::Iri(iri) => Some(Node::Iri(iri.clone())),
            Term::Literal(l) => Some(Node::Literal(l.clone())),
            _ => None,
        }
    }

    fn slot(&mut self, term: &Term) -> Slot {
        match term {
            Term::Var(v) => Slot::Var(self.var(v)),
            Term::Blank(b) => Slot::Var(self.var(&format!("_:{b}"))),
            other => {
                let node = Self::term_node(other).expect("placeholders rejected earlier");
                Slot::Const(self.store.ids.get(&node).copied())
            }
        }
    }

    fn run(mut self, q: &Query) -> Result<ResultTable, ExecError> {
        let m = &q.modifiers;
        if !m.group_by.is_empty() || !m.having.is_empty() {
            return Err(unsupported("GROUP BY / HAVING"));
        }
        // Register variables in textual order so SELECT * is stable.
        q.visit_terms(&mut |t, _| {
            if let Term::Var(v) = t {
                self.var(v);
            }
        });

        let mut rows = self.group(&q.pattern, vec![vec![None; self.vars.len()]], 0)?;
        if let Some(values) = &q.values {
            rows = self.values(values, rows)?;
        }

        let QueryForm::Select {
            modifier,
            projection,
        } = &q.form
        else {
            return Ok(ResultTable::boolean(!rows.is_empty()));
        };

        if !m.order_by.is_empty() {
            let mut keyed = Vec::with_capacity(rows.len());
            for row in rows {
                let mut key = Vec::with_capacity(m.order_by.len());
                for c in &m.order_by {
                    key.push(self.eval(&c.expression, &row)?);
                }
                keyed.push((key, row));
            }
            keyed.sort_by(|(a, _), (b, _)| {
                for (i, c) in m.order_by.iter().enumerate() {
                    let ord = order_vals(&a[i], &b[i]);
                    let ord = if c.descending { ord.reverse() } else { ord };
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            });
            rows = keyed.into_iter().map(|(_, r)| r).collect();
        }

        let columns: Vec<(String, usize)> = match projection {
            Projection::All => self
                .vars
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.starts_with("_:"))
                .map(|(i, v)| (v.clone(), i))
                .collect(),
            Projection::Items(items) => {
                let mut out = Vec::new();
                for item in items {
                    match item {
                        SelectItem::Var(v) => out.push((v.clone(), self.var_index[v])),
                        SelectItem::Expr(..) => return Err(unsupported("projected expressions")),
                    }
                }
                out
            }
        };

        let mut seen = HashSet::new();
        let mut out_rows = Vec::new();
        let offset = m.offset.unwrap_or(0) as usize;
        let limit = m.limit.map_or(usize::MAX, |l| l as usize);
        let mut skipped = 0;
        for row in rows {
            let projected: Vec<Option<Id>> = columns.iter().map(|(_, i)| row.get(*i).copied().flatten()).collect();
            if *modifier == SelectModifier::Distinct && !seen.insert(projected.clone()) {
                continue;
            }
            if skipped < offset {
                skipped += 1;
                continue;
            }
            if out_rows.len() >= limit {
                break;
            }
            out_rows.push(
                projected
                    .into_iter()
                    .map(|c| c.map(|id| self.node(id).to_ntriples()))
                    .collect(),
            );
        }
        Ok(ResultTable::new(columns.into_iter().map(|(v, _)| v).collect(), out_rows))
    }

    fn group(&mut self, g: &GroupPattern, input: Vec<Row>, optional_depth: usize) -> Result<Vec<Row>, ExecError> {
        let mut rows = input;
        let mut filters = Vec::new();
        for element in &g.elements {
            match element {
                PatternElement::Triple(t) => rows = self.join_triple(t, rows)?,
                PatternElement::Group(sub) => rows = self.group(sub, rows, optional_depth)?,
                PatternElement::Union(branches) => {
                    let mut out = Vec::new();
                    for b in branches {
                        out.extend(self.group(b, rows.clone(), optional_depth)?);
                    }
                    rows = out;
                }
                PatternElement::Optional(sub) => {
                    if optional_depth > 0 {
                        return Err(unsupported("nested OPTIONAL"));
                    }
                    let mut out = Vec::new();
                    for row in rows {
                        let extended = self.group(sub, vec![row.clone()], optional_depth + 1)?;
                        if extended.is_empty() {
                            out.push(row);
                        } else {
                            out.extend(extended);
                        }
                    }
                    rows = out;
                }
                PatternElement::Values(data) => rows = self.values(data, rows)?,
                PatternElement::Filter(e) => filters.push(e),
            }
        }
        for f in filters {
            let mut kept = Vec::with_capacity(rows.len());
            for row in rows {
                if self.eval(f, &row)?.as_ref().and_then(ebv) == Some(true) {
                    kept.push(row);
                }
            }
            rows = kept;
        }
        Ok(rows)
    }

    fn join_triple(&mut self, t: &TriplePattern, rows: Vec<Row>) -> Result<Vec<Row>, ExecError> {
        let slots = [self.slot(&t.subject), self.slot(&t.predicate), self.slot(&t.object)];
        let width = self.vars.len();
        let mut out = Vec::new();
        for mut row in rows {
            row.resize(width, None);
            let mut bound = [None; 3];
            let mut impossible = false;
            for (pos, s) in slots.iter().enumerate() {
                match *s {
                    Slot::Const(Some(id)) => bound[pos] = Some(id),
                    Slot::Const(None) => impossible = true,
                    Slot::Var(v) => bound[pos] = row[v],
                }
            }
            if impossible {
                continue;
            }
            let store = self.store;
            let mut best: Option<&[u32]> = None;
            for (pos, id) in bound.iter().enumerate() {
                if let Some(id) = id {
                    let list = store.by_position[pos].get(id).map_or(&[][..], Vec::as_slice);
                    if best.is_none_or(|b| list.len() < b.len()) {
                        best = Some(list);
                    }
                }
            }
            let candidates: Box<dyn Iterator<Item = &[Id; 3]>> = match best {
                Some(list) => Box::new(list.iter().map(|&i| &store.triples[i as usize])),
                None => Box::new(store.triples.iter()),
            };
            'triples: for triple in candidates {
                self.tick()?;
                let mut next = row.clone();
                for pos in 0..3 {
                    match slots[pos] {
                        Slot::Const(Some(id)) => {
                            if triple[pos] != id {
                                continue 'triples;
                            }
                        }
                        Slot::Const(None) => continue 'triples,
                        Slot::Var(v) => match next[v] {
                            Some(id) if id != triple[pos] => continue 'triples,
                            Some(_) => {}
                            None => next[v] = Some(triple[pos]),
                        },
                    }
                }
                out.push(next);
            }
        }
        Ok(out)
    }

    fn values(&mut self, data: &InlineData, rows: Vec<Row>) -> Result<Vec<Row>, ExecError> {
        let cols: Vec<usize> = data.variables.iter().map(|v| self.var(v)).collect();
        let mut table: Vec<Vec<Option<Id>>> = Vec::new();
        for r in &data.rows {
            let mut cells = Vec::new();
            for cell in r {
                cells.push(match cell {
                    None => None,
                    Some(t) => match Self::term_node(t) {
                        Some(n) => Some(self.intern_local(&n)),
                        None => return Err(unsupported("variables inside VALUES")),
                    },
                });
            }
            table.push(cells);
        }
        let width = self.vars.len();
        let mut out = Vec::new();
        for mut row in rows {
            row.resize(width, None);
            'data: for cells in &table {
                let mut next = row.clone();
                for (c, v) in cells.iter().zip(&cols) {
                    match (*c, next[*v]) {
                        (Some(a), Some(b)) if a != b => continue 'data,
                        (Some(a), None) => next[*v] = Some(a),
                        _ => {}
                    }
                }
                out.push(next);
            }
        }
        Ok(out)
    }

    fn eval(&mut self, e: &Expression, row: &Row) -> Result<Option<Val>, ExecError> {
        Ok(match e {
            Expression::Term(Term::Var(v)) => self
                .var_index
                .get(v)
                .and_then(|&i| row.get(i).copied().flatten())
                .map(|id| Val::Node(self.node(id).clone())),
            Expression::Term(t) => match Self::term_node(t) {
                Some(n) => Some(Val::Node(n)),
                None => return Err(unsupported("blank node in expression")),
            },
            Expression::Binary(BinaryOp::Or, l, r) => {
                let a = self.eval(l, row)?.as_ref().and_then(ebv);
                let b = self.eval(r, row)?.as_ref().and_then(ebv);
                match (a, b) {
                    (Some(true), _) | (_, Some(true)) => Some(Val::Bool(true)),
                    (Some(false), Some(false)) => Some(Val::Bool(false)),
                    _ => None,
                }
            }
            Expression::Binary(BinaryOp::And, l, r) => {
                let a = self.eval(l, row)?.as_ref().and_then(ebv);
                let b = self.eval(r, row)?.as_ref().and_then(ebv);
                match (a, b) {
                    (Some(false), _) | (_, Some(false)) => Some(Val::Bool(false)),
                    (Some(true), Some(true)) => Some(Val::Bool(true)),
                    _ => None,
                }
            }
            Expression::Binary(op, l, r) => {
                let (Some(a), Some(b)) = (self.eval(l, row)?, self.eval(r, row)?) else {
                    return Ok(None);
                };
                match op {
                    BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                        let (Some(x), Some(y)) = (numeric(&a), numeric(&b)) else {
                            return Ok(None);
                        };
                        Some(Val::Num(match op {
                            BinaryOp::Add => x + y,
                            BinaryOp::Sub => x - y,
                            BinaryOp::Mul => x * y,
                            _ if y == 0.0 => return Ok(None),
                            _ => x / y,
                        }))
                    }
                    _ => compare(*op, &a, &b).map(Val::Bool),
                }
            }
            Expression::Not(inner) => self.eval(inner, row)?.as_ref().and_then(ebv).map(|b| Val::Bool(!b)),
            Expression::Negate(inner) => self.eval(inner, row)?.as_ref().and_then(numeric).map(|x| Val::Num(-x)),
            Expression::In {
                operand,
                list,
                negated,
            } => {
                let Some(a) = self.eval(operand, row)? else {
                    return Ok(None);
                };
                let mut found = false;
                for item in list {
                    if let Some(b) = self.eval(item, row)? {
                        found |= compare(BinaryOp::Eq, &a, &b) == Some(true);
                    }
                }
                Some(Val::Bool(found != *negated))
            }
            Expression::Call(name, args) => self.call(name, args, row)?,
            Expression::Aggregate { .. } => return Err(unsupported("aggregates")),
        })
    }

    fn call(&mut self, name: &str, args: &[Expression], row: &Row) -> Result<Option<Val>, ExecError> {
        if name == "BOUND" {
            return match args {
                [Expression::Term(Term::Var(v))] => Ok(Some(Val::Bool(
                    self.var_index.get(v).and_then(|&i| row.get(i).copied().flatten()).is_some(),
                ))),
                _ => Err(ExecError::new(ExecErrorKind::Syntax, "BOUND expects one variable")),
            };
        }
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, row)?);
        }
        let arity = |n: usize| {
            if vals.len() == n {
                Ok(())
            } else {
                Err(ExecError::new(ExecErrorKind::Syntax, format!("{name} expects {n} arguments")))
            }
        };
        let string_of = |v: &Option<Val>| -> Option<String> {
            match v.as_ref()? {
                Val::Node(Node::Literal(l)) => Some(l.lexical.clone()),
                Val::Node(Node::Iri(i)) => Some(i.clone()),
                Val::Num(x) => Some(x.to_string()),
                Val::Bool(b) => Some(b.to_string()),
                Val::Node(Node::Blank(_)) => None,
            }
        };
        let plain = |s: String| Some(Val::Node(Node::Literal(Literal::plain(s))));
        Ok(match name {
            "STR" => {
                arity(1)?;
                string_of(&vals[0]).and_then(plain)
            }
            "LANG" => {
                arity(1)?;
                match &vals[0] {
                    Some(Val::Node(Node::Literal(l))) => plain(l.language.clone().unwrap_or_default()),
                    _ => None,
                }
            }
            "LCASE" | "UCASE" => {
                arity(1)?;
                match &vals[0] {
                    Some(Val::Node(Node::Literal(l))) => {
                        let mut l = l.clone();
                        l.lexical = if name == "LCASE" {
                            l.lexical.to_lowercase()
                        } else {
                            l.lexical.to_uppercase()
                        };
                        Some(Val::Node(Node::Literal(l)))
                    }
                    _ => None,
                }
            }
            "CONTAINS" | "STRSTARTS" | "STRENDS" => {
                arity(2)?;
                let (Some(a), Some(b)) = (string_of(&vals[0]), string_of(&vals[1])) else {
                    return Ok(None);
                };
                Some(Val::Bool(match name {
                    "CONTAINS" => a.contains(&b),
                    "STRSTARTS" => a.starts_with(&b),
                    _ => a.ends_with(&b),
                }))
            }
            "LANGMATCHES" => {
                arity(2)?;
                let (Some(tag), Some(range)) = (string_of(&vals[0]), string_of(&vals[1])) else {
                    return Ok(None);
                };
                let tag = tag.to_ascii_lowercase();
                let range = range.to_ascii_lowercase();
                Some(Val::Bool(if range == "*" {
                    !tag.is_empty()
                } else {
                    tag == range || tag.starts_with(&format!("{range}-"))
                }))
            }
            "ISIRI" | "ISURI" | "ISLITERAL" | "ISBLANK" | "ISNUMERIC" => {
                arity(1)?;
                vals[0].as_ref().map(|v| {
                    Val::Bool(match name {
                        "ISLITERAL" => matches!(v, Val::Node(Node::Literal(_)) | Val::Num(_) | Val::Bool(_)),
                        "ISBLANK" => matches!(v, Val::Node(Node::Blank(_))),
                        "ISNUMERIC" => numeric(v).is_some(),
                        _ => matches!(v, Val::Node(Node::Iri(_))),
                    })
                })
            }
            "SAMETERM" => {
                arity(2)?;
                match (&vals[0], &vals[1]) {
                    (Some(a), Some(b)) => Some(Val::Bool(a == b)),
                    _ => None,
                }
            }
            other => return Err(unsupported(format!("function {other}"))),
        })
    }
}

const NUMERIC_TYPES: &[&str] = &[
    "integer",
    "decimal",
    "double",
    "float",
    "int",
    "long",
    "short",
    "byte",
    "nonNegativeInteger",
    "positiveInteger",
    "negativeInteger",
    "nonPositiveInteger",
    "unsignedInt",
    "unsignedLong",
];

fn numeric(v: &Val) -> Option<f64> {
    match v {
        Val::Num(x) => Some(*x),
        Val::Node(Node::Literal(l)) => {
            let local = l.datatype.as_deref()?.strip_prefix(XSD)?;
            if NUMERIC_TYPES.contains(&local) {
                l.lexical.trim().parse().ok()
            } else {
                None
            }
        }
        _ => None,
    }
}

fn is_string_literal(l: &Literal) -> bool {
    l.language.is_none() && l.datatype.as_deref().is_none_or(|dt| dt == format!("{XSD}string"))
}

fn as_bool(v: &Val) -> Option<bool> {
    match v {
        Val::Bool(b) => Some(*b),
        Val::Node(Node::Literal(l)) if l.datatype.as_deref() == Some(&format!("{XSD}boolean")) => {
            Some(l.lexical == "true" || l.lexical == "1")
        }
        _ => None,
    }
}

/// Effective boolean value; `None` is a type error.
fn ebv(v: &Val) -> Option<bool> {
    if let Some(b) = as_bool(v) {
        return Some(b);
    }
    if let Some(x) = numeric(v) {
        return Some(x != 0.0 && !x.is_nan());
    }
    match v {
        Val::Node(Node::Literal(l)) if is_string_literal(l) || l.language.is_some() => Some(!l.lexical.is_empty()),
        _ => None,
    }
}

fn compare(op: BinaryOp, a: &Val, b: &Val) -> Option<bool> {
    let ord = if let (Some(x), Some(y)) = (numeric(a), numeric(b)) {
        x.partial_cmp(&y)?
    } else if let (Some(x), Some(y)) = (as_bool(a), as_bool(b)) {
        x.cmp(&y)
    } else {
        match (a, b) {
            (Val::Node(Node::Literal(x)), Val::Node(Node::Literal(y)))
                if (is_string_literal(x) && is_string_literal(y))
                    || (x.language.is_some() && x.language == y.language)
                    || (x.datatype.is_some() && x.datatype == y.datatype) =>
            {
                x.lexical.cmp(&y.lexical)
            }
            _ => {
                return match op {
                    BinaryOp::Eq => Some(a == b),
                    BinaryOp::Ne => Some(a != b),
                    _ => None,
                }
            }
        }
    };
    Some(match op {
        BinaryOp::Eq => ord == Ordering::Equal,
        BinaryOp::Ne => ord != Ordering::Equal,
        BinaryOp::Lt => ord == Ordering::Less,
        BinaryOp::Gt => ord == Ordering::Greater,
        BinaryOp::Le => ord != Ordering::Greater,
        BinaryOp::Ge => ord != Ordering::Less,
        _ => unreachable!("not a comparison"),
    })
}

/// ORDER BY ordering: unbound, blank nodes, IRIs, numbers, other literals.
fn order_vals(a: &Option<Val>, b: &Option<Val>) -> Ordering {
    fn rank(v: &Option<Val>) -> u8 {
        match v {
            None => 0,
            Some(Val::Node(Node::Blank(_))) => 1,
            Some(Val::Node(Node::Iri(_))) => 2,
            Some(v) if numeric(v).is_some() => 3,
            Some(_) => 4,
        }
    }
    let (Some(x), Some(y)) = (a, b) else {
        return rank(a).cmp(&rank(b));
    };
    if let (Some(p), Some(q)) = (numeric(x), numeric(y)) {
        return p.total_cmp(&q);
    }
    rank(a).cmp(&rank(b)).then_with(|| match (x, y) {
        (Val::Node(p), Val::Node(q)) => p.cmp(q),
        (Val::Bool(p), Val::Bool(q)) => p.cmp(q),
        _ => Ordering::Equal,
    })
}
