//! Canonical text form: single spaces, upper-case keywords, one triple per
//! ` . ` separator, default prefixes only.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::ast::*;
use super::prefixes::{compact, render_iri, DEFAULT_PREFIXES, XSD};

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Style {
    /// Slot to wrap in `<mark>…</mark>`.
    pub highlight: Option<usize>,
}

pub(crate) fn write_query(q: &Query, style: Style) -> String {
    let mut w = Writer { out: String::new(), style };
    w.query(q);
    w.out
}

/// PREFIX declarations for every default prefix the canonical body uses.
pub(crate) fn prologue(q: &Query) -> String {
    let mut used = BTreeSet::new();
    let mut note = |iri: &str| {
        if let Some((prefix, _)) = compact(iri) {
            used.insert(prefix);
        }
    };
    q.visit_terms(&mut |t, _| match t {
        Term::Iri(iri) => note(iri),
        Term::Literal(Literal {
            datatype: Some(dt), ..
        }) if !is_bare_numeric(t) => note(dt),
        _ => {}
    });
    let mut out = String::new();
    for (prefix, ns) in DEFAULT_PREFIXES {
        if used.contains(prefix) {
            let _ = writeln!(out, "PREFIX {prefix}: <{ns}>");
        }
    }
    out
}

struct Writer {
    out: String,
    style: Style,
}

fn is_bare_numeric(t: &Term) -> bool {
    let Term::Literal(lit) = t else { return false };
    bare_form(lit).is_some()
}

/// Literals that can be written without quotes and re-read identically.
fn bare_form(lit: &Literal) -> Option<&str> {
    let dt = lit.datatype.as_deref()?.strip_prefix(XSD)?;
    let s = lit.lexical.as_str();
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    let ok = match dt {
        "integer" => digits(s),
        "decimal" => s
            .split_once('.')
            .is_some_and(|(a, b)| (a.is_empty() || digits(a)) && digits(b)),
        "double" => s.split_once(['e', 'E']).is_some_and(|(mantissa, exp)| {
            let exp = exp.strip_prefix(['+', '-']).unwrap_or(exp);
            let mantissa_ok = match mantissa.split_once('.') {
                Some((a, b)) => (a.is_empty() || digits(a)) && digits(b),
                None => digits(mantissa),
            };
            mantissa_ok && digits(exp)
        }),
        "boolean" => s == "true" || s == "false",
        _ => false,
    };
    ok.then_some(s)
}

pub fn render_literal(lit: &Literal) -> String {
    if let Some(bare) = bare_form(lit) {
        return bare.to_string();
    }
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
        out.push_str("^^");
        out.push_str(&render_iri(dt));
    }
    out
}

impl Writer {
    fn push(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn query(&mut self, q: &Query) {
        match &q.form {
            QueryForm::Select {
                modifier,
                projection,
            } => {
                self.push("SELECT ");
                match modifier {
                    SelectModifier::Plain => {}
                    SelectModifier::Distinct => self.push("DISTINCT "),
                    SelectModifier::Reduced => self.push("REDUCED "),
                }
                match projection {
                    Projection::All => self.push("*"),
                    Projection::Items(items) => {
                        for (i, item) in items.iter().enumerate() {
                            if i > 0 {
                                self.push(" ");
                            }
                            match item {
                                SelectItem::Var(v) => self.var(v),
                                SelectItem::Expr(e, v) => {
                                    self.push("(");
                                    self.expr(e, 0);
                                    self.push(" AS ");
                                    self.var(v);
                                    self.push(")");
                                }
                            }
                        }
                    }
                }
                self.push(" WHERE ");
            }
            QueryForm::Ask => self.push("ASK WHERE "),
        }
        self.group(&q.pattern);
        let m = &q.modifiers;
        if !m.group_by.is_empty() {
            self.push(" GROUP BY");
            for e in &m.group_by {
                self.push(" ");
                match e {
                    Expression::Term(Term::Var(v)) => self.var(v),
                    e => {
                        self.push("(");
                        self.expr(e, 0);
                        self.push(")");
                    }
                }
            }
        }
        if !m.having.is_empty() {
            self.push(" HAVING");
            for e in &m.having {
                self.push(" (");
                self.expr(e, 0);
                self.push(")");
            }
        }
        if !m.order_by.is_empty() {
            self.push(" ORDER BY");
            for c in &m.order_by {
                self.push(if c.descending { " DESC(" } else { " ASC(" });
                self.expr(&c.expression, 0);
                self.push(")");
            }
        }
        if let Some(n) = m.limit {
            let _ = write!(self.out, " LIMIT {n}");
        }
        if let Some(n) = m.offset {
            let _ = write!(self.out, " OFFSET {n}");
        }
        if let Some(values) = &q.values {
            self.push(" ");
            self.values(values);
        }
    }

    fn var(&mut self, v: &str) {
        self.push("?");
        self.push(v);
    }

    fn group(&mut self, g: &GroupPattern) {
        if g.elements.is_empty() {
            self.push("{ }");
            return;
        }
        self.push("{ ");
        for (i, element) in g.elements.iter().enumerate() {
            if i > 0 {
                self.push(" . ");
            }
            match element {
                PatternElement::Triple(t) => {
                    self.term(&t.subject);
                    self.push(" ");
                    self.term(&t.predicate);
                    self.push(" ");
                    self.term(&t.object);
                }
                PatternElement::Optional(g) => {
                    self.push("OPTIONAL ");
                    self.group(g);
                }
                PatternElement::Union(branches) => {
                    for (j, b) in branches.iter().enumerate() {
                        if j > 0 {
                            self.push(" UNION ");
                        }
                        self.group(b);
                    }
                }
                PatternElement::Group(g) => self.group(g),
                PatternElement::Filter(e) => {
                    self.push("FILTER(");
                    self.expr(e, 0);
                    self.push(")");
                }
                PatternElement::Values(d) => self.values(d),
            }
        }
        self.push(" }");
    }

    fn values(&mut self, d: &InlineData) {
        self.push("VALUES ");
        let single = d.variables.len() == 1;
        if single {
            self.var(&d.variables[0]);
        } else {
            self.push("(");
            for (i, v) in d.variables.iter().enumerate() {
                if i > 0 {
                    self.push(" ");
                }
                self.var(v);
            }
            self.push(")");
        }
        self.push(" {");
        for row in &d.rows {
            self.push(" ");
            if !single {
                self.push("(");
            }
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    self.push(" ");
                }
                match cell {
                    Some(t) => self.term(t),
                    None => self.push("UNDEF"),
                }
            }
            if !single {
                self.push(")");
            }
        }
        self.push(" }");
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::Var(v) => self.var(v),
            Term::Iri(iri) => {
                let s = render_iri(iri);
                self.push(&s);
            }
            Term::Literal(lit) => {
                let s = render_literal(lit);
                self.push(&s);
            }
            Term::Blank(b) => {
                self.push("_:");
                self.push(b);
            }
            Term::Placeholder(slot) => {
                let marked = self.style.highlight == Some(slot.id);
                if marked {
                    self.push("<mark>");
                }
                self.push("<iri>");
                self.push(&slot.label);
                self.push("</iri>");
                if marked {
                    self.push("</mark>");
                }
            }
        }
    }

    /// Writes `e`, parenthesizing when it binds looser than `min_prec`.
    fn expr(&mut self, e: &Expression, min_prec: u8) {
        const UNARY: u8 = 6;
        const IN: u8 = 3;
        match e {
            Expression::Term(t) => self.term(t),
            Expression::Binary(op, l, r) => {
                let p = op.precedence();
                let paren = p < min_prec;
                if paren {
                    self.push("(");
                }
                self.expr(l, p);
                self.push(" ");
                self.push(op.symbol());
                self.push(" ");
                self.expr(r, p + 1);
                if paren {
                    self.push(")");
                }
            }
            Expression::Not(inner) => {
                self.push("!");
                self.expr(inner, UNARY);
            }
            Expression::Negate(inner) => {
                self.push("-");
                self.expr(inner, UNARY);
            }
            Expression::In {
                operand,
                list,
                negated,
            } => {
                let paren = IN < min_prec;
                if paren {
                    self.push("(");
                }
                self.expr(operand, IN + 1);
                self.push(if *negated { " NOT IN (" } else { " IN (" });
                for (i, item) in list.iter().enumerate() {
                    if i > 0 {
                        self.push(", ");
                    }
                    self.expr(item, 0);
                }
                self.push(")");
                if paren {
                    self.push(")");
                }
            }
            Expression::Call(name, args) => {
                self.push(name);
                self.push("(");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.push(", ");
                    }
                    self.expr(a, 0);
                }
                self.push(")");
            }
            Expression::Aggregate {
                function,
                distinct,
                argument,
            } => {
                self.push(function.keyword());
                self.push("(");
                if *distinct {
                    self.push("DISTINCT ");
                }
                match argument {
                    Some(a) => self.expr(a, 0),
                    None => self.push("*"),
                }
                self.push(")");
            }
        }
    }
}
