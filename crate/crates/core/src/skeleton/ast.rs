//! Query tree for the supported SPARQL subset.
//!
//! IRIs are always stored expanded (no angle brackets, no prefix). Placeholders
//! carry the ordinal they were assigned at parse time; ordinals survive
//! substitution so the remaining slots keep their identity.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub lexical: String,
    pub datatype: Option<String>,
    pub language: Option<String>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Self {
            lexical: lexical.into(),
            datatype: None,
            language: None,
        }
    }

    pub fn typed(lexical: impl Into<String>, datatype: impl Into<String>) -> Self {
        Self {
            lexical: lexical.into(),
            datatype: Some(datatype.into()),
            language: None,
        }
    }
}

/// A natural-language slot awaiting an IRI.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Slot {
    pub id: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Iri(String),
    Literal(Literal),
    Blank(String),
    Placeholder(Slot),
}

impl Term {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_placeholder(&self) -> bool {
        matches!(self, Term::Placeholder(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Self {
            subject,
            predicate,
            object,
        }
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn terms_mut(&mut self) -> [&mut Term; 3] {
        [&mut self.subject, &mut self.predicate, &mut self.object]
    }

    pub fn has_placeholder(&self) -> bool {
        self.terms().iter().any(|t| t.is_placeholder())
    }

    /// Variables and blank nodes, both of which join like variables.
    pub fn join_keys(&self) -> impl Iterator<Item = String> + '_ {
        self.terms().into_iter().filter_map(|t| match t {
            Term::Var(v) => Some(format!("?{v}")),
            Term::Blank(b) => Some(format!("_:{b}")),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Gt
            | BinaryOp::Le
            | BinaryOp::Ge => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Count,
    Sum,
    Avg,
    Min,
    Max,
    Sample,
}

impl Aggregate {
    pub fn keyword(self) -> &'static str {
        match self {
            Aggregate::Count => "COUNT",
            Aggregate::Sum => "SUM",
            Aggregate::Avg => "AVG",
            Aggregate::Min => "MIN",
            Aggregate::Max => "MAX",
            Aggregate::Sample => "SAMPLE",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word.to_ascii_uppercase().as_str() {
            "COUNT" => Aggregate::Count,
            "SUM" => Aggregate::Sum,
            "AVG" => Aggregate::Avg,
            "MIN" => Aggregate::Min,
            "MAX" => Aggregate::Max,
            "SAMPLE" => Aggregate::Sample,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expression {
    Term(Term),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
    Not(Box<Expression>),
    Negate(Box<Expression>),
    In {
        operand: Box<Expression>,
        list: Vec<Expression>,
        negated: bool,
    },
    /// Built-in call; the name is stored upper-cased.
    Call(String, Vec<Expression>),
    Aggregate {
        function: Aggregate,
        distinct: bool,
        /// `None` only for `COUNT(*)`.
        argument: Option<Box<Expression>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InlineData {
    pub variables: Vec<String>,
    /// `None` cells are `UNDEF`.
    pub rows: Vec<Vec<Option<Term>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GroupPattern {
    pub elements: Vec<PatternElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternElement {
    Triple(TriplePattern),
    Optional(GroupPattern),
    Union(Vec<GroupPattern>),
    Group(GroupPattern),
    Filter(Expression),
    Values(InlineData),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectModifier {
    Plain,
    Distinct,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SelectItem {
    Var(String),
    Expr(Expression, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Projection {
    All,
    Items(Vec<SelectItem>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryForm {
    Select {
        modifier: SelectModifier,
        projection: Projection,
    },
    Ask,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderCondition {
    pub descending: bool,
    pub expression: Expression,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Modifiers {
    pub group_by: Vec<Expression>,
    pub having: Vec<Expression>,
    pub order_by: Vec<OrderCondition>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

impl Modifiers {
    pub fn is_empty(&self) -> bool {
        self == &Modifiers::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub form: QueryForm,
    pub pattern: GroupPattern,
    pub modifiers: Modifiers,
    pub values: Option<InlineData>,
}

impl Query {
    pub fn is_ask(&self) -> bool {
        matches!(self.form, QueryForm::Ask)
    }
}

/// Where a term sits, as seen by the visitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermRole {
    Subject,
    Predicate,
    Object,
    /// Inside an expression (FILTER, projection, HAVING, ORDER BY, ...).
    Expression,
    /// A VALUES cell.
    Data,
}

/// Context handed to [`Query::visit_terms_mut`] for each term.
#[derive(Debug, Clone, Copy)]
pub struct TermSite {
    pub role: TermRole,
    /// Number of enclosing UNION branches.
    pub union_depth: usize,
    /// Number of enclosing OPTIONAL blocks.
    pub optional_depth: usize,
}

impl Query {
    /// Visits every term in serialization order.
    pub fn visit_terms_mut(&mut self, f: &mut dyn FnMut(&mut Term, TermSite)) {
        let top = TermSite {
            role: TermRole::Expression,
            union_depth: 0,
            optional_depth: 0,
        };
        if let QueryForm::Select {
            projection: Projection::Items(items),
            ..
        } = &mut self.form
        {
            for item in items {
                if let SelectItem::Expr(e, _) = item {
                    visit_expr(e, top, f);
                }
            }
        }
        visit_group(&mut self.pattern, top, f);
        for e in &mut self.modifiers.group_by {
            visit_expr(e, top, f);
        }
        for e in &mut self.modifiers.having {
            visit_expr(e, top, f);
        }
        for c in &mut self.modifiers.order_by {
            visit_expr(&mut c.expression, top, f);
        }
        if let Some(values) = &mut self.values {
            visit_data(values, top, f);
        }
    }

    pub fn visit_terms(&self, f: &mut dyn FnMut(&Term, TermSite)) {
        // The mutable walk is the single source of ordering; clone to reuse it.
        let mut copy = self.clone();
        copy.visit_terms_mut(&mut |t, site| f(t, site));
    }
}

fn visit_group(group: &mut GroupPattern, site: TermSite, f: &mut dyn FnMut(&mut Term, TermSite)) {
    for element in &mut group.elements {
        match element {
            PatternElement::Triple(t) => {
                f(&mut t.subject, TermSite { role: TermRole::Subject, ..site });
                f(&mut t.predicate, TermSite { role: TermRole::Predicate, ..site });
                f(&mut t.object, TermSite { role: TermRole::Object, ..site });
            }
            PatternElement::Optional(g) => visit_group(
                g,
                TermSite {
                    optional_depth: site.optional_depth + 1,
                    ..site
                },
                f,
            ),
            PatternElement::Union(branches) => {
                for g in branches {
                    visit_group(
                        g,
                        TermSite {
                            union_depth: site.union_depth + 1,
                            ..site
                        },
                        f,
                    )
                }
            }
            PatternElement::Group(g) => visit_group(g, site, f),
            PatternElement::Filter(e) => visit_expr(e, site, f),
            PatternElement::Values(d) => visit_data(d, site, f),
        }
    }
}

fn visit_expr(expr: &mut Expression, site: TermSite, f: &mut dyn FnMut(&mut Term, TermSite)) {
    let site = TermSite {
        role: TermRole::Expression,
        ..site
    };
    match expr {
        Expression::Term(t) => f(t, site),
        Expression::Binary(_, l, r) => {
            visit_expr(l, site, f);
            visit_expr(r, site, f);
        }
        Expression::Not(e) | Expression::Negate(e) => visit_expr(e, site, f),
        Expression::In { operand, list, .. } => {
            visit_expr(operand, site, f);
            for e in list {
                visit_expr(e, site, f);
            }
        }
        Expression::Call(_, args) => {
            for e in args {
                visit_expr(e, site, f);
            }
        }
        Expression::Aggregate { argument, .. } => {
            if let Some(e) = argument {
                visit_expr(e, site, f);
            }
        }
    }
}

fn visit_data(data: &mut InlineData, site: TermSite, f: &mut dyn FnMut(&mut Term, TermSite)) {
    let site = TermSite {
        role: TermRole::Data,
        ..site
    };
    for row in &mut data.rows {
        for t in row.iter_mut().flatten() {
            f(t, site);
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}
