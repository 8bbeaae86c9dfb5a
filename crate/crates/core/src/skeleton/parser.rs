//! Recursive-descent parser for the supported SPARQL subset.

use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::prefixes::{default_namespace, RDF_TYPE, XSD};
use super::ParseError;

pub(crate) fn parse_query(src: &str) -> Result<Query, ParseError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        src,
        tokens,
        pos: 0,
        prefixes: HashMap::new(),
        base: None,
    };
    parser.query()
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    prefixes: HashMap<String, String>,
    base: Option<String>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_nth(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(self.src, self.offset(), message))
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        let found = describe(self.peek());
        self.error(format!("expected {expected}, found {found}"))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.unexpected(&format!("'{p}'"))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_nth(n), Tok::Ident(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.unexpected(kw)
        }
    }

    fn query(&mut self) -> PResult<Query> {
        self.prologue()?;
        let form = if self.eat_keyword("SELECT") {
            self.select_clause()?
        } else if self.eat_keyword("ASK") {
            QueryForm::Ask
        } else if self.is_keyword("CONSTRUCT") || self.is_keyword("DESCRIBE") {
            return self.error("only SELECT and ASK queries are supported");
        } else {
            return self.unexpected("SELECT or ASK");
        };
        if self.is_keyword("FROM") {
            return self.error("FROM clauses are not supported");
        }
        self.eat_keyword("WHERE");
        let pattern = self.group()?;
        let modifiers = self.modifiers()?;
        let values = if self.eat_keyword("VALUES") {
            Some(self.inline_data()?)
        } else {
            None
        };
        if *self.peek() != Tok::Eof {
            return self.unexpected("end of query");
        }
        Ok(Query {
            form,
            pattern,
            modifiers,
            values,
        })
    }

    fn prologue(&mut self) -> PResult<()> {
        loop {
            if self.eat_keyword("PREFIX") {
                let Tok::PName(prefix, local) = self.advance() else {
                    return self.error("expected a prefix name after PREFIX");
                };
                if !local.is_empty() {
                    return self.error("prefix declaration must end with ':'");
                }
                let Tok::IriRef(ns) = self.advance() else {
                    return self.error("expected <namespace> in PREFIX declaration");
                };
                let ns = self.resolve(ns);
                self.prefixes.insert(prefix, ns);
            } else if self.eat_keyword("BASE") {
                let Tok::IriRef(base) = self.advance() else {
                    return self.error("expected <iri> after BASE");
                };
                self.base = Some(base);
            } else {
                return Ok(());
            }
        }
    }

    fn resolve(&self, iri: String) -> String {
        match &self.base {
            Some(base) if !iri.contains(':') => format!("{base}{iri}"),
            _ => iri,
        }
    }

    fn expand(&self, prefix: &str, local: &str) -> PResult<String> {
        let ns = self
            .prefixes
            .get(prefix)
            .map(String::as_str)
            .or_else(|| default_namespace(prefix));
        match ns {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => self.error(format!("undeclared prefix '{prefix}:'")),
        }
    }

    fn select_clause(&mut self) -> PResult<QueryForm> {
        let modifier = if self.eat_keyword("DISTINCT") {
            SelectModifier::Distinct
        } else if self.eat_keyword("REDUCED") {
            SelectModifier::Reduced
        } else {
            SelectModifier::Plain
        };
        if self.eat_punct("*") {
            return Ok(QueryForm::Select {
                modifier,
                projection: Projection::All,
            });
        }
        let mut items = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Var(v) => {
                    self.advance();
                    items.push(SelectItem::Var(v));
                }
                Tok::Punct("(") => {
                    self.advance();
                    let expr = self.expression()?;
                    self.expect_keyword("AS")?;
                    let Tok::Var(v) = self.advance() else {
                        return self.error("expected a variable after AS");
                    };
                    self.expect_punct(")")?;
                    items.push(SelectItem::Expr(expr, v));
                }
                _ => break,
            }
        }
        if items.is_empty() {
            return self.unexpected("a projection");
        }
        Ok(QueryForm::Select {
            modifier,
            projection: Projection::Items(items),
        })
    }

    fn group(&mut self) -> PResult<GroupPattern> {
        self.expect_punct("{")?;
        if self.is_keyword("SELECT") {
            return self.error("subqueries are not supported");
        }
        let mut elements = Vec::new();
        loop {
            if self.eat_punct("}") {
                return Ok(GroupPattern { elements });
            }
            if self.eat_punct(".") {
                continue;
            }
            if self.eat_keyword("OPTIONAL") {
                elements.push(PatternElement::Optional(self.group()?));
            } else if self.is_punct("{") {
                let first = self.group()?;
                if self.is_keyword("UNION") {
                    let mut branches = vec![first];
                    while self.eat_keyword("UNION") {
                        branches.push(self.group()?);
                    }
                    elements.push(PatternElement::Union(branches));
                } else {
                    elements.push(PatternElement::Group(first));
                }
            } else if self.eat_keyword("FILTER") {
                elements.push(PatternElement::Filter(self.constraint()?));
            } else if self.eat_keyword("VALUES") {
                elements.push(PatternElement::Values(self.inline_data()?));
            } else if let Some(kw) = ["MINUS", "BIND", "SERVICE", "GRAPH"]
                .into_iter()
                .find(|kw| self.is_keyword(kw))
            {
                return self.error(format!("{kw} is not supported"));
            } else if *self.peek() == Tok::Eof {
                return self.unexpected("'}'");
            } else {
                self.triples_same_subject(&mut elements)?;
                if !(self.is_punct(".")
                    || self.is_punct("}")
                    || self.is_punct("{")
                    || self.is_keyword("OPTIONAL")
                    || self.is_keyword("FILTER")
                    || self.is_keyword("VALUES"))
                {
                    return self.unexpected("'.' or '}'");
                }
            }
        }
    }

    fn triples_same_subject(&mut self, out: &mut Vec<PatternElement>) -> PResult<()> {
        let subject = self.graph_term("a subject")?;
        loop {
            let predicate = self.verb()?;
            loop {
                let object = self.graph_term("an object")?;
                out.push(PatternElement::Triple(TriplePattern::new(
                    subject.clone(),
                    predicate.clone(),
                    object,
                )));
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                return Ok(());
            }
            while self.eat_punct(";") {}
            if self.is_punct(".") || self.is_punct("}") {
                return Ok(());
            }
        }
    }

    fn verb(&mut self) -> PResult<Term> {
        let term = match self.peek().clone() {
            Tok::Ident(w) if w == "a" => {
                self.advance();
                Term::Iri(RDF_TYPE.to_string())
            }
            Tok::Var(v) => {
                self.advance();
                Term::Var(v)
            }
            Tok::IriRef(_) | Tok::PName(..) | Tok::Placeholder(_) => self.graph_term("a predicate")?,
            _ => return self.unexpected("a predicate"),
        };
        if self.is_punct("/") || self.is_punct("*") || self.is_punct("+") {
            return self.error("property paths are not supported");
        }
        Ok(term)
    }

    fn graph_term(&mut self, what: &str) -> PResult<Term> {
        if self.is_punct("[") || self.is_punct("(") {
            return self.error("blank node property lists and collections are not supported");
        }
        if self.is_punct("-") || self.is_punct("+") {
            if let Tok::Integer(_) | Tok::Decimal(_) | Tok::Double(_) = self.peek_nth(1) {
                let sign = if self.is_punct("-") { "-" } else { "" };
                self.advance();
                let Some(Term::Literal(mut lit)) = self.atom()? else {
                    unreachable!("numeric token yields a literal");
                };
                lit.lexical = format!("{sign}{}", lit.lexical);
                return Ok(Term::Literal(lit));
            }
        }
        match self.atom()? {
            Some(term) => Ok(term),
            None => self.unexpected(what),
        }
    }

    /// Parses a single RDF term or variable if one starts here.
    fn atom(&mut self) -> PResult<Option<Term>> {
        let term = match self.peek().clone() {
            Tok::Var(v) => Term::Var(v),
            Tok::IriRef(iri) => Term::Iri(self.resolve(iri)),
            Tok::PName(prefix, local) => Term::Iri(self.expand(&prefix, &local)?),
            Tok::Placeholder(label) => Term::Placeholder(Slot { id: 0, label }),
            Tok::Blank(b) => Term::Blank(b),
            Tok::Integer(n) => Term::Literal(Literal::typed(n, format!("{XSD}integer"))),
            Tok::Decimal(n) => Term::Literal(Literal::typed(n, format!("{XSD}decimal"))),
            Tok::Double(n) => Term::Literal(Literal::typed(n, format!("{XSD}double"))),
            Tok::Ident(w) if w == "true" || w == "false" => {
                Term::Literal(Literal::typed(w, format!("{XSD}boolean")))
            }
            Tok::Str(s) => {
                self.advance();
                let mut lit = Literal::plain(s);
                match self.peek().clone() {
                    Tok::LangTag(tag) => {
                        self.advance();
                        lit.language = Some(tag.to_ascii_lowercase());
                    }
                    Tok::DoubleCaret => {
                        self.advance();
                        lit.datatype = Some(match self.advance() {
                            Tok::IriRef(iri) => self.resolve(iri),
                            Tok::PName(p, l) => self.expand(&p, &l)?,
                            _ => return self.error("expected a datatype IRI after ^^"),
                        });
                    }
                    _ => {}
                }
                return Ok(Some(Term::Literal(lit)));
            }
            _ => return Ok(None),
        };
        self.advance();
        Ok(Some(term))
    }

    fn constraint(&mut self) -> PResult<Expression> {
        if self.is_keyword("NOT") || self.is_keyword("EXISTS") {
            return self.error("EXISTS / NOT EXISTS are not supported");
        }
        if self.is_punct("(") {
            self.advance();
            let e = self.expression()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        if let Tok::Ident(_) = self.peek() {
            return self.call();
        }
        self.unexpected("'(' or a function call")
    }

    fn inline_data(&mut self) -> PResult<InlineData> {
        let mut variables = Vec::new();
        let single = if let Tok::Var(v) = self.peek().clone() {
            self.advance();
            variables.push(v);
            true
        } else {
            self.expect_punct("(")?;
            while let Tok::Var(v) = self.peek().clone() {
                self.advance();
                variables.push(v);
            }
            self.expect_punct(")")?;
            false
        };
        self.expect_punct("{")?;
        let mut rows = Vec::new();
        while !self.eat_punct("}") {
            if single {
                rows.push(vec![self.data_value()?]);
            } else {
                self.expect_punct("(")?;
                let mut row = Vec::new();
                while !self.eat_punct(")") {
                    row.push(self.data_value()?);
                }
                if row.len() != variables.len() {
                    return self.error(format!(
                        "VALUES row has {} values for {} variables",
                        row.len(),
                        variables.len()
                    ));
                }
                rows.push(row);
            }
        }
        Ok(InlineData { variables, rows })
    }

    fn data_value(&mut self) -> PResult<Option<Term>> {
        if self.eat_keyword("UNDEF") {
            return Ok(None);
        }
        if let Tok::Var(_) = self.peek() {
            return self.unexpected("a constant in VALUES");
        }
        self.graph_term("a VALUES entry").map(Some)
    }

    fn modifiers(&mut self) -> PResult<Modifiers> {
        let mut m = Modifiers::default();
        if self.is_keyword("GROUP") && self.keyword_at(1, "BY") {
            self.advance();
            self.advance();
            loop {
                match self.peek().clone() {
                    Tok::Var(v) => {
                        self.advance();
                        m.group_by.push(Expression::Term(Term::Var(v)));
                    }
                    Tok::Punct("(") => {
                        self.advance();
                        let e = self.expression()?;
                        if self.is_keyword("AS") {
                            return self.error("GROUP BY (expr AS ?var) is not supported");
                        }
                        self.expect_punct(")")?;
                        m.group_by.push(e);
                    }
                    Tok::Ident(_) if !self.is_clause_keyword() => m.group_by.push(self.call()?),
                    _ => break,
                }
            }
            if m.group_by.is_empty() {
                return self.unexpected("a GROUP BY condition");
            }
        }
        if self.eat_keyword("HAVING") {
            while self.is_punct("(") || matches!(self.peek(), Tok::Ident(_)) && !self.is_clause_keyword() {
                m.having.push(self.constraint()?);
            }
            if m.having.is_empty() {
                return self.unexpected("a HAVING condition");
            }
        }
        if self.is_keyword("ORDER") && self.keyword_at(1, "BY") {
            self.advance();
            self.advance();
            loop {
                if self.is_keyword("ASC") || self.is_keyword("DESC") {
                    let descending = self.is_keyword("DESC");
                    self.advance();
                    self.expect_punct("(")?;
                    let expression = self.expression()?;
                    self.expect_punct(")")?;
                    m.order_by.push(OrderCondition {
                        descending,
                        expression,
                    });
                } else if let Tok::Var(v) = self.peek().clone() {
                    self.advance();
                    m.order_by.push(OrderCondition {
                        descending: false,
                        expression: Expression::Term(Term::Var(v)),
                    });
                } else if self.is_punct("(") {
                    let expression = self.constraint()?;
                    m.order_by.push(OrderCondition {
                        descending: false,
                        expression,
                    });
                } else if matches!(self.peek(), Tok::Ident(_)) && !self.is_clause_keyword() {
                    let expression = self.call()?;
                    m.order_by.push(OrderCondition {
                        descending: false,
                        expression,
                    });
                } else {
                    break;
                }
            }
            if m.order_by.is_empty() {
                return self.unexpected("an ORDER BY condition");
            }
        }
        for _ in 0..2 {
            if self.eat_keyword("LIMIT") {
                if m.limit.is_some() {
                    return self.error("duplicate LIMIT");
                }
                m.limit = Some(self.integer()?);
            } else if self.eat_keyword("OFFSET") {
                if m.offset.is_some() {
                    return self.error("duplicate OFFSET");
                }
                m.offset = Some(self.integer()?);
            }
        }
        Ok(m)
    }

    fn is_clause_keyword(&self) -> bool {
        ["LIMIT", "OFFSET", "ORDER", "HAVING", "VALUES", "GROUP"]
            .iter()
            .any(|kw| self.is_keyword(kw))
    }

    fn integer(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Integer(n) => {
                let value = n.parse().or_else(|_| self.error("integer out of range"))?;
                self.advance();
                Ok(value)
            }
            _ => self.unexpected("an integer"),
        }
    }

    fn expression(&mut self) -> PResult<Expression> {
        let mut lhs = self.and_expr()?;
        while self.eat_punct("||") {
            let rhs = self.and_expr()?;
            lhs = Expression::Binary(BinaryOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expression> {
        let mut lhs = self.relational()?;
        while self.eat_punct("&&") {
            let rhs = self.relational()?;
            lhs = Expression::Binary(BinaryOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn relational(&mut self) -> PResult<Expression> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Punct("=") => BinaryOp::Eq,
            Tok::Punct("!=") => BinaryOp::Ne,
            Tok::Punct("<") => BinaryOp::Lt,
            Tok::Punct(">") => BinaryOp::Gt,
            Tok::Punct("<=") => BinaryOp::Le,
            Tok::Punct(">=") => BinaryOp::Ge,
            _ => {
                let negated = self.is_keyword("NOT") && self.keyword_at(1, "IN");
                if negated || self.is_keyword("IN") {
                    if negated {
                        self.advance();
                    }
                    self.advance();
                    self.expect_punct("(")?;
                    let mut list = Vec::new();
                    if !self.eat_punct(")") {
                        loop {
                            list.push(self.expression()?);
                            if self.eat_punct(")") {
                                break;
                            }
                            self.expect_punct(",")?;
                        }
                    }
                    return Ok(Expression::In {
                        operand: Box::new(lhs),
                        list,
                        negated,
                    });
                }
                return Ok(lhs);
            }
        };
        self.advance();
        let rhs = self.additive()?;
        Ok(Expression::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> PResult<Expression> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => BinaryOp::Add,
                Tok::Punct("-") => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> PResult<Expression> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => BinaryOp::Mul,
                Tok::Punct("/") => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expression> {
        if self.eat_punct("!") {
            return Ok(Expression::Not(Box::new(self.unary()?)));
        }
        if self.eat_punct("-") {
            return Ok(Expression::Negate(Box::new(self.unary()?)));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expression> {
        if self.eat_punct("(") {
            let e = self.expression()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        if let Tok::Ident(w) = self.peek() {
            if w != "true" && w != "false" {
                return self.call();
            }
        }
        match self.atom()? {
            Some(term) => Ok(Expression::Term(term)),
            None => self.unexpected("an expression"),
        }
    }

    fn call(&mut self) -> PResult<Expression> {
        let Tok::Ident(name) = self.advance() else {
            return self.unexpected("a function name");
        };
        let upper = name.to_ascii_uppercase();
        if upper == "EXISTS" || upper == "NOT" {
            return self.error("EXISTS / NOT EXISTS are not supported");
        }
        if upper == "GROUP_CONCAT" {
            return self.error("GROUP_CONCAT is not supported");
        }
        self.expect_punct("(")?;
        if let Some(function) = Aggregate::from_keyword(&upper) {
            let distinct = self.eat_keyword("DISTINCT");
            let argument = if self.eat_punct("*") {
                if function != Aggregate::Count {
                    return self.error(format!("{upper}(*) is not allowed"));
                }
                None
            } else {
                Some(Box::new(self.expression()?))
            };
            self.expect_punct(")")?;
            return Ok(Expression::Aggregate {
                function,
                distinct,
                argument,
            });
        }
        let mut args = Vec::new();
        if !self.eat_punct(")") {
            loop {
                args.push(self.expression()?);
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        Ok(Expression::Call(upper, args))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Eof => "end of input".into(),
        Tok::Placeholder(l) => format!("placeholder <iri>{l}</iri>"),
        Tok::IriRef(i) => format!("<{i}>"),
        Tok::PName(p, l) => format!("{p}:{l}"),
        Tok::Var(v) => format!("?{v}"),
        Tok::Str(s) => format!("{s:?}"),
        Tok::LangTag(t) => format!("@{t}"),
        Tok::DoubleCaret => "'^^'".into(),
        Tok::Integer(n) | Tok::Decimal(n) | Tok::Double(n) => n.clone(),
        Tok::Blank(b) => format!("_:{b}"),
        Tok::Ident(w) => format!("'{w}'"),
        Tok::Punct(p) => format!("'{p}'"),
    }
}
