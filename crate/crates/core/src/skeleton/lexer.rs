use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Placeholder(String),
    IriRef(String),
    PName(String, String),
    Var(String),
    Str(String),
    LangTag(String),
    DoubleCaret,
    Integer(String),
    Decimal(String),
    Double(String),
    Blank(String),
    Ident(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

const OPEN_TAG: &str = "<iri>";
const CLOSE_TAG: &str = "</iri>";

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lexer = Lexer { src, pos: 0 };
    let mut out = Vec::new();
    loop {
        lexer.skip_trivia();
        let offset = lexer.pos;
        let tok = lexer.next_token()?;
        let done = tok == Tok::Eof;
        out.push(Token { tok, offset });
        if done {
            return Ok(out);
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn err(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError::new(self.src, offset, message)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn next_token(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok(Tok::Eof);
        };
        let rest = self.rest();
        if rest.starts_with(OPEN_TAG) {
            return self.placeholder();
        }
        if rest.starts_with(CLOSE_TAG) {
            return Err(self.err(start, "closing </iri> without a matching <iri>"));
        }
        match c {
            '<' => {
                if let Some(iri) = self.try_iri_ref() {
                    return Ok(Tok::IriRef(iri));
                }
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    return Ok(Tok::Punct("<="));
                }
                Ok(Tok::Punct("<"))
            }
            '?' | '$' => {
                self.bump();
                let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                if name.is_empty() {
                    return Err(self.err(start, "expected a variable name"));
                }
                Ok(Tok::Var(name.to_string()))
            }
            '"' | '\'' => self.string(),
            '@' => {
                self.bump();
                let tag = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                if tag.is_empty() {
                    return Err(self.err(start, "expected a language tag"));
                }
                Ok(Tok::LangTag(tag.to_string()))
            }
            '^' => {
                if rest.starts_with("^^") {
                    self.pos += 2;
                    Ok(Tok::DoubleCaret)
                } else {
                    Err(self.err(start, "unexpected '^' (property paths are not supported)"))
                }
            }
            '_' if self.peek_at(1) == Some(':') => {
                self.pos += 2;
                let label = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '-');
                if label.is_empty() {
                    return Err(self.err(start, "expected a blank node label"));
                }
                Ok(Tok::Blank(label.to_string()))
            }
            c if c.is_ascii_digit() => Ok(self.number()),
            '.' if self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) => Ok(self.number()),
            ':' => {
                self.bump();
                Ok(Tok::PName(String::new(), self.local_name()))
            }
            c if c.is_alphabetic() => {
                let word = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.');
                // A trailing '.' belongs to the triple separator, not the name.
                let trimmed = word.trim_end_matches('.');
                self.pos = start + trimmed.len();
                if self.peek() == Some(':') {
                    self.bump();
                    return Ok(Tok::PName(trimmed.to_string(), self.local_name()));
                }
                if trimmed.contains('.') || trimmed.contains('-') {
                    let bad = trimmed.find(['.', '-']).unwrap_or(0);
                    self.pos = start + bad;
                    return Ok(Tok::Ident(trimmed[..bad].to_string()));
                }
                Ok(Tok::Ident(trimmed.to_string()))
            }
            _ => self.punct(start),
        }
    }

    fn punct(&mut self, start: usize) -> Result<Tok, ParseError> {
        const TWO: &[&str] = &["!=", ">=", "&&", "||"];
        const ONE: &[&str] = &["{", "}", "(", ")", ".", ";", ",", "*", "=", ">", "!", "+", "-", "/"];
        for p in TWO {
            if self.rest().starts_with(p) {
                self.pos += 2;
                return Ok(Tok::Punct(p));
            }
        }
        for p in ONE {
            if self.rest().starts_with(p) {
                self.pos += 1;
                return Ok(Tok::Punct(p));
            }
        }
        let c = self.peek().unwrap_or(' ');
        if c == '|' {
            return Err(self.err(start, "unexpected '|' (property paths are not supported)"));
        }
        Err(self.err(start, format!("unexpected character {c:?}")))
    }

    fn placeholder(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        self.pos += OPEN_TAG.len();
        let rest = self.rest();
        let Some(end) = rest.find(CLOSE_TAG) else {
            return Err(self.err(start, "unterminated <iri> placeholder"));
        };
        let inner = &rest[..end];
        if let Some(nested) = inner.find(OPEN_TAG) {
            return Err(self.err(self.pos + nested, "nested <iri> inside a placeholder"));
        }
        let label = inner.trim();
        if label.is_empty() {
            return Err(self.err(start, "empty placeholder label"));
        }
        self.pos += end + CLOSE_TAG.len();
        Ok(Tok::Placeholder(label.to_string()))
    }

    fn try_iri_ref(&mut self) -> Option<String> {
        let rest = self.rest();
        let body = &rest[1..];
        for (i, c) in body.char_indices() {
            match c {
                '>' => {
                    if i == 0 {
                        return None;
                    }
                    self.pos += i + 2;
                    return Some(body[..i].to_string());
                }
                c if c.is_whitespace() || "<\"{}|^`\\".contains(c) => return None,
                _ => {}
            }
        }
        None
    }

    fn local_name(&mut self) -> String {
        let start = self.pos;
        let word = self.take_while(|c| c.is_alphanumeric() || "_-.:%".contains(c));
        let trimmed = word.trim_end_matches('.');
        self.pos = start + trimmed.len();
        trimmed.to_string()
    }

    fn number(&mut self) -> Tok {
        let start = self.pos;
        self.take_while(|c| c.is_ascii_digit());
        let mut decimal = false;
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            decimal = true;
            self.bump();
            self.take_while(|c| c.is_ascii_digit());
        }
        let mut double = false;
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.take_while(|c| c.is_ascii_digit()).is_empty() {
                self.pos = save;
            } else {
                double = true;
            }
        }
        let text = self.src[start..self.pos].to_string();
        if double {
            Tok::Double(text)
        } else if decimal {
            Tok::Decimal(text)
        } else {
            Tok::Integer(text)
        }
    }

    fn string(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let quote = self.bump().unwrap_or('"');
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        let long = self.src[start..].starts_with(&triple);
        if long {
            self.pos = start + 3;
        }
        let mut value = String::new();
        loop {
            if long && self.rest().starts_with(&triple) {
                self.pos += 3;
                return Ok(Tok::Str(value));
            }
            let Some(c) = self.bump() else {
                return Err(self.err(start, "unterminated string literal"));
            };
            match c {
                c if c == quote && !long => return Ok(Tok::Str(value)),
                '\n' | '\r' if !long => {
                    return Err(self.err(start, "line break inside a string literal"))
                }
                '\\' => {
                    let esc = self
                        .bump()
                        .ok_or_else(|| self.err(start, "unterminated string literal"))?;
                    value.push(match esc {
                        't' => '\t',
                        'n' => '\n',
                        'r' => '\r',
                        'b' => '\u{8}',
                        'f' => '\u{c}',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        'u' | 'U' => {
                            let len = if esc == 'u' { 4 } else { 8 };
                            let hex = self.rest().get(..len).unwrap_or("");
                            let code = u32::from_str_radix(hex, 16)
                                .ok()
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.err(self.pos, "invalid unicode escape"))?;
                            self.pos += len;
                            code
                        }
                        other => {
                            return Err(self.err(self.pos, format!("invalid escape \\{other}")))
                        }
                    });
                }
                c => value.push(c),
            }
        }
    }
}
