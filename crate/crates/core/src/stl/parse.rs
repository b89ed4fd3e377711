//! Recursive-descent parser for the ASCII formula grammar.
//!
//! ```text
//! formula    := disj
//! disj       := conj ('|' conj)*
//! conj       := unary ('&' unary)*
//! unary      := '!' unary | temporal | '(' formula ')' | 'true' | comparison
//! temporal   := ('G' | 'F') '[' int ',' int ']' '(' formula ')'
//!             | 'U' '[' int ',' int ']' '(' formula ',' formula ')'
//! comparison := expr ('<' | '<=' | '>' | '>=') ['-'] number
//! expr       := term (('+' | '-') term)*
//! term       := ['-'] (number ['*' ident] | ident)
//! ```

use super::{Comparison, Formula, LinearExpr, Predicate, Signature, Window};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Bang,
    Amp,
    Pipe,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Cmp(Comparison),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'!' => Some(Tok::Bang),
            b'&' => Some(Tok::Amp),
            b'|' => Some(Tok::Pipe),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b',' => Some(Tok::Comma),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((start, tok));
            i += 1;
            continue;
        }
        match c {
            _ if c.is_ascii_whitespace() => i += 1,
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let cmp = match (c, eq) {
                    (b'<', false) => Comparison::Lt,
                    (b'<', true) => Comparison::Le,
                    (b'>', false) => Comparison::Gt,
                    _ => Comparison::Ge,
                };
                out.push((start, Tok::Cmp(cmp)));
                i += 1 + eq as usize;
            }
            _ if c.is_ascii_digit() || c == b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| Error::Syntax {
                    position: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                out.push((start, Tok::Number(value)));
            }
            _ if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                return Err(Error::Syntax {
                    position: start,
                    message: format!("unexpected character `{}`", c as char),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    sig: &'a Signature,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.position(),
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Pipe) {
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Amp) {
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.disjunction()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) if name == "true" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::Ident(name))
                if matches!(name.as_str(), "G" | "F" | "U")
                    && self.peek_at(1) == Some(&Tok::LBracket) =>
            {
                let op = name.clone();
                self.pos += 1;
                self.temporal(&op)
            }
            _ => self.comparison(),
        }
    }

    fn temporal(&mut self, op: &str) -> Result<Formula> {
        self.expect(Tok::LBracket, "`[`")?;
        let start = self.step_index()?;
        self.expect(Tok::Comma, "`,`")?;
        let end = self.step_index()?;
        let window_pos = self.position();
        self.expect(Tok::RBracket, "`]`")?;
        let window = Window::new(start, end).map_err(|_| Error::Syntax {
            position: window_pos,
            message: format!("window start {start} exceeds end {end}"),
        })?;
        self.expect(Tok::LParen, "`(`")?;
        let first = self.disjunction()?;
        let formula = if op == "U" {
            self.expect(Tok::Comma, "`,` between until operands")?;
            let second = self.disjunction()?;
            Formula::Until(window, Box::new(first), Box::new(second))
        } else if op == "G" {
            Formula::Globally(window, Box::new(first))
        } else {
            Formula::Finally(window, Box::new(first))
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(formula)
    }

    fn step_index(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Tok::Number(v)) if *v >= 0.0 && v.fract() == 0.0 && *v <= u32::MAX as f64 => {
                let v = *v as usize;
                self.pos += 1;
                Ok(v)
            }
            _ => self.error("expected a non-negative integer step index"),
        }
    }

    fn comparison(&mut self) -> Result<Formula> {
        let expr = self.expr()?;
        let cmp = match self.bump() {
            Some(Tok::Cmp(c)) => c,
            _ => {
                self.pos -= 1;
                return self.error("expected a comparison operator");
            }
        };
        let negative = self.eat(&Tok::Minus);
        let threshold = match self.bump() {
            Some(Tok::Number(v)) => v,
            _ => {
                self.pos -= 1;
                return self.error("expected a numeric threshold");
            }
        };
        let threshold = if negative { -threshold } else { threshold };
        Ok(Formula::Predicate(Predicate::new(expr, cmp, threshold)))
    }

    fn expr(&mut self) -> Result<LinearExpr> {
        let mut expr = LinearExpr {
            terms: Vec::new(),
            constant: 0.0,
        };
        self.term(&mut expr, 1.0)?;
        loop {
            let sign = match self.peek() {
                Some(Tok::Plus) => 1.0,
                Some(Tok::Minus) => -1.0,
                _ => break,
            };
            self.pos += 1;
            self.term(&mut expr, sign)?;
        }
        Ok(expr)
    }

    fn term(&mut self, expr: &mut LinearExpr, sign: f64) -> Result<()> {
        let sign = if self.eat(&Tok::Minus) { -sign } else { sign };
        match self.peek().cloned() {
            Some(Tok::Number(v)) => {
                self.pos += 1;
                if self.eat(&Tok::Star) {
                    let index = self.variable()?;
                    expr.terms.push((index, sign * v));
                } else {
                    expr.constant += sign * v;
                }
                Ok(())
            }
            Some(Tok::Ident(_)) => {
                let index = self.variable()?;
                expr.terms.push((index, sign));
                Ok(())
            }
            _ => self.error("expected a variable or number"),
        }
    }

    fn variable(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let index = self
                    .sig
                    .index_of(name)
                    .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
                self.pos += 1;
                Ok(index)
            }
            _ => self.error("expected a variable name"),
        }
    }
}

/// Parses `text` against the variable names in `signature`.
pub fn parse_formula(text: &str, signature: &Signature) -> Result<Formula> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
        end: text.len(),
        sig: signature,
    };
    let formula = parser.disjunction()?;
    if parser.pos < parser.toks.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(formula)
}
