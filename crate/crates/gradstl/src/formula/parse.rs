//! Hand-rolled recursive-descent parser for the constraint grammar.
//!
//! ```text
//! formula := or
//! or      := and ('|' and)*
//! and     := until ('&' until)*
//! until   := unary ('U' window unary)*        (left-associative)
//! unary   := '!' unary | 'G' window unary | 'F' window unary | primary
//! primary := '(' formula ')' | '{' expr '>' number '}'
//! window  := '[' number ',' number ']'
//!
//! expr    := sum
//! sum     := term (('+' | '-') term)*
//! term    := eunary (('*' | '/') eunary)*
//! eunary  := '-' eunary | power
//! power   := eprimary ('^' integer)*
//! eprimary:= number | identifier | 'sqrt' '(' expr ')' | '(' expr ')'
//! ```
//!
//! `G`, `F`, and `U` act as operators only at the formula level; inside
//! braces every identifier except `sqrt` refers to a state variable.
//! A `-` directly in front of a numeric literal folds into a signed
//! constant; in front of anything else it builds a negation node.

use thiserror::Error;

use crate::expr::Expr;
use crate::formula::{derived_or, Formula, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown variable `{name}` at offset {pos}")]
    UnknownVariable { pos: usize, name: String },
    #[error("invalid interval [{lo},{hi}] at offset {pos}: bounds must satisfy 0 <= lo <= hi")]
    InvalidInterval { pos: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Bang,
    Amp,
    Pipe,
    Gt,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Number { value: f64, text: String },
    Ident(String),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number { text, .. } => format!("number `{text}`"),
            Tok::Ident(name) => format!("`{name}`"),
            Tok::Eof => "end of input".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '!' => Tok::Bang,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '>' => Tok::Gt,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            _ if c.is_ascii_digit() => {
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    pos: start,
                    message: format!("`{text}` is not a number"),
                })?;
                toks.push((
                    start,
                    Tok::Number {
                        value,
                        text: text.to_string(),
                    },
                ));
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        toks.push((start, tok));
        i += 1;
    }
    toks.push((src.len(), Tok::Eof));
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    names: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                pos: self.pos(),
                message: format!("expected {}, found {}", want.describe(), self.peek().describe()),
            })
        }
    }

    fn peek_is_operator(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Ident(name) if name == op)
    }

    // formula := or
    fn or_level(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.and_level()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            acc = derived_or(acc, self.and_level()?);
        }
        Ok(acc)
    }

    fn and_level(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.until_level()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            acc = Formula::and(acc, self.until_level()?);
        }
        Ok(acc)
    }

    fn until_level(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.unary()?;
        while self.peek_is_operator("U") {
            self.bump();
            let window = self.window()?;
            let rhs = self.unary()?;
            acc = Formula::Until {
                window,
                lhs: Box::new(acc),
                rhs: Box::new(rhs),
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.peek_is_operator("G") {
            self.bump();
            let window = self.window()?;
            return Ok(Formula::Always {
                window,
                body: Box::new(self.unary()?),
            });
        }
        if self.peek_is_operator("F") {
            self.bump();
            let window = self.window()?;
            return Ok(Formula::Eventually {
                window,
                body: Box::new(self.unary()?),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::LParen => {
                self.bump();
                let f = self.or_level()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::LBrace => {
                self.bump();
                let f = self.expr_sum()?;
                self.expect(Tok::Gt)?;
                let c = self.signed_number()?;
                self.expect(Tok::RBrace)?;
                Ok(Formula::Atom { f, c })
            }
            other => Err(ParseError::Syntax {
                pos: self.pos(),
                message: format!("expected `(` or `{{`, found {}", other.describe()),
            }),
        }
    }

    fn window(&mut self) -> Result<Window, ParseError> {
        let open = self.pos();
        self.expect(Tok::LBracket)?;
        let lo = self.signed_number()?;
        self.expect(Tok::Comma)?;
        let hi = self.signed_number()?;
        self.expect(Tok::RBracket)?;
        if !(0.0 <= lo && lo <= hi) {
            return Err(ParseError::InvalidInterval { pos: open, lo, hi });
        }
        Ok(Window { lo, hi })
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Number { value, .. } => Ok(if neg { -value } else { value }),
            other => Err(ParseError::Syntax {
                pos: self.toks[self.at.saturating_sub(1)].0,
                message: format!("expected a number, found {}", other.describe()),
            }),
        }
    }

    // expr := sum
    fn expr_sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.expr_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = Expr::add(acc, self.expr_term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = Expr::sub(acc, self.expr_term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn expr_term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.expr_unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = Expr::mul(acc, self.expr_unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    acc = Expr::div(acc, self.expr_unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn expr_unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            if let Tok::Number { value, .. } = self.peek().clone() {
                self.bump();
                if *self.peek() == Tok::Caret {
                    // `-2^2` is -(2^2): the power binds tighter than the sign.
                    let base = self.expr_power_tail(Expr::Constant(value))?;
                    return Ok(Expr::neg(base));
                }
                return Ok(Expr::Constant(-value));
            }
            return Ok(Expr::neg(self.expr_unary()?));
        }
        self.expr_power()
    }

    fn expr_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.expr_primary()?;
        self.expr_power_tail(base)
    }

    fn expr_power_tail(&mut self, mut acc: Expr) -> Result<Expr, ParseError> {
        while *self.peek() == Tok::Caret {
            self.bump();
            let pos = self.pos();
            match self.bump() {
                Tok::Number { value, text } if text.bytes().all(|b| b.is_ascii_digit()) => {
                    if value > u32::MAX as f64 {
                        return Err(ParseError::Syntax {
                            pos,
                            message: format!("exponent {text} is too large"),
                        });
                    }
                    acc = Expr::pow(acc, value as u32);
                }
                other => {
                    return Err(ParseError::Syntax {
                        pos,
                        message: format!(
                            "exponent must be a nonnegative integer, found {}",
                            other.describe()
                        ),
                    })
                }
            }
        }
        Ok(acc)
    }

    fn expr_primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Number { value, .. } => Ok(Expr::Constant(value)),
            Tok::Ident(name) if name == "sqrt" => {
                self.expect(Tok::LParen)?;
                let inner = self.expr_sum()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::sqrt(inner))
            }
            Tok::Ident(name) => match self.names.iter().position(|n| *n == name) {
                Some(index) => Ok(Expr::Var { index, name }),
                None => Err(ParseError::UnknownVariable { pos, name }),
            },
            Tok::LParen => {
                let inner = self.expr_sum()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => Err(ParseError::Syntax {
                pos,
                message: format!("expected an expression, found {}", other.describe()),
            }),
        }
    }
}

/// Parse a formula, resolving variable names against `names` (the column
/// names of the signal the formula will be evaluated on).
pub fn parse_formula(text: &str, names: &[String]) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, names };
    let f = p.or_level()?;
    if *p.peek() != Tok::Eof {
        return Err(ParseError::Syntax {
            pos: p.pos(),
            message: format!("unexpected {} after formula", p.peek().describe()),
        });
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["x".into(), "y".into(), "v".into()]
    }

    fn parse(text: &str) -> Formula {
        parse_formula(text, &names()).unwrap()
    }

    #[test]
    fn parses_eventually_atom() {
        assert_eq!(
            parse("F[5,10] { v > 20 }"),
            Formula::eventually(5.0, 10.0, Formula::atom(Expr::var(2, "v"), 20.0))
        );
    }

    #[test]
    fn parses_speed_limit_clause() {
        assert_eq!(
            parse("G[0,50] { -v > -1.5 }"),
            Formula::always(0.0, 50.0, Formula::atom(Expr::neg(Expr::var(2, "v")), -1.5))
        );
    }

    #[test]
    fn parses_until() {
        assert_eq!(
            parse("{x>0} U[0,3] {y>0}"),
            Formula::until(
                0.0,
                3.0,
                Formula::atom(Expr::var(0, "x"), 0.0),
                Formula::atom(Expr::var(1, "y"), 0.0)
            )
        );
    }

    #[test]
    fn until_is_left_associative() {
        let a = || Formula::atom(Expr::var(0, "x"), 0.0);
        let b = || Formula::atom(Expr::var(1, "y"), 0.0);
        let c = || Formula::atom(Expr::var(2, "v"), 0.0);
        assert_eq!(
            parse("{x>0} U[0,1] {y>0} U[0,2] {v>0}"),
            parse("({x>0} U[0,1] {y>0}) U[0,2] {v>0}")
        );
        assert_eq!(
            parse("{x>0} U[0,1] {y>0} U[0,2] {v>0}"),
            Formula::until(0.0, 2.0, Formula::until(0.0, 1.0, a(), b()), c())
        );
    }

    #[test]
    fn precedence_bang_and_pipe() {
        assert_eq!(
            parse("!{x>0} & {y>0} | {v>0}"),
            parse("((!{x>0}) & {y>0}) | {v>0}")
        );
        // `|` desugars through De Morgan.
        assert_eq!(
            parse("{x>0} | {y>0}"),
            derived_or(
                Formula::atom(Expr::var(0, "x"), 0.0),
                Formula::atom(Expr::var(1, "y"), 0.0)
            )
        );
    }

    #[test]
    fn and_is_left_associative() {
        assert_eq!(
            parse("{x>0} & {y>0} & {v>0}"),
            parse("({x>0} & {y>0}) & {v>0}")
        );
    }

    #[test]
    fn rejects_unknown_variables() {
        assert!(matches!(
            parse_formula("{ w > 0 }", &names()),
            Err(ParseError::UnknownVariable { name, .. }) if name == "w"
        ));
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(matches!(
            parse_formula("F[-1,2] {x>0}", &names()),
            Err(ParseError::InvalidInterval { lo, hi, .. }) if lo == -1.0 && hi == 2.0
        ));
        assert!(matches!(
            parse_formula("G[3,2] {x>0}", &names()),
            Err(ParseError::InvalidInterval { .. })
        ));
        assert!(parse_formula("G[2,2] {x>0}", &names()).is_ok());
    }

    #[test]
    fn reports_syntax_errors_with_position() {
        match parse_formula("F[5,10] v > 20", &names()) {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 8),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(parse_formula("", &names()).is_err());
        assert!(parse_formula("{x>0} extra", &names()).is_err());
        assert!(parse_formula("{x > }", &names()).is_err());
    }

    #[test]
    fn parses_expressions_with_standard_precedence() {
        // x + y * v parses as x + (y * v)
        assert_eq!(
            parse("{ x + y * v > 0 }"),
            Formula::atom(
                Expr::add(
                    Expr::var(0, "x"),
                    Expr::mul(Expr::var(1, "y"), Expr::var(2, "v"))
                ),
                0.0
            )
        );
        // -x^2 parses as -(x^2)
        assert_eq!(
            parse("{ -x^2 > 0 }"),
            Formula::atom(Expr::neg(Expr::pow(Expr::var(0, "x"), 2)), 0.0)
        );
        assert_eq!(
            parse("{ sqrt(x^2 + y^2) > 5 }"),
            Formula::atom(
                Expr::sqrt(Expr::add(
                    Expr::pow(Expr::var(0, "x"), 2),
                    Expr::pow(Expr::var(1, "y"), 2)
                )),
                5.0
            )
        );
    }

    #[test]
    fn folds_signed_literals_but_not_negated_variables() {
        assert_eq!(
            parse("{ -1.5 > -2 }"),
            Formula::atom(Expr::Constant(-1.5), -2.0)
        );
        assert_eq!(
            parse("{ -x > 0 }"),
            Formula::atom(Expr::neg(Expr::var(0, "x")), 0.0)
        );
        assert_eq!(
            parse("{ -(1.5) > 0 }"),
            Formula::atom(Expr::neg(Expr::Constant(1.5)), 0.0)
        );
    }

    #[test]
    fn sign_binds_looser_than_power() {
        assert_eq!(
            parse("{ -2^2 > 0 }"),
            Formula::atom(Expr::neg(Expr::pow(Expr::Constant(2.0), 2)), 0.0)
        );
        assert_eq!(
            parse("{ (-2)^2 > 0 }"),
            Formula::atom(Expr::pow(Expr::Constant(-2.0), 2), 0.0)
        );
    }

    #[test]
    fn rejects_fractional_or_negative_exponents() {
        assert!(parse_formula("{ x^2.5 > 0 }", &names()).is_err());
        assert!(parse_formula("{ x^-1 > 0 }", &names()).is_err());
        assert!(parse_formula("{ x^1e2 > 0 }", &names()).is_err());
    }

    #[test]
    fn scientific_notation_in_literals() {
        assert_eq!(
            parse("{ x > 1e-3 }"),
            Formula::atom(Expr::var(0, "x"), 1e-3)
        );
        assert_eq!(parse("{ 2.5e2 > 0 }"), Formula::atom(Expr::Constant(250.0), 0.0));
    }

    #[test]
    fn operator_letters_are_usable_as_variable_names_inside_braces() {
        let names: Vec<String> = vec!["G".into(), "F".into()];
        assert_eq!(
            parse_formula("{ G + F > 0 }", &names).unwrap(),
            Formula::atom(
                Expr::add(Expr::var(0, "G"), Expr::var(1, "F")),
                0.0
            )
        );
    }
}
