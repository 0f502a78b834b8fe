//! Parser for the `.lag` input format.
//!
//! A file declares the dynamical fields and one Lagrangian density:
//!
//! ```text
//! # comments run to the end of the line
//! fields phi, theta
//! L = -1/2*Dt(theta)*phi^2 + 1/2*phi^4 - 1/2*Dx(phi)^2
//! ```
//!
//! Operators in order of increasing binding strength: `+` `-`, then `*` `/`,
//! then unary minus, then `^` (integer exponents only, possibly negative).
//! `Dx(...)` takes the total spatial derivative of its argument, `Dt(...)`
//! applies only to a bare declared field, and `ln(...)` is the natural
//! logarithm. Identifiers are ASCII `[A-Za-z_][A-Za-z0-9_]*`; the words
//! `fields`, `L`, `Dx`, `Dt`, `ln` are reserved.

use std::fmt;

use crate::expr::{Expr, ExprError};
use crate::varcalc::total_dx;

/// Words that cannot be used as field names.
pub const RESERVED: &[&str] = &["fields", "L", "Dx", "Dt", "ln"];

/// A parsed input file: field names in declaration order plus the
/// normalized Lagrangian density.
#[derive(Debug, Clone)]
pub struct LagrangianSpec {
    pub fields: Vec<String>,
    pub lagrangian: Expr,
    /// Original source text, kept for reporting.
    pub source: String,
}

/// Parse failure with a position in the source text (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Equals,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("number `{n}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok| out.push(Token { tok, line: tline, col: tcol });
        match c {
            '\n' => {
                push(Tok::Newline);
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c2) = chars.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' | ',' | '=' => {
                push(match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Equals,
                });
                chars.next();
                col += 1;
            }
            '0'..='9' => {
                let mut digits = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_digit() {
                        digits.push(c2);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let n: i64 = digits.parse().map_err(|_| ParseError {
                    line: tline,
                    col: tcol,
                    message: format!("integer literal `{digits}` is too large"),
                })?;
                push(Tok::Int(n));
            }
            c2 if c2.is_ascii_alphabetic() || c2 == '_' => {
                let mut ident = String::new();
                while let Some(&c3) = chars.peek() {
                    if c3.is_ascii_alphanumeric() || c3 == '_' {
                        ident.push(c3);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push(Tok::Ident(ident));
            }
            other => {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    fields: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, t: &Token, message: String) -> ParseError {
        ParseError { line: t.line, col: t.col, message }
    }

    fn expect(&mut self, want: Tok) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.err(&t, format!("expected {}, found {}", want.describe(), t.tok.describe())))
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.next();
        }
    }

    fn parse_file(&mut self) -> Result<(Vec<String>, Expr), ParseError> {
        self.skip_newlines();
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == "fields" => {}
            _ => {
                return Err(self.err(&t, format!("expected `fields`, found {}", t.tok.describe())))
            }
        }
        loop {
            let t = self.next();
            let name = match &t.tok {
                Tok::Ident(s) => s.clone(),
                _ => {
                    return Err(
                        self.err(&t, format!("expected a field name, found {}", t.tok.describe()))
                    )
                }
            };
            if RESERVED.contains(&name.as_str()) {
                return Err(self.err(&t, format!("`{name}` is a reserved word")));
            }
            if self.fields.contains(&name) {
                return Err(self.err(&t, format!("field `{name}` is declared twice")));
            }
            self.fields.push(name);
            match self.peek().tok {
                Tok::Comma => {
                    self.next();
                }
                _ => break,
            }
        }
        let t = self.peek().clone();
        match t.tok {
            Tok::Newline => {
                self.next();
            }
            Tok::Eof => {}
            _ => {
                return Err(self.err(
                    &t,
                    format!("expected end of line after field list, found {}", t.tok.describe()),
                ))
            }
        }
        self.skip_newlines();
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == "L" => {}
            _ => return Err(self.err(&t, format!("expected `L`, found {}", t.tok.describe()))),
        }
        self.expect(Tok::Equals)?;
        let start = self.peek().clone();
        let lagrangian = self.parse_expr()?;
        let t = self.peek().clone();
        match t.tok {
            Tok::Newline | Tok::Eof => {}
            _ => {
                return Err(self.err(
                    &t,
                    format!("expected an operator or end of line, found {}", t.tok.describe()),
                ))
            }
        }
        self.skip_newlines();
        let t = self.peek().clone();
        if t.tok != Tok::Eof {
            return Err(self.err(
                &t,
                format!("expected end of file after the Lagrangian, found {}", t.tok.describe()),
            ));
        }
        let lagrangian = lagrangian.normalize().map_err(|e| {
            self.err(&start, format!("the Lagrangian does not simplify: {e}"))
        })?;
        Ok((self.fields.clone(), lagrangian))
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.parse_term()?];
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    terms.push(self.parse_term()?);
                }
                Tok::Minus => {
                    self.next();
                    terms.push(self.parse_term()?.neg());
                }
                _ => break,
            }
        }
        Ok(Expr::add(terms))
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.parse_unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.next();
                    acc = Expr::mul(vec![acc, self.parse_unary()?]);
                }
                Tok::Slash => {
                    self.next();
                    acc = acc.div(self.parse_unary()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(self.parse_unary()?.neg());
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let mut negate = false;
        if self.peek().tok == Tok::Minus {
            self.next();
            negate = true;
        }
        let t = self.next();
        let n = match t.tok {
            Tok::Int(n) => n,
            _ => {
                return Err(self.err(
                    &t,
                    format!("expected an integer exponent after `^`, found {}", t.tok.describe()),
                ))
            }
        };
        Ok(base.pow(if negate { -n } else { n }))
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Int(n) => Ok(Expr::int(*n)),
            Tok::LParen => {
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "ln" => {
                    self.expect(Tok::LParen)?;
                    let inner = self.parse_expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(inner.ln())
                }
                "Dx" => {
                    self.expect(Tok::LParen)?;
                    let inner = self.parse_expr()?;
                    self.expect(Tok::RParen)?;
                    if inner.has_time_jets() {
                        return Err(self.err(
                            &t,
                            "Dx(...) may not contain time derivatives; apply Dt innermost"
                                .to_string(),
                        ));
                    }
                    total_dx(&inner).map_err(|e: ExprError| {
                        self.err(&t, format!("Dx argument does not simplify: {e}"))
                    })
                }
                "Dt" => {
                    self.expect(Tok::LParen)?;
                    let arg = self.next();
                    let field = match &arg.tok {
                        Tok::Ident(f) if self.fields.contains(f) => f.clone(),
                        Tok::Ident(f) if !RESERVED.contains(&f.as_str()) => {
                            return Err(self.err(
                                &arg,
                                format!("Dt argument `{f}` is not a declared field"),
                            ))
                        }
                        _ => {
                            return Err(self.err(
                                &arg,
                                format!(
                                    "Dt(...) takes a bare declared field, found {}",
                                    arg.tok.describe()
                                ),
                            ))
                        }
                    };
                    let close = self.next();
                    if close.tok != Tok::RParen {
                        return Err(self.err(
                            &close,
                            format!(
                                "Dt(...) takes a bare declared field, found {}",
                                close.tok.describe()
                            ),
                        ));
                    }
                    Ok(Expr::field_jet(&field, 0, 1))
                }
                "fields" | "L" => {
                    Err(self.err(&t, format!("`{name}` is a reserved word")))
                }
                _ => {
                    if self.fields.contains(name) {
                        Ok(Expr::field(name))
                    } else {
                        Err(self.err(&t, format!("`{name}` is not a declared field")))
                    }
                }
            },
            _ => Err(self.err(
                &t,
                format!("expected a number, field, or `(`, found {}", t.tok.describe()),
            )),
        }
    }
}

/// Parse a complete `.lag` source text.
pub fn parse(src: &str) -> Result<LagrangianSpec, ParseError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0, fields: Vec::new() };
    let (fields, lagrangian) = p.parse_file()?;
    Ok(LagrangianSpec { fields, lagrangian, source: src.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::expr::Expr;

    fn phi() -> Expr {
        Expr::field("phi")
    }

    fn theta() -> Expr {
        Expr::field("theta")
    }

    #[test]
    fn parses_the_cubic_system() {
        let spec = parse(corpus::CUBIC_NLS).unwrap();
        assert_eq!(spec.fields, vec!["phi", "theta"]);
        let expected = Expr::add(vec![
            Expr::mul(vec![
                Expr::rational(-1, 2),
                Expr::field_jet("theta", 0, 1),
                phi().pow(2),
            ]),
            Expr::mul(vec![Expr::rational(1, 2), phi().pow(4)]),
            Expr::mul(vec![Expr::rational(-1, 2), Expr::field_jet("phi", 1, 0).pow(2)]),
            Expr::mul(vec![
                Expr::rational(-1, 2),
                Expr::field_jet("theta", 1, 0).pow(2),
                phi().pow(2),
            ]),
        ]);
        assert!(spec.lagrangian.equals(&expected).unwrap());
    }

    #[test]
    fn all_builtin_systems_parse() {
        for (name, src) in corpus::BUILTINS {
            let spec = parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!spec.fields.is_empty(), "{name} has no fields");
            assert!(!spec.lagrangian.is_zero().unwrap(), "{name} has a zero Lagrangian");
        }
    }

    #[test]
    fn operator_precedence_and_associativity() {
        let eval = |text: &str| -> Expr {
            parse(&format!("fields phi, theta\nL = {text}\n")).unwrap().lagrangian
        };
        assert!(eval("2+3*4^2").equals(&Expr::int(50)).unwrap());
        assert!(eval("-2^2").equals(&Expr::int(-4)).unwrap());
        assert!(eval("(0-2)^2").equals(&Expr::int(4)).unwrap());
        assert!(eval("2^-2").equals(&Expr::rational(1, 4)).unwrap());
        assert!(eval("1/2/2").equals(&Expr::rational(1, 4)).unwrap());
        assert!(eval("6/3*2").equals(&Expr::int(4)).unwrap());
        assert!(eval("-1/2*phi^2")
            .equals(&Expr::mul(vec![Expr::rational(-1, 2), phi().pow(2)]))
            .unwrap());
        assert!(eval("phi - -theta").equals(&Expr::add(vec![phi(), theta()])).unwrap());
    }

    #[test]
    fn spatial_derivative_expands_at_parse_time() {
        let eval = |text: &str| -> Expr {
            parse(&format!("fields phi, theta\nL = {text}\n")).unwrap().lagrangian
        };
        assert!(eval("Dx(Dx(phi))").equals(&Expr::field_jet("phi", 2, 0)).unwrap());
        let expected = Expr::mul(vec![Expr::int(2), phi(), Expr::field_jet("phi", 1, 0)]);
        assert!(eval("Dx(phi^2)").equals(&expected).unwrap());
        assert!(eval("Dx(ln(phi))")
            .equals(&Expr::field_jet("phi", 1, 0).div(phi()))
            .unwrap());
    }

    #[test]
    fn time_derivative_rules() {
        let ok = parse("fields phi\nL = Dt(phi)*phi\n").unwrap();
        assert!(ok
            .lagrangian
            .equals(&Expr::mul(vec![Expr::field_jet("phi", 0, 1), phi()]))
            .unwrap());
        let err = parse("fields phi\nL = Dt(phi^2)\n").unwrap_err();
        assert!(err.message.contains("bare declared field"), "{err}");
        let err = parse("fields phi\nL = Dt(psi)\n").unwrap_err();
        assert!(err.message.contains("not a declared field"), "{err}");
        let err = parse("fields phi\nL = Dx(Dt(phi))\n").unwrap_err();
        assert!(err.message.contains("may not contain time derivatives"), "{err}");
        let err = parse("fields phi\nL = Dt(Dx(phi))\n").unwrap_err();
        assert!(err.message.contains("bare declared field"), "{err}");
    }

    #[test]
    fn declaration_errors_carry_positions() {
        let err = parse("fields phi, phi\nL = phi\n").unwrap_err();
        assert_eq!((err.line, err.col), (1, 13));
        assert!(err.message.contains("declared twice"));

        let err = parse("fields phi, ln\nL = phi\n").unwrap_err();
        assert!(err.message.contains("reserved word"));

        let err = parse("fields phi\nL = phi + psi\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 11));
        assert!(err.message.contains("not a declared field"));
    }

    #[test]
    fn structural_errors_are_reported() {
        assert!(parse("L = phi\n").unwrap_err().message.contains("expected `fields`"));
        assert!(parse("fields phi\n").unwrap_err().message.contains("expected `L`"));
        let err = parse("fields phi\nL = phi phi\n").unwrap_err();
        assert!(err.message.contains("expected an operator"), "{err}");
        let err = parse("fields phi\nL = phi +\n").unwrap_err();
        assert!(err.message.contains("expected a number, field, or `(`"), "{err}");
        let err = parse("fields phi\nL = phi^theta\n").unwrap_err();
        assert!(err.message.contains("integer exponent"), "{err}");
        let err = parse("fields phi\nL = phi\nextra\n").unwrap_err();
        assert!(err.message.contains("end of file"), "{err}");
        let err = parse("fields phi\nL = \u{03c6}\n").unwrap_err();
        assert!(err.message.contains("unexpected character"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let src = "\n# a system\n\nfields phi # amplitude\n\n# density\nL = phi^2 # squared\n\n";
        let spec = parse(src).unwrap();
        assert_eq!(spec.fields, vec!["phi"]);
        assert!(spec.lagrangian.equals(&phi().pow(2)).unwrap());
    }

    #[test]
    fn rendered_input_round_trips() {
        for (name, src) in corpus::BUILTINS {
            let spec = parse(src).unwrap();
            let rendered = format!(
                "fields {}\nL = {}\n",
                spec.fields.join(", "),
                spec.lagrangian.render_input()
            );
            let again = parse(&rendered).unwrap_or_else(|e| panic!("{name}: {e}\n{rendered}"));
            assert!(
                again.lagrangian.equals(&spec.lagrangian).unwrap(),
                "{name}: round trip changed the Lagrangian\n{rendered}"
            );
        }
    }
}
