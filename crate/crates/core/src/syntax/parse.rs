//! Recursive-descent parser for the surface syntax.
//!
//! ```text
//! term  ::= '\' x ':' type '.' term
//!         | 'pm' pair 'to' x '*' y '.' term
//!         | pair [ 'to' ('*' | '_') '.' term ]
//! pair  ::= app ('*' app)*                       left associative
//! app   ::= head arg*
//! head  ::= arg | '*'
//! arg   ::= x | f '(' term (',' term)* ')' | '(' term ')'
//! type  ::= tprod [ '-o' type ]
//! tprod ::= tatom ('*' tatom)*
//! tatom ::= 'I' | X | '(' type ')'
//! ```
//!
//! An identifier immediately followed by `(` is an operation call; applying
//! a variable to a parenthesised argument needs a space, as in `f (x)`.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{Context, LinType, Name, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown operation symbol `{symbol}`")]
    UnknownOperation {
        line: usize,
        col: usize,
        symbol: String,
    },
    #[error("{line}:{col}: operation `{symbol}` expects {expected} arguments, got {found}")]
    Arity {
        line: usize,
        col: usize,
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate variable `{0}` in context")]
    DuplicateVariable(String),
}

/// Names the parser needs to know about: operation arities and closed
/// term abbreviations.
#[derive(Debug, Clone, Default)]
pub struct ParseEnv {
    pub ops: HashMap<String, usize>,
    pub defs: HashMap<String, Term>,
    /// Free names in scope (e.g. the context); binders shadowing them are
    /// renamed.
    pub reserved: HashSet<Name>,
}

impl ParseEnv {
    pub fn with_ops<I, S>(ops: I) -> Self
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        ParseEnv {
            ops: ops.into_iter().map(|(s, n)| (s.into(), n)).collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Lambda,
    Colon,
    Dot,
    Comma,
    LParen,
    RParen,
    Star,
    Lolli,
    Dash,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    // no whitespace before this token
    glued: bool,
}

fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut glued = false;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            glued = false;
            continue;
        }
        if c.is_whitespace() {
            adv(1, &mut i, &mut col);
            glued = false;
            continue;
        }
        let tok = if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
                col += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            let t = match c {
                '\\' | 'λ' => Tok::Lambda,
                ':' => Tok::Colon,
                '.' => Tok::Dot,
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '*' | '⊗' | '∗' => Tok::Star,
                '⊸' => Tok::Lolli,
                '-' if chars.get(i + 1) == Some(&'o') => {
                    adv(1, &mut i, &mut col);
                    Tok::Lolli
                }
                '-' => Tok::Dash,
                other => {
                    return Err(SyntaxError::Syntax {
                        line: l0,
                        col: c0,
                        msg: format!("unexpected character `{other}`"),
                    })
                }
            };
            adv(1, &mut i, &mut col);
            t
        };
        out.push(Token {
            tok,
            line: l0,
            col: c0,
            glued,
        });
        glued = true;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
        glued: false,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    env: &'a ParseEnv,
    scope: Vec<(String, Name)>,
}

const KEYWORDS: [&str; 3] = ["pm", "to", "I"];

impl<'a> Parser<'a> {
    fn new(text: &str, env: &'a ParseEnv) -> Result<Self, SyntaxError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            env,
            scope: Vec::new(),
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        let t = self.peek();
        Err(SyntaxError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {}", describe(&self.peek().tok)))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            other => self.err(format!("expected {what}, found {}", describe(other))),
        }
    }

    fn finish(&self) -> Result<(), SyntaxError> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            self.err(format!("unexpected {}", describe(&self.peek().tok)))
        }
    }

    // binders ---------------------------------------------------------------

    fn bind(&mut self, user: &str) -> Name {
        let name = Name::new(user);
        let clash = self.scope.iter().any(|(_, n)| *n == name) || self.env.reserved.contains(&name);
        let name = if clash {
            let taken: HashSet<Name> = self
                .scope
                .iter()
                .map(|(_, n)| n.clone())
                .chain(self.env.reserved.iter().cloned())
                .collect();
            name.fresh(&|c| taken.contains(c))
        } else {
            name
        };
        self.scope.push((user.to_string(), name.clone()));
        name
    }

    fn resolve(&self, user: &str) -> Option<Name> {
        self.scope
            .iter()
            .rev()
            .find(|(u, _)| u == user)
            .map(|(_, n)| n.clone())
    }

    // types -----------------------------------------------------------------

    fn ty(&mut self) -> Result<LinType, SyntaxError> {
        let a = self.tprod()?;
        if self.peek().tok == Tok::Lolli {
            self.next();
            let b = self.ty()?;
            return Ok(LinType::lolli(a, b));
        }
        Ok(a)
    }

    fn tprod(&mut self) -> Result<LinType, SyntaxError> {
        let mut a = self.tatom()?;
        while self.peek().tok == Tok::Star {
            self.next();
            let b = self.tatom()?;
            a = LinType::tensor(a, b);
        }
        Ok(a)
    }

    fn tatom(&mut self) -> Result<LinType, SyntaxError> {
        match self.peek().tok.clone() {
            Tok::Ident(s) if s == "I" => {
                self.next();
                Ok(LinType::Unit)
            }
            Tok::Ident(_) => Ok(LinType::ground(&self.ident("type")?)),
            Tok::LParen => {
                self.next();
                let t = self.ty()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            other => self.err(format!("expected a type, found {}", describe(&other))),
        }
    }

    // terms -----------------------------------------------------------------

    fn term(&mut self) -> Result<Term, SyntaxError> {
        if self.peek().tok == Tok::Lambda {
            self.next();
            let user = self.ident("bound variable")?;
            self.expect(Tok::Colon, "`:`")?;
            let ty = self.ty()?;
            self.expect(Tok::Dot, "`.`")?;
            let x = self.bind(&user);
            let body = self.term();
            self.scope.pop();
            return Ok(Term::lam(x, ty, body?));
        }
        if self.is_kw("pm") {
            self.next();
            let scrutinee = self.pair()?;
            if !self.is_kw("to") {
                return self.err("expected `to` after pm scrutinee");
            }
            self.next();
            let ux = self.ident("pattern variable")?;
            self.expect(Tok::Star, "`*` in tensor pattern")?;
            let uy = self.ident("pattern variable")?;
            if ux == uy {
                return self.err(format!("pattern binds `{ux}` twice"));
            }
            self.expect(Tok::Dot, "`.`")?;
            let x = self.bind(&ux);
            let y = self.bind(&uy);
            let body = self.term();
            self.scope.truncate(self.scope.len() - 2);
            return Ok(Term::pair_let(scrutinee, x, y, body?));
        }
        let v = self.pair()?;
        if self.is_kw("to") {
            self.next();
            match &self.peek().tok {
                Tok::Star => {}
                Tok::Ident(s) if s == "_" => {}
                other => return self.err(format!("expected `*` after `to`, found {}", describe(other))),
            }
            self.next();
            self.expect(Tok::Dot, "`.`")?;
            let w = self.term()?;
            return Ok(Term::unit_let(v, w));
        }
        Ok(v)
    }

    fn pair(&mut self) -> Result<Term, SyntaxError> {
        let mut v = self.app()?;
        while self.peek().tok == Tok::Star {
            self.next();
            let w = self.app()?;
            v = Term::pair(v, w);
        }
        Ok(v)
    }

    fn app(&mut self) -> Result<Term, SyntaxError> {
        let mut f = if self.peek().tok == Tok::Star {
            self.next();
            Term::Star
        } else {
            self.arg()?
        };
        while self.starts_arg() {
            let a = self.arg()?;
            f = Term::app(f, a);
        }
        Ok(f)
    }

    fn starts_arg(&self) -> bool {
        match &self.peek().tok {
            Tok::LParen => true,
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn arg(&mut self) -> Result<Term, SyntaxError> {
        let tok = self.peek().clone();
        match tok.tok {
            Tok::LParen => {
                self.next();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(ref s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.next();
                let call = self.peek().tok == Tok::LParen && self.peek().glued;
                if let Some(&arity) = self.env.ops.get(&s) {
                    if self.resolve(&s).is_none() {
                        if !call {
                            return Err(SyntaxError::Syntax {
                                line: tok.line,
                                col: tok.col,
                                msg: format!("operation `{s}` must be applied to its arguments"),
                            });
                        }
                        let args = self.call_args()?;
                        if args.len() != arity {
                            return Err(SyntaxError::Arity {
                                line: tok.line,
                                col: tok.col,
                                symbol: s,
                                expected: arity,
                                found: args.len(),
                            });
                        }
                        return Ok(Term::op(&s, args));
                    }
                }
                if call {
                    return Err(SyntaxError::UnknownOperation {
                        line: tok.line,
                        col: tok.col,
                        symbol: s,
                    });
                }
                if let Some(n) = self.resolve(&s) {
                    return Ok(Term::Var(n));
                }
                if let Some(def) = self.env.defs.get(&s) {
                    return Ok(def.clone());
                }
                Ok(Term::Var(Name::new(&s)))
            }
            other => self.err(format!("expected a term, found {}", describe(&other))),
        }
    }

    fn call_args(&mut self) -> Result<Vec<Term>, SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn context(&mut self) -> Result<Context, SyntaxError> {
        if self.peek().tok == Tok::Dash && matches!(self.peek_at(1).tok, Tok::Eof) {
            self.next();
            return Ok(Context::empty());
        }
        if self.peek().tok == Tok::Eof {
            return Ok(Context::empty());
        }
        let mut entries = Vec::new();
        loop {
            let x = self.ident("context variable")?;
            self.expect(Tok::Colon, "`:`")?;
            let t = self.ty()?;
            entries.push((Name::new(&x), t));
            if self.peek().tok == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        Context::new(entries).map_err(|x| SyntaxError::DuplicateVariable(x.to_string()))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Lambda => "`\\`".into(),
        Tok::Colon => "`:`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Comma => "`,`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Star => "`*`".into(),
        Tok::Lolli => "`-o`".into(),
        Tok::Dash => "`-`".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_term(text: &str, env: &ParseEnv) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(text, env)?;
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_type(text: &str) -> Result<LinType, SyntaxError> {
    let env = ParseEnv::default();
    let mut p = Parser::new(text, &env)?;
    let t = p.ty()?;
    p.finish()?;
    Ok(t)
}

/// Parses `x:A, y:B` or `-` for the empty context.
pub fn parse_context(text: &str) -> Result<Context, SyntaxError> {
    let env = ParseEnv::default();
    let mut p = Parser::new(text, &env)?;
    let c = p.context()?;
    p.finish()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::alpha_eq;

    fn env() -> ParseEnv {
        ParseEnv::with_ops([
            ("wait1", 1),
            ("bernoulli", 3),
            ("plus", 2),
            ("normal", 2),
            ("zero", 1),
            ("one", 1),
            ("p", 1),
        ])
    }

    #[test]
    fn lambda_with_operation() {
        let t = parse_term("\\x:X. wait1(x)", &env()).unwrap();
        assert_eq!(
            t,
            Term::lam(Name::new("x"), LinType::ground("X"), Term::op("wait1", vec![Term::var("x")]))
        );
    }

    #[test]
    fn rejects_ill_formed_pattern() {
        assert!(matches!(
            parse_term("pm v to x (x) y. w", &env()),
            Err(SyntaxError::Syntax { .. })
        ));
    }

    #[test]
    fn unknown_operation_and_arity() {
        assert!(matches!(
            parse_term("foo(x, y)", &env()),
            Err(SyntaxError::UnknownOperation { .. })
        ));
        assert!(matches!(
            parse_term("plus(x)", &env()),
            Err(SyntaxError::Arity { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn walk_round_trip() {
        let text = "\\x:Real. bernoulli(zero(*), plus(x, normal(zero(*), one(*))), p(*))";
        let t = parse_term(text, &env()).unwrap();
        let printed = t.to_string();
        assert_eq!(printed, text);
        assert!(alpha_eq(&parse_term(&printed, &env()).unwrap(), &t));
    }

    #[test]
    fn precedence() {
        let e = env();
        let t = parse_term("f a b * c to *. d", &e).unwrap();
        let expect = Term::unit_let(
            Term::pair(
                Term::app(Term::app(Term::var("f"), Term::var("a")), Term::var("b")),
                Term::var("c"),
            ),
            Term::var("d"),
        );
        assert_eq!(t, expect);
        assert_eq!(parse_term("* * *", &e).unwrap(), Term::pair(Term::Star, Term::Star));
        assert_eq!(parse_term("f (*)", &e).unwrap(), Term::app(Term::var("f"), Term::Star));
        let pm = parse_term("pm a * b to x*y. y * x", &e).unwrap();
        assert!(matches!(pm, Term::PairLet(..)));
        assert_eq!(parse_term("v to _. w", &e).unwrap(), Term::unit_let(Term::var("v"), Term::var("w")));
    }

    #[test]
    fn types() {
        let t = parse_type("X * Y -o I -o X").unwrap();
        assert_eq!(
            t,
            LinType::lolli(
                LinType::tensor(LinType::ground("X"), LinType::ground("Y")),
                LinType::lolli(LinType::Unit, LinType::ground("X"))
            )
        );
        assert_eq!(parse_type(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn shadowing_binders_are_renamed() {
        let t = parse_term("\\x:X. \\x:X. x", &env()).unwrap();
        match t {
            Term::Lam(a, _, body) => match *body {
                Term::Lam(b, _, inner) => {
                    assert_ne!(a, b);
                    assert_eq!(*inner, Term::Var(b));
                }
                _ => panic!(),
            },
            _ => panic!(),
        }
    }

    #[test]
    fn contexts() {
        assert_eq!(parse_context("-").unwrap(), Context::empty());
        let c = parse_context("x:X, f:X -o X").unwrap();
        assert_eq!(c.len(), 2);
        assert!(matches!(parse_context("x:X, x:Y"), Err(SyntaxError::DuplicateVariable(_))));
    }

    #[test]
    fn error_positions() {
        match parse_term("\\x:X.\n  x )", &env()) {
            Err(SyntaxError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 5)),
            other => panic!("{other:?}"),
        }
    }
}
