//! Canonical ASCII printing. Output re-parses to an α-equivalent term.

use std::fmt;

use super::{LinType, Term};

impl fmt::Display for LinType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_type(self, 0, f)
    }
}

// 0: lolli, 1: tensor operand, 2: atom
fn write_type(t: &LinType, level: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        LinType::Ground(g) => f.write_str(g),
        LinType::Unit => f.write_str("I"),
        LinType::Tensor(a, b) => {
            if level > 1 {
                f.write_str("(")?;
            }
            write_type(a, 1, f)?;
            f.write_str(" * ")?;
            write_type(b, 2, f)?;
            if level > 1 {
                f.write_str(")")?;
            }
            Ok(())
        }
        LinType::Lolli(a, b) => {
            if level > 0 {
                f.write_str("(")?;
            }
            write_type(a, 1, f)?;
            f.write_str(" -o ")?;
            write_type(b, 0, f)?;
            if level > 0 {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, Level::Term, f)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Level {
    Term,
    Pair,
    App,
    Arg,
}

fn write_term(t: &Term, level: Level, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let own = match t {
        Term::Lam(..) | Term::UnitLet(..) | Term::PairLet(..) => Level::Term,
        Term::Pair(..) => Level::Pair,
        Term::App(..) => Level::App,
        Term::Star if level == Level::Arg => Level::Term,
        _ => Level::Arg,
    };
    let paren = own < level;
    if paren {
        f.write_str("(")?;
    }
    match t {
        Term::Var(x) => write!(f, "{x}")?,
        Term::Star => f.write_str("*")?,
        Term::Op(sym, args) => {
            write!(f, "{sym}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_term(a, Level::Term, f)?;
            }
            f.write_str(")")?;
        }
        Term::UnitLet(v, w) => {
            write_term(v, Level::Pair, f)?;
            f.write_str(" to *. ")?;
            write_term(w, Level::Term, f)?;
        }
        Term::Pair(v, w) => {
            write_term(v, Level::Pair, f)?;
            f.write_str(" * ")?;
            write_term(w, Level::App, f)?;
        }
        Term::PairLet(v, x, y, w) => {
            f.write_str("pm ")?;
            write_term(v, Level::Pair, f)?;
            write!(f, " to {x}*{y}. ")?;
            write_term(w, Level::Term, f)?;
        }
        Term::Lam(x, ty, body) => {
            write!(f, "\\{x}:{ty}. ")?;
            write_term(body, Level::Term, f)?;
        }
        Term::App(fun, arg) => {
            write_term(fun, Level::App, f)?;
            f.write_str(" ")?;
            write_term(arg, Level::Arg, f)?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}
