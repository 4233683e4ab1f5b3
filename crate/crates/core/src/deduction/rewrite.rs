//! The equations of autonomous categories as an oriented rewrite system.
//!
//! β-rules run left to right, η-rules toward the shorter side, and
//! commuting conversions lift an eliminator out of the immediate child of
//! its parent. Lifting out of an eliminator body is never done, since
//! `a to *. (b to *. w)` would otherwise swap forever.

use std::collections::HashMap;
use std::fmt;

use crate::syntax::{subst_many, substitute, Name, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fig3Eq {
    /// `pm v * w to x*y. u = u[v/x, w/y]`
    BetaPm,
    /// `pm v to x*y. u[x*y/z] = u[v/z]`
    EtaPm,
    /// `* to *. v = v`
    BetaUnit,
    /// `v to *. w[*/z] = w[v/z]`
    EtaUnit,
    /// `(\x:A. v) w = v[w/x]`
    BetaLam,
    /// `\x:A. v x = v`
    EtaLam,
    /// `u[v to *. w/z] = v to *. u[w/z]`
    CommuteUnit,
    /// `u[pm v to x*y. w/z] = pm v to x*y. u[w/z]`
    CommutePm,
}

impl fmt::Display for Fig3Eq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fig3Eq::BetaPm => "beta-pm",
            Fig3Eq::EtaPm => "eta-pm",
            Fig3Eq::BetaUnit => "beta-unit",
            Fig3Eq::EtaUnit => "eta-unit",
            Fig3Eq::BetaLam => "beta-lam",
            Fig3Eq::EtaLam => "eta-lam",
            Fig3Eq::CommuteUnit => "commute-unit",
            Fig3Eq::CommutePm => "commute-pm",
        })
    }
}

/// One oriented rewrite at `pos`. `detail` is the position of the
/// eliminated `x*y` or `*` inside the body for the η-rules, and the child
/// index being lifted for commuting conversions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RewriteStep {
    pub eq: Fig3Eq,
    pub pos: Vec<usize>,
    pub detail: Vec<usize>,
}

impl fmt::Display for RewriteStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:?}", self.eq, self.pos)?;
        if !self.detail.is_empty() {
            write!(f, " ({:?})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub term: Term,
    pub steps: Vec<RewriteStep>,
    /// Set when the step budget ran out before a normal form was reached.
    pub exhausted: bool,
}

/// Applies one step, checking every side condition; `None` if the step
/// does not apply.
pub fn apply_step(t: &Term, step: &RewriteStep) -> Option<Term> {
    let sub = t.at(&step.pos)?;
    let new = apply_root(sub, step.eq, &step.detail)?;
    t.replace_at(&step.pos, new)
}

/// True iff no binder on the path to `pos` inside `t` is free in `incoming`.
fn path_is_capture_free(t: &Term, pos: &[usize], incoming: &Term) -> bool {
    let mut cur = t;
    for &i in pos {
        if cur.binders_of_child(i).iter().any(|b| incoming.has_free(b)) {
            return false;
        }
        match cur.child(i) {
            Some(c) => cur = c,
            None => return false,
        }
    }
    true
}

fn apply_root(t: &Term, eq: Fig3Eq, detail: &[usize]) -> Option<Term> {
    match (eq, t) {
        (Fig3Eq::BetaLam, Term::App(f, w)) => match &**f {
            Term::Lam(x, _, v) => Some(substitute(v, x, w)),
            _ => None,
        },
        (Fig3Eq::BetaPm, Term::PairLet(p, x, y, u)) => match &**p {
            Term::Pair(v, w) => {
                let mut map = HashMap::new();
                map.insert(x.clone(), (**v).clone());
                map.insert(y.clone(), (**w).clone());
                Some(subst_many(u, &map))
            }
            _ => None,
        },
        (Fig3Eq::BetaUnit, Term::UnitLet(s, v)) if **s == Term::Star => Some((**v).clone()),
        (Fig3Eq::EtaLam, Term::Lam(x, _, body)) => match &**body {
            Term::App(v, arg) if **arg == Term::Var(x.clone()) && !v.has_free(x) => Some((**v).clone()),
            _ => None,
        },
        (Fig3Eq::EtaPm, Term::PairLet(v, x, y, u)) => {
            let target = Term::pair(Term::Var(x.clone()), Term::Var(y.clone()));
            if u.at(detail)? != &target || u.occurrences(x) != 1 || u.occurrences(y) != 1 {
                return None;
            }
            if !path_is_capture_free(u, detail, v) {
                return None;
            }
            u.replace_at(detail, (**v).clone())
        }
        (Fig3Eq::EtaUnit, Term::UnitLet(v, w)) => {
            if **v == Term::Star || w.at(detail)? != &Term::Star || !path_is_capture_free(w, detail, v) {
                return None;
            }
            w.replace_at(detail, (**v).clone())
        }
        (Fig3Eq::CommuteUnit | Fig3Eq::CommutePm, parent) => {
            let &[i] = detail else { return None };
            if matches!(parent, Term::UnitLet(..) | Term::PairLet(..)) && i != 0 {
                return None;
            }
            let child = parent.child(i)?;
            let outer = parent.binders_of_child(i);
            let others: Vec<&Term> = parent
                .children()
                .into_iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, c)| c)
                .collect();
            match (eq, child) {
                (Fig3Eq::CommuteUnit, Term::UnitLet(v, w)) => {
                    if **v == Term::Star || outer.iter().any(|b| v.has_free(b)) {
                        return None;
                    }
                    Some(Term::unit_let((**v).clone(), parent.with_child(i, (**w).clone())?))
                }
                (Fig3Eq::CommutePm, Term::PairLet(v, x, y, w)) => {
                    if matches!(**v, Term::Pair(..)) || outer.iter().any(|b| v.has_free(b)) {
                        return None;
                    }
                    let clash = |n: &Name| outer.contains(&n) || others.iter().any(|o| o.has_free(n));
                    if clash(x) || clash(y) {
                        return None;
                    }
                    Some(Term::pair_let(
                        (**v).clone(),
                        x.clone(),
                        y.clone(),
                        parent.with_child(i, (**w).clone())?,
                    ))
                }
                _ => None,
            }
        }
        _ => None,
    }
}

fn star_positions(t: &Term, pos: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if *t == Term::Star {
        out.push(pos.clone());
    }
    for (i, c) in t.children().into_iter().enumerate() {
        pos.push(i);
        star_positions(c, pos, out);
        pos.pop();
    }
}

fn find_subterm(t: &Term, target: &Term, pos: &mut Vec<usize>) -> bool {
    if t == target {
        return true;
    }
    for (i, c) in t.children().into_iter().enumerate() {
        pos.push(i);
        if find_subterm(c, target, pos) {
            return true;
        }
        pos.pop();
    }
    false
}

/// The first applicable rule at the root of `t`, in a fixed priority order.
fn root_redex(t: &Term) -> Option<(Fig3Eq, Vec<usize>)> {
    let simple = [Fig3Eq::BetaLam, Fig3Eq::BetaPm, Fig3Eq::BetaUnit, Fig3Eq::EtaLam];
    for eq in simple {
        if apply_root(t, eq, &[]).is_some() {
            return Some((eq, vec![]));
        }
    }
    match t {
        Term::PairLet(_, x, y, u) => {
            let mut pos = Vec::new();
            let target = Term::pair(Term::Var(x.clone()), Term::Var(y.clone()));
            if find_subterm(u, &target, &mut pos) && apply_root(t, Fig3Eq::EtaPm, &pos).is_some() {
                return Some((Fig3Eq::EtaPm, pos));
            }
        }
        Term::UnitLet(_, w) => {
            let mut stars = Vec::new();
            star_positions(w, &mut Vec::new(), &mut stars);
            if let Some(p) = stars.into_iter().find(|p| apply_root(t, Fig3Eq::EtaUnit, p).is_some()) {
                return Some((Fig3Eq::EtaUnit, p));
            }
        }
        _ => {}
    }
    for (i, c) in t.children().into_iter().enumerate() {
        let eq = match c {
            Term::UnitLet(..) => Fig3Eq::CommuteUnit,
            Term::PairLet(..) => Fig3Eq::CommutePm,
            _ => continue,
        };
        if apply_root(t, eq, &[i]).is_some() {
            return Some((eq, vec![i]));
        }
    }
    None
}

/// Innermost-first: the first redex in post-order.
fn find_redex(t: &Term, pos: &mut Vec<usize>) -> Option<RewriteStep> {
    for (i, c) in t.children().into_iter().enumerate() {
        pos.push(i);
        if let Some(s) = find_redex(c, pos) {
            return Some(s);
        }
        pos.pop();
    }
    root_redex(t).map(|(eq, detail)| RewriteStep {
        eq,
        pos: pos.clone(),
        detail,
    })
}

/// Rewrites to normal form, recording every step. Stops after `max_steps`
/// and flags the result as exhausted.
pub fn normalize(t: &Term, max_steps: usize) -> Normalized {
    let mut cur = t.clone();
    let mut steps = Vec::new();
    loop {
        let Some(step) = find_redex(&cur, &mut Vec::new()) else {
            return Normalized {
                term: cur,
                steps,
                exhausted: false,
            };
        };
        if steps.len() == max_steps {
            return Normalized {
                term: cur,
                steps,
                exhausted: true,
            };
        }
        cur = apply_step(&cur, &step).expect("redex found by search applies");
        steps.push(step);
    }
}

pub fn is_normal(t: &Term) -> bool {
    find_redex(t, &mut Vec::new()).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, parse_term, ParseEnv};

    fn env() -> ParseEnv {
        ParseEnv::with_ops([("wait1".to_string(), 1), ("c".to_string(), 1), ("f".to_string(), 2)])
    }

    fn nf(s: &str) -> Term {
        normalize(&parse_term(s, &env()).unwrap(), 1000).term
    }

    fn t(s: &str) -> Term {
        parse_term(s, &env()).unwrap()
    }

    #[test]
    fn beta_rules() {
        assert_eq!(nf("(\\x:X. wait1(x)) y"), t("wait1(y)"));
        assert_eq!(nf("* to *. v"), t("v"));
        assert_eq!(nf("pm a * b to x*y. x * y"), t("a * b"));
        assert_eq!(nf("pm a * b to x*y. f(y, x)"), t("f(b, a)"));
    }

    #[test]
    fn eta_rules() {
        assert_eq!(nf("\\x:X. g x"), t("g"));
        assert_eq!(nf("pm p to x*y. c(x * y)"), t("c(p)"));
        assert_eq!(nf("u to *. c(*)"), t("c(u)"));
        // x is free in the function part, so no η
        let keep = t("\\x:X. (\\y:X. f(x, y)) ");
        assert!(alpha_eq(&nf("\\x:X. (\\y:X. f(x, y))"), &keep));
    }

    #[test]
    fn commuting_conversions() {
        assert_eq!(nf("c(u to *. w)"), t("u to *. c(w)"));
        assert_eq!(nf("f(pm p to x*y. x, q)"), t("pm p to x*y. f(x, q)"));
        // no lifting when the scrutinee mentions the λ-bound variable
        let stuck = nf("\\z:I. (z to *. w)");
        assert_eq!(stuck, t("\\z:I. (z to *. w)"));
        // nested bodies stay put
        assert_eq!(nf("a to *. (b to *. w)"), t("a to *. (b to *. w)"));
        assert_eq!(nf("(a to *. b) to *. w"), t("a to *. (b to *. w)"));
    }

    #[test]
    fn steps_replay() {
        let start = t("(\\x:X. pm x to a*b. c(a * b)) (u to *. p)");
        let n = normalize(&start, 1000);
        assert!(!n.exhausted);
        let mut cur = start;
        for s in &n.steps {
            cur = apply_step(&cur, s).unwrap();
        }
        assert!(alpha_eq(&cur, &n.term));
        assert!(is_normal(&n.term));
    }

    #[test]
    fn budget_flag() {
        let n = normalize(&t("(\\x:X. (\\y:X. y) x) z"), 1);
        assert!(n.exhausted);
        assert_eq!(n.steps.len(), 1);
    }

    #[test]
    fn bad_steps_rejected() {
        let step = RewriteStep {
            eq: Fig3Eq::BetaLam,
            pos: vec![],
            detail: vec![],
        };
        assert!(apply_step(&t("f(a, b)"), &step).is_none());
        let step = RewriteStep {
            eq: Fig3Eq::CommuteUnit,
            pos: vec![],
            detail: vec![1],
        };
        assert!(apply_step(&t("a to *. (b to *. w)"), &step).is_none());
    }
}
