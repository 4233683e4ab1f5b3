//! Abstract syntax of the linear λ-calculus: types, terms and typing
//! contexts, with capture-avoiding substitution and α-equivalence.

mod parse;
mod print;
mod shuffle;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub use parse::{parse_context, parse_term, parse_type, ParseEnv, SyntaxError};
pub use shuffle::{enumerate_shuffles, is_shuffle, ShuffleError, DEFAULT_SHUFFLE_LIMIT};

/// A variable name. Names produced by renaming carry a `'N` suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<str>);

static FRESH: AtomicUsize = AtomicUsize::new(1);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The user-written part of the name, without any renaming suffix.
    pub fn stem(&self) -> &str {
        self.0.split('\'').next().unwrap_or(&self.0)
    }

    /// A globally fresh variant of this name that avoids `avoid`.
    pub fn fresh(&self, avoid: &dyn Fn(&Name) -> bool) -> Name {
        loop {
            let n = FRESH.fetch_add(1, Ordering::Relaxed);
            let cand = Name::new(&format!("{}'{}", self.stem(), n));
            if !avoid(&cand) {
                return cand;
            }
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

/// `A ::= X | I | A ⊗ A | A ⊸ A`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinType {
    Ground(Arc<str>),
    Unit,
    Tensor(Box<LinType>, Box<LinType>),
    Lolli(Box<LinType>, Box<LinType>),
}

impl LinType {
    pub fn ground(name: &str) -> Self {
        LinType::Ground(Arc::from(name))
    }

    pub fn tensor(a: LinType, b: LinType) -> Self {
        LinType::Tensor(Box::new(a), Box::new(b))
    }

    pub fn lolli(a: LinType, b: LinType) -> Self {
        LinType::Lolli(Box::new(a), Box::new(b))
    }

    pub fn grounds(&self, out: &mut BTreeSet<String>) {
        match self {
            LinType::Ground(g) => {
                out.insert(g.to_string());
            }
            LinType::Unit => {}
            LinType::Tensor(a, b) | LinType::Lolli(a, b) => {
                a.grounds(out);
                b.grounds(out);
            }
        }
    }
}

/// Terms of the calculus.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Name),
    Op(Arc<str>, Vec<Term>),
    Star,
    /// `v to *. w`
    UnitLet(Box<Term>, Box<Term>),
    /// `v * w`
    Pair(Box<Term>, Box<Term>),
    /// `pm v to x*y. w`
    PairLet(Box<Term>, Name, Name, Box<Term>),
    Lam(Name, LinType, Box<Term>),
    App(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Name::new(name))
    }

    pub fn op(symbol: &str, args: Vec<Term>) -> Term {
        Term::Op(Arc::from(symbol), args)
    }

    pub fn unit_let(v: Term, w: Term) -> Term {
        Term::UnitLet(Box::new(v), Box::new(w))
    }

    pub fn pair(v: Term, w: Term) -> Term {
        Term::Pair(Box::new(v), Box::new(w))
    }

    pub fn pair_let(v: Term, x: Name, y: Name, w: Term) -> Term {
        Term::PairLet(Box::new(v), x, y, Box::new(w))
    }

    pub fn lam(x: Name, ty: LinType, body: Term) -> Term {
        Term::Lam(x, ty, Box::new(body))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Immediate subterms in position order. For eliminators the scrutinee
    /// is child 0 and the body child 1.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Star => vec![],
            Term::Op(_, args) => args.iter().collect(),
            Term::UnitLet(a, b) | Term::Pair(a, b) | Term::App(a, b) | Term::PairLet(a, _, _, b) => {
                vec![a, b]
            }
            Term::Lam(_, _, b) => vec![b],
        }
    }

    pub fn child(&self, i: usize) -> Option<&Term> {
        self.children().get(i).copied()
    }

    /// Variables bound by `self` around child `i`.
    pub fn binders_of_child(&self, i: usize) -> Vec<&Name> {
        match (self, i) {
            (Term::PairLet(_, x, y, _), 1) => vec![x, y],
            (Term::Lam(x, _, _), 0) => vec![x],
            _ => vec![],
        }
    }

    /// Replaces child `i`, returning `None` when out of range.
    pub fn with_child(&self, i: usize, new: Term) -> Option<Term> {
        let mut t = self.clone();
        let slot: &mut Term = match (&mut t, i) {
            (Term::Op(_, args), i) if i < args.len() => &mut args[i],
            (Term::UnitLet(a, _), 0)
            | (Term::Pair(a, _), 0)
            | (Term::App(a, _), 0)
            | (Term::PairLet(a, _, _, _), 0) => a,
            (Term::UnitLet(_, b), 1)
            | (Term::Pair(_, b), 1)
            | (Term::App(_, b), 1)
            | (Term::PairLet(_, _, _, b), 1) => b,
            (Term::Lam(_, _, b), 0) => b,
            _ => return None,
        };
        *slot = new;
        Some(t)
    }

    pub fn at(&self, pos: &[usize]) -> Option<&Term> {
        pos.iter().try_fold(self, |t, &i| t.child(i))
    }

    pub fn replace_at(&self, pos: &[usize], new: Term) -> Option<Term> {
        match pos.split_first() {
            None => Some(new),
            Some((&i, rest)) => {
                let c = self.child(i)?.replace_at(rest, new)?;
                self.with_child(i, c)
            }
        }
    }

    /// Free variables in left-to-right order of first occurrence.
    pub fn free_vars(&self) -> Vec<Name> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) && !out.contains(x) {
                    out.push(x.clone());
                }
            }
            Term::Star => {}
            Term::Op(_, args) => args.iter().for_each(|a| a.collect_free(bound, out)),
            Term::UnitLet(a, b) | Term::Pair(a, b) | Term::App(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Term::PairLet(a, x, y, b) => {
                a.collect_free(bound, out);
                bound.push(x.clone());
                bound.push(y.clone());
                b.collect_free(bound, out);
                bound.truncate(bound.len() - 2);
            }
            Term::Lam(x, _, b) => {
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn has_free(&self, x: &Name) -> bool {
        self.occurrences(x) > 0
    }

    /// Number of free occurrences of `x`.
    pub fn occurrences(&self, x: &Name) -> usize {
        match self {
            Term::Var(y) => (x == y) as usize,
            Term::Star => 0,
            Term::Op(_, args) => args.iter().map(|a| a.occurrences(x)).sum(),
            Term::UnitLet(a, b) | Term::Pair(a, b) | Term::App(a, b) => {
                a.occurrences(x) + b.occurrences(x)
            }
            Term::PairLet(a, y, z, b) => {
                a.occurrences(x) + if x == y || x == z { 0 } else { b.occurrences(x) }
            }
            Term::Lam(y, _, b) => {
                if x == y {
                    0
                } else {
                    b.occurrences(x)
                }
            }
        }
    }

    /// All names occurring anywhere, bound or free.
    pub fn all_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::PairLet(_, x, y, _) => {
                out.insert(x.clone());
                out.insert(y.clone());
            }
            Term::Lam(x, _, _) => {
                out.insert(x.clone());
            }
            _ => {}
        }
        for c in self.children() {
            c.all_names(out);
        }
    }

    /// Operation symbols used by the term.
    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        if let Term::Op(f, _) = self {
            out.insert(f.to_string());
        }
        for c in self.children() {
            c.symbols(out);
        }
    }
}

/// Capture-avoiding substitution `v[w/x]`.
pub fn substitute(v: &Term, x: &Name, w: &Term) -> Term {
    let mut map = HashMap::new();
    map.insert(x.clone(), w.clone());
    subst_many(v, &map)
}

/// Simultaneous capture-avoiding substitution.
pub fn subst_many(v: &Term, map: &HashMap<Name, Term>) -> Term {
    if map.is_empty() {
        return v.clone();
    }
    match v {
        Term::Var(y) => map.get(y).cloned().unwrap_or_else(|| v.clone()),
        Term::Star => Term::Star,
        Term::Op(f, args) => Term::Op(f.clone(), args.iter().map(|a| subst_many(a, map)).collect()),
        Term::UnitLet(a, b) => Term::unit_let(subst_many(a, map), subst_many(b, map)),
        Term::Pair(a, b) => Term::pair(subst_many(a, map), subst_many(b, map)),
        Term::App(a, b) => Term::app(subst_many(a, map), subst_many(b, map)),
        Term::Lam(y, ty, body) => {
            let (names, body) = under_binders(std::slice::from_ref(y), body, map);
            Term::lam(names[0].clone(), ty.clone(), body)
        }
        Term::PairLet(a, y, z, body) => {
            let a = subst_many(a, map);
            let (names, body) = under_binders(&[y.clone(), z.clone()], body, map);
            Term::pair_let(a, names[0].clone(), names[1].clone(), body)
        }
    }
}

fn under_binders(binders: &[Name], body: &Term, map: &HashMap<Name, Term>) -> (Vec<Name>, Term) {
    let mut inner: HashMap<Name, Term> = map
        .iter()
        .filter(|(k, _)| !binders.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if inner.is_empty() {
        return (binders.to_vec(), body.clone());
    }
    let mut incoming: BTreeSet<Name> = BTreeSet::new();
    for (k, t) in &inner {
        if body.has_free(k) {
            incoming.extend(t.free_vars());
        }
    }
    let mut names = Vec::with_capacity(binders.len());
    for b in binders {
        if incoming.contains(b) {
            let body_fv = body.free_vars();
            let fresh = b.fresh(&|c| incoming.contains(c) || body_fv.contains(c) || binders.contains(c));
            inner.insert(b.clone(), Term::Var(fresh.clone()));
            names.push(fresh);
        } else {
            names.push(b.clone());
        }
    }
    (names, subst_many(body, &inner))
}

/// Structural equality modulo renaming of bound variables.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn go<'a>(a: &'a Term, b: &'a Term, env: &mut Vec<(&'a Name, &'a Name)>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                for (l, r) in env.iter().rev() {
                    if *l == x || *r == y {
                        return *l == x && *r == y;
                    }
                }
                x == y
            }
            (Term::Star, Term::Star) => true,
            (Term::Op(f, xs), Term::Op(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| go(x, y, env))
            }
            (Term::UnitLet(a1, b1), Term::UnitLet(a2, b2))
            | (Term::Pair(a1, b1), Term::Pair(a2, b2))
            | (Term::App(a1, b1), Term::App(a2, b2)) => go(a1, a2, env) && go(b1, b2, env),
            (Term::Lam(x, t1, b1), Term::Lam(y, t2, b2)) => {
                if t1 != t2 {
                    return false;
                }
                env.push((x, y));
                let r = go(b1, b2, env);
                env.pop();
                r
            }
            (Term::PairLet(a1, x1, y1, b1), Term::PairLet(a2, x2, y2, b2)) => {
                if !go(a1, a2, env) {
                    return false;
                }
                env.push((x1, x2));
                env.push((y1, y2));
                let r = go(b1, b2, env);
                env.truncate(env.len() - 2);
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// An ordered, duplicate-free list of typed variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Context(Vec<(Name, LinType)>);

impl Context {
    pub fn empty() -> Self {
        Context(Vec::new())
    }

    /// Builds a context, returning the first duplicated name on failure.
    pub fn new(entries: Vec<(Name, LinType)>) -> Result<Self, Name> {
        for (i, (x, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(y, _)| y == x) {
                return Err(x.clone());
            }
        }
        Ok(Context(entries))
    }

    pub fn entries(&self) -> &[(Name, LinType)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.0.iter().map(|(x, _)| x)
    }

    pub fn contains(&self, x: &Name) -> bool {
        self.0.iter().any(|(y, _)| y == x)
    }

    pub fn lookup(&self, x: &Name) -> Option<&LinType> {
        self.0.iter().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    pub fn position(&self, x: &Name) -> Option<usize> {
        self.0.iter().position(|(y, _)| y == x)
    }

    /// Appends a variable; fails if the name is already present.
    pub fn extended(&self, x: Name, ty: LinType) -> Result<Self, Name> {
        if self.contains(&x) {
            return Err(x);
        }
        let mut v = self.0.clone();
        v.push((x, ty));
        Ok(Context(v))
    }

    /// The sub-context of variables satisfying `keep`, in order.
    pub fn project(&self, keep: impl Fn(&Name) -> bool) -> Self {
        Context(self.0.iter().filter(|(x, _)| keep(x)).cloned().collect())
    }

    /// Concatenation; fails on a shared name.
    pub fn concat(&self, other: &Context) -> Result<Self, Name> {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Context::new(v)
    }

    pub fn swapped(&self, i: usize) -> Option<Self> {
        if i + 1 >= self.0.len() {
            return None;
        }
        let mut v = self.0.clone();
        v.swap(i, i + 1);
        Some(Context(v))
    }

    /// Same variables and types, possibly reordered.
    pub fn is_permutation_of(&self, other: &Context) -> bool {
        self.len() == other.len() && self.0.iter().all(|(x, t)| other.lookup(x) == Some(t))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for (i, (x, t)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}:{t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> LinType {
        LinType::ground("X")
    }

    #[test]
    fn substitution_hits_and_misses() {
        let xn = Name::new("x");
        assert_eq!(substitute(&Term::var("x"), &xn, &Term::Star), Term::Star);
        assert_eq!(substitute(&Term::var("y"), &xn, &Term::Star), Term::var("y"));
    }

    #[test]
    fn substitution_avoids_capture() {
        let t = Term::lam(Name::new("y"), x(), Term::var("x"));
        let r = substitute(&t, &Name::new("x"), &Term::var("y"));
        match &r {
            Term::Lam(b, _, body) => {
                assert_ne!(b.as_str(), "y");
                assert_eq!(b.stem(), "y");
                assert_eq!(**body, Term::var("y"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(r.free_vars(), vec![Name::new("y")]);
    }

    #[test]
    fn substitution_respects_shadowing() {
        let t = Term::lam(Name::new("x"), x(), Term::var("x"));
        assert_eq!(substitute(&t, &Name::new("x"), &Term::Star), t);
    }

    #[test]
    fn alpha_equivalence() {
        let id_x = Term::lam(Name::new("x"), x(), Term::var("x"));
        let id_y = Term::lam(Name::new("y"), x(), Term::var("y"));
        assert!(alpha_eq(&id_x, &id_y));
        let a = Term::lam(
            Name::new("x"),
            x(),
            Term::lam(Name::new("y"), x(), Term::pair(Term::var("x"), Term::var("y"))),
        );
        let b = Term::lam(
            Name::new("y"),
            x(),
            Term::lam(Name::new("x"), x(), Term::pair(Term::var("y"), Term::var("x"))),
        );
        assert!(alpha_eq(&a, &b));
        assert!(!alpha_eq(&Term::var("x"), &Term::var("y")));
        // λx.λy. x vs λy.λy. y must differ
        let c = Term::lam(Name::new("x"), x(), Term::lam(Name::new("y"), x(), Term::var("x")));
        let d = Term::lam(Name::new("y"), x(), Term::lam(Name::new("y"), x(), Term::var("y")));
        assert!(!alpha_eq(&c, &d));
    }

    #[test]
    fn positions() {
        let t = Term::op("f", vec![Term::var("a"), Term::pair(Term::var("b"), Term::Star)]);
        assert_eq!(t.at(&[1, 0]), Some(&Term::var("b")));
        let r = t.replace_at(&[1, 1], Term::var("c")).unwrap();
        assert_eq!(r.at(&[1, 1]), Some(&Term::var("c")));
        assert!(t.replace_at(&[2], Term::Star).is_none());
    }

    #[test]
    fn context_rejects_duplicates() {
        let c = Context::new(vec![(Name::new("x"), x()), (Name::new("x"), x())]);
        assert_eq!(c, Err(Name::new("x")));
    }
}
