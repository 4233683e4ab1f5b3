//! Random generators and brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vlam_core::quantale::Extended;
use vlam_core::typecheck::Rule;
use vlam_core::{Context, Derivation, FinVCat, LinType, Name, QValue, QuantaleSpec, Signature, Term};

pub fn theory_path(file: &str) -> String {
    format!("{}/../../theories/{file}", env!("CARGO_MANIFEST_DIR"))
}

pub fn read_theory_file(file: &str, n: Option<usize>) -> String {
    let text = std::fs::read_to_string(theory_path(file)).unwrap();
    match n {
        Some(n) => text
            .lines()
            .map(|l| if l.starts_with("let N = ") { format!("let N = {n}") } else { l.to_string() })
            .collect::<Vec<_>>()
            .join("\n"),
        None => text,
    }
}

pub fn x() -> LinType {
    LinType::ground("X")
}

pub fn var(x: &Name) -> Term {
    Term::Var(x.clone())
}

/// Type-directed generator of well-typed terms over a ground `X`.
///
/// Every variable handed to [`Gen::term`] is used exactly once. Generation
/// may fail (`None`) when the signature cannot close off a branch, e.g.
/// a closed term of type `X` without constants.
pub struct Gen {
    pub rng: ChaCha8Rng,
    pub unary: Vec<String>,
    pub binary: Option<String>,
    pub constant: Option<String>,
    pub higher_order: bool,
    fresh: usize,
}

type Vars = Vec<(Name, LinType)>;

impl Gen {
    pub fn new(rng: ChaCha8Rng, unary: Vec<String>) -> Self {
        Gen {
            rng,
            unary,
            binary: None,
            constant: None,
            higher_order: true,
            fresh: 0,
        }
    }

    pub fn name(&mut self, stem: &str) -> Name {
        self.fresh += 1;
        Name::new(&format!("{stem}{}", self.fresh))
    }

    pub fn small_type(&mut self) -> LinType {
        let choices = if self.higher_order { 5 } else { 3 };
        match self.rng.gen_range(0..choices) {
            0 | 1 => x(),
            2 => LinType::Unit,
            3 => LinType::tensor(x(), x()),
            _ => LinType::lolli(x(), x()),
        }
    }

    /// A context of `n` variables named with `stem`.
    pub fn context(&mut self, stem: &str, n: usize) -> Vars {
        (0..n).map(|_| (self.name(stem), self.small_type())).collect()
    }

    fn split(&mut self, vars: Vars) -> (Vars, Vars) {
        let mut l = Vec::new();
        let mut r = Vec::new();
        for v in vars {
            if self.rng.gen_bool(0.5) {
                l.push(v);
            } else {
                r.push(v);
            }
        }
        (l, r)
    }

    pub fn term(&mut self, vars: Vars, ty: &LinType, fuel: usize) -> Option<Term> {
        match ty {
            LinType::Lolli(a, b) => {
                let z = self.name("l");
                let mut inner = vars;
                inner.push((z.clone(), (**a).clone()));
                Some(Term::lam(z, (**a).clone(), self.term(inner, b, fuel)?))
            }
            LinType::Tensor(a, b) => {
                let (l, r) = self.split(vars);
                let half = fuel / 2;
                Some(Term::pair(self.term(l, a, half)?, self.term(r, b, half)?))
            }
            LinType::Unit => match vars.split_first() {
                None => Some(Term::Star),
                Some(((z, LinType::Unit), rest)) => Some(Term::unit_let(var(z), self.term(rest.to_vec(), ty, fuel)?)),
                Some(_) => None,
            },
            LinType::Ground(_) => self.ground(vars, fuel),
        }
    }

    fn ground(&mut self, mut vars: Vars, fuel: usize) -> Option<Term> {
        if let [(z, t)] = vars.as_slice() {
            if *t == x() && (fuel == 0 || self.rng.gen_bool(0.3)) {
                return Some(var(z));
            }
        }
        let non_x: Vec<usize> = (0..vars.len()).filter(|&i| vars[i].1 != x()).collect();
        if !non_x.is_empty() && (fuel == 0 || self.rng.gen_bool(0.5)) {
            let i = *non_x.choose(&mut self.rng).unwrap();
            let (z, t) = vars.remove(i);
            return self.eliminate(z, t, vars, fuel);
        }
        let mut options = vec![0, 1, 2, 3, 4];
        options.shuffle(&mut self.rng);
        for o in options {
            let spent = fuel == 0;
            let fuel = fuel.saturating_sub(1);
            let got = match o {
                0 if !spent && !self.unary.is_empty() => {
                    let f = self.unary.choose(&mut self.rng).unwrap().clone();
                    self.ground(vars.clone(), fuel).map(|t| Term::op(&f, vec![t]))
                }
                1 if self.binary.is_some() && (!spent || vars.len() >= 2) => {
                    let g = self.binary.clone().unwrap();
                    let (mut l, mut r) = self.split(vars.clone());
                    if spent && (l.is_empty() || r.is_empty()) {
                        // at fuel 0 both halves must shrink
                        let all: Vars = l.drain(..).chain(r.drain(..)).collect();
                        let cut = self.rng.gen_range(1..all.len());
                        l = all[..cut].to_vec();
                        r = all[cut..].to_vec();
                    }
                    let a = self.ground(l, fuel / 2);
                    let b = self.ground(r, fuel / 2);
                    a.zip(b).map(|(a, b)| Term::op(&g, vec![a, b]))
                }
                2 if vars.is_empty() && self.constant.is_some() => {
                    Some(Term::op(self.constant.as_ref().unwrap(), vec![Term::Star]))
                }
                3 if self.higher_order && !spent => {
                    // (λw:X. body) arg
                    let (l, r) = self.split(vars.clone());
                    let w = self.name("w");
                    let arg = self.ground(l, fuel / 2);
                    let mut inner = r;
                    inner.push((w.clone(), x()));
                    let body = self.ground(inner, fuel / 2);
                    arg.zip(body).map(|(a, b)| Term::app(Term::lam(w, x(), b), a))
                }
                4 if !spent && self.rng.gen_bool(0.3) => {
                    self.ground(vars.clone(), fuel).map(|t| Term::unit_let(Term::Star, t))
                }
                _ => None,
            };
            if got.is_some() {
                return got;
            }
        }
        None
    }

    /// Consumes `z : t` and the remaining `rest`, producing a term of type X.
    fn eliminate(&mut self, z: Name, t: LinType, rest: Vars, fuel: usize) -> Option<Term> {
        match t {
            LinType::Unit => Some(Term::unit_let(var(&z), self.ground(rest, fuel)?)),
            LinType::Tensor(a, b) => {
                let (p, q) = (self.name("p"), self.name("q"));
                let mut inner = rest;
                inner.push((p.clone(), *a));
                inner.push((q.clone(), *b));
                inner.shuffle(&mut self.rng);
                Some(Term::pair_let(var(&z), p, q, self.ground(inner, fuel)?))
            }
            LinType::Lolli(a, b) => {
                let (l, r) = self.split(rest);
                let arg = self.term(l, &a, fuel / 2)?;
                let applied = Term::app(var(&z), arg);
                if *b == x() && r.is_empty() {
                    return Some(applied);
                }
                let w = self.name("w");
                let mut inner = r;
                inner.push((w.clone(), (*b).clone()));
                Some(Term::app(Term::lam(w, *b, self.ground(inner, fuel / 2)?), applied))
            }
            LinType::Ground(_) => None,
        }
    }

    /// A random judgement `Γ ▷ v : A` with at most `max_vars` variables.
    pub fn judgement(&mut self, max_vars: usize, fuel: usize) -> (Context, Term, LinType) {
        loop {
            let n = self.rng.gen_range(0..=max_vars);
            let vars = self.context("x", n);
            let ty = match self.rng.gen_range(0..4) {
                0 => LinType::tensor(x(), x()),
                1 if self.higher_order => LinType::lolli(x(), x()),
                _ => x(),
            };
            if let Some(t) = self.term(vars.clone(), &ty, fuel) {
                return (Context::new(vars).unwrap(), t, ty);
            }
        }
    }

    /// Replaces each `wait_i` by a random `wait_j` with probability 1/2.
    pub fn mutate_waits(&mut self, t: &Term, n: usize) -> Term {
        match t {
            Term::Op(f, args) => {
                let args = args.iter().map(|a| self.mutate_waits(a, n)).collect();
                let f = if f.starts_with("wait_") && self.rng.gen_bool(0.5) {
                    format!("wait_{}", self.rng.gen_range(0..=n))
                } else {
                    f.to_string()
                };
                Term::op(&f, args)
            }
            Term::Var(_) | Term::Star => t.clone(),
            Term::UnitLet(a, b) => Term::unit_let(self.mutate_waits(a, n), self.mutate_waits(b, n)),
            Term::Pair(a, b) => Term::pair(self.mutate_waits(a, n), self.mutate_waits(b, n)),
            Term::PairLet(a, p, q, b) => Term::pair_let(self.mutate_waits(a, n), p.clone(), q.clone(), self.mutate_waits(b, n)),
            Term::Lam(z, ty, b) => Term::lam(z.clone(), ty.clone(), self.mutate_waits(b, n)),
            Term::App(a, b) => Term::app(self.mutate_waits(a, n), self.mutate_waits(b, n)),
        }
    }
}

/// All assignments of the context entries to `k` ordered parts. Each part
/// keeps the context order, so the context is a shuffle of the parts; every
/// shuffle decomposition arises exactly once.
fn splits(ctx: &Context, k: usize) -> Vec<Vec<Context>> {
    let n = ctx.len();
    let total = k.checked_pow(n as u32).unwrap();
    (0..total)
        .map(|mut code| {
            let mut parts = vec![Vec::new(); k];
            for e in ctx.entries() {
                parts[code % k].push(e.clone());
                code /= k;
            }
            parts.into_iter().map(|p| Context::new(p).unwrap()).collect()
        })
        .collect()
}

fn product(lists: Vec<Vec<Derivation>>) -> Vec<Vec<Derivation>> {
    let mut out = vec![Vec::new()];
    for l in lists {
        let mut next = Vec::new();
        for prefix in &out {
            for d in &l {
                let mut p = prefix.clone();
                p.push(d.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Every derivation of `ctx ▷ term`, found by trying all context splits at
/// every multi-premise rule.
pub fn all_derivations(sig: &Signature, ctx: &Context, term: &Term) -> Vec<Derivation> {
    derivations(sig, ctx, term, &mut HashMap::new())
}

type Memo = HashMap<(Context, Term), Vec<Derivation>>;

/// Every split is still tried; the memo only shares the results for a
/// sub-context and subterm met along different splits.
fn derivations(sig: &Signature, ctx: &Context, term: &Term, memo: &mut Memo) -> Vec<Derivation> {
    let key = (ctx.clone(), term.clone());
    if let Some(d) = memo.get(&key) {
        return d.clone();
    }
    let out = derivations_at(sig, ctx, term, memo);
    memo.insert(key, out.clone());
    out
}

fn derivations_at(sig: &Signature, ctx: &Context, term: &Term, memo: &mut Memo) -> Vec<Derivation> {
    let node = |rule, ty, premises, split| Derivation {
        ctx: ctx.clone(),
        term: term.clone(),
        ty,
        rule,
        premises,
        split,
    };
    let mut out = Vec::new();
    match term {
        Term::Var(z) => {
            if let [(y, ty)] = ctx.entries() {
                if y == z {
                    out.push(node(Rule::Hyp, ty.clone(), vec![], vec![]));
                }
            }
        }
        Term::Star => {
            if ctx.is_empty() {
                out.push(node(Rule::UnitIntro, LinType::Unit, vec![], vec![]));
            }
        }
        Term::Lam(z, a, body) => {
            if let Ok(inner) = ctx.extended(z.clone(), a.clone()) {
                for p in derivations(sig, &inner, body, memo) {
                    let ty = LinType::lolli(a.clone(), p.ty.clone());
                    out.push(node(Rule::LolliIntro, ty, vec![p], vec![]));
                }
            }
        }
        Term::Op(f, args) => {
            let Some((sorts, result)) = sig.sort(f) else { return out };
            if sorts.len() != args.len() {
                return out;
            }
            for parts in splits(ctx, args.len()) {
                let lists: Vec<Vec<Derivation>> = args
                    .iter()
                    .zip(&parts)
                    .zip(sorts)
                    .map(|((a, p), s)| derivations(sig, p, a, memo).into_iter().filter(|d| d.ty == *s).collect())
                    .collect();
                for ps in product(lists) {
                    out.push(node(Rule::Ax, result.clone(), ps, parts.clone()));
                }
            }
        }
        Term::UnitLet(v, w) | Term::Pair(v, w) | Term::App(v, w) => {
            for parts in splits(ctx, 2) {
                let dv = derivations(sig, &parts[0], v, memo);
                let dw = derivations(sig, &parts[1], w, memo);
                for a in &dv {
                    for b in &dw {
                        let (rule, ty) = match term {
                            Term::UnitLet(..) if a.ty == LinType::Unit => (Rule::UnitElim, b.ty.clone()),
                            Term::Pair(..) => (Rule::TensorIntro, LinType::tensor(a.ty.clone(), b.ty.clone())),
                            Term::App(..) => match &a.ty {
                                LinType::Lolli(dom, cod) if **dom == b.ty => (Rule::LolliElim, (**cod).clone()),
                                _ => continue,
                            },
                            _ => continue,
                        };
                        out.push(node(rule, ty, vec![a.clone(), b.clone()], parts.clone()));
                    }
                }
            }
        }
        Term::PairLet(v, p, q, w) => {
            for parts in splits(ctx, 2) {
                for a in derivations(sig, &parts[0], v, memo) {
                    let LinType::Tensor(l, r) = &a.ty else { continue };
                    let Ok(body) = parts[1]
                        .extended(p.clone(), (**l).clone())
                        .and_then(|c| c.extended(q.clone(), (**r).clone()))
                    else {
                        continue;
                    };
                    for b in derivations(sig, &body, w, memo) {
                        out.push(node(Rule::TensorElim, b.ty.clone(), vec![a.clone(), b], parts.clone()));
                    }
                }
            }
        }
    }
    out
}

/// A random value of the quantale, from a small rational grid plus ⊤ and
/// ⊥.
pub fn random_value(rng: &mut ChaCha8Rng, spec: QuantaleSpec) -> QValue {
    match rng.gen_range(0..10) {
        0 => return spec.top(),
        1 => return spec.bottom(),
        _ => {}
    }
    match spec {
        QuantaleSpec::Boolean => {
            if rng.gen_bool(0.5) {
                spec.top()
            } else {
                spec.bottom()
            }
        }
        QuantaleSpec::Godel => {
            let d = rng.gen_range(1..=12i64);
            spec.ratio(rng.gen_range(0..=d), d).unwrap()
        }
        QuantaleSpec::Lawvere | QuantaleSpec::Ultrametric => {
            let d = rng.gen_range(1..=6i64);
            spec.ratio(rng.gen_range(0..=4 * d), d).unwrap()
        }
    }
}

/// A random finite V-category: random distances closed under
/// `a(x,z) ≥ a(x,y) ⊗ a(y,z)` by a Floyd–Warshall pass.
pub fn random_vcat(rng: &mut ChaCha8Rng, spec: QuantaleSpec, n: usize, symmetric: bool) -> FinVCat {
    let mut t: Vec<QValue> = vec![spec.bottom(); n * n];
    for i in 0..n {
        for j in 0..n {
            t[i * n + j] = if i == j {
                spec.top()
            } else if symmetric && j < i {
                t[j * n + i].clone()
            } else if rng.gen_bool(0.25) {
                // encourage distance-top pairs so quotients are non-trivial
                spec.top()
            } else {
                random_value(rng, spec)
            };
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = t[i * n + k].tensor(&t[k * n + j]).unwrap();
                t[i * n + j] = t[i * n + j].join2(&via).unwrap();
            }
        }
    }
    let carrier = (0..n).map(|i| format!("p{i}")).collect();
    FinVCat::new(spec, carrier, t).unwrap()
}

pub fn rational(q: &QValue) -> Option<BigRational> {
    match q.raw() {
        Extended::Finite(r) => Some(r.clone()),
        _ => None,
    }
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}
