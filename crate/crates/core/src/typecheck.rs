//! Linear typing with explicit derivations.
//!
//! Multi-premise rules split the conclusion context by projecting it onto
//! the free variables of each premise's subterm; the shuffle witness is the
//! conclusion context itself. Under linearity this split is the only one
//! that can succeed, so the reconstructed derivation is the unique one.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::syntax::{is_shuffle, Context, LinType, Name, Term};
use crate::theory::Signature;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    Unbound(Name),
    #[error("variable `{0}` is used more than once")]
    UsedTwice(Name),
    #[error("variable `{0}` is never used")]
    Unused(Name),
    #[error("type mismatch in `{term}`: expected {expected}, found {found}")]
    Mismatch {
        term: String,
        expected: String,
        found: LinType,
    },
    #[error("unknown operation symbol `{0}`")]
    UnknownOperation(String),
    #[error("operation `{symbol}` expects {expected} arguments, got {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("binder `{0}` clashes with a variable already in the context")]
    BinderClash(Name),
    #[error("context position {0} is out of range")]
    Position(usize),
    #[error("variable clash: `{0}` occurs on both sides of the substitution")]
    VariableClash(Name),
    #[error("derivation does not have the expected shape: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Ax,
    Hyp,
    UnitIntro,
    UnitElim,
    TensorIntro,
    TensorElim,
    LolliIntro,
    LolliElim,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Ax => "ax",
            Rule::Hyp => "hyp",
            Rule::UnitIntro => "I_i",
            Rule::UnitElim => "I_e",
            Rule::TensorIntro => "*_i",
            Rule::TensorElim => "*_e",
            Rule::LolliIntro => "-o_i",
            Rule::LolliElim => "-o_e",
        })
    }
}

/// A derivation of `ctx ▷ term : ty`.
///
/// `split` holds the parts `Γ₁; …; Γₙ` for rules with a shuffle side
/// condition; the shuffle witness is `ctx`. For `*_e` the second part is
/// `Δ`, without the pattern variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub ctx: Context,
    pub term: Term,
    pub ty: LinType,
    pub rule: Rule,
    pub premises: Vec<Derivation>,
    pub split: Vec<Context>,
}

impl Derivation {
    /// Renders the derivation as an indented tree, conclusion first.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(0, &mut out);
        out
    }

    fn render_into(&self, depth: usize, out: &mut String) {
        use fmt::Write;
        let _ = writeln!(
            out,
            "{:indent$}({}) {} |- {} : {}",
            "",
            self.rule,
            self.ctx,
            self.term,
            self.ty,
            indent = depth * 2
        );
        for p in &self.premises {
            p.render_into(depth + 1, out);
        }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    /// Checks every node against its rule: types, linearity and the shuffle
    /// side condition.
    pub fn validate(&self, sig: &Signature) -> Result<(), TypeError> {
        let shape = |m: &str| Err(TypeError::Shape(format!("{m} at `{}`", self.term)));
        for p in &self.premises {
            p.validate(sig)?;
        }
        let prem_ty = |i: usize| &self.premises[i].ty;
        match (&self.rule, &self.term) {
            (Rule::Hyp, Term::Var(x)) => {
                if self.ctx.entries() != [(x.clone(), self.ty.clone())] {
                    return shape("hyp context");
                }
                return Ok(());
            }
            (Rule::UnitIntro, Term::Star) => {
                if !self.ctx.is_empty() || self.ty != LinType::Unit {
                    return shape("unit introduction");
                }
                return Ok(());
            }
            (Rule::LolliIntro, Term::Lam(x, a, body)) => {
                let p = &self.premises[0];
                let expect = self.ctx.extended(x.clone(), a.clone()).map_err(TypeError::BinderClash)?;
                if p.ctx != expect || *body.as_ref() != p.term || self.ty != LinType::lolli(a.clone(), p.ty.clone()) {
                    return shape("lambda premise");
                }
                return Ok(());
            }
            _ => {}
        }
        let parts_ok = is_shuffle(&self.ctx, &self.split) && self.split.len() == self.premises.len();
        if !parts_ok {
            return shape("shuffle witness");
        }
        let ok = match (&self.rule, &self.term) {
            (Rule::Ax, Term::Op(f, args)) => {
                let (sorts, result) = sig
                    .sort(f)
                    .ok_or_else(|| TypeError::UnknownOperation(f.to_string()))?;
                sorts.len() == args.len()
                    && self.ty == *result
                    && (0..args.len()).all(|i| {
                        self.premises[i].term == args[i]
                            && *prem_ty(i) == sorts[i]
                            && self.premises[i].ctx == self.split[i]
                    })
            }
            (Rule::UnitElim, Term::UnitLet(v, w))
            | (Rule::TensorIntro, Term::Pair(v, w))
            | (Rule::LolliElim, Term::App(v, w)) => {
                let terms = self.premises[0].term == **v && self.premises[1].term == **w;
                let ctxs = self.premises[0].ctx == self.split[0] && self.premises[1].ctx == self.split[1];
                let types = match self.rule {
                    Rule::UnitElim => *prem_ty(0) == LinType::Unit && *prem_ty(1) == self.ty,
                    Rule::TensorIntro => self.ty == LinType::tensor(prem_ty(0).clone(), prem_ty(1).clone()),
                    _ => *prem_ty(0) == LinType::lolli(prem_ty(1).clone(), self.ty.clone()),
                };
                terms && ctxs && types
            }
            (Rule::TensorElim, Term::PairLet(v, x, y, w)) => match prem_ty(0) {
                LinType::Tensor(a, b) => {
                    let body_ctx = self.split[1]
                        .extended(x.clone(), (**a).clone())
                        .and_then(|c| c.extended(y.clone(), (**b).clone()))
                        .map_err(TypeError::BinderClash)?;
                    self.premises[0].term == **v
                        && self.premises[1].term == **w
                        && self.premises[0].ctx == self.split[0]
                        && self.premises[1].ctx == body_ctx
                        && *prem_ty(1) == self.ty
                }
                _ => false,
            },
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            shape("rule instance")
        }
    }
}

/// Reconstructs the derivation of `ctx ▷ term`.
pub fn infer(sig: &Signature, ctx: &Context, term: &Term) -> Result<Derivation, TypeError> {
    let fv = term.free_vars();
    if let Some(x) = fv.iter().find(|x| !ctx.contains(x)) {
        return Err(TypeError::Unbound(x.clone()));
    }
    if let Some(x) = ctx.names().find(|x| !fv.contains(x)) {
        return Err(TypeError::Unused(x.clone()));
    }
    go(sig, ctx, term)
}

/// Like [`infer`], additionally requiring the given type.
pub fn check(sig: &Signature, ctx: &Context, term: &Term, ty: &LinType) -> Result<Derivation, TypeError> {
    let d = infer(sig, ctx, term)?;
    if d.ty != *ty {
        return Err(TypeError::Mismatch {
            term: term.to_string(),
            expected: ty.to_string(),
            found: d.ty,
        });
    }
    Ok(d)
}

fn split(ctx: &Context, subterms: &[&Term], bound: &[&[Name]]) -> Result<Vec<Context>, TypeError> {
    let fvs: Vec<Vec<Name>> = subterms
        .iter()
        .zip(bound)
        .map(|(t, b)| t.free_vars().into_iter().filter(|x| !b.contains(x)).collect())
        .collect();
    for x in ctx.names() {
        if fvs.iter().filter(|fv| fv.contains(x)).count() > 1 {
            return Err(TypeError::UsedTwice(x.clone()));
        }
    }
    Ok(fvs.iter().map(|fv| ctx.project(|x| fv.contains(x))).collect())
}

fn mismatch(term: &Term, expected: impl fmt::Display, found: &LinType) -> TypeError {
    TypeError::Mismatch {
        term: term.to_string(),
        expected: expected.to_string(),
        found: found.clone(),
    }
}

fn go(sig: &Signature, ctx: &Context, term: &Term) -> Result<Derivation, TypeError> {
    let node = |rule, ty, premises, split| Derivation {
        ctx: ctx.clone(),
        term: term.clone(),
        ty,
        rule,
        premises,
        split,
    };
    match term {
        Term::Var(x) => {
            let ty = ctx.lookup(x).ok_or_else(|| TypeError::Unbound(x.clone()))?;
            if ctx.len() != 1 {
                let other = ctx.names().find(|y| *y != x).cloned().unwrap_or_else(|| x.clone());
                return Err(TypeError::Unused(other));
            }
            Ok(node(Rule::Hyp, ty.clone(), vec![], vec![]))
        }
        Term::Star => Ok(node(Rule::UnitIntro, LinType::Unit, vec![], vec![])),
        Term::Op(f, args) => {
            let (sorts, result) = sig
                .sort(f)
                .ok_or_else(|| TypeError::UnknownOperation(f.to_string()))?;
            if sorts.len() != args.len() {
                return Err(TypeError::Arity {
                    symbol: f.to_string(),
                    expected: sorts.len(),
                    found: args.len(),
                });
            }
            let refs: Vec<&Term> = args.iter().collect();
            let none: Vec<&[Name]> = vec![&[]; args.len()];
            let parts = split(ctx, &refs, &none)?;
            let mut premises = Vec::with_capacity(args.len());
            for ((arg, part), sort) in args.iter().zip(&parts).zip(sorts) {
                let d = go(sig, part, arg)?;
                if d.ty != *sort {
                    return Err(mismatch(arg, sort, &d.ty));
                }
                premises.push(d);
            }
            Ok(node(Rule::Ax, result.clone(), premises, parts))
        }
        Term::UnitLet(v, w) => {
            let parts = split(ctx, &[v, w], &[&[], &[]])?;
            let dv = go(sig, &parts[0], v)?;
            if dv.ty != LinType::Unit {
                return Err(mismatch(v, "I", &dv.ty));
            }
            let dw = go(sig, &parts[1], w)?;
            Ok(node(Rule::UnitElim, dw.ty.clone(), vec![dv, dw], parts))
        }
        Term::Pair(v, w) => {
            let parts = split(ctx, &[v, w], &[&[], &[]])?;
            let dv = go(sig, &parts[0], v)?;
            let dw = go(sig, &parts[1], w)?;
            let ty = LinType::tensor(dv.ty.clone(), dw.ty.clone());
            Ok(node(Rule::TensorIntro, ty, vec![dv, dw], parts))
        }
        Term::PairLet(v, x, y, w) => {
            let binders = [x.clone(), y.clone()];
            let parts = split(ctx, &[v, w], &[&[], &binders])?;
            let dv = go(sig, &parts[0], v)?;
            let (a, b) = match &dv.ty {
                LinType::Tensor(a, b) => ((**a).clone(), (**b).clone()),
                other => return Err(mismatch(v, "a tensor type", other)),
            };
            for z in [x, y] {
                if !w.has_free(z) {
                    return Err(TypeError::Unused(z.clone()));
                }
            }
            let body_ctx = parts[1]
                .extended(x.clone(), a)
                .and_then(|c| c.extended(y.clone(), b))
                .map_err(TypeError::BinderClash)?;
            let dw = go(sig, &body_ctx, w)?;
            Ok(node(Rule::TensorElim, dw.ty.clone(), vec![dv, dw], parts))
        }
        Term::Lam(x, a, body) => {
            if !body.has_free(x) {
                return Err(TypeError::Unused(x.clone()));
            }
            let inner = ctx.extended(x.clone(), a.clone()).map_err(TypeError::BinderClash)?;
            let d = go(sig, &inner, body)?;
            let ty = LinType::lolli(a.clone(), d.ty.clone());
            Ok(node(Rule::LolliIntro, ty, vec![d], vec![]))
        }
        Term::App(f, a) => {
            let parts = split(ctx, &[f, a], &[&[], &[]])?;
            let df = go(sig, &parts[0], f)?;
            let da = go(sig, &parts[1], a)?;
            match &df.ty {
                LinType::Lolli(dom, cod) if **dom == da.ty => {
                    let ty = (**cod).clone();
                    Ok(node(Rule::LolliElim, ty, vec![df, da], parts))
                }
                LinType::Lolli(dom, _) => Err(mismatch(a, dom, &da.ty)),
                other => Err(mismatch(f, "a function type", other)),
            }
        }
    }
}

/// Transports `d` along the transposition of context positions `i` and
/// `i + 1`. The term is unchanged.
pub fn exchange(d: &Derivation, i: usize) -> Result<Derivation, TypeError> {
    let ctx = d.ctx.swapped(i).ok_or(TypeError::Position(i))?;
    let (x, y) = (d.ctx.entries()[i].0.clone(), d.ctx.entries()[i + 1].0.clone());
    let mut out = d.clone();
    out.ctx = ctx;
    match d.rule {
        Rule::Hyp | Rule::UnitIntro => return Err(TypeError::Position(i)),
        Rule::LolliIntro => {
            out.premises[0] = exchange(&d.premises[0], i)?;
        }
        _ => {
            let px = d.split.iter().position(|p| p.contains(&x));
            let py = d.split.iter().position(|p| p.contains(&y));
            if let (Some(p), Some(q)) = (px, py) {
                if p == q {
                    let j = d.split[p].position(&x).expect("variable in its part");
                    out.split[p] = d.split[p].swapped(j).ok_or(TypeError::Position(j))?;
                    out.premises[p] = exchange(&d.premises[p], j)?;
                }
            }
        }
    }
    Ok(out)
}

/// From `Γ, x:A ▷ v : B` and `Δ ▷ w : A`, derives `Γ, Δ ▷ v[w/x] : B`.
///
/// Fails with [`TypeError::VariableClash`] when `Δ` shares a name with `Γ`
/// or with a binder whose scope contains `x`; callers must freshen first.
pub fn subst_derivation(d1: &Derivation, d2: &Derivation) -> Result<Derivation, TypeError> {
    let (x, a) = d1
        .ctx
        .entries()
        .last()
        .cloned()
        .ok_or_else(|| TypeError::Shape("substitution needs a non-empty context".into()))?;
    if a != d2.ty {
        return Err(mismatch(&d2.term, &a, &d2.ty));
    }
    let delta: BTreeSet<Name> = d2.ctx.names().cloned().collect();
    for y in d1.ctx.names() {
        if *y != x && delta.contains(y) {
            return Err(TypeError::VariableClash(y.clone()));
        }
    }
    subst_in(d1, &x, d2, &delta)
}

fn replace_var(ctx: &Context, x: &Name, delta: &Context) -> Context {
    let mut out = Vec::new();
    for (y, t) in ctx.entries() {
        if y == x {
            out.extend(delta.entries().iter().cloned());
        } else {
            out.push((y.clone(), t.clone()));
        }
    }
    Context::new(out).expect("disjointness checked by caller")
}

fn subst_in(d: &Derivation, x: &Name, d2: &Derivation, delta: &BTreeSet<Name>) -> Result<Derivation, TypeError> {
    if d.rule == Rule::Hyp {
        return Ok(d2.clone());
    }
    let check_binder = |b: &Name| {
        if delta.contains(b) {
            Err(TypeError::VariableClash(b.clone()))
        } else {
            Ok(())
        }
    };
    let mut out = d.clone();
    out.ctx = replace_var(&d.ctx, x, &d2.ctx);
    match (&d.rule, &d.term) {
        (Rule::LolliIntro, Term::Lam(b, ty, _)) => {
            check_binder(b)?;
            let p = subst_in(&d.premises[0], x, d2, delta)?;
            out.term = Term::lam(b.clone(), ty.clone(), p.term.clone());
            out.premises = vec![p];
        }
        _ => {
            let idx = d
                .split
                .iter()
                .position(|p| p.contains(x))
                .ok_or_else(|| TypeError::Shape(format!("`{x}` not found in any part")))?;
            if let Term::PairLet(_, a, b, _) = &d.term {
                if idx == 1 {
                    check_binder(a)?;
                    check_binder(b)?;
                }
            }
            let p = subst_in(&d.premises[idx], x, d2, delta)?;
            out.split[idx] = replace_var(&d.split[idx], x, &d2.ctx);
            out.premises[idx] = p;
            let child = out.premises[idx].term.clone();
            out.term = d
                .term
                .with_child(idx, child)
                .ok_or_else(|| TypeError::Shape("premise index".into()))?;
        }
    }
    Ok(out)
}
