//! Finite enriched models of a theory.
//!
//! A judgement `Γ ▷ v : A` denotes a morphism `⟦Γ⟧ → ⟦A⟧` by structural
//! recursion on its typing derivation. Contexts are interpreted as
//! left-nested tensors `((⟦A₁⟧ ⊗ ⟦A₂⟧) ⊗ …) ⊗ ⟦Aₙ⟧`, the empty context as
//! `I`. Two backends are provided: [`FinMet`], whose morphisms are
//! non-expansive maps between finite V-categories, and [`FinMeas`], whose
//! morphisms are short linear maps between finite-dimensional spaces of
//! signed measures.

mod file;
mod finmeas;
mod finmet;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::deduction::{replay, ProofTrace, ReplayError};
use crate::quantale::{QValue, QuantaleError, QuantaleSpec};
use crate::syntax::{Context, LinType, Name, Term};
use crate::theory::{Signature, Theory};
use crate::typecheck::{self, Derivation, Rule, TypeError};
use crate::vcat::VCatError;

pub use file::load_model;
pub use finmeas::{FinMeas, Matrix, MeasMor, MeasObj, TvNorm};
pub use finmet::{enumerate_hom_object, FinMet, MetMor, MetObj, Val};

/// Default bound on `|B|^|A|` when enumerating a FinMet hom object.
pub const DEFAULT_HOM_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("`{0}` is not interpreted by the model")]
    Uninterpreted(String),
    #[error("line {line}: {msg}")]
    File { line: usize, msg: String },
    #[error("morphisms are not parallel")]
    NotParallel,
    #[error("composition mismatch: {0}")]
    Mismatch(String),
    #[error("hom object has {count} candidate tables, above the limit {limit}")]
    HomTooLarge { count: String, limit: usize },
    #[error("`{op}` is not a legal arrow: {reason}")]
    Illegal { op: String, reason: String },
    #[error("model quantale {model} differs from theory quantale {theory}")]
    QuantaleMismatch { model: QuantaleSpec, theory: QuantaleSpec },
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    VCat(#[from] VCatError),
    #[error(transparent)]
    Quantale(#[from] QuantaleError),
    #[error("trace rejected: {0}")]
    Replay(#[from] ReplayError),
}

/// A tensor expression over named leaves. Structural isomorphisms
/// (`spl`, `join`, `exch`, `sh`, unitors, `α`, `sw`) are all rearrangements
/// of one shape into another with the same leaves.
#[derive(Debug, Clone)]
pub enum Shape<O> {
    Unit,
    Leaf(Name, O),
    Tensor(Box<Shape<O>>, Box<Shape<O>>),
}

impl<O: Clone> Shape<O> {
    pub fn tensor(a: Shape<O>, b: Shape<O>) -> Self {
        Shape::Tensor(Box::new(a), Box::new(b))
    }

    /// Left-nested tensor; `Unit` when empty.
    pub fn nest(parts: Vec<Shape<O>>) -> Self {
        let mut it = parts.into_iter();
        match it.next() {
            None => Shape::Unit,
            Some(first) => it.fold(first, Shape::tensor),
        }
    }

    pub fn leaves(&self) -> Vec<(Name, O)> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<(Name, O)>) {
        match self {
            Shape::Unit => {}
            Shape::Leaf(n, o) => out.push((n.clone(), o.clone())),
            Shape::Tensor(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

pub(crate) fn same_leaves<O: Clone>(src: &Shape<O>, tgt: &Shape<O>) -> Result<(), ModelError> {
    let names = |s: &Shape<O>| {
        let mut v: Vec<Name> = s.leaves().into_iter().map(|(n, _)| n).collect();
        v.sort();
        v
    };
    if names(src) != names(tgt) {
        return Err(ModelError::Mismatch("rearrangement between different leaves".into()));
    }
    Ok(())
}

/// The operations an autonomous category has to provide for [`denote_with`].
pub trait Backend {
    type Obj: Clone;
    type Mor: Clone;

    fn quantale(&self) -> QuantaleSpec;
    fn type_obj(&self, ty: &LinType) -> Result<Self::Obj, ModelError>;
    fn unit_obj(&self) -> Self::Obj;
    fn tensor_obj(&self, a: &Self::Obj, b: &Self::Obj) -> Self::Obj;
    fn id(&self, a: &Self::Obj) -> Self::Mor;
    /// `f` followed by `g`.
    fn then(&self, f: &Self::Mor, g: &Self::Mor) -> Result<Self::Mor, ModelError>;
    fn tensor(&self, f: &Self::Mor, g: &Self::Mor) -> Self::Mor;
    fn rearrange(&self, src: &Shape<Self::Obj>, tgt: &Shape<Self::Obj>) -> Result<Self::Mor, ModelError>;
    /// `m : Γ ⊗ A → B` to `Γ → (A ⊸ B)`, where `hom` is `⟦A ⊸ B⟧`.
    fn curry(&self, m: &Self::Mor, gamma: &Self::Obj, hom: &Self::Obj) -> Result<Self::Mor, ModelError>;
    /// `app : (A ⊸ B) ⊗ A → B`.
    fn app(&self, hom: &Self::Obj) -> Result<Self::Mor, ModelError>;
    fn op(&self, symbol: &str) -> Result<Self::Mor, ModelError>;
    fn distance(&self, f: &Self::Mor, g: &Self::Mor) -> Result<QValue, ModelError>;
    fn equal(&self, f: &Self::Mor, g: &Self::Mor) -> Result<bool, ModelError>;
}

pub(crate) fn shape_obj<B: Backend>(b: &B, s: &Shape<B::Obj>) -> B::Obj {
    match s {
        Shape::Unit => b.unit_obj(),
        Shape::Leaf(_, o) => o.clone(),
        Shape::Tensor(l, r) => b.tensor_obj(&shape_obj(b, l), &shape_obj(b, r)),
    }
}

pub fn ctx_shape<B: Backend>(b: &B, ctx: &Context) -> Result<Shape<B::Obj>, ModelError> {
    let leaves = ctx
        .entries()
        .iter()
        .map(|(x, a)| Ok(Shape::Leaf(x.clone(), b.type_obj(a)?)))
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(Shape::nest(leaves))
}

/// `spl · sh_E : ⟦E⟧ → ⟦Γ₁⟧ ⊗ … ⊗ ⟦Γₙ⟧`.
fn split<B: Backend>(b: &B, e: &Context, parts: &[&Context]) -> Result<B::Mor, ModelError> {
    let tgt = parts
        .iter()
        .map(|g| ctx_shape(b, g))
        .collect::<Result<Vec<_>, _>>()?;
    b.rearrange(&ctx_shape(b, e)?, &Shape::nest(tgt))
}

fn chain<B: Backend>(b: &B, ms: &[B::Mor]) -> Result<B::Mor, ModelError> {
    let mut it = ms.iter();
    let first = it.next().expect("non-empty chain").clone();
    it.try_fold(first, |acc, m| b.then(&acc, m))
}

/// `⟦d⟧`, following the judgement interpretation clause for each rule.
pub fn denote_with<B: Backend>(b: &B, d: &Derivation) -> Result<B::Mor, ModelError> {
    let ps = &d.premises;
    match d.rule {
        Rule::Hyp => Ok(b.id(&b.type_obj(&d.ty)?)),
        Rule::UnitIntro => Ok(b.id(&b.unit_obj())),
        Rule::Ax => {
            let Term::Op(f, _) = &d.term else {
                unreachable!("ax derives an operation")
            };
            let ctxs: Vec<&Context> = ps.iter().map(|p| &p.ctx).collect();
            let s = split(b, &d.ctx, &ctxs)?;
            let mut ms = ps.iter().map(|p| denote_with(b, p));
            let args = match ms.next() {
                None => b.id(&b.unit_obj()),
                Some(first) => ms.try_fold(first?, |acc, m| Ok::<_, ModelError>(b.tensor(&acc, &m?)))?,
            };
            chain(b, &[s, args, b.op(f)?])
        }
        Rule::UnitElim => {
            let (m, n) = (denote_with(b, &ps[0])?, denote_with(b, &ps[1])?);
            let delta = ctx_shape(b, &ps[1].ctx)?;
            let s = split(b, &d.ctx, &[&ps[0].ctx, &ps[1].ctx])?;
            let mid = b.tensor(&m, &b.id(&shape_obj(b, &delta)));
            let lambda = b.rearrange(&Shape::tensor(Shape::Unit, delta.clone()), &delta)?;
            chain(b, &[s, mid, lambda, n])
        }
        Rule::TensorIntro => {
            let (m, n) = (denote_with(b, &ps[0])?, denote_with(b, &ps[1])?);
            let s = split(b, &d.ctx, &[&ps[0].ctx, &ps[1].ctx])?;
            chain(b, &[s, b.tensor(&m, &n)])
        }
        Rule::TensorElim => {
            let (m, n) = (denote_with(b, &ps[0])?, denote_with(b, &ps[1])?);
            let body = ps[1].ctx.entries();
            let k = body.len();
            let delta = Context::new(body[..k - 2].to_vec()).expect("sub-context");
            let (x, a) = &body[k - 2];
            let (y, bt) = &body[k - 1];
            let s = split(b, &d.ctx, &[&ps[0].ctx, &delta])?;
            let dshape = ctx_shape(b, &delta)?;
            let mid = b.tensor(&m, &b.id(&shape_obj(b, &dshape)));
            let pair = Shape::tensor(Shape::Leaf(x.clone(), b.type_obj(a)?), Shape::Leaf(y.clone(), b.type_obj(bt)?));
            let reassoc = b.rearrange(&Shape::tensor(pair, dshape), &ctx_shape(b, &ps[1].ctx)?)?;
            chain(b, &[s, mid, reassoc, n])
        }
        Rule::LolliIntro => {
            let m = denote_with(b, &ps[0])?;
            let Term::Lam(x, a, _) = &d.term else {
                unreachable!("⊸i derives an abstraction")
            };
            let gamma = ctx_shape(b, &d.ctx)?;
            let join = b.rearrange(
                &Shape::tensor(gamma.clone(), Shape::Leaf(x.clone(), b.type_obj(a)?)),
                &ctx_shape(b, &ps[0].ctx)?,
            )?;
            let body = b.then(&join, &m)?;
            b.curry(&body, &shape_obj(b, &gamma), &b.type_obj(&d.ty)?)
        }
        Rule::LolliElim => {
            let (m, n) = (denote_with(b, &ps[0])?, denote_with(b, &ps[1])?);
            let s = split(b, &d.ctx, &[&ps[0].ctx, &ps[1].ctx])?;
            let app = b.app(&b.type_obj(&ps[0].ty)?)?;
            chain(b, &[s, b.tensor(&m, &n), app])
        }
    }
}

fn subst_check<B: Backend>(b: &B, d1: &Derivation, d2: &Derivation) -> Result<bool, ModelError> {
    let d = typecheck::subst_derivation(d1, d2)?;
    let lhs = denote_with(b, &d)?;
    let entries = d1.ctx.entries();
    let Some(((x, a), gamma)) = entries.split_last() else {
        return Err(ModelError::Mismatch("substitution needs a non-empty context".into()));
    };
    let gamma = Context::new(gamma.to_vec()).expect("sub-context");
    let gshape = ctx_shape(b, &gamma)?;
    let spl = split(b, &d.ctx, &[&gamma, &d2.ctx])?;
    let mid = b.tensor(&b.id(&shape_obj(b, &gshape)), &denote_with(b, d2)?);
    let join = b.rearrange(
        &Shape::tensor(gshape, Shape::Leaf(x.clone(), b.type_obj(a)?)),
        &ctx_shape(b, &d1.ctx)?,
    )?;
    let rhs = chain(b, &[spl, mid, join, denote_with(b, d1)?])?;
    b.equal(&lhs, &rhs)
}

fn exchange_check<B: Backend>(b: &B, d: &Derivation, i: usize) -> Result<bool, ModelError> {
    let e = typecheck::exchange(d, i)?;
    let lhs = denote_with(b, &e)?;
    let exch = b.rearrange(&ctx_shape(b, &e.ctx)?, &ctx_shape(b, &d.ctx)?)?;
    let rhs = b.then(&exch, &denote_with(b, d)?)?;
    b.equal(&lhs, &rhs)
}

/// A morphism of either backend.
#[derive(Clone)]
pub enum Morphism {
    FinMet(MetMor),
    FinMeas(MeasMor),
}

impl fmt::Display for Morphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Morphism::FinMet(m) => write!(f, "{m}"),
            Morphism::FinMeas(m) => write!(f, "{m}"),
        }
    }
}

impl fmt::Debug for Morphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An interpretation of a signature in one of the two backends.
pub enum Model {
    FinMet(FinMet),
    FinMeas(FinMeas),
}

macro_rules! dispatch {
    ($self:expr, $b:ident => $body:expr) => {
        match $self {
            Model::FinMet($b) => $body,
            Model::FinMeas($b) => $body,
        }
    };
}

impl Model {
    pub fn quantale(&self) -> QuantaleSpec {
        dispatch!(self, b => b.quantale())
    }

    pub fn signature(&self) -> &Signature {
        dispatch!(self, b => b.signature())
    }

    pub fn backend_name(&self) -> &'static str {
        match self {
            Model::FinMet(_) => "finmet",
            Model::FinMeas(_) => "finmeas",
        }
    }

    /// Whether every operation symbol of `t` is interpreted.
    pub fn interprets(&self, t: &Term) -> bool {
        self.uninterpreted(t).is_empty()
    }

    pub fn uninterpreted(&self, t: &Term) -> BTreeSet<String> {
        let mut syms = BTreeSet::new();
        t.symbols(&mut syms);
        syms.retain(|s| !dispatch!(self, b => b.has_op(s)));
        syms
    }

    pub fn denote(&self, d: &Derivation) -> Result<Morphism, ModelError> {
        match self {
            Model::FinMet(b) => {
                let m = denote_with(b, d)?;
                debug_assert!(m.is_non_expansive(256).unwrap_or(true), "expansive denotation of {}", d.term);
                Ok(Morphism::FinMet(m))
            }
            Model::FinMeas(b) => Ok(Morphism::FinMeas(denote_with(b, d)?)),
        }
    }

    pub fn denote_judgement(&self, ctx: &Context, term: &Term) -> Result<Morphism, ModelError> {
        let d = typecheck::infer(self.signature(), ctx, term)?;
        self.denote(&d)
    }

    pub fn semantic_distance(&self, f: &Morphism, g: &Morphism) -> Result<QValue, ModelError> {
        match (self, f, g) {
            (Model::FinMet(b), Morphism::FinMet(f), Morphism::FinMet(g)) => b.distance(f, g),
            (Model::FinMeas(b), Morphism::FinMeas(f), Morphism::FinMeas(g)) => b.distance(f, g),
            _ => Err(ModelError::NotParallel),
        }
    }

    pub fn equal(&self, f: &Morphism, g: &Morphism) -> Result<bool, ModelError> {
        match (self, f, g) {
            (Model::FinMet(b), Morphism::FinMet(f), Morphism::FinMet(g)) => b.equal(f, g),
            (Model::FinMeas(b), Morphism::FinMeas(f), Morphism::FinMeas(g)) => b.equal(f, g),
            _ => Err(ModelError::NotParallel),
        }
    }

    /// `f` followed by `g`.
    pub fn then(&self, f: &Morphism, g: &Morphism) -> Result<Morphism, ModelError> {
        match (self, f, g) {
            (Model::FinMet(b), Morphism::FinMet(f), Morphism::FinMet(g)) => Ok(Morphism::FinMet(b.then(f, g)?)),
            (Model::FinMeas(b), Morphism::FinMeas(f), Morphism::FinMeas(g)) => Ok(Morphism::FinMeas(b.then(f, g)?)),
            _ => Err(ModelError::Mismatch("morphisms from different backends".into())),
        }
    }

    /// `spl : ⟦Γ₁, …, Γₙ⟧ → ⟦Γ₁⟧ ⊗ … ⊗ ⟦Γₙ⟧` and its inverse `join`.
    pub fn split_join(&self, parts: &[Context]) -> Result<(Morphism, Morphism), ModelError> {
        let all = parts
            .iter()
            .flat_map(|g| g.entries().iter().cloned())
            .collect::<Vec<_>>();
        let all = Context::new(all).map_err(|n| ModelError::Mismatch(format!("`{n}` occurs twice")))?;
        fn go<B: Backend>(b: &B, all: &Context, parts: &[Context]) -> Result<(B::Mor, B::Mor), ModelError> {
            let whole = ctx_shape(b, all)?;
            let split = Shape::nest(parts.iter().map(|g| ctx_shape(b, g)).collect::<Result<Vec<_>, _>>()?);
            Ok((b.rearrange(&whole, &split)?, b.rearrange(&split, &whole)?))
        }
        Ok(match self {
            Model::FinMet(b) => {
                let (s, j) = go(b, &all, parts)?;
                (Morphism::FinMet(s), Morphism::FinMet(j))
            }
            Model::FinMeas(b) => {
                let (s, j) = go(b, &all, parts)?;
                (Morphism::FinMeas(s), Morphism::FinMeas(j))
            }
        })
    }

    /// The isomorphism `⟦from⟧ → ⟦to⟧` between two orderings of one context
    /// (`exch` and `sh_E` are instances).
    pub fn permutation(&self, from: &Context, to: &Context) -> Result<Morphism, ModelError> {
        Ok(match self {
            Model::FinMet(b) => Morphism::FinMet(b.rearrange(&ctx_shape(b, from)?, &ctx_shape(b, to)?)?),
            Model::FinMeas(b) => Morphism::FinMeas(b.rearrange(&ctx_shape(b, from)?, &ctx_shape(b, to)?)?),
        })
    }

    pub fn identity(&self, ctx: &Context) -> Result<Morphism, ModelError> {
        self.permutation(ctx, ctx)
    }
}

/// The outcome of checking one axiom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomCheck {
    pub index: usize,
    pub axiom: String,
    pub label: QValue,
    pub distance: QValue,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelReport {
    pub checked: Vec<AxiomCheck>,
    /// Axioms mentioning uninterpreted symbols, with those symbols.
    pub skipped: Vec<(usize, Vec<String>)>,
}

impl ModelReport {
    pub fn satisfied(&self) -> bool {
        self.checked.iter().all(|c| c.satisfied)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checked.iter().filter(|c| !c.satisfied)
    }
}

fn check_quantale(m: &Model, t: &Theory) -> Result<(), ModelError> {
    if m.quantale() != t.quantale {
        return Err(ModelError::QuantaleMismatch {
            model: m.quantale(),
            theory: t.quantale,
        });
    }
    Ok(())
}

/// Checks `q ≤ a(⟦Γ ▷ v⟧, ⟦Γ ▷ w⟧)` for every axiom whose symbols the model
/// interprets.
pub fn check_model(m: &Model, t: &Theory) -> Result<ModelReport, ModelError> {
    check_quantale(m, t)?;
    let mut report = ModelReport::default();
    for (index, ax) in t.axioms.iter().enumerate() {
        let mut missing = m.uninterpreted(&ax.lhs);
        missing.extend(m.uninterpreted(&ax.rhs));
        if !missing.is_empty() {
            report.skipped.push((index, missing.into_iter().collect()));
            continue;
        }
        let f = m.denote_judgement(&ax.ctx, &ax.lhs)?;
        let g = m.denote_judgement(&ax.ctx, &ax.rhs)?;
        let distance = m.semantic_distance(&f, &g)?;
        report.checked.push(AxiomCheck {
            index,
            axiom: ax.to_string(),
            satisfied: ax.label.leq(&distance)?,
            label: ax.label.clone(),
            distance,
        });
    }
    Ok(report)
}

/// Replays `trace`, then checks its conclusion in the model.
pub fn check_soundness(m: &Model, t: &Theory, trace: &ProofTrace) -> Result<bool, ModelError> {
    check_quantale(m, t)?;
    let c = replay(t, trace)?;
    let f = m.denote_judgement(&c.ctx, &c.lhs)?;
    let g = m.denote_judgement(&c.ctx, &c.rhs)?;
    Ok(c.label.leq(&m.semantic_distance(&f, &g)?)?)
}

/// `⟦Γ, Δ ▷ v[w/x]⟧ = ⟦Γ, x:A ▷ v⟧ · join · (id ⊗ ⟦Δ ▷ w⟧) · spl`, compared
/// exactly. `x` is the last variable of `d1`'s context.
pub fn semantic_substitution_check(m: &Model, d1: &Derivation, d2: &Derivation) -> Result<bool, ModelError> {
    dispatch!(m, b => subst_check(b, d1, d2))
}

/// `⟦…, y, x, … ▷ v⟧ = ⟦…, x, y, … ▷ v⟧ · exch` for positions `i, i + 1`.
pub fn semantic_exchange_check(m: &Model, d: &Derivation, i: usize) -> Result<bool, ModelError> {
    dispatch!(m, b => exchange_check(b, d, i))
}


#[cfg(test)]
mod tests;
