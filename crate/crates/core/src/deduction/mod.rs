//! The V-equational deductive system: proof traces, independent replay and
//! bounded proof search.
//!
//! Search normalises both sides, then at each pair of normal forms tries,
//! in order: reflexivity, congruence when the heads agree, a root instance
//! of an axiom (with recursive premises for the substituted subterms), and
//! transitivity through one axiom rewrite at any position of either side.
//! Every candidate is a complete trace; the best label wins. (arch) is
//! never a search rule.

mod rewrite;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use rustc_hash::{FxHashMap, FxHasher};
use thiserror::Error;

use crate::quantale::{self, QValue, QuantaleError};
use crate::syntax::{alpha_eq, is_shuffle, substitute, Context, LinType, Name, Term};
use crate::theory::{Theory, VEquation};
use crate::typecheck::{self, TypeError};

pub use rewrite::{apply_step, is_normal, normalize, Fig3Eq, Normalized, RewriteStep};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProofRule {
    Refl,
    Trans,
    Weak,
    /// Never produced by search; replay rejects it.
    Arch,
    Join,
    CongOp,
    CongTensor,
    CongPm,
    CongTo,
    CongLam,
    CongApp,
    Perm,
    /// Substitution for the last variable of the first premise's context.
    Subst,
    Axiom(usize),
    /// The conclusion is `start =_⊤ end` (or `end =_⊤ start` when
    /// reversed), where `steps` rewrite `start` into `end`.
    Fig3Rewrite {
        steps: Vec<RewriteStep>,
        reversed: bool,
    },
    Symmetry,
}

impl fmt::Display for ProofRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProofRule::Refl => f.write_str("refl"),
            ProofRule::Trans => f.write_str("trans"),
            ProofRule::Weak => f.write_str("weak"),
            ProofRule::Arch => f.write_str("arch"),
            ProofRule::Join => f.write_str("join"),
            ProofRule::CongOp => f.write_str("cong-op"),
            ProofRule::CongTensor => f.write_str("cong-*"),
            ProofRule::CongPm => f.write_str("cong-pm"),
            ProofRule::CongTo => f.write_str("cong-to"),
            ProofRule::CongLam => f.write_str("cong-lam"),
            ProofRule::CongApp => f.write_str("cong-app"),
            ProofRule::Perm => f.write_str("perm"),
            ProofRule::Subst => f.write_str("subst"),
            ProofRule::Axiom(i) => write!(f, "axiom #{i}"),
            ProofRule::Fig3Rewrite { steps, reversed } => {
                let s: Vec<String> = steps.iter().map(|s| s.to_string()).collect();
                write!(f, "fig3{} [{}]", if *reversed { " reversed" } else { "" }, s.join("; "))
            }
            ProofRule::Symmetry => f.write_str("symmetry"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProofTrace {
    pub conclusion: VEquation,
    pub rule: ProofRule,
    pub premises: Vec<ProofTrace>,
}

impl ProofTrace {
    pub fn label(&self) -> &QValue {
        &self.conclusion.label
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(ProofTrace::size).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        1 + self.premises.iter().map(ProofTrace::height).max().unwrap_or(0)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(0, &mut out);
        out
    }

    fn render_into(&self, depth: usize, out: &mut String) {
        use fmt::Write;
        let _ = writeln!(out, "{:indent$}({}) {}", "", self.rule, self.conclusion, indent = depth * 2);
        for p in &self.premises {
            p.render_into(depth + 1, out);
        }
    }

    /// Every rule used anywhere in the trace.
    pub fn rules(&self, out: &mut Vec<ProofRule>) {
        out.push(self.rule.clone());
        for p in &self.premises {
            p.rules(out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    /// Nesting of transitivity steps. Congruence and axiom premises on
    /// strict subterms stay at the same depth.
    pub max_depth: usize,
    pub max_rewrite_steps: usize,
    pub arch_approximants: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_depth: 3,
            max_rewrite_steps: 10_000,
            arch_approximants: 8,
        }
    }
}

impl SearchBudget {
    pub fn with_depth(max_depth: usize) -> Self {
        SearchBudget {
            max_depth,
            ..Self::default()
        }
    }
}

/// How candidate proofs of the same goal are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JoinMode {
    /// Binary and larger joins combine all candidates.
    #[default]
    Full,
    /// Only the nullary join `v =_⊥ w`; the best single candidate is kept.
    BottomOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Proved(ProofTrace),
    Unknown,
}

impl Outcome {
    pub fn is_proved(&self) -> bool {
        matches!(self, Outcome::Proved(_))
    }

    pub fn trace(&self) -> Option<&ProofTrace> {
        match self {
            Outcome::Proved(t) => Some(t),
            Outcome::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("node `{node}`: stored label {stored}, recomputed {computed}")]
    LabelMismatch {
        node: String,
        stored: Box<QValue>,
        computed: Box<QValue>,
    },
    #[error("node `{node}`: {reason}")]
    Misapplied { node: String, reason: String },
    #[error("node `{node}`: {source}")]
    IllTyped { node: String, source: TypeError },
    #[error(transparent)]
    Quantale(#[from] QuantaleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeductionError {
    #[error("goal is ill-typed: {0}")]
    Goal(#[from] TypeError),
    #[error("goal label is from quantale {found}, theory uses {expected}")]
    Quantale {
        expected: crate::quantale::QuantaleSpec,
        found: crate::quantale::QuantaleSpec,
    },
    #[error("goal sides have types {0} and {1}")]
    SideTypes(LinType, LinType),
}

// ---------------------------------------------------------------------------
// Replay

/// Recomputes every label bottom-up and checks each rule's side
/// conditions; returns the conclusion.
pub fn replay(theory: &Theory, trace: &ProofTrace) -> Result<VEquation, ReplayError> {
    let spec = theory.quantale;
    let mut labels = Vec::with_capacity(trace.premises.len());
    for p in &trace.premises {
        labels.push(replay(theory, p)?.label);
    }
    let c = &trace.conclusion;
    let node = || format!("({}) {}", trace.rule, c);
    let bad = |reason: &str| ReplayError::Misapplied {
        node: node(),
        reason: reason.to_string(),
    };
    for side in [&c.lhs, &c.rhs] {
        typecheck::check(&theory.signature, &c.ctx, side, &c.ty).map_err(|source| ReplayError::IllTyped {
            node: node(),
            source,
        })?;
    }
    let prem = |i: usize| &trace.premises[i].conclusion;
    let arity = |n: usize| {
        if trace.premises.len() == n {
            Ok(())
        } else {
            Err(bad(&format!("expected {n} premises, found {}", trace.premises.len())))
        }
    };
    let same_eq = |p: &VEquation| p.ctx == c.ctx && alpha_eq(&p.lhs, &c.lhs) && alpha_eq(&p.rhs, &c.rhs) && p.ty == c.ty;
    let computed = match &trace.rule {
        ProofRule::Refl => {
            arity(0)?;
            if !alpha_eq(&c.lhs, &c.rhs) {
                return Err(bad("sides differ"));
            }
            spec.top()
        }
        ProofRule::Trans => {
            arity(2)?;
            let (p, q) = (prem(0), prem(1));
            let chained = p.ctx == c.ctx
                && q.ctx == c.ctx
                && alpha_eq(&p.lhs, &c.lhs)
                && alpha_eq(&p.rhs, &q.lhs)
                && alpha_eq(&q.rhs, &c.rhs);
            if !chained {
                return Err(bad("premises do not chain"));
            }
            labels[0].tensor(&labels[1])?
        }
        ProofRule::Weak => {
            arity(1)?;
            if !same_eq(prem(0)) {
                return Err(bad("premise is a different equation"));
            }
            if !c.label.leq(&labels[0])? {
                return Err(bad("conclusion label is not below the premise label"));
            }
            c.label.clone()
        }
        ProofRule::Arch => return Err(bad("(arch) has infinitely many premises and cannot be replayed")),
        ProofRule::Join => {
            if !trace.premises.iter().all(|p| same_eq(&p.conclusion)) {
                return Err(bad("join premises must share the conclusion's sides"));
            }
            quantale::join(spec, &labels)?
        }
        ProofRule::CongOp => {
            let (Term::Op(f, vs), Term::Op(g, ws)) = (&c.lhs, &c.rhs) else {
                return Err(bad("sides are not operation applications"));
            };
            if f != g || vs.len() != ws.len() {
                return Err(bad("different operation symbols"));
            }
            arity(vs.len())?;
            congruence(c, &trace.premises, vs.iter().zip(ws).collect())
                .map_err(|r| bad(&r))?;
            quantale::tensor_all(spec, &labels)?
        }
        ProofRule::CongTensor | ProofRule::CongTo | ProofRule::CongApp => {
            arity(2)?;
            let parts = match (&trace.rule, &c.lhs, &c.rhs) {
                (ProofRule::CongTensor, Term::Pair(a, b), Term::Pair(x, y))
                | (ProofRule::CongTo, Term::UnitLet(a, b), Term::UnitLet(x, y))
                | (ProofRule::CongApp, Term::App(a, b), Term::App(x, y)) => vec![(&**a, &**x), (&**b, &**y)],
                _ => return Err(bad("sides do not have the rule's shape")),
            };
            congruence(c, &trace.premises, parts).map_err(|r| bad(&r))?;
            labels[0].tensor(&labels[1])?
        }
        ProofRule::CongPm => {
            arity(2)?;
            let Term::PairLet(v, x, y, body) = &c.lhs else {
                return Err(bad("left side is not a pm"));
            };
            let rebuilt = Term::pair_let(prem(0).rhs.clone(), x.clone(), y.clone(), prem(1).rhs.clone());
            if !alpha_eq(&rebuilt, &c.rhs) {
                return Err(bad("right side is not built from the premises"));
            }
            let entries = prem(1).ctx.entries();
            let n = entries.len();
            if n < 2 || entries[n - 2].0 != *x || entries[n - 1].0 != *y {
                return Err(bad("body premise must end with the pattern variables"));
            }
            if !alpha_eq(v, &prem(0).lhs) || !alpha_eq(body, &prem(1).lhs) {
                return Err(bad("left side is not built from the premises"));
            }
            let delta = Context::new(entries[..n - 2].to_vec()).expect("sub-context of a context");
            if !is_shuffle(&c.ctx, &[prem(0).ctx.clone(), delta]) {
                return Err(bad("context is not a shuffle of the premise contexts"));
            }
            labels[0].tensor(&labels[1])?
        }
        ProofRule::CongLam => {
            arity(1)?;
            let Term::Lam(x, a, body) = &c.lhs else {
                return Err(bad("left side is not a λ"));
            };
            let rebuilt = Term::lam(x.clone(), a.clone(), prem(0).rhs.clone());
            let expected_ctx = c.ctx.extended(x.clone(), a.clone()).map_err(|_| bad("binder clash"))?;
            if !alpha_eq(body, &prem(0).lhs) || !alpha_eq(&rebuilt, &c.rhs) || prem(0).ctx != expected_ctx {
                return Err(bad("premise does not match the λ bodies"));
            }
            labels[0].clone()
        }
        ProofRule::Perm => {
            arity(1)?;
            let p = prem(0);
            if !c.ctx.is_permutation_of(&p.ctx) || !alpha_eq(&p.lhs, &c.lhs) || !alpha_eq(&p.rhs, &c.rhs) {
                return Err(bad("conclusion is not a context permutation of the premise"));
            }
            labels[0].clone()
        }
        ProofRule::Subst => {
            arity(2)?;
            let (p, q) = (prem(0), prem(1));
            let Some((x, a)) = p.ctx.entries().last().cloned() else {
                return Err(bad("first premise has an empty context"));
            };
            if a != q.ty {
                return Err(bad("substituted terms have the wrong type"));
            }
            let gamma = Context::new(p.ctx.entries()[..p.ctx.len() - 1].to_vec()).expect("prefix");
            let ctx = gamma.concat(&q.ctx).map_err(|_| bad("contexts overlap"))?;
            let lhs = substitute(&p.lhs, &x, &q.lhs);
            let rhs = substitute(&p.rhs, &x, &q.rhs);
            if ctx != c.ctx || !alpha_eq(&lhs, &c.lhs) || !alpha_eq(&rhs, &c.rhs) || p.ty != c.ty {
                return Err(bad("conclusion is not the substitution instance"));
            }
            labels[0].tensor(&labels[1])?
        }
        ProofRule::Axiom(i) => {
            arity(0)?;
            let ax = theory.axioms.get(*i).ok_or_else(|| bad("no such axiom"))?;
            if ax.ctx != c.ctx || !alpha_eq(&ax.lhs, &c.lhs) || !alpha_eq(&ax.rhs, &c.rhs) {
                return Err(bad("conclusion differs from the axiom"));
            }
            ax.label.clone()
        }
        ProofRule::Fig3Rewrite { steps, reversed } => {
            arity(0)?;
            let (start, end) = if *reversed { (&c.rhs, &c.lhs) } else { (&c.lhs, &c.rhs) };
            let mut cur = start.clone();
            for s in steps {
                cur = apply_step(&cur, s).ok_or_else(|| bad(&format!("step {s} does not apply")))?;
            }
            if !alpha_eq(&cur, end) {
                return Err(bad("rewriting does not reach the other side"));
            }
            spec.top()
        }
        ProofRule::Symmetry => {
            arity(1)?;
            if !theory.symmetric {
                return Err(bad("symmetry used in a theory without the symmetric flag"));
            }
            let p = prem(0);
            if p.ctx != c.ctx || !alpha_eq(&p.lhs, &c.rhs) || !alpha_eq(&p.rhs, &c.lhs) {
                return Err(bad("conclusion is not the flipped premise"));
            }
            labels[0].clone()
        }
    };
    if computed != c.label {
        return Err(ReplayError::LabelMismatch {
            node: node(),
            stored: Box::new(c.label.clone()),
            computed: Box::new(computed),
        });
    }
    Ok(c.clone())
}

fn congruence(c: &VEquation, premises: &[ProofTrace], parts: Vec<(&Term, &Term)>) -> Result<(), String> {
    for (p, (l, r)) in premises.iter().zip(&parts) {
        if !alpha_eq(&p.conclusion.lhs, l) || !alpha_eq(&p.conclusion.rhs, r) {
            return Err("premise sides do not match the components".into());
        }
    }
    let ctxs: Vec<Context> = premises.iter().map(|p| p.conclusion.ctx.clone()).collect();
    if !is_shuffle(&c.ctx, &ctxs) {
        return Err("context is not a shuffle of the premise contexts".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Trace construction helpers

fn eq(ctx: &Context, lhs: &Term, rhs: &Term, ty: &LinType, label: QValue) -> VEquation {
    VEquation {
        ctx: ctx.clone(),
        lhs: lhs.clone(),
        rhs: rhs.clone(),
        ty: ty.clone(),
        label,
    }
}

fn node(conclusion: VEquation, rule: ProofRule, premises: Vec<ProofTrace>) -> ProofTrace {
    ProofTrace {
        conclusion,
        rule,
        premises,
    }
}

fn refl(theory: &Theory, ctx: &Context, t: &Term, ty: &LinType) -> ProofTrace {
    node(eq(ctx, t, t, ty, theory.quantale.top()), ProofRule::Refl, vec![])
}

fn bottom(theory: &Theory, ctx: &Context, a: &Term, b: &Term, ty: &LinType) -> ProofTrace {
    node(eq(ctx, a, b, ty, theory.quantale.bottom()), ProofRule::Join, vec![])
}

fn trans(p: ProofTrace, q: ProofTrace) -> ProofTrace {
    let label = p.label().tensor(q.label()).expect("labels share the theory's quantale");
    let c = eq(&p.conclusion.ctx, &p.conclusion.lhs, &q.conclusion.rhs, &p.conclusion.ty, label);
    node(c, ProofRule::Trans, vec![p, q])
}

fn is_refl(p: &ProofTrace) -> bool {
    p.rule == ProofRule::Refl
}

/// `p ; q`, dropping reflexivity steps.
fn chain(p: ProofTrace, q: ProofTrace) -> ProofTrace {
    if is_refl(&p) {
        let mut q = q;
        q.conclusion.lhs = p.conclusion.lhs;
        q
    } else if is_refl(&q) {
        let mut p = p;
        p.conclusion.rhs = q.conclusion.rhs;
        p
    } else {
        trans(p, q)
    }
}

fn weaken(p: ProofTrace, label: &QValue) -> ProofTrace {
    if p.label() == label {
        return p;
    }
    let mut c = p.conclusion.clone();
    c.label = label.clone();
    node(c, ProofRule::Weak, vec![p])
}

fn fig3(theory: &Theory, ctx: &Context, ty: &LinType, n: &Normalized, start: &Term, reversed: bool) -> ProofTrace {
    if n.steps.is_empty() {
        return refl(theory, ctx, start, ty);
    }
    let (l, r) = if reversed { (&n.term, start) } else { (start, &n.term) };
    node(
        eq(ctx, l, r, ty, theory.quantale.top()),
        ProofRule::Fig3Rewrite {
            steps: n.steps.clone(),
            reversed,
        },
        vec![],
    )
}

fn perm_to(p: ProofTrace, ctx: &Context) -> ProofTrace {
    if p.conclusion.ctx == *ctx {
        return p;
    }
    let mut c = p.conclusion.clone();
    c.ctx = ctx.clone();
    node(c, ProofRule::Perm, vec![p])
}

/// Moves `x` to the end of the context by a perm node.
fn move_last(p: ProofTrace, x: &Name) -> ProofTrace {
    let mut entries: Vec<(Name, LinType)> = p.conclusion.ctx.entries().to_vec();
    let i = entries.iter().position(|(y, _)| y == x).expect("variable in context");
    let e = entries.remove(i);
    entries.push(e);
    perm_to(p, &Context::new(entries).expect("permutation"))
}

fn subst_node(p: ProofTrace, q: ProofTrace) -> ProofTrace {
    let pc = &p.conclusion;
    let (x, _) = pc.ctx.entries().last().cloned().expect("non-empty context");
    let gamma = Context::new(pc.ctx.entries()[..pc.ctx.len() - 1].to_vec()).expect("prefix");
    let ctx = gamma.concat(&q.conclusion.ctx).expect("disjoint contexts");
    let lhs = substitute(&pc.lhs, &x, &q.conclusion.lhs);
    let rhs = substitute(&pc.rhs, &x, &q.conclusion.rhs);
    let label = p.label().tensor(q.label()).expect("same quantale");
    let c = eq(&ctx, &lhs, &rhs, &pc.ty, label);
    node(c, ProofRule::Subst, vec![p, q])
}

// ---------------------------------------------------------------------------
// Matching

type Subst = HashMap<Name, Term>;

/// First-order matching of an axiom side against a term. Pattern variables
/// are the axiom's context variables; binders correspond positionally.
fn pattern_match(pattern: &Term, term: &Term, vars: &BTreeSet<Name>, sigma: &mut Subst) -> bool {
    fn go<'a>(
        p: &'a Term,
        t: &'a Term,
        vars: &BTreeSet<Name>,
        env: &mut Vec<(&'a Name, &'a Name)>,
        sigma: &mut Subst,
    ) -> bool {
        match (p, t) {
            (Term::Var(x), _) => {
                if let Some(&(_, r)) = env.iter().rev().find(|(l, _)| *l == x) {
                    return *t == Term::Var(r.clone());
                }
                if !vars.contains(x) {
                    return *t == *p && !env.iter().any(|(_, r)| *r == x);
                }
                if env.iter().any(|(_, r)| t.has_free(r)) {
                    return false;
                }
                match sigma.get(x) {
                    Some(prev) => alpha_eq(prev, t),
                    None => {
                        sigma.insert(x.clone(), t.clone());
                        true
                    }
                }
            }
            (Term::Star, Term::Star) => true,
            (Term::Op(f, xs), Term::Op(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(a, b)| go(a, b, vars, env, sigma))
            }
            (Term::UnitLet(a1, b1), Term::UnitLet(a2, b2))
            | (Term::Pair(a1, b1), Term::Pair(a2, b2))
            | (Term::App(a1, b1), Term::App(a2, b2)) => go(a1, a2, vars, env, sigma) && go(b1, b2, vars, env, sigma),
            (Term::Lam(x, t1, b1), Term::Lam(y, t2, b2)) => {
                if t1 != t2 {
                    return false;
                }
                env.push((x, y));
                let r = go(b1, b2, vars, env, sigma);
                env.pop();
                r
            }
            (Term::PairLet(a1, x1, y1, b1), Term::PairLet(a2, x2, y2, b2)) => {
                if !go(a1, a2, vars, env, sigma) {
                    return false;
                }
                env.push((x1, x2));
                env.push((y1, y2));
                let r = go(b1, b2, vars, env, sigma);
                env.truncate(env.len() - 2);
                r
            }
            _ => false,
        }
    }
    go(pattern, term, vars, &mut Vec::new(), sigma)
}

fn is_first_order(t: &Term) -> bool {
    match t {
        Term::Var(_) | Term::Star => true,
        Term::Op(_, xs) => xs.iter().all(is_first_order),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Head {
    Wild,
    Star,
    Op,
    UnitLet,
    Pair,
    PairLet,
    Lam,
    App,
}

fn head<'a>(t: &'a Term, vars: &BTreeSet<Name>) -> (Head, Option<&'a str>) {
    match t {
        Term::Var(x) if vars.contains(x) => (Head::Wild, None),
        Term::Var(_) => (Head::Wild, None),
        Term::Star => (Head::Star, None),
        Term::Op(f, _) => (Head::Op, Some(f)),
        Term::UnitLet(..) => (Head::UnitLet, None),
        Term::Pair(..) => (Head::Pair, None),
        Term::PairLet(..) => (Head::PairLet, None),
        Term::Lam(..) => (Head::Lam, None),
        Term::App(..) => (Head::App, None),
    }
}

/// An axiom used left-to-right (`flipped == false`) or, through the
/// symmetry rule, right-to-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Oriented {
    index: usize,
    flipped: bool,
}

struct AxiomIndex {
    vars: Vec<BTreeSet<Name>>,
    by_from: HashMap<(Head, Option<String>), Vec<Oriented>>,
    by_to: HashMap<(Head, Option<String>), Vec<Oriented>>,
    wild_from: Vec<Oriented>,
    wild_to: Vec<Oriented>,
    /// Head of the target side, by `2 * index + flipped`.
    to_heads: Vec<(Head, Option<String>)>,
    /// Both sides built from operations, `*` and variables only.
    first_order: Vec<bool>,
}

impl AxiomIndex {
    fn new(theory: &Theory) -> Self {
        let mut idx = AxiomIndex {
            vars: Vec::new(),
            by_from: HashMap::new(),
            by_to: HashMap::new(),
            wild_from: Vec::new(),
            wild_to: Vec::new(),
            to_heads: Vec::new(),
            first_order: Vec::new(),
        };
        for (i, ax) in theory.axioms.iter().enumerate() {
            let vars: BTreeSet<Name> = ax.ctx.names().cloned().collect();
            for side in [&ax.rhs, &ax.lhs] {
                let (h, f) = head(side, &vars);
                idx.to_heads.push((h, f.map(str::to_string)));
            }
            let dirs: &[bool] = if theory.symmetric { &[false, true] } else { &[false] };
            for &flipped in dirs {
                let o = Oriented { index: i, flipped };
                let (from, to) = if flipped { (&ax.rhs, &ax.lhs) } else { (&ax.lhs, &ax.rhs) };
                let hf = head(from, &vars);
                let ht = head(to, &vars);
                if hf.0 == Head::Wild {
                    idx.wild_from.push(o);
                } else {
                    idx.by_from.entry((hf.0, hf.1.map(str::to_string))).or_default().push(o);
                }
                if ht.0 == Head::Wild {
                    idx.wild_to.push(o);
                } else {
                    idx.by_to.entry((ht.0, ht.1.map(str::to_string))).or_default().push(o);
                }
            }
            idx.first_order.push(is_first_order(&ax.lhs) && is_first_order(&ax.rhs));
            idx.vars.push(vars);
        }
        idx
    }

    /// Whether the target side of `o` can match a term with head `h`.
    fn target_fits(&self, o: Oriented, h: (Head, Option<&str>)) -> bool {
        let (th, tf) = &self.to_heads[2 * o.index + o.flipped as usize];
        *th == Head::Wild || (*th == h.0 && tf.as_deref() == h.1)
    }

    fn candidates(&self, t: &Term, to_side: bool) -> Vec<Oriented> {
        let (h, f) = head(t, &BTreeSet::new());
        let (map, wild) = if to_side {
            (&self.by_to, &self.wild_to)
        } else {
            (&self.by_from, &self.wild_from)
        };
        let mut out: Vec<Oriented> = map.get(&(h, f.map(str::to_string))).cloned().unwrap_or_default();
        out.extend(wild.iter().copied());
        out
    }
}

// ---------------------------------------------------------------------------
// Search

/// A finished search: goal, depth, result and the floor it ran under.
type MemoEntry = (Context, Term, Term, usize, ProofTrace, QValue);

fn memo_hash(ctx: &Context, a: &Term, b: &Term, depth: usize) -> u64 {
    let mut h = FxHasher::default();
    (ctx, a, b, depth).hash(&mut h);
    h.finish()
}

/// A bounded prover for one theory. The memo table lives as long as the
/// prover; independent queries may use independent provers.
pub struct Prover<'t> {
    theory: &'t Theory,
    budget: SearchBudget,
    mode: JoinMode,
    index: AxiomIndex,
    /// Results with the floor they were searched under.
    memo: FxHashMap<u64, Vec<MemoEntry>>,
    normal_forms: FxHashMap<Term, Rc<Normalized>>,
    steps: FxHashMap<(Context, Term, bool, bool), Rc<Vec<StepCand>>>,
    /// Set when some normalisation ran out of steps.
    pub exhausted: bool,
}

impl<'t> Prover<'t> {
    pub fn new(theory: &'t Theory, budget: SearchBudget) -> Self {
        Prover {
            theory,
            budget,
            mode: JoinMode::Full,
            index: AxiomIndex::new(theory),
            memo: FxHashMap::default(),
            normal_forms: FxHashMap::default(),
            steps: FxHashMap::default(),
            exhausted: false,
        }
    }

    pub fn with_join_mode(mut self, mode: JoinMode) -> Self {
        self.mode = mode;
        self
    }

    fn normal(&mut self, t: &Term) -> Rc<Normalized> {
        if let Some(n) = self.normal_forms.get(t) {
            return n.clone();
        }
        let n = Rc::new(normalize(t, self.budget.max_rewrite_steps));
        self.exhausted |= n.exhausted;
        self.normal_forms.insert(t.clone(), n.clone());
        n
    }

    /// The best proof of `ctx ▷ v =_? w : A` found within budget.
    pub fn best(&mut self, ctx: &Context, v: &Term, w: &Term) -> Result<ProofTrace, DeductionError> {
        let sig = &self.theory.signature;
        let dv = typecheck::infer(sig, ctx, v)?;
        let dw = typecheck::infer(sig, ctx, w)?;
        if dv.ty != dw.ty {
            return Err(DeductionError::SideTypes(dv.ty, dw.ty));
        }
        let ty = dv.ty;
        if self.budget.max_depth == 0 {
            return Ok(bottom(self.theory, ctx, v, w, &ty));
        }
        let nv = self.normal(v);
        let nw = self.normal(w);
        let floor = self.theory.quantale.bottom();
        let core = self.search(ctx, &nv.term, &nw.term, &ty, self.budget.max_depth, &floor);
        if core.label().is_bottom() {
            return Ok(bottom(self.theory, ctx, v, w, &ty));
        }
        let left = fig3(self.theory, ctx, &ty, &nv, v, false);
        let right = fig3(self.theory, ctx, &ty, &nw, w, true);
        Ok(chain(chain(left, core), right))
    }

    /// Decides `goal` within budget, reusing earlier searches of this
    /// prover.
    pub fn check(&mut self, goal: &VEquation) -> Result<Outcome, DeductionError> {
        validate_goal(self.theory, goal)?;
        if goal.label.is_bottom() {
            return Ok(Outcome::Proved(bottom(self.theory, &goal.ctx, &goal.lhs, &goal.rhs, &goal.ty)));
        }
        let best = self.best(&goal.ctx, &goal.lhs, &goal.rhs)?;
        if goal.label.leq(best.label()).expect("validated quantale") {
            let mut p = weaken(best, &goal.label);
            p.conclusion.lhs = goal.lhs.clone();
            p.conclusion.rhs = goal.rhs.clone();
            Ok(Outcome::Proved(p))
        } else {
            Ok(Outcome::Unknown)
        }
    }

    fn combine(&self, ctx: &Context, a: &Term, b: &Term, ty: &LinType, cands: Vec<ProofTrace>) -> ProofTrace {
        let mut best: Option<ProofTrace> = None;
        for c in &cands {
            let better = match &best {
                None => true,
                Some(b) => !c.label().leq(b.label()).expect("same quantale"),
            };
            if better {
                best = Some(c.clone());
            }
        }
        let Some(best) = best else {
            return bottom(self.theory, ctx, a, b, ty);
        };
        if self.mode == JoinMode::BottomOnly || cands.len() == 1 {
            return best;
        }
        // Keep one candidate per label; join them.
        let mut distinct: Vec<ProofTrace> = Vec::new();
        for c in cands {
            if !distinct.iter().any(|d| d.label() == c.label()) {
                distinct.push(c);
            }
        }
        if distinct.len() == 1 {
            return best;
        }
        let label = quantale::join(self.theory.quantale, distinct.iter().map(|p| p.label())).expect("same quantale");
        let premises: Vec<ProofTrace> = distinct
            .into_iter()
            .map(|mut p| {
                p.conclusion.lhs = a.clone();
                p.conclusion.rhs = b.clone();
                p
            })
            .collect();
        node(eq(ctx, a, b, ty, label), ProofRule::Join, premises)
    }

    /// The best proof within `depth`, provided its label is above `floor`.
    /// Otherwise some proof at or below `floor` (possibly ⊥). Every
    /// recursive call strictly shrinks the terms or the depth.
    fn search(&mut self, ctx: &Context, a: &Term, b: &Term, ty: &LinType, depth: usize, floor: &QValue) -> ProofTrace {
        if alpha_eq(a, b) {
            let mut r = refl(self.theory, ctx, a, ty);
            r.conclusion.rhs = b.clone();
            return r;
        }
        let key = memo_hash(ctx, a, b, depth);
        let hit = self.memo.get(&key).and_then(|es| {
            es.iter().find(|e| e.0 == *ctx && e.1 == *a && e.2 == *b && e.3 == depth)
        });
        if let Some((.., p, f)) = hit {
            let exact = !p.label().leq(f).expect("same quantale");
            if exact || f.leq(floor).expect("same quantale") {
                return p.clone();
            }
        }
        let mut cands: Vec<ProofTrace> = Vec::new();
        let top = self.theory.quantale.top();
        let good = |cands: &Vec<ProofTrace>| cands.iter().any(|c| *c.label() == top);
        // When congruence applies, rewriting inside a component is already
        // covered by the component searches, so trans only rewrites roots.
        let (root_only, cong) = self.congruence(ctx, a, b, ty, depth, floor);
        if let Some(p) = cong {
            push_useful(&mut cands, p);
        }
        if !good(&cands) {
            for p in self.root_axioms(ctx, a, b, ty, depth, floor) {
                push_useful(&mut cands, p);
            }
        }
        if !good(&cands) && depth > 1 {
            self.transitive(ctx, a, b, ty, depth, root_only, floor, &mut cands);
        }
        let result = self.combine(ctx, a, b, ty, cands);
        let es = self.memo.entry(key).or_default();
        let entry = (ctx.clone(), a.clone(), b.clone(), depth, result.clone(), floor.clone());
        match es.iter_mut().find(|e| e.0 == *ctx && e.1 == *a && e.2 == *b && e.3 == depth) {
            Some(e) => *e = entry,
            None => es.push(entry),
        }
        result
    }

    /// What a new candidate has to beat.
    fn current_best(&self, cands: &[ProofTrace], floor: &QValue) -> QValue {
        quantale::join(self.theory.quantale, cands.iter().map(|c| c.label()).chain([floor])).expect("same quantale")
    }

    /// Aligns the binder names of `b` with those of `a` at the root.
    fn align(a: &Term, b: &Term) -> Option<Term> {
        match (a, b) {
            (Term::Lam(x, _, _), Term::Lam(y, t, body)) if x != y => {
                if body.has_free(x) {
                    return None;
                }
                Some(Term::lam(x.clone(), t.clone(), substitute(body, y, &Term::Var(x.clone()))))
            }
            (Term::PairLet(_, x1, y1, _), Term::PairLet(v, x2, y2, body)) if (x1, y1) != (x2, y2) => {
                let fv = body.free_vars();
                let clash = |n: &Name, own: &Name| n != own && fv.contains(n) && n != x2 && n != y2;
                if clash(x1, x2) || clash(y1, y2) {
                    return None;
                }
                // rename through fresh names to allow swapped binders
                let avoid: BTreeSet<Name> = fv.iter().cloned().chain([x1.clone(), y1.clone()]).collect();
                let fx = x2.fresh(&|c| avoid.contains(c));
                let fy = y2.fresh(&|c| avoid.contains(c) || *c == fx);
                let mut m = HashMap::new();
                m.insert(x2.clone(), Term::Var(fx.clone()));
                m.insert(y2.clone(), Term::Var(fy.clone()));
                let tmp = crate::syntax::subst_many(body, &m);
                let mut m = HashMap::new();
                m.insert(fx, Term::Var(x1.clone()));
                m.insert(fy, Term::Var(y1.clone()));
                let body = crate::syntax::subst_many(&tmp, &m);
                Some(Term::pair_let((**v).clone(), x1.clone(), y1.clone(), body))
            }
            _ => Some(b.clone()),
        }
    }

    /// Returns whether congruence applies structurally, and its proof if
    /// every component is provable above `floor`.
    fn congruence(
        &mut self,
        ctx: &Context,
        a: &Term,
        b: &Term,
        ty: &LinType,
        depth: usize,
        floor: &QValue,
    ) -> (bool, Option<ProofTrace>) {
        let rule = match (a, b) {
            (Term::Op(f, xs), Term::Op(g, ys)) if f == g && xs.len() == ys.len() => ProofRule::CongOp,
            (Term::Pair(..), Term::Pair(..)) => ProofRule::CongTensor,
            (Term::UnitLet(..), Term::UnitLet(..)) => ProofRule::CongTo,
            (Term::PairLet(..), Term::PairLet(..)) => ProofRule::CongPm,
            (Term::Lam(_, s, _), Term::Lam(_, t, _)) if s == t => ProofRule::CongLam,
            (Term::App(..), Term::App(..)) => ProofRule::CongApp,
            _ => return (false, None),
        };
        if let (Term::Op(f, xs), Term::Op(_, ys)) = (a, b) {
            // argument sorts come from the signature
            let Some((sorts, _)) = self.theory.signature.sort(f) else {
                return (false, None);
            };
            let sorts = sorts.to_vec();
            let mut subs = Vec::with_capacity(xs.len());
            for (x, y) in xs.iter().zip(ys) {
                if ctx.names().any(|n| x.has_free(n) != y.has_free(n)) {
                    return (false, None);
                }
                subs.push(ctx.project(|n| x.has_free(n)));
            }
            let mut premises = Vec::new();
            for (((x, y), sub), ty) in xs.iter().zip(ys).zip(&subs).zip(&sorts) {
                let p = self.search(sub, x, y, ty, depth, floor);
                if p.label().leq(floor).expect("same quantale") {
                    return (true, None);
                }
                premises.push(p);
            }
            let label = quantale::tensor_all(self.theory.quantale, premises.iter().map(|p| p.label()))
                .expect("labels share the theory's quantale");
            return (true, Some(node(eq(ctx, a, b, ty, label), rule, premises)));
        }
        let Some(b2) = Self::align(a, b) else {
            return (false, None);
        };
        let sig = &self.theory.signature;
        let (Ok(da), Ok(db)) = (typecheck::infer(sig, ctx, a), typecheck::infer(sig, ctx, &b2)) else {
            return (false, None);
        };
        let mut premises = Vec::new();
        for (pa, pb) in da.premises.iter().zip(&db.premises) {
            if pa.ctx != pb.ctx || pa.ty != pb.ty {
                return (false, None);
            }
        }
        for (pa, pb) in da.premises.iter().zip(&db.premises) {
            let p = self.search(&pa.ctx, &pa.term, &pb.term, &pa.ty, depth, floor);
            if p.label().leq(floor).expect("same quantale") {
                return (true, None);
            }
            premises.push(p);
        }
        let label = quantale::tensor_all(self.theory.quantale, premises.iter().map(|p| p.label()))
            .expect("labels share the theory's quantale");
        (true, Some(node(eq(ctx, a, b, ty, label), rule, premises)))
    }

    /// `Γax ▷ from =_q to` as a trace: the axiom, flipped by symmetry if
    /// needed.
    fn axiom_trace(&self, o: Oriented) -> ProofTrace {
        let ax = &self.theory.axioms[o.index];
        let base = node(ax.clone(), ProofRule::Axiom(o.index), vec![]);
        if o.flipped {
            node(ax.flipped(), ProofRule::Symmetry, vec![base])
        } else {
            base
        }
    }

    /// Instantiates an oriented axiom at σ₁/σ₂ with the given premise
    /// proofs `σ₁(x) =_r σ₂(x)`, ending in context `ctx`.
    fn instantiate(&self, o: Oriented, premises: Vec<(Name, ProofTrace)>, ctx: &Context) -> ProofTrace {
        let mut cur = self.axiom_trace(o);
        let ax_names: Vec<Name> = cur.conclusion.ctx.names().cloned().collect();
        let incoming: BTreeSet<Name> = premises
            .iter()
            .flat_map(|(_, p)| p.conclusion.ctx.names().cloned())
            .chain(ctx.names().cloned())
            .collect();
        // Rename axiom variables out of the way first if they collide.
        let mut rename: HashMap<Name, Name> = HashMap::new();
        if ax_names.iter().any(|x| incoming.contains(x)) {
            let mut taken: BTreeSet<Name> = incoming.iter().cloned().chain(ax_names.iter().cloned()).collect();
            for x in ax_names.iter().rev() {
                let fresh = x.fresh(&|c| taken.contains(c));
                taken.insert(fresh.clone());
                let a = cur.conclusion.ctx.lookup(x).cloned().expect("axiom variable");
                let single = Context::new(vec![(fresh.clone(), a.clone())]).expect("one entry");
                let r = refl(self.theory, &single, &Term::Var(fresh.clone()), &a);
                cur = subst_node(move_last(cur, x), r);
                rename.insert(x.clone(), fresh);
            }
        }
        for (x, p) in premises.into_iter().rev() {
            let x = rename.get(&x).cloned().unwrap_or(x);
            cur = subst_node(move_last(cur, &x), p);
        }
        perm_to(cur, ctx)
    }

    /// Candidates from a root instance of an axiom: `a` matches the source
    /// side and `b` the target side, with recursive premises wherever the
    /// two substitutions disagree.
    fn root_axioms(
        &mut self,
        ctx: &Context,
        a: &Term,
        b: &Term,
        ty: &LinType,
        depth: usize,
        floor: &QValue,
    ) -> Vec<ProofTrace> {
        let mut out: Vec<ProofTrace> = Vec::new();
        let hb = head(b, &BTreeSet::new());
        for o in self.index.candidates(a, false) {
            if !self.index.target_fits(o, hb) {
                continue;
            }
            let ax = &self.theory.axioms[o.index];
            let (from, to) = if o.flipped { (&ax.rhs, &ax.lhs) } else { (&ax.lhs, &ax.rhs) };
            if ax.ty != *ty {
                continue;
            }
            let best = self.current_best(&out, floor);
            if ax.label.leq(&best).unwrap_or(true) {
                continue;
            }
            let sub_floor = ax.label.implies(&best).expect("same quantale");
            let vars = &self.index.vars[o.index];
            let (mut s1, mut s2) = (Subst::new(), Subst::new());
            if !pattern_match(from, a, vars, &mut s1) || !pattern_match(to, b, vars, &mut s2) {
                continue;
            }
            // premises are strict subterms unless a side is a bare variable
            let shrinks = !matches!(from, Term::Var(_)) && !matches!(to, Term::Var(_));
            let first_order = self.index.first_order[o.index];
            let ax_ctx = ax.ctx.clone();
            let label = ax.label.clone();
            let mut premises = Vec::new();
            let mut ok = true;
            for (x, xty) in ax_ctx.entries() {
                let (Some(l), Some(r)) = (s1.get(x), s2.get(x)) else {
                    ok = false;
                    break;
                };
                if ctx.names().any(|n| l.has_free(n) != r.has_free(n)) {
                    ok = false;
                    break;
                }
                let sub_ctx = ctx.project(|n| l.has_free(n));
                if !first_order {
                    let sig = &self.theory.signature;
                    let (Ok(dl), Ok(dr)) = (typecheck::infer(sig, &sub_ctx, l), typecheck::infer(sig, &sub_ctx, r)) else {
                        ok = false;
                        break;
                    };
                    if dl.ty != *xty || dr.ty != *xty {
                        ok = false;
                        break;
                    }
                }
                let p = if alpha_eq(l, r) {
                    let mut p = refl(self.theory, &sub_ctx, l, xty);
                    p.conclusion.rhs = r.clone();
                    p
                } else if shrinks {
                    self.search(&sub_ctx, l, r, xty, depth, &sub_floor)
                } else if depth > 1 {
                    self.search(&sub_ctx, l, r, xty, depth - 1, &sub_floor)
                } else {
                    ok = false;
                    break;
                };
                if p.label().leq(&sub_floor).expect("same quantale") {
                    ok = false;
                    break;
                }
                premises.push((x.clone(), p));
            }
            if !ok {
                continue;
            }
            let mut proof = self.instantiate(o, premises, ctx);
            debug_assert!(label.leq(&self.theory.quantale.top()).unwrap_or(false));
            proof.conclusion.lhs = a.clone();
            proof.conclusion.rhs = b.clone();
            push_useful(&mut out, proof);
            if out.iter().any(|p| p.label().is_top()) {
                break;
            }
        }
        out
    }

    /// One-step axiom rewrites of `t` at any position (or only the root).
    /// With `backward`, the target side is matched and the result `t'`
    /// satisfies `t' =_q t`; otherwise `t =_q t'`. Traces are built on
    /// demand by [`Prover::step_trace`].
    fn steps(&mut self, ctx: &Context, t: &Term, ty: &LinType, backward: bool, root_only: bool) -> Rc<Vec<StepCand>> {
        let key = (ctx.clone(), t.clone(), backward, root_only);
        if let Some(s) = self.steps.get(&key) {
            return s.clone();
        }
        let mut found = self.one_step(ctx, t, ty, backward, root_only);
        // best labels first; the quantales are chains
        found.sort_by(|x, y| match (x.label.leq(&y.label), y.label.leq(&x.label)) {
            (Ok(true), Ok(true)) => std::cmp::Ordering::Equal,
            (Ok(true), _) => std::cmp::Ordering::Greater,
            _ => std::cmp::Ordering::Less,
        });
        let s = Rc::new(found);
        self.steps.insert(key, s.clone());
        s
    }

    fn one_step(&self, ctx: &Context, t: &Term, ty: &LinType, backward: bool, root_only: bool) -> Vec<StepCand> {
        let sig = &self.theory.signature;
        let Ok(d) = typecheck::infer(sig, ctx, t) else {
            return vec![];
        };
        let mut out = Vec::new();
        let mut stack: Vec<(Vec<usize>, &typecheck::Derivation)> = vec![(vec![], &d)];
        while let Some((pos, dn)) = stack.pop() {
            for (i, p) in dn.premises.iter().enumerate().rev().filter(|_| !root_only) {
                let mut q = pos.clone();
                q.push(i);
                stack.push((q, p));
            }
            let s = &dn.term;
            for o in self.index.candidates(s, backward) {
                let ax = &self.theory.axioms[o.index];
                if ax.ty != dn.ty {
                    continue;
                }
                let (from, to) = if o.flipped { (&ax.rhs, &ax.lhs) } else { (&ax.lhs, &ax.rhs) };
                let (matched, other) = if backward { (to, from) } else { (from, to) };
                let vars = &self.index.vars[o.index];
                let mut sigma = Subst::new();
                if !pattern_match(matched, s, vars, &mut sigma) {
                    continue;
                }
                // operation sorts fix the types of first-order matches, and
                // the rewritten term is then typed by substitution
                let first_order = self.index.first_order[o.index];
                let typed = first_order || ax.ctx.entries().iter().all(|(x, xty)| {
                    sigma.get(x).is_some_and(|v| {
                        let fv: BTreeSet<Name> = v.free_vars().into_iter().collect();
                        let sub_ctx = dn.ctx.project(|n| fv.contains(n));
                        typecheck::infer(sig, &sub_ctx, v).is_ok_and(|dv| dv.ty == *xty)
                    })
                });
                if !typed {
                    continue;
                }
                let replaced = crate::syntax::subst_many(other, &sigma);
                if alpha_eq(&replaced, s) {
                    continue;
                }
                let Some(new_t) = t.replace_at(&pos, replaced.clone()) else {
                    continue;
                };
                if !first_order && typecheck::check(sig, ctx, &new_t, ty).is_err() {
                    continue;
                }
                out.push(StepCand {
                    new_t,
                    label: ax.label.clone(),
                    pos: pos.clone(),
                    oriented: o,
                    sigma,
                    backward,
                });
            }
        }
        out
    }

    fn step_trace(&self, ctx: &Context, t: &Term, c: &StepCand) -> ProofTrace {
        let d = typecheck::infer(&self.theory.signature, ctx, t).expect("typed when generated");
        let mut dn = &d;
        for &i in &c.pos {
            dn = &dn.premises[i];
        }
        let ax = &self.theory.axioms[c.oriented.index];
        let premises = ax
            .ctx
            .entries()
            .iter()
            .map(|(x, xty)| {
                let v = &c.sigma[x];
                let fv: BTreeSet<Name> = v.free_vars().into_iter().collect();
                let sub_ctx = dn.ctx.project(|n| fv.contains(n));
                (x.clone(), refl(self.theory, &sub_ctx, v, xty))
            })
            .collect();
        let mut inst = self.instantiate(c.oriented, premises, &dn.ctx);
        let s = &dn.term;
        let replaced = c.new_t.at(&c.pos).expect("rewritten position").clone();
        let (l, r) = if c.backward { (replaced, s.clone()) } else { (s.clone(), replaced) };
        inst.conclusion.lhs = l;
        inst.conclusion.rhs = r;
        self.lift(&d, &c.pos, inst, c.backward)
    }

    /// Wraps a proof about the subterm at `pos` in congruence nodes up to
    /// the root, with reflexivity for the siblings.
    fn lift(&self, d: &typecheck::Derivation, pos: &[usize], inner: ProofTrace, backward: bool) -> ProofTrace {
        let Some((&i, rest)) = pos.split_first() else {
            return inner;
        };
        let sub = self.lift(&d.premises[i], rest, inner, backward);
        let (lhs, rhs) = if backward {
            let l = d.term.with_child(i, sub.conclusion.lhs.clone()).expect("child index");
            (l, d.term.clone())
        } else {
            let r = d.term.with_child(i, sub.conclusion.rhs.clone()).expect("child index");
            (d.term.clone(), r)
        };
        let rule = match &d.term {
            Term::Op(..) => ProofRule::CongOp,
            Term::Pair(..) => ProofRule::CongTensor,
            Term::UnitLet(..) => ProofRule::CongTo,
            Term::PairLet(..) => ProofRule::CongPm,
            Term::Lam(..) => ProofRule::CongLam,
            Term::App(..) => ProofRule::CongApp,
            Term::Var(_) | Term::Star => unreachable!("leaves have no children"),
        };
        let label = sub.label().clone();
        let premises: Vec<ProofTrace> = d
            .premises
            .iter()
            .enumerate()
            .map(|(j, p)| {
                if j == i {
                    sub.clone()
                } else {
                    refl(self.theory, &p.ctx, &p.term, &p.ty)
                }
            })
            .collect();
        node(eq(&d.ctx, &lhs, &rhs, &d.ty, label), rule, premises)
    }

    #[allow(clippy::too_many_arguments)]
    fn transitive(
        &mut self,
        ctx: &Context,
        a: &Term,
        b: &Term,
        ty: &LinType,
        depth: usize,
        root_only: bool,
        floor: &QValue,
        cands: &mut Vec<ProofTrace>,
    ) {
        let top = self.theory.quantale.top();
        for c in self.steps(ctx, a, ty, false, root_only).iter() {
            let best = self.current_best(cands, floor);
            if c.label.leq(&best).unwrap_or(true) {
                break;
            }
            let sub_floor = c.label.implies(&best).expect("same quantale");
            let n = self.normal(&c.new_t);
            let rest = self.search(ctx, &n.term, b, ty, depth - 1, &sub_floor);
            if rest.label().leq(&sub_floor).unwrap_or(true) {
                continue;
            }
            let step = chain(self.step_trace(ctx, a, c), fig3(self.theory, ctx, ty, &n, &c.new_t, false));
            let mut p = chain(step, rest);
            p.conclusion.lhs = a.clone();
            p.conclusion.rhs = b.clone();
            push_useful(cands, p);
            if cands.iter().any(|c| *c.label() == top) {
                return;
            }
        }
        for c in self.steps(ctx, b, ty, true, root_only).iter() {
            let best = self.current_best(cands, floor);
            if c.label.leq(&best).unwrap_or(true) {
                break;
            }
            let sub_floor = c.label.implies(&best).expect("same quantale");
            let n = self.normal(&c.new_t);
            let rest = self.search(ctx, a, &n.term, ty, depth - 1, &sub_floor);
            if rest.label().leq(&sub_floor).unwrap_or(true) {
                continue;
            }
            let step = chain(fig3(self.theory, ctx, ty, &n, &c.new_t, true), self.step_trace(ctx, b, c));
            let mut p = chain(rest, step);
            p.conclusion.lhs = a.clone();
            p.conclusion.rhs = b.clone();
            push_useful(cands, p);
            if cands.iter().any(|c| *c.label() == top) {
                return;
            }
        }
    }
}

/// A one-step rewrite found by [`Prover::one_step`], not yet turned into
/// a trace.
struct StepCand {
    new_t: Term,
    label: QValue,
    pos: Vec<usize>,
    oriented: Oriented,
    sigma: Subst,
    backward: bool,
}

fn push_useful(cands: &mut Vec<ProofTrace>, p: ProofTrace) {
    if p.label().is_bottom() {
        return;
    }
    if cands.iter().any(|c| p.label().leq(c.label()).unwrap_or(false)) {
        return;
    }
    cands.retain(|c| !c.label().leq(p.label()).unwrap_or(false));
    cands.push(p);
}

fn validate_goal(theory: &Theory, goal: &VEquation) -> Result<(), DeductionError> {
    if goal.label.spec() != theory.quantale {
        return Err(DeductionError::Quantale {
            expected: theory.quantale,
            found: goal.label.spec(),
        });
    }
    for side in [&goal.lhs, &goal.rhs] {
        typecheck::check(&theory.signature, &goal.ctx, side, &goal.ty)?;
    }
    Ok(())
}

/// Proves `goal` within budget or reports `Unknown`.
pub fn check_eq(theory: &Theory, goal: &VEquation, budget: SearchBudget) -> Result<Outcome, DeductionError> {
    check_eq_with(theory, goal, budget, JoinMode::Full)
}

pub fn check_eq_with(
    theory: &Theory,
    goal: &VEquation,
    budget: SearchBudget,
    mode: JoinMode,
) -> Result<Outcome, DeductionError> {
    Prover::new(theory, budget).with_join_mode(mode).check(goal)
}

/// The join of the labels of all proofs found within budget, with a trace
/// deriving it.
pub fn best_bound_trace(
    theory: &Theory,
    ctx: &Context,
    v: &Term,
    w: &Term,
    budget: SearchBudget,
) -> Result<ProofTrace, DeductionError> {
    Prover::new(theory, budget).best(ctx, v, w)
}

pub fn best_bound(theory: &Theory, ctx: &Context, v: &Term, w: &Term, budget: SearchBudget) -> Result<QValue, DeductionError> {
    Ok(best_bound_trace(theory, ctx, v, w, budget)?.conclusion.label)
}

/// Checks `v =_r w` for the first `budget.arch_approximants`
/// approximants `r ≪ q`. A finite surrogate for the premise of (arch); it
/// never produces a proof.
pub fn arch_closure_check(
    theory: &Theory,
    ctx: &Context,
    v: &Term,
    w: &Term,
    q: &QValue,
    budget: SearchBudget,
) -> Result<bool, DeductionError> {
    let best = best_bound(theory, ctx, v, w, budget)?;
    let ty = typecheck::infer(&theory.signature, ctx, v)?.ty;
    for r in q.approximants(budget.arch_approximants.max(1)) {
        if !r.leq(&best).map_err(|_| DeductionError::Quantale {
            expected: theory.quantale,
            found: r.spec(),
        })? {
            let goal = eq(ctx, v, w, &ty, r);
            if !check_eq(theory, &goal, budget)?.is_proved() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests;
