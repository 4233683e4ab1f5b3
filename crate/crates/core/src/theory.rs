//! Signatures, V-equations and theory files.
//!
//! A theory file is line oriented; `#` starts a comment.
//!
//! ```text
//! quantale metric
//! ground X
//! let N = 32
//! op wait_n : X -> X for n in 0..N
//! equation [x:X] wait_0(x) = x
//! axiom [x:X] wait_n(wait_m(x)) ={0} wait_{n+m}(x) for n,m in 0..N
//! axiom [x:X] wait_n(x) ={|n-m|} wait_m(x) for n,m in 0..N
//! axiom [x:X] wait_n(x) <= wait_m(x) for n,m in 0..N if n <= m
//! define twice = \x:X. wait_1(wait_1(x))
//! symmetric true
//! ```
//!
//! Ranges `a..b` are inclusive. In identifiers, an underscore segment equal
//! to a schema variable is replaced by its value, and `_{expr}` by the value
//! of `expr`. Instances mentioning a generated operation name that the
//! signature does not declare are dropped, which is how schemas are cut off
//! at the declared bound.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::quantale::{Extended, QValue, QuantaleError, QuantaleSpec};
use crate::syntax::{parse_context, parse_term, parse_type, Context, LinType, ParseEnv, SyntaxError, Term};
use crate::typecheck::{self, TypeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryErrorKind {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Sort(#[from] TypeError),
    #[error("label `{0}` is not a basis element of the quantale")]
    NonBasisLabel(String),
    #[error(transparent)]
    Quantale(#[from] QuantaleError),
    #[error("duplicate operation symbol `{0}`")]
    DuplicateOperation(String),
    #[error("operation `{0}` must take at least one argument")]
    Nullary(String),
    #[error("undeclared ground type `{0}`")]
    UnknownGround(String),
    #[error("sides have different types: {0} vs {1}")]
    SideTypes(LinType, LinType),
    #[error("definition `{0}` must be a closed term")]
    OpenDefinition(String),
    #[error("{0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct TheoryError {
    pub line: usize,
    pub kind: TheoryErrorKind,
}

fn malformed(msg: impl Into<String>) -> TheoryErrorKind {
    TheoryErrorKind::Malformed(msg.into())
}

/// Ground types and sorted operation symbols `f : A₁, …, Aₙ → A`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signature {
    ground: BTreeSet<String>,
    ops: BTreeMap<String, (Vec<LinType>, LinType)>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_ground(&mut self, name: &str) {
        self.ground.insert(name.to_string());
    }

    pub fn add_op(&mut self, name: &str, args: Vec<LinType>, result: LinType) -> Result<(), TheoryErrorKind> {
        if args.is_empty() {
            return Err(TheoryErrorKind::Nullary(name.to_string()));
        }
        let mut used = BTreeSet::new();
        for t in args.iter().chain(std::iter::once(&result)) {
            t.grounds(&mut used);
        }
        if let Some(g) = used.iter().find(|g| !self.ground.contains(*g)) {
            return Err(TheoryErrorKind::UnknownGround(g.clone()));
        }
        if self.ops.contains_key(name) {
            return Err(TheoryErrorKind::DuplicateOperation(name.to_string()));
        }
        self.ops.insert(name.to_string(), (args, result));
        Ok(())
    }

    /// Convenience constructor from `(name, "A, B", "C")` triples; ground
    /// types are declared implicitly.
    pub fn parse_decls(decls: &[(&str, &str, &str)]) -> Result<Self, TheoryErrorKind> {
        let mut sig = Signature::new();
        for (name, args, result) in decls {
            let args: Vec<LinType> = args.split(',').map(parse_type).collect::<Result<_, _>>()?;
            let result = parse_type(result)?;
            let mut g = BTreeSet::new();
            for t in args.iter().chain(std::iter::once(&result)) {
                t.grounds(&mut g);
            }
            for name in g {
                sig.add_ground(&name);
            }
            sig.add_op(name, args, result)?;
        }
        Ok(sig)
    }

    pub fn sort(&self, symbol: &str) -> Option<(&[LinType], &LinType)> {
        self.ops.get(symbol).map(|(a, r)| (a.as_slice(), r))
    }

    pub fn grounds(&self) -> &BTreeSet<String> {
        &self.ground
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, &[LinType], &LinType)> {
        self.ops.iter().map(|(k, (a, r))| (k.as_str(), a.as_slice(), r))
    }

    pub fn parse_env(&self) -> ParseEnv {
        ParseEnv::with_ops(self.ops.iter().map(|(k, (a, _))| (k.clone(), a.len())))
    }

    fn check_type(&self, t: &LinType) -> Result<(), TheoryErrorKind> {
        let mut used = BTreeSet::new();
        t.grounds(&mut used);
        match used.iter().find(|g| !self.ground.contains(*g)) {
            Some(g) => Err(TheoryErrorKind::UnknownGround(g.clone())),
            None => Ok(()),
        }
    }
}

/// `Γ ▷ v =_q w : A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VEquation {
    pub ctx: Context,
    pub lhs: Term,
    pub rhs: Term,
    pub ty: LinType,
    pub label: QValue,
}

impl VEquation {
    /// Typechecks both sides and checks the label.
    pub fn new(sig: &Signature, ctx: Context, lhs: Term, rhs: Term, label: QValue) -> Result<Self, TheoryErrorKind> {
        if !label.is_basis() {
            return Err(TheoryErrorKind::NonBasisLabel(label.to_string()));
        }
        for (_, t) in ctx.entries() {
            sig.check_type(t)?;
        }
        let dl = typecheck::infer(sig, &ctx, &lhs)?;
        let dr = typecheck::infer(sig, &ctx, &rhs)?;
        if dl.ty != dr.ty {
            return Err(TheoryErrorKind::SideTypes(dl.ty, dr.ty));
        }
        Ok(VEquation {
            ctx,
            lhs,
            rhs,
            ty: dl.ty,
            label,
        })
    }

    pub fn flipped(&self) -> VEquation {
        VEquation {
            ctx: self.ctx.clone(),
            lhs: self.rhs.clone(),
            rhs: self.lhs.clone(),
            ty: self.ty.clone(),
            label: self.label.clone(),
        }
    }
}

impl fmt::Display for VEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |- {} ={{{}}} {} : {}", self.ctx, self.lhs, self.label, self.rhs, self.ty)
    }
}

/// The two top-labelled directed equations making up `Γ ▷ v = w : A`.
pub fn classical_equation(
    sig: &Signature,
    spec: QuantaleSpec,
    ctx: &Context,
    lhs: &Term,
    rhs: &Term,
    ty: &LinType,
) -> Result<[VEquation; 2], TheoryErrorKind> {
    let fwd = VEquation::new(sig, ctx.clone(), lhs.clone(), rhs.clone(), spec.top())?;
    if fwd.ty != *ty {
        return Err(TheoryErrorKind::SideTypes(fwd.ty, ty.clone()));
    }
    let bwd = fwd.flipped();
    Ok([fwd, bwd])
}

/// A linear Vλ-theory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theory {
    pub signature: Signature,
    pub quantale: QuantaleSpec,
    pub axioms: Vec<VEquation>,
    pub symmetric: bool,
    pub defs: BTreeMap<String, (Term, LinType)>,
}

impl Theory {
    pub fn new(signature: Signature, quantale: QuantaleSpec) -> Self {
        Theory {
            signature,
            quantale,
            axioms: Vec::new(),
            symmetric: false,
            defs: BTreeMap::new(),
        }
    }

    pub fn parse_env(&self) -> ParseEnv {
        let mut env = self.signature.parse_env();
        env.defs = self.defs.iter().map(|(k, (t, _))| (k.clone(), t.clone())).collect();
        env
    }

    pub fn parse_term_in(&self, ctx: &Context, text: &str) -> Result<Term, SyntaxError> {
        let mut env = self.parse_env();
        env.reserved = ctx.names().cloned().collect();
        parse_term(text, &env)
    }

    /// Serialises the instantiated theory; [`load_theory`] reads it back.
    pub fn to_text(&self) -> String {
        let mut out = format!("quantale {}\n", self.quantale);
        for g in self.signature.grounds() {
            out.push_str(&format!("ground {g}\n"));
        }
        for (name, args, result) in self.signature.ops() {
            let args: Vec<String> = args.iter().map(|a| format!("({a})")).collect();
            out.push_str(&format!("op {name} : {} -> {result}\n", args.join(", ")));
        }
        out.push_str(&format!("symmetric {}\n", self.symmetric));
        for (name, (term, _)) in &self.defs {
            out.push_str(&format!("define {name} = {term}\n"));
        }
        for ax in &self.axioms {
            let ctx: Vec<String> = ax.ctx.entries().iter().map(|(x, t)| format!("{x}:{t}")).collect();
            out.push_str(&format!("axiom [{}] {} ={{{}}} {}\n", ctx.join(", "), ax.lhs, ax.label, ax.rhs));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Index arithmetic for schemas.

pub(crate) type Bindings = BTreeMap<String, BigRational>;

struct Expr<'a> {
    s: &'a [u8],
    i: usize,
    vars: &'a Bindings,
}

impl<'a> Expr<'a> {
    fn eval(text: &'a str, vars: &'a Bindings) -> Result<BigRational, TheoryErrorKind> {
        let mut e = Expr {
            s: text.as_bytes(),
            i: 0,
            vars,
        };
        let v = e.cmp_expr()?;
        e.ws();
        if e.i != e.s.len() {
            return Err(malformed(format!("trailing input in expression `{text}`")));
        }
        Ok(v)
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(tok.as_bytes()) {
            self.i += tok.len();
            true
        } else {
            false
        }
    }

    fn cmp_expr(&mut self) -> Result<BigRational, TheoryErrorKind> {
        let mut acc = self.relation()?;
        while self.eat("and") {
            let r = self.relation()?;
            acc = truth(!acc.is_zero() && !r.is_zero());
        }
        Ok(acc)
    }

    fn relation(&mut self) -> Result<BigRational, TheoryErrorKind> {
        let a = self.sum()?;
        for op in ["<=", ">=", "==", "!=", "<", ">"] {
            if self.eat(op) {
                let b = self.sum()?;
                return Ok(truth(match op {
                    "<=" => a <= b,
                    ">=" => a >= b,
                    "==" => a == b,
                    "!=" => a != b,
                    "<" => a < b,
                    _ => a > b,
                }));
            }
        }
        Ok(a)
    }

    fn sum(&mut self) -> Result<BigRational, TheoryErrorKind> {
        let mut acc = self.product()?;
        loop {
            if self.eat("+") {
                acc += self.product()?;
            } else if self.eat("-") {
                acc -= self.product()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<BigRational, TheoryErrorKind> {
        let mut acc = self.atom()?;
        loop {
            if self.eat("*") {
                acc *= self.atom()?;
            } else if self.eat("/") {
                let d = self.atom()?;
                if d.is_zero() {
                    return Err(malformed("division by zero"));
                }
                acc /= d;
            } else {
                return Ok(acc);
            }
        }
    }

    fn atom(&mut self) -> Result<BigRational, TheoryErrorKind> {
        self.ws();
        if self.eat("(") {
            let v = self.sum()?;
            if !self.eat(")") {
                return Err(malformed("expected `)`"));
            }
            return Ok(v);
        }
        if self.eat("|") {
            let v = self.sum()?;
            if !self.eat("|") {
                return Err(malformed("expected closing `|`"));
            }
            return Ok(v.abs());
        }
        if self.eat("-") {
            return Ok(-self.atom()?);
        }
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        let word = std::str::from_utf8(&self.s[start..self.i]).unwrap_or_default();
        if word.is_empty() {
            return Err(malformed("expected a number or index variable"));
        }
        if let Ok(n) = word.parse::<BigInt>() {
            return Ok(BigRational::from_integer(n));
        }
        self.vars
            .get(word)
            .cloned()
            .ok_or_else(|| malformed(format!("unknown index variable `{word}`")))
    }
}

pub(crate) fn eval_expr(text: &str, vars: &Bindings) -> Result<BigRational, TheoryErrorKind> {
    Expr::eval(text, vars)
}

/// Instantiates `body for ... if ...`: one expanded body per assignment,
/// with the bindings used and whether any identifier was generated.
pub(crate) fn expand_schema(line: &str, consts: &Bindings) -> Result<Vec<(String, Bindings, bool)>, TheoryErrorKind> {
    let (body, schema, cond) = split_schema(line);
    let mut out = Vec::new();
    for b in assignments(schema, cond, consts)? {
        let (text, generated) = expand_names(body, &b)?;
        out.push((text, b, !generated.is_empty()));
    }
    Ok(out)
}

fn truth(b: bool) -> BigRational {
    BigRational::from_integer(BigInt::from(b as i32))
}

fn as_index(v: &BigRational) -> Result<i64, TheoryErrorKind> {
    if !v.is_integer() || v.is_negative() {
        return Err(malformed(format!("index `{v}` is not a natural number")));
    }
    v.to_integer()
        .to_i64()
        .ok_or_else(|| malformed("index out of range"))
}

/// Instantiates identifier templates; returns the text and the set of
/// identifiers that were rewritten.
fn expand_names(text: &str, vars: &Bindings) -> Result<(String, BTreeSet<String>), TheoryErrorKind> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::new();
    let mut generated = BTreeSet::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !(c.is_alphanumeric() || c == '_') {
            out.push(c);
            i += 1;
            continue;
        }
        let mut ident = String::new();
        let mut changed = false;
        let mut first = true;
        loop {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '\'') {
                i += 1;
            }
            let seg: String = chars[start..i].iter().collect();
            if !first && vars.contains_key(&seg) {
                ident.push_str(&as_index(&vars[&seg])?.to_string());
                changed = true;
            } else {
                ident.push_str(&seg);
            }
            first = false;
            if i < chars.len() && chars[i] == '_' {
                ident.push('_');
                i += 1;
                if i < chars.len() && chars[i] == '{' {
                    let close = chars[i..]
                        .iter()
                        .position(|&c| c == '}')
                        .ok_or_else(|| malformed("unclosed `_{`"))?;
                    let expr: String = chars[i + 1..i + close].iter().collect();
                    ident.push_str(&as_index(&Expr::eval(&expr, vars)?)?.to_string());
                    changed = true;
                    i += close + 1;
                }
                continue;
            }
            break;
        }
        if changed {
            generated.insert(ident.clone());
        }
        out.push_str(&ident);
    }
    Ok((out, generated))
}

/// Splits `body for n,m in 0..N, k in 1..2 if cond` into its parts.
fn split_schema(line: &str) -> (&str, Option<&str>, Option<&str>) {
    let (body, cond) = match find_keyword(line, "if") {
        Some(i) => (&line[..i], Some(line[i + 2..].trim())),
        None => (line, None),
    };
    match find_keyword(body, "for") {
        Some(i) => (body[..i].trim(), Some(body[i + 3..].trim()), cond),
        None => (body.trim(), None, cond),
    }
}

fn find_keyword(s: &str, kw: &str) -> Option<usize> {
    let pat = format!(" {kw} ");
    s.rfind(&pat).map(|i| i + 1)
}

fn assignments(spec: Option<&str>, cond: Option<&str>, consts: &Bindings) -> Result<Vec<Bindings>, TheoryErrorKind> {
    let mut ranges: Vec<(String, i64, i64)> = Vec::new();
    if let Some(spec) = spec {
        // groups are `vars in a..b`, separated by commas that follow a range
        let mut rest = spec;
        while !rest.trim().is_empty() {
            let (vars, after) = rest
                .split_once(" in ")
                .ok_or_else(|| malformed(format!("expected `in` in `{rest}`")))?;
            let (range, tail) = match after.find(',') {
                Some(i) => (&after[..i], &after[i + 1..]),
                None => (after, ""),
            };
            let (lo, hi) = range
                .split_once("..")
                .ok_or_else(|| malformed(format!("expected a range `a..b`, found `{range}`")))?;
            let lo = as_index(&Expr::eval(lo.trim_start_matches('='), consts)?)?;
            let hi = as_index(&Expr::eval(hi.trim_start_matches('='), consts)?)?;
            for v in vars.split(',') {
                let v = v.trim();
                if v.is_empty() {
                    return Err(malformed("empty schema variable"));
                }
                ranges.push((v.to_string(), lo, hi));
            }
            rest = tail;
        }
    }
    let mut out = vec![consts.clone()];
    for (v, lo, hi) in &ranges {
        let mut next = Vec::new();
        for b in &out {
            for k in *lo..=*hi {
                let mut b = b.clone();
                b.insert(v.clone(), BigRational::from_integer(BigInt::from(k)));
                next.push(b);
            }
        }
        out = next;
    }
    if let Some(cond) = cond {
        let mut kept = Vec::new();
        for b in out {
            if !Expr::eval(cond, &b)?.is_zero() {
                kept.push(b);
            }
        }
        out = kept;
    }
    Ok(out)
}

fn parse_label(spec: QuantaleSpec, text: &str, vars: &Bindings) -> Result<QValue, TheoryErrorKind> {
    let t = text.trim();
    if let Ok(v) = spec.parse_value(t) {
        return Ok(v);
    }
    match Expr::eval(t, vars) {
        Ok(r) => spec.value(Extended::Finite(r)).map_err(|_| TheoryErrorKind::NonBasisLabel(t.to_string())),
        Err(_) => match spec.parse_value(t) {
            Err(QuantaleError::OutOfCarrier { .. }) => Err(TheoryErrorKind::NonBasisLabel(t.to_string())),
            _ => Err(TheoryErrorKind::NonBasisLabel(t.to_string())),
        },
    }
}

enum Relation<'a> {
    Labelled(&'a str),
    Leq,
    Classical,
}

/// `[ctx] lhs REL rhs` where REL is `={q}`, `<=` or `=`.
fn split_equation(text: &str) -> Result<(&str, &str, Relation<'_>, &str), TheoryErrorKind> {
    let text = text.trim();
    let rest = text
        .strip_prefix('[')
        .ok_or_else(|| malformed("equations start with a bracketed context `[x:A, ...]`"))?;
    let close = rest.find(']').ok_or_else(|| malformed("unclosed context bracket"))?;
    let ctx = &rest[..close];
    let eq = &rest[close + 1..];
    if let Some(i) = eq.find("={") {
        let close = eq[i..].find('}').ok_or_else(|| malformed("unclosed label"))? + i;
        return Ok((ctx, &eq[..i], Relation::Labelled(&eq[i + 2..close]), &eq[close + 1..]));
    }
    if let Some(i) = eq.find("<=") {
        return Ok((ctx, &eq[..i], Relation::Leq, &eq[i + 2..]));
    }
    if let Some(i) = eq.find('=') {
        return Ok((ctx, &eq[..i], Relation::Classical, &eq[i + 1..]));
    }
    Err(malformed("expected `={q}`, `<=` or `=`"))
}

/// Parses and validates a theory file.
pub fn load_theory(text: &str) -> Result<Theory, TheoryError> {
    Loader::default().load(text)
}

#[derive(Default)]
struct Loader {
    quantale: Option<QuantaleSpec>,
    sig: Signature,
    consts: Bindings,
    symmetric: bool,
    defs: BTreeMap<String, (Term, LinType)>,
    axioms: Vec<VEquation>,
}

impl Loader {
    fn load(mut self, text: &str) -> Result<Theory, TheoryError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.directive(line).map_err(|kind| TheoryError { line: n + 1, kind })?;
        }
        let quantale = self.quantale.unwrap_or(QuantaleSpec::Lawvere);
        Ok(Theory {
            signature: self.sig,
            quantale,
            axioms: self.axioms,
            symmetric: self.symmetric,
            defs: self.defs,
        })
    }

    fn spec(&self) -> Result<QuantaleSpec, TheoryErrorKind> {
        self.quantale
            .ok_or_else(|| malformed("`quantale` must be declared before labelled equations"))
    }

    fn env(&self, ctx: &Context) -> ParseEnv {
        let mut env = self.sig.parse_env();
        env.defs = self.defs.iter().map(|(k, (t, _))| (k.clone(), t.clone())).collect();
        env.reserved = ctx.names().cloned().collect();
        env
    }

    fn directive(&mut self, line: &str) -> Result<(), TheoryErrorKind> {
        let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match kw {
            "quantale" => {
                self.quantale = Some(rest.parse()?);
            }
            "ground" => {
                for g in rest.split_whitespace() {
                    if g == "I" {
                        return Err(malformed("`I` is the unit type, not a ground type"));
                    }
                    self.sig.add_ground(g);
                }
            }
            "let" => {
                let (name, value) = rest
                    .split_once('=')
                    .ok_or_else(|| malformed("expected `let NAME = value`"))?;
                let v = Expr::eval(value, &self.consts)?;
                self.consts.insert(name.trim().to_string(), v);
            }
            "symmetric" => {
                self.symmetric = match rest {
                    "true" => true,
                    "false" => false,
                    other => return Err(malformed(format!("expected true or false, found `{other}`"))),
                };
            }
            "op" => self.op(rest)?,
            "axiom" | "equation" => self.equation(rest, kw == "equation")?,
            "define" => self.define(rest)?,
            other => return Err(malformed(format!("unknown directive `{other}`"))),
        }
        Ok(())
    }

    fn op(&mut self, rest: &str) -> Result<(), TheoryErrorKind> {
        let (body, schema, cond) = split_schema(rest);
        for b in assignments(schema, cond, &self.consts)? {
            let (body, _) = expand_names(body, &b)?;
            let (name, sort) = body
                .split_once(':')
                .ok_or_else(|| malformed("expected `op NAME : A, B -> C`"))?;
            let (args, result) = sort
                .rsplit_once("->")
                .ok_or_else(|| malformed("expected `->` in operation sort"))?;
            let args = split_top_commas(args)
                .into_iter()
                .map(parse_type)
                .collect::<Result<Vec<_>, _>>()?;
            self.sig.add_op(name.trim(), args, parse_type(result)?)?;
        }
        Ok(())
    }

    fn define(&mut self, rest: &str) -> Result<(), TheoryErrorKind> {
        let (name, body) = rest
            .split_once('=')
            .ok_or_else(|| malformed("expected `define NAME = term`"))?;
        let name = name.trim();
        if self.sig.sort(name).is_some() {
            return Err(TheoryErrorKind::DuplicateOperation(name.to_string()));
        }
        let term = parse_term(body, &self.env(&Context::empty()))?;
        if !term.free_vars().is_empty() {
            return Err(TheoryErrorKind::OpenDefinition(name.to_string()));
        }
        let d = typecheck::infer(&self.sig, &Context::empty(), &term)?;
        self.defs.insert(name.to_string(), (term, d.ty));
        Ok(())
    }

    fn equation(&mut self, rest: &str, classical: bool) -> Result<(), TheoryErrorKind> {
        let spec = self.spec()?;
        let (body, schema, cond) = split_schema(rest);
        let mut env = self.env(&Context::empty());
        for b in assignments(schema, cond, &self.consts)? {
            let (ctx_text, lhs_text, rel, rhs_text) = split_equation(body)?;
            let (lhs_text, gen_l) = expand_names(lhs_text, &b)?;
            let (rhs_text, gen_r) = expand_names(rhs_text, &b)?;
            if gen_l.iter().chain(&gen_r).any(|g| self.sig.sort(g).is_none()) {
                continue;
            }
            let ctx = parse_context(ctx_text)?;
            env.reserved = ctx.names().cloned().collect();
            let lhs = parse_term(&lhs_text, &env)?;
            let rhs = parse_term(&rhs_text, &env)?;
            match (rel, classical) {
                (Relation::Classical, true) => {
                    let eq = VEquation::new(&self.sig, ctx, lhs, rhs, spec.top())?;
                    let flipped = eq.flipped();
                    self.axioms.push(eq);
                    self.axioms.push(flipped);
                }
                (Relation::Labelled(l), false) => {
                    let label = parse_label(spec, l, &b)?;
                    self.axioms.push(VEquation::new(&self.sig, ctx, lhs, rhs, label)?);
                }
                (Relation::Leq, false) => {
                    self.axioms.push(VEquation::new(&self.sig, ctx, lhs, rhs, spec.top())?);
                }
                (_, true) => return Err(malformed("`equation` uses a plain `=`")),
                (Relation::Classical, false) => {
                    return Err(malformed("`axiom` needs a label `={q}` or `<=`; use `equation` for `=`"))
                }
            }
        }
        Ok(())
    }
}

fn split_top_commas(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// A goal `ctx |- v ={q} w`, `ctx |- v <= w` or, without a label,
/// `ctx |- v ~ w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub ctx: Context,
    pub lhs: Term,
    pub rhs: Term,
    pub ty: LinType,
    pub label: Option<QValue>,
}

impl Goal {
    pub fn equation(&self) -> Option<VEquation> {
        self.label.as_ref().map(|q| VEquation {
            ctx: self.ctx.clone(),
            lhs: self.lhs.clone(),
            rhs: self.rhs.clone(),
            ty: self.ty.clone(),
            label: q.clone(),
        })
    }
}

fn split_turnstile(text: &str) -> Result<(Context, &str), TheoryErrorKind> {
    let (ctx, body) = text
        .split_once("|-")
        .ok_or_else(|| malformed("expected `ctx |- ...`"))?;
    Ok((parse_context(ctx)?, body))
}

/// Parses and typechecks a goal against the theory.
pub fn parse_goal(theory: &Theory, text: &str) -> Result<Goal, TheoryErrorKind> {
    let (ctx, body) = split_turnstile(text)?;
    let (lhs, label, rhs) = if let Some(i) = body.find("={") {
        let close = body[i..].find('}').ok_or_else(|| malformed("unclosed label"))? + i;
        let label = parse_label(theory.quantale, &body[i + 2..close], &Bindings::new())?;
        (&body[..i], Some(label), &body[close + 1..])
    } else if let Some(i) = body.find("<=") {
        (&body[..i], Some(theory.quantale.top()), &body[i + 2..])
    } else if let Some(i) = body.find('~') {
        (&body[..i], None, &body[i + 1..])
    } else {
        return Err(malformed("expected `={q}`, `<=` or `~` in goal"));
    };
    let lhs = theory.parse_term_in(&ctx, lhs)?;
    let rhs = theory.parse_term_in(&ctx, rhs)?;
    let probe = theory.quantale.top();
    let eq = VEquation::new(&theory.signature, ctx, lhs, rhs, label.clone().unwrap_or(probe))?;
    Ok(Goal {
        ctx: eq.ctx,
        lhs: eq.lhs,
        rhs: eq.rhs,
        ty: eq.ty,
        label,
    })
}

/// Parses `ctx |- v` into a context and term.
pub fn parse_judgement(theory: &Theory, text: &str) -> Result<(Context, Term), TheoryErrorKind> {
    let (ctx, body) = split_turnstile(text)?;
    let body = body.split_once(" : ").map(|(t, _)| t).unwrap_or(body);
    let term = theory.parse_term_in(&ctx, body)?;
    Ok((ctx, term))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const WAITS: &str = "\
quantale metric
ground X
let N = 6
op wait_n : X -> X for n in 0..N
equation [x:X] wait_0(x) = x
axiom [x:X] wait_n(wait_m(x)) ={0} wait_{n+m}(x) for n,m in 0..N
axiom [x:X] wait_n(x) ={|n-m|} wait_m(x) for n,m in 0..N
symmetric true
";

    #[test]
    fn loads_wait_theory() {
        let t = load_theory(WAITS).unwrap();
        assert_eq!(t.quantale, QuantaleSpec::Lawvere);
        assert!(t.symmetric);
        assert_eq!(t.signature.ops().count(), 7);
        let compositions = (0..=6).flat_map(|n| (0..=6).map(move |m| n + m)).filter(|s| *s <= 6).count();
        assert_eq!(t.axioms.len(), 2 + compositions + 49);
        let first = &t.axioms[0];
        assert_eq!(first.lhs.to_string(), "wait_0(x)");
        assert_eq!(first.rhs.to_string(), "x");
        assert!(first.label.is_top());
        let eps = t
            .axioms
            .iter()
            .find(|a| a.lhs.to_string() == "wait_2(x)" && a.rhs.to_string() == "wait_5(x)")
            .unwrap();
        assert_eq!(eps.label, QuantaleSpec::Lawvere.int(3).unwrap());
    }

    #[test]
    fn ordered_theory_with_condition() {
        let src = "\
quantale bool
ground X
op wait_n : X -> X for n in 0..3
axiom [x:X] wait_n(x) <= wait_m(x) for n,m in 0..3 if n <= m
";
        let t = load_theory(src).unwrap();
        assert_eq!(t.axioms.len(), 10);
        assert!(t.axioms.iter().all(|a| a.label == QuantaleSpec::Boolean.top()));
    }

    #[test]
    fn empty_theory() {
        let t = load_theory("quantale godel\n").unwrap();
        assert!(t.axioms.is_empty());
    }

    #[test]
    fn round_trip() {
        let mut src = WAITS.to_string();
        src.push_str("define twice = \\y:X. wait_1(wait_1(y))\n");
        let t = load_theory(&src).unwrap();
        let again = load_theory(&t.to_text()).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn rejections() {
        let base = "quantale metric\nground X\nop f : X -> X\n";
        let err = |extra: &str| load_theory(&format!("{base}{extra}")).unwrap_err().kind;
        assert!(matches!(err("axiom [x:X] f(x) ={sqrt(2)} x\n"), TheoryErrorKind::NonBasisLabel(_)));
        assert!(matches!(err("axiom [x:X] f(x) ={-1} x\n"), TheoryErrorKind::NonBasisLabel(_)));
        assert!(matches!(
            err("axiom [x:X, y:X] f(x) ={0} x\n"),
            TheoryErrorKind::Sort(TypeError::Unused(_))
        ));
        assert!(matches!(err("op f : X -> X\n"), TheoryErrorKind::DuplicateOperation(_)));
        assert!(matches!(err("op g : Y -> X\n"), TheoryErrorKind::UnknownGround(_)));
        assert!(matches!(err("axiom [x:X] f(x) ={1} g(x)\n"), TheoryErrorKind::Syntax(_)));
        assert_eq!(load_theory(&format!("{base}bogus\n")).unwrap_err().line, 4);
    }

    #[test]
    fn classical_equations() {
        let t = load_theory(WAITS).unwrap();
        let ctx = parse_context("x:X").unwrap();
        let v = t.parse_term_in(&ctx, "wait_0(x)").unwrap();
        let w = Term::var("x");
        let [a, b] = classical_equation(&t.signature, t.quantale, &ctx, &v, &w, &LinType::ground("X")).unwrap();
        assert!(a.label.is_top() && b.label.is_top());
        assert_eq!((a.lhs.clone(), a.rhs.clone()), (b.rhs.clone(), b.lhs.clone()));
        let bool_sig = t.signature.clone();
        let [c, _] = classical_equation(&bool_sig, QuantaleSpec::Boolean, &ctx, &w, &w, &LinType::ground("X")).unwrap();
        assert_eq!(c.label, QuantaleSpec::Boolean.int(1).unwrap());
    }

    #[test]
    fn goals() {
        let t = load_theory(WAITS).unwrap();
        let g = parse_goal(&t, "x:X |- wait_2(x) ={3} wait_5(x)").unwrap();
        assert_eq!(g.label, Some(QuantaleSpec::Lawvere.int(3).unwrap()));
        let g = parse_goal(&t, "x:X |- wait_2(x) ~ wait_5(x)").unwrap();
        assert!(g.label.is_none());
        assert!(parse_goal(&t, "x:X |- wait_2(x) ={3} wait_5(y)").is_err());
    }

    #[test]
    fn label_expressions() {
        let mut b = Bindings::new();
        b.insert("n".into(), BigRational::from_integer(3.into()));
        b.insert("m".into(), BigRational::from_integer(5.into()));
        let l = QuantaleSpec::Lawvere;
        assert_eq!(parse_label(l, "|n-m|/10", &b).unwrap(), l.ratio(1, 5).unwrap());
        assert_eq!(parse_label(l, "inf", &b).unwrap(), l.bottom());
    }
}
