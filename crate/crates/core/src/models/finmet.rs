//! Finite V-categories and non-expansive maps.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use super::{same_leaves, Backend, ModelError, Shape, DEFAULT_HOM_LIMIT};
use crate::quantale::{self, QValue, QuantaleSpec};
use crate::syntax::{LinType, Name};
use crate::theory::Signature;
use crate::vcat::{hom_distance, FinVCat, VFunctorTable};

pub type Fun = Arc<dyn Fn(&Val) -> Val + Send + Sync>;

/// A point of an object.
#[derive(Clone)]
pub enum Val {
    Unit,
    Atom(usize),
    Pair(Box<Val>, Box<Val>),
    Fun(Fun),
}

impl Val {
    pub fn pair(a: Val, b: Val) -> Val {
        Val::Pair(Box::new(a), Box::new(b))
    }

    fn split(&self) -> (&Val, &Val) {
        match self {
            Val::Pair(a, b) => (a, b),
            _ => panic!("expected a pair"),
        }
    }

    pub fn apply(&self, x: &Val) -> Val {
        match self {
            Val::Fun(f) => f(x),
            _ => panic!("expected a function"),
        }
    }
}

impl fmt::Debug for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Unit => f.write_str("*"),
            Val::Atom(i) => write!(f, "#{i}"),
            Val::Pair(a, b) => write!(f, "({a:?}, {b:?})"),
            Val::Fun(_) => f.write_str("<fn>"),
        }
    }
}

pub struct HomObj {
    dom: MetObj,
    cod: MetObj,
    limit: usize,
    tables: OnceLock<Result<HomTables, ModelError>>,
}

struct HomTables {
    tables: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    dom_points: Arc<Vec<Val>>,
    cod_points: Arc<Vec<Val>>,
}

/// An object of FinMet: the unit, a ground V-category, a tensor, or the
/// V-category of non-expansive maps.
#[derive(Clone)]
pub enum MetObj {
    Unit,
    Ground(Arc<str>, Arc<FinVCat>),
    Tensor(Arc<MetObj>, Arc<MetObj>),
    Hom(Arc<HomObj>),
}

impl MetObj {
    pub fn hom(dom: MetObj, cod: MetObj, limit: usize) -> MetObj {
        MetObj::Hom(Arc::new(HomObj {
            dom,
            cod,
            limit,
            tables: OnceLock::new(),
        }))
    }

    pub fn same(&self, other: &MetObj) -> bool {
        match (self, other) {
            (MetObj::Unit, MetObj::Unit) => true,
            (MetObj::Ground(a, x), MetObj::Ground(b, y)) => a == b && (Arc::ptr_eq(x, y) || x == y),
            (MetObj::Tensor(a, b), MetObj::Tensor(c, d)) => a.same(c) && b.same(d),
            (MetObj::Hom(h), MetObj::Hom(k)) => Arc::ptr_eq(h, k) || (h.dom.same(&k.dom) && h.cod.same(&k.cod)),
            _ => false,
        }
    }

    fn homs(h: &HomObj) -> Result<&HomTables, ModelError> {
        h.tables
            .get_or_init(|| enumerate_tables(&h.dom, &h.cod, h.limit))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn size(&self) -> Result<usize, ModelError> {
        Ok(match self {
            MetObj::Unit => 1,
            MetObj::Ground(_, c) => c.len(),
            MetObj::Tensor(a, b) => a.size()? * b.size()?,
            MetObj::Hom(h) => Self::homs(h)?.tables.len(),
        })
    }

    /// All points, in index order.
    pub fn points(&self) -> Result<Vec<Val>, ModelError> {
        Ok(match self {
            MetObj::Unit => vec![Val::Unit],
            MetObj::Ground(_, c) => (0..c.len()).map(Val::Atom).collect(),
            MetObj::Tensor(a, b) => {
                let (pa, pb) = (a.points()?, b.points()?);
                pa.iter()
                    .flat_map(|x| pb.iter().map(move |y| Val::pair(x.clone(), y.clone())))
                    .collect()
            }
            MetObj::Hom(h) => {
                let t = Self::homs(h)?;
                t.tables.iter().map(|tab| table_fun(&h.dom, &t.cod_points, tab)).collect()
            }
        })
    }

    pub fn index_of(&self, v: &Val) -> Result<usize, ModelError> {
        Ok(match (self, v) {
            (MetObj::Unit, _) => 0,
            (MetObj::Ground(_, _), Val::Atom(i)) => *i,
            (MetObj::Tensor(a, b), Val::Pair(x, y)) => a.index_of(x)? * b.size()? + b.index_of(y)?,
            (MetObj::Hom(h), Val::Fun(_)) => {
                let t = Self::homs(h)?;
                let tab = t
                    .dom_points
                    .iter()
                    .map(|x| h.cod.index_of(&v.apply(x)))
                    .collect::<Result<Vec<_>, _>>()?;
                *t.index
                    .get(&tab)
                    .ok_or_else(|| ModelError::Mismatch("function is not a point of its hom object".into()))?
            }
            _ => return Err(ModelError::Mismatch(format!("value {v:?} does not inhabit the object"))),
        })
    }

    /// The V-category structure on points.
    pub fn dist(&self, spec: QuantaleSpec, v: &Val, w: &Val) -> Result<QValue, ModelError> {
        Ok(match (self, v, w) {
            (MetObj::Unit, _, _) => spec.unit(),
            (MetObj::Ground(_, c), Val::Atom(i), Val::Atom(j)) => c.dist(*i, *j).clone(),
            (MetObj::Tensor(a, b), Val::Pair(x1, y1), Val::Pair(x2, y2)) => {
                a.dist(spec, x1, x2)?.tensor(&b.dist(spec, y1, y2)?)?
            }
            (MetObj::Hom(h), Val::Fun(_), Val::Fun(_)) => {
                let mut acc = spec.top();
                for x in h.dom.points()? {
                    acc = acc.meet2(&h.cod.dist(spec, &v.apply(&x), &w.apply(&x))?)?;
                    if acc.is_bottom() {
                        break;
                    }
                }
                acc
            }
            _ => return Err(ModelError::Mismatch(format!("values {v:?}, {w:?} do not inhabit the object"))),
        })
    }

    pub fn eq_val(&self, v: &Val, w: &Val) -> Result<bool, ModelError> {
        Ok(match (self, v, w) {
            (MetObj::Unit, _, _) => true,
            (MetObj::Ground(..), Val::Atom(i), Val::Atom(j)) => i == j,
            (MetObj::Tensor(a, b), Val::Pair(x1, y1), Val::Pair(x2, y2)) => a.eq_val(x1, x2)? && b.eq_val(y1, y2)?,
            (MetObj::Hom(h), Val::Fun(_), Val::Fun(_)) => {
                for x in h.dom.points()? {
                    if !h.cod.eq_val(&v.apply(&x), &w.apply(&x))? {
                        return Ok(false);
                    }
                }
                true
            }
            _ => return Err(ModelError::Mismatch(format!("values {v:?}, {w:?} do not inhabit the object"))),
        })
    }

    pub fn render(&self, v: &Val) -> String {
        match (self, v) {
            (MetObj::Unit, _) => "*".into(),
            (MetObj::Ground(_, c), Val::Atom(i)) => c.carrier()[*i].clone(),
            (MetObj::Tensor(a, b), Val::Pair(x, y)) => format!("({}, {})", a.render(x), b.render(y)),
            (MetObj::Hom(h), Val::Fun(_)) => match h.dom.points() {
                Ok(ps) => {
                    let items: Vec<String> = ps
                        .iter()
                        .map(|x| format!("{} -> {}", h.dom.render(x), h.cod.render(&v.apply(x))))
                        .collect();
                    format!("{{{}}}", items.join(", "))
                }
                Err(_) => "<fn>".into(),
            },
            _ => format!("{v:?}"),
        }
    }
}

impl fmt::Display for MetObj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetObj::Unit => f.write_str("I"),
            MetObj::Ground(n, _) => f.write_str(n),
            MetObj::Tensor(a, b) => write!(f, "({a} ⊗ {b})"),
            MetObj::Hom(h) => write!(f, "({} ⊸ {})", h.dom, h.cod),
        }
    }
}

fn table_fun(dom: &MetObj, cod_points: &Arc<Vec<Val>>, table: &[usize]) -> Val {
    let dom = dom.clone();
    let cod_points = Arc::clone(cod_points);
    let table = table.to_vec();
    Val::Fun(Arc::new(move |x| {
        cod_points[table[dom.index_of(x).expect("argument in the domain")]].clone()
    }))
}

fn enumerate_tables(dom: &MetObj, cod: &MetObj, limit: usize) -> Result<HomTables, ModelError> {
    let spec = spec_of(dom).or_else(|| spec_of(cod));
    let dp = dom.points()?;
    let cp = cod.points()?;
    let (n, m) = (dp.len(), cp.len());
    let count = u32::try_from(n).ok().and_then(|n| m.checked_pow(n));
    if count.is_none_or(|c| c > limit) {
        return Err(ModelError::HomTooLarge {
            count: format!("{m}^{n}"),
            limit,
        });
    }
    let mut tables = Vec::new();
    if let Some(spec) = spec {
        let dd = pairwise(dom, spec, &dp)?;
        let cd = pairwise(cod, spec, &cp)?;
        let mut t = vec![0usize; n];
        'outer: loop {
            let ok = (0..n).all(|i| (0..n).all(|j| dd[i * n + j].leq(&cd[t[i] * m + t[j]]).unwrap_or(false)));
            if ok {
                tables.push(t.clone());
            }
            for k in (0..n).rev() {
                t[k] += 1;
                if t[k] < m {
                    continue 'outer;
                }
                t[k] = 0;
            }
            break;
        }
    } else {
        // only unit objects involved
        tables.push(vec![0; n]);
    }
    let index = tables.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(HomTables {
        tables,
        index,
        dom_points: Arc::new(dp),
        cod_points: Arc::new(cp),
    })
}

fn spec_of(o: &MetObj) -> Option<QuantaleSpec> {
    match o {
        MetObj::Unit => None,
        MetObj::Ground(_, c) => Some(c.spec()),
        MetObj::Tensor(a, b) => spec_of(a).or_else(|| spec_of(b)),
        MetObj::Hom(h) => spec_of(&h.dom).or_else(|| spec_of(&h.cod)),
    }
}

fn pairwise(o: &MetObj, spec: QuantaleSpec, ps: &[Val]) -> Result<Vec<QValue>, ModelError> {
    let mut out = Vec::with_capacity(ps.len() * ps.len());
    for x in ps {
        for y in ps {
            out.push(o.dist(spec, x, y)?);
        }
    }
    Ok(out)
}

/// All non-expansive maps `a → b` as a V-category under the pointwise
/// meet distance, with the tables in carrier order.
pub fn enumerate_hom_object(a: &FinVCat, b: &FinVCat, limit: usize) -> Result<(FinVCat, Vec<VFunctorTable>), ModelError> {
    let dom = MetObj::Ground("A".into(), Arc::new(a.clone()));
    let cod = MetObj::Ground("B".into(), Arc::new(b.clone()));
    let t = enumerate_tables(&dom, &cod, limit)?;
    let fs = t
        .tables
        .iter()
        .map(|m| VFunctorTable::new(a, b, m.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let names = t
        .tables
        .iter()
        .map(|m| {
            let items: Vec<&str> = m.iter().map(|&j| b.carrier()[j].as_str()).collect();
            format!("[{}]", items.join(","))
        })
        .collect();
    let mut err = None;
    let hom = FinVCat::from_fn(b.spec(), names, |i, j| match hom_distance(a, b, &fs[i], &fs[j]) {
        Ok(q) => q,
        Err(e) => {
            err = Some(e);
            b.spec().bottom()
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    Ok((hom, fs))
}

/// A morphism of FinMet, as a function on points.
#[derive(Clone)]
pub struct MetMor {
    pub src: MetObj,
    pub tgt: MetObj,
    f: Fun,
}

impl MetMor {
    pub fn new(src: MetObj, tgt: MetObj, f: impl Fn(&Val) -> Val + Send + Sync + 'static) -> Self {
        MetMor { src, tgt, f: Arc::new(f) }
    }

    pub fn apply(&self, v: &Val) -> Val {
        (self.f)(v)
    }

    /// The function table on indices.
    pub fn table(&self) -> Result<Vec<usize>, ModelError> {
        self.src
            .points()?
            .iter()
            .map(|x| self.tgt.index_of(&self.apply(x)))
            .collect()
    }

    /// Checks `a(x, y) ≤ b(f x, f y)`; `None` when the source has more than
    /// `max_points` points.
    pub fn is_non_expansive(&self, max_points: usize) -> Option<bool> {
        let ps = self.src.points().ok()?;
        if ps.len() > max_points {
            return None;
        }
        let spec = spec_of(&self.src).or_else(|| spec_of(&self.tgt))?;
        let img: Vec<Val> = ps.iter().map(|x| self.apply(x)).collect();
        for (i, x) in ps.iter().enumerate() {
            for (j, y) in ps.iter().enumerate() {
                let a = self.src.dist(spec, x, y).ok()?;
                let b = self.tgt.dist(spec, &img[i], &img[j]).ok()?;
                if !a.leq(&b).ok()? {
                    return Some(false);
                }
            }
        }
        Some(true)
    }
}

impl fmt::Display for MetMor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} -> {}", self.src, self.tgt)?;
        match self.src.points() {
            Ok(ps) => {
                for x in ps {
                    writeln!(f, "  {} |-> {}", self.src.render(&x), self.tgt.render(&self.apply(&x)))?;
                }
                Ok(())
            }
            Err(e) => writeln!(f, "  <{e}>"),
        }
    }
}

/// The category of finite V-categories and non-expansive maps, with a
/// chosen interpretation of a signature.
pub struct FinMet {
    spec: QuantaleSpec,
    sig: Signature,
    grounds: BTreeMap<String, MetObj>,
    ops: BTreeMap<String, MetMor>,
    objs: Mutex<HashMap<LinType, MetObj>>,
    hom_limit: usize,
}

impl FinMet {
    pub fn new(spec: QuantaleSpec, sig: Signature) -> Self {
        FinMet {
            spec,
            sig,
            grounds: BTreeMap::new(),
            ops: BTreeMap::new(),
            objs: Mutex::new(HashMap::new()),
            hom_limit: DEFAULT_HOM_LIMIT,
        }
    }

    pub fn with_hom_limit(mut self, limit: usize) -> Self {
        self.hom_limit = limit;
        self
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn has_op(&self, name: &str) -> bool {
        self.ops.contains_key(name)
    }

    pub fn set_ground(&mut self, name: &str, c: FinVCat) -> Result<(), ModelError> {
        if c.spec() != self.spec {
            return Err(ModelError::QuantaleMismatch {
                model: self.spec,
                theory: c.spec(),
            });
        }
        if !self.sig.grounds().contains(name) {
            return Err(ModelError::Uninterpreted(format!("ground type {name} is not in the signature")));
        }
        self.grounds.insert(name.to_string(), MetObj::Ground(name.into(), Arc::new(c)));
        self.objs.lock().expect("object cache").clear();
        Ok(())
    }

    /// `⟦A₁⟧ ⊗ … ⊗ ⟦Aₙ⟧ → ⟦A⟧` for the sort of `name`.
    pub fn op_objects(&self, name: &str) -> Result<(MetObj, MetObj), ModelError> {
        let (args, res) = self
            .sig
            .sort(name)
            .ok_or_else(|| ModelError::Uninterpreted(name.to_string()))?;
        let mut src: Option<MetObj> = None;
        for a in args {
            let o = self.type_obj(a)?;
            src = Some(match src {
                None => o,
                Some(s) => self.tensor_obj(&s, &o),
            });
        }
        Ok((src.unwrap_or(MetObj::Unit), self.type_obj(res)?))
    }

    /// Interprets `name` by a function on points; rejects expansive maps.
    pub fn set_op(&mut self, name: &str, f: impl Fn(&Val) -> Val + Send + Sync + 'static) -> Result<(), ModelError> {
        let (src, tgt) = self.op_objects(name)?;
        let m = MetMor::new(src, tgt, f);
        for x in m.src.points()? {
            m.tgt.index_of(&m.apply(&x)).map_err(|e| ModelError::Illegal {
                op: name.to_string(),
                reason: e.to_string(),
            })?;
        }
        if m.is_non_expansive(usize::MAX) == Some(false) {
            return Err(ModelError::Illegal {
                op: name.to_string(),
                reason: "not non-expansive".into(),
            });
        }
        self.ops.insert(name.to_string(), m);
        Ok(())
    }

    /// Interprets `name` by a table of target indices in source point order.
    pub fn set_op_table(&mut self, name: &str, table: Vec<usize>) -> Result<(), ModelError> {
        let (src, tgt) = self.op_objects(name)?;
        let (n, m) = (src.size()?, tgt.size()?);
        if table.len() != n || table.iter().any(|&t| t >= m) {
            return Err(ModelError::Illegal {
                op: name.to_string(),
                reason: format!("expected {n} entries below {m}"),
            });
        }
        let tp = Arc::new(tgt.points()?);
        let Val::Fun(f) = table_fun(&src, &tp, &table) else {
            unreachable!()
        };
        self.set_op(name, move |x| f(x))
    }
}

impl Backend for FinMet {
    type Obj = MetObj;
    type Mor = MetMor;

    fn quantale(&self) -> QuantaleSpec {
        self.spec
    }

    fn type_obj(&self, ty: &LinType) -> Result<MetObj, ModelError> {
        if let Some(o) = self.objs.lock().expect("object cache").get(ty) {
            return Ok(o.clone());
        }
        let o = match ty {
            LinType::Unit => MetObj::Unit,
            LinType::Ground(g) => self
                .grounds
                .get(&**g)
                .cloned()
                .ok_or_else(|| ModelError::Uninterpreted(format!("ground type {g}")))?,
            LinType::Tensor(a, b) => MetObj::Tensor(Arc::new(self.type_obj(a)?), Arc::new(self.type_obj(b)?)),
            LinType::Lolli(a, b) => MetObj::hom(self.type_obj(a)?, self.type_obj(b)?, self.hom_limit),
        };
        self.objs.lock().expect("object cache").insert(ty.clone(), o.clone());
        Ok(o)
    }

    fn unit_obj(&self) -> MetObj {
        MetObj::Unit
    }

    fn tensor_obj(&self, a: &MetObj, b: &MetObj) -> MetObj {
        MetObj::Tensor(Arc::new(a.clone()), Arc::new(b.clone()))
    }

    fn id(&self, a: &MetObj) -> MetMor {
        MetMor::new(a.clone(), a.clone(), Val::clone)
    }

    fn then(&self, f: &MetMor, g: &MetMor) -> Result<MetMor, ModelError> {
        if !f.tgt.same(&g.src) {
            return Err(ModelError::Mismatch(format!("{} then {}", f.tgt, g.src)));
        }
        let (f1, g1) = (f.f.clone(), g.f.clone());
        Ok(MetMor::new(f.src.clone(), g.tgt.clone(), move |x| g1(&f1(x))))
    }

    fn tensor(&self, f: &MetMor, g: &MetMor) -> MetMor {
        let (f1, g1) = (f.f.clone(), g.f.clone());
        MetMor::new(self.tensor_obj(&f.src, &g.src), self.tensor_obj(&f.tgt, &g.tgt), move |v| {
            let (a, b) = v.split();
            Val::pair(f1(a), g1(b))
        })
    }

    fn rearrange(&self, src: &Shape<MetObj>, tgt: &Shape<MetObj>) -> Result<MetMor, ModelError> {
        same_leaves(src, tgt)?;
        let (s, t) = (src.clone(), tgt.clone());
        Ok(MetMor::new(super::shape_obj(self, src), super::shape_obj(self, tgt), move |v| {
            let mut leaves = HashMap::new();
            flatten(&s, v, &mut leaves);
            build(&t, &mut leaves)
        }))
    }

    fn curry(&self, m: &MetMor, gamma: &MetObj, hom: &MetObj) -> Result<MetMor, ModelError> {
        let f = m.f.clone();
        Ok(MetMor::new(gamma.clone(), hom.clone(), move |g| {
            let (f, g) = (f.clone(), g.clone());
            Val::Fun(Arc::new(move |x| f(&Val::pair(g.clone(), x.clone()))))
        }))
    }

    fn app(&self, hom: &MetObj) -> Result<MetMor, ModelError> {
        let MetObj::Hom(h) = hom else {
            return Err(ModelError::Mismatch(format!("{hom} is not a hom object")));
        };
        Ok(MetMor::new(self.tensor_obj(hom, &h.dom), h.cod.clone(), |v| {
            let (f, x) = v.split();
            f.apply(x)
        }))
    }

    fn op(&self, symbol: &str) -> Result<MetMor, ModelError> {
        self.ops
            .get(symbol)
            .cloned()
            .ok_or_else(|| ModelError::Uninterpreted(symbol.to_string()))
    }

    fn distance(&self, f: &MetMor, g: &MetMor) -> Result<QValue, ModelError> {
        if !f.src.same(&g.src) || !f.tgt.same(&g.tgt) {
            return Err(ModelError::NotParallel);
        }
        let ds = f
            .src
            .points()?
            .iter()
            .map(|x| f.tgt.dist(self.spec, &f.apply(x), &g.apply(x)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(quantale::meet(self.spec, &ds)?)
    }

    fn equal(&self, f: &MetMor, g: &MetMor) -> Result<bool, ModelError> {
        if !f.src.same(&g.src) || !f.tgt.same(&g.tgt) {
            return Err(ModelError::NotParallel);
        }
        for x in f.src.points()? {
            if !f.tgt.eq_val(&f.apply(&x), &g.apply(&x))? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn flatten(s: &Shape<MetObj>, v: &Val, out: &mut HashMap<Name, Val>) {
    match s {
        Shape::Unit => {}
        Shape::Leaf(n, _) => {
            out.insert(n.clone(), v.clone());
        }
        Shape::Tensor(a, b) => {
            let (x, y) = v.split();
            flatten(a, x, out);
            flatten(b, y, out);
        }
    }
}

fn build(s: &Shape<MetObj>, leaves: &mut HashMap<Name, Val>) -> Val {
    match s {
        Shape::Unit => Val::Unit,
        Shape::Leaf(n, _) => leaves.remove(n).expect("leaf present"),
        Shape::Tensor(a, b) => {
            let x = build(a, leaves);
            Val::pair(x, build(b, leaves))
        }
    }
}
