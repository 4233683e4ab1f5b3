//! Finite-dimensional spaces of signed measures and short linear maps.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{same_leaves, Backend, ModelError, Shape};
use crate::quantale::{QValue, QuantaleSpec};
use crate::syntax::{LinType, Name};
use crate::theory::Signature;

/// How the norm of a measure is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TvNorm {
    /// Sum of absolute coordinates.
    L1,
    /// `sup_A |μ(A)|`: the larger of the positive and the negative mass.
    #[default]
    EventSup,
}

/// A finite index set. `⊗` is the product with row-major indexing and
/// `A ⊸ B` is the space of `|B| × |A|` matrices, entry `(b, a)` at index
/// `b·|A| + a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MeasObj {
    Unit,
    /// A ground space; `grid` is `Some(g)` when point `i` stands for the
    /// probability `i/g`.
    Ground { name: Arc<str>, dim: usize, grid: Option<usize> },
    Tensor(Box<MeasObj>, Box<MeasObj>),
    Hom(Box<MeasObj>, Box<MeasObj>),
}

impl MeasObj {
    pub fn dim(&self) -> usize {
        match self {
            MeasObj::Unit => 1,
            MeasObj::Ground { dim, .. } => *dim,
            MeasObj::Tensor(a, b) | MeasObj::Hom(a, b) => a.dim() * b.dim(),
        }
    }

    /// The norm of a vector given by its non-zero entries. Hom objects
    /// carry the operator norm: the maximum over basis vectors of the
    /// domain.
    pub fn norm(&self, v: &[(usize, BigRational)], conv: TvNorm) -> BigRational {
        match self {
            MeasObj::Hom(a, b) => {
                let da = a.dim();
                let mut cols: BTreeMap<usize, Vec<(usize, BigRational)>> = BTreeMap::new();
                for (i, x) in v {
                    cols.entry(i % da).or_default().push((i / da, x.clone()));
                }
                cols.values().map(|c| b.norm(c, conv)).max().unwrap_or_else(BigRational::zero)
            }
            _ => {
                let pos: BigRational = v.iter().filter(|(_, x)| x.is_positive()).map(|(_, x)| x.clone()).sum();
                let neg: BigRational = v.iter().filter(|(_, x)| x.is_negative()).map(|(_, x)| -x.clone()).sum();
                match conv {
                    TvNorm::L1 => pos + neg,
                    TvNorm::EventSup => pos.max(neg),
                }
            }
        }
    }

    fn label(&self, i: usize) -> String {
        match self {
            MeasObj::Unit => "*".into(),
            MeasObj::Ground { grid: Some(g), .. } => format!("{}", BigRational::new(BigInt::from(i), BigInt::from(*g))),
            MeasObj::Ground { .. } => i.to_string(),
            MeasObj::Tensor(a, b) => format!("({},{})", a.label(i / b.dim()), b.label(i % b.dim())),
            MeasObj::Hom(a, b) => format!("[{}<-{}]", b.label(i / a.dim()), a.label(i % a.dim())),
        }
    }
}

impl fmt::Display for MeasObj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasObj::Unit => f.write_str("I"),
            MeasObj::Ground { name, .. } => f.write_str(name),
            MeasObj::Tensor(a, b) => write!(f, "({a} ⊗ {b})"),
            MeasObj::Hom(a, b) => write!(f, "({a} ⊸ {b})"),
        }
    }
}

/// A sparse rational matrix stored by columns; entries are sorted by row
/// and never zero, so structural equality is matrix equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: Vec<Vec<(usize, BigRational)>>,
}

fn normalise(col: BTreeMap<usize, BigRational>) -> Vec<(usize, BigRational)> {
    col.into_iter().filter(|(_, x)| !x.is_zero()).collect()
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols: vec![Vec::new(); cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::permutation(n, (0..n).collect())
    }

    /// Column `j` is the basis vector `e_{map[j]}`.
    pub fn permutation(rows: usize, map: Vec<usize>) -> Self {
        Matrix {
            rows,
            cols: map.into_iter().map(|r| vec![(r, BigRational::one())]).collect(),
        }
    }

    /// From row-major entries.
    pub fn from_rows(rows: &[Vec<BigRational>]) -> Result<Self, ModelError> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(ModelError::Mismatch("ragged matrix".into()));
        }
        let mut m = Matrix::zero(rows.len(), n);
        for (i, r) in rows.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                if !x.is_zero() {
                    m.cols[j].push((i, x.clone()));
                }
            }
        }
        Ok(m)
    }

    pub fn from_columns(rows: usize, cols: Vec<BTreeMap<usize, BigRational>>) -> Self {
        Matrix {
            rows,
            cols: cols.into_iter().map(normalise).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, BigRational)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> BigRational {
        self.cols[j]
            .iter()
            .find(|(r, _)| *r == i)
            .map_or_else(BigRational::zero, |(_, x)| x.clone())
    }

    /// `self · f`: first `f`, then `self`.
    pub fn compose(&self, f: &Matrix) -> Result<Matrix, ModelError> {
        if f.rows != self.cols() {
            return Err(ModelError::Mismatch(format!("{}x{} after {}x{}", self.rows, self.cols(), f.rows, f.cols())));
        }
        let cols = f
            .cols
            .iter()
            .map(|c| {
                let mut acc: BTreeMap<usize, BigRational> = BTreeMap::new();
                for (k, x) in c {
                    for (i, y) in &self.cols[*k] {
                        *acc.entry(*i).or_insert_with(BigRational::zero) += x * y;
                    }
                }
                acc
            })
            .collect();
        Ok(Matrix::from_columns(self.rows, cols))
    }

    /// Kronecker product.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let mut cols = Vec::with_capacity(self.cols() * other.cols());
        for a in &self.cols {
            for b in &other.cols {
                let mut c = Vec::with_capacity(a.len() * b.len());
                for (i, x) in a {
                    for (k, y) in b {
                        c.push((i * other.rows + k, x * y));
                    }
                }
                cols.push(c);
            }
        }
        Matrix {
            rows: self.rows * other.rows,
            cols,
        }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, ModelError> {
        if self.rows != other.rows || self.cols() != other.cols() {
            return Err(ModelError::NotParallel);
        }
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| {
                let mut acc: BTreeMap<usize, BigRational> = a.iter().cloned().collect();
                for (i, y) in b {
                    *acc.entry(*i).or_insert_with(BigRational::zero) -= y;
                }
                acc
            })
            .collect();
        Ok(Matrix::from_columns(self.rows, cols))
    }

    /// The `ℓ1 → ℓ1` operator norm: the largest column sum of absolute values.
    pub fn l1_norm(&self) -> BigRational {
        self.cols
            .iter()
            .map(|c| c.iter().map(|(_, x)| x.abs()).sum::<BigRational>())
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn is_short(&self) -> bool {
        self.l1_norm() <= BigRational::one()
    }
}

/// A linear map between finite objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasMor {
    pub src: MeasObj,
    pub tgt: MeasObj,
    pub matrix: Matrix,
}

impl fmt::Display for MeasMor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} -> {}", self.src, self.tgt)?;
        for j in 0..self.matrix.cols() {
            let items: Vec<String> = self
                .matrix
                .column(j)
                .iter()
                .map(|(i, x)| format!("{x} e({})", self.tgt.label(*i)))
                .collect();
            let body = if items.is_empty() { "0".to_string() } else { items.join(" + ") };
            writeln!(f, "  {} |-> {body}", self.src.label(j))?;
        }
        Ok(())
    }
}

/// Finite-dimensional measure spaces with short linear maps, distances in
/// the Lawvere quantale.
pub struct FinMeas {
    sig: Signature,
    grounds: BTreeMap<String, MeasObj>,
    ops: BTreeMap<String, MeasMor>,
    pub norm: TvNorm,
}

impl FinMeas {
    pub fn new(sig: Signature) -> Self {
        FinMeas {
            sig,
            grounds: BTreeMap::new(),
            ops: BTreeMap::new(),
            norm: TvNorm::default(),
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn has_op(&self, name: &str) -> bool {
        self.ops.contains_key(name)
    }

    pub fn set_ground(&mut self, name: &str, dim: usize, grid: Option<usize>) -> Result<(), ModelError> {
        if !self.sig.grounds().contains(name) {
            return Err(ModelError::Uninterpreted(format!("ground type {name} is not in the signature")));
        }
        if dim == 0 {
            return Err(ModelError::Mismatch(format!("ground {name} needs a positive dimension")));
        }
        self.grounds.insert(
            name.to_string(),
            MeasObj::Ground {
                name: name.into(),
                dim,
                grid,
            },
        );
        Ok(())
    }

    pub fn op_objects(&self, name: &str) -> Result<(Vec<MeasObj>, MeasObj), ModelError> {
        let (args, res) = self
            .sig
            .sort(name)
            .ok_or_else(|| ModelError::Uninterpreted(name.to_string()))?;
        let args = args.iter().map(|a| self.type_obj(a)).collect::<Result<Vec<_>, _>>()?;
        Ok((args, self.type_obj(res)?))
    }

    fn nest(&self, parts: &[MeasObj]) -> MeasObj {
        let mut it = parts.iter().cloned();
        match it.next() {
            None => MeasObj::Unit,
            Some(first) => it.fold(first, |acc, o| self.tensor_obj(&acc, &o)),
        }
    }

    /// Interprets `name` by a matrix; rejects maps that are not short.
    pub fn set_op_matrix(&mut self, name: &str, matrix: Matrix) -> Result<(), ModelError> {
        let (args, tgt) = self.op_objects(name)?;
        let src = self.nest(&args);
        let illegal = |reason: String| ModelError::Illegal {
            op: name.to_string(),
            reason,
        };
        if matrix.rows() != tgt.dim() || matrix.cols() != src.dim() {
            return Err(illegal(format!(
                "expected a {}x{} matrix, found {}x{}",
                tgt.dim(),
                src.dim(),
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_short() {
            return Err(illegal(format!("operator norm {} exceeds 1", matrix.l1_norm())));
        }
        self.ops.insert(name.to_string(), MeasMor { src, tgt, matrix });
        Ok(())
    }

    /// A nullary operation sent to the point mass at `i`.
    pub fn set_op_dirac(&mut self, name: &str, i: usize) -> Result<(), ModelError> {
        let (_, tgt) = self.op_objects(name)?;
        let m = Matrix::permutation(tgt.dim(), vec![i]);
        if i >= tgt.dim() {
            return Err(ModelError::Illegal {
                op: name.to_string(),
                reason: format!("point {i} outside a space of dimension {}", tgt.dim()),
            });
        }
        self.set_op_matrix(name, m)
    }

    /// `(u, v, p) ↦ p·e_u + (1 − p)·e_v` for a sort `A, A, P → A` where `P`
    /// is a grid.
    pub fn set_op_bernoulli(&mut self, name: &str) -> Result<(), ModelError> {
        let (args, tgt) = self.op_objects(name)?;
        let illegal = |reason: &str| ModelError::Illegal {
            op: name.to_string(),
            reason: reason.to_string(),
        };
        let [a, b, MeasObj::Ground { grid: Some(g), dim: dp, .. }] = args.as_slice() else {
            return Err(illegal("expected a sort `A, A, P -> A` with `P` a grid"));
        };
        if *a != tgt || *b != tgt {
            return Err(illegal("expected a sort `A, A, P -> A` with `P` a grid"));
        }
        let n = tgt.dim();
        let g = BigRational::from_integer(BigInt::from(*g));
        let mut cols = Vec::with_capacity(n * n * dp);
        for u in 0..n {
            for v in 0..n {
                for p in 0..*dp {
                    let p = BigRational::from_integer(BigInt::from(p)) / &g;
                    let mut c = BTreeMap::new();
                    *c.entry(u).or_insert_with(BigRational::zero) += p.clone();
                    *c.entry(v).or_insert_with(BigRational::zero) += BigRational::one() - p;
                    cols.push(c);
                }
            }
        }
        self.set_op_matrix(name, Matrix::from_columns(n, cols))
    }

    /// Distance under an explicit norm convention.
    pub fn distance_with(&self, f: &MeasMor, g: &MeasMor, conv: TvNorm) -> Result<QValue, ModelError> {
        if f.src != g.src || f.tgt != g.tgt {
            return Err(ModelError::NotParallel);
        }
        let d = f.matrix.sub(&g.matrix)?;
        let worst = (0..d.cols())
            .map(|j| f.tgt.norm(d.column(j), conv))
            .max()
            .unwrap_or_else(BigRational::zero);
        Ok(QuantaleSpec::Lawvere.rational(worst)?)
    }
}

fn leaf_dims(s: &Shape<MeasObj>) -> Vec<(Name, usize)> {
    s.leaves().into_iter().map(|(n, o)| (n, o.dim())).collect()
}

impl Backend for FinMeas {
    type Obj = MeasObj;
    type Mor = MeasMor;

    fn quantale(&self) -> QuantaleSpec {
        QuantaleSpec::Lawvere
    }

    fn type_obj(&self, ty: &LinType) -> Result<MeasObj, ModelError> {
        Ok(match ty {
            LinType::Unit => MeasObj::Unit,
            LinType::Ground(g) => self
                .grounds
                .get(&**g)
                .cloned()
                .ok_or_else(|| ModelError::Uninterpreted(format!("ground type {g}")))?,
            LinType::Tensor(a, b) => MeasObj::Tensor(Box::new(self.type_obj(a)?), Box::new(self.type_obj(b)?)),
            LinType::Lolli(a, b) => MeasObj::Hom(Box::new(self.type_obj(a)?), Box::new(self.type_obj(b)?)),
        })
    }

    fn unit_obj(&self) -> MeasObj {
        MeasObj::Unit
    }

    fn tensor_obj(&self, a: &MeasObj, b: &MeasObj) -> MeasObj {
        MeasObj::Tensor(Box::new(a.clone()), Box::new(b.clone()))
    }

    fn id(&self, a: &MeasObj) -> MeasMor {
        MeasMor {
            src: a.clone(),
            tgt: a.clone(),
            matrix: Matrix::identity(a.dim()),
        }
    }

    fn then(&self, f: &MeasMor, g: &MeasMor) -> Result<MeasMor, ModelError> {
        if f.tgt != g.src {
            return Err(ModelError::Mismatch(format!("{} then {}", f.tgt, g.src)));
        }
        Ok(MeasMor {
            src: f.src.clone(),
            tgt: g.tgt.clone(),
            matrix: g.matrix.compose(&f.matrix)?,
        })
    }

    fn tensor(&self, f: &MeasMor, g: &MeasMor) -> MeasMor {
        MeasMor {
            src: self.tensor_obj(&f.src, &g.src),
            tgt: self.tensor_obj(&f.tgt, &g.tgt),
            matrix: f.matrix.kron(&g.matrix),
        }
    }

    fn rearrange(&self, src: &Shape<MeasObj>, tgt: &Shape<MeasObj>) -> Result<MeasMor, ModelError> {
        same_leaves(src, tgt)?;
        let sl = leaf_dims(src);
        let tl = leaf_dims(tgt);
        let pos: HashMap<&Name, usize> = sl.iter().enumerate().map(|(i, (n, _))| (n, i)).collect();
        let total: usize = sl.iter().map(|(_, d)| d).product();
        let mut map = Vec::with_capacity(total);
        let mut coords = vec![0usize; sl.len()];
        for mut ix in 0..total {
            for k in (0..sl.len()).rev() {
                coords[k] = ix % sl[k].1;
                ix /= sl[k].1;
            }
            let t = tl.iter().fold(0, |acc, (n, d)| acc * d + coords[pos[n]]);
            map.push(t);
        }
        Ok(MeasMor {
            src: super::shape_obj(self, src),
            tgt: super::shape_obj(self, tgt),
            matrix: Matrix::permutation(total, map),
        })
    }

    fn curry(&self, m: &MeasMor, gamma: &MeasObj, hom: &MeasObj) -> Result<MeasMor, ModelError> {
        let MeasObj::Hom(a, b) = hom else {
            return Err(ModelError::Mismatch(format!("{hom} is not a hom object")));
        };
        let (dg, da) = (gamma.dim(), a.dim());
        if m.matrix.cols() != dg * da || m.matrix.rows() != b.dim() {
            return Err(ModelError::Mismatch("curry of a map with the wrong shape".into()));
        }
        let cols = (0..dg)
            .map(|g| {
                let mut c = BTreeMap::new();
                for x in 0..da {
                    for (r, v) in m.matrix.column(g * da + x) {
                        c.insert(r * da + x, v.clone());
                    }
                }
                c
            })
            .collect();
        Ok(MeasMor {
            src: gamma.clone(),
            tgt: hom.clone(),
            matrix: Matrix::from_columns(hom.dim(), cols),
        })
    }

    fn app(&self, hom: &MeasObj) -> Result<MeasMor, ModelError> {
        let MeasObj::Hom(a, b) = hom else {
            return Err(ModelError::Mismatch(format!("{hom} is not a hom object")));
        };
        let (da, db) = (a.dim(), b.dim());
        let mut cols = Vec::with_capacity(db * da * da);
        for r in 0..db {
            for x1 in 0..da {
                for x2 in 0..da {
                    let mut c = BTreeMap::new();
                    if x1 == x2 {
                        c.insert(r, BigRational::one());
                    }
                    cols.push(c);
                }
            }
        }
        Ok(MeasMor {
            src: self.tensor_obj(hom, a),
            tgt: (**b).clone(),
            matrix: Matrix::from_columns(db, cols),
        })
    }

    fn op(&self, symbol: &str) -> Result<MeasMor, ModelError> {
        self.ops
            .get(symbol)
            .cloned()
            .ok_or_else(|| ModelError::Uninterpreted(symbol.to_string()))
    }

    fn distance(&self, f: &MeasMor, g: &MeasMor) -> Result<QValue, ModelError> {
        self.distance_with(f, g, self.norm)
    }

    fn equal(&self, f: &MeasMor, g: &MeasMor) -> Result<bool, ModelError> {
        if f.src != g.src || f.tgt != g.tgt {
            return Err(ModelError::NotParallel);
        }
        Ok(f.matrix == g.matrix)
    }
}
