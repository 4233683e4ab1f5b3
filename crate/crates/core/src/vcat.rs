//! Finite V-categories given by dense distance tables.

use thiserror::Error;

use crate::quantale::{self, QValue, QuantaleError, QuantaleSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VCatError {
    #[error(transparent)]
    Quantale(#[from] QuantaleError),
    #[error("table has {found} entries, expected {expected}")]
    TableSize { expected: usize, found: usize },
    #[error("reflexivity fails at {0}: k is not below a(x, x)")]
    Reflexivity(String),
    #[error("transitivity fails at ({0}, {1}, {2})")]
    Transitivity(String, String, String),
    #[error("map is not non-expansive at ({0}, {1})")]
    Expansive(String, String),
    #[error("map has {found} entries for a carrier of size {expected}")]
    MapSize { expected: usize, found: usize },
    #[error("map sends an element to index {0}, outside the target carrier")]
    MapRange(usize),
    #[error("carrier mismatch between V-functors")]
    CarrierMismatch,
}

/// A finite V-category `(X, a)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FinVCat {
    spec: QuantaleSpec,
    carrier: Vec<String>,
    table: Vec<QValue>,
}

impl FinVCat {
    /// Builds a V-category, checking reflexivity and transitivity.
    pub fn new(
        spec: QuantaleSpec,
        carrier: Vec<String>,
        table: Vec<QValue>,
    ) -> Result<Self, VCatError> {
        let c = Self::new_unchecked(spec, carrier, table)?;
        c.validate()?;
        Ok(c)
    }

    fn new_unchecked(
        spec: QuantaleSpec,
        carrier: Vec<String>,
        table: Vec<QValue>,
    ) -> Result<Self, VCatError> {
        let n = carrier.len();
        if table.len() != n * n {
            return Err(VCatError::TableSize {
                expected: n * n,
                found: table.len(),
            });
        }
        for v in &table {
            if v.spec() != spec {
                return Err(QuantaleError::SpecMismatch(spec, v.spec()).into());
            }
        }
        Ok(FinVCat {
            spec,
            carrier,
            table,
        })
    }

    /// Builds the table from a distance function on indices.
    pub fn from_fn<F>(spec: QuantaleSpec, carrier: Vec<String>, mut dist: F) -> Result<Self, VCatError>
    where
        F: FnMut(usize, usize) -> QValue,
    {
        let n = carrier.len();
        let mut table = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                table.push(dist(i, j));
            }
        }
        Self::new(spec, carrier, table)
    }

    /// The one-point V-category with `a(*, *) = k`.
    pub fn unit(spec: QuantaleSpec) -> Self {
        FinVCat {
            spec,
            carrier: vec!["*".to_string()],
            table: vec![spec.unit()],
        }
    }

    /// `k` on the diagonal, bottom elsewhere.
    pub fn discrete(spec: QuantaleSpec, carrier: Vec<String>) -> Self {
        let n = carrier.len();
        let table = (0..n * n)
            .map(|ix| {
                if ix / n == ix % n {
                    spec.unit()
                } else {
                    spec.bottom()
                }
            })
            .collect();
        FinVCat {
            spec,
            carrier,
            table,
        }
    }

    pub fn validate(&self) -> Result<(), VCatError> {
        let n = self.len();
        let k = self.spec.unit();
        for x in 0..n {
            if !k.leq(self.dist(x, x))? {
                return Err(VCatError::Reflexivity(self.carrier[x].clone()));
            }
        }
        for x in 0..n {
            for y in 0..n {
                let axy = self.dist(x, y);
                for z in 0..n {
                    if !axy.tensor(self.dist(y, z))?.leq(self.dist(x, z))? {
                        return Err(VCatError::Transitivity(
                            self.carrier[x].clone(),
                            self.carrier[y].clone(),
                            self.carrier[z].clone(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> QuantaleSpec {
        self.spec
    }

    pub fn carrier(&self) -> &[String] {
        &self.carrier
    }

    pub fn len(&self) -> usize {
        self.carrier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carrier.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.carrier.iter().position(|c| c == id)
    }

    pub fn dist(&self, x: usize, y: usize) -> &QValue {
        &self.table[x * self.len() + y]
    }

    /// `x <= y` in the natural order, i.e. `k <= a(x, y)`.
    pub fn natural_leq(&self, x: usize, y: usize) -> bool {
        self.spec.unit() == *self.dist(x, y)
    }

    pub fn is_separated(&self) -> bool {
        let n = self.len();
        (0..n).all(|x| {
            (0..n).all(|y| x == y || !(self.natural_leq(x, y) && self.natural_leq(y, x)))
        })
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|x| (0..n).all(|y| self.dist(x, y) == self.dist(y, x)))
    }

    /// Cartesian product with the pointwise tensor of distances.
    pub fn tensor(&self, other: &FinVCat) -> Result<FinVCat, VCatError> {
        if self.spec != other.spec {
            return Err(QuantaleError::SpecMismatch(self.spec, other.spec).into());
        }
        let (n, m) = (self.len(), other.len());
        let carrier = self
            .carrier
            .iter()
            .flat_map(|a| other.carrier.iter().map(move |b| format!("({a},{b})")))
            .collect();
        let mut table = Vec::with_capacity(n * m * n * m);
        for x in 0..n {
            for y in 0..m {
                for x2 in 0..n {
                    for y2 in 0..m {
                        table.push(self.dist(x, x2).tensor(other.dist(y, y2))?);
                    }
                }
            }
        }
        FinVCat::new_unchecked(self.spec, carrier, table)
    }

    /// Quotient by `x ~ y iff x <= y and y <= x`. Classes are represented by
    /// their least carrier index; the projection sends each element to its
    /// class index in the quotient.
    pub fn separated_quotient(&self) -> (FinVCat, VFunctorTable) {
        let n = self.len();
        let mut rep = vec![usize::MAX; n];
        let mut reps = Vec::new();
        for x in 0..n {
            if rep[x] != usize::MAX {
                continue;
            }
            let class = reps.len();
            reps.push(x);
            for y in x..n {
                if rep[y] == usize::MAX && self.natural_leq(x, y) && self.natural_leq(y, x) {
                    rep[y] = class;
                }
            }
        }
        let carrier = reps.iter().map(|&r| self.carrier[r].clone()).collect();
        let table = reps
            .iter()
            .flat_map(|&x| reps.iter().map(move |&y| self.dist(x, y).clone()))
            .collect();
        let quotient = FinVCat {
            spec: self.spec,
            carrier,
            table,
        };
        let projection = VFunctorTable {
            source_len: n,
            target_len: reps.len(),
            mapping: rep,
        };
        (quotient, projection)
    }

    /// Checks that the quotient distance does not depend on representatives.
    pub fn quotient_is_well_defined(&self, projection: &VFunctorTable, quotient: &FinVCat) -> bool {
        let n = self.len();
        (0..n).all(|x| {
            (0..n).all(|y| self.dist(x, y) == quotient.dist(projection.apply(x), projection.apply(y)))
        })
    }
}

/// A V-functor between finite V-categories, stored as an index table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VFunctorTable {
    source_len: usize,
    target_len: usize,
    mapping: Vec<usize>,
}

impl VFunctorTable {
    /// Checks totality and non-expansiveness `a(x, y) <= b(f x, f y)`.
    pub fn new(source: &FinVCat, target: &FinVCat, mapping: Vec<usize>) -> Result<Self, VCatError> {
        if mapping.len() != source.len() {
            return Err(VCatError::MapSize {
                expected: source.len(),
                found: mapping.len(),
            });
        }
        if let Some(&bad) = mapping.iter().find(|&&t| t >= target.len()) {
            return Err(VCatError::MapRange(bad));
        }
        for x in 0..source.len() {
            for y in 0..source.len() {
                if !source
                    .dist(x, y)
                    .leq(target.dist(mapping[x], mapping[y]))?
                {
                    return Err(VCatError::Expansive(
                        source.carrier[x].clone(),
                        source.carrier[y].clone(),
                    ));
                }
            }
        }
        Ok(VFunctorTable {
            source_len: source.len(),
            target_len: target.len(),
            mapping,
        })
    }

    pub fn identity(c: &FinVCat) -> Self {
        VFunctorTable {
            source_len: c.len(),
            target_len: c.len(),
            mapping: (0..c.len()).collect(),
        }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.mapping[x]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn is_bijective(&self) -> bool {
        if self.source_len != self.target_len {
            return false;
        }
        let mut seen = vec![false; self.target_len];
        self.mapping.iter().all(|&t| !std::mem::replace(&mut seen[t], true))
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &VFunctorTable) -> Result<VFunctorTable, VCatError> {
        if self.target_len != next.source_len {
            return Err(VCatError::CarrierMismatch);
        }
        Ok(VFunctorTable {
            source_len: self.source_len,
            target_len: next.target_len,
            mapping: self.mapping.iter().map(|&x| next.mapping[x]).collect(),
        })
    }
}

/// Distance of two parallel V-functors in the hom V-category: the meet over
/// the source of the pointwise target distances.
pub fn hom_distance(
    source: &FinVCat,
    target: &FinVCat,
    f: &VFunctorTable,
    g: &VFunctorTable,
) -> Result<QValue, VCatError> {
    for h in [f, g] {
        if h.source_len != source.len() || h.target_len != target.len() {
            return Err(VCatError::CarrierMismatch);
        }
    }
    let values: Vec<&QValue> = (0..source.len())
        .map(|x| target.dist(f.apply(x), g.apply(x)))
        .collect();
    Ok(quantale::meet(target.spec(), values)?)
}
