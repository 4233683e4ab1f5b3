//! Commutative integral quantales used to label equations.
//!
//! Four instances are supported: the Boolean quantale, the Gödel t-norm on
//! the unit interval, the Lawvere (metric) quantale and the ultrametric
//! quantale. Elements are exact rationals, plus an infinity marker for the
//! two metric instances. In the metric instances the lattice order is the
//! reverse of the numeric order, so `top` is `0` and `bottom` is `inf`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuantaleError {
    #[error("quantale mismatch: {0} vs {1}")]
    SpecMismatch(QuantaleSpec, QuantaleSpec),
    #[error("value {value} is outside the carrier of the {spec} quantale")]
    OutOfCarrier { spec: QuantaleSpec, value: String },
    #[error("cannot parse quantale value `{0}`")]
    Parse(String),
    #[error("unknown quantale `{0}` (expected bool, godel, metric or ultrametric)")]
    UnknownQuantale(String),
}

/// The four supported quantale instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuantaleSpec {
    Boolean,
    Godel,
    Lawvere,
    Ultrametric,
}

impl QuantaleSpec {
    pub const ALL: [QuantaleSpec; 4] = [
        QuantaleSpec::Boolean,
        QuantaleSpec::Godel,
        QuantaleSpec::Lawvere,
        QuantaleSpec::Ultrametric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuantaleSpec::Boolean => "bool",
            QuantaleSpec::Godel => "godel",
            QuantaleSpec::Lawvere => "metric",
            QuantaleSpec::Ultrametric => "ultrametric",
        }
    }

    fn is_metric(self) -> bool {
        matches!(self, QuantaleSpec::Lawvere | QuantaleSpec::Ultrametric)
    }

    /// The tensor unit `k`, which is also the top element.
    pub fn unit(self) -> QValue {
        self.top()
    }

    pub fn top(self) -> QValue {
        let value = if self.is_metric() {
            Extended::zero()
        } else {
            Extended::one()
        };
        QValue { spec: self, value }
    }

    pub fn bottom(self) -> QValue {
        let value = if self.is_metric() {
            Extended::Infinity
        } else {
            Extended::zero()
        };
        QValue { spec: self, value }
    }

    /// Builds an element, checking that it lies in the carrier.
    pub fn value(self, value: Extended) -> Result<QValue, QuantaleError> {
        let ok = match (&value, self) {
            (Extended::Infinity, s) => s.is_metric(),
            (Extended::Finite(r), QuantaleSpec::Boolean) => r.is_zero() || r.is_one(),
            (Extended::Finite(r), QuantaleSpec::Godel) => {
                !r.is_negative() && *r <= BigRational::one()
            }
            (Extended::Finite(r), _) => !r.is_negative(),
        };
        if ok {
            Ok(QValue { spec: self, value })
        } else {
            Err(QuantaleError::OutOfCarrier {
                spec: self,
                value: value.to_string(),
            })
        }
    }

    pub fn rational(self, r: BigRational) -> Result<QValue, QuantaleError> {
        self.value(Extended::Finite(r))
    }

    pub fn int(self, n: i64) -> Result<QValue, QuantaleError> {
        self.rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(self, num: i64, den: i64) -> Result<QValue, QuantaleError> {
        self.rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Parses a label: an integer, a fraction `a/b`, a decimal, `inf`,
    /// `top` or `bot`.
    pub fn parse_value(self, text: &str) -> Result<QValue, QuantaleError> {
        let t = text.trim();
        match t {
            "top" | "⊤" => return Ok(self.top()),
            "bot" | "⊥" => return Ok(self.bottom()),
            _ => {}
        }
        let value: Extended = t.parse()?;
        self.value(value)
    }
}

impl fmt::Display for QuantaleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuantaleSpec {
    type Err = QuantaleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "bool" | "boolean" => Ok(QuantaleSpec::Boolean),
            "godel" | "gödel" => Ok(QuantaleSpec::Godel),
            "metric" | "lawvere" => Ok(QuantaleSpec::Lawvere),
            "ultrametric" => Ok(QuantaleSpec::Ultrametric),
            other => Err(QuantaleError::UnknownQuantale(other.to_string())),
        }
    }
}

/// A non-negative extended rational.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Extended {
    Finite(BigRational),
    Infinity,
}

impl Extended {
    pub fn zero() -> Self {
        Extended::Finite(BigRational::zero())
    }

    pub fn one() -> Self {
        Extended::Finite(BigRational::one())
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Extended::Finite(r) => Some(r),
            Extended::Infinity => None,
        }
    }

    fn add(&self, other: &Extended) -> Extended {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinity,
        }
    }
}

impl Ord for Extended {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.cmp(b),
            (Extended::Finite(_), Extended::Infinity) => Ordering::Less,
            (Extended::Infinity, Extended::Finite(_)) => Ordering::Greater,
            (Extended::Infinity, Extended::Infinity) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(r) => write!(f, "{r}"),
            Extended::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Extended {
    type Err = QuantaleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || QuantaleError::Parse(t.to_string());
        if t == "inf" || t == "∞" {
            return Ok(Extended::Infinity);
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Extended::Finite(BigRational::new(n, d)));
        }
        if let Some((whole, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(err());
            }
            let whole: BigInt = if whole.is_empty() {
                BigInt::zero()
            } else {
                whole.parse().map_err(|_| err())?
            };
            let digits: BigInt = frac.parse().map_err(|_| err())?;
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let sign = if t.starts_with('-') { -1 } else { 1 };
            let r = BigRational::from_integer(whole)
                + BigRational::new(digits * BigInt::from(sign), scale);
            return Ok(Extended::Finite(r));
        }
        let n: BigInt = t.parse().map_err(|_| err())?;
        Ok(Extended::Finite(BigRational::from_integer(n)))
    }
}

/// An element of one of the supported quantales.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QValue {
    spec: QuantaleSpec,
    value: Extended,
}

impl QValue {
    pub fn spec(&self) -> QuantaleSpec {
        self.spec
    }

    pub fn raw(&self) -> &Extended {
        &self.value
    }

    fn same_spec(&self, other: &QValue) -> Result<(), QuantaleError> {
        if self.spec == other.spec {
            Ok(())
        } else {
            Err(QuantaleError::SpecMismatch(self.spec, other.spec))
        }
    }

    pub fn is_top(&self) -> bool {
        *self == self.spec.top()
    }

    pub fn is_bottom(&self) -> bool {
        *self == self.spec.bottom()
    }

    /// Every representable element is a basis element: all four bases are
    /// the (extended) rationals of the carrier.
    pub fn is_basis(&self) -> bool {
        self.spec.value(self.value.clone()).is_ok()
    }

    pub fn tensor(&self, other: &QValue) -> Result<QValue, QuantaleError> {
        self.same_spec(other)?;
        let value = match self.spec {
            QuantaleSpec::Boolean | QuantaleSpec::Godel => {
                std::cmp::min(&self.value, &other.value).clone()
            }
            QuantaleSpec::Lawvere => self.value.add(&other.value),
            QuantaleSpec::Ultrametric => std::cmp::max(&self.value, &other.value).clone(),
        };
        Ok(QValue {
            spec: self.spec,
            value,
        })
    }

    /// Residuation: the largest `r` with `self ⊗ r <= b`.
    pub fn implies(&self, b: &QValue) -> Result<QValue, QuantaleError> {
        self.same_spec(b)?;
        if self.leq(b)? {
            return Ok(self.spec.top());
        }
        let value = match self.spec {
            QuantaleSpec::Lawvere => match (&b.value, &self.value) {
                (Extended::Infinity, _) => Extended::Infinity,
                (Extended::Finite(bv), Extended::Finite(q)) => Extended::Finite(bv - q),
                (Extended::Finite(_), Extended::Infinity) => Extended::zero(),
            },
            _ => b.value.clone(),
        };
        Ok(QValue {
            spec: self.spec,
            value,
        })
    }

    /// Binary join in the quantale order.
    pub fn join2(&self, other: &QValue) -> Result<QValue, QuantaleError> {
        Ok(if self.leq(other)? {
            other.clone()
        } else {
            self.clone()
        })
    }

    /// Binary meet in the quantale order.
    pub fn meet2(&self, other: &QValue) -> Result<QValue, QuantaleError> {
        Ok(if self.leq(other)? {
            self.clone()
        } else {
            other.clone()
        })
    }

    pub fn leq(&self, other: &QValue) -> Result<bool, QuantaleError> {
        self.same_spec(other)?;
        Ok(if self.spec.is_metric() {
            self.value >= other.value
        } else {
            self.value <= other.value
        })
    }

    /// The way-below relation, in closed form per instance.
    pub fn way_below(&self, other: &QValue) -> Result<bool, QuantaleError> {
        self.same_spec(other)?;
        Ok(match self.spec {
            QuantaleSpec::Boolean => self.value <= other.value,
            QuantaleSpec::Godel => self.value < other.value || self.value == Extended::zero(),
            QuantaleSpec::Lawvere | QuantaleSpec::Ultrametric => {
                self.value > other.value || self.value == Extended::Infinity
            }
        })
    }

    /// A chain of `count` basis elements way-below `self` whose joins
    /// converge to `self`.
    ///
    /// Metric: `q + 2^-(i)` for `i = 0..count`; Gödel: `q (1 - 2^-i)` for
    /// `i = 1..=count`; Boolean: the constant chain.
    pub fn approximants(&self, count: usize) -> Vec<QValue> {
        let two = BigInt::from(2);
        (0..count)
            .map(|i| {
                let value = match (&self.value, self.spec) {
                    (_, QuantaleSpec::Boolean) | (Extended::Infinity, _) => self.value.clone(),
                    (Extended::Finite(q), QuantaleSpec::Godel) => {
                        let step = BigRational::new(BigInt::one(), num_traits::pow(two.clone(), i + 1));
                        Extended::Finite(q * (BigRational::one() - step))
                    }
                    (Extended::Finite(q), _) => {
                        let step = BigRational::new(BigInt::one(), num_traits::pow(two.clone(), i));
                        Extended::Finite(q + step)
                    }
                };
                QValue {
                    spec: self.spec,
                    value,
                }
            })
            .collect()
    }
}

/// Join of a finite family; the empty join is bottom.
pub fn join<'a, I>(spec: QuantaleSpec, values: I) -> Result<QValue, QuantaleError>
where
    I: IntoIterator<Item = &'a QValue>,
{
    values
        .into_iter()
        .try_fold(spec.bottom(), |acc, v| acc.join2(v))
}

/// Meet of a finite family; the empty meet is top.
pub fn meet<'a, I>(spec: QuantaleSpec, values: I) -> Result<QValue, QuantaleError>
where
    I: IntoIterator<Item = &'a QValue>,
{
    values
        .into_iter()
        .try_fold(spec.top(), |acc, v| acc.meet2(v))
}

/// Tensor of a finite family; the empty tensor is the unit.
pub fn tensor_all<'a, I>(spec: QuantaleSpec, values: I) -> Result<QValue, QuantaleError>
where
    I: IntoIterator<Item = &'a QValue>,
{
    values
        .into_iter()
        .try_fold(spec.unit(), |acc, v| acc.tensor(v))
}

impl fmt::Display for QValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}
