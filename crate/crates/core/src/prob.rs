//! Exact probabilities, finite-support distributions and paired strings.
//!
//! Everything here is exact rational arithmetic on arbitrary-precision
//! integers, so values such as `13/16` compare by equality.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;
use std::ops::{Add, Div, Mul};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// General exact rational, used where intermediate values may leave `[0, 1]`
/// (linear solves, margins).
pub type Rational = BigRational;

/// Alphabet element. Anything small, ordered and hashable will do.
pub trait Symbol: Clone + Eq + Ord + Hash + fmt::Debug + Send + Sync + 'static {}
impl<T: Clone + Eq + Ord + Hash + fmt::Debug + Send + Sync + 'static> Symbol for T {}

/// Parses `"p/q"` or `"p"` into a reduced rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || Error::BadRational(text.to_string());
    let trimmed = text.trim();
    let (num, den) = match trimmed.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (trimmed, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(num, den))
}

/// Canonical text form: `"p/q"` in lowest terms, or `"p"` when `q = 1`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A rational number in `[0, 1]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Probability(Rational);

impl Probability {
    pub fn new(value: Rational) -> Result<Self> {
        if value.is_negative() || value > Rational::one() {
            return Err(Error::InvalidProbability(format_rational(&value)));
        }
        Ok(Probability(value))
    }

    /// `num/den` for literals known to be valid.
    ///
    /// Panics if the ratio is outside `[0, 1]` or `den` is zero.
    pub fn frac(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Probability::new(BigRational::new(num.into(), den.into())).expect("literal outside [0, 1]")
    }

    pub fn zero() -> Self {
        Probability(Rational::zero())
    }

    pub fn one() -> Self {
        Probability(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_rational(self) -> Rational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// `1 - p`.
    pub fn complement(&self) -> Self {
        Probability(Rational::one() - &self.0)
    }

    /// `self / other` when the quotient is again a probability.
    pub fn checked_div(&self, other: &Probability) -> Option<Self> {
        if other.is_zero() || self.0 > other.0 {
            return None;
        }
        Some(Probability(&self.0 / &other.0))
    }

    /// `self - other` when non-negative.
    pub fn checked_sub(&self, other: &Probability) -> Option<Self> {
        if other.0 > self.0 {
            None
        } else {
            Some(Probability(&self.0 - &other.0))
        }
    }

    /// Lossy conversion for display and plotting only.
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl fmt::Debug for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Probability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Probability::new(parse_rational(s)?)
    }
}

impl TryFrom<Rational> for Probability {
    type Error = Error;

    fn try_from(value: Rational) -> Result<Self> {
        Probability::new(value)
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl Mul for Probability {
    type Output = Probability;
    fn mul(self, rhs: Probability) -> Probability {
        Probability(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Probability> for &'a Probability {
    type Output = Probability;
    fn mul(self, rhs: &'a Probability) -> Probability {
        Probability(&self.0 * &rhs.0)
    }
}

/// Sums of probabilities are only formed where the total is itself a
/// probability (masses of disjoint events); this is debug-asserted.
impl Add for Probability {
    type Output = Probability;
    fn add(self, rhs: Probability) -> Probability {
        let sum = self.0 + rhs.0;
        debug_assert!(sum <= Rational::one(), "probability sum exceeds 1");
        Probability(sum)
    }
}

impl<'a> Add<&'a Probability> for &'a Probability {
    type Output = Probability;
    fn add(self, rhs: &'a Probability) -> Probability {
        Probability(&self.0 + &rhs.0)
    }
}

impl<'a> Div<&'a Probability> for &'a Probability {
    type Output = Probability;
    /// Panics unless `self <= rhs` and `rhs > 0`.
    fn div(self, rhs: &'a Probability) -> Probability {
        self.checked_div(rhs).expect("quotient is not a probability")
    }
}

impl std::iter::Sum for Probability {
    fn sum<It: Iterator<Item = Probability>>(iter: It) -> Probability {
        iter.fold(Probability::zero(), |acc, p| acc + p)
    }
}

/// Finite-support probability distribution. Zero entries are never stored,
/// so the key set is the support.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteDist<X: Symbol> {
    entries: BTreeMap<X, Probability>,
}

impl<X: Symbol> FiniteDist<X> {
    /// Builds a distribution from weighted entries; repeated elements are
    /// accumulated. The total must be exactly 1.
    pub fn new(entries: impl IntoIterator<Item = (X, Probability)>) -> Result<Self> {
        let mut map: BTreeMap<X, Rational> = BTreeMap::new();
        for (x, p) in entries {
            *map.entry(x).or_insert_with(Rational::zero) += p.into_rational();
        }
        let total: Rational = map.values().cloned().sum();
        if !total.is_one() {
            return Err(Error::WeightSumMismatch(format_rational(&total)));
        }
        let entries = map
            .into_iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(x, p)| Ok((x, Probability::new(p)?)))
            .collect::<Result<_>>()?;
        Ok(FiniteDist { entries })
    }

    pub(crate) fn from_normalized(entries: BTreeMap<X, Probability>) -> Self {
        debug_assert!(!entries.is_empty());
        debug_assert!(entries.values().all(|p| !p.is_zero()));
        FiniteDist { entries }
    }

    pub fn point(x: X) -> Self {
        FiniteDist { entries: BTreeMap::from([(x, Probability::one())]) }
    }

    pub fn uniform(xs: impl IntoIterator<Item = X>) -> Result<Self> {
        let mut set: Vec<X> = xs.into_iter().collect();
        set.sort();
        set.dedup();
        if set.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let share = Probability::frac(1, set.len() as i64);
        Ok(FiniteDist { entries: set.into_iter().map(|x| (x, share.clone())).collect() })
    }

    /// Pointwise convex combination.
    pub fn mix(weights: &[Probability], dists: &[FiniteDist<X>]) -> Result<Self> {
        if weights.len() != dists.len() {
            return Err(Error::LengthMismatch(weights.len(), dists.len()));
        }
        check_weights(weights)?;
        let mut acc: BTreeMap<X, Rational> = BTreeMap::new();
        for (w, d) in weights.iter().zip(dists) {
            if w.is_zero() {
                continue;
            }
            for (x, p) in &d.entries {
                *acc.entry(x.clone()).or_insert_with(Rational::zero) += w.value() * p.value();
            }
        }
        Ok(FiniteDist {
            entries: acc
                .into_iter()
                .filter(|(_, p)| !p.is_zero())
                .map(|(x, p)| (x, Probability(p)))
                .collect(),
        })
    }

    pub fn prob(&self, x: &X) -> Probability {
        self.entries.get(x).cloned().unwrap_or_else(Probability::zero)
    }

    pub fn contains(&self, x: &X) -> bool {
        self.entries.contains_key(x)
    }

    pub fn support(&self) -> impl Iterator<Item = &X> + '_ {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&X, &Probability)> + '_ {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The single supported element, if this is a point distribution.
    pub fn as_point(&self) -> Option<&X> {
        if self.entries.len() == 1 {
            self.entries.keys().next()
        } else {
            None
        }
    }

    /// Total mass of elements satisfying `pred`.
    pub fn mass(&self, mut pred: impl FnMut(&X) -> bool) -> Probability {
        Probability(self.entries.iter().filter(|(x, _)| pred(x)).map(|(_, p)| p.value()).sum())
    }

    /// Pushforward along `f`.
    pub fn map<Y: Symbol>(&self, mut f: impl FnMut(&X) -> Y) -> FiniteDist<Y> {
        let mut acc: BTreeMap<Y, Rational> = BTreeMap::new();
        for (x, p) in &self.entries {
            *acc.entry(f(x)).or_insert_with(Rational::zero) += p.value();
        }
        FiniteDist { entries: acc.into_iter().map(|(y, p)| (y, Probability(p))).collect() }
    }

    /// Product distribution.
    pub fn product<Y: Symbol>(&self, other: &FiniteDist<Y>) -> FiniteDist<(X, Y)> {
        let mut entries = BTreeMap::new();
        for (x, p) in &self.entries {
            for (y, q) in &other.entries {
                entries.insert((x.clone(), y.clone()), p * q);
            }
        }
        FiniteDist { entries }
    }
}

impl<X: Symbol> fmt::Debug for FiniteDist<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter()).finish()
    }
}

/// Checks that mixture weights are exactly normalized.
pub(crate) fn check_weights(weights: &[Probability]) -> Result<()> {
    let total: Rational = weights.iter().map(|w| w.value()).sum();
    if total.is_one() {
        Ok(())
    } else {
        Err(Error::WeightSumMismatch(format_rational(&total)))
    }
}

/// Interleaved string of input/output pairs, `(i_0, o_0) (i_1, o_1) ...`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory<I, O> {
    pairs: Vec<(I, O)>,
}

impl<I, O> Default for Trajectory<I, O> {
    fn default() -> Self {
        Trajectory { pairs: Vec::new() }
    }
}

impl<I: Clone, O: Clone> Trajectory<I, O> {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_parts(inputs: Vec<I>, outputs: Vec<O>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::LengthMismatch(inputs.len(), outputs.len()));
        }
        Ok(Trajectory { pairs: inputs.into_iter().zip(outputs).collect() })
    }

    pub fn push(&mut self, input: I, output: O) {
        self.pairs.push((input, output));
    }

    pub fn then(&self, input: I, output: O) -> Self {
        let mut next = self.clone();
        next.push(input, output);
        next
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().cloned());
        Trajectory { pairs }
    }

    /// First `n` pairs.
    pub fn prefix(&self, n: usize) -> Self {
        Trajectory { pairs: self.pairs[..n.min(self.pairs.len())].to_vec() }
    }

    /// Everything after the first `n` pairs.
    pub fn suffix(&self, n: usize) -> Self {
        Trajectory { pairs: self.pairs[n.min(self.pairs.len())..].to_vec() }
    }

    pub fn inputs(&self) -> Vec<I> {
        self.pairs.iter().map(|(i, _)| i.clone()).collect()
    }

    pub fn outputs(&self) -> Vec<O> {
        self.pairs.iter().map(|(_, o)| o.clone()).collect()
    }
}

impl<I, O> Trajectory<I, O> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(I, O)] {
        &self.pairs
    }
}

impl<I, O> FromIterator<(I, O)> for Trajectory<I, O> {
    fn from_iter<T: IntoIterator<Item = (I, O)>>(iter: T) -> Self {
        Trajectory { pairs: iter.into_iter().collect() }
    }
}
