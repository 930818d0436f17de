//! Finite-support subdistributions with exact rational weights.
//!
//! Every semantic function in the crate returns a [`Dist`]. Weights are
//! [`Rat`]s, zero-weight entries are never stored, and keys live in a
//! `BTreeMap` so iteration order (and therefore every report that walks a
//! distribution) is deterministic.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arbitrary-precision rational, always in canonical (reduced) form.
pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Renders as `num/den`, including for integers (`1/1`, `0/1`).
pub fn fmt_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Decimal approximation with `places` fractional digits, truncated.
pub fn fmt_decimal(r: &Rat, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = (r * Rat::from_integer(scale.clone())).floor().to_integer();
    let neg = scaled.is_negative();
    let abs = scaled.abs();
    let int_part = &abs / &scale;
    let frac_part = &abs % &scale;
    let sign = if neg { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part:0>places$}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RatParseError {
    #[error("malformed rational `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `a/b` or a plain integer `a`.
pub fn parse_rat(s: &str) -> Result<Rat, RatParseError> {
    let s = s.trim();
    let bad = || RatParseError::Malformed(s.to_string());
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(RatParseError::ZeroDenominator(s.to_string()));
            }
            Ok(Rat::new(n, d))
        }
        None => Ok(Rat::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistError {
    #[error("random variable takes value {value} outside [0, 1] on the support")]
    OutOfUnitRange { value: String },
}

/// A finite-support subdistribution: total mass is at most one and every
/// stored weight is strictly positive.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dist<T: Ord> {
    entries: BTreeMap<T, Rat>,
}

impl<T: Ord> Default for Dist<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Ord> Dist<T> {
    /// The null distribution.
    pub fn zero() -> Self {
        Dist {
            entries: BTreeMap::new(),
        }
    }

    pub fn ret(a: T) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(a, Rat::one());
        Dist { entries }
    }

    /// Builds a distribution from weighted points, summing duplicates and
    /// dropping zero weights. Panics on negative weights or total mass above
    /// one, both of which are programming errors.
    pub fn from_weights<I: IntoIterator<Item = (T, Rat)>>(items: I) -> Self {
        let mut d = Dist::zero();
        for (k, w) in items {
            d.add(k, w);
        }
        assert!(
            d.mass() <= Rat::one(),
            "distribution mass exceeds one: {}",
            fmt_rat(&d.mass())
        );
        d
    }

    /// Adds `w` to the weight of `k`. Does not check the mass bound.
    pub(crate) fn add(&mut self, k: T, w: Rat) {
        assert!(!w.is_negative(), "negative weight");
        if w.is_zero() {
            return;
        }
        match self.entries.get_mut(&k) {
            Some(v) => *v += w,
            None => {
                self.entries.insert(k, w);
            }
        }
    }

    pub fn prob(&self, k: &T) -> Rat {
        self.entries.get(k).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn mass(&self) -> Rat {
        self.entries.values().fold(Rat::zero(), |acc, w| acc + w)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &Rat)> {
        self.entries.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.entries.keys()
    }

    pub fn into_entries(self) -> BTreeMap<T, Rat> {
        self.entries
    }

    /// `bind(f, self)`: weight of `b` is the sum over `a` of `self(a) * f(a)(b)`.
    pub fn bind<U: Ord, F: FnMut(&T) -> Dist<U>>(&self, mut f: F) -> Dist<U> {
        let mut out = Dist::zero();
        for (a, wa) in &self.entries {
            for (b, wb) in f(a).entries {
                out.add(b, wa * wb);
            }
        }
        out
    }

    /// Pushforward along `f`.
    pub fn map<U: Ord, F: FnMut(&T) -> U>(&self, mut f: F) -> Dist<U> {
        let mut out = Dist::zero();
        for (a, w) in &self.entries {
            out.add(f(a), w.clone());
        }
        out
    }

    /// `E[x]` for a `[0,1]`-valued random variable.
    pub fn expect<F: FnMut(&T) -> Rat>(&self, mut x: F) -> Result<Rat, DistError> {
        let mut acc = Rat::zero();
        for (a, w) in &self.entries {
            let v = x(a);
            if v.is_negative() || v > Rat::one() {
                return Err(DistError::OutOfUnitRange { value: fmt_rat(&v) });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Weighted sum of an arbitrary non-negative function. Used for error
    /// credit bookkeeping, where per-branch values may exceed one.
    pub fn integrate<F: FnMut(&T) -> Rat>(&self, mut x: F) -> Rat {
        self.entries
            .iter()
            .fold(Rat::zero(), |acc, (a, w)| acc + w * x(a))
    }

    /// Multiplies every weight by `s` in `[0, 1]`.
    pub fn scale(&self, s: &Rat) -> Dist<T>
    where
        T: Clone,
    {
        let mut out = Dist::zero();
        for (a, w) in &self.entries {
            out.add(a.clone(), w * s);
        }
        out
    }

    /// Pointwise `self(a) <= other(a)` for every `a`.
    pub fn le_pointwise(&self, other: &Dist<T>) -> bool {
        self.entries.iter().all(|(k, w)| *w <= other.prob(k))
    }

    pub fn filter<F: FnMut(&T) -> bool>(&self, mut keep: F) -> Dist<T>
    where
        T: Clone,
    {
        Dist {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, w)| (k.clone(), w.clone()))
                .collect(),
        }
    }
}

impl<T: Ord + Clone> Dist<T> {
    /// Independent product.
    pub fn product<U: Ord + Clone>(&self, other: &Dist<U>) -> Dist<(T, U)> {
        self.bind(|a| other.map(|b| (a.clone(), b.clone())))
    }
}

impl Dist<u64> {
    /// Uniform over `{0, .., n}`.
    pub fn unif(n: u64) -> Self {
        let w = Rat::new(BigInt::one(), BigInt::from(n) + 1);
        Dist {
            entries: (0..=n).map(|k| (k, w.clone())).collect(),
        }
    }
}

impl<T: Ord + fmt::Display> Dist<T> {
    /// JSON rendering: entries sorted by key, weights as `num/den`.
    pub fn to_json(&self) -> Vec<DistEntryJson> {
        self.entries
            .iter()
            .map(|(k, w)| DistEntryJson {
                value: k.to_string(),
                p: fmt_rat(w),
            })
            .collect()
    }
}

impl<T: Ord + fmt::Debug> fmt::Debug for Dist<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, w)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k:?} ↦ {}", fmt_rat(w))?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistEntryJson {
    pub value: String,
    pub p: String,
}

/// Parses the JSON rendering back into a distribution over canonical value
/// strings.
pub fn dist_from_json(entries: &[DistEntryJson]) -> Result<Dist<String>, RatParseError> {
    let mut items = Vec::with_capacity(entries.len());
    for e in entries {
        items.push((e.value.clone(), parse_rat(&e.p)?));
    }
    Ok(Dist::from_weights(items))
}
