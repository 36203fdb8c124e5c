//! Kneading sequences of external addresses.
//!
//! For an address `s`, the sequences `k s` (`k` in `Z`) cut the sequence space
//! into the open intervals `(k s, (k+1) s)`. Entry `i` of `K(s)` records the
//! interval containing `sigma^{i-1}(s)`, or the boundary symbol `<k-1|k>`
//! when `sigma^{i-1}(s) = k s` exactly.
//!
//! Because `k s` and `sigma^{i-1}(s)` share their first entry `s_i` whenever
//! it matters, the interval is decided by comparing `sigma^i(s)` with `s`:
//! greater gives `s_i`, smaller gives `s_i - 1`, equal gives `<s_i - 1|s_i>`.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use super::address::{canonicalize, lcm, ExternalAddress};
use super::SymbolicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum KneadingSymbol {
    Plain(i64),
    /// `Boundary(k)` is the symbol `<k-1|k>`.
    Boundary(i64),
}

impl KneadingSymbol {
    pub fn is_boundary(self) -> bool {
        matches!(self, KneadingSymbol::Boundary(_))
    }

    /// True if `self` is a boundary symbol and `other` the plain symbol on
    /// one of its two sides.
    pub fn straddles(self, other: KneadingSymbol) -> bool {
        match (self, other) {
            (KneadingSymbol::Boundary(k), KneadingSymbol::Plain(j)) => j == k || j == k - 1,
            _ => false,
        }
    }
}

impl fmt::Display for KneadingSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KneadingSymbol::Plain(k) => write!(f, "{k}"),
            KneadingSymbol::Boundary(k) => write!(f, "<{}|{}>", k - 1, k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KneadingSequence {
    preperiod: Vec<KneadingSymbol>,
    period: Vec<KneadingSymbol>,
}

impl KneadingSequence {
    pub fn new(preperiod: Vec<KneadingSymbol>, period: Vec<KneadingSymbol>) -> Result<Self, SymbolicError> {
        if period.is_empty() {
            return Err(SymbolicError::EmptyPeriod);
        }
        let (preperiod, period) = canonicalize(preperiod, period);
        Ok(Self { preperiod, period })
    }

    pub fn preperiod(&self) -> &[KneadingSymbol] {
        &self.preperiod
    }

    pub fn period(&self) -> &[KneadingSymbol] {
        &self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.preperiod.is_empty()
    }

    /// Entry `i`, 1-based.
    pub fn entry(&self, i: usize) -> KneadingSymbol {
        assert!(i >= 1, "kneading entries are indexed from 1");
        let p = self.preperiod.len();
        if i <= p {
            self.preperiod[i - 1]
        } else {
            self.period[(i - 1 - p) % self.period.len()]
        }
    }

    pub fn contains_boundary(&self) -> bool {
        self.preperiod.iter().chain(&self.period).any(|k| k.is_boundary())
    }

    /// Human-readable form used by the CLI, e.g. `0,<0|1> (period 2)`.
    pub fn describe(&self) -> String {
        let join = |symbols: &[KneadingSymbol]| {
            symbols
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        if self.preperiod.is_empty() {
            format!("{} (period {})", join(&self.period), self.period.len())
        } else {
            format!(
                "{} | {} (preperiod {}, period {})",
                join(&self.preperiod),
                join(&self.period),
                self.preperiod.len(),
                self.period.len()
            )
        }
    }
}

impl fmt::Display for KneadingSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |symbols: &[KneadingSymbol]| {
            symbols
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "[{};{}]", join(&self.preperiod), join(&self.period))
    }
}

/// `K(s)`.
pub fn kneading_sequence(s: &ExternalAddress) -> KneadingSequence {
    let p = s.preperiod().len();
    let m = s.period().len();
    let mut shifted = s.clone();
    let mut symbols = Vec::with_capacity(p + m);
    for i in 1..=p + m {
        shifted = shifted.shift();
        let si = s.entry(i);
        symbols.push(match shifted.cmp(s) {
            Ordering::Greater => KneadingSymbol::Plain(si),
            Ordering::Less => KneadingSymbol::Plain(si - 1),
            Ordering::Equal => KneadingSymbol::Boundary(si),
        });
    }
    let period = symbols.split_off(p);
    KneadingSequence::new(symbols, period).expect("period block is nonempty")
}

/// Where two kneading sequences first differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    /// 1-based position of the first differing entry.
    pub index: usize,
    /// One entry is `<k-1|k>` and the other is `k-1` or `k`.
    pub boundary_compatible: bool,
}

/// First position at which `K(a)` and `K(b)` differ, `None` if never.
pub fn first_kneading_disagreement(
    a: &ExternalAddress,
    b: &ExternalAddress,
) -> Result<Option<Disagreement>, SymbolicError> {
    if a == b {
        return Err(SymbolicError::IdenticalAddresses);
    }
    let ka = kneading_sequence(a);
    let kb = kneading_sequence(b);
    Ok(kneading_disagreement(&ka, &kb))
}

pub fn kneading_disagreement(ka: &KneadingSequence, kb: &KneadingSequence) -> Option<Disagreement> {
    let bound = ka.preperiod().len() + kb.preperiod().len() + lcm(ka.period().len(), kb.period().len()) + 1;
    (1..=bound).find_map(|i| {
        let (x, y) = (ka.entry(i), kb.entry(i));
        (x != y).then(|| Disagreement {
            index: i,
            boundary_compatible: x.straddles(y) || y.straddles(x),
        })
    })
}

/// Whether `K` is "almost equal" to the `n`-periodic sector sequence: entry
/// `i` equals `k_i` unless `qn` divides `i`, where it must be `<k_i - 1|k_i>`
/// or `<k_i|k_i + 1>`.
pub fn sector_almost_equal(
    kneading: &KneadingSequence,
    sector: &[i64],
    q: usize,
) -> Result<bool, SymbolicError> {
    let n = sector.len();
    let expected = q * n;
    if n == 0 || q == 0 || !kneading.is_periodic() || kneading.period().len() != expected {
        return Err(SymbolicError::PeriodMismatch {
            expected,
            found: kneading.period().len(),
            preperiodic: !kneading.is_periodic(),
        });
    }
    Ok((1..=expected).all(|i| {
        let k = sector[(i - 1) % n];
        let entry = kneading.entry(i);
        if i % expected == 0 {
            entry == KneadingSymbol::Boundary(k) || entry == KneadingSymbol::Boundary(k + 1)
        } else {
            entry == KneadingSymbol::Plain(k)
        }
    }))
}
