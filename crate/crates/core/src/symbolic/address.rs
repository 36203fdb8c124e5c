//! Eventually periodic external addresses and half-integer terminated
//! intermediate addresses, with their exact lexicographic order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use super::SymbolicError;

/// Minimal period block and preperiod of `pre` followed by `per` repeated.
pub(crate) fn canonicalize<T: Clone + PartialEq>(mut pre: Vec<T>, mut per: Vec<T>) -> (Vec<T>, Vec<T>) {
    debug_assert!(!per.is_empty());
    let m = per.len();
    if let Some(d) = (1..m).find(|&d| m % d == 0 && (d..m).all(|i| per[i] == per[i - d])) {
        per.truncate(d);
    }
    while let Some(last) = pre.last() {
        if *last != per[per.len() - 1] {
            break;
        }
        pre.pop();
        per.rotate_right(1);
    }
    (pre, per)
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// `s = s1 s2 s3 ...`: a preperiod followed by a period block repeated forever.
///
/// Always stored in canonical form (primitive period, minimal preperiod), so
/// structural equality is equality of sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExternalAddress {
    preperiod: Vec<i64>,
    period: Vec<i64>,
}

impl ExternalAddress {
    pub fn new(preperiod: Vec<i64>, period: Vec<i64>) -> Result<Self, SymbolicError> {
        if period.is_empty() {
            return Err(SymbolicError::EmptyPeriod);
        }
        let (preperiod, period) = canonicalize(preperiod, period);
        Ok(Self { preperiod, period })
    }

    pub fn periodic(period: Vec<i64>) -> Result<Self, SymbolicError> {
        Self::new(Vec::new(), period)
    }

    pub fn constant(k: i64) -> Self {
        Self {
            preperiod: Vec::new(),
            period: vec![k],
        }
    }

    pub fn preperiod(&self) -> &[i64] {
        &self.preperiod
    }

    pub fn period(&self) -> &[i64] {
        &self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.preperiod.is_empty()
    }

    /// `s_i`, 1-based.
    pub fn entry(&self, i: usize) -> i64 {
        assert!(i >= 1, "address entries are indexed from 1");
        let p = self.preperiod.len();
        if i <= p {
            self.preperiod[i - 1]
        } else {
            self.period[(i - 1 - p) % self.period.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Vec<i64> {
        (1..=n).map(|i| self.entry(i)).collect()
    }

    /// The shift `sigma(s) = s2 s3 ...`.
    pub fn shift(&self) -> Self {
        if self.preperiod.is_empty() {
            let mut period = self.period.clone();
            period.rotate_left(1);
            Self {
                preperiod: Vec::new(),
                period,
            }
        } else {
            Self::new(self.preperiod[1..].to_vec(), self.period.clone())
                .expect("period is nonempty")
        }
    }

    pub fn shift_by(&self, n: usize) -> Self {
        // shifting by whole periods beyond the preperiod is the identity
        let p = self.preperiod.len();
        let n = if n > p { p + (n - p) % self.period.len() } else { n };
        (0..n).fold(self.clone(), |s, _| s.shift())
    }

    /// The concatenation `k s`.
    pub fn prepend(&self, k: i64) -> Self {
        let mut preperiod = Vec::with_capacity(self.preperiod.len() + 1);
        preperiod.push(k);
        preperiod.extend_from_slice(&self.preperiod);
        Self::new(preperiod, self.period.clone()).expect("period is nonempty")
    }

    pub fn max_abs_entry(&self) -> i64 {
        self.preperiod
            .iter()
            .chain(&self.period)
            .map(|s| s.abs())
            .max()
            .unwrap_or(0)
    }
}

/// A finite address `s1 ... s_{n-2} s_{n-1}` whose last entry is `k + 1/2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntermediateAddress {
    integers: Vec<i64>,
    half_floor: i64,
}

impl IntermediateAddress {
    /// `integers` are `s1 .. s_{n-2}`; the final entry is `half_floor + 1/2`.
    pub fn new(integers: Vec<i64>, half_floor: i64) -> Self {
        Self {
            integers,
            half_floor,
        }
    }

    pub fn integers(&self) -> &[i64] {
        &self.integers
    }

    pub fn half_floor(&self) -> i64 {
        self.half_floor
    }

    /// Number of entries, `n - 1`.
    pub fn len(&self) -> usize {
        self.integers.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The period `n` of the component whose tail this address labels.
    pub fn component_period(&self) -> usize {
        self.len() + 1
    }
}

/// How far two sequences must be compared before the verdict is final.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Eventually { preperiod: usize, period: usize },
}

/// Anything with entries in `Z/2`, exposed as doubled integers.
pub trait Itinerary {
    /// `2 s_i`, or `None` beyond the end of a finite sequence.
    fn doubled_entry(&self, i: usize) -> Option<i64>;
    fn horizon(&self) -> Horizon;
}

impl Itinerary for ExternalAddress {
    fn doubled_entry(&self, i: usize) -> Option<i64> {
        Some(2 * self.entry(i))
    }

    fn horizon(&self) -> Horizon {
        Horizon::Eventually {
            preperiod: self.preperiod.len(),
            period: self.period.len(),
        }
    }
}

impl Itinerary for IntermediateAddress {
    fn doubled_entry(&self, i: usize) -> Option<i64> {
        assert!(i >= 1, "address entries are indexed from 1");
        match i.cmp(&self.len()) {
            Ordering::Less => Some(2 * self.integers[i - 1]),
            Ordering::Equal => Some(2 * self.half_floor + 1),
            Ordering::Greater => None,
        }
    }

    fn horizon(&self) -> Horizon {
        Horizon::Finite(self.len())
    }
}

/// Exact lexicographic comparison.
///
/// Two eventually periodic sequences agree forever once they agree on
/// `pre_a + pre_b + lcm(per_a, per_b) + 1` entries. A half-integer entry lies
/// strictly between its integer neighbours, so comparison never runs past it.
pub fn lex_compare<A, B>(a: &A, b: &B) -> Ordering
where
    A: Itinerary + ?Sized,
    B: Itinerary + ?Sized,
{
    let bound = match (a.horizon(), b.horizon()) {
        (
            Horizon::Eventually {
                preperiod: pa,
                period: ma,
            },
            Horizon::Eventually {
                preperiod: pb,
                period: mb,
            },
        ) => pa + pb + lcm(ma, mb) + 1,
        (Horizon::Finite(la), Horizon::Finite(lb)) => la.min(lb),
        (Horizon::Finite(l), _) | (_, Horizon::Finite(l)) => l,
    };
    for i in 1..=bound {
        match (a.doubled_entry(i), b.doubled_entry(i)) {
            (Some(x), Some(y)) if x != y => return x.cmp(&y),
            (Some(_), Some(_)) => {}
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
        }
    }
    Ordering::Equal
}

impl PartialOrd for ExternalAddress {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExternalAddress {
    fn cmp(&self, other: &Self) -> Ordering {
        lex_compare(self, other)
    }
}

impl PartialOrd for IntermediateAddress {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IntermediateAddress {
    fn cmp(&self, other: &Self) -> Ordering {
        lex_compare(self, other)
    }
}

/// Either kind of address, as accepted on the command line.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Address {
    External(ExternalAddress),
    Intermediate(IntermediateAddress),
}

impl Itinerary for Address {
    fn doubled_entry(&self, i: usize) -> Option<i64> {
        match self {
            Address::External(s) => s.doubled_entry(i),
            Address::Intermediate(s) => s.doubled_entry(i),
        }
    }

    fn horizon(&self) -> Horizon {
        match self {
            Address::External(s) => s.horizon(),
            Address::Intermediate(s) => s.horizon(),
        }
    }
}

fn join(entries: &[i64]) -> String {
    entries
        .iter()
        .map(i64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for ExternalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{};{}]", join(&self.preperiod), join(&self.period))
    }
}

impl fmt::Display for IntermediateAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for s in &self.integers {
            write!(f, "{s},")?;
        }
        write!(f, "{}+1/2]", self.half_floor)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::External(s) => s.fmt(f),
            Address::Intermediate(s) => s.fmt(f),
        }
    }
}

fn strip_brackets(text: &str) -> Result<&str, SymbolicError> {
    let t = text.trim();
    t.strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| SymbolicError::Parse(format!("{text:?}: expected [...]")))
}

fn parse_list(text: &str, whole: &str) -> Result<Vec<i64>, SymbolicError> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    t.split(',')
        .map(|item| {
            item.trim()
                .parse::<i64>()
                .map_err(|_| SymbolicError::Parse(format!("{whole:?}: bad entry {:?}", item.trim())))
        })
        .collect()
}

/// Parses `k+1/2`, `k-1/2` or `m/2` with `m` odd into `floor`.
fn parse_half(item: &str, whole: &str) -> Result<i64, SymbolicError> {
    let bad = || SymbolicError::Parse(format!("{whole:?}: bad half-integer {item:?}"));
    let item = item.trim();
    if let Some(numerator) = item.strip_suffix("/2") {
        if let Some(k) = numerator.strip_suffix("+1") {
            if !k.is_empty() {
                return k.trim().parse::<i64>().map_err(|_| bad());
            }
        }
        if let Some(k) = numerator.strip_suffix("-1") {
            if !k.is_empty() {
                return k.trim().parse::<i64>().map(|k| k - 1).map_err(|_| bad());
            }
        }
        let m: i64 = numerator.trim().parse().map_err(|_| bad())?;
        if m % 2 == 0 {
            return Err(bad());
        }
        return Ok(m.div_euclid(2));
    }
    Err(bad())
}

impl FromStr for ExternalAddress {
    type Err = SymbolicError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let inner = strip_brackets(text)?;
        let (pre, per) = inner
            .split_once(';')
            .ok_or_else(|| SymbolicError::Parse(format!("{text:?}: expected [pre;period]")))?;
        ExternalAddress::new(parse_list(pre, text)?, parse_list(per, text)?)
    }
}

impl FromStr for IntermediateAddress {
    type Err = SymbolicError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let inner = strip_brackets(text)?;
        if inner.contains(';') {
            return Err(SymbolicError::Parse(format!(
                "{text:?}: intermediate addresses have no period block"
            )));
        }
        let items: Vec<&str> = inner.split(',').collect();
        let (last, rest) = items.split_last().expect("split yields at least one item");
        let integers = rest
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|_| SymbolicError::Parse(format!("{text:?}: bad entry {:?}", s.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(IntermediateAddress::new(integers, parse_half(last, text)?))
    }
}

impl FromStr for Address {
    type Err = SymbolicError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        if text.contains(';') {
            text.parse().map(Address::External)
        } else {
            text.parse().map(Address::Intermediate)
        }
    }
}
