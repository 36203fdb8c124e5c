//! Brute-force reference implementations, used to cross-check the exact
//! algorithms. Sequences are materialized to a finite length long enough
//! that truncation cannot change any comparison.

use std::cmp::Ordering;

use super::{ExternalAddress, KneadingSymbol};

/// A truncation length at which two eventually periodic addresses with
/// these shapes are guaranteed to be distinguished (if distinct).
fn safe_length(a: &ExternalAddress, b: &ExternalAddress) -> usize {
    2 * (a.preperiod().len() + b.preperiod().len() + 1) + 2 * a.period().len() * b.period().len() + 2
}

fn materialize(pre: &[i64], s: &ExternalAddress, len: usize) -> Vec<i64> {
    pre.iter()
        .copied()
        .chain((1..).map(|i| s.entry(i)))
        .take(len)
        .collect()
}

/// Lexicographic comparison of long truncations.
pub fn lex_compare(a: &ExternalAddress, b: &ExternalAddress) -> Ordering {
    let len = safe_length(a, b);
    materialize(&[], a, len).cmp(&materialize(&[], b, len))
}

/// `K(s)_i` for `i = 1..=len`, by locating `sigma^{i-1}(s)` among the
/// sequences `k s` for every `k` in range.
pub fn kneading_prefix(s: &ExternalAddress, len: usize) -> Vec<KneadingSymbol> {
    let lo = s.preperiod().iter().chain(s.period()).min().copied().unwrap_or(0) - 2;
    let hi = s.preperiod().iter().chain(s.period()).max().copied().unwrap_or(0) + 2;
    let n = 4 * safe_length(s, s);
    (1..=len)
        .map(|i| {
            let tail: Vec<i64> = (i..i + n).map(|j| s.entry(j)).collect();
            let mut found = None;
            for k in lo..=hi {
                let below = materialize(&[k], s, n);
                let above = materialize(&[k + 1], s, n);
                if tail == below {
                    found = Some(KneadingSymbol::Boundary(k));
                    break;
                }
                if below < tail && tail < above {
                    found = Some(KneadingSymbol::Plain(k));
                    break;
                }
            }
            found.expect("the shifted sequence lies in some interval of the partition")
        })
        .collect()
}

/// First index where the kneading prefixes differ.
pub fn first_disagreement(a: &ExternalAddress, b: &ExternalAddress, len: usize) -> Option<usize> {
    let ka = kneading_prefix(a, len);
    let kb = kneading_prefix(b, len);
    ka.iter().zip(&kb).position(|(x, y)| x != y).map(|i| i + 1)
}
