use std::cmp::Ordering;

use expmap_core::symbolic::{
    first_kneading_disagreement, kneading_sequence, lex_compare, reference, Address, ExternalAddress,
    IntermediateAddress, KneadingSymbol,
};
use proptest::prelude::*;

fn address() -> impl Strategy<Value = ExternalAddress> {
    (
        prop::collection::vec(-3i64..=3, 0..4),
        prop::collection::vec(-3i64..=3, 1..5),
    )
        .prop_map(|(pre, per)| ExternalAddress::new(pre, per).unwrap())
}

fn intermediate() -> impl Strategy<Value = IntermediateAddress> {
    (prop::collection::vec(-3i64..=3, 0..4), -3i64..=3)
        .prop_map(|(ints, k)| IntermediateAddress::new(ints, k))
}

/// Every address with entries in `alphabet`, preperiod up to `max_pre` and
/// period block up to `max_per`.
fn all_addresses(alphabet: &[i64], max_pre: usize, max_per: usize) -> Vec<ExternalAddress> {
    fn words(alphabet: &[i64], len: usize) -> Vec<Vec<i64>> {
        (0..len).fold(vec![Vec::new()], |acc, _| {
            acc.iter()
                .flat_map(|w| {
                    alphabet.iter().map(move |&a| {
                        let mut w = w.clone();
                        w.push(a);
                        w
                    })
                })
                .collect()
        })
    }
    let mut out = Vec::new();
    for p in 0..=max_pre {
        for m in 1..=max_per {
            for pre in words(alphabet, p) {
                for per in words(alphabet, m) {
                    out.push(ExternalAddress::new(pre.clone(), per).unwrap());
                }
            }
        }
    }
    out.sort_by(|a, b| a.to_string().cmp(&b.to_string()));
    out.dedup();
    out
}

#[test]
fn boundary_symbols_appear_exactly_for_periodic_addresses() {
    let all = all_addresses(&[-1, 0, 1], 2, 3);
    assert!(all.len() > 150, "{} addresses", all.len());
    for s in &all {
        let k = kneading_sequence(s);
        assert_eq!(k.contains_boundary(), s.is_periodic(), "address {s}, kneading {k}");
    }
}

#[test]
fn kneading_matches_reference_exhaustively() {
    for s in all_addresses(&[-1, 0, 1], 2, 3) {
        let k = kneading_sequence(&s);
        let len = 2 * (s.preperiod().len() + s.period().len()) + 3;
        let expected = reference::kneading_prefix(&s, len);
        let got: Vec<KneadingSymbol> = (1..=len).map(|i| k.entry(i)).collect();
        assert_eq!(got, expected, "address {s}");
    }
}

#[test]
fn order_is_total_on_a_finite_family() {
    let all = all_addresses(&[-1, 0, 1], 1, 2);
    for a in &all {
        for b in &all {
            assert_eq!(lex_compare(a, b), reference::lex_compare(a, b), "{a} vs {b}");
            assert_eq!(lex_compare(a, b) == Ordering::Equal, a == b);
        }
    }
}

proptest! {
    #[test]
    fn order_agrees_with_reference(a in address(), b in address()) {
        prop_assert_eq!(lex_compare(&a, &b), reference::lex_compare(&a, &b));
    }

    #[test]
    fn order_is_antisymmetric(a in address(), b in address()) {
        prop_assert_eq!(lex_compare(&a, &b), lex_compare(&b, &a).reverse());
        prop_assert_eq!(lex_compare(&a, &b) == Ordering::Equal, a == b);
    }

    #[test]
    fn order_is_transitive(a in address(), b in address(), c in address()) {
        let mut v = [a, b, c];
        v.sort();
        prop_assert!(v[0] <= v[1] && v[1] <= v[2] && v[0] <= v[2]);
    }

    #[test]
    fn order_is_total_with_intermediate_addresses(a in address(), h in intermediate(), g in intermediate()) {
        // a half-integer entry never ties with an integer one
        prop_assert_ne!(lex_compare(&a, &h), Ordering::Equal);
        prop_assert_eq!(lex_compare(&h, &g), lex_compare(&g, &h).reverse());
        prop_assert_eq!(lex_compare(&h, &g) == Ordering::Equal, h == g);
    }

    #[test]
    fn addresses_round_trip_through_text(a in address(), h in intermediate()) {
        let back: ExternalAddress = a.to_string().parse().unwrap();
        prop_assert_eq!(&back, &a);
        let back: Address = h.to_string().parse().unwrap();
        prop_assert_eq!(back, Address::Intermediate(h));
    }

    #[test]
    fn shift_and_prepend(a in address(), k in -5i64..=5, n in 0usize..12) {
        prop_assert_eq!(a.prepend(k).shift(), a.clone());
        let shifted = a.shift_by(n);
        for i in 1..=10 {
            prop_assert_eq!(shifted.entry(i), a.entry(i + n));
        }
    }

    #[test]
    fn kneading_matches_reference(a in address()) {
        let k = kneading_sequence(&a);
        let len = 2 * (a.preperiod().len() + a.period().len()) + 2;
        let expected = reference::kneading_prefix(&a, len);
        for (i, sym) in expected.iter().enumerate() {
            prop_assert_eq!(k.entry(i + 1), *sym, "entry {} of {}", i + 1, &a);
        }
    }

    #[test]
    fn kneading_entries_sit_next_to_address_entries(a in address()) {
        let k = kneading_sequence(&a);
        for i in 1..=12 {
            let si = a.entry(i);
            let ok = matches!(k.entry(i),
                KneadingSymbol::Plain(x) if x == si || x == si - 1)
                || k.entry(i) == KneadingSymbol::Boundary(si);
            prop_assert!(ok, "entry {} of K({}) is {}", i, &a, k.entry(i));
        }
    }

    #[test]
    fn kneading_is_eventually_periodic_like_the_address(a in address()) {
        let k = kneading_sequence(&a);
        let p = a.preperiod().len();
        let m = a.period().len();
        prop_assert!(k.preperiod().len() <= p);
        prop_assert_eq!(m % k.period().len(), 0);
        for i in p + 1..=p + 2 * m {
            prop_assert_eq!(k.entry(i), k.entry(i + m));
        }
    }

    #[test]
    fn boundary_iff_periodic(a in address()) {
        prop_assert_eq!(kneading_sequence(&a).contains_boundary(), a.is_periodic());
    }

    #[test]
    fn first_disagreement_matches_reference(a in address(), b in address()) {
        prop_assume!(a != b);
        let len = 2 * (a.preperiod().len() + b.preperiod().len() + a.period().len() * b.period().len()) + 2;
        let got = first_kneading_disagreement(&a, &b).unwrap().map(|d| d.index);
        prop_assert_eq!(got, reference::first_disagreement(&a, &b, len));
    }
}
