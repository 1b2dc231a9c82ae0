mod common;

use std::collections::HashSet;

use exitlens::consensus::{extract_or_ipset, parse_roster, ClassBandwidths, NodeClass};
use exitlens::weights::{compute_class_weights, compute_weights, WeightCase, WeightError};
use proptest::prelude::*;

use common::{oracle_case, positions, rel_close, state_with_fleet};

fn classes() -> impl Strategy<Value = ClassBandwidths> {
    let bw = prop_oneof![
        1 => Just(0.0),
        2 => 0.001f64..0.1,
        12 => 0.1f64..1000.0,
    ];
    (bw.clone(), bw.clone(), bw.clone(), bw).prop_map(|(e, x, d, n)| ClassBandwidths::new(e, x, d, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4000))]

    #[test]
    fn sums_range_and_case(b in classes()) {
        match compute_class_weights(&b) {
            Ok((w, eval)) => {
                prop_assert!((w.wed + w.wnd + w.wxd - 1.0).abs() <= 1e-12);
                prop_assert!((w.wee + w.wne - 1.0).abs() <= 1e-12);
                prop_assert!((w.wxx + w.wnx - 1.0).abs() <= 1e-12);
                for (name, v) in w.named() {
                    prop_assert!((0.0..=1.0).contains(&v), "{name}={v}");
                }
                prop_assert_eq!(w.case, oracle_case(&b));
                prop_assert!(eval.scarcer <= eval.less_scarce);
                let (e, m, x) = positions(&w, &b);
                match w.case {
                    WeightCase::Case1 | WeightCase::Case2b1 | WeightCase::Case2b2 => {
                        prop_assert!(rel_close(e, m, 1e-9) && rel_close(m, x, 1e-9), "{e} {m} {x}");
                    }
                    WeightCase::Case2b3 => prop_assert!(rel_close(x, b.total / 3.0, 1e-9)),
                    WeightCase::Case3a2 => prop_assert!(w.wxx == 1.0 && w.wxd == 1.0),
                    WeightCase::Case3b2 => prop_assert!(w.wxx == 1.0 && w.wnx == 0.0),
                    _ => {}
                }
            }
            Err(WeightError::EmptyNetwork) => prop_assert_eq!(b.total, 0.0),
            Err(WeightError::DegenerateClass { class, .. }) => {
                prop_assert_eq!(b.of(class), 0.0);
            }
            Err(WeightError::Unbalanceable { case, .. }) => {
                prop_assert_eq!(case, WeightCase::Case2b3);
                prop_assert_eq!(oracle_case(&b), WeightCase::Case2b3);
            }
        }
    }

    #[test]
    fn deterministic_and_roster_independent(b in classes()) {
        prop_assume!(b.total > 0.0);
        let from_roster = compute_weights(&state_with_fleet(&b, &[]));
        let first = compute_class_weights(&b);
        let second = compute_class_weights(&b);
        prop_assert_eq!(format!("{first:?}"), format!("{second:?}"));
        prop_assert_eq!(format!("{from_roster:?}"), format!("{first:?}"));
    }
}

proptest! {
    #[test]
    fn roster_round_trip_and_or_set(
        nodes in proptest::collection::vec((0u32..64, 1u16..65535, 0.001f64..50.0, any::<bool>(), any::<bool>()), 0..40)
    ) {
        let mut text = String::from("# generated\n");
        for (i, (host, port, bw, g, x)) in nodes.iter().enumerate() {
            let flags = match (g, x) {
                (true, true) => "guard,exit",
                (true, false) => "guard",
                (false, true) => "exit",
                (false, false) => "none",
            };
            text.push_str(&format!("n{i} 10.1.0.{host} {port} {bw} {flags}\n"));
        }
        let state = parse_roster(&text).unwrap();
        prop_assert_eq!(state.node_count(), nodes.len());
        let again = parse_roster(&state.to_roster()).unwrap();
        prop_assert_eq!(again.nodes(), state.nodes());

        let expected: HashSet<_> = nodes.iter().map(|(h, ..)| format!("10.1.0.{h}")).collect();
        let set = extract_or_ipset(&state);
        prop_assert_eq!(set.len(), expected.len());
        prop_assert_eq!(state.distinct_address_count(), expected.len());
        for a in set.iter() {
            prop_assert!(expected.contains(&a.to_string()));
        }

        let mut sums = [0.0f64; 4];
        for (_, _, bw, g, x) in &nodes {
            let idx = match NodeClass::from_flags(*g, *x) {
                NodeClass::PureEntry => 0,
                NodeClass::PureExit => 1,
                NodeClass::EntryExit => 2,
                NodeClass::Neither => 3,
            };
            sums[idx] += bw;
        }
        let b = state.bandwidths();
        for (got, want) in [b.pure_entry, b.pure_exit, b.entry_exit, b.neither].iter().zip(sums) {
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
        }
        prop_assert!((b.total - sums.iter().sum::<f64>()).abs() <= 1e-9 * b.total.max(1.0));
    }
}

#[test]
fn symmetric_network_is_case1_with_unit_weights() {
    let b = ClassBandwidths::new(100.0, 100.0, 0.0, 100.0).unwrap();
    let (w, _) = compute_class_weights(&b).unwrap();
    assert_eq!(w.case, WeightCase::Case1);
    assert_eq!((w.wxx, w.wnx, w.wne, w.wee), (1.0, 0.0, 0.0, 1.0));
    assert_eq!((w.wed, w.wnd, w.wxd), (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0));
}

#[test]
fn case2a_puts_entry_exit_on_the_scarcer_side() {
    // B = 100, third 33.3: e=30, x=5, d=10 -> r+d = 15 < s = 30
    let b = ClassBandwidths::new(30.0, 5.0, 10.0, 55.0).unwrap();
    let (w, _) = compute_class_weights(&b).unwrap();
    assert_eq!(w.case, WeightCase::Case2a);
    assert_eq!((w.wxx, w.wee, w.wxd, w.wed), (1.0, 1.0, 1.0, 0.0));
}
