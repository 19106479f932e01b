use proptest::prelude::*;
use rcldpc::formats::{self, ResultRow, SimPlan};
use rcldpc::rcldpc_core::decoder::{CheckRule, DecodeConfig};
use rcldpc::rcldpc_core::exit::ExitSurface;
use rcldpc::rcldpc_core::lifting::LiftOrder;
use rcldpc::rcldpc_core::sim::StopRule;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ebno_ranges_are_inclusive(lo in -50i32..50, steps in 0usize..40, step_centi in 1u32..200) {
        let step = step_centi as f64 / 100.0;
        let start = lo as f64 / 4.0;
        let stop = start + steps as f64 * step;
        let v = formats::parse_ebno_list(&format!("{start}:{stop}:{step}")).unwrap();
        prop_assert_eq!(v.len(), steps + 1);
        prop_assert!((v[0] - start).abs() < 1e-9);
        prop_assert!((v[steps] - stop).abs() < 1e-9);
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ebno_lists_parse_back(v in prop::collection::vec(-20.0f64..20.0, 1..10)) {
        let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        prop_assert_eq!(formats::parse_ebno_list(&text).unwrap(), v);
    }

    /// Surface CSVs are bit-exact.
    #[test]
    fn surface_csv_round_trips(
        values in prop::collection::vec(0.0f64..1.0, 6),
        e0 in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let mut values = values;
        values.sort_by(f64::total_cmp);
        let grid = |i: usize, j: usize| values[(i * 2 + j).min(5)];
        let ordered: Vec<f64> = (0..3).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| grid(i, j)).collect();
        let s = ExitSurface::new("epr4", 0.5, vec![e0, e0 + 0.1, e0 + 0.3], vec![0.0, 1.0], ordered, 1000, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        formats::write_surface(&p, &s, 500).unwrap();
        let (t, meta) = formats::read_surface(&p).unwrap();
        prop_assert_eq!(t.values(), s.values());
        prop_assert_eq!(t.ebno_grid(), s.ebno_grid());
        prop_assert_eq!(t.ia_grid(), s.ia_grid());
        prop_assert_eq!(meta.block, 500);
        prop_assert_eq!(meta.seed, seed);
    }

    #[test]
    fn results_csv_round_trips(rows in prop::collection::vec(
        (finite(), any::<u64>(), any::<u64>(), any::<u64>(), finite(), finite(), finite()),
        0..8,
    )) {
        let rows: Vec<ResultRow> = rows
            .into_iter()
            .map(|(ebno_db, frames, bit_errors, frame_errors, ber, fer, seconds)| ResultRow {
                ebno_db, frames, bit_errors, frame_errors, ber, fer, seconds,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        formats::write_results(&p, &rows).unwrap();
        prop_assert_eq!(formats::read_results(&p).unwrap(), rows);
    }

    #[test]
    fn plan_json_round_trips(
        ebno_db in prop::collection::vec(-5.0f64..10.0, 1..6),
        n2 in 1usize..2000,
        seed in any::<u64>(),
        prefix in any::<bool>(),
        min_sum in any::<bool>(),
        floor in prop::option::of(1e-6f64..1.0),
    ) {
        let plan = SimPlan {
            code: "rc-27/41".into(),
            parent: prefix.then(|| "rc-27/41".into()),
            channel: "epr4".into(),
            ebno_db,
            n1: 4,
            n2,
            lift_seed: seed ^ 1,
            lift_order: if prefix { LiftOrder::Prefix } else { LiftOrder::Degree },
            stop: StopRule::DESK,
            seed,
            receiver: DecodeConfig {
                check_rule: if min_sum { CheckRule::MinSum } else { CheckRule::SumProduct },
                ..DecodeConfig::default()
            },
            fer_floor: floor,
        };
        prop_assert!(plan.validate().is_ok());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("plan.json");
        formats::write_json(&p, &plan).unwrap();
        let back: SimPlan = formats::read_json(&p).unwrap();
        prop_assert_eq!(back, plan);
    }
}
