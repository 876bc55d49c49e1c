mod common;

use proptest::prelude::*;
use sparrow_core::instances::{
    cesaret_grid, generate, parse_canonical, pearson, properties, read_instance, to_canonical_string, write_instance,
    GenSpec,
};
use sparrow_core::model::earliest_start_schedule;
use sparrow_core::Error;

fn any_spec() -> impl Strategy<Value = GenSpec> {
    let level = prop::sample::select(vec![0.1, 0.3, 0.5, 0.7, 0.9]);
    (1usize..60, level.clone(), level, any::<u64>(), 0usize..4, 0.0f64..=1.0, 1.0f64..2.0).prop_map(
        |(n, tau, r, seed, family, q, c)| match family {
            0 => GenSpec::cesaret(n, tau, r, seed),
            1 => GenSpec::satellite(n, seed),
            2 => GenSpec::commerce(n, q, seed),
            _ => GenSpec::repairman(n, c, seed),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn windows_admit_every_singleton(spec in any_spec()) {
        let inst = generate(&spec).unwrap();
        prop_assert_eq!(inst.n(), spec.order_count());
        for o in &inst.orders {
            prop_assert!(o.release <= o.due && o.due < o.deadline);
            prop_assert!(o.release + o.processing <= o.deadline);
            prop_assert!((1.0..=20.0).contains(&o.processing));
            prop_assert!((o.weight - o.revenue / (o.deadline - o.due)).abs() < 1e-12);
            prop_assert!(earliest_start_schedule(&inst, &[o.id]).is_ok());
        }
        prop_assert!(earliest_start_schedule(&inst, &[]).is_ok());
    }

    #[test]
    fn canonical_files_round_trip(spec in any_spec()) {
        let inst = generate(&spec).unwrap();
        let text = to_canonical_string(&inst);
        let back = parse_canonical(&text, &inst.label).unwrap();
        prop_assert_eq!(to_canonical_string(&back), text);
        for (a, b) in inst.orders.iter().zip(&back.orders) {
            prop_assert_eq!((a.release, a.processing, a.due, a.deadline), (b.release, b.processing, b.due, b.deadline));
            prop_assert!((a.weight - b.weight).abs() < 1e-12);
            prop_assert!((a.revenue - b.revenue).abs() < 1e-12);
        }
    }

    #[test]
    fn property_ranges_hold(spec in any_spec()) {
        prop_assume!(spec.order_count() >= 2);
        let p = properties(&generate(&spec).unwrap()).unwrap();
        for x in [p.congestion_ratio, p.mean_conflict_ratio, p.setup_window_ratio, p.process_window_ratio] {
            prop_assert!(x >= 0.0 && x.is_finite());
        }
        let rho = p.processing_revenue_correlation;
        prop_assert!(rho.is_nan() || (-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
    }
}

#[test]
fn thousand_mid_instances_satisfy_window_order() {
    for seed in 0..1000 {
        let inst = generate(&GenSpec::cesaret(25, 0.5, 0.5, seed)).unwrap();
        assert!(inst
            .orders
            .iter()
            .all(|o| o.release <= o.due && o.due <= o.deadline && o.release + o.processing <= o.deadline));
    }
}

#[test]
fn same_spec_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [GenSpec::cesaret(40, 0.3, 0.7, 5), GenSpec::commerce(30, 0.4, 5), GenSpec::repairman(20, 1.5, 5)] {
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        write_instance(&generate(&spec).unwrap(), &a).unwrap();
        write_instance(&generate(&spec).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let back = read_instance(&a).unwrap();
        assert_eq!(to_canonical_string(&back), std::fs::read_to_string(&a).unwrap());
    }
    let a = to_canonical_string(&generate(&GenSpec::cesaret(40, 0.3, 0.7, 5)).unwrap());
    let b = to_canonical_string(&generate(&GenSpec::cesaret(40, 0.3, 0.7, 6)).unwrap());
    assert_ne!(a, b);
}

#[test]
fn repairman_scales_order_count() {
    assert_eq!(generate(&GenSpec::repairman(20, 1.5, 1)).unwrap().n(), 30);
    assert_eq!(generate(&GenSpec::repairman(25, 1.3, 1)).unwrap().n(), 33);
    assert!(generate(&GenSpec::repairman(10, 0.5, 1)).is_err());
}

#[test]
fn satellite_ignores_tau_and_range() {
    let mut spec = GenSpec::satellite(100, 3);
    let base = generate(&spec).unwrap();
    spec.tau = 0.9;
    spec.due_range = 0.9;
    let other = generate(&spec).unwrap();
    assert_eq!(base.orders, other.orders);
}

#[test]
fn commerce_correlation_grows_with_q() {
    let mean_corr = |q: f64| {
        (0..10)
            .map(|k| properties(&generate(&GenSpec::commerce(100, q, k)).unwrap()).unwrap().processing_revenue_correlation)
            .sum::<f64>()
            / 10.0
    };
    let grid: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().map(mean_corr).collect();
    assert!(grid.windows(2).all(|w| w[1] > w[0]), "{grid:?}");
    assert!(grid[0].abs() < 0.15);
    assert!((grid[4] - 1.0).abs() < 1e-9);
    let inst = generate(&GenSpec::commerce(50, 1.0, 2)).unwrap();
    assert!(inst.orders.iter().all(|o| o.revenue == 2.0 * o.processing));
}

#[test]
fn grid_has_count_specs_per_cell() {
    let specs = cesaret_grid(25, &[0.1, 0.5], &[0.1, 0.5, 0.9], 4, 0);
    assert_eq!(specs.len(), 24);
    let mut seeds: Vec<u64> = specs.iter().map(|s| s.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 24);
}

#[test]
fn property_examples() {
    let inst = parse_canonical(
        "2 0\n0 0\n2 2\n6 6\n10 10\n5 5\n1.25 1.25\n0 1 1\n0 0 1\n0 1 0\n",
        "same",
    )
    .unwrap();
    let p = properties(&inst).unwrap();
    assert!((p.mean_conflict_ratio - 1.0).abs() < 1e-12);
    let inst = parse_canonical("2 0\n0 20\n2 2\n6 26\n10 30\n5 5\n1.25 1.25\n0 1 1\n0 0 1\n0 1 0\n", "apart").unwrap();
    assert_eq!(properties(&inst).unwrap().mean_conflict_ratio, 0.0);
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
}

#[test]
fn malformed_files_report_lines() {
    let good = to_canonical_string(&generate(&GenSpec::cesaret(3, 0.5, 0.5, 1)).unwrap());
    let truncated: String = good.lines().take(9).map(|l| format!("{l}\n")).collect();
    match parse_canonical(&truncated, "t") {
        Err(Error::Parse { message, .. }) => assert!(message.contains("expected 4 rows"), "{message}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_canonical("0 0\n", "e"), Err(Error::Parse { line: 1, .. })));
    let bad = good.replacen("\n", "\nx\n", 1);
    assert!(matches!(parse_canonical(&bad, "b"), Err(Error::Parse { line: 2, .. })));
}
