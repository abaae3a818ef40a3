use proptest::prelude::*;

use wlp_core::frac::binom_coeffs;
use wlp_core::ops::{box_average, steklov, weighted_steklov, BoxSpec};
use wlp_core::report::{read_jsonl, write_jsonl, InequalityReport, ReportParams, Verdict};
use wlp_core::{Grid, GridFunction, QuadratureRule, Weight, WeightedMeasure};

const N: usize = 64;

/// Samples on `[-4, 4]` with support in the middle 16 cells.
fn member() -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(-1.0f64..1.0, 16).prop_map(|core| {
        let g = Grid::centered(1, 4.0, N).unwrap();
        let mut s = vec![0.0; N];
        s[24..40].copy_from_slice(&core);
        GridFunction::new(g, s).unwrap()
    })
}

fn weight() -> impl Strategy<Value = Weight> {
    prop_oneof![
        Just(Weight::one()),
        (-0.9f64..2.0).prop_map(Weight::power),
        (0.1f64..3.0, 0.1f64..3.0).prop_map(|(a, b)| Weight::Step {
            breaks: vec![0.0],
            levels: vec![a, b],
        }),
    ]
}

fn measure(f: &GridFunction, w: &Weight) -> WeightedMeasure {
    WeightedMeasure::new(f.grid(), w, &QuadratureRule::midpoint()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn holder_pairing(f in member(), g in member(), w in weight(), p in 1.1f64..4.0) {
        let m = measure(&f, &w);
        let lhs = m.pairing(&f.abs(), &g.abs()).unwrap();
        let rhs = m.norm(&f, p).unwrap() * m.norm(&g, p / (p - 1.0)).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn norm_is_homogeneous_and_monotone(f in member(), w in weight(), p in 0.3f64..4.0, c in -3.0f64..3.0) {
        let m = measure(&f, &w);
        let nf = m.norm(&f, p).unwrap();
        let scaled = m.norm(&f.scale(c).unwrap(), p).unwrap();
        prop_assert!((scaled - c.abs() * nf).abs() <= 1e-12 * (1.0 + nf));
        let smaller = f.map(|v| 0.5 * v).unwrap();
        prop_assert!(m.norm(&smaller, p).unwrap() <= nf * (1.0 + 1e-12));
    }

    #[test]
    fn steklov_contracts_unweighted(f in member(), p in 1.0f64..4.0, t in 0usize..8) {
        let m = measure(&f, &Weight::one());
        let u = [t as f64 / 8.0];
        let s = steklov(&f, &u).unwrap();
        prop_assert!(m.norm(&s, p).unwrap() <= m.norm(&f, p).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn averages_commute(f in member(), w in weight(), v in -2i32..=2, t in 0usize..8) {
        let spec = BoxSpec::shifted(0.25, &[v as f64 / 8.0]).unwrap();
        let u = [t as f64 / 8.0];
        let a = weighted_steklov(&box_average(&f, &spec).unwrap(), &u, &w).unwrap();
        let b = box_average(&weighted_steklov(&f, &u, &w).unwrap(), &spec).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-12 * (1.0 + f.sup_abs()));
    }

    #[test]
    fn weighted_steklov_preserves_constants(w in weight(), c in 0.1f64..5.0) {
        let g = Grid::centered(1, 4.0, N).unwrap();
        let f = GridFunction::from_fn(g, |x| if x[0].abs() <= 2.0 { c } else { 0.0 }).unwrap();
        let s = weighted_steklov(&f, &[0.0], &w).unwrap();
        let mid = N / 2;
        prop_assert!((s.samples()[mid] - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn binomial_vandermonde(k1 in 0.05f64..3.0, k2 in 0.05f64..3.0, n in 1usize..12) {
        let a = binom_coeffs(k1, n).unwrap().coeffs;
        let b = binom_coeffs(k2, n).unwrap().coeffs;
        let c = binom_coeffs(k1 + k2, n).unwrap().coeffs;
        let conv: f64 = (0..=n).map(|s| a[s] * b[n - s]).sum();
        prop_assert!((conv - c[n]).abs() <= 1e-12 * (1.0 + c[n].abs()));
    }

    #[test]
    fn verdict_matches_rule(lhs in 0.0f64..10.0, rhs in 0.0f64..10.0, c in 0.0f64..4.0, budget in 0.0f64..1.0) {
        let r = InequalityReport::evaluate("suf", ReportParams::default(), lhs, rhs, c, budget);
        prop_assert_eq!(r.verdict == Verdict::Pass, lhs <= c * rhs + budget);
        let mut buf = Vec::new();
        write_jsonl(std::slice::from_ref(&r), &mut buf).unwrap();
        prop_assert_eq!(read_jsonl(&buf[..]).unwrap(), vec![r]);
    }
}
