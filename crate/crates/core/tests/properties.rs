mod common;

use addident::experiments::factor_unfactored;
use addident::lti::{
    additive_to_unfactored, pack_parameters, reflect_unstable_roots, sylvester_matrix, unpack_parameters, AdditiveModel,
    CtSubmodel, ModelStructure,
};
use addident::poly::Polynomial;
use addident::signals::{filter_bank, Dataset, SampledSignal};
use proptest::prelude::*;

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

/// Stable second-order denominator `1 + a1 p + a2 p^2` and a numerator of
/// degree at most two.
fn filter() -> impl Strategy<Value = (Polynomial, Polynomial)> {
    (0.3f64..5.0, 0.05f64..1.5, prop::collection::vec(-2.0f64..2.0, 1..=3)).prop_map(|(w, z, b)| {
        (Polynomial::new(vec![1.0, 2.0 * z / w, 1.0 / (w * w)]), Polynomial::new(b))
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filtering_is_linear((den, num) in filter(), x in signal(200), y in signal(200), alpha in -3.0f64..3.0) {
        let h = 0.05;
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
        let fx = &filter_bank(&x, h, &den, std::slice::from_ref(&num)).unwrap()[0];
        let fy = &filter_bank(&y, h, &den, std::slice::from_ref(&num)).unwrap()[0];
        let fm = &filter_bank(&mix, h, &den, std::slice::from_ref(&num)).unwrap()[0];
        let expected: Vec<f64> = fx.iter().zip(fy).map(|(a, b)| alpha * a + b).collect();
        prop_assert!(close(fm, &expected, 1e-10));
    }

    #[test]
    fn filtering_is_shift_invariant((den, num) in filter(), x in signal(150), d in 1usize..20) {
        let h = 0.05;
        let mut shifted = vec![0.0; d];
        shifted.extend_from_slice(&x);
        let f = &filter_bank(&x, h, &den, std::slice::from_ref(&num)).unwrap()[0];
        let fs = &filter_bank(&shifted, h, &den, std::slice::from_ref(&num)).unwrap()[0];
        prop_assert!(fs[..d].iter().all(|v| *v == 0.0));
        prop_assert!(close(&fs[d..], f, 1e-12));
    }

    #[test]
    fn pack_unpack_roundtrip(orders in prop::collection::vec((0usize..4, 0usize..3), 1..4), seed in any::<u64>()) {
        // only the first submodel may be biproper
        let orders: Vec<(usize, usize)> = orders
            .into_iter()
            .enumerate()
            .map(|(i, (n, m))| {
                let n = n.max(1);
                (n, if i == 0 { m.min(n) } else { m.min(n - 1) })
            })
            .collect();
        let s = ModelStructure::new(orders, 0, 0).unwrap();
        let mut g = common::rng(seed);
        let beta: Vec<f64> = (0..s.n_params()).map(|_| rand::Rng::random_range(&mut g, 0.1..2.0)).collect();
        let m = unpack_parameters(&beta, &s).unwrap();
        prop_assert_eq!(pack_parameters(&m).into_inner(), beta);
        prop_assert_eq!(m.structure(), s);
    }

    #[test]
    fn reflection_is_idempotent(a1 in -3.0f64..3.0, a2 in 0.01f64..2.0, b in 0.1f64..5.0) {
        let sub = CtSubmodel::from_theta(2, 0, &[a1, a2, b]).unwrap();
        let once = reflect_unstable_roots(&sub).unwrap();
        prop_assert!(once.is_stable());
        let twice = reflect_unstable_roots(&once).unwrap();
        prop_assert_eq!(once.theta(), twice.theta());
        if sub.is_stable() {
            prop_assert_eq!(once.theta(), sub.theta());
        }
    }

    #[test]
    fn sylvester_detects_common_roots(r in -5.0f64..-0.1, s in -5.0f64..-0.1, t in 0.2f64..5.0) {
        prop_assume!((r - s).abs() > 0.1 && (t + r).abs() > 0.1 && (t + s).abs() > 0.1);
        let a = Polynomial::from_roots(&[r.into(), s.into()], 1.0);
        let a = a.scale(1.0 / a.coeff(0));
        let shared = Polynomial::new(vec![-r, 1.0]);
        let other = Polynomial::new(vec![t, 1.0]);
        prop_assert!(sylvester_matrix(&-&shared, &a).determinant().abs() < 1e-9);
        prop_assert!(sylvester_matrix(&-&other, &a).determinant().abs() > 1e-6);
    }

    #[test]
    fn factoring_inverts_common_denominator(seed in any::<u64>()) {
        let m = common::random_additive(&mut common::rng(seed));
        let back = factor_unfactored(&additive_to_unfactored(&m), &m.structure(), Some(&m)).unwrap();
        prop_assert!(close(&pack_parameters(&back).0, &pack_parameters(&m).0, 1e-8));
    }

    #[test]
    fn csv_roundtrip(u in signal(30), y in signal(30)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = Dataset::new(SampledSignal::new(u, 0.01).unwrap(), SampledSignal::new(y, 0.01).unwrap(), None).unwrap();
        d.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        prop_assert!((back.h() - 0.01).abs() < 1e-15);
        for (a, b) in d.u.values().iter().chain(d.y.values()).zip(back.u.values().iter().chain(back.y.values())) {
            prop_assert!((a - b).abs() <= 1e-15 * a.abs());
        }
    }
}

#[test]
fn shared_denominator_roots_cannot_be_factored() {
    let sub = CtSubmodel::from_theta(2, 0, &[0.3, 0.1, 1.0]).unwrap();
    let m = AdditiveModel::new(vec![sub.clone(), sub], 0, 0).unwrap();
    assert!(factor_unfactored(&additive_to_unfactored(&m), &m.structure(), None).is_err());
}
