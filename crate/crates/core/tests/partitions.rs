use proptest::prelude::*;
use spkmix::partitions::{enumerate_partitions, log_eppf, log_vnk, log_vnk_by_density, log_vnk_py};
use spkmix::{QuadratureConfig, StableIndex, TiltingFunction};

fn sig(s: f64) -> StableIndex {
    StableIndex::new(s).unwrap()
}

#[test]
fn quadrature_weights_match_py_closed_form_across_sigma() {
    let cfg = QuadratureConfig::default();
    for s in [0.01, 0.1, 0.534, 0.9, 0.99] {
        for theta in [-0.5 * s, 0.0, 3.0] {
            for n in 1..=10 {
                for k in 1..=n {
                    let a = log_vnk(n, k, sig(s), &TiltingFunction::Py { theta }, &cfg).unwrap();
                    let b = log_vnk_py(n, k, sig(s), theta).unwrap();
                    assert!((a - b).abs() < 1e-9, "s {s} theta {theta} n {n} k {k}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn one_dimensional_and_density_forms_agree() {
    let cfg = QuadratureConfig::default();
    for s in [0.3, 0.7] {
        for f in [TiltingFunction::Ngg { tau: 2.0 }, TiltingFunction::Gt { theta: 1.0, eta: 1.0 }] {
            for (n, k) in [(1, 1), (4, 2), (6, 6)] {
                let a = log_vnk(n, k, sig(s), &f, &cfg).unwrap();
                let b = log_vnk_by_density(n, k, sig(s), &f, &cfg).unwrap();
                assert!((a - b).abs() < 1e-5, "{f} s {s} n {n} k {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn eppf_sums_to_one_for_extreme_sigma() {
    let cfg = QuadratureConfig::default();
    for s in [0.05, 0.95] {
        for f in [TiltingFunction::Ngg { tau: 1.0 }, TiltingFunction::Gt { theta: 1.0, eta: 1.0 }] {
            let total: f64 =
                enumerate_partitions(5).unwrap().iter().map(|p| log_eppf(p, sig(s), &f, &cfg).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-6, "{f} s {s}: {total}");
        }
    }
}

fn tilt_strategy() -> impl Strategy<Value = (f64, TiltingFunction)> {
    (0.02f64..0.98).prop_flat_map(|s| {
        prop_oneof![
            (0.05f64..10.0).prop_map(|tau| TiltingFunction::Ngg { tau }),
            (0.0f64..4.0, 0.05f64..5.0).prop_map(|(theta, eta)| TiltingFunction::Gt { theta, eta }),
            (0.0f64..0.99, 0.05f64..5.0).prop_map(move |(u, eta)| TiltingFunction::Gt { theta: -u * s, eta }),
        ]
        .prop_map(move |f| (s, f))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Gibbs-type consistency: V(n,K) = (n - sigma K) V(n+1,K) + V(n+1,K+1).
    #[test]
    fn weights_satisfy_the_gibbs_recursion((s, f) in tilt_strategy(), n in 1usize..9, kf in 0.0f64..1.0) {
        let cfg = QuadratureConfig::default();
        let k = 1 + ((n - 1) as f64 * kf) as usize;
        let v = |n, k| log_vnk(n, k, sig(s), &f, &cfg).unwrap();
        let lhs = v(n, k);
        let rhs = ((n as f64 - s * k as f64).ln() + v(n + 1, k)).max(v(n + 1, k + 1))
            + (-((n as f64 - s * k as f64).ln() + v(n + 1, k) - v(n + 1, k + 1)).abs()).exp().ln_1p();
        prop_assert!((lhs - rhs).abs() < 1e-7, "{} s {} n {} k {}: {} vs {}", f, s, n, k, lhs, rhs);
    }
}
