mod common;

use common::{column, log_evidence, DATA5};
use proptest::prelude::*;
use spkmix::diagnostics::{agglomerate, coclustering, coclustering_from_trace, density_grid, ess, HeldOutSetup};
use spkmix::sampler::{run_chain, SamplerConfig};
use spkmix::{LikelihoodModel, StableIndex, TiltingFunction};

const MODEL: LikelihoodModel = LikelihoodModel::UnivConjI { mu0: 0.0, tau0: 0.01, tau_common: 1.0 };

fn setup_cfg(seed: u64, iterations: usize) -> SamplerConfig {
    SamplerConfig { iterations, burn_in: 1_000, seed, ..Default::default() }
}

#[test]
fn leave_one_out_matches_enumeration() {
    let xs = [-1.0, 0.2, 1.5];
    let tilt = TiltingFunction::Ngg { tau: 1.0 };
    let data = column(&xs);
    let cfg = setup_cfg(21, 61_000);
    let setup = HeldOutSetup { data: &data, model: &MODEL, tilt, sigma: StableIndex::new(0.5).unwrap(), cfg: &cfg };
    let report = setup.loo().unwrap();
    let full = log_evidence(&xs, 0.5, &tilt, 0.0, 0.01, 1.0);
    for i in 0..3 {
        let rest: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect();
        let exact = (full - log_evidence(&rest, 0.5, &tilt, 0.0, 0.01, 1.0)).exp();
        let got = report.per_point[i];
        assert!((got - exact).abs() < 0.02 * exact, "point {i}: {got} vs {exact}");
    }
}

#[test]
fn kfold_with_n_folds_is_leave_one_out() {
    let data = column(&DATA5);
    let cfg = setup_cfg(8, 2_000);
    let setup = HeldOutSetup {
        data: &data,
        model: &MODEL,
        tilt: TiltingFunction::Py { theta: 0.5 },
        sigma: StableIndex::new(0.3).unwrap(),
        cfg: &cfg,
    };
    let loo = setup.loo().unwrap();
    let kf = setup.kfold(5, 99).unwrap();
    assert_eq!(loo.per_point, kf.per_point);
    assert!(setup.kfold(1, 0).is_err() && setup.kfold(6, 0).is_err());
}

#[test]
fn posterior_predictive_integrates_to_one() {
    let cfg = setup_cfg(3, 3_000);
    let trace =
        run_chain(&column(&DATA5), &MODEL, TiltingFunction::Ngg { tau: 1.0 }, StableIndex::new(0.5).unwrap(), &cfg)
            .unwrap();
    let h = 0.02;
    let grid: Vec<f64> = (0..=6_000).map(|i| -60.0 + h * i as f64).collect();
    let dens = density_grid(&trace, &MODEL, &TiltingFunction::Ngg { tau: 1.0 }, &grid, &cfg.quadrature).unwrap();
    let area = h * (dens.iter().sum::<f64>() - 0.5 * (dens[0] + dens[dens.len() - 1]));
    assert!((area - 1.0).abs() < 1e-3, "area {area}");
}

#[test]
fn chain_coclustering_is_a_valid_similarity() {
    let cfg = setup_cfg(12, 4_000);
    let trace =
        run_chain(&column(&DATA5), &MODEL, TiltingFunction::Py { theta: 0.5 }, StableIndex::new(0.5).unwrap(), &cfg)
            .unwrap();
    let m = coclustering_from_trace(&trace).unwrap();
    m.check_invariants().unwrap();
    // The two tight pairs cluster together more often than points across the gap.
    assert!(m.get(0, 1) > m.get(0, 4) && m.get(3, 4) > m.get(1, 3));
    let d = agglomerate(&m, 3).unwrap();
    assert_eq!(d.merges.len(), 4);
    assert_eq!(d.labels[0], d.labels[1]);
    assert_eq!(d.labels[3], d.labels[4]);
    assert_ne!(d.labels[0], d.labels[3]);
}

fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + (1.0 - phi * phi).sqrt() * e;
            x
        })
        .collect()
}

#[test]
fn ess_tracks_the_integrated_autocorrelation() {
    let n = 20_000;
    // tau = (1 + phi) / (1 - phi) for AR(1).
    for (phi, tau) in [(0.0, 1.0), (0.5, 3.0), (0.9, 19.0)] {
        let e = ess(&ar1(n, phi, 5)).unwrap();
        let target = n as f64 / tau;
        assert!((e - target).abs() < 0.2 * target, "phi {phi}: {e} vs {target}");
    }
    assert!(ess(&[1.0; 50]).is_err());
}

proptest! {
    #[test]
    fn coclustering_invariants_hold(records in prop::collection::vec(prop::collection::vec(0usize..4, 6), 1..30)) {
        let m = coclustering(&records).unwrap();
        prop_assert!(m.check_invariants().is_ok());
        for r in &records {
            // Any single record gives a 0/1 matrix; the average stays in [0, 1].
            for i in 0..6 {
                for j in 0..6 {
                    let v = m.get(i, j);
                    prop_assert!((0.0..=1.0).contains(&v));
                    if r[i] == r[j] && records.len() == 1 {
                        prop_assert_eq!(v, 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn dendrogram_cut_gives_k_clusters(records in prop::collection::vec(prop::collection::vec(0usize..3, 7), 1..20), k in 1usize..=7) {
        let m = coclustering(&records).unwrap();
        let d = agglomerate(&m, k).unwrap();
        prop_assert_eq!(d.merges.len(), 6);
        let mut labels = d.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        prop_assert_eq!(labels.len(), k);
        prop_assert!(d.merges.windows(2).all(|w| w[0].height <= w[1].height + 1e-12));
        prop_assert_eq!(d.merges.last().unwrap().size, 7);
    }
}
