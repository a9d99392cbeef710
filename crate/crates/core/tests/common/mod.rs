#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use spkmix::partitions::{enumerate_partitions, log_eppf};
use spkmix::quadrature::log_sum_exp;
use spkmix::sampler::ChainTrace;
use spkmix::{Partition, QuadratureConfig, StableIndex, TiltingFunction};

pub const DATA5: [f64; 5] = [-2.0, -1.9, 0.0, 1.9, 2.0];

pub fn column(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

/// Log marginal likelihood of `xs` under x_i = mu + e_i, mu ~ N(mu0, 1/tau0),
/// e_i ~ N(0, 1/tau_c): a Gaussian vector with covariance I/tau_c + 11'/tau0.
pub fn normal_normal_evidence(xs: &[f64], mu0: f64, tau0: f64, tau_c: f64) -> f64 {
    let n = xs.len();
    let cov = DMatrix::from_fn(n, n, |i, j| 1.0 / tau0 + if i == j { 1.0 / tau_c } else { 0.0 });
    let chol = cov.cholesky().unwrap();
    let d = nalgebra::DVector::from_iterator(n, xs.iter().map(|x| x - mu0));
    let z = chol.l().solve_lower_triangular(&d).unwrap();
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

/// Log marginal density of `xs` under the mixture: the EPPF-weighted sum of
/// per-block evidences over every partition.
pub fn log_evidence(xs: &[f64], sigma: f64, tilt: &TiltingFunction, mu0: f64, tau0: f64, tau_c: f64) -> f64 {
    let s = StableIndex::new(sigma).unwrap();
    let cfg = QuadratureConfig::default();
    let logs: Vec<f64> = enumerate_partitions(xs.len())
        .unwrap()
        .iter()
        .map(|p| {
            let ev: f64 = p
                .blocks()
                .iter()
                .map(|b| normal_normal_evidence(&b.iter().map(|&i| xs[i]).collect::<Vec<_>>(), mu0, tau0, tau_c))
                .sum();
            log_eppf(p, s, tilt, &cfg).unwrap() + ev
        })
        .collect();
    log_sum_exp(&logs)
}

/// Exact posterior over partitions of the data: EPPF times the product of
/// per-block evidences, normalised.
pub fn exact_posterior(
    xs: &[f64],
    sigma: f64,
    tilt: &TiltingFunction,
    mu0: f64,
    tau0: f64,
    tau_c: f64,
) -> Vec<(Partition, f64)> {
    let s = StableIndex::new(sigma).unwrap();
    let cfg = QuadratureConfig::default();
    let parts = enumerate_partitions(xs.len()).unwrap();
    let logs: Vec<f64> = parts
        .iter()
        .map(|p| {
            let ev: f64 = p
                .blocks()
                .iter()
                .map(|b| {
                    let v: Vec<f64> = b.iter().map(|&i| xs[i]).collect();
                    normal_normal_evidence(&v, mu0, tau0, tau_c)
                })
                .sum();
            log_eppf(p, s, tilt, &cfg).unwrap() + ev
        })
        .collect();
    let z = log_sum_exp(&logs);
    parts.into_iter().zip(logs).map(|(p, l)| (p, (l - z).exp())).collect()
}

pub fn empirical(traces: &[&ChainTrace]) -> HashMap<Partition, f64> {
    let mut counts: HashMap<Partition, f64> = HashMap::new();
    let total: usize = traces.iter().map(|t| t.records.len()).sum();
    for t in traces {
        for r in &t.records {
            *counts.entry(r.partition()).or_default() += 1.0 / total as f64;
        }
    }
    counts
}

pub fn total_variation(exact: &[(Partition, f64)], emp: &HashMap<Partition, f64>) -> f64 {
    let mut tv = 0.0;
    let mut seen = 0.0;
    for (p, q) in exact {
        let e = emp.get(p).copied().unwrap_or(0.0);
        seen += e;
        tv += (q - e).abs();
    }
    0.5 * (tv + (1.0 - seen).max(0.0))
}
