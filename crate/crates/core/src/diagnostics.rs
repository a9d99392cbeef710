// Post-chain summaries: effective sample size, co-clustering, average-linkage
// dendrograms and posterior predictive densities.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{domain, Error, Result};
use crate::likelihoods::LikelihoodModel;
use crate::partitions::urn_log_weights;
use crate::quadrature::{log_sum_exp, QuadratureConfig};
use crate::sampler::{chain_rng, ChainRecord, ChainTrace, Sampler, SamplerConfig};
use crate::stable::StableIndex;
use crate::tilting::TiltingFunction;

/// Effective sample size `N / (1 + 2 sum rho_k)`, truncating the
/// autocorrelation sum with Geyer's initial monotone positive sequence.
pub fn ess(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 10 {
        return domain(format!("ESS needs at least 10 values, got {n}"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return domain("ESS needs finite values");
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let c0 = autocov(0);
    if !(c0 > 0.0) || c0 <= 1e-300 {
        return domain("ESS is undefined for a constant sequence");
    }
    // Gamma_m = rho_{2m} + rho_{2m+1}, kept while positive and forced monotone.
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum_pairs += pair;
        prev = pair;
        m += 1;
    }
    // sum_pairs = 1 + 2 sum_{k>=1} rho_k + rho_{last odd}, the usual form.
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    Ok(n as f64 / tau)
}

/// Symmetric matrix of posterior co-clustering probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoClusterMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CoClusterMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return domain("co-clustering matrix must be square and nonempty");
        }
        let m = CoClusterMatrix { n, values: rows.concat() };
        m.check_invariants()?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Symmetric, unit diagonal, entries in [0, 1].
    pub fn check_invariants(&self) -> Result<()> {
        for i in 0..self.n {
            if self.get(i, i) != 1.0 {
                return Err(Error::Numerical(format!("diagonal entry {i} is {}", self.get(i, i))));
            }
            for j in 0..self.n {
                let v = self.get(i, j);
                if !(0.0..=1.0).contains(&v) || v != self.get(j, i) {
                    return Err(Error::Numerical(format!("entry ({i}, {j}) = {v} breaks the invariants")));
                }
            }
        }
        Ok(())
    }
}

/// Fraction of records in which each pair of observations shares a label.
pub fn coclustering<L: AsRef<[usize]>>(records: &[L]) -> Result<CoClusterMatrix> {
    let Some(first) = records.first() else {
        return domain("co-clustering needs at least one record");
    };
    let n = first.as_ref().len();
    if n == 0 {
        return domain("records are empty");
    }
    let mut counts = vec![0u64; n * n];
    for (k, rec) in records.iter().enumerate() {
        let rec = rec.as_ref();
        if rec.len() != n {
            return domain(format!("record {k} has length {}, expected {n}", rec.len()));
        }
        for i in 0..n {
            for j in i..n {
                if rec[i] == rec[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let total = records.len() as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = counts[i * n + j] as f64 / total;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(CoClusterMatrix { n, values })
}

pub fn coclustering_from_trace(trace: &ChainTrace) -> Result<CoClusterMatrix> {
    let recs: Vec<&[usize]> = trace.records.iter().map(|r| r.assignments.as_slice()).collect();
    coclustering(&recs)
}

/// One agglomeration step: clusters `a` and `b` (ids below n are leaves,
/// id n + s is the cluster formed at step s) joined at `height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    /// Flat clustering at the requested number of clusters, canonical labels.
    pub labels: Vec<usize>,
}

/// Average-linkage agglomerative clustering on the dissimilarity `1 - P`.
/// Ties are broken by the smallest pair of cluster ids.
pub fn agglomerate(p: &CoClusterMatrix, threshold_k: usize) -> Result<Dendrogram> {
    let n = p.n();
    if threshold_k == 0 || threshold_k > n {
        return domain(format!("cannot cut {n} observations into {threshold_k} clusters"));
    }
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 1.0 - p.get(i, j)).collect()).collect();
    let mut active: Vec<bool> = vec![true; n];
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut labels = Vec::new();
    for step in 0..n {
        if n - step == threshold_k {
            let mut out = vec![0usize; n];
            for (slot, m) in members.iter().enumerate() {
                if active[slot] {
                    for &i in m {
                        out[i] = slot;
                    }
                }
            }
            labels = crate::partitions::Partition::from_labels(&out)?.assignments().to_vec();
        }
        if step == n - 1 {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let d = dist[i][j];
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        d < bd
                            || (d == bd
                                && (ids[i].min(ids[j]), ids[i].max(ids[j]))
                                    < (ids[bi].min(ids[bj]), ids[bi].max(ids[bj])))
                    }
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (height, i, j) = best.expect("at least two active clusters");
        let (si, sj) = (sizes[i] as f64, sizes[j] as f64);
        for k in 0..n {
            if active[k] && k != i && k != j {
                let d = (si * dist[i][k] + sj * dist[j][k]) / (si + sj);
                dist[i][k] = d;
                dist[k][i] = d;
            }
        }
        merges.push(Merge { a: ids[i].min(ids[j]), b: ids[i].max(ids[j]), height, size: sizes[i] + sizes[j] });
        sizes[i] += sizes[j];
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        active[j] = false;
        ids[i] = n + step;
    }
    Ok(Dendrogram { merges, labels })
}

/// Labels with clusters of size one mapped to `None`.
pub fn drop_singletons(labels: &[usize]) -> Vec<Option<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    labels.iter().map(|&l| (sizes[l] > 1).then_some(l)).collect()
}

/// Posterior predictive of one new observation, averaged over a trace.
/// Each recorded partition contributes the exact urn step: joining block
/// `c` has probability `V(n+1,K)/V(n,K) (n_c - sigma)`, opening a block
/// `V(n+1,K+1)/V(n,K)`. Cluster densities use the recorded parameters.
pub struct Predictive<'a> {
    model: &'a LikelihoodModel,
    cfg: QuadratureConfig,
    states: Vec<(&'a ChainRecord, Vec<f64>)>,
}

impl<'a> Predictive<'a> {
    pub fn new(
        trace: &'a ChainTrace,
        model: &'a LikelihoodModel,
        tilt: &TiltingFunction,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        if trace.records.is_empty() {
            return domain("predictive density needs a nonempty trace");
        }
        // The urn weights depend on the sizes only through (sigma, n, K).
        let mut cache: HashMap<(u64, usize, usize), (f64, f64)> = HashMap::new();
        let mut states = Vec::with_capacity(trace.records.len());
        for rec in &trace.records {
            let sigma = rec.aux.sigma;
            let sizes = rec.sizes();
            let n = rec.assignments.len();
            let key = (sigma.get().to_bits(), n, rec.k);
            let (join, open) = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let w = urn_log_weights(&sizes, sigma, tilt, cfg)?;
                    let v = (w[0] - (sizes[0] as f64 - sigma.get()).ln(), w[rec.k]);
                    cache.insert(key, v);
                    v
                }
            };
            let mut lw: Vec<f64> = sizes.iter().map(|&m| join + (m as f64 - sigma.get()).ln()).collect();
            lw.push(open);
            states.push((rec, lw));
        }
        Ok(Predictive { model, cfg: *cfg, states })
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let lpp = self.model.log_prior_predictive(x, &self.cfg)?;
        let mut logs = Vec::with_capacity(self.states.len());
        for (rec, lw) in &self.states {
            let mut terms = Vec::with_capacity(lw.len());
            for (j, p) in rec.params.iter().enumerate() {
                terms.push(lw[j] + self.model.log_lik(x, p)?);
            }
            terms.push(lw[rec.k] + lpp);
            let v = log_sum_exp(&terms);
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::Numerical(format!("predictive density at {x:?} is {v}")));
            }
            logs.push(v);
        }
        Ok((log_sum_exp(&logs) - (logs.len() as f64).ln()).exp())
    }
}

pub fn predictive_density(
    x: &[f64],
    trace: &ChainTrace,
    model: &LikelihoodModel,
    tilt: &TiltingFunction,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    Predictive::new(trace, model, tilt, cfg)?.density(x)
}

pub fn density_grid(
    trace: &ChainTrace,
    model: &LikelihoodModel,
    tilt: &TiltingFunction,
    grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    if model.dim() != 1 {
        return Err(Error::Unsupported("density grids are one-dimensional".into()));
    }
    let p = Predictive::new(trace, model, tilt, cfg)?;
    grid.iter().map(|&g| p.density(&[g])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveReport {
    /// Predictive density of each held-out observation, by data index.
    pub per_point: Vec<f64>,
    /// Held-out index sets (one per fold; singletons for leave-one-out).
    pub folds: Vec<Vec<usize>>,
    /// Average predictive density of each fold.
    pub fold_means: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Setup shared by the held-out predictive estimators.
#[derive(Debug, Clone)]
pub struct HeldOutSetup<'a> {
    pub data: &'a [Vec<f64>],
    pub model: &'a LikelihoodModel,
    pub tilt: TiltingFunction,
    pub sigma: StableIndex,
    pub cfg: &'a SamplerConfig,
}

impl HeldOutSetup<'_> {
    /// Runs a chain on the data without `fold` and returns the predictive
    /// density of each held-out point. The chain's random stream is the
    /// smallest held-out index.
    fn fold_densities(&self, fold: &[usize]) -> Result<Vec<f64>> {
        let train: Vec<Vec<f64>> =
            self.data.iter().enumerate().filter(|(i, _)| !fold.contains(i)).map(|(_, x)| x.clone()).collect();
        let stream = *fold.iter().min().expect("folds are nonempty");
        let sampler = Sampler::new(
            &train,
            self.model,
            self.tilt,
            self.sigma,
            self.cfg.clone(),
            chain_rng(self.cfg.seed, stream),
        )?;
        let trace = sampler.run().map_err(|f| f.error)?;
        let p = Predictive::new(&trace, self.model, &self.tilt, &self.cfg.quadrature)?;
        fold.iter().map(|&i| p.density(&self.data[i])).collect()
    }

    fn report(&self, folds: Vec<Vec<usize>>) -> Result<PredictiveReport> {
        let results: Vec<Result<Vec<f64>>> = folds.par_iter().map(|f| self.fold_densities(f)).collect();
        let mut per_point = vec![f64::NAN; self.data.len()];
        let mut fold_means = Vec::with_capacity(folds.len());
        for (fold, res) in folds.iter().zip(results) {
            let dens = res?;
            for (&i, &d) in fold.iter().zip(&dens) {
                per_point[i] = d;
            }
            fold_means.push(dens.iter().sum::<f64>() / dens.len() as f64);
        }
        let (mean, std) = mean_std(&fold_means);
        Ok(PredictiveReport { per_point, folds, fold_means, mean, std })
    }

    /// Leave-one-out: one chain per observation.
    pub fn loo(&self) -> Result<PredictiveReport> {
        if self.data.len() < 2 {
            return domain("leave-one-out needs at least two observations");
        }
        self.report((0..self.data.len()).map(|i| vec![i]).collect())
    }

    /// k-fold: a seeded random split into k folds whose sizes differ by at
    /// most one, each point held out exactly once.
    pub fn kfold(&self, k: usize, seed: u64) -> Result<PredictiveReport> {
        let n = self.data.len();
        if k < 2 || k > n {
            return domain(format!("k-fold needs 2 <= k <= n = {n}, got {k}"));
        }
        self.report(kfold_split(n, k, seed))
    }
}

pub fn kfold_split(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds: Vec<Vec<usize>> = (0..k).map(|f| idx[f * n / k..(f + 1) * n / k].to_vec()).collect();
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}
