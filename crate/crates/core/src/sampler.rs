// Marginal MCMC for sigma-stable Poisson-Kingman mixtures.
//
// The state holds the partition, one parameter per occupied cluster, a pool
// of M parameters for potential new clusters, and the auxiliary variables
//   w = (sigma/(1-sigma)) log T,  r = S/T in (0,1),  z in (0, pi).
// One iteration updates z, r, w by slice sampling, optionally sigma, then
// sweeps the cluster assignments with the ReUse scheme and resamples the
// cluster parameters.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::categorical::sample_log_categorical;
use crate::error::{Error, Result};
use crate::likelihoods::{ClusterParams, LikelihoodModel};
use crate::partitions::{log_gibbs_weight, Partition};
use crate::quadrature::QuadratureConfig;
use crate::slice::{slice_step, SliceConfig};
use crate::stable::{log_zolotarev_a, StableIndex};
use crate::stats::ClusterStats;
use crate::tilting::{log_normalizer, TiltingFunction};

/// Margin kept between r, z and the ends of their ranges.
pub const AUX_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub w: f64,
    pub r: f64,
    pub z: f64,
    pub sigma: StableIndex,
}

impl AuxState {
    pub fn initial(sigma: StableIndex) -> Self {
        AuxState { w: 0.0, r: 0.5, z: 0.5 * PI, sigma }
    }

    /// `log(r^(-sigma/(1-sigma)) e^(-w) A(z))`, the exponent shared by all
    /// three conditionals.
    fn log_rate(&self) -> f64 {
        let s = self.sigma.get();
        match log_zolotarev_a(self.z, self.sigma) {
            Ok(la) => -s / (1.0 - s) * self.r.ln() - self.w + la,
            Err(_) => f64::NAN,
        }
    }

    fn clamp(&mut self) {
        self.r = self.r.clamp(AUX_EPS, 1.0 - AUX_EPS);
        self.z = self.z.clamp(AUX_EPS, PI - AUX_EPS);
    }
}

/// Log conditional density of z, up to a constant.
pub fn log_cond_z(z: f64, aux: &AuxState) -> Result<f64> {
    let la = log_zolotarev_a(z, aux.sigma)?;
    let a = AuxState { z, ..*aux };
    Ok(la - a.log_rate().exp())
}

/// Log conditional density of r, up to a constant.
pub fn log_cond_r(r: f64, aux: &AuxState, n: usize, k: usize) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("r must lie in (0, 1), got {r}")));
    }
    let s = aux.sigma.get();
    let a = AuxState { r, ..*aux };
    Ok((n as f64 - 1.0 - k as f64 * s) * (-r).ln_1p() - r.ln() / (1.0 - s) - a.log_rate().exp())
}

/// Log conditional density of w, up to a constant.
pub fn log_cond_w(w: f64, aux: &AuxState, k: usize, f: &TiltingFunction) -> Result<f64> {
    if !w.is_finite() {
        return Err(Error::Domain(format!("w must be finite, got {w}")));
    }
    let s = aux.sigma.get();
    let a = AuxState { w, ..*aux };
    let log_h = f.log_h_at_log((1.0 - s) / s * w, aux.sigma);
    Ok(-w * (1.0 + (1.0 - s) * k as f64) + log_h - a.log_rate().exp())
}

/// Log of the joint density of (w, r, z, partition) with the cluster
/// parameters and data integrated out, excluding `-log Z_h`.
pub fn log_joint_aux(aux: &AuxState, sizes: &[usize], f: &TiltingFunction) -> Result<f64> {
    let s = aux.sigma.get();
    let n: usize = sizes.iter().sum();
    let k = sizes.len() as f64;
    let la = log_zolotarev_a(aux.z, aux.sigma)?;
    let log_h = f.log_h_at_log((1.0 - s) / s * aux.w, aux.sigma);
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    let mut log_w = 0.0;
    for &m in &sizes {
        log_w += log_gibbs_weight(m, aux.sigma)?;
    }
    Ok(-PI.ln() - aux.w * (1.0 + (1.0 - s) * k) + (n as f64 - 1.0 - k * s) * (-aux.r).ln_1p() - aux.r.ln() / (1.0 - s)
        + log_h
        + la
        - aux.log_rate().exp()
        + k * s.ln()
        - ln_gamma(n as f64 - s * k)
        + log_w)
}

/// Form of the weight for opening a new cluster. `MainText` is the
/// `sigma e^((sigma-1)w) (1-r)^(-sigma)` form that follows from the joint
/// density; `Alternative` replaces it with `e^((sigma-1)w) r^(-sigma)` and
/// is kept only to show that it does not target the right posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewClusterWeight {
    #[default]
    MainText,
    Alternative,
}

/// Beta prior on sigma; `a = b = 1` is uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPrior {
    pub a: f64,
    pub b: f64,
}

impl Default for SigmaPrior {
    fn default() -> Self {
        SigmaPrior { a: 1.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Number of potential new clusters kept in the pool.
    pub m: usize,
    pub seed: u64,
    /// `Some(prior)` turns on the sigma update.
    pub sigma_update: Option<SigmaPrior>,
    /// Use the closed-form cluster predictives for the assignment weights
    /// (conjugate models only).
    pub marginalized: bool,
    pub slice: SliceConfig,
    pub quadrature: QuadratureConfig,
    pub new_cluster_weight: NewClusterWeight,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 1000,
            burn_in: 100,
            thin: 1,
            m: 4,
            seed: 0,
            sigma_update: None,
            marginalized: false,
            slice: SliceConfig::default(),
            quadrature: QuadratureConfig::default(),
            new_cluster_weight: NewClusterWeight::MainText,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 || self.m == 0 {
            return Err(Error::Config("thin and M must be at least 1".into()));
        }
        if let Some(p) = self.sigma_update {
            if !(p.a > 0.0 && p.b > 0.0) {
                return Err(Error::Config(format!("sigma prior needs a, b > 0, got {p:?}")));
            }
        }
        self.slice.validate()?;
        self.quadrature.validate()
    }

    pub fn record_count(&self) -> usize {
        (self.iterations.saturating_sub(self.burn_in)) / self.thin.max(1)
    }
}

#[derive(Debug, Clone)]
struct Cluster {
    stats: ClusterStats,
    params: ClusterParams,
}

/// Full chain state. Cluster order is internal; records use canonical labels.
#[derive(Debug, Clone)]
pub struct SamplerState {
    labels: Vec<usize>,
    clusters: Vec<Cluster>,
    pool: Vec<ClusterParams>,
    pub aux: AuxState,
    rng: ChaCha8Rng,
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub iteration: usize,
    pub k: usize,
    /// Canonical labels (order of first appearance).
    pub assignments: Vec<usize>,
    pub aux: AuxState,
    /// Parameters indexed by canonical label.
    pub params: Vec<ClusterParams>,
}

impl ChainRecord {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.assignments).expect("recorded partitions are nonempty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub records: Vec<ChainRecord>,
}

impl ChainTrace {
    pub fn k_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.k as f64).collect()
    }
}

/// A chain that stopped on an error, with what it had produced so far.
#[derive(Debug, Clone)]
pub struct ChainFailure {
    pub iteration: usize,
    pub error: Error,
    pub state: ChainRecord,
    pub partial: ChainTrace,
}

impl fmt::Display for ChainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "chain failed at iteration {} (K = {}, w = {}, r = {}, z = {}, sigma = {}): {}",
            self.iteration,
            self.state.k,
            self.state.aux.w,
            self.state.aux.r,
            self.state.aux.z,
            self.state.aux.sigma.get(),
            self.error
        )
    }
}

impl std::error::Error for ChainFailure {}

pub struct Sampler<'a> {
    data: &'a [Vec<f64>],
    model: &'a LikelihoodModel,
    tilt: TiltingFunction,
    cfg: SamplerConfig,
    pub state: SamplerState,
}

impl<'a> Sampler<'a> {
    /// Initial state: one cluster holding every observation, `w = 0`,
    /// `r = 1/2`, `z = pi/2`, parameters drawn from H0.
    pub fn new(
        data: &'a [Vec<f64>],
        model: &'a LikelihoodModel,
        tilt: TiltingFunction,
        sigma: StableIndex,
        cfg: SamplerConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        tilt.validate(sigma)?;
        if data.is_empty() {
            return Err(Error::Domain("the data set is empty".into()));
        }
        let d = model.dim();
        if let Some((i, x)) = data.iter().enumerate().find(|(_, x)| x.len() != d || x.iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain(format!(
                "observation {i} has dimension {} or non-finite entries; model expects {d} finite values",
                x.len()
            )));
        }
        if cfg.marginalized && !model.is_conjugate() {
            return Err(Error::Config("marginalized mode needs a conjugate model".into()));
        }
        if matches!(tilt, TiltingFunction::Py { theta } if theta <= -sigma.get()) {
            return Err(Error::Config("PY theta must exceed -sigma for the sampler".into()));
        }
        let mut rng = rng;
        let stats = ClusterStats::from_data(d, data.iter().map(Vec::as_slice));
        let params = model.sample_prior(&mut rng);
        let params = model.sample_posterior(&stats, Some(&params), &mut rng)?;
        let pool = (0..cfg.m).map(|_| model.sample_prior(&mut rng)).collect();
        Ok(Sampler {
            data,
            model,
            tilt,
            cfg,
            state: SamplerState {
                labels: vec![0; data.len()],
                clusters: vec![Cluster { stats, params }],
                pool,
                aux: AuxState::initial(sigma),
                rng,
            },
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn k(&self) -> usize {
        self.state.clusters.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.state.clusters.iter().map(|c| c.stats.n()).collect()
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.state.labels).expect("data is nonempty")
    }

    pub fn record(&self, iteration: usize) -> ChainRecord {
        let p = self.partition();
        let mut first = vec![usize::MAX; p.k()];
        for (i, &c) in p.assignments().iter().enumerate() {
            if first[c] == usize::MAX {
                first[c] = i;
            }
        }
        let params = first.iter().map(|&i| self.state.clusters[self.state.labels[i]].params.clone()).collect();
        ChainRecord { iteration, k: p.k(), assignments: p.assignments().to_vec(), aux: self.state.aux, params }
    }

    /// Slice-samples z, then r, then w from their conditionals.
    pub fn update_aux(&mut self) -> Result<()> {
        let n = self.n();
        let k = self.k();
        let slice = self.cfg.slice;
        let st = &mut self.state;

        let aux = st.aux;
        st.aux.z = slice_step(
            |z| log_cond_z(z, &aux).unwrap_or(f64::NEG_INFINITY),
            aux.z,
            &slice.bounded(0.0, PI),
            &mut st.rng,
        )?;
        st.aux.clamp();

        let aux = st.aux;
        st.aux.r = slice_step(
            |r| log_cond_r(r, &aux, n, k).unwrap_or(f64::NEG_INFINITY),
            aux.r,
            &slice.bounded(0.0, 1.0),
            &mut st.rng,
        )?;
        st.aux.clamp();

        let aux = st.aux;
        let tilt = self.tilt;
        st.aux.w =
            slice_step(|w| log_cond_w(w, &aux, k, &tilt).unwrap_or(f64::NEG_INFINITY), aux.w, &slice, &mut st.rng)?;
        if !st.aux.w.is_finite() {
            return Err(Error::Numerical(format!("w update produced {}", st.aux.w)));
        }
        Ok(())
    }

    /// Slice-samples `logit(sigma)` against the joint density of
    /// (sigma, w, r, z, partition) times the prior, including the Jacobian
    /// of the logit map. No-op when the sigma update is off.
    pub fn update_sigma(&mut self) -> Result<()> {
        let Some(prior) = self.cfg.sigma_update else {
            return Ok(());
        };
        let sizes = self.sizes();
        let tilt = self.tilt;
        let aux = self.state.aux;
        let quad = self.cfg.quadrature;
        let target = |l: f64| -> f64 {
            let s = 1.0 / (1.0 + (-l).exp());
            let Ok(sigma) = StableIndex::new(s) else {
                return f64::NEG_INFINITY;
            };
            if tilt.validate(sigma).is_err() || matches!(tilt, TiltingFunction::Py { theta } if theta <= -s) {
                return f64::NEG_INFINITY;
            }
            let a = AuxState { sigma, ..aux };
            let Ok(mut lp) = log_joint_aux(&a, &sizes, &tilt) else {
                return f64::NEG_INFINITY;
            };
            if !tilt.is_self_normalized() {
                match log_normalizer(&tilt, sigma, &quad) {
                    Ok(z) if z.is_finite() => lp -= z,
                    _ => return f64::NEG_INFINITY,
                }
            }
            // Beta prior on sigma plus the Jacobian d sigma / d logit = s(1-s).
            let lp = lp + prior.a * s.ln() + prior.b * (1.0 - s).ln();
            if lp.is_nan() || lp == f64::INFINITY {
                f64::NEG_INFINITY
            } else {
                lp
            }
        };
        let s0 = aux.sigma.get();
        let l0 = (s0 / (1.0 - s0)).ln();
        let l1 = slice_step(target, l0, &self.cfg.slice, &mut self.state.rng)?;
        let s1 = 1.0 / (1.0 + (-l1).exp());
        self.state.aux.sigma =
            StableIndex::new(s1).map_err(|_| Error::Numerical(format!("sigma update left (0, 1): logit {l1}")))?;
        Ok(())
    }

    fn log_new_base(&self, k_minus: usize) -> f64 {
        let n = self.n() as f64;
        let aux = &self.state.aux;
        let s = aux.sigma.get();
        let k = k_minus as f64;
        let gamma_ratio = ln_gamma(n - s * k) - ln_gamma(n - s * (k + 1.0));
        match self.cfg.new_cluster_weight {
            NewClusterWeight::MainText => s.ln() + (s - 1.0) * aux.w - s * (-aux.r).ln_1p() + gamma_ratio,
            NewClusterWeight::Alternative => (s - 1.0) * aux.w - s * aux.r.ln() + gamma_ratio,
        }
    }

    /// One pass over the observations, then a pool refresh and a
    /// resampling of every occupied cluster's parameters.
    pub fn reuse_sweep(&mut self) -> Result<()> {
        let m = self.cfg.m;
        let s = self.state.aux.sigma.get();
        let mut log_w = Vec::with_capacity(self.k() + m + 1);
        let empty = self.model.empty_stats();
        for i in 0..self.n() {
            let x = self.data[i].as_slice();
            let c = self.state.labels[i];
            self.state.clusters[c].stats.remove(x);
            if self.state.clusters[c].stats.n() == 0 {
                let gone = self.state.clusters.swap_remove(c);
                let slot = self.state.rng.random_range(0..m);
                self.state.pool[slot] = gone.params;
                let moved = self.state.clusters.len();
                if c < moved {
                    for l in self.state.labels.iter_mut() {
                        if *l == moved {
                            *l = c;
                        }
                    }
                }
            }
            let k_minus = self.k();
            let base = self.log_new_base(k_minus);
            log_w.clear();
            for cl in &self.state.clusters {
                let ll = if self.cfg.marginalized {
                    self.model.log_pred_conjugate(x, &cl.stats)?
                } else {
                    self.model.log_lik(x, &cl.params)?
                };
                log_w.push((cl.stats.n() as f64 - s).ln() + ll);
            }
            if self.cfg.marginalized {
                log_w.push(base + self.model.log_pred_conjugate(x, &empty)?);
            } else {
                let log_m = (m as f64).ln();
                for p in &self.state.pool {
                    log_w.push(base - log_m + self.model.log_lik(x, p)?);
                }
            }
            if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(Error::Numerical(format!(
                    "assignment weights for observation {i} are not finite: {log_w:?}"
                )));
            }
            let choice = sample_log_categorical(&log_w, &mut self.state.rng)
                .ok_or_else(|| Error::Numerical(format!("every assignment weight for observation {i} is zero")))?;
            if choice < k_minus {
                self.state.clusters[choice].stats.add(x);
                self.state.labels[i] = choice;
            } else {
                let params = if self.cfg.marginalized {
                    self.model.sample_prior(&mut self.state.rng)
                } else {
                    let slot = choice - k_minus;
                    let fresh = self.model.sample_prior(&mut self.state.rng);
                    std::mem::replace(&mut self.state.pool[slot], fresh)
                };
                let mut stats = empty.clone();
                stats.add(x);
                self.state.clusters.push(Cluster { stats, params });
                self.state.labels[i] = k_minus;
            }
        }
        for p in self.state.pool.iter_mut() {
            *p = self.model.sample_prior(&mut self.state.rng);
        }
        for cl in self.state.clusters.iter_mut() {
            cl.params = self.model.sample_posterior(&cl.stats, Some(&cl.params), &mut self.state.rng)?;
        }
        debug_assert!(self.check_state().is_ok(), "{:?}", self.check_state());
        Ok(())
    }

    /// Sizes sum to n, labels point at occupied clusters, pool has M entries.
    pub fn check_state(&self) -> Result<()> {
        let st = &self.state;
        let mut counts = vec![0usize; st.clusters.len()];
        for &l in &st.labels {
            if l >= counts.len() {
                return Err(Error::Numerical(format!("label {l} has no cluster")));
            }
            counts[l] += 1;
        }
        for (c, cl) in st.clusters.iter().enumerate() {
            if cl.stats.n() != counts[c] || counts[c] == 0 {
                return Err(Error::Numerical(format!(
                    "cluster {c} records {} members but {} labels point at it",
                    cl.stats.n(),
                    counts[c]
                )));
            }
        }
        if st.pool.len() != self.cfg.m {
            return Err(Error::Numerical(format!("pool holds {} entries, expected {}", st.pool.len(), self.cfg.m)));
        }
        if !(st.aux.r >= AUX_EPS && st.aux.r <= 1.0 - AUX_EPS && st.aux.z >= AUX_EPS && st.aux.z <= PI - AUX_EPS)
            || !st.aux.w.is_finite()
        {
            return Err(Error::Numerical(format!("auxiliary state out of range: {:?}", st.aux)));
        }
        Ok(())
    }

    /// Checks, at a few probe points per variable, that each conditional
    /// differs from the joint density by a constant in its own variable.
    pub fn check_joint_consistency(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = self.sizes();
        let (n, k) = (self.n(), self.k());
        let aux = self.state.aux;
        let f = self.tilt;
        let check = |name: &str, probe: &dyn Fn(f64) -> (AuxState, Result<f64>), pts: [f64; 3]| -> Result<()> {
            let mut diffs = Vec::new();
            for p in pts {
                let (a, cond) = probe(p);
                let (cond, joint) = (cond?, log_joint_aux(&a, &sizes, &f)?);
                if cond.is_finite() && joint.is_finite() {
                    diffs.push((cond - joint, cond.abs().max(joint.abs()).max(1.0)));
                }
            }
            for w in diffs.windows(2) {
                if (w[0].0 - w[1].0).abs() > 1e-9 * w[0].1.max(w[1].1) {
                    return Err(Error::Numerical(format!(
                        "{name} conditional is inconsistent with the joint: offsets {} and {}",
                        w[0].0, w[1].0
                    )));
                }
            }
            Ok(())
        };
        let zs = [0.0; 3].map(|_: f64| rng.random_range(0.05..PI - 0.05));
        check("z", &|z| (AuxState { z, ..aux }, log_cond_z(z, &aux)), zs)?;
        let rs = [0.0; 3].map(|_: f64| rng.random_range(0.05..0.95));
        check("r", &|r| (AuxState { r, ..aux }, log_cond_r(r, &aux, n, k)), rs)?;
        let ws = [0.0; 3].map(|_: f64| aux.w + rng.random_range(-1.0..1.0));
        check("w", &|w| (AuxState { w, ..aux }, log_cond_w(w, &aux, k, &f)), ws)
    }

    /// update_aux, optional update_sigma, then reuse_sweep.
    pub fn step(&mut self, iteration: usize) -> Result<()> {
        #[cfg(debug_assertions)]
        self.check_joint_consistency(iteration as u64)?;
        let _ = iteration;
        self.update_aux()?;
        self.update_sigma()?;
        self.reuse_sweep()
    }

    pub fn run(mut self) -> std::result::Result<ChainTrace, ChainFailure> {
        let cfg = self.cfg.clone();
        let mut trace = ChainTrace {
            iterations: cfg.iterations,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            records: Vec::with_capacity(cfg.record_count()),
        };
        for t in 1..=cfg.iterations {
            if let Err(error) = self.step(t) {
                return Err(ChainFailure { iteration: t, error, state: self.record(t), partial: trace });
            }
            if t > cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.thin) {
                trace.records.push(self.record(t));
            }
        }
        Ok(trace)
    }
}

/// Random source for chain `chain` of a run seeded with `seed`: one ChaCha
/// stream per chain.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

pub fn run_chain(
    data: &[Vec<f64>],
    model: &LikelihoodModel,
    tilt: TiltingFunction,
    sigma: StableIndex,
    cfg: &SamplerConfig,
) -> std::result::Result<ChainTrace, ChainFailure> {
    run_chain_with_rng(data, model, tilt, sigma, cfg, chain_rng(cfg.seed, 0))
}

fn run_chain_with_rng(
    data: &[Vec<f64>],
    model: &LikelihoodModel,
    tilt: TiltingFunction,
    sigma: StableIndex,
    cfg: &SamplerConfig,
    rng: ChaCha8Rng,
) -> std::result::Result<ChainTrace, ChainFailure> {
    match Sampler::new(data, model, tilt, sigma, cfg.clone(), rng) {
        Ok(s) => s.run(),
        Err(error) => Err(ChainFailure {
            iteration: 0,
            error,
            state: ChainRecord {
                iteration: 0,
                k: 0,
                assignments: Vec::new(),
                aux: AuxState::initial(sigma),
                params: Vec::new(),
            },
            partial: ChainTrace {
                iterations: cfg.iterations,
                burn_in: cfg.burn_in,
                thin: cfg.thin,
                records: Vec::new(),
            },
        }),
    }
}

/// Independent chains, one random stream each, run in parallel.
pub fn run_chains(
    data: &[Vec<f64>],
    model: &LikelihoodModel,
    tilt: TiltingFunction,
    sigma: StableIndex,
    cfg: &SamplerConfig,
    chains: usize,
) -> Vec<std::result::Result<ChainTrace, ChainFailure>> {
    (0..chains)
        .into_par_iter()
        .map(|c| run_chain_with_rng(data, model, tilt, sigma, cfg, chain_rng(cfg.seed, c)))
        .collect()
}
