// Exchangeable partitions and their Gibbs-type partition laws
// P(Pi_n = {c_1..c_K}) = V_{n,K} prod_k W_{|c_k|}.
//
// V_{n,K} is computed as
//   sigma^K / (Gamma(n - K sigma) Z_h) int_0^inf int_0^t t^-n (t-s)^(n-1-K sigma) h(t) f_sigma(s) ds dt
// after the change of variables r = s/t, which gives
//   sigma^K / (Gamma(n - K sigma) Z_h) int f_sigma(s) s^(-K sigma) int_0^1 r^(K sigma - 1) (1-r)^(n-1-K sigma) h(s/r) dr ds.
// Every supported h has the form C t^-theta exp(-eta t), so the inner
// integral is a Beta function when eta = 0 and a bounded one-dimensional
// quadrature otherwise. The outer integral runs over ln s.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::categorical::sample_log_categorical;
use crate::error::{domain, Error, Result};
use crate::quadrature::{log_integrate, log_integrate_real_line, log_sum_exp, QuadratureConfig};
use crate::stable::{log_stable_density_at_log, StableIndex};
use crate::tilting::{log_normalizer, TiltingFunction};

/// A set partition of `{0, .., n-1}` stored in canonical form: labels are
/// assigned in order of first appearance, so block `k` is the block whose
/// least element is the `k`-th smallest block minimum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    assignments: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Canonicalises an arbitrary labelling.
    pub fn from_labels<L: Copy + Eq + std::hash::Hash>(labels: &[L]) -> Result<Self> {
        if labels.is_empty() {
            return domain("a partition needs at least one element");
        }
        let mut relabel = HashMap::new();
        let mut assignments = Vec::with_capacity(labels.len());
        let mut sizes = Vec::new();
        for &l in labels {
            let next = relabel.len();
            let c = *relabel.entry(l).or_insert(next);
            if c == sizes.len() {
                sizes.push(0);
            }
            sizes[c] += 1;
            assignments.push(c);
        }
        Ok(Partition { assignments, sizes })
    }

    /// Builds a partition from explicit blocks of 0-based element indices.
    pub fn from_blocks(blocks: &[Vec<usize>]) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut labels = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return domain("partition blocks must be nonempty");
            }
            for &i in block {
                if i >= n || labels[i] != usize::MAX {
                    return domain(format!("blocks do not partition 0..{n}: bad element {i}"));
                }
                labels[i] = b;
            }
        }
        Partition::from_labels(&labels)
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    /// Number of blocks K.
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Block sizes indexed by canonical label.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.k()];
        for (i, &c) in self.assignments.iter().enumerate() {
            blocks[c].push(i);
        }
        blocks
    }

    /// Partition obtained by adding element `n` to block `c` (or to a new
    /// block when `c == k`).
    pub fn extended(&self, c: usize) -> Partition {
        let mut p = self.clone();
        if c >= p.k() {
            p.sizes.push(1);
            p.assignments.push(p.sizes.len() - 1);
        } else {
            p.sizes[c] += 1;
            p.assignments.push(c);
        }
        p
    }

    /// Recomputes the block sizes and canonical labelling from scratch and
    /// compares them with the stored ones.
    pub fn check_invariants(&self) -> Result<()> {
        let fresh = Partition::from_labels(&self.assignments)?;
        if fresh != *self || self.sizes.contains(&0) {
            return Err(Error::Numerical(format!("partition state is inconsistent: {self:?}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (b, block) in self.blocks().iter().enumerate() {
            if b > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, i) in block.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", i + 1)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// All set partitions of `{0, .., n-1}` for `1 <= n <= 10`, generated as
/// restricted growth strings in lexicographic order.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if !(1..=10).contains(&n) {
        return domain(format!("enumeration supports 1 <= n <= 10, got {n}"));
    }
    let mut out = Vec::new();
    let mut a = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        let mut sizes = vec![0usize; maxes[n - 1] + 1];
        for &c in &a {
            sizes[c] += 1;
        }
        out.push(Partition { assignments: a.clone(), sizes });
        // Find the rightmost position that can still be incremented.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if a[i] <= maxes[i - 1] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        maxes[i] = maxes[i - 1].max(a[i]);
        for j in i + 1..n {
            a[j] = 0;
            maxes[j] = maxes[i];
        }
    }
}

/// `log W_m = log prod_{i=0}^{m-2} (1 - sigma + i)`.
pub fn log_gibbs_weight(m: usize, sigma: StableIndex) -> Result<f64> {
    if m == 0 {
        return domain("Gibbs weight needs block size m >= 1");
    }
    let s = sigma.get();
    if m > 32 {
        return Ok(ln_gamma(m as f64 - s) - ln_gamma(1.0 - s));
    }
    Ok((0..m - 1).map(|i| (1.0 - s + i as f64).ln()).sum())
}

// Summed in sorted order so relabelled partitions give bit-identical values.
fn sum_log_gibbs_weights(p: &Partition, sigma: StableIndex) -> Result<f64> {
    let mut sizes = p.sizes().to_vec();
    sizes.sort_unstable();
    sizes.iter().map(|&m| log_gibbs_weight(m, sigma)).sum()
}

fn log_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `h(t) = exp(log_c) t^-theta exp(-eta t)`.
#[derive(Debug, Clone, Copy)]
struct TiltShape {
    log_c: f64,
    theta: f64,
    eta: f64,
}

fn tilt_shape(f: &TiltingFunction, sigma: StableIndex) -> TiltShape {
    let s = sigma.get();
    match *f {
        TiltingFunction::Ns => TiltShape { log_c: 0.0, theta: 0.0, eta: 0.0 },
        TiltingFunction::Ngg { tau } => TiltShape { log_c: tau, theta: 0.0, eta: tau.powf(1.0 / s) },
        TiltingFunction::Py { theta } => {
            TiltShape { log_c: ln_gamma(theta + 1.0) - ln_gamma(theta / s + 1.0), theta, eta: 0.0 }
        }
        TiltingFunction::Gt { theta, eta } => TiltShape { log_c: 0.0, theta, eta },
    }
}

/// `log int_0^1 r^(a-1) (1-r)^m exp(-c/r) dr` with `c = exp(log_c)`.
/// Requires `m > -1`, and `a > 0` unless `c > 0`.
fn log_surplus_integral(a: f64, m: f64, log_c: f64, cfg: &QuadratureConfig) -> Result<f64> {
    use std::f64::consts::LN_2;
    if log_c == f64::NEG_INFINITY {
        return Ok(log_beta(a, m + 1.0));
    }
    let c = log_c.exp();
    // [1/2, 1): 1 - r = w = exp(-y), and c/r = c + c w/(1-w) with the
    // constant c taken outside so large c does not drown the integrand in
    // rounding noise. The upper limit leaves a relative tail of at most
    // exp(-50) beyond the scale 1/c set by the exponential factor.
    let y_max = log_c.max(LN_2) + 50.0 / (m + 1.0) + 10.0;
    let right = log_integrate(
        |y: f64| {
            let ln_r = (-(-y).exp()).ln_1p();
            -(m + 1.0) * y + (a - 1.0) * ln_r - (log_c - y - ln_r).exp()
        },
        LN_2,
        y_max,
        cfg,
    )? - c;
    // On (0, 1/2] the integrand is at most 2^|m| r^(a-1) exp(-2c), which
    // lets the left piece be skipped when it cannot matter.
    let log_left_bound = if a > 0.0 {
        m.abs() * LN_2 - a * LN_2 - a.ln() - 2.0 * c
    } else {
        m.abs() * LN_2 + (1.0 - a) * LN_2 - 2.0 * c
    };
    if log_left_bound < right - 40.0 {
        return Ok(right);
    }
    let c_over_r = |ln_r: f64| (log_c - ln_r).exp();
    // (0, 1/2]: r = u^(1/a) when a > 0, r = exp(-y) otherwise.
    let left = if a > 0.0 {
        log_integrate(
            |u: f64| {
                let ln_r = u.ln() / a;
                -a.ln() + m * (-ln_r.exp()).ln_1p() - c_over_r(ln_r)
            },
            0.0,
            (-a * LN_2).exp(),
            cfg,
        )?
    } else {
        let y_peak = (-a).max(1.0).ln() - log_c;
        let y_max = y_peak.max(LN_2) + 40.0;
        log_integrate(|y: f64| -a * y + m * (-(-y).exp()).ln_1p() - c_over_r(-y), LN_2, y_max, cfg)?
    };
    Ok(log_sum_exp(&[left, right]))
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 || k > n {
        return domain(format!("V_(n,K) needs 1 <= K <= n, got n = {n}, K = {k}"));
    }
    Ok(())
}

fn check_pairing(n: usize, sigma: StableIndex, f: &TiltingFunction) -> Result<()> {
    f.validate(sigma)?;
    if let TiltingFunction::Py { theta } = *f {
        if n > 1 && theta <= -sigma.get() {
            return domain(format!("PY with theta = -sigma only supports n = 1, got n = {n}"));
        }
    }
    Ok(())
}

type CacheKey = (usize, usize, u64, (u8, u64, u64), [u64; 3]);

fn cfg_key(cfg: &QuadratureConfig) -> [u64; 3] {
    [cfg.rel_tol.to_bits(), cfg.abs_tol.to_bits(), cfg.max_subdivisions as u64]
}

fn v_cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn z_cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cached<F: FnOnce() -> Result<f64>>(
    cache: &RwLock<HashMap<CacheKey, f64>>,
    key: CacheKey,
    compute: F,
) -> Result<f64> {
    if let Some(&v) = cache.read().expect("cache lock poisoned").get(&key) {
        return Ok(v);
    }
    let v = compute()?;
    cache.write().expect("cache lock poisoned").insert(key, v);
    Ok(v)
}

/// `log Z_h`, exactly 0 for the self-normalised families and by quadrature
/// (memoised) otherwise.
pub fn log_mixing_normalizer(f: &TiltingFunction, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    f.validate(sigma)?;
    if f.is_self_normalized() {
        return Ok(0.0);
    }
    let key = (0, 0, sigma.get().to_bits(), f.cache_key(), cfg_key(cfg));
    cached(z_cache(), key, || log_normalizer(f, sigma, cfg))
}

/// `log V_{n,K}` by quadrature, memoised per `(n, K, sigma, h, cfg)`.
///
/// Writing `t^-theta` as a Laplace mixture of exponential tilts and
/// integrating the mixing variable out leaves one smooth integral,
/// `V = sigma^K C / (Z_h Gamma(theta+n)) int_eta^inf (v-eta)^(theta+n-1) v^(K sigma-n) exp(-v^sigma) dv`,
/// computed in `y = ln(v - eta)`.
pub fn log_vnk(n: usize, k: usize, sigma: StableIndex, f: &TiltingFunction, cfg: &QuadratureConfig) -> Result<f64> {
    check_nk(n, k)?;
    check_pairing(n, sigma, f)?;
    let key = (n, k, sigma.get().to_bits(), f.cache_key(), cfg_key(cfg));
    cached(v_cache(), key, || compute_log_vnk(n, k, sigma, f, cfg))
}

fn compute_log_vnk(n: usize, k: usize, sigma: StableIndex, f: &TiltingFunction, cfg: &QuadratureConfig) -> Result<f64> {
    let s = sigma.get();
    let (nf, kf) = (n as f64, k as f64);
    let shape = tilt_shape(f, sigma);
    let log_z = log_mixing_normalizer(f, sigma, cfg)?;
    let p = shape.theta + nf;
    let q = kf * s - nf;
    let log_eta = if shape.eta > 0.0 { shape.eta.ln() } else { f64::NEG_INFINITY };
    // ln(eta + e^y) without overflow.
    let ln_v =
        |y: f64| if y > log_eta { y + (log_eta - y).exp().ln_1p() } else { log_eta + (y - log_eta).exp().ln_1p() };
    // Mode of the eta = 0 integrand, v^(theta + K sigma) = (theta + K sigma)/sigma.
    let hint = ((shape.theta + kf * s) / s).ln() / s;
    let log_int = log_integrate_real_line(
        |y: f64| {
            let lv = ln_v(y);
            p * y + q * lv - (s * lv).exp()
        },
        if hint.is_finite() { hint } else { 0.0 },
        cfg,
    )?;
    Ok(kf * s.ln() - ln_gamma(p) + shape.log_c + log_int - log_z)
}

/// `log V_{n,K}` from the defining double integral against the stable
/// density and the surplus fraction. Slower and less robust than
/// [`log_vnk`]; kept as an independent cross-check.
pub fn log_vnk_by_density(
    n: usize,
    k: usize,
    sigma: StableIndex,
    f: &TiltingFunction,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_nk(n, k)?;
    check_pairing(n, sigma, f)?;
    compute_log_vnk_by_density(n, k, sigma, f, cfg)
}

fn compute_log_vnk_by_density(
    n: usize,
    k: usize,
    sigma: StableIndex,
    f: &TiltingFunction,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let s = sigma.get();
    let (nf, kf) = (n as f64, k as f64);
    let shape = tilt_shape(f, sigma);
    let log_z = log_mixing_normalizer(f, sigma, cfg)?;
    let inner_cfg = cfg.nested();
    // Power of r contributed by h(s/r) joins r^(K sigma - 1).
    let a = kf * s + shape.theta;
    let m = nf - 1.0 - kf * s;
    let log_eta = if shape.eta > 0.0 { shape.eta.ln() } else { f64::NEG_INFINITY };
    let mut failure = None;
    let log_outer = log_integrate_real_line(
        |x: f64| {
            let inner = log_stable_density_at_log(x, sigma, &inner_cfg)
                .and_then(|lf| Ok(lf + log_surplus_integral(a, m, log_eta + x, &inner_cfg)?));
            match inner {
                Ok(v) => v + (1.0 - kf * s - shape.theta) * x,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        0.0,
        cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(kf * s.ln() - ln_gamma(nf - kf * s) + shape.log_c + log_outer? - log_z)
}

/// Closed-form `log V_{n,K}` for PY(theta); theta = 0 is the normalised
/// stable process. Valid for theta > -sigma (theta = -sigma only at n = 1).
pub fn log_vnk_py(n: usize, k: usize, sigma: StableIndex, theta: f64) -> Result<f64> {
    check_nk(n, k)?;
    check_pairing(n, sigma, &TiltingFunction::Py { theta })?;
    let s = sigma.get();
    let rising: f64 = (1..k).map(|i| (theta + i as f64 * s).ln()).sum();
    Ok(rising - (ln_gamma(theta + n as f64) - ln_gamma(theta + 1.0)))
}

/// `log V_{n,K}`, using the closed form for NS and PY and quadrature
/// otherwise.
pub fn log_v(n: usize, k: usize, sigma: StableIndex, f: &TiltingFunction, cfg: &QuadratureConfig) -> Result<f64> {
    match *f {
        TiltingFunction::Ns => log_vnk_py(n, k, sigma, 0.0),
        TiltingFunction::Py { theta } => log_vnk_py(n, k, sigma, theta),
        _ => log_vnk(n, k, sigma, f, cfg),
    }
}

/// Log EPPF, dispatching to closed forms where they exist.
pub fn log_eppf(p: &Partition, sigma: StableIndex, f: &TiltingFunction, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(log_v(p.n(), p.k(), sigma, f, cfg)? + sum_log_gibbs_weights(p, sigma)?)
}

/// Log EPPF with `V_{n,K}` always taken from quadrature.
pub fn log_eppf_quadrature(
    p: &Partition,
    sigma: StableIndex,
    f: &TiltingFunction,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    Ok(log_vnk(p.n(), p.k(), sigma, f, cfg)? + sum_log_gibbs_weights(p, sigma)?)
}

/// Closed-form PY EPPF
/// `sigma^K Gamma(theta)/Gamma(theta/sigma) Gamma(theta/sigma+K)/Gamma(theta+n) prod W`,
/// evaluated through the equivalent product `prod_{i<K} (theta + i sigma)` so
/// that theta <= 0 needs no limit.
pub fn log_eppf_py_closed(p: &Partition, sigma: StableIndex, theta: f64) -> Result<f64> {
    if !(theta > -sigma.get()) {
        return domain(format!("PY EPPF needs theta > -sigma, got {theta}"));
    }
    Ok(log_vnk_py(p.n(), p.k(), sigma, theta)? + sum_log_gibbs_weights(p, sigma)?)
}

/// Dirichlet-process EPPF `theta^K Gamma(theta)/Gamma(n+theta) prod Gamma(|c_k|)`.
pub fn log_eppf_dp_closed(p: &Partition, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("DP EPPF needs theta > 0, got {theta}"));
    }
    let sizes: f64 = p.sizes().iter().map(|&m| ln_gamma(m as f64)).sum();
    Ok(p.k() as f64 * theta.ln() + ln_gamma(theta) - ln_gamma(p.n() as f64 + theta) + sizes)
}

/// NGG EPPF through the normalised-random-measure integral
/// `int u^(n-1)/Gamma(n) exp(-psi(u)) prod_k kappa(|c_k|, u) du`
/// with Levy intensity `sigma/Gamma(1-sigma) s^(-1-sigma) exp(-beta s)`,
/// `beta = tau^(1/sigma)`, so `psi(u) = (u+beta)^sigma - tau` and
/// `kappa(m, u) = sigma W_m (u+beta)^(sigma-m)`.
pub fn log_eppf_ngg_integral(p: &Partition, sigma: StableIndex, tau: f64, cfg: &QuadratureConfig) -> Result<f64> {
    TiltingFunction::Ngg { tau }.validate(sigma)?;
    let s = sigma.get();
    let (n, k) = (p.n() as f64, p.k() as f64);
    let log_beta = tau.ln() / s;
    // ln(u + beta) for u = e^y without overflow.
    let ln_shift = |y: f64| {
        if y > log_beta {
            y + (log_beta - y).exp().ln_1p()
        } else {
            log_beta + (y - log_beta).exp().ln_1p()
        }
    };
    let log_int = log_integrate_real_line(
        |y: f64| {
            let l = ln_shift(y);
            n * y + tau - (s * l).exp() + (k * s - n) * l
        },
        0.0,
        cfg,
    )?;
    Ok(k * s.ln() - ln_gamma(n) + sum_log_gibbs_weights(p, sigma)? + log_int)
}

/// Unnormalised log-probabilities of the urn step that adds one element to
/// a partition with the given block sizes: entry `k < K` joins block `k`,
/// the last entry opens a new block. They sum to one in exact arithmetic.
pub fn urn_log_weights(
    sizes: &[usize],
    sigma: StableIndex,
    f: &TiltingFunction,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let n: usize = sizes.iter().sum();
    let k = sizes.len();
    let s = sigma.get();
    if n == 0 {
        return Ok(vec![0.0]);
    }
    let base = log_v(n, k, sigma, f, cfg)?;
    let join = log_v(n + 1, k, sigma, f, cfg)? - base;
    let open = log_v(n + 1, k + 1, sigma, f, cfg)? - base;
    let mut w: Vec<f64> = sizes.iter().map(|&m| join + (m as f64 - s).ln()).collect();
    w.push(open);
    Ok(w)
}

/// Draws a partition of `n` elements from the prior by the sequential urn.
pub fn sample_prior_partition<R: Rng + ?Sized>(
    n: usize,
    sigma: StableIndex,
    f: &TiltingFunction,
    rng: &mut R,
    cfg: &QuadratureConfig,
) -> Result<Partition> {
    if n == 0 {
        return domain("cannot sample a partition of zero elements");
    }
    check_pairing(n, sigma, f)?;
    let mut p = Partition { assignments: vec![0], sizes: vec![1] };
    while p.n() < n {
        let w = urn_log_weights(p.sizes(), sigma, f, cfg)?;
        let c = sample_log_categorical(&w, rng).ok_or_else(|| Error::Numerical("urn weights are all zero".into()))?;
        p = p.extended(c);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig(s: f64) -> StableIndex {
        StableIndex::new(s).unwrap()
    }

    fn blocks(b: &[&[usize]]) -> Partition {
        Partition::from_blocks(&b.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn canonical_labels() {
        let p = Partition::from_labels(&[7, 3, 7, 9]).unwrap();
        assert_eq!(p.assignments(), &[0, 1, 0, 2]);
        assert_eq!(p.sizes(), &[2, 1, 1]);
        assert_eq!(p.blocks(), vec![vec![0, 2], vec![1], vec![3]]);
        assert_eq!(p.to_string(), "{{1,3},{2},{4}}");
        assert_eq!(blocks(&[&[3], &[0, 2], &[1]]).assignments(), &[0, 1, 0, 2]);
        assert!(Partition::from_blocks(&[vec![0], vec![0]]).is_err());
        assert!(Partition::from_labels::<usize>(&[]).is_err());
        p.check_invariants().unwrap();
    }

    #[test]
    fn bell_numbers() {
        let bell = [1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
        for n in 1..=8 {
            let all = enumerate_partitions(n).unwrap();
            assert_eq!(all.len(), bell[n - 1]);
            let distinct: std::collections::HashSet<_> = all.iter().cloned().collect();
            assert_eq!(distinct.len(), all.len());
            for p in &all {
                p.check_invariants().unwrap();
            }
        }
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(11).is_err());
    }

    #[test]
    fn gibbs_weight_examples() {
        assert_eq!(log_gibbs_weight(1, sig(0.5)).unwrap(), 0.0);
        assert_relative_eq!(log_gibbs_weight(3, sig(0.5)).unwrap(), 0.75f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(log_gibbs_weight(4, sig(0.25)).unwrap(), 3.609375f64.ln(), epsilon = 1e-14);
        assert!(log_gibbs_weight(0, sig(0.5)).is_err());
        let s = 0.3;
        let direct: f64 = (0..39).map(|i| (1.0 - s + i as f64).ln()).sum();
        assert_relative_eq!(log_gibbs_weight(40, sig(s)).unwrap(), direct, epsilon = 1e-10);
    }

    #[test]
    fn py_closed_examples() {
        let s = sig(0.5);
        let together = blocks(&[&[0, 1]]);
        let apart = blocks(&[&[0], &[1]]);
        let a = log_eppf_py_closed(&together, s, 0.5).unwrap();
        let b = log_eppf_py_closed(&apart, s, 0.5).unwrap();
        assert_relative_eq!(a, (1.0f64 / 3.0).ln(), epsilon = 1e-14);
        assert_relative_eq!(b, (2.0f64 / 3.0).ln(), epsilon = 1e-14);
        assert_relative_eq!(a.exp() + b.exp(), 1.0, epsilon = 1e-14);
        assert!(log_eppf_py_closed(&apart, s, -0.5).is_err());
    }

    #[test]
    fn py_closed_matches_gamma_form() {
        // sigma^K Gamma(theta)/Gamma(theta/sigma) Gamma(theta/sigma+K)/Gamma(theta+n) prod W
        let s = 0.4;
        for theta in [0.3, 1.0, 4.0] {
            for p in enumerate_partitions(5).unwrap() {
                let k = p.k() as f64;
                let w: f64 = p.sizes().iter().map(|&m| ln_gamma(m as f64 - s) - ln_gamma(1.0 - s)).sum();
                let direct = k * s.ln() + ln_gamma(theta) - ln_gamma(theta / s) + ln_gamma(theta / s + k)
                    - ln_gamma(theta + 5.0)
                    + w;
                assert_relative_eq!(log_eppf_py_closed(&p, sig(s), theta).unwrap(), direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dp_closed_examples() {
        assert_relative_eq!(
            log_eppf_dp_closed(&blocks(&[&[0, 1], &[2]]), 1.0).unwrap(),
            (1.0f64 / 6.0).ln(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            log_eppf_dp_closed(&blocks(&[&[0, 1, 2]]), 1.0).unwrap(),
            (1.0f64 / 3.0).ln(),
            epsilon = 1e-14
        );
        let total: f64 =
            enumerate_partitions(3).unwrap().iter().map(|p| log_eppf_dp_closed(p, 1.0).unwrap().exp()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
        assert!(log_eppf_dp_closed(&blocks(&[&[0]]), 0.0).is_err());
    }

    #[test]
    fn vnk_examples() {
        let cfg = QuadratureConfig::default();
        let py = TiltingFunction::Py { theta: 0.5 };
        assert_relative_eq!(log_vnk(2, 1, sig(0.5), &py, &cfg).unwrap(), (2.0f64 / 3.0).ln(), epsilon = 1e-7);
        assert_relative_eq!(
            log_eppf(&blocks(&[&[0, 1]]), sig(0.5), &py, &cfg).unwrap(),
            (1.0f64 / 3.0).ln(),
            epsilon = 1e-12
        );
        assert!(log_vnk(1, 1, sig(0.5), &TiltingFunction::Ns, &cfg).unwrap().abs() < 1e-7);
        let p = blocks(&[&[0, 1], &[2]]);
        let quad = log_eppf_quadrature(&p, sig(0.5), &TiltingFunction::Ngg { tau: 1.0 }, &cfg).unwrap();
        let oracle = log_eppf_ngg_integral(&p, sig(0.5), 1.0, &cfg).unwrap();
        assert!((quad - oracle).abs() < 1e-6, "{quad} vs {oracle}");
        assert!(log_vnk(2, 3, sig(0.5), &py, &cfg).is_err());
        assert!(log_vnk(2, 1, sig(0.5), &TiltingFunction::Py { theta: -0.5 }, &cfg).is_err());
    }

    #[test]
    fn ns_quadrature_matches_closed_form() {
        let cfg = QuadratureConfig::default();
        for s in [0.3, 0.7] {
            for (n, k) in [(1, 1), (3, 2), (6, 1), (6, 6)] {
                let q = log_vnk(n, k, sig(s), &TiltingFunction::Ns, &cfg).unwrap();
                let c = log_vnk_py(n, k, sig(s), 0.0).unwrap();
                assert!((q - c).abs() < 1e-7, "sigma={s} n={n} k={k}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn negative_theta_py_quadrature() {
        let cfg = QuadratureConfig::default();
        let f = TiltingFunction::Py { theta: -0.2 };
        for (n, k) in [(2, 1), (4, 2), (5, 5)] {
            let q = log_vnk(n, k, sig(0.3), &f, &cfg).unwrap();
            let c = log_vnk_py(n, k, sig(0.3), -0.2).unwrap();
            assert!((q - c).abs() < 1e-7, "n={n} k={k}: {q} vs {c}");
        }
    }

    #[test]
    fn ngg_integral_trivial_and_normalized() {
        let cfg = QuadratureConfig::default();
        assert!(log_eppf_ngg_integral(&blocks(&[&[0]]), sig(0.5), 1.0, &cfg).unwrap().abs() < 1e-8);
        let total: f64 = enumerate_partitions(4)
            .unwrap()
            .iter()
            .map(|p| log_eppf_ngg_integral(p, sig(0.5), 1.0, &cfg).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn surplus_integral_edge_cases() {
        let cfg = QuadratureConfig::default().nested();
        // c = 0 is a Beta function.
        assert_relative_eq!(
            log_surplus_integral(0.6, 1.4, f64::NEG_INFINITY, &cfg).unwrap(),
            log_beta(0.6, 2.4),
            epsilon = 1e-14
        );
        // a = 1, m = 0: int_0^1 exp(-c/r) dr = e^-c - c E1(c); at c = 1 this is 0.148495506775922.
        assert_relative_eq!(
            log_surplus_integral(1.0, 0.0, 0.0, &cfg).unwrap(),
            0.148_495_506_775_922f64.ln(),
            epsilon = 1e-9
        );
        // a < 0 converges only thanks to the exponential factor.
        let v = log_surplus_integral(-0.5, 0.5, (0.01f64).ln(), &cfg).unwrap();
        assert!(v.is_finite());
        // Huge c: concentrated against r = 1 and astronomically small.
        let v = log_surplus_integral(0.5, 2.0, (1e4f64).ln(), &cfg).unwrap();
        assert!(v < -1e4 + 1.0 && v > -1e4 - 50.0, "{v}");
    }

    #[test]
    fn urn_weights_sum_to_one() {
        let cfg = QuadratureConfig::default();
        for f in [TiltingFunction::Ns, TiltingFunction::Py { theta: 0.5 }, TiltingFunction::Ngg { tau: 1.0 }] {
            for sizes in [vec![1], vec![2, 1], vec![1, 1, 1, 2]] {
                let w = urn_log_weights(&sizes, sig(0.5), &f, &cfg).unwrap();
                let total: f64 = w.iter().map(|x| x.exp()).sum();
                assert!((total - 1.0).abs() < 1e-6, "{f} {sizes:?}: {total}");
            }
        }
    }

    #[test]
    fn prior_urn_py_pair_frequency() {
        let cfg = QuadratureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = TiltingFunction::Py { theta: 0.5 };
        let draws = 100_000;
        let together =
            (0..draws).filter(|_| sample_prior_partition(2, sig(0.5), &f, &mut rng, &cfg).unwrap().k() == 1).count();
        let freq = together as f64 / draws as f64;
        assert!((freq - 1.0 / 3.0).abs() < 0.01, "{freq}");
        let single = sample_prior_partition(1, sig(0.5), &f, &mut rng, &cfg).unwrap();
        assert_eq!(single.sizes(), &[1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eppf_depends_only_on_block_sizes(
            labels in proptest::collection::vec(0usize..4, 1..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let cfg = QuadratureConfig::default();
            let p = Partition::from_labels(&labels).unwrap();
            let mut order: Vec<usize> = (0..labels.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<usize> = order.iter().map(|&i| labels[i] * 7 + 3).collect();
            let q = Partition::from_labels(&permuted).unwrap();
            let f = TiltingFunction::Py { theta: 0.7 };
            let a = log_eppf(&p, sig(0.4), &f, &cfg).unwrap();
            let b = log_eppf(&q, sig(0.4), &f, &cfg).unwrap();
            let mut sa = p.sizes().to_vec();
            let mut sb = q.sizes().to_vec();
            sa.sort_unstable();
            sb.sort_unstable();
            prop_assert_eq!(sa, sb);
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn canonicalization_is_idempotent(labels in proptest::collection::vec(0usize..6, 1..12)) {
            let p = Partition::from_labels(&labels).unwrap();
            let q = Partition::from_labels(p.assignments()).unwrap();
            prop_assert_eq!(&p, &q);
            prop_assert_eq!(p.sizes().iter().sum::<usize>(), labels.len());
            prop_assert!(p.check_invariants().is_ok());
        }
    }
}
