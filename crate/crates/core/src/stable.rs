// Positive sigma-stable law: Zolotarev's function and the density f_sigma,
// normalised so that E[exp(-lambda T)] = exp(-lambda^sigma).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::quadrature::{log_integrate_with_peak, QuadratureConfig};

/// Stability index, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StableIndex(f64);

impl StableIndex {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma < 1.0 {
            Ok(StableIndex(sigma))
        } else {
            domain(format!("stable index must lie in (0, 1), got {sigma}"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for StableIndex {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        StableIndex::new(v)
    }
}

impl From<StableIndex> for f64 {
    fn from(s: StableIndex) -> f64 {
        s.0
    }
}

/// Distance from 0 below which Zolotarev's function is replaced by its limit.
pub const ZOLOTAREV_LIMIT_EPS: f64 = 1e-10;
/// Margin excluded at both ends of (0, pi) by the density quadrature.
pub const ENDPOINT_MARGIN: f64 = 1e-12;

/// `sin(pi * x)`, exactly zero at integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r > 1.0 {
        return -sin_pi(r - 1.0);
    }
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else {
        (PI * r).sin()
    }
}

// No reflection through PI - x: that would add the rounding error of PI,
// while libm's sin is accurate for arguments near pi.
fn ln_sin(x: f64) -> f64 {
    x.sin().ln()
}

/// Log of Zolotarev's function
/// `A(z) = [sin(sz)/sin(z)]^(1/(1-s)) * sin((1-s)z)/sin(sz)` on (0, pi).
pub fn log_zolotarev_a(z: f64, sigma: StableIndex) -> Result<f64> {
    if !(z > 0.0 && z < PI) {
        return domain(format!("Zolotarev argument must lie in (0, pi), got {z}"));
    }
    let s = sigma.get();
    if z < ZOLOTAREV_LIMIT_EPS {
        return Ok(s / (1.0 - s) * s.ln() + (1.0 - s).ln());
    }
    Ok((ln_sin(s * z) - ln_sin(z)) / (1.0 - s) + ln_sin((1.0 - s) * z) - ln_sin(s * z))
}

pub fn zolotarev_a(z: f64, sigma: StableIndex) -> Result<f64> {
    let la = log_zolotarev_a(z, sigma)?;
    let s = sigma.get();
    if z < ZOLOTAREV_LIMIT_EPS {
        return Ok(la.exp());
    }
    // Linear-space evaluation avoids the exp(log) loss for large A.
    let a = (s * z).sin() / z.sin();
    let v = a.powf(1.0 / (1.0 - s)) * ((1.0 - s) * z).sin() / (s * z).sin();
    Ok(if v.is_finite() && v > 0.0 { v } else { la.exp() })
}

/// Closed-form density of the positive 1/2-stable law,
/// `t^(-3/2) exp(-1/(4t)) / (2 sqrt(pi))`.
pub fn half_stable_density(t: f64) -> Result<f64> {
    log_half_stable_density(t).map(f64::exp)
}

pub fn log_half_stable_density(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("stable density needs t > 0, got {t}"));
    }
    Ok(-1.5 * t.ln() - 0.25 / t - (2.0 * PI.sqrt()).ln())
}

/// Rounding-error bound (relative) above which a series result is rejected.
const SERIES_ROUNDING_LIMIT: f64 = 1e-9;

/// Log density from the alternating series
/// `(1/pi) sum_j (-1)^(j+1)/j! sin(pi s j) Gamma(s j + 1) t^(-s j - 1)`.
///
/// Truncation uses the sine-free bound `Gamma(sj+1)/j! t^(-sj-1)/pi` of
/// each term, so terms that vanish because `sin(pi s j) = 0` cannot stop the
/// sum early. Besides running out of terms, the series is rejected when
/// cancellation between terms has eaten the precision of the partial sum.
pub fn log_stable_density_series(t: f64, sigma: StableIndex, max_terms: usize, term_tol: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("stable density needs t > 0, got {t}"));
    }
    series_at_log(t.ln(), sigma, max_terms, term_tol)
}

fn series_at_log(ln_t: f64, sigma: StableIndex, max_terms: usize, term_tol: f64) -> Result<f64> {
    let t = ln_t.exp();
    let s = sigma.get();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut prev_bound = f64::INFINITY;
    // Terms are scaled by the first bound so huge or tiny t cannot underflow.
    let log_ref = ln_gamma(s + 1.0) - (s + 1.0) * ln_t - PI.ln();
    for j in 1..=max_terms {
        let jf = j as f64;
        let log_bound = ln_gamma(s * jf + 1.0) - ln_gamma(jf + 1.0) - (s * jf + 1.0) * ln_t - PI.ln();
        let bound = (log_bound - log_ref).exp();
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * sin_pi(s * jf) * bound;
        sum += term;
        abs_sum += term.abs();
        if j >= 2 && bound < prev_bound && bound <= term_tol * sum.abs() {
            if !(sum > 0.0) || f64::EPSILON * abs_sum > SERIES_ROUNDING_LIMIT * sum {
                return Err(Error::SeriesCancellation { t, bound: f64::EPSILON * abs_sum / sum.abs() });
            }
            return Ok(sum.ln() + log_ref);
        }
        prev_bound = bound;
    }
    Err(Error::SeriesNotConverged { t, terms: max_terms })
}

/// Log density by adaptive quadrature of Zolotarev's integral
/// representation over z in (0, pi).
pub fn log_stable_density_quadrature(t: f64, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("stable density needs finite t > 0, got {t}"));
    }
    quadrature_at_log(t.ln(), sigma, cfg)
}

fn quadrature_at_log(ln_t: f64, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    let s = sigma.get();
    let log_c = -s / (1.0 - s) * ln_t;
    let log_int = log_zolotarev_kernel_integral(log_c, sigma, cfg)?;
    Ok((s / (1.0 - s)).ln() - PI.ln() - ln_t / (1.0 - s) + log_int)
}

/// `log int_0^pi A(z) exp(-c A(z)) dz` for `c = exp(log_c)`.
pub(crate) fn log_zolotarev_kernel_integral(log_c: f64, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    let lo = ENDPOINT_MARGIN;
    let hi = PI - ENDPOINT_MARGIN;
    let log_a0 = log_zolotarev_a(lo, sigma)?;
    let integrand = |z: f64| {
        let la = log_zolotarev_a(z, sigma).unwrap_or(f64::NEG_INFINITY);
        la - (log_c + la).exp()
    };
    // log A - c A peaks where A = 1/c; A increases from A(0+) to infinity.
    let (peak_z, peak_log) = if log_a0 + log_c >= 0.0 {
        // The true maximum sits at z = 0+, but rounding in A can make
        // nearby points look larger when c is huge; take the largest probe.
        let mut best = log_a0 - (log_c + log_a0).exp();
        for k in 0..48 {
            best = best.max(integrand(lo + (2.0f64).powi(-k)));
        }
        (lo, best)
    } else {
        let target = -log_c;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if log_zolotarev_a(m, sigma)? < target {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        let z = 0.5 * (a + b);
        (z, integrand(z).max(-log_c - 1.0))
    };
    // Near the peak the exponent c A(z) is of size max(1, c A(0+)); rounding
    // in A makes the integrand noisy at that relative scale, so the
    // attainable relative accuracy is capped accordingly.
    let exponent = (log_c + log_a0).exp().max(1.0);
    let cfg = QuadratureConfig { rel_tol: cfg.rel_tol.max(64.0 * f64::EPSILON * exponent), ..*cfg };
    log_integrate_with_peak(integrand, lo, hi, peak_z, peak_log, &cfg)
}

pub const SERIES_MAX_TERMS: usize = 200;
pub const SERIES_TERM_TOL: f64 = 1e-12;

/// Log density choosing the series where it is reliable (large t) and the
/// quadrature otherwise.
pub fn log_stable_density(t: f64, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("stable density needs finite t > 0, got {t}"));
    }
    log_stable_density_at_log(t.ln(), sigma, cfg)
}

/// [`log_stable_density`] taking `ln t`, usable far outside the range where
/// `t` itself is representable.
pub fn log_stable_density_at_log(ln_t: f64, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    if !ln_t.is_finite() {
        return domain(format!("stable density needs finite ln t, got {ln_t}"));
    }
    match series_at_log(ln_t, sigma, SERIES_MAX_TERMS, SERIES_TERM_TOL) {
        Ok(v) => Ok(v),
        Err(Error::SeriesNotConverged { .. }) | Err(Error::SeriesCancellation { .. }) => {
            quadrature_at_log(ln_t, sigma, cfg)
        }
        Err(e) => Err(e),
    }
}

/// Smallest t (to ~1e-6 relative) for which the series with the default
/// truncation settings is accepted; below it the quadrature is used.
pub fn series_min_t(sigma: StableIndex) -> f64 {
    let ok = |t: f64| log_stable_density_series(t, sigma, SERIES_MAX_TERMS, SERIES_TERM_TOL).is_ok();
    let (mut lo, mut hi) = (-20.0f64, 20.0f64);
    if ok(lo.exp()) {
        return lo.exp();
    }
    if !ok(hi.exp()) {
        return f64::INFINITY;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if ok(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.exp()
}
