// Tilting functions h(t) selecting a member of the sigma-stable
// Poisson-Kingman class. The mixing law of the total mass T is
// h(t) f_sigma(t) / Z_h.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::quadrature::{log_integrate_real_line, QuadratureConfig};
use crate::stable::{log_stable_density_at_log, StableIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TiltingFunction {
    /// Normalised stable process, h = 1.
    Ns,
    /// Normalised generalised gamma, h = exp(tau - tau^(1/sigma) t).
    Ngg { tau: f64 },
    /// Pitman-Yor, h = Gamma(theta+1)/Gamma(theta/sigma+1) t^(-theta).
    Py { theta: f64 },
    /// Gamma-tilted, h = t^(-theta) exp(-eta t).
    Gt { theta: f64, eta: f64 },
}

impl fmt::Display for TiltingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TiltingFunction::Ns => write!(f, "NS"),
            TiltingFunction::Ngg { tau } => write!(f, "NGG(tau={tau})"),
            TiltingFunction::Py { theta } => write!(f, "PY(theta={theta})"),
            TiltingFunction::Gt { theta, eta } => write!(f, "GT(theta={theta}, eta={eta})"),
        }
    }
}

impl TiltingFunction {
    /// Checks the hyperparameters against the stability index they are
    /// paired with. PY with `theta = -sigma` is accepted here; it is only
    /// meaningful for a single observation.
    pub fn validate(&self, sigma: StableIndex) -> Result<()> {
        let s = sigma.get();
        match *self {
            TiltingFunction::Ns => Ok(()),
            TiltingFunction::Ngg { tau } => {
                if tau > 0.0 && tau.is_finite() {
                    Ok(())
                } else {
                    domain(format!("NGG requires tau > 0, got {tau}"))
                }
            }
            TiltingFunction::Py { theta } => {
                if theta.is_finite() && theta >= -s {
                    Ok(())
                } else {
                    domain(format!("PY requires theta >= -sigma = {}, got {theta}", -s))
                }
            }
            TiltingFunction::Gt { theta, eta } => {
                if !(theta.is_finite() && eta.is_finite()) || eta < 0.0 {
                    domain(format!("GT requires finite theta and eta >= 0, got ({theta}, {eta})"))
                } else if eta == 0.0 && theta <= -s {
                    domain(format!("GT with eta = 0 requires theta > -sigma = {}, got {theta}", -s))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Whether `Z_h = 1` holds analytically for every valid hyperparameter.
    pub fn is_self_normalized(&self) -> bool {
        !matches!(self, TiltingFunction::Gt { .. })
    }

    /// `log h(t)` evaluated from `ln t`, never forming `t` where it could
    /// overflow. Assumes [`validate`](Self::validate) has passed.
    pub fn log_h_at_log(&self, ln_t: f64, sigma: StableIndex) -> f64 {
        let s = sigma.get();
        match *self {
            TiltingFunction::Ns => 0.0,
            TiltingFunction::Ngg { tau } => tau - (ln_t + tau.ln() / s).exp(),
            TiltingFunction::Py { theta } => {
                if theta == 0.0 {
                    0.0
                } else {
                    py_log_constant(theta, s) - theta * ln_t
                }
            }
            TiltingFunction::Gt { theta, eta } => {
                let tilt = if eta == 0.0 { 0.0 } else { eta * ln_t.exp() };
                -theta * ln_t - tilt
            }
        }
    }

    /// Stable hash key of the variant and its hyperparameter bits.
    pub fn cache_key(&self) -> (u8, u64, u64) {
        match *self {
            TiltingFunction::Ns => (0, 0, 0),
            TiltingFunction::Ngg { tau } => (1, tau.to_bits(), 0),
            TiltingFunction::Py { theta } => (2, theta.to_bits(), 0),
            TiltingFunction::Gt { theta, eta } => (3, theta.to_bits(), eta.to_bits()),
        }
    }
}

/// `log Gamma(theta+1) - log Gamma(theta/sigma+1)`; both arguments are
/// positive whenever theta > -sigma.
fn py_log_constant(theta: f64, sigma: f64) -> f64 {
    ln_gamma(theta + 1.0) - ln_gamma(theta / sigma + 1.0)
}

pub fn log_h(f: &TiltingFunction, t: f64, sigma: StableIndex) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("tilting function needs t > 0, got {t}"));
    }
    f.validate(sigma)?;
    // With t in hand the exponential tilts are formed from t directly.
    Ok(match *f {
        TiltingFunction::Ngg { tau } => tau - tau.powf(1.0 / sigma.get()) * t,
        TiltingFunction::Gt { theta, eta } => {
            let power = if theta == 0.0 { 0.0 } else { -theta * t.ln() };
            power - eta * t
        }
        _ => f.log_h_at_log(t.ln(), sigma),
    })
}

/// `log Z_h = log int_0^inf h(t) f_sigma(t) dt`. The gamma tilt goes through
/// the Laplace transform `E exp(-x T) = exp(-x^sigma)`, the other variants
/// through [`log_normalizer_by_density`].
pub fn log_normalizer(f: &TiltingFunction, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    f.validate(sigma)?;
    match *f {
        TiltingFunction::Ns => Ok(0.0),
        TiltingFunction::Gt { theta, eta } => log_gamma_tilt_normalizer(theta, eta, sigma.get(), cfg),
        _ => log_normalizer_by_density(f, sigma, cfg),
    }
}

/// `log E[T^-theta exp(-eta T)]` from the Laplace transform:
/// for theta > 0, `T^-theta = Gamma(theta)^-1 int x^(theta-1) e^(-xT) dx`;
/// for theta = -a < 0, `T^a = a/Gamma(1-a) int x^(-a-1) (1 - e^(-xT)) dx`.
/// Both integrals run over `y = ln x`.
fn log_gamma_tilt_normalizer(theta: f64, eta: f64, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let eta_s = if eta == 0.0 { 0.0 } else { eta.powf(s) };
    if theta == 0.0 {
        return Ok(-eta_s);
    }
    if eta == 0.0 {
        return Ok(ln_gamma(1.0 + theta / s) - ln_gamma(1.0 + theta));
    }
    // (x + eta)^s - eta^s without cancellation for small x.
    let softplus = |u: f64| if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
    let increment = |y: f64| eta_s * (s * softplus(y - eta.ln())).exp_m1();
    if theta > 0.0 {
        let hint = (theta / s).ln() / s;
        let v = log_integrate_real_line(|y| theta * y - eta_s - increment(y), hint, cfg)?;
        Ok(v - ln_gamma(theta))
    } else {
        let a = -theta;
        let hint = eta.ln();
        let v = log_integrate_real_line(|y| -a * y - eta_s + (-(-increment(y)).exp_m1()).ln(), hint, cfg)?;
        Ok(v + a.ln() - ln_gamma(1.0 - a))
    }
}

/// `log Z_h` integrated over `x = ln t` against the stable density.
pub fn log_normalizer_by_density(f: &TiltingFunction, sigma: StableIndex, cfg: &QuadratureConfig) -> Result<f64> {
    f.validate(sigma)?;
    if matches!(f, TiltingFunction::Ns) {
        return Ok(0.0);
    }
    let density_cfg = cfg.nested();
    let mut failure = None;
    let value = log_integrate_real_line(
        |x| match log_stable_density_at_log(x, sigma, &density_cfg) {
            Ok(lf) => lf + x + f.log_h_at_log(x, sigma),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        0.0,
        cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    value
}
