// Observation models F with base measures H0 for the mixture components.
//
// Gamma distributions use the shape/rate convention throughout. The
// Normal-Inverse-Wishart uses Sigma ~ Inv-Wishart_nu0(S0) (scale matrix
// S0, mean S0/(nu0-d-1)) and mu | Sigma ~ N(mu0, Sigma/r0).

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::quadrature::{log_integrate_real_line, QuadratureConfig};
use crate::slice::{slice_step, SliceConfig};
use crate::stats::ClusterStats;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LikelihoodModel {
    /// Normal with known common precision, Normal prior on the mean.
    UnivConjI { mu0: f64, tau0: f64, tau_common: f64 },
    /// Normal-Gamma: tau ~ Gamma(alpha0, beta0), mu | tau ~ N(mu0, 1/(tau0 tau)).
    UnivConjII { mu0: f64, tau0: f64, alpha0: f64, beta0: f64 },
    /// mu = log(phi), phi ~ Gamma(a0, b0); tau ~ Gamma(alpha0, beta0).
    UnivNonConj { a0: f64, b0: f64, alpha0: f64, beta0: f64 },
    /// Multivariate Normal with Normal-Inverse-Wishart prior.
    MvNiw { mu0: Vec<f64>, r0: f64, nu0: f64, s0: Vec<Vec<f64>> },
}

/// Parameters of one mixture component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterParams {
    Mean { mu: f64 },
    MeanPrecision { mu: f64, tau: f64 },
    MvNormal(MvNormalParams),
}

/// Mean and covariance with the Cholesky factor of the covariance kept
/// alongside for likelihood evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MvNormalRaw", into = "MvNormalRaw")]
pub struct MvNormalParams {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MvNormalRaw {
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

impl TryFrom<MvNormalRaw> for MvNormalParams {
    type Error = Error;
    fn try_from(raw: MvNormalRaw) -> Result<Self> {
        let d = raw.mu.len();
        let sigma = matrix_from_rows(&raw.sigma, d)?;
        MvNormalParams::new(DVector::from_vec(raw.mu), sigma)
    }
}

impl From<MvNormalParams> for MvNormalRaw {
    fn from(p: MvNormalParams) -> Self {
        MvNormalRaw { mu: p.mu.iter().copied().collect(), sigma: rows_of(&p.sigma) }
    }
}

impl MvNormalParams {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return domain("covariance shape does not match the mean");
        }
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?
            .l();
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(MvNormalParams { mu, sigma, chol, log_det })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mu.len();
        let diff = DVector::from_iterator(d, x.iter().zip(self.mu.iter()).map(|(a, b)| a - b));
        let z = self.chol.solve_lower_triangular(&diff).expect("Cholesky factor has a positive diagonal");
        -0.5 * (d as f64 * LN_2PI + self.log_det + z.norm_squared())
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return domain(format!("expected a {d}x{d} matrix"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Student-t log density with `nu` degrees of freedom, location `loc`,
/// squared scale `scale2`.
fn log_student_t(x: f64, nu: f64, loc: f64, scale2: f64) -> f64 {
    let z2 = (x - loc) * (x - loc) / scale2;
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * PI * scale2).ln()
        - 0.5 * (nu + 1.0) * (z2 / nu).ln_1p()
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters").sample(rng)
}

fn normal_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Posterior mean and precision of the Conj I mean parameter.
fn conj_i_posterior(mu0: f64, tau0: f64, tau_c: f64, stats: &ClusterStats) -> (f64, f64) {
    let prec = tau0 + stats.n() as f64 * tau_c;
    let mean = (tau0 * mu0 + tau_c * if stats.n() > 0 { stats.sum(0) } else { 0.0 }) / prec;
    (mean, prec)
}

/// Normal-Gamma posterior (mu_n, tau_n, alpha_n, beta_n).
fn conj_ii_posterior(mu0: f64, tau0: f64, alpha0: f64, beta0: f64, stats: &ClusterStats) -> (f64, f64, f64, f64) {
    let n = stats.n() as f64;
    if stats.n() == 0 {
        return (mu0, tau0, alpha0, beta0);
    }
    let xbar = stats.sum(0) / n;
    let scatter = stats.scatter()[0];
    let tau_n = tau0 + n;
    let mu_n = (tau0 * mu0 + n * xbar) / tau_n;
    let beta_n = beta0 + 0.5 * scatter + tau0 * n * (xbar - mu0).powi(2) / (2.0 * tau_n);
    (mu_n, tau_n, alpha0 + 0.5 * n, beta_n)
}

struct NiwPosterior {
    mu: DVector<f64>,
    kappa: f64,
    nu: f64,
    lambda: DMatrix<f64>,
}

fn log_multigamma(a: f64, d: usize) -> f64 {
    let df = d as f64;
    0.25 * df * (df - 1.0) * PI.ln() + (0..d).map(|j| ln_gamma(a - 0.5 * j as f64)).sum::<f64>()
}

impl LikelihoodModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            LikelihoodModel::UnivConjI { mu0, tau0, tau_common } => {
                if !mu0.is_finite() {
                    return domain("mu0 must be finite");
                }
                positive("tau0", *tau0)?;
                positive("tau_common", *tau_common)
            }
            LikelihoodModel::UnivConjII { mu0, tau0, alpha0, beta0 } => {
                if !mu0.is_finite() {
                    return domain("mu0 must be finite");
                }
                positive("tau0", *tau0)?;
                positive("alpha0", *alpha0)?;
                positive("beta0", *beta0)
            }
            LikelihoodModel::UnivNonConj { a0, b0, alpha0, beta0 } => {
                positive("a0", *a0)?;
                positive("b0", *b0)?;
                positive("alpha0", *alpha0)?;
                positive("beta0", *beta0)
            }
            LikelihoodModel::MvNiw { mu0, r0, nu0, s0 } => {
                let d = mu0.len();
                if d == 0 || mu0.iter().any(|v| !v.is_finite()) {
                    return domain("mu0 must be a nonempty finite vector");
                }
                positive("r0", *r0)?;
                if !(*nu0 > d as f64 - 1.0) {
                    return domain(format!("nu0 must exceed d - 1 = {}, got {nu0}", d - 1));
                }
                let s = matrix_from_rows(s0, d)?;
                if (&s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
                    return domain("S0 must be symmetric");
                }
                if Cholesky::new(s).is_none() {
                    return domain("S0 must be positive definite");
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LikelihoodModel::MvNiw { mu0, .. } => mu0.len(),
            _ => 1,
        }
    }

    pub fn is_conjugate(&self) -> bool {
        !matches!(self, LikelihoodModel::UnivNonConj { .. })
    }

    pub fn empty_stats(&self) -> ClusterStats {
        ClusterStats::new(self.dim())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return domain(format!("observation has dimension {}, model expects {}", x.len(), self.dim()));
        }
        Ok(())
    }

    fn niw_posterior(&self, stats: &ClusterStats) -> NiwPosterior {
        let LikelihoodModel::MvNiw { mu0, r0, nu0, s0 } = self else {
            unreachable!("niw_posterior on a non-NIW model")
        };
        let d = mu0.len();
        let m0 = DVector::from_column_slice(mu0);
        let lambda0 = DMatrix::from_fn(d, d, |i, j| s0[i][j]);
        let n = stats.n() as f64;
        if stats.n() == 0 {
            return NiwPosterior { mu: m0, kappa: *r0, nu: *nu0, lambda: lambda0 };
        }
        let xbar = DVector::from_vec(stats.mean());
        let scatter = DMatrix::from_row_slice(d, d, &stats.scatter());
        let kappa = r0 + n;
        let diff = &xbar - &m0;
        let lambda = lambda0 + scatter + (r0 * n / kappa) * &diff * diff.transpose();
        let mu = (m0 * *r0 + xbar * n) / kappa;
        NiwPosterior { mu, kappa, nu: nu0 + n, lambda }
    }

    /// Closed-form `log F(x | cluster data)` for the conjugate variants;
    /// with empty statistics this is the prior predictive.
    pub fn log_pred_conjugate(&self, x: &[f64], stats: &ClusterStats) -> Result<f64> {
        self.check_dim(x)?;
        match *self {
            LikelihoodModel::UnivConjI { mu0, tau0, tau_common } => {
                let (mean, prec) = conj_i_posterior(mu0, tau0, tau_common, stats);
                Ok(log_normal(x[0], mean, 1.0 / prec + 1.0 / tau_common))
            }
            LikelihoodModel::UnivConjII { mu0, tau0, alpha0, beta0 } => {
                let (mu_n, tau_n, alpha_n, beta_n) = conj_ii_posterior(mu0, tau0, alpha0, beta0, stats);
                let scale2 = beta_n * (tau_n + 1.0) / (alpha_n * tau_n);
                Ok(log_student_t(x[0], 2.0 * alpha_n, mu_n, scale2))
            }
            LikelihoodModel::UnivNonConj { .. } => {
                Err(Error::Unsupported("the non-conjugate model has no closed-form predictive".into()))
            }
            LikelihoodModel::MvNiw { .. } => {
                let post = self.niw_posterior(stats);
                let d = x.len();
                let df = post.nu - d as f64 + 1.0;
                let shape = &post.lambda * ((post.kappa + 1.0) / (post.kappa * df));
                let chol = Cholesky::new(shape)
                    .ok_or_else(|| Error::Numerical("predictive scale is not positive definite".into()))?;
                let diff = DVector::from_column_slice(x) - &post.mu;
                let z = chol.l().solve_lower_triangular(&diff).expect("positive diagonal");
                let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let df_d = d as f64;
                Ok(ln_gamma(0.5 * (df + df_d))
                    - ln_gamma(0.5 * df)
                    - 0.5 * df_d * (df * PI).ln()
                    - 0.5 * log_det
                    - 0.5 * (df + df_d) * (z.norm_squared() / df).ln_1p())
            }
        }
    }

    /// Closed-form log marginal likelihood of all observations summarised in
    /// `stats` (conjugate variants).
    pub fn log_marginal(&self, stats: &ClusterStats) -> Result<f64> {
        let n = stats.n() as f64;
        if stats.n() == 0 {
            return Ok(0.0);
        }
        match *self {
            LikelihoodModel::UnivConjI { mu0, tau0, tau_common } => {
                // x ~ N(mu0 1, I/tau_c + 11^T/tau0), via Sherman-Morrison.
                let xbar = stats.sum(0) / n;
                let scatter = stats.scatter()[0];
                let prec = tau0 + n * tau_common;
                Ok(-0.5 * n * LN_2PI + 0.5 * n * tau_common.ln() + 0.5 * (tau0 / prec).ln()
                    - 0.5 * tau_common * scatter
                    - 0.5 * tau0 * n * tau_common / prec * (xbar - mu0).powi(2))
            }
            LikelihoodModel::UnivConjII { mu0, tau0, alpha0, beta0 } => {
                let (_, tau_n, alpha_n, beta_n) = conj_ii_posterior(mu0, tau0, alpha0, beta0, stats);
                Ok(ln_gamma(alpha_n) - ln_gamma(alpha0) + alpha0 * beta0.ln() - alpha_n * beta_n.ln()
                    + 0.5 * (tau0 / tau_n).ln()
                    - 0.5 * n * (2.0 * PI).ln())
            }
            LikelihoodModel::UnivNonConj { .. } => {
                Err(Error::Unsupported("the non-conjugate model has no closed-form marginal likelihood".into()))
            }
            LikelihoodModel::MvNiw { r0, nu0, ref s0, .. } => {
                let d = self.dim();
                let post = self.niw_posterior(stats);
                let lambda0 = matrix_from_rows(s0, d)?;
                let logdet = |m: DMatrix<f64>| -> Result<f64> {
                    let c = Cholesky::new(m).ok_or_else(|| Error::Numerical("matrix not positive definite".into()))?;
                    Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
                };
                let df = d as f64;
                Ok(-0.5 * n * df * PI.ln() + log_multigamma(0.5 * post.nu, d) - log_multigamma(0.5 * nu0, d)
                    + 0.5 * nu0 * logdet(lambda0)?
                    - 0.5 * post.nu * logdet(post.lambda)?
                    + 0.5 * df * (r0 / post.kappa).ln())
            }
        }
    }

    /// `log int F(x | y) H0(dy)`. Closed form for the conjugate variants; for
    /// the non-conjugate model the precision is integrated analytically and
    /// the mean by quadrature.
    pub fn log_prior_predictive(&self, x: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
        match *self {
            LikelihoodModel::UnivNonConj { a0, b0, alpha0, beta0 } => {
                self.check_dim(x)?;
                let x = x[0];
                let log_prior_norm = a0 * b0.ln() - ln_gamma(a0);
                let scale2 = beta0 / alpha0;
                log_integrate_real_line(
                    |mu| {
                        let lp = log_prior_norm + a0 * mu - b0 * mu.exp();
                        if lp.is_nan() {
                            f64::NEG_INFINITY
                        } else {
                            lp + log_student_t(x, 2.0 * alpha0, mu, scale2)
                        }
                    },
                    x.clamp(-700.0, 700.0),
                    cfg,
                )
            }
            _ => self.log_pred_conjugate(x, &self.empty_stats()),
        }
    }

    /// `log F(x | params)`.
    pub fn log_lik(&self, x: &[f64], p: &ClusterParams) -> Result<f64> {
        self.check_dim(x)?;
        match (self, p) {
            (LikelihoodModel::UnivConjI { tau_common, .. }, ClusterParams::Mean { mu }) => {
                Ok(log_normal(x[0], *mu, 1.0 / tau_common))
            }
            (
                LikelihoodModel::UnivConjII { .. } | LikelihoodModel::UnivNonConj { .. },
                ClusterParams::MeanPrecision { mu, tau },
            ) => Ok(log_normal(x[0], *mu, 1.0 / tau)),
            (LikelihoodModel::MvNiw { .. }, ClusterParams::MvNormal(m)) => {
                if m.mu.len() != x.len() {
                    return domain("parameter dimension does not match the observation");
                }
                Ok(m.log_density(x))
            }
            _ => domain(format!("parameters {p:?} do not belong to this model")),
        }
    }

    /// Draw from H0.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterParams {
        self.sample_posterior(&self.empty_stats(), None, rng).expect("prior draws cannot fail")
    }

    /// Draw the component parameters given the summarised cluster data.
    /// Conjugate variants sample the exact posterior. The non-conjugate
    /// model performs one Gibbs cycle (slice-sampled mean, Gamma precision)
    /// started from `prev`, or an exact prior draw when the cluster is empty.
    pub fn sample_posterior<R: Rng + ?Sized>(
        &self,
        stats: &ClusterStats,
        prev: Option<&ClusterParams>,
        rng: &mut R,
    ) -> Result<ClusterParams> {
        match *self {
            LikelihoodModel::UnivConjI { mu0, tau0, tau_common } => {
                let (mean, prec) = conj_i_posterior(mu0, tau0, tau_common, stats);
                Ok(ClusterParams::Mean { mu: mean + normal_draw(rng) / prec.sqrt() })
            }
            LikelihoodModel::UnivConjII { mu0, tau0, alpha0, beta0 } => {
                let (mu_n, tau_n, alpha_n, beta_n) = conj_ii_posterior(mu0, tau0, alpha0, beta0, stats);
                let tau = gamma_draw(alpha_n, beta_n, rng);
                Ok(ClusterParams::MeanPrecision { mu: mu_n + normal_draw(rng) / (tau_n * tau).sqrt(), tau })
            }
            LikelihoodModel::UnivNonConj { a0, b0, alpha0, beta0 } => {
                if stats.n() == 0 {
                    let phi = gamma_draw(a0, b0, rng).max(f64::MIN_POSITIVE);
                    return Ok(ClusterParams::MeanPrecision { mu: phi.ln(), tau: gamma_draw(alpha0, beta0, rng) });
                }
                let (mu_start, tau) = match prev {
                    Some(ClusterParams::MeanPrecision { mu, tau }) => (*mu, *tau),
                    _ => (
                        (stats.sum(0) / stats.n() as f64).max(f64::MIN_POSITIVE).ln().max(-700.0),
                        gamma_draw(alpha0, beta0, rng),
                    ),
                };
                let n = stats.n() as f64;
                let (sx, sxx) = (stats.sum(0), stats.cross(0, 0));
                let log_target = |mu: f64| a0 * mu - b0 * mu.exp() - 0.5 * tau * (n * mu * mu - 2.0 * mu * sx);
                let start = if log_target(mu_start).is_finite() {
                    mu_start
                } else {
                    // Fall back to the mode of the prior on mu, log(a0/b0).
                    (a0 / b0).ln()
                };
                let mu = slice_step(log_target, start, &SliceConfig::default(), rng)?;
                let ss = (sxx - 2.0 * mu * sx + n * mu * mu).max(0.0);
                let tau = gamma_draw(alpha0 + 0.5 * n, beta0 + 0.5 * ss, rng);
                Ok(ClusterParams::MeanPrecision { mu, tau })
            }
            LikelihoodModel::MvNiw { .. } => {
                let post = self.niw_posterior(stats);
                let d = post.mu.len();
                // Sigma ~ IW(nu, Lambda): W = Sigma^-1 ~ Wishart(nu, Lambda^-1) by Bartlett.
                let lambda_inv = post
                    .lambda
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Numerical("posterior scale is singular".into()))?;
                let l = Cholesky::new(lambda_inv)
                    .ok_or_else(|| Error::Numerical("posterior scale is not positive definite".into()))?
                    .l();
                let mut a = DMatrix::zeros(d, d);
                for i in 0..d {
                    let chi = ChiSquared::new(post.nu - i as f64).expect("nu > d - 1");
                    a[(i, i)] = chi.sample(rng).sqrt();
                    for j in 0..i {
                        a[(i, j)] = normal_draw(rng);
                    }
                }
                let la = l * a;
                let w = &la * la.transpose();
                let sigma = w.try_inverse().ok_or_else(|| Error::Numerical("Wishart draw is singular".into()))?;
                let sigma = (&sigma + sigma.transpose()) * 0.5;
                let chol = Cholesky::new(sigma.clone() / post.kappa)
                    .ok_or_else(|| Error::Numerical("covariance draw is not positive definite".into()))?;
                let z = DVector::from_fn(d, |_, _| normal_draw(rng));
                let mu = &post.mu + chol.l() * z;
                Ok(ClusterParams::MvNormal(MvNormalParams::new(mu, sigma)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats1(xs: &[f64]) -> ClusterStats {
        ClusterStats::from_data(1, xs.iter().map(std::slice::from_ref))
    }

    fn conj_ii() -> LikelihoodModel {
        LikelihoodModel::UnivConjII { mu0: 0.5, tau0: 0.7, alpha0: 2.0, beta0: 1.5 }
    }

    fn niw2() -> LikelihoodModel {
        LikelihoodModel::MvNiw { mu0: vec![0.0, 1.0], r0: 0.5, nu0: 5.0, s0: vec![vec![2.0, 0.3], vec![0.3, 1.0]] }
    }

    #[test]
    fn log_lik_examples() {
        let m = LikelihoodModel::UnivConjII { mu0: 0.0, tau0: 1.0, alpha0: 1.0, beta0: 1.0 };
        let p = ClusterParams::MeanPrecision { mu: 2.0, tau: 1.0 };
        assert_relative_eq!(m.log_lik(&[2.0], &p).unwrap(), -0.5 * LN_2PI, epsilon = 1e-15);
        assert_relative_eq!(m.log_lik(&[3.0], &p).unwrap(), -0.5 * LN_2PI - 0.5, epsilon = 1e-15);
        let mv = niw2();
        let q = ClusterParams::MvNormal(
            MvNormalParams::new(DVector::from_vec(vec![1.0, -1.0]), DMatrix::identity(2, 2)).unwrap(),
        );
        assert_relative_eq!(mv.log_lik(&[1.0, -1.0], &q).unwrap(), -LN_2PI, epsilon = 1e-15);
        assert!(mv.log_lik(&[1.0], &q).is_err());
        assert!(m.log_lik(&[1.0], &q).is_err());
    }

    #[test]
    fn conj_i_predictive_examples() {
        let m = LikelihoodModel::UnivConjI { mu0: 0.0, tau0: 1.0, tau_common: 1.0 };
        assert_relative_eq!(
            m.log_pred_conjugate(&[1.0], &stats1(&[2.0])).unwrap(),
            log_normal(1.0, 1.0, 1.5),
            epsilon = 1e-15
        );
        let m = LikelihoodModel::UnivConjI { mu0: 0.3, tau0: 0.25, tau_common: 2.0 };
        assert_relative_eq!(
            m.log_pred_conjugate(&[1.0], &m.empty_stats()).unwrap(),
            log_normal(1.0, 0.3, 4.0 + 0.5),
            epsilon = 1e-15
        );
        let nc = LikelihoodModel::UnivNonConj { a0: 1.0, b0: 1.0, alpha0: 1.0, beta0: 1.0 };
        assert!(matches!(nc.log_pred_conjugate(&[0.0], &nc.empty_stats()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn conj_i_predictive_matches_quadrature() {
        let m = LikelihoodModel::UnivConjI { mu0: 0.4, tau0: 0.3, tau_common: 1.7 };
        let data = [0.1, -0.8, 1.3];
        let cfg = QuadratureConfig::default();
        let joint = |xs: &[f64]| {
            integrate(
                |mu: f64| {
                    let lp = log_normal(mu, 0.4, 1.0 / 0.3);
                    (lp + xs.iter().map(|&x| log_normal(x, mu, 1.0 / 1.7)).sum::<f64>()).exp()
                },
                -30.0,
                30.0,
                &cfg,
            )
            .unwrap()
            .value
        };
        let mut with = data.to_vec();
        with.push(0.9);
        let oracle = (joint(&with) / joint(&data)).ln();
        assert!((m.log_pred_conjugate(&[0.9], &stats1(&data)).unwrap() - oracle).abs() < 1e-8);
        assert!((m.log_marginal(&stats1(&data)).unwrap() - joint(&data).ln()).abs() < 1e-8);
    }

    #[test]
    fn conj_ii_predictive_matches_quadrature() {
        let m = conj_ii();
        let cfg = QuadratureConfig::default();
        // int int N(mu | mu0, 1/(tau0 tau)) Gamma(tau | a, b) prod N(x | mu, 1/tau) dmu dtau
        let joint = |xs: &[f64]| -> f64 {
            integrate(
                |u: f64| {
                    // tau = u/(1-u) on (0, inf)
                    let tau = u / (1.0 - u);
                    let jac = 1.0 / ((1.0 - u) * (1.0 - u));
                    let lg = 2.0 * 1.5f64.ln() - ln_gamma(2.0) + (2.0 - 1.0) * tau.ln() - 1.5 * tau;
                    let inner = integrate(
                        |mu: f64| {
                            (log_normal(mu, 0.5, 1.0 / (0.7 * tau))
                                + xs.iter().map(|&x| log_normal(x, mu, 1.0 / tau)).sum::<f64>()
                                + lg)
                                .exp()
                        },
                        -40.0,
                        40.0,
                        &cfg.nested(),
                    )
                    .unwrap()
                    .value;
                    inner * jac
                },
                1e-12,
                1.0 - 1e-9,
                &cfg,
            )
            .unwrap()
            .value
        };
        for data in [vec![], vec![1.2], vec![-0.4, 0.9]] {
            let mut with = data.clone();
            with.push(0.3);
            let oracle = (joint(&with) / if data.is_empty() { 1.0 } else { joint(&data) }).ln();
            let v = m.log_pred_conjugate(&[0.3], &stats1(&data)).unwrap();
            assert!((v - oracle).abs() < 1e-6, "{data:?}: {v} vs {oracle}");
        }
        let data = [1.2, -0.4];
        assert!((m.log_marginal(&stats1(&data)).unwrap() - joint(&data).ln()).abs() < 1e-6);
    }

    #[test]
    fn niw_predictive_matches_marginal_ratio() {
        let m = niw2();
        let data = [[0.3, 1.1], [-1.0, 0.4], [0.8, 2.2]];
        let x = [0.5, 0.5];
        let s = ClusterStats::from_data(2, data.iter().map(|r| &r[..]));
        let mut s2 = s.clone();
        s2.add(&x);
        let ratio = m.log_marginal(&s2).unwrap() - m.log_marginal(&s).unwrap();
        assert_relative_eq!(m.log_pred_conjugate(&x, &s).unwrap(), ratio, epsilon = 1e-10);
        let empty = m.empty_stats();
        let mut one = empty.clone();
        one.add(&x);
        assert_relative_eq!(m.log_pred_conjugate(&x, &empty).unwrap(), m.log_marginal(&one).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn niw_predictive_integrates_to_one() {
        let m = niw2();
        let s = ClusterStats::from_data(2, [[0.3, 1.1], [-1.0, 0.4]].iter().map(|r| &r[..]));
        let h = 0.05;
        let mut total = 0.0;
        let mut i = -30.0;
        while i <= 30.0 {
            let mut j = -30.0;
            while j <= 30.0 {
                total += m.log_pred_conjugate(&[i, j], &s).unwrap().exp() * h * h;
                j += h;
            }
            i += h;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn conj_i_posterior_draws() {
        let m = LikelihoodModel::UnivConjI { mu0: 0.0, tau0: 1.0, tau_common: 1.0 };
        let s = stats1(&[1.0, 1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| match m.sample_posterior(&s, None, &mut rng).unwrap() {
                ClusterParams::Mean { mu } => mu,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.8).abs() < 0.02, "{mean}");
    }

    #[test]
    fn prior_draws_match_prior_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 10_000;
        let se = |var: f64| 4.0 * (var / n as f64).sqrt();
        // Conj II: E tau = alpha/beta, E mu = mu0.
        let m = conj_ii();
        let (mut mt, mut mm) = (0.0, 0.0);
        for _ in 0..n {
            if let ClusterParams::MeanPrecision { mu, tau } = m.sample_prior(&mut rng) {
                mt += tau;
                mm += mu;
            }
        }
        assert!((mt / n as f64 - 2.0 / 1.5).abs() < se(2.0 / 2.25));
        assert!((mm / n as f64 - 0.5).abs() < 0.1);
        // Non-conjugate: E exp(mu) = a0/b0.
        let nc = LikelihoodModel::UnivNonConj { a0: 3.0, b0: 2.0, alpha0: 1.0, beta0: 1.0 };
        let mut s = 0.0;
        for _ in 0..n {
            if let ClusterParams::MeanPrecision { mu, .. } = nc.sample_prior(&mut rng) {
                s += mu.exp();
            }
        }
        assert!((s / n as f64 - 1.5).abs() < se(3.0 / 4.0));
        // NIW: E Sigma = S0 / (nu0 - d - 1), E mu = mu0.
        let mv = niw2();
        let mut acc = DMatrix::<f64>::zeros(2, 2);
        let mut mu_acc = DVector::<f64>::zeros(2);
        for _ in 0..n {
            if let ClusterParams::MvNormal(p) = mv.sample_prior(&mut rng) {
                acc += p.sigma();
                mu_acc += p.mu();
            }
        }
        let mean_sigma = acc / n as f64;
        assert!((mean_sigma[(0, 0)] - 1.0).abs() < 0.1, "{mean_sigma}");
        assert!((mean_sigma[(0, 1)] - 0.15).abs() < 0.05, "{mean_sigma}");
        assert!((mu_acc[1] / n as f64 - 1.0).abs() < 0.1);
    }

    #[test]
    fn nonconj_posterior_matches_grid() {
        let m = LikelihoodModel::UnivNonConj { a0: 1.0, b0: 1.0, alpha0: 1.0, beta0: 1.0 };
        let s = stats1(&[0.0]);
        // Marginal posterior of mu: exp(mu - e^mu) (beta0 + mu^2/2)^-(alpha0 + 1/2).
        let log_post = |mu: f64| mu - mu.exp() - 1.5 * (1.0 + 0.5 * mu * mu).ln();
        let (lo, hi, bins) = (-8.0, 4.0, 60);
        let width = (hi - lo) / bins as f64;
        let mut expected: Vec<f64> = (0..bins)
            .map(|b| {
                let c = lo + (b as f64 + 0.5) * width;
                log_post(c).exp()
            })
            .collect();
        let z: f64 = expected.iter().sum();
        expected.iter_mut().for_each(|v| *v /= z);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut counts = vec![0usize; bins];
        let mut p = m.sample_prior(&mut rng);
        let draws = 100_000;
        for _ in 0..draws {
            p = m.sample_posterior(&s, Some(&p), &mut rng).unwrap();
            if let ClusterParams::MeanPrecision { mu, .. } = p {
                let b = ((mu - lo) / width).floor();
                if b >= 0.0 && (b as usize) < bins {
                    counts[b as usize] += 1;
                }
            }
        }
        let tv: f64 =
            0.5 * counts.iter().zip(&expected).map(|(&c, &e)| (c as f64 / draws as f64 - e).abs()).sum::<f64>();
        assert!(tv < 0.05, "TV {tv}");
    }

    #[test]
    fn nonconj_prior_predictive_integrates_to_one() {
        let m = LikelihoodModel::UnivNonConj { a0: 2.0, b0: 1.0, alpha0: 3.0, beta0: 2.0 };
        let cfg = QuadratureConfig::default();
        let total = integrate(
            |x: f64| m.log_prior_predictive(&[x], &cfg).unwrap().exp(),
            -40.0,
            40.0,
            &QuadratureConfig::new(1e-6, 1e-10, 200).unwrap(),
        )
        .unwrap()
        .value;
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn validation() {
        assert!(LikelihoodModel::UnivConjI { mu0: 0.0, tau0: 0.0, tau_common: 1.0 }.validate().is_err());
        assert!(niw2().validate().is_ok());
        let bad =
            LikelihoodModel::MvNiw { mu0: vec![0.0, 0.0], r0: 1.0, nu0: 0.5, s0: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        assert!(bad.validate().is_err());
        let asym =
            LikelihoodModel::MvNiw { mu0: vec![0.0, 0.0], r0: 1.0, nu0: 4.0, s0: vec![vec![1.0, 0.5], vec![0.0, 1.0]] };
        assert!(asym.validate().is_err());
    }

    #[test]
    fn params_round_trip_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = niw2().sample_prior(&mut rng);
        let s = serde_json::to_string(&p).unwrap();
        let q: ClusterParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
