//! Conjugate Gaussian location model: X_i | theta ~ N(theta, sigma2) i.i.d.
//! with theta ~ N(m, tau2), and the three empirical-Bayes variants obtained
//! by estimating the prior mean, the prior variance, or both.

use crate::error::{Error, Result};
use crate::model::{EbFamily, EbResult, HyperParam};
use crate::posterior::PosteriorRep;
use crate::rng::RngStream;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.837877066409345;

/// Known-variance Gaussian sampling model with its Gaussian prior.
#[derive(Debug, Clone, Copy)]
pub struct GaussianModelSpec {
    pub sigma2: f64,
    pub theta0: f64,
    pub m: f64,
    pub tau2: f64,
}

impl GaussianModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) {
            return Err(Error::domain("GaussianModelSpec: sigma2 must be > 0"));
        }
        if self.tau2 < 0.0 {
            return Err(Error::domain("GaussianModelSpec: tau2 must be >= 0"));
        }
        Ok(())
    }

    pub fn simulate(&self, n: usize, rng: &mut RngStream) -> GaussianData {
        GaussianData::simulate(n, self.theta0, self.sigma2, rng)
    }

    /// Per-observation Kullback-Leibler divergence KL(theta0; theta) of the
    /// known-variance sampling model, the quantity the prior-mass checker
    /// integrates over.
    pub fn kl_to_truth(&self, theta: f64) -> f64 {
        let d = theta - self.theta0;
        d * d / (2.0 * self.sigma2)
    }
}

/// Sufficient statistics of one dataset.
#[derive(Debug, Clone, Copy)]
pub struct GaussianData {
    pub n: usize,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub ss: f64,
}

impl GaussianData {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        GaussianData { n, mean, ss }
    }

    pub fn simulate(n: usize, theta0: f64, sigma2: f64, rng: &mut RngStream) -> Self {
        let sd = sigma2.sqrt();
        let xs: Vec<f64> = (0..n)
            .map(|_| theta0 + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        GaussianData::from_samples(&xs)
    }
}

/// Exact log marginal likelihood log m(x_{1:n} | m, tau2). The lambda-free
/// factor is kept so the value matches direct integration of
/// likelihood x prior, not just up to a constant.
pub fn log_marginal(data: &GaussianData, m: f64, tau2: f64, sigma2: f64) -> Result<f64> {
    if tau2 < 0.0 {
        return Err(Error::domain("log_marginal: tau2 must be >= 0"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::domain("log_marginal: sigma2 must be > 0"));
    }
    let n = data.n as f64;
    let v = tau2 + sigma2 / n;
    // Residual factor from the within-sample deviations, independent of
    // (m, tau2); then the density of the sample mean under N(m, v).
    let resid = -0.5 * (n - 1.0) * (LN_2PI + sigma2.ln()) - 0.5 * data.ss / sigma2 - 0.5 * n.ln();
    let mean_term = -0.5 * (LN_2PI + v.ln()) - 0.5 * (data.mean - m) * (data.mean - m) / v;
    Ok(resid + mean_term)
}

/// Posterior of theta under fixed hyperparameters. tau2 = 0 collapses to the
/// point mass at the prior mean.
pub fn posterior_fixed(data: &GaussianData, m: f64, tau2: f64, sigma2: f64) -> Result<PosteriorRep> {
    if tau2 < 0.0 {
        return Err(Error::domain("posterior_fixed: tau2 must be >= 0"));
    }
    if tau2 == 0.0 {
        return Ok(PosteriorRep::point_mass_1d(m));
    }
    let n = data.n as f64;
    let w = (sigma2 / n) / (sigma2 / n + tau2);
    let mean = w * m + (1.0 - w) * data.mean;
    let variance = 1.0 / (1.0 / tau2 + n / sigma2);
    Ok(PosteriorRep::gaussian(mean, variance))
}

/// Case (1): prior variance fixed, prior mean estimated. The marginal MLE is
/// the sample mean.
pub fn eb_case1(data: &GaussianData, tau2: f64, sigma2: f64) -> Result<EbResult> {
    if !(tau2 > 0.0) {
        return Err(Error::domain("eb_case1: tau2 must be > 0"));
    }
    let m_hat = data.mean;
    let posterior = posterior_fixed(data, m_hat, tau2, sigma2)?;
    let lm = log_marginal(data, m_hat, tau2, sigma2)?;
    Ok(EbResult::new(HyperParam::interior(vec![m_hat]), lm, posterior))
}

/// Closed-form marginal MLE of the prior variance in Case (2):
/// tau2_hat = (sigma2/n) * max(n (xbar - m)^2 / sigma2 - 1, 0).
pub fn tau2_hat_case2(data: &GaussianData, m: f64, sigma2: f64) -> f64 {
    let n = data.n as f64;
    let z = n * (data.mean - m) * (data.mean - m) / sigma2;
    (sigma2 / n) * (z - 1.0).max(0.0)
}

/// Case (2): prior mean fixed, prior variance estimated. Degenerates to the
/// point mass at `m` whenever the data look no more spread than the sampling
/// noise allows.
pub fn eb_case2(data: &GaussianData, m: f64, sigma2: f64) -> Result<EbResult> {
    let tau2 = tau2_hat_case2(data, m, sigma2);
    let posterior = posterior_fixed(data, m, tau2, sigma2)?;
    let lm = log_marginal(data, m, tau2, sigma2)?;
    let lambda = HyperParam { values: vec![tau2], boundary_flags: vec![tau2 == 0.0] };
    Ok(EbResult::new(lambda, lm, posterior))
}

/// Case (3): both prior mean and variance estimated. The marginal likelihood
/// is maximized on the tau2 = 0 face at m = xbar, so the EB posterior is the
/// point mass at the sample mean.
pub fn eb_case3(data: &GaussianData, sigma2: f64) -> Result<EbResult> {
    let lambda = HyperParam { values: vec![data.mean, 0.0], boundary_flags: vec![false, true] };
    let posterior = PosteriorRep::point_mass_1d(data.mean);
    let lm = log_marginal(data, data.mean, 0.0, sigma2)?;
    Ok(EbResult::new(lambda, lm, posterior))
}

/// Posterior under the hierarchical extension of Case (1): a Gaussian
/// hyperprior N(lambda0, tau2_0) on the prior mean inflates the prior
/// variance to tau2 + tau2_0.
pub fn hierarchical_case1_posterior(
    data: &GaussianData,
    lambda0: f64,
    tau2_0: f64,
    tau2: f64,
    sigma2: f64,
) -> Result<PosteriorRep> {
    if tau2_0 < 0.0 {
        return Err(Error::domain("hierarchical_case1_posterior: tau2_0 must be >= 0"));
    }
    posterior_fixed(data, lambda0, tau2 + tau2_0, sigma2)
}

/// Density at `theta` of the Student-t prior induced in Case (2) by the
/// Gamma(nu/2, 2/nu) hyperprior on the precision 1/tau2. Exposed as an
/// evaluator only; the resulting posterior is not conjugate.
pub fn student_prior_density(theta: f64, m: f64, nu: f64) -> f64 {
    crate::special::student_t_pdf(theta, m, 1.0, nu)
}

/// Adapter so the closed-form cases can be cross-checked by the generic
/// marginal-MLE driver. `which` picks the case.
pub enum GaussianEbCase {
    /// lambda = m, fixed tau2.
    PriorMean { tau2: f64 },
    /// lambda = tau2, fixed m.
    PriorVariance { m: f64 },
    /// lambda = (m, tau2).
    Both,
}

pub struct GaussianFamily {
    pub data: GaussianData,
    pub sigma2: f64,
    pub case: GaussianEbCase,
}

impl EbFamily for GaussianFamily {
    fn lambda_dim(&self) -> usize {
        match self.case {
            GaussianEbCase::Both => 2,
            _ => 1,
        }
    }

    fn log_marginal(&self, lambda: &[f64]) -> Result<f64> {
        let (m, tau2) = match self.case {
            GaussianEbCase::PriorMean { tau2 } => (lambda[0], tau2),
            GaussianEbCase::PriorVariance { m } => (m, lambda[0]),
            GaussianEbCase::Both => (lambda[0], lambda[1]),
        };
        if tau2 < 0.0 {
            return Err(Error::model(lambda, "tau2 < 0"));
        }
        log_marginal(&self.data, m, tau2, self.sigma2)
    }

    fn posterior_at(&self, lambda: &HyperParam) -> Result<PosteriorRep> {
        let (m, tau2) = match self.case {
            GaussianEbCase::PriorMean { tau2 } => (lambda.values[0], tau2),
            GaussianEbCase::PriorVariance { m } => (m, lambda.values[0]),
            GaussianEbCase::Both => (lambda.values[0], lambda.values[1]),
        };
        posterior_fixed(&self.data, m, tau2, self.sigma2)
    }
}
