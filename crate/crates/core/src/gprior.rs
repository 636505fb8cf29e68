//! Gaussian linear regression under the modified Zellner g-prior
//!
//!   pi(alpha, sigma2) proportional to 1/sigma2,
//!   beta | sigma2 ~ N_k(0, g sigma2 (Xc' Xc)^-1),
//!
//! with the marginal MLE of g, its degeneracy event {g_hat = 0}, and the
//! posterior of beta in closed form.

use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky, dot, spd_inverse, Matrix};
use crate::posterior::PosteriorRep;
use crate::rng::RngStream;
use crate::special::ln_gamma;
use rand_distr::{Distribution, StandardNormal};

/// Response, centered design and dimensions of one regression dataset.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: Vec<f64>,
    /// Design as provided (columns not yet centered).
    pub x: Matrix,
    /// Column-centered design: 1' xc = 0 exactly.
    pub xc: Matrix,
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct OlsSummary {
    pub alpha_hat: f64,
    pub beta_hat: Vec<f64>,
    pub sse: f64,
    pub tss: f64,
    pub r2: f64,
    pub f_n: f64,
    /// beta_hat' (Xc'Xc) beta_hat, the regression sum of squares.
    pub reg: f64,
    pub xtx: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    IidNormal,
    FixedMatrix,
}

fn center_columns(x: &Matrix) -> Matrix {
    let mut xc = x.clone();
    for j in 0..x.cols {
        let mean: f64 = (0..x.rows).map(|i| x.at(i, j)).sum::<f64>() / x.rows as f64;
        for i in 0..x.rows {
            *xc.at_mut(i, j) -= mean;
        }
    }
    xc
}

impl RegressionData {
    pub fn new(y: Vec<f64>, x: Matrix) -> Result<Self> {
        let n = y.len();
        let k = x.cols;
        if x.rows != n {
            return Err(Error::domain("RegressionData: y and X row counts differ"));
        }
        if !(k >= 1 && k < n.saturating_sub(1)) {
            return Err(Error::domain("RegressionData: need 1 <= k < n - 1"));
        }
        let xc = center_columns(&x);
        cholesky(&xc.gram()).map_err(|_| Error::domain("RegressionData: singular centered design"))?;
        Ok(RegressionData { y, x, xc, n, k })
    }

    pub fn ols(&self) -> Result<OlsSummary> {
        let n = self.n as f64;
        let alpha_hat = self.y.iter().sum::<f64>() / n;
        let yc: Vec<f64> = self.y.iter().map(|v| v - alpha_hat).collect();
        let xtx = self.xc.gram();
        let l = cholesky(&xtx)?;
        let xty = self.xc.tr_mul_vec(&yc);
        let beta_hat = chol_solve(&l, &xty);
        let fit = self.xc.mul_vec(&beta_hat);
        let sse: f64 = yc.iter().zip(&fit).map(|(y, f)| (y - f) * (y - f)).sum();
        let tss: f64 = yc.iter().map(|v| v * v).sum();
        let reg = dot(&beta_hat, &xty);
        let r2 = if tss > 0.0 { (1.0 - sse / tss).clamp(0.0, 1.0) } else { 0.0 };
        let dof = (self.n - 1 - self.k) as f64;
        let f_n = if r2 < 1.0 { (r2 / self.k as f64) / ((1.0 - r2) / dof) } else { f64::INFINITY };
        Ok(OlsSummary { alpha_hat, beta_hat, sse, tss, r2, f_n, reg, xtx })
    }
}

/// Simulate y = 1 alpha0 + X beta0 + eps with eps ~ N(0, sigma0_2 I).
///
/// With `IidNormal` the design entries are standard normal and each column is
/// centered and rescaled so its sum of squares equals n. A realized design
/// that is numerically singular is resampled once; a second failure is an
/// error.
pub fn simulate_regression(
    n: usize,
    k: usize,
    alpha0: f64,
    beta0: &[f64],
    sigma0_2: f64,
    design: DesignKind,
    fixed: Option<&Matrix>,
    rng: &mut RngStream,
) -> Result<RegressionData> {
    if beta0.len() != k {
        return Err(Error::domain("simulate_regression: beta0 length != k"));
    }
    if n <= k + 1 {
        return Err(Error::domain("simulate_regression: need n > k + 1"));
    }
    let mut attempt = 0;
    loop {
        let x = match design {
            DesignKind::IidNormal => {
                let mut x = Matrix::zeros(n, k);
                for v in x.data.iter_mut() {
                    *v = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                }
                let mut x = center_columns(&x);
                for j in 0..k {
                    let ssq: f64 = (0..n).map(|i| x.at(i, j) * x.at(i, j)).sum();
                    let scale = (ssq / n as f64).sqrt();
                    if scale > 0.0 {
                        for i in 0..n {
                            *x.at_mut(i, j) /= scale;
                        }
                    }
                }
                x
            }
            DesignKind::FixedMatrix => fixed
                .cloned()
                .ok_or_else(|| Error::domain("simulate_regression: fixed design missing"))?,
        };
        let sd = sigma0_2.sqrt();
        let xb = x.mul_vec(beta0);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                alpha0
                    + xb[i]
                    + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            })
            .collect();
        match RegressionData::new(y, x) {
            Ok(d) => return Ok(d),
            Err(e) => {
                attempt += 1;
                if attempt > 1 || design == DesignKind::FixedMatrix {
                    return Err(e);
                }
            }
        }
    }
}

/// Marginal MLE of g: max(F_n - 1, 0).
pub fn g_hat(ols: &OlsSummary) -> f64 {
    (ols.f_n - 1.0).max(0.0)
}

/// Log marginal likelihood of the data given g (improper-prior constant
/// included, so it matches direct integration):
///
///   log m(Y|g) = lnGamma((n-1)/2) - ((n-1)/2) ln pi - ln(n)/2
///              + ((n-1-k)/2) ln(1+g) - ((n-1)/2) ln(1 + g (1 - R^2))
///              - ((n-1)/2) ln TSS.
pub fn log_marginal_g(data: &RegressionData, ols: &OlsSummary, g: f64) -> Result<f64> {
    if !(g >= 0.0) || !g.is_finite() {
        return Err(Error::domain("log_marginal_g: g must be finite and >= 0"));
    }
    let n = data.n as f64;
    let k = data.k as f64;
    let half = (n - 1.0) / 2.0;
    Ok(ln_gamma(half) - half * std::f64::consts::PI.ln() - 0.5 * n.ln()
        + 0.5 * (n - 1.0 - k) * (1.0 + g).ln()
        - half * (1.0 + g * (1.0 - ols.r2)).ln()
        - half * ols.tss.ln())
}

/// Posterior of beta given g. For g > 0 this is the scaled multivariate
/// Student with df n-1, location (g/(1+g)) beta_hat and scale
/// (g/(1+g)) (SSE + REG/(1+g))/(n-1) (Xc'Xc)^-1; g = 0 collapses to the
/// point mass at the zero vector.
pub fn posterior_beta_given_g(data: &RegressionData, ols: &OlsSummary, g: f64) -> Result<PosteriorRep> {
    if !(g >= 0.0) || !g.is_finite() {
        // An infinite fit happens only on exact-fit data (R^2 = 1), where
        // the posterior scale would collapse; surface it instead of letting
        // NaNs through.
        return Err(Error::domain("posterior_beta_given_g: g must be finite and >= 0"));
    }
    if g == 0.0 {
        return Ok(PosteriorRep::PointMass { point: vec![0.0; data.k] });
    }
    let shrink = g / (1.0 + g);
    let location: Vec<f64> = ols.beta_hat.iter().map(|b| shrink * b).collect();
    let df = (data.n - 1) as f64;
    let s_star = ols.sse + ols.reg / (1.0 + g);
    let xtx_inv = spd_inverse(&ols.xtx)?;
    let mut scale = xtx_inv;
    let factor = shrink * s_star / df;
    for v in scale.data.iter_mut() {
        *v *= factor;
    }
    Ok(PosteriorRep::ScaledStudentCf { location, scale, df })
}

/// The hyperparameter value at which the prior density of the true beta0 is
/// largest for this design: g = beta0' (Xc'Xc) beta0 / (k sigma0_2). This is
/// the value the marginal MLE tracks when beta0 != 0.
pub fn oracle_g(data: &RegressionData, beta0: &[f64], sigma0_2: f64) -> Result<f64> {
    if beta0.len() != data.k {
        return Err(Error::domain("oracle_g: beta0 length != k"));
    }
    let xtx = data.xc.gram();
    let q = crate::linalg::quad_form(&xtx, beta0);
    Ok(q / (data.k as f64 * sigma0_2))
}

/// Monte Carlo frequency of the degeneracy event {g_hat = 0} under a truth
/// with coefficient vector `beta0`.
pub fn degeneracy_probability_mc(
    n: usize,
    k: usize,
    beta0: &[f64],
    sigma0_2: f64,
    reps: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if reps < 1000 {
        return Err(Error::domain("degeneracy_probability_mc: reps must be >= 1000"));
    }
    let mut zero = 0usize;
    for _ in 0..reps {
        let d = simulate_regression(n, k, 0.0, beta0, sigma0_2, DesignKind::IidNormal, None, rng)?;
        let ols = d.ols()?;
        if g_hat(&ols) == 0.0 {
            zero += 1;
        }
    }
    let p = zero as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    Ok((p, se))
}
