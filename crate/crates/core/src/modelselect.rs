//! Variable selection with an inclusion-probability hyperparameter p:
//! models are gamma in {0,1}^m with prior p^{k_gamma} (1-p)^{m-k_gamma},
//! each submodel carries a unit-information g-prior marginal, and the
//! hyperparameter is fit by marginal maximum likelihood.

use crate::error::{Error, Result};
use crate::gprior::RegressionData;
use crate::linalg::{chol_solve, cholesky, dot, Matrix};
use crate::optimize::maximize_1d;
use crate::special::{ln_gamma, log_sum_exp};

/// One model in the enumeration; `gamma` is an inclusion bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelIndex {
    pub gamma: u32,
    pub k_gamma: u32,
}

impl ModelIndex {
    pub fn new(gamma: u32) -> Self {
        ModelIndex { gamma, k_gamma: gamma.count_ones() }
    }

    pub fn includes(&self, j: usize) -> bool {
        self.gamma >> j & 1 == 1
    }
}

/// Exhaustive-enumeration cap: 2^m models must stay tractable and exact.
pub const MAX_COVARIATES: usize = 20;

/// Full enumeration of the model space with posterior weights at p_hat.
#[derive(Debug, Clone)]
pub struct ModelPosterior {
    pub p_hat: f64,
    /// log m_gamma(Y), indexed by the bitmask; skipped (singular) models hold
    /// -inf.
    pub log_marginals: Vec<f64>,
    pub posterior_probs: Vec<f64>,
    /// Bitmasks of submodels skipped due to singular designs.
    pub skipped: Vec<u32>,
    /// p_hat landed on {0, 1}: the prior over models is a point mass.
    pub degenerate: bool,
}

/// Shared per-dataset quantities for the 2^m marginals.
pub struct SelectionPrecompute {
    pub n: usize,
    pub m: usize,
    pub xtx: Matrix,
    pub xty: Vec<f64>,
    pub tss: f64,
    pub log_m_null: f64,
}

impl SelectionPrecompute {
    pub fn new(data: &RegressionData) -> Result<Self> {
        if data.k > MAX_COVARIATES {
            return Err(Error::domain(format!(
                "modelselect: m = {} exceeds the enumeration cap {MAX_COVARIATES}",
                data.k
            )));
        }
        let n = data.n;
        let ybar = data.y.iter().sum::<f64>() / n as f64;
        let yc: Vec<f64> = data.y.iter().map(|v| v - ybar).collect();
        let tss: f64 = yc.iter().map(|v| v * v).sum();
        if tss <= 0.0 {
            return Err(Error::domain("modelselect: zero total sum of squares"));
        }
        let half = (n as f64 - 1.0) / 2.0;
        let log_m_null = ln_gamma(half) - half * std::f64::consts::PI.ln()
            - 0.5 * (n as f64).ln()
            - half * tss.ln();
        Ok(SelectionPrecompute {
            n,
            m: data.k,
            xtx: data.xc.gram(),
            xty: data.xc.tr_mul_vec(&yc),
            tss,
            log_m_null,
        })
    }

    /// R^2 of the submodel selected by `gamma`, via the precomputed normal
    /// equations. A singular submodel comes back as a domain error.
    fn r2_of(&self, gamma: ModelIndex) -> Result<f64> {
        if gamma.k_gamma == 0 {
            return Ok(0.0);
        }
        let cols: Vec<usize> = (0..self.m).filter(|j| gamma.includes(*j)).collect();
        let k = cols.len();
        let mut sub = Matrix::zeros(k, k);
        let mut rhs = vec![0.0; k];
        for (a, &ca) in cols.iter().enumerate() {
            rhs[a] = self.xty[ca];
            for (b, &cb) in cols.iter().enumerate() {
                *sub.at_mut(a, b) = self.xtx.at(ca, cb);
            }
        }
        let l = cholesky(&sub)?;
        let beta = chol_solve(&l, &rhs);
        let reg = dot(&beta, &rhs);
        Ok((reg / self.tss).clamp(0.0, 1.0))
    }
}

/// log m_gamma(Y) under the g-prior on the submodel's coefficients, with the
/// common improper (alpha, sigma2) integration. The null model integrates
/// only (alpha, sigma2).
pub fn per_model_log_marginal(
    pre: &SelectionPrecompute,
    gamma: ModelIndex,
    g: f64,
) -> Result<f64> {
    if g <= 0.0 {
        return Err(Error::domain("per_model_log_marginal: g must be > 0"));
    }
    let n = pre.n as f64;
    let half = (n - 1.0) / 2.0;
    let r2 = pre.r2_of(gamma)?;
    let k = gamma.k_gamma as f64;
    Ok(pre.log_m_null + 0.5 * (n - 1.0 - k) * (1.0 + g).ln()
        - half * (1.0 + g * (1.0 - r2)).ln())
}

/// Prior log-weight of a model with `k` inclusions among `m` at probability p,
/// with exact endpoint handling.
fn prior_log_weight(p: f64, k: u32, m: usize) -> f64 {
    let k = k as f64;
    let m = m as f64;
    if p == 0.0 {
        return if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == m { 0.0 } else { f64::NEG_INFINITY };
    }
    k * p.ln() + (m - k) * (1.0 - p).ln()
}

/// Marginal MLE of the inclusion probability given the 2^m per-model log
/// marginals. A marginal that is flat in p (all model weights equal) resolves
/// to the symmetric tie-break 0.5. Endpoints are included in the search.
pub fn p_hat_mml(log_marginals: &[f64], m: usize) -> f64 {
    assert_eq!(log_marginals.len(), 1usize << m);
    let ks: Vec<u32> = (0..log_marginals.len()).map(|g| (g as u32).count_ones()).collect();
    let objective = |p: f64| -> f64 {
        let terms: Vec<f64> = log_marginals
            .iter()
            .zip(&ks)
            .map(|(lm, k)| lm + prior_log_weight(p, *k, m))
            .collect();
        log_sum_exp(&terms)
    };
    // Flatness check on a coarse grid.
    let probe: Vec<f64> = (0..=16).map(|i| objective(i as f64 / 16.0)).collect();
    let (lo, hi) = probe
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
        return 0.5;
    }
    let (p, v) = maximize_1d(&objective, 0.0, 1.0, 1e-9);
    // The grid includes the endpoints, but compare explicitly in case the
    // refinement drifted.
    let v0 = objective(0.0);
    let v1 = objective(1.0);
    if v0 >= v && v0 >= v1 {
        0.0
    } else if v1 >= v {
        1.0
    } else {
        p
    }
}

/// Fit p by marginal maximum likelihood and weight every model accordingly.
pub fn eb_model_posterior(data: &RegressionData, g: f64) -> Result<ModelPosterior> {
    let pre = SelectionPrecompute::new(data)?;
    let m = pre.m;
    let n_models = 1usize << m;
    let mut log_marginals = vec![f64::NEG_INFINITY; n_models];
    let mut skipped = Vec::new();
    for gamma in 0..n_models {
        match per_model_log_marginal(&pre, ModelIndex::new(gamma as u32), g) {
            Ok(v) => log_marginals[gamma] = v,
            Err(_) => skipped.push(gamma as u32),
        }
    }
    let p_hat = p_hat_mml(&log_marginals, m);
    let weights: Vec<f64> = log_marginals
        .iter()
        .enumerate()
        .map(|(gamma, lm)| lm + prior_log_weight(p_hat, (gamma as u32).count_ones(), m))
        .collect();
    let norm = log_sum_exp(&weights);
    let posterior_probs: Vec<f64> = weights.iter().map(|w| (w - norm).exp()).collect();
    let degenerate = p_hat == 0.0 || p_hat == 1.0;
    Ok(ModelPosterior { p_hat, log_marginals, posterior_probs, skipped, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gprior::{simulate_regression, DesignKind};
    use crate::rng::RngStream;

    fn sim(n: usize, m: usize, beta0: &[f64], seed: u64) -> RegressionData {
        let mut rng = RngStream::new(seed, 0);
        simulate_regression(n, m, 0.0, beta0, 1.0, DesignKind::IidNormal, None, &mut rng).unwrap()
    }

    #[test]
    fn flat_marginals_tie_break_to_half() {
        let m = 3;
        let lms = vec![-10.0; 1 << m];
        assert_eq!(p_hat_mml(&lms, m), 0.5);
    }

    #[test]
    fn dominant_model_gives_k0_over_m() {
        // One model (k0 = 2 of m = 4) towers over the rest by 40+ nats: the
        // maximizer collapses to the single-term binomial argmax k0/m.
        let m = 4;
        let mut lms = vec![-100.0; 1 << m];
        lms[0b0011] = -10.0;
        let p = p_hat_mml(&lms, m);
        assert!((p - 0.5).abs() <= 1e-3, "p = {p}");

        let mut lms = vec![-100.0; 1 << m];
        lms[0b0001] = -20.0;
        let p = p_hat_mml(&lms, m);
        assert!((p - 0.25).abs() <= 1e-3, "p = {p}");
    }

    #[test]
    fn endpoint_p_hat_yields_degenerate_point_prior() {
        // Null model dominating pushes p_hat to 0 and all posterior mass to
        // gamma = 0.
        let m = 3;
        let mut lms = vec![-200.0; 1 << m];
        lms[0] = 0.0;
        let p = p_hat_mml(&lms, m);
        assert_eq!(p, 0.0);

        // Full model dominating pushes p_hat to 1.
        let mut lms = vec![-200.0; 1 << m];
        lms[(1 << m) - 1] = 0.0;
        assert_eq!(p_hat_mml(&lms, m), 1.0);
    }

    #[test]
    fn posterior_probs_normalize_and_enumerate() {
        let d = sim(40, 4, &[1.0, 0.8, 0.0, 0.0], 11);
        let post = eb_model_posterior(&d, d.n as f64).unwrap();
        assert_eq!(post.posterior_probs.len(), 16);
        let sum: f64 = post.posterior_probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(post.skipped.is_empty());
    }

    #[test]
    fn null_model_marginal_depends_only_on_tss() {
        let d = sim(30, 3, &[0.0; 3], 7);
        let pre = SelectionPrecompute::new(&d).unwrap();
        let lm0 = per_model_log_marginal(&pre, ModelIndex::new(0), d.n as f64).unwrap();
        assert!((lm0 - pre.log_m_null).abs() < 1e-12);
    }

    #[test]
    fn strong_signals_recover_k0_over_m() {
        // k0 = 2 strong coefficients among m = 6 at n = 300.
        let mut hits = 0;
        for seed in 0..10u64 {
            let d = sim(300, 6, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0], 40 + seed);
            let post = eb_model_posterior(&d, d.n as f64).unwrap();
            if (post.p_hat - 2.0 / 6.0).abs() < 0.12 {
                hits += 1;
            }
        }
        assert!(hits >= 8, "only {hits}/10 runs near k0/m");
    }
}
