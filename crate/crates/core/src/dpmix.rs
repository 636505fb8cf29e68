//! Dirichlet-process Gaussian mixtures.
//!
//! Two flavors are supported. Kind I is a location-scale mixture whose base
//! measure lives on a compact grid (truncated normal over a compact interval
//! for the means, log grid for the scales); the DP precision is the estimated
//! hyperparameter, found by a stochastic fixed-point iteration on the
//! occupied-cluster equation
//!
//!   sum_{j=1..n} lambda / (lambda + j - 1) = E[K_n | lambda, data].
//!
//! Kind II is a location mixture with one shared scale drawn from a gridded
//! prior on [sigma_lo, sigma_hi] and a Gaussian base measure whose mean is
//! the estimated hyperparameter (plugged in as the sample mean).
//!
//! The sampler is a collapsed Chinese-restaurant Gibbs chain over
//! assignments with per-cluster parameter refreshes. Discretizing the base
//! keeps every "integrate over the base" step an exact finite sum.

use crate::error::{Error, Result};
use crate::model::{EbResult, HyperParam};
use crate::optimize::find_root;
use crate::posterior::{trapezoid_mass, PosteriorRep};
use crate::rng::RngStream;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};

const LN_SQRT_2PI: f64 = 0.9189385332046727;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpMixKind {
    /// Location-scale mixture, compact gridded base, precision estimated.
    LocationScaleI,
    /// Location mixture, shared scale, base mean estimated by plug-in.
    LocationII,
}

#[derive(Debug, Clone)]
pub struct DpMixSpec {
    pub kind: DpMixKind,
    /// DP precision (total mass of the base measure). Fixed for kind II;
    /// kind I treats it as the hyperparameter being estimated.
    pub precision: f64,
    /// Compact support A for the means (kind I).
    pub mu_support: (f64, f64),
    /// Center of the base over means (kind I), or the base mean (kind II;
    /// replaced by the sample mean in the plug-in procedure).
    pub base_mean: f64,
    /// Spread of the base over means.
    pub base_sd: f64,
    pub sigma_bounds: (f64, f64),
    /// Stick-breaking truncation for prior draws in diagnostics.
    pub truncation_level: usize,
    pub mu_grid_points: usize,
    pub sigma_grid_points: usize,
}

impl DpMixSpec {
    pub fn validate(&self) -> Result<()> {
        let (slo, shi) = self.sigma_bounds;
        if !(slo > 0.0 && slo <= shi) {
            return Err(Error::domain("DpMixSpec: need 0 < sigma_lo <= sigma_hi"));
        }
        if self.truncation_level < 10 {
            return Err(Error::domain("DpMixSpec: truncation_level must be >= 10"));
        }
        if !(self.mu_support.0 < self.mu_support.1) {
            return Err(Error::domain("DpMixSpec: empty mean support"));
        }
        if !(self.precision > 0.0) {
            return Err(Error::domain("DpMixSpec: precision must be > 0"));
        }
        if !(self.base_sd > 0.0) {
            return Err(Error::domain("DpMixSpec: base_sd must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GibbsConfig {
    pub iters: usize,
    pub burnin: usize,
    /// Replace every likelihood evaluation by 1. The chain then samples the
    /// bare Chinese-restaurant partition, which has a known mean cluster count.
    pub likelihood_stub: bool,
    /// Number of abscissae of the averaged predictive density.
    pub predictive_points: usize,
    /// Accumulate the predictive every this many post-burnin sweeps.
    pub predictive_thin: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iters: 1200,
            burnin: 200,
            likelihood_stub: false,
            predictive_points: 512,
            predictive_thin: 5,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iters > self.burnin && self.burnin >= 100) {
            return Err(Error::domain("GibbsConfig: need iters > burnin >= 100"));
        }
        Ok(())
    }
}

/// Cluster assignments plus instantiated per-cluster parameters.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub assignments: Vec<usize>,
    pub mus: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ClusterState {
    pub fn k_n(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }
}

#[derive(Debug, Clone)]
pub struct GibbsOutput {
    pub e_kn: f64,
    /// Occupied-cluster counts per post-burnin sweep.
    pub kn_samples: Vec<u32>,
    pub predictive: PosteriorRep,
    /// Monte Carlo standard error of `e_kn`, autocorrelation-adjusted.
    pub e_kn_se: f64,
    pub autocorr_time: f64,
    /// Integrated autocorrelation time exceeded iters/50.
    pub mixing_warning: bool,
    /// The chain's final state.
    pub final_state: ClusterState,
}

/// Integrated autocorrelation time and the implied standard error of the
/// sample mean. Lags accumulate until the autocorrelation first dips
/// below 0.05.
pub fn mc_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n < 2 {
        return (f64::NAN, 1.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return (0.0, 1.0);
    }
    let mut tau = 1.0;
    let max_lag = n / 3;
    for lag in 1..max_lag {
        let mut c = 0.0;
        for i in 0..n - lag {
            c += (samples[i] - mean) * (samples[i + lag] - mean);
        }
        let rho = c / ((n - lag) as f64 * var);
        if rho < 0.05 {
            break;
        }
        tau += 2.0 * rho;
    }
    ((var * tau / n as f64).sqrt(), tau)
}

// ---------------------------------------------------------------------------
// Gridded base measure (kind I)
// ---------------------------------------------------------------------------

struct GridBase {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    /// Flattened log base weights, mu-major.
    log_w: Vec<f64>,
}

impl GridBase {
    fn build(spec: &DpMixSpec) -> GridBase {
        let (alo, ahi) = spec.mu_support;
        let nm = spec.mu_grid_points.max(2);
        let ns = spec.sigma_grid_points.max(1);
        let mus: Vec<f64> =
            (0..nm).map(|i| alo + (ahi - alo) * i as f64 / (nm - 1) as f64).collect();
        let (slo, shi) = spec.sigma_bounds;
        let sigmas: Vec<f64> = if ns == 1 || slo == shi {
            vec![slo]
        } else {
            (0..ns)
                .map(|j| (slo.ln() + (shi.ln() - slo.ln()) * j as f64 / (ns - 1) as f64).exp())
                .collect()
        };
        // Truncated-normal weights over the mean grid, uniform over the log
        // scale grid.
        let mut wmu: Vec<f64> = mus
            .iter()
            .map(|m| {
                let z = (m - spec.base_mean) / spec.base_sd;
                (-0.5 * z * z).exp()
            })
            .collect();
        let total: f64 = wmu.iter().sum();
        for w in wmu.iter_mut() {
            *w /= total;
        }
        let ws = 1.0 / sigmas.len() as f64;
        let mut log_w = Vec::with_capacity(nm * sigmas.len());
        for w in &wmu {
            for _ in 0..sigmas.len() {
                log_w.push((w * ws).max(1e-300).ln());
            }
        }
        GridBase { mus, sigmas, log_w }
    }

    fn cell(&self, idx: usize) -> (f64, f64) {
        let ns = self.sigmas.len();
        (self.mus[idx / ns], self.sigmas[idx % ns])
    }

    /// Base-marginal density of one observation: sum over cells of
    /// w * phi(x | cell).
    fn marginal(&self, x: f64) -> f64 {
        let ns = self.sigmas.len();
        let mut s = 0.0;
        for (i, mu) in self.mus.iter().enumerate() {
            for (j, sig) in self.sigmas.iter().enumerate() {
                let w = self.log_w[i * ns + j].exp();
                let z = (x - mu) / sig;
                s += w * (-0.5 * z * z).exp() / (sig * (2.0 * std::f64::consts::PI).sqrt());
            }
        }
        s
    }

    /// Sample a cell from the posterior given cluster sufficient statistics
    /// (count, sum, sum of squares). A zero count samples the base itself.
    fn sample_cell(&self, count: f64, s1: f64, s2: f64, rng: &mut RngStream) -> (f64, f64) {
        let ns = self.sigmas.len();
        let mut logits = self.log_w.clone();
        if count > 0.0 {
            for (i, mu) in self.mus.iter().enumerate() {
                let dev = s2 - 2.0 * mu * s1 + count * mu * mu;
                for (j, sig) in self.sigmas.iter().enumerate() {
                    logits[i * ns + j] -=
                        count * (sig.ln() + LN_SQRT_2PI) + 0.5 * dev / (sig * sig);
                }
            }
        }
        let idx = sample_categorical_log(&logits, rng);
        self.cell(idx)
    }
}

fn sample_categorical_log(logits: &[f64], rng: &mut RngStream) -> usize {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let weights: Vec<f64> = logits
        .iter()
        .map(|l| {
            let w = (l - m).exp();
            total += w;
            w
        })
        .collect();
    let mut u = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

// ---------------------------------------------------------------------------
// The collapsed CRP Gibbs sampler
// ---------------------------------------------------------------------------

/// Run the chain at a fixed precision `lambda` and return the expected
/// occupied-cluster count, the predictive density averaged over kept sweeps,
/// and chain diagnostics.
pub fn crp_gibbs(
    data: &[f64],
    lambda: f64,
    spec: &DpMixSpec,
    cfg: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<GibbsOutput> {
    spec.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("crp_gibbs: empty dataset"));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain("crp_gibbs: lambda must be > 0"));
    }
    match spec.kind {
        DpMixKind::LocationScaleI => gibbs_kind1(data, lambda, spec, cfg, rng),
        DpMixKind::LocationII => gibbs_kind2(data, lambda, spec, cfg, rng),
    }
}

fn predictive_grid(data: &[f64], spec: &DpMixSpec, points: usize) -> Vec<f64> {
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 5.0 * spec.sigma_bounds.1 + spec.base_sd;
    let (lo, hi) = (lo - pad, hi + pad);
    let points = points.max(2);
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

fn normal_pdf_at(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

struct SweepAccum {
    kn: Vec<u32>,
    grid: Vec<f64>,
    pred: Vec<f64>,
    state: ClusterState,
}

fn finish(cfg: &GibbsConfig, acc: SweepAccum) -> Result<GibbsOutput> {
    let kf: Vec<f64> = acc.kn.iter().map(|k| *k as f64).collect();
    let e_kn = kf.iter().sum::<f64>() / kf.len() as f64;
    let (se, tau) = mc_se(&kf);
    let kept = cfg.iters - cfg.burnin;
    let mixing_warning = tau > (cfg.iters as f64) / 50.0 && kept > 50;
    let mass = trapezoid_mass(&acc.grid, &acc.pred);
    if !(mass > 0.0) {
        return Err(Error::domain("crp_gibbs: empty predictive accumulation"));
    }
    let density: Vec<f64> = acc.pred.iter().map(|d| d / mass).collect();
    let predictive = PosteriorRep::DensityGrid { xs: acc.grid, density };
    predictive.validate()?;
    Ok(GibbsOutput {
        e_kn,
        kn_samples: acc.kn,
        predictive,
        e_kn_se: se,
        autocorr_time: tau,
        mixing_warning,
        final_state: acc.state,
    })
}

/// Remove cluster `c` if empty, fixing up assignments after the swap-remove.
fn drop_if_empty(c: usize, counts: &mut Vec<usize>, mus: &mut Vec<f64>, sigmas: Option<&mut Vec<f64>>, assign: &mut [usize]) {
    if counts[c] > 0 {
        return;
    }
    let last = counts.len() - 1;
    counts.swap_remove(c);
    mus.swap_remove(c);
    if let Some(s) = sigmas {
        s.swap_remove(c);
    }
    if c < last {
        for a in assign.iter_mut() {
            if *a == last {
                *a = c;
            }
        }
    }
}

fn pick_weighted(weights: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        // Every weight underflowed (observation far outside the base
        // support); open a new table rather than panic on an empty range.
        return weights.len() - 1;
    }
    let mut u = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn gibbs_kind1(
    data: &[f64],
    lambda: f64,
    spec: &DpMixSpec,
    cfg: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<GibbsOutput> {
    let n = data.len();
    let base = GridBase::build(spec);
    let stub = cfg.likelihood_stub;
    let m0: Vec<f64> = if stub {
        vec![1.0; n]
    } else {
        // Floor keeps the new-table weight positive even for observations in
        // the far tail of the base marginal.
        data.iter().map(|x| base.marginal(*x).max(1e-300)).collect()
    };

    let mut assign = vec![0usize; n];
    let (s1, s2): (f64, f64) = (data.iter().sum(), data.iter().map(|x| x * x).sum());
    let first = base.sample_cell(if stub { 0.0 } else { n as f64 }, s1, s2, rng);
    let mut mus = vec![first.0];
    let mut sigmas = vec![first.1];
    let mut counts = vec![n];

    let grid = predictive_grid(data, spec, cfg.predictive_points);
    let mut pred_acc = vec![0.0; grid.len()];
    let mut pred_n = 0usize;
    let m0_grid: Vec<f64> = grid.iter().map(|x| base.marginal(*x)).collect();
    let mut kn = Vec::with_capacity(cfg.iters - cfg.burnin);

    for sweep in 0..cfg.iters {
        for i in 0..n {
            let c_old = assign[i];
            counts[c_old] -= 1;
            drop_if_empty(c_old, &mut counts, &mut mus, Some(&mut sigmas), &mut assign);
            let k = counts.len();
            let x = data[i];
            let mut weights = Vec::with_capacity(k + 1);
            for c in 0..k {
                let lik = if stub { 1.0 } else { normal_pdf_at(x, mus[c], sigmas[c]) };
                weights.push(counts[c] as f64 * lik);
            }
            weights.push(lambda * m0[i]);
            let choice = pick_weighted(&weights, rng);
            if choice == k {
                let cell = if stub {
                    base.sample_cell(0.0, 0.0, 0.0, rng)
                } else {
                    base.sample_cell(1.0, x, x * x, rng)
                };
                mus.push(cell.0);
                sigmas.push(cell.1);
                counts.push(1);
                assign[i] = k;
            } else {
                counts[choice] += 1;
                assign[i] = choice;
            }
        }

        // Parameter refresh per cluster from the grid posterior.
        let k = counts.len();
        let mut c1 = vec![0.0; k];
        let mut c2 = vec![0.0; k];
        for (i, &c) in assign.iter().enumerate() {
            c1[c] += data[i];
            c2[c] += data[i] * data[i];
        }
        for c in 0..k {
            let eff = if stub { 0.0 } else { counts[c] as f64 };
            let cell = base.sample_cell(eff, c1[c], c2[c], rng);
            mus[c] = cell.0;
            sigmas[c] = cell.1;
        }

        if sweep >= cfg.burnin {
            kn.push(counts.len() as u32);
            if (sweep - cfg.burnin) % cfg.predictive_thin == 0 {
                let denom = n as f64 + lambda;
                for (gi, gx) in grid.iter().enumerate() {
                    let mut p = lambda / denom * m0_grid[gi];
                    for c in 0..counts.len() {
                        p += counts[c] as f64 / denom * normal_pdf_at(*gx, mus[c], sigmas[c]);
                    }
                    pred_acc[gi] += p;
                }
                pred_n += 1;
            }
        }
    }
    for v in pred_acc.iter_mut() {
        *v /= pred_n.max(1) as f64;
    }
    let state = ClusterState { assignments: assign, mus, sigmas, counts };
    finish(cfg, SweepAccum { kn, grid, pred: pred_acc, state })
}

fn gibbs_kind2(
    data: &[f64],
    lambda: f64,
    spec: &DpMixSpec,
    cfg: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<GibbsOutput> {
    let n = data.len();
    let stub = cfg.likelihood_stub;
    let ns = spec.sigma_grid_points.max(1);
    let (slo, shi) = spec.sigma_bounds;
    let sig_grid: Vec<f64> = if ns == 1 || slo == shi {
        vec![slo]
    } else {
        (0..ns)
            .map(|j| (slo.ln() + (shi.ln() - slo.ln()) * j as f64 / (ns - 1) as f64).exp())
            .collect()
    };
    let base_mean = spec.base_mean;
    let base_var = spec.base_sd * spec.base_sd;

    let mut sigma = sig_grid[sig_grid.len() / 2];
    let mut assign = vec![0usize; n];
    let mut mus = vec![base_mean];
    let mut counts = vec![n];

    let draw_mu = |count: f64, s1: f64, sigma: f64, rng: &mut RngStream| -> f64 {
        // Conjugate normal update against the N(base_mean, base_var) base.
        let prec = count / (sigma * sigma) + 1.0 / base_var;
        let mean = (s1 / (sigma * sigma) + base_mean / base_var) / prec;
        mean + (1.0 / prec).sqrt()
            * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    };

    let grid = predictive_grid(data, spec, cfg.predictive_points);
    let mut pred_acc = vec![0.0; grid.len()];
    let mut pred_n = 0usize;
    let mut kn = Vec::with_capacity(cfg.iters - cfg.burnin);

    for sweep in 0..cfg.iters {
        for i in 0..n {
            let c_old = assign[i];
            counts[c_old] -= 1;
            drop_if_empty(c_old, &mut counts, &mut mus, None, &mut assign);
            let k = counts.len();
            let x = data[i];
            let mut weights = Vec::with_capacity(k + 1);
            for c in 0..k {
                let lik = if stub { 1.0 } else { normal_pdf_at(x, mus[c], sigma) };
                weights.push(counts[c] as f64 * lik);
            }
            let m0 = if stub {
                1.0
            } else {
                normal_pdf_at(x, base_mean, (sigma * sigma + base_var).sqrt()).max(1e-300)
            };
            weights.push(lambda * m0);
            let choice = pick_weighted(&weights, rng);
            if choice == k {
                let mu = if stub {
                    draw_mu(0.0, 0.0, sigma, rng)
                } else {
                    draw_mu(1.0, x, sigma, rng)
                };
                mus.push(mu);
                counts.push(1);
                assign[i] = k;
            } else {
                counts[choice] += 1;
                assign[i] = choice;
            }
        }

        // Cluster means.
        let k = counts.len();
        let mut c1 = vec![0.0; k];
        for (i, &c) in assign.iter().enumerate() {
            c1[c] += data[i];
        }
        for c in 0..k {
            let eff = if stub { 0.0 } else { counts[c] as f64 };
            mus[c] = draw_mu(eff, c1[c], sigma, rng);
        }

        // Shared scale on its grid, via the pooled squared deviations.
        if !stub && sig_grid.len() > 1 {
            let ss: f64 =
                data.iter().zip(&assign).map(|(x, c)| (x - mus[*c]) * (x - mus[*c])).sum();
            let logits: Vec<f64> = sig_grid
                .iter()
                .map(|s| -(n as f64) * (s.ln() + LN_SQRT_2PI) - 0.5 * ss / (s * s))
                .collect();
            sigma = sig_grid[sample_categorical_log(&logits, rng)];
        }

        if sweep >= cfg.burnin {
            kn.push(counts.len() as u32);
            if (sweep - cfg.burnin) % cfg.predictive_thin == 0 {
                let denom = n as f64 + lambda;
                let m0_sd = (sigma * sigma + base_var).sqrt();
                for (gi, gx) in grid.iter().enumerate() {
                    let mut p = lambda / denom * normal_pdf_at(*gx, base_mean, m0_sd);
                    for c in 0..counts.len() {
                        p += counts[c] as f64 / denom * normal_pdf_at(*gx, mus[c], sigma);
                    }
                    pred_acc[gi] += p;
                }
                pred_n += 1;
            }
        }
    }
    for v in pred_acc.iter_mut() {
        *v /= pred_n.max(1) as f64;
    }
    let sigmas = vec![sigma; counts.len()];
    let state = ClusterState { assignments: assign, mus, sigmas, counts };
    finish(cfg, SweepAccum { kn, grid, pred: pred_acc, state })
}

// ---------------------------------------------------------------------------
// The occupied-cluster equation and its solver
// ---------------------------------------------------------------------------

/// sum_{j=1..n} lambda / (lambda + j - 1): the prior expectation of the
/// occupied-cluster count. Strictly increasing in lambda for n >= 2, with
/// range (1, n).
pub fn liu_lhs(lambda: f64, n: usize) -> f64 {
    assert!(lambda > 0.0, "liu_lhs: lambda must be > 0");
    (0..n).map(|j| lambda / (lambda + j as f64)).sum()
}

#[derive(Debug, Clone)]
pub struct PrecisionFit {
    pub lambda_hat: f64,
    /// (lambda, E[K_n | lambda, data]) visited by the outer iteration.
    pub trace: Vec<(f64, f64)>,
    /// |lhs(lambda_hat) - E[K_n | lambda_hat]| from a final chain run.
    pub residual: f64,
    pub residual_se: f64,
    pub e_kn_final: f64,
    /// The estimated cluster-count mean was pinned to an edge of its
    /// feasible range and lambda_hat was clamped to the bracket.
    pub degenerate: bool,
    pub mixing_warning: bool,
}

/// Stochastic fixed-point solver for the DP precision: alternate a Gibbs
/// estimate of E[K_n | lambda, data] with an exact monotone solve of the
/// occupied-cluster equation, until the precision moves by less than 1%.
pub fn liu_solver(
    data: &[f64],
    spec: &DpMixSpec,
    lambda_bracket: (f64, f64),
    outer_iters: usize,
    cfg: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<PrecisionFit> {
    let (blo, bhi) = lambda_bracket;
    if !(blo > 0.0 && blo < bhi) {
        return Err(Error::domain("liu_solver: need 0 < lambda_lo < lambda_hi"));
    }
    let n = data.len();
    let mut lambda = (blo * bhi).sqrt();
    let mut trace = Vec::new();
    let mut degenerate = false;
    let mut mixing_warning = false;

    for _ in 0..outer_iters.max(1) {
        let out = crp_gibbs(data, lambda, spec, cfg, rng)?;
        mixing_warning |= out.mixing_warning;
        let e = out.e_kn;
        trace.push((lambda, e));
        if e <= 1.0 + 1e-9 || e >= n as f64 - 1e-9 {
            // Single-cluster (or saturated) regime: the equation pins lambda
            // to an edge only in the limit; clamp and flag.
            lambda = if e <= 1.0 + 1e-9 { blo } else { bhi };
            degenerate = true;
            break;
        }
        let next = solve_occupancy(e, n, blo, bhi)?;
        let moved = (next - lambda).abs();
        lambda = next;
        if moved < 0.01 * lambda {
            break;
        }
    }

    let out = crp_gibbs(data, lambda, spec, cfg, rng)?;
    mixing_warning |= out.mixing_warning;
    let residual = (liu_lhs(lambda, n) - out.e_kn).abs();
    Ok(PrecisionFit {
        lambda_hat: lambda,
        trace,
        residual,
        residual_se: out.e_kn_se,
        e_kn_final: out.e_kn,
        degenerate,
        mixing_warning,
    })
}

/// Solve sum lambda/(lambda + j - 1) = target for lambda in [lo, hi],
/// clamping to the bracket when the target is out of reach.
pub fn solve_occupancy(target: f64, n: usize, lo: f64, hi: f64) -> Result<f64> {
    let f = |l: f64| liu_lhs(l, n) - target;
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    if f(hi) <= 0.0 {
        return Ok(hi);
    }
    find_root(f, lo, hi, 1e-10 * hi)
}

// ---------------------------------------------------------------------------
// Plug-in EB for the base-measure mean (kind II)
// ---------------------------------------------------------------------------

/// Plug the sample mean into the base measure and summarize the posterior by
/// its predictive density. The log-marginal field is not produced by this
/// procedure (the estimator is a moment plug-in, not a marginal maximizer)
/// and is reported as NaN.
pub fn eb_plug_in_mean(
    data: &[f64],
    spec: &DpMixSpec,
    cfg: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<(EbResult, GibbsOutput)> {
    if spec.kind != DpMixKind::LocationII {
        return Err(Error::domain("eb_plug_in_mean: spec must be LocationII"));
    }
    if data.is_empty() {
        return Err(Error::domain("eb_plug_in_mean: empty dataset"));
    }
    let xbar = data.iter().sum::<f64>() / data.len() as f64;
    let mut plugged = spec.clone();
    plugged.base_mean = xbar;
    let out = crp_gibbs(data, spec.precision, &plugged, cfg, rng)?;
    let eb = EbResult::new(HyperParam::interior(vec![xbar]), f64::NAN, out.predictive.clone());
    Ok((eb, out))
}

// ---------------------------------------------------------------------------
// Stick-breaking diagnostics and mixture helpers
// ---------------------------------------------------------------------------

/// Truncated stick-breaking weights for DP(lambda): `n_sticks` Beta(1,
/// lambda) breaks; returns the weights and the leftover mass.
pub fn stick_breaking_weights(
    lambda: f64,
    n_sticks: usize,
    rng: &mut RngStream,
) -> (Vec<f64>, f64) {
    let mut weights = Vec::with_capacity(n_sticks);
    let mut remaining = 1.0;
    for _ in 0..n_sticks {
        let u: f64 = rng.random_range(0.0..1.0);
        // Beta(1, lambda) by inverse CDF.
        let v = 1.0 - (1.0 - u).powf(1.0 / lambda);
        weights.push(remaining * v);
        remaining *= 1.0 - v;
    }
    (weights, remaining)
}

/// Smallest truncation level whose mean leftover mass (lambda/(lambda+1))^N
/// falls below `tol`.
pub fn truncation_for_leftover(lambda: f64, tol: f64) -> usize {
    let r = lambda / (lambda + 1.0);
    (tol.ln() / r.ln()).ceil().max(10.0) as usize
}

/// Density of a Gaussian mixture given as (weight, mean, sd) triples.
pub fn mixture_density(components: &[(f64, f64, f64)], x: f64) -> f64 {
    components.iter().map(|(w, mu, sd)| w * normal_pdf_at(x, *mu, *sd)).sum()
}

/// Draw from a Gaussian mixture given as (weight, mean, sd) triples.
pub fn sample_mixture(components: &[(f64, f64, f64)], rng: &mut RngStream) -> f64 {
    let total: f64 = components.iter().map(|c| c.0).sum();
    let mut u = rng.random_range(0.0..total);
    for (w, mu, sd) in components {
        u -= w;
        if u <= 0.0 {
            return mu + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        }
    }
    let (_, mu, sd) = components[components.len() - 1];
    mu + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_i() -> DpMixSpec {
        DpMixSpec {
            kind: DpMixKind::LocationScaleI,
            precision: 1.0,
            mu_support: (-8.0, 8.0),
            base_mean: 0.0,
            base_sd: 3.0,
            sigma_bounds: (0.5, 2.0),
            truncation_level: 50,
            mu_grid_points: 64,
            sigma_grid_points: 16,
        }
    }

    #[test]
    fn liu_lhs_values_and_monotonicity() {
        // n = 3, lambda = 1: 1 + 1/2 + 1/3.
        assert!((liu_lhs(1.0, 3) - (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-14);
        // Small lambda: only the j = 1 term survives.
        assert!((liu_lhs(1e-12, 5) - 1.0).abs() < 1e-9);
        // Large lambda: every term goes to 1.
        assert!((liu_lhs(1e12, 5) - 5.0).abs() < 1e-9);
        // Strict monotonicity on random pairs.
        let mut rng = RngStream::new(5, 0);
        for _ in 0..1000 {
            let a = rng.random_range(0.01..50.0);
            let b = rng.random_range(0.01..50.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if hi - lo > 1e-9 {
                assert!(liu_lhs(lo, 20) < liu_lhs(hi, 20));
            }
        }
    }

    #[test]
    fn occupancy_solver_inverts_lhs() {
        let lam = solve_occupancy(2.0, 50, 1e-4, 100.0).unwrap();
        assert!((liu_lhs(lam, 50) - 2.0).abs() < 1e-7);
    }

    #[test]
    fn constant_likelihood_chain_matches_crp_prior_mean() {
        // With the likelihood stubbed to 1 the chain samples the bare CRP,
        // so E[K_n] must match the exact prior mean.
        let spec = spec_i();
        let cfg = GibbsConfig {
            iters: 3000,
            burnin: 500,
            likelihood_stub: true,
            predictive_points: 64,
            predictive_thin: 50,
        };
        let mut rng = RngStream::new(42, 1);
        let data: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let out = crp_gibbs(&data, 1.0, &spec, &cfg, &mut rng).unwrap();
        let exact = liu_lhs(1.0, 50);
        assert!(
            (out.e_kn - exact).abs() <= 3.0 * out.e_kn_se.max(1e-3),
            "E[Kn] = {} vs exact {} (se {})",
            out.e_kn,
            exact,
            out.e_kn_se
        );
    }

    #[test]
    fn single_observation_has_one_cluster() {
        let spec = spec_i();
        let cfg = GibbsConfig {
            iters: 300,
            burnin: 100,
            likelihood_stub: false,
            predictive_points: 64,
            predictive_thin: 10,
        };
        let mut rng = RngStream::new(7, 0);
        let out = crp_gibbs(&[0.3], 1.0, &spec, &cfg, &mut rng).unwrap();
        assert!(out.kn_samples.iter().all(|k| *k == 1));
        assert_eq!(out.e_kn, 1.0);
        assert_eq!(out.final_state.k_n(), 1);
        assert_eq!(out.final_state.assignments, vec![0]);
    }

    #[test]
    fn stub_solver_fixed_point_residual_small() {
        // Under the constant likelihood any lambda is a fixed point in
        // expectation: the solver stops with a residual within Monte Carlo
        // noise.
        let spec = spec_i();
        let cfg = GibbsConfig {
            iters: 2000,
            burnin: 400,
            likelihood_stub: true,
            predictive_points: 64,
            predictive_thin: 50,
        };
        let mut rng = RngStream::new(11, 0);
        let data: Vec<f64> = (0..50).map(|i| (i % 10) as f64).collect();
        let fit = liu_solver(&data, &spec, (0.05, 20.0), 8, &cfg, &mut rng).unwrap();
        assert!(
            fit.residual <= 3.0 * fit.residual_se.max(0.05),
            "residual {} se {}",
            fit.residual,
            fit.residual_se
        );
        assert!(!fit.trace.is_empty());
    }

    #[test]
    fn single_observation_solver_is_degenerate() {
        // With one observation the occupancy equation reads 1 = E[K_1] for
        // every lambda; the solver clamps to the bracket and flags it.
        let spec = spec_i();
        let cfg = GibbsConfig { iters: 200, burnin: 100, ..Default::default() };
        let mut rng = RngStream::new(13, 0);
        let fit = liu_solver(&[0.7], &spec, (0.1, 5.0), 5, &cfg, &mut rng).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.lambda_hat, 0.1);
    }

    #[test]
    fn deterministic_given_stream() {
        let spec = spec_i();
        let cfg = GibbsConfig { iters: 200, burnin: 100, ..Default::default() };
        let data: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
        let a = crp_gibbs(&data, 1.0, &spec, &cfg, &mut RngStream::new(9, 5)).unwrap();
        let b = crp_gibbs(&data, 1.0, &spec, &cfg, &mut RngStream::new(9, 5)).unwrap();
        assert_eq!(a.kn_samples, b.kn_samples);
        assert_eq!(a.e_kn, b.e_kn);
    }

    #[test]
    fn stick_breaking_leftover() {
        let lambda = 1.0;
        let n = truncation_for_leftover(lambda, 1e-6);
        assert!((lambda / (lambda + 1.0)).powi(n as i32) < 1e-6);
        let mut rng = RngStream::new(3, 3);
        for _ in 0..200 {
            let (w, leftover) = stick_breaking_weights(lambda, n, &mut rng);
            let total: f64 = w.iter().sum::<f64>() + leftover;
            assert!((total - 1.0).abs() < 1e-12);
        }
        // Mean deviation of the truncated weight sum from 1 stays below 1e-5.
        let mut sum_dev = 0.0;
        for _ in 0..200 {
            let (w, _) = stick_breaking_weights(lambda, n, &mut rng);
            sum_dev += 1.0 - w.iter().sum::<f64>();
        }
        assert!(sum_dev / 200.0 < 1e-5, "mean leftover {}", sum_dev / 200.0);
    }

    #[test]
    fn plug_in_mean_is_sample_mean() {
        let spec = DpMixSpec {
            kind: DpMixKind::LocationII,
            precision: 1.0,
            mu_support: (-10.0, 10.0),
            base_mean: 0.0,
            base_sd: 2.0,
            sigma_bounds: (0.7, 1.5),
            truncation_level: 50,
            mu_grid_points: 64,
            sigma_grid_points: 16,
        };
        let cfg = GibbsConfig { iters: 200, burnin: 100, ..Default::default() };
        let data = vec![2.5; 30];
        let mut rng = RngStream::new(21, 0);
        let (eb, _) = eb_plug_in_mean(&data, &spec, &cfg, &mut rng).unwrap();
        assert_eq!(eb.lambda_hat.values, vec![2.5]);
        assert!(!eb.degenerate);
        assert!(eb.log_marginal_at_hat.is_nan());
    }

    #[test]
    fn plug_in_estimator_sampling_law_is_gaussian() {
        // The plug-in hyperparameter is the sample mean, so across
        // replications it follows N(m0, var(X1)/n) by the CLT; Kolmogorov
        // distance of 1e4 standardized draws to the normal CDF stays small.
        let comps = [(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)];
        let m0 = 0.0;
        let var_x = 5.0; // 0.5 (1 + 4) + 0.5 (1 + 4)
        let (n, reps) = (50usize, 10_000usize);
        let mut rng = RngStream::new(55, 0);
        let mut zs: Vec<f64> = (0..reps)
            .map(|_| {
                let mean =
                    (0..n).map(|_| sample_mixture(&comps, &mut rng)).sum::<f64>() / n as f64;
                (mean - m0) / (var_x / n as f64).sqrt()
            })
            .collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, z) in zs.iter().enumerate() {
            let cdf = crate::special::normal_cdf(*z).unwrap();
            ks = ks.max((cdf - i as f64 / reps as f64).abs());
            ks = ks.max((cdf - (i + 1) as f64 / reps as f64).abs());
        }
        assert!(ks < 0.05, "Kolmogorov distance to the CLT law: {ks}");
    }

    #[test]
    fn exchangeability_smoke() {
        let spec = spec_i();
        let cfg = GibbsConfig { iters: 1500, burnin: 300, ..Default::default() };
        let mut data: Vec<f64> = (0..60)
            .map(|i| if i % 2 == 0 { -2.0 } else { 2.0 } + (i as f64 * 0.71).sin())
            .collect();
        let a = crp_gibbs(&data, 1.0, &spec, &cfg, &mut RngStream::new(33, 0)).unwrap();
        data.reverse();
        let b = crp_gibbs(&data, 1.0, &spec, &cfg, &mut RngStream::new(33, 0)).unwrap();
        let se = (a.e_kn_se * a.e_kn_se + b.e_kn_se * b.e_kn_se).sqrt();
        assert!(
            (a.e_kn - b.e_kn).abs() <= 3.0 * se.max(0.05),
            "{} vs {} (se {})",
            a.e_kn,
            b.e_kn,
            se
        );
    }

    #[test]
    fn two_component_fixture_finds_few_clusters() {
        let spec = spec_i();
        let cfg = GibbsConfig { iters: 600, burnin: 200, ..Default::default() };
        let comps = [(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)];
        let mut rng = RngStream::new(17, 0);
        let data: Vec<f64> = (0..200).map(|_| sample_mixture(&comps, &mut rng)).collect();
        let out = crp_gibbs(&data, 1.0, &spec, &cfg, &mut rng).unwrap();
        // Modal occupied-cluster count lands in a small range around 2.
        let mut histo = std::collections::BTreeMap::new();
        for k in &out.kn_samples {
            *histo.entry(*k).or_insert(0usize) += 1;
        }
        let modal = histo.iter().max_by_key(|(_, c)| **c).map(|(k, _)| *k).unwrap();
        assert!((2..=3).contains(&modal), "modal K = {modal}, E[Kn] = {}", out.e_kn);
    }
}
