//! A discrete family of densities on [0, 1] built around the steep envelope
//! h(x) = exp(1/x^2): member theta has density h on the window
//! (a_theta, a_{theta-1}] and a flat plateau C elsewhere, with the window
//! edges defined recursively so each member integrates to one. The family's
//! maximum-likelihood estimator is the classical cautionary example: any
//! proper prior on theta yields a well-behaved posterior, while the marginal
//! maximizer over a Gaussian-CDF prior family collapses onto the MLE.

use crate::error::{Error, Result};
use crate::model::{EbResult, HyperParam};
use crate::optimize::find_root;
use crate::posterior::PosteriorRep;
use crate::quad::{integrate, QuadSpec};
use crate::rng::RngStream;
use crate::special::{log_sum_exp, normal_cdf};
use rand::RngExt;

/// Window evaluations of exp(1/x^2) below this x would overflow long before
/// the recursion could reach it; used as the feasibility guard.
const X_GUARD: f64 = 0.06;

const SPIKE_TABLE_POINTS: usize = 4096;

fn envelope(x: f64) -> f64 {
    (1.0 / (x * x)).exp()
}

/// Inverse-CDF table over one window of the envelope.
#[derive(Debug, Clone)]
struct SpikeTable {
    xs: Vec<f64>,
    /// Cumulative integral of the envelope from the window's left edge.
    cum: Vec<f64>,
}

impl SpikeTable {
    fn build(lo: f64, hi: f64) -> SpikeTable {
        let n = SPIKE_TABLE_POINTS;
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let mut cum = vec![0.0; n];
        for i in 1..n {
            cum[i] = cum[i - 1]
                + 0.5 * (envelope(xs[i]) + envelope(xs[i - 1])) * (xs[i] - xs[i - 1]);
        }
        SpikeTable { xs, cum }
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        let total = self.cum[self.cum.len() - 1];
        let target = rng.random_range(0.0..total);
        let i = self.cum.partition_point(|c| *c < target).max(1);
        let (c0, c1) = (self.cum[i - 1], self.cum[i]);
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }
}

/// The family: window edges a_0 = 1 > a_1 > ... > a_K > 0 and the plateau
/// level C.
#[derive(Debug, Clone)]
pub struct BahadurFamily {
    pub c: f64,
    pub a: Vec<f64>,
    pub k_max: usize,
    tables: Vec<SpikeTable>,
}

/// Recursively construct the window edges: each a_k solves
/// integral_{a_k}^{a_{k-1}} (h - C) = 1 - C.
pub fn build_family(c: f64, k_max: usize, tol: f64) -> Result<BahadurFamily> {
    build_family_with_guard(c, k_max, tol, X_GUARD)
}

pub(crate) fn build_family_with_guard(
    c: f64,
    k_max: usize,
    tol: f64,
    guard: f64,
) -> Result<BahadurFamily> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::domain("build_family: need 0 < C < 1"));
    }
    if k_max < 1 {
        return Err(Error::domain("build_family: need K >= 1"));
    }
    let spec = QuadSpec { abs_tol: 1e-12, rel_tol: 1e-12, max_subdivisions: 20_000 };
    let mut a = vec![1.0];
    for k in 1..=k_max {
        let prev = a[k - 1];
        let objective = |lo: f64| -> f64 {
            let v = integrate(|x| envelope(x) - c, lo, prev, &spec)
                .map(|r| r.value)
                .unwrap_or(f64::NAN);
            v - (1.0 - c)
        };
        // Walk the left edge down until the window holds enough mass.
        let mut left = prev - (1.0 - c) / (envelope(prev) - c).max(1e-9);
        loop {
            if left < guard {
                return Err(Error::Capacity { max_feasible_k: k - 1 });
            }
            if objective(left) >= 0.0 {
                break;
            }
            left = prev - 2.0 * (prev - left);
        }
        let root = find_root(objective, left, prev - 1e-15, tol.min(1e-9))?;
        if root >= prev {
            return Err(Error::domain("build_family: window collapsed"));
        }
        a.push(root);
    }
    let tables = (1..=k_max).map(|k| SpikeTable::build(a[k], a[k - 1])).collect();
    Ok(BahadurFamily { c, a, k_max, tables })
}

impl BahadurFamily {
    /// Window of member theta: (a_theta, a_{theta-1}].
    pub fn window(&self, theta: usize) -> Result<(f64, f64)> {
        if theta < 1 || theta > self.k_max {
            return Err(Error::domain(format!("theta {theta} outside 1..={}", self.k_max)));
        }
        Ok((self.a[theta], self.a[theta - 1]))
    }

    /// Probability mass of the window under member theta:
    /// (1 - C) + C (a_{theta-1} - a_theta).
    pub fn window_mass(&self, theta: usize) -> Result<f64> {
        let (lo, hi) = self.window(theta)?;
        Ok(1.0 - self.c + self.c * (hi - lo))
    }

    pub fn density(&self, theta: usize, x: f64) -> Result<f64> {
        let (lo, hi) = self.window(theta)?;
        if !(0.0..=1.0).contains(&x) {
            return Ok(0.0);
        }
        Ok(if x > lo && x <= hi { envelope(x) } else { self.c })
    }

    pub fn log_density(&self, theta: usize, x: f64) -> Result<f64> {
        let (lo, hi) = self.window(theta)?;
        if !(0.0..=1.0).contains(&x) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(if x > lo && x <= hi { 1.0 / (x * x) } else { self.c.ln() })
    }
}

/// Draw n observations from member theta: the window via the precomputed
/// inverse-CDF table, the plateau uniformly over its two pieces.
pub fn sample_p_theta(
    family: &BahadurFamily,
    theta: usize,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (lo, hi) = family.window(theta)?;
    let spike_mass = family.window_mass(theta)?;
    let table = &family.tables[theta - 1];
    let left_len = lo;
    let right_len = 1.0 - hi;
    let plateau_len = left_len + right_len;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(0.0..1.0);
        if u < spike_mass {
            out.push(table.draw(rng));
        } else {
            let v = rng.random_range(0.0..plateau_len);
            out.push(if v <= left_len { v } else { hi + (v - left_len) });
        }
    }
    Ok(out)
}

/// Exact log likelihood of `data` under member theta.
pub fn loglik(family: &BahadurFamily, theta: usize, data: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &x in data {
        let l = family.log_density(theta, x)?;
        if l == f64::NEG_INFINITY {
            return Err(Error::domain(format!("observation {x} outside [0, 1]")));
        }
        total += l;
    }
    Ok(total)
}

/// Maximum-likelihood member; ties resolve to the smallest index.
pub fn mle_discrete(family: &BahadurFamily, data: &[f64]) -> Result<usize> {
    let mut best = 1;
    let mut best_ll = loglik(family, 1, data)?;
    for theta in 2..=family.k_max {
        let ll = loglik(family, theta, data)?;
        if ll > best_ll {
            best_ll = ll;
            best = theta;
        }
    }
    Ok(best)
}

/// Exact discrete posterior over members under an explicit prior.
pub fn bayes_posterior(
    family: &BahadurFamily,
    prior_weights: &[f64],
    data: &[f64],
) -> Result<PosteriorRep> {
    if prior_weights.len() != family.k_max {
        return Err(Error::domain("bayes_posterior: prior length != K"));
    }
    if prior_weights.iter().any(|w| *w <= 0.0) {
        return Err(Error::domain("bayes_posterior: prior weights must be positive"));
    }
    let sum: f64 = prior_weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain("bayes_posterior: prior weights must sum to 1"));
    }
    let logs: Vec<f64> = (1..=family.k_max)
        .map(|theta| Ok(prior_weights[theta - 1].ln() + loglik(family, theta, data)?))
        .collect::<Result<_>>()?;
    let norm = log_sum_exp(&logs);
    let weights: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
    let support: Vec<f64> = (1..=family.k_max).map(|t| t as f64).collect();
    Ok(PosteriorRep::DiscreteWeights { support, weights })
}

/// Prior weight of member theta under the Gaussian-CDF family at
/// lambda = (m, sigma), exactly as the family is defined (the reflected pair
/// for theta > 1 included verbatim; it is numerically negligible for m >= 0
/// and small sigma).
pub fn gaussian_cdf_prior_weight(theta: usize, m: f64, sigma: f64) -> Result<f64> {
    let phi = |z: f64| normal_cdf(z);
    let t = theta as f64;
    if theta == 1 {
        Ok(phi((0.5 - m) / sigma)? - phi((-0.5 - m) / sigma)?)
    } else {
        Ok(phi((t - 0.5 - m) / sigma)? - phi((t - 1.5 - m) / sigma)?
            + phi((-t - 1.5 - m) / sigma)?
            - phi((-t - 0.5 - m) / sigma)?)
    }
}

/// Diagnostics of the grid search over (m, sigma).
#[derive(Debug, Clone)]
pub struct EbPriorScan {
    pub best_m: f64,
    pub best_sigma: f64,
    pub max_log_marginal: f64,
    pub sup_loglik: f64,
    /// log m(data | m, sigma) <= sup-likelihood held on every grid point.
    pub dominated_everywhere: bool,
}

/// Marginal maximization over the Gaussian-CDF prior family on an (m, sigma)
/// grid with sigma down to `sigma_floor`. The supremum is approached at
/// m = theta_hat - 1 as sigma shrinks, with value approaching the maximized
/// likelihood, so the returned EB posterior is the point mass at the MLE with
/// the boundary flag set on the sigma coordinate.
pub fn eb_gaussian_cdf_prior(
    family: &BahadurFamily,
    data: &[f64],
    sigma_floor: f64,
) -> Result<(EbResult, EbPriorScan)> {
    if !(sigma_floor > 0.0 && sigma_floor < 1.0) {
        return Err(Error::domain("eb_gaussian_cdf_prior: need 0 < sigma_floor < 1"));
    }
    let lls: Vec<f64> =
        (1..=family.k_max).map(|t| loglik(family, t, data)).collect::<Result<_>>()?;
    let theta_hat = mle_discrete(family, data)?;
    let sup_loglik = lls[theta_hat - 1];

    // m over [0, K] in quarter steps (the integer points carry the suprema);
    // sigma on a log grid from the floor up to 1, so ties across the flat
    // small-sigma stretch resolve to the boundary the limit lives on.
    let m_grid: Vec<f64> = (0..=(4 * family.k_max)).map(|i| i as f64 * 0.25).collect();
    let n_sigma = 33;
    let sig_grid: Vec<f64> = (0..n_sigma)
        .map(|j| (sigma_floor.ln() * (n_sigma - 1 - j) as f64 / (n_sigma - 1) as f64).exp())
        .collect();

    let mut best = (m_grid[0], sig_grid[0], f64::NEG_INFINITY);
    let mut dominated = true;
    for &m in &m_grid {
        for &sigma in &sig_grid {
            let mut terms = Vec::with_capacity(family.k_max);
            for theta in 1..=family.k_max {
                let w = gaussian_cdf_prior_weight(theta, m, sigma)?;
                terms.push(if w > 0.0 { w.ln() + lls[theta - 1] } else { f64::NEG_INFINITY });
            }
            let log_m = log_sum_exp(&terms);
            if log_m > sup_loglik + 1e-9 {
                dominated = false;
            }
            if log_m > best.2 {
                best = (m, sigma, log_m);
            }
        }
    }
    let scan = EbPriorScan {
        best_m: best.0,
        best_sigma: best.1,
        max_log_marginal: best.2,
        sup_loglik,
        dominated_everywhere: dominated,
    };
    let lambda = HyperParam {
        values: vec![best.0, best.1],
        boundary_flags: vec![false, best.1 <= sigma_floor * (1.0 + 1e-12)],
    };
    let eb = EbResult::new(lambda, best.2, PosteriorRep::point_mass_1d(theta_hat as f64));
    Ok((eb, scan))
}
