//! The generic marginal-likelihood machinery shared by the model families:
//! hyperparameter points, EB results, the marginal MLE driver, and the
//! Kullback-Leibler prior-mass estimator.

use crate::error::{Error, Result};
use crate::optimize::{maximize_1d, GRID_POINTS};
use crate::posterior::PosteriorRep;
use crate::rng::RngStream;

/// A point in the hyperparameter space, with per-coordinate flags marking
/// values that landed on the boundary of the search box.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParam {
    pub values: Vec<f64>,
    pub boundary_flags: Vec<bool>,
}

impl HyperParam {
    pub fn interior(values: Vec<f64>) -> Self {
        let n = values.len();
        HyperParam { values, boundary_flags: vec![false; n] }
    }

    pub fn on_boundary(&self) -> bool {
        self.boundary_flags.iter().any(|b| *b)
    }
}

/// Outcome of one empirical-Bayes fit.
#[derive(Debug, Clone)]
pub struct EbResult {
    pub lambda_hat: HyperParam,
    pub log_marginal_at_hat: f64,
    pub posterior: PosteriorRep,
    pub degenerate: bool,
}

impl EbResult {
    pub fn new(lambda_hat: HyperParam, log_marginal_at_hat: f64, posterior: PosteriorRep) -> Self {
        let degenerate = posterior.is_point_mass() || lambda_hat.on_boundary();
        EbResult { lambda_hat, log_marginal_at_hat, posterior, degenerate }
    }
}

/// What a model family must expose for the generic driver: the log marginal
/// likelihood of the observed data at a hyperparameter, and the posterior the
/// hyperparameter induces. Implementors capture their data.
pub trait EbFamily {
    fn lambda_dim(&self) -> usize;
    fn log_marginal(&self, lambda: &[f64]) -> Result<f64>;
    fn posterior_at(&self, lambda: &HyperParam) -> Result<PosteriorRep>;
}

/// Maximize the marginal likelihood over a box. One-dimensional problems use
/// the grid-then-golden scan; two-dimensional ones use a 129 x 129 grid scan
/// followed by cyclic coordinate refinement (at most 50 cycles).
///
/// Boundary flags are set when a coordinate of the maximizer lies within
/// `tol` of its box face.
pub fn marginal_mle(
    family: &dyn EbFamily,
    bounds: &[(f64, f64)],
    tol: f64,
) -> Result<EbResult> {
    if bounds.len() != family.lambda_dim() {
        return Err(Error::domain("marginal_mle: bounds/dimension mismatch"));
    }
    match bounds.len() {
        1 => mle_1d(family, bounds[0], tol),
        2 => mle_2d(family, bounds, tol),
        d => Err(Error::domain(format!("marginal_mle: lambda dimension {d} not supported"))),
    }
}

fn finite_log_marginal(family: &dyn EbFamily, lambda: &[f64]) -> Result<f64> {
    let v = family.log_marginal(lambda)?;
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::model(lambda, format!("non-finite log marginal {v}")));
    }
    Ok(v)
}

fn mle_1d(family: &dyn EbFamily, (lo, hi): (f64, f64), tol: f64) -> Result<EbResult> {
    if !(lo < hi) {
        return Err(Error::domain("marginal_mle: empty box"));
    }
    // Scan the same grid the maximizer will use so a non-finite marginal
    // surfaces as a model error naming the offending lambda.
    let n = GRID_POINTS;
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        finite_log_marginal(family, &[x])?;
    }
    let (x, v) = maximize_1d(
        |x| family.log_marginal(&[x]).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        tol,
    );
    // Ties on a flat stretch resolve to the smallest lambda.
    let x = snap_flat_left(family, x, lo, tol, v);
    let lambda = HyperParam {
        values: vec![x],
        boundary_flags: vec![x - lo <= tol || hi - x <= tol],
    };
    let posterior = family.posterior_at(&lambda)?;
    Ok(EbResult::new(lambda, finite_log_marginal(family, &[x])?, posterior))
}

/// If the marginal is flat (within 1e-12) between `lo` and the located
/// maximizer, prefer the boundary point.
fn snap_flat_left(family: &dyn EbFamily, x: f64, lo: f64, tol: f64, v: f64) -> f64 {
    if x - lo <= tol {
        return x;
    }
    match family.log_marginal(&[lo]) {
        Ok(vl) if (vl - v).abs() <= 1e-12 * (1.0 + v.abs()) => lo,
        _ => x,
    }
}

fn mle_2d(family: &dyn EbFamily, bounds: &[(f64, f64)], tol: f64) -> Result<EbResult> {
    let (l0, h0) = bounds[0];
    let (l1, h1) = bounds[1];
    if !(l0 < h0 && l1 < h1) {
        return Err(Error::domain("marginal_mle: empty box"));
    }
    const G: usize = 129;
    let mut best = (l0, l1, f64::NEG_INFINITY);
    for i in 0..G {
        let x = l0 + (h0 - l0) * i as f64 / (G - 1) as f64;
        for j in 0..G {
            let y = l1 + (h1 - l1) * j as f64 / (G - 1) as f64;
            let v = finite_log_marginal(family, &[x, y])?;
            if v > best.2 {
                best = (x, y, v);
            }
        }
    }
    let step0 = (h0 - l0) / (G - 1) as f64;
    let step1 = (h1 - l1) / (G - 1) as f64;
    let (mut x, mut y, mut v) = best;
    // Pattern search: line-maximize each coordinate inside a window of the
    // current point, shrinking the window only when a full cycle stalls.
    // Correlated ridges need the travel, boundary ridges need the shrink.
    let mut w0 = step0;
    let mut w1 = step1;
    for _cycle in 0..50 {
        let (px, py) = (x, y);
        let (nx, vx) = maximize_1d(
            |t| family.log_marginal(&[t, y]).unwrap_or(f64::NEG_INFINITY),
            (x - w0).max(l0),
            (x + w0).min(h0),
            tol,
        );
        if vx > v {
            x = nx;
            v = vx;
        }
        let (ny, vy) = maximize_1d(
            |t| family.log_marginal(&[x, t]).unwrap_or(f64::NEG_INFINITY),
            (y - w1).max(l1),
            (y + w1).min(h1),
            tol,
        );
        if vy > v {
            y = ny;
            v = vy;
        }
        let moved = (x - px).abs().max((y - py).abs());
        if moved <= tol {
            if w0 <= 4.0 * tol && w1 <= 4.0 * tol {
                break;
            }
            w0 = (w0 * 0.35).max(2.0 * tol);
            w1 = (w1 * 0.35).max(2.0 * tol);
        }
    }
    let lambda = HyperParam {
        values: vec![x, y],
        boundary_flags: vec![x - l0 <= tol || h0 - x <= tol, y - l1 <= tol || h1 - y <= tol],
    };
    let posterior = family.posterior_at(&lambda)?;
    Ok(EbResult::new(lambda, v, posterior))
}

/// Monte Carlo estimate of the prior mass of the Kullback-Leibler ball
/// {theta : KL(theta0; theta) < eta}. `kl_to_truth` is the per-observation
/// divergence supplied by the model family; `sample_prior` draws from the
/// prior under the hyperparameter being checked.
pub fn kl_ball_prior_mass<T>(
    mut sample_prior: impl FnMut(&mut RngStream) -> T,
    kl_to_truth: impl Fn(&T) -> Result<f64>,
    eta: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if !(eta > 0.0) {
        return Err(Error::domain("kl_ball_prior_mass: eta must be > 0"));
    }
    if n_samples == 0 {
        return Err(Error::domain("kl_ball_prior_mass: n_samples must be >= 1"));
    }
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let theta = sample_prior(rng);
        if kl_to_truth(&theta)? < eta {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    let se = (p * (1.0 - p) / n_samples as f64).sqrt();
    Ok((p, se))
}
