//! Posterior representations shared by every model family.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use crate::special;

/// The ways a posterior can be carried around: closed forms where conjugacy
/// gives them, point masses for the degenerate cases, and sampled or gridded
/// forms for the mixture models.
#[derive(Debug, Clone)]
pub enum PosteriorRep {
    GaussianCf { mean: f64, variance: f64 },
    MultiGaussianCf { mean: Vec<f64>, covariance: Matrix },
    ScaledStudentCf { location: Vec<f64>, scale: Matrix, df: f64 },
    PointMass { point: Vec<f64> },
    DiscreteWeights { support: Vec<f64>, weights: Vec<f64> },
    ParticleCloud { samples: Vec<f64> },
    DensityGrid { xs: Vec<f64>, density: Vec<f64> },
}

impl PosteriorRep {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        PosteriorRep::GaussianCf { mean, variance }
    }

    pub fn point_mass_1d(x: f64) -> Self {
        PosteriorRep::PointMass { point: vec![x] }
    }

    pub fn dim(&self) -> usize {
        match self {
            PosteriorRep::GaussianCf { .. }
            | PosteriorRep::DiscreteWeights { .. }
            | PosteriorRep::ParticleCloud { .. }
            | PosteriorRep::DensityGrid { .. } => 1,
            PosteriorRep::MultiGaussianCf { mean, .. } => mean.len(),
            PosteriorRep::ScaledStudentCf { location, .. } => location.len(),
            PosteriorRep::PointMass { point } => point.len(),
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, PosteriorRep::PointMass { .. })
    }

    /// Structural invariants of each representation.
    pub fn validate(&self) -> Result<()> {
        match self {
            PosteriorRep::GaussianCf { variance, .. } => {
                if !(*variance > 0.0) {
                    return Err(Error::domain("GaussianCf: variance must be > 0"));
                }
            }
            PosteriorRep::MultiGaussianCf { mean, covariance } => {
                check_spd(covariance, mean.len(), "MultiGaussianCf covariance")?;
            }
            PosteriorRep::ScaledStudentCf { location, scale, df } => {
                if !(*df > 0.0) {
                    return Err(Error::domain("ScaledStudentCf: df must be > 0"));
                }
                check_spd(scale, location.len(), "ScaledStudentCf scale")?;
            }
            PosteriorRep::PointMass { point } => {
                if point.is_empty() || point.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain("PointMass: point must be finite and nonempty"));
                }
            }
            PosteriorRep::DiscreteWeights { support, weights } => {
                if support.len() != weights.len() || support.is_empty() {
                    return Err(Error::domain("DiscreteWeights: support/weights mismatch"));
                }
                if weights.iter().any(|w| *w < 0.0) {
                    return Err(Error::domain("DiscreteWeights: negative weight"));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::domain(format!(
                        "DiscreteWeights: weights sum to {s}, not 1"
                    )));
                }
            }
            PosteriorRep::ParticleCloud { samples } => {
                if samples.is_empty() {
                    return Err(Error::domain("ParticleCloud: no samples"));
                }
            }
            PosteriorRep::DensityGrid { xs, density } => {
                if xs.len() != density.len() || xs.len() < 2 {
                    return Err(Error::domain("DensityGrid: need >= 2 matching points"));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::domain("DensityGrid: abscissae must increase"));
                }
                if density.iter().any(|d| *d < 0.0 || !d.is_finite()) {
                    return Err(Error::domain("DensityGrid: density must be finite, >= 0"));
                }
                let mass = trapezoid_mass(xs, density);
                if !(0.999999..=1.000001).contains(&mass) {
                    return Err(Error::domain(format!("DensityGrid: trapezoid mass {mass}")));
                }
            }
        }
        Ok(())
    }

    /// Posterior mean (1-D reps and first coordinate of multivariate ones).
    pub fn mean1(&self) -> f64 {
        match self {
            PosteriorRep::GaussianCf { mean, .. } => *mean,
            PosteriorRep::MultiGaussianCf { mean, .. } => mean[0],
            PosteriorRep::ScaledStudentCf { location, .. } => location[0],
            PosteriorRep::PointMass { point } => point[0],
            PosteriorRep::DiscreteWeights { support, weights } => {
                support.iter().zip(weights).map(|(s, w)| s * w).sum()
            }
            PosteriorRep::ParticleCloud { samples } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
            PosteriorRep::DensityGrid { xs, density } => {
                let weighted: Vec<f64> = xs.iter().zip(density).map(|(x, d)| x * d).collect();
                trapezoid_mass(xs, &weighted)
            }
        }
    }

    /// The univariate marginal of the first coordinate, exact for the
    /// elliptical closed forms. Used where a multivariate posterior has to be
    /// compared through a computable 1-D witness.
    pub fn first_marginal(&self) -> PosteriorRep {
        match self {
            PosteriorRep::MultiGaussianCf { mean, covariance } => {
                PosteriorRep::GaussianCf { mean: mean[0], variance: covariance.at(0, 0) }
            }
            PosteriorRep::ScaledStudentCf { location, scale, df } => PosteriorRep::ScaledStudentCf {
                location: vec![location[0]],
                scale: Matrix::from_rows(vec![vec![scale.at(0, 0)]]),
                df: *df,
            },
            PosteriorRep::PointMass { point } => PosteriorRep::point_mass_1d(point[0]),
            other => other.clone(),
        }
    }

    /// Posterior probability of the complement of the ball of radius `eps`
    /// around `center` (1-D representations; multivariate point masses use
    /// the Euclidean norm).
    pub fn mass_outside_ball(&self, center: f64, eps: f64) -> Result<f64> {
        match self {
            PosteriorRep::GaussianCf { mean, variance } => {
                let s = variance.sqrt();
                let hi = special::normal_cdf((center + eps - mean) / s)?;
                let lo = special::normal_cdf((center - eps - mean) / s)?;
                Ok((1.0 - (hi - lo)).clamp(0.0, 1.0))
            }
            PosteriorRep::ScaledStudentCf { location, scale, df } => {
                if location.len() != 1 {
                    return Err(Error::domain(
                        "mass_outside_ball: multivariate Student not supported",
                    ));
                }
                let s = scale.at(0, 0).sqrt();
                let hi = special::student_t_cdf((center + eps - location[0]) / s, *df)?;
                let lo = special::student_t_cdf((center - eps - location[0]) / s, *df)?;
                Ok((1.0 - (hi - lo)).clamp(0.0, 1.0))
            }
            PosteriorRep::PointMass { point } => {
                let d2: f64 = point.iter().map(|p| (p - center) * (p - center)).sum();
                Ok(if d2.sqrt() < eps { 0.0 } else { 1.0 })
            }
            PosteriorRep::DiscreteWeights { support, weights } => Ok(support
                .iter()
                .zip(weights)
                .filter(|(s, _)| (*s - center).abs() >= eps)
                .map(|(_, w)| w)
                .sum()),
            PosteriorRep::ParticleCloud { samples } => {
                let outside = samples.iter().filter(|x| (*x - center).abs() >= eps).count();
                Ok(outside as f64 / samples.len() as f64)
            }
            PosteriorRep::DensityGrid { xs, density } => {
                let inside: f64 = trapezoid_mass_between(xs, density, center - eps, center + eps);
                Ok((1.0 - inside).clamp(0.0, 1.0))
            }
            PosteriorRep::MultiGaussianCf { .. } => Err(Error::domain(
                "mass_outside_ball: multivariate Gaussian not supported; take a marginal",
            )),
        }
    }
}

fn check_spd(m: &Matrix, dim: usize, what: &str) -> Result<()> {
    if m.rows != dim || m.cols != dim {
        return Err(Error::domain(format!("{what}: shape {}x{} vs dim {dim}", m.rows, m.cols)));
    }
    for i in 0..dim {
        for j in 0..dim {
            if (m.at(i, j) - m.at(j, i)).abs() > 1e-9 * (1.0 + m.at(i, i).abs()) {
                return Err(Error::domain(format!("{what}: not symmetric")));
            }
        }
    }
    cholesky(m).map_err(|_| Error::domain(format!("{what}: not positive definite")))?;
    Ok(())
}

/// Trapezoid mass of a sampled function.
pub fn trapezoid_mass(xs: &[f64], ys: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..xs.len() {
        s += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    s
}

/// Trapezoid mass restricted to [lo, hi], interpolating the boundary cells.
pub fn trapezoid_mass_between(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> f64 {
    let mut s = 0.0;
    for i in 1..xs.len() {
        let (x0, x1) = (xs[i - 1], xs[i]);
        if x1 <= lo || x0 >= hi {
            continue;
        }
        let a = x0.max(lo);
        let b = x1.min(hi);
        let y_at = |x: f64| {
            let t = (x - x0) / (x1 - x0);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        };
        s += 0.5 * (y_at(a) + y_at(b)) * (b - a);
    }
    s
}

/// Linear interpolation of a density grid (0 outside the grid).
pub fn grid_pdf(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => ys[i],
        Err(i) => {
            let (x0, x1) = (xs[i - 1], xs[i]);
            let t = (x - x0) / (x1 - x0);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        }
    }
}
