//! Per-family replication runners and the built-in scenario templates.

use crate::config::{
    BahadurTruth, DpmixIITruth, DpmixITruth, Family, FamilyTruth, GRef, GaussianCase1Truth,
    GaussianCase2Truth, GaussianCase3Truth, GpriorTruth, ModelselectTruth, Scenario,
};
use eblab_core::bahadur::{
    bayes_posterior, build_family, eb_gaussian_cdf_prior, sample_p_theta,
    BahadurFamily,
};
use eblab_core::curve::{MetricId, RepOutcome, Replicable};
use eblab_core::dpmix::{
    crp_gibbs, eb_plug_in_mean, liu_solver, mixture_density, sample_mixture, DpMixKind, DpMixSpec,
    GibbsConfig,
};
use eblab_core::error::{Error, Result};
use eblab_core::gaussian::{eb_case1, eb_case2, eb_case3, posterior_fixed, GaussianData};
use eblab_core::gprior::{
    g_hat, oracle_g, posterior_beta_given_g, simulate_regression, DesignKind,
};
use eblab_core::linalg::Matrix;
use eblab_core::metrics::{
    hellinger, kl_div, kolmogorov_on_functional, l1_distance, tv_distance, Functional,
};
use eblab_core::modelselect::eb_model_posterior;
use eblab_core::posterior::{trapezoid_mass, PosteriorRep};
use eblab_core::rng::RngStream;

/// Everything a replication needs, preprocessed once per scenario.
pub struct Runner {
    truth: FamilyTruth,
    metrics: Vec<MetricId>,
    epsilon: Option<f64>,
    /// Window family shared by every replication (bahadur only).
    bahadur_family: Option<BahadurFamily>,
    /// Fixed design matrix, when the regression family uses one.
    fixed_design: Option<Matrix>,
    /// Fixed dataset, when a mixture family reads one from CSV.
    fixed_data: Option<Vec<f64>>,
}

impl Runner {
    pub fn new(
        scenario: &Scenario,
        fixed_design: Option<Matrix>,
        fixed_data: Option<Vec<f64>>,
    ) -> Result<Runner> {
        let bahadur_family = match &scenario.truth {
            FamilyTruth::Bahadur(t) => Some(build_family(t.c, t.k_max, 1e-10)?),
            _ => None,
        };
        Ok(Runner {
            truth: scenario.truth.clone(),
            metrics: scenario.metrics.clone(),
            epsilon: scenario.config.epsilon,
            bahadur_family,
            fixed_design,
            fixed_data,
        })
    }

    fn mixture_data(
        &self,
        components: &[(f64, f64, f64)],
        n: usize,
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        match &self.fixed_data {
            Some(data) => {
                if data.len() != n {
                    return Err(Error::domain(format!(
                        "fixed dataset has {} rows but n = {n}",
                        data.len()
                    )));
                }
                Ok(data.clone())
            }
            None => Ok((0..n).map(|_| sample_mixture(components, rng)).collect()),
        }
    }

    /// The averaged predictive density of one mixture fit, used to emit the
    /// (x, density) CSV artifacts. Non-mixture families have none.
    pub fn predictive_density(
        &self,
        n: usize,
        rng: &mut RngStream,
    ) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let rep = match &self.truth {
            FamilyTruth::DpmixI(t) => {
                let data = self.mixture_data(&t.components, n, rng)?;
                let (spec, cfg) = dpmix_i_setup(t);
                let fit = liu_solver(&data, &spec, t.lambda_bracket, t.outer_iters, &cfg, rng)?;
                crp_gibbs(&data, fit.lambda_hat, &spec, &cfg, rng)?.predictive
            }
            FamilyTruth::DpmixIi(t) => {
                let data = self.mixture_data(&t.components, n, rng)?;
                let (spec, cfg) = dpmix_ii_setup(t, &data);
                eb_plug_in_mean(&data, &spec, &cfg, rng)?.0.posterior
            }
            _ => return Ok(None),
        };
        match rep {
            PosteriorRep::DensityGrid { xs, density } => Ok(Some((xs, density))),
            _ => Ok(None),
        }
    }

    fn wants(&self, m: MetricId) -> bool {
        self.metrics.contains(&m)
    }

    /// Distance metrics between the EB posterior and the comparator, plus the
    /// family-agnostic event bookkeeping.
    fn distances(
        &self,
        out: &mut RepOutcome,
        eb_posterior: &PosteriorRep,
        reference: &PosteriorRep,
    ) -> Result<()> {
        let mut tv_value = None;
        if self.wants(MetricId::Tv) {
            let r = tv_distance(eb_posterior, reference)?;
            tv_value = Some(r.value);
            out.values.push((MetricId::Tv, r.value));
        }
        if self.wants(MetricId::L1) {
            out.values.push((MetricId::L1, l1_distance(eb_posterior, reference)?.value));
        }
        if self.wants(MetricId::Hellinger) {
            out.values.push((MetricId::Hellinger, hellinger(eb_posterior, reference)?.value));
        }
        if self.wants(MetricId::Kl) {
            out.values.push((MetricId::Kl, kl_div(eb_posterior, reference)?.value));
        }
        if self.wants(MetricId::Kolmogorov) {
            let r = kolmogorov_on_functional(eb_posterior, reference, Functional::Identity)?;
            out.values.push((MetricId::Kolmogorov, r.value));
        }
        if tv_value.is_none() {
            // The TV = 1 event log is wanted even when TV is not among the
            // requested curve metrics, as long as it is cheap to obtain.
            if eb_posterior.is_point_mass() {
                tv_value = Some(tv_distance(eb_posterior, reference)?.value);
            }
        }
        out.tv_one = tv_value.map(|v| v == 1.0);
        Ok(())
    }

    fn push_if(&self, out: &mut RepOutcome, m: MetricId, v: f64) {
        if self.wants(m) {
            out.values.push((m, v));
        }
    }
}

impl Replicable for Runner {
    fn replicate(&self, n: usize, rng: &mut RngStream) -> Result<RepOutcome> {
        match &self.truth {
            FamilyTruth::GaussianCase1(t) => self.gaussian_case1(t, n, rng),
            FamilyTruth::GaussianCase2(t) => self.gaussian_case2(t, n, rng),
            FamilyTruth::GaussianCase3(t) => self.gaussian_case3(t, n, rng),
            FamilyTruth::Gprior(t) => self.gprior(t, n, rng),
            FamilyTruth::Modelselect(t) => self.modelselect(t, n, rng),
            FamilyTruth::DpmixI(t) => self.dpmix_i(t, n, rng),
            FamilyTruth::DpmixIi(t) => self.dpmix_ii(t, n, rng),
            FamilyTruth::Bahadur(t) => self.bahadur(t, n, rng),
        }
    }
}

impl Runner {
    fn gaussian_case1(
        &self,
        t: &GaussianCase1Truth,
        n: usize,
        rng: &mut RngStream,
    ) -> Result<RepOutcome> {
        let data = GaussianData::simulate(n, t.theta0, t.sigma2, rng);
        let eb = eb_case1(&data, t.tau2, t.sigma2)?;
        let reference = posterior_fixed(&data, t.m_ref, t.tau2, t.sigma2)?;
        let mut out = RepOutcome { degenerate: eb.degenerate, ..Default::default() };
        self.distances(&mut out, &eb.posterior, &reference)?;
        if let Some(eps) = self.epsilon {
            if self.wants(MetricId::ConsistencyMass) {
                out.values
                    .push((MetricId::ConsistencyMass, eb.posterior.mass_outside_ball(t.theta0, eps)?));
            }
        }
        self.push_if(&mut out, MetricId::LambdaHatError, (eb.lambda_hat.values[0] - t.theta0).abs());
        self.push_if(&mut out, MetricId::DegeneracyFreq, eb.degenerate as u8 as f64);
        Ok(out)
    }

    fn gaussian_case2(
        &self,
        t: &GaussianCase2Truth,
        n: usize,
        rng: &mut RngStream,
    ) -> Result<RepOutcome> {
        let data = GaussianData::simulate(n, t.theta0, t.sigma2, rng);
        let eb = eb_case2(&data, t.m, t.sigma2)?;
        let reference = posterior_fixed(&data, t.m, t.tau2_ref, t.sigma2)?;
        let mut out = RepOutcome { degenerate: eb.degenerate, ..Default::default() };
        self.distances(&mut out, &eb.posterior, &reference)?;
        if let Some(eps) = self.epsilon {
            if self.wants(MetricId::ConsistencyMass) {
                out.values
                    .push((MetricId::ConsistencyMass, eb.posterior.mass_outside_ball(t.theta0, eps)?));
            }
        }
        // The prior-oracle value of tau2 at a misspecified prior mean is
        // (theta0 - m)^2; at m = theta0 it is the boundary point 0.
        let tau2_oracle = (t.theta0 - t.m) * (t.theta0 - t.m);
        self.push_if(&mut out, MetricId::LambdaHatError, (eb.lambda_hat.values[0] - tau2_oracle).abs());
        self.push_if(&mut out, MetricId::DegeneracyFreq, eb.degenerate as u8 as f64);
        Ok(out)
    }

    fn gaussian_case3(
        &self,
        t: &GaussianCase3Truth,
        n: usize,
        rng: &mut RngStream,
    ) -> Result<RepOutcome> {
        let data = GaussianData::simulate(n, t.theta0, t.sigma2, rng);
        let eb = eb_case3(&data, t.sigma2)?;
        let reference = posterior_fixed(&data, t.m_ref, t.tau2_ref, t.sigma2)?;
        let mut out = RepOutcome { degenerate: eb.degenerate, ..Default::default() };
        self.distances(&mut out, &eb.posterior, &reference)?;
        if let Some(eps) = self.epsilon {
            if self.wants(MetricId::ConsistencyMass) {
                out.values
                    .push((MetricId::ConsistencyMass, eb.posterior.mass_outside_ball(t.theta0, eps)?));
            }
        }
        self.push_if(&mut out, MetricId::LambdaHatError, (eb.lambda_hat.values[0] - t.theta0).abs());
        self.push_if(&mut out, MetricId::DegeneracyFreq, eb.degenerate as u8 as f64);
        Ok(out)
    }

    fn gprior(&self, t: &GpriorTruth, n: usize, rng: &mut RngStream) -> Result<RepOutcome> {
        let data = if let Some(x) = &self.fixed_design {
            if x.rows != n {
                return Err(Error::domain(format!(
                    "fixed design has {} rows but n = {n}",
                    x.rows
                )));
            }
            simulate_regression(
                n,
                t.k,
                t.alpha0,
                &t.beta0,
                t.sigma0_2,
                DesignKind::FixedMatrix,
                Some(x),
                rng,
            )?
        } else {
            simulate_regression(
                n,
                t.k,
                t.alpha0,
                &t.beta0,
                t.sigma0_2,
                DesignKind::IidNormal,
                None,
                rng,
            )?
        };
        let ols = data.ols()?;
        let gh = g_hat(&ols);
        let eb_post = posterior_beta_given_g(&data, &ols, gh)?;
        let g_ref = match t.g_ref {
            GRef::Fixed(g) => g,
            GRef::Oracle => oracle_g(&data, &t.beta0, t.sigma0_2)?.max(1e-8),
        };
        let reference = posterior_beta_given_g(&data, &ols, g_ref)?;
        // Distances are taken on the first-coordinate marginals: a computable
        // witness that lower-bounds the joint distance.
        let eb_m = eb_post.first_marginal();
        let ref_m = reference.first_marginal();

        let mut out = RepOutcome { degenerate: gh == 0.0, ..Default::default() };
        self.distances(&mut out, &eb_m, &ref_m)?;
        if let Some(eps) = self.epsilon {
            if self.wants(MetricId::ConsistencyMass) {
                out.values.push((MetricId::ConsistencyMass, eb_m.mass_outside_ball(t.beta0[0], eps)?));
            }
        }
        if self.wants(MetricId::LambdaHatError) {
            let oracle = oracle_g(&data, &t.beta0, t.sigma0_2)?;
            out.values.push((MetricId::LambdaHatError, (gh - oracle).abs()));
        }
        self.push_if(&mut out, MetricId::DegeneracyFreq, (gh == 0.0) as u8 as f64);
        Ok(out)
    }

    fn modelselect(&self, t: &ModelselectTruth, n: usize, rng: &mut RngStream) -> Result<RepOutcome> {
        let mut beta0 = vec![0.0; t.m];
        for b in beta0.iter_mut().take(t.k0) {
            *b = t.signal;
        }
        let data =
            simulate_regression(n, t.m, 0.0, &beta0, t.sigma0_2, DesignKind::IidNormal, None, rng)?;
        let post = eb_model_posterior(&data, n as f64)?;
        let mut out = RepOutcome { degenerate: post.degenerate, ..Default::default() };
        let oracle_p = t.k0 as f64 / t.m as f64;
        self.push_if(&mut out, MetricId::LambdaHatError, (post.p_hat - oracle_p).abs());
        self.push_if(&mut out, MetricId::DegeneracyFreq, post.degenerate as u8 as f64);
        Ok(out)
    }

    /// DensityGrid of the true mixture on the same abscissae as a predictive.
    fn truth_grid(components: &[(f64, f64, f64)], xs: &[f64]) -> Result<PosteriorRep> {
        let raw: Vec<f64> = xs.iter().map(|x| mixture_density(components, *x)).collect();
        let mass = trapezoid_mass(xs, &raw);
        if !(mass > 0.0) {
            return Err(Error::domain("truth grid carries no mass"));
        }
        let density: Vec<f64> = raw.iter().map(|d| d / mass).collect();
        Ok(PosteriorRep::DensityGrid { xs: xs.to_vec(), density })
    }

    fn dpmix_i(&self, t: &DpmixITruth, n: usize, rng: &mut RngStream) -> Result<RepOutcome> {
        let data = self.mixture_data(&t.components, n, rng)?;
        let (spec, cfg) = dpmix_i_setup(t);
        let fit = liu_solver(&data, &spec, t.lambda_bracket, t.outer_iters, &cfg, rng)?;
        let out_gibbs = crp_gibbs(&data, fit.lambda_hat, &spec, &cfg, rng)?;
        let predictive = out_gibbs.predictive;
        let xs = match &predictive {
            PosteriorRep::DensityGrid { xs, .. } => xs.clone(),
            _ => unreachable!(),
        };
        let truth = Self::truth_grid(&t.components, &xs)?;
        let mut out = RepOutcome { degenerate: fit.degenerate, ..Default::default() };
        self.distances(&mut out, &predictive, &truth)?;
        self.push_if(&mut out, MetricId::DegeneracyFreq, fit.degenerate as u8 as f64);
        Ok(out)
    }

    fn dpmix_ii(&self, t: &DpmixIITruth, n: usize, rng: &mut RngStream) -> Result<RepOutcome> {
        let data = self.mixture_data(&t.components, n, rng)?;
        let (spec, cfg) = dpmix_ii_setup(t, &data);
        let (eb, _) = eb_plug_in_mean(&data, &spec, &cfg, rng)?;
        let xs = match &eb.posterior {
            PosteriorRep::DensityGrid { xs, .. } => xs.clone(),
            _ => unreachable!(),
        };
        let truth = Self::truth_grid(&t.components, &xs)?;
        let mut out = RepOutcome { degenerate: eb.degenerate, ..Default::default() };
        self.distances(&mut out, &eb.posterior, &truth)?;
        if self.wants(MetricId::LambdaHatError) {
            let m0: f64 = t.components.iter().map(|(w, mu, _)| w * mu).sum();
            out.values.push((MetricId::LambdaHatError, (eb.lambda_hat.values[0] - m0).abs()));
        }
        self.push_if(&mut out, MetricId::DegeneracyFreq, eb.degenerate as u8 as f64);
        Ok(out)
    }

    fn bahadur(&self, t: &BahadurTruth, n: usize, rng: &mut RngStream) -> Result<RepOutcome> {
        let family = self.bahadur_family.as_ref().expect("family built at construction");
        let data = sample_p_theta(family, t.theta0, n, rng)?;
        let (eb, scan) = eb_gaussian_cdf_prior(family, &data, t.sigma_floor)?;
        if !scan.dominated_everywhere {
            return Err(Error::Scenario(
                "marginal exceeded the maximized likelihood on the scan grid".into(),
            ));
        }
        let prior = vec![1.0 / t.k_max as f64; t.k_max];
        let reference = bayes_posterior(family, &prior, &data)?;
        let mut out = RepOutcome { degenerate: eb.degenerate, ..Default::default() };
        self.distances(&mut out, &eb.posterior, &reference)?;
        if let Some(eps) = self.epsilon {
            if self.wants(MetricId::ConsistencyMass) {
                out.values.push((
                    MetricId::ConsistencyMass,
                    eb.posterior.mass_outside_ball(t.theta0 as f64, eps)?,
                ));
            }
        }
        self.push_if(&mut out, MetricId::DegeneracyFreq, eb.degenerate as u8 as f64);
        Ok(out)
    }
}

fn dpmix_i_setup(t: &DpmixITruth) -> (DpMixSpec, GibbsConfig) {
    (
        DpMixSpec {
            kind: DpMixKind::LocationScaleI,
            precision: 1.0,
            mu_support: t.mu_support,
            base_mean: t.base_mean,
            base_sd: t.base_sd,
            sigma_bounds: t.sigma_bounds,
            truncation_level: t.truncation_level,
            mu_grid_points: 256,
            sigma_grid_points: 64,
        },
        GibbsConfig {
            iters: t.gibbs_iters,
            burnin: t.gibbs_burnin,
            likelihood_stub: false,
            predictive_points: 512,
            predictive_thin: 5,
        },
    )
}

fn dpmix_ii_setup(t: &DpmixIITruth, data: &[f64]) -> (DpMixSpec, GibbsConfig) {
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0;
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0;
    (
        DpMixSpec {
            kind: DpMixKind::LocationII,
            precision: t.precision,
            mu_support: (lo, hi),
            base_mean: 0.0,
            base_sd: t.base_sd,
            sigma_bounds: t.sigma_bounds,
            truncation_level: t.truncation_level,
            mu_grid_points: 256,
            sigma_grid_points: 64,
        },
        GibbsConfig {
            iters: t.gibbs_iters,
            burnin: t.gibbs_burnin,
            likelihood_stub: false,
            predictive_points: 512,
            predictive_thin: 5,
        },
    )
}

/// One built-in template per family, sized for a quick run.
pub fn templates() -> Vec<(Family, &'static str, serde_json::Value)> {
    use serde_json::json;
    vec![
        (
            Family::GaussianCase1,
            "strong merging of the prior-mean fit against a fixed prior",
            json!({
                "name": "gaussian_case1_demo",
                "family": "gaussian_case1",
                "truth": {"theta0": 0.0, "sigma2": 1.0, "tau2": 1.0, "m_ref": 1.0},
                "n_grid": [25, 100, 400, 1600],
                "reps": 400,
                "metrics": ["L1", "consistency_mass", "lambda_hat_error"],
                "seed": 20240801,
                "epsilon": 0.5,
                "output_dir": "out"
            }),
        ),
        (
            Family::GaussianCase2,
            "prior-variance fit degenerating at the prior mean with positive probability",
            json!({
                "name": "gaussian_case2_demo",
                "family": "gaussian_case2",
                "truth": {"theta0": 0.0, "sigma2": 1.0, "m": 0.0, "tau2_ref": 1.0},
                "n_grid": [10, 100],
                "reps": 2000,
                "metrics": ["TV", "degeneracy_freq"],
                "seed": 20240802,
                "output_dir": "out"
            }),
        ),
        (
            Family::GaussianCase3,
            "joint mean-variance fit collapsing to the point mass at the sample mean",
            json!({
                "name": "gaussian_case3_demo",
                "family": "gaussian_case3",
                "truth": {"theta0": 0.0, "sigma2": 1.0, "m_ref": 0.0, "tau2_ref": 1.0},
                "n_grid": [25, 100],
                "reps": 500,
                "metrics": ["TV", "degeneracy_freq", "consistency_mass"],
                "seed": 20240803,
                "epsilon": 0.5,
                "output_dir": "out"
            }),
        ),
        (
            Family::Gprior,
            "regression g fit: degeneracy frequency and merging diagnostics",
            json!({
                "name": "gprior_demo",
                "family": "gprior",
                "truth": {"k": 2, "beta0": [0.0, 0.0], "sigma0_2": 1.0, "g_ref": 1.0},
                "n_grid": [200],
                "reps": 2000,
                "metrics": ["TV", "degeneracy_freq"],
                "seed": 20240804,
                "output_dir": "out"
            }),
        ),
        (
            Family::Modelselect,
            "inclusion-probability fit concentrating near k0/m",
            json!({
                "name": "modelselect_demo",
                "family": "modelselect",
                "truth": {"m": 8, "k0": 2, "signal": 0.25, "sigma0_2": 1.0},
                "n_grid": [500],
                "reps": 100,
                "metrics": ["lambda_hat_error", "degeneracy_freq"],
                "seed": 20240805,
                "output_dir": "out"
            }),
        ),
        (
            Family::DpmixI,
            "DP precision fit by the occupied-cluster equation",
            json!({
                "name": "dpmix_I_demo",
                "family": "dpmix_I",
                "truth": {
                    "components": [[0.5, -5.0, 1.0], [0.5, 5.0, 1.0]],
                    "mu_support": [-10.0, 10.0],
                    "base_mean": 0.0,
                    "base_sd": 4.0,
                    "sigma_bounds": [0.5, 2.0],
                    "lambda_bracket": [0.05, 20.0],
                    "outer_iters": 6,
                    "gibbs_iters": 800,
                    "gibbs_burnin": 200
                },
                "n_grid": [200],
                "reps": 4,
                "metrics": ["Hellinger", "degeneracy_freq"],
                "seed": 20240806,
                "output_dir": "out"
            }),
        ),
        (
            Family::DpmixIi,
            "plug-in base-mean fit with Hellinger consistency of the predictive",
            json!({
                "name": "dpmix_II_demo",
                "family": "dpmix_II",
                "truth": {
                    "components": [[0.5, -2.0, 1.0], [0.5, 2.0, 1.0]],
                    "precision": 1.0,
                    "base_sd": 3.0,
                    "sigma_bounds": [0.7, 1.5],
                    "gibbs_iters": 400,
                    "gibbs_burnin": 150
                },
                "n_grid": [50, 200, 500],
                "reps": 20,
                "metrics": ["Hellinger", "lambda_hat_error"],
                "seed": 20240807,
                "output_dir": "out"
            }),
        ),
        (
            Family::Bahadur,
            "window family: well-behaved Bayes posterior next to the collapsed marginal fit",
            json!({
                "name": "bahadur_demo",
                "family": "bahadur",
                "truth": {"c": 0.5, "k_max": 8, "theta0": 2},
                "n_grid": [20, 80, 320],
                "reps": 100,
                "metrics": ["TV", "consistency_mass", "degeneracy_freq"],
                "seed": 20240808,
                "epsilon": 0.5,
                "output_dir": "out"
            }),
        ),
    ]
}
