//! Scenario configuration: strict JSON with a per-family truth block.
//! Unknown keys are rejected at every level and validation errors name the
//! offending key.

use eblab_core::curve::MetricId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    GaussianCase1,
    GaussianCase2,
    GaussianCase3,
    Gprior,
    Modelselect,
    DpmixI,
    DpmixIi,
    Bahadur,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::GaussianCase1 => "gaussian_case1",
            Family::GaussianCase2 => "gaussian_case2",
            Family::GaussianCase3 => "gaussian_case3",
            Family::Gprior => "gprior",
            Family::Modelselect => "modelselect",
            Family::DpmixI => "dpmix_I",
            Family::DpmixIi => "dpmix_II",
            Family::Bahadur => "bahadur",
        }
    }

}

// The family names carry roman numerals; serde's snake_case rename would
// mangle them, so the two DP entries are pinned explicitly.
impl<'de> serde::Deserialize<'de> for FamilyTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let family = match s.as_str() {
            "gaussian_case1" => Family::GaussianCase1,
            "gaussian_case2" => Family::GaussianCase2,
            "gaussian_case3" => Family::GaussianCase3,
            "gprior" => Family::Gprior,
            "modelselect" => Family::Modelselect,
            "dpmix_I" => Family::DpmixI,
            "dpmix_II" => Family::DpmixIi,
            "bahadur" => Family::Bahadur,
            other => {
                return Err(serde::de::Error::custom(format!(
                    "unknown family \"{other}\" (expected one of gaussian_case1, gaussian_case2, gaussian_case3, gprior, modelselect, dpmix_I, dpmix_II, bahadur)"
                )))
            }
        };
        Ok(FamilyTag(family))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyTag(pub Family);

impl Serialize for FamilyTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.0.as_str())
    }
}

/// Raw scenario file. `truth` stays untyped until the family is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub family: FamilyTag,
    pub truth: serde_json::Value,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub metrics: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub output_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianCase1Truth {
    pub theta0: f64,
    pub sigma2: f64,
    pub tau2: f64,
    /// Prior mean of the fixed-hyperparameter comparator posterior.
    pub m_ref: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianCase2Truth {
    pub theta0: f64,
    pub sigma2: f64,
    /// Fixed prior mean of the family being fit.
    pub m: f64,
    /// Prior variance of the comparator posterior.
    pub tau2_ref: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianCase3Truth {
    pub theta0: f64,
    pub sigma2: f64,
    pub m_ref: f64,
    pub tau2_ref: f64,
}

/// Comparator hyperparameter for the regression scenarios: a fixed g, or the
/// per-replication prior-oracle value computed from the truth.
#[derive(Debug, Clone, PartialEq)]
pub enum GRef {
    Fixed(f64),
    Oracle,
}

impl Serialize for GRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GRef::Fixed(g) => s.serialize_f64(*g),
            GRef::Oracle => s.serialize_str("oracle"),
        }
    }
}

impl<'de> serde::Deserialize<'de> for GRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(GRef::Fixed)
                .ok_or_else(|| serde::de::Error::custom("g_ref must be a finite number")),
            serde_json::Value::String(s) if s == "oracle" => Ok(GRef::Oracle),
            _ => Err(serde::de::Error::custom("g_ref must be a number or \"oracle\"")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpriorTruth {
    pub k: usize,
    pub beta0: Vec<f64>,
    pub sigma0_2: f64,
    #[serde(default)]
    pub alpha0: f64,
    pub g_ref: GRef,
    /// Optional fixed design: CSV rows of covariates, no header. When set,
    /// every n in the grid must equal the row count.
    #[serde(default)]
    pub design_csv: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelselectTruth {
    /// Number of candidate covariates (max 20).
    pub m: usize,
    /// Number of active covariates; the leading k0 coefficients are set to
    /// `signal`.
    pub k0: usize,
    pub signal: f64,
    pub sigma0_2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpmixITruth {
    /// True density: (weight, mean, sd) triples. Ignored for data simulation
    /// when `data_csv` is set (distance metrics still compare against it).
    pub components: Vec<(f64, f64, f64)>,
    pub mu_support: (f64, f64),
    pub base_mean: f64,
    pub base_sd: f64,
    pub sigma_bounds: (f64, f64),
    pub lambda_bracket: (f64, f64),
    pub outer_iters: usize,
    pub gibbs_iters: usize,
    pub gibbs_burnin: usize,
    #[serde(default = "default_truncation")]
    pub truncation_level: usize,
    /// Optional fixed dataset: single-column CSV, no header. Replications
    /// then differ only through the sampler's randomness, and every n in the
    /// grid must equal the row count.
    #[serde(default)]
    pub data_csv: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpmixIITruth {
    pub components: Vec<(f64, f64, f64)>,
    pub precision: f64,
    pub base_sd: f64,
    pub sigma_bounds: (f64, f64),
    pub gibbs_iters: usize,
    pub gibbs_burnin: usize,
    #[serde(default = "default_truncation")]
    pub truncation_level: usize,
    /// Optional fixed dataset: single-column CSV, no header.
    #[serde(default)]
    pub data_csv: Option<String>,
}

fn default_truncation() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BahadurTruth {
    pub c: f64,
    pub k_max: usize,
    pub theta0: usize,
    #[serde(default = "default_sigma_floor")]
    pub sigma_floor: f64,
}

fn default_sigma_floor() -> f64 {
    1e-8
}

/// Fully validated scenario: family-typed truth and parsed metric set.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub truth: FamilyTruth,
    pub metrics: Vec<MetricId>,
}

#[derive(Debug, Clone)]
pub enum FamilyTruth {
    GaussianCase1(GaussianCase1Truth),
    GaussianCase2(GaussianCase2Truth),
    GaussianCase3(GaussianCase3Truth),
    Gprior(GpriorTruth),
    Modelselect(ModelselectTruth),
    DpmixI(DpmixITruth),
    DpmixIi(DpmixIITruth),
    Bahadur(BahadurTruth),
}

/// Metrics each family can actually produce.
pub fn allowed_metrics(family: Family) -> &'static [MetricId] {
    use MetricId::*;
    match family {
        Family::GaussianCase1 | Family::GaussianCase2 | Family::GaussianCase3 => &[
            Tv,
            L1,
            Hellinger,
            Kl,
            Kolmogorov,
            ConsistencyMass,
            LambdaHatError,
            DegeneracyFreq,
        ],
        Family::Gprior => &[
            Tv,
            L1,
            Hellinger,
            Kl,
            Kolmogorov,
            ConsistencyMass,
            LambdaHatError,
            DegeneracyFreq,
        ],
        Family::Modelselect => &[LambdaHatError, DegeneracyFreq],
        Family::DpmixI => &[Tv, L1, Hellinger, Kl, Kolmogorov, DegeneracyFreq],
        Family::DpmixIi => &[Tv, L1, Hellinger, Kl, Kolmogorov, LambdaHatError, DegeneracyFreq],
        Family::Bahadur => &[Tv, L1, Hellinger, Kl, Kolmogorov, ConsistencyMass, DegeneracyFreq],
    }
}

impl ScenarioConfig {
    pub fn parse(json: &str) -> Result<ScenarioConfig, String> {
        serde_json::from_str(json).map_err(|e| format!("config error: {e}"))
    }

    /// Schema and family-specific checks; returns the typed scenario.
    pub fn validate(self) -> Result<Scenario, String> {
        if self.name.is_empty() {
            return Err("config error: name must not be empty".into());
        }
        if self.n_grid.is_empty() {
            return Err("config error: n_grid must not be empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err("config error: n_grid not increasing".into());
        }
        if self.reps < 1 {
            return Err("config error: reps must be >= 1".into());
        }
        if self.metrics.is_empty() {
            return Err("config error: metrics must not be empty".into());
        }
        let family = self.family.0;
        let mut metrics = Vec::new();
        for m in &self.metrics {
            let id = MetricId::parse(m)
                .ok_or_else(|| format!("config error: unknown metric \"{m}\""))?;
            if !allowed_metrics(family).contains(&id) {
                return Err(format!(
                    "config error: metric \"{m}\" not available for family {}",
                    family.as_str()
                ));
            }
            if metrics.contains(&id) {
                return Err(format!("config error: duplicate metric \"{m}\""));
            }
            metrics.push(id);
        }
        if metrics.contains(&MetricId::ConsistencyMass) {
            match self.epsilon {
                Some(e) if e > 0.0 => {}
                _ => {
                    return Err(
                        "config error: consistency_mass requires a positive epsilon".into()
                    )
                }
            }
        }

        let truth = parse_truth(family, &self.truth)?;
        validate_truth(&truth, &self.n_grid)?;
        Ok(Scenario { config: self, truth, metrics })
    }
}

fn parse_truth(family: Family, value: &serde_json::Value) -> Result<FamilyTruth, String> {
    let err = |e: serde_json::Error| format!("config error in truth block: {e}");
    Ok(match family {
        Family::GaussianCase1 => {
            FamilyTruth::GaussianCase1(serde_json::from_value(value.clone()).map_err(err)?)
        }
        Family::GaussianCase2 => {
            FamilyTruth::GaussianCase2(serde_json::from_value(value.clone()).map_err(err)?)
        }
        Family::GaussianCase3 => {
            FamilyTruth::GaussianCase3(serde_json::from_value(value.clone()).map_err(err)?)
        }
        Family::Gprior => {
            FamilyTruth::Gprior(serde_json::from_value(value.clone()).map_err(err)?)
        }
        Family::Modelselect => {
            FamilyTruth::Modelselect(serde_json::from_value(value.clone()).map_err(err)?)
        }
        Family::DpmixI => FamilyTruth::DpmixI(serde_json::from_value(value.clone()).map_err(err)?),
        Family::DpmixIi => {
            FamilyTruth::DpmixIi(serde_json::from_value(value.clone()).map_err(err)?)
        }
        Family::Bahadur => {
            FamilyTruth::Bahadur(serde_json::from_value(value.clone()).map_err(err)?)
        }
    })
}

fn validate_truth(truth: &FamilyTruth, n_grid: &[usize]) -> Result<(), String> {
    match truth {
        FamilyTruth::GaussianCase1(t) => {
            if !(t.sigma2 > 0.0) {
                return Err("config error: sigma2 must be > 0".into());
            }
            if !(t.tau2 > 0.0) {
                return Err("config error: tau2 must be > 0".into());
            }
        }
        FamilyTruth::GaussianCase2(t) => {
            if !(t.sigma2 > 0.0) {
                return Err("config error: sigma2 must be > 0".into());
            }
            if !(t.tau2_ref > 0.0) {
                return Err("config error: tau2_ref must be > 0".into());
            }
        }
        FamilyTruth::GaussianCase3(t) => {
            if !(t.sigma2 > 0.0) {
                return Err("config error: sigma2 must be > 0".into());
            }
            if !(t.tau2_ref > 0.0) {
                return Err("config error: tau2_ref must be > 0".into());
            }
        }
        FamilyTruth::Gprior(t) => {
            if t.k == 0 {
                return Err("config error: k must be >= 1".into());
            }
            if t.beta0.len() != t.k {
                return Err("config error: beta0 length must equal k".into());
            }
            if !(t.sigma0_2 > 0.0) {
                return Err("config error: sigma0_2 must be > 0".into());
            }
            if let GRef::Fixed(g) = t.g_ref {
                if !(g > 0.0) {
                    return Err("config error: g_ref must be > 0".into());
                }
            }
            if let Some(n) = n_grid.iter().find(|n| **n <= t.k + 1) {
                return Err(format!("config error: n = {n} must exceed k + 1"));
            }
        }
        FamilyTruth::Modelselect(t) => {
            if t.m == 0 || t.m > eblab_core::modelselect::MAX_COVARIATES {
                return Err("config error: m must be in 1..=20".into());
            }
            if t.k0 > t.m {
                return Err("config error: k0 must be <= m".into());
            }
            if !(t.sigma0_2 > 0.0) {
                return Err("config error: sigma0_2 must be > 0".into());
            }
            if let Some(n) = n_grid.iter().find(|n| **n <= t.m + 1) {
                return Err(format!("config error: n = {n} must exceed m + 1"));
            }
        }
        FamilyTruth::DpmixI(t) => {
            validate_components(&t.components)?;
            if !(t.sigma_bounds.0 > 0.0 && t.sigma_bounds.0 <= t.sigma_bounds.1) {
                return Err("config error: sigma_bounds must satisfy 0 < lo <= hi".into());
            }
            if !(t.lambda_bracket.0 > 0.0 && t.lambda_bracket.0 < t.lambda_bracket.1) {
                return Err("config error: lambda_bracket must satisfy 0 < lo < hi".into());
            }
            if !(t.gibbs_iters > t.gibbs_burnin && t.gibbs_burnin >= 100) {
                return Err("config error: need gibbs_iters > gibbs_burnin >= 100".into());
            }
            if !(t.mu_support.0 < t.mu_support.1) {
                return Err("config error: mu_support must be a nonempty interval".into());
            }
        }
        FamilyTruth::DpmixIi(t) => {
            validate_components(&t.components)?;
            if !(t.precision > 0.0) {
                return Err("config error: precision must be > 0".into());
            }
            if !(t.sigma_bounds.0 > 0.0 && t.sigma_bounds.0 <= t.sigma_bounds.1) {
                return Err("config error: sigma_bounds must satisfy 0 < lo <= hi".into());
            }
            if !(t.gibbs_iters > t.gibbs_burnin && t.gibbs_burnin >= 100) {
                return Err("config error: need gibbs_iters > gibbs_burnin >= 100".into());
            }
        }
        FamilyTruth::Bahadur(t) => {
            if !(t.c > 0.0 && t.c < 1.0) {
                return Err("config error: c must lie in (0, 1)".into());
            }
            if t.k_max < 1 {
                return Err("config error: k_max must be >= 1".into());
            }
            if t.theta0 < 1 || t.theta0 > t.k_max {
                return Err("config error: theta0 must lie in 1..=k_max".into());
            }
            if !(t.sigma_floor > 0.0 && t.sigma_floor < 1.0) {
                return Err("config error: sigma_floor must lie in (0, 1)".into());
            }
        }
    }
    Ok(())
}

fn validate_components(components: &[(f64, f64, f64)]) -> Result<(), String> {
    if components.is_empty() {
        return Err("config error: components must not be empty".into());
    }
    for (w, _, sd) in components {
        if !(*w > 0.0) || !(*sd > 0.0) {
            return Err("config error: component weights and sds must be > 0".into());
        }
    }
    let total: f64 = components.iter().map(|c| c.0).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err("config error: component weights must sum to 1".into());
    }
    Ok(())
}
