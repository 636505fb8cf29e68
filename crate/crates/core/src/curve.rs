//! Replication engine: runs a model family over an n-grid with seeded,
//! disjoint RNG streams (optionally in parallel) and aggregates per-n
//! distance statistics into a `MergingCurve`.
//!
//! Aggregation is keyed by (n index, replication index), never by completion
//! order, so thread count cannot change any output.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    Tv,
    L1,
    Hellinger,
    Kl,
    Kolmogorov,
    ConsistencyMass,
    LambdaHatError,
    DegeneracyFreq,
}

impl MetricId {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricId::Tv => "tv",
            MetricId::L1 => "l1",
            MetricId::Hellinger => "hellinger",
            MetricId::Kl => "kl",
            MetricId::Kolmogorov => "kolmogorov",
            MetricId::ConsistencyMass => "consistency_mass",
            MetricId::LambdaHatError => "lambda_hat_error",
            MetricId::DegeneracyFreq => "degeneracy_freq",
        }
    }

    pub fn parse(s: &str) -> Option<MetricId> {
        Some(match s {
            "TV" | "tv" => MetricId::Tv,
            "L1" | "l1" => MetricId::L1,
            "Hellinger" | "hellinger" => MetricId::Hellinger,
            "KL" | "kl" => MetricId::Kl,
            "Kolmogorov" | "kolmogorov" => MetricId::Kolmogorov,
            "consistency_mass" => MetricId::ConsistencyMass,
            "lambda_hat_error" => MetricId::LambdaHatError,
            "degeneracy_freq" => MetricId::DegeneracyFreq,
            _ => return None,
        })
    }
}

/// One replication's contribution to the curve.
#[derive(Debug, Clone, Default)]
pub struct RepOutcome {
    pub values: Vec<(MetricId, f64)>,
    pub degenerate: bool,
    /// Whether the TV distance to the reference posterior equaled 1 exactly
    /// (only meaningful when the scenario computes TV events).
    pub tv_one: Option<bool>,
}

/// Per-replication record kept for the event log and replay.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub n: usize,
    pub rep: u64,
    pub outcome: Option<RepOutcome>,
    pub error: Option<String>,
}

/// A family that can run one replication at sample size `n`.
pub trait Replicable: Sync {
    fn replicate(&self, n: usize, rng: &mut RngStream) -> Result<RepOutcome>;
}

impl<F> Replicable for F
where
    F: Fn(usize, &mut RngStream) -> Result<RepOutcome> + Sync,
{
    fn replicate(&self, n: usize, rng: &mut RngStream) -> Result<RepOutcome> {
        self(n, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub reps_ok: usize,
}

/// Per-n distance statistics across replications, plus event frequencies.
#[derive(Debug, Clone)]
pub struct MergingCurve {
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub cells: BTreeMap<(usize, MetricId), CellSummary>,
    pub degenerate_freq: BTreeMap<usize, f64>,
    pub tv_one_freq: BTreeMap<usize, Option<f64>>,
    pub records: Vec<RepRecord>,
}

impl MergingCurve {
    pub fn summary(&self, n: usize, metric: MetricId) -> Option<&CellSummary> {
        self.cells.get(&(n, metric))
    }
}

/// Type-7 (linear interpolation) empirical quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> CellSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mean = if sorted.is_empty() { f64::NAN } else { sorted.iter().sum::<f64>() / sorted.len() as f64 };
    CellSummary {
        mean,
        median: quantile_sorted(&sorted, 0.5),
        q10: quantile_sorted(&sorted, 0.1),
        q90: quantile_sorted(&sorted, 0.9),
        reps_ok: sorted.len(),
    }
}

/// The RNG stream id owned by cell (n_idx, rep) of a run with `reps`
/// replications per n. Exposed so a single replication can be replayed in
/// isolation.
pub fn cell_stream_id(n_idx: usize, rep: usize, reps: usize) -> u64 {
    (n_idx * reps + rep) as u64
}

/// Run `reps` replications at every n in the grid. Failures are recorded and
/// skipped; the run aborts only if more than 5% of all cells fail.
pub fn run_curve(
    family: &dyn Replicable,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<MergingCurve> {
    if n_grid.is_empty() || reps == 0 {
        return Err(Error::domain("run_curve: empty n_grid or zero reps"));
    }
    let cells: Vec<(usize, usize)> =
        (0..n_grid.len()).flat_map(|i| (0..reps).map(move |r| (i, r))).collect();

    let work = |&(n_idx, rep): &(usize, usize)| -> RepRecord {
        let n = n_grid[n_idx];
        let mut rng = RngStream::new(seed, cell_stream_id(n_idx, rep, reps));
        match family.replicate(n, &mut rng) {
            Ok(outcome) => RepRecord { n, rep: rep as u64, outcome: Some(outcome), error: None },
            Err(e) => RepRecord { n, rep: rep as u64, outcome: None, error: Some(e.to_string()) },
        }
    };

    let records: Vec<RepRecord> = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
            pool.install(|| cells.par_iter().map(work).collect())
        }
        None => cells.par_iter().map(work).collect(),
    };

    let failed = records.iter().filter(|r| r.outcome.is_none()).count();
    if failed * 20 > records.len() {
        let first = records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Scenario(format!(
            "{failed}/{} replications failed (first error: {first})",
            records.len()
        )));
    }

    let mut cells_map: BTreeMap<(usize, MetricId), Vec<f64>> = BTreeMap::new();
    let mut degenerate: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut tv_one: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for rec in &records {
        let Some(out) = &rec.outcome else { continue };
        for (m, v) in &out.values {
            cells_map.entry((rec.n, *m)).or_default().push(*v);
        }
        let d = degenerate.entry(rec.n).or_insert((0, 0));
        d.0 += out.degenerate as usize;
        d.1 += 1;
        if let Some(t) = out.tv_one {
            let e = tv_one.entry(rec.n).or_insert((0, 0));
            e.0 += t as usize;
            e.1 += 1;
        }
    }

    let cells = cells_map.into_iter().map(|(k, v)| (k, summarize(&v))).collect();
    let degenerate_freq =
        degenerate.iter().map(|(n, (d, t))| (*n, *d as f64 / *t as f64)).collect();
    let tv_one_freq = n_grid
        .iter()
        .map(|n| (*n, tv_one.get(n).map(|(d, t)| *d as f64 / *t as f64)))
        .collect();

    Ok(MergingCurve {
        n_grid: n_grid.to_vec(),
        reps,
        cells,
        degenerate_freq,
        tv_one_freq,
        records,
    })
}
