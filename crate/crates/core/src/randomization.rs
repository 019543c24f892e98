//! Monte-Carlo view of how well simple 1:1 randomization balances age and
//! marital structure between two trial arms.
//!
//! Every replication draws its own ChaCha8 stream, selected by the replication
//! index, from a generator seeded with the caller's seed. Results therefore do
//! not depend on how replications are scheduled across threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bertillon::{MaritalStatus, Sex};
use crate::error::{Error, Result};
use crate::gompertz::AgeRoster;
use crate::regression::CountyRecord;

/// Identifier of the random stream layout, recorded in reports.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64/stream=replication";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subject {
    pub age: u32,
    pub sex: Sex,
    pub status: MaritalStatus,
}

/// Group-level statistic tracked across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MedianAge,
    /// Share of the group aged 65 or more.
    F65,
    /// Share of the group in one sex-by-marital-status cell.
    CellShare(Sex, MaritalStatus),
}

impl Metric {
    pub fn label(&self) -> String {
        match self {
            Metric::MedianAge => "median_age".into(),
            Metric::F65 => "f65".into(),
            Metric::CellShare(sex, st) => format!("cell_share:{sex}:{st}"),
        }
    }

    /// The metric on one group, or `None` when it is undefined there.
    pub fn evaluate(&self, group: &[Subject]) -> Option<f64> {
        if group.is_empty() {
            return None;
        }
        let n = group.len() as f64;
        match *self {
            Metric::MedianAge => AgeRoster::from_ages(group.iter().map(|s| s.age)).median().ok(),
            Metric::F65 => Some(group.iter().filter(|s| s.age >= 65).count() as f64 / n),
            Metric::CellShare(sex, st) => {
                Some(group.iter().filter(|s| s.sex == sex && s.status == st).count() as f64 / n)
            }
        }
    }

    /// Every sex-by-status cell, males first.
    pub fn all_cells() -> Vec<Metric> {
        Sex::ALL
            .into_iter()
            .flat_map(|sex| MaritalStatus::ALL.into_iter().map(move |st| Metric::CellShare(sex, st)))
            .collect()
    }
}

/// Mean, population standard deviation and CV of a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionReport {
    pub metric: String,
    pub mean: f64,
    /// Divide-by-n standard deviation.
    pub sd: f64,
    /// `sd / mean`; `None` when the mean is zero.
    pub cv: Option<f64>,
    /// Number of values that entered the statistics.
    pub n: usize,
    /// Replications where the metric was undefined.
    pub missing: usize,
}

impl DispersionReport {
    /// Summarises `values`; `None` entries are counted as missing.
    pub fn from_values(metric: impl Into<String>, values: &[Option<f64>]) -> Result<Self> {
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        if present.is_empty() {
            return Err(Error::Degenerate("no defined values to summarise".into()));
        }
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let sd = (present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(Self {
            metric: metric.into(),
            mean,
            sd,
            cv: (mean != 0.0).then(|| sd / mean.abs()),
            n: present.len(),
            missing: values.len() - present.len(),
        })
    }
}

/// Random stream for replication `index` under `seed`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Indices of a random halving of `0..len`: the first group gets the extra
/// member when `len` is odd.
pub fn split_indices(len: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(rng);
    let d = idx.split_off(len.div_ceil(2));
    (idx, d)
}

/// Randomly allocates `population` to a placebo and a drug group.
/// Uses the replication-0 stream of `seed`.
pub fn split(population: &[Subject], seed: u64) -> Result<(Vec<Subject>, Vec<Subject>)> {
    if population.len() < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 subjects to split, got {}",
            population.len()
        )));
    }
    let (p, d) = split_indices(population.len(), &mut replication_rng(seed, 0));
    Ok((
        p.into_iter().map(|i| population[i]).collect(),
        d.into_iter().map(|i| population[i]).collect(),
    ))
}

/// Value of `metric` on the placebo group of each replication, in
/// replication order.
pub fn replicate_metric_values(
    population: &[Subject],
    metric: Metric,
    replications: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    Ok(replicate_metrics(population, &[metric], replications, seed)?
        .into_iter()
        .map(|mut v| v.pop().flatten())
        .collect())
}

/// Like [`replicate_metric_values`] for several metrics at once, sharing the
/// splits. Row `r` holds the metrics for replication `r`.
pub fn replicate_metrics(
    population: &[Subject],
    metrics: &[Metric],
    replications: usize,
    seed: u64,
) -> Result<Vec<Vec<Option<f64>>>> {
    if population.len() < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 subjects to split, got {}",
            population.len()
        )));
    }
    if replications < 2 {
        return Err(Error::Domain(format!("need at least 2 replications, got {replications}")));
    }
    Ok((0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let (p, _) = split_indices(population.len(), &mut replication_rng(seed, r));
            let group: Vec<Subject> = p.into_iter().map(|i| population[i]).collect();
            metrics.iter().map(|m| m.evaluate(&group)).collect()
        })
        .collect())
}

pub fn replicate_dispersion(
    population: &[Subject],
    metric: Metric,
    replications: usize,
    seed: u64,
) -> Result<DispersionReport> {
    let values = replicate_metric_values(population, metric, replications, seed)?;
    DispersionReport::from_values(metric.label(), &values)
}

/// One report per metric, all computed from the same splits.
pub fn replicate_dispersion_many(
    population: &[Subject],
    metrics: &[Metric],
    replications: usize,
    seed: u64,
) -> Result<Vec<DispersionReport>> {
    let rows = replicate_metrics(population, metrics, replications, seed)?;
    metrics
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let column: Vec<Option<f64>> = rows.iter().map(|row| row[k]).collect();
            DispersionReport::from_values(m.label(), &column)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountyField {
    MedianAge,
    F65,
}

impl CountyField {
    pub fn label(&self) -> &'static str {
        match self {
            CountyField::MedianAge => "median_age",
            CountyField::F65 => "f65",
        }
    }
}

/// Dispersion of a field across analysis units (counties).
pub fn cross_unit_cv(units: &[CountyRecord], field: CountyField) -> Result<DispersionReport> {
    if units.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 units, got {}", units.len())));
    }
    let values: Vec<Option<f64>> = units
        .iter()
        .map(|u| {
            Some(match field {
                CountyField::MedianAge => u.median_age,
                CountyField::F65 => u.f65,
            })
        })
        .collect();
    DispersionReport::from_values(field.label(), &values)
}
