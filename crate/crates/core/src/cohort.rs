//! Age-binned study groups and the effect of within-bin age placement.
//!
//! Trial reports describe arms as head-counts per age bracket. Expanding a
//! bracket to single-year ages requires an assumption about how people are
//! spread inside it; [`WithinBinPolicy`] makes that assumption explicit and
//! [`sensitivity_bounds`] measures how much it moves the expected deaths.

use crate::error::{Error, Result};
use crate::gompertz::{AgeRoster, GompertzParams};

/// Head-count for the inclusive integer age range `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeBin {
    lo: u32,
    hi: u32,
    count: f64,
}

impl AgeBin {
    pub fn new(lo: u32, hi: u32, count: f64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Validation(format!("bin lower bound {lo} exceeds upper bound {hi}")));
        }
        if !(count.is_finite() && count >= 0.0) {
            return Err(Error::Validation(format!(
                "bin {lo}-{hi} count must be finite and non-negative, got {count}"
            )));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    /// Number of single-year ages covered.
    pub fn width(&self) -> u32 {
        self.hi - self.lo + 1
    }

    pub fn with_count(&self, count: f64) -> Result<Self> {
        Self::new(self.lo, self.hi, count)
    }
}

/// How a bin's head-count is spread over its single-year ages.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum WithinBinPolicy {
    #[default]
    Uniform,
    /// Everyone at one age inside the bin.
    PointMass(u32),
    /// One weight per age from `lo` to `hi`, summing to 1.
    Explicit(Vec<f64>),
}

impl WithinBinPolicy {
    fn validate(&self, bin: &AgeBin) -> Result<()> {
        match self {
            WithinBinPolicy::Uniform => Ok(()),
            WithinBinPolicy::PointMass(age) if (bin.lo..=bin.hi).contains(age) => Ok(()),
            WithinBinPolicy::PointMass(age) => Err(Error::Validation(format!(
                "point mass at {age} lies outside bin {}-{}",
                bin.lo, bin.hi
            ))),
            WithinBinPolicy::Explicit(w) => {
                if w.len() != bin.width() as usize {
                    return Err(Error::Validation(format!(
                        "bin {}-{} needs {} weights, got {}",
                        bin.lo,
                        bin.hi,
                        bin.width(),
                        w.len()
                    )));
                }
                if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::Validation("explicit weights must be non-negative".into()));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Validation(format!("explicit weights sum to {sum}, not 1")));
                }
                Ok(())
            }
        }
    }

    fn spread(&self, bin: &AgeBin) -> Vec<(u32, f64)> {
        match self {
            WithinBinPolicy::Uniform => {
                let each = bin.count / f64::from(bin.width());
                (bin.lo..=bin.hi).map(|age| (age, each)).collect()
            }
            WithinBinPolicy::PointMass(age) => vec![(*age, bin.count)],
            WithinBinPolicy::Explicit(w) => (bin.lo..=bin.hi).zip(w).map(|(age, &wt)| (age, bin.count * wt)).collect(),
        }
    }
}

/// An age-binned study group, e.g. one arm of a baseline-characteristics table.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    bins: Vec<AgeBin>,
    policies: Vec<WithinBinPolicy>,
}

impl CohortSpec {
    /// Bins must be ascending, pairwise disjoint and hold a positive total.
    /// Every bin starts with the uniform policy.
    pub fn new(bins: Vec<AgeBin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Validation("cohort has no bins".into()));
        }
        for w in bins.windows(2) {
            if w[1].lo <= w[0].hi {
                return Err(Error::Validation(format!(
                    "bins {}-{} and {}-{} overlap or are out of order",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        let total: f64 = bins.iter().map(AgeBin::count).sum();
        if !(total > 0.0) {
            return Err(Error::Validation("cohort total head-count must be positive".into()));
        }
        let policies = vec![WithinBinPolicy::Uniform; bins.len()];
        Ok(Self { bins, policies })
    }

    pub fn from_bins(bins: &[(u32, u32, f64)]) -> Result<Self> {
        Self::new(
            bins.iter()
                .map(|&(lo, hi, c)| AgeBin::new(lo, hi, c))
                .collect::<Result<_>>()?,
        )
    }

    pub fn with_policy(mut self, bin_index: usize, policy: WithinBinPolicy) -> Result<Self> {
        let bin = self.bin(bin_index)?;
        policy.validate(bin)?;
        self.policies[bin_index] = policy;
        Ok(self)
    }

    pub fn bins(&self) -> &[AgeBin] {
        &self.bins
    }

    pub fn policies(&self) -> &[WithinBinPolicy] {
        &self.policies
    }

    pub fn bin(&self, index: usize) -> Result<&AgeBin> {
        self.bins.get(index).ok_or_else(|| {
            Error::Domain(format!("bin index {index} out of range (cohort has {} bins)", self.bins.len()))
        })
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().map(AgeBin::count).sum()
    }

    /// Single-year roster under the bins' policies. Head-count is preserved.
    pub fn expand(&self) -> AgeRoster {
        let entries = self
            .bins
            .iter()
            .zip(&self.policies)
            .flat_map(|(bin, policy)| policy.spread(bin))
            .collect();
        AgeRoster::new(entries).expect("disjoint bins yield distinct ages")
    }

    pub fn median_age(&self) -> Result<f64> {
        self.expand().median()
    }

    /// Share of the cohort aged `threshold` or more. A bin straddling the
    /// threshold contributes according to its policy.
    pub fn fraction_over(&self, threshold: u32) -> Result<f64> {
        self.expand().fraction_at_or_above(threshold)
    }

    /// Expected deaths per bin over `years`, in bin order.
    pub fn bin_deaths(&self, params: &GompertzParams, years: usize) -> Result<Vec<f64>> {
        let projection = params.project(&self.expand(), years)?;
        Ok(self.bins.iter().map(|b| projection.deaths_for_ages(b.lo, b.hi)).collect())
    }
}

/// Expected deaths in a single bin under `policy`.
pub fn project_bin(params: &GompertzParams, bin: &AgeBin, policy: &WithinBinPolicy, years: usize) -> Result<f64> {
    policy.validate(bin)?;
    if bin.count == 0.0 {
        return Ok(0.0);
    }
    let roster = AgeRoster::new(policy.spread(bin))?;
    Ok(params.project(&roster, years)?.grand_total())
}

/// Deaths in one bin with everyone at the youngest age, spread uniformly, and
/// everyone at the oldest age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBounds {
    pub min: f64,
    pub uniform: f64,
    pub max: f64,
}

impl SensitivityBounds {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

pub fn sensitivity_bounds(
    params: &GompertzParams,
    spec: &CohortSpec,
    bin_index: usize,
    years: usize,
) -> Result<SensitivityBounds> {
    let bin = spec.bin(bin_index)?;
    Ok(SensitivityBounds {
        min: project_bin(params, bin, &WithinBinPolicy::PointMass(bin.lo), years)?,
        uniform: project_bin(params, bin, &WithinBinPolicy::Uniform, years)?,
        max: project_bin(params, bin, &WithinBinPolicy::PointMass(bin.hi), years)?,
    })
}

/// Extra deaths in `spec_a` over `spec_b` attributable to the head-count
/// difference in one bin, both spread uniformly.
pub fn bin_count_delta_deaths(
    params: &GompertzParams,
    spec_a: &CohortSpec,
    spec_b: &CohortSpec,
    bin_index: usize,
    years: usize,
) -> Result<f64> {
    let a = spec_a.bin(bin_index)?;
    let b = spec_b.bin(bin_index)?;
    if (a.lo, a.hi) != (b.lo, b.hi) {
        return Err(Error::Validation(format!(
            "bin {bin_index} boundaries differ: {}-{} vs {}-{}",
            a.lo, a.hi, b.lo, b.hi
        )));
    }
    if a.count == b.count {
        return Ok(0.0);
    }
    Ok(project_bin(params, a, &WithinBinPolicy::Uniform, years)?
        - project_bin(params, b, &WithinBinPolicy::Uniform, years)?)
}
