//! Gompertz hazard law and discrete annual cohort projection.
//!
//! The hazard is `y(x) = g0 * exp(a * x)`, expressed as deaths per 1,000
//! people per year at age `x`. A cohort is projected one year at a time: a
//! group of `n` people aged `x` loses `n * y(x) / 1000` members during the
//! year and the survivors are one year older at the start of the next one.
//! Expected deaths stay real-valued throughout.

use crate::error::{Error, Result};

/// Coefficients of the Gompertz hazard `g0 * exp(a * age)`, per 1,000 per year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GompertzParams {
    g0: f64,
    growth: f64,
}

impl GompertzParams {
    /// Baseline rate per 1,000 at age 0 for the general adult population.
    pub const DEFAULT_G0: f64 = 0.11;
    /// Exponential growth per year of age.
    pub const DEFAULT_GROWTH: f64 = 0.082;

    pub fn new(g0: f64, growth: f64) -> Result<Self> {
        if !(g0.is_finite() && g0 > 0.0) {
            return Err(Error::Domain(format!("g0 must be positive and finite, got {g0}")));
        }
        if !(growth.is_finite() && growth > 0.0) {
            return Err(Error::Domain(format!(
                "growth rate must be positive and finite, got {growth}"
            )));
        }
        Ok(Self { g0, growth })
    }

    /// Like [`GompertzParams::new`] but accepts an age-independent Makeham
    /// term. Only zero is supported.
    pub fn with_makeham(g0: f64, growth: f64, makeham: f64) -> Result<Self> {
        if makeham != 0.0 {
            return Err(Error::Unsupported(format!(
                "age-independent (Makeham) hazard component {makeham} is not modelled; only 0 is accepted"
            )));
        }
        Self::new(g0, growth)
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    /// Death rate per 1,000 per year at `age`. Fractional ages are allowed.
    pub fn hazard(&self, age: f64) -> Result<f64> {
        if !(age >= 0.0) {
            return Err(Error::Domain(format!("age must be non-negative, got {age}")));
        }
        Ok(self.g0 * (self.growth * age).exp())
    }

    /// Years for the hazard to double, `ln 2 / a`.
    pub fn doubling_time(&self) -> f64 {
        std::f64::consts::LN_2 / self.growth
    }

    /// Same growth rate, baseline multiplied by `factor`.
    pub fn scale_baseline(&self, factor: f64) -> Result<Self> {
        Self::new(self.g0 * factor, self.growth)
    }

    /// Probability of dying within one year for someone aged `age` at the
    /// start of the year. Capped at 1 for ages where the rate exceeds 1,000.
    fn annual_death_fraction(&self, age: u32) -> f64 {
        (self.g0 * (self.growth * f64::from(age)).exp() / 1000.0).min(1.0)
    }

    /// Projects expected deaths for every starting age over `years` trial years.
    pub fn project(&self, roster: &AgeRoster, years: usize) -> Result<DeathProjection> {
        if years == 0 {
            return Err(Error::Domain("projection needs at least one year".into()));
        }
        if roster.is_empty() {
            return Err(Error::Domain("cannot project an empty roster".into()));
        }
        let initial_total = roster.total();
        if !(initial_total > 0.0) {
            return Err(Error::Domain("roster head-count must be positive".into()));
        }

        let mut cells = Vec::with_capacity(roster.len() * years);
        for &(age, count) in roster.entries() {
            let mut alive = count;
            for t in 0..years {
                let deaths = alive * self.annual_death_fraction(age + t as u32);
                cells.push(deaths);
                alive -= deaths;
            }
        }
        Ok(DeathProjection::from_cells(
            roster.entries().iter().map(|&(age, _)| age).collect(),
            years,
            cells,
            initial_total,
        ))
    }

    /// Rescales `g0` so that the projection of `roster` matches `observed_deaths`.
    pub fn calibrate(&self, roster: &AgeRoster, years: usize, observed_deaths: f64) -> Result<Calibration> {
        if !(observed_deaths.is_finite() && observed_deaths > 0.0) {
            return Err(Error::Domain(format!(
                "observed deaths must be positive, got {observed_deaths}"
            )));
        }
        let projected = self.project(roster, years)?.grand_total();
        if !(projected > 0.0) {
            return Err(Error::Degenerate("projected death total is zero".into()));
        }
        let factor = observed_deaths / projected;
        Ok(Calibration {
            params: self.scale_baseline(factor)?,
            factor,
            projected,
            observed: observed_deaths,
        })
    }
}

impl Default for GompertzParams {
    fn default() -> Self {
        Self {
            g0: Self::DEFAULT_G0,
            growth: Self::DEFAULT_GROWTH,
        }
    }
}

/// Result of [`GompertzParams::calibrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub params: GompertzParams,
    /// observed / projected
    pub factor: f64,
    pub projected: f64,
    pub observed: f64,
}

/// Head-counts by integer starting age, sorted ascending by age.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgeRoster {
    entries: Vec<(u32, f64)>,
}

impl AgeRoster {
    pub fn new(mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(age, _)| age);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Validation(format!("age {} appears twice in roster", w[0].0)));
            }
        }
        if let Some(&(age, count)) = entries.iter().find(|(_, c)| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Validation(format!(
                "count for age {age} must be finite and non-negative, got {count}"
            )));
        }
        Ok(Self { entries })
    }

    /// Builds a roster from one record per person.
    pub fn from_ages(ages: impl IntoIterator<Item = u32>) -> Self {
        let mut counts = std::collections::BTreeMap::new();
        for age in ages {
            *counts.entry(age).or_insert(0.0) += 1.0;
        }
        Self {
            entries: counts.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, c)| c).sum()
    }

    /// Share of the head-count aged `threshold` or more.
    pub fn fraction_at_or_above(&self, threshold: u32) -> Result<f64> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::Domain("fraction of an empty roster".into()));
        }
        let above: f64 = self
            .entries
            .iter()
            .filter(|&&(age, _)| age >= threshold)
            .map(|&(_, c)| c)
            .sum();
        Ok(above / total)
    }

    /// Weighted median age.
    ///
    /// Each integer age `x` is treated as spreading its head-count evenly over
    /// `[x - 0.5, x + 0.5)`, which makes the cumulative count piecewise linear.
    /// The median is where it reaches half the total, interpolated inside that
    /// age-year. If the cumulative count sits at exactly half over a run of
    /// empty years, the midpoint of that run is returned.
    pub fn median(&self) -> Result<f64> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::Domain("median of an empty roster".into()));
        }
        let half = total / 2.0;
        let tol = 1e-12 * total;
        let lower = self.first_reaching(half - tol, false);
        let upper = self.first_reaching(half + tol, true);
        if upper - lower <= 1e-9 {
            Ok(self.first_reaching(half, false))
        } else {
            Ok((lower + upper) / 2.0)
        }
    }

    /// Smallest age at which the cumulative count reaches `level` (or strictly
    /// exceeds it when `strict`).
    fn first_reaching(&self, level: f64, strict: bool) -> f64 {
        let mut cumulative = 0.0;
        let mut last_edge = 0.0;
        for &(age, count) in self.entries.iter().filter(|&&(_, c)| c > 0.0) {
            let after = cumulative + count;
            let hit = if strict { after > level } else { after >= level };
            if hit {
                return f64::from(age) - 0.5 + ((level - cumulative) / count).clamp(0.0, 1.0);
            }
            cumulative = after;
            last_edge = f64::from(age) + 0.5;
        }
        last_edge
    }
}

/// Expected deaths indexed by (starting age, trial year).
#[derive(Debug, Clone, PartialEq)]
pub struct DeathProjection {
    start_ages: Vec<u32>,
    years: usize,
    cells: Vec<f64>,
    per_age: Vec<f64>,
    per_year: Vec<f64>,
    grand_total: f64,
    initial_total: f64,
}

impl DeathProjection {
    fn from_cells(start_ages: Vec<u32>, years: usize, cells: Vec<f64>, initial_total: f64) -> Self {
        let per_age: Vec<f64> = cells.chunks(years).map(|row| row.iter().sum()).collect();
        let mut per_year = vec![0.0; years];
        for row in cells.chunks(years) {
            for (acc, d) in per_year.iter_mut().zip(row) {
                *acc += d;
            }
        }
        let grand_total = per_age.iter().sum();
        Self {
            start_ages,
            years,
            cells,
            per_age,
            per_year,
            grand_total,
            initial_total,
        }
    }

    pub fn start_ages(&self) -> &[u32] {
        &self.start_ages
    }

    pub fn years(&self) -> usize {
        self.years
    }

    /// Deaths during trial year `year` (0-based) among people who started at
    /// the `row`-th roster age.
    pub fn cell(&self, row: usize, year: usize) -> f64 {
        assert!(year < self.years, "year {year} out of range");
        self.cells[row * self.years + year]
    }

    pub fn per_age_totals(&self) -> &[f64] {
        &self.per_age
    }

    pub fn per_year_totals(&self) -> &[f64] {
        &self.per_year
    }

    pub fn grand_total(&self) -> f64 {
        self.grand_total
    }

    pub fn initial_total(&self) -> f64 {
        self.initial_total
    }

    /// Total deaths among people whose starting age lies in `[lo, hi]`.
    pub fn deaths_for_ages(&self, lo: u32, hi: u32) -> f64 {
        self.start_ages
            .iter()
            .zip(&self.per_age)
            .filter(|(&age, _)| (lo..=hi).contains(&age))
            .map(|(_, d)| d)
            .sum()
    }

    /// `(start_age, year, deaths)` triples with 1-based years, row-major.
    pub fn rows(&self) -> impl Iterator<Item = (u32, usize, f64)> + '_ {
        self.start_ages.iter().enumerate().flat_map(move |(i, &age)| {
            (0..self.years).map(move |t| (age, t + 1, self.cells[i * self.years + t]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn defaults() -> GompertzParams {
        GompertzParams::default()
    }

    // Independent reference for the annual recursion.
    fn brute_force(g0: f64, a: f64, age: u32, count: f64, years: usize) -> Vec<f64> {
        let mut n = count;
        let mut out = Vec::new();
        for t in 0..years {
            let m = n * g0 * (a * (age as f64 + t as f64)).exp() / 1000.0;
            out.push(m);
            n -= m;
        }
        out
    }

    #[test]
    fn hazard_at_zero_is_baseline() {
        assert_eq!(defaults().hazard(0.0).unwrap(), 0.11);
    }

    #[test]
    fn hazard_at_seventy() {
        // 0.11 * exp(0.082 * 70) = 0.11 * 311.0644...
        assert!((defaults().hazard(70.0).unwrap() - 34.217).abs() < 0.005);
    }

    #[test]
    fn hazard_ratio_82_over_37() {
        let p = defaults();
        let ratio = p.hazard(82.0).unwrap() / p.hazard(37.0).unwrap();
        assert!((ratio - 40.2).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn negative_age_rejected() {
        assert!(matches!(defaults().hazard(-1.0), Err(Error::Domain(_))));
        assert!(matches!(defaults().hazard(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn doubling_times() {
        assert!((defaults().doubling_time() - 8.45).abs() < 0.01);
        let ten = GompertzParams::new(0.11, std::f64::consts::LN_2 / 10.0).unwrap();
        assert_relative_eq!(ten.doubling_time(), 10.0, max_relative = 1e-15);
        let fast = GompertzParams::new(0.11, 0.164).unwrap();
        assert!((fast.doubling_time() - 4.23).abs() < 0.01);
    }

    #[test]
    fn invalid_params() {
        assert!(GompertzParams::new(0.0, 0.08).is_err());
        assert!(GompertzParams::new(0.1, -0.08).is_err());
        assert!(matches!(
            GompertzParams::with_makeham(0.11, 0.082, 0.5),
            Err(Error::Unsupported(_))
        ));
        assert_eq!(GompertzParams::with_makeham(0.11, 0.082, 0.0).unwrap(), defaults());
    }

    #[test]
    fn single_step_by_hand() {
        let roster = AgeRoster::new(vec![(61, 1000.0)]).unwrap();
        let proj = defaults().project(&roster, 1).unwrap();
        let expected = 1000.0 * 0.11 * (0.082f64 * 61.0).exp() / 1000.0;
        assert_relative_eq!(proj.grand_total(), expected, max_relative = 1e-14);
    }

    #[test]
    fn tiny_baseline_kills_nobody() {
        let roster = AgeRoster::new(vec![(40, 500.0), (70, 500.0)]).unwrap();
        let totals: Vec<f64> = [1e-3, 1e-6, 1e-9]
            .iter()
            .map(|&g0| GompertzParams::new(g0, 0.082).unwrap().project(&roster, 6).unwrap().grand_total())
            .collect();
        assert!(totals[0] > totals[1] && totals[1] > totals[2]);
        assert!(totals[2] < 1e-5);
        assert_relative_eq!(totals[1] / totals[2], 1000.0, max_relative = 1e-6);
    }

    #[test]
    fn empty_and_zero_rosters_rejected() {
        assert!(matches!(defaults().project(&AgeRoster::default(), 6), Err(Error::Domain(_))));
        let zero = AgeRoster::new(vec![(50, 0.0)]).unwrap();
        assert!(defaults().project(&zero, 6).is_err());
        let one = AgeRoster::new(vec![(50, 1.0)]).unwrap();
        assert!(defaults().project(&one, 0).is_err());
    }

    #[test]
    fn roster_rejects_duplicates_and_negative_counts() {
        assert!(AgeRoster::new(vec![(50, 1.0), (50, 2.0)]).is_err());
        assert!(AgeRoster::new(vec![(50, -1.0)]).is_err());
    }

    #[test]
    fn calibration_fixed_point_and_doubling() {
        let roster = AgeRoster::new((40..=75).map(|a| (a, 100.0)).collect()).unwrap();
        let projected = defaults().project(&roster, 6).unwrap().grand_total();

        let same = defaults().calibrate(&roster, 6, projected).unwrap();
        assert_eq!(same.factor, 1.0);
        assert_eq!(same.params, defaults());

        let doubled = defaults().calibrate(&roster, 6, 2.0 * projected).unwrap();
        assert_relative_eq!(doubled.params.g0(), 0.22, max_relative = 1e-12);
        // Depletion makes the response sub-linear: an independent recursion
        // gives 0.9204 of the target for this roster.
        let again = doubled.params.project(&roster, 6).unwrap().grand_total();
        assert!((again / (2.0 * projected) - 0.9204).abs() < 5e-4, "{}", again / (2.0 * projected));
    }

    #[test]
    fn calibration_errors() {
        let roster = AgeRoster::new(vec![(60, 10.0)]).unwrap();
        assert!(matches!(defaults().calibrate(&roster, 6, 0.0), Err(Error::Domain(_))));
        assert!(matches!(defaults().calibrate(&roster, 6, -3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn extreme_age_never_goes_negative() {
        let roster = AgeRoster::new(vec![(115, 10.0)]).unwrap();
        let proj = defaults().project(&roster, 10).unwrap();
        assert_relative_eq!(proj.grand_total(), 10.0, max_relative = 1e-12);
        assert!(proj.rows().all(|(_, _, d)| d >= 0.0));
    }

    #[test]
    fn median_rules() {
        let point = AgeRoster::new(vec![(50, 7.0)]).unwrap();
        assert_eq!(point.median().unwrap(), 50.0);
        let two = AgeRoster::new(vec![(40, 5.0), (60, 5.0)]).unwrap();
        assert!((two.median().unwrap() - 50.0).abs() < 1e-9);
        let uniform = AgeRoster::new((40..=60).map(|a| (a, 3.0)).collect()).unwrap();
        assert_relative_eq!(uniform.median().unwrap(), 50.0, max_relative = 1e-12);
        assert!(AgeRoster::default().median().is_err());
    }

    #[test]
    fn rows_are_one_based() {
        let roster = AgeRoster::new(vec![(60, 10.0), (61, 10.0)]).unwrap();
        let proj = defaults().project(&roster, 3).unwrap();
        let rows: Vec<_> = proj.rows().collect();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[0].0, rows[0].1), (60, 1));
        assert_eq!((rows[5].0, rows[5].1), (61, 3));
        assert_relative_eq!(proj.per_year_totals().iter().sum::<f64>(), proj.grand_total(), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn matches_brute_force(age in 0u32..80, count in 0.1f64..1e5, years in 1usize..=10,
                               g0 in 0.01f64..0.3, a in 0.01f64..0.085) {
            let p = GompertzParams::new(g0, a).unwrap();
            let proj = p.project(&AgeRoster::new(vec![(age, count)]).unwrap(), years).unwrap();
            for (t, expected) in brute_force(g0, a, age, count, years).into_iter().enumerate() {
                let got = proj.cell(0, t);
                prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
            }
        }

        #[test]
        fn hazard_doubles_over_doubling_time(x in 0.0f64..100.0, g0 in 0.01f64..1.0, a in 0.01f64..0.2) {
            let p = GompertzParams::new(g0, a).unwrap();
            let lhs = p.hazard(x + p.doubling_time()).unwrap();
            let rhs = 2.0 * p.hazard(x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }

        #[test]
        fn conservation(entries in proptest::collection::btree_map(20u32..100, 0.0f64..1000.0, 1..20),
                        years in 1usize..15) {
            let roster = AgeRoster::new(entries.into_iter().collect()).unwrap();
            prop_assume!(roster.total() > 0.0);
            let proj = GompertzParams::default().project(&roster, years).unwrap();
            for (i, &(_, count)) in roster.entries().iter().enumerate() {
                let mut alive = count;
                for t in 0..years {
                    let d = proj.cell(i, t);
                    prop_assert!(d >= 0.0);
                    alive -= d;
                    prop_assert!(alive >= -1e-9 * count.max(1.0));
                }
            }
            let cell_sum: f64 = proj.rows().map(|(_, _, d)| d).sum();
            prop_assert!((cell_sum - proj.grand_total()).abs() <= 1e-9 * proj.grand_total().max(1e-300));
            prop_assert!(proj.grand_total() <= proj.initial_total());
        }

        #[test]
        fn linear_in_headcount(entries in proptest::collection::btree_map(20u32..100, 0.1f64..1000.0, 1..10),
                               k in 0.01f64..100.0) {
            let base = AgeRoster::new(entries.iter().map(|(&a, &c)| (a, c)).collect()).unwrap();
            let scaled = AgeRoster::new(entries.iter().map(|(&a, &c)| (a, c * k)).collect()).unwrap();
            let p = GompertzParams::default();
            let b = p.project(&base, 6).unwrap();
            let s = p.project(&scaled, 6).unwrap();
            for ((_, _, x), (_, _, y)) in b.rows().zip(s.rows()) {
                prop_assert!((y - k * x).abs() <= 1e-12 * (k * x).abs().max(1e-300));
            }
        }

        #[test]
        fn moving_a_subject_older_increases_deaths(ages in proptest::collection::btree_set(20u32..95, 2..10),
                                                    pick in 0usize..10, shift in 1u32..5) {
            let ages: Vec<u32> = ages.into_iter().collect();
            let from = ages[pick % ages.len()];
            let to = from + shift;
            let mut counts: std::collections::BTreeMap<u32, f64> = ages.iter().map(|&a| (a, 10.0)).collect();
            let before = AgeRoster::new(counts.clone().into_iter().collect()).unwrap();
            *counts.get_mut(&from).unwrap() -= 1.0;
            *counts.entry(to).or_insert(0.0) += 1.0;
            let after = AgeRoster::new(counts.into_iter().collect()).unwrap();
            let p = GompertzParams::default();
            prop_assert!(p.project(&after, 6).unwrap().grand_total() > p.project(&before, 6).unwrap().grand_total());
        }
    }
}
