//! Marital-status mortality multipliers and composition adjustments.
//!
//! Death rates of single, widowed and divorced adults run well above those of
//! married adults of the same age. A [`RelativeRiskTable`] stores the
//! multipliers relative to married people for a (sex, cause) pair at one or
//! more anchor ages. Between anchors the multiplier is interpolated linearly
//! in age; outside the anchor range it is held at the nearest anchor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MaritalStatus {
    Single,
    Married,
    /// Non-married partners.
    Partner,
    Divorced,
    Widowed,
}

impl MaritalStatus {
    pub const ALL: [MaritalStatus; 5] = [
        MaritalStatus::Single,
        MaritalStatus::Married,
        MaritalStatus::Partner,
        MaritalStatus::Divorced,
        MaritalStatus::Widowed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MaritalStatus::Single => "single",
            MaritalStatus::Married => "married",
            MaritalStatus::Partner => "partner",
            MaritalStatus::Divorced => "divorced",
            MaritalStatus::Widowed => "widowed",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MaritalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaritalStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        MaritalStatus::ALL
            .into_iter()
            .find(|m| m.as_str() == lower)
            .ok_or_else(|| Error::Validation(format!("unknown marital status `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Male, Sex::Female];

    pub fn as_str(&self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            _ => Err(Error::Validation(format!("unknown sex `{s}`"))),
        }
    }
}

/// Multipliers for every status at one anchor age; married is always 1.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StatusRatios([f64; 5]);

impl StatusRatios {
    fn get(&self, status: MaritalStatus) -> f64 {
        self.0[status.index()]
    }
}

/// Death-rate multipliers relative to married people, keyed by sex, cause of
/// death (case-insensitive free-form label) and anchor age.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelativeRiskTable {
    entries: BTreeMap<(Sex, String), BTreeMap<u32, StatusRatios>>,
}

type PartialAnchors = BTreeMap<u32, [Option<f64>; 5]>;

/// Accumulates `(sex, cause, anchor age, status, multiplier)` rows.
///
/// At build time every anchor must carry single, divorced and widowed values.
/// Married may be given only as 1.0. Partner defaults to 1.0 (treated like
/// married) when absent.
#[derive(Debug, Clone, Default)]
pub struct RiskTableBuilder {
    raw: BTreeMap<(Sex, String), PartialAnchors>,
}

impl RiskTableBuilder {
    pub fn set(&mut self, sex: Sex, cause: &str, anchor_age: u32, status: MaritalStatus, multiplier: f64) -> Result<&mut Self> {
        if !(multiplier.is_finite() && multiplier > 0.0) {
            return Err(Error::Validation(format!("multiplier must be positive, got {multiplier}")));
        }
        if status == MaritalStatus::Married && multiplier != 1.0 {
            return Err(Error::Validation(format!(
                "married is the reference category; its multiplier must be 1.0, got {multiplier}"
            )));
        }
        let cause = normalize_cause(cause)?;
        let slot = &mut self.raw.entry((sex, cause.clone())).or_default().entry(anchor_age).or_default()[status.index()];
        if slot.is_some() {
            return Err(Error::Validation(format!(
                "duplicate multiplier for {sex}/{cause}/{anchor_age}/{status}"
            )));
        }
        *slot = Some(multiplier);
        Ok(self)
    }

    pub fn build(self) -> Result<RelativeRiskTable> {
        let mut entries = BTreeMap::new();
        for ((sex, cause), anchors) in self.raw {
            let mut built = BTreeMap::new();
            for (age, values) in anchors {
                let mut ratios = [1.0; 5];
                for status in MaritalStatus::ALL {
                    ratios[status.index()] = match (status, values[status.index()]) {
                        (_, Some(v)) => v,
                        (MaritalStatus::Married | MaritalStatus::Partner, None) => 1.0,
                        (_, None) => {
                            return Err(Error::Validation(format!(
                                "missing {status} multiplier for {sex}/{cause} at age {age}"
                            )))
                        }
                    };
                }
                built.insert(age, StatusRatios(ratios));
            }
            entries.insert((sex, cause), built);
        }
        Ok(RelativeRiskTable { entries })
    }
}

fn normalize_cause(cause: &str) -> Result<String> {
    let c = cause.trim().to_ascii_lowercase();
    if c.is_empty() {
        return Err(Error::Validation("cause label is empty".into()));
    }
    Ok(c)
}

impl RelativeRiskTable {
    pub fn builder() -> RiskTableBuilder {
        RiskTableBuilder::default()
    }

    /// Heart-disease and cancer multipliers for US males, 1980, at ages 40
    /// and 50. Widowed and divorced share the lumped widowed-or-divorced
    /// value; partner is 1.0.
    pub fn us_males_1980() -> Self {
        crate::ingest::load_risk_table(crate::ingest::US_MALES_1980_RISK_CSV.as_bytes())
            .expect("bundled risk table is valid")
            .0
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(sex, cause)` pairs present in the table.
    pub fn keys(&self) -> impl Iterator<Item = (Sex, &str)> {
        self.entries.keys().map(|(s, c)| (*s, c.as_str()))
    }

    /// Every stored `(sex, cause, anchor_age, status, multiplier)` row.
    pub fn rows(&self) -> impl Iterator<Item = (Sex, &str, u32, MaritalStatus, f64)> {
        self.entries.iter().flat_map(|((sex, cause), anchors)| {
            anchors.iter().flat_map(move |(&age, ratios)| {
                MaritalStatus::ALL
                    .into_iter()
                    .map(move |st| (*sex, cause.as_str(), age, st, ratios.get(st)))
            })
        })
    }

    pub fn anchor_ages(&self, sex: Sex, cause: &str) -> Result<Vec<u32>> {
        Ok(self.anchors(sex, cause)?.keys().copied().collect())
    }

    fn anchors(&self, sex: Sex, cause: &str) -> Result<&BTreeMap<u32, StatusRatios>> {
        let key = (sex, normalize_cause(cause)?);
        self.entries.get(&key).ok_or_else(|| {
            Error::Lookup(format!(
                "no relative-risk entries for {sex}/{}; supply a table covering it",
                key.1
            ))
        })
    }

    /// Multiplier for `status` relative to married people at `age`.
    pub fn relative_rate(&self, sex: Sex, cause: &str, status: MaritalStatus, age: f64) -> Result<f64> {
        if !age.is_finite() {
            return Err(Error::Domain(format!("age must be finite, got {age}")));
        }
        let anchors = self.anchors(sex, cause)?;
        if status == MaritalStatus::Married {
            return Ok(1.0);
        }
        let below = anchors.range(..=age.floor().max(0.0) as u32).next_back();
        let above = anchors.range(age.ceil().max(0.0) as u32..).next();
        Ok(match (below, above) {
            (Some((&lo, r_lo)), Some((&hi, r_hi))) if hi > lo => {
                let t = (age - f64::from(lo)) / f64::from(hi - lo);
                r_lo.get(status) + t * (r_hi.get(status) - r_lo.get(status))
            }
            (Some((_, r)), _) | (None, Some((_, r))) => r.get(status),
            (None, None) => unreachable!("built tables hold at least one anchor"),
        })
    }

    /// `sum_status share(status) * relative_rate(status)`: the factor by which
    /// a group's rate exceeds that of an all-married group.
    pub fn adjustment_factor(&self, comp: &MaritalComposition, sex: Sex, cause: &str, age: f64) -> Result<f64> {
        MaritalStatus::ALL.into_iter().try_fold(0.0, |acc, st| {
            Ok(acc + comp.share(st) * self.relative_rate(sex, cause, st, age)?)
        })
    }
}

/// Shares of each marital status in a group, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaritalComposition([f64; 5]);

impl MaritalComposition {
    const SUM_TOLERANCE: f64 = 1e-9;

    /// Missing statuses get share 0.
    pub fn new(shares: impl IntoIterator<Item = (MaritalStatus, f64)>) -> Result<Self> {
        let raw = Self::collect(shares)?;
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Validation(format!("marital composition sums to {sum}, not 1")));
        }
        Ok(Self(raw))
    }

    /// Accepts shares summing to 1 within `tolerance` and rescales them to sum
    /// to 1 exactly.
    pub fn renormalized(shares: impl IntoIterator<Item = (MaritalStatus, f64)>, tolerance: f64) -> Result<Self> {
        let raw = Self::collect(shares)?;
        let sum: f64 = raw.iter().sum();
        if !((sum - 1.0).abs() <= tolerance) {
            return Err(Error::Validation(format!("marital composition sums to {sum}, not 1")));
        }
        Ok(Self(raw.map(|p| p / sum)))
    }

    fn collect(shares: impl IntoIterator<Item = (MaritalStatus, f64)>) -> Result<[f64; 5]> {
        let mut out = [0.0; 5];
        let mut seen = [false; 5];
        for (st, p) in shares {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Validation(format!("share for {st} must be non-negative, got {p}")));
            }
            if std::mem::replace(&mut seen[st.index()], true) {
                return Err(Error::Validation(format!("{st} listed twice in composition")));
            }
            out[st.index()] = p;
        }
        Ok(out)
    }

    pub fn all(status: MaritalStatus) -> Self {
        let mut shares = [0.0; 5];
        shares[status.index()] = 1.0;
        Self(shares)
    }

    pub fn share(&self, status: MaritalStatus) -> f64 {
        self.0[status.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (MaritalStatus, f64)> + '_ {
        MaritalStatus::ALL.into_iter().map(|st| (st, self.share(st)))
    }
}

/// Death rate (per 1,000) of a group with composition `comp`, given the rate
/// of married people of the same age.
pub fn composition_adjusted_rate(
    base_married_rate: f64,
    comp: &MaritalComposition,
    table: &RelativeRiskTable,
    sex: Sex,
    cause: &str,
    age: f64,
) -> Result<f64> {
    if !(base_married_rate.is_finite() && base_married_rate >= 0.0) {
        return Err(Error::Domain(format!("base rate must be non-negative, got {base_married_rate}")));
    }
    Ok(base_married_rate * table.adjustment_factor(comp, sex, cause, age)?)
}

/// Deaths the placebo group is expected to have in excess of the drug group
/// purely because of their different marital compositions.
///
/// `base_deaths` is the death count expected for the drug group, so the
/// result is `base_deaths * (adj_p - adj_d) / adj_d` where `adj_*` is each
/// group's [`RelativeRiskTable::adjustment_factor`]. Swapping the groups flips
/// the sign but, because the normalising factor changes, not the magnitude.
#[allow(clippy::too_many_arguments)]
pub fn imbalance_excess_deaths(
    base_deaths: f64,
    comp_p: &MaritalComposition,
    comp_d: &MaritalComposition,
    table: &RelativeRiskTable,
    sex: Sex,
    cause: &str,
    age: f64,
) -> Result<f64> {
    if !base_deaths.is_finite() {
        return Err(Error::Domain(format!("base deaths must be finite, got {base_deaths}")));
    }
    let adj_p = table.adjustment_factor(comp_p, sex, cause, age)?;
    let adj_d = table.adjustment_factor(comp_d, sex, cause, age)?;
    if comp_p == comp_d {
        return Ok(0.0);
    }
    Ok(base_deaths * (adj_p - adj_d) / adj_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use MaritalStatus::*;

    fn table() -> RelativeRiskTable {
        RelativeRiskTable::us_males_1980()
    }

    #[test]
    fn anchor_values() {
        let t = table();
        assert_eq!(t.relative_rate(Sex::Male, "heart", Single, 40.0).unwrap(), 2.3);
        assert_eq!(t.relative_rate(Sex::Male, "cancer", Widowed, 50.0).unwrap(), 1.9);
        assert_eq!(t.relative_rate(Sex::Male, "Heart", Divorced, 40.0).unwrap(), 2.7);
        assert_eq!(t.relative_rate(Sex::Male, "heart", Partner, 40.0).unwrap(), 1.0);
    }

    #[test]
    fn married_is_reference() {
        let t = table();
        for age in [0.0, 39.0, 45.5, 90.0] {
            assert_eq!(t.relative_rate(Sex::Male, "heart", Married, age).unwrap(), 1.0);
        }
    }

    #[test]
    fn interpolation_and_clamping() {
        let t = table();
        assert!((t.relative_rate(Sex::Male, "heart", Single, 45.0).unwrap() - 2.1).abs() < 1e-3);
        assert_eq!(t.relative_rate(Sex::Male, "heart", Single, 30.0).unwrap(), 2.3);
        assert_eq!(t.relative_rate(Sex::Male, "heart", Single, 80.0).unwrap(), 1.9);
    }

    #[test]
    fn missing_female_table_is_a_lookup_error() {
        let err = table().relative_rate(Sex::Female, "heart", Single, 40.0).unwrap_err();
        assert!(matches!(err, Error::Lookup(_)));
        assert!(err.to_string().contains("female"));
    }

    #[test]
    fn builder_rules() {
        let mut b = RelativeRiskTable::builder();
        assert!(b.set(Sex::Male, "heart", 40, Married, 1.2).is_err());
        assert!(b.set(Sex::Male, "heart", 40, Single, 0.0).is_err());
        b.set(Sex::Male, "heart", 40, Single, 2.0).unwrap();
        assert!(b.set(Sex::Male, "heart", 40, Single, 2.0).is_err());
        assert!(b.clone().build().is_err(), "divorced and widowed missing");
        b.set(Sex::Male, "heart", 40, Divorced, 2.0).unwrap();
        b.set(Sex::Male, "heart", 40, Widowed, 2.5).unwrap();
        let t = b.build().unwrap();
        assert_eq!(t.relative_rate(Sex::Male, "heart", Partner, 40.0).unwrap(), 1.0);
    }

    #[test]
    fn composition_rules() {
        assert!(MaritalComposition::new([(Married, 0.5), (Single, 0.4)]).is_err());
        assert!(MaritalComposition::new([(Married, 0.5), (Married, 0.5)]).is_err());
        assert!(MaritalComposition::new([(Married, 1.2), (Single, -0.2)]).is_err());
        let c = MaritalComposition::renormalized([(Married, 0.5), (Single, 0.5000001)], 1e-6).unwrap();
        assert_relative_eq!(c.iter().map(|(_, p)| p).sum::<f64>(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn adjusted_rate_examples() {
        let t = table();
        let married = MaritalComposition::all(Married);
        assert_eq!(composition_adjusted_rate(7.5, &married, &t, Sex::Male, "cancer", 44.0).unwrap(), 7.5);
        let single = MaritalComposition::all(Single);
        assert_relative_eq!(
            composition_adjusted_rate(10.0, &single, &t, Sex::Male, "heart", 40.0).unwrap(),
            23.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn us_75_plus_composition_weighted_sum() {
        // 0.46*1 + 0.45*2.2 + 0.05*1.9 + 0.02*2.2 + 0.02*1 = 1.609
        let comp = MaritalComposition::new([
            (Married, 0.46),
            (Widowed, 0.45),
            (Single, 0.05),
            (Divorced, 0.02),
            (Partner, 0.02),
        ])
        .unwrap();
        let rate = composition_adjusted_rate(10.0, &comp, &table(), Sex::Male, "heart", 50.0).unwrap();
        assert!((rate - 16.09).abs() < 1e-9, "{rate}");
    }

    #[test]
    fn widowhood_contrast() {
        // adj_p = 0.92 + 0.08*2.2 = 1.096, adj_d = 0.60 + 0.40*2.2 = 1.48
        // 500 * (1.096 - 1.48) / 1.48 = -129.7297...
        let males = MaritalComposition::new([(Married, 0.92), (Widowed, 0.08)]).unwrap();
        let females = MaritalComposition::new([(Married, 0.60), (Widowed, 0.40)]).unwrap();
        let t = table();
        let excess = imbalance_excess_deaths(500.0, &females, &males, &t, Sex::Male, "heart", 50.0).unwrap();
        // 500 * (1.48 - 1.096) / 1.096 = 175.1825
        assert!((excess - 175.18248).abs() < 1e-4, "{excess}");
        let reverse = imbalance_excess_deaths(500.0, &males, &females, &t, Sex::Male, "heart", 50.0).unwrap();
        assert!((reverse + 129.72973).abs() < 1e-4, "{reverse}");
        let doubled = imbalance_excess_deaths(1000.0, &females, &males, &t, Sex::Male, "heart", 50.0).unwrap();
        assert_relative_eq!(doubled, 2.0 * excess, max_relative = 1e-14);
    }

    fn composition() -> impl Strategy<Value = MaritalComposition> {
        proptest::collection::vec(0.0f64..1.0, 5).prop_filter_map("all zero", |raw| {
            let s: f64 = raw.iter().sum();
            (s > 1e-6).then(|| MaritalComposition::renormalized(MaritalStatus::ALL.into_iter().zip(raw.iter().map(|x| x / s)), 1e-9).unwrap())
        })
    }

    proptest! {
        #[test]
        fn identical_groups_have_no_excess(comp in composition(), base in 0.0f64..1e4, age in 30.0f64..80.0) {
            let e = imbalance_excess_deaths(base, &comp, &comp, &table(), Sex::Male, "cancer", age).unwrap();
            prop_assert_eq!(e, 0.0);
        }

        #[test]
        fn shifting_married_share_never_lowers_rate(comp in composition(), k in 0usize..5, frac in 0.0f64..1.0,
                                                     age in 20.0f64..90.0) {
            let target = MaritalStatus::ALL[k];
            prop_assume!(target != Married);
            let moved = comp.share(Married) * frac;
            let shifted = MaritalComposition::renormalized(comp.iter().map(|(st, p)| {
                let p = if st == Married { p - moved } else if st == target { p + moved } else { p };
                (st, p.max(0.0))
            }), 1e-9).unwrap();
            let t = table();
            for cause in ["heart", "cancer"] {
                let before = composition_adjusted_rate(10.0, &comp, &t, Sex::Male, cause, age).unwrap();
                let after = composition_adjusted_rate(10.0, &shifted, &t, Sex::Male, cause, age).unwrap();
                prop_assert!(after >= before - 1e-12);
            }
        }

        #[test]
        fn interpolation_stays_between_anchors(age in 40.0f64..=50.0, k in 0usize..5) {
            let st = MaritalStatus::ALL[k];
            let t = table();
            let lo = t.relative_rate(Sex::Male, "heart", st, 40.0).unwrap();
            let hi = t.relative_rate(Sex::Male, "heart", st, 50.0).unwrap();
            let v = t.relative_rate(Sex::Male, "heart", st, age).unwrap();
            prop_assert!(v >= lo.min(hi) - 1e-12 && v <= lo.max(hi) + 1e-12);
        }

        #[test]
        fn relative_rate_is_continuous(age in 20.0f64..90.0) {
            let t = table();
            let a = t.relative_rate(Sex::Male, "cancer", Single, age).unwrap();
            let b = t.relative_rate(Sex::Male, "cancer", Single, age + 1e-7).unwrap();
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
