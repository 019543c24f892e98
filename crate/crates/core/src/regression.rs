//! Simple least-squares fits of county death rates against the share of
//! residents aged 65+ and against median age.

use crate::error::{Error, Result};

/// One county (or other analysis unit).
///
/// `f65` is in percentage points (0-100), so a fitted slope reads as deaths
/// per 1,000 per percentage point.
#[derive(Debug, Clone, PartialEq)]
pub struct CountyRecord {
    pub unit_id: String,
    pub median_age: f64,
    pub f65: f64,
    /// Deaths per 1,000 population per year.
    pub death_rate: f64,
}

impl CountyRecord {
    pub fn new(unit_id: impl Into<String>, median_age: f64, f65: f64, death_rate: f64) -> Result<Self> {
        let unit_id = unit_id.into();
        if !(median_age.is_finite() && median_age >= 0.0) {
            return Err(Error::Validation(format!("{unit_id}: median age must be non-negative")));
        }
        if !(0.0..=100.0).contains(&f65) {
            return Err(Error::Validation(format!(
                "{unit_id}: f65 must be a percentage in [0, 100], got {f65}"
            )));
        }
        if !(death_rate.is_finite() && death_rate >= 0.0) {
            return Err(Error::Validation(format!("{unit_id}: death rate must be non-negative")));
        }
        Ok(Self {
            unit_id,
            median_age,
            f65,
            death_rate,
        })
    }
}

/// Fitted line `y = slope * x + intercept`.
///
/// These coefficients belong to the county regression and are unrelated to
/// the Gompertz growth rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// `None` below three points.
    pub slope_se: Option<f64>,
    pub intercept_se: Option<f64>,
    /// `None` when `y` has no variance.
    pub r_squared: Option<f64>,
    pub n: usize,
}

pub fn ols_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {n}")));
    }
    if points.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::Domain("points must be finite".into()));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= f64::EPSILON * mean_x.abs().max(1.0) * nf {
        return Err(Error::Singular("regressor values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum();

    let (slope_se, intercept_se) = if n >= 3 {
        let s2 = sse / (nf - 2.0);
        let sum_x2: f64 = points.iter().map(|p| p.0 * p.0).sum();
        (Some((s2 / sxx).sqrt()), Some((s2 * sum_x2 / (nf * sxx)).sqrt()))
    } else {
        (None, None)
    };
    let r_squared = (syy > 0.0).then(|| (1.0 - sse / syy).clamp(0.0, 1.0));

    Ok(FitResult {
        slope,
        intercept,
        slope_se,
        intercept_se,
        r_squared,
        n,
    })
}

/// Pearson correlation. `None` when either coordinate has no variance.
pub fn pearson_r(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let (sx, sy, sxx, syy, sxy) = points.iter().fold((0.0, 0.0, 0.0, 0.0, 0.0), |acc, &(x, y)| {
        (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + y * y, acc.4 + x * y)
    });
    let cov = sxy - sx * sy / n;
    let vx = sxx - sx * sx / n;
    let vy = syy - sy * sy / n;
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// A fit, or the reason it could not be made.
#[derive(Debug, Clone, PartialEq)]
pub enum FitOutcome {
    Fitted(FitResult),
    Degenerate(String),
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&FitResult> {
        match self {
            FitOutcome::Fitted(f) => Some(f),
            FitOutcome::Degenerate(_) => None,
        }
    }

    pub fn r_squared(&self) -> Option<f64> {
        self.fit().and_then(|f| f.r_squared)
    }

    fn from_points(points: &[(f64, f64)]) -> Self {
        match ols_fit(points) {
            Ok(fit) if fit.r_squared.is_none() => FitOutcome::Degenerate("death rates have zero variance".into()),
            Ok(fit) => FitOutcome::Fitted(fit),
            Err(e) => FitOutcome::Degenerate(e.to_string()),
        }
    }
}

/// Death rate regressed on F65 and, for contrast, on median age.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorContrast {
    pub f65: FitOutcome,
    pub median_age: FitOutcome,
}

pub fn predictor_contrast(units: &[CountyRecord]) -> Result<PredictorContrast> {
    if units.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 units, got {}", units.len())));
    }
    let by_f65: Vec<_> = units.iter().map(|u| (u.f65, u.death_rate)).collect();
    let by_ma: Vec<_> = units.iter().map(|u| (u.median_age, u.death_rate)).collect();
    Ok(PredictorContrast {
        f65: FitOutcome::from_points(&by_f65),
        median_age: FitOutcome::from_points(&by_ma),
    })
}
