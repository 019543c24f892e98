use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cohort_bias_core::bertillon::{composition_adjusted_rate, imbalance_excess_deaths};
use cohort_bias_core::cohort::{sensitivity_bounds, WithinBinPolicy};
use cohort_bias_core::ingest;
use cohort_bias_core::randomization::{
    cross_unit_cv, replicate_dispersion_many, CountyField, Metric, RNG_ALGORITHM,
};
use cohort_bias_core::regression::{predictor_contrast, FitOutcome, FitResult};
use cohort_bias_core::{CohortSpec, DispersionReport, GompertzParams, RelativeRiskTable, Sex};

use crate::output::{stamp_line, warn, OutDir};
use crate::{Cli, CliError, Command, Format, HazardArgs};

/// Hazard-curve samples for plotting, ages 0 to 100.
const CURVE_MAX_AGE: u32 = 100;

pub fn run(cli: Cli) -> Result<String, CliError> {
    let out = OutDir::new(cli.out);
    let mut report = match cli.command {
        Command::Project { cohort, hazard, observed } => project(&out, &cohort, &hazard, observed)?,
        Command::Sensitivity { cohort, bin, calibrate, hazard } => sensitivity(&out, &cohort, bin, calibrate, &hazard)?,
        Command::AdjustMarital {
            composition,
            compare,
            risk_table,
            sex,
            cause,
            age,
            base_rate,
            base_deaths,
        } => adjust_marital(
            &composition,
            compare.as_deref(),
            risk_table.as_deref(),
            &sex,
            &cause,
            age,
            base_rate,
            base_deaths,
        )?,
        Command::Dispersion { subjects, counties, splits, seed, cells, format } => {
            dispersion(&out, subjects.as_deref(), counties.as_deref(), splits, seed, cells, format)?
        }
        Command::Regress { counties } => regress(&out, &counties)?,
    };
    if cli.stamp {
        report.push_str(&stamp_line());
    }
    Ok(report)
}

fn params(h: &HazardArgs) -> Result<GompertzParams, CliError> {
    Ok(GompertzParams::with_makeham(h.g0, h.growth, h.makeham)?)
}

fn load_cohort(path: &Path) -> Result<CohortSpec, CliError> {
    let (spec, report) = ingest::load_cohort_path(path)?;
    warn(path, &report);
    Ok(spec)
}

fn hazard_curve(params: &GompertzParams) -> impl FnOnce(std::io::BufWriter<std::fs::File>) -> cohort_bias_core::Result<()> + '_ {
    move |mut w| {
        writeln!(w, "age,rate_per_1000")?;
        for age in 0..=CURVE_MAX_AGE {
            writeln!(w, "{age},{}", params.hazard(f64::from(age))?)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn written(report: &mut String, files: &[Option<PathBuf>]) {
    let files: Vec<_> = files.iter().flatten().collect();
    if !files.is_empty() {
        report.push_str("\nFiles written:\n");
        for f in files {
            let _ = writeln!(report, "- {}", f.display());
        }
    }
}

fn project(out: &OutDir, cohort: &Path, hazard: &HazardArgs, observed: Option<f64>) -> Result<String, CliError> {
    let params = params(hazard)?;
    let spec = load_cohort(cohort)?;
    let years = hazard.years as usize;
    let projection = params.project(&spec.expand(), years)?;

    let mut r = String::new();
    let _ = writeln!(r, "# Expected deaths\n");
    let _ = writeln!(
        r,
        "Cohort `{}`, g0 = {}, a = {}, {} years.\n",
        cohort.display(),
        params.g0(),
        params.growth(),
        years
    );
    let _ = writeln!(r, "| ages | head-count | expected deaths |");
    let _ = writeln!(r, "|---|---:|---:|");
    for (bin, deaths) in spec.bins().iter().zip(spec.bin_deaths(&params, years)?) {
        let _ = writeln!(r, "| {}-{} | {} | {:.1} |", bin.lo(), bin.hi(), bin.count(), deaths);
    }
    let _ = writeln!(r, "| total | {} | {:.1} |", spec.total(), projection.grand_total());

    if let Some(observed) = observed {
        let cal = params.calibrate(&spec.expand(), years, observed)?;
        let _ = writeln!(
            r,
            "\nCalibration: observed {observed}, projected {:.1}, factor {:.4}, calibrated g0 = {:.5}",
            cal.projected,
            cal.factor,
            cal.params.g0()
        );
    }

    let files = [
        out.write("projection.csv", |w| ingest::write_projection(w, &projection))?,
        out.write("hazard_curve.csv", hazard_curve(&params))?,
    ];
    written(&mut r, &files);
    Ok(r)
}

fn sensitivity(
    out: &OutDir,
    cohort: &Path,
    bin: Option<usize>,
    calibrate: Option<f64>,
    hazard: &HazardArgs,
) -> Result<String, CliError> {
    let mut params = params(hazard)?;
    let spec = load_cohort(cohort)?;
    let years = hazard.years as usize;
    let index = bin.unwrap_or(spec.bins().len() - 1);
    let selected = *spec.bin(index)?;

    let mut r = String::new();
    let _ = writeln!(r, "# Within-bin sensitivity\n");
    let reference = match calibrate {
        Some(observed) => {
            let cal = params.calibrate(&spec.expand(), years, observed)?;
            params = cal.params;
            let _ = writeln!(r, "Calibrated to {observed} deaths: factor {:.4}, g0 = {:.5}.", cal.factor, params.g0());
            observed
        }
        None => params.project(&spec.expand(), years)?.grand_total(),
    };
    let b = sensitivity_bounds(&params, &spec, index, years)?;
    let _ = writeln!(
        r,
        "Bin {index} (ages {}-{}, {} subjects), {years} years.\n",
        selected.lo(),
        selected.hi(),
        selected.count()
    );
    let _ = writeln!(r, "| placement | expected deaths |");
    let _ = writeln!(r, "|---|---:|");
    let _ = writeln!(r, "| all at age {} | {:.1} |", selected.lo(), b.min);
    let _ = writeln!(r, "| uniform | {:.1} |", b.uniform);
    let _ = writeln!(r, "| all at age {} | {:.1} |", selected.hi(), b.max);
    let _ = writeln!(
        r,
        "\nSpread: {:.1} deaths = {:.1}% of {:.1} cohort deaths.",
        b.spread(),
        100.0 * b.spread() / reference,
        reference
    );

    let series = |mut w: std::io::BufWriter<std::fs::File>| -> cohort_bias_core::Result<()> {
        writeln!(w, "series,age,value")?;
        for age in 0..=CURVE_MAX_AGE {
            writeln!(w, "hazard,{age},{}", params.hazard(f64::from(age))?)?;
        }
        let placements = [
            ("histogram_youngest", WithinBinPolicy::PointMass(selected.lo())),
            ("histogram_uniform", WithinBinPolicy::Uniform),
            ("histogram_oldest", WithinBinPolicy::PointMass(selected.hi())),
        ];
        for (name, policy) in placements {
            let roster = spec.clone().with_policy(index, policy)?.expand();
            for &(age, count) in roster.entries() {
                writeln!(w, "{name},{age},{count}")?;
            }
        }
        w.flush()?;
        Ok(())
    };
    let files = [out.write("sensitivity_series.csv", series)?];
    if !out.is_set() {
        r.push_str("\nPlot series not written (no output directory; use --out or COHORT_BIAS_LAB_OUT).\n");
    }
    written(&mut r, &files);
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn adjust_marital(
    composition: &Path,
    compare: Option<&Path>,
    risk_table: Option<&Path>,
    sex: &str,
    cause: &str,
    age: f64,
    base_rate: f64,
    base_deaths: Option<f64>,
) -> Result<String, CliError> {
    let sex: Sex = sex.parse()?;
    let table = match risk_table {
        Some(path) => {
            let (t, report) = ingest::load_risk_table_path(path)?;
            warn(path, &report);
            t
        }
        None => RelativeRiskTable::us_males_1980(),
    };
    let (comp, report) = ingest::load_composition_path(composition)?;
    warn(composition, &report);

    let mut r = String::new();
    let _ = writeln!(r, "# Marital-status adjustment\n");
    let _ = writeln!(r, "{sex}, {cause}, age {age}, married death rate {base_rate} per 1,000.\n");
    let _ = writeln!(r, "| status | share | multiplier |");
    let _ = writeln!(r, "|---|---:|---:|");
    for (status, share) in comp.iter() {
        let m = table.relative_rate(sex, cause, status, age)?;
        let _ = writeln!(r, "| {status} | {share:.4} | {m:.4} |");
    }
    let adjusted = composition_adjusted_rate(base_rate, &comp, &table, sex, cause, age)?;
    let _ = writeln!(
        r,
        "\nAdjusted death rate: {adjusted:.4} per 1,000 (factor {:.4}).",
        adjusted / base_rate
    );

    if let Some(compare) = compare {
        let (other, report) = ingest::load_composition_path(compare)?;
        warn(compare, &report);
        let base = base_deaths.ok_or_else(|| CliError::Invalid("--compare requires --base-deaths".into()))?;
        let other_rate = composition_adjusted_rate(base_rate, &other, &table, sex, cause, age)?;
        let excess = imbalance_excess_deaths(base, &comp, &other, &table, sex, cause, age)?;
        let _ = writeln!(r, "Comparison group `{}`: adjusted rate {other_rate:.4} per 1,000.", compare.display());
        let _ = writeln!(
            r,
            "Excess deaths in the first group, relative to {base} expected in the comparison group: {excess:.2}"
        );
    } else if base_deaths.is_some() {
        return Err(CliError::Invalid("--base-deaths requires --compare".into()));
    }
    Ok(r)
}

fn dispersion(
    out: &OutDir,
    subjects: Option<&Path>,
    counties: Option<&Path>,
    splits: usize,
    seed: u64,
    cells: bool,
    format: Format,
) -> Result<String, CliError> {
    let (reports, header) = match (subjects, counties) {
        (Some(path), _) => {
            let (population, report) = ingest::load_subjects_path(path)?;
            warn(path, &report);
            let mut metrics = vec![Metric::MedianAge, Metric::F65];
            if cells {
                metrics.extend(Metric::all_cells());
            }
            let reports = replicate_dispersion_many(&population, &metrics, splits, seed)?;
            let header = format!(
                "{} subjects from `{}`, {splits} random 1:1 splits, seed {seed}, rng {RNG_ALGORITHM}.\nStatistics are for the placebo group of each split.",
                population.len(),
                path.display()
            );
            (reports, header)
        }
        (None, Some(path)) => {
            let (units, report) = ingest::load_counties_path(path)?;
            warn(path, &report);
            let reports = vec![
                cross_unit_cv(&units, CountyField::MedianAge)?,
                cross_unit_cv(&units, CountyField::F65)?,
            ];
            (reports, format!("{} units from `{}`.", units.len(), path.display()))
        }
        (None, None) => return Err(CliError::Invalid("one of --subjects or --counties is required".into())),
    };

    let files = [out.write("dispersion.csv", |w| ingest::write_dispersion(w, &reports))?];
    if format == Format::Csv {
        let mut buf = Vec::new();
        ingest::write_dispersion(&mut buf, &reports)?;
        return Ok(String::from_utf8(buf).expect("csv output is utf-8"));
    }

    let mut r = String::new();
    let _ = writeln!(r, "# Dispersion\n\n{header}\n");
    let _ = writeln!(r, "| metric | mean | sd | cv | n |");
    let _ = writeln!(r, "|---|---:|---:|---:|---:|");
    for d in &reports {
        let cv = d.cv.map_or("undefined".to_string(), |c| format!("{c:.5}"));
        let _ = writeln!(r, "| {} | {:.5} | {:.5} | {cv} | {} |", d.metric, d.mean, d.sd, d.n);
    }
    if let (Some(ma), Some(f65)) = (cv_of(&reports, "median_age"), cv_of(&reports, "f65")) {
        if ma > 0.0 {
            let _ = writeln!(r, "\nCV(f65) / CV(median_age) = {:.2}", f65 / ma);
        }
    }
    let missing: usize = reports.iter().map(|d| d.missing).sum();
    if missing > 0 {
        let _ = writeln!(r, "\n{missing} metric values were undefined and excluded.");
    }
    written(&mut r, &files);
    Ok(r)
}

fn cv_of(reports: &[DispersionReport], metric: &str) -> Option<f64> {
    reports.iter().find(|d| d.metric == metric).and_then(|d| d.cv)
}

fn regress(out: &OutDir, counties: &Path) -> Result<String, CliError> {
    let (units, report) = ingest::load_counties_path(counties)?;
    warn(counties, &report);
    let contrast = predictor_contrast(&units)?;

    let mut r = String::new();
    let _ = writeln!(r, "# Death rate regressions\n");
    let _ = writeln!(r, "{} units from `{}`. Death rate d per 1,000; F65 in percentage points.\n", units.len(), counties.display());
    let _ = writeln!(r, "| predictor | slope | intercept | r² |");
    let _ = writeln!(r, "|---|---|---|---:|");
    for (name, outcome) in [("f65", &contrast.f65), ("median_age", &contrast.median_age)] {
        match outcome {
            FitOutcome::Fitted(f) => {
                let _ = writeln!(
                    r,
                    "| {name} | {} | {} | {} |",
                    with_se(f.slope, f.slope_se),
                    with_se(f.intercept, f.intercept_se),
                    f.r_squared.map_or("undefined".into(), |v| format!("{v:.4}"))
                );
            }
            FitOutcome::Degenerate(why) => {
                let _ = writeln!(r, "| {name} | degenerate: {why} | | |");
            }
        }
    }
    match (contrast.f65.r_squared(), contrast.median_age.r_squared()) {
        (Some(a), Some(b)) if a > b => {
            let _ = writeln!(r, "\nF65 explains more of the variance in death rates than median age ({a:.3} vs {b:.3}).");
        }
        (Some(a), Some(b)) => {
            let _ = writeln!(r, "\nMedian age explains at least as much variance as F65 ({b:.3} vs {a:.3}).");
        }
        _ => {}
    }

    let fits: Vec<(&str, Option<&FitResult>)> =
        vec![("f65", contrast.f65.fit()), ("median_age", contrast.median_age.fit())];
    let scatter = |mut w: std::io::BufWriter<std::fs::File>| -> cohort_bias_core::Result<()> {
        writeln!(w, "unit_id,f65,median_age,death_rate,fitted_f65,fitted_median_age")?;
        let predict = |fit: Option<&FitResult>, x: f64| fit.map(|f| (f.slope * x + f.intercept).to_string()).unwrap_or_default();
        for u in &units {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                u.unit_id,
                u.f65,
                u.median_age,
                u.death_rate,
                predict(contrast.f65.fit(), u.f65),
                predict(contrast.median_age.fit(), u.median_age)
            )?;
        }
        w.flush()?;
        Ok(())
    };
    let files = [
        out.write("regression.csv", |w| ingest::write_fits(w, &fits))?,
        out.write("regression_series.csv", scatter)?,
    ];
    written(&mut r, &files);
    Ok(r)
}

fn with_se(value: f64, se: Option<f64>) -> String {
    match se {
        Some(se) => format!("{value:.4} ± {se:.4}"),
        None => format!("{value:.4}"),
    }
}
