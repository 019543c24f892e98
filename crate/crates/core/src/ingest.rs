//! CSV readers and writers for every input and output format.
//!
//! All inputs are UTF-8, comma-separated, dot-decimal, with a required header
//! row. Columns may appear in any order and surrounding whitespace is ignored.
//! Lines starting with `#` are comments.
//!
//! Readers are strict: any rejected row makes the whole input fatal, and the
//! returned [`ParseReport`] lists one diagnostic per rejected row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use crate::bertillon::{MaritalComposition, MaritalStatus, RelativeRiskTable, Sex};
use crate::cohort::{AgeBin, CohortSpec};
use crate::error::{Error, ParseReport, Result};
use crate::gompertz::DeathProjection;
use crate::randomization::{DispersionReport, Subject};
use crate::regression::{CountyRecord, FitResult};

pub const COHORT_COLUMNS: [&str; 3] = ["bin_lo", "bin_hi", "count"];
pub const SUBJECT_COLUMNS: [&str; 3] = ["age", "sex", "marital_status"];
pub const RISK_COLUMNS: [&str; 5] = ["sex", "cause", "anchor_age", "status", "multiplier"];
pub const COMPOSITION_COLUMNS: [&str; 2] = ["status", "proportion"];
pub const COUNTY_COLUMNS: [&str; 4] = ["unit_id", "median_age", "f65", "death_rate"];

/// Tolerance on the sum of a parsed composition before it is renormalised.
pub const COMPOSITION_SUM_TOLERANCE: f64 = 1e-6;

pub const LIPID_PLACEBO_CSV: &str = include_str!("../fixtures/lipid_placebo.csv");
pub const LIPID_PRAVASTATIN_CSV: &str = include_str!("../fixtures/lipid_pravastatin.csv");
pub const US_MALES_1980_RISK_CSV: &str = include_str!("../fixtures/fig1_male_risk.csv");
pub const US_75_PLUS_COMPOSITION_CSV: &str = include_str!("../fixtures/us75_composition.csv");
pub const US_AGE_50_COMPOSITION_CSV: &str = include_str!("../fixtures/us50_composition.csv");
pub const SYNTHETIC_SUBJECTS_CSV: &str = include_str!("../fixtures/synthetic_subjects.csv");

struct Row {
    line: u64,
    fields: Vec<String>,
}

struct RowError {
    column: Option<&'static str>,
    message: String,
}

impl RowError {
    fn row(message: impl Into<String>) -> Self {
        Self {
            column: None,
            message: message.into(),
        }
    }
}

impl Row {
    fn get<T: FromStr>(&self, columns: &[&'static str], k: usize) -> std::result::Result<T, RowError> {
        let raw = &self.fields[k];
        raw.parse().map_err(|_| RowError {
            column: Some(columns[k]),
            message: format!("cannot parse `{raw}`"),
        })
    }

    fn get_with<T>(&self, columns: &[&'static str], k: usize, f: impl FnOnce(&str) -> Result<T>) -> std::result::Result<T, RowError> {
        f(&self.fields[k]).map_err(|e| RowError {
            column: Some(columns[k]),
            message: match e {
                Error::Validation(m) | Error::Domain(m) => m,
                other => other.to_string(),
            },
        })
    }
}

fn fatal(mut report: ParseReport) -> Error {
    report.fatal = true;
    Error::Parse(report)
}

/// Reads the header and data rows, projecting each row onto `columns`.
fn read_rows<R: Read>(reader: R, columns: &[&'static str]) -> Result<(Vec<Row>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut rdr = ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);

    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e, report)),
    };
    let header_line = headers.position().map_or(1, |p| p.line());
    let mut index = Vec::with_capacity(columns.len());
    for col in columns {
        match headers.iter().position(|h| h == *col) {
            Some(i) => index.push(i),
            None if headers.is_empty() => {
                report.reject(1, None, "no data rows");
                return Err(fatal(report));
            }
            None => {
                report.reject(header_line, Some(col), format!("missing required column `{col}`"));
                return Err(fatal(report));
            }
        }
    }

    let mut rows = Vec::new();
    let mut record = StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                if record.len() != headers.len() {
                    report.reject(
                        line,
                        None,
                        format!("expected {} fields, found {}", headers.len(), record.len()),
                    );
                    continue;
                }
                rows.push(Row {
                    line,
                    fields: index.iter().map(|&i| record[i].to_owned()).collect(),
                });
            }
            Err(e) => return Err(csv_error(e, report)),
        }
    }
    if rows.is_empty() && report.rejections.is_empty() {
        report.reject(header_line, None, "no data rows");
        return Err(fatal(report));
    }
    Ok((rows, report))
}

fn csv_error(e: csv::Error, mut report: ParseReport) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        return match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        };
    }
    let line = e.position().map_or(0, |p| p.line());
    report.reject(line, None, e.to_string());
    fatal(report)
}

/// Parses every row with `parse`, collecting one diagnostic per failure.
fn parse_rows<T>(
    rows: &[Row],
    mut report: ParseReport,
    mut parse: impl FnMut(&Row) -> std::result::Result<T, RowError>,
) -> Result<(Vec<(u64, T)>, ParseReport)> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        match parse(row) {
            Ok(v) => out.push((row.line, v)),
            Err(e) => report.reject(row.line, e.column, e.message),
        }
    }
    if !report.rejections.is_empty() {
        report.rejections.sort_by_key(|r| r.line);
        return Err(fatal(report));
    }
    report.accepted = out.len();
    Ok((out, report))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads `bin_lo,bin_hi,count`. Bins must be ascending and disjoint.
pub fn load_cohort<R: Read>(reader: R) -> Result<(CohortSpec, ParseReport)> {
    let c = &COHORT_COLUMNS;
    let (rows, report) = read_rows(reader, c)?;
    let (bins, mut report) = parse_rows(&rows, report, |row| {
        let lo: u32 = row.get(c, 0)?;
        let hi: u32 = row.get(c, 1)?;
        let count: f64 = row.get(c, 2)?;
        if lo > hi {
            return Err(RowError::row(format!("bin_lo {lo} exceeds bin_hi {hi}")));
        }
        row.get_with(c, 2, |_| AgeBin::new(lo, hi, count))
    })?;
    for w in bins.windows(2) {
        let ((_, prev), (line, next)) = (&w[0], &w[1]);
        if next.lo() <= prev.hi() {
            report.reject(
                *line,
                None,
                format!(
                    "bin {}-{} overlaps or precedes bin {}-{}",
                    next.lo(),
                    next.hi(),
                    prev.lo(),
                    prev.hi()
                ),
            );
        }
    }
    if !report.rejections.is_empty() {
        return Err(fatal(report));
    }
    let last_line = bins.last().map_or(1, |b| b.0);
    match CohortSpec::new(bins.into_iter().map(|(_, b)| b).collect()) {
        Ok(spec) => Ok((spec, report)),
        Err(e) => {
            report.reject(last_line, None, e.to_string());
            Err(fatal(report))
        }
    }
}

pub fn load_cohort_path(path: impl AsRef<Path>) -> Result<(CohortSpec, ParseReport)> {
    load_cohort(open(path.as_ref())?)
}

/// Reads `age,sex,marital_status`.
pub fn load_subjects<R: Read>(reader: R) -> Result<(Vec<Subject>, ParseReport)> {
    let c = &SUBJECT_COLUMNS;
    let (rows, report) = read_rows(reader, c)?;
    let (subjects, report) = parse_rows(&rows, report, |row| {
        Ok(Subject {
            age: row.get(c, 0)?,
            sex: row.get_with(c, 1, Sex::from_str)?,
            status: row.get_with(c, 2, MaritalStatus::from_str)?,
        })
    })?;
    Ok((subjects.into_iter().map(|(_, s)| s).collect(), report))
}

pub fn load_subjects_path(path: impl AsRef<Path>) -> Result<(Vec<Subject>, ParseReport)> {
    load_subjects(open(path.as_ref())?)
}

/// Reads `sex,cause,anchor_age,status,multiplier`.
pub fn load_risk_table<R: Read>(reader: R) -> Result<(RelativeRiskTable, ParseReport)> {
    let c = &RISK_COLUMNS;
    let (rows, report) = read_rows(reader, c)?;
    let mut builder = RelativeRiskTable::builder();
    let (_, mut report) = parse_rows(&rows, report, |row| {
        let sex = row.get_with(c, 0, Sex::from_str)?;
        let cause = row.fields[1].clone();
        let age: u32 = row.get(c, 2)?;
        let status = row.get_with(c, 3, MaritalStatus::from_str)?;
        let multiplier: f64 = row.get(c, 4)?;
        row.get_with(c, 4, |_| builder.set(sex, &cause, age, status, multiplier).map(|_| ()))
    })?;
    match builder.build() {
        Ok(table) => Ok((table, report)),
        Err(e) => {
            report.reject(rows.last().map_or(1, |r| r.line), None, e.to_string());
            Err(fatal(report))
        }
    }
}

pub fn load_risk_table_path(path: impl AsRef<Path>) -> Result<(RelativeRiskTable, ParseReport)> {
    load_risk_table(open(path.as_ref())?)
}

/// Reads `status,proportion`. The shares must sum to 1 within
/// [`COMPOSITION_SUM_TOLERANCE`]; they are then rescaled to sum to 1.
pub fn load_composition<R: Read>(reader: R) -> Result<(MaritalComposition, ParseReport)> {
    let c = &COMPOSITION_COLUMNS;
    let (rows, report) = read_rows(reader, c)?;
    let mut seen = std::collections::BTreeSet::new();
    let (shares, mut report) = parse_rows(&rows, report, |row| {
        let status = row.get_with(c, 0, MaritalStatus::from_str)?;
        let p: f64 = row.get(c, 1)?;
        if !(p.is_finite() && p >= 0.0) {
            return Err(RowError {
                column: Some(c[1]),
                message: format!("proportion must be non-negative, got {p}"),
            });
        }
        if !seen.insert(status) {
            return Err(RowError {
                column: Some(c[0]),
                message: format!("{status} listed twice"),
            });
        }
        Ok((status, p))
    })?;
    match MaritalComposition::renormalized(shares.into_iter().map(|(_, s)| s), COMPOSITION_SUM_TOLERANCE) {
        Ok(comp) => Ok((comp, report)),
        Err(e) => {
            report.reject(rows.last().map_or(1, |r| r.line), Some(c[1]), e.to_string());
            Err(fatal(report))
        }
    }
}

pub fn load_composition_path(path: impl AsRef<Path>) -> Result<(MaritalComposition, ParseReport)> {
    load_composition(open(path.as_ref())?)
}

/// Reads `unit_id,median_age,f65,death_rate` with `f65` in percentage points.
///
/// If every `f65` is below 1 the file was probably written on a fraction
/// scale; that is reported as a warning, not an error.
pub fn load_counties<R: Read>(reader: R) -> Result<(Vec<CountyRecord>, ParseReport)> {
    let c = &COUNTY_COLUMNS;
    let (rows, report) = read_rows(reader, c)?;
    let (units, mut report) = parse_rows(&rows, report, |row| {
        let id = row.fields[0].clone();
        if id.is_empty() {
            return Err(RowError {
                column: Some(c[0]),
                message: "unit_id is empty".into(),
            });
        }
        let median_age: f64 = row.get(c, 1)?;
        let f65: f64 = row.get(c, 2)?;
        let death_rate: f64 = row.get(c, 3)?;
        let column = if !(0.0..=100.0).contains(&f65) {
            2
        } else if !(median_age >= 0.0) {
            1
        } else {
            3
        };
        row.get_with(c, column, |_| CountyRecord::new(id.clone(), median_age, f65, death_rate))
    })?;
    if units.iter().all(|(_, u)| u.f65 < 1.0) {
        report.warnings.push(
            "suspected fraction scale: every f65 value is below 1, but f65 is expected in percentage points (0-100)"
                .into(),
        );
    }
    Ok((units.into_iter().map(|(_, u)| u).collect(), report))
}

pub fn load_counties_path(path: impl AsRef<Path>) -> Result<(Vec<CountyRecord>, ParseReport)> {
    load_counties(open(path.as_ref())?)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new().has_headers(false).from_writer(w)
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn into_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_cohort<W: Write>(w: W, spec: &CohortSpec) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(COHORT_COLUMNS).map_err(into_io)?;
    for b in spec.bins() {
        out.write_record([b.lo().to_string(), b.hi().to_string(), b.count().to_string()])
            .map_err(into_io)?;
    }
    flush(out)
}

pub fn write_subjects<W: Write>(w: W, subjects: &[Subject]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SUBJECT_COLUMNS).map_err(into_io)?;
    for s in subjects {
        out.write_record([s.age.to_string(), s.sex.to_string(), s.status.to_string()])
            .map_err(into_io)?;
    }
    flush(out)
}

pub fn write_risk_table<W: Write>(w: W, table: &RelativeRiskTable) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(RISK_COLUMNS).map_err(into_io)?;
    for (sex, cause, age, status, m) in table.rows() {
        out.write_record([sex.to_string(), cause.to_owned(), age.to_string(), status.to_string(), m.to_string()])
            .map_err(into_io)?;
    }
    flush(out)
}

pub fn write_composition<W: Write>(w: W, comp: &MaritalComposition) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(COMPOSITION_COLUMNS).map_err(into_io)?;
    for (status, p) in comp.iter() {
        out.write_record([status.to_string(), p.to_string()]).map_err(into_io)?;
    }
    flush(out)
}

pub fn write_counties<W: Write>(w: W, units: &[CountyRecord]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(COUNTY_COLUMNS).map_err(into_io)?;
    for u in units {
        out.write_record([
            u.unit_id.clone(),
            u.median_age.to_string(),
            u.f65.to_string(),
            u.death_rate.to_string(),
        ])
        .map_err(into_io)?;
    }
    flush(out)
}

/// `start_age,year,deaths` with 1-based years.
pub fn write_projection<W: Write>(w: W, projection: &DeathProjection) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["start_age", "year", "deaths"]).map_err(into_io)?;
    for (age, year, deaths) in projection.rows() {
        out.write_record([age.to_string(), year.to_string(), deaths.to_string()])
            .map_err(into_io)?;
    }
    flush(out)
}

/// `metric,mean,sd,cv,n`; an undefined CV is written as an empty field.
pub fn write_dispersion<W: Write>(w: W, reports: &[DispersionReport]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["metric", "mean", "sd", "cv", "n"]).map_err(into_io)?;
    for r in reports {
        out.write_record([
            r.metric.clone(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.cv.map(|v| v.to_string()).unwrap_or_default(),
            r.n.to_string(),
        ])
        .map_err(into_io)?;
    }
    flush(out)
}

/// `predictor,slope,intercept,slope_se,intercept_se,r_squared,n`. Fits that
/// could not be made leave every field after the predictor empty.
pub fn write_fits<W: Write>(w: W, fits: &[(&str, Option<&FitResult>)]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = csv_writer(w);
    out.write_record(["predictor", "slope", "intercept", "slope_se", "intercept_se", "r_squared", "n"])
        .map_err(into_io)?;
    for (name, fit) in fits {
        let row = match fit {
            Some(f) => [
                name.to_string(),
                f.slope.to_string(),
                f.intercept.to_string(),
                opt(f.slope_se),
                opt(f.intercept_se),
                opt(f.r_squared),
                f.n.to_string(),
            ],
            None => [name.to_string(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()],
        };
        out.write_record(row).map_err(into_io)?;
    }
    flush(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rejected(r: Result<impl std::fmt::Debug>) -> ParseReport {
        match r {
            Err(Error::Parse(report)) => {
                assert!(report.fatal);
                report
            }
            other => panic!("expected parse failure, got {other:?}"),
        }
    }

    #[test]
    fn bundled_cohorts() {
        let (placebo, report) = load_cohort(LIPID_PLACEBO_CSV.as_bytes()).unwrap();
        assert_eq!(placebo.total(), 4502.0);
        assert_eq!(report.accepted, 4);
        assert!(report.rejections.is_empty() && !report.fatal);
        let (drug, _) = load_cohort(LIPID_PRAVASTATIN_CSV.as_bytes()).unwrap();
        assert_eq!(drug.total(), 4512.0);
    }

    #[test]
    fn empty_inputs() {
        for input in ["", "bin_lo,bin_hi,count\n", "# only a comment\nbin_lo,bin_hi,count\n"] {
            let report = rejected(load_cohort(input.as_bytes()));
            assert_eq!(report.rejections.len(), 1);
            assert_eq!(report.rejections[0].message, "no data rows");
        }
    }

    #[test]
    fn reversed_bin_names_its_line() {
        let input = "bin_lo,bin_hi,count\n31,54,1021\n64,55,1708\n";
        let report = rejected(load_cohort(input.as_bytes()));
        assert_eq!(report.rejections.len(), 1);
        assert_eq!(report.rejections[0].line, 3);
        assert!(report.rejections[0].to_string().contains("line 3"));
    }

    #[test]
    fn overlapping_bins_and_negative_counts() {
        let input = "bin_lo,bin_hi,count\n31,55,1\n55,64,2\n65,69,-3\n";
        let report = rejected(load_cohort(input.as_bytes()));
        assert_eq!(report.rejections.len(), 1);
        assert_eq!(report.rejections[0].line, 4);
        assert_eq!(report.rejections[0].column.as_deref(), Some("count"));

        let report = rejected(load_cohort("bin_lo,bin_hi,count\n31,55,1\n55,64,2\n".as_bytes()));
        assert_eq!(report.rejections[0].line, 3);
    }

    #[test]
    fn one_diagnostic_per_bad_row() {
        let input = "bin_lo,bin_hi,count\nx,y,z\n31,54,abc\n55,64\n65,69,3\n";
        let report = rejected(load_cohort(input.as_bytes()));
        let lines: Vec<u64> = report.rejections.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![2, 3, 4]);
    }

    #[test]
    fn missing_column() {
        let report = rejected(load_cohort("lo,hi,count\n1,2,3\n".as_bytes()));
        assert_eq!(report.rejections[0].column.as_deref(), Some("bin_lo"));
    }

    #[test]
    fn columns_in_any_order_with_whitespace() {
        let (spec, _) = load_cohort(" count , bin_hi,bin_lo\n 10 ,54, 31\n".as_bytes()).unwrap();
        assert_eq!(spec.bins()[0].lo(), 31);
        assert_eq!(spec.bins()[0].count(), 10.0);
    }

    #[test]
    fn bundled_risk_table_has_all_ratios() {
        let (table, report) = load_risk_table(US_MALES_1980_RISK_CSV.as_bytes()).unwrap();
        assert!(report.rejections.is_empty());
        let expect = [
            ("heart", 40, MaritalStatus::Single, 2.3),
            ("heart", 40, MaritalStatus::Widowed, 2.7),
            ("cancer", 40, MaritalStatus::Single, 1.8),
            ("cancer", 40, MaritalStatus::Widowed, 2.1),
            ("heart", 50, MaritalStatus::Single, 1.9),
            ("heart", 50, MaritalStatus::Widowed, 2.2),
            ("cancer", 50, MaritalStatus::Single, 1.6),
            ("cancer", 50, MaritalStatus::Widowed, 1.9),
        ];
        for (cause, age, st, v) in expect {
            assert_eq!(table.relative_rate(Sex::Male, cause, st, f64::from(age)).unwrap(), v);
        }
        let mut buf = Vec::new();
        write_risk_table(&mut buf, &table).unwrap();
        assert_eq!(load_risk_table(buf.as_slice()).unwrap().0, table);
    }

    #[test]
    fn risk_table_rejects_non_unit_married() {
        let input = "sex,cause,anchor_age,status,multiplier\nmale,heart,40,married,1.1\n";
        let report = rejected(load_risk_table(input.as_bytes()));
        assert_eq!(report.rejections[0].line, 2);
        assert_eq!(report.rejections[0].column.as_deref(), Some("multiplier"));
    }

    #[test]
    fn bundled_compositions() {
        let (c75, _) = load_composition(US_75_PLUS_COMPOSITION_CSV.as_bytes()).unwrap();
        assert!((c75.share(MaritalStatus::Married) - 0.46).abs() < 1e-12);
        assert!((c75.share(MaritalStatus::Widowed) - 0.45).abs() < 1e-12);
        let (c50, _) = load_composition(US_AGE_50_COMPOSITION_CSV.as_bytes()).unwrap();
        assert!((c50.share(MaritalStatus::Married) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn composition_must_sum_to_one() {
        let report = rejected(load_composition("status,proportion\nmarried,0.5\nsingle,0.3\n".as_bytes()));
        assert!(report.rejections[0].message.contains("sums to"));
        let report = rejected(load_composition("status,proportion\nmarried,0.5\nmarried,0.5\n".as_bytes()));
        assert_eq!(report.rejections[0].line, 3);
        let (c, _) = load_composition("status,proportion\nmarried,0.6\nsingle,0.4000005\n".as_bytes()).unwrap();
        let sum: f64 = c.iter().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn subjects_fixture() {
        let (subjects, report) = load_subjects(SYNTHETIC_SUBJECTS_CSV.as_bytes()).unwrap();
        assert_eq!(subjects.len(), report.accepted);
        assert!(subjects.len() >= 1000);
        let report = rejected(load_subjects("age,sex,marital_status\n40,x,married\n".as_bytes()));
        assert_eq!(report.rejections[0].column.as_deref(), Some("sex"));
    }

    #[test]
    fn county_fraction_scale_warning() {
        let input = "unit_id,median_age,f65,death_rate\na,33,0.15,9\nb,35,0.12,8\n";
        let (units, report) = load_counties(input.as_bytes()).unwrap();
        assert_eq!(units.len(), 2);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("suspected fraction scale"));

        let (_, report) = load_counties("unit_id,median_age,f65,death_rate\na,33,15,9\nb,35,0.5,8\n".as_bytes()).unwrap();
        assert!(report.warnings.is_empty());

        let report = rejected(load_counties("unit_id,median_age,f65,death_rate\na,33,150,9\n".as_bytes()));
        assert_eq!(report.rejections[0].column.as_deref(), Some("f65"));
    }

    #[test]
    fn projection_csv_layout() {
        let spec = CohortSpec::from_bins(&[(60, 61, 10.0)]).unwrap();
        let proj = crate::GompertzParams::default().project(&spec.expand(), 2).unwrap();
        let mut buf = Vec::new();
        write_projection(&mut buf, &proj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "start_age,year,deaths");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("60,1,"));
        assert!(lines[4].starts_with("61,2,"));
    }

    #[test]
    fn dispersion_csv_layout() {
        let r = DispersionReport::from_values("f65", &[Some(1.0), Some(3.0)]).unwrap();
        let z = DispersionReport::from_values("x", &[Some(-1.0), Some(1.0)]).unwrap();
        let mut buf = Vec::new();
        write_dispersion(&mut buf, &[r, z]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "metric,mean,sd,cv,n\nf65,2,1,0.5,2\nx,0,1,,2\n");
    }

    proptest! {
        #[test]
        fn cohort_round_trip(bins in proptest::collection::vec((1u32..10, 0.0f64..1e4), 1..10)) {
            let mut lo = 18;
            let mut raw = Vec::new();
            for (w, c) in bins {
                raw.push((lo, lo + w - 1, c + 0.5));
                lo += w;
            }
            let spec = CohortSpec::from_bins(&raw).unwrap();
            let mut buf = Vec::new();
            write_cohort(&mut buf, &spec).unwrap();
            prop_assert_eq!(load_cohort(buf.as_slice()).unwrap().0, spec);
        }

        #[test]
        fn county_and_subject_round_trip(rows in proptest::collection::vec((0.0f64..90.0, 0.0f64..100.0, 0.0f64..40.0, 0u32..110, 0usize..10), 1..20)) {
            let units: Vec<_> = rows.iter().enumerate()
                .map(|(i, &(ma, f, d, _, _))| CountyRecord::new(format!("u{i}"), ma, f, d).unwrap())
                .collect();
            let subjects: Vec<_> = rows.iter()
                .map(|&(_, _, _, age, k)| Subject { age, sex: Sex::ALL[k % 2], status: MaritalStatus::ALL[k % 5] })
                .collect();
            let mut buf = Vec::new();
            write_counties(&mut buf, &units).unwrap();
            prop_assert_eq!(load_counties(buf.as_slice()).unwrap().0, units);
            let mut buf = Vec::new();
            write_subjects(&mut buf, &subjects).unwrap();
            prop_assert_eq!(load_subjects(buf.as_slice()).unwrap().0, subjects);
        }
    }
}
