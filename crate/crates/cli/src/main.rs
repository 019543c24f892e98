use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

pub use output::CliError;

/// Expected-death corrections for clinical-trial study groups.
#[derive(Debug, Parser)]
#[command(name = "cohort-bias-lab", version)]
struct Cli {
    /// Directory for CSV outputs (projection tables, plot series).
    #[arg(long, global = true, env = "COHORT_BIAS_LAB_OUT")]
    out: Option<PathBuf>,

    /// Append a generation timestamp to reports.
    #[arg(long, global = true)]
    stamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct HazardArgs {
    /// Baseline death rate per 1,000 at age 0.
    #[arg(long, default_value_t = cohort_bias_core::GompertzParams::DEFAULT_G0)]
    g0: f64,

    /// Exponential growth of the death rate per year of age.
    #[arg(long, short = 'a', default_value_t = cohort_bias_core::GompertzParams::DEFAULT_GROWTH)]
    growth: f64,

    /// Age-independent hazard component. Only 0 is supported.
    #[arg(long, default_value_t = 0.0)]
    makeham: f64,

    /// Trial duration in years.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    years: u32,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project expected deaths for an age-binned cohort.
    Project {
        /// Cohort CSV (`bin_lo,bin_hi,count`).
        #[arg(long)]
        cohort: PathBuf,

        #[command(flatten)]
        hazard: HazardArgs,

        /// Observed death count; rescales g0 so the projection matches it.
        #[arg(long)]
        observed: Option<f64>,
    },

    /// Deaths in one bin with everyone at its youngest age, spread uniformly,
    /// and everyone at its oldest age.
    Sensitivity {
        #[arg(long)]
        cohort: PathBuf,

        /// 0-based bin index; defaults to the oldest bin.
        #[arg(long)]
        bin: Option<usize>,

        /// Calibrate g0 to this observed cohort death count first.
        #[arg(long)]
        calibrate: Option<f64>,

        #[command(flatten)]
        hazard: HazardArgs,
    },

    /// Death rate adjusted for marital composition.
    AdjustMarital {
        /// Composition CSV (`status,proportion`).
        #[arg(long)]
        composition: PathBuf,

        /// Second group's composition; enables the excess-deaths estimate.
        #[arg(long)]
        compare: Option<PathBuf>,

        /// Risk-table CSV; defaults to the bundled US male 1980 table.
        #[arg(long)]
        risk_table: Option<PathBuf>,

        #[arg(long, default_value = "male")]
        sex: String,

        #[arg(long, default_value = "heart")]
        cause: String,

        #[arg(long, default_value_t = 50.0)]
        age: f64,

        /// Death rate of married people, per 1,000.
        #[arg(long, default_value_t = 10.0)]
        base_rate: f64,

        /// Expected deaths in the comparison group, for `--compare`.
        #[arg(long)]
        base_deaths: Option<f64>,
    },

    /// Dispersion of group statistics under repeated 1:1 randomization, or
    /// across counties.
    Dispersion {
        /// Subjects CSV (`age,sex,marital_status`).
        #[arg(long, conflicts_with = "counties", required_unless_present = "counties")]
        subjects: Option<PathBuf>,

        /// County CSV (`unit_id,median_age,f65,death_rate`).
        #[arg(long)]
        counties: Option<PathBuf>,

        #[arg(long, alias = "replications", default_value_t = 1000)]
        splits: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Also report all ten sex-by-marital-status cell shares.
        #[arg(long)]
        cells: bool,

        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },

    /// Least-squares fit of county death rates on F65 and on median age.
    Regress {
        #[arg(long)]
        counties: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
