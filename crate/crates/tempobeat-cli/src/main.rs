//! tempobeat: temporal representativeness analysis for hourly activity
//! series. Exit codes: 0 success, 1 data error, 2 model non-convergence,
//! 3 usage error.

mod commands;
mod manifest;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use tempobeat::error::Error;
use tempobeat::ingest::GapPolicy;

use commands::{AxisSelection, ModelSelection};

#[derive(Parser)]
#[command(
    name = "tempobeat",
    version,
    about = "How representative is any hour or day of an hourly activity series?",
    after_help = "Pipeline: synth (optional) -> ingest -> acf / fit -> rmsd -> recommend -> report.\n\
                  All stages read and write artifacts in --out. TEMPOBEAT_THREADS caps fit concurrency."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Artifact directory shared by all pipeline stages.
    #[arg(long, default_value = "tempobeat-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate input CSVs and assemble the canonical dataset bundle.
    Ingest {
        #[command(flatten)]
        out: OutDir,
        /// observations.csv: timestamp,size_bytes[,row_count]
        #[arg(long)]
        obs: PathBuf,
        /// weather.csv: timestamp,station,air_temp_c,precip_mm
        #[arg(long)]
        weather: PathBuf,
        /// events.csv: start,end,category,all_day (optional)
        #[arg(long)]
        events: Option<PathBuf>,
        /// TOML run configuration (timezone, stations, gap policy, k).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Observation gap policy, overriding the config file.
        #[arg(long, value_parser = parse_gap_policy)]
        fill_gaps: Option<GapPolicy>,
    },
    /// Write the four correlogram presets as CSV and SVG.
    Acf {
        #[command(flatten)]
        out: OutDir,
        /// Horizon of the day-step hourly correlogram, in hours.
        #[arg(long, default_value_t = tempobeat::acf::HOURLY_DAY_STEP_HORIZON)]
        hours_horizon: usize,
        /// Horizon of the week-step daily correlogram, in days.
        #[arg(long, default_value_t = tempobeat::acf::DAILY_WEEK_STEP_HORIZON)]
        days_horizon: usize,
    },
    /// Fit the mixed models and write one JSON per model.
    Fit {
        #[command(flatten)]
        out: OutDir,
        /// empty, full, restricted, or all.
        #[arg(long, default_value = "all", value_parser = parse_model)]
        model: ModelSelection,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Exclude |z| > k rows from the fit (reported anomalies stay in by default).
        #[arg(long)]
        drop_anomalies: bool,
        /// Anomaly threshold override for --drop-anomalies.
        #[arg(long)]
        k: Option<f64>,
    },
    /// Decompose prediction RMSD by weekday, hour, and weekday-hour slot.
    Rmsd {
        #[command(flatten)]
        out: OutDir,
        #[arg(long, default_value = "all", value_parser = parse_model)]
        model: ModelSelection,
        /// Restrict output to one axis: weekday, hour, or grid.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<AxisSelection>,
    },
    /// Rank weekday-hour sampling slots from the RMSD grids.
    Recommend {
        #[command(flatten)]
        out: OutDir,
        #[arg(long, default_value = "all", value_parser = parse_model)]
        model: ModelSelection,
        /// Slots observed fewer times than this are not recommended.
        #[arg(long, default_value_t = 4)]
        min_count: usize,
    },
    /// Flag hours whose |z| exceeds the threshold.
    Anomalies {
        #[command(flatten)]
        out: OutDir,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Threshold in standard deviations (defaults to the config's k).
        #[arg(long)]
        k: Option<f64>,
    },
    /// Check the file-size-vs-row-count proxy on an observations CSV.
    Proxy {
        /// observations.csv with the optional row_count column present.
        #[arg(long)]
        obs: PathBuf,
    },
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        #[command(flatten)]
        out: OutDir,
        /// realistic, events, thursday, or null.
        #[arg(long, default_value = "realistic")]
        preset: String,
        /// First day of the generated span.
        #[arg(long, default_value = "2018-01-01")]
        start: NaiveDate,
        #[arg(long, default_value_t = 17)]
        months: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Assemble a self-contained HTML report from existing artifacts.
    Report {
        #[command(flatten)]
        out: OutDir,
    },
}

fn parse_model(s: &str) -> Result<ModelSelection, String> {
    ModelSelection::parse(s).map_err(|e| e.to_string())
}

fn parse_axis(s: &str) -> Result<AxisSelection, String> {
    AxisSelection::parse(s).map_err(|e| e.to_string())
}

fn parse_gap_policy(s: &str) -> Result<GapPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Ingest {
            out,
            obs,
            weather,
            events,
            config,
            fill_gaps,
        } => commands::cmd_ingest(&commands::IngestArgs {
            obs,
            weather,
            events,
            config,
            fill_gaps,
            out: out.out,
        }),
        Command::Acf {
            out,
            hours_horizon,
            days_horizon,
        } => commands::cmd_acf(&commands::AcfArgs {
            out: out.out,
            hours_horizon,
            days_horizon,
        }),
        Command::Fit {
            out,
            model,
            config,
            drop_anomalies,
            k,
        } => commands::cmd_fit(&commands::FitArgs {
            out: out.out,
            model,
            config,
            drop_anomalies,
            k,
        }),
        Command::Rmsd { out, model, axis } => commands::cmd_rmsd(&commands::RmsdArgs {
            out: out.out,
            model,
            axis,
        }),
        Command::Recommend {
            out,
            model,
            min_count,
        } => commands::cmd_recommend(&commands::RecommendArgs {
            out: out.out,
            model,
            min_count,
        }),
        Command::Anomalies { out, config, k } => {
            commands::cmd_anomalies(&commands::AnomaliesArgs {
                out: out.out,
                config,
                k,
            })
        }
        Command::Proxy { obs } => commands::cmd_proxy(&commands::ProxyArgs { obs }),
        Command::Synth {
            out,
            preset,
            start,
            months,
            seed,
        } => commands::cmd_synth(&commands::SynthArgs {
            out: out.out,
            preset,
            start,
            months,
            seed,
        }),
        Command::Report { out } => report::cmd_report(&out.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let kind = err.kind();
            let _ = err.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::NotConverged) => {
            eprintln!("error: {}", Error::NotConverged);
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
