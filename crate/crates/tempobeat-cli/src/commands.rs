//! Subcommand implementations. Every command works inside `--out DIR`:
//! `ingest`/`synth` create artifacts there and later stages consume them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use tempobeat::acf::{aggregate_daily, correlogram_preset, CorrelogramPreset};
use tempobeat::error::Error;
use tempobeat::ingest::{
    self, read_bundle, write_bundle, AnalysisDataset, GapPolicy, RunConfig,
};
use tempobeat::mlm::{
    build_design, fit_ml, predict_conditional, Design, ModelFit, ModelKind, ModelSpec,
};
use tempobeat::rmsd::{full_report, recommend, Cell, Recommendation, RmsdReport};
use tempobeat::series::{flag_anomalies, summary_profiles, WEEKDAY_NAMES};
use tempobeat::synth::{generate_bundle, SynthConfig};

use crate::manifest::ManifestBuilder;
use crate::svg;

type Result<T> = std::result::Result<T, Error>;

pub fn thread_cap() -> usize {
    std::env::var("TEMPOBEAT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get().min(3))
                .unwrap_or(1)
        })
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_toml(&std::fs::read_to_string(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn write_text(manifest: &mut ManifestBuilder, path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    manifest.output(path);
    Ok(())
}

pub struct IngestArgs {
    pub obs: PathBuf,
    pub weather: PathBuf,
    pub events: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub fill_gaps: Option<GapPolicy>,
    pub out: PathBuf,
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("ingest", 1);
    let mut config = load_config(args.config.as_deref())?;
    if let Some(policy) = args.fill_gaps {
        config.fill_gaps = policy;
    }
    manifest.config(&config);
    manifest.input(&args.obs);
    manifest.input(&args.weather);
    if let Some(events) = &args.events {
        manifest.input(events);
    }
    if let Some(cfg) = &args.config {
        manifest.input(cfg);
    }

    let obs = ingest::parse_observations(std::fs::File::open(&args.obs)?)?;
    let weather = ingest::parse_weather(
        std::fs::File::open(&args.weather)?,
        &config.stations,
        config.weather_max_gap_hours,
    )?;
    let events = match &args.events {
        Some(path) => ingest::parse_events(std::fs::File::open(path)?)?,
        None => Vec::new(),
    };
    manifest.stage("parse");

    let dataset = ingest::assemble_dataset(&obs, &weather, &events, &config)?;
    manifest.stage("assemble");

    std::fs::create_dir_all(&args.out)?;
    write_bundle(&dataset, &args.out)?;
    manifest.output(&args.out.join(ingest::BUNDLE_CSV));
    manifest.output(&args.out.join(ingest::BUNDLE_META));

    // Summary profiles feed the report's activity-profile figures.
    let profiles = summary_profiles(&dataset.y)?;
    let mut profiles_json = serde_json::to_string_pretty(&profiles)?;
    profiles_json.push('\n');
    write_text(&mut manifest, &args.out.join("profiles.json"), &profiles_json)?;

    let hour_labels: Vec<String> = (0..24).map(|h| format!("{h:02}")).collect();
    let hour_bars: Vec<Option<f64>> = profiles.by_hour.iter().map(|&v| finite(v)).collect();
    write_text(
        &mut manifest,
        &args.out.join("profile_hour.svg"),
        &svg::bar_chart(
            "Average standardized activity by hour of day",
            "hour of day",
            "mean z",
            &hour_labels,
            &[("all days", hour_bars)],
        ),
    )?;
    let wd_labels: Vec<String> = WEEKDAY_NAMES.iter().map(|s| s.to_string()).collect();
    let wd_bars: Vec<Option<f64>> = profiles.by_weekday.iter().map(|&v| finite(v)).collect();
    write_text(
        &mut manifest,
        &args.out.join("profile_weekday.svg"),
        &svg::bar_chart(
            "Average standardized activity by weekday",
            "weekday",
            "mean z",
            &wd_labels,
            &[("all hours", wd_bars)],
        ),
    )?;
    let week_points: Vec<(f64, f64)> = profiles
        .week_trajectory
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| (i as f64, v))
        .collect();
    write_text(
        &mut manifest,
        &args.out.join("profile_week.svg"),
        &svg::line_chart(
            "Average week trajectory (Mon 00 .. Sun 23)",
            "hour of week",
            "mean z",
            &[("mean z", week_points)],
        ),
    )?;
    let hist = &profiles.histogram;
    let mut hist_labels = vec![format!("<{}", hist.lo)];
    let mut hist_values = vec![Some(hist.underflow as f64)];
    for (i, &count) in hist.bins.iter().enumerate() {
        hist_labels.push(format!("{:.2}", hist.lo + hist.bin_width * i as f64));
        hist_values.push(Some(count as f64));
    }
    hist_labels.push(format!(">={}", hist.hi));
    hist_values.push(Some(hist.overflow as f64));
    write_text(
        &mut manifest,
        &args.out.join("profile_histogram.svg"),
        &svg::bar_chart(
            "Histogram of standardized activity",
            "z (bin lower edge)",
            "hours",
            &hist_labels,
            &[("count", hist_values)],
        ),
    )?;
    manifest.stage("profiles");
    manifest.write(&args.out)?;
    eprintln!(
        "ingest: {} rows from {} to {}, {} filled value(s)",
        dataset.n_rows(),
        dataset.grid.first().unwrap(),
        dataset.grid.last().unwrap(),
        dataset.fill_report.len()
    );
    Ok(())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub struct AcfArgs {
    pub out: PathBuf,
    pub hours_horizon: usize,
    pub days_horizon: usize,
}

pub fn cmd_acf(args: &AcfArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("acf", 1);
    let dataset = read_bundle(&args.out)?;
    manifest.input(&args.out.join(ingest::BUNDLE_CSV));
    let z = dataset.z();
    let daily = aggregate_daily(&dataset.observations())?;
    manifest.stage("load");

    for preset in CorrelogramPreset::all() {
        let (series, horizon) = match preset {
            CorrelogramPreset::HourlyWithinDay => (&z, None),
            CorrelogramPreset::HourlyDayStep => (&z, Some(args.hours_horizon)),
            CorrelogramPreset::DailyWithinMonth => (&daily.z, None),
            CorrelogramPreset::DailyWeekStep => (&daily.z, Some(args.days_horizon)),
        };
        let acf = correlogram_preset(series, preset, horizon)?;
        let mut csv = String::from("lag,r\n");
        for (lag, r) in acf.lags.iter().zip(&acf.r) {
            writeln!(csv, "{lag},{r}").unwrap();
        }
        write_text(
            &mut manifest,
            &args.out.join(format!("acf_{}.csv", preset.name())),
            &csv,
        )?;
        let points: Vec<(f64, f64)> = acf
            .lags
            .iter()
            .zip(&acf.r)
            .map(|(&l, &r)| (l as f64, r))
            .collect();
        let unit = match preset.params().0 {
            tempobeat::acf::LagUnit::Hour => "lag (hours)",
            tempobeat::acf::LagUnit::Day => "lag (days)",
        };
        write_text(
            &mut manifest,
            &args.out.join(format!("acf_{}.svg", preset.name())),
            &svg::line_chart(
                &format!("Autocorrelation: {}", preset.name().replace('_', " ")),
                unit,
                "r",
                &[("r", points)],
            ),
        )?;
    }
    if !daily.trimmed.is_empty() {
        eprintln!(
            "acf: {} partial day(s) excluded from the daily series",
            daily.trimmed.len()
        );
    }
    manifest.stage("correlograms");
    manifest.write(&args.out)?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum ModelSelection {
    One(ModelKind),
    All,
}

impl ModelSelection {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(ModelSelection::All)
        } else {
            Ok(ModelSelection::One(s.parse()?))
        }
    }

    fn kinds(&self) -> Vec<ModelKind> {
        match self {
            ModelSelection::One(k) => vec![*k],
            ModelSelection::All => {
                vec![ModelKind::Empty, ModelKind::Full, ModelKind::Restricted]
            }
        }
    }
}

pub struct FitArgs {
    pub out: PathBuf,
    pub model: ModelSelection,
    pub config: Option<PathBuf>,
    pub drop_anomalies: bool,
    pub k: Option<f64>,
}

fn design_for(
    dataset: &AnalysisDataset,
    kind: ModelKind,
    drop_anomalies: Option<f64>,
) -> Result<(ModelSpec, Design)> {
    let spec = ModelSpec::for_kind(kind, dataset);
    let mut design = build_design(dataset, &spec)?;
    if let Some(k) = drop_anomalies {
        let z = dataset.z();
        let keep: Vec<bool> = design.row_ids.iter().map(|&row| z[row].abs() <= k).collect();
        if keep.iter().any(|&kept| !kept) {
            design = design.retain_rows(&keep)?;
        }
    }
    Ok((spec, design))
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let threads = thread_cap();
    let mut manifest = ManifestBuilder::new("fit", threads);
    let config = load_config(args.config.as_deref())?;
    manifest.config(&config);
    let dataset = read_bundle(&args.out)?;
    manifest.input(&args.out.join(ingest::BUNDLE_CSV));
    manifest.stage("load");

    let drop = args
        .drop_anomalies
        .then_some(args.k.unwrap_or(config.anomaly_k));
    let kinds = args.model.kinds();

    // The fits are independent; run up to `threads` of them concurrently.
    let mut results: Vec<(ModelKind, Result<ModelFit>)> = Vec::new();
    for chunk in kinds.chunks(threads.max(1)) {
        let mut batch: Vec<(ModelKind, Result<ModelFit>)> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&kind| {
                    let dataset = &dataset;
                    scope.spawn(move || {
                        let (spec, design) = design_for(dataset, kind, drop)?;
                        fit_ml(&design, &spec)
                    })
                })
                .collect();
            for (kind, handle) in chunk.iter().zip(handles) {
                batch.push((*kind, handle.join().expect("fit thread panicked")));
            }
        });
        results.extend(batch);
    }
    manifest.stage("fit");

    let mut any_not_converged = false;
    for (kind, result) in results {
        let fit = result?;
        if !fit.converged {
            eprintln!("fit: {} model did not converge in {} iterations", kind.name(), fit.iterations);
            any_not_converged = true;
        }
        if !fit.spec.fixed_effects.is_empty() {
            let requested = fit.spec.fixed_effects.len();
            let kept = fit.beta.len() - 1;
            if kept < requested {
                eprintln!(
                    "fit: {} model dropped {} constant covariate column(s)",
                    kind.name(),
                    requested - kept
                );
            }
        }
        let path = args.out.join(format!("fit_{}.json", kind.name()));
        write_text(&mut manifest, &path, &fit.to_json()?)?;
        eprintln!(
            "fit: {} model loglik {:.3}, n_obs {}, shares {:?}",
            kind.name(),
            fit.loglik,
            fit.n_obs,
            fit.components.shares().map(|s| (s * 1000.0).round() / 1000.0)
        );
    }
    manifest.stage("write");
    manifest.write(&args.out)?;
    if any_not_converged {
        return Err(Error::NotConverged);
    }
    Ok(())
}

pub struct RmsdArgs {
    pub out: PathBuf,
    pub model: ModelSelection,
    pub axis: Option<AxisSelection>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum AxisSelection {
    Weekday,
    Hour,
    Grid,
}

impl AxisSelection {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "weekday" => Ok(AxisSelection::Weekday),
            "hour" => Ok(AxisSelection::Hour),
            "grid" => Ok(AxisSelection::Grid),
            other => Err(Error::InvalidConfig(format!("unknown axis {other:?}"))),
        }
    }
}

fn report_for(dataset: &AnalysisDataset, fit: &ModelFit) -> Result<RmsdReport> {
    let mut design = build_design(dataset, &fit.spec)?;
    // A fit with anomalies dropped carries fewer dates; align the design.
    if fit.n_obs != design.n_rows() {
        let dates: std::collections::BTreeSet<&String> =
            fit.random_effects.date.keys().collect();
        let keep: Vec<bool> = design.row_ids
            .iter()
            .map(|&row| dates.contains(&dataset.keys[row].date.to_string()))
            .collect();
        design = design.retain_rows(&keep)?;
    }
    let predicted = predict_conditional(fit, &design)?;
    let keys: Vec<_> = design.row_ids.iter().map(|&row| dataset.keys[row]).collect();
    full_report(&fit.spec.label, &design.y, &predicted, &keys)
}

fn load_fit(out: &Path, kind: ModelKind) -> Result<ModelFit> {
    let path = out.join(format!("fit_{}.json", kind.name()));
    if !path.exists() {
        return Err(Error::InvalidConfig(format!(
            "missing {}; run `tempobeat fit --model {}` first",
            path.display(),
            kind.name()
        )));
    }
    ModelFit::from_json(&std::fs::read_to_string(path)?)
}

pub fn cmd_rmsd(args: &RmsdArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("rmsd", 1);
    let dataset = read_bundle(&args.out)?;
    manifest.input(&args.out.join(ingest::BUNDLE_CSV));

    let mut reports = Vec::new();
    for kind in args.model.kinds() {
        let fit = load_fit(&args.out, kind)?;
        manifest.input(&args.out.join(format!("fit_{}.json", kind.name())));
        reports.push((kind, report_for(&dataset, &fit)?));
    }
    manifest.stage("predict");

    let want = |axis: AxisSelection| args.axis.is_none() || args.axis == Some(axis);
    for (kind, report) in &reports {
        if want(AxisSelection::Weekday) {
            let mut csv = String::from("weekday,rmsd,count\n");
            for cell in &report.by_weekday.cells {
                writeln!(
                    csv,
                    "{},{},{}",
                    WEEKDAY_NAMES[cell.weekday.unwrap()],
                    cell.rmsd,
                    cell.count
                )
                .unwrap();
            }
            write_text(
                &mut manifest,
                &args.out.join(format!("rmsd_weekday_{}.csv", kind.name())),
                &csv,
            )?;
        }
        if want(AxisSelection::Hour) {
            let mut csv = String::from("hour,rmsd,count\n");
            for cell in &report.by_hour.cells {
                writeln!(csv, "{},{},{}", cell.hour.unwrap(), cell.rmsd, cell.count).unwrap();
            }
            write_text(
                &mut manifest,
                &args.out.join(format!("rmsd_hour_{}.csv", kind.name())),
                &csv,
            )?;
        }
        if want(AxisSelection::Grid) {
            let mut csv = String::from("weekday,hour,rmsd,count\n");
            for cell in &report.by_weekday_hour.cells {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    WEEKDAY_NAMES[cell.weekday.unwrap()],
                    cell.hour.unwrap(),
                    cell.rmsd,
                    cell.count
                )
                .unwrap();
            }
            write_text(
                &mut manifest,
                &args.out.join(format!("rmsd_grid_{}.csv", kind.name())),
                &csv,
            )?;
        }
        eprintln!("rmsd: {} model overall {:.5}", kind.name(), report.overall);
    }

    // Comparison charts across whatever models were selected.
    if want(AxisSelection::Weekday) {
        let labels: Vec<String> = WEEKDAY_NAMES.iter().map(|s| s.to_string()).collect();
        let series: Vec<(&str, Vec<Option<f64>>)> = reports
            .iter()
            .map(|(kind, r)| {
                let values = (0..7)
                    .map(|w| r.by_weekday.cell(Some(w), None).map(|c| c.rmsd))
                    .collect();
                (kind.name(), values)
            })
            .collect();
        write_text(
            &mut manifest,
            &args.out.join("rmsd_weekday.svg"),
            &svg::bar_chart("RMSD by weekday", "weekday", "RMSD", &labels, &series),
        )?;
    }
    if want(AxisSelection::Hour) {
        let labels: Vec<String> = (0..24).map(|h| format!("{h:02}")).collect();
        let series: Vec<(&str, Vec<Option<f64>>)> = reports
            .iter()
            .map(|(kind, r)| {
                let values = (0..24)
                    .map(|h| r.by_hour.cell(None, Some(h)).map(|c| c.rmsd))
                    .collect();
                (kind.name(), values)
            })
            .collect();
        write_text(
            &mut manifest,
            &args.out.join("rmsd_hour.svg"),
            &svg::bar_chart("RMSD by hour", "hour of day", "RMSD", &labels, &series),
        )?;
    }
    manifest.stage("decompose");
    manifest.write(&args.out)?;
    Ok(())
}

pub struct RecommendArgs {
    pub out: PathBuf,
    pub model: ModelSelection,
    pub min_count: usize,
}

fn read_grid_csv(path: &Path, model: &str) -> Result<RmsdReport> {
    let text = std::fs::read_to_string(path)?;
    let mut cells = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                line: i as u64 + 1,
                message: format!("expected weekday,hour,rmsd,count in {}", path.display()),
            });
        }
        let weekday = WEEKDAY_NAMES
            .iter()
            .position(|w| *w == parts[0])
            .ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                message: format!("unknown weekday {}", parts[0]),
            })?;
        let parse_err = |message: String| Error::Parse {
            line: i as u64 + 1,
            message,
        };
        cells.push(Cell {
            weekday: Some(weekday),
            hour: Some(
                parts[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(e.to_string()))?,
            ),
            rmsd: parts[2]
                .parse::<f64>()
                .map_err(|e| parse_err(e.to_string()))?,
            count: parts[3]
                .parse::<usize>()
                .map_err(|e| parse_err(e.to_string()))?,
        });
    }
    let n: usize = cells.iter().map(|c| c.count).sum();
    let overall = if n == 0 {
        0.0
    } else {
        (cells
            .iter()
            .map(|c| c.count as f64 * c.rmsd * c.rmsd)
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    // Axis summaries are rebuilt from the grid for argmin reporting.
    let weekday_cells = regroup(&cells, |c| c.weekday.unwrap(), true);
    let hour_cells = regroup(&cells, |c| c.hour.unwrap(), false);
    Ok(RmsdReport {
        model: model.to_string(),
        overall,
        n,
        by_weekday: tempobeat::rmsd::AxisDecomposition {
            axis: tempobeat::rmsd::Axis::Weekday,
            cells: weekday_cells,
            overall,
            n,
        },
        by_hour: tempobeat::rmsd::AxisDecomposition {
            axis: tempobeat::rmsd::Axis::Hour,
            cells: hour_cells,
            overall,
            n,
        },
        by_weekday_hour: tempobeat::rmsd::AxisDecomposition {
            axis: tempobeat::rmsd::Axis::WeekdayHour,
            cells,
            overall,
            n,
        },
    })
}

fn regroup(cells: &[Cell], key: impl Fn(&Cell) -> usize, weekday: bool) -> Vec<Cell> {
    let mut acc: std::collections::BTreeMap<usize, (f64, usize)> = std::collections::BTreeMap::new();
    for cell in cells {
        let e = acc.entry(key(cell)).or_insert((0.0, 0));
        e.0 += cell.count as f64 * cell.rmsd * cell.rmsd;
        e.1 += cell.count;
    }
    acc.into_iter()
        .map(|(k, (ss, count))| Cell {
            weekday: weekday.then_some(k),
            hour: (!weekday).then_some(k),
            rmsd: (ss / count as f64).sqrt(),
            count,
        })
        .collect()
}

pub fn cmd_recommend(args: &RecommendArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("recommend", 1);
    let mut reports = Vec::new();
    for kind in args.model.kinds() {
        let path = args.out.join(format!("rmsd_grid_{}.csv", kind.name()));
        if !path.exists() {
            return Err(Error::InvalidConfig(format!(
                "missing {}; run `tempobeat rmsd --model {}` first",
                path.display(),
                kind.name()
            )));
        }
        manifest.input(&path);
        reports.push(read_grid_csv(&path, kind.name())?);
    }
    manifest.stage("load");

    let refs: Vec<&RmsdReport> = reports.iter().collect();
    let recommendation: Recommendation = recommend(&refs, args.min_count)?;
    let mut json = serde_json::to_string_pretty(&recommendation)?;
    json.push('\n');
    write_text(&mut manifest, &args.out.join("recommendation.json"), &json)?;
    manifest.stage("rank");
    manifest.write(&args.out)?;

    println!(
        "best weekday: {}   best hour: {:02}:00",
        recommendation.best_weekday_name, recommendation.best_hour
    );
    println!("rank  weekday  hour   rmsd      count");
    for (i, slot) in recommendation.ranked.iter().take(15).enumerate() {
        println!(
            "{:>4}  {:<7}  {:02}:00  {:<8.5} {:>5}",
            i + 1,
            slot.weekday_name,
            slot.hour,
            slot.rmsd,
            slot.count
        );
    }
    Ok(())
}

pub struct AnomaliesArgs {
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub k: Option<f64>,
}

pub fn cmd_anomalies(args: &AnomaliesArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("anomalies", 1);
    let config = load_config(args.config.as_deref())?;
    manifest.config(&config);
    let dataset = read_bundle(&args.out)?;
    manifest.input(&args.out.join(ingest::BUNDLE_CSV));
    let k = args.k.unwrap_or(config.anomaly_k);
    if k <= 0.0 {
        return Err(Error::InvalidConfig("anomaly threshold k must be positive".into()));
    }
    let flagged = flag_anomalies(&dataset.y, k);
    let mut csv = String::from("timestamp,z\n");
    for (stamp, z) in &flagged {
        writeln!(csv, "{stamp},{z}").unwrap();
    }
    write_text(&mut manifest, &args.out.join("anomalies.csv"), &csv)?;
    manifest.stage("screen");
    manifest.write(&args.out)?;
    eprintln!(
        "anomalies: {} hour(s) beyond {k} standard deviations (reported, not removed)",
        flagged.len()
    );
    Ok(())
}

pub struct ProxyArgs {
    pub obs: PathBuf,
}

pub fn cmd_proxy(args: &ProxyArgs) -> Result<()> {
    let obs = ingest::parse_observations(std::fs::File::open(&args.obs)?)?;
    let pairs: Vec<(f64, f64)> = obs
        .iter()
        .filter_map(|o| o.row_count.map(|c| (o.value, c)))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::InvalidConfig(
            "proxy validation needs a row_count column with at least 3 values".into(),
        ));
    }
    let sizes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let counts: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let r2 = tempobeat::series::proxy_r2(&sizes, &counts)?;
    println!("proxy R2 = {r2:.6} over {} hour(s)", pairs.len());
    Ok(())
}

pub struct SynthArgs {
    pub out: PathBuf,
    pub preset: String,
    pub start: NaiveDate,
    pub months: u32,
    pub seed: u64,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("synth", 1);
    let config = match args.preset.as_str() {
        "realistic" => SynthConfig::realistic(args.start, args.months, args.seed),
        "events" => {
            let mut c = SynthConfig::realistic(args.start, args.months, args.seed)
                .with_standard_events(1.0);
            c.weather_effects = [
                ("air_temp_stockholm", 0.0041),
                ("precip_stockholm", 0.0203),
                ("air_temp_sq_stockholm", 0.0002),
                ("d_air_temp_sq_stockholm", 0.0043),
                ("air_temp_malmo", 0.0015),
                ("precip_malmo", 0.0029),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            c
        }
        "thursday" => {
            let mut c = SynthConfig::realistic(args.start, args.months, args.seed);
            c.weekday_noise_multipliers[3] = 0.5;
            c.hour_noise_multipliers[11] = 0.5;
            c
        }
        "null" => SynthConfig::null_noise(args.start, args.months * 30, args.seed),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset {other:?} (expected realistic, events, thursday, or null)"
            )))
        }
    };
    manifest.config(&config);

    let bundle = generate_bundle(&config)?;
    manifest.stage("generate");
    bundle.write_inputs(&args.out)?;
    for file in ["observations.csv", "weather.csv", "events.csv", "truth.json"] {
        manifest.output(&args.out.join(file));
    }
    let mut config_json = serde_json::to_string_pretty(&config)?;
    config_json.push('\n');
    write_text(&mut manifest, &args.out.join("synth_config.json"), &config_json)?;
    manifest.stage("write");
    manifest.write(&args.out)?;
    eprintln!(
        "synth: {} preset, {} hourly rows, seed {}",
        args.preset,
        bundle.dataset.n_rows(),
        args.seed
    );
    Ok(())
}
