//! CSV ingestion: observations, weather, and events; covariate engineering;
//! assembly of the hourly analysis dataset; the canonical dataset bundle.
//!
//! File formats (UTF-8, LF, decimal points):
//! - observations.csv: `timestamp,size_bytes[,row_count]`
//! - weather.csv:      `timestamp,station,air_temp_c,precip_mm`
//! - events.csv:       `start,end,category,all_day`

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{calendar_key, standardize, CalendarKey, HourStamp, HourlyObservation, StandardizedSeries};

/// Hours of consecutive missing weather that may be linearly interpolated.
pub const DEFAULT_WEATHER_MAX_GAP_HOURS: usize = 3;

/// What to do with holes in the observation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GapPolicy {
    /// A missing hour is itself an anomaly worth surfacing.
    #[default]
    Error,
    Zero,
    Interpolate,
}

impl FromStr for GapPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(GapPolicy::Error),
            "zero" => Ok(GapPolicy::Zero),
            "interpolate" => Ok(GapPolicy::Interpolate),
            other => Err(Error::InvalidConfig(format!("unknown gap policy {other:?}"))),
        }
    }
}

/// Run configuration, read from a small TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Informational: the single wall-clock zone all stamps live in.
    pub timezone: String,
    pub stations: Vec<String>,
    pub fill_gaps: GapPolicy,
    pub weather_max_gap_hours: usize,
    pub anomaly_k: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            timezone: "Europe/Stockholm".into(),
            stations: vec!["malmo".into(), "stockholm".into()],
            fill_gaps: GapPolicy::Error,
            weather_max_gap_hours: DEFAULT_WEATHER_MAX_GAP_HOURS,
            anomaly_k: 2.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if cfg.stations.is_empty() {
            return Err(Error::InvalidConfig("station list is empty".into()));
        }
        if cfg.anomaly_k <= 0.0 {
            return Err(Error::InvalidConfig("anomaly_k must be positive".into()));
        }
        Ok(cfg)
    }
}

/// The five event categories of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCategory {
    SecularHoliday,
    ReligiousHoliday,
    Sports,
    TvMedia,
    WeatherTransport,
}

pub const EVENT_CATEGORIES: [EventCategory; 5] = [
    EventCategory::SecularHoliday,
    EventCategory::ReligiousHoliday,
    EventCategory::Sports,
    EventCategory::TvMedia,
    EventCategory::WeatherTransport,
];

impl EventCategory {
    pub fn name(&self) -> &'static str {
        match self {
            EventCategory::SecularHoliday => "secular_holiday",
            EventCategory::ReligiousHoliday => "religious_holiday",
            EventCategory::Sports => "sports",
            EventCategory::TvMedia => "tv_media",
            EventCategory::WeatherTransport => "weather_transport",
        }
    }

    pub fn index(&self) -> usize {
        EVENT_CATEGORIES.iter().position(|c| c == self).unwrap()
    }
}

impl FromStr for EventCategory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EVENT_CATEGORIES
            .iter()
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

impl fmt::Display for EventCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One calendar event: a whole day or a half-open hour span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRow {
    pub category: EventCategory,
    pub span: EventSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSpan {
    AllDay(chrono::NaiveDate),
    /// Hours in `[start, end)`.
    Hours { start: HourStamp, end: HourStamp },
}

impl EventRow {
    pub fn covers(&self, stamp: HourStamp) -> bool {
        match &self.span {
            EventSpan::AllDay(date) => stamp.date() == *date,
            EventSpan::Hours { start, end } => stamp >= *start && stamp < *end,
        }
    }
}

/// An hourly weather series for one station with small gaps interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSeries {
    pub station: String,
    pub start: HourStamp,
    pub air_temp_c: Vec<f64>,
    pub precip_mm: Vec<f64>,
    /// Hours whose values were linearly interpolated.
    pub filled: Vec<HourStamp>,
}

impl StationSeries {
    pub fn end(&self) -> HourStamp {
        let mut s = self.start;
        for _ in 1..self.air_temp_c.len() {
            s = s.succ();
        }
        s
    }

    fn index_of(&self, stamp: HourStamp) -> Option<usize> {
        let offset = self.start.hours_until(stamp);
        if offset < 0 || offset as usize >= self.air_temp_c.len() {
            None
        } else {
            Some(offset as usize)
        }
    }
}

/// Per-hour fixed-effect predictors: five event dummies plus eight engineered
/// weather columns per station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTable {
    pub event_names: Vec<String>,
    /// Column-major; values are exactly 0.0 or 1.0.
    pub event_columns: Vec<Vec<f64>>,
    pub weather_names: Vec<String>,
    pub weather_columns: Vec<Vec<f64>>,
}

impl CovariateTable {
    pub fn n_rows(&self) -> usize {
        self.event_columns.first().map_or(0, Vec::len)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.event_names
            .iter()
            .map(String::as_str)
            .chain(self.weather_names.iter().map(String::as_str))
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        if let Some(i) = self.event_names.iter().position(|n| n == name) {
            return Some(&self.event_columns[i]);
        }
        self.weather_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.weather_columns[i].as_slice())
    }

    /// True if any event dummy is 1 at this row.
    pub fn any_event(&self, row: usize) -> bool {
        self.event_columns.iter().any(|c| c[row] != 0.0)
    }
}

/// The eight engineered weather metrics, in column order per station.
const WEATHER_METRICS: [&str; 8] = [
    "air_temp",
    "air_temp_sq",
    "precip",
    "precip_sq",
    "d_air_temp",
    "d_air_temp_sq",
    "d_precip",
    "d_precip_sq",
];

pub fn weather_column_names(stations: &[String]) -> Vec<String> {
    let mut names = Vec::with_capacity(stations.len() * 8);
    for station in stations {
        for metric in WEATHER_METRICS {
            names.push(format!("{metric}_{station}"));
        }
    }
    names
}

/// A value filled during ingestion, for the fill report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilledValue {
    pub source: String,
    pub stamp: HourStamp,
    pub value: f64,
}

/// The assembled, immutable analysis dataset: one row per grid hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDataset {
    pub grid: Vec<HourStamp>,
    /// Raw observation values on the grid.
    pub values: Vec<f64>,
    pub y: StandardizedSeries,
    pub keys: Vec<CalendarKey>,
    pub covariates: CovariateTable,
    pub timezone: String,
    pub stations: Vec<String>,
    pub fill_report: Vec<FilledValue>,
}

impl AnalysisDataset {
    pub fn n_rows(&self) -> usize {
        self.grid.len()
    }

    pub fn z(&self) -> Vec<f64> {
        self.y.z_values().collect()
    }

    /// Rows falling on dates where any event dummy is set at any hour.
    pub fn event_day_rows(&self) -> Vec<bool> {
        let mut event_dates: std::collections::BTreeSet<chrono::NaiveDate> =
            std::collections::BTreeSet::new();
        for (row, key) in self.keys.iter().enumerate() {
            if self.covariates.any_event(row) {
                event_dates.insert(key.date);
            }
        }
        self.keys
            .iter()
            .map(|k| event_dates.contains(&k.date))
            .collect()
    }

    pub fn observations(&self) -> Vec<HourlyObservation> {
        self.grid
            .iter()
            .zip(&self.values)
            .map(|(&s, &v)| HourlyObservation::new(s, v))
            .collect()
    }
}

fn read_error(e: &csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, line: u64, what: &str) -> Result<&'r str> {
    record.get(idx).map(str::trim).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what} column"),
    })
}

fn parse_f64(s: &str, line: u64, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} value {s:?} (decimal point notation required)"),
    })
}

fn parse_stamp_at(s: &str, line: u64) -> Result<HourStamp> {
    match HourStamp::parse(s) {
        Ok(st) => Ok(st),
        Err(Error::NonHourStamp(t)) => Err(Error::NonHourStamp(t)),
        Err(_) => Err(Error::Parse {
            line,
            message: format!("bad timestamp {s:?}"),
        }),
    }
}

/// Parses `timestamp,size_bytes[,row_count]`, sorted by stamp on return.
pub fn parse_observations<R: Read>(source: R) -> Result<Vec<HourlyObservation>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers().map_err(|e| read_error(&e))?.clone();
    if headers.len() < 2
        || headers.get(0).map(str::trim) != Some("timestamp")
        || headers.get(1).map(str::trim) != Some("size_bytes")
    {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `timestamp,size_bytes[,row_count]`, got {headers:?}"),
        });
    }
    let has_counts = headers.len() >= 3 && headers.get(2).map(str::trim) == Some("row_count");

    let mut out: Vec<HourlyObservation> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| read_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let stamp = parse_stamp_at(field(&record, 0, line, "timestamp")?, line)?;
        let value = parse_f64(field(&record, 1, line, "size_bytes")?, line, "size_bytes")?;
        if value < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("negative size_bytes {value}"),
            });
        }
        let row_count = if has_counts {
            match record.get(2).map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(parse_f64(s, line, "row_count")?),
            }
        } else {
            None
        };
        out.push(HourlyObservation {
            stamp,
            value,
            key: calendar_key(stamp),
            row_count,
        });
    }
    out.sort_by_key(|o| o.stamp);
    for pair in out.windows(2) {
        if pair[0].stamp == pair[1].stamp {
            return Err(Error::DuplicateStamp(pair[0].stamp));
        }
    }
    Ok(out)
}

/// Parses `timestamp,station,air_temp_c,precip_mm` into one aligned hourly
/// series per configured station. Gaps up to `max_gap_hours` are filled by
/// linear interpolation and flagged.
pub fn parse_weather<R: Read>(
    source: R,
    stations: &[String],
    max_gap_hours: usize,
) -> Result<Vec<StationSeries>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader.headers().map_err(|e| read_error(&e))?.clone();
    let expected = ["timestamp", "station", "air_temp_c", "precip_mm"];
    let ok = headers.len() == 4
        && headers
            .iter()
            .map(str::trim)
            .zip(expected)
            .all(|(a, b)| a == b);
    if !ok {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `timestamp,station,air_temp_c,precip_mm`, got {headers:?}"),
        });
    }

    let mut rows: BTreeMap<String, Vec<(HourStamp, f64, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| read_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let stamp = parse_stamp_at(field(&record, 0, line, "timestamp")?, line)?;
        let station = field(&record, 1, line, "station")?.to_string();
        if !stations.contains(&station) {
            return Err(Error::UnknownStation(station));
        }
        let temp = parse_f64(field(&record, 2, line, "air_temp_c")?, line, "air_temp_c")?;
        let precip = parse_f64(field(&record, 3, line, "precip_mm")?, line, "precip_mm")?;
        if !(-60.0..=60.0).contains(&temp) {
            return Err(Error::Parse {
                line,
                message: format!("air_temp_c {temp} outside sanity bound [-60, 60]"),
            });
        }
        if precip < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("negative precip_mm {precip}"),
            });
        }
        rows.entry(station).or_default().push((stamp, temp, precip));
    }

    let mut out = Vec::with_capacity(stations.len());
    for station in stations {
        let mut series = rows
            .remove(station)
            .ok_or_else(|| Error::MissingStation(station.clone()))?;
        series.sort_by_key(|r| r.0);
        for pair in series.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateStamp(pair[0].0));
            }
        }
        let start = series[0].0;
        let mut temp = Vec::new();
        let mut precip = Vec::new();
        let mut filled = Vec::new();
        temp.push(series[0].1);
        precip.push(series[0].2);
        let mut cursor = start;
        for w in series.windows(2) {
            let (prev, next) = (&w[0], &w[1]);
            let gap = prev.0.hours_until(next.0) as usize - 1;
            if gap > max_gap_hours {
                return Err(Error::GapTooLarge {
                    station: station.clone(),
                    start: prev.0.succ(),
                    gap_hours: gap,
                    max_hours: max_gap_hours,
                });
            }
            for step in 1..=gap {
                let frac = step as f64 / (gap + 1) as f64;
                cursor = cursor.succ();
                temp.push(prev.1 + frac * (next.1 - prev.1));
                precip.push(prev.2 + frac * (next.2 - prev.2));
                filled.push(cursor);
            }
            cursor = cursor.succ();
            temp.push(next.1);
            precip.push(next.2);
        }
        out.push(StationSeries {
            station: station.clone(),
            start,
            air_temp_c: temp,
            precip_mm: precip,
            filled,
        });
    }
    Ok(out)
}

/// Parses `start,end,category,all_day`. All-day rows carry a bare date and an
/// empty end; span rows carry hour stamps with `end > start`.
pub fn parse_events<R: Read>(source: R) -> Result<Vec<EventRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader.headers().map_err(|e| read_error(&e))?.clone();
    let expected = ["start", "end", "category", "all_day"];
    let ok = headers.len() == 4
        && headers
            .iter()
            .map(str::trim)
            .zip(expected)
            .all(|(a, b)| a == b);
    if !ok {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `start,end,category,all_day`, got {headers:?}"),
        });
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| read_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let start = field(&record, 0, line, "start")?;
        let end = field(&record, 1, line, "end")?;
        let category: EventCategory = field(&record, 2, line, "category")?.parse()?;
        let all_day = match field(&record, 3, line, "all_day")? {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("all_day must be true or false, got {other:?}"),
                })
            }
        };
        let span = if all_day {
            if !end.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "all-day events take a bare date and an empty end".into(),
                });
            }
            let date = chrono::NaiveDate::parse_from_str(start, "%Y-%m-%d").map_err(|_| {
                Error::Parse {
                    line,
                    message: format!("bad all-day date {start:?}"),
                }
            })?;
            EventSpan::AllDay(date)
        } else {
            let s = parse_stamp_at(start, line)?;
            let e = parse_stamp_at(end, line)?;
            if e <= s {
                return Err(Error::InvertedSpan {
                    start: start.to_string(),
                    end: end.to_string(),
                });
            }
            EventSpan::Hours { start: s, end: e }
        };
        out.push(EventRow { category, span });
    }
    Ok(out)
}

/// Builds the full covariate table on the grid: per station the raw metrics,
/// squares, first differences (zero at the grid start), and squared
/// differences; plus one 0/1 dummy column per event category.
pub fn engineer_covariates(
    weather: &[StationSeries],
    events: &[EventRow],
    grid: &[HourStamp],
) -> Result<CovariateTable> {
    if grid.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = grid.len();

    let mut weather_names = Vec::new();
    let mut weather_columns = Vec::new();
    for station in weather {
        let first = station.index_of(grid[0]).ok_or_else(|| Error::CoverageGap {
            station: station.station.clone(),
            detail: format!("series starts {} after grid start {}", station.start, grid[0]),
        })?;
        let last_stamp = *grid.last().unwrap();
        if station.index_of(last_stamp).is_none() {
            return Err(Error::CoverageGap {
                station: station.station.clone(),
                detail: format!("series ends {} before grid end {}", station.end(), last_stamp),
            });
        }
        let temp = &station.air_temp_c[first..first + n];
        let precip = &station.precip_mm[first..first + n];

        let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<f64>>();
        let diff = |v: &[f64]| {
            let mut d = Vec::with_capacity(v.len());
            d.push(0.0);
            for i in 1..v.len() {
                d.push(v[i] - v[i - 1]);
            }
            d
        };
        let d_temp = diff(temp);
        let d_precip = diff(precip);

        let columns = [
            temp.to_vec(),
            sq(temp),
            precip.to_vec(),
            sq(precip),
            d_temp.clone(),
            sq(&d_temp),
            d_precip.clone(),
            sq(&d_precip),
        ];
        for (metric, col) in WEATHER_METRICS.iter().zip(columns) {
            weather_names.push(format!("{metric}_{}", station.station));
            weather_columns.push(col);
        }
    }

    let event_names: Vec<String> = EVENT_CATEGORIES.iter().map(|c| c.name().into()).collect();
    let mut event_columns = vec![vec![0.0; n]; EVENT_CATEGORIES.len()];
    for event in events {
        let col = &mut event_columns[event.category.index()];
        for (i, &stamp) in grid.iter().enumerate() {
            if event.covers(stamp) {
                col[i] = 1.0;
            }
        }
    }

    Ok(CovariateTable {
        event_names,
        event_columns,
        weather_names,
        weather_columns,
    })
}

/// Joins observations, weather, and events into the immutable analysis
/// dataset. Observation gaps follow `config.fill_gaps`.
pub fn assemble_dataset(
    obs: &[HourlyObservation],
    weather: &[StationSeries],
    events: &[EventRow],
    config: &RunConfig,
) -> Result<AnalysisDataset> {
    if obs.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut fill_report = Vec::new();
    let mut grid = Vec::with_capacity(obs.len());
    let mut values = Vec::with_capacity(obs.len());
    grid.push(obs[0].stamp);
    values.push(obs[0].value);
    for w in obs.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let gap = prev.stamp.hours_until(next.stamp) as usize - 1;
        if gap > 0 {
            match config.fill_gaps {
                GapPolicy::Error => return Err(Error::ObservationGap(prev.stamp.succ())),
                GapPolicy::Zero => {
                    let mut cur = prev.stamp;
                    for _ in 0..gap {
                        cur = cur.succ();
                        grid.push(cur);
                        values.push(0.0);
                        fill_report.push(FilledValue {
                            source: "observations".into(),
                            stamp: cur,
                            value: 0.0,
                        });
                    }
                }
                GapPolicy::Interpolate => {
                    let mut cur = prev.stamp;
                    for step in 1..=gap {
                        let frac = step as f64 / (gap + 1) as f64;
                        let v = prev.value + frac * (next.value - prev.value);
                        cur = cur.succ();
                        grid.push(cur);
                        values.push(v);
                        fill_report.push(FilledValue {
                            source: "observations".into(),
                            stamp: cur,
                            value: v,
                        });
                    }
                }
            }
        }
        grid.push(next.stamp);
        values.push(next.value);
    }

    for station in weather {
        for &stamp in &station.filled {
            let idx = station.index_of(stamp).unwrap();
            fill_report.push(FilledValue {
                source: format!("weather:{}:air_temp_c", station.station),
                stamp,
                value: station.air_temp_c[idx],
            });
        }
    }

    let grid_obs: Vec<HourlyObservation> = grid
        .iter()
        .zip(&values)
        .map(|(&s, &v)| HourlyObservation::new(s, v))
        .collect();
    let y = standardize(&grid_obs)?;
    let keys: Vec<CalendarKey> = grid.iter().map(|&s| calendar_key(s)).collect();
    let covariates = engineer_covariates(weather, events, &grid)?;

    Ok(AnalysisDataset {
        grid,
        values,
        y,
        keys,
        covariates,
        timezone: config.timezone.clone(),
        stations: config.stations.clone(),
        fill_report,
    })
}

// ---------------------------------------------------------------------------
// Canonical dataset bundle: dataset.csv + dataset_meta.json
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    format_version: u32,
    timezone: String,
    stations: Vec<String>,
    mean: f64,
    sd: f64,
    n_rows: usize,
    event_columns: Vec<String>,
    weather_columns: Vec<String>,
    fill_report: Vec<FilledValue>,
}

pub const BUNDLE_CSV: &str = "dataset.csv";
pub const BUNDLE_META: &str = "dataset_meta.json";

/// Serializes the dataset to `dataset.csv` + `dataset_meta.json` in `dir`.
/// Floats use shortest round-trip notation, so re-ingestion is bit-exact.
pub fn write_bundle(dataset: &AnalysisDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = BundleMeta {
        format_version: 1,
        timezone: dataset.timezone.clone(),
        stations: dataset.stations.clone(),
        mean: dataset.y.mean,
        sd: dataset.y.sd,
        n_rows: dataset.n_rows(),
        event_columns: dataset.covariates.event_names.clone(),
        weather_columns: dataset.covariates.weather_names.clone(),
        fill_report: dataset.fill_report.clone(),
    };
    let mut meta_json = serde_json::to_string_pretty(&meta)?;
    meta_json.push('\n');
    std::fs::write(dir.join(BUNDLE_META), meta_json)?;

    let mut text = String::new();
    text.push_str("timestamp,value,z");
    for name in dataset.covariates.column_names() {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for (i, (&stamp, &value)) in dataset.grid.iter().zip(&dataset.values).enumerate() {
        let z = dataset.y.observations[i].1;
        text.push_str(&format!("{stamp},{value},{z}"));
        for col in dataset
            .covariates
            .event_columns
            .iter()
            .chain(&dataset.covariates.weather_columns)
        {
            text.push_str(&format!(",{}", col[i]));
        }
        text.push('\n');
    }
    std::fs::write(dir.join(BUNDLE_CSV), text)?;
    Ok(())
}

/// Reads a bundle back, re-validating grid contiguity, the z transform, and
/// squared-column consistency.
pub fn read_bundle(dir: &Path) -> Result<AnalysisDataset> {
    let meta_text = std::fs::read_to_string(dir.join(BUNDLE_META))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text)?;

    let file = std::fs::File::open(dir.join(BUNDLE_CSV))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(file);
    let headers = reader.headers().map_err(|e| read_error(&e))?.clone();
    let expected_cols = 3 + meta.event_columns.len() + meta.weather_columns.len();
    if headers.len() != expected_cols {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "bundle column count {} does not match metadata ({expected_cols})",
                headers.len()
            ),
        });
    }

    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut zs = Vec::new();
    let mut event_columns = vec![Vec::new(); meta.event_columns.len()];
    let mut weather_columns = vec![Vec::new(); meta.weather_columns.len()];
    for record in reader.records() {
        let record = record.map_err(|e| read_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let stamp = parse_stamp_at(field(&record, 0, line, "timestamp")?, line)?;
        grid.push(stamp);
        values.push(parse_f64(field(&record, 1, line, "value")?, line, "value")?);
        zs.push(parse_f64(field(&record, 2, line, "z")?, line, "z")?);
        for (c, col) in event_columns.iter_mut().enumerate() {
            let v = parse_f64(field(&record, 3 + c, line, "event dummy")?, line, "event dummy")?;
            if v != 0.0 && v != 1.0 {
                return Err(Error::Parse {
                    line,
                    message: format!("event dummy must be 0 or 1, got {v}"),
                });
            }
            col.push(v);
        }
        let base = 3 + event_columns.len();
        for (c, col) in weather_columns.iter_mut().enumerate() {
            col.push(parse_f64(
                field(&record, base + c, line, "weather column")?,
                line,
                "weather column",
            )?);
        }
    }

    if grid.is_empty() {
        return Err(Error::EmptySeries);
    }
    for w in grid.windows(2) {
        let gap = w[0].hours_until(w[1]);
        if gap != 1 {
            return Err(if gap > 1 {
                Error::ObservationGap(w[0].succ())
            } else {
                Error::DuplicateStamp(w[1])
            });
        }
    }

    // Squared-column consistency is checked, not trusted from input.
    if meta.weather_columns.len() % 8 != 0 {
        return Err(Error::InvalidConfig(
            "weather columns are not grouped in eights".into(),
        ));
    }
    for chunk_start in (0..weather_columns.len()).step_by(8) {
        // Layout per station: temp, temp^2, precip, precip^2, d, d^2, dp, dp^2.
        for (base, sq) in [(0usize, 1usize), (2, 3), (4, 5), (6, 7)] {
            let b = &weather_columns[chunk_start + base];
            let s = &weather_columns[chunk_start + sq];
            for (row, (&bv, &sv)) in b.iter().zip(s).enumerate() {
                if sv != bv * bv {
                    return Err(Error::Parse {
                        line: row as u64 + 2,
                        message: format!(
                            "column {} is not the square of its base column",
                            meta.weather_columns[chunk_start + sq]
                        ),
                    });
                }
            }
        }
    }

    // z must match the recorded transform.
    for (i, (&v, &z)) in values.iter().zip(&zs).enumerate() {
        let expect = (v - meta.mean) / meta.sd;
        if (z - expect).abs() > 1e-9 {
            return Err(Error::Parse {
                line: i as u64 + 2,
                message: format!("z {z} does not match (value - mean)/sd = {expect}"),
            });
        }
    }

    let keys: Vec<CalendarKey> = grid.iter().map(|&s| calendar_key(s)).collect();
    let observations: Vec<(HourStamp, f64)> = grid.iter().copied().zip(zs).collect();
    Ok(AnalysisDataset {
        keys,
        values,
        y: StandardizedSeries {
            observations,
            mean: meta.mean,
            sd: meta.sd,
        },
        covariates: CovariateTable {
            event_names: meta.event_columns,
            event_columns,
            weather_names: meta.weather_columns,
            weather_columns,
        },
        grid,
        timezone: meta.timezone,
        stations: meta.stations,
        fill_report: meta.fill_report,
    })
}
