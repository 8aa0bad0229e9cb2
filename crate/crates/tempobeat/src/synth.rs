//! Seeded generator of hourly activity datasets with known ground truth:
//! configured variance components, event and weather effects, optional
//! periodic mean structure, and per-weekday/per-hour noise multipliers.
//!
//! Group intercepts are drawn normal and then centered and rescaled so their
//! realized population variance equals the configured component exactly;
//! with only 24 hour groups (or a handful of months) the raw sampling error
//! would otherwise swamp share-recovery checks. The realized, normalized
//! effects are what `GroundTruth` reports.
//!
//! PRNG: ChaCha12 (`rand_chacha` 0.3), seeded from the config's 64-bit seed.
//! Draw order is fixed: month effects, date effects, hour effects, per-station
//! weather noise, residuals. The proxy generator uses a separate stream.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    assemble_dataset, engineer_covariates, AnalysisDataset, EventCategory, EventRow, EventSpan,
    RunConfig, StationSeries,
};
use crate::series::{calendar_key, weekday_index, HourStamp, HourlyObservation, MonthYear};

pub const RNG_ALGORITHM: &str = "ChaCha12 (rand_chacha 0.3)";

/// Deterministic annual cycle added to the mean, for periodicity tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualCycle {
    pub amplitude: f64,
    pub period_days: f64,
    pub phase: f64,
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub start: NaiveDate,
    /// Inclusive end date.
    pub end: NaiveDate,
    pub intercept: f64,
    pub sigma2_hour: f64,
    pub sigma2_day: f64,
    pub sigma2_month_year: f64,
    pub sigma2_resid: f64,
    pub events: Vec<EventRow>,
    /// Event effect sizes in linear-predictor units, per category.
    pub event_effects: BTreeMap<EventCategory, f64>,
    /// Hour-of-day modulation of event effects (mean should be 1); flat when None.
    pub event_hour_shape: Option<Vec<f64>>,
    /// Effects keyed by engineered weather column name.
    pub weather_effects: BTreeMap<String, f64>,
    pub weekday_noise_multipliers: [f64; 7],
    pub hour_noise_multipliers: [f64; 24],
    /// Deterministic weekday mean shifts, for weekly-periodicity tests.
    pub weekday_effects: [f64; 7],
    pub annual_cycle: Option<AnnualCycle>,
    pub stations: Vec<String>,
    /// Raw observation value = raw_base + raw_scale * linear predictor.
    pub raw_base: f64,
    pub raw_scale: f64,
    /// Proxy pair: counts = count_base + count_scale * z; sizes = a * counts + b.
    pub proxy_slope: f64,
    pub proxy_intercept: f64,
    pub count_base: f64,
    pub count_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2018, 2, 25).unwrap(),
            intercept: 0.0,
            sigma2_hour: 0.0,
            sigma2_day: 0.0,
            sigma2_month_year: 0.0,
            sigma2_resid: 1.0,
            events: Vec::new(),
            event_effects: BTreeMap::new(),
            event_hour_shape: None,
            weather_effects: BTreeMap::new(),
            weekday_noise_multipliers: [1.0; 7],
            hour_noise_multipliers: [1.0; 24],
            weekday_effects: [0.0; 7],
            annual_cycle: None,
            stations: vec!["malmo".into(), "stockholm".into()],
            raw_base: 1.0e6,
            raw_scale: 1.0e5,
            proxy_slope: 3.0,
            proxy_intercept: 7.0,
            count_base: 10_000.0,
            count_scale: 2_000.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// A realistic component mix for hourly human-activity volumes:
    /// strongly diurnal (hour 0.8357) with modest day (0.0433), seasonal
    /// month-year (0.0782), and residual (0.0390) variation.
    pub fn realistic(start: NaiveDate, months: u32, seed: u64) -> Self {
        SynthConfig {
            start,
            end: add_months(start, months).pred_opt().unwrap(),
            sigma2_hour: 0.8357,
            sigma2_day: 0.0433,
            sigma2_month_year: 0.0782,
            sigma2_resid: 0.0390,
            seed,
            ..SynthConfig::default()
        }
    }

    /// Pure residual noise, no structure.
    pub fn null_noise(start: NaiveDate, days: u32, seed: u64) -> Self {
        SynthConfig {
            start,
            end: start + chrono::Duration::days(days as i64 - 1),
            sigma2_resid: 1.0,
            seed,
            ..SynthConfig::default()
        }
    }

    /// Adds a recurring event calendar with realistic effect sizes
    /// (religious -0.1616, secular -0.1220, sports +0.0316, tv +0.0349,
    /// weather & transport +0.0032), all scaled by `effect_scale`.
    pub fn with_standard_events(mut self, effect_scale: f64) -> Self {
        self.events = standard_event_calendar(self.start, self.end);
        self.event_effects = BTreeMap::from([
            (EventCategory::SecularHoliday, -0.1220 * effect_scale),
            (EventCategory::ReligiousHoliday, -0.1616 * effect_scale),
            (EventCategory::Sports, 0.0316 * effect_scale),
            (EventCategory::TvMedia, 0.0349 * effect_scale),
            (EventCategory::WeatherTransport, 0.0032 * effect_scale),
        ]);
        self
    }

    /// A day-time bump with mean exactly one, for partially-captured event
    /// effects: dummies absorb the average, the within-day profile remains.
    pub fn diurnal_event_shape() -> Vec<f64> {
        let mut shape: Vec<f64> = (0..24)
            .map(|h| {
                let x = (h as f64 - 14.0) / 5.0;
                0.3 + 1.7 * (-0.5 * x * x).exp()
            })
            .collect();
        let mean = shape.iter().sum::<f64>() / 24.0;
        for v in &mut shape {
            *v /= mean;
        }
        shape
    }

    pub fn n_hours(&self) -> usize {
        ((self.end - self.start).num_days() as usize + 1) * 24
    }

    pub fn validate(&self) -> Result<()> {
        let days = (self.end - self.start).num_days() + 1;
        if days < 28 {
            return Err(Error::InvalidConfig(format!(
                "span must cover at least 28 days, got {days}"
            )));
        }
        for (name, v) in [
            ("sigma2_hour", self.sigma2_hour),
            ("sigma2_day", self.sigma2_day),
            ("sigma2_month_year", self.sigma2_month_year),
            ("sigma2_resid", self.sigma2_resid),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        let total = self.sigma2_hour + self.sigma2_day + self.sigma2_month_year + self.sigma2_resid;
        if total <= 0.0 {
            return Err(Error::InvalidConfig("all variance components are zero".into()));
        }
        if self
            .weekday_noise_multipliers
            .iter()
            .chain(&self.hour_noise_multipliers)
            .any(|&m| !m.is_finite() || m <= 0.0)
        {
            return Err(Error::InvalidConfig("noise multipliers must be positive".into()));
        }
        if let Some(shape) = &self.event_hour_shape {
            if shape.len() != 24 {
                return Err(Error::InvalidConfig("event_hour_shape needs 24 entries".into()));
            }
        }
        if self.stations.is_empty() {
            return Err(Error::InvalidConfig("at least one station required".into()));
        }
        if !self.raw_scale.is_finite() || self.raw_scale <= 0.0 {
            return Err(Error::InvalidConfig("raw_scale must be positive".into()));
        }
        Ok(())
    }

    /// Configured component shares (scale-invariant).
    pub fn shares(&self) -> [f64; 4] {
        let total = self.sigma2_hour + self.sigma2_day + self.sigma2_month_year + self.sigma2_resid;
        [
            self.sigma2_hour / total,
            self.sigma2_day / total,
            self.sigma2_month_year / total,
            self.sigma2_resid / total,
        ]
    }
}

fn add_months(start: NaiveDate, months: u32) -> NaiveDate {
    let zero = start.year() * 12 + start.month0() as i32 + months as i32;
    NaiveDate::from_ymd_opt(zero.div_euclid(12), zero.rem_euclid(12) as u32 + 1, 1).unwrap()
}

/// A fixed recurring calendar: yearly holidays, biweekly Saturday sports
/// evenings, biweekly Friday TV evenings, and two transport disruptions a
/// year. Dense enough that a six-month window carries about a dozen
/// religious and half a dozen secular days.
pub fn standard_event_calendar(start: NaiveDate, end: NaiveDate) -> Vec<EventRow> {
    let mut events = Vec::new();
    for year in start.year()..=end.year() {
        let all_day = |m: u32, d: u32, category: EventCategory| {
            NaiveDate::from_ymd_opt(year, m, d).map(|date| EventRow {
                category,
                span: EventSpan::AllDay(date),
            })
        };
        let secular = [
            (1u32, 1u32),
            (2, 23),
            (3, 8),
            (4, 30),
            (5, 1),
            (6, 6),
            (6, 22),
            (10, 24),
            (12, 31),
        ];
        let religious = [
            (1u32, 6u32),
            (1, 13),
            (2, 2),
            (2, 16),
            (3, 7),
            (3, 25),
            (4, 19),
            (4, 21),
            (5, 9),
            (5, 30),
            (6, 9),
            (6, 24),
            (8, 15),
            (10, 4),
            (11, 1),
            (12, 25),
            (12, 26),
        ];
        for (m, d) in secular {
            events.extend(all_day(m, d, EventCategory::SecularHoliday));
        }
        for (m, d) in religious {
            events.extend(all_day(m, d, EventCategory::ReligiousHoliday));
        }
        for (m, d) in [(2u32, 15u32), (11, 20)] {
            events.extend(all_day(m, d, EventCategory::WeatherTransport));
        }
    }
    // Hour-span events on alternating weekends.
    let mut date = start;
    while date <= end {
        let w = weekday_index(date.weekday());
        let week = (date - start).num_days() / 7;
        if w == 5 && week % 2 == 0 {
            events.push(EventRow {
                category: EventCategory::Sports,
                span: EventSpan::Hours {
                    start: HourStamp::new(date.and_hms_opt(19, 0, 0).unwrap()).unwrap(),
                    end: HourStamp::new(date.and_hms_opt(23, 0, 0).unwrap()).unwrap(),
                },
            });
        }
        if w == 4 && week % 2 == 1 {
            events.push(EventRow {
                category: EventCategory::TvMedia,
                span: EventSpan::Hours {
                    start: HourStamp::new(date.and_hms_opt(20, 0, 0).unwrap()).unwrap(),
                    end: HourStamp::new(date.and_hms_opt(22, 0, 0).unwrap()).unwrap(),
                },
            });
        }
        date = date.succ_opt().unwrap();
    }
    events.retain(|e| match &e.span {
        EventSpan::AllDay(d) => *d >= start && *d <= end,
        EventSpan::Hours { start: s, .. } => s.date() >= start && s.date() <= end,
    });
    events
}

/// Everything the generator knows that an analyst normally would not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rng_algorithm: String,
    pub seed: u64,
    /// Raw value = raw_base + raw_scale * linear predictor.
    pub raw_base: f64,
    pub raw_scale: f64,
    /// Realized mean/sd of the linear predictor; z = (lin - mean)/sd.
    pub lin_mean: f64,
    pub lin_sd: f64,
    /// Configured components rescaled to z units.
    pub sigma2_z: [f64; 4],
    /// Configured shares (scale invariant).
    pub shares: [f64; 4],
    /// Realized, variance-normalized group effects in z units.
    pub hour_effects: BTreeMap<String, f64>,
    pub date_effects: BTreeMap<String, f64>,
    pub month_year_effects: BTreeMap<String, f64>,
    /// Event and weather effects in z units, keyed by covariate column.
    pub effects_z: BTreeMap<String, f64>,
    /// Realized residual of each row in z units; z - residual is the true
    /// conditional prediction.
    pub residuals_z: Vec<f64>,
    pub weekday_noise_multipliers: [f64; 7],
    pub hour_noise_multipliers: [f64; 24],
}

impl GroundTruth {
    /// True conditional predictions in z units (fixed part plus realized
    /// group effects), i.e. the observed z minus its realized residual.
    pub fn true_conditional_z(&self, dataset: &AnalysisDataset) -> Vec<f64> {
        dataset
            .z()
            .iter()
            .zip(&self.residuals_z)
            .map(|(z, e)| z - e)
            .collect()
    }
}

/// A generated dataset together with the raw inputs it came from.
pub struct SyntheticBundle {
    pub dataset: AnalysisDataset,
    pub truth: GroundTruth,
    pub weather: Vec<StationSeries>,
    pub events: Vec<EventRow>,
}

/// Draws i.i.d. normal effects and rescales them to zero mean and exactly
/// the configured population variance.
fn normalized_effects(rng: &mut ChaCha12Rng, n: usize, sigma2: f64) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    if sigma2 == 0.0 || n < 2 {
        return vec![0.0; n];
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return vec![0.0; n];
    }
    let scale = (sigma2 / var).sqrt();
    draws.iter().map(|d| (d - mean) * scale).collect()
}

fn synth_weather(
    rng: &mut ChaCha12Rng,
    station_idx: usize,
    grid: &[HourStamp],
) -> (Vec<f64>, Vec<f64>) {
    let phase = station_idx as f64 * 0.9;
    let level = 8.0 - 1.5 * station_idx as f64;
    let mut temp = Vec::with_capacity(grid.len());
    let mut precip = Vec::with_capacity(grid.len());
    for &stamp in grid {
        let doy = stamp.date().ordinal0() as f64;
        let hour = stamp.hour() as f64;
        let seasonal = 9.0 * (2.0 * std::f64::consts::PI * (doy - 110.0) / 365.25).sin();
        let diurnal = 4.0 * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin();
        let noise: f64 = StandardNormal.sample(rng);
        temp.push(level + seasonal + diurnal + 1.5 * noise);

        let wet_season = 0.9 * (2.0 * std::f64::consts::PI * doy / 365.25 + phase).sin();
        let p_noise: f64 = StandardNormal.sample(rng);
        precip.push((wet_season + p_noise - 1.1).max(0.0));
    }
    (temp, precip)
}

/// Generates a dataset with known ground truth, then assembles it through the
/// same ingestion path real CSV inputs take.
pub fn generate_bundle(config: &SynthConfig) -> Result<SyntheticBundle> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let start_stamp = HourStamp::new(config.start.and_hms_opt(0, 0, 0).unwrap()).unwrap();
    let n = config.n_hours();
    let mut grid = Vec::with_capacity(n);
    let mut stamp = start_stamp;
    for _ in 0..n {
        grid.push(stamp);
        stamp = stamp.succ();
    }
    let keys: Vec<_> = grid.iter().map(|&s| calendar_key(s)).collect();

    // Group label sets in chronological order.
    let mut months: Vec<MonthYear> = Vec::new();
    let mut dates: Vec<NaiveDate> = Vec::new();
    for key in &keys {
        if months.last() != Some(&key.month_year) {
            months.push(key.month_year);
        }
        if dates.last() != Some(&key.date) {
            dates.push(key.date);
        }
    }

    // Fixed draw order: months, dates, hours, weather, residuals.
    let my_effects = normalized_effects(&mut rng, months.len(), config.sigma2_month_year);
    let date_effects = normalized_effects(&mut rng, dates.len(), config.sigma2_day);
    let hour_effects = normalized_effects(&mut rng, 24, config.sigma2_hour);

    let mut weather = Vec::with_capacity(config.stations.len());
    for (i, station) in config.stations.iter().enumerate() {
        let (temp, precip) = synth_weather(&mut rng, i, &grid);
        weather.push(StationSeries {
            station: station.clone(),
            start: start_stamp,
            air_temp_c: temp,
            precip_mm: precip,
            filled: vec![],
        });
    }

    let covariates = engineer_covariates(&weather, &config.events, &grid)?;
    for name in config.weather_effects.keys() {
        if covariates.column(name).is_none() {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let my_index: BTreeMap<MonthYear, usize> =
        months.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let date_index: BTreeMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();

    let resid_sd = config.sigma2_resid.sqrt();
    let mut lin = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for (i, key) in keys.iter().enumerate() {
        let h = key.hour_of_day as usize;
        let w = weekday_index(key.weekday);
        let mut mu = config.intercept
            + hour_effects[h]
            + date_effects[date_index[&key.date]]
            + my_effects[my_index[&key.month_year]]
            + config.weekday_effects[w];
        if let Some(cycle) = &config.annual_cycle {
            let day_idx = (key.date - config.start).num_days() as f64;
            mu += cycle.amplitude
                * (2.0 * std::f64::consts::PI * day_idx / cycle.period_days + cycle.phase).cos();
        }
        for (cat, effect) in &config.event_effects {
            if covariates.event_columns[cat.index()][i] != 0.0 {
                let shape = config
                    .event_hour_shape
                    .as_ref()
                    .map_or(1.0, |s| s[h]);
                mu += effect * shape;
            }
        }
        for (name, effect) in &config.weather_effects {
            mu += effect * covariates.column(name).unwrap()[i];
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        let e = noise * resid_sd * config.weekday_noise_multipliers[w] * config.hour_noise_multipliers[h];
        residuals.push(e);
        lin.push(mu + e);
    }

    let lin_mean = crate::series::mean(&lin);
    let lin_sd = crate::series::population_variance(&lin).sqrt();
    if lin_sd == 0.0 {
        return Err(Error::InvalidConfig("generated series is constant".into()));
    }

    let obs: Vec<HourlyObservation> = grid
        .iter()
        .zip(&lin)
        .map(|(&s, &v)| {
            let raw = config.raw_base + config.raw_scale * v;
            HourlyObservation::new(s, raw)
        })
        .collect();
    if let Some(bad) = obs.iter().find(|o| o.value < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "raw value went negative at {}; raise raw_base",
            bad.stamp
        )));
    }

    let run_config = RunConfig {
        stations: config.stations.clone(),
        ..RunConfig::default()
    };
    let dataset = assemble_dataset(&obs, &weather, &config.events, &run_config)?;

    let mut effects_z: BTreeMap<String, f64> = BTreeMap::new();
    for (cat, effect) in &config.event_effects {
        effects_z.insert(cat.name().to_string(), effect / lin_sd);
    }
    for (name, effect) in &config.weather_effects {
        effects_z.insert(name.clone(), effect / lin_sd);
    }

    let scale2 = lin_sd * lin_sd;
    let truth = GroundTruth {
        rng_algorithm: RNG_ALGORITHM.to_string(),
        seed: config.seed,
        raw_base: config.raw_base,
        raw_scale: config.raw_scale,
        lin_mean,
        lin_sd,
        sigma2_z: [
            config.sigma2_hour / scale2,
            config.sigma2_day / scale2,
            config.sigma2_month_year / scale2,
            config.sigma2_resid / scale2,
        ],
        shares: config.shares(),
        hour_effects: (0..24)
            .map(|h| (format!("{h:02}"), hour_effects[h] / lin_sd))
            .collect(),
        date_effects: dates
            .iter()
            .zip(&date_effects)
            .map(|(d, &e)| (d.to_string(), e / lin_sd))
            .collect(),
        month_year_effects: months
            .iter()
            .zip(&my_effects)
            .map(|(m, &e)| (m.to_string(), e / lin_sd))
            .collect(),
        effects_z,
        residuals_z: residuals.iter().map(|e| e / lin_sd).collect(),
        weekday_noise_multipliers: config.weekday_noise_multipliers,
        hour_noise_multipliers: config.hour_noise_multipliers,
    };

    Ok(SyntheticBundle {
        dataset,
        truth,
        weather,
        events: config.events.clone(),
    })
}

/// The spec'd entry point: dataset plus ground truth.
pub fn generate_series(config: &SynthConfig) -> Result<(AnalysisDataset, GroundTruth)> {
    let bundle = generate_bundle(config)?;
    Ok((bundle.dataset, bundle.truth))
}

/// Generates a (sizes, counts) pair: counts follow the activity level,
/// sizes are an exact affine map of counts perturbed by relative noise.
pub fn generate_proxy_pair(config: &SynthConfig, noise_rel: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !noise_rel.is_finite() || noise_rel < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise_rel must be a finite non-negative number, got {noise_rel}"
        )));
    }
    let (dataset, _) = generate_series(config)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ 0x70726f7879); // "proxy"
    let mut counts = Vec::with_capacity(dataset.n_rows());
    let mut sizes = Vec::with_capacity(dataset.n_rows());
    for z in dataset.z() {
        let count = config.count_base + config.count_scale * z;
        let exact = config.proxy_slope * count + config.proxy_intercept;
        let noise: f64 = StandardNormal.sample(&mut rng);
        counts.push(count);
        sizes.push(exact * (1.0 + noise_rel * noise));
    }
    Ok((sizes, counts))
}

// ---------------------------------------------------------------------------
// CSV emission: the same formats ingest reads, plus truth.json.
// ---------------------------------------------------------------------------

impl SyntheticBundle {
    /// Writes observations.csv, weather.csv, events.csv, and truth.json.
    pub fn write_inputs(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;

        let mut obs = String::from("timestamp,size_bytes\n");
        for (stamp, value) in self.dataset.grid.iter().zip(&self.dataset.values) {
            obs.push_str(&format!("{stamp},{value}\n"));
        }
        std::fs::write(dir.join("observations.csv"), obs)?;

        let mut weather = String::from("timestamp,station,air_temp_c,precip_mm\n");
        for station in &self.weather {
            let mut stamp = station.start;
            for i in 0..station.air_temp_c.len() {
                weather.push_str(&format!(
                    "{stamp},{},{},{}\n",
                    station.station, station.air_temp_c[i], station.precip_mm[i]
                ));
                stamp = stamp.succ();
            }
        }
        std::fs::write(dir.join("weather.csv"), weather)?;

        let mut events = String::from("start,end,category,all_day\n");
        for event in &self.events {
            match &event.span {
                EventSpan::AllDay(date) => {
                    events.push_str(&format!("{date},,{},true\n", event.category));
                }
                EventSpan::Hours { start, end } => {
                    events.push_str(&format!("{start},{end},{},false\n", event.category));
                }
            }
        }
        std::fs::write(dir.join("events.csv"), events)?;

        let mut truth = serde_json::to_string_pretty(&self.truth)?;
        truth.push('\n');
        std::fs::write(dir.join("truth.json"), truth)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::population_variance;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, 1, 1).unwrap()
    }

    #[test]
    fn pure_noise_variance_near_one() {
        let config = SynthConfig::null_noise(start(), 240, 7); // 5760 rows
        let (_, truth) = generate_series(&config).unwrap();
        assert!((truth.lin_sd * truth.lin_sd - 1.0).abs() < 0.05);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let config = SynthConfig::realistic(start(), 2, 42);
        let (a, ta) = generate_series(&config).unwrap();
        let (b, tb) = generate_series(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&ta).unwrap(),
            serde_json::to_string(&tb).unwrap()
        );
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_series(&SynthConfig::realistic(start(), 2, 1)).unwrap().0;
        let b = generate_series(&SynthConfig::realistic(start(), 2, 2)).unwrap().0;
        assert_ne!(a.values, b.values);
    }

    #[test]
    fn realistic_realized_shares_match_configuration() {
        let config = SynthConfig::realistic(start(), 17, 3);
        let (dataset, truth) = generate_series(&config).unwrap();
        assert_eq!(dataset.n_rows(), config.n_hours());

        // Realized grouped variances: the intercepts are normalized, the
        // residual keeps its sampling noise.
        let var_of = |m: &BTreeMap<String, f64>| {
            let vals: Vec<f64> = m.values().copied().collect();
            population_variance(&vals)
        };
        let realized = [
            var_of(&truth.hour_effects),
            var_of(&truth.date_effects),
            var_of(&truth.month_year_effects),
            population_variance(&truth.residuals_z),
        ];
        let total: f64 = realized.iter().sum();
        for (r, s) in realized.iter().zip(truth.shares) {
            assert!((r / total - s).abs() < 0.03, "{} vs {}", r / total, s);
        }
    }

    #[test]
    fn realized_intercept_variance_is_exact() {
        let config = SynthConfig::realistic(start(), 6, 11);
        let (_, truth) = generate_series(&config).unwrap();
        let hour: Vec<f64> = truth.hour_effects.values().copied().collect();
        assert!((population_variance(&hour) - truth.sigma2_z[0]).abs() < 1e-12);
        let dates: Vec<f64> = truth.date_effects.values().copied().collect();
        assert!((population_variance(&dates) - truth.sigma2_z[1]).abs() < 1e-12);
    }

    #[test]
    fn event_dummies_match_calendar_coverage() {
        let config = SynthConfig::realistic(start(), 3, 5).with_standard_events(1.0);
        let bundle = generate_bundle(&config).unwrap();
        let ds = &bundle.dataset;
        for (c, cat) in crate::ingest::EVENT_CATEGORIES.iter().enumerate() {
            let dummy_hours: f64 = ds.covariates.event_columns[c].iter().sum();
            let mut covered = 0usize;
            for &stamp in &ds.grid {
                if bundle
                    .events
                    .iter()
                    .any(|e| e.category == *cat && e.covers(stamp))
                {
                    covered += 1;
                }
            }
            assert_eq!(dummy_hours as usize, covered, "category {cat}");
        }
    }

    #[test]
    fn true_conditional_prediction_removes_residual() {
        let config = SynthConfig::realistic(start(), 2, 13);
        let (dataset, truth) = generate_series(&config).unwrap();
        let pred = truth.true_conditional_z(&dataset);
        let z = dataset.z();
        // The prediction differs from z exactly by the residual.
        for i in 0..z.len() {
            assert!((z[i] - pred[i] - truth.residuals_z[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn proxy_pair_exact_and_noisy() {
        let config = SynthConfig::realistic(start(), 2, 21);
        let (sizes, counts) = generate_proxy_pair(&config, 0.0).unwrap();
        let r2 = crate::series::proxy_r2(&sizes, &counts).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12);

        let (sizes, counts) = generate_proxy_pair(&config, 0.01).unwrap();
        assert!(crate::series::proxy_r2(&sizes, &counts).unwrap() >= 0.99);

        let (sizes, counts) = generate_proxy_pair(&config, 10.0).unwrap();
        assert!(crate::series::proxy_r2(&sizes, &counts).unwrap() < 0.5);
    }

    #[test]
    fn short_span_rejected() {
        let mut config = SynthConfig::default();
        config.end = config.start + chrono::Duration::days(20);
        assert!(matches!(
            generate_series(&config),
            Err(Error::InvalidConfig(_))
        ));
    }
}
