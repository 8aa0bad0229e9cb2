//! Canonical hourly-series types: calendar decomposition, z-score
//! standardization, anomaly screening, proxy validation, and summary profiles.
//!
//! All timestamps are wall-clock hours in one fixed timezone per dataset; the
//! zone itself is metadata and never used for conversion.

use std::fmt;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar timestamp truncated to the hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HourStamp(NaiveDateTime);

impl HourStamp {
    /// Wraps a timestamp, rejecting non-zero minutes/seconds.
    pub fn new(dt: NaiveDateTime) -> Result<Self> {
        if dt.minute() != 0 || dt.second() != 0 || dt.nanosecond() != 0 {
            return Err(Error::NonHourStamp(dt.to_string()));
        }
        Ok(HourStamp(dt))
    }

    pub fn from_ymd_hour(year: i32, month: u32, day: u32, hour: u32) -> Self {
        let dt = NaiveDate::from_ymd_opt(year, month, day)
            .expect("valid calendar date")
            .and_hms_opt(hour, 0, 0)
            .expect("hour in 0..24");
        HourStamp(dt)
    }

    /// Parses `2019-05-16T11:00` or `2019-05-16T11:00:00`.
    pub fn parse(s: &str) -> Result<Self> {
        let dt = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M")
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
            .map_err(|e| Error::Parse {
                line: 0,
                message: format!("bad timestamp {s:?}: {e}"),
            })?;
        Self::new(dt).map_err(|_| Error::NonHourStamp(s.to_string()))
    }

    pub fn date(&self) -> NaiveDate {
        self.0.date()
    }

    pub fn hour(&self) -> u32 {
        self.0.hour()
    }

    pub fn succ(&self) -> HourStamp {
        HourStamp(self.0 + chrono::Duration::hours(1))
    }

    /// Whole hours from `self` to `other` (negative if `other` is earlier).
    pub fn hours_until(&self, other: HourStamp) -> i64 {
        (other.0 - self.0).num_hours()
    }

    pub fn inner(&self) -> NaiveDateTime {
        self.0
    }
}

impl fmt::Display for HourStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M"))
    }
}

/// A (year, month) grouping level; `2019-05` distinguishes May 2019 from May 2018.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthYear {
    pub year: i32,
    pub month: u32,
}

impl fmt::Display for MonthYear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Calendar decomposition of one hour: the grouping keys of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarKey {
    pub hour_of_day: u32,
    pub weekday: Weekday,
    pub date: NaiveDate,
    pub month_year: MonthYear,
}

/// Decomposes a stamp into its hour-of-day, weekday, date, and month-year.
pub fn calendar_key(stamp: HourStamp) -> CalendarKey {
    let date = stamp.date();
    CalendarKey {
        hour_of_day: stamp.hour(),
        weekday: date.weekday(),
        date,
        month_year: MonthYear {
            year: date.year(),
            month: date.month(),
        },
    }
}

/// One hour's activity value with its calendar decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyObservation {
    pub stamp: HourStamp,
    /// File size in bytes or row count; never negative.
    pub value: f64,
    pub key: CalendarKey,
    /// Optional row count carried along for proxy validation.
    pub row_count: Option<f64>,
}

impl HourlyObservation {
    pub fn new(stamp: HourStamp, value: f64) -> Self {
        HourlyObservation {
            stamp,
            value,
            key: calendar_key(stamp),
            row_count: None,
        }
    }
}

/// A z-scored series with the transform retained for inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedSeries {
    pub observations: Vec<(HourStamp, f64)>,
    /// Mean of the raw values.
    pub mean: f64,
    /// Population (divide-by-N) standard deviation of the raw values.
    pub sd: f64,
}

impl StandardizedSeries {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn z_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|(_, z)| *z)
    }

    /// Maps a z-score back to the raw scale.
    pub fn invert(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divide by N).
pub(crate) fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Z-scores the series with the population mean/sd of the whole series.
pub fn standardize(series: &[HourlyObservation]) -> Result<StandardizedSeries> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let values: Vec<f64> = series.iter().map(|o| o.value).collect();
    let m = mean(&values);
    let sd = population_variance(&values).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateSeries(
            "all observation values are equal".into(),
        ));
    }
    let observations = series
        .iter()
        .map(|o| (o.stamp, (o.value - m) / sd))
        .collect();
    Ok(StandardizedSeries {
        observations,
        mean: m,
        sd,
    })
}

/// Returns all observations with `|z| > k`, sorted by `|z|` descending,
/// ties broken by earlier stamp.
pub fn flag_anomalies(series: &StandardizedSeries, k: f64) -> Vec<(HourStamp, f64)> {
    let mut flagged: Vec<(HourStamp, f64)> = series
        .observations
        .iter()
        .filter(|(_, z)| z.abs() > k)
        .copied()
        .collect();
    flagged.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    flagged
}

/// Coefficient of determination of the least-squares line counts → sizes.
pub fn proxy_r2(sizes: &[f64], counts: &[f64]) -> Result<f64> {
    if sizes.len() != counts.len() || sizes.len() < 3 {
        return Err(Error::LengthMismatch(format!(
            "need equal lengths >= 3, got sizes={} counts={}",
            sizes.len(),
            counts.len()
        )));
    }
    let sxx = population_variance(counts);
    let syy = population_variance(sizes);
    if sxx == 0.0 {
        return Err(Error::DegenerateSeries("counts are constant".into()));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateSeries("sizes are constant".into()));
    }
    let mx = mean(counts);
    let my = mean(sizes);
    let sxy = counts
        .iter()
        .zip(sizes)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / counts.len() as f64;
    let r2 = (sxy * sxy) / (sxx * syy);
    // Rounding can push a perfect fit a hair above 1.
    Ok(r2.min(1.0))
}

/// Histogram of z-scores: 0.25-wide bins over [-4, 4) plus overflow bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZHistogram {
    pub bin_width: f64,
    pub lo: f64,
    pub hi: f64,
    pub underflow: u64,
    pub bins: Vec<u64>,
    pub overflow: u64,
}

impl ZHistogram {
    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.bins.iter().sum::<u64>()
    }
}

/// Mean z per hour-of-day, weekday, and weekday-hour slot, plus a z histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryProfiles {
    pub by_hour: Vec<f64>,
    pub hour_counts: Vec<u64>,
    pub by_weekday: Vec<f64>,
    pub weekday_counts: Vec<u64>,
    /// Index = weekday (Mon=0) * 24 + hour; NaN where a slot has no data.
    pub week_trajectory: Vec<f64>,
    pub slot_counts: Vec<u64>,
    pub histogram: ZHistogram,
}

const HIST_LO: f64 = -4.0;
const HIST_HI: f64 = 4.0;
const HIST_WIDTH: f64 = 0.25;

/// Average z by hour, weekday, and (weekday, hour), plus the z histogram.
/// Requires the series to span at least one full week.
pub fn summary_profiles(series: &StandardizedSeries) -> Result<SummaryProfiles> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let first = series.observations.first().unwrap().0;
    let last = series.observations.last().unwrap().0;
    let span_hours = first.hours_until(last) + 1;
    if span_hours < 168 {
        return Err(Error::InsufficientSpan {
            required: "1 week (168 hours)".into(),
            actual: format!("{span_hours} hours"),
        });
    }

    let mut hour_sum = vec![0.0; 24];
    let mut hour_n = vec![0u64; 24];
    let mut wd_sum = vec![0.0; 7];
    let mut wd_n = vec![0u64; 7];
    let mut slot_sum = vec![0.0; 168];
    let mut slot_n = vec![0u64; 168];
    let n_bins = ((HIST_HI - HIST_LO) / HIST_WIDTH).round() as usize;
    let mut hist = ZHistogram {
        bin_width: HIST_WIDTH,
        lo: HIST_LO,
        hi: HIST_HI,
        underflow: 0,
        bins: vec![0; n_bins],
        overflow: 0,
    };

    for &(stamp, z) in &series.observations {
        let key = calendar_key(stamp);
        let h = key.hour_of_day as usize;
        let w = key.weekday.num_days_from_monday() as usize;
        hour_sum[h] += z;
        hour_n[h] += 1;
        wd_sum[w] += z;
        wd_n[w] += 1;
        slot_sum[w * 24 + h] += z;
        slot_n[w * 24 + h] += 1;
        if z < HIST_LO {
            hist.underflow += 1;
        } else if z >= HIST_HI {
            hist.overflow += 1;
        } else {
            let b = (((z - HIST_LO) / HIST_WIDTH) as usize).min(n_bins - 1);
            hist.bins[b] += 1;
        }
    }

    let avg = |sum: &[f64], n: &[u64]| {
        sum.iter()
            .zip(n)
            .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
            .collect::<Vec<f64>>()
    };

    Ok(SummaryProfiles {
        by_hour: avg(&hour_sum, &hour_n),
        hour_counts: hour_n,
        by_weekday: avg(&wd_sum, &wd_n),
        weekday_counts: wd_n,
        week_trajectory: avg(&slot_sum, &slot_n),
        slot_counts: slot_n,
        histogram: hist,
    })
}

/// Mon..Sun as a stable index (Mon = 0).
pub fn weekday_index(w: Weekday) -> usize {
    w.num_days_from_monday() as usize
}

pub const WEEKDAY_NAMES: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

pub fn weekday_from_index(i: usize) -> Weekday {
    match i {
        0 => Weekday::Mon,
        1 => Weekday::Tue,
        2 => Weekday::Wed,
        3 => Weekday::Thu,
        4 => Weekday::Fri,
        5 => Weekday::Sat,
        _ => Weekday::Sun,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(values: &[f64]) -> Vec<HourlyObservation> {
        let start = HourStamp::from_ymd_hour(2019, 5, 16, 0);
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut s = start;
                for _ in 0..i {
                    s = s.succ();
                }
                HourlyObservation::new(s, v)
            })
            .collect()
    }

    #[test]
    fn calendar_key_decomposes() {
        let k = calendar_key(HourStamp::from_ymd_hour(2019, 5, 16, 11));
        assert_eq!(k.hour_of_day, 11);
        assert_eq!(k.weekday, Weekday::Thu);
        assert_eq!(k.date, NaiveDate::from_ymd_opt(2019, 5, 16).unwrap());
        assert_eq!(k.month_year.to_string(), "2019-05");

        let k = calendar_key(HourStamp::from_ymd_hour(2019, 1, 1, 0));
        assert_eq!(k.hour_of_day, 0);
        assert_eq!(k.weekday, Weekday::Tue);
        assert_eq!(k.month_year.to_string(), "2019-01");

        let k = calendar_key(HourStamp::from_ymd_hour(2019, 12, 31, 23));
        assert_eq!(k.hour_of_day, 23);
        assert_eq!(k.weekday, Weekday::Tue);
        assert_eq!(k.month_year.to_string(), "2019-12");
    }

    #[test]
    fn hourstamp_rejects_sub_hour() {
        assert!(HourStamp::parse("2019-05-16T11:30").is_err());
        assert!(HourStamp::parse("2019-05-16T11:00").is_ok());
        assert!(HourStamp::parse("2019-05-16T11:00:00").is_ok());
        assert!(HourStamp::parse("2019-05-16T11:00:05").is_err());
    }

    #[test]
    fn standardize_symmetric_case() {
        let s = standardize(&obs(&[2.0, 4.0, 6.0])).unwrap();
        let z: Vec<f64> = s.z_values().collect();
        assert!((z[0] + 1.224744871391589).abs() < 1e-12);
        assert!(z[1].abs() < 1e-12);
        assert!((z[2] - 1.224744871391589).abs() < 1e-12);
        assert_eq!(s.mean, 4.0);
    }

    #[test]
    fn standardize_two_point() {
        let s = standardize(&obs(&[0.0, 10.0])).unwrap();
        let z: Vec<f64> = s.z_values().collect();
        assert_eq!(z, vec![-1.0, 1.0]);
    }

    #[test]
    fn standardize_degenerate_and_empty() {
        assert!(matches!(
            standardize(&obs(&[5.0, 5.0, 5.0])),
            Err(Error::DegenerateSeries(_))
        ));
        assert!(matches!(standardize(&[]), Err(Error::EmptySeries)));
    }

    #[test]
    fn standardize_mean_zero_sd_one() {
        let s = standardize(&obs(&[1.0, 7.0, 3.0, 9.0, 2.0])).unwrap();
        let z: Vec<f64> = s.z_values().collect();
        assert!(mean(&z).abs() < 1e-10);
        assert!((population_variance(&z).sqrt() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn standardize_idempotent_and_invertible() {
        let raw = obs(&[10.0, 22.0, 5.0, 18.0, 30.0, 13.0]);
        let s = standardize(&raw).unwrap();
        let as_obs: Vec<HourlyObservation> = s
            .observations
            .iter()
            .map(|&(st, z)| HourlyObservation::new(st, z))
            .collect();
        let s2 = standardize(&as_obs).unwrap();
        for (a, b) in s.observations.iter().zip(&s2.observations) {
            assert!((a.1 - b.1).abs() < 1e-12);
        }
        for (o, (_, z)) in raw.iter().zip(&s.observations) {
            assert!((s.invert(*z) - o.value).abs() / o.value.abs().max(1.0) < 1e-9);
        }
    }

    #[test]
    fn anomalies_basic() {
        let s = standardize(&obs(&[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0])).unwrap();
        assert!(flag_anomalies(&s, 2.0).is_empty());

        // One huge outlier dominates the z-scale.
        let mut vals = vec![1.0; 40];
        vals[7] = 100.0;
        let s = standardize(&obs(&vals)).unwrap();
        let flagged = flag_anomalies(&s, 2.0);
        assert_eq!(flagged.len(), 1);
        assert!(flagged[0].1 > 2.0);
    }

    #[test]
    fn anomalies_threshold_below_data() {
        let s = standardize(&obs(&[0.0, 5.0, 10.0])).unwrap();
        // z = [-sqrt(3/2), 0, sqrt(3/2)]
        let flagged = flag_anomalies(&s, 0.5);
        assert_eq!(flagged.len(), 2);
        // Sorted by |z| desc, earlier stamp first on ties.
        assert!(flagged[0].0 < flagged[1].0);
    }

    #[test]
    fn anomalies_monotone_in_k() {
        let s = standardize(&obs(&[0.0, 3.0, -5.0, 8.0, 1.0, -2.0, 4.0, 0.5])).unwrap();
        let loose = flag_anomalies(&s, 0.3);
        let tight = flag_anomalies(&s, 1.0);
        for item in &tight {
            assert!(loose.contains(item));
        }
    }

    #[test]
    fn proxy_r2_perfect_line() {
        let counts: Vec<f64> = (0..50).map(|i| 100.0 + 3.0 * i as f64).collect();
        let sizes: Vec<f64> = counts.iter().map(|c| 3.0 * c + 7.0).collect();
        let r2 = proxy_r2(&sizes, &counts).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn proxy_r2_errors() {
        assert!(matches!(
            proxy_r2(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(_))
        ));
        assert!(matches!(
            proxy_r2(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(_))
        ));
        assert!(matches!(
            proxy_r2(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn proxy_r2_affine_invariance() {
        let counts: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 50.0 + 200.0).collect();
        let sizes: Vec<f64> = counts
            .iter()
            .enumerate()
            .map(|(i, c)| 2.0 * c + 5.0 + ((i * 7919) % 13) as f64)
            .collect();
        let base = proxy_r2(&sizes, &counts).unwrap();
        let scaled_sizes: Vec<f64> = sizes.iter().map(|s| -4.0 * s + 100.0).collect();
        let scaled_counts: Vec<f64> = counts.iter().map(|c| 0.5 * c - 3.0).collect();
        let scaled = proxy_r2(&scaled_sizes, &scaled_counts).unwrap();
        assert!((base - scaled).abs() < 1e-12);
    }

    fn week_of_hourly<F: Fn(&CalendarKey) -> f64>(days: usize, f: F) -> Vec<HourlyObservation> {
        let start = HourStamp::from_ymd_hour(2019, 4, 1, 0);
        let mut out = Vec::new();
        let mut s = start;
        for _ in 0..days * 24 {
            let key = calendar_key(s);
            out.push(HourlyObservation::new(s, f(&key)));
            s = s.succ();
        }
        out
    }

    #[test]
    fn profiles_hour_signal() {
        // Value depends only on hour-of-day.
        let raw = week_of_hourly(14, |k| 10.0 + (k.hour_of_day as f64 - 11.5).abs());
        let s = standardize(&raw).unwrap();
        let p = summary_profiles(&s).unwrap();
        // Per-hour profile reproduces the standardized signal.
        for h in 0..24 {
            let expect = (10.0 + (h as f64 - 11.5).abs() - s.mean) / s.sd;
            assert!((p.by_hour[h] - expect).abs() < 1e-10);
        }
        // Per-weekday profile is flat at zero.
        for w in 0..7 {
            assert!(p.by_weekday[w].abs() < 1e-10);
        }
    }

    #[test]
    fn profiles_weekday_signal() {
        let raw = week_of_hourly(14, |k| 5.0 + weekday_index(k.weekday) as f64);
        let s = standardize(&raw).unwrap();
        let p = summary_profiles(&s).unwrap();
        for w in 0..7 {
            let expect = (5.0 + w as f64 - s.mean) / s.sd;
            assert!((p.by_weekday[w] - expect).abs() < 1e-10);
        }
        for h in 0..24 {
            assert!(p.by_hour[h].abs() < 1e-10);
        }
    }

    #[test]
    fn profiles_histogram_counts_everything() {
        let raw = week_of_hourly(10, |k| {
            ((k.hour_of_day * 37 + weekday_index(k.weekday) as u32 * 13) % 29) as f64
        });
        let s = standardize(&raw).unwrap();
        let p = summary_profiles(&s).unwrap();
        assert_eq!(p.histogram.total(), 240);
    }

    #[test]
    fn profiles_weighted_hour_mean_is_zero() {
        let raw = week_of_hourly(9, |k| {
            (k.hour_of_day as f64 * 1.7).sin() * 40.0 + weekday_index(k.weekday) as f64 * 3.0 + 100.0
        });
        let s = standardize(&raw).unwrap();
        let p = summary_profiles(&s).unwrap();
        let total: f64 = p
            .by_hour
            .iter()
            .zip(&p.hour_counts)
            .map(|(m, &c)| m * c as f64)
            .sum();
        let n: u64 = p.hour_counts.iter().sum();
        assert!((total / n as f64).abs() < 1e-9);
    }

    #[test]
    fn profiles_need_a_week() {
        let raw = week_of_hourly(6, |k| k.hour_of_day as f64);
        let s = standardize(&raw).unwrap();
        assert!(matches!(
            summary_profiles(&s),
            Err(Error::InsufficientSpan { .. })
        ));
    }
}
