//! Lagged autocorrelation and the four correlogram presets.
//!
//! The estimator keeps the truncated numerator over a full-length denominator:
//! r_h = sum_{t=1..N-h} (Y_t - mean)(Y_{t+h} - mean) / sum_{t=1..N} (Y_t - mean)^2.
//! That form bounds every r_h by 1 in magnitude.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{mean, population_variance, HourlyObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagUnit {
    Hour,
    Day,
}

/// Autocorrelation values on a lag grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfSeries {
    pub lag_unit: LagUnit,
    pub lag_step: usize,
    pub lags: Vec<usize>,
    pub r: Vec<f64>,
}

/// The four correlogram configurations of the hourly/daily analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelogramPreset {
    /// Hour lags, step 1, horizon one day.
    HourlyWithinDay,
    /// Hour lags, step 24, horizon about two thirds of a month.
    HourlyDayStep,
    /// Day lags, step 1, horizon about a month.
    DailyWithinMonth,
    /// Day lags, step 7, horizon about seven months.
    DailyWeekStep,
}

pub const HOURLY_DAY_STEP_HORIZON: usize = 480;
pub const DAILY_WEEK_STEP_HORIZON: usize = 210;

impl CorrelogramPreset {
    pub fn all() -> [CorrelogramPreset; 4] {
        [
            CorrelogramPreset::HourlyWithinDay,
            CorrelogramPreset::HourlyDayStep,
            CorrelogramPreset::DailyWithinMonth,
            CorrelogramPreset::DailyWeekStep,
        ]
    }

    /// (unit, step, default horizon) for this preset.
    pub fn params(&self) -> (LagUnit, usize, usize) {
        match self {
            CorrelogramPreset::HourlyWithinDay => (LagUnit::Hour, 1, 24),
            CorrelogramPreset::HourlyDayStep => (LagUnit::Hour, 24, HOURLY_DAY_STEP_HORIZON),
            CorrelogramPreset::DailyWithinMonth => (LagUnit::Day, 1, 30),
            CorrelogramPreset::DailyWeekStep => (LagUnit::Day, 7, DAILY_WEEK_STEP_HORIZON),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorrelogramPreset::HourlyWithinDay => "hourly_within_day",
            CorrelogramPreset::HourlyDayStep => "hourly_day_step",
            CorrelogramPreset::DailyWithinMonth => "daily_within_month",
            CorrelogramPreset::DailyWeekStep => "daily_week_step",
        }
    }
}

/// Autocorrelation at a single lag; `r_0` is exactly 1.
pub fn acf_at_lag(z: &[f64], h: usize) -> Result<f64> {
    let n = z.len();
    if h >= n {
        return Err(Error::LagOutOfRange { lag: h, len: n });
    }
    let m = mean(z);
    let denom: f64 = z.iter().map(|v| (v - m) * (v - m)).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateSeries("autocorrelation of a constant series".into()));
    }
    if h == 0 {
        return Ok(1.0);
    }
    let num: f64 = z[..n - h]
        .iter()
        .zip(&z[h..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    Ok(num / denom)
}

/// r at lags step, 2*step, ... up to `max_lag` inclusive.
pub fn correlogram(z: &[f64], lag_unit: LagUnit, lag_step: usize, max_lag: usize) -> Result<AcfSeries> {
    if lag_step == 0 {
        return Err(Error::InvalidConfig("lag_step must be >= 1".into()));
    }
    if max_lag >= z.len() {
        return Err(Error::LagOutOfRange {
            lag: max_lag,
            len: z.len(),
        });
    }
    let lags: Vec<usize> = (1..)
        .map(|k| k * lag_step)
        .take_while(|&lag| lag <= max_lag)
        .collect();
    let mut r = Vec::with_capacity(lags.len());
    for &lag in &lags {
        r.push(acf_at_lag(z, lag)?);
    }
    Ok(AcfSeries {
        lag_unit,
        lag_step,
        lags,
        r,
    })
}

/// Runs a preset, shrinking the horizon to fit short series.
pub fn correlogram_preset(z: &[f64], preset: CorrelogramPreset, horizon_override: Option<usize>) -> Result<AcfSeries> {
    let (unit, step, default_horizon) = preset.params();
    let horizon = horizon_override.unwrap_or(default_horizon).min(z.len().saturating_sub(1));
    correlogram(z, unit, step, horizon)
}

/// A day-level series: daily totals standardized over days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub dates: Vec<NaiveDate>,
    pub z: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Partial days at the series edges, excluded from the totals.
    pub trimmed: Vec<NaiveDate>,
}

/// Sums each complete day's 24 hourly values and standardizes over days.
/// Partial days are excluded and reported in `trimmed`.
pub fn aggregate_daily(obs: &[HourlyObservation]) -> Result<DailySeries> {
    let mut per_day: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for o in obs {
        let e = per_day.entry(o.key.date).or_insert((0.0, 0));
        e.0 += o.value;
        e.1 += 1;
    }
    let mut dates = Vec::new();
    let mut totals = Vec::new();
    let mut trimmed = Vec::new();
    for (date, (total, hours)) in per_day {
        if hours == 24 {
            dates.push(date);
            totals.push(total);
        } else {
            trimmed.push(date);
        }
    }
    if dates.len() < 2 {
        return Err(Error::InsufficientDays {
            required: 2,
            actual: dates.len(),
        });
    }
    let m = mean(&totals);
    let sd = population_variance(&totals).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateSeries("daily totals are constant".into()));
    }
    let z = totals.iter().map(|t| (t - m) / sd).collect();
    Ok(DailySeries {
        dates,
        z,
        mean: m,
        sd,
        trimmed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::HourStamp;

    #[test]
    fn r0_is_one_exactly() {
        let z = [0.3, -1.2, 0.8, 2.0, -0.5];
        assert_eq!(acf_at_lag(&z, 0).unwrap(), 1.0);
    }

    #[test]
    fn hand_evaluated_alternating_series() {
        let z = [1.0, -1.0, 1.0, -1.0];
        assert!((acf_at_lag(&z, 1).unwrap() + 0.75).abs() < 1e-15);
        assert!((acf_at_lag(&z, 2).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            acf_at_lag(&[1.0, 2.0], 2),
            Err(Error::LagOutOfRange { .. })
        ));
        assert!(matches!(
            acf_at_lag(&[3.0, 3.0, 3.0], 1),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn pure_diurnal_sinusoid_peaks_at_24() {
        // The truncated-numerator estimator tapers a perfectly periodic
        // series to exactly (N - h) / N at its period.
        let n = 24 * 40;
        let z: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin())
            .collect();
        let acf = correlogram_preset(&z, CorrelogramPreset::HourlyWithinDay, None).unwrap();
        assert_eq!(*acf.lags.last().unwrap(), 24);
        let expected = (n as f64 - 24.0) / n as f64;
        assert!((acf.r.last().unwrap() - expected).abs() < 1e-9);
        // And the period is where the correlogram peaks.
        let max = acf.r.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(*acf.r.last().unwrap(), max);
    }

    #[test]
    fn bounded_by_one() {
        let z: Vec<f64> = (0..500)
            .map(|t| ((t * 2654435761u64 as usize) % 97) as f64 - 48.0)
            .collect();
        let acf = correlogram(&z, LagUnit::Hour, 1, 400).unwrap();
        for &r in &acf.r {
            assert!(r.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn lag_grid_is_step_multiples() {
        let z: Vec<f64> = (0..100).map(|t| (t as f64 * 0.7).sin()).collect();
        let acf = correlogram(&z, LagUnit::Day, 7, 35).unwrap();
        assert_eq!(acf.lags, vec![7, 14, 21, 28, 35]);
    }

    fn hourly(days: usize, f: impl Fn(usize) -> f64) -> Vec<HourlyObservation> {
        let mut s = HourStamp::from_ymd_hour(2019, 3, 4, 0);
        let mut out = Vec::new();
        for t in 0..days * 24 {
            out.push(HourlyObservation::new(s, f(t)));
            s = s.succ();
        }
        out
    }

    #[test]
    fn aggregate_daily_constant_totals_degenerate() {
        let obs = hourly(3, |_| 1.0);
        assert!(matches!(
            aggregate_daily(&obs),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn aggregate_daily_two_point() {
        // Day totals 10 and 30.
        let obs = hourly(2, |t| if t < 24 { 10.0 / 24.0 } else { 30.0 / 24.0 });
        let d = aggregate_daily(&obs).unwrap();
        assert_eq!(d.z.len(), 2);
        assert!((d.z[0] + 1.0).abs() < 1e-12);
        assert!((d.z[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_daily_trims_partial_edges() {
        let mut obs = hourly(3, |t| (t % 24) as f64 + (t / 24) as f64 * 5.0);
        // Drop the last 5 hours: final day becomes partial.
        obs.truncate(obs.len() - 5);
        let d = aggregate_daily(&obs).unwrap();
        assert_eq!(d.dates.len(), 2);
        assert_eq!(d.trimmed.len(), 1);
    }

    #[test]
    fn shift_scale_invariance() {
        let z: Vec<f64> = (0..200).map(|t| (t as f64 * 0.31).sin() + (t as f64 * 0.05).cos()).collect();
        let moved: Vec<f64> = z.iter().map(|v| 3.5 * v + 11.0).collect();
        for h in [1usize, 5, 24, 60] {
            let a = acf_at_lag(&z, h).unwrap();
            let b = acf_at_lag(&moved, h).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
