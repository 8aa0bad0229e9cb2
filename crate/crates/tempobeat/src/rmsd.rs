//! Root-mean-square deviation between observed and predicted series,
//! decomposed by weekday, hour, and weekday-hour slot, plus the
//! representative-slot recommendation.
//!
//! Day-level weekday figures first average observed and predicted within each
//! calendar date, then deviate daily means; hour-level figures use raw hourly
//! rows.

use std::collections::BTreeMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{weekday_index, CalendarKey, WEEKDAY_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Weekday,
    Hour,
    WeekdayHour,
}

/// One populated cell of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub weekday: Option<usize>,
    pub hour: Option<usize>,
    pub rmsd: f64,
    pub count: usize,
}

/// Per-cell RMSD over one axis. `overall` and `n` refer to this axis's
/// aggregation level (days for the weekday axis, hourly rows otherwise), so
/// sum(count * rmsd^2) = n * overall^2 holds per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDecomposition {
    pub axis: Axis,
    pub cells: Vec<Cell>,
    pub overall: f64,
    pub n: usize,
}

impl AxisDecomposition {
    pub fn cell(&self, weekday: Option<usize>, hour: Option<usize>) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.weekday == weekday && c.hour == hour)
    }
}

/// The three decompositions for one model's predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsdReport {
    pub model: String,
    /// Raw hourly RMSD over all rows.
    pub overall: f64,
    pub n: usize,
    pub by_weekday: AxisDecomposition,
    pub by_hour: AxisDecomposition,
    pub by_weekday_hour: AxisDecomposition,
}

/// sqrt(sum (obs - pred)^2 / n).
pub fn rmsd(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::EmptySeries);
    }
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch(format!(
            "observed={} predicted={}",
            observed.len(),
            predicted.len()
        )));
    }
    let ss: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p) * (o - p))
        .sum();
    Ok((ss / observed.len() as f64).sqrt())
}

fn cells_from_groups<K: Ord + Copy>(
    groups: BTreeMap<K, (f64, usize)>,
    to_cell: impl Fn(K, f64, usize) -> Cell,
) -> Vec<Cell> {
    groups
        .into_iter()
        .map(|(k, (ss, count))| to_cell(k, (ss / count as f64).sqrt(), count))
        .collect()
}

/// Per-cell RMSD along one axis. Cells with no rows are absent, not zero.
pub fn decompose(
    observed: &[f64],
    predicted: &[f64],
    keys: &[CalendarKey],
    axis: Axis,
) -> Result<AxisDecomposition> {
    if observed.is_empty() {
        return Err(Error::EmptySeries);
    }
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch(format!(
            "observed={} predicted={}",
            observed.len(),
            predicted.len()
        )));
    }
    if keys.len() != observed.len() {
        return Err(Error::MissingKeys);
    }

    match axis {
        Axis::Weekday => {
            // Daily means first, then deviations over days grouped by weekday.
            let mut per_date: BTreeMap<chrono::NaiveDate, (f64, f64, usize)> = BTreeMap::new();
            for i in 0..observed.len() {
                let e = per_date.entry(keys[i].date).or_insert((0.0, 0.0, 0));
                e.0 += observed[i];
                e.1 += predicted[i];
                e.2 += 1;
            }
            let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            let mut total_ss = 0.0;
            let n_days = per_date.len();
            for (date, (so, sp, c)) in per_date {
                let d = so / c as f64 - sp / c as f64;
                let w = weekday_index(date.weekday());
                let e = groups.entry(w).or_insert((0.0, 0));
                e.0 += d * d;
                e.1 += 1;
                total_ss += d * d;
            }
            Ok(AxisDecomposition {
                axis,
                cells: cells_from_groups(groups, |w, rmsd, count| Cell {
                    weekday: Some(w),
                    hour: None,
                    rmsd,
                    count,
                }),
                overall: (total_ss / n_days as f64).sqrt(),
                n: n_days,
            })
        }
        Axis::Hour => {
            let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            let mut total_ss = 0.0;
            for i in 0..observed.len() {
                let d = observed[i] - predicted[i];
                let e = groups.entry(keys[i].hour_of_day as usize).or_insert((0.0, 0));
                e.0 += d * d;
                e.1 += 1;
                total_ss += d * d;
            }
            Ok(AxisDecomposition {
                axis,
                cells: cells_from_groups(groups, |h, rmsd, count| Cell {
                    weekday: None,
                    hour: Some(h),
                    rmsd,
                    count,
                }),
                overall: (total_ss / observed.len() as f64).sqrt(),
                n: observed.len(),
            })
        }
        Axis::WeekdayHour => {
            let mut groups: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
            let mut total_ss = 0.0;
            for i in 0..observed.len() {
                let d = observed[i] - predicted[i];
                let slot = (
                    weekday_index(keys[i].weekday),
                    keys[i].hour_of_day as usize,
                );
                let e = groups.entry(slot).or_insert((0.0, 0));
                e.0 += d * d;
                e.1 += 1;
                total_ss += d * d;
            }
            Ok(AxisDecomposition {
                axis,
                cells: cells_from_groups(groups, |(w, h), rmsd, count| Cell {
                    weekday: Some(w),
                    hour: Some(h),
                    rmsd,
                    count,
                }),
                overall: (total_ss / observed.len() as f64).sqrt(),
                n: observed.len(),
            })
        }
    }
}

/// All three decompositions plus the raw overall RMSD for one model.
pub fn full_report(
    model: &str,
    observed: &[f64],
    predicted: &[f64],
    keys: &[CalendarKey],
) -> Result<RmsdReport> {
    Ok(RmsdReport {
        model: model.to_string(),
        overall: rmsd(observed, predicted)?,
        n: observed.len(),
        by_weekday: decompose(observed, predicted, keys, Axis::Weekday)?,
        by_hour: decompose(observed, predicted, keys, Axis::Hour)?,
        by_weekday_hour: decompose(observed, predicted, keys, Axis::WeekdayHour)?,
    })
}

/// One ranked sampling slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub weekday: usize,
    pub weekday_name: String,
    pub hour: usize,
    pub rmsd: f64,
    pub count: usize,
}

/// Ranked representative slots plus the per-axis argmins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub models: Vec<String>,
    pub min_count: usize,
    pub ranked: Vec<Slot>,
    pub best_weekday: usize,
    pub best_weekday_name: String,
    pub best_hour: usize,
}

impl Recommendation {
    pub fn best_slot(&self) -> &Slot {
        &self.ranked[0]
    }
}

/// Ranks weekday-hour slots by the mean of the available models' grid RMSD.
/// A slot's count is the smallest count among the models carrying it; slots
/// under `min_count` are dropped. `best_weekday` / `best_hour` are the
/// argmins of the cross-model mean axis decompositions.
pub fn recommend(reports: &[&RmsdReport], min_count: usize) -> Result<Recommendation> {
    if reports.is_empty() {
        return Err(Error::InvalidConfig("recommend needs at least one report".into()));
    }
    if min_count == 0 {
        return Err(Error::InvalidConfig("min_count must be >= 1".into()));
    }

    let mut grid: BTreeMap<(usize, usize), (f64, usize, usize)> = BTreeMap::new();
    for report in reports {
        for cell in &report.by_weekday_hour.cells {
            let slot = (cell.weekday.unwrap(), cell.hour.unwrap());
            let e = grid.entry(slot).or_insert((0.0, 0, usize::MAX));
            e.0 += cell.rmsd;
            e.1 += 1;
            e.2 = e.2.min(cell.count);
        }
    }
    let mut ranked: Vec<Slot> = grid
        .into_iter()
        .filter(|&(_, (_, _, count))| count >= min_count)
        .map(|((w, h), (sum, models, count))| Slot {
            weekday: w,
            weekday_name: WEEKDAY_NAMES[w].to_string(),
            hour: h,
            rmsd: sum / models as f64,
            count,
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::NoEligibleCells(min_count));
    }
    ranked.sort_by(|a, b| {
        a.rmsd
            .total_cmp(&b.rmsd)
            .then(a.weekday.cmp(&b.weekday))
            .then(a.hour.cmp(&b.hour))
    });

    let axis_argmin = |pick: fn(&RmsdReport) -> &AxisDecomposition, cap: usize| -> usize {
        let mut sums = vec![(0.0, 0usize); cap];
        for report in reports {
            for cell in &pick(report).cells {
                let idx = cell.weekday.or(cell.hour).unwrap();
                sums[idx].0 += cell.rmsd;
                sums[idx].1 += 1;
            }
        }
        sums.iter()
            .enumerate()
            .filter(|(_, (_, n))| *n > 0)
            .min_by(|(ia, (sa, na)), (ib, (sb, nb))| {
                (sa / *na as f64)
                    .total_cmp(&(sb / *nb as f64))
                    .then(ia.cmp(ib))
            })
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let best_weekday = axis_argmin(|r| &r.by_weekday, 7);
    let best_hour = axis_argmin(|r| &r.by_hour, 24);

    Ok(Recommendation {
        models: reports.iter().map(|r| r.model.clone()).collect(),
        min_count,
        ranked,
        best_weekday,
        best_weekday_name: WEEKDAY_NAMES[best_weekday].to_string(),
        best_hour,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{calendar_key, HourStamp};

    fn keys_for(days: usize) -> Vec<CalendarKey> {
        let mut stamp = HourStamp::from_ymd_hour(2019, 7, 1, 0); // a Monday
        let mut out = Vec::new();
        for _ in 0..days * 24 {
            out.push(calendar_key(stamp));
            stamp = stamp.succ();
        }
        out
    }

    #[test]
    fn rmsd_hand_values() {
        assert_eq!(rmsd(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        let v = rmsd(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert!((v - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((v - 3.5355339059327378).abs() < 1e-9);
    }

    #[test]
    fn rmsd_rejects_bad_input() {
        assert!(matches!(rmsd(&[], &[]), Err(Error::EmptySeries)));
        assert!(matches!(
            rmsd(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn constant_deviation_everywhere() {
        let keys = keys_for(14);
        let n = keys.len();
        let observed = vec![1.5; n];
        let predicted = vec![1.0; n];
        for axis in [Axis::Weekday, Axis::Hour, Axis::WeekdayHour] {
            let d = decompose(&observed, &predicted, &keys, axis).unwrap();
            for cell in &d.cells {
                assert!((cell.rmsd - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monday_only_deviations_isolate() {
        let keys = keys_for(14);
        let observed: Vec<f64> = keys
            .iter()
            .map(|k| if weekday_index(k.weekday) == 0 { 2.0 } else { 0.0 })
            .collect();
        let predicted = vec![0.0; keys.len()];
        let d = decompose(&observed, &predicted, &keys, Axis::Weekday).unwrap();
        for cell in &d.cells {
            if cell.weekday == Some(0) {
                assert!((cell.rmsd - 2.0).abs() < 1e-12);
            } else {
                assert_eq!(cell.rmsd, 0.0);
            }
        }
    }

    #[test]
    fn weekday_axis_uses_daily_means() {
        // Within-day deviations that cancel at the day level contribute
        // nothing to the weekday decomposition.
        let keys = keys_for(7);
        let observed: Vec<f64> = keys
            .iter()
            .enumerate()
            .map(|(i, _)| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let predicted = vec![0.0; keys.len()];
        let d = decompose(&observed, &predicted, &keys, Axis::Weekday).unwrap();
        for cell in &d.cells {
            assert!(cell.rmsd.abs() < 1e-12);
        }
        // The hour axis still sees the raw deviations.
        let h = decompose(&observed, &predicted, &keys, Axis::Hour).unwrap();
        for cell in &h.cells {
            assert!((cell.rmsd - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pythagorean_identity_per_axis() {
        let keys = keys_for(21);
        let observed: Vec<f64> = (0..keys.len())
            .map(|i| ((i * 2654435761usize) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        let predicted: Vec<f64> = (0..keys.len())
            .map(|i| ((i * 40503usize) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        for axis in [Axis::Weekday, Axis::Hour, Axis::WeekdayHour] {
            let d = decompose(&observed, &predicted, &keys, axis).unwrap();
            let lhs: f64 = d.cells.iter().map(|c| c.count as f64 * c.rmsd * c.rmsd).sum();
            let rhs = d.n as f64 * d.overall * d.overall;
            assert!((lhs - rhs).abs() < 1e-9, "axis {axis:?}: {lhs} vs {rhs}");
        }
    }

    fn report_from(observed: &[f64], predicted: &[f64], keys: &[CalendarKey]) -> RmsdReport {
        full_report("empty", observed, predicted, keys).unwrap()
    }

    #[test]
    fn recommend_unique_minimum() {
        let keys = keys_for(28);
        let predicted = vec![0.0; keys.len()];
        let observed: Vec<f64> = keys
            .iter()
            .map(|k| {
                if weekday_index(k.weekday) == 3 && k.hour_of_day == 11 {
                    0.01
                } else {
                    1.0
                }
            })
            .collect();
        let report = report_from(&observed, &predicted, &keys);
        let rec = recommend(&[&report], 1).unwrap();
        assert_eq!(rec.best_slot().weekday, 3);
        assert_eq!(rec.best_slot().hour, 11);
        assert_eq!(rec.best_slot().weekday_name, "Thu");
        assert_eq!(rec.best_weekday, 3);
        assert_eq!(rec.best_hour, 11);
    }

    #[test]
    fn recommend_tie_break_earlier_slot() {
        let keys = keys_for(28);
        let predicted = vec![0.0; keys.len()];
        // Two tied minima: (Tue, 9) and (Thu, 11); Tuesday must win.
        let observed: Vec<f64> = keys
            .iter()
            .map(|k| {
                let w = weekday_index(k.weekday);
                if (w == 3 && k.hour_of_day == 11) || (w == 1 && k.hour_of_day == 9) {
                    0.25
                } else {
                    1.0
                }
            })
            .collect();
        let report = report_from(&observed, &predicted, &keys);
        let rec = recommend(&[&report], 1).unwrap();
        assert_eq!(rec.best_slot().weekday, 1);
        assert_eq!(rec.best_slot().hour, 9);
    }

    #[test]
    fn recommend_scale_invariant_ranking() {
        let keys = keys_for(28);
        let predicted = vec![0.0; keys.len()];
        // A distinct constant deviation per slot keeps the ranking strict.
        let observed: Vec<f64> = keys
            .iter()
            .map(|k| {
                let slot = weekday_index(k.weekday) * 24 + k.hour_of_day as usize;
                0.1 + slot as f64 * 0.003
            })
            .collect();
        let report = report_from(&observed, &predicted, &keys);
        let scaled: Vec<f64> = observed.iter().map(|v| v * 7.5).collect();
        let report_scaled = report_from(&scaled, &predicted, &keys);
        let a = recommend(&[&report], 1).unwrap();
        let b = recommend(&[&report_scaled], 1).unwrap();
        let slots_a: Vec<(usize, usize)> = a.ranked.iter().map(|s| (s.weekday, s.hour)).collect();
        let slots_b: Vec<(usize, usize)> = b.ranked.iter().map(|s| (s.weekday, s.hour)).collect();
        assert_eq!(slots_a, slots_b);
    }

    #[test]
    fn recommend_min_count_filters() {
        let keys = keys_for(14);
        let predicted = vec![0.0; keys.len()];
        let observed: Vec<f64> = (0..keys.len()).map(|i| (i % 5) as f64 * 0.1).collect();
        let report = report_from(&observed, &predicted, &keys);
        // Every slot appears exactly twice in 14 days.
        assert!(matches!(
            recommend(&[&report], 3),
            Err(Error::NoEligibleCells(3))
        ));
        assert!(recommend(&[&report], 2).is_ok());
    }
}
