//! Design structures: the fixed-effects matrix and the three random-factor
//! group index vectors (hour-of-day, calendar date, month-year).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AnalysisDataset;

/// Row restriction applied when building a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    #[default]
    None,
    /// Drop every row falling on a date that carries any event.
    ExcludeEventDays,
}

/// Which of the three canonical models a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Empty,
    Full,
    Restricted,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Empty => "empty",
            ModelKind::Full => "full",
            ModelKind::Restricted => "restricted",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empty" => Ok(ModelKind::Empty),
            "full" => Ok(ModelKind::Full),
            "restricted" => Ok(ModelKind::Restricted),
            other => Err(Error::InvalidConfig(format!("unknown model {other:?}"))),
        }
    }
}

/// A model specification: named fixed-effect columns plus the fixed random
/// structure (hour-of-day, date, month-year intercepts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub label: String,
    pub fixed_effects: Vec<String>,
    pub restriction: Restriction,
}

impl ModelSpec {
    /// Intercept and random effects only.
    pub fn empty() -> Self {
        ModelSpec {
            label: "empty".into(),
            fixed_effects: Vec::new(),
            restriction: Restriction::None,
        }
    }

    /// The empty model plus every event dummy and weather column.
    pub fn full(dataset: &AnalysisDataset) -> Self {
        ModelSpec {
            label: "full".into(),
            fixed_effects: dataset.covariates.column_names().map(String::from).collect(),
            restriction: Restriction::None,
        }
    }

    /// The empty model refit after dropping all event days.
    pub fn restricted() -> Self {
        ModelSpec {
            label: "restricted".into(),
            fixed_effects: Vec::new(),
            restriction: Restriction::ExcludeEventDays,
        }
    }

    pub fn for_kind(kind: ModelKind, dataset: &AnalysisDataset) -> Self {
        match kind {
            ModelKind::Empty => ModelSpec::empty(),
            ModelKind::Full => ModelSpec::full(dataset),
            ModelKind::Restricted => ModelSpec::restricted(),
        }
    }
}

pub const FACTOR_NAMES: [&str; 3] = ["hour_of_day", "date", "month_year"];

/// One random grouping factor: a label per group and a group id per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    /// Sorted group labels; the group id is the index into this list.
    pub labels: Vec<String>,
    pub index: Vec<usize>,
}

impl Factor {
    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }
}

/// The assembled design bundle handed to the fitters.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub y: Vec<f64>,
    /// n x p with a leading intercept column.
    pub x: DMatrix<f64>,
    pub x_names: Vec<String>,
    pub factors: [Factor; 3],
    /// Row index into the source dataset (or synthetic row id).
    pub row_ids: Vec<usize>,
    /// Requested covariates dropped for being constant over the design rows.
    pub dropped_columns: Vec<String>,
}

impl Design {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.x.ncols()
    }

    /// Builds a design directly from raw parts; labels per factor are derived
    /// by sorting the given per-row label strings.
    pub fn from_parts(
        y: Vec<f64>,
        x: DMatrix<f64>,
        x_names: Vec<String>,
        factor_labels: [Vec<String>; 3],
    ) -> Result<Design> {
        let n = y.len();
        if x.nrows() != n || factor_labels.iter().any(|l| l.len() != n) {
            return Err(Error::LengthMismatch(
                "design parts must have one entry per row".into(),
            ));
        }
        let factors = std::array::from_fn(|k| {
            let per_row = &factor_labels[k];
            let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
            for label in per_row {
                let next = ids.len();
                ids.entry(label.as_str()).or_insert(next);
            }
            // BTreeMap iteration is sorted; re-number in label order.
            let mut labels: Vec<String> = ids.keys().map(|s| s.to_string()).collect();
            labels.sort();
            let lookup: BTreeMap<&str, usize> = labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.as_str(), i))
                .collect();
            Factor {
                name: FACTOR_NAMES[k].to_string(),
                index: per_row.iter().map(|l| lookup[l.as_str()]).collect(),
                labels,
            }
        });
        Ok(Design {
            row_ids: (0..n).collect(),
            y,
            x,
            x_names,
            factors,
            dropped_columns: Vec::new(),
        })
    }

    /// Returns a design containing only the rows where `keep` is true,
    /// with factor groups rebuilt from the surviving rows.
    pub fn retain_rows(&self, keep: &[bool]) -> Result<Design> {
        if keep.len() != self.n_rows() {
            return Err(Error::LengthMismatch("retain mask length".into()));
        }
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| keep[i]).collect();
        if rows.is_empty() {
            return Err(Error::EmptyAfterRestriction);
        }
        let y: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
        let x = DMatrix::from_fn(rows.len(), self.x.ncols(), |r, c| self.x[(rows[r], c)]);
        let factor_labels = std::array::from_fn(|k| {
            let f = &self.factors[k];
            rows.iter().map(|&i| f.labels[f.index[i]].clone()).collect()
        });
        let mut design = Design::from_parts(y, x, self.x_names.clone(), factor_labels)?;
        design.row_ids = rows.iter().map(|&i| self.row_ids[i]).collect();
        design.dropped_columns = self.dropped_columns.clone();
        Ok(design)
    }
}

/// Builds the fixed-effects matrix (leading intercept) and the three group
/// index vectors, applying the spec's restriction. Requested covariate
/// columns that are constant over the design rows are dropped so the model
/// degrades gracefully when, say, no events of a category exist.
pub fn build_design(dataset: &AnalysisDataset, spec: &ModelSpec) -> Result<Design> {
    let keep: Vec<bool> = match spec.restriction {
        Restriction::None => vec![true; dataset.n_rows()],
        Restriction::ExcludeEventDays => {
            dataset.event_day_rows().iter().map(|&e| !e).collect()
        }
    };
    let rows: Vec<usize> = (0..dataset.n_rows()).filter(|&i| keep[i]).collect();
    if rows.is_empty() {
        return Err(Error::EmptyAfterRestriction);
    }

    let mut columns: Vec<(&str, &[f64])> = Vec::with_capacity(spec.fixed_effects.len());
    for name in &spec.fixed_effects {
        let col = dataset
            .covariates
            .column(name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        columns.push((name, col));
    }
    let mut dropped = Vec::new();
    columns.retain(|(name, col)| {
        let first = col[rows[0]];
        let constant = rows.iter().all(|&i| col[i] == first);
        if constant {
            dropped.push(name.to_string());
        }
        !constant
    });

    let p = 1 + columns.len();
    let mut x = DMatrix::zeros(rows.len(), p);
    let mut x_names = Vec::with_capacity(p);
    x_names.push("constant".to_string());
    for (r, &i) in rows.iter().enumerate() {
        x[(r, 0)] = 1.0;
        for (c, (_, col)) in columns.iter().enumerate() {
            x[(r, c + 1)] = col[i];
        }
    }
    for (name, _) in &columns {
        x_names.push(name.to_string());
    }

    let z = dataset.z();
    let y: Vec<f64> = rows.iter().map(|&i| z[i]).collect();
    let factor_labels: [Vec<String>; 3] = [
        rows.iter()
            .map(|&i| format!("{:02}", dataset.keys[i].hour_of_day))
            .collect(),
        rows.iter().map(|&i| dataset.keys[i].date.to_string()).collect(),
        rows.iter()
            .map(|&i| dataset.keys[i].month_year.to_string())
            .collect(),
    ];

    let mut design = Design::from_parts(y, x, x_names, factor_labels)?;
    design.row_ids = rows;
    design.dropped_columns = dropped;
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;
    use crate::ingest::{
        assemble_dataset, EventCategory, EventRow, EventSpan, RunConfig, StationSeries,
    };
    use crate::series::{HourStamp, HourlyObservation};

    fn dataset_with_events(days: usize, event_dates: &[u32]) -> AnalysisDataset {
        let start = HourStamp::from_ymd_hour(2019, 5, 1, 0);
        let mut stamp = start;
        let mut obs = Vec::new();
        for i in 0..days * 24 {
            obs.push(HourlyObservation::new(stamp, 500.0 + ((i * 53) % 211) as f64));
            stamp = stamp.succ();
        }
        let weather: Vec<StationSeries> = ["malmo", "stockholm"]
            .iter()
            .map(|name| StationSeries {
                station: name.to_string(),
                start,
                air_temp_c: (0..days * 24).map(|i| 8.0 + (i as f64 * 0.3).sin()).collect(),
                precip_mm: (0..days * 24).map(|i| ((i % 7) as f64) * 0.2).collect(),
                filled: vec![],
            })
            .collect();
        let events: Vec<EventRow> = event_dates
            .iter()
            .map(|&d| EventRow {
                category: EventCategory::SecularHoliday,
                span: EventSpan::AllDay(chrono::NaiveDate::from_ymd_opt(2019, 5, d).unwrap()),
            })
            .collect();
        assemble_dataset(&obs, &weather, &events, &RunConfig::default()).unwrap()
    }

    #[test]
    fn empty_spec_group_sizes() {
        let ds = dataset_with_events(14, &[]);
        let design = build_design(&ds, &ModelSpec::empty()).unwrap();
        assert_eq!(design.n_rows(), 336);
        assert_eq!(design.n_fixed(), 1);
        assert_eq!(design.x_names, vec!["constant"]);
        assert_eq!(design.factors[0].n_groups(), 24);
        assert_eq!(design.factors[1].n_groups(), 14);
        assert_eq!(design.factors[2].n_groups(), 1);
    }

    #[test]
    fn full_spec_column_count() {
        let ds = dataset_with_events(14, &[5]);
        let design = build_design(&ds, &ModelSpec::full(&ds)).unwrap();
        // Constant + 1 surviving event dummy + 16 weather columns; the four
        // event categories with no events are constant and dropped.
        assert_eq!(design.n_fixed(), 1 + 1 + 16);
        assert_eq!(design.dropped_columns.len(), 4);

        // With all five categories present the full 22-column layout appears.
        let start = HourStamp::from_ymd_hour(2019, 5, 2, 20);
        let mut ds = dataset_with_events(14, &[5]);
        let extra = [
            (EventCategory::ReligiousHoliday, 3u32),
            (EventCategory::Sports, 8),
            (EventCategory::TvMedia, 10),
            (EventCategory::WeatherTransport, 12),
        ];
        for (cat, day) in extra {
            let col = cat.index();
            for (row, key) in ds.keys.iter().enumerate() {
                if key.date.day() == day {
                    ds.covariates.event_columns[col][row] = 1.0;
                }
            }
        }
        let _ = start;
        let design = build_design(&ds, &ModelSpec::full(&ds)).unwrap();
        assert_eq!(design.n_fixed(), 22);
    }

    #[test]
    fn restriction_drops_event_days() {
        let ds = dataset_with_events(14, &[5, 9]);
        let design = build_design(&ds, &ModelSpec::restricted()).unwrap();
        assert_eq!(design.n_rows(), 12 * 24);
        assert_eq!(design.factors[1].n_groups(), 12);
    }

    #[test]
    fn vacuous_restriction_errors() {
        let all_days: Vec<u32> = (1..=14).collect();
        let ds = dataset_with_events(14, &all_days);
        assert!(matches!(
            build_design(&ds, &ModelSpec::restricted()),
            Err(Error::EmptyAfterRestriction)
        ));
    }

    #[test]
    fn unknown_column_rejected() {
        let ds = dataset_with_events(7, &[]);
        let spec = ModelSpec {
            label: "bad".into(),
            fixed_effects: vec!["no_such_column".into()],
            restriction: Restriction::None,
        };
        assert!(matches!(
            build_design(&ds, &spec),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn retain_rows_rebuilds_groups() {
        let ds = dataset_with_events(14, &[]);
        let design = build_design(&ds, &ModelSpec::empty()).unwrap();
        let keep: Vec<bool> = (0..design.n_rows()).map(|i| i >= 48).collect();
        let trimmed = design.retain_rows(&keep).unwrap();
        assert_eq!(trimmed.n_rows(), 288);
        assert_eq!(trimmed.factors[1].n_groups(), 12);
        assert_eq!(trimmed.row_ids[0], 48);
    }
}
