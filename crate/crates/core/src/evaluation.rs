//! Held-out metrics and report assembly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::data::{Dataset, RegionKey};
use crate::error::{Error, Result};

/// Report columns in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Baseline,
    Dspm,
    Nrm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Baseline, ModelKind::Dspm, ModelKind::Nrm];

    /// Column heading.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Baseline => "Baseline",
            ModelKind::Dspm => "DSPM",
            ModelKind::Nrm => "NRM",
        }
    }

    /// Lower-case name used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Baseline => "svr",
            ModelKind::Dspm => "dspm",
            ModelKind::Nrm => "nrm",
        }
    }

    /// Accepts either the slug or the label, case-insensitively.
    pub fn parse(s: &str) -> Option<ModelKind> {
        let s = s.trim();
        ModelKind::ALL
            .into_iter()
            .find(|m| s.eq_ignore_ascii_case(m.slug()) || s.eq_ignore_ascii_case(m.label()))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} predictions for {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Metric("mae of an empty series".into()));
    }
    let sum: f64 = predicted.iter().zip(actual).map(|(p, a)| libm::fabs(p - a)).sum();
    Ok(sum / predicted.len() as f64)
}

/// Nearest integer, halves away from zero, negatives clamped to 0.
pub fn round_prediction(v: f64) -> u64 {
    let r = libm::round(v);
    if r > 0.0 {
        r as u64
    } else {
        0
    }
}

pub fn round_predictions(values: &[f64]) -> Vec<u64> {
    values.iter().map(|&v| round_prediction(v)).collect()
}

/// `avg_mae / (total_cases / n_regions)`.
pub fn error_rate(avg_mae: f64, total_cases: u64, n_regions: usize) -> Result<f64> {
    if total_cases == 0 || n_regions == 0 {
        return Err(Error::Metric(format!(
            "error rate needs positive totals, got {total_cases} cases over {n_regions} regions"
        )));
    }
    Ok(avg_mae / (total_cases as f64 / n_regions as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Final-day forecast before rounding.
    pub value: f64,
    pub rounded: u64,
}

impl Prediction {
    pub fn new(value: f64) -> Self {
        Prediction {
            value,
            rounded: round_prediction(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub key: RegionKey,
    /// Last held-out observation.
    pub ground_truth: u64,
    pub predictions: BTreeMap<ModelKind, Prediction>,
    /// MAE over the whole horizon on unrounded forecasts.
    pub mae: BTreeMap<ModelKind, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub models: Vec<ModelKind>,
    pub avg_mae: BTreeMap<ModelKind, f64>,
    pub error_rate: BTreeMap<ModelKind, f64>,
    pub total_cases: u64,
    pub n_regions: usize,
}

impl EvalReport {
    /// Aggregates rows. Averages run over the rows where a model produced a
    /// forecast; totals and the region count cover every row.
    pub fn from_rows(rows: Vec<EvalRow>, models: &[ModelKind]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Report("no regions to report".into()));
        }
        let total_cases: u64 = rows.iter().map(|r| r.ground_truth).sum();
        let n_regions = rows.len();
        let mut models: Vec<ModelKind> = models.to_vec();
        models.sort();
        models.dedup();
        let mut avg_mae = BTreeMap::new();
        let mut rates = BTreeMap::new();
        for &m in &models {
            let maes: Vec<f64> = rows.iter().filter_map(|r| r.mae.get(&m).copied()).collect();
            if maes.is_empty() {
                continue;
            }
            let avg = maes.iter().sum::<f64>() / maes.len() as f64;
            avg_mae.insert(m, avg);
            if total_cases > 0 {
                rates.insert(m, error_rate(avg, total_cases, n_regions)?);
            }
        }
        Ok(EvalReport {
            rows,
            models,
            avg_mae,
            error_rate: rates,
            total_cases,
            n_regions,
        })
    }
}

/// Per-region, per-model horizon forecasts. A missing model entry means that
/// model failed for the region.
pub type Forecasts = BTreeMap<RegionKey, BTreeMap<ModelKind, Vec<f64>>>;

/// Scores the last `horizon` observations of every region in `dataset`.
pub fn build_report(dataset: &Dataset, forecasts: &Forecasts, horizon: usize, models: &[ModelKind]) -> Result<EvalReport> {
    if horizon == 0 {
        return Err(Error::Report("horizon must be at least 1".into()));
    }
    let missing: Vec<String> = dataset
        .regions()
        .iter()
        .filter(|r| !forecasts.contains_key(r.key()))
        .map(|r| format!("{}", r.key()))
        .collect();
    let extra: Vec<String> = forecasts
        .keys()
        .filter(|k| dataset.get(k).is_none())
        .map(|k| format!("{k}"))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Report(format!(
            "forecast regions do not match the dataset; without forecasts: [{}]; not in dataset: [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let mut rows = Vec::with_capacity(dataset.len());
    for region in dataset.regions() {
        let values = region.values();
        if values.len() < horizon {
            return Err(Error::Report(format!(
                "{} has {} observations, fewer than the horizon {horizon}",
                region.key(),
                values.len()
            )));
        }
        let actual = &values[values.len() - horizon..];
        let mut row = EvalRow {
            key: region.key().clone(),
            ground_truth: actual[horizon - 1] as u64,
            predictions: BTreeMap::new(),
            mae: BTreeMap::new(),
        };
        for (&model, forecast) in &forecasts[region.key()] {
            if forecast.len() != horizon {
                return Err(Error::Report(format!(
                    "{model} forecast for {} covers {} days, expected {horizon}",
                    region.key(),
                    forecast.len()
                )));
            }
            row.mae.insert(model, mae(forecast, actual)?);
            row.predictions.insert(model, Prediction::new(forecast[horizon - 1]));
        }
        rows.push(row);
    }
    EvalReport::from_rows(rows, models)
}
