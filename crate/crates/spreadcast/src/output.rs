//! CSV artefacts written by `run` and read back by `report`.
//!
//! Dates are written as `YYYY-MM-DD`; real numbers use the shortest decimal
//! that parses back to the same `f64`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use spreadcast_core::data::{Dataset, RegionKey, RegionSeries};
use spreadcast_core::evaluation::{EvalReport, Forecasts, ModelKind};

use crate::error::{Error, Result};
use crate::pipeline::RegionOutcome;

const DATE_FMT: &str = "%Y-%m-%d";

/// File-name-safe stem: dataset position plus the region name.
pub fn region_stem(index: usize, key: &RegionKey) -> String {
    let name: String = key
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{index:03}_{name}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per held-out date: `Province/State, Country/Region, Date, Actual`,
/// then one column per model, empty where the model failed.
pub fn write_forecasts<W: Write>(
    sink: W,
    dataset: &Dataset,
    outcomes: &[RegionOutcome],
    models: &[ModelKind],
    horizon: usize,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["Province/State", "Country/Region", "Date", "Actual"];
    header.extend(models.iter().map(|m| m.label()));
    w.write_record(&header)?;
    for outcome in outcomes {
        let Some(series) = dataset.get(&outcome.key) else {
            continue;
        };
        if outcome.train_len == 0 {
            continue;
        }
        for h in 0..horizon {
            let idx = outcome.train_len + h;
            let mut row = vec![
                outcome.key.province().to_string(),
                outcome.key.country_region.clone(),
                series.date_at(idx).format(DATE_FMT).to_string(),
                series.confirmed()[idx].to_string(),
            ];
            for m in models {
                row.push(opt_num(outcome.forecasts.get(m).map(|f| f[h])));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Held-out actuals and forecasts recovered from a forecasts file.
pub struct SavedForecasts {
    pub actuals: Dataset,
    pub forecasts: Forecasts,
    pub models: Vec<ModelKind>,
    pub horizon: usize,
}

pub fn read_forecasts<R: Read>(source: R, origin: &Path) -> Result<SavedForecasts> {
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
    let fixed = ["Province/State", "Country/Region", "Date", "Actual"];
    if headers.len() < fixed.len() || headers.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: format!("header must start with {}", fixed.join(",")),
        });
    }
    let mut models = Vec::new();
    for h in headers.iter().skip(fixed.len()) {
        models.push(ModelKind::parse(h).ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: format!("unknown model column `{h}`"),
        })?);
    }

    struct Rows {
        dates: Vec<NaiveDate>,
        actual: Vec<u64>,
        values: Vec<Vec<Option<f64>>>,
    }
    let mut regions: BTreeMap<RegionKey, Rows> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(origin, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let key = RegionKey::new(Some(&record[0]), &record[1]).map_err(|e| bad(e.to_string()))?;
        let date = NaiveDate::parse_from_str(&record[2], DATE_FMT).map_err(|_| bad(format!("bad date `{}`", &record[2])))?;
        let actual: u64 = record[3].parse().map_err(|_| bad(format!("bad actual `{}`", &record[3])))?;
        let rows = regions.entry(key).or_insert_with(|| Rows {
            dates: Vec::new(),
            actual: Vec::new(),
            values: vec![Vec::new(); models.len()],
        });
        rows.dates.push(date);
        rows.actual.push(actual);
        for (i, cell) in record.iter().skip(fixed.len()).enumerate() {
            let v = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| bad(format!("bad forecast `{cell}`")))?)
            };
            rows.values[i].push(v);
        }
    }

    let mut horizon = None;
    let mut series = Vec::with_capacity(regions.len());
    let mut forecasts = Forecasts::new();
    for (key, rows) in regions {
        let h = rows.dates.len();
        if *horizon.get_or_insert(h) != h {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                message: format!("{key} has {h} forecast days, other regions have {}", horizon.unwrap_or(0)),
            });
        }
        let mut per_model = BTreeMap::new();
        for (m, cells) in models.iter().zip(&rows.values) {
            let present: Vec<f64> = cells.iter().flatten().copied().collect();
            if present.len() == h {
                per_model.insert(*m, present);
            } else if !present.is_empty() {
                return Err(Error::Format {
                    path: origin.to_path_buf(),
                    message: format!("{key}: {m} forecasts are only partly present"),
                });
            }
        }
        forecasts.insert(key.clone(), per_model);
        series.push(
            RegionSeries::from_dated(key, &rows.dates, rows.actual).map_err(|e| Error::Format {
                path: origin.to_path_buf(),
                message: e.to_string(),
            })?,
        );
    }
    if series.is_empty() {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            message: "no forecasts to report".into(),
        });
    }
    Ok(SavedForecasts {
        actuals: Dataset::new(series)?,
        forecasts,
        models,
        horizon: horizon.unwrap_or(0),
    })
}

/// `Province/State, Country/Region, GroundTruth`, the rounded final-day
/// forecast per model, the MAE per model and a status naming failed models.
pub fn write_report<W: Write>(sink: W, report: &EvalReport) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<String> = vec!["Province/State".into(), "Country/Region".into(), "GroundTruth".into()];
    header.extend(report.models.iter().map(|m| m.label().to_string()));
    header.extend(report.models.iter().map(|m| format!("{}MAE", m.label())));
    header.push("Status".into());
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![row.key.province().to_string(), row.key.country_region.clone(), row.ground_truth.to_string()];
        for m in &report.models {
            rec.push(row.predictions.get(m).map(|p| p.rounded.to_string()).unwrap_or_default());
        }
        for m in &report.models {
            rec.push(opt_num(row.mae.get(m).copied()));
        }
        let failed: Vec<&str> = report.models.iter().filter(|m| !row.mae.contains_key(m)).map(|m| m.slug()).collect();
        rec.push(if failed.is_empty() { "ok".into() } else { format!("failed:{}", failed.join(";")) });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `Model, AverageMAE, ErrorRate` with the error rate as a fraction.
pub fn write_summary<W: Write>(sink: W, report: &EvalReport) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["Model", "AverageMAE", "ErrorRate"])?;
    for m in &report.models {
        w.write_record([
            m.label().to_string(),
            opt_num(report.avg_mae.get(m).copied()),
            opt_num(report.error_rate.get(m).copied()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `Date, Actual` then one column per model; model cells are empty on
/// training dates and for failed models.
pub fn write_plot<W: Write>(
    sink: W,
    series: &RegionSeries,
    outcome: &RegionOutcome,
    models: &[ModelKind],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["Date", "Actual"];
    header.extend(models.iter().map(|m| m.label()));
    w.write_record(&header)?;
    for (i, (date, value)) in series.dates().zip(series.confirmed()).enumerate() {
        let mut row = vec![date.format(DATE_FMT).to_string(), value.to_string()];
        for m in models {
            let cell = if i >= outcome.train_len && outcome.train_len > 0 {
                outcome.forecasts.get(m).map(|f| f[i - outcome.train_len])
            } else {
                None
            };
            row.push(opt_num(cell));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `Province/State, Country/Region, Model, Error`.
pub fn write_failures<W: Write>(sink: W, outcomes: &[RegionOutcome]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["Province/State", "Country/Region", "Model", "Error"])?;
    for o in outcomes {
        for (m, msg) in &o.failures {
            w.write_record([o.key.province(), &o.key.country_region, m.slug(), msg])?;
        }
    }
    w.flush()?;
    Ok(())
}
