//! Per-region split, fit and forecast, fanned out over a worker pool.

use std::collections::BTreeMap;

use rayon::prelude::*;
use spreadcast_core::data::{train_test_split, Dataset, RegionKey, RegionSeries};
use spreadcast_core::dspm::{dspm_forecast, dspm_train};
use spreadcast_core::evaluation::ModelKind;
use spreadcast_core::nrm::{nrm_fit, nrm_forecast};
use spreadcast_core::svr::{svr_fit, svr_forecast};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::modelfile::{write_dspm, write_nrm, write_svr};

#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutcome {
    pub key: RegionKey,
    pub train_len: usize,
    pub forecasts: BTreeMap<ModelKind, Vec<f64>>,
    /// Serialised fitted models.
    pub dumps: BTreeMap<ModelKind, String>,
    pub failures: BTreeMap<ModelKind, String>,
}

struct Fitted {
    forecast: Vec<f64>,
    dump: String,
}

fn fit_one(model: ModelKind, train: &RegionSeries, horizon: usize, cfg: &RunConfig) -> spreadcast_core::Result<Fitted> {
    let last_day = train.len() - 1;
    let fitted = match model {
        ModelKind::Dspm => {
            let m = dspm_train(train, &cfg.dspm_hyper())?;
            Fitted {
                forecast: dspm_forecast(&m, train, horizon)?,
                dump: write_dspm(&m),
            }
        }
        ModelKind::Nrm => {
            let p = nrm_fit(train, &cfg.nrm_config(Some(train.key())))?;
            Fitted {
                forecast: nrm_forecast(&p, last_day, horizon),
                dump: write_nrm(&p),
            }
        }
        ModelKind::Baseline => {
            let m = svr_fit(train, &cfg.svr_hyper())?;
            Fitted {
                forecast: svr_forecast(&m, last_day, horizon),
                dump: write_svr(&m),
            }
        }
    };
    if fitted.forecast.iter().any(|v| !v.is_finite()) {
        return Err(spreadcast_core::Error::Fit("forecast is not finite".into()));
    }
    Ok(fitted)
}

/// Never fails: per-model errors are recorded in the outcome.
pub fn run_region(series: &RegionSeries, cfg: &RunConfig) -> RegionOutcome {
    let mut out = RegionOutcome {
        key: series.key().clone(),
        train_len: series.len().saturating_sub(cfg.horizon),
        forecasts: BTreeMap::new(),
        dumps: BTreeMap::new(),
        failures: BTreeMap::new(),
    };
    let train = match train_test_split(series, cfg.horizon) {
        Ok((train, _)) => train,
        Err(e) => {
            out.train_len = 0;
            for &m in &cfg.models {
                out.failures.insert(m, e.to_string());
            }
            return out;
        }
    };
    for &m in &cfg.models {
        match fit_one(m, &train, cfg.horizon, cfg) {
            Ok(f) => {
                out.forecasts.insert(m, f.forecast);
                out.dumps.insert(m, f.dump);
            }
            Err(e) => {
                out.failures.insert(m, e.to_string());
            }
        }
    }
    out
}

/// Outcomes come back in dataset (region key) order whatever the worker
/// count.
pub fn run_all(dataset: &Dataset, cfg: &RunConfig) -> Result<Vec<RegionOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} workers: {e}", cfg.workers)))?;
    Ok(pool.install(|| {
        dataset
            .regions()
            .par_iter()
            .map(|series| run_region(series, cfg))
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn series(name: &str, values: Vec<u64>) -> RegionSeries {
        RegionSeries::new(RegionKey::country(name), NaiveDate::from_ymd_opt(2020, 1, 22).unwrap(), values)
    }

    fn quick() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.dspm.epochs = 3;
        cfg.dspm.hidden_size = 4;
        cfg.dspm.stack_depth = 1;
        cfg.horizon = 3;
        cfg
    }

    #[test]
    fn short_series_fails_every_model() {
        let out = run_region(&series("A", vec![1, 2, 3]), &quick());
        assert!(out.forecasts.is_empty());
        assert_eq!(out.failures.len(), 3);
    }

    #[test]
    fn forecasts_cover_the_horizon() {
        let values: Vec<u64> = (0..30).map(|t| t * t).collect();
        let out = run_region(&series("A", values), &quick());
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert_eq!(out.train_len, 27);
        for m in ModelKind::ALL {
            assert_eq!(out.forecasts[&m].len(), 3);
            assert!(!out.dumps[&m].is_empty());
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let ds = Dataset::new(
            (0..4)
                .map(|i| series(&format!("R{i}"), (0..25).map(|t| t * (i + 1) + t * t).collect()))
                .collect(),
        )
        .unwrap();
        let mut cfg = quick();
        cfg.workers = 1;
        let one = run_all(&ds, &cfg).unwrap();
        cfg.workers = 3;
        let three = run_all(&ds, &cfg).unwrap();
        assert_eq!(one, three);
        let keys: Vec<_> = one.iter().map(|o| o.key.clone()).collect();
        let expected: Vec<_> = ds.regions().iter().map(|r| r.key().clone()).collect();
        assert_eq!(keys, expected);
    }
}
