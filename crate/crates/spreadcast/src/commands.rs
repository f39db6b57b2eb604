//! `ingest`, `run` and `report`.
//!
//! Output directory layout after `run`:
//!
//! ```text
//! manifest.txt      every setting; usable as --config to reproduce the run
//! forecasts.csv     held-out actuals and unrounded forecasts
//! report.csv        per-region ground truth, rounded forecasts, MAEs, status
//! summary.csv       Model, AverageMAE, ErrorRate
//! failures.csv      models that could not be fitted, with the reason
//! plots/NNN_*.csv   per-region actuals plus forecasts for plotting
//! models/NNN_*.M.txt  fitted model dumps
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use spreadcast_core::data::Dataset;
use spreadcast_core::evaluation::{build_report, EvalReport, Forecasts};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{read_dataset, write_long_csv};
use crate::output::{
    read_forecasts, region_stem, write_failures, write_forecasts, write_plot, write_report, write_summary,
};
use crate::pipeline::{run_all, RegionOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub regions: usize,
    pub dates: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub total_cases: u64,
}

impl IngestSummary {
    pub fn of(dataset: &Dataset) -> Option<Self> {
        let (first_date, last_date) = dataset.date_span()?;
        Some(IngestSummary {
            regions: dataset.len(),
            dates: dataset.n_dates(),
            first_date,
            last_date,
            total_cases: dataset.total_cases(),
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "regions={}\ndates={}\nfirst_date={}\nlast_date={}\ntotal_cases={}\n",
            self.regions, self.dates, self.first_date, self.last_date, self.total_cases
        )
    }
}

fn input_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.input
        .as_deref()
        .ok_or_else(|| Error::Usage("no input file given (use --input or input= in the config)".into()))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    read_dataset(input_path(cfg)?, cfg.layout, cfg.regions.as_deref())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::result::Result<(), csv::Error>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    fill(&mut w).map_err(|e| Error::csv(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses the input, writes `dataset.csv` (normalised long layout) and
/// `ingest_summary.txt` into the output directory.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let dataset = load_dataset(cfg)?;
    let summary = IngestSummary::of(&dataset).ok_or_else(|| Error::Usage("input holds no regions".into()))?;
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("dataset.csv"), |w| write_long_csv(&dataset, w))?;
    write_text(&cfg.out.join("ingest_summary.txt"), &summary.to_text())?;
    Ok(summary)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub outcomes: Vec<RegionOutcome>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn n_failures(&self) -> usize {
        self.outcomes.iter().map(|o| o.failures.len()).sum()
    }
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    if dataset.is_empty() {
        return Err(Error::Usage("no regions selected".into()));
    }
    let outcomes = run_all(&dataset, cfg)?;
    if outcomes.iter().all(|o| o.forecasts.is_empty()) {
        return Err(Error::AllFailed);
    }

    // regions too short to split are reported through failures.csv only
    let scored: Vec<_> = outcomes
        .iter()
        .filter(|o| o.train_len > 0)
        .map(|o| o.key.clone())
        .collect();
    let scored_ds = dataset.filter(&scored)?;
    let forecasts: Forecasts = outcomes
        .iter()
        .filter(|o| o.train_len > 0)
        .map(|o| (o.key.clone(), o.forecasts.clone()))
        .collect();
    let report = build_report(&scored_ds, &forecasts, cfg.horizon, &cfg.models)?;

    let out = &cfg.out;
    create_dir(out)?;
    create_dir(&out.join("plots"))?;
    create_dir(&out.join("models"))?;
    write_text(&out.join("manifest.txt"), &cfg.to_manifest())?;
    write_file(&out.join("forecasts.csv"), |w| {
        write_forecasts(w, &dataset, &outcomes, &cfg.models, cfg.horizon)
    })?;
    write_file(&out.join("report.csv"), |w| write_report(w, &report))?;
    write_file(&out.join("summary.csv"), |w| write_summary(w, &report))?;
    write_file(&out.join("failures.csv"), |w| write_failures(w, &outcomes))?;
    for (i, (series, outcome)) in dataset.regions().iter().zip(&outcomes).enumerate() {
        let stem = region_stem(i, series.key());
        write_file(&out.join("plots").join(format!("{stem}.csv")), |w| {
            write_plot(w, series, outcome, &cfg.models)
        })?;
        for (m, dump) in &outcome.dumps {
            write_text(&out.join("models").join(format!("{stem}.{}.txt", m.slug())), dump)?;
        }
    }
    Ok(RunOutcome {
        report,
        outcomes,
        out_dir: out.clone(),
    })
}

/// Rebuilds the report from a forecasts file (`forecasts`, or
/// `<out>/forecasts.csv`) and writes `report.csv` and `summary.csv` to the
/// output directory.
pub fn cmd_report(cfg: &RunConfig, forecasts: Option<&Path>) -> Result<EvalReport> {
    let default = cfg.out.join("forecasts.csv");
    let path = forecasts.unwrap_or(&default);
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::InputNotFound(path.to_path_buf())),
        Err(e) => return Err(Error::io(path, e)),
    };
    let saved = read_forecasts(file, path)?;
    let report = build_report(&saved.actuals, &saved.forecasts, saved.horizon, &saved.models)?;
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("report.csv"), |w| write_report(w, &report))?;
    write_file(&cfg.out.join("summary.csv"), |w| write_summary(w, &report))?;
    Ok(report)
}

/// Human-readable summary table.
pub fn format_summary(report: &EvalReport) -> String {
    let mut s = format!(
        "{:<10} {:>14} {:>10}\n",
        "Model", "AverageMAE", "ErrorRate"
    );
    for m in &report.models {
        let mae = report.avg_mae.get(m).map_or("-".to_string(), |v| format!("{v:.2}"));
        let rate = report.error_rate.get(m).map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
        s.push_str(&format!("{:<10} {:>14} {:>10}\n", m.label(), mae, rate));
    }
    s.push_str(&format!(
        "{} regions, {} total cases at the last held-out date\n",
        report.n_regions, report.total_cases
    ));
    s
}
