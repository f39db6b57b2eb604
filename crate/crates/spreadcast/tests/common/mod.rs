#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use spreadcast::ingest::{write_long_csv, write_wide_csv};
use spreadcast_core::data::{Dataset, RegionKey, RegionSeries};

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).unwrap()
}

/// Noiseless-looking logistic outbreak with a weekly reporting ripple,
/// made non-decreasing and rounded to whole cases.
pub fn outbreak(capacity: f64, rate: f64, midpoint: f64, ripple: f64, n_dates: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n_dates);
    let mut last = 0u64;
    for t in 0..n_dates {
        let t = t as f64;
        let trend = capacity / (1.0 + (-rate * (t - midpoint)).exp());
        let weekly = ripple * trend * (2.0 * std::f64::consts::PI * t / 7.0).sin();
        let v = (trend + weekly).round().max(0.0) as u64;
        last = last.max(v);
        out.push(last);
    }
    out
}

fn region_key(i: usize) -> RegionKey {
    if i.is_multiple_of(5) {
        RegionKey::new(Some(&format!("Province {i:03}")), &format!("Federation {}", i / 50)).unwrap()
    } else {
        RegionKey::country(&format!("Country {i:03}"))
    }
}

/// Deterministic fixture of `n_regions` outbreaks over `n_dates` days.
pub fn synthetic_dataset(n_regions: usize, n_dates: usize) -> Dataset {
    let regions = (0..n_regions)
        .map(|i| {
            let capacity = 2_000.0 + ((i * 7919) % 97) as f64 * 1_500.0;
            let rate = 0.05 + (i % 11) as f64 * 0.01;
            let midpoint = 45.0 + ((i * 31) % 70) as f64;
            let ripple = 0.005 * (i % 3) as f64;
            RegionSeries::new(region_key(i), start_date(), outbreak(capacity, rate, midpoint, ripple, n_dates))
        })
        .collect();
    Dataset::new(regions).unwrap()
}

pub fn write_long(dataset: &Dataset, path: &Path) {
    let file = std::fs::File::create(path).unwrap();
    write_long_csv(dataset, file).unwrap();
}

pub fn write_wide(dataset: &Dataset, path: &Path) {
    let file = std::fs::File::create(path).unwrap();
    write_wide_csv(dataset, file).unwrap();
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// All files under `dir`, relative path plus contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
