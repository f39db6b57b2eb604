//! Reading and writing the two published CSV layouts.
//!
//! Long layout: one row per `(region, date)` with `ObservationDate`
//! (`MM/DD/YYYY`), `Province/State`, `Country/Region` and `Confirmed`; any
//! other column is ignored. Wide layout: one row per region with
//! `Province/State, Country/Region, Lat, Long` followed by `M/D/YY` date
//! columns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use spreadcast_core::data::{Dataset, RegionKey, RegionSeries};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    #[default]
    Long,
    Wide,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" => Ok(Layout::Long),
            "wide" => Ok(Layout::Wide),
            other => Err(Error::Usage(format!("unknown layout `{other}`, expected long or wide"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Long => "long",
            Layout::Wide => "wide",
        })
    }
}

/// Only the listed regions are kept and validated; `None` keeps everything.
pub type RegionFilter<'a> = Option<&'a [RegionKey]>;

pub fn read_dataset(path: &Path, layout: Layout, filter: RegionFilter<'_>) -> Result<Dataset> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::InputNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    match layout {
        Layout::Long => ingest_long_csv(file, path, filter),
        Layout::Wide => ingest_wide_csv(file, path, filter),
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(source)
}

fn column(headers: &csv::StringRecord, name: &str, origin: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim_start_matches('\u{feff}') == name)
        .ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Whole non-negative counts; `"12.0"` is accepted, `"12.5"` is not.
fn parse_count(field: &str) -> Option<u64> {
    let field = field.trim();
    if let Ok(v) = field.parse::<u64>() {
        return Some(v);
    }
    let v: f64 = field.parse().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 1.8e19).then_some(v as u64)
}

struct Observation {
    date: NaiveDate,
    confirmed: u64,
    line: u64,
}

fn wanted(filter: RegionFilter<'_>) -> Option<BTreeSet<&RegionKey>> {
    filter.map(|keys| keys.iter().collect())
}

fn check_filter_found(filter: RegionFilter<'_>, found: &BTreeSet<RegionKey>, origin: &Path) -> Result<()> {
    let Some(keys) = filter else {
        return Ok(());
    };
    let missing: Vec<String> = keys.iter().filter(|k| !found.contains(*k)).map(|k| k.to_string()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Format {
            path: origin.to_path_buf(),
            message: format!("regions not found in input: {}", missing.join("; ")),
        })
    }
}

fn finish(
    groups: BTreeMap<RegionKey, Vec<Observation>>,
    filter: RegionFilter<'_>,
    origin: &Path,
) -> Result<Dataset> {
    let found: BTreeSet<RegionKey> = groups.keys().cloned().collect();
    check_filter_found(filter, &found, origin)?;
    let mut regions = Vec::with_capacity(groups.len());
    for (key, mut obs) in groups {
        obs.sort_by_key(|o| (o.date, o.line));
        for pair in obs.windows(2) {
            if pair[0].date == pair[1].date {
                return Err(Error::Format {
                    path: origin.to_path_buf(),
                    message: format!(
                        "duplicate observation for {key} on {} at lines {} and {}",
                        pair[0].date.format("%m/%d/%Y"),
                        pair[0].line,
                        pair[1].line
                    ),
                });
            }
        }
        let dates: Vec<NaiveDate> = obs.iter().map(|o| o.date).collect();
        let confirmed: Vec<u64> = obs.iter().map(|o| o.confirmed).collect();
        let series = RegionSeries::from_dated(key, &dates, confirmed).map_err(|e| Error::Format {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        regions.push(series);
    }
    if regions.is_empty() {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            message: "no observations".into(),
        });
    }
    Ok(Dataset::new(regions)?)
}

pub fn ingest_long_csv<R: Read>(source: R, origin: &Path, filter: RegionFilter<'_>) -> Result<Dataset> {
    let mut rdr = reader(source);
    let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
    let c_date = column(&headers, "ObservationDate", origin)?;
    let c_prov = column(&headers, "Province/State", origin)?;
    let c_country = column(&headers, "Country/Region", origin)?;
    let c_conf = column(&headers, "Confirmed", origin)?;
    let wanted = wanted(filter);

    let mut groups: BTreeMap<RegionKey, Vec<Observation>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(Error::csv(origin, e)),
        }
        let line = line_of(&record);
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let key = RegionKey::new(Some(&record[c_prov]), &record[c_country]).map_err(|e| parse_err(e.to_string()))?;
        if wanted.as_ref().is_some_and(|w| !w.contains(&key)) {
            continue;
        }
        let date = NaiveDate::parse_from_str(record[c_date].trim(), "%m/%d/%Y")
            .map_err(|_| parse_err(format!("malformed ObservationDate `{}`", &record[c_date])))?;
        let confirmed = parse_count(&record[c_conf])
            .ok_or_else(|| parse_err(format!("non-numeric Confirmed `{}`", &record[c_conf])))?;
        groups.entry(key).or_default().push(Observation { date, confirmed, line });
    }
    finish(groups, filter, origin)
}

pub fn ingest_wide_csv<R: Read>(source: R, origin: &Path, filter: RegionFilter<'_>) -> Result<Dataset> {
    let mut rdr = reader(source);
    let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
    let expected = ["Province/State", "Country/Region", "Lat", "Long"];
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i).map(|h| h.trim_start_matches('\u{feff}')) != Some(*name) {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: 1,
                message: format!("column {} must be `{name}`", i + 1),
            });
        }
    }
    let mut dates = Vec::with_capacity(headers.len().saturating_sub(4));
    for h in headers.iter().skip(4) {
        let d = NaiveDate::parse_from_str(h.trim(), "%m/%d/%y").map_err(|_| Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: format!("malformed date column `{h}`"),
        })?;
        dates.push(d);
    }
    let wanted = wanted(filter);

    let mut groups: BTreeMap<RegionKey, Vec<Observation>> = BTreeMap::new();
    let mut first_line: BTreeMap<RegionKey, u64> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(Error::csv(origin, e)),
        }
        let line = line_of(&record);
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let key = RegionKey::new(Some(&record[0]), &record[1]).map_err(|e| parse_err(e.to_string()))?;
        if let Some(&prev) = first_line.get(&key) {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                message: format!("duplicate region {key} at lines {prev} and {line}"),
            });
        }
        first_line.insert(key.clone(), line);
        if wanted.as_ref().is_some_and(|w| !w.contains(&key)) {
            continue;
        }
        let mut obs = Vec::with_capacity(dates.len());
        for (field, &date) in record.iter().skip(4).zip(&dates) {
            let confirmed =
                parse_count(field).ok_or_else(|| parse_err(format!("non-numeric count `{field}` for {date}")))?;
            obs.push(Observation { date, confirmed, line });
        }
        groups.insert(key, obs);
    }
    finish(groups, filter, origin)
}

/// Writes the normalised long layout used as the ingest cache.
pub fn write_long_csv<W: Write>(dataset: &Dataset, sink: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["ObservationDate", "Province/State", "Country/Region", "Confirmed"])?;
    for region in dataset.regions() {
        let key = region.key();
        for (date, value) in region.dates().zip(region.confirmed()) {
            w.write_record([
                date.format("%m/%d/%Y").to_string(),
                key.province().to_string(),
                key.country_region.clone(),
                value.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the wide layout. Every region must cover the same dates.
pub fn write_wide_csv<W: Write>(dataset: &Dataset, sink: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    let Some(first) = dataset.regions().first() else {
        return Ok(());
    };
    let mut header = vec!["Province/State".to_string(), "Country/Region".into(), "Lat".into(), "Long".into()];
    header.extend(first.dates().map(|d| d.format("%-m/%-d/%y").to_string()));
    w.write_record(&header)?;
    for region in dataset.regions() {
        let key = region.key();
        let mut row = vec![key.province().to_string(), key.country_region.clone(), "0".into(), "0".into()];
        row.extend(region.confirmed().iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
