//! Region series, the per-region min-max scaler, supervised windows and the
//! chronological train/test split.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Default number of past days fed to the sequence model.
pub const DEFAULT_LOOKBACK: usize = 7;
/// Default number of held-out days at the end of each series.
pub const DEFAULT_HORIZON: usize = 14;

/// `(Province/State, Country/Region)`; an empty province is stored as `None`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionKey {
    pub province_state: Option<String>,
    pub country_region: String,
}

impl RegionKey {
    pub fn new(province_state: Option<&str>, country_region: &str) -> Result<Self> {
        if country_region.is_empty() {
            return Err(Error::Data("Country/Region must not be empty".into()));
        }
        Ok(RegionKey {
            province_state: province_state.filter(|p| !p.is_empty()).map(String::from),
            country_region: country_region.into(),
        })
    }

    pub fn country(country_region: &str) -> Self {
        RegionKey {
            province_state: None,
            country_region: country_region.into(),
        }
    }

    pub fn province(&self) -> &str {
        self.province_state.as_deref().unwrap_or("")
    }

    /// Parses `"Country"` or `"Country/Province"`.
    pub fn parse_filter(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((country, province)) => RegionKey::new(Some(province), country),
            None => RegionKey::new(None, s),
        }
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.province_state {
            Some(p) => write!(f, "{}/{}", self.country_region, p),
            None => f.write_str(&self.country_region),
        }
    }
}

/// One region's daily cumulative confirmed counts.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSeries {
    key: RegionKey,
    start: NaiveDate,
    confirmed: Vec<u64>,
}

impl RegionSeries {
    /// Daily series starting at `start`.
    pub fn new(key: RegionKey, start: NaiveDate, confirmed: Vec<u64>) -> Self {
        RegionSeries {
            key,
            start,
            confirmed,
        }
    }

    /// Builds a series from explicit dates, which must be strictly increasing
    /// and consecutive days.
    pub fn from_dated(key: RegionKey, dates: &[NaiveDate], confirmed: Vec<u64>) -> Result<Self> {
        if dates.len() != confirmed.len() {
            return Err(Error::Shape {
                operand: "confirmed",
                expected: dates.len(),
                found: confirmed.len(),
            });
        }
        let Some(&start) = dates.first() else {
            return Err(Error::Data(format!("region {key} has no observations")));
        };
        for pair in dates.windows(2) {
            let gap = (pair[1] - pair[0]).num_days();
            if gap <= 0 {
                return Err(Error::Data(format!(
                    "region {key}: dates not strictly increasing at {}",
                    pair[1]
                )));
            }
            if gap > 1 {
                return Err(Error::Data(format!(
                    "region {key}: missing dates between {} and {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(RegionSeries::new(key, start, confirmed))
    }

    pub fn key(&self) -> &RegionKey {
        &self.key
    }

    pub fn len(&self) -> usize {
        self.confirmed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confirmed.is_empty()
    }

    pub fn confirmed(&self) -> &[u64] {
        &self.confirmed
    }

    pub fn values(&self) -> Vec<f64> {
        self.confirmed.iter().map(|&c| c as f64).collect()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date_at(self.len().saturating_sub(1))
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + chrono::Days::new(index as u64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len()).map(|i| self.date_at(i))
    }

    pub fn last_value(&self) -> Option<u64> {
        self.confirmed.last().copied()
    }

    /// Sub-series `[from, to)` keeping the calendar alignment.
    pub fn slice(&self, from: usize, to: usize) -> RegionSeries {
        RegionSeries {
            key: self.key.clone(),
            start: self.date_at(from),
            confirmed: self.confirmed[from..to].to_vec(),
        }
    }
}

/// Collection of regions with unique keys, ordered by key.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    regions: Vec<RegionSeries>,
    date_span: Option<(NaiveDate, NaiveDate)>,
}

impl Dataset {
    pub fn new(mut regions: Vec<RegionSeries>) -> Result<Self> {
        regions.sort_by(|a, b| a.key.cmp(&b.key));
        for pair in regions.windows(2) {
            if pair[0].key == pair[1].key {
                return Err(Error::Data(format!("duplicate region {}", pair[0].key)));
            }
        }
        if let Some(empty) = regions.iter().find(|r| r.is_empty()) {
            return Err(Error::Data(format!("region {} has no observations", empty.key)));
        }
        let date_span = regions.iter().fold(None, |span, r| {
            let (s, e) = (r.start_date(), r.end_date());
            Some(match span {
                None => (s, e),
                Some((lo, hi)) => (core::cmp::min(lo, s), core::cmp::max(hi, e)),
            })
        });
        Ok(Dataset { regions, date_span })
    }

    pub fn regions(&self) -> &[RegionSeries] {
        &self.regions
    }

    pub fn into_regions(self) -> Vec<RegionSeries> {
        self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn date_span(&self) -> Option<(NaiveDate, NaiveDate)> {
        self.date_span
    }

    /// Number of distinct calendar dates covered by any region.
    pub fn n_dates(&self) -> usize {
        let mut all = BTreeSet::new();
        for r in &self.regions {
            all.extend(r.dates());
        }
        all.len()
    }

    pub fn get(&self, key: &RegionKey) -> Option<&RegionSeries> {
        self.regions
            .binary_search_by(|r| r.key.cmp(key))
            .ok()
            .map(|i| &self.regions[i])
    }

    /// Sum of each region's final cumulative count.
    pub fn total_cases(&self) -> u64 {
        self.regions.iter().filter_map(|r| r.last_value()).sum()
    }

    /// Keeps only the listed regions; unknown keys are an error.
    pub fn filter(&self, keys: &[RegionKey]) -> Result<Dataset> {
        let mut picked = Vec::with_capacity(keys.len());
        let mut missing = Vec::new();
        for key in keys {
            match self.get(key) {
                Some(r) => picked.push(r.clone()),
                None => missing.push(format!("{key}")),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Data(format!("unknown regions: {}", missing.join(", "))));
        }
        Dataset::new(picked)
    }
}

/// Min-max bounds used to map a region's counts onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalerParams {
    pub min_value: f64,
    pub max_value: f64,
}

impl ScalerParams {
    pub fn new(min_value: f64, max_value: f64) -> Result<Self> {
        if !(min_value.is_finite() && max_value.is_finite()) || max_value < min_value {
            return Err(Error::Data(format!(
                "invalid scaler bounds ({min_value}, {max_value})"
            )));
        }
        Ok(ScalerParams {
            min_value,
            max_value,
        })
    }

    pub fn fit(values: &[f64]) -> Result<Self> {
        let first = *values
            .first()
            .ok_or_else(|| Error::Data("cannot fit a scaler on an empty series".into()))?;
        let (lo, hi) = values
            .iter()
            .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        ScalerParams::new(lo, hi)
    }

    pub fn range(&self) -> f64 {
        self.max_value - self.min_value
    }

    /// Degenerate scalers (`max == min`) map everything to 0.
    pub fn scale(&self, v: f64) -> f64 {
        let range = self.range();
        if range > 0.0 {
            (v - self.min_value) / range
        } else {
            0.0
        }
    }

    pub fn unscale(&self, u: f64) -> f64 {
        self.min_value + u * self.range()
    }
}

pub fn fit_scaler(series: &RegionSeries) -> Result<ScalerParams> {
    ScalerParams::fit(&series.values())
}

/// One supervised sample: `lookback` consecutive values and the value after.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: f64,
}

pub fn make_windows(values: &[f64], lookback: usize) -> Result<Vec<Window>> {
    if lookback == 0 {
        return Err(Error::Data("lookback must be at least 1".into()));
    }
    if values.len() < lookback + 1 {
        return Err(Error::InsufficientHistory {
            needed: lookback + 1,
            available: values.len(),
        });
    }
    Ok(values
        .windows(lookback + 1)
        .map(|w| Window {
            input: w[..lookback].to_vec(),
            target: w[lookback],
        })
        .collect())
}

/// Holds out the last `horizon` observations.
pub fn train_test_split(series: &RegionSeries, horizon: usize) -> Result<(RegionSeries, RegionSeries)> {
    if horizon == 0 {
        return Err(Error::Data("horizon must be at least 1".into()));
    }
    if horizon >= series.len() {
        return Err(Error::Data(format!(
            "horizon {horizon} leaves no training data in region {} ({} observations)",
            series.key,
            series.len()
        )));
    }
    let cut = series.len() - horizon;
    Ok((series.slice(0, cut), series.slice(cut, series.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn day(m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, m, d).unwrap()
    }

    fn series(values: &[u64]) -> RegionSeries {
        RegionSeries::new(RegionKey::country("Testland"), day(1, 22), values.to_vec())
    }

    #[test]
    fn region_key_rules() {
        assert!(RegionKey::new(Some("x"), "").is_err());
        assert_eq!(RegionKey::new(Some(""), "A").unwrap().province_state, None);
        let k = RegionKey::parse_filter("Australia/Victoria").unwrap();
        assert_eq!(k.province(), "Victoria");
        assert_eq!(k.country_region, "Australia");
        assert_eq!(RegionKey::parse_filter("Chad").unwrap(), RegionKey::country("Chad"));
    }

    #[test]
    fn dated_series_requires_consecutive_days() {
        let k = RegionKey::country("A");
        assert!(RegionSeries::from_dated(k.clone(), &[day(1, 22), day(1, 23)], vec![1, 2]).is_ok());
        assert!(RegionSeries::from_dated(k.clone(), &[day(1, 22), day(1, 24)], vec![1, 2]).is_err());
        assert!(RegionSeries::from_dated(k.clone(), &[day(1, 23), day(1, 22)], vec![1, 2]).is_err());
        assert!(RegionSeries::from_dated(k, &[day(1, 22)], vec![1, 2]).is_err());
    }

    #[test]
    fn dataset_rejects_duplicate_keys() {
        let a = series(&[1, 2]);
        assert!(Dataset::new(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn scaler_bounds() {
        let p = fit_scaler(&series(&[0, 50, 100])).unwrap();
        assert_eq!((p.min_value, p.max_value), (0.0, 100.0));
        let p = fit_scaler(&series(&[7, 7, 7])).unwrap();
        assert_eq!((p.min_value, p.max_value), (7.0, 7.0));
        let p = fit_scaler(&series(&[3, 9, 1, 9])).unwrap();
        assert_eq!((p.min_value, p.max_value), (1.0, 9.0));
        assert!(fit_scaler(&series(&[])).is_err());
    }

    #[test]
    fn scale_examples() {
        let p = ScalerParams::new(0.0, 100.0).unwrap();
        assert_eq!(p.scale(50.0), 0.5);
        let flat = ScalerParams::new(7.0, 7.0).unwrap();
        assert_eq!(flat.scale(7.0), 0.0);
        let afg = ScalerParams::new(0.0, 16509.0).unwrap();
        assert!((afg.unscale(afg.scale(16509.0)) - 16509.0).abs() < 1e-9);
    }

    #[test]
    fn window_counts() {
        let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(make_windows(&v, 3).unwrap().len(), 7);
        let w = make_windows(&[1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert_eq!(w, vec![Window { input: vec![1.0, 2.0, 3.0], target: 4.0 }]);
        assert!(matches!(
            make_windows(&[1.0, 2.0, 3.0], 3),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn split_examples() {
        let s = series(&[1; 133]);
        let (train, test) = train_test_split(&s, 14).unwrap();
        assert_eq!((train.len(), test.len()), (119, 14));
        assert_eq!(test.start_date(), s.date_at(119));
        let (train, _) = train_test_split(&s, 132).unwrap();
        assert_eq!(train.len(), 1);
        assert!(train_test_split(&s, 0).is_err());
        assert!(train_test_split(&s, 133).is_err());
    }

    proptest! {
        #[test]
        fn scale_round_trip_and_order(lo in -1e6f64..1e6, span in 1e-3f64..1e6, a in -2e6f64..2e6, b in -2e6f64..2e6) {
            let p = ScalerParams::new(lo, lo + span).unwrap();
            prop_assert!((p.unscale(p.scale(a)) - a).abs() <= 1e-9 * (1.0 + a.abs()));
            if a < b {
                prop_assert!(p.scale(a) <= p.scale(b));
            }
        }

        #[test]
        fn split_concatenates_back(values in proptest::collection::vec(0u64..1_000_000, 2..60), h in 1usize..60) {
            let s = series(&values);
            prop_assume!(h < s.len());
            let (train, test) = train_test_split(&s, h).unwrap();
            let mut joined = train.confirmed().to_vec();
            joined.extend_from_slice(test.confirmed());
            prop_assert_eq!(joined, values);
            prop_assert_eq!(train.end_date().succ_opt().unwrap(), test.start_date());
        }
    }
}
