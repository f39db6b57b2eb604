//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are skipped. Region lists are
//! separated by `;` because region names may contain commas. Per-region NRM
//! capacities use `nrm.capacity[Country/Province]=value`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spreadcast_core::data::{RegionKey, DEFAULT_HORIZON, DEFAULT_LOOKBACK};
use spreadcast_core::dspm::DspmHyper;
use spreadcast_core::evaluation::ModelKind;
use spreadcast_core::nrm::NrmConfig;
use spreadcast_core::svr::{Kernel, SvrHyper};

use crate::error::{Error, Result};
use crate::ingest::Layout;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub layout: Layout,
    pub models: Vec<ModelKind>,
    pub horizon: usize,
    pub lookback: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub regions: Option<Vec<RegionKey>>,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub dspm: DspmHyper,
    pub nrm: NrmConfig,
    pub svr: SvrHyper,
    /// Remembered separately so switching kernels keeps the width.
    pub svr_gamma: f64,
    pub capacities: BTreeMap<RegionKey, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            layout: Layout::Long,
            models: ModelKind::ALL.to_vec(),
            horizon: DEFAULT_HORIZON,
            lookback: DEFAULT_LOOKBACK,
            seed: DEFAULT_SEED,
            out: PathBuf::from("out"),
            regions: None,
            workers: 0,
            dspm: DspmHyper::default(),
            nrm: NrmConfig::default(),
            svr: SvrHyper::default(),
            svr_gamma: Kernel::DEFAULT_GAMMA,
            capacities: BTreeMap::new(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Usage(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

pub fn parse_models(value: &str) -> Result<Vec<ModelKind>> {
    let mut models = Vec::new();
    for name in value.split(',').filter(|s| !s.trim().is_empty()) {
        let m = ModelKind::parse(name)
            .ok_or_else(|| Error::Usage(format!("unknown model `{}`, expected dspm, nrm or svr", name.trim())))?;
        if !models.contains(&m) {
            models.push(m);
        }
    }
    if models.is_empty() {
        return Err(Error::Usage("models must name at least one of dspm, nrm, svr".into()));
    }
    models.sort();
    Ok(models)
}

pub fn parse_regions(value: &str) -> Result<Vec<RegionKey>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| RegionKey::parse_filter(s).map_err(|e| Error::Usage(e.to_string())))
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::InputNotFound(path.to_path_buf()))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut cfg = RunConfig::default();
        cfg.merge_text(&text, path)?;
        Ok(cfg)
    }

    pub fn merge_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i as u64 + 1,
                message: format!("expected key=value, found `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(region) = key.strip_prefix("nrm.capacity[").and_then(|r| r.strip_suffix(']')) {
            let region = RegionKey::parse_filter(region).map_err(|e| Error::Usage(e.to_string()))?;
            self.capacities.insert(region, parse_value(key, value)?);
            return Ok(());
        }
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "layout" => self.layout = value.parse()?,
            "models" => self.models = parse_models(value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "lookback" => self.lookback = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "regions" => {
                let regions = parse_regions(value)?;
                self.regions = (!regions.is_empty()).then_some(regions);
            }
            "workers" => self.workers = parse_value(key, value)?,
            // informational, written into manifests
            "version" => {}
            "dspm.stack_depth" => self.dspm.stack_depth = parse_value(key, value)?,
            "dspm.hidden_size" => self.dspm.hidden_size = parse_value(key, value)?,
            "dspm.epochs" => self.dspm.epochs = parse_value(key, value)?,
            "dspm.learning_rate" => self.dspm.learning_rate = parse_value(key, value)?,
            "nrm.n_changepoints" => self.nrm.n_changepoints = parse_value(key, value)?,
            "nrm.changepoint_range" => self.nrm.changepoint_range = parse_value(key, value)?,
            "nrm.cap_multiplier" => self.nrm.cap_multiplier = parse_value(key, value)?,
            "nrm.capacity" => {
                self.nrm.capacity = if value.is_empty() { None } else { Some(parse_value(key, value)?) }
            }
            "nrm.l1_penalty" => self.nrm.l1_penalty = parse_value(key, value)?,
            "nrm.max_iterations" => self.nrm.max_iterations = parse_value(key, value)?,
            "nrm.tolerance" => self.nrm.tolerance = parse_value(key, value)?,
            "nrm.seasonality" => self.nrm.seasonality_enabled = parse_bool(key, value)?,
            "nrm.seasonal_order" => self.nrm.seasonal_order = parse_value(key, value)?,
            "nrm.seasonal_period" => self.nrm.seasonal_period = parse_value(key, value)?,
            "svr.kernel" => {
                self.svr.kernel = match value.to_ascii_lowercase().as_str() {
                    "linear" => Kernel::Linear,
                    "rbf" => Kernel::Rbf { gamma: self.svr_gamma },
                    _ => return Err(Error::Usage(format!("unknown kernel `{value}`, expected linear or rbf"))),
                }
            }
            "svr.gamma" => {
                self.svr_gamma = parse_value(key, value)?;
                if let Kernel::Rbf { gamma } = &mut self.svr.kernel {
                    *gamma = self.svr_gamma;
                }
            }
            "svr.c_reg" => self.svr.c_reg = parse_value(key, value)?,
            "svr.epsilon_tube" => self.svr.epsilon_tube = parse_value(key, value)?,
            "svr.max_passes" => self.svr.max_passes = parse_value(key, value)?,
            "svr.tolerance" => self.svr.tolerance = parse_value(key, value)?,
            _ => return Err(Error::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Usage("horizon must be at least 1".into()));
        }
        if self.lookback == 0 {
            return Err(Error::Usage("lookback must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Usage("at least one model must be selected".into()));
        }
        self.dspm_hyper().validate()?;
        self.nrm_config(None).validate()?;
        self.svr_hyper().validate()?;
        Ok(())
    }

    pub fn dspm_hyper(&self) -> DspmHyper {
        DspmHyper {
            lookback: self.lookback,
            seed: self.seed,
            ..self.dspm
        }
    }

    /// Per-region capacity overrides win over the global one.
    pub fn nrm_config(&self, region: Option<&RegionKey>) -> NrmConfig {
        let capacity = region
            .and_then(|r| self.capacities.get(r).copied())
            .or(self.nrm.capacity);
        NrmConfig {
            capacity,
            seed: self.seed,
            ..self.nrm
        }
    }

    pub fn svr_hyper(&self) -> SvrHyper {
        SvrHyper {
            seed: self.seed,
            ..self.svr
        }
    }

    /// Every setting as `key=value` lines; feeding the text back through
    /// [`RunConfig::merge_text`] reproduces this configuration.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("version", format!("spreadcast {}", env!("CARGO_PKG_VERSION")));
        put("input", self.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("layout", self.layout.to_string());
        put("models", self.models.iter().map(|m| m.slug()).collect::<Vec<_>>().join(","));
        put("horizon", self.horizon.to_string());
        put("lookback", self.lookback.to_string());
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());
        put(
            "regions",
            self.regions
                .as_ref()
                .map(|r| r.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
        );
        put("workers", self.workers.to_string());
        put("dspm.stack_depth", self.dspm.stack_depth.to_string());
        put("dspm.hidden_size", self.dspm.hidden_size.to_string());
        put("dspm.epochs", self.dspm.epochs.to_string());
        put("dspm.learning_rate", format!("{:?}", self.dspm.learning_rate));
        put("nrm.n_changepoints", self.nrm.n_changepoints.to_string());
        put("nrm.changepoint_range", format!("{:?}", self.nrm.changepoint_range));
        put("nrm.cap_multiplier", format!("{:?}", self.nrm.cap_multiplier));
        put("nrm.capacity", self.nrm.capacity.map(|c| format!("{c:?}")).unwrap_or_default());
        for (region, c) in &self.capacities {
            put(&format!("nrm.capacity[{region}]"), format!("{c:?}"));
        }
        put("nrm.l1_penalty", format!("{:?}", self.nrm.l1_penalty));
        put("nrm.max_iterations", self.nrm.max_iterations.to_string());
        put("nrm.tolerance", format!("{:?}", self.nrm.tolerance));
        put("nrm.seasonality", self.nrm.seasonality_enabled.to_string());
        put("nrm.seasonal_order", self.nrm.seasonal_order.to_string());
        put("nrm.seasonal_period", format!("{:?}", self.nrm.seasonal_period));
        put(
            "svr.kernel",
            match self.svr.kernel {
                Kernel::Linear => "linear".into(),
                Kernel::Rbf { .. } => "rbf".into(),
            },
        );
        put("svr.gamma", format!("{:?}", self.svr_gamma));
        put("svr.c_reg", format!("{:?}", self.svr.c_reg));
        put("svr.epsilon_tube", format!("{:?}", self.svr.epsilon_tube));
        put("svr.max_passes", self.svr.max_passes.to_string());
        put("svr.tolerance", format!("{:?}", self.svr.tolerance));
        s
    }
}
