//! Versioned text dumps of fitted models.
//!
//! Every file starts with a magic line (`DSPM1`, `NRM1` or `SVR1`) followed by
//! one `key=value` line per field. Numbers use the shortest decimal form that
//! parses back to the identical `f64`; arrays are space separated and may be
//! empty. Keys appear in a fixed order, so identical models give identical
//! bytes.

use std::collections::BTreeMap;
use std::path::Path;

use spreadcast_core::data::ScalerParams;
use spreadcast_core::dspm::DspmModel;
use spreadcast_core::nrm::NrmParams;
use spreadcast_core::svr::{Kernel, SvrModel};

use crate::error::{Error, Result};

pub const DSPM_MAGIC: &str = "DSPM1";
pub const NRM_MAGIC: &str = "NRM1";
pub const SVR_MAGIC: &str = "SVR1";

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn nums(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(" ")
}

struct Dump(String);

impl Dump {
    fn new(magic: &str) -> Self {
        Dump(format!("{magic}\n"))
    }

    fn field(&mut self, key: &str, value: impl AsRef<str>) -> &mut Self {
        self.0.push_str(key);
        self.0.push('=');
        self.0.push_str(value.as_ref());
        self.0.push('\n');
        self
    }
}

/// Parsed `key=value` body with every key required exactly once.
struct Fields<'a> {
    origin: &'a Path,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(text: &'a str, magic: &str, origin: &'a Path) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        if first.trim() != magic {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                message: format!("expected header `{magic}`, found `{first}`"),
            });
        }
        let mut map = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: i as u64 + 2,
                    message: format!("expected key=value, found `{line}`"),
                });
            };
            if map.insert(k.trim(), v.trim()).is_some() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: i as u64 + 2,
                    message: format!("repeated key `{k}`"),
                });
            }
        }
        Ok(Fields { origin, map })
    }

    fn err(&self, message: String) -> Error {
        Error::Format {
            path: self.origin.to_path_buf(),
            message,
        }
    }

    fn raw(&mut self, key: &str) -> Result<&'a str> {
        self.map.remove(key).ok_or_else(|| self.err(format!("missing key `{key}`")))
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| self.err(format!("`{key}` is not a number: `{v}`")))
    }

    fn usize(&mut self, key: &str) -> Result<usize> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| self.err(format!("`{key}` is not a count: `{v}`")))
    }

    fn f64s(&mut self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key)?;
        v.split_whitespace()
            .map(|t| t.parse().map_err(|_| self.err(format!("`{key}` holds a non-number `{t}`"))))
            .collect()
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(self.err(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

/// Parameters follow the flat order: per layer `w_f, w_i, w_c, w_o` row-major
/// then `b_f, b_i, b_c, b_o`, then the head weights and bias.
pub fn write_dspm(model: &DspmModel) -> String {
    let mut d = Dump::new(DSPM_MAGIC);
    d.field("stack_depth", model.stack_depth().to_string())
        .field("hidden_size", model.hidden_size().to_string())
        .field("lookback", model.lookback.to_string())
        .field("scaler_min", num(model.scaler.min_value))
        .field("scaler_max", num(model.scaler.max_value))
        .field("params", nums(&model.to_flat()));
    d.0
}

pub fn read_dspm(text: &str, origin: &Path) -> Result<DspmModel> {
    let mut f = Fields::parse(text, DSPM_MAGIC, origin)?;
    let depth = f.usize("stack_depth")?;
    let hidden = f.usize("hidden_size")?;
    let lookback = f.usize("lookback")?;
    let scaler = ScalerParams::new(f.f64("scaler_min")?, f.f64("scaler_max")?)?;
    let params = f.f64s("params")?;
    f.finish()?;
    if depth == 0 || hidden == 0 || lookback == 0 {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            message: "stack_depth, hidden_size and lookback must be positive".into(),
        });
    }
    let mut model = DspmModel::zeros(depth, hidden, lookback, scaler);
    model.set_flat(&params)?;
    Ok(model)
}

pub fn write_nrm(p: &NrmParams) -> String {
    let mut d = Dump::new(NRM_MAGIC);
    d.field("capacity", num(p.capacity))
        .field("growth_rate", num(p.growth_rate))
        .field("offset", num(p.offset))
        .field("changepoints", nums(&p.changepoints))
        .field("rate_adjustments", nums(&p.rate_adjustments))
        .field("offset_corrections", nums(&p.offset_corrections))
        .field("seasonal_period", num(p.seasonal_period))
        .field("seasonal_order", p.seasonal_order.to_string())
        .field("seasonal_coeffs", nums(&p.seasonal_coeffs));
    d.0
}

pub fn read_nrm(text: &str, origin: &Path) -> Result<NrmParams> {
    let mut f = Fields::parse(text, NRM_MAGIC, origin)?;
    let p = NrmParams {
        capacity: f.f64("capacity")?,
        growth_rate: f.f64("growth_rate")?,
        offset: f.f64("offset")?,
        changepoints: f.f64s("changepoints")?,
        rate_adjustments: f.f64s("rate_adjustments")?,
        offset_corrections: f.f64s("offset_corrections")?,
        seasonal_period: f.f64("seasonal_period")?,
        seasonal_order: f.usize("seasonal_order")?,
        seasonal_coeffs: f.f64s("seasonal_coeffs")?,
    };
    f.finish()?;
    p.check_consistency()?;
    Ok(p)
}

fn kernel_text(k: Kernel) -> String {
    match k {
        Kernel::Linear => "linear".into(),
        Kernel::Rbf { gamma } => format!("rbf {}", num(gamma)),
    }
}

pub fn write_svr(m: &SvrModel) -> String {
    let mut d = Dump::new(SVR_MAGIC);
    d.field("kernel", kernel_text(m.kernel))
        .field("c_reg", num(m.c_reg))
        .field("epsilon_tube", num(m.epsilon_tube))
        .field("bias", num(m.bias))
        .field("input_min", num(m.input_scaler.min_value))
        .field("input_max", num(m.input_scaler.max_value))
        .field("target_min", num(m.target_scaler.min_value))
        .field("target_max", num(m.target_scaler.max_value))
        .field("support_inputs", nums(&m.support_inputs))
        .field("dual_coeffs", nums(&m.dual_coeffs));
    d.0
}

pub fn read_svr(text: &str, origin: &Path) -> Result<SvrModel> {
    let mut f = Fields::parse(text, SVR_MAGIC, origin)?;
    let kernel_raw = f.raw("kernel")?;
    let kernel = match kernel_raw.split_whitespace().collect::<Vec<_>>()[..] {
        ["linear"] => Kernel::Linear,
        ["rbf", g] => Kernel::Rbf {
            gamma: g.parse().map_err(|_| f.err(format!("bad rbf gamma `{g}`")))?,
        },
        _ => return Err(f.err(format!("unknown kernel `{kernel_raw}`"))),
    };
    let m = SvrModel {
        kernel,
        c_reg: f.f64("c_reg")?,
        epsilon_tube: f.f64("epsilon_tube")?,
        bias: f.f64("bias")?,
        input_scaler: ScalerParams::new(f.f64("input_min")?, f.f64("input_max")?)?,
        target_scaler: ScalerParams::new(f.f64("target_min")?, f.f64("target_max")?)?,
        support_inputs: f.f64s("support_inputs")?,
        dual_coeffs: f.f64s("dual_coeffs")?,
    };
    f.finish()?;
    m.check_feasible()?;
    Ok(m)
}
