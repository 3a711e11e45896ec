//! Run configuration: a flat `key = value` file whose keys carry a section
//! prefix (`model.kappa`, `sim.n_paths`, `quad.phi_max`, ...).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use heston_american::model::parse_kv;
use heston_american::{FieldError, ParamSet, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("expected csv or json, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 50,
            seed: 1,
            antithetic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ParamSet<f64>,
    pub spot: f64,
    pub sim: SimSettings,
    pub quad: QuadratureSpec<f64>,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration:\n{}", list(.0))]
pub struct ConfigError(pub Vec<FieldError>);

fn list(errs: &[FieldError]) -> String {
    errs.iter().map(|e| format!("  {e}\n")).collect()
}

const MODEL_KEYS: [&str; 6] = ["kappa", "theta", "xi", "rho", "v0", "lambda"];
const MARKET_KEYS: [&str; 3] = ["r", "q", "mu"];
const OPTION_KEYS: [&str; 3] = ["strike", "maturity", "kind"];

fn parse_field<T: FromStr>(key: &str, value: &str, errs: &mut Vec<FieldError>) -> Option<T> {
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            errs.push(FieldError::new(key, format!("cannot parse {value:?}")));
            None
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = parse_kv(text).map_err(ConfigError)?;
        let mut errs = Vec::new();
        let mut params: Vec<(String, String)> = Vec::new();
        let mut spot = None;
        let mut sim = SimSettings::default();
        let defaults = QuadratureSpec::<f64>::default();
        let (mut phi_min, mut phi_max, mut n_phi, mut n_time) = (defaults.phi_min, defaults.phi_max, defaults.n_phi, None);
        let mut format = OutputFormat::Json;
        let mut output = None;

        for e in &entries {
            let (section, name) = e.key.split_once('.').unwrap_or(("", e.key.as_str()));
            let key = e.key.as_str();
            let v = e.value.as_str();
            match (section, name) {
                ("model", n) if MODEL_KEYS.contains(&n) => params.push((n.into(), v.into())),
                ("market", "spot") => spot = parse_field::<f64>(key, v, &mut errs),
                ("market", n) if MARKET_KEYS.contains(&n) => params.push((n.into(), v.into())),
                ("option", n) if OPTION_KEYS.contains(&n) => params.push((n.into(), v.into())),
                ("sim", "n_paths") => sim.n_paths = parse_field(key, v, &mut errs).unwrap_or(0),
                ("sim", "n_steps") => sim.n_steps = parse_field(key, v, &mut errs).unwrap_or(0),
                ("sim", "seed") => sim.seed = parse_field(key, v, &mut errs).unwrap_or(0),
                ("sim", "antithetic") => sim.antithetic = parse_field(key, v, &mut errs).unwrap_or(false),
                ("quad", "phi_min") => phi_min = parse_field(key, v, &mut errs).unwrap_or(f64::NAN),
                ("quad", "phi_max") => phi_max = parse_field(key, v, &mut errs).unwrap_or(f64::NAN),
                ("quad", "n_phi") => n_phi = parse_field(key, v, &mut errs).unwrap_or(0),
                ("quad", "n_time") => n_time = parse_field(key, v, &mut errs),
                ("output", "format") => format = parse_field(key, v, &mut errs).unwrap_or(OutputFormat::Json),
                ("output", "path") => output = Some(PathBuf::from(v)),
                _ => errs.push(FieldError::new(key, "unknown key")),
            }
        }

        let params = ParamSet::<f64>::from_pairs(params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        let params = match params {
            Ok(p) => Some(p),
            Err(v) => {
                errs.extend(v.into_iter().map(|e| FieldError::new(qualify(&e.field), e.reason)));
                None
            }
        };
        match spot {
            Some(s) if s > 0.0 && s.is_finite() => {}
            Some(s) => errs.push(FieldError::new("market.spot", format!("must be > 0, got {s}"))),
            None if !errs.iter().any(|e| e.field == "market.spot") => {
                errs.push(FieldError::new("market.spot", "missing"))
            }
            None => {}
        }
        if sim.n_paths < 1 {
            errs.push(FieldError::new("sim.n_paths", "must be >= 1"));
        }
        if sim.n_steps < 1 {
            errs.push(FieldError::new("sim.n_steps", "must be >= 1"));
        }
        let quad = QuadratureSpec {
            phi_min,
            phi_max,
            n_phi,
            n_time: n_time.unwrap_or((sim.n_steps + 1).max(4)),
        };
        if let Err(heston_american::Error::Invalid(v)) = quad.validate() {
            errs.extend(v.into_iter().map(|e| FieldError::new(format!("quad.{}", e.field), e.reason)));
        }
        dedup(&mut errs);
        match params {
            Some(params) if errs.is_empty() => Ok(Self {
                params,
                spot: spot.unwrap(),
                sim,
                quad,
                format,
                output,
            }),
            _ => Err(ConfigError(errs)),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![FieldError::new(path.display().to_string(), e.to_string())]))?;
        Self::parse(&text)
    }
}

fn qualify(field: &str) -> String {
    if MODEL_KEYS.contains(&field) {
        format!("model.{field}")
    } else if MARKET_KEYS.contains(&field) {
        format!("market.{field}")
    } else if OPTION_KEYS.contains(&field) {
        format!("option.{field}")
    } else {
        field.to_string()
    }
}

fn dedup(errs: &mut Vec<FieldError>) {
    let mut seen: Vec<String> = Vec::new();
    errs.retain(|e| {
        let k = format!("{}|{}", e.field, e.reason);
        if seen.contains(&k) {
            false
        } else {
            seen.push(k);
            true
        }
    });
}
