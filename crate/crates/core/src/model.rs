//! Model, market and contract parameters.
//!
//! Every value here is validated on construction: a `ModelParams` either
//! satisfies its invariants or was never built. Validation reports every
//! offending field at once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, FieldError, Result};
use crate::scalar::Real;

/// Heston dynamics. `xi` is the vol-of-vol, shared by the variance SDE,
/// the pricing equation and the Euler scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    kappa: T,
    theta: T,
    xi: T,
    rho: T,
    v0: T,
    lambda: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(kappa: T, theta: T, xi: T, rho: T, v0: T, lambda: T) -> Result<Self> {
        let mut errs = Vec::new();
        check(&mut errs, "kappa", kappa, kappa > T::zero(), "must be > 0");
        check(&mut errs, "theta", theta, theta > T::zero(), "must be > 0");
        check(&mut errs, "xi", xi, xi >= T::zero(), "must be >= 0");
        check(
            &mut errs,
            "rho",
            rho,
            rho >= -T::one() && rho <= T::one(),
            "must lie in [-1, 1]",
        );
        check(&mut errs, "v0", v0, v0 >= T::zero(), "must be >= 0");
        check(&mut errs, "lambda", lambda, true, "");
        if errs.is_empty() {
            Ok(Self {
                kappa,
                theta,
                xi,
                rho,
                v0,
                lambda,
            })
        } else {
            Err(Error::Invalid(errs))
        }
    }

    /// Risk premium defaults to zero.
    pub fn without_risk_premium(kappa: T, theta: T, xi: T, rho: T, v0: T) -> Result<Self> {
        Self::new(kappa, theta, xi, rho, v0, T::zero())
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }
    pub fn theta(&self) -> T {
        self.theta
    }
    pub fn xi(&self) -> T {
        self.xi
    }
    pub fn rho(&self) -> T {
        self.rho
    }
    pub fn v0(&self) -> T {
        self.v0
    }
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// alpha = kappa * theta.
    pub fn alpha(&self) -> T {
        self.kappa * self.theta
    }

    /// beta = kappa + lambda.
    pub fn beta(&self) -> T {
        self.kappa + self.lambda
    }

    /// Same model started from a different variance level.
    pub fn with_v0(&self, v0: T) -> Result<Self> {
        Self::new(self.kappa, self.theta, self.xi, self.rho, v0, self.lambda)
    }
}

/// Coefficients of the risk-neutral variance drift `alpha - beta * V`.
pub fn derived_coefficients<T: Real>(m: &ModelParams<T>) -> (T, T) {
    (m.alpha(), m.beta())
}

/// True iff `2 kappa theta >= xi^2`. A `false` result is only a warning:
/// the simulator's full truncation keeps the variance usable either way.
pub fn check_feller<T: Real>(m: &ModelParams<T>) -> bool {
    T::lit(2.0) * m.kappa * m.theta >= m.xi * m.xi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams<T> {
    r: T,
    q: T,
    mu: T,
}

impl<T: Real> MarketParams<T> {
    /// `mu` is the physical drift, only used when simulating under the
    /// physical measure.
    pub fn new(r: T, q: T, mu: T) -> Result<Self> {
        let mut errs = Vec::new();
        check(&mut errs, "r", r, r >= T::zero(), "must be >= 0");
        check(&mut errs, "q", q, q >= T::zero(), "must be >= 0");
        check(&mut errs, "mu", mu, true, "");
        if errs.is_empty() {
            Ok(Self { r, q, mu })
        } else {
            Err(Error::Invalid(errs))
        }
    }

    /// Market whose physical drift equals the risk-neutral carry `r - q`.
    pub fn risk_neutral(r: T, q: T) -> Result<Self> {
        Self::new(r, q, r - q)
    }

    pub fn r(&self) -> T {
        self.r
    }
    pub fn q(&self) -> T {
        self.q
    }
    pub fn mu(&self) -> T {
        self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn intrinsic<T: Real>(self, s: T, strike: T) -> T {
        match self {
            OptionKind::Call => (s - strike).max(T::zero()),
            OptionKind::Put => (strike - s).max(T::zero()),
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        })
    }
}

impl FromStr for OptionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" => Ok(OptionKind::Call),
            "put" => Ok(OptionKind::Put),
            other => Err(format!("expected call or put, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec<T> {
    strike: T,
    maturity: T,
    kind: OptionKind,
}

impl<T: Real> OptionSpec<T> {
    pub fn new(strike: T, maturity: T, kind: OptionKind) -> Result<Self> {
        let mut errs = Vec::new();
        check(&mut errs, "strike", strike, strike > T::zero(), "must be > 0");
        check(
            &mut errs,
            "maturity",
            maturity,
            maturity > T::zero(),
            "must be > 0",
        );
        if errs.is_empty() {
            Ok(Self {
                strike,
                maturity,
                kind,
            })
        } else {
            Err(Error::Invalid(errs))
        }
    }

    pub fn call(strike: T, maturity: T) -> Result<Self> {
        Self::new(strike, maturity, OptionKind::Call)
    }

    pub fn put(strike: T, maturity: T) -> Result<Self> {
        Self::new(strike, maturity, OptionKind::Put)
    }

    pub fn strike(&self) -> T {
        self.strike
    }
    pub fn maturity(&self) -> T {
        self.maturity
    }
    pub fn kind(&self) -> OptionKind {
        self.kind
    }

    pub fn intrinsic(&self, s: T) -> T {
        self.kind.intrinsic(s, self.strike)
    }

    pub fn with_maturity(&self, maturity: T) -> Result<Self> {
        Self::new(self.strike, maturity, self.kind)
    }
}

fn check<T: Real>(errs: &mut Vec<FieldError>, field: &str, value: T, ok: bool, reason: &str) {
    if !value.is_finite() {
        errs.push(FieldError::new(field, format!("must be finite, got {value}")));
    } else if !ok {
        errs.push(FieldError::new(field, format!("{reason}, got {value}")));
    }
}

/// Short hex digest identifying a parameter set. Stable across runs and
/// platforms because it hashes the IEEE bit patterns.
pub fn params_hash<T: Real>(m: &ModelParams<T>, mkt: &MarketParams<T>, opt: &OptionSpec<T>) -> String {
    let mut h = Sha256::new();
    for x in [
        m.kappa, m.theta, m.xi, m.rho, m.v0, m.lambda, mkt.r, mkt.q, mkt.mu, opt.strike,
        opt.maturity,
    ] {
        h.update(x.as_f64().to_bits().to_le_bytes());
    }
    h.update(opt.kind.to_string().as_bytes());
    hex::encode(&h.finalize()[..16])
}

/// One `key = value` entry of a flat configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a flat key-value document. `#` starts a comment; blank lines are
/// ignored; duplicate keys are an error.
pub fn parse_kv(text: &str) -> std::result::Result<Vec<KvEntry>, Vec<FieldError>> {
    let mut out: Vec<KvEntry> = Vec::new();
    let mut errs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                let key = k.trim().to_string();
                if out.iter().any(|e| e.key == key) {
                    errs.push(FieldError::new(key, format!("duplicate key on line {}", i + 1)));
                } else {
                    out.push(KvEntry {
                        line: i + 1,
                        key,
                        value: v.trim().to_string(),
                    });
                }
            }
            _ => errs.push(FieldError::new(
                format!("line {}", i + 1),
                format!("expected `key = value`, got {line:?}"),
            )),
        }
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(errs)
    }
}

/// Complete parameter set as read from a flat configuration file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet<T> {
    pub model: ModelParams<T>,
    pub market: MarketParams<T>,
    pub option: OptionSpec<T>,
}

pub const PARAM_KEYS: [&str; 12] = [
    "kappa", "theta", "xi", "rho", "v0", "lambda", "r", "q", "mu", "strike", "maturity", "kind",
];

impl<T: Real> ParamSet<T> {
    /// Builds a parameter set from `(key, value)` pairs using the keys in
    /// [`PARAM_KEYS`]. `lambda` defaults to 0 and `mu` to `r - q`; every
    /// other key is required. Unknown keys are rejected.
    pub fn from_pairs<'a, I>(pairs: I) -> std::result::Result<Self, Vec<FieldError>>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut errs = Vec::new();
        let mut nums: [Option<T>; 11] = [None; 11];
        let mut kind = None;
        for (key, value) in pairs {
            match PARAM_KEYS.iter().position(|k| *k == key) {
                Some(11) => match value.parse::<OptionKind>() {
                    Ok(k) => kind = Some(k),
                    Err(e) => errs.push(FieldError::new("kind", e)),
                },
                Some(i) => match value.parse::<f64>() {
                    Ok(x) => nums[i] = Some(T::lit(x)),
                    Err(_) => errs.push(FieldError::new(key, format!("not a number: {value:?}"))),
                },
                None => errs.push(FieldError::new(key, "unknown key")),
            }
        }
        let mut need = |i: usize| {
            nums[i].unwrap_or_else(|| {
                if !errs.iter().any(|e: &FieldError| e.field == PARAM_KEYS[i]) {
                    errs.push(FieldError::new(PARAM_KEYS[i], "missing"));
                }
                T::nan()
            })
        };
        let (kappa, theta, xi, rho, v0) = (need(0), need(1), need(2), need(3), need(4));
        let (r, q, strike, maturity) = (need(6), need(7), need(9), need(10));
        let lambda = nums[5].unwrap_or(T::zero());
        let mu = nums[8].unwrap_or(r - q);
        if kind.is_none() && !errs.iter().any(|e| e.field == "kind") {
            errs.push(FieldError::new("kind", "missing"));
        }
        // Missing fields are already reported; skip their NaN follow-ups.
        let mut collect = |e: Error| {
            if let Error::Invalid(v) = e {
                for fe in v {
                    if !errs.iter().any(|x| x.field == fe.field) {
                        errs.push(fe);
                    }
                }
            }
        };
        let model = ModelParams::new(kappa, theta, xi, rho, v0, lambda).map_err(&mut collect).ok();
        let market = MarketParams::new(r, q, mu).map_err(&mut collect).ok();
        let option = OptionSpec::new(strike, maturity, kind.unwrap_or(OptionKind::Call))
            .map_err(&mut collect)
            .ok();
        match (model, market, option) {
            (Some(model), Some(market), Some(option)) if errs.is_empty() => Ok(Self {
                model,
                market,
                option,
            }),
            _ => Err(errs),
        }
    }

    pub fn from_kv_str(text: &str) -> std::result::Result<Self, Vec<FieldError>> {
        let entries = parse_kv(text)?;
        Self::from_pairs(entries.iter().map(|e| (e.key.as_str(), e.value.as_str())))
    }
}
