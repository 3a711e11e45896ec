//! American call value as Heston European price plus an early-exercise
//! premium driven by a fitted boundary, and a constant-volatility binomial
//! lattice used as an oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charfn::{probability_pj, probability_pj_capped, Pj, Probability, QuadratureSpec};
use crate::error::{Error, Result};
use crate::lsm::BoundaryCurve;
use crate::model::{MarketParams, ModelParams, OptionKind, OptionSpec};
use crate::scalar::Real;

/// A price split into its European value and early-exercise premium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PriceResult<T> {
    pub price: T,
    #[serde(rename = "european")]
    pub european_part: T,
    #[serde(rename = "premium")]
    pub premium_part: T,
    pub warnings: Vec<String>,
}

fn note<T: Real>(p: &Probability<T>, what: &str, warnings: &mut Vec<String>) {
    if let Some(w) = p.warning() {
        warnings.push(format!("{what}: {w}"));
    }
}

fn check_positive<T: Real>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {x}")))
    }
}

struct European<T> {
    call: T,
    put: T,
    warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn european<T: Real>(
    s: T,
    v: T,
    tau: T,
    k: T,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<European<T>> {
    check_positive("s", s)?;
    check_positive("k", k)?;
    check_positive("tau", tau)?;
    let p1 = probability_pj(Pj::P1, s, v, tau, k, T::zero(), m, mkt, quad)?;
    let p2 = probability_pj(Pj::P2, s, v, tau, k, T::zero(), m, mkt, quad)?;
    let mut warnings = Vec::new();
    note(&p1, "european P1", &mut warnings);
    note(&p2, "european P2", &mut warnings);
    let fwd = s * (-mkt.q() * tau).exp();
    let pv_k = k * (-mkt.r() * tau).exp();
    Ok(European {
        call: fwd * p1.value - pv_k * p2.value,
        put: pv_k * (T::one() - p2.value) - fwd * (T::one() - p1.value),
        warnings,
    })
}

/// `s e^{-q tau} P1 - k e^{-r tau} P2`.
#[allow(clippy::too_many_arguments)]
pub fn european_call_heston<T: Real>(
    s: T,
    v: T,
    tau: T,
    k: T,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    Ok(european(s, v, tau, k, m, mkt, quad)?.call)
}

/// Put from the same `P_j`, so put-call parity holds to rounding.
#[allow(clippy::too_many_arguments)]
pub fn european_put_heston<T: Real>(
    s: T,
    v: T,
    tau: T,
    k: T,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    Ok(european(s, v, tau, k, m, mkt, quad)?.put)
}

const PREMIUM_PHI_CAP_FACTOR: f64 = 20.0;

/// Shortest horizon at which the premium integrand is evaluated; the
/// exercise probabilities degenerate to a step function at zero.
fn endpoint_horizon<T: Real>(tau: T) -> T {
    T::lit(1e-6).max(tau / T::lit(1e3))
}

#[allow(clippy::too_many_arguments)]
fn premium<T: Real>(
    s: T,
    v: T,
    tau: T,
    opt: &OptionSpec<T>,
    boundary: &BoundaryCurve<T>,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<(T, Vec<String>)> {
    if opt.kind() != OptionKind::Call || boundary.kind() != OptionKind::Call {
        return Err(Error::Unsupported(
            "the semi-analytic premium is available for calls only".into(),
        ));
    }
    if boundary.strike() != opt.strike() {
        return Err(Error::invalid(
            "boundary",
            format!("fitted for strike {}, option strike {}", boundary.strike(), opt.strike()),
        ));
    }
    check_positive("s", s)?;
    check_positive("tau", tau)?;
    let mut warnings = Vec::new();
    let taus = boundary.taus();
    let spacing = if taus.len() > 1 {
        taus[taus.len() - 1] - taus[taus.len() - 2]
    } else {
        T::zero()
    };
    let reach = boundary.max_tau() + spacing;
    if tau > reach * (T::one() + T::lit(1e-9)) {
        warnings.push(format!(
            "boundary held flat from its last knot tau={} out to tau={tau}",
            boundary.max_tau()
        ));
    }
    quad.validate()?;

    let (r, q, k) = (mkt.r(), mkt.q(), opt.strike());
    // Short-horizon nodes carry weight at most step * (q s + r K), so their
    // phi grid is extended less far than a standalone probability's.
    let cap = quad.phi_max * T::lit(PREMIUM_PHI_CAP_FACTOR);
    let n = quad.n_time;
    let step = tau / T::from_usize(n - 1).unwrap();
    let nodes: Vec<Result<(T, Vec<String>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            // xi = time to maturity at which the boundary is crossed,
            // u = tau - xi the horizon until then.
            let xi = if i == n - 1 { tau } else { step * T::from_usize(i).unwrap() };
            let u = (tau - xi).max(endpoint_horizon(tau));
            let (b0, b1) = boundary.coefficients_at(xi);
            let k_eff = b0.exp();
            let mut w = Vec::new();
            let p1 = if q > T::zero() {
                let p = probability_pj_capped(Pj::P1, s, v, u, k_eff, -b1, m, mkt, quad, cap)?;
                note(&p, "premium P1", &mut w);
                p.value
            } else {
                T::zero()
            };
            let p2 = probability_pj_capped(Pj::P2, s, v, u, k_eff, -b1, m, mkt, quad, cap)?;
            note(&p2, "premium P2", &mut w);
            let f = q * s * (-q * u).exp() * p1.max(T::zero()) - r * k * (-r * u).exp() * p2.value;
            Ok((f, w))
        })
        .collect();
    let mut total = T::zero();
    for (i, node) in nodes.into_iter().enumerate() {
        let (f, w) = node?;
        let weight = if i == 0 || i == n - 1 { T::lit(0.5) } else { T::one() };
        total = total + weight * f;
        warnings.extend(w);
    }
    warnings.dedup();
    Ok((total * step, warnings))
}

/// Early-exercise premium
/// `int_0^tau q s e^{-q(tau-xi)} P1(s, v, tau-xi, e^{b0(xi)}, -b1(xi)) dxi
///  - int_0^tau r K e^{-r(tau-xi)} P2(s, v, tau-xi, e^{b0(xi)}, -b1(xi)) dxi`
/// by the trapezoid rule on `quad.n_time` nodes.
#[allow(clippy::too_many_arguments)]
pub fn early_exercise_premium<T: Real>(
    s: T,
    v: T,
    tau: T,
    opt: &OptionSpec<T>,
    boundary: &BoundaryCurve<T>,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    Ok(premium(s, v, tau, opt, boundary, m, mkt, quad)?.0)
}

/// American call at spot `s`, variance `v` and time to maturity `tau`.
///
/// Without a boundary (no exercise region was found) the premium is zero
/// and a warning says so. The price is floored at intrinsic value; when
/// the floor binds the premium absorbs the difference and a warning is
/// recorded.
#[allow(clippy::too_many_arguments)]
pub fn american_call<T: Real>(
    s: T,
    v: T,
    tau: T,
    opt: &OptionSpec<T>,
    boundary: Option<&BoundaryCurve<T>>,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<PriceResult<T>> {
    if opt.kind() != OptionKind::Call {
        return Err(Error::Unsupported(
            "semi-analytic pricing is available for calls only; price puts by least squares".into(),
        ));
    }
    let eu = european(s, v, tau, opt.strike(), m, mkt, quad)?;
    let mut warnings = eu.warnings;
    let premium_part = match boundary {
        Some(b) => {
            let (p, w) = premium(s, v, tau, opt, b, m, mkt, quad)?;
            warnings.extend(w);
            p
        }
        None => {
            warnings.push("no early exercise boundary: priced as European".into());
            T::zero()
        }
    };
    let european_part = eu.call;
    let intrinsic = opt.intrinsic(s);
    let mut result = PriceResult {
        price: european_part + premium_part,
        european_part,
        premium_part,
        warnings,
    };
    if result.price < intrinsic {
        result.warnings.push(format!(
            "intrinsic floor bound: pre-floor price {} below intrinsic {}",
            result.price, intrinsic
        ));
        result.premium_part = intrinsic - european_part;
        result.price = european_part + result.premium_part;
    }
    Ok(result)
}

struct Lattice<T> {
    up: T,
    down: T,
    p: T,
    disc: T,
}

fn lattice<T: Real>(sigma: T, maturity: T, mkt: &MarketParams<T>, n: usize) -> Lattice<T> {
    let dt = maturity / T::from_usize(n).unwrap();
    let sd = sigma * dt.sqrt();
    let growth = ((mkt.r() - mkt.q()) * dt).exp();
    let (mut up, mut down) = (sd.exp(), (-sd).exp());
    let mut p = (growth - down) / (up - down);
    if !(p >= T::zero() && p <= T::one()) {
        // Drift outruns the volatility step; centre the lattice on the forward.
        let mu = (mkt.r() - mkt.q()) * dt;
        up = (mu + sd).exp();
        down = (mu - sd).exp();
        p = (growth - down) / (up - down);
    }
    Lattice {
        up,
        down,
        p,
        disc: (-mkt.r() * dt).exp(),
    }
}

fn lattice_price<T: Real>(
    s: T,
    sigma: T,
    opt: &OptionSpec<T>,
    mkt: &MarketParams<T>,
    n_levels: usize,
    american: bool,
) -> Result<T> {
    check_positive("s", s)?;
    check_positive("sigma", sigma)?;
    if n_levels < 1 {
        return Err(Error::invalid("n_levels", "must be >= 1"));
    }
    let lat = lattice(sigma, opt.maturity(), mkt, n_levels);
    let (ln_u, ln_d) = (lat.up.ln(), lat.down.ln());
    let node = |level: usize, ups: usize| -> T {
        s * (T::from_usize(ups).unwrap() * ln_u + T::from_usize(level - ups).unwrap() * ln_d).exp()
    };
    let mut values: Vec<T> = (0..=n_levels).map(|j| opt.intrinsic(node(n_levels, j))).collect();
    let q = T::one() - lat.p;
    for level in (0..n_levels).rev() {
        for j in 0..=level {
            let cont = lat.disc * (lat.p * values[j + 1] + q * values[j]);
            values[j] = if american {
                cont.max(opt.intrinsic(node(level, j)))
            } else {
                cont
            };
        }
    }
    Ok(values[0])
}

/// Cox-Ross-Rubinstein lattice with continuous dividend yield and early
/// exercise at every node. `n_levels` of at least 100 is recommended.
pub fn binomial_american<T: Real>(
    s: T,
    sigma: T,
    opt: &OptionSpec<T>,
    mkt: &MarketParams<T>,
    n_levels: usize,
) -> Result<T> {
    lattice_price(s, sigma, opt, mkt, n_levels, true)
}

/// The same lattice without early exercise.
pub fn binomial_european<T: Real>(
    s: T,
    sigma: T,
    opt: &OptionSpec<T>,
    mkt: &MarketParams<T>,
    n_levels: usize,
) -> Result<T> {
    lattice_price(s, sigma, opt, mkt, n_levels, false)
}
