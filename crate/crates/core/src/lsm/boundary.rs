use serde::{Deserialize, Serialize};

use super::{LsmResult, RegressionFit};
use crate::error::{Error, Result};
use crate::model::{params_hash, MarketParams, ModelParams, OptionKind, OptionSpec};
use crate::scalar::Real;
use crate::simulate::PathSet;

/// Variance levels probed per exercise date (decile-bin midpoints).
pub const N_VARIANCE_LEVELS: usize = 10;
/// In-the-money paths a variance bin needs before its level is used.
pub const MIN_BACKING_PATHS: usize = 100;

const STRIKE_OFFSET: f64 = 1e-6;
const BISECT_RTOL: f64 = 1e-8;
const SCAN_SEEDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalPrice<T> {
    Bounded(T),
    /// Continuation dominates intrinsic on the whole search interval.
    Unbounded,
}

impl<T: Copy> CriticalPrice<T> {
    pub fn bounded(self) -> Option<T> {
        match self {
            CriticalPrice::Bounded(s) => Some(s),
            CriticalPrice::Unbounded => None,
        }
    }
}

/// Critical asset price at one variance level.
///
/// For a call, the smallest `s` in `[K(1 + 1e-6), far_end]` with
/// `intrinsic(s) >= continuation(s, v)`; for a put, the largest such `s` in
/// `[far_end, K(1 - 1e-6)]`. The interval is scanned with 64 equispaced
/// seeds starting at the strike side, and the first sign change is refined
/// by bisection to a relative width of 1e-8.
pub fn critical_price<T: Real>(
    fit: &RegressionFit<T>,
    v_level: T,
    opt: &OptionSpec<T>,
    far_end: T,
) -> Result<CriticalPrice<T>> {
    if fit.degenerate {
        return Err(Error::invalid("fit", "degenerate regression"));
    }
    if !(v_level >= T::zero()) {
        return Err(Error::invalid("v_level", format!("must be >= 0, got {v_level}")));
    }
    let k = opt.strike();
    let near = match opt.kind() {
        OptionKind::Call => k * (T::one() + T::lit(STRIKE_OFFSET)),
        OptionKind::Put => k * (T::one() - T::lit(STRIKE_OFFSET)),
    };
    let ok = match opt.kind() {
        OptionKind::Call => far_end > near,
        OptionKind::Put => far_end < near && far_end > T::zero(),
    };
    if !ok {
        return Err(Error::invalid(
            "cap",
            format!("search end {far_end} is on the wrong side of strike {k}"),
        ));
    }
    let gap = |s: T| opt.intrinsic(s) - fit.continuation(s, v_level);
    if gap(near) >= T::zero() {
        return Ok(CriticalPrice::Bounded(near));
    }
    let step = (far_end - near) / T::from_usize(SCAN_SEEDS - 1).unwrap();
    let mut prev = near;
    for i in 1..SCAN_SEEDS {
        let s = if i == SCAN_SEEDS - 1 {
            far_end
        } else {
            near + step * T::from_usize(i).unwrap()
        };
        if gap(s) >= T::zero() {
            // prev: hold region, s: exercise region
            let (mut hold, mut exercise) = (prev, s);
            while (exercise - hold).abs() > T::lit(BISECT_RTOL) * exercise.abs() {
                let mid = (hold + exercise) * T::lit(0.5);
                if gap(mid) >= T::zero() {
                    exercise = mid;
                } else {
                    hold = mid;
                }
            }
            return Ok(CriticalPrice::Bounded(exercise));
        }
        prev = s;
    }
    Ok(CriticalPrice::Unbounded)
}

/// Critical prices found at one exercise date.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPointCloud<T> {
    pub step_index: usize,
    /// Time to maturity at this date.
    pub tau: T,
    /// `(v_level, critical_price)`; duplicated levels are kept.
    pub points: Vec<(T, T)>,
    pub unbounded_levels: Vec<T>,
}

impl<T: Real> BoundaryPointCloud<T> {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distinct_levels(&self) -> usize {
        let mut v: Vec<T> = self.points.iter().map(|p| p.0).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v.len()
    }
}

fn quantile<T: Real>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * w
}

/// Probes the fitted continuation surface at each exercise date.
///
/// Variance levels are the midpoints (5%, 15%, ..., 95% quantiles) of the
/// ten decile bins of the simulated variance at that date; a level is used
/// only when its bin holds at least [`MIN_BACKING_PATHS`] in-the-money
/// paths. The search runs out to the most extreme simulated price at the
/// date. A date with fewer than two bounded levels yields an empty cloud.
pub fn extract_boundary<T: Real>(
    paths: &PathSet<T>,
    lsm: &LsmResult<T>,
    opt: &OptionSpec<T>,
) -> Result<Vec<BoundaryPointCloud<T>>> {
    let t_mat = paths.maturity();
    let mut clouds = Vec::with_capacity(lsm.fits.len());
    for fit in &lsm.fits {
        let k = fit.step_index;
        let tau = t_mat - paths.times()[k];
        let mut cloud = BoundaryPointCloud {
            step_index: k,
            tau,
            points: Vec::new(),
            unbounded_levels: Vec::new(),
        };
        if fit.degenerate {
            clouds.push(cloud);
            continue;
        }
        let prices = paths.prices_at(k);
        let vars = paths.variances_at(k);
        let mut sorted = vars.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let itm_vars: Vec<T> = prices
            .iter()
            .zip(&vars)
            .filter(|(s, _)| opt.intrinsic(**s) > T::zero())
            .map(|(_, v)| *v)
            .collect();
        let far_end = match opt.kind() {
            OptionKind::Call => prices.iter().fold(T::zero(), |a, &b| a.max(b)),
            OptionKind::Put => prices.iter().fold(T::infinity(), |a, &b| a.min(b)),
        };
        let searchable = match opt.kind() {
            OptionKind::Call => far_end > opt.strike() * (T::one() + T::lit(STRIKE_OFFSET)),
            OptionKind::Put => far_end < opt.strike() * (T::one() - T::lit(STRIKE_OFFSET)),
        };

        for b in 0..N_VARIANCE_LEVELS {
            let lo = quantile(&sorted, b as f64 / N_VARIANCE_LEVELS as f64);
            let hi = quantile(&sorted, (b + 1) as f64 / N_VARIANCE_LEVELS as f64);
            let backing = itm_vars.iter().filter(|&&v| v >= lo && v <= hi).count();
            if backing < MIN_BACKING_PATHS {
                continue;
            }
            let level = quantile(&sorted, (b as f64 + 0.5) / N_VARIANCE_LEVELS as f64);
            let cp = if searchable {
                critical_price(fit, level, opt, far_end)?
            } else {
                CriticalPrice::Unbounded
            };
            match cp {
                CriticalPrice::Bounded(s) => cloud.points.push((level, s)),
                CriticalPrice::Unbounded => cloud.unbounded_levels.push(level),
            }
        }
        if cloud.points.len() < 2 {
            cloud.unbounded_levels.extend(cloud.points.drain(..).map(|p| p.0));
        }
        clouds.push(cloud);
    }
    Ok(clouds)
}

/// Piecewise-linear, in time to maturity, coefficients of
/// `ln b(V, tau) = b0(tau) + b1(tau) V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryCurve<T> {
    taus: Vec<T>,
    b0: Vec<T>,
    b1: Vec<T>,
    strike: T,
    kind: OptionKind,
    params_hash: String,
}

impl<T: Real> BoundaryCurve<T> {
    pub fn new(taus: Vec<T>, b0: Vec<T>, b1: Vec<T>, strike: T, kind: OptionKind, params_hash: String) -> Result<Self> {
        let c = Self {
            taus,
            b0,
            b1,
            strike,
            kind,
            params_hash,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.taus.len() != self.b0.len() || self.taus.len() != self.b1.len() {
            return Err(Error::invalid("taus/b0/b1", "lengths must be equal and non-zero"));
        }
        if self.taus[0] < T::zero() || self.taus.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("taus", "must be non-negative and strictly increasing"));
        }
        if self.b0.iter().chain(&self.b1).any(|x| !x.is_finite()) {
            return Err(Error::invalid("b0/b1", "must be finite"));
        }
        if !(self.strike > T::zero()) {
            return Err(Error::invalid("strike", "must be > 0"));
        }
        Ok(())
    }

    pub fn taus(&self) -> &[T] {
        &self.taus
    }
    pub fn b0(&self) -> &[T] {
        &self.b0
    }
    pub fn b1(&self) -> &[T] {
        &self.b1
    }
    pub fn strike(&self) -> T {
        self.strike
    }
    pub fn kind(&self) -> OptionKind {
        self.kind
    }
    pub fn params_hash(&self) -> &str {
        &self.params_hash
    }
    pub fn max_tau(&self) -> T {
        *self.taus.last().unwrap()
    }

    /// `(b0(tau), b1(tau))`, linear between knots, constant outside them.
    pub fn coefficients_at(&self, tau: T) -> (T, T) {
        let t = &self.taus;
        let n = t.len();
        if n == 1 || tau <= t[0] {
            return (self.b0[0], self.b1[0]);
        }
        if tau >= t[n - 1] {
            return (self.b0[n - 1], self.b1[n - 1]);
        }
        let i = t.partition_point(|&x| x <= tau) - 1;
        let w = (tau - t[i]) / (t[i + 1] - t[i]);
        (
            self.b0[i] + (self.b0[i + 1] - self.b0[i]) * w,
            self.b1[i] + (self.b1[i + 1] - self.b1[i]) * w,
        )
    }

    /// `b(v, tau) = exp(b0(tau) + v b1(tau))`.
    pub fn eval(&self, v: T, tau: T) -> T {
        let (b0, b1) = self.coefficients_at(tau);
        (b0 + v * b1).exp()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

/// Exercise boundary at expiry: `max(K, rK/q)` for calls, `min(K, rK/q)`
/// for puts. `None` when early exercise is never optimal (calls with
/// `q = 0`, puts with `r = 0`).
fn expiry_anchor<T: Real>(opt: &OptionSpec<T>, mkt: &MarketParams<T>) -> Option<T> {
    let k = opt.strike();
    match opt.kind() {
        OptionKind::Call if mkt.q() > T::zero() => Some(k.max(mkt.r() * k / mkt.q())),
        OptionKind::Put if mkt.r() > T::zero() => Some(if mkt.q() > T::zero() {
            k.min(mkt.r() * k / mkt.q())
        } else {
            k
        }),
        _ => None,
    }
}

/// Per-date least squares of `ln S*` on `[1, V]`, plus the analytic knot at
/// `tau = 0`. A date whose points share one variance level gets `b1 = 0`.
pub fn fit_boundary<T: Real>(
    clouds: &[BoundaryPointCloud<T>],
    opt: &OptionSpec<T>,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
) -> Result<BoundaryCurve<T>> {
    let anchor = expiry_anchor(opt, mkt).ok_or(Error::NoExerciseRegion)?;
    let mut knots: Vec<(T, T, T)> = Vec::new();
    for cloud in clouds.iter().filter(|c| !c.is_empty()) {
        let n = T::from_usize(cloud.points.len()).unwrap();
        let v_bar = cloud.points.iter().fold(T::zero(), |a, p| a + p.0) / n;
        let y_bar = cloud.points.iter().fold(T::zero(), |a, p| a + p.1.ln()) / n;
        let (b0, b1) = if cloud.distinct_levels() < 2 {
            (y_bar, T::zero())
        } else {
            let (sxy, sxx) = cloud.points.iter().fold((T::zero(), T::zero()), |(sxy, sxx), p| {
                let dv = p.0 - v_bar;
                (sxy + dv * (p.1.ln() - y_bar), sxx + dv * dv)
            });
            let b1 = sxy / sxx;
            (y_bar - b1 * v_bar, b1)
        };
        if cloud.tau > T::zero() {
            knots.push((cloud.tau, b0, b1));
        }
    }
    if knots.is_empty() {
        return Err(Error::NoExerciseRegion);
    }
    knots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    knots.dedup_by(|a, b| a.0 == b.0);

    let mut taus = vec![T::zero()];
    let mut b0 = vec![anchor.ln()];
    let mut b1 = vec![T::zero()];
    for (t, c0, c1) in knots {
        taus.push(t);
        b0.push(c0);
        b1.push(c1);
    }
    BoundaryCurve::new(taus, b0, b1, opt.strike(), opt.kind(), params_hash(m, mkt, opt))
}
