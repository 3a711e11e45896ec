//! Joint transform of (log-price, variance) under the risk-neutral Heston
//! dynamics and the Fourier-inversion exercise probabilities built on it.
//!
//! The transform is exponential-affine,
//! `E[exp(u X_t + w V_t)] = exp(u x + A(t) + B(t) v)` with `u = i phi` and
//! `w = i psi`, where `B` solves `B' = a + b B + c B^2`, `B(0) = w`, and
//! `A' = (r - q) u + alpha B`, `A(0) = 0`, for
//! `a = (u^2 - u)/2`, `b = rho xi u - beta`, `c = xi^2 / 2`.
//!
//! `B` is evaluated as a Moebius map built from `E = exp(-d t)` with
//! `Re d >= 0`, so it is even in `d` and never overflows. The logarithm in
//! `A` is taken of `1 - c Y`, which starts at 1 and follows the principal
//! branch continuously in `t`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{MarketParams, ModelParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfArgs<T> {
    /// Log spot.
    pub x: T,
    /// Current variance.
    pub v: T,
    /// Horizon in years.
    pub tau: T,
    /// Price-transform variable; complex so that `f1` can shift it by `-i`.
    pub phi: Complex<T>,
    /// Variance-transform variable.
    pub psi: T,
}

impl<T: Real> CfArgs<T> {
    pub fn new(x: T, v: T, tau: T, phi: T, psi: T) -> Self {
        Self {
            x,
            v,
            tau,
            phi: Complex::new(phi, T::zero()),
            psi,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau >= T::zero()) {
            return Err(Error::invalid("tau", format!("must be >= 0, got {}", self.tau)));
        }
        if !(self.v >= T::zero()) {
            return Err(Error::invalid("v", format!("must be >= 0, got {}", self.v)));
        }
        Ok(())
    }
}

/// Trapezoid grids for the phi integral and for the time integral of the
/// early-exercise premium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec<T> {
    pub phi_min: T,
    pub phi_max: T,
    pub n_phi: usize,
    pub n_time: usize,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self {
            phi_min: T::lit(1e-8),
            phi_max: T::lit(100.0),
            n_phi: 2000,
            n_time: 51,
        }
    }
}

impl<T: Real> QuadratureSpec<T> {
    pub fn new(phi_min: T, phi_max: T, n_phi: usize, n_time: usize) -> Result<Self> {
        let q = Self {
            phi_min,
            phi_max,
            n_phi,
            n_time,
        };
        q.validate()?;
        Ok(q)
    }

    /// Default phi grid with one time node per exercise date (plus maturity).
    pub fn for_exercise_dates(n_steps: usize) -> Self {
        Self {
            n_time: (n_steps + 1).max(4),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.phi_min > T::zero() && self.phi_min < self.phi_max && self.phi_max.is_finite()) {
            errs.push(crate::FieldError::new(
                "phi_min/phi_max",
                format!("need 0 < phi_min < phi_max, got {} and {}", self.phi_min, self.phi_max),
            ));
        }
        if self.n_phi < 16 {
            errs.push(crate::FieldError::new("n_phi", format!("must be >= 16, got {}", self.n_phi)));
        }
        if self.n_time < 4 {
            errs.push(crate::FieldError::new("n_time", format!("must be >= 4, got {}", self.n_time)));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(errs))
        }
    }
}

fn c<T: Real>(re: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::zero())
}

/// `exp(z) - 1` without cancellation for small `|z|`.
fn expm1<T: Real>(z: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let s = (z.im * half).sin();
    let re = z.re.exp_m1() * z.im.cos() - T::lit(2.0) * s * s;
    let im = z.re.exp() * z.im.sin();
    Complex::new(re, im)
}

/// `ln(1 + z)` without cancellation for small `|z|`.
fn ln_1p<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(1e-4) {
        let z2 = z * z;
        z - z2 * c(0.5) + z2 * z * c(1.0 / 3.0) - z2 * z2 * c(0.25)
    } else {
        (Complex::new(T::one(), T::zero()) + z).ln()
    }
}

/// `(1 - exp(-d t)) / d`, continuous through `d = 0`.
fn one_minus_e_over_d<T: Real>(d: Complex<T>, t: T) -> Complex<T> {
    let dt = d * t;
    if dt.norm() < T::lit(1e-8) {
        Complex::new(t, T::zero()) * (c::<T>(1.0) - dt * c(0.5))
    } else {
        -expm1(-dt) / d
    }
}

/// `(A(t), B(t))` for transform arguments `u`, `w`.
fn affine_exponents<T: Real>(
    u: Complex<T>,
    w: Complex<T>,
    t: T,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
) -> (Complex<T>, Complex<T>) {
    let (alpha, beta) = (m.alpha(), m.beta());
    let xi = m.xi();
    let a = (u * u - u) * c(0.5);
    let carry = u * (mkt.r() - mkt.q()) * t;

    if xi == T::zero() {
        // Linear ODE B' = a - beta B.
        let mb = -beta;
        if beta == T::zero() {
            let b_t = w + a * t;
            let int_b = w * t + a * (t * t * T::lit(0.5));
            return (carry + int_b * alpha, b_t);
        }
        let g = expm1(Complex::new(mb * t, T::zero())) / mb; // (e^{-beta t} - 1)/(-beta)
        let b_t = w + (w * mb + a) * g;
        let int_b = (w + a / mb) * g - a / mb * t;
        return (carry + int_b * alpha, b_t);
    }

    let b = u * (m.rho() * xi) - Complex::new(beta, T::zero());
    let cc = xi * xi * T::lit(0.5);
    let d = (b * b - a * (cc * T::lit(4.0))).sqrt();
    let e = (-d * t).exp();
    let om = one_minus_e_over_d(d, t);
    let two = c::<T>(2.0);
    let one_plus_e = c::<T>(1.0) + e;

    let num = w * one_plus_e + (b * w + a * two) * om;
    let den = one_plus_e - (w * (cc * T::lit(2.0)) + b) * om;
    let b_t = num / den;

    // G = 2a/(d - b) = -(d + b)/(2c); pick the better-conditioned form.
    let dm = d - b;
    let dp = d + b;
    let g = if dm.norm() >= dp.norm() {
        if dm.norm() == T::zero() {
            Complex::new(T::zero(), T::zero())
        } else {
            a * two / dm
        }
    } else {
        -dp / (cc * T::lit(2.0))
    };
    let y = (w - g) * om;
    let log_term = ln_1p(-y * cc) / cc;
    let a_t = carry + (g * t - log_term) * alpha;
    (a_t, b_t)
}

fn finite<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn overflow<T: Real>(args: &CfArgs<T>) -> Error {
    Error::CfOverflow {
        phi_re: args.phi.re.as_f64(),
        phi_im: args.phi.im.as_f64(),
        psi: args.psi.as_f64(),
        tau: args.tau.as_f64(),
    }
}

/// `E[exp(i phi X_tau + i psi V_tau)]` given `X_0 = x`, `V_0 = v`.
pub fn joint_cf_f2<T: Real>(args: &CfArgs<T>, m: &ModelParams<T>, mkt: &MarketParams<T>) -> Result<Complex<T>> {
    args.validate()?;
    let i = Complex::new(T::zero(), T::one());
    let u = i * args.phi;
    let w = Complex::new(T::zero(), args.psi);
    if args.tau == T::zero() {
        let z = (u * args.x + w * args.v).exp();
        return if finite(z) { Ok(z) } else { Err(overflow(args)) };
    }
    let (a_t, b_t) = affine_exponents(u, w, args.tau, m, mkt);
    let z = (u * args.x + a_t + b_t * args.v).exp();
    if finite(z) && finite(a_t) && finite(b_t) {
        Ok(z)
    } else {
        Err(overflow(args))
    }
}

/// Share-measure transform: `exp(-x) exp(-(r-q) tau) f2(phi - i, psi)`.
pub fn f1_from_f2<T: Real>(args: &CfArgs<T>, m: &ModelParams<T>, mkt: &MarketParams<T>) -> Result<Complex<T>> {
    let shifted = CfArgs {
        phi: args.phi - Complex::new(T::zero(), T::one()),
        ..*args
    };
    let f2 = joint_cf_f2(&shifted, m, mkt)?;
    let scale = (-args.x - (mkt.r() - mkt.q()) * args.tau).exp();
    let z = f2 * scale;
    if finite(z) {
        Ok(z)
    } else {
        Err(overflow(args))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pj {
    /// `P_1`, share measure.
    P1,
    /// `P_2`, risk-neutral measure.
    P2,
}

/// An exercise probability together with quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probability<T> {
    /// Clamped to `[0, 1]`.
    pub value: T,
    /// Unclamped quadrature result.
    pub raw: T,
    /// Truncation point actually used (smaller than requested after overflow).
    pub phi_max: T,
}

impl<T: Real> Probability<T> {
    pub const CLAMP_TOLERANCE: f64 = 1e-6;

    pub fn warning(&self) -> Option<String> {
        let tol = T::lit(Self::CLAMP_TOLERANCE);
        let excess = (-self.raw).max(self.raw - T::one());
        let mut parts = Vec::new();
        if excess > tol {
            parts.push(format!("probability {} clamped into [0,1]", self.raw));
        }
        (!parts.is_empty()).then(|| parts.join("; "))
    }
}

/// Expected integrated variance over `[0, tau]` under the risk-neutral
/// drift `alpha - beta V`.
fn expected_total_variance<T: Real>(v: T, tau: T, m: &ModelParams<T>) -> T {
    let beta = m.beta();
    if beta.abs() * tau < T::lit(1e-8) {
        return v * tau + m.alpha() * tau * tau * T::lit(0.5);
    }
    let level = m.alpha() / beta;
    level * tau + (v - level) * (-(-beta * tau).exp_m1()) / beta
}

/// `|f(phi)| ~ exp(-phi^2 w / 2)`; integrating out to `DECAY / sqrt(w)`
/// leaves a tail below `exp(-DECAY^2 / 2)`.
const DECAY: f64 = 9.0;
/// Largest truncation point the horizon-based extension may reach.
pub(crate) const PHI_CAP: f64 = 1e5;

/// `P_j(s, v, tau, K, psi_slope) = 1/2 + (1/pi) int_0^inf Re(e^{-i phi ln K} f_j(phi, psi_slope*phi) / (i phi)) dphi`.
///
/// With `psi_slope = -b1` and `K = exp(b0)` this is the probability that
/// `ln S_tau >= b0 + b1 V_tau` under the chosen measure.
///
/// The trapezoid spacing is `(phi_max - phi_min) / (n_phi - 1)`. For short
/// horizons, where the transform has not decayed by `phi_max`, the grid is
/// continued at the same spacing until it has.
#[allow(clippy::too_many_arguments)]
pub fn probability_pj<T: Real>(
    j: Pj,
    s: T,
    v: T,
    tau: T,
    k_eff: T,
    psi_slope: T,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
) -> Result<Probability<T>> {
    probability_pj_capped(j, s, v, tau, k_eff, psi_slope, m, mkt, quad, T::lit(PHI_CAP))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn probability_pj_capped<T: Real>(
    j: Pj,
    s: T,
    v: T,
    tau: T,
    k_eff: T,
    psi_slope: T,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    quad: &QuadratureSpec<T>,
    phi_cap: T,
) -> Result<Probability<T>> {
    if !(s > T::zero()) {
        return Err(Error::invalid("s", format!("must be > 0, got {s}")));
    }
    if !(k_eff > T::zero()) {
        return Err(Error::invalid("k_eff", format!("must be > 0, got {k_eff}")));
    }
    if !(tau > T::zero()) {
        return Err(Error::invalid("tau", format!("must be > 0, got {tau}")));
    }
    quad.validate()?;
    let h = (quad.phi_max - quad.phi_min) / T::from_usize(quad.n_phi - 1).unwrap();
    let w = expected_total_variance(v, tau, m).max(T::min_positive_value());
    let mut phi_max = quad.phi_max.max((T::lit(DECAY) / w.sqrt()).min(phi_cap));
    let mut last_err = None;
    for _ in 0..=4 {
        match pj_integral(j, s.ln(), v, tau, k_eff.ln(), psi_slope, m, mkt, quad.phi_min, h, phi_max) {
            Ok(integral) => {
                let raw = T::lit(0.5) + integral / T::PI();
                return Ok(Probability {
                    value: raw.max(T::zero()).min(T::one()),
                    raw,
                    phi_max,
                });
            }
            Err(e @ Error::CfOverflow { .. }) => {
                last_err = Some(e);
                phi_max = phi_max * T::lit(0.5);
                if phi_max <= quad.phi_min + h {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran at least once"))
}

#[allow(clippy::too_many_arguments)]
fn pj_integral<T: Real>(
    j: Pj,
    x: T,
    v: T,
    tau: T,
    ln_k: T,
    psi_slope: T,
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    phi_min: T,
    h: T,
    phi_max: T,
) -> Result<T> {
    let integrand = |phi: T| -> Result<T> {
        let args = CfArgs::new(x, v, tau, phi, psi_slope * phi);
        let f = match j {
            Pj::P1 => f1_from_f2(&args, m, mkt)?,
            Pj::P2 => joint_cf_f2(&args, m, mkt)?,
        };
        // Re(e^{-i phi lnK} f / (i phi)) = Im(e^{-i phi lnK} f) / phi
        let rot = Complex::new((phi * ln_k).cos(), -(phi * ln_k).sin());
        Ok((rot * f).im / phi)
    };
    let n = ((phi_max - phi_min) / h).round().to_usize().unwrap_or(1).max(1) + 1;
    let half = T::lit(0.5);
    // [0, phi_min] cell by its midpoint value.
    let head = phi_min * integrand(phi_min * half)?;
    let mut acc = T::zero();
    for k in 0..n {
        let phi = phi_min + h * T::from_usize(k).unwrap();
        let w = if k == 0 || k == n - 1 { half } else { T::one() };
        acc = acc + w * integrand(phi)?;
    }
    Ok(head + acc * h)
}
