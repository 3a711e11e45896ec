//! Least-squares Monte Carlo: backward induction over the exercise dates,
//! continuation-value regressions, and the early exercise boundary they
//! imply.

mod boundary;
mod linalg;

use rayon::prelude::*;

pub use boundary::{
    critical_price, extract_boundary, fit_boundary, BoundaryCurve, BoundaryPointCloud, CriticalPrice,
    MIN_BACKING_PATHS, N_VARIANCE_LEVELS,
};

use crate::error::{Error, Result};
use crate::model::OptionSpec;
use crate::scalar::{ordered_sum, Real, SUM_CHUNK};
use crate::simulate::{Measure, PathSet};

pub const N_BASIS: usize = 4;

/// Condition estimate above which the normal equations get a ridge term.
pub const RIDGE_TRIGGER: f64 = 1e12;
/// Ridge size relative to the mean diagonal of the normal matrix.
pub const RIDGE: f64 = 1e-10;

/// `[1, L1(s/K), L2(s/K), L1((s/K)(v/theta))]` with `L1(x) = 1 - x` and
/// `L2(x) = 1 - 2x + x^2/2`.
#[inline]
pub fn basis_eval<T: Real>(s: T, v: T, strike: T, theta: T) -> [T; N_BASIS] {
    let x = s / strike;
    let one = T::one();
    let l1 = one - x;
    let l2 = one - T::lit(2.0) * x + x * x * T::lit(0.5);
    let cross = one - x * (v / theta);
    [one, l1, l2, cross]
}

/// Continuation-value regression at one exercise date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit<T> {
    pub step_index: usize,
    pub coefficients: [T; N_BASIS],
    /// In-the-money paths that entered the regression.
    pub n_samples: usize,
    /// `lambda_max / lambda_min` of the normal matrix before any ridge.
    pub condition_diag: T,
    pub ridged: bool,
    /// Too few samples or an unsolvable system; such a fit never triggers
    /// exercise and is skipped by boundary extraction.
    pub degenerate: bool,
    pub strike: T,
    pub theta: T,
}

impl<T: Real> RegressionFit<T> {
    /// A fit with explicit coefficients, mainly for probing the boundary
    /// search with a known continuation surface.
    pub fn from_coefficients(step_index: usize, coefficients: [T; N_BASIS], strike: T, theta: T) -> Self {
        Self {
            step_index,
            coefficients,
            n_samples: usize::MAX,
            condition_diag: T::one(),
            ridged: false,
            degenerate: false,
            strike,
            theta,
        }
    }

    pub fn continuation(&self, s: T, v: T) -> T {
        let b = basis_eval(s, v, self.strike, self.theta);
        b.iter()
            .zip(self.coefficients.iter())
            .fold(T::zero(), |acc, (&x, &c)| acc + x * c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsmResult<T> {
    pub price: T,
    pub stderr: T,
    /// One fit per exercise date `t_1 .. t_{N-1}`, in increasing date order.
    pub fits: Vec<RegressionFit<T>>,
    /// Step of each path's single cashflow, `None` if it never pays.
    pub exercise_step: Vec<Option<usize>>,
    /// Undiscounted cashflow paid at `exercise_step`.
    pub cashflow: Vec<T>,
    /// `decisions[k - 1][i]`: whether path `i` chose exercise at date `k`
    /// during the backward pass (later superseded by earlier exercise).
    pub decisions: Vec<Vec<bool>>,
    n_steps: usize,
}

impl<T: Real> LsmResult<T> {
    /// Dense `n_paths x (n_steps + 1)` cashflow matrix.
    pub fn cashflow_matrix(&self) -> Vec<Vec<T>> {
        self.exercise_step
            .iter()
            .zip(&self.cashflow)
            .map(|(when, &cf)| {
                let mut row = vec![T::zero(); self.n_steps + 1];
                if let Some(k) = when {
                    row[*k] = cf;
                }
                row
            })
            .collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let degenerate: Vec<_> = self.fits.iter().filter(|f| f.degenerate).map(|f| f.step_index).collect();
        if !degenerate.is_empty() {
            w.push(format!("degenerate regression at steps {degenerate:?}"));
        }
        let ridged = self.fits.iter().filter(|f| f.ridged).count();
        if ridged > 0 {
            w.push(format!("ridge applied to {ridged} ill-conditioned regressions"));
        }
        w
    }
}

fn regress<T: Real>(rows: &[([T; N_BASIS], T)], step_index: usize, strike: T, theta: T) -> RegressionFit<T> {
    let mut fit = RegressionFit {
        step_index,
        coefficients: [T::zero(); N_BASIS],
        n_samples: rows.len(),
        condition_diag: T::infinity(),
        ridged: false,
        degenerate: true,
        strike,
        theta,
    };
    if rows.len() < N_BASIS {
        return fit;
    }
    type Acc<T> = ([[T; N_BASIS]; N_BASIS], [T; N_BASIS]);
    let partials: Vec<Acc<T>> = rows
        .par_chunks(SUM_CHUNK)
        .map(|chunk| {
            let mut xtx = [[T::zero(); N_BASIS]; N_BASIS];
            let mut xty = [T::zero(); N_BASIS];
            for (b, y) in chunk {
                for i in 0..N_BASIS {
                    xty[i] = xty[i] + b[i] * *y;
                    for j in 0..=i {
                        xtx[i][j] = xtx[i][j] + b[i] * b[j];
                    }
                }
            }
            (xtx, xty)
        })
        .collect();
    let mut xtx = [[T::zero(); N_BASIS]; N_BASIS];
    let mut xty = [T::zero(); N_BASIS];
    for (pa, pb) in &partials {
        for i in 0..N_BASIS {
            xty[i] = xty[i] + pb[i];
            for j in 0..=i {
                xtx[i][j] = xtx[i][j] + pa[i][j];
            }
        }
    }
    for i in 0..N_BASIS {
        for j in (i + 1)..N_BASIS {
            xtx[i][j] = xtx[j][i];
        }
    }

    fit.condition_diag = linalg::condition_number(&xtx);
    let mut system = xtx;
    if !(fit.condition_diag <= T::lit(RIDGE_TRIGGER)) {
        let mean_diag = (0..N_BASIS).fold(T::zero(), |a, i| a + xtx[i][i]) / T::lit(N_BASIS as f64);
        let ridge = T::lit(RIDGE) * mean_diag.max(T::min_positive_value());
        for (i, row) in system.iter_mut().enumerate() {
            row[i] = row[i] + ridge;
        }
        fit.ridged = true;
    }
    if let Some(c) = linalg::cholesky_solve(&system, &xty) {
        fit.coefficients = c;
        fit.degenerate = false;
    }
    fit
}

/// Backward induction over exercise dates `t_{N-1}, ..., t_1`.
///
/// At each date the realized future cashflow, discounted to that date, is
/// regressed on [`basis_eval`] over in-the-money paths; a path exercises
/// when intrinsic value strictly exceeds the fitted continuation, replacing
/// any later cashflow. Rates come from `paths.market()`.
pub fn lsm_backward_induction<T: Real>(paths: &PathSet<T>, opt: &OptionSpec<T>) -> Result<LsmResult<T>> {
    if paths.measure() != Measure::RiskNeutral {
        return Err(Error::Unsupported(
            "least-squares pricing needs risk-neutral paths".into(),
        ));
    }
    let n = paths.n_steps();
    let m = paths.n_paths();
    let r = paths.market().r();
    let times = paths.times();
    let strike = opt.strike();
    let theta = paths.model().theta();

    let mut exercise_step: Vec<Option<usize>> = Vec::with_capacity(m);
    let mut cashflow: Vec<T> = Vec::with_capacity(m);
    for i in 0..m {
        let pay = opt.intrinsic(paths.price(i, n));
        cashflow.push(pay);
        exercise_step.push((pay > T::zero()).then_some(n));
    }

    let mut fits = Vec::with_capacity(n.saturating_sub(1));
    let mut decisions = vec![Vec::new(); n.saturating_sub(1)];
    let mut any_data = false;
    for k in (1..n).rev() {
        let tk = times[k];
        let rows: Vec<(usize, [T; N_BASIS], T)> = (0..m)
            .into_par_iter()
            .filter_map(|i| {
                let s = paths.price(i, k);
                if opt.intrinsic(s) <= T::zero() {
                    return None;
                }
                let y = match exercise_step[i] {
                    Some(j) => cashflow[i] * (-r * (times[j] - tk)).exp(),
                    None => T::zero(),
                };
                Some((i, basis_eval(s, paths.variance(i, k), strike, theta), y))
            })
            .collect();
        any_data |= rows.len() >= N_BASIS;
        let design: Vec<([T; N_BASIS], T)> = rows.iter().map(|(_, b, y)| (*b, *y)).collect();
        let fit = regress(&design, k, strike, theta);

        let mut decided = vec![false; m];
        if !fit.degenerate {
            let ex: Vec<(usize, T)> = rows
                .par_iter()
                .filter_map(|(i, b, _)| {
                    let cont = b
                        .iter()
                        .zip(fit.coefficients.iter())
                        .fold(T::zero(), |acc, (&x, &c)| acc + x * c);
                    let intrinsic = opt.intrinsic(paths.price(*i, k));
                    (intrinsic > cont).then_some((*i, intrinsic))
                })
                .collect();
            for (i, pay) in ex {
                decided[i] = true;
                cashflow[i] = pay;
                exercise_step[i] = Some(k);
            }
        }
        decisions[k - 1] = decided;
        fits.push(fit);
    }
    fits.reverse();

    if any_data && fits.iter().all(|f| f.degenerate) {
        return Err(Error::AllRegressionsDegenerate);
    }

    let discounted: Vec<T> = exercise_step
        .iter()
        .zip(&cashflow)
        .map(|(when, &cf)| match when {
            Some(j) => cf * (-r * times[*j]).exp(),
            None => T::zero(),
        })
        .collect();
    let (price, stderr) = mean_and_stderr(&discounted, paths.antithetic());

    Ok(LsmResult {
        price,
        stderr,
        fits,
        exercise_step,
        cashflow,
        decisions,
        n_steps: n,
    })
}

/// Discounted terminal payoff averaged over paths, with its standard error.
pub fn european_monte_carlo<T: Real>(paths: &PathSet<T>, opt: &OptionSpec<T>) -> (T, T) {
    let n = paths.n_steps();
    let disc = (-paths.market().r() * paths.maturity()).exp();
    let pay: Vec<T> = (0..paths.n_paths()).map(|i| disc * opt.intrinsic(paths.price(i, n))).collect();
    mean_and_stderr(&pay, paths.antithetic())
}

/// Sample mean and its standard error. Antithetic pairs are averaged
/// first, since the two halves of a pair are not independent.
pub(crate) fn mean_and_stderr<T: Real>(xs: &[T], antithetic: bool) -> (T, T) {
    if antithetic && xs.len() >= 4 && xs.len().is_multiple_of(2) {
        let pairs: Vec<T> = xs.chunks_exact(2).map(|p| (p[0] + p[1]) * T::lit(0.5)).collect();
        return iid_mean_and_stderr(&pairs);
    }
    iid_mean_and_stderr(xs)
}

fn iid_mean_and_stderr<T: Real>(xs: &[T]) -> (T, T) {
    let m = xs.len();
    let mf = T::from_usize(m).unwrap();
    let mean = ordered_sum(xs) / mf;
    if m < 2 {
        return (mean, T::zero());
    }
    let sq: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = ordered_sum(&sq) / T::from_usize(m - 1).unwrap();
    (mean, (var / mf).sqrt())
}
