//! Euler simulation of correlated Heston price/variance paths.
//!
//! Prices are stepped in levels, `S' = S + drift*S*dt + sqrt(V+)*S*dW1`, and
//! the variance uses full truncation: `V+ = max(V, 0)` enters both the drift
//! and the diffusion, the untruncated value carries the recursion and the
//! truncated value is what gets stored.
//!
//! Each path draws from its own ChaCha substream keyed by `(seed, path)`, so
//! the output is bit-identical for any number of worker threads.

use std::io::Write;
use std::marker::PhantomData;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MarketParams, ModelParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    RiskNeutral,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid<T> {
    n_paths: usize,
    n_steps: usize,
    maturity: T,
    seed: u64,
    antithetic: bool,
}

impl<T: Real> SimGrid<T> {
    pub fn new(n_paths: usize, n_steps: usize, maturity: T, seed: u64) -> Result<Self> {
        let mut errs = Vec::new();
        if n_paths < 1 {
            errs.push(crate::FieldError::new("n_paths", "must be >= 1"));
        }
        if n_steps < 1 {
            errs.push(crate::FieldError::new("n_steps", "must be >= 1"));
        }
        if !(maturity > T::zero() && maturity.is_finite()) {
            errs.push(crate::FieldError::new("maturity", format!("must be > 0, got {maturity}")));
        }
        if !errs.is_empty() {
            return Err(Error::Invalid(errs));
        }
        Ok(Self {
            n_paths,
            n_steps,
            maturity,
            seed,
            antithetic: false,
        })
    }

    /// Pairs path `2i+1` with path `2i` by negating its normal draws.
    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn maturity(&self) -> T {
        self.maturity
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn antithetic(&self) -> bool {
        self.antithetic
    }

    pub fn dt(&self) -> T {
        self.maturity / T::from_usize(self.n_steps).unwrap()
    }

    pub fn times(&self) -> Vec<T> {
        let dt = self.dt();
        (0..=self.n_steps)
            .map(|j| {
                if j == self.n_steps {
                    self.maturity
                } else {
                    dt * T::from_usize(j).unwrap()
                }
            })
            .collect()
    }
}

/// Independent standard-normal pairs for one path. The consumer scales by
/// `sqrt(dt)`.
pub struct NormalPairs<T> {
    rng: ChaCha8Rng,
    sign: T,
    _t: PhantomData<T>,
}

impl<T: Real> Iterator for NormalPairs<T> {
    type Item = (T, T);

    #[inline]
    fn next(&mut self) -> Option<(T, T)> {
        let a = T::std_normal(&mut self.rng);
        let b = T::std_normal(&mut self.rng);
        Some((self.sign * a, self.sign * b))
    }
}

/// Normal pair stream for `path_index`; depends only on `(seed, path_index)`.
pub fn gaussian_pair_stream<T: Real>(seed: u64, path_index: u64) -> NormalPairs<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    NormalPairs {
        rng,
        sign: T::one(),
        _t: PhantomData,
    }
}

fn path_stream<T: Real>(grid: &SimGrid<T>, path: usize) -> NormalPairs<T> {
    if grid.antithetic {
        let mut s = gaussian_pair_stream(grid.seed, (path / 2) as u64);
        if path % 2 == 1 {
            s.sign = -T::one();
        }
        s
    } else {
        gaussian_pair_stream(grid.seed, path as u64)
    }
}

/// Price and variance shocks built from two independent normals:
/// `(z1, rho*z1 + sqrt(1-rho^2)*z2)`.
#[inline]
pub fn correlated_shocks<T: Real>(rho: T, z1: T, z2: T) -> (T, T) {
    let rho_bar = (T::one() - rho * rho).max(T::zero()).sqrt();
    (z1, rho * z1 + rho_bar * z2)
}

#[derive(Clone, Copy)]
struct Stepper<T> {
    dt: T,
    sqrt_dt: T,
    price_drift: T,
    var_level: T,
    var_speed: T,
    xi: T,
    rho: T,
}

impl<T: Real> Stepper<T> {
    fn new(m: &ModelParams<T>, mkt: &MarketParams<T>, dt: T, measure: Measure) -> Self {
        let (price_drift, var_level, var_speed) = match measure {
            Measure::RiskNeutral => (mkt.r() - mkt.q(), m.alpha(), m.beta()),
            Measure::Physical => (mkt.mu(), m.kappa() * m.theta(), m.kappa()),
        };
        Self {
            dt,
            sqrt_dt: dt.sqrt(),
            price_drift,
            var_level,
            var_speed,
            xi: m.xi(),
            rho: m.rho(),
        }
    }

    /// One Euler step. `v` is the untruncated variance state.
    #[inline]
    fn step(&self, s: T, v: T, z1: T, z2: T) -> (T, T) {
        let vp = v.max(T::zero());
        let sv = vp.sqrt();
        let (e1, e2) = correlated_shocks(self.rho, z1, z2);
        let s_next = s + self.price_drift * s * self.dt + sv * s * self.sqrt_dt * e1;
        let v_next = v + (self.var_level - self.var_speed * vp) * self.dt + self.xi * sv * self.sqrt_dt * e2;
        (s_next, v_next)
    }
}

/// Simulated trajectories, row-major `n_paths x (n_steps + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet<T> {
    times: Vec<T>,
    prices: Vec<T>,
    variances: Vec<T>,
    n_paths: usize,
    n_steps: usize,
    measure: Measure,
    s0: T,
    model: ModelParams<T>,
    market: MarketParams<T>,
    antithetic: bool,
}

impl<T: Real> PathSet<T> {
    pub fn times(&self) -> &[T] {
        &self.times
    }
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn measure(&self) -> Measure {
        self.measure
    }
    pub fn s0(&self) -> T {
        self.s0
    }
    pub fn model(&self) -> &ModelParams<T> {
        &self.model
    }
    pub fn market(&self) -> &MarketParams<T> {
        &self.market
    }
    pub fn maturity(&self) -> T {
        self.times[self.n_steps]
    }
    /// Paths `2i` and `2i + 1` share mirrored shocks.
    pub fn antithetic(&self) -> bool {
        self.antithetic
    }

    #[inline]
    pub fn price(&self, path: usize, step: usize) -> T {
        self.prices[path * (self.n_steps + 1) + step]
    }

    #[inline]
    pub fn variance(&self, path: usize, step: usize) -> T {
        self.variances[path * (self.n_steps + 1) + step]
    }

    pub fn price_path(&self, path: usize) -> &[T] {
        let w = self.n_steps + 1;
        &self.prices[path * w..(path + 1) * w]
    }

    pub fn variance_path(&self, path: usize) -> &[T] {
        let w = self.n_steps + 1;
        &self.variances[path * w..(path + 1) * w]
    }

    /// All prices at one step, in path order.
    pub fn prices_at(&self, step: usize) -> Vec<T> {
        (0..self.n_paths).map(|i| self.price(i, step)).collect()
    }

    pub fn variances_at(&self, step: usize) -> Vec<T> {
        (0..self.n_paths).map(|i| self.variance(i, step)).collect()
    }

    /// CSV with columns `path,step,time,S,V`. Meant for small path sets.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path,step,time,S,V")?;
        for i in 0..self.n_paths {
            for j in 0..=self.n_steps {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    i,
                    j,
                    self.times[j],
                    self.price(i, j),
                    self.variance(i, j)
                )?;
            }
        }
        Ok(())
    }
}

fn check_spot<T: Real>(s0: T) -> Result<()> {
    if s0 > T::zero() && s0.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("s0", format!("must be > 0, got {s0}")))
    }
}

/// Simulates `grid.n_paths()` trajectories starting at `(s0, m.v0())`.
pub fn simulate_paths<T: Real>(
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    s0: T,
    grid: &SimGrid<T>,
    measure: Measure,
) -> Result<PathSet<T>> {
    check_spot(s0)?;
    let n = grid.n_steps;
    let w = n + 1;
    let stepper = Stepper::new(m, mkt, grid.dt(), measure);
    let mut prices = vec![T::zero(); grid.n_paths * w];
    let mut variances = vec![T::zero(); grid.n_paths * w];

    let failure = prices
        .par_chunks_mut(w)
        .zip(variances.par_chunks_mut(w))
        .enumerate()
        .filter_map(|(i, (srow, vrow))| {
            let mut shocks = path_stream(grid, i);
            let (mut s, mut v) = (s0, m.v0());
            srow[0] = s;
            vrow[0] = v;
            for j in 1..=n {
                let (z1, z2) = shocks.next().unwrap();
                (s, v) = stepper.step(s, v, z1, z2);
                if !(s.is_finite() && s > T::zero()) {
                    return Some((i, j));
                }
                srow[j] = s;
                vrow[j] = v.max(T::zero());
            }
            None
        })
        .min();
    if let Some((path, step)) = failure {
        return Err(Error::PathBlowUp { path, step });
    }

    Ok(PathSet {
        times: grid.times(),
        prices,
        variances,
        n_paths: grid.n_paths,
        n_steps: n,
        measure,
        s0,
        model: *m,
        market: *mkt,
        antithetic: grid.antithetic,
    })
}

/// Same recursion as [`simulate_paths`] but keeps only `(S_T, V_T)` per
/// path, for runs with many steps where the full matrix would not fit.
pub fn simulate_terminal<T: Real>(
    m: &ModelParams<T>,
    mkt: &MarketParams<T>,
    s0: T,
    grid: &SimGrid<T>,
    measure: Measure,
) -> Result<Vec<(T, T)>> {
    check_spot(s0)?;
    let stepper = Stepper::new(m, mkt, grid.dt(), measure);
    let out: Vec<std::result::Result<(T, T), (usize, usize)>> = (0..grid.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut shocks = path_stream(grid, i);
            let (mut s, mut v) = (s0, m.v0());
            for j in 1..=grid.n_steps {
                let (z1, z2) = shocks.next().unwrap();
                (s, v) = stepper.step(s, v, z1, z2);
                if !(s.is_finite() && s > T::zero()) {
                    return Err((i, j));
                }
            }
            Ok((s, v.max(T::zero())))
        })
        .collect();
    out.into_iter()
        .map(|r| r.map_err(|(path, step)| Error::PathBlowUp { path, step }))
        .collect()
}
