//! American option pricing under Heston stochastic volatility.
//!
//! The pipeline simulates risk-neutral paths ([`simulate`]), estimates the
//! early exercise boundary by least-squares Monte Carlo and fits
//! `ln b(V, tau) = b0(tau) + b1(tau) V` to it ([`lsm`]), then prices the call
//! as a Heston European value plus an early-exercise premium integral whose
//! probabilities come from Fourier inversion of the joint
//! (log-price, variance) transform ([`charfn`], [`pricer`]).
//!
//! Everything is generic over [`Real`]; the `*64` aliases below fix `f64`.

// `!(x > 0)` is used on purpose so that NaN is rejected; index loops mirror
// the small dense matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod charfn;
pub mod error;
pub mod lsm;
pub mod model;
pub mod pricer;
pub mod scalar;
pub mod simulate;

pub use charfn::{f1_from_f2, joint_cf_f2, probability_pj, CfArgs, Pj, Probability, QuadratureSpec};
pub use error::{Error, FieldError, Result};
pub use lsm::{
    basis_eval, critical_price, european_monte_carlo, extract_boundary, fit_boundary, lsm_backward_induction,
    BoundaryCurve, BoundaryPointCloud, CriticalPrice, LsmResult, RegressionFit,
};
pub use model::{
    check_feller, derived_coefficients, params_hash, MarketParams, ModelParams, OptionKind, OptionSpec, ParamSet,
};
pub use pricer::{
    american_call, binomial_american, binomial_european, early_exercise_premium, european_call_heston,
    european_put_heston, PriceResult,
};
pub use scalar::Real;
pub use simulate::{gaussian_pair_stream, simulate_paths, simulate_terminal, Measure, PathSet, SimGrid};

pub type ModelParams64 = ModelParams<f64>;
pub type MarketParams64 = MarketParams<f64>;
pub type OptionSpec64 = OptionSpec<f64>;
pub type SimGrid64 = SimGrid<f64>;
pub type PathSet64 = PathSet<f64>;
pub type QuadratureSpec64 = QuadratureSpec<f64>;
pub type BoundaryCurve64 = BoundaryCurve<f64>;
pub type LsmResult64 = LsmResult<f64>;
pub type PriceResult64 = PriceResult<f64>;
