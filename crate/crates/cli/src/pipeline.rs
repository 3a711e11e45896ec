//! Simulate, regress, extract and fit the boundary, then price.

use heston_american::{
    american_call, extract_boundary, fit_boundary, lsm_backward_induction, simulate_paths, BoundaryCurve,
    BoundaryPointCloud, Error, LsmResult, MarketParams, Measure, ModelParams, OptionKind, OptionSpec,
    PriceResult, QuadratureSpec, SimGrid,
};

use crate::config::SimSettings;

pub struct PipelineRun {
    pub lsm: LsmResult<f64>,
    pub clouds: Vec<BoundaryPointCloud<f64>>,
    /// `None` when no exercise region was found.
    pub boundary: Option<BoundaryCurve<f64>>,
    /// Semi-analytic price; `None` for puts.
    pub price: Option<PriceResult<f64>>,
    pub warnings: Vec<String>,
}

pub struct Inputs<'a> {
    pub model: &'a ModelParams<f64>,
    pub market: &'a MarketParams<f64>,
    pub option: &'a OptionSpec<f64>,
    pub spot: f64,
    pub sim: SimSettings,
    pub quad: &'a QuadratureSpec<f64>,
}

pub fn run(inp: &Inputs<'_>) -> Result<PipelineRun, Error> {
    let grid = SimGrid::new(inp.sim.n_paths, inp.sim.n_steps, inp.option.maturity(), inp.sim.seed)?
        .with_antithetic(inp.sim.antithetic);
    let paths = simulate_paths(inp.model, inp.market, inp.spot, &grid, Measure::RiskNeutral)?;
    let lsm = lsm_backward_induction(&paths, inp.option)?;
    let mut warnings = lsm.warnings();
    let clouds = extract_boundary(&paths, &lsm, inp.option)?;
    drop(paths);

    let boundary = match fit_boundary(&clouds, inp.option, inp.model, inp.market) {
        Ok(b) => Some(b),
        Err(Error::NoExerciseRegion) => None,
        Err(e) => return Err(e),
    };
    let price = match inp.option.kind() {
        OptionKind::Call => {
            let p = american_call(
                inp.spot,
                inp.model.v0(),
                inp.option.maturity(),
                inp.option,
                boundary.as_ref(),
                inp.model,
                inp.market,
                inp.quad,
            )?;
            warnings.extend(p.warnings.iter().cloned());
            Some(p)
        }
        OptionKind::Put => None,
    };
    Ok(PipelineRun {
        lsm,
        clouds,
        boundary,
        price,
        warnings,
    })
}
