//! Reference models and the invariant checks run by `hybridjump validate`.

use serde::{Deserialize, Serialize};

use crate::boltzmann::{self, BoltzmannParams, ParticleEnsemble, Scheme};
use crate::error::Result;
use crate::measure::{MarkMeasure, Region};
use crate::model::{CoefficientSet, Grid, JumpModel};
use crate::quadrature::{self, Tolerance};
use crate::regimes::{self, ThreeRegimeExample};
use crate::rng::RngStream;
use crate::simulate::{self, par_map_streams, Representation, SimConfig};
use crate::weakerr;

/// Three marks with weights `1/2, 1, 1/2`, `Gamma = 2`, no diffusion:
/// `c(z,x) = 0.6 (z - 1) + 0.3 - 0.2 x`, `gamma(z,x) = 1 + 0.8 sin(x + z)`,
/// `b(x) = -x/2`.
pub fn discrete_toy() -> JumpModel<f64> {
    let cs = CoefficientSet::builder(1)
        .drift(|_, x, out| out[0] = -0.5 * x[0])
        .jump(|_, z, x, out| out[0] = 0.6 * (z - 1.0) + 0.3 - 0.2 * x[0])
        .rate(|_, z: f64, x: &[f64]| 1.0 + 0.8 * (x[0] + z).sin(), 2.0)
        .build()
        .expect("valid coefficients");
    JumpModel::new(cs, MarkMeasure::indexed(&[0.5, 1.0, 0.5]).expect("positive weights"), 1.0).expect("valid model")
}

/// Two unit atoms (`mu(E) = 2`), `Gamma = 3`, horizon 1.5, amplitude
/// `0.1 (z + 1)`; rate `gamma0` if given, else `1 + x^2/(1 + x^2)`.
pub fn poisson_toy(gamma0: Option<f64>) -> JumpModel<f64> {
    let b = CoefficientSet::<f64>::builder(1).jump(|_, z, _, out| out[0] = 0.1 * (z + 1.0));
    let b = match gamma0 {
        Some(g) => b.rate(move |_, _, _| g, 3.0),
        None => b.rate(|_, _, x: &[f64]| 1.0 + x[0] * x[0] / (1.0 + x[0] * x[0]), 3.0),
    };
    JumpModel::new(b.build().expect("valid coefficients"), MarkMeasure::indexed(&[1.0, 1.0]).expect("positive weights"), 1.5)
        .expect("valid model")
}

/// Reference models with a finite-mass region and a 100-point grid.
pub fn reference_models() -> Result<Vec<(String, JumpModel<f64>, Region<f64>, Grid<f64>)>> {
    let grid1 = Grid::lattice(&[0.0, 0.25, 0.5, 1.0], &[-3.0], &[3.0], 25);
    let ex = ThreeRegimeExample::<f64>::standard(0.01);
    let mut rng = RngStream::new(11, 0);
    let ens = ParticleEnsemble::<f64>::gaussian(3, &mut rng);
    let params = BoltzmannParams::first_order(0.3, 0.1, 0.2);
    let (cutoff, _) = boltzmann::generator_models(&params, &ens, Scheme::FirstOrder, 1.0)?;
    let collisions = boltzmann::large_angle_region(3, 0.05);
    Ok(vec![
        ("discrete_toy".into(), discrete_toy(), Region::all(), grid1.clone()),
        ("poisson_toy".into(), poisson_toy(None), Region::all(), grid1.clone()),
        ("three_regime_source".into(), ex.source_model()?, Region::all(), grid1.clone()),
        ("three_regime_limit".into(), ex.limit_model()?, Region::interval(1e-3, 1.0), grid1),
        ("boltzmann_cutoff".into(), cutoff, collisions, Grid::lattice(&[0.0], &[-2.0, -2.0], &[2.0, 2.0], 10)),
    ])
}

/// `max |Theta_G + (2 Gamma mu(G))^{-1} int_G gamma dmu - 1|` over the grid.
pub fn kernel_normalization_error(model: &JumpModel<f64>, g: &Region<f64>, grid: &Grid<f64>) -> Result<f64> {
    let tol = Tolerance::new(1e-13);
    let mut worst = 0.0f64;
    for (t, x) in &grid.points {
        let theta = model.no_jump_probability(g, *t, x, tol)?;
        let jump = model.jump_kernel_mass(g, *t, x, tol)?;
        worst = worst.max((theta + jump - 1.0).abs());
    }
    Ok(worst)
}

/// Proposed and accepted jump counts on `[0, T]` of fictive-shock paths.
pub fn jump_counts(model: &JumpModel<f64>, x0: &[f64], paths: usize, seed: u64, workers: usize) -> Result<(Vec<u64>, Vec<u64>)> {
    let h = model.horizon;
    let cfg = SimConfig::new(h, h, seed, 1, Representation::Fictive);
    let counts = par_map_streams(seed, paths, workers, |rng, _| {
        let rec = simulate::simulate_fictive(model, &Region::all(), x0, 0.0, &cfg, rng)?;
        Ok((rec.proposals() as u64, rec.accepted_jumps() as u64))
    })?;
    Ok(counts.into_iter().unzip())
}

/// Terminal states of fictive and real-shock paths from the same seed
/// family (independent streams).
pub fn law_samples(model: &JumpModel<f64>, x0: &[f64], paths: usize, seed: u64, workers: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = model.horizon;
    let step = 1e-2f64.min(h);
    let fict = SimConfig::new(h, step, seed, paths, Representation::Fictive);
    let real = SimConfig::new(h, step, regimes::derived_seed(seed, 1), paths, Representation::Real);
    let a = par_map_streams(fict.seed, paths, workers, |rng, _| {
        Ok(simulate::simulate_fictive(model, &Region::all(), x0, 0.0, &fict, rng)?.terminal[0])
    })?;
    let b = par_map_streams(real.seed, paths, workers, |rng, _| {
        Ok(simulate::simulate_real(model, &Region::all(), x0, 0.0, &real, rng)?.terminal[0])
    })?;
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold, detail }
    }

    fn at_least(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value >= threshold, value, threshold, detail }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub paths: usize,
    pub workers: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 1, paths: 10_000, workers: 0 }
    }
}

/// Kernel normalization, Poisson structure of proposals, law equality of the
/// two representations, quadrature oracles and the three-regime identities.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for (name, model, g, grid) in reference_models()? {
        let e = kernel_normalization_error(&model, &g, &grid)?;
        out.push(CheckResult::at_most("kernel_normalization", e, 1e-10, name));
    }

    let model = poisson_toy(None);
    let (proposed, _) = jump_counts(&model, &[0.0], cfg.paths, cfg.seed, cfg.workers)?;
    let r = weakerr::chi_square_poisson(&proposed, 18.0)?;
    out.push(CheckResult::at_least("poisson_proposals", r.p_value, 0.01, format!("chi2 = {}", r.statistic)));
    let model = poisson_toy(Some(1.2));
    let (_, accepted) = jump_counts(&model, &[0.0], cfg.paths, regimes::derived_seed(cfg.seed, 3), cfg.workers)?;
    let r = weakerr::chi_square_poisson(&accepted, 1.2 * 2.0 * 1.5)?;
    out.push(CheckResult::at_least("poisson_accepted", r.p_value, 0.01, format!("chi2 = {}", r.statistic)));

    let (a, b) = law_samples(&discrete_toy(), &[0.5], cfg.paths, regimes::derived_seed(cfg.seed, 5), cfg.workers)?;
    let r = weakerr::ks_two_sample(&a, &b)?;
    out.push(CheckResult::at_least("law_fictive_vs_real", r.p_value, 0.01, format!("KS D = {}", r.statistic)));

    let tol = Tolerance::new(1e-13);
    let gk = quadrature::gauss_kronrod(|x: f64| x.powi(5), 0.0, 1.0, tol)?.value;
    out.push(CheckResult::at_most("quadrature_polynomial", (gk - 1.0 / 6.0).abs(), 1e-14, String::new()));
    let ts = quadrature::tanh_sinh(|_, a: f64, _| a.powf(-0.5), 0.0, 1.0, tol)?.value;
    out.push(CheckResult::at_most("quadrature_endpoint_singularity", (ts - 2.0).abs(), 1e-10, String::new()));
    let ex = ThreeRegimeExample::<f64>::standard(0.01);
    let mass = ex.source_measure()?.total_mass()?;
    out.push(CheckResult::at_most(
        "power_law_mass",
        (mass / regimes::source_total_mass(0.01) - 1.0).abs(),
        1e-12,
        String::new(),
    ));

    let source = ex.source_model()?;
    let split = ex.split();
    let mut worst_sigma = 0.0f64;
    let mut worst_drift = 0.0f64;
    let mut worst_balance = 0.0f64;
    let (b1, b2) = (regimes::beta1(), regimes::beta2());
    for k in 0..11 {
        let x = [-2.5 + 0.5 * k as f64];
        let c = 1.0 / (1.0 + x[0] * x[0]);
        let g = 1.0 + 0.5 * (-x[0] * x[0]).exp();
        let mut a = [0.0];
        regimes::regime_covariance(&source, &split.a, 0.0, &x, tol, &mut a)?;
        worst_sigma = worst_sigma.max((a[0] / (b1 * b1 * c * c * g) - 1.0).abs());
        let mut d = [0.0];
        regimes::regime_drift(&source, &split.b, 0.0, &x, tol, &mut d)?;
        worst_drift = worst_drift.max((d[0] / (b2 * c * g) - 1.0).abs());
        let mut m = [0.0];
        regimes::regime_drift(&source, &split.a, 0.0, &x, tol, &mut m)?;
        worst_balance = worst_balance.max(m[0].abs());
    }
    out.push(CheckResult::at_most("balancing_integral", worst_balance, 1e-10, String::new()));
    out.push(CheckResult::at_most("small_jump_variance", worst_sigma, 1e-8, String::new()));
    out.push(CheckResult::at_most("intermediate_jump_drift", worst_drift, 1e-8, String::new()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grids_have_100_points() {
        for (name, model, g, grid) in reference_models().unwrap() {
            assert_eq!(grid.len(), 100, "{name}");
            assert!(model.measure.mass(&g).unwrap().is_finite(), "{name}");
        }
    }
}
