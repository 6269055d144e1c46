//! Subcommand drivers.

use std::io::Write;

use hybridjump::boltzmann;
use hybridjump::bounds::{self, LocalizationBound, RegularityReport};
use hybridjump::quadrature::Tolerance;
use hybridjump::regimes::{self, DeltaReport, ThreeRegimeExample};
use hybridjump::simulate::{self, par_map_streams};
use hybridjump::weakerr::{self, WeakErrorReport};
use hybridjump::{Representation, SimConfig};
use serde::Serialize;

use crate::config::{self, BoltzmannConfig, ConstantsConfig, SimulateConfig, ThreeRegimesConfig, ValidateConfig, WeakErrorConfig};
use crate::output::{self, Header};
use crate::{CliError, Common};

pub fn simulate(common: &Common) -> Result<(), CliError> {
    let mut cfg: SimulateConfig = config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let (model, default_region) = cfg.model.build(cfg.horizon)?;
    if cfg.x0.len() != model.dim() {
        return Err(CliError::Config(format!("at `x0`: expected {} components, got {}", model.dim(), cfg.x0.len())));
    }
    let region = cfg.region(default_region);
    let repr = cfg.representation.unwrap_or_else(|| cfg.model.representation());
    let sim = SimConfig::new(model.horizon, cfg.step.min(model.horizon), cfg.seed, cfg.paths, repr);
    sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let records = par_map_streams(cfg.seed, cfg.paths, common.workers, |rng, _| match repr {
        Representation::Fictive => simulate::simulate_fictive(&model, &region, &cfg.x0, 0.0, &sim, rng),
        Representation::Real => simulate::simulate_real(&model, &region, &cfg.x0, 0.0, &sim, rng),
        Representation::Hybrid => simulate::simulate_hybrid(&model, &region, &cfg.x0, 0.0, &sim, rng),
    })?;
    let header = Header::new(config::config_hash(&cfg));
    output::jsonl(&common.out, "paths.jsonl", &header, |w| simulate::write_jsonl(&records, w))
}

pub fn weak_error(common: &Common) -> Result<(), CliError> {
    let mut cfg: WeakErrorConfig = config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if cfg.cases.is_empty() {
        return Err(CliError::Config("at `cases`: at least one case is needed".into()));
    }
    let samples = |spec: &config::ModelSpec, seed: u64| -> Result<Vec<f64>, CliError> {
        let (model, region) = spec.build(Some(cfg.horizon))?;
        if cfg.x0.len() != model.dim() {
            return Err(CliError::Config(format!("at `x0`: expected {} components, got {}", model.dim(), cfg.x0.len())));
        }
        let f = cfg.test_function.build(model.dim())?;
        let sim = SimConfig::new(cfg.horizon, cfg.step, seed, cfg.paths, spec.representation());
        sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(simulate::terminal_samples(&model, &region, &cfg.x0, |x| f.value(x), &sim, common.workers)?)
    };
    let reference = samples(&cfg.reference, regimes::derived_seed(cfg.seed, 0))?;
    let mut errors = Vec::new();
    for (k, case) in cfg.cases.iter().enumerate() {
        let s = samples(&case.model, regimes::derived_seed(cfg.seed, k as u64 + 1))?;
        errors.push(weakerr::weak_error_with(&s, &reference, cfg.level, weakerr::Interval::Normal)?);
        log::info!("{}={}: {:?}", cfg.parameter, case.value, errors.last());
    }
    let values = cfg.cases.iter().map(|c| c.value).collect();
    let report = WeakErrorReport::new(&cfg.parameter, values, errors, cfg.level);
    let header = Header::new(config::config_hash(&cfg));
    output::csv(&common.out, "weak_error.csv", &header, |w| report.write_csv(w))
}

#[derive(Serialize)]
struct DeltaRow {
    epsilon: f64,
    #[serde(flatten)]
    report: DeltaReport,
}

#[derive(Serialize)]
struct ThreeRegimesSummary {
    alpha: f64,
    beta1: f64,
    beta2: f64,
    report: WeakErrorReport,
    delta_functionals: Vec<DeltaRow>,
}

pub fn three_regimes(common: &Common) -> Result<(), CliError> {
    let mut cfg: ThreeRegimesConfig = config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.experiment.seed = s;
    }
    cfg.experiment.workers = common.workers;
    let f = cfg.test_function.build(1)?;
    let grid = cfg.grid.build(1)?;
    let base = ThreeRegimeExample::<f64>::standard(cfg.experiment.eps.first().copied().unwrap_or(0.01));
    let report = regimes::three_regime_experiment(&base, &f, &cfg.experiment)?;
    let tol = Tolerance::new(1e-12);
    let mut delta_functionals = Vec::new();
    for &eps in &cfg.experiment.eps {
        let ex = ThreeRegimeExample { horizon: cfg.experiment.horizon, ..base.with_eps(eps) };
        let split = ex.split();
        let r = regimes::delta_functionals(&ex.source_model()?, &ex.limit_model()?, &split, &grid, tol)?;
        delta_functionals.push(DeltaRow { epsilon: eps, report: r });
    }
    let header = Header::new(config::config_hash(&cfg));
    output::csv(&common.out, "three_regimes.csv", &header, |w| report.write_csv(w))?;
    let summary = ThreeRegimesSummary {
        alpha: regimes::balance_alpha(),
        beta1: regimes::beta1(),
        beta2: regimes::beta2(),
        report,
        delta_functionals,
    };
    output::json(&common.out, "three_regimes_summary.json", &header, &summary)
}

pub fn boltzmann(common: &Common) -> Result<(), CliError> {
    let mut cfg: BoltzmannConfig = config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.experiment.seed = s;
    }
    cfg.experiment.workers = common.workers;
    for &d in &cfg.experiment.deltas {
        cfg.experiment
            .params(d)
            .validate(cfg.experiment.scheme)
            .map_err(|e| CliError::Config(format!("at `experiment`: {e}")))?;
    }
    let f = cfg.test_function.build(2)?;
    let report = boltzmann::boltzmann_experiment(&cfg.experiment, &f)?;
    let header = Header::new(config::config_hash(&cfg));
    output::csv(&common.out, "boltzmann.csv", &header, |w| report.write_csv(w))?;
    output::json(&common.out, "boltzmann_summary.json", &header, &report)
}

#[derive(Serialize)]
struct ConstantsOutput {
    report: RegularityReport,
    recomposed_q_q: f64,
    localization: Option<LocalizationBound>,
}

pub fn constants(common: &Common) -> Result<(), CliError> {
    let mut cfg: ConstantsConfig = config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if cfg.q == 0 {
        return Err(CliError::Config("at `q`: order must be at least 1".into()));
    }
    let (model, default_region) = cfg.model.build(None)?;
    let region = cfg.region(default_region);
    let grid = cfg.grid.build(model.dim())?;
    let tol = Tolerance::new(1e-10);
    let report = bounds::regularity_report(&model, &region, cfg.q, cfg.constant, &grid, tol)?;
    let localization = match &cfg.localization {
        Some(spec) => {
            let (g1, g2) = spec.regions();
            Some(bounds::localization_bound(&model, &g1, &g2, cfg.constant, spec.gap0, &grid, tol)?)
        }
        None => None,
    };
    let out = ConstantsOutput { recomposed_q_q: report.recompose(), report, localization };
    let header = Header::new(config::config_hash(&cfg));
    output::json(&common.out, "constants.json", &header, &out)
}

pub fn validate(common: &Common) -> Result<(), CliError> {
    let mut cfg: ValidateConfig = config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.suite.seed = s;
    }
    cfg.suite.workers = common.workers;
    let checks = hybridjump::suite::run_suite(&cfg.suite)?;
    let header = Header::new(config::config_hash(&cfg));
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:<34} {:<6} {:>24} {:>12}", "check", "result", "value", "threshold")?;
    for c in &checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        writeln!(stdout, "{:<34} {:<6} {:>24e} {:>12e}  {}", c.name, verdict, c.value, c.threshold, c.detail)?;
    }
    output::csv(&common.out, "validate.csv", &header, |w| {
        writeln!(w, "check,passed,value,threshold,detail")?;
        for c in &checks {
            writeln!(w, "{},{},{},{},{}", c.name, c.passed, c.value, c.threshold, c.detail.replace(',', ";"))?;
        }
        Ok(())
    })?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
