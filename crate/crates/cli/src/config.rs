//! JSON configuration documents for the subcommands.

use std::path::Path;

use hybridjump::boltzmann::{self, BoltzmannExperiment, BoltzmannParams, ParticleEnsemble, Scheme};
use hybridjump::model::Grid;
use hybridjump::regimes::{ExperimentConfig, ThreeRegimeExample};
use hybridjump::suite::{self, SuiteConfig};
use hybridjump::quadrature::Tolerance;
use hybridjump::{JumpModel, Region, Representation, RngStream, TestFunction};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Parses `path` (or the defaults when `None`) and reports the offending
/// field path on failure.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { "top level".to_string() } else { format!("`{path}`") };
        CliError::Config(format!("at {at}: {}", e.inner()))
    })
}

/// SHA-256 of the compact JSON form of the resolved configuration, with
/// every `workers` entry removed so the hash does not depend on the pool size.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let mut v = serde_json::to_value(cfg).expect("configs serialize");
    strip_workers(&mut v);
    let bytes = serde_json::to_vec(&v).expect("values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn strip_workers(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("workers");
            m.values_mut().for_each(strip_workers);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_workers),
        _ => {}
    }
}

fn intervals_to_region(iv: &[(f64, f64)]) -> Region {
    Region::from_intervals(iv.iter().copied())
}

/// Built-in model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    DiscreteToy {},
    PoissonToy {
        #[serde(default)]
        gamma0: Option<f64>,
    },
    ThreeRegimeSource {
        eps: f64,
    },
    ThreeRegimeHybrid {
        eps: f64,
    },
    /// Limit equation with jumps below `floor` replaced by their mean.
    ThreeRegimeLimit {
        #[serde(default = "default_floor")]
        floor: f64,
    },
    /// Velocity of one particle against a frozen Gaussian ensemble.
    Boltzmann {
        nu: f64,
        kappa: f64,
        delta: f64,
        #[serde(default = "default_scheme")]
        scheme: Scheme,
        #[serde(default = "default_eta0")]
        eta0: f64,
        #[serde(default)]
        r: Option<f64>,
        #[serde(default = "default_particles")]
        particles: usize,
        #[serde(default)]
        ensemble_seed: u64,
        /// Collisions with `|theta|` at or below this angle are dropped.
        #[serde(default = "default_theta_floor")]
        theta_floor: f64,
    },
}

fn default_floor() -> f64 {
    1e-10
}
fn default_scheme() -> Scheme {
    Scheme::Cutoff
}
fn default_eta0() -> f64 {
    BoltzmannParams::DEFAULT_ETA0
}
fn default_particles() -> usize {
    8
}
fn default_theta_floor() -> f64 {
    1e-3
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::DiscreteToy {}
    }
}

impl ModelSpec {
    /// The model with its horizon replaced, and the mark region simulated by
    /// default (of finite mass).
    pub fn build(&self, horizon: Option<f64>) -> hybridjump::Result<(JumpModel, Region)> {
        let tol = Tolerance::new(1e-12);
        let (model, region) = match self {
            ModelSpec::DiscreteToy {} => (suite::discrete_toy(), Region::all()),
            ModelSpec::PoissonToy { gamma0 } => (suite::poisson_toy(*gamma0), Region::all()),
            ModelSpec::ThreeRegimeSource { eps } => (ThreeRegimeExample::standard(*eps).source_model()?, Region::all()),
            ModelSpec::ThreeRegimeHybrid { eps } => (ThreeRegimeExample::standard(*eps).hybrid_model(tol)?, Region::all()),
            ModelSpec::ThreeRegimeLimit { floor } => (
                ThreeRegimeExample::<f64>::standard(0.01).limit_simulation_model(*floor)?,
                ThreeRegimeExample::<f64>::simulation_region(*floor),
            ),
            ModelSpec::Boltzmann { nu, kappa, delta, scheme, eta0, r, particles, ensemble_seed, theta_floor } => {
                let r = r.unwrap_or_else(|| match scheme {
                    Scheme::SecondOrder => 0.95 * BoltzmannParams::second_order_r_bound(*nu, *kappa),
                    _ => BoltzmannParams::first_order_r(*nu, *kappa),
                });
                let params = BoltzmannParams { nu: *nu, kappa: *kappa, eta0: *eta0, delta: *delta, r };
                let mut rng = RngStream::new(*ensemble_seed, 0);
                let ens = ParticleEnsemble::<f64>::gaussian(*particles, &mut rng);
                let (cutoff, hybrid) = boltzmann::generator_models(&params, &ens, *scheme, 1.0)?;
                let model = if *scheme == Scheme::Cutoff { cutoff } else { hybrid };
                (model, boltzmann::large_angle_region(*particles, *theta_floor))
            }
        };
        let model = match horizon {
            Some(h) => JumpModel::new((*model.coefficients).clone(), model.measure, h)?,
            None => model,
        };
        Ok((model, region))
    }

    /// Whether the model carries a continuous part that needs the hybrid
    /// representation.
    pub fn representation(&self) -> Representation {
        match self {
            ModelSpec::ThreeRegimeHybrid { .. } | ModelSpec::ThreeRegimeLimit { .. } => Representation::Hybrid,
            ModelSpec::Boltzmann { scheme, .. } if *scheme != Scheme::Cutoff => Representation::Hybrid,
            _ => Representation::Fictive,
        }
    }
}

/// Test functions available by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionSpec {
    Sine,
    Gaussian,
    Square,
    Constant { value: f64 },
    Affine { weights: Vec<f64>, #[serde(default)] offset: f64 },
}

impl TestFunctionSpec {
    pub fn build(&self, dim: usize) -> Result<TestFunction, CliError> {
        Ok(match self {
            TestFunctionSpec::Sine if dim == 1 => TestFunction::sine(),
            TestFunctionSpec::Sine => return Err(CliError::Config("sine test function is one-dimensional".into())),
            TestFunctionSpec::Gaussian => TestFunction::gaussian(dim),
            TestFunctionSpec::Square => TestFunction::square(dim),
            TestFunctionSpec::Constant { value } => TestFunction::constant(dim, *value),
            TestFunctionSpec::Affine { weights, offset } => {
                if weights.len() != dim {
                    return Err(CliError::Config(format!("affine weights have length {}, model dimension is {dim}", weights.len())));
                }
                TestFunction::affine(weights.clone(), *offset)
            }
        })
    }
}

/// Lattice of `n` points per axis on `[lo, hi]` at each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub times: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self, dim: usize) -> Result<Grid<f64>, CliError> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return Err(CliError::Config(format!("grid bounds must have length {dim}")));
        }
        if self.times.is_empty() || self.n == 0 {
            return Err(CliError::Config("grid needs at least one time and one point per axis".into()));
        }
        Ok(Grid::lattice(&self.times, &self.lo, &self.hi, self.n))
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { times: vec![0.0], lo: vec![-3.0], hi: vec![3.0], n: 13 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub description: String,
    pub model: ModelSpec,
    /// Mark intervals `(a, b]` to simulate; the model's default region if absent.
    pub region: Option<Vec<(f64, f64)>>,
    pub representation: Option<Representation>,
    pub x0: Vec<f64>,
    pub horizon: Option<f64>,
    pub step: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            description: String::new(),
            model: ModelSpec::DiscreteToy {},
            region: None,
            representation: None,
            x0: vec![0.0],
            horizon: None,
            step: 1e-2,
            paths: 100,
            seed: 1,
        }
    }
}

impl SimulateConfig {
    pub fn region(&self, default: Region) -> Region {
        self.region.as_deref().map(intervals_to_region).unwrap_or(default)
    }
}

/// One point of a weak-error sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakErrorCase {
    pub value: f64,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakErrorConfig {
    pub description: String,
    /// Name of the swept parameter (first CSV column).
    pub parameter: String,
    pub reference: ModelSpec,
    pub cases: Vec<WeakErrorCase>,
    pub test_function: TestFunctionSpec,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub paths: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for WeakErrorConfig {
    fn default() -> Self {
        Self {
            description: String::new(),
            parameter: "epsilon".into(),
            reference: ModelSpec::ThreeRegimeLimit { floor: default_floor() },
            cases: [0.02, 0.01, 0.005]
                .iter()
                .map(|&eps| WeakErrorCase { value: eps, model: ModelSpec::ThreeRegimeHybrid { eps } })
                .collect(),
            test_function: TestFunctionSpec::Sine,
            x0: vec![0.0],
            horizon: 1.0,
            step: 1e-3,
            paths: 20_000,
            seed: 1,
            level: hybridjump::weakerr::DEFAULT_LEVEL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreeRegimesConfig {
    pub description: String,
    pub experiment: ExperimentConfig,
    pub test_function: TestFunctionSpec,
    /// Points where the convergence functionals are evaluated.
    pub grid: GridSpec,
}

impl Default for ThreeRegimesConfig {
    fn default() -> Self {
        Self {
            description: String::new(),
            experiment: ExperimentConfig::default(),
            test_function: TestFunctionSpec::Sine,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoltzmannConfig {
    #[serde(default)]
    pub description: String,
    pub experiment: BoltzmannExperiment,
    #[serde(default = "default_boltzmann_f")]
    pub test_function: TestFunctionSpec,
}

fn default_boltzmann_f() -> TestFunctionSpec {
    TestFunctionSpec::Gaussian
}

impl Default for BoltzmannConfig {
    fn default() -> Self {
        Self { description: String::new(), experiment: BoltzmannExperiment::default(), test_function: default_boltzmann_f() }
    }
}

/// Nested regions `G1` inside `G2` for the localization bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSpec {
    pub inner: Vec<(f64, f64)>,
    pub outer: Vec<(f64, f64)>,
    #[serde(default)]
    pub gap0: f64,
}

impl LocalizationSpec {
    pub fn regions(&self) -> (Region, Region) {
        (intervals_to_region(&self.inner), intervals_to_region(&self.outer))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub description: String,
    pub model: ModelSpec,
    pub region: Option<Vec<(f64, f64)>>,
    pub q: usize,
    /// Universal constant `C` of the bounds.
    pub constant: f64,
    pub grid: GridSpec,
    pub localization: Option<LocalizationSpec>,
    /// Unused by the computation; accepted so `--seed` can be recorded.
    pub seed: u64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            description: String::new(),
            model: ModelSpec::ThreeRegimeLimit { floor: 1e-3 },
            region: Some(vec![(1e-3, 1.0)]),
            q: 1,
            constant: 1.0,
            grid: GridSpec::default(),
            localization: Some(LocalizationSpec { inner: vec![(0.04, 1.0)], outer: vec![(1e-3, 1.0)], gap0: 0.0 }),
            seed: 0,
        }
    }
}

impl ConstantsConfig {
    pub fn region(&self, default: Region) -> Region {
        self.region.as_deref().map(intervals_to_region).unwrap_or(default)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub description: String,
    pub suite: SuiteConfig,
}
