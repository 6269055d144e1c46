//! Two-dimensional Boltzmann-type collision dynamics with a cutoff rate,
//! simulated with an interacting particle system, and its first and second
//! order small-angle replacements.
//!
//! Collision parameter: angle `theta` in `[-pi/2, pi/2]` with intensity
//! `|theta|^(-1-nu)`, partner drawn uniformly from the ensemble, and rate
//! `gamma = phi_eps(|v - v*|)^kappa` bounded by `Gamma_eps^kappa`.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::TestFunction;
use crate::linalg;
use crate::measure::{sample_power, Density, DensityPiece, MarkMeasure, Region};
use crate::model::{CoefficientSet, JumpModel};
use crate::quadrature::{self, GaussLegendre, Tolerance};
use crate::rng::RngStream;
use crate::simulate::par_map_streams;
use crate::weakerr::{self, WeakErrorReport};
use crate::Scalar;

pub type Velocity<S> = [S; 2];

/// Which dynamics a particle run follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// All collisions with `|theta| >= theta_floor`.
    Cutoff,
    /// Collisions with `|theta| > delta` plus the drift `b_delta`.
    FirstOrder,
    /// As first order plus the diffusion `a_delta`.
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannParams {
    pub nu: f64,
    pub kappa: f64,
    pub eta0: f64,
    pub delta: f64,
    /// `eps = delta^r`.
    pub r: f64,
}

impl BoltzmannParams {
    pub const DEFAULT_ETA0: f64 = 0.75;

    /// `r = (2 - 3 nu) / (3 + kappa)`.
    pub fn first_order_r(nu: f64, kappa: f64) -> f64 {
        (2.0 - 3.0 * nu) / (3.0 + kappa)
    }

    /// `min((1-nu)/(2-kappa), (1-nu/2)/(2-kappa/2), (3-4nu)/(4+kappa))`;
    /// admissible `r` lie strictly below it.
    pub fn second_order_r_bound(nu: f64, kappa: f64) -> f64 {
        ((1.0 - nu) / (2.0 - kappa)).min((1.0 - nu / 2.0) / (2.0 - kappa / 2.0)).min((3.0 - 4.0 * nu) / (4.0 + kappa))
    }

    pub fn first_order(nu: f64, kappa: f64, delta: f64) -> Self {
        Self { nu, kappa, eta0: Self::DEFAULT_ETA0, delta, r: Self::first_order_r(nu, kappa) }
    }

    /// `r` at 95% of its admissible bound.
    pub fn second_order(nu: f64, kappa: f64, delta: f64) -> Self {
        Self { nu, kappa, eta0: Self::DEFAULT_ETA0, delta, r: 0.95 * Self::second_order_r_bound(nu, kappa) }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn eps(&self) -> f64 {
        self.delta.powf(self.r)
    }

    /// `Gamma_eps = (ln 1/eps)^eta0`.
    pub fn gamma_eps(&self) -> f64 {
        (1.0 / self.eps()).ln().powf(self.eta0)
    }

    /// `Gamma_eps^kappa`, the bound on the collision rate.
    pub fn rate_bound(&self) -> f64 {
        self.gamma_eps().powf(self.kappa)
    }

    /// `phi_eps(x)^kappa`.
    pub fn rate(&self, x: f64) -> f64 {
        cutoff_phi(self.eps(), self.gamma_eps(), x).powf(self.kappa)
    }

    /// True when `2 eps >= Gamma_eps`, where the smoothed cutoff is constant.
    pub fn constant_rate(&self) -> bool {
        2.0 * self.eps() >= self.gamma_eps()
    }

    /// `(2 - 3nu)(1 + kappa)/(3 + kappa)` for the first order scheme,
    /// `r (1 + kappa)` for the second.
    pub fn theory_exponent(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::SecondOrder => self.r * (1.0 + self.kappa),
            _ => (2.0 - 3.0 * self.nu) * (1.0 + self.kappa) / (3.0 + self.kappa),
        }
    }

    /// Structural ranges, and for the hybrid schemes the constraints of the
    /// corresponding convergence theorem.
    pub fn validate(&self, scheme: Scheme) -> Result<()> {
        let fail = |m: String| Err(Error::ParameterConstraintViolated(m));
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return fail(format!("nu = {} must lie in (0, 1)", self.nu));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return fail(format!("kappa = {} must lie in (0, 1]", self.kappa));
        }
        if !(self.delta > 0.0) || !(self.r > 0.0) {
            return fail(format!("delta = {} and r = {} must be positive", self.delta, self.r));
        }
        let eps = self.eps();
        if !(eps > 0.0 && eps < 1.0) {
            return fail(format!("eps = delta^r = {eps} must lie in (0, 1)"));
        }
        if !(self.eta0 > 0.0 && self.eta0 < 1.0 / self.kappa.max(self.nu)) {
            return fail(format!("eta0 = {} must lie in (0, 1/max(kappa, nu))", self.eta0));
        }
        match scheme {
            Scheme::Cutoff => Ok(()),
            Scheme::FirstOrder => {
                if !(self.kappa < 0.125 && self.nu < 0.5) {
                    return fail(format!("first order needs kappa < 1/8 and nu < 1/2, got kappa = {}, nu = {}", self.kappa, self.nu));
                }
                Ok(())
            }
            Scheme::SecondOrder => {
                if self.kappa > 1.0 / 18.0 {
                    return fail(format!("second order needs kappa <= 1/18, got {}", self.kappa));
                }
                let bound = Self::second_order_r_bound(self.nu, self.kappa);
                if self.r >= bound {
                    return fail(format!("second order needs r < {bound}, got {}", self.r));
                }
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// smoothed cutoff

const MOLLIFIER_CELLS: usize = 4000;

struct MollifierTable {
    step: f64,
    norm: f64,
    k: Vec<f64>,
    m: Vec<f64>,
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

fn table() -> &'static MollifierTable {
    static TABLE: OnceLock<MollifierTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let gl = GaussLegendre::<f64>::new(16);
        let step = 2.0 / MOLLIFIER_CELLS as f64;
        let mut k = vec![0.0; MOLLIFIER_CELLS + 1];
        let mut m = vec![0.0; MOLLIFIER_CELLS + 1];
        for i in 0..MOLLIFIER_CELLS {
            let a = -1.0 + step * i as f64;
            let b = a + step;
            k[i + 1] = k[i] + gl.integrate(bump, a, b);
            m[i + 1] = m[i] + gl.integrate(|s| s * bump(s), a, b);
        }
        let norm = k[MOLLIFIER_CELLS];
        k.iter_mut().for_each(|v| *v /= norm);
        m.iter_mut().for_each(|v| *v /= norm);
        MollifierTable { step, norm, k, m }
    })
}

/// Normalized mollifier `chi(x) = exp(-1/(1-x^2)) / Z` on `(-1, 1)`.
pub fn mollifier(x: f64) -> f64 {
    bump(x) / table().norm
}

/// `H(m) = m K(m) - M(m)` with `K = int_{-1}^m chi`, `M = int_{-1}^m s chi`.
fn clamp_correction(x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return x;
    }
    let t = table();
    let pos = (x + 1.0) / t.step;
    let i = (pos.floor() as usize).min(MOLLIFIER_CELLS - 1);
    let s = pos - i as f64;
    let (x0, x1) = (-1.0 + t.step * i as f64, -1.0 + t.step * (i + 1) as f64);
    let (c0, c1) = (mollifier(x0), mollifier(x1));
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let herm = |f0: f64, f1: f64, d0: f64, d1: f64| h00 * f0 + h10 * t.step * d0 + h01 * f1 + h11 * t.step * d1;
    let kv = herm(t.k[i], t.k[i + 1], c0, c1);
    let mv = herm(t.m[i], t.m[i + 1], x0 * c0, x1 * c1);
    x * kv - mv
}

/// `phi_eps(x) = int ((y v 2eps) ^ Gamma) chi((x-y)/eps)/eps dy`, even in `x`.
pub fn cutoff_phi(eps: f64, gamma: f64, x: f64) -> f64 {
    let x = x.abs();
    if 2.0 * eps >= gamma {
        return gamma;
    }
    let lower = (2.0 * eps - x) / eps;
    let upper = (x - gamma) / eps;
    match (lower <= -1.0, upper <= -1.0) {
        (true, true) => x,
        (true, false) if upper >= 1.0 => gamma,
        (false, true) if lower >= 1.0 => 2.0 * eps,
        _ => x + eps * clamp_correction(lower) - eps * clamp_correction(upper),
    }
}

// ---------------------------------------------------------------------------
// angles

/// `int_{lo <= |theta| <= hi} |theta|^(-1-nu) dtheta = (2/nu)(lo^-nu - hi^-nu)`.
pub fn theta_mass(nu: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    2.0 / nu * (lo.powf(-nu) - hi.powf(-nu))
}

/// Draw with `|theta|` in `[lo, hi]`, density proportional to
/// `|theta|^(-1-nu)`, and a fair random sign.
pub fn sample_theta<S: Scalar, R: Rng + ?Sized>(nu: S, lo: S, hi: S, rng: &mut R) -> S {
    let magnitude = if hi <= lo { lo } else { sample_power(lo, hi, -S::one() - nu, S::unit_uniform(rng)) };
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// `A(theta) = (R_theta - I)/2`, row-major.
pub fn collision_matrix<S: Scalar>(theta: S) -> [S; 4] {
    let h = S::lit(0.5);
    let (s, c) = theta.sin_cos();
    [h * (c - S::one()), -h * s, h * s, h * (c - S::one())]
}

/// `A(theta)(v - v*)`.
pub fn collision_jump<S: Scalar>(theta: S, v: Velocity<S>, v_star: Velocity<S>) -> Velocity<S> {
    let a = collision_matrix(theta);
    let w = [v[0] - v_star[0], v[1] - v_star[1]];
    [a[0] * w[0] + a[1] * w[1], a[2] * w[0] + a[3] * w[1]]
}

/// Angular moments over `|theta| <= delta` against `|theta|^(-1-nu)`:
/// `I1 = int (cos - 1)`, `I2 = int (cos - 1)^2`, `I3 = int sin^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaMoments {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

pub fn theta_moments(nu: f64, delta: f64) -> Result<ThetaMoments> {
    if !(delta > 0.0 && delta <= FRAC_PI_2) || !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidArgument(format!("theta moments need 0 < delta <= pi/2, 0 < nu < 1 (delta = {delta}, nu = {nu})")));
    }
    let tol = Tolerance::new(1e-13);
    let sinc = |x: f64| if x == 0.0 { 1.0 } else { x.sin() / x };
    // integrands written as bounded factor times theta^(k - nu)
    let half = |g: &dyn Fn(f64) -> f64, power: f64| -> Result<f64> {
        let e = quadrature::tanh_sinh(|_, th: f64, _| g(th) * th.powf(power - nu), 0.0, delta, tol)?;
        Ok(2.0 * e.value)
    };
    Ok(ThetaMoments {
        i1: half(&|th| -0.5 * sinc(0.5 * th).powi(2), 1.0)?,
        i2: half(&|th| 0.25 * sinc(0.5 * th).powi(4), 3.0)?,
        i3: half(&|th| sinc(th).powi(2), 1.0)?,
    })
}

// ---------------------------------------------------------------------------
// ensembles and small-jump coefficients

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ParticleEnsemble<S> {
    pub v: Vec<Velocity<S>>,
}

impl<S: Scalar> ParticleEnsemble<S> {
    pub fn new(v: Vec<Velocity<S>>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptySample);
        }
        if v.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("ensemble has non-finite velocities".into()));
        }
        Ok(Self { v })
    }

    /// `n` independent standard normal velocities.
    pub fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { v: (0..n).map(|_| [S::standard_normal(rng), S::standard_normal(rng)]).collect() }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn moments(&self) -> EnsembleMoments<S> {
        let n = S::from_usize_lossy(self.v.len());
        let mut m = EnsembleMoments { mean: [S::zero(); 2], second: [S::zero(); 4] };
        for w in &self.v {
            m.mean[0] = m.mean[0] + w[0];
            m.mean[1] = m.mean[1] + w[1];
            m.second[0] = m.second[0] + w[0] * w[0];
            m.second[1] = m.second[1] + w[0] * w[1];
            m.second[3] = m.second[3] + w[1] * w[1];
        }
        m.second[2] = m.second[1];
        m.mean.iter_mut().for_each(|x| *x = *x / n);
        m.second.iter_mut().for_each(|x| *x = *x / n);
        m
    }

    /// Average of `|v|^4`.
    pub fn fourth_moment(&self) -> S {
        let s = self.v.iter().fold(S::zero(), |s, w| {
            let q = w[0] * w[0] + w[1] * w[1];
            s + q * q
        });
        s / S::from_usize_lossy(self.v.len())
    }

    pub fn average(&self, f: impl Fn(&[S]) -> S) -> S {
        self.v.iter().fold(S::zero(), |s, w| s + f(w)) / S::from_usize_lossy(self.v.len())
    }
}

/// Mean and second moment matrix of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMoments<S> {
    pub mean: Velocity<S>,
    pub second: [S; 4],
}

/// Drift `b_delta` and covariance `a_delta` of the small collisions against
/// an ensemble.
#[derive(Debug, Clone, Copy)]
pub struct SmallJumps {
    pub params: BoltzmannParams,
    pub moments: ThetaMoments,
    eps: f64,
    gamma: f64,
    constant: Option<f64>,
}

impl SmallJumps {
    pub fn new(params: BoltzmannParams) -> Result<Self> {
        let moments = theta_moments(params.nu, params.delta.min(FRAC_PI_2))?;
        let constant = params.constant_rate().then(|| params.rate_bound());
        Ok(Self { params, moments, eps: params.eps(), gamma: params.gamma_eps(), constant })
    }

    /// Rate `phi_eps(x)^kappa`.
    #[inline]
    pub fn rate(&self, x: f64) -> f64 {
        match self.constant {
            Some(g) => g,
            None => cutoff_phi(self.eps, self.gamma, x).powf(self.params.kappa),
        }
    }

    /// Constant rate when the cutoff is flat.
    pub fn constant_rate(&self) -> Option<f64> {
        self.constant
    }

    /// `(I1/2) avg (v - w) gamma(|v - w|)`.
    pub fn drift<S: Scalar>(&self, v: Velocity<S>, ensemble: &[Velocity<S>]) -> Velocity<S> {
        let mut acc = [S::zero(); 2];
        for u in ensemble {
            let w = [v[0] - u[0], v[1] - u[1]];
            let g = S::lit(self.rate((w[0] * w[0] + w[1] * w[1]).sqrt().as_f64()));
            acc[0] = acc[0] + w[0] * g;
            acc[1] = acc[1] + w[1] * g;
        }
        let k = S::lit(0.5 * self.moments.i1) / S::from_usize_lossy(ensemble.len());
        [acc[0] * k, acc[1] * k]
    }

    /// `a_delta = (I2 avg(w w^T gamma) + I3 avg(w_perp w_perp^T gamma)) / 4`.
    pub fn covariance<S: Scalar>(&self, v: Velocity<S>, ensemble: &[Velocity<S>]) -> [S; 4] {
        let mut p = [S::zero(); 4];
        let mut tr = S::zero();
        for u in ensemble {
            let w = [v[0] - u[0], v[1] - u[1]];
            let q = w[0] * w[0] + w[1] * w[1];
            let g = S::lit(self.rate(q.sqrt().as_f64()));
            p[0] = p[0] + g * w[0] * w[0];
            p[1] = p[1] + g * w[0] * w[1];
            p[3] = p[3] + g * w[1] * w[1];
            tr = tr + g * q;
        }
        p[2] = p[1];
        let n = S::from_usize_lossy(ensemble.len());
        self.assemble(p.map(|x| x / n), tr / n)
    }

    /// `a = (I2 P + I3 (tr P' I - P)) / 4` where `P = avg w w^T gamma` and
    /// `tr P' = avg |w|^2 gamma`.
    fn assemble<S: Scalar>(&self, p: [S; 4], tr: S) -> [S; 4] {
        let (i2, i3) = (S::lit(self.moments.i2), S::lit(self.moments.i3));
        let q = S::lit(0.25);
        [
            q * (i2 * p[0] + i3 * (tr - p[0])),
            q * (i2 - i3) * p[1],
            q * (i2 - i3) * p[2],
            q * (i2 * p[3] + i3 * (tr - p[3])),
        ]
    }

    /// Drift from ensemble moments; valid for a constant rate only.
    pub fn drift_from_moments<S: Scalar>(&self, v: Velocity<S>, m: &EnsembleMoments<S>, rate: f64) -> Velocity<S> {
        let k = S::lit(0.5 * self.moments.i1 * rate);
        [k * (v[0] - m.mean[0]), k * (v[1] - m.mean[1])]
    }

    /// Covariance from ensemble moments; valid for a constant rate only.
    pub fn covariance_from_moments<S: Scalar>(&self, v: Velocity<S>, m: &EnsembleMoments<S>, rate: f64) -> [S; 4] {
        let g = S::lit(rate);
        let (mu, s) = (m.mean, m.second);
        let p = [
            g * (v[0] * v[0] - S::lit(2.0) * v[0] * mu[0] + s[0]),
            g * (v[0] * v[1] - v[0] * mu[1] - mu[0] * v[1] + s[1]),
            g * (v[0] * v[1] - v[0] * mu[1] - mu[0] * v[1] + s[2]),
            g * (v[1] * v[1] - S::lit(2.0) * v[1] * mu[1] + s[3]),
        ];
        self.assemble(p, p[0] + p[3])
    }
}

/// `b_delta(v)` against an ensemble.
pub fn drift_delta<S: Scalar>(params: &BoltzmannParams, v: Velocity<S>, ensemble: &ParticleEnsemble<S>) -> Result<Velocity<S>> {
    Ok(SmallJumps::new(*params)?.drift(v, &ensemble.v))
}

/// `a_delta(v)` and its square root.
pub fn diffusion_delta<S: Scalar>(
    params: &BoltzmannParams,
    v: Velocity<S>,
    ensemble: &ParticleEnsemble<S>,
) -> Result<([S; 4], [S; 4])> {
    let a = SmallJumps::new(*params)?.covariance(v, &ensemble.v);
    let mut root = [S::zero(); 4];
    linalg::psd_sqrt_2x2(&a, &mut root)?;
    Ok((a, root))
}

// ---------------------------------------------------------------------------
// particle schemes

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleConfig {
    pub horizon: f64,
    /// Splitting step of the hybrid schemes and recording step of all runs.
    pub step: f64,
    /// Smallest angle the cutoff scheme simulates.
    pub theta_floor: f64,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self { horizon: 0.5, step: 0.01, theta_floor: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ParticleTrajectory<S> {
    pub times: Vec<f64>,
    /// Ensemble average of `|v|^4` at each recorded time.
    pub fourth_moment: Vec<S>,
    pub terminal: ParticleEnsemble<S>,
    pub proposals: usize,
    pub accepted: usize,
}

struct Lane<S> {
    scheme: Scheme,
    floor: f64,
    v: Vec<Velocity<S>>,
    out: ParticleTrajectory<S>,
}

fn drift_step<S: Scalar, R: Rng + ?Sized>(
    small: &SmallJumps,
    scheme: Scheme,
    v: &mut [Velocity<S>],
    dt: f64,
    buf: &mut [(Velocity<S>, [S; 4])],
    rng: &mut R,
) -> Result<()> {
    let fast = small.constant_rate().map(|g| (g, ParticleEnsemble { v: v.to_vec() }.moments()));
    for i in 0..v.len() {
        buf[i].0 = match &fast {
            Some((g, m)) => small.drift_from_moments(v[i], m, *g),
            None => small.drift(v[i], v),
        };
        if scheme == Scheme::SecondOrder {
            let a = match &fast {
                Some((g, m)) => small.covariance_from_moments(v[i], m, *g),
                None => small.covariance(v[i], v),
            };
            linalg::psd_sqrt_2x2(&a, &mut buf[i].1)?;
        }
    }
    let h = S::lit(dt);
    let sh = h.sqrt();
    for (w, (b, r)) in v.iter_mut().zip(buf.iter()) {
        w[0] = w[0] + b[0] * h;
        w[1] = w[1] + b[1] * h;
        if scheme == Scheme::SecondOrder {
            let (x0, x1) = (S::standard_normal(rng) * sh, S::standard_normal(rng) * sh);
            w[0] = w[0] + r[0] * x0 + r[1] * x1;
            w[1] = w[1] + r[2] * x0 + r[3] * x1;
        }
    }
    Ok(())
}

/// Runs several schemes from one initial ensemble on a shared stream of
/// collision proposals: a proposal with angle `theta` is offered to every
/// lane whose angle floor is at most `|theta|`, with the same particle
/// indices and thinning uniform. Each lane on its own has the law of its
/// scheme.
fn run_lanes<S: Scalar, R: Rng + ?Sized>(
    params: &BoltzmannParams,
    schemes: &[Scheme],
    initial: &ParticleEnsemble<S>,
    cfg: &ParticleConfig,
    rng: &mut R,
) -> Result<Vec<ParticleTrajectory<S>>> {
    params.validate(Scheme::Cutoff)?;
    if initial.len() < 2 {
        return Err(Error::InvalidArgument("a particle system needs at least two particles".into()));
    }
    if !(cfg.horizon >= 0.0 && cfg.step > 0.0) || !(cfg.theta_floor > 0.0) {
        return Err(Error::InvalidArgument("horizon, step and theta floor must be positive".into()));
    }
    let small = SmallJumps::new(*params)?;
    let n = initial.len();
    let mut lanes: Vec<Lane<S>> = schemes
        .iter()
        .map(|&scheme| Lane {
            scheme,
            floor: match scheme {
                Scheme::Cutoff => cfg.theta_floor,
                _ => params.delta,
            }
            .min(FRAC_PI_2),
            v: initial.v.clone(),
            out: ParticleTrajectory {
                times: vec![0.0],
                fourth_moment: vec![initial.fourth_moment()],
                terminal: initial.clone(),
                proposals: 0,
                accepted: 0,
            },
        })
        .collect();
    let floor = lanes.iter().map(|l| l.floor).fold(FRAC_PI_2, f64::min);
    let bound = params.rate_bound();
    let lambda = n as f64 * 2.0 * bound * theta_mass(params.nu, floor, FRAC_PI_2);
    let (nu, floor_s, top) = (S::lit(params.nu), S::lit(floor), S::lit(FRAC_PI_2));
    let mut buf = vec![([S::zero(); 2], [S::zero(); 4]); n];
    let mut t = 0.0;
    while t < cfg.horizon {
        let dt = cfg.step.min(cfg.horizon - t);
        if lambda > 0.0 {
            let mut s = f64::exponential(rng, lambda);
            while s <= dt {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                let theta = sample_theta(nu, floor_s, top, rng);
                let u = 2.0 * bound * rng.random::<f64>();
                let size = theta.abs().as_f64();
                for lane in lanes.iter_mut().filter(|l| size >= l.floor) {
                    let v = &mut lane.v;
                    let w = [v[i][0] - v[j][0], v[i][1] - v[j][1]];
                    lane.out.proposals += 1;
                    if u <= small.rate((w[0] * w[0] + w[1] * w[1]).sqrt().as_f64()) {
                        let c = collision_jump(theta, v[i], v[j]);
                        v[i] = [v[i][0] + c[0], v[i][1] + c[1]];
                        lane.out.accepted += 1;
                    }
                }
                s += f64::exponential(rng, lambda);
            }
        }
        t += dt;
        for lane in &mut lanes {
            if lane.scheme != Scheme::Cutoff {
                drift_step(&small, lane.scheme, &mut lane.v, dt, &mut buf, rng)?;
            }
            if let Some(bad) = lane.v.iter().find(|w| !(w[0].is_finite() && w[1].is_finite())) {
                return Err(Error::NonFiniteCoefficient { what: "particle velocity", t, x: crate::error::to_f64_vec(bad) });
            }
            let m4 = lane.v.iter().fold(S::zero(), |s, w| {
                let q = w[0] * w[0] + w[1] * w[1];
                s + q * q
            }) / S::from_usize_lossy(n);
            lane.out.times.push(t);
            lane.out.fourth_moment.push(m4);
        }
    }
    Ok(lanes
        .into_iter()
        .map(|mut l| {
            l.out.terminal = ParticleEnsemble { v: l.v };
            l.out
        })
        .collect())
}

fn run_particles<S: Scalar, R: Rng + ?Sized>(
    params: &BoltzmannParams,
    scheme: Scheme,
    initial: &ParticleEnsemble<S>,
    cfg: &ParticleConfig,
    rng: &mut R,
) -> Result<ParticleTrajectory<S>> {
    Ok(run_lanes(params, &[scheme], initial, cfg, rng)?.remove(0))
}

/// Cutoff dynamics and a hybrid scheme driven by the same collision
/// proposals (those with `|theta| > delta` reach both systems).
pub fn simulate_coupled_pair<S: Scalar, R: Rng + ?Sized>(
    params: &BoltzmannParams,
    scheme: Scheme,
    initial: &ParticleEnsemble<S>,
    cfg: &ParticleConfig,
    rng: &mut R,
) -> Result<(ParticleTrajectory<S>, ParticleTrajectory<S>)> {
    let mut v = run_lanes(params, &[Scheme::Cutoff, scheme], initial, cfg, rng)?;
    let b = v.pop().expect("two lanes");
    let a = v.pop().expect("two lanes");
    Ok((a, b))
}

/// Cutoff collision dynamics with all angles `|theta| >= theta_floor`.
pub fn simulate_cutoff<S: Scalar, R: Rng + ?Sized>(
    params: &BoltzmannParams,
    initial: &ParticleEnsemble<S>,
    cfg: &ParticleConfig,
    rng: &mut R,
) -> Result<ParticleTrajectory<S>> {
    run_particles(params, Scheme::Cutoff, initial, cfg, rng)
}

/// Collisions with `|theta| > delta` and an Euler step of `b_delta` per
/// splitting step.
pub fn simulate_hybrid_order1<S: Scalar, R: Rng + ?Sized>(
    params: &BoltzmannParams,
    initial: &ParticleEnsemble<S>,
    cfg: &ParticleConfig,
    rng: &mut R,
) -> Result<ParticleTrajectory<S>> {
    run_particles(params, Scheme::FirstOrder, initial, cfg, rng)
}

/// As [`simulate_hybrid_order1`] plus Gaussian increments with covariance
/// `a_delta h`.
pub fn simulate_hybrid_order2<S: Scalar, R: Rng + ?Sized>(
    params: &BoltzmannParams,
    initial: &ParticleEnsemble<S>,
    cfg: &ParticleConfig,
    rng: &mut R,
) -> Result<ParticleTrajectory<S>> {
    run_particles(params, Scheme::SecondOrder, initial, cfg, rng)
}

pub fn simulate_scheme<S: Scalar, R: Rng + ?Sized>(
    params: &BoltzmannParams,
    scheme: Scheme,
    initial: &ParticleEnsemble<S>,
    cfg: &ParticleConfig,
    rng: &mut R,
) -> Result<ParticleTrajectory<S>> {
    run_particles(params, scheme, initial, cfg, rng)
}

// ---------------------------------------------------------------------------
// generator models against a frozen ensemble

/// Mark `z = j pi + theta` selects partner `j` and angle `theta`.
pub fn decode_mark<S: Scalar>(z: S) -> (usize, S) {
    let j = (z / S::PI()).round();
    (j.to_usize().unwrap_or(0), z - j * S::PI())
}

fn partner_pieces<S: Scalar>(n: usize, nu: f64) -> Vec<DensityPiece<S>> {
    let coef = S::one() / S::from_usize_lossy(n);
    let exponent = S::lit(-1.0 - nu);
    let half = S::FRAC_PI_2();
    (0..n)
        .flat_map(|j| {
            let origin = S::from_usize_lossy(j) * S::PI();
            let d = Density::PowerLaw { coef, exponent, origin };
            [
                DensityPiece { lo: origin - half, hi: origin, density: d.clone() },
                DensityPiece { lo: origin, hi: origin + half, density: d },
            ]
        })
        .collect()
}

/// Marks with `|theta| > delta`.
pub fn large_angle_region<S: Scalar>(n: usize, delta: S) -> Region<S> {
    let half = S::FRAC_PI_2();
    let delta = delta.min(half);
    Region::from_intervals((0..n).flat_map(|j| {
        let o = S::from_usize_lossy(j) * S::PI();
        [(o - half, o - delta), (o + delta, o + half)]
    }))
}

/// The cutoff collision operator and its replacement of the given order,
/// both as jump models in the velocity with the ensemble frozen.
pub fn generator_models<S: Scalar>(
    params: &BoltzmannParams,
    ensemble: &ParticleEnsemble<S>,
    scheme: Scheme,
    horizon: S,
) -> Result<(JumpModel<S>, JumpModel<S>)> {
    params.validate(Scheme::Cutoff)?;
    let n = ensemble.len();
    let measure = MarkMeasure::density(partner_pieces(n, params.nu))?;
    let small = SmallJumps::new(*params)?;
    let parts = Arc::new(ensemble.v.clone());
    let (p1, p2) = (parts.clone(), parts.clone());
    let cutoff = CoefficientSet::builder(2)
        .jump(move |_, z, x, out| {
            let (j, theta) = decode_mark(z);
            let c = collision_jump(theta, [x[0], x[1]], p1[j.min(p1.len() - 1)]);
            out.copy_from_slice(&c);
        })
        .rate(
            move |_, z, x| {
                let (j, _) = decode_mark(z);
                let w = p2[j.min(p2.len() - 1)];
                let r = ((x[0] - w[0]).powi(2) + (x[1] - w[1]).powi(2)).sqrt();
                S::lit(small.rate(r.as_f64()))
            },
            S::lit(params.rate_bound()),
        )
        .breakpoints((0..n).map(|j| S::from_usize_lossy(j) * S::PI()).collect())
        .build()?;
    let mut hybrid = cutoff.to_builder();
    if scheme != Scheme::Cutoff {
        let (p3, p4) = (parts.clone(), parts.clone());
        hybrid = hybrid.drift(move |_, x, out| out.copy_from_slice(&small.drift([x[0], x[1]], &p3)));
        if scheme == Scheme::SecondOrder {
            hybrid = hybrid.covariance(move |_, x, out| out.copy_from_slice(&small.covariance([x[0], x[1]], &p4)));
        }
    }
    let cutoff_model = JumpModel::new(cutoff, measure.clone(), horizon)?;
    let hybrid_model = JumpModel::new(hybrid.build()?, measure.restrict(&large_angle_region(n, S::lit(params.delta))), horizon)?;
    Ok((cutoff_model, hybrid_model))
}

// ---------------------------------------------------------------------------
// experiment

/// How the cutoff and hybrid runs of one replica share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Same initial ensemble, independent collisions.
    InitialOnly,
    /// Same initial ensemble and the same large-angle collision proposals.
    Synchronous,
}

/// `nu` and `kappa` are required when deserializing; every other field has
/// the value of [`BoltzmannExperiment::default`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoltzmannExperiment {
    pub nu: f64,
    pub kappa: f64,
    #[serde(default = "defaults::eta0")]
    pub eta0: f64,
    #[serde(default = "defaults::deltas")]
    pub deltas: Vec<f64>,
    /// Defaults to the value tied to the scheme.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "defaults::scheme")]
    pub scheme: Scheme,
    #[serde(default = "defaults::particles")]
    pub particles: usize,
    #[serde(default = "defaults::replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub particle: ParticleConfig,
    #[serde(default = "defaults::coupling")]
    pub coupling: Coupling,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "defaults::level")]
    pub level: f64,
}

mod defaults {
    use super::*;

    pub fn eta0() -> f64 {
        BoltzmannParams::DEFAULT_ETA0
    }
    pub fn deltas() -> Vec<f64> {
        vec![0.4, 0.2, 0.1]
    }
    pub fn scheme() -> Scheme {
        Scheme::FirstOrder
    }
    pub fn particles() -> usize {
        2000
    }
    pub fn replicas() -> usize {
        200
    }
    pub fn coupling() -> Coupling {
        Coupling::Synchronous
    }
    pub fn seed() -> u64 {
        7
    }
    pub fn level() -> f64 {
        weakerr::DEFAULT_LEVEL
    }
}

impl Default for BoltzmannExperiment {
    fn default() -> Self {
        Self {
            nu: 0.3,
            kappa: 0.1,
            eta0: defaults::eta0(),
            deltas: defaults::deltas(),
            r: None,
            scheme: defaults::scheme(),
            particles: defaults::particles(),
            replicas: defaults::replicas(),
            particle: ParticleConfig::default(),
            coupling: defaults::coupling(),
            seed: defaults::seed(),
            workers: 0,
            level: defaults::level(),
        }
    }
}

impl BoltzmannExperiment {
    pub fn params(&self, delta: f64) -> BoltzmannParams {
        let r = self.r.unwrap_or_else(|| match self.scheme {
            Scheme::SecondOrder => 0.95 * BoltzmannParams::second_order_r_bound(self.nu, self.kappa),
            _ => BoltzmannParams::first_order_r(self.nu, self.kappa),
        });
        BoltzmannParams { nu: self.nu, kappa: self.kappa, eta0: self.eta0, delta, r }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannReport {
    pub scheme: Scheme,
    pub r: f64,
    pub eps: Vec<f64>,
    /// Exponent the convergence theorem allows approaching from below.
    pub theory_exponent: f64,
    pub weak: WeakErrorReport,
    /// Largest `m4(t)/m4(0)` over times, replicas and both runs, per delta.
    pub fourth_moment_ratio: Vec<f64>,
    /// Smallest `m4(t)/m4(0)`, same ranges.
    pub fourth_moment_min_ratio: Vec<f64>,
    pub cutoff_means: Vec<f64>,
    pub hybrid_means: Vec<f64>,
    pub particles: usize,
    pub replicas: usize,
}

impl BoltzmannReport {
    /// `delta, order, error, ci_low, ci_high, theoretical_exponent, n_particles, n_replicas`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delta,order,error,ci_low,ci_high,theoretical_exponent,n_particles,n_replicas")?;
        let order = match self.scheme {
            Scheme::SecondOrder => 2,
            Scheme::FirstOrder => 1,
            Scheme::Cutoff => 0,
        };
        for (d, e) in self.weak.values.iter().zip(&self.weak.errors) {
            writeln!(
                w,
                "{d},{order},{},{},{},{},{},{}",
                e.estimate, e.ci_low, e.ci_high, self.theory_exponent, self.particles, self.replicas
            )?;
        }
        Ok(())
    }
}

/// Per replica: a Gaussian ensemble shared by both runs, then the cutoff
/// dynamics and the hybrid scheme coupled as configured; the sample is the
/// ensemble average of `f` at the horizon.
pub fn boltzmann_experiment(cfg: &BoltzmannExperiment, f: &TestFunction<f64>) -> Result<BoltzmannReport> {
    if cfg.scheme == Scheme::Cutoff {
        return Err(Error::InvalidArgument("the experiment compares a hybrid scheme with the cutoff dynamics".into()));
    }
    if f.dim() != 2 {
        return Err(Error::InvalidArgument("test function must be two-dimensional".into()));
    }
    if cfg.replicas < 2 {
        return Err(Error::InvalidArgument("at least two replicas are needed".into()));
    }
    for &d in &cfg.deltas {
        cfg.params(d).validate(cfg.scheme)?;
    }
    let mut errors = Vec::new();
    let mut ratios = Vec::new();
    let mut min_ratios = Vec::new();
    let (mut cm, mut hm) = (Vec::new(), Vec::new());
    for (k, &delta) in cfg.deltas.iter().enumerate() {
        let params = cfg.params(delta);
        let pairs = par_map_streams(cfg.seed, cfg.replicas, cfg.workers, |rng, i| {
            let init = ParticleEnsemble::<f64>::gaussian(cfg.particles, rng);
            let mut r1 = RngStream::new(crate::regimes::derived_seed(cfg.seed, 2 * k as u64 + 1), i as u64);
            let mut r2 = RngStream::new(crate::regimes::derived_seed(cfg.seed, 2 * k as u64 + 2), i as u64);
            let (a, b) = match cfg.coupling {
                Coupling::Synchronous => simulate_coupled_pair(&params, cfg.scheme, &init, &cfg.particle, &mut r1)?,
                Coupling::InitialOnly => (
                    simulate_cutoff(&params, &init, &cfg.particle, &mut r1)?,
                    simulate_scheme(&params, cfg.scheme, &init, &cfg.particle, &mut r2)?,
                ),
            };
            let m0 = init.fourth_moment();
            let (lo, hi) = a
                .fourth_moment
                .iter()
                .chain(&b.fourth_moment)
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| (lo.min(m / m0), hi.max(m / m0)));
            Ok((a.terminal.average(|v| f.value(v)), b.terminal.average(|v| f.value(v)), lo, hi))
        })?;
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        min_ratios.push(pairs.iter().fold(f64::INFINITY, |r, p| r.min(p.2)));
        ratios.push(pairs.iter().fold(0.0f64, |r, p| r.max(p.3)));
        cm.push(a.iter().sum::<f64>() / a.len() as f64);
        hm.push(b.iter().sum::<f64>() / b.len() as f64);
        errors.push(weakerr::weak_error_paired(&a, &b, cfg.level, weakerr::Interval::Normal)?);
        log::info!("delta={delta}: {:?}", errors.last());
    }
    let p0 = cfg.params(cfg.deltas[0]);
    Ok(BoltzmannReport {
        scheme: cfg.scheme,
        r: p0.r,
        eps: cfg.deltas.iter().map(|&d| cfg.params(d).eps()).collect(),
        theory_exponent: p0.theory_exponent(cfg.scheme),
        weak: WeakErrorReport::new("delta", cfg.deltas.clone(), errors, cfg.level),
        fourth_moment_ratio: ratios,
        fourth_moment_min_ratio: min_ratios,
        cutoff_means: cm,
        hybrid_means: hm,
        particles: cfg.particles,
        replicas: cfg.replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_eps_value() {
        let p = BoltzmannParams { nu: 0.3, kappa: 0.1, eta0: 0.75, delta: 0.01, r: 1.0 };
        assert_relative_eq!(p.gamma_eps(), 100f64.ln().powf(0.75), epsilon = 1e-12);
        assert_relative_eq!(p.gamma_eps(), 3.1437, epsilon = 1e-4);
    }

    #[test]
    fn phi_regions() {
        let (eps, gamma) = (0.01, 3.1434);
        assert_eq!(cutoff_phi(eps, gamma, eps / 2.0), 2.0 * eps);
        let mid = (3.0 * eps + gamma - 1.0) / 2.0;
        assert_eq!(cutoff_phi(eps, gamma, mid), mid);
        assert_eq!(cutoff_phi(eps, gamma, gamma + 2.0 * eps), gamma);
        for k in 0..200 {
            let x = k as f64 * 0.02;
            let p = cutoff_phi(eps, gamma, x);
            assert!(p >= 2.0 * eps - 1e-15 && p <= gamma + 1e-15);
        }
    }

    #[test]
    fn mollifier_moments() {
        assert_relative_eq!(clamp_correction(0.0), -table().m[MOLLIFIER_CELLS / 2], epsilon = 1e-15);
        assert!(table().m[MOLLIFIER_CELLS].abs() < 1e-15);
        assert_relative_eq!(table().k[MOLLIFIER_CELLS / 2], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn small_i1() {
        let m = theta_moments(0.5, 0.1).unwrap();
        assert_relative_eq!(m.i1, -0.02108, epsilon = 5e-5);
        assert!(m.i2 > 0.0 && m.i2 <= m.i3);
    }

    #[test]
    fn collision_examples() {
        assert_eq!(collision_jump(0.0, [1.0, 2.0], [0.0, 0.0]), [0.0, 0.0]);
        let c = collision_jump(FRAC_PI_2, [2.0, 0.0], [0.0, 0.0]);
        assert_relative_eq!(c[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(c[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fast_path_matches_direct() {
        let p = BoltzmannParams::first_order(0.3, 0.1, 0.2);
        assert!(p.constant_rate());
        let sj = SmallJumps::new(p).unwrap();
        let ens = vec![[0.3, -1.0], [1.2, 0.4], [-0.7, 0.1], [0.0, 2.0]];
        let e = ParticleEnsemble::new(ens.clone()).unwrap();
        let m = e.moments();
        let g = sj.constant_rate().unwrap();
        let v = [0.5, -0.25];
        let (d1, d2) = (sj.drift(v, &ens), sj.drift_from_moments(v, &m, g));
        let (a1, a2) = (sj.covariance(v, &ens), sj.covariance_from_moments(v, &m, g));
        for k in 0..2 {
            assert_relative_eq!(d1[k], d2[k], epsilon = 1e-14);
        }
        for k in 0..4 {
            assert_relative_eq!(a1[k], a2[k], epsilon = 1e-14);
        }
    }
}
