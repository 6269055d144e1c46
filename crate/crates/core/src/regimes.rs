//! Three-regime hybridization: frequent small jumps become a diffusion,
//! intermediate jumps a drift, and rare jumps are kept.
//!
//! The generic part builds the hybrid coefficients from a source model and a
//! split `E = A u B u C`; [`ThreeRegimeExample`] is the concrete
//! one-dimensional family with closed-form limits.

use std::cell::RefCell;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::TestFunction;
use crate::measure::{Density, DensityPiece, MarkMeasure, Region};
use crate::model::{grid_sup, CoefficientSet, Grid, JumpModel};
use crate::quadrature::Tolerance;
use crate::simulate::{self, Representation, SimConfig};
use crate::weakerr::{self, WeakErrorReport};
use crate::Scalar;

/// Disjoint regions covering the mark space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RegimeSplit<S> {
    pub a: Region<S>,
    pub b: Region<S>,
    pub c: Region<S>,
}

impl<S: Scalar> RegimeSplit<S> {
    /// Checks pairwise disjointness and that `mu(A) + mu(B) + mu(C) = mu(E)`
    /// (relative 1e-12, or equality of infinities).
    pub fn validate(&self, measure: &MarkMeasure<S>) -> Result<()> {
        let pairs = [(&self.a, &self.b), (&self.a, &self.c), (&self.b, &self.c)];
        if pairs.iter().any(|(p, q)| !p.intersect(q).is_empty()) {
            return Err(Error::InvalidArgument("regime regions overlap".into()));
        }
        let parts = measure.mass(&self.a)? + measure.mass(&self.b)? + measure.mass(&self.c)?;
        let total = measure.total_mass()?;
        let ok = if total.is_infinite() || parts.is_infinite() {
            total == parts
        } else {
            (parts - total).abs() <= S::lit(1e-12) * total.abs().max(S::one())
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("regions carry mass {parts}, the measure {total}")));
        }
        Ok(())
    }
}

fn integrate_vec<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    tol: Tolerance<S>,
    components: usize,
    mut f: impl FnMut(S, &mut [S]),
    out: &mut [S],
) -> Result<()> {
    let buf = RefCell::new(vec![S::zero(); components]);
    let f = RefCell::new(&mut f);
    for k in 0..components {
        out[k] = model.integrate_marks(g, tol, |z| {
            let mut b = buf.borrow_mut();
            (f.borrow_mut())(z, &mut b);
            b[k]
        })?;
    }
    Ok(())
}

/// `a(t,x) = int_A c c^T gamma dmu` (row-major).
pub fn regime_covariance<S: Scalar>(
    source: &JumpModel<S>,
    a_region: &Region<S>,
    t: S,
    x: &[S],
    tol: Tolerance<S>,
    out: &mut [S],
) -> Result<()> {
    let d = source.dim();
    let cs = source.coefficients.clone();
    let mut c = vec![S::zero(); d];
    integrate_vec(
        source,
        a_region,
        tol,
        d * d,
        |z, o| {
            cs.jump_at(t, z, x, &mut c);
            let g = cs.rate_at(t, z, x);
            for i in 0..d {
                for j in 0..d {
                    o[i * d + j] = c[i] * c[j] * g;
                }
            }
        },
        out,
    )
}

/// `b^eps(t,x) = b(t,x) + int_B c gamma dmu`.
pub fn regime_drift<S: Scalar>(
    source: &JumpModel<S>,
    b_region: &Region<S>,
    t: S,
    x: &[S],
    tol: Tolerance<S>,
    out: &mut [S],
) -> Result<()> {
    let d = source.dim();
    let cs = source.coefficients.clone();
    let mut c = vec![S::zero(); d];
    integrate_vec(
        source,
        b_region,
        tol,
        d,
        |z, o| {
            cs.jump_at(t, z, x, &mut c);
            let g = cs.rate_at(t, z, x);
            o.iter_mut().zip(&c).for_each(|(p, &q)| *p = q * g);
        },
        out,
    )?;
    let mut b = vec![S::zero(); d];
    cs.drift_at(t, x, &mut b);
    out.iter_mut().zip(&b).for_each(|(p, &q)| *p = *p + q);
    Ok(())
}

/// Hybrid model: diffusion from the `A` jumps, drift from the `B` jumps, and
/// the source jumps restricted to `C`. Coefficients are evaluated by
/// quadrature at every call; a failed quadrature yields NaN, which the
/// simulators report as a non-finite coefficient.
pub fn build_hybrid<S: Scalar>(source: &JumpModel<S>, split: &RegimeSplit<S>, tol: Tolerance<S>) -> Result<JumpModel<S>> {
    split.validate(&source.measure)?;
    let d = source.dim();
    // surface quadrature problems before handing out closures
    let probe = vec![S::zero(); d];
    let mut scratch = vec![S::zero(); d * d];
    regime_covariance(source, &split.a, S::zero(), &probe, tol, &mut scratch)?;
    regime_drift(source, &split.b, S::zero(), &probe, tol, &mut scratch[..d])?;

    let src_a = Arc::new(source.clone());
    let src_b = src_a.clone();
    let region_a = split.a.clone();
    let region_b = split.b.clone();
    let mut builder = source.coefficients.to_builder();
    if !split.a.is_empty() {
        builder = builder.covariance(move |t, x, out| {
            if regime_covariance(&src_a, &region_a, t, x, tol, out).is_err() {
                out.iter_mut().for_each(|v| *v = S::nan());
            }
        });
    }
    if !split.b.is_empty() {
        builder = builder.drift(move |t, x, out| {
            if regime_drift(&src_b, &region_b, t, x, tol, out).is_err() {
                out.iter_mut().for_each(|v| *v = S::nan());
            }
        });
    }
    let coefficients = builder.build()?;
    Ok(JumpModel {
        coefficients: Arc::new(coefficients),
        measure: source.measure.restrict(&split.c),
        horizon: source.horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub delta_sigma: f64,
    pub delta_b: f64,
    pub delta_c_gamma: f64,
    pub delta_a: f64,
    pub delta_b_moment: f64,
    pub delta_c: f64,
    pub total: f64,
}

/// Checks that source and limit measures agree on `C` (whole region and an
/// eight-way subdivision of each piece), to 1e-10 relative.
pub fn check_measures_agree<S: Scalar>(source: &MarkMeasure<S>, limit: &MarkMeasure<S>, c: &Region<S>) -> Result<()> {
    let tol = S::lit(1e-10);
    let mut regions = vec![c.clone()];
    for &(lo, hi) in c.pieces() {
        if lo.is_finite() && hi.is_finite() {
            let n = 8;
            for k in 0..n {
                let a = lo + (hi - lo) * S::from_usize_lossy(k) / S::from_usize_lossy(n);
                let b = lo + (hi - lo) * S::from_usize_lossy(k + 1) / S::from_usize_lossy(n);
                regions.push(Region::interval(a, b));
            }
        }
    }
    for r in &regions {
        let ms = source.mass(r)?;
        let ml = limit.mass(r)?;
        let ok = if ms.is_infinite() || ml.is_infinite() { ms == ml } else { (ms - ml).abs() <= tol * ml.abs().max(S::one()) };
        if !ok {
            return Err(Error::RegionMeasureMismatch { detail: format!("on {r}: source mass {ms}, limit mass {ml}") });
        }
    }
    Ok(())
}

/// Grid suprema of the convergence functionals between a source model with
/// split and a limit model.
pub fn delta_functionals<S: Scalar>(
    source: &JumpModel<S>,
    limit: &JumpModel<S>,
    split: &RegimeSplit<S>,
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<DeltaReport> {
    check_measures_agree(&source.measure, &limit.measure, &split.c)?;
    let d = source.dim();
    let cs = source.coefficients.clone();
    let cl = limit.coefficients.clone();
    let mut m1 = vec![S::zero(); d * d];
    let mut m2 = vec![S::zero(); d * d];

    let delta_sigma = grid_sup(grid, |t, x| {
        regime_covariance(source, &split.a, t, x, tol, &mut m1)?;
        cl.covariance_at(t, x, &mut m2);
        Ok(m1.iter().zip(&m2).fold(S::zero(), |s, (&p, &q)| s + (p - q) * (p - q)).sqrt())
    })?;
    let delta_b = grid_sup(grid, |t, x| {
        regime_drift(source, &split.b, t, x, tol, &mut m1[..d])?;
        cl.drift_at(t, x, &mut m2[..d]);
        Ok(m1[..d].iter().zip(&m2[..d]).fold(S::zero(), |s, (&p, &q)| s + (p - q) * (p - q)).sqrt())
    })?;

    let bufs = RefCell::new((vec![S::zero(); d], vec![S::zero(); d]));
    let delta_c_gamma = grid_sup(grid, |t, x| {
        limit.integrate_marks(&split.c, tol, |z| {
            let mut b = bufs.borrow_mut();
            let (ce, cl_) = &mut *b;
            cs.jump_at(t, z, x, ce);
            cl.jump_at(t, z, x, cl_);
            let diff = ce.iter().zip(cl_.iter()).fold(S::zero(), |s, (&p, &q)| s + (p - q) * (p - q)).sqrt();
            let gl = cl.rate_at(t, z, x);
            diff * gl + (gl - cs.rate_at(t, z, x)).abs()
        })
    })?;
    let moment = |model: &JumpModel<S>, g: &Region<S>, power: i32| {
        let cs = model.coefficients.clone();
        grid_sup(grid, |t, x| {
            model.integrate_marks(g, tol, |z| {
                let mut b = bufs.borrow_mut();
                cs.jump_at(t, z, x, &mut b.0);
                crate::norm(&b.0).powi(power) * cs.rate_at(t, z, x)
            })
        })
    };
    let delta_a = moment(source, &split.a, 3)?;
    let delta_b_moment = moment(source, &split.b, 2)?;
    let delta_c = moment(limit, &split.c.complement(), 1)?;
    let parts = [delta_sigma, delta_b, delta_c_gamma, delta_a, delta_b_moment, delta_c];
    let total = parts.iter().fold(S::zero(), |s, &v| s + v);
    Ok(DeltaReport {
        delta_sigma: delta_sigma.as_f64(),
        delta_b: delta_b.as_f64(),
        delta_c_gamma: delta_c_gamma.as_f64(),
        delta_a: delta_a.as_f64(),
        delta_b_moment: delta_b_moment.as_f64(),
        delta_c: delta_c.as_f64(),
        total: total.as_f64(),
    })
}

/// Scalar function of the state with its sup norm and Lipschitz constant.
#[derive(Clone)]
pub struct BaseFn<S> {
    pub f: Arc<dyn Fn(S) -> S + Send + Sync>,
    pub sup: S,
    pub lipschitz: S,
}

impl<S: Scalar> BaseFn<S> {
    #[inline]
    pub fn eval(&self, x: S) -> S {
        (self.f)(x)
    }
}

/// `alpha = (sqrt3 - sqrt2) / (sqrt6 - sqrt3)`.
pub fn balance_alpha() -> f64 {
    (3f64.sqrt() - 2f64.sqrt()) / (6f64.sqrt() - 3f64.sqrt())
}

/// `beta_1 = sqrt((alpha^2 - 1) ln 2 + ln 3)`.
pub fn beta1() -> f64 {
    let a = balance_alpha();
    ((a * a - 1.0) * 2f64.ln() + 3f64.ln()).sqrt()
}

/// `beta_2 = ln(4/3)`.
pub fn beta2() -> f64 {
    (4.0f64 / 3.0).ln()
}

/// Total mass of the source measure:
/// `2/(3 eps) + 2 (1/sqrt(3 eps) - 1/sqrt(4 eps)) + ln(1/(4 eps))`.
pub fn source_total_mass(eps: f64) -> f64 {
    2.0 / (3.0 * eps) + 2.0 * (1.0 / (3.0 * eps).sqrt() - 1.0 / (4.0 * eps).sqrt()) + (1.0 / (4.0 * eps)).ln()
}

/// One-dimensional example: source measure
/// `z^-2 on (eps, 3eps], z^-3/2 on (3eps, 4eps], z^-1 on (4eps, 1]`,
/// amplitude `c(x) sqrt(z) (1{z > 2eps} - alpha 1{z <= 2eps})`, rate
/// `gamma(x)`; limit with `sigma = beta1 c sqrt(gamma)`, `b = beta2 c gamma`
/// and jumps `c(x) sqrt(z)` against `dz/z` on `(0, 1]`.
#[derive(Clone)]
pub struct ThreeRegimeExample<S: Scalar> {
    pub eps: S,
    pub c: BaseFn<S>,
    pub gamma: BaseFn<S>,
    /// `Gamma >= sup gamma`.
    pub rate_bound: S,
    pub horizon: S,
}

impl<S: Scalar> ThreeRegimeExample<S> {
    /// `c(x) = 1/(1+x^2)`, `gamma(x) = 1 + exp(-x^2)/2`, `Gamma = 1.5`.
    pub fn standard(eps: S) -> Self {
        Self {
            eps,
            c: BaseFn {
                f: Arc::new(|x: S| S::one() / (S::one() + x * x)),
                sup: S::one(),
                // max |c'| = 3 sqrt(3) / 8 at x = 1/sqrt(3)
                lipschitz: S::lit(3.0 * 3f64.sqrt() / 8.0),
            },
            gamma: BaseFn {
                f: Arc::new(|x: S| S::one() + S::lit(0.5) * (-x * x).exp()),
                sup: S::lit(1.5),
                // max |x exp(-x^2)| = exp(-1/2)/sqrt(2)
                lipschitz: S::lit((-0.5f64).exp() / 2f64.sqrt()),
            },
            rate_bound: S::lit(1.5),
            horizon: S::one(),
        }
    }

    pub fn with_eps(&self, eps: S) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn alpha(&self) -> S {
        S::lit(balance_alpha())
    }

    pub fn beta1(&self) -> S {
        S::lit(beta1())
    }

    pub fn beta2(&self) -> S {
        S::lit(beta2())
    }

    /// `A = (0, 3eps]`, `B = (3eps, 4eps]`, `C = (4eps, 1]`.
    pub fn split(&self) -> RegimeSplit<S> {
        let e = self.eps;
        RegimeSplit {
            a: Region::interval(S::zero(), S::lit(3.0) * e),
            b: Region::interval(S::lit(3.0) * e, S::lit(4.0) * e),
            c: Region::interval(S::lit(4.0) * e, S::one()),
        }
    }

    pub fn source_measure(&self) -> Result<MarkMeasure<S>> {
        let e = self.eps;
        if !(e > S::zero() && S::lit(4.0) * e < S::one()) {
            return Err(Error::InvalidArgument(format!("eps must lie in (0, 1/4), got {e}")));
        }
        let piece = |lo: S, hi: S, exponent: f64| DensityPiece {
            lo,
            hi,
            density: Density::PowerLaw { coef: S::one(), exponent: S::lit(exponent), origin: S::zero() },
        };
        MarkMeasure::density(vec![
            piece(e, S::lit(3.0) * e, -2.0),
            piece(S::lit(3.0) * e, S::lit(4.0) * e, -1.5),
            piece(S::lit(4.0) * e, S::one(), -1.0),
        ])
    }

    pub fn limit_measure(&self) -> MarkMeasure<S> {
        MarkMeasure::power_law(S::zero(), S::one(), S::one(), -S::one()).expect("valid power law")
    }

    fn rate_fn(&self) -> impl Fn(S, S, &[S]) -> S + Send + Sync + 'static {
        let g = self.gamma.f.clone();
        move |_, _, x: &[S]| g(x[0])
    }

    pub fn source_model(&self) -> Result<JumpModel<S>> {
        let measure = self.source_measure()?;
        let c = self.c.f.clone();
        let two_eps = S::lit(2.0) * self.eps;
        let alpha = self.alpha();
        let (lc, lg) = (self.c.lipschitz, self.gamma.lipschitz);
        let cs = CoefficientSet::builder(1)
            .jump(move |_, z, x, out| {
                let sign = if z > two_eps { S::one() } else { -alpha };
                out[0] = c(x[0]) * z.sqrt() * sign;
            })
            .rate(self.rate_fn(), self.rate_bound)
            .lipschitz(move |z| lc * z.sqrt() * if z > two_eps { S::one() } else { alpha }, move |_| lg)
            .breakpoints(vec![two_eps])
            .build()?;
        JumpModel::new(cs, measure, self.horizon)
    }

    /// Limit coefficients; `extra_drift_floor = z0 > 0` adds the mean
    /// `2 sqrt(z0) c gamma` of the jumps below `z0`, for simulation with the
    /// jumps restricted to `(z0, 1]`.
    fn limit_with_floor(&self, z0: S) -> Result<JumpModel<S>> {
        let (c1, c2, c3) = (self.c.f.clone(), self.c.f.clone(), self.c.f.clone());
        let (g1, g2) = (self.gamma.f.clone(), self.gamma.f.clone());
        let (b1, b2) = (self.beta1(), self.beta2());
        let below = S::lit(2.0) * z0.sqrt();
        let (lc, lg) = (self.c.lipschitz, self.gamma.lipschitz);
        let cs = CoefficientSet::builder(1)
            .column(move |_, x, out| out[0] = b1 * c1(x[0]) * g1(x[0]).sqrt())
            .drift(move |_, x, out| out[0] = (b2 + below) * c2(x[0]) * g2(x[0]))
            .jump(move |_, z, x, out| out[0] = c3(x[0]) * z.sqrt())
            .rate(self.rate_fn(), self.rate_bound)
            .lipschitz(move |z| lc * z.sqrt(), move |_| lg)
            .build()?;
        JumpModel::new(cs, self.limit_measure(), self.horizon)
    }

    pub fn limit_model(&self) -> Result<JumpModel<S>> {
        self.limit_with_floor(S::zero())
    }

    /// Limit model for simulation: jumps below `z0` replaced by their mean.
    /// Simulate it on [`Self::simulation_region`].
    pub fn limit_simulation_model(&self, z0: S) -> Result<JumpModel<S>> {
        self.limit_with_floor(z0)
    }

    pub fn simulation_region(z0: S) -> Region<S> {
        Region::interval(z0, S::one())
    }

    /// Hybrid model at this `eps` built by quadrature from the source.
    pub fn hybrid_model(&self, tol: Tolerance<S>) -> Result<JumpModel<S>> {
        build_hybrid(&self.source_model()?, &self.split(), tol)
    }
}

/// Settings of the three-regime weak-error experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub eps: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub paths: usize,
    pub seed: u64,
    pub x0: f64,
    /// Jumps of the limit below this mark are replaced by their mean.
    pub limit_floor: f64,
    pub level: f64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.02, 0.01, 0.005, 0.0025],
            horizon: 1.0,
            step: 1e-3,
            paths: 200_000,
            seed: 2024,
            x0: 0.0,
            limit_floor: 1e-10,
            level: weakerr::DEFAULT_LEVEL,
            workers: 0,
        }
    }
}

/// Stream seed for the `k`-th sample set of an experiment.
pub fn derived_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// `|E f(X^eps_T) - E f(X_T)|` for every `eps`, the source by fictive
/// shocks and the limit by the hybrid simulator, and the fitted rate.
pub fn three_regime_experiment(
    example: &ThreeRegimeExample<f64>,
    f: &TestFunction<f64>,
    cfg: &ExperimentConfig,
) -> Result<WeakErrorReport> {
    if cfg.eps.len() < 3 {
        return Err(Error::InvalidArgument("at least three eps values are needed".into()));
    }
    let x0 = [cfg.x0];
    let ex = ThreeRegimeExample { horizon: cfg.horizon, ..example.clone() };
    let limit = ex.limit_simulation_model(cfg.limit_floor)?;
    let sim = SimConfig::new(cfg.horizon, cfg.step, derived_seed(cfg.seed, 0), cfg.paths, Representation::Hybrid);
    let limit_samples = simulate::terminal_samples(
        &limit,
        &ThreeRegimeExample::<f64>::simulation_region(cfg.limit_floor),
        &x0,
        |x| f.value(x),
        &sim,
        cfg.workers,
    )?;
    let mut errors = Vec::with_capacity(cfg.eps.len());
    for (k, &eps) in cfg.eps.iter().enumerate() {
        let source = ex.with_eps(eps).source_model()?;
        let sim = SimConfig::new(cfg.horizon, cfg.step, derived_seed(cfg.seed, k as u64 + 1), cfg.paths, Representation::Fictive);
        let samples = simulate::terminal_samples(&source, &Region::all(), &x0, |x| f.value(x), &sim, cfg.workers)?;
        errors.push(weakerr::weak_error_with(&samples, &limit_samples, cfg.level, weakerr::Interval::Normal)?);
        log::info!("eps={eps}: error {:?}", errors.last());
    }
    Ok(WeakErrorReport::new("epsilon", cfg.eps.clone(), errors, cfg.level))
}

/// One row of the coupled localization sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub eps: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub alpha_gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSweep {
    pub calibrated_c: f64,
    pub lipschitz_sum: f64,
    pub rows: Vec<LocalizationRow>,
}

impl LocalizationSweep {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epsilon,empirical,std_error,alpha_gap,bound,calibrated_c")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.eps, r.empirical, r.std_error, r.alpha_gap, r.bound, self.calibrated_c)?;
        }
        Ok(())
    }
}

/// Coupled `E sup |X^{G1} - X^{G2}|` on the limit model with
/// `G1 = (4 eps, 1]` and `G2 = (floor, 1]`, against the localization bound
/// with its constant calibrated on the first `eps` and then frozen.
pub fn localization_sweep(
    example: &ThreeRegimeExample<f64>,
    eps_list: &[f64],
    floor: f64,
    grid: &Grid<f64>,
    cfg: &ExperimentConfig,
) -> Result<LocalizationSweep> {
    use crate::bounds;
    let ex = ThreeRegimeExample { horizon: cfg.horizon, ..example.clone() };
    let model = ex.limit_model()?;
    let g2 = Region::interval(floor, 1.0);
    let x0 = [cfg.x0];
    let sim = SimConfig::new(cfg.horizon, cfg.step, cfg.seed, cfg.paths, Representation::Hybrid);
    let lip = bounds::lipschitz_sum(&model, &g2, grid, Tolerance::default())?;
    let mut rows = Vec::new();
    let mut calibrated = None;
    for (k, &eps) in eps_list.iter().enumerate() {
        let g1 = Region::interval(4.0 * eps, 1.0);
        let gaps = simulate::par_map_streams(derived_seed(cfg.seed, k as u64), cfg.paths, cfg.workers, |rng, _| {
            Ok(simulate::simulate_coupled(&model, &g1, &g2, &x0, &sim, rng)?.sup_gap)
        })?;
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let alpha_gap = crate::model::alpha_of(&model, &g2.difference(&g1), grid)?;
        let c = *calibrated.get_or_insert_with(|| bounds::calibrate_localization(mean, 0.0, cfg.horizon, alpha_gap, lip));
        let bound = bounds::localization_formula(0.0, cfg.horizon, alpha_gap, lip, c);
        rows.push(LocalizationRow { eps, empirical: mean, std_error: (var / n).sqrt(), alpha_gap, bound });
    }
    Ok(LocalizationSweep { calibrated_c: calibrated.unwrap_or(0.0), lipschitz_sum: lip, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        assert_relative_eq!(balance_alpha(), 0.44302, epsilon = 5e-6);
        assert_relative_eq!(beta1(), 0.73587, epsilon = 5e-6);
        assert_relative_eq!(beta2(), 0.28768, epsilon = 5e-6);
        assert_relative_eq!(source_total_mass(0.01), 71.4326, epsilon = 1e-3);
    }

    #[test]
    fn split_covers_source() {
        let ex = ThreeRegimeExample::<f64>::standard(0.01);
        let m = ex.source_measure().unwrap();
        ex.split().validate(&m).unwrap();
        assert_relative_eq!(m.total_mass().unwrap(), source_total_mass(0.01), max_relative = 1e-13);
        ex.split().validate(&ex.limit_measure()).unwrap();
    }
}
