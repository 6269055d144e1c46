//! Coefficients and mark measures of the jump equation
//!
//! `dX = b(t,X) dt + sigma(t,X) dW + int c(t,z,X-) 1{u <= gamma(t,z,X-)} N(dt,dz,du)`
//!
//! with `u` uniform on `[0, 2 Gamma]` and `gamma <= Gamma`, plus numerical
//! checks of the standing assumptions on finite grids.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deriv::{self, FdConfig};
use crate::error::{to_f64_vec, Error, Result};
use crate::linalg;
use crate::measure::{MarkMeasure, Region};
use crate::quadrature::Tolerance;
use crate::Scalar;

pub type VecField<S> = Arc<dyn Fn(S, &[S], &mut [S]) + Send + Sync>;
/// Row-major `d x d` matrix field.
pub type MatField<S> = Arc<dyn Fn(S, &[S], &mut [S]) + Send + Sync>;
pub type JumpField<S> = Arc<dyn Fn(S, S, &[S], &mut [S]) + Send + Sync>;
pub type RateField<S> = Arc<dyn Fn(S, S, &[S]) -> S + Send + Sync>;
pub type MarkFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

pub type DriftDerivative<S> = Arc<dyn Fn(S, &[S], &[usize], &mut [S]) + Send + Sync>;
/// `(t, x, column l, alpha, out)`.
pub type ColumnDerivative<S> = Arc<dyn Fn(S, &[S], usize, &[usize], &mut [S]) + Send + Sync>;
pub type JumpDerivative<S> = Arc<dyn Fn(S, S, &[S], &[usize], &mut [S]) + Send + Sync>;
pub type LogRateDerivative<S> = Arc<dyn Fn(S, S, &[S], &[usize]) -> S + Send + Sync>;

#[derive(Clone, Default)]
pub enum Diffusion<S> {
    #[default]
    None,
    /// Finitely many Brownian drivers: `sum_l sigma_l(t,x) dW^l`.
    Columns(Vec<VecField<S>>),
    /// Covariance `a(t,x)`; simulated through its square root.
    Covariance(MatField<S>),
}

impl<S> fmt::Debug for Diffusion<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::None => write!(f, "None"),
            Diffusion::Columns(c) => write!(f, "Columns({})", c.len()),
            Diffusion::Covariance(_) => write!(f, "Covariance"),
        }
    }
}

/// Exact partial derivatives in `x`, up to `max_order`. Missing entries fall
/// back to finite differences when those are enabled.
#[derive(Clone, Default)]
pub struct DerivativeOracles<S> {
    pub max_order: usize,
    pub drift: Option<DriftDerivative<S>>,
    pub diffusion_columns: Option<ColumnDerivative<S>>,
    pub jump_amplitude: Option<JumpDerivative<S>>,
    pub log_rate: Option<LogRateDerivative<S>>,
}

/// Lipschitz moduli `l_c(z)`, `l_gamma(z)` of the jump coefficients in `x`.
#[derive(Clone)]
pub struct LipschitzModuli<S> {
    pub amplitude: MarkFn<S>,
    pub rate: MarkFn<S>,
}

#[derive(Clone)]
pub struct CoefficientSet<S: Scalar> {
    dim: usize,
    drift: Option<VecField<S>>,
    diffusion: Diffusion<S>,
    jump_amplitude: Option<JumpField<S>>,
    jump_rate: RateField<S>,
    rate_bound: S,
    lipschitz: Option<LipschitzModuli<S>>,
    oracles: Option<DerivativeOracles<S>>,
    fd: FdConfig<S>,
    mark_breakpoints: Vec<S>,
}

impl<S: Scalar> fmt::Debug for CoefficientSet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("dim", &self.dim)
            .field("drift", &self.drift.is_some())
            .field("diffusion", &self.diffusion)
            .field("jumps", &self.jump_amplitude.is_some())
            .field("rate_bound", &self.rate_bound)
            .finish()
    }
}

pub struct CoefficientBuilder<S: Scalar> {
    inner: CoefficientSet<S>,
}

impl<S: Scalar> CoefficientBuilder<S> {
    pub fn drift(mut self, f: impl Fn(S, &[S], &mut [S]) + Send + Sync + 'static) -> Self {
        self.inner.drift = Some(Arc::new(f));
        self
    }

    pub fn drift_field(mut self, f: Option<VecField<S>>) -> Self {
        self.inner.drift = f;
        self
    }

    pub fn column(mut self, f: impl Fn(S, &[S], &mut [S]) + Send + Sync + 'static) -> Self {
        match &mut self.inner.diffusion {
            Diffusion::Columns(cols) => cols.push(Arc::new(f)),
            _ => self.inner.diffusion = Diffusion::Columns(vec![Arc::new(f)]),
        }
        self
    }

    pub fn covariance(mut self, f: impl Fn(S, &[S], &mut [S]) + Send + Sync + 'static) -> Self {
        self.inner.diffusion = Diffusion::Covariance(Arc::new(f));
        self
    }

    pub fn diffusion(mut self, d: Diffusion<S>) -> Self {
        self.inner.diffusion = d;
        self
    }

    pub fn jump(mut self, f: impl Fn(S, S, &[S], &mut [S]) + Send + Sync + 'static) -> Self {
        self.inner.jump_amplitude = Some(Arc::new(f));
        self
    }

    pub fn jump_field(mut self, f: Option<JumpField<S>>) -> Self {
        self.inner.jump_amplitude = f;
        self
    }

    pub fn rate(mut self, f: impl Fn(S, S, &[S]) -> S + Send + Sync + 'static, bound: S) -> Self {
        self.inner.jump_rate = Arc::new(f);
        self.inner.rate_bound = bound;
        self
    }

    pub fn rate_field(mut self, f: RateField<S>, bound: S) -> Self {
        self.inner.jump_rate = f;
        self.inner.rate_bound = bound;
        self
    }

    pub fn lipschitz(
        mut self,
        amplitude: impl Fn(S) -> S + Send + Sync + 'static,
        rate: impl Fn(S) -> S + Send + Sync + 'static,
    ) -> Self {
        self.inner.lipschitz = Some(LipschitzModuli { amplitude: Arc::new(amplitude), rate: Arc::new(rate) });
        self
    }

    pub fn oracles(mut self, o: DerivativeOracles<S>) -> Self {
        self.inner.oracles = Some(o);
        self
    }

    pub fn finite_differences(mut self, fd: FdConfig<S>) -> Self {
        self.inner.fd = fd;
        self
    }

    /// Marks where coefficients are discontinuous; quadrature splits there.
    pub fn breakpoints(mut self, z: Vec<S>) -> Self {
        self.inner.mark_breakpoints = z;
        self
    }

    pub fn build(self) -> Result<CoefficientSet<S>> {
        let c = self.inner;
        if c.dim == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        if !(c.rate_bound > S::zero()) || !c.rate_bound.is_finite() {
            return Err(Error::InvalidArgument(format!("rate bound must be positive and finite, got {}", c.rate_bound)));
        }
        Ok(c)
    }
}

impl<S: Scalar> CoefficientSet<S> {
    /// Starts a coefficient set in dimension `dim` with no drift, no
    /// diffusion, no jumps and `gamma = Gamma = 1`.
    pub fn builder(dim: usize) -> CoefficientBuilder<S> {
        CoefficientBuilder {
            inner: CoefficientSet {
                dim,
                drift: None,
                diffusion: Diffusion::None,
                jump_amplitude: None,
                jump_rate: Arc::new(|_, _, _| S::one()),
                rate_bound: S::one(),
                lipschitz: None,
                oracles: None,
                fd: FdConfig::default(),
                mark_breakpoints: Vec::new(),
            },
        }
    }

    /// Builder preloaded with these coefficients.
    pub fn to_builder(&self) -> CoefficientBuilder<S> {
        CoefficientBuilder { inner: self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rate_bound(&self) -> S {
        self.rate_bound
    }

    pub fn diffusion(&self) -> &Diffusion<S> {
        &self.diffusion
    }

    pub fn drift_field(&self) -> Option<&VecField<S>> {
        self.drift.as_ref()
    }

    pub fn jump_field(&self) -> Option<&JumpField<S>> {
        self.jump_amplitude.as_ref()
    }

    pub fn rate_field(&self) -> &RateField<S> {
        &self.jump_rate
    }

    pub fn lipschitz(&self) -> Option<&LipschitzModuli<S>> {
        self.lipschitz.as_ref()
    }

    pub fn oracles(&self) -> Option<&DerivativeOracles<S>> {
        self.oracles.as_ref()
    }

    pub fn fd(&self) -> FdConfig<S> {
        self.fd
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.mark_breakpoints
    }

    pub fn has_flow(&self) -> bool {
        self.drift.is_some() || !matches!(self.diffusion, Diffusion::None)
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_amplitude.is_some()
    }

    #[inline]
    pub fn drift_at(&self, t: S, x: &[S], out: &mut [S]) {
        match &self.drift {
            Some(b) => b(t, x, out),
            None => out.iter_mut().for_each(|v| *v = S::zero()),
        }
    }

    #[inline]
    pub fn jump_at(&self, t: S, z: S, x: &[S], out: &mut [S]) {
        match &self.jump_amplitude {
            Some(c) => c(t, z, x, out),
            None => out.iter_mut().for_each(|v| *v = S::zero()),
        }
    }

    #[inline]
    pub fn rate_at(&self, t: S, z: S, x: &[S]) -> S {
        (self.jump_rate)(t, z, x)
    }

    /// `a(t,x)` as a row-major `d x d` matrix.
    pub fn covariance_at(&self, t: S, x: &[S], out: &mut [S]) {
        let d = self.dim;
        out[..d * d].iter_mut().for_each(|v| *v = S::zero());
        match &self.diffusion {
            Diffusion::None => {}
            Diffusion::Covariance(a) => a(t, x, out),
            Diffusion::Columns(cols) => {
                let mut s = vec![S::zero(); d];
                for col in cols {
                    col(t, x, &mut s);
                    for i in 0..d {
                        for j in 0..d {
                            out[i * d + j] = out[i * d + j] + s[i] * s[j];
                        }
                    }
                }
            }
        }
    }

    fn missing(&self, what: &'static str, order: usize) -> Error {
        Error::MissingDerivative { what, order, available: self.oracles.as_ref().map_or(0, |o| o.max_order) }
    }

    fn oracle_order_ok(&self, order: usize) -> bool {
        self.oracles.as_ref().is_some_and(|o| order <= o.max_order)
    }

    /// `d^alpha b(t,x)`.
    pub fn drift_derivative(&self, t: S, x: &[S], alpha: &[usize], out: &mut [S]) -> Result<()> {
        let Some(b) = &self.drift else {
            out.iter_mut().for_each(|v| *v = S::zero());
            return Ok(());
        };
        if alpha.is_empty() {
            b(t, x, out);
            return Ok(());
        }
        if let (true, Some(o)) = (self.oracle_order_ok(alpha.len()), self.oracles.as_ref().and_then(|o| o.drift.as_ref())) {
            o(t, x, alpha, out);
            return Ok(());
        }
        if !self.fd.enabled {
            return Err(self.missing("drift", alpha.len()));
        }
        let h = self.fd.step(x, alpha.len());
        deriv::partial(|y, o| b(t, y, o), x, alpha, h, out);
        Ok(())
    }

    /// `|d^alpha sigma(t,.,x)|` in the Hilbert–Schmidt sense: the root of
    /// `sum_l |d^alpha sigma_l|^2` for columns, the Frobenius norm of
    /// `d^alpha a^{1/2}` for a covariance field.
    pub fn diffusion_derivative_norm(&self, t: S, x: &[S], alpha: &[usize]) -> Result<S> {
        let d = self.dim;
        match &self.diffusion {
            Diffusion::None => Ok(S::zero()),
            Diffusion::Columns(cols) => {
                let mut acc = S::zero();
                let mut buf = vec![S::zero(); d];
                let oracle = if self.oracle_order_ok(alpha.len()) {
                    self.oracles.as_ref().and_then(|o| o.diffusion_columns.as_ref())
                } else {
                    None
                };
                for (l, col) in cols.iter().enumerate() {
                    if alpha.is_empty() {
                        col(t, x, &mut buf);
                    } else if let Some(o) = oracle {
                        o(t, x, l, alpha, &mut buf);
                    } else if self.fd.enabled {
                        let h = self.fd.step(x, alpha.len());
                        deriv::partial(|y, out| col(t, y, out), x, alpha, h, &mut buf);
                    } else {
                        return Err(self.missing("diffusion", alpha.len()));
                    }
                    acc = acc + buf.iter().fold(S::zero(), |s, &v| s + v * v);
                }
                Ok(acc.sqrt())
            }
            Diffusion::Covariance(a) => {
                let root = |y: &[S], out: &mut [S]| {
                    let mut m = vec![S::zero(); d * d];
                    a(t, y, &mut m);
                    if linalg::covariance_root(&m, d, out).is_err() {
                        out.iter_mut().for_each(|v| *v = S::nan());
                    }
                };
                let mut buf = vec![S::zero(); d * d];
                if alpha.is_empty() {
                    root(x, &mut buf);
                } else if self.fd.enabled {
                    let h = self.fd.step(x, alpha.len());
                    deriv::partial(root, x, alpha, h, &mut buf);
                } else {
                    return Err(self.missing("diffusion", alpha.len()));
                }
                Ok(crate::norm(&buf))
            }
        }
    }

    /// `d^alpha c(t,z,x)`.
    pub fn jump_derivative(&self, t: S, z: S, x: &[S], alpha: &[usize], out: &mut [S]) -> Result<()> {
        let Some(c) = &self.jump_amplitude else {
            out.iter_mut().for_each(|v| *v = S::zero());
            return Ok(());
        };
        if alpha.is_empty() {
            c(t, z, x, out);
            return Ok(());
        }
        if let (true, Some(o)) =
            (self.oracle_order_ok(alpha.len()), self.oracles.as_ref().and_then(|o| o.jump_amplitude.as_ref()))
        {
            o(t, z, x, alpha, out);
            return Ok(());
        }
        if !self.fd.enabled {
            return Err(self.missing("jump amplitude", alpha.len()));
        }
        let h = self.fd.step(x, alpha.len());
        deriv::partial(|y, o| c(t, z, y, o), x, alpha, h, out);
        Ok(())
    }

    /// `d^alpha ln gamma(t,z,x)`.
    pub fn log_rate_derivative(&self, t: S, z: S, x: &[S], alpha: &[usize]) -> Result<S> {
        if alpha.is_empty() {
            return Ok(self.rate_at(t, z, x).ln());
        }
        if let (true, Some(o)) =
            (self.oracle_order_ok(alpha.len()), self.oracles.as_ref().and_then(|o| o.log_rate.as_ref()))
        {
            return Ok(o(t, z, x, alpha));
        }
        if !self.fd.enabled {
            return Err(self.missing("log rate", alpha.len()));
        }
        let h = self.fd.step(x, alpha.len());
        Ok(deriv::partial_scalar(|y| self.rate_at(t, z, y).ln(), x, alpha, h))
    }
}

/// Coefficients, mark measure and horizon.
#[derive(Clone, Debug)]
pub struct JumpModel<S: Scalar> {
    pub coefficients: Arc<CoefficientSet<S>>,
    pub measure: MarkMeasure<S>,
    pub horizon: S,
}

impl<S: Scalar> JumpModel<S> {
    pub fn new(coefficients: CoefficientSet<S>, measure: MarkMeasure<S>, horizon: S) -> Result<Self> {
        if !(horizon > S::zero()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { coefficients: Arc::new(coefficients), measure, horizon })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    /// Same coefficients, measure replaced by `1_G mu`.
    pub fn restrict(&self, g: &Region<S>) -> Self {
        Self { coefficients: self.coefficients.clone(), measure: self.measure.restrict(g), horizon: self.horizon }
    }

    pub fn with_coefficients(&self, coefficients: CoefficientSet<S>) -> Self {
        Self { coefficients: Arc::new(coefficients), measure: self.measure.clone(), horizon: self.horizon }
    }

    /// `int_G h(z) dmu(z)` with the model's breakpoints.
    pub fn integrate_marks<F: Fn(S) -> S>(&self, g: &Region<S>, tol: Tolerance<S>, f: F) -> Result<S> {
        self.measure.integrate(g, self.coefficients.breakpoints(), f, tol)
    }

    /// `int_G |c(t,z,x)| gamma(t,z,x) mu(dz)` at one point.
    pub fn alpha_at(&self, g: &Region<S>, t: S, x: &[S], tol: Tolerance<S>) -> Result<S> {
        let cs = &self.coefficients;
        if !cs.has_jumps() {
            return Ok(S::zero());
        }
        let mut buf = vec![S::zero(); self.dim()];
        let buf = std::cell::RefCell::new(&mut buf);
        self.integrate_marks(g, tol, |z| {
            let mut b = buf.borrow_mut();
            cs.jump_at(t, z, x, &mut b);
            crate::norm(&b) * cs.rate_at(t, z, x)
        })
    }

    /// Probability `1 - (2 Gamma mu(G))^{-1} int_G gamma dmu` of the no-jump
    /// mark, computed from the complementary integrand `2 Gamma - gamma`.
    pub fn no_jump_probability(&self, g: &Region<S>, t: S, x: &[S], tol: Tolerance<S>) -> Result<S> {
        let mass = self.measure.mass(g)?;
        if mass.is_infinite() {
            return Err(Error::InfiniteMass);
        }
        let two_gamma = S::lit(2.0) * self.coefficients.rate_bound();
        if mass == S::zero() {
            return Ok(S::one());
        }
        let v = self.integrate_marks(g, tol, |z| two_gamma - self.coefficients.rate_at(t, z, x))?;
        Ok(v / (two_gamma * mass))
    }

    /// Total mass `(2 Gamma mu(G))^{-1} int_G gamma dmu` of the jump part of the kernel.
    pub fn jump_kernel_mass(&self, g: &Region<S>, t: S, x: &[S], tol: Tolerance<S>) -> Result<S> {
        let mass = self.measure.mass(g)?;
        if mass.is_infinite() {
            return Err(Error::InfiniteMass);
        }
        if mass == S::zero() {
            return Ok(S::zero());
        }
        let two_gamma = S::lit(2.0) * self.coefficients.rate_bound();
        let v = self.integrate_marks(g, tol, |z| self.coefficients.rate_at(t, z, x))?;
        Ok(v / (two_gamma * mass))
    }
}

/// Finite set of `(t, x)` points on which suprema are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Grid<S> {
    pub points: Vec<(S, Vec<S>)>,
}

impl<S: Scalar> Grid<S> {
    pub fn from_points(points: Vec<(S, Vec<S>)>) -> Self {
        Self { points }
    }

    /// Tensor lattice: `times x prod_i linspace(lo_i, hi_i, n)`.
    pub fn lattice(times: &[S], lo: &[S], hi: &[S], n: usize) -> Self {
        assert_eq!(lo.len(), hi.len());
        let d = lo.len();
        let axis = |i: usize| -> Vec<S> {
            if n <= 1 {
                return vec![S::lit(0.5) * (lo[i] + hi[i])];
            }
            (0..n)
                .map(|k| lo[i] + (hi[i] - lo[i]) * S::from_usize_lossy(k) / S::from_usize_lossy(n - 1))
                .collect()
        };
        let axes: Vec<Vec<S>> = (0..d).map(axis).collect();
        let mut xs: Vec<Vec<S>> = vec![Vec::new()];
        for ax in &axes {
            xs = xs
                .into_iter()
                .flat_map(|p| {
                    ax.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        let points = times.iter().flat_map(|&t| xs.iter().map(move |x| (t, x.clone()))).collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sup over the grid of `f(t, x)`.
pub(crate) fn grid_sup<S: Scalar>(grid: &Grid<S>, mut f: impl FnMut(S, &[S]) -> Result<S>) -> Result<S> {
    let mut best = S::zero();
    for (t, x) in &grid.points {
        let v = f(*t, x)?;
        if v.is_nan() {
            return Err(Error::NonFiniteCoefficient { what: "grid functional", t: t.as_f64(), x: to_f64_vec(x) });
        }
        best = best.max(v);
    }
    Ok(best)
}

pub fn alpha_of<S: Scalar>(model: &JumpModel<S>, g: &Region<S>, grid: &Grid<S>) -> Result<S> {
    alpha_of_with(model, g, grid, Tolerance::default())
}

pub fn alpha_of_with<S: Scalar>(model: &JumpModel<S>, g: &Region<S>, grid: &Grid<S>, tol: Tolerance<S>) -> Result<S> {
    grid_sup(grid, |t, x| model.alpha_at(g, t, x, tol))
}

pub fn restrict<S: Scalar>(model: &JumpModel<S>, g: &Region<S>) -> JumpModel<S> {
    model.restrict(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusSource {
    Declared,
    /// Estimated from sampled difference quotients on the grid.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub grid_points: usize,
    pub probe_marks: usize,
    pub rate_bound: f64,
    pub max_rate: f64,
    /// `max(0, sup gamma - Gamma)`; positive values are reported as errors.
    pub rate_violation: f64,
    pub c_mu: f64,
    pub c_mu_source: ModulusSource,
    pub alpha: f64,
    pub mass: f64,
    pub flags: Vec<String>,
}

/// Local difference-quotient estimate of the Lipschitz moduli at mark `z`
/// over the grid.
fn estimated_moduli<S: Scalar>(cs: &CoefficientSet<S>, grid: &Grid<S>, z: S) -> (S, S) {
    let d = cs.dim();
    let mut lc = S::zero();
    let mut lg = S::zero();
    let mut c0 = vec![S::zero(); d];
    let mut c1 = vec![S::zero(); d];
    let mut y = vec![S::zero(); d];
    for (t, x) in &grid.points {
        let h = S::lit(1e-3) * (S::one() + crate::norm(x));
        cs.jump_at(*t, z, x, &mut c0);
        let g0 = cs.rate_at(*t, z, x);
        for i in 0..d {
            y.copy_from_slice(x);
            y[i] = y[i] + h;
            cs.jump_at(*t, z, &y, &mut c1);
            let dc = c0.iter().zip(&c1).fold(S::zero(), |s, (&a, &b)| s + (a - b) * (a - b)).sqrt();
            lc = lc.max(dc / h);
            lg = lg.max((cs.rate_at(*t, z, &y) - g0).abs() / h);
        }
    }
    (lc, lg)
}

/// `C_mu(gamma, c) = sup int_G (l_gamma |c| + l_c gamma) dmu` and whether the
/// moduli were declared or estimated.
pub fn c_mu<S: Scalar>(model: &JumpModel<S>, g: &Region<S>, grid: &Grid<S>, tol: Tolerance<S>) -> Result<(S, ModulusSource)> {
    let cs = model.coefficients.clone();
    if !cs.has_jumps() {
        return Ok((S::zero(), ModulusSource::Declared));
    }
    let d = model.dim();
    let source = if cs.lipschitz().is_some() { ModulusSource::Declared } else { ModulusSource::Estimated };
    let value = grid_sup(grid, |t, x| {
        let buf = std::cell::RefCell::new(vec![S::zero(); d]);
        model.integrate_marks(g, tol, |z| {
            let (lc, lg) = match cs.lipschitz() {
                Some(m) => ((m.amplitude)(z), (m.rate)(z)),
                None => estimated_moduli(&cs, grid, z),
            };
            let mut b = buf.borrow_mut();
            cs.jump_at(t, z, x, &mut b);
            lg * crate::norm(&b) + lc * cs.rate_at(t, z, x)
        })
    })?;
    Ok((value, source))
}

/// Numerical check of the standing assumptions on `grid` and region `G`.
pub fn validate_model<S: Scalar>(model: &JumpModel<S>, grid: &Grid<S>, g: &Region<S>) -> Result<ValidationReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("validation grid is empty".into()));
    }
    let cs = &model.coefficients;
    let d = model.dim();
    let marks = model.measure.probe_points(g, 16);
    let bound = cs.rate_bound();
    let mut max_rate = S::zero();
    let mut buf = vec![S::zero(); d];
    let mut mat = vec![S::zero(); d * d];
    for (t, x) in &grid.points {
        if x.len() != d {
            return Err(Error::InvalidArgument(format!("grid point of dimension {} in a {d}-dimensional model", x.len())));
        }
        let non_finite = |what| Error::NonFiniteCoefficient { what, t: t.as_f64(), x: to_f64_vec(x) };
        cs.drift_at(*t, x, &mut buf);
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("drift"));
        }
        cs.covariance_at(*t, x, &mut mat);
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("diffusion"));
        }
        for &z in &marks {
            let r = cs.rate_at(*t, z, x);
            if !r.is_finite() {
                return Err(non_finite("jump rate"));
            }
            if r < S::zero() {
                return Err(Error::InvalidArgument(format!("negative jump rate {r} at t={t}, z={z}")));
            }
            if r > bound {
                return Err(Error::RateBoundViolated {
                    value: r.as_f64(),
                    bound: bound.as_f64(),
                    t: t.as_f64(),
                    z: z.as_f64(),
                    x: to_f64_vec(x),
                });
            }
            max_rate = max_rate.max(r);
            cs.jump_at(*t, z, x, &mut buf);
            if buf.iter().any(|v| !v.is_finite()) {
                return Err(non_finite("jump amplitude"));
            }
        }
    }
    let tol = Tolerance::default();
    let mut flags = Vec::new();
    let alpha = alpha_of_with(model, g, grid, tol)?;
    let (cmu, source) = c_mu(model, g, grid, tol)?;
    let mass = model.measure.mass(g)?;
    if mass.is_infinite() {
        flags.push("mu(G) is infinite".to_string());
    }
    if alpha.is_infinite() {
        flags.push("alpha(G) is infinite".to_string());
    }
    if cmu.is_infinite() {
        flags.push("C_mu(gamma, c) is infinite".to_string());
    }
    if source == ModulusSource::Estimated {
        flags.push("Lipschitz moduli estimated from difference quotients".to_string());
    }
    Ok(ValidationReport {
        grid_points: grid.len(),
        probe_marks: marks.len(),
        rate_bound: bound.as_f64(),
        max_rate: max_rate.as_f64(),
        rate_violation: 0.0,
        c_mu: cmu.as_f64(),
        c_mu_source: source,
        alpha: alpha.as_f64(),
        mass: mass.as_f64(),
        flags,
    })
}
