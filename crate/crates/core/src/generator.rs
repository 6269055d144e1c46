//! Infinitesimal generator
//!
//! `L f(x) = 1/2 Tr[a D^2 f] + b . grad f + int (f(x + c) - f(x)) gamma dmu`
//!
//! evaluated by quadrature, and the weighted distance between two generators
//! on a grid.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deriv::{self, FdConfig};
use crate::error::{to_f64_vec, Error, Result};
use crate::measure::Region;
use crate::model::{Grid, JumpModel};
use crate::quadrature::Tolerance;
use crate::Scalar;

type ScalarFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;
type VecFn<S> = Arc<dyn Fn(&[S], &mut [S]) + Send + Sync>;

/// Smooth test function with optional exact gradient and Hessian (row-major)
/// and declared bounds on `||f||_{q,inf}`, the sum of the sup norms of `f`
/// and its derivatives up to order `q`.
#[derive(Clone)]
pub struct TestFunction<S: Scalar> {
    dim: usize,
    f: ScalarFn<S>,
    grad: Option<VecFn<S>>,
    hess: Option<VecFn<S>>,
    norm_bounds: [Option<S>; 4],
    fd: FdConfig<S>,
}

impl<S: Scalar> fmt::Debug for TestFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("dim", &self.dim)
            .field("gradient", &self.grad.is_some())
            .field("hessian", &self.hess.is_some())
            .field("norm_bounds", &self.norm_bounds)
            .finish()
    }
}

impl<S: Scalar> TestFunction<S> {
    pub fn new(dim: usize, f: impl Fn(&[S]) -> S + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f), grad: None, hess: None, norm_bounds: [None; 4], fd: FdConfig::default() }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[S], &mut [S]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[S], &mut [S]) + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }

    pub fn with_norm_bounds(mut self, bounds: [Option<S>; 4]) -> Self {
        self.norm_bounds = bounds;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn value(&self, x: &[S]) -> S {
        (self.f)(x)
    }

    pub fn gradient(&self, x: &[S], out: &mut [S]) {
        match &self.grad {
            Some(g) => g(x, out),
            None => self.fd_gradient(x, out),
        }
    }

    pub fn hessian(&self, x: &[S], out: &mut [S]) {
        match &self.hess {
            Some(h) => h(x, out),
            None => self.fd_hessian(x, out),
        }
    }

    pub fn fd_gradient(&self, x: &[S], out: &mut [S]) {
        let h = self.fd.step(x, 1);
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = deriv::partial_scalar(|y| (self.f)(y), x, &[i], h);
        }
    }

    pub fn fd_hessian(&self, x: &[S], out: &mut [S]) {
        let h = self.fd.step(x, 2);
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = deriv::partial_scalar(|y| (self.f)(y), x, &[i, j], h);
            }
        }
    }

    /// Declared `||f||_{q,inf}` for `q <= 3`.
    pub fn norm_bound(&self, q: usize) -> Option<S> {
        self.norm_bounds.get(q).copied().flatten()
    }

    pub fn constant(dim: usize, c: S) -> Self {
        Self::new(dim, move |_| c)
            .with_gradient(|_, g| g.iter_mut().for_each(|v| *v = S::zero()))
            .with_hessian(|_, h| h.iter_mut().for_each(|v| *v = S::zero()))
            .with_norm_bounds([Some(c.abs()); 4])
    }

    /// `f(x) = w . x + c`.
    pub fn affine(w: Vec<S>, c: S) -> Self {
        let dim = w.len();
        let wf = w.clone();
        let wg = w;
        Self::new(dim, move |x| crate::dot(&wf, x) + c)
            .with_gradient(move |_, g| g.copy_from_slice(&wg))
            .with_hessian(|_, h| h.iter_mut().for_each(|v| *v = S::zero()))
    }

    /// `f(x) = |x|^2`.
    pub fn square(dim: usize) -> Self {
        Self::new(dim, |x| crate::dot(x, x))
            .with_gradient(|x, g| g.iter_mut().zip(x).for_each(|(o, &v)| *o = v + v))
            .with_hessian(move |_, h| {
                h.iter_mut().enumerate().for_each(|(k, v)| *v = if k % (dim + 1) == 0 { S::lit(2.0) } else { S::zero() })
            })
    }

    /// `f(x) = sin(x)` in one dimension; `||f||_{q,inf} = q + 1`.
    pub fn sine() -> Self {
        Self::new(1, |x| x[0].sin())
            .with_gradient(|x, g| g[0] = x[0].cos())
            .with_hessian(|x, h| h[0] = -x[0].sin())
            .with_norm_bounds([Some(S::one()), Some(S::lit(2.0)), Some(S::lit(3.0)), Some(S::lit(4.0))])
    }

    /// `f(x) = exp(-|x|^2)`.
    pub fn gaussian(dim: usize) -> Self {
        Self::new(dim, |x| (-crate::dot(x, x)).exp())
            .with_gradient(|x, g| {
                let e = (-crate::dot(x, x)).exp();
                g.iter_mut().zip(x).for_each(|(o, &v)| *o = -S::lit(2.0) * v * e);
            })
            .with_hessian(move |x, h| {
                let e = (-crate::dot(x, x)).exp();
                for i in 0..dim {
                    for j in 0..dim {
                        let delta = if i == j { S::lit(2.0) } else { S::zero() };
                        h[i * dim + j] = (S::lit(4.0) * x[i] * x[j] - delta) * e;
                    }
                }
            })
    }
}

/// `psi_k(x) = (1 + |x|^2)^{k/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub k: u32,
}

impl WeightedNorm {
    pub fn psi<S: Scalar>(&self, x: &[S]) -> S {
        if self.k == 0 {
            return S::one();
        }
        (S::one() + crate::dot(x, x)).powf(S::lit(self.k as f64 / 2.0))
    }
}

/// How the jump integral is formed.
#[derive(Debug, Clone, Default)]
pub enum JumpForm<S: Scalar> {
    /// `int (f(x+c) - f(x)) gamma dmu`; requires absolute convergence.
    #[default]
    Plain,
    /// Jumps on `near` are compensated:
    /// `int_near (f(x+c) - f(x) - grad f . c) gamma dmu + int_far (f(x+c) - f(x)) gamma dmu`.
    Compensated { near: Region<S> },
}

#[derive(Debug, Clone)]
pub struct GeneratorOptions<S: Scalar> {
    pub tol: Tolerance<S>,
    pub jumps: JumpForm<S>,
}

impl<S: Scalar> Default for GeneratorOptions<S> {
    fn default() -> Self {
        Self { tol: Tolerance::new(S::lit(1e-10).max(S::epsilon() * S::lit(64.0))), jumps: JumpForm::Plain }
    }
}

/// The three parts of `L f(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorTerms<S> {
    pub diffusion: S,
    pub drift: S,
    pub jump: S,
}

impl<S: Scalar> GeneratorTerms<S> {
    pub fn total(&self) -> S {
        self.diffusion + self.drift + self.jump
    }
}

pub fn generator_terms<S: Scalar>(
    model: &JumpModel<S>,
    f: &TestFunction<S>,
    t: S,
    x: &[S],
    opts: &GeneratorOptions<S>,
) -> Result<GeneratorTerms<S>> {
    let d = model.dim();
    if f.dim() != d || x.len() != d {
        return Err(Error::InvalidArgument("test function, state and model dimensions differ".into()));
    }
    let cs = &model.coefficients;
    let non_finite = |what| Error::NonFiniteCoefficient { what, t: t.as_f64(), x: to_f64_vec(x) };

    let mut grad = vec![S::zero(); d];
    f.gradient(x, &mut grad);
    let mut b = vec![S::zero(); d];
    cs.drift_at(t, x, &mut b);
    let drift = crate::dot(&b, &grad);
    if !drift.is_finite() {
        return Err(non_finite("drift"));
    }

    let diffusion = if cs.has_flow() && !matches!(cs.diffusion(), crate::model::Diffusion::None) {
        let mut a = vec![S::zero(); d * d];
        cs.covariance_at(t, x, &mut a);
        let mut h = vec![S::zero(); d * d];
        f.hessian(x, &mut h);
        let tr = a.iter().zip(&h).fold(S::zero(), |s, (&p, &q)| s + p * q);
        S::lit(0.5) * tr
    } else {
        S::zero()
    };
    if !diffusion.is_finite() {
        return Err(non_finite("diffusion"));
    }

    let jump = if cs.has_jumps() {
        let fx = f.value(x);
        let scratch = RefCell::new((vec![S::zero(); d], vec![S::zero(); d]));
        let integrand = |z: S, compensate: bool| -> S {
            let mut guard = scratch.borrow_mut();
            let (c, y) = &mut *guard;
            cs.jump_at(t, z, x, c);
            for i in 0..d {
                y[i] = x[i] + c[i];
            }
            let mut v = f.value(y) - fx;
            if compensate {
                v = v - crate::dot(&grad, c);
            }
            v * cs.rate_at(t, z, x)
        };
        let all = Region::all();
        let v = match &opts.jumps {
            JumpForm::Plain => model.integrate_marks(&all, opts.tol, |z| integrand(z, false))?,
            JumpForm::Compensated { near } => {
                model.integrate_marks(near, opts.tol, |z| integrand(z, true))?
                    + model.integrate_marks(&near.complement(), opts.tol, |z| integrand(z, false))?
            }
        };
        if !v.is_finite() {
            return Err(non_finite("jump integral"));
        }
        v
    } else {
        S::zero()
    };
    Ok(GeneratorTerms { diffusion, drift, jump })
}

/// `L_t f(x)`.
pub fn apply_generator<S: Scalar>(
    model: &JumpModel<S>,
    f: &TestFunction<S>,
    t: S,
    x: &[S],
    opts: &GeneratorOptions<S>,
) -> Result<S> {
    Ok(generator_terms(model, f, t, x, opts)?.total())
}

/// `max_grid |L^A f - L^B f| / psi_k`.
pub fn generator_distance<S: Scalar>(
    a: &JumpModel<S>,
    b: &JumpModel<S>,
    f: &TestFunction<S>,
    grid: &Grid<S>,
    k: u32,
    opts: &GeneratorOptions<S>,
) -> Result<S> {
    let w = WeightedNorm { k };
    let mut best = S::zero();
    for (t, x) in &grid.points {
        let la = apply_generator(a, f, *t, x, opts)?;
        let lb = apply_generator(b, f, *t, x, opts)?;
        best = best.max((la - lb).abs() / w.psi(x));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MarkMeasure;
    use crate::model::CoefficientSet;
    use approx::assert_relative_eq;

    fn unit_measure() -> MarkMeasure<f64> {
        MarkMeasure::power_law(0.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn affine_without_jumps_is_drift() {
        let cs = CoefficientSet::builder(2)
            .drift(|_, x: &[f64], o: &mut [f64]| {
                o[0] = x[1];
                o[1] = -3.0;
            })
            .covariance(|_, _, a: &mut [f64]| a.copy_from_slice(&[1.0, 0.2, 0.2, 2.0]))
            .build()
            .unwrap();
        let m = JumpModel::new(cs, unit_measure(), 1.0).unwrap();
        let f = TestFunction::affine(vec![2.0, 0.5], 1.0);
        let v = apply_generator(&m, &f, 0.0, &[0.3, 0.7], &GeneratorOptions::default()).unwrap();
        assert_relative_eq!(v, 2.0 * 0.7 - 1.5, epsilon = 1e-14);
    }

    #[test]
    fn square_with_unit_covariance() {
        let cs = CoefficientSet::builder(1).covariance(|_, _, a: &mut [f64]| a[0] = 2.0).build().unwrap();
        let m = JumpModel::new(cs, unit_measure(), 1.0).unwrap();
        let v = apply_generator(&m, &TestFunction::square(1), 0.0, &[0.4], &GeneratorOptions::default()).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn compensated_form_differs_by_mean_jump() {
        let cs = CoefficientSet::builder(1)
            .jump(|_, z, _, o: &mut [f64]| o[0] = z)
            .rate(|_, _, _| 1.0, 1.0)
            .build()
            .unwrap();
        let m = JumpModel::new(cs, unit_measure(), 1.0).unwrap();
        let f = TestFunction::sine();
        let x = [0.3];
        let plain = apply_generator(&m, &f, 0.0, &x, &GeneratorOptions::default()).unwrap();
        let opts = GeneratorOptions { jumps: JumpForm::Compensated { near: Region::interval(0.0, 0.5) }, ..Default::default() };
        let comp = apply_generator(&m, &f, 0.0, &x, &opts).unwrap();
        // int_0^{1/2} z dz * cos(x)
        assert_relative_eq!(plain - comp, 0.125 * 0.3f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn test_function_derivatives_match_fd() {
        let f = TestFunction::gaussian(2);
        let x = [0.3, -0.4];
        let (mut g, mut gf) = ([0.0; 2], [0.0; 2]);
        f.gradient(&x, &mut g);
        f.fd_gradient(&x, &mut gf);
        let (mut h, mut hf) = ([0.0; 4], [0.0; 4]);
        f.hessian(&x, &mut h);
        f.fd_hessian(&x, &mut hf);
        let fd = FdConfig::<f64>::default();
        let (s1, s2) = (fd.step(&x, 1), fd.step(&x, 2));
        for i in 0..2 {
            assert!((g[i] - gf[i]).abs() < 10.0 * s1 * s1);
        }
        for i in 0..4 {
            assert!((h[i] - hf[i]).abs() < 10.0 * s2 * s2);
        }
    }

    #[test]
    fn psi_normalization() {
        assert_eq!(WeightedNorm { k: 0 }.psi(&[3.0]), 1.0);
        assert_eq!(WeightedNorm { k: 2 }.psi(&[0.0, 0.0]), 1.0);
        assert_relative_eq!(WeightedNorm { k: 2 }.psi(&[1.0, 2.0]), 6.0);
    }
}
