//! Regularity functionals, the derivative-moment constant `Q_q` and the
//! localization bound.
//!
//! Suprema over `(t, x)` are taken on a user-supplied [`Grid`]; the resulting
//! numbers are grid estimates, not certified bounds.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::deriv::{multi_indices, multi_indices_between, MultiIndex};
use crate::error::{Error, Result};
use crate::measure::Region;
use crate::model::{c_mu, grid_sup, Grid, JumpModel};
use crate::quadrature::Tolerance;
use crate::Scalar;

/// `H_q = 1 + 1/2 + ... + 1/q`.
pub fn harmonic(q: usize) -> f64 {
    (1..=q).map(|n| 1.0 / n as f64).sum()
}

/// The exponents `{1, ..., floor(p)} u {p}`.
pub fn bracket_exponents(p: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (1..=p.floor() as usize).map(|k| k as f64).collect();
    if v.last() != Some(&p) {
        v.push(p);
    }
    v
}

/// `|g|_{G,p} = sup_{t,x} (int_G |g|^p gamma dmu)^{1/p}` for every exponent
/// in `ps`, where `g(t, z, x)` is a scalar field.
fn moment_sups<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    grid: &Grid<S>,
    ps: &[f64],
    tol: Tolerance<S>,
    field: impl Fn(S, S, &[S]) -> Result<S>,
) -> Result<Vec<S>> {
    let cs = model.coefficients.clone();
    let mut best = vec![S::zero(); ps.len()];
    for (t, x) in &grid.points {
        for (k, &p) in ps.iter().enumerate() {
            let failure = RefCell::new(None);
            let v = model.integrate_marks(g, tol, |z| match field(*t, z, x) {
                Ok(val) => val.abs().powf(S::lit(p)) * cs.rate_at(*t, z, x),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    S::zero()
                }
            })?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            best[k] = best[k].max(v.powf(S::lit(1.0 / p)));
        }
    }
    Ok(best)
}

/// `|d^alpha c|_{G,p}`.
pub fn jump_seminorm<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    alpha: &[usize],
    p: f64,
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<S> {
    Ok(jump_moments(model, g, alpha, &[p], grid, tol)?[0])
}

fn jump_moments<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    alpha: &[usize],
    ps: &[f64],
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<Vec<S>> {
    let cs = model.coefficients.clone();
    let buf = RefCell::new(vec![S::zero(); model.dim()]);
    moment_sups(model, g, grid, ps, tol, |t, z, x| {
        let mut b = buf.borrow_mut();
        cs.jump_derivative(t, z, x, alpha, &mut b)?;
        Ok(crate::norm(&b))
    })
}

fn log_rate_moments<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    beta: &[usize],
    ps: &[f64],
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<Vec<S>> {
    let cs = model.coefficients.clone();
    moment_sups(model, g, grid, ps, tol, |t, z, x| cs.log_rate_derivative(t, z, x, beta))
}

/// `[d^alpha c]_{G,p} = max_{p' in {1..floor p} u {p}} |d^alpha c|_{G,p'}`.
pub fn jump_bracket<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    alpha: &[usize],
    p: f64,
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<S> {
    let v = jump_moments(model, g, alpha, &bracket_exponents(p), grid, tol)?;
    Ok(v.into_iter().fold(S::zero(), S::max))
}

/// `[d^beta ln gamma]_{G,p}`.
pub fn log_rate_bracket<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    beta: &[usize],
    p: f64,
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<S> {
    let v = log_rate_moments(model, g, beta, &bracket_exponents(p), grid, tol)?;
    Ok(v.into_iter().fold(S::zero(), S::max))
}

/// `sup |d^alpha sigma|` (Hilbert–Schmidt) over the grid.
pub fn diffusion_sup<S: Scalar>(model: &JumpModel<S>, alpha: &[usize], grid: &Grid<S>) -> Result<S> {
    let cs = &model.coefficients;
    grid_sup(grid, |t, x| cs.diffusion_derivative_norm(t, x, alpha))
}

/// `sup |d^alpha b|` over the grid.
pub fn drift_sup<S: Scalar>(model: &JumpModel<S>, alpha: &[usize], grid: &Grid<S>) -> Result<S> {
    let cs = &model.coefficients;
    let mut buf = vec![S::zero(); model.dim()];
    grid_sup(grid, |t, x| {
        cs.drift_derivative(t, x, alpha, &mut buf)?;
        Ok(crate::norm(&buf))
    })
}

/// `Gamma_{G,q}(gamma) = sup sum_{h=1..q} sum_{1<=|rho|<=h}
/// (int_G |d^rho ln gamma|^{h/|rho|} gamma dmu)^{q/h}`.
pub fn log_rate_gamma<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    q: usize,
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<S> {
    let cs = model.coefficients.clone();
    let d = model.dim();
    grid_sup(grid, |t, x| {
        let mut total = S::zero();
        for h in 1..=q {
            for rho in multi_indices_between(d, 1, h) {
                let p = S::from_usize_lossy(h) / S::from_usize_lossy(rho.len());
                let failure = RefCell::new(None);
                let v = model.integrate_marks(g, tol, |z| match cs.log_rate_derivative(t, z, x, &rho) {
                    Ok(val) => val.abs().powf(p) * cs.rate_at(t, z, x),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        S::zero()
                    }
                })?;
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                total = total + v.powf(S::from_usize_lossy(q) / S::from_usize_lossy(h));
            }
        }
        Ok(total)
    })
}

/// Named value of a functional at one multi-index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedValue {
    pub index: MultiIndex,
    pub value: f64,
}

/// Intermediate quantities and the constant `Q_q` for one model, region,
/// order and constant `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub q: usize,
    pub horizon: f64,
    pub constant: f64,
    pub region: String,
    pub grid: Vec<(f64, Vec<f64>)>,
    /// `sup |d^alpha sigma|`, `1 <= |alpha| <= q`.
    pub diffusion: Vec<IndexedValue>,
    /// `sup |d^alpha b|`, `1 <= |alpha| <= q`.
    pub drift: Vec<IndexedValue>,
    /// `[d^alpha c]_{G,4q^2}`, `1 <= |alpha| <= q`.
    pub jump_brackets: Vec<IndexedValue>,
    /// `[d^alpha c]_{G,4q}` for `|alpha| = 1`.
    pub jump_gradient_brackets: Vec<IndexedValue>,
    /// `[d^beta ln gamma]_{G,4q}`, `1 <= |beta| <= q`.
    pub log_rate_brackets: Vec<IndexedValue>,
    pub harmonic: f64,
    /// `theta_{q,4q^2}`.
    pub theta: f64,
    /// `a_{4q^2}`.
    pub a: f64,
    /// `alpha_{q,4q}(C, G)`.
    pub alpha: f64,
    /// `Gamma_{G,q}(gamma)`.
    pub log_rate_gamma: f64,
    pub q_q: f64,
}

fn sum_of(v: &[IndexedValue], pred: impl Fn(usize) -> bool) -> f64 {
    v.iter().filter(|e| pred(e.index.len())).map(|e| e.value).sum()
}

/// `alpha_{q,p}(C) = C theta^{q H_q} exp(C T q H_q a)`.
pub fn alpha_qp(constant: f64, horizon: f64, q: usize, theta: f64, a: f64) -> f64 {
    let qh = q as f64 * harmonic(q);
    constant * theta.powf(qh) * (constant * horizon * qh * a).exp()
}

/// `Q_q = C (T v 1)^q alpha^{2q} (1 + Gamma + sum [d^beta ln gamma])^q`.
pub fn q_constant(constant: f64, horizon: f64, q: usize, alpha: f64, log_gamma: f64, log_brackets: f64) -> f64 {
    let qi = q as i32;
    constant * horizon.max(1.0).powi(qi) * alpha.powi(2 * qi) * (1.0 + log_gamma + log_brackets).powi(qi)
}

impl RegularityReport {
    /// `theta_{q,4q^2} = 1 + ||sigma||_{2,q} + ||b||_{2,q} + sum_{2<=|alpha|<=q} [d^alpha c]`.
    pub fn theta_from_parts(&self) -> f64 {
        1.0 + sum_of(&self.diffusion, |k| k >= 2)
            + sum_of(&self.drift, |k| k >= 2)
            + sum_of(&self.jump_brackets, |k| k >= 2)
    }

    /// `a_p = ||grad sigma||^2 + ||grad b|| + [grad c]^p` with `p = 4q^2`.
    pub fn a_from_parts(&self) -> f64 {
        let p = (4 * self.q * self.q) as f64;
        sum_of(&self.diffusion, |k| k == 1).powi(2)
            + sum_of(&self.drift, |k| k == 1)
            + sum_of(&self.jump_brackets, |k| k == 1).powf(p)
    }

    /// Recomputes `Q_q` from the stored intermediates.
    pub fn recompose(&self) -> f64 {
        let alpha = alpha_qp(self.constant, self.horizon, self.q, self.theta_from_parts(), self.a_from_parts());
        q_constant(
            self.constant,
            self.horizon,
            self.q,
            alpha,
            self.log_rate_gamma,
            sum_of(&self.log_rate_brackets, |_| true),
        )
    }
}

/// Evaluates the regularity functionals of `model` on region `g` (used as
/// the jump region throughout) and assembles `Q_q`.
pub fn regularity_report<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    q: usize,
    constant: f64,
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<RegularityReport> {
    if q == 0 {
        return Err(Error::InvalidArgument("order q must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    let d = model.dim();
    let p_theta = (4 * q * q) as f64;
    let p_log = (4 * q) as f64;
    let indices = multi_indices_between(d, 1, q);
    let tag = |index: &MultiIndex, value: S| IndexedValue { index: index.clone(), value: value.as_f64() };
    let mut diffusion = Vec::new();
    let mut drift = Vec::new();
    let mut jump_brackets = Vec::new();
    let mut log_rate_brackets = Vec::new();
    for a in &indices {
        diffusion.push(tag(a, diffusion_sup(model, a, grid)?));
        drift.push(tag(a, drift_sup(model, a, grid)?));
        jump_brackets.push(tag(a, jump_bracket(model, g, a, p_theta, grid, tol)?));
        log_rate_brackets.push(tag(a, log_rate_bracket(model, g, a, p_log, grid, tol)?));
    }
    let mut jump_gradient_brackets = Vec::new();
    for a in multi_indices(d, 1) {
        jump_gradient_brackets.push(tag(&a, jump_bracket(model, g, &a, p_log, grid, tol)?));
    }
    let lg = log_rate_gamma(model, g, q, grid, tol)?.as_f64();
    let mut report = RegularityReport {
        q,
        horizon: model.horizon.as_f64(),
        constant,
        region: g.to_string(),
        grid: grid.points.iter().map(|(t, x)| (t.as_f64(), crate::error::to_f64_vec(x))).collect(),
        diffusion,
        drift,
        jump_brackets,
        jump_gradient_brackets,
        log_rate_brackets,
        harmonic: harmonic(q),
        theta: 0.0,
        a: 0.0,
        alpha: 0.0,
        log_rate_gamma: lg,
        q_q: 0.0,
    };
    report.theta = report.theta_from_parts();
    report.a = report.a_from_parts();
    report.alpha = alpha_qp(constant, report.horizon, q, report.theta, report.a);
    report.q_q = q_constant(
        constant,
        report.horizon,
        q,
        report.alpha,
        lg,
        sum_of(&report.log_rate_brackets, |_| true),
    );
    Ok(report)
}

/// `||grad sigma|| + ||grad b|| + C_mu(gamma, c)` on region `g`.
pub fn lipschitz_sum<S: Scalar>(model: &JumpModel<S>, g: &Region<S>, grid: &Grid<S>, tol: Tolerance<S>) -> Result<f64> {
    let mut total = 0.0;
    for a in multi_indices(model.dim(), 1) {
        total += diffusion_sup(model, &a, grid)?.as_f64();
        total += drift_sup(model, &a, grid)?.as_f64();
    }
    Ok(total + c_mu(model, g, grid, tol)?.0.as_f64())
}

/// `(|dx0| + T alpha) exp(C T K^2 + 1)`.
pub fn localization_formula(gap0: f64, horizon: f64, alpha_gap: f64, lipschitz: f64, constant: f64) -> f64 {
    (gap0 + horizon * alpha_gap) * (constant * horizon * lipschitz * lipschitz + 1.0).exp()
}

/// Smallest `C >= 0` for which the formula reproduces `empirical`.
pub fn calibrate_localization(empirical: f64, gap0: f64, horizon: f64, alpha_gap: f64, lipschitz: f64) -> f64 {
    let base = gap0 + horizon * alpha_gap;
    if !(base > 0.0) || !(empirical > 0.0) || !(lipschitz > 0.0) {
        return 0.0;
    }
    (((empirical / base).ln() - 1.0) / (horizon * lipschitz * lipschitz)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationBound {
    pub alpha_gap: f64,
    pub lipschitz: f64,
    pub bound: f64,
}

/// Bound on `E sup |X^{G1} - X^{G2}|` for `G1` inside `G2`, starting points
/// `|dx0|` apart.
pub fn localization_bound<S: Scalar>(
    model: &JumpModel<S>,
    g1: &Region<S>,
    g2: &Region<S>,
    constant: f64,
    gap0: f64,
    grid: &Grid<S>,
    tol: Tolerance<S>,
) -> Result<LocalizationBound> {
    if !g1.is_subset_of(g2) {
        return Err(Error::InvalidArgument("localization needs G1 inside G2".into()));
    }
    let alpha_gap = crate::model::alpha_of_with(model, &g2.difference(g1), grid, tol)?.as_f64();
    let lipschitz = lipschitz_sum(model, g2, grid, tol)?;
    let horizon = model.horizon.as_f64();
    Ok(LocalizationBound { alpha_gap, lipschitz, bound: localization_formula(gap0, horizon, alpha_gap, lipschitz, constant) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponents() {
        assert_eq!(bracket_exponents(4.0), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(bracket_exponents(2.5), vec![1.0, 2.0, 2.5]);
        assert_relative_eq!(harmonic(3), 11.0 / 6.0);
    }

    #[test]
    fn calibration_inverts_formula() {
        let c = 0.37;
        let b = localization_formula(0.1, 2.0, 0.05, 1.3, c);
        assert_relative_eq!(calibrate_localization(b, 0.1, 2.0, 0.05, 1.3), c, epsilon = 1e-12);
        assert_eq!(calibrate_localization(1e-9, 0.1, 2.0, 0.05, 1.3), 0.0);
    }
}
