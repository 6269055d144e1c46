//! Path simulation: fictive-shock thinning, real-shock kernel draws, hybrid
//! drift/diffusion/jump paths and synchronously coupled pairs.
//!
//! Between jump times the continuous part is integrated by Euler–Maruyama
//! with substeps of at most `h`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{to_f64_vec, Error, Result};
use crate::linalg;
use crate::measure::{MarkSampler, Region};
use crate::model::{CoefficientSet, Diffusion, JumpModel};
use crate::rng::RngStream;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Fictive,
    Real,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SimConfig<S> {
    pub horizon: S,
    pub step: S,
    pub seed: u64,
    pub paths: usize,
    pub representation: Representation,
}

impl<S: Scalar> SimConfig<S> {
    pub fn new(horizon: S, step: S, seed: u64, paths: usize, representation: Representation) -> Self {
        Self { horizon, step, seed, paths, representation }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > S::zero()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.step > S::zero() && self.step <= self.horizon) {
            return Err(Error::InvalidArgument(format!("flow step must lie in (0, T], got {}", self.step)));
        }
        if self.paths == 0 {
            return Err(Error::InvalidArgument("path count must be at least 1".into()));
        }
        Ok(())
    }
}

/// One trajectory. For the real-shock representation a mark of `None` is the
/// no-jump sentinel and `uniforms` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PathRecord<S> {
    pub seed: u64,
    pub stream: u64,
    pub start: S,
    pub initial: Vec<S>,
    pub jump_times: Vec<S>,
    pub marks: Vec<Option<S>>,
    pub uniforms: Vec<S>,
    pub accepted: Vec<bool>,
    pub pre_jump: Vec<Vec<S>>,
    pub post_jump: Vec<Vec<S>>,
    pub terminal: Vec<S>,
}

impl<S: Scalar> PathRecord<S> {
    fn new(x: &[S], t0: S, seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            start: t0,
            initial: x.to_vec(),
            jump_times: Vec::new(),
            marks: Vec::new(),
            uniforms: Vec::new(),
            accepted: Vec::new(),
            pre_jump: Vec::new(),
            post_jump: Vec::new(),
            terminal: Vec::new(),
        }
    }

    pub fn proposals(&self) -> usize {
        self.jump_times.len()
    }

    pub fn accepted_jumps(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    /// Number of jump times in `[start, t]`.
    pub fn count_until(&self, t: S) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }
}

#[derive(Serialize)]
struct JsonlRecord<'a, S: Scalar> {
    seed: u64,
    stream: u64,
    jump_times: &'a [S],
    marks: &'a [Option<S>],
    accepted: &'a [bool],
    terminal: &'a [S],
}

/// One JSON object per line: `{seed, stream, jump_times, marks, accepted, terminal}`.
pub fn write_jsonl<S: Scalar, W: Write>(records: &[PathRecord<S>], mut w: W) -> std::io::Result<()> {
    for r in records {
        let rec = JsonlRecord {
            seed: r.seed,
            stream: r.stream,
            jump_times: &r.jump_times,
            marks: &r.marks,
            accepted: &r.accepted,
            terminal: &r.terminal,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

trait Observer<S> {
    #[allow(clippy::too_many_arguments)]
    fn proposal(&mut self, t: S, z: S, u: S, accepted: bool, pre: &[S], post: &[S]);
}

struct Silent;

impl<S> Observer<S> for Silent {
    #[inline]
    fn proposal(&mut self, _: S, _: S, _: S, _: bool, _: &[S], _: &[S]) {}
}

struct Recorder<'a, S> {
    rec: &'a mut PathRecord<S>,
    real: bool,
}

impl<S: Scalar> Observer<S> for Recorder<'_, S> {
    fn proposal(&mut self, t: S, z: S, u: S, accepted: bool, pre: &[S], post: &[S]) {
        self.rec.jump_times.push(t);
        if self.real {
            self.rec.marks.push(accepted.then_some(z));
        } else {
            self.rec.marks.push(Some(z));
            self.rec.uniforms.push(u);
        }
        self.rec.accepted.push(accepted);
        self.rec.pre_jump.push(pre.to_vec());
        self.rec.post_jump.push(post.to_vec());
    }
}

/// Euler–Maruyama integrator for the continuous part of a coefficient set.
pub(crate) struct Flow<'a, S: Scalar> {
    cs: &'a CoefficientSet<S>,
    step: S,
    drift: Vec<S>,
    cov: Vec<S>,
    root: Vec<S>,
    col: Vec<S>,
    incr: Vec<S>,
    xi: Vec<S>,
}

impl<'a, S: Scalar> Flow<'a, S> {
    pub(crate) fn new(cs: &'a CoefficientSet<S>, step: S) -> Self {
        let d = cs.dim();
        let drivers = match cs.diffusion() {
            Diffusion::None => 0,
            Diffusion::Columns(c) => c.len(),
            Diffusion::Covariance(_) => d,
        };
        Self {
            cs,
            step,
            drift: vec![S::zero(); d],
            cov: vec![S::zero(); d * d],
            root: vec![S::zero(); d * d],
            col: vec![S::zero(); d],
            incr: vec![S::zero(); d],
            xi: vec![S::zero(); drivers],
        }
    }

    fn drivers(&self) -> usize {
        self.xi.len()
    }

    /// Number of substeps and the length of the last one on `[t0, t1]`.
    fn substeps(&self, t0: S, t1: S) -> (usize, S) {
        let span = t1 - t0;
        if span <= S::zero() {
            return (0, S::zero());
        }
        let ratio = span / self.step;
        let mut n = ratio.ceil().to_usize().unwrap_or(usize::MAX).max(1);
        // guard against ratio being an integer plus rounding noise
        if n > 1 && ratio - S::from_usize_lossy(n - 1) <= S::epsilon() * S::lit(16.0) * ratio {
            n -= 1;
        }
        let last = t1 - (t0 + self.step * S::from_usize_lossy(n - 1));
        (n, last)
    }

    /// One Euler–Maruyama step with given standard normals `xi`.
    fn euler(&mut self, x: &mut [S], s: S, dt: S, xi: &[S]) -> Result<()> {
        let d = x.len();
        self.incr.iter_mut().for_each(|v| *v = S::zero());
        if self.cs.drift_field().is_some() {
            self.cs.drift_at(s, x, &mut self.drift);
            for i in 0..d {
                self.incr[i] = self.drift[i] * dt;
            }
        }
        let sq = dt.sqrt();
        match self.cs.diffusion() {
            Diffusion::None => {}
            Diffusion::Columns(cols) => {
                for (l, col) in cols.iter().enumerate() {
                    col(s, x, &mut self.col);
                    let w = xi[l] * sq;
                    for i in 0..d {
                        self.incr[i] = self.incr[i] + self.col[i] * w;
                    }
                }
            }
            Diffusion::Covariance(a) => {
                a(s, x, &mut self.cov);
                linalg::covariance_root(&self.cov, d, &mut self.root)?;
                for i in 0..d {
                    let mut acc = S::zero();
                    for k in 0..d {
                        acc = acc + self.root[i * d + k] * xi[k];
                    }
                    self.incr[i] = self.incr[i] + acc * sq;
                }
            }
        }
        for i in 0..d {
            x[i] = x[i] + self.incr[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient { what: "flow", t: s.as_f64(), x: to_f64_vec(x) });
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for v in self.xi.iter_mut() {
            *v = S::standard_normal(rng);
        }
    }

    pub(crate) fn run<R: Rng + ?Sized>(&mut self, x: &mut [S], t0: S, t1: S, rng: &mut R) -> Result<()> {
        if !self.cs.has_flow() {
            return Ok(());
        }
        let (n, last) = self.substeps(t0, t1);
        let mut xi = std::mem::take(&mut self.xi);
        for k in 0..n {
            let s = t0 + self.step * S::from_usize_lossy(k);
            let dt = if k + 1 == n { last } else { self.step };
            for v in xi.iter_mut() {
                *v = S::standard_normal(rng);
            }
            let r = self.euler(x, s, dt, &xi);
            if r.is_err() {
                self.xi = xi;
                return r;
            }
        }
        self.xi = xi;
        Ok(())
    }
}

/// Euler–Maruyama approximation of the flow from `t0` to `t1` started at `x`.
pub fn flow_segment<S: Scalar, R: Rng + ?Sized>(
    model: &JumpModel<S>,
    x: &[S],
    t0: S,
    t1: S,
    h: S,
    rng: &mut R,
) -> Result<Vec<S>> {
    if t1 < t0 {
        return Err(Error::InvalidArgument(format!("flow segment needs t0 <= t1, got ({t0}, {t1})")));
    }
    if !(h > S::zero()) {
        return Err(Error::InvalidArgument(format!("flow step must be positive, got {h}")));
    }
    let mut y = x.to_vec();
    Flow::new(&model.coefficients, h).run(&mut y, t0, t1, rng)?;
    Ok(y)
}

/// Proposal process on `G`: sampler, rate `2 Gamma mu(G)` and `2 Gamma`.
pub(crate) struct Proposals<S: Scalar> {
    pub sampler: Option<MarkSampler<S>>,
    pub rate: S,
    pub two_gamma: S,
}

impl<S: Scalar> Proposals<S> {
    pub(crate) fn new(model: &JumpModel<S>, g: &Region<S>) -> Result<Self> {
        let two_gamma = S::lit(2.0) * model.coefficients.rate_bound();
        if !model.coefficients.has_jumps() || g.is_empty() {
            return Ok(Self { sampler: None, rate: S::zero(), two_gamma });
        }
        let mass = model.measure.mass(g)?;
        if mass.is_infinite() {
            return Err(Error::InfiniteMass);
        }
        if mass <= S::zero() {
            return Ok(Self { sampler: None, rate: S::zero(), two_gamma });
        }
        let sampler = model.measure.sampler(g)?;
        Ok(Self { rate: two_gamma * sampler.mass(), sampler: Some(sampler), two_gamma })
    }
}

fn check_rate<S: Scalar>(gamma: S, bound: S, t: S, z: S, x: &[S]) -> Result<()> {
    if gamma > bound || !gamma.is_finite() {
        return Err(Error::RateBoundViolated {
            value: gamma.as_f64(),
            bound: bound.as_f64(),
            t: t.as_f64(),
            z: z.as_f64(),
            x: to_f64_vec(x),
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_thinned<S: Scalar, R: Rng + ?Sized, O: Observer<S>>(
    model: &JumpModel<S>,
    props: &Proposals<S>,
    x: &mut [S],
    t0: S,
    horizon: S,
    step: S,
    rng: &mut R,
    obs: &mut O,
) -> Result<()> {
    let cs = &model.coefficients;
    let bound = cs.rate_bound();
    let mut flow = Flow::new(cs, step);
    let mut c = vec![S::zero(); x.len()];
    let mut pre = vec![S::zero(); x.len()];
    let mut t = t0;
    loop {
        let next = match &props.sampler {
            Some(_) => t + S::exponential(rng, props.rate),
            None => S::infinity(),
        };
        if next > horizon {
            flow.run(x, t, horizon, rng)?;
            return Ok(());
        }
        flow.run(x, t, next, rng)?;
        t = next;
        let sampler = props.sampler.as_ref().expect("proposal without sampler");
        let z = sampler.sample(rng);
        let u = S::unit_uniform(rng) * props.two_gamma;
        let gamma = cs.rate_at(t, z, x);
        check_rate(gamma, bound, t, z, x)?;
        let accepted = u <= gamma;
        pre.copy_from_slice(x);
        if accepted {
            cs.jump_at(t, z, x, &mut c);
            for (xi, ci) in x.iter_mut().zip(&c) {
                *xi = *xi + *ci;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCoefficient { what: "jump amplitude", t: t.as_f64(), x: to_f64_vec(&pre) });
            }
        }
        obs.proposal(t, z, u, accepted, &pre, x);
    }
}

fn check_start<S: Scalar>(model: &JumpModel<S>, x: &[S], t0: S, cfg: &SimConfig<S>) -> Result<()> {
    cfg.validate()?;
    if x.len() != model.dim() {
        return Err(Error::InvalidArgument(format!("initial state has dimension {}, model {}", x.len(), model.dim())));
    }
    if t0 > cfg.horizon {
        return Err(Error::InvalidArgument(format!("start time {t0} after horizon {}", cfg.horizon)));
    }
    Ok(())
}

fn simulate_recorded<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    x: &[S],
    t0: S,
    cfg: &SimConfig<S>,
    rng: &mut RngStream,
    real: bool,
) -> Result<PathRecord<S>> {
    check_start(model, x, t0, cfg)?;
    let props = Proposals::new(model, g)?;
    let mut rec = PathRecord::new(x, t0, rng.seed(), rng.index());
    let mut state = x.to_vec();
    run_thinned(model, &props, &mut state, t0, cfg.horizon, cfg.step, rng, &mut Recorder { rec: &mut rec, real })?;
    rec.terminal = state;
    Ok(rec)
}

/// Fictive-shock path: proposals at rate `2 Gamma mu(G)`, marks from
/// `mu|_G / mu(G)`, uniforms on `[0, 2 Gamma]`, jump iff `U <= gamma`.
pub fn simulate_fictive<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    x: &[S],
    t0: S,
    cfg: &SimConfig<S>,
    rng: &mut RngStream,
) -> Result<PathRecord<S>> {
    simulate_recorded(model, g, x, t0, cfg, rng, false)
}

/// Real-shock path: at each event of the rate `2 Gamma mu(G)` clock a mark is
/// drawn from the kernel that puts mass `Theta_G` on the no-jump sentinel.
pub fn simulate_real<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    x: &[S],
    t0: S,
    cfg: &SimConfig<S>,
    rng: &mut RngStream,
) -> Result<PathRecord<S>> {
    simulate_recorded(model, g, x, t0, cfg, rng, true)
}

/// Hybrid path: the model's drift and diffusion between fictive-shock jumps
/// restricted to `G`.
pub fn simulate_hybrid<S: Scalar>(
    model: &JumpModel<S>,
    g: &Region<S>,
    x: &[S],
    t0: S,
    cfg: &SimConfig<S>,
    rng: &mut RngStream,
) -> Result<PathRecord<S>> {
    simulate_recorded(model, g, x, t0, cfg, rng, false)
}

/// Terminal state only, without recording the path.
pub fn terminal_state<S: Scalar, R: Rng + ?Sized>(
    model: &JumpModel<S>,
    g: &Region<S>,
    x: &[S],
    t0: S,
    cfg: &SimConfig<S>,
    rng: &mut R,
) -> Result<Vec<S>> {
    check_start(model, x, t0, cfg)?;
    let props = Proposals::new(model, g)?;
    let mut state = x.to_vec();
    run_thinned(model, &props, &mut state, t0, cfg.horizon, cfg.step, rng, &mut Silent)?;
    Ok(state)
}

/// Runs `f(stream, index)` for indices `0..n` on a pool of `workers` threads
/// (`0` = all cores). Results are in index order and do not depend on the
/// number of workers; the error of the lowest failing index is returned.
pub fn par_map_streams<T, F>(seed: u64, n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream, usize) -> Result<T> + Sync + Send,
{
    let job = || -> Vec<Result<T>> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(seed, i as u64);
                f(&mut rng, i)
            })
            .collect()
    };
    let results = if workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?
            .install(job)
    };
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Path { index: i, source: Box::new(e) }))
        .collect()
}

/// `f(X_T)` for `cfg.paths` independent paths, path `i` using stream `i`.
pub fn terminal_samples<S, F>(
    model: &JumpModel<S>,
    g: &Region<S>,
    x: &[S],
    f: F,
    cfg: &SimConfig<S>,
    workers: usize,
) -> Result<Vec<S>>
where
    S: Scalar,
    F: Fn(&[S]) -> S + Sync + Send,
{
    check_start(model, x, S::zero(), cfg)?;
    let props = Proposals::new(model, g)?;
    par_map_streams(cfg.seed, cfg.paths, workers, |rng, _| {
        let mut state = x.to_vec();
        run_thinned(model, &props, &mut state, S::zero(), cfg.horizon, cfg.step, rng, &mut Silent)?;
        Ok(f(&state))
    })
}

/// Outcome of a synchronously coupled pair `X^{G1}`, `X^{G2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CoupledOutcome<S> {
    /// Maximum of `|X^{G1} - X^{G2}|` over the discretization and jump times.
    pub sup_gap: S,
    pub terminal_inner: Vec<S>,
    pub terminal_outer: Vec<S>,
    pub proposals: usize,
}

/// Simulates `X^{G1}` and `X^{G2}` (with `G1` inside `G2`) from the same
/// Brownian increments and the same proposals on `G2`; proposals with marks in
/// `G1` are offered to both components, the others only to `X^{G2}`.
pub fn simulate_coupled<S: Scalar, R: Rng + ?Sized>(
    model: &JumpModel<S>,
    g1: &Region<S>,
    g2: &Region<S>,
    x: &[S],
    cfg: &SimConfig<S>,
    rng: &mut R,
) -> Result<CoupledOutcome<S>> {
    check_start(model, x, S::zero(), cfg)?;
    if !g1.is_subset_of(g2) {
        return Err(Error::InvalidArgument("coupling needs G1 inside G2".into()));
    }
    let cs = &model.coefficients;
    let bound = cs.rate_bound();
    let props = Proposals::new(model, g2)?;
    let mut f1 = Flow::new(cs, cfg.step);
    let mut f2 = Flow::new(cs, cfg.step);
    let drivers = f1.drivers();
    let mut xi = vec![S::zero(); drivers];
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    let mut c = vec![S::zero(); x.len()];
    let gap = |a: &[S], b: &[S]| a.iter().zip(b).fold(S::zero(), |s, (&p, &q)| s + (p - q) * (p - q)).sqrt();
    let mut sup = S::zero();
    let mut t = S::zero();
    let mut proposals = 0;
    let horizon = cfg.horizon;
    let mut advance = |a: &mut [S], b: &mut [S], t0: S, t1: S, rng: &mut R, sup: &mut S| -> Result<()> {
        if !cs.has_flow() {
            return Ok(());
        }
        let (n, last) = f1.substeps(t0, t1);
        for k in 0..n {
            let s = t0 + cfg.step * S::from_usize_lossy(k);
            let dt = if k + 1 == n { last } else { cfg.step };
            f1.draw(rng);
            xi.copy_from_slice(&f1.xi);
            f1.euler(a, s, dt, &xi)?;
            f2.euler(b, s, dt, &xi)?;
            *sup = sup.max(gap(a, b));
        }
        Ok(())
    };
    loop {
        let next = match &props.sampler {
            Some(_) => t + S::exponential(rng, props.rate),
            None => S::infinity(),
        };
        if next > horizon {
            advance(&mut a, &mut b, t, horizon, rng, &mut sup)?;
            break;
        }
        advance(&mut a, &mut b, t, next, rng, &mut sup)?;
        t = next;
        proposals += 1;
        let sampler = props.sampler.as_ref().expect("proposal without sampler");
        let z = sampler.sample(rng);
        let u = S::unit_uniform(rng) * props.two_gamma;
        if g1.contains(z) {
            let gamma = cs.rate_at(t, z, &a);
            check_rate(gamma, bound, t, z, &a)?;
            if u <= gamma {
                cs.jump_at(t, z, &a, &mut c);
                a.iter_mut().zip(&c).for_each(|(p, q)| *p = *p + *q);
            }
        }
        let gamma = cs.rate_at(t, z, &b);
        check_rate(gamma, bound, t, z, &b)?;
        if u <= gamma {
            cs.jump_at(t, z, &b, &mut c);
            b.iter_mut().zip(&c).for_each(|(p, q)| *p = *p + *q);
        }
        sup = sup.max(gap(&a, &b));
    }
    Ok(CoupledOutcome { sup_gap: sup, terminal_inner: a, terminal_outer: b, proposals })
}
