//! Mark measures on the real line and the regions they are restricted to.
//!
//! A [`Region`] is a finite union of disjoint left-open, right-closed
//! intervals `(a, b]` (endpoints may be infinite). Discrete measures select
//! their atoms by location, so index sets are expressed with
//! [`Region::indices`] over atoms placed at `0, 1, 2, ...`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, GaussLegendre, Tolerance};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Region<S> {
    // sorted, disjoint, non-adjacent (a, b] pieces with a < b
    pieces: Vec<(S, S)>,
}

impl<S: Scalar> Region<S> {
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    /// The whole real line; restricted to a measure's support this is `E`.
    pub fn all() -> Self {
        Self { pieces: vec![(S::neg_infinity(), S::infinity())] }
    }

    /// `(a, b]`; empty when `a >= b`.
    pub fn interval(a: S, b: S) -> Self {
        if a < b {
            Self { pieces: vec![(a, b)] }
        } else {
            Self::empty()
        }
    }

    pub fn from_intervals<I: IntoIterator<Item = (S, S)>>(it: I) -> Self {
        it.into_iter().fold(Self::empty(), |acc, (a, b)| acc.union(&Self::interval(a, b)))
    }

    /// Index set for atoms placed at the integers: `i` selects `(i - 1/2, i + 1/2]`.
    pub fn indices<I: IntoIterator<Item = usize>>(idx: I) -> Self {
        let half = S::lit(0.5);
        Self::from_intervals(idx.into_iter().map(|i| {
            let c = S::from_usize_lossy(i);
            (c - half, c + half)
        }))
    }

    pub fn pieces(&self) -> &[(S, S)] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, z: S) -> bool {
        // pieces are sorted; regions here have a handful of pieces
        self.pieces.iter().any(|&(a, b)| a < z && z <= b)
    }

    fn normalize(mut pieces: Vec<(S, S)>) -> Self {
        pieces.retain(|p| p.0 < p.1);
        pieces.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("NaN endpoint"));
        let mut out: Vec<(S, S)> = Vec::with_capacity(pieces.len());
        for (a, b) in pieces {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { pieces: out }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v = self.pieces.clone();
        v.extend_from_slice(&other.pieces);
        Self::normalize(v)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for &(a, b) in &self.pieces {
            for &(c, d) in &other.pieces {
                let lo = a.max(c);
                let hi = b.min(d);
                if lo < hi {
                    out.push((lo, hi));
                }
            }
        }
        Self::normalize(out)
    }

    /// Complement in the real line.
    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        let mut cursor = S::neg_infinity();
        for &(a, b) in &self.pieces {
            if cursor < a {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < S::infinity() {
            out.push((cursor, S::infinity()));
        }
        Self::normalize(out)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersect(&other.complement())
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }
}

impl<S: Scalar> fmt::Display for Region<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, (a, b)) in self.pieces.iter().enumerate() {
            if i > 0 {
                write!(f, " u ")?;
            }
            write!(f, "({a}, {b}]")?;
        }
        Ok(())
    }
}

pub type DensityFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

/// Density of a piece of a continuous mark measure.
#[derive(Clone)]
pub enum Density<S> {
    /// `coef * |z - origin|^exponent`; the piece must lie on one side of `origin`.
    PowerLaw { coef: S, exponent: S, origin: S },
    /// Arbitrary nonnegative density on a finite interval.
    Custom(DensityFn<S>),
}

impl<S: Scalar> fmt::Debug for Density<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::PowerLaw { coef, exponent, origin } => {
                write!(f, "PowerLaw({coef} |z - {origin}|^{exponent})")
            }
            Density::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityPiece<S: Scalar> {
    pub lo: S,
    pub hi: S,
    pub density: Density<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Atom<S> {
    pub location: S,
    pub weight: S,
}

#[derive(Debug, Clone)]
enum Kind<S: Scalar> {
    Discrete(Vec<Atom<S>>),
    Density(Vec<DensityPiece<S>>),
}

/// Nonnegative sigma-finite measure on the mark space.
#[derive(Clone)]
pub struct MarkMeasure<S: Scalar> {
    kind: Kind<S>,
    support: Region<S>,
    total_mass_cache: Arc<OnceLock<Result<S>>>,
}

impl<S: Scalar> fmt::Debug for MarkMeasure<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarkMeasure").field("kind", &self.kind).field("support", &self.support).finish()
    }
}

/// A piece of the measure clipped to a region: `(a, b]` with a density.
#[derive(Debug, Clone)]
struct Clip<S: Scalar> {
    a: S,
    b: S,
    density: Density<S>,
}

fn power_antiderivative<S: Scalar>(exponent: S, d: S) -> S {
    // F(d) with F' = d^p; log for p = -1
    let p1 = exponent + S::one();
    if p1 == S::zero() {
        d.ln()
    } else {
        d.powf(p1) / p1
    }
}

impl<S: Scalar> Clip<S> {
    /// Distances from the power-law origin at the two ends, ordered (near, far).
    fn power_span(&self, origin: S) -> (S, S, bool) {
        if self.a >= origin {
            (self.a - origin, self.b - origin, true)
        } else {
            (origin - self.b, origin - self.a, false)
        }
    }

    fn mass(&self, tol: Tolerance<S>) -> Result<S> {
        match &self.density {
            Density::PowerLaw { coef, exponent, origin } => {
                let (near, far, _) = self.power_span(*origin);
                let p1 = *exponent + S::one();
                if near == S::zero() && p1 <= S::zero() {
                    return Ok(S::infinity());
                }
                if far == S::infinity() && p1 >= S::zero() {
                    return Ok(S::infinity());
                }
                let hi = if far == S::infinity() { S::zero() } else { power_antiderivative(*exponent, far) };
                let lo = if near == S::zero() { S::zero() } else { power_antiderivative(*exponent, near) };
                Ok(*coef * (hi - lo))
            }
            Density::Custom(rho) => {
                if !(self.a.is_finite() && self.b.is_finite()) {
                    return Err(Error::InvalidArgument("custom densities need finite intervals".into()));
                }
                Ok(quadrature::gauss_kronrod(|z| rho(z), self.a, self.b, tol)?.value)
            }
        }
    }

    fn density_at(&self, x: S, from_a: S, from_b: S) -> S {
        match &self.density {
            Density::PowerLaw { coef, exponent, origin } => {
                let d = if *origin == self.a {
                    from_a
                } else if *origin == self.b {
                    from_b
                } else {
                    (x - *origin).abs()
                };
                *coef * d.powf(*exponent)
            }
            Density::Custom(rho) => rho(x),
        }
    }

    fn singular_endpoint(&self) -> bool {
        match &self.density {
            Density::PowerLaw { exponent, origin, .. } => {
                *exponent < S::zero() && (*origin == self.a || *origin == self.b)
            }
            Density::Custom(_) => false,
        }
    }

    fn integrate<F: Fn(S) -> S>(&self, f: &F, tol: Tolerance<S>) -> Result<S> {
        // 0 * inf = 0 at nodes that round onto a singular endpoint
        let weighted = |fx: S, w: S| if fx == S::zero() { S::zero() } else { fx * w };
        if self.b == S::infinity() {
            if self.a == S::neg_infinity() {
                return Err(Error::InvalidArgument("doubly infinite density piece".into()));
            }
            return Ok(quadrature::exp_sinh(|x, da, _| weighted(f(x), self.density_at(x, da, S::infinity())), self.a, tol)?.value);
        }
        if self.a == S::neg_infinity() {
            let b = self.b;
            return Ok(quadrature::exp_sinh(
                |y, dy, _| {
                    let x = b - (y - b);
                    weighted(f(x), self.density_at(x, S::infinity(), dy))
                },
                b,
                tol,
            )?
            .value);
        }
        if self.singular_endpoint() {
            Ok(quadrature::tanh_sinh(|x, da, db| weighted(f(x), self.density_at(x, da, db)), self.a, self.b, tol)?.value)
        } else {
            Ok(quadrature::gauss_kronrod(|x| weighted(f(x), self.density_at(x, x - self.a, self.b - x)), self.a, self.b, tol)?
                .value)
        }
    }
}

impl<S: Scalar> MarkMeasure<S> {
    pub fn discrete(atoms: Vec<Atom<S>>) -> Result<Self> {
        if atoms.iter().any(|a| !(a.weight > S::zero()) || !a.location.is_finite()) {
            return Err(Error::InvalidArgument("atoms need finite locations and positive weights".into()));
        }
        Ok(Self::build(Kind::Discrete(atoms)))
    }

    /// Atoms at `0, 1, ..., n-1` with the given weights.
    pub fn indexed(weights: &[S]) -> Result<Self> {
        Self::discrete(
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| Atom { location: S::from_usize_lossy(i), weight: w })
                .collect(),
        )
    }

    pub fn density(pieces: Vec<DensityPiece<S>>) -> Result<Self> {
        for p in &pieces {
            if !(p.lo < p.hi) {
                return Err(Error::InvalidArgument(format!("empty density piece ({}, {}]", p.lo, p.hi)));
            }
            if let Density::PowerLaw { coef, origin, .. } = &p.density {
                if *coef < S::zero() || (p.lo < *origin && *origin < p.hi) {
                    return Err(Error::InvalidArgument(
                        "power-law pieces need coef >= 0 and the origin outside the open piece".into(),
                    ));
                }
            }
        }
        let mut sorted = pieces;
        sorted.sort_by(|x, y| x.lo.partial_cmp(&y.lo).expect("NaN endpoint"));
        for w in sorted.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::InvalidArgument("density pieces overlap".into()));
            }
        }
        Ok(Self::build(Kind::Density(sorted)))
    }

    /// `coef * z^exponent` on `(lo, hi]`.
    pub fn power_law(lo: S, hi: S, coef: S, exponent: S) -> Result<Self> {
        Self::density(vec![DensityPiece {
            lo,
            hi,
            density: Density::PowerLaw { coef, exponent, origin: S::zero() },
        }])
    }

    fn build(kind: Kind<S>) -> Self {
        Self { kind, support: Region::all(), total_mass_cache: Arc::new(OnceLock::new()) }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, Kind::Discrete(_))
    }

    pub fn atoms(&self) -> Option<&[Atom<S>]> {
        match &self.kind {
            Kind::Discrete(a) => Some(a),
            Kind::Density(_) => None,
        }
    }

    pub fn support(&self) -> &Region<S> {
        &self.support
    }

    /// The smallest region carrying the measure, intersected with its support.
    pub fn carrier(&self) -> Region<S> {
        let raw = match &self.kind {
            Kind::Discrete(atoms) => Region::from_intervals(atoms.iter().map(|a| {
                let below = a.location - (a.location.abs() + S::one()) * S::epsilon() * S::lit(4.0);
                (below, a.location)
            })),
            Kind::Density(pieces) => Region::from_intervals(pieces.iter().map(|p| (p.lo, p.hi))),
        };
        raw.intersect(&self.support)
    }

    /// The measure `1_G mu`.
    pub fn restrict(&self, g: &Region<S>) -> Self {
        Self {
            kind: self.kind.clone(),
            support: self.support.intersect(g),
            total_mass_cache: Arc::new(OnceLock::new()),
        }
    }

    fn clips(&self, g: &Region<S>, breaks: &[S]) -> Vec<Clip<S>> {
        let Kind::Density(pieces) = &self.kind else { return Vec::new() };
        let region = self.support.intersect(g);
        let mut out = Vec::new();
        for p in pieces {
            for &(a, b) in region.intersect(&Region::interval(p.lo, p.hi)).pieces() {
                let mut cuts: Vec<S> = breaks.iter().copied().filter(|&z| a < z && z < b).collect();
                if let Density::PowerLaw { origin, .. } = &p.density {
                    if a < *origin && *origin < b {
                        cuts.push(*origin);
                    }
                }
                cuts.sort_by(|x, y| x.partial_cmp(y).expect("NaN breakpoint"));
                let mut lo = a;
                for c in cuts.into_iter().chain(std::iter::once(b)) {
                    if lo < c {
                        out.push(Clip { a: lo, b: c, density: p.density.clone() });
                    }
                    lo = c;
                }
            }
        }
        out
    }

    /// `mu(G)`; `+inf` for infinite mass.
    pub fn mass(&self, g: &Region<S>) -> Result<S> {
        match &self.kind {
            Kind::Discrete(atoms) => {
                let region = self.support.intersect(g);
                Ok(atoms.iter().filter(|a| region.contains(a.location)).fold(S::zero(), |acc, a| acc + a.weight))
            }
            Kind::Density(_) => {
                let tol = Tolerance::default();
                self.clips(g, &[]).iter().try_fold(S::zero(), |acc, c| Ok(acc + c.mass(tol)?))
            }
        }
    }

    pub fn total_mass(&self) -> Result<S> {
        self.total_mass_cache.get_or_init(|| self.mass(&Region::all())).clone()
    }

    /// `int_G f dmu`, splitting density pieces at `breaks`.
    pub fn integrate<F: Fn(S) -> S>(&self, g: &Region<S>, breaks: &[S], f: F, tol: Tolerance<S>) -> Result<S> {
        match &self.kind {
            Kind::Discrete(atoms) => {
                let region = self.support.intersect(g);
                Ok(atoms
                    .iter()
                    .filter(|a| region.contains(a.location))
                    .fold(S::zero(), |acc, a| acc + a.weight * f(a.location)))
            }
            Kind::Density(_) => {
                self.clips(g, breaks).iter().try_fold(S::zero(), |acc, c| Ok(acc + c.integrate(&f, tol)?))
            }
        }
    }

    /// Mark locations useful for probing coefficients on `G`: every atom, or a
    /// set of points per density piece graded towards singular endpoints.
    pub fn probe_points(&self, g: &Region<S>, per_piece: usize) -> Vec<S> {
        match &self.kind {
            Kind::Discrete(atoms) => {
                let region = self.support.intersect(g);
                atoms.iter().filter(|a| region.contains(a.location)).map(|a| a.location).collect()
            }
            Kind::Density(_) => {
                let n = per_piece.max(2);
                let mut pts = Vec::new();
                for c in self.clips(g, &[]) {
                    let (a, b) = (c.a, c.b);
                    if a.is_finite() && b.is_finite() {
                        for i in 1..=n {
                            let s = S::from_usize_lossy(i) / S::from_usize_lossy(n);
                            if c.singular_endpoint() {
                                // geometric grading: a + (b-a) * 10^{-8(1-s)}
                                let g = S::lit(10.0).powf(-S::lit(8.0) * (S::one() - s));
                                match &c.density {
                                    Density::PowerLaw { origin, .. } if *origin == b => pts.push(b - (b - a) * g),
                                    _ => pts.push(a + (b - a) * g),
                                }
                            } else {
                                pts.push(a + (b - a) * s);
                            }
                        }
                    } else if a.is_finite() {
                        for i in 0..n {
                            pts.push(a + S::lit(2.0).powi(i as i32));
                        }
                    } else {
                        for i in 0..n {
                            pts.push(b - S::lit(2.0).powi(i as i32) + S::one());
                        }
                    }
                }
                pts
            }
        }
    }

    /// Sampler for the normalized restriction `1_G mu / mu(G)`.
    pub fn sampler(&self, g: &Region<S>) -> Result<MarkSampler<S>> {
        match &self.kind {
            Kind::Discrete(atoms) => {
                let region = self.support.intersect(g);
                let chosen: Vec<Atom<S>> = atoms.iter().copied().filter(|a| region.contains(a.location)).collect();
                let mut cum = Vec::with_capacity(chosen.len());
                let mut acc = S::zero();
                for a in &chosen {
                    acc = acc + a.weight;
                    cum.push(acc);
                }
                Ok(MarkSampler { mass: acc, pieces: chosen.into_iter().map(SamplerPiece::Atom).collect(), cum })
            }
            Kind::Density(_) => {
                let tol = Tolerance::default();
                let mut pieces = Vec::new();
                let mut cum = Vec::new();
                let mut acc = S::zero();
                for c in self.clips(g, &[]) {
                    let m = c.mass(tol)?;
                    if m.is_infinite() {
                        return Err(Error::InfiniteMass);
                    }
                    if m <= S::zero() {
                        continue;
                    }
                    acc = acc + m;
                    cum.push(acc);
                    pieces.push(match &c.density {
                        Density::PowerLaw { exponent, origin, .. } => {
                            let (near, far, above) = c.power_span(*origin);
                            SamplerPiece::Power { near, far, exponent: *exponent, origin: *origin, above }
                        }
                        Density::Custom(rho) => SamplerPiece::Custom(CustomTable::new(c.a, c.b, rho.clone(), tol)?),
                    });
                }
                Ok(MarkSampler { mass: acc, pieces, cum })
            }
        }
    }
}

#[derive(Clone)]
enum SamplerPiece<S: Scalar> {
    Atom(Atom<S>),
    Power { near: S, far: S, exponent: S, origin: S, above: bool },
    Custom(CustomTable<S>),
}

/// Inverse-CDF table for an arbitrary density: cumulative masses on a uniform
/// cell grid, then bisection inside the selected cell.
#[derive(Clone)]
struct CustomTable<S: Scalar> {
    a: S,
    h: S,
    cum: Vec<S>,
    rho: DensityFn<S>,
    rule: Arc<GaussLegendre<S>>,
}

const CUSTOM_CELLS: usize = 256;

impl<S: Scalar> CustomTable<S> {
    fn new(a: S, b: S, rho: DensityFn<S>, tol: Tolerance<S>) -> Result<Self> {
        let h = (b - a) / S::from_usize_lossy(CUSTOM_CELLS);
        let mut cum = Vec::with_capacity(CUSTOM_CELLS + 1);
        cum.push(S::zero());
        let mut acc = S::zero();
        for i in 0..CUSTOM_CELLS {
            let lo = a + h * S::from_usize_lossy(i);
            acc = acc + quadrature::gauss_kronrod(|z| rho(z), lo, lo + h, tol)?.value;
            cum.push(acc);
        }
        Ok(Self { a, h, cum, rho, rule: Arc::new(GaussLegendre::new(10)) })
    }

    fn sample(&self, u: S) -> S {
        let target = u * self.cum[CUSTOM_CELLS];
        let cell = match self.cum.binary_search_by(|c| c.partial_cmp(&target).expect("NaN")) {
            Ok(i) | Err(i) => i.clamp(1, CUSTOM_CELLS) - 1,
        };
        let lo = self.a + self.h * S::from_usize_lossy(cell);
        let need = target - self.cum[cell];
        let (mut l, mut r) = (lo, lo + self.h);
        for _ in 0..60 {
            let m = S::lit(0.5) * (l + r);
            if self.rule.integrate(|z| (self.rho)(z), lo, m) < need {
                l = m;
            } else {
                r = m;
            }
            if r - l <= S::epsilon() * (S::one() + m.abs()) {
                break;
            }
        }
        S::lit(0.5) * (l + r)
    }
}

/// Draws from `1_G mu / mu(G)` for a finite-mass region.
#[derive(Clone)]
pub struct MarkSampler<S: Scalar> {
    mass: S,
    pieces: Vec<SamplerPiece<S>>,
    cum: Vec<S>,
}

impl<S: Scalar> MarkSampler<S> {
    /// `mu(G)`.
    pub fn mass(&self) -> S {
        self.mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> S {
        debug_assert!(self.mass > S::zero(), "sampling from a null region");
        let idx = if self.pieces.len() == 1 {
            0
        } else {
            let t = S::unit_uniform(rng) * self.mass;
            self.cum.partition_point(|&c| c <= t).min(self.pieces.len() - 1)
        };
        match &self.pieces[idx] {
            SamplerPiece::Atom(a) => a.location,
            SamplerPiece::Power { near, far, exponent, origin, above } => {
                let d = sample_power(*near, *far, *exponent, S::unit_uniform(rng));
                if *above {
                    *origin + d
                } else {
                    *origin - d
                }
            }
            SamplerPiece::Custom(t) => t.sample(S::unit_uniform(rng)),
        }
    }
}

/// Inverse CDF of the density `d^p` on `(near, far]` at level `u in [0,1)`.
pub(crate) fn sample_power<S: Scalar>(near: S, far: S, exponent: S, u: S) -> S {
    let p1 = exponent + S::one();
    if p1 == S::zero() {
        // log-uniform
        return near * (far / near).powf(u);
    }
    if far == S::infinity() {
        // p1 < 0 here; survival function (d/near)^{p1}
        return near * (S::one() - u).powf(S::one() / p1);
    }
    let a = near.powf(p1);
    let b = far.powf(p1);
    let d = (a + u * (b - a)).powf(S::one() / p1);
    d.max(near).min(far)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn region_algebra() {
        let a = Region::interval(0.0, 2.0);
        let b = Region::interval(1.0, 3.0);
        assert_eq!(a.union(&b), Region::interval(0.0, 3.0));
        assert_eq!(a.intersect(&b), Region::interval(1.0, 2.0));
        assert_eq!(a.difference(&b), Region::interval(0.0, 1.0));
        assert!(a.intersect(&b).is_subset_of(&a));
        assert_eq!(a.complement().complement(), a);
        assert!(Region::<f64>::all().difference(&Region::all()).is_empty());
        assert!(Region::interval(0.0, 1.0).contains(1.0));
        assert!(!Region::interval(0.0, 1.0).contains(0.0));
    }

    #[test]
    fn index_regions_select_atoms() {
        let m = MarkMeasure::indexed(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(m.mass(&Region::indices([0, 2])).unwrap(), 5.0);
        assert_eq!(m.mass(&Region::indices([0, 2]).complement()).unwrap(), 2.0);
        assert_eq!(m.total_mass().unwrap(), 7.0);
    }

    #[test]
    fn power_law_masses() {
        let m = MarkMeasure::<f64>::power_law(0.0, 1.0, 1.0, -1.0).unwrap();
        assert!(m.total_mass().unwrap().is_infinite());
        let eps = 0.01;
        let r = m.restrict(&Region::interval(4.0 * eps, 1.0));
        assert_relative_eq!(r.total_mass().unwrap(), (1.0 / (4.0 * eps) as f64).ln(), max_relative = 1e-14);
        let m2 = MarkMeasure::power_law(1.0, f64::INFINITY, 2.0, -3.0).unwrap();
        assert_relative_eq!(m2.total_mass().unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn integrate_matches_closed_forms_on_singular_pieces() {
        let m = MarkMeasure::power_law(0.0, 1.0, 1.0, -1.0).unwrap();
        let v = m.integrate(&Region::all(), &[], |z: f64| z.sqrt(), Tolerance::new(1e-12)).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
        let v = m.integrate(&Region::interval(0.0, 0.04), &[0.01], |z: f64| z.sqrt(), Tolerance::new(1e-12)).unwrap();
        assert_relative_eq!(v, 0.4, max_relative = 1e-10);
    }

    #[test]
    fn sampler_respects_region() {
        let m = MarkMeasure::density(vec![
            DensityPiece { lo: 0.0, hi: 1.0, density: Density::PowerLaw { coef: 1.0, exponent: 0.0, origin: 0.0 } },
            DensityPiece { lo: 1.0, hi: 2.0, density: Density::Custom(Arc::new(|z: f64| z)) },
        ])
        .unwrap();
        let g = Region::interval(0.5, 1.5);
        let s = m.sampler(&g).unwrap();
        assert_relative_eq!(s.mass(), 0.5 + (2.25 - 1.0) / 2.0, max_relative = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let z = s.sample(&mut rng);
            assert!(g.contains(z), "{z}");
        }
    }

    #[test]
    fn infinite_mass_sampler_rejected() {
        let m = MarkMeasure::power_law(0.0, 1.0, 1.0, -1.0).unwrap();
        assert!(matches!(m.sampler(&Region::all()), Err(Error::InfiniteMass)));
    }

    #[test]
    fn sample_power_inverse_cdf() {
        assert_relative_eq!(sample_power(1.0, 4.0, 0.0, 0.5), 2.5);
        assert_relative_eq!(sample_power(1.0, 100.0, -1.0, 0.5), 10.0, max_relative = 1e-14);
        assert_relative_eq!(sample_power(1.0, f64::INFINITY, -2.0, 0.5), 2.0, max_relative = 1e-14);
    }
}
