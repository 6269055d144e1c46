//! Multi-indices and central finite differences in the state variable.

use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Ordered tuple `(i_1, ..., i_k)` of coordinates (zero based); the
/// derivative is `d_{i_1} ... d_{i_k}`.
pub type MultiIndex = Vec<usize>;

/// All multi-indices of length exactly `order` over `d` coordinates.
pub fn multi_indices(d: usize, order: usize) -> Vec<MultiIndex> {
    let mut out = vec![Vec::with_capacity(order)];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..d).map(move |i| {
                    let mut v = prefix.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    out
}

/// All multi-indices with `lo <= |alpha| <= hi`, shortest first.
pub fn multi_indices_between(d: usize, lo: usize, hi: usize) -> Vec<MultiIndex> {
    (lo..=hi).flat_map(|k| multi_indices(d, k)).collect()
}

/// Step policy for nested central differences:
/// `h_k = base * (1 + |x|) * 10^((k - 1) / 2)` for a derivative of order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FdConfig<S> {
    pub base_step: S,
    pub enabled: bool,
}

impl<S: Scalar> Default for FdConfig<S> {
    fn default() -> Self {
        Self { base_step: S::lit(1e-4), enabled: true }
    }
}

impl<S: Scalar> FdConfig<S> {
    pub fn step(&self, x: &[S], order: usize) -> S {
        let scale = S::one() + crate::norm(x);
        let grow = S::lit(10f64.powf((order.max(1) - 1) as f64 / 2.0));
        self.base_step * scale * grow
    }
}

/// `d^alpha f(x)` for a vector-valued `f: R^d -> R^m` by nested central
/// differences with a common step `h` (error `O(h^2)`).
///
/// `f` writes its value into the provided buffer of length `out.len()`.
pub fn partial<S, F>(mut f: F, x: &[S], alpha: &[usize], h: S, out: &mut [S])
where
    S: Scalar,
    F: FnMut(&[S], &mut [S]),
{
    let k = alpha.len();
    if k == 0 {
        f(x, out);
        return;
    }
    let m = out.len();
    out.iter_mut().for_each(|v| *v = S::zero());
    let mut xs = x.to_vec();
    let mut val = vec![S::zero(); m];
    for signs in 0u32..(1 << k) {
        xs.copy_from_slice(x);
        let mut sign = S::one();
        for (bit, &i) in alpha.iter().enumerate() {
            if signs & (1 << bit) != 0 {
                xs[i] = xs[i] - h;
                sign = -sign;
            } else {
                xs[i] = xs[i] + h;
            }
        }
        f(&xs, &mut val);
        for (o, v) in out.iter_mut().zip(&val) {
            *o = *o + sign * *v;
        }
    }
    let denom = (h + h).powi(k as i32);
    out.iter_mut().for_each(|v| *v = *v / denom);
}

/// Scalar-valued convenience wrapper around [`partial`].
pub fn partial_scalar<S, F>(f: F, x: &[S], alpha: &[usize], h: S) -> S
where
    S: Scalar,
    F: Fn(&[S]) -> S,
{
    let mut out = [S::zero()];
    partial(|y, o: &mut [S]| o[0] = f(y), x, alpha, h, &mut out);
    out[0]
}
