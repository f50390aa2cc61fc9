//! Exhaustive enumeration over all `4^n` nearest-neighbour paths, for
//! checking the transfer-matrix engine at small sizes.

use crate::disorder::{EnvironmentSpec, ScaledCoupling};
use crate::error::{invalid, Result};
use crate::field::BoxMask;
use crate::kernel::{srw_prob, LatticePoint, TimeIndex};

/// Largest length accepted by the enumerator.
pub const MAX_LEN: usize = 10;

/// All `4^len` paths from `start`, as position sequences of length `len + 1`.
pub fn enumerate_paths(start: LatticePoint, len: usize) -> Result<Vec<Vec<LatticePoint>>> {
    if len > MAX_LEN {
        return invalid(format!("enumeration length {len} exceeds {MAX_LEN}"));
    }
    let dirs = LatticePoint::ORIGIN.neighbors();
    let mut out = Vec::with_capacity(1 << (2 * len));
    for code in 0..(1usize << (2 * len)) {
        let mut p = Vec::with_capacity(len + 1);
        let mut z = start;
        p.push(z);
        for k in 0..len {
            z = z + dirs[(code >> (2 * k)) & 3];
            p.push(z);
        }
        out.push(p);
    }
    Ok(out)
}

/// Brute-force evaluator bound to one realization.
#[derive(Debug, Clone, Copy)]
pub struct BruteForce<'a> {
    pub env: &'a EnvironmentSpec,
    pub coupling: &'a ScaledCoupling<f64>,
    /// Disorder is switched off outside the mask.
    pub mask: Option<&'a BoxMask>,
}

impl<'a> BruteForce<'a> {
    pub fn new(env: &'a EnvironmentSpec, coupling: &'a ScaledCoupling<f64>) -> Self {
        Self { env, coupling, mask: None }
    }

    pub fn with_mask(self, mask: &'a BoxMask) -> Self {
        Self { mask: Some(mask), ..self }
    }

    fn w(&self, n: TimeIndex, z: LatticePoint) -> f64 {
        if self.mask.is_some_and(|m| !m.contains(n, z)) {
            return 1.0;
        }
        self.coupling.weight(self.env.omega(n, z))
    }

    /// Product of weights at `times` along a path indexed from `t0`.
    fn product(&self, path: &[LatticePoint], t0: TimeIndex, times: std::ops::Range<TimeIndex>) -> f64 {
        times.map(|n| self.w(n, path[n - t0])).product()
    }

    /// `Z(s, y, t, ★)`.
    pub fn point_to_plane(&self, start: (TimeIndex, LatticePoint), end_time: TimeIndex) -> Result<f64> {
        let len = end_time - start.0;
        let p = 0.25f64.powi(len as i32);
        Ok(enumerate_paths(start.1, len)?
            .iter()
            .map(|s| p * self.product(s, start.0, start.0 + 1..end_time + 1))
            .sum())
    }

    /// `Z(s, ★, t, z)`: reversed paths from `(t, z)`, weights at `s..t`.
    pub fn plane_to_point(&self, start_time: TimeIndex, end: (TimeIndex, LatticePoint)) -> Result<f64> {
        let len = end.0 - start_time;
        let p = 0.25f64.powi(len as i32);
        Ok(enumerate_paths(end.1, len)?
            .iter()
            .map(|rev| {
                let fwd: Vec<LatticePoint> = rev.iter().rev().copied().collect();
                p * self.product(&fwd, start_time, start_time..end.0)
            })
            .sum())
    }

    /// `Z(s, y | t, z)` with or without the weight at `(t, z)`.
    pub fn point_to_point(
        &self,
        start: (TimeIndex, LatticePoint),
        end: (TimeIndex, LatticePoint),
        endpoint_disorder: bool,
    ) -> Result<f64> {
        let len = end.0 - start.0;
        let q = srw_prob::<f64>(len, end.1 - start.1);
        if q == 0.0 {
            return invalid("unreachable endpoint");
        }
        let last = if endpoint_disorder { end.0 + 1 } else { end.0 };
        let p = 0.25f64.powi(len as i32);
        let s: f64 = enumerate_paths(start.1, len)?
            .iter()
            .filter(|s| s[len] == end.1)
            .map(|s| p * self.product(s, start.0, start.0 + 1..last))
            .sum();
        Ok(s / q)
    }

    /// Quenched probability that `keep` holds, under the polymer of length
    /// `coupling.horizon` from the origin.
    pub fn quenched_probability(&self, keep: impl Fn(&[LatticePoint]) -> bool) -> Result<f64> {
        let n = self.coupling.horizon;
        let mut num = 0.0;
        let mut den = 0.0;
        for s in enumerate_paths(LatticePoint::ORIGIN, n)? {
            let w = self.product(&s, 0, 1..n + 1);
            den += w;
            if keep(&s) {
                num += w;
            }
        }
        Ok(num / den)
    }

    /// Quenched probability of each whole path, in enumeration order.
    pub fn path_probabilities(&self) -> Result<Vec<(Vec<LatticePoint>, f64)>> {
        let n = self.coupling.horizon;
        let paths = enumerate_paths(LatticePoint::ORIGIN, n)?;
        let w: Vec<f64> = paths.iter().map(|s| self.product(s, 0, 1..n + 1)).collect();
        let tot: f64 = w.iter().sum();
        Ok(paths.into_iter().zip(w).map(|(s, x)| (s, x / tot)).collect())
    }
}
