//! Simple random walk on Z²: exact transition probabilities, the Gaussian heat
//! kernel, the replica overlap, mesoscopic boxes and kernel-ratio diagnostics.
//!
//! Every probability is evaluated through the 45° rotation `a = x1 + x2`,
//! `b = x1 - x2`, under which one step of the planar walk is a pair of
//! independent ±1 steps. Hence
//!
//! ```text
//! q_n(z) = [C(n, (n+a)/2) / 2^n] · [C(n, (n+b)/2) / 2^n]
//! ```
//!
//! with binomials taken from a table of accumulated log-factorials.

use std::ops::{Add, Neg, Sub};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{CompensatedSum, Real};

/// Number of polymer steps.
pub type TimeIndex = usize;

/// Point of Z² in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x1: i64,
    pub x2: i64,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { x1: 0, x2: 0 };

    pub const fn new(x1: i64, x2: i64) -> Self {
        Self { x1, x2 }
    }

    /// Rotated coordinates `(x1 + x2, x1 - x2)`.
    #[inline]
    pub const fn rotated(self) -> (i64, i64) {
        (self.x1 + self.x2, self.x1 - self.x2)
    }

    /// Inverse of [`rotated`](Self::rotated); `a` and `b` must share parity.
    #[inline]
    pub const fn from_rotated(a: i64, b: i64) -> Self {
        Self { x1: (a + b) / 2, x2: (a - b) / 2 }
    }

    pub fn l1(self) -> i64 {
        self.x1.abs() + self.x2.abs()
    }

    pub fn linf(self) -> i64 {
        self.x1.abs().max(self.x2.abs())
    }

    pub fn euclid(self) -> f64 {
        ((self.x1 * self.x1 + self.x2 * self.x2) as f64).sqrt()
    }

    /// Nearest neighbours in the fixed order `+x, -x, +y, -y`.
    pub fn neighbors(self) -> [LatticePoint; 4] {
        [
            Self::new(self.x1 + 1, self.x2),
            Self::new(self.x1 - 1, self.x2),
            Self::new(self.x1, self.x2 + 1),
            Self::new(self.x1, self.x2 - 1),
        ]
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Neg for LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> Self {
        Self::new(-self.x1, -self.x2)
    }
}

impl From<(i64, i64)> for LatticePoint {
    fn from((x1, x2): (i64, i64)) -> Self {
        Self::new(x1, x2)
    }
}

/// `(n + x1 + x2) mod 2 == 0`.
#[inline]
pub fn parity_matches(n: TimeIndex, z: LatticePoint) -> bool {
    (n as i64 + z.x1 + z.x2).rem_euclid(2) == 0
}

/// Whether `q_n(z) > 0`.
#[inline]
pub fn is_reachable(n: TimeIndex, z: LatticePoint) -> bool {
    parity_matches(n, z) && z.l1() <= n as i64
}

// Covers q_{2n}(0) for n up to 2^20.
const LOG_FACTORIAL_LEN: usize = (1 << 21) + 1;

fn log_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LOG_FACTORIAL_LEN);
        let mut acc = CompensatedSum::<f64>::new();
        table.push(0.0);
        for k in 1..LOG_FACTORIAL_LEN {
            acc.add((k as f64).ln());
            table.push(acc.value());
        }
        table
    })
}

/// `ln C(n, k)`; `-inf` outside `0 <= k <= n`.
pub fn ln_binomial(n: u64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        return f64::NEG_INFINITY;
    }
    let k = k as u64;
    let table = log_factorials();
    if (n as usize) < table.len() {
        table[n as usize] - table[k as usize] - table[(n - k) as usize]
    } else {
        let k = k.min(n - k);
        let mut acc = CompensatedSum::<f64>::new();
        for i in 1..=k {
            acc.add(((n - k + i) as f64).ln() - (i as f64).ln());
        }
        acc.value()
    }
}

/// `ln P(X_n = a)` for the 1D simple random walk.
pub fn ln_srw_prob_1d(n: TimeIndex, a: i64) -> f64 {
    let n64 = n as i64;
    if a.abs() > n64 || (n64 + a).rem_euclid(2) != 0 {
        return f64::NEG_INFINITY;
    }
    ln_binomial(n as u64, (n64 + a) / 2) - n as f64 * std::f64::consts::LN_2
}

/// `ln q_n(z)`; `-inf` when `z` is not reachable.
pub fn ln_srw_prob(n: TimeIndex, z: LatticePoint) -> f64 {
    if !is_reachable(n, z) {
        return f64::NEG_INFINITY;
    }
    let (a, b) = z.rotated();
    let (a, b) = (a.abs(), b.abs());
    ln_srw_prob_1d(n, a.min(b)) + ln_srw_prob_1d(n, a.max(b))
}

/// Exact `q_n(z) = P(S_n = z | S_0 = 0)`; exactly zero outside the cone.
pub fn srw_prob<T: Real>(n: TimeIndex, z: LatticePoint) -> T {
    if !is_reachable(n, z) {
        return T::zero();
    }
    T::of(ln_srw_prob(n, z).exp())
}

/// Gaussian density on R² with covariance `t·I₂`.
pub fn heat_kernel<T: Real>(t: T, x: [T; 2]) -> Result<T> {
    if !(t > T::zero()) {
        return invalid(format!("heat kernel time must be positive, got {t}"));
    }
    let two = T::of(2.0);
    let r2 = x[0] * x[0] + x[1] * x[1];
    Ok((-r2 / (two * t)).exp() / (two * T::PI() * t))
}

/// Replica overlap together with its offset from `ln N / π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap<T> {
    pub value: T,
    pub deviation: T,
}

/// `r_m = q_{2m}(0) = Σ_z q_m(z)²` for `m = 1..=n` (index 0 holds `r_0 = 1`).
pub fn return_probabilities<T: Real>(n: TimeIndex) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    out.extend((1..=n).map(|m| T::of(return_probability(m))));
    out
}

/// `q_{2m}(0)`, computed from the exact central binomial while it fits in 53 bits.
fn return_probability(m: TimeIndex) -> f64 {
    if m <= 26 {
        let mut c: u64 = 1;
        for i in 0..m as u64 {
            c = c * (2 * m as u64 - i) / (i + 1);
        }
        let half = c as f64 / 4f64.powi(m as i32);
        half * half
    } else {
        (2.0 * ln_srw_prob_1d(2 * m, 0)).exp()
    }
}

/// `R_N = Σ_{n=1}^N q_{2n}(0)`.
pub fn replica_overlap<T: Real>(n: TimeIndex) -> Result<Overlap<T>> {
    if n == 0 {
        return invalid("replica overlap needs N >= 1");
    }
    let acc: CompensatedSum<f64> = (1..=n).map(return_probability).collect();
    let value = acc.value();
    let deviation = value - (n as f64).ln() / std::f64::consts::PI;
    Ok(Overlap { value: T::of(value), deviation: T::of(deviation) })
}

/// `a_N = (ln N)^{γ-1}`.
pub fn mesoscopic_exponent(n: TimeIndex, gamma: f64) -> f64 {
    (n as f64).ln().powf(gamma - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Mesoscopic space-time box `A±_N(n, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    pub time: TimeIndex,
    pub center: LatticePoint,
    pub direction: Direction,
    pub gamma: f64,
    pub horizon: TimeIndex,
}

impl BoxSpec {
    pub fn new(time: TimeIndex, center: LatticePoint, direction: Direction, gamma: f64, horizon: TimeIndex) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return invalid(format!("box exponent gamma must lie in (0,1), got {gamma}"));
        }
        if horizon < 2 {
            return invalid("mesoscopic boxes need N >= 2");
        }
        Ok(Self { time, center, direction, gamma, horizon })
    }

    pub fn forward(time: TimeIndex, center: LatticePoint, gamma: f64, horizon: TimeIndex) -> Result<Self> {
        Self::new(time, center, Direction::Forward, gamma, horizon)
    }

    pub fn backward(time: TimeIndex, center: LatticePoint, gamma: f64, horizon: TimeIndex) -> Result<Self> {
        Self::new(time, center, Direction::Backward, gamma, horizon)
    }

    /// `⌊N^{1-a_N}⌋`.
    pub fn time_extent(&self) -> usize {
        let a = mesoscopic_exponent(self.horizon, self.gamma);
        (self.horizon as f64).powf(1.0 - a).floor() as usize
    }

    /// `⌊N^{1/2-a_N/4}⌋`, measured in the ∞-norm.
    pub fn space_radius(&self) -> i64 {
        let a = mesoscopic_exponent(self.horizon, self.gamma);
        (self.horizon as f64).powf(0.5 - a / 4.0).floor() as i64
    }

    /// Inclusive time range `[lo, hi]` covered by the box.
    pub fn time_range(&self) -> (usize, usize) {
        let ext = self.time_extent();
        match self.direction {
            Direction::Forward => (self.time, self.time + ext),
            Direction::Backward => (self.time.saturating_sub(ext), self.time),
        }
    }

    pub fn contains(&self, m: TimeIndex, y: LatticePoint) -> bool {
        let (lo, hi) = self.time_range();
        m >= lo && m <= hi && (y - self.center).linf() <= self.space_radius()
    }
}

/// `sup |q_n(y)/q_N(z) - 1|` over the parity-admissible points of the window
/// `|N - n| < time_halfwidth`, `|z - y|_∞ < space_radius`.
pub fn kernel_ratio_sup_window(n_ref: TimeIndex, z: LatticePoint, time_halfwidth: f64, space_radius: f64) -> Result<f64> {
    let ln_ref = ln_srw_prob(n_ref, z);
    if ln_ref == f64::NEG_INFINITY {
        return invalid(format!("q_{n_ref}({}, {}) = 0", z.x1, z.x2));
    }
    // Largest integer strictly below each bound.
    let strict_floor = |x: f64| -> i64 {
        let f = x.floor();
        if f == x { f as i64 - 1 } else { f as i64 }
    };
    let dt = strict_floor(time_halfwidth);
    let dr = strict_floor(space_radius);
    if dt < 0 || dr < 0 {
        return Ok(0.0);
    }
    let n_lo = (n_ref as i64 - dt).max(0) as usize;
    let n_hi = n_ref + dt as usize;
    let mut sup = 0.0f64;
    for n in n_lo..=n_hi {
        for y1 in z.x1 - dr..=z.x1 + dr {
            for y2 in z.x2 - dr..=z.x2 + dr {
                let y = LatticePoint::new(y1, y2);
                if !is_reachable(n, y) {
                    continue;
                }
                let ratio = (ln_srw_prob(n, y) - ln_ref).exp();
                sup = sup.max((ratio - 1.0).abs());
            }
        }
    }
    Ok(sup)
}

/// Kernel-ratio diagnostic on the window `|N-n| < 2N^{1-a_N}`,
/// `|z-y|_∞ < 2N^{1/2-a_N/4}`.
pub fn kernel_ratio_sup(n: TimeIndex, z: LatticePoint, gamma: f64) -> Result<f64> {
    if n < 2 {
        return invalid("kernel ratio window needs N >= 2");
    }
    let a = mesoscopic_exponent(n, gamma);
    let nf = n as f64;
    kernel_ratio_sup_window(n, z, 2.0 * nf.powf(1.0 - a), 2.0 * nf.powf(0.5 - a / 4.0))
}

/// `sup_y n·q_n(y)`, attained at the admissible point nearest the origin.
pub fn max_scaled_prob(n: TimeIndex) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let y = if n % 2 == 0 { LatticePoint::ORIGIN } else { LatticePoint::new(1, 0) };
    n as f64 * ln_srw_prob(n, y).exp()
}

/// `sup { n·q_n(y) : ⌈N/k⌉ <= n <= N, y ∈ Z² }`.
pub fn nq_sup(n: TimeIndex, k: usize) -> Result<f64> {
    if k == 0 {
        return invalid("nq_sup needs k >= 1");
    }
    if n < k {
        return invalid(format!("nq_sup needs N >= k, got N = {n}, k = {k}"));
    }
    let lo = n.div_ceil(k).max(1);
    Ok((lo..=n).map(max_scaled_prob).fold(0.0, f64::max))
}

/// `max |n·q_n(z) - 2 p_{1/2}(z/√n)|` over admissible `|z| <= 3√n`.
pub fn llt_deviation(n: TimeIndex) -> f64 {
    let sn = (n as f64).sqrt();
    let r = (3.0 * sn).floor() as i64;
    let mut worst = 0.0f64;
    for x1 in -r..=r {
        for x2 in -r..=r {
            let z = LatticePoint::new(x1, x2);
            if z.euclid() > 3.0 * sn || !is_reachable(n, z) {
                continue;
            }
            let lhs = n as f64 * ln_srw_prob(n, z).exp();
            let x = [x1 as f64 / sn, x2 as f64 / sn];
            let rhs = 2.0 * heat_kernel(0.5, x).expect("positive time");
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Independent oracle: enumerate all 4^n paths.
    fn enumerate(n: usize) -> std::collections::HashMap<LatticePoint, f64> {
        let mut counts = std::collections::HashMap::new();
        let total = 4usize.pow(n as u32);
        for code in 0..total {
            let mut z = LatticePoint::ORIGIN;
            let mut c = code;
            for _ in 0..n {
                z = z.neighbors()[c % 4];
                c /= 4;
            }
            *counts.entry(z).or_insert(0.0) += 1.0;
        }
        for v in counts.values_mut() {
            *v /= total as f64;
        }
        counts
    }

    #[test]
    fn srw_prob_examples() {
        assert_eq!(srw_prob::<f64>(1, LatticePoint::new(1, 0)), 0.25);
        assert_relative_eq!(srw_prob::<f64>(2, LatticePoint::ORIGIN), 0.25, max_relative = 1e-14);
        assert_eq!(srw_prob::<f64>(2, LatticePoint::new(1, 0)), 0.0);
        assert_relative_eq!(srw_prob::<f64>(4, LatticePoint::ORIGIN), 9.0 / 64.0, max_relative = 1e-14);
        assert_eq!(srw_prob::<f64>(0, LatticePoint::ORIGIN), 1.0);
    }

    #[test]
    fn srw_prob_matches_enumeration_up_to_eight_steps() {
        for n in 0..=8 {
            let exact = enumerate(n);
            let r = n as i64 + 1;
            for x1 in -r..=r {
                for x2 in -r..=r {
                    let z = LatticePoint::new(x1, x2);
                    let want = exact.get(&z).copied().unwrap_or(0.0);
                    let got: f64 = srw_prob(n, z);
                    assert!((got - want).abs() < 1e-13, "n={n} z={z:?}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn srw_prob_in_f32() {
        assert!((srw_prob::<f32>(4, LatticePoint::ORIGIN) - 9.0 / 64.0).abs() < 1e-6);
    }

    #[test]
    fn heat_kernel_examples() {
        assert_relative_eq!(heat_kernel(0.5, [0.0, 0.0]).unwrap(), 1.0 / std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(heat_kernel(1.0, [1.0, 0.0]).unwrap(), 0.0965323526, max_relative = 1e-9);
        assert!(heat_kernel(0.0, [0.0, 0.0]).is_err());
        assert!(heat_kernel(-1.0f64, [0.0, 0.0]).is_err());
        for &(t, x1, x2) in &[(0.3f64, 0.2, -1.1), (2.5, 0.0, 3.0), (7.0, -2.0, 0.5)] {
            let lhs = heat_kernel(t, [x1, x2]).unwrap();
            let rhs = heat_kernel(1.0, [x1 / t.sqrt(), x2 / t.sqrt()]).unwrap() / t;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
        }
    }

    #[test]
    fn replica_overlap_examples() {
        let r1 = replica_overlap::<f64>(1).unwrap();
        assert_relative_eq!(r1.value, 0.25, max_relative = 1e-14);
        let r2 = replica_overlap::<f64>(2).unwrap();
        assert_relative_eq!(r2.value, 25.0 / 64.0, max_relative = 1e-14);
        assert!(replica_overlap::<f64>(0).is_err());
    }

    #[test]
    fn replica_overlap_brute_force() {
        // R_N from the double sum over the enumerated kernels.
        let mut r = 0.0;
        for n in 1..=6 {
            r += enumerate(n).values().map(|p| p * p).sum::<f64>();
            assert_relative_eq!(replica_overlap::<f64>(n).unwrap().value, r, max_relative = 1e-13);
        }
    }

    #[test]
    fn box_geometry() {
        let b = BoxSpec::forward(0, LatticePoint::ORIGIN, 0.5, 4096).unwrap();
        let a = mesoscopic_exponent(4096, 0.5);
        assert_eq!(b.time_extent(), 4096f64.powf(1.0 - a).floor() as usize);
        assert!(b.contains(0, LatticePoint::ORIGIN));
        assert!(b.contains(b.time_extent(), LatticePoint::new(b.space_radius(), -b.space_radius())));
        assert!(!b.contains(b.time_extent() + 1, LatticePoint::ORIGIN));
        assert!(!b.contains(1, LatticePoint::new(b.space_radius() + 1, 0)));
        let back = BoxSpec::backward(4096, LatticePoint::new(10, 4), 0.5, 4096).unwrap();
        assert!(back.contains(4096 - back.time_extent(), LatticePoint::new(10, 4)));
        assert!(!back.contains(4096 - back.time_extent() - 1, LatticePoint::new(10, 4)));
        assert!(BoxSpec::forward(0, LatticePoint::ORIGIN, 1.0, 64).is_err());

        let mut prev = (0, 0);
        for p in 4..=14 {
            let n = 1usize << p;
            let b = BoxSpec::forward(0, LatticePoint::ORIGIN, 0.5, n).unwrap();
            let cur = (b.time_extent(), b.space_radius());
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1);
            prev = cur;
        }
        let frac = |p: u32| {
            let n = 1usize << p;
            let b = BoxSpec::forward(0, LatticePoint::ORIGIN, 0.5, n).unwrap();
            (b.time_extent() as f64 / n as f64, b.space_radius() as f64 / (n as f64).sqrt())
        };
        let (t8, s8) = frac(8);
        let (t14, s14) = frac(14);
        assert!(t14 < t8 && s14 < s8);
    }

    #[test]
    fn kernel_ratio_degenerate_window() {
        let z = LatticePoint::new(2, 0);
        assert_eq!(kernel_ratio_sup_window(10, z, 1.0, 1.0).unwrap(), 0.0);
        assert!(kernel_ratio_sup_window(10, LatticePoint::new(1, 0), 1.0, 1.0).is_err());
    }

    #[test]
    fn kernel_ratio_small_window_brute_force() {
        let exact: Vec<_> = (0..=7).map(enumerate).collect();
        let q = |n: usize, y: LatticePoint| exact[n].get(&y).copied().unwrap_or(0.0);
        let (dt, dr) = (3.0, 2.0);
        let got = kernel_ratio_sup_window(4, LatticePoint::ORIGIN, dt, dr).unwrap();
        let mut want = 0.0f64;
        for n in 2..=6usize {
            for y1 in -1..=1 {
                for y2 in -1..=1 {
                    let p = q(n, LatticePoint::new(y1, y2));
                    if p > 0.0 {
                        want = want.max((p / q(4, LatticePoint::ORIGIN) - 1.0).abs());
                    }
                }
            }
        }
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn nq_sup_examples() {
        assert_eq!(nq_sup(1, 1).unwrap(), 0.25);
        assert!(nq_sup(4, 0).is_err());
        assert!(nq_sup(2, 3).is_err());
        assert!((max_scaled_prob(1 << 16) - 2.0 / std::f64::consts::PI).abs() < 0.01);
        let mut prev = 0.0;
        for p in 8..=14 {
            let v = nq_sup(1 << p, 4).unwrap();
            assert!(v >= prev && v <= 2.0 / std::f64::consts::PI);
            prev = v;
        }
    }

    #[test]
    fn llt_deviation_shrinks() {
        let devs: Vec<f64> = [8usize, 10, 12].iter().map(|&p| llt_deviation(1 << p)).collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    }
}
