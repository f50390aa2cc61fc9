//! Quenched polymer paths: exact sampling, diffusive rescaling, modulus of
//! continuity and exact quenched marginals.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::disorder::{mix64, unit_open, EnvironmentSpec, ScaledCoupling};
use crate::error::{invalid, Result};
use crate::field::{FieldOptions, PartitionValue, Propagator, Rect, WeightField, Weighting};
use crate::kernel::{is_reachable, srw_prob, LatticePoint, TimeIndex};
use crate::partition::{forward_field, free_end_field};
use crate::scalar::{CompensatedSum, Real};

/// Nearest-neighbour path started at the origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolymerPath {
    pub steps: Vec<LatticePoint>,
}

impl PolymerPath {
    pub fn new(steps: Vec<LatticePoint>) -> Result<Self> {
        let p = Self { steps };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> TimeIndex {
        self.steps.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn endpoint(&self) -> LatticePoint {
        *self.steps.last().unwrap_or(&LatticePoint::ORIGIN)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.first() != Some(&LatticePoint::ORIGIN) {
            return invalid("path must start at the origin");
        }
        for (n, w) in self.steps.windows(2).enumerate() {
            if (w[1] - w[0]).l1() != 1 {
                return invalid(format!("steps {n} and {} are not neighbours", n + 1));
            }
        }
        Ok(())
    }

    /// Rows `n,x1,x2` with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,x1,x2")?;
        for (n, z) in self.steps.iter().enumerate() {
            writeln!(out, "{n},{},{}", z.x1, z.x2)?;
        }
        Ok(())
    }
}

/// Piecewise-linear image of a path on `[0, 1]`, breakpoints at `j / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledPath {
    pub horizon: TimeIndex,
    pub points: Vec<[f64; 2]>,
}

pub fn rescale(path: &PolymerPath) -> RescaledPath {
    let n = path.len();
    let s = (n.max(1) as f64).sqrt();
    RescaledPath {
        horizon: n,
        points: path.steps.iter().map(|z| [z.x1 as f64 / s, z.x2 as f64 / s]).collect(),
    }
}

impl RescaledPath {
    pub fn eval(&self, t: f64) -> [f64; 2] {
        let n = self.horizon;
        if n == 0 {
            return self.points[0];
        }
        let x = t.clamp(0.0, 1.0) * n as f64;
        let j = (x.floor() as usize).min(n - 1);
        let f = x - j as f64;
        let (a, b) = (self.points[j], self.points[j + 1]);
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `m_δ = sup_{|t-s| ≤ δ} |φ_t - φ_s|`, exact for piecewise-linear `φ`.
///
/// For fixed `s`, the distance is convex along each segment, so the sup is
/// attained with both ends at breakpoints or with one end at a breakpoint and
/// the other at distance exactly `δ`.
pub fn modulus(path: &RescaledPath, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return invalid(format!("delta must be positive, got {delta}"));
    }
    let n = path.horizon;
    if n == 0 {
        return Ok(0.0);
    }
    let d = delta.min(1.0);
    let width = (d * n as f64).floor() as usize;
    let mut best = 0.0f64;
    for i in 0..=n {
        let ti = i as f64 / n as f64;
        let p = path.points[i];
        for j in i + 1..=(i + width).min(n) {
            best = best.max(dist(p, path.points[j]));
        }
        if ti + d <= 1.0 {
            best = best.max(dist(p, path.eval(ti + d)));
        }
        if ti - d >= 0.0 {
            best = best.max(dist(p, path.eval(ti - d)));
        }
    }
    Ok(best)
}

/// The slices `C_n = w_n · B_n` for `n = 1..=N`, with `B_n(z) = Z(n, z, N, ★)`,
/// stored every `stride` steps and recomputed in blocks on demand.
#[derive(Debug, Clone)]
pub struct BackwardWeights<T> {
    pub env: EnvironmentSpec,
    pub coupling: ScaledCoupling<T>,
    pub horizon: TimeIndex,
    pub stride: usize,
    checkpoints: Vec<(TimeIndex, WeightField<T>)>,
    total: PartitionValue<T>,
}

fn cone(n: TimeIndex) -> Rect {
    Rect::point(LatticePoint::ORIGIN).grow(n as i64)
}

/// Default checkpoint stride `⌈√N⌉`.
pub fn default_stride(n: TimeIndex) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

pub fn backward_weights<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    horizon: TimeIndex,
    stride: usize,
) -> Result<BackwardWeights<T>> {
    if horizon == 0 {
        return invalid("horizon must be positive");
    }
    if stride == 0 || stride > horizon {
        return invalid(format!("checkpoint stride {stride} outside 1..={horizon}"));
    }
    let mut top = WeightField::filled(horizon, cone(horizon), T::one());
    top.apply_weights(env, coupling, Weighting::All);
    top.renormalize();
    let mut checkpoints = vec![(horizon, top.clone())];
    let anchor = cone(0);
    let mut prop = Propagator::new(env, coupling, anchor, 0, FieldOptions::default(), top);
    while prop.time() > 1 {
        prop.step(false, Weighting::All);
        if prop.time() % stride == 0 {
            checkpoints.push((prop.time(), prop.field().clone()));
        }
    }
    let b0 = prop.field().stencil(anchor, 0);
    let total = b0.value_at(LatticePoint::ORIGIN);
    checkpoints.reverse();
    Ok(BackwardWeights { env: *env, coupling: *coupling, horizon, stride, checkpoints, total })
}

impl<T: Real> BackwardWeights<T> {
    /// `B_0(0) = Z(0, 0, N, ★)`.
    pub fn partition(&self) -> PartitionValue<T> {
        self.total
    }

    /// `C_lo ..= C_hi` recomputed from the first checkpoint at or after `hi`.
    fn block(&self, lo: TimeIndex, hi: TimeIndex) -> Vec<WeightField<T>> {
        let (t0, f0) = self.checkpoints.iter().find(|(t, _)| *t >= hi).expect("checkpoint at horizon");
        let mut prop = Propagator::new(&self.env, &self.coupling, cone(0), 0, FieldOptions::default(), f0.clone());
        let mut out = Vec::with_capacity(hi + 1 - lo);
        if *t0 == hi {
            out.push(f0.clone());
        }
        while prop.time() > lo {
            prop.step(false, Weighting::All);
            if prop.time() <= hi {
                out.push(prop.field().clone());
            }
        }
        out.reverse();
        out
    }

    /// `C_n` for `1 ≤ n ≤ N`.
    pub fn c_slice(&self, n: TimeIndex) -> WeightField<T> {
        assert!(n >= 1 && n <= self.horizon);
        self.block(n, n).pop().expect("slice")
    }

    /// `B_n` on `rect`; `B_N ≡ 1`.
    pub fn b_slice(&self, n: TimeIndex, rect: Rect) -> WeightField<T> {
        if n >= self.horizon {
            return WeightField::filled(self.horizon, rect, T::one());
        }
        self.c_slice(n + 1).stencil(rect, n)
    }
}

const SAMPLER_KEY: u64 = 0x6a09_e667_f3bc_c908;
const SAMPLER_STEP: u64 = 0xbb67_ae85_84ca_a73b;

fn step_uniform(seed: u64, n: TimeIndex) -> f64 {
    let k = mix64(seed ^ SAMPLER_KEY);
    unit_open(mix64(k ^ (n as u64).wrapping_add(1).wrapping_mul(SAMPLER_STEP)))
}

/// Sample one path per seed, in one pass over the recomputed blocks.
pub fn sample_paths<T: Real>(weights: &BackwardWeights<T>, seeds: &[u64]) -> Vec<PolymerPath> {
    let n_max = weights.horizon;
    let mut paths: Vec<Vec<LatticePoint>> = seeds.iter().map(|_| vec![LatticePoint::ORIGIN]).collect();
    let stride = weights.stride;
    let mut lo = 1;
    while lo <= n_max {
        let hi = ((lo - 1) / stride + 1) * stride;
        let hi = hi.min(n_max);
        let block = weights.block(lo, hi);
        for (k, c) in block.iter().enumerate() {
            let n = lo + k - 1;
            for (path, &seed) in paths.iter_mut().zip(seeds) {
                let z = *path.last().expect("non-empty");
                let nb = z.neighbors();
                let w = nb.map(|y| c.mantissa_at(y).to_f64_lossy());
                let tot: f64 = w.iter().sum();
                let u = step_uniform(seed, n) * tot;
                let mut acc = 0.0;
                let mut pick = w.iter().rposition(|&x| x > 0.0).unwrap_or(3);
                for (i, wi) in w.iter().enumerate() {
                    acc += wi;
                    if u < acc && *wi > 0.0 {
                        pick = i;
                        break;
                    }
                }
                path.push(nb[pick]);
            }
        }
        lo = hi + 1;
    }
    paths.into_iter().map(|steps| PolymerPath { steps }).collect()
}

pub fn sample_path<T: Real>(weights: &BackwardWeights<T>, sampler_seed: u64) -> PolymerPath {
    sample_paths(weights, &[sampler_seed]).pop().expect("one path")
}

/// Constraint set for a quenched marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Point(LatticePoint),
    /// `√N·B(center, radius) = {z : |z/√N - center| < radius}`.
    Ball { center: [f64; 2], radius: f64 },
}

impl Target {
    /// Sites of the target reachable at time `m`.
    pub fn sites(&self, m: TimeIndex, horizon: TimeIndex) -> Vec<LatticePoint> {
        match *self {
            Target::Point(p) => [p].into_iter().filter(|&p| is_reachable(m, p)).collect(),
            Target::Ball { center, radius } => {
                let s = (horizon as f64).sqrt();
                let lo = |c: f64| ((c - radius) * s).floor() as i64;
                let hi = |c: f64| ((c + radius) * s).ceil() as i64;
                let mut out = Vec::new();
                for x1 in lo(center[0])..=hi(center[0]) {
                    for x2 in lo(center[1])..=hi(center[1]) {
                        let z = LatticePoint::new(x1, x2);
                        if is_reachable(m, z) && self.contains(z, horizon) {
                            out.push(z);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn contains(&self, z: LatticePoint, horizon: TimeIndex) -> bool {
        match *self {
            Target::Point(p) => p == z,
            Target::Ball { center, radius } => {
                let s = (horizon as f64).sqrt();
                dist([z.x1 as f64 / s, z.x2 as f64 / s], center) < radius
            }
        }
    }
}

/// `P^ω(S_{m_1} ∈ A_1, …, S_{m_K} ∈ A_K)` under the polymer measure of
/// horizon `coupling.horizon`.
pub fn quenched_marginal<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    constraints: &[(TimeIndex, Target)],
) -> Result<T> {
    let horizon = coupling.horizon;
    if constraints.is_empty() {
        return invalid("at least one constraint is required");
    }
    let mut prev = 0;
    for &(m, _) in constraints {
        if m <= prev || m > horizon {
            return invalid(format!("constraint times must increase strictly within (0, {horizon}]"));
        }
        prev = m;
    }
    if coupling.beta == T::zero() {
        return free_marginal(constraints, horizon);
    }
    // The unconstrained sweep gives Z; the constrained one is cropped to each
    // target and continued to the horizon.
    let mut full = Propagator::from_point(env, coupling, 0, LatticePoint::ORIGIN, FieldOptions::default());
    let mut kept: Option<Propagator<'_, T>> = None;
    for &(m, target) in constraints {
        let src = match kept.as_mut() {
            Some(p) => {
                p.advance_to(m, Weighting::All);
                p.field()
            }
            None => {
                full.advance_to(m, Weighting::All);
                full.field()
            }
        };
        let inside: Vec<LatticePoint> = src.points().filter(|&p| target.contains(p, horizon)).collect();
        let Some(rect) = Rect::bounding(&inside) else {
            return invalid(format!("target at time {m} contains no reachable site"));
        };
        let mut cropped = src.crop(rect);
        cropped.restrict(|p| target.contains(p, horizon));
        kept = Some(Propagator::new(env, coupling, rect, m, FieldOptions::default(), cropped));
    }
    let mut kept = kept.expect("non-empty constraints");
    full.advance_to(horizon, Weighting::All);
    kept.advance_to(horizon, Weighting::All);
    Ok(kept.field().total().ratio(&full.field().total()))
}

/// Disorder-free marginal as iterated sums of `q` over the target sites.
fn free_marginal<T: Real>(constraints: &[(TimeIndex, Target)], horizon: TimeIndex) -> Result<T> {
    let mut prev = vec![(0, LatticePoint::ORIGIN, 1.0f64)];
    for &(m, target) in constraints {
        let sites = target.sites(m, horizon);
        if sites.is_empty() {
            return invalid(format!("target at time {m} contains no reachable site"));
        }
        prev = sites
            .into_iter()
            .map(|z| {
                let p: CompensatedSum<f64> = prev.iter().map(|&(t, y, w)| w * srw_prob::<f64>(m - t, z - y)).collect();
                (m, z, p.value())
            })
            .collect();
    }
    Ok(T::of(prev.iter().map(|x| x.2).collect::<CompensatedSum<f64>>().value()))
}

/// Full quenched law of `S_m`: pairs `(z, P^ω(S_m = z))` over the cone.
pub fn quenched_slice<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    m: TimeIndex,
) -> Result<Vec<(LatticePoint, T)>> {
    let horizon = coupling.horizon;
    if m == 0 || m > horizon {
        return invalid(format!("slice time {m} outside (0, {horizon}]"));
    }
    let w = forward_field(env, coupling, (0, LatticePoint::ORIGIN), m, None)?;
    let b = free_end_field(env, coupling, m, w.rect)?;
    let prod: Vec<T> = w.values.iter().zip(&b.values).map(|(&x, &y)| x * y).collect();
    let total: CompensatedSum<T> = prod.iter().copied().collect();
    let t = total.value();
    Ok(w.points().zip(prod).map(|(z, v)| (z, v / t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{make_coupling, DisorderLaw};
    use crate::kernel::srw_prob;
    use crate::partition::point_to_plane;

    #[test]
    fn rescale_examples() {
        let p = PolymerPath::new(vec![LatticePoint::ORIGIN, LatticePoint::new(1, 0), LatticePoint::new(1, 1)]).unwrap();
        let r = rescale(&p);
        assert_eq!(r.eval(0.0), [0.0, 0.0]);
        let s = 2f64.sqrt();
        let e = r.eval(1.0);
        assert!((e[0] - 1.0 / s).abs() < 1e-15 && (e[1] - 1.0 / s).abs() < 1e-15);
        let m = r.eval(0.75);
        assert!((m[0] - 1.0 / s).abs() < 1e-15 && (m[1] - 0.5 / s).abs() < 1e-15);
    }

    #[test]
    fn path_validation() {
        assert!(PolymerPath::new(vec![LatticePoint::new(1, 0)]).is_err());
        assert!(PolymerPath::new(vec![LatticePoint::ORIGIN, LatticePoint::new(1, 1)]).is_err());
        let p = PolymerPath::new(vec![LatticePoint::ORIGIN, LatticePoint::new(0, -1)]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,x1,x2\n0,0,0\n1,0,-1\n");
    }

    #[test]
    fn modulus_examples() {
        let flat = RescaledPath { horizon: 4, points: vec![[0.0, 0.0]; 5] };
        assert_eq!(modulus(&flat, 0.3).unwrap(), 0.0);
        assert!(modulus(&flat, 0.0).is_err());
        let line = RescaledPath { horizon: 1, points: vec![[0.0, 0.0], [3.0, 4.0]] };
        for d in [0.1, 0.25, 0.7, 1.0] {
            assert!((modulus(&line, d).unwrap() - 5.0 * d).abs() < 1e-12);
        }
        let zig = RescaledPath { horizon: 4, points: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [2.0, 0.0], [-1.0, 0.0]] };
        assert_eq!(modulus(&zig, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn backward_weights_agree_with_point_to_plane() {
        let n = 64;
        let c = make_coupling(DisorderLaw::Gaussian, 0.6f64, n).unwrap();
        let e = EnvironmentSpec::new(DisorderLaw::Gaussian, 2, 3);
        let bw = backward_weights(&e, &c, n, default_stride(n)).unwrap();
        let z = point_to_plane(&e, &c, (0, LatticePoint::ORIGIN), n).unwrap();
        assert!((bw.partition().ratio(&z) - 1.0).abs() < 1e-10);
        let b5 = bw.b_slice(5, cone(5));
        let direct = free_end_field(&e, &c, 5, cone(5)).unwrap();
        for ((_, x), (_, y)) in b5.iter().zip(direct.iter()) {
            let (x, y) = (x * b5.log_scale().exp(), y * direct.log_scale().exp());
            assert!((x / y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stride_does_not_change_paths() {
        let n = 40;
        let c = make_coupling(DisorderLaw::Rademacher, 0.5f64, n).unwrap();
        let e = EnvironmentSpec::new(DisorderLaw::Rademacher, 5, 0);
        let seeds: Vec<u64> = (0..8).collect();
        let a = sample_paths(&backward_weights(&e, &c, n, 1).unwrap(), &seeds);
        let b = sample_paths(&backward_weights(&e, &c, n, n).unwrap(), &seeds);
        let d = sample_paths(&backward_weights(&e, &c, n, 7).unwrap(), &seeds);
        assert_eq!(a, b);
        assert_eq!(a, d);
        for p in &a {
            p.validate().unwrap();
            assert_eq!(p.len(), n);
        }
    }

    #[test]
    fn disorder_free_marginal_is_kernel() {
        let n = 30;
        let c = ScaledCoupling::<f64>::disorder_free(DisorderLaw::Gaussian, n).unwrap();
        let e = EnvironmentSpec::new(DisorderLaw::Gaussian, 1, 1);
        let z = LatticePoint::new(3, -5);
        let p = quenched_marginal(&e, &c, &[(12, Target::Point(z))]).unwrap();
        assert!((p - srw_prob::<f64>(12, z)).abs() < 1e-10);
    }

    #[test]
    fn slice_sums_to_one_and_matches_marginal() {
        let n = 32;
        let c = make_coupling(DisorderLaw::Gaussian, 0.7f64, n).unwrap();
        let e = EnvironmentSpec::new(DisorderLaw::Gaussian, 4, 4);
        let s = quenched_slice(&e, &c, 10).unwrap();
        let tot: f64 = s.iter().map(|(_, p)| p).sum();
        assert!((tot - 1.0).abs() < 1e-10);
        let (z, p) = s[s.len() / 2 + 3];
        let q = quenched_marginal(&e, &c, &[(10, Target::Point(z))]).unwrap();
        assert!((p - q).abs() < 1e-12);
        let ball = Target::Ball { center: [0.0, 0.0], radius: 0.5 };
        let pb = quenched_marginal(&e, &c, &[(10, ball)]).unwrap();
        let sb: f64 = s.iter().filter(|(z, _)| ball.contains(*z, n)).map(|(_, p)| p).sum();
        assert!((pb - sb).abs() < 1e-12);
    }

    #[test]
    fn marginal_rejects_bad_constraints() {
        let c = make_coupling(DisorderLaw::Gaussian, 0.5f64, 8).unwrap();
        let e = EnvironmentSpec::new(DisorderLaw::Gaussian, 0, 0);
        assert!(quenched_marginal::<f64>(&e, &c, &[]).is_err());
        let t = Target::Point(LatticePoint::ORIGIN);
        assert!(quenched_marginal(&e, &c, &[(4, t), (4, t)]).is_err());
        assert!(quenched_marginal(&e, &c, &[(3, t)]).is_err());
    }

    #[test]
    fn disorder_free_sampler_steps_are_uniform() {
        let n = 100;
        let c = ScaledCoupling::<f64>::disorder_free(DisorderLaw::Gaussian, n).unwrap();
        let e = EnvironmentSpec::new(DisorderLaw::Gaussian, 0, 0);
        let bw = backward_weights(&e, &c, n, 10).unwrap();
        let seeds: Vec<u64> = (0..1000).collect();
        let mut counts = [0f64; 4];
        for p in sample_paths(&bw, &seeds) {
            for w in p.steps.windows(2) {
                let d = w[1] - w[0];
                let k = LatticePoint::ORIGIN.neighbors().iter().position(|&y| y == d).unwrap();
                counts[k] += 1.0;
            }
        }
        let expect = 1e5 / 4.0;
        let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
        // 3 degrees of freedom, p = 0.01
        assert!(chi2 < 11.345, "{chi2}");
    }
}
