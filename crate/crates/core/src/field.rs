//! Dense time slices of lattice weights and the one-step transfer operator.
//!
//! A slice lives on a rectangle of the rotated lattice `(a, b) = (x1 + x2,
//! x1 - x2)` with step 2 in both directions. One walk step moves `a` and `b`
//! by ±1 independently, so the transfer operator is the separable stencil
//! `new(a, b) = ¼ Σ_{da, db = ±1} old(a + da, b + db)`.
//!
//! Values are stored as mantissas with a shared binary exponent. Rescaling is
//! always by an exact power of two, so results do not depend on how often it
//! happens.

use crate::disorder::{EnvironmentSpec, ScaledCoupling};
use crate::kernel::{BoxSpec, LatticePoint, TimeIndex};
use crate::scalar::{CompensatedSum, Real};
use crate::DisorderLaw;

/// Inclusive rectangle of rotated coordinates; `a_lo ≡ a_hi ≡ b_lo ≡ b_hi (mod 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub a_lo: i64,
    pub a_hi: i64,
    pub b_lo: i64,
    pub b_hi: i64,
}

impl Rect {
    pub fn point(z: LatticePoint) -> Self {
        let (a, b) = z.rotated();
        Self { a_lo: a, a_hi: a, b_lo: b, b_hi: b }
    }

    /// Smallest rectangle containing all `points`, which must share parity.
    pub fn bounding(points: &[LatticePoint]) -> Option<Self> {
        let first = *points.first()?;
        let parity = (first.x1 + first.x2).rem_euclid(2);
        let mut r = Self::point(first);
        for &p in &points[1..] {
            if (p.x1 + p.x2).rem_euclid(2) != parity {
                return None;
            }
            let (a, b) = p.rotated();
            r.a_lo = r.a_lo.min(a);
            r.a_hi = r.a_hi.max(a);
            r.b_lo = r.b_lo.min(b);
            r.b_hi = r.b_hi.max(b);
        }
        Some(r)
    }

    pub fn grow(self, k: i64) -> Self {
        Self { a_lo: self.a_lo - k, a_hi: self.a_hi + k, b_lo: self.b_lo - k, b_hi: self.b_hi + k }
    }

    pub fn is_empty(&self) -> bool {
        self.a_lo > self.a_hi || self.b_lo > self.b_hi
    }

    pub fn na(&self) -> usize {
        if self.is_empty() { 0 } else { ((self.a_hi - self.a_lo) / 2 + 1) as usize }
    }

    pub fn nb(&self) -> usize {
        if self.is_empty() { 0 } else { ((self.b_hi - self.b_lo) / 2 + 1) as usize }
    }

    pub fn len(&self) -> usize {
        self.na() * self.nb()
    }

    /// Index of `(a, b)` in row-major storage, if it lies on this rectangle.
    #[inline]
    pub fn index(&self, a: i64, b: i64) -> Option<usize> {
        if a < self.a_lo || a > self.a_hi || b < self.b_lo || b > self.b_hi {
            return None;
        }
        let (da, db) = (a - self.a_lo, b - self.b_lo);
        if da % 2 != 0 || db % 2 != 0 {
            return None;
        }
        Some((da / 2) as usize * self.nb() + (db / 2) as usize)
    }

    pub fn contains(&self, z: LatticePoint) -> bool {
        let (a, b) = z.rotated();
        self.index(a, b).is_some()
    }

    /// Keep only the part inside `|a - a_c| <= r`, `|b - b_c| <= r` around
    /// `center`, preserving the parity lattice of `self`.
    fn clip(self, center: Rect, r: i64) -> Self {
        let align_up = |x: i64, base: i64| if (x - base).rem_euclid(2) == 0 { x } else { x + 1 };
        let align_down = |x: i64, base: i64| if (x - base).rem_euclid(2) == 0 { x } else { x - 1 };
        Self {
            a_lo: align_up(self.a_lo.max(center.a_lo - r), self.a_lo),
            a_hi: align_down(self.a_hi.min(center.a_hi + r), self.a_lo),
            b_lo: align_up(self.b_lo.max(center.b_lo - r), self.b_lo),
            b_hi: align_down(self.b_hi.min(center.b_hi + r), self.b_lo),
        }
    }
}

/// Positive scalar stored as `mantissa · e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionValue<T> {
    pub log_scale: T,
    pub mantissa: T,
}

impl<T: Real> PartitionValue<T> {
    pub fn one() -> Self {
        Self { log_scale: T::zero(), mantissa: T::one() }
    }

    pub fn from_value(v: T) -> Self {
        Self { log_scale: T::zero(), mantissa: v }
    }

    pub fn value(&self) -> T {
        self.mantissa * self.log_scale.exp()
    }

    pub fn ln(&self) -> T {
        self.log_scale + self.mantissa.ln()
    }

    /// `self / other` evaluated at a common scale.
    pub fn ratio(&self, other: &Self) -> T {
        (self.mantissa / other.mantissa) * (self.log_scale - other.log_scale).exp()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { log_scale: self.log_scale + other.log_scale, mantissa: self.mantissa * other.mantissa }
    }

    pub fn scale(&self, factor: T) -> Self {
        Self { log_scale: self.log_scale, mantissa: self.mantissa * factor }
    }

    /// `self - other` as a signed value at the larger of the two scales.
    pub fn difference(&self, other: &Self) -> SignedValue<T> {
        let s = self.log_scale.max(other.log_scale);
        let m = self.mantissa * (self.log_scale - s).exp() - other.mantissa * (other.log_scale - s).exp();
        SignedValue { log_scale: s, mantissa: m }
    }
}

/// Signed linear value `mantissa · e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedValue<T> {
    pub log_scale: T,
    pub mantissa: T,
}

impl<T: Real> SignedValue<T> {
    pub fn value(&self) -> T {
        self.mantissa * self.log_scale.exp()
    }
}

/// Union of mesoscopic boxes; disorder is switched off outside.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoxMask {
    pub boxes: Vec<BoxSpec>,
}

impl BoxMask {
    pub fn new(boxes: Vec<BoxSpec>) -> Self {
        Self { boxes }
    }

    pub fn contains(&self, m: TimeIndex, y: LatticePoint) -> bool {
        self.boxes.iter().any(|b| b.contains(m, y))
    }

    fn active_at(&self, m: TimeIndex) -> Vec<(LatticePoint, i64)> {
        self.boxes
            .iter()
            .filter(|b| {
                let (lo, hi) = b.time_range();
                m >= lo && m <= hi
            })
            .map(|b| (b.center, b.space_radius()))
            .collect()
    }
}

/// Which sites of a slice receive their disorder weight.
#[derive(Debug, Clone, Copy)]
pub enum Weighting<'a> {
    None,
    All,
    Masked(&'a BoxMask),
}

/// One time slice of non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField<T> {
    pub time: TimeIndex,
    pub rect: Rect,
    /// Represented value is `mantissa · 2^exponent`.
    pub exponent: i32,
    pub values: Vec<T>,
}

impl<T: Real> WeightField<T> {
    pub fn filled(time: TimeIndex, rect: Rect, value: T) -> Self {
        Self { time, rect, exponent: 0, values: vec![value; rect.len()] }
    }

    pub fn delta(time: TimeIndex, z: LatticePoint) -> Self {
        Self::filled(time, Rect::point(z), T::one())
    }

    pub fn log_scale(&self) -> T {
        T::of(self.exponent as f64) * T::LN_2()
    }

    /// Mantissa at `z`, zero off the slice.
    pub fn mantissa_at(&self, z: LatticePoint) -> T {
        let (a, b) = z.rotated();
        self.rect.index(a, b).map_or(T::zero(), |i| self.values[i])
    }

    pub fn value_at(&self, z: LatticePoint) -> PartitionValue<T> {
        PartitionValue { log_scale: self.log_scale(), mantissa: self.mantissa_at(z) }
    }

    /// Total mass of the slice.
    pub fn total(&self) -> PartitionValue<T> {
        let acc: CompensatedSum<T> = self.values.iter().copied().collect();
        PartitionValue { log_scale: self.log_scale(), mantissa: acc.value() }
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        let r = self.rect;
        let nb = r.nb();
        (0..r.len()).map(move |i| {
            let a = r.a_lo + 2 * (i / nb) as i64;
            let b = r.b_lo + 2 * (i % nb) as i64;
            LatticePoint::from_rotated(a, b)
        })
    }

    /// `(z, mantissa)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (LatticePoint, T)> + '_ {
        self.points().zip(self.values.iter().copied())
    }

    /// Copy of the entries inside `rect`, which must share this slice's parity.
    pub fn crop(&self, rect: Rect) -> WeightField<T> {
        let mut out = WeightField { time: self.time, rect, exponent: self.exponent, values: vec![T::zero(); rect.len()] };
        for (i, z) in out.points().collect::<Vec<_>>().into_iter().enumerate() {
            out.values[i] = self.mantissa_at(z);
        }
        out
    }

    /// Zero every site for which `keep` is false.
    pub fn restrict(&mut self, mut keep: impl FnMut(LatticePoint) -> bool) {
        let pts: Vec<LatticePoint> = self.points().collect();
        for (v, z) in self.values.iter_mut().zip(pts) {
            if !keep(z) {
                *v = T::zero();
            }
        }
    }

    /// Rescale by a power of two so that the largest mantissa lies in `[1, 2)`.
    pub fn renormalize(&mut self) {
        let max = self.values.iter().copied().fold(T::zero(), T::max);
        if !(max > T::zero()) || !max.is_finite() {
            return;
        }
        let e = max.log2().floor().to_i32().unwrap_or(0);
        if e == 0 {
            return;
        }
        let factor = T::of(2.0).powi(-e);
        for v in &mut self.values {
            *v *= factor;
        }
        self.exponent += e;
    }

    /// One application of the transfer stencil onto `target` (opposite parity).
    pub fn stencil(&self, target: Rect, time: TimeIndex) -> WeightField<T> {
        let old = self.rect;
        let (na_old, nb_old) = (old.na() as i64, old.nb() as i64);
        let (na_new, nb_new) = (target.na(), target.nb());
        let mut out = vec![T::zero(); target.len()];
        if target.is_empty() || old.is_empty() {
            return WeightField { time, rect: target, exponent: self.exponent, values: out };
        }
        debug_assert_eq!((target.a_lo - old.a_lo).rem_euclid(2), 1);
        let oi = (target.a_lo - 1 - old.a_lo).div_euclid(2);
        let oj = (target.b_lo - 1 - old.b_lo).div_euclid(2);

        // Pair sums along b of one old row, aligned to the target columns.
        let pair_sum = |row: i64, buf: &mut Vec<T>| {
            buf.iter_mut().for_each(|x| *x = T::zero());
            if row < 0 || row >= na_old {
                return;
            }
            let src = &self.values[(row * nb_old) as usize..((row + 1) * nb_old) as usize];
            let lo0 = (-oj).max(0) as usize;
            let hi0 = (nb_old - oj).clamp(0, nb_new as i64) as usize;
            for j in lo0..hi0 {
                buf[j] += src[(oj + j as i64) as usize];
            }
            let lo1 = (-oj - 1).max(0) as usize;
            let hi1 = (nb_old - oj - 1).clamp(0, nb_new as i64) as usize;
            for j in lo1..hi1 {
                buf[j] += src[(oj + j as i64 + 1) as usize];
            }
        };

        let quarter = T::of(0.25);
        let mut lower = vec![T::zero(); nb_new];
        let mut upper = vec![T::zero(); nb_new];
        pair_sum(oi, &mut lower);
        for i in 0..na_new {
            pair_sum(oi + i as i64 + 1, &mut upper);
            let dst = &mut out[i * nb_new..(i + 1) * nb_new];
            for ((d, &l), &u) in dst.iter_mut().zip(&lower).zip(&upper) {
                *d = quarter * (l + u);
            }
            std::mem::swap(&mut lower, &mut upper);
        }
        WeightField { time, rect: target, exponent: self.exponent, values: out }
    }

    /// Multiply every site by its disorder weight at this slice's time.
    pub fn apply_weights(&mut self, env: &EnvironmentSpec, coupling: &ScaledCoupling<T>, weighting: Weighting<'_>) {
        let active = match weighting {
            Weighting::None => return,
            Weighting::All => None,
            Weighting::Masked(mask) => {
                let act = mask.active_at(self.time);
                if act.is_empty() {
                    return;
                }
                Some(act)
            }
        };
        if coupling.beta == T::zero() {
            return;
        }
        let slice = env.slice(self.time);
        let (w_up, w_down) = (coupling.weight(1.0), coupling.weight(-1.0));
        let rademacher = env.law == DisorderLaw::Rademacher;
        let r = self.rect;
        let nb = r.nb();
        for (i, row) in self.values.chunks_mut(nb.max(1)).enumerate() {
            let a = r.a_lo + 2 * i as i64;
            let mut x1 = (a + r.b_lo) / 2;
            let mut x2 = (a - r.b_lo) / 2;
            for v in row.iter_mut() {
                let on = match &active {
                    None => true,
                    Some(boxes) => boxes.iter().any(|(c, rad)| (x1 - c.x1).abs() <= *rad && (x2 - c.x2).abs() <= *rad),
                };
                if on {
                    let w = if rademacher {
                        if slice.bits(x1, x2) >> 63 == 1 { w_up } else { w_down }
                    } else {
                        coupling.weight(slice.omega(x1, x2))
                    };
                    *v *= w;
                }
                x1 += 1;
                x2 -= 1;
            }
        }
    }
}

/// Options shared by all field propagations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    /// Renormalize at every time divisible by this cadence.
    pub renorm_every: usize,
    /// Optional cap on the rotated-coordinate distance from the anchor.
    pub truncation: Option<i64>,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { renorm_every: 1, truncation: None }
    }
}

impl FieldOptions {
    /// Truncation radius `⌈c·sqrt(N ln N)⌉`.
    pub fn truncated(c: f64, horizon: TimeIndex) -> Self {
        let n = horizon.max(2) as f64;
        Self { renorm_every: 1, truncation: Some((c * (n * n.ln()).sqrt()).ceil() as i64) }
    }

    /// Hoeffding bound on the disorder-free mass leaving the truncation window
    /// within `steps` steps.
    pub fn truncated_mass_bound(&self, steps: TimeIndex) -> f64 {
        match self.truncation {
            None => 0.0,
            Some(r) => {
                let r = r as f64;
                (steps as f64 * 4.0 * (-r * r / (2.0 * steps.max(1) as f64)).exp()).min(1.0)
            }
        }
    }
}

/// Time-stepping of a weight field in either time direction. The slice at
/// time `t` lives on `anchor` grown by `|t - anchor_time|`, optionally capped
/// by the truncation radius.
#[derive(Debug, Clone)]
pub struct Propagator<'a, T> {
    env: &'a EnvironmentSpec,
    coupling: &'a ScaledCoupling<T>,
    anchor: Rect,
    anchor_time: TimeIndex,
    options: FieldOptions,
    field: WeightField<T>,
    dropped: f64,
}

impl<'a, T: Real> Propagator<'a, T> {
    pub fn new(
        env: &'a EnvironmentSpec,
        coupling: &'a ScaledCoupling<T>,
        anchor: Rect,
        anchor_time: TimeIndex,
        options: FieldOptions,
        field: WeightField<T>,
    ) -> Self {
        Self { env, coupling, anchor, anchor_time, options, field, dropped: 0.0 }
    }

    /// Walk started from `z` at `time`.
    pub fn from_point(
        env: &'a EnvironmentSpec,
        coupling: &'a ScaledCoupling<T>,
        time: TimeIndex,
        z: LatticePoint,
        options: FieldOptions,
    ) -> Self {
        Self::new(env, coupling, Rect::point(z), time, options, WeightField::delta(time, z))
    }

    pub fn region(&self, t: TimeIndex) -> Rect {
        let d = (t as i64 - self.anchor_time as i64).abs();
        match self.options.truncation {
            None => self.anchor.grow(d),
            Some(r) if d <= r => self.anchor.grow(d),
            Some(r) => {
                let k = if (r - d) % 2 == 0 { r } else { r - 1 };
                self.anchor.grow(d).clip(self.anchor, k)
            }
        }
    }

    pub fn time(&self) -> TimeIndex {
        self.field.time
    }

    pub fn field(&self) -> &WeightField<T> {
        &self.field
    }

    pub fn field_mut(&mut self) -> &mut WeightField<T> {
        &mut self.field
    }

    pub fn into_field(self) -> WeightField<T> {
        self.field
    }

    /// Sum over steps of the fraction of mass that left the truncation window.
    pub fn dropped_fraction(&self) -> f64 {
        self.dropped
    }

    /// Advance one step to `time ± 1` and weight the new slice.
    pub fn step(&mut self, forward: bool, weighting: Weighting<'_>) {
        let next = if forward { self.field.time + 1 } else { self.field.time - 1 };
        let target = self.region(next);
        let mut new = self.field.stencil(target, next);
        if self.options.truncation.is_some() {
            let before = self.field.total().mantissa.to_f64_lossy();
            let after = new.total().mantissa.to_f64_lossy();
            if before > 0.0 {
                self.dropped += ((before - after) / before).max(0.0);
            }
        }
        new.apply_weights(self.env, self.coupling, weighting);
        if self.options.renorm_every > 0 && next % self.options.renorm_every == 0 {
            new.renormalize();
        }
        self.field = new;
    }

    /// Step forward until `time`, weighting every new slice.
    pub fn advance_to(&mut self, time: TimeIndex, weighting: Weighting<'_>) {
        while self.field.time < time {
            self.step(true, weighting);
        }
    }
}
