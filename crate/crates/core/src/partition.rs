//! Partition functions on a fixed disorder realization.
//!
//! Index conventions for the disorder that enters each variant:
//!
//! | variant                                  | weighted times          |
//! |------------------------------------------|-------------------------|
//! | point-to-plane `Z(s, y, t, ★)`           | `s+1 ..= t`             |
//! | plane-to-point `Z(s, ★, t, z)`           | `s ..= t-1`             |
//! | point-to-point `Z(s, y \| t, z)`         | `s+1 ..= t-1`           |
//! | same, with endpoint disorder             | `s+1 ..= t`             |

use crate::disorder::{EnvironmentSpec, ScaledCoupling};
use crate::error::{invalid, Error, Result};
use crate::field::{BoxMask, FieldOptions, PartitionValue, Propagator, Rect, SignedValue, WeightField, Weighting};
use crate::kernel::{is_reachable, ln_srw_prob, BoxSpec, LatticePoint, TimeIndex};
use crate::scalar::Real;

fn weighting(mask: Option<&BoxMask>) -> Weighting<'_> {
    match mask {
        Some(m) => Weighting::Masked(m),
        None => Weighting::All,
    }
}

/// Forward weights `W_t(z)` from `start`, with disorder at times
/// `start + 1 ..= end_time` (only inside `mask`, when given).
pub fn forward_field<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end_time: TimeIndex,
    mask: Option<&BoxMask>,
) -> Result<WeightField<T>> {
    forward_field_with(env, coupling, start, end_time, mask, FieldOptions::default())
}

pub fn forward_field_with<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end_time: TimeIndex,
    mask: Option<&BoxMask>,
    options: FieldOptions,
) -> Result<WeightField<T>> {
    if end_time <= start.0 {
        return invalid(format!("end time {end_time} must exceed start time {}", start.0));
    }
    let mut prop = Propagator::from_point(env, coupling, start.0, start.1, options);
    prop.advance_to(end_time, weighting(mask));
    Ok(prop.into_field())
}

/// `Z(s, y, t, ★)`.
pub fn point_to_plane<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end_time: TimeIndex,
) -> Result<PartitionValue<T>> {
    point_to_plane_masked(env, coupling, start, end_time, None)
}

pub fn point_to_plane_masked<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end_time: TimeIndex,
    mask: Option<&BoxMask>,
) -> Result<PartitionValue<T>> {
    let f = forward_field(env, coupling, start, end_time, mask)?;
    Ok(if coupling.beta == T::zero() { PartitionValue::one() } else { f.total() })
}

/// Weights of the time-reversed walk from `end`, with disorder collected at
/// `start_time ..= end.0 - 1`; its total mass is the plane-to-point value.
pub fn plane_to_point_field<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start_time: TimeIndex,
    end: (TimeIndex, LatticePoint),
    mask: Option<&BoxMask>,
) -> Result<WeightField<T>> {
    if start_time >= end.0 {
        return invalid(format!("start time {start_time} must precede end time {}", end.0));
    }
    let mut prop = Propagator::from_point(env, coupling, end.0, end.1, FieldOptions::default());
    while prop.time() > start_time {
        prop.step(false, weighting(mask));
    }
    Ok(prop.into_field())
}

/// `Z(s, ★, t, z)`.
pub fn plane_to_point<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start_time: TimeIndex,
    end: (TimeIndex, LatticePoint),
) -> Result<PartitionValue<T>> {
    plane_to_point_masked(env, coupling, start_time, end, None)
}

pub fn plane_to_point_masked<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start_time: TimeIndex,
    end: (TimeIndex, LatticePoint),
    mask: Option<&BoxMask>,
) -> Result<PartitionValue<T>> {
    let f = plane_to_point_field(env, coupling, start_time, end, mask)?;
    Ok(if coupling.beta == T::zero() { PartitionValue::one() } else { f.total() })
}

/// Forward field from `start` to `end_time` with the final step left
/// unweighted; entry `z` divided by `q_{Δn}(z - y)` is `Z(s, y | t, z)`.
pub fn point_to_point_field<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end_time: TimeIndex,
    mask: Option<&BoxMask>,
) -> Result<WeightField<T>> {
    if end_time <= start.0 {
        return invalid(format!("end time {end_time} must exceed start time {}", start.0));
    }
    let mut prop = Propagator::from_point(env, coupling, start.0, start.1, FieldOptions::default());
    prop.advance_to(end_time - 1, weighting(mask));
    prop.step(true, Weighting::None);
    Ok(prop.into_field())
}

/// Converts an entry of [`point_to_point_field`] into the conditional value.
pub fn conditional_value<T: Real>(
    field: &WeightField<T>,
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end: LatticePoint,
    endpoint_disorder: bool,
    mask: Option<&BoxMask>,
) -> Result<PartitionValue<T>> {
    let dn = field.time - start.0;
    let dz = end - start.1;
    if !is_reachable(dn, dz) {
        return Err(Error::Unreachable { n: field.time, x1: end.x1, x2: end.x2 });
    }
    let raw = field.value_at(end);
    let mut v = PartitionValue { log_scale: raw.log_scale - T::of(ln_srw_prob(dn, dz)), mantissa: raw.mantissa };
    let endpoint_on = endpoint_disorder && mask.map_or(true, |m| m.contains(field.time, end));
    if endpoint_on {
        v = v.scale(coupling.weight(env.omega(field.time, end)));
    }
    Ok(v)
}

/// `Z(s, y | t, z)`, with or without the disorder at `(t, z)`.
pub fn point_to_point<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end: (TimeIndex, LatticePoint),
    endpoint_disorder: bool,
) -> Result<PartitionValue<T>> {
    point_to_point_masked(env, coupling, start, end, endpoint_disorder, None)
}

pub fn point_to_point_masked<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    start: (TimeIndex, LatticePoint),
    end: (TimeIndex, LatticePoint),
    endpoint_disorder: bool,
    mask: Option<&BoxMask>,
) -> Result<PartitionValue<T>> {
    if end.0 <= start.0 || !is_reachable(end.0 - start.0, end.1 - start.1) {
        return Err(Error::Unreachable { n: end.0, x1: end.1.x1, x2: end.1.x2 });
    }
    let field = point_to_point_field(env, coupling, start, end.0, mask)?;
    if coupling.beta == T::zero() {
        return Ok(PartitionValue::one());
    }
    conditional_value(&field, env, coupling, start, end.1, endpoint_disorder, mask)
}

/// Backward free-end weights `B_t(z) = Z(t, z, N, ★)` on `anchor` at `time`
/// (`N` is the coupling's horizon).
pub fn free_end_field<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    time: TimeIndex,
    anchor: Rect,
) -> Result<WeightField<T>> {
    let horizon = coupling.horizon;
    if time > horizon {
        return invalid(format!("time {time} beyond horizon {horizon}"));
    }
    let top = anchor.grow((horizon - time) as i64);
    if time == horizon || coupling.beta == T::zero() {
        return Ok(WeightField::filled(time, anchor, T::one()));
    }
    // C_n = w_n · B_n, propagated backwards; B_time = stencil(C_{time+1}).
    let mut c = WeightField::filled(horizon, top, T::one());
    c.apply_weights(env, coupling, Weighting::All);
    c.renormalize();
    let mut prop = Propagator::new(env, coupling, anchor, time, FieldOptions::default(), c);
    while prop.time() > time + 1 {
        prop.step(false, Weighting::All);
    }
    let mut b = prop.field().stencil(anchor, time);
    b.renormalize();
    Ok(b)
}

/// The quantities compared in the point-to-point factorization, on one
/// realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationTerms<T> {
    /// `Z(0, 0 | N, z)`, with or without the disorder at `(N, z)`.
    pub point_to_point: PartitionValue<T>,
    /// `Z(0, 0, N, ★)`.
    pub full_forward: PartitionValue<T>,
    /// `Z(0, ★, N, z)`.
    pub full_backward: PartitionValue<T>,
    /// `Z(0, 0, s⁺, ★)`.
    pub early_forward: PartitionValue<T>,
    /// `Z(t⁻, ★, N, z)`.
    pub late_backward: PartitionValue<T>,
}

impl<T: Real> FactorizationTerms<T> {
    /// `Z(0,0|N,z) - Z(0,0,N,★) Z(0,★,N,z)`.
    pub fn full_gap(&self) -> T {
        self.point_to_point.difference(&self.full_forward.mul(&self.full_backward)).value()
    }

    /// `Z(0,0|N,z) - Z(0,0,s⁺,★) Z(t⁻,★,N,z)`.
    pub fn split_gap(&self) -> T {
        self.point_to_point.difference(&self.early_forward.mul(&self.late_backward)).value()
    }
}

/// One forward sweep from the origin and one backward sweep from `(N, z)`.
pub fn factorization_terms<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    end: (TimeIndex, LatticePoint),
    s_plus: TimeIndex,
    t_minus: TimeIndex,
    endpoint_disorder: bool,
) -> Result<FactorizationTerms<T>> {
    let n = end.0;
    if !(0 < s_plus && s_plus < t_minus && t_minus < n) {
        return invalid(format!("need 0 < s+ = {s_plus} < t- = {t_minus} < N = {n}"));
    }
    if !is_reachable(n, end.1) {
        return Err(Error::Unreachable { n, x1: end.1.x1, x2: end.1.x2 });
    }
    if coupling.beta == T::zero() {
        let one = PartitionValue::one();
        return Ok(FactorizationTerms {
            point_to_point: one,
            full_forward: one,
            full_backward: one,
            early_forward: one,
            late_backward: one,
        });
    }
    let start = (0, LatticePoint::ORIGIN);
    let mut fwd = Propagator::from_point(env, coupling, 0, LatticePoint::ORIGIN, FieldOptions::default());
    fwd.advance_to(s_plus, Weighting::All);
    let early_forward = fwd.field().total();
    fwd.advance_to(n - 1, Weighting::All);
    fwd.step(true, Weighting::None);
    let last = fwd.into_field();
    let point_to_point = conditional_value(&last, env, coupling, start, end.1, endpoint_disorder, None)?;
    let mut weighted = last;
    weighted.apply_weights(env, coupling, Weighting::All);
    let full_forward = weighted.total();

    let mut bwd = Propagator::from_point(env, coupling, n, end.1, FieldOptions::default());
    while bwd.time() > t_minus {
        bwd.step(false, Weighting::All);
    }
    let late_backward = bwd.field().total();
    while bwd.time() > 0 {
        bwd.step(false, Weighting::All);
    }
    let full_backward = bwd.field().total();
    Ok(FactorizationTerms { point_to_point, full_forward, full_backward, early_forward, late_backward })
}

/// Partition-function variant for box decompositions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    PointToPlane { start: (TimeIndex, LatticePoint), end_time: TimeIndex },
    PlaneToPoint { start_time: TimeIndex, end: (TimeIndex, LatticePoint) },
    PointToPoint { start: (TimeIndex, LatticePoint), end: (TimeIndex, LatticePoint), endpoint_disorder: bool },
}

impl Variant {
    /// `A⁺` at the pinned start and/or `A⁻` at the pinned end, with horizon
    /// equal to the variant's time span.
    pub fn default_boxes(&self, gamma: f64) -> Result<BoxMask> {
        let boxes = match *self {
            Variant::PointToPlane { start, end_time } => {
                vec![BoxSpec::forward(start.0, start.1, gamma, end_time - start.0)?]
            }
            Variant::PlaneToPoint { start_time, end } => {
                vec![BoxSpec::backward(end.0, end.1, gamma, end.0 - start_time)?]
            }
            Variant::PointToPoint { start, end, .. } => {
                let span = end.0 - start.0;
                vec![BoxSpec::forward(start.0, start.1, gamma, span)?, BoxSpec::backward(end.0, end.1, gamma, span)?]
            }
        };
        Ok(BoxMask::new(boxes))
    }
}

pub fn evaluate<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    variant: Variant,
    mask: Option<&BoxMask>,
) -> Result<PartitionValue<T>> {
    match variant {
        Variant::PointToPlane { start, end_time } => point_to_plane_masked(env, coupling, start, end_time, mask),
        Variant::PlaneToPoint { start_time, end } => plane_to_point_masked(env, coupling, start_time, end, mask),
        Variant::PointToPoint { start, end, endpoint_disorder } => {
            point_to_point_masked(env, coupling, start, end, endpoint_disorder, mask)
        }
    }
}

/// `Z = Z^A + Ẑ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition<T> {
    pub full: PartitionValue<T>,
    pub restricted: PartitionValue<T>,
    pub remainder: SignedValue<T>,
}

/// Disorder switched off outside `boxes`; the remainder is `Z - Z^A`.
pub fn restricted_partition<T: Real>(
    env: &EnvironmentSpec,
    coupling: &ScaledCoupling<T>,
    variant: Variant,
    boxes: &BoxMask,
) -> Result<Decomposition<T>> {
    let full = evaluate(env, coupling, variant, None)?;
    let restricted = evaluate(env, coupling, variant, Some(boxes))?;
    Ok(Decomposition { full, restricted, remainder: full.difference(&restricted) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{make_coupling, DisorderLaw};
    use crate::kernel::srw_prob;

    fn env(replica: u64) -> EnvironmentSpec {
        EnvironmentSpec::new(DisorderLaw::Gaussian, 11, replica)
    }

    #[test]
    fn disorder_free_values_are_one() {
        let c = ScaledCoupling::<f64>::disorder_free(DisorderLaw::Gaussian, 40).unwrap();
        let e = env(0);
        for t in [1, 7, 40] {
            let z = point_to_plane(&e, &c, (0, LatticePoint::ORIGIN), t).unwrap().value();
            assert!((z - 1.0).abs() < 1e-13);
        }
        let l = plane_to_point(&e, &c, 3, (40, LatticePoint::new(2, 4))).unwrap().value();
        assert!((l - 1.0).abs() < 1e-13);
        let p = point_to_point(&e, &c, (0, LatticePoint::ORIGIN), (40, LatticePoint::new(6, -2)), false).unwrap();
        assert!((p.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_step_point_to_plane_by_hand() {
        let c = make_coupling(DisorderLaw::Gaussian, 0.5, 1).unwrap();
        let e = env(3);
        let z = point_to_plane(&e, &c, (0, LatticePoint::ORIGIN), 1).unwrap().value();
        let direct: f64 =
            LatticePoint::ORIGIN.neighbors().iter().map(|&y| 0.25 * (c.beta * e.omega(1, y) - c.lambda1).exp()).sum();
        assert!((z / direct - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_step_point_to_point() {
        let c = make_coupling(DisorderLaw::Gaussian, 0.5, 16).unwrap();
        let e = env(4);
        let y = LatticePoint::new(0, 1);
        let off = point_to_point(&e, &c, (0, LatticePoint::ORIGIN), (1, y), false).unwrap();
        assert_eq!(off.value(), 1.0);
        let on = point_to_point(&e, &c, (0, LatticePoint::ORIGIN), (1, y), true).unwrap();
        assert!((on.value() / (c.beta * e.omega(1, y) - c.lambda1).exp() - 1.0).abs() < 1e-14);
        assert!(point_to_point(&e, &c, (0, LatticePoint::ORIGIN), (2, y), false).is_err());
    }

    #[test]
    fn single_step_plane_to_point() {
        let c = make_coupling(DisorderLaw::Rademacher, 0.5, 16).unwrap();
        let e = env(5);
        let z = LatticePoint::new(3, 2);
        let v = plane_to_point(&e, &c, 15, (16, z)).unwrap().value();
        let direct: f64 = z.neighbors().iter().map(|&y| 0.25 * c.weight(e.omega(15, y))).sum();
        assert!((v / direct - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_identity() {
        let n = 24;
        let c = make_coupling(DisorderLaw::Gaussian, 0.6, n).unwrap();
        let e = env(6);
        let z = point_to_plane(&e, &c, (0, LatticePoint::ORIGIN), n).unwrap().value();
        let mut sum = 0.0;
        let r = n as i64;
        for x1 in -r..=r {
            for x2 in -r..=r {
                let y = LatticePoint::new(x1, x2);
                if is_reachable(n, y) {
                    let p = point_to_point(&e, &c, (0, LatticePoint::ORIGIN), (n, y), true).unwrap().value();
                    sum += p * srw_prob::<f64>(n, y);
                }
            }
        }
        assert!((sum / z - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_mask_is_a_no_op() {
        let n = 30;
        let c = make_coupling(DisorderLaw::Gaussian, 0.5, n).unwrap();
        let e = env(7);
        let all = BoxMask::new(vec![BoxSpec {
            time: 0,
            center: LatticePoint::ORIGIN,
            direction: crate::kernel::Direction::Forward,
            gamma: 0.01,
            horizon: 1 << 40,
        }]);
        assert!(all.boxes[0].time_extent() >= n && all.boxes[0].space_radius() >= n as i64);
        let f = forward_field::<f64>(&e, &c, (0, LatticePoint::ORIGIN), n, None).unwrap();
        let g = forward_field::<f64>(&e, &c, (0, LatticePoint::ORIGIN), n, Some(&all)).unwrap();
        for ((_, a), (_, b)) in f.iter().zip(g.iter()) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        let d = restricted_partition(&e, &c, Variant::PointToPlane { start: (0, LatticePoint::ORIGIN), end_time: n }, &all)
            .unwrap();
        assert!(d.remainder.value().abs() < 1e-12 * d.full.value());
    }

    #[test]
    fn markov_consistency_through_intermediate_slice() {
        let n = 40;
        let c = make_coupling(DisorderLaw::Gaussian, 0.7, n).unwrap();
        let e = env(8);
        let z = point_to_plane(&e, &c, (0, LatticePoint::ORIGIN), n).unwrap();
        for m in [1, 13, 39, 40] {
            let w = forward_field::<f64>(&e, &c, (0, LatticePoint::ORIGIN), m, None).unwrap();
            let b = free_end_field(&e, &c, m, w.rect).unwrap();
            let s: f64 = w.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
            let v = PartitionValue { log_scale: w.log_scale() + b.log_scale(), mantissa: s };
            assert!((v.ratio(&z) - 1.0).abs() < 1e-10, "m = {m}");
        }
    }

    #[test]
    fn renormalization_cadence_is_neutral() {
        let n = 64;
        let c = make_coupling(DisorderLaw::Gaussian, 0.9, n).unwrap();
        let e = env(9);
        let a = forward_field_with::<f64>(&e, &c, (0, LatticePoint::ORIGIN), n, None, FieldOptions { renorm_every: 1, truncation: None })
            .unwrap()
            .total();
        let b = forward_field_with::<f64>(&e, &c, (0, LatticePoint::ORIGIN), n, None, FieldOptions { renorm_every: 16, truncation: None })
            .unwrap()
            .total();
        assert!((a.ratio(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_reports_small_loss() {
        let n = 200;
        let c = make_coupling(DisorderLaw::Gaussian, 0.5, n).unwrap();
        let e = env(10);
        let opts = FieldOptions::truncated(4.0, n);
        let full = point_to_plane::<f64>(&e, &c, (0, LatticePoint::ORIGIN), n).unwrap();
        let trunc = forward_field_with::<f64>(&e, &c, (0, LatticePoint::ORIGIN), n, None, opts).unwrap().total();
        assert!(opts.truncation.unwrap() < n as i64);
        let rel = 1.0 - trunc.ratio(&full);
        assert!(rel >= 0.0 && rel < 1e-6, "{rel}");
        assert!(opts.truncated_mass_bound(n) < 1e-3);
    }

    #[test]
    fn f32_agrees_with_f64() {
        let n = 48;
        let e = env(12);
        let c64 = make_coupling(DisorderLaw::Gaussian, 0.5f64, n).unwrap();
        let c32 = make_coupling(DisorderLaw::Gaussian, 0.5f32, n).unwrap();
        let z64 = point_to_plane(&e, &c64, (0, LatticePoint::ORIGIN), n).unwrap().value();
        let z32 = point_to_plane(&e, &c32, (0, LatticePoint::ORIGIN), n).unwrap().value();
        assert!((z32 as f64 / z64 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn invalid_ranges() {
        let c = make_coupling(DisorderLaw::Gaussian, 0.5, 8).unwrap();
        let e = env(0);
        assert!(point_to_plane::<f64>(&e, &c, (3, LatticePoint::ORIGIN), 3).is_err());
        assert!(plane_to_point::<f64>(&e, &c, 5, (5, LatticePoint::ORIGIN)).is_err());
    }
}
