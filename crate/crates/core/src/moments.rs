//! Exact second moments: the two-replica recursion and the chaos expansion.

use crate::disorder::ScaledCoupling;
use crate::error::{invalid, Result};
use crate::kernel::{return_probabilities, TimeIndex};
use crate::scalar::{CompensatedSum, Real};

/// `E[Z_N²]` for the point-to-plane partition function from the origin.
///
/// The difference of two independent walks, in rotated half-coordinates, is a
/// pair of independent lazy walks with steps `(¼, ½, ¼)`. The mass is kept on
/// one quadrant, and mass that can no longer return to the origin before
/// time `n` is set aside.
pub fn two_replica_second_moment<T: Real>(coupling: &ScaledCoupling<T>, n: TimeIndex) -> Result<T> {
    if n == 0 {
        return invalid("second moment needs N >= 1");
    }
    let boost = T::one() + coupling.sigma_sq();
    let half = T::of(0.5);
    let quarter = T::of(0.25);
    let side = n / 2 + 3;
    let mut g = vec![T::zero(); side * side];
    let mut tmp = vec![T::zero(); side * side];
    g[0] = T::one();
    let mut radius = 0usize;
    let mut frozen = CompensatedSum::new();
    let mult = |k: usize| if k == 0 { T::one() } else { T::of(2.0) };

    for step in 1..=n {
        let reach = n - step;
        let grown = (radius + 1).min(side - 1);
        let w = grown + 1;
        // u direction: whole rows at once; rows beyond `radius` are zero.
        for u in 0..=grown {
            let dst = &mut tmp[u * side..u * side + w];
            let row = |k: usize| &g[k * side..k * side + w];
            if u == 0 {
                for ((d, &a), &b) in dst.iter_mut().zip(row(0)).zip(row(1)) {
                    *d = half * (a + b);
                }
            } else {
                for (((d, &a), &b), &c) in dst.iter_mut().zip(row(u - 1)).zip(row(u)).zip(row(u + 1)) {
                    *d = half * b + quarter * (a + c);
                }
            }
        }
        // v direction within each row.
        for u in 0..=grown {
            tmp[u * side + w] = T::zero();
            let src = &tmp[u * side..u * side + w + 1];
            let dst = &mut g[u * side..u * side + w];
            dst[0] = half * (src[0] + src[1]);
            for v in 1..w {
                dst[v] = half * src[v] + quarter * (src[v - 1] + src[v + 1]);
            }
        }
        radius = grown;
        if radius > reach {
            for u in 0..=radius {
                for v in 0..=radius {
                    if u.max(v) > reach {
                        let i = u * side + v;
                        frozen.add(mult(u) * mult(v) * g[i]);
                        g[i] = T::zero();
                    }
                }
            }
            radius = reach;
        }
        g[0] *= boost;
    }
    for u in 0..=radius {
        for v in 0..=radius {
            frozen.add(mult(u) * mult(v) * g[u * side + v]);
        }
    }
    Ok(frozen.value())
}

/// Calls `visit(k, f_k)` for `k = 1..=k_max`, where `f_k(n)` is the weight of
/// `k` renewals with the last at `n`: `f_1 = r` and `f_k = r * f_{k-1}`.
/// Stops early once `f_k` underflows to zero everywhere.
pub fn renewal_densities<T: Real>(n: TimeIndex, k_max: usize, mut visit: impl FnMut(usize, &[T])) -> Result<()> {
    if k_max > n {
        return invalid(format!("chaos order {k_max} exceeds N = {n}"));
    }
    if k_max == 0 {
        return Ok(());
    }
    let r = return_probabilities::<T>(n);
    let mut f: Vec<T> = r.clone();
    f[0] = T::zero();
    visit(1, &f);
    let mut next = vec![T::zero(); n + 1];
    for k in 2..=k_max {
        if f.iter().all(|&x| x < T::min_positive_value()) {
            return Ok(());
        }
        for (t, slot) in next.iter_mut().enumerate() {
            if t < k {
                *slot = T::zero();
                continue;
            }
            // All terms are non-negative, so plain summation is accurate to `n·ε`.
            let len = t + 1 - k;
            *slot = dot_reversed(&r[1..=len], &f[t - len..t]);
        }
        std::mem::swap(&mut f, &mut next);
        visit(k, &f);
    }
    Ok(())
}

/// `Σ_i a[i]·b[len-1-i]` with four independent accumulators.
fn dot_reversed<T: Real>(a: &[T], b: &[T]) -> T {
    let len = a.len();
    let mut acc = [T::zero(); 4];
    let chunks = len / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let i = 4 * c + l;
            acc[l] += a[i] * b[len - 1 - i];
        }
    }
    let mut tail = T::zero();
    for i in 4 * chunks..len {
        tail += a[i] * b[len - 1 - i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `u_k(N) = Σ_{n ≤ N} f_k(n)` for `k = 0..=k_max`; `u_0 = 1`.
pub fn renewal_table<T: Real>(n: TimeIndex, k_max: usize) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); k_max + 1];
    out[0] = T::one();
    renewal_densities::<T>(n, k_max, |k, f| {
        out[k] = f.iter().copied().collect::<CompensatedSum<T>>().value();
    })?;
    Ok(out)
}

/// `E[(Z^{(k)})²] = σ^{2k} u_k(N)` for `k = 0..=k_max`.
pub fn chaos_second_moments<T: Real>(coupling: &ScaledCoupling<T>, n: TimeIndex, k_max: usize) -> Result<Vec<T>> {
    let s2 = coupling.sigma_sq();
    let mut p = T::one();
    Ok(renewal_table::<T>(n, k_max)?
        .into_iter()
        .map(|u| {
            let v = p * u;
            p *= s2;
            v
        })
        .collect())
}

/// Sum of the chaos second moments up to order `k_max`.
pub fn chaos_second_moment_total<T: Real>(coupling: &ScaledCoupling<T>, n: TimeIndex, k_max: usize) -> Result<T> {
    Ok(chaos_second_moments(coupling, n, k_max)?.into_iter().collect::<CompensatedSum<T>>().value())
}
