use super::{ExperimentConfig, ExperimentReport, Gate};
use crate::disorder::{make_coupling, EnvironmentSpec, ScaledCoupling};
use crate::error::Result;
use crate::field::BoxMask;
use crate::kernel::{is_reachable, LatticePoint, TimeIndex};
use crate::oracle::BruteForce;
use crate::partition::{evaluate, factorization_terms, Variant};
use crate::path::{quenched_marginal, Target};

const NAME: &str = "micro-oracle";
const STREAM: u64 = 0x6d69_6372_6f;
const MAX_N: usize = 6;
const TOL: f64 = 1e-10;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn sites(n: TimeIndex) -> Vec<LatticePoint> {
    let r = n as i64;
    let mut out = Vec::new();
    for x1 in -r..=r {
        for x2 in -r..=r {
            let z = LatticePoint::new(x1, x2);
            if is_reachable(n, z) {
                out.push(z);
            }
        }
    }
    out
}

/// Largest relative error of every variant (plain and masked) against enumeration.
fn variant_error(env: &EnvironmentSpec, c: &ScaledCoupling<f64>, gamma: f64) -> Result<f64> {
    let n = c.horizon;
    let brute = BruteForce::new(env, c);
    let origin = (0, LatticePoint::ORIGIN);
    let mut worst = 0.0f64;
    let mut check = |variant: Variant, mask: Option<&BoxMask>, expected: f64| -> Result<()> {
        let got = evaluate(env, c, variant, mask)?.value();
        worst = worst.max(rel(got, expected));
        Ok(())
    };

    let mut starts = vec![origin];
    if n >= 2 {
        starts.push((1, LatticePoint::new(1, 0)));
    }
    for &start in &starts {
        let v = Variant::PointToPlane { start, end_time: n };
        check(v, None, brute.point_to_plane(start, n)?)?;
        if n - start.0 >= 2 {
            let mask = v.default_boxes(gamma)?;
            check(v, Some(&mask), brute.with_mask(&mask).point_to_plane(start, n)?)?;
        }
    }
    for z in sites(n) {
        for start_time in [0, 1].into_iter().filter(|&s| s < n) {
            let v = Variant::PlaneToPoint { start_time, end: (n, z) };
            check(v, None, brute.plane_to_point(start_time, (n, z))?)?;
            if n - start_time >= 2 {
                let mask = v.default_boxes(gamma)?;
                check(v, Some(&mask), brute.with_mask(&mask).plane_to_point(start_time, (n, z))?)?;
            }
        }
        for flag in [false, true] {
            let v = Variant::PointToPoint { start: origin, end: (n, z), endpoint_disorder: flag };
            check(v, None, brute.point_to_point(origin, (n, z), flag)?)?;
            if n >= 2 {
                let mask = v.default_boxes(gamma)?;
                check(v, Some(&mask), brute.with_mask(&mask).point_to_point(origin, (n, z), flag)?)?;
            }
        }
    }
    Ok(worst)
}

/// Largest relative error of one- and two-time marginals and ball marginals.
fn marginal_error(env: &EnvironmentSpec, c: &ScaledCoupling<f64>) -> Result<f64> {
    let n = c.horizon;
    let brute = BruteForce::new(env, c);
    let mut worst = 0.0f64;
    for m in 1..=n {
        for z in sites(m) {
            let got = quenched_marginal(env, c, &[(m, Target::Point(z))])?;
            let expected = brute.quenched_probability(|s| s[m] == z)?;
            worst = worst.max(rel(got, expected));
        }
        let ball = Target::Ball { center: [0.0, 0.0], radius: 0.75 };
        if sites(m).iter().any(|&z| ball.contains(z, n)) {
            let got = quenched_marginal(env, c, &[(m, ball)])?;
            let expected = brute.quenched_probability(|s| ball.contains(s[m], n))?;
            worst = worst.max(rel(got, expected));
        }
    }
    if n >= 3 {
        let m1 = n / 2;
        for z1 in sites(m1) {
            for z2 in sites(n) {
                if !is_reachable(n - m1, z2 - z1) {
                    continue;
                }
                let got = quenched_marginal(env, c, &[(m1, Target::Point(z1)), (n, Target::Point(z2))])?;
                let expected = brute.quenched_probability(|s| s[m1] == z1 && s[n] == z2)?;
                worst = worst.max(rel(got, expected));
            }
        }
    }
    Ok(worst)
}

/// Largest relative error of the factorization terms and both gaps at `N = 4`.
fn factorization_error(env: &EnvironmentSpec, c: &ScaledCoupling<f64>, flag: bool) -> Result<f64> {
    let n = c.horizon;
    let brute = BruteForce::new(env, c);
    let origin = (0, LatticePoint::ORIGIN);
    let (s_plus, t_minus) = (1, 3);
    let mut worst = 0.0f64;
    for z in sites(n) {
        let t = factorization_terms(env, c, (n, z), s_plus, t_minus, flag)?;
        let p2p = brute.point_to_point(origin, (n, z), flag)?;
        let fwd = brute.point_to_plane(origin, n)?;
        let bwd = brute.plane_to_point(0, (n, z))?;
        let early = brute.point_to_plane(origin, s_plus)?;
        let late = brute.plane_to_point(t_minus, (n, z))?;
        for (a, b) in [
            (t.point_to_point.value(), p2p),
            (t.full_forward.value(), fwd),
            (t.full_backward.value(), bwd),
            (t.early_forward.value(), early),
            (t.late_backward.value(), late),
        ] {
            worst = worst.max(rel(a, b));
        }
        // Gaps relative to the point-to-point scale; they may vanish.
        worst = worst.max((t.full_gap() - (p2p - fwd * bwd)).abs() / p2p);
        worst = worst.max((t.split_gap() - (p2p - early * late)).abs() / p2p);
    }
    Ok(worst)
}

/// Every partition variant and quenched marginal against enumeration over all paths.
pub fn micro_oracle(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(NAME);
    let gate = |e: f64| Gate::check(e <= TOL, format!("rel_err<={TOL:e}"));
    for n in 1..=MAX_N {
        let c = make_coupling(config.law, config.beta_hat, n)?;
        let mut worst_v = 0.0f64;
        let mut worst_m = 0.0f64;
        let mut worst_f = 0.0f64;
        for r in 0..config.micro_realizations as u64 {
            let env = config.env(STREAM, r);
            worst_v = worst_v.max(variant_error(&env, &c, config.gamma)?);
            worst_m = worst_m.max(marginal_error(&env, &c)?);
            if n == 4 {
                for flag in [false, true] {
                    worst_f = worst_f.max(factorization_error(&env, &c, flag)?);
                }
            }
        }
        report.push(n, "max_rel_err_variants", worst_v, 0.0, 0.0, gate(worst_v));
        report.push(n, "max_rel_err_marginals", worst_m, 0.0, 0.0, gate(worst_m));
        if n == 4 {
            report.push(n, "max_rel_err_factorization", worst_f, 0.0, 0.0, gate(worst_f));
        }
    }
    Ok(report)
}
