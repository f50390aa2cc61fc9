use super::{over_replicas, ExperimentConfig, ExperimentReport, Gate};
use crate::disorder::{make_coupling, ScaledCoupling};
use crate::error::Result;
use crate::kernel::{mesoscopic_exponent, return_probabilities, LatticePoint};
use crate::moments::{chaos_second_moment_total, chaos_second_moments, renewal_densities, two_replica_second_moment};
use crate::partition::{restricted_partition, Variant};
use crate::scalar::CompensatedSum;
use crate::stats::summarize;

const NAME: &str = "moment-crosschecks";
const STREAM: u64 = 0x6d6f_6d65_6e74;
const TOL: f64 = 1e-10;
const ORACLE_SIZES: [usize; 2] = [64, 256];
const ORACLE_BETAS: [f64; 3] = [0.3, 0.5, 0.7];
const BOUND_HORIZON: usize = 1 << 12;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Largest `u_k(N) / R_N^k - 1` over `1 ≤ k ≤ N ≤ horizon`, and the largest
/// relative gap `|u_1(N) - R_N| / R_N`.
pub fn chaos_bound_excess(horizon: usize) -> Result<(f64, f64)> {
    let r = return_probabilities::<f64>(horizon);
    let mut overlap = Vec::with_capacity(horizon + 1);
    let mut acc = CompensatedSum::new();
    overlap.push(0.0);
    for &x in &r[1..] {
        acc.add(x);
        overlap.push(acc.value());
    }
    let mut excess = f64::NEG_INFINITY;
    let mut first = 0.0f64;
    renewal_densities::<f64>(horizon, horizon, |k, f| {
        let mut u = CompensatedSum::new();
        for n in 1..=horizon {
            u.add(f[n]);
            if n < k {
                continue;
            }
            let uk = u.value();
            let bound = overlap[n].powi(k as i32);
            if k == 1 {
                first = first.max(rel(uk, overlap[n]));
            }
            if bound.is_finite() {
                excess = excess.max(uk / bound - 1.0);
            }
        }
    })?;
    Ok((excess, first))
}

/// Exact moment-oracle identities and the remainder second-moment trend.
pub fn moment_crosschecks(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(NAME);
    let gate = |e: f64| Gate::check(e <= TOL, format!("rel_err<={TOL:e}"));

    for &n in &ORACLE_SIZES {
        for &b in &ORACLE_BETAS {
            let c = make_coupling(config.law, b, n)?;
            let dp = two_replica_second_moment(&c, n)?;
            let chaos = chaos_second_moment_total(&c, n, n)?;
            let e = rel(chaos, dp);
            report.push(n, format!("chaos_vs_two_replica(beta_hat={b})"), chaos, 0.0, dp, gate(e));
        }
    }

    let (excess, first) = chaos_bound_excess(BOUND_HORIZON)?;
    report.push(
        BOUND_HORIZON,
        "max u_k(N)/R_N^k-1 (k<=N<=4096)",
        excess,
        0.0,
        0.0,
        Gate::check(excess <= TOL, format!("<={TOL:e}")),
    );
    report.push(BOUND_HORIZON, "max rel_err u_1(N) vs R_N", first, 0.0, 0.0, gate(first));

    let free = ScaledCoupling::<f64>::disorder_free(config.law, 64)?;
    let vanishing = chaos_second_moments(&free, 64, 64)?[1..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    report.push(64, "max chaos moment k>=1 at beta_N=0", vanishing, 0.0, 0.0, Gate::check(vanishing == 0.0, "exact"));

    config.require_replicas(config.replicas)?;
    let mut slopes = Vec::new();
    for &n in &config.ladder {
        let c = make_coupling(config.law, config.beta_hat, n)?;
        let variant = Variant::PointToPlane { start: (0, LatticePoint::ORIGIN), end_time: n };
        let boxes = variant.default_boxes(config.gamma)?;
        let rem = over_replicas(config.replicas, |r| {
            let env = config.env(STREAM, r);
            Ok(restricted_partition(&env, &c, variant, &boxes)?.remainder.value())
        })?;
        let s = summarize(&rem);
        report.push(n, "mean(Zhat)", s.mean, s.se, 0.0, Gate::check((s.mean).abs() <= 4.0 * s.se, "|mean|<=4se"));
        let sq: Vec<f64> = rem.iter().map(|x| x * x).collect();
        let s2 = summarize(&sq);
        report.info(n, "E[Zhat^2]", s2.mean, s2.se, f64::NAN);
        slopes.push((n, s2.mean));
    }
    report.gate_decreasing("E[Zhat^2]");
    let power = (2.0 + config.delta) / 2.0;
    for w in slopes.windows(2) {
        let ((n0, m0), (n1, m1)) = (w[0], w[1]);
        let dln = (n1 as f64).ln() - (n0 as f64).ln();
        let slope = (m1.ln() - m0.ln()) / dln;
        let shape =
            power * (mesoscopic_exponent(n1, config.gamma).ln() - mesoscopic_exponent(n0, config.gamma).ln()) / dln;
        report.info(n1, "loglog_slope E[Zhat^2]", slope, f64::NAN, shape);
    }
    Ok(report)
}
