use super::{over_replicas, ExperimentConfig, ExperimentReport, Gate};
use crate::disorder::make_coupling;
use crate::error::{invalid, Result};
use crate::field::Rect;
use crate::kernel::LatticePoint;
use crate::moments::two_replica_second_moment;
use crate::partition::free_end_field;
use crate::stats::summarize;

const NAME: &str = "covariance-vs-zeta";
const STREAM: u64 = 0x636f_7661_72;

/// Even separation `|u| ≈ N^{ζ/2}`; `ζ = 1` uses the macroscopic `4⌊√N⌋`.
pub fn separation(n: usize, zeta: f64) -> i64 {
    if zeta >= 1.0 {
        return 4 * (n as f64).sqrt().floor() as i64;
    }
    let d = (n as f64).powf(zeta / 2.0).round() as i64;
    // Odd separations put the two walks on disjoint sublattices.
    if d % 2 == 0 {
        d
    } else {
        d + 1
    }
}

fn statistic(zeta: f64) -> String {
    format!("E[Z(0)Z(u)](zeta={zeta})")
}

/// `E[Z(0,0,N,★) Z(0,u,N,★)]` for the configured `ζ` against `(1-β̂²ζ)/(1-β̂²)`.
pub fn covariance_vs_zeta(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.require_replicas(config.replicas)?;
    let mut report = ExperimentReport::new(NAME);
    let b2 = config.beta_hat * config.beta_hat;
    let target = |zeta: f64| (1.0 - b2 * zeta) / (1.0 - b2);
    let mut zetas = config.zetas.clone();
    zetas.sort_by(f64::total_cmp);
    zetas.dedup();
    let largest = config.largest_size();
    let mut last_products: Vec<Vec<f64>> = Vec::new();

    for &n in &config.ladder {
        let c = make_coupling(config.law, config.beta_hat, n)?;
        let mut points = vec![LatticePoint::ORIGIN];
        for &zeta in &zetas {
            let d = separation(n, zeta);
            if d > n as i64 {
                return invalid(format!("separation {d} exceeds the cone at N = {n}"));
            }
            points.push(LatticePoint::new(d, 0));
        }
        let anchor = Rect::bounding(&points).expect("non-empty");
        let per_replica = over_replicas(config.replicas, |r| {
            let env = config.env(STREAM, r);
            let b = free_end_field(&env, &c, 0, anchor)?;
            let z0 = b.value_at(LatticePoint::ORIGIN).value();
            Ok(points.iter().map(|&u| z0 * b.value_at(u).value()).collect::<Vec<f64>>())
        })?;
        let column = |j: usize| per_replica.iter().map(|row| row[j]).collect::<Vec<f64>>();

        let self_overlap = summarize(&column(0));
        let exact = two_replica_second_moment(&c, n)?;
        report.push(
            n,
            "E[Z^2](zeta=0,u=0)",
            self_overlap.mean,
            self_overlap.se,
            exact,
            Gate::check((self_overlap.mean - exact).abs() <= 3.0 * self_overlap.se, "|est-exact|<=3se"),
        );
        for (j, &zeta) in zetas.iter().enumerate() {
            let s = summarize(&column(j + 1));
            report.info(n, statistic(zeta), s.mean, s.se, target(zeta));
        }
        if n == largest {
            last_products = (1..=zetas.len()).map(column).collect();
        }
    }

    for &zeta in &zetas {
        report.gate_approaches(&statistic(zeta), target(zeta));
    }

    for i in 0..zetas.len() {
        for j in i + 1..zetas.len() {
            let diff: Vec<f64> = last_products[i].iter().zip(&last_products[j]).map(|(a, b)| a - b).collect();
            let s = summarize(&diff);
            report.push(
                largest,
                format!("paired_gap(zeta={} - zeta={})", zetas[i], zetas[j]),
                s.mean,
                s.se,
                target(zetas[i]) - target(zetas[j]),
                Gate::check(s.mean > 2.0 * s.se, "gap>2se"),
            );
        }
    }
    if let Some(k) = zetas.iter().position(|&z| z >= 1.0) {
        let s = summarize(&last_products[k]);
        report.push(
            largest,
            "E[Z(0)Z(u)](zeta=1) vs independence",
            s.mean,
            s.se,
            1.0,
            Gate::check((s.mean - 1.0).abs() <= 3.0 * s.se, "|est-1|<=3se"),
        );
    }
    Ok(report)
}
