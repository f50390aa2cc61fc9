use std::collections::HashMap;
use std::f64::consts::FRAC_2_PI;

use super::{ExperimentConfig, ExperimentReport, Gate};
use crate::error::Result;
use crate::kernel::{
    kernel_ratio_sup, llt_deviation, max_scaled_prob, nq_sup, replica_overlap, srw_prob, BoxSpec, LatticePoint,
};
use crate::oracle::enumerate_paths;
use crate::scalar::CompensatedSum;
use crate::stats::{non_increasing, strictly_decreasing};

const NAME: &str = "kernel-diagnostics";

/// Sizes for the kernel trend checks; independent of the experiment ladder.
const TREND_LADDER: [usize; 3] = [1 << 8, 1 << 10, 1 << 12];
const LLT_LADDER: [usize; 4] = [1 << 8, 1 << 10, 1 << 12, 1 << 14];

fn cone(n: usize) -> impl Iterator<Item = LatticePoint> {
    let r = n as i64;
    (-r..=r).flat_map(move |x1| {
        let w = r - x1.abs();
        (-w..=w).map(move |x2| LatticePoint::new(x1, x2))
    })
}

fn exact(report: &mut ExperimentReport, n: usize, statistic: &str, estimate: f64, target: f64, tol: f64) {
    let err = (estimate - target).abs();
    let gate = if tol == 0.0 {
        Gate::check(err == 0.0, "exact")
    } else {
        Gate::check(err <= tol, format!("abs_err<={tol:e}"))
    };
    report.push(n, statistic, estimate, 0.0, target, gate);
}

/// Deterministic checks of the random-walk kernel.
pub fn kernel_diagnostics(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(NAME);

    exact(&mut report, 1, "q(1,(1,0))", srw_prob(1, LatticePoint::new(1, 0)), 0.25, 0.0);
    exact(&mut report, 2, "q(2,(0,0))", srw_prob(2, LatticePoint::ORIGIN), 0.25, 0.0);
    exact(&mut report, 2, "q(2,(1,0))", srw_prob(2, LatticePoint::new(1, 0)), 0.0, 0.0);
    exact(&mut report, 4, "q(4,(0,0))", srw_prob(4, LatticePoint::ORIGIN), 9.0 / 64.0, 1e-15);

    let mut worst_enum = 0.0f64;
    for n in 0..=8 {
        let mut counts: HashMap<LatticePoint, u64> = HashMap::new();
        for p in enumerate_paths(LatticePoint::ORIGIN, n)? {
            *counts.entry(p[n]).or_default() += 1;
        }
        let total = 4f64.powi(n as i32);
        for z in cone(n) {
            let brute = counts.get(&z).copied().unwrap_or(0) as f64 / total;
            worst_enum = worst_enum.max((srw_prob::<f64>(n, z) - brute).abs());
        }
    }
    exact(&mut report, 8, "max_err_enumeration_n<=8", worst_enum, 0.0, 1e-10);

    let mut worst_sum = 0.0f64;
    let mut worst_sq = 0.0f64;
    for n in 1..=64 {
        let mut s = CompensatedSum::new();
        let mut s2 = CompensatedSum::new();
        for z in cone(n) {
            let q: f64 = srw_prob(n, z);
            s.add(q);
            s2.add(q * q);
        }
        worst_sum = worst_sum.max((s.value() - 1.0).abs());
        worst_sq = worst_sq.max((s2.value() - srw_prob::<f64>(2 * n, LatticePoint::ORIGIN)).abs());
    }
    exact(&mut report, 64, "max_err_normalization_n<=64", worst_sum, 0.0, 1e-12);
    exact(&mut report, 64, "max_err_square_sum_n<=64", worst_sq, 0.0, 1e-12);

    exact(&mut report, 1, "R_N", replica_overlap::<f64>(1)?.value, 0.25, 0.0);
    exact(&mut report, 2, "R_N", replica_overlap::<f64>(2)?.value, 0.390625, 0.0);
    let mut worst_dev = 0.0f64;
    let mut devs = Vec::new();
    for k in 4..=20 {
        let n = 1usize << k;
        let o = replica_overlap::<f64>(n)?;
        worst_dev = worst_dev.max(o.deviation.abs());
        report.info(n, "R_N-ln(N)/pi", o.deviation, 0.0, f64::NAN);
        if k >= 16 {
            devs.push(o.deviation);
        }
    }
    report.push(0, "max|R_N-ln(N)/pi|", worst_dev, 0.0, 0.0, Gate::check(worst_dev <= 0.5, "<=0.5 on 2^4..2^20"));
    let spread = devs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - devs.iter().cloned().fold(f64::INFINITY, f64::min);
    report.push(0, "spread(R_N-ln(N)/pi)_2^16..2^20", spread, 0.0, 0.0, Gate::check(spread < 0.05, "<0.05"));

    let ratios: Vec<f64> = TREND_LADDER
        .iter()
        .map(|&n| kernel_ratio_sup(n, LatticePoint::ORIGIN, config.gamma))
        .collect::<Result<_>>()?;
    for (&n, &r) in TREND_LADDER.iter().zip(&ratios) {
        report.info(n, "kernel_ratio_sup", r, 0.0, 0.0);
    }
    report.push(
        0,
        "trend:kernel_ratio_sup",
        *ratios.last().expect("non-empty"),
        f64::NAN,
        0.0,
        Gate::check(strictly_decreasing(&ratios), "strictly decreasing on 2^8,2^10,2^12"),
    );

    let top = max_scaled_prob(1 << 16);
    exact(&mut report, 1 << 16, "sup_y n*q_n(y)", top, FRAC_2_PI, 0.01);
    let sups: Vec<f64> = LLT_LADDER.iter().map(|&n| nq_sup(n, 4)).collect::<Result<_>>()?;
    for (&n, &s) in LLT_LADDER.iter().zip(&sups) {
        report.info(n, "nq_sup(k=4)", s, 0.0, FRAC_2_PI);
    }
    report.push(
        0,
        "max nq_sup(k=4)",
        sups.iter().cloned().fold(0.0, f64::max),
        0.0,
        FRAC_2_PI,
        Gate::check(sups.iter().all(|&s| s <= FRAC_2_PI), "<=2/pi on 2^8..2^14"),
    );

    let llt: Vec<f64> = LLT_LADDER.iter().map(|&n| llt_deviation(n)).collect();
    for (&n, &d) in LLT_LADDER.iter().zip(&llt) {
        report.info(n, "llt_deviation", d, 0.0, 0.0);
    }
    report.push(
        0,
        "trend:llt_deviation",
        *llt.last().expect("non-empty"),
        f64::NAN,
        0.0,
        Gate::check(strictly_decreasing(&llt), "strictly decreasing on 2^8..2^14"),
    );

    let mut extents = Vec::new();
    let mut radii = Vec::new();
    let mut t_frac = Vec::new();
    let mut r_frac = Vec::new();
    for &n in &LLT_LADDER {
        let b = BoxSpec::forward(0, LatticePoint::ORIGIN, config.gamma, n)?;
        extents.push(-(b.time_extent() as f64));
        radii.push(-(b.space_radius() as f64));
        t_frac.push(b.time_extent() as f64 / n as f64);
        r_frac.push(b.space_radius() as f64 / (n as f64).sqrt());
        report.info(n, "box_time_extent/N", b.time_extent() as f64 / n as f64, 0.0, 0.0);
        report.info(n, "box_space_radius/sqrt(N)", b.space_radius() as f64 / (n as f64).sqrt(), 0.0, 0.0);
    }
    let shrinks = |xs: &[f64]| non_increasing(xs) && xs[xs.len() - 1] < xs[0];
    let ok = non_increasing(&extents) && non_increasing(&radii) && shrinks(&t_frac) && shrinks(&r_frac);
    report.push(
        0,
        "box_extents",
        r_frac[r_frac.len() - 1],
        f64::NAN,
        0.0,
        Gate::check(ok, "extents non-decreasing, ratios non-increasing with last<first"),
    );
    Ok(report)
}
