use super::{over_replicas, ExperimentConfig, ExperimentReport, Gate};
use crate::disorder::make_coupling;
use crate::error::Result;
use crate::field::FieldOptions;
use crate::kernel::LatticePoint;
use crate::moments::two_replica_second_moment;
use crate::partition::forward_field_with;
use crate::stats::{ks_fitted_normal, summarize, variance_with_se};

const NAME: &str = "lognormal-limit";
const STREAM: u64 = 0x6c6f_676e_6f72_6d;

/// Law of `log Z(0,0,N,★)` along the ladder against the centred log-normal limit.
pub fn lognormal_limit(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.require_replicas(config.replicas)?;
    let mut report = ExperimentReport::new(NAME);
    let b2 = config.beta_hat * config.beta_hat;
    let s2 = (1.0 / (1.0 - b2)).ln();
    let second = 1.0 / (1.0 - b2);

    for &n in &config.ladder {
        let c = make_coupling(config.law, config.beta_hat, n)?;
        let options = match config.truncation {
            Some(k) => FieldOptions::truncated(k, n),
            None => FieldOptions::default(),
        };
        if config.truncation.is_some() {
            report.info(n, "truncated_mass_bound", options.truncated_mass_bound(n), 0.0, 0.0);
        }
        let values = over_replicas(config.replicas, |r| {
            let env = config.env(STREAM, r);
            let f = forward_field_with(&env, &c, (0, LatticePoint::ORIGIN), n, None, options)?;
            Ok(f.total())
        })?;
        let z: Vec<f64> = values.iter().map(|v| v.value()).collect();
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();

        let m = summarize(&logs);
        report.info(n, "mean(logZ)", m.mean, m.se, -s2 / 2.0);
        let (var, var_se) = variance_with_se(&logs);
        report.info(n, "var(logZ)", var, var_se, s2);
        report.info(n, "ks(logZ)", ks_fitted_normal(&logs), f64::NAN, 0.0);

        let first = summarize(&z);
        report.push(n, "E[Z]", first.mean, first.se, 1.0, Gate::check((first.mean - 1.0).abs() <= 4.0 * first.se, "|est-1|<=4se"));
        let sq: Vec<f64> = z.iter().map(|x| x * x).collect();
        let sm = summarize(&sq);
        let exact = two_replica_second_moment(&c, n)?;
        report.push(
            n,
            "E[Z^2]",
            sm.mean,
            sm.se,
            exact,
            Gate::check((sm.mean - exact).abs() <= 1.96 * sm.se, "|est-exact|<=1.96se"),
        );
        report.info(n, "oracle_gap E[Z^2]", (exact - second).abs(), 0.0, 0.0);
    }

    report.gate_decreasing("ks(logZ)");
    report.gate_approaches("mean(logZ)", -s2 / 2.0);
    report.gate_approaches("var(logZ)", s2);
    let gaps: Vec<f64> = report.series("var(logZ)").iter().map(|r| (r.estimate - s2).abs()).collect();
    if let (Some(&first), Some(&last)) = (gaps.first(), gaps.last()) {
        let ok = gaps.len() >= 3 && last < 0.5 * first;
        report.push(0, "final/initial gap var(logZ)", last / first, f64::NAN, 0.5, Gate::check(ok, "<0.5 over >=3 ladder points"));
    }
    report.gate_decreasing("oracle_gap E[Z^2]");
    Ok(report)
}
