use super::{nearest_admissible, over_replicas, ExperimentConfig, ExperimentReport, Gate};
use crate::disorder::{make_coupling, ScaledCoupling};
use crate::error::Result;
use crate::partition::factorization_terms;
use crate::stats::summarize;

const NAME: &str = "factorization-decay";
const STREAM: u64 = 0x6661_6374;

fn split_times(config: &ExperimentConfig, n: usize) -> (usize, usize) {
    let s = ((config.s_plus * n as f64).floor() as usize).max(1);
    let t = ((config.t_minus * n as f64).floor() as usize).max(s + 1).min(n - 1);
    (s, t)
}

/// Point-to-point factorization errors along the ladder.
pub fn factorization_decay(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.require_replicas(config.replicas)?;
    let mut report = ExperimentReport::new(NAME);
    for &n in &config.ladder {
        let c = make_coupling(config.law, config.beta_hat, n)?;
        let z = nearest_admissible(n, n, config.endpoint_x);
        let (s_plus, t_minus) = split_times(config, n);
        let gaps = over_replicas(config.replicas, |r| {
            let env = config.env(STREAM, r);
            let t = factorization_terms(&env, &c, (n, z), s_plus, t_minus, config.endpoint_disorder)?;
            Ok((t.full_gap().abs(), t.split_gap().powi(2)))
        })?;
        let l1 = summarize(&gaps.iter().map(|g| g.0).collect::<Vec<_>>());
        report.info(n, "E|Zp2p-Z(plane)Z(point)|", l1.mean, l1.se, 0.0);
        let l2 = summarize(&gaps.iter().map(|g| g.1).collect::<Vec<_>>());
        let root = l2.mean.sqrt();
        report.info(n, "sqrt E[(Zp2p-Z(early)Z(late))^2]", root, l2.se / (2.0 * root), 0.0);
    }
    report.gate_decreasing("E|Zp2p-Z(plane)Z(point)|");
    report.gate_decreasing("sqrt E[(Zp2p-Z(early)Z(late))^2]");

    let n = config.reference_size();
    let free = ScaledCoupling::<f64>::disorder_free(config.law, n)?;
    let z = nearest_admissible(n, n, config.endpoint_x);
    let (s_plus, t_minus) = split_times(config, n);
    let t = factorization_terms(&config.env(STREAM, 0), &free, (n, z), s_plus, t_minus, config.endpoint_disorder)?;
    let worst = t.full_gap().abs().max(t.split_gap().abs());
    report.push(n, "max gap at beta_N=0", worst, 0.0, 0.0, Gate::check(worst == 0.0, "exact"));
    Ok(report)
}
