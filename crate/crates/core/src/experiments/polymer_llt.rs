use super::{nearest_admissible, over_replicas, ExperimentConfig, ExperimentReport, Gate};
use crate::disorder::{make_coupling, ScaledCoupling};
use crate::error::Result;
use crate::kernel::heat_kernel;
use crate::path::{quenched_marginal, Target};
use crate::stats::{ks_fitted_normal, summarize, variance_with_se};

const NAME: &str = "polymer-llt";
const STREAM: u64 = 0x6c6c_74;
/// Size of the disorder-free check, independent of the ladder.
const FREE_SIZE: usize = 1 << 12;

/// `V_N = (N/2) P^ω(S_{N/2} = z) / p_{1/4}(z/√N)` on one realization.
fn local_ratio(config: &ExperimentConfig, coupling: &ScaledCoupling<f64>, replica: u64) -> Result<f64> {
    let n = coupling.horizon;
    let m = n / 2;
    let z = nearest_admissible(m, n, config.endpoint_x);
    let s = (n as f64).sqrt();
    let density = heat_kernel(0.25, [z.x1 as f64 / s, z.x2 as f64 / s])?;
    let p = quenched_marginal(&config.env(STREAM, replica), coupling, &[(m, Target::Point(z))])?;
    Ok(m as f64 * p / density)
}

/// Local limit of the quenched one-time marginal against a product of two log-normals.
pub fn polymer_llt(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.require_replicas(config.field_replicas)?;
    let mut report = ExperimentReport::new(NAME);
    let s2 = (1.0 / (1.0 - config.beta_hat * config.beta_hat)).ln();

    let free = ScaledCoupling::<f64>::disorder_free(config.law, FREE_SIZE)?;
    let v = local_ratio(config, &free, 0)?;
    report.push(FREE_SIZE, "V_N at beta_N=0", v, 0.0, 1.0, Gate::check((v - 1.0).abs() < 0.05, "|V-1|<0.05"));

    for &n in &config.ladder {
        let c = make_coupling(config.law, config.beta_hat, n)?;
        let logs = over_replicas(config.field_replicas, |r| Ok(local_ratio(config, &c, r)?.ln()))?;
        let m = summarize(&logs);
        report.info(n, "mean(logV)", m.mean, m.se, -s2);
        let (var, var_se) = variance_with_se(&logs);
        report.info(n, "var(logV)", var, var_se, 2.0 * s2);
        report.info(n, "ks(logV)", ks_fitted_normal(&logs), f64::NAN, 0.0);
    }
    report.gate_approaches("mean(logV)", -s2);
    report.gate_approaches("var(logV)", 2.0 * s2);
    report.gate_decreasing("ks(logV)");
    Ok(report)
}
