use super::{over_replicas, trend_gate, ExperimentConfig, ExperimentReport, Gate};
use crate::disorder::{make_coupling, mix64, ScaledCoupling};
use crate::error::Result;
use crate::path::{backward_weights, default_stride, modulus, quenched_marginal, rescale, sample_paths, Target};
use crate::stats::{non_increasing, quantile, summarize, variance_with_se};

const NAME: &str = "invariance-principle";
const STREAM: u64 = 0x696e_7661_72;
const SAMPLER_STREAM: u64 = 0x7361_6d70_6c65;

struct ReplicaStats {
    endpoint_var: f64,
    two_time_cov: f64,
    ball: f64,
    /// `m_δ` per path, for each entry of the δ grid.
    moduli: Vec<Vec<f64>>,
}

fn delta_grid(delta: f64) -> Vec<f64> {
    let mut grid = vec![delta / 2.0, delta, (2.0 * delta).min(1.0)];
    grid.dedup();
    grid
}

/// Ball probability at `β_N = 0` from the Gaussian limit: `1 - e^{-r²/t}` for
/// a ball centred at the origin.
fn gaussian_ball_mass(config: &ExperimentConfig) -> f64 {
    if config.ball_center == [0.0, 0.0] {
        1.0 - (-config.ball_radius * config.ball_radius / config.ball_time).exp()
    } else {
        f64::NAN
    }
}

fn ball_time(config: &ExperimentConfig, n: usize) -> usize {
    ((config.ball_time * n as f64).round() as usize).clamp(1, n)
}

/// Annealed path statistics and quenched self-averaging along the ladder.
pub fn invariance_principle(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.require_replicas(config.field_replicas)?;
    let mut report = ExperimentReport::new(NAME);
    let grid = delta_grid(config.modulus_delta);
    let reference = config.reference_size();
    let ball = Target::Ball { center: config.ball_center, radius: config.ball_radius };
    let mut q95: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];

    for &n in &config.ladder {
        let c = make_coupling(config.law, config.beta_hat, n)?;
        let stride = config.checkpoint_stride.unwrap_or_else(|| default_stride(n)).min(n);
        let m_ball = ball_time(config, n);
        let half = n / 2;
        let stats = over_replicas(config.field_replicas, |r| {
            let env = config.env(STREAM, r);
            let weights = backward_weights(&env, &c, n, stride)?;
            let base = mix64(config.seed ^ mix64(SAMPLER_STREAM ^ n as u64));
            let seeds: Vec<u64> = (0..config.paths_per_replica as u64)
                .map(|k| mix64(base ^ mix64(r.wrapping_mul(0x1_0000_0001) ^ k)))
                .collect();
            let paths = sample_paths(&weights, &seeds);
            let count = paths.len() as f64;
            let mut endpoint_var = 0.0;
            let mut two_time_cov = 0.0;
            let mut moduli = vec![Vec::with_capacity(paths.len()); grid.len()];
            for p in &paths {
                let end = p.endpoint();
                let mid = p.steps[half];
                endpoint_var += (end.x1 * end.x1 + end.x2 * end.x2) as f64 / (2.0 * n as f64);
                two_time_cov += (mid.x1 * end.x1 + mid.x2 * end.x2) as f64 / (2.0 * n as f64);
                let rp = rescale(p);
                for (slot, &d) in moduli.iter_mut().zip(&grid) {
                    slot.push(modulus(&rp, d)?);
                }
            }
            let ball = quenched_marginal(&env, &c, &[(m_ball, ball)])?;
            Ok(ReplicaStats { endpoint_var: endpoint_var / count, two_time_cov: two_time_cov / count, ball, moduli })
        })?;

        let ev = summarize(&stats.iter().map(|s| s.endpoint_var).collect::<Vec<_>>());
        if n == reference {
            report.push(n, "endpoint_var/N", ev.mean, ev.se, 0.5, Gate::check((ev.mean - 0.5).abs() <= 0.05, "|est-0.5|<=0.05"));
        } else {
            report.info(n, "endpoint_var/N", ev.mean, ev.se, 0.5);
        }
        let tt = summarize(&stats.iter().map(|s| s.two_time_cov).collect::<Vec<_>>());
        report.info(n, "cov(S_N/2,S_N)/N", tt.mean, tt.se, 0.25);

        let balls: Vec<f64> = stats.iter().map(|s| s.ball).collect();
        let mean_ball = summarize(&balls);
        report.info(n, "mean ball probability", mean_ball.mean, mean_ball.se, gaussian_ball_mass(config));
        let (var, var_se) = variance_with_se(&balls);
        report.info(n, "var_omega(ball probability)", var, var_se, 0.0);

        let free = ScaledCoupling::<f64>::disorder_free(config.law, n)?;
        let free_ball = quenched_marginal(&config.env(STREAM, 0), &free, &[(m_ball, ball)])?;
        report.info(n, "ball probability at beta_N=0", free_ball, 0.0, gaussian_ball_mass(config));

        let mut per_delta = Vec::new();
        for (j, &d) in grid.iter().enumerate() {
            let all: Vec<f64> = stats.iter().flat_map(|s| s.moduli[j].iter().copied()).collect();
            let q = quantile(&all, 0.95);
            report.info(n, format!("q95 m_delta(delta={d})"), q, f64::NAN, f64::NAN);
            q95[j].push(q);
            per_delta.push(q);
        }
        let increasing = per_delta.windows(2).all(|w| w[0] < w[1]);
        report.push(n, "q95 m_delta increasing in delta", per_delta[per_delta.len() - 1], f64::NAN, f64::NAN, Gate::check(increasing, "strictly increasing over delta grid"));
    }

    report.gate_decreasing("var_omega(ball probability)");
    for (j, &d) in grid.iter().enumerate() {
        let xs = &q95[j];
        let gate = if d == config.modulus_delta {
            trend_gate(xs, non_increasing(xs), "non-increasing along ladder")
        } else {
            Gate::Info
        };
        report.push(0, format!("trend:q95 m_delta(delta={d})"), xs[xs.len() - 1], f64::NAN, f64::NAN, gate);
    }
    Ok(report)
}

