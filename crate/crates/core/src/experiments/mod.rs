//! Statistical harness: each experiment turns one limit statement into
//! estimators with standard errors and pass/fail gates.

mod covariance;
mod factorization;
mod invariance;
mod kernel_checks;
mod lognormal;
mod micro;
mod moments;
mod polymer_llt;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{mix64, DisorderLaw, EnvironmentSpec};
use crate::error::{invalid, Error, Result};
use crate::kernel::{is_reachable, LatticePoint, TimeIndex};
use crate::stats::{approaches, strictly_decreasing};

pub use covariance::covariance_vs_zeta;
pub use factorization::factorization_decay;
pub use invariance::invariance_principle;
pub use kernel_checks::kernel_diagnostics;
pub use lognormal::lognormal_limit;
pub use micro::micro_oracle;
pub use moments::moment_crosschecks;
pub use polymer_llt::polymer_llt;

/// Minimum number of replicas behind any statistical gate.
pub const REPLICA_FLOOR: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub law: DisorderLaw,
    pub beta_hat: f64,
    pub seed: u64,
    /// System sizes, strictly increasing.
    pub ladder: Vec<usize>,
    /// Replicas for scalar statistics.
    pub replicas: usize,
    /// Replicas for experiments that sample paths or whole slices.
    pub field_replicas: usize,
    pub paths_per_replica: usize,
    /// Box exponent `γ`.
    pub gamma: f64,
    /// Hölder exponent `δ` of the `L^{1+δ}` norm.
    pub delta: f64,
    /// Close-point exclusion exponent; recorded only.
    pub alpha: f64,
    pub zetas: Vec<f64>,
    /// Macroscopic endpoint `x` for the factorization and local limit experiments.
    pub endpoint_x: [f64; 2],
    pub ball_time: f64,
    pub ball_center: [f64; 2],
    pub ball_radius: f64,
    pub modulus_delta: f64,
    pub s_plus: f64,
    pub t_minus: f64,
    /// Include the disorder at `(N, z)` in the factorized point-to-point value.
    pub endpoint_disorder: bool,
    pub checkpoint_stride: Option<usize>,
    /// Truncation constant `c` for the point-to-plane sweeps.
    pub truncation: Option<f64>,
    pub micro_realizations: usize,
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            law: DisorderLaw::Gaussian,
            beta_hat: 0.5,
            seed: 1,
            ladder: vec![256, 1024, 4096],
            replicas: 10_000,
            field_replicas: 1_000,
            paths_per_replica: 4,
            gamma: 0.5,
            delta: 0.5,
            alpha: 0.5,
            zetas: vec![0.2, 0.5, 0.8, 1.0],
            endpoint_x: [0.5, 0.5],
            ball_time: 0.5,
            ball_center: [0.0, 0.0],
            ball_radius: 0.5,
            modulus_delta: 0.1,
            s_plus: 1.0 / 3.0,
            t_minus: 2.0 / 3.0,
            endpoint_disorder: false,
            checkpoint_stride: None,
            truncation: None,
            micro_realizations: 20,
            out: "polymer2d-out".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_hat > 0.0 && self.beta_hat < 1.0) {
            return Err(Error::BetaHatOutOfRange(self.beta_hat));
        }
        if self.ladder.is_empty() {
            return invalid("ladder must not be empty");
        }
        if !self.ladder.windows(2).all(|w| w[0] < w[1]) {
            return invalid(format!("ladder must be strictly increasing, got {:?}", self.ladder));
        }
        if self.ladder[0] < 8 {
            return invalid("ladder sizes must be at least 8");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return invalid(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.delta > 0.0) {
            return invalid("delta must be positive");
        }
        if self.zetas.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return invalid("zetas must lie in [0, 1]");
        }
        if !(0.0 < self.s_plus && self.s_plus < self.t_minus && self.t_minus < 1.0) {
            return invalid("need 0 < s_plus < t_minus < 1");
        }
        if !(self.ball_time > 0.0 && self.ball_time <= 1.0) || !(self.ball_radius > 0.0) {
            return invalid("ball needs time in (0, 1] and positive radius");
        }
        if !(self.modulus_delta > 0.0 && self.modulus_delta <= 1.0) {
            return invalid("modulus_delta must lie in (0, 1]");
        }
        if self.paths_per_replica == 0 {
            return invalid("paths_per_replica must be positive");
        }
        if self.micro_realizations == 0 {
            return invalid("micro_realizations must be positive");
        }
        if self.checkpoint_stride == Some(0) {
            return invalid("checkpoint_stride must be positive");
        }
        Ok(())
    }

    /// Ladder point where single-size gates are evaluated: the middle one.
    pub fn reference_size(&self) -> usize {
        self.ladder[self.ladder.len() / 2]
    }

    pub fn largest_size(&self) -> usize {
        *self.ladder.last().expect("non-empty ladder")
    }

    /// Replica `replica` of experiment stream `stream`. The same field is used
    /// at every ladder size (common random numbers across the ladder).
    pub(crate) fn env(&self, stream: u64, replica: u64) -> EnvironmentSpec {
        EnvironmentSpec::new(self.law, mix64(self.seed ^ mix64(stream)), replica)
    }

    pub(crate) fn require_replicas(&self, count: usize) -> Result<()> {
        if count < REPLICA_FLOOR {
            return Err(Error::TooFewReplicas { got: count, floor: REPLICA_FLOOR });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Info,
    Pass(String),
    Fail(String),
}

impl Gate {
    pub fn check(ok: bool, rule: impl Into<String>) -> Self {
        if ok {
            Gate::Pass(rule.into())
        } else {
            Gate::Fail(rule.into())
        }
    }

    pub fn failed(&self) -> bool {
        matches!(self, Gate::Fail(_))
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Info => write!(f, "info"),
            Gate::Pass(r) => write!(f, "pass:{r}"),
            Gate::Fail(r) => write!(f, "fail:{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: &'static str,
    /// System size, 0 for rows not tied to one size.
    pub n: usize,
    pub statistic: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub gate: Gate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: &'static str,
    pub rows: Vec<Row>,
}

impl ExperimentReport {
    pub fn new(name: &'static str) -> Self {
        Self { name, rows: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        !self.rows.iter().any(|r| r.gate.failed())
    }

    pub fn push(&mut self, n: usize, statistic: impl Into<String>, estimate: f64, stderr: f64, target: f64, gate: Gate) {
        self.rows.push(Row { experiment: self.name, n, statistic: statistic.into(), estimate, stderr, target, gate });
    }

    pub fn info(&mut self, n: usize, statistic: impl Into<String>, estimate: f64, stderr: f64, target: f64) {
        self.push(n, statistic, estimate, stderr, target, Gate::Info);
    }

    /// Rows whose statistic is `statistic`, in ladder order.
    pub fn series(&self, statistic: &str) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.statistic == statistic).collect()
    }

    /// Gate that `statistic` strictly decreases along the ladder.
    pub fn gate_decreasing(&mut self, statistic: &str) {
        let xs: Vec<f64> = self.series(statistic).iter().map(|r| r.estimate).collect();
        let gate = trend_gate(&xs, strictly_decreasing(&xs), "strictly decreasing along ladder");
        let last = xs.last().copied().unwrap_or(f64::NAN);
        self.push(0, format!("trend:{statistic}"), last, f64::NAN, f64::NAN, gate);
    }

    /// Gate that `statistic` moves strictly closer to `target` along the ladder.
    pub fn gate_approaches(&mut self, statistic: &str, target: f64) {
        let xs: Vec<f64> = self.series(statistic).iter().map(|r| r.estimate).collect();
        let gate = trend_gate(&xs, approaches(&xs, target), "gap to target strictly decreasing along ladder");
        let last = xs.last().copied().unwrap_or(f64::NAN);
        self.push(0, format!("trend:{statistic}"), last, f64::NAN, target, gate);
    }
}

pub(crate) fn trend_gate(xs: &[f64], ok: bool, rule: &str) -> Gate {
    if xs.len() < 3 {
        return Gate::Fail(format!("{rule} (needs 3 ladder points, got {})", xs.len()));
    }
    Gate::check(ok && xs.iter().all(|x| x.is_finite()), rule)
}

/// Run `f` on replicas `0..count` in parallel; results stay in replica order.
pub(crate) fn over_replicas<R: Send>(count: usize, f: impl Fn(u64) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Site with the parity of `n` nearest to `⌊√N x⌋`.
pub fn nearest_admissible(n: TimeIndex, horizon: TimeIndex, x: [f64; 2]) -> LatticePoint {
    let s = (horizon as f64).sqrt();
    let base = LatticePoint::new((s * x[0]).floor() as i64, (s * x[1]).floor() as i64);
    if is_reachable(n, base) {
        return base;
    }
    let toward_origin = |c: i64| if c > 0 { c - 1 } else { c + 1 };
    if base.x1.abs() >= base.x2.abs() {
        LatticePoint::new(toward_origin(base.x1), base.x2)
    } else {
        LatticePoint::new(base.x1, toward_origin(base.x2))
    }
}

/// Names accepted by [`run_experiment`], in execution order.
pub const EXPERIMENTS: [&str; 8] = [
    "kernel-diagnostics",
    "micro-oracle",
    "moment-crosschecks",
    "lognormal-limit",
    "covariance-vs-zeta",
    "factorization-decay",
    "invariance-principle",
    "polymer-llt",
];

pub fn run_experiment(name: &str, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    match name {
        "kernel-diagnostics" => kernel_diagnostics(config),
        "micro-oracle" => micro_oracle(config),
        "moment-crosschecks" => moment_crosschecks(config),
        "lognormal-limit" => lognormal_limit(config),
        "covariance-vs-zeta" => covariance_vs_zeta(config),
        "factorization-decay" => factorization_decay(config),
        "invariance-principle" => invariance_principle(config),
        "polymer-llt" => polymer_llt(config),
        other => invalid(format!("unknown experiment {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.reference_size(), 1024);
    }

    #[test]
    fn validation_errors() {
        let bad = ExperimentConfig { beta_hat: 1.2, ..Default::default() };
        assert!(bad.validate().unwrap_err().to_string().contains("(0, 1)"));
        let bad = ExperimentConfig { ladder: vec![64, 64], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { s_plus: 0.8, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn admissible_site_has_right_parity() {
        for n in [63, 64] {
            for x in [[0.5, 0.5], [-0.3, 0.7], [0.0, 0.0], [0.13, -0.9]] {
                let z = nearest_admissible(n, 64, x);
                assert!(is_reachable(n, z), "{n} {x:?} {z:?}");
            }
        }
    }

    #[test]
    fn gate_rendering() {
        assert_eq!(Gate::Info.to_string(), "info");
        assert_eq!(Gate::check(true, "x<1").to_string(), "pass:x<1");
        assert_eq!(Gate::check(false, "x<1").to_string(), "fail:x<1");
        assert!(trend_gate(&[2.0, 1.0], true, "r").failed());
    }
}
