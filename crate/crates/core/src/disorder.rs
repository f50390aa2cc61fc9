//! Disorder laws, cumulants, intermediate-disorder couplings and the
//! coordinate-addressed environment `ω`.
//!
//! The environment stores nothing: the variate at `(n, z)` is computed from a
//! 64-bit mixing of `(master_seed, replica, n, x1, x2)`, so every partition
//! function and every sampled path built on the same [`EnvironmentSpec`] sees
//! the same realization, independent of evaluation order or thread count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{replica_overlap, LatticePoint, TimeIndex};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DisorderLaw {
    #[default]
    Gaussian,
    Rademacher,
}

impl DisorderLaw {
    pub fn name(self) -> &'static str {
        match self {
            DisorderLaw::Gaussian => "gaussian",
            DisorderLaw::Rademacher => "rademacher",
        }
    }
}

/// `λ(β) = ln E[e^{βω}]`.
pub fn lambda<T: Real>(law: DisorderLaw, beta: T) -> T {
    match law {
        DisorderLaw::Gaussian => beta * beta / T::of(2.0),
        DisorderLaw::Rademacher => {
            // ln cosh β = |β| + ln(1 + e^{-2|β|}) - ln 2, stable for large β.
            let b = beta.abs();
            b + (-(b + b)).exp().ln_1p() - T::LN_2()
        }
    }
}

/// `σ(β) = sqrt(e^{λ(2β) - 2λ(β)} - 1)`.
pub fn sigma<T: Real>(law: DisorderLaw, beta: T) -> T {
    let two = T::of(2.0);
    (lambda(law, two * beta) - two * lambda(law, beta)).exp_m1().max(T::zero()).sqrt()
}

/// Coupling constants for one system size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledCoupling<T> {
    pub law: DisorderLaw,
    pub beta_hat: T,
    pub horizon: TimeIndex,
    /// `R_N`.
    pub overlap: T,
    /// `β_N = β̂ / sqrt(R_N)`.
    pub beta: T,
    /// `λ(β_N)`.
    pub lambda1: T,
    /// `λ(2β_N)`.
    pub lambda2: T,
    /// `σ_N = σ(β_N)`.
    pub sigma: T,
}

impl<T: Real> ScaledCoupling<T> {
    /// Coupling at an arbitrary inverse temperature; `beta_hat` is reported as
    /// `β·sqrt(R_N)`.
    pub fn with_beta(law: DisorderLaw, beta: T, horizon: TimeIndex) -> Result<Self> {
        let overlap = replica_overlap::<T>(horizon)?.value;
        let two = T::of(2.0);
        Ok(Self {
            law,
            beta_hat: beta * overlap.sqrt(),
            horizon,
            overlap,
            beta,
            lambda1: lambda(law, beta),
            lambda2: lambda(law, two * beta),
            sigma: sigma(law, beta),
        })
    }

    /// `β_N = 0`: every weight is exactly one.
    pub fn disorder_free(law: DisorderLaw, horizon: TimeIndex) -> Result<Self> {
        Self::with_beta(law, T::zero(), horizon)
    }

    /// `σ_N²`.
    pub fn sigma_sq(&self) -> T {
        self.sigma * self.sigma
    }

    /// Weight `e^{β_N ω - λ(β_N)}` of a single visited site.
    #[inline]
    pub fn weight(&self, omega: f64) -> T {
        if self.beta == T::zero() {
            T::one()
        } else {
            (self.beta * T::of(omega) - self.lambda1).exp()
        }
    }

    /// Normalized chaos variable `η = (e^{β_N ω - λ(β_N)} - 1) / σ_N`.
    pub fn eta(&self, omega: f64) -> T {
        (self.weight(omega) - T::one()) / self.sigma
    }
}

/// Intermediate-disorder coupling `β_N = β̂ / sqrt(R_N)`.
pub fn make_coupling<T: Real>(law: DisorderLaw, beta_hat: T, horizon: TimeIndex) -> Result<ScaledCoupling<T>> {
    if !(beta_hat > T::zero() && beta_hat < T::one()) {
        return Err(Error::BetaHatOutOfRange(beta_hat.to_f64_lossy()));
    }
    let overlap = replica_overlap::<T>(horizon)?.value;
    let mut c = ScaledCoupling::with_beta(law, beta_hat / overlap.sqrt(), horizon)?;
    c.beta_hat = beta_hat;
    Ok(c)
}

/// SplitMix64 finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in the open interval (0,1) from the top 53 bits.
#[inline(always)]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// One disorder realization: law, master seed and replica index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub law: DisorderLaw,
    pub master_seed: u64,
    pub replica: u64,
}

impl EnvironmentSpec {
    pub fn new(law: DisorderLaw, master_seed: u64, replica: u64) -> Self {
        Self { law, master_seed, replica }
    }

    fn key(&self) -> u64 {
        let k = mix64(self.master_seed ^ 0x243f_6a88_85a3_08d3);
        mix64(k ^ self.replica.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x1319_8a2e_0370_7344))
    }

    /// Variates of the time slice `n`.
    #[inline]
    pub fn slice(&self, n: TimeIndex) -> TimeSlice {
        let key = mix64(self.key() ^ (n as u64).wrapping_add(1).wrapping_mul(0xd1b5_4a32_d192_ed03));
        TimeSlice { law: self.law, key }
    }

    /// `ω_{n,z}`.
    pub fn omega(&self, n: TimeIndex, z: LatticePoint) -> f64 {
        self.slice(n).omega(z.x1, z.x2)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TimeSlice {
    law: DisorderLaw,
    key: u64,
}

impl TimeSlice {
    #[inline(always)]
    pub fn bits(&self, x1: i64, x2: i64) -> u64 {
        let packed = ((x1 as u32 as u64) << 32) | (x2 as u32 as u64);
        mix64(self.key ^ packed)
    }

    #[inline(always)]
    pub fn omega(&self, x1: i64, x2: i64) -> f64 {
        let bits = self.bits(x1, x2);
        match self.law {
            DisorderLaw::Gaussian => inverse_normal_cdf(unit_open(bits)),
            DisorderLaw::Rademacher => {
                if bits >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Standard normal quantile (Wichura, algorithm AS 241, about 1e-16 relative).
#[inline]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r + 6.726_577_092_700_87e4) * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_4e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_6;
        let den = ((((((5.226_495_278_852_854_6e3 * r + 2.872_908_573_572_194_3e4) * r + 3.930_789_580_009_271e4) * r
            + 2.121_379_430_158_659_6e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda(DisorderLaw::Gaussian, 1.0f64), 0.5);
        assert_eq!(lambda(DisorderLaw::Rademacher, 0.0f64), 0.0);
        let direct = ((1f64.exp() + (-1f64).exp()) / 2.0).ln();
        assert_relative_eq!(lambda(DisorderLaw::Rademacher, 1.0f64), direct, max_relative = 1e-15);
        assert_relative_eq!(direct, 0.4337808305, max_relative = 1e-9);
        assert!(lambda(DisorderLaw::Rademacher, 800.0f64).is_finite());
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(DisorderLaw::Gaussian, 0.0f64), 0.0);
        assert_relative_eq!(sigma(DisorderLaw::Gaussian, 1.0f64), (1f64.exp() - 1.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(sigma(DisorderLaw::Gaussian, 1.0f64), 1.3108324945, max_relative = 1e-9);
        for law in [DisorderLaw::Gaussian, DisorderLaw::Rademacher] {
            let ratio = sigma(law, 1e-3f64) / 1e-3;
            assert!((ratio - 1.0).abs() < 1e-3, "{law:?}: {ratio}");
        }
    }

    #[test]
    fn coupling_examples() {
        let c = make_coupling(DisorderLaw::Gaussian, 0.5f64, 1).unwrap();
        assert_relative_eq!(c.beta, 1.0, max_relative = 1e-14);
        assert!(make_coupling(DisorderLaw::Gaussian, 1.2f64, 64).is_err());
        assert!(make_coupling(DisorderLaw::Gaussian, 0.0f64, 64).is_err());
        assert!(make_coupling(DisorderLaw::Gaussian, 0.5f64, 0).is_err());

        let tiny = make_coupling(DisorderLaw::Gaussian, 1e-9f64, 64).unwrap();
        assert!(tiny.beta < 1e-8 && tiny.sigma < 1e-8);

        let mut prev = f64::INFINITY;
        for p in 6..=14 {
            let c = make_coupling(DisorderLaw::Rademacher, 0.5f64, 1 << p).unwrap();
            assert!(c.beta < prev);
            prev = c.beta;
            assert_relative_eq!(c.sigma_sq(), (c.lambda2 - 2.0 * c.lambda1).exp() - 1.0, max_relative = 1e-12);
            assert_relative_eq!(c.beta, 0.5 / c.overlap.sqrt(), max_relative = 1e-14);
        }
        let ratios: Vec<f64> = [6, 10, 14]
            .iter()
            .map(|&p| {
                let c = make_coupling(DisorderLaw::Gaussian, 0.7f64, 1 << p).unwrap();
                c.sigma / c.beta - 1.0
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn inverse_cdf_accuracy() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut worst = 0.0f64;
        let probes = (1..100_000).map(|i| i as f64 / 100_000.0).chain([1e-300, 1e-100, 1e-20, 1e-12, 1e-8, 0.4, 0.425, 0.575, 1.0 - 1e-12]);
        for p in probes {
            let x = inverse_normal_cdf(p);
            worst = worst.max((normal.cdf(x) - p).abs());
            if p >= 1e-6 {
                assert_relative_eq!(inverse_normal_cdf(1.0 - p), -x, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
        assert!(worst < 1e-9, "worst CDF error {worst}");
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert_eq!(inverse_normal_cdf(1.0), f64::INFINITY);
    }

    #[test]
    fn omega_is_pure_and_replicas_decorrelate() {
        let env = EnvironmentSpec::new(DisorderLaw::Gaussian, 7, 0);
        let other = EnvironmentSpec::new(DisorderLaw::Gaussian, 7, 1);
        let z = LatticePoint::new(3, -5);
        assert_eq!(env.omega(12, z).to_bits(), env.omega(12, z).to_bits());
        assert_ne!(env.omega(12, z), other.omega(12, z));

        let n = 100_000;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let t = 1 + i / 400;
            let z = LatticePoint::new((i % 400) as i64 - 200, (i % 7) as i64);
            let (x, y) = (env.omega(t, z), other.omega(t, z));
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx / nf * sy / nf;
        let rho = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!(rho.abs() < 0.01, "rho = {rho}");
    }

    fn moments(law: DisorderLaw) {
        let env = EnvironmentSpec::new(law, 2024, 3);
        let n = 1_000_000usize;
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let w = env.omega(1 + i / 1000, LatticePoint::new((i % 1000) as i64 - 500, (i % 13) as i64 - 6));
            s1 += w;
            s2 += w * w;
            s4 += w.powi(4);
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let m2 = s2 / nf;
        assert!(mean.abs() < 4.0 * (m2 / nf).sqrt(), "{law:?} mean {mean}");
        let var_se = ((s4 / nf - m2 * m2) / nf).sqrt().max(1e-12);
        if law == DisorderLaw::Rademacher {
            assert_eq!(m2, 1.0);
        } else {
            assert!((m2 - 1.0).abs() < 4.0 * var_se, "{law:?} second moment {m2}");
        }
    }

    #[test]
    fn omega_moments_gaussian() {
        moments(DisorderLaw::Gaussian);
    }

    #[test]
    fn omega_moments_rademacher() {
        moments(DisorderLaw::Rademacher);
    }

    #[test]
    fn eta_is_centred_with_unit_variance() {
        for law in [DisorderLaw::Gaussian, DisorderLaw::Rademacher] {
            let c = make_coupling(law, 0.5f64, 256).unwrap();
            let env = EnvironmentSpec::new(law, 99, 0);
            let n = 1_000_000usize;
            let (mut e1, mut e2, mut e4, mut w1, mut w2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let om = env.omega(1 + i / 2000, LatticePoint::new((i % 2000) as i64, 0));
                let eta = c.eta(om);
                let w = c.weight(om);
                e1 += eta;
                e2 += eta * eta;
                e4 += eta.powi(4);
                w1 += w;
                w2 += w * w;
            }
            let nf = n as f64;
            let m1 = e1 / nf;
            let m2 = e2 / nf;
            let var = m2 - m1 * m1;
            assert!(m1.abs() < 4.0 * (var / nf).sqrt(), "{law:?} eta mean {m1}");
            let var_se = ((e4 / nf - m2 * m2).max(0.0) / nf).sqrt();
            assert!((var - 1.0).abs() < 4.0 * var_se + 10.0 / nf, "{law:?} eta var {var}");
            let wm = w1 / nf;
            let wse = ((w2 / nf - wm * wm) / nf).sqrt();
            assert!((wm - 1.0).abs() < 4.0 * wse, "{law:?} weight mean {wm}");
        }
    }
}
