//! Seed plumbing and basic statistics.
//!
//! Monte Carlo code in this crate never shares RNG state across trials.
//! Each trial (and each lazily sampled object such as a lattice edge) gets its
//! randomness from an explicit address: either a [`RngStream`] derived from
//! `(master_seed, stream_id)`, or a stateless [`fold`] hash of the address
//! parts. Both are pure functions of their inputs, which is what makes results
//! independent of thread scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::{Error, Result};

/// SplitMix64 finalizer. Good avalanche, cheap, and stable across platforms.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a list of address parts into one 64-bit key.
///
/// Used to give every lazily sampled object (edge, site, cell, particle) its
/// own deterministic coin, without materializing anything.
#[inline]
pub fn fold(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x243F_6A88_85A3_08D3; // pi digits, arbitrary nonzero start
    for &p in parts {
        acc = mix64(acc ^ p);
    }
    acc
}

/// Map 64 random bits to a double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Distribution selector for [`RngStream::sample`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Bernoulli(f64),
    Uniform01,
    /// Rate parameter (mean `1/rate`).
    Exponential(f64),
    /// Mean and *variance*.
    Gaussian(f64, f64),
    Poisson(f64),
}

/// A seekable random stream: a pure function of `(master_seed, stream_id)`.
///
/// Streams with distinct ids are independent for all practical purposes
/// (ChaCha8 with the id as the cipher stream counter), so trial `i` of
/// experiment `j` can be addressed directly without draining any shared
/// generator.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn derive(master_seed: u64, stream_id: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RngStream { master_seed, stream_id, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream addressed by `salt`, again a pure function of
    /// `(master_seed, stream_id, salt)`. Independent of how much of `self`
    /// has been consumed.
    pub fn substream(&self, salt: &[u64]) -> RngStream {
        let mut parts = Vec::with_capacity(salt.len() + 2);
        parts.push(self.master_seed);
        parts.push(self.stream_id);
        parts.extend_from_slice(salt);
        let seed = fold(&parts);
        let id = fold(&[seed, 0x5375_4253_5452_4541]); // "SUBSTREA"
        RngStream::derive(seed, id)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("bernoulli p={p} outside [0,1]")));
        }
        Ok(self.uniform01() < p)
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("exponential rate={rate} must be finite and > 0")));
        }
        let d = rand_distr::Exp::new(rate)
            .map_err(|e| Error::invalid(format!("exponential rate={rate}: {e}")))?;
        Ok(d.sample(&mut self.rng))
    }

    pub fn gaussian(&mut self, mean: f64, var: f64) -> Result<f64> {
        if !(var >= 0.0) || !var.is_finite() || !mean.is_finite() {
            return Err(Error::invalid(format!("gaussian mean={mean} var={var} invalid")));
        }
        let d = rand_distr::Normal::new(mean, var.sqrt())
            .map_err(|e| Error::invalid(format!("gaussian: {e}")))?;
        Ok(d.sample(&mut self.rng))
    }

    pub fn std_gaussian(&mut self) -> f64 {
        rand_distr::StandardNormal.sample(&mut self.rng)
    }

    pub fn poisson(&mut self, mean: f64) -> Result<u64> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::invalid(format!("poisson mean={mean} must be finite and >= 0")));
        }
        if mean == 0.0 {
            return Ok(0);
        }
        let d = rand_distr::Poisson::new(mean)
            .map_err(|e| Error::invalid(format!("poisson mean={mean}: {e}")))?;
        Ok(d.sample(&mut self.rng) as u64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        // Rejection to avoid modulo bias.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    pub fn sample(&mut self, law: Law) -> Result<f64> {
        match law {
            Law::Bernoulli(p) => Ok(if self.bernoulli(p)? { 1.0 } else { 0.0 }),
            Law::Uniform01 => Ok(self.uniform01()),
            Law::Exponential(rate) => self.exponential(rate),
            Law::Gaussian(mean, var) => self.gaussian(mean, var),
            Law::Poisson(mean) => Ok(self.poisson(mean)? as f64),
        }
    }
}

/// A binomial point estimate with a Wilson score interval.
///
/// Wilson rather than the Wald interval: it behaves sensibly for estimates at
/// or near 0 and 1, which happens all the time in escape/survival sweeps.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EstimateCI {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub successes: u64,
    pub trials: u64,
    pub confidence: f64,
}

impl EstimateCI {
    /// Half-width standard-error proxy used for quick "within k SE" checks.
    pub fn se(&self) -> f64 {
        let n = self.trials as f64;
        (self.point * (1.0 - self.point) / n).sqrt().max(1.0 / n)
    }

    pub fn overlaps(&self, other: &EstimateCI) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Wilson score interval for `successes / trials` at the given confidence.
pub fn estimate_proportion(successes: u64, trials: u64, confidence: f64) -> Result<EstimateCI> {
    if trials == 0 {
        return Err(Error::invalid("estimate_proportion: trials = 0"));
    }
    if successes > trials {
        return Err(Error::invalid(format!(
            "estimate_proportion: successes {successes} > trials {trials}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!("confidence {confidence} outside (0,1)")));
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z = inverse_normal_cdf(0.5 + confidence / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // At phat = 0 or 1 the exact bound coincides with phat; rounding in
    // center/half can push it past, so force the interval to contain phat.
    Ok(EstimateCI {
        point: phat,
        lo: (center - half).max(0.0).min(phat),
        hi: (center + half).min(1.0).max(phat),
        successes,
        trials,
        confidence,
    })
}

/// Quantile function of the standard normal distribution (Wichura's AS 241,
/// double-precision branch). Relative error around 1e-15 over (0,1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "inverse_normal_cdf domain is (0,1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_1e4)
            * r
            + 1.373_169_376_550_946_1e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_608;
        let den = ((((((5.226_495_278_852_545_6e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
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
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}
