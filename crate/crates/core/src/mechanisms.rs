// SPDX-License-Identifier: Apache-2.0

//! Differentially private noise.
//!
//! The production mechanism is the two-sided geometric (discrete Laplace)
//! distribution `f(k) = (1-α)/(1+α) · α^|k|`, `α = exp(-ε/Δ)`, sampled as the
//! difference of two one-sided geometrics. The default sampler runs exact
//! Bernoulli(α) trials by comparing fresh 64-bit words against the integer
//! threshold `⌊α·2^64⌋`, so no floating-point arithmetic touches the random
//! words. The threshold's rounding biases each trial by at most 2^-64.
//!
//! Word consumption is pinned: a geometric draw of value `g` consumes `g + 1`
//! words (one per trial), and a cell consumes its first geometric's words,
//! then its second's.
//!
//! The continuous Laplace sampler is floating-point inverse-CDF sampling of
//! the kind with known precision leaks. It exists for demonstrations only and
//! refuses to run without an explicit opt-in.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::bitgen::{BitgenError, GeneratorHandle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("{0}")]
    InvalidParams(String),
    #[error("insecure mechanism refused without the explicit insecure-demo flag")]
    InsecureUseRefused,
    #[error(transparent)]
    Generator(#[from] BitgenError),
}

/// Privacy-loss budget and L1 sensitivity. `alpha` is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismParams {
    epsilon: f64,
    sensitivity: f64,
}

impl MechanismParams {
    pub fn new(epsilon: f64, sensitivity: f64) -> Result<Self, MechanismError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(MechanismError::InvalidParams("epsilon must be positive".into()));
        }
        if !(sensitivity.is_finite() && sensitivity > 0.0) {
            return Err(MechanismError::InvalidParams(
                "sensitivity must be positive".into(),
            ));
        }
        let alpha = (-epsilon / sensitivity).exp();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MechanismError::InvalidParams(format!(
                "epsilon/sensitivity = {} puts alpha outside (0, 1)",
                epsilon / sensitivity
            )));
        }
        Ok(MechanismParams {
            epsilon,
            sensitivity,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// `exp(-ε/Δ)`.
    pub fn alpha(&self) -> f64 {
        (-self.epsilon / self.sensitivity).exp()
    }

    /// Laplace scale `Δ/ε`.
    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    /// `⌊α·2^64⌋`, evaluated in 192-bit fixed point from the exact values of
    /// ε and Δ.
    pub fn bernoulli_threshold(&self) -> u64 {
        bernoulli_threshold(self.epsilon, self.sensitivity)
    }
}

const FRAC_BITS: u64 = 192;

fn f64_parts(x: f64) -> (BigUint, i64) {
    // x = mantissa · 2^exp, exactly.
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        (BigUint::from(frac), -1074)
    } else {
        (BigUint::from(frac | (1u64 << 52)), exp_bits - 1075)
    }
}

fn shift(v: BigUint, by: i64) -> BigUint {
    if by >= 0 {
        v << (by as u64)
    } else {
        v >> ((-by) as u64)
    }
}

// exp(-x) for x in [0, 1], fixed point with FRAC_BITS fractional bits.
fn exp_neg_fraction(x: &BigUint) -> BigUint {
    let one = BigUint::one() << FRAC_BITS;
    let mut sum = BigInt::from(one.clone());
    let mut term = one;
    let mut k = 1u64;
    loop {
        term = ((term * x) >> FRAC_BITS) / k;
        if term.is_zero() {
            break;
        }
        let signed = BigInt::from_biguint(Sign::Plus, term.clone());
        if k % 2 == 1 {
            sum -= signed;
        } else {
            sum += signed;
        }
        k += 1;
    }
    sum.to_biguint().expect("exp(-x) is positive")
}

fn bernoulli_threshold(epsilon: f64, sensitivity: f64) -> u64 {
    let (me, ee) = f64_parts(epsilon);
    let (md, ed) = f64_parts(sensitivity);
    // x = ε/Δ in fixed point.
    let x = shift(me, ee - ed + FRAC_BITS as i64) / md;
    let whole = (&x >> FRAC_BITS).to_u64().unwrap_or(u64::MAX);
    // α < 2^-64 once x > 64·ln 2 ≈ 44.4.
    if whole >= 45 {
        return 0;
    }
    let frac = &x - (BigUint::from(whole) << FRAC_BITS);

    let mut result = exp_neg_fraction(&frac);
    let inv_e = exp_neg_fraction(&(BigUint::one() << FRAC_BITS));
    for _ in 0..whole {
        result = (result * &inv_e) >> FRAC_BITS;
    }
    (result >> (FRAC_BITS - 64)).to_u64().unwrap_or(u64::MAX)
}

/// `f(k) = (1-α)/(1+α) · α^|k|`.
pub fn two_sided_geometric_pmf(alpha: f64, k: i64) -> f64 {
    (1.0 - alpha) / (1.0 + alpha) * alpha.powi(k.unsigned_abs() as i32)
}

/// Closed form of `Σ_{|k| ≤ K} f(k) = 1 - 2α^{K+1}/(1+α)`.
pub fn two_sided_geometric_mass(alpha: f64, k_max: u32) -> f64 {
    1.0 - 2.0 * alpha.powi(k_max as i32 + 1) / (1.0 + alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricSampler {
    /// Integer-threshold Bernoulli trials.
    #[default]
    ExactBernoulli,
    /// `⌊ln(U)/ln(α)⌋` on a 53-bit uniform: one word per geometric, but the
    /// floating-point path carries the usual precision caveats and is not
    /// exact. Use only where speed matters more than exactness.
    InverseCdfFast,
}

/// Prepared two-sided geometric sampler.
#[derive(Debug, Clone, Copy)]
pub struct TwoSidedGeometric {
    params: MechanismParams,
    sampler: GeometricSampler,
    threshold: u64,
    ln_alpha: f64,
}

impl TwoSidedGeometric {
    pub fn new(params: MechanismParams) -> Self {
        Self::with_sampler(params, GeometricSampler::ExactBernoulli)
    }

    pub fn with_sampler(params: MechanismParams, sampler: GeometricSampler) -> Self {
        TwoSidedGeometric {
            params,
            sampler,
            threshold: params.bernoulli_threshold(),
            ln_alpha: -params.epsilon / params.sensitivity,
        }
    }

    pub fn params(&self) -> &MechanismParams {
        &self.params
    }

    pub fn sampler(&self) -> GeometricSampler {
        self.sampler
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// One-sided geometric on `{0, 1, ...}` with `P(g) = α^g (1-α)`.
    pub fn sample_one_sided(&self, g: &mut GeneratorHandle) -> Result<u64, BitgenError> {
        match self.sampler {
            GeometricSampler::ExactBernoulli => {
                let mut count = 0u64;
                while g.next_u64()? < self.threshold {
                    count += 1;
                }
                Ok(count)
            }
            GeometricSampler::InverseCdfFast => {
                let u = 1.0 - g.next_double53()?;
                Ok((u.ln() / self.ln_alpha).floor() as u64)
            }
        }
    }

    pub fn sample(&self, g: &mut GeneratorHandle) -> Result<i64, BitgenError> {
        let a = self.sample_one_sided(g)?;
        let b = self.sample_one_sided(g)?;
        Ok(a as i64 - b as i64)
    }
}

/// One two-sided geometric variate using the exact sampler.
pub fn two_sided_geometric(
    params: &MechanismParams,
    g: &mut GeneratorHandle,
) -> Result<i64, MechanismError> {
    Ok(TwoSidedGeometric::new(*params).sample(g)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NoiseValue {
    Integer(i64),
    Real(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    Geometric,
    LaplaceInsecure,
}

/// A protected value before any post-processing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyMeasurement {
    pub value: NoiseValue,
    pub mechanism: MechanismKind,
    pub params: MechanismParams,
    /// Set on outputs of the floating-point demo mechanism.
    pub insecure: bool,
}

/// Adds two-sided geometric noise to each count, in array order.
pub fn geometric_mechanism(
    true_counts: &[i64],
    params: &MechanismParams,
    g: &mut GeneratorHandle,
) -> Result<Vec<NoisyMeasurement>, MechanismError> {
    geometric_mechanism_with(true_counts, &TwoSidedGeometric::new(*params), g)
}

pub fn geometric_mechanism_with(
    true_counts: &[i64],
    sampler: &TwoSidedGeometric,
    g: &mut GeneratorHandle,
) -> Result<Vec<NoisyMeasurement>, MechanismError> {
    true_counts
        .iter()
        .map(|&c| {
            let noise = sampler.sample(g)?;
            Ok(NoisyMeasurement {
                value: NoiseValue::Integer(c.saturating_add(noise)),
                mechanism: MechanismKind::Geometric,
                params: sampler.params,
                insecure: false,
            })
        })
        .collect()
}

/// Centered inverse CDF: `-b · sgn(u - ½) · ln(1 - 2|u - ½|)`.
pub fn laplace_noise_from_uniform(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    let magnitude = -(1.0 - 2.0 * centered.abs()).ln();
    if centered < 0.0 {
        -scale * magnitude
    } else {
        scale * magnitude
    }
}

/// Continuous Laplace noise in floating point. Demonstration only: requires
/// `allow_insecure`, and every output is marked insecure.
pub fn laplace_mechanism_insecure(
    true_values: &[f64],
    params: &MechanismParams,
    g: &mut GeneratorHandle,
    allow_insecure: bool,
) -> Result<Vec<NoisyMeasurement>, MechanismError> {
    if !allow_insecure {
        return Err(MechanismError::InsecureUseRefused);
    }
    let scale = params.scale();
    true_values
        .iter()
        .map(|&x| {
            // u = 0 maps to an infinite draw; redraw (probability 2^-53).
            let u = loop {
                let u = g.next_double53()?;
                if u != 0.0 {
                    break u;
                }
            };
            Ok(NoisyMeasurement {
                value: NoiseValue::Real(x + laplace_noise_from_uniform(u, scale)),
                mechanism: MechanismKind::LaplaceInsecure,
                params: *params,
                insecure: true,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drbg::DrbgConfig;

    fn drbg(seed: u8) -> GeneratorHandle {
        GeneratorHandle::drbg_from_seed(&[seed; 48], DrbgConfig::default()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert_eq!(
            MechanismParams::new(0.0, 1.0).unwrap_err(),
            MechanismError::InvalidParams("epsilon must be positive".into())
        );
        assert!(MechanismParams::new(-1.0, 1.0).is_err());
        assert!(MechanismParams::new(1.0, 0.0).is_err());
        assert!(MechanismParams::new(f64::NAN, 1.0).is_err());
        assert!(MechanismParams::new(1000.0, 1.0).is_err());
        let p = MechanismParams::new(2.0f64.ln(), 1.0).unwrap();
        assert!((p.alpha() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pmf_closed_form_at_half() {
        assert!((two_sided_geometric_pmf(0.5, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((two_sided_geometric_pmf(0.5, 1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((two_sided_geometric_pmf(0.5, -1) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_matches_double_precision_estimate() {
        for (eps, delta) in [(0.1, 1.0), (2f64.ln(), 1.0), (1.0, 3.0), (10.0, 1.0), (40.0, 1.0)] {
            let p = MechanismParams::new(eps, delta).unwrap();
            let t = p.bernoulli_threshold() as f64;
            let approx = p.alpha() * 2f64.powi(64);
            assert!(
                (t - approx).abs() <= approx * 1e-14 + 1.0,
                "eps={eps}: {t} vs {approx}"
            );
        }
    }

    #[test]
    fn threshold_for_ln2_is_half_of_word_range() {
        let p = MechanismParams::new(2f64.ln(), 1.0).unwrap();
        let t = p.bernoulli_threshold();
        // ln 2 rounded to a double is within 2^-53 of ln 2.
        assert!(t.abs_diff(1u64 << 63) < 1 << 12, "{t:#x}");
    }

    #[test]
    fn tiny_alpha_has_zero_threshold() {
        let p = MechanismParams::new(50.0, 1.0).unwrap();
        assert_eq!(p.bernoulli_threshold(), 0);
    }

    #[test]
    fn large_epsilon_is_noiseless() {
        let p = MechanismParams::new(50.0, 1.0).unwrap();
        let mut g = drbg(1);
        for _ in 0..10_000 {
            assert_eq!(two_sided_geometric(&p, &mut g).unwrap(), 0);
        }
        let counts = [5, 0, 17, -3];
        let out = geometric_mechanism(&counts, &p, &mut g).unwrap();
        let vals: Vec<_> = out.iter().map(|m| m.value).collect();
        assert_eq!(
            vals,
            counts.iter().map(|&c| NoiseValue::Integer(c)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn exact_sampler_word_consumption() {
        // A draw of value g costs g + 1 words of 64 bits.
        let p = MechanismParams::new(0.5, 1.0).unwrap();
        let s = TwoSidedGeometric::new(p);
        let mut g = drbg(2);
        for _ in 0..1000 {
            let before = g.words_emitted();
            let v = s.sample_one_sided(&mut g).unwrap();
            assert_eq!(g.words_emitted() - before, 2 * (v + 1));
        }
    }

    #[test]
    fn zero_counts_reveal_noise_in_draw_order() {
        let p = MechanismParams::new(1.0, 1.0).unwrap();
        let out = geometric_mechanism(&[0; 313], &p, &mut drbg(3)).unwrap();
        let mut g = drbg(3);
        for m in &out {
            assert_eq!(
                m.value,
                NoiseValue::Integer(two_sided_geometric(&p, &mut g).unwrap())
            );
            assert_eq!(m.mechanism, MechanismKind::Geometric);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = MechanismParams::new(0.25, 2.0).unwrap();
        let counts: Vec<i64> = (0..500).collect();
        assert_eq!(
            geometric_mechanism(&counts, &p, &mut drbg(4)).unwrap(),
            geometric_mechanism(&counts, &p, &mut drbg(4)).unwrap()
        );
    }

    #[test]
    fn inverse_cdf_uses_one_word_per_geometric() {
        let p = MechanismParams::new(0.5, 1.0).unwrap();
        let s = TwoSidedGeometric::with_sampler(p, GeometricSampler::InverseCdfFast);
        let mut g = drbg(5);
        s.sample(&mut g).unwrap();
        assert_eq!(g.words_emitted(), 4);
    }

    #[test]
    fn laplace_gating_and_median() {
        let p = MechanismParams::new(1.0, 1.0).unwrap();
        assert_eq!(
            laplace_mechanism_insecure(&[0.0], &p, &mut drbg(6), false).unwrap_err(),
            MechanismError::InsecureUseRefused
        );
        assert_eq!(laplace_noise_from_uniform(0.5, 3.0), 0.0);
        let out = laplace_mechanism_insecure(&[1.0, 2.0], &p, &mut drbg(6), true).unwrap();
        assert!(out.iter().all(|m| m.insecure && m.mechanism == MechanismKind::LaplaceInsecure));
    }

    #[test]
    fn laplace_inverse_cdf_is_monotone_and_symmetric() {
        let b = 2.0;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            let x = laplace_noise_from_uniform(u, b);
            assert!(x >= prev);
            prev = x;
            let mirrored = laplace_noise_from_uniform(1.0 - u, b);
            assert!((x + mirrored).abs() < 1e-9);
        }
    }
}
