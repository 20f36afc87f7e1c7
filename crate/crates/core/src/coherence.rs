//! Dephasing of a driven two-level transition under classical phase
//! noise, in the filter-function picture:
//!
//!   chi(t) = (1/pi) * integral S(omega) F(omega) / omega^2 domega,
//!   W(t) = exp(-chi),
//!
//! with S the noise power spectral density over angular frequency and F
//! the sequence filter |omega yhat(omega)|^2 / 2 of the +-1 toggling
//! function. Free evolution gives F = 2 sin^2(wt/2), Hahn echo
//! F = 8 sin^4(wt/4), and CPMG-N concentrates F near N pi / t.
//!
//! Consistency pin: for white noise S = S0 the integral evaluates to
//! chi = S0 t / 2 for every pulse number (Parseval), which the tests
//! check against the quadrature.
//!
//! Also here: the clock-transition model for the field dependence of the
//! Hahn echo rate, and the two-channel spin-lattice T1 law
//! 1/T1 = A T + B T^7.

use num_complex::Complex64;

use crate::spinham::constants::GAMMA_EL_HZ_PER_T;
use crate::{CoreError, Result};

/// Power-law noise spectrum S(omega) = amplitude * omega^-exponent on
/// angular frequency, optionally truncated outside [low_cutoff,
/// high_cutoff] (rad/s).
#[derive(Clone, Copy, Debug)]
pub struct NoisePsd {
    pub amplitude: f64,
    pub exponent: f64,
    pub low_cutoff: Option<f64>,
    pub high_cutoff: Option<f64>,
}

impl NoisePsd {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(CoreError::invalid("NoisePsd: amplitude must be >= 0"));
        }
        if !(self.exponent.is_finite() && (0.0..=2.0).contains(&self.exponent)) {
            return Err(CoreError::invalid(
                "NoisePsd: exponent must lie in [0, 2]",
            ));
        }
        if let (Some(lo), Some(hi)) = (self.low_cutoff, self.high_cutoff) {
            if !(lo > 0.0 && hi > lo) {
                return Err(CoreError::invalid(
                    "NoisePsd: cutoffs must satisfy 0 < low < high",
                ));
            }
        }
        if let Some(lo) = self.low_cutoff {
            if !(lo.is_finite() && lo > 0.0) {
                return Err(CoreError::invalid("NoisePsd: low_cutoff must be > 0"));
            }
        }
        if let Some(hi) = self.high_cutoff {
            if !(hi.is_finite() && hi > 0.0) {
                return Err(CoreError::invalid("NoisePsd: high_cutoff must be > 0"));
            }
        }
        Ok(())
    }

    pub fn value(&self, omega: f64) -> f64 {
        if let Some(lo) = self.low_cutoff {
            if omega < lo {
                return 0.0;
            }
        }
        if let Some(hi) = self.high_cutoff {
            if omega > hi {
                return 0.0;
            }
        }
        self.amplitude * omega.powf(-self.exponent)
    }
}

/// A CPMG-style sequence: `n_pulses` ideal pi pulses at
/// t_k = t (2k-1) / (2N) across total evolution time `total_time`.
/// `n_pulses = 0` is free evolution, 1 is a Hahn echo.
#[derive(Clone, Copy, Debug)]
pub struct CpmgSpec {
    pub n_pulses: usize,
    pub total_time: f64,
}

impl CpmgSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(CoreError::invalid("CpmgSpec: total_time must be > 0"));
        }
        Ok(())
    }

    pub fn pulse_times(&self) -> Vec<f64> {
        (1..=self.n_pulses)
            .map(|k| self.total_time * (2.0 * k as f64 - 1.0) / (2.0 * self.n_pulses as f64))
            .collect()
    }
}

/// i w yhat(w) = -1 + (-1)^N e^{iwt} + 2 sum_m (-1)^{m+1} e^{iw t_m};
/// the pulse sum is a geometric series with ratio -e^{iwt/N}, evaluated
/// in closed form away from its removable singularity.
fn modulation(spec: &CpmgSpec, omega: f64) -> Complex64 {
    let n = spec.n_pulses;
    let t = spec.total_time;
    let end_sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut acc = Complex64::new(-1.0, 0.0) + end_sign * Complex64::from_polar(1.0, omega * t);
    if n == 0 {
        return acc;
    }
    let ratio = -Complex64::from_polar(1.0, omega * t / n as f64);
    let first = Complex64::from_polar(1.0, omega * t / (2.0 * n as f64));
    let denom = Complex64::new(1.0, 0.0) - ratio;
    if denom.norm() > 1e-8 {
        let num = Complex64::new(1.0, 0.0) - ratio.powu(n as u32);
        acc += 2.0 * first * num / denom;
    } else {
        // w t / N near an odd multiple of pi: sum the few terms directly.
        let mut s = Complex64::new(0.0, 0.0);
        let mut term = first;
        for _ in 0..n {
            s += term;
            term *= ratio;
        }
        acc += 2.0 * s;
    }
    acc
}

/// Filter function F(omega) = |i omega yhat|^2 / 2 of the sequence.
pub fn filter_function(spec: &CpmgSpec, omega: f64) -> f64 {
    modulation(spec, omega).norm_sqr() / 2.0
}

/// Quadrature controls for the dephasing integral.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureOpts {
    pub points_per_decade: usize,
}

impl Default for QuadratureOpts {
    fn default() -> Self {
        QuadratureOpts {
            points_per_decade: 2000,
        }
    }
}

/// Dephasing exponent chi(t) by log-spaced trapezoid quadrature.
///
/// Integration runs between the PSD cutoffs when given; the defaults are
/// 1e-3/t and 1e3*max(N,1)/t, which scale with the sequence so that
/// power-law noise yields chi proportional to a*t^(1+exponent) exactly.
/// A PSD with exponent >= 1 and no explicit low cutoff is rejected: its
/// free-evolution integral diverges at omega -> 0 and the result would
/// silently depend on the default cutoff.
pub fn cpmg_chi(psd: &NoisePsd, spec: &CpmgSpec, quad: &QuadratureOpts) -> Result<f64> {
    psd.validate()?;
    spec.validate()?;
    if quad.points_per_decade < 10 {
        return Err(CoreError::invalid(
            "QuadratureOpts: need >= 10 points per decade",
        ));
    }
    if psd.exponent >= 1.0 && psd.low_cutoff.is_none() {
        return Err(CoreError::invalid(
            "cpmg_chi: PSD exponent >= 1 requires an explicit low_cutoff \
             (infrared contribution is divergent)",
        ));
    }
    let t = spec.total_time;
    let lo = psd.low_cutoff.unwrap_or(1e-3 / t);
    let hi = psd
        .high_cutoff
        .unwrap_or(1e3 * (spec.n_pulses.max(1) as f64) / t);
    if hi <= lo {
        return Err(CoreError::invalid("cpmg_chi: cutoff range is empty"));
    }

    let decades = (hi / lo).log10();
    let n = ((quad.points_per_decade as f64 * decades).ceil() as usize).max(2);
    let dl = (hi / lo).ln() / n as f64;

    // Trapezoid on x = ln(omega): integrand f(w) * w dx.
    let eval = |k: usize| -> f64 {
        let w = lo * (dl * k as f64).exp();
        psd.value(w) * filter_function(spec, w) / (w * w) * w
    };
    let mut acc = 0.5 * (eval(0) + eval(n));
    for k in 1..n {
        acc += eval(k);
    }
    let chi = acc * dl / std::f64::consts::PI;
    if !chi.is_finite() {
        return Err(CoreError::numerical("cpmg_chi: integral did not stay finite"));
    }
    Ok(chi)
}

/// Coherence W = exp(-chi).
pub fn cpmg_coherence(psd: &NoisePsd, spec: &CpmgSpec, quad: &QuadratureOpts) -> Result<f64> {
    Ok((-cpmg_chi(psd, spec, quad)?).exp())
}

/// T2 of the sequence: the total time where chi = 1 (W = 1/e), found by
/// bracketing and bisection to a relative tolerance of 1e-6.
pub fn solve_t2(psd: &NoisePsd, n_pulses: usize, quad: &QuadratureOpts) -> Result<f64> {
    if psd.amplitude <= 0.0 {
        return Err(CoreError::invalid("solve_t2: amplitude must be > 0"));
    }
    let chi_at = |t: f64| -> Result<f64> {
        cpmg_chi(
            psd,
            &CpmgSpec {
                n_pulses,
                total_time: t,
            },
            quad,
        )
    };
    let mut lo = 1e-6;
    let mut hi = 1e-6;
    let mut guard = 0;
    while chi_at(hi)? < 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(CoreError::numerical(
                "solve_t2: chi never reaches 1 (amplitude too small?)",
            ));
        }
    }
    guard = 0;
    while chi_at(lo)? >= 1.0 {
        lo /= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(CoreError::numerical(
                "solve_t2: chi exceeds 1 at vanishing time (amplitude too large?)",
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_at(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-6 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Invert the observed T2(N) ~ N^e scaling into the PSD exponent:
/// T2 scaling with CPMG order obeys e = gamma/(gamma+1), so
/// gamma = e/(1-e). Valid for e in (0, 1).
pub fn psd_exponent_from_scaling(scaling_exponent: f64) -> Result<f64> {
    if !(scaling_exponent.is_finite() && 0.0 < scaling_exponent && scaling_exponent < 1.0) {
        return Err(CoreError::invalid(
            "psd_exponent_from_scaling: scaling exponent must lie in (0, 1)",
        ));
    }
    Ok(scaling_exponent / (1.0 - scaling_exponent))
}

/// Effective gyromagnetic ratio of the clock-like transition at a small
/// field along z: the zero-field splitting quenches the linear Zeeman
/// shift, giving gamma_eff = gamma_el * b_z / sqrt((e/gamma_el)^2 + b_z^2)
/// — zero at zero field, recovering gamma_el when b_z dominates.
pub fn clock_gamma_eff(b_z: f64, e_hz: f64) -> Result<f64> {
    if !(b_z.is_finite() && b_z >= 0.0) {
        return Err(CoreError::invalid("clock_gamma_eff: field must be >= 0"));
    }
    if !(e_hz.is_finite() && e_hz > 0.0) {
        return Err(CoreError::invalid("clock_gamma_eff: e must be > 0"));
    }
    let b_e = e_hz / GAMMA_EL_HZ_PER_T; // field equivalent of the e splitting
    Ok(GAMMA_EL_HZ_PER_T * b_z / (b_e * b_e + b_z * b_z).sqrt())
}

/// Hahn-echo decoherence rate vs field: a field-independent baseline plus
/// magnetic noise converted through the effective gyromagnetic ratio.
/// `noise_scale` carries units of Tesla (an RMS field-noise equivalent),
/// making the product a rate.
#[derive(Clone, Copy, Debug)]
pub struct ClockModel {
    pub e_hz: f64,
    /// 1/s at b_z = 0.
    pub baseline_rate: f64,
    /// Tesla; multiplies gamma_eff (Hz/T) to a rate contribution.
    pub noise_scale: f64,
}

impl ClockModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_hz.is_finite() && self.e_hz > 0.0) {
            return Err(CoreError::invalid("ClockModel: e must be > 0"));
        }
        if !(self.baseline_rate.is_finite() && self.baseline_rate > 0.0) {
            return Err(CoreError::invalid("ClockModel: baseline_rate must be > 0"));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(CoreError::invalid("ClockModel: noise_scale must be >= 0"));
        }
        Ok(())
    }

    /// Two-anchor construction: baseline from the zero-field T2, noise
    /// scale from a second (T2, field) point.
    pub fn from_anchors(t2_zero: f64, b_anchor: f64, t2_anchor: f64, e_hz: f64) -> Result<Self> {
        if !(t2_zero > 0.0 && t2_anchor > 0.0 && b_anchor > 0.0) {
            return Err(CoreError::invalid("ClockModel: anchors must be positive"));
        }
        let baseline = 1.0 / t2_zero;
        let gamma = clock_gamma_eff(b_anchor, e_hz)?;
        let noise_scale = (1.0 / t2_anchor - baseline) / gamma;
        if noise_scale < 0.0 {
            return Err(CoreError::invalid(
                "ClockModel: anchor T2 exceeds zero-field T2",
            ));
        }
        let m = ClockModel {
            e_hz,
            baseline_rate: baseline,
            noise_scale,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn hahn_rate(&self, b_z: f64) -> Result<f64> {
        Ok(self.baseline_rate + self.noise_scale * clock_gamma_eff(b_z, self.e_hz)?)
    }

    pub fn hahn_t2(&self, b_z: f64) -> Result<f64> {
        Ok(1.0 / self.hahn_rate(b_z)?)
    }
}

/// Two-channel spin-lattice relaxation: 1/T1 = a*T + b*T^7
/// (single-phonon direct process plus two-phonon Raman scattering).
pub fn t1_rate(temp: f64, a: f64, b: f64) -> Result<f64> {
    if !(temp.is_finite() && temp > 0.0) {
        return Err(CoreError::invalid("t1_rate: temperature must be > 0"));
    }
    if !(a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0) {
        return Err(CoreError::invalid("t1_rate: coefficients must be >= 0"));
    }
    if a == 0.0 && b == 0.0 {
        return Err(CoreError::invalid("t1_rate: both coefficients are zero"));
    }
    Ok(a * temp + b * temp.powi(7))
}

/// Temperature where the direct and Raman channels contribute equally:
/// a T = b T^7 at T = (a/b)^(1/6).
pub fn t1_crossover_temp(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(CoreError::invalid(
            "t1_crossover_temp: both coefficients must be > 0",
        ));
    }
    Ok((a / b).powf(1.0 / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn filter_closed_forms_free_and_hahn() {
        let t = 3.7e-6;
        for k in 1..40 {
            let w = 2.0e4 * k as f64 * 37.0; // spread over decades
            let free = CpmgSpec {
                n_pulses: 0,
                total_time: t,
            };
            assert_relative_eq!(
                filter_function(&free, w),
                2.0 * (w * t / 2.0).sin().powi(2),
                max_relative = 1e-10,
                epsilon = 1e-12
            );
            let hahn = CpmgSpec {
                n_pulses: 1,
                total_time: t,
            };
            assert_relative_eq!(
                filter_function(&hahn, w),
                8.0 * (w * t / 4.0).sin().powi(4),
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn geometric_series_matches_direct_pulse_sum() {
        // Same modulation via explicit pulse times.
        let direct = |spec: &CpmgSpec, w: f64| -> f64 {
            let sign = if spec.n_pulses % 2 == 0 { 1.0 } else { -1.0 };
            let mut acc =
                Complex64::new(-1.0, 0.0) + sign * Complex64::from_polar(1.0, w * spec.total_time);
            for (m, tm) in spec.pulse_times().iter().enumerate() {
                let s = if m % 2 == 0 { 2.0 } else { -2.0 };
                acc += s * Complex64::from_polar(1.0, w * tm);
            }
            acc.norm_sqr() / 2.0
        };
        for n in [2usize, 3, 8, 17, 64] {
            let spec = CpmgSpec {
                n_pulses: n,
                total_time: 1.3e-5,
            };
            for k in 1..60 {
                let w = 1.0e3 * (1.31f64).powi(k);
                assert_relative_eq!(
                    filter_function(&spec, w),
                    direct(&spec, w),
                    max_relative = 1e-9,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn filter_vanishes_at_zero_frequency() {
        for n in [0usize, 1, 2, 5, 16] {
            let spec = CpmgSpec {
                n_pulses: n,
                total_time: 1e-5,
            };
            assert!(filter_function(&spec, 1e-4).abs() < 1e-10);
        }
    }

    #[test]
    fn white_noise_chi_is_s0_t_over_2_for_all_sequences() {
        let s0 = 2.0e5;
        let t = 4.0e-6;
        let psd = NoisePsd {
            amplitude: s0,
            exponent: 0.0,
            low_cutoff: None,
            high_cutoff: None,
        };
        for n in [0usize, 1, 4, 16] {
            let spec = CpmgSpec {
                n_pulses: n,
                total_time: t,
            };
            let chi = cpmg_chi(&psd, &spec, &QuadratureOpts::default()).unwrap();
            let expect = s0 * t / 2.0;
            assert!(
                ((chi - expect) / expect).abs() < 0.01,
                "N = {n}: chi = {chi}, expected {expect}"
            );
        }
    }

    #[test]
    fn power_law_chi_scales_as_t_to_one_plus_gamma() {
        let psd = NoisePsd {
            amplitude: 3.0e3,
            exponent: 2.0 / 3.0,
            low_cutoff: None,
            high_cutoff: None,
        };
        let quad = QuadratureOpts::default();
        let spec1 = CpmgSpec {
            n_pulses: 4,
            total_time: 2e-6,
        };
        let spec2 = CpmgSpec {
            n_pulses: 4,
            total_time: 4e-6,
        };
        let chi1 = cpmg_chi(&psd, &spec1, &quad).unwrap();
        let chi2 = cpmg_chi(&psd, &spec2, &quad).unwrap();
        assert_relative_eq!(chi2 / chi1, 2f64.powf(5.0 / 3.0), max_relative = 1e-6);
    }

    #[test]
    fn solve_t2_inverts_chi() {
        let psd = NoisePsd {
            amplitude: 1.0e4,
            exponent: 2.0 / 3.0,
            low_cutoff: None,
            high_cutoff: None,
        };
        let quad = QuadratureOpts::default();
        let t2 = solve_t2(&psd, 2, &quad).unwrap();
        let chi = cpmg_chi(
            &psd,
            &CpmgSpec {
                n_pulses: 2,
                total_time: t2,
            },
            &quad,
        )
        .unwrap();
        assert_relative_eq!(chi, 1.0, max_relative = 1e-5);
    }

    #[test]
    fn t2_scaling_with_pulse_number_matches_exponent_law() {
        // For S ~ w^-gamma, T2(N) ~ N^(gamma/(gamma+1)); with gamma = 2/3
        // the scaling exponent is 0.4.
        let psd = NoisePsd {
            amplitude: 1.0e4,
            exponent: 2.0 / 3.0,
            low_cutoff: None,
            high_cutoff: None,
        };
        let quad = QuadratureOpts {
            points_per_decade: 500, // plenty for a scaling check
        };
        let ns = [1usize, 4, 16, 64, 256];
        let t2s: Vec<f64> = ns
            .iter()
            .map(|&n| solve_t2(&psd, n, &quad).unwrap())
            .collect();
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let fit = crate::fitting::fit_power_law(&x, &t2s).unwrap();
        assert!(
            (0.37..=0.43).contains(&fit.exponent),
            "scaling exponent {} outside [0.37, 0.43]",
            fit.exponent
        );
    }

    #[test]
    fn divergent_infrared_requires_explicit_cutoff() {
        let psd = NoisePsd {
            amplitude: 1.0,
            exponent: 1.5,
            low_cutoff: None,
            high_cutoff: None,
        };
        let spec = CpmgSpec {
            n_pulses: 1,
            total_time: 1e-6,
        };
        assert!(cpmg_chi(&psd, &spec, &QuadratureOpts::default()).is_err());
        let with_cutoff = NoisePsd {
            low_cutoff: Some(1e3),
            ..psd
        };
        assert!(cpmg_chi(&with_cutoff, &spec, &QuadratureOpts::default()).is_ok());
    }

    #[test]
    fn exponent_relation_inverts() {
        assert_relative_eq!(
            psd_exponent_from_scaling(0.4).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-12
        );
        assert!(psd_exponent_from_scaling(0.0).is_err());
        assert!(psd_exponent_from_scaling(1.0).is_err());
    }

    #[test]
    fn gamma_eff_limits_and_reference_value() {
        let e = 0.458e9;
        assert_eq!(clock_gamma_eff(0.0, e).unwrap(), 0.0);
        // 7 mT reference point: 11.034 GHz/T.
        assert_relative_eq!(
            clock_gamma_eff(7e-3, e).unwrap(),
            1.10336e10,
            max_relative = 1e-4
        );
        // Large field recovers the bare electron value (quadratically,
        // as (b_e/b_z)^2 / 2).
        assert_relative_eq!(
            clock_gamma_eff(1e4, e).unwrap(),
            GAMMA_EL_HZ_PER_T,
            max_relative = 1e-10
        );
        // Monotone increasing in field.
        let mut prev = 0.0;
        for k in 1..400 {
            let g = clock_gamma_eff(k as f64 * 1e-4, e).unwrap();
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn clock_model_reproduces_its_anchors() {
        let m = ClockModel::from_anchors(1.5e-6, 7e-3, 140e-9, 0.458e9).unwrap();
        assert_relative_eq!(m.hahn_t2(0.0).unwrap(), 1.5e-6, max_relative = 1e-12);
        assert_relative_eq!(m.hahn_t2(7e-3).unwrap(), 140e-9, max_relative = 1e-12);
        // Noise scale is a sub-mT equivalent field noise.
        assert_relative_eq!(m.noise_scale, 5.87e-4, max_relative = 0.01);
        // T2 falls monotonically with field.
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let t2 = m.hahn_t2(k as f64 * 0.5e-3).unwrap();
            assert!(t2 < prev || k == 0);
            prev = t2;
        }
        // Anchors in the wrong order are rejected.
        assert!(ClockModel::from_anchors(140e-9, 7e-3, 1.5e-6, 0.458e9).is_err());
    }

    #[test]
    fn t1_law_reference_values() {
        let a = 43.0;
        let b = 47e-12;
        // 43*80 + 47e-12*80^7 = 3440 + 985.66144 = 4425.66144.
        let r = t1_rate(80.0, a, b).unwrap();
        assert_relative_eq!(r, 4425.66144, max_relative = 1e-12);
        // Crossover where both channels are equal.
        let tc = t1_crossover_temp(a, b).unwrap();
        assert_relative_eq!(a * tc, b * tc.powi(7), max_relative = 1e-12);
        assert_relative_eq!(tc, 98.54, max_relative = 1e-3);
        // Low-T limit is the direct process.
        assert_relative_eq!(t1_rate(1.0, a, b).unwrap(), a, max_relative = 1e-9);
        assert!(t1_rate(-1.0, a, b).is_err());
        assert!(t1_rate(10.0, 0.0, 0.0).is_err());
    }
}
