//! Magnetometry estimates built on the forward spectrum model.
//!
//! A two-frequency differential measurement turns a field change into a
//! signal change through the local slope of the spectrum; photon shot
//! noise then sets the minimum detectable field per shot and, with the
//! duty cycle folded in, a sensitivity in T/sqrt(Hz). Concentration-
//! normalized figures (T*sqrt(mol)/sqrt(Hz)) divide out the molecule
//! number, which cancels between signal and shot noise.
//!
//! Dipole-field helpers estimate the statistical field of nearby nuclear
//! moments for the proton-detection budget.

use crate::spinham::constants::{AVOGADRO, GAMMA_EL_HZ_PER_T, MU0_OVER_4PI};
use crate::{CoreError, Result};

/// Central-difference field step for slope probing (Tesla).
pub const SLOPE_FIELD_STEP: f64 = 10e-6;

/// Differential slope of a two-point measurement: d/dB of
/// model(f_hi, B) - model(f_lo, B), central difference at `bias`.
/// The model receives a signed field; spectrum closures should consume
/// its magnitude so the zero-bias slope reflects the B -> -B symmetry.
pub fn two_point_slope<M>(model: &M, bias: f64, f_lo: f64, f_hi: f64, delta_b: f64) -> Result<f64>
where
    M: Fn(f64, f64) -> f64,
{
    if !(delta_b.is_finite() && delta_b > 0.0) {
        return Err(CoreError::invalid("two_point_slope: delta_b must be > 0"));
    }
    let plus = model(f_hi, bias + delta_b) - model(f_lo, bias + delta_b);
    let minus = model(f_hi, bias - delta_b) - model(f_lo, bias - delta_b);
    let slope = (plus - minus) / (2.0 * delta_b);
    if !slope.is_finite() {
        return Err(CoreError::numerical("two_point_slope: model returned non-finite"));
    }
    Ok(slope)
}

/// Scan a frequency grid for the steepest positive and negative
/// field-response points; returns (f_lo, f_hi) with f_lo at the most
/// negative d(signal)/dB and f_hi at the most positive.
pub fn find_probe_freqs<M>(
    model: &M,
    bias: f64,
    freqs: &[f64],
    delta_b: f64,
) -> Result<(f64, f64)>
where
    M: Fn(f64, f64) -> f64,
{
    if freqs.len() < 2 {
        return Err(CoreError::invalid("find_probe_freqs: need >= 2 frequencies"));
    }
    if !(delta_b.is_finite() && delta_b > 0.0) {
        return Err(CoreError::invalid("find_probe_freqs: delta_b must be > 0"));
    }
    let mut best_neg = (f64::INFINITY, freqs[0]);
    let mut best_pos = (f64::NEG_INFINITY, freqs[0]);
    for &f in freqs {
        let s = (model(f, bias + delta_b) - model(f, bias - delta_b)) / (2.0 * delta_b);
        if !s.is_finite() {
            return Err(CoreError::numerical("find_probe_freqs: model returned non-finite"));
        }
        if s < best_neg.0 {
            best_neg = (s, f);
        }
        if s > best_pos.0 {
            best_pos = (s, f);
        }
    }
    Ok((best_neg.1, best_pos.1))
}

/// Shot budget of the readout. `photons_per_shot` counts detected
/// photons per molecule per shot; `overhead` multiplies the bare
/// init + evolve + read time into the wall-clock shot time.
#[derive(Clone, Copy, Debug)]
pub struct SensorBudget {
    pub photons_per_shot: f64,
    pub molecules: f64,
    pub t_init: f64,
    pub t_evolve: f64,
    pub t_read: f64,
    pub overhead: f64,
}

impl SensorBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.photons_per_shot.is_finite() && self.photons_per_shot > 0.0) {
            return Err(CoreError::invalid("SensorBudget: photons_per_shot must be > 0"));
        }
        if !(self.molecules.is_finite() && self.molecules > 0.0) {
            return Err(CoreError::invalid("SensorBudget: molecules must be > 0"));
        }
        for (name, v) in [
            ("t_init", self.t_init),
            ("t_evolve", self.t_evolve),
            ("t_read", self.t_read),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::invalid(format!(
                    "SensorBudget: {name} must be >= 0"
                )));
            }
        }
        if self.t_init + self.t_evolve + self.t_read <= 0.0 {
            return Err(CoreError::invalid("SensorBudget: shot time must be > 0"));
        }
        if !(self.overhead.is_finite() && self.overhead >= 1.0) {
            return Err(CoreError::invalid("SensorBudget: overhead must be >= 1"));
        }
        Ok(())
    }

    pub fn shot_time(&self) -> f64 {
        (self.t_init + self.t_evolve + self.t_read) * self.overhead
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Sensitivity {
    /// Minimum detectable field in one shot (Tesla).
    pub sigma_b_per_shot: f64,
    /// Tesla per sqrt(Hz).
    pub eta: f64,
    /// Concentration-normalized: Tesla * sqrt(mol) / sqrt(Hz).
    pub eta_molar: f64,
}

/// DC (slope-probed) sensitivity. `slope` is the two-point differential
/// response d(signal)/dB of the normalized (per-molecule) signal, 1/T.
/// Shot noise of the photon difference is sqrt(2 n) with
/// n = photons_per_shot * molecules, so
/// sigma_B = sqrt(2/n) / |slope| and eta = sigma_B * sqrt(shot time).
pub fn dc_sensitivity(budget: &SensorBudget, slope: f64) -> Result<Sensitivity> {
    budget.validate()?;
    if !(slope.is_finite() && slope != 0.0) {
        return Err(CoreError::invalid("dc_sensitivity: slope must be nonzero"));
    }
    let n = budget.photons_per_shot * budget.molecules;
    let sigma_b = (2.0 / n).sqrt() / slope.abs();
    let eta = sigma_b * budget.shot_time().sqrt();
    let eta_molar = eta * (budget.molecules / AVOGADRO).sqrt();
    Ok(Sensitivity {
        sigma_b_per_shot: sigma_b,
        eta,
        eta_molar,
    })
}

/// AC (echo-phase) sensitivity at full contrast `contrast`, evolving for
/// `t_evolve` which must not exceed the coherence time `t2`:
/// eta = sqrt(shot time) / (2 pi gamma_el C t_evolve sqrt(n)).
pub fn ac_sensitivity(budget: &SensorBudget, contrast: f64, t2: f64) -> Result<Sensitivity> {
    budget.validate()?;
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(CoreError::invalid("ac_sensitivity: contrast must be in (0, 1]"));
    }
    if !(budget.t_evolve > 0.0) {
        return Err(CoreError::invalid("ac_sensitivity: t_evolve must be > 0"));
    }
    if budget.t_evolve > t2 {
        return Err(CoreError::invalid(
            "ac_sensitivity: evolution time exceeds the coherence time",
        ));
    }
    let n = budget.photons_per_shot * budget.molecules;
    let denom = 2.0 * std::f64::consts::PI * GAMMA_EL_HZ_PER_T * contrast * budget.t_evolve;
    let sigma_b = 1.0 / (denom * n.sqrt());
    let eta = sigma_b * budget.shot_time().sqrt();
    let eta_molar = eta * (budget.molecules / AVOGADRO).sqrt();
    Ok(Sensitivity {
        sigma_b_per_shot: sigma_b,
        eta,
        eta_molar,
    })
}

/// Field of a point magnetic dipole of moment `moment` (J/T) at distance
/// `r` on its axis (2x the equatorial value).
pub fn dipole_field_axial(moment: f64, r: f64) -> Result<f64> {
    dipole_check(moment, r)?;
    Ok(MU0_OVER_4PI * 2.0 * moment / (r * r * r))
}

/// Equatorial (in-plane) dipole field at distance `r`.
pub fn dipole_field_equatorial(moment: f64, r: f64) -> Result<f64> {
    dipole_check(moment, r)?;
    Ok(MU0_OVER_4PI * moment / (r * r * r))
}

fn dipole_check(moment: f64, r: f64) -> Result<()> {
    if !(moment.is_finite() && moment > 0.0) {
        return Err(CoreError::invalid("dipole_field: moment must be > 0"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(CoreError::invalid("dipole_field: distance must be > 0"));
    }
    Ok(())
}

/// Detectable proton count figure: the molar sensitivity divided by the
/// per-proton dipole field and the nuclear polarization p in (0, 1].
/// Units follow eta_molar / field: sqrt(mol)/sqrt(Hz) per unit
/// polarization.
pub fn proton_number_sensitivity(
    eta_molar: f64,
    polarization: f64,
    field_per_proton: f64,
) -> Result<f64> {
    if !(eta_molar.is_finite() && eta_molar > 0.0) {
        return Err(CoreError::invalid(
            "proton_number_sensitivity: eta_molar must be > 0",
        ));
    }
    if !(polarization > 0.0 && polarization <= 1.0) {
        return Err(CoreError::invalid(
            "proton_number_sensitivity: polarization must be in (0, 1]",
        ));
    }
    if !(field_per_proton.is_finite() && field_per_proton > 0.0) {
        return Err(CoreError::invalid(
            "proton_number_sensitivity: field_per_proton must be > 0",
        ));
    }
    Ok(eta_molar / (polarization * field_per_proton))
}
