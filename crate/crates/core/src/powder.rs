//! Orientation averaging for randomly oriented (powder / frozen
//! solution) triplet ensembles.
//!
//! The static field direction is sampled on a Fibonacci sphere lattice in
//! the molecular frame. The microwave drive field of a powder sample is
//! uniformly distributed in the plane perpendicular to nothing in
//! particular — what matters per orientation is the drive component
//! perpendicular to the static field, so each transition enters with the
//! average coupling over two orthogonal axes normal to the sampled
//! direction. That average is computed basis-free:
//!
//!   w_perp = (sum_a |<i|S_a|j>|^2 - |<i|S.u|j>|^2) / 2.
//!
//! Spectra deposit a unit-area Gaussian per transition (area = amplitude
//! x coupling weight, independent of linewidth). Summation is chunked in
//! a fixed order so results are bit-identical with and without the
//! `parallel` feature and for any thread count.

use crate::spinham::{
    build_hamiltonian, constants, coupling_weight, eigensolve, total_coupling_weight, FieldVector,
    TransitionSet, ZfsParams,
};
use crate::{CoreError, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Orientations are accumulated in fixed chunks of this many points;
/// chunk partial sums are folded sequentially. Changing this constant
/// changes results at the last-bit level, so it is part of the output
/// contract.
const ORIENT_CHUNK: usize = 256;

/// Gaussian deposits are truncated at +/- 8 sigma (relative truncated
/// mass ~ 1e-15, far below float noise in the sums).
const DEPOSIT_CUTOFF_SIGMAS: f64 = 8.0;

/// Unit vectors covering the sphere quasi-uniformly.
#[derive(Clone, Debug)]
pub struct OrientationGrid {
    pub points: Vec<[f64; 3]>,
}

/// Fibonacci sphere lattice with `n` points:
/// z_i = 1 - (2i+1)/n, phi_i = i * pi * (3 - sqrt 5).
pub fn fibonacci_sphere(n: usize) -> Result<OrientationGrid> {
    if n == 0 {
        return Err(CoreError::invalid("fibonacci_sphere: n must be >= 1"));
    }
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        points.push([r * phi.cos(), r * phi.sin(), z]);
    }
    Ok(OrientationGrid { points })
}

/// Uniform frequency grid in Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqGrid {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl FreqGrid {
    pub fn linspace(start: f64, stop: f64, n: usize) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite()) || n < 2 || stop <= start {
            return Err(CoreError::invalid(
                "FreqGrid::linspace: need finite start < stop and n >= 2",
            ));
        }
        Ok(FreqGrid {
            start,
            step: (stop - start) / (n - 1) as f64,
            n,
        })
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.step.is_finite() && self.step > 0.0) || self.n < 2 {
            return Err(CoreError::invalid("FreqGrid: need step > 0 and n >= 2"));
        }
        Ok(())
    }
}

/// A synthesized powder spectrum on a uniform grid.
#[derive(Clone, Debug)]
pub struct SpectrumGrid {
    pub grid: FreqGrid,
    pub signal: Vec<f64>,
    /// FWHM of the Gaussian line shape used for the deposits, Hz.
    pub linewidth: f64,
}

/// Field-frequency map: one powder spectrum per field magnitude.
#[derive(Clone, Debug)]
pub struct OdmrMap {
    pub fields: Vec<f64>,
    pub grid: FreqGrid,
    /// `rows[k]` is the spectrum at `fields[k]`.
    pub rows: Vec<Vec<f64>>,
    pub linewidth: f64,
}

/// Ensemble-averaged Rabi oscillation.
#[derive(Clone, Debug)]
pub struct RabiTrace {
    pub times: Vec<f64>,
    pub signal: Vec<f64>,
}

fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Add `area` times a unit-area Gaussian centered at `f0` to `out`.
fn deposit_gaussian(out: &mut [f64], grid: &FreqGrid, f0: f64, sigma: f64, area: f64) {
    if area == 0.0 {
        return;
    }
    let lo = f0 - DEPOSIT_CUTOFF_SIGMAS * sigma;
    let hi = f0 + DEPOSIT_CUTOFF_SIGMAS * sigma;
    let i_lo = ((lo - grid.start) / grid.step).ceil().max(0.0) as usize;
    let i_hi_f = ((hi - grid.start) / grid.step).floor();
    if i_hi_f < 0.0 || i_lo >= grid.n {
        return;
    }
    let i_hi = (i_hi_f as usize).min(grid.n - 1);
    let norm = area / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    for i in i_lo..=i_hi {
        let x = (grid.value(i) - f0) / sigma;
        out[i] += norm * (-0.5 * x * x).exp();
    }
}

/// Run `per_chunk` over fixed chunks of `0..n_items` and fold the partial
/// vectors in chunk order. The parallel feature changes scheduling only;
/// the fold order (and hence every output bit) is fixed.
fn chunked_sum<F>(n_items: usize, out_len: usize, per_chunk: F) -> Result<Vec<f64>>
where
    F: Fn(std::ops::Range<usize>) -> Result<Vec<f64>> + Sync,
{
    let ranges: Vec<std::ops::Range<usize>> = (0..n_items)
        .step_by(ORIENT_CHUNK)
        .map(|s| s..(s + ORIENT_CHUNK).min(n_items))
        .collect();

    #[cfg(feature = "parallel")]
    let partials: Vec<Result<Vec<f64>>> = ranges.into_par_iter().map(&per_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Result<Vec<f64>>> = ranges.into_iter().map(&per_chunk).collect();

    let mut acc = vec![0.0; out_len];
    for p in partials {
        let p = p?;
        for (a, v) in acc.iter_mut().zip(p.iter()) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Powder ODMR spectrum over an explicit orientation set.
///
/// Each orientation contributes three Gaussian deposits (one per level
/// pair) with area `amp_pair * w_perp`; the result is the mean over
/// orientations. Exposed separately from [`synth_spectrum`] so callers
/// can probe orientation-set symmetries.
pub fn synth_spectrum_with_orientations(
    zfs: &ZfsParams,
    b_mag: f64,
    grid: &FreqGrid,
    linewidth: f64,
    orientations: &OrientationGrid,
) -> Result<SpectrumGrid> {
    zfs.validate()?;
    grid.validate()?;
    if !(b_mag.is_finite() && b_mag >= 0.0) {
        return Err(CoreError::invalid("synth_spectrum: field must be >= 0"));
    }
    if !(linewidth.is_finite() && linewidth > 0.0) {
        return Err(CoreError::invalid("synth_spectrum: linewidth must be > 0"));
    }
    if orientations.points.is_empty() {
        return Err(CoreError::invalid("synth_spectrum: empty orientation set"));
    }

    let sigma = sigma_from_fwhm(linewidth);
    let pts = &orientations.points;

    let sum = chunked_sum(pts.len(), grid.n, |range| {
        let mut part = vec![0.0; grid.n];
        for idx in range {
            let u = pts[idx];
            let field = FieldVector::new(b_mag * u[0], b_mag * u[1], b_mag * u[2])?;
            let h = build_hamiltonian(zfs, &field)?;
            let lv = eigensolve(&h)?;
            for (slot, &(i, j)) in [(0usize, 1usize), (0, 2), (1, 2)].iter().enumerate() {
                let along = coupling_weight(&lv, u, i, j)?;
                let w_perp = 0.5 * (total_coupling_weight(&lv, i, j) - along).max(0.0);
                let area = TransitionSet::amplitude_for(zfs, slot) * w_perp;
                deposit_gaussian(&mut part, grid, lv.levels[j] - lv.levels[i], sigma, area);
            }
        }
        Ok(part)
    })?;

    let inv = 1.0 / pts.len() as f64;
    Ok(SpectrumGrid {
        grid: *grid,
        signal: sum.into_iter().map(|v| v * inv).collect(),
        linewidth,
    })
}

/// Powder ODMR spectrum at field magnitude `b_mag`, averaged over an
/// `n_orient`-point Fibonacci sphere.
pub fn synth_spectrum(
    zfs: &ZfsParams,
    b_mag: f64,
    grid: &FreqGrid,
    linewidth: f64,
    n_orient: usize,
) -> Result<SpectrumGrid> {
    let orientations = fibonacci_sphere(n_orient)?;
    synth_spectrum_with_orientations(zfs, b_mag, grid, linewidth, &orientations)
}

/// Powder spectra for a list of field magnitudes (an ODMR map). The
/// orientation grid is built once and shared by all rows.
pub fn synth_odmr_map(
    zfs: &ZfsParams,
    fields: &[f64],
    grid: &FreqGrid,
    linewidth: f64,
    n_orient: usize,
) -> Result<OdmrMap> {
    if fields.is_empty() {
        return Err(CoreError::invalid("synth_odmr_map: no fields given"));
    }
    let orientations = fibonacci_sphere(n_orient)?;
    let mut rows = Vec::with_capacity(fields.len());
    for &b in fields {
        rows.push(
            synth_spectrum_with_orientations(zfs, b, grid, linewidth, &orientations)?.signal,
        );
    }
    Ok(OdmrMap {
        fields: fields.to_vec(),
        grid: *grid,
        rows,
        linewidth,
    })
}

/// Rotating-wave two-level Rabi response of one transition:
/// P(t) = Omega^2/(Omega^2+Delta^2) * sin^2(pi sqrt(Omega^2+Delta^2) t),
/// with `omega` the bare Rabi frequency (Hz) and `delta` the detuning.
pub fn rabi_contribution(omega: f64, delta: f64, t: f64) -> f64 {
    let gen2 = omega * omega + delta * delta;
    if gen2 == 0.0 {
        return 0.0;
    }
    let gen = gen2.sqrt();
    let s = (std::f64::consts::PI * gen * t).sin();
    (omega * omega / gen2) * s * s
}

/// Options for [`ensemble_rabi`].
#[derive(Clone, Copy, Debug)]
pub struct RabiOptions {
    /// Maximum |f_transition - f_drive| accepted when selecting each
    /// orientation's nearest transition. Defaults to
    /// `5 * gamma_el * b1 * sqrt(2)` (a few power-broadened linewidths).
    pub capture_window: Option<f64>,
}

impl Default for RabiOptions {
    fn default() -> Self {
        RabiOptions {
            capture_window: None,
        }
    }
}

/// Powder-averaged Rabi oscillation under a drive of amplitude `b1`
/// (Tesla) at `drive_freq` (Hz), static field `b_mag` along each sampled
/// orientation.
///
/// Per orientation the transition nearest to the drive is kept; its
/// perpendicular coupling weight rescales the Rabi frequency,
/// `Omega = gamma_el * b1 * sqrt(w_perp)`. Orientations with no
/// transition inside the capture window are an error (the model has no
/// meaningful response there).
pub fn ensemble_rabi(
    zfs: &ZfsParams,
    b_mag: f64,
    drive_freq: f64,
    b1: f64,
    times: &[f64],
    n_orient: usize,
    opts: &RabiOptions,
) -> Result<RabiTrace> {
    zfs.validate()?;
    if !(b_mag.is_finite() && b_mag >= 0.0) {
        return Err(CoreError::invalid("ensemble_rabi: field must be >= 0"));
    }
    if !(drive_freq.is_finite() && drive_freq > 0.0) {
        return Err(CoreError::invalid("ensemble_rabi: drive_freq must be > 0"));
    }
    if !(b1.is_finite() && b1 > 0.0) {
        return Err(CoreError::invalid("ensemble_rabi: b1 must be > 0"));
    }
    if times.is_empty() || times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(CoreError::invalid("ensemble_rabi: bad time axis"));
    }

    let gamma_b1 = constants::GAMMA_EL_HZ_PER_T * b1;
    let window = opts
        .capture_window
        .unwrap_or(5.0 * gamma_b1 * std::f64::consts::SQRT_2);
    let orientations = fibonacci_sphere(n_orient)?;
    let pts = &orientations.points;

    let sum = chunked_sum(pts.len(), times.len(), |range| {
        let mut part = vec![0.0; times.len()];
        for idx in range {
            let u = pts[idx];
            let field = FieldVector::new(b_mag * u[0], b_mag * u[1], b_mag * u[2])?;
            let lv = eigensolve(&build_hamiltonian(zfs, &field)?)?;

            // Nearest transition to the drive.
            let mut best: Option<(f64, f64)> = None; // (|delta|, omega)
            let mut best_delta = 0.0;
            for &(i, j) in &[(0usize, 1usize), (0, 2), (1, 2)] {
                let f_ij = lv.levels[j] - lv.levels[i];
                let delta = f_ij - drive_freq;
                let along = coupling_weight(&lv, u, i, j)?;
                let w_perp = 0.5 * (total_coupling_weight(&lv, i, j) - along).max(0.0);
                let omega = gamma_b1 * w_perp.sqrt();
                match best {
                    Some((d, _)) if delta.abs() >= d => {}
                    _ => {
                        best = Some((delta.abs(), omega));
                        best_delta = delta;
                    }
                }
            }
            let (dist, omega) = best.expect("three transitions always exist");
            if dist > window {
                return Err(CoreError::invalid(format!(
                    "ensemble_rabi: orientation {idx} has no transition within \
                     {window:.3e} Hz of the drive (nearest is {dist:.3e} Hz away); \
                     move the drive frequency or widen the capture window"
                )));
            }
            for (k, &t) in times.iter().enumerate() {
                part[k] += rabi_contribution(omega, best_delta, t);
            }
        }
        Ok(part)
    })?;

    let inv = 1.0 / pts.len() as f64;
    Ok(RabiTrace {
        times: times.to_vec(),
        signal: sum.into_iter().map(|v| v * inv).collect(),
    })
}
