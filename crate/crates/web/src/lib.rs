//! Browser bindings for the interactive demo page in www/. A thin wasm
//! layer over the core engines: every export takes plain numbers,
//! returns a Float64Array buffer, and leaves plotting to the page.
//! Input sizes are capped so a careless slider cannot freeze the tab.
//!
//! The `*_impl` functions hold all the logic and are ordinary host
//! code (JsError cannot even be constructed off-wasm); the exported
//! wrappers only translate errors.

use wasm_bindgen::prelude::*;

use tripletlab_core::coherence::{solve_t2, NoisePsd, QuadratureOpts};
use tripletlab_core::powder::{ensemble_rabi, synth_spectrum, FreqGrid, RabiOptions};
use tripletlab_core::spinham::ZfsParams;
use tripletlab_core::CoreError;

const MAX_POINTS: usize = 4096;
const MAX_ORIENT: usize = 20_000;

fn msg(e: CoreError) -> String {
    e.to_string()
}

fn check_size(n_points: usize, n_orient: usize) -> Result<(), String> {
    if n_points == 0 || n_points > MAX_POINTS {
        return Err(format!("n_points must be 1..={MAX_POINTS}"));
    }
    if n_orient == 0 || n_orient > MAX_ORIENT {
        return Err(format!("n_orient must be 1..={MAX_ORIENT}"));
    }
    Ok(())
}

fn zero_field_lines_impl(d_hz: f64, e_hz: f64) -> Result<Vec<f64>, String> {
    let zfs = ZfsParams::new(d_hz, e_hz, 1.0, 1.0, 1.0).map_err(msg)?;
    Ok(zfs.zero_field_frequencies().to_vec())
}

#[allow(clippy::too_many_arguments)]
fn odmr_spectrum_impl(
    d_hz: f64,
    e_hz: f64,
    field_t: f64,
    linewidth_hz: f64,
    f_start_hz: f64,
    f_stop_hz: f64,
    n_points: usize,
    n_orient: usize,
) -> Result<Vec<f64>, String> {
    check_size(n_points, n_orient)?;
    let zfs = ZfsParams::new(d_hz, e_hz, 1.0, 1.0, 1.0).map_err(msg)?;
    let grid = FreqGrid::linspace(f_start_hz, f_stop_hz, n_points).map_err(msg)?;
    let spec = synth_spectrum(&zfs, field_t, &grid, linewidth_hz, n_orient).map_err(msg)?;
    Ok(spec.signal)
}

#[allow(clippy::too_many_arguments)]
fn rabi_trace_impl(
    d_hz: f64,
    e_hz: f64,
    field_t: f64,
    drive_hz: f64,
    b1_t: f64,
    t_max_s: f64,
    samples: usize,
    n_orient: usize,
) -> Result<Vec<f64>, String> {
    check_size(samples, n_orient)?;
    if !(t_max_s.is_finite() && t_max_s > 0.0) {
        return Err("t_max_s must be > 0".into());
    }
    let zfs = ZfsParams::new(d_hz, e_hz, 1.0, 1.0, 1.0).map_err(msg)?;
    let times: Vec<f64> = (0..samples)
        .map(|i| t_max_s * i as f64 / (samples - 1).max(1) as f64)
        .collect();
    let tr = ensemble_rabi(
        &zfs,
        field_t,
        drive_hz,
        b1_t,
        &times,
        n_orient,
        &RabiOptions::default(),
    )
    .map_err(msg)?;
    Ok(tr.signal)
}

fn cpmg_t2_curve_impl(
    amplitude: f64,
    exponent: f64,
    max_log2_n: u32,
    points_per_decade: usize,
) -> Result<Vec<f64>, String> {
    if max_log2_n > 10 {
        return Err("max_log2_n must be <= 10".into());
    }
    let psd = NoisePsd {
        amplitude,
        exponent,
        low_cutoff: None,
        high_cutoff: None,
    };
    let quad = QuadratureOpts {
        points_per_decade: points_per_decade.clamp(10, 2000),
    };
    (0..=max_log2_n)
        .map(|k| solve_t2(&psd, 1usize << k, &quad).map_err(msg))
        .collect()
}

/// The three zero-field transition frequencies [d-e, d+e, 2e], Hz.
#[wasm_bindgen]
pub fn zero_field_lines(d_hz: f64, e_hz: f64) -> Result<Vec<f64>, JsError> {
    zero_field_lines_impl(d_hz, e_hz).map_err(|m| JsError::new(&m))
}

/// Powder spectrum sampled on a linear grid from `f_start_hz` to
/// `f_stop_hz`; the page reconstructs the frequency axis from those.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn odmr_spectrum(
    d_hz: f64,
    e_hz: f64,
    field_t: f64,
    linewidth_hz: f64,
    f_start_hz: f64,
    f_stop_hz: f64,
    n_points: usize,
    n_orient: usize,
) -> Result<Vec<f64>, JsError> {
    odmr_spectrum_impl(
        d_hz, e_hz, field_t, linewidth_hz, f_start_hz, f_stop_hz, n_points, n_orient,
    )
    .map_err(|m| JsError::new(&m))
}

/// Ensemble Rabi trace on `samples` equally spaced times in
/// [0, t_max_s]. Drive amplitude `b1_t` in Tesla.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn rabi_trace(
    d_hz: f64,
    e_hz: f64,
    field_t: f64,
    drive_hz: f64,
    b1_t: f64,
    t_max_s: f64,
    samples: usize,
    n_orient: usize,
) -> Result<Vec<f64>, JsError> {
    rabi_trace_impl(
        d_hz, e_hz, field_t, drive_hz, b1_t, t_max_s, samples, n_orient,
    )
    .map_err(|m| JsError::new(&m))
}

/// Coherence time under CPMG for N = 1, 2, 4, ..., 2^max_log2_n pulses
/// given a power-law dephasing noise spectrum amplitude * w^-exponent.
#[wasm_bindgen]
pub fn cpmg_t2_curve(
    amplitude: f64,
    exponent: f64,
    max_log2_n: u32,
    points_per_decade: usize,
) -> Result<Vec<f64>, JsError> {
    cpmg_t2_curve_impl(amplitude, exponent, max_log2_n, points_per_decade)
        .map_err(|m| JsError::new(&m))
}
