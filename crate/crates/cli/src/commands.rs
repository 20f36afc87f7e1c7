//! One handler per subcommand. Each reads its config section, runs the
//! corresponding engine calls, and writes CSV/JSON/SVG artifacts into
//! the output directory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use tripletlab_core::coherence::{
    clock_gamma_eff, psd_exponent_from_scaling, solve_t2, t1_crossover_temp, t1_rate, ClockModel,
    NoisePsd, QuadratureOpts,
};
use tripletlab_core::fitting::{fit_power_law, fit_zfs, OdmrRow, ZfsFitOptions, ZfsInit};
use tripletlab_core::photophysics::{
    ground_state, oadf_contrast, run_sequence, PhotoRates, PulseSequence, TripletPair,
};
use tripletlab_core::powder::{ensemble_rabi, synth_odmr_map, synth_spectrum, FreqGrid, RabiOptions};
use tripletlab_core::sensing::{
    ac_sensitivity, dc_sensitivity, dipole_field_axial, find_probe_freqs,
    proton_number_sensitivity, two_point_slope, SensorBudget, SLOPE_FIELD_STEP,
};
use tripletlab_core::spinham::constants::{GAMMA_EL_HZ_PER_T, PROTON_MOMENT_J_PER_T};
use tripletlab_core::spinham::ZfsParams;

use crate::config::LoadedConfig;
use crate::output::{read_spectrum_csv, Envelope, LinePlot, OutputSet, Series};
use crate::CliError;

fn missing(section: &str) -> CliError {
    CliError::Config(format!("config has no [{section}] section"))
}

// ------------------------------------------------------------- simulate-odmr

pub fn cmd_simulate_odmr(
    cfg: &LoadedConfig,
    out: &mut OutputSet,
    seed: u64,
) -> Result<(), CliError> {
    let c = cfg.root.odmr.as_ref().ok_or_else(|| missing("odmr"))?;
    let zfs = ZfsParams::new(
        c.d.0,
        c.e.0,
        c.amplitudes[0],
        c.amplitudes[1],
        c.amplitudes[2],
    )?;
    let grid = FreqGrid::linspace(c.freq_start.0, c.freq_stop.0, c.freq_points)?;
    let fields: Vec<f64> = c.fields.iter().map(|f| f.0).collect();
    let mut map = synth_odmr_map(&zfs, &fields, &grid, c.linewidth.0, c.n_orientations)?;

    if c.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, c.noise)
            .map_err(|e| CliError::Config(format!("noise: {e}")))?;
        for row in &mut map.rows {
            for v in row.iter_mut() {
                *v += dist.sample(&mut rng);
            }
        }
    }

    let mut rows_csv = Vec::with_capacity(fields.len() * grid.n);
    for (k, &b) in map.fields.iter().enumerate() {
        for i in 0..grid.n {
            rows_csv.push(vec![b, grid.value(i), map.rows[k][i]]);
        }
    }
    out.write_csv("odmr.csv", "field_t,freq_hz,signal", &rows_csv)?;

    let mut env = Envelope::new("simulate-odmr", &cfg.hash, seed);
    let zf = zfs.zero_field_frequencies();
    env.results = json!({
        "fields_t": map.fields,
        "freq_start_hz": grid.value(0),
        "freq_step_hz": grid.step,
        "freq_points": grid.n,
        "n_orientations": c.n_orientations,
        "linewidth_hz": c.linewidth.0,
        "noise_rms": c.noise,
        "zero_field_transitions_hz": { "yz": zf[0], "xz": zf[1], "xy": zf[2] },
    });
    if c.noise > 0.0 {
        env.provenance
            .push("gaussian noise drawn from the seeded stream; rerun with the same \
                   --seed reproduces it exactly".into());
    }
    out.write_json("odmr.json", &env)?;

    let plot = LinePlot {
        title: "Powder spectrum".into(),
        x_label: "frequency (Hz)".into(),
        y_label: "signal".into(),
        log_x: false,
        log_y: false,
        series: map
            .fields
            .iter()
            .enumerate()
            .map(|(k, &b)| Series {
                label: format!("B = {} mT", fmt_short(b * 1e3)),
                points: (0..grid.n).map(|i| (grid.value(i), map.rows[k][i])).collect(),
            })
            .collect(),
    };
    out.write_svg("odmr.svg", &plot)
}

fn fmt_short(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

// ------------------------------------------------------------------ fit-zfs

/// Group spectrum triples into per-field rows; fields keep first-seen
/// order, and each field's frequencies must form a uniform ascending
/// grid.
fn group_rows(triples: &[(f64, f64, f64)]) -> Result<Vec<OdmrRow>, CliError> {
    let mut order: Vec<f64> = Vec::new();
    for &(b, _, _) in triples {
        if !order.iter().any(|x| x.to_bits() == b.to_bits()) {
            order.push(b);
        }
    }
    let mut rows = Vec::with_capacity(order.len());
    for &b in &order {
        let freqs: Vec<f64> = triples
            .iter()
            .filter(|t| t.0.to_bits() == b.to_bits())
            .map(|t| t.1)
            .collect();
        let signal: Vec<f64> = triples
            .iter()
            .filter(|t| t.0.to_bits() == b.to_bits())
            .map(|t| t.2)
            .collect();
        if freqs.len() < 8 {
            return Err(CliError::Data(format!(
                "field {b:e}: only {} samples (need >= 8)",
                freqs.len()
            )));
        }
        let grid = FreqGrid::linspace(freqs[0], *freqs.last().unwrap(), freqs.len())?;
        for (i, &f) in freqs.iter().enumerate() {
            let expect = grid.value(i);
            if (f - expect).abs() > 1e-6 * expect.abs().max(1.0) {
                return Err(CliError::Data(format!(
                    "field {b:e}: frequencies are not a uniform ascending grid \
                     (sample {i} is {f:e}, expected {expect:e})"
                )));
            }
        }
        rows.push(OdmrRow { field: b, grid, signal });
    }
    Ok(rows)
}

pub fn cmd_fit_zfs(
    cfg: &LoadedConfig,
    out: &mut OutputSet,
    seed: u64,
    init_flag: Option<(f64, f64)>,
) -> Result<(), CliError> {
    let c = cfg.root.fit.as_ref().ok_or_else(|| missing("fit"))?;
    let path = cfg.resolve(&c.data);
    let triples = read_spectrum_csv(&path)?;
    let rows = group_rows(&triples)?;

    let init = match (init_flag, c.init_d, c.init_e) {
        (Some((d, e)), _, _) => Some((d, e)),
        (None, Some(d), Some(e)) => Some((d.0, e.0)),
        (None, None, None) => None,
        _ => {
            return Err(CliError::Config(
                "init_d and init_e must be given together".into(),
            ))
        }
    }
    .map(|(d, e)| ZfsInit {
        d,
        e,
        linewidth: c.init_linewidth.map(|l| l.0).unwrap_or(0.02 * d),
        amp_xz: 1.0,
        amp_yz: 1.0,
        amp_xy: 1.0,
    });

    let defaults = ZfsFitOptions::default();
    let opts = ZfsFitOptions {
        n_orient: c.n_orientations,
        max_field: c.max_field.map(|f| f.0).unwrap_or(defaults.max_field),
        init,
    };
    let fit = fit_zfs(&rows, &opts)?;
    if !fit.converged {
        return Err(CliError::Compute(format!(
            "fit did not converge within {} evaluations",
            fit.evals
        )));
    }

    let d = fit.value("d").unwrap();
    let e = fit.value("e").unwrap();
    let lw = fit.value("linewidth").unwrap();
    let fitted = ZfsParams {
        d,
        e,
        amp_xz: fit.value("amp_xz").unwrap(),
        amp_yz: fit.value("amp_yz").unwrap(),
        amp_xy: fit.value("amp_xy").unwrap(),
    };
    fitted.validate()?;

    // Model overlay for the rows that entered the fit.
    let used: Vec<&OdmrRow> = rows.iter().filter(|r| r.field <= opts.max_field).collect();
    let mut csv = Vec::new();
    let mut overlay = Vec::new();
    for row in &used {
        let model = synth_spectrum(&fitted, row.field, &row.grid, lw, opts.n_orient)?;
        for i in 0..row.grid.n {
            csv.push(vec![
                row.field,
                row.grid.value(i),
                row.signal[i],
                model.signal[i],
                row.signal[i] - model.signal[i],
            ]);
        }
        if overlay.is_empty() {
            overlay.push(Series {
                label: "data".into(),
                points: (0..row.grid.n)
                    .map(|i| (row.grid.value(i), row.signal[i]))
                    .collect(),
            });
            overlay.push(Series {
                label: "model".into(),
                points: (0..row.grid.n)
                    .map(|i| (row.grid.value(i), model.signal[i]))
                    .collect(),
            });
        }
    }
    out.write_csv("fit_model.csv", "field_t,freq_hz,signal,model,residual", &csv)?;

    let mut env = Envelope::new("fit-zfs", &cfg.hash, seed);
    let pair = |name: &str| {
        json!({
            "value": fit.value(name).unwrap(),
            "sigma": fit.uncertainty(name).unwrap(),
        })
    };
    env.results = json!({
        "data": c.data,
        "rows_used": used.len(),
        "rows_total": rows.len(),
        "params": {
            "d_hz": pair("d"),
            "e_hz": pair("e"),
            "linewidth_hz": pair("linewidth"),
            "amp_xz": pair("amp_xz"),
            "amp_yz": pair("amp_yz"),
            "amp_xy": pair("amp_xy"),
        },
        "residual_norm": fit.residual_norm,
        "evaluations": fit.evals,
        "converged": fit.converged,
    });
    env.provenance.push(
        "uncertainties are curvature estimates scaled by the residual variance".into(),
    );
    out.write_json("fit.json", &env)?;

    let plot = LinePlot {
        title: "Spectrum fit".into(),
        x_label: "frequency (Hz)".into(),
        y_label: "signal".into(),
        log_x: false,
        log_y: false,
        series: overlay,
    };
    out.write_svg("fit.svg", &plot)
}

// --------------------------------------------------------------------- rabi

pub fn cmd_rabi(cfg: &LoadedConfig, out: &mut OutputSet, seed: u64) -> Result<(), CliError> {
    let c = cfg.root.rabi.as_ref().ok_or_else(|| missing("rabi"))?;
    if c.samples < 2 {
        return Err(CliError::Config("rabi: samples must be >= 2".into()));
    }
    let zfs = ZfsParams::new(c.d.0, c.e.0, 1.0, 1.0, 1.0)?;
    let times: Vec<f64> = (0..c.samples)
        .map(|i| c.duration.0 * i as f64 / (c.samples - 1) as f64)
        .collect();
    let opts = RabiOptions {
        capture_window: c.capture_window.map(|f| f.0),
    };
    let trace = ensemble_rabi(
        &zfs,
        c.static_field.0,
        c.drive_freq.0,
        c.drive_field.0,
        &times,
        c.n_orientations,
        &opts,
    )?;

    let rows: Vec<Vec<f64>> = trace
        .times
        .iter()
        .zip(&trace.signal)
        .map(|(&t, &s)| vec![t, s])
        .collect();
    out.write_csv("rabi.csv", "time_s,signal", &rows)?;

    let mut env = Envelope::new("rabi", &cfg.hash, seed);
    let smin = trace.signal.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = trace
        .signal
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    env.results = json!({
        "drive_freq_hz": c.drive_freq.0,
        "static_field_t": c.static_field.0,
        "drive_field_t": c.drive_field.0,
        "bare_rabi_hz": GAMMA_EL_HZ_PER_T * c.drive_field.0,
        "n_orientations": c.n_orientations,
        "samples": c.samples,
        "duration_s": c.duration.0,
        "signal_min": smin,
        "signal_max": smax,
        "signal_final": *trace.signal.last().unwrap(),
    });
    out.write_json("rabi.json", &env)?;

    let plot = LinePlot {
        title: "Ensemble Rabi oscillation".into(),
        x_label: "time (s)".into(),
        y_label: "excited-state fraction".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            label: String::new(),
            points: trace
                .times
                .iter()
                .zip(&trace.signal)
                .map(|(&t, &s)| (t, s))
                .collect(),
        }],
    };
    out.write_svg("rabi.svg", &plot)
}

// ---------------------------------------------------------------- coherence

pub fn cmd_coherence(cfg: &LoadedConfig, out: &mut OutputSet, seed: u64) -> Result<(), CliError> {
    let c = cfg
        .root
        .coherence
        .as_ref()
        .ok_or_else(|| missing("coherence"))?;
    if c.pulse_numbers.is_empty() {
        return Err(CliError::Config(
            "coherence: pulse_numbers must not be empty".into(),
        ));
    }
    let psd = NoisePsd {
        amplitude: c.noise_amplitude,
        exponent: c.noise_exponent,
        low_cutoff: c.low_cutoff_rad_s,
        high_cutoff: c.high_cutoff_rad_s,
    };
    let quad = QuadratureOpts {
        points_per_decade: c.points_per_decade.unwrap_or(2000),
    };

    let mut t2s = Vec::with_capacity(c.pulse_numbers.len());
    for &n in &c.pulse_numbers {
        t2s.push(solve_t2(&psd, n, &quad)?);
    }
    let rows: Vec<Vec<f64>> = c
        .pulse_numbers
        .iter()
        .zip(&t2s)
        .map(|(&n, &t2)| vec![n as f64, t2])
        .collect();
    out.write_csv("coherence.csv", "n_pulses,t2_s", &rows)?;

    let mut env = Envelope::new("coherence", &cfg.hash, seed);
    let fittable: Vec<(f64, f64)> = c
        .pulse_numbers
        .iter()
        .zip(&t2s)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &t2)| (n as f64, t2))
        .collect();
    let scaling = if fittable.len() >= 3 {
        let xs: Vec<f64> = fittable.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fittable.iter().map(|p| p.1).collect();
        let fit = fit_power_law(&xs, &ys)?;
        let inferred = psd_exponent_from_scaling(fit.exponent).ok();
        json!({
            "exponent": fit.exponent,
            "exponent_stderr": fit.exponent_stderr,
            "prefactor_s": fit.prefactor,
            "inferred_noise_exponent": inferred,
        })
    } else {
        env.provenance
            .push("fewer than 3 nonzero pulse numbers; no scaling fit".into());
        serde_json::Value::Null
    };

    let clock = match &c.clock {
        Some(k) => {
            let model =
                ClockModel::from_anchors(k.t2_zero.0, k.anchor_field.0, k.t2_anchor.0, k.e.0)?;
            if k.field_points < 2 {
                return Err(CliError::Config(
                    "coherence.clock: field_points must be >= 2".into(),
                ));
            }
            let mut clock_rows = Vec::with_capacity(k.field_points);
            for i in 0..k.field_points {
                let b = k.field_start.0
                    + (k.field_stop.0 - k.field_start.0) * i as f64
                        / (k.field_points - 1) as f64;
                let g = clock_gamma_eff(b, k.e.0)?;
                let rate = model.hahn_rate(b)?;
                clock_rows.push(vec![b, g, rate, 1.0 / rate]);
            }
            out.write_csv(
                "clock.csv",
                "field_t,gamma_eff_hz_per_t,hahn_rate_per_s,t2_s",
                &clock_rows,
            )?;
            let plot = LinePlot {
                title: "Echo coherence vs field".into(),
                x_label: "field (T)".into(),
                y_label: "T2 (s)".into(),
                log_x: false,
                log_y: true,
                series: vec![Series {
                    label: String::new(),
                    points: clock_rows.iter().map(|r| (r[0], r[3])).collect(),
                }],
            };
            out.write_svg("clock.svg", &plot)?;
            json!({
                "baseline_rate_per_s": model.baseline_rate,
                "noise_scale_t": model.noise_scale,
                "gamma_eff_anchor_hz_per_t": clock_gamma_eff(k.anchor_field.0, k.e.0)?,
                "t2_zero_s": model.hahn_t2(0.0)?,
                "t2_anchor_s": model.hahn_t2(k.anchor_field.0)?,
            })
        }
        None => serde_json::Value::Null,
    };

    env.results = json!({
        "pulse_numbers": c.pulse_numbers,
        "t2_s": t2s,
        "noise_amplitude": c.noise_amplitude,
        "noise_exponent": c.noise_exponent,
        "scaling": scaling,
        "clock": clock,
    });
    out.write_json("coherence.json", &env)?;

    let plot = LinePlot {
        title: "Coherence time vs pulse number".into(),
        x_label: "pulses".into(),
        y_label: "T2 (s)".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: String::new(),
            points: fittable,
        }],
    };
    out.write_svg("coherence.svg", &plot)
}

// ----------------------------------------------------------------------- t1

pub fn cmd_t1(cfg: &LoadedConfig, out: &mut OutputSet, seed: u64) -> Result<(), CliError> {
    let c = cfg.root.t1.as_ref().ok_or_else(|| missing("t1"))?;
    if c.temp_points < 2 {
        return Err(CliError::Config("t1: temp_points must be >= 2".into()));
    }
    let a = c.direct.0;
    let b = c.raman.0;
    let mut rows = Vec::with_capacity(c.temp_points);
    for i in 0..c.temp_points {
        let t = c.temp_start.0
            + (c.temp_stop.0 - c.temp_start.0) * i as f64 / (c.temp_points - 1) as f64;
        let r = t1_rate(t, a, b)?;
        rows.push(vec![t, r, 1.0 / r]);
    }
    out.write_csv("t1.csv", "temp_k,rate_per_s,t1_s", &rows)?;

    let evals: Result<Vec<serde_json::Value>, CliError> = c
        .eval_temps
        .iter()
        .map(|t| {
            let r = t1_rate(t.0, a, b)?;
            Ok(json!({ "temp_k": t.0, "rate_per_s": r, "t1_s": 1.0 / r }))
        })
        .collect();
    let crossover = if a > 0.0 && b > 0.0 {
        serde_json::Value::from(t1_crossover_temp(a, b)?)
    } else {
        serde_json::Value::Null
    };

    let mut env = Envelope::new("t1", &cfg.hash, seed);
    env.results = json!({
        "direct_per_k_s": a,
        "raman_per_k7_s": b,
        "crossover_temp_k": crossover,
        "eval": evals?,
    });
    out.write_json("t1.json", &env)?;

    let plot = LinePlot {
        title: "Spin-lattice relaxation".into(),
        x_label: "temperature (K)".into(),
        y_label: "T1 (s)".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: String::new(),
            points: rows.iter().map(|r| (r[0], r[2])).collect(),
        }],
    };
    out.write_svg("t1.svg", &plot)
}

// --------------------------------------------------------------------- oadf

pub fn cmd_oadf(cfg: &LoadedConfig, out: &mut OutputSet, seed: u64) -> Result<(), CliError> {
    let c = cfg.root.oadf.as_ref().ok_or_else(|| missing("oadf"))?;
    let rates = match c.preset.as_str() {
        "cryo_80k" => PhotoRates::cryo_80k(),
        "ambient" => PhotoRates::ambient(),
        other => {
            return Err(CliError::Config(format!(
                "oadf: preset {other:?} is not one of \"cryo_80k\", \"ambient\""
            )))
        }
    };
    let pair = match c.pair.as_str() {
        "xz" => TripletPair::XZ,
        "yz" => TripletPair::YZ,
        "xy" => TripletPair::XY,
        other => {
            return Err(CliError::Config(format!(
                "oadf: pair {other:?} is not one of \"xz\", \"yz\", \"xy\""
            )))
        }
    };
    let seq = PulseSequence::oadf_protocol(c.t_init.0, c.t_wait.0, c.t_read.0, pair, c.mw_fraction);
    let windows = seq.default_readout_windows();
    let p0 = ground_state();

    let trace_mw = run_sequence(&rates, &seq, &p0, &windows)?;
    let trace_ref = run_sequence(&rates, &seq.without_mw(), &p0, &windows)?;
    let contrast = oadf_contrast(&rates, &seq, &p0, None)?;

    let rows: Vec<Vec<f64>> = trace_mw
        .times
        .iter()
        .zip(trace_mw.emission_rate.iter().zip(&trace_ref.emission_rate))
        .map(|(&t, (&em, &er))| vec![t, em, er])
        .collect();
    out.write_csv("oadf.csv", "time_s,emission_mw_per_s,emission_ref_per_s", &rows)?;

    let mut env = Envelope::new("oadf", &cfg.hash, seed);
    env.results = json!({
        "preset": c.preset,
        "pair": c.pair,
        "mw_fraction": c.mw_fraction,
        "t_init_s": c.t_init.0,
        "t_wait_s": c.t_wait.0,
        "t_read_s": c.t_read.0,
        "total_duration_s": seq.total_duration(),
        "contrast": contrast,
        "window_counts_mw": trace_mw.window_counts,
        "window_counts_ref": trace_ref.window_counts,
    });
    env.provenance.push(
        "preset rates are calibration targets reproducing the published contrast \
         levels, not measured constants"
            .into(),
    );
    out.write_json("oadf.json", &env)?;

    let plot = LinePlot {
        title: "Delayed-fluorescence readout".into(),
        x_label: "time (s)".into(),
        y_label: "emission rate (1/s)".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series {
                label: "with microwave".into(),
                points: trace_mw
                    .times
                    .iter()
                    .zip(&trace_mw.emission_rate)
                    .map(|(&t, &e)| (t, e))
                    .collect(),
            },
            Series {
                label: "reference".into(),
                points: trace_ref
                    .times
                    .iter()
                    .zip(&trace_ref.emission_rate)
                    .map(|(&t, &e)| (t, e))
                    .collect(),
            },
        ],
    };
    out.write_svg("oadf.svg", &plot)
}

// -------------------------------------------------------------------- sense

pub fn cmd_sense(cfg: &LoadedConfig, out: &mut OutputSet, seed: u64) -> Result<(), CliError> {
    let c = cfg.root.sense.as_ref().ok_or_else(|| missing("sense"))?;
    let budget = SensorBudget {
        photons_per_shot: c.photons_per_shot,
        molecules: c.molecules,
        t_init: c.t_init.0,
        t_evolve: c.t_evolve.0,
        t_read: c.t_read.0,
        overhead: c.overhead,
    };
    budget.validate()?;

    let contrast = c.contrast;
    let center = c.center.0;
    let fwhm = c.fwhm.0;
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(CliError::Config("sense: contrast must be in (0, 1]".into()));
    }
    if !(fwhm > 0.0) {
        return Err(CliError::Config("sense: fwhm must be > 0".into()));
    }
    let model = move |f: f64, b: f64| {
        let x = f - (center + GAMMA_EL_HZ_PER_T * b);
        let hw = fwhm / 2.0;
        contrast * hw * hw / (x * x + hw * hw)
    };

    let mut env = Envelope::new("sense", &cfg.hash, seed);
    env.provenance.push(
        "photon budget and line model are assumptions for scale, not measured \
         device parameters"
            .into(),
    );

    let (sens, mode_payload, plot) = match c.mode.as_str() {
        "dc" => {
            if c.scan_points < 2 {
                return Err(CliError::Config("sense: scan_points must be >= 2".into()));
            }
            let freqs: Vec<f64> = (0..c.scan_points)
                .map(|i| {
                    center - 2.0 * fwhm
                        + 4.0 * fwhm * i as f64 / (c.scan_points - 1) as f64
                })
                .collect();
            let (f_lo, f_hi) = find_probe_freqs(&model, c.bias.0, &freqs, SLOPE_FIELD_STEP)?;
            let slope = two_point_slope(&model, c.bias.0, f_lo, f_hi, SLOPE_FIELD_STEP)?;
            let sens = dc_sensitivity(&budget, slope)?;

            let mut scan_rows = Vec::with_capacity(freqs.len());
            for &f in &freqs {
                let s = (model(f, c.bias.0 + SLOPE_FIELD_STEP)
                    - model(f, c.bias.0 - SLOPE_FIELD_STEP))
                    / (2.0 * SLOPE_FIELD_STEP);
                scan_rows.push(vec![f, s]);
            }
            out.write_csv("sense_scan.csv", "freq_hz,dsignal_db_per_t", &scan_rows)?;

            let plot = LinePlot {
                title: "Field response scan".into(),
                x_label: "frequency (Hz)".into(),
                y_label: "d(signal)/dB (1/T)".into(),
                log_x: false,
                log_y: false,
                series: vec![Series {
                    label: String::new(),
                    points: scan_rows.iter().map(|r| (r[0], r[1])).collect(),
                }],
            };
            (
                sens,
                json!({
                    "probe_freq_lo_hz": f_lo,
                    "probe_freq_hi_hz": f_hi,
                    "slope_per_t": slope,
                }),
                plot,
            )
        }
        "ac" => {
            let t2 = c
                .t2
                .ok_or_else(|| CliError::Config("sense: ac mode requires t2".into()))?
                .0;
            let sens = ac_sensitivity(&budget, contrast, t2)?;

            // Sensitivity vs evolution time, up to T2.
            let n_curve = 200;
            let mut rows = Vec::with_capacity(n_curve);
            for i in 1..=n_curve {
                let te = t2 * i as f64 / n_curve as f64;
                let bi = SensorBudget { t_evolve: te, ..budget };
                rows.push(vec![te, ac_sensitivity(&bi, contrast, t2)?.eta]);
            }
            out.write_csv("sense_scan.csv", "evolve_s,eta_t_per_sqrt_hz", &rows)?;

            let plot = LinePlot {
                title: "Echo sensitivity vs evolution time".into(),
                x_label: "evolution time (s)".into(),
                y_label: "sensitivity (T/sqrt(Hz))".into(),
                log_x: false,
                log_y: true,
                series: vec![Series {
                    label: String::new(),
                    points: rows.iter().map(|r| (r[0], r[1])).collect(),
                }],
            };
            (sens, json!({ "t2_s": t2 }), plot)
        }
        other => {
            return Err(CliError::Config(format!(
                "sense: mode {other:?} is not \"dc\" or \"ac\""
            )))
        }
    };

    let proton = match (c.dipole_distance_m, c.polarization) {
        (Some(r), Some(p)) => {
            let bf = dipole_field_axial(PROTON_MOMENT_J_PER_T, r)?;
            let figure = proton_number_sensitivity(sens.eta_molar, p, bf)?;
            json!({
                "distance_m": r,
                "field_per_proton_t": bf,
                "polarization": p,
                "figure_sqrtmol_per_sqrt_hz": figure,
            })
        }
        (None, None) => serde_json::Value::Null,
        _ => {
            return Err(CliError::Config(
                "sense: dipole_distance_m and polarization must be given together".into(),
            ))
        }
    };

    env.results = json!({
        "mode": c.mode,
        "bias_t": c.bias.0,
        "contrast": contrast,
        "center_hz": center,
        "fwhm_hz": fwhm,
        "shot_time_s": budget.shot_time(),
        "sigma_b_per_shot_t": sens.sigma_b_per_shot,
        "eta_t_per_sqrt_hz": sens.eta,
        "eta_molar_t_sqrtmol_per_sqrt_hz": sens.eta_molar,
        "probe": mode_payload,
        "proton_detection": proton,
    });
    out.write_json("sense.json", &env)?;
    out.write_svg("sense.svg", &plot)
}
