//! Least-squares fitting built on a single derivative-free optimizer
//! (Nelder–Mead with coordinate-clamped bounds), shared by every fit in
//! the crate so all results are reproducible bit for bit.
//!
//! Parameter uncertainties come from the curvature of the loss at the
//! optimum: for L(p) = sum((y - m(x;p))/sigma)^2 the covariance estimate
//! is C = 2 H^-1 * L0/(n - p) with H the finite-difference Hessian. For
//! linear models this reduces to the classical OLS covariance. A singular
//! or indefinite Hessian yields infinite uncertainties rather than an
//! error — the best-fit point is still useful.

use crate::powder::{synth_spectrum_with_orientations, fibonacci_sphere, FreqGrid};
use crate::spinham::ZfsParams;
use crate::{CoreError, Result};

/// Sentinel loss for parameter vectors outside the model's domain.
/// Finite so the simplex bookkeeping never mixes infinities.
const LOSS_INVALID: f64 = f64::MAX;

/// Nelder–Mead settings. The defaults are the ones used everywhere.
#[derive(Clone, Copy, Debug)]
pub struct NmOptions {
    pub max_evals: usize,
    /// Relative simplex spread (both in loss and per coordinate) below
    /// which the search stops.
    pub tol: f64,
    /// Relative initial step per coordinate; absolute fallback for
    /// coordinates starting at zero.
    pub init_step_rel: f64,
    pub init_step_abs: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_evals: 20_000,
            tol: 1e-10,
            init_step_rel: 0.05,
            init_step_abs: 0.00025,
        }
    }
}

/// Outcome of a Nelder–Mead run: best-ever point, not just the final
/// simplex vertex.
#[derive(Clone, Debug)]
pub struct NmOutcome {
    pub best: Vec<f64>,
    pub loss: f64,
    pub evals: usize,
    pub converged: bool,
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Derivative-free simplex minimization with reflection 1, expansion 2,
/// contraction 0.5 and shrink 0.5. Out-of-bounds candidates are clamped
/// coordinate-wise before evaluation. Fully deterministic: ties are
/// resolved by vertex index.
pub fn nelder_mead<F>(
    loss: F,
    init: &[f64],
    bounds: &[(f64, f64)],
    opts: &NmOptions,
) -> Result<NmOutcome>
where
    F: Fn(&[f64]) -> f64,
{
    let n = init.len();
    if n == 0 {
        return Err(CoreError::invalid("nelder_mead: empty parameter vector"));
    }
    if bounds.len() != n {
        return Err(CoreError::invalid("nelder_mead: bounds length mismatch"));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo <= hi) {
            return Err(CoreError::invalid(format!(
                "nelder_mead: bound {i} has lo > hi"
            )));
        }
    }

    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| -> f64 {
        evals.set(evals.get() + 1);
        let v = loss(x);
        if v.is_nan() {
            LOSS_INVALID
        } else {
            v.min(LOSS_INVALID)
        }
    };

    // Initial simplex: x0 plus a perturbation along each coordinate.
    let mut x0 = init.to_vec();
    clamp_into(&mut x0, bounds);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.clone());
    for i in 0..n {
        let mut xi = x0.clone();
        let step = if xi[i] != 0.0 {
            opts.init_step_rel * xi[i].abs()
        } else {
            opts.init_step_abs
        };
        xi[i] += step;
        clamp_into(&mut xi, bounds);
        if xi == x0 {
            // Clamped back onto the start (at the upper bound): go down.
            xi[i] -= step;
            clamp_into(&mut xi, bounds);
        }
        simplex.push(xi);
    }
    let mut f: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut best_ever = simplex[0].clone();
    let mut best_loss = f[0];
    for (x, &v) in simplex.iter().zip(&f) {
        if v < best_loss {
            best_loss = v;
            best_ever = x.clone();
        }
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut converged = false;

    while evals.get() < opts.max_evals {
        order.sort_by(|&a, &b| f[a].partial_cmp(&f[b]).unwrap().then(a.cmp(&b)));
        let ib = order[0];
        let iw = order[n];
        let isw = order[n - 1];

        // Convergence: relative spread in loss and in every coordinate.
        let f_spread = (f[iw] - f[ib]).abs();
        let mut x_spread_ok = true;
        for i in 0..n {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in &simplex {
                lo = lo.min(v[i]);
                hi = hi.max(v[i]);
            }
            if hi - lo > opts.tol * (1.0 + simplex[ib][i].abs()) {
                x_spread_ok = false;
                break;
            }
        }
        if f[ib] < LOSS_INVALID && f_spread <= opts.tol * (1.0 + f[ib].abs()) && x_spread_ok {
            converged = true;
            break;
        }

        // Centroid of all but the worst.
        let mut c = vec![0.0; n];
        for (k, v) in simplex.iter().enumerate() {
            if k != iw {
                for i in 0..n {
                    c[i] += v[i];
                }
            }
        }
        for v in c.iter_mut() {
            *v /= n as f64;
        }

        let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            let mut out: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (x - y)).collect();
            clamp_into(&mut out, bounds);
            out
        };

        let xr = combine(&c, &simplex[iw], 1.0);
        let fr = eval(&xr);
        if fr < best_loss {
            best_loss = fr;
            best_ever = xr.clone();
        }

        if fr < f[ib] {
            let xe = combine(&c, &simplex[iw], 2.0);
            let fe = eval(&xe);
            if fe < best_loss {
                best_loss = fe;
                best_ever = xe.clone();
            }
            if fe < fr {
                simplex[iw] = xe;
                f[iw] = fe;
            } else {
                simplex[iw] = xr;
                f[iw] = fr;
            }
        } else if fr < f[isw] {
            simplex[iw] = xr;
            f[iw] = fr;
        } else {
            // Contract: outside toward the reflection if it improved on
            // the worst, otherwise inside.
            let (xc, against_worst) = if fr < f[iw] {
                (combine(&c, &simplex[iw], 0.5), fr)
            } else {
                (combine(&c, &simplex[iw], -0.5), f[iw])
            };
            let fc = eval(&xc);
            if fc < best_loss {
                best_loss = fc;
                best_ever = xc.clone();
            }
            if fc < against_worst {
                simplex[iw] = xc;
                f[iw] = fc;
            } else {
                // Shrink everything toward the best vertex.
                let xb = simplex[ib].clone();
                for (k, v) in simplex.iter_mut().enumerate() {
                    if k == ib {
                        continue;
                    }
                    for i in 0..n {
                        v[i] = xb[i] + 0.5 * (v[i] - xb[i]);
                    }
                    clamp_into(v, bounds);
                    f[k] = eval(v);
                    if f[k] < best_loss {
                        best_loss = f[k];
                        best_ever = v.clone();
                    }
                    if evals.get() >= opts.max_evals {
                        break;
                    }
                }
            }
        }
    }

    if best_loss >= LOSS_INVALID {
        return Err(CoreError::numerical(
            "nelder_mead: no valid point found (loss invalid everywhere)",
        ));
    }
    Ok(NmOutcome {
        best: best_ever,
        loss: best_loss,
        evals: evals.get(),
        converged,
    })
}

/// Result of a least-squares fit: named parameters, one-sigma
/// uncertainties in the same order, residual loss at the optimum.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: Vec<(String, f64)>,
    pub uncertainties: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub evals: usize,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.params
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| self.uncertainties[i])
    }
}

/// Invert a small symmetric matrix by Gauss-Jordan with partial
/// pivoting. `None` when singular within floating-point resolution.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r][j] -= factor * a[col][j];
                inv[r][j] -= factor * inv[col][j];
            }
        }
    }
    Some(inv)
}

/// One-sigma uncertainties at `best` from the finite-difference Hessian
/// of `loss`: C = 2 H^-1 * loss(best)/(n_data - n_params). Entries that
/// cannot be resolved (singular/indefinite H) come back infinite.
fn hessian_uncertainties<F>(loss: &F, best: &[f64], n_data: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let p = best.len();
    if n_data <= p {
        return vec![f64::INFINITY; p];
    }
    let l0 = loss(best);
    let step: Vec<f64> = best
        .iter()
        .map(|&v| 1e-4 * v.abs().max(1e-12))
        .collect();
    let mut h = vec![vec![0.0; p]; p];
    let probe = |shift: &[(usize, f64)]| -> f64 {
        let mut x = best.to_vec();
        for &(i, d) in shift {
            x[i] += d;
        }
        loss(&x)
    };
    for i in 0..p {
        let hp = probe(&[(i, step[i])]);
        let hm = probe(&[(i, -step[i])]);
        h[i][i] = (hp - 2.0 * l0 + hm) / (step[i] * step[i]);
        for j in (i + 1)..p {
            let pp = probe(&[(i, step[i]), (j, step[j])]);
            let pm = probe(&[(i, step[i]), (j, -step[j])]);
            let mp = probe(&[(i, -step[i]), (j, step[j])]);
            let mm = probe(&[(i, -step[i]), (j, -step[j])]);
            let v = (pp - pm - mp + mm) / (4.0 * step[i] * step[j]);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    let scale = 2.0 * l0 / (n_data - p) as f64;
    match invert(h) {
        Some(hinv) => (0..p)
            .map(|i| {
                let c = hinv[i][i] * scale;
                if c.is_finite() && c >= 0.0 {
                    c.sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        None => vec![f64::INFINITY; p],
    }
}

/// Data for a generic 1D fit. `sigma`, when given, weights residuals as
/// (y - m)/sigma; otherwise unit weights.
#[derive(Clone, Debug)]
pub struct DataSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl DataSeries {
    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() || self.x.is_empty() {
            return Err(CoreError::invalid(
                "DataSeries: x and y must be equal-length and non-empty",
            ));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.x.len() {
                return Err(CoreError::invalid("DataSeries: sigma length mismatch"));
            }
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(CoreError::invalid("DataSeries: sigma must be positive"));
            }
        }
        if self
            .x
            .iter()
            .chain(self.y.iter())
            .any(|v| !v.is_finite())
        {
            return Err(CoreError::invalid("DataSeries: non-finite data"));
        }
        Ok(())
    }
}

/// Generic weighted least squares of `model(params, x)` against a data
/// series. `names`, `init` and `bounds` must agree in length; the data
/// must overdetermine the parameters.
pub fn fit_least_squares<M>(
    model: M,
    data: &DataSeries,
    names: &[&str],
    init: &[f64],
    bounds: &[(f64, f64)],
    opts: &NmOptions,
) -> Result<FitResult>
where
    M: Fn(&[f64], f64) -> f64,
{
    data.validate()?;
    if names.len() != init.len() || names.len() != bounds.len() {
        return Err(CoreError::invalid(
            "fit_least_squares: names/init/bounds length mismatch",
        ));
    }
    if data.x.len() <= names.len() {
        return Err(CoreError::invalid(format!(
            "fit_least_squares: {} points cannot constrain {} parameters",
            data.x.len(),
            names.len()
        )));
    }
    let loss = |p: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (k, (&x, &y)) in data.x.iter().zip(&data.y).enumerate() {
            let m = model(p, x);
            if !m.is_finite() {
                return LOSS_INVALID;
            }
            let w = data.sigma.as_ref().map_or(1.0, |s| 1.0 / s[k]);
            let r = (y - m) * w;
            acc += r * r;
        }
        acc
    };
    let out = nelder_mead(&loss, init, bounds, opts)?;
    let uncertainties = hessian_uncertainties(&loss, &out.best, data.x.len());
    Ok(FitResult {
        params: names
            .iter()
            .map(|s| s.to_string())
            .zip(out.best.iter().copied())
            .map(|(n, v)| (n, v))
            .collect(),
        uncertainties,
        residual_norm: out.loss,
        converged: out.converged,
        evals: out.evals,
    })
}

/// Initial guesses extracted from a (near-)zero-field powder spectrum.
#[derive(Clone, Copy, Debug)]
pub struct ZfsInit {
    pub d: f64,
    pub e: f64,
    pub linewidth: f64,
    pub amp_xz: f64,
    pub amp_yz: f64,
    pub amp_xy: f64,
}

/// Locate the two dominant peaks of a zero-field spectrum and convert
/// them to starting values: the peaks sit at d-e and d+e, so
/// d0 = (f1+f2)/2 and e0 = (f2-f1)/2; the linewidth guess is the FWHM of
/// the taller peak; amplitude guesses invert the mean powder coupling
/// weight of 1/3 per transition.
pub fn peak_init(grid: &FreqGrid, signal: &[f64]) -> Result<ZfsInit> {
    grid.validate()?;
    if signal.len() != grid.n {
        return Err(CoreError::invalid("peak_init: signal/grid length mismatch"));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::invalid("peak_init: non-finite signal"));
    }

    // Noise floor: median of |signal|.
    let mut mags: Vec<f64> = signal.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = mags[mags.len() / 2];
    let threshold = 3.0 * median;

    // Local maxima above the floor. A line center that falls halfway
    // between grid points samples as a two-point plateau, so ties to the
    // right are accepted (leftmost plateau element wins).
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for i in 1..signal.len() - 1 {
        if signal[i] > signal[i - 1] && signal[i] >= signal[i + 1] && signal[i] > threshold {
            peaks.push((i, signal[i]));
        }
    }
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    if peaks.is_empty() {
        return Err(CoreError::invalid(
            "peak_init: no peaks above 3x the median level",
        ));
    }

    // Tallest peak, then the tallest one far enough away from it that it
    // cannot be a noise wiggle on the same line.
    let min_sep_bins = ((grid.step * (grid.n - 1) as f64) / 20.0 / grid.step)
        .ceil()
        .max(8.0) as usize;
    let (i1, h1) = peaks[0];
    let second = peaks[1..]
        .iter()
        .find(|(i, _)| i.abs_diff(i1) >= min_sep_bins);
    let (i2, h2) = match second {
        Some(&(i, h)) => (i, h),
        None => {
            return Err(CoreError::invalid(
                "peak_init: only one resolved peak; cannot split d and e",
            ))
        }
    };

    let f_tall = grid.value(i1);
    let f_other = grid.value(i2);
    let (f_lo, h_lo, f_hi, h_hi) = if f_tall < f_other {
        (f_tall, h1, f_other, h2)
    } else {
        (f_other, h2, f_tall, h1)
    };

    // FWHM of the taller peak by half-height crossings, linear interp.
    let half = h1 / 2.0;
    let mut left = grid.value(i1) - grid.step;
    for k in (0..i1).rev() {
        if signal[k] <= half {
            let t = (half - signal[k]) / (signal[k + 1] - signal[k]).max(1e-300);
            left = grid.value(k) + t * grid.step;
            break;
        }
        left = grid.value(k);
    }
    let mut right = grid.value(i1) + grid.step;
    for k in (i1 + 1)..signal.len() {
        if signal[k] <= half {
            let t = (signal[k - 1] - half) / (signal[k - 1] - signal[k]).max(1e-300);
            right = grid.value(k - 1) + t * grid.step;
            break;
        }
        right = grid.value(k);
    }
    let linewidth = (right - left).max(grid.step);

    let sigma = linewidth / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let amp_scale = 3.0 * sigma * (2.0 * std::f64::consts::PI).sqrt();
    let d = 0.5 * (f_lo + f_hi);
    let e = 0.5 * (f_hi - f_lo);

    // Signal height near 2e gives the low-frequency transition amplitude.
    let amp_xy = if 2.0 * e >= grid.start && 2.0 * e <= grid.value(grid.n - 1) {
        let j = ((2.0 * e - grid.start) / grid.step).round() as usize;
        (signal[j.min(grid.n - 1)] * amp_scale).max(0.0)
    } else {
        0.0
    };

    Ok(ZfsInit {
        d,
        e,
        linewidth,
        amp_xz: (h_hi * amp_scale).max(0.0),
        amp_yz: (h_lo * amp_scale).max(0.0),
        amp_xy,
    })
}

/// One measured spectrum row at a static field magnitude.
#[derive(Clone, Debug)]
pub struct OdmrRow {
    pub field: f64,
    pub grid: FreqGrid,
    pub signal: Vec<f64>,
}

/// Options for [`fit_zfs`].
#[derive(Clone, Copy, Debug)]
pub struct ZfsFitOptions {
    /// Orientation count of the forward model during fitting.
    pub n_orient: usize,
    /// Rows with |field| above this are excluded (the low-field rows
    /// carry the ZFS information; far-detuned rows only slow the fit).
    pub max_field: f64,
    /// Explicit starting point; otherwise [`peak_init`] on the
    /// lowest-field row.
    pub init: Option<ZfsInit>,
}

impl Default for ZfsFitOptions {
    fn default() -> Self {
        ZfsFitOptions {
            n_orient: 1000,
            max_field: 5e-3,
            init: None,
        }
    }
}

/// Fit (d, e, linewidth, amp_xz, amp_yz, amp_xy) of the powder model to
/// one or more measured spectra. Returns parameters in that order with
/// curvature uncertainties.
pub fn fit_zfs(rows: &[OdmrRow], opts: &ZfsFitOptions) -> Result<FitResult> {
    let used: Vec<&OdmrRow> = rows.iter().filter(|r| r.field <= opts.max_field).collect();
    if used.is_empty() {
        return Err(CoreError::invalid(
            "fit_zfs: no rows at or below max_field",
        ));
    }
    let mut n_data = 0usize;
    for r in used.iter() {
        r.grid.validate()?;
        if r.signal.len() != r.grid.n {
            return Err(CoreError::invalid("fit_zfs: row signal/grid mismatch"));
        }
        n_data += r.signal.len();
    }

    // Starting point from the lowest-field row unless supplied.
    let mut init = match opts.init {
        Some(i) => i,
        None => {
            let lowest = used
                .iter()
                .min_by(|a, b| a.field.partial_cmp(&b.field).unwrap())
                .unwrap();
            peak_init(&lowest.grid, &lowest.signal)?
        }
    };
    // Keep the start inside the model's domain (noise can push a raw
    // peak estimate past the e <= d/3 boundary).
    init.e = init.e.clamp(0.0, 0.999 * init.d / 3.0);

    let orientations = fibonacci_sphere(opts.n_orient)?;
    let loss = |p: &[f64]| -> f64 {
        let zfs = ZfsParams {
            d: p[0],
            e: p[1],
            amp_xz: p[3],
            amp_yz: p[4],
            amp_xy: p[5],
        };
        if zfs.validate().is_err() || p[2] <= 0.0 {
            return LOSS_INVALID;
        }
        let mut acc = 0.0;
        for r in used.iter() {
            let model =
                match synth_spectrum_with_orientations(&zfs, r.field, &r.grid, p[2], &orientations)
                {
                    Ok(s) => s,
                    Err(_) => return LOSS_INVALID,
                };
            for (m, y) in model.signal.iter().zip(&r.signal) {
                let d = y - m;
                acc += d * d;
            }
        }
        acc
    };

    let x0 = [
        init.d,
        init.e,
        init.linewidth,
        init.amp_xz,
        init.amp_yz,
        init.amp_xy,
    ];
    let bounds = [
        (0.2 * init.d, 3.0 * init.d),
        (0.0, init.d),
        (0.2 * init.linewidth, 5.0 * init.linewidth),
        (0.0, 10.0 * init.amp_xz + 1.0),
        (0.0, 10.0 * init.amp_yz + 1.0),
        (0.0, 10.0 * init.amp_xy + 1.0),
    ];
    let out = nelder_mead(&loss, &x0, &bounds, &NmOptions::default())?;
    let uncertainties = hessian_uncertainties(&loss, &out.best, n_data);
    let names = ["d", "e", "linewidth", "amp_xz", "amp_yz", "amp_xy"];
    Ok(FitResult {
        params: names
            .iter()
            .map(|s| s.to_string())
            .zip(out.best.iter().copied())
            .collect(),
        uncertainties,
        residual_norm: out.loss,
        converged: out.converged,
        evals: out.evals,
    })
}

/// Fit A * exp(-(t/t2)^beta). Starting values are read off the data:
/// A from the first point, t2 from the 1/e crossing, beta = 1.
pub fn fit_stretched_exp(data: &DataSeries) -> Result<FitResult> {
    data.validate()?;
    let a0 = data.y[0].abs().max(1e-12);
    let target = a0 / std::f64::consts::E;
    let mut t2_0 = data.x[data.x.len() - 1].max(1e-12);
    for k in 1..data.x.len() {
        if data.y[k] <= target {
            t2_0 = data.x[k].max(1e-12);
            break;
        }
    }
    let model = |p: &[f64], t: f64| -> f64 {
        if p[1] <= 0.0 || p[2] <= 0.0 {
            return f64::NAN;
        }
        p[0] * (-(t / p[1]).powf(p[2])).exp()
    };
    fit_least_squares(
        model,
        data,
        &["amplitude", "t2", "beta"],
        &[a0, t2_0, 1.0],
        &[
            (0.0, 10.0 * a0),
            (1e-3 * t2_0, 1e3 * t2_0),
            (0.3, 3.0),
        ],
        &NmOptions::default(),
    )
}

/// Power-law fit y = prefactor * x^exponent by linear regression in
/// log-log space (closed form, no iteration).
#[derive(Clone, Copy, Debug)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub exponent_stderr: f64,
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(CoreError::invalid(
            "fit_power_law: need >= 3 equal-length points",
        ));
    }
    if x.iter().chain(y.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CoreError::invalid(
            "fit_power_law: all points must be positive",
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(CoreError::invalid("fit_power_law: x values are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut rss = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        let r = b - (intercept + slope * a);
        rss += r * r;
    }
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        exponent_stderr: stderr,
    })
}

/// Fit the two-channel relaxation law 1/T1 = A*T + B*T^7 to measured
/// (temperature, T1) pairs. The fit runs in rate space, 1/T1, with
/// uncertainties transformed accordingly (sigma_rate = sigma_T1/T1^2).
/// The optimizer starts from the closed-form linear solution, so this is
/// effectively a polish step that shares the common engine.
pub fn fit_t1_temperature(
    temps: &[f64],
    t1s: &[f64],
    sigma_t1: Option<&[f64]>,
) -> Result<FitResult> {
    if temps.len() != t1s.len() || temps.len() < 3 {
        return Err(CoreError::invalid(
            "fit_t1_temperature: need >= 3 equal-length points",
        ));
    }
    if temps
        .iter()
        .chain(t1s.iter())
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(CoreError::invalid(
            "fit_t1_temperature: temperatures and T1 must be positive",
        ));
    }
    let rates: Vec<f64> = t1s.iter().map(|t| 1.0 / t).collect();
    let sigma_rate: Option<Vec<f64>> = match sigma_t1 {
        Some(s) => {
            if s.len() != t1s.len() {
                return Err(CoreError::invalid("fit_t1_temperature: sigma length"));
            }
            Some(
                s.iter()
                    .zip(t1s)
                    .map(|(sig, t1)| sig / (t1 * t1))
                    .collect(),
            )
        }
        None => None,
    };

    // Weighted linear normal equations on the basis (T, T^7) for the
    // starting point.
    let mut m = [[0.0f64; 2]; 2];
    let mut v = [0.0f64; 2];
    for (k, (&t, &r)) in temps.iter().zip(&rates).enumerate() {
        let w = sigma_rate
            .as_ref()
            .map_or(1.0, |s| 1.0 / (s[k] * s[k]));
        let b = [t, t.powi(7)];
        for i in 0..2 {
            v[i] += w * b[i] * r;
            for j in 0..2 {
                m[i][j] += w * b[i] * b[j];
            }
        }
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let (a0, b0) = if det.abs() > 1e-300 {
        (
            ((v[0] * m[1][1] - v[1] * m[0][1]) / det).max(1e-30),
            ((v[1] * m[0][0] - v[0] * m[1][0]) / det).max(1e-40),
        )
    } else {
        (1.0, 1e-12)
    };

    let data = DataSeries {
        x: temps.to_vec(),
        y: rates,
        sigma: sigma_rate,
    };
    let model = |p: &[f64], t: f64| p[0] * t + p[1] * t.powi(7);
    fit_least_squares(
        model,
        &data,
        &["relax_a", "relax_raman"],
        &[a0, b0],
        &[(0.0, 1e6 * a0.max(1e-12)), (0.0, 1e6 * b0.max(1e-22))],
        &NmOptions::default(),
    )
}
