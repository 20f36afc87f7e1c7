//! Classical rate equations for the photocycle of an
//! optically-addressable molecular triplet:
//!
//! ```text
//!   S0 --488--> S1 --k_fl--> S0 (fluorescence, fraction q_r radiative)
//!               S1 --k_isc[s]--> T1s          (spin-selective ISC)
//!   T1s --912--> T2s --k_risc[s]--> S1        (spin-selective reverse ISC)
//!               T2s --k_t2_relax--> T1s       (internal conversion back)
//!   T1s --k_trip_decay[s]--> S0               (non-radiative triplet decay)
//!   T1 sublevels <--k_spin_relax--> each other
//! ```
//!
//! Spin-selective ISC polarizes the T1 manifold; a microwave pulse swaps
//! two sublevel populations; the 912 nm pump converts surviving T1
//! population back into delayed S1 fluorescence (OADF). The contrast of
//! photon counts with/without the microwave swap is the optically
//! detected magnetic resonance signal of the protocol.
//!
//! Populations live in a fixed-order 8-vector; propagation appends a
//! ninth photon-counting row and uses the matrix exponential of the
//! segment generator, so results are step-size-exact (the sampling grid
//! only decides where the trace is recorded, not its accuracy).

use crate::linalg::{expm, mat_vec};
use crate::{CoreError, Result};

/// State index order used by every array in this module.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhotoState {
    S0 = 0,
    S1 = 1,
    T1x = 2,
    T1y = 3,
    T1z = 4,
    T2x = 5,
    T2y = 6,
    T2z = 7,
}

pub const N_STATES: usize = 8;

/// Which pair of T1 sublevels a microwave pulse addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripletPair {
    XY,
    XZ,
    YZ,
}

impl TripletPair {
    pub fn indices(self) -> (usize, usize) {
        match self {
            TripletPair::XY => (PhotoState::T1x as usize, PhotoState::T1y as usize),
            TripletPair::XZ => (PhotoState::T1x as usize, PhotoState::T1z as usize),
            TripletPair::YZ => (PhotoState::T1y as usize, PhotoState::T1z as usize),
        }
    }
}

/// Rate constants, all in 1/s. Array indices are [x, y, z] sublevels.
#[derive(Clone, Copy, Debug)]
pub struct PhotoRates {
    /// S0 -> S1 excitation rate while the 488 nm laser is on.
    pub k_exc: f64,
    /// S1 -> S0 total decay rate.
    pub k_fl: f64,
    /// Radiative fraction of `k_fl` (photon yield per S1 decay).
    pub q_r: f64,
    /// S1 -> T1 intersystem crossing per sublevel.
    pub k_isc: [f64; 3],
    /// T1 -> T2 pump rate while the 912 nm laser is on (spin conserving).
    pub k_pump912: f64,
    /// T2 -> S1 reverse intersystem crossing per sublevel.
    pub k_risc: [f64; 3],
    /// T2 -> T1 internal conversion (spin conserving).
    pub k_t2_relax: f64,
    /// T1 -> S0 decay per sublevel.
    pub k_trip_decay: [f64; 3],
    /// Population exchange rate between every unordered pair of T1
    /// sublevels (infinite-temperature spin-lattice relaxation).
    pub k_spin_relax: f64,
}

impl PhotoRates {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("k_exc", self.k_exc),
            ("k_fl", self.k_fl),
            ("k_pump912", self.k_pump912),
            ("k_t2_relax", self.k_t2_relax),
            ("k_spin_relax", self.k_spin_relax),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::invalid(format!(
                    "PhotoRates: {name} must be finite and >= 0"
                )));
            }
        }
        for (name, arr) in [
            ("k_isc", &self.k_isc),
            ("k_risc", &self.k_risc),
            ("k_trip_decay", &self.k_trip_decay),
        ] {
            if arr.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(CoreError::invalid(format!(
                    "PhotoRates: {name} entries must be finite and >= 0"
                )));
            }
        }
        if !(self.q_r.is_finite() && (0.0..=1.0).contains(&self.q_r)) {
            return Err(CoreError::invalid("PhotoRates: q_r must be in [0, 1]"));
        }
        Ok(())
    }

    /// Rates calibrated to reproduce cryogenic (80 K) OADF behaviour:
    /// ISC strongly favours T1z, reverse ISC favours T1x, and spin-lattice
    /// relaxation is slow against the protocol. Under the standard
    /// 50 us / 10 us / 1 us protocol (see `PulseSequence::oadf_protocol`)
    /// a full population swap raises the delayed-fluorescence count by
    /// +44% on the x-z pair and +31% on y-z.
    pub fn cryo_80k() -> Self {
        PhotoRates {
            k_exc: 1.0e6,
            k_fl: 3.0e8,
            q_r: 0.8,
            k_isc: [0.9e6, 1.6e6, 8.4e6],
            k_pump912: 2.0e6,
            k_risc: [9.5e6, 7.0e6, 2.4e6],
            k_t2_relax: 1.1e7,
            k_trip_decay: [1.0e3, 1.0e3, 1.0e3],
            // Polarization lifetime 1/(3k) = 141 us at 80 K.
            k_spin_relax: 2.364e3,
        }
    }

    /// Room-temperature variant of the same molecule: the reverse-ISC
    /// selectivity is inverted (favouring T1z) and spin-lattice
    /// relaxation is ~10x faster, leaving a small negative swap contrast
    /// of a few percent under the standard protocol.
    pub fn ambient() -> Self {
        PhotoRates {
            k_exc: 1.0e6,
            k_fl: 3.0e8,
            q_r: 0.8,
            k_isc: [0.9e6, 1.6e6, 8.4e6],
            k_pump912: 2.0e6,
            k_risc: [3.0e6, 4.0e6, 6.0e6],
            k_t2_relax: 1.1e7,
            k_trip_decay: [1.0e3, 1.0e3, 1.0e3],
            // ~17 us polarization lifetime: most of the ISC polarization
            // decays before readout, but not all of it.
            k_spin_relax: 2.0e4,
        }
    }

    /// All spin selectivity removed: per-sublevel rates equalized to
    /// their means. A microwave swap then has exactly no effect.
    pub fn without_selectivity(&self) -> Self {
        let mean = |a: &[f64; 3]| [0.0; 3].map(|_| (a[0] + a[1] + a[2]) / 3.0);
        PhotoRates {
            k_isc: mean(&self.k_isc),
            k_risc: mean(&self.k_risc),
            k_trip_decay: mean(&self.k_trip_decay),
            ..*self
        }
    }
}

/// Column-stochastic generator of the rate equations, dp/dt = G p.
/// Entry (to, from) holds the rate; diagonals are negative column sums,
/// so every column sums to zero and total population is conserved.
pub fn build_rate_matrix(rates: &PhotoRates, laser488: bool, laser912: bool) -> Result<[[f64; N_STATES]; N_STATES]> {
    rates.validate()?;
    let mut g = [[0.0; N_STATES]; N_STATES];
    let s0 = PhotoState::S0 as usize;
    let s1 = PhotoState::S1 as usize;
    let t1 = [
        PhotoState::T1x as usize,
        PhotoState::T1y as usize,
        PhotoState::T1z as usize,
    ];
    let t2 = [
        PhotoState::T2x as usize,
        PhotoState::T2y as usize,
        PhotoState::T2z as usize,
    ];

    let mut add = |to: usize, from: usize, rate: f64| {
        g[to][from] += rate;
        g[from][from] -= rate;
    };

    if laser488 {
        add(s1, s0, rates.k_exc);
    }
    add(s0, s1, rates.k_fl);
    for s in 0..3 {
        add(t1[s], s1, rates.k_isc[s]);
        if laser912 {
            add(t2[s], t1[s], rates.k_pump912);
        }
        add(s1, t2[s], rates.k_risc[s]);
        add(t1[s], t2[s], rates.k_t2_relax);
        add(s0, t1[s], rates.k_trip_decay[s]);
    }
    // Spin-lattice exchange between all unordered T1 pairs.
    for a in 0..3 {
        for b in (a + 1)..3 {
            add(t1[a], t1[b], rates.k_spin_relax);
            add(t1[b], t1[a], rates.k_spin_relax);
        }
    }
    Ok(g)
}

/// Population transfer between a T1 sublevel pair with fraction
/// `f` in [0, 1]: f = 1 is a perfect pi swap, f = 0 a no-op.
pub fn apply_mw_pulse(pop: &mut [f64; N_STATES], pair: TripletPair, fraction: f64) -> Result<()> {
    if !(fraction.is_finite() && (0.0..=1.0).contains(&fraction)) {
        return Err(CoreError::invalid(
            "apply_mw_pulse: fraction must be in [0, 1]",
        ));
    }
    let (a, b) = pair.indices();
    let pa = pop[a];
    let pb = pop[b];
    pop[a] = pa + (pb - pa) * fraction;
    pop[b] = pb + (pa - pb) * fraction;
    Ok(())
}

/// An instantaneous microwave event inside a segment.
#[derive(Clone, Copy, Debug)]
pub struct MwEvent {
    /// Time from the segment start, seconds. May equal 0 or the segment
    /// duration (applied before/after the segment's evolution).
    pub offset: f64,
    pub pair: TripletPair,
    pub fraction: f64,
}

/// A stretch of constant laser settings with optional microwave events.
#[derive(Clone, Debug)]
pub struct Segment {
    pub duration: f64,
    pub laser488: bool,
    pub laser912: bool,
    pub mw: Vec<MwEvent>,
}

/// Ordered laser/microwave protocol.
#[derive(Clone, Debug)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(CoreError::invalid("PulseSequence: no segments"));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.duration.is_finite() && seg.duration > 0.0) {
                return Err(CoreError::invalid(format!(
                    "PulseSequence: segment {i} duration must be > 0"
                )));
            }
            for (j, ev) in seg.mw.iter().enumerate() {
                if !(ev.offset.is_finite() && (0.0..=seg.duration).contains(&ev.offset)) {
                    return Err(CoreError::invalid(format!(
                        "PulseSequence: segment {i} event {j} offset outside [0, duration]"
                    )));
                }
                if !(ev.fraction.is_finite() && (0.0..=1.0).contains(&ev.fraction)) {
                    return Err(CoreError::invalid(format!(
                        "PulseSequence: segment {i} event {j} fraction outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// The standard OADF protocol: 488 nm init, dark wait ending in a
    /// microwave pulse on `pair`, 912 nm readout, dark tail.
    pub fn oadf_protocol(
        t_init: f64,
        t_wait: f64,
        t_read: f64,
        pair: TripletPair,
        fraction: f64,
    ) -> Self {
        PulseSequence {
            segments: vec![
                Segment {
                    duration: t_init,
                    laser488: true,
                    laser912: false,
                    mw: vec![],
                },
                Segment {
                    duration: t_wait,
                    laser488: false,
                    laser912: false,
                    mw: vec![MwEvent {
                        offset: t_wait,
                        pair,
                        fraction,
                    }],
                },
                Segment {
                    duration: t_read,
                    laser488: false,
                    laser912: true,
                    mw: vec![],
                },
                Segment {
                    duration: 10e-6,
                    laser488: false,
                    laser912: false,
                    mw: vec![],
                },
            ],
        }
    }

    /// Default photon-counting windows: each 912-on segment extended by a
    /// 10 us tail (clipped to the sequence end), in absolute time.
    pub fn default_readout_windows(&self) -> Vec<(f64, f64)> {
        let total = self.total_duration();
        let mut windows = Vec::new();
        let mut t = 0.0;
        for seg in &self.segments {
            if seg.laser912 {
                windows.push((t, (t + seg.duration + 10e-6).min(total)));
            }
            t += seg.duration;
        }
        windows
    }

    /// Copy with every microwave transfer fraction set to zero (the
    /// reference run of a contrast measurement).
    pub fn without_mw(&self) -> Self {
        let mut out = self.clone();
        for seg in out.segments.iter_mut() {
            for ev in seg.mw.iter_mut() {
                ev.fraction = 0.0;
            }
        }
        out
    }
}

/// Time-resolved result of one protocol run.
#[derive(Clone, Debug)]
pub struct PopulationTrace {
    pub times: Vec<f64>,
    pub populations: Vec<[f64; N_STATES]>,
    /// Instantaneous photon emission rate q_r * k_fl * p_S1, 1/s.
    pub emission_rate: Vec<f64>,
    /// Cumulative emitted photons per molecule at each time point.
    pub cumulative_counts: Vec<f64>,
    /// Photons inside the requested counting windows.
    pub window_counts: f64,
}

const SAMPLES_PER_SEGMENT: usize = 1000;

/// Propagate `p0` through the sequence, recording ~1000 samples per
/// segment. `windows` are absolute-time photon counting intervals; their
/// edges become exact propagation breakpoints, so the counts carry no
/// sampling error.
pub fn run_sequence(
    rates: &PhotoRates,
    seq: &PulseSequence,
    p0: &[f64; N_STATES],
    windows: &[(f64, f64)],
) -> Result<PopulationTrace> {
    rates.validate()?;
    seq.validate()?;
    let total = seq.total_duration();
    if p0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(CoreError::invalid(
            "run_sequence: initial populations must be >= 0",
        ));
    }
    let psum: f64 = p0.iter().sum();
    if (psum - 1.0).abs() > 1e-6 {
        return Err(CoreError::invalid(format!(
            "run_sequence: initial populations sum to {psum}, expected 1"
        )));
    }
    for (i, &(a, b)) in windows.iter().enumerate() {
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= total + 1e-15) {
            return Err(CoreError::invalid(format!(
                "run_sequence: window {i} = ({a}, {b}) not inside [0, {total}]"
            )));
        }
    }

    // Augmented state: populations plus a photon counter driven by
    // q_r * k_fl * p_S1.
    let mut state = [0.0f64; N_STATES + 1];
    state[..N_STATES].copy_from_slice(p0);

    let mut times = Vec::new();
    let mut populations = Vec::new();
    let mut emission_rate = Vec::new();
    let mut cumulative = Vec::new();
    // Counter values at window edges, accumulated on the fly.
    let mut window_counts = 0.0;
    let mut window_start_counter = vec![f64::NAN; windows.len()];

    let record =
        |t: f64, s: &[f64; N_STATES + 1], times: &mut Vec<f64>, pops: &mut Vec<[f64; N_STATES]>, em: &mut Vec<f64>, cum: &mut Vec<f64>| {
            let mut p = [0.0; N_STATES];
            p.copy_from_slice(&s[..N_STATES]);
            times.push(t);
            pops.push(p);
            em.push(rates.q_r * rates.k_fl * s[PhotoState::S1 as usize]);
            cum.push(s[N_STATES]);
        };

    record(
        0.0,
        &state,
        &mut times,
        &mut populations,
        &mut emission_rate,
        &mut cumulative,
    );
    for (i, &(a, _)) in windows.iter().enumerate() {
        if a == 0.0 {
            window_start_counter[i] = state[N_STATES];
        }
    }

    let mut seg_start = 0.0f64;
    for seg in &seq.segments {
        let g8 = build_rate_matrix(rates, seg.laser488, seg.laser912)?;
        let mut g9 = [[0.0f64; N_STATES + 1]; N_STATES + 1];
        for i in 0..N_STATES {
            g9[i][..N_STATES].copy_from_slice(&g8[i]);
        }
        g9[N_STATES][PhotoState::S1 as usize] = rates.q_r * rates.k_fl;

        // Breakpoints inside this segment (offsets from its start):
        // uniform samples, microwave events, window edges.
        let mut offsets: Vec<f64> = (0..=SAMPLES_PER_SEGMENT)
            .map(|k| seg.duration * k as f64 / SAMPLES_PER_SEGMENT as f64)
            .collect();
        for ev in &seg.mw {
            offsets.push(ev.offset);
        }
        let seg_end = seg_start + seg.duration;
        for &(a, b) in windows {
            for edge in [a, b] {
                if edge > seg_start && edge < seg_end {
                    offsets.push(edge - seg_start);
                }
            }
        }
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        offsets.dedup();

        // Events sorted by offset, applied when the walk reaches them.
        let mut events: Vec<&MwEvent> = seg.mw.iter().collect();
        events.sort_by(|a, b| a.offset.partial_cmp(&b.offset).unwrap());
        let mut next_event = 0usize;

        let mut prev = 0.0f64;
        for &off in &offsets {
            if off > prev {
                let dt = off - prev;
                let mut m = g9;
                for row in m.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= dt;
                    }
                }
                let prop = expm(&m)?;
                state = mat_vec(&prop, &state);
                prev = off;
            }
            // Apply any events scheduled exactly here, in listed order.
            while next_event < events.len() && events[next_event].offset <= off {
                let ev = events[next_event];
                let mut p = [0.0; N_STATES];
                p.copy_from_slice(&state[..N_STATES]);
                apply_mw_pulse(&mut p, ev.pair, ev.fraction)?;
                state[..N_STATES].copy_from_slice(&p);
                next_event += 1;
            }
            let t_abs = seg_start + off;
            record(
                t_abs,
                &state,
                &mut times,
                &mut populations,
                &mut emission_rate,
                &mut cumulative,
            );
            for (i, &(a, b)) in windows.iter().enumerate() {
                if (t_abs - a).abs() <= 1e-15 * total.max(1.0) {
                    window_start_counter[i] = state[N_STATES];
                }
                if (t_abs - b).abs() <= 1e-15 * total.max(1.0)
                    && window_start_counter[i].is_finite()
                {
                    window_counts += state[N_STATES] - window_start_counter[i];
                    window_start_counter[i] = f64::NAN; // consumed
                }
            }
        }
        seg_start = seg_end;
    }

    Ok(PopulationTrace {
        times,
        populations,
        emission_rate,
        cumulative_counts: cumulative,
        window_counts,
    })
}

/// OADF readout contrast of a protocol containing microwave events:
/// (counts_with_mw - counts_reference) / counts_reference, where the
/// reference run zeroes every microwave transfer fraction. The counting
/// windows default to the 912-on segments plus a 10 us tail.
pub fn oadf_contrast(
    rates: &PhotoRates,
    seq: &PulseSequence,
    p0: &[f64; N_STATES],
    windows: Option<&[(f64, f64)]>,
) -> Result<f64> {
    if seq.segments.iter().all(|s| s.mw.is_empty()) {
        return Err(CoreError::invalid(
            "oadf_contrast: sequence has no microwave events",
        ));
    }
    let default_windows;
    let windows = match windows {
        Some(w) => w,
        None => {
            default_windows = seq.default_readout_windows();
            if default_windows.is_empty() {
                return Err(CoreError::invalid(
                    "oadf_contrast: no 912-on segment to read out",
                ));
            }
            &default_windows
        }
    };
    let with_mw = run_sequence(rates, seq, p0, windows)?;
    let reference = run_sequence(rates, &seq.without_mw(), p0, windows)?;
    if reference.window_counts <= 0.0 {
        return Err(CoreError::numerical(
            "oadf_contrast: reference run collected no photons",
        ));
    }
    Ok((with_mw.window_counts - reference.window_counts) / reference.window_counts)
}

/// Ground-state start.
pub fn ground_state() -> [f64; N_STATES] {
    let mut p = [0.0; N_STATES];
    p[PhotoState::S0 as usize] = 1.0;
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn protocol(pair: TripletPair) -> PulseSequence {
        PulseSequence::oadf_protocol(50e-6, 10e-6, 1e-6, pair, 1.0)
    }

    #[test]
    fn generator_columns_sum_to_zero() {
        for (l4, l9) in [(false, false), (true, false), (false, true), (true, true)] {
            let g = build_rate_matrix(&PhotoRates::cryo_80k(), l4, l9).unwrap();
            for col in 0..N_STATES {
                let s: f64 = (0..N_STATES).map(|row| g[row][col]).sum();
                assert!(s.abs() < 1e-9, "column {col} sums to {s}");
                for row in 0..N_STATES {
                    if row != col {
                        assert!(g[row][col] >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn steady_state_matches_null_space_oracle() {
        // Long 488-on segment reaches the CW steady state; compare to the
        // null space of the generator computed by Gaussian elimination
        // with the normalization row.
        let rates = PhotoRates::cryo_80k();
        let g = build_rate_matrix(&rates, true, false).unwrap();

        // Solve G p = 0, sum p = 1 by replacing the last equation.
        let mut a = [[0.0f64; N_STATES + 1]; N_STATES];
        for i in 0..N_STATES - 1 {
            for j in 0..N_STATES {
                a[i][j] = g[i][j];
            }
        }
        for j in 0..N_STATES {
            a[N_STATES - 1][j] = 1.0;
        }
        a[N_STATES - 1][N_STATES] = 1.0;
        // Gaussian elimination with partial pivoting.
        for col in 0..N_STATES {
            let mut piv = col;
            for r in col + 1..N_STATES {
                if a[r][col].abs() > a[piv][col].abs() {
                    piv = r;
                }
            }
            a.swap(col, piv);
            let d = a[col][col];
            assert!(d.abs() > 1e-12, "singular system");
            for j in col..=N_STATES {
                a[col][j] /= d;
            }
            for r in 0..N_STATES {
                if r != col && a[r][col] != 0.0 {
                    let f = a[r][col];
                    for j in col..=N_STATES {
                        a[r][j] -= f * a[col][j];
                    }
                }
            }
        }
        let oracle: Vec<f64> = (0..N_STATES).map(|i| a[i][N_STATES]).collect();

        // 50 ms of CW illumination (dominant timescale: ms triplet decay).
        let seq = PulseSequence {
            segments: vec![Segment {
                duration: 50e-3,
                laser488: true,
                laser912: false,
                mw: vec![],
            }],
        };
        let tr = run_sequence(&rates, &seq, &ground_state(), &[]).unwrap();
        let p_end = tr.populations.last().unwrap();
        for i in 0..N_STATES {
            assert_relative_eq!(p_end[i], oracle[i], max_relative = 1e-6, epsilon = 1e-12);
        }

        // Populations change < 1e-9 over the final 1% of the segment.
        let n = tr.populations.len();
        let p_99 = &tr.populations[n - 1 - SAMPLES_PER_SEGMENT / 100];
        for i in 0..N_STATES {
            assert!((p_end[i] - p_99[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn population_is_conserved_through_protocols() {
        for rates in [PhotoRates::cryo_80k(), PhotoRates::ambient()] {
            for pair in [TripletPair::XZ, TripletPair::YZ, TripletPair::XY] {
                let seq = protocol(pair);
                let tr =
                    run_sequence(&rates, &seq, &ground_state(), &seq.default_readout_windows())
                        .unwrap();
                for (t, p) in tr.times.iter().zip(&tr.populations) {
                    let s: f64 = p.iter().sum();
                    assert!(
                        (s - 1.0).abs() < 1e-9,
                        "population sum {s} at t = {t} (pair {pair:?})"
                    );
                    for v in p {
                        assert!(*v >= -1e-12, "negative population {v} at t = {t}");
                    }
                }
            }
        }
    }

    #[test]
    fn emission_counter_matches_analytic_s1_decay() {
        // Pure S1 decay with unit radiative yield: counts(t) = 1 - e^-kt.
        let rates = PhotoRates {
            k_exc: 0.0,
            k_fl: 3.0e8,
            q_r: 1.0,
            k_isc: [0.0; 3],
            k_pump912: 0.0,
            k_risc: [0.0; 3],
            k_t2_relax: 0.0,
            k_trip_decay: [0.0; 3],
            k_spin_relax: 0.0,
        };
        let tau = 1.0 / rates.k_fl;
        let mut p0 = [0.0; N_STATES];
        p0[PhotoState::S1 as usize] = 1.0;
        let seq = PulseSequence {
            segments: vec![Segment {
                duration: 5.0 * tau,
                laser488: false,
                laser912: false,
                mw: vec![],
            }],
        };
        let tr = run_sequence(&rates, &seq, &p0, &[(0.0, tau)]).unwrap();
        assert_relative_eq!(
            tr.window_counts,
            1.0 - (-1.0f64).exp(),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            *tr.cumulative_counts.last().unwrap(),
            1.0 - (-5.0f64).exp(),
            max_relative = 1e-9
        );
        // Emission rate starts at q_r * k_fl.
        assert_relative_eq!(tr.emission_rate[0], 3.0e8, max_relative = 1e-12);
    }

    #[test]
    fn window_counts_are_additive() {
        let rates = PhotoRates::cryo_80k();
        let seq = protocol(TripletPair::XZ);
        let t0 = 60.2e-6; // inside the readout segment
        let counts = |windows: &[(f64, f64)]| {
            run_sequence(&rates, &seq, &ground_state(), windows)
                .unwrap()
                .window_counts
        };
        let whole = counts(&[(t0, t0 + 0.6e-6)]);
        let split = counts(&[(t0, t0 + 0.25e-6), (t0 + 0.25e-6, t0 + 0.6e-6)]);
        assert_relative_eq!(whole, split, max_relative = 1e-12);
    }

    #[test]
    fn mw_pulse_swap_properties() {
        let mut p = [0.1, 0.05, 0.3, 0.2, 0.25, 0.04, 0.03, 0.03];
        let before = p;
        apply_mw_pulse(&mut p, TripletPair::XZ, 1.0).unwrap();
        assert_eq!(p[PhotoState::T1x as usize], before[PhotoState::T1z as usize]);
        assert_eq!(p[PhotoState::T1z as usize], before[PhotoState::T1x as usize]);
        let sum_before: f64 = before.iter().sum();
        let sum_after: f64 = p.iter().sum();
        assert_relative_eq!(sum_before, sum_after, max_relative = 1e-15);

        // Two full swaps restore the original.
        apply_mw_pulse(&mut p, TripletPair::XZ, 1.0).unwrap();
        assert_eq!(p, before);

        // Half transfer averages the pair.
        apply_mw_pulse(&mut p, TripletPair::XY, 0.5).unwrap();
        assert_relative_eq!(
            p[PhotoState::T1x as usize],
            p[PhotoState::T1y as usize],
            max_relative = 1e-15
        );

        assert!(apply_mw_pulse(&mut p, TripletPair::XY, 1.5).is_err());
        assert!(apply_mw_pulse(&mut p, TripletPair::XY, -0.1).is_err());
    }

    #[test]
    fn zero_selectivity_means_zero_contrast() {
        let rates = PhotoRates::cryo_80k().without_selectivity();
        let c = oadf_contrast(&rates, &protocol(TripletPair::XZ), &ground_state(), None).unwrap();
        assert!(c.abs() < 1e-9, "contrast {c} should vanish");
    }

    #[test]
    fn cryo_preset_gives_large_positive_xz_contrast() {
        let rates = PhotoRates::cryo_80k();
        let c = oadf_contrast(&rates, &protocol(TripletPair::XZ), &ground_state(), None).unwrap();
        assert!(c >= 0.40, "cryo x-z contrast {c} below target");
        assert!(c <= 0.60, "cryo x-z contrast {c} implausibly large");
        // The y-z pair responds too, somewhat weaker, same sign.
        let cyz =
            oadf_contrast(&rates, &protocol(TripletPair::YZ), &ground_state(), None).unwrap();
        assert!(cyz > 0.1 && cyz < c);
    }

    #[test]
    fn ambient_preset_gives_small_negative_contrast() {
        let rates = PhotoRates::ambient();
        let c = oadf_contrast(&rates, &protocol(TripletPair::XZ), &ground_state(), None).unwrap();
        assert!(
            (-0.05..=-0.02).contains(&c),
            "ambient x-z contrast {c} outside [-0.05, -0.02]"
        );
    }

    #[test]
    fn fast_spin_relaxation_erases_contrast() {
        let mut rates = PhotoRates::cryo_80k();
        rates.k_spin_relax = 1e9;
        let c = oadf_contrast(&rates, &protocol(TripletPair::XZ), &ground_state(), None).unwrap();
        assert!(c.abs() < 1e-3, "contrast {c} should be killed by relaxation");
    }

    #[test]
    fn contrast_errors_without_mw_or_photons() {
        let rates = PhotoRates::cryo_80k();
        let mut seq = protocol(TripletPair::XZ);
        seq.segments[1].mw.clear();
        assert!(oadf_contrast(&rates, &seq, &ground_state(), None).is_err());

        let mut dark = PhotoRates::cryo_80k();
        dark.q_r = 0.0;
        assert!(oadf_contrast(&dark, &protocol(TripletPair::XZ), &ground_state(), None).is_err());
    }

    #[test]
    fn sequence_validation() {
        let bad_duration = PulseSequence {
            segments: vec![Segment {
                duration: 0.0,
                laser488: false,
                laser912: false,
                mw: vec![],
            }],
        };
        assert!(bad_duration.validate().is_err());

        let bad_offset = PulseSequence {
            segments: vec![Segment {
                duration: 1e-6,
                laser488: false,
                laser912: false,
                mw: vec![MwEvent {
                    offset: 2e-6,
                    pair: TripletPair::XZ,
                    fraction: 1.0,
                }],
            }],
        };
        assert!(bad_offset.validate().is_err());

        assert!(PulseSequence { segments: vec![] }.validate().is_err());

        // Bad initial populations.
        let seq = protocol(TripletPair::XZ);
        let mut p = ground_state();
        p[0] = 0.5; // sums to 0.5
        assert!(run_sequence(&PhotoRates::cryo_80k(), &seq, &p, &[]).is_err());
        // Bad window.
        assert!(run_sequence(
            &PhotoRates::cryo_80k(),
            &seq,
            &ground_state(),
            &[(1.0, 0.5)]
        )
        .is_err());
    }
}
