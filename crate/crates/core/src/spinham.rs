//! Spin-1 Hamiltonian for a photoexcited molecular triplet: zero-field
//! splitting (ZFS) plus electron Zeeman term,
//!
//!   H/h = d (Sz^2 - (2/3) I) + e (Sx^2 - Sy^2) - gamma_el (B . S)
//!
//! with everything in ordinary frequency units (Hz). The molecular frame
//! is the ZFS principal frame; an applied field is expressed in that
//! frame, so powder averaging is a loop over field directions.
//!
//! Zero-field eigenstates in the m_S basis (|+1>, |0>, |-1>):
//! |0> ("T_z") at -2d/3, (|+1>+|-1>)/sqrt2 at d/3 + e, and
//! (|+1>-|-1>)/sqrt2 at d/3 - e. We label the *upper* of the split pair
//! T_x and the lower T_y, so the zero-field transition frequencies are
//! T_x - T_z = d + e, T_y - T_z = d - e, T_x - T_y = 2e.

use num_complex::Complex64;

use crate::linalg::{eigh3, Mat3, C64};
use crate::{CoreError, Result};

/// Physical constants used throughout the crate.
pub mod constants {
    /// Electron gyromagnetic ratio, ordinary frequency: 28.024 GHz/T.
    pub const GAMMA_EL_HZ_PER_T: f64 = 28.024e9;
    /// mu0 / 4 pi in SI (T m / A = T m^3 / (A m^2)).
    pub const MU0_OVER_4PI: f64 = 1e-7;
    /// Proton magnetic moment, J/T.
    pub const PROTON_MOMENT_J_PER_T: f64 = 1.4106e-26;
    /// Avogadro constant, 1/mol.
    pub const AVOGADRO: f64 = 6.02214076e23;
}

/// Zero-field-splitting parameters plus per-transition amplitude scales
/// used when synthesizing spectra. `d` and `e` are in Hz.
///
/// Canonical form has `0 <= e <= d/3`; `validate` additionally accepts
/// negative `e` (it only relabels x and y) but rejects `|e| > d/3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZfsParams {
    pub d: f64,
    pub e: f64,
    /// Amplitude scale of the T_x <-> T_z transition.
    pub amp_xz: f64,
    /// Amplitude scale of the T_y <-> T_z transition.
    pub amp_yz: f64,
    /// Amplitude scale of the T_x <-> T_y transition.
    pub amp_xy: f64,
}

impl ZfsParams {
    /// Canonical constructor: requires `0 <= e <= d/3` and non-negative
    /// amplitudes.
    pub fn new(d: f64, e: f64, amp_xz: f64, amp_yz: f64, amp_xy: f64) -> Result<Self> {
        let p = ZfsParams {
            d,
            e,
            amp_xz,
            amp_yz,
            amp_xy,
        };
        p.validate()?;
        if e < 0.0 {
            return Err(CoreError::invalid(
                "ZfsParams::new: canonical form requires e >= 0 (negative e only relabels x/y)",
            ));
        }
        Ok(p)
    }

    /// Check ranges without enforcing the canonical sign of `e`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d", self.d),
            ("e", self.e),
            ("amp_xz", self.amp_xz),
            ("amp_yz", self.amp_yz),
            ("amp_xy", self.amp_xy),
        ] {
            if !v.is_finite() {
                return Err(CoreError::invalid(format!("ZfsParams: {name} not finite")));
            }
        }
        if self.d <= 0.0 {
            return Err(CoreError::invalid("ZfsParams: d must be positive"));
        }
        if self.e.abs() > self.d / 3.0 {
            return Err(CoreError::invalid(format!(
                "ZfsParams: |e| = {:.6e} exceeds d/3 = {:.6e} (principal-frame convention)",
                self.e.abs(),
                self.d / 3.0
            )));
        }
        for (name, v) in [
            ("amp_xz", self.amp_xz),
            ("amp_yz", self.amp_yz),
            ("amp_xy", self.amp_xy),
        ] {
            if v < 0.0 {
                return Err(CoreError::invalid(format!(
                    "ZfsParams: {name} must be non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Zero-field transition frequencies (f_yz, f_xz, f_xy) = (d-e, d+e, 2e).
    pub fn zero_field_frequencies(&self) -> [f64; 3] {
        [self.d - self.e, self.d + self.e, 2.0 * self.e]
    }
}

/// Magnetic field vector in the ZFS principal frame, Tesla.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldVector {
    pub fn new(bx: f64, by: f64, bz: f64) -> Result<Self> {
        let f = FieldVector { bx, by, bz };
        if ![bx, by, bz].iter().all(|v| v.is_finite()) {
            return Err(CoreError::invalid("FieldVector: non-finite component"));
        }
        Ok(f)
    }

    pub fn zero() -> Self {
        FieldVector {
            bx: 0.0,
            by: 0.0,
            bz: 0.0,
        }
    }

    pub fn along(dir: [f64; 3], magnitude: f64) -> Result<Self> {
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if !(n.is_finite() && n > 0.0) || !magnitude.is_finite() {
            return Err(CoreError::invalid("FieldVector::along: bad direction"));
        }
        FieldVector::new(
            magnitude * dir[0] / n,
            magnitude * dir[1] / n,
            magnitude * dir[2] / n,
        )
    }

    pub fn magnitude(&self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }
}

/// Spin-1 operators in the m_S = (+1, 0, -1) basis.
#[derive(Clone, Copy, Debug)]
pub struct SpinOperators {
    pub sx: Mat3,
    pub sy: Mat3,
    pub sz: Mat3,
}

impl SpinOperators {
    pub fn new() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sx = Mat3::from_real([[0.0, r, 0.0], [r, 0.0, r], [0.0, r, 0.0]]);
        let mut sy = Mat3::zeros();
        sy.0[0][1] = Complex64::new(0.0, -r);
        sy.0[1][0] = Complex64::new(0.0, r);
        sy.0[1][2] = Complex64::new(0.0, -r);
        sy.0[2][1] = Complex64::new(0.0, r);
        let sz = Mat3::from_real([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]]);
        SpinOperators { sx, sy, sz }
    }

    /// n . S for a (not necessarily unit) direction vector.
    pub fn projected(&self, n: [f64; 3]) -> Mat3 {
        self.sx
            .scale(n[0])
            .add(&self.sy.scale(n[1]))
            .add(&self.sz.scale(n[2]))
    }
}

impl Default for SpinOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Eigenlevels of one Hamiltonian: ascending frequencies (Hz) and the
/// corresponding eigenvectors (columns) in the m_S basis.
#[derive(Clone, Copy, Debug)]
pub struct EnergyLevels {
    pub levels: [f64; 3],
    pub states: Mat3,
}

/// One allowed transition between eigenlevels `pair.0 < pair.1`
/// (ascending-energy indices), with `frequency` in Hz and the drive
/// coupling `weight` = |<i| n.S |j>|^2 for the requested drive axis.
#[derive(Clone, Copy, Debug)]
pub struct Transition {
    pub pair: (usize, usize),
    pub frequency: f64,
    pub weight: f64,
}

/// The three level pairs of a spin-1 system.
///
/// Pairs are labelled by ascending-level index: (0,1) is the low pair,
/// (0,2) the outer pair, (1,2) the high pair. At zero field with e > 0
/// these are (T_z,T_y), (T_z,T_x) and (T_y,T_x) respectively, which is
/// what the `yz` / `xz` / `xy` accessors refer to; the adiabatic
/// continuation of that naming is used at finite field.
#[derive(Clone, Copy, Debug)]
pub struct TransitionSet {
    /// Entries ordered [(0,1), (0,2), (1,2)].
    pub entries: [Transition; 3],
}

impl TransitionSet {
    pub fn yz(&self) -> &Transition {
        &self.entries[0]
    }
    pub fn xz(&self) -> &Transition {
        &self.entries[1]
    }
    pub fn xy(&self) -> &Transition {
        &self.entries[2]
    }

    /// Amplitude scale from `ZfsParams` for each pair slot.
    pub fn amplitude_for(zfs: &ZfsParams, slot: usize) -> f64 {
        match slot {
            0 => zfs.amp_yz,
            1 => zfs.amp_xz,
            2 => zfs.amp_xy,
            _ => unreachable!("slot must be 0..3"),
        }
    }
}

/// Build H/h in Hz in the m_S basis.
pub fn build_hamiltonian(zfs: &ZfsParams, field: &FieldVector) -> Result<Mat3> {
    zfs.validate()?;
    if !(field.bx.is_finite() && field.by.is_finite() && field.bz.is_finite()) {
        return Err(CoreError::invalid("build_hamiltonian: non-finite field"));
    }
    let ops = SpinOperators::new();
    let id = Mat3::identity();

    let sz2 = ops.sz.mul(&ops.sz);
    let sx2 = ops.sx.mul(&ops.sx);
    let sy2 = ops.sy.mul(&ops.sy);

    let zfs_term = sz2
        .add(&id.scale(-2.0 / 3.0))
        .scale(zfs.d)
        .add(&sx2.add(&sy2.scale(-1.0)).scale(zfs.e));

    let zeeman = ops
        .projected([field.bx, field.by, field.bz])
        .scale(-constants::GAMMA_EL_HZ_PER_T);

    Ok(zfs_term.add(&zeeman))
}

/// Diagonalize a spin Hamiltonian (Hz units). Levels come back ascending.
pub fn eigensolve(h: &Mat3) -> Result<EnergyLevels> {
    let e = eigh3(h)?;
    Ok(EnergyLevels {
        levels: e.values,
        states: e.vectors,
    })
}

/// Coupling weight |<i| n.S |j>|^2 between two eigenvectors for a drive
/// along `axis` (normalized internally).
pub fn coupling_weight(levels: &EnergyLevels, axis: [f64; 3], i: usize, j: usize) -> Result<f64> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(CoreError::invalid("coupling_weight: zero or bad axis"));
    }
    let ops = SpinOperators::new();
    let m = ops.projected([axis[0] / n, axis[1] / n, axis[2] / n]);
    let vi = levels.states.col(i);
    let vj = levels.states.col(j);
    let mvj = m.mul_vec(&vj);
    let mut amp = C64::new(0.0, 0.0);
    for k in 0..3 {
        amp += vi[k].conj() * mvj[k];
    }
    Ok(amp.norm_sqr())
}

/// Sum over the three Cartesian drive axes of |<i| S_a |j>|^2. Basis
/// independent, so the part perpendicular to any axis u is
/// `(total - along_u) `.
pub fn total_coupling_weight(levels: &EnergyLevels, i: usize, j: usize) -> f64 {
    let ops = SpinOperators::new();
    let vi = levels.states.col(i);
    let vj = levels.states.col(j);
    let mut total = 0.0;
    for m in [&ops.sx, &ops.sy, &ops.sz] {
        let mvj = m.mul_vec(&vj);
        let mut amp = C64::new(0.0, 0.0);
        for k in 0..3 {
            amp += vi[k].conj() * mvj[k];
        }
        total += amp.norm_sqr();
    }
    total
}

/// All three transitions of one center for a linear drive along `axis`.
pub fn transition_table(levels: &EnergyLevels, axis: [f64; 3]) -> Result<TransitionSet> {
    let mut entries = [Transition {
        pair: (0, 1),
        frequency: 0.0,
        weight: 0.0,
    }; 3];
    for (slot, &(i, j)) in [(0usize, 1usize), (0, 2), (1, 2)].iter().enumerate() {
        entries[slot] = Transition {
            pair: (i, j),
            frequency: levels.levels[j] - levels.levels[i],
            weight: coupling_weight(levels, axis, i, j)?,
        };
    }
    Ok(TransitionSet { entries })
}
