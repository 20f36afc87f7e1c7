//! Small dense linear algebra tailored to this crate: complex 3x3
//! Hermitian eigenproblems (the spin-1 Hamiltonian) and real NxN matrix
//! exponentials (rate-equation propagators).
//!
//! Everything here is deterministic down to the bit: fixed pivot order,
//! fixed summation order, no heap allocation in the hot paths.

use num_complex::Complex64;

use crate::{CoreError, Result};

pub type C64 = Complex64;

/// Complex 3x3 matrix, row-major. `m.0[row][col]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[C64; 3]; 3]);

impl Mat3 {
    pub fn zeros() -> Self {
        Mat3([[C64::new(0.0, 0.0); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(r: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = C64::new(r[i][j], 0.0);
            }
        }
        m
    }

    pub fn mul(&self, rhs: &Mat3) -> Mat3 {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..3 {
                    acc += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Mat3 {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat3) -> Mat3 {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.0 {
            for v in row {
                s += v.norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Root-sum-square of the off-diagonal entries.
    pub fn off_diag_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    s += self.0[i][j].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// Max |a_ij - conj(a_ji)| over all entries; 0 for exactly Hermitian.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64; 3]) -> [C64; 3] {
        let mut out = [C64::new(0.0, 0.0); 3];
        for i in 0..3 {
            for k in 0..3 {
                out[i] += self.0[i][k] * v[k];
            }
        }
        out
    }

    /// Column `j` as a vector.
    pub fn col(&self, j: usize) -> [C64; 3] {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }
}

/// Eigen-decomposition of a Hermitian 3x3 matrix.
///
/// `values` are ascending; `vectors.col(k)` is the unit eigenvector for
/// `values[k]`, phase-fixed so that its largest-magnitude component is
/// real and positive (first such component on ties). That convention
/// makes the output reproducible across runs and thread counts.
#[derive(Clone, Copy, Debug)]
pub struct Eigh3 {
    pub values: [f64; 3],
    pub vectors: Mat3,
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL_FACTOR: f64 = 1e-13;

/// Cyclic complex Jacobi eigensolver for a Hermitian 3x3 matrix.
///
/// Sweeps pivots (0,1), (0,2), (1,2) until the off-diagonal norm drops
/// below `1e-13 * ||H||_F`, accumulating the unitary. Errors if the input
/// is detectably non-Hermitian (defect above `1e-10 * ||H||_F`) or fails
/// to converge within 100 sweeps (does not happen for finite inputs, but
/// the guard keeps the loop total).
pub fn eigh3(h: &Mat3) -> Result<Eigh3> {
    let norm = h.fro_norm();
    if !norm.is_finite() {
        return Err(CoreError::invalid("eigh3: non-finite matrix"));
    }
    if h.hermiticity_defect() > 1e-10 * norm.max(1.0) {
        return Err(CoreError::invalid(format!(
            "eigh3: matrix is not Hermitian (defect {:.3e})",
            h.hermiticity_defect()
        )));
    }
    if norm == 0.0 {
        return Ok(Eigh3 {
            values: [0.0; 3],
            vectors: Mat3::identity(),
        });
    }

    let mut a = *h;
    // Symmetrize exactly so rounding in the caller cannot bias pivots.
    for i in 0..3 {
        a.0[i][i] = C64::new(a.0[i][i].re, 0.0);
        for j in (i + 1)..3 {
            let avg = 0.5 * (a.0[i][j] + a.0[j][i].conj());
            a.0[i][j] = avg;
            a.0[j][i] = avg.conj();
        }
    }
    let mut q = Mat3::identity();
    let tol = JACOBI_TOL_FACTOR * norm;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if a.off_diag_norm() < tol {
            converged = true;
            break;
        }
        for &(p, r) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a.0[p][r];
            let abs = apq.norm();
            if abs == 0.0 {
                continue;
            }
            // Phase factor that makes the pivot entry real, then a real
            // Jacobi rotation that annihilates it.
            let phase = apq / abs; // e^{i phi}
            let app = a.0[p][p].re;
            let aqq = a.0[r][r].re;
            let theta = (aqq - app) / (2.0 * abs);
            let t = if theta >= 0.0 {
                1.0 / (theta + (1.0 + theta * theta).sqrt())
            } else {
                -1.0 / (-theta + (1.0 + theta * theta).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;

            // R = I except R[p][p]=c, R[p][r]=s, R[r][p]=-s*conj(phase),
            // R[r][r]=c*conj(phase); then A <- R^H A R, Q <- Q R.
            let mut rot = Mat3::identity();
            rot.0[p][p] = C64::new(c, 0.0);
            rot.0[p][r] = C64::new(s, 0.0);
            rot.0[r][p] = -phase.conj() * s;
            rot.0[r][r] = phase.conj() * c;

            a = rot.adjoint().mul(&a).mul(&rot);
            q = q.mul(&rot);
            // Pin the annihilated pair and diagonal to exact form.
            a.0[p][r] = C64::new(0.0, 0.0);
            a.0[r][p] = C64::new(0.0, 0.0);
            a.0[p][p] = C64::new(a.0[p][p].re, 0.0);
            a.0[r][r] = C64::new(a.0[r][r].re, 0.0);
        }
    }
    if !converged && a.off_diag_norm() >= tol {
        return Err(CoreError::numerical(
            "eigh3: Jacobi sweep limit reached without convergence",
        ));
    }

    // Ascending sort, stable in the original diagonal order.
    let mut order = [0usize, 1, 2];
    let vals = [a.0[0][0].re, a.0[1][1].re, a.0[2][2].re];
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());

    let mut values = [0.0; 3];
    let mut vectors = Mat3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = vals[src];
        let mut col = q.col(src);
        // Phase convention: largest-|component| entry real positive.
        let mut k_best = 0;
        let mut best = -1.0;
        for (k, v) in col.iter().enumerate() {
            let n = v.norm();
            if n > best {
                best = n;
                k_best = k;
            }
        }
        if best > 0.0 {
            let ph = col[k_best] / best;
            for v in col.iter_mut() {
                *v *= ph.conj();
            }
            col[k_best] = C64::new(col[k_best].re.abs(), 0.0);
        }
        for i in 0..3 {
            vectors.0[i][dst] = col[i];
        }
    }

    Ok(Eigh3 { values, vectors })
}

/// Infinity norm (max absolute row sum) of a real matrix.
fn inf_norm<const N: usize>(m: &[[f64; N]; N]) -> f64 {
    let mut worst = 0.0f64;
    for row in m {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        worst = worst.max(s);
    }
    worst
}

fn mat_mul<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..N {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// exp(M) for a real NxN matrix by scaling-and-squaring around an
/// order-6 Taylor core.
///
/// The scaled matrix satisfies ||M/2^s||_inf <= 1/64, where the order-6
/// truncation error (~4e-17) is below machine epsilon, so the overall
/// error is rounding-dominated (~2^s * eps). Rate-equation propagators
/// built here get composed over thousands of steps and must conserve
/// probability to ~1e-9 end to end, which this budget satisfies with
/// orders of magnitude to spare.
pub fn expm<const N: usize>(m: &[[f64; N]; N]) -> Result<[[f64; N]; N]> {
    const THETA: f64 = 0.015625;
    let norm = inf_norm(m);
    if !norm.is_finite() {
        return Err(CoreError::invalid("expm: non-finite matrix"));
    }

    let s = if norm > THETA {
        ((norm / THETA).log2().ceil() as u32).min(64)
    } else {
        0
    };
    let scale = 1.0 / (2.0f64).powi(s as i32);
    let mut a = *m;
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }

    // Taylor: I + A + A^2/2! + ... + A^6/6!
    let mut result = [[0.0; N]; N];
    for (i, row) in result.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut term = result; // A^0 = I
    for k in 1..=6u32 {
        term = mat_mul(&term, &a);
        let inv_k = 1.0 / k as f64;
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v *= inv_k;
            }
        }
        for i in 0..N {
            for j in 0..N {
                result[i][j] += term[i][j];
            }
        }
    }

    for _ in 0..s {
        result = mat_mul(&result, &result);
    }
    Ok(result)
}

/// y = M x for a real NxN matrix.
pub fn mat_vec<const N: usize>(m: &[[f64; N]; N], x: &[f64; N]) -> [f64; N] {
    let mut out = [0.0; N];
    for i in 0..N {
        let mut acc = 0.0;
        for j in 0..N {
            acc += m[i][j] * x[j];
        }
        out[i] = acc;
    }
    out
}
