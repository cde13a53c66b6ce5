//! Spin-3/2 quadrupole pipeline: rotating-frame Hamiltonian, two-step block
//! diagonalization, non-Abelian non-adiabatic connection blocks, and the
//! resulting two-qubit evolution operator.
//!
//! Frames. The lab Hamiltonian conjugates the static quadrupole form by a
//! tilt `theta` about J2 and a rotation `phi = omega1 t` about J3. Passing
//! to the frame co-rotating at `omega1` gives the time-independent
//! `H1 = e^{-i theta J2} H0 e^{i theta J2} - omega1 J3`; the convenient
//! working frame is the tilted one,
//! `H1' = e^{i theta J2} H1 e^{-i theta J2}
//!      = H0 - omega1 (cos(theta) J3 - sin(theta) J1)`,
//! whose block matrix has the (1/2,-1/2) doublet coupled through
//! `sin(theta) sigma_1`. The first step `U2` removes that coupling exactly
//! (a rotation by `alpha/2` about `sigma_2` in the doublet, with
//! `tan(alpha) = 2 tan(theta)`); the second step `U3` finishes the
//! diagonalization exactly, staying element-wise close to the closed-form
//! beta-block rotation whose residual identities are tracked in
//! [`Spin32Frame`]. All downstream operators (connection, evolution, gate)
//! are built from the exact factorization, so the oracle comparisons hold
//! at integrator precision.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::linalg::{
    c, cr, eigh, expm_hermitian, hermiticity_residual, identity, max_norm, pauli, CMatrix,
    CVector, I,
};
use crate::models::{quadrupole_static_hamiltonian, spin32_generators, QuadrupoleSpec};

/// `H1 = e^{-i theta J2} (omega0 J3^2 - omega1 Jt3) e^{i theta J2} - 5 omega0/4`
/// with `Jt3 = e^{i theta J2} J3 e^{-i theta J2}`; computed by exact matrix
/// conjugation. Time-independent.
pub fn rotating_frame_hamiltonian(spec: &QuadrupoleSpec) -> Result<CMatrix> {
    spec.validate()?;
    let [_, j2, j3] = spin32_generators();
    let h0 = quadrupole_static_hamiltonian(spec.omega0);
    let tilt = expm_hermitian(&j2, -I * cr(spec.theta));
    Ok(&tilt * h0 * tilt.adjoint() - j3.scale(spec.omega1))
}

/// The tilted working frame `H1' = H0 - omega1 (cos(theta) J3 - sin(theta) J1)`.
///
/// Its explicit block matrix is
/// `[[omega0 - (3/2) omega1 cos(theta) sigma3,  xi I2],
///   [xi I2, -omega0 - (1/2) omega1 cos(theta) sigma3 + omega1 sin(theta) sigma1]]`
/// with `xi = omega1 (sqrt(3)/2) sin(theta)` in the off-diagonal block (the
/// `sin(theta)` factor there is required for consistency with the exact
/// conjugation; see `tilted_frame_consistency` in the tests).
pub fn tilted_rotating_frame_hamiltonian(spec: &QuadrupoleSpec) -> Result<CMatrix> {
    spec.validate()?;
    let [j1, _, j3] = spin32_generators();
    let h0 = quadrupole_static_hamiltonian(spec.omega0);
    Ok(h0 - (j3.scale(spec.theta.cos()) - j1.scale(spec.theta.sin())).scale(spec.omega1))
}

/// Closed-form doublet-mixing data of the two-step diagonalization.
#[derive(Clone, Debug)]
pub struct Spin32Frame {
    /// Auxiliary angle, `tan(alpha) = 2 tan(theta)`.
    pub alpha: f64,
    /// Coupling parameter `omega1 (sqrt(3)/2) sin(theta)`.
    pub xi: f64,
    /// Diagonal entries of the upper doublet block after the first step.
    pub lambda1: [f64; 2],
    /// Diagonal entries of the lower doublet block after the first step.
    pub lambda2: [f64; 2],
    /// `k_i = (lambda1_i - lambda2_i) / (2 xi)`.
    pub k: [f64; 2],
    /// Mixing ratio branch continuous with the identity at theta -> 0:
    /// `mu_i = k_i - sqrt(1 + k_i^2)`.
    pub mu: [f64; 2],
    pub beta1: [f64; 2],
    pub beta2: [f64; 2],
    /// `max_i |beta1_i^2 + beta2_i^2 - 1|`.
    pub unitarity_residual: f64,
    /// `max_i |xi (beta1_i^2 - beta2_i^2) + (lambda1_i - lambda2_i) beta1_i beta2_i|`.
    pub diagonalization_residual: f64,
}

impl Spin32Frame {
    pub fn new(spec: &QuadrupoleSpec) -> Result<Self> {
        spec.validate()?;
        let theta = spec.theta;
        let alpha = (2.0 * theta.tan()).atan();
        let xi = spec.omega1 * 3.0_f64.sqrt() / 2.0 * theta.sin();
        let cos_ratio = if theta == 0.0 { 1.0 } else { theta.cos() / alpha.cos() };
        let lambda1 = [
            spec.omega0 - 1.5 * spec.omega1 * theta.cos(),
            spec.omega0 + 1.5 * spec.omega1 * theta.cos(),
        ];
        let lambda2 = [
            -spec.omega0 - 0.5 * spec.omega1 * cos_ratio,
            -spec.omega0 + 0.5 * spec.omega1 * cos_ratio,
        ];
        let (k, mu, beta1, beta2, unit_res, diag_res);
        if xi == 0.0 {
            k = [f64::INFINITY, f64::INFINITY];
            mu = [0.0, 0.0];
            beta1 = [1.0, 1.0];
            beta2 = [0.0, 0.0];
            unit_res = 0.0;
            diag_res = 0.0;
        } else {
            let mut kk = [0.0f64; 2];
            let mut mm = [0.0f64; 2];
            let mut b1 = [0.0f64; 2];
            let mut b2 = [0.0f64; 2];
            let mut ur: f64 = 0.0;
            let mut dr: f64 = 0.0;
            for i in 0..2 {
                kk[i] = (lambda1[i] - lambda2[i]) / (2.0 * xi);
                // identity-continuous root (mu -> 0 as theta -> 0), written
                // without the large-k cancellation
                mm[i] = -1.0 / (kk[i] + (1.0 + kk[i] * kk[i]).sqrt());
                b1[i] = 1.0 / (1.0 + mm[i] * mm[i]).sqrt();
                b2[i] = mm[i] * b1[i];
                ur = ur.max((b1[i] * b1[i] + b2[i] * b2[i] - 1.0).abs());
                dr = dr.max(
                    (xi * (b1[i] * b1[i] - b2[i] * b2[i])
                        + (lambda1[i] - lambda2[i]) * b1[i] * b2[i])
                        .abs(),
                );
            }
            k = kk;
            mu = mm;
            beta1 = b1;
            beta2 = b2;
            unit_res = ur;
            diag_res = dr;
        }
        Ok(Self {
            alpha,
            xi,
            lambda1,
            lambda2,
            k,
            mu,
            beta1,
            beta2,
            unitarity_residual: unit_res,
            diagonalization_residual: diag_res,
        })
    }

    /// The closed-form beta-block rotation
    /// `[[beta1, beta2], [-beta2, beta1]]` (diagonal 2x2 beta blocks).
    pub fn beta_rotation(&self) -> CMatrix {
        let mut u = CMatrix::zeros(4, 4);
        u[(0, 0)] = cr(self.beta1[0]);
        u[(1, 1)] = cr(self.beta1[1]);
        u[(0, 2)] = cr(self.beta2[0]);
        u[(1, 3)] = cr(self.beta2[1]);
        u[(2, 0)] = cr(-self.beta2[0]);
        u[(3, 1)] = cr(-self.beta2[1]);
        u[(2, 2)] = cr(self.beta1[0]);
        u[(3, 3)] = cr(self.beta1[1]);
        u
    }
}

/// Exact two-step diagonalization of the tilted rotating-frame
/// Hamiltonian.
#[derive(Clone, Debug)]
pub struct BlockDiagonalization {
    /// Doublet rotation `diag(1_2, e^{i (alpha/2) sigma_2})`:
    /// `u2^dagger H1' u2` has no `sigma_1` term left in the lower doublet.
    pub u2: CMatrix,
    /// Exact finisher; element-wise close to the closed-form beta rotation.
    pub u3: CMatrix,
    pub frame: Spin32Frame,
    /// Eigenvalues ordered as (3/2-like, -3/2-like, 1/2-like, -1/2-like).
    pub energies: [f64; 4],
    /// `||offdiag((u2 u3)^dagger H1' (u2 u3))||`.
    pub offdiag_residual: f64,
    /// `||u3 - beta_rotation||`, the closed-form approximation quality.
    pub beta_vs_exact: f64,
    /// Largest gap between the exact energies and the closed-form
    /// two-by-two eigenvalue mixes.
    pub energy_vs_closed_form: f64,
}

impl BlockDiagonalization {
    /// `W = u2 u3`, the diagonalizer of `H1'`.
    pub fn w(&self) -> CMatrix {
        &self.u2 * &self.u3
    }

    /// `W_full = e^{-i theta J2} u2 u3`, the diagonalizer of `H1`.
    pub fn w_full(&self, spec: &QuadrupoleSpec) -> CMatrix {
        let [_, j2, _] = spin32_generators();
        expm_hermitian(&j2, -I * cr(spec.theta)) * self.w()
    }
}

/// Diagonalize `H1'` in two steps: the exact doublet rotation `u2`, then
/// the exact pair-mixing finisher `u3` (eigensolve ordered and phased to
/// the closed-form beta structure). At `theta = 0` both steps are the
/// identity.
pub fn block_diagonalize(spec: &QuadrupoleSpec) -> Result<BlockDiagonalization> {
    spec.validate()?;
    let frame = Spin32Frame::new(spec)?;
    let h1p = tilted_rotating_frame_hamiltonian(spec)?;
    let [sx, sy, _] = pauli();
    let _ = sx;
    let mut u2 = identity(4);
    if spec.theta != 0.0 {
        let rot = expm_hermitian(&sy, I * cr(frame.alpha / 2.0));
        for r in 0..2 {
            for s in 0..2 {
                u2[(2 + r, 2 + s)] = rot[(r, s)];
            }
        }
    }
    let m = u2.adjoint() * &h1p * &u2;

    // exact finisher: eigensolve, columns matched to the closed-form
    // two-by-two mixes and phased so the dominant entry is real positive
    let (vals, vecs) = eigh(&m);
    let sum1 = [
        0.5 * (frame.lambda1[0] + frame.lambda2[0]),
        0.5 * (frame.lambda1[1] + frame.lambda2[1]),
    ];
    let disc = [
        (frame.xi * frame.xi + 0.25 * (frame.lambda1[0] - frame.lambda2[0]).powi(2)).sqrt(),
        (frame.xi * frame.xi + 0.25 * (frame.lambda1[1] - frame.lambda2[1]).powi(2)).sqrt(),
    ];
    let targets = [
        sum1[0] + disc[0],
        sum1[1] + disc[1],
        sum1[0] - disc[0],
        sum1[1] - disc[1],
    ];
    let mut used = [false; 4];
    let mut order = [0usize; 4];
    let mut energy_gap: f64 = 0.0;
    for (slot, target) in targets.iter().enumerate() {
        let mut best = (usize::MAX, f64::INFINITY);
        for (j, &v) in vals.iter().enumerate() {
            if !used[j] && (v - target).abs() < best.1 {
                best = (j, (v - target).abs());
            }
        }
        used[best.0] = true;
        order[slot] = best.0;
        energy_gap = energy_gap.max(best.1);
    }
    let mut u3 = CMatrix::zeros(4, 4);
    let mut energies = [0.0f64; 4];
    for (slot, &j) in order.iter().enumerate() {
        let mut col = vecs.column(j).into_owned();
        let mut lead = 0usize;
        let mut best = 0.0;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > best {
                best = z.norm();
                lead = i;
            }
        }
        let phase = col[lead] / cr(col[lead].norm());
        col *= phase.conj();
        u3.set_column(slot, &col);
        energies[slot] = vals[j];
    }

    let w = &u2 * &u3;
    let d = w.adjoint() * &h1p * &w;
    let mut offdiag = d.clone();
    for i in 0..4 {
        offdiag[(i, i)] = c(0.0, 0.0);
    }
    let offdiag_residual = max_norm(&offdiag);
    let beta_vs_exact = max_norm(&(&u3 - frame.beta_rotation()));
    Ok(BlockDiagonalization {
        u2,
        u3,
        frame,
        energies,
        offdiag_residual,
        beta_vs_exact,
        energy_vs_closed_form: energy_gap,
    })
}

/// Gauge-potential object of the uniform rotation: the closed-form block
/// coefficients and the numeric route, both time-independent and
/// Hermitian, with their mismatch reported rather than absorbed.
#[derive(Clone, Debug)]
pub struct QuadrupoleConnection {
    /// Closed-form block matrix built from the beta coefficients:
    /// `[[A_{3/2}, A^{tr}], [A^{tr T}, A_{1/2}]]` with
    /// `A_{3/2} = a32 + b32 sigma3 + c32 sigma1` and likewise for the
    /// lower doublet.
    pub closed_form: CMatrix,
    /// Numeric route `i U^dagger (dU/dphi)` with `U(phi) = U1(phi) u2 u3`
    /// and only `U1` depending on the rotation phase.
    pub numeric: CMatrix,
    pub a32: f64,
    pub b32: f64,
    pub c32: f64,
    pub a12: f64,
    pub b12: f64,
    pub c12: f64,
    /// `||closed_form - numeric||`, reported, not patched.
    pub mismatch: f64,
    pub hermiticity_residual: f64,
    /// Max drift of the numeric route recomputed at three rotation phases.
    pub time_drift: f64,
}

/// Evaluate the connection both ways (closed-form coefficients and the
/// finite-difference `i U^dagger dU/dphi` route at three rotation phases).
pub fn connection(spec: &QuadrupoleSpec) -> Result<QuadrupoleConnection> {
    let bd = block_diagonalize(spec)?;
    let f = &bd.frame;
    let ca = f.alpha.cos();
    let sa = f.alpha.sin();
    let (b11, b12_) = (f.beta1[0], f.beta1[1]);
    let (b21, b22) = (f.beta2[0], f.beta2[1]);

    let a32 = 0.25 * (3.0 * b11 * b11 - 3.0 * b12_ * b12_ + b21 * b21 * ca - b22 * b22 * ca);
    let b32 = 0.25 * (3.0 * b11 * b11 + 3.0 * b12_ * b12_ + b21 * b21 * ca + b22 * b22 * ca);
    let c32 = -0.5 * sa * b21 * b22;
    let a12 = 0.25 * (3.0 * b21 * b21 - 3.0 * b22 * b22 + b11 * b11 * ca - b12_ * b12_ * ca);
    let b12c = 0.25 * (3.0 * b21 * b21 + 3.0 * b22 * b22 + b11 * b11 * ca + b12_ * b12_ * ca);
    let c12 = -0.5 * sa * b11 * b12_;

    let [s1, _, s3] = pauli();
    let block = |a: f64, b: f64, cc: f64| -> CMatrix {
        identity(2).scale(a) + s3.scale(b) + s1.scale(cc)
    };
    let a_tr = {
        // (1/2) beta1 beta2 (3 - cos alpha) sigma3 + (1/2) sin(alpha) beta2 sigma1 beta1
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = cr(0.5 * b11 * b21 * (3.0 - ca));
        m[(1, 1)] = cr(-0.5 * b12_ * b22 * (3.0 - ca));
        m[(0, 1)] = cr(0.5 * sa * b21 * b12_);
        m[(1, 0)] = cr(0.5 * sa * b22 * b11);
        m
    };
    let mut closed = CMatrix::zeros(4, 4);
    let top = block(a32, b32, c32);
    let bottom = block(a12, b12c, c12);
    for r in 0..2 {
        for s in 0..2 {
            closed[(r, s)] = top[(r, s)];
            closed[(2 + r, 2 + s)] = bottom[(r, s)];
            closed[(r, 2 + s)] = a_tr[(r, s)];
            closed[(2 + r, s)] = a_tr[(s, r)];
        }
    }

    // numeric route: i U^dagger dU/dphi with U(phi) = U1(phi) u2 u3 and
    // dU/dphi = (dU1/dphi) u2 u3 = -i J3 U(phi); evaluated at three
    // rotation phases to demonstrate phase independence
    let [_, _, j3] = spin32_generators();
    let w = bd.w();
    let mut numeric = CMatrix::zeros(4, 4);
    let mut time_drift: f64 = 0.0;
    let mut first: Option<CMatrix> = None;
    for phi in [0.3, 1.7, 4.1] {
        let u = expm_hermitian(&j3, -I * cr(phi)) * &w;
        let du = &j3 * &u * (-I);
        let a = u.adjoint() * du * I;
        match &first {
            None => {
                numeric = a.clone();
                first = Some(a);
            }
            Some(f0) => {
                time_drift = time_drift.max(max_norm(&(&a - f0)));
            }
        }
    }
    // cross-check the analytic dU against a central finite difference
    let fd = {
        let h = 1e-6;
        let u_at = |p: f64| expm_hermitian(&j3, -I * cr(p)) * &w;
        let du = (u_at(0.3 + h) - u_at(0.3 - h)).scale(0.5 / h);
        u_at(0.3).adjoint() * du * I
    };
    let fd_check = max_norm(&(&fd - &numeric));
    debug_assert!(fd_check < 1e-8, "finite-difference route off: {fd_check:.3e}");

    let mismatch = max_norm(&(&closed - &numeric));
    let hermiticity = hermiticity_residual(&closed).max(hermiticity_residual(&numeric));
    Ok(QuadrupoleConnection {
        closed_form: closed,
        numeric,
        a32,
        b32,
        c32,
        a12,
        b12: b12c,
        c12,
        mismatch,
        hermiticity_residual: hermiticity,
        time_drift,
    })
}

/// Rotating-frame evolution `psi(t) = e^{-i H1 t} psi0`, computed through
/// the exact frame factorization `W_full e^{-iDt} W_full^dagger`.
///
/// To compare with a lab-frame integration, transform the lab state back
/// with `U1(t)^dagger`; at `t = T = 2 pi/omega1` that bookkeeping factor is
/// `e^{-i 2 pi J3} = -1`.
pub fn evolve(spec: &QuadrupoleSpec, psi0: &CVector, t: f64) -> Result<CVector> {
    if psi0.len() != 4 {
        return Err(Error::InvalidArgument("state must be a 4-vector".into()));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "state must be normalized (|psi| = {norm})"
        )));
    }
    let bd = block_diagonalize(spec)?;
    let wf = bd.w_full(spec);
    let mut phases = CMatrix::zeros(4, 4);
    for (i, e) in bd.energies.iter().enumerate() {
        phases[(i, i)] = (-I * cr(e * t)).exp();
    }
    Ok(&wf * phases * wf.adjoint() * psi0)
}

/// Two-qubit evolution operator in the dressed eigenbasis: the holonomic
/// factor times the dynamic phases,
/// `U(t) = e^{-i omega1 t A_dress} e^{-i D t}`
/// with `A_dress = W_full^dagger J3 W_full` (so
/// `e^{-i omega1 t A_dress} = W_full^dagger U1(t) W_full` exactly). Equals
/// the lab propagator conjugated into the dressed basis; mixing between the
/// +-3/2-like and +-1/2-like qubit subspaces enters through the
/// off-diagonal blocks of `A_dress`.
#[derive(Clone, Debug)]
pub struct QuadrupoleGate {
    pub unitary: CMatrix,
    pub dynamic_phases: [f64; 4],
    pub unitarity_defect: f64,
}

pub fn two_qubit_gate(spec: &QuadrupoleSpec, t: f64) -> Result<QuadrupoleGate> {
    let bd = block_diagonalize(spec)?;
    let wf = bd.w_full(spec);
    let [_, _, j3] = spin32_generators();
    let a_dress = wf.adjoint() * &j3 * &wf;
    let holonomic = expm_hermitian(&a_dress, -I * cr(spec.omega1 * t));
    let mut phases = CMatrix::zeros(4, 4);
    let mut dyn_ph = [0.0f64; 4];
    for (i, e) in bd.energies.iter().enumerate() {
        dyn_ph[i] = e * t;
        phases[(i, i)] = (-I * cr(dyn_ph[i])).exp();
    }
    let u = holonomic * phases;
    let unitarity_defect = crate::linalg::unitarity_residual(&u);
    Ok(QuadrupoleGate {
        unitary: u,
        dynamic_phases: dyn_ph,
        unitarity_defect,
    })
}

/// Default one-cycle duration `T = 2 pi / omega1`.
pub fn cycle_time(spec: &QuadrupoleSpec) -> f64 {
    TAU / spec.omega1.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{angle_distance, unitarity_residual};
    use crate::models::{phase_circle_loop, quadrupole_lab_hamiltonian, quadrupole_model};
    use crate::propagator::propagate;
    use approx::assert_relative_eq;

    const SPEC: QuadrupoleSpec = QuadrupoleSpec {
        omega0: 1.0,
        omega1: 0.1,
        theta: std::f64::consts::FRAC_PI_4,
    };

    #[test]
    fn rotating_frame_is_diagonal_at_zero_tilt() {
        let spec = QuadrupoleSpec { theta: 0.0, ..SPEC };
        let h1 = rotating_frame_hamiltonian(&spec).unwrap();
        let [_, _, j3] = spin32_generators();
        let want = quadrupole_static_hamiltonian(spec.omega0) - j3.scale(spec.omega1);
        assert!(max_norm(&(h1 - want)) < 1e-13);
    }

    #[test]
    fn tilted_frame_consistency() {
        // exact conjugation vs the explicit block matrix (off-diagonal
        // carries the sin(theta) factor)
        let h1 = rotating_frame_hamiltonian(&SPEC).unwrap();
        let [_, j2, _] = spin32_generators();
        let tilt = expm_hermitian(&j2, I * cr(SPEC.theta));
        let h1p_from_h1 = &tilt * h1 * tilt.adjoint();
        let h1p = tilted_rotating_frame_hamiltonian(&SPEC).unwrap();
        assert!(max_norm(&(h1p_from_h1 - &h1p)) < 1e-12);

        let xi = SPEC.omega1 * 3.0_f64.sqrt() / 2.0 * SPEC.theta.sin();
        assert_relative_eq!(h1p[(0, 2)].re, xi, epsilon = 1e-13);
        assert_relative_eq!(h1p[(2, 3)].re, SPEC.omega1 * SPEC.theta.sin(), epsilon = 1e-13);
    }

    #[test]
    fn rotating_frame_matches_lab_eigenvalues_at_zero_rotation() {
        let spec = QuadrupoleSpec { omega1: 0.0, ..SPEC };
        let h1 = rotating_frame_hamiltonian(&spec).unwrap();
        let (vals, _) = eigh(&h1);
        assert_relative_eq!(vals[0], -spec.omega0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], -spec.omega0, epsilon = 1e-12);
        assert_relative_eq!(vals[2], spec.omega0, epsilon = 1e-12);
        assert_relative_eq!(vals[3], spec.omega0, epsilon = 1e-12);
    }

    #[test]
    fn frame_identities_hold_exactly() {
        for &theta in &[0.1, 0.4, std::f64::consts::FRAC_PI_4, 1.2] {
            for &ratio in &[1e-4, 1e-2, 0.3, 1.0] {
                let spec = QuadrupoleSpec {
                    omega0: 1.0,
                    omega1: ratio,
                    theta,
                };
                let f = Spin32Frame::new(&spec).unwrap();
                assert!(f.unitarity_residual <= 1e-12, "theta {theta} ratio {ratio}");
                assert!(
                    f.diagonalization_residual <= 1e-12,
                    "theta {theta} ratio {ratio}: {:.3e}",
                    f.diagonalization_residual
                );
            }
        }
    }

    #[test]
    fn trivial_tilt_gives_identity_transformations() {
        let spec = QuadrupoleSpec { theta: 0.0, ..SPEC };
        let bd = block_diagonalize(&spec).unwrap();
        assert!(max_norm(&(&bd.u2 - identity(4))) < 1e-13);
        assert!(max_norm(&(&bd.u3 - identity(4))) < 1e-13);
    }

    #[test]
    fn block_diagonalization_is_exact() {
        let bd = block_diagonalize(&SPEC).unwrap();
        assert!(bd.offdiag_residual <= 1e-10, "{:.3e}", bd.offdiag_residual);
        // u2 cleaned the lower doublet: the intermediate matrix has no
        // sigma1 component there
        let h1p = tilted_rotating_frame_hamiltonian(&SPEC).unwrap();
        let m = bd.u2.adjoint() * h1p * &bd.u2;
        assert!(m[(2, 3)].norm() < 1e-12);
        // the closed-form beta rotation is a good approximant (exact only
        // in the adiabatic regime) and the energies track its mixes
        assert!(bd.beta_vs_exact < 0.2, "{:.3}", bd.beta_vs_exact);
        assert!(bd.energy_vs_closed_form < 5e-3 * SPEC.omega0);
    }

    #[test]
    fn diagonalizer_matches_eigensolver_subspaces() {
        let bd = block_diagonalize(&SPEC).unwrap();
        let h1p = tilted_rotating_frame_hamiltonian(&SPEC).unwrap();
        let w = bd.w();
        for slot in 0..4 {
            let col = w.column(slot).into_owned();
            let r = (&h1p * &col - &col * cr(bd.energies[slot])).norm();
            assert!(r < 1e-10, "column {slot} residual {r:.3e}");
        }
    }

    #[test]
    fn connection_is_hermitian_and_static() {
        let conn = connection(&SPEC).unwrap();
        assert!(conn.hermiticity_residual <= 1e-12);
        assert!(conn.time_drift <= 1e-12);
    }

    #[test]
    fn connection_blocks_vanish_at_zero_tilt() {
        let spec = QuadrupoleSpec { theta: 0.0, ..SPEC };
        let conn = connection(&spec).unwrap();
        // A reduces to J3: diagonal, no transverse block, no sigma1 parts
        assert!(conn.c32.abs() < 1e-14);
        assert!(conn.c12.abs() < 1e-14);
        for r in 0..2 {
            for s in 0..2 {
                assert!(conn.numeric[(r, 2 + s)].norm() < 1e-13);
            }
        }
        assert_relative_eq!(conn.numeric[(0, 0)].re, 1.5, epsilon = 1e-12);
        assert_relative_eq!(conn.numeric[(2, 2)].re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn adiabatic_regime_suppresses_offdiagonal_connection() {
        let spec = QuadrupoleSpec {
            omega1: 1e-4,
            ..SPEC
        };
        let conn = connection(&spec).unwrap();
        let scale = max_norm(&conn.numeric);
        let mut tr_norm: f64 = 0.0;
        for r in 0..2 {
            for s in 0..2 {
                tr_norm = tr_norm.max(conn.numeric[(r, 2 + s)].norm());
            }
        }
        assert!(tr_norm <= 1e-3 * scale, "A_tr {tr_norm:.3e} vs scale {scale:.3}");
        assert!(conn.c32.abs() <= 1e-3 * scale);
    }

    #[test]
    fn closed_form_vs_numeric_mismatch_is_reported() {
        let conn = connection(&SPEC).unwrap();
        // the closed-form coefficients are an adiabatic approximant; at
        // omega1/omega0 = 0.1 the mismatch is visible and must be surfaced,
        // not absorbed
        assert!(conn.mismatch > 1e-8);

        // in the adiabatic regime the identity parts, sigma3 parts and the
        // transverse block all converge to the numeric route; the in-block
        // sigma1 part of the lower doublet keeps a systematic sign flip
        // relative to the numeric chart orientation, which we document as
        // the residual discrepancy rather than patch
        let spec = QuadrupoleSpec {
            omega1: 1e-4,
            ..SPEC
        };
        let conn_ad = connection(&spec).unwrap();
        let num = &conn_ad.numeric;
        let a32_num = 0.5 * (num[(0, 0)].re + num[(1, 1)].re);
        let b32_num = 0.5 * (num[(0, 0)].re - num[(1, 1)].re);
        let c32_num = num[(0, 1)].re;
        let a12_num = 0.5 * (num[(2, 2)].re + num[(3, 3)].re);
        let b12_num = 0.5 * (num[(2, 2)].re - num[(3, 3)].re);
        let c12_num = num[(2, 3)].re;
        assert!((conn_ad.a32 - a32_num).abs() < 1e-3);
        assert!((conn_ad.b32 - b32_num).abs() < 1e-3);
        assert!((conn_ad.c32 - c32_num).abs() < 1e-3);
        assert!((conn_ad.a12 - a12_num).abs() < 1e-3);
        assert!((conn_ad.b12 - b12_num).abs() < 1e-3);
        // the sign flip: printed c12 = -(1/2) sin(alpha) beta11 beta12 vs
        // the numeric chart's +(1/2) sin(alpha)
        assert!((conn_ad.c12 + c12_num).abs() < 1e-3);
        assert!(conn_ad.mismatch > 0.1 * conn_ad.c12.abs());
        let mut tr_gap: f64 = 0.0;
        for r in 0..2 {
            for s in 0..2 {
                tr_gap = tr_gap
                    .max((conn_ad.closed_form[(r, 2 + s)] - num[(r, 2 + s)]).norm());
            }
        }
        assert!(tr_gap < 1e-3, "transverse block gap {tr_gap:.3e}");
    }

    #[test]
    fn evolve_preserves_norm_and_identity_at_zero_time() {
        let psi0 = CVector::from_vec(vec![cr(0.5), cr(0.5), cr(0.5), cr(0.5)]);
        let out = evolve(&SPEC, &psi0, 0.0).unwrap();
        assert!((out - &psi0).norm() < 1e-12);
        let out = evolve(&SPEC, &psi0, 7.3).unwrap();
        assert_relative_eq!(out.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evolve_is_per_level_phases_at_zero_tilt() {
        let spec = QuadrupoleSpec { theta: 0.0, ..SPEC };
        let psi0 = CVector::from_vec(vec![cr(1.0), cr(0.0), cr(0.0), cr(0.0)]);
        let t = 3.1;
        let out = evolve(&spec, &psi0, t).unwrap();
        let h1 = rotating_frame_hamiltonian(&spec).unwrap();
        let expected_phase = -h1[(0, 0)].re * t;
        assert!(
            angle_distance(out[0].arg(), expected_phase) < 1e-12,
            "phase {} vs {}",
            out[0].arg(),
            expected_phase
        );
        assert!((out[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evolve_matches_lab_frame_oracle_over_one_period() {
        let spec = SPEC;
        let t = cycle_time(&spec);
        let model = quadrupole_model(spec);
        let lp = phase_circle_loop(t, 64).unwrap();
        let steps = 400_000;
        let res = propagate(&model, &lp, t, steps).unwrap();
        // lab state transformed back into the rotating frame:
        // U1(T)^dagger = (e^{-i 2 pi J3})^dagger = -1
        let [_, _, j3] = spin32_generators();
        let u1t = expm_hermitian(&j3, -I * cr(spec.omega1 * t));
        let rot_oracle = u1t.adjoint() * &res.u;
        let psi0 = CVector::from_vec(vec![cr(0.5), cr(0.5), cr(0.5), cr(0.5)]);
        let direct = evolve(&spec, &psi0, t).unwrap();
        let via_oracle = rot_oracle * &psi0;
        let err = (direct - via_oracle).norm();
        assert!(err <= 1e-6, "evolve vs oracle: {err:.3e}");
        // sanity: the lab Hamiltonian the oracle integrated is the real one
        let h_check = quadrupole_lab_hamiltonian(&spec, 0.37 * t);
        let h_model = model.eval(&lp.at(0.37 * t)).unwrap();
        assert!(max_norm(&(h_check - h_model)) < 1e-12);
    }

    #[test]
    fn gate_is_unitary_and_mixes_basis_states() {
        let t = cycle_time(&SPEC) / 3.0;
        let gate = two_qubit_gate(&SPEC, t).unwrap();
        assert!(gate.unitarity_defect <= 1e-10);
        let mut max_off: f64 = 0.0;
        for r in 0..4 {
            for s in 0..4 {
                if r != s {
                    max_off = max_off.max(gate.unitary[(r, s)].norm());
                }
            }
        }
        assert!(max_off >= 1e-3, "no basis-state mixing: {max_off:.3e}");
    }

    #[test]
    fn gate_is_diagonal_at_zero_tilt() {
        let spec = QuadrupoleSpec { theta: 0.0, ..SPEC };
        let gate = two_qubit_gate(&spec, cycle_time(&spec) / 3.0).unwrap();
        for r in 0..4 {
            for s in 0..4 {
                if r != s {
                    assert!(gate.unitary[(r, s)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gate_unitary_for_random_specs() {
        for (i, &(theta, ratio)) in [(0.3, 0.05), (0.7, 0.5), (1.1, 1.0), (0.2, 0.9)]
            .iter()
            .enumerate()
        {
            let spec = QuadrupoleSpec {
                omega0: 1.0,
                omega1: ratio,
                theta,
            };
            let gate = two_qubit_gate(&spec, 1.7 + i as f64).unwrap();
            assert!(gate.unitarity_defect <= 1e-10);
        }
    }

    #[test]
    fn dressed_gate_equals_lab_propagator_in_dressed_basis() {
        let spec = QuadrupoleSpec {
            omega0: 1.0,
            omega1: 0.2,
            theta: 0.6,
        };
        let t = 0.4 * cycle_time(&spec);
        let model = quadrupole_model(spec);
        let lp = phase_circle_loop(cycle_time(&spec), 64).unwrap();
        let res = propagate(&model, &lp, cycle_time(&spec), 300_000);
        // propagate over [0, 0.4 T]: reparametrize by integrating the full
        // period loop but stopping early is not supported; integrate a
        // dedicated sub-span instead
        drop(res);
        let steps = 150_000;
        let mut u = identity(4);
        let dt = t / steps as f64;
        for k in 0..steps {
            let tm = (k as f64 + 0.5) * dt;
            let h = quadrupole_lab_hamiltonian(&spec, tm);
            u = expm_hermitian(&h, -I * cr(dt)) * u;
        }
        let bd = block_diagonalize(&spec).unwrap();
        let wf = bd.w_full(&spec);
        let dressed_oracle = wf.adjoint() * u * &wf;
        let gate = two_qubit_gate(&spec, t).unwrap();
        let err = max_norm(&(&gate.unitary - &dressed_oracle));
        assert!(err <= 1e-6, "dressed gate vs oracle: {err:.3e}");
        assert!(unitarity_residual(&gate.unitary) <= 1e-10);
    }
}
