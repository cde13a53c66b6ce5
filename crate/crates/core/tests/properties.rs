//! Property tests for the spec-level invariants that hold across whole
//! parameter ranges rather than at frozen points.

use proptest::prelude::*;
use std::f64::consts::PI;

use holonomy_core::abelian::AbelianHolonomy;
use holonomy_core::linalg::{
    c, cr, expm_hermitian, hermiticity_residual, max_norm, unitarity_residual, wrap_angle,
    CMatrix, CVector, I,
};
use holonomy_core::models::{
    latitude_loop, quadrupole_lab_hamiltonian, spin_half_hamiltonian, QuadrupoleSpec,
    SpinRegisterSpec,
};
use holonomy_core::nonadiabatic::{
    effective_angle, rabi_evolution, rebuild_from_parameters, two_qubit_geometric_gate,
    Polarization,
};
use holonomy_core::quadrupole::{evolve, Spin32Frame};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn winding_decomposition_roundtrips(gamma in -50.0f64..50.0) {
        let h = AbelianHolonomy::from_total(gamma);
        prop_assert!(h.principal > -PI && h.principal <= PI);
        let rebuilt = h.principal + 2.0 * PI * h.winding as f64;
        prop_assert!((rebuilt - gamma).abs() < 1e-9);
    }

    #[test]
    fn wrap_angle_is_principal_and_congruent(x in -1e4f64..1e4) {
        let w = wrap_angle(x);
        prop_assert!(w > -PI && w <= PI);
        let k = (x - w) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-6);
    }

    #[test]
    fn spin_half_hamiltonian_is_hermitian_traceless(
        bx in -3.0f64..3.0, by in -3.0f64..3.0, bz in -3.0f64..3.0
    ) {
        let h = spin_half_hamiltonian(&[bx, by, bz]);
        prop_assert!(hermiticity_residual(&h) < 1e-14);
        prop_assert!(h.trace().norm() < 1e-14);
    }

    #[test]
    fn latitude_loops_close(theta in 0.0f64..PI, omega_r in 0.05f64..5.0, b in 0.1f64..3.0) {
        let lp = latitude_loop(b, theta, omega_r, 16).unwrap();
        let defect = (lp.sample(16) - lp.sample(0)).norm();
        prop_assert!(defect <= 1e-9 * b.max(1.0));
    }

    #[test]
    fn effective_angle_range_and_limit(theta in 0.01f64..3.1, r in 0.0f64..2.0) {
        for pol in [Polarization::Plus, Polarization::Minus] {
            let ea = effective_angle(theta, r, 1.0, pol);
            prop_assert!((0.0..=PI).contains(&ea.theta_star));
        }
        let at_zero = effective_angle(theta, 0.0, 1.0, Polarization::Plus);
        prop_assert!((at_zero.theta_star - theta).abs() < 1e-12);
    }

    #[test]
    fn rabi_propagator_is_unitary_and_rebuildable(
        wpar in -2.0f64..2.0, wperp in 0.05f64..2.0, wr in 0.05f64..2.0, t in 0.0f64..20.0
    ) {
        let sol = rabi_evolution(wpar, wperp, wr, (1.0, 0.0), t).unwrap();
        prop_assert!(unitarity_residual(&sol.unitary) < 1e-12);
        prop_assert!(sol.zeta.norm() <= 1.0 + 1e-12);
        let rebuilt = rebuild_from_parameters(sol.zeta, sol.phi);
        prop_assert!(max_norm(&(rebuilt - &sol.unitary)) < 1e-10);
    }

    #[test]
    fn two_qubit_gate_is_diagonal_unitary_and_j_free(
        w1 in 0.2f64..2.0, w2_gap in 0.05f64..1.0, drive in 0.05f64..1.0,
        wr in 0.05f64..1.5, j in -5.0f64..5.0
    ) {
        let spec = SpinRegisterSpec {
            omega01: w1,
            omega02: w1 + w2_gap,
            j,
            omega1: drive,
            omega_r: wr,
        };
        let gate = two_qubit_geometric_gate(&spec).unwrap();
        prop_assert!(unitarity_residual(&gate.unitary) <= 1e-12);
        for r in 0..4 {
            for s in 0..4 {
                if r != s {
                    prop_assert!(gate.unitary[(r, s)].norm() < 1e-14);
                }
            }
        }
        let no_j = two_qubit_geometric_gate(&SpinRegisterSpec { j: 0.0, ..spec }).unwrap();
        prop_assert!(max_norm(&(&gate.unitary - &no_j.unitary)) <= 1e-12);
    }

    #[test]
    fn quadrupole_frame_identities_hold_everywhere(
        theta in 0.01f64..1.47, ratio_log in -4.0f64..0.0
    ) {
        let spec = QuadrupoleSpec {
            omega0: 1.0,
            omega1: 10f64.powf(ratio_log),
            theta,
        };
        let f = Spin32Frame::new(&spec).unwrap();
        prop_assert!(f.unitarity_residual <= 1e-12);
        prop_assert!(f.diagonalization_residual <= 1e-12);
    }

    #[test]
    fn quadrupole_lab_hamiltonian_is_isospectral(
        theta in 0.0f64..1.47, ratio in 0.01f64..1.0, t in 0.0f64..50.0
    ) {
        let spec = QuadrupoleSpec {
            omega0: 1.0,
            omega1: ratio,
            theta,
        };
        let h = quadrupole_lab_hamiltonian(&spec, t);
        prop_assert!(hermiticity_residual(&h) < 1e-12);
        let (vals, _) = holonomy_core::linalg::eigh(&h);
        for (v, want) in vals.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            prop_assert!((v - want).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrupole_evolution_preserves_norm(
        theta in 0.01f64..1.4, ratio in 0.01f64..1.0, t in 0.0f64..100.0,
        a in -1.0f64..1.0, b in -1.0f64..1.0, cc in -1.0f64..1.0, d in -1.0f64..1.0
    ) {
        let spec = QuadrupoleSpec {
            omega0: 1.0,
            omega1: ratio,
            theta,
        };
        let raw = CVector::from_vec(vec![c(a, b), c(cc, d), c(a - d, b + cc), cr(0.3)]);
        let norm = raw.norm();
        prop_assume!(norm > 1e-3);
        let psi0 = raw / cr(norm);
        let out = evolve(&spec, &psi0, t).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hermitian_exponentials_are_unitary(
        d00 in -2.0f64..2.0, d11 in -2.0f64..2.0, re in -2.0f64..2.0, im in -2.0f64..2.0,
        t in 0.0f64..30.0
    ) {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = cr(d00);
        h[(1, 1)] = cr(d11);
        h[(0, 1)] = c(re, im);
        h[(1, 0)] = c(re, -im);
        let u = expm_hermitian(&h, -I * cr(t));
        prop_assert!(unitarity_residual(&u) < 1e-12);
    }
}
