//! Parametric Hamiltonians and loop generators used throughout the crate.
//!
//! All models are rotation-type: a fixed operator conjugated along the loop,
//! so the instantaneous spectrum is constant. Hamiltonians are in
//! angular-frequency units with hbar = 1.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{c, cr, expm_hermitian, identity, kron, max_norm, pauli, CMatrix, I};

/// A point in parameter space.
pub type ParameterPoint = DVector<f64>;

/// Closed discretized curve `R(t)` in parameter space with period `T`.
///
/// The curve is stored as an analytic sampler plus a sample count;
/// derivatives are taken by differencing samples.
#[derive(Clone)]
pub struct ParameterLoop {
    sampler: Arc<dyn Fn(f64) -> ParameterPoint + Send + Sync>,
    pub period: f64,
    pub steps: usize,
    pub closure_tol: f64,
}

impl ParameterLoop {
    pub fn new(
        sampler: Arc<dyn Fn(f64) -> ParameterPoint + Send + Sync>,
        period: f64,
        steps: usize,
        closure_tol: f64,
    ) -> Result<Self> {
        if steps < 8 {
            return Err(Error::InvalidArgument(format!(
                "loop needs at least 8 samples, got {steps}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::DegenerateLoop(format!("invalid period {period}")));
        }
        let lp = Self {
            sampler,
            period,
            steps,
            closure_tol,
        };
        let defect = (lp.at(period) - lp.at(0.0)).norm();
        if defect > closure_tol {
            return Err(Error::LoopNotClosed {
                defect,
                tol: closure_tol,
            });
        }
        Ok(lp)
    }

    /// Evaluate the sampler at time `t` in `[0, T]`.
    pub fn at(&self, t: f64) -> ParameterPoint {
        (self.sampler)(t)
    }

    /// k-th grid sample, `k` in `0..=steps`; sample `steps` closes the loop.
    pub fn sample(&self, k: usize) -> ParameterPoint {
        self.at(self.period * k as f64 / self.steps as f64)
    }

    /// Same curve re-traversed with a different sample count.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        Self::new(self.sampler.clone(), self.period, steps, self.closure_tol)
    }

    /// Same geometric curve traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let sampler = self.sampler.clone();
        let period = self.period;
        Self {
            sampler: Arc::new(move |t| sampler(period - t)),
            period,
            steps: self.steps,
            closure_tol: self.closure_tol,
        }
    }
}

/// Map from a parameter point to an n-by-n Hermitian matrix, with declared
/// degeneracy structure `(level index, multiplicity)` for the sorted
/// spectrum.
#[derive(Clone)]
pub struct ParametricHamiltonian {
    pub dim: usize,
    eval: Arc<dyn Fn(&ParameterPoint) -> CMatrix + Send + Sync>,
    pub degeneracies: Vec<(usize, usize)>,
}

impl ParametricHamiltonian {
    pub fn new(
        dim: usize,
        eval: Arc<dyn Fn(&ParameterPoint) -> CMatrix + Send + Sync>,
        degeneracies: Vec<(usize, usize)>,
    ) -> Self {
        Self {
            dim,
            eval,
            degeneracies,
        }
    }

    /// Evaluate and verify Hermiticity against the type invariant.
    pub fn eval(&self, r: &ParameterPoint) -> Result<CMatrix> {
        let h = (self.eval)(r);
        let scale = max_norm(&h).max(f64::MIN_POSITIVE);
        let residual = crate::linalg::hermiticity_residual(&h);
        if residual > 1e-12 * scale {
            return Err(Error::NotHermitian { residual });
        }
        Ok(h)
    }

    /// Evaluate without the Hermiticity guard (hot paths that already trust
    /// the model).
    pub fn eval_unchecked(&self, r: &ParameterPoint) -> CMatrix {
        (self.eval)(r)
    }
}

/// Two coupled, non-identical spins in a circularly polarized transverse
/// field rotating at `omega_r`, plus a sigma_z x sigma_z coupling.
#[derive(Clone, Copy, Debug)]
pub struct SpinRegisterSpec {
    /// Larmor frequency of qubit 1 (rad/s).
    pub omega01: f64,
    /// Larmor frequency of qubit 2 (rad/s).
    pub omega02: f64,
    /// Ising coupling constant (rad/s).
    pub j: f64,
    /// Transverse drive amplitude (rad/s).
    pub omega1: f64,
    /// Drive rotation frequency (rad/s).
    pub omega_r: f64,
}

impl SpinRegisterSpec {
    pub fn validate(&self) -> Result<()> {
        for v in [self.omega01, self.omega02, self.j, self.omega1, self.omega_r] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument("non-finite spin register parameter".into()));
            }
        }
        if self.omega01 == self.omega02 {
            return Err(Error::InvalidArgument(
                "the two spins must not be identical (omega01 != omega02)".into(),
            ));
        }
        Ok(())
    }
}

/// Spin-3/2 quadrupole model parameters.
#[derive(Clone, Copy, Debug)]
pub struct QuadrupoleSpec {
    /// Quadrupole frequency (rad/s).
    pub omega0: f64,
    /// Rotation frequency of the symmetry axis (rad/s).
    pub omega1: f64,
    /// Tilt of the rotation cone (rad).
    pub theta: f64,
}

impl QuadrupoleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidArgument("omega0 must be positive".into()));
        }
        if !(self.theta >= 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidArgument(
                "theta must lie in [0, pi/2) so tan(alpha) = 2 tan(theta) stays finite".into(),
            ));
        }
        if !self.omega1.is_finite() {
            return Err(Error::InvalidArgument("omega1 must be finite".into()));
        }
        Ok(())
    }
}

/// Three-level template: fixed magnitudes and phases everywhere, with the
/// argument of the (1,2) element driven around a loop.
#[derive(Clone, Copy, Debug)]
pub struct ThreeLevelSpec {
    pub diag: [f64; 3],
    pub mag12: f64,
    pub mag13: f64,
    pub mag23: f64,
    pub phi13: f64,
    pub phi23: f64,
}

/// H = (1/2) B . sigma. The level splitting is |B|.
pub fn spin_half_hamiltonian(b: &[f64; 3]) -> CMatrix {
    let [sx, sy, sz] = pauli();
    (sx * cr(b[0]) + sy * cr(b[1]) + sz * cr(b[2])).scale(0.5)
}

/// Spin-1/2 model over a 3-component field parameter point.
pub fn spin_half_model() -> ParametricHamiltonian {
    ParametricHamiltonian::new(
        2,
        Arc::new(|r: &ParameterPoint| spin_half_hamiltonian(&[r[0], r[1], r[2]])),
        vec![(0, 1), (1, 1)],
    )
}

/// Uniform rotation of the field on the cone `theta = const`:
/// `B(t) = |B| (sin t cos w t, sin t sin w t, cos t)`, period `2 pi / |w|`.
pub fn latitude_loop(
    b_magnitude: f64,
    theta: f64,
    omega_r: f64,
    steps: usize,
) -> Result<ParameterLoop> {
    if omega_r == 0.0 {
        return Err(Error::DegenerateLoop(
            "zero rotation frequency gives no loop".into(),
        ));
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidArgument("theta must lie in [0, pi]".into()));
    }
    let period = TAU / omega_r.abs();
    let sign = omega_r.signum();
    let sampler = move |t: f64| {
        let phi = sign * omega_r.abs() * t;
        DVector::from_vec(vec![
            b_magnitude * theta.sin() * phi.cos(),
            b_magnitude * theta.sin() * phi.sin(),
            b_magnitude * theta.cos(),
        ])
    };
    ParameterLoop::new(Arc::new(sampler), period, steps, 1e-9 * b_magnitude.abs().max(1.0))
}

/// Field loop tracing a great circle through both poles (used to exercise
/// pivot fallback).
pub fn great_circle_loop(b_magnitude: f64, omega_r: f64, steps: usize) -> Result<ParameterLoop> {
    if omega_r == 0.0 {
        return Err(Error::DegenerateLoop(
            "zero rotation frequency gives no loop".into(),
        ));
    }
    let period = TAU / omega_r.abs();
    let w = omega_r.abs();
    let sampler = move |t: f64| {
        let phi = w * t;
        DVector::from_vec(vec![b_magnitude * phi.sin(), 0.0, b_magnitude * phi.cos()])
    };
    ParameterLoop::new(Arc::new(sampler), period, steps, 1e-9 * b_magnitude.abs().max(1.0))
}

/// Two-spin register Hamiltonian at drive phase `phase = omega_r t`:
/// `H = (1/2) B1.sigma (x) 1 + (1/2) 1 (x) B2.sigma + (J/4) sz (x) sz`,
/// with each `B_a` a constant z component `omega0a` plus a transverse
/// component of amplitude `omega1` rotating (clockwise) at `omega_r`.
pub fn two_spin_hamiltonian_phase(spec: &SpinRegisterSpec, phase: f64) -> CMatrix {
    let b1 = [
        spec.omega1 * phase.cos(),
        -spec.omega1 * phase.sin(),
        spec.omega01,
    ];
    let b2 = [
        spec.omega1 * phase.cos(),
        -spec.omega1 * phase.sin(),
        spec.omega02,
    ];
    let [_, _, sz] = pauli();
    let id = identity(2);
    let h1 = spin_half_hamiltonian(&b1);
    let h2 = spin_half_hamiltonian(&b2);
    kron(&h1, &id) + kron(&id, &h2) + kron(&sz, &sz).scale(spec.j / 4.0)
}

/// Two-spin register Hamiltonian at time `t`.
pub fn two_spin_hamiltonian_at(spec: &SpinRegisterSpec, t: f64) -> CMatrix {
    two_spin_hamiltonian_phase(spec, spec.omega_r * t)
}

/// Two-spin register as a parametric Hamiltonian over the drive phase,
/// parametrized by the point `(cos phi, sin phi)`.
pub fn two_spin_model(spec: SpinRegisterSpec) -> ParametricHamiltonian {
    ParametricHamiltonian::new(
        4,
        Arc::new(move |r: &ParameterPoint| {
            let phi = r[1].atan2(r[0]);
            two_spin_hamiltonian_phase(&spec, phi)
        }),
        vec![(0, 1), (1, 1), (2, 1), (3, 1)],
    )
}

/// Loop over the drive phase for time-driven models parametrized by
/// `(cos phi, sin phi)`.
pub fn phase_circle_loop(period: f64, steps: usize) -> Result<ParameterLoop> {
    let sampler = move |t: f64| {
        let phi = TAU * t / period;
        DVector::from_vec(vec![phi.cos(), phi.sin()])
    };
    ParameterLoop::new(Arc::new(sampler), period, steps, 1e-12)
}

/// Spin-3/2 angular momentum projections in the basis order
/// |3/2>, |-3/2>, |1/2>, |-1/2> (the +-3/2 pair first, then the +-1/2 pair).
pub fn spin32_generators() -> [CMatrix; 3] {
    let s = 3.0_f64.sqrt() / 2.0;
    let j1 = CMatrix::from_row_slice(
        4,
        4,
        &[
            cr(0.0), cr(0.0), cr(s),   cr(0.0),
            cr(0.0), cr(0.0), cr(0.0), cr(s),
            cr(s),   cr(0.0), cr(0.0), cr(1.0),
            cr(0.0), cr(s),   cr(1.0), cr(0.0),
        ],
    );
    let j2 = CMatrix::from_row_slice(
        4,
        4,
        &[
            cr(0.0),   cr(0.0),  c(0.0, -s), cr(0.0),
            cr(0.0),   cr(0.0),  cr(0.0),    c(0.0, s),
            c(0.0, s), cr(0.0),  cr(0.0),    c(0.0, -1.0),
            cr(0.0),   c(0.0, -s), c(0.0, 1.0), cr(0.0),
        ],
    );
    let j3 = CMatrix::from_row_slice(
        4,
        4,
        &[
            cr(1.5), cr(0.0),  cr(0.0), cr(0.0),
            cr(0.0), cr(-1.5), cr(0.0), cr(0.0),
            cr(0.0), cr(0.0),  cr(0.5), cr(0.0),
            cr(0.0), cr(0.0),  cr(0.0), cr(-0.5),
        ],
    );
    [j1, j2, j3]
}

/// Static quadrupole Hamiltonian `H0 = omega0 (J3^2 - j(j+1)/3)` for
/// j = 3/2; spectrum {+omega0 (x2), -omega0 (x2)}.
pub fn quadrupole_static_hamiltonian(omega0: f64) -> CMatrix {
    let [_, _, j3] = spin32_generators();
    (&j3 * &j3 - identity(4).scale(5.0 / 4.0)).scale(omega0)
}

/// Laboratory-frame quadrupole Hamiltonian at time `t`: the static form
/// conjugated by the tilt `theta` about J2 and the rotation `phi = omega1 t`
/// about J3. Isospectral in `t`.
pub fn quadrupole_lab_hamiltonian(spec: &QuadrupoleSpec, t: f64) -> CMatrix {
    let [_, j2, j3] = spin32_generators();
    let h0 = quadrupole_static_hamiltonian(spec.omega0);
    let tilt = expm_hermitian(&j2, -I * cr(spec.theta));
    let rot = expm_hermitian(&j3, -I * cr(spec.omega1 * t));
    let tilted = &tilt * h0 * tilt.adjoint();
    &rot * tilted * rot.adjoint()
}

/// Quadrupole lab rotation as a parametric Hamiltonian over
/// `(cos phi, sin phi)`; the +-3/2-like and +-1/2-like doublets stay doubly
/// degenerate along the loop.
pub fn quadrupole_model(spec: QuadrupoleSpec) -> ParametricHamiltonian {
    ParametricHamiltonian::new(
        4,
        Arc::new(move |r: &ParameterPoint| {
            let phi = r[1].atan2(r[0]);
            let [_, j2, j3] = spin32_generators();
            let h0 = quadrupole_static_hamiltonian(spec.omega0);
            let tilt = expm_hermitian(&j2, -I * cr(spec.theta));
            let rot = expm_hermitian(&j3, -I * cr(phi));
            &rot * (&tilt * h0 * tilt.adjoint()) * rot.adjoint()
        }),
        vec![(0, 2), (2, 2)],
    )
}

/// Three-level Hamiltonian with the (1,2) phase at `phi12`.
pub fn three_level_hamiltonian(spec: &ThreeLevelSpec, phi12: f64) -> CMatrix {
    let mut h = CMatrix::zeros(3, 3);
    h[(0, 0)] = cr(spec.diag[0]);
    h[(1, 1)] = cr(spec.diag[1]);
    h[(2, 2)] = cr(spec.diag[2]);
    h[(0, 1)] = cr(spec.mag12) * (I * cr(phi12)).exp();
    h[(0, 2)] = cr(spec.mag13) * (I * cr(spec.phi13)).exp();
    h[(1, 2)] = cr(spec.mag23) * (I * cr(spec.phi23)).exp();
    h[(1, 0)] = h[(0, 1)].conj();
    h[(2, 0)] = h[(0, 2)].conj();
    h[(2, 1)] = h[(1, 2)].conj();
    h
}

/// Three-level template as a parametric Hamiltonian over
/// `(cos phi12, sin phi12)`.
pub fn three_level_model(spec: ThreeLevelSpec) -> ParametricHamiltonian {
    ParametricHamiltonian::new(
        3,
        Arc::new(move |r: &ParameterPoint| {
            let phi12 = r[1].atan2(r[0]);
            three_level_hamiltonian(&spec, phi12)
        }),
        vec![(0, 1), (1, 1), (2, 1)],
    )
}
