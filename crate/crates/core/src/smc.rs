//! Smooth sliding mode controller for the two actuated crane axes.
//!
//! The trolley surface couples position and swing errors,
//! `s_x = α_x ẋ̃ + λ_x x̃ + α_θ θ̇̃ + λ_θ θ̃`, while the hoist surface is
//! `s_l = α_l l̇̃ + λ_l l̃`. The command is `u = −A⁻¹ b`, with `A` the 2×2
//! decoupling matrix mapping forces onto `ṡ` and `b` collecting the
//! equivalent-control terms, the compensation `d̂` and the boundary-layer
//! switching term.
//!
//! The `b` vector is evaluated term-for-term as published. On the nominal
//! plant it does not cancel the drift of `ṡ` exactly; see
//! [`sliding_rate_residual`] for the diagnostic that measures the mismatch.

use std::fmt;

use nalgebra::{Complex, Matrix2, Matrix6, Vector2, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{forward_dynamics, ControlInput, CraneParams, CraneState, DynamicsError};
use crate::reference::Reference;

/// Threshold on `|det A|` below which the decoupling matrix is treated as singular.
pub const DET_EPS: f64 = 1e-8;

/// Central-difference step for the closed-loop linearization.
pub const LINEARIZATION_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("decoupling matrix is singular (|det| = {det:e}); α_θ cos θ ≈ α_x l")]
    Singular { det: f64 },
    #[error("invalid gain: {0}")]
    InvalidGains(String),
    #[error("operating point must be an equilibrium with θ = 0 and zero rates")]
    NotAnEquilibrium,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Switching term applied outside (and inside) the boundary layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchingLaw {
    /// `sat(s/φ)`: continuous interpolation inside the layer.
    #[default]
    Saturation,
    /// `sign(s)`: the discontinuous baseline, kept for chattering comparisons.
    Signum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub alpha_x: f64,
    pub alpha_l: f64,
    pub alpha_theta: f64,
    pub lambda_x: f64,
    pub lambda_l: f64,
    pub lambda_theta: f64,
    pub k_x: f64,
    pub k_l: f64,
    pub phi_x: f64,
    pub phi_l: f64,
    pub switching: SwitchingLaw,
}

impl Default for ControllerGains {
    /// Tuned for the default 120 kg / 50 kg rig around a 1.5 m cable.
    ///
    /// Surface weights are scaled so that `A = I` at rest with `l = 1.5`,
    /// which puts `d̂` and the switching gains in newtons.
    fn default() -> Self {
        Self {
            alpha_x: 124.0,
            alpha_l: 50.0,
            alpha_theta: 6.0,
            lambda_x: 62.0,
            lambda_l: 100.0,
            lambda_theta: -717.0,
            k_x: 400.0,
            k_l: 400.0,
            phi_x: 20.0,
            phi_l: 40.0,
            switching: SwitchingLaw::Saturation,
        }
    }
}

impl ControllerGains {
    /// Positivity checks. The swing weights `α_θ`, `λ_θ` may take either sign.
    pub fn validate(&self) -> Result<(), ControlError> {
        let positive = [
            ("alpha_x", self.alpha_x),
            ("alpha_l", self.alpha_l),
            ("lambda_x", self.lambda_x),
            ("lambda_l", self.lambda_l),
            ("K_x", self.k_x),
            ("K_l", self.k_l),
            ("phi_x", self.phi_x),
            ("phi_l", self.phi_l),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ControlError::InvalidGains(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("alpha_theta", self.alpha_theta),
            ("lambda_theta", self.lambda_theta),
        ] {
            if !v.is_finite() {
                return Err(ControlError::InvalidGains(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Multiplies every surface weight and switching gain by `c`, leaving the
    /// boundary-layer widths alone.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            alpha_x: self.alpha_x * c,
            alpha_l: self.alpha_l * c,
            alpha_theta: self.alpha_theta * c,
            lambda_x: self.lambda_x * c,
            lambda_l: self.lambda_l * c,
            lambda_theta: self.lambda_theta * c,
            k_x: self.k_x * c,
            k_l: self.k_l * c,
            ..*self
        }
    }
}

/// `actual − desired` for each coordinate and rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingErrors {
    pub x: f64,
    pub l: f64,
    pub theta: f64,
    pub x_dot: f64,
    pub l_dot: f64,
    pub theta_dot: f64,
}

impl TrackingErrors {
    pub fn new(state: &CraneState, reference: &Reference) -> Self {
        Self {
            x: state.x - reference.x,
            l: state.l - reference.l,
            theta: state.theta - reference.theta,
            x_dot: state.x_dot - reference.x_dot,
            l_dot: state.l_dot - reference.l_dot,
            theta_dot: state.theta_dot - reference.theta_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwitchingState {
    pub s_x: f64,
    pub s_l: f64,
    pub errors: TrackingErrors,
}

fn surfaces(e: &TrackingErrors, gains: &ControllerGains) -> (f64, f64) {
    (
        gains.alpha_x * e.x_dot
            + gains.lambda_x * e.x
            + gains.alpha_theta * e.theta_dot
            + gains.lambda_theta * e.theta,
        gains.alpha_l * e.l_dot + gains.lambda_l * e.l,
    )
}

pub fn switching_variables(
    state: &CraneState,
    reference: &Reference,
    gains: &ControllerGains,
) -> SwitchingState {
    let errors = TrackingErrors::new(state, reference);
    let (s_x, s_l) = surfaces(&errors, gains);
    SwitchingState { s_x, s_l, errors }
}

/// Standard saturation: identity on `[−1, 1]`, `±1` outside.
pub fn saturation(z: f64) -> f64 {
    z.clamp(-1.0, 1.0)
}

fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn switching_term(law: SwitchingLaw, s: f64, phi: f64) -> f64 {
    match law {
        SwitchingLaw::Saturation => saturation(s / phi),
        SwitchingLaw::Signum => sign(s),
    }
}

/// Decoupling matrix `A` built from the nominal masses.
pub fn decoupling_matrix(
    state: &CraneState,
    nominal: &CraneParams,
    gains: &ControllerGains,
) -> Result<Matrix2<f64>, ControlError> {
    if !(state.l > 0.0) {
        return Err(DynamicsError::NonPositiveCable(state.l).into());
    }
    let (big_m, m, l) = (nominal.trolley_mass, nominal.load_mass, state.l);
    let (s, c) = state.theta.sin_cos();
    let coupling = gains.alpha_theta * c - gains.alpha_x * l;
    let a = Matrix2::new(
        -coupling / (big_m * l),
        coupling * s / (big_m * l),
        -gains.alpha_l * s / big_m,
        gains.alpha_l * (m * s * s + big_m) / (big_m * m),
    );
    let det = a.determinant();
    if !(det.abs() >= DET_EPS) {
        return Err(ControlError::Singular { det });
    }
    Ok(a)
}

/// The bracketed vector `b` of the control law.
pub fn reaching_vector(
    state: &CraneState,
    reference: &Reference,
    gains: &ControllerGains,
    d_hat: Vector2<f64>,
    nominal: &CraneParams,
) -> Vector2<f64> {
    let sw = switching_variables(state, reference, gains);
    let e = sw.errors;
    let g = nominal.gravity;
    let (s, c) = state.theta.sin_cos();
    let (l, l_dot, th_dot) = (state.l, state.l_dot, state.theta_dot);

    let b_x = gains.alpha_theta * (2.0 * l_dot * th_dot + g * s) / l + d_hat[0]
        - gains.alpha_x * reference.x_ddot
        - gains.alpha_theta * reference.theta_ddot
        + gains.lambda_x * e.x_dot
        + gains.lambda_theta * e.theta_dot
        + gains.k_x * switching_term(gains.switching, sw.s_x, gains.phi_x);
    let b_l = gains.alpha_l * (l * th_dot * th_dot + g * c) + d_hat[1]
        - gains.alpha_l * reference.l_ddot
        - gains.lambda_l * e.l_dot
        + gains.k_l * switching_term(gains.switching, sw.s_l, gains.phi_l);
    Vector2::new(b_x, b_l)
}

/// `u = −A⁻¹ b` via a direct 2×2 solve.
pub fn solve_decoupled(a: &Matrix2<f64>, b: &Vector2<f64>) -> Result<ControlInput, ControlError> {
    let det = a.determinant();
    if !(det.abs() >= DET_EPS) {
        return Err(ControlError::Singular { det });
    }
    let u_x = -(a[(1, 1)] * b[0] - a[(0, 1)] * b[1]) / det;
    let u_l = -(a[(0, 0)] * b[1] - a[(1, 0)] * b[0]) / det;
    Ok(ControlInput::new(u_x, u_l))
}

pub fn control_law(
    state: &CraneState,
    reference: &Reference,
    gains: &ControllerGains,
    d_hat: Vector2<f64>,
    nominal: &CraneParams,
) -> Result<ControlInput, ControlError> {
    let a = decoupling_matrix(state, nominal, gains)?;
    let b = reaching_vector(state, reference, gains, d_hat, nominal);
    solve_decoupled(&a, &b)
}

/// Rate of the switching variables under `u` on the nominal model.
pub fn sliding_rate(
    state: &CraneState,
    reference: &Reference,
    gains: &ControllerGains,
    u: &ControlInput,
    nominal: &CraneParams,
) -> Result<Vector2<f64>, ControlError> {
    let acc = forward_dynamics(state, u, &nominal.nominal())?;
    let e = TrackingErrors::new(state, reference);
    Ok(Vector2::new(
        gains.alpha_x * (acc[0] - reference.x_ddot)
            + gains.lambda_x * e.x_dot
            + gains.alpha_theta * (acc[2] - reference.theta_ddot)
            + gains.lambda_theta * e.theta_dot,
        gains.alpha_l * (acc[1] - reference.l_ddot) + gains.lambda_l * e.l_dot,
    ))
}

/// `ṡ + d̂ + K·switch(s)` on the nominal model. Zero when the law cancels the
/// modeled drift exactly; anything else is the part of `ṡ` the law leaves
/// uncompensated.
pub fn sliding_rate_residual(
    state: &CraneState,
    reference: &Reference,
    gains: &ControllerGains,
    d_hat: Vector2<f64>,
    u: &ControlInput,
    nominal: &CraneParams,
) -> Result<Vector2<f64>, ControlError> {
    let rate = sliding_rate(state, reference, gains, u, nominal)?;
    let sw = switching_variables(state, reference, gains);
    Ok(Vector2::new(
        rate[0] + d_hat[0] + gains.k_x * switching_term(gains.switching, sw.s_x, gains.phi_x),
        rate[1] + d_hat[1] + gains.k_l * switching_term(gains.switching, sw.s_l, gains.phi_l),
    ))
}

/// Eigenvalues of the closed loop linearized about an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub operating_point: CraneState,
    pub eigenvalues: Vec<Complex<f64>>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.eigenvalues.iter().all(|z| z.re < 0.0)
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "operating point x = {}, l = {}: {}",
            self.operating_point.x,
            self.operating_point.l,
            if self.passed() { "stable" } else { "UNSTABLE" }
        )?;
        for (i, z) in self.eigenvalues.iter().enumerate() {
            writeln!(f, "  eig[{i}] = {:+.6} {:+.6}i", z.re, z.im)?;
        }
        Ok(())
    }
}

/// Jacobian of the nominal closed loop `ż = f(z, u(z))` with `d̂ = 0`.
pub fn closed_loop_jacobian(
    gains: &ControllerGains,
    nominal: &CraneParams,
    operating_point: &CraneState,
) -> Result<Matrix6<f64>, ControlError> {
    let gains = ControllerGains {
        switching: SwitchingLaw::Saturation,
        ..*gains
    };
    let nominal = nominal.nominal();
    let reference = Reference::hold(operating_point.x, operating_point.l);
    let vector_field = |z: Vector6<f64>| -> Result<Vector6<f64>, ControlError> {
        let s = CraneState::from_vector(&z, 0.0);
        let u = control_law(&s, &reference, &gains, Vector2::zeros(), &nominal)?;
        let acc = forward_dynamics(&s, &u, &nominal)?;
        Ok(Vector6::new(z[3], z[4], z[5], acc[0], acc[1], acc[2]))
    };

    let z0 = operating_point.to_vector();
    let h = LINEARIZATION_STEP;
    let mut jac = Matrix6::zeros();
    for j in 0..6 {
        let mut dz = Vector6::zeros();
        dz[j] = h;
        let col = (vector_field(z0 + dz)? - vector_field(z0 - dz)?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Numerical stand-in for the surface stability conditions: linearize the
/// nominal closed loop and require every eigenvalue in the open left half-plane.
pub fn validate_surface_stability(
    gains: &ControllerGains,
    nominal: &CraneParams,
    operating_point: &CraneState,
) -> Result<StabilityReport, ControlError> {
    gains.validate()?;
    let op = operating_point;
    if op.theta != 0.0 || op.x_dot != 0.0 || op.l_dot != 0.0 || op.theta_dot != 0.0 {
        return Err(ControlError::NotAnEquilibrium);
    }
    let jac = closed_loop_jacobian(gains, nominal, op)?;
    let mut eigenvalues: Vec<_> = jac.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(StabilityReport {
        operating_point: *op,
        eigenvalues,
    })
}
