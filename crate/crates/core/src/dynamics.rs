//! Planar overhead crane plant: trolley on a rail, hoisted cable, swinging load.
//!
//! Generalized coordinates are `q = (x, l, θ)`: trolley position, cable length
//! and swing angle. The equation of motion is
//!
//! ```text
//! M(q) q̈ = h(q, q̇) + [u_x + f_x, u_l + f_l, 0]
//! ```
//!
//! where `f_x`, `f_l` collect the plant-only friction and disturbance forces.
//! The swing angle has no actuator.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pivot magnitude below which the 3×3 solve is considered singular.
pub const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("cable length must be positive, got {0}")]
    NonPositiveCable(f64),
    #[error("mass matrix is singular (pivot {pivot:e})")]
    SingularMassMatrix { pivot: f64 },
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("invalid plant parameter: {0}")]
    InvalidParams(String),
}

/// Full plant state. `t` rides along so time-varying disturbances can be
/// evaluated inside the integrator stages.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CraneState {
    pub x: f64,
    pub l: f64,
    pub theta: f64,
    pub x_dot: f64,
    pub l_dot: f64,
    pub theta_dot: f64,
    pub t: f64,
}

impl CraneState {
    /// State at rest with the load hanging straight down.
    pub fn at_rest(x: f64, l: f64) -> Self {
        Self {
            x,
            l,
            ..Self::default()
        }
    }

    pub fn q(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.l, self.theta)
    }

    pub fn q_dot(&self) -> Vector3<f64> {
        Vector3::new(self.x_dot, self.l_dot, self.theta_dot)
    }

    /// First-order form `(x, l, θ, ẋ, l̇, θ̇)`.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.x,
            self.l,
            self.theta,
            self.x_dot,
            self.l_dot,
            self.theta_dot,
        )
    }

    pub fn from_vector(v: &Vector6<f64>, t: f64) -> Self {
        Self {
            x: v[0],
            l: v[1],
            theta: v[2],
            x_dot: v[3],
            l_dot: v[4],
            theta_dot: v[5],
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite()) && self.t.is_finite()
    }

    /// Load anchor point in the rail frame, depth measured downward.
    pub fn load_position(&self) -> (f64, f64) {
        (
            self.x + self.l * self.theta.sin(),
            self.l * self.theta.cos(),
        )
    }
}

/// Externally applied force as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Disturbance {
    #[default]
    None,
    Constant {
        value: f64,
    },
    /// Zero before `time`, `value` from then on.
    Step {
        time: f64,
        value: f64,
    },
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Disturbance {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Disturbance::None => 0.0,
            Disturbance::Constant { value } => value,
            Disturbance::Step { time, value } => {
                if t >= time {
                    value
                } else {
                    0.0
                }
            }
            Disturbance::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (std::f64::consts::TAU * frequency * t + phase).sin(),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Disturbance::None)
    }
}

/// Physical parameters. Friction and disturbance terms only ever act on the
/// simulated plant; the controller is built from [`CraneParams::nominal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraneParams {
    pub trolley_mass: f64,
    pub load_mass: f64,
    pub gravity: f64,
    pub friction_viscous_x: f64,
    pub friction_viscous_l: f64,
    pub disturbance_x: Disturbance,
    pub disturbance_l: Disturbance,
}

impl Default for CraneParams {
    /// Placeholder values for a desk-scale rig, not measured data.
    fn default() -> Self {
        Self::ideal(120.0, 50.0, 9.81)
    }
}

impl CraneParams {
    /// Frictionless, undisturbed parameters.
    pub fn ideal(trolley_mass: f64, load_mass: f64, gravity: f64) -> Self {
        Self {
            trolley_mass,
            load_mass,
            gravity,
            friction_viscous_x: 0.0,
            friction_viscous_l: 0.0,
            disturbance_x: Disturbance::None,
            disturbance_l: Disturbance::None,
        }
    }

    /// The same masses and gravity with every unmodeled term stripped.
    pub fn nominal(&self) -> Self {
        Self::ideal(self.trolley_mass, self.load_mass, self.gravity)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("M", self.trolley_mass),
            ("m", self.load_mass),
            ("g", self.gravity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let non_negative = [
            ("friction_viscous_x", self.friction_viscous_x),
            ("friction_viscous_l", self.friction_viscous_l),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Friction plus disturbance forces on the two actuated coordinates.
    pub fn unmodeled_forces(&self, state: &CraneState) -> (f64, f64) {
        (
            -self.friction_viscous_x * state.x_dot + self.disturbance_x.eval(state.t),
            -self.friction_viscous_l * state.l_dot + self.disturbance_l.eval(state.t),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Trolley force (N).
    pub u_x: f64,
    /// Cable force (N).
    pub u_l: f64,
}

impl ControlInput {
    pub fn new(u_x: f64, u_l: f64) -> Self {
        Self { u_x, u_l }
    }

    /// Symmetric per-channel clamp.
    pub fn clamped(self, max_x: f64, max_l: f64) -> Self {
        Self {
            u_x: self.u_x.clamp(-max_x, max_x),
            u_l: self.u_l.clamp(-max_l, max_l),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u_x.is_finite() && self.u_l.is_finite()
    }
}

fn check_cable(state: &CraneState) -> Result<(), DynamicsError> {
    if state.l > 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::NonPositiveCable(state.l))
    }
}

/// Configuration-dependent inertia matrix, rows ordered `(x, l, θ)`.
pub fn mass_matrix(
    state: &CraneState,
    params: &CraneParams,
) -> Result<Matrix3<f64>, DynamicsError> {
    check_cable(state)?;
    let (big_m, m, l) = (params.trolley_mass, params.load_mass, state.l);
    let (s, c) = state.theta.sin_cos();
    Ok(Matrix3::new(
        big_m + m,
        m * s,
        m * l * c,
        m * s,
        m,
        0.0,
        m * l * c,
        0.0,
        m * l * l,
    ))
}

/// Coriolis, centripetal and gravity terms, on the right-hand side of the
/// equation of motion.
pub fn bias_vector(state: &CraneState, params: &CraneParams) -> Vector3<f64> {
    let (m, g) = (params.load_mass, params.gravity);
    let (l, l_dot, th_dot) = (state.l, state.l_dot, state.theta_dot);
    let (s, c) = state.theta.sin_cos();
    Vector3::new(
        m * th_dot * (th_dot * l * s - 2.0 * l_dot * c),
        m * (l * th_dot * th_dot + g * c),
        -m * l * (2.0 * l_dot * th_dot + g * s),
    )
}

/// Solves `a · z = b` by Gaussian elimination with partial pivoting.
pub fn solve3(a: &Matrix3<f64>, b: &Vector3<f64>) -> Result<Vector3<f64>, DynamicsError> {
    let mut m = *a;
    let mut r = *b;
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap_or(col);
        let pivot = m[(pivot_row, col)];
        if !(pivot.abs() >= PIVOT_EPS) {
            return Err(DynamicsError::SingularMassMatrix { pivot });
        }
        if pivot_row != col {
            m.swap_rows(pivot_row, col);
            r.swap_rows(pivot_row, col);
        }
        for row in col + 1..3 {
            let factor = m[(row, col)] / m[(col, col)];
            if factor != 0.0 {
                for k in col..3 {
                    m[(row, k)] -= factor * m[(col, k)];
                }
                r[row] -= factor * r[col];
            }
        }
    }
    let mut z = Vector3::zeros();
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[(row, k)] * z[k]).sum();
        z[row] = (r[row] - tail) / m[(row, row)];
    }
    Ok(z)
}

/// Right-hand side of the equation of motion, including unmodeled forces.
pub fn generalized_forces(
    state: &CraneState,
    u: &ControlInput,
    params: &CraneParams,
) -> Vector3<f64> {
    let (f_x, f_l) = params.unmodeled_forces(state);
    bias_vector(state, params) + Vector3::new(u.u_x + f_x, u.u_l + f_l, 0.0)
}

/// Generalized accelerations `(ẍ, l̈, θ̈)`.
pub fn forward_dynamics(
    state: &CraneState,
    u: &ControlInput,
    params: &CraneParams,
) -> Result<Vector3<f64>, DynamicsError> {
    let mass = mass_matrix(state, params)?;
    solve3(&mass, &generalized_forces(state, u, params))
}

/// Cable force that keeps `l̈ = 0` for the given trolley force.
///
/// `l̈` is affine in `u_l`, so two solves pin down the root exactly.
pub fn cable_holding_force(
    state: &CraneState,
    u_x: f64,
    params: &CraneParams,
) -> Result<f64, DynamicsError> {
    let free = forward_dynamics(state, &ControlInput::new(u_x, 0.0), params)?[1];
    let unit = forward_dynamics(state, &ControlInput::new(u_x, 1.0), params)?[1];
    Ok(-free / (unit - free))
}

/// `½ q̇ᵀ M(q) q̇ − m g l cos θ`.
pub fn mechanical_energy(state: &CraneState, params: &CraneParams) -> Result<f64, DynamicsError> {
    let q_dot = state.q_dot();
    let kinetic = 0.5 * q_dot.dot(&(mass_matrix(state, params)? * q_dot));
    let potential = -params.load_mass * params.gravity * state.l * state.theta.cos();
    Ok(kinetic + potential)
}

fn derivative<F>(
    state: &CraneState,
    params: &CraneParams,
    control: &F,
) -> Result<Vector6<f64>, DynamicsError>
where
    F: Fn(&CraneState) -> ControlInput,
{
    let acc = forward_dynamics(state, &control(state), params)?;
    Ok(Vector6::new(
        state.x_dot,
        state.l_dot,
        state.theta_dot,
        acc[0],
        acc[1],
        acc[2],
    ))
}

/// One classical RK4 step with a state-dependent control evaluated at every
/// stage.
pub fn integrate_step_with<F>(
    state: &CraneState,
    params: &CraneParams,
    dt: f64,
    control: F,
) -> Result<CraneState, DynamicsError>
where
    F: Fn(&CraneState) -> ControlInput,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::IntegrationFailure {
            t: state.t,
            reason: format!("step size must be positive, got {dt}"),
        });
    }
    let y = state.to_vector();
    let t = state.t;
    let stage = |v: Vector6<f64>, tt: f64| CraneState::from_vector(&v, tt);

    // A stage that leaves the valid domain is a failure of the step itself.
    let inner = |s: CraneState| {
        derivative(&s, params, &control).map_err(|e| match e {
            DynamicsError::NonPositiveCable(l) => DynamicsError::IntegrationFailure {
                t: s.t,
                reason: format!("cable length collapsed to {l} inside the step"),
            },
            other => other,
        })
    };

    let k1 = derivative(state, params, &control)?;
    let k2 = inner(stage(y + k1 * (0.5 * dt), t + 0.5 * dt))?;
    let k3 = inner(stage(y + k2 * (0.5 * dt), t + 0.5 * dt))?;
    let k4 = inner(stage(y + k3 * dt, t + dt))?;
    let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

    let out = stage(next, t + dt);
    if !out.is_finite() {
        return Err(DynamicsError::IntegrationFailure {
            t: out.t,
            reason: "non-finite state".into(),
        });
    }
    if out.l <= 0.0 {
        return Err(DynamicsError::IntegrationFailure {
            t: out.t,
            reason: format!("cable length collapsed to {}", out.l),
        });
    }
    Ok(out)
}

/// One RK4 step under a zero-order-held control input.
pub fn integrate_step(
    state: &CraneState,
    u: &ControlInput,
    params: &CraneParams,
    dt: f64,
) -> Result<CraneState, DynamicsError> {
    let held = *u;
    integrate_step_with(state, params, dt, move |_| held)
}
