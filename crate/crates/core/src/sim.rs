//! Closed-loop runs: RK4 plant at `dt_plant`, controller and adaptation at
//! `dt_control` with the command held in between.

use std::thread;

use log::{debug, warn};
use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dynamics::{integrate_step, ControlInput, CraneParams, CraneState, DynamicsError};
use crate::fuzzy::{FuzzyAxis, FuzzyError};
use crate::reference::{clearance_check, ObstacleSpec, Reference, Trajectory};
use crate::smc::{
    control_law, sliding_rate_residual, switching_variables, validate_surface_stability,
    ControlError, ControllerGains, StabilityReport,
};

/// Fraction of control updates allowed to hit the singular set before a run aborts.
pub const FAULT_BUDGET: f64 = 0.01;

/// Fraction of the run, taken from the end, averaged for steady-state metrics.
pub const STEADY_STATE_WINDOW: f64 = 0.1;

/// Settling band as a fraction of the commanded trolley travel.
pub const SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("gain set fails the surface stability check:\n{}", format_reports(.0))]
    UnstableGains(Vec<StabilityReport>),
    #[error("plant integration failed: {0}")]
    Integration(#[from] DynamicsError),
    #[error("controller fault at t = {t}: {source}")]
    Controller { t: f64, source: ControlError },
    #[error("controller singular on {faults} of {updates} updates (budget exceeded at t = {t})")]
    FaultBudget {
        faults: usize,
        updates: usize,
        t: f64,
    },
    #[error("runs are not comparable: {0}")]
    Incomparable(String),
}

impl SimError {
    /// Whether the failure comes from the scenario rather than the simulation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            SimError::Config(_) | SimError::UnstableGains(_) | SimError::Incomparable(_)
        )
    }
}

fn format_reports(reports: &[StabilityReport]) -> String {
    reports.iter().map(|r| r.to_string()).collect()
}

impl From<ControlError> for SimError {
    fn from(e: ControlError) -> Self {
        SimError::Config(e.to_string())
    }
}

impl From<FuzzyError> for SimError {
    fn from(e: FuzzyError) -> Self {
        SimError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyConfig {
    pub enabled: bool,
    pub rules: usize,
    /// Rule centers cover `[−span·φ, span·φ]` of the matching switching variable.
    pub span: f64,
    pub rate_x: f64,
    pub rate_l: f64,
    pub d_hat_cap_x: f64,
    pub d_hat_cap_l: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            rules: 7,
            span: 2.0,
            rate_x: 10.0,
            rate_l: 10.0,
            d_hat_cap_x: 2000.0,
            d_hat_cap_l: 2000.0,
        }
    }
}

impl FuzzyConfig {
    pub fn axes(&self, gains: &ControllerGains) -> Result<(FuzzyAxis, FuzzyAxis), FuzzyError> {
        Ok((
            FuzzyAxis::uniform(
                self.rules,
                self.span * gains.phi_x,
                self.rate_x,
                self.d_hat_cap_x,
            )?,
            FuzzyAxis::uniform(
                self.rules,
                self.span * gains.phi_l,
                self.rate_l,
                self.d_hat_cap_l,
            )?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub plant: CraneParams,
    /// Controller model: only masses and gravity are used.
    pub nominal: CraneParams,
    pub gains: ControllerGains,
    pub fuzzy: FuzzyConfig,
    pub trajectory: Trajectory,
    pub obstacle: Option<ObstacleSpec>,
    pub initial_state: CraneState,
    pub dt_plant: f64,
    pub dt_control: f64,
    pub t_end: f64,
    /// Standard deviations for `(x, l, θ, ẋ, l̇, θ̇)` measurement noise.
    pub sensor_noise_std: Option<[f64; 6]>,
    /// Symmetric actuator limits `(|u_x|, |u_l|)`.
    pub u_max: Option<(f64, f64)>,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Default rig, gains and rates, starting at rest on the trajectory start.
    pub fn new(trajectory: Trajectory, t_end: f64) -> Self {
        let (x, l) = trajectory.start();
        Self {
            plant: CraneParams::default(),
            nominal: CraneParams::default(),
            gains: ControllerGains::default(),
            fuzzy: FuzzyConfig::default(),
            trajectory,
            obstacle: None,
            initial_state: CraneState::at_rest(x, l),
            dt_plant: 1e-3,
            dt_control: 1e-2,
            t_end,
            sensor_noise_std: None,
            u_max: None,
            rng_seed: 0,
        }
    }

    /// Number of plant steps; the log holds one more record than this.
    pub fn plant_steps(&self) -> usize {
        (self.t_end / self.dt_plant + 1e-9).floor() as usize
    }

    /// Plant steps per control update.
    pub fn control_ratio(&self) -> Result<usize, SimError> {
        let ratio = self.dt_control / self.dt_plant;
        let rounded = ratio.round();
        if !(rounded >= 1.0) || (ratio - rounded).abs() > 1e-9 * ratio {
            return Err(SimError::Config(format!(
                "dt_control ({}) must be a positive integer multiple of dt_plant ({})",
                self.dt_control, self.dt_plant
            )));
        }
        Ok(rounded as usize)
    }

    /// Structural checks only; see [`ScenarioConfig::stability_reports`].
    pub fn validate(&self) -> Result<(), SimError> {
        let cfg = |m: String| SimError::Config(m);
        self.plant
            .validate()
            .map_err(|e| cfg(format!("[plant] {e}")))?;
        self.nominal
            .validate()
            .map_err(|e| cfg(format!("[nominal] {e}")))?;
        self.gains
            .validate()
            .map_err(|e| cfg(format!("[gains] {e}")))?;
        if let Some(obs) = &self.obstacle {
            obs.validate().map_err(|e| cfg(format!("[obstacle] {e}")))?;
        }
        for (name, v) in [
            ("dt_plant", self.dt_plant),
            ("dt_control", self.dt_control),
            ("t_end", self.t_end),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg(format!("[sim] {name} must be positive, got {v}")));
            }
        }
        self.control_ratio()?;
        if !self.initial_state.is_finite() || !(self.initial_state.l > 0.0) {
            return Err(cfg(
                "[sim] initial state must be finite with positive cable length".into(),
            ));
        }
        if let Some(std) = &self.sensor_noise_std {
            if std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return Err(cfg(
                    "[sim] noise standard deviations must be non-negative".into()
                ));
            }
        }
        if let Some((ux, ul)) = self.u_max {
            if !(ux > 0.0 && ul > 0.0) {
                return Err(cfg("[sim] actuator limits must be positive".into()));
            }
        }
        let f = &self.fuzzy;
        if !(f.span > 0.0 && f.span.is_finite()) {
            return Err(cfg(format!(
                "[fuzzy] span must be positive, got {}",
                f.span
            )));
        }
        self.fuzzy
            .axes(&self.gains)
            .map_err(|e| cfg(format!("[fuzzy] {e}")))?;
        Ok(())
    }

    /// Linearized closed-loop check at every trajectory operating point.
    pub fn stability_reports(&self) -> Result<Vec<StabilityReport>, SimError> {
        self.trajectory
            .operating_points()
            .into_iter()
            .map(|(x, l)| {
                validate_surface_stability(&self.gains, &self.nominal, &CraneState::at_rest(x, l))
                    .map_err(SimError::from)
            })
            .collect()
    }
}

/// One logged plant step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub state: CraneState,
    pub reference: Reference,
    pub s_x: f64,
    pub s_l: f64,
    /// Command held over the step that follows.
    pub u: ControlInput,
    pub d_hat: [f64; 2],
    pub disturbance: [f64; 2],
}

impl Record {
    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn error_x(&self) -> f64 {
        self.state.x - self.reference.x
    }

    pub fn error_l(&self) -> f64 {
        self.state.l - self.reference.l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub rms_error_x: f64,
    pub rms_error_l: f64,
    pub max_abs_theta: f64,
    pub settling_time_x: f64,
    /// `∫ ‖u‖ dt`.
    pub control_effort: f64,
    pub steady_state_error_x: f64,
    pub steady_state_error_l: f64,
    /// Mean `|u_x[k] − u_x[k−1]|` over logged steps.
    pub mean_abs_du_x: f64,
    pub final_d_hat_x: f64,
    pub final_d_hat_l: f64,
    pub controller_faults: usize,
    pub max_sliding_residual_x: f64,
    pub max_sliding_residual_l: f64,
    pub min_obstacle_gap: Option<f64>,
}

impl Metrics {
    /// Named values in a fixed order; absent metrics are skipped.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("rms_error_x", self.rms_error_x),
            ("rms_error_l", self.rms_error_l),
            ("max_abs_theta", self.max_abs_theta),
            ("settling_time_x", self.settling_time_x),
            ("control_effort", self.control_effort),
            ("steady_state_error_x", self.steady_state_error_x),
            ("steady_state_error_l", self.steady_state_error_l),
            ("mean_abs_du_x", self.mean_abs_du_x),
            ("final_d_hat_x", self.final_d_hat_x),
            ("final_d_hat_l", self.final_d_hat_l),
            ("controller_faults", self.controller_faults as f64),
            ("max_sliding_residual_x", self.max_sliding_residual_x),
            ("max_sliding_residual_l", self.max_sliding_residual_l),
        ];
        if let Some(gap) = self.min_obstacle_gap {
            out.push(("min_obstacle_gap", gap));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub records: Vec<Record>,
    pub metrics: Metrics,
    /// Compensator state at the end of the run, when enabled.
    pub fuzzy_axes: Option<(FuzzyAxis, FuzzyAxis)>,
}

impl RunLog {
    pub fn load_path(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| r.state.load_position())
            .collect()
    }
}

struct Noise {
    rng: ChaCha8Rng,
    channels: Option<[Normal<f64>; 6]>,
}

impl Noise {
    fn new(config: &ScenarioConfig) -> Result<Self, SimError> {
        let channels = match config.sensor_noise_std {
            Some(std) => {
                let mk = |s: f64| {
                    Normal::new(0.0, s).map_err(|e| SimError::Config(format!("[sim] noise: {e}")))
                };
                Some([
                    mk(std[0])?,
                    mk(std[1])?,
                    mk(std[2])?,
                    mk(std[3])?,
                    mk(std[4])?,
                    mk(std[5])?,
                ])
            }
            None => None,
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            channels,
        })
    }

    fn measure(&mut self, state: &CraneState) -> CraneState {
        let Some(ch) = &self.channels else {
            return *state;
        };
        let mut v = state.to_vector();
        for (i, dist) in ch.iter().enumerate() {
            v[i] += dist.sample(&mut self.rng);
        }
        let mut measured = CraneState::from_vector(&v, state.t);
        // A measurement cannot report a slack cable to the controller.
        measured.l = measured.l.max(f64::MIN_POSITIVE);
        measured
    }
}

/// Validates the configuration, including gain stability, then simulates.
pub fn run(config: &ScenarioConfig) -> Result<RunLog, SimError> {
    config.validate()?;
    let reports = config.stability_reports()?;
    if reports.iter().any(|r| !r.passed()) {
        return Err(SimError::UnstableGains(reports));
    }
    simulate(config)
}

/// Simulates without the gain stability gate, for probing bad gain sets.
pub fn simulate(config: &ScenarioConfig) -> Result<RunLog, SimError> {
    config.validate()?;
    let ratio = config.control_ratio()?;
    let steps = config.plant_steps();
    let gains = &config.gains;
    let nominal = config.nominal.nominal();
    let dt_control = ratio as f64 * config.dt_plant;
    let updates = steps / ratio + 1;

    let mut axes = if config.fuzzy.enabled {
        Some(config.fuzzy.axes(gains)?)
    } else {
        None
    };
    let mut noise = Noise::new(config)?;
    let mut state = CraneState {
        t: 0.0,
        ..config.initial_state
    };
    let mut u = ControlInput::default();
    let mut d_hat = [0.0; 2];
    let mut faults = 0usize;
    let mut residual_max = [0.0f64; 2];
    let mut records = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * config.dt_plant;
        state.t = t;
        let reference = config.trajectory.at(t);

        if k % ratio == 0 {
            let measured = noise.measure(&state);
            let sw = switching_variables(&measured, &reference, gains);
            if let Some((ax, al)) = &axes {
                d_hat = [ax.infer(sw.s_x), al.infer(sw.s_l)];
            }
            let d = Vector2::new(d_hat[0], d_hat[1]);
            match control_law(&measured, &reference, gains, d, &nominal) {
                Ok(cmd) => {
                    if let Ok(res) =
                        sliding_rate_residual(&measured, &reference, gains, d, &cmd, &nominal)
                    {
                        residual_max[0] = residual_max[0].max(res[0].abs());
                        residual_max[1] = residual_max[1].max(res[1].abs());
                    }
                    u = match config.u_max {
                        Some((mx, ml)) => cmd.clamped(mx, ml),
                        None => cmd,
                    };
                }
                Err(ControlError::Singular { det }) => {
                    faults += 1;
                    warn!("t = {t}: decoupling matrix singular (det {det:e}), holding previous command");
                    if faults as f64 > FAULT_BUDGET * updates as f64 {
                        return Err(SimError::FaultBudget { faults, updates, t });
                    }
                }
                Err(source) => return Err(SimError::Controller { t, source }),
            }
            if let Some((ax, al)) = &mut axes {
                ax.adapt_in_place(sw.s_x, dt_control);
                al.adapt_in_place(sw.s_l, dt_control);
            }
        }

        let sw = switching_variables(&state, &reference, gains);
        records.push(Record {
            state,
            reference,
            s_x: sw.s_x,
            s_l: sw.s_l,
            u,
            d_hat,
            disturbance: [
                config.plant.disturbance_x.eval(t),
                config.plant.disturbance_l.eval(t),
            ],
        });

        if k < steps {
            state = integrate_step(&state, &u, &config.plant, config.dt_plant)?;
        }
    }

    for (axis, (res, k)) in ["x", "l"]
        .iter()
        .zip(residual_max.iter().zip([gains.k_x, gains.k_l]))
    {
        if *res > 1e-6 * k {
            warn!("sliding rate on axis {axis} departs from the reaching law by up to {res:.3e} on the nominal model");
        }
    }
    debug!(
        "run finished: {} records, {faults} controller faults",
        records.len()
    );

    let metrics = compute_metrics(config, &records, faults, residual_max);
    Ok(RunLog {
        records,
        metrics,
        fuzzy_axes: axes,
    })
}

fn compute_metrics(
    config: &ScenarioConfig,
    records: &[Record],
    faults: usize,
    residual_max: [f64; 2],
) -> Metrics {
    let n = records.len() as f64;
    let rms =
        |f: fn(&Record) -> f64| (records.iter().map(|r| f(r).powi(2)).sum::<f64>() / n).sqrt();

    let step = (config.trajectory.end().0 - config.initial_state.x).abs();
    let settling_time_x = if step > 0.0 {
        let band = SETTLING_BAND * step;
        records
            .iter()
            .rev()
            .find(|r| r.error_x().abs() > band)
            .map_or(0.0, Record::t)
    } else {
        0.0
    };

    let window = ((STEADY_STATE_WINDOW * n).ceil() as usize).clamp(1, records.len());
    let tail = &records[records.len() - window..];
    let mean_abs =
        |f: fn(&Record) -> f64| tail.iter().map(|r| f(r).abs()).sum::<f64>() / window as f64;

    let control_effort = records[..records.len() - 1]
        .iter()
        .map(|r| r.u.u_x.hypot(r.u.u_l) * config.dt_plant)
        .sum();
    let mean_abs_du_x = if records.len() > 1 {
        records
            .windows(2)
            .map(|w| (w[1].u.u_x - w[0].u.u_x).abs())
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };

    let last = records
        .last()
        .expect("log holds at least the initial record");
    let min_obstacle_gap = config.obstacle.as_ref().map(|obs| {
        let path: Vec<_> = records.iter().map(|r| r.state.load_position()).collect();
        clearance_check(&path, obs).min_gap
    });

    Metrics {
        rms_error_x: rms(Record::error_x),
        rms_error_l: rms(Record::error_l),
        max_abs_theta: records
            .iter()
            .map(|r| r.state.theta.abs())
            .fold(0.0, f64::max),
        settling_time_x,
        control_effort,
        steady_state_error_x: mean_abs(Record::error_x),
        steady_state_error_l: mean_abs(Record::error_l),
        mean_abs_du_x,
        final_d_hat_x: last.d_hat[0],
        final_d_hat_l: last.d_hat[1],
        controller_faults: faults,
        max_sliding_residual_x: residual_max[0],
        max_sliding_residual_l: residual_max[1],
        min_obstacle_gap,
    }
}

/// `a / b`, defined as 1 when both are equal (including both zero).
pub fn metric_ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricComparison {
    pub name: &'static str,
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub log_a: RunLog,
    pub log_b: RunLog,
    pub rows: Vec<MetricComparison>,
}

impl CompareReport {
    pub fn ratio(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.ratio)
    }
}

/// Runs both scenarios concurrently and pairs their metrics.
pub fn compare(
    config_a: &ScenarioConfig,
    config_b: &ScenarioConfig,
) -> Result<CompareReport, SimError> {
    if config_a.trajectory != config_b.trajectory {
        return Err(SimError::Incomparable("trajectories differ".into()));
    }
    if config_a.plant != config_b.plant {
        return Err(SimError::Incomparable("plants differ".into()));
    }
    let (log_a, log_b) = thread::scope(|scope| {
        let handle = scope.spawn(|| run(config_b));
        let a = run(config_a);
        let b = handle.join().expect("simulation thread panicked");
        (a, b)
    });
    let (log_a, log_b) = (log_a?, log_b?);
    let b_entries = log_b.metrics.entries();
    let rows = log_a
        .metrics
        .entries()
        .into_iter()
        .filter_map(|(name, a)| {
            b_entries
                .iter()
                .find(|(n, _)| *n == name)
                .map(|&(_, b)| MetricComparison {
                    name,
                    a,
                    b,
                    ratio: metric_ratio(a, b),
                })
        })
        .collect();
    Ok(CompareReport { log_a, log_b, rows })
}
