//! TOML scenario files and `section.key=value` overrides.
//!
//! ```toml
//! [plant]
//! M = 120.0
//! m = 50.0
//! disturbance_x = { kind = "constant", value = 100.0 }
//!
//! [trajectory]
//! kind = "setpoint"
//! x = 2.0
//! l = 1.5
//!
//! [sim]
//! t_end = 15.0
//! ```
//!
//! Only `[trajectory]` and `[sim]` are required; everything else falls back to
//! the shipped defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::dynamics::{CraneParams, CraneState, Disturbance};
use crate::reference::{ObstacleSpec, Trajectory};
use crate::sim::{FuzzyConfig, ScenarioConfig};
use crate::smc::{ControllerGains, SwitchingLaw};

const SECTIONS: [&str; 7] = [
    "plant",
    "nominal",
    "gains",
    "fuzzy",
    "trajectory",
    "obstacle",
    "sim",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("[{section}]: {message}")]
    Section { section: String, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("missing required section [{0}]")]
    MissingSection(&'static str),
    #[error("override `{text}`: {message}")]
    Override { text: String, message: String },
}

fn section_err(section: &str, message: impl ToString) -> ScenarioError {
    ScenarioError::Section {
        section: section.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PlantSection {
    #[serde(rename = "M")]
    trolley_mass: f64,
    #[serde(rename = "m")]
    load_mass: f64,
    g: f64,
    friction_viscous_x: f64,
    friction_viscous_l: f64,
    disturbance_x: Disturbance,
    disturbance_l: Disturbance,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self::from(&CraneParams::default())
    }
}

impl From<&CraneParams> for PlantSection {
    fn from(p: &CraneParams) -> Self {
        Self {
            trolley_mass: p.trolley_mass,
            load_mass: p.load_mass,
            g: p.gravity,
            friction_viscous_x: p.friction_viscous_x,
            friction_viscous_l: p.friction_viscous_l,
            disturbance_x: p.disturbance_x,
            disturbance_l: p.disturbance_l,
        }
    }
}

impl From<PlantSection> for CraneParams {
    fn from(p: PlantSection) -> Self {
        CraneParams {
            friction_viscous_x: p.friction_viscous_x,
            friction_viscous_l: p.friction_viscous_l,
            disturbance_x: p.disturbance_x,
            disturbance_l: p.disturbance_l,
            ..CraneParams::ideal(p.trolley_mass, p.load_mass, p.g)
        }
    }
}

/// Controller model; unset values copy the plant.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NominalSection {
    #[serde(rename = "M")]
    trolley_mass: Option<f64>,
    #[serde(rename = "m")]
    load_mass: Option<f64>,
    g: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsSection {
    alpha_x: Option<f64>,
    alpha_l: Option<f64>,
    alpha_theta: Option<f64>,
    lambda_x: Option<f64>,
    lambda_l: Option<f64>,
    lambda_theta: Option<f64>,
    #[serde(rename = "K_x")]
    k_x: Option<f64>,
    #[serde(rename = "K_l")]
    k_l: Option<f64>,
    phi_x: Option<f64>,
    phi_l: Option<f64>,
    switching: Option<SwitchingLaw>,
}

impl GainsSection {
    fn resolve(&self) -> ControllerGains {
        let d = ControllerGains::default();
        ControllerGains {
            alpha_x: self.alpha_x.unwrap_or(d.alpha_x),
            alpha_l: self.alpha_l.unwrap_or(d.alpha_l),
            alpha_theta: self.alpha_theta.unwrap_or(d.alpha_theta),
            lambda_x: self.lambda_x.unwrap_or(d.lambda_x),
            lambda_l: self.lambda_l.unwrap_or(d.lambda_l),
            lambda_theta: self.lambda_theta.unwrap_or(d.lambda_theta),
            k_x: self.k_x.unwrap_or(d.k_x),
            k_l: self.k_l.unwrap_or(d.k_l),
            phi_x: self.phi_x.unwrap_or(d.phi_x),
            phi_l: self.phi_l.unwrap_or(d.phi_l),
            switching: self.switching.unwrap_or(d.switching),
        }
    }

    fn from_gains(g: &ControllerGains) -> Self {
        Self {
            alpha_x: Some(g.alpha_x),
            alpha_l: Some(g.alpha_l),
            alpha_theta: Some(g.alpha_theta),
            lambda_x: Some(g.lambda_x),
            lambda_l: Some(g.lambda_l),
            lambda_theta: Some(g.lambda_theta),
            k_x: Some(g.k_x),
            k_l: Some(g.k_l),
            phi_x: Some(g.phi_x),
            phi_l: Some(g.phi_l),
            switching: Some(g.switching),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuzzySection {
    enabled: Option<bool>,
    rules: Option<usize>,
    span: Option<f64>,
    rate_x: Option<f64>,
    rate_l: Option<f64>,
    d_hat_cap_x: Option<f64>,
    d_hat_cap_l: Option<f64>,
}

impl FuzzySection {
    fn resolve(&self) -> FuzzyConfig {
        let d = FuzzyConfig::default();
        FuzzyConfig {
            enabled: self.enabled.unwrap_or(d.enabled),
            rules: self.rules.unwrap_or(d.rules),
            span: self.span.unwrap_or(d.span),
            rate_x: self.rate_x.unwrap_or(d.rate_x),
            rate_l: self.rate_l.unwrap_or(d.rate_l),
            d_hat_cap_x: self.d_hat_cap_x.unwrap_or(d.d_hat_cap_x),
            d_hat_cap_l: self.d_hat_cap_l.unwrap_or(d.d_hat_cap_l),
        }
    }

    fn from_config(f: &FuzzyConfig) -> Self {
        Self {
            enabled: Some(f.enabled),
            rules: Some(f.rules),
            span: Some(f.span),
            rate_x: Some(f.rate_x),
            rate_l: Some(f.rate_l),
            d_hat_cap_x: Some(f.d_hat_cap_x),
            d_hat_cap_l: Some(f.d_hat_cap_l),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum TrajectorySection {
    Setpoint {
        x: f64,
        l: f64,
    },
    /// Arc at constant cable length `l` from `x0` to `x1`.
    Semicircle {
        x0: f64,
        x1: f64,
        l: f64,
        duration: f64,
    },
}

impl TrajectorySection {
    fn resolve(&self) -> Result<Trajectory, ScenarioError> {
        match *self {
            TrajectorySection::Setpoint { x, l } => Trajectory::setpoint(x, l),
            TrajectorySection::Semicircle {
                x0,
                x1,
                l,
                duration,
            } => Trajectory::semicircle((x0, l), (x1, l), duration),
        }
        .map_err(|e| section_err("trajectory", e))
    }

    fn from_trajectory(t: &Trajectory) -> Self {
        match t {
            Trajectory::Setpoint { x, l } => TrajectorySection::Setpoint { x: *x, l: *l },
            Trajectory::Semicircle(arc) => TrajectorySection::Semicircle {
                x0: arc.start().0,
                x1: arc.end().0,
                l: arc.start().1,
                duration: arc.duration(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    t_end: f64,
    dt_plant: Option<f64>,
    dt_control: Option<f64>,
    seed: Option<u64>,
    /// `[x, l, theta, x_dot, l_dot, theta_dot]`.
    noise_std: Option<[f64; 6]>,
    u_max_x: Option<f64>,
    u_max_l: Option<f64>,
    initial_x: Option<f64>,
    initial_l: Option<f64>,
    initial_theta: Option<f64>,
    initial_x_dot: Option<f64>,
    initial_l_dot: Option<f64>,
    initial_theta_dot: Option<f64>,
}

/// The resolved form written back out, with every value explicit.
#[derive(Debug, Serialize)]
struct ResolvedFile {
    plant: PlantSection,
    nominal: NominalSection,
    gains: GainsSection,
    fuzzy: FuzzySection,
    trajectory: TrajectorySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    obstacle: Option<ObstacleSpec>,
    sim: SimSection,
}

fn section<T: DeserializeOwned>(
    table: &Table,
    name: &'static str,
) -> Result<Option<T>, ScenarioError> {
    table
        .get(name)
        .map(|v| {
            v.clone()
                .try_into::<T>()
                .map_err(|e| section_err(name, e.message()))
        })
        .transpose()
}

/// Parses TOML text into a table, for callers that want to apply overrides.
pub fn parse_table(text: &str) -> Result<Table, ScenarioError> {
    Ok(text.parse::<Table>()?)
}

/// Applies `section.key=value` assignments in order. Values are read as TOML
/// (`1.5`, `true`, `[1, 2]`, `{ kind = "none" }`); anything that does not
/// parse is taken as a bare string, so `gains.switching=signum` works.
pub fn apply_overrides<S: AsRef<str>>(
    table: &mut Table,
    overrides: &[S],
) -> Result<(), ScenarioError> {
    for text in overrides {
        let text = text.as_ref();
        let err = |message: &str| ScenarioError::Override {
            text: text.to_string(),
            message: message.to_string(),
        };
        let (path, raw) = text
            .split_once('=')
            .ok_or_else(|| err("expected section.key=value"))?;
        let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
        if keys.len() < 2 || keys.iter().any(|k| k.is_empty()) {
            return Err(err("key must look like section.key"));
        }
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));

        let (last, parents) = keys.split_last().expect("at least two keys");
        let mut node = &mut *table;
        for key in parents {
            let entry = node
                .entry(key.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| err(&format!("`{key}` is not a table")))?;
        }
        node.insert(last.to_string(), value);
    }
    Ok(())
}

/// Builds a scenario from a parsed table. Does not run the stability gate.
pub fn from_table(table: &Table) -> Result<ScenarioConfig, ScenarioError> {
    if let Some(name) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(ScenarioError::UnknownSection(name.clone()));
    }
    let plant: CraneParams = section::<PlantSection>(table, "plant")?
        .unwrap_or_default()
        .into();
    let nominal_section: NominalSection = section(table, "nominal")?.unwrap_or_default();
    let nominal = CraneParams::ideal(
        nominal_section.trolley_mass.unwrap_or(plant.trolley_mass),
        nominal_section.load_mass.unwrap_or(plant.load_mass),
        nominal_section.g.unwrap_or(plant.gravity),
    );
    let gains = section::<GainsSection>(table, "gains")?
        .unwrap_or_default()
        .resolve();
    let fuzzy = section::<FuzzySection>(table, "fuzzy")?
        .unwrap_or_default()
        .resolve();
    let trajectory = section::<TrajectorySection>(table, "trajectory")?
        .ok_or(ScenarioError::MissingSection("trajectory"))?
        .resolve()?;
    let obstacle: Option<ObstacleSpec> = section(table, "obstacle")?;
    let sim: SimSection = section(table, "sim")?.ok_or(ScenarioError::MissingSection("sim"))?;

    let (x0, l0) = trajectory.start();
    let initial_state = CraneState {
        x: sim.initial_x.unwrap_or(x0),
        l: sim.initial_l.unwrap_or(l0),
        theta: sim.initial_theta.unwrap_or(0.0),
        x_dot: sim.initial_x_dot.unwrap_or(0.0),
        l_dot: sim.initial_l_dot.unwrap_or(0.0),
        theta_dot: sim.initial_theta_dot.unwrap_or(0.0),
        t: 0.0,
    };
    let u_max = match (sim.u_max_x, sim.u_max_l) {
        (None, None) => None,
        (x, l) => Some((x.unwrap_or(f64::INFINITY), l.unwrap_or(f64::INFINITY))),
    };
    let mut config = ScenarioConfig::new(trajectory, sim.t_end);
    config.plant = plant;
    config.nominal = nominal;
    config.gains = gains;
    config.fuzzy = fuzzy;
    config.obstacle = obstacle;
    config.initial_state = initial_state;
    config.dt_plant = sim.dt_plant.unwrap_or(config.dt_plant);
    config.dt_control = sim.dt_control.unwrap_or(config.dt_control);
    config.rng_seed = sim.seed.unwrap_or(0);
    config.sensor_noise_std = sim.noise_std;
    config.u_max = u_max;
    Ok(config)
}

pub fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    from_table(&parse_table(text)?)
}

/// Reads a scenario file and applies overrides on top of it.
pub fn load<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut table = parse_table(&text)?;
    apply_overrides(&mut table, overrides)?;
    from_table(&table)
}

/// Writes the fully resolved scenario as TOML that parses back to `config`.
pub fn to_toml(config: &ScenarioConfig) -> String {
    let s = &config.initial_state;
    let file = ResolvedFile {
        plant: PlantSection::from(&config.plant),
        nominal: NominalSection {
            trolley_mass: Some(config.nominal.trolley_mass),
            load_mass: Some(config.nominal.load_mass),
            g: Some(config.nominal.gravity),
        },
        gains: GainsSection::from_gains(&config.gains),
        fuzzy: FuzzySection::from_config(&config.fuzzy),
        trajectory: TrajectorySection::from_trajectory(&config.trajectory),
        obstacle: config.obstacle,
        sim: SimSection {
            t_end: config.t_end,
            dt_plant: Some(config.dt_plant),
            dt_control: Some(config.dt_control),
            seed: Some(config.rng_seed),
            noise_std: config.sensor_noise_std,
            u_max_x: config.u_max.map(|u| u.0),
            u_max_l: config.u_max.map(|u| u.1),
            initial_x: Some(s.x),
            initial_l: Some(s.l),
            initial_theta: Some(s.theta),
            initial_x_dot: Some(s.x_dot),
            initial_l_dot: Some(s.l_dot),
            initial_theta_dot: Some(s.theta_dot),
        },
    };
    toml::to_string(&file).expect("scenario values are always representable in TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[trajectory]
kind = "setpoint"
x = 2.0
l = 1.5

[sim]
t_end = 5.0
initial_x = 0.0
"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.plant, CraneParams::default());
        assert_eq!(c.gains, ControllerGains::default());
        assert_eq!(c.fuzzy, FuzzyConfig::default());
        assert_eq!(c.initial_state, CraneState::at_rest(0.0, 1.5));
        assert_eq!(c.dt_plant, 1e-3);
        assert_eq!(c.dt_control, 1e-2);
        assert!(c.obstacle.is_none() && c.u_max.is_none());
    }

    #[test]
    fn nominal_defaults_to_plant_masses() {
        let text = format!("[plant]\nM = 200.0\nm = 30.0\nfriction_viscous_x = 5.0\n{MINIMAL}");
        let c = parse(&text).unwrap();
        assert_eq!(c.nominal, CraneParams::ideal(200.0, 30.0, 9.81));
        assert_eq!(c.plant.friction_viscous_x, 5.0);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let err = parse(&format!("{MINIMAL}\n[gains]\nlamda_x = 3.0\n")).unwrap_err();
        assert!(err.to_string().starts_with("[gains]:"), "{err}");
        assert!(err.to_string().contains("lamda_x"), "{err}");
        let err = parse(&format!("{MINIMAL}\n[extras]\na = 1\n")).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownSection(ref s) if s == "extras"));
        let err = parse("[sim]\nt_end = 1.0\n").unwrap_err();
        assert!(matches!(err, ScenarioError::MissingSection("trajectory")));
    }

    #[test]
    fn bad_trajectory_kind_names_section() {
        let text = "[trajectory]\nkind = \"spiral\"\n[sim]\nt_end = 1.0\n";
        let err = parse(text).unwrap_err();
        assert!(err.to_string().starts_with("[trajectory]:"), "{err}");
    }

    #[test]
    fn overrides_create_and_replace() {
        let mut table = parse_table(MINIMAL).unwrap();
        apply_overrides(
            &mut table,
            &[
                "sim.t_end=9",
                "gains.switching=signum",
                "gains.K_x = 250.5",
                "plant.disturbance_x={kind=\"constant\", value=3.0}",
            ],
        )
        .unwrap();
        let c = from_table(&table).unwrap();
        assert_eq!(c.t_end, 9.0);
        assert_eq!(c.gains.switching, SwitchingLaw::Signum);
        assert_eq!(c.gains.k_x, 250.5);
        assert_eq!(c.plant.disturbance_x, Disturbance::Constant { value: 3.0 });
    }

    #[test]
    fn malformed_overrides_fail() {
        let mut table = parse_table(MINIMAL).unwrap();
        for bad in ["sim.t_end", "t_end=3", "sim..t_end=3", "trajectory.x.y=1"] {
            assert!(
                matches!(
                    apply_overrides(&mut table, &[bad]),
                    Err(ScenarioError::Override { .. })
                ),
                "{bad}"
            );
        }
    }

    #[test]
    fn resolved_output_round_trips() {
        let text = r#"
[plant]
M = 130.0
m = 45.5
disturbance_l = { kind = "sine", amplitude = 2.0, frequency = 0.3 }

[gains]
switching = "signum"

[fuzzy]
enabled = false

[trajectory]
kind = "semicircle"
x0 = 0.0
x1 = 4.0
l = 3.0
duration = 10.0

[obstacle]
x_center = 2.0
width = 0.6
height = 1.2
top_clearance = 0.2
floor_depth = 4.5

[sim]
t_end = 12.0
noise_std = [0.001, 0.001, 0.0001, 0.0, 0.0, 0.0]
u_max_x = 800.0
seed = 42
initial_theta = 0.01
"#;
        let c = parse(text).unwrap();
        let again = parse(&to_toml(&c)).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.u_max, Some((800.0, f64::INFINITY)));
    }
}
