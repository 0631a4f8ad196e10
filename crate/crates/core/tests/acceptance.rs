//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crane_smc::dynamics::{
    cable_holding_force, integrate_step, integrate_step_with, mass_matrix, mechanical_energy,
    ControlInput, CraneParams, CraneState, Disturbance,
};
use crane_smc::fuzzy::FuzzyAxis;
use crane_smc::output::write_run;
use crane_smc::reference::clearance_check;
use crane_smc::scenario;
use crane_smc::sim::{self, ScenarioConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn load(name: &str) -> Result<ScenarioConfig, String> {
    scenario::load::<&str>(&scenario_path(name), &[]).map_err(|e| format!("{name}: {e}"))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, budget_s: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    check(
        secs < budget_s,
        format!("{detail}, {secs:.3} s (budget {budget_s} s)"),
    )
}

/// Determinant by cofactor expansion, independent of any library routine.
fn cofactor_det(a: &Matrix3<f64>) -> f64 {
    a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)])
        - a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] - a[(1, 2)] * a[(2, 0)])
        + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] - a[(1, 1)] * a[(2, 0)])
}

fn ac1_mass_matrix_determinant() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let params = CraneParams::ideal(
            rng.random_range(10.0..500.0),
            rng.random_range(1.0..200.0),
            9.81,
        );
        let state = CraneState {
            x: rng.random_range(-10.0..10.0),
            l: rng.random_range(0.1..10.0),
            theta: rng.random_range(-PI..PI),
            x_dot: rng.random_range(-2.0..2.0),
            l_dot: rng.random_range(-2.0..2.0),
            theta_dot: rng.random_range(-2.0..2.0),
            t: 0.0,
        };
        let mm = mass_matrix(&state, &params).map_err(|e| e.to_string())?;
        let m = params.load_mass;
        let expected = params.trolley_mass * m * m * state.l * state.l;
        worst = worst.max(((cofactor_det(&mm) - expected) / expected).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-9,
        format!("max relative error {worst:.3e} (tol 1e-9)"),
    )
    .and_then(|d| within_budget(elapsed, 1.0, d))
}

fn ac2_energy_conservation() -> Outcome {
    let start = Instant::now();
    let params = CraneParams::default();
    let mut state = CraneState {
        theta: 0.3,
        ..CraneState::at_rest(0.0, 1.5)
    };
    let e0 = mechanical_energy(&state, &params).map_err(|e| e.to_string())?;
    let lock = |s: &CraneState| {
        let u_l = cable_holding_force(s, 0.0, &params).expect("cable stays taut");
        ControlInput::new(0.0, u_l)
    };
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        state = integrate_step_with(&state, &params, 1e-3, lock).map_err(|e| e.to_string())?;
        let e = mechanical_energy(&state, &params).map_err(|e| e.to_string())?;
        worst = worst.max(((e - e0) / e0).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-6,
        format!("max relative energy drift {worst:.3e} over 10 s (tol 1e-6)"),
    )
    .and_then(|d| within_budget(elapsed, 5.0, d))
}

fn ac3_rk4_order() -> Outcome {
    let params = CraneParams {
        disturbance_x: Disturbance::Sine {
            amplitude: 40.0,
            frequency: 0.7,
            phase: 0.3,
        },
        disturbance_l: Disturbance::Sine {
            amplitude: 25.0,
            frequency: 0.4,
            phase: 0.0,
        },
        ..CraneParams::default()
    };
    let initial = CraneState {
        theta: 0.2,
        theta_dot: -0.1,
        x_dot: 0.3,
        ..CraneState::at_rest(0.0, 1.5)
    };
    let u = ControlInput::new(60.0, -params.load_mass * params.gravity * 0.95);
    let horizon = 2.0;
    let solve = |h: f64| -> Result<CraneState, String> {
        let steps = (horizon / h).round() as usize;
        let mut s = initial;
        for _ in 0..steps {
            s = integrate_step(&s, &u, &params, h).map_err(|e| e.to_string())?;
        }
        Ok(s)
    };
    let h = 0.04;
    let y1 = solve(h)?.to_vector();
    let y2 = solve(h / 2.0)?.to_vector();
    let y3 = solve(h / 4.0)?.to_vector();
    let order = ((y1 - y2).norm() / (y2 - y3).norm()).log2();
    check(
        (3.7..=4.3).contains(&order),
        format!(
            "observed order {order:.3} from h = {h}, {}, {} (window [3.7, 4.3])",
            h / 2.0,
            h / 4.0
        ),
    )
}

fn ac4_reaching_and_precision() -> Outcome {
    let config = load("setpoint.toml")?;
    let log = sim::run(&config).map_err(|e| e.to_string())?;
    let g = &config.gains;
    let recs = &log.records;
    let s0 = recs[0].s_x.abs();
    if s0 <= g.phi_x {
        return Err(format!("scenario starts inside the layer (|s_x| = {s0})"));
    }
    let mut detail = Vec::new();
    for (axis, phi, s_of) in [
        (
            "x",
            g.phi_x,
            (|r: &sim::Record| r.s_x) as fn(&sim::Record) -> f64,
        ),
        ("l", g.phi_l, |r: &sim::Record| r.s_l),
    ] {
        let entry = recs
            .iter()
            .position(|r| s_of(r).abs() <= phi)
            .ok_or_else(|| format!("s_{axis} never enters the layer"))?;
        for w in recs[..=entry].windows(2) {
            let (a, b) = (s_of(&w[0]), s_of(&w[1]));
            let s_dot = (b - a) / config.dt_plant;
            if w[0].t() < recs[entry].t() && a * s_dot >= 0.0 {
                return Err(format!(
                    "s_{axis}·ṡ_{axis} = {:.3e} ≥ 0 at t = {} before entry",
                    a * s_dot,
                    w[0].t()
                ));
            }
        }
        let worst = recs[entry..]
            .iter()
            .map(|r| s_of(r).abs())
            .fold(0.0, f64::max);
        if worst > phi {
            return Err(format!(
                "|s_{axis}| reaches {worst:.4} > φ = {phi} after entry"
            ));
        }
        detail.push(format!(
            "s_{axis} enters at t = {:.3} s, max |s_{axis}| after = {worst:.4} ≤ {phi}",
            recs[entry].t()
        ));
    }
    Ok(detail.join("; "))
}

fn ac5_partition_of_unity() -> Outcome {
    let axis = FuzzyAxis::uniform(7, 40.0, 10.0, 2000.0).map_err(|e| e.to_string())?;
    let c = 123.456;
    let uniform = axis
        .clone()
        .with_consequents(vec![c; axis.rules()])
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_sum, mut worst_infer) = (0.0f64, 0.0f64);
    for _ in 0..100_000 {
        let s = rng.random_range(-200.0..200.0);
        let sum: f64 = axis.normalized_strengths(s).iter().sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        worst_infer = worst_infer.max((uniform.infer(s) - c).abs());
    }
    check(
        worst_sum < 1e-12 && worst_infer < 1e-12,
        format!("max |Σψ − 1| = {worst_sum:.3e}, max |infer − c| = {worst_infer:.3e} (tol 1e-12)"),
    )
}

fn ac6_compensation() -> Outcome {
    let start = Instant::now();
    let fuzzy = load("compensation.toml")?;
    let p = &fuzzy.plant;
    let injected = 0.1 * (p.trolley_mass + p.load_mass) * p.gravity;
    let constant = matches!(p.disturbance_x, Disturbance::Constant { value } if (value - injected).abs() < 0.01);
    if !constant || p.friction_viscous_x <= 0.0 {
        return Err(format!(
            "compensation.toml does not inject {injected:.3} N plus friction"
        ));
    }
    let mut plain = fuzzy.clone();
    plain.fuzzy.enabled = false;
    let report = sim::compare(&fuzzy, &plain).map_err(|e| e.to_string())?;
    let (mf, mp) = (report.log_a.metrics, report.log_b.metrics);
    let improvement = mp.steady_state_error_x / mf.steady_state_error_x;
    let d_err = (mf.final_d_hat_x - injected).abs() / injected;
    let elapsed = start.elapsed();
    check(
        improvement >= 5.0 && d_err <= 0.1,
        format!(
            "steady |x̃| plain/fuzzy = {improvement:.3e} (need ≥ 5), d̂_x = {:.3} vs {injected:.3} ({:.2}% off, tol 10%)",
            mf.final_d_hat_x,
            100.0 * d_err
        ),
    )
    .and_then(|d| within_budget(elapsed, 30.0, d))
}

fn ac7_semicircle_clearance() -> Outcome {
    let config = load("semicircle.toml")?;
    let obstacle = config.obstacle.ok_or("semicircle.toml has no obstacle")?;
    let log = sim::run(&config).map_err(|e| e.to_string())?;
    let report = clearance_check(&log.load_path(), &obstacle);
    let max_theta = log.metrics.max_abs_theta;
    check(
        report.passed && max_theta < 0.1,
        format!(
            "clearance {} (min gap {:.4} m), max |θ| = {max_theta:.4} rad (< 0.1)",
            if report.passed { "ok" } else { "violated" },
            report.min_gap
        ),
    )
}

fn ac8_gain_validation() -> Outcome {
    let mut notes = Vec::new();
    for name in ["setpoint.toml", "semicircle.toml", "compensation.toml"] {
        let reports = load(name)?.stability_reports().map_err(|e| e.to_string())?;
        let worst = reports
            .iter()
            .map(|r| r.max_real_part())
            .fold(f64::NEG_INFINITY, f64::max);
        if !reports.iter().all(|r| r.passed()) {
            return Err(format!(
                "default gains fail on {name} (max Re λ = {worst:.4})"
            ));
        }
        notes.push(format!("{name} max Re λ = {worst:.4}"));
    }
    let bad = load("destabilized.toml")?;
    let reports = bad.stability_reports().map_err(|e| e.to_string())?;
    if reports.iter().all(|r| r.passed()) {
        return Err("destabilized variant passes the stability check".into());
    }
    if !matches!(sim::run(&bad), Err(sim::SimError::UnstableGains(_))) {
        return Err("run() accepted the destabilized gains".into());
    }
    let diverged_at = match sim::simulate(&bad) {
        Err(e) => format!("aborted ({e})"),
        Ok(log) => {
            let hit = log
                .records
                .iter()
                .find(|r| r.state.theta.abs() > PI / 2.0 || r.error_x().abs() > 10.0);
            match hit {
                Some(r) if r.t() <= 20.0 => {
                    format!("|θ| > π/2 or |x̃| > 10 m at t = {:.3} s", r.t())
                }
                _ => return Err("destabilized run stays bounded for 20 s".into()),
            }
        }
    };
    notes.push(format!("destabilized: {diverged_at}"));
    Ok(notes.join("; "))
}

fn ac9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cases: Vec<(String, ScenarioConfig)> = Vec::new();
    for name in [
        "setpoint.toml",
        "semicircle.toml",
        "compensation.toml",
        "destabilized.toml",
        "chattering.toml",
    ] {
        cases.push((name.to_string(), load(name)?));
    }
    let mut noisy = load("setpoint.toml")?;
    noisy.sensor_noise_std = Some([1e-3, 1e-3, 1e-4, 1e-3, 1e-3, 1e-4]);
    noisy.rng_seed = 2024;
    cases.push(("setpoint.toml + seeded noise".into(), noisy));

    for (i, (name, config)) in cases.iter().enumerate() {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let log = sim::simulate(config).map_err(|e| format!("{name}: {e}"))?;
            let out = dir.path().join(format!("{i}-{rep}"));
            write_run(&out, config, &log).map_err(|e| e.to_string())?;
            bytes.push(std::fs::read(out.join("telemetry.csv")).map_err(|e| e.to_string())?);
        }
        if bytes[0] != bytes[1] {
            return Err(format!("{name}: telemetry.csv differs between runs"));
        }
    }
    Ok(format!(
        "{} scenarios byte-identical across repeated runs",
        cases.len()
    ))
}

fn ac10_chattering() -> Outcome {
    let smooth = load("setpoint.toml")?;
    let signum = load("chattering.toml")?;
    let report = sim::compare(&signum, &smooth).map_err(|e| e.to_string())?;
    let (a, b) = (
        report.log_a.metrics.mean_abs_du_x,
        report.log_b.metrics.mean_abs_du_x,
    );
    let ratio = a / b;
    check(
        ratio >= 10.0,
        format!(
            "mean |Δu_x| signum = {a:.4}, boundary layer = {b:.4}, ratio {ratio:.2} (need ≥ 10)"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "AC1 mass-matrix determinant identity",
            ac1_mass_matrix_determinant,
        ),
        (
            "AC2 energy conservation, locked cable",
            ac2_energy_conservation,
        ),
        ("AC3 RK4 convergence order", ac3_rk4_order),
        (
            "AC4 reaching and guaranteed precision",
            ac4_reaching_and_precision,
        ),
        ("AC5 partition of unity", ac5_partition_of_unity),
        ("AC6 compensation A/B", ac6_compensation),
        (
            "AC7 semicircle obstacle clearance",
            ac7_semicircle_clearance,
        ),
        ("AC8 gain validation", ac8_gain_validation),
        ("AC9 determinism", ac9_determinism),
        ("AC10 chattering baseline", ac10_chattering),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
