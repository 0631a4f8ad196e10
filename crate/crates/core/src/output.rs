//! Run artifacts: `telemetry.csv`, `metrics.txt`, `meta.txt`, `compare.txt`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::fuzzy::FuzzyAxis;
use crate::scenario;
use crate::sim::{CompareReport, RunLog, ScenarioConfig};

pub const TELEMETRY_HEADER: &str =
    "t,x,l,theta,x_dot,l_dot,theta_dot,x_d,l_d,s_x,s_l,u_x,u_l,d_hat_x,d_hat_l,dist_x,dist_l";

/// One row per plant step, shortest round-trip float formatting.
pub fn write_telemetry<W: Write>(mut out: W, log: &RunLog) -> io::Result<()> {
    let mut buf = ryu::Buffer::new();
    let mut line = String::with_capacity(256);
    writeln!(out, "{TELEMETRY_HEADER}")?;
    for r in &log.records {
        let s = &r.state;
        let fields = [
            s.t,
            s.x,
            s.l,
            s.theta,
            s.x_dot,
            s.l_dot,
            s.theta_dot,
            r.reference.x,
            r.reference.l,
            r.s_x,
            r.s_l,
            r.u.u_x,
            r.u.u_l,
            r.d_hat[0],
            r.d_hat[1],
            r.disturbance[0],
            r.disturbance[1],
        ];
        line.clear();
        for (i, v) in fields.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(buf.format(*v));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn write_metrics<W: Write>(mut out: W, log: &RunLog) -> io::Result<()> {
    let mut buf = ryu::Buffer::new();
    for (name, value) in log.metrics.entries() {
        writeln!(out, "{name}={}", buf.format(value))?;
    }
    out.flush()
}

fn format_list(values: &[f64]) -> String {
    let mut buf = ryu::Buffer::new();
    let items: Vec<String> = values.iter().map(|v| buf.format(*v).to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn axis_comment(name: &str, axis: &FuzzyAxis) -> String {
    format!(
        "# {name}: centers = {}, consequents = {}\n",
        format_list(axis.centers()),
        format_list(axis.consequents())
    )
}

/// Resolved scenario as TOML; final compensator state goes in comments so
/// the file still parses back to the same scenario.
pub fn meta_text(config: &ScenarioConfig, log: &RunLog) -> String {
    let mut text = scenario::to_toml(config);
    if let Some((ax, al)) = &log.fuzzy_axes {
        text.push_str("\n# final fuzzy compensator\n");
        text.push_str(&axis_comment("x", ax));
        text.push_str(&axis_comment("l", al));
    }
    text
}

/// Writes all per-run artifacts into `dir`, creating it if needed.
pub fn write_run(dir: &Path, config: &ScenarioConfig, log: &RunLog) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_telemetry(
        BufWriter::new(File::create(dir.join("telemetry.csv"))?),
        log,
    )?;
    write_metrics(BufWriter::new(File::create(dir.join("metrics.txt"))?), log)?;
    fs::write(dir.join("meta.txt"), meta_text(config, log))
}

pub fn write_compare<W: Write>(
    mut out: W,
    report: &CompareReport,
    label_a: &str,
    label_b: &str,
) -> io::Result<()> {
    let mut buf = ryu::Buffer::new();
    for row in &report.rows {
        writeln!(out, "{}.{label_a}={}", row.name, buf.format(row.a))?;
        writeln!(out, "{}.{label_b}={}", row.name, buf.format(row.b))?;
        writeln!(out, "{}.ratio={}", row.name, buf.format(row.ratio))?;
    }
    out.flush()
}

/// Parses `name=value` lines as written by [`write_metrics`] and [`write_compare`].
pub fn parse_key_values(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .filter_map(|line| {
            let (k, v) = line.split_once('=')?;
            Some((k.trim().to_string(), v.trim().parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::Trajectory;
    use crate::sim::run;

    fn short_log() -> (ScenarioConfig, RunLog) {
        let mut c = ScenarioConfig::new(Trajectory::setpoint(1.0, 1.5).unwrap(), 0.05);
        c.initial_state.x = 0.0;
        let log = run(&c).unwrap();
        (c, log)
    }

    #[test]
    fn telemetry_shape() {
        let (_, log) = short_log();
        let mut bytes = Vec::new();
        write_telemetry(&mut bytes, &log).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], TELEMETRY_HEADER);
        assert_eq!(lines.len(), log.records.len() + 1);
        let cols = TELEMETRY_HEADER.split(',').count();
        for line in &lines[1..] {
            let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(vals.len(), cols);
        }
        assert!(!text.contains('\r'));
        let last: Vec<f64> = lines
            .last()
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(last[1], log.records.last().unwrap().state.x);
    }

    #[test]
    fn metrics_parse_back() {
        let (_, log) = short_log();
        let mut bytes = Vec::new();
        write_metrics(&mut bytes, &log).unwrap();
        let parsed = parse_key_values(std::str::from_utf8(&bytes).unwrap());
        let expected: Vec<_> = log
            .metrics
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(parsed, expected);
    }

    #[test]
    fn meta_parses_back_to_config() {
        let (c, log) = short_log();
        let text = meta_text(&c, &log);
        assert!(text.contains("# x: centers = ["));
        assert_eq!(scenario::parse(&text).unwrap(), c);
    }
}
