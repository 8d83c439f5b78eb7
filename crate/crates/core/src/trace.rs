//! Trace and metrics files.
//!
//! A trace file is CSV with `#` comment lines in front:
//!
//! ```text
//! # rapf-trace v1 config_sha256=<hex> mode=<conventional|modified>
//! # activation t_k=<s> t_o=<s>        one line per avoidance episode
//! tick,t,px,py,pz,...                  column header, see COLUMNS
//! 0,0.0,0.0,...
//! ```
//!
//! Floats are written in the shortest form that parses back to the same
//! value, so a parsed trace equals the one that was written bit for bit.
//! Booleans are `0`/`1` and the supervisor mode is `follow_trajectory` or
//! `apf_active`. Metrics files are flat TOML.

use std::io::{BufRead, BufReader, Read, Write};

use crate::apf::{Activation, Mode};
use crate::config::AvoidanceMode;
use crate::sim::{Metrics, SimTrace, TickRecord};
use crate::trajectory::UavState;
use crate::{Error, Result, Vec3};

pub const FORMAT_TAG: &str = "rapf-trace v1";

/// Column order of the record rows.
pub const COLUMNS: [&str; 37] = [
    "tick",
    "t",
    "px",
    "py",
    "pz",
    "vx",
    "vy",
    "vz",
    "ax",
    "ay",
    "az",
    "jx",
    "jy",
    "jz",
    "yaw",
    "yaw_rate",
    "mode",
    "ref_px",
    "ref_py",
    "ref_pz",
    "ref_vx",
    "ref_vy",
    "ref_vz",
    "ref_yaw",
    "ref_yaw_rate",
    "ft_x",
    "ft_y",
    "ft_z",
    "fm_x",
    "fm_y",
    "fm_z",
    "f_t",
    "clusters",
    "snap_x",
    "snap_y",
    "snap_z",
    "soft",
];

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::FollowTrajectory => "follow_trajectory",
        Mode::ApfActive => "apf_active",
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "follow_trajectory" => Ok(Mode::FollowTrajectory),
        "apf_active" => Ok(Mode::ApfActive),
        other => Err(Error::Trace(format!("unknown supervisor mode `{other}`"))),
    }
}

/// Shortest round-trip representation.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn record_fields(r: &TickRecord) -> Vec<String> {
    let mut f = vec![r.tick.to_string(), num(r.t)];
    let vec3 = |f: &mut Vec<String>, v: &Vec3| f.extend(v.iter().map(|x| num(*x)));
    vec3(&mut f, &r.position);
    vec3(&mut f, &r.velocity);
    vec3(&mut f, &r.acceleration);
    vec3(&mut f, &r.jerk);
    f.push(num(r.yaw));
    f.push(num(r.yaw_rate));
    f.push(mode_name(r.mode).into());
    vec3(&mut f, &r.reference.position);
    vec3(&mut f, &r.reference.velocity);
    f.push(num(r.reference.yaw));
    f.push(num(r.reference.yaw_rate));
    vec3(&mut f, &r.force_translational);
    vec3(&mut f, &r.force_modified);
    f.push(num(r.f_t));
    f.push(r.clusters.to_string());
    vec3(&mut f, &r.snap);
    f.push(if r.soft { "1" } else { "0" }.into());
    f
}

pub fn write_trace<W: Write>(mut out: W, trace: &SimTrace) -> Result<()> {
    writeln!(out, "# {FORMAT_TAG} config_sha256={} mode={}", trace.config_sha256, trace.mode)?;
    for a in &trace.activations {
        writeln!(out, "# activation t_k={} t_o={}", num(a.t_k), num(a.t_o))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in &trace.records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

fn header_value<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .ok_or_else(|| Error::Trace(format!("header line lacks `{key}=`: {line}")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Trace(format!("`{s}` is not a number in column `{what}`")))
}

fn parse_record(row: &csv::StringRecord) -> Result<TickRecord> {
    if row.len() != COLUMNS.len() {
        return Err(Error::Trace(format!(
            "expected {} fields, got {} at tick row {:?}",
            COLUMNS.len(),
            row.len(),
            row.get(0)
        )));
    }
    let f = |i: usize| parse_f64(&row[i], COLUMNS[i]);
    let v3 = |i: usize| -> Result<Vec3> { Ok(Vec3::new(f(i)?, f(i + 1)?, f(i + 2)?)) };
    let int = |i: usize| -> Result<u64> {
        row[i]
            .parse()
            .map_err(|_| Error::Trace(format!("`{}` is not an integer in column `{}`", &row[i], COLUMNS[i])))
    };
    Ok(TickRecord {
        tick: int(0)?,
        t: f(1)?,
        position: v3(2)?,
        velocity: v3(5)?,
        acceleration: v3(8)?,
        jerk: v3(11)?,
        yaw: f(14)?,
        yaw_rate: f(15)?,
        mode: parse_mode(&row[16])?,
        reference: UavState {
            position: v3(17)?,
            velocity: v3(20)?,
            yaw: f(23)?,
            yaw_rate: f(24)?,
        },
        force_translational: v3(25)?,
        force_modified: v3(28)?,
        f_t: f(31)?,
        clusters: int(32)? as usize,
        snap: v3(33)?,
        soft: match &row[36] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Trace(format!("`{other}` is not 0 or 1 in column `soft`"))),
        },
    })
}

pub fn read_trace<R: Read>(input: R) -> Result<SimTrace> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header = line.trim_end();
    if !header.starts_with(&format!("# {FORMAT_TAG} ")) {
        return Err(Error::Trace(format!("not a `{FORMAT_TAG}` file: {header}")));
    }
    let config_sha256 = header_value(header, "config_sha256")?.to_string();
    let mode: AvoidanceMode = header_value(header, "mode")?
        .parse()
        .map_err(|e: Error| Error::Trace(e.to_string()))?;

    let mut activations = Vec::new();
    let mut rest = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if let Some(body) = line.trim_end().strip_prefix("# activation") {
            activations.push(Activation {
                t_k: parse_f64(header_value(body, "t_k")?, "t_k")?,
                t_o: parse_f64(header_value(body, "t_o")?, "t_o")?,
            });
        } else {
            rest.extend_from_slice(line.as_bytes());
            reader.read_to_end(&mut rest)?;
            break;
        }
    }

    let mut csv = csv::Reader::from_reader(rest.as_slice());
    let columns = csv.headers()?;
    if columns.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::Trace("column header does not match the v1 layout".into()));
    }
    let records = csv
        .records()
        .map(|row| parse_record(&row?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimTrace {
        config_sha256,
        mode,
        records,
        activations,
    })
}

pub fn metrics_to_toml(metrics: &Metrics) -> Result<String> {
    toml::to_string(metrics).map_err(|e| Error::InvalidArgument(format!("cannot serialise metrics: {e}")))
}

pub fn metrics_from_toml(text: &str) -> Result<Metrics> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}
