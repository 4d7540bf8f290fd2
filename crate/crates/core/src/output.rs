//! Trajectory CSV, SVG plots and batch summaries.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{AgentState, Obstacle, Vec2};
use crate::herding::Stage;
use crate::scenario::Scenario;
use crate::sim::{LogRow, SafetySample, TrajectoryLog};

pub fn trajectory_header(n_attackers: usize, n_defenders: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    let agents = |prefix: char, n: usize, fields: &[&str], h: &mut Vec<String>| {
        for i in 0..n {
            for f in fields {
                h.push(format!("{prefix}{i}_{f}"));
            }
        }
    };
    agents('a', n_attackers, &["x", "y", "vx", "vy"], &mut h);
    agents('d', n_defenders, &["x", "y", "vx", "vy"], &mut h);
    agents('a', n_attackers, &["ux", "uy"], &mut h);
    agents('d', n_defenders, &["ux", "uy"], &mut h);
    h.push("phase".into());
    h.extend(SafetySample::NAMES.iter().map(|s| s.to_string()));
    h
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv { path: path.to_path_buf(), message: e.to_string() }
}

pub fn write_trajectory(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory_to(log, file).map_err(|e| csv_err(path, e))
}

pub fn write_trajectory_to<W: Write>(log: &TrajectoryLog, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(BufWriter::new(out));
    w.write_record(trajectory_header(log.n_attackers, log.n_defenders))?;
    let mut rec: Vec<String> = Vec::new();
    for row in &log.rows {
        rec.clear();
        rec.push(row.time.to_string());
        for s in row.attackers.iter().chain(&row.defenders) {
            for x in [s.position.x, s.position.y, s.velocity.x, s.velocity.y] {
                rec.push(x.to_string());
            }
        }
        for u in row.attacker_controls.iter().chain(&row.defender_controls) {
            rec.push(u.x.to_string());
            rec.push(u.y.to_string());
        }
        rec.push(row.stage.name().to_string());
        rec.extend(row.metrics.values().iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a trajectory CSV back into rows; agent counts come from the header.
pub fn read_trajectory(path: &Path) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let count = |prefix: char| {
        header.iter().filter(|h| h.starts_with(prefix) && h.ends_with("_vx")).count()
    };
    let (na, nd) = (count('a'), count('d'));
    if header.len() != trajectory_header(na, nd).len() {
        return Err(csv_err(path, "unexpected header layout"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|e| csv_err(path, format!("column {k}: {e}")))
        };
        let mut k = 1;
        let states = |n: usize, k: &mut usize| -> Result<Vec<AgentState>> {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(AgentState::new(Vec2::new(num(*k)?, num(*k + 1)?), Vec2::new(num(*k + 2)?, num(*k + 3)?)));
                *k += 4;
            }
            Ok(v)
        };
        let attackers = states(na, &mut k)?;
        let defenders = states(nd, &mut k)?;
        let controls = |n: usize, k: &mut usize| -> Result<Vec<Vec2>> {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(Vec2::new(num(*k)?, num(*k + 1)?));
                *k += 2;
            }
            Ok(v)
        };
        let attacker_controls = controls(na, &mut k)?;
        let defender_controls = controls(nd, &mut k)?;
        let stage = Stage::from_name(&rec[k]).ok_or_else(|| csv_err(path, format!("unknown phase {}", &rec[k])))?;
        k += 1;
        let mut m = [0.0; 5];
        for (i, slot) in m.iter_mut().enumerate() {
            *slot = num(k + i)?;
        }
        rows.push(LogRow {
            time: num(0)?,
            attackers,
            defenders,
            attacker_controls,
            defender_controls,
            stage,
            metrics: SafetySample::from_values(m),
        });
    }
    Ok(rows)
}

/// Above this many samples per polyline the SVG keeps every k-th point.
pub const SVG_MAX_POINTS: usize = 100_000;

fn decimate<T: Copy>(pts: &[T], limit: usize) -> Vec<T> {
    if pts.len() <= limit {
        return pts.to_vec();
    }
    let stride = pts.len().div_ceil(limit);
    let mut out: Vec<T> = pts.iter().step_by(stride).copied().collect();
    if let Some(&last) = pts.last() {
        out.push(last);
    }
    out
}

/// Maps world coordinates into an SVG viewport with y pointing up.
struct Frame {
    min: Vec2,
    scale: f64,
    height: f64,
    pad: f64,
}

impl Frame {
    fn fit(lo: Vec2, hi: Vec2, width: f64) -> Self {
        let pad = 20.0;
        let span = (hi - lo).x.max((hi - lo).y).max(1e-9);
        let scale = (width - 2.0 * pad) / span;
        Frame { min: lo, scale, height: (hi.y - lo.y) * scale + 2.0 * pad, pad }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        (self.pad + (p.x - self.min.x) * self.scale, self.height - self.pad - (p.y - self.min.y) * self.scale)
    }

    fn len(&self, d: f64) -> f64 {
        d * self.scale
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[Vec2], style: &str) {
    if pts.is_empty() {
        return;
    }
    out.push_str("<polyline fill=\"none\" ");
    out.push_str(style);
    out.push_str(" points=\"");
    for p in decimate(pts, SVG_MAX_POINTS) {
        let (x, y) = frame.map(p);
        let _ = write!(out, "{x:.2},{y:.2} ");
    }
    out.push_str("\"/>\n");
}

fn contour_points(ob: &Obstacle, samples: usize) -> Vec<Vec2> {
    let n2 = 2.0 * ob.exponent as f64;
    let scale = (1.0 + ob.level).powf(1.0 / n2);
    (0..=samples)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let (s, c) = phi.sin_cos();
            let rho = (c.abs().powf(n2) + s.abs().powf(n2)).powf(-1.0 / n2);
            ob.center + Vec2::new(ob.semi_axis_x * scale * c * rho, ob.semi_axis_y * scale * s * rho)
        })
        .collect()
}

const ATTACKER_COLOR: &str = "#c0392b";
const DEFENDER_COLOR: &str = "#1f5fa8";

/// Path plot: obstacles with their envelope contours, protected and safe
/// areas, agent paths, and the StringNet when herding began.
pub fn render_paths_svg(log: &TrajectoryLog, scenario: &Scenario) -> Result<String> {
    let obstacles = scenario.obstacles()?;
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Vec2| {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    };
    for d in [&scenario.protected_area, &scenario.safe_area] {
        grow(d.center - Vec2::new(d.radius, d.radius));
        grow(d.center + Vec2::new(d.radius, d.radius));
    }
    let contours: Vec<Vec<Vec2>> = obstacles.iter().map(|o| contour_points(o, 256)).collect();
    contours.iter().flatten().for_each(|&p| grow(p));
    for row in &log.rows {
        row.attackers.iter().chain(&row.defenders).for_each(|s| grow(s.position));
    }
    if log.rows.is_empty() {
        scenario.defenders.iter().for_each(|s| grow(s.position));
    }
    let frame = Frame::fit(lo, hi, 800.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"{:.0}\" viewBox=\"0 0 800 {:.0}\">",
        frame.height, frame.height
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (name, d, color) in [("protected", &scenario.protected_area, "#f5b7b1"), ("safe", &scenario.safe_area, "#abebc6")] {
        let (x, y) = frame.map(d.center);
        let _ = writeln!(
            s,
            "<circle class=\"{name}\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{:.2}\" fill=\"{color}\" fill-opacity=\"0.5\" stroke=\"#555\"/>",
            frame.len(d.radius)
        );
    }
    for (ob, contour) in obstacles.iter().zip(&contours) {
        let (x, y) = frame.map(ob.center + Vec2::new(-0.5 * ob.width, 0.5 * ob.height));
        let _ = writeln!(
            s,
            "<rect class=\"obstacle\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#7f8c8d\"/>",
            frame.len(ob.width),
            frame.len(ob.height)
        );
        polyline(&mut s, &frame, contour, "stroke=\"#7f8c8d\" stroke-dasharray=\"4 3\"");
    }
    for i in 0..log.n_attackers {
        let pts: Vec<Vec2> = log.rows.iter().map(|r| r.attackers[i].position).collect();
        polyline(&mut s, &frame, &pts, &format!("stroke=\"{ATTACKER_COLOR}\" stroke-width=\"1.2\""));
    }
    for j in 0..log.n_defenders {
        let pts: Vec<Vec2> = log.rows.iter().map(|r| r.defenders[j].position).collect();
        polyline(&mut s, &frame, &pts, &format!("stroke=\"{DEFENDER_COLOR}\" stroke-width=\"1.2\""));
    }
    polyline(&mut s, &frame, &log.virtual_path, "stroke=\"#555\" stroke-dasharray=\"2 2\"");
    if let Some(t) = log.time_of(Stage::Herding) {
        if let Some(row) = log.rows.iter().find(|r| r.time >= t) {
            for &(a, b) in &log.strings {
                let (x1, y1) = frame.map(row.defenders[a].position);
                let (x2, y2) = frame.map(row.defenders[b].position);
                let _ = writeln!(
                    s,
                    "<line class=\"string\" x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{DEFENDER_COLOR}\" stroke-width=\"2\"/>"
                );
            }
        }
    }
    if let Some(row) = log.rows.last() {
        for (st, color) in row.attackers.iter().map(|a| (a, ATTACKER_COLOR)).chain(row.defenders.iter().map(|d| (d, DEFENDER_COLOR))) {
            let (x, y) = frame.map(st.position);
            let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>");
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Metrics plot: the five ratios against time with the y = 1 line, and
/// per-agent input norms below.
pub fn render_metrics_svg(log: &TrajectoryLog) -> String {
    let (w, ph) = (800.0, 260.0);
    let pad = 40.0;
    let t_end = log.rows.last().map_or(1.0, |r| r.time.max(1e-9));
    let finite_max = |f: &dyn Fn(&LogRow) -> f64| {
        log.rows.iter().map(f).filter(|x| x.is_finite()).fold(0.0f64, f64::max)
    };
    let delta_top = finite_max(&|r| r.metrics.max()).max(1.0) * 1.1;
    let u_top = finite_max(&|r| {
        r.attacker_controls.iter().chain(&r.defender_controls).map(|u| u.norm()).fold(0.0, f64::max)
    })
    .max(1e-9)
        * 1.1;
    let mut s = String::new();
    let _ = writeln!(s, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{}\">", 2.0 * ph + pad);
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let x_of = |t: f64| pad + (w - 2.0 * pad) * t / t_end;
    let panel = |s: &mut String, top: f64, ymax: f64, title: &str| {
        let _ = writeln!(
            s,
            "<rect x=\"{pad}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
            w - 2.0 * pad,
            ph - pad
        );
        let _ = writeln!(
            s,
            "<text x=\"{pad}\" y=\"{}\" font-size=\"12\">{title} (axis 0 to {ymax:.3}, t 0 to {t_end:.2} s)</text>",
            top - 4.0
        );
    };
    let series = |s: &mut String, top: f64, ymax: f64, vals: &[(f64, f64)], color: &str, class: &str| {
        let y_of = |v: f64| top + (ph - pad) * (1.0 - (v.min(ymax) / ymax));
        let pts: Vec<(f64, f64)> = decimate(vals, SVG_MAX_POINTS);
        let _ = write!(s, "<polyline class=\"{class}\" fill=\"none\" stroke=\"{color}\" points=\"");
        for (t, v) in pts {
            let v = if v.is_finite() { v } else { ymax };
            let _ = write!(s, "{:.2},{:.2} ", x_of(t), y_of(v));
        }
        s.push_str("\"/>\n");
    };
    let top1 = pad / 2.0 + 10.0;
    panel(&mut s, top1, delta_top, "critical distance ratios");
    let y1 = top1 + (ph - pad) * (1.0 - 1.0 / delta_top);
    let _ = writeln!(
        s,
        "<line class=\"safety\" x1=\"{pad}\" y1=\"{y1:.2}\" x2=\"{:.2}\" y2=\"{y1:.2}\" stroke=\"black\" stroke-dasharray=\"6 4\"/>",
        w - pad
    );
    let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
    for (k, name) in SafetySample::NAMES.iter().enumerate() {
        let vals: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.time, r.metrics.values()[k])).collect();
        series(&mut s, top1, delta_top, &vals, colors[k], name);
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{}\">{name}</text>",
            w - pad - 70.0,
            top1 + 30.0 + 14.0 * (k + 1) as f64,
            colors[k]
        );
    }
    let top2 = top1 + ph;
    panel(&mut s, top2, u_top, "input norms");
    for i in 0..log.n_attackers {
        let vals: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.time, r.attacker_controls[i].norm())).collect();
        series(&mut s, top2, u_top, &vals, ATTACKER_COLOR, "attacker-input");
    }
    for j in 0..log.n_defenders {
        let vals: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.time, r.defender_controls[j].norm())).collect();
        series(&mut s, top2, u_top, &vals, DEFENDER_COLOR, "defender-input");
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One line of a batch summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub run: usize,
    pub seed: u64,
    pub outcome: String,
    pub final_time: f64,
    pub max_metrics: SafetySample,
    pub near_violations: usize,
}

pub fn batch_header() -> Vec<String> {
    let mut h: Vec<String> = ["run", "seed", "outcome", "final_time"].iter().map(|s| s.to_string()).collect();
    h.extend(SafetySample::NAMES.iter().map(|n| format!("max_{n}")));
    h.push("near_violation_steps".into());
    h
}

pub fn write_batch_summary(rows: &[BatchRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let run = |w: &mut csv::Writer<BufWriter<File>>| -> std::result::Result<(), csv::Error> {
        w.write_record(batch_header())?;
        for r in rows {
            let mut rec = vec![r.run.to_string(), r.seed.to_string(), r.outcome.clone(), r.final_time.to_string()];
            rec.extend(r.max_metrics.values().iter().map(|x| x.to_string()));
            rec.push(r.near_violations.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(|e| csv_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimation_keeps_ends_and_respects_limit() {
        let pts: Vec<usize> = (0..1001).collect();
        let d = decimate(&pts, 100);
        assert!(d.len() <= 101);
        assert_eq!(d[0], 0);
        assert_eq!(*d.last().unwrap(), 1000);
        assert_eq!(decimate(&pts[..50], 100), pts[..50].to_vec());
    }
}
