//! CSV emission with a frozen column order. Numbers are written with 17
//! significant digits so that parsing them back is exact.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::kinematics::ShapeSample;
use crate::sim::Trace;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trace header. Strain and wrench column counts come from the first record;
/// an empty trace gets only the fixed columns.
pub fn trace_header(trace: &Trace) -> Vec<String> {
    let dof = trace.strains.first().map_or(0, |q| q.as_vector().len());
    let wrench = trace.wrenches.first().map_or(0, |w| w.len());
    let mut h = vec!["t".to_string()];
    h.extend((1..=dof).map(|i| format!("q_bar_{i}")));
    h.extend(["tip_x", "tip_y", "tip_z", "r_x", "r_y", "r_z"].map(String::from));
    h.extend((1..=wrench).map(|i| format!("wrench_{i}")));
    h.push("error".into());
    h.push("energy".into());
    h
}

pub fn write_trace<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace))?;
    for i in 0..trace.len() {
        let q_bar = trace.strains[i].offset();
        let tip = trace.tip_poses[i].position;
        let r = trace.tip_rotvecs[i];
        let mut row = vec![num(trace.times[i])];
        row.extend(q_bar.iter().map(|v| num(*v)));
        row.extend(tip.iter().chain(r.iter()).map(|v| num(*v)));
        row.extend(trace.wrenches[i].iter().map(|v| num(*v)));
        row.push(num(trace.errors[i]));
        row.push(num(trace.energies[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    write_trace(trace, std::fs::File::create(path)?)
}

pub const SHAPE_HEADER: [&str; 13] = [
    "X", "x", "y", "z", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33",
];

pub fn write_shape<W: Write>(shape: &[ShapeSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SHAPE_HEADER)?;
    for s in shape {
        let p = s.pose.position;
        let r = s.pose.rotation;
        let mut row = vec![num(s.arclength), num(p.x), num(p.y), num(p.z)];
        for i in 0..3 {
            for j in 0..3 {
                row.push(num(r[(i, j)]));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_shape_csv(shape: &[ShapeSample], path: &Path) -> Result<()> {
    write_shape(shape, std::fs::File::create(path)?)
}
