//! CSV and JSON writers.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! inputs give byte-identical files.

use std::io::Write;

use hh_core::certificate::CertSample;
use hh_core::hybrid::HybridArc;
use hh_core::model::Mode;
use hh_core::perturb::ProbeReport;
use serde::Serialize;

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "j", "x1", "x2", "q1", "q2"];
pub const CERTIFICATE_HEADER: [&str; 5] = ["t", "j", "dist", "d_Stilde", "bound"];
pub const PROBE_HEADER: [&str; 3] = ["delta", "start_id", "tail_offset"];

/// Writes `arc` as `t,j,x1,x2,q1,q2`.
///
/// Each flow segment contributes `density + 1` rows on a uniform grid that
/// includes both endpoints; a zero-length segment contributes one row. The
/// last row of segment `j` and the first of `j + 1` are the pre- and
/// post-jump rows. Returns the number of data rows.
pub fn emit_trajectory<W: Write>(arc: &HybridArc<Mode>, density: usize, sink: W) -> Result<usize, csv::Error> {
    let density = density.max(1);
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRAJECTORY_HEADER)?;
    let mut rows = 0;
    for seg in &arc.segments {
        let (q1, q2) = seg.mode.bits();
        let n = if seg.duration() > 0.0 { density } else { 0 };
        for i in 0..=n {
            let t = if i == n { seg.t_end } else { seg.t_start + seg.duration() * i as f64 / n as f64 };
            let x = seg.state_at(t);
            w.write_record([t.to_string(), seg.j.to_string(), x[0].to_string(), x[1].to_string(), q1.to_string(), q2.to_string()])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

/// Writes a certificate trace as `t,j,dist,d_Stilde,bound`.
pub fn emit_certificate<W: Write>(samples: &[CertSample], sink: W) -> Result<usize, csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CERTIFICATE_HEADER)?;
    for s in samples {
        w.write_record([s.t.to_string(), s.j.to_string(), s.dist.to_string(), s.d_stilde.to_string(), s.bound.to_string()])?;
    }
    w.flush()?;
    Ok(samples.len())
}

/// Writes probe rows as `delta,start_id,tail_offset`, followed by a summary
/// row `summary,<inversions>,<tail offset at δ = 0>`.
pub fn emit_probe<W: Write>(report: &ProbeReport, sink: W) -> Result<usize, csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PROBE_HEADER)?;
    for r in &report.rows {
        w.write_record([r.delta.to_string(), r.start_id.to_string(), r.tail_offset.to_string()])?;
    }
    w.write_record(["summary".to_string(), report.inversions.to_string(), report.zero_offset.to_string()])?;
    w.flush()?;
    Ok(report.rows.len() + 1)
}

pub fn emit_json<W: Write, T: Serialize + ?Sized>(value: &T, mut sink: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut sink, value)?;
    sink.write_all(b"\n")
}
