//! CSV/JSON/text outputs of an evaluation run.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::env::trace::write_trace;

use super::{CaseSummary, EpisodeRecord};

pub const SUMMARY_HEADER: &str =
    "Case,Policy,Episodes,Miss mean (m),Miss sd (m),Speed mean (m/s),Speed sd (m/s),Miss < 5m (%),Miss < 10m (%),Violation (%),Type";

pub const RECORDS_HEADER: &str = "episode,seed,reason,miss_m,miss_x,miss_y,miss_z,terminal_speed_mps,time_of_flight_s,\
steps,total_reward,bonus,target_x,target_y,diverts,first_violation,violations,max_qdot,max_q,max_n";

fn create(path: &Path) -> io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn summary_row(s: &CaseSummary) -> String {
    format!(
        "{},{},{},{:.3},{:.3},{:.1},{:.1},{:.1},{:.1},{:.1},{}",
        s.case,
        s.policy,
        s.episodes,
        s.miss.mean,
        s.miss.sd,
        s.terminal_speed.mean,
        s.terminal_speed.sd,
        s.success_5m_pct,
        s.success_10m_pct,
        s.violation_pct,
        s.dominant_violation()
    )
}

/// Human-readable performance and constraint tables.
pub fn summary_text(summaries: &[CaseSummary]) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:<14} {:>9} {:>9} {:>8} {:>7} {:>9} {:>10} {:>10} {:>5}",
        "Case", "Miss mu", "Miss sd", "V mu", "V sd", "<5m %", "<10m %", "Viol %", "Type"
    );
    for s in summaries {
        let _ = writeln!(
            t,
            "{:<14} {:>9.2} {:>9.2} {:>8.0} {:>7.0} {:>9.1} {:>10.1} {:>10.1} {:>5}",
            s.case,
            s.miss.mean,
            s.miss.sd,
            s.terminal_speed.mean,
            s.terminal_speed.sd,
            s.success_5m_pct,
            s.success_10m_pct,
            s.violation_pct,
            s.dominant_violation()
        );
    }
    for s in summaries {
        let _ = writeln!(t, "\nConstraint peaks ({}, {} episodes)", s.case, s.episodes);
        let _ = writeln!(t, "{:<26} {:>10} {:>10} {:>10}", "Constraint", "mean", "sd", "max");
        for (name, st, scale) in [
            ("Heating rate (kW/m^2)", &s.heating_rate, 1e-3),
            ("Load (m/s^2)", &s.load, 1.0),
            ("Dynamic pressure (kPa)", &s.dynamic_pressure, 1e-3),
        ] {
            let _ =
                writeln!(t, "{:<26} {:>10.0} {:>10.0} {:>10.0}", name, st.mean * scale, st.sd * scale, st.max * scale);
        }
        let _ = writeln!(
            t,
            "Time of flight (s): mean {:.1} sd {:.1} min {:.1} max {:.1}",
            s.time_of_flight.mean, s.time_of_flight.sd, s.time_of_flight.min, s.time_of_flight.max
        );
    }
    t
}

pub fn write_summaries(dir: &Path, summaries: &[CaseSummary]) -> io::Result<Vec<PathBuf>> {
    let json = dir.join("summary.json");
    fs::write(&json, serde_json::to_string_pretty(summaries).map_err(io::Error::other)?)?;
    let csv = dir.join("summary.csv");
    let mut w = create(&csv)?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in summaries {
        writeln!(w, "{}", summary_row(s))?;
    }
    w.flush()?;
    let txt = dir.join("summary.txt");
    fs::write(&txt, summary_text(summaries))?;
    Ok(vec![json, csv, txt])
}

pub fn write_records(path: &Path, records: &[EpisodeRecord]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{RECORDS_HEADER}")?;
    for r in records {
        let kinds: Vec<&str> = r.violations.iter().map(|k| k.label()).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.seed,
            r.reason,
            r.miss_distance,
            r.miss_vector.x,
            r.miss_vector.y,
            r.miss_vector.z,
            r.terminal_speed,
            r.time_of_flight,
            r.steps,
            r.total_reward,
            r.bonus as u8,
            r.target_position.x,
            r.target_position.y,
            r.diverts,
            r.first_violation.map(|k| k.label()).unwrap_or("-"),
            if kinds.is_empty() { "-".to_string() } else { kinds.join("|") },
            r.max_heating_rate,
            r.max_dynamic_pressure,
            r.max_load
        )?;
    }
    w.flush()
}

/// Miss components along and across the terminal direction of travel.
pub fn downrange_crossrange(r: &EpisodeRecord) -> (f64, f64) {
    let (s, c) = r.terminal_heading.sin_cos();
    let m = r.miss_vector;
    (m.x * c + m.y * s, -m.x * s + m.y * c)
}

pub fn write_scatter(path: &Path, records: &[EpisodeRecord]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "episode,downrange_m,crossrange_m,vertical_m,miss_m")?;
    for r in records {
        let (d, c) = downrange_crossrange(r);
        writeln!(w, "{},{},{},{},{}", r.index, d, c, r.miss_vector.z, r.miss_distance)?;
    }
    w.flush()
}

pub fn write_target_dispersion(path: &Path, records: &[EpisodeRecord]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "episode,target_x_m,target_y_m")?;
    for r in records {
        writeln!(w, "{},{},{}", r.index, r.target_position.x, r.target_position.y)?;
    }
    w.flush()
}

/// Relative position (vehicle minus target) per trace row, closed with the
/// closest-approach point so a direct hit ends at the origin.
pub fn write_relative(path: &Path, record: &EpisodeRecord) -> io::Result<()> {
    let Some(trace) = &record.trace else { return Ok(()) };
    let mut w = create(path)?;
    writeln!(w, "t,dx,dy,dz")?;
    for row in trace {
        writeln!(w, "{},{},{},{}", row.t, row.x - row.target_x, row.y - row.target_y, row.z - row.target_z)?;
    }
    let m = record.miss_vector;
    writeln!(w, "{},{},{},{}", record.time_of_flight, m.x, m.y, m.z)?;
    w.flush()
}

/// Trace and relative-position files for every record carrying a trace.
pub fn write_trajectories(dir: &Path, records: &[EpisodeRecord]) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.trace.is_some()) {
        fs::create_dir_all(dir)?;
        let traj = dir.join(format!("traj_{:05}.csv", r.index));
        write_trace(create(&traj)?, r.trace.as_deref().unwrap_or_default())?;
        let rel = dir.join(format!("rel_{:05}.csv", r.index));
        write_relative(&rel, r)?;
        out.push(traj);
        out.push(rel);
    }
    Ok(out)
}

/// All per-case files into `dir`. Returns the written paths.
pub fn write_case(dir: &Path, records: &[EpisodeRecord]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let records_path = dir.join("records.csv");
    write_records(&records_path, records)?;
    let scatter = dir.join("scatter.csv");
    write_scatter(&scatter, records)?;
    let disp = dir.join("target_dispersion.csv");
    write_target_dispersion(&disp, records)?;
    let mut out = vec![records_path, scatter, disp];
    out.extend(write_trajectories(&dir.join("trajectories"), records)?);
    Ok(out)
}
