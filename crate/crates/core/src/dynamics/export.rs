use std::io::Write;

use serde::Serialize;

use super::{DynamicsError, RunMetadata, RunSummary, Trajectory};
use crate::dynamics::PeriodRecord;

pub const TRAJECTORY_SCHEMA: &str = "dqm.trajectory.v1";
pub const SUMMARY_SCHEMA: &str = "dqm.summary.v1";

/// Header `t,k,n_1..n_N,a_1..a_N,late_1..late_N,cost_1..cost_N`.
pub fn csv_header(players: usize) -> Vec<String> {
    let mut header = vec!["t".to_string(), "k".to_string()];
    for prefix in ["n", "a", "late", "cost"] {
        header.extend((1..=players).map(|i| format!("{prefix}_{i}")));
    }
    header
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), DynamicsError> {
    let mut writer = csv::Writer::from_writer(out);
    let players = traj.metadata.params.players();
    let export = |e: csv::Error| DynamicsError::Export(e.to_string());
    writer.write_record(csv_header(players)).map_err(export)?;
    for p in &traj.periods {
        let mut row = vec![p.t.to_string(), p.total.to_string()];
        row.extend(p.counts.iter().map(u64::to_string));
        row.extend(p.actions.iter().map(usize::to_string));
        row.extend(p.late.iter().map(u64::to_string));
        row.extend(p.costs.iter().map(f64::to_string));
        writer.write_record(&row).map_err(export)?;
    }
    writer.flush().map_err(|e| DynamicsError::Export(e.to_string()))
}

#[derive(Serialize)]
struct TrajectoryDocument<'a> {
    schema: &'static str,
    /// Flat configuration text that reproduces this file.
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a str>,
    metadata: &'a RunMetadata,
    final_counts: &'a [u64],
    periods: &'a [PeriodRecord],
}

pub fn write_trajectory_json<W: Write>(
    traj: &Trajectory,
    config: Option<&str>,
    mut out: W,
) -> Result<(), DynamicsError> {
    let doc = TrajectoryDocument {
        schema: TRAJECTORY_SCHEMA,
        config,
        metadata: &traj.metadata,
        final_counts: &traj.final_counts,
        periods: &traj.periods,
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| DynamicsError::Export(e.to_string()))?;
    out.write_all(b"\n").map_err(|e| DynamicsError::Export(e.to_string()))
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    schema: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory_file: Option<&'a str>,
    summary: &'a RunSummary,
}

pub fn write_summary_json<W: Write>(
    summary: &RunSummary,
    config: Option<&str>,
    trajectory_file: Option<&str>,
    mut out: W,
) -> Result<(), DynamicsError> {
    let doc = SummaryDocument {
        schema: SUMMARY_SCHEMA,
        config,
        trajectory_file,
        summary,
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| DynamicsError::Export(e.to_string()))?;
    out.write_all(b"\n").map_err(|e| DynamicsError::Export(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run, PolicyKind, RunOptions};
    use crate::queue::{ModelParams, PenaltySchedule};
    use crate::rational::Rational;

    fn output() -> crate::dynamics::RunOutput {
        let p = ModelParams::new(3, 5, PenaltySchedule::constant(Rational::new(1, 2))).unwrap();
        run(&p, &PolicyKind::LastSlot, 3, 0, &RunOptions::default()).unwrap()
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_trajectory_csv(&output().trajectory, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "t,k,n_1,n_2,n_3,a_1,a_2,a_3,late_1,late_2,late_3,cost_1,cost_2,cost_3"
        );
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,3,1,1,1,4,4,4,"));
    }

    #[test]
    fn json_carries_metadata() {
        let mut buf = Vec::new();
        write_trajectory_json(&output().trajectory, Some("model.players = 3"), &mut buf).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(value["schema"], TRAJECTORY_SCHEMA);
        assert_eq!(value["metadata"]["seed"], 0);
        assert_eq!(value["metadata"]["policy"]["kind"], "last_slot");
        assert_eq!(value["periods"].as_array().unwrap().len(), 3);
        let final_total: u64 = value["final_counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .sum();
        assert_eq!(final_total, 9);
    }
}
