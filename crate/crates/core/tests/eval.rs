use hsw_core::config::{ConstraintMode, ScenarioConfig};
use hsw_core::eval::export::{write_case, write_summaries, RECORDS_HEADER};
use hsw_core::eval::{case_scenario, run_case, ExperimentCase, PnGains, PolicySource, RunOptions};

fn pn() -> PolicySource<'static> {
    PolicySource::Pn(PnGains::for_vehicle(&ScenarioConfig::default().vehicle))
}

#[test]
fn cases_monitor_constraints() {
    for case in ExperimentCase::standard() {
        assert_eq!(case_scenario(&ScenarioConfig::default(), case).episode.constraints, ConstraintMode::MonitorOnly);
    }
}

#[test]
fn run_case_is_deterministic_and_counts_add_up() {
    let opts = RunOptions { episodes: 8, seed: 21, traces: 2 };
    let a = run_case(ExperimentCase::Divert(10.0), &ScenarioConfig::default(), &pn(), opts).unwrap();
    let b = run_case(ExperimentCase::Divert(10.0), &ScenarioConfig::default(), &pn(), opts).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());

    let s = &a.summary;
    assert_eq!(s.episodes, 8);
    assert_eq!(s.terminations.values().sum::<usize>(), 8);
    assert!(s.violation_types.values().sum::<usize>() <= 8);
    for p in [s.success_5m_pct, s.success_10m_pct, s.violation_pct] {
        assert!((0.0..=100.0).contains(&p));
    }
    assert!(s.success_5m_pct <= s.success_10m_pct);
    assert_eq!(a.records.iter().filter(|r| r.trace.is_some()).count(), 2);
    let max_load = a.records.iter().map(|r| r.max_load).fold(0.0, f64::max);
    assert_eq!(s.load.max, max_load);
}

#[test]
fn exports_write_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { episodes: 3, seed: 2, traces: 1 };
    let r = run_case(ExperimentCase::Optim, &ScenarioConfig::default(), &pn(), opts).unwrap();
    let written = write_case(dir.path(), &r.records).unwrap();
    for name in ["records.csv", "scatter.csv", "target_dispersion.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(written.iter().any(|p| p.ends_with("trajectories/traj_00000.csv")));
    assert!(written.iter().any(|p| p.ends_with("trajectories/rel_00000.csv")));

    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let mut lines = records.lines();
    assert_eq!(lines.next().unwrap(), RECORDS_HEADER);
    assert_eq!(lines.count(), 3);

    let rel = std::fs::read_to_string(dir.path().join("trajectories/rel_00000.csv")).unwrap();
    let last: Vec<f64> = rel.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let miss = (last[1].powi(2) + last[2].powi(2) + last[3].powi(2)).sqrt();
    assert!((miss - r.records[0].miss_distance).abs() < 1e-6 * miss.max(1.0));

    write_summaries(dir.path(), &[r.summary]).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("summary.json").exists());
    assert!(std::fs::read_to_string(dir.path().join("summary.txt")).unwrap().contains("Constraint peaks"));
}
