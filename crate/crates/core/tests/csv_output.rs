use std::fs;

use clustersim::output::{raw_path, render_raw, render_summary, summary_header};
use clustersim::{run_sweep, write_results, Metric, ParamKey, SimParams, SweepAxis, SweepSpec};

fn small() -> SimParams {
    SimParams {
        job_size: 16,
        warm_standbys: 2,
        working_pool_size: 20,
        spare_pool_size: 4,
        job_length: 1440.0,
        random_failure_rate: 1e-3,
        ..SimParams::default()
    }
}

#[test]
fn one_way_layout() {
    let spec = SweepSpec::one_way(
        "fraction",
        SweepAxis::new(ParamKey::SystematicFailureFraction, vec![0.1, 0.15, 0.2]),
        10,
        1,
    );
    let result = run_sweep(&spec, &small()).unwrap();
    assert_eq!(result.cells.len(), 3);
    assert!(result.cells.iter().all(|c| c.runs.len() == 10));

    let text = String::from_utf8(render_summary(&result).unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), 1 + 9 * Metric::ALL.len());
    assert_eq!(&header[..4], ["systematic_failure_fraction", "total_time_mean", "total_time_median", "total_time_stddev"]);
    assert_eq!(header.last(), Some(&"stalls_max"));
    assert!(lines[1].starts_with("0.1,"));
    assert!(lines[3].starts_with("0.2,"));
    assert!(text.ends_with('\n') && !text.contains('\r'));

    let raw = String::from_utf8(render_raw(&result).unwrap()).unwrap();
    let raw_lines: Vec<&str> = raw.lines().collect();
    assert_eq!(raw_lines.len(), 1 + 30);
    assert!(raw_lines[0].starts_with("systematic_failure_fraction,cell,replication,seed,total_time,"));
    assert!(raw_lines[11].starts_with("0.15,1,0,"));
}

#[test]
fn two_way_layout() {
    let spec = SweepSpec::two_way(
        "grid",
        SweepAxis::new(ParamKey::RecoveryTime, vec![10.0, 20.0, 30.0]),
        SweepAxis::new(ParamKey::WorkingPoolSize, vec![18.0, 20.0, 22.0]),
        2,
        5,
    );
    let result = run_sweep(&spec, &small()).unwrap();
    let header = summary_header(&result);
    assert_eq!(&header[..2], ["recovery_time", "working_pool_size"]);
    let text = String::from_utf8(render_summary(&result).unwrap()).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(keys[..4], [("10", "18"), ("10", "20"), ("10", "22"), ("20", "18")]);
}

#[test]
fn single_cell_single_replication_mean_is_the_run() {
    let spec = SweepSpec::one_way("one", SweepAxis::new(ParamKey::RecoveryTime, vec![20.0]), 1, 0);
    let result = run_sweep(&spec, &small()).unwrap();
    let cell = &result.cells[0];
    let run = &cell.runs[0];
    for metric in Metric::ALL {
        let s = cell.summary(metric);
        assert_eq!(s.mean, metric.value(run));
        assert_eq!(s.stddev, 0.0);
    }
}

#[test]
fn writes_summary_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let spec = SweepSpec::one_way("w", SweepAxis::new(ParamKey::WaitingTime, vec![10.0, 30.0]), 3, 2);
    let result = run_sweep(&spec, &small()).unwrap();
    write_results(&result, &path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), render_summary(&result).unwrap());
    assert_eq!(fs::read(raw_path(&path)).unwrap(), render_raw(&result).unwrap());
    let leftovers = fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 2);
}

#[test]
fn unwritable_destination_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing_dir").join("out.csv");
    let spec = SweepSpec::one_way("w", SweepAxis::new(ParamKey::WaitingTime, vec![10.0]), 1, 0);
    let result = run_sweep(&spec, &small()).unwrap();
    let err = write_results(&result, &path).unwrap_err();
    assert!(err.to_string().contains("missing_dir"), "{err}");
    assert!(!path.exists());
    assert!(!raw_path(&path).exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}
