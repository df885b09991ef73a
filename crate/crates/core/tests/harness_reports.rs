use eikograph::config::ProblemSpec;
use eikograph::harness::{
    emit_report, run_convergence, runtime_linearity, ConvergenceTable, ReportFormat, SweepConfig,
};
use eikograph::io;
use eikograph::solver::FieldSpec;

fn small_sweep() -> SweepConfig {
    SweepConfig {
        problem: ProblemSpec::sphere_cap(),
        n_list: vec![200, 400],
        nu: 0.5,
        xi: 0.5,
        zeta: 0.5,
        tau: 1.0,
        m_star: 2,
        k1: 26.0,
        trials_per_n: 3,
        horizon: 2.0,
        seed_base: 99,
        snapshot_every: 2,
        record_runtime: false,
        dense_factor: 10,
        epsilon: None,
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = vec![];
    for run in 0..2 {
        let table = run_convergence(&small_sweep()).unwrap();
        let out = dir.path().join(format!("run{run}"));
        emit_report(&table, &out, ReportFormat::Csv, "# h").unwrap();
        emit_report(&table, &out, ReportFormat::Json, "# h").unwrap();
        io::write_errors(&out.join("errors.csv"), table.records(), "# h").unwrap();
        let read = |f: &str| std::fs::read(out.join(f)).unwrap();
        outputs.push((read("convergence.csv"), read("convergence.json"), read("summary.txt"), read("errors.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 2 + 2 * 3);
}

#[test]
fn empty_table_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let table = ConvergenceTable::from_records(vec![], 0);
    emit_report(&table, dir.path(), ReportFormat::Csv, "# h").unwrap();
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("rows: 0"));
}

#[test]
fn failed_trials_are_quarantined() {
    // A point boundary is too thin to catch any vertex at a tiny ε.
    let mut sweep = small_sweep();
    sweep.problem.boundary = eikograph::manifold::BoundarySpec::PointSet { points: vec![vec![0.0, 0.0, 1.0]] };
    sweep.epsilon = Some(vec![0.05, 0.9]);
    sweep.horizon = 0.2;
    let table = run_convergence(&sweep).unwrap();
    assert_eq!(table.groups[0].records.len(), 0);
    assert_eq!(table.groups[0].failures.len(), 3);
    assert!(table.groups[0].failures[0].reason.contains("empty boundary"));
    assert!(table.fit.is_none());
}

#[test]
fn nonuniform_potential_uses_the_steady_state_oracle() {
    let mut sweep = small_sweep();
    sweep.n_list = vec![300];
    sweep.trials_per_n = 1;
    sweep.horizon = 8.0;
    sweep.problem.potential = FieldSpec::CoordinateRamp { axis: 2, offset: 1.5, slope: -0.5 };
    let table = run_convergence(&sweep).unwrap();
    let r = &table.groups[0].records[0];
    assert!(r.sup_error.is_finite() && r.sup_error > 0.0);
}

#[test]
fn runtime_grows_near_linearly_in_edges() {
    let mut sweep = small_sweep();
    sweep.n_list = vec![2000, 6000];
    sweep.trials_per_n = 3;
    sweep.snapshot_every = 1;
    let table = run_convergence(&sweep).unwrap();
    let check = runtime_linearity(&table.timings);
    assert!(check.ok, "{check:?}");
}
