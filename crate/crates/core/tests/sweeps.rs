use std::time::Duration;

use sensim::experiment::{read_rows, run_points, CSV_HEADER};
use sensim::{run_single, run_sweep, AccessMethod, SimParams, SweepSpec};

fn base() -> SimParams {
    SimParams {
        access: AccessMethod::Edca,
        sim_duration: Duration::from_millis(250),
        ..SimParams::default()
    }
}

#[test]
fn sweep_output_is_independent_of_jobs() {
    let spec = SweepSpec::new(1, &base()).unwrap();
    let mut one = Vec::new();
    let mut four = Vec::new();
    let rows = run_sweep(&spec, &mut one, 1).unwrap();
    run_sweep(&spec, &mut four, 4).unwrap();
    assert_eq!(one, four);
    assert_eq!(rows.len(), 64);

    let text = String::from_utf8(one).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(read_rows(text.as_bytes()).unwrap(), rows);
}

#[test]
fn sweep_rows_match_single_runs() {
    let spec = SweepSpec::new(3, &base()).unwrap();
    let rows = run_sweep(&spec, std::io::sink(), 2).unwrap();
    for (p, row) in spec.points.iter().zip(&rows).step_by(3) {
        assert_eq!(&run_single(p).unwrap(), row);
        assert_eq!(&row.params(&base()), p);
    }
    let runs = run_points(&spec.points[..4], 2).unwrap();
    assert_eq!(runs.len(), 4);
    assert_eq!(runs[0], sensim::simulate(&spec.points[0]).unwrap());
}
