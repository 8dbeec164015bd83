use std::fs;
use std::process::{Command, Output};

const HEADER: &str =
    "nsta,numapp,stra,saw_code,access,seed,duration_s,pso_pct,psm_pct,throughput_mbps,pawd_pct,window_count";

fn sensim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn single_run_to_stdout() {
    let out = sensim(&["--access", "pifs", "--nsta", "16", "--duration-s", "1"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some(HEADER));
    let rows = records(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "16");
    assert_eq!(&rows[0][4], "pifs");
    assert_eq!(&rows[0][8], "0.0");
    assert_eq!(&rows[0][11], "9");
}

#[test]
fn sweep_writes_the_grid_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c2.csv");
    let out = sensim(&[
        "--config",
        "2",
        "--access",
        "pifs",
        "--duration-s",
        "0.3",
        "--jobs",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = records(&fs::read_to_string(&path).unwrap());
    assert_eq!(rows.len(), 25);
    let first: Vec<(&str, &str)> = rows.iter().take(5).map(|r| (&r[1], &r[0])).collect();
    assert_eq!(
        first,
        [("1", "1"), ("1", "4"), ("1", "8"), ("1", "12"), ("1", "16")]
    );
    assert_eq!(&rows[24][1], "8");
}

#[test]
fn sweeps_do_not_depend_on_thread_count() {
    let run = |jobs| {
        let out = sensim(&[
            "--config",
            "3",
            "--access",
            "edca",
            "--duration-s",
            "0.3",
            "--jobs",
            jobs,
        ]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn trace_and_ledger_files() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let ledger = dir.path().join("l.csv");
    let out = sensim(&[
        "--access",
        "edca",
        "--nsta",
        "2",
        "--saw-duration",
        "50",
        "--duration-s",
        "0.5",
        "--trace",
        trace.to_str().unwrap(),
        "--ledger",
        ledger.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let trace = fs::read_to_string(trace).unwrap();
    assert_eq!(
        trace.lines().next(),
        Some("timestamp_us,kind,subject,detail")
    );
    assert!(trace.lines().any(|l| l.contains(",FrameEnd,0,NDPA ")));
    assert!(trace.lines().any(|l| l.starts_with("0.000,WindowOpen,0,")));

    let ledger = fs::read_to_string(ledger).unwrap();
    let mut lines = ledger.lines();
    assert_eq!(
        lines.next(),
        Some("window_index,required_bytes,sent_bytes,classification,available_us")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn param_file_is_applied_before_flags() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.txt");
    fs::write(
        &params,
        "# overrides\nnsta = 9\nnumapp = 2\naccess = none\nduration_s = 0.2\n",
    )
    .unwrap();
    let out = sensim(&["--param-file", params.to_str().unwrap(), "--numapp", "6"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = records(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(&rows[0][0], "9");
    assert_eq!(&rows[0][1], "6");
    assert_eq!(&rows[0][4], "none");
    assert_eq!(&rows[0][8], "");
}

#[test]
fn bad_input_fails_with_a_message() {
    for args in [
        &["--nsta", "17"][..],
        &["--stra", "3x2"],
        &["--saw-duration", "0"],
        &["--access", "csma"],
        &["--config", "4"],
        &["--config", "1", "--nsta", "3"],
        &["--duration-s", "-1"],
        &["--param-file", "/nonexistent/params.txt"],
    ] {
        let out = sensim(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(out.stdout.is_empty(), "{args:?} wrote output");
        assert!(!out.stderr.is_empty(), "{args:?} gave no message");
    }
}
