use std::fs;
use std::process::{Command, Output};

fn interf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interf")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Drops the trailing runtime column.
fn without_runtime(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn gen_graph_writes_an_edge_list() {
    let out = stdout(&interf(&["gen-graph", "--n", "6", "--graph", "path"]));
    assert_eq!(out, "6 5\n0 1\n1 2\n2 3\n3 4\n4 5\n");
    let a = stdout(&interf(&["gen-graph", "--n", "20", "--graph", "er", "--p", "0.3", "--seed", "9"]));
    let b = stdout(&interf(&["gen-graph", "--n", "20", "--graph", "er", "--p", "0.3", "--seed", "9"]));
    assert_eq!(a, b);
    let header: Vec<usize> = a.lines().next().unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
    assert_eq!(header[0], 20);
    assert_eq!(a.lines().count(), header[1] + 1);
}

#[test]
fn commands_are_deterministic() {
    let runs: [&[&str]; 3] = [
        &["single", "--n", "12", "--method", "eigenvector,lifted-phase", "--eta", "1e-4", "--max-iter", "200", "--seed", "5"],
        &["sweep-gap", "--n", "12", "--k", "1,3", "--p", "0.4", "--trials", "2", "--seed", "5"],
        &["sweep-noise", "--n", "12", "--eta-rel", "1e-4:1e-2", "--eta-points", "3", "--trials", "2"],
    ];
    for args in runs {
        let a = stdout(&interf(args));
        let b = stdout(&interf(args));
        assert!(a.starts_with("trial,seed,graph,n,m,k,p,edges,"));
        assert!(a.lines().count() > 1);
        assert_eq!(without_runtime(&a), without_runtime(&b), "{args:?}");
    }
}

#[test]
fn errors_are_one_machine_readable_line() {
    let o = interf(&["single", "--method", "nope"]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: kind=invalid-argument message="), "{err}");

    let o = interf(&["sweep-gap", "--n", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: kind=config message="));

    let o = interf(&["single", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: kind=usage message="));
}

#[test]
fn config_file_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "n = 10\nmethod = \"lifted-phase\"\ngraph = \"path+k\"\nk = 3\neta = 1e-4\nmax-iter = 50\nseed = 2\n",
    )
    .unwrap();
    let trace = dir.path().join("trace.csv");
    let vector = dir.path().join("x.csv");
    let out = dir.path().join("rows.csv");
    let o = interf(&[
        "single",
        "--config",
        cfg.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--vector",
        vector.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    stdout(&o);
    let rows = fs::read_to_string(&out).unwrap();
    let row = rows.lines().nth(1).unwrap();
    assert!(row.contains(",path+k,10,,3,"), "{row}");
    assert!(row.contains(",lifted-phase,"));
    let trace = fs::read_to_string(&trace).unwrap();
    assert_eq!(trace.lines().next(), Some("method,iter,misfit,primal_res,dual_res"));
    assert_eq!(trace.lines().count(), 51);
    assert_eq!(fs::read_to_string(&vector).unwrap().lines().count(), 11);

    // flags override the file
    let o = interf(&["single", "--config", cfg.to_str().unwrap(), "--n", "8"]);
    assert!(stdout(&o).lines().nth(1).unwrap().contains(",path+k,8,"));

    fs::write(&cfg, "unknown-key = 1\n").unwrap();
    let o = interf(&["single", "--config", cfg.to_str().unwrap()]);
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: kind=config"));
}
