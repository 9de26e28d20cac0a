use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvd")).args(args).env("RUST_LOG", "warn").output().expect("spawn pvd")
}

fn write_tiny_config(path: &Path, method: &str) {
    let text = format!(
        "method = \"{method}\"\n\n[network]\nhidden = 2\nwidth = 8\nlatent = 6\n\n\
         [training]\niterations = 6\ncheckpoint_interval = 3\nn_outer = 20\nn_inner = 20\nn_global = 30\nn_obs = 10\n\n\
         [family]\nn_train = 4\nn_test = 3\n\n[output]\ntruth_intervals = 2048\n"
    );
    fs::write(path, text).unwrap();
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_eval_and_plot_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    write_tiny_config(&cfg, "pvdnet-leading");
    let out = tmp.path().join("run");
    let o = pvd(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("global_rel_l2"));
    let report = fs::read(out.join("report.csv")).unwrap();
    assert!(fs::read_to_string(out.join("config.toml")).unwrap().contains("seed = 3"));

    let e = pvd(&["eval", "--out", out.to_str().unwrap()]);
    assert!(e.status.success());
    assert_eq!(fs::read(out.join("report.csv")).unwrap(), report);
    let lines = |s: &str| s.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(lines(&stdout(&e)), lines(&stdout(&o)));

    fs::remove_file(out.join("plot.svg")).unwrap();
    assert!(pvd(&["plot", "--out", out.to_str().unwrap()]).status.success());
    assert!(out.join("plot.svg").is_file());
}

#[test]
fn repeated_runs_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    write_tiny_config(&cfg, "pvdonet-high");
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        assert!(pvd(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
        reports.push((fs::read(out.join("report.csv")).unwrap(), fs::read(out.join("weights.pvdw")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn infer_writes_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    write_tiny_config(&cfg, "pvdonet-leading");
    let out = tmp.path().join("run");
    assert!(pvd(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let pairs = tmp.path().join("pairs.txt");
    fs::write(&pairs, "# alpha beta\n1.0 2.0\n0.5, 1.5\n").unwrap();

    let o = pvd(&["infer", "--out", out.to_str().unwrap(), "--pairs", pairs.to_str().unwrap(), "--points", "4"]);
    assert!(o.status.success());
    let table = stdout(&o);
    assert_eq!(table.lines().next(), Some("pair,alpha,beta,x,u"));
    assert_eq!(table.lines().count(), 1 + 2 * 4);

    let csv = tmp.path().join("pred.csv");
    let args = ["infer", "--out", out.to_str().unwrap(), "--pairs", pairs.to_str().unwrap(), "--points", "4"];
    let o = pvd(&[&args[..], &["--csv", csv.to_str().unwrap()]].concat());
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(csv).unwrap(), table);
}

#[test]
fn gradcheck_passes_on_a_few_cases() {
    let o = pvd(&["gradcheck", "--cases", "2", "--seed", "11"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().count() >= 4);
    assert!(text.lines().all(|l| l.ends_with(" ok")));
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pvd(&["run", "--method", "no-such-method", "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[training]\nlearning_rat = 1.0\n").unwrap();
    let o = pvd(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let o = pvd(&["eval", "--out", tmp.path().join("missing").to_str().unwrap()]);
    assert!(!o.status.success());
}
