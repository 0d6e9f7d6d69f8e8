use std::path::Path;
use std::process::{Command, Output};

fn magop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magop")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = magop(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = magop(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("forc.hysd");
    let csv = dir.path().join("forc.csv");
    let out = ok(&[
        "generate", "--kind", "forc", "--n", "12", "--t-samples", "24", "--seed", "7", "--out", p(&data), "--csv",
        p(&csv),
    ]);
    assert!(out.contains("12 samples x 24 points"));
    let bytes = std::fs::read(&data).unwrap();
    assert_eq!(&bytes[..4], b"HYSD");
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 12);
    assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 24);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("sample_id,t,h,b"));

    // Same seed, same file.
    let again = dir.path().join("again.hysd");
    ok(&["generate", "--kind", "forc", "--n", "12", "--t-samples", "24", "--seed", "7", "--out", p(&again)]);
    assert_eq!(std::fs::read(&again).unwrap(), bytes);

    let cfg = dir.path().join("small.kv");
    std::fs::write(&cfg, "width = 3\nblocks = 1\nhead_width = 6\n").unwrap();
    let ckpt = dir.path().join("m.hyck");
    let log = ok(&[
        "train", "--arch", "fno", "--data", p(&data), "--epochs", "4", "--log-every", "2", "--model-config", p(&cfg),
        "--out", p(&ckpt),
    ]);
    assert_eq!(log.lines().collect::<Vec<_>>().len(), 3);
    assert!(log.starts_with("epoch,loss\n2,"));

    let report = dir.path().join("report");
    let metrics = ok(&["eval", "--ckpt", p(&ckpt), "--data", p(&data), "--report", p(&report)]);
    assert!(metrics.contains("arch,fno") && metrics.contains("\nr,"));
    assert!(report.join("samples.csv").exists());

    // The stored final loss is the evaluator's training loss.
    let train = magop(&[
        "train", "--arch", "fno", "--data", p(&data), "--epochs", "4", "--log-every", "0", "--model-config", p(&cfg),
        "--out", p(&ckpt),
    ]);
    let stderr = String::from_utf8(train.stderr).unwrap();
    let final_loss: f64 = stderr.trim().strip_prefix("final_loss,").unwrap().parse().unwrap();
    let stored: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("train_loss_scaled,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((final_loss - stored).abs() <= 1e-12);

    let sweep = ok(&["rate-sweep", "--ckpt", p(&ckpt), "--data", p(&data), "--rates", "0.01,0.1,10,100"]);
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "rate,r,mae,rmse");
    assert_eq!(lines.len(), 5);

    let svg = dir.path().join("fig.svg");
    ok(&["plot", "--report", p(&report), "--samples", "0,1", "--out", p(&svg)]);
    let first = std::fs::read(&svg).unwrap();
    ok(&["plot", "--report", p(&report), "--samples", "0,1", "--out", p(&svg)]);
    assert_eq!(std::fs::read(&svg).unwrap(), first);
    ok(&["plot", "--data", p(&data), "--samples", "3", "--out", p(&svg)]);

    // Errors: one line, nonzero, nothing written.
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    std::fs::write(empty.join("samples.csv"), "sample,t,h,target,prediction,abs_error\n").unwrap();
    let none = dir.path().join("none.svg");
    fails(&["plot", "--report", p(&empty), "--samples", "0", "--out", p(&none)]);
    assert!(!none.exists());
    fails(&["eval", "--ckpt", p(&data), "--data", p(&data)]);
    let other = dir.path().join("other.hysd");
    ok(&["generate", "--kind", "forc", "--n", "6", "--t-samples", "30", "--seed", "1", "--out", p(&other)]);
    let err = fails(&["eval", "--ckpt", p(&ckpt), "--data", p(&other)]);
    assert!(err.contains("24") || err.contains("30"), "{err}");
    let err = fails(&["train", "--arch", "lstm", "--data", p(&data), "--epochs", "1", "--model-config", p(&cfg), "--out", p(&ckpt)]);
    assert!(err.contains("width"), "{err}");
}

#[test]
fn minor_loop_generation_with_density_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("density.kv");
    std::fs::write(&cfg, "kind = gaussian\nh_sat = 500\nridge = 0.2\n").unwrap();
    let data = dir.path().join("minor.hysd");
    ok(&[
        "generate", "--kind", "minor", "--n", "6", "--t-samples", "40", "--seed", "3", "--density-config", p(&cfg),
        "--out", p(&data),
    ]);
    assert_eq!(&std::fs::read(&data).unwrap()[..4], b"HYSD");
    std::fs::write(&cfg, "kind = cubic\n").unwrap();
    fails(&["generate", "--kind", "minor", "--n", "2", "--density-config", p(&cfg), "--out", p(&data)]);
}

#[test]
fn argument_and_file_errors_are_one_line() {
    fails(&["train", "--bogus"]);
    fails(&["frobnicate"]);
    fails(&["eval", "--ckpt", "/nonexistent/a", "--data", "/nonexistent/b"]);
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.hysd");
    ok(&["generate", "--kind", "forc", "--n", "4", "--t-samples", "24", "--out", p(&data)]);
    let mut bytes = std::fs::read(&data).unwrap();
    bytes[4] = 7;
    std::fs::write(&data, bytes).unwrap();
    let err = fails(&["train", "--arch", "fno", "--data", p(&data), "--out", p(&dir.path().join("m"))]);
    assert!(err.contains("version 7"), "{err}");
    let err = fails(&["train", "--arch", "mlp", "--data", p(&data), "--out", p(&dir.path().join("m"))]);
    assert!(err.contains("mlp"), "{err}");
}

#[test]
fn help_succeeds() {
    let out = ok(&["--help"]);
    for cmd in ["generate", "train", "eval", "rate-sweep", "gradcheck", "plot"] {
        assert!(out.contains(cmd), "{cmd}");
    }
}

#[test]
fn gradcheck_reports_every_check() {
    let out = ok(&["gradcheck", "--seed", "3"]);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert!(rows.iter().all(|r| r.ends_with(",ok")), "{out}");
    for arch in ["deeponet", "fno", "rifno", "wno", "rnn", "lstm", "gru", "edlstm"] {
        assert!(rows.iter().any(|r| r.starts_with(&format!("{arch}:"))), "{arch}");
    }
    assert!(rows.iter().any(|r| r.starts_with("op:")));
}
