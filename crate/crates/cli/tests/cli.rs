use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn viskey(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viskey"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = viskey(dir.path(), &["encode", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(viskey(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        viskey(dir.path(), &["encode", "--help"]).status.code(),
        Some(0)
    );
}

#[test]
fn inadmissible_scheme_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = viskey(dir.path(), &["encode", "--scheme", "7", "in.pbm"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("admissible n is 2 or 3t"), "{err}");
}

#[test]
fn encode_writes_shares_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let c = corpus();
    let o = viskey(
        d,
        &[
            "render",
            "--key",
            "AB",
            "--corpus",
            c.to_str().unwrap(),
            "--out",
            "in.pbm",
        ],
    );
    assert!(o.status.success());
    let o = viskey(
        d,
        &[
            "encode",
            "--scheme",
            "2",
            "--seed",
            "7",
            "in.pbm",
            "--out-prefix",
            "sh",
        ],
    );
    assert!(o.status.success());
    for i in 1..=2 {
        assert!(d.join(format!("sh_{i}.pbm")).is_file());
        let side = std::fs::read_to_string(d.join(format!("sh_{i}.txt"))).unwrap();
        assert_eq!(side.trim(), format!("TwoOfTwo 0 2 2 1 2 72 36 {i} -"));
    }
    let again = tempfile::tempdir().unwrap();
    std::fs::copy(d.join("in.pbm"), again.path().join("in.pbm")).unwrap();
    viskey(
        again.path(),
        &[
            "encode",
            "--scheme",
            "2",
            "--seed",
            "7",
            "in.pbm",
            "--out-prefix",
            "sh",
        ],
    );
    assert_eq!(
        std::fs::read(d.join("sh_1.pbm")).unwrap(),
        std::fs::read(again.path().join("sh_1.pbm")).unwrap()
    );
}

#[test]
fn demo_grants() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus();
    let o = viskey(
        dir.path(),
        &[
            "demo",
            "--n",
            "2",
            "--seed",
            "1",
            "--corpus",
            c.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let key_line = out.lines().position(|l| l.starts_with("key: ")).unwrap();
    let auth_line = out.lines().position(|l| l == "AUTH: GRANTED").unwrap();
    assert!(key_line < auth_line, "{out}");
}

#[test]
fn stages_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let c = corpus();
    let c = c.to_str().unwrap();
    let key = stdout(&viskey(d, &["keygen", "--length", "4", "--seed", "21"]));
    let key = key.trim();
    assert_eq!(key.len(), 4);
    assert!(viskey(
        d,
        &["render", "--key", key, "--corpus", c, "--out", "key.pbm"]
    )
    .status
    .success());
    assert_eq!(
        stdout(&viskey(d, &["segment", "key.pbm"])).lines().count(),
        4
    );
    assert!(viskey(
        d,
        &[
            "encode",
            "--scheme",
            "9",
            "--seed",
            "3",
            "key.pbm",
            "--out-prefix",
            "s"
        ]
    )
    .status
    .success());
    assert!(viskey(
        d,
        &["reconstruct", "s_4.pbm", "s_9.pbm", "--out", "stack.pbm"]
    )
    .status
    .success());
    assert!(viskey(d, &["train", "--corpus", c, "--out", "model.txt"])
        .status
        .success());
    assert_eq!(
        stdout(&viskey(d, &["decode", "--model", "model.txt", "stack.pbm"])).trim(),
        key
    );
    assert!(viskey(d, &["denoise", "stack.pbm", "--out", "clean.pbm"])
        .status
        .success());
    assert_eq!(
        stdout(&viskey(
            d,
            &["classify", "--model", "model.txt", "clean.pbm"]
        ))
        .trim(),
        key
    );
    let features = stdout(&viskey(d, &["features", "clean.pbm"]));
    assert_eq!(features.lines().count(), 4);
    assert!(features.lines().all(|l| l.split(',').count() == 48));

    let o = viskey(
        d,
        &[
            "denoise",
            "stack.pbm",
            "--white-cutoff",
            "0.6",
            "--black-cutoff",
            "0.5",
            "--out",
            "x.pbm",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = viskey(d, &["reconstruct", "s_1.pbm", "key.pbm", "--out", "y.pbm"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn client_subcommands_against_serve() {
    use std::io::{BufRead, BufReader};
    use std::process::Stdio;

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let c = corpus();
    let c = c.to_str().unwrap();
    assert!(viskey(d, &["train", "--corpus", c, "--out", "model.txt"])
        .status
        .success());
    let mut server = Command::new(env!("CARGO_BIN_EXE_viskey"))
        .current_dir(d)
        .args([
            "serve",
            "--port",
            "0",
            "--state",
            "state",
            "--model",
            "model.txt",
            "--corpus",
            c,
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(server.stdout.take().unwrap())
        .read_line(&mut banner)
        .unwrap();
    let addr = banner
        .trim()
        .strip_prefix("listening on ")
        .unwrap()
        .to_string();
    let run = |args: &[&str]| {
        let mut full = args.to_vec();
        full.extend(["--server", addr.as_str()]);
        viskey(d, &full)
    };

    assert_eq!(
        stdout(&run(&[
            "create",
            "g1",
            "--n",
            "9",
            "--key-len",
            "5",
            "--seed",
            "1234"
        ]))
        .trim(),
        "OK g1 9"
    );
    assert!(d.join("state/g1/record.txt").is_file());
    assert!(run(&["fetch", "g1", "3", "--out", "m3.pbm"])
        .status
        .success());
    assert!(run(&["fetch", "g1", "7", "--out", "m7.pbm"])
        .status
        .success());
    assert!(std::fs::read_to_string(d.join("m3.txt"))
        .unwrap()
        .ends_with(" 3 g1\n"));
    assert_eq!(
        run(&["fetch", "g1", "10", "--out", "x.pbm"]).status.code(),
        Some(1)
    );

    assert_eq!(
        stdout(&run(&["submit", "g1", "3", "m3.pbm"])).trim(),
        "ACCEPTED 1"
    );
    let denied = run(&["auth", "g1"]);
    assert_eq!(denied.status.code(), Some(1));
    assert_eq!(stdout(&denied).trim(), "DENIED g1 InsufficientShares");
    assert_eq!(
        stdout(&run(&["submit", "g1", "7", "m7.pbm"])).trim(),
        "ACCEPTED 2"
    );
    let granted = run(&["auth", "g1"]);
    assert_eq!(granted.status.code(), Some(0));
    assert_eq!(stdout(&granted).trim(), "GRANTED g1");
    assert_eq!(stdout(&run(&["reset", "g1"])).trim(), "OK");
    assert_eq!(run(&["auth", "g1"]).status.code(), Some(1));

    server.kill().unwrap();
    server.wait().unwrap();
}
