use std::path::PathBuf;
use std::process::{Command, Output};

fn whitener(args: &[&str], workers: Option<&str>, stdin: Option<&str>) -> Output {
    use std::io::Write;
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_whitener"));
    cmd.args(args).env_remove("WHITENER_WORKERS");
    if let Some(w) = workers {
        cmd.env("WHITENER_WORKERS", w);
    }
    cmd.stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped());
    let mut child = cmd.spawn().unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) -> String {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("whitener-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn gen_color_whiten_pipeline() {
    let graph = ok(&whitener(&["gen", "--n", "60", "--alpha", "1.5", "--seed", "4"], None, None));
    assert!(graph.starts_with("p 60 90 3\n"));
    let colored = ok(&whitener(&["color", "--input", "-", "--seed", "1"], None, Some(&graph)));
    assert_eq!(colored.lines().filter(|l| l.starts_with("c ")).count(), 60);
    let white = ok(&whitener(&["whiten", "--input", "-", "--emit-fingerprint"], None, Some(&colored)));
    assert_eq!(white.lines().filter(|l| l.starts_with("w ")).count(), 60);
    let fp = |s: &str| s.lines().find(|l| l.starts_with("# fingerprint: ")).map(str::to_owned).unwrap();
    // the whitening does not depend on the update order
    let reordered = ok(&whitener(
        &["whiten", "--input", "-", "--order-seed", "9", "--emit-fingerprint"],
        None,
        Some(&colored),
    ));
    assert_eq!(fp(&white), fp(&reordered));
    let directional = ok(&whitener(&["whiten", "--input", "-", "--directional"], None, Some(&colored)));
    assert_eq!(directional.lines().filter(|l| l.starts_with("d ")).count(), 180);
}

#[test]
fn planted_gen_emits_a_legal_coloring() {
    let text = ok(&whitener(&["gen", "--n", "30", "--alpha", "2.0", "--q", "3", "--planted"], None, None));
    let mut color = [0u8; 30];
    for l in text.lines().filter(|l| l.starts_with("c ")) {
        let f: Vec<usize> = l[2..].split(' ').map(|x| x.parse().unwrap()).collect();
        color[f[0]] = f[1] as u8;
    }
    for l in text.lines().filter(|l| l.starts_with("e ")) {
        let f: Vec<usize> = l[2..].split(' ').map(|x| x.parse().unwrap()).collect();
        assert_ne!(color[f[0]], color[f[1]]);
    }
}

#[test]
fn output_is_independent_of_worker_count() {
    let args = ["sweep", "--n", "80", "--alpha-min", "1.0", "--alpha-max", "2.0", "--alpha-step", "0.5", "--samples", "3", "--max-sweeps", "200"];
    let one = ok(&whitener(&args, Some("1"), None));
    let three = ok(&whitener(&args, Some("3"), None));
    assert_eq!(one, three);
    let flag = ok(&whitener(&[&args[..], &["--workers", "2"]].concat(), None, None));
    assert_eq!(one, flag);
}

#[test]
fn formats_and_output_file() {
    let path = scratch("ring.json");
    let path_s = path.to_str().unwrap();
    ok(&whitener(&["ring-demo", "--format", "json", "--output", path_s], None, None));
    let json = std::fs::read_to_string(&path).unwrap();
    assert!(json.contains("\"kind\": \"ring-demo\""));
    let csv = ok(&whitener(&["ring-demo", "--ns", "3"], None, None));
    assert!(csv.contains("\n3,0,1,true,"));
    let sp = ok(&whitener(&["sp", "--n", "50", "--alpha", "1.0", "--init", "all-white"], None, None));
    assert!(sp.trim_start().starts_with('{'));
}

#[test]
fn run_accepts_spec_files() {
    let path = scratch("quasi.json");
    std::fs::write(&path, r#"{"kind":"quasi","n":40,"q":2,"alpha":2.0,"sweeps":5,"seed":1}"#).unwrap();
    let out = ok(&whitener(&["run", "--spec", path.to_str().unwrap()], None, None));
    assert!(out.contains("# kind: quasi"));
    assert!(out.contains("sweep,violated_edges,total_l1,per_node"));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str], stdin: Option<&str>| whitener(args, None, stdin).status.code();
    // invalid spec or input
    assert_eq!(code(&["ring-demo", "--ns", "4"], None), Some(2));
    assert_eq!(code(&["gen", "--n", "5", "--alpha", "9"], None), Some(2));
    assert_eq!(code(&["whiten", "--input", "-"], Some("p 2 1 3\ne 0 1\n")), Some(2));
    assert_eq!(code(&["color", "--input", "-"], Some("p 2 1 3\ne 0 1 7\n")), Some(2));
    let bad = scratch("bad.json");
    std::fs::write(&bad, r#"{"kind":"ring-demo","ns":[3],"bogus":0}"#).unwrap();
    assert_eq!(code(&["run", "--spec", bad.to_str().unwrap()], None), Some(2));
    // usage errors
    assert_eq!(code(&["sweep"], None), Some(2));
    // budget exhaustion
    let k4 = "p 4 6 3\ne 0 1\ne 0 2\ne 0 3\ne 1 2\ne 1 3\ne 2 3\n";
    assert_eq!(code(&["color", "--input", "-", "--max-steps", "1000"], Some(k4)), Some(3));
    // missing file
    assert_eq!(code(&["run", "--spec", "/nonexistent/spec.json"], None), Some(1));
}
