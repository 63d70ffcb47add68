use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const EXAMPLE: &str = r#"{"kind":"innovations_model","n_x":2,"n_y":2,
"A":{"rows":2,"cols":2,"data":[[0.58,0.23],[-0.39,0.82]]},
"K":{"rows":2,"cols":2,"data":[[0.15,0.1],[-0.25,-0.4]]},
"Q":{"rows":2,"cols":2,"data":[[0.075,0.037],[0.037,0.068]]},
"C":{"rows":2,"cols":2,"data":[[-0.3,-0.65],[0.76,-1.1]]}}"#;

fn ssid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    model: PathBuf,
    data: PathBuf,
    root: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let model = root.join("model.json");
    fs::write(&model, EXAMPLE).unwrap();
    let data = root.join("y.csv");
    let o = ssid(&["simulate", "--model", p(&model), "--n", "20000", "--seed", "4", "--out", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    Fixture {
        _dir: dir,
        model,
        data,
        root,
    }
}

#[test]
fn simulate_is_deterministic() {
    let f = fixture();
    let again = f.root.join("again.csv");
    ssid(&["simulate", "--model", p(&f.model), "--n", "20000", "--seed", "4", "--out", p(&again)]);
    assert_eq!(fs::read(&f.data).unwrap(), fs::read(&again).unwrap());
    let lines = fs::read_to_string(&f.data).unwrap().lines().count();
    assert_eq!(lines, 20001);
}

#[test]
fn identify_bounds_and_norms() {
    let f = fixture();
    let hat = f.root.join("hat.json");
    let o = ssid(&["identify", "--data", p(&f.data), "--order", "2", "--hankel-depth", "4", "--out", p(&hat)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("stabilization: "));
    assert!(out.contains("repair: "));
    let doc = fs::read_to_string(&hat).unwrap();
    assert!(doc.contains("\"identification\""));

    let o = ssid(&[
        "bounds", "--model", p(&hat), "--data-size", "20000", "--confidence", "0.95",
        "--hankel-depth", "4", "--true", p(&f.model),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    for key in ["h2_bound", "hinf_bound_perturbative", "hinf_bound_lmi", "exact_h2_error", "covered"] {
        assert!(out.contains(key), "missing {key} in {out}");
    }
    let again = ssid(&[
        "bounds", "--model", p(&hat), "--data-size", "20000", "--confidence", "0.95",
        "--hankel-depth", "4", "--true", p(&f.model),
    ]);
    assert_eq!(o.stdout, again.stdout);

    let resp = f.root.join("resp.txt");
    let o = ssid(&["norms", "--true", p(&f.model), "--identified", p(&hat), "--response-out", p(&resp)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("h2_error "));
    let text = fs::read_to_string(&resp).unwrap();
    assert_eq!(text.lines().count(), 512);
    assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 2);
}

#[test]
fn montecarlo_report_is_byte_identical() {
    let f = fixture();
    let a = f.root.join("a.json");
    let b = f.root.join("b.json");
    let args = |out: &Path| {
        vec![
            "montecarlo".to_string(), "--model".into(), p(&f.model).into(), "--n".into(), "3000".into(),
            "--runs".into(), "4".into(), "--hankel-depth".into(), "3".into(), "--confidence".into(),
            "0.9".into(), "--seed".into(), "8".into(), "--out".into(), p(out).into(),
        ]
    };
    let run = |out: &Path, extra: &[&str]| {
        let mut v = args(out);
        v.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = v.iter().map(|s| s.as_str()).collect();
        ssid(&refs)
    };
    assert_eq!(run(&a, &[]).status.code(), Some(0));
    assert_eq!(run(&b, &["--sequential"]).status.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let f = fixture();
    assert_eq!(ssid(&["identify", "--data", p(&f.data)]).status.code(), Some(2));
    assert_eq!(ssid(&["frobnicate"]).status.code(), Some(2));
    let bad = f.root.join("bad.csv");
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let o = ssid(&["identify", "--data", p(&bad), "--order", "1", "--hankel-depth", "2", "--out", p(&f.root.join("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let broken = f.root.join("broken.json");
    fs::write(&broken, "{\"kind\": ").unwrap();
    let o = ssid(&["simulate", "--model", p(&broken), "--n", "10", "--out", p(&f.root.join("z.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = ssid(&[
        "bounds", "--model", p(&f.model), "--data-size", "100", "--confidence", "1.5", "--hankel-depth", "3",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_model_exits_4() {
    let f = fixture();
    let unstable = f.root.join("unstable.json");
    fs::write(&unstable, EXAMPLE.replace("[[0.58,0.23],[-0.39,0.82]]", "[[1.2,0.0],[0.0,0.5]]")).unwrap();
    let o = ssid(&["simulate", "--model", p(&unstable), "--n", "100", "--out", p(&f.root.join("u.csv"))]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ssid(&["norms", "--true", p(&f.model), "--identified", p(&unstable)]);
    assert_eq!(o.status.code(), Some(4));
}
