use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddalpha::depth::DepthVector;
use ddalpha::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddalpha"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - r.random::<f64>();
    let v: f64 = r.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Two classes "left" and "right" with `n` rows each, centers `shift`
/// apart along the first axis.
fn write_data(dir: &Path, name: &str, n: usize, shift: f64, seed: u64) -> PathBuf {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("f1,f2,class\n");
    for i in 0..2 * n {
        let (label, c) = if i % 2 == 0 { ("left", 0.0) } else { ("right", shift) };
        s.push_str(&format!("{},{},{label}\n", c + normal(&mut r), normal(&mut r)));
    }
    let p = dir.join(name);
    fs::write(&p, s).unwrap();
    p
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn train_model(dir: &Path, data: &Path, extra: &[&str]) -> PathBuf {
    let model = dir.join("model.json");
    let mut args = vec!["train", "--data", p(data), "--label", "class", "--out", p(&model)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    model
}

#[test]
fn train_writes_round_tripping_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 30, 2.0, 1);
    let model = train_model(dir.path(), &data, &["--seed", "5"]);
    let text = fs::read_to_string(&model).unwrap();
    let parsed = Model::from_json(&text).unwrap();
    assert_eq!(parsed.to_json().unwrap(), text);
    assert_eq!(parsed.metadata().class_names, vec!["left", "right"]);
    assert_eq!(parsed.seed(), 5);
}

#[test]
fn missing_label_column_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 10, 2.0, 1);
    let o = run(&[
        "train", "--data", p(&data), "--label", "species", "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("species"));
}

#[test]
fn small_class_is_training_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "a,b,class\n0,0,x\n1,0,x\n0,1,x\n1,1,x\n5,5,y\n6,5,y\n").unwrap();
    let o = run(&[
        "train", "--data", p(&data), "--label", "class", "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("TooFewPoints"), "{}", stderr(&o));
}

#[test]
fn malformed_number_names_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "a,b,class\n0,0,x\n1,oops,x\n").unwrap();
    let o = run(&[
        "train", "--data", p(&data), "--label", "class", "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("'b'"), "{e}");
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# ddalpha "), "{text}");
    text.lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn predict_reproduces_separable_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 40, 12.0, 2);
    let model = train_model(dir.path(), &data, &[]);
    let out = dir.path().join("pred.csv");
    let o = run(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("error rate 0 "), "{}", stderr(&o));
    let rows = read_rows(&out);
    assert_eq!(rows.len(), 80);
    for (i, r) in rows.iter().enumerate() {
        let expected = if i % 2 == 0 { "left" } else { "right" };
        assert_eq!(r[1], expected);
    }
}

#[test]
fn predict_single_row_and_schema_check() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 20, 2.0, 3);
    let model = train_model(dir.path(), &data, &[]);
    let one = dir.path().join("one.csv");
    fs::write(&one, "f1,f2\n0.1,0.2\n").unwrap();
    let out = dir.path().join("pred.csv");
    let o = run(&["predict", "--model", p(&model), "--data", p(&one), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_rows(&out).len(), 1);

    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "f1,f2,f3\n0.1,0.2,0.3\n").unwrap();
    let o = run(&["predict", "--model", p(&model), "--data", p(&wide)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ddplot_flags_outsiders_and_training_points() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 30, 3.0, 4);
    let model = train_model(dir.path(), &data, &[]);

    let far = dir.path().join("far.csv");
    fs::write(&far, "f1,f2\n100,100\n-50,3\n0,-80\n").unwrap();
    let out = dir.path().join("far_dd.csv");
    let o = run(&["ddplot", "--model", p(&model), "--data", p(&far), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for r in read_rows(&out) {
        assert_eq!(r[0], "0");
        assert_eq!(r[1], "0");
        assert_eq!(r[4], "1");
    }

    let out = dir.path().join("dd.csv");
    let o = run(&["ddplot", "--model", p(&model), "--data", p(&data), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for r in read_rows(&out) {
        let dx: f64 = r[0].parse().unwrap();
        let dy: f64 = r[1].parse().unwrap();
        assert!(dx > 0.0 || dy > 0.0);
        assert_eq!(r[4], "0");
    }
}

#[test]
fn ddplot_curve_separates_separable_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 40, 12.0, 5);
    let model_path = train_model(dir.path(), &data, &[]);
    let (out, curve, svg) = (
        dir.path().join("dd.csv"),
        dir.path().join("curve.csv"),
        dir.path().join("plot.svg"),
    );
    let o = run(&[
        "ddplot", "--model", p(&model_path), "--data", p(&data), "--out", p(&out),
        "--curve", p(&curve), "--svg", p(&svg),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));

    let model = Model::from_json(&fs::read_to_string(&model_path).unwrap()).unwrap();
    let sep = &model.separators()[0];
    let samples = read_rows(&curve);
    assert!(!samples.is_empty());
    for s in &samples {
        let x: f64 = s[1].parse().unwrap();
        let y: f64 = s[2].parse().unwrap();
        assert!(sep.eval_values(&[x, y]).abs() < 1e-9);
    }
    // Every labelled point lies on its own class's side of the curve.
    for r in read_rows(&out) {
        let dv = DepthVector::new(vec![r[0].parse().unwrap(), r[1].parse().unwrap()]).unwrap();
        let score = sep.eval(&dv);
        assert_eq!(score > 0.0, r[2] == "left", "{r:?} {score}");
    }
}

#[test]
fn simulate_is_deterministic_and_validates_setting() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = run(&[
            "simulate", "--setting", "1", "--reps", "5", "--seed", "7", "--n-train", "40",
            "--n-test", "50", "--out", p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("# ddalpha "));
    assert!(text.contains("seed=7"));
    assert_eq!(text.lines().nth(1), Some("setting,replication,amr"));
    assert_eq!(text.lines().count(), 7);

    let o = run(&["simulate", "--setting", "0", "--out", p(&a)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["simulate", "--setting", "11", "--out", p(&a)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_replication_failure_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    // Two training points per class cannot span the plane.
    let o = run(&[
        "simulate", "--setting", "1", "--reps", "2", "--n-train", "2", "--n-test", "5",
        "--out", p(&dir.path().join("a.csv")),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("replication"), "{}", stderr(&o));
}

#[test]
fn bench_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&["bench", "--grid", "d=5 n=200", "--reps", "1", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..2], ["5", "200"]);
    let o = run(&["bench", "--grid", "d=5", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_leave_one_out() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 12, 2.0, 6);
    let out = dir.path().join("e.csv");
    let o = run(&[
        "evaluate", "--data", p(&data), "--label", "class", "--scheme", "loo", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out);
    let get = |k: &str| rows.iter().find(|r| r[0] == k).unwrap()[1].clone();
    assert_eq!(get("n_test"), "24");
    assert_eq!(get("folds"), "24");
    assert!(String::from_utf8_lossy(&o.stdout).contains("error rate"));
}

#[test]
fn thread_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), "d.csv", 15, 2.0, 7);
    let model = dir.path().join("m.json");
    for threads in ["0", "2"] {
        let o = bin()
            .env("DDALPHA_THREADS", threads)
            .args(["train", "--data", p(&data), "--label", "class", "--out", p(&model)])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = bin()
        .env("DDALPHA_THREADS", "many")
        .args(["train", "--data", p(&data), "--label", "class", "--out", p(&model)])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
