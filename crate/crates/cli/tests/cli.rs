use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ucalc-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, file: &str, v: &Value) -> String {
    let path = dir.join(file);
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn ucalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ucalc")).args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Polynomial endomorphism `x + c x^e` of Z_3.
fn endo(c: i64, e: u32) -> Value {
    json!({
        "ball": {"center": [0], "k": 0},
        "sigma": {"codim": 1, "pieces": [{"ball": {"center": [0], "k": 0}, "poly": [{"exps": [e], "coef": [c]}]}]}
    })
}

#[test]
fn partition_of_z3() {
    let dir = scratch("partition");
    let region = write(&dir, "region.json", &json!({"balls": [{"center": [0], "k": 0}]}));
    let cover = write(&dir, "cover.json", &json!([{"balls": [{"center": [0], "k": 1}]}, {"balls": [{"center": [0], "k": 0}]}]));
    let o = ucalc(&["--p", "3", "partition", "--region", &region, "--cover", &cover]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = stdout_json(&o);
    assert_eq!(doc["partition"].as_array().unwrap().len(), 3);
    assert_eq!(doc["verified"]["violations"], 0);

    let gap = write(&dir, "gap.json", &json!([{"balls": [{"center": [0], "k": 1}]}]));
    let o = ucalc(&["--p", "3", "partition", "--region", &region, "--cover", &gap]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dq_of_square() {
    let dir = scratch("dq");
    let f = write(&dir, "f.json", &json!({"codim": 1, "pieces": [{"ball": {"center": [0], "k": 0}, "poly": [{"exps": [2], "coef": [1]}]}]}));
    let o = ucalc(&["--p", "3", "dq", "--fn", &f, "--x", "[1]", "--y", "[1]", "--t", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // (x + ty)^2 - x^2 over t is 2x + ty = 5
    let expect = ucalc(&["--p", "3", "convert", "--from", "vector", &write(&dir, "five.json", &json!([5]))]);
    assert_eq!(stdout_json(&o), stdout_json(&expect));
}

#[test]
fn prime_must_be_known() {
    let dir = scratch("prime");
    let f = write(&dir, "f.json", &json!({"codim": 1, "pieces": [{"ball": {"center": [0], "k": 0}, "poly": [{"exps": [1], "coef": [1]}]}]}));
    let o = ucalc(&["dq", "--fn", &f, "--x", "[1]", "--y", "[1]", "--t", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--p"));
}

#[test]
fn verify_suites() {
    let o = ucalc(&["--p", "3", "--seed", "7", "verify", "chain-rule", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = stdout_json(&o);
    assert_eq!(doc["passed"], doc["run"]);
    let again = ucalc(&["--p", "3", "--seed", "7", "verify", "chain-rule", "--samples", "5"]);
    assert_eq!(o.stdout, again.stdout);

    assert_eq!(ucalc(&["verify", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(ucalc(&["--p", "4", "verify", "scaling"]).status.code(), Some(2));
}

#[test]
fn convert_canonicalizes_and_reports_paths() {
    let dir = scratch("convert");
    let r = write(&dir, "r.json", &json!({"balls": [{"center": [0], "k": 1}, {"center": [1], "k": 1}, {"center": [5], "k": 1}]}));
    let o = ucalc(&["--p", "3", "convert", "--from", "region", &r]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let canon = stdout_json(&o);
    assert_eq!(canon["balls"].as_array().unwrap().len(), 1);

    let out = dir.join("out.json");
    let o = ucalc(&["--p", "3", "convert", "--from", "region", &r, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, canon);

    let bad = write(&dir, "bad.json", &json!({"center": [{"p": 3, "v": 0, "digits": [1, 7]}], "k": 1}));
    let o = ucalc(&["convert", "--from", "ball", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("$.center[0].digits[1]"), "{}", stderr(&o));

    assert_eq!(ucalc(&["--p", "3", "convert", "--from", "ball", "--to", "region", &r]).status.code(), Some(2));
}

#[test]
fn diffeo_commands() {
    let dir = scratch("diffeo");
    let sq = write(&dir, "sq.json", &endo(3, 2));
    let o = ucalc(&["--p", "3", "diffeo", "certify", "--endo", &sq]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["certified"], true);

    let unit = write(&dir, "unit.json", &endo(1, 0));
    let o = ucalc(&["--p", "3", "diffeo", "certify", "--endo", &unit]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)["certified"], false);

    let o = ucalc(&["--p", "3", "diffeo", "invert", "--endo", &sq, "--y", "[7]", "--prec", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout_json(&o)["iterations"].as_u64().unwrap() >= 1);

    // translation by 3 permutes the nine classes mod 9 in three 3-cycles
    let shift = write(&dir, "shift.json", &endo(3, 0));
    let o = ucalc(&["--p", "3", "diffeo", "induced", "--endo", &shift, "--m", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let perm: Vec<usize> = serde_json::from_value(stdout_json(&o)).unwrap();
    assert_eq!(perm.len(), 9);
    for (i, &j) in perm.iter().enumerate() {
        assert_eq!(j, (i + 3) % 9);
    }
}

#[test]
fn weak_product_bundle() {
    let dir = scratch("wp");
    write(&dir, "sq.json", &endo(3, 2));
    let ball = json!({"center": [0], "k": 0});
    let bundle = write(
        &dir,
        "bundle.json",
        &json!({
            "diffeos": {"sq": "sq.json", "shift": endo(3, 0)},
            "index": [ball],
            "a": [{"ball": ball, "word": [{"id": "sq"}]}],
            "b": [{"ball": ball, "word": [{"id": "shift"}]}]
        }),
    );
    let o = ucalc(&["--p", "3", "wp", "mul", "--bundle", &bundle]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = stdout_json(&o);
    let entries = doc["element"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["word"].as_array().unwrap().len(), 2);

    let o = ucalc(&["--p", "3", "wp", "inv", "--bundle", &bundle]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let broken = write(&dir, "broken.json", &json!({"diffeos": {"sq": "absent.json"}, "index": [ball], "a": []}));
    let o = ucalc(&["--p", "3", "wp", "inv", "--bundle", &broken]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("$.diffeos.sq"), "{}", stderr(&o));
}
