use proptest::prelude::*;
use serde_json::{json, Value};

use ucalc_core::balls::{Ball, ClopenRegion};
use ucalc_core::cia::StructAlgebra;
use ucalc_core::json::*;
use ucalc_core::suites::Gen;
use ucalc_core::{Error, PadicContext, PadicScalar};

fn ctx3() -> PadicContext {
    PadicContext::new(3, 12).unwrap()
}

fn parse_err(r: Result<impl std::fmt::Debug, Error>) -> (String, String) {
    match r {
        Err(Error::Parse { path, msg }) => (path, msg),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn ball_output_is_canonical() {
    let c = ctx3();
    // center 10 reduces to 1 modulo 9
    let v = json!({"center": [10], "k": 2});
    let out = canonicalize(&c, "ball", &v).unwrap();
    let b = ball_from_json(&c, Located::root(&out).node()).unwrap();
    assert_eq!(b, Ball::new(3, &[1], 2));
    assert_eq!(canonicalize(&c, "ball", &out).unwrap(), out);

    // three siblings merge into their parent
    let r = json!({"balls": [{"center": [0], "k": 1}, {"center": [1], "k": 1}, {"center": [5], "k": 1}]});
    let out = canonicalize(&c, "region", &r).unwrap();
    let back = region_from_json(&c, Located::root(&out).node(), None).unwrap();
    assert_eq!(back, ClopenRegion::whole(3, 1));
    assert_eq!(out["balls"].as_array().unwrap().len(), 1);
}

#[test]
fn malformed_digits_name_their_path() {
    let c = ctx3();
    let bad = json!({"center": [{"p": 3, "v": 0, "digits": [1, 7]}], "k": 1});
    let (path, msg) = parse_err(ball_from_json(&c, Located::root(&bad).node()));
    assert_eq!(path, "$.center[0].digits[1]");
    assert!(msg.contains("digit 7"), "{msg}");

    let wrong_p = json!({"p": 5, "v": 0, "digits": [1]});
    let (path, _) = parse_err(scalar_from_json(&c, Located::root(&wrong_p).node()));
    assert_eq!(path, "$.p");

    let f = json!({"codim": 1, "pieces": [{"ball": {"center": [0], "k": 0}, "poly": [{"exps": [1, 0], "coef": [1]}]}]});
    let (path, _) = parse_err(function_from_json(&c, Located::root(&f).node()));
    assert_eq!(path, "$.pieces[0].poly[0].exps");

    let (path, _) = parse_err(scalar_from_json(&c, Located::root(&json!("1/x")).node()));
    assert_eq!(path, "$");
}

#[test]
fn scalar_inputs() {
    let c = ctx3();
    let s = |v: Value| scalar_from_json(&c, Located::root(&v).node()).unwrap();
    assert_eq!(s(json!(-7)), PadicScalar::from_i64(&c, -7));
    assert_eq!(s(json!("2/9")), PadicScalar::from_ratio(&c, 2, 9).unwrap());
    assert_eq!(s(json!({"p": 3, "v": "inf", "digits": []})), PadicScalar::zero(&c));
    let x = s(json!({"p": 3, "v": 1, "digits": [2, 1]}));
    assert!(!x.is_exact());
    assert_eq!(s(scalar_to_json(&x)), x);
}

#[test]
fn function_and_algebra_roundtrip() {
    let c = ctx3();
    let mut g = Gen::new(&c, 3, 0);
    for _ in 0..20 {
        let f = g.function(2, 2, 3);
        let v = function_to_json(&f);
        let back = function_from_json(&c, Located::root(&v).node()).unwrap();
        assert_eq!(back, f);
        assert_eq!(canonicalize(&c, "function", &v).unwrap(), v);
    }
    let m2 = StructAlgebra::matrices(&c, 2);
    let v = algebra_to_json(&m2);
    assert_eq!(algebra_from_json(&c, Located::root(&v).node()).unwrap(), m2);
    let mut broken = v.clone();
    broken["one"] = json!([1, 1, 0, 1]);
    assert!(matches!(algebra_from_json(&c, Located::root(&broken).node()), Err(Error::Parse { .. })));
}

#[test]
fn diffeo_table_resolves_files_and_ids() {
    let c = ctx3();
    let endo = json!({
        "ball": {"center": [0], "k": 0},
        "sigma": {"codim": 1, "pieces": [{"ball": {"center": [0], "k": 0}, "poly": [{"exps": [2], "coef": [3]}]}]}
    });
    let table_json = json!({"sq": endo.clone(), "shift": "shift.json"});
    let load = |name: &str| -> Result<Value, Error> {
        match name {
            "shift.json" => Ok(json!({
                "ball": {"center": [0], "k": 0},
                "sigma": {"codim": 1, "pieces": [{"ball": {"center": [0], "k": 0}, "poly": [{"exps": [0], "coef": [3]}]}]}
            })),
            other => Err(Error::Invalid(format!("no file {other}"))),
        }
    };
    let table = DiffeoTable::from_json(&c, Located::root(&table_json).node(), 3, &load).unwrap();
    assert_eq!(table.by_id.len(), 2);
    assert_eq!(endo_to_json(table.by_id["sq"].endo()), canonicalize(&c, "endo", &endo).unwrap());

    let index = index_from_json(&c, Located::root(&json!([{"center": [0], "k": 0}])).node()).unwrap();
    let el = json!([{"ball": {"center": [0], "k": 0}, "word": [{"id": "sq"}, {"id": "shift", "inv": true}]}]);
    let x = element_from_json(&c, Located::root(&el).node(), &index, &table, 3).unwrap();
    assert_eq!(x.entries().values().next().unwrap().factors().len(), 2);

    let unknown = json!([{"ball": {"center": [0], "k": 0}, "word": [{"id": "nope"}]}]);
    let (path, _) = parse_err(element_from_json(&c, Located::root(&unknown).node(), &index, &table, 3));
    assert_eq!(path, "$[0].word[0].id");

    let missing = json!({"gone": "missing.json"});
    let (path, msg) = parse_err(DiffeoTable::from_json(&c, Located::root(&missing).node(), 3, &load));
    assert_eq!(path, "$.gone");
    assert!(msg.contains("missing.json"));

    // a unit translation fails certification and is reported at its entry
    let bad = json!({"t": {
        "ball": {"center": [0], "k": 0},
        "sigma": {"codim": 1, "pieces": [{"ball": {"center": [0], "k": 0}, "poly": [{"exps": [0], "coef": [1]}]}]}
    }});
    let (path, _) = parse_err(DiffeoTable::from_json(&c, Located::root(&bad).node(), 3, &load));
    assert_eq!(path, "$.t");
}

#[test]
fn prime_detection() {
    assert_eq!(detect_prime(&json!({"x": [1, {"p": 5, "v": 0, "digits": [1]}]})), Some(5));
    assert_eq!(detect_prime(&json!({"center": [1], "k": 1})), None);
}

proptest! {
    #[test]
    fn region_roundtrip(p in prop::sample::select(vec![2u32, 3, 5]), seed in any::<u64>(), d in 1usize..3) {
        let c = PadicContext::new(p, 12).unwrap();
        let mut g = Gen::new(&c, seed, 0);
        let r = g.region(d, 3, 4);
        let v = region_to_json(&r, &c);
        let back = region_from_json(&c, Located::root(&v).node(), Some(d)).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(region_to_json(&back, &c), v);
    }

    #[test]
    fn perm_roundtrip(perm in Just((0..9).collect::<Vec<usize>>()).prop_shuffle()) {
        let v = perm_to_json(&perm);
        prop_assert_eq!(perm_from_json(Located::root(&v).node()).unwrap(), perm);
    }
}

#[test]
fn perm_rejects_non_bijections() {
    assert!(perm_from_json(Located::root(&json!([0, 0, 1])).node()).is_err());
}
