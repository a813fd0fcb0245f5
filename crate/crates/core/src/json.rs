//! JSON interchange formats.
//!
//! Parsers take a [`Node`], a value paired with its location, so every
//! error names the offending path (`$.pieces[0].poly[1].coef[0]`).
//! Formatters produce canonical output: object keys sorted, balls
//! canonical, polynomial terms in exponent order.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

use crate::balls::{Ball, ClopenRegion};
use crate::calculus::{FunctionModel, Piece};
use crate::cia::StructAlgebra;
use crate::diffeo::{BallEndo, CertifiedDiffeo, CompactlySupportedEndo};
use crate::error::{Error, Result};
use crate::padic::{PadicContext, PadicScalar, PadicVector, Val};
use crate::poly::{Exps, Poly, PolyMap};
use crate::weakprod::{AffineBallMap, DiffeoWord, GlobalDiffeo, GlobalPiece, WeakProductElement};

/// A JSON value together with its path from the document root.
#[derive(Clone, Copy)]
pub struct Node<'a> {
    pub value: &'a Value,
    path: &'a str,
}

/// Owned variant used while descending; keeps the path string alive.
pub struct Located<'a> {
    pub value: &'a Value,
    pub path: String,
}

impl<'a> Located<'a> {
    pub fn root(value: &'a Value) -> Self {
        Located { value, path: "$".into() }
    }

    pub fn node(&self) -> Node<'_> {
        Node { value: self.value, path: &self.path }
    }
}

impl<'a> Node<'a> {
    pub fn path(&self) -> &str {
        self.path
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, msg)
    }

    pub fn field(&self, key: &str) -> Result<Located<'a>> {
        self.opt_field(key)?.ok_or_else(|| self.err(format!("missing field \"{key}\"")))
    }

    pub fn opt_field(&self, key: &str) -> Result<Option<Located<'a>>> {
        let obj = self.value.as_object().ok_or_else(|| self.err("expected an object"))?;
        Ok(obj.get(key).map(|value| Located { value, path: format!("{}.{key}", self.path) }))
    }

    pub fn items(&self) -> Result<Vec<Located<'a>>> {
        let arr = self.value.as_array().ok_or_else(|| self.err("expected an array"))?;
        Ok(arr.iter().enumerate().map(|(i, value)| Located { value, path: format!("{}[{i}]", self.path) }).collect())
    }

    pub fn entries(&self) -> Result<Vec<(String, Located<'a>)>> {
        let obj = self.value.as_object().ok_or_else(|| self.err("expected an object"))?;
        Ok(obj.iter().map(|(k, value)| (k.clone(), Located { value, path: format!("{}.{k}", self.path) })).collect())
    }

    pub fn int(&self) -> Result<i64> {
        self.value.as_i64().ok_or_else(|| self.err("expected an integer"))
    }

    pub fn uint(&self) -> Result<u64> {
        self.value.as_u64().ok_or_else(|| self.err("expected a nonnegative integer"))
    }

    pub fn bool(&self) -> Result<bool> {
        self.value.as_bool().ok_or_else(|| self.err("expected a boolean"))
    }

    pub fn str(&self) -> Result<&'a str> {
        self.value.as_str().ok_or_else(|| self.err("expected a string"))
    }

    /// Attaches this node's path to errors raised while building a value.
    fn wrap<T>(&self, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Parse { .. } => e,
            other => self.err(other.to_string()),
        })
    }
}

fn small(n: u64, what: &str, node: &Node) -> Result<u32> {
    u32::try_from(n).map_err(|_| node.err(format!("{what} {n} too large")))
}

// scalars

/// `{"p", "v", "digits"}`, plus `"exact": true` (and `"neg": true` for
/// negative units) on exact values. Zero is `"v": "inf"` with no digits.
pub fn scalar_to_json(x: &PadicScalar) -> Value {
    let p = x.ctx().p();
    match x.valuation() {
        Val::Inf => json!({"p": p, "v": "inf", "digits": []}),
        Val::Fin(v) => {
            let mut obj = Map::new();
            obj.insert("p".into(), p.into());
            obj.insert("v".into(), v.into());
            obj.insert("digits".into(), x.digits().into());
            if let Some(u) = x.exact_unit() {
                obj.insert("exact".into(), true.into());
                if u < BigInt::from(0) {
                    obj.insert("neg".into(), true.into());
                }
            }
            Value::Object(obj)
        }
    }
}

/// Also accepts bare integers and strings `"a"` or `"a/b"` as exact rationals.
pub fn scalar_from_json(ctx: &PadicContext, node: Node) -> Result<PadicScalar> {
    match node.value {
        Value::Number(_) => Ok(PadicScalar::from_i64(ctx, node.int()?)),
        Value::String(s) => {
            let (a, b) = s.split_once('/').unwrap_or((s, "1"));
            let parse = |t: &str| t.trim().parse::<i64>().map_err(|_| node.err(format!("bad rational \"{s}\"")));
            let (a, b) = (parse(a)?, parse(b)?);
            node.wrap(PadicScalar::from_ratio(ctx, a, b))
        }
        Value::Object(_) => {
            let p = node.field("p")?;
            if p.node().uint()? != ctx.p() as u64 {
                return Err(p.node().err(format!("prime {} does not match context p = {}", p.value, ctx.p())));
            }
            let digits_node = node.field("digits")?;
            let mut digits = Vec::new();
            for d in digits_node.node().items()? {
                let n = d.node().uint()?;
                if n >= ctx.p() as u64 {
                    return Err(d.node().err(format!("digit {n} out of range for p = {}", ctx.p())));
                }
                digits.push(n as u32);
            }
            let v_node = node.field("v")?;
            if v_node.value.as_str() == Some("inf") {
                if !digits.is_empty() {
                    return Err(digits_node.node().err("zero carries no digits"));
                }
                return Ok(PadicScalar::zero(ctx));
            }
            let v = v_node.node().int()?;
            let exact = match node.opt_field("exact")? {
                Some(e) => e.node().bool()?,
                None => false,
            };
            let neg = match node.opt_field("neg")? {
                Some(e) => e.node().bool()?,
                None => false,
            };
            if neg && !exact {
                return Err(node.err("\"neg\" only applies to exact values"));
            }
            let dn = digits_node.node();
            if digits.first() == Some(&0) {
                return Err(dn.err("leading digit must be nonzero"));
            }
            if !exact {
                if digits.len() > ctx.prec() as usize {
                    return Err(dn.err(format!("{} digits exceed precision {}", digits.len(), ctx.prec())));
                }
                return dn.wrap(PadicScalar::from_digits(ctx, v, &digits));
            }
            if digits.len() != ctx.prec() as usize {
                return Err(dn.err(format!("exact value needs {} digits, got {}", ctx.prec(), digits.len())));
            }
            let mut r = BigUint::from(0u32);
            for &d in digits.iter().rev() {
                r = r * ctx.p() + d;
            }
            let u = if neg { BigInt::from(r) - BigInt::from(ctx.p_pow(ctx.prec())) } else { BigInt::from(r) };
            Ok(PadicScalar::from_exact(ctx, v, &u))
        }
        _ => Err(node.err("expected a scalar object, integer or rational string")),
    }
}

pub fn vector_to_json(x: &PadicVector) -> Value {
    Value::Array(x.coords().iter().map(scalar_to_json).collect())
}

pub fn vector_from_json(ctx: &PadicContext, node: Node) -> Result<PadicVector> {
    let coords = node.items()?.iter().map(|c| scalar_from_json(ctx, c.node())).collect::<Result<Vec<_>>>()?;
    Ok(PadicVector::new(coords))
}

fn vector_of_dim(ctx: &PadicContext, node: Node, d: usize) -> Result<PadicVector> {
    let v = vector_from_json(ctx, node)?;
    if v.dim() != d {
        return Err(node.err(format!("expected {d} coordinates, got {}", v.dim())));
    }
    Ok(v)
}

// balls and regions

pub fn ball_to_json(b: &Ball, ctx: &PadicContext) -> Value {
    json!({"center": vector_to_json(&b.center_vector(ctx)), "k": b.level()})
}

/// The center may be any integral vector; it is reduced to canonical form.
pub fn ball_from_json(ctx: &PadicContext, node: Node) -> Result<Ball> {
    let center = node.field("center")?;
    let c = vector_from_json(ctx, center.node())?;
    if c.dim() == 0 {
        return Err(center.node().err("ball needs at least one coordinate"));
    }
    let kf = node.field("k")?;
    let k = small(kf.node().uint()?, "level", &kf.node())?;
    center.node().wrap(Ball::from_vector(&c, k, ctx.p()))
}

pub fn region_to_json(r: &ClopenRegion, ctx: &PadicContext) -> Value {
    json!({"balls": r.balls().iter().map(|b| ball_to_json(b, ctx)).collect::<Vec<_>>()})
}

/// `dim` is required only to type an empty region.
pub fn region_from_json(ctx: &PadicContext, node: Node, dim: Option<usize>) -> Result<ClopenRegion> {
    let list = node.field("balls")?;
    let mut balls = Vec::new();
    for b in list.node().items()? {
        let ball = ball_from_json(ctx, b.node())?;
        let want = dim.or(balls.first().map(Ball::dim));
        if let Some(d) = want {
            if ball.dim() != d {
                return Err(b.node().err(format!("ball of dimension {} in a region of dimension {d}", ball.dim())));
            }
        }
        balls.push(ball);
    }
    let d = dim.or(balls.first().map(Ball::dim)).ok_or_else(|| list.node().err("empty region of unknown dimension"))?;
    Ok(ClopenRegion::from_balls(ctx.p(), d, balls))
}

// function models

fn polymap_to_json(map: &PolyMap, ctx: &PadicContext) -> Value {
    let mut terms: BTreeMap<Exps, Vec<PadicScalar>> = BTreeMap::new();
    for (i, comp) in map.comps().iter().enumerate() {
        for (e, c) in comp.terms() {
            terms.entry(e.clone()).or_insert_with(|| vec![PadicScalar::zero(ctx); map.dim()])[i] = c.clone();
        }
    }
    Value::Array(
        terms
            .into_iter()
            .map(|(e, c)| json!({"exps": e, "coef": vector_to_json(&PadicVector::new(c))}))
            .collect(),
    )
}

fn polymap_from_json(ctx: &PadicContext, node: Node, nvars: usize, codim: usize) -> Result<PolyMap> {
    let mut comps = vec![Poly::zero(nvars); codim];
    for t in node.items()? {
        let tn = t.node();
        let ef = tn.field("exps")?;
        let mut exps = Vec::new();
        for e in ef.node().items()? {
            exps.push(small(e.node().uint()?, "exponent", &e.node())?);
        }
        if exps.len() != nvars {
            return Err(ef.node().err(format!("expected {nvars} exponents, got {}", exps.len())));
        }
        let cf = tn.field("coef")?;
        let coef = vector_of_dim(ctx, cf.node(), codim)?;
        for (comp, c) in comps.iter_mut().zip(coef.coords()) {
            cf.node().wrap(comp.add_term(exps.clone(), c.clone()))?;
        }
    }
    Ok(PolyMap::new(nvars, comps))
}

pub fn function_to_json(f: &FunctionModel) -> Value {
    let ctx = f.ctx();
    json!({
        "domain": region_to_json(f.domain(), ctx),
        "codim": f.codim(),
        "pieces": f.pieces().iter().map(|pc| json!({
            "ball": ball_to_json(&pc.ball, ctx),
            "poly": polymap_to_json(&pc.map, ctx),
        })).collect::<Vec<_>>(),
    })
}

/// The listed domain must equal the union of the piece balls.
pub fn function_from_json(ctx: &PadicContext, node: Node) -> Result<FunctionModel> {
    let cf = node.field("codim")?;
    let codim = cf.node().uint()? as usize;
    if codim == 0 {
        return Err(cf.node().err("codimension must be positive"));
    }
    let plist = node.field("pieces")?;
    let mut pieces = Vec::new();
    let mut dim = None;
    for pc in plist.node().items()? {
        let bf = pc.node().field("ball")?;
        let ball = ball_from_json(ctx, bf.node())?;
        if *dim.get_or_insert(ball.dim()) != ball.dim() {
            return Err(bf.node().err("pieces of different dimensions"));
        }
        let map = polymap_from_json(ctx, pc.node().field("poly")?.node(), ball.dim(), codim)?;
        pieces.push(Piece { ball, map });
    }
    if pieces.is_empty() {
        return Err(plist.node().err("function model without pieces"));
    }
    let f = plist.node().wrap(FunctionModel::new(ctx, pieces))?;
    if let Some(df) = node.opt_field("domain")? {
        let dom = region_from_json(ctx, df.node(), dim)?;
        if &dom != f.domain() {
            return Err(df.node().err("domain differs from the union of the pieces"));
        }
    }
    Ok(f)
}

// algebras

pub fn algebra_to_json(a: &StructAlgebra) -> Value {
    let n = a.dim();
    let t: Vec<Value> = (0..n)
        .map(|i| {
            Value::Array((0..n).map(|j| Value::Array((0..n).map(|k| scalar_to_json(a.t(i, j, k))).collect())).collect())
        })
        .collect();
    json!({"n": n, "t": t, "one": a.one().iter().map(scalar_to_json).collect::<Vec<_>>()})
}

pub fn algebra_from_json(ctx: &PadicContext, node: Node) -> Result<StructAlgebra> {
    let nf = node.field("n")?;
    let n = nf.node().uint()? as usize;
    if n == 0 {
        return Err(nf.node().err("algebra dimension must be positive"));
    }
    let tf = node.field("t")?;
    let mut t = Vec::with_capacity(n * n * n);
    fn check<'b>(l: &'b Located, len: usize) -> Result<Vec<Located<'b>>> {
        let items = l.node().items()?;
        if items.len() != len {
            return Err(l.node().err(format!("expected {len} entries, got {}", items.len())));
        }
        Ok(items)
    }
    for row in check(&tf, n)? {
        for col in check(&row, n)? {
            for c in check(&col, n)? {
                t.push(scalar_from_json(ctx, c.node())?);
            }
        }
    }
    let one = vector_of_dim(ctx, node.field("one")?.node(), n)?;
    node.wrap(StructAlgebra::new(n, t, one.0))
}

// diffeomorphisms

pub fn endo_to_json(g: &BallEndo) -> Value {
    json!({"ball": ball_to_json(g.ball(), g.ctx()), "sigma": function_to_json(g.sigma())})
}

/// `{"ball", "sigma"}` where γ = id + σ on the ball.
pub fn endo_from_json(ctx: &PadicContext, node: Node) -> Result<BallEndo> {
    let ball = ball_from_json(ctx, node.field("ball")?.node())?;
    let sf = node.field("sigma")?;
    let sigma = function_from_json(ctx, sf.node())?;
    sf.node().wrap(BallEndo::new(ball, sigma))
}

pub fn cs_endo_to_json(a: &CompactlySupportedEndo) -> Value {
    json!({"sigma": function_to_json(a.sigma())})
}

pub fn cs_endo_from_json(ctx: &PadicContext, node: Node) -> Result<CompactlySupportedEndo> {
    let sf = node.field("sigma")?;
    let sigma = function_from_json(ctx, sf.node())?;
    sf.node().wrap(CompactlySupportedEndo::new(sigma))
}

pub fn perm_to_json(perm: &[usize]) -> Value {
    perm.to_vec().into()
}

pub fn perm_from_json(node: Node) -> Result<Vec<usize>> {
    let perm = node.items()?.iter().map(|x| x.node().uint().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    node.wrap(crate::diffeo::check_permutation(&perm))?;
    Ok(perm)
}

// weak-product bundles

/// Diffeomorphisms referenced by id from words, certified at `level`.
#[derive(Clone, Debug)]
pub struct DiffeoTable {
    pub by_id: BTreeMap<String, CertifiedDiffeo>,
}

impl DiffeoTable {
    /// Entries are endo objects or strings naming a file; `load` resolves
    /// the latter.
    pub fn from_json(ctx: &PadicContext, node: Node, level: u32, load: &dyn Fn(&str) -> Result<Value>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (id, entry) in node.entries()? {
            let en = entry.node();
            let endo = match entry.value {
                Value::String(file) => {
                    let v = en.wrap(load(file))?;
                    let root = Located { value: &v, path: format!("{file}:$") };
                    endo_from_json(ctx, root.node())?
                }
                _ => endo_from_json(ctx, en)?,
            };
            by_id.insert(id, en.wrap(CertifiedDiffeo::new(endo, level))?);
        }
        Ok(DiffeoTable { by_id })
    }

    fn word(&self, ctx: &PadicContext, ball: &Ball, node: Node, level: u32) -> Result<DiffeoWord> {
        let mut factors = Vec::new();
        for f in node.items()? {
            let fnode = f.node();
            let inv = match fnode.opt_field("inv")? {
                Some(i) => i.node().bool()?,
                None => false,
            };
            let g = if let Some(id) = fnode.opt_field("id")? {
                let name = id.node().str()?;
                self.by_id.get(name).cloned().ok_or_else(|| id.node().err(format!("unknown diffeomorphism id \"{name}\"")))?
            } else {
                let e = fnode.field("endo")?;
                let endo = endo_from_json(ctx, e.node())?;
                e.node().wrap(CertifiedDiffeo::new(endo, level))?
            };
            if g.ball() != ball {
                return Err(fnode.err(format!("factor acts on {} but the entry is on {ball}", g.ball())));
            }
            factors.push((g, inv));
        }
        Ok(DiffeoWord::from_factors(ball.clone(), factors))
    }
}

pub fn word_to_json(w: &DiffeoWord) -> Value {
    Value::Array(w.factors().iter().map(|(g, inv)| json!({"endo": endo_to_json(g.endo()), "inv": inv})).collect())
}

pub fn index_to_json(index: &BTreeSet<Ball>, ctx: &PadicContext) -> Value {
    Value::Array(index.iter().map(|b| ball_to_json(b, ctx)).collect())
}

pub fn index_from_json(ctx: &PadicContext, node: Node) -> Result<BTreeSet<Ball>> {
    let mut out = BTreeSet::new();
    for b in node.items()? {
        if !out.insert(ball_from_json(ctx, b.node())?) {
            return Err(b.node().err("ball listed twice"));
        }
    }
    Ok(out)
}

/// `[{"ball", "word": [{"id" | "endo", "inv"}]}]`; balls not listed carry
/// the identity.
pub fn element_from_json(
    ctx: &PadicContext,
    node: Node,
    index: &BTreeSet<Ball>,
    table: &DiffeoTable,
    level: u32,
) -> Result<WeakProductElement> {
    let mut entries = BTreeMap::new();
    for e in node.items()? {
        let bf = e.node().field("ball")?;
        let ball = ball_from_json(ctx, bf.node())?;
        if !index.contains(&ball) {
            return Err(bf.node().err(format!("{ball} is not in the index set")));
        }
        let word = table.word(ctx, &ball, e.node().field("word")?.node(), level)?;
        if entries.insert(ball, word).is_some() {
            return Err(bf.node().err("ball has two entries"));
        }
    }
    node.wrap(WeakProductElement::new(index.clone(), entries))
}

pub fn element_to_json(x: &WeakProductElement, ctx: &PadicContext) -> Value {
    Value::Array(
        x.entries()
            .iter()
            .map(|(b, w)| json!({"ball": ball_to_json(b, ctx), "word": word_to_json(w)}))
            .collect(),
    )
}

/// `{"from", "to", "lambda"}`; lambda defaults to 1.
pub fn affine_from_json(ctx: &PadicContext, node: Node) -> Result<AffineBallMap> {
    let from = ball_from_json(ctx, node.field("from")?.node())?;
    let to = ball_from_json(ctx, node.field("to")?.node())?;
    let lambda = match node.opt_field("lambda")? {
        Some(l) => scalar_from_json(ctx, l.node())?,
        None => PadicScalar::one(ctx),
    };
    node.wrap(AffineBallMap::new(from, to, lambda))
}

pub fn affine_to_json(a: &AffineBallMap, ctx: &PadicContext) -> Value {
    json!({"from": ball_to_json(&a.from, ctx), "to": ball_to_json(&a.to, ctx), "lambda": scalar_to_json(&a.lambda)})
}

/// `[{"psi": affine, "word": [...]}]`; an omitted word is the identity.
pub fn global_from_json(ctx: &PadicContext, node: Node, table: &DiffeoTable, level: u32) -> Result<GlobalDiffeo> {
    let mut pieces = Vec::new();
    for pc in node.items()? {
        let psi = affine_from_json(ctx, pc.node().field("psi")?.node())?;
        let inner = match pc.node().opt_field("word")? {
            Some(w) => table.word(ctx, &psi.from, w.node(), level)?,
            None => DiffeoWord::identity(psi.from.clone()),
        };
        pieces.push(GlobalPiece { inner, psi });
    }
    node.wrap(GlobalDiffeo::new(pieces))
}

/// Parses `value` as `kind` and re-emits it canonically.
pub fn canonicalize(ctx: &PadicContext, kind: &str, value: &Value) -> Result<Value> {
    let root = Located::root(value);
    let n = root.node();
    Ok(match kind {
        "scalar" => scalar_to_json(&scalar_from_json(ctx, n)?),
        "vector" => vector_to_json(&vector_from_json(ctx, n)?),
        "ball" => ball_to_json(&ball_from_json(ctx, n)?, ctx),
        "region" => region_to_json(&region_from_json(ctx, n, None)?, ctx),
        "function" => function_to_json(&function_from_json(ctx, n)?),
        "algebra" => algebra_to_json(&algebra_from_json(ctx, n)?),
        "endo" => endo_to_json(&endo_from_json(ctx, n)?),
        "perm" => perm_to_json(&perm_from_json(n)?),
        other => return Err(Error::Invalid(format!("unknown format \"{other}\""))),
    })
}

/// Reads the prime recorded in a scalar-bearing document, if any.
pub fn detect_prime(v: &Value) -> Option<u32> {
    match v {
        Value::Object(m) => {
            if let (Some(p), Some(_)) = (m.get("p"), m.get("digits")) {
                return p.as_u64().and_then(|p| p.to_u32());
            }
            m.values().find_map(detect_prime)
        }
        Value::Array(a) => a.iter().find_map(detect_prime),
        _ => None,
    }
}
