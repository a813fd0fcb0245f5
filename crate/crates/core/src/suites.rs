//! Seeded verification suites.
//!
//! Every sample draws from its own ChaCha stream (`seed`, stream = sample
//! index), so a failure is replayable from the report alone. Samples run in
//! parallel and are reduced in index order.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::balls::{all_level_points, cutoff, decompose, partition_of_unity, subordinate_partition, Ball, ClopenRegion};
use crate::calculus::*;
use crate::cia::{alg_inverse, check_inversion_derivative, check_tensor_product, one_plus_phi, tensor_right_inverse, StructAlgebra};
use crate::diffeo::*;
use crate::error::{Error, Result};
use crate::padic::{is_prime, Approx, PadicContext, PadicScalar, PadicVector, Val};
use crate::poly::{Exps, Poly, PolyMap};
use crate::weakprod::*;

pub const SUITES: [&str; 14] = [
    "chain-rule",
    "scaling",
    "bilinear",
    "eval-deriv",
    "comp-deriv",
    "partition",
    "unity",
    "omega-isometry",
    "inversion",
    "group-axioms",
    "cia-tensor",
    "cia-iota",
    "oplus",
    "conjugate",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub p: u32,
    /// Largest domain dimension drawn.
    pub d: usize,
    /// Largest codomain dimension drawn.
    pub e: usize,
    pub n: u32,
    /// Verification level for exhaustive residue checks.
    pub m: u32,
    pub samples: usize,
    pub deg: u32,
    /// Points or pairs checked per sample where a suite evaluates many.
    pub points: usize,
    /// Fixes the order in the scaling suite; otherwise it cycles 1..=3.
    pub k: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0, p: 3, d: 2, e: 2, n: 12, m: 3, samples: 50, deg: 3, points: 20, k: None }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.into()));
        if !is_prime(self.p as u64) {
            return bad(&format!("{} is not prime", self.p));
        }
        if self.d == 0 || self.e == 0 || self.n == 0 || self.m == 0 || self.samples == 0 || self.deg == 0 || self.points == 0 {
            return bad("all parameters must be positive");
        }
        if self.d > 3 || self.e > 3 {
            return bad("dimensions above 3 are not supported by the suites");
        }
        if matches!(self.k, Some(k) if k == 0 || k > 4) {
            return bad("scaling order must lie in 1..=4");
        }
        let points = (self.p as f64).powi((self.d as u32 * self.m) as i32);
        if points > 1e6 {
            return bad("verification level too fine: more than 10^6 residue points");
        }
        Ok(())
    }

    pub fn ctx(&self) -> Result<PadicContext> {
        PadicContext::new(self.p, self.n)
    }
}

/// Inputs and both sides of the first failing check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub sample: usize,
    pub inputs: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub suite: String,
    pub config: SuiteConfig,
    pub run: u64,
    pub passed: u64,
    pub failure: Option<Witness>,
    pub wall_ms: f64,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.run == self.passed
    }

    /// Wall time is left out when `timed` is false, making the output a pure
    /// function of the configuration.
    pub fn to_json(&self, timed: bool) -> Value {
        let c = &self.config;
        let mut v = json!({
            "suite": self.suite,
            "config": {"seed": c.seed, "p": c.p, "d": c.d, "e": c.e, "N": c.n, "m": c.m,
                       "samples": c.samples, "deg": c.deg, "points": c.points, "k": c.k},
            "run": self.run,
            "passed": self.passed,
            "failure": self.failure.as_ref().map(|w| json!({
                "sample": w.sample, "inputs": w.inputs, "lhs": w.lhs, "rhs": w.rhs
            })),
        });
        if timed {
            v["wall_ms"] = json!(self.wall_ms);
        }
        v
    }

    pub fn summary(&self) -> String {
        let status = if self.ok() { "PASS" } else { "FAIL" };
        let mut s = format!("{status} {}: {}/{} checks in {:.1} ms", self.suite, self.passed, self.run, self.wall_ms);
        if let Some(w) = &self.failure {
            s.push_str(&format!("\n  first failure (sample {}): {}\n  lhs: {}\n  rhs: {}", w.sample, w.inputs, w.lhs, w.rhs));
        }
        s
    }
}

/// Check counter for one sample.
#[derive(Default)]
pub struct Tally {
    pub run: u64,
    pub passed: u64,
    pub failure: Option<Witness>,
    sample: usize,
}

impl Tally {
    fn new(sample: usize) -> Self {
        Tally { sample, ..Default::default() }
    }

    pub fn check(&mut self, ok: bool, inputs: impl FnOnce() -> String, lhs: impl FnOnce() -> String, rhs: impl FnOnce() -> String) {
        self.run += 1;
        if ok {
            self.passed += 1;
        } else if self.failure.is_none() {
            self.failure = Some(Witness { sample: self.sample, inputs: inputs(), lhs: lhs(), rhs: rhs() });
        }
    }

    pub fn identity(&mut self, rep: &IdentityReport, inputs: impl FnOnce() -> String) {
        let show = |v: &[crate::padic::Approx]| format!("[{}]", v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "));
        self.check(rep.equal, inputs, || show(&rep.lhs), || show(&rep.rhs));
    }

    pub fn same<T: PartialEq + std::fmt::Debug>(&mut self, lhs: &T, rhs: &T, inputs: impl FnOnce() -> String) {
        self.check(lhs == rhs, inputs, || format!("{lhs:?}"), || format!("{rhs:?}"));
    }

    fn error(&mut self, e: &Error) {
        self.check(false, || "sample aborted".into(), || format!("error: {e}"), || "no error".into());
    }
}

// ---------------------------------------------------------------------------
// random instances

/// Seeded generator of random instances over one context.
pub struct Gen {
    pub rng: ChaCha8Rng,
    pub ctx: PadicContext,
}

impl Gen {
    pub fn new(ctx: &PadicContext, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Gen { rng, ctx: ctx.clone() }
    }

    pub fn p(&self) -> u32 {
        self.ctx.p()
    }

    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    fn p_i64(&self, k: u32) -> i64 {
        (self.p() as i64).pow(k)
    }

    /// Integer prime to p with up to `digits` base-p digits.
    pub fn unit_int(&mut self, digits: u32) -> i64 {
        let hi = self.p_i64(digits);
        loop {
            let u = self.int(1 - hi, hi - 1);
            if u % self.p() as i64 != 0 {
                return u;
            }
        }
    }

    pub fn unit(&mut self) -> PadicScalar {
        let u = self.unit_int(6);
        PadicScalar::from_i64(&self.ctx, u)
    }

    /// Exact integral scalar: zero with probability 1/8, else `p^v u`, `v ≤ 3`.
    pub fn integral(&mut self) -> PadicScalar {
        if self.rng.gen_ratio(1, 8) {
            return PadicScalar::zero(&self.ctx);
        }
        let v = self.int(0, 3);
        let u = self.unit_int(6);
        PadicScalar::from_i64(&self.ctx, u).shift(v)
    }

    pub fn nonzero_integral(&mut self) -> PadicScalar {
        let v = self.int(0, 3);
        self.unit().shift(v)
    }

    /// Nonzero scalar of valuation in `lo..=hi`.
    pub fn scalar_val(&mut self, lo: i64, hi: i64) -> PadicScalar {
        let v = self.int(lo, hi);
        self.unit().shift(v)
    }

    pub fn vector(&mut self, d: usize) -> PadicVector {
        PadicVector((0..d).map(|_| self.integral()).collect())
    }

    /// Point of `b` with a random tail below the ball's level.
    pub fn point_in(&mut self, b: &Ball) -> PadicVector {
        let ctx = self.ctx.clone();
        let c = b.center_vector(&ctx);
        let tail = self.vector(b.dim()).scale(&PadicScalar::p_power(&ctx, b.level() as i64));
        c.add(&tail).expect("exact values")
    }

    pub fn residue_ball(&mut self, d: usize, k: u32) -> Ball {
        let m = (self.p() as u64).pow(k);
        let c: Vec<u64> = (0..d).map(|_| self.rng.gen_range(0..m)).collect();
        Ball::new(self.p(), &c, k)
    }

    /// Polynomial with each monomial of total degree ≤ `deg` present with
    /// probability 1/2 and coefficient in `[-c, c] \ {0}`, times `scale`.
    pub fn poly(&mut self, nvars: usize, deg: u32, c: i64, scale: &PadicScalar) -> Poly {
        let mut terms = Vec::new();
        for e in monomials(nvars, deg) {
            if self.rng.gen_bool(0.5) {
                let mut a = 0;
                while a == 0 {
                    a = self.int(-c, c);
                }
                terms.push((e, PadicScalar::from_i64(&self.ctx, a).mul(scale)));
            }
        }
        Poly::from_terms(nvars, terms).expect("exact coefficients")
    }

    pub fn polymap(&mut self, nvars: usize, codim: usize, deg: u32) -> PolyMap {
        let one = PadicScalar::one(&self.ctx);
        let c = self.p_i64(2);
        PolyMap::new(nvars, (0..codim).map(|_| self.poly(nvars, deg, c, &one)).collect())
    }

    /// A partition of Z_p^d into level-1 balls, one of them possibly split again.
    pub fn partition(&mut self, d: usize) -> Vec<Ball> {
        let mut balls = Ball::unit(self.p(), d).children();
        if self.rng.gen_bool(0.5) {
            let i = self.rng.gen_range(0..balls.len());
            let b = balls.remove(i);
            balls.extend(b.children());
        }
        balls
    }

    /// Piecewise polynomial map Z_p^d → Q_p^e with integral coefficients.
    pub fn function(&mut self, d: usize, e: usize, deg: u32) -> FunctionModel {
        let balls = if self.rng.gen_ratio(1, 4) { vec![Ball::unit(self.p(), d)] } else { self.partition(d) };
        let pieces = balls.into_iter().map(|ball| Piece { ball, map: self.polymap(d, e, deg) }).collect();
        FunctionModel::new(&self.ctx, pieces).expect("disjoint pieces")
    }

    /// Union of `count` random balls with levels in `1..=max_level`.
    pub fn region(&mut self, d: usize, max_level: u32, count: usize) -> ClopenRegion {
        let mut r = ClopenRegion::empty(self.p(), d);
        for _ in 0..count {
            let k = self.rng.gen_range(1..=max_level);
            r = r.union(&ClopenRegion::ball(self.residue_ball(d, k)));
        }
        r
    }

    /// `γ = id + σ` on `b` with `σ = p^{v_min + k} P`, `P` integral of degree ≤ `deg`.
    pub fn diffeo(&mut self, b: &Ball, deg: u32) -> CertifiedDiffeo {
        let scale = PadicScalar::p_power(&self.ctx, v_min(self.p()) + b.level() as i64);
        let c = self.p_i64(1);
        let d = b.dim();
        let map = PolyMap::new(d, (0..d).map(|_| self.poly(d, deg, c, &scale)).collect());
        let sigma = FunctionModel::on_region(&self.ctx, &ClopenRegion::ball(b.clone()), map).expect("ball region");
        let endo = BallEndo::new(b.clone(), sigma).expect("range lies in p^k O^d");
        CertifiedDiffeo::new(endo, DEFAULT_LEVEL).expect("coefficients satisfy the bound")
    }

    /// Word of one or two random diffeomorphisms, each possibly inverted.
    pub fn word(&mut self, b: &Ball, deg: u32) -> DiffeoWord {
        let len = self.rng.gen_range(1..=2);
        let factors = (0..len).map(|_| (self.diffeo(b, deg), self.rng.gen_bool(0.5))).collect();
        DiffeoWord::from_factors(b.clone(), factors)
    }

    /// Element with each index ball carrying a random word with probability 1/2.
    pub fn element(&mut self, index: &BTreeSet<Ball>, deg: u32) -> WeakProductElement {
        let mut entries = BTreeMap::new();
        for b in index {
            if self.rng.gen_bool(0.5) {
                entries.insert(b.clone(), self.word(b, deg));
            }
        }
        WeakProductElement::new(index.clone(), entries).expect("entries on the index set")
    }

    /// `count` distinct balls of one level, the coarsest holding that many.
    pub fn index_set(&mut self, d: usize, count: usize) -> BTreeSet<Ball> {
        let mut level = 1;
        while (self.p() as usize).pow(d as u32 * level) < count {
            level += 1;
        }
        let mut all = Ball::unit(self.p(), d).descendants(level);
        all.shuffle(&mut self.rng);
        all.into_iter().take(count).collect()
    }

    pub fn dim(&mut self, max: usize) -> usize {
        self.rng.gen_range(1..=max)
    }

    /// `t` for quotient checks: zero when `zero` is set, else of valuation ≤ 3.
    pub fn t(&mut self, zero: bool) -> PadicScalar {
        if zero {
            PadicScalar::zero(&self.ctx)
        } else {
            self.nonzero_integral()
        }
    }
}

/// Exponent tuples of total degree ≤ `deg`, in lexicographic order.
pub fn monomials(nvars: usize, deg: u32) -> Vec<Exps> {
    fn rec(nvars: usize, left: u32, cur: &mut Exps, out: &mut Vec<Exps>) {
        if cur.len() == nvars {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(nvars, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(nvars, deg, &mut Vec::new(), &mut out);
    out
}

fn fmt_vecs(vs: &[PadicVector]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn point_str(pt: &DqPoint) -> String {
    format!("x = {}, y = {}, t = {}", pt.x, pt.y, pt.t)
}

// ---------------------------------------------------------------------------
// suites

type SampleFn = fn(&SuiteConfig, &mut Gen, &mut Tally) -> Result<()>;

fn suite_fn(name: &str) -> Option<SampleFn> {
    Some(match name {
        "chain-rule" => chain_rule,
        "scaling" => scaling,
        "bilinear" => bilinear,
        "eval-deriv" => eval_deriv,
        "comp-deriv" => comp_deriv,
        "partition" => partition,
        "unity" => unity,
        "omega-isometry" => omega_isometry,
        "inversion" => inversion,
        "group-axioms" => group_axioms,
        "cia-tensor" => cia_tensor,
        "cia-iota" => cia_iota,
        "oplus" => oplus,
        "conjugate" => conjugate,
        _ => return None,
    })
}

/// Runs `samples` independent samples of the named suite.
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Report> {
    let f = suite_fn(name).ok_or_else(|| Error::UnknownSuite(name.to_string()))?;
    cfg.validate()?;
    let ctx = cfg.ctx()?;
    let start = Instant::now();
    let tallies: Vec<Tally> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut g = Gen::new(&ctx, cfg.seed, i as u64);
            let mut t = Tally::new(i);
            if let Err(e) = f(cfg, &mut g, &mut t) {
                t.error(&e);
            }
            t
        })
        .collect();
    let mut report = Report { suite: name.to_string(), config: cfg.clone(), run: 0, passed: 0, failure: None, wall_ms: 0.0 };
    for t in tallies {
        report.run += t.run;
        report.passed += t.passed;
        if report.failure.is_none() {
            report.failure = t.failure;
        }
    }
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

fn chain_rule(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let (d1, d2, d3) = (g.dim(cfg.d), g.dim(cfg.e), g.dim(cfg.e));
    let f = g.function(d1, d2, cfg.deg);
    let h = g.function(d2, d3, cfg.deg);
    for zero in [true, false, false] {
        let pt = DqPoint { x: g.vector(d1), y: g.vector(d1), t: g.t(zero) };
        let rep = check_chain_rule(&f, &h, &pt)?;
        tally.identity(&rep, || point_str(&pt));
    }
    Ok(())
}

fn scaling(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let first = tally.sample == 0;
    let k = cfg.k.unwrap_or(1 + tally.sample % 3);
    let k = if first && cfg.k.is_none() { 1 } else { k };
    let d = g.dim(cfg.d);
    let e = g.dim(cfg.e);
    let f = g.function(d, e, cfg.deg);
    let x: Vec<PadicVector> = (0..1 << k).map(|_| g.vector(d)).collect();
    let pv: Vec<PadicScalar> = (0..(1 << k) - 1).map(|_| g.integral()).collect();
    let t = if first { PadicScalar::one(&g.ctx) } else { g.scalar_val(0, 2) };
    let rep = check_scaling(&f, k, &x, &pv, &t)?;
    tally.identity(&rep, || format!("k = {k}, x = [{}], p = {pv:?}, t = {t}", fmt_vecs(&x)));
    Ok(())
}

/// Linear map `Z_p^d → Q_p^e` as a homogeneous degree-one model.
pub fn random_linear(g: &mut Gen, d: usize, e: usize) -> FunctionModel {
    let comps = (0..e)
        .map(|_| {
            let terms = (0..d).map(|i| {
                let mut ex = vec![0; d];
                ex[i] = 1;
                (ex, g.integral())
            });
            Poly::from_terms(d, terms.collect::<Vec<_>>()).expect("exact")
        })
        .collect();
    FunctionModel::polynomial(&g.ctx, PolyMap::new(d, comps)).expect("whole space")
}

/// Bilinear map `Z_p^{d1} × Z_p^{d2} → Q_p^e`.
pub fn random_bilinear(g: &mut Gen, d1: usize, d2: usize, e: usize) -> FunctionModel {
    let n = d1 + d2;
    let comps = (0..e)
        .map(|_| {
            let mut terms = Vec::new();
            for i in 0..d1 {
                for j in 0..d2 {
                    let mut ex = vec![0; n];
                    ex[i] = 1;
                    ex[d1 + j] = 1;
                    terms.push((ex, g.integral()));
                }
            }
            Poly::from_terms(n, terms).expect("exact")
        })
        .collect();
    FunctionModel::polynomial(&g.ctx, PolyMap::new(n, comps)).expect("whole space")
}

fn bilinear(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let e = g.dim(cfg.e);
    match tally.sample % 3 {
        0 => {
            let d = g.dim(cfg.d);
            let lam = random_linear(g, d, e);
            let zero = g.rng.gen_ratio(1, 3);
            let pt = DqPoint { x: g.vector(d), y: g.vector(d), t: g.t(zero) };
            tally.identity(&check_linear_dq(&lam, &pt)?, || point_str(&pt));
        }
        1 => {
            let (d1, d2) = (g.dim(cfg.d), g.dim(cfg.d));
            let beta = random_bilinear(g, d1, d2, e);
            let zero = g.rng.gen_ratio(1, 3);
            let pt = DqPoint { x: g.vector(d1 + d2), y: g.vector(d1 + d2), t: g.t(zero) };
            tally.identity(&check_bilinear_dq(&beta, d1, &pt)?, || point_str(&pt));
        }
        _ => {
            let d = g.dim(cfg.d);
            let map = g.polymap(d, e, 3);
            let f = FunctionModel::polynomial(&g.ctx, map)?;
            let j = g.rng.gen_range(1..=3);
            let x = g.vector(d);
            let dirs: Vec<PadicVector> = (0..j).map(|_| g.vector(d)).collect();
            let w = g.vector(d);
            let (a, b) = (g.integral(), g.integral());
            for rep in check_directional_laws(&f, &x, &dirs, &w, &a, &b)? {
                tally.identity(&rep, || format!("x = {x}, dirs = [{}], w = {w}, a = {a}, b = {b}", fmt_vecs(&dirs)));
            }
        }
    }
    Ok(())
}

fn eval_deriv(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let (d, e) = (g.dim(cfg.d), g.dim(cfg.e));
    let gamma = g.function(d, e, cfg.deg);
    let eta = g.function(d, e, cfg.deg);
    let (x, y, t) = (g.vector(d), g.vector(d), g.nonzero_integral());
    let rep = check_eval_derivative(&gamma, &eta, &x, &y, &t)?;
    tally.identity(&rep, || format!("x = {x}, y = {y}, t = {t}"));
    Ok(())
}

fn comp_deriv(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let (d, d2, e) = (g.dim(cfg.d), g.dim(cfg.d), g.dim(cfg.e));
    let gamma = g.function(d2, e, cfg.deg);
    let gamma1 = g.function(d2, e, cfg.deg);
    let eta = g.function(d, d2, cfg.deg);
    let eta1 = g.function(d, d2, cfg.deg);
    let (t, x) = (g.nonzero_integral(), g.vector(d));
    let rep = check_composition_derivative(&gamma, &eta, &gamma1, &eta1, &t, &x)?;
    let inputs = || format!("x = {x}, t = {t}");
    tally.identity(&rep.at_t, inputs);
    tally.identity(&rep.at_zero, inputs);
    Ok(())
}

/// Random region and a cover of it whose last-resort member is placed at a
/// random position.
pub fn region_and_cover(g: &mut Gen, d: usize) -> (ClopenRegion, Vec<ClopenRegion>) {
    let count = g.rng.gen_range(1..=3);
    let region = g.region(d, 2, count);
    let members = g.rng.gen_range(1..=3);
    let mut cover: Vec<ClopenRegion> = (0..members)
        .map(|_| {
            let c = g.rng.gen_range(1..=3);
            g.region(d, 3, c)
        })
        .collect();
    let covered = cover.iter().fold(ClopenRegion::empty(g.p(), d), |acc, c| acc.union(c));
    let extra = g.region(d, 3, 1);
    let rest = region.difference(&covered).union(&extra);
    let pos = g.rng.gen_range(0..=cover.len());
    cover.insert(pos, rest);
    (region, cover)
}

fn residue_str(z: &[u64]) -> String {
    format!("{z:?}")
}

fn partition(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let d = g.dim(cfg.d);
    let (region, cover) = region_and_cover(g, d);
    let p = g.p();
    let m = cfg.m.max(3);
    let describe = || format!("region {:?}, cover {:?}", region.balls(), cover.iter().map(|c| c.balls().to_vec()).collect::<Vec<_>>());

    let pieces = decompose(&region)?;
    let parts = subordinate_partition(&region, &cover)?;
    let finest = pieces.iter().chain(parts.iter().map(|(b, _)| b)).map(|b| b.level()).max().unwrap_or(0);
    tally.check(finest <= m, describe, || format!("finest ball level {finest}"), || format!("≤ verification level {m}"));

    let rebuilt = ClopenRegion::from_balls(p, d, pieces.clone());
    tally.same(&rebuilt, &region, describe);
    let full = (p as usize).pow(d as u32);
    let mut fams: BTreeMap<Ball, usize> = BTreeMap::new();
    for b in &pieces {
        if let Some(par) = b.parent() {
            *fams.entry(par).or_default() += 1;
        }
    }
    let complete: Vec<&Ball> = fams.iter().filter(|(_, &n)| n == full).map(|(b, _)| b).collect();
    tally.same(&complete, &Vec::new(), describe);

    for (b, i) in &parts {
        tally.check(cover[*i].contains_ball(b), describe, || format!("{b} assigned to member {i}"), || "ball inside its member".into());
    }
    let mut violations = 0usize;
    let mut first = None;
    for z in all_level_points(p, d, m) {
        let inside = region.contains_residue(&z) as usize;
        let hits_dec = pieces.iter().filter(|b| b.contains_residue(&z)).count();
        let hits_sub = parts.iter().filter(|(b, _)| b.contains_residue(&z)).count();
        if hits_dec != inside || hits_sub != inside {
            violations += 1;
            first.get_or_insert((z, hits_dec, hits_sub, inside));
        }
    }
    tally.check(
        violations == 0,
        describe,
        || match &first {
            Some((z, a, b, _)) => format!("{violations} bad points; at {} decomposition hits {a}, partition hits {b}", residue_str(z)),
            None => String::new(),
        },
        || match &first {
            Some((.., inside)) => format!("each hit count {inside}"),
            None => String::new(),
        },
    );
    Ok(())
}

fn unity(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let d = g.dim(cfg.d);
    let (region, cover) = region_and_cover(g, d);
    let p = g.p();
    let m = cfg.m.max(3);
    let describe = || format!("region {:?}, cover {:?}", region.balls(), cover.iter().map(|c| c.balls().to_vec()).collect::<Vec<_>>());
    let hs = partition_of_unity(&region, &cover)?;
    for (i, h) in hs.iter().enumerate() {
        tally.check(cover[i].contains_region(&h.support), describe, || format!("support of h_{i} {:?}", h.support.balls()), || format!("inside member {i}"));
    }
    let mut bad = None;
    for z in all_level_points(p, d, m) {
        let total: u32 = hs.iter().map(|h| h.eval_residue(&z)).sum();
        let want = region.contains_residue(&z) as u32;
        if total != want && bad.is_none() {
            bad = Some((z, total, want));
        }
    }
    tally.check(
        bad.is_none(),
        describe,
        || bad.as_ref().map(|(z, t, _)| format!("sum {t} at {}", residue_str(z))).unwrap_or_default(),
        || bad.as_ref().map(|(_, _, w)| format!("{w}")).unwrap_or_default(),
    );

    // cut-off between a compact K and an open U ⊇ K
    let cu = g.rng.gen_range(1..=3);
    let u = g.region(d, 2, cu);
    let ck = g.rng.gen_range(1..=3);
    let k = u.intersection(&g.region(d, 3, ck));
    let h = cutoff(&k, &u)?;
    let mut bad = None;
    for z in all_level_points(p, d, m) {
        let v = h.eval_residue(&z);
        if (k.contains_residue(&z) && v != 1) || (!u.contains_residue(&z) && v != 0) {
            bad.get_or_insert((z, v));
        }
    }
    tally.check(
        bad.is_none(),
        || format!("K {:?}, U {:?}", k.balls(), u.balls()),
        || bad.as_ref().map(|(z, v)| format!("cut-off {v} at {}", residue_str(z))).unwrap_or_default(),
        || "1 on K, 0 off U".into(),
    );
    Ok(())
}

fn random_diffeo_ball(cfg: &SuiteConfig, g: &mut Gen) -> (Ball, CertifiedDiffeo) {
    let d = g.dim(cfg.d);
    let k = g.rng.gen_range(0..=1);
    let b = g.residue_ball(d, k);
    let gamma = g.diffeo(&b, cfg.deg);
    (b, gamma)
}

fn omega_isometry(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let (b, gamma) = random_diffeo_ball(cfg, g);
    let pairs: Vec<(PadicVector, PadicVector)> = (0..cfg.points).map(|_| (g.point_in(&b), g.point_in(&b))).collect();
    let rep = isometry_check(&gamma, &pairs)?;
    tally.run += rep.checked as u64;
    tally.passed += (rep.checked - rep.violations.len()) as u64;
    if let Some((x, y)) = rep.violations.first() {
        let (gx, gy) = (gamma.gamma_mod(x, cfg.n as i64)?, gamma.gamma_mod(y, cfg.n as i64)?);
        tally.failure.get_or_insert(Witness {
            sample: tally.sample,
            inputs: format!("ball {b}, x = {x}, y = {y}"),
            lhs: format!("v(γx - γy) = {}", gx.diff_valuation(&gy)),
            rhs: format!("v(x - y) = {}", x.diff_valuation(y)),
        });
    }
    Ok(())
}

fn inversion(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let (b, gamma) = random_diffeo_ball(cfg, g);
    let target = cfg.n as i64;
    let cap = iteration_cap(g.p(), target);
    for _ in 0..cfg.points {
        let y = g.point_in(&b);
        let (x, iters) = invert_at(&gamma, &y, target)?;
        // x + σ(x) - y summed once so a complete cancellation reads as O(p^A)
        let sx = gamma.endo().sigma().eval(&x)?;
        let resid: Vec<Approx> = (0..y.dim()).map(|i| Approx::sum_approx(&g.ctx, [&x.0[i], &sx.0[i], &y.0[i].neg()])).collect();
        let close = resid.iter().all(|r| match r {
            Approx::Value(v) => v.valuation() >= Val::Fin(target),
            Approx::ZeroMod(a) => *a >= target,
        });
        tally.check(close, || format!("ball {b}, y = {y}"), || format!("γ(x) - y = {resid:?}"), || format!("0 mod p^{target}"));
        tally.check(iters <= cap, || format!("ball {b}, y = {y}"), || format!("{iters} iterations"), || format!("≤ {cap}"));
    }
    let m = cfg.m.max(b.level());
    let region = ClopenRegion::ball(b.clone());
    let round = region_level_map(&region, m, &g.ctx, |y| {
        let (x, _) = invert_at(&gamma, y, target)?;
        gamma.gamma_mod(&x, m as i64)
    })?;
    tally.same(&round, &perm_identity(round.len()), || format!("γ∘γ^-1 on {b} at level {m}"));
    Ok(())
}

fn level_for(index: &BTreeSet<Ball>, m: u32) -> u32 {
    index.iter().map(|b| b.level()).max().unwrap_or(0).max(m)
}

fn group_axioms(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let d = g.dim(cfg.d);
    let ctx = g.ctx.clone();
    let index = g.index_set(d, 8);
    let m = level_for(&index, cfg.m);
    let deg = cfg.deg.min(2);
    let (a, b, c) = (g.element(&index, deg), g.element(&index, deg), g.element(&index, deg));
    let lm = |x: &WeakProductElement| x.level_map(&ctx, m);
    let inputs = || format!("index {:?}", index);
    let (pa, pb) = (lm(&a)?, lm(&b)?);

    let ab = wp_mul(&a, &b)?;
    let lhs = lm(&wp_mul(&ab, &c)?)?;
    let rhs = lm(&wp_mul(&a, &wp_mul(&b, &c)?)?)?;
    tally.same(&lhs, &rhs, inputs);
    tally.same(&lm(&ab)?, &perm_compose(&pa, &pb), inputs);
    let ai = wp_inv(&a)?;
    let id = perm_identity(pa.len());
    tally.same(&lm(&wp_mul(&a, &ai)?)?, &id, inputs);
    tally.same(&lm(&wp_mul(&ai, &a)?)?, &id, inputs);
    tally.same(&lm(&ai)?, &perm_inverse(&pa), inputs);

    // induced maps of single-ball composites
    let ball = index.iter().next().expect("nonempty index").clone();
    let (g1, g2) = (g.diffeo(&ball, deg), g.diffeo(&ball, deg));
    let mb = m.max(ball.level());
    let comp = compose_diffeos(&g1, &g2)?;
    tally.same(
        &induced_level_map(&comp, mb)?,
        &perm_compose(&induced_level_map(&g1, mb)?, &induced_level_map(&g2, mb)?),
        || format!("composition on {ball} at level {mb}"),
    );

    // relabelling along a ball permutation with affine identifications
    let balls: Vec<Ball> = index.iter().cloned().collect();
    let mut targets = balls.clone();
    targets.shuffle(&mut g.rng);
    let mut psis = BTreeMap::new();
    for (from, to) in balls.iter().zip(&targets) {
        let lambda = g.unit();
        psis.insert(to.clone(), AffineBallMap::new(from.clone(), to.clone(), lambda)?);
    }
    let r = |x: &WeakProductElement| relabel_diffeos(x, &psis);
    tally.same(&lm(&r(&ab)?)?, &lm(&wp_mul(&r(&a)?, &r(&b)?)?)?, || format!("relabel {psis:?}"));
    let back: BTreeMap<Ball, AffineBallMap> = psis.values().map(|psi| Ok((psi.from.clone(), psi.inverse()?))).collect::<Result<_>>()?;
    tally.same(&lm(&relabel_diffeos(&r(&a)?, &back)?)?, &pa, || format!("relabel {psis:?} and back"));

    // regrouping of a product index over permutations
    let fibers: BTreeMap<u32, BTreeSet<u32>> = (0..3u32).map(|i| (i, (0..=i).collect())).collect();
    let k: BTreeSet<(u32, u32)> = fibers.iter().flat_map(|(i, js)| js.iter().map(move |j| (*i, *j))).collect();
    let rand_wp = |g: &mut Gen| {
        let mut entries = BTreeMap::new();
        for ij in &k {
            if g.rng.gen_bool(0.5) {
                let mut v: Vec<usize> = (0..4).collect();
                v.shuffle(&mut g.rng);
                entries.insert(*ij, Perm(v));
            }
        }
        WeakProduct::new(k.clone(), entries)
    };
    let (x, y) = (rand_wp(g)?, rand_wp(g)?);
    let reg = |z: &WeakProduct<(u32, u32), Perm>| regroup(z, &fibers);
    let lhs = reg(&x.mul(&y)?)?;
    let rhs = reg(&x)?.mul(&reg(&y)?)?;
    tally.same(&lhs, &rhs, || format!("x = {x:?}, y = {y:?}"));
    tally.same(&flatten(&reg(&x)?, &fibers)?, &x, || format!("x = {x:?}"));
    Ok(())
}

fn cia_pair(g: &mut Gen, sample: usize) -> (StructAlgebra, StructAlgebra) {
    let a = g.unit_int(2);
    let a = PadicScalar::from_i64(&g.ctx, a);
    let f = StructAlgebra::quadratic(&g.ctx, &a);
    let alg = if sample.is_multiple_of(2) { StructAlgebra::scalars(&g.ctx) } else { StructAlgebra::matrices(&g.ctx, 2) };
    (f, alg)
}

fn cia_tensor(_cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let (f, a) = cia_pair(g, tally.sample);
    // entries of positive valuation keep S(z) invertible
    let z: Vec<Vec<PadicScalar>> = (0..f.dim()).map(|_| (0..a.dim()).map(|_| g.integral().shift(1)).collect()).collect();
    let inputs = || format!("F = Q_p[x]/(x^2 - {}), dim A = {}, z = {z:?}", f.t(1, 1, 0), a.dim());
    let rho = tensor_right_inverse(&f, &a, &z)?;
    tally.identity(&check_tensor_product(&f, &a, &z, &rho)?, inputs);
    let fa = StructAlgebra::tensor(&f, &a);
    let via_regular = alg_inverse(&fa, &one_plus_phi(&f, &a, &z)?)?;
    let direct = PadicVector(one_plus_phi(&f, &a, &rho)?);
    tally.check(direct.agrees(&PadicVector(via_regular.clone())), inputs, || format!("{via_regular:?}"), || direct.to_string());
    Ok(())
}

fn cia_iota(_cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let a = StructAlgebra::matrices(&g.ctx, 2);
    // unit diagonal over a divisible off-diagonal keeps the determinant a unit
    let x: Vec<PadicScalar> = vec![g.unit(), g.integral().shift(1), g.integral().shift(1), g.unit()];
    let v: Vec<PadicScalar> = (0..4).map(|_| g.integral()).collect();
    let zero = g.rng.gen_ratio(1, 3);
    // t small enough that x + t v stays invertible
    let t = if zero { PadicScalar::zero(&g.ctx) } else { g.scalar_val(4, 6) };
    let rep = check_inversion_derivative(&a, &x, &v, &t)?;
    tally.identity(&rep, || format!("x = {x:?}, v = {v:?}, t = {t}"));
    Ok(())
}

fn oplus(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let d = g.dim(cfg.d);
    let ids: Vec<u32> = (0..5).collect();
    let exceptional: BTreeSet<u32> = if g.rng.gen_bool(0.5) { [g.rng.gen_range(0..5)].into_iter().collect() } else { BTreeSet::new() };
    let mut fs = BTreeMap::new();
    for &i in &ids {
        let mut map = g.polymap(d, d, 2);
        if !exceptional.contains(&i) {
            map = map.map(|c| {
                let mut q = c.clone();
                if let Some(k) = c.coeff(&vec![0; d]).cloned() {
                    q.add_term(vec![0; d], k.neg())?;
                }
                Ok(q)
            })?;
        }
        fs.insert(i, FunctionModel::polynomial(&g.ctx, map)?);
    }
    let mut support: Vec<u32> = ids.clone();
    support.shuffle(&mut g.rng);
    let x: BTreeMap<u32, PadicVector> = support[..2].iter().map(|&i| (i, g.vector(d))).collect();
    let out = oplus_apply(&fs, &x, &exceptional, None)?;
    let inputs = || format!("x = {x:?}, exceptional = {exceptional:?}");
    let allowed: BTreeSet<u32> = x.keys().chain(&exceptional).copied().collect();
    tally.check(out.keys().all(|i| allowed.contains(i)), inputs, || format!("support {:?}", out.keys().collect::<Vec<_>>()), || format!("⊆ {allowed:?}"));
    for &i in &ids {
        let xi = x.get(&i).cloned().unwrap_or_else(|| PadicVector::zeros(&g.ctx, d));
        let want = fs[&i].eval(&xi)?;
        let got = out.get(&i).cloned().unwrap_or_else(|| PadicVector::zeros(&g.ctx, d));
        tally.check(got.agrees(&want), inputs, || format!("component {i}: {got}"), || want.to_string());
    }
    // a nonvanishing map outside the exceptional set must be refused
    if let Some(&i) = ids.iter().find(|i| !exceptional.contains(i)) {
        let mut bad = fs.clone();
        let one = PadicScalar::one(&g.ctx);
        bad.insert(i, FunctionModel::polynomial(&g.ctx, PolyMap::constant(d, &vec![one; d]))?);
        let r = oplus_apply(&bad, &x, &exceptional, None);
        let refused = matches!(r, Err(Error::ZeroConditionViolated(_)));
        tally.check(refused, inputs, || format!("{r:?}"), || format!("ZeroConditionViolated at {i}"));
    }
    Ok(())
}

/// Global diffeomorphism permuting the balls of `index` by random affine
/// identifications, with random inner words.
pub fn random_global(g: &mut Gen, index: &BTreeSet<Ball>, deg: u32) -> Result<GlobalDiffeo> {
    let balls: Vec<Ball> = index.iter().cloned().collect();
    let mut targets = balls.clone();
    targets.shuffle(&mut g.rng);
    let mut pieces = Vec::new();
    for (from, to) in balls.iter().zip(targets) {
        let inner = if g.rng.gen_bool(0.5) { g.word(from, deg) } else { DiffeoWord::identity(from.clone()) };
        let lambda = g.unit();
        pieces.push(GlobalPiece { inner, psi: AffineBallMap::new(from.clone(), to, lambda)? });
    }
    GlobalDiffeo::new(pieces)
}

fn conjugate(cfg: &SuiteConfig, g: &mut Gen, tally: &mut Tally) -> Result<()> {
    let d = g.dim(cfg.d.min(2));
    let ctx = g.ctx.clone();
    let index: BTreeSet<Ball> = Ball::unit(g.p(), d).children().into_iter().collect();
    let m = level_for(&index, cfg.m.min(if d == 1 { 3 } else { 2 }));
    let deg = cfg.deg.min(2);
    let gamma = random_global(g, &index, deg)?;
    let (e1, e2) = (g.element(&index, deg), g.element(&index, deg));
    let lm = |x: &WeakProductElement| x.level_map(&ctx, m);
    let pg = gamma.level_map(&ctx, m)?;
    let inputs = || format!("γ on {:?}, level {m}", index);
    let c1 = conjugate_global(&gamma, &e1)?;
    let c2 = conjugate_global(&gamma, &e2)?;
    tally.same(&lm(&c1)?, &perm_compose(&perm_compose(&pg, &lm(&e1)?), &perm_inverse(&pg)), inputs);
    tally.same(&lm(&conjugate_global(&gamma, &wp_mul(&e1, &e2)?)?)?, &lm(&wp_mul(&c1, &c2)?)?, inputs);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert!(matches!(run_suite("nope", &SuiteConfig::default()), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(1, 3), vec![vec![0], vec![1], vec![2], vec![3]]);
    }
}
