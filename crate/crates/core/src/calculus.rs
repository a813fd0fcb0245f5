//! Piecewise-polynomial maps on ball partitions and their difference quotients.
//!
//! `f^[1](x, y, t) = (f(x + t y) - f(x)) / t` extends continuously to `t = 0`.
//! Iterating gives `f^[k]`; the braced form `f^{k}` evaluates the same maps
//! with vector arguments grouped before scalar ones.
//!
//! Evaluation strategy at each level: when every point the quotient touches
//! lies on pieces carrying the same polynomial, the quotient is evaluated
//! from its symbolic expansion (no cancellation). Otherwise a nonzero `t`
//! uses the raw quotient, and `t` with zero standard part uses a Taylor
//! expansion in a fresh nilpotent variable.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::balls::{Ball, ClopenRegion};
use crate::error::{Error, Result};
use crate::integral::{values_have_valuation, Verdict};
use crate::padic::{Approx, PadicContext, PadicScalar, PadicVector, Val};
use crate::poly::{Poly, PolyMap};
use crate::ring::{Jet, Ring};

/// Enumeration level cap for composition certificates.
pub const COMPOSE_LEVEL: u32 = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub ball: Ball,
    /// Polynomial in global coordinates.
    pub map: PolyMap,
}

#[derive(Clone, Debug)]
pub struct FunctionModel {
    ctx: PadicContext,
    domain: ClopenRegion,
    dim: usize,
    codim: usize,
    pieces: Vec<Piece>,
}

impl PartialEq for FunctionModel {
    fn eq(&self, o: &Self) -> bool {
        self.ctx == o.ctx && self.codim == o.codim && self.pieces == o.pieces
    }
}

impl FunctionModel {
    pub fn new(ctx: &PadicContext, mut pieces: Vec<Piece>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::Invalid("function model without pieces".into()))?;
        let (d, e, p) = (first.ball.dim(), first.map.dim(), first.ball.p());
        if p != ctx.p() {
            return Err(Error::ContextMismatch);
        }
        for pc in &pieces {
            if pc.ball.dim() != d || pc.map.nvars() != d || pc.map.dim() != e || pc.ball.p() != p {
                return Err(Error::Invalid("pieces disagree on dimensions".into()));
            }
        }
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                if a.ball.relation(&b.ball) != crate::balls::BallRelation::Disjoint {
                    return Err(Error::Invalid(format!("pieces {:?} and {:?} overlap", a.ball, b.ball)));
                }
            }
        }
        pieces.sort_by(|a, b| a.ball.cmp(&b.ball));
        let domain = ClopenRegion::from_balls(p, d, pieces.iter().map(|pc| pc.ball.clone()).collect());
        Ok(FunctionModel { ctx: ctx.clone(), domain, dim: d, codim: e, pieces })
    }

    /// One polynomial on every ball of `region`.
    pub fn on_region(ctx: &PadicContext, region: &ClopenRegion, map: PolyMap) -> Result<Self> {
        let pieces = region.balls().iter().map(|b| Piece { ball: b.clone(), map: map.clone() }).collect();
        Self::new(ctx, pieces)
    }

    /// A polynomial on Z_p^d.
    pub fn polynomial(ctx: &PadicContext, map: PolyMap) -> Result<Self> {
        let d = map.nvars();
        Self::on_region(ctx, &ClopenRegion::whole(ctx.p(), d), map)
    }

    pub fn ctx(&self) -> &PadicContext {
        &self.ctx
    }

    pub fn domain(&self) -> &ClopenRegion {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn degree(&self) -> u32 {
        self.pieces.iter().map(|p| p.map.degree()).max().unwrap_or(0)
    }

    pub fn piece_index(&self, x: &PadicVector) -> Result<usize> {
        for (i, pc) in self.pieces.iter().enumerate() {
            if pc.ball.contains_point(x)? {
                return Ok(i);
            }
        }
        Err(Error::OutOfDomain(x.to_string()))
    }

    pub fn eval(&self, x: &PadicVector) -> Result<PadicVector> {
        let i = self.piece_index(x)?;
        Ok(PadicVector(self.pieces[i].map.eval_scalar(x.coords(), &self.ctx)?))
    }

    /// Like [`FunctionModel::eval`], keeping coordinates that cancel completely.
    pub fn eval_approx(&self, x: &PadicVector) -> Result<Vec<Approx>> {
        let i = self.piece_index(x)?;
        self.pieces[i].map.eval_approx(x.coords(), &self.ctx)
    }

    /// Evaluation at a point with coordinates in a nilpotent extension; the
    /// piece is chosen by the standard part.
    pub fn eval_ring<R: Ring>(&self, x: &[R]) -> Result<Vec<R>> {
        let std = PadicVector(x.iter().map(|r| r.std_part()).collect());
        let i = self.piece_index(&std)?;
        let like = x.first().cloned().map_or_else(|| Err(Error::Invalid("empty point".into())), Ok)?;
        self.pieces[i].map.eval(x, &like)
    }

    fn combine(&self, o: &Self, f: impl Fn(&PolyMap, &PolyMap) -> Result<PolyMap>) -> Result<Self> {
        if self.domain != o.domain || self.codim != o.codim {
            return Err(Error::Invalid("models live on different domains".into()));
        }
        let mut pieces = Vec::new();
        for a in &self.pieces {
            for b in &o.pieces {
                let ball = if a.ball.contains_ball(&b.ball) {
                    b.ball.clone()
                } else if b.ball.contains_ball(&a.ball) {
                    a.ball.clone()
                } else {
                    continue;
                };
                pieces.push(Piece { ball, map: f(&a.map, &b.map)? });
            }
        }
        Self::new(&self.ctx, pieces)
    }

    /// Pointwise sum on the common refinement of the two partitions.
    pub fn add(&self, o: &Self) -> Result<Self> {
        self.combine(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.combine(o, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: &PadicScalar) -> Self {
        let pieces = self.pieces.iter().map(|p| Piece { ball: p.ball.clone(), map: p.map.scale(c) }).collect();
        FunctionModel { pieces, ..self.clone() }
    }

    /// Same map on a partition where every piece is split into its sub-balls of level `m`.
    pub fn refine_to(&self, m: u32) -> Result<Self> {
        let pieces = self
            .pieces
            .iter()
            .flat_map(|p| p.ball.descendants(m.max(p.ball.level())).into_iter().map(move |b| Piece { ball: b, map: p.map.clone() }))
            .collect();
        Self::new(&self.ctx, pieces)
    }
}

/// `map(c + p^k z)` as a polynomial in the local coordinate z.
pub fn local_map(map: &PolyMap, ball: &Ball, ctx: &PadicContext) -> Result<PolyMap> {
    let d = ball.dim();
    let scale = PadicScalar::p_power(ctx, ball.level() as i64);
    let subs: Vec<Poly> = (0..d)
        .map(|i| {
            let c = PadicScalar::from_i64(ctx, ball.center()[i] as i64);
            Poly::constant(d, c).add(&Poly::var(d, i, ctx).scale(&scale))
        })
        .collect::<Result<_>>()?;
    map.map(|c| c.compose(&subs, d, ctx))
}

// ---------------------------------------------------------------------------
// difference quotients

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arrangement {
    /// `f^[k]`: arguments `(a, b, t)` with `a, b` arguments of `f^[k-1]`.
    Nested,
    /// `f^{k}`: `2^k` vectors followed by `2^k - 1` scalars.
    Braced,
}

#[derive(Clone, Debug)]
struct Level {
    n: usize,
    z: Vec<usize>,
    w: Vec<usize>,
    t: usize,
}

/// Variable layouts of the levels `1..=k` of an iterated difference quotient.
#[derive(Clone, Debug)]
pub struct Tower {
    d: usize,
    levels: Vec<Level>,
}

impl Tower {
    pub fn new(d: usize, k: usize, arr: Arrangement) -> Tower {
        let mut levels = Vec::with_capacity(k);
        let mut n_prev = d;
        for j in 1..=k {
            let level = match arr {
                Arrangement::Nested => Level {
                    n: 2 * n_prev + 1,
                    z: (0..n_prev).collect(),
                    w: (n_prev..2 * n_prev).collect(),
                    t: 2 * n_prev,
                },
                Arrangement::Braced => {
                    let hx = (1 << (j - 1)) * d;
                    let hp = (1 << (j - 1)) - 1;
                    Level {
                        n: 2 * n_prev + 1,
                        z: (0..hx).chain(2 * hx..2 * hx + hp).collect(),
                        w: (hx..2 * hx).chain(2 * hx + hp..2 * hx + 2 * hp).collect(),
                        t: 2 * hx + 2 * hp,
                    }
                }
            };
            n_prev = level.n;
            levels.push(level);
        }
        Tower { d, levels }
    }

    pub fn order(&self) -> usize {
        self.levels.len()
    }

    /// Number of scalar arguments at level j.
    pub fn nvars(&self, j: usize) -> usize {
        if j == 0 {
            self.d
        } else {
            self.levels[j - 1].n
        }
    }

    fn split<R: Clone>(&self, j: usize, pt: &[R]) -> (Vec<R>, Vec<R>, R) {
        let lv = &self.levels[j - 1];
        let z = lv.z.iter().map(|&i| pt[i].clone()).collect();
        let w = lv.w.iter().map(|&i| pt[i].clone()).collect();
        (z, w, pt[lv.t].clone())
    }

    /// Points of the base domain at which level j touches `f`. A coordinate
    /// that cancels completely is represented by zero.
    pub fn base_points(&self, j: usize, pt: &[PadicScalar]) -> Result<Vec<PadicVector>> {
        let ctx = match pt.first() {
            Some(x) => x.ctx().clone(),
            None => return Ok(vec![PadicVector(vec![]); 1 << j]),
        };
        let pt: Vec<Approx> = pt.iter().cloned().map(Approx::Value).collect();
        Ok(self.base_points_approx(j, &pt)?.into_iter().map(|b| PadicVector(b.into_iter().map(|a| settle_zero(&ctx, a)).collect())).collect())
    }

    fn base_points_approx(&self, j: usize, pt: &[Approx]) -> Result<Vec<Vec<Approx>>> {
        if j == 0 {
            return Ok(vec![pt.to_vec()]);
        }
        let (z, w, t) = self.split(j, pt);
        let t = match t {
            Approx::Value(t) => t,
            Approx::ZeroMod(_) => return Err(Error::PrecisionLoss),
        };
        let moved: Vec<Approx> = z
            .iter()
            .zip(&w)
            .map(|(a, b)| {
                let bt = match b {
                    Approx::Value(b) => Approx::Value(b.mul(&t)),
                    Approx::ZeroMod(e) => match t.valuation() {
                        Val::Fin(v) => Approx::ZeroMod(e + v),
                        Val::Inf => Approx::Value(t.clone()),
                    },
                };
                a.add(&bt)
            })
            .collect();
        let mut out = self.base_points_approx(j - 1, &z)?;
        out.extend(self.base_points_approx(j - 1, &moved)?);
        Ok(out)
    }

    /// Symbolic polynomial of level j built from a single piece polynomial.
    pub fn symbolic(&self, j: usize, map: &PolyMap) -> Result<PolyMap> {
        if j == 0 {
            return Ok(map.clone());
        }
        let inner = self.symbolic(j - 1, map)?;
        let lv = &self.levels[j - 1];
        let n = inner.nvars();
        let mut rename = Vec::with_capacity(2 * n + 1);
        rename.extend_from_slice(&lv.z);
        rename.extend_from_slice(&lv.w);
        rename.push(lv.t);
        inner.map(|c| Ok(c.dq()?.remap(&rename, lv.n)))
    }
}

fn settle_zero(ctx: &PadicContext, a: Approx) -> PadicScalar {
    match a {
        Approx::Value(v) => v,
        Approx::ZeroMod(_) => PadicScalar::zero(ctx),
    }
}

/// Evaluator for `f^[k]` or `f^{k}` with per-piece memoized symbolic forms.
pub struct DqEvaluator<'a> {
    f: &'a FunctionModel,
    tower: Tower,
    cache: Mutex<HashMap<(usize, usize), Arc<PolyMap>>>,
}

impl<'a> DqEvaluator<'a> {
    pub fn new(f: &'a FunctionModel, k: usize, arr: Arrangement) -> Self {
        DqEvaluator { f, tower: Tower::new(f.dim(), k, arr), cache: Mutex::new(HashMap::new()) }
    }

    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    /// Checks that every base point lies in the domain.
    pub fn membership(&self, pt: &[PadicScalar]) -> Result<()> {
        let k = self.tower.order();
        if pt.len() != self.tower.nvars(k) {
            return Err(Error::Invalid(format!("expected {} arguments, got {}", self.tower.nvars(k), pt.len())));
        }
        for b in self.tower.base_points(k, pt)? {
            if !self.f.domain().contains_point(&b)? {
                return Err(Error::OutOfDomain(b.to_string()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, pt: &[PadicScalar]) -> Result<PadicVector> {
        self.membership(pt)?;
        Ok(PadicVector(self.eval_at(self.tower.order(), pt)?))
    }

    /// Evaluation at arguments known only up to cancellations. Off the
    /// symbolic route every argument must be a value.
    pub fn eval_approx(&self, pt: &[Approx]) -> Result<Vec<Approx>> {
        let ctx = self.f.ctx();
        let settled: Vec<PadicScalar> = pt.iter().map(|a| settle_zero(ctx, a.clone())).collect();
        self.membership(&settled)?;
        let k = self.tower.order();
        if let Some(piece) = self.common_piece(k, &settled)? {
            return self.symbolic(k, piece)?.eval_at_approx(pt, ctx);
        }
        let t = &settled[self.tower.levels[k - 1].t];
        if k == 1 && !t.is_zero() {
            let at = |b: &[Approx]| {
                let x = PadicVector(b.iter().map(|a| settle_zero(ctx, a.clone())).collect());
                self.f.pieces[self.f.piece_index(&x)?].map.eval_at_approx(b, ctx)
            };
            let pts = self.tower.base_points_approx(1, pt)?;
            let (lo, hi) = (at(&pts[0])?, at(&pts[1])?);
            return hi.iter().zip(&lo).map(|(a, b)| a.add(&b.neg()).div(t)).collect();
        }
        if pt.iter().any(|a| matches!(a, Approx::ZeroMod(_))) {
            return Err(Error::PrecisionLoss);
        }
        Ok(self.eval_at(k, &settled)?.into_iter().map(Approx::Value).collect())
    }

    fn degree_bound(&self, j: usize) -> u32 {
        let mut d = self.f.degree();
        for _ in 0..j {
            d = (2 * d).saturating_sub(1);
        }
        d
    }

    /// Piece index shared by all base points, up to equality of polynomials.
    fn common_piece(&self, j: usize, std: &[PadicScalar]) -> Result<Option<usize>> {
        let pts = self.tower.base_points(j, std)?;
        let first = self.f.piece_index(&pts[0])?;
        for b in &pts[1..] {
            let i = self.f.piece_index(b)?;
            if i != first && self.f.pieces[i].map != self.f.pieces[first].map {
                return Ok(None);
            }
        }
        Ok(Some(first))
    }

    fn symbolic(&self, j: usize, piece: usize) -> Result<Arc<PolyMap>> {
        if let Some(s) = self.cache.lock().unwrap().get(&(j, piece)) {
            return Ok(s.clone());
        }
        let s = Arc::new(self.tower.symbolic(j, &self.f.pieces[piece].map)?);
        self.cache.lock().unwrap().insert((j, piece), s.clone());
        Ok(s)
    }

    fn eval_at<R: Ring>(&self, j: usize, pt: &[R]) -> Result<Vec<R>> {
        if j == 0 {
            return self.f.eval_ring(pt);
        }
        let std: Vec<PadicScalar> = pt.iter().map(|r| r.std_part()).collect();
        if let Some(piece) = self.common_piece(j, &std)? {
            return self.symbolic(j, piece)?.eval(pt, &pt[0]);
        }
        let (z, w, t) = self.tower.split(j, pt);
        if !t.std_part().is_zero() {
            let moved: Vec<R> = z.iter().zip(&w).map(|(a, b)| a.add(&b.mul(&t)?)).collect::<Result<_>>()?;
            let hi = self.eval_at(j - 1, &moved)?;
            let lo = self.eval_at(j - 1, &z)?;
            let tinv = t.inv()?;
            return hi.iter().zip(&lo).map(|(a, b)| a.sub(b)?.mul(&tinv)).collect();
        }
        // Σ_{n≥1} t^{n-1} [δ^n] g(z + δ w)
        let m = self.degree_bound(j - 1);
        let zj: Vec<Jet> = z
            .iter()
            .zip(&w)
            .map(|(a, b)| {
                let a = a.to_jet().extend(m);
                let delta = a.last_generator();
                a.add(&b.to_jet().extend(m).mul(&delta)?)
            })
            .collect::<Result<_>>()?;
        let g = self.eval_at::<Jet>(j - 1, &zj)?;
        let tj = t.to_jet();
        g.iter()
            .map(|gi| {
                let mut acc = tj.zero_like();
                let mut tp = tj.scalar_like(&PadicScalar::one(self.f.ctx()));
                for n in 1..=m {
                    acc = acc.add(&gi.coeff_last(n).mul(&tp)?)?;
                    tp = tp.mul(&tj)?;
                }
                Ok(R::from_jet(acc))
            })
            .collect()
    }
}

/// A point `(x, y, t)` of U^[1].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DqPoint {
    pub x: PadicVector,
    pub y: PadicVector,
    pub t: PadicScalar,
}

impl DqPoint {
    pub fn flatten(&self) -> Vec<PadicScalar> {
        let mut v = self.x.0.clone();
        v.extend(self.y.0.iter().cloned());
        v.push(self.t.clone());
        v
    }
}

/// A point of U^[k]: a leaf of U, or `(a, b, t)` with `a, b` points of U^[k-1].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DqTree {
    Leaf(PadicVector),
    Node(Box<DqTree>, Box<DqTree>, PadicScalar),
}

impl DqTree {
    pub fn depth(&self) -> Option<usize> {
        match self {
            DqTree::Leaf(_) => Some(0),
            DqTree::Node(a, b, _) => {
                let (da, db) = (a.depth()?, b.depth()?);
                (da == db).then_some(da + 1)
            }
        }
    }

    pub fn flatten(&self) -> Vec<PadicScalar> {
        match self {
            DqTree::Leaf(x) => x.0.clone(),
            DqTree::Node(a, b, t) => {
                let mut v = a.flatten();
                v.extend(b.flatten());
                v.push(t.clone());
                v
            }
        }
    }
}

/// A point `(x_1..x_{2^k}, p_1..p_{2^k - 1})` of U^{k}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BracedPoint {
    pub x: Vec<PadicVector>,
    pub pvec: Vec<PadicScalar>,
    pub k: usize,
}

impl BracedPoint {
    pub fn flatten(&self) -> Vec<PadicScalar> {
        let mut v: Vec<PadicScalar> = self.x.iter().flat_map(|x| x.0.iter().cloned()).collect();
        v.extend(self.pvec.iter().cloned());
        v
    }

    fn check(&self) -> Result<()> {
        if self.x.len() != 1 << self.k || self.pvec.len() != (1 << self.k) - 1 {
            return Err(Error::Invalid(format!("braced point of order {} needs 2^k vectors and 2^k - 1 scalars", self.k)));
        }
        Ok(())
    }
}

pub fn eval(f: &FunctionModel, x: &PadicVector) -> Result<PadicVector> {
    f.eval(x)
}

pub fn dq1(f: &FunctionModel, pt: &DqPoint) -> Result<PadicVector> {
    DqEvaluator::new(f, 1, Arrangement::Nested).eval(&pt.flatten())
}

pub fn dqk(f: &FunctionModel, pt: &DqTree, k: usize) -> Result<PadicVector> {
    if pt.depth() != Some(k) {
        return Err(Error::Invalid(format!("point is not a balanced tree of depth {k}")));
    }
    DqEvaluator::new(f, k, Arrangement::Nested).eval(&pt.flatten())
}

pub fn braced_eval(f: &FunctionModel, pt: &BracedPoint) -> Result<PadicVector> {
    pt.check()?;
    DqEvaluator::new(f, pt.k, Arrangement::Braced).eval(&pt.flatten())
}

/// Position in the nested layout of each braced argument, unrolled from the
/// recursive definition `f^{k+1}(x, y, u, v, t) = (f^{k})^[1]((x, u), (y, v), t)`.
pub fn braced_to_nested(d: usize, k: usize) -> Vec<usize> {
    if k == 0 {
        return (0..d).collect();
    }
    let inner = braced_to_nested(d, k - 1);
    let n = inner.len();
    let hx = (1 << (k - 1)) * d;
    let hp = (1 << (k - 1)) - 1;
    // braced(k) = (x, y, u, v, t); nested(k) = ((x, u), (y, v), t)
    let mut out = vec![0; 2 * n + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = if i < hx {
            inner[i]
        } else if i < 2 * hx {
            n + inner[i - hx]
        } else if i < 2 * hx + hp {
            inner[hx + (i - 2 * hx)]
        } else if i < 2 * hx + 2 * hp {
            n + inner[hx + (i - 2 * hx - hp)]
        } else {
            2 * n
        };
    }
    out
}

/// `d^j f(x, v_1, ..., v_j) = (D_{v_j} ... D_{v_1} f)(x)`.
pub fn directional(f: &FunctionModel, x: &PadicVector, dirs: &[PadicVector]) -> Result<PadicVector> {
    if dirs.is_empty() {
        return Err(Error::Invalid("at least one direction required".into()));
    }
    let i = f.piece_index(x)?;
    let mut map = f.pieces[i].map.clone();
    for v in dirs {
        map = map.map(|c| c.directional(v.coords()))?;
    }
    Ok(PadicVector(map.eval_scalar(x.coords(), f.ctx())?))
}

/// `d^j f` through the iterated quotient: the point of U^[j] with base `x`,
/// direction `v_i` entering at level `i`, and every `t` zero.
pub fn directional_dq(f: &FunctionModel, x: &PadicVector, dirs: &[PadicVector]) -> Result<PadicVector> {
    directional_with(&DqEvaluator::new(f, dirs.len(), Arrangement::Nested), x, dirs)
}

/// [`directional_dq`] on an evaluator whose symbolic forms can be reused.
fn directional_with(ev: &DqEvaluator, x: &PadicVector, dirs: &[PadicVector]) -> Result<PadicVector> {
    let ctx = ev.f.ctx();
    let zero = PadicScalar::zero(ctx);
    let zeros = |depth: usize| {
        let mut t = DqTree::Leaf(PadicVector::zeros(ctx, x.dim()));
        for _ in 0..depth {
            t = DqTree::Node(Box::new(t.clone()), Box::new(t), zero.clone());
        }
        t
    };
    let lift = |v: &PadicVector, depth: usize| {
        let mut t = DqTree::Leaf(v.clone());
        for i in 0..depth {
            t = DqTree::Node(Box::new(t), Box::new(zeros(i)), zero.clone());
        }
        t
    };
    let mut pt = DqTree::Leaf(x.clone());
    for (i, v) in dirs.iter().enumerate() {
        pt = DqTree::Node(Box::new(pt), Box::new(lift(v, i)), zero.clone());
    }
    ev.eval(&pt.flatten())
}

/// `λ^[1](x, y, t) = λ(y)` for linear `λ`.
pub fn check_linear_dq(lambda: &FunctionModel, pt: &DqPoint) -> Result<IdentityReport> {
    Ok(IdentityReport::exact(dq1(lambda, pt)?, lambda.eval(&pt.y)?))
}

/// `β^[1]((x1,x2),(y1,y2),t) = β(x1,y2) + β(y1,x2) + t β(y1,y2)` for `β`
/// bilinear in the first `d1` and remaining coordinates.
pub fn check_bilinear_dq(beta: &FunctionModel, d1: usize, pt: &DqPoint) -> Result<IdentityReport> {
    let split = |v: &PadicVector| (PadicVector(v.0[..d1].to_vec()), PadicVector(v.0[d1..].to_vec()));
    let join = |a: &PadicVector, b: &PadicVector| PadicVector(a.0.iter().chain(&b.0).cloned().collect());
    let ((x1, x2), (y1, y2)) = (split(&pt.x), split(&pt.y));
    let rhs = beta.eval(&join(&x1, &y2))?.add(&beta.eval(&join(&y1, &x2))?)?.axpy(&pt.t, &beta.eval(&join(&y1, &y2))?)?;
    Ok(IdentityReport::exact(dq1(beta, pt)?, rhs))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Laws of `d^j f` at `x`: agreement of the quotient and symbolic routes,
/// symmetry under every reordering of `dirs`, and linearity in the first
/// slot (`a v_1 + b w`).
pub fn check_directional_laws(
    f: &FunctionModel,
    x: &PadicVector,
    dirs: &[PadicVector],
    w: &PadicVector,
    a: &PadicScalar,
    b: &PadicScalar,
) -> Result<Vec<IdentityReport>> {
    let ev = DqEvaluator::new(f, dirs.len(), Arrangement::Nested);
    let base = directional_with(&ev, x, dirs)?;
    let mut out = vec![IdentityReport::exact(directional(f, x, dirs)?, base.clone())];
    for perm in permutations(dirs.len()).into_iter().skip(1) {
        let shuffled: Vec<PadicVector> = perm.iter().map(|&i| dirs[i].clone()).collect();
        out.push(IdentityReport::exact(directional_with(&ev, x, &shuffled)?, base.clone()));
    }
    let mut mixed = dirs.to_vec();
    mixed[0] = dirs[0].scale(a).axpy(b, w)?;
    let mut other = dirs.to_vec();
    other[0] = w.clone();
    let rhs = base.scale(a).axpy(b, &directional_with(&ev, x, &other)?)?;
    out.push(IdentityReport::exact(directional_with(&ev, x, &mixed)?, rhs));
    Ok(out)
}

// ---------------------------------------------------------------------------
// composition

pub type Certificate = BTreeMap<Ball, Ball>;

/// Decides whether `map(from) ⊆ into`.
pub fn maps_into(map: &PolyMap, from: &Ball, into: &Ball, ctx: &PadicContext, max_level: u32) -> Result<Verdict> {
    let local = local_map(map, from, ctx)?;
    let c = into.center_vector(ctx);
    let shifted = PolyMap::new(
        local.nvars(),
        local
            .comps()
            .iter()
            .zip(c.coords())
            .map(|(q, ci)| q.sub(&Poly::constant(local.nvars(), ci.clone())))
            .collect::<Result<_>>()?,
    );
    Ok(values_have_valuation(&shifted, into.level() as i64, max_level, ctx.p()))
}

/// `g ∘ f` on the partition of `f`, given for every piece of `f` the piece of `g` receiving it.
pub fn compose(g: &FunctionModel, f: &FunctionModel, cert: &Certificate) -> Result<FunctionModel> {
    if f.codim() != g.dim() {
        return Err(Error::Invalid("inner codomain and outer domain dimensions differ".into()));
    }
    let mut pieces = Vec::new();
    for pc in f.pieces() {
        let target = cert.get(&pc.ball).ok_or_else(|| Error::CertificateInvalid(format!("{:?} has no assignment", pc.ball)))?;
        let gp = g
            .pieces()
            .iter()
            .find(|q| &q.ball == target)
            .ok_or_else(|| Error::CertificateInvalid(format!("{target:?} is not a piece of the outer map")))?;
        let verdict = maps_into(&pc.map, &pc.ball, target, f.ctx(), COMPOSE_LEVEL)?;
        if !verdict.holds() {
            return Err(Error::CertificateInvalid(format!("{:?} -> {target:?}: {verdict:?}", pc.ball)));
        }
        pieces.push(Piece { ball: pc.ball.clone(), map: gp.map.compose(&pc.map, f.ctx())? });
    }
    FunctionModel::new(f.ctx(), pieces)
}

/// Refines `f` until every piece maps into a single piece of `g`; returns the
/// refined model and the certificate.
pub fn find_certificate(g: &FunctionModel, f: &FunctionModel) -> Result<(FunctionModel, Certificate)> {
    let cap = g.domain().max_level().max(f.domain().max_level()) + 4;
    let mut cert = Certificate::new();
    let mut pieces = Vec::new();
    for pc in f.pieces() {
        let mut queue = vec![pc.ball.clone()];
        while let Some(b) = queue.pop() {
            let image = PadicVector(pc.map.eval_scalar(b.center_vector(f.ctx()).coords(), f.ctx())?);
            let target = match g.piece_index(&image) {
                Ok(i) => g.pieces()[i].ball.clone(),
                Err(_) => {
                    return Err(Error::CompositionUncertified(format!("image {image} of {b:?} leaves the outer domain")));
                }
            };
            let verdict = maps_into(&pc.map, &b, &target, f.ctx(), COMPOSE_LEVEL)?;
            if verdict.holds() {
                cert.insert(b.clone(), target);
                pieces.push(Piece { ball: b, map: pc.map.clone() });
            } else if b.level() < cap {
                queue.extend(b.children());
            } else {
                return Err(Error::CompositionUncertified(format!("{b:?}: {verdict:?}")));
            }
        }
    }
    Ok((FunctionModel::new(f.ctx(), pieces)?, cert))
}

pub fn compose_auto(g: &FunctionModel, f: &FunctionModel) -> Result<FunctionModel> {
    let (refined, cert) = find_certificate(g, f)?;
    compose(g, &refined, &cert)
}

// ---------------------------------------------------------------------------
// identity checks

/// Outcome of comparing two sides of an identity at the available precision.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub lhs: Vec<Approx>,
    pub rhs: Vec<Approx>,
    pub equal: bool,
}

impl IdentityReport {
    pub fn new(lhs: Vec<Approx>, rhs: PadicVector) -> Self {
        Self::approx(lhs, rhs.0.into_iter().map(Approx::Value).collect())
    }

    pub fn exact(lhs: PadicVector, rhs: PadicVector) -> Self {
        Self::new(lhs.0.into_iter().map(Approx::Value).collect(), rhs)
    }

    /// Both sides may contain cancellations known only modulo a power of p.
    pub fn approx(lhs: Vec<Approx>, rhs: Vec<Approx>) -> Self {
        let equal = lhs.len() == rhs.len() && lhs.iter().zip(&rhs).all(|(a, b)| a.agrees_approx(b));
        IdentityReport { lhs, rhs, equal }
    }

    /// Smallest absolute precision at which the sides were compared.
    pub fn compared_to(&self) -> Val {
        self.lhs.iter().chain(&self.rhs).map(|a| a.abs_prec()).min().unwrap_or(Val::Inf)
    }
}

fn quotient(hi: &PadicVector, lo: &PadicVector, t: &PadicScalar) -> Result<Vec<Approx>> {
    hi.diff(lo).iter().map(|a| a.div(t)).collect()
}

/// `(g∘f)^[1](x,y,t) = g^[1](f(x), f^[1](x,y,t), t)`.
pub fn check_chain_rule(f: &FunctionModel, g: &FunctionModel, pt: &DqPoint) -> Result<IdentityReport> {
    let gf = compose_auto(g, f)?;
    let at = |h: &FunctionModel, pt: &[Approx]| DqEvaluator::new(h, 1, Arrangement::Nested).eval_approx(pt);
    let values = |v: &[PadicScalar]| v.iter().cloned().map(Approx::Value).collect::<Vec<_>>();
    let lhs = at(&gf, &values(&pt.flatten()))?;
    let mut inner = f.eval_approx(&pt.x)?;
    inner.extend(at(f, &values(&pt.flatten()))?);
    inner.push(Approx::Value(pt.t.clone()));
    Ok(IdentityReport::approx(lhs, at(g, &inner)?))
}

/// Exponents `(i, j, ℓ)` with `f^{k}(x, t p) = t^{-ℓ} f^{k}(t^{i} x, t^{-j} p)`.
pub fn scaling_exponents(k: usize) -> (Vec<i64>, Vec<i64>, i64) {
    assert!(k >= 1);
    let (mut i, mut j, mut l) = (vec![0, 1], vec![0], 1);
    for _ in 1..k {
        let mut ni: Vec<i64> = i.iter().map(|a| 2 * a).collect();
        ni.extend(i.iter().map(|a| 2 * a + 1));
        let mut nj: Vec<i64> = j.iter().map(|b| 2 * b + 1).collect();
        nj.extend(j.iter().map(|b| 2 * b));
        nj.push(0);
        i = ni;
        j = nj;
        l = 2 * l + 1;
    }
    (i, j, l)
}

fn t_pow(t: &PadicScalar, e: i64) -> Result<PadicScalar> {
    if e >= 0 {
        Ok(t.pow(e as u32))
    } else {
        t.pow((-e) as u32).inv()
    }
}

/// Verifies the scaling law of `f^{k}` at `(x, t·pvec)`.
pub fn check_scaling(f: &FunctionModel, k: usize, x: &[PadicVector], pvec: &[PadicScalar], t: &PadicScalar) -> Result<IdentityReport> {
    if t.is_zero() {
        return Err(Error::Invalid("scaling parameter must be nonzero".into()));
    }
    let (ie, je, l) = scaling_exponents(k);
    let lhs_pt = BracedPoint { x: x.to_vec(), pvec: pvec.iter().map(|p| p.mul(t)).collect(), k };
    let rhs_pt = BracedPoint {
        x: x.iter().zip(&ie).map(|(v, &e)| Ok(v.scale(&t_pow(t, e)?))).collect::<Result<_>>()?,
        pvec: pvec.iter().zip(&je).map(|(p, &e)| Ok(p.mul(&t_pow(t, -e)?))).collect::<Result<_>>()?,
        k,
    };
    lhs_pt.check()?;
    let ev = DqEvaluator::new(f, k, Arrangement::Braced);
    let member = |pt: &BracedPoint| ev.membership(&pt.flatten()).map_err(|e| Error::MembershipFailure(e.to_string()));
    member(&lhs_pt)?;
    member(&rhs_pt)?;
    let lhs = ev.eval(&lhs_pt.flatten())?;
    let rhs = ev.eval(&rhs_pt.flatten())?.scale(&t_pow(t, -l)?);
    Ok(IdentityReport::exact(lhs, rhs))
}

/// `(ε(γ + tη, x + ty) - ε(γ, x)) / t = γ^[1](x, y, t) + η(x + ty)`.
pub fn check_eval_derivative(gamma: &FunctionModel, eta: &FunctionModel, x: &PadicVector, y: &PadicVector, t: &PadicScalar) -> Result<IdentityReport> {
    if t.is_zero() {
        return Err(Error::Invalid("t must be nonzero".into()));
    }
    let moved = x.axpy(t, y)?;
    let perturbed = gamma.add(&eta.scale(t))?;
    let lhs = quotient(&perturbed.eval(&moved)?, &gamma.eval(x)?, t)?;
    let rhs = dq1(gamma, &DqPoint { x: x.clone(), y: y.clone(), t: t.clone() })?.add(&eta.eval(&moved)?)?;
    Ok(IdentityReport::new(lhs, rhs))
}

/// Result of the composition-derivative check at one sample point.
#[derive(Clone, Debug)]
pub struct CompositionDerivativeReport {
    /// Quotient of compositions against `γ^[1](η, η1, t) + γ1(η + t η1)`.
    pub at_t: IdentityReport,
    /// `γ^[1](η, η1, 0) + γ1(η)` against `dγ(η, η1) + γ1(η)`.
    pub at_zero: IdentityReport,
    /// Valuation of the quotient minus its `t = 0` limit.
    pub distance_to_limit: Val,
}

impl CompositionDerivativeReport {
    pub fn equal(&self) -> bool {
        self.at_t.equal && self.at_zero.equal
    }
}

pub fn check_composition_derivative(
    gamma: &FunctionModel,
    eta: &FunctionModel,
    gamma1: &FunctionModel,
    eta1: &FunctionModel,
    t: &PadicScalar,
    x: &PadicVector,
) -> Result<CompositionDerivativeReport> {
    if t.is_zero() {
        return Err(Error::Invalid("t must be nonzero".into()));
    }
    let ctx = gamma.ctx();
    let base = compose_auto(gamma, eta)?;
    let moved = compose_auto(&gamma.add(&gamma1.scale(t))?, &eta.add(&eta1.scale(t))?)?;
    let lhs = quotient(&moved.eval(x)?, &base.eval(x)?, t)?;
    let (ex, e1x) = (eta.eval(x)?, eta1.eval(x)?);
    let rhs = dq1(gamma, &DqPoint { x: ex.clone(), y: e1x.clone(), t: t.clone() })?.add(&gamma1.eval(&ex.axpy(t, &e1x)?)?)?;
    let zero = PadicScalar::zero(ctx);
    let limit = dq1(gamma, &DqPoint { x: ex.clone(), y: e1x.clone(), t: zero })?.add(&gamma1.eval(&ex)?)?;
    let formal = directional(gamma, &ex, &[e1x])?.add(&gamma1.eval(&ex)?)?;
    let distance = lhs
        .iter()
        .zip(limit.coords())
        .map(|(a, b)| match a {
            Approx::Value(a) => a.diff_valuation(b),
            Approx::ZeroMod(m) => b.valuation().min(Val::Fin(*m)),
        })
        .min()
        .unwrap_or(Val::Inf);
    Ok(CompositionDerivativeReport {
        at_t: IdentityReport::new(lhs, rhs),
        at_zero: IdentityReport::exact(limit, formal),
        distance_to_limit: distance,
    })
}

/// `f^∨(x) = f(x, ·)` for `f` on a product domain `U × V` with `U ⊆ Z_p^{d1}`.
pub fn curry(f: &FunctionModel, d1: usize, x: &PadicVector) -> Result<FunctionModel> {
    let d = f.dim();
    if d1 == 0 || d1 >= d || x.dim() != d1 {
        return Err(Error::Invalid("split dimension must leave both factors nonempty".into()));
    }
    let u = f.domain().project(0..d1);
    let v = f.domain().project(d1..d);
    if u.product(&v) != *f.domain() {
        return Err(Error::NotProductPartition);
    }
    if !u.contains_point(x)? {
        return Err(Error::OutOfDomain(x.to_string()));
    }
    let p = f.ctx().p();
    let mut pieces = Vec::new();
    for pc in f.pieces() {
        let k = pc.ball.level();
        let head = Ball::new(p, &pc.ball.center()[..d1], k);
        if head.contains_point(x)? {
            let tail = Ball::new(p, &pc.ball.center()[d1..], k);
            let map = pc.map.map(|c| c.substitute_prefix(x.coords()))?;
            pieces.push(Piece { ball: tail, map });
        }
    }
    FunctionModel::new(f.ctx(), pieces)
}
