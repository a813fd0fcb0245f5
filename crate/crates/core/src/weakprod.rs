//! Weak direct products over finite index sets, their regrouping and
//! relabeling isomorphisms, direct sums of maps, and diffeomorphism groups of
//! finite disjoint unions of balls.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::balls::{Ball, ClopenRegion};
use crate::calculus::{curry, FunctionModel, Piece};
use crate::diffeo::{region_level_map, BallEndo, CertifiedDiffeo, DEFAULT_LEVEL};
use crate::error::{Error, Result};
use crate::padic::{PadicContext, PadicScalar, PadicVector};
use crate::poly::{Poly, PolyMap};

pub trait GroupElem: Clone + fmt::Debug {
    fn mul(&self, o: &Self) -> Result<Self>;
    fn inv(&self) -> Result<Self>;
    fn is_identity(&self) -> bool;
}

/// A permutation `i ↦ self.0[i]`; products compose as maps, `(a·b)(i) = a(b(i))`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Perm(pub Vec<usize>);

impl GroupElem for Perm {
    fn mul(&self, o: &Self) -> Result<Self> {
        if self.0.len() != o.0.len() {
            return Err(Error::Invalid("permutations of different sizes".into()));
        }
        Ok(Perm(crate::diffeo::perm_compose(&self.0, &o.0)))
    }

    fn inv(&self) -> Result<Self> {
        Ok(Perm(crate::diffeo::perm_inverse(&self.0)))
    }

    fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }
}

/// Composite `f_1^{±1} ∘ ... ∘ f_n^{±1}` of certified diffeomorphisms of one ball.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffeoWord {
    ball: Ball,
    /// Applied right to left; `true` marks an inverse factor.
    factors: Vec<(CertifiedDiffeo, bool)>,
}

impl DiffeoWord {
    pub fn identity(ball: Ball) -> Self {
        DiffeoWord { ball, factors: Vec::new() }
    }

    pub fn single(g: CertifiedDiffeo) -> Self {
        Self::from_factors(g.ball().clone(), vec![(g, false)])
    }

    pub fn from_factors(ball: Ball, factors: Vec<(CertifiedDiffeo, bool)>) -> Self {
        let mut w = DiffeoWord { ball, factors: Vec::new() };
        for f in factors {
            w.push(f);
        }
        w
    }

    fn push(&mut self, f: (CertifiedDiffeo, bool)) {
        if f.0.is_identity() {
            return;
        }
        if let Some(last) = self.factors.last() {
            if last.1 != f.1 && last.0 == f.0 {
                self.factors.pop();
                return;
            }
        }
        self.factors.push(f);
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn factors(&self) -> &[(CertifiedDiffeo, bool)] {
        &self.factors
    }

    /// Value at `x`, inverse factors solved to absolute precision `target_v`.
    pub fn eval(&self, x: &PadicVector, target_v: i64) -> Result<PadicVector> {
        let mut y = x.clone();
        for (g, inverse) in self.factors.iter().rev() {
            y = if *inverse { g.inverse_at(&y, target_v)? } else { g.gamma_mod(&y, target_v)? };
        }
        Ok(y)
    }

    /// Permutation of the level-m residues of the ball.
    pub fn level_map(&self, ctx: &PadicContext, m: u32) -> Result<Vec<usize>> {
        region_level_map(&ClopenRegion::ball(self.ball.clone()), m, ctx, |x| self.eval(x, m as i64))
    }

    /// `ψ ∘ w ∘ ψ^{-1}` on the target ball of ψ.
    pub fn conjugate(&self, psi: &AffineBallMap) -> Result<Self> {
        if psi.from != self.ball {
            return Err(Error::Invalid(format!("affine map starts at {} but word lives on {}", psi.from, self.ball)));
        }
        let factors = self.factors.iter().map(|(g, inv)| Ok((psi.conjugate_diffeo(g)?, *inv))).collect::<Result<_>>()?;
        Ok(DiffeoWord { ball: psi.to.clone(), factors })
    }
}

impl GroupElem for DiffeoWord {
    fn mul(&self, o: &Self) -> Result<Self> {
        if self.ball != o.ball {
            return Err(Error::Invalid("words on different balls".into()));
        }
        let mut w = self.clone();
        for f in &o.factors {
            w.push(f.clone());
        }
        Ok(w)
    }

    fn inv(&self) -> Result<Self> {
        let factors = self.factors.iter().rev().map(|(g, i)| (g.clone(), !i)).collect();
        Ok(DiffeoWord { ball: self.ball.clone(), factors })
    }

    fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Element of `∏*_{i ∈ I} G_i`; entries absent from `entries` are identities.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakProduct<I: Ord + Clone + fmt::Debug, G: GroupElem> {
    index: BTreeSet<I>,
    entries: BTreeMap<I, G>,
}

impl<I: Ord + Clone + fmt::Debug, G: GroupElem> WeakProduct<I, G> {
    pub fn identity(index: BTreeSet<I>) -> Self {
        WeakProduct { index, entries: BTreeMap::new() }
    }

    pub fn new(index: BTreeSet<I>, entries: BTreeMap<I, G>) -> Result<Self> {
        if let Some(i) = entries.keys().find(|i| !index.contains(i)) {
            return Err(Error::MalformedIndex(format!("{i:?} is not in the index set")));
        }
        let entries = entries.into_iter().filter(|(_, g)| !g.is_identity()).collect();
        Ok(WeakProduct { index, entries })
    }

    pub fn index(&self) -> &BTreeSet<I> {
        &self.index
    }

    pub fn entries(&self) -> &BTreeMap<I, G> {
        &self.entries
    }

    pub fn support(&self) -> BTreeSet<I> {
        self.entries.keys().cloned().collect()
    }

    pub fn get(&self, i: &I) -> Option<&G> {
        self.entries.get(i)
    }
}

impl<I: Ord + Clone + fmt::Debug, G: GroupElem> GroupElem for WeakProduct<I, G> {
    fn mul(&self, o: &Self) -> Result<Self> {
        if self.index != o.index {
            return Err(Error::MalformedIndex("factors have different index sets".into()));
        }
        let mut entries = self.entries.clone();
        for (i, g) in &o.entries {
            let e = match entries.remove(i) {
                Some(a) => a.mul(g)?,
                None => g.clone(),
            };
            if !e.is_identity() {
                entries.insert(i.clone(), e);
            }
        }
        Ok(WeakProduct { index: self.index.clone(), entries })
    }

    fn inv(&self) -> Result<Self> {
        let entries = self.entries.iter().map(|(i, g)| Ok((i.clone(), g.inv()?))).collect::<Result<_>>()?;
        Ok(WeakProduct { index: self.index.clone(), entries })
    }

    fn is_identity(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Weak product of ball diffeomorphisms indexed by disjoint balls.
pub type WeakProductElement = WeakProduct<Ball, DiffeoWord>;

pub fn wp_mul<I: Ord + Clone + fmt::Debug, G: GroupElem>(a: &WeakProduct<I, G>, b: &WeakProduct<I, G>) -> Result<WeakProduct<I, G>> {
    a.mul(b)
}

pub fn wp_inv<I: Ord + Clone + fmt::Debug, G: GroupElem>(a: &WeakProduct<I, G>) -> Result<WeakProduct<I, G>> {
    a.inv()
}

/// Builds an element from certified diffeomorphisms on some of the index balls.
pub fn wp_from_diffeos(index: BTreeSet<Ball>, diffeos: Vec<CertifiedDiffeo>) -> Result<WeakProductElement> {
    let entries = diffeos.into_iter().map(|g| (g.ball().clone(), DiffeoWord::single(g))).collect();
    WeakProduct::new(index, entries)
}

/// Union of the index balls.
pub fn index_region(index: &BTreeSet<Ball>) -> Result<ClopenRegion> {
    let first = index.iter().next().ok_or_else(|| Error::MalformedIndex("empty index set".into()))?;
    let balls: Vec<Ball> = index.iter().cloned().collect();
    for (i, a) in balls.iter().enumerate() {
        if balls[i + 1..].iter().any(|b| a.relation(b) != crate::balls::BallRelation::Disjoint) {
            return Err(Error::MalformedIndex(format!("index ball {a} overlaps another")));
        }
    }
    Ok(ClopenRegion::from_balls(first.p(), first.dim(), balls))
}

impl WeakProductElement {
    /// Value at a point of the union of the index balls.
    pub fn eval(&self, x: &PadicVector, target_v: i64) -> Result<PadicVector> {
        for (b, w) in &self.entries {
            if b.contains_point(x)? {
                return w.eval(x, target_v);
            }
        }
        Ok(x.clone())
    }

    /// Permutation of the level-m residues of the union of the index balls.
    pub fn level_map(&self, ctx: &PadicContext, m: u32) -> Result<Vec<usize>> {
        let region = index_region(&self.index)?;
        region_level_map(&region, m, ctx, |x| self.eval(x, m as i64))
    }
}

/// `x ∈ ∏*_{(i,j) ∈ K} G` to `(x_{i,·})_i` for `K = ⊔_i {i} × J_i`.
pub fn regroup<I, J, G>(x: &WeakProduct<(I, J), G>, fibers: &BTreeMap<I, BTreeSet<J>>) -> Result<WeakProduct<I, WeakProduct<J, G>>>
where
    I: Ord + Clone + fmt::Debug,
    J: Ord + Clone + fmt::Debug,
    G: GroupElem,
{
    let k: BTreeSet<(I, J)> = fibers.iter().flat_map(|(i, js)| js.iter().map(move |j| (i.clone(), j.clone()))).collect();
    if k != x.index {
        return Err(Error::MalformedIndex("fibers do not partition the index set".into()));
    }
    let mut grouped: BTreeMap<I, BTreeMap<J, G>> = BTreeMap::new();
    for ((i, j), g) in &x.entries {
        grouped.entry(i.clone()).or_default().insert(j.clone(), g.clone());
    }
    let entries = grouped
        .into_iter()
        .map(|(i, e)| Ok((i.clone(), WeakProduct::new(fibers[&i].clone(), e)?)))
        .collect::<Result<_>>()?;
    WeakProduct::new(fibers.keys().cloned().collect(), entries)
}

/// Inverse of [`regroup`].
pub fn flatten<I, J, G>(x: &WeakProduct<I, WeakProduct<J, G>>, fibers: &BTreeMap<I, BTreeSet<J>>) -> Result<WeakProduct<(I, J), G>>
where
    I: Ord + Clone + fmt::Debug,
    J: Ord + Clone + fmt::Debug,
    G: GroupElem,
{
    let keys: BTreeSet<I> = fibers.keys().cloned().collect();
    if keys != x.index {
        return Err(Error::MalformedIndex("fibers do not match the index set".into()));
    }
    let mut entries = BTreeMap::new();
    for (i, inner) in &x.entries {
        if inner.index != fibers[i] {
            return Err(Error::MalformedIndex(format!("entry {i:?} has the wrong fiber")));
        }
        for (j, g) in &inner.entries {
            entries.insert((i.clone(), j.clone()), g.clone());
        }
    }
    let k = fibers.iter().flat_map(|(i, js)| js.iter().map(move |j| (i.clone(), j.clone()))).collect();
    WeakProduct::new(k, entries)
}

/// `(x_i)_{i ∈ I} ↦ (β_j(x_{π(j)}))_{j ∈ J}` for a bijection `π: J → I`.
pub fn relabel<I, J, G, H>(x: &WeakProduct<I, G>, pi: &BTreeMap<J, I>, beta: impl Fn(&J, &G) -> Result<H>) -> Result<WeakProduct<J, H>>
where
    I: Ord + Clone + fmt::Debug,
    J: Ord + Clone + fmt::Debug,
    G: GroupElem,
    H: GroupElem,
{
    let image: BTreeSet<I> = pi.values().cloned().collect();
    if image.len() != pi.len() || image != x.index {
        return Err(Error::NotBijective);
    }
    let mut entries = BTreeMap::new();
    for (j, i) in pi {
        if let Some(g) = x.entries.get(i) {
            entries.insert(j.clone(), beta(j, g)?);
        }
    }
    WeakProduct::new(pi.keys().cloned().collect(), entries)
}

/// The bijection `π^{-1}` of a relabeling map.
pub fn invert_relabeling<I: Ord + Clone, J: Ord + Clone>(pi: &BTreeMap<J, I>) -> BTreeMap<I, J> {
    pi.iter().map(|(j, i)| (i.clone(), j.clone())).collect()
}

// ---------------------------------------------------------------------------
// affine identifications of balls

/// `x ↦ c_to + λ (x - c_from)` from one ball onto another of the same level, λ a unit.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineBallMap {
    pub from: Ball,
    pub to: Ball,
    pub lambda: PadicScalar,
}

impl AffineBallMap {
    pub fn new(from: Ball, to: Ball, lambda: PadicScalar) -> Result<Self> {
        if from.level() != to.level() || from.dim() != to.dim() || from.p() != to.p() {
            return Err(Error::Invalid(format!("{from} and {to} are not balls of the same size")));
        }
        if lambda.valuation() != crate::padic::Val::Fin(0) {
            return Err(Error::NotAUnit);
        }
        Ok(AffineBallMap { from, to, lambda })
    }

    pub fn translation(from: Ball, to: Ball, ctx: &PadicContext) -> Result<Self> {
        Self::new(from, to, PadicScalar::one(ctx))
    }

    pub fn identity(b: Ball, ctx: &PadicContext) -> Self {
        AffineBallMap { from: b.clone(), to: b, lambda: PadicScalar::one(ctx) }
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(AffineBallMap { from: self.to.clone(), to: self.from.clone(), lambda: self.lambda.inv()? })
    }

    pub fn apply(&self, x: &PadicVector) -> Result<PadicVector> {
        let ctx = self.lambda.ctx();
        self.to.center_vector(ctx).axpy(&self.lambda, &x.sub(&self.from.center_vector(ctx))?)
    }

    /// Image of a ball inside `from`.
    pub fn image_ball(&self, b: &Ball) -> Result<Ball> {
        let ctx = self.lambda.ctx();
        Ball::from_vector(&self.apply(&b.center_vector(ctx))?, b.level(), b.p())
    }

    /// The polynomial map `ψ^{-1}` in global coordinates.
    fn inverse_poly(&self) -> Result<PolyMap> {
        let ctx = self.lambda.ctx();
        let d = self.from.dim();
        let li = self.lambda.inv()?;
        let cf = self.from.center_vector(ctx);
        let ct = self.to.center_vector(ctx);
        let comps = (0..d)
            .map(|i| {
                let shift = cf.coords()[i].sub(&li.mul(&ct.coords()[i]))?;
                Poly::constant(d, shift).add(&Poly::var(d, i, ctx).scale(&li))
            })
            .collect::<Result<_>>()?;
        Ok(PolyMap::new(d, comps))
    }

    /// `Θ_ψ(g) = ψ ∘ g ∘ ψ^{-1}`, displacement `y ↦ λ σ(ψ^{-1}(y))`.
    pub fn conjugate_diffeo(&self, g: &CertifiedDiffeo) -> Result<CertifiedDiffeo> {
        if g.ball() != &self.from {
            return Err(Error::Invalid(format!("diffeomorphism lives on {} not {}", g.ball(), self.from)));
        }
        let ctx = self.lambda.ctx();
        let back = self.inverse_poly()?;
        let pieces = g
            .endo()
            .sigma()
            .pieces()
            .iter()
            .map(|pc| Ok(Piece { ball: self.image_ball(&pc.ball)?, map: pc.map.compose(&back, ctx)?.scale(&self.lambda) }))
            .collect::<Result<_>>()?;
        let sigma = FunctionModel::new(ctx, pieces)?;
        CertifiedDiffeo::new(BallEndo::new(self.to.clone(), sigma)?, DEFAULT_LEVEL)
    }
}

/// Relabeling of a weak product of ball diffeomorphisms with `β_j = Θ_{ψ_j}`,
/// `ψ_j` mapping the ball `π(j)` onto `j`.
pub fn relabel_diffeos(x: &WeakProductElement, psis: &BTreeMap<Ball, AffineBallMap>) -> Result<WeakProductElement> {
    let pi: BTreeMap<Ball, Ball> = psis.iter().map(|(j, psi)| (j.clone(), psi.from.clone())).collect();
    if psis.iter().any(|(j, psi)| &psi.to != j) {
        return Err(Error::NotBijective);
    }
    relabel(x, &pi, |j, w| w.conjugate(&psis[j]))
}

// ---------------------------------------------------------------------------
// direct sums of maps

/// `(x_i)_i ↦ (f_i(x_i, p))_i` on finitely supported tuples. Every `f_i` with
/// `i` outside `exceptional` must vanish at `x_i = 0`.
pub fn oplus_apply<I: Ord + Clone + fmt::Debug>(
    fs: &BTreeMap<I, FunctionModel>,
    x: &BTreeMap<I, PadicVector>,
    exceptional: &BTreeSet<I>,
    param: Option<&PadicVector>,
) -> Result<BTreeMap<I, PadicVector>> {
    for (i, f) in fs {
        if !exceptional.contains(i) && !vanishes_at_zero(f, param.map(|p| p.dim()))? {
            return Err(Error::ZeroConditionViolated(format!("{i:?}")));
        }
    }
    if let Some(i) = x.keys().chain(exceptional.iter()).find(|i| !fs.contains_key(i)) {
        return Err(Error::MalformedIndex(format!("{i:?} has no map")));
    }
    let mut out = BTreeMap::new();
    let active: BTreeSet<&I> = x.keys().chain(exceptional.iter()).collect();
    for i in active {
        let f = &fs[i];
        let ctx = f.ctx();
        let xd = f.dim() - param.map_or(0, |p| p.dim());
        let xi = x.get(i).cloned().unwrap_or_else(|| PadicVector::zeros(ctx, xd));
        let arg = match param {
            Some(p) => PadicVector(xi.coords().iter().chain(p.coords()).cloned().collect()),
            None => xi,
        };
        let y = f.eval(&arg)?;
        if y.coords().iter().any(|c| !c.is_zero()) {
            out.insert(i.clone(), y);
        }
    }
    Ok(out)
}

/// `f(0) = 0`, or with a parameter of dimension `k`, `f(0, ·) = 0` identically.
fn vanishes_at_zero(f: &FunctionModel, param_dim: Option<usize>) -> Result<bool> {
    let ctx = f.ctx();
    match param_dim {
        None => Ok(f.eval(&PadicVector::zeros(ctx, f.dim()))?.coords().iter().all(|c| c.is_zero())),
        Some(k) => {
            let d1 = f.dim() - k;
            let slice = curry(f, d1, &PadicVector::zeros(ctx, d1))?;
            Ok(slice.pieces().iter().all(|pc| pc.map.is_zero()))
        }
    }
}

// ---------------------------------------------------------------------------
// global diffeomorphisms of finite unions of balls

/// `γ|_{C} = ψ ∘ w` with `w` a diffeomorphism word of `C` and `ψ: C → D` affine.
#[derive(Clone, Debug)]
pub struct GlobalPiece {
    pub inner: DiffeoWord,
    pub psi: AffineBallMap,
}

impl GlobalPiece {
    pub fn source(&self) -> &Ball {
        &self.psi.from
    }

    pub fn target(&self) -> &Ball {
        &self.psi.to
    }
}

/// A diffeomorphism of a finite disjoint union of balls that permutes the
/// pieces of a partition by affine identifications.
#[derive(Clone, Debug)]
pub struct GlobalDiffeo {
    region: ClopenRegion,
    pieces: Vec<GlobalPiece>,
}

impl GlobalDiffeo {
    pub fn new(pieces: Vec<GlobalPiece>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::Invalid("global diffeomorphism without pieces".into()))?;
        let (p, d) = (first.source().p(), first.source().dim());
        for pc in &pieces {
            if pc.inner.ball() != pc.source() {
                return Err(Error::Invalid(format!("inner word on {} but piece starts at {}", pc.inner.ball(), pc.source())));
            }
        }
        let src: Vec<Ball> = pieces.iter().map(|pc| pc.source().clone()).collect();
        let dst: Vec<Ball> = pieces.iter().map(|pc| pc.target().clone()).collect();
        for set in [&src, &dst] {
            for (i, a) in set.iter().enumerate() {
                if set[i + 1..].iter().any(|b| a.relation(b) != crate::balls::BallRelation::Disjoint) {
                    return Err(Error::Invalid(format!("{a} overlaps another piece")));
                }
            }
        }
        let region = ClopenRegion::from_balls(p, d, src);
        if region != ClopenRegion::from_balls(p, d, dst) {
            return Err(Error::NotBijective);
        }
        Ok(GlobalDiffeo { region, pieces })
    }

    pub fn identity(ctx: &PadicContext, balls: &[Ball]) -> Result<Self> {
        Self::new(
            balls
                .iter()
                .map(|b| GlobalPiece { inner: DiffeoWord::identity(b.clone()), psi: AffineBallMap::identity(b.clone(), ctx) })
                .collect(),
        )
    }

    pub fn region(&self) -> &ClopenRegion {
        &self.region
    }

    pub fn pieces(&self) -> &[GlobalPiece] {
        &self.pieces
    }

    pub fn sources(&self) -> BTreeSet<Ball> {
        self.pieces.iter().map(|pc| pc.source().clone()).collect()
    }

    pub fn eval(&self, x: &PadicVector, target_v: i64) -> Result<PadicVector> {
        for pc in &self.pieces {
            if pc.source().contains_point(x)? {
                return pc.psi.apply(&pc.inner.eval(x, target_v)?);
            }
        }
        Err(Error::OutOfDomain(x.to_string()))
    }

    pub fn eval_inverse(&self, y: &PadicVector, target_v: i64) -> Result<PadicVector> {
        for pc in &self.pieces {
            if pc.target().contains_point(y)? {
                return pc.inner.inv()?.eval(&pc.psi.inverse()?.apply(y)?, target_v);
            }
        }
        Err(Error::OutOfDomain(y.to_string()))
    }

    pub fn level_map(&self, ctx: &PadicContext, m: u32) -> Result<Vec<usize>> {
        region_level_map(&self.region, m, ctx, |x| self.eval(x, m as i64))
    }
}

/// `I_γ(η) = γ ∘ η ∘ γ^{-1}`; η must be indexed by the source pieces of γ.
pub fn conjugate_global(gamma: &GlobalDiffeo, eta: &WeakProductElement) -> Result<WeakProductElement> {
    if eta.index() != &gamma.sources() {
        return Err(Error::RefinementMismatch("index set differs from the source pieces".into()));
    }
    let mut entries = BTreeMap::new();
    for pc in &gamma.pieces {
        if let Some(w) = eta.get(pc.source()) {
            let inner = pc.inner.mul(w)?.mul(&pc.inner.inv()?)?;
            entries.insert(pc.target().clone(), inner.conjugate(&pc.psi)?);
        }
    }
    WeakProduct::new(gamma.pieces.iter().map(|pc| pc.target().clone()).collect(), entries)
}

/// An element of Diff(M) for a finite union of balls M, written `outer ∘ inner`.
#[derive(Clone, Debug)]
pub struct DiffM {
    pub inner: WeakProductElement,
    pub outer: Option<GlobalDiffeo>,
}

impl DiffM {
    pub fn eval(&self, x: &PadicVector, target_v: i64) -> Result<PadicVector> {
        let y = self.inner.eval(x, target_v)?;
        match &self.outer {
            Some(g) => g.eval(&y, target_v),
            None => Ok(y),
        }
    }

    pub fn level_map(&self, ctx: &PadicContext, m: u32) -> Result<Vec<usize>> {
        let region = index_region(self.inner.index())?;
        region_level_map(&region, m, ctx, |x| self.eval(x, m as i64))
    }
}
