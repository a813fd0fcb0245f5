//! Diffeomorphisms of balls `B = c + p^k O^d` written as `γ = id + σ`, and
//! compactly supported endomorphisms of finite unions of balls.
//!
//! A certificate asserts two things about the displacement σ:
//!
//! * `v(σ(x) - σ(x')) ≥ v_min + v(x - x')` for `x, x' ∈ B`, which makes the
//!   quotient `σ^[1]` take values in `p^{v_min} O^d` on directions of norm ≤ 1;
//! * `v(σ(x)) ≥ v_min + k`, so γ moves no point by more than `p^{-v_min}` times
//!   the radius of B.
//!
//! Together they make γ an isometric bijection of B and the iteration
//! `x ↦ y - σ(x)` a contraction with factor `p^{-v_min}`.

use std::collections::BTreeMap;

use crate::balls::{all_level_points, level_index, Ball, ClopenRegion};
use crate::calculus::{compose, dq1, local_map, maps_into, Certificate, DqPoint, FunctionModel, Piece, COMPOSE_LEVEL};
use crate::error::{Error, Result};
use crate::integral::{values_have_valuation, Verdict};
use crate::padic::{Approx, PadicContext, PadicScalar, PadicVector, Val};
use crate::poly::PolyMap;

/// Default enumeration level for Ω certificates.
pub const DEFAULT_LEVEL: u32 = 6;

/// Valuation threshold of the ball `B_{1/2}(0)`: `p^{-v} < 1/2`.
pub fn v_min(p: u32) -> i64 {
    if p == 2 {
        2
    } else {
        1
    }
}

fn identity_map(d: usize, ctx: &PadicContext) -> PolyMap {
    PolyMap::identity(d, ctx)
}

/// Restriction of a model to the pieces inside `ball`.
fn restrict(f: &FunctionModel, ball: &Ball) -> Result<FunctionModel> {
    let pieces: Vec<Piece> = f.pieces().iter().filter(|pc| ball.contains_ball(&pc.ball)).cloned().collect();
    let m = FunctionModel::new(f.ctx(), pieces)?;
    if *m.domain() != ClopenRegion::ball(ball.clone()) {
        return Err(Error::Invalid(format!("pieces do not partition {ball}")));
    }
    Ok(m)
}

/// A self-map `id + σ` of a ball with certified range.
#[derive(Clone, Debug, PartialEq)]
pub struct BallEndo {
    ball: Ball,
    sigma: FunctionModel,
}

impl BallEndo {
    /// Checks `σ(B) ⊆ p^k O^d`, equivalently `γ(B) ⊆ B`.
    pub fn new(ball: Ball, sigma: FunctionModel) -> Result<Self> {
        let d = ball.dim();
        if sigma.dim() != d || sigma.codim() != d {
            return Err(Error::Invalid("displacement must map into the same dimension".into()));
        }
        if *sigma.domain() != ClopenRegion::ball(ball.clone()) {
            return Err(Error::Invalid(format!("displacement is not defined on exactly {ball}")));
        }
        for pc in sigma.pieces() {
            let local = local_map(&pc.map, &pc.ball, sigma.ctx())?;
            let verdict = values_have_valuation(&local, ball.level() as i64, COMPOSE_LEVEL, ball.p());
            if !verdict.holds() {
                return Err(Error::CertificateInvalid(format!("range of {} leaves {ball}: {verdict:?}", pc.ball)));
            }
        }
        Ok(BallEndo { ball, sigma })
    }

    /// From `γ` given on a partition of the ball.
    pub fn from_gamma(ball: Ball, gamma: &FunctionModel) -> Result<Self> {
        let id = identity_map(gamma.dim(), gamma.ctx());
        let pieces = gamma
            .pieces()
            .iter()
            .map(|pc| Ok(Piece { ball: pc.ball.clone(), map: pc.map.sub(&id)? }))
            .collect::<Result<_>>()?;
        Self::new(ball, FunctionModel::new(gamma.ctx(), pieces)?)
    }

    pub fn identity(ctx: &PadicContext, ball: Ball) -> Result<Self> {
        let d = ball.dim();
        let zero = PolyMap::constant(d, &vec![PadicScalar::zero(ctx); d]);
        Self::new(ball.clone(), FunctionModel::on_region(ctx, &ClopenRegion::ball(ball), zero)?)
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn sigma(&self) -> &FunctionModel {
        &self.sigma
    }

    pub fn ctx(&self) -> &PadicContext {
        self.sigma.ctx()
    }

    pub fn dim(&self) -> usize {
        self.ball.dim()
    }

    /// γ as a model on the partition of σ.
    pub fn gamma_model(&self) -> Result<FunctionModel> {
        let id = identity_map(self.dim(), self.ctx());
        let pieces = self
            .sigma
            .pieces()
            .iter()
            .map(|pc| Ok(Piece { ball: pc.ball.clone(), map: pc.map.add(&id)? }))
            .collect::<Result<_>>()?;
        FunctionModel::new(self.ctx(), pieces)
    }

    pub fn gamma(&self, x: &PadicVector) -> Result<PadicVector> {
        x.add(&self.sigma.eval(x)?)
    }

    /// γ(x) needed only modulo p^a.
    pub fn gamma_mod(&self, x: &PadicVector, a: i64) -> Result<PadicVector> {
        x.add_approx_mod(&self.sigma.eval_approx(x)?, a)
    }

    /// γ(x) with coordinates that cancel completely reported as such.
    pub fn gamma_approx(&self, x: &PadicVector) -> Result<Vec<Approx>> {
        Ok(self.sigma.eval_approx(x)?.iter().zip(x.coords()).map(|(s, xi)| s.add_scalar(xi)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OmegaMethod {
    CoefficientBound,
    Exhaustive { level: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OmegaCertificate {
    pub v_min: i64,
    pub method: OmegaMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OmegaWitness {
    /// `σ^[1](x, y, t)` has valuation below `v_min`, with `‖y‖ ≤ 1`, `t ∈ O`.
    Quotient { x: PadicVector, y: PadicVector, t: PadicScalar },
    /// `σ(x)` has valuation below `v_min + k`.
    Displacement { x: PadicVector },
}

impl OmegaWitness {
    /// Re-evaluates the witness and confirms it violates the bound.
    pub fn confirms(&self, endo: &BallEndo) -> Result<bool> {
        let vm = v_min(endo.ball.p());
        Ok(match self {
            OmegaWitness::Quotient { x, y, t } => {
                let q = dq1(&endo.sigma, &DqPoint { x: x.clone(), y: y.clone(), t: t.clone() })?;
                y.norm_max() >= Val::Fin(0) && t.valuation() >= Val::Fin(0) && q.norm_max() < Val::Fin(vm)
            }
            OmegaWitness::Displacement { x } => approx_norm(&endo.sigma.eval_approx(x)?) < Val::Fin(vm + endo.ball.level() as i64),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaRejection {
    pub reason: String,
    pub witness: Option<OmegaWitness>,
}

impl From<OmegaRejection> for Error {
    fn from(r: OmegaRejection) -> Error {
        match r.witness {
            Some(w) => Error::NotCertified(format!("{}; witness {w:?}", r.reason)),
            None => Error::NotCertified(r.reason),
        }
    }
}

fn approx_norm(v: &[Approx]) -> Val {
    v.iter().map(|a| a.valuation_bound()).min().unwrap_or(Val::Inf)
}

fn residue_vector(ctx: &PadicContext, z: &[u64]) -> PadicVector {
    PadicVector(z.iter().map(|&c| PadicScalar::from_i64(ctx, c as i64)).collect())
}

/// Decides the certificate conditions, enumerating residues up to `level`.
pub fn try_certify_omega(endo: &BallEndo, level: u32) -> std::result::Result<OmegaCertificate, OmegaRejection> {
    let ctx = endo.ctx();
    let p = endo.ball.p();
    let d = endo.dim();
    let vm = v_min(p);
    let err = |e: Error| OmegaRejection { reason: e.to_string(), witness: None };
    let mut exhaustive = 0;
    let pieces = endo.sigma.pieces();
    for pc in pieces {
        let k = pc.ball.level();
        let local = local_map(&pc.map, &pc.ball, ctx).map_err(err)?;
        let quotient = local.map(|c| c.dq()).map_err(err)?;
        match values_have_valuation(&quotient, vm + k as i64, level, p) {
            Verdict::ByCoefficients => {}
            Verdict::ByEnumeration { level } => exhaustive = exhaustive.max(level),
            Verdict::Fails { point, .. } => {
                let scale = PadicScalar::p_power(ctx, k as i64);
                let x = pc.ball.center_vector(ctx).axpy(&scale, &residue_vector(ctx, &point[..d])).map_err(err)?;
                let y = residue_vector(ctx, &point[d..2 * d]);
                let t = PadicScalar::from_i64(ctx, point[2 * d] as i64).mul(&scale);
                return Err(OmegaRejection {
                    reason: format!("difference quotient on {} leaves p^{vm} O^{d}", pc.ball),
                    witness: Some(OmegaWitness::Quotient { x, y, t }),
                });
            }
            Verdict::Unknown(why) => {
                return Err(OmegaRejection { reason: format!("undecided on {}: {why}", pc.ball), witness: None });
            }
        }
    }
    // displacement at centers; the quotient bound extends it to whole pieces
    let centers: Vec<(PadicVector, Vec<Approx>)> = pieces
        .iter()
        .map(|pc| {
            let c = pc.ball.center_vector(ctx);
            let s = pc.map.eval_approx(c.coords(), ctx)?;
            Ok((c, s))
        })
        .collect::<Result<_>>()
        .map_err(err)?;
    let kb = endo.ball.level() as i64;
    for (c, s) in &centers {
        if approx_norm(s) < Val::Fin(vm + kb) {
            return Err(OmegaRejection {
                reason: format!("displacement at {c} has valuation below {}", vm + kb),
                witness: Some(OmegaWitness::Displacement { x: c.clone() }),
            });
        }
    }
    // across pieces: v(σ(c_i) - σ(c_j)) ≥ v_min + v(c_i - c_j)
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let (ci, si) = &centers[i];
            let (cj, sj) = &centers[j];
            let gap = cj.diff_valuation(ci);
            let diff: Vec<Approx> = si.iter().zip(sj).map(|(a, b)| a.add(&b.neg())).collect();
            if approx_norm(&diff) < gap.plus(vm) {
                let Val::Fin(g) = gap else { continue };
                let t = PadicScalar::p_power(ctx, g);
                let y = cj.sub(ci).map_err(err)?.scale(&t.inv().map_err(err)?);
                return Err(OmegaRejection {
                    reason: format!("displacements of {} and {} are too far apart", pieces[i].ball, pieces[j].ball),
                    witness: Some(OmegaWitness::Quotient { x: ci.clone(), y, t }),
                });
            }
        }
    }
    let method = if exhaustive == 0 { OmegaMethod::CoefficientBound } else { OmegaMethod::Exhaustive { level: exhaustive } };
    Ok(OmegaCertificate { v_min: vm, method })
}

pub fn certify_omega(endo: &BallEndo, level: u32) -> Result<OmegaCertificate> {
    Ok(try_certify_omega(endo, level)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedDiffeo {
    endo: BallEndo,
    cert: OmegaCertificate,
}

impl CertifiedDiffeo {
    pub fn new(endo: BallEndo, level: u32) -> Result<Self> {
        let cert = certify_omega(&endo, level)?;
        Ok(CertifiedDiffeo { endo, cert })
    }

    pub fn identity(ctx: &PadicContext, ball: Ball) -> Result<Self> {
        Self::new(BallEndo::identity(ctx, ball)?, DEFAULT_LEVEL)
    }

    pub fn endo(&self) -> &BallEndo {
        &self.endo
    }

    pub fn certificate(&self) -> &OmegaCertificate {
        &self.cert
    }

    pub fn ball(&self) -> &Ball {
        &self.endo.ball
    }

    pub fn ctx(&self) -> &PadicContext {
        self.endo.ctx()
    }

    pub fn gamma(&self, x: &PadicVector) -> Result<PadicVector> {
        self.endo.gamma(x)
    }

    pub fn gamma_mod(&self, x: &PadicVector, a: i64) -> Result<PadicVector> {
        self.endo.gamma_mod(x, a)
    }

    pub fn is_identity(&self) -> bool {
        self.endo.sigma.pieces().iter().all(|pc| pc.map.is_zero())
    }

    pub fn inverse_at(&self, y: &PadicVector, target_v: i64) -> Result<PadicVector> {
        Ok(invert_at(self, y, target_v)?.0)
    }
}

/// Pairs whose distance was not preserved.
#[derive(Clone, Debug, Default)]
pub struct IsometryReport {
    pub checked: usize,
    pub violations: Vec<(PadicVector, PadicVector)>,
}

impl IsometryReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn isometry_check(g: &CertifiedDiffeo, pairs: &[(PadicVector, PadicVector)]) -> Result<IsometryReport> {
    let mut rep = IsometryReport::default();
    for (x, y) in pairs {
        let before = x.diff_valuation(y);
        // coordinates of γ(x) - γ(y) that cancel completely are only known to vanish mod p^a
        let (gx, gy) = (g.endo.gamma_approx(x)?, g.endo.gamma_approx(y)?);
        let d: Vec<Approx> = gx.iter().zip(&gy).map(|(a, b)| a.add(&b.neg())).collect();
        let known = d.iter().filter_map(|a| if let Approx::Value(v) = a { Some(v.valuation()) } else { None }).min().unwrap_or(Val::Inf);
        let floor = approx_norm(&d);
        let same = if known == floor { before == known } else { before >= floor };
        rep.checked += 1;
        if !same {
            rep.violations.push((x.clone(), y.clone()));
        }
    }
    Ok(rep)
}

/// Iteration cap `ceil(target / v_min) + 2`.
pub fn iteration_cap(p: u32, target_v: i64) -> u32 {
    let vm = v_min(p);
    (target_v.max(0) + vm - 1).div_euclid(vm) as u32 + 2
}

/// Solves `γ(x) = y` to absolute precision `target_v`; returns the solution
/// and the number of iterations used.
pub fn invert_at(g: &CertifiedDiffeo, y: &PadicVector, target_v: i64) -> Result<(PadicVector, u32)> {
    if !g.ball().contains_point(y)? {
        return Err(Error::OutOfDomain(y.to_string()));
    }
    let cap = iteration_cap(g.ball().p(), target_v);
    let sigma = g.endo.sigma();
    // iterates only matter modulo p^keep; balanced residues keep them exact
    let n = g.ctx().prec() as i64;
    let keep = (target_v.max(0) + v_min(g.ball().p())).min(n.max(target_v));
    let mut x = y.clone();
    for n in 1..=cap {
        let next = canonical_residue(&y.add_approx_mod(&sigma.eval_approx(&x)?.iter().map(Approx::neg).collect::<Vec<_>>(), keep)?, keep);
        if next.diff_valuation(&x) >= Val::Fin(target_v) {
            return Ok((next, n));
        }
        x = next;
    }
    Err(Error::IterationBudgetExceeded(cap))
}

/// Representative of smallest absolute value modulo p^m, when the coordinates are known that far.
fn canonical_residue(x: &PadicVector, m: i64) -> PadicVector {
    let ctx = x.coords()[0].ctx();
    let Some(r) = u32::try_from(m).ok().and_then(|m| x.residues(m).ok()) else {
        return x.clone();
    };
    let modulus = num_bigint::BigInt::from(ctx.p_pow(m as u32));
    let half = &modulus / 2;
    PadicVector(
        r.into_iter()
            .map(|b| {
                let b = num_bigint::BigInt::from(b);
                let b = if b > half { b - &modulus } else { b };
                PadicScalar::from_bigint(ctx, &b)
            })
            .collect(),
    )
}

/// Ball `γ^{-1}(b)` for a ball `b ⊆ B`.
pub fn preimage_ball(g: &CertifiedDiffeo, b: &Ball) -> Result<Ball> {
    let ctx = g.ctx();
    let x = g.inverse_at(&b.center_vector(ctx), b.level() as i64)?;
    Ball::from_vector(&x, b.level(), b.p())
}

/// Finest common partition of two partitions of the same region.
fn common_refinement(a: &[Ball], b: &[Ball]) -> Vec<Ball> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            if x.contains_ball(y) {
                out.push(y.clone());
            } else if y.contains_ball(x) {
                out.push(x.clone());
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// `g1 ∘ g2`, with displacement `σ2 + σ1 ∘ (id + σ2)`.
pub fn compose_diffeos(g1: &CertifiedDiffeo, g2: &CertifiedDiffeo) -> Result<CertifiedDiffeo> {
    if g1.ball() != g2.ball() {
        return Err(Error::Invalid("diffeomorphisms live on different balls".into()));
    }
    if g2.is_identity() {
        return Ok(g1.clone());
    }
    if g1.is_identity() {
        return Ok(g2.clone());
    }
    let ctx = g1.ctx();
    let s1 = g1.endo.sigma();
    // preimages under γ2 of the pieces of σ1
    let mut target_of = Vec::new();
    for pc in s1.pieces() {
        target_of.push((preimage_ball(g2, &pc.ball)?, pc.ball.clone()));
    }
    let pre: Vec<Ball> = target_of.iter().map(|(b, _)| b.clone()).collect();
    let own: Vec<Ball> = g2.endo.sigma().pieces().iter().map(|p| p.ball.clone()).collect();
    let cells = common_refinement(&own, &pre);
    let gamma2 = g2.endo.gamma_model()?;
    let mut pieces = Vec::with_capacity(cells.len());
    let mut cert = Certificate::new();
    for c in &cells {
        let src = &gamma2.pieces()[gamma2.piece_index(&c.center_vector(ctx))?];
        pieces.push(Piece { ball: c.clone(), map: src.map.clone() });
        let (_, tgt) = target_of
            .iter()
            .find(|(b, _)| b.contains_ball(c))
            .ok_or_else(|| Error::NotCertified(format!("no preimage ball contains {c}")))?;
        cert.insert(c.clone(), tgt.clone());
    }
    let refined = FunctionModel::new(ctx, pieces)?;
    let outer = compose(s1, &refined, &cert).map_err(|e| Error::NotCertified(e.to_string()))?;
    let sigma = outer.add(g2.endo.sigma())?;
    let level = match (&g1.cert.method, &g2.cert.method) {
        (OmegaMethod::Exhaustive { level: a }, OmegaMethod::Exhaustive { level: b }) => (*a).max(*b),
        (OmegaMethod::Exhaustive { level }, _) | (_, OmegaMethod::Exhaustive { level }) => *level,
        _ => DEFAULT_LEVEL,
    }
    .max(DEFAULT_LEVEL);
    CertifiedDiffeo::new(BallEndo::new(g1.ball().clone(), sigma)?, level)
}

/// Permutation of the level-m residues of B induced by γ, indexed by
/// [`level_index`] on the residue within `(Z/p^m)^d`.
pub fn induced_level_map(g: &CertifiedDiffeo, m: u32) -> Result<Vec<usize>> {
    let p = g.ball().p();
    let d = g.ball().dim();
    let ctx = g.ctx();
    let pts = all_level_points(p, d, m);
    let mut out = Vec::with_capacity(pts.len());
    for z in &pts {
        let x = residue_vector(ctx, z);
        let img = if g.ball().contains_residue(z) && m >= g.ball().level() { g.gamma_mod(&x, m as i64)? } else { x };
        let r: Vec<u64> = img.residues(m)?.iter().map(|b| b.iter_u64_digits().next().unwrap_or(0)).collect();
        out.push(level_index(&r, p, m));
    }
    check_permutation(&out)?;
    Ok(out)
}

pub fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &i in perm {
        if i >= perm.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::NotBijective);
        }
    }
    Ok(())
}

/// `(a ∘ b)[i] = a[b[i]]`.
pub fn perm_compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&i| a[i]).collect()
}

pub fn perm_inverse(a: &[usize]) -> Vec<usize> {
    let mut out = vec![0; a.len()];
    for (i, &j) in a.iter().enumerate() {
        out[j] = i;
    }
    out
}

pub fn perm_identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Level-m map of an arbitrary point map on the residues of `region`; the
/// result lists, for each residue in `region.level_points(m)`, the position of
/// its image in the same list.
pub fn region_level_map(region: &ClopenRegion, m: u32, ctx: &PadicContext, f: impl Fn(&PadicVector) -> Result<PadicVector>) -> Result<Vec<usize>> {
    let pts = region.level_points(m);
    let pos: BTreeMap<Vec<u64>, usize> = pts.iter().cloned().enumerate().map(|(i, z)| (z, i)).collect();
    let mut out = Vec::with_capacity(pts.len());
    for z in &pts {
        let img = f(&residue_vector(ctx, z))?;
        let r: Vec<u64> = img.residues(m)?.iter().map(|b| b.iter_u64_digits().next().unwrap_or(0)).collect();
        out.push(*pos.get(&r).ok_or_else(|| Error::OutOfDomain(img.to_string()))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// compactly supported endomorphisms

#[derive(Clone, Debug, PartialEq)]
pub struct CompactlySupportedEndo {
    u: ClopenRegion,
    sigma: FunctionModel,
    support: ClopenRegion,
}

impl CompactlySupportedEndo {
    /// Certifies that `id + σ` maps U into U, refining pieces where needed.
    pub fn new(sigma: FunctionModel) -> Result<Self> {
        let u = sigma.domain().clone();
        let ctx = sigma.ctx().clone();
        let d = sigma.dim();
        if sigma.codim() != d {
            return Err(Error::Invalid("displacement must map into the same dimension".into()));
        }
        let id = identity_map(d, &ctx);
        let cap = u.max_level() + 4;
        for pc in sigma.pieces() {
            if pc.map.is_zero() {
                continue;
            }
            let gamma = pc.map.add(&id)?;
            let mut queue = vec![pc.ball.clone()];
            while let Some(b) = queue.pop() {
                let img = PadicVector(gamma.eval_scalar(b.center_vector(&ctx).coords(), &ctx)?);
                let target = u.balls().iter().find(|ub| ub.contains_point(&img).unwrap_or(false));
                let verdict = match target {
                    Some(t) => maps_into(&gamma, &b, t, &ctx, COMPOSE_LEVEL)?,
                    None => return Err(Error::CertificateInvalid(format!("image {img} of {b} leaves the region"))),
                };
                if verdict.holds() {
                    continue;
                }
                if b.level() >= cap {
                    return Err(Error::CertificateInvalid(format!("{b}: {verdict:?}")));
                }
                queue.extend(b.children());
            }
        }
        let support = ClopenRegion::from_balls(
            u.p(),
            d,
            sigma.pieces().iter().filter(|pc| !pc.map.is_zero()).map(|pc| pc.ball.clone()).collect(),
        );
        Ok(CompactlySupportedEndo { u, sigma, support })
    }

    pub fn identity(ctx: &PadicContext, u: &ClopenRegion) -> Result<Self> {
        let d = u.dim();
        Self::new(FunctionModel::on_region(ctx, u, PolyMap::constant(d, &vec![PadicScalar::zero(ctx); d]))?)
    }

    pub fn region(&self) -> &ClopenRegion {
        &self.u
    }

    pub fn sigma(&self) -> &FunctionModel {
        &self.sigma
    }

    pub fn support(&self) -> &ClopenRegion {
        &self.support
    }

    pub fn ctx(&self) -> &PadicContext {
        self.sigma.ctx()
    }

    pub fn gamma(&self, x: &PadicVector) -> Result<PadicVector> {
        x.add(&self.sigma.eval(x)?)
    }

    /// γ(x) needed only modulo p^a.
    pub fn gamma_mod(&self, x: &PadicVector, a: i64) -> Result<PadicVector> {
        x.add_approx_mod(&self.sigma.eval_approx(x)?, a)
    }

    /// `γ` as a model on the partition of σ.
    pub fn gamma_model(&self) -> Result<FunctionModel> {
        let id = identity_map(self.sigma.dim(), self.ctx());
        let pieces = self
            .sigma
            .pieces()
            .iter()
            .map(|pc| Ok(Piece { ball: pc.ball.clone(), map: pc.map.add(&id)? }))
            .collect::<Result<_>>()?;
        FunctionModel::new(self.ctx(), pieces)
    }
}

/// `μ(σ_a, σ_b) = σ_b + σ_a ∘ (id + σ_b)`, the displacement of `γ_a ∘ γ_b`.
pub fn endo_compose(a: &CompactlySupportedEndo, b: &CompactlySupportedEndo) -> Result<CompactlySupportedEndo> {
    if a.u != b.u {
        return Err(Error::Invalid("endomorphisms live on different regions".into()));
    }
    let inner = b.gamma_model()?;
    let outer = crate::calculus::compose_auto(&a.sigma, &inner).map_err(|e| Error::CertificateInvalid(e.to_string()))?;
    CompactlySupportedEndo::new(outer.add(&b.sigma)?)
}

#[derive(Clone, Debug)]
pub struct DiffcDecision {
    pub accepted: bool,
    pub certificates: Vec<CertifiedDiffeo>,
    /// The offending ball's endomorphism and the reason it failed.
    pub rejection: Option<(BallEndo, OmegaRejection)>,
}

impl DiffcDecision {
    /// Inverse of an accepted element at `y`.
    pub fn invert_at(&self, y: &PadicVector, target_v: i64) -> Result<PadicVector> {
        if !self.accepted {
            return Err(Error::NotCertified("element was rejected".into()));
        }
        for g in &self.certificates {
            if g.ball().contains_point(y)? {
                return g.inverse_at(y, target_v);
            }
        }
        Ok(y.clone())
    }
}

/// Certifies each ball of the support separately.
pub fn diffc_membership(a: &CompactlySupportedEndo) -> Result<DiffcDecision> {
    let mut certificates = Vec::new();
    for b in a.support.balls() {
        // the displacement bound of the certificate implies the range condition
        let endo = BallEndo { ball: b.clone(), sigma: restrict(&a.sigma, b)? };
        match try_certify_omega(&endo, DEFAULT_LEVEL) {
            Ok(cert) => certificates.push(CertifiedDiffeo { endo, cert }),
            Err(rej) => return Ok(DiffcDecision { accepted: false, certificates: Vec::new(), rejection: Some((endo, rej)) }),
        }
    }
    Ok(DiffcDecision { accepted: true, certificates, rejection: None })
}
