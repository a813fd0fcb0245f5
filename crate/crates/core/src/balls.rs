//! Balls `c + p^k Z_p^d` inside Z_p^d, finite disjoint unions of them, and
//! the partition constructions built from them.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::padic::{PadicContext, PadicScalar, PadicVector};

/// `p^k`, or `None` when it leaves the 63-bit range used for ball centers.
pub fn checked_pow(p: u32, k: u32) -> Option<u64> {
    (p as u64).checked_pow(k).filter(|&x| x < 1 << 63)
}

fn pow(p: u32, k: u32) -> u64 {
    checked_pow(p, k).expect("ball level too fine for 63-bit centers")
}

/// The coset `center + p^k Z_p^d`; center coordinates are residues in [0, p^k).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ball {
    p: u32,
    k: u32,
    center: Vec<u64>,
}

impl Ord for Ball {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.p, self.center.len(), self.k, &self.center).cmp(&(o.p, o.center.len(), o.k, &o.center))
    }
}

impl PartialOrd for Ball {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Debug for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B({:?}, k={})", self.center, self.k)
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallRelation {
    Equal,
    Disjoint,
    FirstContainsSecond,
    SecondContainsFirst,
}

impl Ball {
    /// Ball with the given center residues, reduced modulo p^k.
    pub fn new(p: u32, center: &[u64], k: u32) -> Ball {
        let m = pow(p, k);
        Ball { p, k, center: center.iter().map(|c| c % m).collect() }
    }

    /// The unit ball Z_p^d.
    pub fn unit(p: u32, d: usize) -> Ball {
        Ball { p, k: 0, center: vec![0; d] }
    }

    pub fn from_vector(center: &PadicVector, k: u32, p: u32) -> Result<Ball> {
        checked_pow(p, k).ok_or_else(|| Error::Invalid(format!("ball level {k} too fine")))?;
        let res = center.residues(k)?;
        Ok(Ball { p, k, center: res.iter().map(|r| r.iter_u64_digits().next().unwrap_or(0)).collect() })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn center(&self) -> &[u64] {
        &self.center
    }

    pub fn center_vector(&self, ctx: &PadicContext) -> PadicVector {
        PadicVector(self.center.iter().map(|&c| PadicScalar::from_i64(ctx, c as i64)).collect())
    }

    /// Whether `x` lies in the ball; `x` must be known modulo p^k.
    pub fn contains_point(&self, x: &PadicVector) -> Result<bool> {
        if x.dim() != self.dim() {
            return Err(Error::Invalid("point dimension differs from ball dimension".into()));
        }
        if x.norm_max() < crate::padic::Val::Fin(0) {
            return Ok(false);
        }
        let m = pow(self.p, self.k);
        for (xi, ci) in x.coords().iter().zip(&self.center) {
            let r = xi.residue(self.k)?;
            if r.iter_u64_digits().next().unwrap_or(0) % m != *ci {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Membership of a level-m residue point (m ≥ k).
    pub fn contains_residue(&self, z: &[u64]) -> bool {
        let m = pow(self.p, self.k);
        z.iter().zip(&self.center).all(|(a, c)| a % m == *c)
    }

    pub fn contains_ball(&self, o: &Ball) -> bool {
        o.k >= self.k && self.contains_residue(&o.center)
    }

    pub fn relation(&self, o: &Ball) -> BallRelation {
        if self == o {
            BallRelation::Equal
        } else if self.contains_ball(o) {
            BallRelation::FirstContainsSecond
        } else if o.contains_ball(self) {
            BallRelation::SecondContainsFirst
        } else {
            BallRelation::Disjoint
        }
    }

    pub fn parent(&self) -> Option<Ball> {
        (self.k > 0).then(|| Ball::new(self.p, &self.center, self.k - 1))
    }

    pub fn ancestor(&self, level: u32) -> Ball {
        assert!(level <= self.k);
        Ball::new(self.p, &self.center, level)
    }

    /// The p^d sub-balls of the next level, in lexicographic digit order.
    pub fn children(&self) -> Vec<Ball> {
        let step = pow(self.p, self.k);
        let d = self.dim();
        let count = (self.p as usize).pow(d as u32);
        (0..count)
            .map(|mut idx| {
                let center = (0..d)
                    .map(|i| {
                        let digit = (idx % self.p as usize) as u64;
                        idx /= self.p as usize;
                        self.center[i] + digit * step
                    })
                    .collect::<Vec<_>>();
                Ball { p: self.p, k: self.k + 1, center }
            })
            .collect()
    }

    /// All sub-balls of level `m ≥ k`.
    pub fn descendants(&self, m: u32) -> Vec<Ball> {
        let mut cur = vec![self.clone()];
        for _ in self.k..m {
            cur = cur.iter().flat_map(|b| b.children()).collect();
        }
        cur
    }

    /// `self \ o` as disjoint balls.
    pub fn minus(&self, o: &Ball) -> Vec<Ball> {
        match self.relation(o) {
            BallRelation::Disjoint => vec![self.clone()],
            BallRelation::Equal | BallRelation::SecondContainsFirst => Vec::new(),
            BallRelation::FirstContainsSecond => {
                let mut out = Vec::new();
                let mut cur = self.clone();
                while cur.k < o.k {
                    let mut next = None;
                    for c in cur.children() {
                        if c.contains_ball(o) {
                            next = Some(c);
                        } else {
                            out.push(c);
                        }
                    }
                    cur = next.expect("one child contains the smaller ball");
                }
                out
            }
        }
    }
}

/// Finite disjoint union of balls in Z_p^d, kept in canonical form: no ball
/// contains another, no complete sibling family, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClopenRegion {
    p: u32,
    d: usize,
    balls: Vec<Ball>,
}

impl ClopenRegion {
    pub fn empty(p: u32, d: usize) -> Self {
        ClopenRegion { p, d, balls: Vec::new() }
    }

    pub fn ball(b: Ball) -> Self {
        ClopenRegion { p: b.p, d: b.dim(), balls: vec![b] }
    }

    pub fn whole(p: u32, d: usize) -> Self {
        Self::ball(Ball::unit(p, d))
    }

    /// Union of arbitrary (possibly overlapping) balls, canonicalized.
    pub fn from_balls(p: u32, d: usize, balls: Vec<Ball>) -> Self {
        assert!(balls.iter().all(|b| b.p == p && b.dim() == d), "ball of another space");
        let mut sorted = balls;
        sorted.sort();
        sorted.dedup();
        // drop balls contained in coarser ones
        let mut kept: Vec<Ball> = Vec::new();
        for b in sorted {
            if !kept.iter().any(|k| k.contains_ball(&b)) {
                kept.push(b);
            }
        }
        // merge complete sibling families, finest level first
        let full = (p as usize).pow(d as u32);
        loop {
            let mut families: BTreeMap<Ball, usize> = BTreeMap::new();
            for b in &kept {
                if let Some(par) = b.parent() {
                    *families.entry(par).or_default() += 1;
                }
            }
            let complete: Vec<Ball> = families.into_iter().filter(|&(_, n)| n == full).map(|(b, _)| b).collect();
            if complete.is_empty() {
                break;
            }
            kept.retain(|b| !b.parent().is_some_and(|par| complete.contains(&par)));
            kept.extend(complete);
        }
        kept.sort();
        ClopenRegion { p, d, balls: kept }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.balls.iter().map(|b| b.k).max().unwrap_or(0)
    }

    pub fn contains_point(&self, x: &PadicVector) -> Result<bool> {
        for b in &self.balls {
            if b.contains_point(x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn contains_residue(&self, z: &[u64]) -> bool {
        self.balls.iter().any(|b| b.contains_residue(z))
    }

    pub fn union(&self, o: &Self) -> Self {
        let mut all = self.balls.clone();
        all.extend(o.balls.iter().cloned());
        Self::from_balls(self.p, self.d, all)
    }

    pub fn intersection(&self, o: &Self) -> Self {
        let mut out = Vec::new();
        for a in &self.balls {
            for b in &o.balls {
                match a.relation(b) {
                    BallRelation::Equal | BallRelation::SecondContainsFirst => out.push(a.clone()),
                    BallRelation::FirstContainsSecond => out.push(b.clone()),
                    BallRelation::Disjoint => {}
                }
            }
        }
        Self::from_balls(self.p, self.d, out)
    }

    pub fn difference(&self, o: &Self) -> Self {
        let mut pieces = self.balls.clone();
        for b in &o.balls {
            pieces = pieces.iter().flat_map(|a| a.minus(b)).collect();
        }
        Self::from_balls(self.p, self.d, pieces)
    }

    pub fn contains_region(&self, o: &Self) -> bool {
        o.difference(self).is_empty()
    }

    pub fn contains_ball(&self, b: &Ball) -> bool {
        self.contains_region(&Self::ball(b.clone()))
    }

    /// `self × o` in dimension d1 + d2.
    pub fn product(&self, o: &Self) -> Self {
        let mut out = Vec::new();
        for a in &self.balls {
            for b in &o.balls {
                let m = a.k.max(b.k);
                for a2 in a.descendants(m) {
                    for b2 in b.descendants(m) {
                        let mut c = a2.center.clone();
                        c.extend_from_slice(&b2.center);
                        out.push(Ball { p: self.p, k: m, center: c });
                    }
                }
            }
        }
        Self::from_balls(self.p, self.d + o.d, out)
    }

    /// Image under the projection onto coordinates `range`.
    pub fn project(&self, range: std::ops::Range<usize>) -> Self {
        let d = range.len();
        let balls = self.balls.iter().map(|b| Ball { p: self.p, k: b.k, center: b.center[range.clone()].to_vec() }).collect();
        Self::from_balls(self.p, d, balls)
    }

    /// All residue points of (Z/p^m)^d lying in the region.
    pub fn level_points(&self, m: u32) -> Vec<Vec<u64>> {
        assert!(m >= self.max_level());
        self.balls.iter().flat_map(|b| b.descendants(m)).map(|b| b.center).collect()
    }
}

/// Every residue point of (Z/p^m)^d, in index order `Σ z_i (p^m)^i`.
pub fn all_level_points(p: u32, d: usize, m: u32) -> Vec<Vec<u64>> {
    let q = pow(p, m);
    let total = (q as usize).pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let c = (idx as u64) % q;
                    idx /= q as usize;
                    c
                })
                .collect()
        })
        .collect()
}

/// Index of a residue point in the order of [`all_level_points`].
pub fn level_index(z: &[u64], p: u32, m: u32) -> usize {
    let q = pow(p, m) as usize;
    z.iter().rev().fold(0usize, |acc, &c| acc * q + c as usize)
}

/// Characteristic function of a clopen set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndicatorFunction {
    pub support: ClopenRegion,
}

impl IndicatorFunction {
    pub fn eval(&self, x: &PadicVector) -> Result<u32> {
        Ok(self.support.contains_point(x)? as u32)
    }

    pub fn eval_residue(&self, z: &[u64]) -> u32 {
        self.support.contains_residue(z) as u32
    }
}

pub fn ball_relation(b1: &Ball, b2: &Ball) -> BallRelation {
    b1.relation(b2)
}

pub fn decompose(region: &ClopenRegion) -> Result<Vec<Ball>> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(region.balls.clone())
}

/// Disjoint balls covering `region`, each inside the cover member it is tagged with.
/// Members are processed in order; each takes the part of the remainder it covers.
pub fn subordinate_partition(region: &ClopenRegion, cover: &[ClopenRegion]) -> Result<Vec<(Ball, usize)>> {
    let mut remaining = region.clone();
    let mut out = Vec::new();
    for (i, member) in cover.iter().enumerate() {
        if remaining.is_empty() {
            break;
        }
        let piece = remaining.intersection(member);
        out.extend(piece.balls.iter().map(|b| (b.clone(), i)));
        remaining = remaining.difference(member);
    }
    if let Some(b) = remaining.balls.first() {
        let m = region.max_level().max(cover.iter().map(|c| c.max_level()).max().unwrap_or(0)).max(b.k);
        let witness = b.descendants(m).remove(0);
        return Err(Error::CoverIncomplete(format!("{:?} at level {m}", witness.center)));
    }
    Ok(out)
}

pub fn partition_of_unity(region: &ClopenRegion, cover: &[ClopenRegion]) -> Result<Vec<IndicatorFunction>> {
    let parts = subordinate_partition(region, cover)?;
    Ok((0..cover.len())
        .map(|i| {
            let balls = parts.iter().filter(|(_, j)| *j == i).map(|(b, _)| b.clone()).collect();
            IndicatorFunction { support: ClopenRegion::from_balls(region.p, region.d, balls) }
        })
        .collect())
}

/// Indicator of a clopen W with K ⊆ W ⊆ U: every ball of K is replaced by
/// its coarsest ancestor that still lies in U.
pub fn cutoff(k: &ClopenRegion, u: &ClopenRegion) -> Result<IndicatorFunction> {
    if !u.contains_region(k) {
        return Err(Error::NotContained);
    }
    let balls = k
        .balls
        .iter()
        .map(|b| (0..=b.k).map(|l| b.ancestor(l)).find(|a| u.contains_ball(a)).expect("b itself lies in U"))
        .collect();
    Ok(IndicatorFunction { support: ClopenRegion::from_balls(k.p, k.d, balls) })
}
