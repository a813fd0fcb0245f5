//! Sparse multivariate polynomials with p-adic coefficients.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::error::Result;
use crate::padic::{Approx, PadicContext, PadicScalar, Val};
use crate::ring::Ring;

pub type Exps = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exps, PadicScalar>,
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::from(1);
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

impl Poly {
    pub fn zero(nvars: usize) -> Poly {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: PadicScalar) -> Poly {
        Poly::monomial(vec![0; nvars], c)
    }

    pub fn monomial(exps: Exps, c: PadicScalar) -> Poly {
        let mut p = Poly::zero(exps.len());
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize, ctx: &PadicContext) -> Poly {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Poly::monomial(e, PadicScalar::one(ctx))
    }

    /// Builds a polynomial from (exponents, coefficient) pairs, merging repeats.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Exps, PadicScalar)>) -> Result<Poly> {
        let mut p = Poly::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent tuple of wrong length");
            p.add_term(e, c)?;
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, &PadicScalar)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> Option<&PadicScalar> {
        self.terms.get(e)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn min_coef_val(&self) -> Val {
        self.terms.values().map(|c| c.valuation()).min().unwrap_or(Val::Inf)
    }

    pub fn add_term(&mut self, e: Exps, c: PadicScalar) -> Result<()> {
        if c.is_zero() {
            return Ok(());
        }
        match self.terms.entry(e) {
            // a coefficient cancelling to the working precision is dropped
            Entry::Occupied(mut slot) => match slot.get().add(&c) {
                Ok(s) if !s.is_zero() => *slot.get_mut() = s,
                _ => {
                    slot.remove();
                }
            },
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
        }
        Ok(())
    }

    pub fn add(&self, o: &Poly) -> Result<Poly> {
        assert_eq!(self.nvars, o.nvars);
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(e.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn neg(&self) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), c.neg())).collect() }
    }

    pub fn sub(&self, o: &Poly) -> Result<Poly> {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &PadicScalar) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, a)| (e.clone(), a.mul(c))).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Result<Poly> {
        assert_eq!(self.nvars, o.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(e, ca.mul(cb))?;
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32, ctx: &PadicContext) -> Result<Poly> {
        let mut acc = Poly::constant(self.nvars, PadicScalar::one(ctx));
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Evaluation over any coefficient ring; `like` fixes the ring when `pt` is empty.
    pub fn eval<R: Ring>(&self, pt: &[R], like: &R) -> Result<R> {
        R::sum(like, self.terms_at(pt, like)?)
    }

    /// Scalar evaluation that reports a total cancellation instead of failing.
    pub fn eval_approx(&self, pt: &[PadicScalar], ctx: &PadicContext) -> Result<Approx> {
        let terms = self.terms_at(pt, &PadicScalar::zero(ctx))?;
        Ok(Approx::sum_approx(ctx, &terms))
    }

    /// Evaluation at a point whose coordinates may themselves be known only
    /// modulo a power of p. Terms touching such a coordinate contribute the
    /// valuation floor they are guaranteed to reach.
    pub fn eval_at_approx(&self, pt: &[Approx], ctx: &PadicContext) -> Result<Approx> {
        let settled: Vec<PadicScalar> = pt
            .iter()
            .map(|a| match a {
                Approx::Value(v) => v.clone(),
                Approx::ZeroMod(_) => PadicScalar::zero(ctx),
            })
            .collect();
        let mut floor = Val::Inf;
        for (e, c) in &self.terms {
            if !e.iter().zip(pt).any(|(&x, a)| x > 0 && matches!(a, Approx::ZeroMod(_))) {
                continue;
            }
            let mut v = c.valuation();
            for (&x, a) in e.iter().zip(pt) {
                if let (Val::Fin(acc), Val::Fin(b)) = (v, a.valuation_bound()) {
                    v = Val::Fin(acc + x as i64 * b);
                } else if x > 0 {
                    v = Val::Inf;
                }
            }
            floor = floor.min(v);
        }
        let sum = self.eval_approx(&settled, ctx)?;
        Ok(match floor {
            Val::Fin(a) => sum.add(&Approx::ZeroMod(a)),
            Val::Inf => sum,
        })
    }

    fn terms_at<R: Ring>(&self, pt: &[R], like: &R) -> Result<Vec<R>> {
        assert_eq!(pt.len(), self.nvars, "point of wrong dimension");
        let mut maxe = vec![0u32; self.nvars];
        for e in self.terms.keys() {
            for (m, &x) in maxe.iter_mut().zip(e) {
                *m = (*m).max(x);
            }
        }
        let mut powers: Vec<Vec<R>> = Vec::with_capacity(self.nvars);
        for (i, &m) in maxe.iter().enumerate() {
            let mut row = Vec::with_capacity(m as usize + 1);
            row.push(like.scalar_like(&PadicScalar::one(like.ctx())));
            for k in 1..=m as usize {
                let next = if k == 1 { pt[i].clone() } else { row[k - 1].mul(&pt[i])? };
                row.push(next);
            }
            powers.push(row);
        }
        let mut acc = Vec::with_capacity(self.terms.len());
        for (e, c) in &self.terms {
            let mut term: Option<R> = None;
            for (i, &x) in e.iter().enumerate() {
                if x > 0 {
                    let f = &powers[i][x as usize];
                    term = Some(match term {
                        None => f.clone(),
                        Some(t) => t.mul(f)?,
                    });
                }
            }
            let term = match term {
                None => like.scalar_like(c),
                Some(t) => t.scale(c),
            };
            acc.push(term);
        }
        Ok(acc)
    }

    /// Substitutes `subs[i]` for variable i. All substitutes share one variable count.
    pub fn compose(&self, subs: &[Poly], out_nvars: usize, ctx: &PadicContext) -> Result<Poly> {
        assert_eq!(subs.len(), self.nvars);
        let mut cache: Vec<Vec<Poly>> = subs.iter().map(|s| vec![Poly::constant(out_nvars, PadicScalar::one(ctx)), s.clone()]).collect();
        let mut out = Poly::zero(out_nvars);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(out_nvars, c.clone());
            for (i, &x) in e.iter().enumerate() {
                while cache[i].len() <= x as usize {
                    let next = cache[i].last().unwrap().mul(&subs[i])?;
                    cache[i].push(next);
                }
                if x > 0 {
                    term = term.mul(&cache[i][x as usize])?;
                }
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Symbolic difference quotient `(P(z + t w) - P(z)) / t` in the variables
    /// `(z, w, t)`. Every monomial `z^a` contributes the distinct monomials
    /// `C(a,b) z^(a-b) w^b t^(|b|-1)`, `b ≠ 0`, so no cancellation occurs.
    pub fn dq(&self) -> Result<Poly> {
        let n = self.nvars;
        let mut out = Poly::zero(2 * n + 1);
        for (a, c) in &self.terms {
            let mut b = vec![0u32; n];
            loop {
                // advance b through the box 0..=a in mixed radix
                let mut i = 0;
                while i < n {
                    if b[i] < a[i] {
                        b[i] += 1;
                        break;
                    }
                    b[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
                let mut coef = BigInt::from(1);
                for j in 0..n {
                    coef *= binomial(a[j], b[j]);
                }
                let mut e = Vec::with_capacity(2 * n + 1);
                e.extend(a.iter().zip(&b).map(|(x, y)| x - y));
                e.extend_from_slice(&b);
                e.push(b.iter().sum::<u32>() - 1);
                out.add_term(e, c.mul(&PadicScalar::from_bigint(c.ctx(), &coef)))?;
            }
        }
        Ok(out)
    }

    /// Renames variable i to `map[i]` in a ring with `new_nvars` variables.
    pub fn remap(&self, map: &[usize], new_nvars: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut ne = vec![0; new_nvars];
                for (i, &x) in e.iter().enumerate() {
                    ne[map[i]] += x;
                }
                (ne, c.clone())
            })
            .collect();
        Poly { nvars: new_nvars, terms }
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne[i] -= 1;
            let k = PadicScalar::from_i64(c.ctx(), e[i] as i64);
            out.terms.insert(ne, c.mul(&k));
        }
        out
    }

    /// `Σ v_i ∂P/∂x_i`
    pub fn directional(&self, v: &[PadicScalar]) -> Result<Poly> {
        let mut out = Poly::zero(self.nvars);
        for (i, vi) in v.iter().enumerate() {
            if !vi.is_zero() {
                out = out.add(&self.derivative(i).scale(vi))?;
            }
        }
        Ok(out)
    }

    /// Fixes the first `vals.len()` variables, leaving a polynomial in the rest.
    pub fn substitute_prefix(&self, vals: &[PadicScalar]) -> Result<Poly> {
        let k = vals.len();
        let mut out = Poly::zero(self.nvars - k);
        for (e, c) in &self.terms {
            let mut coef = c.clone();
            for (x, &ei) in vals.iter().zip(&e[..k]) {
                coef = coef.mul(&x.pow(ei));
            }
            out.add_term(e[k..].to_vec(), coef)?;
        }
        Ok(out)
    }

    pub fn constant_term(&self) -> Option<&PadicScalar> {
        self.terms.get(&vec![0; self.nvars])
    }
}

/// A polynomial map K^n -> K^e given by its coordinate polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMap {
    nvars: usize,
    comps: Vec<Poly>,
}

impl PolyMap {
    pub fn new(nvars: usize, comps: Vec<Poly>) -> PolyMap {
        assert!(comps.iter().all(|c| c.nvars() == nvars), "component with wrong variable count");
        PolyMap { nvars, comps }
    }

    pub fn identity(n: usize, ctx: &PadicContext) -> PolyMap {
        PolyMap::new(n, (0..n).map(|i| Poly::var(n, i, ctx)).collect())
    }

    pub fn constant(nvars: usize, c: &[PadicScalar]) -> PolyMap {
        PolyMap::new(nvars, c.iter().map(|x| Poly::constant(nvars, x.clone())).collect())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Poly] {
        &self.comps
    }

    pub fn degree(&self) -> u32 {
        self.comps.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    pub fn min_coef_val(&self) -> Val {
        self.comps.iter().map(|c| c.min_coef_val()).min().unwrap_or(Val::Inf)
    }

    pub fn eval<R: Ring>(&self, pt: &[R], like: &R) -> Result<Vec<R>> {
        self.comps.iter().map(|c| c.eval(pt, like)).collect()
    }

    pub fn eval_scalar(&self, pt: &[PadicScalar], ctx: &PadicContext) -> Result<Vec<PadicScalar>> {
        self.eval(pt, &PadicScalar::zero(ctx))
    }

    pub fn eval_approx(&self, pt: &[PadicScalar], ctx: &PadicContext) -> Result<Vec<Approx>> {
        self.comps.iter().map(|c| c.eval_approx(pt, ctx)).collect()
    }

    pub fn eval_at_approx(&self, pt: &[Approx], ctx: &PadicContext) -> Result<Vec<Approx>> {
        self.comps.iter().map(|c| c.eval_at_approx(pt, ctx)).collect()
    }

    pub fn map(&self, f: impl Fn(&Poly) -> Result<Poly>) -> Result<PolyMap> {
        let comps = self.comps.iter().map(f).collect::<Result<Vec<_>>>()?;
        let nvars = comps.first().map_or(self.nvars, |c| c.nvars());
        Ok(PolyMap { nvars, comps })
    }

    pub fn add(&self, o: &PolyMap) -> Result<PolyMap> {
        let comps = self.comps.iter().zip(&o.comps).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(PolyMap { nvars: self.nvars, comps })
    }

    pub fn sub(&self, o: &PolyMap) -> Result<PolyMap> {
        let comps = self.comps.iter().zip(&o.comps).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(PolyMap { nvars: self.nvars, comps })
    }

    pub fn scale(&self, c: &PadicScalar) -> PolyMap {
        PolyMap { nvars: self.nvars, comps: self.comps.iter().map(|a| a.scale(c)).collect() }
    }

    /// `self ∘ inner`
    pub fn compose(&self, inner: &PolyMap, ctx: &PadicContext) -> Result<PolyMap> {
        assert_eq!(inner.dim(), self.nvars);
        let comps = self.comps.iter().map(|c| c.compose(&inner.comps, inner.nvars, ctx)).collect::<Result<_>>()?;
        Ok(PolyMap { nvars: inner.nvars, comps })
    }
}
