//! Coefficient rings for polynomial evaluation: Q_p itself and truncated
//! nilpotent extensions Q_p[δ_1..δ_r]/(δ_i^{n_i+1}).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::padic::{Approx, PadicContext, PadicScalar};

pub trait Ring: Clone + fmt::Debug {
    fn ctx(&self) -> &PadicContext;
    fn zero_like(&self) -> Self;
    fn scalar_like(&self, c: &PadicScalar) -> Self;
    fn add(&self, o: &Self) -> Result<Self>;
    fn sub(&self, o: &Self) -> Result<Self>;
    fn mul(&self, o: &Self) -> Result<Self>;
    fn scale(&self, c: &PadicScalar) -> Self;
    /// Image under the reduction to Q_p (all nilpotents set to 0).
    fn std_part(&self) -> PadicScalar;
    fn inv(&self) -> Result<Self>;
    fn is_zero(&self) -> bool;
    fn to_jet(&self) -> Jet;
    fn from_jet(j: Jet) -> Self;
    /// Sum that fails only when the total, not a partial sum, cancels completely.
    fn sum(like: &Self, terms: Vec<Self>) -> Result<Self> {
        terms.iter().try_fold(like.zero_like(), |acc, t| acc.add(t))
    }
}

impl Ring for PadicScalar {
    fn ctx(&self) -> &PadicContext {
        PadicScalar::ctx(self)
    }
    fn zero_like(&self) -> Self {
        PadicScalar::zero(PadicScalar::ctx(self))
    }
    fn scalar_like(&self, c: &PadicScalar) -> Self {
        c.clone()
    }
    fn add(&self, o: &Self) -> Result<Self> {
        PadicScalar::add(self, o)
    }
    fn sub(&self, o: &Self) -> Result<Self> {
        PadicScalar::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        Ok(PadicScalar::mul(self, o))
    }
    fn scale(&self, c: &PadicScalar) -> Self {
        PadicScalar::mul(self, c)
    }
    fn std_part(&self) -> PadicScalar {
        self.clone()
    }
    fn inv(&self) -> Result<Self> {
        PadicScalar::inv(self)
    }
    fn is_zero(&self) -> bool {
        PadicScalar::is_zero(self)
    }
    fn to_jet(&self) -> Jet {
        Jet::constant(PadicScalar::ctx(self), Vec::new(), self.clone())
    }
    fn from_jet(j: Jet) -> Self {
        assert!(j.trunc.is_empty(), "jet still has nilpotent generators");
        j.std_part()
    }
    fn sum(like: &Self, terms: Vec<Self>) -> Result<Self> {
        Approx::sum(like.ctx(), &terms)
    }
}

/// Sparse element of Q_p[δ_1..δ_r]/(δ_i^{trunc_i + 1}).
#[derive(Clone)]
pub struct Jet {
    ctx: PadicContext,
    trunc: Vec<u32>,
    terms: BTreeMap<Vec<u32>, PadicScalar>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet{:?}{{", self.trunc)?;
        for (e, c) in &self.terms {
            write!(f, " {e:?}:{c}")?;
        }
        write!(f, " }}")
    }
}

impl Jet {
    pub fn constant(ctx: &PadicContext, trunc: Vec<u32>, c: PadicScalar) -> Jet {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0; trunc.len()], c);
        }
        Jet { ctx: ctx.clone(), trunc, terms }
    }

    pub fn trunc(&self) -> &[u32] {
        &self.trunc
    }

    /// Embeds into the ring with one more generator, truncated at degree `n`.
    pub fn extend(&self, n: u32) -> Jet {
        let mut trunc = self.trunc.clone();
        trunc.push(n);
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut e = e.clone();
                e.push(0);
                (e, c.clone())
            })
            .collect();
        Jet { ctx: self.ctx.clone(), trunc, terms }
    }

    /// The last generator of `self`'s ring, as an element.
    pub fn last_generator(&self) -> Jet {
        let r = self.trunc.len();
        assert!(r > 0);
        let mut out = Jet { ctx: self.ctx.clone(), trunc: self.trunc.clone(), terms: BTreeMap::new() };
        if self.trunc[r - 1] >= 1 {
            let mut e = vec![0; r];
            e[r - 1] = 1;
            out.terms.insert(e, PadicScalar::one(&self.ctx));
        }
        out
    }

    /// Coefficient of δ_last^n, as an element of the ring without δ_last.
    pub fn coeff_last(&self, n: u32) -> Jet {
        let r = self.trunc.len();
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[r - 1] == n)
            .map(|(e, c)| (e[..r - 1].to_vec(), c.clone()))
            .collect();
        Jet { ctx: self.ctx.clone(), trunc: self.trunc[..r - 1].to_vec(), terms }
    }

    fn accumulate(&mut self, e: Vec<u32>, c: PadicScalar) -> Result<()> {
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            // a coefficient cancelling to the working precision is dropped
            Entry::Occupied(mut slot) => match slot.get().add(&c) {
                Ok(s) if !s.is_zero() => *slot.get_mut() = s,
                _ => {
                    slot.remove();
                }
            },
            Entry::Vacant(slot) => {
                if !c.is_zero() {
                    slot.insert(c);
                }
            }
        }
        Ok(())
    }

    fn check(&self, o: &Jet) {
        assert_eq!(self.trunc, o.trunc, "jets from different rings");
    }

    /// Total nilpotency bound: every product of more than this many nilpotents vanishes.
    fn nil_order(&self) -> u32 {
        self.trunc.iter().sum()
    }
}

impl Ring for Jet {
    fn ctx(&self) -> &PadicContext {
        &self.ctx
    }

    fn zero_like(&self) -> Self {
        Jet { ctx: self.ctx.clone(), trunc: self.trunc.clone(), terms: BTreeMap::new() }
    }

    fn scalar_like(&self, c: &PadicScalar) -> Self {
        Jet::constant(&self.ctx, self.trunc.clone(), c.clone())
    }

    fn add(&self, o: &Self) -> Result<Self> {
        self.check(o);
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.accumulate(e.clone(), c.clone())?;
        }
        Ok(out)
    }

    fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(&PadicScalar::from_i64(&self.ctx, -1)))
    }

    fn mul(&self, o: &Self) -> Result<Self> {
        self.check(o);
        let mut out = self.zero_like();
        for (ea, ca) in &self.terms {
            'next: for (eb, cb) in &o.terms {
                let mut e = Vec::with_capacity(ea.len());
                for i in 0..ea.len() {
                    let s = ea[i] + eb[i];
                    if s > self.trunc[i] {
                        continue 'next;
                    }
                    e.push(s);
                }
                out.accumulate(e, ca.mul(cb))?;
            }
        }
        Ok(out)
    }

    fn scale(&self, c: &PadicScalar) -> Self {
        if c.is_zero() {
            return self.zero_like();
        }
        Jet {
            ctx: self.ctx.clone(),
            trunc: self.trunc.clone(),
            terms: self.terms.iter().map(|(e, a)| (e.clone(), a.mul(c))).collect(),
        }
    }

    fn std_part(&self) -> PadicScalar {
        self.terms
            .get(&vec![0; self.trunc.len()])
            .cloned()
            .unwrap_or_else(|| PadicScalar::zero(&self.ctx))
    }

    fn inv(&self) -> Result<Self> {
        let s = self.std_part();
        if s.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let s_inv = s.inv()?;
        // x = s(1 + n) with n nilpotent; 1/x = s^{-1} Σ (-n)^j
        let mut n = self.scale(&s_inv);
        n.terms.remove(&vec![0; self.trunc.len()]);
        let minus_n = n.scale(&PadicScalar::from_i64(&self.ctx, -1));
        let one = self.scalar_like(&PadicScalar::one(&self.ctx));
        let mut acc = one.clone();
        let mut pw = one;
        for _ in 0..self.nil_order() {
            pw = pw.mul(&minus_n)?;
            if pw.terms.is_empty() {
                break;
            }
            acc = acc.add(&pw)?;
        }
        Ok(acc.scale(&s_inv))
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn to_jet(&self) -> Jet {
        self.clone()
    }

    fn from_jet(j: Jet) -> Self {
        j
    }

    fn sum(like: &Self, terms: Vec<Self>) -> Result<Self> {
        let mut acc: BTreeMap<Vec<u32>, Approx> = BTreeMap::new();
        for t in &terms {
            like.check(t);
            for (e, c) in &t.terms {
                let slot = acc.entry(e.clone()).or_insert_with(|| Approx::Value(PadicScalar::zero(&like.ctx)));
                *slot = slot.add_scalar(c);
            }
        }
        let mut out = like.zero_like();
        for (e, c) in acc {
            if let Approx::Value(c) = c {
                if !c.is_zero() {
                    out.terms.insert(e, c);
                }
            }
        }
        Ok(out)
    }
}
