//! Scalars and vectors over Q_p with N significant digits.
//!
//! A scalar is one of
//! * exact zero,
//! * an exact value `p^v * u` with `u` a signed integer, `p ∤ u`, `|u| < p^N`,
//! * an inexact value `p^v * u` whose unit is known modulo `p^r`, `1 <= r <= N`.
//!
//! Results that do not fit in N digits are rounded and become inexact; the
//! absolute precision of an inexact value is `v + r`. A sum of inexact
//! operands whose known digits all cancel raises [`Error::PrecisionLoss`].

use std::cmp::min;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Extended valuation: a finite integer or +∞ (the valuation of exact zero).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    Fin(i64),
    Inf,
}

impl Val {
    pub fn fin(self) -> Option<i64> {
        match self {
            Val::Fin(v) => Some(v),
            Val::Inf => None,
        }
    }

    pub fn is_inf(self) -> bool {
        self == Val::Inf
    }

    pub fn plus(self, k: i64) -> Val {
        match self {
            Val::Fin(v) => Val::Fin(v + k),
            Val::Inf => Val::Inf,
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Fin(v) => write!(f, "{v}"),
            Val::Inf => write!(f, "inf"),
        }
    }
}

/// Residues and signed units. Contexts with `p^(N+2) < 2^62` stay in machine words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Nat {
    S(u64),
    B(BigUint),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Int {
    S(i64),
    B(BigInt),
}

impl Nat {
    fn is_zero(&self) -> bool {
        match self {
            Nat::S(x) => *x == 0,
            Nat::B(x) => x.is_zero(),
        }
    }

    fn to_big(&self) -> BigUint {
        match self {
            Nat::S(x) => BigUint::from(*x),
            Nat::B(x) => x.clone(),
        }
    }
}

impl Int {
    fn to_big(&self) -> BigInt {
        match self {
            Int::S(x) => BigInt::from(*x),
            Int::B(x) => x.clone(),
        }
    }
}

struct Inner {
    p: u32,
    n: u32,
    small: bool,
    pows: Vec<Nat>,
}

/// Prime `p` and number of significant digits `N`.
#[derive(Clone)]
pub struct PadicContext(Arc<Inner>);

impl PartialEq for PadicContext {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.p == other.0.p && self.0.n == other.0.n)
    }
}
impl Eq for PadicContext {}

impl fmt::Debug for PadicContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q_{}(N={})", self.0.p, self.0.n)
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut q = 2;
    while q * q <= p {
        if p.is_multiple_of(q) {
            return false;
        }
        q += 1;
    }
    true
}

impl PadicContext {
    pub fn new(p: u32, n: u32) -> Result<Self> {
        if !is_prime(p as u64) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        if n == 0 {
            return Err(Error::Invalid("precision must be at least 1".into()));
        }
        let small = BigUint::from(p).pow(n + 2) < BigUint::from(1u64 << 62);
        let pows = (0..=n + 2)
            .map(|e| {
                let b = BigUint::from(p).pow(e);
                if small {
                    Nat::S(b.to_u64().unwrap())
                } else {
                    Nat::B(b)
                }
            })
            .collect();
        Ok(PadicContext(Arc::new(Inner { p, n, small, pows })))
    }

    pub fn p(&self) -> u32 {
        self.0.p
    }

    /// Number of significant digits N.
    pub fn prec(&self) -> u32 {
        self.0.n
    }

    pub fn p_pow(&self, e: u32) -> BigUint {
        BigUint::from(self.0.p).pow(e)
    }

    fn nat(&self, b: BigUint) -> Nat {
        if self.0.small {
            Nat::S(b.to_u64().expect("residue exceeds word range"))
        } else {
            Nat::B(b)
        }
    }

    fn modulus(&self, r: u32) -> &Nat {
        &self.0.pows[r as usize]
    }

    fn reduce(&self, a: &Nat, r: u32) -> Nat {
        match (a, self.modulus(r)) {
            (Nat::S(x), Nat::S(m)) => Nat::S(x % m),
            (x, m) => Nat::B(x.to_big() % m.to_big()),
        }
    }

    fn mulmod(&self, a: &Nat, b: &Nat, r: u32) -> Nat {
        match (a, b, self.modulus(r)) {
            (Nat::S(x), Nat::S(y), Nat::S(m)) => Nat::S(((*x as u128 * *y as u128) % *m as u128) as u64),
            (x, y, m) => Nat::B(x.to_big() * y.to_big() % m.to_big()),
        }
    }

    /// a * p^e mod p^r
    fn shiftmod(&self, a: &Nat, e: i64, r: u32) -> Nat {
        if e >= r as i64 {
            return self.nat(BigUint::zero());
        }
        let pe = self.0.pows[e as usize].clone();
        self.mulmod(a, &pe, r)
    }

    fn addmod(&self, a: &Nat, b: &Nat, r: u32) -> Nat {
        match (a, b, self.modulus(r)) {
            (Nat::S(x), Nat::S(y), Nat::S(m)) => Nat::S((x % m + y % m) % m),
            (x, y, m) => Nat::B((x.to_big() + y.to_big()) % m.to_big()),
        }
    }

    fn submod(&self, a: &Nat, b: &Nat, r: u32) -> Nat {
        match (a, b, self.modulus(r)) {
            (Nat::S(x), Nat::S(y), Nat::S(m)) => Nat::S((x % m + m - y % m) % m),
            (x, y, m) => {
                let m = m.to_big();
                Nat::B((x.to_big() % &m + &m - y.to_big() % &m) % &m)
            }
        }
    }

    /// Splits a nonzero residue into p^e * unit.
    fn strip(&self, a: Nat) -> (u32, Nat) {
        let p = self.0.p as u64;
        match a {
            Nat::S(mut x) => {
                let mut e = 0;
                while x % p == 0 {
                    x /= p;
                    e += 1;
                }
                (e, Nat::S(x))
            }
            Nat::B(mut x) => {
                let mut e = 0;
                let pb = BigUint::from(p);
                while (&x % &pb).is_zero() {
                    x /= &pb;
                    e += 1;
                }
                (e, Nat::B(x))
            }
        }
    }

    fn invmod(&self, a: &Nat, r: u32) -> Nat {
        match (a, self.modulus(r)) {
            (Nat::S(x), Nat::S(m)) => {
                let m = *m as i128;
                let (mut old_r, mut rr) = (*x as i128 % m, m);
                let (mut old_s, mut s) = (1i128, 0i128);
                while rr != 0 {
                    let q = old_r / rr;
                    (old_r, rr) = (rr, old_r - q * rr);
                    (old_s, s) = (s, old_s - q * s);
                }
                Nat::S(old_s.rem_euclid(m) as u64)
            }
            (x, m) => Nat::B(x.to_big().modinv(&m.to_big()).expect("unit is invertible")),
        }
    }

    /// Residue of a signed integer modulo p^r.
    fn int_residue(&self, u: &Int, r: u32) -> Nat {
        match (u, self.modulus(r)) {
            (Int::S(x), Nat::S(m)) => Nat::S((*x as i128).rem_euclid(*m as i128) as u64),
            (x, m) => {
                let m = BigInt::from(m.to_big());
                Nat::B(x.to_big().mod_floor(&m).to_biguint().unwrap())
            }
        }
    }

    fn top(&self) -> BigInt {
        BigInt::from(self.p_pow(self.0.n))
    }

    fn p_pow_i128(&self, e: u32) -> i128 {
        (self.0.p as i128).pow(e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Repr {
    Zero,
    Exact { v: i64, u: Int },
    Inexact { v: i64, r: u32, u: Nat },
}

/// An element of Q_p.
#[derive(Clone)]
pub struct PadicScalar {
    ctx: PadicContext,
    repr: Repr,
}

impl PartialEq for PadicScalar {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.repr == other.repr
    }
}
impl Eq for PadicScalar {}

impl Hash for PadicScalar {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.ctx.0.p.hash(state);
        self.repr.hash(state);
    }
}

/// The result of a difference that may cancel completely.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Approx {
    Value(PadicScalar),
    /// Indistinguishable from zero: known to vanish modulo p^A.
    ZeroMod(i64),
}

impl Approx {
    pub fn div(&self, t: &PadicScalar) -> Result<Approx> {
        match self {
            Approx::Value(a) => Ok(Approx::Value(a.div(t)?)),
            Approx::ZeroMod(a) => match t.valuation() {
                Val::Fin(vt) => Ok(Approx::ZeroMod(a - vt)),
                Val::Inf => Err(Error::DivisionByZero),
            },
        }
    }

    pub fn agrees(&self, s: &PadicScalar) -> bool {
        match self {
            Approx::Value(a) => a.agrees(s),
            Approx::ZeroMod(a) => s.valuation() >= Val::Fin(*a),
        }
    }

    /// Agreement of two approximations at the coarser of their precisions.
    pub fn agrees_approx(&self, o: &Approx) -> bool {
        match (self, o) {
            (_, Approx::Value(b)) => self.agrees(b),
            (Approx::Value(a), _) => o.agrees(a),
            _ => true,
        }
    }

    pub fn abs_prec(&self) -> Val {
        match self {
            Approx::Value(a) => a.abs_prec(),
            Approx::ZeroMod(a) => Val::Fin(*a),
        }
    }

    /// Running sum that tolerates intermediate total cancellation.
    pub fn add_scalar(&self, s: &PadicScalar) -> Approx {
        match self {
            Approx::Value(a) => match a.combine(s, false) {
                Ok(v) => Approx::Value(v),
                Err(z) => Approx::ZeroMod(z),
            },
            Approx::ZeroMod(a) => match s.abs_prec() {
                Val::Fin(b) if b < *a => s.truncate_abs(b),
                _ => s.truncate_abs(*a),
            },
        }
    }

    pub fn add(&self, o: &Approx) -> Approx {
        match (self, o) {
            (_, Approx::Value(b)) => self.add_scalar(b),
            (Approx::Value(a), Approx::ZeroMod(_)) => o.add_scalar(a),
            (Approx::ZeroMod(a), Approx::ZeroMod(b)) => Approx::ZeroMod(*a.min(b)),
        }
    }

    pub fn neg(&self) -> Approx {
        match self {
            Approx::Value(a) => Approx::Value(a.neg()),
            Approx::ZeroMod(a) => Approx::ZeroMod(*a),
        }
    }

    /// A lower bound for the valuation.
    pub fn valuation_bound(&self) -> Val {
        match self {
            Approx::Value(a) => a.valuation(),
            Approx::ZeroMod(a) => Val::Fin(*a),
        }
    }

    /// Sum of all terms; fails only if the total is indistinguishable from zero.
    pub fn sum<'a>(ctx: &PadicContext, terms: impl IntoIterator<Item = &'a PadicScalar>) -> Result<PadicScalar> {
        Self::sum_approx(ctx, terms).value()
    }

    /// The value when only its residue modulo p^a matters: a cancellation
    /// known to at least p^a becomes an exact zero.
    pub fn settle(self, ctx: &PadicContext, a: i64) -> Result<PadicScalar> {
        match self {
            Approx::Value(v) => Ok(v),
            Approx::ZeroMod(b) if b >= a => Ok(PadicScalar::zero(ctx)),
            Approx::ZeroMod(_) => Err(Error::PrecisionLoss),
        }
    }

    /// Sum of all terms, reporting a complete cancellation as [`Approx::ZeroMod`].
    pub fn sum_approx<'a>(ctx: &PadicContext, terms: impl IntoIterator<Item = &'a PadicScalar>) -> Approx {
        terms.into_iter().fold(Approx::Value(PadicScalar::zero(ctx)), |acc, t| acc.add_scalar(t))
    }

    pub fn value(self) -> Result<PadicScalar> {
        match self {
            Approx::Value(a) => Ok(a),
            Approx::ZeroMod(_) => Err(Error::PrecisionLoss),
        }
    }
}

impl fmt::Display for Approx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Approx::Value(a) => write!(f, "{a}"),
            Approx::ZeroMod(a) => write!(f, "O(p^{a})"),
        }
    }
}

/// Unpacked nonzero operand for inexact arithmetic: valuation, residue and
/// relative precision (`None` for exact values).
struct Parts {
    v: i64,
    u: Nat,
    r: Option<u32>,
}

impl PadicScalar {
    pub fn zero(ctx: &PadicContext) -> Self {
        PadicScalar { ctx: ctx.clone(), repr: Repr::Zero }
    }

    pub fn one(ctx: &PadicContext) -> Self {
        Self::from_i64(ctx, 1)
    }

    pub fn from_i64(ctx: &PadicContext, x: i64) -> Self {
        if x == 0 {
            return Self::zero(ctx);
        }
        if ctx.0.small {
            Self::round_small(ctx, 0, x as i128)
        } else {
            Self::round_big(ctx, 0, BigInt::from(x))
        }
    }

    pub fn from_bigint(ctx: &PadicContext, x: &BigInt) -> Self {
        if x.is_zero() {
            return Self::zero(ctx);
        }
        Self::round_big(ctx, 0, x.clone())
    }

    pub fn from_biguint(ctx: &PadicContext, x: &BigUint) -> Self {
        Self::from_bigint(ctx, &BigInt::from(x.clone()))
    }

    pub fn from_ratio(ctx: &PadicContext, num: i64, den: i64) -> Result<Self> {
        Self::from_i64(ctx, num).div(&Self::from_i64(ctx, den))
    }

    /// Exact p^v.
    pub fn p_power(ctx: &PadicContext, v: i64) -> Self {
        Self::from_i64(ctx, 1).shift(v)
    }

    /// Exact `p^v * u`; rounded when `u` needs more than N digits.
    pub fn from_exact(ctx: &PadicContext, v: i64, u: &BigInt) -> Self {
        if u.is_zero() {
            return Self::zero(ctx);
        }
        Self::round_big(ctx, v, u.clone())
    }

    /// Inexact `p^v * unit` known to `r` digits. The unit must be prime to p.
    pub fn from_parts(ctx: &PadicContext, v: i64, r: u32, unit: &BigUint) -> Result<Self> {
        if r == 0 || r > ctx.prec() {
            return Err(Error::Invalid(format!("relative precision {r} outside 1..={}", ctx.prec())));
        }
        if (unit % BigUint::from(ctx.p())).is_zero() {
            return Err(Error::Invalid("unit part divisible by p".into()));
        }
        let u = unit % ctx.p_pow(r);
        Ok(PadicScalar { ctx: ctx.clone(), repr: Repr::Inexact { v, r, u: ctx.nat(u) } })
    }

    /// Inexact value from unit digits, lowest first; precision = number of digits.
    pub fn from_digits(ctx: &PadicContext, v: i64, digits: &[u32]) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::Invalid("nonzero scalar needs at least one digit".into()));
        }
        let p = ctx.p();
        if let Some(d) = digits.iter().find(|&&d| d >= p) {
            return Err(Error::Invalid(format!("digit {d} out of range for p = {p}")));
        }
        if digits[0] == 0 {
            return Err(Error::Invalid("leading digit must be nonzero".into()));
        }
        let mut u = BigUint::zero();
        for &d in digits.iter().rev() {
            u = u * p + d;
        }
        Self::from_parts(ctx, v, digits.len() as u32, &u)
    }

    fn round_small(ctx: &PadicContext, v: i64, s: i128) -> Self {
        debug_assert!(s != 0);
        let p = ctx.p() as i128;
        let (mut s, mut v) = (s, v);
        while s % p == 0 {
            s /= p;
            v += 1;
        }
        let top = ctx.p_pow_i128(ctx.prec());
        let repr = if s.abs() < top {
            Repr::Exact { v, u: Int::S(s as i64) }
        } else {
            Repr::Inexact { v, r: ctx.prec(), u: Nat::S(s.rem_euclid(top) as u64) }
        };
        PadicScalar { ctx: ctx.clone(), repr }
    }

    fn round_big(ctx: &PadicContext, v: i64, s: BigInt) -> Self {
        debug_assert!(!s.is_zero());
        let p = BigInt::from(ctx.p());
        let (mut s, mut v) = (s, v);
        loop {
            let (q, rem) = s.div_rem(&p);
            if !rem.is_zero() {
                break;
            }
            s = q;
            v += 1;
        }
        let top = ctx.top();
        let repr = if s.abs() < top {
            let u = if ctx.0.small { Int::S(s.to_i64().unwrap()) } else { Int::B(s) };
            Repr::Exact { v, u }
        } else {
            Repr::Inexact { v, r: ctx.prec(), u: ctx.nat(s.mod_floor(&top).to_biguint().unwrap()) }
        };
        PadicScalar { ctx: ctx.clone(), repr }
    }

    pub fn ctx(&self) -> &PadicContext {
        &self.ctx
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    /// True for exact zero and exact nonzero values.
    pub fn is_exact(&self) -> bool {
        !matches!(self.repr, Repr::Inexact { .. })
    }

    pub fn valuation(&self) -> Val {
        match &self.repr {
            Repr::Zero => Val::Inf,
            Repr::Exact { v, .. } | Repr::Inexact { v, .. } => Val::Fin(*v),
        }
    }

    /// Known unit digits of an inexact value; `None` when exact.
    pub fn rel_prec(&self) -> Option<u32> {
        match &self.repr {
            Repr::Inexact { r, .. } => Some(*r),
            _ => None,
        }
    }

    pub fn abs_prec(&self) -> Val {
        match &self.repr {
            Repr::Inexact { v, r, .. } => Val::Fin(v + *r as i64),
            _ => Val::Inf,
        }
    }

    /// Signed unit of an exact nonzero value.
    pub fn exact_unit(&self) -> Option<BigInt> {
        match &self.repr {
            Repr::Exact { u, .. } => Some(u.to_big()),
            _ => None,
        }
    }

    /// Unit residue in [0, p^N) (exact) or [0, p^r) (inexact).
    pub fn unit(&self) -> Option<BigUint> {
        match &self.repr {
            Repr::Zero => None,
            Repr::Exact { u, .. } => Some(self.ctx.int_residue(u, self.ctx.prec()).to_big()),
            Repr::Inexact { u, .. } => Some(u.to_big()),
        }
    }

    /// Base-p digits of the unit residue, lowest first: N digits for exact
    /// values, r digits for inexact ones, none for zero.
    pub fn digits(&self) -> Vec<u32> {
        let (Some(u), n) = (self.unit(), self.rel_prec().unwrap_or(self.ctx.prec())) else {
            return Vec::new();
        };
        let p = BigUint::from(self.ctx.p());
        let mut x = u;
        (0..n)
            .map(|_| {
                let d = (&x % &p).to_u32().unwrap();
                x /= &p;
                d
            })
            .collect()
    }

    fn same_ctx(&self, o: &Self) {
        assert!(self.ctx == o.ctx, "p-adic context mismatch");
    }

    fn parts(&self) -> Parts {
        match &self.repr {
            Repr::Zero => unreachable!(),
            Repr::Exact { v, u } => Parts { v: *v, u: self.ctx.int_residue(u, self.ctx.prec()), r: None },
            Repr::Inexact { v, r, u } => Parts { v: *v, u: u.clone(), r: Some(*r) },
        }
    }

    fn exact_combine(&self, o: &Self, negate: bool) -> Self {
        let (Repr::Exact { v: va, u: ua }, Repr::Exact { v: vb, u: ub }) = (&self.repr, &o.repr) else {
            unreachable!()
        };
        let c = &self.ctx;
        let vm = min(*va, *vb);
        let cap = c.prec() as i64 + 2;
        let da = min(va - vm, cap) as u32;
        let db = min(vb - vm, cap) as u32;
        if let (Int::S(x), Int::S(y)) = (ua, ub) {
            let sa = *x as i128 * c.p_pow_i128(da);
            let sb = *y as i128 * c.p_pow_i128(db);
            let s = if negate { sa - sb } else { sa + sb };
            if s == 0 {
                return Self::zero(c);
            }
            return Self::round_small(c, vm, s);
        }
        let sa = ua.to_big() * BigInt::from(c.p_pow(da));
        let sb = ub.to_big() * BigInt::from(c.p_pow(db));
        let s = if negate { sa - sb } else { sa + sb };
        if s.is_zero() {
            return Self::zero(c);
        }
        Self::round_big(c, vm, s)
    }

    /// Sum or difference when at least one side is inexact. `Err(A)` reports
    /// that every digit below p^A cancelled.
    fn inexact_combine(&self, o: &Self, negate: bool) -> std::result::Result<Self, i64> {
        let c = &self.ctx;
        let (a, b) = (self.parts(), o.parts());
        let vm = min(a.v, b.v);
        let abs_a = a.r.map_or(i64::MAX, |r| a.v + r as i64);
        let abs_b = b.r.map_or(i64::MAX, |r| b.v + r as i64);
        let abs = min(min(abs_a, abs_b), vm + c.prec() as i64);
        let w = (abs - vm) as u32;
        let sa = c.shiftmod(&a.u, a.v - vm, w);
        let sb = c.shiftmod(&b.u, b.v - vm, w);
        let s = if negate { c.submod(&sa, &sb, w) } else { c.addmod(&sa, &sb, w) };
        if s.is_zero() {
            return Err(abs);
        }
        let (e, u) = c.strip(s);
        let r = w - e;
        let u = c.reduce(&u, r);
        Ok(PadicScalar { ctx: c.clone(), repr: Repr::Inexact { v: vm + e as i64, r, u } })
    }

    fn combine(&self, o: &Self, negate: bool) -> std::result::Result<Self, i64> {
        self.same_ctx(o);
        match (&self.repr, &o.repr) {
            (Repr::Zero, _) => Ok(if negate { o.neg() } else { o.clone() }),
            (_, Repr::Zero) => Ok(self.clone()),
            (Repr::Exact { .. }, Repr::Exact { .. }) => Ok(self.exact_combine(o, negate)),
            _ => self.inexact_combine(o, negate),
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.combine(o, false).map_err(|_| Error::PrecisionLoss)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.combine(o, true).map_err(|_| Error::PrecisionLoss)
    }

    /// `self - o` without raising on total cancellation.
    pub fn diff(&self, o: &Self) -> Approx {
        match self.combine(o, true) {
            Ok(s) => Approx::Value(s),
            Err(a) => Approx::ZeroMod(a),
        }
    }

    /// Equality at the joint precision of the operands (plain equality when both are exact).
    pub fn agrees(&self, o: &Self) -> bool {
        match self.diff(o) {
            Approx::Value(d) => d.is_zero(),
            Approx::ZeroMod(_) => true,
        }
    }

    /// Lower bound for v(self - o), attained unless the difference cancelled completely.
    pub fn diff_valuation(&self, o: &Self) -> Val {
        match self.diff(o) {
            Approx::Value(d) => d.valuation(),
            Approx::ZeroMod(a) => Val::Fin(a),
        }
    }

    /// The value known only modulo p^a.
    pub fn truncate_abs(&self, a: i64) -> Approx {
        let Val::Fin(v) = self.valuation() else {
            return Approx::ZeroMod(a);
        };
        if v >= a {
            return Approx::ZeroMod(a);
        }
        if self.abs_prec() <= Val::Fin(a) {
            return Approx::Value(self.clone());
        }
        let r = min((a - v) as u64, self.ctx.prec() as u64) as u32;
        let u = self.ctx.reduce(&self.parts().u, r);
        Approx::Value(PadicScalar { ctx: self.ctx.clone(), repr: Repr::Inexact { v, r, u } })
    }

    pub fn neg(&self) -> Self {
        let repr = match &self.repr {
            Repr::Zero => Repr::Zero,
            Repr::Exact { v, u } => Repr::Exact {
                v: *v,
                u: match u {
                    Int::S(x) => Int::S(-x),
                    Int::B(x) => Int::B(-x),
                },
            },
            Repr::Inexact { v, r, u } => {
                let u = self.ctx.submod(&self.ctx.nat(BigUint::zero()), u, *r);
                Repr::Inexact { v: *v, r: *r, u }
            }
        };
        PadicScalar { ctx: self.ctx.clone(), repr }
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.same_ctx(o);
        let c = &self.ctx;
        match (&self.repr, &o.repr) {
            (Repr::Zero, _) | (_, Repr::Zero) => Self::zero(c),
            (Repr::Exact { v: va, u: ua }, Repr::Exact { v: vb, u: ub }) => match (ua, ub) {
                (Int::S(x), Int::S(y)) => Self::round_small(c, va + vb, *x as i128 * *y as i128),
                _ => Self::round_big(c, va + vb, ua.to_big() * ub.to_big()),
            },
            _ => {
                let (a, b) = (self.parts(), o.parts());
                let r = match (a.r, b.r) {
                    (Some(x), Some(y)) => min(x, y),
                    (Some(x), None) | (None, Some(x)) => x,
                    (None, None) => unreachable!(),
                };
                let u = c.mulmod(&a.u, &b.u, r);
                PadicScalar { ctx: c.clone(), repr: Repr::Inexact { v: a.v + b.v, r, u } }
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        let c = &self.ctx;
        let repr = match &self.repr {
            Repr::Zero => return Err(Error::DivisionByZero),
            Repr::Exact { v, u } => {
                let b = u.to_big();
                if b.abs().is_one() {
                    Repr::Exact { v: -v, u: u.clone() }
                } else {
                    let n = c.prec();
                    Repr::Inexact { v: -v, r: n, u: c.invmod(&c.int_residue(u, n), n) }
                }
            }
            Repr::Inexact { v, r, u } => Repr::Inexact { v: -v, r: *r, u: c.invmod(u, *r) },
        };
        Ok(PadicScalar { ctx: c.clone(), repr })
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        if self.is_exact() && o.is_exact() {
            if o.is_zero() {
                return Err(Error::DivisionByZero);
            }
            if self.is_zero() {
                return Ok(self.clone());
            }
            // exact quotient when the divisor's unit divides the dividend's
            let (a, b) = (self.exact_unit().unwrap(), o.exact_unit().unwrap());
            let (q, r) = a.div_rem(&b);
            if r.is_zero() {
                let v = self.valuation().fin().unwrap() - o.valuation().fin().unwrap();
                return Ok(Self::from_exact(&self.ctx, v, &q));
            }
        }
        Ok(self.mul(&o.inv()?))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(&self.ctx);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Multiplies by p^e; no digits are lost.
    pub fn shift(&self, e: i64) -> Self {
        let mut out = self.clone();
        match &mut out.repr {
            Repr::Zero => {}
            Repr::Exact { v, .. } | Repr::Inexact { v, .. } => *v += e,
        }
        out
    }

    /// Residue in [0, p^m) of an integral value; inexact values need absolute precision ≥ m.
    pub fn residue(&self, m: u32) -> Result<BigUint> {
        let modulus = self.ctx.p_pow(m);
        match &self.repr {
            Repr::Zero => Ok(BigUint::zero()),
            Repr::Exact { v, u } => {
                if *v < 0 {
                    return Err(Error::NotIntegral);
                }
                if *v >= m as i64 {
                    return Ok(BigUint::zero());
                }
                let x = u.to_big() * BigInt::from(self.ctx.p_pow(*v as u32));
                Ok(x.mod_floor(&BigInt::from(modulus)).to_biguint().unwrap())
            }
            Repr::Inexact { v, r, u } => {
                if *v < 0 {
                    return Err(Error::NotIntegral);
                }
                if *v >= m as i64 {
                    return Ok(BigUint::zero());
                }
                if v + (*r as i64) < m as i64 {
                    return Err(Error::PrecisionLoss);
                }
                Ok((u.to_big() * self.ctx.p_pow(*v as u32)) % modulus)
            }
        }
    }
}

impl fmt::Debug for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Zero => write!(f, "0"),
            Repr::Exact { v, u } => {
                if *v == 0 {
                    write!(f, "{}", u.to_big())
                } else {
                    write!(f, "{}*{}^{}", u.to_big(), self.ctx.p(), v)
                }
            }
            Repr::Inexact { v, .. } => {
                let ds: Vec<String> = self.digits().iter().map(|d| d.to_string()).collect();
                write!(f, "{}^{}*[{}]", self.ctx.p(), v, ds.join(","))
            }
        }
    }
}

/// An element of Q_p^d with the maximum norm.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicVector(pub Vec<PadicScalar>);

impl PadicVector {
    pub fn new(coords: Vec<PadicScalar>) -> Self {
        PadicVector(coords)
    }

    pub fn zeros(ctx: &PadicContext, d: usize) -> Self {
        PadicVector(vec![PadicScalar::zero(ctx); d])
    }

    pub fn from_i64s(ctx: &PadicContext, xs: &[i64]) -> Self {
        PadicVector(xs.iter().map(|&x| PadicScalar::from_i64(ctx, x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[PadicScalar] {
        &self.0
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.0.iter().zip(&o.0).map(|(a, b)| a.add(b)).collect::<Result<_>>().map(PadicVector)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.0.iter().zip(&o.0).map(|(a, b)| a.sub(b)).collect::<Result<_>>().map(PadicVector)
    }

    pub fn neg(&self) -> Self {
        PadicVector(self.0.iter().map(|a| a.neg()).collect())
    }

    /// Sum needed only modulo p^a; see [`Approx::settle`].
    pub fn add_mod(&self, o: &Self, a: i64) -> Result<Self> {
        let o: Vec<Approx> = o.0.iter().cloned().map(Approx::Value).collect();
        self.add_approx_mod(&o, a)
    }

    pub fn add_approx_mod(&self, o: &[Approx], a: i64) -> Result<Self> {
        self.0
            .iter()
            .zip(o)
            .map(|(x, y)| Approx::Value(x.clone()).add(y).settle(x.ctx(), a))
            .collect::<Result<_>>()
            .map(PadicVector)
    }

    pub fn scale(&self, t: &PadicScalar) -> Self {
        PadicVector(self.0.iter().map(|a| a.mul(t)).collect())
    }

    /// `self + t*y`
    pub fn axpy(&self, t: &PadicScalar, y: &Self) -> Result<Self> {
        self.add(&y.scale(t))
    }

    /// Valuation m of the maximum norm p^(-m); +∞ for the zero vector.
    pub fn norm_max(&self) -> Val {
        self.0.iter().map(|a| a.valuation()).min().unwrap_or(Val::Inf)
    }

    pub fn agrees(&self, o: &Self) -> bool {
        self.0.len() == o.0.len() && self.0.iter().zip(&o.0).all(|(a, b)| a.agrees(b))
    }

    pub fn diff(&self, o: &Self) -> Vec<Approx> {
        self.0.iter().zip(&o.0).map(|(a, b)| a.diff(b)).collect()
    }

    pub fn diff_valuation(&self, o: &Self) -> Val {
        self.0.iter().zip(&o.0).map(|(a, b)| a.diff_valuation(b)).min().unwrap_or(Val::Inf)
    }

    pub fn abs_prec(&self) -> Val {
        self.0.iter().map(|a| a.abs_prec()).min().unwrap_or(Val::Inf)
    }

    /// Coordinate residues modulo p^m.
    pub fn residues(&self, m: u32) -> Result<Vec<BigUint>> {
        self.0.iter().map(|a| a.residue(m)).collect()
    }
}

impl fmt::Display for PadicVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Checks that every entry of a list of approximate differences vanishes
/// against the given right-hand side.
pub fn approx_agrees(lhs: &[Approx], rhs: &PadicVector) -> bool {
    lhs.len() == rhs.dim() && lhs.iter().zip(rhs.coords()).all(|(a, b)| a.agrees(b))
}
