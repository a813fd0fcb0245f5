//! Finite-dimensional algebras over Q_p given by structure constants,
//! matrix inversion, and the tensor-product inversion construction.

use crate::calculus::IdentityReport;
use crate::error::{Error, Result};
use crate::padic::{Approx, PadicContext, PadicScalar, PadicVector, Val};
use crate::ring::{Jet, Ring};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicMatrix {
    rows: Vec<Vec<PadicScalar>>,
}

impl PadicMatrix {
    pub fn new(rows: Vec<Vec<PadicScalar>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("matrix must be square and nonempty".into()));
        }
        Ok(PadicMatrix { rows })
    }

    pub fn identity(ctx: &PadicContext, n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { PadicScalar::one(ctx) } else { PadicScalar::zero(ctx) }).collect())
            .collect();
        PadicMatrix { rows }
    }

    pub fn from_i64(ctx: &PadicContext, rows: &[&[i64]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&x| PadicScalar::from_i64(ctx, x)).collect()).collect())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<PadicScalar>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> &PadicScalar {
        &self.rows[i][j]
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        let rows = self.mul_approx(o)?.into_iter().map(|r| r.into_iter().map(Approx::value).collect()).collect::<Result<_>>()?;
        Ok(PadicMatrix { rows })
    }

    /// Product whose entries may cancel completely.
    pub fn mul_approx(&self, o: &Self) -> Result<Vec<Vec<Approx>>> {
        let n = self.n();
        if o.n() != n {
            return Err(Error::Invalid("matrix sizes differ".into()));
        }
        let ctx = self.rows[0][0].ctx();
        Ok(self
            .rows
            .iter()
            .map(|row| {
                (0..n)
                    .map(|j| {
                        let terms: Vec<PadicScalar> = row.iter().zip(&o.rows).map(|(a, r)| a.mul(&r[j])).collect();
                        Approx::sum_approx(ctx, &terms)
                    })
                    .collect()
            })
            .collect())
    }

    pub fn mul_vec(&self, v: &[PadicScalar]) -> Result<Vec<PadicScalar>> {
        let ctx = self.rows[0][0].ctx();
        self.rows
            .iter()
            .map(|r| {
                let terms: Vec<PadicScalar> = r.iter().zip(v).map(|(a, b)| a.mul(b)).collect();
                Approx::sum(ctx, &terms)
            })
            .collect()
    }

    /// Entrywise agreement at the available precision.
    pub fn agrees(&self, o: &Self) -> bool {
        self.n() == o.n() && self.rows.iter().zip(&o.rows).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.agrees(y)))
    }
}

/// Gauss-Jordan inversion choosing in each column the pivot of smallest
/// valuation. Returns the inverse and the pivot valuations.
pub fn invert_rows<R: Ring>(mut a: Vec<Vec<R>>) -> Result<(Vec<Vec<R>>, Vec<Val>)> {
    let n = a.len();
    let ctx = a[0][0].ctx().clone();
    let one = PadicScalar::one(&ctx);
    let mut inv: Vec<Vec<R>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { a[0][0].scalar_like(&one) } else { a[0][0].zero_like() }).collect())
        .collect();
    let mut pivots = Vec::with_capacity(n);
    let singular = |_| Error::Singular;
    // an eliminated entry that cancels completely is zero to the precision it was known at
    let settle = |x: Result<R>, like: &R| match x {
        Err(Error::PrecisionLoss) => Ok(like.zero_like()),
        x => x.map_err(singular),
    };
    for col in 0..n {
        let piv = (col..n)
            .filter(|&r| !a[r][col].std_part().is_zero())
            .min_by_key(|&r| a[r][col].std_part().valuation())
            .ok_or(Error::Singular)?;
        a.swap(col, piv);
        inv.swap(col, piv);
        pivots.push(a[col][col].std_part().valuation());
        let pinv = a[col][col].inv().map_err(singular)?;
        for j in 0..n {
            a[col][j] = a[col][j].mul(&pinv).map_err(singular)?;
            inv[col][j] = inv[col][j].mul(&pinv).map_err(singular)?;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                let da = f.mul(&a[col][j]).map_err(singular)?;
                a[r][j] = if j == col { a[r][j].zero_like() } else { settle(a[r][j].sub(&da), &da)? };
                let di = f.mul(&inv[col][j]).map_err(singular)?;
                inv[r][j] = settle(inv[r][j].sub(&di), &di)?;
            }
        }
    }
    Ok((inv, pivots))
}

pub fn mat_inverse(m: &PadicMatrix) -> Result<PadicMatrix> {
    Ok(PadicMatrix { rows: invert_rows(m.rows.clone())?.0 })
}

/// Inverse together with the pivot valuations used.
pub fn mat_inverse_profile(m: &PadicMatrix) -> Result<(PadicMatrix, Vec<Val>)> {
    let (rows, piv) = invert_rows(m.rows.clone())?;
    Ok((PadicMatrix { rows }, piv))
}

/// `e_i e_j = Σ_k t[i][j][k] e_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructAlgebra {
    n: usize,
    t: Vec<PadicScalar>,
    one: Vec<PadicScalar>,
}

impl StructAlgebra {
    /// Validates associativity on basis triples and the unit laws.
    pub fn new(n: usize, t: Vec<PadicScalar>, one: Vec<PadicScalar>) -> Result<Self> {
        if n == 0 || t.len() != n * n * n || one.len() != n {
            return Err(Error::NotAnAlgebra("dimension mismatch".into()));
        }
        let alg = StructAlgebra { n, t, one };
        let ctx = alg.ctx().clone();
        let basis = |i: usize| -> Vec<PadicScalar> {
            (0..n).map(|j| if i == j { PadicScalar::one(&ctx) } else { PadicScalar::zero(&ctx) }).collect()
        };
        let same = |a: &[PadicScalar], b: &[PadicScalar]| a.iter().zip(b).all(|(x, y)| x.agrees(y));
        for i in 0..n {
            let ei = basis(i);
            for j in 0..n {
                let ej = basis(j);
                let eij = alg.mul(&ei, &ej)?;
                for k in 0..n {
                    let ek = basis(k);
                    let l = alg.mul(&eij, &ek)?;
                    let r = alg.mul(&ei, &alg.mul(&ej, &ek)?)?;
                    if !same(&l, &r) {
                        return Err(Error::NotAnAlgebra(format!("(e{i} e{j}) e{k} != e{i} (e{j} e{k})")));
                    }
                }
            }
            if !same(&alg.mul(&alg.one, &ei)?, &ei) || !same(&alg.mul(&ei, &alg.one)?, &ei) {
                return Err(Error::NotAnAlgebra(format!("unit law fails on e{i}")));
            }
        }
        Ok(alg)
    }

    pub fn ctx(&self) -> &PadicContext {
        self.t[0].ctx()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t(&self, i: usize, j: usize, k: usize) -> &PadicScalar {
        &self.t[(i * self.n + j) * self.n + k]
    }

    pub fn constants(&self) -> &[PadicScalar] {
        &self.t
    }

    pub fn one(&self) -> &[PadicScalar] {
        &self.one
    }

    /// Q_p itself.
    pub fn scalars(ctx: &PadicContext) -> Self {
        StructAlgebra { n: 1, t: vec![PadicScalar::one(ctx)], one: vec![PadicScalar::one(ctx)] }
    }

    /// M_m(Q_p) in the basis of matrix units, `E_ab` at index `a m + b`.
    pub fn matrices(ctx: &PadicContext, m: usize) -> Self {
        let n = m * m;
        let mut t = vec![PadicScalar::zero(ctx); n * n * n];
        for a in 0..m {
            for b in 0..m {
                for d in 0..m {
                    // E_ab E_bd = E_ad
                    t[((a * m + b) * n + b * m + d) * n + a * m + d] = PadicScalar::one(ctx);
                }
            }
        }
        let one = (0..n).map(|i| if i / m == i % m { PadicScalar::one(ctx) } else { PadicScalar::zero(ctx) }).collect();
        StructAlgebra { n, t, one }
    }

    /// Q_p[x]/(x^2 - a) in the basis (1, x).
    pub fn quadratic(ctx: &PadicContext, a: &PadicScalar) -> Self {
        let z = PadicScalar::zero(ctx);
        let o = PadicScalar::one(ctx);
        let mut t = vec![z.clone(); 8];
        let idx = |i: usize, j: usize, k: usize| (i * 2 + j) * 2 + k;
        t[idx(0, 0, 0)] = o.clone();
        t[idx(0, 1, 1)] = o.clone();
        t[idx(1, 0, 1)] = o.clone();
        t[idx(1, 1, 0)] = a.clone();
        StructAlgebra { n: 2, t, one: vec![o, z] }
    }

    /// F ⊗ A with basis `e_i ⊗ f_a` at index `i · dim A + a`.
    pub fn tensor(f: &Self, a: &Self) -> Self {
        let (nf, na) = (f.n, a.n);
        let n = nf * na;
        let ctx = f.ctx();
        let mut t = vec![PadicScalar::zero(ctx); n * n * n];
        for i in 0..nf {
            for j in 0..nf {
                for k in 0..nf {
                    let tf = f.t(i, j, k);
                    if tf.is_zero() {
                        continue;
                    }
                    for x in 0..na {
                        for y in 0..na {
                            for z in 0..na {
                                let ta = a.t(x, y, z);
                                if !ta.is_zero() {
                                    t[((i * na + x) * n + j * na + y) * n + k * na + z] = tf.mul(ta);
                                }
                            }
                        }
                    }
                }
            }
        }
        let one = (0..n).map(|idx| f.one[idx / na].mul(&a.one[idx % na])).collect();
        StructAlgebra { n, t, one }
    }

    pub fn mul(&self, x: &[PadicScalar], y: &[PadicScalar]) -> Result<Vec<PadicScalar>> {
        self.mul_ring(x, y)
    }

    /// Product with coordinates in any coefficient ring.
    pub fn mul_ring<R: Ring>(&self, x: &[R], y: &[R]) -> Result<Vec<R>> {
        let like = x.first().ok_or_else(|| Error::Invalid("empty element".into()))?.zero_like();
        self.product_terms(x, y)?.into_iter().map(|ts| R::sum(&like, ts)).collect()
    }

    /// Scalar product whose coordinates may cancel to zero at the working
    /// precision; those come back as [`Approx::ZeroMod`].
    pub fn mul_approx(&self, x: &[PadicScalar], y: &[PadicScalar]) -> Result<Vec<Approx>> {
        let zero = Approx::Value(PadicScalar::zero(self.ctx()));
        Ok(self.product_terms(x, y)?.into_iter().map(|ts| ts.iter().fold(zero.clone(), |acc, t| acc.add_scalar(t))).collect())
    }

    /// `x y z` with each coordinate summed once over all index triples.
    pub fn mul3_approx(&self, x: &[PadicScalar], y: &[PadicScalar], z: &[PadicScalar]) -> Result<Vec<Approx>> {
        let n = self.n;
        let pairs = self.product_terms(x, y)?;
        let zero = Approx::Value(PadicScalar::zero(self.ctx()));
        let mut out = vec![Vec::new(); n];
        for (a, terms) in pairs.iter().enumerate() {
            for xy in terms {
                for (l, zl) in z.iter().enumerate() {
                    if zl.is_zero() {
                        continue;
                    }
                    let w = xy.mul(zl);
                    for (k, o) in out.iter_mut().enumerate() {
                        let c = self.t(a, l, k);
                        if !c.is_zero() {
                            o.push(w.mul(c));
                        }
                    }
                }
            }
        }
        Ok(out.into_iter().map(|ts| ts.iter().fold(zero.clone(), |acc, t| acc.add_scalar(t))).collect())
    }

    /// Per output coordinate `k`, the terms `x_i y_j t_ijk`.
    fn product_terms<R: Ring>(&self, x: &[R], y: &[R]) -> Result<Vec<Vec<R>>> {
        let n = self.n;
        if x.len() != n || y.len() != n {
            return Err(Error::Invalid(format!("expected {n} coordinates")));
        }
        let mut out: Vec<Vec<R>> = vec![Vec::new(); n];
        for i in 0..n {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if y[j].is_zero() {
                    continue;
                }
                let xy = x[i].mul(&y[j])?;
                for (k, o) in out.iter_mut().enumerate() {
                    let c = self.t(i, j, k);
                    if !c.is_zero() {
                        o.push(xy.scale(c));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix of `y ↦ a y`.
    pub fn left_regular<R: Ring>(&self, a: &[R]) -> Result<Vec<Vec<R>>> {
        let n = self.n;
        let mut m = vec![vec![a[0].zero_like(); n]; n];
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for j in 0..n {
                for (k, row) in m.iter_mut().enumerate() {
                    let c = self.t(i, j, k);
                    if !c.is_zero() {
                        row[j] = row[j].add(&ai.scale(c))?;
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn inverse_ring<R: Ring>(&self, a: &[R]) -> Result<Vec<R>> {
        let lam = self.left_regular(a)?;
        let (inv, _) = invert_rows(lam).map_err(|_| Error::NotAUnit)?;
        let one: Vec<R> = self.one.iter().map(|c| a[0].scalar_like(c)).collect();
        inv.iter()
            .map(|row| row.iter().zip(&one).try_fold(a[0].zero_like(), |acc, (r, o)| acc.add(&r.mul(o)?)))
            .collect()
    }
}

pub fn alg_mul(a: &StructAlgebra, x: &[PadicScalar], y: &[PadicScalar]) -> Result<Vec<PadicScalar>> {
    a.mul(x, y)
}

/// Solves `λ(a) x = 1` through the left regular representation.
pub fn alg_inverse(a: &StructAlgebra, x: &[PadicScalar]) -> Result<Vec<PadicScalar>> {
    a.inverse_ring(x)
}

/// The matrix `S(z)` over A with entries `δ_kj + Σ_i z_i t^F_{ijk}`.
pub fn s_matrix(f: &StructAlgebra, a: &StructAlgebra, z: &[Vec<PadicScalar>]) -> Result<Vec<Vec<Vec<PadicScalar>>>> {
    let n = f.dim();
    let ctx = f.ctx();
    let mut s = vec![vec![vec![PadicScalar::zero(ctx); a.dim()]; n]; n];
    for (k, row) in s.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            if k == j {
                *entry = a.one().to_vec();
            }
            for (i, zi) in z.iter().enumerate() {
                let c = f.t(i, j, k);
                if c.is_zero() {
                    continue;
                }
                for (e, zc) in entry.iter_mut().zip(zi) {
                    *e = e.add(&zc.mul(c))?;
                }
            }
        }
    }
    Ok(s)
}

/// `ρ(z) = -S(z)^{-1} z`, so that `(1 + φ(z)) (1 + φ(ρ(z))) = 1` in F ⊗ A
/// where `φ(z) = Σ e_i ⊗ z_i`.
pub fn tensor_right_inverse(f: &StructAlgebra, a: &StructAlgebra, z: &[Vec<PadicScalar>]) -> Result<Vec<Vec<PadicScalar>>> {
    let (n, na) = (f.dim(), a.dim());
    if z.len() != n || z.iter().any(|zi| zi.len() != na) {
        return Err(Error::Invalid(format!("expected {n} elements of dimension {na}")));
    }
    let s = s_matrix(f, a, z)?;
    // block (k, j) of the Q_p matrix is λ(a_kj)
    let ctx = f.ctx();
    let mut big = vec![vec![PadicScalar::zero(ctx); n * na]; n * na];
    for k in 0..n {
        for j in 0..n {
            let lam = a.left_regular(&s[k][j])?;
            for (r, lrow) in lam.iter().enumerate() {
                for (c, x) in lrow.iter().enumerate() {
                    big[k * na + r][j * na + c] = x.clone();
                }
            }
        }
    }
    let (inv, _) = invert_rows(big).map_err(|_| Error::SMatrixSingular)?;
    let flat: Vec<PadicScalar> = z.iter().flatten().cloned().collect();
    // a coordinate that cancels completely is zero to the precision of z
    let sol: Vec<PadicScalar> = inv
        .iter()
        .map(|r| match Approx::sum_approx(ctx, &r.iter().zip(&flat).map(|(a, b)| a.mul(b)).collect::<Vec<_>>()) {
            Approx::Value(x) => x.neg(),
            Approx::ZeroMod(_) => PadicScalar::zero(ctx),
        })
        .collect();
    Ok(sol.chunks(na).map(<[PadicScalar]>::to_vec).collect())
}

/// Coordinates of `1 + φ(z)` in F ⊗ A.
pub fn one_plus_phi(f: &StructAlgebra, a: &StructAlgebra, z: &[Vec<PadicScalar>]) -> Result<Vec<PadicScalar>> {
    let na = a.dim();
    let mut out: Vec<PadicScalar> = f.one().iter().flat_map(|c| a.one().iter().map(move |d| c.mul(d))).collect();
    for (i, zi) in z.iter().enumerate() {
        for (x, zc) in zi.iter().enumerate() {
            out[i * na + x] = out[i * na + x].add(zc)?;
        }
    }
    Ok(out)
}

/// Multiplies `(1 + φ(z))(1 + φ(v))` in F ⊗ A and compares with the unit.
pub fn check_tensor_product(f: &StructAlgebra, a: &StructAlgebra, z: &[Vec<PadicScalar>], v: &[Vec<PadicScalar>]) -> Result<IdentityReport> {
    let fa = StructAlgebra::tensor(f, a);
    let prod = fa.mul_approx(&one_plus_phi(f, a, z)?, &one_plus_phi(f, a, v)?)?;
    Ok(IdentityReport::new(prod, PadicVector(fa.one().to_vec())))
}

/// Checks `(inv(x + t v) - inv(x)) / t = -inv(x + t v) v inv(x)`; at `t = 0`
/// the left side is the first-order coefficient of `inv(x + δ v)` over `δ^2 = 0`.
pub fn check_inversion_derivative(a: &StructAlgebra, x: &[PadicScalar], v: &[PadicScalar], t: &PadicScalar) -> Result<IdentityReport> {
    let ix = alg_inverse(a, x)?;
    let neg_v: Vec<PadicScalar> = v.iter().map(|c| c.neg()).collect();
    if t.is_zero() {
        let jx: Vec<Jet> = x
            .iter()
            .zip(v)
            .map(|(xi, vi)| {
                let xj = xi.to_jet().extend(1);
                let d = xj.last_generator();
                xj.add(&vi.to_jet().extend(1).mul(&d)?)
            })
            .collect::<Result<_>>()?;
        let inv = a.inverse_ring(&jx)?;
        let lhs = inv.iter().map(|c| Approx::Value(PadicScalar::from_jet(c.coeff_last(1)))).collect();
        return Ok(IdentityReport::approx(lhs, a.mul3_approx(&ix, &neg_v, &ix)?));
    }
    let moved: Vec<PadicScalar> = x.iter().zip(v).map(|(xi, vi)| xi.add(&vi.mul(t))).collect::<Result<_>>()?;
    let im = alg_inverse(a, &moved)?;
    let lhs = im.iter().zip(&ix).map(|(p, q)| p.diff(q).div(t)).collect::<Result<_>>()?;
    Ok(IdentityReport::approx(lhs, a.mul3_approx(&im, &neg_v, &ix)?))
}
