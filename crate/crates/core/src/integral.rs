//! Sound valuation bounds for polynomial maps on Z_p^n.
//!
//! If `p^c Q` has Z_p-integral coefficients then `p^c Q(z) mod p^L` depends
//! only on `z mod p^L`. Deciding `v(Q(z)) >= target` for every `z` therefore
//! reduces to a finite enumeration modulo `p^(target + c)`.

use num_traits::ToPrimitive;

use crate::balls::checked_pow;
use crate::padic::{PadicScalar, Val};
use crate::poly::PolyMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Holds because every coefficient already has valuation ≥ target.
    ByCoefficients,
    /// Holds by enumerating all residues modulo p^level.
    ByEnumeration { level: u32 },
    /// Fails at this residue point (coordinates in [0, p^level)).
    Fails { point: Vec<u64>, level: u32 },
    Unknown(String),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::ByCoefficients | Verdict::ByEnumeration { .. })
    }
}

/// Upper bound on the number of residue points enumerated by one check.
pub const ENUMERATION_BUDGET: u64 = 1 << 22;

/// Decides whether `v(Q_i(z)) >= target` for all components i and all z in Z_p^n.
/// Enumeration is attempted only up to level `max_level`.
pub fn values_have_valuation(q: &PolyMap, target: i64, max_level: u32, p: u32) -> Verdict {
    let mv = q.min_coef_val();
    let Val::Fin(mv) = mv else {
        return Verdict::ByCoefficients;
    };
    if mv >= target {
        return Verdict::ByCoefficients;
    }
    let c0 = (-mv).max(0);
    let level = target + c0;
    if level > max_level as i64 {
        return Verdict::Unknown(format!("needs enumeration level {level} > {max_level}"));
    }
    let level = level as u32;
    let Some(modulus) = checked_pow(p, level) else {
        return Verdict::Unknown("modulus too large".into());
    };
    let n = q.nvars();
    let count = (modulus as u128).pow(n as u32);
    if count > ENUMERATION_BUDGET as u128 {
        return Verdict::Unknown(format!("{count} residue points exceed the enumeration budget"));
    }
    // residue coefficients of p^c0 * Q
    let mut comps: Vec<Vec<(Vec<u32>, u64)>> = Vec::new();
    for comp in q.comps() {
        let mut terms = Vec::new();
        for (e, c) in comp.terms() {
            let scaled: PadicScalar = c.shift(c0);
            match scaled.residue(level) {
                Ok(r) => {
                    let r = r.to_u64().unwrap();
                    if r != 0 {
                        terms.push((e.clone(), r));
                    }
                }
                Err(_) => return Verdict::Unknown("coefficient known to too few digits".into()),
            }
        }
        comps.push(terms);
    }
    let maxe: Vec<u32> = (0..n)
        .map(|i| comps.iter().flatten().map(|(e, _)| e[i]).max().unwrap_or(0))
        .collect();
    let m = modulus as u128;
    let mut z = vec![0u64; n];
    let mut powers: Vec<Vec<u64>> = vec![Vec::new(); n];
    for _ in 0..count {
        for i in 0..n {
            let row = &mut powers[i];
            row.clear();
            row.push(1 % modulus);
            for k in 1..=maxe[i] as usize {
                let prev = row[k - 1] as u128;
                row.push(((prev * z[i] as u128) % m) as u64);
            }
        }
        for terms in &comps {
            let mut acc: u128 = 0;
            for (e, c) in terms {
                let mut t = *c as u128;
                for (i, &x) in e.iter().enumerate() {
                    if x > 0 {
                        t = t * powers[i][x as usize] as u128 % m;
                    }
                }
                acc = (acc + t) % m;
            }
            if acc != 0 {
                return Verdict::Fails { point: z.clone(), level };
            }
        }
        // next residue point
        for zi in z.iter_mut() {
            *zi += 1;
            if *zi < modulus {
                break;
            }
            *zi = 0;
        }
    }
    Verdict::ByEnumeration { level }
}
