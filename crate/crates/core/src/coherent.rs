//! First-order differential operators on `ℚ[c,h][f_m]` transporting the
//! Virasoro action on `V*(c,h)` through the four pairings
//! `⟨G_f y, x⟩` (𝒫), `⟨G_f⁻¹ y, x⟩` (𝒬) for `f` at 0 and
//! `⟨y, G_f x⟩` (ℛ), `⟨y, G_f⁻¹ x⟩` (𝒮) for `f` at ∞.
//!
//! Operators are exact: the coefficient of `∂/∂f_m` is a finite polynomial
//! even when it mentions coefficients beyond the derivative range.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{fmt_q, q, qr, Monomial, Poly, Q, Var, Weights};
use crate::series::{self, Basepoint, Germ, Laurent};
use crate::verma::{c_kappa, h_kappa};

/// `zeroth + Σ_m first[m] ∂/∂f_m`.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct DiffOperator {
    pub zeroth: Poly,
    pub first: BTreeMap<i32, Poly>,
}

impl DiffOperator {
    pub fn zero() -> Self {
        Self::default()
    }
    pub fn scalar(p: Poly) -> Self {
        DiffOperator { zeroth: p, first: BTreeMap::new() }
    }
    pub fn partial(m: i32) -> Self {
        DiffOperator { zeroth: Poly::zero(), first: [(m, Poly::one())].into() }
    }

    pub fn apply(&self, p: &Poly) -> Poly {
        let mut out = &self.zeroth * p;
        for (&m, c) in &self.first {
            let d = p.derivative(Var::F(m));
            if !d.is_zero() {
                out += &(c * &d);
            }
        }
        out
    }

    /// Only the derivative part.
    pub fn derivation(&self, p: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (&m, c) in &self.first {
            let d = p.derivative(Var::F(m));
            if !d.is_zero() {
                out += &(c * &d);
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.zeroth += &o.zeroth;
        for (m, c) in &o.first {
            *r.first.entry(*m).or_default() += c;
        }
        r.first.retain(|_, c| !c.is_zero());
        r
    }

    pub fn scale(&self, k: &Poly) -> Self {
        DiffOperator {
            zeroth: &self.zeroth * k,
            first: self.first.iter().map(|(m, c)| (*m, c * k)).filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    /// `[A, B]`, again first order.
    pub fn commutator(&self, o: &Self) -> Self {
        let mut first = BTreeMap::new();
        let keys: std::collections::BTreeSet<i32> = self.first.keys().chain(o.first.keys()).copied().collect();
        for m in keys {
            let a = o.first.get(&m).map_or_else(Poly::zero, |c| self.derivation(c));
            let b = self.first.get(&m).map_or_else(Poly::zero, |c| o.derivation(c));
            let d = &a - &b;
            if !d.is_zero() {
                first.insert(m, d);
            }
        }
        DiffOperator { zeroth: &self.derivation(&o.zeroth) - &o.derivation(&self.zeroth), first }
    }

    /// Specialize `c`, `h`.
    pub fn specialize(&self, c: &Q, h: &Q) -> Self {
        let s = |p: &Poly| p.subst_q(&[(Var::C, c.clone()), (Var::H, h.clone())]);
        DiffOperator {
            zeroth: s(&self.zeroth),
            first: self.first.iter().map(|(m, p)| (*m, s(p))).filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    /// Keep only `∂/∂f_m` with `|m| ≤ n`.
    pub fn restrict(&self, n: usize) -> Self {
        DiffOperator {
            zeroth: self.zeroth.clone(),
            first: self.first.iter().filter(|(m, _)| m.unsigned_abs() as usize <= n).map(|(m, c)| (*m, c.clone())).collect(),
        }
    }
}

impl fmt::Display for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = vec![];
        if !self.zeroth.is_zero() {
            parts.push(self.zeroth.to_string());
        }
        let order: Vec<_> = if self.first.keys().all(|m| *m < 0) {
            self.first.iter().rev().collect()
        } else {
            self.first.iter().collect()
        };
        for (m, c) in order {
            if c == &Poly::one() {
                parts.push(format!("d/df{m}"));
            } else if c.len() == 1 {
                parts.push(format!("{c}*d/df{m}"));
            } else {
                parts.push(format!("({c})*d/df{m}"));
            }
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", parts.join(" + ").replace("+ -", "- "))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Rep {
    P,
    Q,
    R,
    S,
}

fn cache() -> &'static Mutex<HashMap<(Rep, i32, usize), DiffOperator>> {
    static C: OnceLock<Mutex<HashMap<(Rep, i32, usize), DiffOperator>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(rep: Rep, n: i32, big_n: usize, build: impl FnOnce() -> Result<DiffOperator>) -> Result<DiffOperator> {
    if let Some(op) = cache().lock().unwrap().get(&(rep, n, big_n)) {
        return Ok(op.clone());
    }
    let op = build()?;
    cache().lock().unwrap().insert((rep, n, big_n), op.clone());
    Ok(op)
}

fn c_var() -> Poly {
    Poly::var(Var::C)
}
fn h_var() -> Poly {
    Poly::var(Var::H)
}

/// `∮ a(w)` with the formal residue convention of the series module.
fn res(l: &Laurent) -> Result<Poly> {
    l.residue()
}

/// Formal germ with enough room for operators on `∂/∂f_m`, `|m| ≤ n`, of
/// grading shift `n_op`.
fn formal_for(bp: Basepoint, big_n: usize, n_op: i32) -> Germ {
    Germ::formal(bp, big_n + n_op.unsigned_abs() as usize + 2)
}

/// `𝒫_n`: `⟨G_f L_n y, x⟩ = 𝒫_n ⟨G_f y, x⟩`, derivatives `∂/∂f_1 … ∂/∂f_N`.
pub fn p_rep(n: i32, big_n: usize) -> Result<DiffOperator> {
    cached(Rep::P, n, big_n, || {
        let bp = Basepoint::Origin;
        let f = formal_for(bp, big_n, n);
        let fl = f.to_laurent();
        let mut op = DiffOperator::zero();
        if n >= 1 {
            let fp = fl.pow(n + 1)?;
            for m in n..=big_n as i32 {
                let c = fp.coeff(m + 1)?;
                if !c.is_zero() {
                    op.first.insert(m, -c);
                }
            }
            return Ok(op);
        }
        let d = fl.derivative();
        let base = fl.pow(n + 1)?.mul(&d.inverse()?)?; // f^{n+1}/f′
        let sf = series::schwarzian(&f)?;
        op.zeroth = &res(&base.mul(&sf)?)?.scale(&qr(-1, 12)) * &c_var()
            + &res(&base.shift(-2))? * &h_var();
        let mut acc: BTreeMap<i32, Poly> = BTreeMap::new();
        for m in n..=0 {
            let w = res(&base.shift(-m - 2))?;
            if w.is_zero() {
                continue;
            }
            let hm = series::hm_series(&f, m)?;
            for j in 1..=big_n as i32 {
                let c = hm.coeff(j + 1)?;
                if !c.is_zero() {
                    *acc.entry(j).or_default() += &(&w * &c);
                }
            }
        }
        acc.retain(|_, c| !c.is_zero());
        op.first = acc;
        Ok(op)
    })
}

/// `𝒬_n`: `⟨G_f⁻¹ L_n y, x⟩ = 𝒬_n ⟨G_f⁻¹ y, x⟩`.
pub fn q_rep(n: i32, big_n: usize) -> Result<DiffOperator> {
    cached(Rep::Q, n, big_n, || {
        let bp = Basepoint::Origin;
        let f = formal_for(bp, big_n, n);
        let fl = f.to_laurent();
        let d = fl.derivative();
        let sf = series::schwarzian(&f)?;
        let mut op = DiffOperator::zero();
        if n <= 0 {
            let anom = res(&sf.shift(n + 1))?;
            let w = res(&d.mul(&d)?.mul(&fl.pow(-2)?)?.shift(n + 1))?;
            op.zeroth = &anom.scale(&qr(1, 12)) * &c_var() + &w * &h_var();
        }
        let hn = series::hm_series(&f, n)?;
        for m in n.max(1)..=big_n as i32 {
            let c = hn.coeff(m + 1)?;
            if !c.is_zero() {
                op.first.insert(m, c);
            }
        }
        Ok(op)
    })
}

/// `ℛ_n`: `⟨L_n y, G_f x⟩ = ℛ_n ⟨y, G_f x⟩`, derivatives `∂/∂f_{−1} … ∂/∂f_{−N}`.
pub fn r_rep(n: i32, big_n: usize) -> Result<DiffOperator> {
    cached(Rep::R, n, big_n, || {
        let bp = Basepoint::Infinity;
        let f = formal_for(bp, big_n, n);
        let fl = f.to_laurent();
        let d = fl.derivative();
        let sf = series::schwarzian(&f)?;
        let mut op = DiffOperator::zero();
        if n <= 0 {
            let anom = res(&sf.shift(1 - n))?;
            let w = res(&d.mul(&d)?.mul(&fl.pow(-2)?)?.shift(1 - n))?;
            op.zeroth = &anom.scale(&qr(1, 12)) * &c_var() + &w * &h_var();
        }
        let i_n = series::hm_series(&f, n)?;
        for m in (-(big_n as i32))..=(-1).min(-n) {
            let c = i_n.coeff(m + 1)?;
            if !c.is_zero() {
                op.first.insert(m, -c);
            }
        }
        Ok(op)
    })
}

/// `𝒮_n`, `n ≥ 1`: `⟨L_n y, G_f⁻¹ x⟩ = 𝒮_n ⟨y, G_f⁻¹ x⟩`.
pub fn s_rep(n: i32, big_n: usize) -> Result<DiffOperator> {
    if n < 1 {
        return Err(Error::Invalid("𝒮_n is only built for n ≥ 1".into()));
    }
    cached(Rep::S, n, big_n, || {
        let f = formal_for(Basepoint::Infinity, big_n, n);
        let fp = f.to_laurent().pow(1 - n)?;
        let mut op = DiffOperator::zero();
        for m in (-(big_n as i32))..=-n {
            let c = fp.coeff(m + 1)?;
            if !c.is_zero() {
                op.first.insert(m, c);
            }
        }
        Ok(op)
    })
}

pub fn rep(r: Rep, n: i32, big_n: usize) -> Result<DiffOperator> {
    match r {
        Rep::P => p_rep(n, big_n),
        Rep::Q => q_rep(n, big_n),
        Rep::R => r_rep(n, big_n),
        Rep::S => s_rep(n, big_n),
    }
}

/// `f`-grading `Σ |m|·e_m` of a monomial.
pub fn f_grading(m: &Monomial) -> u32 {
    Weights::f_grading().weight(m)
}

/// All monomials in `f_{±1} … f_{±N}` of grading exactly `g`.
pub fn monomials(bp: Basepoint, g: u32) -> Vec<Poly> {
    let sign = if bp == Basepoint::Origin { 1 } else { -1 };
    crate::pbw::partitions(g)
        .into_iter()
        .map(|p| {
            let mono: Monomial = p.into_iter().map(|(m, e)| (Var::F(sign * m), e)).collect();
            Poly::monomial(mono, Q::one())
        })
        .collect()
}

/// Largest discrepancy-free check of `[ρ(L_n), ρ(L_m)] = (n−m)ρ(L_{n+m}) +
/// (c/12)(n³−n)δ` on all monomials of grading ≤ `g`. Returns the failures.
pub fn check_virasoro(r: Rep, range: &[i32], g: u32) -> Result<Vec<(i32, i32, Poly)>> {
    let bp = if matches!(r, Rep::P | Rep::Q) { Basepoint::Origin } else { Basepoint::Infinity };
    let span = range.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    let big_n = (g + 2 * span) as usize;
    let mut bad = vec![];
    for &n in range {
        for &m in range {
            let (a, b) = (rep(r, n, big_n)?, rep(r, m, big_n)?);
            let k = n + m;
            if r == Rep::S && k < 1 {
                continue;
            }
            let c = rep(r, k, big_n)?;
            let central = if k == 0 {
                let nn = n as i64;
                c_var().scale(&qr(nn * nn * nn - nn, 12))
            } else {
                Poly::zero()
            };
            for d in 0..=g {
                for p in monomials(bp, d) {
                    let lhs = &a.apply(&b.apply(&p)) - &b.apply(&a.apply(&p));
                    let rhs = &c.apply(&p).scale(&q((n - m) as i64)) + &(&central * &p);
                    let diff = &lhs - &rhs;
                    if !diff.is_zero() {
                        bad.push((n, m, diff));
                    }
                }
            }
        }
    }
    Ok(bad)
}

/// An element of the martingale space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRecord {
    pub level: u32,
    pub polynomial: String,
    #[serde(skip)]
    pub poly: Poly,
}

/// Polynomials obtained from `1` by words in `ℛ_{−1}, ℛ_{−2}` at the
/// degenerate parameters of `κ`, reduced level by level to echelon form
/// (pivot: largest monomial, coefficient 1).
pub fn martingale_basis(kappa: &Q, level_max: u32) -> Result<Vec<MartingaleRecord>> {
    let (c, h) = (c_kappa(kappa), h_kappa(kappa));
    let n = level_max as usize;
    let r1 = r_rep(-1, n)?.specialize(&c, &h);
    let r2 = r_rep(-2, n)?.specialize(&c, &h);
    let mut by_level: BTreeMap<u32, Vec<Poly>> = BTreeMap::new();
    by_level.insert(0, vec![Poly::one()]);
    for l in 1..=level_max {
        let mut span = vec![];
        for p in by_level.get(&(l - 1)).into_iter().flatten() {
            span.push(r1.apply(p));
        }
        if l >= 2 {
            for p in by_level.get(&(l - 2)).into_iter().flatten() {
                span.push(r2.apply(p));
            }
        }
        by_level.insert(l, echelon(span));
    }
    Ok(by_level
        .into_iter()
        .flat_map(|(l, ps)| ps.into_iter().map(move |p| MartingaleRecord { level: l, polynomial: p.to_string(), poly: p }))
        .collect())
}

/// Reduced row echelon form of a list of polynomials over ℚ.
pub fn echelon(polys: Vec<Poly>) -> Vec<Poly> {
    let mut rows: Vec<(Monomial, Poly)> = vec![];
    for mut p in polys {
        for (m, r) in &rows {
            let c = p.coeff_mono(m);
            if !c.is_zero() {
                p = &p - &r.scale(&c);
            }
        }
        let Some((m, c)) = p.terms().max_by(|a, b| a.0.cmp(b.0)).map(|(m, c)| (m.clone(), c.clone())) else {
            continue;
        };
        let p = p.scale(&(Q::one() / c));
        for (_, r) in rows.iter_mut() {
            let k = r.coeff_mono(&m);
            if !k.is_zero() {
                *r = &*r - &p.scale(&k);
            }
        }
        rows.push((m, p));
    }
    rows.sort_by(|a, b| b.0.cmp(&a.0));
    rows.into_iter().map(|r| r.1).collect()
}

/// `2𝒮₂ + (κ/2)𝒮₁²` applied to `p`.
pub fn martingale_operator(kappa: &Q, p: &Poly, big_n: usize) -> Result<Poly> {
    let s1 = s_rep(1, big_n)?;
    let s2 = s_rep(2, big_n)?;
    Ok(&s2.apply(p).scale(&q(2)) + &s1.apply(&s1.apply(p)).scale(&(kappa / q(2))))
}

pub fn martingales_json(kappa: &Q, level_max: u32) -> Result<String> {
    let b = martingale_basis(kappa, level_max)?;
    serde_json::to_string_pretty(&serde_json::json!({
        "kappa": fmt_q(kappa),
        "basis": b,
    }))
    .map_err(|e| Error::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_generators() {
        assert_eq!(p_rep(0, 3).unwrap().to_string(), "h + f1*d/df1 + 2*f2*d/df2 + 3*f3*d/df3");
        assert_eq!(q_rep(1, 3).unwrap().to_string(), "d/df1 + 2*f1*d/df2 + 3*f2*d/df3");
        assert_eq!(s_rep(1, 3).unwrap(), DiffOperator::partial(-1));
        assert_eq!(r_rep(-1, 2).unwrap().zeroth, &Poly::f(-1) * &Poly::var(Var::H).scale(&q(-2)));
    }

    #[test]
    fn virasoro_relations() {
        for r in [Rep::P, Rep::Q, Rep::R] {
            assert!(check_virasoro(r, &[-2, -1, 0, 1, 2], 3).unwrap().is_empty(), "{r:?}");
        }
        assert!(check_virasoro(Rep::S, &[1, 2, 3], 3).unwrap().is_empty());
    }

    #[test]
    fn martingales_annihilated() {
        let k = qr(7, 3);
        let b = martingale_basis(&k, 4).unwrap();
        assert_eq!(b.iter().filter(|r| r.level == 1).count(), 1);
        for r in &b {
            assert!(martingale_operator(&k, &r.poly, 6).unwrap().is_zero(), "{}", r.polynomial);
        }
    }

    /// `ρ_n ⟨·⟩_y = ⟨·⟩_{L_n y}` with the pairing computed in the module.
    #[test]
    fn duality_with_module_pairing() {
        use crate::deform::{build_g, build_g_inverse};
        use crate::verma::{basis, DualVector, VermaParams, VermaVector};
        let t = 6;
        let params = VermaParams::formal();
        let x = VermaVector::highest(&params);
        for bp in [Basepoint::Origin, Basepoint::Infinity] {
            let f = Germ::formal(bp, t);
            let g = build_g(&f, t).unwrap().unipotent;
            let gi = build_g_inverse(&f, t).unwrap().unipotent;
            let pair = |inv: bool, y: &DualVector| -> Poly {
                let u = if inv { &gi } else { &g };
                match bp {
                    Basepoint::Origin => y.act(u).pair(&x),
                    Basepoint::Infinity => y.pair(&x.act(u)),
                }
            };
            for l in 0..=3u32 {
                for w in basis(l) {
                    let y = DualVector::basis(&params, w);
                    for n in -2..=2 {
                        if l as i32 - n < 0 {
                            continue;
                        }
                        let ly = y.act_gen(n);
                        let cases: Vec<(Rep, bool)> = match bp {
                            Basepoint::Origin => vec![(Rep::P, false), (Rep::Q, true)],
                            Basepoint::Infinity if n >= 1 => vec![(Rep::R, false), (Rep::S, true)],
                            Basepoint::Infinity => vec![(Rep::R, false)],
                        };
                        for (r, inv) in cases {
                            let op = rep(r, n, t).unwrap();
                            assert_eq!(op.apply(&pair(inv, &y)), pair(inv, &ly), "{r:?}_{n} on y of level {l}");
                        }
                        if bp == Basepoint::Origin && n >= 1 {
                            let lhs = y.act(&gi).act_gen(n).pair(&x);
                            assert_eq!(lhs, -p_rep(n, t).unwrap().apply(&pair(true, &y)));
                        }
                    }
                }
            }
        }
    }
}
