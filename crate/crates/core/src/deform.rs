//! `G_f` for germs at 0 (in `𝒩₊`) and at ∞ (in `𝒩₋`).
//!
//! The primary construction expands `G_f = Σ_K (−)^{|K|}/K! f_K P_K` with the
//! universal elements `P_K` obtained from
//! `P_{K+E_m} = Σ_{I+J=K} K!/(I!J!) C_J(m, m+d(J)) P_I L_{m+d(J)}`,
//! where `C(m,n) = ∮ w^{m+1} f′/f^{n+2} = Σ_J (−)^{|J|}/J! f_J C_J(m,n)`.
//! A second, independent construction integrates `∂G/∂f_m = −G A_m` along
//! the straight path `f_s = z + s(f − z)`.
//!
//! A dilation `f = λ f̂` is split off: `G_f = G_{f̂} λ^{−L₀}`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::pbw::{mult_factorial, partitions, AlgebraElement, Side, Word};
use crate::poly::{qr, Poly, Q, Trunc, Var};
use crate::series::{self, Basepoint, Germ};

/// Multi-index: grading `m` (negative at ∞) → multiplicity.
pub type MultiIndex = BTreeMap<i32, u32>;

pub fn side_of(bp: Basepoint) -> Side {
    match bp {
        Basepoint::Origin => Side::Plus,
        Basepoint::Infinity => Side::Minus,
    }
}

/// `d(K) = Σ m·k_m` (negative at ∞).
pub fn grading(k: &MultiIndex) -> i32 {
    k.iter().map(|(&m, &e)| m * e as i32).sum()
}

pub fn degree(k: &MultiIndex) -> u32 {
    k.values().sum()
}

/// All multi-indices with `1 ≤ |d(K)| ≤ n` on the given side, by grading.
pub fn multi_indices(bp: Basepoint, n: usize) -> Vec<MultiIndex> {
    let sign = match bp {
        Basepoint::Origin => 1,
        Basepoint::Infinity => -1,
    };
    (1..=n as u32)
        .flat_map(partitions)
        .map(|p| p.into_iter().map(|(m, e)| (sign * m, e)).collect())
        .collect()
}

/// `f_K = Π f_m^{k_m}` for a germ.
pub fn f_power(f: &Germ, k: &MultiIndex) -> Poly {
    let mut acc = Poly::one();
    for (&m, &e) in k {
        acc = &acc * &f.coeff(m).pow(e);
    }
    acc
}

fn sub_indices(k: &MultiIndex) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex::new()];
    for (&m, &e) in k {
        let mut next = vec![];
        for j in &out {
            for x in 0..=e {
                let mut jj = j.clone();
                if x > 0 {
                    jj.insert(m, x);
                }
                next.push(jj);
            }
        }
        out = next;
    }
    out
}

fn diff(k: &MultiIndex, j: &MultiIndex) -> MultiIndex {
    k.iter()
        .filter_map(|(&m, &e)| {
            let r = e - j.get(&m).copied().unwrap_or(0);
            (r > 0).then_some((m, r))
        })
        .collect()
}

fn cache<K, V>() -> &'static Mutex<HashMap<K, V>>
where
    K: Send + 'static,
    V: Send + 'static,
{
    // one static per monomorphization
    use std::any::{Any, TypeId};
    static REG: OnceLock<Mutex<HashMap<TypeId, &'static (dyn Any + Sync + Send)>>> = OnceLock::new();
    let reg = REG.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = reg.lock().unwrap();
    let id = TypeId::of::<(K, V)>();
    let entry = *g.entry(id).or_insert_with(|| Box::leak(Box::new(Mutex::new(HashMap::<K, V>::new()))));
    entry.downcast_ref::<Mutex<HashMap<K, V>>>().unwrap()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct CKey(Basepoint, i32, i32);

/// Connection coefficient `C(m,n) = ∮ w^{m+1} f′/f^{n+2}` with formal `f`.
pub fn connection_coeff(bp: Basepoint, m: i32, n: i32) -> Poly {
    let k = CKey(bp, m, n);
    if let Some(p) = cache::<CKey, Poly>().lock().unwrap().get(&k) {
        return p.clone();
    }
    let width = (n - m).unsigned_abs().max(1) as usize;
    let g = Germ::formal(bp, width);
    let p = series::lagrange_weight(&g, m, n, 1).expect("window sized to the request");
    cache::<CKey, Poly>().lock().unwrap().insert(k, p.clone());
    p
}

/// `C_J(m,n)`.
pub fn c_j(bp: Basepoint, j: &MultiIndex, m: i32, n: i32) -> Q {
    if grading(j) != n - m {
        return Q::zero();
    }
    let c = connection_coeff(bp, m, n);
    let mono: crate::poly::Monomial = j.iter().map(|(&k, &e)| (Var::F(k), e)).collect();
    let a = c.coeff_mono(&mono);
    let sign = if degree(j) % 2 == 1 { -Q::one() } else { Q::one() };
    a * sign * mult_factorial(j)
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct PKey(Basepoint, Vec<(i32, u32)>);

/// The universal element `P_K`, peeling the coordinate of smallest `|m|`.
pub fn p_element(bp: Basepoint, k: &MultiIndex) -> AlgebraElement {
    let key = PKey(bp, k.iter().map(|(a, b)| (*a, *b)).collect());
    if let Some(p) = cache::<PKey, AlgebraElement>().lock().unwrap().get(&key) {
        return p.clone();
    }
    let p = if k.is_empty() {
        AlgebraElement::one(side_of(bp), None)
    } else {
        let m = *k.keys().min_by_key(|m| m.abs()).unwrap();
        p_element_peeled(bp, k, m)
    };
    cache::<PKey, AlgebraElement>().lock().unwrap().insert(key, p.clone());
    p
}

/// `P_K` computed by peeling coordinate `m` at the top level.
pub fn p_element_peeled(bp: Basepoint, k: &MultiIndex, m: i32) -> AlgebraElement {
    assert!(k.get(&m).copied().unwrap_or(0) > 0, "peeled coordinate must be present");
    let side = side_of(bp);
    let mut rest = k.clone();
    *rest.get_mut(&m).unwrap() -= 1;
    if rest[&m] == 0 {
        rest.remove(&m);
    }
    let kf = mult_factorial(&rest);
    let mut acc = AlgebraElement::zero(side, None);
    for j in sub_indices(&rest) {
        let i = diff(&rest, &j);
        let n = m + grading(&j);
        let cj = c_j(bp, &j, m, n);
        if cj.is_zero() {
            continue;
        }
        let coef = &kf / (mult_factorial(&i) * mult_factorial(&j)) * cj;
        let pi = p_element(bp, &i);
        let l = AlgebraElement::gen(n, None).with_side(side, None).unwrap();
        let term = pi.multiply(&l).unwrap().scale(&Poly::constant(coef));
        acc = acc.add(&term).unwrap();
    }
    acc
}

/// `G = unipotent · dilation^{−L₀}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationOperator {
    pub unipotent: AlgebraElement,
    pub dilation: Poly,
    pub basepoint: Basepoint,
    pub source: Germ,
}

impl DeformationOperator {
    pub fn truncation(&self) -> u32 {
        self.unipotent.trunc.unwrap_or(0)
    }

    /// `(U₁ μ₁^{−L₀})(U₂ μ₂^{−L₀}) = U₁·D_{μ₁}(U₂)·(μ₁μ₂)^{−L₀}` with
    /// `D_μ(L_n) = μ^n L_n`.
    pub fn compose(&self, other: &DeformationOperator) -> Result<DeformationOperator> {
        if self.basepoint != other.basepoint {
            return Err(Error::BasepointMismatch("operator product".into()));
        }
        let u2 = dilate(&other.unipotent, &self.dilation)?;
        Ok(DeformationOperator {
            unipotent: self.unipotent.multiply(&u2)?,
            dilation: &self.dilation * &other.dilation,
            basepoint: self.basepoint,
            source: series::compose(&self.source, &other.source)?,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.dilation == Poly::one()
            && self.unipotent.terms().len() == 1
            && self.unipotent.scalar_part() == Poly::one()
    }
}

/// `μ^{−L₀} X μ^{L₀}`: every word `w` is scaled by `μ^{grading(w)}`.
pub fn dilate(x: &AlgebraElement, mu: &Poly) -> Result<AlgebraElement> {
    if *mu == Poly::one() {
        return Ok(x.clone());
    }
    let inv = mu.inverse().ok_or_else(|| Error::NotInvertible(format!("dilation {mu}")))?;
    Ok(x.map_coeffs_word(|w, c| {
        let g = w.grading();
        if g >= 0 {
            c * &mu.pow(g as u32)
        } else {
            c * &inv.pow((-g) as u32)
        }
    }))
}

impl AlgebraElement {
    pub fn map_coeffs_word(&self, f: impl Fn(&Word, &Poly) -> Poly) -> AlgebraElement {
        let mut e = AlgebraElement::zero(self.side, self.trunc);
        e.lossy = self.lossy;
        for (w, c) in self.terms() {
            e.add_term(w.clone(), f(w, c));
        }
        e
    }
}

/// `G_f` truncated at grading `n`.
pub fn build_g(f: &Germ, n: usize) -> Result<DeformationOperator> {
    if n > f.truncation {
        return Err(Error::TruncationTooSmall { need: n, have: f.truncation });
    }
    let bp = f.basepoint;
    let side = side_of(bp);
    let tr = Some(n as u32);
    let mut u = AlgebraElement::one(side, tr);
    for k in multi_indices(bp, n) {
        let fk = f_power(f, &k);
        if fk.is_zero() {
            continue;
        }
        let sign = if degree(&k) % 2 == 1 { -Q::one() } else { Q::one() };
        let coef = fk.scale(&(sign / mult_factorial(&k)));
        let pk = p_element(bp, &k).with_side(side, tr)?;
        u = u.add(&pk.scale(&coef))?;
    }
    Ok(DeformationOperator { unipotent: u, dilation: f.scale.clone(), basepoint: bp, source: f.clone() })
}

/// `G_f^{-1} = G_{f^{-1}}`.
pub fn build_g_inverse(f: &Germ, n: usize) -> Result<DeformationOperator> {
    build_g(&series::invert(f)?, n)
}

/// `A_m = Σ_n L_n C(m,n)` through grading `n_max` (formal `f`).
pub fn connection(bp: Basepoint, m: i32, n_max: usize) -> AlgebraElement {
    let side = side_of(bp);
    let tr = Some(n_max as u32);
    let mut a = AlgebraElement::zero(side, tr);
    for n in bp.gradings(n_max) {
        let ok = match bp {
            Basepoint::Origin => n >= m,
            Basepoint::Infinity => n <= m,
        };
        if ok {
            a.add_term(Word::gen(n), connection_coeff(bp, m, n));
        }
    }
    a
}

/// Same `A_m` with its formal coefficients evaluated on a germ.
pub fn connection_at(f: &Germ, m: i32, n_max: usize) -> AlgebraElement {
    let subs: Vec<(Var, Poly)> =
        f.basepoint.gradings(f.truncation).into_iter().map(|k| (Var::F(k), f.coeff(k))).collect();
    connection(f.basepoint, m, n_max).map_coeffs(|p| p.subst(&subs))
}

/// Independent construction of the unipotent part of `G_f` by integrating
/// `dG_s/ds = −G_s Σ_m f_m A_m(f_s)` along `f_s = z + s(f − z)`, grading by
/// grading, as polynomials in `s`.
pub fn build_g_by_path(f: &Germ, n: usize) -> Result<AlgebraElement> {
    let bp = f.basepoint;
    let side = side_of(bp);
    let tr = Some(n as u32);
    let s = Poly::var(Var::S);
    let fs = f.map_coeffs(|c| c * &s);
    // B(s) = Σ_m f_m A_m(f_s), split by grading.
    let mut b = AlgebraElement::zero(side, tr);
    for m in bp.gradings(n) {
        let fm = f.coeff(m);
        if fm.is_zero() {
            continue;
        }
        b = b.add(&connection_at(&fs, m, n).scale(&fm))?;
    }
    let by_grade = |x: &AlgebraElement, d: i32| -> AlgebraElement {
        let g = if bp == Basepoint::Origin { d } else { -d };
        x.grading_part(g)
    };
    let mut parts: Vec<AlgebraElement> = vec![AlgebraElement::one(side, tr)];
    for d in 1..=n as i32 {
        let mut rhs = AlgebraElement::zero(side, tr);
        for d1 in 0..d {
            let bd = by_grade(&b, d - d1);
            if bd.is_zero() {
                continue;
            }
            rhs = rhs.add(&parts[d1 as usize].multiply(&bd)?)?;
        }
        // G^{(d)}(s) = −∫_0^s rhs
        parts.push(rhs.map_coeffs(|p| -integrate_s(p)));
    }
    let mut g = AlgebraElement::zero(side, tr);
    for p in parts {
        g = g.add(&p)?;
    }
    Ok(g.map_coeffs(|p| p.subst_q(&[(Var::S, Q::one())])))
}

fn integrate_s(p: &Poly) -> Poly {
    let mut out = Poly::zero();
    for k in 0..=p.degree_in(Var::S) {
        let c = p.coeff_of(Var::S, k);
        out += &(&c * &Poly::var(Var::S).pow(k + 1)).scale(&qr(1, k as i64 + 1));
    }
    out
}

/// `L_m(f) = (c/12)∮ w^{m+1} Sf + Σ_n L_n ∮ w^{m+1} f′²/f^{n+2}`, through
/// `|n − m| ≤ n_max`.
pub fn conjugate_ln(f: &Germ, m: i32, n_max: usize) -> Result<AlgebraElement> {
    let bp = f.basepoint;
    let mut e = AlgebraElement::zero(Side::Full, None);
    let sch = series::schwarzian(f)?;
    let anomaly = sch.shift(m + 1).residue()?;
    e.add_term(Word::empty(), anomaly.scale(&qr(1, 12)) * Poly::var(Var::C));
    for k in 0..=n_max as i32 {
        let n = match bp {
            Basepoint::Origin => m + k,
            Basepoint::Infinity => m - k,
        };
        let w = series::lagrange_weight(f, m, n, 2)?;
        e.add_term(Word::gen(n), w);
    }
    Ok(e)
}

/// Formal unit germ with its coefficient ring capped at f-grading `n`.
pub fn formal_capped(bp: Basepoint, n: usize) -> (Germ, Trunc) {
    let cap: Trunc = Some(crate::poly::Truncation::f_grading(n as u32));
    (Germ::formal(bp, n).map_coeffs(|c| c.clone().with_trunc(&cap)), cap)
}

/// `G_f^{-1} L_m G_f` by direct normal ordering in the full algebra, with
/// formal `f` and coefficients capped at f-grading `n`.
pub fn conjugate_ln_direct(m: i32, n: usize) -> Result<AlgebraElement> {
    let (f, cap) = formal_capped(Basepoint::Origin, n);
    let g = build_g(&f, n)?.unipotent.with_side(Side::Full, None)?;
    let gi = build_g_inverse(&f, n)?.unipotent.with_side(Side::Full, None)?;
    let l = AlgebraElement::gen(m, None).with_side(Side::Full, None)?.map_coeffs(|p| p.clone().with_trunc(&cap));
    gi.multiply(&l)?.multiply(&g)
}

/// One row of a translation table: `⟨y, LHS·v⟩` and `⟨y, RHS·v⟩` for basis
/// words `y`, `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslationRow {
    pub y: Word,
    pub v: Word,
    pub lhs: Poly,
    pub rhs: Poly,
}

/// `⟨y, e^{−aL₋₁} G_f e^{f(a)L₋₁} v⟩` against `⟨y, G_{f_a} v⟩` with
/// `f_a(z) = f(z+a) − f(a)`, for basis `y`, `v` of level ≤ `levels`.
///
/// Neither side lives in a one-sided completion, so `a` is kept formal and
/// both sides are compared as power series in `a` through `a^order`; `c` and
/// `h` are formal. A rational `a` is substituted into the truncated series
/// when given. `f` must have unit scale and is read as the polynomial its
/// truncation defines.
pub fn translation_conjugate(f: &Germ, a: Option<&Q>, levels: u32, order: u32) -> Result<Vec<TranslationRow>> {
    use crate::poly::Truncation;
    use crate::verma::{basis, DualVector, VermaParams, VermaVector};
    if f.basepoint != Basepoint::Origin {
        return Err(Error::BasepointMismatch("translation acts on germs at 0".into()));
    }
    if f.scale != Poly::one() {
        return Err(Error::Invalid("translation identity is checked for unit-scale germs".into()));
    }
    let cap: Trunc = Some(Truncation::degree(Var::A, order));
    let av = Poly::var(Var::A).with_trunc(&cap);
    // f(z) as polynomial coefficients p_k of z^k
    let deg = f.truncation + 1;
    let mut p: Vec<Poly> = vec![Poly::zero(); deg + 1];
    p[1] = Poly::one();
    for (&m, c) in f.coeffs() {
        p[m as usize + 1] = c.clone();
    }
    // f(z+a) = Σ_k z^k Σ_{j≥k} binom(j,k) p_j a^{j−k}
    let shifted: Vec<Poly> = (0..=deg)
        .map(|k| {
            let mut acc = Poly::zero().with_trunc(&cap);
            for (j, pj) in p.iter().enumerate().skip(k) {
                let b = series::binom_q(&crate::poly::q(j as i64), k as u32);
                acc += &(&(pj * &av.pow((j - k) as u32)) * &Poly::constant(b));
            }
            acc
        })
        .collect();
    let fa_at_a = shifted[0].clone();
    let mu = shifted[1].clone();
    let mu_inv = mu.inverse().ok_or_else(|| Error::NotInvertible("f′(a)".into()))?;
    let coeffs = (2..=deg).map(|k| ((k - 1) as i32, &shifted[k] * &mu_inv)).collect();
    let fa = Germ::new(Basepoint::Origin, f.truncation, mu, coeffs)?;

    let params = VermaParams::formal();
    let g_f = build_g(f, f.truncation.min((levels + order) as usize))?;
    if (g_f.truncation() as u32) < levels + order {
        return Err(Error::TruncationTooSmall { need: (levels + order) as usize, have: f.truncation });
    }
    let g_fa = build_g(&fa, levels as usize)?;
    let exp_l = |t: &Poly, v: &VermaVector| -> VermaVector {
        // e^{t L₋₁} v through t^order (t = O(a))
        let mut out = v.clone();
        let mut term = v.clone();
        for k in 1..=order {
            term = term.act_gen(-1).scale(&t.scale(&crate::poly::qr(1, k as i64)));
            if term.is_zero() {
                break;
            }
            out = out.add(&term);
        }
        out
    };
    let h = Poly::var(Var::H);
    let mut rows = vec![];
    for lv in 0..=levels {
        for vw in basis(lv) {
            let v = VermaVector::basis(&params, vw.clone()).map_coeffs(|c| c.clone().with_trunc(&cap));
            let (base, mid) = crate::verma::apply_operator(&g_f, &exp_l(&fa_at_a, &v))?;
            debug_assert!(base == Poly::one());
            let lhs_v = exp_l(&(-&av), &mid);
            let (base, rhs_v) = crate::verma::apply_operator(&g_fa, &v)?;
            let weight = base.pow_formal(&h).ok_or_else(|| Error::NotInvertible("f′(a)^h".into()))?;
            for ly in 0..=levels {
                for yw in basis(ly) {
                    let y = DualVector::basis(&params, yw.clone());
                    let mut l = y.pair(&lhs_v);
                    let mut r = &y.pair(&rhs_v) * &weight;
                    if let Some(a) = a {
                        l = l.subst_q(&[(Var::A, a.clone())]);
                        r = r.subst_q(&[(Var::A, a.clone())]);
                    }
                    rows.push(TranslationRow { y: yw, v: vw.clone(), lhs: l, rhs: r });
                }
            }
        }
    }
    Ok(rows)
}

/// The two factors of `𝒱_A = G_{A⁻} f′(∞)^{−L₀} · f′(0)^{L₀} G_{A⁺}^{−1}`.
#[derive(Clone, Debug)]
pub struct VertexOperator {
    /// `G_{A⁺} f′(0)^{−L₀}`
    pub plus: DeformationOperator,
    /// `G_{A⁻} f′(∞)^{−L₀}`
    pub minus: DeformationOperator,
}

pub fn vertex_operator(map: &series::RationalMap, n: usize) -> Result<VertexOperator> {
    let g0 = map.germ_at_origin(n)?;
    let gi = map.germ_at_infinity(n)?;
    Ok(VertexOperator { plus: build_g(&g0, n)?, minus: build_g(&gi, n)? })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexTable {
    /// Matrix elements are `ratio^h · value` with `ratio = f′(0)/f′(∞)`.
    pub ratio: Poly,
    pub entries: Vec<(Word, Word, Poly)>,
}

impl VertexOperator {
    /// `⟨y, 𝒱 L_J x⟩` for basis words of level ≤ `levels`, formal `c`, `h`.
    pub fn table(&self, levels: u32) -> Result<VertexTable> {
        use crate::verma::{apply_operator, basis, DualVector, VermaParams, VermaVector};
        if (self.plus.truncation() as u32) < levels || (self.minus.truncation() as u32) < levels {
            return Err(Error::TruncationTooSmall { need: levels as usize, have: self.plus.truncation() as usize });
        }
        let inv = build_g_inverse(&self.plus.source, self.plus.truncation() as usize)?;
        let params = VermaParams::formal();
        let mut ratio = Poly::one();
        let mut entries = vec![];
        for lv in 0..=levels {
            for vw in basis(lv) {
                let v = VermaVector::basis(&params, vw.clone());
                let (b1, w1) = apply_operator(&inv, &v)?;
                let (b2, w2) = apply_operator(&self.minus, &w1)?;
                ratio = &b1 * &b2;
                for ly in 0..=levels {
                    for yw in basis(ly) {
                        entries.push((yw.clone(), vw.clone(), DualVector::basis(&params, yw).pair(&w2)));
                    }
                }
            }
        }
        Ok(VertexTable { ratio, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::q;

    #[test]
    fn first_p_elements() {
        for m in 1..=3 {
            let k: MultiIndex = [(m, 1)].into_iter().collect();
            assert_eq!(p_element(Basepoint::Origin, &k), AlgebraElement::gen(m, None));
        }
        let k: MultiIndex = [(1, 1), (2, 1)].into_iter().collect();
        assert_eq!(p_element(Basepoint::Origin, &k).to_string(), "2*L3 + L2*L1");
    }

    #[test]
    fn peel_choice_is_irrelevant() {
        for bp in [Basepoint::Origin, Basepoint::Infinity] {
            for k in multi_indices(bp, 6) {
                let a = p_element(bp, &k);
                for &m in k.keys() {
                    assert_eq!(p_element_peeled(bp, &k, m), a, "{k:?} peeled at {m}");
                }
            }
        }
    }

    #[test]
    fn pair_element_is_literal_product() {
        for (m, n) in [(1, 2), (2, 1), (1, 3), (-1, -2), (-3, -1)] {
            let k: MultiIndex = if m == n { [(m, 2)].into() } else { [(m, 1), (n, 1)].into() };
            let bp = if m > 0 { Basepoint::Origin } else { Basepoint::Infinity };
            let side = side_of(bp);
            let lit = AlgebraElement::product_of(&[m, n], side, None).unwrap();
            let expect = lit
                .add(&AlgebraElement::gen(m + n, None).with_side(side, None).unwrap().scale(&Poly::int((n + 1) as i64)))
                .unwrap();
            assert_eq!(p_element(bp, &k), expect);
        }
    }

    #[test]
    fn grading_two_expansion() {
        let f = Germ::formal(Basepoint::Origin, 2);
        let g = build_g(&f, 2).unwrap();
        assert_eq!(g.unipotent.to_string(), "1 - f1*L1 + (-f2 + f1^2)*L2 + f1^2/2*L1^2");
    }

    #[test]
    fn path_integration_agrees() {
        let f = Germ::from_q(Basepoint::Origin, 4, &[(1, qr(1, 2)), (2, q(-1)), (3, qr(2, 3)), (4, q(3))]).unwrap();
        assert_eq!(build_g(&f, 4).unwrap().unipotent, build_g_by_path(&f, 4).unwrap());
        let h = Germ::from_q(Basepoint::Infinity, 4, &[(-1, q(2)), (-2, qr(-1, 3)), (-4, q(1))]).unwrap();
        assert_eq!(build_g(&h, 4).unwrap().unipotent, build_g_by_path(&h, 4).unwrap());
    }

    #[test]
    fn identity_germ_gives_one() {
        for bp in [Basepoint::Origin, Basepoint::Infinity] {
            assert!(build_g(&Germ::identity(bp, 5), 5).unwrap().is_identity());
        }
    }

    fn sample_germ(bp: Basepoint, n: usize, seed: u64) -> Germ {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coeffs = bp
            .gradings(n)
            .into_iter()
            .map(|m| (m, Poly::constant(qr(rng.random_range(-5..=5), rng.random_range(1..=4)))))
            .collect();
        Germ::new(bp, n, Poly::constant(qr(rng.random_range(1..=4), rng.random_range(1..=3))), coeffs).unwrap()
    }

    #[test]
    fn anti_homomorphism() {
        for (seed, bp) in [(1, Basepoint::Origin), (2, Basepoint::Infinity)] {
            let f = sample_germ(bp, 4, seed);
            let g = sample_germ(bp, 4, seed + 10);
            let gf = series::compose(&f, &g).unwrap();
            let lhs = build_g(&gf, 4).unwrap();
            let rhs = build_g(&f, 4).unwrap().compose(&build_g(&g, 4).unwrap()).unwrap();
            assert_eq!(lhs.unipotent, rhs.unipotent);
            assert_eq!(lhs.dilation, rhs.dilation);
        }
    }

    #[test]
    fn zero_curvature() {
        let n = 6;
        for k in 1..=3 {
            for l in 1..=3 {
                let ak = connection(Basepoint::Origin, k, n);
                let al = connection(Basepoint::Origin, l, n);
                let lhs = al
                    .map_coeffs(|p| p.derivative(Var::F(k)))
                    .sub(&ak.map_coeffs(|p| p.derivative(Var::F(l))))
                    .unwrap();
                assert_eq!(lhs, ak.commutator(&al).unwrap(), "k={k} l={l}");
            }
        }
    }

    #[test]
    fn conjugation_matches_pbw() {
        let n = 4;
        let (f, cap) = formal_capped(Basepoint::Origin, n);
        for m in -2..=2 {
            let res = conjugate_ln(&f, m, n).unwrap().map_coeffs(|p| p.clone().with_trunc(&cap));
            assert_eq!(res, conjugate_ln_direct(m, n).unwrap(), "m={m}");
        }
    }

    #[test]
    fn translation_identity() {
        let f = Germ::from_q(Basepoint::Origin, 5, &[(2, q(1))]).unwrap();
        for row in translation_conjugate(&f, None, 2, 3).unwrap() {
            assert_eq!(row.lhs, row.rhs, "y={} v={}", row.y, row.v);
            if row.y.is_empty() && row.v.is_empty() {
                // f′(a)^{−h} = 1 − 3a²h + …
                assert_eq!(row.lhs.coeff_of(Var::A, 2), Poly::var(Var::H).scale(&q(-3)));
            }
        }
    }

    #[test]
    fn vertex_representative_independence() {
        let m = series::RationalMap::half_disc(&q(3), &q(1)).unwrap();
        let a = vertex_operator(&m, 3).unwrap().table(3).unwrap();
        let b = vertex_operator(&m.compose_scale(&q(2)), 3).unwrap().table(3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ratio, Poly::constant(qr(8, 9)));
    }
}
