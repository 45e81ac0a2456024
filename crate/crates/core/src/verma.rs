//! Verma modules `V(c,h)`, their little graded duals, and pairings.
//!
//! Vectors are expanded on the PBW basis `L_J x` with `J` a minus-side word
//! in normal order. The dual module is realised by the dual basis with the
//! contravariant action `⟨L_n y, v⟩ = ⟨y, L_{−n} v⟩`.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::deform::DeformationOperator;
use crate::error::{Error, Result};
use crate::pbw::{mul_words, partitions, AlgebraElement, Side, Word};
use crate::poly::{fmt_q, q, qr, Poly, Q, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct VermaParams {
    pub c: Poly,
    pub h: Poly,
    pub kappa: Option<Q>,
}

/// `c_κ = (3κ−8)(6−κ)/(2κ)`.
pub fn c_kappa(k: &Q) -> Q {
    (q(3) * k - q(8)) * (q(6) - k) / (q(2) * k)
}

/// `h_κ = (6−κ)/(2κ)`.
pub fn h_kappa(k: &Q) -> Q {
    (q(6) - k) / (q(2) * k)
}

impl VermaParams {
    pub fn new(c: Poly, h: Poly) -> Self {
        VermaParams { c, h, kappa: None }
    }
    pub fn rational(c: Q, h: Q) -> Self {
        VermaParams::new(Poly::constant(c), Poly::constant(h))
    }
    /// `c` and `h` left as indeterminates.
    pub fn formal() -> Self {
        VermaParams::new(Poly::var(Var::C), Poly::var(Var::H))
    }
    pub fn from_kappa(k: &Q) -> Result<Self> {
        if *k <= Q::zero() {
            return Err(Error::Invalid("κ must be positive".into()));
        }
        Ok(VermaParams { c: Poly::constant(c_kappa(k)), h: Poly::constant(h_kappa(k)), kappa: Some(k.clone()) })
    }
    /// Vacuum: `h = 0`.
    pub fn vacuum(c: Poly) -> Self {
        VermaParams::new(c, Poly::zero())
    }
    fn is_formal(&self) -> bool {
        self.c == Poly::var(Var::C) && self.h == Poly::var(Var::H)
    }
    /// Replace the indeterminates `c`, `h` by the parameter values.
    pub fn specialize(&self, p: &Poly) -> Poly {
        if self.is_formal() || !p.vars().iter().any(|v| *v == Var::C || *v == Var::H) {
            return p.clone();
        }
        p.subst(&[(Var::C, self.c.clone()), (Var::H, self.h.clone())])
    }
}

/// PBW basis of level `n`.
pub fn basis(n: u32) -> Vec<Word> {
    partitions(n).iter().map(Word::minus).collect()
}

type Terms = Vec<(Word, Poly)>;

thread_local! {
    static ACT: RefCell<HashMap<(i32, Word), Arc<Terms>>> = RefCell::new(HashMap::new());
}

/// `L_n · L_J x` with formal `c`, `h`.
fn act_gen_word(n: i32, j: &Word) -> Arc<Terms> {
    if let Some(hit) = ACT.with(|c| c.borrow().get(&(n, j.clone())).cloned()) {
        return hit;
    }
    let level = -j.grading();
    let out: Terms = if n < 0 {
        mul_words(&Word::gen(n), j, -1).iter().cloned().collect()
    } else if n == 0 {
        vec![(j.clone(), Poly::var(Var::H) + Poly::int(level as i64))]
    } else if j.is_empty() {
        vec![]
    } else {
        // J = L_{-a} J′:  L_n L_{-a} J′x = L_{-a} L_n J′x + (n+a) L_{n−a} J′x + central
        let letters = j.letters();
        let a = -letters[0];
        let rest = Word::from_pairs(&pairs_of(&letters[1..]));
        let mut acc: BTreeMap<Word, Poly> = BTreeMap::new();
        let mut push = |w: Word, c: Poly| {
            let e = acc.entry(w).or_default();
            *e += &c;
        };
        for (u, cu) in act_gen_word(n, &rest).iter() {
            for (w, cw) in mul_words(&Word::gen(-a), u, -1).iter() {
                push(w.clone(), cu * cw);
            }
        }
        for (u, cu) in act_gen_word(n - a, &rest).iter() {
            push(u.clone(), cu.scale(&q((n + a) as i64)));
        }
        if n == a {
            let nn = n as i64;
            push(rest.clone(), Poly::var(Var::C).scale(&qr(nn * nn * nn - nn, 12)));
        }
        acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
    };
    let out = Arc::new(out);
    ACT.with(|c| c.borrow_mut().insert((n, j.clone()), out.clone()));
    out
}

fn pairs_of(letters: &[i32]) -> Vec<(i32, u32)> {
    let mut out: Vec<(i32, u32)> = vec![];
    for &l in letters {
        match out.last_mut() {
            Some(p) if p.0 == l => p.1 += 1,
            _ => out.push((l, 1)),
        }
    }
    out
}

/// Element of `V(c,h)`.
#[derive(Clone, PartialEq)]
pub struct VermaVector {
    pub params: VermaParams,
    terms: BTreeMap<Word, Poly>,
}

impl VermaVector {
    pub fn zero(params: &VermaParams) -> Self {
        VermaVector { params: params.clone(), terms: BTreeMap::new() }
    }
    /// The highest-weight vector `x`.
    pub fn highest(params: &VermaParams) -> Self {
        Self::basis(params, Word::empty())
    }
    pub fn basis(params: &VermaParams, w: Word) -> Self {
        let mut v = Self::zero(params);
        v.add_term(w, Poly::one());
        v
    }
    pub fn add_term(&mut self, w: Word, c: Poly) {
        assert!(!w.has_plus() && w.l0_power() == 0, "Verma basis words are lowering words");
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(w.clone()).or_default();
        *e += &c;
        if e.is_zero() {
            self.terms.remove(&w);
        }
    }
    pub fn terms(&self) -> &BTreeMap<Word, Poly> {
        &self.terms
    }
    pub fn coeff(&self, w: &Word) -> Poly {
        self.terms.get(w).cloned().unwrap_or_default()
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn max_level(&self) -> u32 {
        self.terms.keys().map(|w| (-w.grading()) as u32).max().unwrap_or(0)
    }
    pub fn level_part(&self, l: u32) -> Self {
        VermaVector {
            params: self.params.clone(),
            terms: self.terms.iter().filter(|(w, _)| -w.grading() == l as i32).map(|(w, c)| (w.clone(), c.clone())).collect(),
        }
    }
    pub fn add(&self, other: &Self) -> Self {
        let mut v = self.clone();
        for (w, c) in &other.terms {
            v.add_term(w.clone(), c.clone());
        }
        v
    }
    pub fn scale(&self, c: &Poly) -> Self {
        let mut v = Self::zero(&self.params);
        for (w, x) in &self.terms {
            v.add_term(w.clone(), x * c);
        }
        v
    }
    pub fn map_coeffs(&self, f: impl Fn(&Poly) -> Poly) -> Self {
        let mut v = Self::zero(&self.params);
        for (w, x) in &self.terms {
            v.add_term(w.clone(), f(x));
        }
        v
    }

    pub fn act_gen(&self, n: i32) -> Self {
        let mut out = Self::zero(&self.params);
        for (j, cj) in &self.terms {
            for (w, cw) in act_gen_word(n, j).iter() {
                out.add_term(w.clone(), cj * &self.params.specialize(cw));
            }
        }
        out
    }

    /// `X · v` for an element of any side; `c` in `X` is replaced by the
    /// module's central charge.
    pub fn act(&self, x: &AlgebraElement) -> Self {
        let mut out = Self::zero(&self.params);
        for (w, cw) in x.terms() {
            let mut v = self.clone();
            for n in w.letters().into_iter().rev() {
                v = v.act_gen(n);
                if v.is_zero() {
                    break;
                }
            }
            out = out.add(&v.scale(&self.params.specialize(cw)));
        }
        out
    }
}

impl fmt::Display for VermaVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| if w.is_empty() { format!("({c})*x") } else { format!("({c})*{w}x") })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl fmt::Debug for VermaVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Element of the little graded dual, on the basis dual to `L_J x`.
#[derive(Clone, PartialEq, Debug)]
pub struct DualVector {
    pub params: VermaParams,
    terms: BTreeMap<Word, Poly>,
}

impl DualVector {
    pub fn zero(params: &VermaParams) -> Self {
        DualVector { params: params.clone(), terms: BTreeMap::new() }
    }
    /// `x*`.
    pub fn highest(params: &VermaParams) -> Self {
        Self::basis(params, Word::empty())
    }
    /// The functional picking the coefficient of `L_J x`.
    pub fn basis(params: &VermaParams, w: Word) -> Self {
        let mut y = Self::zero(params);
        y.add_term(w, Poly::one());
        y
    }
    /// `u ↦ ⟨v, u⟩` for the Shapovalov form.
    pub fn contravariant(v: &VermaVector) -> Self {
        let mut y = Self::zero(&v.params);
        let levels: Vec<u32> = (0..=v.max_level()).collect();
        for l in levels {
            let vl = v.level_part(l);
            if vl.is_zero() {
                continue;
            }
            for j in basis(l) {
                let c = shapovalov_pair(&vl, &VermaVector::basis(&v.params, j.clone()));
                y.add_term(j, c);
            }
        }
        y
    }
    pub fn add_term(&mut self, w: Word, c: Poly) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(w.clone()).or_default();
        *e += &c;
        if e.is_zero() {
            self.terms.remove(&w);
        }
    }
    pub fn terms(&self) -> &BTreeMap<Word, Poly> {
        &self.terms
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn max_level(&self) -> u32 {
        self.terms.keys().map(|w| (-w.grading()) as u32).max().unwrap_or(0)
    }
    pub fn add(&self, other: &Self) -> Self {
        let mut v = self.clone();
        for (w, c) in &other.terms {
            v.add_term(w.clone(), c.clone());
        }
        v
    }
    pub fn scale(&self, c: &Poly) -> Self {
        let mut v = Self::zero(&self.params);
        for (w, x) in &self.terms {
            v.add_term(w.clone(), x * c);
        }
        v
    }

    pub fn pair(&self, v: &VermaVector) -> Poly {
        let mut acc = Poly::zero();
        for (w, c) in &self.terms {
            if let Some(x) = v.terms.get(w) {
                acc += &(c * x);
            }
        }
        acc
    }

    /// `(L_n y)(v) = y(L_{−n} v)`.
    pub fn act_gen(&self, n: i32) -> Self {
        let mut out = Self::zero(&self.params);
        let levels: std::collections::BTreeSet<i32> = self.terms.keys().map(|w| -w.grading()).collect();
        for l in levels {
            let lj = l - n;
            if lj < 0 {
                continue;
            }
            for j in basis(lj as u32) {
                let img = VermaVector::basis(&self.params, j.clone()).act_gen(-n);
                let c = self.pair(&img);
                out.add_term(j, c);
            }
        }
        out
    }

    pub fn act(&self, x: &AlgebraElement) -> Self {
        let mut out = Self::zero(&self.params);
        for (w, cw) in x.terms() {
            let mut y = self.clone();
            for n in w.letters().into_iter().rev() {
                y = y.act_gen(n);
                if y.is_zero() {
                    break;
                }
            }
            out = out.add(&y.scale(&self.params.specialize(cw)));
        }
        out
    }
}

/// `⟨u, v⟩` for the contravariant form with `⟨x, x⟩ = 1`.
pub fn shapovalov_pair(u: &VermaVector, v: &VermaVector) -> Poly {
    let mut acc = Poly::zero();
    for (i, ci) in u.terms() {
        let mut w = v.clone();
        for n in i.theta().letters().into_iter().rev() {
            w = w.act_gen(n);
        }
        acc += &(ci * &w.coeff(&Word::empty()));
    }
    acc
}

/// Gram matrix on the level-`n` basis.
pub fn shapovalov(params: &VermaParams, n: u32) -> Vec<Vec<Poly>> {
    let b = basis(n);
    b.iter()
        .map(|i| {
            b.iter()
                .map(|j| {
                    shapovalov_pair(&VermaVector::basis(params, i.clone()), &VermaVector::basis(params, j.clone()))
                })
                .collect()
        })
        .collect()
}

/// CSV rendering of a Shapovalov matrix with basis labels.
pub fn shapovalov_csv(params: &VermaParams, n: u32) -> String {
    let b = basis(n);
    let m = shapovalov(params, n);
    let mut s = String::from("basis");
    for w in &b {
        s += &format!(",{}", label(w));
    }
    s.push('\n');
    for (w, row) in b.iter().zip(m) {
        s += &label(w);
        for c in row {
            s += &format!(",{c}");
        }
        s.push('\n');
    }
    s
}

fn label(w: &Word) -> String {
    if w.is_empty() {
        "x".into()
    } else {
        format!("{w}x")
    }
}

/// Determinant by fraction-free elimination over rationals.
pub fn det_q(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m.to_vec();
    let mut det = Q::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Q::zero();
        };
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let piv = a[col][col].clone();
        det *= &piv;
        for r in col + 1..n {
            let f = &a[r][col] / &piv;
            if f.is_zero() {
                continue;
            }
            for k in col..n {
                let t = &f * &a[col][k];
                a[r][k] -= t;
            }
        }
    }
    det
}

/// `(−2L_{−2} + (κ/2)L_{−1}²) x`.
pub fn level2_vector(params: &VermaParams, kappa: &Q) -> VermaVector {
    let mut v = VermaVector::zero(params);
    v.add_term(Word::gen(-2), Poly::int(-2));
    v.add_term(Word::from_pairs(&[(-1, 2)]), Poly::constant(kappa / q(2)));
    v
}

#[derive(Clone, Debug)]
pub struct SingularCheck {
    pub c: Poly,
    pub h: Poly,
    pub l1: VermaVector,
    pub l2: VermaVector,
    pub holds: bool,
}

/// Whether `L₁` and `L₂` annihilate the level-2 vector at the given params.
pub fn singular_check(params: &VermaParams, kappa: &Q) -> SingularCheck {
    let s = level2_vector(params, kappa);
    let l1 = s.act_gen(1);
    let l2 = s.act_gen(2);
    let holds = l1.is_zero() && l2.is_zero();
    SingularCheck { c: params.c.clone(), h: params.h.clone(), l1, l2, holds }
}

pub fn level2_singular_check(kappa: &Q) -> Result<SingularCheck> {
    Ok(singular_check(&VermaParams::from_kappa(kappa)?, kappa))
}

/// A value of the form `base^h · value`, which keeps irrational dilation
/// factors `λ^{±h}` symbolic.
#[derive(Clone, Debug, PartialEq)]
pub struct Weighted {
    pub base: Poly,
    pub value: Poly,
}

impl Weighted {
    pub fn plain(value: Poly) -> Self {
        Weighted { base: Poly::one(), value }
    }
    /// Fold `base^h` into the value when it is a polynomial (base constant
    /// term 1, or integer `h`).
    pub fn resolve(&self, h: &Poly) -> Option<Poly> {
        if self.base == Poly::one() {
            return Some(self.value.clone());
        }
        let e = h.as_constant();
        if let Some(e) = &e {
            if e.is_integer() {
                let k = e.to_integer();
                let k: i64 = (&k).try_into().ok()?;
                let b = if k >= 0 { self.base.pow(k as u32) } else { self.base.inverse()?.pow((-k) as u32) };
                return Some(&b * &self.value);
            }
        }
        Some(&self.base.pow_formal(h)? * &self.value)
    }
    pub fn to_f64(&self, h: f64, vals: &dyn Fn(Var) -> f64) -> f64 {
        self.base.eval_f64(vals).powf(h) * self.value.eval_f64(vals)
    }
}

impl fmt::Display for Weighted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.base == Poly::one() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "({})^h * ({})", self.base, self.value)
        }
    }
}

/// `G · v` with `G = U μ^{−L₀}`, returned as `(μ^{−1})^h · U μ^{−(L₀−h)} v`.
pub fn apply_operator(g: &DeformationOperator, v: &VermaVector) -> Result<(Poly, VermaVector)> {
    let mu_inv = g.dilation.inverse().ok_or_else(|| Error::NotInvertible("dilation".into()))?;
    let scaled = if g.dilation == Poly::one() {
        v.clone()
    } else {
        let mut w = VermaVector::zero(&v.params);
        for (j, c) in v.terms() {
            w.add_term(j.clone(), c * &mu_inv.pow((-j.grading()) as u32));
        }
        w
    };
    Ok((mu_inv, scaled.act(&g.unipotent)))
}

/// `⟨y, X v⟩`.
pub fn matrix_element(y: &DualVector, x: &AlgebraElement, v: &VermaVector) -> Poly {
    y.pair(&v.act(x))
}

/// `⟨y, G v⟩` for a deformation operator, checking that the truncation
/// covers every grading that can contribute.
pub fn operator_matrix_element(y: &DualVector, g: &DeformationOperator, v: &VermaVector) -> Result<Weighted> {
    let have = g.truncation() as usize;
    let need = match g.unipotent.side {
        Side::Minus => y.max_level() as usize,
        _ => v.max_level() as usize,
    };
    if need > have {
        return Err(Error::TruncationTooSmall { need, have });
    }
    let (base, w) = apply_operator(g, v)?;
    Ok(Weighted { base, value: y.pair(&w) })
}

/// `⟨Ω| X₊ X₋ |Ω⟩` with `L₀Ω = 0`, `𝔫₊Ω = 0`, `⟨Ω|𝔫₋ = 0`.
pub fn vacuum_expectation(xplus: &AlgebraElement, xminus: &AlgebraElement, c: &Poly) -> Result<Poly> {
    if xplus.lossy || xminus.lossy {
        return Err(Error::Lossy("vacuum expectation".into()));
    }
    if xplus.terms().keys().any(|w| w.has_minus()) || xminus.terms().keys().any(|w| w.has_plus()) {
        return Err(Error::CrossSide("vacuum expectation needs (plus, minus) operands".into()));
    }
    let params = VermaParams::vacuum(c.clone());
    let v = VermaVector::highest(&params).act(xminus).act(xplus);
    Ok(v.coeff(&Word::empty()))
}

/// Canonical forms in the quotient of `V(c_κ,h_κ)` by the submodule
/// generated by the level-2 singular vector.
pub struct QuotientReducer {
    pub params: VermaParams,
    /// level → reduced rows `(pivot, row)` with `row[pivot] = 1`.
    rows: BTreeMap<u32, Vec<(Word, BTreeMap<Word, Q>)>>,
}

impl QuotientReducer {
    pub fn new(kappa: &Q, max_level: u32) -> Result<Self> {
        let params = VermaParams::from_kappa(kappa)?;
        let s = level2_vector(&params, kappa);
        let mut rows = BTreeMap::new();
        for l in 2..=max_level {
            let mut gens: Vec<BTreeMap<Word, Q>> = vec![];
            for j in basis(l - 2) {
                let mut v = s.clone();
                for n in j.letters().into_iter().rev() {
                    v = v.act_gen(n);
                }
                let row = v
                    .terms()
                    .iter()
                    .map(|(w, c)| (w.clone(), c.as_constant().expect("rational params")))
                    .collect();
                gens.push(row);
            }
            rows.insert(l, rref(gens));
        }
        Ok(QuotientReducer { params, rows })
    }

    pub fn reduce(&self, v: &VermaVector) -> VermaVector {
        let mut terms = v.terms().clone();
        for rows in self.rows.values() {
            for (p, row) in rows {
                let Some(c) = terms.get(p).cloned() else { continue };
                for (w, r) in row {
                    let e = terms.entry(w.clone()).or_default();
                    *e -= &c.scale(r);
                }
                terms.retain(|_, c| !c.is_zero());
            }
        }
        VermaVector { params: v.params.clone(), terms }
    }

    /// Dimension of the quotient at level `l`.
    pub fn dimension(&self, l: u32) -> usize {
        basis(l).len() - self.rows.get(&l).map_or(0, |r| r.len())
    }
}

fn rref(mut rows: Vec<BTreeMap<Word, Q>>) -> Vec<(Word, BTreeMap<Word, Q>)> {
    let mut out: Vec<(Word, BTreeMap<Word, Q>)> = vec![];
    while let Some(mut r) = rows.pop() {
        for (p, pr) in &out {
            if let Some(c) = r.get(p).cloned() {
                for (w, x) in pr {
                    let e = r.entry(w.clone()).or_insert_with(Q::zero);
                    *e -= &c * x;
                }
                r.retain(|_, c| !c.is_zero());
            }
        }
        let Some((p, c)) = r.iter().next_back().map(|(w, c)| (w.clone(), c.clone())) else { continue };
        for x in r.values_mut() {
            *x /= &c;
        }
        for (_, pr) in out.iter_mut() {
            if let Some(k) = pr.get(&p).cloned() {
                for (w, x) in &r {
                    let e = pr.entry(w.clone()).or_insert_with(Q::zero);
                    *e -= &k * x;
                }
                pr.retain(|_, c| !c.is_zero());
            }
        }
        out.push((p, r));
    }
    out
}

pub fn describe_params(p: &VermaParams) -> String {
    match (p.c.as_constant(), p.h.as_constant()) {
        (Some(c), Some(h)) => format!("c = {}, h = {}", fmt_q(&c), fmt_q(&h)),
        _ => format!("c = {}, h = {}", p.c, p.h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn formal() -> VermaParams {
        VermaParams::formal()
    }

    #[test]
    fn basic_actions() {
        let p = formal();
        let v = VermaVector::basis(&p, Word::gen(-1)).act_gen(1);
        assert_eq!(v.coeff(&Word::empty()).to_string(), "2*h");
        let v = VermaVector::basis(&p, Word::gen(-2)).act_gen(2);
        assert_eq!(v.coeff(&Word::empty()), Poly::var(Var::C).scale(&qr(1, 2)) + Poly::var(Var::H).scale(&q(4)));
        let w = VermaVector::basis(&p, Word::from_pairs(&[(-1, 1), (-2, 1)]));
        assert_eq!(w.act_gen(0), w.scale(&(Poly::var(Var::H) + Poly::int(3))));
    }

    #[test]
    fn contravariance() {
        let p = VermaParams::rational(qr(7, 3), qr(-2, 5));
        for l in 0..=4u32 {
            for n in -3..=3i32 {
                if (l as i32) + n < 0 {
                    continue;
                }
                for i in basis(l) {
                    for j in basis((l as i32 + n) as u32) {
                        let y = DualVector::basis(&p, j.clone());
                        let v = VermaVector::basis(&p, i.clone());
                        assert_eq!(y.act_gen(n).pair(&v), y.pair(&v.act_gen(-n)));
                    }
                }
            }
        }
    }

    #[test]
    fn shapovalov_level2() {
        let p = formal();
        let m = shapovalov(&p, 1);
        assert_eq!(m[0][0].to_string(), "2*h");
        for k in [qr(2, 1), qr(8, 3), qr(6, 1)] {
            let p = VermaParams::from_kappa(&k).unwrap();
            let m: Vec<Vec<Q>> =
                shapovalov(&p, 2).into_iter().map(|r| r.into_iter().map(|c| c.as_constant().unwrap()).collect()).collect();
            assert!(det_q(&m).is_zero());
            let pert = VermaParams::rational(c_kappa(&k), h_kappa(&k) + qr(1, 7));
            let m: Vec<Vec<Q>> =
                shapovalov(&pert, 2).into_iter().map(|r| r.into_iter().map(|c| c.as_constant().unwrap()).collect()).collect();
            assert!(!det_q(&m).is_zero());
        }
    }

    #[test]
    fn singular_vectors() {
        for k in [q(2), qr(8, 3), q(3), q(4), q(6), q(8)] {
            assert!(level2_singular_check(&k).unwrap().holds, "κ = {k}");
        }
        let c = level2_singular_check(&qr(8, 3)).unwrap();
        assert_eq!((c.c, c.h), (Poly::zero(), Poly::constant(qr(5, 8))));
        let k = q(4);
        let bad = VermaParams::rational(c_kappa(&k), h_kappa(&k) + qr(1, 7));
        assert!(!singular_check(&bad, &k).holds);
    }

    #[test]
    fn vacuum_values() {
        let c = Poly::var(Var::C);
        let one = AlgebraElement::one(Side::Plus, None);
        let l2 = AlgebraElement::gen(2, None);
        let lm2 = AlgebraElement::gen(-2, None);
        assert_eq!(vacuum_expectation(&one, &AlgebraElement::one(Side::Minus, None), &c).unwrap(), Poly::one());
        assert_eq!(vacuum_expectation(&l2, &lm2, &c).unwrap(), c.scale(&qr(1, 2)));
        let l1 = AlgebraElement::gen(1, None);
        let lm1 = AlgebraElement::gen(-1, None);
        assert!(vacuum_expectation(&l1, &lm1, &c).unwrap().is_zero());
    }

    #[test]
    fn quotient_dimensions() {
        let r = QuotientReducer::new(&qr(7, 3), 5).unwrap();
        // p(n) − p(n−2)
        assert_eq!((0..=5).map(|l| r.dimension(l)).collect::<Vec<_>>(), vec![1, 1, 1, 2, 3, 4]);
        let s = level2_vector(&r.params, &qr(7, 3));
        assert!(r.reduce(&s).is_zero());
        assert!(r.reduce(&s.act_gen(-3)).is_zero());
    }
}
