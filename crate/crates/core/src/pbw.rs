//! Truncated enveloping algebras of the Virasoro algebra in PBW normal order.
//!
//! A normal-ordered word is `L_{-1}^{a_1} L_{-2}^{a_2} … · L_0^k · … L_2^{b_2} L_1^{b_1}`:
//! lowering generators by increasing `|n|`, then `L_0`, then raising
//! generators by decreasing `n` so that `L_1` sits on the far right.
//! Products are normal-ordered with
//! `L_a L_b = L_b L_a + (a−b) L_{a+b} + (c/12)(a³−a) δ_{a+b,0}`,
//! memoized per pair of words. The central charge stays a formal variable
//! in the coefficients until specialized.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::poly::{q, qr, Poly, Q, Var};

fn key(n: i32) -> (u8, i32) {
    match n.cmp(&0) {
        std::cmp::Ordering::Less => (0, -n),
        std::cmp::Ordering::Equal => (1, 0),
        std::cmp::Ordering::Greater => (2, -n),
    }
}

/// A PBW word: generator indices with multiplicities, in normal order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(SmallVec<[(i32, u32); 6]>);

impl Word {
    pub fn empty() -> Self {
        Word::default()
    }
    pub fn gen(n: i32) -> Self {
        Word(smallvec::smallvec![(n, 1)])
    }
    /// Build from arbitrary `(n, multiplicity)` pairs; panics if the pairs are
    /// not already in normal order (use [`AlgebraElement::product_of`] to
    /// normal-order arbitrary products).
    pub fn from_pairs(pairs: &[(i32, u32)]) -> Self {
        let mut v: SmallVec<[(i32, u32); 6]> = pairs.iter().filter(|p| p.1 > 0).cloned().collect();
        for w in v.windows(2) {
            assert!(key(w[0].0) < key(w[1].0), "pairs not in normal order");
        }
        v.shrink_to_fit();
        Word(v)
    }
    /// `L_{-n_1}^{…}` from a multiplicity map on positive integers, minus side.
    pub fn minus(mult: &BTreeMap<i32, u32>) -> Self {
        Word(mult.iter().filter(|p| *p.1 > 0).map(|(&m, &e)| (-m, e)).collect())
    }
    /// `L_I` on the plus side, `I` a multiplicity map on positive integers.
    pub fn plus(mult: &BTreeMap<i32, u32>) -> Self {
        Word(mult.iter().rev().filter(|p| *p.1 > 0).map(|(&m, &e)| (m, e)).collect())
    }
    pub fn pairs(&self) -> &[(i32, u32)] {
        &self.0
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|p| p.1).sum()
    }
    /// Σ n·e, the `L_0`-eigenvalue shift is `−grading`.
    pub fn grading(&self) -> i32 {
        self.0.iter().map(|&(n, e)| n * e as i32).sum()
    }
    pub fn plus_grading(&self) -> i32 {
        self.0.iter().filter(|p| p.0 > 0).map(|&(n, e)| n * e as i32).sum()
    }
    pub fn minus_grading(&self) -> i32 {
        self.0.iter().filter(|p| p.0 < 0).map(|&(n, e)| -n * e as i32).sum()
    }
    pub fn l0_power(&self) -> u32 {
        self.0.iter().find(|p| p.0 == 0).map_or(0, |p| p.1)
    }
    pub fn has_plus(&self) -> bool {
        self.0.iter().any(|p| p.0 > 0)
    }
    pub fn has_minus(&self) -> bool {
        self.0.iter().any(|p| p.0 < 0)
    }
    /// Multiplicity of `L_n`.
    pub fn mult(&self, n: i32) -> u32 {
        self.0.iter().find(|p| p.0 == n).map_or(0, |p| p.1)
    }
    /// Generators in order, with repetition.
    pub fn letters(&self) -> Vec<i32> {
        self.0.iter().flat_map(|&(n, e)| std::iter::repeat_n(n, e as usize)).collect()
    }
    /// Split into (lowering part, L₀ power, raising part).
    pub fn split(&self) -> (Word, u32, Word) {
        let minus = Word(self.0.iter().filter(|p| p.0 < 0).cloned().collect());
        let plus = Word(self.0.iter().filter(|p| p.0 > 0).cloned().collect());
        (minus, self.l0_power(), plus)
    }
    /// Anti-involution θ: `L_n ↦ L_{-n}`, order reversed. Maps normal words to
    /// normal words.
    pub fn theta(&self) -> Word {
        Word(self.0.iter().rev().map(|&(n, e)| (-n, e)).collect())
    }
    fn push(&mut self, n: i32) {
        if let Some(last) = self.0.last_mut() {
            if last.0 == n {
                last.1 += 1;
                return;
            }
        }
        self.0.push((n, 1));
    }
    fn pop(&self) -> (Word, i32) {
        let mut w = self.clone();
        let last = w.0.last_mut().expect("nonempty word");
        let n = last.0;
        if last.1 == 1 {
            w.0.pop();
        } else {
            last.1 -= 1;
        }
        (w, n)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let s: Vec<String> = self
            .0
            .iter()
            .map(|&(n, e)| if e == 1 { format!("L{n}") } else { format!("L{n}^{e}") })
            .collect();
        write!(f, "{}", s.join("*"))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Central term of `[L_a, L_b]`: `(a³−a)/12` when `a+b = 0`.
fn central(a: i32, b: i32) -> Option<Q> {
    if a + b != 0 {
        return None;
    }
    let a = a as i64;
    let v = qr(a * a * a - a, 12);
    (!v.is_zero()).then_some(v)
}

type Terms = Vec<(Word, Poly)>;

thread_local! {
    static WORD_GEN: RefCell<HashMap<(Word, i32), Arc<Terms>>> = RefCell::new(HashMap::new());
    static WORD_WORD: RefCell<HashMap<(Word, Word, i32), Arc<Terms>>> = RefCell::new(HashMap::new());
}

fn accumulate(acc: &mut HashMap<Word, Poly>, w: Word, c: &Poly) {
    if c.is_zero() {
        return;
    }
    match acc.entry(w) {
        std::collections::hash_map::Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
        std::collections::hash_map::Entry::Vacant(e) => {
            e.insert(c.clone());
        }
    }
}

/// Normal order of `w · L_n`.
fn mul_word_gen(w: &Word, n: i32) -> Arc<Terms> {
    if let Some(hit) = WORD_GEN.with(|c| c.borrow().get(&(w.clone(), n)).cloned()) {
        return hit;
    }
    let out: Terms = match w.0.last() {
        None => vec![(Word::gen(n), Poly::one())],
        Some(&(a, _)) if key(a) <= key(n) => {
            let mut nw = w.clone();
            nw.push(n);
            vec![(nw, Poly::one())]
        }
        Some(_) => {
            // w = w'·L_a with L_a after L_n in normal order:
            // w'L_aL_n = (w'L_n)L_a + (a−n) w'L_{a+n} + central·w'
            let (wp, a) = w.pop();
            let mut acc: HashMap<Word, Poly> = HashMap::new();
            for (u, cu) in mul_word_gen(&wp, n).iter() {
                for (v, cv) in mul_word_gen(u, a).iter() {
                    accumulate(&mut acc, v.clone(), &(cu * cv));
                }
            }
            if a != n {
                let s = Poly::int((a - n) as i64);
                for (u, cu) in mul_word_gen(&wp, a + n).iter() {
                    accumulate(&mut acc, u.clone(), &(cu * &s));
                }
            }
            if let Some(z) = central(a, n) {
                accumulate(&mut acc, wp.clone(), &Poly::var(Var::C).scale(&z));
            }
            let mut v: Terms = acc.into_iter().collect();
            v.sort_by(|x, y| x.0.cmp(&y.0));
            v
        }
    };
    let out = Arc::new(out);
    WORD_GEN.with(|c| c.borrow_mut().insert((w.clone(), n), out.clone()));
    out
}

/// Normal order of `u · v`; words whose `|grading|` part on the relevant
/// side exceeds `cap` are dropped (`cap < 0` means no cap).
pub(crate) fn mul_words(u: &Word, v: &Word, cap: i32) -> Arc<Terms> {
    let k = (u.clone(), v.clone(), cap);
    if let Some(hit) = WORD_WORD.with(|c| c.borrow().get(&k).cloned()) {
        return hit;
    }
    let mut cur: HashMap<Word, Poly> = HashMap::new();
    cur.insert(u.clone(), Poly::one());
    for n in v.letters() {
        let mut next: HashMap<Word, Poly> = HashMap::new();
        for (w, c) in &cur {
            for (x, cx) in mul_word_gen(w, n).iter() {
                if cap >= 0 && (x.plus_grading() > cap || x.minus_grading() > cap) {
                    continue;
                }
                accumulate(&mut next, x.clone(), &(c * cx));
            }
        }
        cur = next;
    }
    let mut out: Terms = cur.into_iter().collect();
    out.sort_by(|x, y| x.0.cmp(&y.0));
    let out = Arc::new(out);
    WORD_WORD.with(|c| c.borrow_mut().insert(k, out.clone()));
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Side {
    /// `U(𝔫₊)` extended by `L₀` and `c`.
    Plus,
    /// `U(𝔫₋)` extended by `L₀` and `c`.
    Minus,
    /// All of `U(𝔳𝔦𝔯)`; no word is ever dropped.
    Full,
}

/// Element of a truncated enveloping algebra.
///
/// On the one-sided algebras words of `|grading|` above `trunc` form a
/// two-sided ideal, so dropping them is exact arithmetic in the quotient.
/// On the full algebra truncation is not an ideal; any word dropped there
/// sets `lossy`.
#[derive(Clone, PartialEq)]
pub struct AlgebraElement {
    pub side: Side,
    pub trunc: Option<u32>,
    terms: BTreeMap<Word, Poly>,
    pub lossy: bool,
}

impl AlgebraElement {
    pub fn zero(side: Side, trunc: Option<u32>) -> Self {
        AlgebraElement { side, trunc, terms: BTreeMap::new(), lossy: false }
    }
    pub fn one(side: Side, trunc: Option<u32>) -> Self {
        Self::scalar(side, trunc, Poly::one())
    }
    pub fn scalar(side: Side, trunc: Option<u32>, c: Poly) -> Self {
        let mut e = Self::zero(side, trunc);
        e.add_term(Word::empty(), c);
        e
    }
    /// The generator `L_n` on the natural side.
    pub fn gen(n: i32, trunc: Option<u32>) -> Self {
        let side = match n.cmp(&0) {
            std::cmp::Ordering::Greater => Side::Plus,
            std::cmp::Ordering::Less => Side::Minus,
            std::cmp::Ordering::Equal => Side::Full,
        };
        let mut e = Self::zero(side, trunc);
        e.add_term(Word::gen(n), Poly::one());
        e
    }
    pub fn from_terms(side: Side, trunc: Option<u32>, terms: impl IntoIterator<Item = (Word, Poly)>) -> Result<Self> {
        let mut e = Self::zero(side, trunc);
        for (w, c) in terms {
            e.check_word(&w)?;
            e.add_term(w, c);
        }
        Ok(e)
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        match self.side {
            Side::Plus if w.has_minus() => Err(Error::CrossSide(format!("{w} in plus-side element"))),
            Side::Minus if w.has_plus() => Err(Error::CrossSide(format!("{w} in minus-side element"))),
            _ => Ok(()),
        }
    }

    fn beyond(&self, w: &Word) -> bool {
        self.trunc.is_some_and(|n| w.plus_grading() > n as i32 || w.minus_grading() > n as i32)
    }

    /// Add `c·w` (normal-ordered `w`), respecting truncation.
    pub fn add_term(&mut self, w: Word, c: Poly) {
        if c.is_zero() {
            return;
        }
        if self.beyond(&w) {
            if self.side == Side::Full {
                self.lossy = true;
            }
            return;
        }
        match self.terms.entry(w) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
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
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn scalar_part(&self) -> Poly {
        self.coeff(&Word::empty())
    }

    /// View on another side (used to feed one-sided elements into full
    /// algebra computations).
    pub fn with_side(&self, side: Side, trunc: Option<u32>) -> Result<Self> {
        let mut e = Self::zero(side, trunc);
        e.lossy = self.lossy;
        for (w, c) in &self.terms {
            e.check_word(w)?;
            e.add_term(w.clone(), c.clone());
        }
        Ok(e)
    }

    fn combine_sides(&self, other: &Self) -> Result<(Side, Option<u32>)> {
        let side = match (self.side, other.side) {
            (a, b) if a == b => a,
            (Side::Full, x) | (x, Side::Full) => {
                // allow scalar / L₀-only full elements to mix with one-sided ones
                let full = if self.side == Side::Full { self } else { other };
                if full.terms.keys().all(|w| !w.has_plus() && !w.has_minus()) {
                    x
                } else {
                    Side::Full
                }
            }
            _ => {
                let only_l0 = |e: &Self| e.terms.keys().all(|w| !w.has_plus() && !w.has_minus());
                if only_l0(self) {
                    other.side
                } else if only_l0(other) {
                    self.side
                } else {
                    return Err(Error::CrossSide(format!("{:?} × {:?}", self.side, other.side)));
                }
            }
        };
        let trunc = match (self.trunc, other.trunc) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Ok((side, trunc))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (side, trunc) = self.combine_sides(other)?;
        let mut e = self.with_side(side, trunc)?;
        e.lossy |= other.lossy;
        for (w, c) in &other.terms {
            e.add_term(w.clone(), c.clone());
        }
        Ok(e)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&Poly::int(-1)))
    }

    pub fn scale(&self, c: &Poly) -> Self {
        let mut e = Self::zero(self.side, self.trunc);
        e.lossy = self.lossy;
        for (w, x) in &self.terms {
            e.add_term(w.clone(), x * c);
        }
        e
    }

    pub fn map_coeffs(&self, f: impl Fn(&Poly) -> Poly) -> Self {
        let mut e = Self::zero(self.side, self.trunc);
        e.lossy = self.lossy;
        for (w, x) in &self.terms {
            e.add_term(w.clone(), f(x));
        }
        e
    }

    /// Specialize the central charge.
    pub fn specialize_c(&self, c: &Q) -> Self {
        self.map_coeffs(|p| p.subst_q(&[(Var::C, c.clone())]))
    }

    /// Normal-ordered product.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        let (side, trunc) = self.combine_sides(other)?;
        let cap = match side {
            Side::Full => -1,
            _ => trunc.map_or(-1, |n| n as i32),
        };
        let mut acc: HashMap<Word, Poly> = HashMap::new();
        for (u, cu) in &self.terms {
            for (v, cv) in &other.terms {
                let cuv = cu * cv;
                if cuv.is_zero() {
                    continue;
                }
                for (w, cw) in mul_words(u, v, cap).iter() {
                    accumulate(&mut acc, w.clone(), &(&cuv * cw));
                }
            }
        }
        let mut e = Self::zero(side, trunc);
        e.lossy = self.lossy || other.lossy;
        for (w, c) in acc {
            e.add_term(w, c);
        }
        Ok(e)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.multiply(other)?.sub(&other.multiply(self)?)
    }

    /// Normal order of an arbitrary product `L_{n_1} ⋯ L_{n_k}`.
    pub fn product_of(gens: &[i32], side: Side, trunc: Option<u32>) -> Result<Self> {
        let mut e = Self::one(side, trunc);
        for &n in gens {
            e = e.multiply(&Self::gen(n, None).with_side(side, trunc)?)?;
        }
        Ok(e)
    }

    /// θ: `L_n ↦ L_{-n}` with reversed order (an anti-involution).
    pub fn theta(&self) -> Self {
        let side = match self.side {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
            Side::Full => Side::Full,
        };
        let mut e = Self::zero(side, self.trunc);
        e.lossy = self.lossy;
        for (w, c) in &self.terms {
            e.add_term(w.theta(), c.clone());
        }
        e
    }

    /// Highest `|grading|` of any word.
    pub fn max_grading(&self) -> i32 {
        self.terms.keys().map(|w| w.plus_grading().max(w.minus_grading())).max().unwrap_or(0)
    }

    /// Terms of a given total grading.
    pub fn grading_part(&self, g: i32) -> Self {
        let mut e = Self::zero(self.side, self.trunc);
        for (w, c) in &self.terms {
            if w.grading() == g {
                e.add_term(w.clone(), c.clone());
            }
        }
        e
    }
}

/// `[L_n, L_m]` as an algebra element.
pub fn commutator_basis(n: i32, m: i32) -> AlgebraElement {
    let mut e = AlgebraElement::zero(Side::Full, None);
    if n != m {
        e.add_term(Word::gen(n + m), Poly::int((n - m) as i64));
    }
    if let Some(z) = central(n, m) {
        e.add_term(Word::empty(), Poly::var(Var::C).scale(&z));
    }
    e
}

/// `e^{ξ ad L_{−1}}(X)` for a lowering-side `X`, with `ξ` a polynomial
/// (rational or formal).
pub fn adjoint_exp(xi: &Poly, target: &AlgebraElement) -> Result<AlgebraElement> {
    if target.side == Side::Plus && target.terms.keys().any(|w| w.has_plus()) {
        return Err(Error::CrossSide("adjoint_exp needs a lowering-side element".into()));
    }
    let l = AlgebraElement::gen(-1, target.trunc).with_side(target.side, target.trunc)?;
    let mut acc = target.clone();
    let mut term = target.clone();
    let mut xik = Poly::one();
    for k in 1.. {
        term = l.commutator(&term)?;
        if term.is_zero() {
            break;
        }
        xik = (&xik * xi).scale(&qr(1, k));
        acc = acc.add(&term.scale(&xik))?;
        if k > 10_000 {
            return Err(Error::Invalid("adjoint series does not terminate".into()));
        }
    }
    Ok(acc)
}

fn fmt_coeff_word(c: &Poly, w: &Word) -> (bool, String) {
    // returns (negative, body)
    if w.is_empty() {
        let s = c.to_string();
        return match s.strip_prefix('-') {
            Some(r) if c.len() == 1 => (true, r.to_string()),
            _ => (false, s),
        };
    }
    if let Some(k) = c.as_constant() {
        let neg = k < Q::zero();
        let a = if neg { -k } else { k };
        let body = if a.is_one() {
            w.to_string()
        } else if a.is_integer() {
            format!("{}*{w}", a.numer())
        } else if a.numer().is_one() {
            format!("{w}/{}", a.denom())
        } else {
            format!("{}*{w}/{}", a.numer(), a.denom())
        };
        return (neg, body);
    }
    if c.len() == 1 {
        let s = c.to_string();
        if let Some(r) = s.strip_prefix('-') {
            return (true, format!("{r}*{w}"));
        }
        return (false, format!("{s}*{w}"));
    }
    (false, format!("({c})*{w}"))
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut ts: Vec<(&Word, &Poly)> = self.terms.iter().collect();
        ts.sort_by(|a, b| {
            (a.0.plus_grading() + a.0.minus_grading(), a.0.degree(), a.0)
                .cmp(&(b.0.plus_grading() + b.0.minus_grading(), b.0.degree(), b.0))
        });
        let mut first = true;
        for (w, c) in ts {
            let (neg, body) = fmt_coeff_word(c, w);
            if first {
                write!(f, "{}{}", if neg { "-" } else { "" }, body)?;
            } else {
                write!(f, " {} {}", if neg { "-" } else { "+" }, body)?;
            }
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Partitions of `n` as multiplicity maps, in a fixed order.
pub fn partitions(n: u32) -> Vec<BTreeMap<i32, u32>> {
    fn rec(n: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<BTreeMap<i32, u32>>) {
        if n == 0 {
            let mut m = BTreeMap::new();
            for &p in cur.iter() {
                *m.entry(p as i32).or_insert(0) += 1;
            }
            out.push(m);
            return;
        }
        for p in (1..=max.min(n)).rev() {
            cur.push(p);
            rec(n - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    rec(n, n, &mut vec![], &mut out);
    out
}

/// `I!` = Π i_m!.
pub fn mult_factorial(mult: &BTreeMap<i32, u32>) -> Q {
    let mut acc = Q::one();
    for &e in mult.values() {
        for k in 2..=e {
            acc *= q(k as i64);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: i32) -> AlgebraElement {
        AlgebraElement::gen(n, None).with_side(Side::Full, None).unwrap()
    }

    #[test]
    fn brackets() {
        assert_eq!(commutator_basis(1, -1).to_string(), "2*L0");
        assert_eq!(commutator_basis(2, -2).to_string(), "c/2 + 4*L0");
        assert_eq!(commutator_basis(3, 5).to_string(), "-2*L8");
        for (n, m) in [(1, -1), (2, -2), (3, 5), (-3, 1), (4, -4)] {
            assert_eq!(g(n).commutator(&g(m)).unwrap(), commutator_basis(n, m));
        }
    }

    #[test]
    fn plus_side_products() {
        let p = AlgebraElement::product_of(&[1, 2], Side::Plus, Some(4)).unwrap();
        assert_eq!(p.to_string(), "-L3 + L2*L1");
        let sq = AlgebraElement::product_of(&[1, 1], Side::Plus, Some(4)).unwrap();
        assert_eq!(sq.to_string(), "L1^2");
        let dropped = AlgebraElement::product_of(&[3, 2], Side::Plus, Some(4)).unwrap();
        assert!(dropped.is_zero() && !dropped.lossy);
    }

    #[test]
    fn adjoint_exp_of_l_minus_two() {
        let xi = Poly::var(Var::XI);
        let t = AlgebraElement::gen(-2, Some(8));
        let e = adjoint_exp(&xi, &t).unwrap();
        let mut expect = AlgebraElement::zero(Side::Minus, Some(8));
        for m in 2..=8 {
            expect.add_term(Word::gen(-m), xi.pow((m - 2) as u32));
        }
        assert_eq!(e, expect);
        let l1 = AlgebraElement::gen(-1, Some(8));
        assert_eq!(adjoint_exp(&xi, &l1).unwrap(), l1);
        assert_eq!(adjoint_exp(&Poly::zero(), &t).unwrap(), t);
    }

    #[test]
    fn partitions_count() {
        let counts: Vec<usize> = (0..8).map(|n| partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 5, 7, 11, 15]);
    }
}
