//! Sparse multivariate polynomials over ℚ.
//!
//! Variables are either germ coefficients `f_m` or named symbols (`c`, `h`,
//! `κ`, `ξ`, bookkeeping parameters). A polynomial may carry a [`Truncation`]:
//! a set of weighted degree caps; monomials exceeding any cap are dropped on
//! construction, which turns "polynomial" into "truncated power series" for
//! grading-exact computations.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use smallvec::SmallVec;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.25"`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let v = Q::new(n, d);
        return Some(if neg { -v } else { v });
    }
    s.parse::<BigInt>().ok().map(Q::from_integer)
}

pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // huge numerators/denominators: scale down first
            let shift = x.numer().bits().max(x.denom().bits()) as i64 - 900;
            let n = (x.numer() >> shift.max(0) as usize).to_f64().unwrap_or(0.0);
            let d = (x.denom() >> shift.max(0) as usize).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Var {
    /// Germ coefficient f_m.
    F(i32),
    Sym(&'static str),
}

impl Var {
    pub const C: Var = Var::Sym("c");
    pub const H: Var = Var::Sym("h");
    pub const KAPPA: Var = Var::Sym("kappa");
    pub const XI: Var = Var::Sym("xi");
    pub const S: Var = Var::Sym("s");
    pub const X: Var = Var::Sym("x");
    pub const A: Var = Var::Sym("a");
    pub const EPS_A: Var = Var::Sym("eA");
    pub const EPS_B: Var = Var::Sym("eB");
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::F(m) => write!(f, "f{m}"),
            Var::Sym(s) => write!(f, "{s}"),
        }
    }
}

pub type Monomial = SmallVec<[(Var, u32); 4]>;

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out = Monomial::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Sort variables and merge repeats.
pub fn normalize_mono(mut m: Monomial) -> Monomial {
    m.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = Monomial::with_capacity(m.len());
    for (v, e) in m {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += e,
            _ if e == 0 => {}
            _ => out.push((v, e)),
        }
    }
    out
}

/// Weight of a monomial: `f_abs·|m|` per power of `f_m`, plus explicit
/// per-variable weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weights {
    pub f_abs: u32,
    pub vars: Vec<(Var, u32)>,
}

impl Weights {
    pub fn f_grading() -> Self {
        Weights { f_abs: 1, vars: vec![] }
    }
    pub fn var(v: Var) -> Self {
        Weights { f_abs: 0, vars: vec![(v, 1)] }
    }
    pub fn weight(&self, m: &Monomial) -> u32 {
        let mut w = 0;
        for &(v, e) in m {
            match v {
                Var::F(k) => w += self.f_abs * k.unsigned_abs() * e,
                _ => {
                    if let Some(&(_, vw)) = self.vars.iter().find(|(x, _)| *x == v) {
                        w += vw * e;
                    }
                }
            }
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cap {
    pub weights: Weights,
    pub max: u32,
}

/// A conjunction of weighted-degree caps.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Truncation {
    pub caps: Vec<Cap>,
}

impl Truncation {
    pub fn f_grading(max: u32) -> Arc<Self> {
        Arc::new(Truncation { caps: vec![Cap { weights: Weights::f_grading(), max }] })
    }
    pub fn degree(v: Var, max: u32) -> Arc<Self> {
        Arc::new(Truncation { caps: vec![Cap { weights: Weights::var(v), max }] })
    }
    pub fn new(caps: Vec<Cap>) -> Arc<Self> {
        Arc::new(Truncation { caps })
    }
    pub fn keeps(&self, m: &Monomial) -> bool {
        self.caps.iter().all(|c| c.weights.weight(m) <= c.max)
    }
    /// Whether every non-constant monomial has positive weight under some cap,
    /// so that powers of such polynomials eventually vanish.
    pub fn nilpotent(&self, m: &Monomial) -> bool {
        !m.is_empty() && self.caps.iter().any(|c| c.weights.weight(m) > 0)
    }
}

pub type Trunc = Option<Arc<Truncation>>;

pub fn merge_trunc(a: &Trunc, b: &Trunc) -> Trunc {
    match (a, b) {
        (None, x) | (x, None) => x.clone(),
        (Some(x), Some(y)) => {
            if Arc::ptr_eq(x, y) || x == y {
                Some(x.clone())
            } else {
                let mut caps = x.caps.clone();
                for c in &y.caps {
                    if !caps.contains(c) {
                        caps.push(c.clone());
                    }
                }
                Some(Arc::new(Truncation { caps }))
            }
        }
    }
}

#[derive(Clone, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Q>,
    trunc: Trunc,
}

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}
impl Eq for Poly {}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }
    pub fn one() -> Self {
        Poly::constant(Q::one())
    }
    pub fn constant(c: Q) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::new(), c);
        }
        Poly { terms, trunc: None }
    }
    pub fn int(n: i64) -> Self {
        Poly::constant(q(n))
    }
    pub fn var(v: Var) -> Self {
        Poly::monomial(smallvec::smallvec![(v, 1)], Q::one())
    }
    pub fn f(m: i32) -> Self {
        Poly::var(Var::F(m))
    }
    /// `c·m`; `m` may list variables in any order, with repeats.
    pub fn monomial(m: Monomial, c: Q) -> Self {
        let m = normalize_mono(m);
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms, trunc: None }
    }

    pub fn trunc(&self) -> &Trunc {
        &self.trunc
    }

    /// Attach (merge) a truncation and drop monomials it excludes.
    pub fn with_trunc(mut self, t: &Trunc) -> Self {
        self.trunc = merge_trunc(&self.trunc, t);
        if let Some(tr) = &self.trunc {
            self.terms.retain(|m, _| tr.keeps(m));
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_empty())
    }
    pub fn constant_term(&self) -> Q {
        self.terms.get(&Monomial::new()).cloned().unwrap_or_else(Q::zero)
    }
    pub fn as_constant(&self) -> Option<Q> {
        self.is_constant().then(|| self.constant_term())
    }
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert_add(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        if let Some(tr) = &self.trunc {
            if !tr.keeps(&m) {
                return;
            }
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly { terms: BTreeMap::new(), trunc: self.trunc.clone() };
        }
        Poly {
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
            trunc: self.trunc.clone(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one().with_trunc(&self.trunc);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().find(|(x, _)| *x == v).map_or(0, |p| p.1))
            .max()
            .unwrap_or(0)
    }

    /// Total weight under `w` of the heaviest / lightest monomial.
    pub fn max_weight(&self, w: &Weights) -> Option<u32> {
        self.terms.keys().map(|m| w.weight(m)).max()
    }
    pub fn min_weight(&self, w: &Weights) -> Option<u32> {
        self.terms.keys().map(|m| w.weight(m)).min()
    }

    /// The part of weight exactly `k`.
    pub fn homogeneous_part(&self, w: &Weights, k: u32) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| w.weight(m) == k)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
            trunc: self.trunc.clone(),
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.terms.keys().flat_map(|m| m.iter().map(|p| p.0)).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn derivative(&self, v: Var) -> Poly {
        let mut out = Poly { terms: BTreeMap::new(), trunc: self.trunc.clone() };
        for (m, c) in &self.terms {
            if let Some(pos) = m.iter().position(|p| p.0 == v) {
                let e = m[pos].1;
                let mut nm = m.clone();
                if e == 1 {
                    nm.remove(pos);
                } else {
                    nm[pos].1 -= 1;
                }
                out.insert_add(nm, c * q(e as i64));
            }
        }
        out
    }

    /// Coefficient of `v^k` as a polynomial in the remaining variables.
    pub fn coeff_of(&self, v: Var, k: u32) -> Poly {
        let mut out = Poly { terms: BTreeMap::new(), trunc: self.trunc.clone() };
        for (m, c) in &self.terms {
            let e = m.iter().find(|p| p.0 == v).map_or(0, |p| p.1);
            if e == k {
                let nm: Monomial = m.iter().filter(|p| p.0 != v).cloned().collect();
                out.insert_add(nm, c.clone());
            }
        }
        out
    }

    /// Coefficient of an exact monomial.
    pub fn coeff_mono(&self, m: &Monomial) -> Q {
        self.terms.get(&normalize_mono(m.clone())).cloned().unwrap_or_else(Q::zero)
    }

    /// Substitute polynomials for variables (simultaneously).
    pub fn subst(&self, map: &[(Var, Poly)]) -> Poly {
        let mut out = Poly { terms: BTreeMap::new(), trunc: self.trunc.clone() };
        for (_, p) in map {
            out.trunc = merge_trunc(&out.trunc, &p.trunc);
        }
        let mut powcache: BTreeMap<(Var, u32), Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut term = Poly::constant(c.clone()).with_trunc(&out.trunc);
            let mut rest = Monomial::new();
            for &(v, e) in m {
                if let Some((_, p)) = map.iter().find(|(x, _)| *x == v) {
                    let pe = powcache.entry((v, e)).or_insert_with(|| p.pow(e)).clone();
                    term = &term * &pe;
                } else {
                    rest.push((v, e));
                }
            }
            if !rest.is_empty() {
                term = &term * &Poly::monomial(rest, Q::one());
            }
            out += &term;
        }
        out
    }

    pub fn subst_q(&self, map: &[(Var, Q)]) -> Poly {
        let mp: Vec<(Var, Poly)> = map.iter().map(|(v, x)| (*v, Poly::constant(x.clone()))).collect();
        self.subst(&mp)
    }

    pub fn eval_f64(&self, val: &dyn Fn(Var) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| q_to_f64(c) * m.iter().map(|&(v, e)| val(v).powi(e as i32)).product::<f64>())
            .sum()
    }

    /// Multiplicative inverse as a terminating geometric series. Requires a
    /// nonzero constant term and nilpotent remainder under the truncation.
    pub fn inverse(&self) -> Option<Poly> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return None;
        }
        let inv0 = c0.recip();
        if self.is_constant() {
            return Some(Poly::constant(inv0).with_trunc(&self.trunc));
        }
        let tr = self.trunc.as_ref()?;
        if !self.terms.keys().filter(|m| !m.is_empty()).all(|m| tr.nilpotent(m)) {
            return None;
        }
        // 1/(c0(1+y)) = c0⁻¹ Σ (−y)^k
        let y = (self - &Poly::constant(c0)).scale(&inv0);
        let neg_y = -&y;
        let mut term = Poly::one().with_trunc(&self.trunc);
        let mut acc = term.clone();
        for _ in 0..10_000 {
            term = &term * &neg_y;
            if term.is_zero() {
                return Some(acc.scale(&inv0));
            }
            acc += &term;
        }
        None
    }

    /// `self^e` for a polynomial exponent via the binomial series. Requires
    /// constant term 1 and nilpotent remainder.
    pub fn pow_formal(&self, e: &Poly) -> Option<Poly> {
        if self.constant_term() != Q::one() {
            return None;
        }
        let trunc = merge_trunc(&self.trunc, &e.trunc);
        let y = (self - &Poly::one()).with_trunc(&trunc);
        if y.is_zero() {
            return Some(Poly::one().with_trunc(&trunc));
        }
        let tr = trunc.as_ref()?;
        if !y.terms.keys().all(|m| tr.nilpotent(m)) {
            return None;
        }
        // Σ_k binom(e,k) y^k, binom(e,k) = e(e−1)…(e−k+1)/k!
        let mut acc = Poly::one().with_trunc(&trunc);
        let mut binom = Poly::one().with_trunc(&trunc);
        let mut ypow = Poly::one().with_trunc(&trunc);
        for k in 0..10_000i64 {
            ypow = &ypow * &y;
            if ypow.is_zero() {
                return Some(acc);
            }
            binom = (&binom * &(e - &Poly::int(k))).scale(&qr(1, k + 1));
            acc += &(&binom * &ypow);
        }
        None
    }

    /// Rational exponent specialization of [`Poly::pow_formal`].
    pub fn pow_q(&self, e: &Q) -> Option<Poly> {
        self.pow_formal(&Poly::constant(e.clone()))
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn fmt_mono(m: &Monomial) -> String {
    m.iter()
        .map(|&(v, e)| if e == 1 { v.to_string() } else { format!("{v}^{e}") })
        .collect::<Vec<_>>()
        .join("*")
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut ts: Vec<(&Monomial, &Q)> = self.terms.iter().collect();
        // total degree first, then variable order
        ts.sort_by(|a, b| {
            let da: u32 = a.0.iter().map(|p| p.1).sum();
            let db: u32 = b.0.iter().map(|p| p.1).sum();
            da.cmp(&db).then_with(|| a.0.cmp(b.0))
        });
        let mut first = true;
        for (m, c) in ts {
            let neg = c.is_negative();
            let a = c.abs();
            let body = if m.is_empty() {
                fmt_q(&a)
            } else if a.is_one() {
                fmt_mono(m)
            } else if a.is_integer() {
                format!("{}*{}", fmt_q(&a), fmt_mono(m))
            } else if a.numer().is_one() {
                format!("{}/{}", fmt_mono(m), a.denom())
            } else {
                format!("{}*{}/{}", a.numer(), fmt_mono(m), a.denom())
            };
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

impl From<Q> for Poly {
    fn from(c: Q) -> Self {
        Poly::constant(c)
    }
}

impl From<i64> for Poly {
    fn from(c: i64) -> Self {
        Poly::int(c)
    }
}

impl AddAssign<&Poly> for Poly {
    fn add_assign(&mut self, rhs: &Poly) {
        let t = merge_trunc(&self.trunc, &rhs.trunc);
        if t.as_ref().map(Arc::as_ptr) != self.trunc.as_ref().map(Arc::as_ptr) {
            *self = std::mem::take(self).with_trunc(&t);
        }
        for (m, c) in &rhs.terms {
            self.insert_add(m.clone(), c.clone());
        }
    }
}

impl SubAssign<&Poly> for Poly {
    fn sub_assign(&mut self, rhs: &Poly) {
        let t = merge_trunc(&self.trunc, &rhs.trunc);
        if t.as_ref().map(Arc::as_ptr) != self.trunc.as_ref().map(Arc::as_ptr) {
            *self = std::mem::take(self).with_trunc(&t);
        }
        for (m, c) in &rhs.terms {
            self.insert_add(m.clone(), -c.clone());
        }
    }
}

impl Add<&Poly> for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&Poly> for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
            trunc: self.trunc.clone(),
        }
    }
}

impl Mul<&Poly> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let trunc = merge_trunc(&self.trunc, &rhs.trunc);
        let mut out = Poly { terms: BTreeMap::new(), trunc };
        if self.is_empty() || rhs.is_empty() {
            return out;
        }
        if let Some(c) = self.as_constant() {
            return rhs.scale(&c).with_trunc(&out.trunc);
        }
        if let Some(c) = rhs.as_constant() {
            return self.scale(&c).with_trunc(&out.trunc);
        }
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert_add(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<Poly> for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Poly> for Poly {
            type Output = Poly;
            fn $m(self, rhs: &Poly) -> Poly {
                (&self).$m(rhs)
            }
        }
        impl $tr<Poly> for &Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly {
                self.$m(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

/// A polynomial compiled for repeated double-precision evaluation over a
/// dense variable vector.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    /// `slot` maps each variable to an index in the evaluation vector.
    pub fn new(p: &Poly, slot: &dyn Fn(Var) -> usize) -> Self {
        CompiledPoly {
            terms: p
                .terms()
                .map(|(m, c)| (q_to_f64(c), m.iter().map(|&(v, e)| (slot(v), e)).collect()))
                .collect(),
        }
    }
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (c, m) in &self.terms {
            let mut t = *c;
            for &(i, e) in m {
                let xi = x[i];
                for _ in 0..e {
                    t *= xi;
                }
            }
            s += t;
        }
        s
    }
}
