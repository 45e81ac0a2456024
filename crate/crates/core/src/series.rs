//! Exact germs at 0 and ∞ and windowed Laurent series.
//!
//! A germ at the origin is `scale·(z + Σ_{m≥1} f_m z^{m+1})`, a germ at
//! infinity is `scale·(z + Σ_{m≤−1} f_m z^{m+1})`. Coefficients are
//! polynomials over ℚ, so the same code handles numeric germs and germs with
//! formal coefficients `f_m`.
//!
//! Laurent series are stored in *order space*: the order of `z^e` is `e` at
//! the origin and `−e` at infinity, so "higher order" always means "smaller
//! near the basepoint" and one implementation of the truncated arithmetic
//! serves both. Every series carries its precision: the first order whose
//! coefficient is unknown. Reading at or beyond it is an error.
//!
//! Contour integrals are residues. At infinity the contour is taken with
//! index −1 around ∞, which is the positively oriented circle in the `z`
//! plane; the residue is therefore `+[z^{-1}]` in both cases.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{fmt_q, parse_q, q, qr, Poly, Q, Var};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basepoint {
    Origin,
    Infinity,
}

impl Basepoint {
    /// Order of the monomial `z^e`.
    pub fn order(self, e: i32) -> i32 {
        match self {
            Basepoint::Origin => e,
            Basepoint::Infinity => -e,
        }
    }
    pub fn exponent(self, o: i32) -> i32 {
        self.order(o)
    }
    /// Whether `m` is a legal coefficient grading.
    pub fn legal(self, m: i32) -> bool {
        match self {
            Basepoint::Origin => m >= 1,
            Basepoint::Infinity => m <= -1,
        }
    }
    /// Legal gradings with `|m| ≤ n`.
    pub fn gradings(self, n: usize) -> Vec<i32> {
        let n = n as i32;
        match self {
            Basepoint::Origin => (1..=n).collect(),
            Basepoint::Infinity => (1..=n).map(|m| -m).collect(),
        }
    }
}

const EXACT: i32 = i32::MAX / 4;

fn padd(p: i32, s: i32) -> i32 {
    if p >= EXACT {
        EXACT
    } else {
        p + s
    }
}

#[derive(Clone, PartialEq)]
pub struct Laurent {
    bp: Basepoint,
    start: i32,
    coeffs: Vec<Poly>,
    prec: i32,
}

impl fmt::Debug for Laurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Laurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = vec![];
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = self.bp.exponent(self.start + i as i32);
            parts.push(format!("({c})*z^{e}"));
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        if self.prec < EXACT {
            parts.push(format!("O(z^{})", self.bp.exponent(self.prec)));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

impl Laurent {
    pub fn basepoint(&self) -> Basepoint {
        self.bp
    }

    pub fn zero(bp: Basepoint) -> Self {
        Laurent { bp, start: 0, coeffs: vec![], prec: EXACT }
    }

    /// Exact monomial `c·z^e`.
    pub fn monomial(bp: Basepoint, e: i32, c: Poly) -> Self {
        Laurent { bp, start: bp.order(e), coeffs: vec![c], prec: EXACT }
    }

    /// Series from exponent→coefficient pairs, known below order `prec`
    /// (`None` for an exact finite sum).
    pub fn from_exponents(bp: Basepoint, terms: &BTreeMap<i32, Poly>, prec: Option<i32>) -> Self {
        let prec = prec.unwrap_or(EXACT);
        let orders: Vec<i32> = terms.keys().map(|&e| bp.order(e)).filter(|&o| o < prec).collect();
        if orders.is_empty() {
            return Laurent { bp, start: prec.min(0), coeffs: vec![], prec };
        }
        let lo = *orders.iter().min().unwrap();
        let hi = *orders.iter().max().unwrap();
        let mut coeffs = vec![Poly::zero(); (hi - lo + 1) as usize];
        for (&e, c) in terms {
            let o = bp.order(e);
            if o < prec {
                coeffs[(o - lo) as usize] = c.clone();
            }
        }
        Laurent { bp, start: lo, coeffs, prec }
    }

    /// First unknown order.
    pub fn precision(&self) -> i32 {
        self.prec
    }
    pub fn is_exact(&self) -> bool {
        self.prec >= EXACT
    }

    /// Coefficient at a given order.
    pub fn at_order(&self, o: i32) -> Result<Poly> {
        if o >= self.prec {
            return Err(Error::WindowExhausted { needed: o, available: self.prec });
        }
        if o < self.start || o >= self.start + self.coeffs.len() as i32 {
            return Ok(Poly::zero());
        }
        Ok(self.coeffs[(o - self.start) as usize].clone())
    }

    /// Coefficient of `z^e`.
    pub fn coeff(&self, e: i32) -> Result<Poly> {
        self.at_order(self.bp.order(e))
    }

    /// Exponent→coefficient map of all known nonzero terms.
    pub fn terms(&self) -> BTreeMap<i32, Poly> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (self.bp.exponent(self.start + i as i32), c.clone()))
            .collect()
    }

    /// Formal residue `∮ dz/(2πi)`, the coefficient of `z^{-1}`.
    pub fn residue(&self) -> Result<Poly> {
        self.coeff(-1)
    }

    /// Lowest order with a nonzero known coefficient.
    pub fn valuation(&self) -> Option<i32> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|i| self.start + i as i32)
    }

    fn check_bp(&self, other: &Laurent) -> Result<()> {
        if self.bp != other.bp {
            return Err(Error::BasepointMismatch(format!("{:?} vs {:?}", self.bp, other.bp)));
        }
        Ok(())
    }

    fn trimmed(mut self) -> Self {
        if self.prec < EXACT {
            let keep = (self.prec - self.start).max(0) as usize;
            self.coeffs.truncate(keep);
        }
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().position(|c| !c.is_zero()).unwrap_or(self.coeffs.len());
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.start += lead as i32;
        }
        self
    }

    /// Lower the precision to `prec` (no-op if already lower).
    pub fn truncate_to(&self, prec: i32) -> Laurent {
        let mut out = self.clone();
        out.prec = out.prec.min(prec);
        out.trimmed()
    }

    pub fn add(&self, other: &Laurent) -> Result<Laurent> {
        self.check_bp(other)?;
        let prec = self.prec.min(other.prec);
        let lo = self.start.min(other.start);
        let hi = (self.start + self.coeffs.len() as i32).max(other.start + other.coeffs.len() as i32);
        let hi = hi.min(prec).max(lo);
        let mut coeffs = vec![Poly::zero(); (hi - lo) as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            let o = self.start + i as i32;
            if o < hi {
                coeffs[(o - lo) as usize] += c;
            }
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            let o = other.start + i as i32;
            if o < hi {
                coeffs[(o - lo) as usize] += c;
            }
        }
        Ok(Laurent { bp: self.bp, start: lo, coeffs, prec }.trimmed())
    }

    pub fn neg(&self) -> Laurent {
        Laurent { coeffs: self.coeffs.iter().map(|c| -c).collect(), ..self.clone() }
    }

    pub fn sub(&self, other: &Laurent) -> Result<Laurent> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Poly) -> Laurent {
        Laurent { coeffs: self.coeffs.iter().map(|x| x * c).collect(), ..self.clone() }.trimmed()
    }

    /// Multiply by the exact monomial `z^e`.
    pub fn shift(&self, e: i32) -> Laurent {
        let d = self.bp.order(e);
        Laurent { start: self.start + d, prec: padd(self.prec, d), ..self.clone() }
    }

    pub fn mul(&self, other: &Laurent) -> Result<Laurent> {
        self.check_bp(other)?;
        let (a, b) = (self, other);
        if a.coeffs.is_empty() || b.coeffs.is_empty() {
            let prec = padd(a.prec, b.start).min(padd(b.prec, a.start));
            return Ok(Laurent { bp: a.bp, start: a.start + b.start, coeffs: vec![], prec });
        }
        let start = a.start + b.start;
        let prec = padd(a.prec, b.start).min(padd(b.prec, a.start));
        let natural = start + (a.coeffs.len() + b.coeffs.len() - 1) as i32;
        let top = natural.min(prec);
        let n = (top - start).max(0) as usize;
        let mut coeffs = vec![Poly::zero(); n];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() || i >= n {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                if !y.is_zero() {
                    coeffs[i + j] += &(x * y);
                }
            }
        }
        Ok(Laurent { bp: a.bp, start, coeffs, prec }.trimmed())
    }

    /// Multiplicative inverse; the leading coefficient must be invertible.
    pub fn inverse(&self) -> Result<Laurent> {
        let s = self.trimmed_clone();
        let Some(v) = s.valuation() else {
            return Err(Error::NotInvertible("series vanishes on its known window".into()));
        };
        let c0 = s.coeffs[0].clone();
        let inv0 = c0
            .inverse()
            .ok_or_else(|| Error::NotInvertible(format!("leading coefficient {c0}")))?;
        if s.is_exact() && s.coeffs.len() == 1 {
            return Ok(Laurent { bp: s.bp, start: -v, coeffs: vec![inv0], prec: EXACT });
        }
        if s.is_exact() {
            return Err(Error::NotInvertible("exact multi-term series needs a precision".into()));
        }
        let rel = (s.prec - v) as usize;
        let mut b: Vec<Poly> = Vec::with_capacity(rel);
        b.push(inv0.clone());
        let neg_inv0 = -&inv0;
        for k in 1..rel {
            let mut acc = Poly::zero();
            for i in 1..=k.min(s.coeffs.len() - 1) {
                let ci = &s.coeffs[i];
                if !ci.is_zero() {
                    acc += &(ci * &b[k - i]);
                }
            }
            b.push(&acc * &neg_inv0);
        }
        Ok(Laurent { bp: s.bp, start: -v, coeffs: b, prec: -v + rel as i32 }.trimmed())
    }

    fn trimmed_clone(&self) -> Laurent {
        self.clone().trimmed()
    }

    pub fn pow(&self, k: i32) -> Result<Laurent> {
        if k < 0 {
            return self.inverse()?.pow(-k);
        }
        let mut acc = Laurent::monomial(self.bp, 0, Poly::one());
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// `d/dz`.
    pub fn derivative(&self) -> Laurent {
        let (d, sign) = match self.bp {
            Basepoint::Origin => (-1, 1),
            Basepoint::Infinity => (1, -1),
        };
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.scale(&q(sign * (self.start + i as i32) as i64)))
            .collect();
        Laurent { bp: self.bp, start: self.start + d, coeffs, prec: padd(self.prec, d) }.trimmed()
    }
}

/// Truncated germ at 0 or ∞.
#[derive(Clone, PartialEq, Debug)]
pub struct Germ {
    pub basepoint: Basepoint,
    pub truncation: usize,
    pub scale: Poly,
    coeffs: BTreeMap<i32, Poly>,
}

impl Germ {
    pub fn new(
        basepoint: Basepoint,
        truncation: usize,
        scale: Poly,
        coeffs: BTreeMap<i32, Poly>,
    ) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidGerm("truncation must be positive".into()));
        }
        if let Some(s) = scale.as_constant() {
            if !s.is_positive() {
                return Err(Error::InvalidGerm(format!("scale {} is not positive", fmt_q(&s))));
            }
        } else if scale.constant_term().is_zero() {
            return Err(Error::InvalidGerm("scale has no constant term".into()));
        }
        for &m in coeffs.keys() {
            if !basepoint.legal(m) {
                return Err(Error::InvalidGerm(format!("grading {m} illegal at {basepoint:?}")));
            }
        }
        let coeffs = coeffs
            .into_iter()
            .filter(|(m, c)| !c.is_zero() && m.unsigned_abs() as usize <= truncation)
            .collect();
        Ok(Germ { basepoint, truncation, scale, coeffs })
    }

    pub fn identity(bp: Basepoint, n: usize) -> Self {
        Germ { basepoint: bp, truncation: n, scale: Poly::one(), coeffs: BTreeMap::new() }
    }

    /// Unit-scale germ from rational coefficients.
    pub fn from_q(bp: Basepoint, n: usize, coeffs: &[(i32, Q)]) -> Result<Self> {
        Germ::new(
            bp,
            n,
            Poly::one(),
            coeffs.iter().map(|(m, c)| (*m, Poly::constant(c.clone()))).collect(),
        )
    }

    /// The germ with formal coefficients `f_m` for all legal `|m| ≤ n`.
    pub fn formal(bp: Basepoint, n: usize) -> Self {
        let coeffs = bp.gradings(n).into_iter().map(|m| (m, Poly::f(m))).collect();
        Germ { basepoint: bp, truncation: n, scale: Poly::one(), coeffs }
    }

    pub fn coeffs(&self) -> &BTreeMap<i32, Poly> {
        &self.coeffs
    }

    /// `f_m`, with the convention `f_0 = 1` and zero outside the range.
    pub fn coeff(&self, m: i32) -> Poly {
        if m == 0 {
            return Poly::one();
        }
        self.coeffs.get(&m).cloned().unwrap_or_default()
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs.is_empty() && self.scale == Poly::one()
    }

    /// Restrict to a smaller truncation.
    pub fn truncated(&self, n: usize) -> Germ {
        let n = n.min(self.truncation);
        Germ {
            basepoint: self.basepoint,
            truncation: n,
            scale: self.scale.clone(),
            coeffs: self
                .coeffs
                .iter()
                .filter(|(m, _)| m.unsigned_abs() as usize <= n)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    /// Same coefficients with scale 1.
    pub fn unipotent(&self) -> Germ {
        Germ { scale: Poly::one(), ..self.clone() }
    }

    /// Apply a map to every coefficient and the scale.
    pub fn map_coeffs(&self, f: impl Fn(&Poly) -> Poly) -> Germ {
        Germ {
            basepoint: self.basepoint,
            truncation: self.truncation,
            scale: f(&self.scale),
            coeffs: self.coeffs.iter().map(|(m, c)| (*m, f(c))).filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    /// The series `f(z)` with its natural precision.
    pub fn to_laurent(&self) -> Laurent {
        let bp = self.basepoint;
        let mut t = BTreeMap::new();
        t.insert(1, self.scale.clone());
        for (&m, c) in &self.coeffs {
            t.insert(m + 1, c * &self.scale);
        }
        let n = self.truncation as i32;
        let prec = match bp {
            Basepoint::Origin => n + 2,
            Basepoint::Infinity => n,
        };
        Laurent::from_exponents(bp, &t, Some(prec))
    }

    /// Read a germ back from a series `scale·z + …`.
    pub fn from_laurent(l: &Laurent, n: usize) -> Result<Germ> {
        let bp = l.basepoint();
        let scale = l.coeff(1)?;
        let inv = scale
            .inverse()
            .ok_or_else(|| Error::NotInvertible(format!("leading coefficient {scale}")))?;
        let mut coeffs = BTreeMap::new();
        for m in bp.gradings(n) {
            let c = l.coeff(m + 1)?;
            if !c.is_zero() {
                coeffs.insert(m, &c * &inv);
            }
        }
        match bp {
            Basepoint::Origin => {
                if !l.coeff(0)?.is_zero() {
                    return Err(Error::InvalidGerm("series does not fix the origin".into()));
                }
            }
            Basepoint::Infinity => {
                if l.valuation().is_some_and(|v| v < -1) {
                    return Err(Error::InvalidGerm("series grows faster than z".into()));
                }
            }
        }
        Germ::new(bp, n, scale, coeffs)
    }
}

impl fmt::Display for Germ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::from("z");
        for (m, c) in &self.coeffs {
            s += &format!(" + ({c})*z^{}", m + 1);
        }
        if self.scale != Poly::one() {
            write!(f, "({})*({s})", self.scale)
        } else {
            write!(f, "{s}")
        }
    }
}

/// `g(F)` for a germ `g` and a series `F` at the same basepoint.
pub fn apply_germ(g: &Germ, f: &Laurent) -> Result<Laurent> {
    if g.basepoint != f.basepoint() {
        return Err(Error::BasepointMismatch("apply_germ".into()));
    }
    let mut acc = f.clone();
    for (&m, c) in &g.coeffs {
        acc = acc.add(&f.pow(m + 1)?.scale(c))?;
    }
    Ok(acc.scale(&g.scale))
}

/// `compose(f, g)(z) = g(f(z))`.
pub fn compose(f: &Germ, g: &Germ) -> Result<Germ> {
    if f.basepoint != g.basepoint {
        return Err(Error::BasepointMismatch("compose".into()));
    }
    let n = f.truncation.min(g.truncation);
    let inner = f.truncated(n).to_laurent();
    let out = apply_germ(&g.truncated(n), &inner)?;
    Germ::from_laurent(&out, n)
}

/// `∮ dw w^{m+1} f′(w)^power / f(w)^{n+2}`.
pub fn lagrange_weight(f: &Germ, m: i32, n: i32, power: u32) -> Result<Poly> {
    let fl = f.to_laurent();
    let d = fl.derivative().pow(power as i32)?;
    let integrand = d.mul(&fl.pow(-(n + 2))?)?.shift(m + 1);
    integrand.residue()
}

/// Compositional inverse via the residue formula for its coefficients.
pub fn invert(f: &Germ) -> Result<Germ> {
    let bp = f.basepoint;
    let unit = f.unipotent();
    let inv_scale = f
        .scale
        .inverse()
        .ok_or_else(|| Error::NotInvertible(format!("scale {}", f.scale)))?;
    let mut coeffs = BTreeMap::new();
    for n in bp.gradings(f.truncation) {
        let g = lagrange_weight(&unit, 0, n, 1)?;
        if g.is_zero() {
            continue;
        }
        // λ^{-n}
        let factor = if n > 0 { inv_scale.pow(n as u32) } else { f.scale.pow((-n) as u32) };
        coeffs.insert(n, &g * &factor);
    }
    Germ::new(bp, f.truncation, inv_scale, coeffs)
}

/// `Sf = (f″/f′)′ − ½(f″/f′)²`.
pub fn schwarzian_laurent(f: &Laurent) -> Result<Laurent> {
    let d1 = f.derivative();
    let d2 = d1.derivative();
    let r = d2.mul(&d1.inverse()?)?;
    r.derivative().sub(&r.mul(&r)?.scale(&Poly::constant(qr(1, 2))))
}

pub fn schwarzian(f: &Germ) -> Result<Laurent> {
    schwarzian_laurent(&f.to_laurent())
}

/// Generic `z^{m+1}f′ − Σ_k f^{k+1} ∮ u^{m+1}f′²/f^{k+2}` with `k` running
/// between `m` and 0.
fn hm_generic(f: &Germ, m: i32) -> Result<Laurent> {
    let fl = f.to_laurent();
    let d = fl.derivative();
    let mut out = d.shift(m + 1);
    let ks: Vec<i32> = if m <= 0 { (m..=0).collect() } else { (0..=m).collect() };
    let include = match f.basepoint {
        Basepoint::Origin => m <= 0,
        Basepoint::Infinity => m >= 0,
    };
    if include {
        for k in ks {
            let w = lagrange_weight(f, m, k, 2)?;
            if !w.is_zero() {
                out = out.sub(&fl.pow(k + 1)?.scale(&w))?;
            }
        }
    }
    Ok(out)
}

/// `h_m(z)` for an origin germ, `i_m(z)` (ℛ-convention index) for a germ at ∞.
pub fn hm_series(f: &Germ, m: i32) -> Result<Laurent> {
    match f.basepoint {
        Basepoint::Origin => hm_generic(f, m),
        Basepoint::Infinity => hm_generic(f, -m),
    }
}

/// Generalized binomial coefficient `binom(a, k)`.
pub fn binom_q(a: &Q, k: u32) -> Q {
    let mut acc = Q::one();
    for j in 0..k {
        acc = acc * (a - q(j as i64)) / q(j as i64 + 1);
    }
    acc
}

/// `(z^{−2}+α^{−2})^{−1/2} = z(1+z²/α²)^{−1/2}` at 0, parameterized by `α^{−2}`.
pub fn slit_from_above(alpha_inv_sq: impl Into<Poly>, n: usize) -> Germ {
    let p: Poly = alpha_inv_sq.into();
    let mut coeffs = BTreeMap::new();
    for k in 1..=(n / 2) as u32 {
        coeffs.insert(2 * k as i32, p.pow(k).scale(&binom_q(&qr(-1, 2), k)));
    }
    Germ::new(Basepoint::Origin, n, Poly::one(), coeffs).expect("legal germ")
}

/// `√(z²+β²) = z(1+β²/z²)^{1/2}` at ∞, parameterized by `β²`.
pub fn slit_from_origin(beta_sq: impl Into<Poly>, n: usize) -> Germ {
    let p: Poly = beta_sq.into();
    let mut coeffs = BTreeMap::new();
    for k in 1..=(n / 2) as u32 {
        coeffs.insert(-2 * k as i32, p.pow(k).scale(&binom_q(&qr(1, 2), k)));
    }
    Germ::new(Basepoint::Infinity, n, Poly::one(), coeffs).expect("legal germ")
}

/// `z + β²/z` at ∞ (half disc of radius β centred at 0).
pub fn half_disc_at_origin(beta_sq: impl Into<Poly>, n: usize) -> Germ {
    let p: Poly = beta_sq.into();
    let mut coeffs = BTreeMap::new();
    if n >= 2 {
        coeffs.insert(-2, p);
    }
    Germ::new(Basepoint::Infinity, n, Poly::one(), coeffs).expect("legal germ")
}

/// A rational function `num(z)/den(z)` with rational coefficients
/// (ascending powers), expandable at 0 and at ∞.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap {
    pub num: Vec<Q>,
    pub den: Vec<Q>,
}

fn poly_trim(mut v: Vec<Q>) -> Vec<Q> {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
    v
}

impl RationalMap {
    pub fn new(num: Vec<Q>, den: Vec<Q>) -> Result<Self> {
        let num = poly_trim(num);
        let den = poly_trim(den);
        if den.is_empty() {
            return Err(Error::Invalid("zero denominator".into()));
        }
        Ok(RationalMap { num, den })
    }

    /// `z + r²/(z−x₀) + r²/x₀`, the map removing the half disc of radius `r`
    /// centred at `x₀`, normalized to fix 0.
    pub fn half_disc(x0: &Q, r: &Q) -> Result<Self> {
        if x0.is_zero() {
            return Err(Error::Invalid("half disc centred at the origin does not fix 0".into()));
        }
        let r2 = r * r;
        // (z(z−x₀)x₀ + r²x₀ + r²(z−x₀)) / (x₀(z−x₀))
        let num = vec![Q::zero(), -(x0 * x0) + &r2, x0.clone()];
        let den = vec![-(x0 * x0), x0.clone()];
        RationalMap::new(num, den)
    }

    /// `λ·z`.
    pub fn dilation(l: &Q) -> Self {
        RationalMap { num: vec![Q::zero(), l.clone()], den: vec![Q::one()] }
    }

    pub fn compose_scale(&self, l: &Q) -> Self {
        RationalMap { num: self.num.iter().map(|c| c * l).collect(), den: self.den.clone() }
    }

    fn series(&self, bp: Basepoint, n: usize) -> Result<Laurent> {
        let to_l = |v: &Vec<Q>| {
            let t: BTreeMap<i32, Poly> =
                v.iter().enumerate().map(|(i, c)| (i as i32, Poly::constant(c.clone()))).collect();
            Laurent::from_exponents(bp, &t, None)
        };
        let num = to_l(&self.num);
        let den = to_l(&self.den);
        // give the denominator a finite precision so that it can be inverted
        let v = den.valuation().unwrap_or(0);
        let den = den.truncate_to(v + n as i32 + 3);
        num.mul(&den.inverse()?)
    }

    pub fn germ_at_origin(&self, n: usize) -> Result<Germ> {
        if self.den[0].is_zero() {
            return Err(Error::Invalid("map has a pole at 0".into()));
        }
        if self.num.first().is_some_and(|c| !c.is_zero()) {
            return Err(Error::Invalid("map does not fix 0".into()));
        }
        let l = self.series(Basepoint::Origin, n)?.truncate_to(n as i32 + 2);
        if l.coeff(1)?.is_zero() {
            return Err(Error::Invalid("map is critical at 0".into()));
        }
        Germ::from_laurent(&l, n)
    }

    pub fn germ_at_infinity(&self, n: usize) -> Result<Germ> {
        if self.num.len() != self.den.len() + 1 {
            return Err(Error::Invalid("map is not z + O(1) at ∞ up to scale".into()));
        }
        let l = self.series(Basepoint::Infinity, n)?.truncate_to(n as i32);
        Germ::from_laurent(&l, n)
    }
}

/// JSON germ literal: `{basepoint, scale: "p/q", coeffs: {"m": "p/q"}, truncation}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GermLiteral {
    pub basepoint: Basepoint,
    #[serde(default)]
    pub scale: Option<String>,
    #[serde(default)]
    pub coeffs: BTreeMap<String, String>,
    pub truncation: usize,
}

impl GermLiteral {
    pub fn to_germ(&self) -> Result<Germ> {
        let scale = match &self.scale {
            Some(s) => parse_q(s).ok_or_else(|| Error::InvalidGerm(format!("bad scale {s:?}")))?,
            None => Q::one(),
        };
        let mut coeffs = BTreeMap::new();
        for (k, v) in &self.coeffs {
            let m: i32 = k.trim().parse().map_err(|_| Error::InvalidGerm(format!("bad grading {k:?}")))?;
            let c = parse_q(v).ok_or_else(|| Error::InvalidGerm(format!("bad coefficient {v:?}")))?;
            if m.unsigned_abs() as usize > self.truncation {
                return Err(Error::InvalidGerm(format!("grading {m} beyond truncation")));
            }
            coeffs.insert(m, Poly::constant(c));
        }
        Germ::new(self.basepoint, self.truncation, Poly::constant(scale), coeffs)
    }

    pub fn from_germ(g: &Germ) -> Result<Self> {
        let scale = g
            .scale
            .as_constant()
            .ok_or_else(|| Error::InvalidGerm("scale is not a number".into()))?;
        let mut coeffs = BTreeMap::new();
        for (m, c) in g.coeffs() {
            let c = c.as_constant().ok_or_else(|| Error::InvalidGerm("formal coefficient".into()))?;
            coeffs.insert(m.to_string(), fmt_q(&c));
        }
        Ok(GermLiteral { basepoint: g.basepoint, scale: Some(fmt_q(&scale)), coeffs, truncation: g.truncation })
    }
}

/// Substitute `f_l → λ^{|l|} f_l` (used for grading checks).
pub fn rescale_f(p: &Poly, lambda: &Q) -> Poly {
    let subs: Vec<(Var, Poly)> = p
        .vars()
        .into_iter()
        .filter_map(|v| match v {
            Var::F(l) => Some((v, Poly::f(l).scale(&num_traits::pow(lambda.clone(), l.unsigned_abs() as usize)))),
            _ => None,
        })
        .collect();
    p.subst(&subs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn og(n: usize, c: &[(i32, i64)]) -> Germ {
        Germ::from_q(Basepoint::Origin, n, &c.iter().map(|&(m, x)| (m, q(x))).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn compose_polynomials() {
        // (z+z²) then (z+z³): z + z² + z³ + 3z⁴ + 3z⁵ + z⁶
        let f = og(5, &[(1, 1)]);
        let g = og(5, &[(2, 1)]);
        let h = compose(&f, &g).unwrap();
        let expect = og(5, &[(1, 1), (2, 1), (3, 3), (4, 3), (5, 1)]);
        assert_eq!(h, expect);
    }

    #[test]
    fn invert_catalan() {
        let f = og(5, &[(1, 1)]);
        let g = invert(&f).unwrap();
        let expect = og(5, &[(1, -1), (2, 2), (3, -5), (4, 14), (5, -42)]);
        assert_eq!(g, expect);
        assert!(compose(&f, &g).unwrap().is_identity());
    }

    #[test]
    fn invert_translation_at_infinity() {
        let f = Germ::from_q(Basepoint::Infinity, 4, &[(-1, q(3))]).unwrap();
        let g = invert(&f).unwrap();
        assert_eq!(g, Germ::from_q(Basepoint::Infinity, 4, &[(-1, q(-3))]).unwrap());
    }

    #[test]
    fn residues_of_identity() {
        for bp in [Basepoint::Origin, Basepoint::Infinity] {
            let id = Germ::identity(bp, 8);
            for m in -3..=3 {
                for n in -3..=3 {
                    let r = lagrange_weight(&id, m, n, 1).unwrap();
                    assert_eq!(r, Poly::int((m == n) as i64), "{bp:?} {m} {n}");
                }
            }
        }
    }

    #[test]
    fn small_lagrange_weight() {
        let f = Germ::formal(Basepoint::Origin, 3);
        // f′/f⁴ = w⁻⁴(1 + 2f₁w)(1 − 4f₁w + …)
        let w = lagrange_weight(&f, 1, 2, 1).unwrap();
        assert_eq!(w, Poly::f(1).scale(&q(-2)));
        assert!(lagrange_weight(&f, 2, 1, 1).unwrap().is_zero());
        assert!(matches!(lagrange_weight(&f, 0, 4, 1), Err(Error::WindowExhausted { .. })));
    }

    #[test]
    fn mobius_has_zero_schwarzian() {
        // z/(1−az) = z + a z² + a² z³ + …
        let a = qr(2, 3);
        let f = Germ::from_q(
            Basepoint::Origin,
            8,
            &(1..=8).map(|m| (m, num_traits::pow(a.clone(), m as usize))).collect::<Vec<_>>(),
        )
        .unwrap();
        let s = schwarzian(&f).unwrap();
        assert!(s.terms().is_empty());
        assert!(s.precision() >= 6);
    }

    #[test]
    fn rational_map_half_disc() {
        let m = RationalMap::half_disc(&q(3), &q(1)).unwrap();
        let g0 = m.germ_at_origin(4).unwrap();
        assert_eq!(g0.scale, Poly::constant(qr(8, 9)));
        let gi = m.germ_at_infinity(4).unwrap();
        assert_eq!(gi.coeff(-1), Poly::constant(qr(1, 3)));
        assert_eq!(gi.coeff(-2), Poly::int(1));
        assert_eq!(gi.coeff(-3), Poly::int(3));
    }

    #[test]
    fn literal_roundtrip() {
        let js = r#"{"basepoint":"origin","coeffs":{"1":"1/2","2":"-3"},"truncation":4}"#;
        let lit: GermLiteral = serde_json::from_str(js).unwrap();
        let g = lit.to_germ().unwrap();
        assert_eq!(g.coeff(1), Poly::constant(qr(1, 2)));
        let back = GermLiteral::from_germ(&g).unwrap();
        assert_eq!(back.to_germ().unwrap(), g);
        let bad = r#"{"basepoint":"origin","coeffs":{"-1":"1"},"truncation":4}"#;
        let lit: GermLiteral = serde_json::from_str(bad).unwrap();
        assert!(lit.to_germ().is_err());
    }
}
