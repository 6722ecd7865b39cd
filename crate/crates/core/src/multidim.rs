//! Superattracting germs `f(x) = C x^D (1 + ε(x))` in `N` variables and their
//! conjugacy to the monomial map `C x^D` when `p` does not divide `det D`.
//!
//! Vectors are rows and `(x^D)^j = Π_i (x^i)^{d_i^j}`: column `j` of `D`
//! holds the exponents of coordinate `j`. Likewise `(u^M)^j = Π_i u_i^{M_i^j}`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::fields::{poly_roots, FieldElement, FieldError, FieldJson, FieldRef};
use crate::scalar::Scalar;
use crate::series::{BinomialMod, SeriesError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultiError {
    #[error("exponent matrix is singular")]
    SingularMatrix,
    #[error("det D = {det} is divisible by p = {p}")]
    DetDivisibleByP { det: String, p: u64 },
    #[error("map is not contracting: vanishing orders stopped growing")]
    NotContracting,
    #[error("invalid germ: {0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Exponent = Vec<u32>;

/// A power series in `n` variables known up to total degree `trunc`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeries {
    n: usize,
    terms: BTreeMap<Exponent, FieldElement>,
    trunc: usize,
    zero: FieldElement,
}

fn degree(e: &[u32]) -> usize {
    e.iter().map(|&x| x as usize).sum()
}

impl MultiSeries {
    pub fn zero(n: usize, zero: FieldElement, trunc: usize) -> Self {
        MultiSeries { n, terms: BTreeMap::new(), trunc, zero }
    }

    pub fn from_terms(n: usize, zero: FieldElement, terms: impl IntoIterator<Item = (Exponent, FieldElement)>, trunc: usize) -> Self {
        let mut s = Self::zero(n, zero, trunc);
        for (e, c) in terms {
            assert_eq!(e.len(), n, "exponent of wrong length");
            s.add_term(e, &c);
        }
        s
    }

    pub fn monomial(n: usize, c: FieldElement, e: Exponent, trunc: usize) -> Self {
        Self::from_terms(n, c.zero_like(), [(e, c)], trunc)
    }

    pub fn constant(n: usize, c: FieldElement, trunc: usize) -> Self {
        Self::monomial(n, c, vec![0; n], trunc)
    }

    pub fn one(n: usize, like: &FieldElement, trunc: usize) -> Self {
        Self::constant(n, like.one_like(), trunc)
    }

    /// The coordinate function `x^i`.
    pub fn var(n: usize, i: usize, like: &FieldElement, trunc: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Self::monomial(n, like.one_like(), e, trunc)
    }

    fn add_term(&mut self, e: Exponent, c: &FieldElement) {
        if c.is_zero() || degree(&e) > self.trunc {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }
    pub fn trunc(&self) -> usize {
        self.trunc
    }
    pub fn terms(&self) -> &BTreeMap<Exponent, FieldElement> {
        &self.terms
    }
    pub fn zero_scalar(&self) -> &FieldElement {
        &self.zero
    }

    pub fn coeff(&self, e: &[u32]) -> FieldElement {
        self.terms.get(e).cloned().unwrap_or_else(|| self.zero.clone())
    }

    /// Lowest total degree of a term, `None` if no term is visible.
    pub fn ord(&self) -> Option<usize> {
        self.terms.keys().map(|e| degree(e)).min()
    }

    pub fn truncate(&self, t: usize) -> Self {
        let t = t.min(self.trunc);
        let terms = self.terms.iter().filter(|(e, _)| degree(e) <= t).map(|(e, c)| (e.clone(), c.clone())).collect();
        MultiSeries { n: self.n, terms, trunc: t, zero: self.zero.clone() }
    }

    pub fn lift_to(&self, like: &FieldElement) -> Self {
        let terms = self.terms.iter().map(|(e, c)| (e.clone(), c.lift_to(like))).collect();
        MultiSeries { n: self.n, terms, trunc: self.trunc, zero: like.zero_like() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.truncate(other.trunc);
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&self.zero.one_like().neg()))
    }

    pub fn scale(&self, c: &FieldElement) -> Self {
        let terms = self.terms.iter().map(|(e, x)| (e.clone(), x.mul(c))).collect::<Vec<_>>();
        Self::from_terms(self.n, self.zero.clone(), terms, self.trunc)
    }

    /// Product, known to `min(T_a + ord b, T_b + ord a)`.
    pub fn mul(&self, other: &Self) -> Self {
        let big = usize::MAX / 4;
        let oa = self.ord().unwrap_or(big);
        let ob = other.ord().unwrap_or(big);
        let t = self.trunc.saturating_add(ob).min(other.trunc.saturating_add(oa));
        let t = t.min(self.trunc.max(other.trunc));
        let mut out = Self::zero(self.n, self.zero.clone(), t);
        for (ea, ca) in &self.terms {
            let da = degree(ea);
            for (eb, cb) in &other.terms {
                if da + degree(eb) > t {
                    continue;
                }
                let e: Exponent = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(e, &ca.mul(cb));
            }
        }
        out
    }

    pub fn pow(&self, mut k: u64) -> Self {
        let mut acc = Self::one(self.n, &self.zero, self.trunc);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `self(g_1, ..., g_n)`; every `g_i` must vanish at 0.
    pub fn compose(&self, g: &[MultiSeries]) -> Result<Self, MultiError> {
        assert_eq!(g.len(), self.n, "wrong number of inner series");
        if g.iter().any(|gi| !gi.coeff(&vec![0; gi.n]).is_zero()) {
            return Err(MultiError::Invalid("inner series must vanish at 0".into()));
        }
        let m = g[0].n;
        let t = g.iter().map(|gi| gi.trunc).min().unwrap().min(self.trunc);
        let maxdeg = self.terms.keys().map(|e| degree(e)).max().unwrap_or(0).min(t);
        let powers: Vec<Vec<MultiSeries>> = g
            .iter()
            .map(|gi| {
                let gi = gi.truncate(t);
                let mut v = vec![MultiSeries::one(m, &self.zero, t)];
                for k in 1..=maxdeg {
                    let next = v[k - 1].mul(&gi).truncate(t);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = MultiSeries::zero(m, self.zero.clone(), t);
        for (e, c) in &self.terms {
            if degree(e) > t {
                continue;
            }
            let mut term = MultiSeries::constant(m, c.clone(), t);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = term.mul(&powers[i][k as usize]).truncate(t);
                }
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// `1 / self` for `self(0) != 0`.
    pub fn reciprocal(&self) -> Option<Self> {
        let c0 = self.coeff(&vec![0; self.n]);
        let c0i = c0.inv()?;
        let u = self.scale(&c0i).sub(&Self::one(self.n, &self.zero, self.trunc));
        let mut out = Self::one(self.n, &self.zero, self.trunc);
        let mut pw = out.clone();
        let minus_u = u.scale(&self.zero.one_like().neg());
        for _ in 0..self.trunc {
            pw = pw.mul(&minus_u);
            if pw.terms.is_empty() {
                break;
            }
            out = out.add(&pw);
        }
        Some(out.scale(&c0i))
    }

    /// `self / x^e`, which must be a power series.
    pub fn div_monomial(&self, e: &[u32]) -> Option<Self> {
        let de = degree(e);
        let mut out = Self::zero(self.n, self.zero.clone(), self.trunc.checked_sub(de)?);
        for (k, c) in &self.terms {
            let q: Option<Exponent> = k.iter().zip(e).map(|(a, b)| a.checked_sub(*b)).collect();
            out.add_term(q?, c);
        }
        Some(out)
    }

    /// Componentwise minimum of the exponents in the support.
    pub fn min_exponent(&self) -> Option<Exponent> {
        let mut it = self.terms.keys();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, e| acc.iter().zip(e).map(|(a, b)| *a.min(b)).collect()))
    }

    /// `{"i,j,...": coeffs}` for the visible terms.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (e, c) in &self.terms {
            let key = e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            m.insert(key, json!(c.coeffs()));
        }
        Value::Object(m)
    }

    pub fn from_json(n: usize, field: FieldRef, v: &Value, trunc: usize) -> Result<Self, MultiError> {
        let obj = v.as_object().ok_or_else(|| MultiError::Invalid("series must be an object".into()))?;
        let mut terms = Vec::new();
        for (k, c) in obj {
            let e: Result<Exponent, _> = k.split(',').map(|s| s.trim().parse::<u32>()).collect();
            let e = e.map_err(|_| MultiError::Invalid(format!("bad multi-index {k}")))?;
            if e.len() != n {
                return Err(MultiError::Invalid(format!("multi-index {k} has wrong length")));
            }
            terms.push((e, parse_element(field, c)?));
        }
        Ok(Self::from_terms(n, field.zero(), terms, trunc))
    }
}

fn parse_element(field: FieldRef, v: &Value) -> Result<FieldElement, MultiError> {
    let coeffs: Vec<u64> = match v {
        Value::Number(n) => vec![n.as_u64().ok_or_else(|| MultiError::Invalid("bad element".into()))?],
        Value::Array(a) => a.iter().map(|x| x.as_u64().ok_or_else(|| MultiError::Invalid("bad element".into()))).collect::<Result<_, _>>()?,
        _ => return Err(MultiError::Invalid("bad element".into())),
    };
    Ok(field.element(&coeffs))
}

/// `C x^D (1 + ε(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGerm {
    pub c: Vec<FieldElement>,
    /// `d[i][j] = d_i^j`.
    pub d: Vec<Vec<u64>>,
    pub eps: Vec<MultiSeries>,
}

impl MultiGerm {
    pub fn new(c: Vec<FieldElement>, d: Vec<Vec<u64>>, eps: Vec<MultiSeries>) -> Result<Self, MultiError> {
        let n = c.len();
        if n == 0 || d.len() != n || d.iter().any(|r| r.len() != n) || eps.len() != n {
            return Err(MultiError::Invalid("dimensions of C, D and eps disagree".into()));
        }
        if c.iter().any(|x| x.is_zero()) {
            return Err(MultiError::Invalid("C has a zero entry".into()));
        }
        if eps.iter().any(|e| e.nvars() != n || !e.coeff(&vec![0; n]).is_zero()) {
            return Err(MultiError::Invalid("eps must vanish at 0".into()));
        }
        if (0..n).any(|j| (0..n).map(|i| d[i][j]).sum::<u64>() == 0) {
            return Err(MultiError::Invalid("every column of D needs a positive entry".into()));
        }
        // the order of (f^{∘k})^j is column sum j of D^k; a column sum of 1 in
        // D^n lies on a cycle of unit columns and never grows
        let dn = int_matrix_pow(&d, n as u32);
        if (0..n).any(|j| col_sum(&dn, j) < 2) {
            return Err(MultiError::NotContracting);
        }
        Ok(MultiGerm { c, d, eps })
    }

    pub fn nvars(&self) -> usize {
        self.c.len()
    }

    pub fn like(&self) -> &FieldElement {
        &self.c[0]
    }

    /// The components `f^j` as series to total degree `t`.
    pub fn components(&self, t: usize) -> Vec<MultiSeries> {
        let n = self.nvars();
        (0..n)
            .map(|j| {
                let e: Exponent = (0..n).map(|i| self.d[i][j] as u32).collect();
                let mono = MultiSeries::monomial(n, self.c[j].clone(), e, t);
                let unit = MultiSeries::one(n, self.like(), t).add(&self.eps[j].truncate(t));
                mono.mul(&unit).truncate(t)
            })
            .collect()
    }

    /// `C x^D`.
    pub fn leading_part(&self) -> MultiGerm {
        let n = self.nvars();
        let eps = (0..n).map(|_| MultiSeries::zero(n, self.like().zero_like(), usize::MAX / 4)).collect();
        MultiGerm { c: self.c.clone(), d: self.d.clone(), eps }
    }

    /// Read `C`, `D` and `ε` off the components of a map.
    pub fn from_components(comps: &[MultiSeries]) -> Result<Self, MultiError> {
        let n = comps.len();
        let mut c = Vec::new();
        let mut d = vec![vec![0u64; n]; n];
        let mut eps = Vec::new();
        for (j, g) in comps.iter().enumerate() {
            let e = g.min_exponent().ok_or_else(|| MultiError::Invalid(format!("component {j} is zero")))?;
            let cj = g.coeff(&e);
            if cj.is_zero() {
                return Err(MultiError::Invalid(format!("component {j} is not a monomial times a unit")));
            }
            for i in 0..n {
                d[i][j] = e[i] as u64;
            }
            let u = g.div_monomial(&e).unwrap().scale(&cj.inv().unwrap());
            eps.push(u.sub(&MultiSeries::one(n, &cj, u.trunc())));
            c.push(cj);
        }
        MultiGerm::new(c, d, eps)
    }

    pub fn to_json(&self) -> Value {
        let field = self.like().field();
        json!({
            "N": self.nvars(),
            "field": field.to_json(),
            "C": self.c.iter().map(|x| x.coeffs().to_vec()).collect::<Vec<_>>(),
            "D": self.d,
            "eps": self.eps.iter().map(|e| e.to_json()).collect::<Vec<_>>(),
        })
    }

    /// Parse the JSON form; `eps` is read to total degree `trunc`.
    pub fn from_json(v: &Value, trunc: usize) -> Result<Self, MultiError> {
        let bad = |s: &str| MultiError::Invalid(s.to_string());
        let n = v["N"].as_u64().ok_or_else(|| bad("missing N"))? as usize;
        let fj: FieldJson = serde_json::from_value(v["field"].clone()).map_err(|e| bad(&e.to_string()))?;
        let field = fj.create()?;
        let c = v["C"].as_array().ok_or_else(|| bad("missing C"))?.iter().map(|x| parse_element(field, x)).collect::<Result<Vec<_>, _>>()?;
        let d: Vec<Vec<u64>> = serde_json::from_value(v["D"].clone()).map_err(|e| bad(&e.to_string()))?;
        let eps = match v.get("eps") {
            Some(Value::Array(a)) => a.iter().map(|e| MultiSeries::from_json(n, field, e, trunc)).collect::<Result<Vec<_>, _>>()?,
            _ => (0..n).map(|_| MultiSeries::zero(n, field.zero(), trunc)).collect(),
        };
        MultiGerm::new(c, d, eps)
    }
}

fn col_sum(m: &[Vec<u64>], j: usize) -> u64 {
    m.iter().map(|r| r[j]).sum()
}

fn int_matrix_pow(d: &[Vec<u64>], k: u32) -> Vec<Vec<u64>> {
    let n = d.len();
    let mut acc: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u64).collect()).collect();
    for _ in 0..k {
        acc = (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| acc[i][l].saturating_mul(d[l][j])).fold(0u64, |a, b| a.saturating_add(b))).collect()).collect();
    }
    acc
}

/// Maps `F ∘ G` given by components.
pub fn compose_maps(f: &[MultiSeries], g: &[MultiSeries]) -> Result<Vec<MultiSeries>, MultiError> {
    f.iter().map(|fi| fi.compose(g)).collect()
}

pub type RatMatrix = Vec<Vec<BigRational>>;

fn to_rat(d: &[Vec<i64>]) -> RatMatrix {
    d.iter().map(|r| r.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect()).collect()
}

fn rat_mul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let n = a.len();
    let m = b[0].len();
    (0..n).map(|i| (0..m).map(|j| (0..b.len()).fold(BigRational::zero(), |s, l| s + &a[i][l] * &b[l][j])).collect()).collect()
}

/// Row echelon form; returns `(rank, det)` for square input.
fn gauss(mut a: RatMatrix, mut inv: Option<&mut RatMatrix>) -> (usize, BigRational) {
    let n = a.len();
    let cols = a[0].len();
    let mut det = BigRational::one();
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..n).find(|&r| !a[r][col].is_zero()) else {
            det = BigRational::zero();
            continue;
        };
        if piv != rank {
            a.swap(piv, rank);
            if let Some(m) = inv.as_deref_mut() {
                m.swap(piv, rank);
            }
            det = -det;
        }
        let pv = a[rank][col].clone();
        det *= &pv;
        for x in a[rank].iter_mut() {
            *x /= &pv;
        }
        if let Some(m) = inv.as_deref_mut() {
            for x in m[rank].iter_mut() {
                *x /= &pv;
            }
        }
        for r in 0..n {
            if r != rank && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..cols {
                    let v = &a[rank][c] * &f;
                    a[r][c] -= v;
                }
                if let Some(m) = inv.as_deref_mut() {
                    for c in 0..m[0].len() {
                        let v = &m[rank][c] * &f;
                        m[r][c] -= v;
                    }
                }
            }
        }
        rank += 1;
    }
    if rank < n {
        det = BigRational::zero();
    }
    (rank, det)
}

pub fn det_int(d: &[Vec<i64>]) -> BigInt {
    gauss(to_rat(d), None).1.to_integer()
}

pub fn rank_int(d: &[Vec<i64>]) -> usize {
    gauss(to_rat(d), None).0
}

fn signed(d: &[Vec<u64>]) -> Vec<Vec<i64>> {
    d.iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect()
}

/// `D^{-k}` and whether every entry `a/b` has `ν_p(a) >= ν_p(b)`.
pub fn matrix_power_padic(d: &[Vec<i64>], k: u32, p: u64) -> Result<(RatMatrix, bool), MultiError> {
    let n = d.len();
    let mut inv: RatMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    let (rank, _) = gauss(to_rat(d), Some(&mut inv));
    if rank < n {
        return Err(MultiError::SingularMatrix);
    }
    let mut out: RatMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    for _ in 0..k {
        out = rat_mul(&out, &inv);
    }
    let pb = BigInt::from(p);
    let integral = out.iter().flatten().all(|x| x.is_zero() || !x.denom().is_multiple_of(&pb));
    Ok((out, integral))
}

/// `u^{a/b}` for a unit `u` with `u(0) = 1`.
fn unit_power(u: &MultiSeries, r: &BigRational) -> Result<MultiSeries, MultiError> {
    let n = u.nvars();
    let one = MultiSeries::one(n, u.zero_scalar(), u.trunc());
    if r.is_zero() {
        return Ok(one);
    }
    let p = u.zero_scalar().characteristic();
    let (a, b) = (r.numer().clone(), r.denom().clone());
    if b.is_multiple_of(&BigInt::from(p)) {
        return Err(SeriesError::PadicObstruction { a: a.to_string(), b: b.to_string() }.into());
    }
    let w = u.sub(&one);
    let mut out = one.clone();
    let mut wn = one;
    let mut c = BinomialMod::new(p, a, b);
    let ord = w.ord().unwrap_or(usize::MAX);
    let mut k = 1;
    while ord != usize::MAX && k * ord <= u.trunc() {
        c.step();
        wn = wn.mul(&w);
        let cv = c.value();
        if cv != 0 {
            out = out.add(&wn.scale(&u.zero_scalar().from_u64_like(cv)));
        }
        k += 1;
    }
    Ok(out)
}

/// `(u^M)^j = Π_i u_i^{M_i^j}`.
pub fn multi_unit_power(u: &[MultiSeries], m: &RatMatrix) -> Result<Vec<MultiSeries>, MultiError> {
    let n = u.len();
    let cols = m[0].len();
    let like = u[0].zero_scalar();
    let t = u.iter().map(|x| x.trunc()).min().unwrap();
    if u.iter().any(|x| !x.coeff(&vec![0; x.nvars()]).is_one()) {
        return Err(SeriesError::NotOneAtZero.into());
    }
    let mut out = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut acc = MultiSeries::one(u[0].nvars(), like, t);
        for i in 0..n {
            acc = acc.mul(&unit_power(&u[i], &m[i][j])?);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Result of [`monomial_conjugacy`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialConjugacy {
    /// `φ^j` with `φ^j(0) = 1`.
    pub phi: Vec<MultiSeries>,
    /// `Φ^j = x^j φ^j`.
    pub big_phi: Vec<MultiSeries>,
    pub verified: usize,
    /// Vanishing order of `ε ∘ f^{∘k}` for `k = 0, 1, ...` until it exceeds `T`.
    pub orders: Vec<usize>,
}

/// First total degree `<= t` where `Φ ∘ f` and `f̃ ∘ Φ` differ.
pub fn verify_multi(f: &[MultiSeries], f_tilde: &[MultiSeries], big_phi: &[MultiSeries], t: usize) -> Result<Option<usize>, MultiError> {
    let lhs = compose_maps(big_phi, f)?;
    let rhs = compose_maps(f_tilde, big_phi)?;
    let mut first: Option<usize> = None;
    for (a, b) in lhs.iter().zip(&rhs) {
        let diff = a.truncate(t).sub(&b.truncate(t));
        if let Some(o) = diff.ord() {
            first = Some(first.map_or(o, |f| f.min(o)));
        }
    }
    Ok(first)
}

/// `Φ = x φ` with `Φ ∘ f = C x^D ∘ Φ` to total degree `t`, from the product
/// `φ = Π_{k>=1} (1 + ε ∘ f^{∘(k-1)})^{D^{-k}}`.
pub fn monomial_conjugacy(f: &MultiGerm, t: usize) -> Result<MonomialConjugacy, MultiError> {
    let n = f.nvars();
    let like = f.like().clone();
    let p = like.characteristic();
    let ds = signed(&f.d);
    let det = det_int(&ds);
    if det.is_zero() {
        return Err(MultiError::SingularMatrix);
    }
    if det.is_multiple_of(&BigInt::from(p)) {
        return Err(MultiError::DetDivisibleByP { det: det.to_string(), p });
    }
    let comps = f.components(t);
    let eps: Vec<MultiSeries> = f.eps.iter().map(|e| e.truncate(t)).collect();
    let mut iterate: Vec<MultiSeries> = (0..n).map(|i| MultiSeries::var(n, i, &like, t)).collect();
    let mut phi: Vec<MultiSeries> = (0..n).map(|_| MultiSeries::one(n, &like, t)).collect();
    let mut orders = Vec::new();
    let mut k = 1u32;
    loop {
        let e = compose_maps(&eps, &iterate)?;
        let ord = e.iter().filter_map(|x| x.ord()).min().unwrap_or(t + 1);
        orders.push(ord.min(t + 1));
        if ord > t {
            break;
        }
        if orders.len() > t + 2 {
            return Err(MultiError::NotContracting);
        }
        let (m, integral) = matrix_power_padic(&ds, k, p)?;
        if !integral {
            return Err(MultiError::Internal("D^{-k} not p-integral although p does not divide det D".into()));
        }
        let units: Vec<MultiSeries> = e.iter().map(|x| MultiSeries::one(n, &like, t).add(x)).collect();
        let factor = multi_unit_power(&units, &m)?;
        phi = phi.iter().zip(&factor).map(|(a, b)| a.mul(b).truncate(t)).collect();
        iterate = compose_maps(&comps, &iterate)?;
        k += 1;
    }
    let big_phi: Vec<MultiSeries> = phi.iter().enumerate().map(|(i, x)| x.mul(&MultiSeries::var(n, i, &like, t + 1)).truncate(t)).collect();
    let lead = f.leading_part().components(t);
    if let Some(o) = verify_multi(&comps, &lead, &big_phi, t)? {
        return Err(MultiError::Internal(format!("monomial conjugacy fails at degree {o}")));
    }
    Ok(MonomialConjugacy { phi, big_phi, verified: t, orders })
}

/// Inverse of a map `Ψ = x ψ` with `ψ(0) = 1`, to total degree `t`.
pub fn inverse_tangent_identity(big_phi: &[MultiSeries], t: usize) -> Result<Vec<MultiSeries>, MultiError> {
    let n = big_phi.len();
    let like = big_phi[0].zero_scalar().clone();
    let mut unit = Vec::new();
    for (i, c) in big_phi.iter().enumerate() {
        let mut e = vec![0; n];
        e[i] = 1;
        let u = c.div_monomial(&e).ok_or_else(|| MultiError::Invalid("map is not of the form x φ(x)".into()))?;
        if !u.coeff(&vec![0; n]).is_one() {
            return Err(MultiError::Invalid("φ(0) must be 1".into()));
        }
        unit.push(u.truncate(t));
    }
    // Ψ = x / φ(Ψ), each pass fixes one more degree
    let x: Vec<MultiSeries> = (0..n).map(|i| MultiSeries::var(n, i, &like, t)).collect();
    let mut psi = x.clone();
    for _ in 0..=t {
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let r = unit[i].compose(&psi)?.reciprocal().ok_or_else(|| MultiError::Internal("non-unit".into()))?;
            next.push(x[i].mul(&r).truncate(t));
        }
        psi = next;
    }
    Ok(psi)
}

/// Outcome of [`diagonal_scaling`].
#[derive(Debug, Clone, PartialEq)]
pub enum DiagonalScaling {
    /// `x -> Δ x` turns `C` into the all-ones vector.
    Scaling(Vec<FieldElement>),
    /// `1` is an eigenvalue of `D`; the moduli space has this dimension.
    Moduli { dimension: usize },
}

/// Smith form `P A Q = diag(s)` with unimodular `P`, `Q`.
pub(crate) fn smith(a: &[Vec<i64>]) -> (Vec<i128>, Vec<Vec<i128>>, Vec<Vec<i128>>) {
    let n = a.len();
    let mut a: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let id = |n: usize| -> Vec<Vec<i128>> { (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect() };
    let mut p = id(n);
    let mut q = id(n);
    for t in 0..n {
        loop {
            let piv = (t..n).flat_map(|i| (t..n).map(move |j| (i, j))).filter(|&(i, j)| a[i][j] != 0).min_by_key(|&(i, j)| a[i][j].abs());
            let Some((pi, pj)) = piv else { break };
            a.swap(t, pi);
            p.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            for row in q.iter_mut() {
                row.swap(t, pj);
            }
            let mut clean = true;
            for i in t + 1..n {
                let f = a[i][t] / a[t][t];
                for j in 0..n {
                    a[i][j] -= f * a[t][j];
                    p[i][j] -= f * p[t][j];
                }
                clean &= a[i][t] == 0;
            }
            for j in t + 1..n {
                let f = a[t][j] / a[t][t];
                for i in 0..n {
                    a[i][j] -= f * a[i][t];
                    q[i][j] -= f * q[i][t];
                }
                clean &= a[t][j] == 0;
            }
            if clean {
                let bad = (t + 1..n).find(|&i| (t + 1..n).any(|j| a[i][j] % a[t][t] != 0));
                match bad {
                    Some(i) => {
                        for j in 0..n {
                            a[t][j] += a[i][j];
                            p[t][j] += p[i][j];
                        }
                    }
                    None => break,
                }
            }
        }
        if a[t][t] < 0 {
            for j in 0..n {
                a[t][j] = -a[t][j];
                p[t][j] = -p[t][j];
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), p, q)
}

fn pow_signed(x: &FieldElement, e: i128) -> FieldElement {
    let b = if e < 0 { x.inv().expect("nonzero") } else { x.clone() };
    b.pow(e.unsigned_abs())
}

/// `Δ` with `C^j Δ^{(D - Id) e_j} = 1`, solved through the Smith form of
/// `D - Id`; roots are taken in extensions when needed.
pub fn diagonal_scaling(c: &[FieldElement], d: &[Vec<u64>], seed: u64) -> Result<DiagonalScaling, MultiError> {
    let n = c.len();
    let a: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| d[i][j] as i64 - (i == j) as i64).collect()).collect();
    if det_int(&a).is_zero() {
        return Ok(DiagonalScaling::Moduli { dimension: rank_int(&a) });
    }
    // x A = c with A = P^{-1} S Q^{-1}: y = x P^{-1} solves y S = c Q, x = y P
    let (s, p, q) = smith(&a);
    let mut like = c[0].clone();
    let cinv: Vec<FieldElement> = c.iter().map(|x| x.inv().unwrap()).collect();
    let mut y: Vec<FieldElement> = Vec::with_capacity(n);
    for i in 0..n {
        let mut target = like.one_like();
        for j in 0..n {
            target = target.mul(&pow_signed(&cinv[j].lift_to(&like), q[j][i]));
        }
        let root = if target.is_one() {
            like.one_like()
        } else {
            let deg = s[i].to_usize().unwrap();
            let mut coeffs = vec![like.zero_like(); deg + 1];
            coeffs[0] = target.neg();
            coeffs[deg] = like.one_like();
            let rs = poly_roots(&coeffs, true, seed.wrapping_add(i as u64))?;
            rs.roots[0].clone()
        };
        if root.field().k() > like.field().k() {
            like = root.clone();
        }
        y.push(root);
    }
    let y: Vec<FieldElement> = y.iter().map(|v| v.lift_to(&like)).collect();
    let delta = (0..n)
        .map(|l| (0..n).fold(like.one_like(), |acc, i| acc.mul(&pow_signed(&y[i], p[i][l]))))
        .collect();
    Ok(DiagonalScaling::Scaling(delta))
}

/// `C` after conjugating by `x -> Δ x`: `C^j Δ^{(D - Id) e_j}`.
pub fn scaled_c(c: &[FieldElement], d: &[Vec<u64>], delta: &[FieldElement]) -> Vec<FieldElement> {
    let n = c.len();
    let like = &delta[0];
    (0..n)
        .map(|j| {
            (0..n).fold(c[j].lift_to(like), |acc, i| {
                acc.mul(&pow_signed(&delta[i], d[i][j] as i128 - (i == j) as i128))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field_create, prime_field};
    use crate::normalizer::bottcher_product;
    use crate::series::{Germ1D, Series};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn random_eps(n: usize, field: FieldRef, t: usize, rng: &mut ChaCha8Rng, terms: usize) -> MultiSeries {
        let mut s = MultiSeries::zero(n, field.zero(), t);
        for _ in 0..terms {
            let mut e = vec![0u32; n];
            let deg = rng.gen_range(1..4);
            for _ in 0..deg {
                e[rng.gen_range(0..n)] += 1;
            }
            s.add_term(e, &field.random(rng));
        }
        s
    }

    #[test]
    fn matrix_power_examples() {
        let (m, ok) = matrix_power_padic(&[vec![2, 0], vec![0, 2]], 1, 3).unwrap();
        assert!(ok);
        assert_eq!(m[0][0], rat(1, 2));
        assert!(m[0][1].is_zero());
        let (_, ok) = matrix_power_padic(&[vec![2, 1], vec![0, 2]], 3, 3).unwrap();
        assert!(ok);
        assert_eq!(det_int(&[vec![2, 1], vec![0, 2]]), BigInt::from(4));
        let (_, ok) = matrix_power_padic(&[vec![2, 0], vec![0, 2]], 1, 2).unwrap();
        assert!(!ok);
        assert_eq!(matrix_power_padic(&[vec![1, 2], vec![2, 4]], 1, 3), Err(MultiError::SingularMatrix));
        let (m2, _) = matrix_power_padic(&[vec![2, 1], vec![0, 2]], 2, 3).unwrap();
        let back = rat_mul(&m2, &rat_mul(&to_rat(&[vec![2, 1], vec![0, 2]]), &to_rat(&[vec![2, 1], vec![0, 2]])));
        assert_eq!(back, to_rat(&[vec![1, 0], vec![0, 1]]));
    }

    #[test]
    fn unit_power_examples() {
        let f3 = prime_field(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<MultiSeries> = (0..2).map(|_| MultiSeries::one(2, &f3.one(), 8).add(&random_eps(2, f3, 8, &mut rng, 4))).collect();
        let id = to_rat(&[vec![1, 0], vec![0, 1]]);
        assert_eq!(multi_unit_power(&u, &id).unwrap(), u);
        let zero = to_rat(&[vec![0, 0], vec![0, 0]]);
        for x in multi_unit_power(&u, &zero).unwrap() {
            assert_eq!(x, MultiSeries::one(2, &f3.one(), 8));
        }
        // dimension 1 against the univariate binomial power
        let one_plus_x = MultiSeries::one(1, &f3.one(), 10).add(&MultiSeries::var(1, 0, &f3.one(), 10));
        let half = multi_unit_power(&[one_plus_x], &vec![vec![rat(1, 2)]]).unwrap();
        let uni = Series::new(f3.zero(), vec![f3.one(), f3.one()], 10).binomial_pow(&BigInt::from(1), &BigInt::from(2)).unwrap();
        for k in 0..=10u32 {
            assert_eq!(half[0].coeff(&[k]), uni.coeff(k as usize).clone());
        }
        let h2 = half[0].mul(&half[0]);
        assert_eq!(h2, MultiSeries::one(1, &f3.one(), 10).add(&MultiSeries::var(1, 0, &f3.one(), 10)));
    }

    #[test]
    fn monomial_examples() {
        let f3 = prime_field(3).unwrap();
        let zero_eps = |n: usize| (0..n).map(|_| MultiSeries::zero(n, f3.zero(), 12)).collect::<Vec<_>>();
        let d = vec![vec![2, 1], vec![0, 2]];
        let f = MultiGerm::new(vec![f3.one(), f3.one()], d.clone(), zero_eps(2)).unwrap();
        let r = monomial_conjugacy(&f, 12).unwrap();
        for (i, b) in r.big_phi.iter().enumerate() {
            assert_eq!(*b, MultiSeries::var(2, i, &f3.one(), 12));
        }
        let eps = vec![MultiSeries::var(2, 0, &f3.one(), 12), MultiSeries::zero(2, f3.zero(), 12)];
        let f = MultiGerm::new(vec![f3.one(), f3.one()], d, eps).unwrap();
        let r = monomial_conjugacy(&f, 12).unwrap();
        assert_eq!(r.verified, 12);
        assert!(r.orders.windows(2).all(|w| w[0] < w[1]));
        let bad = MultiGerm::new(vec![f3.one(), f3.one()], vec![vec![3, 0], vec![0, 2]], zero_eps(2)).unwrap();
        assert!(matches!(monomial_conjugacy(&bad, 6), Err(MultiError::DetDivisibleByP { .. })));
        assert!(matches!(
            MultiGerm::new(vec![f3.one(), f3.one()], vec![vec![1, 1], vec![0, 1]], zero_eps(2)),
            Err(MultiError::NotContracting)
        ));
    }

    #[test]
    fn dimension_one_matches_bottcher() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for case in 0..50 {
            let p = [2u64, 3, 5, 7][case % 4];
            let fld = prime_field(p).unwrap();
            let d = loop {
                let d = rng.gen_range(2..6u64);
                if d % p != 0 {
                    break d;
                }
            };
            let t = 14;
            let eps = random_eps(1, fld, t, &mut rng, 4);
            let f = MultiGerm::new(vec![fld.one()], vec![vec![d]], vec![eps.clone()]).unwrap();
            let r = monomial_conjugacy(&f, t).unwrap();
            let mut coeffs = vec![fld.zero(); t + 1];
            coeffs[d as usize] = fld.one();
            for (e, c) in eps.terms() {
                if d as usize + e[0] as usize <= t {
                    coeffs[d as usize + e[0] as usize] = c.clone();
                }
            }
            let g = Germ1D::new(Series::new(fld.zero(), coeffs, t)).unwrap();
            let w = bottcher_product(&g, t, 0).unwrap();
            let big = w.big_phi();
            // Φ is determined by the equation to degree t - d + 1
            for k in 0..=t + 1 - d as usize {
                assert_eq!(r.big_phi[0].coeff(&[k as u32]), big.get(k).cloned().unwrap_or(fld.zero()), "case {case} k {k}");
            }
        }
    }

    #[test]
    fn c_and_d_invariant_under_tangent_identity_conjugation() {
        let f5 = prime_field(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = 7;
        for _ in 0..5 {
            let c = vec![f5.random_nonzero(&mut rng), f5.random_nonzero(&mut rng)];
            let d = vec![vec![2, 1], vec![1, 3]];
            let eps = (0..2).map(|_| random_eps(2, f5, t, &mut rng, 3)).collect();
            let f = MultiGerm::new(c.clone(), d.clone(), eps).unwrap();
            let phi: Vec<MultiSeries> = (0..2)
                .map(|i| {
                    let u = MultiSeries::one(2, &f5.one(), t).add(&random_eps(2, f5, t, &mut rng, 3));
                    MultiSeries::var(2, i, &f5.one(), t).mul(&u).truncate(t)
                })
                .collect();
            let inv = inverse_tangent_identity(&phi, t).unwrap();
            let id = compose_maps(&phi, &inv).unwrap();
            for (i, x) in id.iter().enumerate() {
                assert_eq!(*x, MultiSeries::var(2, i, &f5.one(), t));
            }
            let g = compose_maps(&phi, &compose_maps(&f.components(t), &inv).unwrap()).unwrap();
            let back = MultiGerm::from_components(&g).unwrap();
            assert_eq!(back.c, c);
            assert_eq!(back.d, d);
        }
    }

    #[test]
    fn smith_form() {
        for a in [vec![vec![1i64, 1], vec![0, 1]], vec![vec![2, 4], vec![6, 8]], vec![vec![3, 1, 0], vec![1, 2, 5], vec![0, 4, 1]]] {
            let (s, p, q) = smith(&a);
            let n = a.len();
            let ai: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
            let mul = |x: &Vec<Vec<i128>>, y: &Vec<Vec<i128>>| -> Vec<Vec<i128>> {
                (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| x[i][l] * y[l][j]).sum()).collect()).collect()
            };
            let prod = mul(&mul(&p, &ai), &q);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(prod[i][j], if i == j { s[i] } else { 0 });
                }
            }
            for w in s.windows(2) {
                assert!(w[1] % w[0] == 0);
            }
        }
    }

    #[test]
    fn diagonal_scaling_examples() {
        let f9 = field_create(3, 2, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d2 = vec![vec![2, 0], vec![0, 2]];
        for _ in 0..10 {
            let c = vec![f9.random_nonzero(&mut rng), f9.random_nonzero(&mut rng)];
            let DiagonalScaling::Scaling(delta) = diagonal_scaling(&c, &d2, 0).unwrap() else { panic!() };
            assert!(scaled_c(&c, &d2, &delta).iter().all(|x| x.is_one()));
        }
        let dm = vec![vec![1, 1], vec![0, 2]];
        assert_eq!(diagonal_scaling(&[f9.one(), f9.one()], &dm, 0).unwrap(), DiagonalScaling::Moduli { dimension: 1 });
        let ones = vec![f9.one(), f9.one()];
        assert_eq!(diagonal_scaling(&ones, &d2, 0).unwrap(), DiagonalScaling::Scaling(ones.clone()));
        // a non-square needs a root from F_81
        let f3 = prime_field(3).unwrap();
        let d3 = vec![vec![3, 1], vec![1, 2]];
        let c = vec![f3.from_u64(2), f3.one()];
        let DiagonalScaling::Scaling(delta) = diagonal_scaling(&c, &d3, 0).unwrap() else { panic!() };
        assert!(scaled_c(&c, &d3, &delta).iter().all(|x| x.is_one()));
    }

    #[test]
    fn json_round_trip() {
        let f3 = prime_field(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let eps = (0..2).map(|_| random_eps(2, f3, 10, &mut rng, 4)).collect();
        let f = MultiGerm::new(vec![f3.one(), f3.from_u64(2)], vec![vec![2, 1], vec![0, 2]], eps).unwrap();
        assert_eq!(MultiGerm::from_json(&f.to_json(), 10).unwrap(), f);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn monomial_conjugacy_sound(seed in any::<u64>(), p_idx in 0usize..3, n in 1usize..4) {
            let p = [2u64, 3, 5][p_idx];
            let fld = prime_field(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = if n == 3 { 7 } else { 10 };
            let d: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| if i == j { rng.gen_range(2..4) } else { rng.gen_range(0..2) }).collect()).collect();
            let det = det_int(&signed(&d));
            prop_assume!(!det.is_zero() && !det.is_multiple_of(&BigInt::from(p)));
            let c = (0..n).map(|_| fld.random_nonzero(&mut rng)).collect();
            let eps = (0..n).map(|_| random_eps(n, fld, t, &mut rng, 3)).collect();
            let f = MultiGerm::new(c, d, eps).unwrap();
            let r = monomial_conjugacy(&f, t).unwrap();
            prop_assert_eq!(verify_multi(&f.components(t), &f.leading_part().components(t), &r.big_phi, t).unwrap(), None);
            prop_assert!(r.orders.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
