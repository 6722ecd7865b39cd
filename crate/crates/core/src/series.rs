//! Truncated univariate power series over a [`Scalar`] ring.
//!
//! A series stores the coefficients `c_0..` together with `trunc`, the last
//! exponent whose coefficient is trusted. Every operation propagates that
//! bound pessimistically. [`EXACT`] marks a polynomial known exactly.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::Scalar;

pub use crate::scalar::int::nu_p;

/// Truncation marker for series known exactly.
pub const EXACT: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("series is zero to precision {0}")]
    ZeroToPrecision(usize),
    #[error("constant term is not invertible")]
    NonUnitReciprocal,
    #[error("inner series of a composition must vanish at 0")]
    CompositionWithUnit,
    #[error("exponent {a}/{b} is not p-adically integral")]
    PadicObstruction { a: String, b: String },
    #[error("operation needs a finite truncation")]
    InfiniteTruncation,
    #[error("coefficient has no p^{0}-th root in its ring")]
    NoFrobeniusRoot(u32),
    #[error("binomial power needs constant term 1")]
    NotOneAtZero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series<S> {
    coeffs: Vec<S>,
    trunc: usize,
    zero: S,
}

fn sat_add(a: usize, b: usize) -> usize {
    a.saturating_add(b)
}

impl<S: Scalar> Series<S> {
    /// `coeffs` beyond `trunc` are dropped; trailing zeros are trimmed.
    pub fn new(zero: S, mut coeffs: Vec<S>, trunc: usize) -> Self {
        if trunc != EXACT && coeffs.len() > trunc + 1 {
            coeffs.truncate(trunc + 1);
        }
        let zero = zero.zero_like();
        let mut s = Series { coeffs, trunc, zero };
        s.trim();
        s
    }
    pub fn exact(zero: S, coeffs: Vec<S>) -> Self {
        Self::new(zero, coeffs, EXACT)
    }
    pub fn zero(zero: S, trunc: usize) -> Self {
        Self::new(zero, Vec::new(), trunc)
    }
    pub fn one(like: &S) -> Self {
        Self::exact(like.zero_like(), vec![like.one_like()])
    }
    /// `c x^n`.
    pub fn monomial(c: S, n: usize) -> Self {
        let mut v = vec![c.zero_like(); n + 1];
        v[n] = c.clone();
        Self::exact(c, v)
    }
    /// The identity germ `x`.
    pub fn x(like: &S) -> Self {
        Self::monomial(like.one_like(), 1)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_exact_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }
    pub fn is_exact(&self) -> bool {
        self.trunc == EXACT
    }
    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }
    pub fn zero_scalar(&self) -> &S {
        &self.zero
    }
    /// Index of the last stored (nonzero) coefficient.
    pub fn degree_bound(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient of `x^n`; panics if `n` is beyond the truncation.
    pub fn coeff(&self, n: usize) -> &S {
        assert!(n <= self.trunc, "coefficient {n} requested beyond truncation {}", self.trunc);
        self.coeffs.get(n).unwrap_or(&self.zero)
    }
    pub fn get(&self, n: usize) -> Option<&S> {
        (n <= self.trunc).then(|| self.coeffs.get(n).unwrap_or(&self.zero))
    }

    pub fn truncate(&self, t: usize) -> Self {
        Self::new(self.zero.clone(), self.coeffs.clone(), self.trunc.min(t))
    }

    /// Exponents of the nonzero stored coefficients.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, _)| i)
    }

    pub fn ord(&self) -> Result<usize, SeriesError> {
        self.support().next().ok_or(SeriesError::ZeroToPrecision(self.trunc))
    }

    /// `ord`, or `trunc + 1` for a series that is zero to precision.
    pub fn ord_lower(&self) -> usize {
        self.ord().unwrap_or(sat_add(self.trunc, 1))
    }

    /// Agreement up to and including `upto`, or the first index that differs.
    pub fn first_difference(&self, other: &Self, upto: usize) -> Option<usize> {
        let n = upto.min(self.trunc).min(other.trunc);
        let len = self.coeffs.len().max(other.coeffs.len());
        (0..=n.min(len)).find(|&i| {
            let a = self.coeffs.get(i).unwrap_or(&self.zero);
            let b = other.coeffs.get(i).unwrap_or(&other.zero);
            a != b
        })
    }

    pub fn map<T: Scalar>(&self, zero: T, f: impl Fn(&S) -> T) -> Series<T> {
        Series::new(zero, self.coeffs.iter().map(f).collect(), self.trunc)
    }

    pub fn lift_to(&self, like: &S) -> Self {
        self.map(like.zero_like(), |c| c.lift_to(like))
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let out = (0..n)
            .map(|i| self.coeffs.get(i).unwrap_or(&self.zero).add(other.coeffs.get(i).unwrap_or(&self.zero)))
            .collect();
        Self::new(self.zero.clone(), out, self.trunc.min(other.trunc))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self::new(self.zero.clone(), self.coeffs.iter().map(|c| c.neg()).collect(), self.trunc)
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(self.zero.clone(), self.coeffs.iter().map(|a| a.mul(c)).collect(), self.trunc)
    }

    /// `x^k f(x)`.
    pub fn shift(&self, k: usize) -> Self {
        let mut v = vec![self.zero.clone(); k];
        v.extend(self.coeffs.iter().cloned());
        Self::new(self.zero.clone(), v, sat_add(self.trunc, k))
    }

    /// Product; known through `min(T_a + ord b, T_b + ord a)`.
    pub fn mul(&self, other: &Self) -> Self {
        let trunc = sat_add(self.trunc, other.ord_lower()).min(sat_add(other.trunc, self.ord_lower()));
        self.mul_upto(other, trunc)
    }

    /// Product with its truncation additionally capped at `cap`.
    pub fn mul_trunc(&self, other: &Self, cap: usize) -> Self {
        let trunc = sat_add(self.trunc, other.ord_lower()).min(sat_add(other.trunc, self.ord_lower()));
        self.mul_upto(other, trunc.min(cap))
    }

    fn mul_upto(&self, other: &Self, trunc: usize) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero(self.zero.clone(), trunc);
        }
        let full = self.coeffs.len() + other.coeffs.len() - 1;
        let len = if trunc == EXACT { full } else { full.min(trunc + 1) };
        let mut out = vec![self.zero.clone(); len];
        // iterate over the sparser operand in the outer loop
        let (a, b) = if self.nnz() <= other.nnz() { (self, other) } else { (other, self) };
        for (i, ai) in a.coeffs.iter().enumerate() {
            if i >= len {
                break;
            }
            if ai.is_exact_zero() {
                continue;
            }
            for (j, bj) in b.coeffs.iter().enumerate().take(len - i) {
                if bj.is_exact_zero() {
                    continue;
                }
                out[i + j] = out[i + j].add(&ai.mul(bj));
            }
        }
        Self::new(self.zero.clone(), out, trunc)
    }

    fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|c| !c.is_zero()).count()
    }

    /// `f(x^q)`: reindexing; known through `q (T + 1) - 1`.
    pub fn expand(&self, q: usize) -> Self {
        let mut v = vec![self.zero.clone(); (self.coeffs.len().saturating_sub(1)) * q + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            v[i * q] = c.clone();
        }
        let trunc = if self.trunc == EXACT { EXACT } else { (self.trunc + 1).saturating_mul(q) - 1 };
        Self::new(self.zero.clone(), v, trunc)
    }

    /// The Frobenius twist `T`: coefficient-wise `c -> c^p`.
    pub fn t_operator(&self) -> Self {
        Self::new(self.zero.clone(), self.coeffs.iter().map(|c| c.frobenius()).collect(), self.trunc)
    }

    /// Inverse of `T^m`, coefficient-wise `p^m`-th roots.
    pub fn t_operator_inv(&self, m: u32) -> Result<Self, SeriesError> {
        let v = self
            .coeffs
            .iter()
            .map(|c| c.frobenius_root(m).ok_or(SeriesError::NoFrobeniusRoot(m)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(self.zero.clone(), v, self.trunc))
    }

    /// `f^p = (T f)(x^p)` in characteristic `p`.
    pub fn pow_p(&self) -> Self {
        let p = self.zero.characteristic() as usize;
        self.t_operator().expand(p)
    }

    /// `f^h`. The p-part of `h` is taken with [`Series::pow_p`], which keeps
    /// far more precision than repeated multiplication would.
    pub fn pow(&self, h: u64) -> Self {
        if h == 0 {
            return Self::one(&self.zero);
        }
        let p = self.zero.characteristic();
        let mut h1 = h;
        let mut a = 0;
        while h1 % p == 0 {
            h1 /= p;
            a += 1;
        }
        let mut acc: Option<Self> = None;
        let mut base = self.clone();
        let mut e = h1;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(x) => x.mul(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        let mut out = acc.expect("h >= 1");
        for _ in 0..a {
            out = out.pow_p();
        }
        out
    }

    /// `f(g)`; requires `g(0) = 0`.
    pub fn compose(&self, g: &Self) -> Result<Self, SeriesError> {
        if !g.coeff(0).is_zero() {
            return Err(SeriesError::CompositionWithUnit);
        }
        let v = g.ord_lower();
        // terms f_j g^j are known through T_g + (j - 1) v; unknown f_j only
        // enter at order (T_f + 1) v
        let mut trunc = if self.trunc == EXACT { EXACT } else { (self.trunc + 1).saturating_mul(v) - 1 };
        if let Some(j0) = self.support().find(|&j| j >= 1) {
            if g.trunc != EXACT {
                trunc = trunc.min(sat_add(g.trunc, (j0 - 1).saturating_mul(v)));
            }
        }
        let mut out = Self::zero(self.zero.clone(), trunc);
        if let Some(c0) = self.coeffs.first() {
            out = out.add(&Self::exact(self.zero.clone(), vec![c0.clone()]));
        }
        let top = self.coeffs.len();
        let mut gp: Option<Self> = None;
        for j in 1..top {
            if trunc != EXACT && j.saturating_mul(v) > trunc {
                break;
            }
            let next = match gp {
                None => g.truncate(trunc),
                Some(ref prev) => prev.mul_upto(g, trunc),
            };
            gp = Some(next);
            let fj = &self.coeffs[j];
            if !fj.is_exact_zero() {
                let term = gp.as_ref().unwrap().scale(fj);
                out = Self::new(self.zero.clone(), add_vecs(&out.coeffs, &term.coeffs, &self.zero), trunc);
            }
        }
        Ok(out)
    }

    /// `1/f`, known through the truncation of `f`.
    pub fn reciprocal(&self) -> Result<Self, SeriesError> {
        if self.trunc == EXACT {
            return Err(SeriesError::InfiniteTruncation);
        }
        let c0inv = self.coeff(0).inv().ok_or(SeriesError::NonUnitReciprocal)?;
        let t = self.trunc;
        let mut out: Vec<S> = Vec::with_capacity(t + 1);
        out.push(c0inv.clone());
        for n in 1..=t {
            let mut acc = self.zero.clone();
            for k in 1..=n.min(self.coeffs.len().saturating_sub(1)) {
                let fk = &self.coeffs[k];
                if !fk.is_exact_zero() {
                    acc = acc.add(&fk.mul(&out[n - k]));
                }
            }
            out.push(acc.mul(&c0inv).neg());
        }
        Ok(Self::new(self.zero.clone(), out, t))
    }

    pub fn derivative(&self) -> Self {
        let v = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.mul(&self.zero.from_u64_like(i as u64)))
            .collect();
        let trunc = if self.trunc == EXACT { EXACT } else { self.trunc.saturating_sub(1) };
        Self::new(self.zero.clone(), v, trunc)
    }

    /// `(m, g)` with `f = g(x^{p^m})` and `g' != 0` to precision.
    pub fn split_frobenius(&self) -> Result<(Self, u32), SeriesError> {
        let p = self.zero.characteristic();
        let m = self
            .support()
            .filter(|&n| n > 0)
            .map(|n| nu_p(p, n as i128).unwrap())
            .min()
            .ok_or(SeriesError::ZeroToPrecision(self.trunc))?;
        let q = (p as usize).pow(m);
        let v: Vec<S> = self.coeffs.iter().step_by(q).cloned().collect();
        let trunc = if self.trunc == EXACT { EXACT } else { self.trunc / q };
        Ok((Self::new(self.zero.clone(), v, trunc), m))
    }

    /// Compositional inverse of `f = c_1 x + ...` with `c_1` invertible.
    pub fn compositional_inverse(&self) -> Result<Self, SeriesError> {
        if self.trunc == EXACT {
            return Err(SeriesError::InfiniteTruncation);
        }
        if !self.coeff(0).is_zero() {
            return Err(SeriesError::CompositionWithUnit);
        }
        let t = self.trunc;
        let c1inv = self.coeff(1).inv().ok_or(SeriesError::NonUnitReciprocal)?;
        // Newton-free fixed point: fix one coefficient at a time
        let mut g = Self::new(self.zero.clone(), vec![self.zero.clone(), c1inv.clone()], t);
        for n in 2..=t {
            let fg = self.compose(&g)?;
            let err = fg.coeff(n).clone();
            if !err.is_zero() {
                let mut v = g.coeffs.clone();
                v.resize(n + 1, self.zero.clone());
                v[n] = v[n].sub(&err.mul(&c1inv));
                g = Self::new(self.zero.clone(), v, t);
            }
        }
        Ok(g)
    }

    /// `u^{a/b}` for `u(0) = 1` via the binomial series.
    pub fn binomial_pow(&self, a: &BigInt, b: &BigInt) -> Result<Self, SeriesError> {
        binomial_pow(self, a, b)
    }
}

fn add_vecs<S: Scalar>(a: &[S], b: &[S], zero: &S) -> Vec<S> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).unwrap_or(zero).add(b.get(i).unwrap_or(zero))).collect()
}

fn nu_p_big(p: &BigInt, n: &BigInt) -> u64 {
    debug_assert!(!n.is_zero());
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

fn unit_part_mod(p: &BigInt, n: &BigInt) -> (u64, u64) {
    let v = nu_p_big(p, n);
    let mut u = n.clone();
    for _ in 0..v {
        u /= p;
    }
    let r = u.mod_floor(p).to_u64().unwrap();
    (v, r)
}

/// Running computation of `C(a/b, n) mod p` for `n = 0, 1, 2, ...`.
pub struct BinomialMod {
    p: BigInt,
    pu: u64,
    a: BigInt,
    b: BigInt,
    n: u64,
    val: i64,
    unit: u64,
}

impl BinomialMod {
    /// `a/b` must be in lowest terms with `p` not dividing `b`.
    pub fn new(p: u64, a: BigInt, b: BigInt) -> Self {
        BinomialMod { p: BigInt::from(p), pu: p, a, b, n: 0, val: 0, unit: 1 }
    }

    /// The current coefficient `C(a/b, n) mod p`.
    pub fn value(&self) -> u64 {
        if self.val > 0 {
            0
        } else {
            debug_assert_eq!(self.val, 0);
            self.unit
        }
    }

    /// Advance from `n` to `n + 1`: multiply by `(a - n b) / ((n + 1) b)`.
    pub fn step(&mut self) {
        let num = &self.a - &self.b * BigInt::from(self.n);
        if num.is_zero() {
            // every later coefficient vanishes; the numerator stays zero
            self.val = i64::MAX / 2;
        } else if self.val < i64::MAX / 4 {
            let (v, u) = unit_part_mod(&self.p, &num);
            let (w, du) = unit_part_mod(&self.p, &(BigInt::from(self.n + 1) * &self.b));
            self.val += v as i64 - w as i64;
            let p = self.pu;
            let inv = crate::scalar::int::mod_inverse(du, p);
            self.unit = crate::scalar::int::mul_mod(crate::scalar::int::mul_mod(self.unit, u, p), inv, p);
        }
        self.n += 1;
    }
}

/// `v` with `v^b = u^a`, `v(0) = 1`.
pub fn binomial_pow<S: Scalar>(u: &Series<S>, a: &BigInt, b: &BigInt) -> Result<Series<S>, SeriesError> {
    if b.is_zero() {
        return Err(SeriesError::PadicObstruction { a: a.to_string(), b: "0".into() });
    }
    if !u.coeff(0).is_one() {
        return Err(SeriesError::NotOneAtZero);
    }
    let p = u.zero.characteristic();
    let g = a.gcd(b);
    let (mut a, mut b) = (a / &g, b / &g);
    if b.is_negative() {
        a = -a;
        b = -b;
    }
    let pb = BigInt::from(p);
    if (&b % &pb).is_zero() {
        return Err(SeriesError::PadicObstruction { a: a.to_string(), b: b.to_string() });
    }
    if b.is_one() && !a.is_negative() {
        if let Some(h) = a.to_u64() {
            return Ok(u.pow(h));
        }
    }
    if u.trunc == EXACT {
        return Err(SeriesError::InfiniteTruncation);
    }
    let t = u.trunc;
    let w = u.sub(&Series::one(&u.zero));
    let v = w.ord_lower();
    let mut out = Series::one(&u.zero).truncate(t);
    let mut c = BinomialMod::new(p, a, b);
    let mut wn: Option<Series<S>> = None;
    let mut n = 1usize;
    while n.saturating_mul(v) <= t {
        c.step();
        wn = Some(match wn {
            None => w.clone(),
            Some(prev) => prev.mul_trunc(&w, t),
        });
        let cn = c.value();
        if cn != 0 {
            let term = wn.as_ref().unwrap().scale(&u.zero.from_u64_like(cn));
            out = out.add(&term);
        }
        n += 1;
    }
    Ok(out.truncate(t))
}

impl<S: Scalar + fmt::Display> fmt::Display for Series<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})x")?,
                _ => write!(f, "({c})x^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        if self.trunc != EXACT {
            write!(f, " + O(x^{})", self.trunc + 1)?;
        }
        Ok(())
    }
}

/// A germ `f(x) = c_1 x + c_2 x^2 + ...` with `f(0) = 0`, plus the linear
/// conjugacies `x -> lambda x` already applied to reach it.
#[derive(Clone, Debug, PartialEq)]
pub struct Germ1D<S> {
    pub series: Series<S>,
    pub scalings: Vec<S>,
}

impl<S: Scalar> Germ1D<S> {
    pub fn new(series: Series<S>) -> Result<Self, SeriesError> {
        if !series.coeff(0).is_zero() {
            return Err(SeriesError::CompositionWithUnit);
        }
        Ok(Germ1D { series, scalings: Vec::new() })
    }
    pub fn trunc(&self) -> usize {
        self.series.trunc()
    }
    pub fn characteristic(&self) -> u64 {
        self.series.zero_scalar().characteristic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field_create, prime_field, FieldElement, FieldRef};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ser(f: FieldRef, c: &[i64], t: usize) -> Series<FieldElement> {
        Series::new(f.zero(), c.iter().map(|&x| f.from_i64(x)).collect(), t)
    }

    fn rand_series(f: FieldRef, rng: &mut ChaCha8Rng, len: usize, t: usize, c0: Option<FieldElement>) -> Series<FieldElement> {
        let mut v: Vec<_> = (0..len).map(|_| f.random(rng)).collect();
        if let Some(c) = c0 {
            v[0] = c;
        }
        Series::new(f.zero(), v, t)
    }

    /// Independent schoolbook power through explicit multiplication of
    /// coefficient vectors, truncated at `t`.
    fn naive_pow(f: &Series<FieldElement>, h: u64, t: usize) -> Vec<FieldElement> {
        let z = f.zero_scalar().clone();
        let mut acc = vec![z.one_like()];
        for _ in 0..h {
            let mut next = vec![z.clone(); t + 1];
            for (i, a) in acc.iter().enumerate() {
                for (j, b) in f.coeffs().iter().enumerate() {
                    if i + j <= t {
                        next[i + j] = next[i + j].add(&a.mul(b));
                    }
                }
            }
            acc = next;
        }
        acc.resize(t + 1, z);
        acc
    }

    #[test]
    fn nu_p_examples() {
        assert_eq!(nu_p(3, 18), Some(2));
        assert_eq!(nu_p(3, 0), None);
        assert_eq!(nu_p(2, 7), Some(0));
    }

    #[test]
    fn ord_examples() {
        let f = prime_field(3).unwrap();
        assert_eq!(ser(f, &[0, 0, 0, 1, 1], 10).ord(), Ok(3));
        assert_eq!(ser(f, &[1], 10).ord(), Ok(0));
        assert_eq!(ser(f, &[0, 0], 10).ord(), Err(SeriesError::ZeroToPrecision(10)));
    }

    #[test]
    fn ring_examples() {
        let f = prime_field(3).unwrap();
        let a = ser(f, &[1, 1], EXACT);
        let b = ser(f, &[1, -1], EXACT);
        assert_eq!(a.mul(&b), ser(f, &[1, 0, 2], EXACT));
        assert_eq!(a.pow(3), ser(f, &[1, 0, 0, 1], EXACT));
        let r = ser(f, &[1, 0, -1], 7).reciprocal().unwrap();
        assert_eq!(r, ser(f, &[1, 0, 1, 0, 1, 0, 1, 0], 7));
        assert_eq!(ser(f, &[0, 1], 5).reciprocal(), Err(SeriesError::NonUnitReciprocal));
        assert_eq!(a.compose(&a), Err(SeriesError::CompositionWithUnit));
    }

    #[test]
    fn truncation_propagates() {
        let f = prime_field(5).unwrap();
        let a = ser(f, &[0, 0, 1, 1], 10);
        let b = ser(f, &[1, 2, 3], 6);
        // known through min(10 + 0, 6 + 2)
        assert_eq!(a.mul(&b).trunc(), 8);
        assert_eq!(a.add(&b).trunc(), 6);
        // (x^2 + x^3 + O(x^11))^5 is known through 5 * 11 - 1
        assert_eq!(a.pow(5).trunc(), 54);
        // through 10 + 2 * 2 by plain multiplication
        assert_eq!(a.pow(3).trunc(), 14);
    }

    #[test]
    fn pow_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (p, k) in [(3, 1), (3, 2), (2, 2), (5, 1)] {
            let f = field_create(p, k, None).unwrap();
            for h in 0..20 {
                let s = rand_series(f, &mut rng, 8, 15, None).add(&Series::one(&f.one())).truncate(15);
                let got = s.pow(h);
                let want = naive_pow(&s, h, got.trunc().min(15));
                for (n, w) in want.iter().enumerate() {
                    assert_eq!(got.coeff(n), w, "p={p} h={h} n={n}");
                }
            }
        }
    }

    #[test]
    fn t_operator_example() {
        // alpha^2 = alpha + 1 over F_3: modulus x^2 - x - 1 = x^2 + 2x + 2
        let f = field_create(3, 2, Some(&[2, 2, 1])).unwrap();
        let a = f.generator();
        let psi = Series::exact(f.zero(), vec![f.zero(), a.clone()]);
        let want = a.mul(&f.from_u64(2)).add(&f.one());
        assert_eq!(psi.t_operator().coeff(1), &want);
        let f3 = prime_field(3).unwrap();
        let s = ser(f3, &[1, 2, 0, 1], 9);
        assert_eq!(s.t_operator(), s);
    }

    #[test]
    fn split_frobenius_examples() {
        let f = prime_field(3).unwrap();
        let (g, m) = ser(f, &[0, 0, 0, 1], EXACT).split_frobenius().unwrap();
        assert_eq!((g, m), (ser(f, &[0, 1], EXACT), 1));
        let x3x4 = ser(f, &[0, 0, 0, 1, 1], EXACT);
        assert_eq!(x3x4.split_frobenius().unwrap(), (x3x4.clone(), 0));
        let mut c = vec![0; 10];
        c[9] = 1;
        c[6] = 1;
        // x^9 + x^6 = g(x^3) with g = y^2 + y^3
        let (g, m) = ser(f, &c, EXACT).split_frobenius().unwrap();
        assert_eq!((g, m), (ser(f, &[0, 0, 1, 1], EXACT), 1));
    }

    #[test]
    fn binomial_pow_examples() {
        let f = prime_field(3).unwrap();
        let u = ser(f, &[1, 1], 12);
        let one = BigInt::from(1);
        assert_eq!(u.binomial_pow(&one, &one).unwrap(), u);
        let v = u.binomial_pow(&one, &BigInt::from(2)).unwrap();
        assert_eq!(v.coeffs()[..3], [f.one(), f.from_u64(2), f.one()]);
        let sq = v.mul(&v);
        assert_eq!(sq.first_difference(&u, 12), None);
        assert!(matches!(u.binomial_pow(&one, &BigInt::from(3)), Err(SeriesError::PadicObstruction { .. })));
    }

    #[test]
    fn compositional_inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = field_create(3, 2, None).unwrap();
        for _ in 0..10 {
            let mut s = rand_series(f, &mut rng, 12, 20, Some(f.zero()));
            if s.coeff(1).is_zero() {
                s = s.add(&Series::x(&f.one())).truncate(20);
                if s.coeff(1).is_zero() {
                    continue;
                }
            }
            let g = s.compositional_inverse().unwrap();
            let id = s.compose(&g).unwrap();
            assert_eq!(id.first_difference(&Series::x(&f.one()), 20), None);
        }
    }

    fn arb_field() -> impl Strategy<Value = FieldRef> {
        prop_oneof![
            Just(field_create(3, 1, None).unwrap()),
            Just(field_create(3, 2, None).unwrap()),
            Just(field_create(2, 3, None).unwrap()),
            Just(field_create(5, 1, None).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn compose_is_associative(fld in arb_field(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = rand_series(fld, &mut rng, 10, 14, None);
            let b = rand_series(fld, &mut rng, 10, 14, Some(fld.zero()));
            let c = rand_series(fld, &mut rng, 10, 14, Some(fld.zero()));
            let l = a.compose(&b).unwrap().compose(&c).unwrap();
            let r = a.compose(&b.compose(&c).unwrap()).unwrap();
            let t = l.trunc().min(r.trunc());
            prop_assert_eq!(l.first_difference(&r, t), None);
        }

        #[test]
        fn reciprocal_inverts(fld in arb_field(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c0 = fld.random_nonzero(&mut rng);
            let a = rand_series(fld, &mut rng, 12, 18, Some(c0));
            let prod = a.mul(&a.reciprocal().unwrap());
            prop_assert_eq!(prod.first_difference(&Series::one(&fld.one()), 18), None);
        }

        #[test]
        fn t_operator_is_ring_hom(fld in arb_field(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = rand_series(fld, &mut rng, 9, 12, None);
            let b = rand_series(fld, &mut rng, 9, 12, None);
            prop_assert_eq!(a.mul(&b).t_operator(), a.t_operator().mul(&b.t_operator()));
            prop_assert_eq!(a.add(&b).t_operator(), a.t_operator().add(&b.t_operator()));
        }

        #[test]
        fn frobenius_commutes_with_t(fld in arb_field(), seed in any::<u64>()) {
            // F o psi = (T psi) o F with F(x) = x^p
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = rand_series(fld, &mut rng, 9, 12, Some(fld.zero()));
            let frob = Series::monomial(fld.one(), fld.p() as usize);
            let l = frob.compose(&psi).unwrap();
            let r = psi.t_operator().compose(&frob).unwrap();
            let t = l.trunc().min(r.trunc());
            prop_assert_eq!(l.first_difference(&r, t), None);
        }

        #[test]
        fn binomial_root_powers_back(fld in arb_field(), seed in any::<u64>(), a in 1i64..=10, b in 1i64..=10) {
            let p = fld.p() as i64;
            let va = nu_p(p as u64, a as i128).unwrap();
            let vb = nu_p(p as u64, b as i128).unwrap();
            prop_assume!(va >= vb);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = rand_series(fld, &mut rng, 10, 16, Some(fld.one()));
            let v = u.binomial_pow(&BigInt::from(a), &BigInt::from(b)).unwrap();
            let lhs = v.pow(b as u64);
            let rhs = u.pow(a as u64);
            prop_assert_eq!(lhs.first_difference(&rhs, 16), None);
        }

        #[test]
        fn split_frobenius_recomposes(fld in arb_field(), seed in any::<u64>(), m in 0u32..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = rand_series(fld, &mut rng, 6, EXACT, Some(fld.zero()));
            prop_assume!(!g.coeff(1).is_zero());
            let q = (fld.p() as usize).pow(m);
            let f = g.expand(q);
            let (g2, m2) = f.split_frobenius().unwrap();
            prop_assert_eq!(m2, m);
            prop_assert_eq!(g2.expand(q), f);
        }

        #[test]
        fn high_valuation_powers_skip_low_valuation_degrees(fld in arb_field(), seed in any::<u64>(), h in 1u64..40, n in 1usize..40) {
            let p = fld.p();
            prop_assume!(nu_p(p, h as i128) > nu_p(p, n as i128));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = rand_series(fld, &mut rng, 10, 60, None);
            let ph = psi.pow(h);
            if let Some(c) = ph.get(n) {
                prop_assert!(c.is_zero());
            }
        }
    }
}
