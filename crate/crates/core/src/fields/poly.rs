//! Dense univariate polynomials over a finite field.

use super::{FieldElement, FieldRef};
use crate::scalar::int::{mod_inverse, mul_mod, prime_factors};
use crate::scalar::Scalar;

/// Polynomial with coefficients low degree first; never has a zero leading term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    pub field: FieldRef,
    pub coeffs: Vec<FieldElement>,
}

pub fn poly_eval(coeffs: &[FieldElement], x: &FieldElement) -> FieldElement {
    let mut acc = x.zero_like();
    for c in coeffs.iter().rev() {
        acc = acc.mul(x).add(c);
    }
    acc
}

impl Poly {
    pub fn new(field: FieldRef, mut coeffs: Vec<FieldElement>) -> Poly {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { field, coeffs }
    }
    pub fn zero(field: FieldRef) -> Poly {
        Poly { field, coeffs: Vec::new() }
    }
    pub fn x(field: FieldRef) -> Poly {
        Poly::new(field, vec![field.zero(), field.one()])
    }
    pub fn constant(c: FieldElement) -> Poly {
        Poly::new(c.field(), vec![c])
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }
    pub fn lead(&self) -> Option<&FieldElement> {
        self.coeffs.last()
    }
    pub fn eval(&self, x: &FieldElement) -> FieldElement {
        poly_eval(&self.coeffs, x)
    }

    pub fn monic(&self) -> Poly {
        match self.lead() {
            None => self.clone(),
            Some(l) => {
                let li = l.inv().expect("leading coefficient is nonzero");
                self.scale(&li)
            }
        }
    }

    pub fn scale(&self, c: &FieldElement) -> Poly {
        Poly::new(self.field, self.coeffs.iter().map(|a| a.mul(c)).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let z = self.field.zero();
        let out = (0..n)
            .map(|i| self.coeffs.get(i).unwrap_or(&z).add(other.coeffs.get(i).unwrap_or(&z)))
            .collect();
        Poly::new(self.field, out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let z = self.field.zero();
        let out = (0..n)
            .map(|i| self.coeffs.get(i).unwrap_or(&z).sub(other.coeffs.get(i).unwrap_or(&z)))
            .collect();
        Poly::new(self.field, out)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero(self.field);
        }
        let mut out = vec![self.field.zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Poly::new(self.field, out)
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn divrem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("polynomial division by zero");
        let lead_inv = d.lead().unwrap().inv().unwrap();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Poly::zero(self.field), self.clone());
        }
        let mut q = vec![self.field.zero(); r.len() - dd];
        for top in (dd..r.len()).rev() {
            let c = r[top].mul(&lead_inv);
            if c.is_zero() {
                continue;
            }
            for (j, dj) in d.coeffs.iter().enumerate() {
                let idx = top - dd + j;
                r[idx] = r[idx].sub(&c.mul(dj));
            }
            q[top - dd] = c;
        }
        r.truncate(dd);
        (Poly::new(self.field, q), Poly::new(self.field, r))
    }

    pub fn rem(&self, d: &Poly) -> Poly {
        self.divrem(d).1
    }

    /// Monic gcd (zero only if both inputs are zero).
    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// `self^e mod m`.
    pub fn powmod(&self, mut e: u128, m: &Poly) -> Poly {
        let mut acc = Poly::constant(self.field.one()).rem(m);
        let mut base = self.rem(m);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).rem(m);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).rem(m);
            }
        }
        acc
    }

    /// `self^(q^s) mod m`, where `q` is the field size, by `k s` p-th powers.
    pub fn frobenius_powmod(&self, s: u32, m: &Poly) -> Poly {
        let mut h = self.rem(m);
        for _ in 0..s * self.field.k() {
            h = h.powmod(self.field.p() as u128, m);
        }
        h
    }

    pub fn derivative(&self) -> Poly {
        let out = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.mul(&self.field.from_u64(i as u64)))
            .collect();
        Poly::new(self.field, out)
    }

    pub fn lift(&self, target: FieldRef) -> Poly {
        let coeffs = self.coeffs.iter().map(|c| c.embed(target).expect("compatible fields")).collect();
        Poly::new(target, coeffs)
    }
}

// Small helpers over F_p with raw u64 coefficients, used before any
// descriptor exists (while searching for moduli).

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn rem_p(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    trim(&mut r);
    let dm = m.len() - 1;
    let li = mod_inverse(m[dm], p);
    while r.len() > dm {
        let top = r.len() - 1;
        let c = mul_mod(r[top], li, p);
        for (j, &mj) in m.iter().enumerate() {
            let idx = top - dm + j;
            r[idx] = (r[idx] + p - mul_mod(c, mj, p)) % p;
        }
        trim(&mut r);
    }
    r
}

fn mulmod_p(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mul_mod(x, y, p)) % p;
        }
    }
    rem_p(&out, m, p)
}

fn powmod_p(a: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = rem_p(&[1], m, p);
    let mut base = rem_p(a, m, p);
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod_p(&acc, &base, m, p);
        }
        e >>= 1;
        if e > 0 {
            base = mulmod_p(&base, &base, m, p);
        }
    }
    acc
}

fn gcd_p(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let r = rem_p(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

fn sub_p(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let mut out: Vec<u64> = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    trim(&mut out);
    out
}

/// Rabin's irreducibility test for a monic `m` over `F_p`.
pub(crate) fn is_irreducible_over_prime(p: u64, m: &[u64]) -> bool {
    let k = m.len() - 1;
    if k <= 1 {
        return k == 1;
    }
    let x = [0u64, 1];
    // x^(p^i) mod m for i = 0..=k
    let mut frob = vec![rem_p(&x, m, p)];
    for i in 1..=k {
        let next = powmod_p(&frob[i - 1], p, m, p);
        frob.push(next);
    }
    if !sub_p(&frob[k], &x, p).is_empty() {
        return false;
    }
    for q in prime_factors(k as u64) {
        let h = sub_p(&frob[k / q as usize], &x, p);
        if gcd_p(m, &h, p).len() != 1 {
            return false;
        }
    }
    true
}
