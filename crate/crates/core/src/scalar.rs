//! The coefficient abstraction shared by the series, normalizer and analytic code.
//!
//! Both [`crate::fields::FieldElement`] and [`crate::analytic::LaurentScalar`]
//! implement [`Scalar`]. Every value carries enough context (its field) to
//! manufacture zero and one, so series never need a separate ring handle.

use std::cmp::Ordering;
use std::fmt::Debug;

pub trait Scalar: Clone + PartialEq + Debug + Send + Sync {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    /// The image of the integer `n` in the ring.
    fn from_u64_like(&self, n: u64) -> Self;
    fn is_zero(&self) -> bool;
    /// Zero with no precision loss attached; terms that are exactly zero can be skipped in sums.
    fn is_exact_zero(&self) -> bool {
        self.is_zero()
    }

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse, `None` for zero (or for a value with no trusted digits).
    fn inv(&self) -> Option<Self>;

    fn characteristic(&self) -> u64;
    /// `x^p`.
    fn frobenius(&self) -> Self;
    /// The unique `y` with `y^(p^m) = x`, if one exists in the ring.
    fn frobenius_root(&self, m: u32) -> Option<Self>;
    /// Embed `self` into the ring that `like` lives in (identity when they agree).
    fn lift_to(&self, like: &Self) -> Self;
    /// A fixed total order used to make root choices reproducible.
    fn canonical_cmp(&self, other: &Self) -> Ordering;

    fn is_one(&self) -> bool {
        self.sub(&self.one_like()).is_zero()
    }

    fn pow_u64(&self, mut n: u64) -> Self {
        let mut acc = self.one_like();
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `x^(p^k)` by repeated Frobenius.
    fn frobenius_pow(&self, k: u32) -> Self {
        let mut x = self.clone();
        for _ in 0..k {
            x = x.frobenius();
        }
        x
    }
}

/// Integer helpers shared across modules.
pub mod int {
    /// p-adic valuation of `n`; `None` stands for +infinity (n = 0).
    pub fn nu_p(p: u64, n: i128) -> Option<u32> {
        if n == 0 {
            return None;
        }
        let p = p as i128;
        let mut n = n;
        let mut v = 0;
        while n % p == 0 {
            n /= p;
            v += 1;
        }
        Some(v)
    }

    /// `min(nu_p(n), cap)` with `nu_p(0) = +infinity`.
    pub fn nu_p_capped(p: u64, n: u64, cap: u32) -> u32 {
        match nu_p(p, n as i128) {
            None => cap,
            Some(v) => v.min(cap),
        }
    }

    pub fn pow_u64(base: u64, exp: u32) -> u64 {
        base.checked_pow(exp).expect("integer power overflow")
    }

    /// Binomial coefficient `C(n, k) mod p` by Lucas' theorem.
    pub fn binom_mod_p(mut n: u64, mut k: u64, p: u64) -> u64 {
        let mut acc = 1u64;
        while n > 0 || k > 0 {
            let (ni, ki) = (n % p, k % p);
            if ki > ni {
                return 0;
            }
            acc = acc * small_binom_mod(ni, ki, p) % p;
            n /= p;
            k /= p;
        }
        acc
    }

    fn small_binom_mod(n: u64, k: u64, p: u64) -> u64 {
        // n < p, so the factorials involved are invertible mod p
        let mut num = 1u128;
        let mut den = 1u128;
        let p128 = p as u128;
        for i in 0..k {
            num = num * ((n - i) as u128) % p128;
            den = den * ((i + 1) as u128) % p128;
        }
        (num * mod_inverse(den as u64, p) as u128 % p128) as u64
    }

    pub fn mod_inverse(a: u64, p: u64) -> u64 {
        let (mut old_r, mut r) = (a as i128, p as i128);
        let (mut old_s, mut s) = (1i128, 0i128);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        debug_assert_eq!(old_r, 1, "not invertible");
        old_s.rem_euclid(p as i128) as u64
    }

    pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
        ((a as u128 * b as u128) % p as u128) as u64
    }

    fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
        let mut acc = 1 % p;
        a %= p;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul_mod(acc, a, p);
            }
            a = mul_mod(a, a, p);
            e >>= 1;
        }
        acc
    }

    /// Deterministic Miller-Rabin for 64-bit integers.
    pub fn is_prime(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
        for &b in &BASES {
            if n % b == 0 {
                return n == b;
            }
        }
        let mut d = n - 1;
        let mut s = 0;
        while d % 2 == 0 {
            d /= 2;
            s += 1;
        }
        'outer: for &a in &BASES {
            let mut x = pow_mod(a, d, n);
            if x == 1 || x == n - 1 {
                continue;
            }
            for _ in 1..s {
                x = mul_mod(x, x, n);
                if x == n - 1 {
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// Distinct prime factors of a small integer.
    pub fn prime_factors(mut n: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut q = 2;
        while q * q <= n {
            if n % q == 0 {
                out.push(q);
                while n % q == 0 {
                    n /= q;
                }
            }
            q += 1;
        }
        if n > 1 {
            out.push(n);
        }
        out
    }

}
