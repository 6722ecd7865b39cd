//! Root finding over finite fields (Cantor-Zassenhaus).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::poly::Poly;
use super::{check_size, default_field, FieldElement, FieldError, FieldRef};
use crate::scalar::Scalar;

/// Distinct roots in canonical order, together with the field they live in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootSet {
    pub field: FieldRef,
    pub roots: Vec<FieldElement>,
    /// Set when the roots required passing to a proper extension.
    pub extended: bool,
}

/// Roots of `sum coeffs[i] x^i`. With `allow_extension` the smallest
/// extension of the coefficient field containing a root is used when there
/// is none in the field itself.
pub fn poly_roots(coeffs: &[FieldElement], allow_extension: bool, seed: u64) -> Result<RootSet, FieldError> {
    let field = match coeffs.first() {
        Some(c) => c.field(),
        None => return Err(FieldError::ZeroPolynomial),
    };
    let f = Poly::new(field, coeffs.to_vec());
    if f.is_zero() {
        return Err(FieldError::ZeroPolynomial);
    }
    if f.degree() == Some(0) {
        return Err(FieldError::NoRootInField(field.to_string()));
    }
    let f = f.monic();
    let x = Poly::x(field);
    let xq = x.frobenius_powmod(1, &f);
    let g = f.gcd(&xq.sub(&x));
    if g.degree() == Some(0) {
        if !allow_extension {
            return Err(FieldError::NoRootInField(field.to_string()));
        }
        let i = min_factor_degree(&f, xq);
        let k = field.k() * i;
        check_size(field.p(), k)?;
        let big = default_field(field.p(), k);
        let lifted = f.lift(big);
        let mut rs = poly_roots(&lifted.coeffs, false, seed)?;
        rs.extended = true;
        return Ok(rs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roots = Vec::new();
    split(&g, &mut rng, &mut roots);
    roots.sort_by(|a, b| a.canonical_cmp(b));
    roots.dedup();
    Ok(RootSet { field, roots, extended: false })
}

/// Smallest degree of an irreducible factor of `f`, given `x^q mod f`.
fn min_factor_degree(f: &Poly, xq: Poly) -> u32 {
    let x = Poly::x(f.field);
    let mut h = xq;
    let mut i = 1;
    loop {
        if f.gcd(&h.sub(&x)).degree() != Some(0) {
            return i;
        }
        h = h.frobenius_powmod(1, f);
        i += 1;
    }
}

fn random_poly(field: FieldRef, below: usize, rng: &mut ChaCha8Rng) -> Poly {
    Poly::new(field, (0..below).map(|_| field.random(rng)).collect())
}

/// Split a monic product of distinct linear factors.
fn split(g: &Poly, rng: &mut ChaCha8Rng, out: &mut Vec<FieldElement>) {
    let deg = g.degree().expect("nonzero");
    if deg == 0 {
        return;
    }
    if deg == 1 {
        out.push(g.coeffs[0].neg());
        return;
    }
    let field = g.field;
    let one = Poly::constant(field.one());
    loop {
        let y = random_poly(field, deg, rng);
        let h = if field.p() == 2 {
            let mut t = y.clone();
            let mut acc = y.clone();
            for _ in 1..field.k() {
                t = t.mul(&t).rem(g);
                acc = acc.add(&t);
            }
            acc
        } else {
            y.powmod((field.size() - 1) / 2, g).sub(&one)
        };
        let d = g.gcd(&h);
        let dd = d.degree().unwrap_or(0);
        if dd > 0 && dd < deg {
            let (q, _) = g.divrem(&d);
            split(&d, rng, out);
            split(&q.monic(), rng, out);
            return;
        }
    }
}
