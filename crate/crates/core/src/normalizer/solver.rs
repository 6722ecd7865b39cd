//! The coefficient recursion for `Φ ∘ f = f̃ ∘ Φ`.
//!
//! In the variable `y = x^{p^m}` the equation reads
//! `U(y) φ(y^d U(y)) = ψ(y)^d Ũ(y ψ(y))` with `ψ = T^m φ`. The left side is
//! `Σ_h φ_h A_h` with `A_h = y^{dh} U^{h+1}`; the right side is
//! `Σ_i ε̃_i y^i ψ^{d+i}`. Both `A_h` and the powers `ψ^k` are kept as dense
//! truncated vectors, the latter updated in place whenever some `φ_j` is fixed.

use super::{EntryKind, NormalizerError, RootPolicy, RootSolve, TranscriptEntry};
use crate::invariants::InvariantProfile;
use crate::scalar::int::binom_mod_p;
use crate::scalar::Scalar;
use crate::series::Germ1D;

pub(crate) enum EpsMode<S> {
    /// Unknown `ε̃`, with `ε̃_{N(j)} = 0`.
    Solve,
    /// Given `ε̃`; only `φ` is solved for and every equation is checked.
    Prescribed(Vec<S>),
}

pub(crate) struct SolverSetup<S> {
    p: u64,
    q: u64,
    d: usize,
    r0: usize,
    i_cap: usize,
    /// Last `y`-degree solved.
    n_max: usize,
    u: Vec<S>,
    j_of: Vec<u64>,
    table: Vec<(u64, u64)>,
    prof: InvariantProfile,
}

impl<S: RootSolve> SolverSetup<S> {
    /// `f` must already have leading coefficient 1 and be truncated at `t`.
    pub(crate) fn new(
        f: &Germ1D<S>,
        prof: &InvariantProfile,
        t: usize,
        table: &[(u64, u64)],
    ) -> Result<Self, NormalizerError> {
        let q = prof.q();
        let d = prof.d as usize;
        let n_max = t / q as usize - d;
        let i_cap = prof.floor_pr0() as usize;
        if n_max < i_cap + 1 {
            return Err(NormalizerError::InsufficientPrecision { have: t, need: super::required_order(prof) });
        }
        let (g, m) = f.series.split_frobenius()?;
        if m != prof.m || g.ord()? != d {
            return Err(NormalizerError::Internal("profile does not match germ".into()));
        }
        let u: Vec<S> = (0..=n_max).map(|n| g.coeff(d + n).clone()).collect();
        if !u[0].is_one() {
            return Err(NormalizerError::Precondition("leading coefficient must be 1".into()));
        }
        let j_of = (0..=n_max as u64).map(|n| prof.j(n)).collect();
        Ok(SolverSetup {
            p: prof.p,
            q,
            d,
            r0: prof.r0() as usize,
            i_cap,
            n_max,
            u,
            j_of,
            table: table.to_vec(),
            prof: prof.clone(),
        })
    }
}

pub(crate) struct SolverOutput<S> {
    /// `φ_0 ..= φ_{N - r_0}`.
    pub phi: Vec<S>,
    /// `ε̃_0 ..= ε̃_N`.
    pub eps: Vec<S>,
    pub transcript: Vec<TranscriptEntry<S>>,
}

struct State<S> {
    u: Vec<S>,
    a: Vec<Vec<S>>,
    pk: Vec<Vec<S>>,
    binom: Vec<Vec<S>>,
    phi: Vec<S>,
    eps: Vec<S>,
}

impl<S: RootSolve> State<S> {
    fn lift(&mut self, like: &S) {
        let l = |v: &mut Vec<S>| v.iter_mut().for_each(|x| *x = x.lift_to(like));
        l(&mut self.u);
        l(&mut self.phi);
        l(&mut self.eps);
        self.a.iter_mut().for_each(l);
        self.pk.iter_mut().for_each(l);
        self.binom.iter_mut().for_each(l);
    }
}

pub(crate) fn run_solver<S: RootSolve>(
    s: SolverSetup<S>,
    mode: EpsMode<S>,
    policy: &RootPolicy,
    allow_extension: bool,
    seed: u64,
) -> Result<SolverOutput<S>, NormalizerError> {
    let n_max = s.n_max;
    let d = s.d;
    let zero = s.u[0].zero_like();
    let one = s.u[0].one_like();
    let kmax = d + s.i_cap;
    let phi_len = n_max - s.r0 + 1;

    let prescribed = matches!(mode, EpsMode::Prescribed(_));
    let mut eps = vec![zero.clone(); n_max + 1];
    if let EpsMode::Prescribed(given) = &mode {
        for (i, c) in given.iter().enumerate() {
            if !c.is_zero() {
                if i > s.i_cap {
                    return Err(NormalizerError::Precondition(format!(
                        "prescribed coefficient at degree {i} beyond {}",
                        s.i_cap
                    )));
                }
                eps[i] = c.clone();
            }
        }
        if !eps[0].is_one() {
            return Err(NormalizerError::Precondition("prescribed constant term must be 1".into()));
        }
    }

    // A_h = y^{dh} U^{h+1}
    let mut a = Vec::new();
    let mut upow = s.u.clone();
    for h in 0..=n_max / d {
        let mut row = vec![zero.clone(); n_max + 1];
        for (t, c) in upow.iter().enumerate() {
            if d * h + t > n_max {
                break;
            }
            row[d * h + t] = c.clone();
        }
        a.push(row);
        upow = mul_trunc(&upow, &s.u, n_max - d * (h + 1).min(n_max / d), &zero);
    }

    let binom: Vec<Vec<S>> =
        (0..=kmax as u64).map(|k| (0..=k).map(|l| one.from_u64_like(binom_mod_p(k, l, s.p))).collect()).collect();
    let mut pk = vec![vec![zero.clone(); n_max + 1]; kmax + 1];
    for row in pk.iter_mut() {
        row[0] = one.clone();
    }
    let mut phi = vec![zero.clone(); phi_len];
    phi[0] = one.clone();
    let mut st = State { u: s.u.clone(), a, pk, binom, phi, eps };

    let lhs = |st: &State<S>, n: usize| -> S {
        let mut acc = st.u[0].zero_like();
        for h in 0..=(n / d).min(phi_len - 1) {
            if !st.phi[h].is_exact_zero() {
                acc = acc.add(&st.phi[h].mul(&st.a[h][n]));
            }
        }
        acc
    };
    // right side with the ε̃_n term left out
    let rhs_without = |st: &State<S>, n: usize| -> S {
        let mut acc = st.u[0].zero_like();
        for i in 0..=n.min(s.i_cap) {
            if i != n && !st.eps[i].is_exact_zero() {
                acc = acc.add(&st.eps[i].mul(&st.pk[d + i][n - i]));
            }
        }
        acc
    };

    let mut transcript = Vec::new();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n_max + 1];
    for n in 0..=n_max {
        buckets[s.j_of[n] as usize].push(n);
    }

    let settle = |st: &mut State<S>, n: usize, transcript: &mut Vec<TranscriptEntry<S>>| -> Result<(), NormalizerError> {
        let val = lhs(st, n).sub(&rhs_without(st, n));
        if prescribed {
            if val != st.eps[n] {
                return Err(NormalizerError::PrescribedMismatch(n as u64));
            }
            return Ok(());
        }
        if n > s.i_cap && !val.is_zero() {
            return Err(NormalizerError::ShapeViolation(format!("nonzero coefficient at degree {n}")));
        }
        st.eps[n] = val.clone();
        transcript.push(TranscriptEntry {
            n: n as u64,
            kind: EntryKind::Eps,
            j: None,
            value: Some(val),
            roots_considered: 1,
            ring: None,
        });
        Ok(())
    };

    // J(n) = 0: ε̃_n = ε_n, processed in the order ⪯
    let mut fiber0 = buckets[0].clone();
    fiber0.sort_by(|&x, &y| s.prof.preceq_cmp(x as u64, y as u64));
    for &n in &fiber0 {
        settle(&mut st, n, &mut transcript)?;
    }

    let small = super::small_j_limit(&s.prof);
    let mut event = 0usize;
    for j in 1..phi_len {
        let nj = if (j as u64) < small {
            s.table.iter().find(|x| x.0 == j as u64).map(|x| x.1 as usize).ok_or_else(|| {
                NormalizerError::InvalidChoice(format!("missing N({j})"))
            })?
        } else {
            s.r0 + j
        };
        if nj > n_max || s.j_of[nj] != j as u64 {
            return Err(NormalizerError::Internal(format!("N({j}) = {nj} is not usable")));
        }

        // E(z) = Σ_l C_l z^{l q} - A_j[n] z - lhs^{(0)}
        let q = s.q as usize;
        let mut cl: Vec<S> = Vec::new();
        for i in 0..=nj.min(s.i_cap) {
            if st.eps[i].is_exact_zero() {
                continue;
            }
            let k = d + i;
            let mut l = 0;
            while l <= k && j * l <= nj - i {
                let b = &st.binom[k][l];
                if !b.is_zero() {
                    let v = &st.pk[k - l][nj - i - j * l];
                    if !v.is_exact_zero() {
                        if cl.len() <= l {
                            cl.resize(l + 1, zero.lift_to(&st.u[0]));
                        }
                        cl[l] = cl[l].add(&st.eps[i].mul(b).mul(v));
                    }
                }
                l += 1;
            }
        }
        let z0 = st.u[0].zero_like();
        let mut poly = vec![z0.clone(); (cl.len().max(1) - 1) * q + 2];
        for (l, c) in cl.iter().enumerate() {
            poly[l * q] = poly[l * q].add(c);
        }
        if j < st.a.len() {
            poly[1] = poly[1].sub(&st.a[j][nj]);
        }
        poly[0] = poly[0].sub(&lhs(&st, nj));

        let (z, count) = if poly.iter().skip(1).all(|c| c.is_zero()) {
            if !poly[0].is_zero() {
                return Err(NormalizerError::Internal(format!("equation for φ_{j} has no solution")));
            }
            (z0.clone(), 0)
        } else {
            let found = S::solve_roots(&poly, allow_extension, seed)?;
            let count = found.roots.len();
            if count == 0 {
                return Err(NormalizerError::UnsolvableRoot(format!("equation for φ_{j}")));
            }
            let z = found.roots[policy.pick(event, count)].clone();
            if found.extended {
                st.lift(&z);
                transcript.iter_mut().for_each(|e: &mut TranscriptEntry<S>| {
                    e.value = e.value.as_ref().map(|v| v.lift_to(&z));
                });
                transcript.push(TranscriptEntry {
                    n: nj as u64,
                    kind: EntryKind::Extension,
                    j: Some(j as u64),
                    value: None,
                    roots_considered: count,
                    ring: Some(z.ring_json()),
                });
            }
            (z, count)
        };
        event += 1;
        st.phi[j] = z.clone();
        update_powers(&mut st, j, &z.pow_u64(s.q), n_max);
        transcript.push(TranscriptEntry {
            n: nj as u64,
            kind: EntryKind::Phi,
            j: Some(j as u64),
            value: Some(z),
            roots_considered: count,
            ring: None,
        });

        let residual = lhs(&st, nj).sub(&rhs_without(&st, nj)).sub(&st.eps[nj]);
        if !residual.is_zero() {
            return Err(if prescribed {
                NormalizerError::PrescribedMismatch(nj as u64)
            } else {
                NormalizerError::Internal(format!("residual at degree {nj} after fixing φ_{j}"))
            });
        }
        for &n in buckets[j].iter().filter(|&&n| n != nj) {
            settle(&mut st, n, &mut transcript)?;
        }
    }

    Ok(SolverOutput { phi: st.phi, eps: st.eps, transcript })
}

/// `ψ <- ψ + c y^j`: `ψ^k` becomes `Σ_l C(k, l) c^l y^{jl} ψ^{k-l}`.
fn update_powers<S: Scalar>(st: &mut State<S>, j: usize, c: &S, n_max: usize) {
    if c.is_zero() {
        return;
    }
    let kmax = st.pk.len() - 1;
    let mut cpow = vec![c.one_like()];
    for l in 1..=kmax {
        let next = cpow[l - 1].mul(c);
        cpow.push(next);
    }
    for k in (1..=kmax).rev() {
        let mut row = st.pk[k].clone();
        let mut l = 1;
        while l <= k && j * l <= n_max {
            let coef = st.binom[k][l].mul(&cpow[l]);
            if !coef.is_exact_zero() {
                let src = &st.pk[k - l];
                for t in j * l..=n_max {
                    let v = &src[t - j * l];
                    if !v.is_exact_zero() {
                        row[t] = row[t].add(&coef.mul(v));
                    }
                }
            }
            l += 1;
        }
        st.pk[k] = row;
    }
}

fn mul_trunc<S: Scalar>(a: &[S], b: &[S], top: usize, zero: &S) -> Vec<S> {
    let mut out = vec![zero.clone(); top + 1];
    for (i, x) in a.iter().enumerate().take(top + 1) {
        if x.is_exact_zero() {
            continue;
        }
        for (k, y) in b.iter().enumerate().take(top + 1 - i) {
            if !y.is_exact_zero() {
                out[i + k] = out[i + k].add(&x.mul(y));
            }
        }
    }
    out
}
