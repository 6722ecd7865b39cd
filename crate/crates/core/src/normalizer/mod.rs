//! Normal forms of superattracting germs and explicit conjugacies.
//!
//! The solver works on `f = g(x^{p^m})` with `g(y) = y^d U(y)`, `U(0) = 1`,
//! and determines `Φ(x) = x φ(x)` together with the normal form
//! `f̃ = y^d Ũ(y)` coefficient by coefficient, in the order given by `J`.

mod bottcher;
mod checks;
mod solver;

pub use bottcher::bottcher_product;
pub use checks::{
    bhard_extract, check_nf_conditions, conjugate_by, random_conjugate, verify_conjugacy, BhardForm, NfConditions,
    VerifyReport,
};

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::fields::{poly_roots, FieldElement, FieldError};
use crate::invariants::{profile, InvariantError, InvariantProfile};
use crate::scalar::Scalar;
use crate::series::{Germ1D, Series, SeriesError, EXACT};

pub(crate) use solver::{run_solver, EpsMode, SolverSetup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizerError {
    #[error("germ is not superattracting")]
    NotSuperattracting,
    #[error("truncation {have} is too small; need at least {need}")]
    InsufficientPrecision { have: usize, need: usize },
    #[error("no root in {0} and field extension is disabled")]
    NoRootInField(String),
    #[error("cannot solve {0} in this coefficient ring")]
    UnsolvableRoot(String),
    #[error("solver produced a coefficient outside the expected shape: {0}")]
    ShapeViolation(String),
    #[error("invalid choice of N(j): {0}")]
    InvalidChoice(String),
    #[error("Böttcher product needs gcd(d, p) = 1 and d >= 2 (d = {0})")]
    NotCoprime(u64),
    #[error("prescribed normal form is inconsistent at degree {0}")]
    PrescribedMismatch(u64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("internal solver error: {0}")]
    Internal(String),
    #[error(transparent)]
    Field(FieldError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl From<FieldError> for NormalizerError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::NoRootInField(s) => NormalizerError::NoRootInField(s),
            other => NormalizerError::Field(other),
        }
    }
}

/// Roots of a polynomial equation, possibly in an extension ring.
pub struct RootsFound<S> {
    /// Distinct roots in canonical order.
    pub roots: Vec<S>,
    pub extended: bool,
}

/// Coefficient rings in which the solver can extract roots.
pub trait RootSolve: Scalar {
    /// Roots of `sum coeffs[i] z^i` (not all coefficients zero).
    fn solve_roots(coeffs: &[Self], allow_extension: bool, seed: u64) -> Result<RootsFound<Self>, NormalizerError>;
    fn to_json(&self) -> Value;
    /// Description of the ring an element lives in.
    fn ring_json(&self) -> Value;
}

impl RootSolve for FieldElement {
    fn solve_roots(coeffs: &[Self], allow_extension: bool, seed: u64) -> Result<RootsFound<Self>, NormalizerError> {
        let rs = poly_roots(coeffs, allow_extension, seed)?;
        Ok(RootsFound { roots: rs.roots, extended: rs.extended })
    }
    fn to_json(&self) -> Value {
        json!(self.coeffs())
    }
    fn ring_json(&self) -> Value {
        serde_json::to_value(self.field().to_json()).unwrap()
    }
}

/// Strategy picking `N(j)` in each fiber of `J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NRule {
    NPrime,
    NDoublePrime,
    /// Explicit `j -> N(j)` for every `0 < j < r_0/(p-1)`.
    Custom(BTreeMap<u64, u64>),
}

impl NRule {
    pub fn name(&self) -> &'static str {
        match self {
            NRule::NPrime => "nprime",
            NRule::NDoublePrime => "ndoubleprime",
            NRule::Custom(_) => "custom",
        }
    }

    /// `N(j)` for all `0 < j < r_0/(p-1)`, validated against `J`.
    pub fn table(&self, prof: &InvariantProfile) -> Result<Vec<(u64, u64)>, NormalizerError> {
        let lim = small_j_limit(prof);
        let mut out = Vec::new();
        for j in 1..lim {
            let n = match self {
                NRule::NPrime => prof.n_prime(j),
                NRule::NDoublePrime => prof.n_doubleprime(j),
                NRule::Custom(map) => *map
                    .get(&j)
                    .ok_or_else(|| NormalizerError::InvalidChoice(format!("no N({j}) given")))?,
            };
            if prof.j(n) != j {
                return Err(NormalizerError::InvalidChoice(format!("J({n}) = {} != {j}", prof.j(n))));
            }
            out.push((j, n));
        }
        if let NRule::Custom(map) = self {
            if let Some(j) = map.keys().find(|&&j| j == 0 || j >= lim) {
                return Err(NormalizerError::InvalidChoice(format!("N({j}) is not a free choice")));
            }
        }
        Ok(out)
    }
}

/// Smallest `j` with `j >= r_0/(p-1)`; from there on the fiber of `J` is `{r_0 + j}`.
pub(crate) fn small_j_limit(prof: &InvariantProfile) -> u64 {
    prof.r0().div_ceil(prof.p - 1)
}

/// How to choose among several roots of the equation fixing `φ_j`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum RootPolicy {
    /// The least root in the canonical order.
    #[default]
    Canonical,
    /// Index (into the sorted roots) for each successive solve; missing
    /// entries fall back to 0. Used to enumerate all normal forms.
    Path(Vec<usize>),
}

impl RootPolicy {
    pub(crate) fn pick(&self, event: usize, count: usize) -> usize {
        match self {
            RootPolicy::Canonical => 0,
            RootPolicy::Path(v) => v.get(event).copied().unwrap_or(0) % count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOptions {
    pub rule: NRule,
    /// Truncation `T`: the conjugacy is established modulo `x^{T+1}`.
    pub order: usize,
    pub seed: u64,
    pub allow_extension: bool,
    pub roots: RootPolicy,
    /// Index of the root used for the linear normalization.
    pub lambda_choice: usize,
}

impl SolveOptions {
    pub fn new(rule: NRule, order: usize) -> Self {
        SolveOptions { rule, order, seed: 0, allow_extension: true, roots: RootPolicy::Canonical, lambda_choice: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Linear,
    Eps,
    Phi,
    Extension,
}

/// One step of a solve: which unknown got fixed by which equation.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry<S> {
    pub n: u64,
    pub kind: EntryKind,
    /// `j` for `φ_j` entries.
    pub j: Option<u64>,
    pub value: Option<S>,
    pub roots_considered: usize,
    /// Ring description, for extension entries.
    pub ring: Option<Value>,
}

impl<S: RootSolve> TranscriptEntry<S> {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "n": self.n,
            "kind": self.kind,
            "value": self.value.as_ref().map(|x| x.to_json()).unwrap_or(Value::Null),
            "roots_considered": self.roots_considered,
        });
        if let Some(j) = self.j {
            v["j"] = json!(j);
        }
        if let Some(r) = &self.ring {
            v["field"] = r.clone();
        }
        v
    }
}

pub fn transcript_jsonl<S: RootSolve>(t: &[TranscriptEntry<S>]) -> String {
    t.iter().map(|e| e.to_json().to_string() + "\n").collect()
}

/// `Φ(x) = x φ(x)` conjugating the normalized germ to its normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyWitness<S> {
    /// `φ`, with `φ_0 = 1`, as an exact polynomial.
    pub phi: Series<S>,
    /// `λ` of the preliminary linear change `x -> λ x`.
    pub linear: S,
    pub verified_order: usize,
    pub transcript: Vec<TranscriptEntry<S>>,
}

impl<S: Scalar> ConjugacyWitness<S> {
    /// `Φ(x) = x φ(x)` in the normalized coordinate.
    pub fn big_phi(&self) -> Series<S> {
        self.phi.shift(1)
    }

    /// `Φ ∘ L^{-1}`, which conjugates the original germ to the normal form.
    pub fn full_map(&self) -> Series<S> {
        let li = self.linear.inv().expect("lambda is nonzero");
        let mut pow = li.clone();
        let mut v = vec![self.linear.zero_like()];
        for c in self.phi.coeffs() {
            v.push(c.mul(&pow));
            pow = pow.mul(&li);
        }
        Series::new(self.linear.zero_like(), v, self.phi.trunc())
    }
}

/// A normal form `x^{p^m d} a(x^{p^m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm<S> {
    pub m: u32,
    pub d: u64,
    /// Coefficients `a_0, a_1, ...` of `a`.
    pub a: Vec<S>,
    pub choice: String,
    /// The `(j, N(j))` pairs used for `0 < j < r_0/(p-1)`.
    pub n_table: Vec<(u64, u64)>,
    pub profile: InvariantProfile,
    pub zero: S,
}

impl<S: Scalar> NormalForm<S> {
    pub fn coeff(&self, n: usize) -> S {
        self.a.get(n).cloned().unwrap_or_else(|| self.zero.clone())
    }

    /// The normal form as an exact germ in `x`.
    pub fn to_germ(&self) -> Germ1D<S> {
        let q = self.profile.q() as usize;
        let a = Series::exact(self.zero.clone(), self.a.clone());
        Germ1D::new(a.expand(q).shift(q * self.d as usize)).expect("vanishes at 0")
    }
}

/// Conjugate by `L(x) = λ x` so that the leading coefficient becomes 1.
/// Returns the new germ and `λ`, possibly in an extension.
pub fn normalize_unit<S: RootSolve>(
    f: &Germ1D<S>,
    choice: usize,
    allow_extension: bool,
    seed: u64,
) -> Result<(Germ1D<S>, S, usize), NormalizerError> {
    let ord = f.series.ord()?;
    if ord < 2 {
        return Err(NormalizerError::NotSuperattracting);
    }
    let c = f.series.coeff(ord).clone();
    if c.is_one() {
        let one = c.one_like();
        return Ok((f.clone(), one, 1));
    }
    // λ^{ord - 1} = C^{-1}
    let cinv = c.inv().ok_or_else(|| NormalizerError::Internal("leading coefficient not invertible".into()))?;
    let mut coeffs = vec![c.zero_like(); ord];
    coeffs[0] = cinv.neg();
    coeffs[ord - 1] = c.one_like();
    let found = S::solve_roots(&coeffs, allow_extension, seed)?;
    let count = found.roots.len();
    let lambda = found.roots[choice % count].clone();
    let series = f.series.lift_to(&lambda);
    let linv = lambda.inv().unwrap();
    // L^{-1} f(λ x)
    let mut pw = lambda.one_like();
    let mut v = Vec::with_capacity(series.coeffs().len());
    for a in series.coeffs() {
        v.push(a.mul(&pw).mul(&linv));
        pw = pw.mul(&lambda);
    }
    let mut g = Germ1D::new(Series::new(lambda.zero_like(), v, series.trunc()))?;
    g.scalings = f.scalings.iter().map(|s| s.lift_to(&lambda)).collect();
    g.scalings.push(lambda.clone());
    Ok((g, lambda, count))
}

/// Truncation needed for the normal-form solver.
pub fn required_order(prof: &InvariantProfile) -> usize {
    (prof.q() * (prof.d + prof.floor_pr0() + 1)) as usize
}

/// Normal form of `f` and a witness verified to order `opts.order`.
pub fn normal_form<S: RootSolve>(
    f: &Germ1D<S>,
    opts: &SolveOptions,
) -> Result<(NormalForm<S>, ConjugacyWitness<S>), NormalizerError> {
    let prof = profile(f)?;
    let t = opts.order;
    let need = required_order(&prof);
    if t < need {
        return Err(NormalizerError::InsufficientPrecision { have: t, need });
    }
    if f.trunc() != EXACT && f.trunc() < t {
        return Err(NormalizerError::InsufficientPrecision { have: f.trunc(), need: t });
    }
    let table = opts.rule.table(&prof)?;
    let (fu, lambda, lambda_roots) = normalize_unit(f, opts.lambda_choice, opts.allow_extension, opts.seed)?;
    let fu = Germ1D { series: fu.series.truncate(t), scalings: fu.scalings };
    let setup = SolverSetup::new(&fu, &prof, t, &table)?;
    let out = run_solver(setup, EpsMode::Solve, &opts.roots, opts.allow_extension, opts.seed)?;
    let like = out.eps[0].clone();
    let lambda = lambda.lift_to(&like);
    let fu_series = fu.series.lift_to(&like);
    let mut transcript = vec![TranscriptEntry {
        n: 0,
        kind: EntryKind::Linear,
        j: None,
        value: Some(lambda.clone()),
        roots_considered: lambda_roots,
        ring: None,
    }];
    transcript.extend(out.transcript);
    let nf = NormalForm {
        m: prof.m,
        d: prof.d,
        a: out.eps[..=(prof.floor_pr0() as usize).min(out.eps.len() - 1)].to_vec(),
        choice: opts.rule.name().to_string(),
        n_table: table,
        profile: prof,
        zero: like.zero_like(),
    };
    let nf = NormalForm { a: Series::exact(like.zero_like(), nf.a.clone()).coeffs().to_vec(), ..nf };
    let phi = Series::exact(like.zero_like(), out.phi);
    let big_phi = phi.shift(1);
    let report = verify_conjugacy(&fu_series, &nf.to_germ().series, &big_phi, t)?;
    if let Some(n) = report.first_disagreement {
        return Err(NormalizerError::Internal(format!("witness fails at order {n}")));
    }
    Ok((nf, ConjugacyWitness { phi, linear: lambda, verified_order: report.verified_order, transcript }))
}

/// Conjugacy of the normalized germ to a prescribed `f̃ = y^d Ũ(y)`,
/// where `Ũ` (given by its coefficients) must be supported in degrees
/// `<= floor(p r_0/(p-1))`. Returns `φ` through index `N - r_0`.
pub fn solve_prescribed<S: RootSolve>(
    f: &Germ1D<S>,
    eps_tilde: &[S],
    rule: &NRule,
    order: usize,
    allow_extension: bool,
    seed: u64,
) -> Result<(Vec<S>, Vec<TranscriptEntry<S>>), NormalizerError> {
    let prof = profile(f)?;
    let need = required_order(&prof);
    if order < need {
        return Err(NormalizerError::InsufficientPrecision { have: order, need });
    }
    if !f.series.coeff(f.series.ord()?).is_one() {
        return Err(NormalizerError::Precondition("germ must have leading coefficient 1".into()));
    }
    let table = rule.table(&prof)?;
    let fu = Germ1D { series: f.series.truncate(order), scalings: f.scalings.clone() };
    let setup = SolverSetup::new(&fu, &prof, order, &table)?;
    let out = run_solver(setup, EpsMode::Prescribed(eps_tilde.to_vec()), &RootPolicy::Canonical, allow_extension, seed)?;
    Ok((out.phi, out.transcript))
}

/// All normal forms reachable by varying the roots chosen for `φ_j`,
/// `0 < j < r_0/(p-1)`, with their witnesses; at most `limit` of them.
pub fn enumerate_normal_forms<S: RootSolve>(
    f: &Germ1D<S>,
    opts: &SolveOptions,
    limit: usize,
) -> Result<Vec<(NormalForm<S>, ConjugacyWitness<S>)>, NormalizerError> {
    let prof = profile(f)?;
    let lim = small_j_limit(&prof);
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(path) = stack.pop() {
        if out.len() >= limit {
            break;
        }
        let o = SolveOptions { roots: RootPolicy::Path(path.clone()), ..opts.clone() };
        let (nf, w) = normal_form(f, &o)?;
        let counts: Vec<(u64, usize)> = w
            .transcript
            .iter()
            .filter(|e| e.kind == EntryKind::Phi)
            .map(|e| (e.j.unwrap(), e.roots_considered))
            .collect();
        for (idx, &(j, c)) in counts.iter().enumerate().skip(path.len()) {
            if j >= lim {
                break;
            }
            for choice in 1..c {
                let mut p = path.clone();
                p.resize(idx, 0);
                p.push(choice);
                stack.push(p);
            }
        }
        out.push((nf, w));
    }
    Ok(out)
}
