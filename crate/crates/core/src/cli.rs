//! The `germ` command line front-end.
//!
//! Every command except `jtable` prints a JSON report carrying
//! `schema_version`. Exit status is 0 on success, 2 when the mathematics
//! says no (a failed check or an unsolvable instance) and 1 on bad input.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analytic::{growth_analysis, growth_table_tsv, LaurentScalar, DEFAULT_PREC};
use crate::fields::{field_create, FieldElement, FieldJson, FieldRef};
use crate::invariants::{compose_bound, germ_at_infinity, iterate_profile, profile, InvariantProfile};
use crate::multidim::{det_int, diagonal_scaling, monomial_conjugacy, scaled_c, verify_multi, DiagonalScaling, MultiGerm};
use crate::normalizer::{
    bottcher_product, check_nf_conditions, normal_form, required_order, transcript_jsonl, verify_conjugacy, NRule,
    RootSolve, SolveOptions,
};
use crate::scalar::Scalar;
use crate::series::{Germ1D, Series, EXACT};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ORDER: usize = 64;
const DEFAULT_DEGREE: usize = 12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid arguments: {0}")]
    Validation(String),
    #[error("{0}")]
    Math(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => 1,
            CliError::Math(_) => 2,
        }
    }
}

fn math<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Math(e.to_string())
}

fn parse_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Parse(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "germ", version, about = "Invariants and normal forms of superattracting germs in characteristic p")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Args, Default)]
pub struct Options {
    /// Characteristic, for inputs that do not name their field.
    #[arg(long, global = true)]
    pub p: Option<u64>,
    /// Degree k of the field F_{p^k}, for inputs that do not name their field.
    #[arg(long, global = true)]
    pub field: Option<u32>,
    /// Truncation order.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Total degree for `multinorm`.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// `nprime` or `ndoubleprime`, for `normalize`.
    #[arg(long, global = true)]
    pub choice: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Permit passing to field extensions when a root is missing.
    #[arg(long, global = true)]
    pub allow_extension: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Profile (m, d, e, r) of a germ.
    Invariants { input: PathBuf },
    /// Normal form and conjugating series.
    Normalize {
        input: PathBuf,
        /// Write the solver transcript as JSON lines.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Böttcher coordinate of a germ with p not dividing d.
    Bottcher { input: PathBuf },
    /// Check Φ ∘ f = g ∘ Φ.
    Conjcheck { f: PathBuf, g: PathBuf, phi: PathBuf },
    /// Profile of outer ∘ inner against the predicted bound.
    Compose { inner: PathBuf, outer: PathBuf },
    /// Profile of the n-th iterate.
    Iterate {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: u32,
    },
    /// Germ of a polynomial at infinity.
    Infinity { input: PathBuf },
    /// Monomial conjugacy of a germ in several variables.
    Multinorm { input: PathBuf },
    /// Growth certificate of the conjugacy over F_p((t)).
    Growth {
        input: PathBuf,
        /// Write the per-n bound table as TSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// TSV table of the J map for a profile.
    Jtable {
        /// Comma separated r_0, ..., r_e.
        #[arg(long, value_delimiter = ',')]
        r: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        m: u32,
        /// Defaults to p^e.
        #[arg(long)]
        d: Option<u64>,
        /// Rows n = 0 .. N-1.
        #[arg(long, default_value_t = 30)]
        n: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Invariants { .. } => "invariants",
            Command::Normalize { .. } => "normalize",
            Command::Bottcher { .. } => "bottcher",
            Command::Conjcheck { .. } => "conjcheck",
            Command::Compose { .. } => "compose",
            Command::Iterate { .. } => "iterate",
            Command::Infinity { .. } => "infinity",
            Command::Multinorm { .. } => "multinorm",
            Command::Growth { .. } => "growth",
            Command::Jtable { .. } => "jtable",
        }
    }
}

fn validate(cli: &Cli) -> Result<(), CliError> {
    let o = &cli.opts;
    let name = cli.command.name();
    let reject = |flag: &str, ok: &[&str]| -> Result<(), CliError> {
        if ok.contains(&name) {
            Ok(())
        } else {
            Err(CliError::Validation(format!("--{flag} does not apply to {name}")))
        }
    };
    if o.choice.is_some() {
        reject("choice", &["normalize"])?;
    }
    if o.degree.is_some() {
        reject("degree", &["multinorm"])?;
    }
    if o.allow_extension {
        reject("allow-extension", &["normalize"])?;
    }
    if o.order.is_some() {
        reject("order", &["invariants", "normalize", "bottcher", "conjcheck", "compose", "iterate", "infinity", "growth"])?;
    }
    if o.field.is_some() && o.p.is_none() {
        return Err(CliError::Validation("--field needs --p".into()));
    }
    if matches!(cli.command, Command::Jtable { .. }) && o.p.is_none() {
        return Err(CliError::Validation("jtable needs --p".into()));
    }
    Ok(())
}

/// Parse arguments, run, write the report; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => match emit(&cli.opts.out, &out.text) {
            Ok(()) => out.status,
            Err(e) => {
                eprintln!("germ: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("germ: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Report text and exit status of a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub status: i32,
}

impl Output {
    fn json(cli: &Cli, mut body: Value, ok: bool) -> Output {
        body["schema_version"] = json!(SCHEMA_VERSION);
        body["command"] = json!(cli.command.name());
        body["seed"] = json!(cli.opts.seed);
        Output { text: serde_json::to_string_pretty(&body).unwrap() + "\n", status: if ok { 0 } else { 2 } }
    }
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    validate(cli)?;
    let o = &cli.opts;
    let order = o.order.unwrap_or(DEFAULT_ORDER);
    match &cli.command {
        Command::Invariants { input } => {
            let f = read_germ(input, o)?;
            let prof = profile(&f.truncate_to(order)).map_err(math)?;
            Ok(Output::json(cli, profile_json(&prof), true))
        }
        Command::Normalize { input, transcript } => normalize(cli, input, transcript.as_deref(), order),
        Command::Bottcher { input } => {
            let f = read_germ(input, o)?.truncate_to(order);
            let w = bottcher_product(&f, order, o.seed).map_err(math)?;
            let body = json!({
                "field": field_json(f.series.zero_scalar().field()),
                "phi": series_json(&w.phi),
                "linear": w.linear.coeffs(),
                "verified_order": w.verified_order,
            });
            Ok(Output::json(cli, body, true))
        }
        Command::Conjcheck { f, g, phi } => {
            let (f, g, phi) = (read_germ(f, o)?, read_germ(g, o)?, read_germ(phi, o)?);
            let like = largest(&[f.series.zero_scalar(), g.series.zero_scalar(), phi.series.zero_scalar()]);
            let lift = |s: &Series<FieldElement>| s.lift_to(&like);
            let rep = verify_conjugacy(&lift(&f.series), &lift(&g.series), &lift(&phi.series), order).map_err(math)?;
            let ok = rep.first_disagreement.is_none();
            Ok(Output::json(cli, json!({ "agree": ok, "report": rep }), ok))
        }
        Command::Compose { inner, outer } => {
            let (fi, fo) = (read_germ(inner, o)?.truncate_to(order), read_germ(outer, o)?.truncate_to(order));
            let (pi, po) = (profile(&fi).map_err(math)?, profile(&fo).map_err(math)?);
            let like = largest(&[fi.series.zero_scalar(), fo.series.zero_scalar()]);
            let comp = fo.series.lift_to(&like).compose(&fi.series.lift_to(&like)).map_err(math)?;
            let bound = compose_bound(&pi, &po);
            let actual = Germ1D::new(comp).map_err(math).and_then(|g| profile(&g).map_err(math));
            let mut body = json!({ "inner": profile_json(&pi), "outer": profile_json(&po), "bound": bound });
            let ok = match &actual {
                Ok(a) => {
                    body["actual"] = profile_json(a);
                    let within = a.m == bound.m && a.d == bound.d && a.e == bound.e;
                    let r_ok = within
                        && a.r.iter().zip(&bound.r_bound).zip(&bound.certain).all(|((x, b), c)| x >= b && (!c || x == b));
                    body["consistent"] = json!(r_ok);
                    r_ok
                }
                Err(e) => {
                    body["error"] = json!(e.to_string());
                    false
                }
            };
            Ok(Output::json(cli, body, ok))
        }
        Command::Iterate { input, n } => {
            if *n == 0 {
                return Err(CliError::Validation("--n must be positive".into()));
            }
            let f = read_germ(input, o)?.truncate_to(order);
            let prof = profile(&f).map_err(math)?;
            let pred = iterate_profile(&prof, *n);
            let mut body = json!({
                "profile": profile_json(&prof),
                "n": n,
                "predicted": { "m": pred.m, "d": pred.d.to_string(), "e": pred.e, "r0": pred.r0.to_string() },
            });
            let mut g = f.series.clone();
            for _ in 1..*n {
                g = g.compose(&f.series).map_err(math)?;
            }
            let ok = match Germ1D::new(g).map_err(math).and_then(|g| profile(&g).map_err(math)) {
                Ok(a) => {
                    let agree = a.m as u64 == pred.m && a.d.to_string() == pred.d.to_string() && a.r0().to_string() == pred.r0.to_string();
                    body["brute_force"] = profile_json(&a);
                    body["agree"] = json!(agree);
                    agree
                }
                Err(e) => {
                    body["brute_force_error"] = json!(e.to_string());
                    true
                }
            };
            Ok(Output::json(cli, body, ok))
        }
        Command::Infinity { input } => {
            let v = read_json(input)?;
            let field = field_of(&v, o)?;
            let poly = v["poly"].as_array().ok_or_else(|| parse_err("missing poly"))?;
            let poly = poly.iter().map(|c| element(field, c)).collect::<Result<Vec<_>, _>>()?;
            let g = germ_at_infinity(&poly, order).map_err(math)?;
            let prof = profile(&g).map_err(math)?;
            let ok = prof.r0() <= prof.d;
            let body = json!({ "germ": germ_json(&g), "profile": profile_json(&prof), "r0_le_d": ok });
            Ok(Output::json(cli, body, ok))
        }
        Command::Multinorm { input } => multinorm(cli, input),
        Command::Growth { input, table } => {
            let f = read_laurent_germ(input, o)?;
            let (w, cert, rep) = growth_analysis(&f, order).map_err(math)?;
            if let Some(path) = table {
                fs::write(path, growth_table_tsv(&w, &cert)).map_err(|e| parse_err(format!("{}: {e}", path.display())))?;
            }
            let body = json!({
                "profile": profile_json(&profile(&f).map_err(math)?),
                "certificate": cert.to_json(),
                "holds": rep.holds,
                "violations": rep.violations,
                "undetermined": rep.undetermined,
                "max_ratio": rep.max_ratio.map(|r| r.to_string()),
                "checked": rep.checked,
                "phi": w.phi.coeffs().iter().map(|c| c.to_json_value()).collect::<Vec<_>>(),
            });
            Ok(Output::json(cli, body, rep.holds))
        }
        Command::Jtable { r, m, d, n } => {
            let p = o.p.unwrap();
            let e = r.len().checked_sub(1).ok_or_else(|| CliError::Validation("--r is empty".into()))?;
            let d = d.unwrap_or_else(|| p.pow(e as u32));
            let prof = InvariantProfile::new(p, *m, d, r.clone()).map_err(|e| CliError::Validation(e.to_string()))?;
            Ok(Output { text: prof.jtable(*n).to_tsv(), status: 0 })
        }
    }
}

fn normalize(cli: &Cli, input: &Path, transcript: Option<&Path>, order: usize) -> Result<Output, CliError> {
    let o = &cli.opts;
    let rule = match o.choice.as_deref().unwrap_or("ndoubleprime") {
        "nprime" => NRule::NPrime,
        "ndoubleprime" => NRule::NDoublePrime,
        other => return Err(CliError::Validation(format!("unknown choice {other}"))),
    };
    let f = read_germ(input, o)?;
    let prof = profile(&f.truncate_to(order)).map_err(math)?;
    let need = required_order(&prof);
    if order < need {
        return Err(CliError::Validation(format!("--order {order} is below the required order {need}")));
    }
    let f = f.truncate_to(order);
    let mut opts = SolveOptions::new(rule, order);
    opts.allow_extension = o.allow_extension;
    opts.seed = o.seed;
    let (nf, w) = normal_form(&f, &opts).map_err(math)?;
    let like = nf.zero.clone();
    let rep = verify_conjugacy(&f.series.lift_to(&like), &nf.to_germ().series, &w.full_map(), order).map_err(math)?;
    let cond = check_nf_conditions(&nf);
    if let Some(path) = transcript {
        fs::write(path, transcript_jsonl(&w.transcript)).map_err(|e| parse_err(format!("{}: {e}", path.display())))?;
    }
    let ok = rep.first_disagreement.is_none() && cond.all();
    let body = json!({
        "profile": profile_json(&prof),
        "choice": nf.choice,
        "n_table": nf.n_table,
        "field": field_json(like.field()),
        "a": nf.a.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        "normal_form": germ_json(&nf.to_germ()),
        "witness": {
            "phi": series_json(&w.phi),
            "linear": w.linear.to_json(),
            "full_map": series_json(&w.full_map()),
        },
        "verify": rep,
        "conditions": cond,
    });
    Ok(Output::json(cli, body, ok))
}

fn multinorm(cli: &Cli, input: &Path) -> Result<Output, CliError> {
    let t = cli.opts.degree.unwrap_or(DEFAULT_DEGREE);
    let v = read_json(input)?;
    let f = MultiGerm::from_json(&v, t).map_err(parse_err)?;
    let ds: Vec<Vec<i64>> = f.d.iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect();
    let conj = monomial_conjugacy(&f, t).map_err(math)?;
    let check = verify_multi(&f.components(t), &f.leading_part().components(t), &conj.big_phi, t).map_err(math)?;
    let scaling = match diagonal_scaling(&f.c, &f.d, cli.opts.seed).map_err(math)? {
        DiagonalScaling::Scaling(delta) => {
            let c = scaled_c(&f.c, &f.d, &delta);
            json!({
                "field": field_json(delta[0].field()),
                "delta": delta.iter().map(|x| x.coeffs().to_vec()).collect::<Vec<_>>(),
                "scaled_c_is_one": c.iter().all(|x| x.is_one()),
            })
        }
        DiagonalScaling::Moduli { dimension } => json!({ "moduli_dimension": dimension }),
    };
    let body = json!({
        "N": f.nvars(),
        "det_D": det_int(&ds).to_string(),
        "degree": t,
        "phi": conj.phi.iter().map(|x| x.to_json()).collect::<Vec<_>>(),
        "orders": conj.orders,
        "verified": check.is_none(),
        "diagonal_scaling": scaling,
    });
    Ok(Output::json(cli, body, check.is_none()))
}

fn largest(xs: &[&FieldElement]) -> FieldElement {
    (*xs.iter().max_by_key(|x| x.field().k()).unwrap()).clone()
}

trait TruncateTo {
    fn truncate_to(&self, t: usize) -> Self;
}

impl<S: Scalar> TruncateTo for Germ1D<S> {
    fn truncate_to(&self, t: usize) -> Self {
        Germ1D::new(self.series.truncate(t)).expect("still vanishes at 0")
    }
}

pub fn profile_json(p: &InvariantProfile) -> Value {
    json!({ "m": p.m, "d": p.d, "e": p.e, "r": p.r })
}

fn field_json(f: FieldRef) -> Value {
    serde_json::to_value(f.to_json()).unwrap()
}

pub fn series_json<S: RootSolve>(s: &Series<S>) -> Value {
    json!({
        "trunc": if s.is_exact() { Value::Null } else { json!(s.trunc()) },
        "coeffs": s.coeffs().iter().map(|c| c.to_json()).collect::<Vec<_>>(),
    })
}

pub fn germ_json(g: &Germ1D<FieldElement>) -> Value {
    let mut v = series_json(&g.series);
    let f = g.series.zero_scalar().field();
    v["p"] = json!(f.p());
    v["field"] = field_json(f);
    v
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| parse_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| parse_err(format!("{}: {e}", path.display())))
}

/// The field named in the file, else the one given by `--p` and `--field`.
fn field_of(v: &Value, o: &Options) -> Result<FieldRef, CliError> {
    if let Some(fv) = v.get("field").filter(|x| !x.is_null()) {
        let fj: FieldJson = serde_json::from_value(fv.clone()).map_err(parse_err)?;
        return fj.create().map_err(|e| CliError::Validation(e.to_string()));
    }
    let p = v.get("p").and_then(|x| x.as_u64()).or(o.p).ok_or_else(|| CliError::Validation("no field given".into()))?;
    if o.p.is_some_and(|q| q != p) {
        return Err(CliError::Validation(format!("--p {} disagrees with the file (p = {p})", o.p.unwrap())));
    }
    field_create(p, o.field.unwrap_or(1), None).map_err(|e| CliError::Validation(e.to_string()))
}

fn element(field: FieldRef, v: &Value) -> Result<FieldElement, CliError> {
    let bad = || parse_err(format!("bad field element {v}"));
    let coeffs: Vec<u64> = match v {
        Value::Number(n) => vec![n.as_u64().ok_or_else(bad)?],
        Value::Array(a) => a.iter().map(|x| x.as_u64().ok_or_else(bad)).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if coeffs.len() > field.k() as usize {
        return Err(bad());
    }
    Ok(field.element(&coeffs))
}

fn trunc_of(v: &Value) -> Result<usize, CliError> {
    match v.get("trunc") {
        None | Some(Value::Null) => Ok(EXACT),
        Some(t) => t.as_u64().map(|t| t as usize).ok_or_else(|| parse_err("bad trunc")),
    }
}

pub fn read_germ(path: &Path, o: &Options) -> Result<Germ1D<FieldElement>, CliError> {
    let v = read_json(path)?;
    let field = field_of(&v, o)?;
    let coeffs = v["coeffs"].as_array().ok_or_else(|| parse_err("missing coeffs"))?;
    let coeffs = coeffs.iter().map(|c| element(field, c)).collect::<Result<Vec<_>, _>>()?;
    let s = Series::new(field.zero(), coeffs, trunc_of(&v)?);
    Germ1D::new(s).map_err(|e| CliError::Validation(e.to_string()))
}

/// Coefficients are field elements (constants) or `{"val", "unit", "prec"}`;
/// a missing `prec` means the coefficient is exact.
fn laurent(field: FieldRef, v: &Value) -> Result<LaurentScalar, CliError> {
    if !v.is_object() {
        return Ok(LaurentScalar::constant(element(field, v)?));
    }
    let val = v["val"].as_i64().unwrap_or(0);
    let unit = match &v["unit"] {
        Value::Array(a) => a.iter().map(|c| element(field, c)).collect::<Result<Vec<_>, _>>()?,
        Value::Null => Vec::new(),
        _ => return Err(parse_err("bad unit")),
    };
    let abs = v.get("prec").and_then(|x| x.as_i64()).map(|pr| val + pr);
    Ok(LaurentScalar::from_digits(field, val, unit, abs, DEFAULT_PREC))
}

fn read_laurent_germ(path: &Path, o: &Options) -> Result<Germ1D<LaurentScalar>, CliError> {
    let v = read_json(path)?;
    let field = field_of(&v, o)?;
    let coeffs = v["coeffs"].as_array().ok_or_else(|| parse_err("missing coeffs"))?;
    let coeffs = coeffs.iter().map(|c| laurent(field, c)).collect::<Result<Vec<_>, _>>()?;
    let zero = LaurentScalar::constant(field.zero());
    Germ1D::new(Series::new(zero, coeffs, trunc_of(&v)?)).map_err(|e| CliError::Validation(e.to_string()))
}
