//! Surface-definition file parsing (.srf), command dispatch, and report
//! serialization for the command-line tool and the Python bindings.
//!
//! The file grammar is line oriented with `#` comments:
//!
//! ```text
//! surface <name>
//! n <int>
//! codim <int>
//! form real|complex
//! trunc <int>
//! term <gq>  z=[a1,..,an] zb=[b1,..,bn] u=[c1,..,cd] [comp=<i>]
//! cterm <gq> z=[..] w=[..] chi=[..] tau=[..] [comp=<i>]
//! ```
//!
//! A `term` line gives the coefficient of z^a zbar^b (Re w)^c in the real
//! defining equation Im w = r(z, zbar, Re w) (auto-complexified); a `cterm`
//! line contributes a monomial of the complexified defining series directly.
//! Empty brackets stand for the zero multiindex. Coefficients use the exact
//! Gaussian-rational literal grammar, e.g. `-1/2i`, `3/4+2/5i`, `7`.

use crate::exactnum::GaussianRational;
use crate::obstruction::{
    self, algdep_scan, certify_nonembeddability, degree_certificate, determinant_criterion,
    find_relation, fnv1a_hex, invariant_lower_bound, low_order_obstruction, q_name, rho_name,
    Generator, ObstructionError, RelationCertificate, Target, WeightBudget,
};
use crate::segre::{
    complexify, multiindices_of_exact_total, IndexSubset, RealTerm, Restriction, SegreError,
    SourceForm, SurfaceSpec,
};
use crate::series::{multiindex_total, Multiindex, TruncatedSeries, VarBlocks};
use crate::trees::enumerate_marked_trees;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrontendError {
    Syntax { line: usize, msg: String },
    MissingHeader(&'static str),
    Usage(String),
    Io(String),
    Surface(SegreError),
    Obstruction(ObstructionError),
}

impl fmt::Display for FrontendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrontendError::Syntax { line, msg } => write!(f, "syntax error on line {line}: {msg}"),
            FrontendError::MissingHeader(h) => write!(f, "missing header line: {h}"),
            FrontendError::Usage(msg) => write!(f, "usage error: {msg}"),
            FrontendError::Io(msg) => write!(f, "io error: {msg}"),
            FrontendError::Surface(e) => write!(f, "{e}"),
            FrontendError::Obstruction(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FrontendError {}

impl From<SegreError> for FrontendError {
    fn from(e: SegreError) -> Self {
        FrontendError::Surface(e)
    }
}

impl From<ObstructionError> for FrontendError {
    fn from(e: ObstructionError) -> Self {
        FrontendError::Obstruction(e)
    }
}

impl FrontendError {
    /// Exit code class: 2 for parse/usage problems, 3 for precondition
    /// violations raised by the engine.
    pub fn exit_code(&self) -> i32 {
        match self {
            FrontendError::Syntax { .. }
            | FrontendError::MissingHeader(_)
            | FrontendError::Usage(_)
            | FrontendError::Io(_) => 2,
            FrontendError::Surface(_) | FrontendError::Obstruction(_) => 3,
        }
    }
}

/// One term line of a surface file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileTerm {
    Real {
        coef: GaussianRational,
        alpha: Multiindex,
        mu: Multiindex,
        s: Multiindex,
        comp: usize,
    },
    Complex {
        coef: GaussianRational,
        az: Multiindex,
        aw: Multiindex,
        achi: Multiindex,
        atau: Multiindex,
        comp: usize,
    },
}

/// A parsed surface file; `to_spec` complexifies it into the engine's
/// surface model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceFile {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub form: SourceForm,
    pub trunc: u32,
    pub terms: Vec<FileTerm>,
}

impl SurfaceFile {
    pub fn to_spec(&self) -> Result<SurfaceSpec, FrontendError> {
        let blocks = VarBlocks::new(self.n, self.d);
        match self.form {
            SourceForm::Real => {
                let mut terms = Vec::new();
                for t in &self.terms {
                    match t {
                        FileTerm::Real {
                            coef,
                            alpha,
                            mu,
                            s,
                            comp,
                        } => terms.push(RealTerm {
                            coef: coef.clone(),
                            alpha: alpha.clone(),
                            mu: mu.clone(),
                            s: s.clone(),
                            comp: *comp,
                        }),
                        FileTerm::Complex { .. } => {
                            return Err(FrontendError::Usage(
                                "cterm lines require form complex".to_string(),
                            ))
                        }
                    }
                }
                Ok(complexify(self.name.clone(), blocks, self.trunc, &terms)?)
            }
            SourceForm::Complex => {
                let mut rho: Vec<TruncatedSeries> =
                    (0..self.d).map(|_| TruncatedSeries::zero(blocks)).collect();
                for t in &self.terms {
                    match t {
                        FileTerm::Complex {
                            coef,
                            az,
                            aw,
                            achi,
                            atau,
                            comp,
                        } => {
                            let mut e = vec![0u32; blocks.nvars()];
                            for (i, &a) in az.iter().enumerate() {
                                e[blocks.z(i)] = a;
                            }
                            for (i, &a) in aw.iter().enumerate() {
                                e[blocks.w(i)] = a;
                            }
                            for (i, &a) in achi.iter().enumerate() {
                                e[blocks.chi(i)] = a;
                            }
                            for (i, &a) in atau.iter().enumerate() {
                                e[blocks.tau(i)] = a;
                            }
                            rho[*comp] =
                                rho[*comp].add(&TruncatedSeries::monomial(blocks, e, coef.clone()));
                        }
                        FileTerm::Real { .. } => {
                            return Err(FrontendError::Usage(
                                "term lines require form real".to_string(),
                            ))
                        }
                    }
                }
                Ok(SurfaceSpec::new(
                    self.name.clone(),
                    blocks,
                    rho,
                    self.trunc,
                    SourceForm::Complex,
                )?)
            }
        }
    }

    /// Canonical text form; parsing it back yields an equal SurfaceFile.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("surface {}\n", self.name));
        out.push_str(&format!("n {}\n", self.n));
        out.push_str(&format!("codim {}\n", self.d));
        out.push_str(&format!(
            "form {}\n",
            match self.form {
                SourceForm::Real => "real",
                SourceForm::Complex => "complex",
            }
        ));
        out.push_str(&format!("trunc {}\n", self.trunc));
        let fmt_mi = |m: &Multiindex| -> String {
            format!(
                "[{}]",
                m.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            )
        };
        for t in &self.terms {
            match t {
                FileTerm::Real {
                    coef,
                    alpha,
                    mu,
                    s,
                    comp,
                } => {
                    out.push_str(&format!(
                        "term {} z={} zb={} u={} comp={}\n",
                        coef,
                        fmt_mi(alpha),
                        fmt_mi(mu),
                        fmt_mi(s),
                        comp + 1
                    ));
                }
                FileTerm::Complex {
                    coef,
                    az,
                    aw,
                    achi,
                    atau,
                    comp,
                } => {
                    out.push_str(&format!(
                        "cterm {} z={} w={} chi={} tau={} comp={}\n",
                        coef,
                        fmt_mi(az),
                        fmt_mi(aw),
                        fmt_mi(achi),
                        fmt_mi(atau),
                        comp + 1
                    ));
                }
            }
        }
        out
    }
}

fn parse_bracket_list(s: &str, expect: usize, line: usize) -> Result<Multiindex, FrontendError> {
    let err = |msg: String| FrontendError::Syntax { line, msg };
    let inner = s
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| err(format!("expected a bracketed list, got {s}")))?;
    if inner.trim().is_empty() {
        return Ok(vec![0; expect]);
    }
    let vals: Result<Vec<u32>, _> = inner.split(',').map(|p| p.trim().parse::<u32>()).collect();
    let vals = vals.map_err(|_| err(format!("invalid multiindex {s}")))?;
    if vals.len() != expect {
        return Err(err(format!(
            "expected {expect} entries in {s}, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Parses the surface file grammar; failures carry the 1-based line number.
pub fn parse_surface(text: &str) -> Result<SurfaceFile, FrontendError> {
    let mut name: Option<String> = None;
    let mut n: Option<usize> = None;
    let mut d: Option<usize> = None;
    let mut form: Option<SourceForm> = None;
    let mut trunc: Option<u32> = None;
    let mut terms: Vec<FileTerm> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| FrontendError::Syntax { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap();
        match keyword {
            "surface" => {
                let v = parts
                    .next()
                    .ok_or_else(|| err("surface needs a name".to_string()))?;
                name = Some(v.to_string());
            }
            "n" => {
                let v = parts
                    .next()
                    .and_then(|p| p.parse::<usize>().ok())
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| err("n needs a positive integer".to_string()))?;
                n = Some(v);
            }
            "codim" => {
                let v = parts
                    .next()
                    .and_then(|p| p.parse::<usize>().ok())
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| err("codim needs a positive integer".to_string()))?;
                d = Some(v);
            }
            "form" => {
                form = match parts.next() {
                    Some("real") => Some(SourceForm::Real),
                    Some("complex") => Some(SourceForm::Complex),
                    _ => return Err(err("form must be real or complex".to_string())),
                };
            }
            "trunc" => {
                let v = parts
                    .next()
                    .and_then(|p| p.parse::<u32>().ok())
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| err("trunc needs a positive integer".to_string()))?;
                trunc = Some(v);
            }
            "term" | "cterm" => {
                let nn = n.ok_or(FrontendError::MissingHeader("n"))?;
                let dd = d.ok_or(FrontendError::MissingHeader("codim"))?;
                let coef_str = parts
                    .next()
                    .ok_or_else(|| err("term needs a coefficient".to_string()))?;
                let coef: GaussianRational = coef_str
                    .parse()
                    .map_err(|_| err(format!("invalid coefficient literal {coef_str}")))?;
                let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
                for p in parts {
                    let (k, v) = p
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected key=value, got {p}")))?;
                    fields.insert(k, v);
                }
                let comp = match fields.get("comp") {
                    Some(v) => {
                        let c = v
                            .parse::<usize>()
                            .ok()
                            .filter(|&c| c >= 1 && c <= dd)
                            .ok_or_else(|| err(format!("comp must be in 1..{dd}")))?;
                        c - 1
                    }
                    None => 0,
                };
                if keyword == "term" {
                    let alpha = parse_bracket_list(
                        fields
                            .get("z")
                            .ok_or_else(|| err("term needs z=[..]".to_string()))?,
                        nn,
                        line_no,
                    )?;
                    let mu = parse_bracket_list(
                        fields
                            .get("zb")
                            .ok_or_else(|| err("term needs zb=[..]".to_string()))?,
                        nn,
                        line_no,
                    )?;
                    let s = parse_bracket_list(
                        fields
                            .get("u")
                            .ok_or_else(|| err("term needs u=[..]".to_string()))?,
                        dd,
                        line_no,
                    )?;
                    terms.push(FileTerm::Real {
                        coef,
                        alpha,
                        mu,
                        s,
                        comp,
                    });
                } else {
                    let az = parse_bracket_list(
                        fields
                            .get("z")
                            .ok_or_else(|| err("cterm needs z=[..]".to_string()))?,
                        nn,
                        line_no,
                    )?;
                    let aw = parse_bracket_list(
                        fields
                            .get("w")
                            .ok_or_else(|| err("cterm needs w=[..]".to_string()))?,
                        dd,
                        line_no,
                    )?;
                    let achi = parse_bracket_list(
                        fields
                            .get("chi")
                            .ok_or_else(|| err("cterm needs chi=[..]".to_string()))?,
                        nn,
                        line_no,
                    )?;
                    let atau = parse_bracket_list(
                        fields
                            .get("tau")
                            .ok_or_else(|| err("cterm needs tau=[..]".to_string()))?,
                        dd,
                        line_no,
                    )?;
                    terms.push(FileTerm::Complex {
                        coef,
                        az,
                        aw,
                        achi,
                        atau,
                        comp,
                    });
                }
            }
            other => {
                return Err(err(format!("unknown keyword {other}")));
            }
        }
    }
    Ok(SurfaceFile {
        name: name.ok_or(FrontendError::MissingHeader("surface"))?,
        n: n.ok_or(FrontendError::MissingHeader("n"))?,
        d: d.ok_or(FrontendError::MissingHeader("codim"))?,
        form: form.ok_or(FrontendError::MissingHeader("form"))?,
        trunc: trunc.ok_or(FrontendError::MissingHeader("trunc"))?,
        terms,
    })
}

/// A command run: the rendered output, the structured report, and the
/// process exit code (0 = ran, 2 = parse error, 3 = precondition violation;
/// mathematical verdicts are report content, never exit codes).
pub struct RunResult {
    pub exit_code: i32,
    pub output: String,
    pub report: Option<Value>,
}

struct Flags {
    positional: Vec<String>,
    named: BTreeMap<String, String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, FrontendError> {
    let mut positional = Vec::new();
    let mut named = BTreeMap::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if let Some(key) = a.strip_prefix("--") {
            let val = it
                .next()
                .ok_or_else(|| FrontendError::Usage(format!("flag --{key} needs a value")))?;
            named.insert(key.to_string(), val.clone());
        } else {
            positional.push(a.clone());
        }
    }
    Ok(Flags { positional, named })
}

impl Flags {
    fn get(&self, key: &str) -> Option<&str> {
        self.named.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str, FrontendError> {
        self.get(key)
            .ok_or_else(|| FrontendError::Usage(format!("missing required flag --{key}")))
    }

    fn get_u32(&self, key: &str) -> Result<Option<u32>, FrontendError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u32>()
                .map(Some)
                .map_err(|_| FrontendError::Usage(format!("--{key} needs an integer"))),
        }
    }
}

/// Parses a list of multiindices: entries separated by `;`, components by
/// `,`. For n = 1 a comma-separated list of orders is also accepted.
pub fn parse_multiindices(s: &str, n: usize) -> Result<Vec<Multiindex>, FrontendError> {
    let err = FrontendError::Usage;
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    let pieces: Vec<&str> = s.split(';').collect();
    if pieces.len() == 1 && n == 1 && pieces[0].contains(',') {
        return pieces[0]
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map(|v| vec![v])
                    .map_err(|_| err(format!("invalid order {p}")))
            })
            .collect();
    }
    pieces
        .iter()
        .map(|piece| {
            let comps: Result<Vec<u32>, _> =
                piece.split(',').map(|p| p.trim().parse::<u32>()).collect();
            let comps = comps.map_err(|_| err(format!("invalid multiindex {piece}")))?;
            if comps.len() != n {
                return Err(err(format!("multiindex {piece} must have {n} components")));
            }
            Ok(comps)
        })
        .collect()
}

fn parse_index_list(s: &str) -> Result<Vec<usize>, FrontendError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .map(|v| v - 1)
                .ok_or_else(|| FrontendError::Usage(format!("invalid 1-based index {p}")))
        })
        .collect()
}

fn load_surface(flags: &Flags) -> Result<(SurfaceFile, SurfaceSpec, String), FrontendError> {
    let path = flags.require("surface")?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| FrontendError::Io(format!("cannot read {path}: {e}")))?;
    let file = parse_surface(&text)?;
    let mut spec = file.to_spec()?;
    if let Some(order) = flags.get_u32("order")? {
        spec.order = order;
    }
    Ok((file, spec, fnv1a_hex(&text)))
}

fn budget_from_flags(flags: &Flags, k: u32, l: u32) -> Result<WeightBudget, FrontendError> {
    match flags.get("caps") {
        None | Some("paper") => Ok(WeightBudget::paper(k, l)),
        Some(spec) => {
            let mut wt = None;
            let mut rhw = None;
            for part in spec.split(',') {
                match part.split_once('=') {
                    Some(("wt", v)) => wt = v.parse::<u32>().ok(),
                    Some(("rhw", v)) => rhw = v.parse::<u32>().ok(),
                    _ => {
                        return Err(FrontendError::Usage(
                            "caps must be `paper` or `wt=<w>,rhw=<r>`".to_string(),
                        ))
                    }
                }
            }
            match (wt, rhw) {
                (Some(w), Some(r)) => Ok(WeightBudget::custom(k, l, w, r)),
                _ => Err(FrontendError::Usage(
                    "caps must be `paper` or `wt=<w>,rhw=<r>`".to_string(),
                )),
            }
        }
    }
}

fn gq_json(c: &GaussianRational) -> Value {
    Value::String(c.to_string())
}

fn caps_json(b: &WeightBudget) -> Value {
    json!({
        "wt_p": b.cap_wt_p,
        "wt_r": b.cap_wt_r,
        "rhw_p": b.cap_rhw_p,
        "rhw_r": b.cap_rhw_r,
    })
}

/// Certificate JSON per the published schema: kind, k, l, i0, caps, order,
/// exact, targets, generators, P, R, residual_order.
pub fn certificate_json(cert: &RelationCertificate) -> Value {
    match cert {
        RelationCertificate::Found {
            k,
            l,
            i0,
            budget,
            order,
            exact,
            targets,
            generators,
            p,
            r,
            residual_order,
        } => {
            let p_json: Vec<Value> = p
                .iter()
                .map(|coeffs| {
                    Value::Array(
                        coeffs
                            .iter()
                            .map(|(m, c)| json!({"monomial": m, "coeff": gq_json(c)}))
                            .collect(),
                    )
                })
                .collect();
            let r_json: Vec<Value> = r
                .iter()
                .map(|(m, c)| json!({"monomial": m, "coeff": gq_json(c)}))
                .collect();
            json!({
                "kind": "Found",
                "k": k,
                "l": l,
                "i0": i0.map(|v| v + 1),
                "caps": caps_json(budget),
                "order": order,
                "exact": exact,
                "targets": targets,
                "generators": generators,
                "P": p_json,
                "R": r_json,
                "residual_order": residual_order,
            })
        }
        RelationCertificate::NoneUpToCaps {
            k,
            l,
            i0,
            budget,
            order,
            exact,
            targets,
            generators,
            generators_hash,
        } => json!({
            "kind": "NoneUpToCaps",
            "k": k,
            "l": l,
            "i0": i0.map(|v| v + 1),
            "caps": caps_json(budget),
            "order": order,
            "exact": exact,
            "targets": targets,
            "generators": generators,
            "generators_hash": generators_hash,
            "P": Value::Null,
            "R": Value::Null,
            "residual_order": Value::Null,
        }),
    }
}

fn certificate_text(cert: &RelationCertificate) -> String {
    match cert {
        RelationCertificate::Found { k, l, i0, order, exact, targets, p, r, .. } => {
            let mut s = format!(
                "Found relation (k={k}, l={l}{}, order {order}, {}):\n",
                i0.map(|v| format!(", i0={}", v + 1)).unwrap_or_default(),
                if *exact { "exact" } else { "up to truncation" }
            );
            for (t, coeffs) in targets.iter().zip(p.iter()) {
                let poly: Vec<String> = coeffs.iter().map(|(m, c)| format!("({c})*{m}")).collect();
                s.push_str(&format!(
                    "  P[{t}] = {}\n",
                    if poly.is_empty() { "0".to_string() } else { poly.join(" + ") }
                ));
            }
            let rp: Vec<String> = r.iter().map(|(m, c)| format!("({c})*{m}")).collect();
            s.push_str(&format!(
                "  R = {}\n",
                if rp.is_empty() { "0".to_string() } else { rp.join(" + ") }
            ));
            s
        }
        RelationCertificate::NoneUpToCaps { k, l, i0, order, exact, budget, .. } => format!(
            "NoneUpToCaps (k={k}, l={l}{}, caps wt_P<={}, wt_R<={}, rhw_P<={}, rhw_R<={}, order {order}, {})\n",
            i0.map(|v| format!(", i0={}", v + 1)).unwrap_or_default(),
            budget.cap_wt_p,
            budget.cap_wt_r,
            budget.cap_rhw_p,
            budget.cap_rhw_r,
            if *exact { "unconditional" } else { "up to truncation" }
        ),
    }
}

/// Dispatches one command line (without the program name). Never panics on
/// user input; the result carries the rendered output and the exit code.
pub fn run(args: &[String]) -> RunResult {
    let started = Instant::now();
    match dispatch(args) {
        Ok((command, flags_args, input_hash, payload, text)) => {
            let report = json!({
                "command": command,
                "args": flags_args,
                "input_hash": input_hash,
                "payload": payload,
                "timing_ms": started.elapsed().as_millis() as u64,
            });
            let json_mode = args
                .windows(2)
                .any(|w| w[0] == "--output" && w[1] == "json");
            let output = if json_mode {
                serde_json::to_string_pretty(&report).expect("report serializes")
            } else {
                text
            };
            RunResult {
                exit_code: 0,
                output,
                report: Some(report),
            }
        }
        Err(e) => RunResult {
            exit_code: e.exit_code(),
            output: format!("error: {e}\n"),
            report: None,
        },
    }
}

type DispatchOk = (String, Vec<String>, Option<String>, Value, String);

fn dispatch(args: &[String]) -> Result<DispatchOk, FrontendError> {
    let Some((command, rest)) = args.split_first() else {
        return Err(FrontendError::Usage(usage()));
    };
    let flags = parse_flags(rest)?;
    if !flags.positional.is_empty() {
        return Err(FrontendError::Usage(format!(
            "unexpected argument {}",
            flags.positional[0]
        )));
    }
    let (hash, payload, text) = match command.as_str() {
        "trees" => cmd_trees(&flags)?,
        "solve-q" => cmd_solve_q(&flags)?,
        "derivs" => cmd_derivs(&flags)?,
        "relation" => cmd_relation(&flags)?,
        "certify" => cmd_certify(&flags)?,
        "degree-cert" => cmd_degree_cert(&flags)?,
        "invariants" => cmd_invariants(&flags)?,
        "distinguished" => cmd_distinguished(&flags)?,
        "detcrit" => cmd_detcrit(&flags)?,
        "algdep" => cmd_algdep(&flags)?,
        other => {
            return Err(FrontendError::Usage(format!(
                "unknown command {other}\n{}",
                usage()
            )))
        }
    };
    Ok((command.clone(), args[1..].to_vec(), hash, payload, text))
}

fn usage() -> String {
    "commands: solve-q, derivs, trees, relation, certify, degree-cert, invariants, \
     distinguished, detcrit, algdep; common flags: --surface <file.srf> --order <N> \
     --caps paper|wt=<w>,rhw=<r> --output text|json"
        .to_string()
}

type CmdOk = (Option<String>, Value, String);

fn cmd_trees(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let k = flags
        .get_u32("k")?
        .ok_or_else(|| FrontendError::Usage("trees needs --k".to_string()))?;
    if k == 0 {
        return Err(FrontendError::Usage("--k must be positive".to_string()));
    }
    let trees = enumerate_marked_trees(k);
    let max_vertices = trees.iter().map(|t| t.vertex_count()).max().unwrap_or(0);
    let serialized: Vec<String> = trees.iter().map(|t| t.serialize()).collect();
    let payload = json!({
        "k": k,
        "count": trees.len(),
        "max_vertices": max_vertices,
        "trees": serialized,
    });
    let mut text = format!("marked trees with total mark {k}: {}\n", trees.len());
    text.push_str(&format!(
        "max vertex count: {max_vertices} (bound 2k-1 = {})\n",
        2 * k - 1
    ));
    for t in &serialized {
        text.push_str(&format!("  {t}\n"));
    }
    Ok((None, payload, text))
}

fn cmd_solve_q(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let q = spec.segre_solve(spec.order)?;
    let payload = json!({
        "surface": spec.name,
        "order": spec.order,
        "exact": q.iter().all(TruncatedSeries::is_exact),
        "q": q.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
    });
    let mut text = format!("Segre graph of {} (order {}):\n", spec.name, spec.order);
    for (i, qi) in q.iter().enumerate() {
        text.push_str(&format!("  Q{} = {}\n", i + 1, qi));
    }
    Ok((Some(hash), payload, text))
}

fn cmd_derivs(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let kmax = flags.get_u32("kmax")?.unwrap_or(2);
    let table = spec.derivative_table(kmax, spec.order)?;
    let mut entries_json = Vec::new();
    let mut text = format!(
        "derivative table of {} on the Segre variety of 0 (kmax {kmax}, order {}):\n",
        spec.name, table.working_order
    );
    for ((i, beta, gamma), series) in table.entries() {
        entries_json.push(json!({
            "comp": i + 1,
            "beta": beta,
            "gamma": gamma,
            "weight": crate::segre::DerivativeTable::weight(beta, gamma),
            "series": series.to_string(),
        }));
        text.push_str(&format!(
            "  {} = {}\n",
            rho_name(*i, beta, gamma, spec.blocks.d),
            series
        ));
    }
    let payload = json!({
        "surface": spec.name,
        "kmax": kmax,
        "exact": table.is_exact(),
        "entries": entries_json,
    });
    Ok((Some(hash), payload, text))
}

fn cmd_relation(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let b = spec.blocks;
    let alphas = parse_multiindices(flags.require("alphas")?, b.n)?;
    if alphas.is_empty() {
        return Err(FrontendError::Obstruction(ObstructionError::EmptyTargets));
    }
    let use_q = matches!(flags.get("targets"), Some("q"));
    let n_order = flags.get_u32("order")?;
    let mut orders: Vec<u32> = alphas.iter().map(|a| multiindex_total(a)).collect();
    orders.sort_unstable();
    orders.dedup();
    if orders.first().is_some_and(|&k| k < 2) {
        return Err(FrontendError::Obstruction(ObstructionError::Precondition(
            "all multiindices must have order at least 2".to_string(),
        )));
    }
    let kmax = *orders.last().unwrap();
    let mut certs = Vec::new();
    if use_q {
        if b.d != 1 {
            return Err(FrontendError::Obstruction(ObstructionError::Precondition(
                "Q-derivative relations are implemented for codimension 1".to_string(),
            )));
        }
        let probe = n_order.unwrap_or(spec.order);
        let mut jets_by_order = Vec::new();
        for k in 1..=kmax {
            jets_by_order.push(spec.q_jets_from_solver(k, probe)?);
        }
        for &k in &orders {
            let l = alphas.iter().filter(|a| multiindex_total(a) <= k).count() as u32;
            let budget = budget_from_flags(flags, k, l)?;
            let targets: Vec<Target> = alphas
                .iter()
                .filter(|a| multiindex_total(a) == k)
                .map(|a| Target {
                    name: q_name(0, a, 1),
                    series: jets_by_order[(k - 1) as usize][0]
                        .coeff(&crate::multilinear::multiindex_to_tuple(a)),
                })
                .collect();
            let mut gens = Vec::new();
            for lk in 1..k {
                for beta in multiindices_of_exact_total(b.n, lk) {
                    gens.push(Generator {
                        name: q_name(0, &beta, 1),
                        weight: 2 * lk - 1,
                        rhw: false,
                        series: jets_by_order[(lk - 1) as usize][0]
                            .coeff(&crate::multilinear::multiindex_to_tuple(&beta)),
                    });
                }
            }
            let n = match n_order {
                Some(n) => n,
                None => obstruction::exactness_order(&targets, &gens, &budget).unwrap_or(probe),
            };
            certs.push(find_relation(&targets, &gens, &budget, n)?);
        }
    } else {
        let custom_caps = match flags.get("caps") {
            None | Some("paper") => None,
            _ => {
                let probe = budget_from_flags(flags, 2, 1)?;
                Some((probe.cap_wt_p, probe.cap_rhw_p))
            }
        };
        certs = obstruction::rho_relation_certificates(&spec, &alphas, n_order, custom_caps)?;
    }
    let payload = json!({
        "surface": spec.name,
        "targets": if use_q { "q" } else { "rho" },
        "alphas": alphas,
        "certificates": certs.iter().map(certificate_json).collect::<Vec<_>>(),
    });
    let mut text = format!(
        "relation search on {} ({} targets):\n",
        spec.name,
        if use_q { "Q" } else { "rho" }
    );
    for c in &certs {
        text.push_str(&certificate_text(c));
    }
    Ok((Some(hash), payload, text))
}

fn cmd_certify(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let m = flags
        .get_u32("m")?
        .ok_or_else(|| FrontendError::Usage("certify needs --m".to_string()))? as usize;
    let alphas = parse_multiindices(flags.require("alphas")?, spec.blocks.n)?;
    let n_order = flags.get_u32("order")?;
    let report = certify_nonembeddability(&spec, m, &alphas, n_order)?;
    let payload = json!({
        "surface": report.surface,
        "m": report.m,
        "alphas": report.alphas,
        "verdict": report.verdict.to_string(),
        "unconditional": report.unconditional,
        "target_dimension": spec.blocks.n + m + spec.blocks.d,
        "runs": report.runs.iter().map(certificate_json).collect::<Vec<_>>(),
    });
    let mut text = format!(
        "certification for {}: verdict {} ({})\n",
        report.surface,
        report.verdict,
        if report.unconditional {
            "unconditional"
        } else {
            "up to truncation"
        }
    );
    text.push_str(&format!(
        "  target: hyperquadrics in C^{}\n",
        spec.blocks.n + m + spec.blocks.d
    ));
    for c in &report.runs {
        text.push_str(&format!("  {}", certificate_text(c)));
    }
    Ok((Some(hash), payload, text))
}

fn cmd_degree_cert(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let k = flags
        .get_u32("k")?
        .ok_or_else(|| FrontendError::Usage("degree-cert needs --k".to_string()))?;
    let report = degree_certificate(&spec, k)?;
    let payload = json!({
        "surface": spec.name,
        "k": report.k,
        "l": report.l,
        "target_degree": report.target_degree,
        "actual_max_r_degree": report.actual_max_r_degree,
        "coarse_bound": gq_json(&report.coarse_bound),
        "certified": report.certified,
        "coarse_bound_below_target": report.coarse_bound_below_target,
    });
    let text = format!(
        "degree certificate for {} at k={}: target degree {}, max attainable R degree {}, \
         coarse bound {} => {}\n",
        spec.name,
        report.k,
        report.target_degree,
        report
            .actual_max_r_degree
            .map(|d| d.to_string())
            .unwrap_or_else(|| "none".to_string()),
        report.coarse_bound,
        if report.certified {
            "certified"
        } else {
            "not certified"
        }
    );
    Ok((Some(hash), payload, text))
}

fn cmd_invariants(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let kmax = flags.get_u32("kmax")?.unwrap_or(3);
    let n_order = flags.get_u32("order")?;
    let report = invariant_lower_bound(&spec, kmax, n_order)?;
    let levels: Vec<Value> = report
        .levels
        .iter()
        .map(|lv| {
            json!({
                "k": lv.k,
                "available": lv.available,
                "rtilde_lower_bound": lv.rtilde,
                "subset": lv.subset,
                "certificate": lv.certificate.as_ref().map(certificate_json),
            })
        })
        .collect();
    let payload = json!({
        "surface": report.surface,
        "kmax": report.kmax,
        "levels": levels,
        "sum_lower_bound": report.sum,
        "single_chart": report.single_chart,
        "semantics": "certified lower bounds for the weighted invariants in the given chart; \
                      the sum bounds the codimension gap of any hyperquadric target from below",
    });
    let mut text = format!(
        "invariant lower bounds for {} (kmax {}):\n",
        report.surface, report.kmax
    );
    for lv in &report.levels {
        text.push_str(&format!(
            "  k={}: rtilde >= {} (of {} derivatives)\n",
            lv.k, lv.rtilde, lv.available
        ));
    }
    text.push_str(&format!(
        "  sum >= {}: any hyperquadric target needs codimension gap m >= {}\n",
        report.sum, report.sum
    ));
    Ok((Some(hash), payload, text))
}

fn cmd_distinguished(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let b = spec.blocks;
    let indices = parse_index_list(flags.require("i")?)?;
    let subset = IndexSubset::new(b.n, indices)?;
    let kmax = flags.get_u32("kmax")?.unwrap_or(2);
    let n_order = flags.get_u32("order")?;
    let table = spec.restrict_distinguished(&subset, kmax, n_order.unwrap_or(spec.order))?;
    let mut entries_json = Vec::new();
    let mut text = format!(
        "derivative table of {} on the distinguished submanifold (I = {:?}):\n",
        spec.name,
        subset.indices().iter().map(|i| i + 1).collect::<Vec<_>>()
    );
    for ((i, beta, gamma), series) in table.entries() {
        entries_json.push(json!({
            "comp": i + 1,
            "beta": beta,
            "gamma": gamma,
            "series": series.to_string(),
        }));
        text.push_str(&format!(
            "  {} = {}\n",
            rho_name(*i, beta, gamma, b.d),
            series
        ));
    }
    let restriction = match &table.restriction {
        Restriction::Distinguished(v) => v.iter().map(|i| i + 1).collect::<Vec<_>>(),
        Restriction::SegreZero => Vec::new(),
    };
    let mut payload = json!({
        "surface": spec.name,
        "restriction": restriction,
        "kmax": kmax,
        "exact": table.is_exact(),
        "entries": entries_json,
    });
    if let Some(alpha_str) = flags.get("alphas") {
        let alphas = parse_multiindices(alpha_str, b.n)?;
        let cert = low_order_obstruction(&spec, &subset, &alphas, n_order)?;
        let verdict_note = if cert.is_found() {
            "affine relation found; no fourth-order obstruction here".to_string()
        } else {
            format!(
                "no affine relation within caps: not transversally embeddable into a \
                 hyperquadric in C^{}",
                b.n + alphas.len()
            )
        };
        text.push_str(&certificate_text(&cert));
        text.push_str(&format!("  {verdict_note}\n"));
        payload["low_order_certificate"] = certificate_json(&cert);
        payload["low_order_note"] = Value::String(verdict_note);
    }
    Ok((Some(hash), payload, text))
}

fn cmd_detcrit(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let b = spec.blocks;
    let alphas = parse_multiindices(flags.require("alphas")?, b.n)?;
    let betas = parse_multiindices(flags.require("betas")?, b.n)?;
    let (det, mat) = determinant_criterion(&spec, &alphas, &betas)?;
    let matrix_json: Vec<Vec<Value>> = (0..mat.rows)
        .map(|r| (0..mat.cols).map(|c| gq_json(mat.get(r, c))).collect())
        .collect();
    let obstructs = !det.is_zero();
    let payload = json!({
        "surface": spec.name,
        "alphas": alphas,
        "betas": betas,
        "matrix": matrix_json,
        "det": gq_json(&det),
        "obstructs": obstructs,
        "target_dimension": b.n + alphas.len(),
    });
    let text = format!(
        "determinant criterion for {}: A = {} => {}\n",
        spec.name,
        det,
        if obstructs {
            format!(
                "nonzero: not transversally embeddable into a hyperquadric in C^{}",
                b.n + alphas.len()
            )
        } else {
            "zero: criterion silent".to_string()
        }
    );
    Ok((Some(hash), payload, text))
}

fn cmd_algdep(flags: &Flags) -> Result<CmdOk, FrontendError> {
    let (_, spec, hash) = load_surface(flags)?;
    let b = spec.blocks;
    let alphas = parse_multiindices(flags.require("alphas")?, b.n)?;
    if alphas.is_empty() {
        return Err(FrontendError::Obstruction(ObstructionError::EmptyInput));
    }
    let degree = flags.get_u32("degree")?.unwrap_or(2);
    let comp = flags.get_u32("comp")?.map(|c| c as usize - 1).unwrap_or(0);
    if comp >= b.d {
        return Err(FrontendError::Usage(format!("comp must be in 1..{}", b.d)));
    }
    let n_order = flags.get_u32("order")?;
    let probe = n_order.unwrap_or(spec.order);
    let mut functions = Vec::new();
    for a in &alphas {
        let k = multiindex_total(a).max(1);
        let jets = spec.q_jets_from_solver(k, probe)?;
        let series = jets[comp].coeff(&crate::multilinear::multiindex_to_tuple(a));
        functions.push((q_name(comp, a, b.d), series));
    }
    let cert = algdep_scan(&functions, degree, n_order)?;
    let payload = json!({
        "surface": spec.name,
        "alphas": alphas,
        "comp": comp + 1,
        "degree_cap": degree,
        "certificate": certificate_json(&cert),
        "note": "Found certifies algebraic dependence at this degree; NoneUpToCaps is \
                 evidence against equivalence to a real-algebraic submanifold, but the \
                 full criterion requires unbounded degree",
    });
    let mut text = format!(
        "algebraic-dependence scan on {} (degree cap {degree}):\n",
        spec.name
    );
    text.push_str(&certificate_text(&cert));
    Ok((Some(hash), payload, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUADRIC_SRF: &str = "\
# the flat model
surface quadric
n 1
codim 1
form real
trunc 8
term 1 z=[1] zb=[1] u=[]
";

    #[test]
    fn parse_quadric_and_round_trip() {
        let file = parse_surface(QUADRIC_SRF).unwrap();
        assert_eq!(file.name, "quadric");
        assert_eq!(file.n, 1);
        assert_eq!(file.d, 1);
        assert_eq!(file.trunc, 8);
        assert_eq!(file.terms.len(), 1);
        let spec = file.to_spec().unwrap();
        // S_0 = {w = 0}
        let t = spec.conjugate_segre_graph(6).unwrap();
        assert!(t[0].is_zero());
        // round trip: parse -> serialize -> parse is the identity
        let text = file.to_text();
        let file2 = parse_surface(&text).unwrap();
        assert_eq!(file, file2);
        assert_eq!(file2.to_text(), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "surface x\nn 1\ncodim 1\nform real\ntrunc 5\nterm 1//2 z=[1] zb=[1] u=[]\n";
        match parse_surface(bad) {
            Err(FrontendError::Syntax { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
        let missing = "n 1\ncodim 1\nform real\ntrunc 5\n";
        assert!(matches!(
            parse_surface(missing),
            Err(FrontendError::MissingHeader("surface"))
        ));
        let unknown = "surface x\nbogus 3\n";
        assert!(matches!(
            parse_surface(unknown),
            Err(FrontendError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn reality_violation_detected_on_to_spec() {
        let bad = "surface x\nn 1\ncodim 1\nform real\ntrunc 5\nterm i z=[2] zb=[1] u=[]\n";
        let file = parse_surface(bad).unwrap();
        assert!(matches!(
            file.to_spec(),
            Err(FrontendError::Surface(SegreError::RealityViolation { .. }))
        ));
    }

    #[test]
    fn run_trees_json() {
        let args: Vec<String> = ["trees", "--k", "2", "--output", "json"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let result = run(&args);
        assert_eq!(result.exit_code, 0);
        let v: Value = serde_json::from_str(&result.output).unwrap();
        assert_eq!(v["payload"]["k"], 2);
        assert_eq!(v["payload"]["count"], 3);
        assert_eq!(v["command"], "trees");
    }

    #[test]
    fn run_unknown_command_exits_2() {
        let args = vec!["frobnicate".to_string()];
        assert_eq!(run(&args).exit_code, 2);
    }

    #[test]
    fn relation_with_empty_alphas_exits_3() {
        let dir = std::env::temp_dir().join("crobstruct_test_relation");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("q.srf");
        std::fs::write(&path, QUADRIC_SRF).unwrap();
        let args: Vec<String> = [
            "relation",
            "--surface",
            path.to_str().unwrap(),
            "--alphas",
            "",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let result = run(&args);
        assert_eq!(result.exit_code, 3, "output: {}", result.output);
    }

    #[test]
    fn multiindex_parsing() {
        assert_eq!(
            parse_multiindices("2,3", 1).unwrap(),
            vec![vec![2], vec![3]]
        );
        assert_eq!(parse_multiindices("2", 1).unwrap(), vec![vec![2]]);
        assert_eq!(
            parse_multiindices("2,0;1,1", 2).unwrap(),
            vec![vec![2, 0], vec![1, 1]]
        );
        assert!(parse_multiindices("2,0,1", 2).is_err());
    }

    #[test]
    fn certify_quadric_through_cli() {
        let dir = std::env::temp_dir().join("crobstruct_test_certify");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("q.srf");
        std::fs::write(&path, QUADRIC_SRF).unwrap();
        let args: Vec<String> = [
            "certify",
            "--surface",
            path.to_str().unwrap(),
            "--m",
            "1",
            "--alphas",
            "2,3",
            "--output",
            "json",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let result = run(&args);
        assert_eq!(result.exit_code, 0, "output: {}", result.output);
        let v: Value = serde_json::from_str(&result.output).unwrap();
        assert_eq!(v["payload"]["verdict"], "Inconclusive");
        for run in v["payload"]["runs"].as_array().unwrap() {
            for key in [
                "kind",
                "k",
                "l",
                "caps",
                "order",
                "exact",
                "targets",
                "generators",
            ] {
                assert!(run.get(key).is_some(), "missing key {key}");
            }
        }
    }
}
