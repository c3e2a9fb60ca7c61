//! The certification engine: weight budgets, weight-bounded monomial bases
//! over derivative generators, exact relation searches with one-sided
//! certificates, degree-growth certificates, invariant lower bounds,
//! low-order obstructions on distinguished submanifolds, the determinant
//! criterion, and the bounded-degree algebraic-dependence scan.
//!
//! A relation search asks for polynomials P_j (one per target) and R over a
//! generator set such that sum_j P_j * target_j = R holds as series through
//! a truncation order N, with all monomials inside weight caps. `Found`
//! certificates carry the coefficients and a verified residual; a
//! `NoneUpToCaps` certificate asserts that every solution of the order-N
//! linear system has all P_j evaluating to the zero series, which is the
//! faithful negation of the existence statement. When every generator and
//! target is an exact polynomial and N exceeds the largest chi-degree any
//! budgeted combination can reach, the negative certificate is
//! unconditional rather than up-to-truncation.

use crate::exactnum::{ExactMatrix, GaussianRational};
use crate::segre::{
    multiindices_of_exact_total, DerivativeTable, IndexSubset, SegreError, SurfaceSpec,
};
use crate::series::{multiindex_total, Multiindex, TruncatedSeries, ORDER_EXACT};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObstructionError {
    EmptyTargets,
    EmptyInput,
    OrderMismatch { needed: u32, available: u32 },
    SupportViolation(String),
    SupportOverlap,
    FormMismatch(String),
    FamilyMismatch(String),
    Precondition(String),
    Segre(SegreError),
}

impl fmt::Display for ObstructionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObstructionError::EmptyTargets => {
                write!(f, "relation search needs at least one target")
            }
            ObstructionError::EmptyInput => write!(f, "no input series supplied"),
            ObstructionError::OrderMismatch { needed, available } => {
                write!(
                    f,
                    "series order {available} is below the search order {needed}"
                )
            }
            ObstructionError::SupportViolation(msg) => write!(f, "support violation: {msg}"),
            ObstructionError::SupportOverlap => {
                write!(f, "alpha and beta multiindex supports must be disjoint")
            }
            ObstructionError::FormMismatch(msg) => {
                write!(f, "surface is not in normalized form: {msg}")
            }
            ObstructionError::FamilyMismatch(msg) => write!(f, "degree data unavailable: {msg}"),
            ObstructionError::Precondition(msg) => write!(f, "{msg}"),
            ObstructionError::Segre(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ObstructionError {}

impl From<SegreError> for ObstructionError {
    fn from(e: SegreError) -> Self {
        ObstructionError::Segre(e)
    }
}

/// Weight and rho_w-degree caps for the polynomials P_j and R of a relation
/// search at derivative order k with l targets of order at most k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightBudget {
    pub k: u32,
    pub l: u32,
    pub cap_wt_p: u32,
    pub cap_wt_r: u32,
    pub cap_rhw_p: u32,
    pub cap_rhw_r: u32,
}

impl WeightBudget {
    /// The caps wt P <= (2k-2)(l-1), wt R <= (2k-2)l + 1,
    /// deg_{rho_w} P <= (2k-2)l, deg_{rho_w} R <= (2k-2)l + 1.
    pub fn paper(k: u32, l: u32) -> Self {
        assert!(k >= 1 && l >= 1);
        let base = 2 * k - 2;
        WeightBudget {
            k,
            l,
            cap_wt_p: base * (l - 1),
            cap_wt_r: base * l + 1,
            cap_rhw_p: base * l,
            cap_rhw_r: base * l + 1,
        }
    }

    /// Overrides all four caps with explicit values.
    pub fn custom(k: u32, l: u32, cap_wt: u32, cap_rhw: u32) -> Self {
        WeightBudget {
            k,
            l,
            cap_wt_p: cap_wt,
            cap_wt_r: cap_wt,
            cap_rhw_p: cap_rhw,
            cap_rhw_r: cap_rhw,
        }
    }
}

/// A named generator of the polynomial ring a relation search works over.
/// `rhw` marks the weight-0 derivatives (rho_w and its components), whose
/// exponents are capped separately from the weight budget.
#[derive(Debug, Clone)]
pub struct Generator {
    pub name: String,
    pub weight: u32,
    pub rhw: bool,
    pub series: TruncatedSeries,
}

/// A named target series of a relation search.
#[derive(Debug, Clone)]
pub struct Target {
    pub name: String,
    pub series: TruncatedSeries,
}

/// A monomial over a generator list, by exponents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenMonomial {
    pub exponents: Vec<u32>,
}

impl GenMonomial {
    pub fn display(&self, gens: &[Generator]) -> String {
        let parts: Vec<String> = self
            .exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                if e == 1 {
                    gens[i].name.clone()
                } else {
                    format!("{}^{}", gens[i].name, e)
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }

    pub fn weight(&self, gens: &[Generator]) -> u32 {
        self.exponents
            .iter()
            .zip(gens)
            .map(|(&e, g)| e * g.weight)
            .sum()
    }
}

/// All monomials over the generators with total weight <= cap_wt and total
/// exponent of rhw-flagged generators <= cap_rhw, each paired with its
/// evaluated series (truncated to `at_order`). Deterministic order.
pub fn monomial_basis(
    gens: &[Generator],
    cap_wt: u32,
    cap_rhw: u32,
    at_order: u32,
) -> Vec<(GenMonomial, TruncatedSeries)> {
    for g in gens {
        assert!(
            g.weight > 0 || g.rhw,
            "weight-0 generators must be rhw-capped"
        );
    }
    let blocks = gens
        .first()
        .map(|g| g.series.blocks)
        .expect("monomial basis needs at least one generator");
    let mut exponents: Vec<Vec<u32>> = Vec::new();
    let mut cur = vec![0u32; gens.len()];
    enumerate_exponents(gens, 0, cap_wt, cap_rhw, &mut cur, &mut exponents);
    exponents
        .into_iter()
        .map(|e| {
            let mut eval = TruncatedSeries::one(blocks).truncated(at_order);
            for (i, &exp) in e.iter().enumerate() {
                for _ in 0..exp {
                    eval = eval.mul(&gens[i].series).truncated(at_order);
                }
            }
            (GenMonomial { exponents: e }, eval)
        })
        .collect()
}

fn enumerate_exponents(
    gens: &[Generator],
    idx: usize,
    wt_left: u32,
    rhw_left: u32,
    cur: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if idx == gens.len() {
        out.push(cur.clone());
        return;
    }
    let g = &gens[idx];
    let max_e = if g.rhw { rhw_left } else { wt_left / g.weight };
    for e in 0..=max_e {
        cur[idx] = e;
        let (w, r) = if g.rhw {
            (wt_left, rhw_left - e)
        } else {
            (wt_left - e * g.weight, rhw_left)
        };
        enumerate_exponents(gens, idx + 1, w, r, cur, out);
    }
    cur[idx] = 0;
}

/// Outcome of a relation search.
#[derive(Debug, Clone)]
pub enum RelationCertificate {
    Found {
        k: u32,
        l: u32,
        i0: Option<usize>,
        budget: WeightBudget,
        order: u32,
        exact: bool,
        targets: Vec<String>,
        generators: Vec<String>,
        /// per target: (monomial display, coefficient), nonzero coefficients only
        p: Vec<Vec<(String, GaussianRational)>>,
        r: Vec<(String, GaussianRational)>,
        residual_order: u32,
    },
    NoneUpToCaps {
        k: u32,
        l: u32,
        i0: Option<usize>,
        budget: WeightBudget,
        order: u32,
        exact: bool,
        targets: Vec<String>,
        generators: Vec<String>,
        generators_hash: String,
    },
}

impl RelationCertificate {
    pub fn is_found(&self) -> bool {
        matches!(self, RelationCertificate::Found { .. })
    }

    pub fn is_exact(&self) -> bool {
        match self {
            RelationCertificate::Found { exact, .. } => *exact,
            RelationCertificate::NoneUpToCaps { exact, .. } => *exact,
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            RelationCertificate::Found { order, .. } => *order,
            RelationCertificate::NoneUpToCaps { order, .. } => *order,
        }
    }
}

/// FNV-1a hash of a canonical dump, for stamping certificates with the
/// generator set they refer to.
pub fn fnv1a_hex(data: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in data.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// The largest chi-degree any budgeted monomial (times target, on the P
/// side) can reach; None when every combination is the zero series.
fn max_attainable_degree(
    targets: &[Target],
    p_basis: &[(GenMonomial, TruncatedSeries)],
    r_basis: &[(GenMonomial, TruncatedSeries)],
) -> Option<u32> {
    let mut best: Option<u32> = None;
    for t in targets {
        let td = match t.series.max_degree() {
            Some(d) => d,
            None => continue,
        };
        for (_, eval) in p_basis {
            if let Some(pd) = eval.max_degree() {
                best = Some(best.unwrap_or(0).max(td + pd));
            }
        }
    }
    for (_, eval) in r_basis {
        if let Some(rd) = eval.max_degree() {
            best = Some(best.unwrap_or(0).max(rd));
        }
    }
    best
}

/// Picks the search order for exact data: one past the largest attainable
/// degree, making negative certificates unconditional. None when some input
/// is a genuine truncation.
pub fn exactness_order(
    targets: &[Target],
    gens: &[Generator],
    budget: &WeightBudget,
) -> Option<u32> {
    let all_exact =
        targets.iter().all(|t| t.series.is_exact()) && gens.iter().all(|g| g.series.is_exact());
    if !all_exact {
        return None;
    }
    // zero generators never contribute a degree
    let live: Vec<Generator> = gens
        .iter()
        .filter(|g| !g.series.is_zero())
        .cloned()
        .collect();
    if live.is_empty() {
        let td = targets.iter().filter_map(|t| t.series.max_degree()).max();
        return Some(td.map_or(1, |d| d + 1));
    }
    let p_basis = monomial_basis(&live, budget.cap_wt_p, budget.cap_rhw_p, ORDER_EXACT);
    let r_basis = monomial_basis(&live, budget.cap_wt_r, budget.cap_rhw_r, ORDER_EXACT);
    Some(max_attainable_degree(targets, &p_basis, &r_basis).map_or(1, |d| d + 1))
}

#[derive(Debug, Clone, Copy)]
enum ColumnKind {
    P { target: usize, monomial: usize },
    R { monomial: usize },
}

/// Exact weight-budgeted relation search. Builds the linear system of
/// coefficient-wise vanishing of sum_j P_j * target_j - R through total
/// degree `n_order` in the chi-parameters, computes its nullspace over Q(i),
/// and classifies per the certificate semantics.
pub fn find_relation(
    targets: &[Target],
    gens: &[Generator],
    budget: &WeightBudget,
    n_order: u32,
) -> Result<RelationCertificate, ObstructionError> {
    if targets.is_empty() {
        return Err(ObstructionError::EmptyTargets);
    }
    for s in targets
        .iter()
        .map(|t| &t.series)
        .chain(gens.iter().map(|g| &g.series))
    {
        if s.order() < n_order {
            return Err(ObstructionError::OrderMismatch {
                needed: n_order,
                available: s.order(),
            });
        }
    }
    let blocks = targets[0].series.blocks;
    // Zero generators only ever produce zero monomials, which contribute
    // nothing to either side and never witness a nonvanishing P_j; the same
    // goes for monomials whose evaluation dies under truncation. Dropping
    // them shrinks the system without changing the classification.
    let live: Vec<Generator> = gens
        .iter()
        .filter(|g| !g.series.is_zero())
        .cloned()
        .collect();
    let unit = (
        GenMonomial {
            exponents: vec![0; live.len()],
        },
        TruncatedSeries::one(blocks).truncated(n_order),
    );
    let (p_basis_full, r_basis_full) = if live.is_empty() {
        (vec![unit.clone()], vec![unit])
    } else {
        (
            monomial_basis(&live, budget.cap_wt_p, budget.cap_rhw_p, n_order),
            monomial_basis(&live, budget.cap_wt_r, budget.cap_rhw_r, n_order),
        )
    };
    // The unconditional flag compares against untruncated degrees: the
    // certificate is exact iff all data is exact polynomial and the search
    // order exceeds every attainable degree.
    let exact = exactness_order(targets, gens, budget).is_some_and(|n0| n_order >= n0);
    let p_basis: Vec<&(GenMonomial, TruncatedSeries)> =
        p_basis_full.iter().filter(|(_, e)| !e.is_zero()).collect();
    let r_basis: Vec<&(GenMonomial, TruncatedSeries)> =
        r_basis_full.iter().filter(|(_, e)| !e.is_zero()).collect();
    // Columns: per target the P monomials times the target, then the R
    // monomials negated.
    let mut columns: Vec<TruncatedSeries> = Vec::new();
    let mut col_meta: Vec<ColumnKind> = Vec::new();
    for (j, t) in targets.iter().enumerate() {
        let target_trunc = t.series.truncated(n_order);
        let cols: Vec<TruncatedSeries> = p_basis
            .par_iter()
            .map(|(_, eval)| eval.mul(&target_trunc))
            .collect();
        for (mi, c) in cols.into_iter().enumerate() {
            columns.push(c);
            col_meta.push(ColumnKind::P {
                target: j,
                monomial: mi,
            });
        }
    }
    for (mi, (_, eval)) in r_basis.iter().enumerate() {
        columns.push(eval.neg().truncated(n_order));
        col_meta.push(ColumnKind::R { monomial: mi });
    }
    // Rows: the union of the column supports (rows that are identically
    // zero constrain nothing).
    let mut support: BTreeSet<Vec<u32>> = BTreeSet::new();
    for c in &columns {
        for (e, _) in c.terms() {
            support.insert(e.clone());
        }
    }
    let rows: Vec<Vec<u32>> = support.into_iter().collect();
    let mut matrix = ExactMatrix::zero(rows.len(), columns.len());
    for (ri, row) in rows.iter().enumerate() {
        for (ci, col) in columns.iter().enumerate() {
            let v = col.coeff(row);
            if !v.is_zero() {
                matrix.set(ri, ci, v);
            }
        }
    }
    let nullspace = matrix.nullspace();
    let gen_names: Vec<String> = gens.iter().map(|g| g.name.clone()).collect();
    let target_names: Vec<String> = targets.iter().map(|t| t.name.clone()).collect();
    // A solution is a genuine relation only when some evaluated P_j is a
    // nonzero series; by linearity, scanning a basis decides the whole
    // nullspace.
    for v in &nullspace {
        let mut p_evals: Vec<TruncatedSeries> =
            vec![TruncatedSeries::zero(blocks).truncated(n_order); targets.len()];
        for (ci, kind) in col_meta.iter().enumerate() {
            if v[ci].is_zero() {
                continue;
            }
            if let ColumnKind::P { target, monomial } = kind {
                p_evals[*target] = p_evals[*target].add(&p_basis[*monomial].1.scale(&v[ci]));
            }
        }
        if p_evals.iter().all(TruncatedSeries::is_zero) {
            continue;
        }
        // Canonical scaling: the first nonzero P coefficient becomes 1.
        let lead = col_meta
            .iter()
            .enumerate()
            .find(|(ci, kind)| matches!(kind, ColumnKind::P { .. }) && !v[*ci].is_zero())
            .map(|(ci, _)| v[ci].clone())
            .expect("a nonzero P eval needs a nonzero P coefficient");
        let lead_inv = lead.inv().expect("nonzero");
        let v: Vec<GaussianRational> = v.iter().map(|c| c * &lead_inv).collect();
        // Assemble and verify the certificate.
        let mut p_coeffs: Vec<Vec<(String, GaussianRational)>> = vec![Vec::new(); targets.len()];
        let mut r_coeffs: Vec<(String, GaussianRational)> = Vec::new();
        let mut residual = TruncatedSeries::zero(blocks).truncated(n_order);
        for (ci, kind) in col_meta.iter().enumerate() {
            if v[ci].is_zero() {
                continue;
            }
            residual = residual.add(&columns[ci].scale(&v[ci]));
            match kind {
                ColumnKind::P { target, monomial } => {
                    p_coeffs[*target].push((p_basis[*monomial].0.display(&live), v[ci].clone()));
                }
                ColumnKind::R { monomial } => {
                    // columns carry -eval, so sum P_j t_j = R holds with the
                    // R-polynomial coefficients equal to v directly
                    r_coeffs.push((r_basis[*monomial].0.display(&live), v[ci].clone()));
                }
            }
        }
        assert!(
            residual.truncated(n_order).is_zero(),
            "found relation fails residual verification"
        );
        return Ok(RelationCertificate::Found {
            k: budget.k,
            l: budget.l,
            i0: None,
            budget: budget.clone(),
            order: n_order,
            exact,
            targets: target_names,
            generators: gen_names,
            p: p_coeffs,
            r: r_coeffs,
            residual_order: n_order,
        });
    }
    let mut dump = String::new();
    for g in gens {
        dump.push_str(&format!("{}:{}:{}\n", g.name, g.weight, g.series));
    }
    Ok(RelationCertificate::NoneUpToCaps {
        k: budget.k,
        l: budget.l,
        i0: None,
        budget: budget.clone(),
        order: n_order,
        exact,
        targets: target_names,
        generators: gen_names,
        generators_hash: fnv1a_hex(&dump),
    })
}

/// Canonical name for a derivative generator or target.
pub fn rho_name(comp: usize, beta: &[u32], gamma: &[u32], d: usize) -> String {
    let mut s = String::from("rho");
    if d > 1 {
        s.push_str(&format!("^{}", comp + 1));
    }
    if multiindex_total(beta) > 0 {
        s.push_str(&format!(
            "_z[{}]",
            beta.iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    if multiindex_total(gamma) > 0 {
        s.push_str(&format!(
            "_w[{}]",
            gamma
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    s
}

pub fn q_name(comp: usize, beta: &[u32], d: usize) -> String {
    let mut s = String::from("Q");
    if d > 1 {
        s.push_str(&format!("^{}", comp + 1));
    }
    s.push_str(&format!(
        "_z[{}]",
        beta.iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(",")
    ));
    s
}

/// The generator set of the defining-function relation search at order k,
/// component i0: all rho^i_{z^beta w^gamma} with 1 <= |beta|+|gamma| <= k and
/// (|beta| < k or i != i0). Weight-0 entries (|beta| = 0, |gamma| = 1) are
/// rhw-capped.
fn rho_generators(table: &DerivativeTable, k: u32, i0: usize) -> Vec<Generator> {
    let d = table.blocks.d;
    let mut gens = Vec::new();
    for ((i, beta, gamma), series) in table.entries() {
        let bt = multiindex_total(beta);
        let gt = multiindex_total(gamma);
        let total = bt + gt;
        if total == 0 || total > k {
            continue;
        }
        if !(bt < k || *i != i0) {
            continue;
        }
        let weight = DerivativeTable::weight(beta, gamma);
        gens.push(Generator {
            name: rho_name(*i, beta, gamma, d),
            weight: weight.max(0) as u32,
            rhw: weight == 0,
            series: series.clone(),
        });
    }
    gens
}

/// Verdict of a nonembeddability certification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    NotEmbeddable,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::NotEmbeddable => write!(f, "NotEmbeddable"),
            Verdict::Inconclusive => write!(f, "Inconclusive"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub surface: String,
    pub m: usize,
    pub alphas: Vec<Multiindex>,
    pub runs: Vec<RelationCertificate>,
    pub verdict: Verdict,
    pub unconditional: bool,
}

/// Runs the defining-function relation search for every candidate
/// derivative order among the |alpha_j| and every component i0, one
/// certificate per (k, i0). Caps default to the derivative-order budgets and
/// may be overridden with explicit (weight, rho_w-degree) caps.
pub fn rho_relation_certificates(
    surface: &SurfaceSpec,
    alphas: &[Multiindex],
    n_order: Option<u32>,
    custom_caps: Option<(u32, u32)>,
) -> Result<Vec<RelationCertificate>, ObstructionError> {
    let b = surface.blocks;
    for a in alphas {
        if a.len() != b.n {
            return Err(ObstructionError::Precondition(
                "multiindex length must equal the CR dimension".to_string(),
            ));
        }
        if multiindex_total(a) < 2 {
            return Err(ObstructionError::Precondition(
                "all multiindices must have order at least 2".to_string(),
            ));
        }
    }
    if alphas.is_empty() {
        return Err(ObstructionError::EmptyTargets);
    }
    let mut orders: Vec<u32> = alphas.iter().map(|a| multiindex_total(a)).collect();
    orders.sort_unstable();
    orders.dedup();
    let kmax = *orders.last().unwrap();
    let probe_order = n_order.unwrap_or(surface.order);
    let table = surface.derivative_table(kmax, probe_order)?;
    let mut runs = Vec::new();
    for &k in &orders {
        let l = alphas.iter().filter(|a| multiindex_total(a) <= k).count() as u32;
        let kset: Vec<&Multiindex> = alphas.iter().filter(|a| multiindex_total(a) == k).collect();
        let budget = match custom_caps {
            Some((wt, rhw)) => WeightBudget::custom(k, l, wt, rhw),
            None => WeightBudget::paper(k, l),
        };
        for i0 in 0..b.d {
            let gens = rho_generators(&table, k, i0);
            let targets: Vec<Target> = kset
                .iter()
                .map(|a| Target {
                    name: rho_name(i0, a, &vec![0; b.d], b.d),
                    series: table
                        .entry(i0, a, &vec![0; b.d])
                        .cloned()
                        .expect("table covers all orders up to kmax"),
                })
                .collect();
            let n = match n_order {
                Some(n) => n,
                None => exactness_order(&targets, &gens, &budget).unwrap_or(surface.order),
            };
            let mut cert = find_relation(&targets, &gens, &budget, n)?;
            set_i0(&mut cert, if b.d > 1 { Some(i0) } else { None });
            runs.push(cert);
        }
    }
    Ok(runs)
}

/// Certifies nonembeddability into a hyperquadric in C^{n+m+d}: for every
/// candidate derivative order k among the |alpha_j| (and every component i0
/// when d >= 2), searches for a budgeted relation on the rho-derivative
/// targets of order k, always under the derivative-order budgets. If every
/// search refutes (NoneUpToCaps), embeddability would force one of the
/// relations, so the verdict is NotEmbeddable; any Found leaves the question
/// open (Inconclusive) and the certificates are attached.
pub fn certify_nonembeddability(
    surface: &SurfaceSpec,
    m: usize,
    alphas: &[Multiindex],
    n_order: Option<u32>,
) -> Result<CertifyReport, ObstructionError> {
    let b = surface.blocks;
    if alphas.len() != m + b.d {
        return Err(ObstructionError::Precondition(format!(
            "need m + d = {} multiindices, got {}",
            m + b.d,
            alphas.len()
        )));
    }
    let runs = rho_relation_certificates(surface, alphas, n_order, None)?;
    let verdict = if runs.iter().all(|c| !c.is_found()) {
        Verdict::NotEmbeddable
    } else {
        Verdict::Inconclusive
    };
    let unconditional = runs.iter().all(RelationCertificate::is_exact);
    Ok(CertifyReport {
        surface: surface.name.clone(),
        m,
        alphas: alphas.to_vec(),
        runs,
        verdict,
        unconditional,
    })
}

fn set_i0(cert: &mut RelationCertificate, value: Option<usize>) {
    match cert {
        RelationCertificate::Found { i0, .. } => *i0 = value,
        RelationCertificate::NoneUpToCaps { i0, .. } => *i0 = value,
    }
}

/// Report of the degree-growth certificate at order k.
#[derive(Debug, Clone)]
pub struct DegreeReport {
    pub k: u32,
    pub l: u32,
    /// chi-degree of the order-k derivative rho_{z^k}(0, zeta-bar).
    pub target_degree: u32,
    /// largest chi-degree attainable by any R-budget monomial, from the
    /// actual generator degrees; None if every budget monomial vanishes.
    pub actual_max_r_degree: Option<u32>,
    /// the closed-form bound (k+1)!/(2k-3) * ((2k-2)(k-1)+1).
    pub coarse_bound: GaussianRational,
    /// target_degree exceeds every attainable R degree (the certificate).
    pub certified: bool,
    /// the coarse bound also lies strictly below the target degree.
    pub coarse_bound_below_target: bool,
}

fn factorial_gq(n: u64) -> GaussianRational {
    let mut acc = GaussianRational::one();
    for j in 2..=n {
        acc = &acc * &GaussianRational::from_int(j as i64);
    }
    acc
}

/// Degree-growth certificate for n = d = 1 surfaces with exact polynomial
/// derivative data: compares the chi-degree of rho_{z^k}(0, zeta-bar)
/// against the largest degree the R budget can produce (and against the
/// closed-form coarse bound). Strict inequality is an obstruction at
/// order k.
pub fn degree_certificate(surface: &SurfaceSpec, k: u32) -> Result<DegreeReport, ObstructionError> {
    if surface.blocks.n != 1 || surface.blocks.d != 1 {
        return Err(ObstructionError::FamilyMismatch(
            "degree certificate needs n = 1, d = 1".to_string(),
        ));
    }
    if k < 2 {
        return Err(ObstructionError::Precondition(
            "k must be at least 2".to_string(),
        ));
    }
    let table = surface.derivative_table(k, surface.order)?;
    if !table.is_exact() {
        return Err(ObstructionError::FamilyMismatch(
            "derivative degrees are only available for exact polynomial data".to_string(),
        ));
    }
    let target = table.entry(0, &[k], &[0]).expect("table covers order k");
    let target_degree = match target.max_degree() {
        Some(d) => d,
        None => {
            return Err(ObstructionError::FamilyMismatch(
                "rho_{z^k}(0, zeta-bar) vanishes; no degree to certify".to_string(),
            ))
        }
    };
    let l = k - 1;
    let budget = WeightBudget::paper(k, l);
    // zero generators produce only zero monomials and no degree
    let gens: Vec<Generator> = rho_generators(&table, k, 0)
        .into_iter()
        .filter(|g| !g.series.is_zero())
        .collect();
    let actual_max_r_degree = if gens.is_empty() {
        None
    } else {
        let r_basis = monomial_basis(&gens, budget.cap_wt_r, budget.cap_rhw_r, ORDER_EXACT);
        r_basis
            .iter()
            .filter_map(|(_, eval)| eval.max_degree())
            .max()
    };
    // (k+1)!/(2k-3) * ((2k-2)(k-1)+1)
    let coarse = &factorial_gq((k + 1) as u64)
        .checked_div(&GaussianRational::from_int((2 * k - 3) as i64))
        .unwrap()
        * &GaussianRational::from_int(((2 * k - 2) * (k - 1) + 1) as i64);
    let certified = actual_max_r_degree.map_or(true, |d| d < target_degree);
    let target_gq = GaussianRational::from_int(target_degree as i64);
    let diff = &target_gq - &coarse;
    let coarse_below =
        num_traits::Signed::is_positive(&diff.re) && num_traits::Zero::is_zero(&diff.im);
    Ok(DegreeReport {
        k,
        l,
        target_degree,
        actual_max_r_degree,
        coarse_bound: coarse,
        certified,
        coarse_bound_below_target: coarse_below,
    })
}

/// One certified level of the invariant computation.
#[derive(Debug, Clone)]
pub struct InvariantLevel {
    pub k: u32,
    pub available: usize,
    pub rtilde: usize,
    pub subset: Vec<Multiindex>,
    pub certificate: Option<RelationCertificate>,
}

/// Certified lower bounds for the weighted hypersurface invariants and
/// their sum. The values are one-sided: each level k reports the largest
/// subset of order-k derivatives whose budgeted relation search refuted
/// within caps, with the inductive caps fed by the lower levels; the sum
/// bounds from below the codimension gap of any hyperquadric the surface
/// transversally embeds into. Values are computed in the given chart only
/// (no minimum over linear coordinate changes is attempted).
#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub surface: String,
    pub kmax: u32,
    pub levels: Vec<InvariantLevel>,
    pub sum: usize,
    pub single_chart: bool,
}

fn index_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let needed = k - cur.len();
        for j in start..=(n - needed) {
            cur.push(j);
            rec(n, k, j + 1, cur, out);
            cur.pop();
        }
    }
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Exhaustive bounded search for the invariant lower bounds on a
/// codimension-1 surface: levels k = 2..kmax, subsets in lexicographic
/// multiindex order, largest refuted subset wins.
pub fn invariant_lower_bound(
    surface: &SurfaceSpec,
    kmax: u32,
    n_order: Option<u32>,
) -> Result<InvariantReport, ObstructionError> {
    let b = surface.blocks;
    if b.d != 1 {
        return Err(ObstructionError::Precondition(
            "invariants are defined for codimension 1".to_string(),
        ));
    }
    if kmax < 2 {
        return Err(ObstructionError::Precondition(
            "kmax must be at least 2".to_string(),
        ));
    }
    let probe_order = n_order.unwrap_or(surface.order);
    // Q-derivative series per order, from the implicit solve.
    let mut q_series: Vec<Vec<(Multiindex, TruncatedSeries)>> = Vec::new();
    for k in 1..=kmax {
        let jets = surface.q_jets_from_solver(k, probe_order)?;
        let entries: Vec<(Multiindex, TruncatedSeries)> = multiindices_of_exact_total(b.n, k)
            .into_iter()
            .map(|alpha| {
                let tuple = crate::multilinear::multiindex_to_tuple(&alpha);
                let series = jets[0].coeff(&tuple);
                (alpha, series)
            })
            .collect();
        q_series.push(entries);
    }
    let mut levels = Vec::new();
    let mut prev_sum = 0usize;
    for k in 2..=kmax {
        let derivs = &q_series[(k - 1) as usize];
        let mut gens: Vec<Generator> = Vec::new();
        for lower_k in 1..k {
            for (alpha, series) in &q_series[(lower_k - 1) as usize] {
                gens.push(Generator {
                    name: q_name(0, alpha, 1),
                    weight: 2 * lower_k - 1,
                    rhw: false,
                    series: series.clone(),
                });
            }
        }
        let mut best: Option<(usize, Vec<Multiindex>, RelationCertificate)> = None;
        'size: for size in (1..=derivs.len()).rev() {
            for combo in index_combinations(derivs.len(), size) {
                let base = 2 * k - 2;
                let budget = WeightBudget {
                    k,
                    l: size as u32,
                    cap_wt_p: base * (prev_sum + size - 1) as u32,
                    cap_wt_r: base * (prev_sum + size) as u32 + 1,
                    cap_rhw_p: 0,
                    cap_rhw_r: 0,
                };
                let targets: Vec<Target> = combo
                    .iter()
                    .map(|&i| Target {
                        name: q_name(0, &derivs[i].0, 1),
                        series: derivs[i].1.clone(),
                    })
                    .collect();
                let n = match n_order {
                    Some(n) => n,
                    None => exactness_order(&targets, &gens, &budget).unwrap_or(probe_order),
                };
                let cert = find_relation(&targets, &gens, &budget, n)?;
                if !cert.is_found() {
                    let subset = combo.iter().map(|&i| derivs[i].0.clone()).collect();
                    best = Some((size, subset, cert));
                    break 'size;
                }
            }
        }
        let (rtilde, subset, certificate) = match best {
            Some((s, subset, cert)) => (s, subset, Some(cert)),
            None => (0, Vec::new(), None),
        };
        prev_sum += rtilde;
        levels.push(InvariantLevel {
            k,
            available: derivs.len(),
            rtilde,
            subset,
            certificate,
        });
    }
    Ok(InvariantReport {
        surface: surface.name.clone(),
        kmax,
        levels,
        sum: prev_sum,
        single_chart: true,
    })
}

/// Fourth-order obstruction on a distinguished submanifold: searches for
/// constants lambda_j (not all zero) and an affine R_1 in the restricted
/// first-order derivatives with
/// sum_j lambda_j rho_{z^{alpha_j}} = R_1 on S_{0, V_I}.
/// NoneUpToCaps certifies nonembeddability into C^{n+m+1}.
pub fn low_order_obstruction(
    surface: &SurfaceSpec,
    subset: &IndexSubset,
    alphas: &[Multiindex],
    n_order: Option<u32>,
) -> Result<RelationCertificate, ObstructionError> {
    let b = surface.blocks;
    if b.d != 1 {
        return Err(ObstructionError::Precondition(
            "low-order obstruction is defined for codimension 1".to_string(),
        ));
    }
    if alphas.is_empty() {
        return Err(ObstructionError::EmptyTargets);
    }
    // rho_z(0,0) = 0
    for j in 0..b.n {
        let mut e = vec![0u32; b.nvars()];
        e[b.z(j)] = 1;
        if !surface.rho[0].coeff(&e).is_zero() {
            return Err(ObstructionError::Precondition(
                "rho_z(0,0) must vanish (complex tangent at w = 0)".to_string(),
            ));
        }
    }
    for a in alphas {
        if a.len() != b.n || multiindex_total(a) != 2 {
            return Err(ObstructionError::Precondition(
                "all multiindices must have order exactly 2".to_string(),
            ));
        }
        if a.iter()
            .enumerate()
            .any(|(i, &e)| e > 0 && !subset.contains(i))
        {
            return Err(ObstructionError::SupportViolation(format!(
                "supp {a:?} must lie in the index set"
            )));
        }
    }
    let probe_order = n_order.unwrap_or(surface.order);
    let table = surface.restrict_distinguished(subset, 2, probe_order)?;
    let targets: Vec<Target> = alphas
        .iter()
        .map(|a| Target {
            name: rho_name(0, a, &[0], 1),
            series: table.entry(0, a, &[0]).cloned().expect("order-2 table"),
        })
        .collect();
    let gens: Vec<Generator> = (0..b.n)
        .map(|j| {
            let mut beta = vec![0u32; b.n];
            beta[j] = 1;
            Generator {
                name: rho_name(0, &beta, &[0], 1),
                weight: 1,
                rhw: false,
                series: table.entry(0, &beta, &[0]).cloned().expect("order-1 table"),
            }
        })
        .collect();
    // lambda_j are constants (P cap 0); R_1 is affine (R cap 1).
    let budget = WeightBudget {
        k: 2,
        l: alphas.len() as u32,
        cap_wt_p: 0,
        cap_wt_r: 1,
        cap_rhw_p: 0,
        cap_rhw_r: 0,
    };
    let n = match n_order {
        Some(n) => n,
        None => exactness_order(&targets, &gens, &budget).unwrap_or(probe_order),
    };
    find_relation(&targets, &gens, &budget, n)
}

/// The determinant criterion on a normalized surface: A = det of the matrix
/// of coefficients of z^{alpha_j} zbar^{beta_k}, for two support-disjoint
/// multiindex families with |alpha_j| = 2, |beta_k| >= 2. A != 0 obstructs
/// transversal embeddability into C^{n+m+1}.
pub fn determinant_criterion(
    surface: &SurfaceSpec,
    alphas: &[Multiindex],
    betas: &[Multiindex],
) -> Result<(GaussianRational, ExactMatrix), ObstructionError> {
    let b = surface.blocks;
    if b.d != 1 {
        return Err(ObstructionError::Precondition(
            "determinant criterion is defined for codimension 1".to_string(),
        ));
    }
    if alphas.len() != betas.len() || alphas.is_empty() {
        return Err(ObstructionError::Precondition(
            "need equally many alpha and beta multiindices".to_string(),
        ));
    }
    for a in alphas {
        if a.len() != b.n || multiindex_total(a) != 2 {
            return Err(ObstructionError::Precondition(
                "alpha multiindices must have order exactly 2".to_string(),
            ));
        }
    }
    for be in betas {
        if be.len() != b.n || multiindex_total(be) < 2 {
            return Err(ObstructionError::Precondition(
                "beta multiindices must have order at least 2".to_string(),
            ));
        }
    }
    let asupp: BTreeSet<usize> = alphas
        .iter()
        .flat_map(|a| a.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i))
        .collect();
    let bsupp: BTreeSet<usize> = betas
        .iter()
        .flat_map(|a| a.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i))
        .collect();
    if !asupp.is_disjoint(&bsupp) {
        return Err(ObstructionError::SupportOverlap);
    }
    check_normal_form(surface)?;
    let rho = &surface.rho[0];
    let mm = alphas.len();
    let mut mat = ExactMatrix::zero(mm, mm);
    for (j, a) in alphas.iter().enumerate() {
        for (kk, be) in betas.iter().enumerate() {
            let mut e = vec![0u32; b.nvars()];
            for (i, &x) in a.iter().enumerate() {
                e[b.z(i)] = x;
            }
            for (i, &x) in be.iter().enumerate() {
                e[b.chi(i)] = x;
            }
            mat.set(j, kk, rho.coeff(&e));
        }
    }
    Ok((mat.det(), mat))
}

/// Normal-form check: beyond the linear w/tau part, the surface has a
/// diagonal +-1 Levi part and every other term has holomorphic and
/// antiholomorphic degree both at least 2.
fn check_normal_form(surface: &SurfaceSpec) -> Result<(), ObstructionError> {
    let b = surface.blocks;
    let rho = &surface.rho[0];
    for (e, c) in rho.terms() {
        let hol: u32 =
            (0..b.n).map(|i| e[b.z(i)]).sum::<u32>() + (0..b.d).map(|i| e[b.w(i)]).sum::<u32>();
        let antihol: u32 =
            (0..b.n).map(|i| e[b.chi(i)]).sum::<u32>() + (0..b.d).map(|i| e[b.tau(i)]).sum::<u32>();
        if multiindex_total(e) == 1 {
            continue; // the linear w/tau part
        }
        if hol == 1 && antihol == 1 {
            // Levi part: must be z_s chi_s with coefficient +-1
            let zi = (0..b.n).find(|&i| e[b.z(i)] == 1);
            let xi = (0..b.n).find(|&i| e[b.chi(i)] == 1);
            match (zi, xi) {
                (Some(a), Some(bb)) if a == bb => {
                    let one = GaussianRational::one();
                    if *c != one && *c != -&one {
                        return Err(ObstructionError::FormMismatch(
                            "Levi form entries must be +-1".to_string(),
                        ));
                    }
                }
                _ => {
                    return Err(ObstructionError::FormMismatch(
                        "Levi form must be diagonal in the given coordinates".to_string(),
                    ));
                }
            }
            continue;
        }
        if hol < 2 || antihol < 2 {
            return Err(ObstructionError::FormMismatch(format!(
                "term with exponents {e:?} has holomorphic/antiholomorphic degree below 2"
            )));
        }
    }
    Ok(())
}

/// Bounded-degree algebraic-dependence scan: looks for a nonzero polynomial
/// P of total degree <= degree_cap with P(f_1, ..., f_m) vanishing through
/// the truncation order. `Found` certifies dependence at that degree (up to
/// truncation; unconditional for exact inputs with a large enough order);
/// `NoneUpToCaps` certifies that no dependence of degree <= degree_cap
/// exists among the inputs as given.
pub fn algdep_scan(
    functions: &[(String, TruncatedSeries)],
    degree_cap: u32,
    n_order: Option<u32>,
) -> Result<RelationCertificate, ObstructionError> {
    if functions.is_empty() {
        return Err(ObstructionError::EmptyInput);
    }
    let blocks = functions[0].1.blocks;
    let gens: Vec<Generator> = functions
        .iter()
        .map(|(name, series)| Generator {
            name: name.clone(),
            weight: 1,
            rhw: false,
            series: series.clone(),
        })
        .collect();
    let all_exact = gens.iter().all(|g| g.series.is_exact());
    let attainable: Option<u32> = {
        let basis = monomial_basis(&gens, degree_cap, 0, ORDER_EXACT);
        basis.iter().filter_map(|(_, e)| e.max_degree()).max()
    };
    let n = match n_order {
        Some(n) => n,
        None => attainable.map_or(1, |d| d + 1),
    };
    for (_, s) in functions {
        if s.order() < n {
            return Err(ObstructionError::OrderMismatch {
                needed: n,
                available: s.order(),
            });
        }
    }
    let exact = all_exact && attainable.map_or(true, |d| n > d);
    let basis = monomial_basis(&gens, degree_cap, 0, n);
    // No pruning here: a function evaluating to zero is itself a valid
    // dependence witness, so zero columns must stay.
    let mut support: BTreeSet<Vec<u32>> = BTreeSet::new();
    for (_, eval) in &basis {
        for (e, _) in eval.terms() {
            support.insert(e.clone());
        }
    }
    let rows: Vec<Vec<u32>> = support.into_iter().collect();
    let mut matrix = ExactMatrix::zero(rows.len(), basis.len());
    for (ri, row) in rows.iter().enumerate() {
        for (ci, (_, eval)) in basis.iter().enumerate() {
            let v = eval.coeff(row);
            if !v.is_zero() {
                matrix.set(ri, ci, v);
            }
        }
    }
    let nullspace = matrix.nullspace();
    let budget = WeightBudget {
        k: 0,
        l: functions.len() as u32,
        cap_wt_p: degree_cap,
        cap_wt_r: degree_cap,
        cap_rhw_p: 0,
        cap_rhw_r: 0,
    };
    let names: Vec<String> = functions.iter().map(|(n, _)| n.clone()).collect();
    if let Some(v) = nullspace.first() {
        let mut coeffs = Vec::new();
        let mut residual = TruncatedSeries::zero(blocks).truncated(n);
        for (ci, (mono, eval)) in basis.iter().enumerate() {
            if v[ci].is_zero() {
                continue;
            }
            coeffs.push((mono.display(&gens), v[ci].clone()));
            residual = residual.add(&eval.scale(&v[ci]));
        }
        assert!(residual.is_zero(), "dependence fails residual verification");
        return Ok(RelationCertificate::Found {
            k: 0,
            l: budget.l,
            i0: None,
            budget,
            order: n,
            exact,
            targets: names.clone(),
            generators: names,
            p: vec![coeffs],
            r: Vec::new(),
            residual_order: n,
        });
    }
    let mut dump = String::new();
    for g in &gens {
        dump.push_str(&format!("{}:{}\n", g.name, g.series));
    }
    Ok(RelationCertificate::NoneUpToCaps {
        k: 0,
        l: budget.l,
        i0: None,
        budget,
        order: n,
        exact,
        targets: names.clone(),
        generators: names,
        generators_hash: fnv1a_hex(&dump),
    })
}
