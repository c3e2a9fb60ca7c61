//! Sparse multivariate polynomials and truncated power series over Q(i), in
//! four variable blocks z (n vars), w (d vars), chi (n vars), tau (d vars).
//!
//! A series carries a total-degree truncation order; [`ORDER_EXACT`] marks a
//! series that is an exact polynomial rather than a truncation, and orders
//! propagate through arithmetic as the minimum of the operand orders. This is
//! what lets downstream certificates detect when they are unconditional.

use crate::exactnum::GaussianRational;
use std::collections::BTreeMap;
use std::fmt;

/// Sentinel truncation order for exact polynomials.
pub const ORDER_EXACT: u32 = u32::MAX;

/// Errors raised by series arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesError {
    BlockMismatch,
    OrderExhausted { requested: u32, available: u32 },
    NonNilpotentSubstitution { var: String },
    BadLinearPart(String),
    NotAUnit(String),
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::BlockMismatch => write!(f, "variable blocks do not match"),
            SeriesError::OrderExhausted {
                requested,
                available,
            } => {
                write!(
                    f,
                    "derivative order {requested} exceeds truncation order {available}"
                )
            }
            SeriesError::NonNilpotentSubstitution { var } => {
                write!(
                    f,
                    "substitution for {var} has a nonzero constant term on a truncated series"
                )
            }
            SeriesError::BadLinearPart(msg) => write!(f, "bad linear part: {msg}"),
            SeriesError::NotAUnit(msg) => write!(f, "series is not invertible: {msg}"),
        }
    }
}

impl std::error::Error for SeriesError {}

/// Variable block sizes: n z-variables (CR dimension) mirrored by chi, and
/// d w-variables (codimension) mirrored by tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarBlocks {
    pub n: usize,
    pub d: usize,
}

impl VarBlocks {
    pub fn new(n: usize, d: usize) -> Self {
        assert!(n >= 1 && d >= 1, "need n >= 1 and d >= 1");
        VarBlocks { n, d }
    }

    pub fn nvars(&self) -> usize {
        2 * (self.n + self.d)
    }

    pub fn z(&self, i: usize) -> usize {
        assert!(i < self.n);
        i
    }

    pub fn w(&self, i: usize) -> usize {
        assert!(i < self.d);
        self.n + i
    }

    pub fn chi(&self, i: usize) -> usize {
        assert!(i < self.n);
        self.n + self.d + i
    }

    pub fn tau(&self, i: usize) -> usize {
        assert!(i < self.d);
        2 * self.n + self.d + i
    }

    pub fn var_name(&self, flat: usize) -> String {
        let (n, d) = (self.n, self.d);
        if flat < n {
            format!("z{}", flat + 1)
        } else if flat < n + d {
            format!("w{}", flat - n + 1)
        } else if flat < 2 * n + d {
            format!("chi{}", flat - n - d + 1)
        } else {
            format!("tau{}", flat - 2 * n - d + 1)
        }
    }
}

/// Exponent tuple over one block (the spec's multiindex).
pub type Multiindex = Vec<u32>;

pub fn multiindex_total(m: &[u32]) -> u32 {
    m.iter().sum()
}

/// Support of a multiindex: the 0-based positions with nonzero exponent.
pub fn multiindex_support(m: &[u32]) -> Vec<usize> {
    m.iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, _)| i)
        .collect()
}

fn min_order(a: u32, b: u32) -> u32 {
    a.min(b)
}

/// Sparse series with a declared total-degree truncation order. Keys are
/// full-length exponent vectors kept in a BTreeMap, so iteration order is
/// lexicographic and all derived output is canonical.
///
/// Equality compares blocks and stored terms; the declared order is
/// bookkeeping about how much is known, not part of the value.
#[derive(Clone, Debug)]
pub struct TruncatedSeries {
    pub blocks: VarBlocks,
    order: u32,
    terms: BTreeMap<Vec<u32>, GaussianRational>,
}

impl PartialEq for TruncatedSeries {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks && self.terms == other.terms
    }
}

impl Eq for TruncatedSeries {}

impl TruncatedSeries {
    pub fn zero(blocks: VarBlocks) -> Self {
        TruncatedSeries {
            blocks,
            order: ORDER_EXACT,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(blocks: VarBlocks, c: GaussianRational) -> Self {
        let mut s = TruncatedSeries::zero(blocks);
        if !c.is_zero() {
            s.terms.insert(vec![0; blocks.nvars()], c);
        }
        s
    }

    pub fn one(blocks: VarBlocks) -> Self {
        TruncatedSeries::constant(blocks, GaussianRational::one())
    }

    /// The variable with the given flat index, as an exact series.
    pub fn var(blocks: VarBlocks, flat: usize) -> Self {
        let mut e = vec![0u32; blocks.nvars()];
        e[flat] = 1;
        TruncatedSeries::monomial(blocks, e, GaussianRational::one())
    }

    pub fn monomial(blocks: VarBlocks, exponents: Vec<u32>, coeff: GaussianRational) -> Self {
        assert_eq!(exponents.len(), blocks.nvars());
        let mut s = TruncatedSeries::zero(blocks);
        if !coeff.is_zero() {
            s.terms.insert(exponents, coeff);
        }
        s
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_exact(&self) -> bool {
        self.order == ORDER_EXACT
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, exponents: &[u32]) -> GaussianRational {
        self.terms
            .get(exponents)
            .cloned()
            .unwrap_or_else(GaussianRational::zero)
    }

    pub fn constant_term(&self) -> GaussianRational {
        self.coeff(&vec![0; self.blocks.nvars()])
    }

    /// Maximum total degree among stored terms; None for the zero series.
    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| multiindex_total(e)).max()
    }

    pub fn degree_in_var(&self, flat: usize) -> u32 {
        self.terms.keys().map(|e| e[flat]).max().unwrap_or(0)
    }

    pub fn depends_on(&self, flat: usize) -> bool {
        self.terms.keys().any(|e| e[flat] > 0)
    }

    /// Drops terms above `order` and lowers the declared truncation.
    pub fn truncated(&self, order: u32) -> Self {
        let mut s = self.clone();
        s.truncate_in_place(order);
        s
    }

    fn truncate_in_place(&mut self, order: u32) {
        self.order = min_order(self.order, order);
        if self.order != ORDER_EXACT {
            let ord = self.order;
            self.terms.retain(|e, _| multiindex_total(e) <= ord);
        }
    }

    fn insert_term(&mut self, e: Vec<u32>, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        if self.order != ORDER_EXACT && multiindex_total(&e) > self.order {
            return;
        }
        self.terms.insert(e, c);
    }

    fn add_term(&mut self, e: &[u32], c: &GaussianRational) {
        if c.is_zero() {
            return;
        }
        if self.order != ORDER_EXACT && multiindex_total(e) > self.order {
            return;
        }
        match self.terms.get_mut(e) {
            Some(existing) => {
                *existing = &*existing + c;
                if existing.is_zero() {
                    self.terms.remove(e);
                }
            }
            None => {
                self.terms.insert(e.to_vec(), c.clone());
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.blocks, rhs.blocks, "block mismatch");
        let mut out = TruncatedSeries {
            blocks: self.blocks,
            order: min_order(self.order, rhs.order),
            terms: BTreeMap::new(),
        };
        for (e, c) in self.terms.iter().chain(rhs.terms.iter()) {
            out.add_term(e, c);
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -&*c;
        }
        out
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            let mut z = TruncatedSeries::zero(self.blocks);
            z.order = self.order;
            return z;
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = &*v * c;
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.blocks, rhs.blocks, "block mismatch");
        let order = min_order(self.order, rhs.order);
        let mut out = TruncatedSeries {
            blocks: self.blocks,
            order,
            terms: BTreeMap::new(),
        };
        let a: Vec<(&Vec<u32>, u32, &GaussianRational)> = self
            .terms
            .iter()
            .map(|(e, c)| (e, multiindex_total(e), c))
            .collect();
        let b: Vec<(&Vec<u32>, u32, &GaussianRational)> = rhs
            .terms
            .iter()
            .map(|(e, c)| (e, multiindex_total(e), c))
            .collect();
        for (ea, da, ca) in &a {
            for (eb, db, cb) in &b {
                if order != ORDER_EXACT && da + db > order {
                    continue;
                }
                let e: Vec<u32> = ea.iter().zip(eb.iter()).map(|(x, y)| x + y).collect();
                let c = *ca * *cb;
                out.add_term(&e, &c);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = TruncatedSeries::one(self.blocks);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Repeated exact derivative in one flat variable (falling-factorial
    /// coefficients from repeated differentiation).
    pub fn derive_var(&self, flat: usize, times: u32) -> Self {
        if times == 0 {
            return self.clone();
        }
        let order = if self.order == ORDER_EXACT {
            ORDER_EXACT
        } else {
            self.order.saturating_sub(times)
        };
        let mut out = TruncatedSeries {
            blocks: self.blocks,
            order,
            terms: BTreeMap::new(),
        };
        for (e, c) in &self.terms {
            if e[flat] < times {
                continue;
            }
            let mut factor = GaussianRational::one();
            for t in 0..times {
                factor = &factor * &GaussianRational::from_int((e[flat] - t) as i64);
            }
            let mut ne = e.clone();
            ne[flat] -= times;
            out.add_term(&ne, &(&factor * c));
        }
        out
    }

    /// Exact partial derivative with respect to a z-multiindex and a
    /// w-multiindex, truncated to order(p) - |beta| - |gamma|.
    pub fn partial_derivative(&self, beta: &[u32], gamma: &[u32]) -> Result<Self, SeriesError> {
        assert_eq!(beta.len(), self.blocks.n, "beta must index the z block");
        assert_eq!(gamma.len(), self.blocks.d, "gamma must index the w block");
        let total = multiindex_total(beta) + multiindex_total(gamma);
        if self.order != ORDER_EXACT && total > self.order {
            return Err(SeriesError::OrderExhausted {
                requested: total,
                available: self.order,
            });
        }
        let mut out = self.clone();
        for (i, &b) in beta.iter().enumerate() {
            out = out.derive_var(self.blocks.z(i), b);
        }
        for (i, &g) in gamma.iter().enumerate() {
            out = out.derive_var(self.blocks.w(i), g);
        }
        Ok(out)
    }

    /// Sets the listed flat variables to zero (an exact substitution).
    pub fn set_vars_zero(&self, vars: &[usize]) -> Self {
        let mut out = self.clone();
        out.terms.retain(|e, _| vars.iter().all(|&v| e[v] == 0));
        out
    }

    /// Substitutes series for the listed flat variables. Each assigned series
    /// must share this series' blocks and have a zero constant term, unless
    /// this series is an exact polynomial.
    pub fn substitute(
        &self,
        assignments: &BTreeMap<usize, TruncatedSeries>,
    ) -> Result<Self, SeriesError> {
        for (v, s) in assignments {
            if s.blocks != self.blocks {
                return Err(SeriesError::BlockMismatch);
            }
            if !s.constant_term().is_zero() && self.order != ORDER_EXACT {
                return Err(SeriesError::NonNilpotentSubstitution {
                    var: self.blocks.var_name(*v),
                });
            }
        }
        let mut order = self.order;
        for (v, s) in assignments {
            if self.depends_on(*v) {
                order = min_order(order, s.order);
            }
        }
        let mut out = TruncatedSeries {
            blocks: self.blocks,
            order,
            terms: BTreeMap::new(),
        };
        // Power cache per assigned variable.
        let mut powers: BTreeMap<usize, Vec<TruncatedSeries>> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut base = e.clone();
            let mut assigned: Vec<(usize, u32)> = Vec::new();
            for (&v, _) in assignments {
                if e[v] > 0 {
                    assigned.push((v, e[v]));
                    base[v] = 0;
                }
            }
            let mut acc = TruncatedSeries::monomial(self.blocks, base, c.clone()).truncated(order);
            for (v, exp) in assigned {
                let cache = powers
                    .entry(v)
                    .or_insert_with(|| vec![TruncatedSeries::one(self.blocks).truncated(order)]);
                while cache.len() <= exp as usize {
                    let next = cache.last().unwrap().mul(&assignments[&v]).truncated(order);
                    cache.push(next);
                }
                acc = acc.mul(&cache[exp as usize]);
            }
            out = out.add(&acc);
        }
        out.truncate_in_place(order);
        Ok(out)
    }

    /// Evaluates this series with every variable replaced by a series over a
    /// possibly different block structure. All assignments must share blocks
    /// among themselves and have zero constant terms (or self be exact).
    pub fn eval(&self, assignments: &[TruncatedSeries]) -> Result<TruncatedSeries, SeriesError> {
        assert_eq!(assignments.len(), self.blocks.nvars());
        let target = assignments.first().map(|s| s.blocks).unwrap_or(self.blocks);
        for s in assignments {
            if s.blocks != target {
                return Err(SeriesError::BlockMismatch);
            }
        }
        let mut order = self.order;
        for (v, s) in assignments.iter().enumerate() {
            if self.depends_on(v) {
                if !s.constant_term().is_zero() && self.order != ORDER_EXACT {
                    return Err(SeriesError::NonNilpotentSubstitution {
                        var: self.blocks.var_name(v),
                    });
                }
                order = min_order(order, s.order);
            }
        }
        let mut out = TruncatedSeries::zero(target).truncated(order);
        let mut powers: BTreeMap<usize, Vec<TruncatedSeries>> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut acc = TruncatedSeries::constant(target, c.clone()).truncated(order);
            for (v, &exp) in e.iter().enumerate() {
                if exp == 0 {
                    continue;
                }
                let cache = powers
                    .entry(v)
                    .or_insert_with(|| vec![TruncatedSeries::one(target).truncated(order)]);
                while cache.len() <= exp as usize {
                    let next = cache.last().unwrap().mul(&assignments[v]).truncated(order);
                    cache.push(next);
                }
                acc = acc.mul(&cache[exp as usize]);
            }
            out = out.add(&acc);
        }
        Ok(out)
    }

    /// Conjugates every coefficient, keeping variables in place.
    pub fn conj_coefficients(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    /// Swaps the exponent blocks z <-> chi and w <-> tau.
    pub fn swap_blocks(&self) -> Self {
        let (n, d) = (self.blocks.n, self.blocks.d);
        let mut out = TruncatedSeries {
            blocks: self.blocks,
            order: self.order,
            terms: BTreeMap::new(),
        };
        for (e, c) in &self.terms {
            let mut ne = vec![0u32; self.blocks.nvars()];
            for i in 0..n {
                ne[self.blocks.z(i)] = e[self.blocks.chi(i)];
                ne[self.blocks.chi(i)] = e[self.blocks.z(i)];
            }
            for i in 0..d {
                ne[self.blocks.w(i)] = e[self.blocks.tau(i)];
                ne[self.blocks.tau(i)] = e[self.blocks.w(i)];
            }
            out.insert_term(ne, c.clone());
        }
        out
    }

    /// The series of the conjugated function: coefficients conjugated and
    /// blocks swapped, so that conj(p(A, B)) = p.bar()(conj A, conj B) with
    /// the conjugated arguments landing in the (z, w) slots.
    pub fn bar(&self) -> Self {
        self.conj_coefficients().swap_blocks()
    }

    /// Multiplicative inverse computed to `order`; the constant term must be
    /// nonzero. Inverting a constant stays exact.
    pub fn inverse(&self, order: u32) -> Result<Self, SeriesError> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return Err(SeriesError::NotAUnit("zero constant term".to_string()));
        }
        let c0_inv = c0.inv().expect("nonzero constant");
        if self.num_terms() == 1 {
            return Ok(TruncatedSeries::constant(self.blocks, c0_inv).truncated(self.order));
        }
        let work_order = min_order(order, self.order);
        // u = 1 - p/c0 has zero constant term; 1/p = (1/c0) * sum u^t.
        let u = TruncatedSeries::one(self.blocks)
            .truncated(work_order)
            .sub(&self.scale(&c0_inv).truncated(work_order));
        let mut acc = TruncatedSeries::one(self.blocks).truncated(work_order);
        let mut upow = TruncatedSeries::one(self.blocks).truncated(work_order);
        for _ in 1..=work_order {
            upow = upow.mul(&u);
            if upow.is_zero() {
                break;
            }
            acc = acc.add(&upow);
        }
        Ok(acc.scale(&c0_inv))
    }
}

/// Product with the block-mismatch check surfaced as an error. Result is
/// truncated to the minimum of the operand orders, coefficients exact.
pub fn series_mul(
    p: &TruncatedSeries,
    q: &TruncatedSeries,
) -> Result<TruncatedSeries, SeriesError> {
    if p.blocks != q.blocks {
        return Err(SeriesError::BlockMismatch);
    }
    Ok(p.mul(q))
}

/// Inverts a formal map given by n series whose z-linear part is the identity
/// and which have no z-free terms (coefficients may involve chi/tau
/// parameters). Returns G with F(G) = G(F) = id through `order`.
pub fn invert_map(f: &[TruncatedSeries], order: u32) -> Result<Vec<TruncatedSeries>, SeriesError> {
    assert!(!f.is_empty());
    let blocks = f[0].blocks;
    let n = blocks.n;
    if f.len() != n {
        return Err(SeriesError::BadLinearPart(format!(
            "expected {n} components, got {}",
            f.len()
        )));
    }
    for fi in f {
        if fi.blocks != blocks {
            return Err(SeriesError::BlockMismatch);
        }
    }
    let z_degree = |e: &[u32]| -> u32 { (0..n).map(|i| e[blocks.z(i)]).sum() };
    for (i, fi) in f.iter().enumerate() {
        for (e, c) in fi.terms() {
            let zd = z_degree(e);
            if zd == 0 {
                return Err(SeriesError::BadLinearPart(format!(
                    "component {} has a term without z-variables",
                    i + 1
                )));
            }
            if zd == 1 && multiindex_total(e) == 1 {
                let j = (0..n).find(|&j| e[blocks.z(j)] == 1).unwrap();
                let expected = if i == j {
                    GaussianRational::one()
                } else {
                    GaussianRational::zero()
                };
                if *c != expected {
                    return Err(SeriesError::BadLinearPart(
                        "z-linear part is not the identity".to_string(),
                    ));
                }
            }
        }
        // Diagonal entries must be present.
        let mut e = vec![0u32; blocks.nvars()];
        e[blocks.z(i)] = 1;
        if !fi.coeff(&e).is_one() {
            return Err(SeriesError::BadLinearPart(
                "z-linear part is not the identity".to_string(),
            ));
        }
    }
    let work_order = f.iter().fold(order, |acc, fi| min_order(acc, fi.order()));
    // h = f - id; iterate g <- id - h(g), gaining one total degree per pass.
    let id: Vec<TruncatedSeries> = (0..n)
        .map(|i| TruncatedSeries::var(blocks, blocks.z(i)).truncated(work_order))
        .collect();
    let h: Vec<TruncatedSeries> = f
        .iter()
        .zip(id.iter())
        .map(|(fi, zi)| fi.truncated(work_order).sub(zi))
        .collect();
    let mut g = id.clone();
    for _ in 0..=work_order {
        let mut assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
        for i in 0..n {
            assign.insert(blocks.z(i), g[i].clone());
        }
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            next.push(id[i].sub(&h[i].substitute(&assign)?));
        }
        if next == g {
            break;
        }
        g = next;
    }
    Ok(g)
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (v, &exp) in e.iter().enumerate() {
                if exp == 0 {
                    continue;
                }
                write!(f, "*{}", self.blocks.var_name(v))?;
                if exp > 1 {
                    write!(f, "^{exp}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gq(s: &str) -> GaussianRational {
        s.parse().unwrap()
    }

    fn b11() -> VarBlocks {
        VarBlocks::new(1, 1)
    }

    #[test]
    fn mul_examples() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let one = TruncatedSeries::one(b);
        let p = one.add(&z).truncated(5);
        let q = one.sub(&z).truncated(5);
        let prod = p.mul(&q);
        let expected = one.sub(&z.mul(&z)).truncated(5);
        assert_eq!(prod, expected);
        assert!(p.mul(&TruncatedSeries::zero(b)).is_zero());
    }

    #[test]
    fn mul_truncation_cross_terms() {
        // (sum_{k<=3} z^k)(sum_{k<=3} chi^k) at order 4: all z^a chi^b with
        // a,b <= 3 and a+b <= 4, coefficient 1.
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let x = TruncatedSeries::var(b, b.chi(0));
        let mut p = TruncatedSeries::zero(b);
        let mut q = TruncatedSeries::zero(b);
        for k in 0..=3u32 {
            p = p.add(&z.pow(k));
            q = q.add(&x.pow(k));
        }
        let prod = p.truncated(4).mul(&q.truncated(4));
        for a in 0..=3u32 {
            for c in 0..=3u32 {
                let mut e = vec![0u32; b.nvars()];
                e[b.z(0)] = a;
                e[b.chi(0)] = c;
                let expected = if a + c <= 4 { gq("1") } else { gq("0") };
                assert_eq!(prod.coeff(&e), expected, "term z^{a} chi^{c}");
            }
        }
        assert_eq!(prod.order(), 4);
    }

    #[test]
    fn partial_derivative_examples() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let x = TruncatedSeries::var(b, b.chi(0));
        // p = z^2 chi, d^2/dz^2 -> 2 chi
        let p = z.pow(2).mul(&x);
        let d = p.partial_derivative(&[2], &[0]).unwrap();
        assert_eq!(d, x.scale(&gq("2")));
        // p = (1/2) z^2 chi^24, d^2/dz^2 -> chi^24
        let p = z.pow(2).mul(&x.pow(24)).scale(&gq("1/2"));
        let d = p.partial_derivative(&[2], &[0]).unwrap();
        assert_eq!(d, x.pow(24));
        // identity derivative
        assert_eq!(p.partial_derivative(&[0], &[0]).unwrap(), p);
        // order exhaustion
        let t = z.truncated(1);
        assert!(matches!(
            t.partial_derivative(&[2], &[0]),
            Err(SeriesError::OrderExhausted { .. })
        ));
    }

    #[test]
    fn substitute_examples() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let w = TruncatedSeries::var(b, b.w(0));
        let x = TruncatedSeries::var(b, b.chi(0));
        let t = TruncatedSeries::var(b, b.tau(0));
        // p = w + z chi, w <- 0 -> z chi
        let p = w.add(&z.mul(&x));
        let mut assign = BTreeMap::new();
        assign.insert(b.w(0), TruncatedSeries::zero(b));
        assert_eq!(p.substitute(&assign).unwrap(), z.mul(&x));
        // p = tau - 2i z chi, tau <- 0 -> -2i z chi
        let p = t.sub(&z.mul(&x).scale(&gq("2i")));
        let mut assign = BTreeMap::new();
        assign.insert(b.tau(0), TruncatedSeries::zero(b));
        assert_eq!(p.substitute(&assign).unwrap(), z.mul(&x).scale(&gq("-2i")));
        // identity assignment
        let mut assign = BTreeMap::new();
        assign.insert(b.z(0), z.clone());
        assert_eq!(p.substitute(&assign).unwrap(), p);
        // non-nilpotent substitution on a truncated series errors
        let truncated = p.truncated(3);
        let mut assign = BTreeMap::new();
        assign.insert(b.z(0), TruncatedSeries::one(b));
        assert!(matches!(
            truncated.substitute(&assign),
            Err(SeriesError::NonNilpotentSubstitution { .. })
        ));
        // ... but is allowed on an exact polynomial
        assert!(p.substitute(&assign).is_ok());
    }

    #[test]
    fn substitute_is_ring_homomorphism() {
        let b = VarBlocks::new(2, 1);
        let z1 = TruncatedSeries::var(b, b.z(0));
        let z2 = TruncatedSeries::var(b, b.z(1));
        let x1 = TruncatedSeries::var(b, b.chi(0));
        let p = z1.add(&z2.pow(2).scale(&gq("3i"))).add(&x1.mul(&z1));
        let q = z2.sub(&z1.mul(&x1).scale(&gq("1/2")));
        let mut assign = BTreeMap::new();
        assign.insert(b.z(0), z2.mul(&x1));
        assign.insert(b.z(1), z1.pow(2).scale(&gq("-i")));
        let order = 6;
        let lhs = p.mul(&q).truncated(order).substitute(&assign).unwrap();
        let rhs = p
            .truncated(order)
            .substitute(&assign)
            .unwrap()
            .mul(&q.truncated(order).substitute(&assign).unwrap());
        assert_eq!(lhs.truncated(order), rhs.truncated(order));
    }

    #[test]
    fn mixed_partials_commute() {
        let b = VarBlocks::new(2, 1);
        let z1 = TruncatedSeries::var(b, b.z(0));
        let z2 = TruncatedSeries::var(b, b.z(1));
        let w = TruncatedSeries::var(b, b.w(0));
        let p = z1
            .pow(3)
            .mul(&z2)
            .add(&z1.mul(&z2.pow(2)).mul(&w))
            .scale(&gq("2-i"));
        let d12 = p.derive_var(b.z(0), 1).derive_var(b.z(1), 1);
        let d21 = p.derive_var(b.z(1), 1).derive_var(b.z(0), 1);
        assert_eq!(d12, d21);
    }

    #[test]
    fn invert_map_univariate() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        // F = z inverts to z
        let g = invert_map(&[z.clone()], 6).unwrap();
        assert_eq!(g[0].truncated(6), z.truncated(6));
        // F = z + z^2 at order 4 -> z - z^2 + 2z^3 - 5z^4
        let f = z.add(&z.pow(2));
        let g = invert_map(&[f.clone()], 4).unwrap();
        let expected = z
            .sub(&z.pow(2))
            .add(&z.pow(3).scale(&gq("2")))
            .sub(&z.pow(4).scale(&gq("5")))
            .truncated(4);
        assert_eq!(g[0], expected);
        // composition check F(G) = id
        let mut assign = BTreeMap::new();
        assign.insert(b.z(0), g[0].clone());
        let comp = f.truncated(4).substitute(&assign).unwrap();
        assert_eq!(comp, z.truncated(4));
    }

    #[test]
    fn invert_map_two_variables() {
        let b = VarBlocks::new(2, 1);
        let z1 = TruncatedSeries::var(b, b.z(0));
        let z2 = TruncatedSeries::var(b, b.z(1));
        let f = vec![z1.add(&z2.pow(2)), z2.clone()];
        let g = invert_map(&f, 5).unwrap();
        assert_eq!(g[0], z1.sub(&z2.pow(2)).truncated(5));
        assert_eq!(g[1], z2.truncated(5));
    }

    #[test]
    fn invert_map_random_composition() {
        // Random maps with identity linear part, checked by composing.
        for seed in 0..6u64 {
            let n = 1 + (seed % 3) as usize;
            let b = VarBlocks::new(n, 1);
            let order = 5;
            let mut f = Vec::new();
            for i in 0..n {
                let mut fi = TruncatedSeries::var(b, b.z(i));
                // a couple of deterministic higher-order terms
                for j in 0..n {
                    let k = (seed as i64 + i as i64 * 3 + j as i64) % 5 - 2;
                    if k != 0 {
                        let term = TruncatedSeries::var(b, b.z(j))
                            .pow(2)
                            .scale(&GaussianRational::from_int(k));
                        fi = fi.add(&term);
                    }
                    let k2 = (seed as i64 * 7 + i as i64 + j as i64 * 5) % 3 - 1;
                    if k2 != 0 && n > 1 {
                        let term = TruncatedSeries::var(b, b.z(j))
                            .mul(&TruncatedSeries::var(b, b.z((j + 1) % n)))
                            .mul(&TruncatedSeries::var(b, b.z(i)))
                            .scale(&GaussianRational::from_int(k2));
                        fi = fi.add(&term);
                    }
                }
                f.push(fi);
            }
            let g = invert_map(&f, order).unwrap();
            let mut assign = BTreeMap::new();
            for i in 0..n {
                assign.insert(b.z(i), g[i].clone());
            }
            for (i, fi) in f.iter().enumerate() {
                let comp = fi.truncated(order).substitute(&assign).unwrap();
                assert_eq!(comp, TruncatedSeries::var(b, b.z(i)).truncated(order));
            }
        }
    }

    #[test]
    fn invert_map_rejects_bad_linear_part() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let f = z.scale(&gq("2"));
        assert!(matches!(
            invert_map(&[f], 4),
            Err(SeriesError::BadLinearPart(_))
        ));
        let g = z.add(&TruncatedSeries::one(b));
        assert!(matches!(
            invert_map(&[g], 4),
            Err(SeriesError::BadLinearPart(_))
        ));
    }

    #[test]
    fn series_inverse() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let p = TruncatedSeries::constant(b, gq("2")).add(&z);
        let inv = p.inverse(4).unwrap();
        let prod = p.mul(&inv).truncated(4);
        assert_eq!(prod, TruncatedSeries::one(b).truncated(4));
        assert!(TruncatedSeries::var(b, b.z(0)).inverse(3).is_err());
        // constant inverse stays exact
        let c = TruncatedSeries::constant(b, gq("-1/2i"));
        let ci = c.inverse(10).unwrap();
        assert!(ci.is_exact());
        assert_eq!(ci, TruncatedSeries::constant(b, gq("2i")));
    }

    #[test]
    fn bar_and_blocks() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let x = TruncatedSeries::var(b, b.chi(0));
        let p = z.pow(2).scale(&gq("1+i")).add(&x.scale(&gq("-3")));
        let q = p.bar();
        // bar: z^2 (1+i) -> chi^2 (1-i); chi (-3) -> z (-3)
        let expected = x.pow(2).scale(&gq("1-i")).add(&z.scale(&gq("-3")));
        assert_eq!(q, expected);
        assert_eq!(q.bar(), p);
    }

    #[test]
    fn series_mul_block_mismatch() {
        let p = TruncatedSeries::one(VarBlocks::new(1, 1));
        let q = TruncatedSeries::one(VarBlocks::new(2, 1));
        assert!(matches!(
            series_mul(&p, &q),
            Err(SeriesError::BlockMismatch)
        ));
        assert_eq!(series_mul(&p, &p).unwrap(), p);
    }

    #[test]
    fn ring_axioms_random() {
        let b = VarBlocks::new(2, 1);
        let mk = |seed: u64| -> TruncatedSeries {
            let mut s = TruncatedSeries::zero(b);
            for t in 0..4u64 {
                let h = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(t);
                let mut e = vec![0u32; b.nvars()];
                e[(h % 6) as usize] = 1 + ((h >> 8) % 2) as u32;
                e[((h >> 16) % 6) as usize] += ((h >> 24) % 2) as u32;
                let c = GaussianRational::of(
                    ((h >> 3) % 9) as i64 - 4,
                    1,
                    ((h >> 7) % 5) as i64 - 2,
                    3,
                );
                s = s.add(&TruncatedSeries::monomial(b, e, c));
            }
            s.truncated(5)
        };
        for seed in 0..8u64 {
            let p = mk(seed);
            let q = mk(seed + 31);
            let r = mk(seed + 77);
            assert_eq!(p.mul(&q), q.mul(&p));
            assert_eq!(p.mul(&q).mul(&r), p.mul(&q.mul(&r)));
            assert_eq!(p.mul(&q.add(&r)), p.mul(&q).add(&p.mul(&r)));
            assert_eq!(p.add(&q), q.add(&p));
            assert!(p.sub(&p).is_zero());
        }
    }

    #[test]
    fn order_propagation() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        assert!(z.is_exact());
        let t = z.truncated(3);
        assert_eq!(t.order(), 3);
        assert_eq!(z.mul(&t).order(), 3);
        assert_eq!(z.add(&t).order(), 3);
        assert!(z.mul(&z).is_exact());
    }
}
