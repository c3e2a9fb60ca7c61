//! Symmetric d-linear forms on C^n with coefficients in the truncated series
//! ring, the partition product (summing over disjoint partitions of the
//! argument slots, which differs from the polynomial product by binomial
//! factors), and the substitution of symmetric multilinear maps into a form.

use crate::exactnum::GaussianRational;
use crate::series::{TruncatedSeries, VarBlocks};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultilinearError {
    DimMismatch,
    TooManyMaps { degree: usize, maps: usize },
}

impl fmt::Display for MultilinearError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultilinearError::DimMismatch => write!(f, "form dimensions do not match"),
            MultilinearError::TooManyMaps { degree, maps } => {
                write!(
                    f,
                    "cannot substitute {maps} maps into a form of degree {degree}"
                )
            }
        }
    }
}

impl std::error::Error for MultilinearError {}

/// All nondecreasing index tuples of the given length with entries in 0..dim.
pub fn sorted_tuples(dim: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, len: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for j in start..dim {
            cur.push(j);
            rec(dim, len, j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, len, 0, &mut Vec::new(), &mut out);
    out
}

/// Converts a sorted index tuple to the exponent multiindex over 0..dim.
pub fn tuple_to_multiindex(tuple: &[usize], dim: usize) -> Vec<u32> {
    let mut m = vec![0u32; dim];
    for &j in tuple {
        m[j] += 1;
    }
    m
}

/// Converts a multiindex to its sorted index tuple.
pub fn multiindex_to_tuple(m: &[u32]) -> Vec<usize> {
    let mut t = Vec::new();
    for (j, &e) in m.iter().enumerate() {
        for _ in 0..e {
            t.push(j);
        }
    }
    t
}

/// A symmetric d-linear form V^d -> (series ring), V = C^dim, stored by its
/// values on nondecreasing basis tuples. Degree-0 forms are scalars (an
/// empty-tuple entry). Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SymForm {
    pub degree: usize,
    pub dim: usize,
    pub blocks: VarBlocks,
    coeffs: BTreeMap<Vec<usize>, TruncatedSeries>,
}

impl SymForm {
    pub fn zero(degree: usize, dim: usize, blocks: VarBlocks) -> Self {
        SymForm {
            degree,
            dim,
            blocks,
            coeffs: BTreeMap::new(),
        }
    }

    /// A degree-0 form, identified with its scalar value.
    pub fn scalar(dim: usize, value: TruncatedSeries) -> Self {
        let blocks = value.blocks;
        let mut f = SymForm::zero(0, dim, blocks);
        f.set_coeff(vec![], value);
        f
    }

    pub fn one(dim: usize, blocks: VarBlocks) -> Self {
        SymForm::scalar(dim, TruncatedSeries::one(blocks))
    }

    pub fn set_coeff(&mut self, tuple: Vec<usize>, value: TruncatedSeries) {
        assert_eq!(tuple.len(), self.degree);
        debug_assert!(
            tuple.windows(2).all(|w| w[0] <= w[1]),
            "tuple must be sorted"
        );
        if value.is_zero() {
            self.coeffs.remove(&tuple);
        } else {
            self.coeffs.insert(tuple, value);
        }
    }

    /// Value on the basis tuple (sorted internally before lookup).
    pub fn coeff(&self, tuple: &[usize]) -> TruncatedSeries {
        let mut t = tuple.to_vec();
        t.sort_unstable();
        self.coeffs
            .get(&t)
            .cloned()
            .unwrap_or_else(|| TruncatedSeries::zero(self.blocks))
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Vec<usize>, &TruncatedSeries)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.degree, self.dim), (rhs.degree, rhs.dim));
        let mut out = self.clone();
        for (t, c) in &rhs.coeffs {
            let cur = out.coeff(t).add(c);
            out.set_coeff(t.clone(), cur);
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| c.neg())
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        self.map_coeffs(|s| s.scale(c))
    }

    pub fn scale_series(&self, s: &TruncatedSeries) -> Self {
        self.map_coeffs(|c| c.mul(s))
    }

    pub fn map_coeffs(&self, f: impl Fn(&TruncatedSeries) -> TruncatedSeries) -> Self {
        let mut out = SymForm::zero(self.degree, self.dim, self.blocks);
        for (t, c) in &self.coeffs {
            out.set_coeff(t.clone(), f(c));
        }
        out
    }

    pub fn truncated(&self, order: u32) -> Self {
        self.map_coeffs(|c| c.truncated(order))
    }

    /// Partition product: sums p1(v_I) p2(v_J) over all disjoint partitions
    /// I ∪ J of the argument slots. Commutative and associative with unit
    /// the scalar 1.
    pub fn partition_product(&self, rhs: &Self) -> Result<Self, MultilinearError> {
        if self.dim != rhs.dim {
            return Err(MultilinearError::DimMismatch);
        }
        let d_out = self.degree + rhs.degree;
        let mut out = SymForm::zero(d_out, self.dim, self.blocks);
        for t in sorted_tuples(self.dim, d_out) {
            let mut acc = TruncatedSeries::zero(self.blocks);
            for subset in subsets_of_size(d_out, self.degree) {
                let mut left = Vec::with_capacity(self.degree);
                let mut right = Vec::with_capacity(rhs.degree);
                let mut in_subset = vec![false; d_out];
                for &p in &subset {
                    in_subset[p] = true;
                }
                for (p, &j) in t.iter().enumerate() {
                    if in_subset[p] {
                        left.push(j);
                    } else {
                        right.push(j);
                    }
                }
                let c1 = self.coeff(&left);
                if c1.is_zero() {
                    continue;
                }
                let c2 = rhs.coeff(&right);
                if c2.is_zero() {
                    continue;
                }
                acc = acc.add(&c1.mul(&c2));
            }
            out.set_coeff(t, acc);
        }
        Ok(out)
    }

    /// Substitutes a list of symmetric multilinear maps into the first
    /// `maps.len()` slots, summing over all labeled partitions of the new
    /// argument slots. The empty list returns the form unchanged.
    pub fn substitute_forms(&self, maps: &[MultiMap]) -> Result<Self, MultilinearError> {
        let m = maps.len();
        if m > self.degree {
            return Err(MultilinearError::TooManyMaps {
                degree: self.degree,
                maps: m,
            });
        }
        if m == 0 {
            return Ok(self.clone());
        }
        for a in maps {
            if a.dim_in != self.dim {
                return Err(MultilinearError::DimMismatch);
            }
        }
        let nu_total: usize = maps.iter().map(|a| a.degree).sum();
        let d_out = self.degree - m + nu_total;
        let sizes: Vec<usize> = maps.iter().map(|a| a.degree).collect();
        let mut out = SymForm::zero(d_out, self.dim, self.blocks);
        for t in sorted_tuples(self.dim, d_out) {
            let mut acc = TruncatedSeries::zero(self.blocks);
            for part in labeled_partitions(d_out, &sizes) {
                let block_tuples: Vec<Vec<usize>> = part
                    .blocks
                    .iter()
                    .map(|pos| pos.iter().map(|&p| t[p]).collect())
                    .collect();
                let rest_tuple: Vec<usize> = part.rest.iter().map(|&p| t[p]).collect();
                // Sum over the output component index of each map.
                let mut w = vec![0usize; m];
                'counter: loop {
                    let mut weight_prod = TruncatedSeries::one(self.blocks);
                    let mut nonzero = true;
                    for (j, a) in maps.iter().enumerate() {
                        let c = a.components[w[j]].coeff(&block_tuples[j]);
                        if c.is_zero() {
                            nonzero = false;
                            break;
                        }
                        weight_prod = weight_prod.mul(&c);
                    }
                    if nonzero {
                        let mut p_tuple: Vec<usize> = w.clone();
                        p_tuple.extend_from_slice(&rest_tuple);
                        let pc = self.coeff(&p_tuple);
                        if !pc.is_zero() {
                            acc = acc.add(&pc.mul(&weight_prod));
                        }
                    }
                    let mut k = 0;
                    loop {
                        if k == m {
                            break 'counter;
                        }
                        w[k] += 1;
                        if w[k] < self.dim {
                            break;
                        }
                        w[k] = 0;
                        k += 1;
                    }
                }
            }
            out.set_coeff(t, acc);
        }
        Ok(out)
    }

    /// The homogeneous polynomial p(v, ..., v) of degree d in the formal
    /// vector components; one-to-one with the form for p != 0.
    pub fn diagonal(&self) -> VectorPoly {
        let mut out = VectorPoly::zero(self.dim, self.blocks);
        for (t, c) in &self.coeffs {
            let m = tuple_to_multiindex(t, self.dim);
            let mult = orderings_count(&m);
            out.add_term(&m, &c.scale(&GaussianRational::from_int(mult as i64)));
        }
        out
    }

    /// Full multilinear evaluation on explicit argument vectors whose entries
    /// are series; expands over all n^d ordered index tuples. Used as an
    /// independent route for checking the coefficient-level operations.
    pub fn eval_on_vectors(&self, vectors: &[Vec<TruncatedSeries>]) -> TruncatedSeries {
        assert_eq!(vectors.len(), self.degree);
        for v in vectors {
            assert_eq!(v.len(), self.dim);
        }
        let mut acc = TruncatedSeries::zero(self.blocks);
        if self.degree == 0 {
            return self.coeff(&[]);
        }
        let mut idx = vec![0usize; self.degree];
        loop {
            let c = self.coeff(&idx);
            if !c.is_zero() {
                let mut prod = c;
                for (s, &j) in idx.iter().enumerate() {
                    prod = prod.mul(&vectors[s][j]);
                }
                acc = acc.add(&prod);
            }
            let mut k = 0;
            loop {
                if k == self.degree {
                    return acc;
                }
                idx[k] += 1;
                if idx[k] < self.dim {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// Substitution applied in two stages; by the composition lemma the result
/// expands into single substitutions whose map degrees sum to at most
/// (sum of first-stage degrees) + (sum of second-stage degrees).
pub fn compose_expand(
    p: &SymForm,
    maps: &[MultiMap],
    then: &[MultiMap],
) -> Result<SymForm, MultilinearError> {
    p.substitute_forms(maps)?.substitute_forms(then)
}

/// Number of distinct orderings of the multiset described by a multiindex:
/// d! / prod_i m_i!.
fn orderings_count(m: &[u32]) -> u128 {
    let d: u32 = m.iter().sum();
    let mut num = 1u128;
    for k in 2..=d as u128 {
        num *= k;
    }
    let mut den = 1u128;
    for &e in m {
        for k in 2..=e as u128 {
            den *= k;
        }
    }
    num / den
}

/// All subsets of {0..total-1} of the given size, in lexicographic order.
fn subsets_of_size(total: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(
        total: usize,
        size: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        let needed = size - cur.len();
        for j in start..=(total - needed) {
            cur.push(j);
            rec(total, size, j + 1, cur, out);
            cur.pop();
        }
    }
    if size > total {
        return Vec::new();
    }
    if size == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    rec(total, size, 0, &mut Vec::new(), &mut out);
    out
}

struct LabeledPartition {
    blocks: Vec<Vec<usize>>,
    rest: Vec<usize>,
}

/// All ways to carve labeled blocks of the given sizes out of {0..total-1};
/// remaining positions go to `rest`.
fn labeled_partitions(total: usize, sizes: &[usize]) -> Vec<LabeledPartition> {
    fn rec(
        avail: &[usize],
        sizes: &[usize],
        acc: &mut Vec<Vec<usize>>,
        out: &mut Vec<LabeledPartition>,
    ) {
        match sizes.split_first() {
            None => out.push(LabeledPartition {
                blocks: acc.clone(),
                rest: avail.to_vec(),
            }),
            Some((&s, rest_sizes)) => {
                for subset in subsets_of_size(avail.len(), s) {
                    let chosen: Vec<usize> = subset.iter().map(|&i| avail[i]).collect();
                    let remaining: Vec<usize> = avail
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !subset.contains(i))
                        .map(|(_, &v)| v)
                        .collect();
                    acc.push(chosen);
                    rec(&remaining, rest_sizes, acc, out);
                    acc.pop();
                }
            }
        }
    }
    let avail: Vec<usize> = (0..total).collect();
    let mut out = Vec::new();
    rec(&avail, sizes, &mut Vec::new(), &mut out);
    out
}

/// A symmetric nu-linear map V^nu -> V given by its n component forms;
/// degree 0 means a constant vector.
#[derive(Clone, Debug)]
pub struct MultiMap {
    pub degree: usize,
    pub dim_in: usize,
    pub components: Vec<SymForm>,
}

impl MultiMap {
    pub fn new(components: Vec<SymForm>) -> Self {
        assert!(!components.is_empty());
        let dim_in = components[0].dim;
        let degree = components[0].degree;
        assert_eq!(components.len(), dim_in, "need one component per dimension");
        for c in &components {
            assert_eq!(c.degree, degree);
            assert_eq!(c.dim, dim_in);
        }
        MultiMap {
            degree,
            dim_in,
            components,
        }
    }

    /// The identity map as a 1-linear map.
    pub fn identity(dim: usize, blocks: VarBlocks) -> Self {
        let comps = (0..dim)
            .map(|w| {
                let mut f = SymForm::zero(1, dim, blocks);
                f.set_coeff(vec![w], TruncatedSeries::one(blocks));
                f
            })
            .collect();
        MultiMap::new(comps)
    }

    /// v -> c*v as a 1-linear map.
    pub fn scaling(dim: usize, blocks: VarBlocks, c: &GaussianRational) -> Self {
        let comps = (0..dim)
            .map(|w| {
                let mut f = SymForm::zero(1, dim, blocks);
                f.set_coeff(vec![w], TruncatedSeries::constant(blocks, c.clone()));
                f
            })
            .collect();
        MultiMap::new(comps)
    }
}

/// A polynomial in the formal components of a vector variable, with series
/// coefficients: the value space of [`SymForm::diagonal`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VectorPoly {
    pub dim: usize,
    pub blocks: VarBlocks,
    terms: BTreeMap<Vec<u32>, TruncatedSeries>,
}

impl VectorPoly {
    pub fn zero(dim: usize, blocks: VarBlocks) -> Self {
        VectorPoly {
            dim,
            blocks,
            terms: BTreeMap::new(),
        }
    }

    pub fn add_term(&mut self, m: &[u32], c: &TruncatedSeries) {
        if c.is_zero() {
            return;
        }
        let cur = match self.terms.get(m) {
            Some(s) => s.add(c),
            None => c.clone(),
        };
        if cur.is_zero() {
            self.terms.remove(m);
        } else {
            self.terms.insert(m.to_vec(), cur);
        }
    }

    pub fn coeff(&self, m: &[u32]) -> TruncatedSeries {
        self.terms
            .get(m)
            .cloned()
            .unwrap_or_else(|| TruncatedSeries::zero(self.blocks))
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        let mut out = VectorPoly::zero(self.dim, self.blocks);
        for (m, s) in &self.terms {
            out.add_term(m, &s.scale(c));
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let mut out = VectorPoly::zero(self.dim, self.blocks);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let m: Vec<u32> = m1.iter().zip(m2.iter()).map(|(a, b)| a + b).collect();
                out.add_term(&m, &c1.mul(c2));
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// binom(n, k) as an exact Gaussian rational.
pub fn binomial(n: u64, k: u64) -> GaussianRational {
    if k > n {
        return GaussianRational::zero();
    }
    let mut acc = GaussianRational::one();
    for j in 0..k {
        acc = &acc * &GaussianRational::from_int((n - j) as i64);
        acc = acc
            .checked_div(&GaussianRational::from_int((j + 1) as i64))
            .unwrap();
    }
    acc
}
