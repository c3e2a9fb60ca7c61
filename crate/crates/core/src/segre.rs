//! Surfaces, Segre-variety graph functions, and derivative tables.
//!
//! A surface is a generic real-analytic submanifold of C^{n+d} given by an
//! exact defining series rho(z, w, chi, tau) over Q(i), with chi and tau the
//! complexified conjugate variables. The module solves w = Q(z, chi, tau)
//! for the Segre graph, restricts derivative data to the Segre variety of
//! the reference point (and to distinguished submanifolds of it), computes
//! the jets of Q two independent ways (implicit solve vs the marked-tree
//! formula, or the determinant-denominator recursion in codimension >= 2),
//! and pushes jets forward under normalized holomorphic embeddings.

use crate::exactnum::{ExactMatrix, GaussianRational};
use crate::multilinear::{sorted_tuples, tuple_to_multiindex, SymForm};
use crate::series::{
    invert_map, multiindex_total, Multiindex, SeriesError, TruncatedSeries, VarBlocks,
};
use crate::trees::{enumerate_marked_trees, tree_term, DerivativeSource, TreeError};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegreError {
    SingularRhoW,
    NonUnitDetRhoW,
    RealityViolation {
        alpha: Multiindex,
        mu: Multiindex,
        s: Multiindex,
    },
    ConstantOrLinearTerm,
    DegenerateBlock,
    BadInput(String),
    Series(SeriesError),
    Tree(TreeError),
}

impl fmt::Display for SegreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegreError::SingularRhoW => {
                write!(f, "rho_w(0,0) is singular; supply adapted coordinates")
            }
            SegreError::NonUnitDetRhoW => write!(f, "det rho_w(0, .) has zero constant term"),
            SegreError::RealityViolation { alpha, mu, s } => write!(
                f,
                "reality condition violated at z^{alpha:?} zbar^{mu:?} u^{s:?}: conjugate coefficient mismatch"
            ),
            SegreError::ConstantOrLinearTerm => {
                write!(f, "defining data must have no constant or linear terms")
            }
            SegreError::DegenerateBlock => {
                write!(f, "distinguished restriction has a singular Jacobian block")
            }
            SegreError::BadInput(msg) => write!(f, "{msg}"),
            SegreError::Series(e) => write!(f, "{e}"),
            SegreError::Tree(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SegreError {}

impl From<SeriesError> for SegreError {
    fn from(e: SeriesError) -> Self {
        SegreError::Series(e)
    }
}

impl From<TreeError> for SegreError {
    fn from(e: TreeError) -> Self {
        SegreError::Tree(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceForm {
    Real,
    Complex,
}

/// One coefficient of a real defining equation Im w = r(z, zbar, Re w):
/// coef * z^alpha zbar^mu (Re w)^s in component `comp`.
#[derive(Debug, Clone)]
pub struct RealTerm {
    pub coef: GaussianRational,
    pub alpha: Multiindex,
    pub mu: Multiindex,
    pub s: Multiindex,
    pub comp: usize,
}

/// A surface with an exact complexified defining series per codimension
/// component, a declared working truncation order, and the form it came from.
#[derive(Debug, Clone)]
pub struct SurfaceSpec {
    pub name: String,
    pub blocks: VarBlocks,
    pub rho: Vec<TruncatedSeries>,
    pub order: u32,
    pub source_form: SourceForm,
}

impl SurfaceSpec {
    pub fn new(
        name: String,
        blocks: VarBlocks,
        rho: Vec<TruncatedSeries>,
        order: u32,
        source_form: SourceForm,
    ) -> Result<Self, SegreError> {
        if rho.len() != blocks.d {
            return Err(SegreError::BadInput(format!(
                "expected {} defining components, got {}",
                blocks.d,
                rho.len()
            )));
        }
        for r in &rho {
            if r.blocks != blocks {
                return Err(SegreError::Series(SeriesError::BlockMismatch));
            }
            if !r.constant_term().is_zero() {
                return Err(SegreError::BadInput("rho(0) must vanish".to_string()));
            }
        }
        let spec = SurfaceSpec {
            name,
            blocks,
            rho,
            order,
            source_form,
        };
        if spec.rho_w0().det().is_zero() {
            return Err(SegreError::SingularRhoW);
        }
        Ok(spec)
    }

    /// The constant d x d matrix rho_w(0,0,0,0).
    pub fn rho_w0(&self) -> ExactMatrix {
        let d = self.blocks.d;
        let mut m = ExactMatrix::zero(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut e = vec![0u32; self.blocks.nvars()];
                e[self.blocks.w(j)] = 1;
                m.set(i, j, self.rho[i].coeff(&e));
            }
        }
        m
    }

    /// True when rho has no dependence on w or tau beyond the linear
    /// (w_i - tau_i)/2i part, i.e. the surface is rigid; then all Segre data
    /// is exact polynomial.
    pub fn is_rigid(&self) -> bool {
        let b = self.blocks;
        self.rho.iter().all(|r| {
            r.terms().all(|(e, _)| {
                let wdeg: u32 = (0..b.d).map(|j| e[b.w(j)]).sum();
                let tdeg: u32 = (0..b.d).map(|j| e[b.tau(j)]).sum();
                (wdeg + tdeg == 0) || (wdeg + tdeg == 1 && multiindex_total(e) == 1)
            })
        })
    }

    /// Solves rho(z, Q, chi, tau) = 0 for w = Q(z, chi, tau) by exact
    /// fixed-point iteration (or in closed form when rho is linear in w).
    /// The iteration w <- w - rho_w(0)^{-1} rho(z, w, chi, tau) gains one
    /// degree in the truncation filtration per step, so it stabilizes within
    /// `at_order` rounds; the residual is verified before returning.
    pub fn segre_solve(&self, at_order: u32) -> Result<Vec<TruncatedSeries>, SegreError> {
        solve_for_w(&self.rho, self.blocks, at_order)
    }

    /// The graph tau = T(chi) parametrizing the conjugate of the Segre
    /// variety of 0: zeta lies in S_0 iff the pure (z, w) part of rho
    /// vanishes at zeta, so the conjugated pure part, solved for w and
    /// relabelled into the (chi, tau) blocks, gives zeta-bar_w =
    /// T(zeta-bar_z).
    pub fn conjugate_segre_graph(&self, at_order: u32) -> Result<Vec<TruncatedSeries>, SegreError> {
        let b = self.blocks;
        let drop: Vec<usize> = (0..b.n)
            .map(|i| b.chi(i))
            .chain((0..b.d).map(|i| b.tau(i)))
            .collect();
        let sigma: Vec<TruncatedSeries> = self
            .rho
            .iter()
            .map(|r| r.set_vars_zero(&drop).conj_coefficients())
            .collect();
        let solved = solve_for_w(&sigma, b, at_order)?;
        Ok(solved.into_iter().map(|s| s.swap_blocks()).collect())
    }

    /// The table of rho^i_{z^beta w^gamma}(0, zeta-bar) for |beta|+|gamma| <=
    /// kmax, restricted to the Segre variety of 0, so each entry is a series
    /// in the n chi-parameters.
    pub fn derivative_table(
        &self,
        kmax: u32,
        at_order: u32,
    ) -> Result<DerivativeTable, SegreError> {
        let b = self.blocks;
        let t = self.conjugate_segre_graph(at_order)?;
        let mut tau_assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
        for j in 0..b.d {
            tau_assign.insert(b.tau(j), t[j].clone());
        }
        let zw_vars: Vec<usize> = (0..b.n)
            .map(|i| b.z(i))
            .chain((0..b.d).map(|i| b.w(i)))
            .collect();
        let mut keys: Vec<(usize, Multiindex, Multiindex)> = Vec::new();
        for i in 0..b.d {
            for total in 0..=kmax {
                for bz in multiindices_of_total(b.n, total) {
                    let rest = total - multiindex_total(&bz);
                    for gw in multiindices_of_exact_total(b.d, rest) {
                        keys.push((i, bz.clone(), gw));
                    }
                }
            }
        }
        keys.sort();
        keys.dedup();
        let computed: Result<Vec<_>, SegreError> = keys
            .par_iter()
            .map(|(i, beta, gamma)| {
                let d = self.rho[*i].partial_derivative(beta, gamma)?;
                let restricted = d.set_vars_zero(&zw_vars).substitute(&tau_assign)?;
                Ok(((*i, beta.clone(), gamma.clone()), restricted))
            })
            .collect();
        let entries: BTreeMap<_, _> = computed?.into_iter().collect();
        Ok(DerivativeTable {
            blocks: b,
            kmax,
            restriction: Restriction::SegreZero,
            working_order: at_order,
            entries,
        })
    }

    /// Jets of Q at z = 0 on S_0 straight from the implicit solve: the
    /// independent oracle against the tree formula and the recursion.
    pub fn q_jets_from_solver(&self, k: u32, at_order: u32) -> Result<Vec<SymForm>, SegreError> {
        let b = self.blocks;
        let q = self.segre_solve(at_order.saturating_add(k))?;
        let t = self.conjugate_segre_graph(at_order)?;
        let mut tau_assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
        for j in 0..b.d {
            tau_assign.insert(b.tau(j), t[j].clone());
        }
        let z_vars: Vec<usize> = (0..b.n).map(|i| b.z(i)).collect();
        let mut out = Vec::with_capacity(b.d);
        for qi in &q {
            let mut form = SymForm::zero(k as usize, b.n, b);
            for tuple in sorted_tuples(b.n, k as usize) {
                let beta = tuple_to_multiindex(&tuple, b.n);
                let deriv = qi.partial_derivative(&beta, &vec![0; b.d])?;
                let restricted = deriv.set_vars_zero(&z_vars).substitute(&tau_assign)?;
                form.set_coeff(tuple, restricted);
            }
            out.push(form);
        }
        Ok(out)
    }

    /// Q_{z^k}(0, zeta-bar) through the structural route: in codimension 1
    /// the sum of tree terms over all marked trees with total mark k; in
    /// higher codimension the recursion with adjugate/determinant
    /// denominators. Coefficients are series in the chi-parameters of S_0.
    pub fn q_jets_tree(&self, k: u32, at_order: u32) -> Result<Vec<SymForm>, SegreError> {
        if self.blocks.d == 1 {
            let table = self.derivative_table(k, at_order)?;
            let rho_w = table.rho_w_series().map_err(SegreError::Tree)?;
            if rho_w.constant_term().is_zero() {
                return Err(SegreError::Tree(TreeError::NonUnitRhoW));
            }
            let mut acc = SymForm::zero(k as usize, self.blocks.n, self.blocks);
            for tree in enumerate_marked_trees(k) {
                acc = acc.add(&tree_term(&tree, &table)?);
            }
            Ok(vec![acc])
        } else {
            let parts = self.q_jets_highcodim(k, at_order)?;
            parts.jets(k, at_order)
        }
    }

    /// The codimension >= 2 recursion, exposing the numerator forms and the
    /// determinant powers clearing each denominator.
    pub fn q_jets_highcodim(&self, k: u32, at_order: u32) -> Result<HighCodimJets, SegreError> {
        let b = self.blocks;
        let d = b.d;
        let table = self.derivative_table(k, at_order)?;
        let rho_w_mat: Vec<Vec<TruncatedSeries>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let mut gamma = vec![0u32; d];
                        gamma[j] = 1;
                        table.entry(i, &vec![0; b.n], &gamma).cloned().unwrap()
                    })
                    .collect()
            })
            .collect();
        let det = series_det(&rho_w_mat, b);
        if det.constant_term().is_zero() {
            return Err(SegreError::NonUnitDetRhoW);
        }
        let adj = series_adjugate(&rho_w_mat, b);
        // numerators[j-1][i] / det^{powers[j-1]} = Q^i_{z^j}(0, zeta-bar)
        let mut numerators: Vec<Vec<SymForm>> = Vec::new();
        let mut powers: Vec<u32> = Vec::new();
        for j in 1..=k {
            // all (r, multiset of pairs (order, component)) with
            // r + sum(orders) = j, except the solved rho_w * Q_{z^j} term
            let mut terms: Vec<(Vec<SymForm>, u32)> = Vec::new();
            for r in 0..=j {
                let rest = j - r;
                let pool: Vec<(u32, usize)> = (1..=rest)
                    .rev()
                    .flat_map(|o| (0..d).map(move |c| (o, c)))
                    .collect();
                let mut stack: Vec<(u32, usize)> = Vec::new();
                let mut bundles: Vec<Vec<(u32, usize)>> = Vec::new();
                collect_pair_multisets(&pool, rest, 0, &mut stack, &mut bundles);
                for bundle in bundles {
                    if r == 0 && bundle.len() <= 1 {
                        continue;
                    }
                    let mut gamma = vec![0u32; d];
                    for &(_, c) in &bundle {
                        gamma[c] += 1;
                    }
                    // repeated identical (order, component) factors carry a
                    // 1/multiplicity! symmetry factor when each unordered
                    // bundle is counted once
                    let mut sym: i64 = 1;
                    let mut run = 1i64;
                    for pair in bundle.windows(2) {
                        if pair[0] == pair[1] {
                            run += 1;
                            sym *= run;
                        } else {
                            run = 1;
                        }
                    }
                    let sym_inv = GaussianRational::from_int(sym).inv().expect("nonzero");
                    let mut q_prod: Option<SymForm> = None;
                    let mut pow_sum = 0u32;
                    for &(o, c) in &bundle {
                        let f = numerators[(o - 1) as usize][c].clone();
                        pow_sum += powers[(o - 1) as usize];
                        q_prod = Some(match q_prod {
                            None => f,
                            Some(p) => p.partition_product(&f).expect("same dim"),
                        });
                    }
                    let mut comps = Vec::with_capacity(d);
                    for i in 0..d {
                        let rho_form = table_form(&table, i, r, &gamma)?;
                        let term = match &q_prod {
                            None => rho_form,
                            Some(p) => rho_form.partition_product(p).expect("same dim"),
                        };
                        comps.push(term.scale(&sym_inv));
                    }
                    terms.push((comps, pow_sum));
                }
            }
            let common = terms.iter().map(|(_, p)| *p).max().unwrap_or(0);
            let mut sums: Vec<SymForm> =
                (0..d).map(|_| SymForm::zero(j as usize, b.n, b)).collect();
            for (comps, p) in terms {
                let mut det_factor = TruncatedSeries::one(b).truncated(at_order);
                for _ in 0..(common - p) {
                    det_factor = det_factor.mul(&det);
                }
                for (i, c) in comps.into_iter().enumerate() {
                    sums[i] = sums[i].add(&c.scale_series(&det_factor));
                }
            }
            // Q_{z^j} = -adj * sums / det^{common+1}
            let mut nums_j = Vec::with_capacity(d);
            for i in 0..d {
                let mut acc = SymForm::zero(j as usize, b.n, b);
                for c in 0..d {
                    acc = acc.add(&sums[c].scale_series(&adj[i][c]));
                }
                nums_j.push(acc.neg().truncated(at_order));
            }
            numerators.push(nums_j);
            powers.push(common + 1);
        }
        Ok(HighCodimJets {
            blocks: b,
            det,
            adjugate: adj,
            numerators,
            powers,
            table,
        })
    }

    /// Solves the distinguished-submanifold equations Q_{z_j}(0, zeta-bar) =
    /// c_j for j in I (c_j from the complex tangent at the reference point)
    /// for the chi_I parameters, returning one series per index of I in the
    /// remaining chi variables.
    pub fn distinguished_solution(
        &self,
        subset: &IndexSubset,
        at_order: u32,
    ) -> Result<Vec<(usize, TruncatedSeries)>, SegreError> {
        if self.blocks.d != 1 {
            return Err(SegreError::BadInput(
                "distinguished restriction is defined for codimension 1".to_string(),
            ));
        }
        let b = self.blocks;
        let first = self.q_jets_from_solver(1, at_order)?;
        let q1 = &first[0];
        let members = subset.indices();
        // E_j = Q_{z_j}(0, .) - Q_{z_j}(0, 0), j in I
        let eqs: Vec<TruncatedSeries> = members
            .iter()
            .map(|&j| {
                let s = q1.coeff(&[j]);
                let c = s.constant_term();
                s.sub(&TruncatedSeries::constant(b, c))
            })
            .collect();
        let m = members.len();
        let mut jac = ExactMatrix::zero(m, m);
        for (row, eq) in eqs.iter().enumerate() {
            for (col, &i) in members.iter().enumerate() {
                let mut e = vec![0u32; b.nvars()];
                e[b.chi(i)] = 1;
                jac.set(row, col, eq.coeff(&e));
            }
        }
        if jac.det().is_zero() {
            return Err(SegreError::DegenerateBlock);
        }
        let jac_inv = invert_const_matrix(&jac).expect("nonsingular");
        let mut phi: Vec<TruncatedSeries> = members
            .iter()
            .map(|_| TruncatedSeries::zero(b).truncated(at_order))
            .collect();
        for _ in 0..=at_order + 1 {
            let mut assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
            for (idx, &i) in members.iter().enumerate() {
                assign.insert(b.chi(i), phi[idx].clone());
            }
            let vals: Result<Vec<TruncatedSeries>, SeriesError> =
                eqs.iter().map(|eq| eq.substitute(&assign)).collect();
            let vals = vals?;
            let mut next = Vec::with_capacity(m);
            for idx in 0..m {
                let mut corr = TruncatedSeries::zero(b);
                for (jdx, v) in vals.iter().enumerate() {
                    corr = corr.add(&v.scale(jac_inv.get(idx, jdx)));
                }
                next.push(phi[idx].sub(&corr).truncated(at_order));
            }
            if next == phi {
                break;
            }
            phi = next;
        }
        // verify the solution before using it
        let mut assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
        for (idx, &i) in members.iter().enumerate() {
            assign.insert(b.chi(i), phi[idx].clone());
        }
        for eq in &eqs {
            if !eq.substitute(&assign)?.truncated(at_order).is_zero() {
                return Err(SegreError::BadInput(
                    "distinguished solve did not converge".to_string(),
                ));
            }
        }
        // normalized fast path: if the solved parameters vanish and the
        // equations already vanish exactly on chi_I = 0, the solution is the
        // exact zero (this keeps tables of exact surfaces exact)
        if phi.iter().all(TruncatedSeries::is_zero) {
            let chi_members: Vec<usize> = members.iter().map(|&i| b.chi(i)).collect();
            if eqs
                .iter()
                .all(|eq| eq.is_exact() && eq.set_vars_zero(&chi_members).is_zero())
            {
                phi = members.iter().map(|_| TruncatedSeries::zero(b)).collect();
            }
        }
        Ok(members.iter().copied().zip(phi).collect())
    }

    /// Restricts the full derivative table to the distinguished submanifold
    /// S_{0,V_I}; for normalized surfaces the solved parameters come out as
    /// chi_j = 0 (verified, not assumed) and the restriction is the plain
    /// substitution chi_I <- 0.
    pub fn restrict_distinguished(
        &self,
        subset: &IndexSubset,
        kmax: u32,
        at_order: u32,
    ) -> Result<DerivativeTable, SegreError> {
        let b = self.blocks;
        let table = self.derivative_table(kmax, at_order)?;
        let phi = self.distinguished_solution(subset, at_order)?;
        let mut assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
        for (i, s) in &phi {
            assign.insert(b.chi(*i), s.clone());
        }
        let entries: Result<BTreeMap<_, _>, SeriesError> = table
            .entries
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.substitute(&assign)?)))
            .collect();
        Ok(DerivativeTable {
            blocks: b,
            kmax,
            restriction: Restriction::Distinguished(subset.indices().to_vec()),
            working_order: at_order,
            entries: entries?,
        })
    }

    /// The Segre graph function restricted to the chosen parameter locus:
    /// tau is eliminated through the conjugate Segre graph and, for a
    /// distinguished restriction, chi_I through the solved parameters. The
    /// result has Q(0, .) = 0, ready for graph transformation.
    pub fn restricted_graph(
        &self,
        restriction: Option<&IndexSubset>,
        at_order: u32,
    ) -> Result<Vec<TruncatedSeries>, SegreError> {
        let b = self.blocks;
        let q = self.segre_solve(at_order)?;
        let t = self.conjugate_segre_graph(at_order)?;
        let mut assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
        for j in 0..b.d {
            assign.insert(b.tau(j), t[j].clone());
        }
        if let Some(subset) = restriction {
            for (i, s) in self.distinguished_solution(subset, at_order)? {
                assign.insert(b.chi(i), s);
            }
        }
        let mut out = Vec::with_capacity(b.d);
        for qi in &q {
            let r = qi.substitute(&assign)?;
            if !r.constant_term().is_zero() {
                return Err(SegreError::BadInput(
                    "restricted graph does not pass through the reference point".to_string(),
                ));
            }
            out.push(r);
        }
        Ok(out)
    }
}

/// Builds the complexified defining series of a real-form surface
/// Im w = r(z, zbar, Re w): each component is (w_i - tau_i)/2i plus r with
/// zbar -> chi and Re w -> (w + tau)/2, all coefficients exact. The reality
/// condition conj(c_{alpha,mu,s}) = c_{mu,alpha,s} is checked first.
pub fn complexify(
    name: String,
    blocks: VarBlocks,
    order: u32,
    terms: &[RealTerm],
) -> Result<SurfaceSpec, SegreError> {
    let mut coef_map: BTreeMap<(usize, Multiindex, Multiindex, Multiindex), GaussianRational> =
        BTreeMap::new();
    for t in terms {
        if t.alpha.len() != blocks.n || t.mu.len() != blocks.n || t.s.len() != blocks.d {
            return Err(SegreError::BadInput(
                "multiindex length mismatch".to_string(),
            ));
        }
        if t.comp >= blocks.d {
            return Err(SegreError::BadInput(format!(
                "component {} out of range",
                t.comp + 1
            )));
        }
        let key = (t.comp, t.alpha.clone(), t.mu.clone(), t.s.clone());
        let cur = coef_map.remove(&key).unwrap_or_else(GaussianRational::zero);
        let new = &cur + &t.coef;
        if !new.is_zero() {
            coef_map.insert(key, new);
        }
    }
    for ((comp, alpha, mu, s), c) in &coef_map {
        if multiindex_total(alpha) + multiindex_total(mu) + multiindex_total(s) <= 1 {
            return Err(SegreError::ConstantOrLinearTerm);
        }
        let mirror = (*comp, mu.clone(), alpha.clone(), s.clone());
        let mirror_c = coef_map
            .get(&mirror)
            .cloned()
            .unwrap_or_else(GaussianRational::zero);
        if c.conj() != mirror_c {
            return Err(SegreError::RealityViolation {
                alpha: alpha.clone(),
                mu: mu.clone(),
                s: s.clone(),
            });
        }
    }
    let half = GaussianRational::rational(1, 2);
    let mut rho: Vec<TruncatedSeries> = Vec::with_capacity(blocks.d);
    for i in 0..blocks.d {
        // (w_i - tau_i)/2i = (-i/2) w_i + (i/2) tau_i
        let mut acc = TruncatedSeries::var(blocks, blocks.w(i))
            .scale(&GaussianRational::of(0, 1, -1, 2))
            .add(
                &TruncatedSeries::var(blocks, blocks.tau(i))
                    .scale(&GaussianRational::of(0, 1, 1, 2)),
            );
        for ((comp, alpha, mu, s), c) in &coef_map {
            if *comp != i {
                continue;
            }
            let mut e = vec![0u32; blocks.nvars()];
            for (j, &a) in alpha.iter().enumerate() {
                e[blocks.z(j)] = a;
            }
            for (j, &m) in mu.iter().enumerate() {
                e[blocks.chi(j)] = m;
            }
            let mut term = TruncatedSeries::monomial(blocks, e, c.clone());
            for (j, &sj) in s.iter().enumerate() {
                if sj == 0 {
                    continue;
                }
                let u = TruncatedSeries::var(blocks, blocks.w(j))
                    .add(&TruncatedSeries::var(blocks, blocks.tau(j)))
                    .scale(&half);
                term = term.mul(&u.pow(sj));
            }
            acc = acc.add(&term);
        }
        rho.push(acc);
    }
    SurfaceSpec::new(name, blocks, rho, order, SourceForm::Real)
}

/// Restriction locus of a derivative table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Restriction {
    SegreZero,
    Distinguished(Vec<usize>),
}

/// Derivative data of the defining series restricted to (a subvariety of)
/// the Segre variety of the reference point; entries are series in the chi
/// parameters.
#[derive(Debug, Clone)]
pub struct DerivativeTable {
    pub blocks: VarBlocks,
    pub kmax: u32,
    pub restriction: Restriction,
    pub working_order: u32,
    entries: BTreeMap<(usize, Multiindex, Multiindex), TruncatedSeries>,
}

impl DerivativeTable {
    pub fn entry(&self, comp: usize, beta: &[u32], gamma: &[u32]) -> Option<&TruncatedSeries> {
        self.entries.get(&(comp, beta.to_vec(), gamma.to_vec()))
    }

    pub fn entries(
        &self,
    ) -> impl Iterator<Item = (&(usize, Multiindex, Multiindex), &TruncatedSeries)> {
        self.entries.iter()
    }

    /// Weight of a derivative: 2|beta| + |gamma| - 1.
    pub fn weight(beta: &[u32], gamma: &[u32]) -> i64 {
        2 * multiindex_total(beta) as i64 + multiindex_total(gamma) as i64 - 1
    }

    /// All entries are exact polynomials (no truncation happened anywhere).
    pub fn is_exact(&self) -> bool {
        self.entries.values().all(TruncatedSeries::is_exact)
    }
}

impl DerivativeSource for DerivativeTable {
    fn rho_form(&self, s: u32, l: u32) -> Result<SymForm, TreeError> {
        assert_eq!(self.blocks.d, 1, "tree formula runs in codimension 1");
        let n = self.blocks.n;
        let mut form = SymForm::zero(s as usize, n, self.blocks);
        for tuple in sorted_tuples(n, s as usize) {
            let beta = tuple_to_multiindex(&tuple, n);
            let entry = self
                .entry(0, &beta, &[l])
                .ok_or(TreeError::MissingTableEntry { s, l })?;
            form.set_coeff(tuple, entry.clone());
        }
        Ok(form)
    }

    fn rho_w_series(&self) -> Result<TruncatedSeries, TreeError> {
        self.entry(0, &vec![0; self.blocks.n], &[1])
            .cloned()
            .ok_or(TreeError::MissingTableEntry { s: 0, l: 1 })
    }

    fn working_order(&self) -> u32 {
        self.working_order
    }
}

/// Output of the codimension >= 2 jet recursion: for each order j the d
/// numerator forms and the power of det rho_w(0, zeta-bar) clearing the
/// denominator, Q_{z^j} = numerators[j-1] / det^powers[j-1].
pub struct HighCodimJets {
    pub blocks: VarBlocks,
    pub det: TruncatedSeries,
    pub adjugate: Vec<Vec<TruncatedSeries>>,
    pub numerators: Vec<Vec<SymForm>>,
    pub powers: Vec<u32>,
    pub table: DerivativeTable,
}

impl HighCodimJets {
    /// Divides the order-j numerators by the determinant power.
    pub fn jets(&self, j: u32, at_order: u32) -> Result<Vec<SymForm>, SegreError> {
        let idx = (j - 1) as usize;
        let det_inv = self.det.inverse(at_order).map_err(SegreError::Series)?;
        let mut factor = TruncatedSeries::one(self.blocks).truncated(at_order);
        for _ in 0..self.powers[idx] {
            factor = factor.mul(&det_inv);
        }
        Ok(self.numerators[idx]
            .iter()
            .map(|f| f.scale_series(&factor).truncated(at_order))
            .collect())
    }

    /// The head term -rho_w^{-1} rho_{z^j} expressed over the same
    /// denominator det^powers[j-1]: -(adjugate * rho-forms) * det^{p-1}.
    pub fn head_numerator(&self, j: u32, at_order: u32) -> Result<Vec<SymForm>, SegreError> {
        let idx = (j - 1) as usize;
        let d = self.blocks.d;
        let mut det_pow = TruncatedSeries::one(self.blocks).truncated(at_order);
        for _ in 0..self.powers[idx] - 1 {
            det_pow = det_pow.mul(&self.det);
        }
        let mut out = Vec::with_capacity(d);
        for i in 0..d {
            let mut acc = SymForm::zero(j as usize, self.blocks.n, self.blocks);
            for c in 0..d {
                let rho_form = table_form(&self.table, c, j, &vec![0; d])?;
                acc = acc.add(&rho_form.scale_series(&self.adjugate[i][c]));
            }
            out.push(acc.neg().scale_series(&det_pow).truncated(at_order));
        }
        Ok(out)
    }
}

/// The s-linear form of component `comp`'s derivative rho^i_{z^beta w^gamma}
/// read off a table.
fn table_form(
    table: &DerivativeTable,
    comp: usize,
    s: u32,
    gamma: &[u32],
) -> Result<SymForm, SegreError> {
    let n = table.blocks.n;
    let mut form = SymForm::zero(s as usize, n, table.blocks);
    for tuple in sorted_tuples(n, s as usize) {
        let beta = tuple_to_multiindex(&tuple, n);
        let entry = table.entry(comp, &beta, gamma).ok_or(SegreError::Tree(
            TreeError::MissingTableEntry {
                s,
                l: multiindex_total(gamma),
            },
        ))?;
        form.set_coeff(tuple, entry.clone());
    }
    Ok(form)
}

fn collect_pair_multisets(
    pool: &[(u32, usize)],
    remaining: u32,
    start: usize,
    stack: &mut Vec<(u32, usize)>,
    out: &mut Vec<Vec<(u32, usize)>>,
) {
    if remaining == 0 {
        out.push(stack.clone());
        return;
    }
    for i in start..pool.len() {
        let (o, _) = pool[i];
        if o > remaining {
            continue;
        }
        stack.push(pool[i]);
        collect_pair_multisets(pool, remaining - o, i, stack, out);
        stack.pop();
    }
}

/// A proper subset I of {1..n} (stored 0-based), selecting the distinguished
/// submanifold S_{0, V_I}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSubset {
    n: usize,
    indices: Vec<usize>,
}

impl IndexSubset {
    pub fn new(n: usize, mut indices: Vec<usize>) -> Result<Self, SegreError> {
        indices.sort_unstable();
        indices.dedup();
        if indices.iter().any(|&i| i >= n) {
            return Err(SegreError::BadInput("index out of range".to_string()));
        }
        if indices.len() >= n {
            return Err(SegreError::BadInput(
                "index set must be a proper subset of {1..n}".to_string(),
            ));
        }
        Ok(IndexSubset { n, indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// A normalized holomorphic embedding H = (F, G): F has identity z-linear
/// part and no w-linear part; optionally G has no z-linear part.
#[derive(Debug, Clone)]
pub struct MapSpec {
    pub blocks: VarBlocks,
    pub f: Vec<TruncatedSeries>,
    pub g: Vec<TruncatedSeries>,
    pub normalized_g: bool,
}

impl MapSpec {
    pub fn new(
        blocks: VarBlocks,
        f: Vec<TruncatedSeries>,
        g: Vec<TruncatedSeries>,
        normalized_g: bool,
    ) -> Result<Self, SegreError> {
        if f.len() != blocks.n {
            return Err(SegreError::BadInput(format!(
                "F must have {} components, got {}",
                blocks.n,
                f.len()
            )));
        }
        if g.is_empty() {
            return Err(SegreError::BadInput(
                "G must have at least one component".to_string(),
            ));
        }
        let chi_tau: Vec<usize> = (0..blocks.n)
            .map(|i| blocks.chi(i))
            .chain((0..blocks.d).map(|i| blocks.tau(i)))
            .collect();
        for s in f.iter().chain(g.iter()) {
            if s.blocks != blocks {
                return Err(SegreError::Series(SeriesError::BlockMismatch));
            }
            if chi_tau.iter().any(|&v| s.depends_on(v)) {
                return Err(SegreError::BadInput(
                    "map components must be holomorphic in (z, w) only".to_string(),
                ));
            }
            if !s.constant_term().is_zero() {
                return Err(SegreError::BadInput("H(0) must be 0".to_string()));
            }
        }
        for (i, fi) in f.iter().enumerate() {
            for j in 0..blocks.n {
                let mut e = vec![0u32; blocks.nvars()];
                e[blocks.z(j)] = 1;
                let expected = if i == j {
                    GaussianRational::one()
                } else {
                    GaussianRational::zero()
                };
                if fi.coeff(&e) != expected {
                    return Err(SegreError::BadInput(
                        "F_z(0) must be the identity".to_string(),
                    ));
                }
            }
            for j in 0..blocks.d {
                let mut e = vec![0u32; blocks.nvars()];
                e[blocks.w(j)] = 1;
                if !fi.coeff(&e).is_zero() {
                    return Err(SegreError::BadInput("F_w(0) must vanish".to_string()));
                }
            }
        }
        if normalized_g {
            for gh in &g {
                for j in 0..blocks.n {
                    let mut e = vec![0u32; blocks.nvars()];
                    e[blocks.z(j)] = 1;
                    if !gh.coeff(&e).is_zero() {
                        return Err(SegreError::BadInput("G_z(0) must vanish".to_string()));
                    }
                }
            }
        }
        Ok(MapSpec {
            blocks,
            f,
            g,
            normalized_g,
        })
    }

    /// G_w(0): one row per G component, one column per source w variable.
    pub fn g_w0(&self) -> Vec<Vec<GaussianRational>> {
        self.g
            .iter()
            .map(|gh| {
                (0..self.blocks.d)
                    .map(|j| {
                        let mut e = vec![0u32; self.blocks.nvars()];
                        e[self.blocks.w(j)] = 1;
                        gh.coeff(&e)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Jets of a transformed graph: the partial derivatives at z = 0 of the
/// source graph Q and of the image graph Q' (one value per G component and
/// per multiindex), as series in whatever parameters Q carried.
pub struct TransformedJets {
    pub q_jets: BTreeMap<Multiindex, Vec<TruncatedSeries>>,
    pub qprime_jets: BTreeMap<Multiindex, Vec<TruncatedSeries>>,
    pub g_w0: Vec<Vec<GaussianRational>>,
}

impl TransformedJets {
    /// Q'_{z^alpha} - G_w(0) Q_{z^alpha}: the part the transformation rule
    /// says is determined by the lower-order jets alone.
    pub fn discrepancy(&self, alpha: &[u32]) -> Vec<TruncatedSeries> {
        let q = &self.q_jets[alpha];
        let qp = &self.qprime_jets[alpha];
        qp.iter()
            .enumerate()
            .map(|(h, s)| {
                let mut corr = s.clone();
                for (j, qj) in q.iter().enumerate() {
                    corr = corr.sub(&qj.scale(&self.g_w0[h][j]));
                }
                corr
            })
            .collect()
    }
}

/// Transforms a graph w = Q(z, params) under H = (F, G): parametrizes the
/// image by z -> (F(z, Q), G(z, Q)), inverts the first block, composes, and
/// reads off the jets of Q' at 0 for all 1 <= |alpha| <= kmax.
pub fn transform_graph_jets(
    h: &MapSpec,
    q: &[TruncatedSeries],
    kmax: u32,
    at_order: u32,
) -> Result<TransformedJets, SegreError> {
    let b = h.blocks;
    if q.len() != b.d {
        return Err(SegreError::BadInput(
            "graph must have d components".to_string(),
        ));
    }
    for qi in q {
        if !qi.constant_term().is_zero() {
            return Err(SegreError::BadInput(
                "graph must pass through 0".to_string(),
            ));
        }
    }
    let mut w_assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
    for j in 0..b.d {
        w_assign.insert(b.w(j), q[j].clone());
    }
    let work = at_order.saturating_add(kmax);
    let psi: Result<Vec<TruncatedSeries>, SeriesError> =
        h.f.iter()
            .map(|fi| fi.truncated(work).substitute(&w_assign))
            .collect();
    let psi = psi?;
    let gcomp: Result<Vec<TruncatedSeries>, SeriesError> =
        h.g.iter()
            .map(|gh| gh.truncated(work).substitute(&w_assign))
            .collect();
    let gcomp = gcomp?;
    let inv = invert_map(&psi, work)?;
    let mut z_assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
    for i in 0..b.n {
        z_assign.insert(b.z(i), inv[i].clone());
    }
    let qprime: Result<Vec<TruncatedSeries>, SeriesError> =
        gcomp.iter().map(|gh| gh.substitute(&z_assign)).collect();
    let qprime = qprime?;
    let z_vars: Vec<usize> = (0..b.n).map(|i| b.z(i)).collect();
    let mut q_jets = BTreeMap::new();
    let mut qprime_jets = BTreeMap::new();
    for total in 1..=kmax {
        for alpha in multiindices_of_exact_total(b.n, total) {
            let qj: Result<Vec<TruncatedSeries>, SeriesError> = q
                .iter()
                .map(|qi| {
                    Ok(qi
                        .partial_derivative(&alpha, &vec![0; b.d])?
                        .set_vars_zero(&z_vars)
                        .truncated(at_order))
                })
                .collect();
            let qpj: Result<Vec<TruncatedSeries>, SeriesError> = qprime
                .iter()
                .map(|gh| {
                    Ok(gh
                        .partial_derivative(&alpha, &vec![0; b.d])?
                        .set_vars_zero(&z_vars)
                        .truncated(at_order))
                })
                .collect();
            q_jets.insert(alpha.clone(), qj?);
            qprime_jets.insert(alpha, qpj?);
        }
    }
    Ok(TransformedJets {
        q_jets,
        qprime_jets,
        g_w0: h.g_w0(),
    })
}

/// Transforms the jets of the Segre graphs of a surface: Q is restricted to
/// S_0 (or to a distinguished submanifold), then pushed through H.
pub fn transform_jets(
    h: &MapSpec,
    surface: &SurfaceSpec,
    kmax: u32,
    at_order: u32,
    restriction: Option<&IndexSubset>,
) -> Result<TransformedJets, SegreError> {
    if h.blocks != surface.blocks {
        return Err(SegreError::Series(SeriesError::BlockMismatch));
    }
    let q = surface.restricted_graph(restriction, at_order.saturating_add(kmax))?;
    transform_graph_jets(h, &q, kmax, at_order)
}

/// Checks that an explicit holomorphic map carries the surface into a target
/// surface: substitutes the map components (and their conjugates) into the
/// target's defining series, pulls back along w = Q(z, chi, tau), and
/// returns the residual components, which vanish iff the image lies in the
/// target.
pub fn embedding_residual(
    surface: &SurfaceSpec,
    h_z: &[TruncatedSeries],
    h_w: &[TruncatedSeries],
    target: &SurfaceSpec,
    at_order: u32,
) -> Result<Vec<TruncatedSeries>, SegreError> {
    let tb = target.blocks;
    let sb = surface.blocks;
    if h_z.len() != tb.n || h_w.len() != tb.d {
        return Err(SegreError::BadInput(
            "map component count must match the target blocks".to_string(),
        ));
    }
    for s in h_z.iter().chain(h_w.iter()) {
        if s.blocks != sb {
            return Err(SegreError::Series(SeriesError::BlockMismatch));
        }
        if !s.constant_term().is_zero() {
            return Err(SegreError::BadInput("map must send 0 to 0".to_string()));
        }
    }
    // target variables in flat order: z', w', chi', tau'
    let mut assignments: Vec<TruncatedSeries> = vec![TruncatedSeries::zero(sb); tb.nvars()];
    for (a, s) in h_z.iter().enumerate() {
        assignments[tb.z(a)] = s.clone();
        assignments[tb.chi(a)] = s.bar();
    }
    for (bidx, s) in h_w.iter().enumerate() {
        assignments[tb.w(bidx)] = s.clone();
        assignments[tb.tau(bidx)] = s.bar();
    }
    let q = surface.segre_solve(at_order)?;
    let mut w_assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
    for j in 0..sb.d {
        w_assign.insert(sb.w(j), q[j].clone());
    }
    let mut out = Vec::with_capacity(tb.d);
    for rho_i in &target.rho {
        let pulled = rho_i.eval(&assignments)?;
        out.push(pulled.substitute(&w_assign)?.truncated(at_order));
    }
    Ok(out)
}

/// All multiindices over `len` slots with total at most `total`.
pub fn multiindices_of_total(len: usize, total: u32) -> Vec<Multiindex> {
    let mut out = Vec::new();
    for t in 0..=total {
        out.extend(multiindices_of_exact_total(len, t));
    }
    out
}

/// All multiindices over `len` slots with total exactly `total`, in
/// lexicographic order.
pub fn multiindices_of_exact_total(len: usize, total: u32) -> Vec<Multiindex> {
    fn rec(len: usize, total: u32, cur: &mut Vec<u32>, out: &mut Vec<Multiindex>) {
        if cur.len() == len - 1 {
            let mut m = cur.clone();
            m.push(total);
            out.push(m);
            return;
        }
        for v in 0..=total {
            cur.push(v);
            rec(len, total - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if len == 0 {
        if total == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(len, total, &mut Vec::new(), &mut out);
    out
}

fn invert_const_matrix(m: &ExactMatrix) -> Option<ExactMatrix> {
    let n = m.rows;
    let mut inv = ExactMatrix::zero(n, n);
    for col in 0..n {
        let mut e = vec![GaussianRational::zero(); n];
        e[col] = GaussianRational::one();
        let x = m.solve(&e)?;
        for row in 0..n {
            inv.set(row, col, x[row].clone());
        }
    }
    Some(inv)
}

/// Solves components(z, w, ...) = 0 for the w block. Closed form when the
/// components are linear in w with constant coefficients; fixed-point
/// iteration at the requested order otherwise.
fn solve_for_w(
    components: &[TruncatedSeries],
    blocks: VarBlocks,
    at_order: u32,
) -> Result<Vec<TruncatedSeries>, SegreError> {
    let d = blocks.d;
    assert_eq!(components.len(), d);
    for c in components {
        if !c.constant_term().is_zero() {
            return Err(SegreError::BadInput(
                "cannot solve: nonzero constant term".to_string(),
            ));
        }
    }
    let mut a = ExactMatrix::zero(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut e = vec![0u32; blocks.nvars()];
            e[blocks.w(j)] = 1;
            a.set(i, j, components[i].coeff(&e));
        }
    }
    if a.det().is_zero() {
        return Err(SegreError::SingularRhoW);
    }
    let a_inv = invert_const_matrix(&a).expect("nonsingular");
    let w_vars: Vec<usize> = (0..d).map(|j| blocks.w(j)).collect();
    let linear_in_w = components.iter().all(|c| {
        c.terms().all(|(e, _)| {
            let wdeg: u32 = w_vars.iter().map(|&v| e[v]).sum();
            wdeg == 0 || (wdeg == 1 && multiindex_total(e) == 1)
        })
    });
    let solution: Vec<TruncatedSeries> = if linear_in_w {
        // components_i = sum_j a_ij w_j + b_i  =>  w = -a^{-1} b, exactly
        let b_vec: Vec<TruncatedSeries> = components
            .iter()
            .map(|c| c.set_vars_zero(&w_vars))
            .collect();
        (0..d)
            .map(|i| {
                let mut acc = TruncatedSeries::zero(blocks);
                for (j, bj) in b_vec.iter().enumerate() {
                    acc = acc.add(&bj.scale(a_inv.get(i, j)));
                }
                acc.neg()
            })
            .collect()
    } else {
        let mut cur: Vec<TruncatedSeries> = (0..d)
            .map(|_| TruncatedSeries::zero(blocks).truncated(at_order))
            .collect();
        for _ in 0..=at_order + 1 {
            let mut assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
            for j in 0..d {
                assign.insert(blocks.w(j), cur[j].clone());
            }
            let residuals: Result<Vec<TruncatedSeries>, SeriesError> =
                components.iter().map(|c| c.substitute(&assign)).collect();
            let residuals = residuals?;
            let mut next = Vec::with_capacity(d);
            for i in 0..d {
                let mut corr = TruncatedSeries::zero(blocks);
                for (j, r) in residuals.iter().enumerate() {
                    corr = corr.add(&r.scale(a_inv.get(i, j)));
                }
                next.push(cur[i].sub(&corr).truncated(at_order));
            }
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    };
    // residual check
    let mut assign: BTreeMap<usize, TruncatedSeries> = BTreeMap::new();
    for j in 0..d {
        assign.insert(blocks.w(j), solution[j].clone());
    }
    for c in components {
        if !c.substitute(&assign)?.truncated(at_order).is_zero() {
            return Err(SegreError::BadInput(
                "implicit solve failed to converge".to_string(),
            ));
        }
    }
    Ok(solution)
}

fn series_det(m: &[Vec<TruncatedSeries>], blocks: VarBlocks) -> TruncatedSeries {
    let n = m.len();
    if n == 0 {
        return TruncatedSeries::one(blocks);
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = TruncatedSeries::zero(blocks);
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<TruncatedSeries>> = (1..n)
            .map(|r| {
                (0..n)
                    .filter(|&c| c != j)
                    .map(|c| m[r][c].clone())
                    .collect()
            })
            .collect();
        let sub = series_det(&minor, blocks);
        let term = m[0][j].mul(&sub);
        acc = if j % 2 == 0 {
            acc.add(&term)
        } else {
            acc.sub(&term)
        };
    }
    acc
}

fn series_adjugate(m: &[Vec<TruncatedSeries>], blocks: VarBlocks) -> Vec<Vec<TruncatedSeries>> {
    let n = m.len();
    let mut adj = vec![vec![TruncatedSeries::zero(blocks); n]; n];
    for i in 0..n {
        for j in 0..n {
            // adj[i][j] = (-1)^{i+j} * minor with row j and column i removed
            let minor: Vec<Vec<TruncatedSeries>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| {
                    (0..n)
                        .filter(|&c| c != i)
                        .map(|c| m[r][c].clone())
                        .collect()
                })
                .collect();
            let cof = series_det(&minor, blocks);
            adj[i][j] = if (i + j) % 2 == 0 { cof } else { cof.neg() };
        }
    }
    adj
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

    fn quadric() -> SurfaceSpec {
        // Im w = |z|^2
        complexify(
            "quadric".to_string(),
            b11(),
            10,
            &[RealTerm {
                coef: gq("1"),
                alpha: vec![1],
                mu: vec![1],
                s: vec![0],
                comp: 0,
            }],
        )
        .unwrap()
    }

    fn quartic() -> SurfaceSpec {
        // Im w = |z|^2 + |z|^4
        complexify(
            "quartic".to_string(),
            b11(),
            10,
            &[
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![1],
                    mu: vec![1],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![2],
                    mu: vec![2],
                    s: vec![0],
                    comp: 0,
                },
            ],
        )
        .unwrap()
    }

    /// Im w = |z|^2 + Re z^2 zbar^24 + Re z^3 zbar^120, the rapid-degree
    /// family truncated at its first two extra terms.
    fn factorial_family() -> SurfaceSpec {
        complexify(
            "m1".to_string(),
            b11(),
            200,
            &[
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![1],
                    mu: vec![1],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1/2"),
                    alpha: vec![2],
                    mu: vec![24],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1/2"),
                    alpha: vec![24],
                    mu: vec![2],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1/2"),
                    alpha: vec![3],
                    mu: vec![120],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1/2"),
                    alpha: vec![120],
                    mu: vec![3],
                    s: vec![0],
                    comp: 0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn complexify_quadric_structure() {
        let s = quadric();
        let b = s.blocks;
        // rho = (w - tau)/2i + z chi; rho_w(0) = -i/2
        let mut e = vec![0u32; b.nvars()];
        e[b.w(0)] = 1;
        assert_eq!(s.rho[0].coeff(&e), gq("-1/2i"));
        assert!(s.is_rigid());
        // S_0 = {w = 0}: the conjugate Segre graph is identically zero
        let t = s.conjugate_segre_graph(8).unwrap();
        assert!(t[0].is_zero());
    }

    #[test]
    fn complexify_reality_violation() {
        let r = complexify(
            "bad".to_string(),
            b11(),
            8,
            &[RealTerm {
                coef: gq("i"),
                alpha: vec![2],
                mu: vec![1],
                s: vec![0],
                comp: 0,
            }],
        );
        assert!(matches!(r, Err(SegreError::RealityViolation { .. })));
        let r2 = complexify(
            "bad2".to_string(),
            b11(),
            8,
            &[RealTerm {
                coef: gq("1"),
                alpha: vec![1],
                mu: vec![0],
                s: vec![0],
                comp: 0,
            }],
        );
        assert!(matches!(r2, Err(SegreError::ConstantOrLinearTerm)));
    }

    #[test]
    fn segre_solve_quadric_and_quartic() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let x = TruncatedSeries::var(b, b.chi(0));
        let t = TruncatedSeries::var(b, b.tau(0));
        let q = quadric().segre_solve(8).unwrap();
        let expected = t.sub(&z.mul(&x).scale(&gq("2i")));
        assert_eq!(q[0], expected);
        assert!(q[0].is_exact());
        let q4 = quartic().segre_solve(8).unwrap();
        let expected4 = t.sub(&z.mul(&x).add(&z.pow(2).mul(&x.pow(2))).scale(&gq("2i")));
        assert_eq!(q4[0], expected4);
        let mut assign = BTreeMap::new();
        assign.insert(b.w(0), q4[0].clone());
        assert!(quartic().rho[0].substitute(&assign).unwrap().is_zero());
    }

    #[test]
    fn segre_solve_singular_rho_w() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let w = TruncatedSeries::var(b, b.w(0));
        let rho = vec![z.clone().add(&w.pow(2))];
        let r = SurfaceSpec::new("sing".to_string(), b, rho, 6, SourceForm::Complex);
        assert!(matches!(r, Err(SegreError::SingularRhoW)));
    }

    #[test]
    fn segre_solve_non_rigid_fixed_point() {
        // Im w = |z|^2 + |z|^2 Re w: the solve is genuinely iterative
        let s = complexify(
            "nonrigid".to_string(),
            b11(),
            8,
            &[
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![1],
                    mu: vec![1],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![1],
                    mu: vec![1],
                    s: vec![1],
                    comp: 0,
                },
            ],
        )
        .unwrap();
        assert!(!s.is_rigid());
        let q = s.segre_solve(6).unwrap();
        let b = s.blocks;
        let mut assign = BTreeMap::new();
        assign.insert(b.w(0), q[0].clone());
        let resid = s.rho[0].substitute(&assign).unwrap().truncated(6);
        assert!(resid.is_zero());
        // Q(0, chi, tau) is still tau + higher
        let mut e = vec![0u32; b.nvars()];
        e[b.tau(0)] = 1;
        assert_eq!(q[0].coeff(&e), gq("1"));
    }

    #[test]
    fn derivative_table_quadric_and_factorial() {
        let table = quadric().derivative_table(3, 8).unwrap();
        let b = b11();
        let x = TruncatedSeries::var(b, b.chi(0));
        // rho_z(0, zeta-bar) = chi, rho_w = -i/2, z-order >= 2 vanishes
        assert_eq!(table.entry(0, &[1], &[0]).unwrap(), &x);
        assert_eq!(
            table.entry(0, &[0], &[1]).unwrap(),
            &TruncatedSeries::constant(b, gq("-1/2i"))
        );
        assert!(table.entry(0, &[2], &[0]).unwrap().is_zero());
        assert!(table.entry(0, &[3], &[0]).unwrap().is_zero());
        assert!(table.is_exact());

        let m1 = factorial_family().derivative_table(3, 150).unwrap();
        assert_eq!(m1.entry(0, &[2], &[0]).unwrap(), &x.pow(24));
        assert_eq!(
            m1.entry(0, &[3], &[0]).unwrap(),
            &x.pow(120).scale(&gq("3"))
        );
        assert!(m1.is_exact());
    }

    #[test]
    fn rigid_restriction_commutes_with_derivative() {
        // for a rigid surface, restricting then differentiating in z equals
        // differentiating then restricting
        let s = quartic();
        let b = s.blocks;
        let zw: Vec<usize> = vec![b.z(0), b.w(0)];
        let tau0: Vec<usize> = vec![b.tau(0)];
        let d_then_r = s.rho[0]
            .partial_derivative(&[2], &[0])
            .unwrap()
            .set_vars_zero(&zw)
            .set_vars_zero(&tau0);
        let r_then_d = s.rho[0]
            .set_vars_zero(&tau0)
            .partial_derivative(&[2], &[0])
            .unwrap()
            .set_vars_zero(&zw);
        assert_eq!(d_then_r, r_then_d);
    }

    #[test]
    fn q_jets_first_order_quadric() {
        let s = quadric();
        let jets = s.q_jets_tree(1, 8).unwrap();
        let b = s.blocks;
        let x = TruncatedSeries::var(b, b.chi(0));
        // Q_z = rho_z / (-rho_w) = chi / (i/2) = -2i chi
        assert_eq!(jets[0].coeff(&[0]), x.scale(&gq("-2i")).truncated(8));
        // quadric: all higher jets vanish
        for k in 2..=5 {
            let jk = s.q_jets_tree(k, 8).unwrap();
            assert!(jk[0].is_zero(), "Q_z^{k} should vanish on the quadric");
        }
    }

    #[test]
    fn q_jets_second_order_quartic_matches_formula() {
        let s = quartic();
        let jets = s.q_jets_tree(2, 8).unwrap();
        let b = s.blocks;
        let x = TruncatedSeries::var(b, b.chi(0));
        // Q_{z^2}(0, zeta-bar) = -4i chi^2
        assert_eq!(
            jets[0].coeff(&[0, 0]),
            x.pow(2).scale(&gq("-4i")).truncated(8)
        );
        // agrees with the implicit-solve oracle
        let oracle = s.q_jets_from_solver(2, 8).unwrap();
        assert_eq!(jets[0], oracle[0]);
    }

    #[test]
    fn k2_three_term_structure_with_w_squared() {
        // Im w = |z|^2 + (Re w)^2: rho_{w^2}(0, zeta-bar) = 1/2 is the only
        // higher w-derivative; the order-2 jet assembles from the three tree
        // summands, the doubled-sibling one entering with its 1/2 symmetry
        // factor, and equals 4i chi^2 by the implicit solve
        let s = complexify(
            "wsq".to_string(),
            b11(),
            10,
            &[
                RealTerm { coef: gq("1"), alpha: vec![1], mu: vec![1], s: vec![0], comp: 0 },
                RealTerm { coef: gq("1"), alpha: vec![0], mu: vec![0], s: vec![2], comp: 0 },
            ],
        )
        .unwrap();
        let b = s.blocks;
        let x = TruncatedSeries::var(b, b.chi(0));
        let jets = s.q_jets_tree(2, 8).unwrap();
        assert_eq!(jets[0].coeff(&[0, 0]), x.pow(2).scale(&gq("4i")).truncated(8));
        let oracle = s.q_jets_from_solver(2, 8).unwrap();
        assert_eq!(jets[0].coeff(&[0, 0]).truncated(6), oracle[0].coeff(&[0, 0]).truncated(6));
        // hand assembly of the three summands
        let table = s.derivative_table(2, 8).unwrap();
        let rho_z = table.entry(0, &[1], &[0]).unwrap().clone();
        let rho_zz = table.entry(0, &[2], &[0]).unwrap().clone();
        let rho_zw = table.entry(0, &[1], &[1]).unwrap().clone();
        let rho_ww = table.entry(0, &[0], &[2]).unwrap().clone();
        let neg_rho_w_inv = table.entry(0, &[0], &[1]).unwrap().neg().inverse(8).unwrap();
        let first = rho_zz.mul(&neg_rho_w_inv);
        // partition product of two 1-forms on the diagonal doubles
        let qz = rho_z.mul(&neg_rho_w_inv);
        let second = rho_zw.mul(&neg_rho_w_inv).mul(&qz).scale(&gq("2"));
        let third = rho_ww
            .mul(&neg_rho_w_inv)
            .mul(&qz.pow(2))
            .scale(&gq("2"))
            .scale(&gq("1/2"));
        let assembled = first.add(&second).add(&third);
        assert_eq!(jets[0].coeff(&[0, 0]).truncated(6), assembled.truncated(6));
    }

    #[test]
    fn q_jets_tree_matches_oracle_small_random() {
        for seed in 0..3u64 {
            let b = VarBlocks::new(2, 1);
            let z1 = TruncatedSeries::var(b, b.z(0));
            let z2 = TruncatedSeries::var(b, b.z(1));
            let x1 = TruncatedSeries::var(b, b.chi(0));
            let x2 = TruncatedSeries::var(b, b.chi(1));
            let w = TruncatedSeries::var(b, b.w(0));
            let t = TruncatedSeries::var(b, b.tau(0));
            let c1 = GaussianRational::from_int(1 + (seed % 3) as i64);
            let c2 = GaussianRational::of(0, 1, (seed % 2) as i64 + 1, 1);
            let rho = w
                .sub(&t)
                .scale(&gq("-1/2i"))
                .add(&z1.mul(&x1))
                .add(&z2.mul(&x2))
                .add(&z1.pow(2).mul(&x2.pow(2)).scale(&c1))
                .add(&z1.mul(&z2).mul(&x1).mul(&w).scale(&c2));
            let s = SurfaceSpec::new(format!("rnd{seed}"), b, vec![rho], 8, SourceForm::Complex)
                .unwrap();
            for k in 1..=3u32 {
                let tree = s.q_jets_tree(k, 6).unwrap();
                let oracle = s.q_jets_from_solver(k, 6).unwrap();
                assert_eq!(tree[0], oracle[0], "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn q_jets_highcodim_matches_oracle() {
        let b = VarBlocks::new(1, 2);
        let z = TruncatedSeries::var(b, b.z(0));
        let x = TruncatedSeries::var(b, b.chi(0));
        let w1 = TruncatedSeries::var(b, b.w(0));
        let w2 = TruncatedSeries::var(b, b.w(1));
        let t1 = TruncatedSeries::var(b, b.tau(0));
        let t2 = TruncatedSeries::var(b, b.tau(1));
        let rho1 = w1
            .sub(&t1)
            .scale(&gq("-1/2i"))
            .add(&z.mul(&x))
            .add(&z.pow(2).mul(&x).mul(&w2).scale(&gq("2")));
        let rho2 = w2
            .sub(&t2)
            .scale(&gq("-1/2i"))
            .add(&z.pow(2).mul(&x.pow(2)))
            .add(&z.mul(&x.pow(2)).mul(&w1).scale(&gq("1-i")));
        let s = SurfaceSpec::new(
            "d2".to_string(),
            b,
            vec![rho1, rho2],
            8,
            SourceForm::Complex,
        )
        .unwrap();
        for k in 1..=3u32 {
            let rec = s.q_jets_tree(k, 5).unwrap();
            let oracle = s.q_jets_from_solver(k, 5).unwrap();
            for i in 0..2 {
                assert_eq!(rec[i], oracle[i], "component {i} order {k}");
            }
        }
        // head-term structure: remainder clears with det^power
        let parts = s.q_jets_highcodim(2, 5).unwrap();
        let head_num = parts.head_numerator(2, 5).unwrap();
        let jets = parts.jets(2, 5).unwrap();
        let det_inv = parts.det.inverse(5).unwrap();
        let mut inv_pow = TruncatedSeries::one(b).truncated(5);
        for _ in 0..parts.powers[1] {
            inv_pow = inv_pow.mul(&det_inv);
        }
        for i in 0..2 {
            let head = head_num[i].scale_series(&inv_pow);
            let remainder = jets[i].sub(&head);
            let remainder_num = parts.numerators[1][i].sub(&head_num[i]);
            let mut det_pow = TruncatedSeries::one(b).truncated(5);
            for _ in 0..parts.powers[1] {
                det_pow = det_pow.mul(&parts.det);
            }
            assert_eq!(
                remainder.scale_series(&det_pow).truncated(3),
                remainder_num.truncated(3)
            );
        }
    }

    #[test]
    fn distinguished_restriction_normalized_surface() {
        // Im w = |z1|^2 + |z2|^2 + Re z1^2 zbar2^2; I = {1}
        let b = VarBlocks::new(2, 1);
        let s = complexify(
            "norm".to_string(),
            b,
            10,
            &[
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![1, 0],
                    mu: vec![1, 0],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![0, 1],
                    mu: vec![0, 1],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1/2"),
                    alpha: vec![2, 0],
                    mu: vec![0, 2],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1/2"),
                    alpha: vec![0, 2],
                    mu: vec![2, 0],
                    s: vec![0],
                    comp: 0,
                },
            ],
        )
        .unwrap();
        let subset = IndexSubset::new(2, vec![0]).unwrap();
        // the solved parameters must be identically zero here
        let phi = s.distinguished_solution(&subset, 8).unwrap();
        assert!(phi[0].1.is_zero());
        let table = s.restrict_distinguished(&subset, 2, 8).unwrap();
        // entry for beta = (2,0): derivative of (1/2) z1^2 chi2^2 is chi2^2,
        // and it only involves chi2 after restriction
        let x2 = TruncatedSeries::var(b, b.chi(1));
        assert_eq!(table.entry(0, &[2, 0], &[0]).unwrap(), &x2.pow(2));
        assert!(!table.entry(0, &[2, 0], &[0]).unwrap().depends_on(b.chi(0)));
        // restriction equals plain chi_1 <- 0 substitution on the full table
        let full = s.derivative_table(2, 8).unwrap();
        for (key, val) in table.entries() {
            let direct = full
                .entry(key.0, &key.1, &key.2)
                .unwrap()
                .set_vars_zero(&[b.chi(0)]);
            assert_eq!(&direct, val);
        }
    }

    #[test]
    fn quadric_distinguished_table_still_flat() {
        // restricting the flat model leaves all higher entries zero
        let b = VarBlocks::new(2, 1);
        let q2 = complexify(
            "quadric2".to_string(),
            b,
            8,
            &[
                RealTerm { coef: gq("1"), alpha: vec![1, 0], mu: vec![1, 0], s: vec![0], comp: 0 },
                RealTerm { coef: gq("1"), alpha: vec![0, 1], mu: vec![0, 1], s: vec![0], comp: 0 },
            ],
        )
        .unwrap();
        let subset = IndexSubset::new(2, vec![1]).unwrap();
        let table = q2.restrict_distinguished(&subset, 3, 8).unwrap();
        for ((_, beta, _), series) in table.entries() {
            if crate::series::multiindex_total(beta) >= 2 {
                assert!(series.is_zero(), "entry for beta {beta:?} must vanish");
            }
        }
    }

    #[test]
    fn degenerate_block_detected() {
        // Im w = z1 zbar2 + z2 zbar1: Q_{z1}(0, zeta-bar) = -2i chi2 has no
        // chi1 dependence, so the I = {1} block Jacobian is singular
        let b = VarBlocks::new(2, 1);
        let s = complexify(
            "offdiag".to_string(),
            b,
            8,
            &[
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![1, 0],
                    mu: vec![0, 1],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![0, 1],
                    mu: vec![1, 0],
                    s: vec![0],
                    comp: 0,
                },
            ],
        )
        .unwrap();
        let subset = IndexSubset::new(2, vec![0]).unwrap();
        assert!(matches!(
            s.distinguished_solution(&subset, 6),
            Err(SegreError::DegenerateBlock)
        ));
    }

    #[test]
    fn map_spec_normalization_checks() {
        let b = b11();
        let z = TruncatedSeries::var(b, b.z(0));
        let w = TruncatedSeries::var(b, b.w(0));
        // F_z(0) != id
        assert!(MapSpec::new(b, vec![z.scale(&gq("2"))], vec![w.clone()], false).is_err());
        // F_w(0) != 0
        assert!(MapSpec::new(b, vec![z.add(&w)], vec![w.clone()], false).is_err());
        // H(0) != 0
        assert!(MapSpec::new(
            b,
            vec![z.add(&TruncatedSeries::one(b))],
            vec![w.clone()],
            false
        )
        .is_err());
        // G_z(0) != 0 under the extra normalization
        assert!(MapSpec::new(b, vec![z.clone()], vec![w.add(&z)], true).is_err());
        assert!(MapSpec::new(b, vec![z.clone()], vec![w.add(&z)], false).is_ok());
    }

    #[test]
    fn tree_and_highcodim_routes_agree_in_codimension_one() {
        // d = 1: the determinant recursion degenerates to the tree formula
        let s = quartic();
        for k in 1..=3u32 {
            let tree = s.q_jets_tree(k, 6).unwrap();
            let rec = s.q_jets_highcodim(k, 6).unwrap().jets(k, 6).unwrap();
            assert_eq!(tree[0].truncated(6), rec[0].truncated(6));
        }
    }

    #[test]
    fn index_subset_must_be_proper() {
        assert!(IndexSubset::new(2, vec![0, 1]).is_err());
        assert!(IndexSubset::new(2, vec![2]).is_err());
        assert!(IndexSubset::new(2, vec![0]).is_ok());
    }

    #[test]
    fn transform_identity_map() {
        let s = quartic();
        let b = s.blocks;
        let z = TruncatedSeries::var(b, b.z(0));
        let w = TruncatedSeries::var(b, b.w(0));
        let h = MapSpec::new(b, vec![z], vec![w], true).unwrap();
        let jets = transform_jets(&h, &s, 3, 6, None).unwrap();
        for (alpha, q) in &jets.q_jets {
            let qp = &jets.qprime_jets[alpha];
            assert_eq!(q[0], qp[0], "alpha {alpha:?}");
        }
    }

    #[test]
    fn quartic_embeds_in_three_space_quadric() {
        // H(z, w) = (z, z^2, w) maps Im w = |z|^2 + |z|^4 into the quadric
        // Im w' = |z'_1|^2 + |z'_2|^2 in C^3
        let s = quartic();
        let b = s.blocks;
        let tb = VarBlocks::new(2, 1);
        let target = complexify(
            "sphere3".to_string(),
            tb,
            10,
            &[
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![1, 0],
                    mu: vec![1, 0],
                    s: vec![0],
                    comp: 0,
                },
                RealTerm {
                    coef: gq("1"),
                    alpha: vec![0, 1],
                    mu: vec![0, 1],
                    s: vec![0],
                    comp: 0,
                },
            ],
        )
        .unwrap();
        let z = TruncatedSeries::var(b, b.z(0));
        let w = TruncatedSeries::var(b, b.w(0));
        let resid = embedding_residual(&s, &[z.clone(), z.pow(2)], &[w], &target, 8).unwrap();
        assert!(resid[0].is_zero(), "residual {}", resid[0]);
    }

    #[test]
    fn multiindex_enumeration() {
        assert_eq!(
            multiindices_of_exact_total(2, 2),
            vec![vec![0, 2], vec![1, 1], vec![2, 0]]
        );
        assert_eq!(multiindices_of_total(1, 3).len(), 4);
    }
}
