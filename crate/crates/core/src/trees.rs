//! Marked rooted trees: every vertex carries a mark s(a) >= 0 subject to
//! 2 s(a) + l(a) >= 2 (l = number of children), and a tree with total mark k
//! contributes one summand to the jet formula expressing Q_{z^k} through the
//! derivatives of the defining function. Trees are kept in a canonical form
//! (children recursively canonicalized, then sorted), so isomorphic marked
//! trees coincide structurally.

use crate::multilinear::SymForm;
use crate::series::TruncatedSeries;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    NonUnitRhoW,
    MissingTableEntry { s: u32, l: u32 },
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::NonUnitRhoW => {
                write!(
                    f,
                    "rho_w(0, .) has zero constant term and cannot be inverted"
                )
            }
            TreeError::MissingTableEntry { s, l } => {
                write!(
                    f,
                    "derivative table lacks the entry for z-order {s}, w-order {l}"
                )
            }
        }
    }
}

impl std::error::Error for TreeError {}

/// A rooted tree with a nonnegative integer mark at every vertex, stored in
/// canonical form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct MarkedTree {
    mark: u32,
    children: Vec<MarkedTree>,
}

impl MarkedTree {
    /// Builds a tree and canonicalizes the children ordering by
    /// (total mark, serialized structure).
    pub fn new(mark: u32, mut children: Vec<MarkedTree>) -> Self {
        children
            .sort_by(|a, b| (a.total_mark(), a.serialize()).cmp(&(b.total_mark(), b.serialize())));
        MarkedTree { mark, children }
    }

    pub fn leaf(mark: u32) -> Self {
        MarkedTree {
            mark,
            children: Vec::new(),
        }
    }

    pub fn mark(&self) -> u32 {
        self.mark
    }

    pub fn children(&self) -> &[MarkedTree] {
        &self.children
    }

    /// Number of outgoing arrows at the root.
    pub fn arity(&self) -> usize {
        self.children.len()
    }

    /// Total number of vertices |T|.
    pub fn vertex_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(MarkedTree::vertex_count)
            .sum::<usize>()
    }

    /// Sum of the marks over all vertices.
    pub fn total_mark(&self) -> u32 {
        self.mark
            + self
                .children
                .iter()
                .map(MarkedTree::total_mark)
                .sum::<u32>()
    }

    /// Checks 2 s(a) + l(a) >= 2 at every vertex.
    pub fn satisfies_mark_condition(&self) -> bool {
        2 * self.mark + self.children.len() as u32 >= 2
            && self
                .children
                .iter()
                .all(MarkedTree::satisfies_mark_condition)
    }

    /// Compact canonical text form: mark, then children in parentheses.
    pub fn serialize(&self) -> String {
        if self.children.is_empty() {
            self.mark.to_string()
        } else {
            let inner: Vec<String> = self.children.iter().map(MarkedTree::serialize).collect();
            format!("{}({})", self.mark, inner.join(","))
        }
    }

    /// All (mark, arity) pairs of the tree's vertices, root first.
    pub fn vertices(&self) -> Vec<(u32, u32)> {
        let mut out = vec![(self.mark, self.children.len() as u32)];
        for c in &self.children {
            out.extend(c.vertices());
        }
        out
    }

    /// Number of automorphisms of the marked tree: the product over all
    /// vertices of the factorials of the multiplicities of identical child
    /// subtrees. Canonical form makes identical children adjacent.
    pub fn automorphisms(&self) -> u128 {
        let mut aut: u128 = 1;
        let mut run = 1u128;
        for pair in self.children.windows(2) {
            if pair[0] == pair[1] {
                run += 1;
            } else {
                aut *= factorial(run);
                run = 1;
            }
        }
        aut *= factorial(run);
        for c in &self.children {
            aut *= c.automorphisms();
        }
        aut
    }
}

fn factorial(n: u128) -> u128 {
    (2..=n).product::<u128>().max(1)
}

impl fmt::Display for MarkedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.serialize())
    }
}

/// Enumerates all isomorphism classes of marked trees with total mark `k`
/// satisfying the mark condition. The recursion builds a table level by
/// level: pick a root mark r, then a multiset of admissible subtrees whose
/// totals sum to k - r, requiring 2r + #children >= 2 at the root.
pub fn enumerate_marked_trees(k: u32) -> Vec<MarkedTree> {
    assert!(k >= 1, "total mark must be positive");
    // table[t] = all admissible trees of total mark t
    let mut table: Vec<Vec<MarkedTree>> = vec![Vec::new()];
    for t in 1..=k {
        let mut level: Vec<MarkedTree> = Vec::new();
        for r in 0..=t {
            let rest = t - r;
            // candidate subtrees, larger totals first, so multisets come out
            // in non-increasing order and each is produced exactly once;
            // a child can carry at most t-1 of the total (a mark-0 root
            // needs at least two children, so one child never takes all of t)
            let mut pool: Vec<&MarkedTree> = Vec::new();
            for tt in (1..=rest.min(t - 1)).rev() {
                pool.extend(table[tt as usize].iter());
            }
            let mut stack: Vec<MarkedTree> = Vec::new();
            collect_multisets(&pool, rest, 0, &mut stack, &mut |children| {
                if 2 * r + children.len() as u32 >= 2 {
                    level.push(MarkedTree::new(r, children.to_vec()));
                }
            });
        }
        level.sort();
        level.dedup();
        table.push(level);
    }
    table.pop().unwrap()
}

fn collect_multisets(
    pool: &[&MarkedTree],
    remaining: u32,
    start: usize,
    stack: &mut Vec<MarkedTree>,
    emit: &mut impl FnMut(&[MarkedTree]),
) {
    if remaining == 0 {
        emit(stack);
        return;
    }
    for i in start..pool.len() {
        let t = pool[i].total_mark();
        if t > remaining {
            continue;
        }
        stack.push(pool[i].clone());
        collect_multisets(pool, remaining - t, i, stack, emit);
        stack.pop();
    }
}

/// Supplies the restricted derivative data the tree formula consumes:
/// rho_{z^s w^l}(0, zeta-bar) as a symmetric s-linear form, and the scalar
/// series rho_w(0, zeta-bar).
pub trait DerivativeSource {
    /// The s-linear form whose coefficient at a basis tuple is the partial
    /// derivative with the tuple's multiindex in z and order l in w.
    fn rho_form(&self, s: u32, l: u32) -> Result<SymForm, TreeError>;
    /// rho_w(0, zeta-bar) restricted to the Segre parametrization.
    fn rho_w_series(&self) -> Result<TruncatedSeries, TreeError>;
    /// Truncation order at which series inverses are expanded.
    fn working_order(&self) -> u32;
}

/// The product term of one marked tree: over every vertex a, the factor
/// rho_{z^{s(a)} w^{l(a)}} / (-rho_w), multiplied out with the partition
/// product and divided by the number of automorphisms of the marked tree
/// (identical sibling subtrees would otherwise be double-counted when
/// summing over isomorphism classes; the convention is pinned by exact
/// agreement with the implicit-solve jets). The result is a symmetric form
/// of degree equal to the total mark.
pub fn tree_term<S: DerivativeSource>(tree: &MarkedTree, table: &S) -> Result<SymForm, TreeError> {
    let rho_w = table.rho_w_series()?;
    if rho_w.constant_term().is_zero() {
        return Err(TreeError::NonUnitRhoW);
    }
    let neg_inv = rho_w
        .neg()
        .inverse(table.working_order())
        .map_err(|_| TreeError::NonUnitRhoW)?;
    let mut acc: Option<SymForm> = None;
    for (s, l) in tree.vertices() {
        let factor = table.rho_form(s, l)?.scale_series(&neg_inv);
        acc = Some(match acc {
            None => factor,
            Some(prev) => prev
                .partition_product(&factor)
                .expect("tree factors share one dimension"),
        });
    }
    let term = acc.expect("a tree has at least one vertex");
    let aut = tree.automorphisms();
    if aut == 1 {
        Ok(term)
    } else {
        let inv_aut = crate::exactnum::GaussianRational::from_u128(aut)
            .inv()
            .expect("factorial is nonzero");
        Ok(term.scale(&inv_aut))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn counts_small() {
        assert_eq!(enumerate_marked_trees(1).len(), 1);
        assert_eq!(enumerate_marked_trees(2).len(), 3);
        assert_eq!(enumerate_marked_trees(3).len(), 10);
    }

    #[test]
    fn k1_is_single_marked_vertex() {
        let ts = enumerate_marked_trees(1);
        assert_eq!(ts, vec![MarkedTree::leaf(1)]);
    }

    #[test]
    fn all_enumerated_trees_are_admissible() {
        for k in 1..=5u32 {
            for t in enumerate_marked_trees(k) {
                assert!(
                    t.satisfies_mark_condition(),
                    "tree {t} violates the mark condition"
                );
                assert_eq!(t.total_mark(), k);
                assert!(
                    t.vertex_count() <= (2 * k - 1) as usize,
                    "vertex bound at k={k}"
                );
                // sum of arities = |T| - 1
                let arity_sum: u32 = t.vertices().iter().map(|&(_, l)| l).sum();
                assert_eq!(arity_sum as usize, t.vertex_count() - 1);
            }
        }
    }

    #[test]
    fn vertex_bound_attained() {
        for k in 1..=5u32 {
            let max = enumerate_marked_trees(k)
                .iter()
                .map(MarkedTree::vertex_count)
                .max()
                .unwrap();
            assert_eq!(max, (2 * k - 1) as usize, "max |T| at k={k}");
        }
    }

    #[test]
    fn no_duplicates() {
        for k in 1..=5u32 {
            let ts = enumerate_marked_trees(k);
            let set: BTreeSet<_> = ts.iter().cloned().collect();
            assert_eq!(set.len(), ts.len());
        }
    }

    /// Canonical integer code of a marked rooted tree: [mark, #children]
    /// followed by the children's codes sorted lexicographically. Two marked
    /// trees are isomorphic iff their codes agree.
    fn canonical_code(marks: &[u32], children: &[Vec<usize>], v: usize) -> Vec<u32> {
        let mut child_codes: Vec<Vec<u32>> = children[v]
            .iter()
            .map(|&c| canonical_code(marks, children, c))
            .collect();
        child_codes.sort();
        let mut code = vec![marks[v], children[v].len() as u32];
        for c in child_codes {
            code.extend(c);
        }
        code
    }

    fn code_of(tree: &MarkedTree) -> Vec<u32> {
        let mut code = vec![tree.mark(), tree.arity() as u32];
        let mut child_codes: Vec<Vec<u32>> = tree.children().iter().map(code_of).collect();
        child_codes.sort();
        for c in child_codes {
            code.extend(c);
        }
        code
    }

    /// Independent brute-force generator: every rooted tree on v vertices has
    /// a BFS labeling with a nondecreasing parent array p (p[i] < i), so
    /// enumerating those arrays covers all shapes; all markings with the
    /// required total are filtered by the mark condition and deduped by
    /// canonical code.
    fn brute_force(k: u32) -> BTreeSet<Vec<u32>> {
        fn compositions(total: u32, parts: usize, out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>) {
            if parts == 1 {
                cur.push(total);
                out.push(cur.clone());
                cur.pop();
                return;
            }
            for first in 0..=total {
                cur.push(first);
                compositions(total - first, parts - 1, out, cur);
                cur.pop();
            }
        }
        let mut found = BTreeSet::new();
        let max_vertices = (2 * k - 1) as usize;
        for v in 1..=max_vertices {
            // nondecreasing parent arrays for vertices 1..v-1
            let mut parent_arrays: Vec<Vec<usize>> = vec![vec![]];
            for i in 1..v {
                let mut next = Vec::new();
                for pa in &parent_arrays {
                    let lo = pa.last().copied().unwrap_or(0);
                    for p in lo..i {
                        let mut q = pa.clone();
                        q.push(p);
                        next.push(q);
                    }
                }
                parent_arrays = next;
            }
            let mut all_marks = Vec::new();
            compositions(k, v, &mut all_marks, &mut Vec::new());
            for pa in &parent_arrays {
                let mut children: Vec<Vec<usize>> = vec![Vec::new(); v];
                for (i, &p) in pa.iter().enumerate() {
                    children[p].push(i + 1);
                }
                for marks in &all_marks {
                    let ok = (0..v).all(|u| 2 * marks[u] + children[u].len() as u32 >= 2);
                    if ok {
                        found.insert(canonical_code(marks, &children, 0));
                    }
                }
            }
        }
        found
    }

    #[test]
    fn brute_force_agreement() {
        for k in 1..=5u32 {
            let fast: BTreeSet<Vec<u32>> = enumerate_marked_trees(k).iter().map(code_of).collect();
            assert_eq!(
                fast.len(),
                enumerate_marked_trees(k).len(),
                "fast list has no iso dups"
            );
            let slow = brute_force(k);
            assert_eq!(fast, slow, "enumeration mismatch at k={k}");
        }
    }

    #[test]
    fn k2_trees_match_known_shapes() {
        let ts = enumerate_marked_trees(2);
        let expected: BTreeSet<String> = ["2", "1(1)", "0(1,1)"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let got: BTreeSet<String> = ts.iter().map(MarkedTree::serialize).collect();
        assert_eq!(got, expected);
    }
}
