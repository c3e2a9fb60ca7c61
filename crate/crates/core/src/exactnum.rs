//! Exact arithmetic over the Gaussian rationals Q(i) and exact dense linear
//! algebra (rank, nullspace, determinant) built on fraction-free elimination.
//!
//! Every other module stores its coefficients as [`GaussianRational`]; all
//! relation searches reduce to [`ExactMatrix::nullspace`].

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::str::FromStr;

/// Errors raised by exact arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactNumError {
    DivisionByZero,
    ParseError(String),
}

impl fmt::Display for ExactNumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactNumError::DivisionByZero => write!(f, "division by zero in Q(i)"),
            ExactNumError::ParseError(s) => write!(f, "invalid Gaussian-rational literal: {s}"),
        }
    }
}

impl std::error::Error for ExactNumError {}

/// An element a + b*i of Q(i), both parts stored as reduced rationals with
/// positive denominators (num-rational normalizes on construction, so zero
/// has the unique representation 0/1 + 0/1*i).
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussianRational { re, im }
    }

    pub fn zero() -> Self {
        GaussianRational::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        GaussianRational::new(BigRational::one(), BigRational::zero())
    }

    /// The imaginary unit i.
    pub fn i() -> Self {
        GaussianRational::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        GaussianRational::new(
            BigRational::from_integer(BigInt::from(n)),
            BigRational::zero(),
        )
    }

    pub fn from_u128(n: u128) -> Self {
        GaussianRational::new(
            BigRational::from_integer(BigInt::from(n)),
            BigRational::zero(),
        )
    }

    /// Real rational num/den. Panics if den == 0.
    pub fn rational(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        GaussianRational::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }

    /// Full constructor (re_num/re_den) + (im_num/im_den)*i. Panics on zero denominators.
    pub fn of(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        assert!(re_den != 0 && im_den != 0, "zero denominator");
        GaussianRational::new(
            BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
            BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussianRational::new(self.re.clone(), -self.im.clone())
    }

    /// |z|^2 = z * conj(z), a nonnegative rational.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse; errors on zero.
    pub fn inv(&self) -> Result<Self, ExactNumError> {
        if self.is_zero() {
            return Err(ExactNumError::DivisionByZero);
        }
        let n = self.norm_sqr();
        Ok(GaussianRational::new(&self.re / &n, -&self.im / &n))
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, ExactNumError> {
        Ok(self * &rhs.inv()?)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = GaussianRational::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }
}

/// The four field operations, as a single dispatchable entry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Exact field arithmetic in Q(i); `Div` errors when `b` is zero.
pub fn gq_arith(
    a: &GaussianRational,
    b: &GaussianRational,
    op: ArithOp,
) -> Result<GaussianRational, ExactNumError> {
    match op {
        ArithOp::Add => Ok(a + b),
        ArithOp::Sub => Ok(a - b),
        ArithOp::Mul => Ok(a * b),
        ArithOp::Div => a.checked_div(b),
    }
}

impl std::ops::Add for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl std::ops::Sub for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl std::ops::Mul for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl std::ops::Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }
}

impl std::ops::Add for GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: GaussianRational) -> GaussianRational {
        &self + &rhs
    }
}

impl std::ops::Sub for GaussianRational {
    type Output = GaussianRational;
    fn sub(self, rhs: GaussianRational) -> GaussianRational {
        &self - &rhs
    }
}

impl std::ops::Mul for GaussianRational {
    type Output = GaussianRational;
    fn mul(self, rhs: GaussianRational) -> GaussianRational {
        &self * &rhs
    }
}

impl std::ops::Neg for GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        -&self
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for GaussianRational {
    /// Renders in the text literal grammar: `<rat>`, `<rat>i`, `<rat>+<rat>i`,
    /// with `i` / `-i` for unit imaginary parts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let im_str = |im: &BigRational| -> String {
            if im.is_one() {
                "i".to_string()
            } else if (-im).is_one() {
                "-i".to_string()
            } else {
                format!("{}i", fmt_rat(im))
            }
        };
        if self.im.is_zero() {
            write!(f, "{}", fmt_rat(&self.re))
        } else if self.re.is_zero() {
            write!(f, "{}", im_str(&self.im))
        } else if self.im.is_positive() {
            write!(f, "{}+{}", fmt_rat(&self.re), im_str(&self.im))
        } else {
            write!(f, "{}{}", fmt_rat(&self.re), im_str(&self.im))
        }
    }
}

fn parse_rat(s: &str) -> Result<BigRational, ExactNumError> {
    let err = || ExactNumError::ParseError(s.to_string());
    if let Some((num, den)) = s.split_once('/') {
        if den.starts_with('+') || den.starts_with('-') {
            return Err(err());
        }
        let n = BigInt::from_str(num).map_err(|_| err())?;
        let d = BigInt::from_str(den).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        Ok(BigRational::new(n, d))
    } else {
        let n = BigInt::from_str(s).map_err(|_| err())?;
        Ok(BigRational::from_integer(n))
    }
}

impl FromStr for GaussianRational {
    type Err = ExactNumError;

    /// Parses the literal grammar `<rat> | [<rat>]("+"|"-")<rat>"i" | <rat>"i" | "i" | "-i"`,
    /// e.g. `-1/2i`, `3/4+2/5i`, `7`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || ExactNumError::ParseError(s.to_string());
        if s.is_empty() {
            return Err(err());
        }
        if let Some(body) = s.strip_suffix('i') {
            // Split off an optional real part at the last interior sign.
            let split_at = body
                .char_indices()
                .skip(1)
                .filter(|&(_, c)| c == '+' || c == '-')
                .map(|(idx, _)| idx)
                .last();
            let (re_part, im_part) = match split_at {
                Some(idx) => (&body[..idx], &body[idx..]),
                None => ("", body),
            };
            let re = if re_part.is_empty() {
                BigRational::zero()
            } else {
                parse_rat(re_part)?
            };
            let im = match im_part {
                "" | "+" => BigRational::one(),
                "-" => -BigRational::one(),
                m => parse_rat(m)?,
            };
            Ok(GaussianRational::new(re, im))
        } else {
            Ok(GaussianRational::new(parse_rat(s)?, BigRational::zero()))
        }
    }
}

/// Gaussian integer, the working element of the fraction-free elimination.
#[derive(Clone, PartialEq, Eq, Debug)]
struct Gint {
    re: BigInt,
    im: BigInt,
}

impl Gint {
    fn zero() -> Self {
        Gint {
            re: BigInt::zero(),
            im: BigInt::zero(),
        }
    }

    fn one() -> Self {
        Gint {
            re: BigInt::one(),
            im: BigInt::zero(),
        }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn mul(&self, rhs: &Gint) -> Gint {
        Gint {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }

    fn sub(&self, rhs: &Gint) -> Gint {
        Gint {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }

    /// Exact division in Z[i]; panics if not divisible (the Bareiss scheme
    /// guarantees divisibility at every step it is used).
    fn exact_div(&self, rhs: &Gint) -> Gint {
        let n = &rhs.re * &rhs.re + &rhs.im * &rhs.im;
        assert!(!n.is_zero(), "division by zero Gaussian integer");
        // self * conj(rhs) / |rhs|^2
        let re = &self.re * &rhs.re + &self.im * &rhs.im;
        let im = &self.im * &rhs.re - &self.re * &rhs.im;
        let (qr, rr) = re.div_rem(&n);
        let (qi, ri) = im.div_rem(&n);
        assert!(rr.is_zero() && ri.is_zero(), "inexact division in Z[i]");
        Gint { re: qr, im: qi }
    }

    fn to_rational(&self) -> GaussianRational {
        GaussianRational::new(
            BigRational::from_integer(self.re.clone()),
            BigRational::from_integer(self.im.clone()),
        )
    }
}

/// Dense matrix of Gaussian rationals, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExactMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<GaussianRational>,
}

impl ExactMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<GaussianRational>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must be rows*cols");
        ExactMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        ExactMatrix::new(rows, cols, vec![GaussianRational::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ExactMatrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, GaussianRational::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<GaussianRational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
        }
        ExactMatrix::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn get(&self, r: usize, c: usize) -> &GaussianRational {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: GaussianRational) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn mul_vec(&self, v: &[GaussianRational]) -> Vec<GaussianRational> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let mut acc = GaussianRational::zero();
                for c in 0..self.cols {
                    if !self.get(r, c).is_zero() && !v[c].is_zero() {
                        acc = &acc + &(self.get(r, c) * &v[c]);
                    }
                }
                acc
            })
            .collect()
    }

    /// Clears denominators row by row (row scaling by a positive integer
    /// leaves rank, nullspace and row space unchanged).
    fn to_gint_rows(&self) -> Vec<Vec<Gint>> {
        (0..self.rows)
            .map(|r| {
                let mut lcm = BigInt::one();
                for c in 0..self.cols {
                    let e = self.get(r, c);
                    lcm = lcm.lcm(e.re.denom());
                    lcm = lcm.lcm(e.im.denom());
                }
                (0..self.cols)
                    .map(|c| {
                        let e = self.get(r, c);
                        let re = e.re.numer() * (&lcm / e.re.denom());
                        let im = e.im.numer() * (&lcm / e.im.denom());
                        Gint { re, im }
                    })
                    .collect()
            })
            .collect()
    }

    /// Fraction-free (Bareiss) forward elimination over Z[i].
    /// Pivot choice is deterministic: columns left to right, first nonzero
    /// row at or below the pivot row. Returns the echelon rows, the pivot
    /// (row, col) list, and the row-swap sign.
    fn bareiss(&self) -> (Vec<Vec<Gint>>, Vec<(usize, usize)>, i32) {
        let mut a = self.to_gint_rows();
        let m = self.rows;
        let n = self.cols;
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut prev = Gint::one();
        let mut sign = 1i32;
        let mut pr = 0usize;
        for col in 0..n {
            if pr >= m {
                break;
            }
            let Some(found) = (pr..m).find(|&r| !a[r][col].is_zero()) else {
                continue;
            };
            if found != pr {
                a.swap(found, pr);
                sign = -sign;
            }
            let pivot = a[pr][col].clone();
            for i in (pr + 1)..m {
                let factor = std::mem::replace(&mut a[i][col], Gint::zero());
                for j in (col + 1)..n {
                    let t = pivot.mul(&a[i][j]).sub(&factor.mul(&a[pr][j]));
                    a[i][j] = t.exact_div(&prev);
                }
            }
            pivots.push((pr, col));
            prev = pivot;
            pr += 1;
        }
        (a, pivots, sign)
    }

    /// Reduced row echelon form of the pivot rows, as rationals, plus the
    /// pivot column list.
    pub fn rref(&self) -> (Vec<Vec<GaussianRational>>, Vec<usize>) {
        let (a, pivots, _) = self.bareiss();
        let n = self.cols;
        let mut rows: Vec<Vec<GaussianRational>> = pivots
            .iter()
            .map(|&(r, _)| a[r].iter().map(Gint::to_rational).collect())
            .collect();
        let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
        // Normalize pivots to 1 and back-eliminate above.
        for p in (0..rows.len()).rev() {
            let col = pivot_cols[p];
            let inv = rows[p][col].inv().expect("pivot is nonzero");
            for j in col..n {
                rows[p][j] = &rows[p][j] * &inv;
            }
            for q in 0..p {
                if rows[q][col].is_zero() {
                    continue;
                }
                let factor = rows[q][col].clone();
                for j in col..n {
                    let t = &factor * &rows[p][j];
                    rows[q][j] = &rows[q][j] - &t;
                }
            }
        }
        (rows, pivot_cols)
    }

    /// Rank over Q(i); rank + |nullspace| == cols.
    pub fn rank(&self) -> usize {
        self.bareiss().1.len()
    }

    /// Canonical basis of {v : Mv = 0}. Each free column yields one basis
    /// vector carrying a leading 1 at that column (reduced-echelon
    /// normalization), so the output is deterministic given M.
    pub fn nullspace(&self) -> Vec<Vec<GaussianRational>> {
        let n = self.cols;
        let (rows, pivot_cols) = self.rref();
        let mut is_pivot = vec![false; n];
        for &c in &pivot_cols {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for fc in 0..n {
            if is_pivot[fc] {
                continue;
            }
            let mut v = vec![GaussianRational::zero(); n];
            v[fc] = GaussianRational::one();
            for (p, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -&rows[p][fc];
            }
            basis.push(v);
        }
        basis
    }

    /// Determinant of a square matrix: the last Bareiss pivot, corrected for
    /// the row scalings applied while clearing denominators.
    pub fn det(&self) -> GaussianRational {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        if self.rows == 0 {
            return GaussianRational::one();
        }
        // Row scalings used by to_gint_rows.
        let mut scale = BigRational::one();
        for r in 0..self.rows {
            let mut lcm = BigInt::one();
            for c in 0..self.cols {
                let e = self.get(r, c);
                lcm = lcm.lcm(e.re.denom());
                lcm = lcm.lcm(e.im.denom());
            }
            scale *= BigRational::from_integer(lcm);
        }
        let (a, pivots, sign) = self.bareiss();
        if pivots.len() < self.rows {
            return GaussianRational::zero();
        }
        let (last_row, last_col) = pivots[pivots.len() - 1];
        let mut d = a[last_row][last_col].to_rational();
        if sign < 0 {
            d = -d;
        }
        let inv_scale = GaussianRational::new(scale, BigRational::zero())
            .inv()
            .expect("positive scaling");
        &d * &inv_scale
    }

    /// Solves Mx = b exactly; returns None when inconsistent. Free variables
    /// are set to zero.
    pub fn solve(&self, b: &[GaussianRational]) -> Option<Vec<GaussianRational>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = ExactMatrix::zero(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, self.cols, b[r].clone());
        }
        let (rows, pivot_cols) = aug.rref();
        if pivot_cols.contains(&self.cols) {
            return None;
        }
        let mut x = vec![GaussianRational::zero(); self.cols];
        for (p, &pc) in pivot_cols.iter().enumerate() {
            x[pc] = rows[p][self.cols].clone();
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gq(s: &str) -> GaussianRational {
        s.parse().unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        // (1/2 + i)(1/2 - i) = 1/4 + 1 = 5/4
        let a = gq("1/2+i");
        let b = gq("1/2-i");
        assert_eq!(&a * &b, gq("5/4"));
        // x + 0 = x
        let x = gq("-7/3+2/9i");
        assert_eq!(&x + &GaussianRational::zero(), x);
        // (2/3 + 1/6 i) / (1/3) = 2 + 1/2 i, confirmed by re-multiplying
        let p = gq("2/3+1/6i");
        let q = gq("1/3");
        let r = p.checked_div(&q).unwrap();
        assert_eq!(r, gq("2+1/2i"));
        assert_eq!(&r * &q, p);
    }

    #[test]
    fn division_by_zero() {
        assert_eq!(
            gq("1").checked_div(&GaussianRational::zero()),
            Err(ExactNumError::DivisionByZero)
        );
        assert_eq!(
            gq_arith(&gq("3i"), &GaussianRational::zero(), ArithOp::Div),
            Err(ExactNumError::DivisionByZero)
        );
    }

    #[test]
    fn literal_grammar_round_trip() {
        for s in [
            "-1/2i",
            "3/4+2/5i",
            "7",
            "i",
            "-i",
            "0",
            "1-i",
            "2-3/4i",
            "-5/7-1/2i",
        ] {
            let v = gq(s);
            let printed = v.to_string();
            assert_eq!(gq(&printed), v, "round trip through {printed}");
        }
        assert_eq!(gq("-1/2i"), GaussianRational::of(0, 1, -1, 2));
        assert_eq!(gq("3/4+2/5i"), GaussianRational::of(3, 4, 2, 5));
        assert_eq!(gq("7"), GaussianRational::from_int(7));
        assert!("1//2".parse::<GaussianRational>().is_err());
        assert!("".parse::<GaussianRational>().is_err());
        assert!("1/0".parse::<GaussianRational>().is_err());
        assert!("1/-2".parse::<GaussianRational>().is_err());
    }

    fn sample(seed: u64) -> GaussianRational {
        // Small deterministic pseudo-random sample.
        let s = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let pick = |k: u64| ((s >> k) % 11) as i64 - 5;
        GaussianRational::of(
            pick(3),
            pick(17).abs().max(1),
            pick(31),
            pick(43).abs().max(1),
        )
    }

    #[test]
    fn field_axioms_random() {
        for seed in 0..40u64 {
            let a = sample(seed);
            let b = sample(seed + 100);
            let c = sample(seed + 200);
            assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            if !a.is_zero() {
                assert_eq!(&a * &a.inv().unwrap(), GaussianRational::one());
            }
            assert_eq!(&a * &b, &b * &a);
        }
    }

    #[test]
    fn nullspace_trivial_and_rank_one() {
        assert!(ExactMatrix::identity(2).nullspace().is_empty());
        let m = ExactMatrix::from_rows(vec![vec![gq("1"), gq("2")], vec![gq("2"), gq("4")]]);
        let ns = m.nullspace();
        assert_eq!(ns, vec![vec![gq("-2"), gq("1")]]);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(ExactMatrix::zero(3, 4).rank(), 0);
        assert_eq!(ExactMatrix::identity(5).rank(), 5);
        let m = ExactMatrix::from_rows(vec![
            vec![gq("1"), gq("0")],
            vec![gq("0"), gq("1")],
            vec![gq("1"), gq("1")],
        ]);
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn nullspace_of_rank_five_matrix() {
        // 6x9 with rank exactly 5: L (6x5, identity on top) times R (5x9,
        // identity on the left).
        let mut l = vec![vec![GaussianRational::zero(); 5]; 6];
        let mut r = vec![vec![GaussianRational::zero(); 9]; 5];
        for i in 0..5 {
            l[i][i] = GaussianRational::one();
            r[i][i] = GaussianRational::one();
        }
        for j in 0..5 {
            l[5][j] = sample(j as u64 + 7);
        }
        for i in 0..5 {
            for j in 5..9 {
                r[i][j] = sample((10 * i + j) as u64);
            }
        }
        let mut prod = ExactMatrix::zero(6, 9);
        for i in 0..6 {
            for j in 0..9 {
                let mut acc = GaussianRational::zero();
                for k in 0..5 {
                    acc = &acc + &(&l[i][k] * &r[k][j]);
                }
                prod.set(i, j, acc);
            }
        }
        assert_eq!(prod.rank(), 5);
        let ns = prod.nullspace();
        assert_eq!(ns.len(), 4);
        for v in &ns {
            for e in prod.mul_vec(v) {
                assert!(e.is_zero());
            }
        }
        assert_eq!(prod.rank() + ns.len(), prod.cols);
    }

    #[test]
    fn nullspace_random_consistency() {
        for seed in 0..10u64 {
            let rows = 3 + (seed % 3) as usize;
            let cols = 4 + (seed % 4) as usize;
            let mut m = ExactMatrix::zero(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m.set(r, c, sample(seed * 131 + (r * cols + c) as u64));
                }
            }
            let ns = m.nullspace();
            assert_eq!(m.rank() + ns.len(), cols);
            for v in &ns {
                for e in m.mul_vec(v) {
                    assert!(e.is_zero());
                }
            }
            // Determinism of the canonical form.
            assert_eq!(ns, m.nullspace());
        }
    }

    #[test]
    fn determinant_and_solve() {
        let m = ExactMatrix::from_rows(vec![vec![gq("1/2"), gq("i")], vec![gq("-i"), gq("3")]]);
        // det = 3/2 - (i)(-i) = 3/2 - 1 = 1/2
        assert_eq!(m.det(), gq("1/2"));
        let b = vec![gq("1"), gq("0")];
        let x = m.solve(&b).unwrap();
        assert_eq!(m.mul_vec(&x), b);
        let singular = ExactMatrix::from_rows(vec![vec![gq("1"), gq("2")], vec![gq("2"), gq("4")]]);
        assert_eq!(singular.det(), gq("0"));
        assert!(singular.solve(&[gq("0"), gq("1")]).is_none());
    }
}
