//! crobstruct: an exact computer-algebra engine that certifies obstructions
//! to transversal holomorphic embeddability of real-analytic CR submanifolds
//! into hyperquadrics.
//!
//! The pipeline: a surface is given by an exact defining series over Q(i);
//! its Segre variety graph function Q is solved symbolically; derivative
//! tables of the defining function along the Segre variety of the reference
//! point are assembled; and weight-bounded polynomial-relation searches over
//! those tables produce machine-checkable certificates (a found relation, or
//! cap-bounded nonexistence), which translate into embeddability verdicts.

pub mod exactnum;
pub mod frontend;
pub mod multilinear;
pub mod obstruction;
pub mod segre;
pub mod series;
pub mod trees;

pub use exactnum::{ExactMatrix, GaussianRational};
pub use series::{TruncatedSeries, VarBlocks};
