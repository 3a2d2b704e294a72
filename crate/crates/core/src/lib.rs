//! Sparse domination of multilinear Calderón–Zygmund operators on finite
//! non-homogeneous metric measure spaces.
//!
//! Everything here runs on finite atomic spaces, so every supremum that the
//! continuous theory takes over `r > 0` is evaluated exactly on finitely many
//! breakpoint radii. Each analytic object (truncated/maximal operators,
//! David–Mattila lattices, sparse families, A_P weights) comes with an
//! independent brute-force twin in [`oracle`] used by the test and
//! verification layers.

pub mod gen;
pub mod lattice;
pub mod operators;
pub mod oracle;
pub mod report;
pub mod space;
pub mod sparse;
pub mod weights;

pub use lattice::{Cell, CellId, Lattice, LatticeMode};
pub use operators::{FunctionTuple, Kernel, Modulus, TruncationMode};
pub use report::{ValidationReport, Violation};
pub use space::{Ball, DominatingFunction, MetricMeasureSpace};
pub use sparse::{DominationResult, SparseFamily};
pub use weights::{ExponentTuple, Regime, WeightTuple};
