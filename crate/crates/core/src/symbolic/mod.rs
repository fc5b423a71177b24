//! Closed-form reuse-distance distributions.
//!
//! Concrete analyses run over a grid of parameter bindings. Warm accesses
//! are grouped into structural classes, and each class's rd value and
//! multiplicity are interpolated exactly as quasi-polynomials, then checked
//! at held-out bindings.

pub mod classify;
pub mod engine;
pub mod fit;
pub mod poly;

pub use classify::{classify, ClassRef, ReuseClass};
pub use engine::{
    analyze_symbolic, analyze_symbolic_with, assemble_dmd, default_period, scaling_filter, DmdFormula, SymbolicConfig,
    SymbolicDistribution, SymbolicError, SymbolicGroup, UnresolvedClass,
};
pub use fit::{fit, fit_validated, CountingBackend, FitError, InterpolationBackend, SampleSet};
pub use poly::{Poly, QuasiPoly};
