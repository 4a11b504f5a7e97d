//! Perturbative field operators as polynomials in the free in-field.
//!
//! The in-field has c-number commutator `[phi(x), phi(y)] = i D(x, y)`, so
//! every polynomial has a canonical form with generators sorted by site.
//! Fields, retarded products and their commutators are computed exactly
//! in that representation.

mod checks;
mod fields;
mod poly;
mod retarded;
mod tables;
mod vev;

pub use checks::{first_order_commutator_prediction, local_commutator, out_commutator, OutCommutator};
pub use fields::{FieldEngine, FieldPoly};
pub use poly::{Commutator, Monomial, WickPolynomial};
pub use retarded::{
    glz_residual, pull_through, retarded_expansion, retarded_product, retarded_product_recursive,
    with_interaction_insertions, LocalOp, PullThrough,
};
pub use tables::AlgebraTables;
pub use vev::{product_expectation, vacuum_expectation, word_expectation};
