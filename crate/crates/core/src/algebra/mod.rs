//! Polynomials, root finding and tridiagonal eigenproblems.

mod eigen;
mod poly;
mod roots;

pub use eigen::{eig_tridiagonal, hessenberg_eigenvalues, residual, EigenDecomposition, TriMatrix};
pub use poly::Poly;
pub use roots::{cubic_roots, poly_roots, sort_lex};
