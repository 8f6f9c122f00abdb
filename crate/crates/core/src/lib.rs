pub mod error;
pub mod quadrature;
pub mod special;
pub mod combinatorics;
pub mod jstar;
pub mod test_functions;
pub mod result;
pub mod contour;
pub mod rs_main;
pub mod rmt;
pub mod empirical;
pub mod zeta;
