//! Special functions, quadrature, root finding and random variates.

pub mod quadrature;
pub mod roots;
pub mod sampling;
pub mod special;

pub use quadrature::{integrate, integrate_with_error, QuadratureResult, QuadratureSpec};
pub use roots::{find_root, minimize_scalar, MinimumEstimate, RootBracket, RootEstimate};
pub use sampling::{sample_gamma, sample_normal, sample_truncated_normal_positive};
pub use special::{
    digamma, ln_gamma, normal_cdf, normal_ln_cdf, normal_ln_pdf, student_t_cdf, student_t_pdf, StudentT,
};
