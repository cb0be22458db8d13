//! Jump-time Malliavin calculus: directions, gradients, the carré du champ,
//! integration-by-parts weights, divergences and likelihood ratios.

mod basis;
mod direction;
mod divergence;
mod functional;
mod radon_nikodym;
mod weights;

pub use basis::basis_projection_check;
pub use direction::{CameronMartin, DirectionKind, ZERO_MEAN_TOL};
pub use divergence::{
    divergence_m, divergence_predictable, divergence_scaled, StepProcess, STEP_MEAN_TOL,
};
pub use functional::{
    carre_du_champ, directional_derivative, grad_smooth, xi_gap_lower_bound, xi_gram, xi_kernel,
    xi_quadratic_form, CappedJumpTime, Compensator, Composed, Constant, Functional, JumpCount,
    MalliavinGradient, PerCount, Product, SmoothFunctional, FD_STEP,
};
pub use radon_nikodym::{log_z_eps, z_eps, z_eps_minus_one};
pub use weights::{weight_terms, write_weight_csv, WeightTerms, GAMMA2_TOL};

pub(crate) use functional::xi_unchecked;
