//! Conditional-expectation maps and the update formulas built on them.

mod bayes;
mod general;
mod gram;
mod polymap;
mod qbu;

pub use bayes::{
    bayes_update, bayes_update_general, bayes_update_with_map, bayes_update_with_map_capped,
    conditional_probability, covariance_match, indicator_pce,
    innovation_mean, kalman_gain, outer_products, posterior_covariance_exact, MAX_COMPOSITION_DEGREE,
};
pub use general::{default_level, solve_general_basis, BasisDictionary, GeneralMap};
pub use gram::{solve_optimal_map, GramSystem};
pub use polymap::{monomial_values, PolyMap};
pub use qbu::qbu_closed_form;
