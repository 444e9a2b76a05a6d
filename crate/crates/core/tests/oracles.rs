mod support;

use support::oracles::{derivative_suite, duality_suite};

#[test]
fn jacobians_and_hessians_match_finite_differences() {
    let r = derivative_suite(20, 5);
    assert!(r.rows > 1000);
    assert!(r.max_jacobian_rel < 1e-6, "{r:?}");
    assert!(r.max_hessian_rel < 1e-4, "{r:?}");
}

#[test]
fn information_recursion_is_the_kalman_covariance() {
    assert!(duality_suite(20, 15, 3) < 1e-8);
}
