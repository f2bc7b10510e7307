#pragma once

namespace gsgvb {
namespace special {

// ln Gamma(a), a > 0.
double log_gamma(double a);

// psi(a) = d/da ln Gamma(a), a > 0.
double digamma(double a);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
// Series for x < a+1, continued fraction for x >= a+1, Gauss-Legendre
// quadrature for a > 100.
double reg_inc_gamma(double a, double x);

// Inverse of P(a, .): the x with P(a, x) = p, 0 < p < 1.
// Throws SolverError if the residual cannot be brought below 1e-12 in p-space
// or the solution underflows double range.
double inv_reg_inc_gamma(double a, double p);

// Standard normal quantile, 0 < p < 1.
double std_normal_inv_cdf(double p);

} // namespace special
} // namespace gsgvb
