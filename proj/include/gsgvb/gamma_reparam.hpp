#pragma once

// Inverse-CDF reparameterization of Gamma(a, b) draws (b is a rate).  Given a
// uniform z in (0,1), produces x with x ~ Gamma(a,b) together with the
// pathwise derivatives dx/da and dx/db used by stochastic gradient updates.
//
// Three evaluation strategies cover the shape range:
//   SMALL_A   closed-form tail inversion, cheap and differentiable in closed
//             form; only valid where the CDF is dominated by its leading term.
//   MODERATE  numerical CDF inversion; dx/da by a forward difference that
//             re-runs the solver at a shifted shape.
//   LARGE_A   Gaussian approximation via the normal quantile.

namespace gsgvb {
namespace reparam {

enum class Regime { SMALL_A, MODERATE, LARGE_A };

struct ReparamResult {
    double x;        // the sampled value
    double dx_da;    // pathwise derivative w.r.t. the shape
    double dx_db;    // pathwise derivative w.r.t. the rate, always -x/b
    Regime regime;
    bool clamped;    // true if x was floored to keep it positive
};

// Strategy chosen for (a, z): SMALL_A iff a < 1 and (1 - 0.94 z) ln a < -0.42,
// otherwise LARGE_A iff a > 1000, otherwise MODERATE.
Regime select_regime(double a, double z);

// Forward-difference step used for the MODERATE-regime shape derivative.
double default_eps_fd(double a);

ReparamResult sample_and_grad(double a, double b, double z);
ReparamResult sample_and_grad(double a, double b, double z, double eps_fd);

// Sample only; skips the extra solver call the shape derivative needs.
double sample(double a, double b, double z);

// log density of Gamma(a, b) at x > 0.
double log_pdf(double x, double a, double b);

// d/dx log density = (a-1)/x - b.
double grad_log_pdf_x(double x, double a, double b);

// KL(Gamma(a_q,b_q) || Gamma(a_p,b_p)).
double kl_gamma(double a_q, double b_q, double a_p, double b_p);

} // namespace reparam
} // namespace gsgvb
