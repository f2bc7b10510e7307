#pragma once

// Stochastic variational inference over positive latent vectors.
//
// fit_gamma_sgvb  mean-field Gamma posterior, pathwise gradients through the
//                 inverse-CDF reparameterization, one sample per iteration.
// fit_normal_sgvb mean-field Gaussian in an unconstrained space mapped through
//                 softplus; entropy handled in closed form.
// fit_map         point-estimate ascent on the same softplus-mapped space.
//
// All three record a per-iteration objective trace (single-sample evidence
// bound for the variational fits, the joint log density for MAP) plus
// cumulative wall time, and are bit-reproducible for a fixed seed.

#include <cstdint>
#include <functional>
#include <vector>

#include "gsgvb/optim.hpp"
#include "gsgvb/types.hpp"

namespace gsgvb {
namespace vb {

// Joint density contract a model exposes to the engine.  Latents are strictly
// positive; gradients are with respect to the latent vector itself.
class ModelInterface {
  public:
    virtual ~ModelInterface() = default;
    virtual Index latent_dim() const = 0;
    virtual double log_joint(const Vec& x) const = 0;
    virtual Vec grad_log_joint(const Vec& x) const = 0;
};

// Uniform draws feeding the samplers are clamped away from {0,1} so the
// quantile transforms stay finite.
inline constexpr double kUniformClamp = 1e-12;

double softplus(double t);       // ln(1+e^t), linear past t=30, floored at 1e-300
double softplus_inv(double y);   // inverse of the unfloored map
double sigmoid(double t);

struct FitOptions {
    int iterations = 1000;
    std::uint64_t seed = 0;
    optim::OptimizerConfig optimizer{};
};

struct GammaFit {
    Vec alpha;                        // unconstrained shape parameters
    Vec beta;                         // unconstrained rate parameters
    Vec shape;                        // softplus(alpha)
    Vec rate;                         // softplus(beta)
    std::vector<double> elbo_trace;   // one single-sample estimate per iteration
    std::vector<double> wall_ms;      // cumulative milliseconds per iteration
};

struct NormalFit {
    Vec mean;
    Vec log_sd;
    std::vector<double> elbo_trace;
    std::vector<double> wall_ms;
};

struct MapFit {
    Vec theta;                        // unconstrained point estimate
    Vec x;                            // softplus(theta)
    std::vector<double> objective_trace;
    std::vector<double> wall_ms;
};

// init vectors may be empty (defaults: shape = rate = 1, i.e. alpha = beta =
// softplus_inv(1)); otherwise they must have the model's latent dimension.
GammaFit fit_gamma_sgvb(const ModelInterface& model, const FitOptions& options,
                        const Vec& init_alpha = Vec(), const Vec& init_beta = Vec());

// Defaults: mean = softplus_inv(1), log_sd = -2.
NormalFit fit_normal_sgvb(const ModelInterface& model, const FitOptions& options,
                          const Vec& init_mean = Vec(), const Vec& init_log_sd = Vec());

// Default: theta = softplus_inv(1).
MapFit fit_map(const ModelInterface& model, const FitOptions& options,
               const Vec& init_theta = Vec());

// Mean of the trailing `window` trace entries (all of them if fewer).
double windowed_mean(const std::vector<double>& trace, int window);

// Posterior-draw helpers for Monte-Carlo prediction.  Each callable owns its
// own RNG stream and overwrites its argument with one complete draw per call.
std::function<void(Vec&)> make_gamma_sampler(Vec shape, Vec rate, std::uint64_t seed);
std::function<void(Vec&)> make_normal_softplus_sampler(Vec mean, Vec log_sd,
                                                       std::uint64_t seed);
std::function<void(Vec&)> make_point_sampler(Vec x);

} // namespace vb
} // namespace gsgvb
