#include "gsgvb/vb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gsgvb/errors.hpp"
#include "gsgvb/gamma_reparam.hpp"
#include "gsgvb/special.hpp"

namespace gsgvb {
namespace vb {

namespace {

constexpr double kPositiveFloor = 1e-300;

// 53-bit uniforms from the top bits of a Mersenne engine; the derived values
// are identical across platforms for a fixed seed.
class UniformSource {
  public:
    explicit UniformSource(std::uint64_t seed) : gen_(seed) {}

    double clamped() {
        double u = (gen_() >> 11) * 0x1.0p-53;
        return std::clamp(u, kUniformClamp, 1.0 - kUniformClamp);
    }

  private:
    std::mt19937_64 gen_;
};

class WallClock {
  public:
    WallClock() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        auto now = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(now - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

Index checked_dim(const ModelInterface& model) {
    Index d = model.latent_dim();
    if (d <= 0) throw std::invalid_argument("fit: model has no latent dimensions");
    return d;
}

Vec init_or_default(const Vec& init, Index d, double fallback, const char* what) {
    if (init.size() == 0) return Vec::Constant(d, fallback);
    if (init.size() != d) {
        std::ostringstream os;
        os << "fit: " << what << " has size " << init.size()
           << " but the model has " << d << " latents";
        throw std::invalid_argument(os.str());
    }
    return init;
}

void check_iterations(int iterations) {
    if (iterations < 0) throw std::invalid_argument("fit: iterations must be >= 0");
}

[[noreturn]] void throw_non_finite(const char* quantity, int iteration, Index coord) {
    std::ostringstream os;
    os << "non-finite " << quantity << " at iteration " << iteration
       << ", coordinate " << coord;
    throw NumericalError(os.str());
}

[[noreturn]] void rethrow_solver(const SolverError& e, int iteration, Index coord) {
    std::ostringstream os;
    os << "iteration " << iteration << ", coordinate " << coord << ": " << e.what();
    throw SolverError(os.str());
}

} // namespace

double softplus(double t) {
    double y = t > 30.0 ? t : std::log1p(std::exp(t));
    return std::max(y, kPositiveFloor);
}

double softplus_inv(double y) {
    if (!(y > 0.0)) throw std::domain_error("softplus_inv: argument must be positive");
    return y > 30.0 ? y : std::log(std::expm1(y));
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    double e = std::exp(t);
    return e / (1.0 + e);
}

GammaFit fit_gamma_sgvb(const ModelInterface& model, const FitOptions& options,
                        const Vec& init_alpha, const Vec& init_beta) {
    const Index d = checked_dim(model);
    check_iterations(options.iterations);
    const double theta_one = softplus_inv(1.0);
    Vec alpha = init_or_default(init_alpha, d, theta_one, "init_alpha");
    Vec beta = init_or_default(init_beta, d, theta_one, "init_beta");

    auto optimizer = optim::make_optimizer(options.optimizer);
    UniformSource rng(options.seed);
    WallClock clock;

    GammaFit fit;
    fit.elbo_trace.reserve(options.iterations);
    fit.wall_ms.reserve(options.iterations);

    Vec shape(d), rate(d), x(d), dxda(d), dxdb(d);
    Vec params(2 * d), grad(2 * d);
    for (int it = 0; it < options.iterations; ++it) {
        for (Index i = 0; i < d; ++i) {
            shape[i] = softplus(alpha[i]);
            rate[i] = softplus(beta[i]);
            double z = rng.clamped();
            try {
                auto r = reparam::sample_and_grad(shape[i], rate[i], z);
                x[i] = r.x;
                dxda[i] = r.dx_da;
                dxdb[i] = r.dx_db;
            } catch (const SolverError& e) {
                rethrow_solver(e, it, i);
            }
            if (!std::isfinite(x[i])) throw_non_finite("latent sample", it, i);
        }

        double log_joint = model.log_joint(x);
        double log_q = 0.0;
        for (Index i = 0; i < d; ++i) {
            log_q += reparam::log_pdf(x[i], shape[i], rate[i]);
        }
        fit.elbo_trace.push_back(log_joint - log_q);
        fit.wall_ms.push_back(clock.elapsed_ms());

        Vec gj = model.grad_log_joint(x);
        if (gj.size() != d) {
            throw std::invalid_argument("fit: model gradient size mismatch");
        }
        for (Index i = 0; i < d; ++i) {
            double g = gj[i] - reparam::grad_log_pdf_x(x[i], shape[i], rate[i]);
            grad[i] = g * dxda[i] * sigmoid(alpha[i]);
            grad[d + i] = g * dxdb[i] * sigmoid(beta[i]);
            if (!std::isfinite(grad[i])) throw_non_finite("shape gradient", it, i);
            if (!std::isfinite(grad[d + i])) throw_non_finite("rate gradient", it, i);
        }

        params.head(d) = alpha;
        params.tail(d) = beta;
        optimizer->step(params, grad);
        alpha = params.head(d);
        beta = params.tail(d);
    }

    fit.alpha = alpha;
    fit.beta = beta;
    fit.shape = alpha.unaryExpr([](double t) { return softplus(t); });
    fit.rate = beta.unaryExpr([](double t) { return softplus(t); });
    return fit;
}

NormalFit fit_normal_sgvb(const ModelInterface& model, const FitOptions& options,
                          const Vec& init_mean, const Vec& init_log_sd) {
    const Index d = checked_dim(model);
    check_iterations(options.iterations);
    Vec mean = init_or_default(init_mean, d, softplus_inv(1.0), "init_mean");
    Vec log_sd = init_or_default(init_log_sd, d, -2.0, "init_log_sd");

    auto optimizer = optim::make_optimizer(options.optimizer);
    UniformSource rng(options.seed);
    WallClock clock;

    NormalFit fit;
    fit.elbo_trace.reserve(options.iterations);
    fit.wall_ms.reserve(options.iterations);

    // Entropy of each coordinate is log_sd + log(2 pi e)/2.
    const double half_log_2pie = 0.5 * std::log(2.0 * 3.141592653589793238462643383279502884 * std::exp(1.0));

    Vec u(d), zp(d), x(d), sd(d);
    Vec params(2 * d), grad(2 * d);
    for (int it = 0; it < options.iterations; ++it) {
        for (Index i = 0; i < d; ++i) {
            zp[i] = special::std_normal_inv_cdf(rng.clamped());
            sd[i] = std::exp(log_sd[i]);
            u[i] = mean[i] + sd[i] * zp[i];
            x[i] = softplus(u[i]);
            if (!std::isfinite(x[i])) throw_non_finite("latent sample", it, i);
        }

        double log_joint = model.log_joint(x);
        double elbo = log_joint;
        for (Index i = 0; i < d; ++i) {
            // log sigmoid(u) = -softplus(-u) is the log-Jacobian of the map.
            elbo += -(u[i] > -30.0 ? std::log1p(std::exp(-u[i])) : -u[i]);
            elbo += log_sd[i] + half_log_2pie;
        }
        fit.elbo_trace.push_back(elbo);
        fit.wall_ms.push_back(clock.elapsed_ms());

        Vec gj = model.grad_log_joint(x);
        if (gj.size() != d) {
            throw std::invalid_argument("fit: model gradient size mismatch");
        }
        for (Index i = 0; i < d; ++i) {
            double sig = sigmoid(u[i]);
            double g_u = gj[i] * sig + (1.0 - sig);
            grad[i] = g_u;
            grad[d + i] = g_u * sd[i] * zp[i] + 1.0;
            if (!std::isfinite(grad[i])) throw_non_finite("mean gradient", it, i);
            if (!std::isfinite(grad[d + i])) throw_non_finite("scale gradient", it, i);
        }

        params.head(d) = mean;
        params.tail(d) = log_sd;
        optimizer->step(params, grad);
        mean = params.head(d);
        log_sd = params.tail(d);
    }

    fit.mean = mean;
    fit.log_sd = log_sd;
    return fit;
}

MapFit fit_map(const ModelInterface& model, const FitOptions& options,
               const Vec& init_theta) {
    const Index d = checked_dim(model);
    check_iterations(options.iterations);
    Vec theta = init_or_default(init_theta, d, softplus_inv(1.0), "init_theta");

    auto optimizer = optim::make_optimizer(options.optimizer);
    WallClock clock;

    MapFit fit;
    fit.objective_trace.reserve(options.iterations);
    fit.wall_ms.reserve(options.iterations);

    Vec x(d), grad(d);
    for (int it = 0; it < options.iterations; ++it) {
        for (Index i = 0; i < d; ++i) {
            x[i] = softplus(theta[i]);
            if (!std::isfinite(x[i])) throw_non_finite("latent point", it, i);
        }
        fit.objective_trace.push_back(model.log_joint(x));
        fit.wall_ms.push_back(clock.elapsed_ms());

        Vec gj = model.grad_log_joint(x);
        if (gj.size() != d) {
            throw std::invalid_argument("fit: model gradient size mismatch");
        }
        for (Index i = 0; i < d; ++i) {
            grad[i] = gj[i] * sigmoid(theta[i]);
            if (!std::isfinite(grad[i])) throw_non_finite("gradient", it, i);
        }
        optimizer->step(theta, grad);
    }

    fit.theta = theta;
    fit.x = theta.unaryExpr([](double t) { return softplus(t); });
    return fit;
}

std::function<void(Vec&)> make_gamma_sampler(Vec shape, Vec rate, std::uint64_t seed) {
    if (shape.size() != rate.size() || shape.size() == 0) {
        throw std::invalid_argument("make_gamma_sampler: shape/rate size mismatch");
    }
    auto rng = std::make_shared<UniformSource>(seed);
    return [shape = std::move(shape), rate = std::move(rate), rng](Vec& x) {
        x.resize(shape.size());
        for (Index i = 0; i < shape.size(); ++i) {
            x[i] = reparam::sample(shape[i], rate[i], rng->clamped());
        }
    };
}

std::function<void(Vec&)> make_normal_softplus_sampler(Vec mean, Vec log_sd,
                                                       std::uint64_t seed) {
    if (mean.size() != log_sd.size() || mean.size() == 0) {
        throw std::invalid_argument("make_normal_softplus_sampler: mean/log_sd size mismatch");
    }
    auto rng = std::make_shared<UniformSource>(seed);
    return [mean = std::move(mean), log_sd = std::move(log_sd), rng](Vec& x) {
        x.resize(mean.size());
        for (Index i = 0; i < mean.size(); ++i) {
            double zp = special::std_normal_inv_cdf(rng->clamped());
            x[i] = softplus(mean[i] + std::exp(log_sd[i]) * zp);
        }
    };
}

std::function<void(Vec&)> make_point_sampler(Vec x) {
    if (x.size() == 0) throw std::invalid_argument("make_point_sampler: empty vector");
    return [x = std::move(x)](Vec& out) { out = x; };
}

double windowed_mean(const std::vector<double>& trace, int window) {
    if (trace.empty()) throw std::invalid_argument("windowed_mean: empty trace");
    if (window <= 0) throw std::invalid_argument("windowed_mean: window must be positive");
    std::size_t n = std::min<std::size_t>(window, trace.size());
    double sum = 0.0;
    for (std::size_t i = trace.size() - n; i < trace.size(); ++i) sum += trace[i];
    return sum / static_cast<double>(n);
}

} // namespace vb
} // namespace gsgvb
