#include "gsgvb/optim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gsgvb {
namespace optim {

namespace {

void check_sizes(const Vec& theta, const Vec& grad, const Vec& state) {
    if (theta.size() != grad.size()) {
        std::ostringstream os;
        os << "optimizer: parameter size " << theta.size()
           << " does not match gradient size " << grad.size();
        throw std::invalid_argument(os.str());
    }
    if (state.size() != 0 && state.size() != theta.size()) {
        std::ostringstream os;
        os << "optimizer: parameter size changed from " << state.size() << " to "
           << theta.size() << " mid-run; call reset() first";
        throw std::invalid_argument(os.str());
    }
}

} // namespace

Optimizer::Optimizer(double momentum_weight) : momentum_weight_(momentum_weight) {
    if (!(momentum_weight > 0.0) || momentum_weight > 1.0) {
        throw std::invalid_argument("optimizer: momentum weight must lie in (0, 1]");
    }
}

void Optimizer::step(Vec& theta, const Vec& grad) {
    check_sizes(theta, grad, velocity_);
    if (momentum_weight_ == 1.0) {
        apply(theta, grad);
        return;
    }
    if (velocity_.size() == 0) velocity_ = Vec::Zero(theta.size());
    velocity_ = momentum_weight_ * grad + (1.0 - momentum_weight_) * velocity_;
    apply(theta, velocity_);
}

void Optimizer::reset() { velocity_.resize(0); }

Sgd::Sgd(double step_size, double momentum_weight)
    : Optimizer(momentum_weight), step_size_(step_size) {
    if (!(step_size > 0.0)) throw std::invalid_argument("sgd: step size must be positive");
}

void Sgd::apply(Vec& theta, const Vec& g_eff) { theta += step_size_ * g_eff; }

AdaGrad::AdaGrad(double scale, double momentum_weight)
    : Optimizer(momentum_weight), scale_(scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("adagrad: scale must be positive");
}

void AdaGrad::apply(Vec& theta, const Vec& g_eff) {
    check_sizes(theta, g_eff, sum_sq_);
    if (sum_sq_.size() == 0) sum_sq_ = Vec::Zero(theta.size());
    sum_sq_ += g_eff.cwiseAbs2();
    theta.array() += scale_ * g_eff.array() / (1e-6 + sum_sq_.array().sqrt());
}

void AdaGrad::reset() {
    Optimizer::reset();
    sum_sq_.resize(0);
}

RmsProp::RmsProp(double scale, double momentum_weight)
    : Optimizer(momentum_weight), scale_(scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("rmsprop: scale must be positive");
}

void RmsProp::apply(Vec& theta, const Vec& g_eff) {
    check_sizes(theta, g_eff, mean_sq_);
    if (mean_sq_.size() == 0) mean_sq_ = Vec::Zero(theta.size());
    mean_sq_ = 0.1 * g_eff.cwiseAbs2() + 0.9 * mean_sq_;
    theta.array() += scale_ * g_eff.array() / (1e-6 + mean_sq_.array().sqrt());
}

void RmsProp::reset() {
    Optimizer::reset();
    mean_sq_.resize(0);
}

AdaDelta::AdaDelta(double rho, double eps, double momentum_weight)
    : Optimizer(momentum_weight), rho_(rho), eps_(eps) {
    if (!(rho > 0.0) || rho > 1.0) {
        throw std::invalid_argument("adadelta: rho must lie in (0, 1]");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("adadelta: eps must be positive");
}

void AdaDelta::apply(Vec& theta, const Vec& g_eff) {
    check_sizes(theta, g_eff, mean_sq_grad_);
    if (mean_sq_grad_.size() == 0) {
        mean_sq_grad_ = Vec::Zero(theta.size());
        mean_sq_step_ = Vec::Zero(theta.size());
    }
    mean_sq_grad_ = rho_ * g_eff.cwiseAbs2() + (1.0 - rho_) * mean_sq_grad_;
    Vec delta = ((mean_sq_step_.array() + eps_).sqrt() /
                 (mean_sq_grad_.array() + eps_).sqrt() * g_eff.array()).matrix();
    theta += delta;
    mean_sq_step_ = rho_ * delta.cwiseAbs2() + (1.0 - rho_) * mean_sq_step_;
}

void AdaDelta::reset() {
    Optimizer::reset();
    mean_sq_grad_.resize(0);
    mean_sq_step_.resize(0);
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config) {
    const double momentum = config.momentum_weight;
    if (config.name == "sgd") {
        return std::make_unique<Sgd>(config.step_size, momentum);
    }
    if (config.name == "adagrad") {
        return std::make_unique<AdaGrad>(config.scale < 0.0 ? 0.1 : config.scale, momentum);
    }
    if (config.name == "rmsprop") {
        return std::make_unique<RmsProp>(config.scale < 0.0 ? 0.01 : config.scale, momentum);
    }
    if (config.name == "adadelta") {
        return std::make_unique<AdaDelta>(config.rho, config.eps, momentum);
    }
    throw std::invalid_argument("unknown optimizer name: " + config.name);
}

} // namespace optim
} // namespace gsgvb
