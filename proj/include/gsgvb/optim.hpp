#pragma once

// First-order ascent rules used by the stochastic variational engine.  Every
// optimizer filters the incoming gradient through an optional momentum
// average v <- lambda g + (1 - lambda) v (lambda = 1 disables the filter,
// weighting the newest gradient fully), then applies its own per-coordinate
// scaling.  State vectors are sized lazily on the first step.

#include <memory>
#include <string>

#include "gsgvb/types.hpp"

namespace gsgvb {
namespace optim {

class Optimizer {
  public:
    explicit Optimizer(double momentum_weight);
    virtual ~Optimizer() = default;

    // theta += scaled(v) where v is the momentum-filtered gradient.
    void step(Vec& theta, const Vec& grad);

    // Drops all accumulated state; the next step behaves like the first.
    virtual void reset();

    double momentum_weight() const { return momentum_weight_; }

  protected:
    virtual void apply(Vec& theta, const Vec& g_eff) = 0;

  private:
    double momentum_weight_;
    Vec velocity_;
};

// Fixed step size.
class Sgd : public Optimizer {
  public:
    explicit Sgd(double step_size = 0.01, double momentum_weight = 1.0);
    void apply(Vec& theta, const Vec& g_eff) override;

  private:
    double step_size_;
};

// Per-coordinate scale / (damping + sqrt(sum of squared gradients)).
class AdaGrad : public Optimizer {
  public:
    explicit AdaGrad(double scale = 0.1, double momentum_weight = 1.0);
    void apply(Vec& theta, const Vec& g_eff) override;
    void reset() override;

  private:
    double scale_;
    Vec sum_sq_;
};

// Like AdaGrad but with an exponential average m <- 0.1 g^2 + 0.9 m.
class RmsProp : public Optimizer {
  public:
    explicit RmsProp(double scale = 0.01, double momentum_weight = 1.0);
    void apply(Vec& theta, const Vec& g_eff) override;
    void reset() override;

  private:
    double scale_;
    Vec mean_sq_;
};

// Step-size-free rule: the scale is the ratio of root-mean-square recent
// steps to root-mean-square recent gradients.  rho weighs the newest term in
// both averages.
class AdaDelta : public Optimizer {
  public:
    explicit AdaDelta(double rho = 0.9, double eps = 1e-4,
                      double momentum_weight = 1.0);
    void apply(Vec& theta, const Vec& g_eff) override;
    void reset() override;

  private:
    double rho_;
    double eps_;
    Vec mean_sq_grad_;
    Vec mean_sq_step_;
};

struct OptimizerConfig {
    std::string name = "adadelta";   // sgd | adagrad | rmsprop | adadelta
    double step_size = 0.01;         // sgd step; adagrad/rmsprop numerator if scale < 0
    double scale = -1.0;             // adagrad/rmsprop numerator; negative = built-in default
    double rho = 0.9;                // adadelta averaging weight on the newest term
    double eps = 1e-4;               // adadelta damping
    double momentum_weight = 1.0;
};

// Throws std::invalid_argument for an unknown name.
std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config);

} // namespace optim
} // namespace gsgvb
