#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "gsgvb/optim.hpp"

using namespace gsgvb;
using namespace gsgvb::optim;

namespace {

Vec unit_grad() {
    Vec g(1);
    g << 1.0;
    return g;
}

} // namespace

TEST_CASE("first ascent step sizes on a unit gradient") {
    Vec g = unit_grad();

    Vec t = Vec::Zero(1);
    Sgd sgd;
    sgd.step(t, g);
    CHECK(t[0] == doctest::Approx(0.01).epsilon(1e-14));

    t.setZero();
    AdaGrad adagrad;
    adagrad.step(t, g);
    CHECK(t[0] == doctest::Approx(0.1 / (1e-6 + 1.0)).epsilon(1e-14));

    t.setZero();
    RmsProp rmsprop;
    rmsprop.step(t, g);
    CHECK(t[0] == doctest::Approx(0.01 / (1e-6 + std::sqrt(0.1))).epsilon(1e-14));

    t.setZero();
    AdaDelta adadelta;
    adadelta.step(t, g);
    CHECK(t[0] == doctest::Approx(std::sqrt(1e-4) / std::sqrt(0.9 + 1e-4)).epsilon(1e-14));
}

TEST_CASE("adagrad accumulates squared gradients across steps") {
    Vec g = unit_grad();
    Vec t = Vec::Zero(1);
    AdaGrad opt;
    opt.step(t, g);
    double first = t[0];
    opt.step(t, g);
    double second = t[0] - first;
    CHECK(second == doctest::Approx(0.1 / (1e-6 + std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("adadelta follows its exact two-step recurrence") {
    Vec g = unit_grad();
    Vec t = Vec::Zero(1);
    AdaDelta opt(0.9, 1e-4);
    opt.step(t, g);
    const double d1 = std::sqrt(1e-4) / std::sqrt(0.9 + 1e-4);
    CHECK(t[0] == doctest::Approx(d1).epsilon(1e-14));

    // Second step with the same gradient: both averages have been updated
    // with weight 0.9 on the newest term.
    const double msg2 = 0.9 * 1.0 + 0.1 * 0.9;
    const double mss2 = 0.9 * d1 * d1;
    const double d2 = std::sqrt(mss2 + 1e-4) / std::sqrt(msg2 + 1e-4);
    opt.step(t, g);
    CHECK(t[0] == doctest::Approx(d1 + d2).epsilon(1e-14));
    CHECK(d2 > d1);  // constant gradients grow the step
}

TEST_CASE("momentum filter weights the newest gradient by lambda") {
    Vec t = Vec::Zero(1);
    Sgd opt(0.01, 0.5);
    Vec g = unit_grad();
    opt.step(t, g);  // v = 0.5
    CHECK(t[0] == doctest::Approx(0.01 * 0.5).epsilon(1e-14));
    g[0] = 0.0;
    opt.step(t, g);  // v = 0.25
    CHECK(t[0] == doctest::Approx(0.01 * 0.75).epsilon(1e-14));
}

TEST_CASE("momentum weight one matches a filter-free run") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    AdaDelta with(0.9, 1e-4, 1.0);
    AdaDelta without(0.9, 1e-4);
    Vec ta = Vec::Zero(3), tb = Vec::Zero(3);
    for (int i = 0; i < 50; ++i) {
        Vec g(3);
        for (int d = 0; d < 3; ++d) g[d] = nd(rng);
        with.step(ta, g);
        without.step(tb, g);
    }
    CHECK((ta - tb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all optimizers shrink a quadratic objective") {
    // Ascent on -theta^2/2, gradient -theta, from theta = 1.
    OptimizerConfig cfg;
    for (const char* name : {"sgd", "adagrad", "rmsprop", "adadelta"}) {
        cfg.name = name;
        auto opt = make_optimizer(cfg);
        Vec t(1);
        t << 1.0;
        for (int i = 0; i < 2000; ++i) {
            Vec g = -t;
            opt->step(t, g);
        }
        INFO(name);
        CHECK(std::fabs(t[0]) < 0.1);
    }
}

TEST_CASE("reset restores first-step behaviour") {
    Vec g = unit_grad();
    AdaGrad opt;
    Vec t = Vec::Zero(1);
    opt.step(t, g);
    opt.step(t, g);
    opt.reset();
    Vec t2 = Vec::Zero(1);
    opt.step(t2, g);
    CHECK(t2[0] == doctest::Approx(0.1 / (1e-6 + 1.0)).epsilon(1e-14));
}

TEST_CASE("configuration and size errors are rejected") {
    OptimizerConfig cfg;
    cfg.name = "newton";
    CHECK_THROWS_AS(make_optimizer(cfg), std::invalid_argument);
    CHECK_THROWS_AS(Sgd(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(AdaDelta(1.5, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(AdaDelta(0.9, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Sgd(0.01, 0.0), std::invalid_argument);

    Sgd opt;
    Vec t = Vec::Zero(3);
    Vec g = Vec::Zero(2);
    CHECK_THROWS_AS(opt.step(t, g), std::invalid_argument);

    AdaGrad ada;
    Vec t3 = Vec::Zero(3), g3 = Vec::Ones(3);
    ada.step(t3, g3);
    Vec t4 = Vec::Zero(4), g4 = Vec::Ones(4);
    CHECK_THROWS_AS(ada.step(t4, g4), std::invalid_argument);
}
