#include "gsgvb/gpfa.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gsgvb/errors.hpp"
#include "gsgvb/gamma_reparam.hpp"
#include "gsgvb/special.hpp"

namespace gsgvb {
namespace gpfa {

namespace {

constexpr double kTwoPi = 6.2831853071795864769;
constexpr double kTauPriorShape = 0.1;
constexpr double kTauPriorRate = 0.1;
constexpr double kUnitPrior = 1.0;

void check_positive(double v, const char* what, long index) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::domain_error(std::string(what) + " at index " +
                                std::to_string(index) +
                                " must be positive and finite");
    }
}

// Cholesky of the model covariance; fails only if rounding destroys the
// positive definiteness that W W^T + (1/tau) I guarantees analytically.
Eigen::LLT<Mat> factor_covariance(const Mat& c) {
    Eigen::LLT<Mat> llt(c);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("model covariance is not positive definite");
    }
    return llt;
}

} // namespace

GpfaData GpfaData::from_samples(const Mat& y) {
    if (y.rows() < 1 || y.cols() < 1) {
        throw std::invalid_argument("sample matrix must be non-empty");
    }
    if (!y.allFinite()) {
        throw std::invalid_argument("sample matrix has non-finite entries");
    }
    GpfaData data;
    data.scatter = y.transpose() * y;
    data.scatter = ((data.scatter + data.scatter.transpose()) * 0.5).eval();
    data.n_samples = y.rows();
    data.dim = static_cast<int>(y.cols());
    return data;
}

GpfaData GpfaData::from_scatter(Mat scatter, long n_samples) {
    if (scatter.rows() < 1 || scatter.rows() != scatter.cols()) {
        throw std::invalid_argument("scatter matrix must be square");
    }
    if (!scatter.allFinite()) {
        throw std::invalid_argument("scatter matrix has non-finite entries");
    }
    if (n_samples < 1) {
        throw std::invalid_argument("n_samples must be at least 1");
    }
    GpfaData data;
    data.scatter = ((scatter + scatter.transpose()) * 0.5).eval();
    data.n_samples = n_samples;
    data.dim = static_cast<int>(scatter.rows());

    Eigen::SelfAdjointEigenSolver<Mat> es(data.scatter,
                                          Eigen::EigenvaluesOnly);
    const double max_ev = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, max_ev)) {
        throw std::invalid_argument(
            "scatter matrix must be positive semi-definite");
    }
    return data;
}

GpfaModel::GpfaModel(GpfaData data, int n_factors,
                     std::optional<double> fixed_tau)
    : data_(std::move(data)), k_(n_factors), fixed_tau_(fixed_tau) {
    if (data_.dim < 1 || data_.n_samples < 1) {
        throw std::invalid_argument("model requires non-empty data");
    }
    if (k_ < 1) {
        throw std::invalid_argument("n_factors must be at least 1");
    }
    if (fixed_tau_ && (!(*fixed_tau_ > 0.0) || !std::isfinite(*fixed_tau_))) {
        throw std::invalid_argument("fixed tau must be positive and finite");
    }
}

Index GpfaModel::latent_dim() const {
    const long d = data_.dim;
    return d * k_ + k_ + 4;
}

Index GpfaModel::w_index(int dim_index, int factor) const {
    return static_cast<Index>(dim_index) * k_ + factor;
}

Index GpfaModel::tau_index() const {
    return static_cast<Index>(data_.dim) * k_;
}

Index GpfaModel::loading_scale_index() const { return tau_index() + 1; }

Index GpfaModel::relevance_index(int factor) const {
    return loading_scale_index() + 1 + factor;
}

Index GpfaModel::relevance_mass_index() const {
    return loading_scale_index() + 1 + k_;
}

Index GpfaModel::relevance_rate_index() const {
    return relevance_mass_index() + 1;
}

double GpfaModel::effective_tau(const Vec& x) const {
    return fixed_tau_ ? *fixed_tau_ : x[tau_index()];
}

Mat GpfaModel::covariance(const Vec& x) const {
    const int d = data_.dim;
    Eigen::Map<const RowMat> w(x.data(), d, k_);
    Mat c = w * w.transpose();
    c.diagonal().array() += 1.0 / effective_tau(x);
    return c;
}

namespace {

void validate_latents(const Vec& x, Index expected_dim) {
    if (x.size() != expected_dim) {
        throw std::invalid_argument("latent vector has wrong dimension");
    }
    for (Index i = 0; i < x.size(); ++i) {
        check_positive(x[i], "latent coordinate", i);
    }
}

} // namespace

double GpfaModel::log_likelihood(const Vec& x) const {
    validate_latents(x, latent_dim());
    const int d = data_.dim;
    const double n = static_cast<double>(data_.n_samples);

    const Eigen::LLT<Mat> llt = factor_covariance(covariance(x));
    const double log_det =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Mat cinv_s = llt.solve(data_.scatter);
    return -0.5 * n * log_det - 0.5 * cinv_s.trace() -
           0.5 * n * d * std::log(kTwoPi);
}

double GpfaModel::log_prior(const Vec& x) const {
    validate_latents(x, latent_dim());
    const int d = data_.dim;
    const double scale = x[loading_scale_index()];
    const double mass = x[relevance_mass_index()];
    const double rate = x[relevance_rate_index()];

    double lp = 0.0;
    for (int row = 0; row < d; ++row) {
        for (int k = 0; k < k_; ++k) {
            const double r = x[relevance_index(k)];
            lp += reparam::log_pdf(x[w_index(row, k)], scale * r, scale);
        }
    }
    if (!fixed_tau_) {
        lp += reparam::log_pdf(x[tau_index()], kTauPriorShape, kTauPriorRate);
    }
    lp += reparam::log_pdf(scale, kUnitPrior, kUnitPrior);
    for (int k = 0; k < k_; ++k) {
        lp += reparam::log_pdf(x[relevance_index(k)], mass / k_, rate);
    }
    lp += reparam::log_pdf(mass, kUnitPrior, kUnitPrior);
    lp += reparam::log_pdf(rate, kUnitPrior, kUnitPrior);
    return lp;
}

double GpfaModel::log_joint(const Vec& x) const {
    return log_likelihood(x) + log_prior(x);
}

Vec GpfaModel::grad_log_joint(const Vec& x) const {
    validate_latents(x, latent_dim());
    const int d = data_.dim;
    const double n = static_cast<double>(data_.n_samples);
    const double tau = effective_tau(x);
    const double scale = x[loading_scale_index()];
    const double mass = x[relevance_mass_index()];
    const double rate = x[relevance_rate_index()];

    Eigen::Map<const RowMat> w(x.data(), d, k_);
    const Eigen::LLT<Mat> llt = factor_covariance(covariance(x));
    const Mat cinv_w = llt.solve(Mat(w));
    const Mat grad_w_ll =
        -n * cinv_w + llt.solve(data_.scatter * cinv_w);

    Vec grad = Vec::Zero(latent_dim());
    Eigen::Map<RowMat>(grad.data(), d, k_) = grad_w_ll;

    if (!fixed_tau_) {
        const Mat cinv = llt.solve(Mat::Identity(d, d));
        const Mat cinv_s = llt.solve(data_.scatter);
        const double tr_cinv_s_cinv = cinv_s.cwiseProduct(cinv).sum();
        grad[tau_index()] =
            (0.5 * n * cinv.trace() - 0.5 * tr_cinv_s_cinv) / (tau * tau) +
            (kTauPriorShape - 1.0) / tau - kTauPriorRate;
    }

    const double log_scale = std::log(scale);
    double g_scale = (kUnitPrior - 1.0) / scale - kUnitPrior;
    for (int k = 0; k < k_; ++k) {
        const double r = x[relevance_index(k)];
        const double psi_wk = special::digamma(scale * r);
        double g_r = (mass / k_ - 1.0) / r - rate;
        for (int row = 0; row < d; ++row) {
            const double wv = x[w_index(row, k)];
            const double log_wv = std::log(wv);
            grad[w_index(row, k)] +=
                reparam::grad_log_pdf_x(wv, scale * r, scale);
            g_scale += r * (log_scale - psi_wk + log_wv) + r - wv;
            g_r += scale * (log_scale - psi_wk + log_wv);
        }
        grad[relevance_index(k)] = g_r;
        grad[relevance_mass_index()] +=
            (std::log(rate) - special::digamma(mass / k_) + std::log(r)) / k_;
        grad[relevance_rate_index()] += mass / (k_ * rate) - r;
    }
    grad[loading_scale_index()] = g_scale;
    grad[relevance_mass_index()] += (kUnitPrior - 1.0) / mass - kUnitPrior;
    grad[relevance_rate_index()] += (kUnitPrior - 1.0) / rate - kUnitPrior;
    return grad;
}

Mat expected_covariance(const GpfaModel& model, int n_samples,
                        const std::function<void(Vec&)>& sampler) {
    if (n_samples < 1) {
        throw std::invalid_argument("n_samples must be at least 1");
    }
    const int d = model.n_dims();
    Mat sum = Mat::Zero(d, d);
    Vec draw(model.latent_dim());
    for (int s = 0; s < n_samples; ++s) {
        sampler(draw);
        sum += model.covariance(draw);
    }
    return sum / n_samples;
}

} // namespace gpfa
} // namespace gsgvb
