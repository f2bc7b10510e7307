#include "gsgvb/epm.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gsgvb/gamma_reparam.hpp"
#include "gsgvb/special.hpp"

namespace gsgvb {
namespace epm {

namespace {

// Present-pair intensities are floored here so the log-link terms stay finite.
constexpr double kIntensityFloor = 1e-12;

constexpr double kNodeShapePrior = 0.01;   // shape and rate of the a_i prior
constexpr double kUnitPrior = 1.0;         // shape and rate of the remaining hyperpriors

void check_positive(const Vec& x, const char* what) {
    for (Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || x[i] <= 0.0) {
            std::ostringstream os;
            os << what << ": latent coordinate " << i << " is not positive ("
               << x[i] << ")";
            throw std::domain_error(os.str());
        }
    }
}

void validate_pairs(const std::vector<std::pair<int, int>>& pairs, int n,
                    const char* what, std::set<std::pair<int, int>>& seen) {
    for (const auto& [i, j] : pairs) {
        if (i < 0 || j < 0 || i >= n || j >= n) {
            std::ostringstream os;
            os << "epm: " << what << " pair (" << i << "," << j
               << ") out of range for " << n << " nodes";
            throw std::invalid_argument(os.str());
        }
        if (i >= j) {
            std::ostringstream os;
            os << "epm: " << what << " pair (" << i << "," << j
               << ") must satisfy i < j";
            throw std::invalid_argument(os.str());
        }
        if (!seen.insert({i, j}).second) {
            std::ostringstream os;
            os << "epm: pair (" << i << "," << j << ") listed twice";
            throw std::invalid_argument(os.str());
        }
    }
}

} // namespace

EpmModel::EpmModel(EpmData data, int n_communities)
    : data_(std::move(data)), k_(n_communities) {
    if (data_.n_nodes < 2) throw std::invalid_argument("epm: need at least 2 nodes");
    if (k_ < 1) throw std::invalid_argument("epm: need at least 1 community");
    std::set<std::pair<int, int>> seen;
    validate_pairs(data_.edges, data_.n_nodes, "edge", seen);
    validate_pairs(data_.heldout, data_.n_nodes, "heldout", seen);
}

Index EpmModel::latent_dim() const {
    const Index n = data_.n_nodes;
    return n * k_ + k_ + 2 * n + 2;
}

Index EpmModel::w_index(int node, int community) const {
    return static_cast<Index>(node) * k_ + community;
}

Index EpmModel::r_index(int community) const {
    return static_cast<Index>(data_.n_nodes) * k_ + community;
}

Index EpmModel::node_shape_index(int node) const {
    return static_cast<Index>(data_.n_nodes) * k_ + k_ + node;
}

Index EpmModel::node_rate_index(int node) const {
    return static_cast<Index>(data_.n_nodes) * k_ + k_ + data_.n_nodes + node;
}

Index EpmModel::strength_mass_index() const {
    return static_cast<Index>(data_.n_nodes) * k_ + k_ + 2 * data_.n_nodes;
}

Index EpmModel::strength_rate_index() const { return strength_mass_index() + 1; }

double EpmModel::link_intensity(const Vec& x, int i, int j) const {
    const int n = data_.n_nodes;
    Eigen::Map<const RowMat> w(x.data(), n, k_);
    Eigen::Map<const Vec> r(x.data() + n * k_, k_);
    return (r.array() * w.row(i).transpose().array() * w.row(j).transpose().array()).sum();
}

double EpmModel::log_likelihood(const Vec& x) const {
    if (x.size() != latent_dim()) {
        throw std::invalid_argument("epm: latent vector has wrong size");
    }
    check_positive(x, "epm log_likelihood");
    const int n = data_.n_nodes;
    Eigen::Map<const RowMat> w(x.data(), n, k_);
    Eigen::Map<const Vec> r(x.data() + n * k_, k_);

    // All-pairs non-edge mass via column sums: sum_{i<j} p_ij =
    // (1/2) sum_k r_k [(sum_i w_ik)^2 - sum_i w_ik^2].
    Vec col_sum = w.colwise().sum().transpose();
    Vec col_sum_sq = w.cwiseAbs2().colwise().sum().transpose();
    double ll = -0.5 * (r.array() * (col_sum.array().square() - col_sum_sq.array())).sum();

    for (const auto& [i, j] : data_.edges) {
        double p = link_intensity(x, i, j);
        if (p < kIntensityFloor) {
            p = kIntensityFloor;
            floor_hits_.fetch_add(1, std::memory_order_relaxed);
        }
        // Swap the pair's -p contribution for the edge term log(1 - e^-p).
        ll += std::log(-std::expm1(-p)) + p;
    }
    for (const auto& [i, j] : data_.heldout) {
        ll += link_intensity(x, i, j);  // cancels the pair out of the likelihood
    }
    return ll;
}

double EpmModel::log_prior(const Vec& x) const {
    if (x.size() != latent_dim()) {
        throw std::invalid_argument("epm: latent vector has wrong size");
    }
    check_positive(x, "epm log_prior");
    const int n = data_.n_nodes;
    Eigen::Map<const RowMat> w(x.data(), n, k_);
    Eigen::Map<const Vec> r(x.data() + n * k_, k_);
    const double mass = x[strength_mass_index()];
    const double s_rate = x[strength_rate_index()];

    double lp = 0.0;
    for (int i = 0; i < n; ++i) {
        const double ai = x[node_shape_index(i)];
        const double ci = x[node_rate_index(i)];
        for (int k = 0; k < k_; ++k) {
            lp += reparam::log_pdf(w(i, k), ai, ci);
        }
        lp += reparam::log_pdf(ai, kNodeShapePrior, kNodeShapePrior);
        lp += reparam::log_pdf(ci, kUnitPrior, kUnitPrior);
    }
    for (int k = 0; k < k_; ++k) {
        lp += reparam::log_pdf(r[k], mass / k_, s_rate);
    }
    lp += reparam::log_pdf(mass, kUnitPrior, kUnitPrior);
    lp += reparam::log_pdf(s_rate, kUnitPrior, kUnitPrior);
    return lp;
}

double EpmModel::log_joint(const Vec& x) const {
    return log_likelihood(x) + log_prior(x);
}

Vec EpmModel::grad_log_joint(const Vec& x) const {
    if (x.size() != latent_dim()) {
        throw std::invalid_argument("epm: latent vector has wrong size");
    }
    check_positive(x, "epm grad_log_joint");
    const int n = data_.n_nodes;
    Eigen::Map<const RowMat> w(x.data(), n, k_);
    Eigen::Map<const Vec> r(x.data() + n * k_, k_);
    const double mass = x[strength_mass_index()];
    const double s_rate = x[strength_rate_index()];

    Vec grad = Vec::Zero(latent_dim());
    Eigen::Map<RowMat> gw(grad.data(), n, k_);
    Eigen::Map<Vec> gr(grad.data() + n * k_, k_);

    // Non-edge mass: d/dw_ik = -r_k (colsum_k - w_ik), d/dr_k = -(colsum_k^2
    // - colsumsq_k)/2.
    Vec col_sum = w.colwise().sum().transpose();
    Vec col_sum_sq = w.cwiseAbs2().colwise().sum().transpose();
    for (int k = 0; k < k_; ++k) {
        gw.col(k) = -r[k] * (col_sum[k] - w.col(k).array()).matrix();
    }
    gr = -0.5 * (col_sum.array().square() - col_sum_sq.array()).matrix();

    // Present pairs: coefficient 1/(1 - e^-p) on d p / d theta, replacing the
    // -1 already counted in the non-edge mass.
    for (const auto& [i, j] : data_.edges) {
        double p = link_intensity(x, i, j);
        if (p < kIntensityFloor) {
            p = kIntensityFloor;
            floor_hits_.fetch_add(1, std::memory_order_relaxed);
        }
        const double c = -1.0 / std::expm1(-p);
        gw.row(i) += c * (r.array() * w.row(j).transpose().array()).matrix().transpose();
        gw.row(j) += c * (r.array() * w.row(i).transpose().array()).matrix().transpose();
        gr += c * (w.row(i).transpose().array() * w.row(j).transpose().array()).matrix();
    }
    // Held-out pairs: add p back, coefficient +1.
    for (const auto& [i, j] : data_.heldout) {
        gw.row(i) += (r.array() * w.row(j).transpose().array()).matrix().transpose();
        gw.row(j) += (r.array() * w.row(i).transpose().array()).matrix().transpose();
        gr += (w.row(i).transpose().array() * w.row(j).transpose().array()).matrix();
    }

    // Priors.
    const double mass_k = mass / k_;
    double g_mass = 0.0;
    double g_srate = 0.0;
    const double psi_mass_k = special::digamma(mass_k);
    const double log_srate = std::log(s_rate);
    for (int k = 0; k < k_; ++k) {
        gr[k] += (mass_k - 1.0) / r[k] - s_rate;
        g_mass += (log_srate - psi_mass_k + std::log(r[k])) / k_;
        g_srate += mass_k / s_rate - r[k];
    }
    grad[strength_mass_index()] = g_mass + (kUnitPrior - 1.0) / mass - kUnitPrior;
    grad[strength_rate_index()] = g_srate + (kUnitPrior - 1.0) / s_rate - kUnitPrior;

    for (int i = 0; i < n; ++i) {
        const double ai = x[node_shape_index(i)];
        const double ci = x[node_rate_index(i)];
        const double psi_ai = special::digamma(ai);
        const double log_ci = std::log(ci);
        double g_ai = 0.0;
        double g_ci = 0.0;
        for (int k = 0; k < k_; ++k) {
            gw(i, k) += (ai - 1.0) / w(i, k) - ci;
            g_ai += log_ci - psi_ai + std::log(w(i, k));
            g_ci += ai / ci - w(i, k);
        }
        grad[node_shape_index(i)] =
            g_ai + (kNodeShapePrior - 1.0) / ai - kNodeShapePrior;
        grad[node_rate_index(i)] = g_ci + (kUnitPrior - 1.0) / ci - kUnitPrior;
    }
    return grad;
}

std::vector<double> predict_link_probs(const EpmModel& model,
                                       const std::vector<std::pair<int, int>>& pairs,
                                       int n_samples,
                                       const std::function<void(Vec&)>& sampler) {
    if (n_samples < 1) throw std::invalid_argument("predict_link_probs: need n_samples >= 1");
    std::vector<double> probs(pairs.size(), 0.0);
    Vec x(model.latent_dim());
    for (int s = 0; s < n_samples; ++s) {
        sampler(x);
        if (x.size() != model.latent_dim()) {
            throw std::invalid_argument("predict_link_probs: sampler resized the latent vector");
        }
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            double intensity = model.link_intensity(x, pairs[p].first, pairs[p].second);
            probs[p] += -std::expm1(-intensity);
        }
    }
    for (double& v : probs) v /= n_samples;
    return probs;
}

} // namespace epm
} // namespace gsgvb
