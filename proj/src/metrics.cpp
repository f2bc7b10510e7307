#include "gsgvb/metrics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gsgvb {
namespace metrics {

namespace {

constexpr double kTwoPi = 6.2831853071795864769;

Mat maybe_center(const Mat& y, bool center) {
    if (!center) return y;
    return y.rowwise() - y.colwise().mean();
}

void check_samples(const Mat& y) {
    if (y.rows() < 1 || y.cols() < 1) {
        throw std::invalid_argument("sample matrix must be non-empty");
    }
    if (!y.allFinite()) {
        throw std::invalid_argument("sample matrix has non-finite entries");
    }
}

} // namespace

double roc_auc(const Vec& scores, const std::vector<int>& labels) {
    const long n = scores.size();
    if (n == 0 || static_cast<long>(labels.size()) != n) {
        throw std::invalid_argument("scores and labels must match and be non-empty");
    }
    long n_pos = 0;
    for (long i = 0; i < n; ++i) {
        if (!std::isfinite(scores[i])) {
            throw std::invalid_argument("scores must be finite");
        }
        if (labels[i] != 0 && labels[i] != 1) {
            throw std::invalid_argument("labels must be 0 or 1");
        }
        n_pos += labels[i];
    }
    const long n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("both classes must be present");
    }

    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    std::sort(order.begin(), order.end(),
              [&](long a, long b) { return scores[a] < scores[b]; });

    // Midranks: every member of a tie group gets the group's average rank.
    double pos_rank_sum = 0.0;
    long i = 0;
    while (i < n) {
        long j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j + 1);
        for (long t = i; t < j; ++t) {
            if (labels[order[t]] == 1) pos_rank_sum += midrank;
        }
        i = j;
    }
    const double n_pos_d = static_cast<double>(n_pos);
    return (pos_rank_sum - 0.5 * n_pos_d * (n_pos_d + 1.0)) /
           (n_pos_d * static_cast<double>(n_neg));
}

double amari_error(const Mat& estimated, const Mat& reference) {
    if (estimated.rows() != reference.rows() ||
        estimated.cols() != reference.cols()) {
        throw std::invalid_argument("loading matrices must have equal shapes");
    }
    const long k = estimated.cols();
    if (k < 2 || estimated.rows() < k) {
        throw std::invalid_argument(
            "loading matrices need at least 2 factors and rows >= factors");
    }
    if (!estimated.allFinite() || !reference.allFinite()) {
        throw std::invalid_argument("loading matrices must be finite");
    }

    Eigen::CompleteOrthogonalDecomposition<Mat> cod(estimated);
    if (cod.rank() < k) {
        throw std::invalid_argument("estimated loadings are rank deficient");
    }
    if (Eigen::CompleteOrthogonalDecomposition<Mat>(reference).rank() < k) {
        throw std::invalid_argument("reference loadings are rank deficient");
    }
    const Mat mixing = (cod.pseudoInverse() * reference).cwiseAbs();

    double total = 0.0;
    for (long r = 0; r < k; ++r) {
        total += mixing.row(r).sum() / mixing.row(r).maxCoeff() - 1.0;
        total += mixing.col(r).sum() / mixing.col(r).maxCoeff() - 1.0;
    }
    return total / static_cast<double>(2 * k * (k - 1));
}

double gaussian_perplexity(const Mat& y, const Mat& cov) {
    check_samples(y);
    if (cov.rows() != y.cols() || cov.cols() != y.cols()) {
        throw std::invalid_argument("covariance shape must match sample dim");
    }
    if (!cov.allFinite() ||
        (cov - cov.transpose()).cwiseAbs().maxCoeff() >
            1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("covariance must be finite and symmetric");
    }

    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success ||
        llt.matrixLLT().diagonal().minCoeff() <= 0.0) {
        // Singular covariances carry zero density off their span; anything
        // with a negative direction is not a covariance at all.
        Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
        const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
            throw std::invalid_argument(
                "covariance must be positive semi-definite");
        }
        return std::numeric_limits<double>::infinity();
    }

    const double n = static_cast<double>(y.rows());
    const double d = static_cast<double>(y.cols());
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double quad =
        (y.cwiseProduct(llt.solve(y.transpose()).transpose())).sum();
    return 0.5 * d * std::log(kTwoPi) + 0.5 * log_det + 0.5 * quad / n;
}

Mat empirical_cov(const Mat& y, bool center) {
    check_samples(y);
    const Mat x = maybe_center(y, center);
    Mat s = x.transpose() * x / static_cast<double>(x.rows());
    return ((s + s.transpose()) * 0.5).eval();
}

LedoitWolfResult ledoit_wolf(const Mat& y, bool center) {
    check_samples(y);
    const Mat x = maybe_center(y, center);
    const double n = static_cast<double>(x.rows());
    const double d = static_cast<double>(x.cols());

    const Mat s = empirical_cov(x, false);
    const double mu = s.trace() / d;
    const double frob2 = s.squaredNorm();
    const double dispersion2 = (frob2 - mu * mu * d) / d;

    LedoitWolfResult result;
    if (dispersion2 <= 0.0) {
        // The sample covariance already is a scaled identity.
        result.cov = mu * Mat::Identity(x.cols(), x.cols());
        result.shrinkage = 1.0;
        return result;
    }

    double quartic_sum = 0.0;
    for (long i = 0; i < x.rows(); ++i) {
        quartic_sum += std::pow(x.row(i).squaredNorm(), 2);
    }
    const double noise2_raw = (quartic_sum - n * frob2) / (n * n * d);
    const double noise2 = std::clamp(noise2_raw, 0.0, dispersion2);

    result.shrinkage = noise2 / dispersion2;
    result.cov = result.shrinkage * mu * Mat::Identity(x.cols(), x.cols()) +
                 (1.0 - result.shrinkage) * s;
    return result;
}

} // namespace metrics
} // namespace gsgvb
