#pragma once

// Evaluation metrics: ranking quality for link prediction, subspace
// recovery error for factor loadings, and Gaussian held-out fit measures
// with a shrinkage covariance baseline.

#include <vector>

#include "gsgvb/types.hpp"

namespace gsgvb {
namespace metrics {

// Area under the ROC curve via midranks; tied scores earn half credit.
// Labels must be 0 or 1 and both classes must be present.
double roc_auc(const Vec& scores, const std::vector<int>& labels);

// Permutation- and scale-invariant loading recovery error in [0, 1]:
// 0 when `estimated` spans `reference` up to column order and positive
// scaling, 1 at maximal mixing.  Both matrices are D x K; `estimated`
// must have full column rank.
double amari_error(const Mat& estimated, const Mat& reference);

// Mean negative log density of the rows of `y` under a zero-mean Gaussian
// with the given covariance, in nats.  A singular covariance yields
// +infinity; a non-symmetric or indefinite matrix is rejected.
double gaussian_perplexity(const Mat& y, const Mat& cov);

// Row-sample covariance (1/N) Y^T Y; `center` subtracts column means first.
Mat empirical_cov(const Mat& y, bool center = false);

struct LedoitWolfResult {
    Mat cov;
    double shrinkage = 0.0; // weight on the scaled-identity target
};

// Well-conditioned shrinkage covariance: convex combination of the sample
// covariance and a scaled identity, with the combination weight chosen to
// minimize expected squared error.
LedoitWolfResult ledoit_wolf(const Mat& y, bool center = false);

} // namespace metrics
} // namespace gsgvb
