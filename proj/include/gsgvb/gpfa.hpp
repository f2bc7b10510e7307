#pragma once

// Factor analysis with positive loadings and per-factor relevance weights.
// Observations are zero-mean Gaussian with covariance C = W W^T + (1/tau) I,
// where W is a D x K positive loading matrix and tau the noise precision.
// The likelihood depends on the data only through its scatter matrix, so one
// fit iteration costs the same for 100 or 100k samples.  Gamma priors tie
// each loading column to a relevance weight r_k, which lets surplus factors
// shrink away.

#include <functional>
#include <optional>

#include "gsgvb/types.hpp"
#include "gsgvb/vb.hpp"

namespace gsgvb {
namespace gpfa {

struct GpfaData {
    Mat scatter;        // Y^T Y, symmetrized
    long n_samples = 0;
    int dim = 0;

    // Builds the scatter from an N x D sample matrix.
    static GpfaData from_samples(const Mat& y);
    // Takes a precomputed scatter; symmetrizes and checks positive
    // semi-definiteness.
    static GpfaData from_scatter(Mat scatter, long n_samples);
};

class GpfaModel : public vb::ModelInterface {
  public:
    // Noise precision inferred with a Gamma(0.1, 0.1) prior, or held at a
    // fixed value, in which case the tau coordinate is carried but inert
    // (zero gradient, ignored by the likelihood).
    GpfaModel(GpfaData data, int n_factors,
              std::optional<double> fixed_tau = std::nullopt);

    Index latent_dim() const override;
    double log_joint(const Vec& x) const override;
    Vec grad_log_joint(const Vec& x) const override;

    double log_likelihood(const Vec& x) const;
    double log_prior(const Vec& x) const;

    // Latent layout: [W row-major (D x K) | tau | loading scale |
    //                 relevances (K) | relevance mass | relevance rate].
    Index w_index(int dim_index, int factor) const;
    Index tau_index() const;
    Index loading_scale_index() const;
    Index relevance_index(int factor) const;
    Index relevance_mass_index() const;
    Index relevance_rate_index() const;

    int n_dims() const { return data_.dim; }
    int n_factors() const { return k_; }
    long n_samples() const { return data_.n_samples; }
    const GpfaData& data() const { return data_; }

    // Effective noise precision for a latent vector (the fixed value if set).
    double effective_tau(const Vec& x) const;

    // Model covariance W W^T + (1/tau) I for a latent vector.
    Mat covariance(const Vec& x) const;

  private:
    GpfaData data_;
    int k_;
    std::optional<double> fixed_tau_;
};

// Monte-Carlo posterior mean of the model covariance over n_samples draws
// from `sampler` (same contract as the link-probability predictor).
Mat expected_covariance(const GpfaModel& model, int n_samples,
                        const std::function<void(Vec&)>& sampler);

} // namespace gpfa
} // namespace gsgvb
