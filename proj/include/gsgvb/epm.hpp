#pragma once

// Overlapping-community model for undirected graphs.  Each node i carries K
// positive weights w_ik, each community a positive strength r_k, and a pair
// (i,j) is linked with probability 1 - exp(-sum_k r_k w_ik w_jk).  Gamma
// priors sit on all latents, with per-node shape/rate hyperpriors and a
// shared strength hyperprior, so the whole hierarchy is one positive vector
// the variational engine can fit.
//
// The likelihood over non-edges is folded into a closed form over column
// sums, so evaluation costs O(NK + |edges| K) rather than O(N^2 K).

#include <atomic>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "gsgvb/types.hpp"
#include "gsgvb/vb.hpp"

namespace gsgvb {
namespace epm {

struct EpmData {
    int n_nodes = 0;
    // Observed present pairs, each with i < j.
    std::vector<std::pair<int, int>> edges;
    // Pairs excluded from the likelihood (e.g. held out for evaluation).
    std::vector<std::pair<int, int>> heldout;
};

class EpmModel : public vb::ModelInterface {
  public:
    // Validates indices, ordering and duplicates; throws std::invalid_argument.
    EpmModel(EpmData data, int n_communities);

    Index latent_dim() const override;
    double log_joint(const Vec& x) const override;
    Vec grad_log_joint(const Vec& x) const override;

    double log_likelihood(const Vec& x) const;
    double log_prior(const Vec& x) const;

    // Latent layout: [W row-major (N x K) | r (K) | node shapes (N) |
    //                 node rates (N) | strength mass | strength rate].
    Index w_index(int node, int community) const;
    Index r_index(int community) const;
    Index node_shape_index(int node) const;
    Index node_rate_index(int node) const;
    Index strength_mass_index() const;
    Index strength_rate_index() const;

    int n_nodes() const { return data_.n_nodes; }
    int n_communities() const { return k_; }
    const EpmData& data() const { return data_; }

    // sum_k r_k w_ik w_jk for a pair under the latent vector x.
    double link_intensity(const Vec& x, int i, int j) const;

    // Times a present-pair intensity had to be floored away from zero since
    // construction or the last reset.
    long floor_hits() const { return floor_hits_.load(); }
    void reset_floor_hits() { floor_hits_.store(0); }

  private:
    EpmData data_;
    int k_;
    mutable std::atomic<long> floor_hits_{0};
};

// Mean of 1 - exp(-intensity) for each pair over n_samples latent draws; the
// same draws are shared across all pairs.  `sampler` must fill its argument
// with one complete latent vector per call.
std::vector<double> predict_link_probs(const EpmModel& model,
                                       const std::vector<std::pair<int, int>>& pairs,
                                       int n_samples,
                                       const std::function<void(Vec&)>& sampler);

} // namespace epm
} // namespace gsgvb
