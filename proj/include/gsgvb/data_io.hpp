#pragma once

// File ingestion, synthetic data generators, train/test pair splitting,
// and persistence of fitted variational parameters.  All generators are
// deterministic functions of their seed.

#include <string>
#include <vector>

#include "gsgvb/epm.hpp"
#include "gsgvb/types.hpp"

namespace gsgvb {
namespace data_io {

struct EdgeList {
    epm::EpmData data;
    long self_loops_skipped = 0; // offending lines are dropped, not fatal
    long duplicates_merged = 0;
};

// Reads a text edge list: one "i<TAB>j" pair per line (spaces work too),
// 0-based ids, undirected.  Symmetrizes and dedupes.  An optional header
// line "#nodes N" fixes the node count; otherwise it is max id + 1.
// Other lines starting with '#' are comments.  Malformed lines raise an
// error naming the line number.
EdgeList load_edge_list(const std::string& path);

struct SplitSpec {
    double holdout_fraction = 0.2; // in (0,1)
    long seed = 0;
    int n_splits = 1;
    // Default samples the test set over all unordered pairs uniformly;
    // the stratified variant samples edges and non-edges separately so
    // the test label ratio matches the graph density exactly.
    bool stratified = false;
};

struct TestPair {
    int i = 0;
    int j = 0;
    int label = 0; // 1 when the pair is an edge in the full graph
};

struct PairSplit {
    epm::EpmData train; // test pairs masked out via the heldout list
    std::vector<TestPair> test;
};

// Produces spec.n_splits independent splits, each deterministic in
// (spec.seed, split index).  Every unordered pair lands in exactly one of
// {train-observed, test}.
std::vector<PairSplit> split_pairs(const epm::EpmData& data,
                                   const SplitSpec& spec);

struct SynthGpfa {
    Mat y;      // N x D samples
    Mat w_true; // D x K generating loadings
};

// Sparse-loading factor data: each loading is 0 with probability 0.8 and
// uniform on [0, 1] otherwise; factors are standard normal; additive noise
// has variance 0.1.
SynthGpfa synth_gpfa(int n_dims, int n_factors, int n_samples, long seed);

struct SynthEpm {
    epm::EpmData data;
    Mat w_true; // N x K generating loadings
    Vec r_true; // K community strengths
};

// Draws latents from the network model's own priors, then edges from the
// link function.
SynthEpm synth_epm(int n_nodes, int n_communities, long seed);

// Planted two-community-block structure: nodes and communities are split
// into two halves, loadings are `within` on the matching half and
// `between` elsewhere, strengths are 1.  Sharp block contrast makes link
// prediction recoverable by construction.
SynthEpm synth_epm_planted(int n_nodes, int n_communities, long seed,
                           double within = 1.7, double between = 0.005);

struct QParams {
    std::string model;     // "epm" or "gpfa"
    std::string algorithm; // "gamma_sgvb", "norm_sgvb", or "map"
    std::string layout;    // opaque latent-layout descriptor, checked on eval
    long seed = 0;
    long iterations = 0;
    Vec param_a; // meaning depends on algorithm (gamma: unconstrained shape)
    Vec param_b; // gamma: unconstrained rate; map: empty
};

// Versioned JSON persistence; doubles survive bit-identically.
void save_qparams(const QParams& params, const std::string& path);
QParams load_qparams(const std::string& path);

// Headerless delimited text matrices, one row per line.
void save_matrix(const std::string& path, const Mat& m, char delimiter = ' ');
Mat load_matrix(const std::string& path);

} // namespace data_io
} // namespace gsgvb
