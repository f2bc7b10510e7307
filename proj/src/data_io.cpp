#include "gsgvb/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "gsgvb/gamma_reparam.hpp"
#include "gsgvb/special.hpp"

namespace gsgvb {
namespace data_io {

namespace {

constexpr double kLoadingZeroProb = 0.8;
constexpr double kNoiseStd = 0.31622776601683793320; // sqrt(0.1)
constexpr int kFormatVersion = 1;

// Deterministic draws owned by this module, so generated datasets never
// depend on the standard library's distribution implementations.
class Rng {
  public:
    // Tag separates the streams of different generators under a shared seed.
    Rng(long seed, unsigned tag) {
        const auto bits = static_cast<std::uint64_t>(seed);
        std::seed_seq seq{static_cast<unsigned>(bits & 0xffffffffu),
                          static_cast<unsigned>(bits >> 32), tag};
        gen_.seed(seq);
    }

    double uniform() {
        double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return std::clamp(u, vb::kUniformClamp, 1.0 - vb::kUniformClamp);
    }

    double normal() { return special::std_normal_inv_cdf(uniform()); }

    double gamma(double shape, double rate) {
        return reparam::sample(shape, rate, uniform());
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t index(std::uint64_t n) {
        const std::uint64_t threshold = (-n) % n; // 2^64 mod n
        std::uint64_t v;
        do {
            v = gen_();
        } while (v < threshold);
        return v % n;
    }

  private:
    std::mt19937_64 gen_;
};

[[noreturn]] void line_error(const std::string& path, long line,
                             const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

} // namespace

EdgeList load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open edge list file: " + path);
    }

    EdgeList result;
    std::set<std::pair<int, int>> edges;
    long declared_nodes = -1;
    int max_id = -1;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        if (line[0] == '#') {
            std::istringstream header(line.substr(1));
            std::string word;
            header >> word;
            if (word != "nodes") continue;
            long n = 0;
            if (!(header >> n) || n < 1) {
                line_error(path, line_no, "malformed #nodes header");
            }
            if (declared_nodes >= 0) {
                line_error(path, line_no, "duplicate #nodes header");
            }
            declared_nodes = n;
            continue;
        }

        std::istringstream fields(line);
        long i = 0;
        long j = 0;
        std::string trailing;
        if (!(fields >> i >> j) || (fields >> trailing)) {
            line_error(path, line_no, "expected two integer node ids");
        }
        if (i < 0 || j < 0) {
            line_error(path, line_no, "node ids must be non-negative");
        }
        if (i == j) {
            ++result.self_loops_skipped;
            continue;
        }
        max_id = static_cast<int>(std::max<long>(max_id, std::max(i, j)));
        const int lo = static_cast<int>(std::min(i, j));
        const int hi = static_cast<int>(std::max(i, j));
        if (!edges.insert({lo, hi}).second) {
            ++result.duplicates_merged;
        }
    }

    if (declared_nodes < 0 && max_id < 0) {
        throw std::runtime_error(path +
                                 ": no edges and no #nodes header; node count unknown");
    }
    if (declared_nodes >= 0 && max_id >= declared_nodes) {
        throw std::runtime_error(path + ": node id " + std::to_string(max_id) +
                                 " exceeds declared node count " +
                                 std::to_string(declared_nodes));
    }
    result.data.n_nodes =
        declared_nodes >= 0 ? static_cast<int>(declared_nodes) : max_id + 1;
    result.data.edges.assign(edges.begin(), edges.end());
    return result;
}

std::vector<PairSplit> split_pairs(const epm::EpmData& data,
                                   const SplitSpec& spec) {
    if (!(spec.holdout_fraction > 0.0) || !(spec.holdout_fraction < 1.0)) {
        throw std::invalid_argument("holdout_fraction must lie in (0, 1)");
    }
    if (spec.n_splits < 1) {
        throw std::invalid_argument("n_splits must be at least 1");
    }
    if (data.n_nodes < 2) {
        throw std::invalid_argument("need at least 2 nodes to split");
    }
    if (!data.heldout.empty()) {
        throw std::invalid_argument("input data already has masked pairs");
    }

    const std::set<std::pair<int, int>> edge_set(data.edges.begin(),
                                                 data.edges.end());
    std::vector<std::pair<int, int>> all_pairs;
    all_pairs.reserve(static_cast<std::size_t>(data.n_nodes) *
                      (data.n_nodes - 1) / 2);
    for (int i = 0; i < data.n_nodes; ++i) {
        for (int j = i + 1; j < data.n_nodes; ++j) {
            all_pairs.emplace_back(i, j);
        }
    }

    // Deterministic partial Fisher-Yates: the first n_take entries become
    // the sample.
    auto take_prefix = [](std::vector<std::pair<int, int>>& pairs,
                          std::size_t n_take, Rng& rng) {
        for (std::size_t t = 0; t < n_take; ++t) {
            const std::size_t rest = pairs.size() - t;
            std::swap(pairs[t], pairs[t + rng.index(rest)]);
        }
        pairs.resize(n_take);
    };

    std::vector<PairSplit> splits;
    splits.reserve(spec.n_splits);
    for (int s = 0; s < spec.n_splits; ++s) {
        Rng rng(spec.seed, 0x51000000u + static_cast<unsigned>(s));

        std::vector<std::pair<int, int>> test_pairs;
        if (spec.stratified) {
            std::vector<std::pair<int, int>> pos(data.edges.begin(),
                                                 data.edges.end());
            std::vector<std::pair<int, int>> neg;
            for (const auto& p : all_pairs) {
                if (!edge_set.count(p)) neg.push_back(p);
            }
            const auto n_pos = static_cast<std::size_t>(
                std::llround(spec.holdout_fraction * pos.size()));
            const auto n_neg = static_cast<std::size_t>(
                std::llround(spec.holdout_fraction * neg.size()));
            take_prefix(pos, n_pos, rng);
            take_prefix(neg, n_neg, rng);
            test_pairs = pos;
            test_pairs.insert(test_pairs.end(), neg.begin(), neg.end());
        } else {
            test_pairs = all_pairs;
            const auto n_test = static_cast<std::size_t>(
                std::llround(spec.holdout_fraction * all_pairs.size()));
            if (n_test < 1) {
                throw std::invalid_argument(
                    "holdout_fraction selects no pairs for this graph");
            }
            take_prefix(test_pairs, n_test, rng);
        }
        if (test_pairs.size() >= all_pairs.size()) {
            throw std::invalid_argument(
                "holdout_fraction leaves no training pairs");
        }
        std::sort(test_pairs.begin(), test_pairs.end());

        PairSplit split;
        split.train.n_nodes = data.n_nodes;
        split.train.heldout = test_pairs;
        const std::set<std::pair<int, int>> masked(test_pairs.begin(),
                                                   test_pairs.end());
        for (const auto& e : data.edges) {
            if (!masked.count(e)) split.train.edges.push_back(e);
        }
        split.test.reserve(test_pairs.size());
        for (const auto& p : test_pairs) {
            split.test.push_back(
                {p.first, p.second, edge_set.count(p) ? 1 : 0});
        }
        splits.push_back(std::move(split));
    }
    return splits;
}

SynthGpfa synth_gpfa(int n_dims, int n_factors, int n_samples, long seed) {
    if (n_dims < 1 || n_factors < 1 || n_samples < 1) {
        throw std::invalid_argument("synth_gpfa dimensions must be positive");
    }
    Rng rng(seed, 0x6f0001u);

    SynthGpfa out;
    out.w_true = Mat::Zero(n_dims, n_factors);
    for (int d = 0; d < n_dims; ++d) {
        for (int k = 0; k < n_factors; ++k) {
            const double u = rng.uniform();
            if (u >= kLoadingZeroProb) {
                // Conditional on landing in the non-zero branch, the
                // rescaled remainder is itself uniform on [0, 1).
                out.w_true(d, k) = (u - kLoadingZeroProb) /
                                   (1.0 - kLoadingZeroProb);
            }
        }
    }

    // Factor and noise draws interleave per sample, so generating more
    // samples under the same seed extends the data without changing the
    // earlier rows.  Train/test pairs come from one stream that way.
    out.y.resize(n_samples, n_dims);
    Vec factor(n_factors);
    for (int n = 0; n < n_samples; ++n) {
        for (int k = 0; k < n_factors; ++k) factor[k] = rng.normal();
        out.y.row(n) = (out.w_true * factor).transpose();
        for (int d = 0; d < n_dims; ++d) {
            out.y(n, d) += kNoiseStd * rng.normal();
        }
    }
    return out;
}

namespace {

// Shared edge sampler: y_ij ~ Bernoulli(1 - exp(-sum_k r_k w_ik w_jk)).
void sample_edges(SynthEpm& out, Rng& rng) {
    const int n = static_cast<int>(out.w_true.rows());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double intensity =
                (out.w_true.row(i).array() * out.w_true.row(j).array() *
                 out.r_true.transpose().array())
                    .sum();
            if (rng.bernoulli(-std::expm1(-intensity))) {
                out.data.edges.emplace_back(i, j);
            }
        }
    }
}

} // namespace

SynthEpm synth_epm(int n_nodes, int n_communities, long seed) {
    if (n_nodes < 2 || n_communities < 1) {
        throw std::invalid_argument("synth_epm needs n_nodes >= 2, K >= 1");
    }
    Rng rng(seed, 0xe90001u);

    SynthEpm out;
    out.data.n_nodes = n_nodes;
    const double mass = rng.gamma(1.0, 1.0);
    const double strength_rate = rng.gamma(1.0, 1.0);
    out.r_true.resize(n_communities);
    for (int k = 0; k < n_communities; ++k) {
        out.r_true[k] = rng.gamma(mass / n_communities, strength_rate);
    }
    Vec node_shape(n_nodes);
    Vec node_rate(n_nodes);
    for (int i = 0; i < n_nodes; ++i) node_shape[i] = rng.gamma(0.01, 0.01);
    for (int i = 0; i < n_nodes; ++i) node_rate[i] = rng.gamma(1.0, 1.0);
    out.w_true.resize(n_nodes, n_communities);
    for (int i = 0; i < n_nodes; ++i) {
        for (int k = 0; k < n_communities; ++k) {
            out.w_true(i, k) = rng.gamma(node_shape[i], node_rate[i]);
        }
    }
    sample_edges(out, rng);
    return out;
}

SynthEpm synth_epm_planted(int n_nodes, int n_communities, long seed,
                           double within, double between) {
    if (n_nodes < 2 || n_communities < 1) {
        throw std::invalid_argument(
            "synth_epm_planted needs n_nodes >= 2, K >= 1");
    }
    if (within < 0.0 || between < 0.0) {
        throw std::invalid_argument("block strengths must be non-negative");
    }
    Rng rng(seed, 0xb10c2u);

    SynthEpm out;
    out.data.n_nodes = n_nodes;
    out.r_true = Vec::Ones(n_communities);
    out.w_true.resize(n_nodes, n_communities);
    const int node_half = (n_nodes + 1) / 2;
    const int comm_half = (n_communities + 1) / 2;
    for (int i = 0; i < n_nodes; ++i) {
        const int node_block = i < node_half ? 0 : 1;
        for (int k = 0; k < n_communities; ++k) {
            const int comm_block = k < comm_half ? 0 : 1;
            out.w_true(i, k) = node_block == comm_block ? within : between;
        }
    }
    sample_edges(out, rng);
    return out;
}

void save_qparams(const QParams& params, const std::string& path) {
    if (params.model.empty() || params.algorithm.empty()) {
        throw std::invalid_argument("qparams model and algorithm must be set");
    }
    if (!params.param_a.allFinite() || !params.param_b.allFinite()) {
        throw std::invalid_argument("qparams vectors must be finite");
    }
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["model"] = params.model;
    j["algorithm"] = params.algorithm;
    j["layout"] = params.layout;
    j["seed"] = params.seed;
    j["iterations"] = params.iterations;
    j["param_a"] = std::vector<double>(params.param_a.data(),
                                       params.param_a.data() +
                                           params.param_a.size());
    j["param_b"] = std::vector<double>(params.param_b.data(),
                                       params.param_b.data() +
                                           params.param_b.size());
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write parameter file: " + path);
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("short write to parameter file: " + path);
    }
}

QParams load_qparams(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open parameter file: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": corrupt parameter file: " +
                                 e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kFormatVersion) {
            throw std::runtime_error(
                path + ": unsupported format version " +
                std::to_string(version) + " (expected " +
                std::to_string(kFormatVersion) + ")");
        }
        QParams params;
        params.model = j.at("model").get<std::string>();
        params.algorithm = j.at("algorithm").get<std::string>();
        params.layout = j.at("layout").get<std::string>();
        params.seed = j.at("seed").get<long>();
        params.iterations = j.at("iterations").get<long>();
        const auto a = j.at("param_a").get<std::vector<double>>();
        const auto b = j.at("param_b").get<std::vector<double>>();
        params.param_a.resize(static_cast<Index>(a.size()));
        std::copy(a.begin(), a.end(), params.param_a.data());
        params.param_b.resize(static_cast<Index>(b.size()));
        std::copy(b.begin(), b.end(), params.param_b.data());
        return params;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": malformed parameter file: " +
                                 e.what());
    }
}

void save_matrix(const std::string& path, const Mat& m, char delimiter) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write matrix file: " + path);
    }
    out << std::setprecision(17);
    for (long i = 0; i < m.rows(); ++i) {
        for (long j = 0; j < m.cols(); ++j) {
            if (j > 0) out << delimiter;
            out << m(i, j);
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("short write to matrix file: " + path);
    }
}

Mat load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open matrix file: " + path);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::replace(line.begin(), line.end(), '\t', ' ');
        std::istringstream fields(line);
        std::vector<double> row;
        double v = 0.0;
        while (fields >> v) row.push_back(v);
        if (!fields.eof()) {
            line_error(path, line_no, "non-numeric matrix entry");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            line_error(path, line_no, "inconsistent column count");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Mat(0, 0);
    Mat m(static_cast<long>(rows.size()),
          static_cast<long>(rows.front().size()));
    for (long i = 0; i < m.rows(); ++i) {
        for (long j = 0; j < m.cols(); ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)]
                          [static_cast<std::size_t>(j)];
        }
    }
    return m;
}

} // namespace data_io
} // namespace gsgvb
