// Experiment runner: fit variational or MAP estimates, sweep optimizer
// grids, and evaluate fitted posteriors on held-out data.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gsgvb/data_io.hpp"
#include "gsgvb/epm.hpp"
#include "gsgvb/errors.hpp"
#include "gsgvb/gpfa.hpp"
#include "gsgvb/metrics.hpp"
#include "gsgvb/types.hpp"
#include "gsgvb/vb.hpp"

namespace {

using gsgvb::Mat;
using gsgvb::Vec;
using nlohmann::json;

struct Config {
    std::string model;
    std::string algorithm = "gamma_sgvb";
    std::string optimizer = "adadelta";
    double step = -1.0; // <0 keeps each optimizer's built-in default
    double momentum = 1.0;
    double rho = 0.9;
    double eps = 1e-4;
    int k = 5;
    int iterations = 1000;
    long seed = 0;
    int window = 100;
    std::string data_path;
    std::string out_dir;

    int synth_nodes = 0;
    bool synth_planted = false;
    int synth_dims = 0;
    long synth_samples = 0;
    int synth_k = 0;  // generator truncation; defaults to --k
    long synth_seed = std::numeric_limits<long>::min();

    double holdout = 0.2;
    int n_splits = 0;
    long split_seed = std::numeric_limits<long>::min();
    bool stratified = false;
    int split_index = -1;

    std::optional<double> fixed_tau;

    long synth_truncation() const { return synth_k > 0 ? synth_k : k; }
    long generator_seed() const {
        return synth_seed == std::numeric_limits<long>::min() ? seed
                                                              : synth_seed;
    }
    long splitter_seed() const {
        return split_seed == std::numeric_limits<long>::min() ? seed
                                                              : split_seed;
    }
};

std::string resolved_out_dir(const Config& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("GSGVB_OUT_DIR")) {
        if (*env) return env;
    }
    return ".";
}

void require_file(const std::string& flag, const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error(flag + ": file not found: " + path);
    }
}

gsgvb::optim::OptimizerConfig optimizer_config(const Config& cfg) {
    if (!(cfg.momentum > 0.0) || cfg.momentum > 1.0) {
        throw std::invalid_argument("--momentum must lie in (0, 1]");
    }
    gsgvb::optim::OptimizerConfig oc;
    oc.name = cfg.optimizer;
    oc.rho = cfg.rho;
    oc.eps = cfg.eps;
    oc.momentum_weight = cfg.momentum;
    if (cfg.step > 0.0) {
        oc.step_size = cfg.step;
        oc.scale = cfg.step;
    }
    return oc;
}

gsgvb::vb::FitOptions fit_options(const Config& cfg,
                                  const gsgvb::optim::OptimizerConfig& oc) {
    gsgvb::vb::FitOptions options;
    options.iterations = cfg.iterations;
    options.seed = static_cast<std::uint64_t>(cfg.seed);
    options.optimizer = oc;
    return options;
}

// ---------------------------------------------------------------------------
// Data sources

struct EpmSource {
    gsgvb::epm::EpmData data;
    Mat w_true;
    bool has_truth = false;
    std::string descriptor;
};

EpmSource load_epm_source(const Config& cfg) {
    EpmSource source;
    if (!cfg.data_path.empty()) {
        require_file("--data", cfg.data_path);
        const auto loaded = gsgvb::data_io::load_edge_list(cfg.data_path);
        if (loaded.self_loops_skipped > 0) {
            std::cerr << "warning: skipped " << loaded.self_loops_skipped
                      << " self-loop line(s) in " << cfg.data_path << "\n";
        }
        if (loaded.duplicates_merged > 0) {
            std::cerr << "warning: merged " << loaded.duplicates_merged
                      << " duplicate edge(s) in " << cfg.data_path << "\n";
        }
        source.data = loaded.data;
        source.descriptor = "edge_list:" + cfg.data_path;
        return source;
    }
    if (cfg.synth_nodes > 0) {
        const int k = static_cast<int>(cfg.synth_truncation());
        const long seed = cfg.generator_seed();
        const auto synth =
            cfg.synth_planted
                ? gsgvb::data_io::synth_epm_planted(cfg.synth_nodes, k, seed)
                : gsgvb::data_io::synth_epm(cfg.synth_nodes, k, seed);
        source.data = synth.data;
        source.w_true = synth.w_true;
        source.has_truth = true;
        std::ostringstream desc;
        desc << (cfg.synth_planted ? "synth_epm_planted" : "synth_epm")
             << ":nodes=" << cfg.synth_nodes << ":k=" << k << ":seed=" << seed;
        source.descriptor = desc.str();
        return source;
    }
    throw std::invalid_argument(
        "epm runs need --data or --synth-nodes to define the graph");
}

struct GpfaSource {
    Mat train;
    Mat test; // possibly empty
    Mat w_true;
    bool has_truth = false;
    std::string descriptor;
};

GpfaSource load_gpfa_source(const Config& cfg, long test_samples,
                            const std::string& test_path) {
    GpfaSource source;
    if (!cfg.data_path.empty()) {
        require_file("--data", cfg.data_path);
        source.train = gsgvb::data_io::load_matrix(cfg.data_path);
        source.descriptor = "matrix:" + cfg.data_path;
    } else if (cfg.synth_dims > 0 && cfg.synth_samples > 0) {
        const int k = static_cast<int>(cfg.synth_truncation());
        const long seed = cfg.generator_seed();
        // One stream: the train rows are a prefix, test rows the suffix.
        const auto synth = gsgvb::data_io::synth_gpfa(
            cfg.synth_dims, k, static_cast<int>(cfg.synth_samples + test_samples),
            seed);
        source.train = synth.y.topRows(cfg.synth_samples);
        if (test_samples > 0) {
            source.test = synth.y.bottomRows(test_samples);
        }
        source.w_true = synth.w_true;
        source.has_truth = true;
        std::ostringstream desc;
        desc << "synth_gpfa:dims=" << cfg.synth_dims << ":k=" << k
             << ":samples=" << cfg.synth_samples << ":seed=" << seed;
        source.descriptor = desc.str();
    } else {
        throw std::invalid_argument(
            "gpfa runs need --data or --synth-dims with --synth-samples");
    }
    if (!test_path.empty()) {
        require_file("--test-data", test_path);
        source.test = gsgvb::data_io::load_matrix(test_path);
    }
    return source;
}

std::string epm_layout(int n_nodes, int k) {
    return "epm:nodes=" + std::to_string(n_nodes) + ":k=" + std::to_string(k);
}

std::string gpfa_layout(long dims, int k) {
    return "gpfa:dims=" + std::to_string(dims) + ":k=" + std::to_string(k);
}

// ---------------------------------------------------------------------------
// Fit plumbing shared by cmd_fit and cmd_sweep

struct FitOutcome {
    Vec param_a;
    Vec param_b;
    std::vector<double> trace;
    std::vector<double> wall_ms;
};

FitOutcome run_fit(const gsgvb::vb::ModelInterface& model, const Config& cfg,
                   const gsgvb::optim::OptimizerConfig& oc) {
    const auto options = fit_options(cfg, oc);
    if (cfg.algorithm == "gamma_sgvb") {
        auto fit = gsgvb::vb::fit_gamma_sgvb(model, options);
        return {std::move(fit.alpha), std::move(fit.beta),
                std::move(fit.elbo_trace), std::move(fit.wall_ms)};
    }
    if (cfg.algorithm == "norm_sgvb") {
        auto fit = gsgvb::vb::fit_normal_sgvb(model, options);
        return {std::move(fit.mean), std::move(fit.log_sd),
                std::move(fit.elbo_trace), std::move(fit.wall_ms)};
    }
    if (cfg.algorithm == "map") {
        auto fit = gsgvb::vb::fit_map(model, options);
        return {std::move(fit.theta), Vec(), std::move(fit.objective_trace),
                std::move(fit.wall_ms)};
    }
    throw std::invalid_argument("unknown algorithm: " + cfg.algorithm);
}

// Posterior-draw callable matching the stored parameter vectors.
std::function<void(Vec&)> make_sampler(const gsgvb::data_io::QParams& params,
                                       std::uint64_t seed) {
    auto softplus_all = [](const Vec& v) {
        return Vec(v.unaryExpr([](double t) { return gsgvb::vb::softplus(t); }));
    };
    if (params.algorithm == "gamma_sgvb") {
        return gsgvb::vb::make_gamma_sampler(softplus_all(params.param_a),
                                             softplus_all(params.param_b),
                                             seed);
    }
    if (params.algorithm == "norm_sgvb") {
        return gsgvb::vb::make_normal_softplus_sampler(params.param_a,
                                                       params.param_b, seed);
    }
    if (params.algorithm == "map") {
        return gsgvb::vb::make_point_sampler(softplus_all(params.param_a));
    }
    throw std::invalid_argument("unknown algorithm in parameter file: " +
                               params.algorithm);
}

void write_trace(const std::string& path, const std::vector<double>& trace,
                 const std::vector<double>& wall_ms) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out << std::setprecision(17) << "iteration,elbo,wall_ms\n";
    for (std::size_t t = 0; t < trace.size(); ++t) {
        out << t << ',' << trace[t] << ',' << wall_ms[t] << '\n';
    }
}

json split_config_json(const Config& cfg) {
    return {{"holdout_fraction", cfg.holdout},
            {"n_splits", cfg.n_splits},
            {"seed", cfg.splitter_seed()},
            {"stratified", cfg.stratified},
            {"index", cfg.split_index}};
}

json config_json(const Config& cfg, const std::string& descriptor,
                 const std::string& layout) {
    json j{{"model", cfg.model},
           {"algorithm", cfg.algorithm},
           {"optimizer",
            {{"name", cfg.optimizer},
             {"step", cfg.step},
             {"momentum", cfg.momentum},
             {"rho", cfg.rho},
             {"eps", cfg.eps}}},
           {"k", cfg.k},
           {"iterations", cfg.iterations},
           {"seed", cfg.seed},
           {"window", cfg.window},
           {"data", descriptor},
           {"layout", layout},
           {"split", split_config_json(cfg)},
           {"out_dir", resolved_out_dir(cfg)}};
    if (cfg.fixed_tau) j["fixed_tau"] = *cfg.fixed_tau;
    return j;
}

// JSON has no infinity literal; report non-finite metric values as strings.
json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

gsgvb::data_io::SplitSpec split_spec(const Config& cfg) {
    gsgvb::data_io::SplitSpec spec;
    spec.holdout_fraction = cfg.holdout;
    spec.seed = cfg.splitter_seed();
    spec.n_splits = cfg.n_splits;
    spec.stratified = cfg.stratified;
    return spec;
}

// ---------------------------------------------------------------------------
// fit

int cmd_fit(const Config& cfg) {
    const auto out_dir = resolved_out_dir(cfg);
    std::filesystem::create_directories(out_dir);
    const auto oc = optimizer_config(cfg);

    std::string descriptor;
    std::string layout;
    FitOutcome outcome;
    if (cfg.model == "epm") {
        auto source = load_epm_source(cfg);
        gsgvb::epm::EpmData train = source.data;
        if (cfg.split_index >= 0) {
            if (cfg.n_splits <= cfg.split_index) {
                throw std::invalid_argument(
                    "--split-index requires --splits greater than the index");
            }
            train = gsgvb::data_io::split_pairs(source.data, split_spec(cfg))
                        [cfg.split_index]
                            .train;
        }
        gsgvb::epm::EpmModel model(train, cfg.k);
        descriptor = source.descriptor;
        layout = epm_layout(model.n_nodes(), cfg.k);
        outcome = run_fit(model, cfg, oc);
    } else if (cfg.model == "gpfa") {
        if (cfg.split_index >= 0) {
            throw std::invalid_argument(
                "--split-index applies to epm runs only");
        }
        auto source = load_gpfa_source(cfg, 0, "");
        gsgvb::gpfa::GpfaModel model(
            gsgvb::gpfa::GpfaData::from_samples(source.train), cfg.k,
            cfg.fixed_tau);
        descriptor = source.descriptor;
        layout = gpfa_layout(source.train.cols(), cfg.k);
        outcome = run_fit(model, cfg, oc);
    } else {
        throw std::invalid_argument("unknown model: " + cfg.model);
    }

    write_trace(out_dir + "/trace.csv", outcome.trace, outcome.wall_ms);

    gsgvb::data_io::QParams params;
    params.model = cfg.model;
    params.algorithm = cfg.algorithm;
    params.layout = layout;
    params.seed = cfg.seed;
    params.iterations = cfg.iterations;
    params.param_a = outcome.param_a;
    params.param_b = outcome.param_b;
    gsgvb::data_io::save_qparams(params, out_dir + "/qparams.json");

    json manifest = config_json(cfg, descriptor, layout);
    if (!outcome.trace.empty()) {
        manifest["results"] = {
            {"final_elbo", json_number(outcome.trace.back())},
            {"smoothed_elbo",
             json_number(gsgvb::vb::windowed_mean(outcome.trace, cfg.window))},
            {"wall_ms", outcome.wall_ms.back()}};
    }
    std::ofstream mf(out_dir + "/manifest.json");
    if (!mf) throw std::runtime_error("cannot write manifest.json");
    mf << manifest.dump(2) << '\n';

    if (!outcome.trace.empty()) {
        std::cout << std::setprecision(10) << "final smoothed objective "
                  << gsgvb::vb::windowed_mean(outcome.trace, cfg.window)
                  << " after " << cfg.iterations << " iterations ("
                  << outcome.wall_ms.back() << " ms)\n";
    }
    std::cout << "wrote " << out_dir
              << "/{trace.csv,qparams.json,manifest.json}\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepExtras {
    std::string opts;
    std::string momentums;
    std::string rhos;
    std::string epss;
    std::string steps;
    bool opts_set = false;
    bool momentums_set = false;
    bool rhos_set = false;
    bool epss_set = false;
    bool steps_set = false;
    int jobs = 1;
};

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

std::vector<double> split_doubles(const std::string& csv) {
    std::vector<double> values;
    for (const auto& item : split_list(csv)) {
        std::size_t used = 0;
        values.push_back(std::stod(item, &used));
        if (used != item.size()) {
            throw std::invalid_argument("malformed grid value: " + item);
        }
    }
    return values;
}

std::string csv_quote(const std::string& s) {
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

int cmd_sweep(const Config& cfg, const SweepExtras& extras) {
    const auto out_dir = resolved_out_dir(cfg);
    std::filesystem::create_directories(out_dir);

    const auto opts = extras.opts_set ? split_list(extras.opts)
                                      : std::vector<std::string>{cfg.optimizer};
    const auto momentums = extras.momentums_set
                               ? split_doubles(extras.momentums)
                               : std::vector<double>{cfg.momentum};
    const auto rhos = extras.rhos_set ? split_doubles(extras.rhos)
                                      : std::vector<double>{cfg.rho};
    const auto epss = extras.epss_set ? split_doubles(extras.epss)
                                      : std::vector<double>{cfg.eps};
    const auto steps = extras.steps_set ? split_doubles(extras.steps)
                                        : std::vector<double>{cfg.step};

    struct Cell {
        Config cfg;
        double final_elbo = std::numeric_limits<double>::quiet_NaN();
        double smoothed_elbo = std::numeric_limits<double>::quiet_NaN();
        double wall_ms = std::numeric_limits<double>::quiet_NaN();
        std::string error;
    };
    std::vector<Cell> cells;
    for (const auto& opt : opts) {
        for (double momentum : momentums) {
            for (double rho : rhos) {
                for (double eps : epss) {
                    for (double step : steps) {
                        Cell cell;
                        cell.cfg = cfg;
                        cell.cfg.optimizer = opt;
                        cell.cfg.momentum = momentum;
                        cell.cfg.rho = rho;
                        cell.cfg.eps = eps;
                        cell.cfg.step = step;
                        cells.push_back(std::move(cell));
                    }
                }
            }
        }
    }

    // Shared data and model across cells; fits keep all mutable state local.
    std::unique_ptr<gsgvb::epm::EpmModel> epm_model;
    std::unique_ptr<gsgvb::gpfa::GpfaModel> gpfa_model;
    const gsgvb::vb::ModelInterface* model = nullptr;
    if (!cells.empty()) {
        if (cfg.model == "epm") {
            auto source = load_epm_source(cfg);
            gsgvb::epm::EpmData train = source.data;
            if (cfg.split_index >= 0) {
                if (cfg.n_splits <= cfg.split_index) {
                    throw std::invalid_argument(
                        "--split-index requires --splits greater than the index");
                }
                train = gsgvb::data_io::split_pairs(source.data,
                                                    split_spec(cfg))
                            [cfg.split_index]
                                .train;
            }
            epm_model = std::make_unique<gsgvb::epm::EpmModel>(train, cfg.k);
            model = epm_model.get();
        } else if (cfg.model == "gpfa") {
            auto source = load_gpfa_source(cfg, 0, "");
            gpfa_model = std::make_unique<gsgvb::gpfa::GpfaModel>(
                gsgvb::gpfa::GpfaData::from_samples(source.train), cfg.k,
                cfg.fixed_tau);
            model = gpfa_model.get();
        } else {
            throw std::invalid_argument("unknown model: " + cfg.model);
        }
    }

    auto run_cell = [&](Cell& cell) {
        try {
            const auto oc = optimizer_config(cell.cfg);
            const auto outcome = run_fit(*model, cell.cfg, oc);
            if (!outcome.trace.empty()) {
                cell.final_elbo = outcome.trace.back();
                cell.smoothed_elbo =
                    gsgvb::vb::windowed_mean(outcome.trace, cfg.window);
                cell.wall_ms = outcome.wall_ms.back();
            }
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    };

    const int jobs = std::max(1, std::min<int>(extras.jobs,
                                               static_cast<int>(cells.size())));
    if (jobs <= 1) {
        for (auto& cell : cells) run_cell(cell);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(jobs);
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) return;
                    run_cell(cells[i]);
                }
            });
        }
        for (auto& worker : workers) worker.join();
    }

    const auto path = out_dir + "/results.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write results file: " + path);
    out << std::setprecision(17)
        << "optimizer,momentum,rho,eps,step,final_elbo,smoothed_elbo,"
           "wall_ms,error\n";
    for (const auto& cell : cells) {
        out << cell.cfg.optimizer << ',' << cell.cfg.momentum << ','
            << cell.cfg.rho << ',' << cell.cfg.eps << ',' << cell.cfg.step
            << ',' << cell.final_elbo << ',' << cell.smoothed_elbo << ','
            << cell.wall_ms << ',' << csv_quote(cell.error) << '\n';
    }
    std::cout << "wrote " << path << " (" << cells.size() << " cells)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalExtras {
    std::vector<std::string> qparams_paths;
    int samples = 100;
    long test_samples = 0;
    std::string test_path;
    std::string true_loadings_path;
};

void check_params(const gsgvb::data_io::QParams& params, const Config& cfg,
                  const std::string& layout, const std::string& path) {
    if (params.model != cfg.model) {
        throw std::invalid_argument(path + ": parameter file is for model '" +
                                    params.model + "', run requests '" +
                                    cfg.model + "'");
    }
    if (params.layout != layout) {
        throw std::invalid_argument(path + ": layout mismatch: file has '" +
                                    params.layout + "', run expects '" +
                                    layout + "'");
    }
}

int cmd_eval(const Config& cfg, const EvalExtras& extras) {
    const auto out_dir = resolved_out_dir(cfg);
    std::filesystem::create_directories(out_dir);
    if (extras.samples < 1) {
        throw std::invalid_argument("--samples must be at least 1");
    }
    if (extras.samples == 1) {
        std::cerr << "warning: --samples 1 gives a low-precision "
                     "single-draw estimate\n";
    }

    json report;
    report["samples"] = extras.samples;
    report["low_precision"] = (extras.samples == 1);

    if (cfg.model == "epm") {
        if (extras.qparams_paths.empty()) {
            throw std::invalid_argument("eval needs at least one --qparams");
        }
        if (cfg.n_splits < static_cast<int>(extras.qparams_paths.size())) {
            throw std::invalid_argument(
                "need --splits at least the number of --qparams files; the "
                "i-th file is evaluated on split i");
        }
        auto source = load_epm_source(cfg);
        const auto splits =
            gsgvb::data_io::split_pairs(source.data, split_spec(cfg));
        const auto layout = epm_layout(source.data.n_nodes, cfg.k);

        std::vector<double> aucs;
        for (std::size_t i = 0; i < extras.qparams_paths.size(); ++i) {
            const auto& path = extras.qparams_paths[i];
            require_file("--qparams", path);
            const auto params = gsgvb::data_io::load_qparams(path);
            check_params(params, cfg, layout, path);

            gsgvb::epm::EpmModel model(splits[i].train, cfg.k);
            if (params.param_a.size() != model.latent_dim()) {
                throw std::invalid_argument(path +
                                            ": parameter count mismatch");
            }
            std::vector<std::pair<int, int>> pairs;
            std::vector<int> labels;
            pairs.reserve(splits[i].test.size());
            for (const auto& t : splits[i].test) {
                pairs.emplace_back(t.i, t.j);
                labels.push_back(t.label);
            }
            const auto seed =
                static_cast<std::uint64_t>(cfg.seed) * 1000003u + i;
            const auto probs = gsgvb::epm::predict_link_probs(
                model, pairs, extras.samples, make_sampler(params, seed));
            Vec scores = Eigen::Map<const Vec>(probs.data(),
                                               static_cast<long>(probs.size()));
            aucs.push_back(gsgvb::metrics::roc_auc(scores, labels));
        }

        double mean = 0.0;
        for (double a : aucs) mean += a;
        mean /= static_cast<double>(aucs.size());
        double var = 0.0;
        for (double a : aucs) var += (a - mean) * (a - mean);
        const double sd = aucs.size() > 1
                              ? std::sqrt(var / (static_cast<double>(aucs.size()) - 1.0))
                              : 0.0;
        report["auc"] = aucs;
        report["auc_mean"] = mean;
        report["auc_sd"] = sd;
    } else if (cfg.model == "gpfa") {
        if (extras.qparams_paths.size() != 1) {
            throw std::invalid_argument(
                "gpfa eval takes exactly one --qparams file");
        }
        auto source =
            load_gpfa_source(cfg, extras.test_samples, extras.test_path);
        if (source.test.size() == 0) {
            throw std::invalid_argument(
                "gpfa eval needs --test-data or --test-samples");
        }
        const auto& path = extras.qparams_paths[0];
        require_file("--qparams", path);
        const auto params = gsgvb::data_io::load_qparams(path);
        const auto layout = gpfa_layout(source.train.cols(), cfg.k);
        check_params(params, cfg, layout, path);

        gsgvb::gpfa::GpfaModel model(
            gsgvb::gpfa::GpfaData::from_samples(source.train), cfg.k,
            cfg.fixed_tau);
        if (params.param_a.size() != model.latent_dim()) {
            throw std::invalid_argument(path + ": parameter count mismatch");
        }

        // One pass accumulates both the expected covariance and the mean
        // loading matrix over the same posterior draws.
        auto sampler =
            make_sampler(params, static_cast<std::uint64_t>(cfg.seed));
        const int d = model.n_dims();
        Mat cov_sum = Mat::Zero(d, d);
        Mat loading_sum = Mat::Zero(d, cfg.k);
        Vec draw(model.latent_dim());
        for (int s = 0; s < extras.samples; ++s) {
            sampler(draw);
            cov_sum += model.covariance(draw);
            loading_sum += Eigen::Map<const gsgvb::RowMat>(draw.data(), d, cfg.k);
        }
        const Mat expected_cov = cov_sum / extras.samples;
        const Mat mean_loadings = loading_sum / extras.samples;

        const double ppl_model =
            gsgvb::metrics::gaussian_perplexity(source.test, expected_cov);
        const double ppl_empirical = gsgvb::metrics::gaussian_perplexity(
            source.test, gsgvb::metrics::empirical_cov(source.train));
        const auto lw = gsgvb::metrics::ledoit_wolf(source.train);
        const double ppl_lw =
            gsgvb::metrics::gaussian_perplexity(source.test, lw.cov);
        report["perplexity_gpfa"] = json_number(ppl_model);
        report["perplexity_empirical"] = json_number(ppl_empirical);
        report["perplexity_lw"] = json_number(ppl_lw);
        report["lw_shrinkage"] = lw.shrinkage;

        Mat truth;
        if (!extras.true_loadings_path.empty()) {
            require_file("--true-loadings", extras.true_loadings_path);
            truth = gsgvb::data_io::load_matrix(extras.true_loadings_path);
        } else if (source.has_truth) {
            truth = source.w_true;
        }
        if (truth.size() > 0) {
            try {
                report["amari"] =
                    gsgvb::metrics::amari_error(mean_loadings, truth);
            } catch (const std::invalid_argument& e) {
                std::cerr << "warning: amari error unavailable: " << e.what()
                          << "\n";
                report["amari"] = nullptr;
            }
        }

        gsgvb::data_io::save_matrix(out_dir + "/expected_cov.csv",
                                    expected_cov, ',');
        gsgvb::data_io::save_matrix(out_dir + "/mean_loadings.csv",
                                    mean_loadings, ',');
    } else {
        throw std::invalid_argument("unknown model: " + cfg.model);
    }

    std::ofstream out(out_dir + "/eval.json");
    if (!out) throw std::runtime_error("cannot write eval.json");
    out << report.dump(2) << '\n';
    std::cout << report.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

void add_common_options(CLI::App* sub, Config& cfg) {
    sub->add_option("--model", cfg.model, "Model: epm or gpfa")
        ->required()
        ->check(CLI::IsMember({"epm", "gpfa"}));
    sub->add_option("--algo", cfg.algorithm,
                    "Inference algorithm: gamma_sgvb, norm_sgvb, or map")
        ->check(CLI::IsMember({"gamma_sgvb", "norm_sgvb", "map"}));
    sub->add_option("--opt", cfg.optimizer,
                    "Optimizer: sgd, adagrad, rmsprop, or adadelta")
        ->check(CLI::IsMember({"sgd", "adagrad", "rmsprop", "adadelta"}));
    sub->add_option("--step", cfg.step,
                    "Step size (sgd) or scale numerator (adagrad, rmsprop)");
    sub->add_option("--momentum", cfg.momentum,
                    "Weight on the newest gradient in (0, 1]; 1 disables the "
                    "momentum filter");
    sub->add_option("--rho", cfg.rho, "Adadelta averaging weight");
    sub->add_option("--eps", cfg.eps, "Adadelta damping constant");
    sub->add_option("--k", cfg.k, "Truncation level (number of factors)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--iters", cfg.iterations, "Number of iterations")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--window", cfg.window,
                    "Smoothing window for reported objectives")
        ->check(CLI::PositiveNumber);
    sub->add_option("--data", cfg.data_path,
                    "Input path (edge list for epm, matrix for gpfa)");
    sub->add_option("--out", cfg.out_dir,
                    "Output directory (default: $GSGVB_OUT_DIR or .)");

    sub->add_option("--synth-nodes", cfg.synth_nodes,
                    "Generate a synthetic network with this many nodes");
    sub->add_flag("--synth-planted", cfg.synth_planted,
                  "Use the planted two-block generator");
    sub->add_option("--synth-dims", cfg.synth_dims,
                    "Generate synthetic factor data with this many dimensions");
    sub->add_option("--synth-samples", cfg.synth_samples,
                    "Synthetic factor data sample count");
    sub->add_option("--synth-k", cfg.synth_k,
                    "Generator truncation (defaults to --k)");
    sub->add_option("--synth-seed", cfg.synth_seed,
                    "Generator seed (defaults to --seed)");

    sub->add_option("--holdout", cfg.holdout,
                    "Held-out fraction of pairs per split");
    sub->add_option("--splits", cfg.n_splits, "Number of train/test splits");
    sub->add_option("--split-seed", cfg.split_seed,
                    "Split seed (defaults to --seed)");
    sub->add_flag("--stratified", cfg.stratified,
                  "Sample test edges and non-edges separately");
    sub->add_option("--split-index", cfg.split_index,
                    "Fit on this split's training data (epm)");

    sub->add_option_function<double>(
           "--fixed-tau",
           [&cfg](double v) { cfg.fixed_tau = v; },
           "Hold the gpfa noise precision fixed at this value");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic variational inference for gamma latent-variable "
                 "models: network link prediction and factor analysis"};
    app.require_subcommand(1);

    Config fit_cfg;
    Config sweep_cfg;
    Config eval_cfg;
    SweepExtras sweep_extras;
    EvalExtras eval_extras;

    auto* fit = app.add_subcommand("fit", "Fit one model and save artifacts");
    add_common_options(fit, fit_cfg);

    auto* sweep = app.add_subcommand(
        "sweep", "Fit a grid of optimizer settings on shared data");
    add_common_options(sweep, sweep_cfg);
    auto* opt_opts = sweep->add_option("--opts", sweep_extras.opts,
                                       "Comma-separated optimizer grid");
    auto* opt_moms = sweep->add_option("--momentums", sweep_extras.momentums,
                                       "Comma-separated momentum grid");
    auto* opt_rhos = sweep->add_option("--rhos", sweep_extras.rhos,
                                       "Comma-separated adadelta rho grid");
    auto* opt_epss = sweep->add_option("--epss", sweep_extras.epss,
                                       "Comma-separated adadelta eps grid");
    auto* opt_steps = sweep->add_option("--steps", sweep_extras.steps,
                                        "Comma-separated step-size grid");
    sweep->add_option("--jobs", sweep_extras.jobs,
                      "Worker threads for sweep cells")
        ->check(CLI::PositiveNumber);

    auto* eval =
        app.add_subcommand("eval", "Evaluate saved fits on held-out data");
    add_common_options(eval, eval_cfg);
    eval->add_option("--qparams", eval_extras.qparams_paths,
                     "Fitted parameter file(s); the i-th file pairs with "
                     "split i")
        ->required();
    eval->add_option("--samples", eval_extras.samples,
                     "Posterior draws for prediction");
    eval->add_option("--test-data", eval_extras.test_path,
                     "Held-out sample matrix (gpfa)");
    eval->add_option("--test-samples", eval_extras.test_samples,
                     "Held-out synthetic sample count (gpfa)");
    eval->add_option("--true-loadings", eval_extras.true_loadings_path,
                     "Ground-truth loading matrix for the recovery error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        sweep_extras.opts_set = opt_opts->count() > 0;
        sweep_extras.momentums_set = opt_moms->count() > 0;
        sweep_extras.rhos_set = opt_rhos->count() > 0;
        sweep_extras.epss_set = opt_epss->count() > 0;
        sweep_extras.steps_set = opt_steps->count() > 0;
        if (fit->parsed()) return cmd_fit(fit_cfg);
        if (sweep->parsed()) return cmd_sweep(sweep_cfg, sweep_extras);
        if (eval->parsed()) return cmd_eval(eval_cfg, eval_extras);
        throw std::invalid_argument("no subcommand selected");
    } catch (const gsgvb::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const gsgvb::SolverError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
