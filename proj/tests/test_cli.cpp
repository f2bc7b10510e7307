#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gsgvb/data_io.hpp"

// The build injects GSGVB_CLI_PATH as the compiled binary's location.

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kRoot = fs::temp_directory_path() / "gsgvb_cli_tests";

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = kRoot / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const fs::path& out = {},
        const fs::path& err = {}) {
    std::string cmd = std::string(GSGVB_CLI_PATH) + " " + args;
    cmd += out.empty() ? " >/dev/null" : " >" + out.string();
    cmd += err.empty() ? " 2>/dev/null" : " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json slurp_json(const fs::path& path) { return json::parse(slurp(path)); }

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += (c == '\n');
    return n;
}

// Drops the wall_ms column so reruns compare deterministically.
std::vector<std::string> csv_rows_without_wall(const fs::path& path) {
    std::vector<std::string> rows;
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream fields(line);
        std::string cell;
        while (std::getline(fields, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() >= 9);
        cells.erase(cells.begin() + 7); // wall_ms
        std::string joined;
        for (const auto& c : cells) joined += c + "|";
        rows.push_back(joined);
    }
    return rows;
}

const std::string kPlanted =
    "--model epm --synth-nodes 24 --synth-planted --k 2 --seed 11 ";

} // namespace

TEST_CASE("fit writes trace, parameters and manifest") {
    const auto dir = fresh_dir("fit");
    REQUIRE(run("fit " + kPlanted + "--iters 40 --out " + dir.string()) == 0);

    const auto trace = slurp(dir / "trace.csv");
    CHECK(trace.rfind("iteration,elbo,wall_ms\n", 0) == 0);
    CHECK(line_count(trace) == 41); // header + one row per iteration

    const auto params = gsgvb::data_io::load_qparams((dir / "qparams.json").string());
    CHECK(params.model == "epm");
    CHECK(params.algorithm == "gamma_sgvb");
    CHECK(params.layout == "epm:nodes=24:k=2");
    CHECK(params.param_a.size() == 24 * 2 + 2 + 2 * 24 + 2);
    CHECK(params.param_b.size() == params.param_a.size());
    CHECK(params.param_a.allFinite());

    const auto manifest = slurp_json(dir / "manifest.json");
    CHECK(manifest["model"] == "epm");
    CHECK(manifest["results"]["final_elbo"].is_number());
    CHECK(manifest["results"]["smoothed_elbo"].is_number());
    CHECK(manifest["results"]["wall_ms"].is_number());

    // Same seed, same artifacts.
    const auto dir2 = fresh_dir("fit_again");
    REQUIRE(run("fit " + kPlanted + "--iters 40 --out " + dir2.string()) == 0);
    CHECK(slurp(dir / "qparams.json") == slurp(dir2 / "qparams.json"));
}

TEST_CASE("fit honors the output directory environment default") {
    const auto dir = fresh_dir("fit_env");
    const std::string cmd = "GSGVB_OUT_DIR=" + dir.string() + " " +
                            std::string(GSGVB_CLI_PATH) + " fit " + kPlanted +
                            "--iters 5 >/dev/null 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(fs::exists(dir / "qparams.json"));
}

TEST_CASE("configuration errors exit with code 2 and name the problem") {
    const auto dir = fresh_dir("errors");
    CHECK(run("fit --model bogus") == 2);
    CHECK(run("fit") == 2);                      // --model is required
    CHECK(run("--help") == 0);
    CHECK(run("fit " + kPlanted + "--momentum 0 --out " + dir.string()) == 2);
    CHECK(run("fit " + kPlanted + "--split-index 0 --out " + dir.string()) == 2);

    const auto err = dir / "stderr.txt";
    CHECK(run("fit --model epm --data /definitely/not/here.txt", {}, err) == 2);
    CHECK(slurp(err).find("--data") != std::string::npos);
    CHECK(slurp(err).find("/definitely/not/here.txt") != std::string::npos);
}

TEST_CASE("divergent optimization exits with code 3") {
    const auto dir = fresh_dir("diverge");
    const auto err = dir / "stderr.txt";
    CHECK(run("fit " + kPlanted + "--opt sgd --step 1e8 --iters 50 --out " +
              dir.string(), {}, err) == 3);
    CHECK(slurp(err).find("numerical failure") != std::string::npos);
}

TEST_CASE("link prediction eval round-trips fitted parameters") {
    const auto d0 = fresh_dir("auc_s0");
    const auto d1 = fresh_dir("auc_s1");
    const auto de = fresh_dir("auc_eval");
    const std::string shared = kPlanted + "--splits 2 --holdout 0.25 ";
    REQUIRE(run("fit " + shared + "--split-index 0 --iters 300 --out " +
                d0.string()) == 0);
    REQUIRE(run("fit " + shared + "--split-index 1 --iters 300 --out " +
                d1.string()) == 0);
    REQUIRE(run("eval " + shared + "--samples 30 --qparams " +
                (d0 / "qparams.json").string() + " --qparams " +
                (d1 / "qparams.json").string() + " --out " + de.string()) == 0);

    const auto report = slurp_json(de / "eval.json");
    REQUIRE(report["auc"].size() == 2);
    for (const auto& a : report["auc"]) {
        CHECK(a.get<double>() >= 0.0);
        CHECK(a.get<double>() <= 1.0);
    }
    CHECK(report["auc_sd"].get<double>() >= 0.0);
    CHECK(report["low_precision"] == false);

    // Rerunning the evaluation reproduces it byte for byte.
    const auto de2 = fresh_dir("auc_eval2");
    REQUIRE(run("eval " + shared + "--samples 30 --qparams " +
                (d0 / "qparams.json").string() + " --qparams " +
                (d1 / "qparams.json").string() + " --out " + de2.string()) == 0);
    CHECK(slurp(de / "eval.json") == slurp(de2 / "eval.json"));

    // More parameter files than splits cannot be paired up.
    CHECK(run("eval " + kPlanted + "--splits 1 --qparams " +
              (d0 / "qparams.json").string() + " --qparams " +
              (d1 / "qparams.json").string() + " --out " + de.string()) == 2);
}

TEST_CASE("factor model fit and eval round-trip") {
    const auto df = fresh_dir("gpfa_fit");
    const auto de = fresh_dir("gpfa_eval");
    const std::string shared =
        "--model gpfa --synth-dims 8 --synth-samples 120 --k 2 --seed 4 ";
    REQUIRE(run("fit " + shared + "--iters 200 --out " + df.string()) == 0);
    REQUIRE(run("eval " + shared + "--samples 40 --test-samples 60 --qparams " +
                (df / "qparams.json").string() + " --out " + de.string()) == 0);

    const auto cov = gsgvb::data_io::load_matrix((de / "expected_cov.csv").string());
    REQUIRE(cov.rows() == 8);
    REQUIRE(cov.cols() == 8);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const auto loadings =
        gsgvb::data_io::load_matrix((de / "mean_loadings.csv").string());
    CHECK(loadings.rows() == 8);
    CHECK(loadings.cols() == 2);

    const auto report = slurp_json(de / "eval.json");
    CHECK(report["perplexity_gpfa"].is_number());
    CHECK(report["perplexity_empirical"].is_number());
    CHECK(report["perplexity_lw"].is_number());
    CHECK(report.contains("amari"));

    // A single posterior draw is allowed but flagged.
    const auto err = de / "stderr.txt";
    REQUIRE(run("eval " + shared + "--samples 1 --test-samples 60 --qparams " +
                (df / "qparams.json").string() + " --out " + de.string(), {},
                err) == 0);
    CHECK(slurp(err).find("low-precision") != std::string::npos);
    CHECK(slurp_json(de / "eval.json")["low_precision"] == true);
}

TEST_CASE("eval rejects parameters fitted for another model") {
    const auto df = fresh_dir("mismatch_fit");
    const auto de = fresh_dir("mismatch_eval");
    REQUIRE(run("fit " + kPlanted + "--iters 10 --out " + df.string()) == 0);
    const auto err = de / "stderr.txt";
    CHECK(run("eval --model gpfa --synth-dims 8 --synth-samples 50 --k 2 "
              "--seed 4 --test-samples 20 --qparams " +
              (df / "qparams.json").string() + " --out " + de.string(), {},
              err) == 2);
    CHECK(slurp(err).find("model") != std::string::npos);
}

TEST_CASE("sweep runs every grid cell and is stable under threading") {
    const auto d1 = fresh_dir("sweep_serial");
    const auto d2 = fresh_dir("sweep_parallel");
    const std::string grid = "sweep " + kPlanted +
                             "--iters 30 --opts adadelta,rmsprop "
                             "--momentums 0.1,1.0 --out ";
    REQUIRE(run(grid + d1.string() + " --jobs 1") == 0);
    REQUIRE(run(grid + d2.string() + " --jobs 3") == 0);

    const auto serial = csv_rows_without_wall(d1 / "results.csv");
    const auto parallel = csv_rows_without_wall(d2 / "results.csv");
    REQUIRE(serial.size() == 5); // header + 4 cells
    CHECK(serial == parallel);
    CHECK(serial[0].rfind("optimizer|momentum|rho|eps|step|final_elbo|", 0) == 0);
}

TEST_CASE("sweep isolates failing cells instead of aborting") {
    const auto dir = fresh_dir("sweep_fail");
    REQUIRE(run("sweep " + kPlanted +
                "--iters 30 --opts sgd --steps 0.01,1e8 --out " +
                dir.string()) == 0);
    const auto rows = csv_rows_without_wall(dir / "results.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].find("non-finite") == std::string::npos);
    CHECK(rows[2].find("non-finite") != std::string::npos);
}

TEST_CASE("an explicitly empty grid writes only the header") {
    const auto dir = fresh_dir("sweep_empty");
    REQUIRE(run("sweep " + kPlanted + "--iters 5 --opts \"\" --out " +
                dir.string()) == 0);
    CHECK(line_count(slurp(dir / "results.csv")) == 1);
}
