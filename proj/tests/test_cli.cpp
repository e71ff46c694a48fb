// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "moesl/cli_core.hpp"
#include "moesl/intrinsic_dim.hpp"
#include "moesl/rng.hpp"

using namespace moesl;
using namespace moesl::cli;

namespace {

std::string data_path(const std::string& name) {
    return std::string(MOESL_DATA_DIR) + "/" + name;
}

std::string temp_file(const std::string& name, const std::string& contents) {
    std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << contents;
    return path;
}

double cell_real(const TableArtifact& t, std::size_t row, const std::string& col) {
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (t.columns[c] == col) {
            const Cell& cell = t.rows.at(row).at(c);
            if (std::holds_alternative<double>(cell)) return std::get<double>(cell);
            return static_cast<double>(std::get<std::int64_t>(cell));
        }
    throw std::runtime_error("no column " + col);
}

}  // namespace

TEST_CASE("exponents command matches the published rows at display precision") {
    struct Row {
        double d, beta, alpha_n, alpha_d, consistency;
    };
    const Row rows[4] = {{32, 1.0, 0.063, 0.059, 0.059},
                         {45, 1.0, 0.044, 0.043, 0.042},
                         {45, 1.5, 0.067, 0.062, 0.063},
                         {23, 1.0, 0.087, 0.080, 0.080}};
    for (const Row& r : rows) {
        CommandResult res = cmd_exponents(r.d, r.beta);
        CHECK(std::fabs(cell_real(res.table, 0, "alpha_N") - r.alpha_n) <= 5e-4 + 1e-9);
        CHECK(std::fabs(cell_real(res.table, 0, "alpha_D") - r.alpha_d) <= 5e-4 + 1e-9);
        CHECK(std::fabs(cell_real(res.table, 0, "consistency") - r.consistency) <= 5e-4 + 1e-9);
    }
    // d = 2*beta forces alpha_N = 1, alpha_D = 1/2
    CommandResult half = cmd_exponents(2.0, 1.0);
    CHECK(cell_real(half.table, 0, "alpha_N") == doctest::Approx(1.0));
    CHECK(cell_real(half.table, 0, "alpha_D") == doctest::Approx(0.5));
}

TEST_CASE("budget command reproduces the bundled sweep") {
    CommandResult res = cmd_budget(data_path("model_configs.json"));
    REQUIRE(res.table.rows.size() == 14);
    const std::int64_t expected[14] = {3148800,  3673600,  4198400,  5248000,  6297600,
                                       6297600,  7347200,  8396800,  10496000, 12595200,
                                       16793600, 15744000, 18892800, 25190400};
    for (std::size_t i = 0; i < 14; ++i)
        CHECK(static_cast<std::int64_t>(cell_real(res.table, i, "n_act")) == expected[i]);
}

TEST_CASE("budget config validation names the offending field") {
    std::string missing = temp_file("moesl_missing_k.json", R"({
      "seq_len": 16, "emb_dim": 8, "heads": 2, "blocks": 1,
      "experts": 4, "ffn_width": 8
    })");
    CHECK_THROWS_WITH_AS(cmd_budget(missing), doctest::Contains("`k`"), std::runtime_error);

    std::string unknown = temp_file("moesl_unknown_key.json", R"({
      "seq_len": 16, "emb_dim": 8, "heads": 2, "blocks": 1,
      "experts": 4, "k": 2, "ffn_width": 8, "dropout": 0.1
    })");
    CHECK_THROWS_WITH_AS(cmd_budget(unknown), doctest::Contains("dropout"), std::runtime_error);

    std::string minimal = temp_file("moesl_minimal.json", R"({
      "seq_len": 16, "emb_dim": 8, "heads": 2, "blocks": 1,
      "experts": 4, "k": 2, "ffn_width": 8
    })");
    CHECK(cmd_budget(minimal).table.rows.size() == 1);

    std::remove(missing.c_str());
    std::remove(unknown.c_str());
    std::remove(minimal.c_str());
}

TEST_CASE("fit command recovers a planted curve from CSV") {
    std::string csv = "x,loss\n";
    for (double x : {1e4, 3e4, 1e5, 3e5, 1e6}) {
        char line[80];
        std::snprintf(line, sizeof(line), "%.17g,%.17g\n", x, 3.0 * std::pow(x, -0.06) + 2.0);
        csv += line;
    }
    std::string path = temp_file("moesl_fit.csv", csv);
    CommandResult res = cmd_fit(path, "model", true, std::nullopt);
    CHECK(std::fabs(cell_real(res.table, 0, "exponent") - 0.06) <= 1e-4);
    CHECK(std::fabs(cell_real(res.table, 0, "floor") - 2.0) <= 1e-3);

    std::string bad = temp_file("moesl_fit_bad.csv", "x\n1\n2\n3\n4\n");
    CHECK_THROWS_AS(cmd_fit(bad, "model", true, std::nullopt), std::runtime_error);
    std::remove(path.c_str());
    std::remove(bad.c_str());
}

TEST_CASE("fit command pairs model and data curves into an identity check") {
    auto curve_csv = [](double alpha, const char* name) {
        std::string csv = "x,loss\n";
        for (double x : {1e3, 1e4, 1e5, 1e6, 1e7}) {
            char line[80];
            std::snprintf(line, sizeof(line), "%.17g,%.17g\n", x, 2.0 * std::pow(x, -alpha));
            csv += line;
        }
        return temp_file(name, csv);
    };
    double alpha_n = 0.0625;
    std::string model_csv = curve_csv(alpha_n, "moesl_fit_model.csv");
    std::string data_csv = curve_csv(alpha_n / (1.0 + alpha_n), "moesl_fit_data.csv");
    CommandResult res = cmd_fit(model_csv, "model", true, std::nullopt, data_csv);
    CHECK(std::fabs(cell_real(res.table, 0, "alpha_N") - alpha_n) <= 1e-6);
    CHECK(std::fabs(cell_real(res.table, 0, "r_D")) <= 1e-6);  // planted to satisfy the identity
    std::remove(model_csv.c_str());
    std::remove(data_csv.c_str());
}

TEST_CASE("per-expert command consumes the bundled rows") {
    CommandResult res = cmd_per_expert(data_path("per_expert.csv"));
    REQUIRE(res.table.rows.size() == 6);
    CHECK(std::fabs(cell_real(res.table, 0, "kappa") - 1.278) <= 1e-3);
    CHECK(std::fabs(cell_real(res.table, 5, "kappa") - 1.969) <= 1e-3);
    CHECK(res.table.provenance.find("mae_r_D") != std::string::npos);
}

TEST_CASE("id-estimate: the two container formats give identical output") {
    Rng rng(3);
    EmbeddingSet pts;
    pts.n = 150;
    pts.dim = 5;
    pts.data.resize(750);
    for (auto& v : pts.data) v = static_cast<double>(static_cast<float>(rng.uniform(-1.0, 1.0)));

    std::string csv = (std::filesystem::temp_directory_path() / "moesl_id.csv").string();
    std::string bin = (std::filesystem::temp_directory_path() / "moesl_id.f32").string();
    save_embeddings_csv(pts, csv);
    save_embeddings_f32(pts, bin);

    CommandResult a = cmd_id_estimate(csv, "csv", 10, 4, 80, 0, false);
    CommandResult b = cmd_id_estimate(bin, "f32", 10, 4, 80, 0, false);
    CHECK(a.table.rows.size() == b.table.rows.size());
    for (std::size_t i = 0; i < a.table.rows.size(); ++i)
        CHECK(format_cell(a.table.rows[i][1]) == format_cell(b.table.rows[i][1]));

    std::remove(csv.c_str());
    std::remove(bin.c_str());
}

TEST_CASE("routing command emits the exact count and bound") {
    CommandResult res = cmd_routing(8, 2, 1, 2);
    CHECK(res.contracts_ok);
    CHECK(std::get<std::string>(res.table.rows[0][4]) == "784");
    CHECK(cell_real(res.table, 0, "log_bound") == doctest::Approx(9.545177).epsilon(1e-6));
    CHECK(cell_real(res.table, 0, "ln_count") == doctest::Approx(std::log(784.0)).epsilon(1e-9));
}

TEST_CASE("optimal-k command reports fixed-point/grid agreement") {
    CommandResult res = cmd_optimal_k(100.0, 1e6, 2, 128, 64, 1.0, 8.0, 1e-10, 200);
    CHECK(cell_real(res.table, 0, "agree_within_1") == 1.0);
    CHECK(res.contracts_ok);
}

TEST_CASE("compute-optimal command cross-checks the grid oracle") {
    CommandResult res = cmd_compute_optimal(1e12, 1.0, 1.0, 1.0, 32.0, 400);
    CHECK(res.contracts_ok);
    CHECK(cell_real(res.table, 0, "rel_gap") < 0.02);
    double n_star = cell_real(res.table, 0, "n_act_star");
    CHECK(n_star == doctest::Approx(std::pow(1e12 / 32.0, 32.0 / 66.0)).epsilon(1e-9));
}

TEST_CASE("lipschitz command honors the ceiling contract") {
    CommandResult res = cmd_lipschitz(1.0, 2, 20000, 0);
    CHECK(res.contracts_ok);
    CHECK(cell_real(res.table, 0, "max_ratio") <= 0.5);
}

TEST_CASE("approx-rate command emits the sweep and slope") {
    CommandResult res = cmd_approx_rate("sin3", "circle", 2.0, {8, 16, 32, 64}, 3, 0);
    REQUIRE(res.table.rows.size() == 4);
    CHECK(res.table.provenance.find("slope=") != std::string::npos);
    double prev = 1e300;
    for (std::size_t i = 0; i < res.table.rows.size(); ++i) {
        double err = cell_real(res.table, i, "sup_error");
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("subcommands are deterministic: identical CSV on repeat runs") {
    CommandResult a = cmd_exponents(32.0, 1.0);
    CommandResult b = cmd_exponents(32.0, 1.0);
    CHECK(a.table.to_csv() == b.table.to_csv());

    CommandResult c = cmd_lipschitz(1.0, 4, 5000, 9);
    CommandResult d = cmd_lipschitz(1.0, 4, 5000, 9);
    CHECK(c.table.to_csv() == d.table.to_csv());

    CommandResult e = cmd_budget(data_path("model_configs.json"));
    CommandResult f = cmd_budget(data_path("model_configs.json"));
    CHECK(e.table.to_csv() == f.table.to_csv());
}

TEST_CASE("round-trip float formatting") {
    for (double v : {0.1, 1.0 / 3.0, 2.302585092994046, 1e-300, 6.02e23, -0.0625}) {
        std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}
