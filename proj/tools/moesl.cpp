// SPDX-License-Identifier: Apache-2.0
//
// moesl: scaling-law toolkit for sparse-expert transformers.
// Subcommands wrap the library modules; all output is CSV with a single
// leading provenance comment. Exit code 0 iff every invoked contract held.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moesl/cli_core.hpp"

namespace {

int emit(const moesl::cli::CommandResult& res, const std::string& out_path) {
    std::string csv = res.table.to_csv();
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return 1;
        }
        out << csv;
    }
    return res.contracts_ok ? 0 : 2;
}

std::vector<std::size_t> parse_counts(const std::string& csv) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        out.push_back(std::stoull(csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scaling-law toolkit for sparse-expert transformers"};
    app.require_subcommand(1);

    std::string out_path;
    std::uint64_t seed = 0;
    app.add_option("--out", out_path, "output file (default stdout)")->capture_default_str();
    app.add_option("--seed", seed, "seed for randomized subcommands")->capture_default_str();

    // exponents
    double d = 1.0, beta = 1.0;
    auto* exponents = app.add_subcommand("exponents", "theoretical scaling exponents from (d, beta)");
    exponents->add_option("--d", d, "intrinsic dimension")->required();
    exponents->add_option("--beta", beta, "smoothness")->required();

    // budget
    std::string config_path;
    auto* budget = app.add_subcommand("budget", "active parameter budgets for a config sweep");
    budget->add_option("--config", config_path, "JSON architecture config")->required();

    // fit
    std::string fit_input, fit_data_input, fit_axis = "model", floor_mode = "search";
    double floor_c = 0.0;
    auto* fit = app.add_subcommand("fit", "power-law exponent fit of a loss curve");
    fit->add_option("--input", fit_input, "two-column CSV (x,loss)")->required();
    fit->add_option("--data-input", fit_data_input,
                    "optional second curve; adds the identity prediction row");
    fit->add_option("--axis", fit_axis, "model|data|compute")->capture_default_str();
    fit->add_option("--floor-mode", floor_mode, "search|fixed")->capture_default_str();
    fit->add_option("--floor-c", floor_c, "floor value for --floor-mode fixed")
        ->capture_default_str();

    // per-expert
    std::string pe_input;
    auto* per_expert = app.add_subcommand("per-expert", "identity checks for per-pool exponents");
    per_expert->add_option("--input", pe_input, "CSV with columns E,mu,nu")->required();

    // id-estimate
    std::string id_input, id_format = "auto";
    std::uint32_t id_k = 20, id_subsamples = 8;
    std::size_t id_size = 500;
    bool id_harmonic = false;
    auto* id_est = app.add_subcommand("id-estimate", "intrinsic dimension of embedding vectors");
    id_est->add_option("--input", id_input, "embeddings (CSV rows or f32 container)")->required();
    id_est->add_option("--format", id_format, "auto|csv|f32")->capture_default_str();
    id_est->add_option("--k", id_k, "neighbors per point")->capture_default_str();
    id_est->add_option("--subsamples", id_subsamples, "number of subsamples")
        ->capture_default_str();
    id_est->add_option("--size", id_size, "points per subsample")->capture_default_str();
    id_est->add_flag("--harmonic", id_harmonic, "harmonic-mean within-subsample aggregation");

    // optimal-k
    double ok_a = 1.0, ok_n = 1.0, ok_beta = 1.0, ok_d = 1.0, ok_tol = 1e-10;
    std::uint32_t ok_blocks = 1, ok_tokens = 1, ok_m = 1, ok_iters = 200;
    auto* optimal_k = app.add_subcommand("optimal-k", "optimal active expert count");
    optimal_k->add_option("--A", ok_a, "expert budget coefficient")->required();
    optimal_k->add_option("--n", ok_n, "sample count")->required();
    optimal_k->add_option("--blocks", ok_blocks)->required();
    optimal_k->add_option("--tokens", ok_tokens)->required();
    optimal_k->add_option("--M", ok_m, "expert pool size")->required();
    optimal_k->add_option("--beta", ok_beta)->required();
    optimal_k->add_option("--d", ok_d)->required();
    optimal_k->add_option("--tol", ok_tol)->capture_default_str();
    optimal_k->add_option("--max-iter", ok_iters)->capture_default_str();

    // compute-optimal
    double co_budget = 1.0, co_a = 1.0, co_b = 1.0, co_beta = 1.0, co_d = 1.0;
    std::uint32_t co_grid = 400;
    auto* compute_opt = app.add_subcommand("compute-optimal", "compute-optimal (N_act, n) split");
    compute_opt->add_option("--budget", co_budget, "compute budget C")->required();
    compute_opt->add_option("--A", co_a)->required();
    compute_opt->add_option("--B", co_b)->required();
    compute_opt->add_option("--beta", co_beta)->required();
    compute_opt->add_option("--d", co_d)->required();
    compute_opt->add_option("--grid", co_grid)->capture_default_str();

    // routing
    std::uint32_t rt_m = 1, rt_k = 1, rt_blocks = 1, rt_tokens = 1;
    auto* routing = app.add_subcommand("routing", "exact routing-pattern count and log bound");
    routing->add_option("--M", rt_m)->required();
    routing->add_option("--k", rt_k)->required();
    routing->add_option("--blocks", rt_blocks)->required();
    routing->add_option("--tokens", rt_tokens)->required();

    // approx-rate
    std::string ar_target = "sin3", ar_manifold = "circle", ar_charts = "8,16,32,64,128";
    double ar_beta = 2.0;
    std::uint32_t ar_k = 3;
    auto* approx_rate = app.add_subcommand("approx-rate", "local-expert approximation rate sweep");
    approx_rate->add_option("--target", ar_target, "sin3|square|exp")->capture_default_str();
    approx_rate->add_option("--manifold", ar_manifold, "circle|interval")->capture_default_str();
    approx_rate->add_option("--beta", ar_beta)->capture_default_str();
    approx_rate->add_option("--charts", ar_charts, "comma-separated chart counts")
        ->capture_default_str();
    approx_rate->add_option("--k", ar_k, "active experts")->capture_default_str();

    // lipschitz
    double lip_tau = 1.0;
    std::uint32_t lip_dim = 8;
    std::uint64_t lip_trials = 100000;
    auto* lipschitz = app.add_subcommand("lipschitz", "softmax Lipschitz sampling check");
    lipschitz->add_option("--tau", lip_tau)->capture_default_str();
    lipschitz->add_option("--dim", lip_dim)->capture_default_str();
    lipschitz->add_option("--trials", lip_trials)->capture_default_str();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        using namespace moesl::cli;
        if (exponents->parsed()) return emit(cmd_exponents(d, beta), out_path);
        if (budget->parsed()) return emit(cmd_budget(config_path), out_path);
        if (fit->parsed()) {
            if (floor_mode != "search" && floor_mode != "fixed")
                throw std::runtime_error("fit: --floor-mode must be search or fixed");
            bool search = floor_mode == "search";
            return emit(cmd_fit(fit_input, fit_axis, search,
                                search ? std::nullopt : std::optional<double>(floor_c),
                                fit_data_input),
                        out_path);
        }
        if (per_expert->parsed()) return emit(cmd_per_expert(pe_input), out_path);
        if (id_est->parsed())
            return emit(cmd_id_estimate(id_input, id_format, id_k, id_subsamples, id_size, seed,
                                        id_harmonic),
                        out_path);
        if (optimal_k->parsed())
            return emit(cmd_optimal_k(ok_a, ok_n, ok_blocks, ok_tokens, ok_m, ok_beta, ok_d,
                                      ok_tol, ok_iters),
                        out_path);
        if (compute_opt->parsed())
            return emit(cmd_compute_optimal(co_budget, co_a, co_b, co_beta, co_d, co_grid),
                        out_path);
        if (routing->parsed()) return emit(cmd_routing(rt_m, rt_k, rt_blocks, rt_tokens), out_path);
        if (approx_rate->parsed())
            return emit(cmd_approx_rate(ar_target, ar_manifold, ar_beta, parse_counts(ar_charts),
                                        ar_k, seed),
                        out_path);
        if (lipschitz->parsed())
            return emit(cmd_lipschitz(lip_tau, lip_dim, lip_trials, seed), out_path);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
