// SPDX-License-Identifier: Apache-2.0
#include "moesl/cli_core.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "moesl/accounting.hpp"
#include "moesl/allocator.hpp"
#include "moesl/approx_lab.hpp"
#include "moesl/bounds.hpp"
#include "moesl/fitting.hpp"
#include "moesl/intrinsic_dim.hpp"
#include "moesl/moe_forward.hpp"

namespace moesl::cli {

namespace {

using nlohmann::json;

const std::set<std::string> kArchKeys = {"D",       "seq_len",   "emb_dim", "heads",
                                         "blocks",  "experts",   "k",       "ffn_depth",
                                         "ffn_width", "kappa",   "R",       "M0"};
const std::set<std::string> kRequired = {"seq_len", "emb_dim", "heads",
                                         "blocks",  "experts", "k",
                                         "ffn_width"};

void check_keys(const json& obj, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::runtime_error("config: unknown key `" + it.key() + "`");
}

ArchConfig arch_from_json(const json& merged) {
    check_keys(merged, kArchKeys);
    for (const auto& key : kRequired)
        if (!merged.contains(key))
            throw std::runtime_error("config: missing field `" + key + "`");
    ArchConfig c;
    c.seq_len = merged.at("seq_len").get<std::uint32_t>();
    c.emb_dim = merged.at("emb_dim").get<std::uint32_t>();
    c.heads = merged.at("heads").get<std::uint32_t>();
    c.blocks = merged.at("blocks").get<std::uint32_t>();
    c.experts = merged.at("experts").get<std::uint32_t>();
    c.active_k = merged.at("k").get<std::uint32_t>();
    c.ffn_width = merged.at("ffn_width").get<std::uint32_t>();
    c.ffn_depth = merged.value("ffn_depth", 2u);
    c.ambient_dim = merged.value("D", c.emb_dim);
    c.weight_bound = merged.value("kappa", 1.0);
    c.output_bound = merged.value("R", 1.0);
    c.input_bound = merged.value("M0", 1.0);
    c.validate();
    return c;
}

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& ex) {
        throw std::runtime_error(path + ": " + ex.what());
    }
    return j;
}

}  // namespace

std::vector<ArchConfig> load_arch_configs(const std::string& path) {
    json j = parse_file(path);
    if (!j.is_object()) throw std::runtime_error(path + ": top level must be an object");
    std::vector<ArchConfig> out;
    if (j.contains("sweep")) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "sweep" && it.key() != "shared")
                throw std::runtime_error("config: unknown key `" + it.key() + "`");
        json shared = j.value("shared", json::object());
        check_keys(shared, kArchKeys);
        if (!j.at("sweep").is_array()) throw std::runtime_error("config: `sweep` must be an array");
        for (const auto& row : j.at("sweep")) {
            json merged = shared;
            for (auto it = row.begin(); it != row.end(); ++it) merged[it.key()] = it.value();
            out.push_back(arch_from_json(merged));
        }
    } else {
        out.push_back(arch_from_json(j));
    }
    if (out.empty()) throw std::runtime_error(path + ": no configurations");
    return out;
}

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace

CommandResult cmd_exponents(double intrinsic_dim, double beta) {
    ScalingParams p{beta, intrinsic_dim};
    ExponentTriple t = theoretical_exponents(p);
    // the published consistency column plugs the 3-decimal displayed
    // alpha_N into alpha_N/(1+alpha_N); reproduce that convention
    double an3 = round3(t.alpha_N);
    double consistency = an3 / (1.0 + an3);

    CommandResult res;
    std::ostringstream args;
    args << "--d " << format_double(intrinsic_dim) << " --beta " << format_double(beta);
    res.table.provenance = make_provenance("exponents", args.str());
    res.table.columns = {"d", "beta", "alpha_N", "alpha_D", "alpha_C", "consistency"};
    res.table.add_row({intrinsic_dim, beta, t.alpha_N, t.alpha_D, t.alpha_C, consistency});
    return res;
}

CommandResult cmd_budget(const std::string& config_path) {
    auto configs = load_arch_configs(config_path);
    CommandResult res;
    res.table.provenance = make_provenance("budget", "--config " + config_path);
    res.table.columns = {"blocks",   "ffn_width", "emb_dim",     "heads",
                         "experts",  "k",         "seq_len",     "attn_per_block",
                         "expert_params", "n_act", "r_route",    "log_pattern_bound"};
    for (const auto& cfg : configs) {
        ParamCounts counts = active_budget(cfg);
        res.table.add_row({static_cast<std::int64_t>(cfg.blocks),
                           static_cast<std::int64_t>(cfg.ffn_width),
                           static_cast<std::int64_t>(cfg.emb_dim),
                           static_cast<std::int64_t>(cfg.heads),
                           static_cast<std::int64_t>(cfg.experts),
                           static_cast<std::int64_t>(cfg.active_k),
                           static_cast<std::int64_t>(cfg.seq_len),
                           static_cast<std::int64_t>(counts.attn_per_block),
                           static_cast<std::int64_t>(counts.expert_params),
                           static_cast<std::int64_t>(counts.active_budget), routing_term(cfg),
                           log_pattern_bound(cfg.experts, cfg.active_k, cfg.blocks, cfg.seq_len)});
    }
    return res;
}

namespace {

LossCurve load_loss_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    LossCurve curve;
    std::string line;
    bool header = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string a, b, extra;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected two comma-separated columns");
        if (std::getline(ss, extra, ','))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected exactly two columns");
        if (header) {
            header = false;
            if (a == "x" && b == "loss") continue;  // header row optional
        }
        try {
            curve.x.push_back(std::stod(a));
            curve.loss.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": non-numeric field");
        }
    }
    return curve;
}

}  // namespace

CommandResult cmd_fit(const std::string& csv_path, const std::string& axis, bool floor_search,
                      std::optional<double> fixed_floor, const std::string& data_csv_path) {
    if (axis != "model" && axis != "data" && axis != "compute")
        throw std::runtime_error("fit: axis must be model, data, or compute");
    auto run_fit = [&](const std::string& path) {
        LossCurve curve = load_loss_csv(path);
        return floor_search ? fit_power_law(curve, FloorMode::search)
                            : fit_power_law(curve, FloorMode::fixed, fixed_floor.value_or(0.0));
    };
    FitResult fit = run_fit(csv_path);

    CommandResult res;
    std::ostringstream args;
    args << "--input " << csv_path << " --axis " << axis
         << (floor_search ? " --floor-mode search"
                          : " --floor-c " + format_double(fixed_floor.value_or(0.0)));
    if (!data_csv_path.empty()) args << " --data-input " << data_csv_path;
    res.table.provenance = make_provenance("fit", args.str());

    if (data_csv_path.empty()) {
        res.table.columns = {"axis", "exponent", "floor", "log_prefactor", "r_squared",
                             "n_points"};
        res.table.add_row({axis, fit.exponent, fit.floor, fit.log_prefactor, fit.r_squared,
                           static_cast<std::int64_t>(fit.n_points)});
        return res;
    }

    // paired fits: the first file provides alpha_N, the second alpha_D,
    // and the identity prediction ties them together
    FitResult data_fit = run_fit(data_csv_path);
    ConsistencyResult cons = consistency_check(fit.exponent, data_fit.exponent);
    res.table.columns = {"alpha_N", "alpha_D", "alpha_D_pred", "r_D", "rel_err_D",
                         "alpha_C", "floor_N", "floor_D"};
    res.table.add_row({fit.exponent, data_fit.exponent, cons.pred_D, cons.r_D, cons.rel_err_D,
                       compute_exponent(fit.exponent, data_fit.exponent), fit.floor,
                       data_fit.floor});
    return res;
}

CommandResult cmd_per_expert(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path);
    std::vector<std::tuple<std::uint32_t, double, double>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            if (line.rfind("E,", 0) == 0) continue;
        }
        std::stringstream ss(line);
        std::string e, mu, nu;
        if (!std::getline(ss, e, ',') || !std::getline(ss, mu, ',') || !std::getline(ss, nu, ','))
            throw std::runtime_error(csv_path + ": expected columns E,mu,nu");
        rows.emplace_back(static_cast<std::uint32_t>(std::stoul(e)), std::stod(mu), std::stod(nu));
    }
    PerExpertTable table = per_expert_table(rows);
    auto kappas = kappa_from_rows(table.rows);
    AmplificationFit amp = amplification_fit(kappas);

    CommandResult res;
    res.table.provenance = make_provenance("per-expert", "--input " + csv_path);
    res.table.columns = {"E",     "mu",        "nu",        "alpha_N",      "alpha_D",
                         "alpha_C", "alpha_D_pred", "alpha_C_pred", "r_D",  "r_C",
                         "rel_err_D", "rel_err_C", "kappa"};
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        res.table.add_row({static_cast<std::int64_t>(r.experts), r.mu, r.nu, r.alpha_N, r.alpha_D,
                           r.alpha_C, r.alpha_D_pred, r.alpha_C_pred, r.r_D, r.r_C, r.rel_err_D,
                           r.rel_err_C, kappas[i].second});
    }
    std::ostringstream s;
    s << "summary mae_r_D=" << format_double(table.summary.mae_r_D)
      << " mae_r_C=" << format_double(table.summary.mae_r_C)
      << " mape_r_D=" << format_double(table.summary.mape_r_D)
      << " mape_r_C=" << format_double(table.summary.mape_r_C)
      << " kappa_fit_A=" << format_double(amp.intercept)
      << " kappa_fit_B=" << format_double(amp.slope)
      << " kappa_fit_r2=" << format_double(amp.r_squared);
    res.table.provenance += " | " + s.str();
    return res;
}

CommandResult cmd_id_estimate(const std::string& input_path, const std::string& format,
                              std::uint32_t k, std::uint32_t subsamples, std::size_t size,
                              std::uint64_t seed, bool harmonic) {
    EmbeddingSet points;
    if (format == "csv")
        points = load_embeddings_csv(input_path);
    else if (format == "f32")
        points = load_embeddings_f32(input_path);
    else if (format == "auto")
        points = load_embeddings_auto(input_path);
    else
        throw std::runtime_error("id-estimate: format must be auto, csv, or f32");

    IDEstimate est = estimate_id(points, k, subsamples, size, seed,
                                 harmonic ? IDAggregate::harmonic_mean : IDAggregate::mean);
    CommandResult res;
    std::ostringstream args;
    args << "--input " << input_path << " --format " << format << " --k " << k << " --subsamples "
         << subsamples << " --size " << size << " --seed " << seed
         << (harmonic ? " --harmonic" : "");
    res.table.provenance = make_provenance("id-estimate", args.str());
    res.table.columns = {"stat", "value"};
    for (std::size_t i = 0; i < est.per_subsample.size(); ++i)
        res.table.add_row({"subsample_" + std::to_string(i), est.per_subsample[i]});
    res.table.add_row({std::string("median"), est.median});
    res.table.add_row({std::string("mad"), est.mad});
    return res;
}

CommandResult cmd_optimal_k(double expert_budget, double n_samples, std::uint32_t blocks,
                            std::uint32_t tokens, std::uint32_t experts, double beta,
                            double intrinsic_dim, double tol, std::uint32_t max_iter) {
    KObjectiveParams p;
    p.expert_budget = expert_budget;
    p.n_samples = n_samples;
    p.blocks = blocks;
    p.seq_len = tokens;
    p.experts = experts;
    p.scaling = {beta, intrinsic_dim};
    KSolution sol = optimal_k_fixed_point(p, tol, max_iter);
    std::uint32_t grid = optimal_k_grid(p);
    Sandwich foc = k_sandwich_foc(p);

    CommandResult res;
    std::ostringstream args;
    args << "--A " << format_double(expert_budget) << " --n " << format_double(n_samples)
         << " --blocks " << blocks << " --tokens " << tokens << " --M " << experts << " --beta "
         << format_double(beta) << " --d " << format_double(intrinsic_dim);
    res.table.provenance = make_provenance("optimal-k", args.str());
    res.table.columns = {"k_fixed_point", "k_continuous", "iterations", "converged",
                         "capped",        "k_grid",       "agree_within_1", "lower", "upper",
                         "lower_foc",     "upper_foc",    "objective_fp", "objective_grid"};
    bool agree = std::llabs(static_cast<long long>(sol.k_star) - static_cast<long long>(grid)) <= 1;
    res.table.add_row({static_cast<std::int64_t>(sol.k_star), sol.k_continuous,
                       static_cast<std::int64_t>(sol.iterations),
                       static_cast<std::int64_t>(sol.converged ? 1 : 0),
                       static_cast<std::int64_t>(sol.capped ? 1 : 0),
                       static_cast<std::int64_t>(grid), static_cast<std::int64_t>(agree ? 1 : 0),
                       sol.lower, sol.upper, foc.lower, foc.upper,
                       k_objective(static_cast<double>(sol.k_star), p),
                       k_objective(static_cast<double>(grid), p)});
    res.contracts_ok = sol.converged;
    return res;
}

CommandResult cmd_compute_optimal(double budget, double a_coef, double b_coef, double beta,
                                  double intrinsic_dim, std::uint32_t grid_points) {
    ScalingParams p{beta, intrinsic_dim};
    ComputeAllocation alloc = compute_optimal(budget, a_coef, b_coef, p);
    double grid = compute_optimal_grid(budget, a_coef, b_coef, p, grid_points);
    double rel_gap = std::fabs(grid - alloc.n_act_star) / alloc.n_act_star;

    CommandResult res;
    std::ostringstream args;
    args << "--budget " << format_double(budget) << " --A " << format_double(a_coef) << " --B "
         << format_double(b_coef) << " --beta " << format_double(beta) << " --d "
         << format_double(intrinsic_dim) << " --grid " << grid_points;
    res.table.provenance = make_provenance("compute-optimal", args.str());
    res.table.columns = {"n_act_star", "n_samples_star", "error_at_opt", "n_act_grid", "rel_gap",
                         "product_rel_err"};
    double product_rel = std::fabs(alloc.n_act_star * alloc.n_samples_star - budget) / budget;
    res.table.add_row(
        {alloc.n_act_star, alloc.n_samples_star, alloc.error_at_opt, grid, rel_gap, product_rel});
    res.contracts_ok = product_rel <= 1e-9 && rel_gap <= 0.02;
    return res;
}

CommandResult cmd_routing(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                          std::uint32_t tokens) {
    BigInt count = pattern_count(experts, active_k, blocks, tokens);
    double ln_count = log_big(count);
    double bound = log_pattern_bound(experts, active_k, blocks, tokens);

    CommandResult res;
    std::ostringstream args;
    args << "--M " << experts << " --k " << active_k << " --blocks " << blocks << " --tokens "
         << tokens;
    res.table.provenance = make_provenance("routing", args.str());
    res.table.columns = {"experts", "k", "blocks", "tokens", "pattern_count", "ln_count",
                         "log_bound"};
    res.table.add_row({static_cast<std::int64_t>(experts), static_cast<std::int64_t>(active_k),
                       static_cast<std::int64_t>(blocks), static_cast<std::int64_t>(tokens),
                       count.str(), ln_count, bound});
    res.contracts_ok = ln_count <= bound + 1e-9;
    return res;
}

CommandResult cmd_approx_rate(const std::string& target, const std::string& manifold, double beta,
                              const std::vector<std::size_t>& chart_counts, std::uint32_t active_k,
                              std::uint64_t seed) {
    (void)seed;  // the construction is deterministic; kept for interface symmetry
    TargetFunction f;
    if (target == "sin3")
        f = target_sin3();
    else if (target == "square")
        f = target_square();
    else if (target == "exp")
        f = target_exp();
    else
        throw std::runtime_error("approx-rate: target must be sin3, square, or exp");
    ManifoldSpec geom;
    if (manifold == "circle") {
        geom.kind = ManifoldSpec::Kind::circle;
        geom.ambient_dim = 2;
    } else if (manifold == "interval") {
        geom.kind = ManifoldSpec::Kind::interval;
        geom.a = 0.0;
        geom.b = 1.0;
    } else {
        throw std::runtime_error("approx-rate: manifold must be circle or interval");
    }
    RateResult rate = rate_experiment(f, geom, beta, chart_counts, active_k);

    CommandResult res;
    std::ostringstream args;
    args << "--target " << target << " --manifold " << manifold << " --beta "
         << format_double(beta) << " --k " << active_k << " --charts ";
    for (std::size_t i = 0; i < chart_counts.size(); ++i)
        args << chart_counts[i] << (i + 1 < chart_counts.size() ? "," : "");
    res.table.provenance = make_provenance("approx-rate", args.str());
    res.table.provenance += " | slope=" + format_double(rate.slope) +
                            " r2=" + format_double(rate.r_squared) +
                            (rate.degenerate ? " degenerate=1" : "");
    res.table.columns = {"M", "rho", "sup_error"};
    for (const auto& pt : rate.points)
        res.table.add_row({static_cast<std::int64_t>(pt.charts), pt.rho, pt.sup_error});
    return res;
}

CommandResult cmd_lipschitz(double tau, std::uint32_t dim, std::uint64_t trials,
                            std::uint64_t seed) {
    double max_ratio = softmax_lip_check(tau, dim, trials, seed);
    double ceiling = 1.0 / (2.0 * tau);

    CommandResult res;
    std::ostringstream args;
    args << "--tau " << format_double(tau) << " --dim " << dim << " --trials " << trials
         << " --seed " << seed;
    res.table.provenance = make_provenance("lipschitz", args.str());
    res.table.columns = {"tau", "dim", "trials", "max_ratio", "ceiling", "ok"};
    bool ok = max_ratio <= ceiling;
    res.table.add_row({tau, static_cast<std::int64_t>(dim), static_cast<std::int64_t>(trials),
                       max_ratio, ceiling, static_cast<std::int64_t>(ok ? 1 : 0)});
    res.contracts_ok = ok;
    return res;
}

}  // namespace moesl::cli
