// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moesl/arch.hpp"
#include "moesl/table.hpp"

namespace moesl::cli {

/// Subcommand result: a CSV table plus whether every invoked contract
/// held (drives the process exit code).
struct CommandResult {
    TableArtifact table;
    bool contracts_ok = true;
};

/// Strict JSON ingestion of one or more architecture configs.
/// Accepted shapes: a single config object, or
/// {"shared": {...}, "sweep": [{...}, ...]} with per-row fields overriding
/// shared ones. Unknown keys and missing required fields are errors that
/// name the offending key.
std::vector<ArchConfig> load_arch_configs(const std::string& path);

CommandResult cmd_exponents(double intrinsic_dim, double beta);
CommandResult cmd_budget(const std::string& config_path);

/// Fits one curve; when a second (data-axis) curve is supplied the row also
/// carries the identity prediction alpha_N/(1+alpha_N) and its residual
/// against the fitted data exponent.
CommandResult cmd_fit(const std::string& csv_path, const std::string& axis, bool floor_search,
                      std::optional<double> fixed_floor,
                      const std::string& data_csv_path = "");
CommandResult cmd_per_expert(const std::string& csv_path);
CommandResult cmd_id_estimate(const std::string& input_path, const std::string& format,
                              std::uint32_t k, std::uint32_t subsamples, std::size_t size,
                              std::uint64_t seed, bool harmonic);
CommandResult cmd_optimal_k(double expert_budget, double n_samples, std::uint32_t blocks,
                            std::uint32_t tokens, std::uint32_t experts, double beta,
                            double intrinsic_dim, double tol, std::uint32_t max_iter);
CommandResult cmd_compute_optimal(double budget, double a_coef, double b_coef, double beta,
                                  double intrinsic_dim, std::uint32_t grid_points);
CommandResult cmd_routing(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                          std::uint32_t tokens);
CommandResult cmd_approx_rate(const std::string& target, const std::string& manifold, double beta,
                              const std::vector<std::size_t>& chart_counts, std::uint32_t active_k,
                              std::uint64_t seed);
CommandResult cmd_lipschitz(double tau, std::uint32_t dim, std::uint64_t trials,
                            std::uint64_t seed);

}  // namespace moesl::cli
