// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moesl/arch.hpp"

namespace moesl {

/// Inference-only sparse-expert transformer with hard top-k routing.
///
/// Parameters are stored as a flat little-endian-serializable f32 vector;
/// arithmetic runs in double. Per-block layout, in order:
///   ln1 gamma[d], ln1 beta[d],
///   per head: W_Q[d][d_h], W_K[d][d_h], W_V[d][d_h]  (row-major),
///   W_O[d][d],
///   ln2 gamma[d], ln2 beta[d],
///   router W_r[M][d],
///   per expert: depth layers of (W, b) with widths d -> w -> ... -> w -> d.
/// Blocks are pre-norm: H += MHA(LN1(H)); then per token
/// h += sum_topk gate_i * E_i(LN2(h)). Experts are ReLU MLPs with a linear
/// output layer. The readout is fixed: mean over tokens and coordinates.
struct MoEModel {
    ArchConfig cfg;
    std::vector<float> params;

    std::size_t params_per_block() const;
    std::size_t block_offset(std::uint32_t block) const;
    std::size_t router_offset(std::uint32_t block) const;
    std::size_t expert_offset(std::uint32_t block, std::uint32_t expert) const;
    std::size_t expert_param_count() const;
    void validate() const;
};

/// LayerNorm epsilon; recorded as the serialization version byte.
inline constexpr double kLayerNormEps = 1e-5;
inline constexpr unsigned char kModelFormatVersion = 1;

/// All parameters zero.
MoEModel zero_model(const ArchConfig& cfg);

/// Parameters i.i.d. uniform in [-scale*kappa, scale*kappa], rounded to
/// f32. scale < 1 leaves headroom so perturbation clipping stays inactive.
MoEModel seeded_model(const ArchConfig& cfg, std::uint64_t seed, double scale = 0.9);

struct ForwardTrace {
    std::vector<double> h_out;   // seq_len x emb_dim, row-major
    RoutingPattern pattern;      // realized top-k sets, ascending indices
    std::vector<std::vector<double>> gates;  // per (block*seq_len + token), aligned with pattern
};

/// Deterministic forward pass. h0 has seq_len x emb_dim entries with
/// |h0| <= input_bound. Throws on shape mismatch and on non-finite
/// intermediates (naming block and token).
ForwardTrace forward(const MoEModel& model, const std::vector<double>& h0);

/// Scalar readout: mean over tokens, then mean over coordinates.
double readout(const MoEModel& model, const std::vector<double>& h_out);

/// Temperature softmax with max-subtraction.
std::vector<double> softmax_tau(const std::vector<double>& u, double tau);

/// Max over seeded random pairs of
/// ||softmax(u) - softmax(v)||_inf / ||u - v||_inf, entries in [-10, 10].
/// The analytic ceiling is 1/(2*tau).
double softmax_lip_check(double tau, std::uint32_t dim, std::uint64_t trials, std::uint64_t seed);

/// Runs one block on an input matrix (for block-level Lipschitz probes).
std::vector<double> forward_block(const MoEModel& model, std::uint32_t block,
                                  const std::vector<double>& h);

/// Empirical lower bound on the per-block input Lipschitz constant:
/// max over blocks and seeded input pairs of the output/input sup-norm
/// ratio, floored at 1.
double estimate_input_lipschitz(const MoEModel& model, std::uint32_t trials, std::uint64_t seed);

struct StabilityRow {
    double eta = 0.0;
    double max_abs_delta = 0.0;  // max |T(theta') - T(theta)| over trials
    double max_ratio = 0.0;      // max_abs_delta / eta
    std::uint32_t redraws = 0;   // trials rejected for routing flips
};

struct StabilityReport {
    std::vector<StabilityRow> rows;  // ordered as eta_list
    bool unstable = false;           // > 50% redraws at some eta
};

/// Perturbs all non-router parameters by uniform [-eta, eta] (clipped to
/// [-kappa, kappa]), keeping the router frozen; trials whose realized
/// routing pattern changes are redrawn. Directions are derived from the
/// trial index so the same directions are scaled across eta levels.
StabilityReport perturb_stability(const MoEModel& model, const std::vector<double>& eta_list,
                                  std::uint32_t trials, std::uint64_t seed);

/// Parameter-Lipschitz ceiling:
/// L_in^blocks * (seq*heads*d^2 + (1+k)*d*w^depth) * kappa.
double lparam_formula(const ArchConfig& cfg, double l_in);

void save_model(const MoEModel& model, const std::string& path);
MoEModel load_model(const std::string& path);

}  // namespace moesl
