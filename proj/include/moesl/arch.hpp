// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace moesl {

/// Architecture tuple for a sparse-expert transformer. Every bound,
/// budget, and solver in this library is parameterized by these fields.
struct ArchConfig {
    std::uint32_t ambient_dim = 1;   // input coordinate dimension D
    std::uint32_t seq_len = 1;       // tokens per input
    std::uint32_t emb_dim = 1;       // model width d_emb
    std::uint32_t heads = 1;         // attention heads m (d_emb % m == 0)
    std::uint32_t blocks = 1;        // transformer blocks L_T
    std::uint32_t experts = 1;       // expert pool size M
    std::uint32_t active_k = 1;      // experts active per token, 1 <= k <= M
    std::uint32_t ffn_depth = 2;     // expert MLP depth, >= 2
    std::uint32_t ffn_width = 1;     // expert MLP hidden width
    double weight_bound = 1.0;       // kappa, sup-norm cap on every parameter
    double output_bound = 1.0;       // R, cap on network outputs
    double input_bound = 1.0;        // M0, cap on input entries

    std::uint32_t head_dim() const { return emb_dim / heads; }

    void validate() const {
        if (ambient_dim == 0 || seq_len == 0 || emb_dim == 0 || heads == 0 || blocks == 0 ||
            experts == 0 || ffn_width == 0)
            throw std::invalid_argument("ArchConfig: all dimensions must be positive");
        if (active_k < 1 || active_k > experts)
            throw std::invalid_argument("ArchConfig: active_k must satisfy 1 <= k <= experts");
        if (emb_dim % heads != 0)
            throw std::invalid_argument("ArchConfig: emb_dim must be divisible by heads");
        if (ffn_depth < 2)
            throw std::invalid_argument("ArchConfig: ffn_depth must be at least 2");
        if (!(weight_bound > 0.0) || !(output_bound > 0.0) || !(input_bound > 0.0))
            throw std::invalid_argument("ArchConfig: weight/output/input bounds must be positive");
    }
};

/// Per-block and aggregate parameter budgets.
struct ParamCounts {
    std::uint64_t attn_per_block = 0;  // attention weights per block
    std::uint64_t expert_params = 0;   // one expert MLP, weights + biases
    std::uint64_t active_budget = 0;   // blocks * (attn + k * expert)
};

/// One concrete routing assignment: a k-subset of experts (zero-based
/// indices, ascending) for every (block, token) slot. Slots are stored
/// flattened block-major: slot = block * seq_len + token.
struct RoutingPattern {
    std::uint32_t blocks = 0;
    std::uint32_t seq_len = 0;
    std::uint32_t experts = 0;
    std::uint32_t active_k = 0;
    std::vector<std::vector<std::uint32_t>> subsets;

    const std::vector<std::uint32_t>& at(std::uint32_t block, std::uint32_t token) const {
        return subsets.at(static_cast<std::size_t>(block) * seq_len + token);
    }

    void validate() const {
        if (subsets.size() != static_cast<std::size_t>(blocks) * seq_len)
            throw std::invalid_argument("RoutingPattern: slot count mismatch");
        for (const auto& s : subsets) {
            if (s.size() != active_k)
                throw std::invalid_argument("RoutingPattern: subset size != k");
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (s[i] >= experts)
                    throw std::invalid_argument("RoutingPattern: expert index out of range");
                if (i > 0 && s[i - 1] >= s[i])
                    throw std::invalid_argument("RoutingPattern: subset not strictly ascending");
            }
        }
    }
};

}  // namespace moesl
