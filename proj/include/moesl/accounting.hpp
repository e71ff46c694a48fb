// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <functional>

#include "moesl/arch.hpp"

namespace moesl {

using BigInt = boost::multiprecision::cpp_int;

/// Attention weights per block: W_Q, W_K, W_V, W_O, i.e. 4 * d_emb^2.
/// Attention biases and LayerNorm scale/shift are excluded; expert biases
/// are included in expert_params. This is the unique convention that
/// reconciles the published active-budget figures.
std::uint64_t attn_params(const ArchConfig& cfg);

/// One expert MLP with biases:
/// 2*d_emb*w + (depth-2)*w^2 weights, plus w*(depth-1) + d_emb biases.
std::uint64_t expert_params(const ArchConfig& cfg);

/// Active parameter budget N_act = blocks * (attn + k * expert).
/// With experts_only, attention is dropped: N_act = blocks * k * expert.
ParamCounts active_budget(const ArchConfig& cfg, bool experts_only = false);

/// Exact number of routing patterns: C(M,k)^(blocks*seq_len).
BigInt pattern_count(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                     std::uint32_t seq_len);

/// Exact binomial coefficient C(n, r).
BigInt binomial(std::uint32_t n, std::uint32_t r);

/// Natural log of a positive BigInt (for comparisons against bounds on
/// counts too large for double).
double log_big(const BigInt& v);

/// blocks * seq_len * k * ln(e*M/k), an upper bound on ln(pattern_count).
double log_pattern_bound(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                         std::uint32_t seq_len);

/// Routing overhead R_route = blocks * seq_len * k * ln(e*M/k).
double routing_term(const ArchConfig& cfg);

/// Streams every routing pattern exactly once, in lexicographic order of
/// the flattened subsets. Refuses (with the exact count in the message)
/// when pattern_count exceeds limit.
void enumerate_patterns(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                        std::uint32_t seq_len, std::uint64_t limit,
                        const std::function<void(const RoutingPattern&)>& yield);

/// Convenience collector over enumerate_patterns.
std::vector<RoutingPattern> collect_patterns(std::uint32_t experts, std::uint32_t active_k,
                                             std::uint32_t blocks, std::uint32_t seq_len,
                                             std::uint64_t limit);

}  // namespace moesl
