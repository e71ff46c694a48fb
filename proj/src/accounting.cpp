// SPDX-License-Identifier: Apache-2.0
#include "moesl/accounting.hpp"

#include <cmath>
#include <sstream>

namespace moesl {

std::uint64_t attn_params(const ArchConfig& cfg) {
    cfg.validate();
    std::uint64_t d = cfg.emb_dim;
    return 4 * d * d;
}

std::uint64_t expert_params(const ArchConfig& cfg) {
    cfg.validate();  // rejects ffn_depth < 2
    std::uint64_t d = cfg.emb_dim, w = cfg.ffn_width, depth = cfg.ffn_depth;
    std::uint64_t weights = 2 * d * w + (depth - 2) * w * w;
    std::uint64_t biases = w * (depth - 1) + d;
    return weights + biases;
}

ParamCounts active_budget(const ArchConfig& cfg, bool experts_only) {
    ParamCounts out;
    out.attn_per_block = experts_only ? 0 : attn_params(cfg);
    out.expert_params = expert_params(cfg);
    out.active_budget =
        static_cast<std::uint64_t>(cfg.blocks) *
        (out.attn_per_block + static_cast<std::uint64_t>(cfg.active_k) * out.expert_params);
    return out;
}

BigInt binomial(std::uint32_t n, std::uint32_t r) {
    if (r > n) throw std::invalid_argument("binomial: r > n");
    if (r > n - r) r = n - r;
    BigInt out = 1;
    for (std::uint32_t i = 1; i <= r; ++i) {
        out *= (n - r + i);
        out /= i;  // exact at every step: out is C(n-r+i, i)
    }
    return out;
}

BigInt pattern_count(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                     std::uint32_t seq_len) {
    if (active_k < 1 || active_k > experts)
        throw std::invalid_argument("pattern_count: need 1 <= k <= experts");
    if (blocks < 1 || seq_len < 1)
        throw std::invalid_argument("pattern_count: blocks and seq_len must be >= 1");
    BigInt per_slot = binomial(experts, active_k);
    BigInt out = 1;
    std::uint64_t slots = static_cast<std::uint64_t>(blocks) * seq_len;
    for (std::uint64_t i = 0; i < slots; ++i) out *= per_slot;
    return out;
}

double log_big(const BigInt& v) {
    if (v <= 0) throw std::domain_error("log_big: argument must be positive");
    // mantissa/exponent split keeps precision for counts beyond double range
    std::size_t bits = boost::multiprecision::msb(v);
    if (bits <= 900) return std::log(v.convert_to<double>());
    BigInt shifted = v >> (bits - 900);
    return std::log(shifted.convert_to<double>()) + static_cast<double>(bits - 900) * std::log(2.0);
}

double log_pattern_bound(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                         std::uint32_t seq_len) {
    if (active_k < 1 || active_k > experts)
        throw std::invalid_argument("log_pattern_bound: need 1 <= k <= experts");
    double lk = static_cast<double>(active_k);
    double lM = static_cast<double>(experts);
    return static_cast<double>(blocks) * static_cast<double>(seq_len) * lk *
           (1.0 + std::log(lM / lk));
}

double routing_term(const ArchConfig& cfg) {
    cfg.validate();
    return log_pattern_bound(cfg.experts, cfg.active_k, cfg.blocks, cfg.seq_len);
}

namespace {

// Advances a strictly ascending k-subset of {0..M-1} to its lexicographic
// successor; returns false after the last one.
bool next_subset(std::vector<std::uint32_t>& s, std::uint32_t experts) {
    std::uint32_t k = static_cast<std::uint32_t>(s.size());
    for (std::uint32_t i = k; i-- > 0;) {
        if (s[i] < experts - (k - i)) {
            ++s[i];
            for (std::uint32_t j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

void enumerate_patterns(std::uint32_t experts, std::uint32_t active_k, std::uint32_t blocks,
                        std::uint32_t seq_len, std::uint64_t limit,
                        const std::function<void(const RoutingPattern&)>& yield) {
    BigInt total = pattern_count(experts, active_k, blocks, seq_len);
    if (total > limit) {
        std::ostringstream msg;
        msg << "enumerate_patterns: " << total.str() << " patterns exceed limit " << limit;
        throw std::length_error(msg.str());
    }

    std::uint64_t slots = static_cast<std::uint64_t>(blocks) * seq_len;
    std::vector<std::uint32_t> first(active_k);
    for (std::uint32_t i = 0; i < active_k; ++i) first[i] = i;

    RoutingPattern pat;
    pat.blocks = blocks;
    pat.seq_len = seq_len;
    pat.experts = experts;
    pat.active_k = active_k;
    pat.subsets.assign(slots, first);

    for (;;) {
        yield(pat);
        // odometer over slots, least-significant slot last
        bool advanced = false;
        for (std::uint64_t slot = slots; slot-- > 0;) {
            if (next_subset(pat.subsets[slot], experts)) {
                advanced = true;
                break;
            }
            pat.subsets[slot] = first;
        }
        if (!advanced) return;
    }
}

std::vector<RoutingPattern> collect_patterns(std::uint32_t experts, std::uint32_t active_k,
                                             std::uint32_t blocks, std::uint32_t seq_len,
                                             std::uint64_t limit) {
    std::vector<RoutingPattern> out;
    enumerate_patterns(experts, active_k, blocks, seq_len, limit,
                       [&](const RoutingPattern& p) { out.push_back(p); });
    return out;
}

}  // namespace moesl
