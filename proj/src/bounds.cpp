// SPDX-License-Identifier: Apache-2.0
#include "moesl/bounds.hpp"

#include <cmath>

#include "moesl/accounting.hpp"

namespace moesl {

BoundBreakdown master_bound(double n_act, double n_samples, double r_route,
                            const ScalingParams& p, const BoundConstants& c) {
    p.validate();
    c.validate();
    if (!(n_act >= 1.0)) throw std::invalid_argument("master_bound: n_act must be >= 1");
    if (!(n_samples >= 1.0)) throw std::invalid_argument("master_bound: n_samples must be >= 1");
    if (!(r_route >= 0.0)) throw std::invalid_argument("master_bound: r_route must be >= 0");

    BoundBreakdown out;
    out.approx_term = c.c_approx * std::pow(n_act, -2.0 * p.beta / p.intrinsic_dim);
    out.est_term = c.c_est * n_act / n_samples;
    out.routing_term = c.c_rt * r_route / n_samples;
    out.total = out.approx_term + out.est_term + out.routing_term;
    out.dominant = BoundTerm::approximation;
    if (out.est_term > out.approx_term) out.dominant = BoundTerm::estimation;
    if (out.routing_term > out.approx_term && out.routing_term > out.est_term)
        out.dominant = BoundTerm::routing;
    return out;
}

double covering_bound(const ArchConfig& cfg, const ParamCounts& counts, double delta, double c1,
                      double c2, double c3) {
    cfg.validate();
    if (!(delta > 0.0 && delta < 1.0))
        throw std::domain_error("covering_bound: delta must lie in (0,1)");
    if (!(c1 > 0.0 && c2 > 0.0 && c3 > 0.0))
        throw std::invalid_argument("covering_bound: constants must be positive");
    double active = static_cast<double>(counts.active_budget);
    double scale = c2 * cfg.weight_bound * cfg.output_bound * cfg.input_bound / delta;
    return c1 * active * std::log(scale) + c3 * routing_term(cfg);
}

double erm_excess_bound(double approx_sq, double log_cover, double n_samples, double delta) {
    if (approx_sq < 0.0 || log_cover < 0.0 || delta < 0.0)
        throw std::invalid_argument("erm_excess_bound: inputs must be nonnegative");
    if (!(n_samples >= 1.0)) throw std::invalid_argument("erm_excess_bound: n_samples must be >= 1");
    return approx_sq + log_cover / n_samples + delta;
}

ExponentTriple theoretical_exponents(const ScalingParams& p) {
    p.validate();
    ExponentTriple t;
    t.alpha_N = 2.0 * p.beta / p.intrinsic_dim;
    t.alpha_D = 2.0 * p.beta / (2.0 * p.beta + p.intrinsic_dim);
    t.alpha_C = p.beta / (p.beta + p.intrinsic_dim);
    return t;
}

double estimation_crossover(double n_samples, const ScalingParams& p) {
    p.validate();
    if (!(n_samples >= 1.0))
        throw std::invalid_argument("estimation_crossover: n_samples must be >= 1");
    return std::pow(n_samples, p.intrinsic_dim / (2.0 * p.beta + p.intrinsic_dim));
}

double routing_crossover(double n_samples, const ArchConfig& cfg, const ScalingParams& p) {
    p.validate();
    if (!(n_samples >= 1.0))
        throw std::invalid_argument("routing_crossover: n_samples must be >= 1");
    double rt = routing_term(cfg);
    if (!(rt > 0.0)) throw std::domain_error("routing_crossover: routing term is zero");
    return std::pow(n_samples / rt, p.intrinsic_dim / (2.0 * p.beta));
}

double subcritical_range(double n_samples, const ArchConfig& cfg, const ScalingParams& p) {
    return std::min(estimation_crossover(n_samples, p), routing_crossover(n_samples, cfg, p));
}

double n_threshold(const ArchConfig& cfg, const ScalingParams& p) {
    p.validate();
    double rt = routing_term(cfg);
    return std::pow(rt, (2.0 * p.beta + p.intrinsic_dim) / p.intrinsic_dim);
}

Regime regime_classify(double n_samples, const ArchConfig& cfg, const ScalingParams& p,
                       double margin) {
    if (!(margin >= 1.0)) throw std::invalid_argument("regime_classify: margin must be >= 1");
    double thr = n_threshold(cfg, p);
    if (n_samples < thr / margin) return Regime::routing_dominated;
    if (n_samples > thr * margin) return Regime::power_law;
    return Regime::transition;
}

SampleComplexity sample_complexity(double eps, const ScalingParams& p, const ArchConfig& cfg,
                                   Regime regime) {
    p.validate();
    if (!(eps > 0.0 && eps < 1.0))
        throw std::domain_error("sample_complexity: eps must lie in (0,1)");
    SampleComplexity out;
    out.n_act = std::pow(eps, -p.intrinsic_dim / p.beta);
    if (regime == Regime::routing_dominated)
        out.n_samples = routing_term(cfg) / eps;
    else
        out.n_samples = std::pow(eps, -(2.0 * p.beta + p.intrinsic_dim) / p.beta);
    return out;
}

double m_effect_delta(std::uint32_t active_k, std::uint32_t m1, std::uint32_t m2, double n_samples,
                      std::uint32_t blocks, std::uint32_t seq_len) {
    if (active_k < 1) throw std::domain_error("m_effect_delta: k must be >= 1");
    if (m1 < active_k) throw std::domain_error("m_effect_delta: M1 must be >= k");
    if (m2 < m1) throw std::domain_error("m_effect_delta: M2 must be >= M1");
    if (!(n_samples >= 1.0)) throw std::invalid_argument("m_effect_delta: n_samples must be >= 1");
    return static_cast<double>(blocks) * seq_len * active_k / n_samples *
           std::log(static_cast<double>(m2) / m1);
}

bool routing_negligible(const ArchConfig& cfg, const ParamCounts& counts, double margin) {
    cfg.validate();
    if (!(margin > 1.0)) throw std::invalid_argument("routing_negligible: margin must be > 1");
    double per_slot = static_cast<double>(counts.active_budget) /
                      (static_cast<double>(cfg.blocks) * cfg.seq_len * cfg.active_k);
    double lg = 1.0 + std::log(static_cast<double>(cfg.experts) / cfg.active_k);
    return lg * margin <= per_slot;
}

}  // namespace moesl
