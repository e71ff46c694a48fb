// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "moesl/arch.hpp"

namespace moesl {

/// Smoothness and intrinsic dimension of the target; every exponent in
/// the library is a function of these two numbers.
struct ScalingParams {
    double beta = 1.0;       // Hoelder smoothness, > 0
    double intrinsic_dim = 1.0;  // manifold dimension d, >= 1 (may be non-integer)

    void validate() const {
        if (!(beta > 0.0)) throw std::invalid_argument("ScalingParams: beta must be positive");
        if (!(intrinsic_dim >= 1.0))
            throw std::invalid_argument("ScalingParams: intrinsic_dim must be >= 1");
    }
};

/// Leading constants of the three excess-risk terms. All default to 1;
/// the library reports trends and exponents, never absolute risk.
struct BoundConstants {
    double c_approx = 1.0;
    double c_est = 1.0;
    double c_rt = 1.0;

    void validate() const {
        if (!(c_approx > 0.0) || !(c_est > 0.0) || !(c_rt > 0.0))
            throw std::invalid_argument("BoundConstants: constants must be positive");
    }
};

enum class BoundTerm { approximation, estimation, routing };

struct BoundBreakdown {
    double approx_term = 0.0;
    double est_term = 0.0;
    double routing_term = 0.0;
    double total = 0.0;
    BoundTerm dominant = BoundTerm::approximation;
};

/// Exponent triple implied by (beta, d):
/// alpha_N = 2b/d, alpha_D = 2b/(2b+d), alpha_C = b/(b+d).
struct ExponentTriple {
    double alpha_N = 0.0;
    double alpha_D = 0.0;
    double alpha_C = 0.0;
};

enum class Regime { routing_dominated, power_law, transition };

/// Excess-risk decomposition:
/// c_approx * N^(-2b/d) + c_est * N/n + c_rt * R_route/n.
/// Dominant names the largest term, ties broken approximation > estimation
/// > routing.
BoundBreakdown master_bound(double n_act, double n_samples, double r_route,
                            const ScalingParams& p, const BoundConstants& c = {});

/// Metric-entropy bound in nats:
/// C1 * N_act * ln(C2*kappa*R*M0/delta) + C3 * R_route,
/// where N_act is the active budget from counts. Requires delta in (0,1).
double covering_bound(const ArchConfig& cfg, const ParamCounts& counts, double delta,
                      double c1 = 1.0, double c2 = 1.0, double c3 = 1.0);

/// Unit-constant ERM combiner: approx_sq + log_cover/n + delta. The R^2
/// loss-scale factor is reported separately by callers that need it.
double erm_excess_bound(double approx_sq, double log_cover, double n_samples, double delta);

ExponentTriple theoretical_exponents(const ScalingParams& p);

/// Budget at which approximation and estimation balance: n^(d/(2b+d)).
double estimation_crossover(double n_samples, const ScalingParams& p);

/// Budget below which routing stays subdominant: (n/R_route)^(d/(2b)).
double routing_crossover(double n_samples, const ArchConfig& cfg, const ScalingParams& p);

/// min(estimation_crossover, routing_crossover): the budget range where
/// the approximation term dominates.
double subcritical_range(double n_samples, const ArchConfig& cfg, const ScalingParams& p);

/// Sample size separating routing-dominated from power-law behavior:
/// R_route^((2b+d)/d).
double n_threshold(const ArchConfig& cfg, const ScalingParams& p);

/// Classifies n against n_threshold with a multiplicative margin >= 1.
Regime regime_classify(double n_samples, const ArchConfig& cfg, const ScalingParams& p,
                       double margin = 2.0);

struct SampleComplexity {
    double n_samples = 0.0;
    double n_act = 0.0;
};

/// Resources needed for target error eps in (0,1). Power-law regime:
/// n = eps^(-(2b+d)/b), N = eps^(-d/b). Routing regime: n = R_route/eps
/// with the same N target.
SampleComplexity sample_complexity(double eps, const ScalingParams& p, const ArchConfig& cfg,
                                   Regime regime);

/// Bound increase from growing the pool M1 -> M2 at fixed k:
/// (blocks*seq_len*k/n) * ln(M2/M1).
double m_effect_delta(std::uint32_t active_k, std::uint32_t m1, std::uint32_t m2, double n_samples,
                      std::uint32_t blocks, std::uint32_t seq_len);

/// True when ln(e*M/k) * margin <= N_act / (blocks*seq_len*k), i.e. the
/// routing term is dominated by the estimation term with room to spare.
bool routing_negligible(const ArchConfig& cfg, const ParamCounts& counts, double margin);

}  // namespace moesl
