// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

#include "moesl/bounds.hpp"

namespace moesl {

/// Parameters of the single-variable objective in k:
/// (A*k)^(-2b/d) + A*k/n + blocks*seq_len*k*ln(e*M/k)/n,
/// where A is the per-block expert budget times blocks.
struct KObjectiveParams {
    double expert_budget = 1.0;  // A = blocks * expert_params
    double n_samples = 1.0;      // n
    std::uint32_t blocks = 1;    // L_T
    std::uint32_t seq_len = 1;   // tokens per input
    std::uint32_t experts = 1;   // pool size M
    ScalingParams scaling;

    void validate() const {
        scaling.validate();
        if (!(expert_budget > 0.0))
            throw std::invalid_argument("KObjectiveParams: expert_budget must be positive");
        if (!(n_samples >= 1.0))
            throw std::invalid_argument("KObjectiveParams: n_samples must be >= 1");
        if (experts < 1 || blocks < 1 || seq_len < 1)
            throw std::invalid_argument("KObjectiveParams: counts must be >= 1");
    }
};

struct KSolution {
    std::uint32_t k_star = 1;     // integer minimizer candidate
    double k_continuous = 1.0;    // converged (clamped) fixed point
    std::uint32_t iterations = 0;
    double lower = 1.0;           // sandwich bounds, unit constants,
    double upper = 1.0;           // clamped to [1, M]
    bool capped = false;          // continuous solution exceeded M
    bool converged = true;
    bool denominator_clamped = false;
};

struct ComputeAllocation {
    double budget = 0.0;        // C
    double n_act_star = 0.0;    // optimal active budget
    double n_samples_star = 0.0;  // C / N*
    double error_at_opt = 0.0;  // A*N^(-2b/d) + B*N^2/C at N*
};

/// Objective value at a (possibly fractional) k in [1, M].
double k_objective(double k, const KObjectiveParams& p);

/// Fixed-point solve of the first-order condition, treating the slowly
/// varying log factor as frozen between iterates. Starts from the
/// no-routing optimum (n/A)^(d/(2b+d)), clamps iterates to [1, M], and
/// averages successive iterates if the update direction flips twice.
/// k_star is whichever of floor/ceil of the fixed point scores lower.
KSolution optimal_k_fixed_point(const KObjectiveParams& p, double tol = 1e-10,
                                std::uint32_t max_iter = 200);

/// Brute-force integer argmin over [1, M]; ties go to the smaller k.
std::uint32_t optimal_k_grid(const KObjectiveParams& p);

struct Sandwich {
    double lower = 1.0;
    double upper = 1.0;
};

/// Unit-constant sandwich, clamped to [1, M]:
/// lower = (n/(A + blocks*seq_len*ln M))^(d/(2b+d)), upper = (n/A)^(same).
Sandwich k_sandwich(const KObjectiveParams& p);

/// Sandwich carrying the first-order-condition prefactor
/// ((2b/d) * A^(-2b/d))^(d/(2b+d)); with it the continuous optimizer lies
/// between the bounds exactly, so the integer argmin is inside the
/// factor-2 expansion.
Sandwich k_sandwich_foc(const KObjectiveParams& p);

/// Closed-form compute-optimal split of C into (N_act, n):
/// N* = ((b/d)*(A/B)*C)^(d/(2b+2d)), n* = C/N*.
ComputeAllocation compute_optimal(double budget, double a_coef, double b_coef,
                                  const ScalingParams& p);

/// Grid + golden-section oracle for the same objective. grid_points >= 100.
double compute_optimal_grid(double budget, double a_coef, double b_coef, const ScalingParams& p,
                            std::uint32_t grid_points = 400);

/// Golden-section minimum of a unimodal function on [lo, hi].
double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                          std::uint32_t iters = 200);

}  // namespace moesl
