// SPDX-License-Identifier: Apache-2.0
#include "moesl/allocator.hpp"

#include <cmath>
#include <functional>

namespace moesl {

namespace {

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

double k_objective(double k, const KObjectiveParams& p) {
    p.validate();
    double m = static_cast<double>(p.experts);
    if (!(k >= 1.0 && k <= m)) throw std::domain_error("k_objective: k must lie in [1, M]");
    double two_beta_over_d = 2.0 * p.scaling.beta / p.scaling.intrinsic_dim;
    double approx = std::pow(p.expert_budget * k, -two_beta_over_d);
    double est = p.expert_budget * k / p.n_samples;
    double route = static_cast<double>(p.blocks) * p.seq_len * k * (1.0 + std::log(m / k)) /
                   p.n_samples;
    return approx + est + route;
}

KSolution optimal_k_fixed_point(const KObjectiveParams& p, double tol, std::uint32_t max_iter) {
    p.validate();
    if (!(tol > 0.0)) throw std::invalid_argument("optimal_k_fixed_point: tol must be positive");

    double a = p.expert_budget;
    double m = static_cast<double>(p.experts);
    double lt_ell = static_cast<double>(p.blocks) * p.seq_len;
    double two_beta_over_d = 2.0 * p.scaling.beta / p.scaling.intrinsic_dim;
    double expo = p.scaling.intrinsic_dim / (2.0 * p.scaling.beta + p.scaling.intrinsic_dim);

    KSolution sol;
    double unclamped = 0.0;
    auto iterate = [&](double start) {
        double k = start;
        double prev_delta = 0.0;
        std::uint32_t flips = 0;
        sol.converged = false;
        for (std::uint32_t t = 0; t < max_iter; ++t) {
            double denom = a + lt_ell * std::log(m / k);  // ln(eM/k) - 1 == ln(M/k)
            if (denom < a * 1e-6) {
                denom = a * 1e-6;
                sol.denominator_clamped = true;
            }
            unclamped = std::pow(
                two_beta_over_d * std::pow(a, -two_beta_over_d) * p.n_samples / denom, expo);
            double next = clamp(unclamped, 1.0, m);
            double delta = next - k;
            if (delta * prev_delta < 0.0 && ++flips >= 2) next = 0.5 * (next + k);
            sol.iterations += 1;
            if (std::fabs(next - k) < tol) {
                sol.converged = true;
                return next;
            }
            prev_delta = next - k;
            k = next;
        }
        return k;
    };

    double k = iterate(clamp(std::pow(p.n_samples / a, expo), 1.0, m));
    bool first_capped = unclamped > m;
    // the first-order condition can have several roots (the log term makes
    // the objective bimodal for shallow exponents); a run that ends on a
    // boundary may be sitting in the wrong basin, so probe from the other
    // end and keep the fixed point whose rounded objective is smaller
    if (m > 1.0 && (k >= m - tol || k <= 1.0 + tol)) {
        bool conv_first = sol.converged;
        double alt = iterate(k >= m - tol ? 1.0 : m);
        bool alt_capped = unclamped > m;
        auto rounded_value = [&](double kc) {
            double lo = clamp(std::floor(kc), 1.0, m);
            double hi = clamp(std::ceil(kc), 1.0, m);
            return std::min(k_objective(lo, p), k_objective(hi, p));
        };
        if (rounded_value(alt) < rounded_value(k)) {
            k = alt;
            first_capped = alt_capped;
        } else {
            sol.converged = conv_first;
        }
    }
    sol.k_continuous = k;
    sol.capped = first_capped;

    double lo = clamp(std::floor(k), 1.0, m);
    double hi = clamp(std::ceil(k), 1.0, m);
    sol.k_star = static_cast<std::uint32_t>(
        k_objective(lo, p) <= k_objective(hi, p) ? lo : hi);

    Sandwich s = k_sandwich(p);
    sol.lower = s.lower;
    sol.upper = s.upper;
    return sol;
}

std::uint32_t optimal_k_grid(const KObjectiveParams& p) {
    p.validate();
    if (p.experts > 10'000'000)
        throw std::invalid_argument("optimal_k_grid: pool too large for exhaustive scan");
    std::uint32_t best_k = 1;
    double best = k_objective(1.0, p);
    for (std::uint32_t k = 2; k <= p.experts; ++k) {
        double v = k_objective(static_cast<double>(k), p);
        if (v < best) {
            best = v;
            best_k = k;
        }
    }
    return best_k;
}

Sandwich k_sandwich(const KObjectiveParams& p) {
    p.validate();
    double m = static_cast<double>(p.experts);
    double lt_ell = static_cast<double>(p.blocks) * p.seq_len;
    double expo = p.scaling.intrinsic_dim / (2.0 * p.scaling.beta + p.scaling.intrinsic_dim);
    Sandwich s;
    s.lower = clamp(std::pow(p.n_samples / (p.expert_budget + lt_ell * std::log(m)), expo), 1.0, m);
    s.upper = clamp(std::pow(p.n_samples / p.expert_budget, expo), 1.0, m);
    return s;
}

Sandwich k_sandwich_foc(const KObjectiveParams& p) {
    p.validate();
    double m = static_cast<double>(p.experts);
    double lt_ell = static_cast<double>(p.blocks) * p.seq_len;
    double two_beta_over_d = 2.0 * p.scaling.beta / p.scaling.intrinsic_dim;
    double expo = p.scaling.intrinsic_dim / (2.0 * p.scaling.beta + p.scaling.intrinsic_dim);
    double pref = std::pow(two_beta_over_d * std::pow(p.expert_budget, -two_beta_over_d), expo);
    Sandwich s;
    s.lower = clamp(
        pref * std::pow(p.n_samples / (p.expert_budget + lt_ell * std::log(m)), expo), 1.0, m);
    s.upper = clamp(pref * std::pow(p.n_samples / p.expert_budget, expo), 1.0, m);
    return s;
}

ComputeAllocation compute_optimal(double budget, double a_coef, double b_coef,
                                  const ScalingParams& p) {
    p.validate();
    if (!(budget > 0.0 && a_coef > 0.0 && b_coef > 0.0))
        throw std::invalid_argument("compute_optimal: budget and coefficients must be positive");
    double b = p.beta, d = p.intrinsic_dim;
    ComputeAllocation out;
    out.budget = budget;
    out.n_act_star = std::pow(b / d * (a_coef / b_coef) * budget, d / (2.0 * b + 2.0 * d));
    out.n_samples_star = budget / out.n_act_star;
    out.error_at_opt = a_coef * std::pow(out.n_act_star, -2.0 * b / d) +
                       b_coef * out.n_act_star * out.n_act_star / budget;
    return out;
}

double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                          std::uint32_t iters) {
    const double inv_phi = 0.6180339887498948482;
    double a = lo, b = hi;
    double c1 = b - inv_phi * (b - a), c2 = a + inv_phi * (b - a);
    double f1 = f(c1), f2 = f(c2);
    for (std::uint32_t i = 0; i < iters && (b - a) > 1e-15 * (std::fabs(a) + std::fabs(b)); ++i) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - inv_phi * (b - a);
            f1 = f(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + inv_phi * (b - a);
            f2 = f(c2);
        }
    }
    return 0.5 * (a + b);
}

double compute_optimal_grid(double budget, double a_coef, double b_coef, const ScalingParams& p,
                            std::uint32_t grid_points) {
    p.validate();
    if (grid_points < 100)
        throw std::invalid_argument("compute_optimal_grid: need at least 100 grid points");
    if (!(budget > 1.0)) throw std::invalid_argument("compute_optimal_grid: budget must exceed 1");
    double b = p.beta, d = p.intrinsic_dim;
    auto phi = [&](double log_n) {
        double n = std::exp(log_n);
        return a_coef * std::pow(n, -2.0 * b / d) + b_coef * n * n / budget;
    };
    double log_hi = std::log(budget);
    double best = 0.0, best_val = phi(0.0);
    std::size_t best_i = 0;
    for (std::uint32_t i = 1; i < grid_points; ++i) {
        double x = log_hi * i / (grid_points - 1);
        double v = phi(x);
        if (v < best_val) {
            best_val = v;
            best = x;
            best_i = i;
        }
    }
    double cell = log_hi / (grid_points - 1);
    double lo = best_i == 0 ? 0.0 : best - cell;
    double hi = best + cell > log_hi ? log_hi : best + cell;
    return std::exp(golden_section_min(phi, lo, hi));
}

}  // namespace moesl
