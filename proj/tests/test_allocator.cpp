// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "moesl/allocator.hpp"
#include "moesl/fitting.hpp"
#include "moesl/rng.hpp"

using namespace moesl;

namespace {

KObjectiveParams worked_params() {
    KObjectiveParams p;
    p.expert_budget = 100.0;
    p.n_samples = 1e6;
    p.blocks = 2;
    p.seq_len = 128;
    p.experts = 64;
    p.scaling = {1.0, 8.0};
    return p;
}

KObjectiveParams draw_params(Rng& rng) {
    KObjectiveParams p;
    p.scaling.beta = rng.uniform(0.5, 3.0);
    p.scaling.intrinsic_dim = rng.uniform(2.0, 64.0);
    p.experts = 2 + static_cast<std::uint32_t>(rng.below(1023));
    p.n_samples = std::pow(10.0, rng.uniform(3.0, 9.0));
    p.expert_budget = std::pow(10.0, rng.uniform(1.0, 5.0));
    p.blocks = 1 + static_cast<std::uint32_t>(rng.below(8));
    p.seq_len = 1u << (4 + rng.below(7));
    return p;
}

}  // namespace

TEST_CASE("k objective values") {
    KObjectiveParams p = worked_params();
    SUBCASE("worked example") {
        double v = k_objective(4.0, p);
        double expected = std::pow(400.0, -0.25) + 4e-4 +
                          2.0 * 128 * 4 * (1.0 + std::log(16.0)) / 1e6;
        CHECK(v == doctest::Approx(expected).epsilon(1e-12));
        CHECK(v == doctest::Approx(0.227871).epsilon(1e-5));
    }
    SUBCASE("at k = M the log factor collapses to 1") {
        double v = k_objective(64.0, p);
        double approx = std::pow(6400.0, -0.25);
        double est = 6400.0 / 1e6;
        double route = 2.0 * 128 * 64 / 1e6;  // ln(e) == 1
        CHECK(v == doctest::Approx(approx + est + route).epsilon(1e-12));
    }
    SUBCASE("domain") {
        CHECK_THROWS_AS(k_objective(0.5, p), std::domain_error);
        CHECK_THROWS_AS(k_objective(65.0, p), std::domain_error);
    }
}

TEST_CASE("fixed point solver") {
    SUBCASE("huge n caps at the pool size") {
        KObjectiveParams p = worked_params();
        p.n_samples = 1e15;
        KSolution sol = optimal_k_fixed_point(p);
        CHECK(sol.capped);
        CHECK(sol.k_star == 64);
        CHECK(sol.converged);
    }
    SUBCASE("worked example agrees with the grid oracle") {
        KSolution sol = optimal_k_fixed_point(worked_params());
        std::uint32_t grid = optimal_k_grid(worked_params());
        CHECK(std::llabs(static_cast<long long>(sol.k_star) - static_cast<long long>(grid)) <= 1);
        CHECK(sol.converged);
        CHECK(sol.lower <= sol.upper + 1e-12);
    }
    SUBCASE("iterates stay in range and residual honors tol") {
        Rng rng(99);
        for (int i = 0; i < 40; ++i) {
            KObjectiveParams p = draw_params(rng);
            KSolution sol = optimal_k_fixed_point(p, 1e-10, 300);
            CHECK(sol.k_continuous >= 1.0);
            CHECK(sol.k_continuous <= static_cast<double>(p.experts));
            CHECK(sol.k_star >= 1);
            CHECK(sol.k_star <= p.experts);
        }
    }
}

TEST_CASE("grid argmin endpoints") {
    KObjectiveParams p = worked_params();
    p.n_samples = 1e15;  // estimation negligible: objective decreasing
    CHECK(optimal_k_grid(p) == 64);
    p.n_samples = 1.0;
    p.expert_budget = 1e5;  // estimation dominates: increasing
    CHECK(optimal_k_grid(p) == 1);
}

TEST_CASE("oracle sweep: fixed point tracks the grid argmin") {
    Rng rng(123);
    int agree = 0, total = 200;
    for (int i = 0; i < total; ++i) {
        KObjectiveParams p = draw_params(rng);
        KSolution sol = optimal_k_fixed_point(p);
        std::uint32_t grid = optimal_k_grid(p);
        if (std::llabs(static_cast<long long>(sol.k_star) - static_cast<long long>(grid)) <= 1)
            ++agree;
        Sandwich foc = k_sandwich_foc(p);
        CHECK(static_cast<double>(grid) >= foc.lower / 2.0);
        CHECK(static_cast<double>(grid) <= 2.0 * foc.upper);
    }
    CHECK(agree >= 190);
}

TEST_CASE("sandwich algebra") {
    KObjectiveParams p = worked_params();
    SUBCASE("M = 1 collapses the sandwich") {
        KObjectiveParams q = p;
        q.experts = 1;
        Sandwich s = k_sandwich(q);
        CHECK(s.lower == doctest::Approx(s.upper).epsilon(1e-12));
    }
    SUBCASE("upper/lower ratio identity (unclamped regime)") {
        KObjectiveParams q = p;
        q.n_samples = 5e3;  // keep both bounds interior
        Sandwich s = k_sandwich(q);
        double lt_ell = static_cast<double>(q.blocks) * q.seq_len;
        double expo = q.scaling.intrinsic_dim / (2.0 * q.scaling.beta + q.scaling.intrinsic_dim);
        double ratio = std::pow(1.0 + lt_ell * std::log(64.0) / q.expert_budget, expo);
        CHECK(s.upper / s.lower == doctest::Approx(ratio).epsilon(1e-9));
    }
}

TEST_CASE("compute-optimal closed form") {
    SUBCASE("forced symmetric case") {
        ScalingParams p{2.0, 2.0};  // beta == d
        ComputeAllocation a = compute_optimal(1e8, 1.0, 1.0, p);
        CHECK(a.n_act_star == doctest::Approx(100.0).epsilon(1e-12));
        CHECK(a.n_samples_star == doctest::Approx(1e6).epsilon(1e-12));
        CHECK(a.error_at_opt == doctest::Approx(2.0 * std::pow(1e8, -0.5)).epsilon(1e-12));
    }
    SUBCASE("budget identity and stationarity") {
        Rng rng(5);
        for (int i = 0; i < 50; ++i) {
            ScalingParams p{rng.uniform(0.5, 3.0), rng.uniform(2.0, 64.0)};
            double c = std::pow(10.0, rng.uniform(6.0, 14.0));
            double a_coef = std::pow(10.0, rng.uniform(-2.0, 2.0));
            double b_coef = std::pow(10.0, rng.uniform(-2.0, 2.0));
            ComputeAllocation a = compute_optimal(c, a_coef, b_coef, p);
            CHECK(a.n_act_star * a.n_samples_star == doctest::Approx(c).epsilon(1e-9));
            // |phi'(N*)| <= 1e-6 * phi(N*)/N*
            double b = p.beta, d = p.intrinsic_dim;
            double deriv = -2.0 * b / d * a_coef * std::pow(a.n_act_star, -2.0 * b / d - 1.0) +
                           2.0 * b_coef * a.n_act_star / c;
            CHECK(std::fabs(deriv) <= 1e-6 * a.error_at_opt / a.n_act_star);
        }
    }
    SUBCASE("error-versus-compute slope recovers the compute exponent") {
        ScalingParams p{1.0, 32.0};
        std::vector<double> lx, ly;
        for (double e = 6.0; e <= 14.0; e += 1.0) {
            ComputeAllocation a = compute_optimal(std::pow(10.0, e), 1.0, 1.0, p);
            lx.push_back(std::log(a.budget));
            ly.push_back(std::log(a.error_at_opt));
        }
        LinearFit fit = linear_fit(lx, ly);
        CHECK(std::fabs(fit.slope + p.beta / (p.beta + p.intrinsic_dim)) <= 1e-3);
    }
}

TEST_CASE("compute-optimal grid oracle") {
    SUBCASE("agreement with the closed form") {
        Rng rng(17);
        for (int i = 0; i < 25; ++i) {
            ScalingParams p{rng.uniform(0.5, 3.0), rng.uniform(2.0, 64.0)};
            double c = std::pow(10.0, rng.uniform(6.0, 14.0));
            double a_coef = std::pow(10.0, rng.uniform(-2.0, 2.0));
            double b_coef = std::pow(10.0, rng.uniform(-2.0, 2.0));
            ComputeAllocation a = compute_optimal(c, a_coef, b_coef, p);
            double g = compute_optimal_grid(c, a_coef, b_coef, p);
            CHECK(std::fabs(g - a.n_act_star) / a.n_act_star < 0.02);
        }
    }
    SUBCASE("doubling the budget scales the minimizer") {
        ScalingParams p{1.0, 8.0};
        double g1 = compute_optimal_grid(1e9, 1.0, 1.0, p, 800);
        double g2 = compute_optimal_grid(2e9, 1.0, 1.0, p, 800);
        double factor = std::pow(2.0, p.intrinsic_dim / (2.0 * p.beta + 2.0 * p.intrinsic_dim));
        CHECK(g2 / g1 == doctest::Approx(factor).epsilon(0.01));
    }
    SUBCASE("grid size precondition") {
        CHECK_THROWS_AS(compute_optimal_grid(1e9, 1.0, 1.0, {1.0, 8.0}, 50),
                        std::invalid_argument);
    }
}
