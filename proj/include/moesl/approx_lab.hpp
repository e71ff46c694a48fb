// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace moesl {

/// One-dimensional test manifolds with an isometric intrinsic
/// parameterization: a closed interval, or a unit circle parameterized by
/// arc length (circumference 2*pi). Intrinsic distance is |x - y| on the
/// interval and arc distance on the circle. The ambient embedding is
/// orthogonal and never enters the computations, which work purely in
/// intrinsic coordinates.
struct ManifoldSpec {
    enum class Kind { interval, circle } kind = Kind::interval;
    double a = 0.0, b = 1.0;         // interval endpoints (kind == interval)
    std::uint32_t ambient_dim = 2;   // D, informational

    double diameter() const;
    double distance(double x, double y) const;
    /// Signed offset from center to x, wrapped on the circle.
    double signed_offset(double center, double x) const;
    /// Uniform evaluation grid in intrinsic coordinates.
    std::vector<double> grid(std::size_t points) const;
};

/// Chart centers with radius rho. Built so that centers are at least
/// rho/2 separated, every point is within rho/2 of a center, and no point
/// lies in more than 3 charts (d = 1).
struct Cover {
    ManifoldSpec manifold;
    std::vector<double> centers;
    double radius = 0.0;       // rho
    std::uint32_t overlap_bound = 0;  // s0, measured on a dense grid
};

Cover build_cover(const ManifoldSpec& manifold, double rho);

/// Quintic plateau profile: 1 on [0, 1/2], 0 on [1, inf), and the unique
/// quintic in between matching value and first two derivatives at both
/// ends.
double bump_profile(double t);

struct PartitionOfUnity {
    Cover cover;
};

PartitionOfUnity make_partition(const Cover& cover);

struct SparseWeight {
    std::uint32_t chart = 0;
    double weight = 0.0;
};

/// Normalized chart weights at x: nonnegative, summing to one, at most
/// overlap_bound of them nonzero. The unnormalized sum is asserted >= 1,
/// which the cover construction guarantees.
std::vector<SparseWeight> pou_weights(double x, const PartitionOfUnity& pou);

struct PouAudit {
    double max_sum_deviation = 0.0;  // max |sum - 1| over the grid
    std::uint32_t max_support = 0;   // max nonzero weights at a point
    double max_gradient = 0.0;       // max |d/dx phi| by central differences
    double min_unnormalized_sum = 0.0;
};

PouAudit audit_partition(const PartitionOfUnity& pou, std::size_t grid_points);

/// Scalar target with analytic derivatives of every order used.
struct TargetFunction {
    std::function<double(double)> value;
    std::function<double(double, std::uint32_t)> derivative;  // order q >= 0
};

TargetFunction target_sin3();    // sin(3x)
TargetFunction target_square();  // x^2
TargetFunction target_exp();     // e^x
TargetFunction target_linear(double slope, double offset);
TargetFunction target_const(double c);

/// Local polynomial model on one chart, coefficients in the chart's
/// signed offset coordinate.
struct LocalExpert {
    std::uint32_t chart = 0;
    std::vector<double> coeffs;  // c0 + c1 z + ... + cs z^s

    double eval(double z) const;
};

/// Degree of the local models for smoothness beta: the largest integer
/// strictly below beta, except that integer beta uses beta - 1 (Lipschitz
/// top derivative).
std::uint32_t taylor_degree(double beta);

/// Taylor coefficients of f at the chart center up to the given degree.
LocalExpert taylor_expert(const TargetFunction& f, const Cover& cover, std::uint32_t chart,
                          std::uint32_t degree);

/// A k-sparse mixture of local polynomial experts over a partition of
/// unity; the top-k weights are renormalized to sum to one.
struct SparseApproximator {
    PartitionOfUnity pou;
    std::vector<LocalExpert> experts;
    std::uint32_t active_k = 0;

    double eval(double x) const;
};

struct ConstructionResult {
    SparseApproximator approximator;
    double sup_error = 0.0;  // max |T - f| over the evaluation grid
    double rho = 0.0;
    std::size_t charts = 0;
};

/// Builds a cover with target_charts centers (+-1, radius found by
/// bisection), fits one local expert per chart at degree(beta), and
/// measures the sup error of the k-sparse mixture on a grid.
/// Requires k >= the cover's measured overlap bound.
ConstructionResult build_sparse_approximator(const TargetFunction& f, const ManifoldSpec& manifold,
                                             std::size_t target_charts, std::uint32_t active_k,
                                             double beta, std::size_t grid_points = 10000);

struct RatePoint {
    std::size_t charts = 0;
    double rho = 0.0;
    double sup_error = 0.0;
};

struct RateResult {
    std::vector<RatePoint> points;
    double slope = 0.0;        // OLS slope of ln sup_error on ln charts
    double r_squared = 0.0;
    bool degenerate = false;   // some errors were ~0 and excluded
};

/// Error-vs-expert-count sweep; the slope estimates -beta/d.
RateResult rate_experiment(const TargetFunction& f, const ManifoldSpec& manifold, double beta,
                           const std::vector<std::size_t>& chart_counts,
                           std::uint32_t active_k = 3, std::size_t grid_points = 10000);

/// One global polynomial model of increasing degree on an interval
/// (single expert, k = 1): sup errors per degree, for monotone-improvement
/// checks.
std::vector<double> global_expert_errors(const TargetFunction& f, const ManifoldSpec& interval,
                                         const std::vector<std::uint32_t>& degrees,
                                         std::size_t grid_points = 10000);

}  // namespace moesl
