// SPDX-License-Identifier: Apache-2.0
#include "moesl/approx_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include "moesl/fitting.hpp"

namespace moesl {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double ManifoldSpec::diameter() const {
    if (kind == Kind::interval) {
        if (!(b > a)) throw std::invalid_argument("ManifoldSpec: interval requires b > a");
        return b - a;
    }
    return kTwoPi / 2.0;  // max arc distance on the unit circle
}

double ManifoldSpec::distance(double x, double y) const {
    if (kind == Kind::interval) return std::fabs(x - y);
    double d = std::fmod(std::fabs(x - y), kTwoPi);
    return std::min(d, kTwoPi - d);
}

double ManifoldSpec::signed_offset(double center, double x) const {
    if (kind == Kind::interval) return x - center;
    double d = std::fmod(x - center + 3.0 * kTwoPi, kTwoPi);
    return d > kTwoPi / 2.0 ? d - kTwoPi : d;
}

std::vector<double> ManifoldSpec::grid(std::size_t points) const {
    std::vector<double> out(points);
    if (kind == Kind::interval) {
        for (std::size_t i = 0; i < points; ++i)
            out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
    } else {
        for (std::size_t i = 0; i < points; ++i)
            out[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(points);
    }
    return out;
}

// Center spacing 0.8*rho keeps all three cover guarantees at once:
// separation (>= rho/2), covering radius <= rho/2 (so the unnormalized
// bump sum stays >= 1), and overlap <= 3 (spacing >= 2*rho/3 given at
// least five gaps).
Cover build_cover(const ManifoldSpec& manifold, double rho) {
    if (!(rho > 0.0) || rho >= manifold.diameter())
        throw std::invalid_argument("build_cover: rho must lie in (0, diameter)");
    Cover cov;
    cov.manifold = manifold;
    cov.radius = rho;
    double target = 0.8 * rho;
    if (manifold.kind == ManifoldSpec::Kind::interval) {
        double len = manifold.b - manifold.a;
        std::size_t gaps = static_cast<std::size_t>(std::ceil(len / target));
        if (gaps == 0) gaps = 1;
        // coarse covers: merging one gap keeps spacing >= rho/2 while the
        // covering radius stays <= rho/2
        if (gaps >= 2 && len / static_cast<double>(gaps) < rho / 2.0) --gaps;
        double s = len / static_cast<double>(gaps);
        for (std::size_t i = 0; i <= gaps; ++i)
            cov.centers.push_back(manifold.a + s * static_cast<double>(i));
    } else {
        std::size_t m = static_cast<std::size_t>(std::ceil(kTwoPi / target));
        if (m < 3) m = 3;
        double s = kTwoPi / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) cov.centers.push_back(s * static_cast<double>(i));
    }

    // verify separation and covering before handing the cover out
    for (std::size_t i = 0; i + 1 < cov.centers.size(); ++i) {
        double d = manifold.distance(cov.centers[i], cov.centers[i + 1]);
        if (d < rho / 2.0 - 1e-12)
            throw std::logic_error("build_cover: separation violated");
    }
    auto g = manifold.grid(2048);
    std::uint32_t max_overlap = 0;
    for (double x : g) {
        double nearest = manifold.diameter();
        std::uint32_t inside = 0;
        for (double c : cov.centers) {
            double d = manifold.distance(x, c);
            nearest = std::min(nearest, d);
            if (d < rho) ++inside;
        }
        if (nearest > rho / 2.0 + 1e-9) throw std::logic_error("build_cover: covering violated");
        max_overlap = std::max(max_overlap, inside);
    }
    cov.overlap_bound = max_overlap;
    return cov;
}

double bump_profile(double t) {
    if (t <= 0.5) return 1.0;
    if (t >= 1.0) return 0.0;
    double u = 2.0 * t - 1.0;  // in (0,1)
    double u3 = u * u * u;
    return 1.0 - (10.0 * u3 - 15.0 * u3 * u + 6.0 * u3 * u * u);
}

PartitionOfUnity make_partition(const Cover& cover) { return PartitionOfUnity{cover}; }

std::vector<SparseWeight> pou_weights(double x, const PartitionOfUnity& pou) {
    const Cover& cov = pou.cover;
    std::vector<SparseWeight> raw;
    double sum = 0.0;
    for (std::uint32_t i = 0; i < cov.centers.size(); ++i) {
        double psi = bump_profile(cov.manifold.distance(x, cov.centers[i]) / cov.radius);
        if (psi > 0.0) {
            raw.push_back({i, psi});
            sum += psi;
        }
    }
    if (!(sum >= 1.0 - 1e-9))
        throw std::logic_error("pou_weights: unnormalized sum below 1; cover is defective");
    for (auto& w : raw) w.weight /= sum;
    return raw;
}

PouAudit audit_partition(const PartitionOfUnity& pou, std::size_t grid_points) {
    PouAudit audit;
    audit.min_unnormalized_sum = std::numeric_limits<double>::infinity();
    const Cover& cov = pou.cover;
    auto grid = cov.manifold.grid(grid_points);
    double h = 1e-6 * cov.radius;
    for (double x : grid) {
        double sum = 0.0;
        std::uint32_t support = 0;
        for (double c : cov.centers) {
            double psi = bump_profile(cov.manifold.distance(x, c) / cov.radius);
            if (psi > 0.0) {
                ++support;
                sum += psi;
            }
        }
        audit.min_unnormalized_sum = std::min(audit.min_unnormalized_sum, sum);
        audit.max_support = std::max(audit.max_support, support);
        auto weights = pou_weights(x, pou);
        double total = 0.0;
        for (const auto& w : weights) total += w.weight;
        audit.max_sum_deviation = std::max(audit.max_sum_deviation, std::fabs(total - 1.0));

        // central-difference gradient of each active chart weight
        if (cov.manifold.kind == ManifoldSpec::Kind::interval &&
            (x - h < cov.manifold.a || x + h > cov.manifold.b))
            continue;
        auto wp = pou_weights(x + h, pou);
        auto wm = pou_weights(x - h, pou);
        auto value_of = [](const std::vector<SparseWeight>& ws, std::uint32_t chart) {
            for (const auto& w : ws)
                if (w.chart == chart) return w.weight;
            return 0.0;
        };
        for (const auto& w : weights) {
            double g = (value_of(wp, w.chart) - value_of(wm, w.chart)) / (2.0 * h);
            audit.max_gradient = std::max(audit.max_gradient, std::fabs(g));
        }
    }
    return audit;
}

TargetFunction target_sin3() {
    TargetFunction f;
    f.value = [](double x) { return std::sin(3.0 * x); };
    f.derivative = [](double x, std::uint32_t q) {
        double scale = std::pow(3.0, static_cast<double>(q));
        switch (q % 4) {
            case 0: return scale * std::sin(3.0 * x);
            case 1: return scale * std::cos(3.0 * x);
            case 2: return -scale * std::sin(3.0 * x);
            default: return -scale * std::cos(3.0 * x);
        }
    };
    return f;
}

TargetFunction target_square() {
    TargetFunction f;
    f.value = [](double x) { return x * x; };
    f.derivative = [](double x, std::uint32_t q) {
        if (q == 0) return x * x;
        if (q == 1) return 2.0 * x;
        if (q == 2) return 2.0;
        return 0.0;
    };
    return f;
}

TargetFunction target_exp() {
    TargetFunction f;
    f.value = [](double x) { return std::exp(x); };
    f.derivative = [](double x, std::uint32_t) { return std::exp(x); };
    return f;
}

TargetFunction target_linear(double slope, double offset) {
    TargetFunction f;
    f.value = [=](double x) { return slope * x + offset; };
    f.derivative = [=](double x, std::uint32_t q) {
        if (q == 0) return slope * x + offset;
        if (q == 1) return slope;
        return 0.0;
    };
    return f;
}

TargetFunction target_const(double c) {
    TargetFunction f;
    f.value = [=](double) { return c; };
    f.derivative = [=](double, std::uint32_t q) { return q == 0 ? c : 0.0; };
    return f;
}

double LocalExpert::eval(double z) const {
    double acc = 0.0;
    for (std::size_t q = coeffs.size(); q-- > 0;) acc = acc * z + coeffs[q];
    return acc;
}

std::uint32_t taylor_degree(double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("taylor_degree: beta must be positive");
    double c = std::ceil(beta);
    return static_cast<std::uint32_t>(c) - 1;
}

LocalExpert taylor_expert(const TargetFunction& f, const Cover& cover, std::uint32_t chart,
                          std::uint32_t degree) {
    if (chart >= cover.centers.size()) throw std::out_of_range("taylor_expert: bad chart index");
    LocalExpert e;
    e.chart = chart;
    double c = cover.centers[chart];
    double fact = 1.0;
    for (std::uint32_t q = 0; q <= degree; ++q) {
        if (q > 0) fact *= static_cast<double>(q);
        e.coeffs.push_back(f.derivative(c, q) / fact);
    }
    return e;
}

double SparseApproximator::eval(double x) const {
    auto weights = pou_weights(x, pou);
    std::sort(weights.begin(), weights.end(), [](const SparseWeight& a, const SparseWeight& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.chart < b.chart;  // deterministic tie-break
    });
    if (weights.size() > active_k) weights.resize(active_k);
    double z = 0.0;
    for (const auto& w : weights) z += w.weight;
    double acc = 0.0;
    for (const auto& w : weights) {
        double off = pou.cover.manifold.signed_offset(pou.cover.centers[w.chart], x);
        acc += (w.weight / z) * experts[w.chart].eval(off);
    }
    return acc;
}

namespace {

std::size_t cover_size_at(const ManifoldSpec& manifold, double rho) {
    return build_cover(manifold, rho).centers.size();
}

// Invert the monotone rho -> chart-count map by bisection, converging to
// the smallest radius that still yields the target count (tightest charts).
double rho_for_charts(const ManifoldSpec& manifold, std::size_t target) {
    double lo = manifold.diameter() * 1e-5;
    double hi = manifold.diameter() * 0.999;
    if (cover_size_at(manifold, hi) > target)
        throw std::invalid_argument("rho_for_charts: target chart count too small");
    for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (lo + hi);
        if (cover_size_at(manifold, mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

}  // namespace

ConstructionResult build_sparse_approximator(const TargetFunction& f, const ManifoldSpec& manifold,
                                             std::size_t target_charts, std::uint32_t active_k,
                                             double beta, std::size_t grid_points) {
    if (target_charts < 4)
        throw std::invalid_argument("build_sparse_approximator: need at least 4 charts");
    double rho = rho_for_charts(manifold, target_charts);
    Cover cov = build_cover(manifold, rho);
    if (std::llabs(static_cast<long long>(cov.centers.size()) -
                   static_cast<long long>(target_charts)) > 1)
        throw std::logic_error("build_sparse_approximator: chart count off by more than 1");
    if (active_k < cov.overlap_bound)
        throw std::invalid_argument(
            "build_sparse_approximator: k below the cover overlap bound (infeasible sparsity)");

    ConstructionResult out;
    out.rho = rho;
    out.charts = cov.centers.size();
    out.approximator.pou = make_partition(cov);
    out.approximator.active_k = active_k;
    std::uint32_t degree = taylor_degree(beta);
    for (std::uint32_t i = 0; i < cov.centers.size(); ++i)
        out.approximator.experts.push_back(taylor_expert(f, cov, i, degree));

    double sup = 0.0;
    for (double x : manifold.grid(grid_points))
        sup = std::max(sup, std::fabs(out.approximator.eval(x) - f.value(x)));
    out.sup_error = sup;
    return out;
}

RateResult rate_experiment(const TargetFunction& f, const ManifoldSpec& manifold, double beta,
                           const std::vector<std::size_t>& chart_counts, std::uint32_t active_k,
                           std::size_t grid_points) {
    if (chart_counts.size() < 4)
        throw std::invalid_argument("rate_experiment: need at least 4 chart counts");
    for (std::size_t i = 1; i < chart_counts.size(); ++i)
        if (chart_counts[i] <= chart_counts[i - 1])
            throw std::invalid_argument("rate_experiment: chart counts must increase");

    RateResult out;
    for (std::size_t m : chart_counts) {
        auto res = build_sparse_approximator(f, manifold, m, active_k, beta, grid_points);
        out.points.push_back({res.charts, res.rho, res.sup_error});
    }
    std::vector<double> lx, ly;
    for (const auto& p : out.points) {
        if (p.sup_error <= 1e-12) {
            out.degenerate = true;  // exactly representable target
            continue;
        }
        lx.push_back(std::log(static_cast<double>(p.charts)));
        ly.push_back(std::log(p.sup_error));
    }
    if (lx.size() >= 2) {
        LinearFit fit = linear_fit(lx, ly);
        out.slope = fit.slope;
        out.r_squared = fit.r_squared;
    } else {
        out.slope = std::numeric_limits<double>::quiet_NaN();
        out.degenerate = true;
    }
    return out;
}

std::vector<double> global_expert_errors(const TargetFunction& f, const ManifoldSpec& interval,
                                         const std::vector<std::uint32_t>& degrees,
                                         std::size_t grid_points) {
    if (interval.kind != ManifoldSpec::Kind::interval)
        throw std::invalid_argument("global_expert_errors: interval manifold required");
    double mid = 0.5 * (interval.a + interval.b);
    std::vector<double> out;
    for (std::uint32_t degree : degrees) {
        std::vector<double> coeffs;
        double fact = 1.0;
        for (std::uint32_t q = 0; q <= degree; ++q) {
            if (q > 0) fact *= static_cast<double>(q);
            coeffs.push_back(f.derivative(mid, q) / fact);
        }
        double sup = 0.0;
        for (double x : interval.grid(grid_points)) {
            double z = x - mid, acc = 0.0;
            for (std::size_t q = coeffs.size(); q-- > 0;) acc = acc * z + coeffs[q];
            sup = std::max(sup, std::fabs(acc - f.value(x)));
        }
        out.push_back(sup);
    }
    return out;
}

}  // namespace moesl
