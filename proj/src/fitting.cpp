// SPDX-License-Identifier: Apache-2.0
#include "moesl/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "moesl/allocator.hpp"

namespace moesl {

void LossCurve::validate() const {
    if (x.size() != loss.size()) throw std::invalid_argument("LossCurve: length mismatch");
    if (x.size() < 4) throw std::invalid_argument("LossCurve: need at least 4 points");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !std::isfinite(x[i]))
            throw std::invalid_argument("LossCurve: x must be positive and finite");
        if (!(loss[i] > 0.0) || !std::isfinite(loss[i]))
            throw std::invalid_argument("LossCurve: loss must be positive and finite");
        if (i > 0 && !(x[i] > x[i - 1]))
            throw std::invalid_argument("LossCurve: x must be strictly increasing");
    }
}

double LossCurve::min_loss() const { return *std::min_element(loss.begin(), loss.end()); }

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need at least two paired points");
    double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("linear_fit: x values are rank-deficient");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

namespace {

struct ProfileFit {
    double slope, intercept, rss;
};

ProfileFit profile_at_floor(const LossCurve& c, double floor) {
    std::vector<double> lx(c.size()), ly(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        lx[i] = std::log(c.x[i]);
        ly[i] = std::log(c.loss[i] - floor);
    }
    LinearFit f = linear_fit(lx, ly);
    double rss = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double r = ly[i] - (f.intercept + f.slope * lx[i]);
        rss += r * r;
    }
    return {f.slope, f.intercept, rss};
}

}  // namespace

FitResult fit_power_law(const LossCurve& curve, FloorMode mode, double fixed_floor) {
    curve.validate();
    double lo = curve.min_loss();

    double floor = fixed_floor;
    if (mode == FloorMode::fixed) {
        if (!(fixed_floor >= 0.0) || fixed_floor >= lo)
            throw std::domain_error("fit_power_law: fixed floor must lie in [0, min loss)");
    } else {
        double hi = *std::max_element(curve.loss.begin(), curve.loss.end());
        if (hi - lo <= 1e-12 * hi)
            throw std::domain_error("fit_power_law: floor absorbs all variation (constant curve)");
        // 200 candidates in [0, min_loss*(1-1e-4)], parameterized by the gap
        // min_loss - c on a log scale so the grid is dense where the profile
        // minimum can be narrow (floor close to the smallest loss)
        std::vector<double> cands;
        cands.push_back(0.0);
        for (int i = 0; i < 199; ++i) {
            double gap = lo * std::pow(1e-4 / 1.0, static_cast<double>(i) / 198.0);
            cands.push_back(lo - gap);
        }
        double best_rss = std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            double rss = profile_at_floor(curve, cands[i]).rss;
            if (rss < best_rss) {
                best_rss = rss;
                best_i = i;
            }
        }
        double a = best_i == 0 ? 0.0 : cands[best_i - 1];
        double b = best_i + 1 < cands.size() ? cands[best_i + 1] : cands.back();
        floor = golden_section_min([&](double c) { return profile_at_floor(curve, c).rss; }, a, b,
                                   300);
        if (profile_at_floor(curve, cands[best_i]).rss < profile_at_floor(curve, floor).rss)
            floor = cands[best_i];
    }

    ProfileFit pf = profile_at_floor(curve, floor);
    std::vector<double> lx(curve.size()), ly(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        lx[i] = std::log(curve.x[i]);
        ly[i] = std::log(curve.loss[i] - floor);
    }
    FitResult out;
    out.exponent = -pf.slope;
    out.floor = floor;
    out.log_prefactor = pf.intercept;
    out.r_squared = linear_fit(lx, ly).r_squared;
    out.n_points = curve.size();
    return out;
}

ConsistencyResult consistency_check(double alpha_N, double alpha_D) {
    if (!(alpha_N > 0.0) || !(alpha_D > 0.0))
        throw std::invalid_argument("consistency_check: exponents must be positive");
    ConsistencyResult out;
    out.pred_D = alpha_N / (1.0 + alpha_N);
    out.r_D = alpha_D - out.pred_D;
    out.rel_err_D = out.r_D / out.pred_D;
    return out;
}

double compute_exponent(double alpha_N, double alpha_D) {
    if (!(alpha_N > 0.0) || !(alpha_D > 0.0))
        throw std::invalid_argument("compute_exponent: exponents must be positive");
    return alpha_N * alpha_D / (alpha_N + alpha_D);
}

namespace {

// The published table prints derived cells at 4 decimals, floored; its
// summary statistics are means over those printed cells.
double floor4(double v) { return std::floor(v * 1e4) / 1e4; }

PerExpertSummary summarize(const std::vector<PerExpertRow>& rows, bool quantized) {
    PerExpertSummary s;
    for (const auto& r : rows) {
        double rd = quantized ? floor4(std::fabs(r.r_D)) : std::fabs(r.r_D);
        double rc = quantized ? floor4(std::fabs(r.r_C)) : std::fabs(r.r_C);
        double red = quantized ? floor4(std::fabs(r.rel_err_D)) : std::fabs(r.rel_err_D);
        double rec = quantized ? floor4(std::fabs(r.rel_err_C)) : std::fabs(r.rel_err_C);
        s.mae_r_D += rd;
        s.mae_r_C += rc;
        s.mape_r_D += red;
        s.mape_r_C += rec;
    }
    double n = static_cast<double>(rows.size());
    s.mae_r_D /= n;
    s.mae_r_C /= n;
    s.mape_r_D *= 100.0 / n;
    s.mape_r_C *= 100.0 / n;
    return s;
}

}  // namespace

PerExpertTable per_expert_table(
    const std::vector<std::tuple<std::uint32_t, double, double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("per_expert_table: no rows");
    PerExpertTable out;
    for (const auto& [e, mu, nu] : rows) {
        if (!(mu < 0.0) || !(nu < 0.0))
            throw std::domain_error("per_expert_table: mu and nu must be negative");
        PerExpertRow r;
        r.experts = e;
        r.mu = mu;
        r.nu = nu;
        r.alpha_N = -mu;
        r.alpha_D = -nu;
        r.alpha_C = compute_exponent(r.alpha_N, r.alpha_D);
        r.alpha_D_pred = r.alpha_N / (1.0 + r.alpha_N);
        r.alpha_C_pred = r.alpha_N / (2.0 + r.alpha_N);
        r.r_D = r.alpha_D - r.alpha_D_pred;
        r.r_C = r.alpha_C - r.alpha_C_pred;
        r.rel_err_D = r.r_D / r.alpha_D_pred;
        r.rel_err_C = r.r_C / r.alpha_C_pred;
        out.rows.push_back(r);
    }
    out.summary = summarize(out.rows, true);
    out.summary_full_precision = summarize(out.rows, false);
    return out;
}

AmplificationFit amplification_fit(const std::vector<std::pair<std::uint32_t, double>>& rows) {
    if (rows.size() < 2) throw std::invalid_argument("amplification_fit: need at least 2 rows");
    std::vector<double> x, y;
    for (const auto& [e, kappa] : rows) {
        if (e == 0) throw std::invalid_argument("amplification_fit: E must be positive");
        if (!(kappa > 0.0)) throw std::invalid_argument("amplification_fit: kappa must be positive");
        x.push_back(std::log(static_cast<double>(e)));
        y.push_back(kappa);
    }
    bool distinct = false;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] != x[0]) distinct = true;
    if (!distinct)
        throw std::invalid_argument("amplification_fit: all E equal, design is rank-deficient");
    LinearFit f = linear_fit(x, y);
    return {f.intercept, f.slope, f.r_squared};
}

std::vector<std::pair<std::uint32_t, double>> kappa_from_rows(
    const std::vector<PerExpertRow>& rows) {
    std::vector<std::pair<std::uint32_t, double>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.emplace_back(r.experts, r.alpha_D / r.alpha_D_pred);
    return out;
}

}  // namespace moesl
