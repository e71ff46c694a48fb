// SPDX-License-Identifier: Apache-2.0
#include "moesl/moe_forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "moesl/rng.hpp"

namespace moesl {

std::size_t MoEModel::expert_param_count() const {
    std::size_t d = cfg.emb_dim, w = cfg.ffn_width, depth = cfg.ffn_depth;
    std::size_t total = w * d + w;  // input layer
    for (std::size_t l = 1; l + 1 < depth; ++l) total += w * w + w;
    total += d * w + d;  // output layer
    return total;
}

std::size_t MoEModel::params_per_block() const {
    std::size_t d = cfg.emb_dim, dh = cfg.head_dim();
    std::size_t ln = 4 * d;  // two LayerNorms, gamma+beta each
    std::size_t attn = static_cast<std::size_t>(cfg.heads) * 3 * d * dh + d * d;
    std::size_t router = static_cast<std::size_t>(cfg.experts) * d;
    return ln + attn + router + static_cast<std::size_t>(cfg.experts) * expert_param_count();
}

std::size_t MoEModel::block_offset(std::uint32_t block) const {
    return static_cast<std::size_t>(block) * params_per_block();
}

std::size_t MoEModel::router_offset(std::uint32_t block) const {
    std::size_t d = cfg.emb_dim, dh = cfg.head_dim();
    return block_offset(block) + 2 * d +
           static_cast<std::size_t>(cfg.heads) * 3 * d * dh + d * d + 2 * d;
}

std::size_t MoEModel::expert_offset(std::uint32_t block, std::uint32_t expert) const {
    return router_offset(block) + static_cast<std::size_t>(cfg.experts) * cfg.emb_dim +
           static_cast<std::size_t>(expert) * expert_param_count();
}

void MoEModel::validate() const {
    cfg.validate();
    if (params.size() != static_cast<std::size_t>(cfg.blocks) * params_per_block())
        throw std::invalid_argument("MoEModel: parameter vector size mismatch");
    for (float v : params)
        if (std::fabs(static_cast<double>(v)) > cfg.weight_bound * (1.0 + 1e-6))
            throw std::invalid_argument("MoEModel: parameter exceeds weight bound");
}

MoEModel zero_model(const ArchConfig& cfg) {
    cfg.validate();
    MoEModel m;
    m.cfg = cfg;
    m.params.assign(static_cast<std::size_t>(cfg.blocks) * m.params_per_block(), 0.0f);
    return m;
}

MoEModel seeded_model(const ArchConfig& cfg, std::uint64_t seed, double scale) {
    MoEModel m = zero_model(cfg);
    Rng rng(seed);
    double span = scale * cfg.weight_bound;
    for (auto& p : m.params) p = static_cast<float>(rng.uniform(-span, span));
    return m;
}

namespace {

void layer_norm(const float* gamma, const float* beta, const double* x, double* out,
                std::size_t d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += x[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double c = x[i] - mean;
        var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t i = 0; i < d; ++i)
        out[i] = static_cast<double>(gamma[i]) * (x[i] - mean) * inv + static_cast<double>(beta[i]);
}

// y[r] = sum_c x[c] * W[c][r] for row-major W with shape [in][out]
void mat_vec_t(const float* w, const double* x, double* y, std::size_t in, std::size_t out) {
    std::fill(y, y + out, 0.0);
    for (std::size_t c = 0; c < in; ++c) {
        double xv = x[c];
        const float* row = w + c * out;
        for (std::size_t r = 0; r < out; ++r) y[r] += xv * static_cast<double>(row[r]);
    }
}

void expert_eval(const float* p, const double* z, double* out, std::size_t d, std::size_t w,
                 std::size_t depth) {
    std::vector<double> cur(z, z + d), next;
    std::size_t off = 0;
    for (std::size_t layer = 0; layer < depth; ++layer) {
        std::size_t in = layer == 0 ? d : w;
        std::size_t wid = layer + 1 == depth ? d : w;
        next.assign(wid, 0.0);
        for (std::size_t r = 0; r < wid; ++r) {
            double acc = static_cast<double>(p[off + in * wid + r]);  // bias
            for (std::size_t c = 0; c < in; ++c)
                acc += cur[c] * static_cast<double>(p[off + c * wid + r]);
            next[r] = layer + 1 == depth ? acc : std::max(acc, 0.0);  // linear output layer
        }
        off += in * wid + wid;
        cur.swap(next);
    }
    std::copy(cur.begin(), cur.end(), out);
}

void check_finite(const std::vector<double>& h, std::uint32_t block, std::size_t d) {
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!std::isfinite(h[i])) {
            std::ostringstream msg;
            msg << "forward: non-finite value at block " << block << ", token " << i / d;
            throw std::runtime_error(msg.str());
        }
    }
}

}  // namespace

std::vector<double> softmax_tau(const std::vector<double>& u, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("softmax_tau: tau must be positive");
    if (u.empty()) throw std::invalid_argument("softmax_tau: empty input");
    double mx = *std::max_element(u.begin(), u.end());
    std::vector<double> out(u.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        out[i] = std::exp((u[i] - mx) / tau);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

namespace {

// H + MHA(LN1(H)): the first residual half of a block.
std::vector<double> attention_half(const MoEModel& model, std::uint32_t block,
                                   const std::vector<double>& h) {
    const ArchConfig& cfg = model.cfg;
    std::size_t d = cfg.emb_dim, dh = cfg.head_dim(), ell = cfg.seq_len, m = cfg.heads;
    if (h.size() != ell * d) throw std::invalid_argument("forward: input shape mismatch");

    const float* base = model.params.data() + model.block_offset(block);
    const float* ln1_g = base;
    const float* ln1_b = base + d;
    const float* attn = base + 2 * d;
    const float* w_o = attn + m * 3 * d * dh;

    std::vector<double> normed(ell * d);
    for (std::size_t t = 0; t < ell; ++t)
        layer_norm(ln1_g, ln1_b, h.data() + t * d, normed.data() + t * d, d);

    std::vector<double> concat(ell * d, 0.0);
    std::vector<double> q(ell * dh), k(ell * dh), v(ell * dh);
    for (std::size_t head = 0; head < m; ++head) {
        const float* wq = attn + head * 3 * d * dh;
        const float* wk = wq + d * dh;
        const float* wv = wk + d * dh;
        for (std::size_t t = 0; t < ell; ++t) {
            mat_vec_t(wq, normed.data() + t * d, q.data() + t * dh, d, dh);
            mat_vec_t(wk, normed.data() + t * d, k.data() + t * dh, d, dh);
            mat_vec_t(wv, normed.data() + t * d, v.data() + t * dh, d, dh);
        }
        double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<double> scores(ell);
        for (std::size_t t = 0; t < ell; ++t) {
            for (std::size_t s = 0; s < ell; ++s) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c) acc += q[t * dh + c] * k[s * dh + c];
                scores[s] = acc * inv_sqrt;
            }
            std::vector<double> attn_w = softmax_tau(scores, 1.0);
            for (std::size_t s = 0; s < ell; ++s)
                for (std::size_t c = 0; c < dh; ++c)
                    concat[t * d + head * dh + c] += attn_w[s] * v[s * dh + c];
        }
    }
    std::vector<double> out(h);
    std::vector<double> proj(d);
    for (std::size_t t = 0; t < ell; ++t) {
        mat_vec_t(w_o, concat.data() + t * d, proj.data(), d, d);
        for (std::size_t c = 0; c < d; ++c) out[t * d + c] += proj[c];
    }
    return out;
}

// In-place second half: per token, route on LN2(h), add the gated top-k
// expert mixture to the residual stream. Optionally records the realized
// subsets and gates.
void expert_half(const MoEModel& model, std::uint32_t block, std::vector<double>& h,
                 std::vector<std::vector<std::uint32_t>>* subsets_out,
                 std::vector<std::vector<double>>* gates_out) {
    const ArchConfig& cfg = model.cfg;
    std::size_t d = cfg.emb_dim, ell = cfg.seq_len;
    const float* base = model.params.data() + model.block_offset(block);
    const float* ln2_g =
        base + 2 * d + static_cast<std::size_t>(cfg.heads) * 3 * d * cfg.head_dim() + d * d;
    const float* ln2_b = ln2_g + d;
    const float* router = model.params.data() + model.router_offset(block);

    std::vector<double> z(d), logits(cfg.experts), eout(d);
    for (std::size_t t = 0; t < ell; ++t) {
        layer_norm(ln2_g, ln2_b, h.data() + t * d, z.data(), d);
        for (std::uint32_t e = 0; e < cfg.experts; ++e) {
            double acc = 0.0;
            const float* row = router + static_cast<std::size_t>(e) * d;
            for (std::size_t c = 0; c < d; ++c) acc += static_cast<double>(row[c]) * z[c];
            logits[e] = acc;
        }
        std::vector<std::uint32_t> order(cfg.experts);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return logits[a] > logits[b];  // stable sort: ties keep the lower index
        });
        order.resize(cfg.active_k);
        std::sort(order.begin(), order.end());
        std::vector<double> sel(cfg.active_k);
        for (std::uint32_t i = 0; i < cfg.active_k; ++i) sel[i] = logits[order[i]];
        std::vector<double> gates = softmax_tau(sel, 1.0);
        double gate_sum = std::accumulate(gates.begin(), gates.end(), 0.0);
        if (std::fabs(gate_sum - 1.0) > 1e-9)
            throw std::logic_error("forward: gate weights do not sum to 1");
        for (std::uint32_t i = 0; i < cfg.active_k; ++i) {
            expert_eval(model.params.data() + model.expert_offset(block, order[i]), z.data(),
                        eout.data(), d, cfg.ffn_width, cfg.ffn_depth);
            for (std::size_t c = 0; c < d; ++c) h[t * d + c] += gates[i] * eout[c];
        }
        if (subsets_out) subsets_out->push_back(std::move(order));
        if (gates_out) gates_out->push_back(std::move(gates));
    }
}

}  // namespace

std::vector<double> forward_block(const MoEModel& model, std::uint32_t block,
                                  const std::vector<double>& h) {
    std::vector<double> out = attention_half(model, block, h);
    expert_half(model, block, out, nullptr, nullptr);
    return out;
}

ForwardTrace forward(const MoEModel& model, const std::vector<double>& h0) {
    model.validate();
    const ArchConfig& cfg = model.cfg;
    std::size_t d = cfg.emb_dim, ell = cfg.seq_len;
    if (h0.size() != ell * d) throw std::invalid_argument("forward: input shape mismatch");
    for (double v : h0)
        if (std::fabs(v) > cfg.input_bound * (1.0 + 1e-9))
            throw std::invalid_argument("forward: input exceeds input_bound");

    ForwardTrace trace;
    trace.pattern.blocks = cfg.blocks;
    trace.pattern.seq_len = cfg.seq_len;
    trace.pattern.experts = cfg.experts;
    trace.pattern.active_k = cfg.active_k;

    std::vector<double> h = h0;
    for (std::uint32_t block = 0; block < cfg.blocks; ++block) {
        std::vector<double> after = attention_half(model, block, h);
        expert_half(model, block, after, &trace.pattern.subsets, &trace.gates);
        h.swap(after);
        check_finite(h, block, d);
    }
    trace.pattern.validate();
    trace.h_out = std::move(h);
    return trace;
}

double readout(const MoEModel&, const std::vector<double>& h_out) {
    double acc = 0.0;
    for (double v : h_out) acc += v;
    return acc / static_cast<double>(h_out.size());
}

double softmax_lip_check(double tau, std::uint32_t dim, std::uint64_t trials, std::uint64_t seed) {
    if (!(tau > 0.0)) throw std::invalid_argument("softmax_lip_check: tau must be positive");
    if (dim < 2) throw std::invalid_argument("softmax_lip_check: dim must be >= 2");
    if (trials < 1) throw std::invalid_argument("softmax_lip_check: need at least one trial");
    Rng rng(seed);
    std::vector<double> u(dim), v(dim);
    double max_ratio = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        double diff = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) {
            u[i] = rng.uniform(-10.0, 10.0);
            v[i] = rng.uniform(-10.0, 10.0);
            diff = std::max(diff, std::fabs(u[i] - v[i]));
        }
        if (diff == 0.0) continue;  // u == v: skipped
        auto su = softmax_tau(u, tau);
        auto sv = softmax_tau(v, tau);
        double num = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) num = std::max(num, std::fabs(su[i] - sv[i]));
        max_ratio = std::max(max_ratio, num / diff);
    }
    return max_ratio;
}

double estimate_input_lipschitz(const MoEModel& model, std::uint32_t trials, std::uint64_t seed) {
    model.validate();
    const ArchConfig& cfg = model.cfg;
    std::size_t len = static_cast<std::size_t>(cfg.seq_len) * cfg.emb_dim;
    Rng rng(seed);
    double best = 1.0;
    std::vector<double> a(len), b(len);
    for (std::uint32_t t = 0; t < trials; ++t) {
        double diff = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            a[i] = rng.uniform(-cfg.input_bound, cfg.input_bound);
            b[i] = rng.uniform(-cfg.input_bound, cfg.input_bound);
            diff = std::max(diff, std::fabs(a[i] - b[i]));
        }
        if (diff == 0.0) continue;
        for (std::uint32_t blk = 0; blk < cfg.blocks; ++blk) {
            auto fa = forward_block(model, blk, a);
            auto fb = forward_block(model, blk, b);
            double num = 0.0;
            for (std::size_t i = 0; i < len; ++i) num = std::max(num, std::fabs(fa[i] - fb[i]));
            best = std::max(best, num / diff);
        }
    }
    return best;
}

namespace {

// Router rows are frozen; everything else moves.
bool is_router_param(const MoEModel& m, std::size_t idx) {
    std::size_t per_block = m.params_per_block();
    std::size_t within = idx % per_block;
    std::size_t block = idx / per_block;
    std::size_t r0 = m.router_offset(static_cast<std::uint32_t>(block)) - block * per_block;
    std::size_t r1 = r0 + static_cast<std::size_t>(m.cfg.experts) * m.cfg.emb_dim;
    return within >= r0 && within < r1;
}

}  // namespace

StabilityReport perturb_stability(const MoEModel& model, const std::vector<double>& eta_list,
                                  std::uint32_t trials, std::uint64_t seed) {
    model.validate();
    for (double e : eta_list)
        if (!(e >= 0.0)) throw std::invalid_argument("perturb_stability: eta must be >= 0");

    const ArchConfig& cfg = model.cfg;
    std::size_t len = static_cast<std::size_t>(cfg.seq_len) * cfg.emb_dim;
    Rng input_rng(Rng::derive(seed, 0xA11CE));
    std::vector<double> h0(len);
    for (auto& v : h0) v = input_rng.uniform(-cfg.input_bound, cfg.input_bound);

    ForwardTrace base = forward(model, h0);
    double t_base = readout(model, base.h_out);

    StabilityReport report;
    for (double eta : eta_list) {
        StabilityRow row;
        row.eta = eta;
        std::uint32_t accepted = 0;
        std::uint64_t draw = 0;
        std::uint32_t attempts = 0;
        while (accepted < trials) {
            if (++attempts > 4 * trials) {  // persistent flips: give up and flag
                report.unstable = true;
                break;
            }
            Rng dir_rng(Rng::derive(seed, 0xD1 + draw));
            ++draw;
            MoEModel perturbed = model;
            for (std::size_t i = 0; i < perturbed.params.size(); ++i) {
                double noise = dir_rng.uniform(-1.0, 1.0);  // drawn for every index
                if (is_router_param(model, i)) continue;
                double v = static_cast<double>(model.params[i]) + eta * noise;
                v = std::clamp(v, -cfg.weight_bound, cfg.weight_bound);
                perturbed.params[i] = static_cast<float>(v);
            }
            ForwardTrace trace = forward(perturbed, h0);
            if (trace.pattern.subsets != base.pattern.subsets) {
                ++row.redraws;
                continue;
            }
            ++accepted;
            double dt = std::fabs(readout(perturbed, trace.h_out) - t_base);
            row.max_abs_delta = std::max(row.max_abs_delta, dt);
        }
        row.max_ratio = eta > 0.0 ? row.max_abs_delta / eta : 0.0;
        if (row.redraws > trials / 2) report.unstable = true;
        report.rows.push_back(row);
    }
    return report;
}

double lparam_formula(const ArchConfig& cfg, double l_in) {
    cfg.validate();
    if (!(l_in >= 1.0)) throw std::invalid_argument("lparam_formula: l_in must be >= 1");
    double d = cfg.emb_dim, w = cfg.ffn_width;
    double arch = static_cast<double>(cfg.seq_len) * cfg.heads * d * d +
                  (1.0 + cfg.active_k) * d * std::pow(w, static_cast<double>(cfg.ffn_depth));
    return std::pow(l_in, static_cast<double>(cfg.blocks)) * arch * cfg.weight_bound;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t take_u32(const unsigned char*& p) {
    std::uint32_t v = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                      (static_cast<std::uint32_t>(p[2]) << 16) |
                      (static_cast<std::uint32_t>(p[3]) << 24);
    p += 4;
    return v;
}

double take_f64(const unsigned char*& p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

void save_model(const MoEModel& model, const std::string& path) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.put(static_cast<char>(kModelFormatVersion));
    const ArchConfig& c = model.cfg;
    for (std::uint32_t v : {c.ambient_dim, c.seq_len, c.emb_dim, c.heads, c.blocks, c.experts,
                            c.active_k, c.ffn_depth, c.ffn_width})
        put_u32(out, v);
    put_f64(out, c.weight_bound);
    put_f64(out, c.output_bound);
    put_f64(out, c.input_bound);
    for (float f : model.params) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof(bits));
        put_u32(out, bits);
    }
}

MoEModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 1 + 9 * 4 + 3 * 8) throw std::runtime_error(path + ": truncated header");
    const unsigned char* p = bytes.data();
    if (*p != kModelFormatVersion)
        throw std::runtime_error(path + ": unsupported format version " + std::to_string(*p));
    ++p;
    ArchConfig c;
    c.ambient_dim = take_u32(p);
    c.seq_len = take_u32(p);
    c.emb_dim = take_u32(p);
    c.heads = take_u32(p);
    c.blocks = take_u32(p);
    c.experts = take_u32(p);
    c.active_k = take_u32(p);
    c.ffn_depth = take_u32(p);
    c.ffn_width = take_u32(p);
    c.weight_bound = take_f64(p);
    c.output_bound = take_f64(p);
    c.input_bound = take_f64(p);
    MoEModel m = zero_model(c);
    std::size_t expected = 1 + 9 * 4 + 3 * 8 + m.params.size() * 4;
    if (bytes.size() != expected)
        throw std::runtime_error(path + ": length mismatch (expected " + std::to_string(expected) +
                                 " bytes, got " + std::to_string(bytes.size()) + ")");
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        std::uint32_t bits = take_u32(p);
        float f;
        std::memcpy(&f, &bits, sizeof(f));
        m.params[i] = f;
    }
    m.validate();
    return m;
}

}  // namespace moesl
