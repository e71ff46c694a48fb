// SPDX-License-Identifier: Apache-2.0
#include "moesl/intrinsic_dim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "moesl/parallel.hpp"
#include "moesl/rng.hpp"

namespace moesl {

void EmbeddingSet::validate() const {
    if (n == 0 || dim == 0) throw std::invalid_argument("EmbeddingSet: empty");
    if (data.size() != n * dim) throw std::invalid_argument("EmbeddingSet: size mismatch");
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("EmbeddingSet: non-finite entry");
}

std::vector<std::vector<double>> knn_distances(const EmbeddingSet& points,
                                               const std::vector<std::size_t>& queries,
                                               std::uint32_t k) {
    points.validate();
    if (k == 0 || k >= points.n)
        throw std::invalid_argument("knn_distances: need 1 <= k < n");

    std::vector<std::vector<double>> out(queries.size());
    std::vector<double> sq(points.n);
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        std::size_t q = queries[qi];
        if (q >= points.n) throw std::out_of_range("knn_distances: query index out of range");
        const double* a = points.row(q);
        for (std::size_t j = 0; j < points.n; ++j) {
            if (j == q) {
                sq[j] = std::numeric_limits<double>::infinity();
                continue;
            }
            const double* b = points.row(j);
            double acc = 0.0;
            for (std::size_t t = 0; t < points.dim; ++t) {
                double d = a[t] - b[t];
                acc += d * d;
            }
            sq[j] = acc;
        }
        std::vector<double> copy = sq;
        std::nth_element(copy.begin(), copy.begin() + (k - 1), copy.end());
        double kth = copy[k - 1];
        std::vector<double> nearest;
        for (std::size_t j = 0; j < points.n; ++j)
            if (sq[j] <= kth) nearest.push_back(sq[j]);
        std::sort(nearest.begin(), nearest.end());
        nearest.resize(k);
        if (nearest.front() == 0.0) {
            std::size_t dup = 0;
            for (std::size_t j = 0; j < points.n; ++j)
                if (j != q && sq[j] == 0.0) {
                    dup = j;
                    break;
                }
            std::ostringstream msg;
            msg << "knn_distances: duplicate points at indices " << q << " and " << dup;
            throw std::invalid_argument(msg.str());
        }
        for (double& d : nearest) d = std::sqrt(d);
        out[qi] = std::move(nearest);
    }
    return out;
}

double levina_bickel_point(const std::vector<double>& distances, std::uint32_t k) {
    if (k < 2) throw std::invalid_argument("levina_bickel_point: k must be >= 2");
    if (distances.size() < k)
        throw std::invalid_argument("levina_bickel_point: fewer than k distances");
    double t_k = distances[k - 1];
    if (!(distances.front() > 0.0))
        throw std::invalid_argument("levina_bickel_point: distances must be positive");
    double acc = 0.0;
    for (std::uint32_t j = 0; j + 1 < k; ++j) {
        if (distances[j] > distances[j + 1])
            throw std::invalid_argument("levina_bickel_point: distances must be ascending");
        acc += std::log(t_k / distances[j]);
    }
    acc /= static_cast<double>(k - 1);
    if (!(acc > 0.0))
        throw std::domain_error("levina_bickel_point: degenerate neighborhood (equal distances)");
    return 1.0 / acc;
}

double median_of(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median_of: empty");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

IDEstimate estimate_id(const EmbeddingSet& points, std::uint32_t k, std::uint32_t n_subsamples,
                       std::size_t subsample_size, std::uint64_t seed, IDAggregate aggregate) {
    points.validate();
    if (subsample_size > points.n)
        throw std::invalid_argument("estimate_id: subsample_size exceeds point count");
    if (static_cast<std::size_t>(k) + 1 > subsample_size)
        throw std::invalid_argument("estimate_id: subsample_size must exceed k");
    if (n_subsamples == 0) throw std::invalid_argument("estimate_id: need at least one subsample");

    IDEstimate out;
    out.k_neighbors = k;
    out.subsample_size = subsample_size;
    out.seed = seed;
    out.per_subsample.assign(n_subsamples, 0.0);

    std::vector<std::string> errors(n_subsamples);
    parallel_for(n_subsamples, [&](std::size_t s) {
        try {
            Rng rng(Rng::derive(seed, s));
            auto idx = sample_without_replacement(points.n, subsample_size, rng);
            EmbeddingSet sub;
            sub.n = subsample_size;
            sub.dim = points.dim;
            sub.data.resize(subsample_size * points.dim);
            for (std::size_t i = 0; i < subsample_size; ++i)
                std::copy_n(points.row(idx[i]), points.dim, sub.data.begin() + i * points.dim);

            std::vector<std::size_t> all(subsample_size);
            for (std::size_t i = 0; i < subsample_size; ++i) all[i] = i;
            auto dists = knn_distances(sub, all, k);

            double acc = 0.0;
            for (const auto& d : dists) {
                double m = levina_bickel_point(d, k);
                acc += aggregate == IDAggregate::mean ? m : 1.0 / m;
            }
            acc /= static_cast<double>(subsample_size);
            out.per_subsample[s] = aggregate == IDAggregate::mean ? acc : 1.0 / acc;
        } catch (const std::exception& ex) {
            errors[s] = ex.what();
        }
    });
    for (std::size_t s = 0; s < n_subsamples; ++s)
        if (!errors[s].empty())
            throw std::runtime_error("estimate_id: subsample " + std::to_string(s) + ": " +
                                     errors[s]);

    out.median = median_of(out.per_subsample);
    std::vector<double> dev;
    dev.reserve(out.per_subsample.size());
    for (double v : out.per_subsample) dev.push_back(std::fabs(v - out.median));
    out.mad = median_of(dev);
    return out;
}

EmbeddingSet load_embeddings_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    EmbeddingSet e;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t count = 0;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            std::size_t pos = 0;
            double v = std::stod(field, &pos);
            e.data.push_back(v);
            ++count;
        }
        if (e.dim == 0)
            e.dim = count;
        else if (count != e.dim)
            throw std::runtime_error(path + ": ragged CSV row (expected " +
                                     std::to_string(e.dim) + " fields, got " +
                                     std::to_string(count) + ")");
        ++e.n;
    }
    e.validate();
    return e;
}

namespace {

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float read_f32_le(const unsigned char* p) {
    std::uint32_t bits = read_u32_le(p);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

void write_u32_le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

EmbeddingSet load_embeddings_f32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw std::runtime_error(path + ": truncated header");
    std::uint32_t n = read_u32_le(bytes.data());
    std::uint32_t dim = read_u32_le(bytes.data() + 4);
    std::size_t expect = 8 + static_cast<std::size_t>(n) * dim * 4;
    if (bytes.size() != expect)
        throw std::runtime_error(path + ": length mismatch (header says " + std::to_string(n) +
                                 "x" + std::to_string(dim) + ", expected " +
                                 std::to_string(expect) + " bytes, got " +
                                 std::to_string(bytes.size()) + ")");
    EmbeddingSet e;
    e.n = n;
    e.dim = dim;
    e.data.resize(static_cast<std::size_t>(n) * dim);
    for (std::size_t i = 0; i < e.data.size(); ++i)
        e.data[i] = static_cast<double>(read_f32_le(bytes.data() + 8 + i * 4));
    e.validate();
    return e;
}

void save_embeddings_csv(const EmbeddingSet& e, const std::string& path) {
    e.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    for (std::size_t i = 0; i < e.n; ++i) {
        for (std::size_t j = 0; j < e.dim; ++j)
            out << e.row(i)[j] << (j + 1 < e.dim ? "," : "");
        out << "\n";
    }
}

void save_embeddings_f32(const EmbeddingSet& e, const std::string& path) {
    e.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_u32_le(out, static_cast<std::uint32_t>(e.n));
    write_u32_le(out, static_cast<std::uint32_t>(e.dim));
    for (double v : e.data) {
        float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof(bits));
        write_u32_le(out, bits);
    }
}

EmbeddingSet load_embeddings_auto(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    unsigned char head[8];
    in.read(reinterpret_cast<char*>(head), 8);
    if (in.gcount() == 8) {
        std::uint32_t n = read_u32_le(head);
        std::uint32_t dim = read_u32_le(head + 4);
        in.seekg(0, std::ios::end);
        std::size_t len = static_cast<std::size_t>(in.tellg());
        if (n > 0 && dim > 0 && len == 8 + static_cast<std::size_t>(n) * dim * 4)
            return load_embeddings_f32(path);
    }
    try {
        return load_embeddings_csv(path);
    } catch (const std::exception& ex) {
        throw std::runtime_error(path + ": format autodetection failed (" + ex.what() +
                                 "); pass an explicit format flag");
    }
}

}  // namespace moesl
