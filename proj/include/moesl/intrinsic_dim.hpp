// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace moesl {

/// Row-major matrix of n embedding vectors in dimension dim.
struct EmbeddingSet {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> data;  // n * dim, row-major

    const double* row(std::size_t i) const { return data.data() + i * dim; }
    void validate() const;
};

/// Result of the subsampled nearest-neighbor maximum-likelihood protocol.
struct IDEstimate {
    double median = 0.0;
    double mad = 0.0;                    // median absolute deviation
    std::vector<double> per_subsample;   // ordered by subsample index
    std::uint32_t k_neighbors = 0;
    std::size_t subsample_size = 0;
    std::uint64_t seed = 0;
};

/// Within-subsample aggregation of per-point estimates.
enum class IDAggregate { mean, harmonic_mean };

/// Exact Euclidean distances from each query point to its k nearest
/// neighbors (self excluded), ascending. A zero distance is a hard error
/// naming both indices; deduplicate first if the data may contain copies.
std::vector<std::vector<double>> knn_distances(const EmbeddingSet& points,
                                               const std::vector<std::size_t>& queries,
                                               std::uint32_t k);

/// Maximum-likelihood dimension from one sorted neighbor-distance list:
/// [ (1/(k-1)) * sum_{j<k} ln(T_k/T_j) ]^(-1).
double levina_bickel_point(const std::vector<double>& distances, std::uint32_t k);

/// Draws n_subsamples seeded subsets without replacement, averages the
/// per-point estimates within each subset, and reports the per-subsample
/// values with their median and MAD. Deterministic given the seed.
IDEstimate estimate_id(const EmbeddingSet& points, std::uint32_t k, std::uint32_t n_subsamples,
                       std::size_t subsample_size, std::uint64_t seed,
                       IDAggregate aggregate = IDAggregate::mean);

double median_of(std::vector<double> values);

/// CSV ingestion: one vector per row, comma-separated, no header.
EmbeddingSet load_embeddings_csv(const std::string& path);

/// Raw binary ingestion: header of two little-endian u32 (n, dim)
/// followed by n*dim little-endian IEEE-754 f32, row-major.
EmbeddingSet load_embeddings_f32(const std::string& path);

void save_embeddings_csv(const EmbeddingSet& e, const std::string& path);
void save_embeddings_f32(const EmbeddingSet& e, const std::string& path);

/// Sniffs the binary header; falls back to CSV when the file cannot be a
/// valid f32 container. Throws when neither format fits.
EmbeddingSet load_embeddings_auto(const std::string& path);

}  // namespace moesl
