#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pairkit {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

/// 2N projection vectors: row 2j is pair j's first statement, row 2j+1 its complement.
struct EmbeddingBatch {
    Matrix vectors;

    std::size_t n_pairs() const { return vectors.rows / 2; }
};

enum class PclMode {
    Literal,    ///< one anchor per pair (the first statement), mean over N
    Symmetric,  ///< every row is an anchor, mean over 2N
    PushApart,  ///< literal anchors with the per-anchor log-probability negated
};

const char* to_string(PclMode mode);
PclMode parse_pcl_mode(std::string_view text);

struct PclConfig {
    double temperature = 0.5;
    PclMode mode = PclMode::Literal;
    double norm_epsilon = 1e-12;

    void validate() const;
};

struct PclResult {
    double loss = 0.0;
    Matrix grad;  ///< d loss / d raw rows; empty after a forward-only call
    std::vector<double> pair_similarities;
    std::vector<double> anchor_terms;  ///< per-anchor contribution before averaging, in anchor order
};

/// (u . v) / ((|u| + eps)(|v| + eps))
double cosine_sim(std::span<const double> u, std::span<const double> v, double eps = 1e-12);

/// Pairwise contrastive loss. For each anchor a with complementary partner p,
///   term_a = -log( exp(s(a,p)/t) / sum_{k != a} exp(s(a,k)/t) )
/// over all other 2N-1 rows, with s the eps-guarded cosine similarity.
/// PushApart flips the sign of term_a. The loss is the mean over anchors.
PclResult pcl_forward(const EmbeddingBatch& batch, const PclConfig& cfg);

/// Forward plus the analytic gradient with respect to the raw, unnormalized rows.
PclResult pcl_backward(const EmbeddingBatch& batch, const PclConfig& cfg);

}  // namespace pairkit
