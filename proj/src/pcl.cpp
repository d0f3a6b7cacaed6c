#include "pairkit/pcl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pairkit/error.hpp"

namespace pairkit {

namespace {

double norm(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double dot(std::span<const double> u, std::span<const double> v) {
    return std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
}

std::size_t partner(std::size_t row) { return row ^ 1U; }

struct Anchors {
    std::vector<std::size_t> rows;
    double sign = 1.0;  // -1 for push_apart
};

Anchors anchors_for(std::size_t n_pairs, PclMode mode) {
    Anchors a;
    if (mode == PclMode::Symmetric) {
        a.rows.resize(2 * n_pairs);
        std::iota(a.rows.begin(), a.rows.end(), std::size_t{0});
    } else {
        for (std::size_t j = 0; j < n_pairs; ++j) a.rows.push_back(2 * j);
    }
    if (mode == PclMode::PushApart) a.sign = -1.0;
    return a;
}

void check_batch(const EmbeddingBatch& batch) {
    const Matrix& v = batch.vectors;
    if (v.rows < 2 || v.rows % 2 != 0)
        throw Error(ErrorKind::Validation, "embedding batch needs 2N rows with N >= 1, got " + std::to_string(v.rows));
    if (v.cols == 0) throw Error(ErrorKind::Validation, "embedding batch has zero columns");
    if (!std::all_of(v.data.begin(), v.data.end(), [](double x) { return std::isfinite(x); }))
        throw Error(ErrorKind::Numeric, "embedding batch contains non-finite entries");
}

PclResult run(const EmbeddingBatch& batch, const PclConfig& cfg, bool with_grad) {
    cfg.validate();
    check_batch(batch);
    const Matrix& z = batch.vectors;
    const std::size_t rows = z.rows;
    const std::size_t n_pairs = batch.n_pairs();
    const double inv_tau = 1.0 / cfg.temperature;

    // Normalized rows u_i = z_i / (|z_i| + eps).
    std::vector<double> norms(rows);
    Matrix u(rows, z.cols);
    for (std::size_t i = 0; i < rows; ++i) {
        norms[i] = norm(z.row(i));
        const double scale = 1.0 / (norms[i] + cfg.norm_epsilon);
        auto src = z.row(i);
        auto dst = u.row(i);
        for (std::size_t c = 0; c < z.cols; ++c) dst[c] = src[c] * scale;
    }

    Matrix sim(rows, rows);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = i; k < rows; ++k) sim(i, k) = sim(k, i) = dot(u.row(i), u.row(k));
    }

    PclResult result;
    result.pair_similarities.resize(n_pairs);
    for (std::size_t j = 0; j < n_pairs; ++j) result.pair_similarities[j] = sim(2 * j, 2 * j + 1);

    const Anchors anchors = anchors_for(n_pairs, cfg.mode);
    const double inv_count = 1.0 / static_cast<double>(anchors.rows.size());

    Matrix grad_u;
    if (with_grad) grad_u = Matrix(rows, z.cols);
    std::vector<double> weights(rows);

    double total = 0.0;
    for (std::size_t a : anchors.rows) {
        const std::size_t p = partner(a);
        double max_logit = -INFINITY;
        for (std::size_t k = 0; k < rows; ++k) {
            if (k != a) max_logit = std::max(max_logit, sim(a, k) * inv_tau);
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
            weights[k] = k == a ? 0.0 : std::exp(sim(a, k) * inv_tau - max_logit);
            denom += weights[k];
        }
        const double log_sum = max_logit + std::log(denom);
        const double term = anchors.sign * (log_sum - sim(a, p) * inv_tau);
        result.anchor_terms.push_back(term);
        total += term;

        if (!with_grad) continue;
        // d term / d s(a,k) = sign * (softmax_k - [k == p]) / tau, scaled by 1/|anchors|.
        auto ga = grad_u.row(a);
        auto ua = u.row(a);
        for (std::size_t k = 0; k < rows; ++k) {
            if (k == a) continue;
            const double coef =
                anchors.sign * inv_count * inv_tau * (weights[k] / denom - (k == p ? 1.0 : 0.0));
            if (coef == 0.0) continue;
            auto uk = u.row(k);
            auto gk = grad_u.row(k);
            for (std::size_t c = 0; c < z.cols; ++c) {
                ga[c] += coef * uk[c];
                gk[c] += coef * ua[c];
            }
        }
    }
    result.loss = total * inv_count;

    if (with_grad) {
        // Chain through u = z / (|z| + eps):
        //   dz = du / (n + eps) - z (z . du) / (n (n + eps)^2)
        result.grad = Matrix(rows, z.cols);
        for (std::size_t i = 0; i < rows; ++i) {
            const double n = norms[i];
            const double d = n + cfg.norm_epsilon;
            auto gu = grad_u.row(i);
            auto zi = z.row(i);
            auto out = result.grad.row(i);
            const double radial = n > 0.0 ? dot(zi, gu) / (n * d * d) : 0.0;
            for (std::size_t c = 0; c < z.cols; ++c) out[c] = gu[c] / d - zi[c] * radial;
        }
    }
    return result;
}

}  // namespace

const char* to_string(PclMode mode) {
    switch (mode) {
        case PclMode::Literal: return "literal";
        case PclMode::Symmetric: return "symmetric";
        case PclMode::PushApart: return "push_apart";
    }
    return "?";
}

PclMode parse_pcl_mode(std::string_view text) {
    if (text == "literal") return PclMode::Literal;
    if (text == "symmetric") return PclMode::Symmetric;
    if (text == "push_apart" || text == "push-apart") return PclMode::PushApart;
    throw Error(ErrorKind::Validation, "unknown PCL mode '" + std::string(text) + "'");
}

void PclConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw Error(ErrorKind::Validation, "PCL temperature must be positive");
    if (!(norm_epsilon > 0.0)) throw Error(ErrorKind::Validation, "PCL norm_epsilon must be positive");
}

double cosine_sim(std::span<const double> u, std::span<const double> v, double eps) {
    return dot(u, v) / ((norm(u) + eps) * (norm(v) + eps));
}

PclResult pcl_forward(const EmbeddingBatch& batch, const PclConfig& cfg) { return run(batch, cfg, false); }

PclResult pcl_backward(const EmbeddingBatch& batch, const PclConfig& cfg) { return run(batch, cfg, true); }

}  // namespace pairkit
