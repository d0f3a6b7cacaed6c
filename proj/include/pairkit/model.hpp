#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pairkit/pcl.hpp"

namespace pairkit {

struct ModelConfig {
    std::size_t hash_dim = 4096;
    std::size_t embed_dim = 64;
    std::size_t proj_dim = 32;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Sparse hashed token counts, sorted by bucket index.
struct SparseFeatures {
    std::vector<std::pair<std::size_t, double>> entries;
};

/// Lowercases ASCII, splits on runs of non-alphanumeric ASCII bytes, hashes
/// each token with FNV-1a modulo `hash_dim`, and scales the bucket counts by
/// 1/sqrt(token count). Bytes >= 0x80 are kept inside tokens.
SparseFeatures featurize(std::string_view text, std::size_t hash_dim);

/// Feature-hashing encoder with a tanh hidden layer, a scalar logit head and
/// a projection head feeding the contrastive loss.
struct ToyModel {
    ModelConfig config;
    Matrix w_embed;               // hash_dim x embed_dim
    std::vector<double> b_embed;  // embed_dim
    std::vector<double> w_cls;    // embed_dim
    double b_cls = 0.0;
    Matrix w_proj;                // embed_dim x proj_dim
    std::vector<double> b_proj;   // proj_dim

    /// Zero parameters with shapes from `cfg`.
    static ToyModel zeros(const ModelConfig& cfg);
    /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights from cfg.seed; zero biases.
    static ToyModel initialize(const ModelConfig& cfg);

    bool operator==(const ToyModel&) const = default;
};

struct ForwardTrace {
    SparseFeatures features;
    std::vector<double> hidden;
    double logit = 0.0;
    std::vector<double> projection;

    bool prediction() const { return logit >= 0.0; }
};

ForwardTrace forward(const ToyModel& model, std::string_view text);

/// Gradient buffers shaped like the model's five parameter blocks.
struct ModelGradients {
    Matrix w_embed;
    std::vector<double> b_embed;
    std::vector<double> w_cls;
    double b_cls = 0.0;
    Matrix w_proj;
    std::vector<double> b_proj;

    static ModelGradients zeros_like(const ModelConfig& cfg);
    ModelGradients& operator+=(const ModelGradients& other);
};

/// Reverse-mode accumulation through the heads and the tanh layer.
/// `d_projection` has one row per trace.
ModelGradients backward(const ToyModel& model, std::span<const ForwardTrace> traces,
                        std::span<const double> d_logit, const Matrix& d_projection);

/// Visits (parameter, gradient) blocks in a fixed order: w_embed, b_embed,
/// w_cls, b_cls, w_proj, b_proj. Each block is a flat span of doubles.
template <class Fn>
void for_each_block(ToyModel& model, ModelGradients& grads, Fn&& fn) {
    fn("w_embed", std::span<double>(model.w_embed.data), std::span<double>(grads.w_embed.data));
    fn("b_embed", std::span<double>(model.b_embed), std::span<double>(grads.b_embed));
    fn("w_cls", std::span<double>(model.w_cls), std::span<double>(grads.w_cls));
    fn("b_cls", std::span<double>(&model.b_cls, 1), std::span<double>(&grads.b_cls, 1));
    fn("w_proj", std::span<double>(model.w_proj.data), std::span<double>(grads.w_proj.data));
    fn("b_proj", std::span<double>(model.b_proj), std::span<double>(grads.b_proj));
}

struct Checkpoint {
    ToyModel model;
    std::int64_t step = 0;
    PclMode pcl_mode = PclMode::Literal;
    double lambda_pcl = 0.0;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& doc);

/// JSON container with format tag and version. Doubles are written in
/// shortest round-trip form, so reloading reproduces forward outputs exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

}  // namespace pairkit
