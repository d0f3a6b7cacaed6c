#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairkit/dataset.hpp"
#include "pairkit/metrics.hpp"
#include "pairkit/model.hpp"
#include "pairkit/pcl.hpp"

namespace pairkit {

struct TrainConfig {
    std::size_t batch_pairs = 24;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double adam_eps = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::int64_t warmup_steps = 100;
    std::int64_t max_steps = 500;
    double lambda_pcl = 1.0;
    PclConfig pcl;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 50;
    /// Micro-batches per optimizer step. CE is averaged over the whole batch;
    /// PCL only sees the negatives inside each micro-batch.
    std::size_t accumulate_steps = 1;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc);

/// Linear warmup from 0, constant afterwards: lr * min(1, step / warmup_steps).
double learning_rate_at(const TrainConfig& cfg, std::int64_t step);

/// Adam with decoupled weight decay:
///   theta -= lr_t * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
class AdamW {
public:
    AdamW(const ModelConfig& shape, double beta1, double beta2, double eps, double weight_decay);

    void step(ToyModel& model, ModelGradients& grads, double lr);
    std::int64_t steps_taken() const { return t_; }

private:
    ModelGradients m_;
    ModelGradients v_;
    double beta1_;
    double beta2_;
    double eps_;
    double weight_decay_;
    std::int64_t t_ = 0;
};

struct ObjectiveResult {
    double ce = 0.0;
    double pcl = 0.0;
    double total = 0.0;
    ModelGradients grads;
};

/// CE + lambda * PCL on one batch of pairs, with exact gradients.
/// CE is the mean binary cross-entropy over all 2N statements.
ObjectiveResult compute_objective(const ToyModel& model, std::span<const StatementPair> batch,
                                  const TrainConfig& cfg);

struct LossPoint {
    std::int64_t step = 0;
    double ce = 0.0;
    double pcl = 0.0;
    double total = 0.0;
};

struct DevPoint {
    std::int64_t step = 0;
    MetricReport metrics;
    double mean_pair_similarity = 0.0;
};

struct TrainReport {
    std::vector<LossPoint> loss_curve;
    std::vector<DevPoint> dev_curve;
    std::int64_t best_step = 0;
    PclMode pcl_mode = PclMode::Literal;

    const DevPoint& best() const;
};

nlohmann::json to_json(const TrainReport& report);

struct TrainResult {
    ToyModel model;  ///< parameters at best_step
    TrainReport report;
};

PredictionSet predict(const ToyModel& model, const PairedDataset& data, std::string model_id = "model");

/// Mean eps-guarded cosine similarity between the projections of each pair.
double mean_pair_similarity(const ToyModel& model, const PairedDataset& data, double eps = 1e-12);

/// Runs max_steps AdamW updates (step 1 is the first update) and evaluates on
/// `dev` at step 0, every eval_every steps and at the last step. Returns the
/// model at the best dev pairwise accuracy, earliest step on ties.
TrainResult train(const PairedDataset& data, const PairedDataset& dev, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, const std::optional<ToyModel>& init = std::nullopt);

struct TransferResult {
    ToyModel model;
    ToyModel pretrained;
    TrainReport pretrain_report;
    TrainReport finetune_report;
};

/// Trains on `pretrain`, then finetunes on `finetune` starting from the stage-1
/// model. A pretraining budget of zero steps leaves the initialization untouched.
TransferResult knowledge_transfer(const PairedDataset& pretrain, const PairedDataset& finetune,
                                  const PairedDataset& dev, const ModelConfig& mcfg,
                                  const TrainConfig& pre_cfg, const TrainConfig& fine_cfg);

struct FoldResult {
    int fold = 0;
    ToyModel model;
    MetricReport val_metrics;
    TrainReport report;
};

/// One model per fold, trained on the other k-1 folds (seeds offset by the
/// fold index) and scored on its held-out fold. Folds run concurrently.
std::vector<FoldResult> cross_validate(const PairedDataset& data, int k, const ModelConfig& mcfg,
                                       const TrainConfig& tcfg, std::uint64_t split_seed);

}  // namespace pairkit
