#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>

#include <json.hpp>

#include "pairkit/dataset.hpp"

namespace pairkit {

struct PredictionRecord {
    bool pred_1 = false;
    bool pred_2 = false;
    std::optional<double> score_1;
    std::optional<double> score_2;

    bool same_output() const { return pred_1 == pred_2; }
    bool operator==(const PredictionRecord&) const = default;
};

/// One model's predictions keyed by pair id. Iteration is in ascending id order.
struct PredictionSet {
    std::string model_id;
    std::map<std::string, PredictionRecord> records;

    bool operator==(const PredictionSet&) const = default;
};

/// Reads JSON Lines: one {"id", "pred_1", "pred_2", "score_1"?, "score_2"?} per line.
PredictionSet load_predictions(const std::string& path, std::string model_id);
PredictionSet parse_predictions(std::string_view jsonl, std::string model_id);
std::string to_jsonl(const PredictionSet& preds);
void save_predictions(const PredictionSet& preds, const std::string& path);

struct MetricReport {
    double standard_acc = 0.0;
    double pairwise_acc = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t n_pairs = 0;

    // Integer tallies behind the ratios, for exact comparisons.
    std::size_t correct_sentences = 0;
    std::size_t correct_pairs = 0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

/// Sentence-level accuracy, pair-level (both correct) accuracy and binary F1
/// with `true` as the positive class. Every pair needs a prediction and every
/// prediction must name a known pair.
MetricReport evaluate(const PairedDataset& data, const PredictionSet& preds);

using DimensionKey = std::tuple<Domain, Scenario, bool>;

struct BreakdownCell {
    double pairwise_acc = 0.0;
    std::size_t n_pairs = 0;
};

struct BreakdownReport {
    std::map<DimensionKey, BreakdownCell> cells;
};

/// Pairwise accuracy per (domain, scenario, numeracy) cell. Pairs lacking any
/// dimension are left out; empty cells are omitted.
BreakdownReport breakdown(const PairedDataset& data, const PredictionSet& preds);

std::size_t count_same_output_pairs(const PredictionSet& preds);

nlohmann::json to_json(const MetricReport& report, bool verbose = false);
nlohmann::json to_json(const BreakdownReport& report);
std::string render_table(const MetricReport& report);
std::string render_table(const BreakdownReport& report);

}  // namespace pairkit
