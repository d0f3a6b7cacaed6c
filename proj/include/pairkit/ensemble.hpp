#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pairkit/dataset.hpp"
#include "pairkit/metrics.hpp"

namespace pairkit {

struct RankedEntry {
    std::string model_id;
    PredictionSet test;
    double dev_pairwise_acc = 0.0;
};

/// Prediction sets ordered by dev pairwise accuracy, best first.
struct RankedModelSet {
    std::vector<RankedEntry> entries;
};

struct Candidate {
    std::string model_id;
    PredictionSet test;
    PredictionSet dev;
};

/// Scores each candidate on `dev_data` and sorts descending; ties keep input order.
RankedModelSet rank_models(std::vector<Candidate> candidates, const PairedDataset& dev_data);

/// Orders already-scored entries; exposed for callers that hold dev scores.
RankedModelSet rank_scored(std::vector<RankedEntry> entries);

enum class SourceKind { Base, Resolved, Random };

struct PairSource {
    SourceKind kind = SourceKind::Base;
    std::string model_id;  ///< set when kind == Resolved

    bool operator==(const PairSource&) const = default;
};

struct ResolutionTrace {
    PredictionSet final;
    std::map<std::string, PairSource> source;
    std::size_t n_same_output_initial = 0;
    std::size_t n_resolved = 0;
    std::size_t n_random = 0;

    bool operator==(const ResolutionTrace&) const = default;
};

/// Starts from the top-ranked predictions. Each same-output pair takes both
/// predictions from the first lower-ranked model that differentiates it. When
/// `perturb` is set, pairs no model differentiates get one fair coin each
/// (drawn in ascending pair-id order) deciding which statement is true.
ResolutionTrace resolve_ensemble(const RankedModelSet& ranked, bool perturb, std::uint64_t seed);

struct PerturbationAnalysis {
    std::size_t n_changed = 0;
    std::size_t n_total = 0;
    double max_gain = 0.0;       ///< n_changed / n_total
    double expected_gain = 0.0;  ///< max_gain / 2
};

PerturbationAnalysis analyze_random_perturbation(std::size_t n_changed, std::size_t n_total);

struct StrategyStats {
    double mean = 0.0;
    double half_width = 0.0;  ///< 95% normal-approximation half-width of the mean
};

struct SimulationSummary {
    std::size_t trials = 0;
    std::size_t n_pairs = 0;
    StrategyStats base_only;        ///< top model, no post-processing
    StrategyStats perturb_only;     ///< top model + random perturbation
    StrategyStats resolution;       ///< full ranked resolution + random perturbation
    StrategyStats mean_random_fraction;  ///< share of pairs left to the coin in `resolution`
};

/// Monte-Carlo comparison of post-processing strategies. Each model predicts
/// each statement correctly with its own independent probability; the first
/// accuracy is the top-ranked model. Trials use derived seeds and run in parallel.
SimulationSummary simulate_resolution(const std::vector<double>& model_accuracies, std::size_t n_pairs,
                                      std::size_t trials, std::uint64_t seed);

const char* to_string(SourceKind kind);
nlohmann::json to_json(const ResolutionTrace& trace);
nlohmann::json to_json(const PerturbationAnalysis& analysis);
nlohmann::json to_json(const SimulationSummary& summary);

}  // namespace pairkit
