#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pairkit {

enum class Domain { Physical, Social, Temporal };
enum class Scenario { Comparative, Causal };

const char* to_string(Domain d);
const char* to_string(Scenario s);
std::optional<Domain> parse_domain(std::string_view text);
std::optional<Scenario> parse_scenario(std::string_view text);

/// One complementary statement pair. Exactly one of the two statements holds.
struct StatementPair {
    std::string id;
    std::string sent_1;
    std::string sent_2;
    bool label_1 = true;
    bool label_2 = false;
    std::optional<Domain> domain;
    std::optional<Scenario> scenario;
    std::optional<bool> numeracy;

    bool has_all_dimensions() const {
        return domain.has_value() && scenario.has_value() && numeracy.has_value();
    }

    /// Empty when every pair invariant holds, otherwise the reason it fails.
    std::optional<std::string> violation() const;

    bool operator==(const StatementPair&) const = default;
};

struct PairedDataset {
    std::string name;
    std::vector<StatementPair> pairs;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }

    bool operator==(const PairedDataset&) const = default;
};

enum class LoadMode { Strict, Lenient };

struct LoadResult {
    PairedDataset dataset;
    std::size_t dropped = 0;
    std::vector<std::string> warnings;
};

/// Parses a dataset from a JSON array of pair objects.
///
/// Labels may be JSON booleans or "true"/"false" strings in any case.
/// Strict mode throws on the first invalid record and names its id; lenient
/// mode drops invalid records and counts them.
LoadResult parse_dataset(const nlohmann::json& doc, LoadMode mode, std::string name);
LoadResult load_dataset(const std::string& path, LoadMode mode = LoadMode::Strict);

nlohmann::json to_json(const StatementPair& pair);
nlohmann::json to_json(const PairedDataset& data);
void save_dataset(const PairedDataset& data, const std::string& path);

/// All of `a` followed by all of `b`; ids must be disjoint.
PairedDataset merge_datasets(const PairedDataset& a, const PairedDataset& b);

/// Restricts to pairs carrying exactly this (domain, scenario, numeracy).
PairedDataset filter_by_dimensions(const PairedDataset& data, Domain d, Scenario s, bool numeracy);

struct FoldAssignment {
    int k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, int> assignment;

    std::vector<std::size_t> fold_sizes() const;
    bool operator==(const FoldAssignment&) const = default;
};

/// Seeded shuffle of pair ids, then round-robin dealing into k folds.
/// Pairs are atomic: both statements of a pair always share a fold.
FoldAssignment kfold_split(const PairedDataset& data, int k, std::uint64_t seed);

struct FoldView {
    PairedDataset train;
    PairedDataset val;
};

/// `val` is fold i and `train` the remaining folds, both in dataset order.
FoldView fold_views(const PairedDataset& data, const FoldAssignment& folds, int i);

nlohmann::json to_json(const FoldAssignment& folds);
FoldAssignment fold_assignment_from_json(const nlohmann::json& doc);

}  // namespace pairkit
