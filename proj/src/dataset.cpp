#include "pairkit/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>

#include "pairkit/error.hpp"
#include "pairkit/rng.hpp"

namespace pairkit {

using nlohmann::json;

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

// Record-level problems are reported through this so lenient mode can drop them.
struct RecordError {
    std::string message;
};

std::optional<bool> parse_bool(const json& value) {
    if (value.is_boolean()) return value.get<bool>();
    if (value.is_string()) {
        const auto text = lower(value.get<std::string>());
        if (text == "true") return true;
        if (text == "false") return false;
    }
    return std::nullopt;
}

const json* optional_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

StatementPair parse_pair(const json& obj, std::size_t index) {
    if (!obj.is_object()) throw RecordError{"record " + std::to_string(index) + " is not an object"};

    StatementPair pair;
    const auto id = obj.find("id");
    if (id == obj.end()) throw RecordError{"record " + std::to_string(index) + " has no id"};
    if (id->is_string()) {
        pair.id = id->get<std::string>();
    } else if (id->is_number_integer()) {
        pair.id = id->dump();
    } else {
        throw RecordError{"record " + std::to_string(index) + " has a non-string id"};
    }
    const std::string where = "pair '" + pair.id + "'";

    for (const char* key : {"sent_1", "sent_2"}) {
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_string()) throw RecordError{where + ": missing or non-string " + key};
    }
    pair.sent_1 = obj.at("sent_1").get<std::string>();
    pair.sent_2 = obj.at("sent_2").get<std::string>();

    for (const char* key : {"label_1", "label_2"}) {
        auto it = obj.find(key);
        if (it == obj.end()) throw RecordError{where + ": missing " + key};
        auto value = parse_bool(*it);
        if (!value) throw RecordError{where + ": " + key + " is not a boolean or \"true\"/\"false\""};
        (std::string_view(key) == "label_1" ? pair.label_1 : pair.label_2) = *value;
    }

    if (const json* d = optional_field(obj, "domain")) {
        if (!d->is_string() || !(pair.domain = parse_domain(d->get<std::string>())))
            throw RecordError{where + ": unknown domain " + d->dump()};
    }
    if (const json* s = optional_field(obj, "scenario")) {
        if (!s->is_string() || !(pair.scenario = parse_scenario(s->get<std::string>())))
            throw RecordError{where + ": unknown scenario " + s->dump()};
    }
    if (const json* n = optional_field(obj, "numeracy")) {
        pair.numeracy = parse_bool(*n);
        if (!pair.numeracy) throw RecordError{where + ": numeracy is not a boolean"};
    }

    if (auto why = pair.violation()) throw RecordError{where + ": " + *why};
    return pair;
}

}  // namespace

const char* to_string(Domain d) {
    switch (d) {
        case Domain::Physical: return "physical";
        case Domain::Social: return "social";
        case Domain::Temporal: return "temporal";
    }
    return "?";
}

const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::Comparative: return "comparative";
        case Scenario::Causal: return "causal";
    }
    return "?";
}

std::optional<Domain> parse_domain(std::string_view text) {
    const auto t = lower(text);
    if (t == "physical") return Domain::Physical;
    if (t == "social") return Domain::Social;
    if (t == "temporal") return Domain::Temporal;
    return std::nullopt;
}

std::optional<Scenario> parse_scenario(std::string_view text) {
    const auto t = lower(text);
    // Com2Sense files spell the comparative scenario "comparison".
    if (t == "comparative" || t == "comparison") return Scenario::Comparative;
    if (t == "causal") return Scenario::Causal;
    return std::nullopt;
}

std::optional<std::string> StatementPair::violation() const {
    if (id.empty()) return "empty id";
    if (blank(sent_1)) return "sent_1 is empty";
    if (blank(sent_2)) return "sent_2 is empty";
    if (label_1 == label_2) return "label_1 equals label_2 (pair is not complementary)";
    return std::nullopt;
}

LoadResult parse_dataset(const json& doc, LoadMode mode, std::string name) {
    if (!doc.is_array()) throw Error(ErrorKind::Parse, "dataset must be a JSON array of pair objects");

    LoadResult result;
    result.dataset.name = std::move(name);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        try {
            StatementPair pair = parse_pair(doc[i], i);
            if (!seen.insert(pair.id).second) throw RecordError{"duplicate pair id '" + pair.id + "'"};
            result.dataset.pairs.push_back(std::move(pair));
        } catch (const RecordError& e) {
            if (mode == LoadMode::Strict) throw Error(ErrorKind::Validation, e.message);
            ++result.dropped;
            result.warnings.push_back(e.message);
        }
    }
    return result;
}

LoadResult load_dataset(const std::string& path, LoadMode mode) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open dataset " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
    return parse_dataset(doc, mode, path);
}

json to_json(const StatementPair& pair) {
    json j = {{"id", pair.id},           {"sent_1", pair.sent_1},   {"sent_2", pair.sent_2},
              {"label_1", pair.label_1}, {"label_2", pair.label_2}};
    if (pair.domain) j["domain"] = to_string(*pair.domain);
    if (pair.scenario) j["scenario"] = to_string(*pair.scenario);
    if (pair.numeracy) j["numeracy"] = *pair.numeracy;
    return j;
}

json to_json(const PairedDataset& data) {
    json arr = json::array();
    for (const auto& pair : data.pairs) arr.push_back(to_json(pair));
    return arr;
}

void save_dataset(const PairedDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << to_json(data).dump(1) << '\n';
}

PairedDataset merge_datasets(const PairedDataset& a, const PairedDataset& b) {
    std::set<std::string> ids;
    for (const auto& p : a.pairs) ids.insert(p.id);
    for (const auto& p : b.pairs) {
        if (ids.count(p.id)) throw Error(ErrorKind::Validation, "duplicate pair id '" + p.id + "' across datasets");
    }
    PairedDataset merged;
    merged.name = a.name.empty() ? b.name : (b.name.empty() ? a.name : a.name + "+" + b.name);
    merged.pairs.reserve(a.size() + b.size());
    merged.pairs.insert(merged.pairs.end(), a.pairs.begin(), a.pairs.end());
    merged.pairs.insert(merged.pairs.end(), b.pairs.begin(), b.pairs.end());
    return merged;
}

PairedDataset filter_by_dimensions(const PairedDataset& data, Domain d, Scenario s, bool numeracy) {
    PairedDataset out;
    out.name = data.name;
    for (const auto& p : data.pairs) {
        if (p.domain == d && p.scenario == s && p.numeracy == numeracy) out.pairs.push_back(p);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
    for (const auto& [id, fold] : assignment) ++sizes.at(static_cast<std::size_t>(fold));
    return sizes;
}

FoldAssignment kfold_split(const PairedDataset& data, int k, std::uint64_t seed) {
    if (k < 2 || static_cast<std::size_t>(k) > data.size()) {
        throw Error(ErrorKind::Usage, "k must be in [2, " + std::to_string(data.size()) + "], got " +
                                          std::to_string(k));
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    FoldAssignment folds;
    folds.k = k;
    folds.seed = seed;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        folds.assignment.emplace(data.pairs[order[pos]].id, static_cast<int>(pos % static_cast<std::size_t>(k)));
    }
    return folds;
}

FoldView fold_views(const PairedDataset& data, const FoldAssignment& folds, int i) {
    if (i < 0 || i >= folds.k) {
        throw Error(ErrorKind::Usage, "fold index " + std::to_string(i) + " out of range for k=" +
                                          std::to_string(folds.k));
    }
    FoldView view;
    view.train.name = data.name + "/train" + std::to_string(i);
    view.val.name = data.name + "/val" + std::to_string(i);
    for (const auto& p : data.pairs) {
        auto it = folds.assignment.find(p.id);
        if (it == folds.assignment.end())
            throw Error(ErrorKind::Coverage, "pair '" + p.id + "' has no fold assignment");
        (it->second == i ? view.val : view.train).pairs.push_back(p);
    }
    return view;
}

json to_json(const FoldAssignment& folds) {
    json assignment = json::object();
    for (const auto& [id, fold] : folds.assignment) assignment[id] = fold;
    return {{"k", folds.k}, {"seed", folds.seed}, {"assignment", assignment}};
}

FoldAssignment fold_assignment_from_json(const json& doc) {
    try {
        FoldAssignment folds;
        folds.k = doc.at("k").get<int>();
        folds.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& [id, fold] : doc.at("assignment").items()) {
            const int f = fold.get<int>();
            if (f < 0 || f >= folds.k) throw Error(ErrorKind::Validation, "fold of '" + id + "' out of range");
            folds.assignment.emplace(id, f);
        }
        return folds;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("fold assignment: ") + e.what());
    }
}

}  // namespace pairkit
