#include "pairkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pairkit/error.hpp"

namespace pairkit {

using nlohmann::json;

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> read_score(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + key + " is not a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "line " + std::to_string(line) + ": non-finite " + key);
    return v;
}

void check_score_sign(const std::string& id, const std::optional<double>& score, bool pred, const char* key) {
    if (score && ((*score >= 0.0) != pred))
        throw Error(ErrorKind::Validation, "pair '" + id + "': " + key + " sign disagrees with its prediction");
}

}  // namespace

PredictionSet parse_predictions(std::string_view jsonl, std::string model_id) {
    PredictionSet preds;
    preds.model_id = std::move(model_id);
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("pred_1") || !obj.contains("pred_2"))
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected {id, pred_1, pred_2}");
        const json& id_field = obj.at("id");
        const std::string id = id_field.is_string() ? id_field.get<std::string>() : id_field.dump();
        PredictionRecord rec;
        for (const char* key : {"pred_1", "pred_2"}) {
            const json& v = obj.at(key);
            bool value;
            if (v.is_boolean()) value = v.get<bool>();
            else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) value = v.get<int>() == 1;
            else throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + key + " is not boolean");
            (std::string_view(key) == "pred_1" ? rec.pred_1 : rec.pred_2) = value;
        }
        rec.score_1 = read_score(obj, "score_1", line_no);
        rec.score_2 = read_score(obj, "score_2", line_no);
        check_score_sign(id, rec.score_1, rec.pred_1, "score_1");
        check_score_sign(id, rec.score_2, rec.pred_2, "score_2");
        if (!preds.records.emplace(id, rec).second)
            throw Error(ErrorKind::Validation, "duplicate prediction for pair '" + id + "'");
    }
    return preds;
}

PredictionSet load_predictions(const std::string& path, std::string model_id) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open predictions " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_predictions(buf.str(), std::move(model_id));
}

std::string to_jsonl(const PredictionSet& preds) {
    std::string out;
    for (const auto& [id, rec] : preds.records) {
        json obj = {{"id", id}, {"pred_1", rec.pred_1}, {"pred_2", rec.pred_2}};
        if (rec.score_1) obj["score_1"] = *rec.score_1;
        if (rec.score_2) obj["score_2"] = *rec.score_2;
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_predictions(const PredictionSet& preds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << to_jsonl(preds);
}

MetricReport evaluate(const PairedDataset& data, const PredictionSet& preds) {
    MetricReport r;
    r.n_pairs = data.size();
    std::size_t matched = 0;
    for (const auto& pair : data.pairs) {
        auto it = preds.records.find(pair.id);
        if (it == preds.records.end())
            throw Error(ErrorKind::Coverage, "no prediction for pair '" + pair.id + "' from " + preds.model_id);
        ++matched;
        const PredictionRecord& rec = it->second;
        const bool ok_1 = rec.pred_1 == pair.label_1;
        const bool ok_2 = rec.pred_2 == pair.label_2;
        r.correct_sentences += static_cast<std::size_t>(ok_1) + static_cast<std::size_t>(ok_2);
        r.correct_pairs += static_cast<std::size_t>(ok_1 && ok_2);
        for (auto [pred, label] : {std::pair{rec.pred_1, pair.label_1}, std::pair{rec.pred_2, pair.label_2}}) {
            if (pred && label) ++r.true_positives;
            else if (pred && !label) ++r.false_positives;
            else if (!pred && label) ++r.false_negatives;
        }
    }
    if (matched != preds.records.size()) {
        for (const auto& [id, rec] : preds.records) {
            const bool known = std::any_of(data.pairs.begin(), data.pairs.end(),
                                           [&](const StatementPair& p) { return p.id == id; });
            if (!known)
                throw Error(ErrorKind::Coverage, "prediction for unknown pair '" + id + "' from " + preds.model_id);
        }
    }

    r.standard_acc = ratio(r.correct_sentences, 2 * r.n_pairs);
    r.pairwise_acc = ratio(r.correct_pairs, r.n_pairs);
    r.precision = ratio(r.true_positives, r.true_positives + r.false_positives);
    r.recall = ratio(r.true_positives, r.true_positives + r.false_negatives);
    // 2PR/(P+R) rewritten on counts; zero when there are no true positives.
    r.f1 = ratio(2 * r.true_positives, 2 * r.true_positives + r.false_positives + r.false_negatives);
    return r;
}

BreakdownReport breakdown(const PairedDataset& data, const PredictionSet& preds) {
    // Full evaluation first so coverage errors surface exactly as in evaluate().
    evaluate(data, preds);

    std::map<DimensionKey, std::pair<std::size_t, std::size_t>> tally;  // (correct, total)
    for (const auto& pair : data.pairs) {
        if (!pair.has_all_dimensions()) continue;
        const PredictionRecord& rec = preds.records.at(pair.id);
        auto& [correct, total] = tally[{*pair.domain, *pair.scenario, *pair.numeracy}];
        ++total;
        correct += static_cast<std::size_t>(rec.pred_1 == pair.label_1 && rec.pred_2 == pair.label_2);
    }
    BreakdownReport report;
    for (const auto& [key, counts] : tally) report.cells[key] = {ratio(counts.first, counts.second), counts.second};
    return report;
}

std::size_t count_same_output_pairs(const PredictionSet& preds) {
    std::size_t n = 0;
    for (const auto& [id, rec] : preds.records) n += static_cast<std::size_t>(rec.same_output());
    return n;
}

json to_json(const MetricReport& r, bool verbose) {
    json j = {{"standard_acc", r.standard_acc},
              {"pairwise_acc", r.pairwise_acc},
              {"f1", r.f1},
              {"n_pairs", r.n_pairs}};
    if (verbose) {
        j["precision"] = r.precision;
        j["recall"] = r.recall;
        j["correct_sentences"] = r.correct_sentences;
        j["correct_pairs"] = r.correct_pairs;
        j["true_positives"] = r.true_positives;
        j["false_positives"] = r.false_positives;
        j["false_negatives"] = r.false_negatives;
    }
    return j;
}

json to_json(const BreakdownReport& report) {
    json cells = json::array();
    for (const auto& [key, cell] : report.cells) {
        const auto& [d, s, n] = key;
        cells.push_back({{"domain", to_string(d)},
                         {"scenario", to_string(s)},
                         {"numeracy", n},
                         {"pairwise_acc", cell.pairwise_acc},
                         {"n_pairs", cell.n_pairs}});
    }
    return {{"cells", cells}};
}

std::string render_table(const MetricReport& r) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << std::left << std::setw(14) << "metric" << std::right << std::setw(10) << "value" << '\n';
    out << std::left << std::setw(14) << "pairwise_acc" << std::right << std::setw(10) << r.pairwise_acc << '\n';
    out << std::left << std::setw(14) << "standard_acc" << std::right << std::setw(10) << r.standard_acc << '\n';
    out << std::left << std::setw(14) << "f1" << std::right << std::setw(10) << r.f1 << '\n';
    out << std::left << std::setw(14) << "n_pairs" << std::right << std::setw(10) << r.n_pairs << '\n';
    return out.str();
}

std::string render_table(const BreakdownReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "domain" << std::setw(13) << "scenario" << std::setw(10) << "numeracy"
        << std::right << std::setw(10) << "pairwise" << std::setw(8) << "n" << '\n';
    out << std::fixed << std::setprecision(4);
    for (const auto& [key, cell] : report.cells) {
        const auto& [d, s, n] = key;
        out << std::left << std::setw(10) << to_string(d) << std::setw(13) << to_string(s) << std::setw(10)
            << (n ? "yes" : "no") << std::right << std::setw(10) << cell.pairwise_acc << std::setw(8)
            << cell.n_pairs << '\n';
    }
    return out.str();
}

}  // namespace pairkit
