#include "pairkit/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "pairkit/error.hpp"
#include "pairkit/rng.hpp"

namespace pairkit {

using nlohmann::json;

namespace {

bool same_ids(const PredictionSet& a, const PredictionSet& b) {
    if (a.records.size() != b.records.size()) return false;
    return std::equal(a.records.begin(), a.records.end(), b.records.begin(),
                      [](const auto& x, const auto& y) { return x.first == y.first; });
}

void check_coverage(const std::vector<const PredictionSet*>& sets) {
    for (std::size_t i = 1; i < sets.size(); ++i) {
        if (!same_ids(*sets[0], *sets[i]))
            throw Error(ErrorKind::Coverage, "test predictions of '" + sets[i]->model_id +
                                                 "' cover different pairs than '" + sets[0]->model_id + "'");
    }
}

StrategyStats summarize(const std::vector<double>& values) {
    StrategyStats s;
    const double n = static_cast<double>(values.size());
    for (double v : values) s.mean += v;
    s.mean /= n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return s;
}

json to_json(const StrategyStats& s) { return {{"mean", s.mean}, {"half_width_95", s.half_width}}; }

}  // namespace

RankedModelSet rank_scored(std::vector<RankedEntry> entries) {
    if (entries.empty()) throw Error(ErrorKind::Usage, "no models to rank");
    std::vector<const PredictionSet*> sets;
    for (const auto& e : entries) sets.push_back(&e.test);
    check_coverage(sets);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) { return a.dev_pairwise_acc > b.dev_pairwise_acc; });
    return {std::move(entries)};
}

RankedModelSet rank_models(std::vector<Candidate> candidates, const PairedDataset& dev_data) {
    if (candidates.empty()) throw Error(ErrorKind::Usage, "no models to rank");
    std::vector<RankedEntry> entries;
    entries.reserve(candidates.size());
    for (auto& c : candidates) {
        const double score = evaluate(dev_data, c.dev).pairwise_acc;
        c.test.model_id = c.model_id;
        entries.push_back({c.model_id, std::move(c.test), score});
    }
    return rank_scored(std::move(entries));
}

ResolutionTrace resolve_ensemble(const RankedModelSet& ranked, bool perturb, std::uint64_t seed) {
    if (ranked.entries.empty()) throw Error(ErrorKind::Usage, "cannot resolve an empty ranking");
    std::vector<const PredictionSet*> sets;
    for (const auto& e : ranked.entries) sets.push_back(&e.test);
    check_coverage(sets);

    ResolutionTrace trace;
    trace.final.model_id = "ensemble";
    Rng rng(seed);
    // std::map iteration gives ascending pair id, which fixes the coin order.
    for (const auto& [id, base] : ranked.entries.front().test.records) {
        PredictionRecord chosen = base;
        PairSource source;
        if (base.same_output()) {
            ++trace.n_same_output_initial;
            bool resolved = false;
            for (std::size_t r = 1; r < ranked.entries.size() && !resolved; ++r) {
                const PredictionRecord& alt = ranked.entries[r].test.records.at(id);
                if (alt.same_output()) continue;
                chosen = alt;
                source = {SourceKind::Resolved, ranked.entries[r].model_id};
                resolved = true;
                ++trace.n_resolved;
            }
            if (!resolved && perturb) {
                const bool first_true = rng.coin();
                chosen = {first_true, !first_true, std::nullopt, std::nullopt};
                source = {SourceKind::Random, {}};
                ++trace.n_random;
            }
        }
        trace.final.records.emplace(id, chosen);
        trace.source.emplace(id, std::move(source));
    }
    return trace;
}

PerturbationAnalysis analyze_random_perturbation(std::size_t n_changed, std::size_t n_total) {
    if (n_total < 1) throw Error(ErrorKind::Usage, "total pair count must be >= 1");
    if (n_changed > n_total) throw Error(ErrorKind::Usage, "changed pairs exceed total pairs");
    PerturbationAnalysis a;
    a.n_changed = n_changed;
    a.n_total = n_total;
    a.max_gain = static_cast<double>(n_changed) / static_cast<double>(n_total);
    a.expected_gain = a.max_gain / 2.0;
    return a;
}

SimulationSummary simulate_resolution(const std::vector<double>& model_accuracies, std::size_t n_pairs,
                                      std::size_t trials, std::uint64_t seed) {
    if (model_accuracies.empty()) throw Error(ErrorKind::Usage, "simulation needs at least one model accuracy");
    for (double a : model_accuracies) {
        if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorKind::Usage, "model accuracies must lie in [0, 1]");
    }
    if (n_pairs < 1 || trials < 1) throw Error(ErrorKind::Usage, "simulation needs pairs >= 1 and trials >= 1");

    std::vector<std::string> ids(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "p%07zu", i);
        ids[i] = buf;
    }

    std::vector<double> base_only(trials), perturb_only(trials), resolution(trials), random_share(trials);
    auto run_trial = [&](std::size_t t) {
        const std::uint64_t trial_seed = mix_seed(seed ^ mix_seed(t));
        Rng rng(trial_seed);
        PairedDataset data;
        data.pairs.resize(n_pairs);
        for (std::size_t i = 0; i < n_pairs; ++i) {
            StatementPair& p = data.pairs[i];
            p.id = ids[i];
            p.label_1 = rng.coin();
            p.label_2 = !p.label_1;
        }
        RankedModelSet all;
        for (std::size_t m = 0; m < model_accuracies.size(); ++m) {
            RankedEntry e;
            e.model_id = "m" + std::to_string(m);
            e.test.model_id = e.model_id;
            e.dev_pairwise_acc = model_accuracies[m];
            for (const auto& p : data.pairs) {
                const bool ok_1 = rng.bernoulli(model_accuracies[m]);
                const bool ok_2 = rng.bernoulli(model_accuracies[m]);
                e.test.records.emplace_hint(e.test.records.end(), p.id,
                                            PredictionRecord{ok_1 == p.label_1, ok_2 == p.label_2, std::nullopt, std::nullopt});
            }
            all.entries.push_back(std::move(e));
        }
        const std::uint64_t coin_seed = mix_seed(trial_seed);
        base_only[t] = evaluate(data, all.entries.front().test).pairwise_acc;

        RankedModelSet base{{all.entries.front()}};
        perturb_only[t] = evaluate(data, resolve_ensemble(base, true, coin_seed).final).pairwise_acc;

        const ResolutionTrace full = resolve_ensemble(all, true, coin_seed);
        resolution[t] = evaluate(data, full.final).pairwise_acc;
        random_share[t] = static_cast<double>(full.n_random) / static_cast<double>(n_pairs);
    };

    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), trials));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t t = w; t < trials; t += workers) run_trial(t);
        });
    }
    for (auto& th : pool) th.join();

    SimulationSummary s;
    s.trials = trials;
    s.n_pairs = n_pairs;
    s.base_only = summarize(base_only);
    s.perturb_only = summarize(perturb_only);
    s.resolution = summarize(resolution);
    s.mean_random_fraction = summarize(random_share);
    return s;
}

const char* to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::Base: return "base";
        case SourceKind::Resolved: return "resolved";
        case SourceKind::Random: return "random";
    }
    return "?";
}

json to_json(const ResolutionTrace& trace) {
    json sources = json::object();
    for (const auto& [id, src] : trace.source) {
        sources[id] = src.kind == SourceKind::Resolved ? json{{"kind", "resolved"}, {"model_id", src.model_id}}
                                                       : json{{"kind", to_string(src.kind)}};
    }
    return {{"n_pairs", trace.final.records.size()},
            {"n_same_output_initial", trace.n_same_output_initial},
            {"n_resolved", trace.n_resolved},
            {"n_random", trace.n_random},
            {"n_same_output_final", count_same_output_pairs(trace.final)},
            {"source", sources}};
}

json to_json(const PerturbationAnalysis& a) {
    return {{"n_changed", a.n_changed},
            {"n_total", a.n_total},
            {"max_gain", a.max_gain},
            {"expected_gain", a.expected_gain},
            {"max_gain_pct", 100.0 * a.max_gain},
            {"expected_gain_pct", 100.0 * a.expected_gain}};
}

json to_json(const SimulationSummary& s) {
    return {{"trials", s.trials},
            {"n_pairs", s.n_pairs},
            {"base_only", to_json(s.base_only)},
            {"perturb_only", to_json(s.perturb_only)},
            {"resolution", to_json(s.resolution)},
            {"random_fraction", to_json(s.mean_random_fraction)}};
}

}  // namespace pairkit
