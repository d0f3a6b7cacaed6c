#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pairkit/ensemble.hpp"
#include "pairkit/error.hpp"

using namespace pairkit;

namespace {

PredictionSet preds_of(const std::string& model, std::initializer_list<std::tuple<const char*, bool, bool>> rows) {
    PredictionSet p;
    p.model_id = model;
    for (auto [id, a, b] : rows) p.records[id] = {a, b, std::nullopt, std::nullopt};
    return p;
}

RankedModelSet random_ranking(std::size_t n_models, std::size_t n_pairs, std::mt19937_64& gen) {
    std::bernoulli_distribution coin(0.5);
    RankedModelSet r;
    for (std::size_t m = 0; m < n_models; ++m) {
        RankedEntry e;
        e.model_id = "m" + std::to_string(m);
        e.dev_pairwise_acc = 1.0 - 0.1 * static_cast<double>(m);
        for (std::size_t i = 0; i < n_pairs; ++i)
            e.test.records["q" + std::to_string(i)] = {coin(gen), coin(gen), std::nullopt, std::nullopt};
        r.entries.push_back(std::move(e));
    }
    return r;
}

}  // namespace

TEST_CASE("rank_models orders by dev pairwise accuracy, stable on ties") {
    PairedDataset dev;
    for (const char* id : {"d1", "d2", "d3", "d4", "d5"}) dev.pairs.push_back({id, "a", "b", true, false, {}, {}, {}});
    const PredictionSet test = preds_of("", {{"t1", true, false}});
    // 3/5 correct pairs = 0.6 for "top", 1/5 = 0.2 for A and B
    const PredictionSet good = preds_of("", {{"d1", true, false}, {"d2", true, false}, {"d3", true, false},
                                             {"d4", true, true}, {"d5", false, false}});
    const PredictionSet weak = preds_of("", {{"d1", true, false}, {"d2", true, true}, {"d3", false, true},
                                             {"d4", true, true}, {"d5", false, false}});
    const RankedModelSet r = rank_models({{"A", test, weak}, {"top", test, good}, {"B", test, weak}}, dev);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].model_id == "top");
    CHECK(r.entries[0].dev_pairwise_acc == doctest::Approx(0.6));
    CHECK(r.entries[1].model_id == "A");
    CHECK(r.entries[2].model_id == "B");

    const RankedModelSet single = rank_models({{"only", test, weak}}, dev);
    CHECK(single.entries.size() == 1);

    const RankedModelSet swapped = rank_models({{"top", test, good}, {"A", test, weak}}, dev);
    const RankedModelSet swapped2 = rank_models({{"A", test, weak}, {"top", test, good}}, dev);
    CHECK(swapped.entries[0].model_id == swapped2.entries[0].model_id);

    CHECK_THROWS_AS(rank_models({}, dev), Error);
    CHECK_THROWS_AS(rank_models({{"A", test, weak}, {"B", preds_of("", {{"t2", true, false}}), weak}}, dev), Error);
}

TEST_CASE("resolve_ensemble: no-op when the base is complementary") {
    RankedModelSet r;
    r.entries.push_back({"base", preds_of("base", {{"p1", true, false}, {"p2", false, true}}), 0.9});
    r.entries.push_back({"other", preds_of("other", {{"p1", true, true}, {"p2", false, false}}), 0.5});
    const ResolutionTrace t = resolve_ensemble(r, true, 1);
    CHECK(t.final.records == r.entries[0].test.records);
    CHECK(t.n_random == 0);
    CHECK(t.n_same_output_initial == 0);
    for (const auto& [id, src] : t.source) CHECK(src.kind == SourceKind::Base);
}

TEST_CASE("resolve_ensemble: hand-traced scan") {
    RankedModelSet r;
    r.entries.push_back({"base", preds_of("base", {{"p1", true, false}, {"p2", true, true}, {"p3", false, false}}), 0.9});
    r.entries.push_back({"model2", preds_of("model2", {{"p1", true, true}, {"p2", false, true}, {"p3", true, true}}), 0.7});
    const ResolutionTrace t = resolve_ensemble(r, true, 3);
    CHECK(t.n_same_output_initial == 2);
    CHECK(t.source.at("p1").kind == SourceKind::Base);
    CHECK(t.source.at("p2") == PairSource{SourceKind::Resolved, "model2"});
    CHECK(t.final.records.at("p2").pred_1 == false);
    CHECK(t.final.records.at("p2").pred_2 == true);
    CHECK(t.source.at("p3").kind == SourceKind::Random);
    CHECK(t.n_random == 1);
    CHECK(count_same_output_pairs(t.final) == 0);

    const ResolutionTrace keep = resolve_ensemble(r, false, 3);
    CHECK(keep.source.at("p3").kind == SourceKind::Base);
    CHECK(keep.final.records.at("p3") == r.entries[0].test.records.at("p3"));
    CHECK(count_same_output_pairs(keep.final) == 1);
}

TEST_CASE("resolution invariants over random instances") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n_models = 1 + gen() % 4, n_pairs = 1 + gen() % 12;
        const RankedModelSet r = random_ranking(n_models, n_pairs, gen);
        const std::uint64_t seed = gen();
        const ResolutionTrace t = resolve_ensemble(r, true, seed);
        REQUIRE(count_same_output_pairs(t.final) == 0);
        CHECK(t.source.size() == n_pairs);
        CHECK(t == resolve_ensemble(r, true, seed));

        // provenance: the cited model is the first differentiating one in rank order
        for (const auto& [id, src] : t.source) {
            const auto& base = r.entries[0].test.records.at(id);
            std::optional<std::size_t> first;
            for (std::size_t m = 1; m < r.entries.size() && !first; ++m)
                if (!r.entries[m].test.records.at(id).same_output()) first = m;
            if (!base.same_output()) {
                CHECK(src.kind == SourceKind::Base);
            } else if (first) {
                CHECK(src.kind == SourceKind::Resolved);
                CHECK(src.model_id == r.entries[*first].model_id);
                CHECK(t.final.records.at(id) == r.entries[*first].test.records.at(id));
            } else {
                CHECK(src.kind == SourceKind::Random);
            }
        }
    }
}

TEST_CASE("perturbation makes pairwise equal standard on complementary data") {
    std::mt19937_64 gen(41);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + gen() % 30;
        const PairedDataset data = oracle::random_dataset(n, gen);
        RankedModelSet r;
        for (std::size_t m = 0; m < 1 + gen() % 3; ++m) {
            PredictionSet p = oracle::random_predictions(data, gen);
            r.entries.push_back({"m" + std::to_string(m), p, 0.0});
        }
        const ResolutionTrace t = resolve_ensemble(r, true, gen());
        const oracle::Tally tally = oracle::brute_evaluate(data, t.final);
        CHECK(tally.correct_sentences == 2 * tally.correct_pairs);
    }
}

TEST_CASE("analyze_random_perturbation") {
    const PerturbationAnalysis a = analyze_random_perturbation(371, 2790);
    CHECK(std::abs(100.0 * a.max_gain - 13.29) <= 0.01);
    CHECK(std::abs(100.0 * a.expected_gain - 6.65) <= 0.01);
    CHECK(a.expected_gain == a.max_gain / 2.0);

    const PerturbationAnalysis none = analyze_random_perturbation(0, 10);
    CHECK(none.max_gain == 0.0);
    CHECK(none.expected_gain == 0.0);
    CHECK_THROWS_AS(analyze_random_perturbation(11, 10), Error);
    CHECK_THROWS_AS(analyze_random_perturbation(0, 0), Error);
}

TEST_CASE("Monte-Carlo gain of random perturbation on 371 of 2790 pairs") {
    // Only the 371 same-output pairs can change; every other pair is correct
    // before and after, so the gain is (# coin flips that land right) / 2790.
    PairedDataset changed;
    PredictionSet base;
    std::mt19937_64 gen(53);
    for (int i = 0; i < 371; ++i) {
        const bool l1 = gen() & 1;
        const std::string id = "c" + std::to_string(1000 + i);
        changed.pairs.push_back({id, "a", "b", l1, !l1, {}, {}, {}});
        base.records[id] = {true, true, std::nullopt, std::nullopt};
    }
    double total = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        RankedModelSet r;
        r.entries.push_back({"base", base, 1.0});
        const ResolutionTrace trace = resolve_ensemble(r, true, static_cast<std::uint64_t>(t) * 7919 + 1);
        total += static_cast<double>(oracle::brute_evaluate(changed, trace.final).correct_pairs) / 2790.0;
    }
    CHECK(std::abs(100.0 * total / trials - 6.65) < 0.3);
}

TEST_CASE("simulate_resolution") {
    const SimulationSummary perfect = simulate_resolution({1.0}, 50, 20, 1);
    CHECK(perfect.resolution.mean == 1.0);
    CHECK(perfect.perturb_only.mean == 1.0);

    const SimulationSummary s = simulate_resolution({0.8, 0.75}, 500, 2000, 2);
    // exact expectations: base 0.64, perturbation 0.64 + 0.32/2, resolution 0.64 + 0.32 * 0.75
    CHECK(std::abs(s.base_only.mean - 0.64) < 4 * s.base_only.half_width);
    CHECK(std::abs(s.perturb_only.mean - 0.80) < 4 * s.perturb_only.half_width);
    CHECK(std::abs(s.resolution.mean - 0.88) < 4 * s.resolution.half_width);
    CHECK(s.resolution.mean - s.perturb_only.mean >= 0.05);

    // A zero-accuracy differentiator flips both statements of every pair, so it
    // always differentiates and is always wrong: resolved pairs score 0 rather
    // than the coin's 1/2, and the strategy falls to the base-only rate.
    const SimulationSummary zero = simulate_resolution({0.8, 0.0}, 500, 2000, 3);
    CHECK(std::abs(zero.resolution.mean - zero.base_only.mean) < 1e-12);
    CHECK(zero.perturb_only.mean - zero.resolution.mean > 0.1);
    CHECK(zero.mean_random_fraction.mean == 0.0);

    CHECK(to_json(simulate_resolution({0.7, 0.6}, 40, 50, 9)) == to_json(simulate_resolution({0.7, 0.6}, 40, 50, 9)));
    CHECK_THROWS_AS(simulate_resolution({}, 10, 10, 0), Error);
    CHECK_THROWS_AS(simulate_resolution({1.5}, 10, 10, 0), Error);
}
