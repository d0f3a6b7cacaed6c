#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pairkit/error.hpp"
#include "pairkit/metrics.hpp"

using namespace pairkit;

namespace {

PairedDataset three_tf() {
    PairedDataset d;
    for (const char* id : {"p1", "p2", "p3"}) d.pairs.push_back({id, "s", "t", true, false, {}, {}, {}});
    return d;
}

PredictionSet preds_of(std::initializer_list<std::tuple<const char*, bool, bool>> rows) {
    PredictionSet p;
    p.model_id = "m";
    for (auto [id, a, b] : rows) p.records[id] = {a, b, std::nullopt, std::nullopt};
    return p;
}

}  // namespace

TEST_CASE("evaluate hand-counted example") {
    const MetricReport r = evaluate(three_tf(), preds_of({{"p1", true, false}, {"p2", true, true}, {"p3", false, true}}));
    // p1 contributes 2 correct statements, p2 one, p3 none
    CHECK(r.correct_sentences == 3);
    CHECK(r.correct_pairs == 1);
    CHECK(r.standard_acc == 0.5);
    CHECK(r.pairwise_acc == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    // tp: p1.1, p2.1 -> 2; fp: p2.2, p3.2 -> 2; fn: p3.1 -> 1
    CHECK(r.f1 == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("perfect predictor") {
    const MetricReport r = evaluate(three_tf(), preds_of({{"p1", true, false}, {"p2", true, false}, {"p3", true, false}}));
    CHECK(r.standard_acc == 1.0);
    CHECK(r.pairwise_acc == 1.0);
    CHECK(r.f1 == 1.0);
}

TEST_CASE("complementary predictions make pairwise equal standard") {
    const MetricReport r = evaluate(three_tf(), preds_of({{"p1", true, false}, {"p2", false, true}, {"p3", true, false}}));
    CHECK(r.correct_sentences == 2 * r.correct_pairs);
    CHECK(r.pairwise_acc == r.standard_acc);
}

TEST_CASE("F1 is zero without true positives") {
    PairedDataset d = three_tf();
    const MetricReport r = evaluate(d, preds_of({{"p1", false, false}, {"p2", false, false}, {"p3", false, false}}));
    CHECK(r.f1 == 0.0);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
}

TEST_CASE("coverage errors") {
    CHECK_THROWS_AS(evaluate(three_tf(), preds_of({{"p1", true, false}, {"p2", true, false}})), Error);
    try {
        evaluate(three_tf(), preds_of({{"p1", true, false}, {"p2", true, false}, {"p3", true, false}, {"zz", true, true}}));
        FAIL("unknown id must be reported");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Coverage);
        CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }
}

TEST_CASE("count_same_output_pairs") {
    CHECK(count_same_output_pairs(preds_of({{"p1", true, false}, {"p2", false, true}})) == 0);
    CHECK(count_same_output_pairs(preds_of({{"p1", true, true}, {"p2", true, false}, {"p3", false, false}})) == 2);
}

TEST_CASE("evaluate matches the brute-force oracle on random instances") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 2000; ++trial) {
        const PairedDataset d = oracle::random_dataset(1 + gen() % 40, gen);
        const PredictionSet p = oracle::random_predictions(d, gen);
        const MetricReport r = evaluate(d, p);
        const oracle::Tally t = oracle::brute_evaluate(d, p);
        REQUIRE(r.correct_sentences == t.correct_sentences);
        REQUIRE(r.correct_pairs == t.correct_pairs);
        CHECK(std::abs(r.standard_acc - t.standard()) <= 1e-12);
        CHECK(std::abs(r.pairwise_acc - t.pairwise()) <= 1e-12);
        CHECK(std::abs(r.f1 - t.f1()) <= 1e-12);
        CHECK(r.pairwise_acc <= r.standard_acc);
        // equality iff no pair is split (exactly one statement right)
        std::size_t split = 0;
        for (const auto& pair : d.pairs) {
            const auto& rec = p.records.at(pair.id);
            split += (rec.pred_1 == pair.label_1) != (rec.pred_2 == pair.label_2);
        }
        CHECK((2 * r.correct_pairs == r.correct_sentences) == (split == 0));
    }
}

TEST_CASE("breakdown equals filter-then-evaluate") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        const PairedDataset d = oracle::random_dataset(5 + gen() % 60, gen, 0.7);
        const PredictionSet p = oracle::random_predictions(d, gen);
        const BreakdownReport b = breakdown(d, p);
        std::size_t labelled = 0, total = 0;
        for (const auto& pair : d.pairs) labelled += pair.has_all_dimensions();
        for (const auto& [key, cell] : b.cells) {
            const auto& [dom, scen, num] = key;
            const PairedDataset sub = filter_by_dimensions(d, dom, scen, num);
            PredictionSet sub_preds;
            for (const auto& pair : sub.pairs) sub_preds.records[pair.id] = p.records.at(pair.id);
            CHECK(cell.n_pairs == sub.size());
            CHECK(cell.n_pairs > 0);
            CHECK(std::abs(cell.pairwise_acc - oracle::brute_evaluate(sub, sub_preds).pairwise()) <= 1e-12);
            total += cell.n_pairs;
        }
        CHECK(total == labelled);
    }
}

TEST_CASE("breakdown edge cases") {
    PairedDataset d = three_tf();
    CHECK(breakdown(d, preds_of({{"p1", true, false}, {"p2", true, false}, {"p3", true, false}})).cells.empty());
    for (auto& p : d.pairs) {
        p.domain = Domain::Physical;
        p.scenario = Scenario::Comparative;
        p.numeracy = true;
    }
    const BreakdownReport b = breakdown(d, preds_of({{"p1", true, false}, {"p2", true, false}, {"p3", true, false}}));
    REQUIRE(b.cells.size() == 1);
    CHECK(b.cells.begin()->second.pairwise_acc == 1.0);
    CHECK(b.cells.begin()->second.n_pairs == 3);
}

TEST_CASE("prediction JSONL parsing") {
    const PredictionSet p = parse_predictions(
        "{\"id\": \"a\", \"pred_1\": true, \"pred_2\": false, \"score_1\": 0.5, \"score_2\": -1.25}\n"
        "\n"
        "{\"id\": \"b\", \"pred_1\": 0, \"pred_2\": 1}\n",
        "m");
    REQUIRE(p.records.size() == 2);
    CHECK(p.records.at("a").score_2 == -1.25);
    CHECK(p.records.at("b").pred_2);
    CHECK(parse_predictions(to_jsonl(p), "m") == p);

    CHECK_THROWS_AS(parse_predictions("{\"id\": \"a\", \"pred_1\": true, \"pred_2\": false, \"score_1\": -0.5}\n", "m"),
                    Error);
    CHECK_THROWS_AS(parse_predictions("{\"id\": \"a\", \"pred_1\": true}\n", "m"), Error);
    CHECK_THROWS_AS(parse_predictions("{\"id\": \"a\", \"pred_1\": true, \"pred_2\": false}\n"
                                      "{\"id\": \"a\", \"pred_1\": true, \"pred_2\": false}\n",
                                      "m"),
                    Error);
    CHECK_THROWS_AS(parse_predictions("not json\n", "m"), Error);
}
