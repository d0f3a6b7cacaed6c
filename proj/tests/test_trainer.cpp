#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "pairkit/error.hpp"
#include "pairkit/synthetic.hpp"
#include "pairkit/trainer.hpp"
#include "test_util.hpp"

using namespace pairkit;

namespace {

struct Corpus {
    PairedDataset train, dev;
};

Corpus corpus(std::uint64_t seed, std::size_t n_train = 160, std::size_t n_dev = 60) {
    const TemplateFamily fam = make_family();
    SyntheticOptions o;
    o.n_pairs = n_train;
    o.seed = seed;
    o.id_prefix = "t";
    Corpus c{make_synthetic_corpus(fam, o, "train"), {}};
    o.n_pairs = n_dev;
    o.seed = seed + 1000;
    o.id_prefix = "d";
    c.dev = make_synthetic_corpus(fam, o, "dev");
    return c;
}

const ModelConfig kSmall{1024, 24, 12, 3};

TrainConfig quick(std::int64_t steps, double lambda = 1.0) {
    TrainConfig t;
    t.max_steps = steps;
    t.lambda_pcl = lambda;
    t.warmup_steps = 20;
    t.lr = 3e-3;
    t.eval_every = 25;
    t.batch_pairs = 16;
    return t;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("warmup schedule") {
    TrainConfig t;
    t.lr = 1e-3;
    t.warmup_steps = 100;
    CHECK(learning_rate_at(t, 0) == 0.0);
    for (std::int64_t s : {1, 37, 50, 99}) CHECK(learning_rate_at(t, s) == t.lr * static_cast<double>(s) / 100.0);
    CHECK(learning_rate_at(t, 100) == t.lr);
    CHECK(learning_rate_at(t, 100000) == t.lr);
    t.warmup_steps = 0;
    CHECK(learning_rate_at(t, 0) == t.lr);
}

TEST_CASE("AdamW: zero gradients give pure exponential shrinkage") {
    ModelConfig cfg{16, 3, 2, 4};
    ToyModel m = ToyModel::initialize(cfg);
    const ToyModel start = m;
    AdamW opt(cfg, 0.9, 0.999, 1e-6, 0.01);
    const double lr = 0.05;
    for (int t = 0; t < 40; ++t) {
        ModelGradients zero = ModelGradients::zeros_like(cfg);
        opt.step(m, zero, lr);
    }
    const double factor = std::pow(1.0 - lr * 0.01, 40);
    for (std::size_t i = 0; i < m.w_embed.data.size(); ++i)
        CHECK(std::abs(m.w_embed.data[i] - start.w_embed.data[i] * factor) <= 1e-15);
}

TEST_CASE("AdamW: first step is sign-like plus decay") {
    ModelConfig cfg{4, 1, 1, 0};
    ToyModel m = ToyModel::zeros(cfg);
    m.w_cls = {0.5};
    ModelGradients g = ModelGradients::zeros_like(cfg);
    g.w_cls = {-0.2};
    AdamW opt(cfg, 0.9, 0.999, 1e-6, 0.1);
    opt.step(m, g, 0.01);
    const double expected = 0.5 - 0.01 * (-0.2 / (0.2 + 1e-6) + 0.1 * 0.5);
    CHECK(std::abs(m.w_cls[0] - expected) < 1e-15);
    CHECK(opt.steps_taken() == 1);
}

TEST_CASE("config validation and JSON") {
    const TrainConfig t = train_config_from_json(nlohmann::json::parse(R"({"lr": 0.002, "pcl": {"mode": "symmetric"}})"));
    CHECK(t.lr == 0.002);
    CHECK(t.pcl.mode == PclMode::Symmetric);
    CHECK(t.batch_pairs == 24);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"lambda_pcl": -1})")), Error);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"lr": 0})")), Error);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"max_steps": 0})")), Error);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"learning_rate": 1})")), Error);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"pcl": {"temperature": -0.5}})")), Error);
    const TrainConfig round = train_config_from_json(to_json(t));
    CHECK(to_json(round) == to_json(t));
}

TEST_CASE("gradient accumulation keeps CE exact") {
    const Corpus c = corpus(4, 12, 4);
    const ToyModel m = ToyModel::initialize(kSmall);
    TrainConfig one = quick(1, 0.0), three = quick(1, 0.0);
    three.accumulate_steps = 3;
    const ObjectiveResult a = compute_objective(m, c.train.pairs, one);
    const ObjectiveResult b = compute_objective(m, c.train.pairs, three);
    CHECK(std::abs(a.ce - b.ce) < 1e-15);
    for (std::size_t i = 0; i < a.grads.w_cls.size(); ++i) CHECK(std::abs(a.grads.w_cls[i] - b.grads.w_cls[i]) < 1e-15);

    one.lambda_pcl = three.lambda_pcl = 1.0;
    // the micro-batch denominators see fewer negatives
    CHECK(compute_objective(m, c.train.pairs, one).pcl != doctest::Approx(compute_objective(m, c.train.pairs, three).pcl));
}

TEST_CASE("CE-only training separates the template corpus") {
    const Corpus c = corpus(1);
    TrainConfig t = quick(400, 0.0);
    const TrainResult r = train(c.train, c.dev, kSmall, t);
    CHECK(r.report.best().metrics.standard_acc >= 0.95);
    CHECK(evaluate(c.dev, predict(r.model, c.dev)).pairwise_acc == r.report.best().metrics.pairwise_acc);
}

TEST_CASE("training is deterministic and reduces the loss") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Corpus c = corpus(seed);
        TrainConfig t = quick(200);
        t.seed = seed;
        const TrainResult a = train(c.train, c.dev, kSmall, t);
        const TrainResult b = train(c.train, c.dev, kSmall, t);
        REQUIRE(a.report.loss_curve.size() == 200);
        for (std::size_t i = 0; i < a.report.loss_curve.size(); ++i)
            CHECK(a.report.loss_curve[i].total == b.report.loss_curve[i].total);
        CHECK(a.model == b.model);

        std::vector<double> first, second;
        for (const auto& p : a.report.loss_curve) (p.step <= 100 ? first : second).push_back(p.total);
        CHECK(median(second) < median(first));

        // curves are ordered and best_step is one of the evaluated steps
        for (std::size_t i = 1; i < a.report.dev_curve.size(); ++i)
            CHECK(a.report.dev_curve[i].step > a.report.dev_curve[i - 1].step);
        CHECK_NOTHROW(a.report.best());
    }
}

TEST_CASE("non-finite loss aborts with the step") {
    const Corpus c = corpus(2, 20, 10);
    ToyModel init = ToyModel::initialize(kSmall);
    init.b_cls = NAN;
    try {
        train(c.train, c.dev, kSmall, quick(5), init);
        FAIL("expected abort");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
    ModelConfig other = kSmall;
    other.hash_dim = 512;
    CHECK_THROWS_AS(train(c.train, c.dev, other, quick(5), ToyModel::initialize(kSmall)), Error);
    CHECK_THROWS_AS(train(PairedDataset{}, c.dev, kSmall, quick(5)), Error);
}

TEST_CASE("contrastive modes move pair similarity in opposite directions") {
    const Corpus c = corpus(6);
    TrainConfig t = quick(200);
    const TrainResult lit = train(c.train, c.dev, kSmall, t);
    t.pcl.mode = PclMode::PushApart;
    const TrainResult push = train(c.train, c.dev, kSmall, t);
    const double start = lit.report.dev_curve.front().mean_pair_similarity;
    CHECK(push.report.dev_curve.front().mean_pair_similarity == start);
    CHECK(mean_pair_similarity(lit.model, c.dev) > start);
    CHECK(mean_pair_similarity(push.model, c.dev) < start);
}

TEST_CASE("knowledge transfer with zero pretraining steps equals plain training") {
    const Corpus c = corpus(3);
    TrainConfig pre = quick(50);
    pre.max_steps = 0;
    const TrainConfig fine = quick(100);
    const TransferResult kt = knowledge_transfer(c.train, c.train, c.dev, kSmall, pre, fine);
    const TrainResult plain = train(c.train, c.dev, kSmall, fine);
    CHECK(kt.model == plain.model);
    CHECK(kt.finetune_report.best_step == plain.report.best_step);
    CHECK(kt.finetune_report.loss_curve.back().total == plain.report.loss_curve.back().total);
}

TEST_CASE("checkpoint between stages does not change stage 2") {
    const Corpus a = corpus(10), b = corpus(20);
    const TrainConfig pre = quick(60), fine = quick(40);
    const TransferResult kt = knowledge_transfer(a.train, b.train, b.dev, kSmall, pre, fine);

    testutil::TempDir dir;
    const TrainResult stage1 = train(a.train, b.dev, kSmall, pre);
    save_checkpoint({stage1.model, stage1.report.best_step, pre.pcl.mode, pre.lambda_pcl}, dir.file("s1.json"));
    const Checkpoint reloaded = load_checkpoint(dir.file("s1.json"));
    const TrainResult stage2 = train(b.train, b.dev, kSmall, fine, reloaded.model);
    CHECK(stage2.report.loss_curve.front().total == kt.finetune_report.loss_curve.front().total);
    CHECK(stage2.model == kt.model);
}

TEST_CASE("cross_validate covers every pair once") {
    const Corpus c = corpus(7, 40, 10);
    TrainConfig t = quick(30);
    const auto folds = cross_validate(c.train, 2, kSmall, t, 5);
    REQUIRE(folds.size() == 2);
    const FoldAssignment fa = kfold_split(c.train, 2, 5);
    std::set<std::string> seen;
    for (const FoldResult& f : folds) {
        const FoldView v = fold_views(c.train, fa, f.fold);
        for (const auto& p : v.val.pairs) CHECK(seen.insert(p.id).second);
        const oracle::Tally tally = oracle::brute_evaluate(v.val, predict(f.model, v.val));
        CHECK(f.val_metrics.correct_pairs == tally.correct_pairs);
        CHECK(f.val_metrics.correct_sentences == tally.correct_sentences);
        CHECK(f.val_metrics.n_pairs == v.val.size());
    }
    CHECK(seen.size() == c.train.size());

    const auto five = cross_validate(c.train, 5, kSmall, t, 5);
    CHECK(five.size() == 5);
    const auto again = cross_validate(c.train, 5, kSmall, t, 5);
    for (std::size_t i = 0; i < five.size(); ++i) CHECK(five[i].model == again[i].model);
}

TEST_CASE("bundled config presets parse") {
    std::size_t seen = 0;
    for (const auto& entry : std::filesystem::directory_iterator(PAIRKIT_CONFIG_DIR "/presets")) {
        INFO(entry.path().string());
        const auto doc = nlohmann::json::parse(testutil::read_file(entry.path().string()));
        const TrainConfig cfg = train_config_from_json(doc.at("train"));
        CHECK_NOTHROW(cfg.validate());
        if (doc.contains("pretrain")) CHECK_NOTHROW(train_config_from_json(doc.at("pretrain")).validate());
        ++seen;
    }
    CHECK(seen == 15);
}
