#include "pairkit/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <numeric>

#include "pairkit/error.hpp"
#include "pairkit/rng.hpp"

namespace pairkit {

using nlohmann::json;

namespace {

std::array<std::span<double>, 6> blocks(ModelGradients& g) {
    return {std::span<double>(g.w_embed.data), std::span<double>(g.b_embed), std::span<double>(g.w_cls),
            std::span<double>(&g.b_cls, 1),    std::span<double>(g.w_proj.data), std::span<double>(g.b_proj)};
}

std::array<std::span<double>, 6> blocks(ToyModel& m) {
    return {std::span<double>(m.w_embed.data), std::span<double>(m.b_embed), std::span<double>(m.w_cls),
            std::span<double>(&m.b_cls, 1),    std::span<double>(m.w_proj.data), std::span<double>(m.b_proj)};
}

// log(1 + e^x) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

bool same_shape(const ModelConfig& a, const ModelConfig& b) {
    return a.hash_dim == b.hash_dim && a.embed_dim == b.embed_dim && a.proj_dim == b.proj_dim;
}

DevPoint evaluate_dev(const ToyModel& model, const PairedDataset& dev, std::int64_t step, double eps) {
    DevPoint point;
    point.step = step;
    point.metrics = evaluate(dev, predict(model, dev));
    point.mean_pair_similarity = mean_pair_similarity(model, dev, eps);
    return point;
}

// Shuffled pass over pair indices; reshuffles when the next batch would run past the end.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed) : order_(n), batch_(std::min(batch, n)), rng_(seed) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        rng_.shuffle(std::span<std::size_t>(order_));
    }

    std::span<const std::size_t> next() {
        if (cursor_ + batch_ > order_.size()) {
            rng_.shuffle(std::span<std::size_t>(order_));
            cursor_ = 0;
        }
        std::span<const std::size_t> out(order_.data() + cursor_, batch_);
        cursor_ += batch_;
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t batch_;
    std::size_t cursor_ = 0;
    Rng rng_;
};

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Validation, msg); };
    if (batch_pairs < 1) fail("batch_pairs must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("adam betas must lie in [0, 1)");
    if (warmup_steps < 0) fail("warmup_steps must be >= 0");
    if (max_steps < 1) fail("max_steps must be >= 1");
    if (!(lambda_pcl >= 0.0) || !std::isfinite(lambda_pcl)) fail("lambda_pcl must be >= 0");
    if (eval_every < 1) fail("eval_every must be >= 1");
    if (accumulate_steps < 1) fail("accumulate_steps must be >= 1");
    pcl.validate();
}

json to_json(const TrainConfig& cfg) {
    return {{"batch_pairs", cfg.batch_pairs},
            {"lr", cfg.lr},
            {"weight_decay", cfg.weight_decay},
            {"adam_eps", cfg.adam_eps},
            {"adam_betas", {cfg.beta1, cfg.beta2}},
            {"warmup_steps", cfg.warmup_steps},
            {"max_steps", cfg.max_steps},
            {"lambda_pcl", cfg.lambda_pcl},
            {"pcl",
             {{"temperature", cfg.pcl.temperature},
              {"mode", to_string(cfg.pcl.mode)},
              {"norm_epsilon", cfg.pcl.norm_epsilon}}},
            {"seed", cfg.seed},
            {"eval_every", cfg.eval_every},
            {"accumulate_steps", cfg.accumulate_steps}};
}

TrainConfig train_config_from_json(const json& doc) {
    TrainConfig cfg;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "batch_pairs") cfg.batch_pairs = value.get<std::size_t>();
            else if (key == "lr") cfg.lr = value.get<double>();
            else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
            else if (key == "adam_eps") cfg.adam_eps = value.get<double>();
            else if (key == "adam_betas") {
                const auto betas = value.get<std::vector<double>>();
                if (betas.size() != 2) throw Error(ErrorKind::Validation, "adam_betas needs two values");
                cfg.beta1 = betas[0];
                cfg.beta2 = betas[1];
            } else if (key == "warmup_steps") cfg.warmup_steps = value.get<std::int64_t>();
            else if (key == "max_steps") cfg.max_steps = value.get<std::int64_t>();
            else if (key == "lambda_pcl") cfg.lambda_pcl = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "eval_every") cfg.eval_every = value.get<std::int64_t>();
            else if (key == "accumulate_steps") cfg.accumulate_steps = value.get<std::size_t>();
            else if (key == "pcl") {
                for (const auto& [pkey, pvalue] : value.items()) {
                    if (pkey == "temperature") cfg.pcl.temperature = pvalue.get<double>();
                    else if (pkey == "mode") cfg.pcl.mode = parse_pcl_mode(pvalue.get<std::string>());
                    else if (pkey == "norm_epsilon") cfg.pcl.norm_epsilon = pvalue.get<double>();
                    else throw Error(ErrorKind::Validation, "unknown pcl config key '" + pkey + "'");
                }
            } else if (key == "comment") {
                continue;
            } else {
                throw Error(ErrorKind::Validation, "unknown train config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("train config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

double learning_rate_at(const TrainConfig& cfg, std::int64_t step) {
    if (cfg.warmup_steps <= 0 || step >= cfg.warmup_steps) return cfg.lr;
    return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
}

AdamW::AdamW(const ModelConfig& shape, double beta1, double beta2, double eps, double weight_decay)
    : m_(ModelGradients::zeros_like(shape)),
      v_(ModelGradients::zeros_like(shape)),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {}

void AdamW::step(ToyModel& model, ModelGradients& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto params = blocks(model);
    auto g = blocks(grads);
    auto m = blocks(m_);
    auto v = blocks(v_);
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double gi = g[b][i];
            m[b][i] = beta1_ * m[b][i] + (1.0 - beta1_) * gi;
            v[b][i] = beta2_ * v[b][i] + (1.0 - beta2_) * gi * gi;
            const double update = (m[b][i] / c1) / (std::sqrt(v[b][i] / c2) + eps_);
            params[b][i] -= lr * (update + weight_decay_ * params[b][i]);
        }
    }
}

ObjectiveResult compute_objective(const ToyModel& model, std::span<const StatementPair> batch,
                                  const TrainConfig& cfg) {
    const std::size_t n = batch.size();
    if (n == 0) throw Error(ErrorKind::Validation, "objective needs at least one pair");
    const std::size_t micro = std::min(cfg.accumulate_steps, n);
    const double n_sentences = 2.0 * static_cast<double>(n);

    ObjectiveResult out;
    out.grads = ModelGradients::zeros_like(model.config);
    std::size_t begin = 0;
    for (std::size_t mb = 0; mb < micro; ++mb) {
        const std::size_t len = n / micro + (mb < n % micro ? 1 : 0);
        auto pairs = batch.subspan(begin, len);
        begin += len;

        std::vector<ForwardTrace> traces;
        std::vector<double> d_logit;
        traces.reserve(2 * len);
        EmbeddingBatch emb{Matrix(2 * len, model.config.proj_dim)};
        for (const StatementPair& pair : pairs) {
            for (auto [text, label] : {std::pair{&pair.sent_1, pair.label_1}, std::pair{&pair.sent_2, pair.label_2}}) {
                ForwardTrace t = forward(model, *text);
                const double y = label ? 1.0 : 0.0;
                out.ce += (softplus(t.logit) - y * t.logit) / n_sentences;
                d_logit.push_back((sigmoid(t.logit) - y) / n_sentences);
                std::copy(t.projection.begin(), t.projection.end(), emb.vectors.row(traces.size()).begin());
                traces.push_back(std::move(t));
            }
        }

        const PclResult pcl = pcl_backward(emb, cfg.pcl);
        const double share = static_cast<double>(len) / static_cast<double>(n);
        out.pcl += share * pcl.loss;
        Matrix d_proj = pcl.grad;
        for (double& x : d_proj.data) x *= cfg.lambda_pcl * share;

        out.grads += backward(model, traces, d_logit, d_proj);
    }
    out.total = out.ce + cfg.lambda_pcl * out.pcl;
    return out;
}

const DevPoint& TrainReport::best() const {
    for (const auto& p : dev_curve) {
        if (p.step == best_step) return p;
    }
    throw Error(ErrorKind::Validation, "best_step missing from dev curve");
}

json to_json(const TrainReport& report) {
    json losses = json::array();
    for (const auto& p : report.loss_curve)
        losses.push_back({{"step", p.step}, {"ce", p.ce}, {"pcl", p.pcl}, {"total", p.total}});
    json dev = json::array();
    for (const auto& p : report.dev_curve) {
        json entry = to_json(p.metrics);
        entry["step"] = p.step;
        entry["mean_pair_similarity"] = p.mean_pair_similarity;
        dev.push_back(entry);
    }
    return {{"pcl_mode", to_string(report.pcl_mode)},
            {"best_step", report.best_step},
            {"loss_curve", losses},
            {"dev_curve", dev}};
}

PredictionSet predict(const ToyModel& model, const PairedDataset& data, std::string model_id) {
    PredictionSet preds;
    preds.model_id = std::move(model_id);
    for (const auto& pair : data.pairs) {
        const double s1 = forward(model, pair.sent_1).logit;
        const double s2 = forward(model, pair.sent_2).logit;
        preds.records[pair.id] = {s1 >= 0.0, s2 >= 0.0, s1, s2};
    }
    return preds;
}

double mean_pair_similarity(const ToyModel& model, const PairedDataset& data, double eps) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const auto& pair : data.pairs) {
        const auto a = forward(model, pair.sent_1).projection;
        const auto b = forward(model, pair.sent_2).projection;
        total += cosine_sim(a, b, eps);
    }
    return total / static_cast<double>(data.size());
}

TrainResult train(const PairedDataset& data, const PairedDataset& dev, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, const std::optional<ToyModel>& init) {
    tcfg.validate();
    mcfg.validate();
    if (data.empty()) throw Error(ErrorKind::Validation, "training set is empty");
    if (dev.empty()) throw Error(ErrorKind::Validation, "dev set is empty");
    if (init && !same_shape(init->config, mcfg))
        throw Error(ErrorKind::Validation, "initial checkpoint shape does not match the model config");

    ToyModel model = init ? *init : ToyModel::initialize(mcfg);
    BatchSampler sampler(data.size(), tcfg.batch_pairs, tcfg.seed);
    AdamW opt(model.config, tcfg.beta1, tcfg.beta2, tcfg.adam_eps, tcfg.weight_decay);

    TrainResult result{model, {}};
    TrainReport& report = result.report;
    report.pcl_mode = tcfg.pcl.mode;
    report.dev_curve.push_back(evaluate_dev(model, dev, 0, tcfg.pcl.norm_epsilon));
    double best_score = report.dev_curve.back().metrics.pairwise_acc;

    std::vector<StatementPair> batch;
    for (std::int64_t step = 1; step <= tcfg.max_steps; ++step) {
        batch.clear();
        for (std::size_t idx : sampler.next()) batch.push_back(data.pairs[idx]);

        ObjectiveResult obj = compute_objective(model, batch, tcfg);
        if (!std::isfinite(obj.total))
            throw Error(ErrorKind::Numeric, "non-finite loss at step " + std::to_string(step));
        report.loss_curve.push_back({step, obj.ce, obj.pcl, obj.total});
        opt.step(model, obj.grads, learning_rate_at(tcfg, step));

        if (step % tcfg.eval_every == 0 || step == tcfg.max_steps) {
            report.dev_curve.push_back(evaluate_dev(model, dev, step, tcfg.pcl.norm_epsilon));
            const double score = report.dev_curve.back().metrics.pairwise_acc;
            if (score > best_score) {
                best_score = score;
                report.best_step = step;
                result.model = model;
            }
        }
    }
    return result;
}

TransferResult knowledge_transfer(const PairedDataset& pretrain, const PairedDataset& finetune,
                                  const PairedDataset& dev, const ModelConfig& mcfg,
                                  const TrainConfig& pre_cfg, const TrainConfig& fine_cfg) {
    TransferResult out;
    if (pre_cfg.max_steps == 0) {
        out.pretrained = ToyModel::initialize(mcfg);
        out.pretrain_report.pcl_mode = pre_cfg.pcl.mode;
        out.pretrain_report.dev_curve.push_back(evaluate_dev(out.pretrained, dev, 0, pre_cfg.pcl.norm_epsilon));
    } else {
        TrainResult stage1 = train(pretrain, dev, mcfg, pre_cfg);
        out.pretrained = std::move(stage1.model);
        out.pretrain_report = std::move(stage1.report);
    }
    TrainResult stage2 = train(finetune, dev, mcfg, fine_cfg, out.pretrained);
    out.model = std::move(stage2.model);
    out.finetune_report = std::move(stage2.report);
    return out;
}

std::vector<FoldResult> cross_validate(const PairedDataset& data, int k, const ModelConfig& mcfg,
                                       const TrainConfig& tcfg, std::uint64_t split_seed) {
    const FoldAssignment folds = kfold_split(data, k, split_seed);
    std::vector<std::future<FoldResult>> jobs;
    for (int i = 0; i < k; ++i) {
        jobs.push_back(std::async(std::launch::async, [&, i] {
            FoldView view = fold_views(data, folds, i);
            ModelConfig m = mcfg;
            TrainConfig t = tcfg;
            m.seed += static_cast<std::uint64_t>(i);
            t.seed += static_cast<std::uint64_t>(i);
            TrainResult trained = train(view.train, view.val, m, t);
            FoldResult fr;
            fr.fold = i;
            fr.val_metrics = evaluate(view.val, predict(trained.model, view.val));
            fr.model = std::move(trained.model);
            fr.report = std::move(trained.report);
            return fr;
        }));
    }
    std::vector<FoldResult> results;
    for (auto& job : jobs) results.push_back(job.get());
    return results;
}

}  // namespace pairkit
