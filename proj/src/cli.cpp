#include "pairkit/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pairkit/dataset.hpp"
#include "pairkit/ensemble.hpp"
#include "pairkit/error.hpp"
#include "pairkit/hash.hpp"
#include "pairkit/metrics.hpp"
#include "pairkit/model.hpp"
#include "pairkit/synthetic.hpp"
#include "pairkit/trainer.hpp"

namespace pairkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> logger() {
    static auto log = [] {
        auto l = spdlog::stderr_color_st("pairkit");
        l->set_pattern("[%l] %v");
        l->set_level(spdlog::level::warn);
        if (const char* env = std::getenv("PAIRKIT_LOG")) l->set_level(spdlog::level::from_str(env));
        return l;
    }();
    return log;
}

void write_text(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << text;
}

void write_json(const std::string& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
}

std::uint64_t parse_seed(const std::string& text) {
    if (text == "random") return (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Usage, "seed must be an unsigned integer or 'random', got '" + text + "'");
    }
}

/// Collects inputs and outputs of one run and writes the manifest beside them.
class Manifest {
public:
    explicit Manifest(const CLI::App& sub) {
        command_["subcommand"] = sub.get_name();
        json flags = json::object();
        for (const CLI::Option* opt : sub.get_options()) {
            const std::string name = opt->get_name(false, false);
            if (name.empty() || name == "--help") continue;
            if (opt->count() > 0) flags[name] = opt->results();
            else if (!opt->get_default_str().empty()) flags[name] = std::vector<std::string>{opt->get_default_str()};
        }
        command_["flags"] = flags;
    }

    void input(const std::string& path) { inputs_[path] = file_digest(path); }
    void output(const std::string& path) { outputs_.push_back(path); }
    void seed(std::uint64_t s) { seed_ = s; }

    void write(const std::string& path) const {
        json doc = {{"command", command_},
                    {"input_hashes", inputs_},
                    {"seed", seed_ ? json(*seed_) : json(nullptr)},
                    {"artifact_paths", outputs_}};
        write_json(path, doc);
    }

private:
    json command_;
    json inputs_ = json::object();
    std::vector<std::string> outputs_;
    std::optional<std::uint64_t> seed_;
};

PairedDataset load(const std::string& path, bool lenient, Manifest& manifest) {
    manifest.input(path);
    LoadResult r = load_dataset(path, lenient ? LoadMode::Lenient : LoadMode::Strict);
    for (const auto& w : r.warnings) logger()->warn("{}: dropped record: {}", path, w);
    if (r.dropped > 0) logger()->warn("{}: dropped {} invalid record(s)", path, r.dropped);
    return std::move(r.dataset);
}

// ---- split ----------------------------------------------------------------

struct SplitArgs {
    std::string data, out, seed;
    int k = 0;
    bool lenient = false;
};

int cmd_split(const SplitArgs& a, const CLI::App& sub) {
    Manifest manifest(sub);
    if (a.k < 2) throw Error(ErrorKind::Usage, "--k must be >= 2");
    const std::uint64_t seed = parse_seed(a.seed);
    manifest.seed(seed);
    const PairedDataset data = load(a.data, a.lenient, manifest);
    const FoldAssignment folds = kfold_split(data, a.k, seed);
    write_json(a.out, to_json(folds));
    manifest.output(a.out);
    manifest.write(a.out + ".manifest.json");

    const auto sizes = folds.fold_sizes();
    for (std::size_t i = 0; i < sizes.size(); ++i) std::cout << "fold " << i << ": " << sizes[i] << " pairs\n";
    return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string train, dev, config, init, pretrain, out, seed;
    bool lenient = false;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
    Manifest manifest(sub);
    if (!a.init.empty() && !a.pretrain.empty())
        throw Error(ErrorKind::Usage, "--init and --pretrain are mutually exclusive");

    manifest.input(a.config);
    const json cfg = read_json(a.config);
    for (const auto& [key, value] : cfg.items()) {
        if (key != "model" && key != "train" && key != "pretrain" && key != "comment")
            throw Error(ErrorKind::Validation, "unknown config section '" + key + "'");
    }
    ModelConfig mcfg = model_config_from_json(cfg.value("model", json::object()));
    TrainConfig tcfg = train_config_from_json(cfg.value("train", json::object()));
    TrainConfig pre_cfg = cfg.contains("pretrain") ? train_config_from_json(cfg.at("pretrain")) : tcfg;
    if (!a.seed.empty()) {
        const std::uint64_t s = parse_seed(a.seed);
        mcfg.seed = tcfg.seed = pre_cfg.seed = s;
    }
    manifest.seed(tcfg.seed);

    const PairedDataset data = load(a.train, a.lenient, manifest);
    const PairedDataset dev = load(a.dev, a.lenient, manifest);
    fs::create_directories(a.out);
    const std::string out = (fs::path(a.out) / "").string();

    auto save = [&](const ToyModel& model, const TrainReport& report, const TrainConfig& used, const std::string& stem) {
        save_checkpoint({model, report.best_step, used.pcl.mode, used.lambda_pcl}, out + stem + ".ckpt.json");
        json r = to_json(report);
        r["config"] = {{"model", to_json(model.config)}, {"train", to_json(used)}};
        write_json(out + stem + "_report.json", r);
        manifest.output(out + stem + ".ckpt.json");
        manifest.output(out + stem + "_report.json");
        const auto& best = report.best();
        std::cout << stem << ": best_step " << report.best_step << "  dev pairwise " << best.metrics.pairwise_acc
                  << "  standard " << best.metrics.standard_acc << "  f1 " << best.metrics.f1 << '\n';
    };

    if (!a.pretrain.empty()) {
        const PairedDataset pre = load(a.pretrain, a.lenient, manifest);
        logger()->info("stage 1: pretraining on {} pairs", pre.size());
        TransferResult r = knowledge_transfer(pre, data, dev, mcfg, pre_cfg, tcfg);
        save(r.pretrained, r.pretrain_report, pre_cfg, "pretrain");
        save(r.model, r.finetune_report, tcfg, "model");
    } else {
        std::optional<ToyModel> init;
        if (!a.init.empty()) {
            manifest.input(a.init);
            init = load_checkpoint(a.init).model;
        }
        TrainResult r = train(data, dev, mcfg, tcfg, init);
        save(r.model, r.report, tcfg, "model");
    }
    manifest.write(out + "manifest.json");
    return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string data, checkpoint, preds, emit_preds, out, dump_similarities;
    bool breakdown = false, verbose = false, json_stdout = false, lenient = false;
};

int cmd_eval(const EvalArgs& a, const CLI::App& sub) {
    Manifest manifest(sub);
    if (a.checkpoint.empty() == a.preds.empty())
        throw Error(ErrorKind::Usage, "exactly one of --checkpoint or --preds is required");
    const PairedDataset data = load(a.data, a.lenient, manifest);

    PredictionSet preds;
    if (!a.checkpoint.empty()) {
        manifest.input(a.checkpoint);
        const Checkpoint ckpt = load_checkpoint(a.checkpoint);
        preds = predict(ckpt.model, data, a.checkpoint);
        if (!a.emit_preds.empty()) {
            write_text(a.emit_preds, to_jsonl(preds));
            manifest.output(a.emit_preds);
        }
        if (!a.dump_similarities.empty()) {
            json sims = json::object();
            for (const auto& p : data.pairs)
                sims[p.id] = cosine_sim(forward(ckpt.model, p.sent_1).projection,
                                        forward(ckpt.model, p.sent_2).projection);
            write_json(a.dump_similarities, sims);
            manifest.output(a.dump_similarities);
        }
    } else {
        if (!a.emit_preds.empty() || !a.dump_similarities.empty())
            throw Error(ErrorKind::Usage, "--emit-preds and --dump-similarities need --checkpoint");
        manifest.input(a.preds);
        preds = load_predictions(a.preds, a.preds);
    }

    const MetricReport report = evaluate(data, preds);
    json doc = {{"metrics", to_json(report, a.verbose)}, {"n_same_output", count_same_output_pairs(preds)}};
    std::string table = render_table(report);
    if (a.breakdown) {
        const BreakdownReport cells = breakdown(data, preds);
        doc["breakdown"] = to_json(cells);
        table += "\n" + render_table(cells);
    }
    if (!a.out.empty()) {
        write_json(a.out, doc);
        manifest.output(a.out);
        manifest.write(a.out + ".manifest.json");
    } else if (!a.emit_preds.empty()) {
        manifest.write(a.emit_preds + ".manifest.json");
    }
    std::cout << (a.json_stdout ? doc.dump(2) + "\n" : table);
    return 0;
}

// ---- ensemble -------------------------------------------------------------

struct EnsembleArgs {
    std::string dev_data, test_data, out, seed;
    std::vector<std::string> models;
    bool perturb = false, lenient = false;
};

int cmd_ensemble(const EnsembleArgs& a, const CLI::App& sub) {
    Manifest manifest(sub);
    const std::uint64_t seed = parse_seed(a.seed);
    manifest.seed(seed);
    const PairedDataset dev = load(a.dev_data, a.lenient, manifest);

    std::vector<Candidate> candidates;
    for (const std::string& spec : a.models) {
        const auto first = spec.find(':');
        const auto last = spec.rfind(':');
        if (first == std::string::npos || first == last || spec.find(':', first + 1) != last)
            throw Error(ErrorKind::Usage, "--model expects id:dev.jsonl:test.jsonl, got '" + spec + "'");
        Candidate c;
        c.model_id = spec.substr(0, first);
        const std::string dev_path = spec.substr(first + 1, last - first - 1);
        const std::string test_path = spec.substr(last + 1);
        manifest.input(dev_path);
        manifest.input(test_path);
        c.dev = load_predictions(dev_path, c.model_id);
        c.test = load_predictions(test_path, c.model_id);
        candidates.push_back(std::move(c));
    }
    const RankedModelSet ranked = rank_models(std::move(candidates), dev);
    const ResolutionTrace trace = resolve_ensemble(ranked, a.perturb, seed);
    const PerturbationAnalysis analysis = analyze_random_perturbation(trace.n_random, trace.final.records.size());

    fs::create_directories(a.out);
    const std::string out = (fs::path(a.out) / "").string();
    json trace_doc = to_json(trace);
    json ranking = json::array();
    for (const auto& e : ranked.entries)
        ranking.push_back({{"model_id", e.model_id}, {"dev_pairwise_acc", e.dev_pairwise_acc}});
    trace_doc["ranking"] = ranking;
    trace_doc["perturb"] = a.perturb;

    write_text(out + "resolved.jsonl", to_jsonl(trace.final));
    write_json(out + "resolution_trace.json", trace_doc);
    write_json(out + "perturbation.json", to_json(analysis));
    for (const char* f : {"resolved.jsonl", "resolution_trace.json", "perturbation.json"}) manifest.output(out + f);

    std::cout << "ranking:";
    for (const auto& e : ranked.entries) std::cout << ' ' << e.model_id << '(' << e.dev_pairwise_acc << ')';
    std::cout << "\nn_same_output_initial " << trace.n_same_output_initial << "\nn_resolved " << trace.n_resolved
              << "\nn_random " << trace.n_random << '\n';

    if (!a.test_data.empty()) {
        const PairedDataset test = load(a.test_data, a.lenient, manifest);
        const MetricReport report = evaluate(test, trace.final);
        write_json(out + "metrics.json", to_json(report, true));
        manifest.output(out + "metrics.json");
        std::cout << render_table(report);
    }
    manifest.write(out + "manifest.json");
    return 0;
}

// ---- analyze-rp -----------------------------------------------------------

struct AnalyzeArgs {
    std::size_t changed = 0, total = 0;
    std::string out;
};

int cmd_analyze(const AnalyzeArgs& a, const CLI::App& sub) {
    Manifest manifest(sub);
    const PerturbationAnalysis r = analyze_random_perturbation(a.changed, a.total);
    std::cout << "changed " << r.n_changed << " of " << r.n_total << " pairs\n";
    std::cout << fmt::format("max_gain {:.2f}%\nexpected_gain {:.2f}%\n", 100.0 * r.max_gain, 100.0 * r.expected_gain);
    if (!a.out.empty()) {
        write_json(a.out, to_json(r));
        manifest.output(a.out);
        manifest.write(a.out + ".manifest.json");
    }
    return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    std::vector<double> acc;
    std::size_t pairs = 500, trials = 10000;
    std::string seed, out;
};

int cmd_simulate(const SimulateArgs& a, const CLI::App& sub) {
    Manifest manifest(sub);
    const std::uint64_t seed = parse_seed(a.seed);
    manifest.seed(seed);
    const SimulationSummary s = simulate_resolution(a.acc, a.pairs, a.trials, seed);
    auto line = [](const char* name, const StrategyStats& st) {
        return fmt::format("{:<14}{:>10.4f} +/- {:.4f}\n", name, st.mean, st.half_width);
    };
    std::cout << fmt::format("{} trials x {} pairs, mean pairwise accuracy\n", s.trials, s.n_pairs)
              << line("base_only", s.base_only) << line("perturb_only", s.perturb_only)
              << line("resolution", s.resolution) << line("random_share", s.mean_random_fraction);
    if (!a.out.empty()) {
        write_json(a.out, to_json(s));
        manifest.output(a.out);
        manifest.write(a.out + ".manifest.json");
    }
    return 0;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::size_t pairs = 200, attr_begin = 0, attr_end = SIZE_MAX, context = 3, family_size = 24;
    std::string seed, prefix = "s", out;
};

int cmd_synth(const SynthArgs& a, const CLI::App& sub) {
    Manifest manifest(sub);
    SyntheticOptions opts;
    opts.n_pairs = a.pairs;
    opts.seed = parse_seed(a.seed);
    opts.id_prefix = a.prefix;
    opts.attr_begin = a.attr_begin;
    opts.attr_end = a.attr_end;
    opts.context_words = a.context;
    manifest.seed(opts.seed);
    const PairedDataset data = make_synthetic_corpus(make_family(a.family_size), opts, a.out);
    write_text(a.out, to_json(data).dump(1) + "\n");
    manifest.output(a.out);
    manifest.write(a.out + ".manifest.json");
    std::cout << "wrote " << data.size() << " pairs to " << a.out << '\n';
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"pairkit: complementary-pair classification toolkit"};
    app.require_subcommand(1);

    SplitArgs split;
    auto* s = app.add_subcommand("split", "Deterministic k-fold assignment of pairs");
    s->add_option("--data", split.data, "Dataset JSON")->required();
    s->add_option("--k", split.k, "Number of folds (>= 2)")->required();
    s->add_option("--seed", split.seed, "Shuffle seed, or 'random'")->required();
    s->add_option("--out", split.out, "Fold assignment JSON")->required();
    s->add_flag("--lenient", split.lenient, "Drop invalid records instead of failing");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the toy classifier with CE + lambda * PCL");
    t->add_option("--train", tr.train, "Training dataset JSON")->required();
    t->add_option("--dev", tr.dev, "Dev dataset JSON (model selection)")->required();
    t->add_option("--config", tr.config, "Config JSON with model/train/pretrain sections")->required();
    t->add_option("--init", tr.init, "Initial checkpoint");
    t->add_option("--pretrain", tr.pretrain, "Pretraining dataset for two-stage training");
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--seed", tr.seed, "Override every seed in the config");
    t->add_flag("--lenient", tr.lenient, "Drop invalid records instead of failing");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Standard/pairwise accuracy, F1 and dimension breakdown");
    e->add_option("--data", ev.data, "Dataset JSON with labels")->required();
    e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint to run");
    e->add_option("--preds", ev.preds, "Prediction JSONL");
    e->add_option("--emit-preds", ev.emit_preds, "Write checkpoint predictions as JSONL");
    e->add_option("--dump-similarities", ev.dump_similarities, "Write per-pair projection cosine similarities");
    e->add_option("--out", ev.out, "Report JSON");
    e->add_flag("--breakdown", ev.breakdown, "Per (domain, scenario, numeracy) pairwise accuracy");
    e->add_flag("--verbose", ev.verbose, "Include precision, recall and raw counts");
    e->add_flag("--json", ev.json_stdout, "Print JSON instead of a table");
    e->add_flag("--lenient", ev.lenient, "Drop invalid records instead of failing");

    EnsembleArgs en;
    auto* n = app.add_subcommand("ensemble", "Ranked same-output resolution with optional random perturbation");
    n->add_option("--dev-data", en.dev_data, "Labelled dev dataset used for ranking")->required();
    n->add_option("--test-data", en.test_data, "Labelled test dataset (optional, for the final report)");
    n->add_option("--model", en.models, "id:dev.jsonl:test.jsonl (repeatable)")->required();
    n->add_flag("--perturb,--random-perturbation,--rule-based-perturbation", en.perturb,
                "Randomly split pairs no model differentiates");
    n->add_option("--seed", en.seed, "Perturbation seed, or 'random'")->required();
    n->add_option("--out", en.out, "Output directory")->required();
    n->add_flag("--lenient", en.lenient, "Drop invalid records instead of failing");

    AnalyzeArgs an;
    auto* r = app.add_subcommand("analyze-rp", "Maximum and expected pairwise gain of random perturbation");
    r->add_option("--changed", an.changed, "Pairs assigned randomly")->required();
    r->add_option("--total", an.total, "Total pairs")->required();
    r->add_option("--out", an.out, "Analysis JSON");

    SimulateArgs si;
    auto* m = app.add_subcommand("simulate", "Monte-Carlo comparison of resolution vs perturbation");
    m->add_option("--acc", si.acc, "Per-statement accuracy of each ranked model, best first")->required();
    m->add_option("--pairs", si.pairs, "Pairs per trial")->capture_default_str();
    m->add_option("--trials", si.trials, "Number of trials")->capture_default_str();
    m->add_option("--seed", si.seed, "Seed, or 'random'")->required();
    m->add_option("--out", si.out, "Summary JSON");

    SynthArgs sy;
    auto* y = app.add_subcommand("synth", "Write a synthetic template corpus");
    y->add_option("--pairs", sy.pairs, "Number of pairs")->capture_default_str();
    y->add_option("--seed", sy.seed, "Seed")->required();
    y->add_option("--prefix", sy.prefix, "Pair id prefix")->capture_default_str();
    y->add_option("--attr-begin", sy.attr_begin, "First attribute word index");
    y->add_option("--attr-end", sy.attr_end, "One past the last attribute word index");
    y->add_option("--context", sy.context, "Context words per statement")->capture_default_str();
    y->add_option("--family-size", sy.family_size, "Attribute words per class")->capture_default_str();
    y->add_option("--out", sy.out, "Dataset JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        std::cerr << "pairkit: error[usage]: " << ex.what() << '\n';
        return 2;
    }

    try {
        if (s->parsed()) return cmd_split(split, *s);
        if (t->parsed()) return cmd_train(tr, *t);
        if (e->parsed()) return cmd_eval(ev, *e);
        if (n->parsed()) return cmd_ensemble(en, *n);
        if (r->parsed()) return cmd_analyze(an, *r);
        if (m->parsed()) return cmd_simulate(si, *m);
        if (y->parsed()) return cmd_synth(sy, *y);
    } catch (const Error& ex) {
        std::cerr << "pairkit: error[" << to_string(ex.kind()) << "]: " << ex.what() << '\n';
        return ex.kind() == ErrorKind::Usage ? 2 : 1;
    } catch (const std::exception& ex) {
        std::cerr << "pairkit: error[internal]: " << ex.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace pairkit::cli
