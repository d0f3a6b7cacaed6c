#include "pairkit/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "pairkit/error.hpp"
#include "pairkit/hash.hpp"
#include "pairkit/rng.hpp"

namespace pairkit {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "pairkit-checkpoint";
constexpr int kCheckpointVersion = 1;

bool token_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

void fill_uniform(std::span<double> values, double bound, Rng& rng) {
    for (double& v : values) v = rng.uniform(-bound, bound);
}

void check_shape(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::Validation, "shape mismatch: " + what);
}

std::vector<double> read_vector(const json& doc, const char* key, std::size_t size) {
    auto v = doc.at(key).get<std::vector<double>>();
    check_shape(v.size() == size, std::string(key) + " has " + std::to_string(v.size()) + " entries, expected " +
                                      std::to_string(size));
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }))
        throw Error(ErrorKind::Numeric, std::string(key) + " contains non-finite values");
    return v;
}

}  // namespace

void ModelConfig::validate() const {
    if (hash_dim < 1 || embed_dim < 1 || proj_dim < 1)
        throw Error(ErrorKind::Validation, "model dimensions must all be >= 1");
}

SparseFeatures featurize(std::string_view text, std::size_t hash_dim) {
    std::map<std::size_t, double> counts;
    std::size_t n_tokens = 0;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        ++counts[static_cast<std::size_t>(fnv1a64(token) % hash_dim)];
        ++n_tokens;
        token.clear();
    };
    for (unsigned char c : text) {
        if (token_byte(c)) token.push_back(static_cast<char>(std::tolower(c)));
        else flush();
    }
    flush();

    SparseFeatures f;
    if (n_tokens == 0) return f;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_tokens));
    f.entries.reserve(counts.size());
    for (const auto& [bucket, count] : counts) f.entries.emplace_back(bucket, count * scale);
    return f;
}

ToyModel ToyModel::zeros(const ModelConfig& cfg) {
    cfg.validate();
    ToyModel m;
    m.config = cfg;
    m.w_embed = Matrix(cfg.hash_dim, cfg.embed_dim);
    m.b_embed.assign(cfg.embed_dim, 0.0);
    m.w_cls.assign(cfg.embed_dim, 0.0);
    m.w_proj = Matrix(cfg.embed_dim, cfg.proj_dim);
    m.b_proj.assign(cfg.proj_dim, 0.0);
    return m;
}

ToyModel ToyModel::initialize(const ModelConfig& cfg) {
    ToyModel m = zeros(cfg);
    Rng rng(cfg.seed);
    fill_uniform(m.w_embed.data, 1.0 / std::sqrt(static_cast<double>(cfg.hash_dim)), rng);
    fill_uniform(m.w_cls, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)), rng);
    fill_uniform(m.w_proj.data, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)), rng);
    return m;
}

ForwardTrace forward(const ToyModel& model, std::string_view text) {
    const ModelConfig& cfg = model.config;
    ForwardTrace t;
    t.features = featurize(text, cfg.hash_dim);

    t.hidden = model.b_embed;
    for (const auto& [bucket, value] : t.features.entries) {
        auto row = model.w_embed.row(bucket);
        for (std::size_t j = 0; j < cfg.embed_dim; ++j) t.hidden[j] += value * row[j];
    }
    for (double& h : t.hidden) h = std::tanh(h);

    t.logit = model.b_cls;
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) t.logit += model.w_cls[j] * t.hidden[j];

    t.projection = model.b_proj;
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
        auto row = model.w_proj.row(j);
        for (std::size_t p = 0; p < cfg.proj_dim; ++p) t.projection[p] += t.hidden[j] * row[p];
    }
    return t;
}

ModelGradients ModelGradients::zeros_like(const ModelConfig& cfg) {
    ModelGradients g;
    g.w_embed = Matrix(cfg.hash_dim, cfg.embed_dim);
    g.b_embed.assign(cfg.embed_dim, 0.0);
    g.w_cls.assign(cfg.embed_dim, 0.0);
    g.w_proj = Matrix(cfg.embed_dim, cfg.proj_dim);
    g.b_proj.assign(cfg.proj_dim, 0.0);
    return g;
}

ModelGradients& ModelGradients::operator+=(const ModelGradients& other) {
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
        check_shape(a.size() == b.size(), "gradient accumulation");
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(w_embed.data, other.w_embed.data);
    add(b_embed, other.b_embed);
    add(w_cls, other.w_cls);
    b_cls += other.b_cls;
    add(w_proj.data, other.w_proj.data);
    add(b_proj, other.b_proj);
    return *this;
}

ModelGradients backward(const ToyModel& model, std::span<const ForwardTrace> traces,
                        std::span<const double> d_logit, const Matrix& d_projection) {
    const ModelConfig& cfg = model.config;
    check_shape(d_logit.size() == traces.size(), "d_logit vs traces");
    check_shape(d_projection.rows == traces.size() && d_projection.cols == cfg.proj_dim,
                "d_projection vs traces x proj_dim");

    ModelGradients g = ModelGradients::zeros_like(cfg);
    std::vector<double> d_pre(cfg.embed_dim);
    for (std::size_t s = 0; s < traces.size(); ++s) {
        const ForwardTrace& t = traces[s];
        check_shape(t.hidden.size() == cfg.embed_dim, "trace hidden width");
        const double dl = d_logit[s];
        auto dp = d_projection.row(s);

        g.b_cls += dl;
        for (std::size_t p = 0; p < cfg.proj_dim; ++p) g.b_proj[p] += dp[p];
        for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
            const double h = t.hidden[j];
            g.w_cls[j] += dl * h;
            auto wrow = model.w_proj.row(j);
            auto grow = g.w_proj.row(j);
            double dh = dl * model.w_cls[j];
            for (std::size_t p = 0; p < cfg.proj_dim; ++p) {
                grow[p] += h * dp[p];
                dh += wrow[p] * dp[p];
            }
            d_pre[j] = dh * (1.0 - h * h);
            g.b_embed[j] += d_pre[j];
        }
        for (const auto& [bucket, value] : t.features.entries) {
            auto grow = g.w_embed.row(bucket);
            for (std::size_t j = 0; j < cfg.embed_dim; ++j) grow[j] += value * d_pre[j];
        }
    }
    return g;
}

json to_json(const ModelConfig& cfg) {
    return {{"hash_dim", cfg.hash_dim}, {"embed_dim", cfg.embed_dim}, {"proj_dim", cfg.proj_dim}, {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const json& doc) {
    ModelConfig cfg;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "hash_dim") cfg.hash_dim = value.get<std::size_t>();
            else if (key == "embed_dim") cfg.embed_dim = value.get<std::size_t>();
            else if (key == "proj_dim") cfg.proj_dim = value.get<std::size_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else throw Error(ErrorKind::Validation, "unknown model config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("model config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json to_json(const Checkpoint& ckpt) {
    const ToyModel& m = ckpt.model;
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"config", to_json(m.config)},
            {"step", ckpt.step},
            {"pcl_mode", to_string(ckpt.pcl_mode)},
            {"lambda_pcl", ckpt.lambda_pcl},
            {"params",
             {{"w_embed", m.w_embed.data},
              {"b_embed", m.b_embed},
              {"w_cls", m.w_cls},
              {"b_cls", m.b_cls},
              {"w_proj", m.w_proj.data},
              {"b_proj", m.b_proj}}}};
}

Checkpoint checkpoint_from_json(const json& doc) {
    try {
        if (doc.value("format", std::string{}) != kCheckpointFormat)
            throw Error(ErrorKind::Parse, "not a pairkit checkpoint");
        if (doc.at("version").get<int>() != kCheckpointVersion)
            throw Error(ErrorKind::Parse, "unsupported checkpoint version " + doc.at("version").dump());
        Checkpoint ckpt;
        ckpt.model = ToyModel::zeros(model_config_from_json(doc.at("config")));
        ckpt.step = doc.at("step").get<std::int64_t>();
        ckpt.pcl_mode = parse_pcl_mode(doc.at("pcl_mode").get<std::string>());
        ckpt.lambda_pcl = doc.value("lambda_pcl", 0.0);
        const json& p = doc.at("params");
        const ModelConfig& cfg = ckpt.model.config;
        ToyModel& m = ckpt.model;
        m.w_embed.data = read_vector(p, "w_embed", cfg.hash_dim * cfg.embed_dim);
        m.b_embed = read_vector(p, "b_embed", cfg.embed_dim);
        m.w_cls = read_vector(p, "w_cls", cfg.embed_dim);
        m.b_cls = p.at("b_cls").get<double>();
        m.w_proj.data = read_vector(p, "w_proj", cfg.embed_dim * cfg.proj_dim);
        m.b_proj = read_vector(p, "b_proj", cfg.proj_dim);
        return ckpt;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path);
    try {
        return checkpoint_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
}

}  // namespace pairkit
