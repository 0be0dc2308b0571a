#include "vulngraph/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "vulngraph/errors.hpp"
#include "vulngraph/json_util.hpp"

namespace vulngraph {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool contains(std::string_view s, std::string_view part) { return s.find(part) != std::string_view::npos; }

} // namespace

void ModelConfig::validate() const {
    if (feature_dim < 1) {
        throw InputError("model.feature_dim must be >= 1");
    }
    if (hidden < 1 || heads < 1 || hidden % heads != 0) {
        throw InputError("model.hidden must be a positive multiple of model.heads");
    }
    if (layers < 0) {
        throw InputError("model.layers must be >= 0");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw InputError("model.dropout must be in [0, 1)");
    }
    refine.validate();
}

json to_json(const ModelConfig& cfg) {
    return {{"feature_dim", cfg.feature_dim},
            {"hidden", cfg.hidden},
            {"layers", cfg.layers},
            {"heads", cfg.heads},
            {"dropout", cfg.dropout},
            {"refine", sapool::to_json(cfg.refine)},
            {"ablations",
             {{"use_hgr", cfg.ablations.use_hgr},
              {"use_gnn", cfg.ablations.use_gnn},
              {"use_gt", cfg.ablations.use_gt}}}};
}

void from_json(const json& doc, ModelConfig& cfg) {
    using namespace jsonutil;
    require_keys(doc, "model", {"feature_dim", "hidden", "layers", "heads", "dropout", "refine", "ablations"});
    read(doc, "model", "feature_dim", cfg.feature_dim);
    read(doc, "model", "hidden", cfg.hidden);
    read(doc, "model", "layers", cfg.layers);
    read(doc, "model", "heads", cfg.heads);
    read(doc, "model", "dropout", cfg.dropout);
    if (const auto it = doc.find("refine"); it != doc.end()) {
        sapool::from_json(*it, cfg.refine);
    }
    if (const auto it = doc.find("ablations"); it != doc.end()) {
        require_keys(*it, "model.ablations", {"use_hgr", "use_gnn", "use_gt"});
        read(*it, "model.ablations", "use_hgr", cfg.ablations.use_hgr);
        read(*it, "model.ablations", "use_gnn", cfg.ablations.use_gnn);
        read(*it, "model.ablations", "use_gt", cfg.ablations.use_gt);
    }
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    z.set_zero();
    return z;
}

void ModelParams::set_zero() {
    for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

long long ModelParams::size() const {
    long long n = 0;
    for_each([&n](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
}

bool parameter_active(const ModelConfig& cfg, std::string_view name) {
    if (starts_with(name, "pool.") || name == "adapter_pooled") {
        return cfg.ablations.use_hgr;
    }
    if (starts_with(name, "encoder.")) {
        if (contains(name, ".w_g")) {
            return cfg.ablations.use_gnn;
        }
        return cfg.ablations.use_gt;
    }
    return true;
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    Model m;
    m.config = config;
    m.params.pool = sapool::SAPoolParams::init(config.feature_dim, config.hidden, config.dropout, rng);
    m.params.adapter_raw = glorot_uniform(config.feature_dim, config.hidden, rng);
    m.params.adapter_pooled = glorot_uniform(config.hidden, config.hidden, rng);
    m.params.encoder = encoder::EncoderParams::init(config.hidden, config.layers, config.heads, rng);
    m.params.head.w_c1 = glorot_uniform(config.hidden, config.hidden, rng);
    m.params.head.w_c2 = glorot_uniform(config.hidden, 1, rng);
    return m;
}

long long Model::active_parameter_count() const {
    long long n = 0;
    params.for_each([&](const std::string& name, const Matrix& m) {
        if (parameter_active(config, name)) {
            n += m.size();
        }
    });
    return n;
}

ad::Var classify(ad::Var o, ad::Var w_c1, ad::Var w_c2, ad::Var* logit_out) {
    const ad::Var logit = ad::matmul(ad::relu(ad::matmul(o, w_c1)), w_c2);
    if (logit_out != nullptr) {
        *logit_out = logit;
    }
    return ad::sigmoid(logit);
}

double simplification_ratio(std::span<const Prediction> predictions) {
    double in = 0.0;
    double after = 0.0;
    for (const Prediction& p : predictions) {
        in += p.nodes_in;
        after += p.nodes_after;
    }
    return in > 0.0 ? 1.0 - after / in : 0.0;
}

double classify(const RowVector& o, const ClassifierParams& params) {
    ad::Tape tape(false);
    return classify(tape.constant(Matrix(o)), tape.constant(params.w_c1), tape.constant(params.w_c2)).value()(0, 0);
}

ForwardPass forward(ad::Tape& tape, const Model& model, ModelParams* grads, const LabeledGraph& g,
                    const ForwardOptions& opt) {
    const ModelConfig& cfg = model.config;
    const ModelParams& p = model.params;
    if (g.feature_dim() != cfg.feature_dim) {
        throw InputError("graph '" + g.name + "' has feature width " + std::to_string(g.feature_dim()) +
                         ", model expects " + std::to_string(cfg.feature_dim));
    }
    ForwardPass out;
    out.nodes_in = g.node_count();

    ad::Var x;
    Adjacency adjacency;
    if (cfg.ablations.use_hgr) {
        const sapool::BoundParams bp = sapool::bind(tape, p.pool, grads != nullptr ? &grads->pool : nullptr);
        sapool::PoolContext ctx;
        ctx.training = opt.training;
        ctx.rng = opt.rng;
        ctx.frozen = opt.frozen;
        sapool::Refined r = sapool::refine(tape, g, bp, cfg.refine, ctx);
        const ad::Var adapter = r.pooled
                                    ? tape.parameter(p.adapter_pooled, grads != nullptr ? &grads->adapter_pooled : nullptr)
                                    : tape.parameter(p.adapter_raw, grads != nullptr ? &grads->adapter_raw : nullptr);
        x = ad::matmul(r.graph.features, adapter);
        adjacency = std::move(r.graph.adjacency);
        out.origin = std::move(r.graph.origin);
        out.trace = std::move(r.trace);
    } else {
        x = ad::matmul(tape.constant(g.features),
                       tape.parameter(p.adapter_raw, grads != nullptr ? &grads->adapter_raw : nullptr));
        adjacency = g.adjacency;
        out.origin.resize(static_cast<std::size_t>(g.node_count()));
        for (int i = 0; i < g.node_count(); ++i) {
            out.origin[static_cast<std::size_t>(i)] = i;
        }
    }
    out.nodes_after = adjacency.node_count();

    const auto norm = std::make_shared<const SparseMatrix>(normalize_adjacency(adjacency).matrix);
    std::vector<encoder::BoundBlock> blocks;
    blocks.reserve(p.encoder.blocks.size());
    for (std::size_t b = 0; b < p.encoder.blocks.size(); ++b) {
        blocks.push_back(encoder::bind(tape, p.encoder.blocks[b], grads != nullptr ? &grads->encoder.blocks[b] : nullptr));
    }
    const encoder::EncoderOptions eopt{cfg.ablations.use_gnn, cfg.ablations.use_gt};
    out.embedding = encoder::encode_graph(x, norm, blocks, eopt);
    out.probability = classify(out.embedding, tape.parameter(p.head.w_c1, grads != nullptr ? &grads->head.w_c1 : nullptr),
                               tape.parameter(p.head.w_c2, grads != nullptr ? &grads->head.w_c2 : nullptr), &out.logit);
    return out;
}

Prediction predict(const Model& model, const LabeledGraph& g, double threshold) {
    ad::Tape tape(false);
    ForwardPass fp = forward(tape, model, nullptr, g);
    Prediction pred;
    pred.name = g.name;
    pred.probability = fp.probability.value()(0, 0);
    pred.predicted_label = pred.probability >= threshold ? 1 : 0;
    pred.embedding = fp.embedding.value().row(0);
    pred.trace = std::move(fp.trace);
    pred.nodes_in = fp.nodes_in;
    pred.nodes_after = fp.nodes_after;
    return pred;
}

std::vector<Prediction> predict_all(const Model& model, std::span<const LabeledGraph> graphs, double threshold,
                                    int jobs) {
    std::vector<Prediction> out(graphs.size());
    const auto n = graphs.size();
    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = predict(model, graphs[i], threshold);
        }
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) {
                    out[i] = predict(model, graphs[i], threshold);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

std::string config_hash(const json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : config.dump()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
    json tensors = json::object();
    ckpt.model.params.for_each([&](const std::string& name, const Matrix& m) {
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(m.size()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                data.push_back(m(r, c));
            }
        }
        tensors[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
    });
    json cfg = to_json(ckpt.model.config);
    json doc = {{"format", "vulngraph-checkpoint"},
                {"version", kCheckpointVersion},
                {"config_hash", config_hash(cfg)},
                {"config", std::move(cfg)},
                {"tensors", std::move(tensors)},
                {"meta", ckpt.meta}};
    if (ckpt.embedder) {
        doc["embedder"] = ckpt.embedder->to_json();
    }
    return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
    try {
        if (doc.at("format") != "vulngraph-checkpoint") {
            throw InputError("not a checkpoint file");
        }
        if (doc.at("version").get<int>() != kCheckpointVersion) {
            throw InputError("unsupported checkpoint version " + doc.at("version").dump());
        }
        ModelConfig cfg;
        from_json(doc.at("config"), cfg);
        if (config_hash(to_json(cfg)) != doc.at("config_hash").get<std::string>()) {
            throw InputError("checkpoint config hash mismatch");
        }
        Checkpoint ckpt;
        ckpt.model = Model::init(cfg, 0);
        const json& tensors = doc.at("tensors");
        ckpt.model.params.for_each([&](const std::string& name, Matrix& m) {
            const json& t = tensors.at(name);
            const auto rows = t.at("rows").get<Eigen::Index>();
            const auto cols = t.at("cols").get<Eigen::Index>();
            if (rows != m.rows() || cols != m.cols()) {
                throw InputError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                                 std::to_string(cols) + ", config implies " + std::to_string(m.rows()) + "x" +
                                 std::to_string(m.cols()));
            }
            const auto data = t.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
                throw InputError("tensor '" + name + "' has the wrong number of values");
            }
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) {
                    m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
                }
            }
        });
        if (const auto it = doc.find("embedder"); it != doc.end()) {
            ckpt.embedder = TokenEmbedder::from_json(*it);
        }
        if (const auto it = doc.find("meta"); it != doc.end()) {
            ckpt.meta = *it;
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << checkpoint_to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open checkpoint " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw InputError(std::string("malformed checkpoint JSON: ") + e.what());
    }
    return checkpoint_from_json(doc);
}

} // namespace vulngraph
