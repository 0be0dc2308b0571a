#include "vulngraph/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "vulngraph/errors.hpp"

namespace vulngraph {

using nlohmann::json;

namespace {

constexpr int kEmbedderFormatVersion = 1;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

EdgeType parse_etype(const std::string& s, std::size_t edge_pos) {
    if (s == "AST") {
        return EdgeType::Ast;
    }
    if (s == "CFG") {
        return EdgeType::Cfg;
    }
    if (s == "PDG") {
        return EdgeType::Pdg;
    }
    throw InputError("edge " + std::to_string(edge_pos) + ": unknown etype '" + s + "'");
}

const json& field(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw InputError(where + ": missing '" + key + "'");
    }
    return *it;
}

long long as_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) {
        throw InputError(where + ": expected an integer");
    }
    return v.get<long long>();
}

const std::string& as_string(const json& v, const std::string& where) {
    if (!v.is_string()) {
        throw InputError(where + ": expected a string");
    }
    return v.get_ref<const std::string&>();
}

// Multi-character C operators, longest first within each leading character.
constexpr std::array<std::string_view, 24> kOperators = {
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",  "||",  "+=",  "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", "##",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

} // namespace

std::string_view to_string(EdgeType t) {
    switch (t) {
    case EdgeType::Ast:
        return "AST";
    case EdgeType::Cfg:
        return "CFG";
    case EdgeType::Pdg:
        return "PDG";
    }
    return "AST";
}

RawGraphRecord graph_from_json(const json& doc) {
    if (!doc.is_object()) {
        throw InputError("graph document must be a JSON object");
    }
    RawGraphRecord rec;
    rec.name = as_string(field(doc, "name", "graph"), "graph.name");
    const long long label = as_int(field(doc, "label", "graph"), "graph.label");
    if (label != 0 && label != 1) {
        throw InputError("graph.label: must be 0 or 1, got " + std::to_string(label));
    }
    rec.label = static_cast<int>(label);

    const json& nodes = field(doc, "nodes", "graph");
    if (!nodes.is_array()) {
        throw InputError("graph.nodes: expected an array");
    }
    std::unordered_map<long long, int> index_of;
    rec.nodes.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "node " + std::to_string(i);
        const json& n = nodes[i];
        if (!n.is_object()) {
            throw InputError(where + ": expected an object");
        }
        RawNode node;
        node.id = as_int(field(n, "id", where), where + ".id");
        node.code = as_string(field(n, "code", where), where + ".code");
        node.kind = as_string(field(n, "kind", where), where + ".kind");
        if (const auto it = n.find("line"); it != n.end() && !it->is_null()) {
            node.line = static_cast<int>(as_int(*it, where + ".line"));
        }
        if (const auto it = n.find("key"); it != n.end() && !it->is_null()) {
            if (!it->is_boolean()) {
                throw InputError(where + ".key: expected a boolean");
            }
            node.key = it->get<bool>();
        }
        if (!index_of.emplace(node.id, static_cast<int>(i)).second) {
            throw InputError(where + ": duplicate id " + std::to_string(node.id));
        }
        rec.nodes.push_back(std::move(node));
    }

    const json& edges = field(doc, "edges", "graph");
    if (!edges.is_array()) {
        throw InputError("graph.edges: expected an array");
    }
    rec.edges.reserve(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const std::string where = "edge " + std::to_string(k);
        const json& e = edges[k];
        if (!e.is_object()) {
            throw InputError(where + ": expected an object");
        }
        RawEdge edge;
        const long long src = as_int(field(e, "src", where), where + ".src");
        const long long dst = as_int(field(e, "dst", where), where + ".dst");
        edge.etype = parse_etype(as_string(field(e, "etype", where), where + ".etype"), k);
        const auto s = index_of.find(src);
        if (s == index_of.end()) {
            throw InputError(where + ": src references missing id " + std::to_string(src));
        }
        const auto d = index_of.find(dst);
        if (d == index_of.end()) {
            throw InputError(where + ": dst references missing id " + std::to_string(dst));
        }
        edge.src = s->second;
        edge.dst = d->second;
        rec.edges.push_back(edge);
    }
    return rec;
}

RawGraphRecord load_graph_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("malformed JSON: ") + e.what());
    }
    return graph_from_json(doc);
}

json graph_to_json(const RawGraphRecord& rec) {
    json nodes = json::array();
    for (const RawNode& n : rec.nodes) {
        json j = {{"id", n.id}, {"code", n.code}, {"kind", n.kind}};
        if (n.line) {
            j["line"] = *n.line;
        }
        if (n.key) {
            j["key"] = *n.key;
        }
        nodes.push_back(std::move(j));
    }
    json edges = json::array();
    for (const RawEdge& e : rec.edges) {
        edges.push_back({{"src", rec.nodes[static_cast<std::size_t>(e.src)].id},
                         {"dst", rec.nodes[static_cast<std::size_t>(e.dst)].id},
                         {"etype", std::string(to_string(e.etype))}});
    }
    return {{"name", rec.name}, {"label", rec.label}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

std::vector<RawGraphRecord> load_corpus_jsonl(std::string_view text) {
    std::vector<RawGraphRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            try {
                out.push_back(load_graph_json(line));
            } catch (const InputError& e) {
                throw InputError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (end == text.size()) {
            break;
        }
        pos = end + 1;
    }
    return out;
}

std::vector<RawGraphRecord> load_corpus_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open corpus file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_corpus_jsonl(buf.str());
}

std::string corpus_to_jsonl(const std::vector<RawGraphRecord>& records) {
    std::string out;
    for (const RawGraphRecord& r : records) {
        out += graph_to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view code) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = code.size();
    while (i < n) {
        const char c = code[i];
        if (std::isspace(static_cast<unsigned char>(c)) != 0) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        if (ident_start(c)) {
            while (j < n && ident_char(code[j])) {
                ++j;
            }
        } else if (std::isdigit(static_cast<unsigned char>(c)) != 0 ||
                   (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(code[i + 1])) != 0)) {
            // pp-number: digits, letters (suffixes, hex), dots, signed exponents
            while (j < n) {
                const char d = code[j];
                if (ident_char(d) || d == '.') {
                    ++j;
                } else if ((d == '+' || d == '-') &&
                           (code[j - 1] == 'e' || code[j - 1] == 'E' || code[j - 1] == 'p' || code[j - 1] == 'P')) {
                    ++j;
                } else {
                    break;
                }
            }
        } else if (c == '"' || c == '\'') {
            while (j < n && code[j] != c) {
                j += (code[j] == '\\' && j + 1 < n) ? 2 : 1;
            }
            j = std::min(j + 1, n);
        } else {
            for (const std::string_view op : kOperators) {
                if (code.substr(i, op.size()) == op) {
                    j = i + op.size();
                    break;
                }
            }
        }
        tokens.emplace_back(code.substr(i, j - i));
        i = j;
    }
    return tokens;
}

TokenEmbedder TokenEmbedder::hashed(int dim, std::uint64_t seed) {
    if (dim < 1) {
        throw InputError("embedding dimension must be >= 1");
    }
    TokenEmbedder e;
    e.mode_ = Mode::Hash;
    e.dim_ = dim;
    e.seed_ = seed;
    return e;
}

Vector TokenEmbedder::embed(std::string_view token) const {
    if (mode_ == Mode::SkipGram) {
        const auto it = table_.find(std::string(token));
        return it == table_.end() ? Vector::Zero(dim_) : it->second;
    }
    Rng rng(derive_seed(seed_, fnv1a(token)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim_);
    double norm = 0.0;
    while (norm == 0.0) {
        for (int i = 0; i < dim_; ++i) {
            v(i) = normal(rng);
        }
        norm = v.norm();
    }
    return v / norm;
}

json TokenEmbedder::to_json() const {
    json vocab = json::object();
    for (const auto& [tok, vec] : table_) {
        vocab[tok] = std::vector<double>(vec.data(), vec.data() + vec.size());
    }
    return {{"format", "vulngraph-embedder"},
            {"version", kEmbedderFormatVersion},
            {"mode", mode_ == Mode::Hash ? "hash" : "skipgram"},
            {"dim", dim_},
            {"seed", seed_},
            {"vocabulary", std::move(vocab)}};
}

TokenEmbedder TokenEmbedder::from_json(const json& doc) {
    try {
        if (doc.at("format") != "vulngraph-embedder") {
            throw InputError("not an embedder file");
        }
        if (doc.at("version").get<int>() != kEmbedderFormatVersion) {
            throw InputError("unsupported embedder version " + doc.at("version").dump());
        }
        TokenEmbedder e;
        const std::string mode = doc.at("mode").get<std::string>();
        if (mode == "hash") {
            e.mode_ = Mode::Hash;
        } else if (mode == "skipgram") {
            e.mode_ = Mode::SkipGram;
        } else {
            throw InputError("unknown embedder mode '" + mode + "'");
        }
        e.dim_ = doc.at("dim").get<int>();
        if (e.dim_ < 1) {
            throw InputError("embedding dimension must be >= 1");
        }
        e.seed_ = doc.at("seed").get<std::uint64_t>();
        for (const auto& [tok, arr] : doc.at("vocabulary").items()) {
            const auto values = arr.get<std::vector<double>>();
            if (static_cast<int>(values.size()) != e.dim_) {
                throw InputError("vocabulary entry '" + tok + "' has the wrong length");
            }
            e.table_.emplace(tok, Eigen::Map<const Vector>(values.data(), e.dim_));
        }
        return e;
    } catch (const json::exception& ex) {
        throw InputError(std::string("malformed embedder state: ") + ex.what());
    }
}

TokenEmbedder fit_token_embeddings(const std::vector<std::vector<std::string>>& corpus, int dim,
                                   const SkipGramConfig& config, std::uint64_t seed) {
    if (dim < 1) {
        throw InputError("embedding dimension must be >= 1");
    }
    if (config.window < 1 || config.negatives < 0 || config.epochs < 1 || !(config.lr > 0.0)) {
        throw InputError("invalid skip-gram settings");
    }
    std::map<std::string, long long> counts;
    long long total_tokens = 0;
    for (const auto& sentence : corpus) {
        for (const auto& tok : sentence) {
            ++counts[tok];
            ++total_tokens;
        }
    }
    if (total_tokens == 0) {
        throw InputError("skip-gram fitting needs a non-empty corpus");
    }

    std::unordered_map<std::string, int> index;
    std::vector<double> noise_weights;
    for (const auto& [tok, count] : counts) {
        index.emplace(tok, static_cast<int>(noise_weights.size()));
        noise_weights.push_back(std::pow(static_cast<double>(count), 0.75));
    }
    const auto vocab = static_cast<Eigen::Index>(noise_weights.size());

    Rng rng(seed);
    std::uniform_real_distribution<double> init(-0.5 / dim, 0.5 / dim);
    Matrix input(vocab, dim);
    for (Eigen::Index r = 0; r < vocab; ++r) {
        for (int c = 0; c < dim; ++c) {
            input(r, c) = init(rng);
        }
    }
    Matrix output = Matrix::Zero(vocab, dim);
    std::discrete_distribution<int> noise(noise_weights.begin(), noise_weights.end());

    std::vector<std::vector<int>> ids;
    ids.reserve(corpus.size());
    for (const auto& sentence : corpus) {
        std::vector<int> s;
        s.reserve(sentence.size());
        for (const auto& tok : sentence) {
            s.push_back(index.at(tok));
        }
        ids.push_back(std::move(s));
    }

    const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(total_tokens);
    double step = 0.0;
    RowVector accum(dim);
    auto update = [&](int center, int target, double label, double lr) {
        const double dot = input.row(center).dot(output.row(target));
        const double f = 1.0 / (1.0 + std::exp(-std::clamp(dot, -30.0, 30.0)));
        const double g = lr * (label - f);
        accum += g * output.row(target);
        output.row(target) += g * input.row(center);
    };
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& sentence : ids) {
            const auto len = static_cast<int>(sentence.size());
            for (int i = 0; i < len; ++i) {
                const double lr = std::max(config.lr * (1.0 - step / total_steps), config.lr * 1e-4);
                step += 1.0;
                const int lo = std::max(0, i - config.window);
                const int hi = std::min(len - 1, i + config.window);
                for (int j = lo; j <= hi; ++j) {
                    if (j == i) {
                        continue;
                    }
                    const int center = sentence[static_cast<std::size_t>(i)];
                    const int context = sentence[static_cast<std::size_t>(j)];
                    accum.setZero();
                    update(center, context, 1.0, lr);
                    for (int k = 0; k < config.negatives; ++k) {
                        const int neg = noise(rng);
                        if (neg != context) {
                            update(center, neg, 0.0, lr);
                        }
                    }
                    input.row(center) += accum;
                }
            }
        }
    }

    TokenEmbedder e;
    e.mode_ = TokenEmbedder::Mode::SkipGram;
    e.dim_ = dim;
    e.seed_ = seed;
    for (const auto& [tok, row] : index) {
        e.table_.emplace(tok, input.row(row).transpose());
    }
    return e;
}

LabeledGraph to_labeled_graph(const RawGraphRecord& rec, const TokenEmbedder& emb) {
    const auto n = static_cast<int>(rec.nodes.size());
    if (n == 0) {
        throw InputError("graph '" + rec.name + "' has no nodes");
    }
    LabeledGraph g;
    g.name = rec.name;
    g.label = rec.label;
    g.features = Matrix::Zero(n, emb.dim());
    bool any_key = false;
    std::unordered_map<std::string, Vector> cache;
    for (int i = 0; i < n; ++i) {
        const RawNode& node = rec.nodes[static_cast<std::size_t>(i)];
        const auto tokens = tokenize(node.code);
        if (!tokens.empty()) {
            Vector sum = Vector::Zero(emb.dim());
            for (const auto& t : tokens) {
                auto it = cache.find(t);
                if (it == cache.end()) {
                    it = cache.emplace(t, emb.embed(t)).first;
                }
                sum += it->second;
            }
            g.features.row(i) = (sum / static_cast<double>(tokens.size())).transpose();
        }
        g.node_meta.push_back(NodeMeta{node.line, node.kind});
        any_key = any_key || node.key.has_value();
    }
    if (any_key) {
        for (const RawNode& node : rec.nodes) {
            g.key_mask.push_back(node.key.value_or(false) ? 1 : 0);
        }
    }
    std::vector<Edge> edges;
    edges.reserve(rec.edges.size());
    for (const RawEdge& e : rec.edges) {
        edges.emplace_back(e.src, e.dst);
    }
    g.adjacency = build_adjacency(edges, n);
    g.validate();
    return g;
}

std::vector<std::vector<std::string>> token_corpus(const std::vector<RawGraphRecord>& records) {
    std::vector<std::vector<std::string>> out;
    out.reserve(records.size());
    for (const RawGraphRecord& r : records) {
        std::vector<std::string> sentence;
        for (const RawNode& n : r.nodes) {
            auto toks = tokenize(n.code);
            sentence.insert(sentence.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
        }
        out.push_back(std::move(sentence));
    }
    return out;
}

} // namespace vulngraph
