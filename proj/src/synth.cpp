#include "vulngraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "vulngraph/errors.hpp"
#include "vulngraph/json_util.hpp"

namespace vulngraph {

using nlohmann::json;

namespace {

// Single-lexeme tokens only, so joining with spaces round-trips through tokenize().
const std::vector<std::string>& background_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v = {"if",  "else", "return", "while", "for", "int", "char", "unsigned", "size_t",
                                      "=",   "+",    "-",      "*",     "/",   "<",   ">",    "==",       "!=",
                                      "->",  "(",    ")",      "[",     "]",   ",",   ";",    "&&",       "||",
                                      "++",  "0",    "1",      "2",     "16",  "NULL", "sizeof", "struct", "break"};
        for (int i = 0; i < 96; ++i) {
            v.push_back("v" + std::to_string(i));
        }
        for (int i = 0; i < 32; ++i) {
            v.push_back("fn" + std::to_string(i));
        }
        return v;
    }();
    return vocab;
}

constexpr const char* kSignatureA = "memcpy";
constexpr const char* kSignatureB = "alloca";
constexpr int kBackgroundTokensMin = 3;
constexpr int kBackgroundTokensMax = 6;
constexpr int kMotifBackgroundTokens = 2;

std::string background_code(Rng& rng, int count) {
    const auto& vocab = background_vocabulary();
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string code;
    for (int t = 0; t < count; ++t) {
        if (t > 0) {
            code += ' ';
        }
        code += vocab[pick(rng)];
    }
    return code;
}

RawGraphRecord generate_one(const SynthConfig& cfg, int index) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
    const int n = sample_node_count(cfg.size_law, rng);
    std::bernoulli_distribution vulnerable(cfg.vulnerable_fraction);
    const bool is_vuln = vulnerable(rng);

    RawGraphRecord rec;
    rec.name = "synth-" + std::to_string(cfg.seed) + "-" + std::to_string(index);
    rec.label = is_vuln ? 1 : 0;

    std::vector<char> motif(static_cast<std::size_t>(n), 0);
    if (is_vuln) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int k = 0; k < cfg.motif_size; ++k) {
            motif[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
        }
    }

    std::uniform_int_distribution<int> token_count(kBackgroundTokensMin, kBackgroundTokensMax);
    rec.nodes.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        RawNode node;
        node.id = i;
        node.line = i + 1;
        if (motif[static_cast<std::size_t>(i)] != 0) {
            node.code = std::string(kSignatureA) + " " + kSignatureB + " " + background_code(rng, kMotifBackgroundTokens);
            node.kind = "CALL";
            node.key = true;
        } else {
            node.code = background_code(rng, token_count(rng));
            node.kind = "STATEMENT";
            node.key = false;
        }
        rec.nodes.push_back(std::move(node));
    }

    std::set<std::pair<int, int>> seen;
    auto add_edge = [&](int a, int b, EdgeType t) {
        const auto key = std::minmax(a, b);
        if (a != b && seen.insert(key).second) {
            rec.edges.push_back(RawEdge{a, b, t});
        }
    };
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> parent(0, i - 1);
        add_edge(parent(rng), i, EdgeType::Ast);
    }
    if (cfg.noise_edge_prob > 0.0 && n > 1) {
        // Walk the flattened upper triangle with geometric gaps.
        std::geometric_distribution<long long> gap(cfg.noise_edge_prob);
        int row = 0;
        long long col = 0; // offset within row `row`, columns row+1..n-1
        for (;;) {
            long long skip = cfg.noise_edge_prob >= 1.0 ? 0 : gap(rng);
            col += skip;
            while (row < n - 1 && col >= n - 1 - row) {
                col -= n - 1 - row;
                ++row;
            }
            if (row >= n - 1) {
                break;
            }
            add_edge(row, row + 1 + static_cast<int>(col), EdgeType::Cfg);
            ++col;
        }
    }
    if (is_vuln) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i) {
            if (motif[static_cast<std::size_t>(i)] != 0) {
                members.push_back(i);
            }
        }
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                add_edge(members[a], members[b], EdgeType::Pdg);
            }
        }
    }
    return rec;
}

} // namespace

void SynthConfig::validate() const {
    if (n_graphs < 1) {
        throw InputError("synth.n_graphs must be >= 1");
    }
    if (!(size_law.pareto_shape > 0.0) || !std::isfinite(size_law.pareto_shape)) {
        throw InputError("synth.size_law.pareto_shape must be positive");
    }
    if (motif_size < 2) {
        throw InputError("synth.motif_size must be >= 2");
    }
    if (size_law.min_n < motif_size) {
        throw InputError("synth.size_law.min_n must be >= motif_size");
    }
    if (size_law.max_n < size_law.min_n) {
        throw InputError("synth.size_law.max_n must be >= min_n");
    }
    if (feature_dim < 1) {
        throw InputError("synth.feature_dim must be >= 1");
    }
    if (!(vulnerable_fraction >= 0.0 && vulnerable_fraction <= 1.0)) {
        throw InputError("synth.vulnerable_fraction must be in [0, 1]");
    }
    if (!(noise_edge_prob >= 0.0 && noise_edge_prob <= 1.0)) {
        throw InputError("synth.noise_edge_prob must be in [0, 1]");
    }
}

json to_json(const SynthConfig& cfg) {
    return {{"n_graphs", cfg.n_graphs},
            {"size_law",
             {{"pareto_shape", cfg.size_law.pareto_shape},
              {"min_n", cfg.size_law.min_n},
              {"max_n", cfg.size_law.max_n}}},
            {"motif_size", cfg.motif_size},
            {"feature_dim", cfg.feature_dim},
            {"vulnerable_fraction", cfg.vulnerable_fraction},
            {"noise_edge_prob", cfg.noise_edge_prob},
            {"seed", cfg.seed}};
}

void from_json(const json& doc, SynthConfig& cfg) {
    using namespace jsonutil;
    require_keys(doc, "synth",
                 {"n_graphs", "size_law", "motif_size", "feature_dim", "vulnerable_fraction", "noise_edge_prob", "seed"});
    read(doc, "synth", "n_graphs", cfg.n_graphs);
    if (const auto it = doc.find("size_law"); it != doc.end()) {
        require_keys(*it, "synth.size_law", {"pareto_shape", "min_n", "max_n"});
        read(*it, "synth.size_law", "pareto_shape", cfg.size_law.pareto_shape);
        read(*it, "synth.size_law", "min_n", cfg.size_law.min_n);
        read(*it, "synth.size_law", "max_n", cfg.size_law.max_n);
    }
    read(doc, "synth", "motif_size", cfg.motif_size);
    read(doc, "synth", "feature_dim", cfg.feature_dim);
    read(doc, "synth", "vulnerable_fraction", cfg.vulnerable_fraction);
    read(doc, "synth", "noise_edge_prob", cfg.noise_edge_prob);
    read(doc, "synth", "seed", cfg.seed);
}

int sample_node_count(const SizeLaw& law, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double lo = law.min_n;
    const double hi = law.max_n + 1.0; // floor() maps [max_n, max_n+1) to max_n
    const double a = law.pareto_shape;
    const double tail = 1.0 - std::pow(lo / hi, a);
    const double x = lo / std::pow(1.0 - unit(rng) * tail, 1.0 / a);
    return std::clamp(static_cast<int>(std::floor(x)), law.min_n, law.max_n);
}

std::vector<RawGraphRecord> generate_records(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<RawGraphRecord> out;
    out.reserve(static_cast<std::size_t>(cfg.n_graphs));
    for (int i = 0; i < cfg.n_graphs; ++i) {
        out.push_back(generate_one(cfg, i));
    }
    return out;
}

TokenEmbedder synth_embedder(const SynthConfig& cfg) { return TokenEmbedder::hashed(cfg.feature_dim, cfg.seed); }

std::vector<LabeledGraph> generate_corpus(const SynthConfig& cfg) {
    const auto records = generate_records(cfg);
    const TokenEmbedder emb = synth_embedder(cfg);
    std::vector<LabeledGraph> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(to_labeled_graph(r, emb));
    }
    return out;
}

} // namespace vulngraph
