#ifndef VULNGRAPH_INGEST_HPP
#define VULNGRAPH_INGEST_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulngraph/graph.hpp"

namespace vulngraph {

enum class EdgeType { Ast, Cfg, Pdg };

struct RawNode {
    long long id = 0; ///< id as written in the file
    std::string code;
    std::string kind;
    std::optional<int> line;
    std::optional<bool> key;
};

struct RawEdge {
    int src = 0; ///< dense index into RawGraphRecord::nodes
    int dst = 0;
    EdgeType etype = EdgeType::Ast;
};

struct RawGraphRecord {
    std::string name;
    int label = 0;
    std::vector<RawNode> nodes;
    std::vector<RawEdge> edges;
};

std::string_view to_string(EdgeType t);

/// Parses one graph document. Node ids are remapped to 0..N-1 in input order.
/// Errors carry the offending node/edge position.
RawGraphRecord load_graph_json(std::string_view text);
RawGraphRecord graph_from_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const RawGraphRecord& rec);

/// One record per non-blank line; errors name the line number.
std::vector<RawGraphRecord> load_corpus_jsonl(std::string_view text);
std::vector<RawGraphRecord> load_corpus_file(const std::filesystem::path& path);
std::string corpus_to_jsonl(const std::vector<RawGraphRecord>& records);

/// C-style lexer: identifiers, numbers, string/char literals and operators
/// (maximal munch) become separate tokens; whitespace separates.
std::vector<std::string> tokenize(std::string_view code);

struct SkipGramConfig {
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double lr = 0.025;
};

/// Maps tokens to fixed-length vectors.
///
/// Hash mode derives a unit-norm pseudo-random vector from a seeded hash of
/// the token and needs no training. Skip-gram mode looks tokens up in a
/// trained table; tokens outside the table embed to zero.
class TokenEmbedder {
public:
    enum class Mode { Hash, SkipGram };

    static TokenEmbedder hashed(int dim, std::uint64_t seed);

    [[nodiscard]] Mode mode() const { return mode_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] const std::map<std::string, Vector>& vocabulary() const { return table_; }

    [[nodiscard]] Vector embed(std::string_view token) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static TokenEmbedder from_json(const nlohmann::json& doc);

private:
    friend TokenEmbedder fit_token_embeddings(const std::vector<std::vector<std::string>>&, int,
                                              const SkipGramConfig&, std::uint64_t);
    Mode mode_ = Mode::Hash;
    int dim_ = 100;
    std::uint64_t seed_ = 0;
    std::map<std::string, Vector> table_;
};

/// Skip-gram with negative sampling over `corpus`. Deterministic for a seed.
TokenEmbedder fit_token_embeddings(const std::vector<std::vector<std::string>>& corpus, int dim,
                                   const SkipGramConfig& config, std::uint64_t seed);

/// Node features are the mean token embedding of each node's code (zero row
/// for nodes without tokens); all edge kinds merge into one undirected
/// adjacency.
LabeledGraph to_labeled_graph(const RawGraphRecord& rec, const TokenEmbedder& emb);

/// Token lists of every node of every record, for embedder fitting.
std::vector<std::vector<std::string>> token_corpus(const std::vector<RawGraphRecord>& records);

} // namespace vulngraph

#endif // VULNGRAPH_INGEST_HPP
