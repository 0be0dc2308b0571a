#include "vulngraph/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>

#include "vulngraph/config.hpp"
#include "vulngraph/errors.hpp"
#include "vulngraph/metrics.hpp"
#include "vulngraph/model.hpp"
#include "vulngraph/synth.hpp"
#include "vulngraph/train.hpp"

namespace vulngraph::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed_data;
    std::optional<std::uint64_t> seed_model;
    std::optional<std::uint64_t> seed_train;
    std::vector<std::string> ablations;
    int jobs = 1;
    std::string out;
    std::string corpus;
    std::string graph;
    std::string checkpoint;
    std::string embedder;
    std::string split = "test";
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
    out.flush();
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

fs::path output_dir(const Options& o) {
    if (o.out.empty()) {
        throw InputError("--out is required");
    }
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    }
    return dir;
}

json parse_json_text(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(where + ": malformed JSON: " + e.what());
    }
}

RunConfig resolve_config(const Options& o) {
    RunConfig cfg = load_run_config(o.config, o.sets);
    cfg.seeds.data = o.seed_data.value_or(cfg.seeds.data);
    cfg.seeds.model = o.seed_model.value_or(cfg.seeds.model);
    cfg.seeds.train = o.seed_train.value_or(cfg.seeds.train);
    for (const std::string& a : o.ablations) {
        if (a == "no-hgr") {
            cfg.model.ablations.use_hgr = false;
        } else if (a == "no-gnn") {
            cfg.model.ablations.use_gnn = false;
        } else if (a == "no-gt") {
            cfg.model.ablations.use_gt = false;
        } else {
            throw InputError("--ablation: expected no-hgr, no-gnn or no-gt, got '" + a + "'");
        }
    }
    cfg.resolve();
    return cfg;
}

std::vector<RawGraphRecord> load_records(const std::string& path) {
    if (path.empty()) {
        throw InputError("--corpus is required");
    }
    return load_corpus_file(path);
}

std::vector<LabeledGraph> to_graphs(const std::vector<RawGraphRecord>& records, const TokenEmbedder& emb) {
    std::vector<LabeledGraph> graphs;
    graphs.reserve(records.size());
    for (const RawGraphRecord& r : records) {
        graphs.push_back(to_labeled_graph(r, emb));
    }
    return graphs;
}

struct LoadedCheckpoint {
    Checkpoint ckpt;
    RunConfig cfg;
};

LoadedCheckpoint open_checkpoint(const std::string& path) {
    if (path.empty()) {
        throw InputError("--checkpoint is required");
    }
    Checkpoint ckpt = load_checkpoint(path);
    if (!ckpt.embedder) {
        throw InputError(path + ": checkpoint carries no token embedder");
    }
    const auto it = ckpt.meta.find("run_config");
    if (it == ckpt.meta.end()) {
        throw InputError(path + ": checkpoint carries no run configuration");
    }
    RunConfig cfg = run_config_from_json(*it);
    return {std::move(ckpt), std::move(cfg)};
}

std::vector<int> split_positions(const RunConfig& cfg, std::size_t size, const std::string& which) {
    if (which == "all") {
        std::vector<int> all(size);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    Split s = split_dataset(size, cfg.train.split, cfg.seeds.data);
    if (which == "train") {
        return s.train;
    }
    if (which == "val") {
        return s.val;
    }
    if (which == "test") {
        return s.test;
    }
    throw InputError("--split: expected train, val, test or all, got '" + which + "'");
}

struct EvalRun {
    std::vector<LabeledGraph> graphs;
    Evaluation eval;
    metrics::BucketedReport buckets;
    double mean_in = 0.0;
    double mean_after = 0.0;
    double ratio = 0.0;
};

EvalRun evaluate_split(const LoadedCheckpoint& lc, const Options& o) {
    const std::vector<RawGraphRecord> records = load_records(o.corpus);
    const std::vector<LabeledGraph> all = to_graphs(records, *lc.ckpt.embedder);
    const std::vector<int> pos = split_positions(lc.cfg, all.size(), o.split);
    EvalRun run;
    run.graphs = gather(all, pos);
    if (run.graphs.empty()) {
        throw InputError("split '" + o.split + "' is empty");
    }
    run.eval = evaluate(lc.ckpt.model, run.graphs, lc.cfg.train.threshold, o.jobs);

    std::vector<int> predicted, labels, counts;
    for (std::size_t i = 0; i < run.graphs.size(); ++i) {
        predicted.push_back(run.eval.predictions[i].predicted_label);
        labels.push_back(run.graphs[i].label);
        counts.push_back(run.eval.predictions[i].nodes_in);
        run.mean_in += run.eval.predictions[i].nodes_in;
        run.mean_after += run.eval.predictions[i].nodes_after;
    }
    run.buckets = metrics::bucketed_accuracy(predicted, labels, counts, lc.cfg.bucket_edges);
    run.mean_in /= static_cast<double>(run.graphs.size());
    run.mean_after /= static_cast<double>(run.graphs.size());
    run.ratio = simplification_ratio(run.eval.predictions);
    return run;
}

json eval_summary(const EvalRun& run, const std::string& split) {
    return {{"split", split},
            {"graphs", run.graphs.size()},
            {"metrics", metrics::to_json(run.eval.metrics)},
            {"bucket_weighted_accuracy", run.buckets.weighted_accuracy()},
            {"simplification",
             {{"mean_nodes_in", run.mean_in}, {"mean_nodes_after", run.mean_after}, {"reduction", run.ratio}}}};
}

int cmd_synth(const Options& o, std::ostream& out) {
    const RunConfig cfg = resolve_config(o);
    if (o.out.empty()) {
        throw InputError("--out is required");
    }
    const fs::path path(o.out);
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const std::vector<RawGraphRecord> records = generate_records(cfg.synth);
    write_text(path, corpus_to_jsonl(records));
    fs::path snapshot = path;
    snapshot.replace_extension(".config.json");
    write_json(snapshot, to_json(cfg));
    out << "wrote " << records.size() << " graphs to " << path.string() << "\n";
    return kOk;
}

int cmd_ingest(const Options& o, std::ostream& out) {
    const RunConfig cfg = resolve_config(o);
    std::vector<RawGraphRecord> records;
    if (!o.graph.empty()) {
        records.push_back(load_graph_json(read_text(o.graph)));
    } else {
        records = load_records(o.corpus);
    }
    const fs::path dir = output_dir(o);
    const TokenEmbedder emb = build_embedder(cfg.embedder, cfg.seeds.data, records);
    const std::vector<LabeledGraph> graphs = to_graphs(records, emb);

    long long nodes = 0, edges = 0, positives = 0, keys = 0;
    for (const LabeledGraph& g : graphs) {
        nodes += g.node_count();
        edges += g.adjacency.nnz() / 2;
        positives += g.label;
        keys += g.key_count();
    }
    const json summary = {{"graphs", graphs.size()},
                          {"positives", positives},
                          {"nodes", nodes},
                          {"undirected_edges", edges},
                          {"key_nodes", keys},
                          {"feature_dim", emb.dim()}};
    write_json(dir / "embedder.json", emb.to_json());
    write_json(dir / "summary.json", summary);
    write_json(dir / "resolved_config.json", to_json(cfg));
    out << summary.dump() << "\n";
    return kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    const RunConfig cfg = resolve_config(o);
    const std::vector<RawGraphRecord> records = load_records(o.corpus);
    const fs::path dir = output_dir(o);

    const TokenEmbedder emb = o.embedder.empty()
                                  ? build_embedder(cfg.embedder, cfg.seeds.data, records)
                                  : TokenEmbedder::from_json(parse_json_text(read_text(o.embedder), o.embedder));
    if (emb.dim() != cfg.embedder.dim) {
        throw InputError("embedder width " + std::to_string(emb.dim()) + " differs from embedder.dim " +
                         std::to_string(cfg.embedder.dim));
    }
    const std::vector<LabeledGraph> graphs = to_graphs(records, emb);
    const Split split = split_dataset(graphs.size(), cfg.train.split, cfg.seeds.data);
    const std::vector<LabeledGraph> train_set = gather(graphs, split.train);
    const std::vector<LabeledGraph> val_set = gather(graphs, split.val);

    const Model init = Model::init(cfg.model, cfg.seeds.model);
    const TrainResult result = train(init, train_set, val_set, cfg.train);

    Checkpoint ckpt{result.best, emb, json::object()};
    ckpt.meta["run_config"] = to_json(cfg);
    ckpt.meta["best_step"] = result.best_step;
    ckpt.meta["best_val_f1"] = result.best_val_f1;
    save_checkpoint(ckpt, dir / "checkpoint.json");
    write_text(dir / "history.csv", history_csv(result.history));
    write_json(dir / "resolved_config.json", to_json(cfg));

    auto names = [&](const std::vector<int>& pos) {
        json arr = json::array();
        for (int p : pos) {
            arr.push_back(records[static_cast<std::size_t>(p)].name);
        }
        return arr;
    };
    write_json(dir / "split.json", {{"train", names(split.train)}, {"val", names(split.val)}, {"test", names(split.test)}});

    out << "trained " << result.history.size() << " steps; best step " << result.best_step << " val_f1 "
        << metrics::format_real(result.best_val_f1) << "\n";
    return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const LoadedCheckpoint lc = open_checkpoint(o.checkpoint);
    const fs::path dir = output_dir(o);
    const EvalRun run = evaluate_split(lc, o);

    std::vector<metrics::EmbeddingRow> rows;
    rows.reserve(run.graphs.size());
    for (std::size_t i = 0; i < run.graphs.size(); ++i) {
        rows.push_back({run.graphs[i].name, run.graphs[i].label, run.eval.predictions[i].embedding});
    }
    const json summary = eval_summary(run, o.split);
    write_json(dir / "metrics.json", summary);
    write_text(dir / "buckets.csv", metrics::to_csv(run.buckets));
    metrics::export_embeddings(rows, lc.cfg.model.hidden, dir / "embeddings.tsv");
    write_json(dir / "resolved_config.json", to_json(lc.cfg));
    out << summary["metrics"].dump() << "\n";
    return kOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
    const LoadedCheckpoint lc = open_checkpoint(o.checkpoint);
    if (o.graph.empty()) {
        throw InputError("--graph is required");
    }
    const RawGraphRecord rec = load_graph_json(read_text(o.graph));
    const LabeledGraph g = to_labeled_graph(rec, *lc.ckpt.embedder);
    const Prediction p = predict(lc.ckpt.model, g, lc.cfg.train.threshold);
    const json line = {{"name", p.name},
                       {"probability", p.probability},
                       {"label", p.predicted_label},
                       {"nodes_in", p.nodes_in},
                       {"nodes_after", p.nodes_after}};
    out << line.dump() << "\n";
    return kOk;
}

/// Kept input nodes and the input edges among them, duplicates dropped.
RawGraphRecord restrict_record(const RawGraphRecord& rec, const std::vector<int>& origin) {
    RawGraphRecord outr;
    outr.name = rec.name;
    outr.label = rec.label;
    std::vector<int> remap(rec.nodes.size(), -1);
    for (std::size_t j = 0; j < origin.size(); ++j) {
        remap[static_cast<std::size_t>(origin[j])] = static_cast<int>(j);
        outr.nodes.push_back(rec.nodes[static_cast<std::size_t>(origin[j])]);
    }
    std::set<std::tuple<int, int, int>> seen;
    for (const RawEdge& e : rec.edges) {
        const int s = remap[static_cast<std::size_t>(e.src)];
        const int d = remap[static_cast<std::size_t>(e.dst)];
        if (s < 0 || d < 0 || !seen.insert({s, d, static_cast<int>(e.etype)}).second) {
            continue;
        }
        outr.edges.push_back({s, d, e.etype});
    }
    return outr;
}

int cmd_simplify(const Options& o, std::ostream& out) {
    if (o.graph.empty()) {
        throw InputError("--graph is required");
    }
    const RawGraphRecord rec = load_graph_json(read_text(o.graph));
    const fs::path dir = output_dir(o);

    Model model;
    RunConfig cfg;
    std::optional<TokenEmbedder> emb;
    if (!o.checkpoint.empty()) {
        LoadedCheckpoint lc = open_checkpoint(o.checkpoint);
        model = std::move(lc.ckpt.model);
        emb = std::move(lc.ckpt.embedder);
        cfg = std::move(lc.cfg);
    } else {
        cfg = resolve_config(o);
        model = Model::init(cfg.model, cfg.seeds.model);
        emb = build_embedder(cfg.embedder, cfg.seeds.data, {rec});
    }
    const LabeledGraph g = to_labeled_graph(rec, *emb);
    Rng rng(cfg.seeds.train);
    const auto [refined, trace] = sapool::refine_graph(g, model.params.pool, model.config.refine, false, rng);

    std::vector<int> origin(static_cast<std::size_t>(g.node_count()));
    std::iota(origin.begin(), origin.end(), 0);
    for (const sapool::RefineStep& step : trace.steps) {
        std::vector<int> next;
        next.reserve(step.kept_indices.size());
        for (int k : step.kept_indices) {
            next.push_back(origin[static_cast<std::size_t>(k)]);
        }
        origin = std::move(next);
    }
    const RawGraphRecord simplified = trace.steps.empty() ? rec : restrict_record(rec, origin);

    write_json(dir / "simplified.json", graph_to_json(simplified));
    write_json(dir / "trace.json", sapool::to_json(trace));
    write_json(dir / "resolved_config.json", to_json(cfg));
    out << rec.name << ": " << g.node_count() << " -> " << refined.node_count() << " nodes in "
        << trace.steps.size() << " steps\n";
    return kOk;
}

int cmd_report(const Options& o, std::ostream& out) {
    const LoadedCheckpoint lc = open_checkpoint(o.checkpoint);
    const EvalRun run = evaluate_split(lc, o);
    const metrics::Metrics& m = run.eval.metrics;
    using metrics::format_real;

    out << "split " << o.split << ": " << run.graphs.size() << " graphs\n";
    out << "accuracy " << format_real(m.accuracy) << "  precision " << format_real(m.precision) << "  recall "
        << format_real(m.recall) << "  f1 " << format_real(m.f1) << "\n";
    out << "accuracy by node count:\n";
    for (const metrics::Bucket& b : run.buckets.buckets) {
        const auto acc = b.accuracy();
        out << "  (" << format_real(b.lo) << ", " << format_real(b.hi) << "]  n=" << b.count << "  acc "
            << (acc ? format_real(*acc) : std::string("NA")) << "\n";
    }
    out << "nodes: mean " << format_real(run.mean_in) << " -> " << format_real(run.mean_after) << " (reduction "
        << format_real(100.0 * run.ratio) << "%)\n";
    if (!o.out.empty()) {
        const fs::path dir = output_dir(o);
        write_json(dir / "report.json", eval_summary(run, o.split));
    }
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graph-level vulnerability classifier with self-adaptive graph simplification", "vulngraph"};
    app.require_subcommand(1);
    Options o;

    auto add_config = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON run configuration");
        sub->add_option("--set", o.sets, "Override, e.g. --set train.lr=0.01");
        sub->add_option("--seed-data", o.seed_data, "Seed for synthesis, embedder and split");
        sub->add_option("--seed-model", o.seed_model, "Seed for parameter initialization");
        sub->add_option("--seed-train", o.seed_train, "Seed for batch order and dropout");
        sub->add_option("--ablation", o.ablations, "Disable a mechanism: no-hgr, no-gnn, no-gt");
    };

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic JSON-lines corpus");
    add_config(synth);
    synth->add_option("--out", o.out, "Corpus file to write")->required();

    CLI::App* ingest = app.add_subcommand("ingest", "Validate raw graphs and build the token embedder");
    add_config(ingest);
    ingest->add_option("--corpus", o.corpus, "JSON-lines corpus");
    ingest->add_option("--graph", o.graph, "Single graph JSON");
    ingest->add_option("--out", o.out, "Output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    add_config(train_cmd);
    train_cmd->add_option("--corpus", o.corpus, "JSON-lines corpus")->required();
    train_cmd->add_option("--embedder", o.embedder, "Embedder JSON written by ingest");
    train_cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    train_cmd->add_option("--out", o.out, "Output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
    eval_cmd->add_option("--checkpoint", o.checkpoint)->required();
    eval_cmd->add_option("--corpus", o.corpus)->required();
    eval_cmd->add_option("--split", o.split, "train, val, test or all");
    eval_cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out", o.out, "Output directory")->required();

    CLI::App* predict_cmd = app.add_subcommand("predict", "Score one graph");
    predict_cmd->add_option("--checkpoint", o.checkpoint)->required();
    predict_cmd->add_option("--graph", o.graph)->required();

    CLI::App* simplify = app.add_subcommand("simplify", "Refine one graph below the node threshold");
    add_config(simplify);
    simplify->add_option("--checkpoint", o.checkpoint, "Trained weights; freshly initialized when omitted");
    simplify->add_option("--graph", o.graph)->required();
    simplify->add_option("--out", o.out, "Output directory")->required();

    CLI::App* report = app.add_subcommand("report", "Print metrics, bucketed accuracy and node reduction");
    report->add_option("--checkpoint", o.checkpoint)->required();
    report->add_option("--corpus", o.corpus)->required();
    report->add_option("--split", o.split, "train, val, test or all");
    report->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    report->add_option("--out", o.out, "Also write report.json here");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*synth) {
            return cmd_synth(o, out);
        }
        if (*ingest) {
            if (o.corpus.empty() == o.graph.empty()) {
                throw InputError("ingest needs exactly one of --corpus and --graph");
            }
            return cmd_ingest(o, out);
        }
        if (*train_cmd) {
            return cmd_train(o, out);
        }
        if (*eval_cmd) {
            return cmd_eval(o, out);
        }
        if (*predict_cmd) {
            return cmd_predict(o, out);
        }
        if (*simplify) {
            return cmd_simplify(o, out);
        }
        return cmd_report(o, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    } catch (const std::exception& e) {
        err << "unexpected failure: " << e.what() << "\n";
        return kUnexpected;
    }
}

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args, std::cout, std::cerr);
}

} // namespace vulngraph::cli
