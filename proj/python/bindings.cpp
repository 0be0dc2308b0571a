// Python module `vulngraph._core`. Configs cross the boundary as JSON text;
// the package wrapper turns them into dicts.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vulngraph/cli.hpp"
#include "vulngraph/config.hpp"
#include "vulngraph/errors.hpp"
#include "vulngraph/sapool.hpp"

namespace py = pybind11;
using namespace vulngraph;
using nlohmann::json;

namespace {

std::vector<LabeledGraph> records_to_graphs(const std::vector<RawGraphRecord>& records, const TokenEmbedder& emb) {
    std::vector<LabeledGraph> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(to_labeled_graph(r, emb));
    }
    return out;
}

py::dict prediction_dict(const Prediction& p) {
    py::dict d;
    d["name"] = p.name;
    d["probability"] = p.probability;
    d["label"] = p.predicted_label;
    d["nodes_in"] = p.nodes_in;
    d["nodes_after"] = p.nodes_after;
    d["embedding"] = Matrix(p.embedding);
    d["trace"] = sapool::to_json(p.trace).dump();
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Graph-based vulnerability classifier with self-adaptive pooling";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_RuntimeError);

    py::class_<LabeledGraph>(m, "Graph")
        .def(py::init([](const Matrix& features, const std::vector<std::pair<int, int>>& edges, int label,
                         std::string name) {
                 LabeledGraph g;
                 g.name = std::move(name);
                 g.features = features;
                 g.adjacency = build_adjacency(edges, static_cast<int>(features.rows()));
                 g.label = label;
                 g.validate();
                 return g;
             }),
             py::arg("features"), py::arg("edges"), py::arg("label") = 0, py::arg("name") = "")
        .def_readonly("name", &LabeledGraph::name)
        .def_readonly("label", &LabeledGraph::label)
        .def_readonly("features", &LabeledGraph::features)
        .def_property_readonly("node_count", &LabeledGraph::node_count)
        .def_property_readonly("key_count", &LabeledGraph::key_count)
        .def_property_readonly("edges", [](const LabeledGraph& g) { return g.adjacency.edges(); })
        .def_property_readonly("adjacency", [](const LabeledGraph& g) { return g.adjacency.dense(); })
        .def("__repr__", [](const LabeledGraph& g) {
            std::ostringstream s;
            s << "Graph(name='" << g.name << "', nodes=" << g.node_count() << ", label=" << g.label << ")";
            return s.str();
        });

    m.def("default_config", [] { return to_json(RunConfig{}).dump(); });
    m.def("resolve_config", [](const std::string& text) { return to_json(run_config_from_json(json::parse(text))).dump(); });

    m.def(
        "synth_corpus",
        [](const std::string& config_text) {
            const RunConfig cfg = run_config_from_json(json::parse(config_text));
            const auto records = generate_records(cfg.synth);
            return records_to_graphs(records, build_embedder(cfg.embedder, cfg.seeds.data, records));
        },
        py::arg("config"));
    m.def(
        "load_corpus",
        [](const std::string& path, const std::string& config_text) {
            const RunConfig cfg = run_config_from_json(json::parse(config_text));
            const auto records = load_corpus_file(path);
            return records_to_graphs(records, build_embedder(cfg.embedder, cfg.seeds.data, records));
        },
        py::arg("path"), py::arg("config"));

    m.def("normalize_adjacency", [](const Matrix& a) { return normalize_adjacency(a).dense(); }, py::arg("adjacency"));
    m.def(
        "appnp_propagate",
        [](const Matrix& x0, const Matrix& a, int l, double alpha) {
            return sapool::appnp_propagate(x0, normalize_adjacency(a), l, alpha);
        },
        py::arg("x0"), py::arg("adjacency"), py::arg("l") = 8, py::arg("alpha") = 0.2);
    m.def("score_nodes", py::overload_cast<const Matrix&, const Vector&>(&sapool::score_nodes), py::arg("x"),
          py::arg("h"));
    m.def("select_topk", &sapool::select_topk, py::arg("scores"), py::arg("k"));
    m.def("keep_count", &sapool::keep_count, py::arg("k"), py::arg("n"));

    m.def(
        "compute_metrics",
        [](const std::vector<double>& probs, const std::vector<int>& labels, double threshold) {
            return metrics::to_json(metrics::compute_metrics(probs, labels, threshold)).dump();
        },
        py::arg("probs"), py::arg("labels"), py::arg("threshold") = 0.5);
    m.def(
        "bce_loss", [](const std::vector<double>& p, const std::vector<int>& y) { return bce_loss(p, y); },
        py::arg("probs"), py::arg("labels"));

    py::class_<Model>(m, "Model")
        .def_static(
            "init",
            [](const std::string& config_text, std::uint64_t seed) {
                return Model::init(run_config_from_json(json::parse(config_text)).model, seed);
            },
            py::arg("config"), py::arg("seed"))
        .def_static("load", [](const std::string& path) { return load_checkpoint(path).model; }, py::arg("path"))
        .def(
            "save", [](const Model& model, const std::string& path) { save_checkpoint(Checkpoint{model, {}, {}}, path); },
            py::arg("path"))
        .def_property_readonly("config", [](const Model& model) { return to_json(model.config).dump(); })
        .def_property_readonly("active_parameter_count", &Model::active_parameter_count)
        .def(
            "predict", [](const Model& model, const LabeledGraph& g, double threshold) {
                return prediction_dict(predict(model, g, threshold));
            },
            py::arg("graph"), py::arg("threshold") = 0.5)
        .def(
            "evaluate",
            [](const Model& model, const std::vector<LabeledGraph>& graphs, double threshold, int jobs) {
                const Evaluation ev = evaluate(model, graphs, threshold, jobs);
                py::list preds;
                for (const auto& p : ev.predictions) {
                    preds.append(prediction_dict(p));
                }
                return py::make_tuple(metrics::to_json(ev.metrics).dump(), preds);
            },
            py::arg("graphs"), py::arg("threshold") = 0.5, py::arg("jobs") = 1)
        .def(
            "simplify",
            [](const Model& model, const LabeledGraph& g) {
                Rng rng(0);
                auto [out, trace] = sapool::refine_graph(g, model.params.pool, model.config.refine, false, rng);
                return py::make_tuple(std::move(out), sapool::to_json(trace).dump());
            },
            py::arg("graph"));

    m.def(
        "train",
        [](const Model& init, const std::vector<LabeledGraph>& train_set, const std::vector<LabeledGraph>& val_set,
           const std::string& config_text) {
            const RunConfig cfg = run_config_from_json(json::parse(config_text));
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(init, train_set, val_set, cfg.train);
            }
            return py::make_tuple(std::move(r.best), r.best_step, r.best_val_f1, history_csv(r.history));
        },
        py::arg("model"), py::arg("train_set"), py::arg("val_set"), py::arg("config"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
