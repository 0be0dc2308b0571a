#include "vulngraph/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vulngraph/errors.hpp"
#include "vulngraph/json_util.hpp"

namespace vulngraph {

using nlohmann::json;

void TrainConfig::validate() const {
    if (batch_size < 1) {
        throw InputError("train.batch_size must be >= 1");
    }
    if (max_iterations < 1) {
        throw InputError("train.max_iterations must be >= 1");
    }
    if (!(lr > 0.0) || weight_decay < 0.0) {
        throw InputError("train.lr must be positive and train.weight_decay non-negative");
    }
    for (const double r : split) {
        if (!(r >= 0.0 && r <= 1.0)) {
            throw InputError("train.split ratios must lie in [0, 1]");
        }
    }
    if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) {
        throw InputError("train.split must sum to 1");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw InputError("train.threshold must lie in (0, 1)");
    }
    if (patience && *patience < 1) {
        throw InputError("train.patience must be >= 1");
    }
}

json to_json(const TrainConfig& cfg) {
    json doc = {{"batch_size", cfg.batch_size},
                {"max_iterations", cfg.max_iterations},
                {"lr", cfg.lr},
                {"weight_decay", cfg.weight_decay},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"eps", cfg.eps},
                {"split", cfg.split},
                {"seed", cfg.seed},
                {"threshold", cfg.threshold},
                {"patience", nullptr}};
    if (cfg.patience) {
        doc["patience"] = *cfg.patience;
    }
    return doc;
}

void from_json(const json& doc, TrainConfig& cfg) {
    using namespace jsonutil;
    require_keys(doc, "train",
                 {"batch_size", "max_iterations", "lr", "weight_decay", "beta1", "beta2", "eps", "split", "seed",
                  "threshold", "patience"});
    read(doc, "train", "batch_size", cfg.batch_size);
    read(doc, "train", "max_iterations", cfg.max_iterations);
    read(doc, "train", "lr", cfg.lr);
    read(doc, "train", "weight_decay", cfg.weight_decay);
    read(doc, "train", "beta1", cfg.beta1);
    read(doc, "train", "beta2", cfg.beta2);
    read(doc, "train", "eps", cfg.eps);
    read(doc, "train", "seed", cfg.seed);
    read(doc, "train", "threshold", cfg.threshold);
    if (const auto it = doc.find("split"); it != doc.end()) {
        if (!it->is_array() || it->size() != 3) {
            throw InputError("train.split: expected three ratios");
        }
        for (std::size_t i = 0; i < 3; ++i) {
            if (!(*it)[i].is_number()) {
                throw InputError("train.split: expected numbers");
            }
            cfg.split[i] = (*it)[i].get<double>();
        }
    }
    if (const auto it = doc.find("patience"); it != doc.end()) {
        if (it->is_null()) {
            cfg.patience.reset();
        } else if (it->is_number_integer()) {
            cfg.patience = it->get<int>();
        } else {
            throw InputError("train.patience: expected an integer or null");
        }
    }
}

double bce_loss(std::span<const double> probs, std::span<const int> labels) {
    if (probs.size() != labels.size()) {
        throw InputError("bce_loss: probabilities and labels differ in length");
    }
    if (probs.empty()) {
        throw InputError("bce_loss: no samples");
    }
    constexpr double eps = 1e-7;
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], eps, 1.0 - eps);
        const double y = labels[i];
        sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    return sum / static_cast<double>(probs.size());
}

Split split_dataset(std::size_t corpus_size, const std::array<double, 3>& ratios, std::uint64_t seed) {
    if (corpus_size == 0) {
        throw InputError("split_dataset: empty corpus");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw InputError("split_dataset: ratios must sum to 1");
    }
    std::vector<int> order(corpus_size);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto m = static_cast<double>(corpus_size);
    // tolerance keeps 0.1 * 10 at 1 despite rounding in the ratio
    const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * m + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * m + 1e-9));
    const std::size_t n_train = corpus_size - n_val - n_test;
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return s;
}

std::vector<LabeledGraph> gather(std::span<const LabeledGraph> corpus, std::span<const int> positions) {
    std::vector<LabeledGraph> out;
    out.reserve(positions.size());
    for (const int p : positions) {
        out.push_back(corpus[static_cast<std::size_t>(p)]);
    }
    return out;
}

AdamW::AdamW(const TrainConfig& cfg, const Model& model)
    : lr_(cfg.lr), wd_(cfg.weight_decay), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps),
      m_(model.params.zeros_like()), v_(model.params.zeros_like()) {}

void AdamW::step(Model& model, const ModelParams& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    // Walk the four parallel parameter trees in lockstep by collecting pointers.
    std::vector<const Matrix*> g;
    std::vector<Matrix*> m;
    std::vector<Matrix*> v;
    grads.for_each([&](const std::string&, const Matrix& t) { g.push_back(&t); });
    m_.for_each([&](const std::string&, Matrix& t) { m.push_back(&t); });
    v_.for_each([&](const std::string&, Matrix& t) { v.push_back(&t); });
    std::size_t i = 0;
    model.params.for_each([&](const std::string& name, Matrix& theta) {
        const std::size_t k = i++;
        if (!parameter_active(model.config, name)) {
            return;
        }
        *m[k] = beta1_ * *m[k] + (1.0 - beta1_) * *g[k];
        *v[k] = beta2_ * *v[k] + (1.0 - beta2_) * g[k]->cwiseProduct(*g[k]);
        theta *= 1.0 - lr_ * wd_;
        theta.array() -= lr_ * (m[k]->array() / bc1) / ((v[k]->array() / bc2).sqrt() + eps_);
    });
}

Evaluation evaluate(const Model& model, std::span<const LabeledGraph> graphs, double threshold, int jobs) {
    Evaluation ev;
    ev.predictions = predict_all(model, graphs, threshold, jobs);
    if (!graphs.empty()) {
        std::vector<int> predicted;
        std::vector<int> labels;
        for (std::size_t i = 0; i < graphs.size(); ++i) {
            predicted.push_back(ev.predictions[i].predicted_label);
            labels.push_back(graphs[i].label);
        }
        ev.metrics = metrics::metrics_from_labels(predicted, labels);
    }
    return ev;
}

TrainResult train(const Model& init, std::span<const LabeledGraph> train_set, std::span<const LabeledGraph> val_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) {
        throw DomainError("training split is empty");
    }
    bool has_pos = false;
    bool has_neg = false;
    for (const LabeledGraph& g : train_set) {
        has_pos = has_pos || g.label == 1;
        has_neg = has_neg || g.label == 0;
    }
    if (!has_pos || !has_neg) {
        throw DomainError("training split contains a single class");
    }

    TrainResult result;
    Model model = init;
    AdamW opt(cfg, model);
    ModelParams grads = model.params.zeros_like();
    Rng dropout_rng(derive_seed(cfg.seed, 0x64726f70ULL));

    const auto n_train = static_cast<int>(train_set.size());
    const int batch = std::min(cfg.batch_size, n_train);
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    bool have_best = false;
    int epochs_since_best = 0;
    auto evaluate_val = [&](int step) -> std::optional<metrics::Metrics> {
        if (val_set.empty()) {
            return std::nullopt;
        }
        const Evaluation ev = evaluate(model, val_set, cfg.threshold);
        if (!have_best || ev.metrics.f1 > result.best_val_f1) {
            result.best = model;
            result.best_step = step;
            result.best_val_f1 = ev.metrics.f1;
            have_best = true;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }
        return ev.metrics;
    };

    int step = 0;
    int epoch = 0;
    bool stop = false;
    while (!stop) {
        Rng shuffle_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (int start = 0; start < n_train && !stop; start += batch) {
            const int end = std::min(start + batch, n_train);
            const double inv = 1.0 / static_cast<double>(end - start);
            grads.set_zero();
            double loss_sum = 0.0;
            for (int b = start; b < end; ++b) {
                const LabeledGraph& g = train_set[static_cast<std::size_t>(order[static_cast<std::size_t>(b)])];
                ad::Tape tape(true);
                ForwardOptions fo;
                fo.training = true;
                fo.rng = &dropout_rng;
                const ForwardPass fp = forward(tape, model, &grads, g, fo);
                const ad::Var loss = ad::bce(fp.probability, static_cast<double>(g.label));
                loss_sum += loss.value()(0, 0);
                tape.backward(loss, inv);
            }
            opt.step(model, grads);
            ++step;
            result.history.push_back(HistoryRow{step, epoch, loss_sum * inv, std::nullopt});
            if (step >= cfg.max_iterations) {
                stop = true;
            }
        }
        // end of an epoch, or the final partial one
        result.history.back().val = evaluate_val(step);
        if (cfg.patience && epochs_since_best >= *cfg.patience) {
            stop = true;
        }
        ++epoch;
    }

    result.last = model;
    result.last_val = result.history.back().val;
    if (!have_best) {
        result.best = model;
        result.best_step = step;
    }
    return result;
}

std::string history_csv(std::span<const HistoryRow> history) {
    std::string out = "step,epoch,loss,val_accuracy,val_precision,val_recall,val_f1\n";
    for (const HistoryRow& r : history) {
        out += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + metrics::format_real(r.loss);
        if (r.val) {
            out += "," + metrics::format_real(r.val->accuracy) + "," + metrics::format_real(r.val->precision) + "," +
                   metrics::format_real(r.val->recall) + "," + metrics::format_real(r.val->f1);
        } else {
            out += ",,,,";
        }
        out += '\n';
    }
    return out;
}

GradCheckReport check_gradients(const Model& model, const LabeledGraph& g, double step, bool training,
                                std::uint64_t dropout_seed) {
    const double y = static_cast<double>(g.label);

    // Analytical pass; also fixes the selections.
    ModelParams grads = model.params.zeros_like();
    std::vector<std::vector<int>> frozen;
    {
        ad::Tape tape(true);
        Rng rng(dropout_seed);
        ForwardOptions fo;
        fo.training = training;
        fo.rng = &rng;
        const ForwardPass fp = forward(tape, model, &grads, g, fo);
        frozen = fp.trace.selections();
        tape.backward(ad::bce(fp.probability, y));
    }

    Model probe = model;
    auto loss_at = [&]() {
        ad::Tape tape(false);
        Rng rng(dropout_seed);
        ForwardOptions fo;
        fo.training = training;
        fo.rng = &rng;
        fo.frozen = &frozen;
        const ForwardPass fp = forward(tape, probe, nullptr, g, fo);
        return ad::bce(fp.probability, y).value()(0, 0);
    };

    std::vector<const Matrix*> analytic;
    grads.for_each([&](const std::string&, const Matrix& m) { analytic.push_back(&m); });

    GradCheckReport report;
    std::size_t k = 0;
    probe.params.for_each([&](const std::string& name, Matrix& theta) {
        const Matrix& a = *analytic[k++];
        if (!parameter_active(model.config, name)) {
            return;
        }
        Matrix numeric(theta.rows(), theta.cols());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            const double saved = theta.data()[i];
            theta.data()[i] = saved + step;
            const double up = loss_at();
            theta.data()[i] = saved - step;
            const double down = loss_at();
            theta.data()[i] = saved;
            numeric.data()[i] = (up - down) / (2.0 * step);
        }
        GradCheckEntry e;
        e.name = name;
        e.checked = theta.size();
        e.max_abs_error = (a - numeric).cwiseAbs().maxCoeff();
        const double scale = std::max({a.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-6});
        e.max_rel_error = e.max_abs_error / scale;
        report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
        report.entries.push_back(std::move(e));
    });
    return report;
}

} // namespace vulngraph
