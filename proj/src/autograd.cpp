#include "vulngraph/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vulngraph/errors.hpp"

namespace vulngraph::ad {

namespace {

void require(bool ok, const char* what) {
    if (!ok) {
        throw InputError(std::string("shape mismatch: ") + what);
    }
}

Tape& same_tape(Var a, Var b) {
    if (&a.tape() != &b.tape()) {
        throw InputError("operands recorded on different tapes");
    }
    return a.tape();
}

} // namespace

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(const Matrix& value, Matrix* grad_sink) {
    nodes_.push_back(Node{value, {}, record_, record_ ? grad_sink : nullptr, {}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, record_, nullptr, {}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
    const bool keep = record_ && requires_grad;
    nodes_.push_back(Node{std::move(value), {}, keep, nullptr, keep ? std::move(backward) : BackwardFn{}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& node = nodes_[v.id_];
    if (!node.requires_grad) {
        return;
    }
    if (node.grad.size() == 0) {
        node.grad = g;
    } else {
        node.grad += g;
    }
}

void Tape::backward(Var output, double seed) {
    if (!record_) {
        throw InputError("backward() on a tape built without recording");
    }
    if (output.rows() != 1 || output.cols() != 1) {
        throw InputError("backward() expects a 1x1 output");
    }
    nodes_[output.id_].grad = Matrix::Constant(1, 1, seed);
    for (int i = output.id_; i >= 0; --i) {
        Node& node = nodes_[i];
        if (node.grad.size() == 0) {
            continue;
        }
        if (node.backward) {
            node.backward(*this, node.grad);
        }
        if (node.sink != nullptr) {
            *node.sink += node.grad;
        }
    }
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require(a.cols() == b.rows(), "matmul");
    Matrix out = a.value() * b.value();
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.record(std::move(out), rg, [a, b](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) {
            tape.accumulate(a, g * b.value().transpose());
        }
        if (tape.requires_grad(b)) {
            tape.accumulate(b, a.value().transpose() * g);
        }
    });
}

Var matmul_nt(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require(a.cols() == b.cols(), "matmul_nt");
    Matrix out = a.value() * b.value().transpose();
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.record(std::move(out), rg, [a, b](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) {
            tape.accumulate(a, g * b.value());
        }
        if (tape.requires_grad(b)) {
            tape.accumulate(b, g.transpose() * a.value());
        }
    });
}

Var spmm(const SharedSparse& s, Var x) {
    require(s->cols() == x.rows(), "spmm");
    Tape& t = x.tape();
    Matrix out = (*s) * x.value();
    return t.record(std::move(out), t.requires_grad(x), [s, x](Tape& tape, const Matrix& g) {
        tape.accumulate(x, s->transpose() * g);
    });
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add");
    Matrix out = a.value() + b.value();
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.record(std::move(out), rg, [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g);
        tape.accumulate(b, g);
    });
}

Var scale(Var a, double s) {
    Tape& t = a.tape();
    Matrix out = a.value() * s;
    return t.record(std::move(out), t.requires_grad(a),
                    [a, s](Tape& tape, const Matrix& g) { tape.accumulate(a, g * s); });
}

Var relu(Var a) {
    Tape& t = a.tape();
    Matrix out = a.value().cwiseMax(0.0);
    return t.record(std::move(out), t.requires_grad(a), [a](Tape& tape, const Matrix& g) {
        tape.accumulate(a, (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(g));
    });
}

Var sigmoid(Var a) {
    Tape& t = a.tape();
    Matrix out = a.value().unaryExpr([](double v) {
        // split by sign so exp never overflows
        if (v >= 0.0) {
            return 1.0 / (1.0 + std::exp(-v));
        }
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    Matrix saved = out;
    return t.record(std::move(out), t.requires_grad(a), [a, saved](Tape& tape, const Matrix& g) {
        tape.accumulate(a, (saved.array() * (1.0 - saved.array()) * g.array()).matrix());
    });
}

Var hadamard(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard");
    Matrix out = a.value().cwiseProduct(b.value());
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.record(std::move(out), rg, [a, b](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) {
            tape.accumulate(a, g.cwiseProduct(b.value()));
        }
        if (tape.requires_grad(b)) {
            tape.accumulate(b, g.cwiseProduct(a.value()));
        }
    });
}

Var row_scale(Var x, Var s) {
    Tape& t = same_tape(x, s);
    require(s.cols() == 1 && s.rows() == x.rows(), "row_scale");
    Matrix out = s.value().col(0).asDiagonal() * x.value();
    const bool rg = t.requires_grad(x) || t.requires_grad(s);
    return t.record(std::move(out), rg, [x, s](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(x)) {
            tape.accumulate(x, s.value().col(0).asDiagonal() * g);
        }
        if (tape.requires_grad(s)) {
            tape.accumulate(s, g.cwiseProduct(x.value()).rowwise().sum());
        }
    });
}

Var gather_rows(Var x, std::span<const int> idx) {
    Tape& t = x.tape();
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= x.rows()) {
            throw InputError("gather_rows: index out of range");
        }
        out.row(static_cast<Eigen::Index>(r)) = x.value().row(idx[r]);
    }
    std::vector<int> rows(idx.begin(), idx.end());
    return t.record(std::move(out), t.requires_grad(x), [x, rows](Tape& tape, const Matrix& g) {
        Matrix gx = Matrix::Zero(x.rows(), x.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            gx.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
        }
        tape.accumulate(x, gx);
    });
}

Var normalize(Var h) {
    Tape& t = h.tape();
    require(h.cols() == 1, "normalize expects a column vector");
    const double norm = h.value().norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw NumericalError("scoring vector has zero or non-finite norm");
    }
    Matrix out = h.value() / norm;
    Matrix u = out;
    return t.record(std::move(out), t.requires_grad(h), [h, u, norm](Tape& tape, const Matrix& g) {
        const double proj = (u.transpose() * g)(0, 0);
        tape.accumulate(h, (g - u * proj) / norm);
    });
}

Var softmax_rows(Var a) {
    Tape& t = a.tape();
    Matrix out(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double mx = a.value().row(r).maxCoeff();
        out.row(r) = (a.value().row(r).array() - mx).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    Matrix y = out;
    return t.record(std::move(out), t.requires_grad(a), [a, y](Tape& tape, const Matrix& g) {
        const Vector dots = g.cwiseProduct(y).rowwise().sum();
        Matrix ga = y.cwiseProduct(g - dots.replicate(1, g.cols()));
        tape.accumulate(a, ga);
    });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    Tape& t = same_tape(x, gamma);
    require(gamma.rows() == 1 && gamma.cols() == x.cols(), "layer_norm gamma");
    require(beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm beta");
    const Eigen::Index n = x.rows();
    const auto c = static_cast<double>(x.cols());
    Matrix xhat(n, x.cols());
    Vector inv_std(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mean = x.value().row(r).mean();
        const RowVector centered = x.value().row(r).array() - mean;
        const double var = centered.squaredNorm() / c;
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = centered * inv_std(r);
    }
    Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
    out.rowwise() += beta.value().row(0);
    const bool rg = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
    return t.record(std::move(out), rg, [x, gamma, beta, xhat, inv_std, c](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(beta)) {
            tape.accumulate(beta, g.colwise().sum());
        }
        if (tape.requires_grad(gamma)) {
            tape.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        }
        if (tape.requires_grad(x)) {
            const Matrix gxhat = (g.array().rowwise() * gamma.value().row(0).array()).matrix();
            Matrix gx(g.rows(), g.cols());
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                const double m1 = gxhat.row(r).sum() / c;
                const double m2 = gxhat.row(r).dot(xhat.row(r)) / c;
                gx.row(r) = inv_std(r) * (gxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
            }
            tape.accumulate(x, gx);
        }
    });
}

Var mean_rows(Var x) {
    Tape& t = x.tape();
    require(x.rows() > 0, "mean_rows of an empty matrix");
    Matrix out = x.value().colwise().mean();
    return t.record(std::move(out), t.requires_grad(x), [x](Tape& tape, const Matrix& g) {
        tape.accumulate(x, g.replicate(x.rows(), 1) / static_cast<double>(x.rows()));
    });
}

Var concat_cols(std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols of nothing");
    Tape& t = parts.front().tape();
    Eigen::Index total = 0;
    bool rg = false;
    for (const Var& p : parts) {
        require(p.rows() == parts.front().rows(), "concat_cols rows");
        total += p.cols();
        rg = rg || t.requires_grad(p);
    }
    Matrix out(parts.front().rows(), total);
    Eigen::Index offset = 0;
    for (const Var& p : parts) {
        out.middleCols(offset, p.cols()) = p.value();
        offset += p.cols();
    }
    std::vector<Var> saved(parts.begin(), parts.end());
    return t.record(std::move(out), rg, [saved](Tape& tape, const Matrix& g) {
        Eigen::Index off = 0;
        for (const Var& p : saved) {
            if (tape.requires_grad(p)) {
                tape.accumulate(p, g.middleCols(off, p.cols()));
            }
            off += p.cols();
        }
    });
}

Var dropout(Var x, double rate, Rng& rng) {
    if (rate <= 0.0) {
        return x;
    }
    if (rate >= 1.0) {
        throw InputError("dropout rate must be < 1");
    }
    std::bernoulli_distribution keep(1.0 - rate);
    Matrix mask(x.rows(), x.cols());
    const double inv = 1.0 / (1.0 - rate);
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
            mask(r, c) = keep(rng) ? inv : 0.0;
        }
    }
    return hadamard(x, x.tape().constant(std::move(mask)));
}

Var appnp(Var x0, const SharedSparse& s, int steps, double alpha) {
    require(s->rows() == x0.rows() && s->cols() == x0.rows(), "appnp adjacency");
    if (steps < 0) {
        throw InputError("appnp: negative step count");
    }
    Tape& t = x0.tape();
    Matrix cur = x0.value();
    for (int i = 0; i < steps; ++i) {
        Matrix next = (1.0 - alpha) * ((*s) * cur);
        next += alpha * x0.value();
        cur = std::move(next);
    }
    return t.record(std::move(cur), t.requires_grad(x0), [x0, s, steps, alpha](Tape& tape, const Matrix& g) {
        // d out / d X_{t-1} = (1-alpha) S^T, and every step feeds alpha * X_0.
        Matrix gt = g;
        Matrix gx0 = Matrix::Zero(g.rows(), g.cols());
        for (int i = 0; i < steps; ++i) {
            gx0 += alpha * gt;
            gt = (1.0 - alpha) * (s->transpose() * gt);
        }
        gx0 += gt;
        tape.accumulate(x0, gx0);
    });
}

Var bce(Var p, double y, double eps) {
    Tape& t = p.tape();
    require(p.rows() == 1 && p.cols() == 1, "bce expects a 1x1 probability");
    const double raw = p.value()(0, 0);
    const double pc = std::clamp(raw, eps, 1.0 - eps);
    const double loss = -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    const bool clamped = raw != pc;
    return t.record(Matrix::Constant(1, 1, loss), t.requires_grad(p), [p, y, pc, clamped](Tape& tape, const Matrix& g) {
        const double d = clamped ? 0.0 : (-y / pc + (1.0 - y) / (1.0 - pc));
        tape.accumulate(p, Matrix::Constant(1, 1, d * g(0, 0)));
    });
}

} // namespace vulngraph::ad
