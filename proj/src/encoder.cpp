#include "vulngraph/encoder.hpp"

#include <cmath>
#include <string>

#include "vulngraph/errors.hpp"

namespace vulngraph::encoder {

EncoderParams EncoderParams::init(int hidden, int layers, int heads, Rng& rng) {
    if (hidden < 1 || layers < 0 || heads < 1 || hidden % heads != 0) {
        throw InputError("encoder: hidden must be a positive multiple of heads");
    }
    const int head_dim = hidden / heads;
    EncoderParams p;
    p.blocks.reserve(static_cast<std::size_t>(layers));
    for (int b = 0; b < layers; ++b) {
        EncoderBlock blk;
        blk.w_g = glorot_uniform(hidden, hidden, rng);
        for (int h = 0; h < heads; ++h) {
            AttentionHead head;
            head.w_q = glorot_uniform(hidden, head_dim, rng);
            head.w_k = glorot_uniform(hidden, head_dim, rng);
            head.w_v = glorot_uniform(hidden, head_dim, rng);
            blk.heads.push_back(std::move(head));
        }
        blk.w_f1 = glorot_uniform(hidden, kFfnExpansion * hidden, rng);
        blk.w_f2 = glorot_uniform(kFfnExpansion * hidden, hidden, rng);
        blk.ln1_scale = Matrix::Ones(1, hidden);
        blk.ln1_shift = Matrix::Zero(1, hidden);
        blk.ln2_scale = Matrix::Ones(1, kFfnExpansion * hidden);
        blk.ln2_shift = Matrix::Zero(1, kFfnExpansion * hidden);
        p.blocks.push_back(std::move(blk));
    }
    return p;
}

BoundBlock bind(ad::Tape& tape, const EncoderBlock& blk, EncoderBlock* grads) {
    auto param = [&](const Matrix& m, Matrix EncoderBlock::*member) {
        return tape.parameter(m, grads != nullptr ? &(grads->*member) : nullptr);
    };
    BoundBlock b;
    b.w_g = param(blk.w_g, &EncoderBlock::w_g);
    for (std::size_t h = 0; h < blk.heads.size(); ++h) {
        AttentionHead* gh = grads != nullptr ? &grads->heads[h] : nullptr;
        b.heads.push_back(BoundHead{tape.parameter(blk.heads[h].w_q, gh != nullptr ? &gh->w_q : nullptr),
                                    tape.parameter(blk.heads[h].w_k, gh != nullptr ? &gh->w_k : nullptr),
                                    tape.parameter(blk.heads[h].w_v, gh != nullptr ? &gh->w_v : nullptr)});
    }
    b.w_f1 = param(blk.w_f1, &EncoderBlock::w_f1);
    b.w_f2 = param(blk.w_f2, &EncoderBlock::w_f2);
    b.ln1_scale = param(blk.ln1_scale, &EncoderBlock::ln1_scale);
    b.ln1_shift = param(blk.ln1_shift, &EncoderBlock::ln1_shift);
    b.ln2_scale = param(blk.ln2_scale, &EncoderBlock::ln2_scale);
    b.ln2_shift = param(blk.ln2_shift, &EncoderBlock::ln2_shift);
    return b;
}

ad::Var gcn_layer(ad::Var x, const ad::SharedSparse& norm_adj, ad::Var w_g) {
    if (norm_adj->rows() != x.rows() || w_g.rows() != x.cols()) {
        throw InputError("gcn_layer: shape mismatch");
    }
    return ad::relu(ad::matmul(ad::spmm(norm_adj, x), w_g));
}

ad::Var multi_head_attention(ad::Var x, std::span<const BoundHead> heads) {
    if (heads.empty()) {
        throw InputError("multi_head_attention: no heads");
    }
    const Eigen::Index head_dim = heads.front().w_q.cols();
    if (head_dim * static_cast<Eigen::Index>(heads.size()) != x.cols()) {
        throw InputError("multi_head_attention: hidden width must equal heads * head_dim");
    }
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<ad::Var> outs;
    outs.reserve(heads.size());
    for (const BoundHead& h : heads) {
        const ad::Var q = ad::matmul(x, h.w_q);
        const ad::Var k = ad::matmul(x, h.w_k);
        const ad::Var v = ad::matmul(x, h.w_v);
        const ad::Var attn = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_scale));
        outs.push_back(ad::matmul(attn, v));
    }
    return ad::concat_cols(outs);
}

ad::Var feed_forward(ad::Var x, const BoundBlock& blk) {
    if (blk.w_f1.rows() != x.cols()) {
        throw InputError("feed_forward: shape mismatch");
    }
    const ad::Var u = ad::relu(ad::matmul(ad::layer_norm_rows(x, blk.ln1_scale, blk.ln1_shift, kLayerNormEps), blk.w_f1));
    return ad::matmul(ad::layer_norm_rows(u, blk.ln2_scale, blk.ln2_shift, kLayerNormEps), blk.w_f2);
}

ad::Var gnn_gt_block(ad::Var x, const ad::SharedSparse& norm_adj, const BoundBlock& blk, const EncoderOptions& opt) {
    const ad::Var x1 = opt.use_gnn ? gcn_layer(x, norm_adj, blk.w_g) : x;
    if (!opt.use_gt) {
        return x1;
    }
    const ad::Var x2 = ad::add(multi_head_attention(x1, blk.heads), x1);
    return ad::add(feed_forward(x2, blk), x2);
}

ad::Var encode_graph(ad::Var x, const ad::SharedSparse& norm_adj, std::span<const BoundBlock> blocks,
                     const EncoderOptions& opt) {
    if (x.rows() < 1) {
        throw InputError("encode_graph: empty graph");
    }
    ad::Var cur = x;
    for (const BoundBlock& blk : blocks) {
        cur = gnn_gt_block(cur, norm_adj, blk, opt);
    }
    return ad::mean_rows(cur);
}

namespace {

std::vector<BoundHead> bind_heads(ad::Tape& tape, std::span<const AttentionHead> heads) {
    std::vector<BoundHead> out;
    for (const AttentionHead& h : heads) {
        out.push_back(BoundHead{tape.constant(h.w_q), tape.constant(h.w_k), tape.constant(h.w_v)});
    }
    return out;
}

ad::SharedSparse share(const NormalizedAdjacency& a) { return std::make_shared<const SparseMatrix>(a.matrix); }

} // namespace

Matrix gcn_layer(const Matrix& x, const NormalizedAdjacency& norm_adj, const Matrix& w_g) {
    ad::Tape tape(false);
    return gcn_layer(tape.constant(x), share(norm_adj), tape.constant(w_g)).value();
}

Matrix multi_head_attention(const Matrix& x, std::span<const AttentionHead> heads) {
    ad::Tape tape(false);
    const auto bound = bind_heads(tape, heads);
    return multi_head_attention(tape.constant(x), bound).value();
}

std::vector<Matrix> attention_weights(const Matrix& x, std::span<const AttentionHead> heads) {
    ad::Tape tape(false);
    const ad::Var xv = tape.constant(x);
    std::vector<Matrix> out;
    for (const AttentionHead& h : heads) {
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(h.w_q.cols()));
        const ad::Var q = ad::matmul(xv, tape.constant(h.w_q));
        const ad::Var k = ad::matmul(xv, tape.constant(h.w_k));
        out.push_back(ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_scale)).value());
    }
    return out;
}

Matrix feed_forward(const Matrix& x, const EncoderBlock& blk) {
    ad::Tape tape(false);
    const BoundBlock b = bind(tape, blk, nullptr);
    return feed_forward(tape.constant(x), b).value();
}

Matrix gnn_gt_block(const Matrix& x, const NormalizedAdjacency& norm_adj, const EncoderBlock& blk,
                    const EncoderOptions& opt) {
    ad::Tape tape(false);
    const BoundBlock b = bind(tape, blk, nullptr);
    return gnn_gt_block(tape.constant(x), share(norm_adj), b, opt).value();
}

RowVector encode_graph(const Matrix& x, const NormalizedAdjacency& norm_adj, const EncoderParams& params,
                       const EncoderOptions& opt) {
    ad::Tape tape(false);
    std::vector<BoundBlock> blocks;
    for (const EncoderBlock& blk : params.blocks) {
        blocks.push_back(bind(tape, blk, nullptr));
    }
    return encode_graph(tape.constant(x), share(norm_adj), blocks, opt).value().row(0);
}

} // namespace vulngraph::encoder
