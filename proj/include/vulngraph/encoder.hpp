#ifndef VULNGRAPH_ENCODER_HPP
#define VULNGRAPH_ENCODER_HPP

#include <span>
#include <vector>

#include "vulngraph/autograd.hpp"
#include "vulngraph/graph.hpp"

/// Stacked local/global blocks: graph convolution, dense multi-head
/// self-attention and a normalized feed-forward sublayer, the latter two with
/// residual connections, followed by a mean readout.
namespace vulngraph::encoder {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr int kFfnExpansion = 4;

struct AttentionHead {
    Matrix w_q; ///< hidden x hidden/H
    Matrix w_k;
    Matrix w_v;
};

struct EncoderBlock {
    Matrix w_g; ///< hidden x hidden
    std::vector<AttentionHead> heads;
    Matrix w_f1;      ///< hidden x 4 hidden
    Matrix w_f2;      ///< 4 hidden x hidden
    Matrix ln1_scale; ///< 1 x hidden, applied before w_f1
    Matrix ln1_shift;
    Matrix ln2_scale; ///< 1 x 4 hidden, applied before w_f2
    Matrix ln2_shift;
};

struct EncoderParams {
    std::vector<EncoderBlock> blocks;

    [[nodiscard]] int hidden() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().w_g.rows()); }

    static EncoderParams init(int hidden, int layers, int heads, Rng& rng);

    template <class F>
    void for_each(F&& f) {
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            EncoderBlock& blk = blocks[b];
            const std::string pre = "encoder." + std::to_string(b) + ".";
            f(pre + "w_g", blk.w_g);
            for (std::size_t h = 0; h < blk.heads.size(); ++h) {
                const std::string hp = pre + "head" + std::to_string(h) + ".";
                f(hp + "w_q", blk.heads[h].w_q);
                f(hp + "w_k", blk.heads[h].w_k);
                f(hp + "w_v", blk.heads[h].w_v);
            }
            f(pre + "w_f1", blk.w_f1);
            f(pre + "w_f2", blk.w_f2);
            f(pre + "ln1_scale", blk.ln1_scale);
            f(pre + "ln1_shift", blk.ln1_shift);
            f(pre + "ln2_scale", blk.ln2_scale);
            f(pre + "ln2_shift", blk.ln2_shift);
        }
    }
};

/// Which sublayers run; a disabled sublayer is the identity.
struct EncoderOptions {
    bool use_gnn = true;
    bool use_gt = true;
};

struct BoundHead {
    ad::Var w_q, w_k, w_v;
};

struct BoundBlock {
    ad::Var w_g;
    std::vector<BoundHead> heads;
    ad::Var w_f1, w_f2, ln1_scale, ln1_shift, ln2_scale, ln2_shift;
};

BoundBlock bind(ad::Tape& tape, const EncoderBlock& blk, EncoderBlock* grads);

/// ReLU(Â X W_g)
ad::Var gcn_layer(ad::Var x, const ad::SharedSparse& norm_adj, ad::Var w_g);
/// Concat over heads of softmax(Q K^T / sqrt(hidden/H)) V, unmasked.
ad::Var multi_head_attention(ad::Var x, std::span<const BoundHead> heads);
/// LN2(ReLU(LN1(X) W_f1)) W_f2
ad::Var feed_forward(ad::Var x, const BoundBlock& blk);
ad::Var gnn_gt_block(ad::Var x, const ad::SharedSparse& norm_adj, const BoundBlock& blk, const EncoderOptions& opt);
/// Runs every block over one normalized adjacency, then averages node rows.
ad::Var encode_graph(ad::Var x, const ad::SharedSparse& norm_adj, std::span<const BoundBlock> blocks,
                     const EncoderOptions& opt);

// Value-level wrappers.
Matrix gcn_layer(const Matrix& x, const NormalizedAdjacency& norm_adj, const Matrix& w_g);
Matrix multi_head_attention(const Matrix& x, std::span<const AttentionHead> heads);
/// Row-stochastic attention matrix of every head.
std::vector<Matrix> attention_weights(const Matrix& x, std::span<const AttentionHead> heads);
Matrix feed_forward(const Matrix& x, const EncoderBlock& blk);
Matrix gnn_gt_block(const Matrix& x, const NormalizedAdjacency& norm_adj, const EncoderBlock& blk,
                    const EncoderOptions& opt = {});
/// Graph embedding o, 1 x hidden.
RowVector encode_graph(const Matrix& x, const NormalizedAdjacency& norm_adj, const EncoderParams& params,
                       const EncoderOptions& opt = {});

} // namespace vulngraph::encoder

#endif // VULNGRAPH_ENCODER_HPP
