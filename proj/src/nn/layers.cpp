#include "facemotion/nn/layers.hpp"

#include <cmath>

namespace facemotion::nn {

void init_xavier(Param& p, Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
            p.value(i, j) = rng.uniform(-limit, limit);
        }
    }
    p.reset_state();
}

void init_normal(Param& p, Rng& rng, double stddev) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
            p.value(i, j) = rng.normal(0.0, stddev);
        }
    }
    p.reset_state();
}

Linear::Linear(std::string name, int in, int out, Rng& rng) {
    weight.name = name + ".weight";
    weight.value = Mat(in, out);
    init_xavier(weight, rng, in, out);
    bias.name = name + ".bias";
    bias.value = Mat::Zero(1, out);
    bias.reset_state();
}

Tensor Linear::forward(GraphCtx& ctx, const Tensor& x) const {
    auto& self = const_cast<Linear&>(*this);
    return add_rowvec(matmul(x, ctx.use(self.weight)), ctx.use(self.bias));
}

void Linear::collect(ParamList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

LayerNormLayer::LayerNormLayer(std::string name, int dim) {
    gamma.name = name + ".gamma";
    gamma.value = Mat::Ones(1, dim);
    gamma.reset_state();
    beta.name = name + ".beta";
    beta.value = Mat::Zero(1, dim);
    beta.reset_state();
}

Tensor LayerNormLayer::forward(GraphCtx& ctx, const Tensor& x) const {
    auto& self = const_cast<LayerNormLayer&>(*this);
    return layer_norm(x, ctx.use(self.gamma), ctx.use(self.beta));
}

void LayerNormLayer::collect(ParamList& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

Conv1d::Conv1d(std::string name, int in, int out, int kernel, int stride, int pad_left,
               int pad_right, Rng& rng)
    : kernel(kernel), stride(stride), pad_left(pad_left), pad_right(pad_right) {
    weight.name = name + ".weight";
    weight.value = Mat(kernel * in, out);
    init_xavier(weight, rng, kernel * in, out);
    bias.name = name + ".bias";
    bias.value = Mat::Zero(1, out);
    bias.reset_state();
}

Tensor Conv1d::forward(GraphCtx& ctx, const Tensor& x) const {
    auto& self = const_cast<Conv1d&>(*this);
    Tensor cols = im2col(x, kernel, stride, pad_left, pad_right);
    return add_rowvec(matmul(cols, ctx.use(self.weight)), ctx.use(self.bias));
}

void Conv1d::collect(ParamList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

FeedForward::FeedForward(const std::string& name, int dim, int hidden, Rng& rng)
    : fc1(name + ".fc1", dim, hidden, rng), fc2(name + ".fc2", hidden, dim, rng) {}

Tensor FeedForward::forward(GraphCtx& ctx, const Tensor& x) const {
    return fc2.forward(ctx, relu(fc1.forward(ctx, x)));
}

void FeedForward::collect(ParamList& out) {
    fc1.collect(out);
    fc2.collect(out);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, int dim, int heads, Rng& rng)
    : wq(name + ".wq", dim, dim, rng),
      wk(name + ".wk", dim, dim, rng),
      wv(name + ".wv", dim, dim, rng),
      wo(name + ".wo", dim, dim, rng),
      heads(heads),
      dim(dim) {
    if (dim % heads != 0) {
        throw ValidationError("attention dim must be divisible by heads");
    }
}

Tensor MultiHeadAttention::forward(GraphCtx& ctx, const Tensor& queries, const Tensor& keys_values,
                                   const Mat* mask01) const {
    const int head_dim = dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Tensor q = wq.forward(ctx, queries);
    Tensor k = wk.forward(ctx, keys_values);
    Tensor v = wv.forward(ctx, keys_values);
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * head_dim, head_dim);
        Tensor kh = slice_cols(k, h * head_dim, head_dim);
        Tensor vh = slice_cols(v, h * head_dim, head_dim);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        Tensor probs = mask01 ? masked_softmax_rows(scores, *mask01) : softmax_rows(scores);
        head_outputs.push_back(matmul(probs, vh));
    }
    return wo.forward(ctx, concat_cols(head_outputs));
}

void MultiHeadAttention::collect(ParamList& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
}

TransformerEncoderLayer::TransformerEncoderLayer(const std::string& name, int dim, int heads,
                                                 int hidden, Rng& rng)
    : norm1(name + ".norm1", dim),
      norm2(name + ".norm2", dim),
      attn(name + ".attn", dim, heads, rng),
      ffn(name + ".ffn", dim, hidden, rng) {}

Tensor TransformerEncoderLayer::forward(GraphCtx& ctx, const Tensor& x, const Mat* mask01) const {
    Tensor normed = norm1.forward(ctx, x);
    Tensor y = add(x, attn.forward(ctx, normed, normed, mask01));
    return add(y, ffn.forward(ctx, norm2.forward(ctx, y)));
}

void TransformerEncoderLayer::collect(ParamList& out) {
    norm1.collect(out);
    norm2.collect(out);
    attn.collect(out);
    ffn.collect(out);
}

TransformerDecoderLayer::TransformerDecoderLayer(const std::string& name, int dim, int heads,
                                                 int hidden, Rng& rng)
    : norm1(name + ".norm1", dim),
      norm2(name + ".norm2", dim),
      norm3(name + ".norm3", dim),
      self_attn(name + ".self_attn", dim, heads, rng),
      cross_attn(name + ".cross_attn", dim, heads, rng),
      ffn(name + ".ffn", dim, hidden, rng) {}

Tensor TransformerDecoderLayer::forward(GraphCtx& ctx, const Tensor& x, const Mat& causal,
                                        const Tensor& memory, const Mat* cross_mask01) const {
    Tensor normed = norm1.forward(ctx, x);
    Tensor y = add(x, self_attn.forward(ctx, normed, normed, &causal));
    if (memory.defined()) {
        y = add(y, cross_attn.forward(ctx, norm2.forward(ctx, y), memory, cross_mask01));
    }
    return add(y, ffn.forward(ctx, norm3.forward(ctx, y)));
}

void TransformerDecoderLayer::collect(ParamList& out) {
    norm1.collect(out);
    norm2.collect(out);
    norm3.collect(out);
    self_attn.collect(out);
    cross_attn.collect(out);
    ffn.collect(out);
}

EmbeddingTable::EmbeddingTable(std::string name, int vocab, int dim, Rng& rng) {
    table.name = name + ".table";
    table.value = Mat(vocab, dim);
    init_normal(table, rng, 0.02);
}

Tensor EmbeddingTable::forward(GraphCtx& ctx, const std::vector<int>& ids) const {
    auto& self = const_cast<EmbeddingTable&>(*this);
    return embedding_rows(ctx.use(self.table), ids);
}

void EmbeddingTable::collect(ParamList& out) { out.push_back(&table); }

Mat causal_mask(Eigen::Index t) {
    Mat m = Mat::Zero(t, t);
    for (Eigen::Index i = 0; i < t; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            m(i, j) = 1.0;
        }
    }
    return m;
}

Mat sinusoidal_positions(Eigen::Index t, int dim) {
    Mat pos(t, dim);
    for (Eigen::Index i = 0; i < t; ++i) {
        for (int j = 0; j < dim; ++j) {
            const double angle =
                static_cast<double>(i) / std::pow(10000.0, 2.0 * (j / 2) / static_cast<double>(dim));
            pos(i, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pos;
}

}  // namespace facemotion::nn
