#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "facemotion/common.hpp"
#include "facemotion/nn/ops.hpp"
#include "facemotion/nn/tensor.hpp"

namespace facemotion::nn {

// A learnable matrix plus optimizer state. Modules own their Params; training
// code collects raw pointers for the optimizer and for serialization.
struct Param {
    std::string name;
    Mat value;
    Mat grad;
    Mat adam_m;
    Mat adam_v;

    void reset_state() {
        grad = Mat::Zero(value.rows(), value.cols());
        adam_m = Mat::Zero(value.rows(), value.cols());
        adam_v = Mat::Zero(value.rows(), value.cols());
    }
};

using ParamList = std::vector<Param*>;

// Per-item forward context. Binds Params to graph leaves exactly once, so the
// same weight reused in a graph shares one node. After backward(), the caller
// drains gradients in a fixed order; accumulating items in index order keeps
// multi-threaded batches bit-reproducible.
class GraphCtx {
public:
    explicit GraphCtx(bool training) : training_(training) {}

    bool training() const { return training_; }

    Tensor use(Param& p) {
        auto it = index_.find(&p);
        if (it != index_.end()) {
            return bindings_[it->second].second;
        }
        Tensor t = training_ ? Tensor::leaf(p.value) : Tensor::constant(p.value);
        index_.emplace(&p, bindings_.size());
        bindings_.emplace_back(&p, t);
        return t;
    }

    // Adds each bound leaf's gradient into Param::grad. Call from one thread,
    // in deterministic item order.
    void accumulate_grads() {
        for (auto& [param, tensor] : bindings_) {
            if (tensor.node()->grad.size() != 0) {
                param->grad += tensor.node()->grad;
            }
        }
    }

private:
    bool training_;
    std::vector<std::pair<Param*, Tensor>> bindings_;
    std::unordered_map<const Param*, size_t> index_;
};

// Weight initializers
void init_xavier(Param& p, Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out);
void init_normal(Param& p, Rng& rng, double stddev);

struct Linear {
    Param weight;  // in x out
    Param bias;    // 1 x out

    Linear() = default;
    Linear(std::string name, int in, int out, Rng& rng);
    Tensor forward(GraphCtx& ctx, const Tensor& x) const;
    void collect(ParamList& out);
};

struct LayerNormLayer {
    Param gamma;
    Param beta;

    LayerNormLayer() = default;
    LayerNormLayer(std::string name, int dim);
    Tensor forward(GraphCtx& ctx, const Tensor& x) const;
    void collect(ParamList& out);
};

// 1-D convolution over time: input T x Cin, output T_out x Cout.
struct Conv1d {
    Param weight;  // (kernel*Cin) x Cout
    Param bias;    // 1 x Cout
    int kernel = 3;
    int stride = 1;
    int pad_left = 1;
    int pad_right = 1;

    Conv1d() = default;
    Conv1d(std::string name, int in, int out, int kernel, int stride, int pad_left, int pad_right,
           Rng& rng);
    Tensor forward(GraphCtx& ctx, const Tensor& x) const;
    void collect(ParamList& out);
};

struct FeedForward {
    Linear fc1;
    Linear fc2;

    FeedForward() = default;
    FeedForward(const std::string& name, int dim, int hidden, Rng& rng);
    Tensor forward(GraphCtx& ctx, const Tensor& x) const;
    void collect(ParamList& out);
};

// Multi-head attention over row-major sequences. The optional mask01 has one
// row per query and one column per key (1 = attend).
struct MultiHeadAttention {
    Linear wq, wk, wv, wo;
    int heads = 4;
    int dim = 0;

    MultiHeadAttention() = default;
    MultiHeadAttention(const std::string& name, int dim, int heads, Rng& rng);
    Tensor forward(GraphCtx& ctx, const Tensor& queries, const Tensor& keys_values,
                   const Mat* mask01) const;
    void collect(ParamList& out);
};

// Pre-norm transformer encoder layer (self-attention + feed-forward).
struct TransformerEncoderLayer {
    LayerNormLayer norm1, norm2;
    MultiHeadAttention attn;
    FeedForward ffn;

    TransformerEncoderLayer() = default;
    TransformerEncoderLayer(const std::string& name, int dim, int heads, int hidden, Rng& rng);
    Tensor forward(GraphCtx& ctx, const Tensor& x, const Mat* mask01 = nullptr) const;
    void collect(ParamList& out);
};

// Pre-norm transformer decoder layer: causal self-attention, optional
// cross-attention with a bias mask, feed-forward.
struct TransformerDecoderLayer {
    LayerNormLayer norm1, norm2, norm3;
    MultiHeadAttention self_attn;
    MultiHeadAttention cross_attn;
    FeedForward ffn;

    TransformerDecoderLayer() = default;
    TransformerDecoderLayer(const std::string& name, int dim, int heads, int hidden, Rng& rng);
    Tensor forward(GraphCtx& ctx, const Tensor& x, const Mat& causal_mask, const Tensor& memory,
                   const Mat* cross_mask01) const;
    bool has_cross() const { return cross_attn.dim > 0; }
    void collect(ParamList& out);
};

struct EmbeddingTable {
    Param table;  // vocab x dim

    EmbeddingTable() = default;
    EmbeddingTable(std::string name, int vocab, int dim, Rng& rng);
    Tensor forward(GraphCtx& ctx, const std::vector<int>& ids) const;
    void collect(ParamList& out);
};

Mat causal_mask(Eigen::Index t);                     // t x t lower-triangular ones
Mat sinusoidal_positions(Eigen::Index t, int dim);   // standard fixed encoding

}  // namespace facemotion::nn
