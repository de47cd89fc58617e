#pragma once

#include <vector>

#include "facemotion/nn/tensor.hpp"

namespace facemotion::nn {

// Elementwise / arithmetic
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // row is 1 x n
Tensor relu(const Tensor& a);

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Shape ops
Tensor slice_rows(const Tensor& a, Eigen::Index r0, Eigen::Index len);
Tensor slice_cols(const Tensor& a, Eigen::Index c0, Eigen::Index len);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor upsample_rows_nearest(const Tensor& a, int factor);
// Mean over groups of `factor` consecutive rows; a trailing partial group is
// averaged over its actual length. Output has ceil(T/factor) rows.
Tensor pool_rows_mean(const Tensor& a, int factor);
Tensor mean_rows(const Tensor& a);  // -> 1 x n

// Normalization / attention
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);
Tensor softmax_rows(const Tensor& x);
// mask01: 1 = attend, 0 = blocked. Blocked entries receive a large negative
// additive bias before the softmax (selection semantics of a multiplicative
// {0,1} mask, numerically stable).
Tensor masked_softmax_rows(const Tensor& x, const Mat& mask01);

// Reductions / losses (all return 1x1 tensors)
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);
Tensor sum_sq(const Tensor& a);
// Mean cross-entropy of row-wise logits against integer targets; rows whose
// target equals ignore_id contribute nothing. Throws if every row is ignored.
Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets, int ignore_id = -1);

// Lookup / gradient routing
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);
Tensor stop_grad(const Tensor& a);
// Value of `quantized`, gradient copied to `z` (straight-through estimator).
Tensor straight_through(const Tensor& z, const Mat& quantized);

// Convolution support: unfold a T x Cin sequence into a
// T_out x (kernel*Cin) matrix with zero padding so a conv1d becomes a matmul.
Tensor im2col(const Tensor& x, int kernel, int stride, int pad_left, int pad_right);

// Value-level helpers (no graph)
Mat softmax_rows_value(const Mat& x);
double logsumexp_row(const Eigen::RowVectorXd& row);

}  // namespace facemotion::nn
