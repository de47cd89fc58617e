#include "facemotion/nn/ops.hpp"

#include <cmath>

#include "facemotion/common.hpp"

namespace facemotion::nn {

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ValidationError(std::string(op) + ": shape mismatch");
    }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(an->value + bn->value, {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad() += self.grad;
        if (bn->requires_grad) bn->ensure_grad() += self.grad;
    }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(an->value - bn->value, {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad() += self.grad;
        if (bn->requires_grad) bn->ensure_grad() -= self.grad;
    }));
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "hadamard");
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(an->value.cwiseProduct(bn->value), {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad() += self.grad.cwiseProduct(bn->value);
        if (bn->requires_grad) bn->ensure_grad() += self.grad.cwiseProduct(an->value);
    }));
}

Tensor scale(const Tensor& a, double s) {
    auto an = a.node();
    return Tensor(make_node(an->value * s, {an}, [an, s](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad() += s * self.grad;
    }));
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ValidationError("add_rowvec: row must be 1 x cols(a)");
    }
    auto an = a.node();
    auto rn = row.node();
    Mat out = an->value;
    out.rowwise() += rn->value.row(0);
    return Tensor(make_node(std::move(out), {an, rn}, [an, rn](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad() += self.grad;
        if (rn->requires_grad) rn->ensure_grad() += self.grad.colwise().sum();
    }));
}

Tensor relu(const Tensor& a) {
    auto an = a.node();
    return Tensor(make_node(an->value.cwiseMax(0.0), {an}, [an](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad() += (an->value.array() > 0.0).cast<double>().matrix().cwiseProduct(self.grad);
    }));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ValidationError("matmul: inner dimensions differ");
    }
    auto an = a.node();
    auto bn = b.node();
    return Tensor(make_node(an->value * bn->value, {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad().noalias() += self.grad * bn->value.transpose();
        if (bn->requires_grad) bn->ensure_grad().noalias() += an->value.transpose() * self.grad;
    }));
}

Tensor transpose(const Tensor& a) {
    auto an = a.node();
    return Tensor(make_node(an->value.transpose(), {an}, [an](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad() += self.grad.transpose();
    }));
}

Tensor slice_rows(const Tensor& a, Eigen::Index r0, Eigen::Index len) {
    if (r0 < 0 || len < 0 || r0 + len > a.rows()) {
        throw ValidationError("slice_rows: out of range");
    }
    auto an = a.node();
    return Tensor(make_node(an->value.middleRows(r0, len), {an}, [an, r0, len](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad().middleRows(r0, len) += self.grad;
    }));
}

Tensor slice_cols(const Tensor& a, Eigen::Index c0, Eigen::Index len) {
    if (c0 < 0 || len < 0 || c0 + len > a.cols()) {
        throw ValidationError("slice_cols: out of range");
    }
    auto an = a.node();
    return Tensor(make_node(an->value.middleCols(c0, len), {an}, [an, c0, len](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad().middleCols(c0, len) += self.grad;
    }));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ValidationError("concat_rows: empty");
    }
    Eigen::Index total = 0;
    const Eigen::Index cols = parts.front().cols();
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) {
        if (p.cols() != cols) throw ValidationError("concat_rows: column mismatch");
        total += p.rows();
        nodes.push_back(p.node());
    }
    Mat out(total, cols);
    Eigen::Index r = 0;
    for (const auto& n : nodes) {
        out.middleRows(r, n->value.rows()) = n->value;
        r += n->value.rows();
    }
    return Tensor(make_node(std::move(out), nodes, [nodes](TensorNode& self) {
        Eigen::Index r = 0;
        for (const auto& n : nodes) {
            const Eigen::Index len = n->value.rows();
            if (n->requires_grad) n->ensure_grad() += self.grad.middleRows(r, len);
            r += len;
        }
    }));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ValidationError("concat_cols: empty");
    }
    Eigen::Index total = 0;
    const Eigen::Index rows = parts.front().rows();
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ValidationError("concat_cols: row mismatch");
        total += p.cols();
        nodes.push_back(p.node());
    }
    Mat out(rows, total);
    Eigen::Index c = 0;
    for (const auto& n : nodes) {
        out.middleCols(c, n->value.cols()) = n->value;
        c += n->value.cols();
    }
    return Tensor(make_node(std::move(out), nodes, [nodes](TensorNode& self) {
        Eigen::Index c = 0;
        for (const auto& n : nodes) {
            const Eigen::Index len = n->value.cols();
            if (n->requires_grad) n->ensure_grad() += self.grad.middleCols(c, len);
            c += len;
        }
    }));
}

Tensor upsample_rows_nearest(const Tensor& a, int factor) {
    if (factor < 1) throw ValidationError("upsample_rows_nearest: factor must be >= 1");
    auto an = a.node();
    const Eigen::Index t = an->value.rows();
    Mat out(t * factor, an->value.cols());
    for (Eigen::Index i = 0; i < t; ++i) {
        for (int j = 0; j < factor; ++j) {
            out.row(i * factor + j) = an->value.row(i);
        }
    }
    return Tensor(make_node(std::move(out), {an}, [an, factor](TensorNode& self) {
        if (!an->requires_grad) return;
        Mat& g = an->ensure_grad();
        for (Eigen::Index i = 0; i < an->value.rows(); ++i) {
            for (int j = 0; j < factor; ++j) {
                g.row(i) += self.grad.row(i * factor + j);
            }
        }
    }));
}

Tensor pool_rows_mean(const Tensor& a, int factor) {
    if (factor < 1) throw ValidationError("pool_rows_mean: factor must be >= 1");
    auto an = a.node();
    const Eigen::Index t = an->value.rows();
    const Eigen::Index groups = (t + factor - 1) / factor;
    Mat out = Mat::Zero(groups, an->value.cols());
    for (Eigen::Index g = 0; g < groups; ++g) {
        const Eigen::Index start = g * factor;
        const Eigen::Index len = std::min<Eigen::Index>(factor, t - start);
        out.row(g) = an->value.middleRows(start, len).colwise().mean();
    }
    return Tensor(make_node(std::move(out), {an}, [an, factor](TensorNode& self) {
        if (!an->requires_grad) return;
        Mat& g = an->ensure_grad();
        const Eigen::Index t = an->value.rows();
        for (Eigen::Index gi = 0; gi < self.grad.rows(); ++gi) {
            const Eigen::Index start = gi * factor;
            const Eigen::Index len = std::min<Eigen::Index>(factor, t - start);
            for (Eigen::Index r = 0; r < len; ++r) {
                g.row(start + r) += self.grad.row(gi) / static_cast<double>(len);
            }
        }
    }));
}

Tensor mean_rows(const Tensor& a) {
    auto an = a.node();
    Mat out = an->value.colwise().mean();
    return Tensor(make_node(std::move(out), {an}, [an](TensorNode& self) {
        if (!an->requires_grad) return;
        const double inv = 1.0 / static_cast<double>(an->value.rows());
        an->ensure_grad() += self.grad.replicate(an->value.rows(), 1) * inv;
    }));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 || beta.cols() != x.cols()) {
        throw ValidationError("layer_norm: gamma/beta must be 1 x cols(x)");
    }
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    const Eigen::Index n = xn->value.cols();
    Mat mean = xn->value.rowwise().mean();
    Mat centered = xn->value.colwise() - mean.col(0);
    Mat var = centered.array().square().matrix().rowwise().mean();
    Mat inv_std = (var.array() + eps).rsqrt().matrix();
    Mat xhat = centered.array().colwise() * inv_std.col(0).array();
    Mat out = xhat;
    out.array().rowwise() *= gn->value.row(0).array();
    out.rowwise() += bn->value.row(0);
    // capture xhat and inv_std for the backward pass
    auto xhat_p = std::make_shared<Mat>(std::move(xhat));
    auto inv_std_p = std::make_shared<Mat>(std::move(inv_std));
    return Tensor(make_node(std::move(out), {xn, gn, bn},
                            [xn, gn, bn, xhat_p, inv_std_p, n](TensorNode& self) {
        const Mat& xhat = *xhat_p;
        if (gn->requires_grad) {
            gn->ensure_grad() += self.grad.cwiseProduct(xhat).colwise().sum();
        }
        if (bn->requires_grad) {
            bn->ensure_grad() += self.grad.colwise().sum();
        }
        if (xn->requires_grad) {
            Mat g = self.grad;
            g.array().rowwise() *= gn->value.row(0).array();  // d out / d xhat
            Mat g_mean = g.rowwise().mean();
            Mat gx_mean = g.cwiseProduct(xhat).rowwise().mean();
            Mat dx = g;
            dx.colwise() -= g_mean.col(0);
            dx -= (xhat.array().colwise() * gx_mean.col(0).array()).matrix();
            dx.array().colwise() *= inv_std_p->col(0).array();
            xn->ensure_grad() += dx;
            (void)n;
        }
    }));
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
    auto xn = x.node();
    Eigen::VectorXd norms(xn->value.rows());
    Mat out(xn->value.rows(), xn->value.cols());
    for (Eigen::Index r = 0; r < xn->value.rows(); ++r) {
        norms(r) = std::max(eps, xn->value.row(r).norm());
        out.row(r) = xn->value.row(r) / norms(r);
    }
    auto norms_p = std::make_shared<Eigen::VectorXd>(std::move(norms));
    auto out_p = std::make_shared<Mat>(out);
    return Tensor(make_node(std::move(out), {xn}, [xn, norms_p, out_p](TensorNode& self) {
        if (!xn->requires_grad) return;
        Mat& g = xn->ensure_grad();
        for (Eigen::Index r = 0; r < self.grad.rows(); ++r) {
            const double dot = self.grad.row(r).dot(out_p->row(r));
            g.row(r) += (self.grad.row(r) - dot * out_p->row(r)) / (*norms_p)(r);
        }
    }));
}

namespace {
Mat softmax_impl(const Mat& scores) {
    Mat out(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double mx = scores.row(r).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(r).array() - mx).exp();
        out.row(r) = e / e.sum();
    }
    return out;
}

std::function<void(TensorNode&)> softmax_backward(std::shared_ptr<TensorNode> xn,
                                                  std::shared_ptr<Mat> probs) {
    return [xn, probs](TensorNode& self) {
        if (!xn->requires_grad) return;
        const Mat& p = *probs;
        Mat dx = self.grad.cwiseProduct(p);
        Eigen::VectorXd row_dot = dx.rowwise().sum();
        dx -= (p.array().colwise() * row_dot.array()).matrix();
        xn->ensure_grad() += dx;
    };
}
}  // namespace

Tensor softmax_rows(const Tensor& x) {
    auto xn = x.node();
    Mat p = softmax_impl(xn->value);
    auto probs = std::make_shared<Mat>(p);
    return Tensor(make_node(std::move(p), {xn}, softmax_backward(xn, probs)));
}

Tensor masked_softmax_rows(const Tensor& x, const Mat& mask01) {
    auto xn = x.node();
    if (mask01.rows() != xn->value.rows() || mask01.cols() != xn->value.cols()) {
        throw ValidationError("masked_softmax_rows: mask shape mismatch");
    }
    constexpr double kBlocked = -1e30;
    Mat scores = xn->value;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        bool any = false;
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            if (mask01(r, c) == 0.0) {
                scores(r, c) = kBlocked;
            } else {
                any = true;
            }
        }
        if (!any) {
            throw ValidationError("masked_softmax_rows: fully masked row");
        }
    }
    Mat p = softmax_impl(scores);
    auto probs = std::make_shared<Mat>(p);
    return Tensor(make_node(std::move(p), {xn}, softmax_backward(xn, probs)));
}

Tensor mean_all(const Tensor& a) {
    auto an = a.node();
    Mat out(1, 1);
    out(0, 0) = an->value.mean();
    return Tensor(make_node(std::move(out), {an}, [an](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad().array() += self.grad(0, 0) / static_cast<double>(an->value.size());
    }));
}

Tensor sum_all(const Tensor& a) {
    auto an = a.node();
    Mat out(1, 1);
    out(0, 0) = an->value.sum();
    return Tensor(make_node(std::move(out), {an}, [an](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad().array() += self.grad(0, 0);
    }));
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    auto an = a.node();
    auto bn = b.node();
    Mat out(1, 1);
    out(0, 0) = (an->value - bn->value).array().square().mean();
    return Tensor(make_node(std::move(out), {an, bn}, [an, bn](TensorNode& self) {
        const double c = 2.0 * self.grad(0, 0) / static_cast<double>(an->value.size());
        if (an->requires_grad) an->ensure_grad() += c * (an->value - bn->value);
        if (bn->requires_grad) bn->ensure_grad() -= c * (an->value - bn->value);
    }));
}

Tensor sum_sq(const Tensor& a) {
    auto an = a.node();
    Mat out(1, 1);
    out(0, 0) = an->value.array().square().sum();
    return Tensor(make_node(std::move(out), {an}, [an](TensorNode& self) {
        if (an->requires_grad) an->ensure_grad() += 2.0 * self.grad(0, 0) * an->value;
    }));
}

Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets, int ignore_id) {
    auto ln = logits.node();
    if (static_cast<Eigen::Index>(targets.size()) != ln->value.rows()) {
        throw ValidationError("cross_entropy_mean: one target per logits row expected");
    }
    const Eigen::Index vocab = ln->value.cols();
    int count = 0;
    double loss = 0.0;
    for (Eigen::Index r = 0; r < ln->value.rows(); ++r) {
        const int t = targets[static_cast<size_t>(r)];
        if (t == ignore_id) continue;
        if (t < 0 || t >= vocab) {
            throw ValidationError("cross_entropy_mean: target out of vocabulary");
        }
        loss += logsumexp_row(ln->value.row(r)) - ln->value(r, t);
        ++count;
    }
    if (count == 0) {
        throw ValidationError("cross_entropy_mean: all targets ignored");
    }
    Mat out(1, 1);
    out(0, 0) = loss / count;
    return Tensor(make_node(std::move(out), {ln}, [ln, targets, ignore_id, count](TensorNode& self) {
        if (!ln->requires_grad) return;
        const double c = self.grad(0, 0) / count;
        Mat& g = ln->ensure_grad();
        for (Eigen::Index r = 0; r < ln->value.rows(); ++r) {
            const int t = targets[static_cast<size_t>(r)];
            if (t == ignore_id) continue;
            const double mx = ln->value.row(r).maxCoeff();
            Eigen::RowVectorXd e = (ln->value.row(r).array() - mx).exp();
            Eigen::RowVectorXd p = e / e.sum();
            p(t) -= 1.0;
            g.row(r) += c * p;
        }
    }));
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    auto tn = table.node();
    Mat out(static_cast<Eigen::Index>(ids.size()), tn->value.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tn->value.rows()) {
            throw ValidationError("embedding_rows: index out of range");
        }
        out.row(static_cast<Eigen::Index>(i)) = tn->value.row(ids[i]);
    }
    return Tensor(make_node(std::move(out), {tn}, [tn, ids](TensorNode& self) {
        if (!tn->requires_grad) return;
        Mat& g = tn->ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            g.row(ids[i]) += self.grad.row(static_cast<Eigen::Index>(i));
        }
    }));
}

Tensor stop_grad(const Tensor& a) { return Tensor::constant(a.value()); }

Tensor straight_through(const Tensor& z, const Mat& quantized) {
    auto zn = z.node();
    if (quantized.rows() != zn->value.rows() || quantized.cols() != zn->value.cols()) {
        throw ValidationError("straight_through: shape mismatch");
    }
    return Tensor(make_node(quantized, {zn}, [zn](TensorNode& self) {
        if (zn->requires_grad) zn->ensure_grad() += self.grad;
    }));
}

Tensor im2col(const Tensor& x, int kernel, int stride, int pad_left, int pad_right) {
    auto xn = x.node();
    const Eigen::Index t = xn->value.rows();
    const Eigen::Index cin = xn->value.cols();
    const Eigen::Index padded = t + pad_left + pad_right;
    if (padded < kernel) {
        throw ValidationError("im2col: sequence shorter than kernel");
    }
    const Eigen::Index t_out = (padded - kernel) / stride + 1;
    Mat out = Mat::Zero(t_out, kernel * cin);
    for (Eigen::Index o = 0; o < t_out; ++o) {
        for (int j = 0; j < kernel; ++j) {
            const Eigen::Index src = o * stride - pad_left + j;
            if (src >= 0 && src < t) {
                out.block(o, j * cin, 1, cin) = xn->value.row(src);
            }
        }
    }
    return Tensor(make_node(std::move(out), {xn},
                            [xn, kernel, stride, pad_left](TensorNode& self) {
        if (!xn->requires_grad) return;
        Mat& g = xn->ensure_grad();
        const Eigen::Index t = xn->value.rows();
        const Eigen::Index cin = xn->value.cols();
        for (Eigen::Index o = 0; o < self.grad.rows(); ++o) {
            for (int j = 0; j < kernel; ++j) {
                const Eigen::Index src = o * stride - pad_left + j;
                if (src >= 0 && src < t) {
                    g.row(src) += self.grad.block(o, j * cin, 1, cin);
                }
            }
        }
    }));
}

Mat softmax_rows_value(const Mat& x) { return softmax_impl(x); }

double logsumexp_row(const Eigen::RowVectorXd& row) {
    const double mx = row.maxCoeff();
    return mx + std::log((row.array() - mx).exp().sum());
}

}  // namespace facemotion::nn
