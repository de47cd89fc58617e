#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

namespace facemotion::nn {

// All learnable math runs in double: the gradient checks in the test suite
// compare against central finite differences at relative 1e-4, which float32
// noise cannot meet.
using Mat = Eigen::MatrixXd;

struct TensorNode {
    Mat value;
    Mat grad;  // allocated on demand, same shape as value
    bool requires_grad = false;
    uint64_t id = 0;  // creation order; descending order is a valid topo order
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    Mat& ensure_grad() {
        if (grad.size() == 0) {
            grad = Mat::Zero(value.rows(), value.cols());
        }
        return grad;
    }
};

// Lightweight handle to a node in a dynamically built computation graph.
// Graphs are per-training-item and freed when the root handle goes away.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor constant(Mat value);
    static Tensor leaf(Mat value);  // participates in backward

    bool defined() const { return node_ != nullptr; }
    const Mat& value() const { return node_->value; }
    Mat& mutable_value() { return node_->value; }
    const Mat& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double scalar() const { return node_->value(0, 0); }

    const std::shared_ptr<TensorNode>& node() const { return node_; }

    // Reverse-mode sweep from this (scalar) node.
    void backward() const;

private:
    std::shared_ptr<TensorNode> node_;
};

std::shared_ptr<TensorNode> make_node(Mat value, std::vector<std::shared_ptr<TensorNode>> parents,
                                      std::function<void(TensorNode&)> backward_fn);

}  // namespace facemotion::nn
