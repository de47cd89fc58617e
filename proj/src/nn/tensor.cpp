#include "facemotion/nn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "facemotion/common.hpp"

namespace facemotion::nn {

namespace {
std::atomic<uint64_t> g_node_counter{1};
}

std::shared_ptr<TensorNode> make_node(Mat value, std::vector<std::shared_ptr<TensorNode>> parents,
                                      std::function<void(TensorNode&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->value = std::move(value);
    node->id = g_node_counter.fetch_add(1, std::memory_order_relaxed);
    bool needs_grad = false;
    for (const auto& p : parents) {
        needs_grad = needs_grad || p->requires_grad;
    }
    node->requires_grad = needs_grad;
    if (needs_grad) {
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return node;
}

Tensor Tensor::constant(Mat value) {
    auto node = std::make_shared<TensorNode>();
    node->value = std::move(value);
    node->id = g_node_counter.fetch_add(1, std::memory_order_relaxed);
    node->requires_grad = false;
    return Tensor(std::move(node));
}

Tensor Tensor::leaf(Mat value) {
    auto node = std::make_shared<TensorNode>();
    node->value = std::move(value);
    node->id = g_node_counter.fetch_add(1, std::memory_order_relaxed);
    node->requires_grad = true;
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    if (!node_ || !node_->requires_grad) {
        return;
    }
    if (node_->value.rows() != 1 || node_->value.cols() != 1) {
        throw ValidationError("backward() expects a scalar root");
    }

    // Collect the reachable subgraph; creation ids give a topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
        TensorNode* cur = stack.back();
        stack.pop_back();
        order.push_back(cur);
        for (const auto& p : cur->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) {
                stack.push_back(p.get());
            }
        }
    }
    std::sort(order.begin(), order.end(),
              [](const TensorNode* a, const TensorNode* b) { return a->id > b->id; });

    node_->ensure_grad();
    node_->grad(0, 0) = 1.0;
    for (TensorNode* cur : order) {
        if (cur->backward_fn && cur->grad.size() != 0) {
            cur->backward_fn(*cur);
        }
    }
}

}  // namespace facemotion::nn
