#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "docbin/nn/tensor.hpp"

namespace docbin::nn {

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Tensor<T>& grad_buffer() {
        if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
        return grad;
    }
};

/// Handle to a value in a dynamically recorded computation graph.
/// Leaves created with requires_grad=true are trainable parameters.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    [[nodiscard]] bool defined() const { return node_ != nullptr; }
    [[nodiscard]] const Tensor<T>& value() const { return node_->value; }
    [[nodiscard]] Tensor<T>& mutable_value() { return node_->value; }
    [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
    [[nodiscard]] const Tensor<T>& grad() const { return node_->grad; }
    [[nodiscard]] bool has_grad() const { return node_->grad.shape() == node_->value.shape(); }
    [[nodiscard]] T item() const { return node_->value.item(); }
    [[nodiscard]] Node<T>* node() const { return node_.get(); }
    [[nodiscard]] const std::shared_ptr<Node<T>>& shared() const { return node_; }

    void zero_grad() { node_->grad = Tensor<T>(); }

    /// Returns a leaf holding the same value, cut from the graph.
    [[nodiscard]] Var detach() const { return Var(node_->value, false); }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Builds the output node of an op. The backward closure is only kept when
/// some input needs a gradient, so inference never records a graph.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
        node->requires_grad = true;
        for (auto& in : inputs) node->parents.push_back(in.shared());
        node->backward = std::move(backward);
    }
    return Var<T>(std::move(node));
}

/// Reverse-mode sweep from a scalar root. Gradients accumulate into leaves.
template <typename T>
void backward(const Var<T>& root) {
    if (root.value().size() != 1) throw ShapeError("backward() requires a scalar root");
    if (!root.requires_grad()) return;

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
    seen.insert(root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_buffer()[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward && n->grad.shape() == n->value.shape()) n->backward(*n);
    }
    // Interior buffers are released so graphs can be rebuilt without stale state.
    for (Node<T>* n : order) {
        if (n->backward) n->grad = Tensor<T>();
    }
}

}  // namespace docbin::nn
