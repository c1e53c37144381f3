#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "gcamat/core/tensor.hpp"

// Reverse-mode computation graph. Nodes are created in topological order
// (every op allocates its output after its inputs exist), so a descending
// sort over creation ids is a valid reverse traversal. Gradient accumulation
// follows that fixed order, keeping repeated runs bitwise identical.

namespace gcamat::ag {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

namespace detail {
template <typename T>
inline uint64_t next_node_id() {
    static uint64_t counter = 0;  // graphs are built on one thread per step
    return ++counter;
}
}  // namespace detail

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily by the first accumulation
    bool requires_grad = false;
    bool has_grad = false;
    uint64_t id = 0;
    std::vector<Var<T>> parents;
    std::function<void(Node<T>&)> backprop;  // reads this->grad, feeds parents

    const Tensor<T>& ensure_grad() {
        if (!has_grad) {
            grad = Tensor<T>(value.shape());
            has_grad = true;
        }
        return grad;
    }
    void clear_grad() {
        grad = Tensor<T>();
        has_grad = false;
    }
};

// Leaf with no gradient flow.
template <typename T>
Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->id = detail::next_node_id<T>();
    return n;
}

// Trainable leaf.
template <typename T>
Var<T> param(Tensor<T> value) {
    auto n = constant(std::move(value));
    n->requires_grad = true;
    return n;
}

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>&)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    n->id = detail::next_node_id<T>();
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

// Accumulate g into p's gradient slot (no-op for non-differentiable leaves).
template <typename T>
void accumulate(const Var<T>& p, const Tensor<T>& g) {
    if (!p->requires_grad) return;
    if (!p->value.same_shape(g))
        throw DimensionError("gradient shape " + g.shape().str() + " does not match value " +
                             p->value.shape().str());
    p->ensure_grad();
    T* dst = p->grad.data();
    const T* src = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

// Reverse-mode sweep from a scalar root. Every reachable node is visited
// exactly once, in descending creation order.
template <typename T>
void backward(const Var<T>& root) {
    if (root->value.shape() != Shape{1, 1, 1, 1})
        throw ContractError("backward requires a scalar (1x1x1x1) root, got " +
                            root->value.shape().str());
    if (!root->requires_grad) return;

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<Node<T>*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->id >= n->id)
                throw StructureError("computation graph is not acyclic: node " +
                                     std::to_string(n->id) + " has parent " +
                                     std::to_string(p->id));
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

    root->ensure_grad();
    root->grad[0] = T(1);
    for (Node<T>* n : order) {
        if (!n->backprop) continue;
        if (!n->has_grad) n->ensure_grad();  // reachable but received no signal
        n->backprop(*n);
    }
}

template <typename T>
void zero_grad(const std::vector<Var<T>>& params) {
    for (const auto& p : params) p->clear_grad();
}

template <typename T>
T scalar(const Var<T>& v) {
    if (v->value.size() != 1)
        throw ContractError("scalar() on tensor of shape " + v->value.shape().str());
    return v->value[0];
}

}  // namespace gcamat::ag
