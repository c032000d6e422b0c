#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "s2sr/error.hpp"

namespace s2sr::nn {

/// NCHW shape. Parameters reuse the four slots (O, C, kh, kw) or (O, 1, 1, 1).
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    [[nodiscard]] std::size_t numel() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " +
           std::to_string(s.w) + ")";
}

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

/// A value in the computation graph. grad is allocated on demand and
/// accumulates across every consumer of the node.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::string op;
    std::vector<Var<T>> parents;
    std::function<void(Node&)> backward_fn;

    [[nodiscard]] std::size_t numel() const { return value.size(); }

    std::vector<T>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        return grad;
    }

    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
Var<T> make_leaf(Shape shape, std::vector<T> value, bool requires_grad = false) {
    if (value.size() != shape.numel()) throw DataError("tensor value does not match shape " + to_string(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = shape;
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->op = "leaf";
    return n;
}

template <typename T>
Var<T> zeros(Shape shape, bool requires_grad = false) {
    return make_leaf<T>(shape, std::vector<T>(shape.numel(), T(0)), requires_grad);
}

/// Creates an op result node wired to its parents.
template <typename T>
Var<T> make_result(Shape shape, std::string op, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->shape = shape;
    n->value.assign(shape.numel(), T(0));
    n->op = std::move(op);
    n->requires_grad = std::any_of(parents.begin(), parents.end(), [](const Var<T>& p) { return p->requires_grad; });
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward);
    }
    return n;
}

/// Reverse-mode sweep from a scalar root: seeds d(root)/d(root) = 1 and runs
/// every reachable backward function in reverse topological order.
template <typename T>
void backward(const Var<T>& root) {
    if (root->numel() != 1) throw DataError("backward() needs a scalar root");
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    // Iterative post-order DFS; graphs are deep enough to make recursion risky.
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
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
    for (Node<T>* n : order) n->ensure_grad();
    root->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

}  // namespace s2sr::nn
