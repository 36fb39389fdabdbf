#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "protosent/errors.hpp"
#include "protosent/rng.hpp"

namespace protosent {

#ifdef PROTOSENT_REAL32
using real = float;
#else
using real = double;
#endif

// Reverse-mode autodiff over dense row-major matrices. Every tensor is 2-D;
// vectors are 1xN and scalars 1x1. The graph is rebuilt on every forward pass
// (define-by-run): ops allocate a fresh node whose backward closure pulls the
// node's grad into its parents.
struct TensorNode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<real> value;
    std::vector<real> grad;  // sized on first accumulation, kept across steps
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::size_t numel() const { return rows * cols; }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), real(0));
    }
};

inline std::string shape_str(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
        return filled(rows, cols, real(0), requires_grad);
    }

    static Tensor filled(std::size_t rows, std::size_t cols, real v, bool requires_grad = false) {
        auto n = std::make_shared<TensorNode>();
        n->rows = rows;
        n->cols = cols;
        n->value.assign(rows * cols, v);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor from_values(std::size_t rows, std::size_t cols, std::vector<real> values,
                              bool requires_grad = false) {
        if (values.size() != rows * cols)
            throw DimensionError("from_values: " + std::to_string(values.size()) +
                                 " values for shape " + shape_str(rows, cols));
        auto n = std::make_shared<TensorNode>();
        n->rows = rows;
        n->cols = cols;
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor scalar(real v, bool requires_grad = false) { return filled(1, 1, v, requires_grad); }

    static Tensor randn(std::size_t rows, std::size_t cols, Rng& rng, double stddev,
                        bool requires_grad = false) {
        auto t = zeros(rows, cols, requires_grad);
        for (auto& x : t.node_->value) x = static_cast<real>(rng.normal(0.0, stddev));
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<real>& values() const { return node_->value; }
    // Leaf mutation only (optimizer updates, finite-difference probes); the
    // graph referencing the old values must be rebuilt afterwards.
    std::vector<real>& values_mut() { return node_->value; }

    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    const std::vector<real>& grad() const {
        if (!has_grad()) throw ContractError("grad(): no gradient accumulated");
        return node_->grad;
    }

    real at(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
    real item() const {
        if (numel() != 1) throw ContractError("item(): tensor is not scalar, shape " + shape());
        return node_->value[0];
    }

    std::string shape() const { return shape_str(rows(), cols()); }

    void zero_grad() {
        node_->grad.assign(node_->value.size(), real(0));
    }

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// Reverse-mode accumulation from a scalar loss. Grad buffers are accumulated
// into, so repeated calls add up unless zero_grad() is used in between.
inline void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ContractError("backward: loss must be scalar, got " + loss.shape());
    TensorNode* root = loss.node().get();
    if (!root->requires_grad) return;

    // Iterative post-order DFS: children come after all their parents in
    // `order` reversed, so running `order` back-to-front is topological.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Leaf grads persist and accumulate across calls; interior nodes are
    // scratch for this pass only.
    for (TensorNode* n : order) {
        if (n->backward_fn) n->grad.assign(n->value.size(), real(0));
    }
    root->ensure_grad();
    root->grad[0] += real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

namespace detail {

inline std::shared_ptr<TensorNode> make_node(std::size_t rows, std::size_t cols,
                                             std::vector<real> value,
                                             std::vector<std::shared_ptr<TensorNode>> parents) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    return n;
}

}  // namespace detail

}  // namespace protosent
