#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mfusion/tensor.hpp"

namespace mfusion::num {

// Handle to a node on a Tape.
struct Value {
    std::uint32_t id = 0;
};

struct LstmCellParams {
    Value w_in, w_forget, w_cell, w_out;  // each (n_h x (n_in + n_h))
    Value b_in, b_forget, b_cell, b_out;  // each (n_h)
};

struct AttentionParams {
    Value w_query, w_key, w_value, w_out;  // each (d x d)
    Value b_query, b_key, b_value, b_out;  // each (d)
};

struct AttentionResult {
    Value out;
    std::vector<Value> head_weights;  // one (T x T) attention matrix per head
};

// Reverse-mode tape. Forward calls append nodes; backward() walks them in
// reverse, accumulating exact gradients. Nodes are value-semantic tensors, so
// a tape owns everything it needs and can be discarded after the step.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value leaf(Tensor v);
    Value constant(Tensor v) { return leaf(std::move(v)); }

    const Tensor& val(Value v) const { return nodes_[v.id].val; }
    // Valid after backward(); zero tensors for nodes the root does not reach.
    const Tensor& grad(Value v) const { return nodes_[v.id].grad; }

    // y = W x + b
    Value linear(Value x, Value w, Value b);
    // Y = X W^T + 1 b^T, one linear applied per row
    Value linear_rows(Value x, Value w, Value b);
    Value matmul(Value a, Value b);
    Value matmul_nt(Value a, Value b);
    Value add(Value a, Value b);
    Value mul(Value a, Value b);
    Value scale(Value a, double s);
    Value relu(Value x);
    Value sigmoid(Value x);
    Value tanh_(Value x);
    // max-stabilized softmax over the last axis (each row of a matrix, or the
    // whole vector)
    Value softmax(Value x);
    // x / sum(x) for a vector with positive sum
    Value l1_normalize(Value x);
    Value concat_vecs(const std::vector<Value>& parts);
    Value concat_cols(const std::vector<Value>& parts);
    Value slice_cols(Value x, std::size_t c0, std::size_t c1);
    Value reshape(Value x, std::vector<std::size_t> shape);
    // scalar sum_i weights[i] * x[i] with constant weights
    Value dot(Value x, Tensor weights);
    // -log(probs[label]), probs clamped at 1e-12
    Value cross_entropy(Value probs, std::size_t label);
    Value layer_norm_rows(Value x, Value gamma, Value beta);

    // Standard 4-gate LSTM recurrence; returns (h', c').
    std::pair<Value, Value> lstm_cell(Value x, Value h, Value c, const LstmCellParams& p);

    // Multi-head scaled dot-product self-attention with output projection.
    AttentionResult self_attention(Value x, const AttentionParams& p, std::size_t n_heads);

    // Seeds d(root)/d(root) = seed and accumulates gradients for every node
    // reachable from the root. root must be scalar.
    void backward(Value root, double seed = 1.0);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void()> back;  // empty for leaves
    };

    Value next() const;
    Value push(Tensor val, std::function<void()> back = {});
    Tensor& grad_ref(Value v) { return nodes_[v.id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace mfusion::num
