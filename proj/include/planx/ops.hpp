#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "planx/rope.hpp"
#include "planx/tensor.hpp"

namespace planx {

using Coords = std::vector<std::array<double, 3>>;

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

// Shares data, drops the tape.
template <typename T>
Tensor<T> detach(const Tensor<T>& a);

// Forward takes `value`'s data; backward routes the gradient to `grad_to`.
template <typename T>
Tensor<T> straight_through(const Tensor<T>& value, const Tensor<T>& grad_to);

// x:[S,in] w:[in,out] b:[out] -> [S,out]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b = nullptr);

// Row gather with optional per-position zeroing (zeroed rows pass no
// gradient to the table).
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids,
                    const std::vector<std::uint8_t>* zero_mask = nullptr);

template <typename T>
Tensor<T> rmsnorm(const Tensor<T>& x, const Tensor<T>& gain, double eps = 1e-6);
template <typename T>
Tensor<T> silu(const Tensor<T>& x);

// y = x*(1+scale) + shift with [d] scale/shift broadcast over rows.
template <typename T>
Tensor<T> affine_rows(const Tensor<T>& x, const Tensor<T>& sc, const Tensor<T>& sh);
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& v);

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int offset, int len);

// [G*G,d] -> [(G/f)*(G/f),d] block average, and its repeat inverse.
template <typename T>
Tensor<T> mean_pool_grid(const Tensor<T>& x, int grid, int factor);
template <typename T>
Tensor<T> upsample_grid(const Tensor<T>& x, int grid, int factor);

// Differentiable row gather: out[i] = x[rows[i]].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int>& rows);

// Mean over masked rows of -log softmax(logits)[target].
template <typename T>
Tensor<T> masked_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                               const std::vector<std::uint8_t>& mask);
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, int target);

// Mean squared error over rows selected by `row_mask` (all rows when null).
template <typename T>
Tensor<T> mse_rows(const Tensor<T>& pred, const Tensor<T>& target,
                   const std::vector<std::uint8_t>* row_mask = nullptr);

// Multi-head scaled dot-product attention over [S,dm] projections. Rotary
// angles come from per-token coordinates when a table is given; `k_semantic`
// selects semantic-grid scaling for the key side.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                    bool causal, const RopeTable* table = nullptr, const Coords* q_pos = nullptr,
                    const Coords* k_pos = nullptr, bool k_semantic = false);

// Concatenated-logit softmax over a text branch (no RoPE) and a semantic
// branch (RoPE on queries and semantic keys). Semantic tokens flagged
// invalid are excluded from the softmax.
template <typename T>
Tensor<T> dual_context_attention(const Tensor<T>& q, const Tensor<T>& k_text,
                                 const Tensor<T>& v_text, const Tensor<T>& k_sem,
                                 const Tensor<T>& v_sem, int heads, const RopeTable* table,
                                 const Coords* q_pos, const Coords* sem_pos,
                                 const std::vector<std::uint8_t>* sem_valid = nullptr);

// Standalone rotary rotation of [n, head_dim] features at given positions.
template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, const Coords& pos, const RopeTable& table,
                     bool semantic = false);

}  // namespace planx
