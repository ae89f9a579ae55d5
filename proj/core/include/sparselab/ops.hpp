#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparselab/mask.hpp"
#include "sparselab/tape.hpp"

namespace sparselab {

// y = x (w ⊙ M)^T + b for x[B,in], w[out,in], b[out]. Masked weights receive
// exactly zero gradient.
Var linear(Var x, Var w, Var b, const LayerMask* mask = nullptr);

// Cross-correlation of x[B,Cin,H,W] with w[Cout,Cin,kh,kw] (masked as in
// linear), plus per-channel bias. Output spatial size must be integral.
Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t padding,
           const LayerMask* mask = nullptr);

// Subgradient at 0 is 0.
Var relu(Var x);

// Windows start at multiples of `stride` and must fit inside the input
// (floor semantics). Max pooling routes the gradient to the first maximum in
// row-major window order.
Var max_pool2d(Var x, std::size_t kernel, std::size_t stride);
Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride);

// [B, ...] -> [B, prod(...)]
Var flatten(Var x);

struct SoftmaxCrossEntropy {
  Var loss;             // mean over the batch of -log p_correct
  Tensor probabilities; // softmax(logits), [B,C]
};

// labels must be one-hot rows of a [B,C] tensor with C >= 2.
SoftmaxCrossEntropy softmax_cross_entropy(Var logits, const Tensor& labels);

Tensor one_hot(std::span<const int> labels, std::size_t classes);
// Row-wise softmax of a [B,C] tensor (no tape).
Tensor softmax(const Tensor& logits);

}  // namespace sparselab
