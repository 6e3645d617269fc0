#pragma once

#include <optional>

#include "maskseg/autodiff.hpp"

namespace maskseg {

// Cross-correlation with zero "same" padding and stride 1.
// x [N,Cin,H,W], w [Cout,Cin,k,k] with k odd, b [Cout] -> [N,Cout,H,W].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b);

// relu'(0) is taken as 0.
template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

// 2x2 max pooling; the gradient goes to the first maximum in row-major order.
template <typename T>
Var<T> maxpool2(const Var<T>& x);

// Nearest-neighbour x2 upsampling.
template <typename T>
Var<T> upsample2(const Var<T>& x);

// [N,Ca,H,W] + [N,Cb,H,W] -> [N,Ca+Cb,H,W].
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

// sum(weights * x) as a one-element tensor.
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights);

// Mean binary cross-entropy on logits over mask-1 pixels:
//   sum(mask * weight * (max(z,0) - z*y + log1p(exp(-|z|)))) / max(sum(mask), 1).
// Labels at mask-0 pixels never enter the value or the gradient.
template <typename T>
Var<T> masked_bce_with_logits(const Var<T>& logits, const Tensor<T>& labels, const Tensor<T>& mask,
                              const Tensor<T>* weights = nullptr);

// Elementwise probs * mask; exactly zero wherever mask is zero.
template <typename T>
Tensor<T> coat_output(const Tensor<T>& probs, const Tensor<T>& mask);

template <typename T>
Tensor<T> sigmoid_values(const Tensor<T>& x);

// Channels [begin, begin+count) of a [N,C,H,W] tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count);

}  // namespace maskseg
