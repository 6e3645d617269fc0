#include "maskseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Core>

namespace maskseg {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

constexpr std::uint64_t kPatternMul = 0x9E3779B97F4A7C15ULL;

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw ValidationError(std::string(op) + ": expected a 4-d tensor, got " + shape_str(s));
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// col[(c*k + ky)*k + kx, y*W + x] = img[c, y + ky - k/2, x + kx - k/2] (0 outside).
template <typename T>
void im2col(const T* img, std::size_t C, std::size_t H, std::size_t W, std::size_t k, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = H * W;
  const auto sH = static_cast<std::ptrdiff_t>(H);
  const auto sW = static_cast<std::ptrdiff_t>(W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* dst = col + ((c * k + ky) * k + kx) * hw;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(sW, sW - dx);
        for (std::ptrdiff_t y = 0; y < sH; ++y) {
          T* d = dst + y * sW;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= sH || x1 <= x0) {
            std::fill(d, d + W, T(0));
            continue;
          }
          const T* s = img + (static_cast<std::ptrdiff_t>(c) * sH + sy) * sW;
          std::fill(d, d + x0, T(0));
          std::copy(s + x0 + dx, s + x1 + dx, d + x0);
          std::fill(d + x1, d + sW, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col back into img.
template <typename T>
void col2im_add(const T* col, std::size_t C, std::size_t H, std::size_t W, std::size_t k, T* img) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = H * W;
  const auto sH = static_cast<std::ptrdiff_t>(H);
  const auto sW = static_cast<std::ptrdiff_t>(W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* src = col + ((c * k + ky) * k + kx) * hw;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(sW, sW - dx);
        for (std::ptrdiff_t y = 0; y < sH; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= sH) continue;
          const T* s = src + y * sW;
          T* d = img + (static_cast<std::ptrdiff_t>(c) * sH + sy) * sW;
          for (std::ptrdiff_t x = x0; x < x1; ++x) d[x + dx] += s[x];
        }
      }
    }
  }
}

template <typename T>
T stable_sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const Shape& xs = x->value.shape();
  const Shape& ws = w->value.shape();
  require_rank4(xs, "conv2d input");
  require_rank4(ws, "conv2d weight");
  const std::size_t N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
  const std::size_t Cout = ws[0], k = ws[2];
  if (ws[1] != Cin || ws[3] != k || k % 2 == 0) {
    throw ValidationError("conv2d: weight " + shape_str(ws) + " incompatible with input " + shape_str(xs));
  }
  if (b->value.shape() != Shape{Cout}) {
    throw ValidationError("conv2d: bias " + shape_str(b->value.shape()) + " does not match " + std::to_string(Cout) +
                          " output channels");
  }
  const std::size_t hw = H * W;
  const std::size_t K = Cin * k * k;

  Tensor<T> out({N, Cout, H, W});
  std::vector<T> col(k == 1 ? 0 : K * hw);
  const ConstMatMap<T> wm(w->value.ptr(), static_cast<Eigen::Index>(Cout), static_cast<Eigen::Index>(K));
  for (std::size_t n = 0; n < N; ++n) {
    const T* xn = x->value.ptr() + n * Cin * hw;
    const T* colp = xn;
    if (k != 1) {
      im2col(xn, Cin, H, W, k, col.data());
      colp = col.data();
    }
    const ConstMatMap<T> cm(colp, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
    MatMap<T> om(out.ptr() + n * Cout * hw, static_cast<Eigen::Index>(Cout), static_cast<Eigen::Index>(hw));
    om.noalias() = wm * cm;
    for (std::size_t o = 0; o < Cout; ++o) om.row(static_cast<Eigen::Index>(o)).array() += b->value[o];
  }

  return make_node<T>(std::move(out), {x, w, b}, [N, Cin, H, W, Cout, k, hw, K](Node<T>& self) {
    const auto& xv = self.inputs[0];
    const auto& wv = self.inputs[1];
    const auto& bv = self.inputs[2];
    const ConstMatMap<T> wm(wv->value.ptr(), static_cast<Eigen::Index>(Cout), static_cast<Eigen::Index>(K));
    std::vector<T> col(k == 1 ? 0 : K * hw);
    std::vector<T> dcol(xv->requires_grad && k != 1 ? K * hw : 0);
    for (std::size_t n = 0; n < N; ++n) {
      const ConstMatMap<T> gm(self.grad.ptr() + n * Cout * hw, static_cast<Eigen::Index>(Cout),
                              static_cast<Eigen::Index>(hw));
      const T* xn = xv->value.ptr() + n * Cin * hw;
      const T* colp = xn;
      if (k != 1 && wv->requires_grad) {
        im2col(xn, Cin, H, W, k, col.data());
        colp = col.data();
      }
      if (wv->requires_grad) {
        const ConstMatMap<T> cm(colp, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
        MatMap<T> dw(wv->grad_buffer().ptr(), static_cast<Eigen::Index>(Cout), static_cast<Eigen::Index>(K));
        dw.noalias() += gm * cm.transpose();
      }
      if (bv->requires_grad) {
        auto& db = bv->grad_buffer();
        for (std::size_t o = 0; o < Cout; ++o) db[o] += gm.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (xv->requires_grad) {
        T* dxn = xv->grad_buffer().ptr() + n * Cin * hw;
        if (k == 1) {
          MatMap<T> dxm(dxn, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
          dxm.noalias() += wm.transpose() * gm;
        } else {
          MatMap<T> dcm(dcol.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
          dcm.noalias() = wm.transpose() * gm;
          col2im_add(dcol.data(), Cin, H, W, k, dxn);
        }
      }
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  const T* xv = x->value.ptr();
  T* o = out.ptr();
  std::uint64_t pattern = 0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const bool on = xv[i] > T(0);
    o[i] = on ? xv[i] : T(0);
    pattern += static_cast<std::uint64_t>(on) * (i * kPatternMul + 1);
  }
  return make_node<T>(
      std::move(out), {x},
      [](Node<T>& self) {
        const auto& in = self.inputs[0];
        T* g = in->grad_buffer().ptr();
        const T* xv = in->value.ptr();
        const T* go = self.grad.ptr();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
          if (xv[i] > T(0)) g[i] += go[i];
        }
      },
      pattern);
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = sigmoid_values(x->value);
  return make_node<T>(std::move(out), {x}, [](Node<T>& self) {
    const auto& in = self.inputs[0];
    T* g = in->grad_buffer().ptr();
    const T* y = self.value.ptr();
    const T* go = self.grad.ptr();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) g[i] += go[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> maxpool2(const Var<T>& x) {
  const Shape& s = x->value.shape();
  require_rank4(s, "maxpool2");
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3];
  if (H % 2 || W % 2) throw ValidationError("maxpool2: spatial dims must be even, got " + shape_str(s));
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor<T> out({N, C, Ho, Wo});
  std::vector<std::uint32_t> argmax(out.numel());
  std::uint64_t pattern = 0;
  const T* xv = x->value.ptr();
  for (std::size_t p = 0; p < N * C; ++p) {
    const T* plane = xv + p * H * W;
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t xo = 0; xo < Wo; ++xo) {
        const std::size_t base = (2 * y) * W + 2 * xo;
        const std::size_t cand[4] = {base, base + 1, base + W, base + W + 1};
        std::size_t best = 0;
        for (std::size_t c = 1; c < 4; ++c) {
          if (plane[cand[c]] > plane[cand[best]]) best = c;
        }
        const std::size_t oi = (p * Ho + y) * Wo + xo;
        out[oi] = plane[cand[best]];
        argmax[oi] = static_cast<std::uint32_t>(p * H * W + cand[best]);
        pattern += best * (oi * kPatternMul + 1);
      }
    }
  }
  return make_node<T>(
      std::move(out), {x},
      [argmax = std::move(argmax)](Node<T>& self) {
        T* g = self.inputs[0]->grad_buffer().ptr();
        const T* go = self.grad.ptr();
        for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += go[i];
      },
      pattern);
}

template <typename T>
Var<T> upsample2(const Var<T>& x) {
  const Shape& s = x->value.shape();
  require_rank4(s, "upsample2");
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3];
  const std::size_t Wo = 2 * W;
  Tensor<T> out({N, C, 2 * H, Wo});
  const T* xv = x->value.ptr();
  for (std::size_t p = 0; p < N * C; ++p) {
    for (std::size_t y = 0; y < 2 * H; ++y) {
      const T* src = xv + (p * H + y / 2) * W;
      T* dst = out.ptr() + (p * 2 * H + y) * Wo;
      for (std::size_t xo = 0; xo < Wo; ++xo) dst[xo] = src[xo / 2];
    }
  }
  return make_node<T>(std::move(out), {x}, [N, C, H, W, Wo](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().ptr();
    const T* go = self.grad.ptr();
    for (std::size_t p = 0; p < N * C; ++p) {
      for (std::size_t y = 0; y < 2 * H; ++y) {
        const T* src = go + (p * 2 * H + y) * Wo;
        T* dst = g + (p * H + y / 2) * W;
        for (std::size_t xo = 0; xo < Wo; ++xo) dst[xo / 2] += src[xo];
      }
    }
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a->value.shape();
  const Shape& sb = b->value.shape();
  require_rank4(sa, "concat_channels");
  require_rank4(sb, "concat_channels");
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw ValidationError("concat_channels: " + shape_str(sa) + " vs " + shape_str(sb));
  }
  const std::size_t N = sa[0], Ca = sa[1], Cb = sb[1], hw = sa[2] * sa[3];
  Tensor<T> out({N, Ca + Cb, sa[2], sa[3]});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(a->value.ptr() + n * Ca * hw, Ca * hw, out.ptr() + n * (Ca + Cb) * hw);
    std::copy_n(b->value.ptr() + n * Cb * hw, Cb * hw, out.ptr() + (n * (Ca + Cb) + Ca) * hw);
  }
  return make_node<T>(std::move(out), {a, b}, [N, Ca, Cb, hw](Node<T>& self) {
    const T* go = self.grad.ptr();
    for (int side = 0; side < 2; ++side) {
      const auto& in = self.inputs[static_cast<std::size_t>(side)];
      if (!in->requires_grad) continue;
      const std::size_t C = side == 0 ? Ca : Cb;
      const std::size_t off = side == 0 ? 0 : Ca;
      T* g = in->grad_buffer().ptr();
      for (std::size_t n = 0; n < N; ++n) {
        const T* src = go + (n * (Ca + Cb) + off) * hw;
        T* dst = g + n * C * hw;
        for (std::size_t i = 0; i < C * hw; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights) {
  require_same_shape(x->value.shape(), weights.shape(), "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.numel(); ++i) acc += static_cast<double>(weights[i]) * x->value[i];
  Tensor<T> out({1}, static_cast<T>(acc));
  return make_node<T>(std::move(out), {x}, [weights](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().ptr();
    const T go = self.grad[0];
    for (std::size_t i = 0; i < weights.numel(); ++i) g[i] += go * weights[i];
  });
}

template <typename T>
Var<T> masked_bce_with_logits(const Var<T>& logits, const Tensor<T>& labels, const Tensor<T>& mask,
                              const Tensor<T>* weights) {
  const Shape& s = logits->value.shape();
  require_same_shape(s, labels.shape(), "masked_bce_with_logits (labels)");
  require_same_shape(s, mask.shape(), "masked_bce_with_logits (mask)");
  if (weights) require_same_shape(s, weights->shape(), "masked_bce_with_logits (weights)");

  const std::size_t n = logits->value.numel();
  double support = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] == T(0)) continue;
    support += static_cast<double>(mask[i]);
    const double z = logits->value[i];
    const double y = labels[i];
    const double w = weights ? static_cast<double>((*weights)[i]) : 1.0;
    const double loss = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    total += static_cast<double>(mask[i]) * w * loss;
  }
  const double denom = std::max(support, 1.0);
  Tensor<T> out({1}, static_cast<T>(total / denom));

  std::optional<Tensor<T>> wcopy;
  if (weights) wcopy = *weights;
  return make_node<T>(std::move(out), {logits}, [labels, mask, wcopy = std::move(wcopy), denom](Node<T>& self) {
    auto& in = *self.inputs[0];
    T* g = in.grad_buffer().ptr();
    const double go = static_cast<double>(self.grad[0]);
    for (std::size_t i = 0; i < mask.numel(); ++i) {
      if (mask[i] == T(0)) continue;
      const double w = wcopy ? static_cast<double>((*wcopy)[i]) : 1.0;
      const double p = stable_sigmoid(static_cast<double>(in.value[i]));
      g[i] += static_cast<T>(go * static_cast<double>(mask[i]) * w * (p - static_cast<double>(labels[i])) / denom);
    }
  });
}

template <typename T>
Tensor<T> coat_output(const Tensor<T>& probs, const Tensor<T>& mask) {
  require_same_shape(probs.shape(), mask.shape(), "coat_output");
  Tensor<T> out(probs.shape());
  for (std::size_t i = 0; i < probs.numel(); ++i) out[i] = mask[i] == T(0) ? T(0) : probs[i] * mask[i];
  return out;
}

template <typename T>
Tensor<T> sigmoid_values(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = stable_sigmoid(x[i]);
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_rank4(x.shape(), "slice_channels");
  const std::size_t N = x.dim(0), C = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (begin + count > C) throw BoundsError("slice_channels: range exceeds " + std::to_string(C) + " channels");
  Tensor<T> out({N, count, x.dim(2), x.dim(3)});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(x.ptr() + (n * C + begin) * hw, count * hw, out.ptr() + n * count * hw);
  }
  return out;
}

#define MASKSEG_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&);                          \
  template Var<T> relu<T>(const Var<T>&);                                                          \
  template Var<T> sigmoid<T>(const Var<T>&);                                                       \
  template Var<T> maxpool2<T>(const Var<T>&);                                                      \
  template Var<T> upsample2<T>(const Var<T>&);                                                     \
  template Var<T> concat_channels<T>(const Var<T>&, const Var<T>&);                                \
  template Var<T> weighted_sum<T>(const Var<T>&, const Tensor<T>&);                                \
  template Var<T> masked_bce_with_logits<T>(const Var<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                            const Tensor<T>*);                                     \
  template Tensor<T> coat_output<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sigmoid_values<T>(const Tensor<T>&);                                          \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);

MASKSEG_INSTANTIATE_OPS(float)
MASKSEG_INSTANTIATE_OPS(double)

#undef MASKSEG_INSTANTIATE_OPS

}  // namespace maskseg
