#include "sparselab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sparselab/error.hpp"

namespace sparselab {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// Weights as seen by the forward pass: w ⊙ M.
std::vector<Scalar> effective_weights(const Tensor& w, const LayerMask* mask) {
  std::vector<Scalar> eff(w.values().begin(), w.values().end());
  if (mask) {
    require(mask->dims() == w.dims(),
            "mask dims " + shape_string(mask->dims()) + " != weight dims " + shape_string(w.dims()));
    mask->apply(eff);
  }
  return eff;
}

// Output positions [lo, hi) along one axis whose input coordinate
// o * stride + k - pad lands inside [0, extent).
std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_range(std::ptrdiff_t extent, std::ptrdiff_t out,
                                                      std::ptrdiff_t k, std::ptrdiff_t stride,
                                                      std::ptrdiff_t pad) {
  std::ptrdiff_t lo = 0;
  if (pad - k > 0) lo = (pad - k + stride - 1) / stride;
  std::ptrdiff_t hi = 0;
  const std::ptrdiff_t top = extent - 1 + pad - k;
  if (top >= 0) hi = std::min(out, top / stride + 1);
  return {lo, std::max(lo, hi)};
}

// Patch layout of one sample for a convolution: row (ic, ki, kj) of the
// column matrix holds, for every output position, the input pixel that kernel
// tap sees (0 in the padding).
struct Im2Col {
  std::size_t cin, h, w, kh, kw, stride, pad, oh, ow;

  void gather(const Scalar* x, Scalar* cols) const {
    const std::size_t P = oh * ow;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj) {
          Scalar* row = cols + ((ic * kh + ki) * kw + kj) * P;
          std::fill(row, row + P, Scalar{0});
          visit(ki, kj, [&](std::size_t out, std::size_t in) { row[out] = x[ic * h * w + in]; });
        }
      }
    }
  }

  void scatter_add(const Scalar* cols, Scalar* gx) const {
    const std::size_t P = oh * ow;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj) {
          const Scalar* row = cols + ((ic * kh + ki) * kw + kj) * P;
          visit(ki, kj, [&](std::size_t out, std::size_t in) { gx[ic * h * w + in] += row[out]; });
        }
      }
    }
  }

  template <typename Fn>
  void visit(std::size_t ki, std::size_t kj, Fn&& fn) const {
    const auto s = static_cast<std::ptrdiff_t>(stride), p = static_cast<std::ptrdiff_t>(pad);
    const auto [r0, r1] = valid_range(static_cast<std::ptrdiff_t>(h), static_cast<std::ptrdiff_t>(oh),
                                      static_cast<std::ptrdiff_t>(ki), s, p);
    const auto [c0, c1] = valid_range(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(ow),
                                      static_cast<std::ptrdiff_t>(kj), s, p);
    for (std::ptrdiff_t r = r0; r < r1; ++r) {
      const std::ptrdiff_t in_row = r * s + static_cast<std::ptrdiff_t>(ki) - p;
      for (std::ptrdiff_t c = c0; c < c1; ++c) {
        const std::ptrdiff_t in_col = c * s + static_cast<std::ptrdiff_t>(kj) - p;
        fn(static_cast<std::size_t>(r * static_cast<std::ptrdiff_t>(ow) + c),
           static_cast<std::size_t>(in_row * static_cast<std::ptrdiff_t>(w) + in_col));
      }
    }
  }
};

}  // namespace

Var linear(Var x, Var w, Var b, const LayerMask* mask) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1,
          "linear expects x[B,in], w[out,in], b[out]");
  const std::size_t batch = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  require(wv.dim(1) == in, "linear: x has " + std::to_string(in) + " features, w expects " +
                               std::to_string(wv.dim(1)));
  require(bv.dim(0) == out, "linear: bias length mismatch");

  std::vector<Scalar> eff = effective_weights(wv, mask);
  Tensor y({batch, out});
  for (std::size_t r = 0; r < batch; ++r) {
    const Scalar* xr = xv.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const Scalar* wr = eff.data() + o * in;
      Scalar acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      y[r * out + o] = acc;
    }
  }

  const Var parents[] = {x, w, b};
  return x.tape()->record(
      std::move(y), parents,
      [x, w, b, mask, eff = std::move(eff), batch, in, out](Tape& tape, std::span<const Scalar> gy) {
        const Tensor& xv = tape.value(x);
        if (auto gx = tape.grad_slot(x); !gx.empty()) {
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t o = 0; o < out; ++o) {
              const Scalar g = gy[r * out + o];
              if (g == Scalar{0}) continue;
              const Scalar* wr = eff.data() + o * in;
              Scalar* gxr = gx.data() + r * in;
              for (std::size_t i = 0; i < in; ++i) gxr[i] += g * wr[i];
            }
          }
        }
        if (auto gw = tape.grad_slot(w); !gw.empty()) {
          for (std::size_t o = 0; o < out; ++o) {
            Scalar* gwr = gw.data() + o * in;
            for (std::size_t r = 0; r < batch; ++r) {
              const Scalar g = gy[r * out + o];
              const Scalar* xr = xv.data() + r * in;
              for (std::size_t i = 0; i < in; ++i) gwr[i] += g * xr[i];
            }
          }
          if (mask) mask->apply(gw);
        }
        if (auto gb = tape.grad_slot(b); !gb.empty()) {
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t o = 0; o < out; ++o) gb[o] += gy[r * out + o];
          }
        }
      });
}

Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t padding, const LayerMask* mask) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require(xv.rank() == 4 && wv.rank() == 4 && bv.rank() == 1,
          "conv2d expects x[B,Cin,H,W], w[Cout,Cin,kh,kw], b[Cout]");
  require(stride >= 1, "conv2d stride must be >= 1");
  const std::size_t batch = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const std::size_t cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  require(wv.dim(1) == cin, "conv2d: input channels " + std::to_string(cin) +
                                " != kernel channels " + std::to_string(wv.dim(1)));
  require(bv.dim(0) == cout, "conv2d: bias length mismatch");
  require(h + 2 * padding >= kh && wd + 2 * padding >= kw, "conv2d: kernel larger than padded input");
  require((h + 2 * padding - kh) % stride == 0 && (wd + 2 * padding - kw) % stride == 0,
          "conv2d: non-integral output size");
  const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::size_t ow = (wd + 2 * padding - kw) / stride + 1;

  std::vector<Scalar> eff = effective_weights(wv, mask);
  Tensor y({batch, cout, oh, ow});
  const Im2Col geo{cin, h, wd, kh, kw, stride, padding, oh, ow};
  const std::size_t K = cin * kh * kw, P = oh * ow;

  // Per sample: cols[K, P] from the input, then y[cout, P] = eff[cout, K] cols.
  // Zero effective weights contribute nothing and are skipped.
  std::vector<Scalar> cols(K * P);
  for (std::size_t n = 0; n < batch; ++n) {
    geo.gather(xv.data() + n * cin * h * wd, cols.data());
    for (std::size_t oc = 0; oc < cout; ++oc) {
      Scalar* yp = y.data() + (n * cout + oc) * P;
      std::fill(yp, yp + P, bv[oc]);
      const Scalar* wrow = eff.data() + oc * K;
      for (std::size_t k = 0; k < K; ++k) {
        const Scalar wval = wrow[k];
        if (wval == Scalar{0}) continue;
        const Scalar* crow = cols.data() + k * P;
        for (std::size_t i = 0; i < P; ++i) yp[i] += wval * crow[i];
      }
    }
  }

  const Var parents[] = {x, w, b};
  return x.tape()->record(
      std::move(y), parents,
      [=, eff = std::move(eff)](Tape& tape, std::span<const Scalar> gy) {
        const Tensor& xv = tape.value(x);
        auto gx = tape.grad_slot(x);
        auto gw = tape.grad_slot(w);
        auto gb = tape.grad_slot(b);
        std::vector<Scalar> cols(K * P), gcols(gx.empty() ? 0 : K * P);
        for (std::size_t n = 0; n < batch; ++n) {
          const Scalar* gyn = gy.data() + n * cout * P;
          if (!gb.empty()) {
            for (std::size_t oc = 0; oc < cout; ++oc) {
              Scalar acc = 0;
              for (std::size_t i = 0; i < P; ++i) acc += gyn[oc * P + i];
              gb[oc] += acc;
            }
          }
          if (!gw.empty()) {
            geo.gather(xv.data() + n * cin * h * wd, cols.data());
            for (std::size_t oc = 0; oc < cout; ++oc) {
              const Scalar* gp = gyn + oc * P;
              for (std::size_t k = 0; k < K; ++k) {
                const std::size_t widx = oc * K + k;
                if (mask && !(*mask)[widx]) continue;
                const Scalar* crow = cols.data() + k * P;
                Scalar acc = 0;
                for (std::size_t i = 0; i < P; ++i) acc += gp[i] * crow[i];
                gw[widx] += acc;
              }
            }
          }
          if (!gx.empty()) {
            std::fill(gcols.begin(), gcols.end(), Scalar{0});
            for (std::size_t oc = 0; oc < cout; ++oc) {
              const Scalar* gp = gyn + oc * P;
              const Scalar* wrow = eff.data() + oc * K;
              for (std::size_t k = 0; k < K; ++k) {
                const Scalar wval = wrow[k];
                if (wval == Scalar{0}) continue;
                Scalar* grow = gcols.data() + k * P;
                for (std::size_t i = 0; i < P; ++i) grow[i] += wval * gp[i];
              }
            }
            geo.scatter_add(gcols.data(), gx.data() + n * cin * h * wd);
          }
        }
      });
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor y(xv.dims());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = xv[i] > Scalar{0} ? xv[i] : Scalar{0};
  const Var parents[] = {x};
  return x.tape()->record(std::move(y), parents, [x](Tape& tape, std::span<const Scalar> gy) {
    const Tensor& xv = tape.value(x);
    auto gx = tape.grad_slot(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > Scalar{0}) gx[i] += gy[i];
    }
  });
}

namespace {

struct PoolGeometry {
  std::size_t batch, channels, h, w, oh, ow;
};

PoolGeometry pool_geometry(const Tensor& xv, std::size_t kernel, std::size_t stride, const char* op) {
  require(xv.rank() == 4, std::string(op) + " expects x[B,C,H,W]");
  require(kernel >= 1 && stride >= 1, std::string(op) + ": kernel and stride must be >= 1");
  const std::size_t h = xv.dim(2), w = xv.dim(3);
  require(h >= kernel && w >= kernel, std::string(op) + ": window larger than input");
  return {xv.dim(0), xv.dim(1), h, w, (h - kernel) / stride + 1, (w - kernel) / stride + 1};
}

}  // namespace

Var max_pool2d(Var x, std::size_t kernel, std::size_t stride) {
  const Tensor& xv = x.value();
  const PoolGeometry g = pool_geometry(xv, kernel, stride, "max_pool2d");
  Tensor y({g.batch, g.channels, g.oh, g.ow});
  std::vector<std::size_t> argmax(y.numel());
  for (std::size_t plane = 0; plane < g.batch * g.channels; ++plane) {
    const Scalar* xp = xv.data() + plane * g.h * g.w;
    for (std::size_t r = 0; r < g.oh; ++r) {
      for (std::size_t c = 0; c < g.ow; ++c) {
        std::size_t best = (r * stride) * g.w + c * stride;
        for (std::size_t i = 0; i < kernel; ++i) {
          for (std::size_t j = 0; j < kernel; ++j) {
            const std::size_t idx = (r * stride + i) * g.w + c * stride + j;
            if (xp[idx] > xp[best]) best = idx;
          }
        }
        const std::size_t o = (plane * g.oh + r) * g.ow + c;
        y[o] = xp[best];
        argmax[o] = plane * g.h * g.w + best;
      }
    }
  }
  const Var parents[] = {x};
  return x.tape()->record(std::move(y), parents,
                          [x, argmax = std::move(argmax)](Tape& tape, std::span<const Scalar> gy) {
                            auto gx = tape.grad_slot(x);
                            for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
                          });
}

Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride) {
  const Tensor& xv = x.value();
  const PoolGeometry g = pool_geometry(xv, kernel, stride, "avg_pool2d");
  Tensor y({g.batch, g.channels, g.oh, g.ow});
  const Scalar inv = Scalar{1} / static_cast<Scalar>(kernel * kernel);
  for (std::size_t plane = 0; plane < g.batch * g.channels; ++plane) {
    const Scalar* xp = xv.data() + plane * g.h * g.w;
    for (std::size_t r = 0; r < g.oh; ++r) {
      for (std::size_t c = 0; c < g.ow; ++c) {
        Scalar acc = 0;
        for (std::size_t i = 0; i < kernel; ++i) {
          for (std::size_t j = 0; j < kernel; ++j) acc += xp[(r * stride + i) * g.w + c * stride + j];
        }
        y[(plane * g.oh + r) * g.ow + c] = acc * inv;
      }
    }
  }
  const Var parents[] = {x};
  return x.tape()->record(std::move(y), parents, [x, g, kernel, stride, inv](Tape& tape, std::span<const Scalar> gy) {
    auto gx = tape.grad_slot(x);
    for (std::size_t plane = 0; plane < g.batch * g.channels; ++plane) {
      Scalar* gxp = gx.data() + plane * g.h * g.w;
      for (std::size_t r = 0; r < g.oh; ++r) {
        for (std::size_t c = 0; c < g.ow; ++c) {
          const Scalar share = gy[(plane * g.oh + r) * g.ow + c] * inv;
          for (std::size_t i = 0; i < kernel; ++i) {
            for (std::size_t j = 0; j < kernel; ++j) gxp[(r * stride + i) * g.w + c * stride + j] += share;
          }
        }
      }
    }
  });
}

Var flatten(Var x) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 2, "flatten expects a batched tensor");
  const std::size_t batch = xv.dim(0);
  Tensor y = xv.reshaped({batch, xv.numel() / batch});
  const Var parents[] = {x};
  return x.tape()->record(std::move(y), parents, [x](Tape& tape, std::span<const Scalar> gy) {
    auto gx = tape.grad_slot(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  });
}

Tensor softmax(const Tensor& logits) {
  require(logits.rank() == 2, "softmax expects [B,C]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor p(logits.dims());
  for (std::size_t r = 0; r < batch; ++r) {
    const Scalar* z = logits.data() + r * classes;
    Scalar* pr = p.data() + r * classes;
    const Scalar m = *std::max_element(z, z + classes);
    Scalar sum = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      pr[c] = std::exp(z[c] - m);
      sum += pr[c];
    }
    for (std::size_t c = 0; c < classes; ++c) pr[c] /= sum;
  }
  return p;
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  if (labels.empty()) throw InputError("one_hot of an empty label list");
  Tensor y({labels.size(), classes});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw InputError("label " + std::to_string(labels[r]) + " outside [0, " + std::to_string(classes) + ")");
    }
    y[r * classes + static_cast<std::size_t>(labels[r])] = Scalar{1};
  }
  return y;
}

SoftmaxCrossEntropy softmax_cross_entropy(Var logits, const Tensor& labels) {
  const Tensor& z = logits.value();
  require(z.rank() == 2, "softmax_cross_entropy expects logits[B,C]");
  require(labels.dims() == z.dims(), "labels dims " + shape_string(labels.dims()) + " != logits dims " +
                                         shape_string(z.dims()));
  const std::size_t batch = z.dim(0), classes = z.dim(1);
  if (classes < 2) throw InputError("softmax_cross_entropy needs at least two classes");

  std::vector<std::size_t> target(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    std::size_t ones = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const Scalar v = labels[r * classes + c];
      if (v == Scalar{1}) {
        ++ones;
        target[r] = c;
      } else if (v != Scalar{0}) {
        ones = 2;
        break;
      }
    }
    if (ones != 1) throw InputError("label row " + std::to_string(r) + " is not one-hot");
  }

  Tensor probs = softmax(z);
  // -log p_y = (m - z_y) + log(sum_j exp(z_j - m)); the sum is split as
  // 1 + rest so near-zero losses keep their relative precision.
  Scalar total = 0;
  for (std::size_t r = 0; r < batch; ++r) {
    const Scalar* zr = z.data() + r * classes;
    const std::size_t top = static_cast<std::size_t>(std::max_element(zr, zr + classes) - zr);
    Scalar rest = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != top) rest += std::exp(zr[c] - zr[top]);
    }
    total += (zr[top] - zr[target[r]]) + std::log1p(rest);
  }
  Tensor loss = Tensor::scalar(total / static_cast<Scalar>(batch));

  const Var parents[] = {logits};
  Var out = logits.tape()->record(
      std::move(loss), parents,
      [logits, probs, labels, batch](Tape& tape, std::span<const Scalar> gy) {
        auto gz = tape.grad_slot(logits);
        const Scalar scale = gy[0] / static_cast<Scalar>(batch);
        for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += (probs[i] - labels[i]) * scale;
      });
  return {out, std::move(probs)};
}

}  // namespace sparselab
