#include "dspr/autodiff.hpp"

#include <cmath>
#include <sstream>

namespace dspr {

namespace {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

template <typename Scalar>
void require_same_shape(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.shape() << " vs " << b.shape();
    throw ShapeError(os.str());
  }
}

struct ConvGeometry {
  Index in_c, h, w, k, stride, pad, out_h, out_w;
  Index rows() const { return in_c * k * k; }
  Index cols() const { return out_h * out_w; }
};

// Unrolls one image into a (in_c*k*k) x (out_h*out_w) matrix.
template <typename Scalar>
void im2col(const Scalar* img, const ConvGeometry& g, RowMatrix<Scalar>& col) {
  col.resize(g.rows(), g.cols());
  for (Index c = 0; c < g.in_c; ++c) {
    const Scalar* plane = img + c * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        Scalar* row = col.data() + ((c * g.k + ky) * g.k + kx) * g.cols();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad;
          Scalar* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.out_w, Scalar(0));
            continue;
          }
          const Scalar* src = plane + iy * g.w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride + kx - g.pad;
            dst[ox] = (ix < 0 || ix >= g.w) ? Scalar(0) : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters a column matrix back into an image gradient.
template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& col, const ConvGeometry& g, Scalar* img) {
  for (Index c = 0; c < g.in_c; ++c) {
    Scalar* plane = img + c * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        const Scalar* row = col.data() + ((c * g.k + ky) * g.k + kx) * g.cols();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const Scalar* src = row + oy * g.out_w;
          Scalar* dst = plane + iy * g.w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Source taps for one output coordinate of the 2x bilinear upsampler.
struct UpsampleTap {
  Index i0, i1;
  double w0, w1;
};

std::vector<UpsampleTap> upsample_taps(Index in, Index out) {
  std::vector<UpsampleTap> taps(static_cast<std::size_t>(out));
  for (Index o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    Index i0 = static_cast<Index>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const Index i1 = std::min(i0 + 1, in - 1);
    const double l1 = src - static_cast<double>(i0);
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - l1, l1};
  }
  return taps;
}

template <typename Scalar>
Tensor4<Scalar> scalar_tensor(Scalar v) {
  return Tensor4<Scalar>(Shape4{1, 1, 1, 1}, v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

template <typename Scalar>
Var Tape<Scalar>::leaf(TensorT value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), TensorT{}, requires_grad, nullptr});
  return Var{nodes_.size() - 1};
}

template <typename Scalar>
Var Tape<Scalar>::record(TensorT value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(
      Node{std::move(value), TensorT{}, requires_grad, requires_grad ? std::move(backward) : nullptr});
  return Var{nodes_.size() - 1};
}

template <typename Scalar>
Tensor4<Scalar> Tape<Scalar>::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (node.grad.empty()) return TensorT::zeros(node.value.shape());
  return node.grad;
}

template <typename Scalar>
Tensor4<Scalar>& Tape<Scalar>::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.empty()) node.grad = TensorT::zeros(node.value.shape());
  return node.grad;
}

template <typename Scalar>
void Tape<Scalar>::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw ContractError("backward: loss node is not on this tape");
  if (nodes_[loss.id].value.size() != 1)
    throw ContractError("backward: loss must be a scalar (single-element) node");
  for (Node& node : nodes_) node.grad = TensorT{};
  grad_buffer(loss).data().setOnes();
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, Var{i});
  }
}

// ---------------------------------------------------------------------------
// conv2d

template <typename Scalar>
Var conv2d(Tape<Scalar>& tape, Var x, Var weight, std::optional<Var> bias, int stride) {
  const Tensor4<Scalar>& xv = tape.value(x);
  const Tensor4<Scalar>& wv = tape.value(weight);
  const Shape4 xs = xv.shape();
  const Shape4 ws = wv.shape();
  if (stride != 1 && stride != 2) throw ParameterError("conv2d: stride must be 1 or 2");
  if (ws.h != ws.w || (ws.h != 1 && ws.h != 3))
    throw ShapeError("conv2d: kernel must be 1x1 or 3x3");
  if (ws.c != xs.c) {
    std::ostringstream os;
    os << "conv2d: input has " << xs.c << " channels, weight expects " << ws.c;
    throw ShapeError(os.str());
  }
  if (bias) {
    const Shape4 bs = tape.value(*bias).shape();
    if (bs.size() != ws.n) throw ShapeError("conv2d: bias length must equal output channels");
  }

  const Index k = ws.h;
  const Index pad = (k - 1) / 2;
  ConvGeometry g{xs.c, xs.h, xs.w, k, stride, pad, (xs.h + 2 * pad - k) / stride + 1,
                 (xs.w + 2 * pad - k) / stride + 1};
  const Index out_c = ws.n;

  Tensor4<Scalar> out(Shape4{xs.n, out_c, g.out_h, g.out_w});
  ConstRowMap<Scalar> wmat(wv.data().data(), out_c, g.rows());
  RowMatrix<Scalar> col;
  for (Index n = 0; n < xs.n; ++n) {
    im2col(xv.plane_ptr(n, 0), g, col);
    RowMap<Scalar> y(out.plane_ptr(n, 0), out_c, g.cols());
    y.noalias() = wmat * col;
    if (bias) {
      const auto& b = tape.value(*bias).data();
      for (Index o = 0; o < out_c; ++o) y.row(o).array() += b[o];
    }
  }

  const bool rg = tape.requires_grad(x) || tape.requires_grad(weight) ||
                  (bias && tape.requires_grad(*bias));
  return tape.record(std::move(out), rg, [x, weight, bias, g, out_c](Tape<Scalar>& t, Var self) {
    const Tensor4<Scalar>& xv = t.value(x);
    const Tensor4<Scalar>& wv = t.value(weight);
    const Tensor4<Scalar>& gy = t.grad_buffer(self);
    const Index batch = xv.shape().n;
    ConstRowMap<Scalar> wmat(wv.data().data(), out_c, g.rows());
    RowMatrix<Scalar> col;
    RowMatrix<Scalar> dcol;
    const bool need_x = t.requires_grad(x);
    const bool need_w = t.requires_grad(weight);
    const bool need_b = bias && t.requires_grad(*bias);
    for (Index n = 0; n < batch; ++n) {
      ConstRowMap<Scalar> dy(gy.plane_ptr(n, 0), out_c, g.cols());
      if (need_w) {
        im2col(xv.plane_ptr(n, 0), g, col);
        RowMap<Scalar> dw(t.grad_buffer(weight).data().data(), out_c, g.rows());
        dw.noalias() += dy * col.transpose();
      }
      if (need_b) {
        auto& db = t.grad_buffer(*bias).data();
        for (Index o = 0; o < out_c; ++o) db[o] += dy.row(o).sum();
      }
      if (need_x) {
        dcol.noalias() = wmat.transpose() * dy;
        col2im_add(dcol, g, t.grad_buffer(x).plane_ptr(n, 0));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// batch_norm

template <typename Scalar>
Var batch_norm(Tape<Scalar>& tape, Var x, Var gamma, Var beta, Scalar eps) {
  const Tensor4<Scalar>& xv = tape.value(x);
  const Shape4 s = xv.shape();
  if (tape.value(gamma).size() != s.c || tape.value(beta).size() != s.c)
    throw ShapeError("batch_norm: gamma/beta length must equal channel count");
  const auto& gv = tape.value(gamma).data();
  const auto& bv = tape.value(beta).data();
  const double count = static_cast<double>(s.n * s.plane());

  Tensor4<Scalar> xhat(s);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(s.c);
  Tensor4<Scalar> out(s);
  for (Index c = 0; c < s.c; ++c) {
    double mean = 0.0;
    for (Index n = 0; n < s.n; ++n) {
      const Scalar* p = xv.plane_ptr(n, c);
      for (Index i = 0; i < s.plane(); ++i) mean += static_cast<double>(p[i]);
    }
    mean /= count;
    double var = 0.0;
    for (Index n = 0; n < s.n; ++n) {
      const Scalar* p = xv.plane_ptr(n, c);
      for (Index i = 0; i < s.plane(); ++i) {
        const double d = static_cast<double>(p[i]) - mean;
        var += d * d;
      }
    }
    var /= count;
    const Scalar istd = static_cast<Scalar>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[c] = istd;
    const Scalar m = static_cast<Scalar>(mean);
    for (Index n = 0; n < s.n; ++n) {
      const Scalar* p = xv.plane_ptr(n, c);
      Scalar* xh = xhat.plane_ptr(n, c);
      Scalar* y = out.plane_ptr(n, c);
      for (Index i = 0; i < s.plane(); ++i) {
        xh[i] = (p[i] - m) * istd;
        y[i] = gv[c] * xh[i] + bv[c];
      }
    }
  }

  const bool rg = tape.requires_grad(x) || tape.requires_grad(gamma) || tape.requires_grad(beta);
  return tape.record(
      std::move(out), rg,
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<Scalar>& t,
                                                                             Var self) {
        const Tensor4<Scalar>& gy = t.grad_buffer(self);
        const Shape4 s = gy.shape();
        const auto& gv = t.value(gamma).data();
        const double count = static_cast<double>(s.n * s.plane());
        for (Index c = 0; c < s.c; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (Index n = 0; n < s.n; ++n) {
            const Scalar* dy = gy.plane_ptr(n, c);
            const Scalar* xh = xhat.plane_ptr(n, c);
            for (Index i = 0; i < s.plane(); ++i) {
              sum_dy += static_cast<double>(dy[i]);
              sum_dy_xhat += static_cast<double>(dy[i]) * static_cast<double>(xh[i]);
            }
          }
          if (t.requires_grad(gamma)) t.grad_buffer(gamma).data()[c] += static_cast<Scalar>(sum_dy_xhat);
          if (t.requires_grad(beta)) t.grad_buffer(beta).data()[c] += static_cast<Scalar>(sum_dy);
          if (!t.requires_grad(x)) continue;
          // dx = gamma * istd * (dy - mean(dy) - xhat * mean(dy * xhat))
          const Scalar k = gv[c] * inv_std[c];
          const Scalar mean_dy = static_cast<Scalar>(sum_dy / count);
          const Scalar mean_dyx = static_cast<Scalar>(sum_dy_xhat / count);
          Tensor4<Scalar>& gx = t.grad_buffer(x);
          for (Index n = 0; n < s.n; ++n) {
            const Scalar* dy = gy.plane_ptr(n, c);
            const Scalar* xh = xhat.plane_ptr(n, c);
            Scalar* dx = gx.plane_ptr(n, c);
            for (Index i = 0; i < s.plane(); ++i) dx[i] += k * (dy[i] - mean_dy - xh[i] * mean_dyx);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// elementwise

template <typename Scalar>
Var leaky_relu(Tape<Scalar>& tape, Var x, Scalar alpha) {
  if (!(alpha >= Scalar(0) && alpha < Scalar(1)))
    throw ParameterError("leaky_relu: slope must lie in [0, 1)");
  const auto& xv = tape.value(x).data();
  Tensor4<Scalar> out(tape.value(x).shape());
  auto& y = out.data();
  for (Index i = 0; i < y.size(); ++i) y[i] = xv[i] >= Scalar(0) ? xv[i] : alpha * xv[i];
  if (tape.record_kinks()) {
    auto& kinks = tape.kink_pattern();
    for (Index i = 0; i < xv.size(); ++i) kinks.push_back(xv[i] >= Scalar(0));
  }
  return tape.record(std::move(out), tape.requires_grad(x), [x, alpha](Tape<Scalar>& t, Var self) {
    const auto& xv = t.value(x).data();
    const auto& dy = t.grad_buffer(self).data();
    auto& dx = t.grad_buffer(x).data();
    for (Index i = 0; i < dx.size(); ++i) dx[i] += xv[i] >= Scalar(0) ? dy[i] : alpha * dy[i];
  });
}

template <typename Scalar>
Var add(Tape<Scalar>& tape, Var x, Var y) {
  require_same_shape(tape.value(x), tape.value(y), "add");
  Tensor4<Scalar> out(tape.value(x).shape(), tape.value(x).data() + tape.value(y).data());
  const bool rg = tape.requires_grad(x) || tape.requires_grad(y);
  return tape.record(std::move(out), rg, [x, y](Tape<Scalar>& t, Var self) {
    const Tensor4<Scalar>& g = t.grad_buffer(self);
    if (t.requires_grad(x)) t.grad_buffer(x).data() += g.data();
    if (t.requires_grad(y)) t.grad_buffer(y).data() += g.data();
  });
}

template <typename Scalar>
Var mul(Tape<Scalar>& tape, Var x, Var y) {
  require_same_shape(tape.value(x), tape.value(y), "mul");
  Tensor4<Scalar> out(tape.value(x).shape(),
                      tape.value(x).data().cwiseProduct(tape.value(y).data()));
  const bool rg = tape.requires_grad(x) || tape.requires_grad(y);
  return tape.record(std::move(out), rg, [x, y](Tape<Scalar>& t, Var self) {
    const Tensor4<Scalar>& g = t.grad_buffer(self);
    if (t.requires_grad(x)) t.grad_buffer(x).data() += g.data().cwiseProduct(t.value(y).data());
    if (t.requires_grad(y)) t.grad_buffer(y).data() += g.data().cwiseProduct(t.value(x).data());
  });
}

template <typename Scalar>
Var scale(Tape<Scalar>& tape, Var x, Scalar factor) {
  Tensor4<Scalar> out(tape.value(x).shape(), tape.value(x).data() * factor);
  return tape.record(std::move(out), tape.requires_grad(x), [x, factor](Tape<Scalar>& t, Var self) {
    t.grad_buffer(x).data() += t.grad_buffer(self).data() * factor;
  });
}

template <typename Scalar>
Var sigmoid(Tape<Scalar>& tape, Var x) {
  const auto& xv = tape.value(x).data();
  Tensor4<Scalar> out(tape.value(x).shape());
  auto& y = out.data();
  for (Index i = 0; i < y.size(); ++i) y[i] = Scalar(1) / (Scalar(1) + std::exp(-xv[i]));
  return tape.record(std::move(out), tape.requires_grad(x), [x](Tape<Scalar>& t, Var self) {
    const auto& y = t.value(self).data();
    const auto& dy = t.grad_buffer(self).data();
    auto& dx = t.grad_buffer(x).data();
    for (Index i = 0; i < dx.size(); ++i) dx[i] += dy[i] * y[i] * (Scalar(1) - y[i]);
  });
}

template <typename Scalar>
Var sum(Tape<Scalar>& tape, Var x) {
  double acc = 0.0;
  const auto& xv = tape.value(x).data();
  for (Index i = 0; i < xv.size(); ++i) acc += static_cast<double>(xv[i]);
  return tape.record(scalar_tensor<Scalar>(static_cast<Scalar>(acc)), tape.requires_grad(x),
                     [x](Tape<Scalar>& t, Var self) {
                       t.grad_buffer(x).data().array() += t.grad_buffer(self).data()[0];
                     });
}

template <typename Scalar>
Var crop(Tape<Scalar>& tape, Var x, Index h, Index w) {
  const Tensor4<Scalar>& xv = tape.value(x);
  const Shape4 s = xv.shape();
  if (h < 1 || w < 1 || h > s.h || w > s.w) throw ShapeError("crop: window exceeds input");
  Tensor4<Scalar> out(Shape4{s.n, s.c, h, w});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) out.plane(n, c) = xv.plane(n, c).topLeftCorner(h, w);
  return tape.record(std::move(out), tape.requires_grad(x), [x, h, w](Tape<Scalar>& t, Var self) {
    const Tensor4<Scalar>& g = t.grad_buffer(self);
    Tensor4<Scalar>& gx = t.grad_buffer(x);
    for (Index n = 0; n < g.shape().n; ++n)
      for (Index c = 0; c < g.shape().c; ++c) gx.plane(n, c).topLeftCorner(h, w) += g.plane(n, c);
  });
}

template <typename Scalar>
Var masked_mse(Tape<Scalar>& tape, Var pred, const Tensor4<Scalar>& target,
               const Tensor4<Scalar>& mask01) {
  const Tensor4<Scalar>& pv = tape.value(pred);
  require_same_shape(pv, target, "masked_mse");
  require_same_shape(pv, mask01, "masked_mse");
  double weight = 0.0;
  double acc = 0.0;
  const auto& p = pv.data();
  const auto& tg = target.data();
  const auto& m = mask01.data();
  for (Index i = 0; i < p.size(); ++i) {
    if (m[i] == Scalar(0)) continue;
    const double d = static_cast<double>(p[i]) - static_cast<double>(tg[i]);
    weight += static_cast<double>(m[i]);
    acc += static_cast<double>(m[i]) * d * d;
  }
  if (weight == 0.0) throw EmptyMaskError("masked_mse: mask selects no entries");
  const Scalar loss = static_cast<Scalar>(acc / weight);
  return tape.record(scalar_tensor(loss), tape.requires_grad(pred),
                     [pred, target, mask01, weight](Tape<Scalar>& t, Var self) {
                       const Scalar up = t.grad_buffer(self).data()[0];
                       const Scalar k = static_cast<Scalar>(2.0 / weight) * up;
                       const auto& p = t.value(pred).data();
                       const auto& tg = target.data();
                       const auto& m = mask01.data();
                       auto& dp = t.grad_buffer(pred).data();
                       for (Index i = 0; i < dp.size(); ++i) {
                         if (m[i] == Scalar(0)) continue;
                         dp[i] += k * m[i] * (p[i] - tg[i]);
                       }
                     });
}

// ---------------------------------------------------------------------------
// upsampling

template <typename Scalar>
Tensor4<Scalar> upsample_bilinear2x(const Tensor4<Scalar>& x) {
  const Shape4 s = x.shape();
  const auto ty = upsample_taps(s.h, 2 * s.h);
  const auto tx = upsample_taps(s.w, 2 * s.w);
  Tensor4<Scalar> out(Shape4{s.n, s.c, 2 * s.h, 2 * s.w});
  for (Index n = 0; n < s.n; ++n) {
    for (Index c = 0; c < s.c; ++c) {
      const Scalar* src = x.plane_ptr(n, c);
      Scalar* dst = out.plane_ptr(n, c);
      for (Index oy = 0; oy < 2 * s.h; ++oy) {
        const UpsampleTap& a = ty[static_cast<std::size_t>(oy)];
        const Scalar* r0 = src + a.i0 * s.w;
        const Scalar* r1 = src + a.i1 * s.w;
        Scalar* row = dst + oy * 2 * s.w;
        for (Index ox = 0; ox < 2 * s.w; ++ox) {
          const UpsampleTap& b = tx[static_cast<std::size_t>(ox)];
          const Scalar top = static_cast<Scalar>(b.w0) * r0[b.i0] + static_cast<Scalar>(b.w1) * r0[b.i1];
          const Scalar bot = static_cast<Scalar>(b.w0) * r1[b.i0] + static_cast<Scalar>(b.w1) * r1[b.i1];
          row[ox] = static_cast<Scalar>(a.w0) * top + static_cast<Scalar>(a.w1) * bot;
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Var upsample_bilinear2x(Tape<Scalar>& tape, Var x) {
  Tensor4<Scalar> out = upsample_bilinear2x(tape.value(x));
  return tape.record(std::move(out), tape.requires_grad(x), [x](Tape<Scalar>& t, Var self) {
    const Tensor4<Scalar>& g = t.grad_buffer(self);
    Tensor4<Scalar>& gx = t.grad_buffer(x);
    const Shape4 s = gx.shape();
    const auto ty = upsample_taps(s.h, 2 * s.h);
    const auto tx = upsample_taps(s.w, 2 * s.w);
    for (Index n = 0; n < s.n; ++n) {
      for (Index c = 0; c < s.c; ++c) {
        const Scalar* src = g.plane_ptr(n, c);
        Scalar* dst = gx.plane_ptr(n, c);
        for (Index oy = 0; oy < 2 * s.h; ++oy) {
          const UpsampleTap& a = ty[static_cast<std::size_t>(oy)];
          Scalar* r0 = dst + a.i0 * s.w;
          Scalar* r1 = dst + a.i1 * s.w;
          const Scalar* row = src + oy * 2 * s.w;
          for (Index ox = 0; ox < 2 * s.w; ++ox) {
            const UpsampleTap& b = tx[static_cast<std::size_t>(ox)];
            const Scalar top = static_cast<Scalar>(a.w0) * row[ox];
            const Scalar bot = static_cast<Scalar>(a.w1) * row[ox];
            r0[b.i0] += static_cast<Scalar>(b.w0) * top;
            r0[b.i1] += static_cast<Scalar>(b.w1) * top;
            r1[b.i0] += static_cast<Scalar>(b.w0) * bot;
            r1[b.i1] += static_cast<Scalar>(b.w1) * bot;
          }
        }
      }
    }
  });
}

template <typename Scalar>
Tensor4<Scalar> pad_bottom_right(const Tensor4<Scalar>& x, Index h, Index w) {
  const Shape4 s = x.shape();
  if (h < s.h || w < s.w) throw ShapeError("pad_bottom_right: target smaller than input");
  Tensor4<Scalar> out(Shape4{s.n, s.c, h, w});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) out.plane(n, c).topLeftCorner(s.h, s.w) = x.plane(n, c);
  return out;
}

// ---------------------------------------------------------------------------

#define DSPR_INSTANTIATE_AUTODIFF(S)                                                     \
  template class Tape<S>;                                                                \
  template Var conv2d<S>(Tape<S>&, Var, Var, std::optional<Var>, int);                   \
  template Var batch_norm<S>(Tape<S>&, Var, Var, Var, S);                                \
  template Var leaky_relu<S>(Tape<S>&, Var, S);                                          \
  template Var upsample_bilinear2x<S>(Tape<S>&, Var);                                    \
  template Var add<S>(Tape<S>&, Var, Var);                                               \
  template Var mul<S>(Tape<S>&, Var, Var);                                               \
  template Var scale<S>(Tape<S>&, Var, S);                                               \
  template Var sigmoid<S>(Tape<S>&, Var);                                                \
  template Var sum<S>(Tape<S>&, Var);                                                    \
  template Var crop<S>(Tape<S>&, Var, Index, Index);                                     \
  template Var masked_mse<S>(Tape<S>&, Var, const Tensor4<S>&, const Tensor4<S>&);       \
  template Tensor4<S> upsample_bilinear2x<S>(const Tensor4<S>&);                         \
  template Tensor4<S> pad_bottom_right<S>(const Tensor4<S>&, Index, Index);

DSPR_INSTANTIATE_AUTODIFF(float)
DSPR_INSTANTIATE_AUTODIFF(double)

}  // namespace dspr
