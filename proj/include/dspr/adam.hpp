#pragma once

#include <cmath>
#include <vector>

#include "dspr/tensor.hpp"

namespace dspr {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates shaped like the parameters, plus the step count.
template <typename Scalar>
struct AdamState {
  std::vector<Tensor4<Scalar>> m;
  std::vector<Tensor4<Scalar>> v;
  long t = 0;
};

/// One bias-corrected ADAM update, in place.
template <typename Scalar>
void adam_step(std::vector<Tensor4<Scalar>*> params, const std::vector<Tensor4<Scalar>>& grads,
               AdamState<Scalar>& state, const AdamOptions& opt) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor4<Scalar>* p : params) {
      state.m.push_back(Tensor4<Scalar>::zeros(p->shape()));
      state.v.push_back(Tensor4<Scalar>::zeros(p->shape()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const Scalar b1 = static_cast<Scalar>(opt.beta1);
  const Scalar b2 = static_cast<Scalar>(opt.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(opt.beta1, t)));
  const Scalar c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(opt.beta2, t)));
  const Scalar lr = static_cast<Scalar>(opt.lr);
  const Scalar eps = static_cast<Scalar>(opt.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k]->data();
    const auto& g = grads[k].data();
    if (p.size() != g.size() || state.m[k].size() != p.size())
      throw ShapeError("adam_step: gradient shape differs from parameter");
    auto& m = state.m[k].data();
    auto& v = state.v[k].data();
    for (Index i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (Scalar(1) - b1) * g[i];
      v[i] = b2 * v[i] + (Scalar(1) - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
    }
  }
}

}  // namespace dspr
