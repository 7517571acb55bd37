#include "dspr/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

namespace dspr {

namespace {

struct Evaluation {
  double value;
  std::vector<bool> kinks;
};

class Harness {
 public:
  Harness(const GradCheckFn& fn, std::uint64_t seed) : fn_(fn), rng_(seed) {}

  // Builds the scalar objective; `grads` receives d/d(input) when non-null.
  Evaluation run(const std::vector<Tensor4<double>>& inputs, std::vector<Tensor4<double>>* grads) {
    Tape<double> tape;
    tape.set_record_kinks(true);
    std::vector<Var> leaves;
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x, true));
    Var y = fn_(tape, leaves);
    if (tape.value(y).size() != 1) {
      if (!weights_) {
        std::normal_distribution<double> n(0.0, 1.0);
        Tensor4<double> w(tape.value(y).shape());
        for (Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng_);
        weights_ = std::move(w);
      }
      y = sum(tape, mul(tape, y, tape.leaf(*weights_, false)));
    }
    Evaluation e{tape.value(y).data()[0], tape.kink_pattern()};
    if (grads) {
      tape.backward(y);
      grads->clear();
      for (const Var v : leaves) grads->push_back(tape.grad(v));
    }
    return e;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  const GradCheckFn& fn_;
  std::mt19937_64 rng_;
  std::optional<Tensor4<double>> weights_;
};

}  // namespace

GradCheckReport grad_check(const GradCheckFn& fn, const std::vector<Tensor4<double>>& inputs,
                           const GradCheckOptions& opts) {
  if (!(opts.step > 0.0) || !(opts.tol > 0.0)) throw ParameterError("grad_check: step and tol must be > 0");
  Harness h(fn, opts.seed);
  std::vector<Tensor4<double>> grads;
  const Evaluation base = h.run(inputs, &grads);

  // Flat (input, element) coordinates.
  std::vector<std::pair<std::size_t, Index>> coords;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (Index i = 0; i < inputs[k].size(); ++i) coords.emplace_back(k, i);
  if (opts.coords > 0 && opts.coords < static_cast<Index>(coords.size())) {
    std::shuffle(coords.begin(), coords.end(), h.rng());
    coords.resize(static_cast<std::size_t>(opts.coords));
  }

  GradCheckReport report;
  std::vector<Tensor4<double>> point = inputs;
  for (const auto& [k, i] : coords) {
    double& x = point[k].data()[i];
    const double x0 = x;
    x = x0 + opts.step;
    const Evaluation plus = h.run(point, nullptr);
    x = x0 - opts.step;
    const Evaluation minus = h.run(point, nullptr);
    x = x0;
    if (plus.kinks != base.kinks || minus.kinks != base.kinks) {
      ++report.skipped;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * opts.step);
    const double analytic = grads[k].data()[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(numeric - analytic) / denom);
    ++report.checked;
  }
  report.passed = report.checked > 0 && report.max_rel_error <= opts.tol;
  return report;
}

}  // namespace dspr
