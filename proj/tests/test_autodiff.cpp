#include "doctest.h"

#include <cmath>

#include "dspr/adam.hpp"
#include "dspr/autodiff.hpp"
#include "dspr/grad_check.hpp"
#include "support.hpp"

using namespace dspr;
using T4 = Tensor4<double>;

namespace {

// Direct-loop cross-correlation with zero padding, used as the oracle.
T4 naive_conv(const T4& x, const T4& w, const T4* bias, int stride) {
  const Index k = w.shape().h;
  const Index pad = (k - 1) / 2;
  const Index oh = (x.shape().h + 2 * pad - k) / stride + 1;
  const Index ow = (x.shape().w + 2 * pad - k) / stride + 1;
  T4 y(Shape4{x.shape().n, w.shape().n, oh, ow});
  for (Index n = 0; n < x.shape().n; ++n)
    for (Index o = 0; o < w.shape().n; ++o)
      for (Index i = 0; i < oh; ++i)
        for (Index j = 0; j < ow; ++j) {
          double acc = bias ? bias->data()[o] : 0.0;
          for (Index c = 0; c < x.shape().c; ++c)
            for (Index a = 0; a < k; ++a)
              for (Index b = 0; b < k; ++b) {
                const Index r = i * stride + a - pad;
                const Index s = j * stride + b - pad;
                if (r < 0 || s < 0 || r >= x.shape().h || s >= x.shape().w) continue;
                acc += w(o, c, a, b) * x(n, c, r, s);
              }
          y(n, o, i, j) = acc;
        }
  return y;
}

double max_abs_diff(const T4& a, const T4& b) {
  REQUIRE(a.shape() == b.shape());
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

T4 conv_value(const T4& x, const T4& w, const std::optional<T4>& bias, int stride) {
  Tape<double> tape;
  const Var xv = tape.leaf(x);
  const Var wv = tape.leaf(w);
  std::optional<Var> bv;
  if (bias) bv = tape.leaf(*bias);
  return tape.value(conv2d(tape, xv, wv, bv, stride));
}

template <typename Fn>
T4 unary_value(const T4& x, Fn fn) {
  Tape<double> tape;
  return tape.value(fn(tape, tape.leaf(x)));
}

GradCheckReport check(const GradCheckFn& fn, const std::vector<T4>& inputs, double step, double tol,
                      std::uint64_t seed = 0) {
  GradCheckOptions o;
  o.step = step;
  o.tol = tol;
  o.seed = seed;
  return grad_check(fn, inputs, o);
}

}  // namespace

TEST_CASE("conv2d hand examples") {
  const T4 ones(Shape4{1, 1, 3, 3}, 1.0);
  const T4 y = conv_value(ones, ones, T4(Shape4{1, 1, 1, 1}, 0.0), 1);
  CHECK(y(0, 0, 1, 1) == 9.0);
  CHECK(y(0, 0, 0, 1) == 6.0);
  CHECK(y(0, 0, 1, 0) == 6.0);
  CHECK(y(0, 0, 0, 0) == 4.0);
  CHECK(y(0, 0, 2, 2) == 4.0);

  T4 delta(Shape4{1, 1, 3, 3});
  delta(0, 0, 1, 1) = 1.0;
  const T4 x = testing::random_tensor<double>(Shape4{1, 1, 5, 6}, 1);
  CHECK(conv_value(x, delta, std::nullopt, 1).data() == x.data());

  CHECK(conv_value(T4(Shape4{1, 1, 4, 4}, 1.0), ones, std::nullopt, 2).shape() == Shape4{1, 1, 2, 2});
  CHECK(conv_value(T4(Shape4{1, 1, 5, 5}, 1.0), ones, std::nullopt, 2).shape() == Shape4{1, 1, 3, 3});
}

TEST_CASE("conv2d matches the direct-loop oracle") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Index k = seed % 3 == 0 ? 1 : 3;
    const int stride = seed % 2 == 0 ? 2 : 1;
    const T4 x = testing::random_tensor<double>(Shape4{1 + Index(seed % 2), 3, 7, 6}, seed);
    const T4 w = testing::random_tensor<double>(Shape4{4, 3, k, k}, seed + 100);
    const T4 b = testing::random_tensor<double>(Shape4{1, 4, 1, 1}, seed + 200);
    CHECK(max_abs_diff(conv_value(x, w, b, stride), naive_conv(x, w, &b, stride)) <= 1e-12);
    CHECK(max_abs_diff(conv_value(x, w, std::nullopt, stride), naive_conv(x, w, nullptr, stride)) <= 1e-12);
  }
}

TEST_CASE("conv2d rejects bad shapes") {
  const T4 x(Shape4{1, 2, 4, 4}, 1.0);
  CHECK_THROWS_AS(conv_value(x, T4(Shape4{1, 3, 3, 3}, 1.0), std::nullopt, 1), ShapeError);
  CHECK_THROWS_AS(conv_value(x, T4(Shape4{1, 2, 2, 2}, 1.0), std::nullopt, 1), ShapeError);
  CHECK_THROWS_AS(conv_value(x, T4(Shape4{1, 2, 3, 3}, 1.0), std::nullopt, 3), ParameterError);
  CHECK_THROWS_AS(conv_value(x, T4(Shape4{2, 2, 3, 3}, 1.0), T4(Shape4{1, 3, 1, 1}), 1), ShapeError);
}

TEST_CASE("batch_norm examples") {
  SUBCASE("two-point standardization") {
    T4 x(Shape4{1, 1, 1, 2});
    x.data() << 1.0, 3.0;
    Tape<double> tape;
    const Var y = batch_norm(tape, tape.leaf(x), tape.leaf(T4(Shape4{1, 1, 1, 1}, 1.0)),
                             tape.leaf(T4(Shape4{1, 1, 1, 1}, 0.0)));
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(tape.value(y).data()[0] == doctest::Approx(-expect).epsilon(1e-14));
    CHECK(tape.value(y).data()[1] == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("gamma = 0 gives beta and no gradient to x") {
    const T4 x = testing::random_tensor<double>(Shape4{1, 2, 3, 3}, 5);
    Tape<double> tape;
    const Var xv = tape.leaf(x, true);
    T4 beta(Shape4{1, 2, 1, 1});
    beta.data() << 0.5, -1.5;
    const Var y = batch_norm(tape, xv, tape.leaf(T4(Shape4{1, 2, 1, 1}, 0.0), true), tape.leaf(beta, true));
    for (Index i = 0; i < 9; ++i) {
      CHECK(tape.value(y).plane_ptr(0, 0)[i] == 0.5);
      CHECK(tape.value(y).plane_ptr(0, 1)[i] == -1.5);
    }
    const T4 r = testing::random_tensor<double>(Shape4{1, 2, 3, 3}, 6);
    tape.backward(sum(tape, mul(tape, y, tape.leaf(r))));
    CHECK(tape.grad(xv).data().isZero(0.0));
  }
  SUBCASE("per-channel output mean is beta") {
    const T4 x = testing::random_tensor<double>(Shape4{1, 4, 8, 8}, 7, -3.0, 5.0);
    Tape<double> tape;
    const Var y = batch_norm(tape, tape.leaf(x), tape.leaf(T4(Shape4{1, 4, 1, 1}, 1.0)),
                             tape.leaf(T4(Shape4{1, 4, 1, 1}, 0.0)));
    for (Index c = 0; c < 4; ++c) {
      const auto p = tape.value(y).plane(0, c);
      const double mean = p.mean();
      CHECK(std::abs(mean) <= 1e-6);
      const double var = (p.array() - mean).square().mean();
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  SUBCASE("channel mismatch") {
    Tape<double> tape;
    CHECK_THROWS_AS(batch_norm(tape, tape.leaf(T4(Shape4{1, 2, 2, 2}, 1.0)), tape.leaf(T4(Shape4{1, 3, 1, 1})),
                               tape.leaf(T4(Shape4{1, 3, 1, 1}))),
                    ShapeError);
  }
}

TEST_CASE("leaky_relu examples") {
  T4 x(Shape4{1, 1, 1, 3});
  x.data() << 2.0, -1.0, 0.0;
  const T4 y = unary_value(x, [](Tape<double>& t, Var v) { return leaky_relu(t, v, 0.2); });
  CHECK(y.data()[0] == 2.0);
  CHECK(y.data()[1] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(y.data()[2] == 0.0);
  const T4 r = testing::random_tensor<double>(Shape4{1, 2, 5, 5}, 3);
  const T4 relu = unary_value(r, [](Tape<double>& t, Var v) { return leaky_relu(t, v, 0.0); });
  CHECK(relu.data().minCoeff() == 0.0);

  // Subgradient at 0 is 1.
  Tape<double> tape;
  const Var xv = tape.leaf(x, true);
  tape.backward(sum(tape, leaky_relu(tape, xv, 0.2)));
  CHECK(tape.grad(xv).data()[0] == 1.0);
  CHECK(tape.grad(xv).data()[1] == 0.2);
  CHECK(tape.grad(xv).data()[2] == 1.0);

  Tape<double> bad;
  CHECK_THROWS_AS(leaky_relu(bad, bad.leaf(x), 1.0), ParameterError);
  CHECK_THROWS_AS(leaky_relu(bad, bad.leaf(x), -0.1), ParameterError);
}

TEST_CASE("upsample_bilinear2x follows the half-pixel formula") {
  auto up = [](const T4& x) { return unary_value(x, [](Tape<double>& t, Var v) { return upsample_bilinear2x(t, v); }); };
  CHECK((up(T4(Shape4{1, 2, 3, 2}, 4.5)).data().array() == 4.5).all());

  T4 x(Shape4{1, 1, 2, 2});
  x(0, 0, 0, 0) = 0;
  x(0, 0, 0, 1) = 1;
  x(0, 0, 1, 0) = 2;
  x(0, 0, 1, 1) = 3;
  const T4 y = up(x);
  REQUIRE(y.shape() == Shape4{1, 1, 4, 4});
  // Oracle: evaluate the coordinate formula cell by cell.
  auto coord = [](Index o, Index n, Index& i0, Index& i1, double& f) {
    double s = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (s < 0) s = 0;
    i0 = static_cast<Index>(std::floor(s));
    i1 = std::min(i0 + 1, n - 1);
    f = s - static_cast<double>(i0);
  };
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) {
      Index r0, r1, c0, c1;
      double fr, fc;
      coord(i, 2, r0, r1, fr);
      coord(j, 2, c0, c1, fc);
      const double top = (1 - fc) * x(0, 0, r0, c0) + fc * x(0, 0, r0, c1);
      const double bot = (1 - fc) * x(0, 0, r1, c0) + fc * x(0, 0, r1, c1);
      CHECK(y(0, 0, i, j) == doctest::Approx((1 - fr) * top + fr * bot).epsilon(1e-15));
    }
  CHECK(y(0, 0, 0, 0) == 0.0);
  CHECK(y(0, 0, 3, 3) == 3.0);
  CHECK(y(0, 0, 0, 1) == doctest::Approx(0.25));
  CHECK(y(0, 0, 1, 0) == doctest::Approx(0.5));

  // Plain and taped versions agree.
  const T4 r = testing::random_tensor<double>(Shape4{1, 3, 4, 5}, 8);
  CHECK(upsample_bilinear2x(r).data() == up(r).data());
}

TEST_CASE("linear ops satisfy superposition") {
  const double a = -1.7;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const T4 x = testing::random_tensor<double>(Shape4{1, 2, 6, 6}, seed);
    const T4 y = testing::random_tensor<double>(Shape4{1, 2, 6, 6}, seed + 50);
    T4 ax_y(x.shape());
    ax_y.data() = a * x.data() + y.data();

    const T4 up_l = upsample_bilinear2x(ax_y);
    T4 up_r(up_l.shape());
    up_r.data() = a * upsample_bilinear2x(x).data() + upsample_bilinear2x(y).data();
    CHECK(max_abs_diff(up_l, up_r) <= 1e-6 * std::max(1.0, up_r.data().cwiseAbs().maxCoeff()));

    const T4 w = testing::random_tensor<double>(Shape4{3, 2, 3, 3}, seed + 7);
    const T4 cl = conv_value(ax_y, w, std::nullopt, 1);
    T4 cr(cl.shape());
    cr.data() = a * conv_value(x, w, std::nullopt, 1).data() + conv_value(y, w, std::nullopt, 1).data();
    CHECK(max_abs_diff(cl, cr) <= 1e-6 * std::max(1.0, cr.data().cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("add, sigmoid and masked_mse examples") {
  const T4 x = testing::random_tensor<double>(Shape4{1, 2, 3, 3}, 2);
  {
    Tape<double> tape;
    const Var xv = tape.leaf(x, true);
    const Var yv = tape.leaf(T4(x.shape()), true);
    const Var s = add(tape, xv, yv);
    CHECK(tape.value(s).data() == x.data());
    T4 neg(x.shape());
    neg.data() = -x.data();
    CHECK(tape.value(add(tape, xv, tape.leaf(neg))).data().isZero(0.0));
    tape.backward(sum(tape, s));
    CHECK(tape.grad(xv).data().isOnes(0.0));
    CHECK(tape.grad(yv).data().isOnes(0.0));
    CHECK_THROWS_AS(add(tape, xv, tape.leaf(T4(Shape4{1, 2, 3, 4}))), ShapeError);
  }
  {
    T4 z(Shape4{1, 1, 1, 2});
    z.data() << 0.0, 40.0;
    Tape<double> tape;
    const Var zv = tape.leaf(z, true);
    const Var s = sigmoid(tape, zv);
    CHECK(tape.value(s).data()[0] == 0.5);
    CHECK(std::abs(tape.value(s).data()[1] - 1.0) <= 1e-15);
    tape.backward(sum(tape, s));
    const double h = 1e-5;
    const double fd = (1.0 / (1.0 + std::exp(-h)) - 1.0 / (1.0 + std::exp(h))) / (2 * h);
    CHECK(tape.grad(zv).data()[0] == 0.25);
    CHECK(std::abs(fd - 0.25) <= 1e-6);
  }
  {
    const T4 target = testing::random_tensor<double>(Shape4{1, 1, 4, 4}, 3);
    T4 mask(target.shape());
    for (Index j = 0; j < 4; j += 2) mask.plane(0, 0).col(j).setOnes();
    Tape<double> tape;
    CHECK(tape.value(masked_mse(tape, tape.leaf(target), target, mask)).data()[0] == 0.0);
    T4 off(target.shape());
    off.data() = target.data().array() + 1.0;
    const Var pv = tape.leaf(testing::random_tensor<double>(target.shape(), 4), true);
    CHECK(tape.value(masked_mse(tape, tape.leaf(off), target, mask)).data()[0] == doctest::Approx(1.0));
    const Var loss = masked_mse(tape, pv, target, mask);
    tape.backward(loss);
    const T4 g = tape.grad(pv);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) {
        if (j % 2 == 1) CHECK(g(0, 0, i, j) == 0.0);
        else CHECK(g(0, 0, i, j) != 0.0);
      }
    CHECK_THROWS_AS(masked_mse(tape, pv, target, T4(target.shape())), EmptyMaskError);
  }
}

TEST_CASE("backward examples and contract") {
  const T4 x = testing::random_tensor<double>(Shape4{1, 2, 3, 4}, 11);
  Tape<double> tape;
  const Var xv = tape.leaf(x, true);
  tape.backward(sum(tape, xv));
  CHECK(tape.grad(xv).data().isOnes(0.0));

  const Var half = scale(tape, sum(tape, mul(tape, xv, xv)), 0.5);
  tape.backward(half);
  CHECK((tape.grad(xv).data() - x.data()).cwiseAbs().maxCoeff() == 0.0);

  // Fan-out accumulates: d/dx sum(x + x) = 2.
  tape.backward(sum(tape, add(tape, xv, xv)));
  CHECK((tape.grad(xv).data().array() == 2.0).all());

  CHECK_THROWS_AS(tape.backward(xv), ContractError);
}

TEST_CASE("grad_check examples") {
  SUBCASE("conv2d at step 1e-5") {
    const auto r = check(
        [](Tape<double>& t, std::span<const Var> in) { return conv2d(t, in[0], in[1], std::optional<Var>(in[2]), 1); },
        {testing::random_tensor<double>(Shape4{1, 2, 5, 5}, 1), testing::random_tensor<double>(Shape4{3, 2, 3, 3}, 2),
         testing::random_tensor<double>(Shape4{1, 3, 1, 1}, 3)},
        1e-5, 1e-6);
    CHECK(r.passed);
    CHECK(r.skipped == 0);
  }
  SUBCASE("batch_norm") {
    const auto r = check(
        [](Tape<double>& t, std::span<const Var> in) { return batch_norm(t, in[0], in[1], in[2]); },
        {testing::random_tensor<double>(Shape4{1, 3, 4, 4}, 4), testing::random_tensor<double>(Shape4{1, 3, 1, 1}, 5),
         testing::random_tensor<double>(Shape4{1, 3, 1, 1}, 6)},
        1e-5, 1e-5);
    CHECK(r.passed);
  }
  SUBCASE("leaky_relu away from zero is exact") {
    T4 x = testing::random_tensor<double>(Shape4{1, 1, 4, 4}, 7, 0.5, 2.0);
    for (Index i = 0; i < x.size(); i += 2) x.data()[i] = -x.data()[i];
    const auto r = check([](Tape<double>& t, std::span<const Var> in) { return leaky_relu(t, in[0], 0.2); }, {x},
                         1e-5, 1e-9);
    CHECK(r.passed);
    CHECK(r.skipped == 0);
  }
  SUBCASE("coordinates straddling a kink are skipped, not failed") {
    T4 x = testing::random_tensor<double>(Shape4{1, 1, 2, 2}, 8, 0.5, 2.0);
    x.data()[1] = 1e-6;
    const auto r = check([](Tape<double>& t, std::span<const Var> in) { return leaky_relu(t, in[0], 0.2); }, {x},
                         1e-4, 1e-9);
    CHECK(r.skipped == 1);
    CHECK(r.checked == 3);
    CHECK(r.passed);
  }
  SUBCASE("a wrong gradient fails") {
    // sigmoid value with the gradient of the identity, via a custom node.
    const auto r = check(
        [](Tape<double>& t, std::span<const Var> in) {
          const Var s = sigmoid(t, in[0]);
          return t.record(t.value(s), true, [src = in[0]](Tape<double>& tp, Var self) {
            tp.grad_buffer(src).data() += tp.grad(self).data();
          });
        },
        {testing::random_tensor<double>(Shape4{1, 1, 2, 2}, 9)}, 1e-5, 1e-4);
    CHECK_FALSE(r.passed);
  }
}

TEST_CASE("every differentiable op passes grad_check on 100 random instances") {
  using Fn = GradCheckFn;
  struct Case {
    const char* name;
    Fn fn;
    std::vector<Shape4> shapes;
  };
  const std::vector<Case> cases{
      {"conv2d s1", [](Tape<double>& t, std::span<const Var> in) { return conv2d(t, in[0], in[1], std::optional<Var>(in[2]), 1); },
       {{1, 2, 4, 5}, {2, 2, 3, 3}, {1, 2, 1, 1}}},
      {"conv2d s2", [](Tape<double>& t, std::span<const Var> in) { return conv2d(t, in[0], in[1], std::nullopt, 2); },
       {{1, 2, 5, 4}, {2, 2, 3, 3}}},
      {"conv2d 1x1", [](Tape<double>& t, std::span<const Var> in) { return conv2d(t, in[0], in[1], std::nullopt, 1); },
       {{1, 3, 3, 3}, {2, 3, 1, 1}}},
      {"batch_norm", [](Tape<double>& t, std::span<const Var> in) { return batch_norm(t, in[0], in[1], in[2]); },
       {{1, 2, 3, 3}, {1, 2, 1, 1}, {1, 2, 1, 1}}},
      {"leaky_relu", [](Tape<double>& t, std::span<const Var> in) { return leaky_relu(t, in[0], 0.2); }, {{1, 2, 3, 3}}},
      {"upsample", [](Tape<double>& t, std::span<const Var> in) { return upsample_bilinear2x(t, in[0]); }, {{1, 2, 3, 2}}},
      {"add", [](Tape<double>& t, std::span<const Var> in) { return add(t, in[0], in[1]); }, {{1, 2, 2, 3}, {1, 2, 2, 3}}},
      {"mul", [](Tape<double>& t, std::span<const Var> in) { return mul(t, in[0], in[1]); }, {{1, 2, 2, 3}, {1, 2, 2, 3}}},
      {"sigmoid", [](Tape<double>& t, std::span<const Var> in) { return sigmoid(t, in[0]); }, {{1, 2, 3, 3}}},
      {"crop", [](Tape<double>& t, std::span<const Var> in) { return crop(t, in[0], 2, 3); }, {{1, 2, 4, 4}}},
      {"masked_mse",
       [](Tape<double>& t, std::span<const Var> in) {
         const T4 target = testing::random_tensor<double>(Shape4{1, 1, 3, 4}, 77);
         T4 mask(target.shape());
         mask.plane(0, 0).col(1).setOnes();
         mask.plane(0, 0).col(2).setOnes();
         return masked_mse(t, in[0], target, mask);
       },
       {{1, 1, 3, 4}}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    int failures = 0;
    Index checked = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      std::vector<T4> inputs;
      for (std::size_t k = 0; k < c.shapes.size(); ++k)
        inputs.push_back(testing::random_tensor<double>(c.shapes[k], 1000 * trial + k + 1));
      const auto r = check(c.fn, inputs, 1e-5, 1e-5, trial);
      failures += r.passed ? 0 : 1;
      checked += r.checked;
    }
    CHECK(failures == 0);
    CHECK(checked > 0);
  }
}

TEST_CASE("tape evaluation is deterministic") {
  auto run = [] {
    const T4 x = testing::random_tensor<double>(Shape4{1, 2, 6, 6}, 1);
    const T4 w = testing::random_tensor<double>(Shape4{3, 2, 3, 3}, 2);
    Tape<double> tape;
    const Var xv = tape.leaf(x, true);
    const Var wv = tape.leaf(w, true);
    const Var y = sigmoid(tape, leaky_relu(tape, conv2d(tape, xv, wv, std::nullopt, 2), 0.2));
    tape.backward(sum(tape, y));
    return std::make_pair(tape.value(y), tape.grad(wv));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first.data() == b.first.data());
  CHECK(a.second.data() == b.second.data());
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves params unchanged") {
    T4 p = testing::random_tensor<double>(Shape4{1, 1, 2, 2}, 1);
    const T4 before = p;
    AdamState<double> st;
    adam_step<double>({&p}, {T4(p.shape())}, st, AdamOptions{});
    CHECK(p.data() == before.data());
    CHECK(st.t == 1);
  }
  SUBCASE("first step moves by lr for a constant gradient") {
    T4 p(Shape4{1, 1, 1, 1}, 1.0);
    AdamState<double> st;
    AdamOptions o;
    o.lr = 0.01;
    adam_step<double>({&p}, {T4(p.shape(), 0.37)}, st, o);
    CHECK(std::abs((1.0 - p.data()[0]) - 0.01) <= 1e-9);
  }
  SUBCASE("two steps against a hand-rolled reference") {
    T4 p(Shape4{1, 1, 1, 2});
    p.data() << 0.5, -0.25;
    AdamState<double> st;
    AdamOptions o;
    o.lr = 0.1;
    const double g1[2] = {0.3, -2.0};
    const double g2[2] = {-0.1, 0.5};
    double ref[2] = {0.5, -0.25};
    for (int k = 0; k < 2; ++k) {
      double m = 0, v = 0;
      const double gs[2] = {g1[k], g2[k]};
      for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * gs[t - 1];
        v = 0.999 * v + 0.001 * gs[t - 1] * gs[t - 1];
        const double mh = m / (1 - std::pow(0.9, t));
        const double vh = v / (1 - std::pow(0.999, t));
        ref[k] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    T4 ga(p.shape()), gb(p.shape());
    ga.data() << g1[0], g1[1];
    gb.data() << g2[0], g2[1];
    adam_step<double>({&p}, {ga}, st, o);
    adam_step<double>({&p}, {gb}, st, o);
    CHECK(st.t == 2);
    CHECK(p.data()[0] == doctest::Approx(ref[0]).epsilon(1e-12));
    CHECK(p.data()[1] == doctest::Approx(ref[1]).epsilon(1e-12));
  }
  SUBCASE("identical runs are bit-identical") {
    auto run = [] {
      T4 p = testing::random_tensor<double>(Shape4{1, 2, 3, 3}, 4);
      AdamState<double> st;
      for (int t = 0; t < 10; ++t) adam_step<double>({&p}, {testing::random_tensor<double>(p.shape(), 100 + t)}, st, AdamOptions{});
      return p;
    };
    CHECK(run().data() == run().data());
  }
  SUBCASE("shape mismatch") {
    T4 p(Shape4{1, 1, 2, 2});
    AdamState<double> st;
    CHECK_THROWS_AS(adam_step<double>({&p}, {T4(Shape4{1, 1, 2, 3})}, st, AdamOptions{}), ShapeError);
  }
}
