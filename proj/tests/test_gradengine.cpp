#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "mmcd/adam.hpp"
#include "mmcd/tape.hpp"
#include "oracles.hpp"

using namespace mmcd;
using namespace mmcd::grad;

namespace {

TensorPtr<double> random_tensor(int n, int h, int w, int c, Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  auto t = make_tensor<double>(n, h, w, c, true);
  for (auto& v : t->v) v = rng.uniform(lo, hi);
  return t;
}

// Checks d(scalar)/d(leaf[i]) against central differences for every element
// of `leaf`. `build` must construct the graph from current leaf values and
// return the scalar output; it runs fresh per evaluation.
void check_gradient(const TensorPtr<double>& leaf,
                    const std::function<TensorPtr<double>(Tape<double>&)>& build,
                    double step = 1e-4, double tol = 1e-5) {
  leaf->g.clear();  // leaf grads accumulate across tapes
  Tape<double> tape;
  auto out = build(tape);
  REQUIRE(out->numel() == 1);
  tape.backward_scalar(out);
  REQUIRE(leaf->g.size() == leaf->numel());
  const std::vector<double> analytic = leaf->g;

  for (size_t i = 0; i < leaf->numel(); ++i) {
    const double saved = leaf->v[i];
    leaf->v[i] = saved + step;
    Tape<double> tp;
    const double fp = build(tp)->v[0];
    leaf->v[i] = saved - step;
    Tape<double> tm;
    const double fm = build(tm)->v[0];
    leaf->v[i] = saved;
    const double fd = (fp - fm) / (2.0 * step);
    CHECK(oracle::rel_err(analytic[i], fd) < tol);
  }
}

}  // namespace

TEST_CASE("conv2d zero input with zero bias gives zero output") {
  Rng rng(0);
  auto layer = make_conv_layer<double>(2, 3, Activation::None, rng);
  Tape<double> tape;
  auto x = make_tensor<double>(1, 4, 4, 2, true);
  auto y = conv2d(tape, x, layer);
  for (double v : y->v) CHECK(v == 0.0);
}

TEST_CASE("conv2d all-ones box kernel matches the padded counts") {
  Rng rng(0);
  ConvLayer<double> layer;
  layer.kernel = make_tensor<double>(3, 3, 1, 1, true);
  layer.bias = make_tensor<double>(1, 1, 1, 1, true);
  layer.act = Activation::None;
  std::fill(layer.kernel->v.begin(), layer.kernel->v.end(), 1.0);
  Tape<double> tape;
  auto x = make_tensor<double>(1, 3, 3, 1, true);
  std::fill(x->v.begin(), x->v.end(), 1.0);
  auto y = conv2d(tape, x, layer);
  CHECK(y->at(0, 1, 1, 0) == 9.0);
  CHECK(y->at(0, 0, 0, 0) == 4.0);
  CHECK(y->at(0, 0, 1, 0) == 6.0);
  CHECK(y->at(0, 2, 2, 0) == 4.0);
}

TEST_CASE("conv2d delta kernel is the identity") {
  ConvLayer<double> layer;
  layer.kernel = make_tensor<double>(3, 3, 1, 1, true);
  layer.bias = make_tensor<double>(1, 1, 1, 1, true);
  layer.act = Activation::None;
  layer.kernel->at(1, 1, 0, 0) = 1.0;
  Rng rng(5);
  Tape<double> tape;
  auto x = random_tensor(1, 5, 6, 1, rng);
  auto y = conv2d(tape, x, layer);
  for (size_t i = 0; i < x->numel(); ++i) CHECK(y->v[i] == doctest::Approx(x->v[i]));
}

TEST_CASE("conv2d matches the direct oracle on random tensors") {
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const int h = 2 + rng.uniform_int(0, 4), w = 2 + rng.uniform_int(0, 4);
    const int cin = 1 + rng.uniform_int(0, 2), cout = 1 + rng.uniform_int(0, 3);
    auto layer = make_conv_layer<double>(cin, cout, Activation::None, rng);
    for (auto& b : layer.bias->v) b = rng.uniform(-0.5, 0.5);
    Tape<double> tape;
    auto x = random_tensor(1, h, w, cin, rng);
    auto y = conv2d(tape, x, layer);
    const auto want = oracle::conv3x3(x->v, h, w, cin, layer.kernel->v, layer.bias->v, cout);
    for (size_t i = 0; i < want.size(); ++i) CHECK(y->v[i] == doctest::Approx(want[i]).epsilon(1e-10));
  }
}

TEST_CASE("conv2d preserves spatial shape") {
  Rng rng(2);
  for (int h : {1, 2, 7})
    for (int w : {1, 3, 5}) {
      auto layer = make_conv_layer<double>(2, 4, Activation::LeakyRelu, rng);
      Tape<double> tape;
      auto x = random_tensor(1, h, w, 2, rng);
      auto y = conv2d(tape, x, layer);
      CHECK(y->h == h);
      CHECK(y->w == w);
      CHECK(y->c == 4);
    }
}

TEST_CASE("backward on a linear map reproduces the input pattern") {
  // L = sum(W (*) x) with a single-output conv; dL/dW[center] = sum(x).
  Rng rng(3);
  ConvLayer<double> layer;
  layer.kernel = make_tensor<double>(3, 3, 1, 1, true);
  layer.bias = make_tensor<double>(1, 1, 1, 1, true);
  layer.act = Activation::None;
  layer.kernel->at(1, 1, 0, 0) = 1.0;

  Tape<double> tape;
  auto x = random_tensor(1, 4, 4, 1, rng);
  auto y = conv2d(tape, x, layer);
  y->ensure_grad();
  std::fill(y->g.begin(), y->g.end(), 1.0);
  tape.backward(y);
  double sum = 0.0;
  for (double v : x->v) sum += v;
  CHECK(layer.kernel->g[4] == doctest::Approx(sum));

  SUBCASE("a second backward call doubles the accumulated gradient") {
    tape.backward(y);
    CHECK(layer.kernel->g[4] == doctest::Approx(2.0 * sum));
  }
}

TEST_CASE("backward before forward is an error") {
  Tape<double> tape;
  auto t = make_tensor<double>(1, 1, 1, 1, true);
  t->ensure_grad();
  CHECK_THROWS_AS(tape.backward(t), std::logic_error);
}

TEST_CASE("finite differences validate every op") {
  Rng rng(1234);

  SUBCASE("conv2d w.r.t. input, kernel and bias") {
    auto layer = make_conv_layer<double>(2, 3, Activation::None, rng);
    auto x = random_tensor(2, 4, 5, 2, rng);
    auto build = [&](Tape<double>& t) {
      auto y = conv2d(t, x, layer);
      return weighted_sq_distance<double>(t, y, make_tensor<double>(y->n, y->h, y->w, y->c, true), {});
    };
    check_gradient(x, build);
    check_gradient(layer.kernel, build);
    check_gradient(layer.bias, build);
  }

  SUBCASE("leaky_relu") {
    auto x = random_tensor(1, 3, 3, 2, rng);
    auto build = [&](Tape<double>& t) {
      auto y = leaky_relu(t, x, 0.3);
      return weighted_sq_distance<double>(t, y, make_tensor<double>(1, 3, 3, 2, true), {});
    };
    check_gradient(x, build);
  }

  SUBCASE("tanh_act") {
    auto x = random_tensor(1, 3, 3, 2, rng);
    auto build = [&](Tape<double>& t) {
      auto y = tanh_act(t, x);
      return weighted_sq_distance<double>(t, y, make_tensor<double>(1, 3, 3, 2, true), {});
    };
    check_gradient(x, build);
  }

  SUBCASE("dropout with a frozen mask") {
    auto x = random_tensor(1, 4, 4, 3, rng);
    auto build = [&](Tape<double>& t) {
      Rng fixed(77);
      auto y = dropout(t, x, 0.25, true, fixed);
      return weighted_sq_distance<double>(t, y, make_tensor<double>(1, 4, 4, 3, true), {});
    };
    check_gradient(x, build);
  }

  SUBCASE("crop_center") {
    auto x = random_tensor(1, 6, 6, 2, rng);
    auto build = [&](Tape<double>& t) {
      auto y = crop_center(t, x, 2, 2);
      return weighted_sq_distance<double>(t, y, make_tensor<double>(1, 2, 2, 2, true), {});
    };
    check_gradient(x, build);
  }

  SUBCASE("weighted_sq_distance w.r.t. both sides") {
    auto a = random_tensor(2, 3, 3, 2, rng);
    auto b = random_tensor(2, 3, 3, 2, rng);
    std::vector<double> pi(2 * 9);
    for (auto& v : pi) v = rng.uniform(0.0, 1.0);
    auto build = [&](Tape<double>& t) { return weighted_sq_distance(t, a, b, pi); };
    check_gradient(a, build);
    check_gradient(b, build);
  }

  SUBCASE("code_correlation") {
    auto zx = random_tensor(1, 2, 3, 3, rng);
    auto zy = random_tensor(1, 2, 3, 3, rng);
    auto s = make_tensor<double>(1, 6, 6, 1, true);
    for (auto& v : s->v) v = rng.uniform(0.0, 1.0);
    auto build = [&](Tape<double>& t) {
      auto r = code_correlation(t, zx, zy);
      return weighted_sq_distance<double>(t, r, s, {});
    };
    check_gradient(zx, build);
    check_gradient(zy, build);
  }
}

TEST_CASE("leaky_relu values and gradient slopes") {
  Rng rng(0);
  Tape<double> tape;
  auto x = make_tensor<double>(1, 1, 3, 1, true);
  x->v = {2.0, -1.0, 0.0};
  auto y = leaky_relu(tape, x, 0.3);
  CHECK(y->v[0] == 2.0);
  CHECK(y->v[1] == doctest::Approx(-0.3));
  CHECK(y->v[2] == 0.0);
  y->ensure_grad();
  std::fill(y->g.begin(), y->g.end(), 1.0);
  tape.backward(y);
  CHECK(x->g[0] == 1.0);
  CHECK(x->g[1] == doctest::Approx(0.3));
  CHECK(x->g[2] == 1.0);
}

TEST_CASE("tanh_act values and gradient") {
  Tape<double> tape;
  auto x = make_tensor<double>(1, 1, 3, 1, true);
  x->v = {0.0, 20.0, 1.0};
  auto y = tanh_act(tape, x);
  CHECK(y->v[0] == 0.0);
  CHECK(y->v[1] == doctest::Approx(1.0));
  CHECK(y->v[2] == doctest::Approx(0.7615941559557649));
  y->ensure_grad();
  std::fill(y->g.begin(), y->g.end(), 1.0);
  tape.backward(y);
  CHECK(x->g[0] == doctest::Approx(1.0));
}

TEST_CASE("dropout modes") {
  Rng rng(3);
  auto x = make_tensor<float>(1, 100, 100, 1, true);
  std::fill(x->v.begin(), x->v.end(), 1.0f);

  SUBCASE("inference is the identity") {
    Tape<float> tape;
    auto y = dropout(tape, x, 0.2f, false, rng);
    CHECK(y->v == x->v);
  }
  SUBCASE("rate zero is the identity even in training") {
    Tape<float> tape;
    auto y = dropout(tape, x, 0.0f, true, rng);
    CHECK(y->v == x->v);
  }
  SUBCASE("rate >= 1 is rejected") {
    Tape<float> tape;
    CHECK_THROWS_AS(dropout(tape, x, 1.0f, true, rng), std::invalid_argument);
  }
  SUBCASE("inverted scaling preserves the expectation") {
    auto big = make_tensor<float>(1, 1000, 1000, 1, true);
    std::fill(big->v.begin(), big->v.end(), 1.0f);
    Tape<float> tape;
    auto y = dropout(tape, big, 0.2f, true, rng);
    double mean = 0.0;
    for (float v : y->v) mean += v;
    mean /= y->numel();
    CHECK(mean > 0.99);
    CHECK(mean < 1.01);
  }
}

TEST_CASE("adam_step behavior") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = make_tensor<float>(1, 1, 2, 2, true);
    p->v = {1, 2, 3, 4};
    const auto before = p->v;
    AdamState<float> st;
    adam_step<float>({p}, {std::vector<float>(4, 0.0f)}, st, 0.1f);
    CHECK(p->v == before);
  }
  SUBCASE("first step moves by about lr in the gradient direction") {
    auto p = make_tensor<float>(1, 1, 1, 1, true);
    p->v = {1.0f};
    AdamState<float> st;
    adam_step<float>({p}, {{0.5f}}, st, 0.1f);
    CHECK(p->v[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-3));
    CHECK(st.t == 1);
  }
  SUBCASE("minimizing theta^2 converges") {
    auto p = make_tensor<double>(1, 1, 1, 1, true);
    p->v = {1.0};
    AdamState<double> st;
    for (int i = 0; i < 200; ++i) adam_step<double>({p}, {{2.0 * p->v[0]}}, st, 0.1);
    CHECK(std::abs(p->v[0]) < 0.05);
  }
  SUBCASE("non-finite gradient aborts the step") {
    auto p = make_tensor<float>(1, 1, 1, 1, true);
    p->v = {1.0f};
    AdamState<float> st;
    CHECK_THROWS_WITH_AS(
        adam_step<float>({p}, {{std::numeric_limits<float>::quiet_NaN()}}, st, 0.1f),
        doctest::Contains("non-finite"), std::runtime_error);
    CHECK(p->v[0] == 1.0f);
  }
  SUBCASE("amsgrad flag keeps the max second moment") {
    auto p = make_tensor<double>(1, 1, 1, 1, true);
    p->v = {1.0};
    AdamState<double> st;
    st.amsgrad = true;
    adam_step<double>({p}, {{4.0}}, st, 0.01);
    adam_step<double>({p}, {{0.1}}, st, 0.01);
    CHECK(st.vmax[0][0] >= st.v[0][0]);
  }
}

TEST_CASE("schedule_rate staircase") {
  const LrSchedule main{1e-4, 0.96, 1};
  CHECK(schedule_rate(main, 0) == doctest::Approx(1e-4));
  CHECK(schedule_rate(main, 2) == doctest::Approx(1e-4 * 0.9216));
  const LrSchedule code{1e-4, 0.9, 1};
  CHECK(schedule_rate(code, 1) == doctest::Approx(9e-5));
  const LrSchedule stepped{1e-3, 0.5, 10};
  CHECK(schedule_rate(stepped, 9) == doctest::Approx(1e-3));
  CHECK(schedule_rate(stepped, 10) == doctest::Approx(5e-4));
}
