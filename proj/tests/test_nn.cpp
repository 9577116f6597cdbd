#include <doctest.h>

#include <cmath>

#include "essc/nn.hpp"
#include "essc/rng.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace essc;
using namespace essc::nn;
using testing::kind_of;

namespace {

double max_gram_error(const std::vector<double>& m, std::size_t rows, std::size_t cols) {
  const bool wide = rows <= cols;
  const std::size_t k = wide ? rows : cols;
  double worst = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      double s = 0;
      if (wide) {
        for (std::size_t j = 0; j < cols; ++j) s += m[a * cols + j] * m[b * cols + j];
      } else {
        for (std::size_t i = 0; i < rows; ++i) s += m[i * cols + a] * m[i * cols + b];
      }
      worst = std::max(worst, std::fabs(s - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("activations") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::fabs(sigmoid(100.0) - 1.0) <= 1e-9);
  CHECK(sigmoid(-1.7) == doctest::Approx(1.0 - sigmoid(1.7)).epsilon(1e-15));
  CHECK(leaky_relu(2.0, 0.1) == 2.0);
  CHECK(leaky_relu(-1.0, 0.1) == -0.1);
  CHECK(leaky_relu(0.0, 0.3) == 0.0);
  CHECK(relu(5.0) == 5.0);
  CHECK(relu(-5.0) == 0.0);
  CHECK(relu(0.0) == 0.0);
  for (double alpha : {0.1, 0.2, 0.3}) {
    for (double x : {0.0, 1e-9, 0.5, 3.0}) CHECK(relu(x) == leaky_relu(x, alpha));
    CHECK(std::fabs(leaky_relu(-1e-12, alpha)) < 1e-12);
  }
  CHECK(Activation::leaky_relu(0.1).derivative(0.0) == 0.1);
  CHECK(Activation::relu().derivative(0.0) == 0.0);
  CHECK(Activation::sigmoid().derivative(0.0) == 0.25);
}

TEST_CASE("orthogonal init") {
  CHECK(orthogonal_init(1, 1, 7) == std::vector<double>{1.0});
  CHECK(max_gram_error(orthogonal_init(4, 4, 3), 4, 4) <= 1e-6);
  CHECK(max_gram_error(orthogonal_init(3, 8, 3), 3, 8) <= 1e-6);
  CHECK(max_gram_error(orthogonal_init(9, 2, 3), 9, 2) <= 1e-6);
  CHECK(orthogonal_init(5, 7, 11) == orthogonal_init(5, 7, 11));
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto r = 1 + rng.uniform_index(64), c = 1 + rng.uniform_index(64);
    CHECK(max_gram_error(orthogonal_init(r, c, i), r, c) <= 1e-6);
  }
}

TEST_CASE("orthogonal regularization") {
  const auto q = orthogonal_init(3, 5, 2);
  const auto pq = orthogonal_regularization(q, 3, 5, 0.7);
  CHECK(std::fabs(pq.penalty) <= 1e-10);
  for (double g : pq.grad) CHECK(std::fabs(g) <= 1e-9);

  const std::vector<double> w = {2.0};
  const auto p = orthogonal_regularization(w, 1, 1, 1.0);
  CHECK(p.penalty == doctest::Approx(9.0));
  CHECK(p.grad[0] == doctest::Approx(24.0));
  CHECK(orthogonal_regularization(w, 1, 1, 0.0).penalty == 0.0);

  // Gradient against finite differences on a random wide and tall matrix.
  Rng rng(4);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{3, 5}, {5, 3}}) {
    std::vector<double> m(r * c);
    for (auto& v : m) v = rng.normal();
    const auto a = orthogonal_regularization(m, r, c, 0.3);
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double fd = oracle::central_diff([&] { return orthogonal_regularization(m, r, c, 0.3).penalty; }, m[j]);
      CHECK(a.grad[j] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("softmax and cross entropy") {
  for (double p : softmax(std::vector<double>(5, 0.0))) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  const auto big = softmax(std::vector<double>{3.0, 1003.0});
  CHECK(big[0] < 1e-300);
  CHECK(big[1] == 1.0);
  const auto s = softmax(std::vector<double>{1.0, 2.0, 3.0});
  const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(static_cast<double>(std::exp(i + 1.0L) / z)).epsilon(1e-14));
  const auto shifted = softmax(std::vector<double>{-4.0, -3.0, -2.0});
  for (int i = 0; i < 3; ++i) CHECK(shifted[i] == doctest::Approx(s[i]).epsilon(1e-14));
  double sum = 0;
  for (double p : s) sum += p;
  CHECK(std::fabs(sum - 1.0) <= 1e-12);

  CHECK(cross_entropy(std::vector<double>{0, 1, 0}, 1) == doctest::Approx(0.0).scale(1));
  CHECK(cross_entropy(std::vector<double>(5, 0.2), 3) == doctest::Approx(std::log(5.0)).epsilon(1e-10));
  CHECK(kind_of([] { cross_entropy(std::vector<double>(5, 0.2), 7); }) == ErrorKind::IndexOutOfRange);
}

TEST_CASE("conv forward examples") {
  ConvLayer id(1, 1, 1, 1, 0, Activation::leaky_relu(0.1));
  id.weight.values = {1.0};
  id.bias.values = {0.0};
  Tensor x({1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(id.infer(x).values == x.values);

  ConvLayer bias_only(1, 2, 3, 1, 1, Activation::leaky_relu(0.1));
  std::fill(bias_only.weight.values.begin(), bias_only.weight.values.end(), 0.3);
  bias_only.bias.values = {0.5, 0.5};
  for (double v : bias_only.infer(Tensor({1, 4, 4})).values) CHECK(v == 0.5);

  ConvLayer ones(1, 1, 2, 1, 0, Activation::identity());
  ones.weight.values = {1, 1, 1, 1};
  ones.bias.values = {0.0};
  const auto y = ones.infer(Tensor({1, 3, 3}, 1.0));
  CHECK(y.shape == std::vector<std::size_t>{1, 2, 2});
  for (double v : y.values) CHECK(v == 4.0);

  // Brute-force direct sum on a random strided, padded case.
  Rng rng(6);
  ConvLayer c(2, 3, 3, 2, 1, Activation::identity());
  for (auto& w : c.weight.values) w = rng.normal();
  for (auto& b : c.bias.values) b = rng.normal();
  Tensor in({2, 5, 6});
  for (auto& v : in.values) v = rng.normal();
  const auto out = c.infer(in);
  REQUIRE(out.shape == std::vector<std::size_t>{3, 3, 3});
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double s = c.bias.values[o];
        for (std::size_t ch = 0; ch < 2; ++ch) {
          for (std::size_t ki = 0; ki < 3; ++ki) {
            for (std::size_t kj = 0; kj < 3; ++kj) {
              const long r = static_cast<long>(2 * i + ki) - 1, q = static_cast<long>(2 * j + kj) - 1;
              if (r < 0 || q < 0 || r >= 5 || q >= 6) continue;
              s += c.weight.values[((o * 2 + ch) * 3 + ki) * 3 + kj] * in.values[(ch * 5 + r) * 6 + q];
            }
          }
        }
        CHECK(out.values[(o * 3 + i) * 3 + j] == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
  CHECK(kind_of([&] { c.infer(Tensor({3, 5, 5})); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("SE block examples") {
  Tensor x({2, 2, 2}, std::vector<double>{1, 2, 3, 4, -1, -2, -3, -4});
  SeBlock open(2, 1, Activation::relu(), GateType::ClampedLeaky, 0.1);
  std::fill(open.fc2.weight.values.begin(), open.fc2.weight.values.end(), 0.0);
  open.fc2.bias.values = {50.0, 50.0};
  CHECK(open.infer(x).values == x.values);
  open.fc2.bias.values = {-50.0, -50.0};
  for (double v : open.infer(x).values) CHECK(v == 0.0);

  // C=2 hand computation on a 2x1x1 input.
  SeBlock se(2, 2, Activation::relu(), GateType::Sigmoid, 0.1);
  REQUIRE(se.fc1.out() == 1);
  se.fc1.weight.values = {0.5, -0.25};
  se.fc1.bias.values = {0.1};
  se.fc2.weight.values = {2.0, -1.0};
  se.fc2.bias.values = {0.0, 0.5};
  const Tensor in({2, 1, 1}, std::vector<double>{2.0, 1.0});
  const double h = std::max(0.0, 0.5 * 2.0 - 0.25 * 1.0 + 0.1);
  const double g0 = 1.0 / (1.0 + std::exp(-(2.0 * h))), g1 = 1.0 / (1.0 + std::exp(-(-1.0 * h + 0.5)));
  const auto out = se.infer(in);
  CHECK(out.values[0] == doctest::Approx(2.0 * g0).epsilon(1e-14));
  CHECK(out.values[1] == doctest::Approx(1.0 * g1).epsilon(1e-14));
}

TEST_CASE("dense backward hand case") {
  DenseLayer d(2, 2, Activation::identity());
  d.weight.values = {1, 2, 3, 4};
  d.bias.values = {0, 0};
  d.weight.zero_grad();
  d.bias.zero_grad();
  d.forward(std::vector<double>{5, 6});
  const auto dx = d.backward(std::vector<double>{1, -1});
  CHECK(d.weight.grad == std::vector<double>{5, 6, -5, -6});
  CHECK(d.bias.grad == std::vector<double>{1, -1});
  CHECK(dx == std::vector<double>{-2, -2});
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Network net(gradcheck::small_network(Activation::leaky_relu(0.1), GateType::ClampedLeaky), 3);
  Tensor x({1, 8, 8}, 0.3);
  net.zero_grad();
  net.forward(x);
  net.backward(std::vector<double>(5, 0.0));
  for (const Tensor* t : net.parameter_tensors()) {
    for (double g : t->grad) CHECK(g == 0.0);
  }
  Network fresh(gradcheck::small_network(Activation::leaky_relu(0.1), GateType::ClampedLeaky), 3);
  CHECK(kind_of([&] { fresh.backward(std::vector<double>(5, 0.0)); }) == ErrorKind::NoForwardCache);
}

TEST_CASE("gradient checks per layer and activation") {
  for (const auto& act : {Activation::sigmoid(), Activation::relu(), Activation::leaky_relu(0.1)}) {
    CAPTURE(act.name());
    CHECK(gradcheck::repeat(10, 100, [&](auto s) { return gradcheck::dense(act, s); }).max_rel < 1e-4);
    CHECK(gradcheck::repeat(10, 200, [&](auto s) { return gradcheck::conv(act, s); }).max_rel < 1e-4);
    for (auto gate : {GateType::Sigmoid, GateType::ClampedLeaky}) {
      CHECK(gradcheck::repeat(10, 300, [&](auto s) { return gradcheck::se(act, gate, s); }).max_rel < 1e-4);
    }
    CHECK(gradcheck::repeat(3, 400, [&](auto s) { return gradcheck::network(act, GateType::ClampedLeaky, s); }).max_rel <
          1e-4);
  }
}

TEST_CASE("network layout and initialization") {
  Network net(NetworkConfig{}, 1);
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    const auto& c = net.conv(i);
    CHECK(c.out_channels() == NetworkConfig{}.channels[i]);
    CHECK(max_gram_error(c.weight.values, c.out_channels(), c.fan_in()) <= 1e-6);
  }
  CHECK(std::fabs(net.orthogonal_penalty(1.0)) <= 1e-10);
  CHECK(net.parameter_count() < 100000);
  const auto p = net.predict(Tensor({1, 16, 16}, 0.1));
  double sum = 0;
  for (double v : p) sum += v;
  CHECK(p.size() == 5);
  CHECK(std::fabs(sum - 1.0) <= 1e-12);
  CHECK(kind_of([&] { net.predict(Tensor({1, 8, 8})); }) == ErrorKind::DimensionMismatch);
}
