#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stabnet/gradcheck.hpp"

using namespace stabnet;

TEST_CASE("finite_diff on closed forms") {
  SUBCASE("quadratic derivative") {
    double theta = 3.0;
    auto loss = [&]() { return theta * theta; };
    std::vector<double*> slots{&theta};
    double fd = finite_diff(loss, slots, 1e-5);
    CHECK(fd == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(theta == 3.0);  // restored exactly
  }
  SUBCASE("constant loss differentiates to zero") {
    double theta = 1.7;
    auto loss = [&]() { return 42.0; };
    std::vector<double*> slots{&theta};
    CHECK(finite_diff(loss, slots, 1e-5) == 0.0);
  }
  SUBCASE("tied slots move together") {
    // L = a*b with a and b tied to one shared value s: dL/ds = 2s
    double a = 2.0, b = 2.0;
    auto loss = [&]() { return a * b; };
    std::vector<double*> slots{&a, &b};
    CHECK(finite_diff(loss, slots, 1e-5) == doctest::Approx(4.0).epsilon(1e-8));
  }
  SUBCASE("non-finite probe loss throws") {
    double theta = 0.0;
    auto loss = [&]() { return std::numeric_limits<double>::quiet_NaN(); };
    std::vector<double*> slots{&theta};
    CHECK_THROWS_AS(finite_diff(loss, slots, 1e-5), std::runtime_error);
  }
}

TEST_CASE("relative_error guards tiny denominators") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(relative_error(0.0, 0.0) == 0.0);
  // absolute noise below the floor never explodes the ratio
  CHECK(relative_error(0.0, 1e-12) < 1e-3);
}

TEST_CASE("affine layer agrees with finite differences") {
  AffineLayer layer = make_affine(3, 2, Activation::Sigmoid, StabilizerMode::Independent);
  Rng rng(101);
  layer.w = uniform_init(2, 3, 0.5, rng);
  layer.b = Vector{0.2, -0.1};
  layer.beta = 0.3;
  Vector x{0.7, -0.5, 0.9};
  Vector u{1.0, -0.8};
  GradReport rep = check_affine_model(layer, x, u, kGradcheckEpsilon, 1e-6);
  INFO("worst ", rep.worst, " rel ", rep.max_rel_err);
  CHECK(rep.pass);
  // W (6) + b (2) + beta (1) + input (3)
  CHECK(rep.n_checked == 12);
}

TEST_CASE("lstm cell agrees with finite differences") {
  LstmCell cell = make_lstm(3, 4, StabilizerMode::Independent);
  Rng rng(202);
  for (auto& w : cell.w) w = uniform_init(w.rows, w.cols, 0.5, rng);
  for (Vector* b : {&cell.b_i, &cell.b_f, &cell.b_c, &cell.b_o}) {
    for (int i = 0; i < b->dim(); ++i) (*b)[i] = rng.uniform(-0.3, 0.3);
  }
  for (double& bt : cell.beta) bt = rng.uniform(-0.4, 0.4);

  std::vector<Vector> xs, us;
  for (int t = 0; t < 5; ++t) {
    Vector x(3), u(4);
    for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 4; ++i) u[i] = rng.uniform(-1.0, 1.0);
    xs.push_back(x);
    us.push_back(u);
  }
  GradReport rep = check_lstm_model(cell, xs, us, kGradcheckEpsilon, kLstmTolerance);
  INFO("worst ", rep.worst, " rel ", rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("three-layer sigmoid network agrees at 1e-5") {
  Network net;
  Rng rng(303);
  net.stages.emplace_back(make_affine(4, 5, Activation::Sigmoid, StabilizerMode::Independent));
  net.stages.emplace_back(make_affine(5, 5, Activation::Sigmoid, StabilizerMode::Independent));
  net.stages.emplace_back(make_affine(5, 3, Activation::Linear, StabilizerMode::Independent));
  init_uniform(net, 0.5, rng);
  for (auto& stage : net.stages) {
    std::get<AffineLayer>(stage).beta = rng.uniform(-0.4, 0.4);
  }
  std::vector<Vector> xs;
  std::vector<int> labels;
  for (int t = 0; t < 3; ++t) {
    Vector x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-1.0, 1.0);
    xs.push_back(x);
    labels.push_back(t % 3);
  }
  GradReport rep = check_network_model(net, xs, labels, kGradcheckEpsilon, kAffineTolerance);
  INFO("worst ", rep.worst, " rel ", rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("a corrupted beta gradient is caught and named") {
  AffineLayer layer = make_affine(2, 2, Activation::Linear, StabilizerMode::Independent);
  layer.w.a = {1, 2, 3, 4};
  layer.beta = 0.3;
  Vector x{1, -1};
  Vector u{1, 1};

  AffineForward f = affine_forward(layer, x);
  AffineBackward back = affine_backward(layer, x, f.pre, u);
  std::vector<ParamRef> entries = enumerate_params(layer, back.grads, "layer.");

  // sabotage: flip the sign of the analytic beta gradient
  bool flipped = false;
  for (ParamRef& e : entries) {
    if (e.name.find("beta") != std::string::npos) {
      e.analytic = -e.analytic;
      flipped = true;
    }
  }
  REQUIRE(flipped);

  auto loss = [&]() { return inner(u, affine_forward(layer, x).y); };
  GradReport rep = compare_grads(loss, entries, kGradcheckEpsilon, 1e-5);
  CHECK_FALSE(rep.pass);
  CHECK(rep.worst.find("beta") != std::string::npos);
}

TEST_CASE("random drivers cover all modes") {
  // spot checks; the acceptance suite runs the full battery
  for (StabilizerMode mode : {StabilizerMode::None, StabilizerMode::LayerShared,
                              StabilizerMode::GateShared, StabilizerMode::Independent}) {
    GradReport a = check_affine_random(11, mode, Activation::Tanh, kGradcheckEpsilon,
                                       kAffineTolerance);
    INFO("affine mode ", to_string(mode), " worst ", a.worst, " rel ", a.max_rel_err);
    CHECK(a.pass);
    GradReport l = check_lstm_random(12, mode, kGradcheckEpsilon, kLstmTolerance);
    INFO("lstm mode ", to_string(mode), " worst ", l.worst, " rel ", l.max_rel_err);
    CHECK(l.pass);
  }
}

TEST_CASE("shared betas are checked as one tied parameter") {
  LstmCell cell = make_lstm(2, 3, StabilizerMode::LayerShared);
  Rng rng(404);
  for (auto& w : cell.w) w = uniform_init(w.rows, w.cols, 0.5, rng);
  LstmGrads grads = zero_grads(cell);
  std::vector<ParamRef> entries = enumerate_params(cell, grads, "cell.");
  int beta_entries = 0;
  for (const ParamRef& e : entries) {
    if (e.name.find("beta") != std::string::npos) {
      ++beta_entries;
      CHECK(e.slots.size() == 11);  // all eleven move together
    }
  }
  CHECK(beta_entries == 1);

  LstmCell indep = make_lstm(2, 3, StabilizerMode::Independent);
  LstmGrads g2 = zero_grads(indep);
  std::vector<ParamRef> e2 = enumerate_params(indep, g2, "cell.");
  int indep_betas = 0;
  for (const ParamRef& e : e2) {
    if (e.name.find("beta") != std::string::npos) ++indep_betas;
  }
  CHECK(indep_betas == 11);
}
