#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stabnet/layers.hpp"

using namespace stabnet;

TEST_CASE("activation values") {
  Vector zero{0.0};
  CHECK(activation_apply(Activation::Sigmoid, zero)[0] == 0.5);
  CHECK(activation_apply(Activation::Sigmoid, Vector{1.0})[0] ==
        doctest::Approx(0.731059).epsilon(1e-5));
  CHECK(activation_apply(Activation::Relu, Vector{-1.0})[0] == 0.0);
  CHECK(activation_apply(Activation::Relu, Vector{2.0})[0] == 2.0);
  CHECK(activation_apply(Activation::Tanh, Vector{0.3})[0] == std::tanh(0.3));
  CHECK(activation_apply(Activation::Linear, Vector{-7.5})[0] == -7.5);
}

TEST_CASE("activation derivatives") {
  // sigmoid'(0) = 0.25, tanh'(0) = 1, relu' is a step
  CHECK(activation_deriv(Activation::Sigmoid, Vector{0.0})[0] == 0.25);
  CHECK(activation_deriv(Activation::Tanh, Vector{0.0})[0] == 1.0);
  CHECK(activation_deriv(Activation::Relu, Vector{-1.0})[0] == 0.0);
  CHECK(activation_deriv(Activation::Relu, Vector{2.0})[0] == 1.0);
  CHECK(activation_deriv(Activation::Linear, Vector{123.0})[0] == 1.0);
}

TEST_CASE("activation and mode names round-trip") {
  for (Activation a :
       {Activation::Sigmoid, Activation::Relu, Activation::Tanh, Activation::Linear}) {
    CHECK(activation_from_string(to_string(a)) == a);
  }
  for (StabilizerMode m : {StabilizerMode::None, StabilizerMode::LayerShared,
                           StabilizerMode::GateShared, StabilizerMode::Independent}) {
    CHECK(stabilizer_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(activation_from_string("softplus"), std::invalid_argument);
  CHECK_THROWS_AS(stabilizer_from_string("per-gate"), std::invalid_argument);
}

TEST_CASE("softmax cross-entropy") {
  SUBCASE("uniform logits, K=4") {
    Vector logits{0, 0, 0, 0};
    SoftmaxXent r = softmax_xent(logits, 2);
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    for (int k = 0; k < 4; ++k) {
      double expect = 0.25 - (k == 2 ? 1.0 : 0.0);
      CHECK(r.dlogits[k] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  SUBCASE("dominating entry at the label saturates to zero loss") {
    Vector logits{1000.0, 0.0, 0.0};
    SoftmaxXent r = softmax_xent(logits, 0);
    CHECK(r.loss >= 0.0);
    CHECK(r.loss < 1e-12);
  }
  SUBCASE("hand value for (1,2,3) label 2") {
    SoftmaxXent r = softmax_xent(Vector{1, 2, 3}, 2);
    CHECK(r.loss == doctest::Approx(0.40761).epsilon(1e-4));
  }
  SUBCASE("huge logits stay finite") {
    SoftmaxXent r = softmax_xent(Vector{1e4, -1e4, 0.0}, 1);
    CHECK(std::isfinite(r.loss));
    for (int k = 0; k < 3; ++k) CHECK(std::isfinite(r.dlogits[k]));
  }
  SUBCASE("label out of range throws") {
    CHECK_THROWS_AS(softmax_xent(Vector{0, 0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(softmax_xent(Vector{0, 0}, -1), std::invalid_argument);
  }
}

namespace {

AffineLayer identity_layer(int n, Activation act, StabilizerMode mode) {
  AffineLayer layer = make_affine(n, n, act, mode);
  for (int i = 0; i < n; ++i) layer.w.at(i, i) = 1.0;
  return layer;
}

}  // namespace

TEST_CASE("affine forward") {
  SUBCASE("identity weights, beta 0") {
    AffineLayer layer = identity_layer(2, Activation::Linear, StabilizerMode::Independent);
    AffineForward f = affine_forward(layer, Vector{3, 4});
    CHECK(f.y == Vector{3, 4});
    CHECK(f.pre == Vector{3, 4});
  }
  SUBCASE("beta ln 2 doubles the transform") {
    AffineLayer layer = identity_layer(2, Activation::Linear, StabilizerMode::Independent);
    layer.beta = std::log(2.0);
    AffineForward f = affine_forward(layer, Vector{3, 4});
    CHECK(f.y[0] == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(f.y[1] == doctest::Approx(8.0).epsilon(1e-14));
  }
  SUBCASE("hand value with bias") {
    AffineLayer layer = make_affine(2, 2, Activation::Linear, StabilizerMode::Independent);
    layer.w.a = {1, 2, 3, 4};
    layer.b = Vector{1, 1};
    layer.beta = 0.5;
    AffineForward f = affine_forward(layer, Vector{1, 1});
    double s = std::exp(0.5);
    CHECK(f.y[0] == s * 3.0 + 1.0);
    CHECK(f.y[1] == s * 7.0 + 1.0);
  }
  SUBCASE("scaling the weights equals moving beta") {
    AffineLayer a = make_affine(2, 3, Activation::Sigmoid, StabilizerMode::Independent);
    Rng rng(5);
    a.w = uniform_init(3, 2, 0.5, rng);
    a.b = Vector{0.1, -0.2, 0.3};
    a.beta = std::log(2.0);
    AffineLayer b = a;
    b.beta = 0.0;
    b.w = scale(std::exp(std::log(2.0)), b.w);
    AffineForward fa = affine_forward(a, Vector{0.4, -0.7});
    AffineForward fb = affine_forward(b, Vector{0.4, -0.7});
    for (int i = 0; i < 3; ++i) CHECK(fa.y[i] == doctest::Approx(fb.y[i]).epsilon(1e-14));
  }
  SUBCASE("wrong input size throws") {
    AffineLayer layer = make_affine(2, 2, Activation::Linear, StabilizerMode::None);
    CHECK_THROWS_AS(affine_forward(layer, Vector{1, 2, 3}), std::invalid_argument);
  }
}

TEST_CASE("affine backward") {
  SUBCASE("beta 0 identity reduces to plain affine") {
    AffineLayer layer = identity_layer(2, Activation::Linear, StabilizerMode::Independent);
    Vector x{3, 4};
    AffineForward f = affine_forward(layer, x);
    Vector g{0.5, -1.25};
    AffineBackward b = affine_backward(layer, x, f.pre, g);
    CHECK(b.dx == g);
    CHECK(b.grads.db == g);
  }
  SUBCASE("hand value, beta 0.3") {
    AffineLayer layer = make_affine(2, 2, Activation::Linear, StabilizerMode::Independent);
    layer.w.a = {1, 2, 3, 4};
    layer.beta = 0.3;
    Vector x{1, -1};
    AffineForward f = affine_forward(layer, x);
    AffineBackward b = affine_backward(layer, x, f.pre, Vector{1, 1});
    double s = std::exp(0.3);
    // W^T (1,1) = (4, 6); dbeta = inner(dx, x) = s*(4 - 6)
    CHECK(b.dx[0] == doctest::Approx(s * 4.0).epsilon(1e-14));
    CHECK(b.dx[1] == doctest::Approx(s * 6.0).epsilon(1e-14));
    CHECK(b.grads.dbeta == doctest::Approx(-2.0 * s).epsilon(1e-14));
    // dW = s * g x^T
    CHECK(b.grads.dw.at(0, 0) == doctest::Approx(s).epsilon(1e-14));
    CHECK(b.grads.dw.at(0, 1) == doctest::Approx(-s).epsilon(1e-14));
    CHECK(b.grads.db == Vector{1, 1});
  }
  SUBCASE("zero upstream kills every gradient") {
    AffineLayer layer = make_affine(3, 2, Activation::Sigmoid, StabilizerMode::Independent);
    Rng rng(8);
    layer.w = uniform_init(2, 3, 0.5, rng);
    layer.beta = 0.4;
    Vector x{1, 2, 3};
    AffineForward f = affine_forward(layer, x);
    AffineBackward b = affine_backward(layer, x, f.pre, Vector{0, 0});
    CHECK(b.dx == Vector{0, 0, 0});
    CHECK(b.grads.dbeta == 0.0);
    for (double v : b.grads.dw.a) CHECK(v == 0.0);
    CHECK(b.grads.db == Vector{0, 0});
  }
  SUBCASE("mode None pins beta and reports zero dbeta") {
    AffineLayer layer = make_affine(2, 2, Activation::Linear, StabilizerMode::None);
    layer.w.a = {1, 2, 3, 4};
    Vector x{1, -1};
    AffineForward f = affine_forward(layer, x);
    AffineBackward b = affine_backward(layer, x, f.pre, Vector{1, 1});
    CHECK(layer.beta == 0.0);
    CHECK(b.grads.dbeta == 0.0);
    // the data-path gradients are unaffected
    CHECK(b.dx == Vector{4, 6});
  }
  SUBCASE("upstream gradient errors") {
    AffineLayer layer = make_affine(2, 2, Activation::Linear, StabilizerMode::None);
    Vector x{1, 1};
    AffineForward f = affine_forward(layer, x);
    CHECK_THROWS_AS(affine_backward(layer, x, f.pre, Vector{1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(affine_backward(layer, x, f.pre, Vector{1.0, std::nan("")}),
                    std::invalid_argument);
  }
}

TEST_CASE("network composition basics") {
  SUBCASE("one linear stage equals affine_forward") {
    Network net;
    AffineLayer layer = make_affine(2, 3, Activation::Linear, StabilizerMode::Independent);
    Rng rng(4);
    layer.w = uniform_init(3, 2, 0.5, rng);
    layer.b = Vector{0.1, 0.2, 0.3};
    layer.beta = 0.25;
    net.stages.emplace_back(layer);

    Vector x{0.5, -0.5};
    std::vector<int> labels{1};
    SeqForward fwd = network_forward(net, {x}, labels);
    AffineForward direct = affine_forward(layer, x);
    CHECK(fwd.logits[0] == direct.y);
    CHECK(fwd.loss_sum == softmax_xent(direct.y, 1).loss);
  }
  SUBCASE("zero-weight classifier scores ln K") {
    Network net;
    net.stages.emplace_back(make_affine(5, 3, Activation::Linear, StabilizerMode::None));
    SeqForward fwd = network_forward(net, {Vector{1, 2, 3, 4, 5}}, {0});
    CHECK(fwd.loss_sum == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("label count must match frame count") {
    Network net;
    net.stages.emplace_back(make_affine(2, 2, Activation::Linear, StabilizerMode::None));
    CHECK_THROWS_AS(network_forward(net, {Vector{1, 2}}, {0, 1}), std::invalid_argument);
  }
}
