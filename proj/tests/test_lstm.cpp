#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stabnet/gradcheck.hpp"
#include "stabnet/layers.hpp"

using namespace stabnet;

namespace {

LstmCell random_cell(int input_dim, int hidden_dim, StabilizerMode mode, uint64_t seed) {
  LstmCell cell = make_lstm(input_dim, hidden_dim, mode);
  Rng rng(seed);
  for (auto& w : cell.w) w = uniform_init(w.rows, w.cols, 0.5, rng);
  for (Vector* b : {&cell.b_i, &cell.b_f, &cell.b_c, &cell.b_o}) {
    for (int i = 0; i < b->dim(); ++i) (*b)[i] = rng.uniform(-0.3, 0.3);
  }
  return cell;
}

}  // namespace

TEST_CASE("lstm step closed forms") {
  SUBCASE("all parameters zero") {
    LstmCell cell = make_lstm(3, 2, StabilizerMode::Independent);
    LstmStep s = lstm_step(cell, Vector{1, -2, 3}, Vector{0, 0}, Vector{0, 0});
    // every gate pre-activation is 0, so i = f = o = 0.5 and the
    // candidate is tanh(0) = 0; the cell and output stay at 0
    CHECK(s.cache.i == Vector{0.5, 0.5});
    CHECK(s.cache.f == Vector{0.5, 0.5});
    CHECK(s.cache.o == Vector{0.5, 0.5});
    CHECK(s.c == Vector{0, 0});
    CHECK(s.h == Vector{0, 0});
  }
  SUBCASE("zero weights, carried cell state") {
    LstmCell cell = make_lstm(2, 2, StabilizerMode::Independent);
    Vector c_prev{0.8, -1.2};
    LstmStep s = lstm_step(cell, Vector{1, 1}, Vector{0, 0}, c_prev);
    for (int j = 0; j < 2; ++j) {
      CHECK(s.c[j] == doctest::Approx(0.5 * c_prev[j]).epsilon(1e-15));
      CHECK(s.h[j] == doctest::Approx(0.5 * std::tanh(0.5 * c_prev[j])).epsilon(1e-15));
    }
  }
  SUBCASE("independent with zero betas matches mode None bitwise") {
    LstmCell a = random_cell(3, 4, StabilizerMode::Independent, 21);
    LstmCell b = a;
    b.mode = StabilizerMode::None;
    Vector x{0.3, -0.6, 0.9}, h0(4), c0(4);
    LstmStep sa = lstm_step(a, x, h0, c0);
    LstmStep sb = lstm_step(b, x, h0, c0);
    CHECK(sa.h == sb.h);
    CHECK(sa.c == sb.c);
  }
  SUBCASE("dimension mismatches throw") {
    LstmCell cell = make_lstm(3, 2, StabilizerMode::None);
    CHECK_THROWS_AS(lstm_step(cell, Vector{1, 2}, Vector{0, 0}, Vector{0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(lstm_step(cell, Vector{1, 2, 3}, Vector{0}, Vector{0, 0}),
                    std::invalid_argument);
  }
}

TEST_CASE("lstm backward") {
  SUBCASE("zero upstream means zero gradients") {
    LstmCell cell = random_cell(2, 3, StabilizerMode::Independent, 5);
    Vector h(3), c(3);
    std::vector<LstmStepCache> caches;
    for (int t = 0; t < 4; ++t) {
      LstmStep s = lstm_step(cell, Vector{0.1 * (t + 1), -0.2}, h, c);
      h = s.h;
      c = s.c;
      caches.push_back(s.cache);
    }
    std::vector<Vector> dldh(4, Vector(3));
    LstmBackward back = lstm_backward(cell, caches, dldh);
    for (const auto& m : back.grads.dw) {
      for (double v : m.a) CHECK(v == 0.0);
    }
    for (double v : back.grads.dbeta) CHECK(v == 0.0);
    for (const Vector& dx : back.dx) CHECK(dx == Vector{0, 0});
  }
  SUBCASE("single step, hidden 1: every gradient matches finite differences") {
    LstmCell cell = random_cell(2, 1, StabilizerMode::Independent, 33);
    std::vector<Vector> xs{Vector{0.7, -0.4}};
    std::vector<Vector> us{Vector{1.0}};
    GradReport rep = check_lstm_model(cell, xs, us, kGradcheckEpsilon, kLstmTolerance);
    INFO(rep.worst, " rel err ", rep.max_rel_err);
    CHECK(rep.pass);
  }
  SUBCASE("layer-shared dbeta is the sum of the independent dbetas") {
    LstmCell indep = random_cell(2, 3, StabilizerMode::Independent, 77);
    LstmCell shared = indep;
    shared.mode = StabilizerMode::LayerShared;

    std::vector<Vector> xs{Vector{0.5, -0.2}, Vector{-0.1, 0.8}};
    auto run = [&](const LstmCell& cell) {
      Vector h(3), c(3);
      std::vector<LstmStepCache> caches;
      for (const Vector& x : xs) {
        LstmStep s = lstm_step(cell, x, h, c);
        h = s.h;
        c = s.c;
        caches.push_back(s.cache);
      }
      std::vector<Vector> dldh(xs.size(), Vector{1.0, -1.0, 0.5});
      return lstm_backward(cell, caches, dldh);
    };

    LstmBackward bi = run(indep);
    LstmBackward bs = run(shared);
    double total = 0.0;
    for (double v : bi.grads.dbeta) total += v;
    for (int b = 0; b < kLstmBranchCount; ++b) {
      CHECK(bs.grads.dbeta[b] == doctest::Approx(total).epsilon(1e-12));
    }
    // the data-path gradients agree bitwise; sharing only changes the
    // beta bookkeeping
    for (int b = 0; b < kLstmBranchCount; ++b) CHECK(bi.grads.dw[b] == bs.grads.dw[b]);
  }
  SUBCASE("cache and upstream length must agree") {
    LstmCell cell = make_lstm(2, 2, StabilizerMode::None);
    LstmStep s = lstm_step(cell, Vector{1, 2}, Vector{0, 0}, Vector{0, 0});
    std::vector<LstmStepCache> caches{s.cache};
    std::vector<Vector> dldh(2, Vector{0, 0});
    CHECK_THROWS_AS(lstm_backward(cell, caches, dldh), std::invalid_argument);
  }
}

TEST_CASE("beta sharing modes") {
  SUBCASE("group structure") {
    CHECK(beta_groups(StabilizerMode::None).empty());
    CHECK(beta_groups(StabilizerMode::LayerShared).size() == 1);
    CHECK(beta_groups(StabilizerMode::LayerShared)[0].size() == 11);
    auto gate = beta_groups(StabilizerMode::GateShared);
    CHECK(gate.size() == 4);
    size_t members = 0;
    for (const auto& g : gate) members += g.size();
    CHECK(members == 11);
    CHECK(beta_groups(StabilizerMode::Independent).size() == 11);
  }
  SUBCASE("gate-shared reduction sums within each gate") {
    std::array<double, kLstmBranchCount> d{};
    for (int b = 0; b < kLstmBranchCount; ++b) d[b] = 1.0;
    reduce_beta_grads(StabilizerMode::GateShared, d);
    // input gate group {xi, hi, ci} has three members
    CHECK(d[kXi] == 3.0);
    CHECK(d[kHi] == 3.0);
    CHECK(d[kCi] == 3.0);
    // candidate group {xc, hc} has two
    CHECK(d[kXc] == 2.0);
    CHECK(d[kHc] == 2.0);
    // output group {xo, ho, co} has three
    CHECK(d[kXo] == 3.0);
  }
  SUBCASE("mode None zeroes beta gradients") {
    std::array<double, kLstmBranchCount> d{};
    for (int b = 0; b < kLstmBranchCount; ++b) d[b] = 2.5;
    reduce_beta_grads(StabilizerMode::None, d);
    for (double v : d) CHECK(v == 0.0);
  }
  SUBCASE("enforce_beta_mode re-ties drifted members") {
    LstmCell cell = make_lstm(2, 2, StabilizerMode::GateShared);
    for (int b = 0; b < kLstmBranchCount; ++b) cell.beta[b] = 0.1 * b;
    enforce_beta_mode(cell);
    CHECK(cell.beta[kXi] == cell.beta[kHi]);
    CHECK(cell.beta[kXi] == cell.beta[kCi]);
    CHECK(cell.beta[kXf] == cell.beta[kCf]);
    CHECK(cell.beta[kXc] == cell.beta[kHc]);
    CHECK(cell.beta[kXo] == cell.beta[kCo]);
  }
}

TEST_CASE("lstm branch naming") {
  CHECK(kLstmBranchCount == 11);
  CHECK(std::string(kLstmBranchNames[kXi]) == "W_xi");
  CHECK(std::string(kLstmBranchNames[kCo]) == "W_co");
  // peephole matrices act elementwise on the cell state
  LstmCell cell = make_lstm(3, 4, StabilizerMode::None);
  CHECK(cell.w[kXi].cols == 3);
  CHECK(cell.w[kHi].cols == 4);
  CHECK(cell.w[kCi].cols == 4);
  for (const auto& w : cell.w) CHECK(w.rows == 4);
}
