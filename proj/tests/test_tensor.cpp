#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "stabnet/tensor.hpp"

using namespace stabnet;

TEST_CASE("matmul hand values") {
  Matrix a(2, 2);
  a.a = {1, 2, 3, 4};

  SUBCASE("identity is neutral") {
    Matrix eye(2, 2);
    eye.at(0, 0) = eye.at(1, 1) = 1.0;
    CHECK(matmul(eye, a) == a);
    CHECK(matmul(a, eye) == a);
  }
  SUBCASE("column of ones sums the rows") {
    Matrix ones(2, 1);
    ones.a = {1, 1};
    Matrix p = matmul(a, ones);
    CHECK(p.rows == 2);
    CHECK(p.cols == 1);
    CHECK(p.at(0, 0) == 3.0);
    CHECK(p.at(1, 0) == 7.0);
  }
  SUBCASE("zero matrix annihilates") {
    Matrix z(2, 2);
    Matrix p = matmul(a, z);
    for (double v : p.a) CHECK(v == 0.0);
  }
  SUBCASE("inner dimension mismatch throws") {
    Matrix bad(3, 2);
    CHECK_THROWS_AS(matmul(a, bad), std::invalid_argument);
  }
}

TEST_CASE("matvec and its transpose") {
  Matrix a(2, 2);
  a.a = {1, 2, 3, 4};
  Vector x{1, 1};
  Vector y = matvec(a, x);
  CHECK(y == Vector{3, 7});

  // matvec_t(A, g) must agree bitwise with forming A^T first.
  Vector g{0.25, -1.5};
  CHECK(matvec_t(a, g) == matvec(transpose(a), g));

  CHECK_THROWS_AS(matvec(a, Vector{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("inner and outer products") {
  CHECK(inner(Vector{1, -1}, Vector{4, 6}) == -2.0);
  CHECK(inner(Vector{5, 7, -2}, Vector{0, 0, 0}) == 0.0);
  CHECK_THROWS_AS(inner(Vector{1}, Vector{1, 2}), std::invalid_argument);

  Matrix o = outer(Vector{1, 0}, Vector{0, 1});
  CHECK(o.rows == 2);
  CHECK(o.cols == 2);
  CHECK(o.at(0, 0) == 0.0);
  CHECK(o.at(0, 1) == 1.0);
  CHECK(o.at(1, 0) == 0.0);
  CHECK(o.at(1, 1) == 0.0);
}

TEST_CASE("axpy, scale and in-place helpers") {
  Vector y = axpy(2.0, Vector{1, 2}, Vector{10, 20});
  CHECK(y == Vector{12, 24});

  Matrix m(1, 2);
  m.a = {3, -4};
  Matrix s = scale(0.5, m);
  CHECK(s.a[0] == 1.5);
  CHECK(s.a[1] == -2.0);

  Vector acc{1, 1};
  vec_add(acc, 3.0, Vector{1, 2});
  CHECK(acc == Vector{4, 7});

  Matrix out(2, 2);
  outer_add(out, 2.0, Vector{1, 0}, Vector{0, 1});
  CHECK(out.at(0, 1) == 2.0);
  CHECK(out.at(0, 0) == 0.0);

  Matrix a(2, 2);
  a.a = {1, 2, 3, 4};
  Vector dst{100, 100};
  matvec_t_add(a, Vector{1, 1}, 1.0, dst);
  CHECK(dst == Vector{104, 106});
}

TEST_CASE("frobenius norm") {
  Matrix z(3, 2);
  CHECK(frobenius_norm(z) == 0.0);

  Matrix eye(4, 4);
  for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  CHECK(frobenius_norm(eye) == doctest::Approx(2.0).epsilon(1e-15));

  Matrix m(1, 2);
  m.a = {3, 4};
  CHECK(frobenius_norm(m) == 5.0);
}

TEST_CASE("rng determinism and ranges") {
  SUBCASE("same seed, same draws") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_double() == b.next_double());
  }
  SUBCASE("uniform_init shape and containment") {
    Rng rng(7);
    Matrix m = uniform_init(2, 3, 0.1, rng);
    CHECK(m.rows == 2);
    CHECK(m.cols == 3);
    for (double v : m.a) {
      CHECK(v >= -0.1);
      CHECK(v <= 0.1);
    }
  }
  SUBCASE("uniform_init reproducible") {
    Rng a(9), b(9);
    CHECK(uniform_init(4, 4, 0.5, a) == uniform_init(4, 4, 0.5, b));
  }
  SUBCASE("gaussian draws are finite with sane spread") {
    Rng rng(3);
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      double g = rng.gaussian();
      CHECK(std::isfinite(g));
      sum += g;
      sumsq += g * g;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("shuffled_indices is a seeded permutation") {
  Rng a(11), b(11);
  std::vector<int> p = shuffled_indices(10, a);
  CHECK(p == shuffled_indices(10, b));
  std::set<int> seen(p.begin(), p.end());
  CHECK(seen.size() == 10);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 9);

  // enough entropy that the identity permutation is not what comes out
  Rng c(1);
  std::vector<int> q = shuffled_indices(50, c);
  bool moved = false;
  for (int i = 0; i < 50; ++i) moved = moved || q[i] != i;
  CHECK(moved);
}

TEST_CASE("all_finite flags bad entries") {
  Matrix m(2, 2);
  CHECK(all_finite(m));
  m.a[3] = std::nan("");
  CHECK_FALSE(all_finite(m));

  Vector v{1, 2};
  CHECK(all_finite(v));
  v[0] = INFINITY;
  CHECK_FALSE(all_finite(v));
}
