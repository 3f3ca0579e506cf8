#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace stabnet {

/// Dense row-major matrix of 64-bit reals. Everything in this library is
/// double precision; the gradient certification tolerances are not
/// reachable in float.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  int size() const { return rows * cols; }

  bool operator==(const Matrix&) const = default;
};

struct Vector {
  std::vector<double> v;

  Vector() = default;
  explicit Vector(int n) : v(static_cast<size_t>(n), 0.0) {}
  Vector(std::initializer_list<double> init) : v(init) {}

  int dim() const { return static_cast<int>(v.size()); }
  double& operator[](int i) { return v[static_cast<size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<size_t>(i)]; }

  bool operator==(const Vector&) const = default;
};

/// splitmix64 stream. The whole sequence is a pure function of the 64-bit
/// state, so the same seed gives the same stream on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). n must be positive.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  /// Standard normal, Box-Muller. Draws two uniforms per call.
  double gaussian();

 private:
  uint64_t state_;
};

std::string shape_str(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);
/// A^T g without forming the transpose. Accumulation order matches
/// matvec(transpose(a), g) exactly.
Vector matvec_t(const Matrix& a, const Vector& g);
Matrix outer(const Vector& g, const Vector& x);
double inner(const Vector& a, const Vector& b);
/// alpha*x + y
Vector axpy(double alpha, const Vector& x, const Vector& y);
Matrix scale(double alpha, const Matrix& a);
Matrix transpose(const Matrix& a);
double frobenius_norm(const Matrix& a);

/// Entries i.i.d. uniform in [-half_width, +half_width], drawn row-major.
Matrix uniform_init(int rows, int cols, double half_width, Rng& rng);

bool all_finite(const Matrix& a);
bool all_finite(const Vector& x);

/// Fisher-Yates permutation of 0..n-1 drawn from rng.
std::vector<int> shuffled_indices(int n, Rng& rng);

// In-place variants for the training hot path. Same math, no temporaries.
void matvec_into(const Matrix& a, const Vector& x, Vector& out);
/// out += alpha * A^T g
void matvec_t_add(const Matrix& a, const Vector& g, double alpha, Vector& out);
/// acc += alpha * g x^T
void outer_add(Matrix& acc, double alpha, const Vector& g, const Vector& x);
/// y += alpha * x
void vec_add(Vector& y, double alpha, const Vector& x);

}  // namespace stabnet
