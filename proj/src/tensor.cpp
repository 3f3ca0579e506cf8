#include "stabnet/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stabnet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

[[noreturn]] void shape_error(const std::string& op, const std::string& lhs, const std::string& rhs) {
  throw std::invalid_argument(op + ": shape mismatch, " + lhs + " vs " + rhs);
}

}  // namespace

double Rng::gaussian() {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - next_double();
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) shape_error("matmul", shape_str(a), shape_str(b));
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      for (int j = 0; j < b.cols; ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return out;
}

Vector matvec(const Matrix& a, const Vector& x) {
  Vector out;
  matvec_into(a, x, out);
  return out;
}

void matvec_into(const Matrix& a, const Vector& x, Vector& out) {
  if (a.cols != x.dim()) {
    shape_error("matvec", shape_str(a), std::to_string(x.dim()));
  }
  out.v.assign(static_cast<size_t>(a.rows), 0.0);
  for (int r = 0; r < a.rows; ++r) {
    const double* row = &a.a[static_cast<size_t>(r) * a.cols];
    double s = 0.0;
    for (int c = 0; c < a.cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

Vector matvec_t(const Matrix& a, const Vector& g) {
  if (a.rows != g.dim()) {
    shape_error("matvec_t", shape_str(a), std::to_string(g.dim()));
  }
  Vector out(a.cols);
  // Per output j, sum over i ascending: identical operation order to
  // matvec(transpose(a), g).
  for (int j = 0; j < a.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i) s += a.at(i, j) * g[i];
    out[j] = s;
  }
  return out;
}

void matvec_t_add(const Matrix& a, const Vector& g, double alpha, Vector& out) {
  if (a.rows != g.dim() || a.cols != out.dim()) {
    shape_error("matvec_t_add", shape_str(a), std::to_string(g.dim()));
  }
  for (int i = 0; i < a.rows; ++i) {
    const double* row = &a.a[static_cast<size_t>(i) * a.cols];
    const double gi = alpha * g[i];
    for (int j = 0; j < a.cols; ++j) out[j] += row[j] * gi;
  }
}

Matrix outer(const Vector& g, const Vector& x) {
  Matrix out(g.dim(), x.dim());
  outer_add(out, 1.0, g, x);
  return out;
}

void outer_add(Matrix& acc, double alpha, const Vector& g, const Vector& x) {
  if (acc.rows != g.dim() || acc.cols != x.dim()) {
    shape_error("outer_add", shape_str(acc),
                std::to_string(g.dim()) + "x" + std::to_string(x.dim()));
  }
  for (int r = 0; r < acc.rows; ++r) {
    double* row = &acc.a[static_cast<size_t>(r) * acc.cols];
    const double gr = alpha * g[r];
    for (int c = 0; c < acc.cols; ++c) row[c] += gr * x[c];
  }
}

double inner(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    shape_error("inner", std::to_string(a.dim()), std::to_string(b.dim()));
  }
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

Vector axpy(double alpha, const Vector& x, const Vector& y) {
  if (x.dim() != y.dim()) {
    shape_error("axpy", std::to_string(x.dim()), std::to_string(y.dim()));
  }
  Vector out(x.dim());
  for (int i = 0; i < x.dim(); ++i) out[i] = alpha * x[i] + y[i];
  return out;
}

void vec_add(Vector& y, double alpha, const Vector& x) {
  if (x.dim() != y.dim()) {
    shape_error("vec_add", std::to_string(y.dim()), std::to_string(x.dim()));
  }
  for (int i = 0; i < x.dim(); ++i) y[i] += alpha * x[i];
}

Matrix scale(double alpha, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.a) v *= alpha;
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (int r = 0; r < a.rows; ++r) {
    for (int c = 0; c < a.cols; ++c) out.at(c, r) = a.at(r, c);
  }
  return out;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.a) s += v * v;
  return std::sqrt(s);
}

Matrix uniform_init(int rows, int cols, double half_width, Rng& rng) {
  if (half_width <= 0.0) {
    throw std::invalid_argument("uniform_init: half_width must be positive, got " +
                                std::to_string(half_width));
  }
  Matrix out(rows, cols);
  for (double& v : out.a) v = rng.uniform(-half_width, half_width);
  return out;
}

bool all_finite(const Matrix& a) {
  for (double v : a.a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool all_finite(const Vector& x) {
  for (double v : x.v) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

}  // namespace stabnet
