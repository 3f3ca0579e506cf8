#include "stabnet/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stabnet {

namespace {

constexpr int kFormatVersion = 1;

[[noreturn]] void corrupt(const std::string& path, const std::string& why) {
  throw std::runtime_error("corrupt checkpoint " + path + ": " + why);
}

std::string hexfloat(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

void write_matrix(std::ostream& os, const std::string& tag, const Matrix& m) {
  os << tag << ' ' << m.rows << ' ' << m.cols << '\n';
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      os << (c ? " " : "") << hexfloat(m.at(r, c));
    }
    os << '\n';
  }
}

void write_vector(std::ostream& os, const std::string& tag, const Vector& v) {
  os << tag << ' ' << v.dim() << '\n';
  for (int i = 0; i < v.dim(); ++i) os << (i ? " " : "") << hexfloat(v[i]);
  os << '\n';
}

// Token-at-a-time reader. Hexfloat values go through strtod because
// istream's double extraction does not accept the %a format.
class TokenReader {
 public:
  TokenReader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

  std::string word() {
    std::string t;
    if (!(is_ >> t)) corrupt(path_, "unexpected end of file");
    return t;
  }

  void expect(const std::string& want) {
    std::string got = word();
    if (got != want) corrupt(path_, "expected '" + want + "', found '" + got + "'");
  }

  int count() {
    std::string t = word();
    char* end = nullptr;
    long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || v < 0 || v > 1'000'000) {
      corrupt(path_, "bad count '" + t + "'");
    }
    return static_cast<int>(v);
  }

  double value() {
    std::string t = word();
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) corrupt(path_, "bad value '" + t + "'");
    if (!std::isfinite(v)) corrupt(path_, "non-finite value '" + t + "'");
    return v;
  }

  Matrix matrix(const std::string& tag) {
    expect(tag);
    int rows = count(), cols = count();
    Matrix m(rows, cols);
    for (double& v : m.a) v = value();
    return m;
  }

  Vector vector(const std::string& tag) {
    expect(tag);
    int dim = count();
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = value();
    return v;
  }

 private:
  std::istream& is_;
  const std::string& path_;
};

}  // namespace

void save_network(const Network& net, const std::string& path) {
  std::ostringstream os;
  os << "stabnet-model " << kFormatVersion << '\n';
  os << "stages " << net.stages.size() << '\n';
  for (const auto& stage : net.stages) {
    if (const auto* layer = std::get_if<AffineLayer>(&stage)) {
      os << "affine " << layer->in_dim() << ' ' << layer->out_dim() << ' '
         << to_string(layer->activation) << ' ' << to_string(layer->mode) << '\n';
      os << "beta " << hexfloat(layer->beta) << '\n';
      write_matrix(os, "W", layer->w);
      write_vector(os, "b", layer->b);
    } else {
      const auto& cell = std::get<LstmCell>(stage);
      os << "lstm " << cell.input_dim << ' ' << cell.hidden_dim << ' ' << to_string(cell.mode)
         << '\n';
      os << "beta " << kLstmBranchCount << '\n';
      for (int b = 0; b < kLstmBranchCount; ++b) {
        os << (b ? " " : "") << hexfloat(cell.beta[b]);
      }
      os << '\n';
      for (int b = 0; b < kLstmBranchCount; ++b) {
        write_matrix(os, kLstmBranchNames[b], cell.w[b]);
      }
      write_vector(os, "b_i", cell.b_i);
      write_vector(os, "b_f", cell.b_f);
      write_vector(os, "b_c", cell.b_c);
      write_vector(os, "b_o", cell.b_o);
    }
  }
  os << "end\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << os.str();
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

Network load_network(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  TokenReader in(f, path);

  in.expect("stabnet-model");
  int version = in.count();
  if (version != kFormatVersion) {
    corrupt(path, "unsupported format version " + std::to_string(version));
  }
  in.expect("stages");
  int stages = in.count();
  if (stages < 1) corrupt(path, "no stages");

  Network net;
  for (int si = 0; si < stages; ++si) {
    std::string kind = in.word();
    if (kind == "affine") {
      int in_dim = in.count(), out_dim = in.count();
      Activation act = activation_from_string(in.word());
      StabilizerMode mode = stabilizer_from_string(in.word());
      AffineLayer layer = make_affine(in_dim, out_dim, act, mode);
      in.expect("beta");
      layer.beta = in.value();
      layer.w = in.matrix("W");
      layer.b = in.vector("b");
      if (layer.w.rows != out_dim || layer.w.cols != in_dim || layer.b.dim() != out_dim) {
        corrupt(path, "affine stage shape disagrees with its header");
      }
      net.stages.emplace_back(std::move(layer));
    } else if (kind == "lstm") {
      int input_dim = in.count(), hidden_dim = in.count();
      StabilizerMode mode = stabilizer_from_string(in.word());
      LstmCell cell = make_lstm(input_dim, hidden_dim, mode);
      in.expect("beta");
      if (in.count() != kLstmBranchCount) corrupt(path, "wrong beta count for lstm stage");
      for (int b = 0; b < kLstmBranchCount; ++b) cell.beta[b] = in.value();
      for (int b = 0; b < kLstmBranchCount; ++b) {
        Matrix m = in.matrix(kLstmBranchNames[b]);
        if (m.rows != cell.w[b].rows || m.cols != cell.w[b].cols) {
          corrupt(path, std::string(kLstmBranchNames[b]) + " shape disagrees with its header");
        }
        cell.w[b] = std::move(m);
      }
      cell.b_i = in.vector("b_i");
      cell.b_f = in.vector("b_f");
      cell.b_c = in.vector("b_c");
      cell.b_o = in.vector("b_o");
      if (cell.b_i.dim() != hidden_dim || cell.b_f.dim() != hidden_dim ||
          cell.b_c.dim() != hidden_dim || cell.b_o.dim() != hidden_dim) {
        corrupt(path, "lstm bias shape disagrees with its header");
      }
      net.stages.emplace_back(std::move(cell));
    } else {
      corrupt(path, "unknown stage kind '" + kind + "'");
    }
  }
  in.expect("end");
  return net;
}

}  // namespace stabnet
