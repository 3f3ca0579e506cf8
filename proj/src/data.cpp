#include "stabnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace stabnet {

namespace {

using nlohmann::json;

double dist(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::pair<int, int> split_sizes(int n, double cv_fraction, const char* what) {
  if (!(cv_fraction > 0.0 && cv_fraction < 1.0)) {
    throw std::invalid_argument(std::string(what) + ": cv_fraction must lie in (0, 1)");
  }
  int train_n = static_cast<int>(std::ceil(n * (1.0 - cv_fraction)));
  int cv_n = n - train_n;
  if (train_n < 1 || cv_n < 1) {
    throw std::invalid_argument(std::string(what) + ": split leaves an empty side (n=" +
                                std::to_string(n) + ")");
  }
  return {train_n, cv_n};
}

}  // namespace

int SequenceDataset::total_frames() const {
  int n = 0;
  for (const auto& seq : frames) n += static_cast<int>(seq.size());
  return n;
}

FrameDataset gen_gaussian_frames(int num_classes, int feature_dim, int n, double class_separation,
                                 double noise_sigma, uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("gaussian frames: need at least 2 classes");
  if (feature_dim < 1) throw std::invalid_argument("gaussian frames: feature_dim must be >= 1");
  if (n < num_classes) {
    throw std::invalid_argument("gaussian frames: n must be >= num_classes");
  }
  if (!(class_separation > 0.0) || !(noise_sigma > 0.0)) {
    throw std::invalid_argument("gaussian frames: separation and sigma must be positive");
  }

  Rng rng(seed);
  FrameDataset data;
  data.feature_dim = feature_dim;
  data.num_classes = num_classes;
  data.seed = seed;
  {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "gaussian-frames(classes=%d,dim=%d,n=%d,sep=%g,sigma=%g)",
                  num_classes, feature_dim, n, class_separation, noise_sigma);
    data.generator = buf;
  }

  // Means by rejection sampling inside a box generous enough that the
  // pairwise-distance constraint is easy to satisfy.
  const double half = 0.5 * class_separation * num_classes;
  const int max_attempts = 10000 * num_classes;
  int attempts = 0;
  while (static_cast<int>(data.class_means.size()) < num_classes) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument("gaussian frames: could not place class means at separation " +
                                  std::to_string(class_separation));
    }
    Vector candidate(feature_dim);
    for (int i = 0; i < feature_dim; ++i) candidate[i] = rng.uniform(-half, half);
    bool ok = true;
    for (const auto& m : data.class_means) {
      if (dist(candidate, m) < class_separation) {
        ok = false;
        break;
      }
    }
    if (ok) data.class_means.push_back(std::move(candidate));
  }

  data.features.reserve(n);
  data.labels.reserve(n);
  for (int i = 0; i < n; ++i) {
    int c = i % num_classes;  // round robin keeps classes balanced
    Vector x(feature_dim);
    for (int k = 0; k < feature_dim; ++k) {
      x[k] = data.class_means[c][k] + noise_sigma * rng.gaussian();
    }
    data.features.push_back(std::move(x));
    data.labels.push_back(c);
  }
  return data;
}

SequenceDataset gen_delayed_recall(int seq_len, int delay, int alphabet, int n, uint64_t seed) {
  if (alphabet < 2) throw std::invalid_argument("delayed recall: alphabet must be >= 2");
  if (seq_len < 1 || n < 1) throw std::invalid_argument("delayed recall: need n, seq_len >= 1");
  if (delay < 0 || delay >= seq_len) {
    throw std::invalid_argument("delayed recall: delay must lie in [0, seq_len)");
  }

  Rng rng(seed);
  SequenceDataset data;
  data.feature_dim = alphabet;
  data.num_classes = alphabet + 1;  // symbols plus the blank class
  data.seed = seed;
  {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "delayed-recall(len=%d,delay=%d,alphabet=%d,n=%d)", seq_len,
                  delay, alphabet, n);
    data.generator = buf;
  }

  const int blank = alphabet;
  data.frames.reserve(n);
  data.labels.reserve(n);
  for (int s = 0; s < n; ++s) {
    std::vector<int> symbols(seq_len);
    for (int t = 0; t < seq_len; ++t) {
      symbols[t] = static_cast<int>(rng.next_below(static_cast<uint64_t>(alphabet)));
    }
    std::vector<Vector> xs(seq_len);
    std::vector<int> ys(seq_len);
    for (int t = 0; t < seq_len; ++t) {
      Vector one_hot(alphabet);
      one_hot[symbols[t]] = 1.0;
      xs[t] = std::move(one_hot);
      ys[t] = t < delay ? blank : symbols[t - delay];
    }
    data.frames.push_back(std::move(xs));
    data.labels.push_back(std::move(ys));
  }
  return data;
}

std::pair<FrameDataset, FrameDataset> split(const FrameDataset& data, const SplitSpec& spec) {
  auto [train_n, cv_n] = split_sizes(data.size(), spec.cv_fraction, "split frames");
  Rng rng(spec.seed);
  std::vector<int> idx = shuffled_indices(data.size(), rng);

  FrameDataset train, cv;
  train.feature_dim = cv.feature_dim = data.feature_dim;
  train.num_classes = cv.num_classes = data.num_classes;
  train.generator = cv.generator = data.generator;
  train.seed = cv.seed = data.seed;
  train.class_means = cv.class_means = data.class_means;
  for (int i = 0; i < data.size(); ++i) {
    FrameDataset& side = i < train_n ? train : cv;
    side.features.push_back(data.features[idx[i]]);
    side.labels.push_back(data.labels[idx[i]]);
  }
  return {std::move(train), std::move(cv)};
}

std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& data,
                                                  const SplitSpec& spec) {
  auto [train_n, cv_n] = split_sizes(data.size(), spec.cv_fraction, "split sequences");
  Rng rng(spec.seed);
  std::vector<int> idx = shuffled_indices(data.size(), rng);

  SequenceDataset train, cv;
  train.feature_dim = cv.feature_dim = data.feature_dim;
  train.num_classes = cv.num_classes = data.num_classes;
  train.generator = cv.generator = data.generator;
  train.seed = cv.seed = data.seed;
  for (int i = 0; i < data.size(); ++i) {
    SequenceDataset& side = i < train_n ? train : cv;
    side.frames.push_back(data.frames[idx[i]]);
    side.labels.push_back(data.labels[idx[i]]);
  }
  return {std::move(train), std::move(cv)};
}

FrameDataset flatten(const SequenceDataset& data) {
  FrameDataset out;
  out.feature_dim = data.feature_dim;
  out.num_classes = data.num_classes;
  out.generator = data.generator + "+flatten";
  out.seed = data.seed;
  for (int s = 0; s < data.size(); ++s) {
    for (size_t t = 0; t < data.frames[s].size(); ++t) {
      out.features.push_back(data.frames[s][t]);
      out.labels.push_back(data.labels[s][t]);
    }
  }
  return out;
}

void save_frames_csv(const FrameDataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "label";
  for (int k = 0; k < data.feature_dim; ++k) f << ",f" << k;
  f << '\n';
  char buf[40];
  for (int i = 0; i < data.size(); ++i) {
    f << data.labels[i];
    for (int k = 0; k < data.feature_dim; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features[i][k]);
      f << ',' << buf;
    }
    f << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

FrameDataset load_frames_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  int dim = 0;
  {
    std::stringstream header(line);
    std::string col;
    if (!std::getline(header, col, ',') || col != "label") {
      throw std::runtime_error(path + ": expected 'label' as first column");
    }
    while (std::getline(header, col, ',')) ++dim;
  }

  FrameDataset data;
  data.feature_dim = dim;
  data.generator = "csv:" + path;
  int max_label = -1;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) throw std::runtime_error(path + ": short row");
    char* end = nullptr;
    long label = std::strtol(cell.c_str(), &end, 10);
    if (end == cell.c_str() || *end != '\0' || label < 0) {
      throw std::runtime_error(path + ": bad label '" + cell + "'");
    }
    Vector x(dim);
    for (int k = 0; k < dim; ++k) {
      if (!std::getline(row, cell, ',')) throw std::runtime_error(path + ": short row");
      x[k] = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw std::runtime_error(path + ": bad number '" + cell + "'");
      }
    }
    if (std::getline(row, cell, ',')) throw std::runtime_error(path + ": too many columns");
    data.features.push_back(std::move(x));
    data.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
  }
  data.num_classes = max_label + 1;
  return data;
}

void save_sequences_jsonl(const SequenceDataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (int s = 0; s < data.size(); ++s) {
    json obj;
    json frames = json::array();
    for (const auto& x : data.frames[s]) frames.push_back(x.v);
    obj["frames"] = std::move(frames);
    obj["labels"] = data.labels[s];
    f << obj.dump() << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

SequenceDataset load_sequences_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  SequenceDataset data;
  data.generator = "jsonl:" + path;
  std::string line;
  int max_label = -1;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json obj = json::parse(line);
    std::vector<Vector> xs;
    for (const auto& frame : obj.at("frames")) {
      Vector x(static_cast<int>(frame.size()));
      for (int k = 0; k < x.dim(); ++k) x[k] = frame[k].get<double>();
      xs.push_back(std::move(x));
    }
    std::vector<int> ys = obj.at("labels").get<std::vector<int>>();
    if (xs.size() != ys.size()) {
      throw std::runtime_error(path + ": frame/label count mismatch in a sequence");
    }
    for (int y : ys) max_label = std::max(max_label, y);
    if (!xs.empty()) data.feature_dim = xs.front().dim();
    data.frames.push_back(std::move(xs));
    data.labels.push_back(std::move(ys));
  }
  data.num_classes = max_label + 1;
  return data;
}

}  // namespace stabnet
