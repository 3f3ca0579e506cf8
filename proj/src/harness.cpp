#include "stabnet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace stabnet {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& origin, const std::string& why) {
  throw std::invalid_argument("config " + origin + ": " + why);
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& origin, const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      bad_config(origin, std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& origin) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    bad_config(origin, std::string("key '") + key + "' has the wrong type");
  }
}

void read_field(const json& j, const char* key, Activation& out, const std::string& origin) {
  if (!j.contains(key)) return;
  std::string s;
  read_field(j, key, s, origin);
  try {
    out = activation_from_string(s);
  } catch (const std::invalid_argument& e) {
    bad_config(origin, e.what());
  }
}

void read_field(const json& j, const char* key, StabilizerMode& out, const std::string& origin) {
  if (!j.contains(key)) return;
  std::string s;
  read_field(j, key, s, origin);
  try {
    out = stabilizer_from_string(s);
  } catch (const std::invalid_argument& e) {
    bad_config(origin, e.what());
  }
}

}  // namespace

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bad_config(origin, std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad_config(origin, "top level must be an object");
  reject_unknown_keys(j,
                      {"model", "data", "initial_lr", "momentum", "batch_size", "max_epochs",
                       "patience", "cv_fraction", "seed", "init_half_width", "freeze_betas"},
                      origin, "the top level");

  TrainConfig cfg;
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (!m.is_object()) bad_config(origin, "'model' must be an object");
    reject_unknown_keys(
        m, {"kind", "hidden_width", "hidden_depth", "activation", "mode", "stabilize_output"},
        origin, "'model'");
    read_field(m, "kind", cfg.model.kind, origin);
    read_field(m, "hidden_width", cfg.model.hidden_width, origin);
    read_field(m, "hidden_depth", cfg.model.hidden_depth, origin);
    read_field(m, "activation", cfg.model.activation, origin);
    read_field(m, "mode", cfg.model.mode, origin);
    read_field(m, "stabilize_output", cfg.model.stabilize_output, origin);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    if (!d.is_object()) bad_config(origin, "'data' must be an object");
    reject_unknown_keys(d,
                        {"kind", "seed", "num_classes", "feature_dim", "n", "class_separation",
                         "noise_sigma", "seq_len", "delay", "alphabet"},
                        origin, "'data'");
    read_field(d, "kind", cfg.data.kind, origin);
    read_field(d, "seed", cfg.data.seed, origin);
    read_field(d, "num_classes", cfg.data.num_classes, origin);
    read_field(d, "feature_dim", cfg.data.feature_dim, origin);
    read_field(d, "n", cfg.data.n, origin);
    read_field(d, "class_separation", cfg.data.class_separation, origin);
    read_field(d, "noise_sigma", cfg.data.noise_sigma, origin);
    read_field(d, "seq_len", cfg.data.seq_len, origin);
    read_field(d, "delay", cfg.data.delay, origin);
    read_field(d, "alphabet", cfg.data.alphabet, origin);
  }
  read_field(j, "initial_lr", cfg.initial_lr, origin);
  read_field(j, "momentum", cfg.momentum, origin);
  read_field(j, "batch_size", cfg.batch_size, origin);
  read_field(j, "max_epochs", cfg.max_epochs, origin);
  read_field(j, "patience", cfg.patience, origin);
  read_field(j, "cv_fraction", cfg.cv_fraction, origin);
  read_field(j, "seed", cfg.seed, origin);
  read_field(j, "init_half_width", cfg.init_half_width, origin);
  read_field(j, "freeze_betas", cfg.freeze_betas, origin);

  validate(cfg);
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("config " + path + ": cannot open file");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), path);
}

void validate(const TrainConfig& cfg) {
  const std::string o = "(validate)";
  if (cfg.model.kind != "dnn" && cfg.model.kind != "lstm") {
    bad_config(o, "model.kind must be 'dnn' or 'lstm'");
  }
  if (cfg.data.kind != "gaussian-frames" && cfg.data.kind != "delayed-recall") {
    bad_config(o, "data.kind must be 'gaussian-frames' or 'delayed-recall'");
  }
  if (cfg.model.kind == "lstm" && cfg.data.kind != "delayed-recall") {
    bad_config(o, "an lstm model needs sequence data (delayed-recall)");
  }
  if (cfg.model.hidden_width < 1 || cfg.model.hidden_depth < 1) {
    bad_config(o, "hidden_width and hidden_depth must be >= 1");
  }
  if (!(cfg.initial_lr > 0.0)) bad_config(o, "initial_lr must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) bad_config(o, "momentum must lie in [0, 1)");
  if (cfg.batch_size < 1) bad_config(o, "batch_size must be >= 1");
  if (cfg.max_epochs < 0) bad_config(o, "max_epochs must be >= 0");
  if (cfg.patience < 1) bad_config(o, "patience must be >= 1");
  if (!(cfg.cv_fraction > 0.0 && cfg.cv_fraction < 1.0)) {
    bad_config(o, "cv_fraction must lie in (0, 1)");
  }
  if (!(cfg.init_half_width > 0.0)) bad_config(o, "init_half_width must be positive");
  if (cfg.data.kind == "gaussian-frames") {
    if (cfg.data.num_classes < 2) bad_config(o, "num_classes must be >= 2");
    if (cfg.data.feature_dim < 1) bad_config(o, "feature_dim must be >= 1");
    if (cfg.data.n < cfg.data.num_classes) bad_config(o, "n must be >= num_classes");
    if (!(cfg.data.class_separation > 0.0) || !(cfg.data.noise_sigma > 0.0)) {
      bad_config(o, "class_separation and noise_sigma must be positive");
    }
  } else {
    if (cfg.data.alphabet < 2) bad_config(o, "alphabet must be >= 2");
    if (cfg.data.seq_len < 1 || cfg.data.n < 1) bad_config(o, "n and seq_len must be >= 1");
    if (cfg.data.delay < 0 || cfg.data.delay >= cfg.data.seq_len) {
      bad_config(o, "delay must lie in [0, seq_len)");
    }
  }
}

Network build_network(const ModelSpec& spec, int input_dim, int num_classes, double half_width,
                      Rng& rng) {
  Network net;
  int width = input_dim;
  if (spec.kind == "lstm") {
    net.stages.emplace_back(make_lstm(input_dim, spec.hidden_width, spec.mode));
    width = spec.hidden_width;
  } else {
    for (int d = 0; d < spec.hidden_depth; ++d) {
      net.stages.emplace_back(make_affine(width, spec.hidden_width, spec.activation, spec.mode));
      width = spec.hidden_width;
    }
  }
  StabilizerMode out_mode = spec.stabilize_output ? spec.mode : StabilizerMode::None;
  net.stages.emplace_back(make_affine(width, num_classes, Activation::Linear, out_mode));

  init_uniform(net, half_width, rng);
  // Zero classifier weights: the untrained model then predicts the
  // uniform distribution, CE = ln(num_classes), a handy anchor.
  auto& out_layer = std::get<AffineLayer>(net.stages.back());
  for (double& v : out_layer.w.a) v = 0.0;
  return net;
}

namespace {

void tally_logits(const std::vector<Vector>& logits, const std::vector<int>& labels,
                  double& loss_sum, int& hits) {
  for (size_t t = 0; t < logits.size(); ++t) {
    loss_sum += softmax_xent(logits[t], labels[t]).loss;
    int best = 0;
    for (int k = 1; k < logits[t].dim(); ++k) {
      if (logits[t][k] > logits[t][best]) best = k;
    }
    if (best == labels[t]) ++hits;
  }
}

}  // namespace

EvalMetrics evaluate(const Network& net, const FrameDataset& data) {
  if (net.has_lstm()) {
    throw std::invalid_argument("evaluate: frame data fed to a recurrent model");
  }
  std::vector<Vector> logits = network_predict(net, data.features);
  double loss_sum = 0.0;
  int hits = 0;
  tally_logits(logits, data.labels, loss_sum, hits);
  EvalMetrics m;
  m.ce = loss_sum / data.size();
  m.acc = static_cast<double>(hits) / data.size();
  return m;
}

EvalMetrics evaluate(const Network& net, const SequenceDataset& data) {
  double loss_sum = 0.0;
  int hits = 0;
  int frames = 0;
  for (int s = 0; s < data.size(); ++s) {
    std::vector<Vector> logits = network_predict(net, data.frames[s]);
    tally_logits(logits, data.labels[s], loss_sum, hits);
    frames += static_cast<int>(data.frames[s].size());
  }
  EvalMetrics m;
  m.ce = loss_sum / frames;
  m.acc = static_cast<double>(hits) / frames;
  return m;
}

TrainResult train(const TrainConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  // Data. For a dnn on sequence data the split happens on whole
  // sequences first, so a recurrent model trained on the same config
  // sees the exact same cv frames.
  const bool sequential = cfg.model.kind == "lstm";
  FrameDataset ftrain, fcv;
  SequenceDataset strain, scv;
  int input_dim = 0, num_classes = 0;
  const SplitSpec split_spec{cfg.cv_fraction, cfg.data.seed + 1};
  if (cfg.data.kind == "gaussian-frames") {
    FrameDataset full =
        gen_gaussian_frames(cfg.data.num_classes, cfg.data.feature_dim, cfg.data.n,
                            cfg.data.class_separation, cfg.data.noise_sigma, cfg.data.seed);
    input_dim = full.feature_dim;
    num_classes = full.num_classes;
    std::tie(ftrain, fcv) = split(full, split_spec);
  } else {
    SequenceDataset full = gen_delayed_recall(cfg.data.seq_len, cfg.data.delay, cfg.data.alphabet,
                                              cfg.data.n, cfg.data.seed);
    input_dim = full.feature_dim;
    num_classes = full.num_classes;
    auto sides = split(full, split_spec);
    if (sequential) {
      strain = std::move(sides.first);
      scv = std::move(sides.second);
    } else {
      ftrain = flatten(sides.first);
      fcv = flatten(sides.second);
    }
  }

  Rng rng(cfg.seed);
  TrainResult out;
  out.model = build_network(cfg.model, input_dim, num_classes, cfg.init_half_width, rng);
  Network& net = out.model;

  SgdState sgd = make_sgd_state(net, cfg.initial_lr, cfg.momentum);
  sgd.update_betas = !cfg.freeze_betas;
  LrSchedule sched = make_schedule(cfg.initial_lr, cfg.patience);

  TrainRecord& rec = out.record;
  auto eval_train = [&]() { return sequential ? evaluate(net, strain) : evaluate(net, ftrain); };
  auto eval_cv = [&]() { return sequential ? evaluate(net, scv) : evaluate(net, fcv); };

  {
    EvalMetrics tr = eval_train();
    EvalMetrics cv = eval_cv();
    rec.epochs.push_back({0, cfg.initial_lr, tr.ce, cv.ce, cv.acc});
    observe_cv(sched, cv.ce);  // baseline for the halving rule
  }

  for (int epoch = 1; epoch <= cfg.max_epochs && rec.stop_reason.empty(); ++epoch) {
    sgd.lr = sched.current_lr;
    const double lr_used = sgd.lr;
    double loss_sum = 0.0;
    int frames_seen = 0;
    try {
      if (!sequential) {
        std::vector<int> order = shuffled_indices(ftrain.size(), rng);
        for (int start = 0; start < ftrain.size(); start += cfg.batch_size) {
          int end = std::min(ftrain.size(), start + cfg.batch_size);
          std::vector<Vector> xs;
          std::vector<int> labels;
          xs.reserve(end - start);
          labels.reserve(end - start);
          for (int i = start; i < end; ++i) {
            xs.push_back(ftrain.features[order[i]]);
            labels.push_back(ftrain.labels[order[i]]);
          }
          // Affine stages treat frames independently, so the whole
          // mini-batch goes through as one multi-frame call.
          SeqForward fwd = network_forward(net, xs, labels);
          NetGrads grads = zero_grads(net);
          network_backward(net, fwd, labels, 1.0 / static_cast<double>(xs.size()), grads);
          loss_sum += fwd.loss_sum;
          frames_seen += static_cast<int>(xs.size());
          sgd_step(net, grads, sgd);
        }
      } else {
        std::vector<int> order = shuffled_indices(strain.size(), rng);
        for (int start = 0; start < strain.size(); start += cfg.batch_size) {
          int end = std::min(strain.size(), start + cfg.batch_size);
          int batch_frames = 0;
          for (int i = start; i < end; ++i) {
            batch_frames += static_cast<int>(strain.frames[order[i]].size());
          }
          NetGrads grads = zero_grads(net);
          for (int i = start; i < end; ++i) {
            const auto& xs = strain.frames[order[i]];
            const auto& labels = strain.labels[order[i]];
            SeqForward fwd = network_forward(net, xs, labels);
            network_backward(net, fwd, labels, 1.0 / static_cast<double>(batch_frames), grads);
            loss_sum += fwd.loss_sum;
          }
          frames_seen += batch_frames;
          sgd_step(net, grads, sgd);
        }
      }

      double train_ce = loss_sum / frames_seen;
      EvalMetrics cv = eval_cv();
      if (!std::isfinite(train_ce) || !std::isfinite(cv.ce) || !std::isfinite(cv.acc)) {
        rec.failed = true;
        rec.stop_reason = "diverged";
        rec.fail_reason = "non-finite loss at epoch " + std::to_string(epoch);
        break;
      }

      const EpochRow& prev = rec.epochs.back();
      rec.epochs.push_back({epoch, lr_used, train_ce, cv.ce, cv.acc});
      if (train_ce == prev.train_ce && cv.ce == prev.cv_ce) {
        rec.stop_reason = "converged";
        break;
      }
      if (observe_cv(sched, cv.ce).action == ScheduleAction::Stop) {
        rec.stop_reason = "early-stop";
        break;
      }
    } catch (const std::exception& e) {
      // Exploding weights surface as non-finite gradient or loss checks
      // deeper in the stack; the run ends as data, not as a crash.
      rec.failed = true;
      rec.stop_reason = "diverged";
      rec.fail_reason = e.what();
      break;
    }
  }
  if (rec.stop_reason.empty()) rec.stop_reason = "max-epochs";

  const EpochRow& last = rec.epochs.back();
  rec.final_epoch = last.epoch;
  if (rec.failed) {
    rec.final_cv_ce = std::numeric_limits<double>::quiet_NaN();
    rec.final_cv_acc = std::numeric_limits<double>::quiet_NaN();
  } else {
    rec.final_cv_ce = last.cv_ce;
    rec.final_cv_acc = last.cv_acc;
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

namespace {

// The sweep protocol varies initial_lr, the stabilizer arm, and the
// replicate seed; everything else must stay frozen. Guard it instead of
// trusting cell construction.
void assert_same_protocol(const TrainConfig& base, const TrainConfig& cell) {
  bool same = base.model.kind == cell.model.kind &&
              base.model.hidden_width == cell.model.hidden_width &&
              base.model.hidden_depth == cell.model.hidden_depth &&
              base.model.activation == cell.model.activation &&
              base.model.stabilize_output == cell.model.stabilize_output &&
              base.data.kind == cell.data.kind && base.data.seed == cell.data.seed &&
              base.data.num_classes == cell.data.num_classes &&
              base.data.feature_dim == cell.data.feature_dim && base.data.n == cell.data.n &&
              base.data.class_separation == cell.data.class_separation &&
              base.data.noise_sigma == cell.data.noise_sigma &&
              base.data.seq_len == cell.data.seq_len && base.data.delay == cell.data.delay &&
              base.data.alphabet == cell.data.alphabet && base.momentum == cell.momentum &&
              base.batch_size == cell.batch_size && base.max_epochs == cell.max_epochs &&
              base.patience == cell.patience && base.cv_fraction == cell.cv_fraction &&
              base.init_half_width == cell.init_half_width &&
              base.freeze_betas == cell.freeze_betas;
  if (!same) {
    throw std::logic_error("sweep: a cell config drifted from the base protocol");
  }
}

}  // namespace

SweepResult sweep(const TrainConfig& base, const std::vector<double>& lr_grid,
                  const std::vector<uint64_t>& seeds) {
  if (lr_grid.empty() || seeds.empty()) {
    throw std::invalid_argument("sweep: need a non-empty lr grid and seed list");
  }
  validate(base);
  const StabilizerMode on_mode =
      base.model.mode == StabilizerMode::None ? StabilizerMode::Independent : base.model.mode;

  SweepResult result;
  for (double lr : lr_grid) {
    for (int arm = 0; arm <= 1; ++arm) {
      for (uint64_t seed : seeds) {
        TrainConfig cell = base;
        cell.initial_lr = lr;
        cell.seed = seed;
        cell.model.mode = arm ? on_mode : StabilizerMode::None;
        assert_same_protocol(base, cell);
        TrainResult r = train(cell);
        SweepRow row;
        row.init_lr = lr;
        row.stabilizer = arm;
        row.seed = seed;
        row.final_cv_ce = r.record.final_cv_ce;
        row.final_frame_acc = r.record.final_cv_acc;
        row.epochs = r.record.final_epoch;
        row.stop_reason = r.record.stop_reason;
        result.rows.push_back(std::move(row));
        result.records.push_back(std::move(r.record));
      }
    }
  }

  // Deterministic assembly order regardless of execution order:
  // lr descending (as the grids are quoted), off arm before on, seed
  // ascending.
  std::vector<int> order(result.rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const SweepRow& ra = result.rows[a];
    const SweepRow& rb = result.rows[b];
    if (ra.init_lr != rb.init_lr) return ra.init_lr > rb.init_lr;
    if (ra.stabilizer != rb.stabilizer) return ra.stabilizer < rb.stabilizer;
    return ra.seed < rb.seed;
  });
  SweepResult sorted;
  for (int i : order) {
    sorted.rows.push_back(std::move(result.rows[i]));
    sorted.records.push_back(std::move(result.records[i]));
  }
  return sorted;
}

std::vector<double> default_lr_grid(const ModelSpec& spec) {
  if (spec.kind == "lstm") return {0.1, 0.04, 0.005, 0.0006};
  if (spec.activation == Activation::Relu) return {0.8, 0.1, 0.0125, 0.0016};
  return {0.8, 0.1, 0.01};
}

SensitivitySummary summarize(const std::vector<SweepRow>& rows) {
  SensitivitySummary summary;
  for (int arm = 0; arm <= 1; ++arm) {
    ArmSummary& s = summary.arms[arm];
    s.stabilizer = arm;

    std::vector<uint64_t> seeds;
    for (const auto& r : rows) {
      if (r.stabilizer != arm) continue;
      s.n_cells += 1;
      if (r.stop_reason == "diverged") {
        s.n_failed += 1;
        continue;
      }
      if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
      if (s.n_cells - s.n_failed == 1 || r.final_cv_ce < s.best_ce) s.best_ce = r.final_cv_ce;
      if (s.n_cells - s.n_failed == 1 || r.final_cv_ce > s.worst_ce) s.worst_ce = r.final_cv_ce;
    }
    std::sort(seeds.begin(), seeds.end());

    double spread_sum = 0.0;
    for (uint64_t seed : seeds) {
      double lo = 0.0, hi = 0.0;
      int n = 0;
      for (const auto& r : rows) {
        if (r.stabilizer != arm || r.seed != seed || r.stop_reason == "diverged") continue;
        if (n == 0) {
          lo = hi = r.final_cv_ce;
        } else {
          lo = std::min(lo, r.final_cv_ce);
          hi = std::max(hi, r.final_cv_ce);
        }
        ++n;
      }
      if (n >= 2) {
        s.per_seed_spread.emplace_back(seed, hi - lo);
        spread_sum += hi - lo;
      }
    }
    if (!s.per_seed_spread.empty()) {
      s.comparable = true;
      s.mean_spread = spread_sum / static_cast<double>(s.per_seed_spread.size());
    } else {
      s.mean_spread = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void save_train_csv(const TrainRecord& record, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "epoch,lr,train_ce,cv_ce,cv_acc\n";
  for (const auto& row : record.epochs) {
    f << row.epoch << ',' << format_g6(row.lr) << ',' << format_g6(row.train_ce) << ','
      << format_g6(row.cv_ce) << ',' << format_g6(row.cv_acc) << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

namespace {

constexpr const char* kSweepHeader = "init_lr,stabilizer,seed,final_cv_ce,final_frame_acc,epochs,"
                                     "stop_reason";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << kSweepHeader << '\n';
  for (const auto& r : rows) {
    f << format_g6(r.init_lr) << ',' << r.stabilizer << ',' << r.seed << ','
      << format_g6(r.final_cv_ce) << ',' << format_g6(r.final_frame_acc) << ',' << r.epochs << ','
      << r.stop_reason << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

std::vector<SweepRow> load_sweep_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != kSweepHeader) {
    throw std::runtime_error(path + ": missing or wrong sweep header");
  }
  std::vector<SweepRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 7) {
      throw std::runtime_error(path + ": expected 7 columns, found " +
                               std::to_string(cells.size()));
    }
    SweepRow r;
    r.init_lr = std::strtod(cells[0].c_str(), nullptr);
    r.stabilizer = std::stoi(cells[1]);
    r.seed = std::stoull(cells[2]);
    r.final_cv_ce = std::strtod(cells[3].c_str(), nullptr);
    r.final_frame_acc = std::strtod(cells[4].c_str(), nullptr);
    r.epochs = std::stoi(cells[5]);
    r.stop_reason = cells[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

void save_summary_csv(const SensitivitySummary& summary, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "stabilizer,mean_spread,best_ce,worst_ce,n_cells,n_failed,comparable\n";
  for (const ArmSummary& arm : summary.arms) {
    f << arm.stabilizer << ',' << format_g6(arm.mean_spread) << ',' << format_g6(arm.best_ce)
      << ',' << format_g6(arm.worst_ce) << ',' << arm.n_cells << ',' << arm.n_failed << ','
      << (arm.comparable ? 1 : 0) << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

std::string render_summary(const SensitivitySummary& summary) {
  std::ostringstream os;
  for (const ArmSummary& arm : summary.arms) {
    os << (arm.stabilizer ? "with stabilizer:    " : "without stabilizer: ");
    if (!arm.comparable) {
      os << "incomparable (" << arm.n_failed << '/' << arm.n_cells << " cells failed)\n";
      continue;
    }
    os << "mean final-CE spread " << format_g6(arm.mean_spread) << " over lr grid [";
    for (size_t i = 0; i < arm.per_seed_spread.size(); ++i) {
      os << (i ? " " : "") << "seed" << arm.per_seed_spread[i].first << '='
         << format_g6(arm.per_seed_spread[i].second);
    }
    os << "], best CE " << format_g6(arm.best_ce) << ", worst CE " << format_g6(arm.worst_ce)
       << ", cells " << arm.n_cells << ", failed " << arm.n_failed << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

NormReport norm_report(const Network& net) {
  NormReport report;
  for (size_t si = 0; si < net.stages.size(); ++si) {
    std::string prefix = "stage" + std::to_string(si) + ".";
    if (const auto* layer = std::get_if<AffineLayer>(&net.stages[si])) {
      report.entries.push_back({prefix + "W", frobenius_norm(layer->w)});
      continue;
    }
    const auto& cell = std::get<LstmCell>(net.stages[si]);
    double norms[kLstmBranchCount];
    for (int b = 0; b < kLstmBranchCount; ++b) {
      norms[b] = frobenius_norm(cell.w[b]);
      report.entries.push_back({prefix + kLstmBranchNames[b], norms[b]});
    }
    if (!report.ratios.present) {
      auto mean_of = [&](std::initializer_list<LstmBranch> branches) {
        double sum = 0.0;
        for (LstmBranch b : branches) sum += norms[b];
        return sum / static_cast<double>(branches.size());
      };
      NormRatios& r = report.ratios;
      r.present = true;
      r.cell_mean = mean_of({kCi, kCf, kCo});
      r.input_mean = mean_of({kXi, kXf, kXc, kXo});
      r.hidden_mean = mean_of({kHi, kHf, kHc, kHo});
      r.cell_over_input = r.cell_mean / r.input_mean;
      r.cell_over_hidden = r.cell_mean / r.hidden_mean;
      r.input_over_hidden = r.input_mean / r.hidden_mean;
    }
  }
  return report;
}

std::string render_norm_report(const NormReport& report) {
  std::ostringstream os;
  os << "frobenius norms\n";
  for (const auto& e : report.entries) {
    os << "  " << e.name << " = " << format_g6(e.frobenius) << '\n';
  }
  if (report.ratios.present) {
    const NormRatios& r = report.ratios;
    os << "group means: cell(peephole) " << format_g6(r.cell_mean) << ", input "
       << format_g6(r.input_mean) << ", hidden " << format_g6(r.hidden_mean) << '\n';
    os << "group ratios: cell/input " << format_g6(r.cell_over_input) << ", cell/hidden "
       << format_g6(r.cell_over_hidden) << ", input/hidden " << format_g6(r.input_over_hidden)
       << '\n';
  }
  return os.str();
}

}  // namespace stabnet
