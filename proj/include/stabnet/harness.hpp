#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stabnet/data.hpp"
#include "stabnet/layers.hpp"
#include "stabnet/optim.hpp"

namespace stabnet {

// Experiment orchestration: single runs, learning-rate sweeps over both
// stabilizer arms, sensitivity summaries, and norm diagnostics. Every
// number a run produces is a pure function of (config, seed); wall time
// is reported to the terminal only, never written to CSV, so repeated
// runs emit byte-identical files.

struct ModelSpec {
  std::string kind = "dnn";  // "dnn" or "lstm"
  int hidden_width = 32;
  int hidden_depth = 3;  // hidden affine layers for dnn; lstm is 1 cell
  Activation activation = Activation::Sigmoid;  // dnn hidden activation
  StabilizerMode mode = StabilizerMode::Independent;
  bool stabilize_output = true;  // the classifier layer gets a beta too
};

struct DatasetSpec {
  std::string kind = "gaussian-frames";  // or "delayed-recall"
  uint64_t seed = 7;
  // gaussian-frames
  int num_classes = 4;
  int feature_dim = 8;
  int n = 2000;
  double class_separation = 3.0;
  double noise_sigma = 1.0;
  // delayed-recall
  int seq_len = 12;
  int delay = 2;
  int alphabet = 4;
};

struct TrainConfig {
  ModelSpec model;
  DatasetSpec data;
  double initial_lr = 0.1;
  double momentum = 0.9;
  int batch_size = 32;  // frames for frame data, sequences for sequence data
  int max_epochs = 50;
  int patience = 3;
  double cv_fraction = 0.2;
  uint64_t seed = 1;  // weight init and epoch shuffling
  double init_half_width = 0.1;
  bool freeze_betas = false;  // keep betas at their init, for A/B runs
};

/// Parse a config JSON file. Keys mirror the field names above, with
/// "model" and "data" as nested objects. Unknown keys are rejected.
TrainConfig parse_config_file(const std::string& path);
TrainConfig parse_config_text(const std::string& text, const std::string& origin);
void validate(const TrainConfig& cfg);

/// Hidden stages per the model spec, then a linear classifier layer.
/// Weights are drawn uniform(-init_half_width, init_half_width) in stage
/// order except the classifier, which starts at zero so an untrained
/// K-class model scores CE = ln K.
Network build_network(const ModelSpec& spec, int input_dim, int num_classes, double half_width,
                      Rng& rng);

struct EpochRow {
  int epoch = 0;
  double lr = 0.0;  // rate in force during this epoch
  double train_ce = 0.0;
  double cv_ce = 0.0;
  double cv_acc = 0.0;
};

struct TrainRecord {
  std::vector<EpochRow> epochs;  // row 0 is the untrained evaluation
  std::string stop_reason;       // converged | early-stop | max-epochs | diverged
  bool failed = false;
  std::string fail_reason;
  int final_epoch = 0;
  double final_cv_ce = 0.0;
  double final_cv_acc = 0.0;
  double wall_seconds = 0.0;  // terminal display only, never exported
};

struct TrainResult {
  TrainRecord record;
  Network model;
};

/// One full training run: generate data, split, init, then epochs of
/// shuffled mini-batch SGD with cv-driven halving. Divergence (non-finite
/// loss or gradient) ends the run as a failed record, not an exception.
TrainResult train(const TrainConfig& cfg);

struct EvalMetrics {
  double ce = 0.0;
  double acc = 0.0;
};

EvalMetrics evaluate(const Network& net, const FrameDataset& data);
EvalMetrics evaluate(const Network& net, const SequenceDataset& data);

// One sweep cell result, flat enough for CSV. stabilizer is 0 or 1.
struct SweepRow {
  double init_lr = 0.0;
  int stabilizer = 0;
  uint64_t seed = 0;
  double final_cv_ce = 0.0;
  double final_frame_acc = 0.0;
  int epochs = 0;
  std::string stop_reason;
};

struct SweepResult {
  std::vector<SweepRow> rows;          // ordered: lr desc, arm, seed
  std::vector<TrainRecord> records;    // parallel to rows
};

/// Every (lr, arm, seed) cell trained independently from the base
/// config, varying nothing else. The off arm forces StabilizerMode::None;
/// the on arm keeps the configured mode (Independent if the base says
/// None). Failed cells are recorded and the sweep continues.
SweepResult sweep(const TrainConfig& base, const std::vector<double>& lr_grid,
                  const std::vector<uint64_t>& seeds);

/// Grids by model family: sigmoid dnn {0.8, 0.1, 0.01}; relu dnn
/// {0.8, 0.1, 0.0125, 0.0016}; lstm {0.1, 0.04, 0.005, 0.0006}.
std::vector<double> default_lr_grid(const ModelSpec& spec);

struct ArmSummary {
  int stabilizer = 0;
  std::vector<std::pair<uint64_t, double>> per_seed_spread;  // seeds with >= 2 finished cells
  double mean_spread = 0.0;
  double best_ce = 0.0;
  double worst_ce = 0.0;
  int n_cells = 0;
  int n_failed = 0;
  bool comparable = false;  // at least one seed had >= 2 finished cells
};

struct SensitivitySummary {
  ArmSummary arms[2];  // [0] without stabilizer, [1] with
};

/// Per arm and seed: spread = max - min of final cv CE over the lr grid,
/// failed cells excluded but counted.
SensitivitySummary summarize(const std::vector<SweepRow>& rows);

// CSV export: fixed column order, header row, floats at 6 significant
// digits. Reading a file back and re-exporting reproduces it byte for
// byte.
std::string format_g6(double v);
void save_train_csv(const TrainRecord& record, const std::string& path);
void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
std::vector<SweepRow> load_sweep_csv(const std::string& path);
void save_summary_csv(const SensitivitySummary& summary, const std::string& path);
std::string render_summary(const SensitivitySummary& summary);

// Frobenius norms of every weight matrix, with the lstm branch matrices
// grouped into cell (peephole), input, and hidden sets and their mean
// norms compared pairwise.
struct NormEntry {
  std::string name;
  double frobenius = 0.0;
};

struct NormRatios {
  bool present = false;  // a full lstm stage was found
  double cell_mean = 0.0;
  double input_mean = 0.0;
  double hidden_mean = 0.0;
  double cell_over_input = 0.0;
  double cell_over_hidden = 0.0;
  double input_over_hidden = 0.0;
};

struct NormReport {
  std::vector<NormEntry> entries;
  NormRatios ratios;
};

NormReport norm_report(const Network& net);
std::string render_norm_report(const NormReport& report);

}  // namespace stabnet
