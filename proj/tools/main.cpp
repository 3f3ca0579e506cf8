// Command line front end. Subcommands:
//   train     fit one model from a JSON config, write csv + checkpoint
//   sweep     grid of initial lr x {stabilizer off, on} x seeds
//   gradcheck finite-difference audit of the backward pass
//   norms     frobenius norms of a saved model's weight matrices
//
// Exit codes: 0 ok, 1 bad input (config, checkpoint, arguments),
// 2 run failure (divergence, a failed check).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stabnet/checkpoint.hpp"
#include "stabnet/gradcheck.hpp"
#include "stabnet/harness.hpp"

namespace fs = std::filesystem;
using namespace stabnet;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

std::string describe_train(const TrainRecord& rec) {
  std::string s;
  s += "stop: " + rec.stop_reason + " after epoch " + std::to_string(rec.final_epoch) + "\n";
  if (rec.failed) {
    s += "failed: " + rec.fail_reason + "\n";
  } else {
    s += "final cv ce " + format_g6(rec.final_cv_ce) + ", cv acc " +
         format_g6(rec.final_cv_acc) + "\n";
  }
  s += "wall " + format_g6(rec.wall_seconds) + "s\n";
  return s;
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  TrainConfig cfg = parse_config_file(config_path);
  fs::create_directories(out_dir);
  TrainResult result = train(cfg);

  save_train_csv(result.record, out_dir + "/train.csv");
  save_network(result.model, out_dir + "/model.ckpt");
  std::string summary = describe_train(result.record);
  write_text(out_dir + "/summary.txt", summary);
  std::fputs(summary.c_str(), stdout);
  return result.record.failed ? 2 : 0;
}

int run_sweep(const std::string& config_path, std::vector<double> grid,
              std::vector<uint64_t> seeds, const std::string& out_dir) {
  TrainConfig cfg = parse_config_file(config_path);
  if (grid.empty()) grid = default_lr_grid(cfg.model);
  if (seeds.empty()) seeds = {1, 2, 3};
  fs::create_directories(out_dir);

  SweepResult result = sweep(cfg, grid, seeds);
  SensitivitySummary summary = summarize(result.rows);

  save_sweep_csv(result.rows, out_dir + "/sweep.csv");
  save_summary_csv(summary, out_dir + "/summary.csv");
  std::string text = render_summary(summary);
  write_text(out_dir + "/summary.txt", text);
  std::fputs(text.c_str(), stdout);
  return 0;  // cell failures are data, not an error of the sweep itself
}

int run_gradcheck(const std::string& layer, const std::string& mode_arg, int seeds, double tol) {
  std::vector<StabilizerMode> modes;
  if (mode_arg.empty()) {
    modes = {StabilizerMode::None, StabilizerMode::LayerShared, StabilizerMode::GateShared,
             StabilizerMode::Independent};
  } else {
    modes = {stabilizer_from_string(mode_arg)};
  }

  int failures = 0;
  auto report_line = [&](const std::string& what, const GradReport& rep) {
    std::printf("%-40s %s  max rel err %.3g at %s (n=%d)\n", what.c_str(),
                rep.pass ? "ok  " : "FAIL", rep.max_rel_err, rep.worst.c_str(), rep.n_checked);
    if (!rep.pass) ++failures;
  };

  for (StabilizerMode mode : modes) {
    for (int s = 0; s < seeds; ++s) {
      uint64_t seed = 1000 + static_cast<uint64_t>(s);
      if (layer == "affine" || layer == "all") {
        for (Activation act : {Activation::Sigmoid, Activation::Relu, Activation::Tanh}) {
          double t = tol > 0 ? tol : kAffineTolerance;
          GradReport rep = check_affine_random(seed, mode, act, kGradcheckEpsilon, t);
          report_line(std::string("affine/") + to_string(act) + "/" + to_string(mode) + "/s" +
                          std::to_string(s),
                      rep);
        }
      }
      if (layer == "lstm" || layer == "all") {
        double t = tol > 0 ? tol : kLstmTolerance;
        GradReport rep = check_lstm_random(seed, mode, kGradcheckEpsilon, t);
        report_line(std::string("lstm/") + to_string(mode) + "/s" + std::to_string(s), rep);
      }
      if (layer == "network" || layer == "all") {
        for (bool with_lstm : {false, true}) {
          double t = tol > 0 ? tol : (with_lstm ? kLstmTolerance : kAffineTolerance);
          GradReport rep = check_network_random(seed, with_lstm, mode, Activation::Tanh,
                                                kGradcheckEpsilon, t);
          report_line(std::string("network/") + (with_lstm ? "lstm" : "dnn") + "/" +
                          to_string(mode) + "/s" + std::to_string(s),
                      rep);
        }
      }
    }
  }
  std::printf("%s\n", failures == 0 ? "all gradient checks passed" : "GRADIENT CHECKS FAILED");
  return failures == 0 ? 0 : 2;
}

int run_norms(const std::string& ckpt_path) {
  Network net = load_network(ckpt_path);
  std::fputs(render_norm_report(norm_report(net)).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learning-rate stabilizer training harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  auto* train_cmd = app.add_subcommand("train", "train one model from a JSON config");
  train_cmd->add_option("--config", config_path, "JSON config file")->required();
  train_cmd->add_option("--out", out_dir, "output directory");

  std::string sweep_config, sweep_out = "out";
  std::vector<double> grid;
  std::vector<uint64_t> seeds;
  auto* sweep_cmd = app.add_subcommand("sweep", "lr grid x stabilizer on/off x seeds");
  sweep_cmd->add_option("--config", sweep_config, "JSON config file")->required();
  sweep_cmd->add_option("--grid", grid, "initial learning rates (default depends on model)");
  sweep_cmd->add_option("--seeds", seeds, "replicate seeds (default 1 2 3)");
  sweep_cmd->add_option("--out", sweep_out, "output directory");

  std::string gc_layer = "all", gc_mode;
  int gc_seeds = 5;
  double gc_tol = 0.0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gc_cmd->add_option("--layer", gc_layer, "affine, lstm, network or all")
      ->check(CLI::IsMember({"affine", "lstm", "network", "all"}));
  gc_cmd->add_option("--mode", gc_mode,
                     "none, layer-shared, gate-shared or independent (default: all four)");
  gc_cmd->add_option("--seeds", gc_seeds, "random instances per case")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--tol", gc_tol, "override relative-error tolerance");

  std::string ckpt_path;
  auto* norms_cmd = app.add_subcommand("norms", "weight matrix norms of a saved model");
  norms_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(config_path, out_dir);
    if (*sweep_cmd) return run_sweep(sweep_config, grid, seeds, sweep_out);
    if (*gc_cmd) return run_gradcheck(gc_layer, gc_mode, gc_seeds, gc_tol);
    if (*norms_cmd) return run_norms(ckpt_path);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
