#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stabnet/layers.hpp"

namespace stabnet {

// SGD with classical momentum:
//   v <- mu*v - lr*grad
//   theta <- theta + v
// Velocity buffers mirror every parameter, betas included. With mu = 0
// the velocity path reduces bitwise to theta <- theta - lr*grad.
struct SgdState {
  double lr = 0.0;
  double momentum = 0.0;
  bool update_betas = true;  // false freezes every beta at its current value
  NetGrads velocity;
};

SgdState make_sgd_state(const Network& net, double lr, double momentum);

/// One update over every parameter in the network. Betas move like any
/// other parameter except under mode None, where they are pinned at 0.
/// Shared-beta equality is re-asserted after the step. Throws on a
/// non-finite gradient, naming the offending parameter.
void sgd_step(Network& net, const NetGrads& grads, SgdState& state);

// Learning-rate halving keyed to cross-validation loss: any epoch whose
// cv loss is worse than the best seen halves the rate and counts one
// regression; an improvement resets the count. Training stops after
// `patience` consecutive regressions.
enum class ScheduleAction { Continue, Halved, Stop };

struct ScheduleDecision {
  ScheduleAction action = ScheduleAction::Continue;
  double lr = 0.0;  // rate in force after this observation
};

struct LrSchedule {
  double initial_lr = 0.0;
  double current_lr = 0.0;
  double best_cv = 0.0;
  bool has_best = false;
  int regress_count = 0;
  int patience = 0;
  std::vector<std::pair<int, double>> cv_history;  // (epoch, cv_loss)
};

LrSchedule make_schedule(double initial_lr, int patience);

ScheduleDecision observe_cv(LrSchedule& sched, double cv_loss);

const char* to_string(ScheduleAction a);

}  // namespace stabnet
