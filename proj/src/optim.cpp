#include "stabnet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace stabnet {

namespace {

void require_grad_finite(const Matrix& g, const std::string& name) {
  if (!all_finite(g)) {
    throw std::runtime_error("sgd_step: non-finite gradient for " + name);
  }
}

void require_grad_finite(const Vector& g, const std::string& name) {
  if (!all_finite(g)) {
    throw std::runtime_error("sgd_step: non-finite gradient for " + name);
  }
}

void require_grad_finite(double g, const std::string& name) {
  if (!std::isfinite(g)) {
    throw std::runtime_error("sgd_step: non-finite gradient for " + name);
  }
}

// v <- mu*v - lr*g; theta <- theta + v. Written so that mu = 0 gives
// exactly theta - lr*g (0.0*v is exact, the add order never changes).
void momentum_update(double& theta, double& v, double g, double lr, double mu) {
  v = mu * v - lr * g;
  theta += v;
}

void momentum_update(Vector& theta, Vector& v, const Vector& g, double lr, double mu) {
  for (int i = 0; i < theta.dim(); ++i) momentum_update(theta[i], v[i], g[i], lr, mu);
}

void momentum_update(Matrix& theta, Matrix& v, const Matrix& g, double lr, double mu) {
  for (size_t i = 0; i < theta.a.size(); ++i) momentum_update(theta.a[i], v.a[i], g.a[i], lr, mu);
}

}  // namespace

SgdState make_sgd_state(const Network& net, double lr, double momentum) {
  if (!(lr > 0.0)) {
    throw std::invalid_argument("sgd: learning rate must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
  }
  SgdState state;
  state.lr = lr;
  state.momentum = momentum;
  state.velocity = zero_grads(net);
  return state;
}

void sgd_step(Network& net, const NetGrads& grads, SgdState& state) {
  if (grads.stages.size() != net.stages.size() ||
      state.velocity.stages.size() != net.stages.size()) {
    throw std::invalid_argument("sgd_step: stage count mismatch");
  }
  const double lr = state.lr;
  const double mu = state.momentum;

  for (size_t si = 0; si < net.stages.size(); ++si) {
    const std::string prefix = "stage" + std::to_string(si) + ".";
    if (auto* layer = std::get_if<AffineLayer>(&net.stages[si])) {
      const auto& g = std::get<AffineGrads>(grads.stages[si]);
      auto& v = std::get<AffineGrads>(state.velocity.stages[si]);
      require_grad_finite(g.dw, prefix + "W");
      require_grad_finite(g.db, prefix + "b");
      require_grad_finite(g.dbeta, prefix + "beta");
      momentum_update(layer->w, v.dw, g.dw, lr, mu);
      momentum_update(layer->b, v.db, g.db, lr, mu);
      if (layer->mode != StabilizerMode::None && state.update_betas) {
        momentum_update(layer->beta, v.dbeta, g.dbeta, lr, mu);
      }
    } else {
      auto& cell = std::get<LstmCell>(net.stages[si]);
      const auto& g = std::get<LstmGrads>(grads.stages[si]);
      auto& v = std::get<LstmGrads>(state.velocity.stages[si]);
      for (int b = 0; b < kLstmBranchCount; ++b) {
        require_grad_finite(g.dw[b], prefix + kLstmBranchNames[b]);
        require_grad_finite(g.dbeta[b], prefix + "beta_" + kLstmBranchTags[b]);
      }
      require_grad_finite(g.db_i, prefix + "b_i");
      require_grad_finite(g.db_f, prefix + "b_f");
      require_grad_finite(g.db_c, prefix + "b_c");
      require_grad_finite(g.db_o, prefix + "b_o");
      for (int b = 0; b < kLstmBranchCount; ++b) {
        momentum_update(cell.w[b], v.dw[b], g.dw[b], lr, mu);
      }
      momentum_update(cell.b_i, v.db_i, g.db_i, lr, mu);
      momentum_update(cell.b_f, v.db_f, g.db_f, lr, mu);
      momentum_update(cell.b_c, v.db_c, g.db_c, lr, mu);
      momentum_update(cell.b_o, v.db_o, g.db_o, lr, mu);
      if (cell.mode != StabilizerMode::None && state.update_betas) {
        for (int b = 0; b < kLstmBranchCount; ++b) {
          momentum_update(cell.beta[b], v.dbeta[b], g.dbeta[b], lr, mu);
        }
        // Shared groups see identical grads and velocities, so members
        // stay equal; re-pin anyway so drift can never creep in.
        enforce_beta_mode(cell);
      }
    }
  }
}

LrSchedule make_schedule(double initial_lr, int patience) {
  if (!(initial_lr > 0.0)) {
    throw std::invalid_argument("schedule: initial learning rate must be positive");
  }
  if (patience < 1) {
    throw std::invalid_argument("schedule: patience must be at least 1");
  }
  LrSchedule s;
  s.initial_lr = initial_lr;
  s.current_lr = initial_lr;
  s.patience = patience;
  return s;
}

ScheduleDecision observe_cv(LrSchedule& sched, double cv_loss) {
  if (!std::isfinite(cv_loss)) {
    throw std::invalid_argument("schedule: non-finite cv loss");
  }
  sched.cv_history.emplace_back(static_cast<int>(sched.cv_history.size()), cv_loss);

  ScheduleDecision out;
  if (sched.has_best && cv_loss > sched.best_cv) {
    sched.current_lr *= 0.5;  // exact in binary floating point
    sched.regress_count += 1;
    out.action =
        sched.regress_count >= sched.patience ? ScheduleAction::Stop : ScheduleAction::Halved;
  } else {
    sched.best_cv = cv_loss;
    sched.has_best = true;
    sched.regress_count = 0;
    out.action = ScheduleAction::Continue;
  }
  out.lr = sched.current_lr;
  return out;
}

const char* to_string(ScheduleAction a) {
  switch (a) {
    case ScheduleAction::Continue: return "continue";
    case ScheduleAction::Halved: return "halved";
    case ScheduleAction::Stop: return "stop";
  }
  return "?";
}

}  // namespace stabnet
