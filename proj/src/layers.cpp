#include "stabnet/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace stabnet {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void require_dim(int got, int want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch, got " +
                                std::to_string(got) + ", want " + std::to_string(want));
  }
}

void require_finite(const Vector& v, const char* what) {
  if (!all_finite(v)) {
    throw std::invalid_argument(std::string(what) + ": non-finite upstream gradient");
  }
}

}  // namespace

const char* const kLstmBranchNames[kLstmBranchCount] = {
    "W_xi", "W_hi", "W_ci", "W_xf", "W_hf", "W_cf", "W_xc", "W_hc", "W_xo", "W_ho", "W_co",
};

const char* const kLstmBranchTags[kLstmBranchCount] = {
    "xi", "hi", "ci", "xf", "hf", "cf", "xc", "hc", "xo", "ho", "co",
};

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Linear: return "linear";
  }
  return "?";
}

const char* to_string(StabilizerMode m) {
  switch (m) {
    case StabilizerMode::None: return "none";
    case StabilizerMode::LayerShared: return "layer-shared";
    case StabilizerMode::GateShared: return "gate-shared";
    case StabilizerMode::Independent: return "independent";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation: " + s);
}

StabilizerMode stabilizer_from_string(const std::string& s) {
  if (s == "none") return StabilizerMode::None;
  if (s == "layer-shared") return StabilizerMode::LayerShared;
  if (s == "gate-shared") return StabilizerMode::GateShared;
  if (s == "independent") return StabilizerMode::Independent;
  throw std::invalid_argument("unknown stabilizer mode: " + s);
}

Vector activation_apply(Activation a, const Vector& pre) {
  Vector out(pre.dim());
  switch (a) {
    case Activation::Sigmoid:
      for (int i = 0; i < pre.dim(); ++i) out[i] = sigmoid(pre[i]);
      break;
    case Activation::Relu:
      for (int i = 0; i < pre.dim(); ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      break;
    case Activation::Tanh:
      for (int i = 0; i < pre.dim(); ++i) out[i] = std::tanh(pre[i]);
      break;
    case Activation::Linear:
      out = pre;
      break;
  }
  return out;
}

Vector activation_deriv(Activation a, const Vector& pre) {
  Vector out(pre.dim());
  switch (a) {
    case Activation::Sigmoid:
      for (int i = 0; i < pre.dim(); ++i) {
        double s = sigmoid(pre[i]);
        out[i] = s * (1.0 - s);
      }
      break;
    case Activation::Relu:
      for (int i = 0; i < pre.dim(); ++i) out[i] = pre[i] > 0.0 ? 1.0 : 0.0;
      break;
    case Activation::Tanh:
      for (int i = 0; i < pre.dim(); ++i) {
        double t = std::tanh(pre[i]);
        out[i] = 1.0 - t * t;
      }
      break;
    case Activation::Linear:
      for (int i = 0; i < pre.dim(); ++i) out[i] = 1.0;
      break;
  }
  return out;
}

SoftmaxXent softmax_xent(const Vector& logits, int label) {
  if (label < 0 || label >= logits.dim()) {
    throw std::invalid_argument("softmax_xent: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.dim()) + " classes");
  }
  double m = logits[0];
  for (int i = 1; i < logits.dim(); ++i) m = std::max(m, logits[i]);
  double sum = 0.0;
  Vector p(logits.dim());
  for (int i = 0; i < logits.dim(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  SoftmaxXent out;
  out.loss = std::log(sum) - (logits[label] - m);
  out.dlogits = Vector(logits.dim());
  for (int i = 0; i < logits.dim(); ++i) out.dlogits[i] = p[i] / sum;
  out.dlogits[label] -= 1.0;
  return out;
}

// --------------------------------------------------------------------------
// Affine
// --------------------------------------------------------------------------

AffineLayer make_affine(int in_dim, int out_dim, Activation act, StabilizerMode mode) {
  AffineLayer layer;
  layer.w = Matrix(out_dim, in_dim);
  layer.b = Vector(out_dim);
  layer.beta = 0.0;
  layer.mode = mode;
  layer.activation = act;
  return layer;
}

AffineGrads zero_grads(const AffineLayer& layer) {
  AffineGrads g;
  g.dw = Matrix(layer.w.rows, layer.w.cols);
  g.db = Vector(layer.b.dim());
  g.dbeta = 0.0;
  return g;
}

AffineForward affine_forward(const AffineLayer& layer, const Vector& x) {
  require_dim(x.dim(), layer.in_dim(), "affine_forward input");
  const double s = std::exp(layer.beta);
  AffineForward out;
  matvec_into(layer.w, x, out.pre);
  for (int i = 0; i < out.pre.dim(); ++i) out.pre[i] = s * out.pre[i] + layer.b[i];
  out.y = activation_apply(layer.activation, out.pre);
  return out;
}

void affine_backward_accum(const AffineLayer& layer, const Vector& x, const Vector& pre,
                           const Vector& dldy, AffineGrads& acc, Vector& dx) {
  require_dim(x.dim(), layer.in_dim(), "affine_backward input");
  require_dim(dldy.dim(), layer.out_dim(), "affine_backward upstream");
  require_finite(dldy, "affine_backward");

  const double s = std::exp(layer.beta);
  Vector d = activation_deriv(layer.activation, pre);
  Vector g(layer.out_dim());
  for (int i = 0; i < g.dim(); ++i) g[i] = dldy[i] * d[i];

  dx.v.assign(static_cast<size_t>(layer.in_dim()), 0.0);
  matvec_t_add(layer.w, g, s, dx);
  outer_add(acc.dw, s, g, x);
  vec_add(acc.db, 1.0, g);
  if (layer.mode != StabilizerMode::None) {
    acc.dbeta += inner(dx, x);
  }
}

AffineBackward affine_backward(const AffineLayer& layer, const Vector& x, const Vector& pre,
                               const Vector& dldy) {
  AffineBackward out;
  out.grads = zero_grads(layer);
  affine_backward_accum(layer, x, pre, dldy, out.grads, out.dx);
  return out;
}

// --------------------------------------------------------------------------
// LSTM
// --------------------------------------------------------------------------

namespace {

// Input vector kind per branch: 0 = x_t, 1 = h_{t-1}, 2 = c_{t-1}, 3 = c_t.
constexpr int kBranchInput[kLstmBranchCount] = {0, 1, 2, 0, 1, 2, 0, 1, 0, 1, 3};

}  // namespace

LstmCell make_lstm(int input_dim, int hidden_dim, StabilizerMode mode) {
  LstmCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.mode = mode;
  for (int b = 0; b < kLstmBranchCount; ++b) {
    int cols = kBranchInput[b] == 0 ? input_dim : hidden_dim;
    cell.w[b] = Matrix(hidden_dim, cols);
  }
  cell.beta.fill(0.0);
  cell.b_i = Vector(hidden_dim);
  cell.b_f = Vector(hidden_dim);
  cell.b_c = Vector(hidden_dim);
  cell.b_o = Vector(hidden_dim);
  return cell;
}

LstmGrads zero_grads(const LstmCell& cell) {
  LstmGrads g;
  for (int b = 0; b < kLstmBranchCount; ++b) {
    g.dw[b] = Matrix(cell.w[b].rows, cell.w[b].cols);
  }
  g.dbeta.fill(0.0);
  g.db_i = Vector(cell.hidden_dim);
  g.db_f = Vector(cell.hidden_dim);
  g.db_c = Vector(cell.hidden_dim);
  g.db_o = Vector(cell.hidden_dim);
  return g;
}

LstmStep lstm_step(const LstmCell& cell, const Vector& x, const Vector& h_prev,
                   const Vector& c_prev) {
  require_dim(x.dim(), cell.input_dim, "lstm_step input");
  require_dim(h_prev.dim(), cell.hidden_dim, "lstm_step h_prev");
  require_dim(c_prev.dim(), cell.hidden_dim, "lstm_step c_prev");

  const int n = cell.hidden_dim;
  std::array<double, kLstmBranchCount> eb;
  for (int b = 0; b < kLstmBranchCount; ++b) eb[b] = std::exp(cell.beta[b]);

  LstmStepCache cache;
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;

  Vector tmp;
  auto add_branch = [&](int b, const Vector& v, Vector& pre) {
    matvec_into(cell.w[b], v, tmp);
    for (int k = 0; k < n; ++k) pre[k] += eb[b] * tmp[k];
  };

  cache.pre_i = cell.b_i;
  add_branch(kXi, x, cache.pre_i);
  add_branch(kHi, h_prev, cache.pre_i);
  add_branch(kCi, c_prev, cache.pre_i);
  cache.i = activation_apply(Activation::Sigmoid, cache.pre_i);

  cache.pre_f = cell.b_f;
  add_branch(kXf, x, cache.pre_f);
  add_branch(kHf, h_prev, cache.pre_f);
  add_branch(kCf, c_prev, cache.pre_f);
  cache.f = activation_apply(Activation::Sigmoid, cache.pre_f);

  cache.pre_g = cell.b_c;
  add_branch(kXc, x, cache.pre_g);
  add_branch(kHc, h_prev, cache.pre_g);
  cache.g = activation_apply(Activation::Tanh, cache.pre_g);

  cache.c = Vector(n);
  for (int k = 0; k < n; ++k) cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];

  cache.pre_o = cell.b_o;
  add_branch(kXo, x, cache.pre_o);
  add_branch(kHo, h_prev, cache.pre_o);
  add_branch(kCo, cache.c, cache.pre_o);
  cache.o = activation_apply(Activation::Sigmoid, cache.pre_o);

  cache.tanh_c = activation_apply(Activation::Tanh, cache.c);
  cache.h = Vector(n);
  for (int k = 0; k < n; ++k) cache.h[k] = cache.o[k] * cache.tanh_c[k];

  LstmStep out;
  out.h = cache.h;
  out.c = cache.c;
  out.cache = std::move(cache);
  return out;
}

void lstm_backward_accum(const LstmCell& cell, const std::vector<LstmStepCache>& caches,
                         const std::vector<Vector>& dldh, LstmGrads& acc,
                         std::vector<Vector>& dx) {
  if (caches.empty()) {
    throw std::invalid_argument("lstm_backward: empty cache sequence");
  }
  if (caches.size() != dldh.size()) {
    throw std::invalid_argument("lstm_backward: " + std::to_string(caches.size()) +
                                " cached steps vs " + std::to_string(dldh.size()) +
                                " upstream gradients");
  }
  const int n = cell.hidden_dim;
  const int steps = static_cast<int>(caches.size());

  std::array<double, kLstmBranchCount> eb;
  for (int b = 0; b < kLstmBranchCount; ++b) eb[b] = std::exp(cell.beta[b]);

  std::array<double, kLstmBranchCount> dbeta_raw{};
  dx.assign(caches.size(), Vector());

  Vector dh_rec(n), dc_rec(n);
  Vector dh(n), dc(n), do_pre(n), di_pre(n), df_pre(n), dg_pre(n);

  // Scaled transpose product of one branch: dbeta takes the inner product
  // with the branch input, the rest flows to the given recipient.
  auto branch_pull = [&](int b, const Vector& delta, const Vector& v, Vector& recipient) {
    Vector pulled(cell.w[b].cols);
    matvec_t_add(cell.w[b], delta, eb[b], pulled);
    dbeta_raw[b] += inner(pulled, v);
    vec_add(recipient, 1.0, pulled);
    outer_add(acc.dw[b], eb[b], delta, v);
  };

  for (int t = steps - 1; t >= 0; --t) {
    const LstmStepCache& s = caches[t];
    require_dim(dldh[t].dim(), n, "lstm_backward upstream");
    require_finite(dldh[t], "lstm_backward");

    for (int k = 0; k < n; ++k) dh[k] = dldh[t][k] + dh_rec[k];

    // Output gate, then cell gradient including the same-step peephole.
    for (int k = 0; k < n; ++k) {
      do_pre[k] = dh[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
      dc[k] = dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_rec[k];
    }
    {
      Vector pulled(n);
      matvec_t_add(cell.w[kCo], do_pre, eb[kCo], pulled);
      dbeta_raw[kCo] += inner(pulled, s.c);
      vec_add(dc, 1.0, pulled);
      outer_add(acc.dw[kCo], eb[kCo], do_pre, s.c);
    }

    for (int k = 0; k < n; ++k) {
      di_pre[k] = dc[k] * s.g[k] * s.i[k] * (1.0 - s.i[k]);
      df_pre[k] = dc[k] * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
      dg_pre[k] = dc[k] * s.i[k] * (1.0 - s.g[k] * s.g[k]);
    }

    // Recurrent gradients for step t-1.
    for (int k = 0; k < n; ++k) dc_rec[k] = dc[k] * s.f[k];
    branch_pull(kCi, di_pre, s.c_prev, dc_rec);
    branch_pull(kCf, df_pre, s.c_prev, dc_rec);

    dh_rec.v.assign(static_cast<size_t>(n), 0.0);
    branch_pull(kHi, di_pre, s.h_prev, dh_rec);
    branch_pull(kHf, df_pre, s.h_prev, dh_rec);
    branch_pull(kHc, dg_pre, s.h_prev, dh_rec);
    branch_pull(kHo, do_pre, s.h_prev, dh_rec);

    dx[t] = Vector(cell.input_dim);
    branch_pull(kXi, di_pre, s.x, dx[t]);
    branch_pull(kXf, df_pre, s.x, dx[t]);
    branch_pull(kXc, dg_pre, s.x, dx[t]);
    branch_pull(kXo, do_pre, s.x, dx[t]);

    vec_add(acc.db_i, 1.0, di_pre);
    vec_add(acc.db_f, 1.0, df_pre);
    vec_add(acc.db_c, 1.0, dg_pre);
    vec_add(acc.db_o, 1.0, do_pre);
  }

  reduce_beta_grads(cell.mode, dbeta_raw);
  for (int b = 0; b < kLstmBranchCount; ++b) acc.dbeta[b] += dbeta_raw[b];
}

LstmBackward lstm_backward(const LstmCell& cell, const std::vector<LstmStepCache>& caches,
                           const std::vector<Vector>& dldh) {
  LstmBackward out;
  out.grads = zero_grads(cell);
  lstm_backward_accum(cell, caches, dldh, out.grads, out.dx);
  return out;
}

std::vector<std::vector<int>> beta_groups(StabilizerMode mode) {
  switch (mode) {
    case StabilizerMode::None:
      return {};
    case StabilizerMode::Independent: {
      std::vector<std::vector<int>> groups;
      for (int b = 0; b < kLstmBranchCount; ++b) groups.push_back({b});
      return groups;
    }
    case StabilizerMode::GateShared:
      return {{kXi, kHi, kCi}, {kXf, kHf, kCf}, {kXc, kHc}, {kXo, kHo, kCo}};
    case StabilizerMode::LayerShared:
      return {{kXi, kHi, kCi, kXf, kHf, kCf, kXc, kHc, kXo, kHo, kCo}};
  }
  return {};
}

void reduce_beta_grads(StabilizerMode mode, std::array<double, kLstmBranchCount>& dbeta) {
  if (mode == StabilizerMode::None) {
    dbeta.fill(0.0);
    return;
  }
  for (const auto& group : beta_groups(mode)) {
    double sum = 0.0;
    for (int b : group) sum += dbeta[b];
    for (int b : group) dbeta[b] = sum;
  }
}

void enforce_beta_mode(LstmCell& cell) {
  if (cell.mode == StabilizerMode::None) {
    cell.beta.fill(0.0);
    return;
  }
  for (const auto& group : beta_groups(cell.mode)) {
    for (int b : group) cell.beta[b] = cell.beta[group[0]];
  }
}

// --------------------------------------------------------------------------
// Network
// --------------------------------------------------------------------------

int Network::input_dim() const {
  if (stages.empty()) throw std::invalid_argument("network has no stages");
  if (const auto* a = std::get_if<AffineLayer>(&stages.front())) return a->in_dim();
  return std::get<LstmCell>(stages.front()).input_dim;
}

int Network::output_dim() const {
  if (stages.empty()) throw std::invalid_argument("network has no stages");
  if (const auto* a = std::get_if<AffineLayer>(&stages.back())) return a->out_dim();
  return std::get<LstmCell>(stages.back()).hidden_dim;
}

bool Network::has_lstm() const {
  for (const auto& s : stages) {
    if (std::holds_alternative<LstmCell>(s)) return true;
  }
  return false;
}

NetGrads zero_grads(const Network& net) {
  NetGrads g;
  g.stages.reserve(net.stages.size());
  for (const auto& s : net.stages) {
    if (const auto* a = std::get_if<AffineLayer>(&s)) {
      g.stages.emplace_back(zero_grads(*a));
    } else {
      g.stages.emplace_back(zero_grads(std::get<LstmCell>(s)));
    }
  }
  return g;
}

void scale_grads(NetGrads& g, double alpha) {
  for (auto& sg : g.stages) {
    if (auto* ag = std::get_if<AffineGrads>(&sg)) {
      for (double& v : ag->dw.a) v *= alpha;
      for (double& v : ag->db.v) v *= alpha;
      ag->dbeta *= alpha;
    } else {
      auto& lg = std::get<LstmGrads>(sg);
      for (auto& m : lg.dw) {
        for (double& v : m.a) v *= alpha;
      }
      for (double& v : lg.dbeta) v *= alpha;
      for (double& v : lg.db_i.v) v *= alpha;
      for (double& v : lg.db_f.v) v *= alpha;
      for (double& v : lg.db_c.v) v *= alpha;
      for (double& v : lg.db_o.v) v *= alpha;
    }
  }
}

SeqForward network_forward(const Network& net, const std::vector<Vector>& xs,
                           const std::vector<int>& labels) {
  if (net.stages.empty()) throw std::invalid_argument("network has no stages");
  if (xs.size() != labels.size()) {
    throw std::invalid_argument("network_forward: " + std::to_string(xs.size()) + " frames vs " +
                                std::to_string(labels.size()) + " labels");
  }
  SeqForward fwd;
  fwd.caches.reserve(net.stages.size());

  std::vector<Vector> cur = xs;
  for (const auto& stage : net.stages) {
    if (const auto* layer = std::get_if<AffineLayer>(&stage)) {
      SeqForward::AffineCache cache;
      cache.x = cur;
      cache.pre.resize(cur.size());
      for (size_t t = 0; t < cur.size(); ++t) {
        AffineForward f = affine_forward(*layer, cur[t]);
        cache.pre[t] = std::move(f.pre);
        cur[t] = std::move(f.y);
      }
      fwd.caches.emplace_back(std::move(cache));
    } else {
      const auto& cell = std::get<LstmCell>(stage);
      SeqForward::LstmCache cache;
      cache.steps.reserve(cur.size());
      Vector h(cell.hidden_dim), c(cell.hidden_dim);
      for (size_t t = 0; t < cur.size(); ++t) {
        LstmStep step = lstm_step(cell, cur[t], h, c);
        h = step.h;
        c = step.c;
        cur[t] = std::move(step.h);
        cache.steps.push_back(std::move(step.cache));
      }
      fwd.caches.emplace_back(std::move(cache));
    }
  }

  fwd.logits = std::move(cur);
  fwd.predictions.resize(fwd.logits.size());
  for (size_t t = 0; t < fwd.logits.size(); ++t) {
    SoftmaxXent sx = softmax_xent(fwd.logits[t], labels[t]);
    fwd.loss_sum += sx.loss;
    int best = 0;
    for (int k = 1; k < fwd.logits[t].dim(); ++k) {
      if (fwd.logits[t][k] > fwd.logits[t][best]) best = k;
    }
    fwd.predictions[t] = best;
  }
  return fwd;
}

void network_backward(const Network& net, const SeqForward& fwd, const std::vector<int>& labels,
                      double loss_scale, NetGrads& acc) {
  if (acc.stages.size() != net.stages.size()) {
    throw std::invalid_argument("network_backward: gradient accumulator stage count mismatch");
  }
  std::vector<Vector> d(fwd.logits.size());
  for (size_t t = 0; t < fwd.logits.size(); ++t) {
    SoftmaxXent sx = softmax_xent(fwd.logits[t], labels[t]);
    d[t] = std::move(sx.dlogits);
    for (int k = 0; k < d[t].dim(); ++k) d[t][k] *= loss_scale;
  }

  for (int si = static_cast<int>(net.stages.size()) - 1; si >= 0; --si) {
    if (const auto* layer = std::get_if<AffineLayer>(&net.stages[si])) {
      const auto& cache = std::get<SeqForward::AffineCache>(fwd.caches[si]);
      auto& grads = std::get<AffineGrads>(acc.stages[si]);
      Vector dx;
      for (size_t t = 0; t < d.size(); ++t) {
        affine_backward_accum(*layer, cache.x[t], cache.pre[t], d[t], grads, dx);
        d[t] = std::move(dx);
      }
    } else {
      const auto& cell = std::get<LstmCell>(net.stages[si]);
      const auto& cache = std::get<SeqForward::LstmCache>(fwd.caches[si]);
      auto& grads = std::get<LstmGrads>(acc.stages[si]);
      std::vector<Vector> dx;
      lstm_backward_accum(cell, cache.steps, d, grads, dx);
      d = std::move(dx);
    }
  }
}

std::vector<Vector> network_predict(const Network& net, const std::vector<Vector>& xs) {
  std::vector<Vector> cur = xs;
  for (const auto& stage : net.stages) {
    if (const auto* layer = std::get_if<AffineLayer>(&stage)) {
      for (auto& v : cur) v = affine_forward(*layer, v).y;
    } else {
      const auto& cell = std::get<LstmCell>(stage);
      Vector h(cell.hidden_dim), c(cell.hidden_dim);
      for (auto& v : cur) {
        LstmStep step = lstm_step(cell, v, h, c);
        h = step.h;
        c = std::move(step.c);
        v = std::move(step.h);
      }
    }
  }
  return cur;
}

void init_uniform(Network& net, double half_width, Rng& rng) {
  for (auto& stage : net.stages) {
    if (auto* layer = std::get_if<AffineLayer>(&stage)) {
      layer->w = uniform_init(layer->w.rows, layer->w.cols, half_width, rng);
    } else {
      auto& cell = std::get<LstmCell>(stage);
      for (auto& w : cell.w) w = uniform_init(w.rows, w.cols, half_width, rng);
    }
  }
}

}  // namespace stabnet
