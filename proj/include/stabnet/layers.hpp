#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "stabnet/tensor.hpp"

namespace stabnet {

enum class Activation { Sigmoid, Relu, Tanh, Linear };

/// Granularity at which beta scale parameters are tied together. Affine
/// layers hold a single linear transform, so every mode except None
/// degenerates to one scalar there; the distinction matters for LSTM
/// cells with their eleven transforms.
enum class StabilizerMode { None, LayerShared, GateShared, Independent };

const char* to_string(Activation a);
const char* to_string(StabilizerMode m);
Activation activation_from_string(const std::string& s);
StabilizerMode stabilizer_from_string(const std::string& s);

Vector activation_apply(Activation a, const Vector& pre);
/// Derivative evaluated at the pre-activation. relu'(0) is 0.
Vector activation_deriv(Activation a, const Vector& pre);

struct SoftmaxXent {
  double loss = 0.0;
  Vector dlogits;
};

/// loss = -log softmax(logits)[label], computed with max subtraction.
/// dlogits = softmax(logits) - onehot(label).
SoftmaxXent softmax_xent(const Vector& logits, int label);

// ---------------------------------------------------------------------------
// Affine layer with a learnable log-scale on the linear transform:
//   pre = e^beta * (W x) + b,   y = activation(pre)
// The bias is not scaled. With mode None, beta is pinned at zero and its
// gradient is reported as zero.
// ---------------------------------------------------------------------------

struct AffineLayer {
  Matrix w;  // out x in
  Vector b;  // out
  double beta = 0.0;
  StabilizerMode mode = StabilizerMode::None;
  Activation activation = Activation::Linear;

  int in_dim() const { return w.cols; }
  int out_dim() const { return w.rows; }
};

AffineLayer make_affine(int in_dim, int out_dim, Activation act, StabilizerMode mode);

struct AffineGrads {
  Matrix dw;
  Vector db;
  double dbeta = 0.0;
};

AffineGrads zero_grads(const AffineLayer& layer);

struct AffineForward {
  Vector y;
  Vector pre;
};

AffineForward affine_forward(const AffineLayer& layer, const Vector& x);

struct AffineBackward {
  Vector dx;
  AffineGrads grads;
};

/// With g = dldy .* activation'(pre):
///   dx = e^beta W^T g,  dW = e^beta g x^T,  db = g,  dbeta = inner(dx, x)
AffineBackward affine_backward(const AffineLayer& layer, const Vector& x, const Vector& pre,
                               const Vector& dldy);

/// Accumulating form used on batches; adds this sample's parameter
/// gradients into acc and writes dx.
void affine_backward_accum(const AffineLayer& layer, const Vector& x, const Vector& pre,
                           const Vector& dldy, AffineGrads& acc, Vector& dx);

// ---------------------------------------------------------------------------
// LSTM cell with one scale parameter per linear transform:
//   i_t = sigmoid(e^b_xi W_xi x_t + e^b_hi W_hi h_{t-1} + e^b_ci W_ci c_{t-1} + b_i)
//   f_t = sigmoid(e^b_xf W_xf x_t + e^b_hf W_hf h_{t-1} + e^b_cf W_cf c_{t-1} + b_f)
//   g_t = tanh   (e^b_xc W_xc x_t + e^b_hc W_hc h_{t-1} + b_c)
//   c_t = f_t .* c_{t-1} + i_t .* g_t
//   o_t = sigmoid(e^b_xo W_xo x_t + e^b_ho W_ho h_{t-1} + e^b_co W_co c_t + b_o)
//   h_t = o_t .* tanh(c_t)
// Note the output-gate peephole reads c_t, the others read c_{t-1}. The
// peepholes are full hidden x hidden matrices.
// ---------------------------------------------------------------------------

enum LstmBranch {
  kXi, kHi, kCi,
  kXf, kHf, kCf,
  kXc, kHc,
  kXo, kHo, kCo,
};
inline constexpr int kLstmBranchCount = 11;
extern const char* const kLstmBranchNames[kLstmBranchCount];
/// Short branch tag without the W_ prefix: "xi", "hi", ...
extern const char* const kLstmBranchTags[kLstmBranchCount];

struct LstmCell {
  int input_dim = 0;
  int hidden_dim = 0;
  StabilizerMode mode = StabilizerMode::None;
  std::array<Matrix, kLstmBranchCount> w;
  std::array<double, kLstmBranchCount> beta{};
  Vector b_i, b_f, b_c, b_o;
};

LstmCell make_lstm(int input_dim, int hidden_dim, StabilizerMode mode);

struct LstmStepCache {
  Vector x, h_prev, c_prev;
  Vector pre_i, pre_f, pre_g, pre_o;  // gate pre-activations
  Vector i, f, g, o;                  // gate outputs; g is the tanh candidate
  Vector c, tanh_c, h;
};

struct LstmStep {
  Vector h;
  Vector c;
  LstmStepCache cache;
};

LstmStep lstm_step(const LstmCell& cell, const Vector& x, const Vector& h_prev,
                   const Vector& c_prev);

struct LstmGrads {
  std::array<Matrix, kLstmBranchCount> dw;
  std::array<double, kLstmBranchCount> dbeta{};
  Vector db_i, db_f, db_c, db_o;
};

LstmGrads zero_grads(const LstmCell& cell);

struct LstmBackward {
  LstmGrads grads;
  std::vector<Vector> dx;  // per timestep
};

/// Full backpropagation through time. dldh[t] is the loss gradient on
/// h_t from outside the recurrence. Per stabilized branch e^b W v:
/// dW accumulates e^b delta v^T and dbeta accumulates
/// inner(e^b W^T delta, v) over timesteps, where delta is the gate
/// pre-activation gradient. Beta gradients come back already reduced
/// according to the cell's sharing mode (each member of a shared group
/// holds the group sum).
LstmBackward lstm_backward(const LstmCell& cell, const std::vector<LstmStepCache>& caches,
                           const std::vector<Vector>& dldh);

void lstm_backward_accum(const LstmCell& cell, const std::vector<LstmStepCache>& caches,
                         const std::vector<Vector>& dldh, LstmGrads& acc,
                         std::vector<Vector>& dx);

/// Branch index groups whose betas move as one parameter under the given
/// mode. None has no trainable betas; GateShared groups by gate
/// {xi,hi,ci} {xf,hf,cf} {xc,hc} {xo,ho,co}; LayerShared ties all eleven.
std::vector<std::vector<int>> beta_groups(StabilizerMode mode);

/// Replace each member's dbeta with its group sum (and zero them all for
/// mode None).
void reduce_beta_grads(StabilizerMode mode, std::array<double, kLstmBranchCount>& dbeta);

/// Re-pin shared betas to their group representative (first member).
void enforce_beta_mode(LstmCell& cell);

// ---------------------------------------------------------------------------
// Network: an ordered list of stages feeding softmax cross-entropy.
// Affine stages apply per frame; LSTM stages run across the sequence.
// A single frame is processed as a one-step sequence.
// ---------------------------------------------------------------------------

using Stage = std::variant<AffineLayer, LstmCell>;
using StageGrads = std::variant<AffineGrads, LstmGrads>;

struct Network {
  std::vector<Stage> stages;

  int input_dim() const;
  int output_dim() const;
  bool has_lstm() const;
};

struct NetGrads {
  std::vector<StageGrads> stages;
};

NetGrads zero_grads(const Network& net);
void scale_grads(NetGrads& g, double alpha);

struct SeqForward {
  struct AffineCache {
    std::vector<Vector> x;    // per frame input
    std::vector<Vector> pre;  // per frame pre-activation
  };
  struct LstmCache {
    std::vector<LstmStepCache> steps;
  };
  std::vector<std::variant<AffineCache, LstmCache>> caches;
  std::vector<Vector> logits;  // per frame
  double loss_sum = 0.0;       // summed over frames
  std::vector<int> predictions;
};

/// Forward over one sequence (frames in order), returning per-frame
/// logits, argmax predictions and the summed cross-entropy.
SeqForward network_forward(const Network& net, const std::vector<Vector>& xs,
                           const std::vector<int>& labels);

/// Gradient of loss_scale * (summed frame losses) accumulated into acc.
void network_backward(const Network& net, const SeqForward& fwd, const std::vector<int>& labels,
                      double loss_scale, NetGrads& acc);

/// Forward without caches; per-frame logits only.
std::vector<Vector> network_predict(const Network& net, const std::vector<Vector>& xs);

/// Initialize every weight matrix uniform(-half_width, half_width) in
/// stage order; biases and betas stay zero.
void init_uniform(Network& net, double half_width, Rng& rng);

}  // namespace stabnet
