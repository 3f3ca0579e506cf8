#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stabnet/layers.hpp"

namespace stabnet {

// Brute-force gradient oracle: central finite differences
//   dL/dtheta ~ (L(theta+eps) - L(theta-eps)) / (2 eps)
// checked against the analytic backward passes. A "slot group" is the
// set of scalar locations that move as one parameter (a shared beta is
// several doubles perturbed together); its finite difference is the
// derivative with respect to the shared value.

/// One named scalar parameter: where it lives (all tied locations) and
/// what the analytic backward pass claims for it.
struct ParamRef {
  std::string name;
  std::vector<double*> slots;
  double analytic = 0.0;
};

struct GradReport {
  double epsilon = 0.0;
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  std::string worst;  // name of the worst-agreeing parameter
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
  int n_checked = 0;
  bool pass = false;
};

/// Central difference of loss_fn with respect to one slot group. All
/// slots are nudged together and restored to their exact old values.
/// Throws if the loss goes non-finite while probing.
double finite_diff(const std::function<double()>& loss_fn, const std::vector<double*>& slots,
                   double epsilon);

/// |a - fd| / max(|a|, |fd|, 1e-8).
double relative_error(double analytic, double fd);

/// Run finite differences over every entry and compare against the
/// recorded analytic values.
GradReport compare_grads(const std::function<double()>& loss_fn, std::vector<ParamRef>& entries,
                         double epsilon, double tolerance);

// Parameter enumeration. Analytic values are copied out of the matching
// grads struct; betas appear only when the mode makes them trainable,
// with shared groups tied into one entry.
std::vector<ParamRef> enumerate_params(AffineLayer& layer, const AffineGrads& grads,
                                       const std::string& prefix);
std::vector<ParamRef> enumerate_params(LstmCell& cell, const LstmGrads& grads,
                                       const std::string& prefix);
std::vector<ParamRef> enumerate_params(Network& net, const NetGrads& grads);

// Checks for one concrete instance. The affine and LSTM variants score
// the linear functional loss L = sum_t inner(u_t, y_t), which makes u_t
// the upstream gradient; they also check the input gradients. The
// network variant scores the real summed softmax cross-entropy.
GradReport check_affine_model(AffineLayer& layer, Vector& x, const Vector& u, double epsilon,
                              double tolerance);
GradReport check_lstm_model(LstmCell& cell, std::vector<Vector>& xs, const std::vector<Vector>& us,
                            double epsilon, double tolerance);
GradReport check_network_model(Network& net, const std::vector<Vector>& xs,
                               const std::vector<int>& labels, double epsilon, double tolerance);

// Randomized drivers used by the CLI and the test suite: desk-scale
// instances (dims <= 8, sequence length <= 5) drawn from `seed`. Relu
// instances are redrawn until every pre-activation clears the kink by a
// margin, since finite differences straddling relu(0) are meaningless.
GradReport check_affine_random(uint64_t seed, StabilizerMode mode, Activation act, double epsilon,
                               double tolerance);
GradReport check_lstm_random(uint64_t seed, StabilizerMode mode, double epsilon, double tolerance);
GradReport check_network_random(uint64_t seed, bool with_lstm, StabilizerMode mode, Activation act,
                                double epsilon, double tolerance);

inline constexpr double kGradcheckEpsilon = 1e-5;
inline constexpr double kAffineTolerance = 1e-5;
inline constexpr double kLstmTolerance = 1e-4;

}  // namespace stabnet
