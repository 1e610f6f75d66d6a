#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pev/types.hpp"

namespace pev {

/// Fully-connected net: ReLU hidden layers, linear output.
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;

  std::vector<int> layer_dims() const {
    std::vector<int> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output_dim);
    return dims;
  }
};

/// Weights row-major per layer: W[l] is (out x in), b[l] is (out).
struct MlpParams {
  std::vector<MatX> W;
  std::vector<VecX> b;

  int num_layers() const { return static_cast<int>(W.size()); }
  int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
  int output_dim() const { return W.empty() ? 0 : static_cast<int>(W.back().rows()); }
  MlpSpec spec() const;
  std::size_t num_params() const;

  /// Flat parameter view helpers (layer order, W row-major then b).
  void to_flat(VecX& out) const;
  void from_flat(const VecX& flat);
};

/// Gradients (and Adam moments) share the parameter layout.
using MlpGrads = MlpParams;

MlpGrads zeros_like(const MlpParams& params);

/// Orthogonal-style init: scaled orthogonal weight matrices, zero biases.
/// `output_scale` shrinks the final layer (0.01 keeps initial policy outputs
/// near zero).
MlpParams init_mlp(const MlpSpec& spec, Rng& rng, double hidden_gain,
                   double output_scale);

/// Per-layer activations cached by the forward pass for the backward pass.
struct MlpWorkspace {
  std::vector<MatX> acts;      // acts[0] = input, then post-activation
  std::vector<MatX> preacts;   // pre-activation of hidden layers
};

/// Batched forward pass; columns are samples. Pass a workspace to enable a
/// later backward call.
MatX mlp_forward(const MlpParams& params, const MatX& input,
                 MlpWorkspace* ws = nullptr);

/// Accumulates dLoss/dParams into `grads` given dLoss/dOutput; exact
/// reverse-mode differentiation of the forward pass recorded in `ws`.
void mlp_backward(const MlpParams& params, const MlpWorkspace& ws,
                  const MatX& output_grad, MlpGrads& grads);

// ---------------------------------------------------------------------------
// Tanh-squashed diagonal Gaussian over actions in (-1, 1)^n.
// The policy head emits [mean, log_std] stacked; log_std is clamped.
// ---------------------------------------------------------------------------

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhJacobianEps = 1e-6;

struct SquashedGaussian {
  VecX mean;
  VecX log_std;  // clamped to [kLogStdMin, kLogStdMax]

  static SquashedGaussian from_head(const VecX& head);

  /// Draws pre-squash u = mean + std * eps and the squashed action tanh(u).
  void sample(Rng& rng, VecX* u, VecX* action) const;

  /// Log density of action = tanh(u) under the squashed distribution,
  /// evaluated from the stored pre-squash value.
  double log_prob_presquash(const VecX& u) const;

  /// Entropy of the pre-squash Gaussian (squashed entropy has no closed form).
  double entropy() const;
};

double squashed_log_prob(double mean, double log_std, double u);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  MlpGrads m;
  MlpGrads v;
  long step = 0;

  static AdamState init(const MlpParams& params);
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_update(MlpParams& params, const MlpGrads& grads, AdamState& state,
                 const AdamConfig& cfg);

/// Global L2 norm across one or more gradient sets.
double grad_global_norm(const std::vector<const MlpGrads*>& grads);

/// Scales all gradients so the global norm does not exceed max_norm.
void clip_grad_norm(std::vector<MlpGrads*> grads, double max_norm);

// ---------------------------------------------------------------------------
// Checkpoint I/O: versioned header (layer shapes) + little-endian doubles.
// Round trips are bit-exact.
// ---------------------------------------------------------------------------

void save_mlp(std::ostream& os, const MlpParams& params);
MlpParams load_mlp(std::istream& is);
void save_mlp_file(const std::string& path, const MlpParams& params);
MlpParams load_mlp_file(const std::string& path);

}  // namespace pev
