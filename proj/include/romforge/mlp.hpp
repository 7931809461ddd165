#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "romforge/common.hpp"

namespace romforge::ann {

// Bias-free multilayer perceptron: ELU on hidden layers, identity output.
// With no biases, forward(0) == 0 exactly, which the decoder relies on.
struct MlpModel {
  std::vector<int> layer_dims;  // input, hidden..., output
  std::vector<Mat> weights;     // weights[l] has shape dims[l+1] x dims[l]

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
};

inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
inline double elu_deriv(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

// Glorot-uniform init, layer by layer in row-major order from one seeded
// generator; identical seeds give identical weights.
MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed);

Vec forward(const MlpModel& net, const Vec& q);

// d forward / d q, output_dim x input_dim.
Mat input_jacobian(const MlpModel& net, const Vec& q);

struct MlpGradient {
  std::vector<Mat> dW;
};

MlpGradient zero_gradient(const MlpModel& net);

// Gradient wrt all weights of sum_j cot_j . forward(q_j): one reverse sweep
// per sample, accumulated in sample order (thread-count independent callers
// pass per-sample results in a fixed order).
MlpGradient grad_from_cotangents(const MlpModel& net, const std::vector<Vec>& inputs,
                                 const std::vector<Vec>& cotangents);

// ---- optimizer --------------------------------------------------------------

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double weight_decay = 4e-3;
};

struct OptimizerState {
  AdamWConfig cfg;
  double base_lr = 1e-3;
  long step = 0;
  std::vector<Mat> m;  // first moments
  std::vector<Mat> v;  // second moments
};

OptimizerState make_optimizer(const MlpModel& net, const AdamWConfig& cfg,
                              double base_lr);

// Bias-corrected Adam update with decoupled weight decay:
//   w <- w - lr * mhat / (sqrt(vhat) + eps) - lr * weight_decay * w
void adamw_step(OptimizerState& state, MlpModel& net, const MlpGradient& grad,
                double lr);

// ---- learning-rate schedule -------------------------------------------------

struct CosineSchedule {
  double lr0 = 1e-3;
  double lr_min = 1e-6;
  int total_epochs = 800;
};

// Half cosine from lr0 down to lr_min; epoch == total_epochs gives lr_min.
double lr_at_epoch(const CosineSchedule& s, int epoch);

// ---- weight file ------------------------------------------------------------

struct WeightsFile {
  MlpModel net;
  std::uint64_t seed = 0;
  AdamWConfig optimizer;
  double base_lr = 0.0;
};

// JSON with layer dims, row-major weight arrays, activation tag, init seed
// and optimizer snapshot.  Doubles survive the round trip exactly.
void save_weights_json(const WeightsFile& wf, const std::string& path);
WeightsFile load_weights_json(const std::string& path);

}  // namespace romforge::ann
