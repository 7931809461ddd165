#pragma once

#include <random>
#include <string>
#include <vector>

#include "romforge/manifold.hpp"
#include "romforge/snapshots.hpp"

namespace romforge::train {

// q_loss: reduced-space loss of the unscaled formulation (original variant).
// s_loss: snapshot (data) loss on the scaled manifold.
// r_loss: residual loss at the fixed parameter mu_res (warm start required).
enum class LossMode { q_loss, s_loss, r_loss };

std::string loss_mode_name(LossMode mode);
LossMode loss_mode_from_name(const std::string& name);

struct TrainConfig {
  LossMode mode = LossMode::s_loss;
  double omega_d = 1.0;  // weight of the data loss
  double omega_r = 0.0;  // weight of the residual loss
  int epochs = 800;
  int batch_size = 16;
  double lr0 = 1e-3;
  double lr_min = 1e-6;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // 0 = no periodic checkpoints
  std::string checkpoint_dir;
  int threads = 1;
  ann::AdamWConfig adamw;
};

// Encoder outputs for every column, computed once: q the network inputs,
// q_bar the reduced secondary targets of the compact losses.
struct EncodedSet {
  std::vector<Vec> q;
  std::vector<Vec> q_bar;
};

EncodedSet encode_dataset(const rom::PromAnnManifold& m, const Mat& U, int threads = 1);

// Per-sample working vectors of one batch.  e_d doubles as the data-loss
// cotangent; v_r = e_r^T dR/du is the residual-loss cotangent.
struct BatchWork {
  std::vector<int> idx;
  std::vector<Vec> q;    // encoder outputs
  std::vector<Vec> u;    // decoded predictions
  std::vector<Vec> e_d;  // u_j - u*_j
  std::vector<Vec> e_r;  // R(u_j; mu_res) - R*_j
  std::vector<Vec> v_r;  // e_r^T dR/du at u_j

  int size() const { return static_cast<int>(idx.size()); }
};

BatchWork reconstruct_work(const rom::PromAnnManifold& m, const Mat& U_star,
                           const EncodedSet& enc, const std::vector<int>& indices,
                           int threads = 1);

// (1/(m N e_pod_d)) sum ||u_j - u*_j||^2
double data_loss(const BatchWork& work, double e_pod_d);

// (1/(m N e_pod_r)) sum ||R(u_j) - R*_j||^2; fills e_r (and v_r when
// with_cotangents) in work.  Element inversion inside a residual assembly is
// rethrown as DegenerateStateError tagged with the sample index.
double residual_loss_and_cotangents(BatchWork& work, const fem::ResidualModel& model,
                                    const Mat& R_star, const fem::LoadParams& mu_res,
                                    double e_pod_r, bool with_cotangents = true,
                                    int threads = 1);

// Reduced-space data loss.  scaled:  (1/(m N)) sum ||Xi_bar (N(q*) - q_bar*)||^2
//                           original: (1/m)    sum ||q_bar* - N(q*)||^2
double compact_q_loss(const rom::PromAnnManifold& m, const EncodedSet& enc,
                      const std::vector<int>& indices);
ann::MlpGradient compact_q_gradient(const rom::PromAnnManifold& m, const EncodedSet& enc,
                                    const std::vector<int>& indices);

// Gradient of omega_d L_d + omega_r L_r via one reverse sweep per sample:
// the full-space cotangent (2/(m N)) (omega_d/e_pod_d e_d + omega_r/e_pod_r v_r)
// enters the network through the secondary lift.
ann::MlpGradient combined_gradient(const rom::PromAnnManifold& m, const BatchWork& work,
                                   double omega_d, double omega_r, double e_pod_d,
                                   double e_pod_r);

// Same residual gradient, computed the expensive way: materializes each
// sample's full parameter Jacobian d u_j / d theta before contracting with
// the cotangent.  Kept as the benchmark and cross-check twin of the
// cotangent path.
ann::MlpGradient naive_residual_gradient(const rom::PromAnnManifold& m,
                                         const BatchWork& work, double omega_r,
                                         double e_pod_r);

struct HistoryRow {
  int epoch;
  double lr;
  double train_loss;
  double val_loss;
  double wall_ms;
};

struct TrainResult {
  rom::PromAnnManifold manifold;  // weights of the best validation epoch
  std::vector<HistoryRow> history;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  double best_val_data_loss = 0.0;      // data loss of the returned weights
  double best_val_residual_loss = -1.0;  // residual loss (r_loss mode), else -1
};

// AdamW + half-cosine schedule over shuffled minibatches; one history row per
// epoch; the best-validation weights are retained and returned.  `model` is
// required for r_loss and may be null otherwise.
TrainResult train(const rom::PromAnnManifold& init, const fem::ResidualModel* model,
                  const snap::SnapshotSet& train_set, const snap::SnapshotSet& val_set,
                  const TrainConfig& cfg);

// In-place Fisher-Yates shuffle driven by the given engine.
void fisher_yates(std::vector<int>& perm, std::mt19937_64& rng);

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

}  // namespace romforge::train
