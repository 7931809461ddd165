#pragma once

#include <string>
#include <vector>

#include "romforge/galerkin.hpp"
#include "romforge/metrics.hpp"
#include "romforge/training.hpp"

namespace romforge::eval {

struct ReportRow {
  std::string model;  // pod | qloss | sloss | rloss
  int n = 0;
  int n_bar = 0;
  std::string mode;  // reconstruction | rom
  double e_u = 0.0;
  double e_r = 0.0;
  int n_samples = 0;
  double mean_iter = 0.0;  // mean online iterations (rom rows)
  std::string notes;
};

void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path);

ReportRow evaluate_reconstruction(const std::string& tag, const rom::PromAnnManifold& m,
                                  const fem::ResidualModel& model,
                                  const snap::SnapshotSet& test, int threads = 1);

// POD baseline: orthogonal projection onto the primary basis.
ReportRow evaluate_pod_reconstruction(const pod::RomBases& bases,
                                      const fem::ResidualModel& model,
                                      const snap::SnapshotSet& test, int threads = 1);

ReportRow evaluate_rom(const std::string& tag, const rom::PromAnnManifold& m,
                       const fem::ResidualModel& model, const snap::SnapshotSet& test,
                       const rom::RomConfig& cfg, int threads = 1);

ReportRow evaluate_pod_rom(const pod::RomBases& bases, const fem::ResidualModel& model,
                           const snap::SnapshotSet& test, const rom::RomConfig& cfg,
                           int threads = 1);

// ---- runtime benchmarks -----------------------------------------------------

struct BatchTimings {
  double snapshot_s = 0.0;        // data-loss batch, cotangent gradient
  double residual_opt_s = 0.0;    // residual-loss batch, cotangent gradient
  double residual_naive_s = 0.0;  // residual-loss batch, materialized Jacobians
  int batch_size = 0;
  int reps = 0;
  int naive_reps = 0;
};

BatchTimings benchmark_training_batches(const rom::PromAnnManifold& m,
                                        const fem::ResidualModel& model,
                                        const snap::SnapshotSet& train, int batch_size,
                                        int reps, int naive_reps);

void write_batch_timings_csv(const BatchTimings& t, const std::string& path);

struct SolverTimingRow {
  std::string model;  // promann | pod | fom
  int q_size = 0;     // reduced dimension; free dof count for fom
  double mean_system_solve_s = 0.0;
  double mean_w_s = 0.0;         // decoder Jacobian recomputation per iteration
  double mean_assembly_s = 0.0;  // residual Jacobian assembly per iteration
  long solves = 0;
  int loads = 0;
  int failures = 0;
};

SolverTimingRow benchmark_manifold_solver(const rom::PromAnnManifold& m,
                                          const fem::ResidualModel& model,
                                          const std::vector<fem::LoadParams>& loads,
                                          const rom::RomConfig& cfg);
SolverTimingRow benchmark_pod_solver(const Mat& phi, const fem::ResidualModel& model,
                                     const std::vector<fem::LoadParams>& loads,
                                     const rom::RomConfig& cfg);
SolverTimingRow benchmark_fom_solver(const fem::ResidualModel& model,
                                     const std::vector<fem::LoadParams>& loads,
                                     const fem::NewtonConfig& cfg);

void write_solver_timings_csv(const std::vector<SolverTimingRow>& rows,
                              const std::string& path);

// ---- extrapolation (out-of-box loads) ---------------------------------------

struct ExtrapolationRow {
  std::string model;
  int n = 0;
  double e_u = 0.0;
  int n_samples = 0;
};

ExtrapolationRow evaluate_extrapolation(const std::string& tag,
                                        const rom::PromAnnManifold& m,
                                        const snap::SnapshotSet& band_set,
                                        int threads = 1);

void write_extrapolation_csv(const std::vector<ExtrapolationRow>& rows,
                             const std::string& path);

}  // namespace romforge::eval
