#include "romforge/experiments.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "romforge/util.hpp"

namespace romforge::eval {

namespace {

std::string metric_notes(const MetricResult& mu, const MetricResult& mr) {
  const int excluded = mu.excluded + mr.excluded;
  if (excluded == 0) return {};
  char buf[48];
  std::snprintf(buf, sizeof(buf), "excluded=%d", excluded);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  return os;
}

}  // namespace

void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path) {
  auto os = open_out(path);
  os << "model,n,nbar,mode,e_u,e_R,n_samples,mean_iter,notes\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%d,%d,%s,%.17g,%.17g,%d,%.4f,", r.n, r.n_bar,
                  r.mode.c_str(), r.e_u, r.e_r, r.n_samples, r.mean_iter);
    os << r.model << buf << r.notes << "\n";
  }
  if (!os) throw IoError("failed writing " + path);
}

ReportRow evaluate_reconstruction(const std::string& tag, const rom::PromAnnManifold& m,
                                  const fem::ResidualModel& model,
                                  const snap::SnapshotSet& test, int threads) {
  const Mat U_hat = rom::reconstruct_batch(m, test.U_star, threads);
  const MetricResult mu = metric_e_u(U_hat, test.U_star);
  const MetricResult mr = metric_e_r(model, U_hat, test.U_star, test.mu_res, threads);
  return ReportRow{tag,      m.reduced_dim(),  m.bases.n_bar(),
                   "reconstruction", mu.value, mr.value,
                   static_cast<int>(test.count()), 0.0, metric_notes(mu, mr)};
}

ReportRow evaluate_pod_reconstruction(const pod::RomBases& bases,
                                      const fem::ResidualModel& model,
                                      const snap::SnapshotSet& test, int threads) {
  Mat U_hat(test.U_star.rows(), test.U_star.cols());
  util::parallel_for(0, static_cast<int>(test.count()), threads, [&](int j) {
    U_hat.col(j) = pod::project_primary(bases, test.U_star.col(j));
  });
  const MetricResult mu = metric_e_u(U_hat, test.U_star);
  const MetricResult mr = metric_e_r(model, U_hat, test.U_star, test.mu_res, threads);
  return ReportRow{"pod",    bases.n(), 0,
                   "reconstruction", mu.value, mr.value,
                   static_cast<int>(test.count()), 0.0, metric_notes(mu, mr)};
}

namespace {

// Shared tail of the two online-solve evaluations: run `solve` per test
// parameter, drop failures, aggregate metrics over the survivors.
template <typename SolveFn>
ReportRow rom_row(const std::string& tag, int n, int n_bar,
                  const fem::ResidualModel& model, const snap::SnapshotSet& test,
                  int threads, SolveFn&& solve) {
  const int count = static_cast<int>(test.count());
  Mat U_hat(test.U_star.rows(), count);
  std::vector<int> iterations(static_cast<std::size_t>(count), 0);
  std::vector<char> ok(static_cast<std::size_t>(count), 0);

  util::parallel_for(0, count, threads, [&](int j) {
    try {
      rom::RomResult r = solve(test.params[static_cast<std::size_t>(j)]);
      U_hat.col(j) = r.u;
      iterations[static_cast<std::size_t>(j)] = r.total_iterations;
      ok[static_cast<std::size_t>(j)] = 1;
    } catch (const ConvergenceError&) {
    } catch (const DegenerateStateError&) {
    }
  });

  int kept = 0;
  long iter_sum = 0;
  Mat U_ok(test.U_star.rows(), count), T_ok(test.U_star.rows(), count);
  for (int j = 0; j < count; ++j) {
    if (!ok[static_cast<std::size_t>(j)]) continue;
    U_ok.col(kept) = U_hat.col(j);
    T_ok.col(kept) = test.U_star.col(j);
    iter_sum += iterations[static_cast<std::size_t>(j)];
    ++kept;
  }

  ReportRow row{tag, n, n_bar, "rom", 0.0, 0.0, count, 0.0, ""};
  const int failed = count - kept;
  if (kept == 0) {
    row.e_u = row.e_r = std::numeric_limits<double>::quiet_NaN();
    row.notes = "all solves failed";
    return row;
  }
  U_ok.conservativeResize(Eigen::NoChange, kept);
  T_ok.conservativeResize(Eigen::NoChange, kept);
  const MetricResult mu = metric_e_u(U_ok, T_ok);
  const MetricResult mr = metric_e_r(model, U_ok, T_ok, test.mu_res, threads);
  row.e_u = mu.value;
  row.e_r = mr.value;
  row.mean_iter = static_cast<double>(iter_sum) / kept;
  std::string notes = metric_notes(mu, mr);
  if (failed > 0) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "failed=%d", failed);
    notes = notes.empty() ? buf : notes + ";" + buf;
  }
  row.notes = notes;
  return row;
}

}  // namespace

ReportRow evaluate_rom(const std::string& tag, const rom::PromAnnManifold& m,
                       const fem::ResidualModel& model, const snap::SnapshotSet& test,
                       const rom::RomConfig& cfg, int threads) {
  return rom_row(tag, m.reduced_dim(), m.bases.n_bar(), model, test, threads,
                 [&](const fem::LoadParams& load) {
                   return rom::rom_solve(m, model, load, cfg);
                 });
}

ReportRow evaluate_pod_rom(const pod::RomBases& bases, const fem::ResidualModel& model,
                           const snap::SnapshotSet& test, const rom::RomConfig& cfg,
                           int threads) {
  return rom_row("pod", bases.n(), 0, model, test, threads,
                 [&](const fem::LoadParams& load) {
                   return rom::pod_rom_solve(bases.phi, model, load, cfg);
                 });
}

// ---- runtime benchmarks -----------------------------------------------------

BatchTimings benchmark_training_batches(const rom::PromAnnManifold& m,
                                        const fem::ResidualModel& model,
                                        const snap::SnapshotSet& train, int batch_size,
                                        int reps, int naive_reps) {
  if (batch_size < 1 || batch_size > train.count())
    throw ConfigError("benchmark batch size out of range");
  if (reps < 1 || naive_reps < 1) throw ConfigError("benchmark reps must be >= 1");
  if (!(m.bases.e_pod_d > 0.0) || !(m.bases.e_pod_r > 0.0))
    throw ConfigError("bases are missing the projection-error normalizers");

  const train::EncodedSet enc = train::encode_dataset(m, train.U_star, 1);
  std::vector<int> idx(static_cast<std::size_t>(batch_size));
  std::iota(idx.begin(), idx.end(), 0);
  const double e_d = m.bases.e_pod_d;
  const double e_r = m.bases.e_pod_r;

  const auto snapshot_pass = [&] {
    train::BatchWork work = train::reconstruct_work(m, train.U_star, enc, idx, 1);
    (void)train::data_loss(work, e_d);
    (void)train::combined_gradient(m, work, 1.0, 0.0, e_d, e_r);
  };
  const auto residual_pass = [&] {
    train::BatchWork work = train::reconstruct_work(m, train.U_star, enc, idx, 1);
    (void)train::residual_loss_and_cotangents(work, model, train.R_star, train.mu_res,
                                              e_r, true, 1);
    (void)train::combined_gradient(m, work, 0.0, 1.0, e_d, e_r);
  };
  const auto naive_pass = [&] {
    train::BatchWork work = train::reconstruct_work(m, train.U_star, enc, idx, 1);
    (void)train::residual_loss_and_cotangents(work, model, train.R_star, train.mu_res,
                                              e_r, true, 1);
    (void)train::naive_residual_gradient(m, work, 1.0, e_r);
  };

  BatchTimings t;
  t.batch_size = batch_size;
  t.reps = reps;
  t.naive_reps = naive_reps;

  snapshot_pass();  // warm up allocators and page in the dataset
  util::Stopwatch watch;
  for (int i = 0; i < reps; ++i) snapshot_pass();
  t.snapshot_s = watch.seconds() / reps;

  residual_pass();
  watch.reset();
  for (int i = 0; i < reps; ++i) residual_pass();
  t.residual_opt_s = watch.seconds() / reps;

  watch.reset();
  for (int i = 0; i < naive_reps; ++i) naive_pass();
  t.residual_naive_s = watch.seconds() / naive_reps;
  return t;
}

void write_batch_timings_csv(const BatchTimings& t, const std::string& path) {
  auto os = open_out(path);
  os << "path,seconds_per_batch,batch_size,reps\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "snapshot,%.9g,%d,%d\n", t.snapshot_s, t.batch_size,
                t.reps);
  os << buf;
  std::snprintf(buf, sizeof(buf), "residual_optimized,%.9g,%d,%d\n", t.residual_opt_s,
                t.batch_size, t.reps);
  os << buf;
  std::snprintf(buf, sizeof(buf), "residual_naive,%.9g,%d,%d\n", t.residual_naive_s,
                t.batch_size, t.naive_reps);
  os << buf;
  if (!os) throw IoError("failed writing " + path);
}

namespace {

template <typename SolveFn>
SolverTimingRow timed_rom_rows(const std::string& model_tag, int q_size,
                               const std::vector<fem::LoadParams>& loads,
                               SolveFn&& solve) {
  rom::RomStats stats;
  SolverTimingRow row;
  row.model = model_tag;
  row.q_size = q_size;
  row.loads = static_cast<int>(loads.size());
  for (const auto& load : loads) {
    try {
      solve(load, &stats);
    } catch (const ConvergenceError&) {
      ++row.failures;
    } catch (const DegenerateStateError&) {
      ++row.failures;
    }
  }
  row.solves = stats.reduced_solves;
  if (stats.reduced_solves > 0)
    row.mean_system_solve_s = stats.reduced_solve_seconds / stats.reduced_solves;
  if (stats.w_evals > 0) row.mean_w_s = stats.w_seconds / stats.w_evals;
  if (stats.assemblies > 0)
    row.mean_assembly_s = stats.assembly_seconds / stats.assemblies;
  return row;
}

}  // namespace

SolverTimingRow benchmark_manifold_solver(const rom::PromAnnManifold& m,
                                          const fem::ResidualModel& model,
                                          const std::vector<fem::LoadParams>& loads,
                                          const rom::RomConfig& cfg) {
  return timed_rom_rows("promann", m.reduced_dim(), loads,
                        [&](const fem::LoadParams& load, rom::RomStats* stats) {
                          rom::rom_solve(m, model, load, cfg, stats);
                        });
}

SolverTimingRow benchmark_pod_solver(const Mat& phi, const fem::ResidualModel& model,
                                     const std::vector<fem::LoadParams>& loads,
                                     const rom::RomConfig& cfg) {
  return timed_rom_rows("pod", static_cast<int>(phi.cols()), loads,
                        [&](const fem::LoadParams& load, rom::RomStats* stats) {
                          rom::pod_rom_solve(phi, model, load, cfg, stats);
                        });
}

SolverTimingRow benchmark_fom_solver(const fem::ResidualModel& model,
                                     const std::vector<fem::LoadParams>& loads,
                                     const fem::NewtonConfig& cfg) {
  fem::SolveStats stats;
  SolverTimingRow row;
  row.model = "fom";
  row.q_size = model.dof_count();
  row.loads = static_cast<int>(loads.size());
  for (const auto& load : loads) {
    try {
      fem::solve_fom(model, load, cfg, &stats);
    } catch (const ConvergenceError&) {
      ++row.failures;
    } catch (const DegenerateStateError&) {
      ++row.failures;
    }
  }
  row.solves = stats.system_solves;
  if (stats.system_solves > 0)
    row.mean_system_solve_s = stats.system_solve_seconds / stats.system_solves;
  if (stats.assemblies > 0)
    row.mean_assembly_s = stats.assembly_seconds / stats.assemblies;
  return row;
}

void write_solver_timings_csv(const std::vector<SolverTimingRow>& rows,
                              const std::string& path) {
  auto os = open_out(path);
  os << "model,q_size,mean_system_solve_s,mean_w_s,mean_assembly_s,solves,loads,"
        "failures\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%ld,%d,%d\n",
                  r.model.c_str(), r.q_size, r.mean_system_solve_s, r.mean_w_s,
                  r.mean_assembly_s, r.solves, r.loads, r.failures);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path);
}

// ---- extrapolation ----------------------------------------------------------

ExtrapolationRow evaluate_extrapolation(const std::string& tag,
                                        const rom::PromAnnManifold& m,
                                        const snap::SnapshotSet& band_set,
                                        int threads) {
  const Mat U_hat = rom::reconstruct_batch(m, band_set.U_star, threads);
  const MetricResult mu = metric_e_u(U_hat, band_set.U_star);
  return ExtrapolationRow{tag, m.reduced_dim(), mu.value,
                          static_cast<int>(band_set.count())};
}

void write_extrapolation_csv(const std::vector<ExtrapolationRow>& rows,
                             const std::string& path) {
  auto os = open_out(path);
  os << "model,n,e_u,n_samples\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%d\n", r.model.c_str(), r.n, r.e_u,
                  r.n_samples);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace romforge::eval
