#include "romforge/galerkin.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cstdio>
#include <fstream>

#include "romforge/util.hpp"

namespace romforge::rom {

namespace {

std::string singular_message(const Mat& reduced, double norm) {
  Eigen::JacobiSVD<Mat> svd(reduced);
  const Vec& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "singular reduced system (condition estimate %.3g, ||W^T R|| = %.3g)",
                smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity(), norm);
  return buf;
}

}  // namespace

RomResult rom_solve(const PromAnnManifold& m, const fem::ResidualModel& model,
                    const fem::LoadParams& load, const RomConfig& cfg, RomStats* stats) {
  validate_manifold(m);
  if (m.dofs() != model.dof_count())
    throw ConfigError("manifold dimension does not match model");
  if (cfg.load_steps < 1) throw ConfigError("load_steps must be >= 1");
  if (cfg.tolerance <= 0.0) throw ConfigError("rom tolerance must be positive");

  RomResult result;
  Vec q = encode(m, Vec::Zero(model.dof_count()));
  Vec u = decode(m, q);
  const int n = m.reduced_dim();

  for (int step = 1; step <= cfg.load_steps; ++step) {
    const double frac = static_cast<double>(step) / cfg.load_steps;
    const fem::LoadParams mu{load.px * frac, load.py * frac};
    Vec r = model.residual(u, mu);

    int iters = 0;
    for (;;) {
      util::Stopwatch iter_watch;
      util::Stopwatch w_watch;
      const Mat W = decode_jacobian(m, q);
      const double w_ms = w_watch.millis();
      if (stats) {
        stats->w_seconds += w_ms * 1e-3;
        ++stats->w_evals;
      }

      const Vec g = W.transpose() * r;
      const double norm = g.norm();
      if (norm <= cfg.tolerance) {
        result.trace.push_back({step, iters, norm, iter_watch.millis(), 0.0, w_ms});
        result.final_reduced_norm = norm;
        break;
      }
      if (iters >= cfg.max_iter)
        throw RomConvergenceError("rom solve failed at load step " + std::to_string(step) +
                                      ": ||W^T R|| = " + std::to_string(norm),
                                  norm, result.trace, result.u_iterates);

      util::Stopwatch asm_watch;
      const SpMat J = model.jacobian(u, mu);
      if (stats) {
        stats->assembly_seconds += asm_watch.seconds();
        ++stats->assemblies;
      }

      Mat JW(u.size(), n);
      for (int i = 0; i < n; ++i) JW.col(i) = J * W.col(i);
      const Mat A = W.transpose() * JW;

      util::Stopwatch solve_watch;
      Eigen::FullPivLU<Mat> lu(A);
      if (!lu.isInvertible())
        throw RomConvergenceError(singular_message(A, norm), norm, result.trace,
                                  result.u_iterates);
      Vec dq = lu.solve(-g);
      const double solve_ms = solve_watch.millis();
      if (stats) {
        stats->reduced_solve_seconds += solve_ms * 1e-3;
        ++stats->reduced_solves;
      }

      int halvings = 0;
      for (;;) {
        try {
          const Vec q_try = q + dq;
          const Vec u_try = decode(m, q_try);
          r = model.residual(u_try, mu);
          q = q_try;
          u = u_try;
          break;
        } catch (const DegenerateStateError&) {
          if (++halvings > cfg.max_halvings) throw;
          dq *= 0.5;
        }
      }
      if (cfg.record_iterates) result.u_iterates.push_back(u);
      result.trace.push_back({step, iters, norm, iter_watch.millis(), solve_ms, w_ms});
      ++iters;
      ++result.total_iterations;
    }
  }
  result.q = std::move(q);
  result.u = std::move(u);
  return result;
}

RomResult pod_rom_solve(const Mat& phi, const fem::ResidualModel& model,
                        const fem::LoadParams& load, const RomConfig& cfg,
                        RomStats* stats) {
  if (phi.rows() != model.dof_count())
    throw ConfigError("basis dimension does not match model");
  if (phi.cols() < 1) throw ConfigError("basis must have at least one column");
  if (cfg.load_steps < 1) throw ConfigError("load_steps must be >= 1");
  if (cfg.tolerance <= 0.0) throw ConfigError("rom tolerance must be positive");

  RomResult result;
  const int n = static_cast<int>(phi.cols());
  Vec q = Vec::Zero(n);
  Vec u = Vec::Zero(phi.rows());

  for (int step = 1; step <= cfg.load_steps; ++step) {
    const double frac = static_cast<double>(step) / cfg.load_steps;
    const fem::LoadParams mu{load.px * frac, load.py * frac};
    Vec r = model.residual(u, mu);

    int iters = 0;
    for (;;) {
      util::Stopwatch iter_watch;
      const Vec g = phi.transpose() * r;
      const double norm = g.norm();
      if (norm <= cfg.tolerance) {
        result.trace.push_back({step, iters, norm, iter_watch.millis(), 0.0, 0.0});
        result.final_reduced_norm = norm;
        break;
      }
      if (iters >= cfg.max_iter)
        throw RomConvergenceError("pod rom solve failed at load step " +
                                      std::to_string(step) +
                                      ": ||Phi^T R|| = " + std::to_string(norm),
                                  norm, result.trace, result.u_iterates);

      util::Stopwatch asm_watch;
      const SpMat J = model.jacobian(u, mu);
      if (stats) {
        stats->assembly_seconds += asm_watch.seconds();
        ++stats->assemblies;
      }

      Mat JW(u.size(), n);
      for (int i = 0; i < n; ++i) JW.col(i) = J * phi.col(i);
      const Mat A = phi.transpose() * JW;

      util::Stopwatch solve_watch;
      Eigen::FullPivLU<Mat> lu(A);
      if (!lu.isInvertible())
        throw RomConvergenceError(singular_message(A, norm), norm, result.trace,
                                  result.u_iterates);
      Vec dq = lu.solve(-g);
      const double solve_ms = solve_watch.millis();
      if (stats) {
        stats->reduced_solve_seconds += solve_ms * 1e-3;
        ++stats->reduced_solves;
      }

      int halvings = 0;
      for (;;) {
        try {
          const Vec q_try = q + dq;
          const Vec u_try = phi * q_try;
          r = model.residual(u_try, mu);
          q = q_try;
          u = u_try;
          break;
        } catch (const DegenerateStateError&) {
          if (++halvings > cfg.max_halvings) throw;
          dq *= 0.5;
        }
      }
      if (cfg.record_iterates) result.u_iterates.push_back(u);
      result.trace.push_back({step, iters, norm, iter_watch.millis(), solve_ms, 0.0});
      ++iters;
      ++result.total_iterations;
    }
  }
  result.q = std::move(q);
  result.u = std::move(u);
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "step,iter,reduced_residual_norm,wall_ms\n";
  char line[96];
  for (const auto& row : trace) {
    std::snprintf(line, sizeof(line), "%d,%d,%.17g,%.3f\n", row.step, row.iter,
                  row.reduced_residual_norm, row.wall_ms);
    os << line;
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace romforge::rom
