#include "romforge/newton.hpp"

#include <Eigen/SparseLU>

#include <cstdio>
#include <string>

#include "romforge/util.hpp"

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

}  // namespace

namespace romforge::fem {

NewtonResult solve_fom(const ResidualModel& model, const LoadParams& load,
                       const NewtonConfig& cfg, SolveStats* stats) {
  if (cfg.load_steps < 1) throw ConfigError("load_steps must be >= 1");
  if (cfg.tolerance <= 0.0) throw ConfigError("newton tolerance must be positive");

  NewtonResult result;
  result.u = Vec::Zero(model.dof_count());

  for (int step = 1; step <= cfg.load_steps; ++step) {
    const double frac = static_cast<double>(step) / cfg.load_steps;
    const LoadParams mu{load.px * frac, load.py * frac};

    Vec r = model.residual(result.u, mu);
    double norm = r.norm();
    int iters = 0;
    while (norm > cfg.tolerance) {
      if (iters >= cfg.max_iter)
        throw ConvergenceError("newton failed at load step " + std::to_string(step) +
                                   ": ||R|| = " + sci(norm) + " after " +
                                   std::to_string(iters) + " iterations",
                               norm);

      util::Stopwatch jac_watch;
      const SpMat J = model.jacobian(result.u, mu);
      if (stats) {
        stats->assembly_seconds += jac_watch.seconds();
        ++stats->assemblies;
      }

      util::Stopwatch solve_watch;
      Eigen::SparseLU<SpMat> lu;
      lu.compute(J);
      if (lu.info() != Eigen::Success)
        throw ConvergenceError("singular tangent at load step " + std::to_string(step), norm);
      Vec delta = lu.solve(-r);
      if (stats) {
        stats->system_solve_seconds += solve_watch.seconds();
        ++stats->system_solves;
      }

      // Accept the first (possibly halved) increment that assembles cleanly.
      int halvings = 0;
      for (;;) {
        try {
          const Vec trial = result.u + delta;
          r = model.residual(trial, mu);
          result.u = trial;
          break;
        } catch (const DegenerateStateError&) {
          if (++halvings > cfg.max_halvings) throw;
          delta *= 0.5;
        }
      }
      norm = r.norm();
      ++iters;
    }
    result.iterations_per_step.push_back(iters);
    result.total_iterations += iters;
    result.final_residual_norm = norm;
  }
  return result;
}

}  // namespace romforge::fem
