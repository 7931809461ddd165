#pragma once

#include <vector>

#include "romforge/fem.hpp"

namespace romforge::fem {

struct NewtonConfig {
  double tolerance = 1e-9;  // on ||R||_2
  int max_iter = 25;        // per load step
  int load_steps = 5;
  int max_halvings = 10;    // increment backtracking on element inversion
};

// Accumulated timings, used by the runtime benchmark.
struct SolveStats {
  double system_solve_seconds = 0.0;
  long system_solves = 0;
  double assembly_seconds = 0.0;
  long assemblies = 0;
};

struct NewtonResult {
  Vec u;
  double final_residual_norm = 0.0;
  int total_iterations = 0;
  std::vector<int> iterations_per_step;
};

// Incremental-load Newton: the load is ramped in cfg.load_steps equal
// increments; each step iterates until ||R|| <= tolerance.  The convergence
// check runs before any linear solve, so a zero load returns u = 0 with zero
// iterations.  Throws ConvergenceError when iterations run out and
// DegenerateStateError when backtracking cannot rescue an inverted element.
NewtonResult solve_fom(const ResidualModel& model, const LoadParams& load,
                       const NewtonConfig& cfg = {}, SolveStats* stats = nullptr);

}  // namespace romforge::fem
