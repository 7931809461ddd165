#pragma once

#include <string>
#include <vector>

#include "romforge/manifold.hpp"
#include "romforge/newton.hpp"

namespace romforge::rom {

struct RomConfig {
  double tolerance = 1e-8;  // on the reduced residual ||W^T R||_2
  int max_iter = 25;        // per load step
  int load_steps = 5;
  int max_halvings = 10;
  bool record_iterates = false;  // keep u after every accepted update
};

struct TraceRow {
  int step;
  int iter;
  double reduced_residual_norm;
  double wall_ms;   // whole iteration
  double solve_ms;  // reduced dense solve
  double w_ms;      // decoder Jacobian recomputation
};

struct RomStats {
  double reduced_solve_seconds = 0.0;
  long reduced_solves = 0;
  double w_seconds = 0.0;
  long w_evals = 0;
  double assembly_seconds = 0.0;
  long assemblies = 0;
};

struct RomResult {
  Vec q;
  Vec u;
  int total_iterations = 0;
  double final_reduced_norm = 0.0;
  std::vector<TraceRow> trace;
  std::vector<Vec> u_iterates;  // filled when cfg.record_iterates
};

// Non-convergence carries the trace collected so far.
struct RomConvergenceError : ConvergenceError {
  std::vector<TraceRow> trace;
  std::vector<Vec> u_iterates;
  RomConvergenceError(const std::string& what, double last_norm,
                      std::vector<TraceRow> t, std::vector<Vec> iters)
      : ConvergenceError(what, last_norm), trace(std::move(t)),
        u_iterates(std::move(iters)) {}
};

// Galerkin solve on the nonlinear manifold: per iteration W = d decode/dq at
// the current q, reduced system (W^T J W) dq = -W^T R, J W formed as n sparse
// matrix-vector products.  The load ramps over cfg.load_steps; q starts at
// encode(0).  Convergence is checked before each solve.
RomResult rom_solve(const PromAnnManifold& m, const fem::ResidualModel& model,
                    const fem::LoadParams& load, const RomConfig& cfg = {},
                    RomStats* stats = nullptr);

// Independent plain-POD Galerkin solver with the fixed basis phi.  Written as
// its own loop on purpose: it is the cross-check twin of rom_solve with a
// zero-weight network, not a special case of it.
RomResult pod_rom_solve(const Mat& phi, const fem::ResidualModel& model,
                        const fem::LoadParams& load, const RomConfig& cfg = {},
                        RomStats* stats = nullptr);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace romforge::rom
