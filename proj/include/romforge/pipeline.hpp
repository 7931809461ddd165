#pragma once

#include <string>
#include <vector>

#include "romforge/config.hpp"
#include "romforge/experiments.hpp"
#include "romforge/galerkin.hpp"
#include "romforge/manifold.hpp"
#include "romforge/training.hpp"

namespace romforge::pipeline {

// Artifact layout under one output root.  Every stage writes a manifest with
// the config hash it ran under; downstream stages refuse to mix artifacts
// from different configurations (rerun with force=true to rebuild).
struct Paths {
  std::string root;

  std::string mesh_listing() const { return root + "/mesh.txt"; }

  std::string dataset_dir() const { return root + "/dataset"; }
  std::string dataset_manifest() const { return dataset_dir() + "/manifest.json"; }
  std::string snapshots(const std::string& split) const {
    return dataset_dir() + "/" + split + ".snap";
  }
  std::string params_csv(const std::string& split) const {
    return dataset_dir() + "/" + split + "_params.csv";
  }
  std::string extrapolation_manifest() const {
    return dataset_dir() + "/extrapolation_manifest.json";
  }

  std::string bases_dir() const { return root + "/bases"; }
  std::string bases_manifest() const { return bases_dir() + "/manifest.json"; }
  std::string bases_file(int n, int n_bar) const;

  std::string bundles_dir() const { return root + "/bundles"; }
  std::string bundle_dir(const std::string& mode, int n) const;

  std::string rom_dir() const { return root + "/rom"; }
  std::string eval_dir() const { return root + "/eval"; }
  std::string eval_manifest() const { return eval_dir() + "/manifest.json"; }
  std::string bench_dir() const { return root + "/bench"; }
  std::string bench_manifest() const { return bench_dir() + "/manifest.json"; }
};

// Output root precedence: explicit CLI value > ROMFORGE_OUT > config file.
Paths resolve_paths(const cfg::RunConfig& cfg, const std::string& cli_out = "");

fem::Mesh make_mesh(const cfg::RunConfig& cfg);
fem::FemModel make_model(const cfg::RunConfig& cfg);

// Secondary dimension paired with n: the configured n_bar for the configured
// n, otherwise the remainder against the evaluation mode budget.
int paired_n_bar(const cfg::RunConfig& cfg, int n);

// Deterministic per-purpose RNG streams derived from the run seed.
std::uint64_t derive_seed(const cfg::RunConfig& cfg, const std::string& tag);

// ---- stages -----------------------------------------------------------------

void cmd_mesh(const cfg::RunConfig& cfg, const Paths& paths, bool force = false);

// Solves the full-order model on the Halton train/val/test parameter sets and
// stores the three snapshot files.  Reuses existing artifacts when the config
// hash matches.
void cmd_generate(const cfg::RunConfig& cfg, const Paths& paths, bool force = false);

// POD of the training snapshots; writes one bases file per (n, n_bar) pair
// used by the configured run and evaluation grid.
void cmd_svd(const cfg::RunConfig& cfg, const Paths& paths, bool force = false);

// Trains (or reuses) the bundle for the given loss mode and primary dimension.
// warm_dir: bundle to warm-start from; empty lets the residual mode default to
// this run's snapshot-loss bundle at the same n.  Ignored by the other modes.
rom::Bundle cmd_train(const cfg::RunConfig& cfg, const Paths& paths,
                      train::LossMode mode, int n, const std::string& warm_dir = "",
                      bool force = false);

struct RomCommandResult {
  rom::RomResult result;
  std::string solution_csv;
  std::string trace_csv;
  double matched_e_u = -1.0;  // relative error when the load is a test sample
  int matched_sample = -1;
};

// Online solve at one load with the given bundle; writes the nodal solution
// (Dirichlet dofs reinserted) and the iteration trace.
RomCommandResult cmd_rom(const cfg::RunConfig& cfg, const Paths& paths,
                         const std::string& bundle_dir, const fem::LoadParams& load);

struct EvalOptions {
  bool grid = true;        // accuracy table over grid_n
  bool appendix_a = false; // snapshot-loss manifold vs plain POD, subset of grid
  bool appendix_b = false; // reconstruction on out-of-box loads
  bool appendix_c = false; // network size / batch size variants
};

void cmd_eval(const cfg::RunConfig& cfg, const Paths& paths, const EvalOptions& opts,
              bool force = false);

void cmd_bench(const cfg::RunConfig& cfg, const Paths& paths, bool force = false);

// ---- shared plumbing (also used by the test suites) -------------------------

// Loads a split and checks the dataset manifest against the config hash.
snap::SnapshotSet load_split_checked(const cfg::RunConfig& cfg, const Paths& paths,
                                     const std::string& split);

pod::RomBases ensure_bases(const cfg::RunConfig& cfg, const Paths& paths, int n,
                           int n_bar, bool force = false);

rom::Bundle ensure_bundle(const cfg::RunConfig& cfg, const Paths& paths,
                          train::LossMode mode, int n, bool force = false);

// Out-of-box loads solved with the full-order model; built on first use.
snap::SnapshotSet ensure_extrapolation_set(const cfg::RunConfig& cfg,
                                           const Paths& paths, bool force = false);

}  // namespace romforge::pipeline
