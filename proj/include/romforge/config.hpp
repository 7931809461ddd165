#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "romforge/galerkin.hpp"
#include "romforge/mlp.hpp"
#include "romforge/newton.hpp"
#include "romforge/snapshots.hpp"

namespace romforge::cfg {

// One JSON document drives every pipeline stage.  Artifacts record the hash
// of the canonical (defaults-merged, key-sorted) document minus the execution
// knobs (threads, output_dir); stages refuse to mix artifacts produced under
// different configurations.
struct RunConfig {
  std::uint64_t seed = 2024;
  int threads = 1;
  std::string output_dir = "romforge_out";

  // fem
  int nx = 40, ny = 10;
  double length = 2.0, height = 1.25;
  double youngs_modulus = 5.0e4, poisson_ratio = 0.40;
  fem::NewtonConfig newton;

  // sampling
  int train_count = 500, val_count = 125, test_count = 50;
  snap::ParamBox box;
  fem::LoadParams mu_res{0.0, 0.0};
  std::uint64_t halton_start = 1;
  int extrap_count = 50;
  double extrap_band = 500.0;
  std::uint64_t extrap_seed = 77;

  // svd
  int n = 6, n_bar = 54;

  // ann
  std::vector<int> hidden{200, 200};
  ann::AdamWConfig adamw;

  // training
  int batch_size = 16;
  double lr_min = 1e-6;
  int checkpoint_every = 0;
  int sloss_epochs = 800;
  double sloss_lr0 = 1e-3;
  int rloss_epochs = 200;
  double rloss_lr0 = 1e-4;
  int qloss_epochs = 800;
  double qloss_lr0 = 1e-3;

  // rom
  rom::RomConfig rom;

  // eval
  std::vector<int> grid_n{6, 10, 14, 18, 20};
  int total_modes = 60;
  struct NetVariant {
    std::vector<int> hidden;
    int batch_size = 16;
  };
  int appendix_c_n = 14;
  int appendix_c_epochs = 200;
  std::vector<NetVariant> appendix_c_variants;

  // bench
  int bench_batch_reps = 20;
  int bench_naive_reps = 2;
  std::vector<int> bench_pod_sizes{18, 40};
  int bench_loads = 5;

  nlohmann::json canonical;  // merged, key-sorted document
  std::uint64_t hash = 0;
};

nlohmann::json default_config_json();

// Strictly validates `overrides` against the default schema (unknown fields
// and type mismatches raise ConfigError with the field path), merges it over
// the defaults, range-checks, and computes the hash.
RunConfig parse_config(const nlohmann::json& overrides);

RunConfig load_config_file(const std::string& path);
RunConfig default_config();

}  // namespace romforge::cfg
