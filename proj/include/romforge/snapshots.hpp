#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "romforge/fem.hpp"
#include "romforge/newton.hpp"

namespace romforge::snap {

using fem::LoadParams;

// Axis-aligned load-parameter box.
struct ParamBox {
  Vec2 lo{-3000.0, -3000.0};
  Vec2 hi{3000.0, 3000.0};
};

// k-th member of the 2D Halton sequence in bases (2, 3), k >= 1.  The radical
// inverse is accumulated as an exact integer fraction and divided once, so the
// result is the correctly rounded value of the rational number.
Vec2 halton_point(std::uint64_t index);

// Halton points start_index .. start_index+count-1 mapped affinely onto box.
std::vector<LoadParams> sample_parameters(int count, const ParamBox& box,
                                          std::uint64_t start_index = 1);

// Uniform random loads in the closed band of width `band` around box (outside
// it), as used for the extrapolation study.  Deterministic in seed.
std::vector<LoadParams> extrapolation_band_samples(int count, const ParamBox& box,
                                                   double band, std::uint64_t seed);

// Solved states plus their residuals at the fixed residual-loss parameter.
// Columns are samples.
struct SnapshotSet {
  Mat U_star;   // N x M displacements (free dofs)
  Mat R_star;   // N x M residuals evaluated at mu_res
  std::vector<LoadParams> params;
  LoadParams mu_res{0.0, 0.0};

  Eigen::Index dofs() const { return U_star.rows(); }
  Eigen::Index count() const { return U_star.cols(); }
};

struct GenerateReport {
  SnapshotSet set;
  std::vector<int> failed_indices;  // positions in the requested param list
};

// Solves the full-order model for every parameter and tabulates U*, R*.
// Non-converging samples are dropped and reported; more than 10% failures is
// an error.  With threads > 1 samples are solved concurrently; results are
// written into their own columns, so the output is thread-count independent.
GenerateReport generate_dataset(const fem::ResidualModel& model,
                                const std::vector<LoadParams>& params,
                                const LoadParams& mu_res,
                                const fem::NewtonConfig& newton_cfg, int threads = 1);

// Binary snapshot container (magic "ROMF").  Little-endian, column-major
// payloads; save/load round-trips bit-exactly.
void save_snapshots(const SnapshotSet& set, const std::string& path);
SnapshotSet load_snapshots(const std::string& path);

void write_params_csv(const std::vector<LoadParams>& params, const std::string& path);

}  // namespace romforge::snap
