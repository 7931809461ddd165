#pragma once

#include <cstdint>
#include <string>

#include "romforge/common.hpp"
#include "romforge/fem.hpp"
#include "romforge/snapshots.hpp"

namespace romforge::pod {

struct SvdFactors {
  Mat U;      // left singular vectors, thin
  Vec sigma;  // non-increasing
  Mat V;      // right singular vectors, thin
};

// Deterministic thin SVD of the (dense) snapshot matrix.
SvdFactors compute_svd(const Mat& snapshots);

// Primary/secondary POD bases with per-mode scalings xi_i = sigma_i / sqrt(M).
// The scalings bring reduced coordinates of training snapshots to O(1) spread.
struct RomBases {
  Mat phi;      // N x n
  Mat phi_bar;  // N x n_bar
  Vec xi;       // n, positive
  Vec xi_bar;   // n_bar, positive
  double e_pod_d = -1.0;  // mean-square primary projection error, displacements
  double e_pod_r = -1.0;  // same for residuals at mu_res
  std::uint64_t sample_count = 0;  // M behind the 1/sqrt(M) scaling

  int n() const { return static_cast<int>(phi.cols()); }
  int n_bar() const { return static_cast<int>(phi_bar.cols()); }
  Eigen::Index dofs() const { return phi.rows(); }
};

// Slices modes [0, n) and [n, n+n_bar) out of the SVD.  Refuses splits that
// reach into the numerically dead tail (sigma_{n+n_bar} <= 1e-12 sigma_1).
RomBases build_bases(const SvdFactors& svd, int n, int n_bar, std::uint64_t sample_count);

Vec encode(const RomBases& b, const Vec& u);              // Xi^-1 Phi^T u
Vec decode_linear_part(const RomBases& b, const Vec& q);  // Phi Xi q
Vec lift_secondary(const RomBases& b, const Vec& q_bar);  // Phi_bar Xi_bar q_bar
Vec project_primary(const RomBases& b, const Vec& u);     // Phi Phi^T u

// First k columns of [Phi | Phi_bar]: the rank-k POD basis.
Mat leading_basis(const RomBases& b, int k);

// (1/(M N)) sum_j ||Phi Phi^T u*_j - u*_j||^2 over the training columns.
double compute_e_pod_d(const RomBases& b, const Mat& U_star);

// Same, on residuals: (1/(M N)) sum_j ||R(Phi Phi^T u*_j) - R*_j||^2 at mu_res.
double compute_e_pod_r(const RomBases& b, const fem::ResidualModel& model,
                       const snap::SnapshotSet& train, int threads = 1);

// Binary container, magic "ROMB"; round-trips bit-exactly.
void save_bases(const RomBases& b, const std::string& path);
RomBases load_bases(const std::string& path);

}  // namespace romforge::pod
