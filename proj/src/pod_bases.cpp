#include "romforge/pod_bases.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "romforge/util.hpp"

namespace romforge::pod {

namespace {

constexpr char kMagic[4] = {'R', 'O', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

SvdFactors compute_svd(const Mat& snapshots) {
  if (snapshots.size() == 0) throw ConfigError("cannot take SVD of an empty matrix");
  Eigen::BDCSVD<Mat> svd(snapshots, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdFactors{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

RomBases build_bases(const SvdFactors& svd, int n, int n_bar,
                     std::uint64_t sample_count) {
  if (n < 1 || n_bar < 1) throw ConfigError("need n >= 1 and n_bar >= 1");
  if (sample_count == 0) throw ConfigError("sample count must be positive");
  const int avail = static_cast<int>(svd.U.cols());
  if (n + n_bar > avail)
    throw ConfigError("n + n_bar = " + std::to_string(n + n_bar) +
                      " exceeds the " + std::to_string(avail) + " available modes");
  const double sigma1 = svd.sigma[0];
  const double sigma_last = svd.sigma[n + n_bar - 1];
  if (!(sigma_last > 1e-12 * sigma1)) {
    char ratio[32];
    std::snprintf(ratio, sizeof(ratio), "%.3e", sigma_last / sigma1);
    throw ConfigError("mode " + std::to_string(n + n_bar) +
                      " lies in the numerically rank-deficient tail (sigma ratio " +
                      std::string(ratio) + ")");
  }

  RomBases b;
  b.phi = svd.U.leftCols(n);
  b.phi_bar = svd.U.middleCols(n, n_bar);
  const double root_m = std::sqrt(static_cast<double>(sample_count));
  b.xi = svd.sigma.head(n) / root_m;
  b.xi_bar = svd.sigma.segment(n, n_bar) / root_m;
  b.sample_count = sample_count;
  return b;
}

Vec encode(const RomBases& b, const Vec& u) {
  if (u.size() != b.dofs()) throw ConfigError("encode: state dimension mismatch");
  return (b.phi.transpose() * u).cwiseQuotient(b.xi);
}

Vec decode_linear_part(const RomBases& b, const Vec& q) {
  if (q.size() != b.n()) throw ConfigError("decode: reduced dimension mismatch");
  return b.phi * q.cwiseProduct(b.xi);
}

Vec lift_secondary(const RomBases& b, const Vec& q_bar) {
  if (q_bar.size() != b.n_bar()) throw ConfigError("lift: secondary dimension mismatch");
  return b.phi_bar * q_bar.cwiseProduct(b.xi_bar);
}

Vec project_primary(const RomBases& b, const Vec& u) {
  if (u.size() != b.dofs()) throw ConfigError("project: state dimension mismatch");
  return b.phi * (b.phi.transpose() * u);
}

Mat leading_basis(const RomBases& b, int k) {
  if (k < 1 || k > b.n() + b.n_bar())
    throw ConfigError("leading basis size must lie in [1, n + n_bar]");
  Mat out(b.dofs(), k);
  const int from_phi = std::min(k, b.n());
  out.leftCols(from_phi) = b.phi.leftCols(from_phi);
  if (k > from_phi) out.rightCols(k - from_phi) = b.phi_bar.leftCols(k - from_phi);
  return out;
}

double compute_e_pod_d(const RomBases& b, const Mat& U_star) {
  if (U_star.rows() != b.dofs()) throw ConfigError("snapshot dimension mismatch");
  if (U_star.cols() == 0) throw ConfigError("empty snapshot set");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < U_star.cols(); ++j) {
    const Vec u = U_star.col(j);
    acc += (b.phi * (b.phi.transpose() * u) - u).squaredNorm();
  }
  return acc / (static_cast<double>(U_star.cols()) * static_cast<double>(U_star.rows()));
}

double compute_e_pod_r(const RomBases& b, const fem::ResidualModel& model,
                       const snap::SnapshotSet& train, int threads) {
  if (train.dofs() != b.dofs()) throw ConfigError("snapshot dimension mismatch");
  const Eigen::Index m = train.count();
  if (m == 0) throw ConfigError("empty snapshot set");
  Vec per_sample(m);
  util::parallel_for(0, m, threads, [&](std::int64_t j) {
    const Vec u = train.U_star.col(j);
    const Vec proj = b.phi * (b.phi.transpose() * u);
    per_sample[j] = (model.residual(proj, train.mu_res) - train.R_star.col(j)).squaredNorm();
  });
  double acc = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) acc += per_sample[j];
  return acc / (static_cast<double>(m) * static_cast<double>(train.dofs()));
}

void save_bases(const RomBases& b, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  util::write_pod(os, kVersion);
  util::write_pod(os, static_cast<std::uint64_t>(b.dofs()));
  util::write_pod(os, static_cast<std::uint64_t>(b.n()));
  util::write_pod(os, static_cast<std::uint64_t>(b.n_bar()));
  util::write_pod(os, b.sample_count);
  util::write_doubles(os, b.phi.data(), static_cast<std::size_t>(b.phi.size()));
  util::write_doubles(os, b.phi_bar.data(), static_cast<std::size_t>(b.phi_bar.size()));
  util::write_doubles(os, b.xi.data(), static_cast<std::size_t>(b.xi.size()));
  util::write_doubles(os, b.xi_bar.data(), static_cast<std::size_t>(b.xi_bar.size()));
  util::write_pod(os, b.e_pod_d);
  util::write_pod(os, b.e_pod_r);
  if (!os) throw IoError("write failed: " + path);
}

RomBases load_bases(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open bases file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a bases file (bad magic): " + path);
  const auto version = util::read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw IoError("unsupported bases file version " + std::to_string(version));
  const auto dofs = util::read_pod<std::uint64_t>(is);
  const auto n = util::read_pod<std::uint64_t>(is);
  const auto n_bar = util::read_pod<std::uint64_t>(is);
  RomBases b;
  b.sample_count = util::read_pod<std::uint64_t>(is);
  if (dofs == 0 || n == 0 || n_bar == 0 || b.sample_count == 0)
    throw IoError("bases file has empty dimensions: " + path);
  b.phi.resize(static_cast<Eigen::Index>(dofs), static_cast<Eigen::Index>(n));
  b.phi_bar.resize(static_cast<Eigen::Index>(dofs), static_cast<Eigen::Index>(n_bar));
  b.xi.resize(static_cast<Eigen::Index>(n));
  b.xi_bar.resize(static_cast<Eigen::Index>(n_bar));
  util::read_doubles(is, b.phi.data(), static_cast<std::size_t>(b.phi.size()));
  util::read_doubles(is, b.phi_bar.data(), static_cast<std::size_t>(b.phi_bar.size()));
  util::read_doubles(is, b.xi.data(), static_cast<std::size_t>(b.xi.size()));
  util::read_doubles(is, b.xi_bar.data(), static_cast<std::size_t>(b.xi_bar.size()));
  b.e_pod_d = util::read_pod<double>(is);
  b.e_pod_r = util::read_pod<double>(is);
  return b;
}

}  // namespace romforge::pod
