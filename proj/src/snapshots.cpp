#include "romforge/snapshots.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <random>

#include "romforge/util.hpp"

namespace romforge::snap {

namespace {

constexpr char kMagic[4] = {'R', 'O', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  // digits of index in `base`, least significant first, mirrored across the
  // radix point:  value = sum_k d_k b^-(k+1) = num / den with exact integers.
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  while (index > 0) {
    num = num * base + index % base;
    den *= base;
    index /= base;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Vec2 halton_point(std::uint64_t index) {
  if (index == 0) throw ConfigError("halton index starts at 1");
  return Vec2(radical_inverse(index, 2), radical_inverse(index, 3));
}

std::vector<LoadParams> sample_parameters(int count, const ParamBox& box,
                                          std::uint64_t start_index) {
  if (count < 0) throw ConfigError("sample count must be non-negative");
  if (start_index == 0) throw ConfigError("halton start index starts at 1");
  if ((box.hi - box.lo).minCoeff() < 0.0) throw ConfigError("parameter box is inverted");
  std::vector<LoadParams> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const Vec2 h = halton_point(start_index + static_cast<std::uint64_t>(k));
    out.push_back({box.lo.x() + h.x() * (box.hi.x() - box.lo.x()),
                   box.lo.y() + h.y() * (box.hi.y() - box.lo.y())});
  }
  return out;
}

std::vector<LoadParams> extrapolation_band_samples(int count, const ParamBox& box,
                                                   double band, std::uint64_t seed) {
  if (band <= 0.0) throw ConfigError("extrapolation band width must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dx(box.lo.x() - band, box.hi.x() + band);
  std::uniform_real_distribution<double> dy(box.lo.y() - band, box.hi.y() + band);
  std::vector<LoadParams> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    const double px = dx(rng);
    const double py = dy(rng);
    const bool inside = px >= box.lo.x() && px <= box.hi.x() &&  //
                        py >= box.lo.y() && py <= box.hi.y();
    if (!inside) out.push_back({px, py});
  }
  return out;
}

GenerateReport generate_dataset(const fem::ResidualModel& model,
                                const std::vector<LoadParams>& params,
                                const LoadParams& mu_res,
                                const fem::NewtonConfig& newton_cfg, int threads) {
  const int m = static_cast<int>(params.size());
  const int n = model.dof_count();

  Mat U(n, m);
  std::vector<char> ok(static_cast<std::size_t>(m), 0);
  util::parallel_for(0, m, threads, [&](std::int64_t j) {
    try {
      const auto sol = fem::solve_fom(model, params[static_cast<std::size_t>(j)], newton_cfg);
      U.col(j) = sol.u;
      ok[static_cast<std::size_t>(j)] = 1;
    } catch (const ConvergenceError&) {
    } catch (const DegenerateStateError&) {
    }
  });

  GenerateReport report;
  for (int j = 0; j < m; ++j)
    if (!ok[static_cast<std::size_t>(j)]) report.failed_indices.push_back(j);

  const int kept = m - static_cast<int>(report.failed_indices.size());
  if (m > 0 && kept * 10 < m * 9)
    throw ConvergenceError("more than 10% of snapshot solves failed (" +
                               std::to_string(report.failed_indices.size()) + " of " +
                               std::to_string(m) + ")",
                           0.0);

  SnapshotSet& set = report.set;
  set.mu_res = mu_res;
  set.U_star.resize(n, kept);
  set.R_star.resize(n, kept);
  set.params.reserve(static_cast<std::size_t>(kept));
  int col = 0;
  for (int j = 0; j < m; ++j) {
    if (!ok[static_cast<std::size_t>(j)]) continue;
    set.U_star.col(col) = U.col(j);
    set.params.push_back(params[static_cast<std::size_t>(j)]);
    ++col;
  }
  util::parallel_for(0, kept, threads, [&](std::int64_t j) {
    set.R_star.col(j) = model.residual(set.U_star.col(j), mu_res);
  });
  return report;
}

void save_snapshots(const SnapshotSet& set, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  util::write_pod(os, kVersion);
  util::write_pod(os, static_cast<std::uint64_t>(set.dofs()));
  util::write_pod(os, static_cast<std::uint64_t>(set.count()));
  util::write_pod(os, set.mu_res.px);
  util::write_pod(os, set.mu_res.py);
  util::write_doubles(os, set.U_star.data(), static_cast<std::size_t>(set.U_star.size()));
  util::write_doubles(os, set.R_star.data(), static_cast<std::size_t>(set.R_star.size()));
  for (const auto& p : set.params) {
    util::write_pod(os, p.px);
    util::write_pod(os, p.py);
  }
  if (!os) throw IoError("write failed: " + path);
}

SnapshotSet load_snapshots(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open snapshot file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a snapshot file (bad magic): " + path);
  const auto version = util::read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw IoError("unsupported snapshot file version " + std::to_string(version));
  const auto n = util::read_pod<std::uint64_t>(is);
  const auto m = util::read_pod<std::uint64_t>(is);
  if (n == 0 || m == 0) throw IoError("snapshot file has empty dimensions: " + path);

  SnapshotSet set;
  set.mu_res.px = util::read_pod<double>(is);
  set.mu_res.py = util::read_pod<double>(is);
  set.U_star.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  set.R_star.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  util::read_doubles(is, set.U_star.data(), static_cast<std::size_t>(n * m));
  util::read_doubles(is, set.R_star.data(), static_cast<std::size_t>(n * m));
  set.params.resize(m);
  for (auto& p : set.params) {
    p.px = util::read_pod<double>(is);
    p.py = util::read_pod<double>(is);
  }
  return set;
}

void write_params_csv(const std::vector<LoadParams>& params, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "index,px,py\n";
  char line[96];
  for (std::size_t j = 0; j < params.size(); ++j) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", j, params[j].px, params[j].py);
    os << line;
  }
}

}  // namespace romforge::snap
