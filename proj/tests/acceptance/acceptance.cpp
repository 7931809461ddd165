// Acceptance gate for the reduced-order modeling toolkit.  Runs the full
// desk-scale study (40x10 mesh, 675 snapshots, the 6..20 model-size grid)
// end to end and prints one [PASS]/[FAIL] line per criterion; the exit code
// is the number of failures.  Artifacts land under the working directory
// (argv[1], default "acceptance_work") and are reused on rerun as long as
// the configuration hash matches, so only the first run pays for training.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "romforge/config.hpp"
#include "romforge/experiments.hpp"
#include "romforge/fem.hpp"
#include "romforge/galerkin.hpp"
#include "romforge/manifold.hpp"
#include "romforge/metrics.hpp"
#include "romforge/mlp.hpp"
#include "romforge/newton.hpp"
#include "romforge/pipeline.hpp"
#include "romforge/pod_bases.hpp"
#include "romforge/snapshots.hpp"
#include "romforge/spring_chain.hpp"
#include "romforge/training.hpp"
#include "romforge/util.hpp"

using namespace romforge;

namespace {

// ---- pinned gates -----------------------------------------------------------

constexpr double kJacobianFdRelTol = 1e-6;    // assembled vs central differences
constexpr double kVjpRelTol = 1e-12;          // vjp vs explicit transpose
constexpr double kFemBudgetSeconds = 60.0;

constexpr double kSolveResidualTol = 1e-9;    // every stored snapshot re-checked
constexpr double kMirrorTol = 1e-8;           // mirrored loads, max |du|
constexpr double kDatasetBudgetSeconds = 900.0;

constexpr double kEncodeRoundTripRelTol = 1e-10;
constexpr double kPodReconMatchRelTol = 1e-12;  // zero-weight recon == POD error

constexpr double kGradOracleRelTol = 1e-4;    // combined gradient vs differences
constexpr double kCompactGradRelTol = 1e-8;   // full-space vs reduced-space grad

constexpr double kDataAnchorTol = 1e-12;      // zero-weight full-batch losses
constexpr double kResidualAnchorTol = 1e-10;

constexpr double kIterateMatchTol = 1e-10;    // zero-weight manifold vs plain POD

constexpr double kImprovementFactor = 10.0;   // trained vs POD, every grid point
constexpr double kGridBudgetSeconds = 4.0 * 3600.0;

constexpr int kResidualWinsNeeded = 4;        // refined beats base at >= 4 of 5 n
constexpr double kRomCrossoverSlack = 1.1;    // geometric-mean online accuracy

constexpr double kBatchSpeedupFactor = 10.0;  // cotangent vs materialized path
constexpr double kSolveSpeedupFactor = 50.0;  // reduced (n=6) vs full system solve

constexpr double kExtrapolationCeiling = 1e-1;
constexpr int kExtrapolationStrictN = 14;
constexpr double kVariantLossCeiling = 1.0;

// ---- reporting --------------------------------------------------------------

int g_failures = 0;

struct GateFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw GateFailure(message);
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

void gate(int number, const std::string& label, const std::function<std::string()>& body) {
  try {
    const std::string detail = body();
    std::printf("[PASS] %2d %s (%s)\n", number, label.c_str(), detail.c_str());
  } catch (const std::exception& e) {
    ++g_failures;
    std::printf("[FAIL] %2d %s -- %s\n", number, label.c_str(), e.what());
  }
  std::fflush(stdout);
}

void info(const std::string& line) { std::printf("       %s\n", line.c_str()); }

// ---- small helpers ----------------------------------------------------------

double rel_diff(const Vec& a, const Vec& b) {
  const double n = b.norm();
  return (a - b).norm() / (n > 0.0 ? n : 1.0);
}

double grad_rel_diff(const ann::MlpGradient& a, const ann::MlpGradient& b) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t l = 0; l < a.dW.size(); ++l) {
    diff += (a.dW[l] - b.dW[l]).squaredNorm();
    norm += b.dW[l].squaredNorm();
  }
  return std::sqrt(diff / norm);
}

ann::MlpModel zero_net(const std::vector<int>& dims) {
  ann::MlpModel net = ann::init_mlp(dims, 1);
  for (Mat& w : net.weights) w.setZero();
  return net;
}

rom::PromAnnManifold with_net(const pod::RomBases& bases, ann::MlpModel net) {
  rom::PromAnnManifold m;
  m.bases = bases;
  m.net = std::move(net);
  m.variant = rom::Variant::scaled;
  return m;
}

std::vector<int> net_dims(int n, const std::vector<int>& hidden, int n_bar) {
  std::vector<int> dims{n};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(n_bar);
  return dims;
}

double geometric_mean(const std::vector<double>& values) {
  double acc = 0.0;
  for (double v : values) acc += std::log(v);
  return std::exp(acc / static_cast<double>(values.size()));
}

// Exact radical inverse as an integer fraction: sum of digit_i / base^(i+1)
// with the digits of `index` in the given base, least significant first.
double radical_inverse_brute(std::uint64_t index, std::uint64_t base) {
  std::uint64_t numerator = 0, denominator = 1;
  while (index > 0) {
    numerator = numerator * base + index % base;
    denominator *= base;
    index /= base;
  }
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string work_dir = argc > 1 ? argv[1] : "acceptance_work";

  cfg::RunConfig cfg = cfg::default_config();
  cfg.output_dir = work_dir;
  cfg.threads = 1;  // timings and artifacts are single-threaded by design
  const pipeline::Paths paths = pipeline::resolve_paths(cfg);

  std::printf("== acceptance: physics-informed reduced-order training ==\n");
  std::printf("work dir %s, config %s\n\n", paths.root.c_str(),
              util::hex64(cfg.hash).c_str());

  const fem::FemModel model = pipeline::make_model(cfg);
  const int dofs = model.dof_count();

  // shared artifacts, filled by the earlier gates and reused by the later ones
  std::optional<snap::SnapshotSet> train_set, val_set, test_set;
  std::optional<pod::RomBases> bases_run;  // the configured (n, n_bar) split
  std::map<int, rom::Bundle> sloss_bundles, rloss_bundles;
  std::map<int, eval::ReportRow> recon_sloss, recon_pod, recon_rloss;
  std::map<int, eval::ReportRow> rom_sloss, rom_pod, rom_rloss;

  // 1 ------------------------------------------------------------------------
  gate(1, "assembled jacobian matches central differences and the vjp its transpose", [&] {
    util::Stopwatch watch;
    std::mt19937_64 rng(101);
    std::normal_distribution<double> gauss;
    const fem::LoadParams mu{1000.0, -500.0};

    double max_col = 0.0, max_vjp = 0.0;
    for (int s = 0; s < 20; ++s) {
      Vec u(dofs);
      for (int k = 0; k < dofs; ++k) u[k] = 2e-3 * gauss(rng);
      const SpMat J = model.jacobian(u, mu);

      for (int k = 0; k < dofs; ++k) {
        const double h = 1e-7 * (1.0 + std::abs(u[k]));
        Vec up = u, um = u;
        up[k] += h;
        um[k] -= h;
        const Vec fd = (model.residual(up, mu) - model.residual(um, mu)) / (2.0 * h);
        max_col = std::max(max_col, rel_diff(Vec(J.col(k)), fd));
      }

      Vec w(dofs);
      for (int k = 0; k < dofs; ++k) w[k] = gauss(rng);
      const Vec reference = J.transpose() * w;
      max_vjp = std::max(max_vjp, rel_diff(model.vjp(u, mu, w), reference));
    }
    const double elapsed = watch.seconds();
    require(max_col <= kJacobianFdRelTol,
            fmt("jacobian column error %.3e > %.1e", max_col, kJacobianFdRelTol));
    require(max_vjp <= kVjpRelTol,
            fmt("vjp error %.3e > %.1e", max_vjp, kVjpRelTol));
    require(elapsed < kFemBudgetSeconds,
            fmt("took %.1f s, budget %.0f s", elapsed, kFemBudgetSeconds));
    return fmt("max column %.2e, max vjp %.2e, %.1f s", max_col, max_vjp, elapsed);
  });

  // 2 ------------------------------------------------------------------------
  gate(2, "every sampled load solves below tolerance and mirrored loads mirror", [&] {
    util::Stopwatch watch;
    pipeline::cmd_generate(cfg, paths);
    const double generate_s = watch.seconds();

    train_set = pipeline::load_split_checked(cfg, paths, "train");
    val_set = pipeline::load_split_checked(cfg, paths, "val");
    test_set = pipeline::load_split_checked(cfg, paths, "test");
    require(train_set->count() == cfg.train_count &&
                val_set->count() == cfg.val_count && test_set->count() == cfg.test_count,
            fmt("kept %ld/%ld/%ld of %d/%d/%d samples", train_set->count(),
                val_set->count(), test_set->count(), cfg.train_count, cfg.val_count,
                cfg.test_count));

    double max_norm = 0.0;
    for (const snap::SnapshotSet* set : {&*train_set, &*val_set, &*test_set})
      for (Eigen::Index j = 0; j < set->count(); ++j)
        max_norm = std::max(max_norm, model.residual(set->U_star.col(j),
                                                     set->params[static_cast<std::size_t>(j)])
                                          .norm());
    require(max_norm <= kSolveResidualTol,
            fmt("stored state residual %.3e > %.1e", max_norm, kSolveResidualTol));

    // transverse mirror: (px, -py) must give the y-mirrored state of (px, py)
    const Vec ua = model.full_from_free(fem::solve_fom(model, {800.0, 600.0}).u);
    const Vec ub = model.full_from_free(fem::solve_fom(model, {800.0, -600.0}).u);
    const fem::Mesh& mesh = model.mesh();
    double max_mirror = 0.0;
    for (int i = 0; i < mesh.node_count(); ++i) {
      const double x = mesh.nodes[static_cast<std::size_t>(i)][0];
      const double y = mesh.nodes[static_cast<std::size_t>(i)][1];
      int partner = -1;
      for (int j = 0; j < mesh.node_count(); ++j)
        if (std::abs(mesh.nodes[static_cast<std::size_t>(j)][0] - x) < 1e-12 &&
            std::abs(mesh.nodes[static_cast<std::size_t>(j)][1] - (cfg.height - y)) < 1e-12) {
          partner = j;
          break;
        }
      require(partner >= 0, "mesh is not mirror symmetric");
      max_mirror = std::max(max_mirror, std::abs(ua[2 * i] - ub[2 * partner]));
      max_mirror = std::max(max_mirror, std::abs(ua[2 * i + 1] + ub[2 * partner + 1]));
    }
    require(max_mirror <= kMirrorTol,
            fmt("mirror asymmetry %.3e > %.1e", max_mirror, kMirrorTol));
    require(generate_s < kDatasetBudgetSeconds,
            fmt("generation took %.1f s, budget %.0f s", generate_s,
                kDatasetBudgetSeconds));
    return fmt("675 solves, max |R| %.2e, mirror %.2e, %.1f s", max_norm, max_mirror,
               generate_s);
  });

  // 3 ------------------------------------------------------------------------
  gate(3, "decoder is exact at zero, left-inverts the encoder, and reduces to POD", [&] {
    pipeline::cmd_svd(cfg, paths);
    bases_run = pipeline::ensure_bases(cfg, paths, cfg.n, cfg.n_bar);
    require(train_set.has_value(), "dataset gate did not run");

    rom::PromAnnManifold m =
        with_net(*bases_run, ann::init_mlp(net_dims(cfg.n, cfg.hidden, cfg.n_bar), 202));
    require(rom::decode(m, rom::encode(m, Vec::Zero(dofs))).norm() == 0.0,
            "decode(encode(0)) is not exactly zero");

    std::mt19937_64 rng(203);
    std::normal_distribution<double> gauss;
    double max_round_trip = 0.0;
    for (int t = 0; t < 100; ++t) {
      Vec q(cfg.n);
      for (int k = 0; k < cfg.n; ++k) q[k] = gauss(rng);
      max_round_trip = std::max(max_round_trip, rel_diff(rom::encode(m, rom::decode(m, q)), q));
    }
    require(max_round_trip <= kEncodeRoundTripRelTol,
            fmt("encode(decode(q)) error %.3e > %.1e", max_round_trip,
                kEncodeRoundTripRelTol));

    // with all weights zero the manifold must reproduce the primary projection
    rom::PromAnnManifold flat =
        with_net(*bases_run, zero_net(net_dims(cfg.n, cfg.hidden, cfg.n_bar)));
    const Mat& U = train_set->U_star;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < U.cols(); ++j)
      acc += (rom::decode(flat, rom::encode(flat, U.col(j))) - U.col(j)).squaredNorm();
    const double recon = acc / (static_cast<double>(U.cols()) * static_cast<double>(U.rows()));
    const double mismatch = std::abs(recon - bases_run->e_pod_d) / bases_run->e_pod_d;
    require(mismatch <= kPodReconMatchRelTol,
            fmt("zero-weight recon %.17g vs POD %.17g (rel %.3e)", recon,
                bases_run->e_pod_d, mismatch));
    return fmt("round trip %.2e, POD match rel %.2e", max_round_trip, mismatch);
  });

  // 4 ------------------------------------------------------------------------
  gate(4, "combined loss gradient agrees with finite differences on a spring chain", [&] {
    fem::SpringChainModel chain(1.0, 1.0, 8);
    const fem::LoadParams mu_res{0.3, 0.0};

    std::mt19937_64 rng(404);
    std::normal_distribution<double> gauss;
    const int samples = 10;
    Mat U(8, samples);
    for (Eigen::Index i = 0; i < U.size(); ++i) U.data()[i] = 0.2 * gauss(rng);
    Mat R(8, samples);
    for (int j = 0; j < samples; ++j) R.col(j) = chain.residual(U.col(j), mu_res);

    pod::RomBases bases = pod::build_bases(pod::compute_svd(U), 3, 4, samples);
    const double e_pod_d = pod::compute_e_pod_d(bases, U);
    snap::SnapshotSet set;
    set.U_star = U;
    set.R_star = R;
    set.params.assign(samples, mu_res);
    set.mu_res = mu_res;
    const double e_pod_r = pod::compute_e_pod_r(bases, chain, set);

    rom::PromAnnManifold m = with_net(bases, ann::init_mlp({3, 8, 4}, 405));
    const train::EncodedSet enc = train::encode_dataset(m, U);
    const std::vector<int> idx{0, 2, 5, 7};

    const auto loss_at = [&](double omega_d, double omega_r) {
      train::BatchWork w = train::reconstruct_work(m, U, enc, idx);
      double value = omega_d > 0.0 ? omega_d * train::data_loss(w, e_pod_d) : 0.0;
      if (omega_r > 0.0)
        value += omega_r * train::residual_loss_and_cotangents(w, chain, R, mu_res,
                                                               e_pod_r, false);
      return value;
    };

    double worst = 0.0;
    for (const auto& [omega_d, omega_r] :
         std::vector<std::pair<double, double>>{{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}}) {
      train::BatchWork work = train::reconstruct_work(m, U, enc, idx);
      train::residual_loss_and_cotangents(work, chain, R, mu_res, e_pod_r, true);
      const ann::MlpGradient grad =
          train::combined_gradient(m, work, omega_d, omega_r, e_pod_d, e_pod_r);

      ann::MlpGradient fd = ann::zero_gradient(m.net);
      const double h = 1e-6;
      for (std::size_t l = 0; l < m.net.weights.size(); ++l)
        for (Eigen::Index k = 0; k < m.net.weights[l].size(); ++k) {
          double& theta = m.net.weights[l].data()[k];
          const double keep = theta;
          theta = keep + h;
          const double up = loss_at(omega_d, omega_r);
          theta = keep - h;
          const double down = loss_at(omega_d, omega_r);
          theta = keep;
          fd.dW[l].data()[k] = (up - down) / (2.0 * h);
        }
      worst = std::max(worst, grad_rel_diff(grad, fd));
    }
    require(worst <= kGradOracleRelTol,
            fmt("gradient vs differences %.3e > %.1e", worst, kGradOracleRelTol));
    return fmt("data, residual and mixed weightings, worst rel %.2e", worst);
  });

  // 5 ------------------------------------------------------------------------
  gate(5, "full-space data gradient equals the reduced-space shortcut", [&] {
    require(bases_run.has_value() && train_set.has_value(), "earlier gates did not run");
    rom::PromAnnManifold probe =
        with_net(*bases_run, zero_net(net_dims(cfg.n, cfg.hidden, cfg.n_bar)));
    const train::EncodedSet enc = train::encode_dataset(probe, train_set->U_star);

    std::vector<int> order(static_cast<std::size_t>(train_set->count()));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(505);
    train::fisher_yates(order, rng);
    const std::vector<int> idx(order.begin(), order.begin() + 32);

    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      rom::PromAnnManifold m = with_net(
          *bases_run, ann::init_mlp(net_dims(cfg.n, cfg.hidden, cfg.n_bar), 600 + i));
      train::BatchWork work = train::reconstruct_work(m, train_set->U_star, enc, idx);
      const ann::MlpGradient full = train::combined_gradient(m, work, 1.0, 0.0, 1.0, 1.0);
      const ann::MlpGradient compact = train::compact_q_gradient(m, enc, idx);
      worst = std::max(worst, grad_rel_diff(full, compact));
    }
    require(worst <= kCompactGradRelTol,
            fmt("gradient paths differ by %.3e > %.1e", worst, kCompactGradRelTol));
    return fmt("10 random networks, batch 32, worst rel %.2e", worst);
  });

  // 6 ------------------------------------------------------------------------
  gate(6, "zero-weight losses on the full training set are exactly one", [&] {
    require(bases_run.has_value() && train_set.has_value(), "earlier gates did not run");
    rom::PromAnnManifold flat =
        with_net(*bases_run, zero_net(net_dims(cfg.n, cfg.hidden, cfg.n_bar)));
    const train::EncodedSet enc = train::encode_dataset(flat, train_set->U_star);
    std::vector<int> all(static_cast<std::size_t>(train_set->count()));
    std::iota(all.begin(), all.end(), 0);

    train::BatchWork work = train::reconstruct_work(flat, train_set->U_star, enc, all);
    const double data = train::data_loss(work, bases_run->e_pod_d);
    require(std::abs(data - 1.0) <= kDataAnchorTol,
            fmt("data loss %.17g != 1 (tol %.1e)", data, kDataAnchorTol));
    const double residual = train::residual_loss_and_cotangents(
        work, model, train_set->R_star, train_set->mu_res, bases_run->e_pod_r, false);
    require(std::abs(residual - 1.0) <= kResidualAnchorTol,
            fmt("residual loss %.17g != 1 (tol %.1e)", residual, kResidualAnchorTol));
    return fmt("data |L-1| %.2e, residual |L-1| %.2e", std::abs(data - 1.0),
               std::abs(residual - 1.0));
  });

  // 7 ------------------------------------------------------------------------
  gate(7, "zero-weight online solves follow the plain POD iterates", [&] {
    require(bases_run.has_value() && test_set.has_value(), "earlier gates did not run");
    rom::PromAnnManifold flat =
        with_net(*bases_run, zero_net(net_dims(cfg.n, cfg.hidden, cfg.n_bar)));
    rom::RomConfig rc = cfg.rom;
    rc.record_iterates = true;

    double max_diff = 0.0;
    for (int j = 0; j < 5; ++j) {
      const fem::LoadParams mu = test_set->params[static_cast<std::size_t>(j)];
      const rom::RomResult a = rom::rom_solve(flat, model, mu, rc);
      const rom::RomResult b = rom::pod_rom_solve(bases_run->phi, model, mu, rc);
      const std::size_t common = std::min(a.u_iterates.size(), b.u_iterates.size());
      require(common >= 1, "no iterates recorded");
      require(a.u_iterates.size() - common <= 1 && b.u_iterates.size() - common <= 1,
              fmt("iterate counts diverge: %zu vs %zu", a.u_iterates.size(),
                  b.u_iterates.size()));
      for (std::size_t k = 0; k < common; ++k)
        max_diff = std::max(max_diff, (a.u_iterates[k] - b.u_iterates[k]).norm());
      max_diff = std::max(max_diff, (a.u - b.u).norm());
    }
    require(max_diff <= kIterateMatchTol,
            fmt("iterates differ by %.3e > %.1e", max_diff, kIterateMatchTol));
    return fmt("5 test loads, max |du| %.2e", max_diff);
  });

  // 8 ------------------------------------------------------------------------
  gate(8, "snapshot-trained manifolds beat POD tenfold across the whole grid", [&] {
    require(test_set.has_value(), "dataset gate did not run");
    util::Stopwatch watch;
    for (int n : cfg.grid_n)
      sloss_bundles.emplace(n, pipeline::ensure_bundle(cfg, paths, train::LossMode::s_loss, n));
    const double grid_s = watch.seconds();

    bool recon_ok = true, rom_ok = true;
    for (int n : cfg.grid_n) {
      const pod::RomBases bases =
          pipeline::ensure_bases(cfg, paths, n, pipeline::paired_n_bar(cfg, n));
      const rom::PromAnnManifold& m = sloss_bundles.at(n).manifold;
      recon_sloss[n] = eval::evaluate_reconstruction("sloss", m, model, *test_set);
      recon_pod[n] = eval::evaluate_pod_reconstruction(bases, model, *test_set);
      rom_sloss[n] = eval::evaluate_rom("sloss", m, model, *test_set, cfg.rom);
      rom_pod[n] = eval::evaluate_pod_rom(bases, model, *test_set, cfg.rom);
      info(fmt("n=%2d  recon e_u: trained %.3e  pod %.3e   rom e_u: trained %.3e  pod %.3e",
               n, recon_sloss[n].e_u, recon_pod[n].e_u, rom_sloss[n].e_u, rom_pod[n].e_u));
      recon_ok = recon_ok && recon_sloss[n].e_u * kImprovementFactor <= recon_pod[n].e_u;
      rom_ok = rom_ok && rom_sloss[n].e_u * kImprovementFactor <= rom_pod[n].e_u;
    }
    require(recon_ok, "reconstruction does not improve on POD tenfold everywhere");
    require(rom_ok, "online accuracy does not improve on POD tenfold everywhere");
    require(grid_s < kGridBudgetSeconds,
            fmt("grid training took %.0f s, budget %.0f s", grid_s, kGridBudgetSeconds));
    return fmt("5 sizes, >=%.0fx everywhere, grid %.1f s", kImprovementFactor, grid_s);
  });

  // 9 ------------------------------------------------------------------------
  gate(9, "residual refinement lowers residual error and keeps online accuracy", [&] {
    require(!recon_sloss.empty(), "grid gate did not run");
    for (int n : cfg.grid_n)
      rloss_bundles.emplace(n, pipeline::ensure_bundle(cfg, paths, train::LossMode::r_loss, n));

    int wins = 0;
    std::vector<double> rom_r_values, rom_s_values;
    for (int n : cfg.grid_n) {
      const rom::PromAnnManifold& m = rloss_bundles.at(n).manifold;
      recon_rloss[n] = eval::evaluate_reconstruction("rloss", m, model, *test_set);
      rom_rloss[n] = eval::evaluate_rom("rloss", m, model, *test_set, cfg.rom);
      if (recon_rloss[n].e_r <= recon_sloss[n].e_r) ++wins;
      rom_r_values.push_back(rom_rloss[n].e_u);
      rom_s_values.push_back(rom_sloss[n].e_u);
      info(fmt("n=%2d  recon e_R: refined %.3e  base %.3e   rom e_u: refined %.3e  base %.3e",
               n, recon_rloss[n].e_r, recon_sloss[n].e_r, rom_rloss[n].e_u,
               rom_sloss[n].e_u));
    }
    require(wins >= kResidualWinsNeeded,
            fmt("residual error improves at only %d of %zu grid points", wins,
                cfg.grid_n.size()));
    const double ratio = geometric_mean(rom_r_values) / geometric_mean(rom_s_values);
    require(ratio <= kRomCrossoverSlack,
            fmt("online accuracy ratio %.3f > %.2f", ratio, kRomCrossoverSlack));
    return fmt("residual wins %d/%zu, online ratio %.3f", wins, cfg.grid_n.size(), ratio);
  });

  // 10 -----------------------------------------------------------------------
  gate(10, "cotangent training batches and reduced solves pay off at runtime", [&] {
    require(train_set.has_value() && test_set.has_value() && !sloss_bundles.empty(),
            "earlier gates did not run");
    const rom::PromAnnManifold& m = sloss_bundles.at(cfg.grid_n.front()).manifold;
    const eval::BatchTimings bt = eval::benchmark_training_batches(
        m, model, *train_set, cfg.batch_size, cfg.bench_batch_reps, cfg.bench_naive_reps);
    info(fmt("batch: snapshot %.3e s, residual %.3e s, naive residual %.3e s",
             bt.snapshot_s, bt.residual_opt_s, bt.residual_naive_s));
    require(bt.snapshot_s < bt.residual_opt_s,
            "snapshot batches are not cheaper than residual batches");
    require(bt.residual_opt_s * kBatchSpeedupFactor <= bt.residual_naive_s,
            fmt("cotangent path only %.1fx faster than materialized jacobians",
                bt.residual_naive_s / bt.residual_opt_s));

    std::vector<fem::LoadParams> loads(test_set->params.begin(),
                                       test_set->params.begin() + cfg.bench_loads);
    const eval::SolverTimingRow reduced =
        eval::benchmark_manifold_solver(m, model, loads, cfg.rom);
    const eval::SolverTimingRow full = eval::benchmark_fom_solver(model, loads, cfg.newton);
    info(fmt("system solve: reduced (n=%d) %.3e s, full (%d dofs) %.3e s",
             reduced.q_size, reduced.mean_system_solve_s, full.q_size,
             full.mean_system_solve_s));
    require(reduced.failures == 0 && full.failures == 0, "benchmark solves failed");
    require(reduced.mean_system_solve_s * kSolveSpeedupFactor <= full.mean_system_solve_s,
            fmt("reduced solve only %.1fx faster than the full system",
                full.mean_system_solve_s / reduced.mean_system_solve_s));
    return fmt("residual/naive %.0fx, reduced/full %.0fx",
               bt.residual_naive_s / bt.residual_opt_s,
               full.mean_system_solve_s / reduced.mean_system_solve_s);
  });

  // 11 -----------------------------------------------------------------------
  gate(11, "low-discrepancy samples equal the brute-force radical inverse", [&] {
    for (std::uint64_t i = 1; i <= 8; ++i) {
      const Vec2 p = snap::halton_point(i);
      require(p[0] == radical_inverse_brute(i, 2) && p[1] == radical_inverse_brute(i, 3),
              fmt("halton point %llu deviates from the digit expansion",
                  static_cast<unsigned long long>(i)));
    }
    return "first 8 points exact in bases 2 and 3";
  });

  // 12 -----------------------------------------------------------------------
  gate(12, "edge studies: small-sample win, bounded extrapolation, robust variants", [&] {
    require(!recon_sloss.empty() && train_set.has_value(), "grid gate did not run");

    // (a) with only 500 training samples the trained manifold still beats POD
    for (int n : cfg.grid_n)
      require(recon_sloss.at(n).e_u < recon_pod.at(n).e_u,
              fmt("POD reconstruction wins at n=%d with %d samples", n, cfg.train_count));

    // (b) out-of-box loads: reconstruction stays finite, and accurate once the
    // primary basis is rich enough
    const snap::SnapshotSet band = pipeline::ensure_extrapolation_set(cfg, paths);
    double worst_extrap = 0.0;
    for (int n : cfg.grid_n) {
      const eval::ExtrapolationRow row = eval::evaluate_extrapolation(
          "sloss", sloss_bundles.at(n).manifold, band);
      info(fmt("extrapolation n=%2d  e_u %.3e over %d loads", n, row.e_u, row.n_samples));
      require(std::isfinite(row.e_u), fmt("extrapolation error diverges at n=%d", n));
      if (n >= kExtrapolationStrictN) {
        require(row.e_u <= kExtrapolationCeiling,
                fmt("extrapolation e_u %.3e > %.1e at n=%d", row.e_u,
                    kExtrapolationCeiling, n));
        worst_extrap = std::max(worst_extrap, row.e_u);
      }
    }

    // (c) every configured width/batch variant trains below the POD anchor
    const int nc = cfg.appendix_c_n;
    const pod::RomBases bases_c =
        pipeline::ensure_bases(cfg, paths, nc, pipeline::paired_n_bar(cfg, nc));
    double worst_variant = 0.0;
    for (std::size_t i = 0; i < cfg.appendix_c_variants.size(); ++i) {
      const auto& variant = cfg.appendix_c_variants[i];
      const std::string tag = std::to_string(i);
      rom::PromAnnManifold init = with_net(
          bases_c, ann::init_mlp(net_dims(nc, variant.hidden, bases_c.n_bar()),
                                 pipeline::derive_seed(cfg, "appc/init/" + tag)));
      train::TrainConfig tc;
      tc.mode = train::LossMode::s_loss;
      tc.epochs = cfg.appendix_c_epochs;
      tc.batch_size = variant.batch_size;
      tc.lr0 = cfg.sloss_lr0;
      tc.lr_min = cfg.lr_min;
      tc.seed = pipeline::derive_seed(cfg, "appc/shuffle/" + tag);
      tc.adamw = cfg.adamw;
      const train::TrainResult result =
          train::train(init, nullptr, *train_set, *val_set, tc);
      info(fmt("variant %zu (hidden %zu layers, batch %d): val data loss %.3e", i,
               variant.hidden.size(), variant.batch_size, result.best_val_data_loss));
      require(result.best_val_data_loss < kVariantLossCeiling,
              fmt("variant %zu stalls at val data loss %.3e", i,
                  result.best_val_data_loss));
      worst_variant = std::max(worst_variant, result.best_val_data_loss);
    }
    return fmt("all sizes beat POD at %d samples, extrapolation <= %.2e, variants <= %.2e",
               cfg.train_count, worst_extrap, worst_variant);
  });

  std::printf("\n%d of 12 criteria failed\n", g_failures);
  return g_failures;
}
