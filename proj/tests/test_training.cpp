#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "romforge/pod_bases.hpp"
#include "romforge/spring_chain.hpp"
#include "romforge/training.hpp"

using namespace romforge;
namespace fs = std::filesystem;

namespace {

Mat random_matrix(int rows, int cols, std::uint64_t seed, double lo = -1.0,
                  double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

std::vector<int> all_indices(int m) {
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

// random snapshots over the spring chain with their residuals at mu_res
snap::SnapshotSet chain_snapshots(const fem::ResidualModel& model, int count,
                                  std::uint64_t seed) {
  snap::SnapshotSet set;
  set.U_star = 0.2 * random_matrix(model.dof_count(), count, seed);
  set.R_star.resize(model.dof_count(), count);
  for (int j = 0; j < count; ++j)
    set.R_star.col(j) = model.residual(set.U_star.col(j), set.mu_res);
  set.params.assign(std::size_t(count), {0.0, 0.0});
  return set;
}

rom::PromAnnManifold chain_manifold(const fem::ResidualModel& model,
                                    const snap::SnapshotSet& train, int n, int n_bar,
                                    std::uint64_t net_seed) {
  rom::PromAnnManifold m;
  m.bases = pod::build_bases(pod::compute_svd(train.U_star), n, n_bar,
                             std::uint64_t(train.count()));
  m.bases.e_pod_d = pod::compute_e_pod_d(m.bases, train.U_star);
  m.bases.e_pod_r = pod::compute_e_pod_r(m.bases, model, train);
  m.net = ann::init_mlp({n, 8, n_bar}, net_seed);
  m.variant = rom::Variant::scaled;
  return m;
}

ann::MlpModel zero_net(int n, int n_bar) {
  ann::MlpModel net;
  net.layer_dims = {n, 4, n_bar};
  net.weights = {Mat::Zero(4, n), Mat::Zero(n_bar, 4)};
  return net;
}

double grad_rel_diff(const ann::MlpGradient& a, const ann::MlpGradient& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < a.dW.size(); ++l) {
    num += (a.dW[l] - b.dW[l]).squaredNorm();
    den += b.dW[l].squaredNorm();
  }
  return std::sqrt(num / den);
}

// synthetic manifold data: secondary coordinates are the squared primaries
struct Synthetic {
  pod::RomBases bases;
  snap::SnapshotSet train;
  snap::SnapshotSet val;
};

Synthetic make_synthetic(int m_train, int m_val) {
  const Mat raw = random_matrix(8, 4, 404);
  const Mat Q = Eigen::HouseholderQR<Mat>(raw).householderQ() * Mat::Identity(8, 4);
  pod::RomBases b;
  b.phi = Q.leftCols(2);
  b.phi_bar = Q.rightCols(2);
  b.xi = Vec(2);
  b.xi << 1.0, 0.7;
  b.xi_bar = Vec(2);
  b.xi_bar << 0.4, 0.25;
  b.sample_count = std::uint64_t(m_train);

  auto fill = [&](int count, std::uint64_t seed) {
    snap::SnapshotSet set;
    set.U_star.resize(8, count);
    const Mat qs = random_matrix(2, count, seed, -1.5, 1.5);
    for (int j = 0; j < count; ++j) {
      const Vec q = qs.col(j);
      const Vec q_bar = q.array().square();
      set.U_star.col(j) = b.phi * (b.xi.asDiagonal() * q) +
                          b.phi_bar * (b.xi_bar.asDiagonal() * q_bar);
    }
    set.R_star = Mat::Zero(8, count);
    set.params.assign(std::size_t(count), {0.0, 0.0});
    return set;
  };

  Synthetic s;
  s.train = fill(m_train, 505);
  s.val = fill(m_val, 606);
  b.e_pod_d = pod::compute_e_pod_d(b, s.train.U_star);
  s.bases = b;
  return s;
}

}  // namespace

TEST_CASE("loss mode names round trip") {
  CHECK(train::loss_mode_name(train::LossMode::s_loss) == "sloss");
  CHECK(train::loss_mode_from_name("rloss") == train::LossMode::r_loss);
  CHECK(train::loss_mode_from_name("qloss") == train::LossMode::q_loss);
  CHECK_THROWS_AS(train::loss_mode_from_name("zloss"), ConfigError);
}

TEST_CASE("encode_dataset matches per-column encoding") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train = chain_snapshots(model, 8, 1);
  const auto m = chain_manifold(model, train, 2, 2, 2);
  const auto enc = train::encode_dataset(m, train.U_star);
  REQUIRE(int(enc.q.size()) == 8);
  for (int j = 0; j < 8; ++j) {
    CHECK((enc.q[std::size_t(j)] - rom::encode(m, train.U_star.col(j))).norm() == 0.0);
    const Vec q_bar_ref = m.bases.xi_bar.cwiseInverse().asDiagonal() *
                          (m.bases.phi_bar.transpose() * train.U_star.col(j));
    CHECK((enc.q_bar[std::size_t(j)] - q_bar_ref).norm() <= 1e-14);
  }
}

TEST_CASE("data loss is the normalized mean squared mismatch") {
  train::BatchWork work;
  work.idx = {0};
  Vec e(3);
  e << 1.0, 2.0, 2.0;  // squared norm 9
  work.e_d = {e};
  work.u = {Vec::Zero(3)};
  CHECK(train::data_loss(work, 0.5) == doctest::Approx(9.0 / (1.0 * 3.0 * 0.5)));
  CHECK(train::data_loss(work, 1.0) == doctest::Approx(3.0));
}

TEST_CASE("residual loss and cotangent on a single spring by hand") {
  // one unit spring: R(u; 0) = u, dR/du = 1
  fem::SpringChainModel model(1.0, 0.0, 1);
  train::BatchWork work;
  work.idx = {0};
  Vec u(1);
  u << 0.8;
  work.u = {u};
  Mat R_star(1, 1);
  R_star(0, 0) = 0.5;
  const double e_pod_r = 0.25;
  const double loss =
      train::residual_loss_and_cotangents(work, model, R_star, {0.0, 0.0}, e_pod_r);
  // e_r = 0.3, loss = 0.09 / (1 * 1 * 0.25)
  CHECK(loss == doctest::Approx(0.36).epsilon(1e-14));
  CHECK(work.e_r[0][0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(work.v_r[0][0] == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("zero-weight network scores exactly one against the POD normalizers") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train_set = chain_snapshots(model, 10, 3);
  auto m = chain_manifold(model, train_set, 2, 2, 4);
  m.net = zero_net(2, 2);

  const auto enc = train::encode_dataset(m, train_set.U_star);
  auto work = train::reconstruct_work(m, train_set.U_star, enc, all_indices(10));
  CHECK(train::data_loss(work, m.bases.e_pod_d) == doctest::Approx(1.0).epsilon(1e-12));
  const double lr = train::residual_loss_and_cotangents(
      work, model, train_set.R_star, train_set.mu_res, m.bases.e_pod_r);
  CHECK(lr == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("on-manifold data has zero loss and zero cotangents") {
  const auto s = make_synthetic(6, 2);
  rom::PromAnnManifold m;
  m.bases = s.bases;
  m.variant = rom::Variant::scaled;
  // linear-regime network reproducing q_bar = A q for data built the same way
  Mat A(2, 2);
  A << 0.9, -0.3, 0.2, 0.6;
  m.net.layer_dims = {2, 2, 2};
  m.net.weights = {Mat::Identity(2, 2), A};

  snap::SnapshotSet data;
  data.U_star.resize(8, 4);
  const Mat qs = random_matrix(2, 4, 707, 0.1, 1.5);  // positive orthant
  for (int j = 0; j < 4; ++j) {
    const Vec q = qs.col(j);
    data.U_star.col(j) = s.bases.phi * (s.bases.xi.asDiagonal() * q) +
                         s.bases.phi_bar * (s.bases.xi_bar.asDiagonal() * (A * q));
  }
  const auto enc = train::encode_dataset(m, data.U_star);
  auto work = train::reconstruct_work(m, data.U_star, enc, all_indices(4));
  CHECK(train::data_loss(work, 1.0) <= 1e-24);
  CHECK(train::compact_q_loss(m, enc, all_indices(4)) <= 1e-24);
}

TEST_CASE("zero-weight compact loss collapses to the secondary content") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train_set = chain_snapshots(model, 8, 5);
  auto m = chain_manifold(model, train_set, 2, 2, 6);
  m.net = zero_net(2, 2);
  const auto enc = train::encode_dataset(m, train_set.U_star);
  double expected = 0.0;
  for (int j = 0; j < 8; ++j)
    expected += (m.bases.phi_bar.transpose() * train_set.U_star.col(j)).squaredNorm();
  expected /= 8.0 * 6.0;  // m * N
  CHECK(train::compact_q_loss(m, enc, all_indices(8)) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("compact gradient equals the full-space data gradient") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train_set = chain_snapshots(model, 10, 7);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = chain_manifold(model, train_set, 2, 2, 100 + seed);
    const auto enc = train::encode_dataset(m, train_set.U_star);
    const auto idx = all_indices(6);  // batch from the SVD training set
    auto work = train::reconstruct_work(m, train_set.U_star, enc, idx);
    // at e_pod_d = 1 the full-space data loss differs from the compact loss
    // only by a weight-independent offset, so the gradients must agree
    const auto full = train::combined_gradient(m, work, 1.0, 0.0, 1.0, 1.0);
    const auto compact = train::compact_q_gradient(m, enc, idx);
    CHECK(grad_rel_diff(full, compact) <= 1e-8);
  }
}

TEST_CASE("combined gradient matches finite differences of the losses") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train_set = chain_snapshots(model, 8, 9);
  auto m = chain_manifold(model, train_set, 2, 3, 11);
  const auto enc = train::encode_dataset(m, train_set.U_star);
  const std::vector<int> idx = {0, 2, 5, 7};
  const double e_d = m.bases.e_pod_d, e_r = m.bases.e_pod_r;

  auto loss_at = [&](double om_d, double om_r) {
    auto work = train::reconstruct_work(m, train_set.U_star, enc, idx);
    double loss = om_d == 0.0 ? 0.0 : om_d * train::data_loss(work, e_d);
    if (om_r != 0.0)
      loss += om_r * train::residual_loss_and_cotangents(
                         work, model, train_set.R_star, train_set.mu_res, e_r, false);
    return loss;
  };
  auto grad_at = [&](double om_d, double om_r) {
    auto work = train::reconstruct_work(m, train_set.U_star, enc, idx);
    if (om_r != 0.0)
      train::residual_loss_and_cotangents(work, model, train_set.R_star,
                                          train_set.mu_res, e_r, true);
    return train::combined_gradient(m, work, om_d, om_r, e_d, e_r);
  };

  const double weights[3][2] = {{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}};
  for (const auto& w : weights) {
    const auto grad = grad_at(w[0], w[1]);
    double err = 0.0, scale = 0.0;
    for (int l = 0; l < m.net.layer_count(); ++l) {
      Mat& W = m.net.weights[std::size_t(l)];
      for (int r = 0; r < W.rows(); ++r)
        for (int c = 0; c < W.cols(); ++c) {
          const double keep = W(r, c);
          const double h = 1e-6;
          W(r, c) = keep + h;
          const double up = loss_at(w[0], w[1]);
          W(r, c) = keep - h;
          const double dn = loss_at(w[0], w[1]);
          W(r, c) = keep;
          const double fd = (up - dn) / (2.0 * h);
          const double an = grad.dW[std::size_t(l)](r, c);
          err += (an - fd) * (an - fd);
          scale += fd * fd;
        }
    }
    CHECK(std::sqrt(err / scale) <= 1e-4);
  }
}

TEST_CASE("zero cotangents give a zero gradient") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train_set = chain_snapshots(model, 6, 13);
  auto m = chain_manifold(model, train_set, 2, 2, 15);
  const auto enc = train::encode_dataset(m, train_set.U_star);
  auto work = train::reconstruct_work(m, train_set.U_star, enc, all_indices(6));
  for (auto& e : work.e_d) e.setZero();
  work.v_r = work.e_d;
  const auto grad = train::combined_gradient(m, work, 0.7, 0.3, 1.0, 1.0);
  for (const auto& dW : grad.dW) CHECK(dW.norm() == 0.0);
}

TEST_CASE("naive residual gradient agrees with the cotangent path") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train_set = chain_snapshots(model, 8, 17);
  auto m = chain_manifold(model, train_set, 2, 2, 19);
  const auto enc = train::encode_dataset(m, train_set.U_star);
  const std::vector<int> idx = {1, 3, 4, 6};
  auto work = train::reconstruct_work(m, train_set.U_star, enc, idx);
  train::residual_loss_and_cotangents(work, model, train_set.R_star, train_set.mu_res,
                                      m.bases.e_pod_r, true);
  const auto fast = train::combined_gradient(m, work, 0.0, 1.0, 1.0, m.bases.e_pod_r);
  const auto naive = train::naive_residual_gradient(m, work, 1.0, m.bases.e_pod_r);
  CHECK(grad_rel_diff(fast, naive) <= 1e-10);
}

TEST_CASE("fisher-yates shuffles deterministically into permutations") {
  std::vector<int> a = all_indices(50), b = all_indices(50);
  std::mt19937_64 r1(123), r2(123);
  train::fisher_yates(a, r1);
  train::fisher_yates(b, r2);
  CHECK(a == b);
  CHECK(a != all_indices(50));  // astronomically unlikely to be identity
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == all_indices(50));

  std::vector<int> tiny = {7};
  std::mt19937_64 r3(5);
  train::fisher_yates(tiny, r3);
  CHECK(tiny == std::vector<int>{7});
}

TEST_CASE("zero epochs leave the network untouched") {
  const auto s = make_synthetic(8, 3);
  rom::PromAnnManifold init;
  init.bases = s.bases;
  init.net = ann::init_mlp({2, 8, 2}, 21);
  init.variant = rom::Variant::scaled;
  train::TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 4;
  const auto result = train::train(init, nullptr, s.train, s.val, cfg);
  CHECK(result.history.empty());
  for (int l = 0; l < init.net.layer_count(); ++l)
    CHECK((result.manifold.net.weights[std::size_t(l)] -
           init.net.weights[std::size_t(l)]).norm() == 0.0);
}

TEST_CASE("a learnable synthetic map trains below a tenth of the POD error") {
  const auto s = make_synthetic(40, 12);
  rom::PromAnnManifold init;
  init.bases = s.bases;
  init.net = ann::init_mlp({2, 16, 2}, 23);
  init.variant = rom::Variant::scaled;

  train::TrainConfig cfg;
  cfg.mode = train::LossMode::s_loss;
  cfg.epochs = 80;
  cfg.batch_size = 8;
  cfg.lr0 = 2e-2;
  cfg.seed = 29;
  const auto result = train::train(init, nullptr, s.train, s.val, cfg);
  REQUIRE(int(result.history.size()) == 80);
  CHECK(result.best_val_data_loss < 0.1);
  // broad downward trend: late-stage loss well under the starting loss
  CHECK(result.history.back().train_loss < 0.5 * result.history.front().train_loss);
}

TEST_CASE("identical seeds reproduce the training history") {
  const auto s = make_synthetic(10, 4);
  rom::PromAnnManifold init;
  init.bases = s.bases;
  init.net = ann::init_mlp({2, 8, 2}, 31);
  init.variant = rom::Variant::scaled;
  train::TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.seed = 37;
  const auto a = train::train(init, nullptr, s.train, s.val, cfg);
  const auto b = train::train(init, nullptr, s.train, s.val, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].val_loss == b.history[e].val_loss);
    CHECK(a.history[e].lr == b.history[e].lr);
  }
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("residual training runs against the model and needs one") {
  fem::SpringChainModel model(1.0, 0.4, 6);
  const auto train_set = chain_snapshots(model, 8, 41);
  const auto val_set = chain_snapshots(model, 3, 43);
  auto init = chain_manifold(model, train_set, 2, 2, 45);

  train::TrainConfig cfg;
  cfg.mode = train::LossMode::r_loss;
  cfg.omega_d = 0.0;
  cfg.omega_r = 1.0;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.lr0 = 1e-4;
  CHECK_THROWS_AS(train::train(init, nullptr, train_set, val_set, cfg), ConfigError);
  const auto result = train::train(init, &model, train_set, val_set, cfg);
  CHECK(int(result.history.size()) == 3);
  CHECK(result.best_val_residual_loss >= 0.0);
}

TEST_CASE("q-loss mode insists on the original variant") {
  const auto s = make_synthetic(8, 3);
  rom::PromAnnManifold init;
  init.bases = s.bases;
  init.net = ann::init_mlp({2, 8, 2}, 47);
  init.variant = rom::Variant::scaled;
  train::TrainConfig cfg;
  cfg.mode = train::LossMode::q_loss;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  CHECK_THROWS_AS(train::train(init, nullptr, s.train, s.val, cfg), ConfigError);

  init.variant = rom::Variant::original;
  init.u_ref = s.train.U_star.rowwise().mean();
  CHECK_NOTHROW(train::train(init, nullptr, s.train, s.val, cfg));
}

TEST_CASE("periodic checkpoints are written") {
  const auto dir = fs::temp_directory_path() / "romforge_test_training_ckpt";
  fs::remove_all(dir);
  const auto s = make_synthetic(8, 3);
  rom::PromAnnManifold init;
  init.bases = s.bases;
  init.net = ann::init_mlp({2, 8, 2}, 51);
  init.variant = rom::Variant::scaled;
  train::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = dir.string();
  train::train(init, nullptr, s.train, s.val, cfg);
  CHECK(fs::exists(dir / "epoch_00001" / "weights.json"));
  CHECK(fs::exists(dir / "epoch_00003" / "weights.json"));
  CHECK_FALSE(fs::exists(dir / "epoch_00004"));
  fs::remove_all(dir);
}

TEST_CASE("history csv lists one row per epoch") {
  const auto path =
      (fs::temp_directory_path() / "romforge_test_training_history.csv").string();
  std::vector<train::HistoryRow> rows = {{0, 1e-3, 0.5, 0.6, 12.0},
                                         {1, 9e-4, 0.4, 0.5, 11.0}};
  train::write_history_csv(rows, path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,lr,train_loss,val_loss,wall_ms");
  int count = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++count;
  CHECK(count == 2);
  fs::remove(path);
}
