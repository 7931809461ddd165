#include "romforge/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "romforge/util.hpp"

namespace romforge::train {

std::string loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::q_loss: return "qloss";
    case LossMode::s_loss: return "sloss";
    case LossMode::r_loss: return "rloss";
  }
  throw ConfigError("bad loss mode");
}

LossMode loss_mode_from_name(const std::string& name) {
  if (name == "qloss") return LossMode::q_loss;
  if (name == "sloss") return LossMode::s_loss;
  if (name == "rloss") return LossMode::r_loss;
  throw ConfigError("unknown loss mode: " + name + " (expected qloss|sloss|rloss)");
}

EncodedSet encode_dataset(const rom::PromAnnManifold& m, const Mat& U, int threads) {
  EncodedSet enc;
  enc.q.resize(static_cast<std::size_t>(U.cols()));
  enc.q_bar.resize(static_cast<std::size_t>(U.cols()));
  util::parallel_for(0, U.cols(), threads, [&](std::int64_t j) {
    const Vec u = U.col(j);
    enc.q[static_cast<std::size_t>(j)] = rom::encode(m, u);
    if (m.variant == rom::Variant::scaled)
      enc.q_bar[static_cast<std::size_t>(j)] =
          (m.bases.phi_bar.transpose() * u).cwiseQuotient(m.bases.xi_bar);
    else
      enc.q_bar[static_cast<std::size_t>(j)] = m.bases.phi_bar.transpose() * (u - m.u_ref);
  });
  return enc;
}

BatchWork reconstruct_work(const rom::PromAnnManifold& m, const Mat& U_star,
                           const EncodedSet& enc, const std::vector<int>& indices,
                           int threads) {
  BatchWork work;
  work.idx = indices;
  const std::size_t n = indices.size();
  work.q.resize(n);
  work.u.resize(n);
  work.e_d.resize(n);
  util::parallel_for(0, static_cast<std::int64_t>(n), threads, [&](std::int64_t s) {
    const int j = indices[static_cast<std::size_t>(s)];
    work.q[static_cast<std::size_t>(s)] = enc.q[static_cast<std::size_t>(j)];
    work.u[static_cast<std::size_t>(s)] = rom::decode(m, work.q[static_cast<std::size_t>(s)]);
    work.e_d[static_cast<std::size_t>(s)] =
        work.u[static_cast<std::size_t>(s)] - U_star.col(j);
  });
  return work;
}

double data_loss(const BatchWork& work, double e_pod_d) {
  if (work.size() == 0) throw ConfigError("empty batch");
  if (!(e_pod_d > 0.0)) throw ConfigError("e_pod_d must be positive");
  double acc = 0.0;
  for (const auto& e : work.e_d) acc += e.squaredNorm();
  const double n = static_cast<double>(work.u.front().size());
  return acc / (static_cast<double>(work.size()) * n * e_pod_d);
}

double residual_loss_and_cotangents(BatchWork& work, const fem::ResidualModel& model,
                                    const Mat& R_star, const fem::LoadParams& mu_res,
                                    double e_pod_r, bool with_cotangents, int threads) {
  if (work.size() == 0) throw ConfigError("empty batch");
  if (!(e_pod_r > 0.0)) throw ConfigError("e_pod_r must be positive");
  const std::size_t n = work.idx.size();
  work.e_r.resize(n);
  work.v_r.resize(with_cotangents ? n : 0);
  util::parallel_for(0, static_cast<std::int64_t>(n), threads, [&](std::int64_t s) {
    const int j = work.idx[static_cast<std::size_t>(s)];
    const Vec& u = work.u[static_cast<std::size_t>(s)];
    try {
      work.e_r[static_cast<std::size_t>(s)] = model.residual(u, mu_res) - R_star.col(j);
      if (with_cotangents)
        work.v_r[static_cast<std::size_t>(s)] =
            model.vjp(u, mu_res, work.e_r[static_cast<std::size_t>(s)]);
    } catch (const DegenerateStateError& e) {
      throw DegenerateStateError("sample " + std::to_string(j) +
                                 " left the admissible set: " + e.what());
    }
  });
  double acc = 0.0;
  for (const auto& e : work.e_r) acc += e.squaredNorm();
  const double dofs = static_cast<double>(work.u.front().size());
  return acc / (static_cast<double>(work.size()) * dofs * e_pod_r);
}

double compact_q_loss(const rom::PromAnnManifold& m, const EncodedSet& enc,
                      const std::vector<int>& indices) {
  if (indices.empty()) throw ConfigError("empty batch");
  double acc = 0.0;
  for (int j : indices) {
    const Vec pred = ann::forward(m.net, enc.q[static_cast<std::size_t>(j)]);
    const Vec diff = pred - enc.q_bar[static_cast<std::size_t>(j)];
    if (m.variant == rom::Variant::scaled)
      acc += diff.cwiseProduct(m.bases.xi_bar).squaredNorm();
    else
      acc += diff.squaredNorm();
  }
  const double count = static_cast<double>(indices.size());
  if (m.variant == rom::Variant::scaled)
    return acc / (count * static_cast<double>(m.dofs()));
  return acc / count;
}

ann::MlpGradient compact_q_gradient(const rom::PromAnnManifold& m, const EncodedSet& enc,
                                    const std::vector<int>& indices) {
  if (indices.empty()) throw ConfigError("empty batch");
  const double count = static_cast<double>(indices.size());
  const double scale = m.variant == rom::Variant::scaled
                           ? 2.0 / (count * static_cast<double>(m.dofs()))
                           : 2.0 / count;
  std::vector<Vec> inputs, cots;
  inputs.reserve(indices.size());
  cots.reserve(indices.size());
  for (int j : indices) {
    const Vec& q = enc.q[static_cast<std::size_t>(j)];
    const Vec diff = ann::forward(m.net, q) - enc.q_bar[static_cast<std::size_t>(j)];
    inputs.push_back(q);
    if (m.variant == rom::Variant::scaled)
      cots.push_back(scale * diff.cwiseProduct(m.bases.xi_bar.cwiseProduct(m.bases.xi_bar)));
    else
      cots.push_back(scale * diff);
  }
  return ann::grad_from_cotangents(m.net, inputs, cots);
}

namespace {

// Projects a full-space cotangent through the secondary lift onto the net
// output: scaled decoders contribute Phi_bar Xi_bar N(q), original ones
// Phi_bar N(q); everything else in decode() is weight-independent.
Vec net_cotangent(const rom::PromAnnManifold& m, const Vec& full_cot) {
  Vec c = m.bases.phi_bar.transpose() * full_cot;
  if (m.variant == rom::Variant::scaled) c = c.cwiseProduct(m.bases.xi_bar);
  return c;
}

}  // namespace

ann::MlpGradient combined_gradient(const rom::PromAnnManifold& m, const BatchWork& work,
                                   double omega_d, double omega_r, double e_pod_d,
                                   double e_pod_r) {
  const int count = work.size();
  if (count == 0) throw ConfigError("empty batch");
  if (omega_d != 0.0 && !(e_pod_d > 0.0)) throw ConfigError("e_pod_d must be positive");
  if (omega_r != 0.0 && !(e_pod_r > 0.0)) throw ConfigError("e_pod_r must be positive");
  if (omega_r != 0.0 && work.v_r.size() != work.idx.size())
    throw ConfigError("residual cotangents missing from batch work");

  const double dofs = static_cast<double>(work.u.front().size());
  const double lead = 2.0 / (static_cast<double>(count) * dofs);
  std::vector<Vec> cots(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    Vec full = Vec::Zero(work.u.front().size());
    if (omega_d != 0.0) full += (omega_d / e_pod_d) * work.e_d[static_cast<std::size_t>(s)];
    if (omega_r != 0.0) full += (omega_r / e_pod_r) * work.v_r[static_cast<std::size_t>(s)];
    cots[static_cast<std::size_t>(s)] = lead * net_cotangent(m, full);
  }
  return ann::grad_from_cotangents(m.net, work.q, cots);
}

ann::MlpGradient naive_residual_gradient(const rom::PromAnnManifold& m,
                                         const BatchWork& work, double omega_r,
                                         double e_pod_r) {
  const int count = work.size();
  if (count == 0) throw ConfigError("empty batch");
  if (!(e_pod_r > 0.0)) throw ConfigError("e_pod_r must be positive");
  if (work.v_r.size() != work.idx.size())
    throw ConfigError("residual cotangents missing from batch work");

  const auto& net = m.net;
  const std::size_t n_params = net.parameter_count();
  const int n_bar = net.output_dim();
  const Eigen::Index dofs = m.dofs();
  const double lead = 2.0 * omega_r / (static_cast<double>(count) *
                                       static_cast<double>(dofs) * e_pod_r);

  const Mat lift = m.variant == rom::Variant::scaled
                       ? Mat(m.bases.phi_bar * m.bases.xi_bar.asDiagonal())
                       : m.bases.phi_bar;

  Mat net_param_jac(n_bar, static_cast<Eigen::Index>(n_params));
  Mat state_param_jac(dofs, static_cast<Eigen::Index>(n_params));
  Vec flat = Vec::Zero(static_cast<Eigen::Index>(n_params));

  for (int s = 0; s < count; ++s) {
    const std::vector<Vec> input{work.q[static_cast<std::size_t>(s)]};
    // row k of dN/dtheta via a unit cotangent on output k
    for (int k = 0; k < n_bar; ++k) {
      Vec unit = Vec::Zero(n_bar);
      unit[k] = 1.0;
      const auto g = ann::grad_from_cotangents(net, input, {unit});
      Eigen::Index off = 0;
      for (const auto& dw : g.dW) {
        for (Eigen::Index r = 0; r < dw.rows(); ++r)
          for (Eigen::Index c = 0; c < dw.cols(); ++c)
            net_param_jac(k, off++) = dw(r, c);
      }
    }
    // the full state Jacobian nobody should ever materialize
    state_param_jac.noalias() = lift * net_param_jac;
    flat.noalias() +=
        lead * (state_param_jac.transpose() * work.v_r[static_cast<std::size_t>(s)]);
  }

  ann::MlpGradient grad = ann::zero_gradient(net);
  Eigen::Index off = 0;
  for (auto& dw : grad.dW)
    for (Eigen::Index r = 0; r < dw.rows(); ++r)
      for (Eigen::Index c = 0; c < dw.cols(); ++c) dw(r, c) = flat[off++];
  return grad;
}

void fisher_yates(std::vector<int>& perm, std::mt19937_64& rng) {
  for (std::size_t i = perm.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
}

namespace {

struct ValLosses {
  double selected = 0.0;  // the mode's checkpoint metric
  double data = 0.0;
  double residual = -1.0;
};

ValLosses validation_losses(const rom::PromAnnManifold& m, const fem::ResidualModel* model,
                            const snap::SnapshotSet& val_set, const EncodedSet& enc_val,
                            const std::vector<int>& all_val, const TrainConfig& cfg,
                            double e_pod_d, double e_pod_r) {
  ValLosses out;
  if (cfg.mode == LossMode::q_loss) {
    out.selected = compact_q_loss(m, enc_val, all_val);
    out.data = out.selected;
    return out;
  }
  BatchWork work = reconstruct_work(m, val_set.U_star, enc_val, all_val, cfg.threads);
  out.data = data_loss(work, e_pod_d);
  if (cfg.mode == LossMode::s_loss) {
    out.selected = cfg.omega_d * out.data;
    if (cfg.omega_r != 0.0) {
      out.residual = residual_loss_and_cotangents(work, *model, val_set.R_star,
                                                  val_set.mu_res, e_pod_r,
                                                  /*with_cotangents=*/false, cfg.threads);
      out.selected += cfg.omega_r * out.residual;
    }
    return out;
  }
  // r_loss: residual metric selects the checkpoint; data loss is recorded too
  out.residual = residual_loss_and_cotangents(work, *model, val_set.R_star, val_set.mu_res,
                                              e_pod_r, /*with_cotangents=*/false,
                                              cfg.threads);
  out.selected = cfg.omega_r * out.residual + cfg.omega_d * out.data;
  return out;
}

}  // namespace

TrainResult train(const rom::PromAnnManifold& init, const fem::ResidualModel* model,
                  const snap::SnapshotSet& train_set, const snap::SnapshotSet& val_set,
                  const TrainConfig& cfg) {
  rom::validate_manifold(init);
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (train_set.count() == 0 || val_set.count() == 0)
    throw ConfigError("training and validation sets must be non-empty");
  if (train_set.dofs() != init.dofs() || val_set.dofs() != init.dofs())
    throw ConfigError("snapshot dimension does not match manifold");
  const bool needs_model =
      cfg.mode == LossMode::r_loss || (cfg.mode == LossMode::s_loss && cfg.omega_r != 0.0);
  if (needs_model && model == nullptr)
    throw ConfigError("residual loss needs the full-order model");
  if (cfg.mode == LossMode::q_loss && init.variant != rom::Variant::original)
    throw ConfigError("q_loss trains the original (unscaled) variant");

  const double e_pod_d = init.bases.e_pod_d;
  const double e_pod_r = init.bases.e_pod_r;
  // r_loss also reports the data loss on validation, so it needs both scales.
  const bool uses_data = cfg.mode != LossMode::q_loss;
  const bool uses_residual = needs_model;
  if (uses_data && !(e_pod_d > 0.0))
    throw ConfigError("bases carry no e_pod_d normalizer; recompute them");
  if (uses_residual && !(e_pod_r > 0.0))
    throw ConfigError("bases carry no e_pod_r normalizer; recompute them");

  rom::PromAnnManifold current = init;
  const EncodedSet enc_train = encode_dataset(current, train_set.U_star, cfg.threads);
  const EncodedSet enc_val = encode_dataset(current, val_set.U_star, cfg.threads);

  const int m_total = static_cast<int>(train_set.count());
  std::vector<int> perm(static_cast<std::size_t>(m_total));
  for (int i = 0; i < m_total; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::vector<int> all_val(static_cast<std::size_t>(val_set.count()));
  for (int i = 0; i < static_cast<int>(val_set.count()); ++i)
    all_val[static_cast<std::size_t>(i)] = i;

  ann::OptimizerState opt = make_optimizer(current.net, cfg.adamw, cfg.lr0);
  const ann::CosineSchedule schedule{cfg.lr0, cfg.lr_min, cfg.epochs};
  std::mt19937_64 rng(cfg.seed);

  TrainResult result;
  result.manifold = init;  // the 0-epoch result
  result.best_val_loss = std::numeric_limits<double>::infinity();
  result.history.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    util::Stopwatch epoch_watch;
    const double lr = lr_at_epoch(schedule, epoch);
    fisher_yates(perm, rng);

    double loss_acc = 0.0;
    for (int start = 0; start < m_total; start += cfg.batch_size) {
      const int stop = std::min(start + cfg.batch_size, m_total);
      const std::vector<int> batch(perm.begin() + start, perm.begin() + stop);

      double loss = 0.0;
      ann::MlpGradient grad;
      if (cfg.mode == LossMode::q_loss) {
        loss = compact_q_loss(current, enc_train, batch);
        grad = compact_q_gradient(current, enc_train, batch);
      } else {
        BatchWork work = reconstruct_work(current, train_set.U_star, enc_train, batch,
                                          cfg.threads);
        if (cfg.omega_d != 0.0) loss += cfg.omega_d * data_loss(work, e_pod_d);
        if (cfg.omega_r != 0.0)
          loss += cfg.omega_r * residual_loss_and_cotangents(
                                    work, *model, train_set.R_star, train_set.mu_res,
                                    e_pod_r, /*with_cotangents=*/true, cfg.threads);
        grad = combined_gradient(current, work, cfg.omega_d, cfg.omega_r, e_pod_d,
                                 e_pod_r);
      }
      if (!std::isfinite(loss))
        throw ConvergenceError("non-finite training loss at epoch " +
                                   std::to_string(epoch) + ", batch starting at " +
                                   std::to_string(start),
                               loss);
      adamw_step(opt, current.net, grad, lr);
      loss_acc += loss * (stop - start);
    }
    const double train_loss = loss_acc / m_total;

    const ValLosses val = validation_losses(current, model, val_set, enc_val, all_val,
                                            cfg, e_pod_d, e_pod_r);
    if (!std::isfinite(val.selected))
      throw ConvergenceError("non-finite validation loss at epoch " + std::to_string(epoch),
                             val.selected);

    result.history.push_back(
        {epoch, lr, train_loss, val.selected, epoch_watch.millis()});

    if (val.selected < result.best_val_loss) {
      result.best_val_loss = val.selected;
      result.best_epoch = epoch;
      result.manifold = current;
      result.best_val_data_loss = val.data;
      result.best_val_residual_loss = val.residual;
    }

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        !cfg.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%05d", epoch);
      nlohmann::json extra;
      extra["checkpoint_epoch"] = epoch;
      extra["mode"] = loss_mode_name(cfg.mode);
      rom::save_bundle(current, cfg.checkpoint_dir + "/" + name, extra, cfg.seed,
                       cfg.adamw, cfg.lr0);
    }
  }
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "epoch,lr,train_loss,val_loss,wall_ms\n";
  char line[160];
  for (const auto& row : history) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.3f\n", row.epoch, row.lr,
                  row.train_loss, row.val_loss, row.wall_ms);
    os << line;
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace romforge::train
