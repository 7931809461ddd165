#include "romforge/metrics.hpp"

#include <cmath>

#include "romforge/util.hpp"

namespace romforge::eval {

namespace {

constexpr double kZeroFloor = 1e-300;

MetricResult aggregate(const std::vector<double>& pred_norms,
                       const std::vector<double>& truth_norms) {
  MetricResult out;
  double log_acc = 0.0;
  bool any_nonzero_error = false;
  for (std::size_t j = 0; j < truth_norms.size(); ++j) {
    if (truth_norms[j] == 0.0) {
      ++out.excluded;
      continue;
    }
    const double rel = pred_norms[j] / truth_norms[j];
    ++out.used;
    if (rel == 0.0) {
      ++out.exact_zero;
      log_acc += std::log(kZeroFloor);
    } else {
      any_nonzero_error = true;
      log_acc += std::log(rel);
    }
  }
  if (out.used == 0) throw ConfigError("metric has no usable samples (all truths zero)");
  out.value = any_nonzero_error || out.exact_zero == 0
                  ? std::exp(log_acc / out.used)
                  : 0.0;  // every sample exact: call it zero, not exp(log floor)
  return out;
}

}  // namespace

MetricResult metric_e_u(const Mat& predictions, const Mat& truths) {
  if (predictions.rows() != truths.rows() || predictions.cols() != truths.cols())
    throw ConfigError("prediction/truth shapes disagree");
  if (truths.cols() == 0) throw ConfigError("metric needs at least one sample");
  std::vector<double> err(static_cast<std::size_t>(truths.cols()));
  std::vector<double> ref(static_cast<std::size_t>(truths.cols()));
  for (Eigen::Index j = 0; j < truths.cols(); ++j) {
    err[static_cast<std::size_t>(j)] = (predictions.col(j) - truths.col(j)).norm();
    ref[static_cast<std::size_t>(j)] = truths.col(j).norm();
  }
  return aggregate(err, ref);
}

MetricResult metric_e_r(const fem::ResidualModel& model, const Mat& predictions,
                        const Mat& truths, const fem::LoadParams& mu_eval, int threads) {
  if (predictions.rows() != truths.rows() || predictions.cols() != truths.cols())
    throw ConfigError("prediction/truth shapes disagree");
  if (truths.cols() == 0) throw ConfigError("metric needs at least one sample");
  if (predictions.rows() != model.dof_count())
    throw ConfigError("sample dimension does not match model");
  std::vector<double> err(static_cast<std::size_t>(truths.cols()));
  std::vector<double> ref(static_cast<std::size_t>(truths.cols()));
  util::parallel_for(0, truths.cols(), threads, [&](std::int64_t j) {
    const Vec r_truth = model.residual(truths.col(j), mu_eval);
    const Vec r_pred = model.residual(predictions.col(j), mu_eval);
    err[static_cast<std::size_t>(j)] = (r_pred - r_truth).norm();
    ref[static_cast<std::size_t>(j)] = r_truth.norm();
  });
  return aggregate(err, ref);
}

}  // namespace romforge::eval
